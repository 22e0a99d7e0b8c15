//! Rate and cost components, and the built-in parametric families.
//!
//! Rates follow `q(t,i,j,a,p,nu) = q0(t,i,j,p,nu) + q1(t,i,j,p) . a` and the
//! running cost splits as `f = f0(t,i,a,p) + f1(t,i,p) + f2(t,p,nu)`.
//! Custom models implement the traits directly.

use std::fmt::Debug;

use crate::measures::{ControlBox, DiscreteMeasure};

pub trait RateModel: Send + Sync + Debug {
    /// Control-free part `q0(t, i, j, p, nu)`.
    fn base(&self, t: f64, i: usize, j: usize, p: &[f64], nu: &DiscreteMeasure) -> f64;

    /// Control slope `q1(t, i, j, p)`, written into `out` of length `l`.
    fn slope(&self, t: f64, i: usize, j: usize, p: &[f64], out: &mut [f64]);

    /// Whether either part reads `p` or `nu`.
    fn depends_on_mean_field(&self) -> bool;
}

pub trait ControlCost: Send + Sync + Debug {
    fn value(&self, t: f64, i: usize, a: &[f64], p: &[f64]) -> f64;

    fn gradient(&self, t: f64, i: usize, a: &[f64], p: &[f64], out: &mut [f64]);

    /// Exact minimizer of `f0(t,i,.,p) + tilt . a` over the box, when one is known.
    fn argmin_with_tilt(
        &self,
        _t: f64,
        _i: usize,
        _p: &[f64],
        _tilt: &[f64],
        _bx: &ControlBox,
        _out: &mut [f64],
    ) -> bool {
        false
    }

    fn depends_on_p(&self) -> bool;
}

pub trait StateCost: Send + Sync + Debug {
    fn value(&self, t: f64, i: usize, p: &[f64]) -> f64;
    fn depends_on_p(&self) -> bool;
}

pub trait InteractionCost: Send + Sync + Debug {
    fn value(&self, t: f64, p: &[f64], nu: &DiscreteMeasure) -> f64;
}

pub trait TerminalCost: Send + Sync + Debug {
    fn value(&self, i: usize, p: &[f64]) -> f64;
    fn depends_on_p(&self) -> bool;
}

/// `q_ij = base_ij + crowd * p_j + slope_ij . a` with constant coefficients.
#[derive(Debug, Clone)]
pub struct LinearRates {
    m: usize,
    l: usize,
    base: Vec<f64>,
    slope: Vec<f64>,
    crowd: f64,
}

impl LinearRates {
    /// `base` is row-major `m x m`; `slope` is `m x m x l`.
    pub fn new(m: usize, l: usize, base: Vec<f64>, slope: Vec<f64>) -> Self {
        assert_eq!(base.len(), m * m, "base must be m x m");
        assert_eq!(slope.len(), m * m * l, "slope must be m x m x l");
        Self {
            m,
            l,
            base,
            slope,
            crowd: 0.0,
        }
    }

    /// Uniform coefficients on every ordered pair.
    pub fn uniform(m: usize, base: f64, slope: &[f64]) -> Self {
        let l = slope.len();
        let mut s = Vec::with_capacity(m * m * l);
        for _ in 0..m * m {
            s.extend_from_slice(slope);
        }
        Self::new(m, l, vec![base; m * m], s)
    }

    /// Adds a congestion term `crowd * p_j` (rates then depend on the mean field).
    pub fn with_crowd(mut self, crowd: f64) -> Self {
        self.crowd = crowd;
        self
    }
}

impl RateModel for LinearRates {
    fn base(&self, _t: f64, i: usize, j: usize, p: &[f64], _nu: &DiscreteMeasure) -> f64 {
        let b = self.base[i * self.m + j];
        if self.crowd == 0.0 {
            b
        } else {
            b + self.crowd * p[j]
        }
    }

    fn slope(&self, _t: f64, i: usize, j: usize, _p: &[f64], out: &mut [f64]) {
        let k = (i * self.m + j) * self.l;
        out.copy_from_slice(&self.slope[k..k + self.l]);
    }

    fn depends_on_mean_field(&self) -> bool {
        self.crowd != 0.0
    }
}

/// `f0 = (c/2)|a|^2 + (b_i + beta p_i) . a`, with closed-form minimizer.
#[derive(Debug, Clone)]
pub struct QuadraticControlCost {
    curvature: f64,
    linear: Vec<Vec<f64>>,
    p_coupling: f64,
}

impl QuadraticControlCost {
    /// `linear[i]` is the vector `b_i`; it may be empty to mean zero.
    pub fn new(curvature: f64, linear: Vec<Vec<f64>>, p_coupling: f64) -> Self {
        assert!(curvature > 0.0, "curvature must be positive");
        Self {
            curvature,
            linear,
            p_coupling,
        }
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    fn coefficient(&self, i: usize, k: usize, p: &[f64]) -> f64 {
        let b = self.linear.get(i).and_then(|v| v.get(k)).copied().unwrap_or(0.0);
        if self.p_coupling == 0.0 {
            b
        } else {
            b + self.p_coupling * p[i]
        }
    }
}

impl ControlCost for QuadraticControlCost {
    fn value(&self, _t: f64, i: usize, a: &[f64], p: &[f64]) -> f64 {
        a.iter()
            .enumerate()
            .map(|(k, x)| 0.5 * self.curvature * x * x + self.coefficient(i, k, p) * x)
            .sum()
    }

    fn gradient(&self, _t: f64, i: usize, a: &[f64], p: &[f64], out: &mut [f64]) {
        for (k, (o, x)) in out.iter_mut().zip(a).enumerate() {
            *o = self.curvature * x + self.coefficient(i, k, p);
        }
    }

    fn argmin_with_tilt(
        &self,
        _t: f64,
        i: usize,
        p: &[f64],
        tilt: &[f64],
        bx: &ControlBox,
        out: &mut [f64],
    ) -> bool {
        // Separable in coordinates, so clamping the stationary point is exact.
        for (k, o) in out.iter_mut().enumerate() {
            let s = -(self.coefficient(i, k, p) + tilt[k]) / self.curvature;
            *o = s.clamp(bx.lower()[k], bx.upper()[k]);
        }
        true
    }

    fn depends_on_p(&self) -> bool {
        self.p_coupling != 0.0
    }
}

/// `f0 = (c/2)|a|^2 + (d/4) sum_k a_k^4 + b_i . a`; minimized numerically.
#[derive(Debug, Clone)]
pub struct QuarticControlCost {
    curvature: f64,
    quartic: f64,
    linear: Vec<Vec<f64>>,
}

impl QuarticControlCost {
    pub fn new(curvature: f64, quartic: f64, linear: Vec<Vec<f64>>) -> Self {
        assert!(curvature > 0.0 && quartic >= 0.0, "need c > 0 and d >= 0");
        Self {
            curvature,
            quartic,
            linear,
        }
    }

    fn b(&self, i: usize, k: usize) -> f64 {
        self.linear.get(i).and_then(|v| v.get(k)).copied().unwrap_or(0.0)
    }
}

impl ControlCost for QuarticControlCost {
    fn value(&self, _t: f64, i: usize, a: &[f64], _p: &[f64]) -> f64 {
        a.iter()
            .enumerate()
            .map(|(k, x)| {
                0.5 * self.curvature * x * x + 0.25 * self.quartic * x.powi(4) + self.b(i, k) * x
            })
            .sum()
    }

    fn gradient(&self, _t: f64, i: usize, a: &[f64], _p: &[f64], out: &mut [f64]) {
        for (k, (o, x)) in out.iter_mut().zip(a).enumerate() {
            *o = self.curvature * x + self.quartic * x.powi(3) + self.b(i, k);
        }
    }

    fn depends_on_p(&self) -> bool {
        false
    }
}

/// `f1(t, i, p) = c_i + kappa p_i + (K p)_i`.
#[derive(Debug, Clone, Default)]
pub struct LinearStateCost {
    constant: Vec<f64>,
    kappa: f64,
    matrix: Option<Vec<Vec<f64>>>,
}

impl LinearStateCost {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(values: Vec<f64>) -> Self {
        Self {
            constant: values,
            ..Self::default()
        }
    }

    pub fn congestion(kappa: f64) -> Self {
        Self {
            kappa,
            ..Self::default()
        }
    }

    pub fn matrix(k: Vec<Vec<f64>>) -> Self {
        Self {
            matrix: Some(k),
            ..Self::default()
        }
    }
}

fn linear_in_p(constant: &[f64], kappa: f64, matrix: &Option<Vec<Vec<f64>>>, i: usize, p: &[f64]) -> f64 {
    let mut v = constant.get(i).copied().unwrap_or(0.0) + kappa * p[i];
    if let Some(k) = matrix {
        v += k[i].iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
    }
    v
}

impl StateCost for LinearStateCost {
    fn value(&self, _t: f64, i: usize, p: &[f64]) -> f64 {
        linear_in_p(&self.constant, self.kappa, &self.matrix, i, p)
    }

    fn depends_on_p(&self) -> bool {
        self.kappa != 0.0 || self.matrix.is_some()
    }
}

/// `f2(t, p, nu) = c + kappa |mean(nu)|^2`.
#[derive(Debug, Clone, Default)]
pub struct ControlMeanCost {
    constant: f64,
    kappa: f64,
}

impl ControlMeanCost {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(constant: f64, kappa: f64) -> Self {
        Self { constant, kappa }
    }
}

impl InteractionCost for ControlMeanCost {
    fn value(&self, _t: f64, _p: &[f64], nu: &DiscreteMeasure) -> f64 {
        if self.kappa == 0.0 {
            return self.constant;
        }
        let m = nu.mean();
        self.constant + self.kappa * m.iter().map(|x| x * x).sum::<f64>()
    }
}

/// `g(i, p) = c_i + kappa p_i + (K p)_i`.
#[derive(Debug, Clone, Default)]
pub struct LinearTerminalCost {
    constant: Vec<f64>,
    kappa: f64,
    matrix: Option<Vec<Vec<f64>>>,
}

impl LinearTerminalCost {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(values: Vec<f64>) -> Self {
        Self {
            constant: values,
            ..Self::default()
        }
    }

    pub fn congestion(values: Vec<f64>, kappa: f64) -> Self {
        Self {
            constant: values,
            kappa,
            matrix: None,
        }
    }

    pub fn matrix(values: Vec<f64>, k: Vec<Vec<f64>>) -> Self {
        Self {
            constant: values,
            kappa: 0.0,
            matrix: Some(k),
        }
    }
}

impl TerminalCost for LinearTerminalCost {
    fn value(&self, i: usize, p: &[f64]) -> f64 {
        linear_in_p(&self.constant, self.kappa, &self.matrix, i, p)
    }

    fn depends_on_p(&self) -> bool {
        self.kappa != 0.0 || self.matrix.is_some()
    }
}

/// `g + shift_i`, used to perturb a terminal cost.
#[derive(Debug, Clone)]
pub struct ShiftedTerminalCost {
    pub inner: std::sync::Arc<dyn TerminalCost>,
    pub shift: Vec<f64>,
}

impl TerminalCost for ShiftedTerminalCost {
    fn value(&self, i: usize, p: &[f64]) -> f64 {
        self.inner.value(i, p) + self.shift[i]
    }

    fn depends_on_p(&self) -> bool {
        self.inner.depends_on_p()
    }
}

/// `f1 + delta`, used to perturb the running cost.
#[derive(Debug, Clone)]
pub struct ShiftedStateCost {
    pub inner: std::sync::Arc<dyn StateCost>,
    pub delta: f64,
}

impl StateCost for ShiftedStateCost {
    fn value(&self, t: f64, i: usize, p: &[f64]) -> f64 {
        self.inner.value(t, i, p) + self.delta
    }

    fn depends_on_p(&self) -> bool {
        self.inner.depends_on_p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_closed_form_clamps() {
        let f0 = QuadraticControlCost::new(1.0, vec![], 0.0);
        let bx = ControlBox::interval(0.1, 2.0).unwrap();
        let mut a = [0.0];
        f0.argmin_with_tilt(0.0, 0, &[0.5, 0.5], &[-1.0], &bx, &mut a);
        assert_eq!(a, [1.0]);
        f0.argmin_with_tilt(0.0, 0, &[0.5, 0.5], &[-5.0], &bx, &mut a);
        assert_eq!(a, [2.0]);
        f0.argmin_with_tilt(0.0, 0, &[0.5, 0.5], &[3.0], &bx, &mut a);
        assert_eq!(a, [0.1]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let f0 = QuarticControlCost::new(0.7, 0.3, vec![vec![0.2, -0.1]]);
        let a = [0.4, -1.3];
        let mut g = [0.0; 2];
        f0.gradient(0.0, 0, &a, &[], &mut g);
        for k in 0..2 {
            let h = 1e-6;
            let mut ap = a;
            let mut am = a;
            ap[k] += h;
            am[k] -= h;
            let fd = (f0.value(0.0, 0, &ap, &[]) - f0.value(0.0, 0, &am, &[])) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn congestion_costs() {
        let g = LinearTerminalCost::congestion(vec![0.0, 1.0], 2.0);
        assert_eq!(g.value(1, &[0.25, 0.75]), 2.5);
        let f1 = LinearStateCost::matrix(vec![vec![1.0, 0.0], vec![0.0, -1.0]]);
        assert_eq!(f1.value(0.0, 1, &[0.5, 0.5]), -0.5);
    }
}
