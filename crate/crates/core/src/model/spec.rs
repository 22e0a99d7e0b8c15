use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::markov::generator::{build_reference_generator, RateMatrix, TransitionMask};
use crate::markov::simplex::SimplexPoint;
use crate::measures::{ControlBox, DiscreteMeasure};
use crate::model::families::{
    ControlCost, ControlMeanCost, InteractionCost, LinearRates, LinearStateCost,
    LinearTerminalCost, QuadraticControlCost, QuarticControlCost, RateModel, ShiftedStateCost,
    ShiftedTerminalCost, StateCost, TerminalCost,
};

/// Structural data of a finite-state mean field game.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    m: usize,
    horizon: f64,
    control_box: ControlBox,
    mask: TransitionMask,
    absorbing_allowed: bool,
    rate_bounds: (f64, f64),
    gamma: f64,
    rates: Arc<dyn RateModel>,
    f0: Arc<dyn ControlCost>,
    f1: Arc<dyn StateCost>,
    f2: Arc<dyn InteractionCost>,
    g: Arc<dyn TerminalCost>,
    p_init: SimplexPoint,
    reference: RateMatrix,
}

impl ProblemSpec {
    pub fn builder(m: usize, horizon: f64, control_box: ControlBox) -> ProblemSpecBuilder {
        ProblemSpecBuilder {
            m,
            horizon,
            control_box,
            mask: None,
            absorbing_allowed: false,
            rate_bounds: None,
            gamma: None,
            rates: None,
            f0: None,
            f1: Arc::new(LinearStateCost::zero()),
            f2: Arc::new(ControlMeanCost::zero()),
            g: Arc::new(LinearTerminalCost::zero()),
            p_init: None,
        }
    }

    /// Builder pre-filled with this spec's data.
    pub fn to_builder(&self) -> ProblemSpecBuilder {
        ProblemSpecBuilder {
            m: self.m,
            horizon: self.horizon,
            control_box: self.control_box.clone(),
            mask: Some(self.mask.clone()),
            absorbing_allowed: self.absorbing_allowed,
            rate_bounds: Some(self.rate_bounds),
            gamma: Some(self.gamma),
            rates: Some(self.rates.clone()),
            f0: Some(self.f0.clone()),
            f1: self.f1.clone(),
            f2: self.f2.clone(),
            g: self.g.clone(),
            p_init: Some(self.p_init.clone()),
        }
    }

    pub fn num_states(&self) -> usize {
        self.m
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn control_dim(&self) -> usize {
        self.control_box.dim()
    }

    pub fn control_box(&self) -> &ControlBox {
        &self.control_box
    }

    pub fn mask(&self) -> &TransitionMask {
        &self.mask
    }

    pub fn rate_bounds(&self) -> (f64, f64) {
        self.rate_bounds
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn p_init(&self) -> &SimplexPoint {
        &self.p_init
    }

    pub fn reference(&self) -> &RateMatrix {
        &self.reference
    }

    pub fn rate_model(&self) -> &dyn RateModel {
        self.rates.as_ref()
    }

    pub fn control_cost(&self) -> &dyn ControlCost {
        self.f0.as_ref()
    }

    pub fn state_cost(&self) -> &dyn StateCost {
        self.f1.as_ref()
    }

    pub fn interaction_cost(&self) -> &dyn InteractionCost {
        self.f2.as_ref()
    }

    pub fn terminal(&self) -> &dyn TerminalCost {
        self.g.as_ref()
    }

    /// Reference rate of `i -> j` (1 when admissible, 0 otherwise).
    pub fn ref_rate(&self, i: usize, j: usize) -> f64 {
        if i != j && self.mask.allows(i, j) {
            1.0
        } else {
            0.0
        }
    }

    pub fn admissible(&self, i: usize, j: usize) -> bool {
        i != j && self.mask.allows(i, j)
    }

    /// Whether rates read the mean field; such specs cannot drive the N-player game.
    pub fn mean_field_in_q(&self) -> bool {
        self.rates.depends_on_mean_field()
    }

    /// Controlled rate `q(t,i,j,a,p,nu)`; 0 on masked pairs and on the diagonal.
    pub fn rate(&self, t: f64, i: usize, j: usize, a: &[f64], p: &[f64], nu: &DiscreteMeasure) -> f64 {
        if !self.admissible(i, j) {
            return 0.0;
        }
        let mut s = [0.0; 8];
        let l = a.len();
        let slope = if l <= 8 {
            &mut s[..l]
        } else {
            return self.rate_slow(t, i, j, a, p, nu);
        };
        self.rates.slope(t, i, j, p, slope);
        self.rates.base(t, i, j, p, nu) + slope.iter().zip(a).map(|(x, y)| x * y).sum::<f64>()
    }

    fn rate_slow(&self, t: f64, i: usize, j: usize, a: &[f64], p: &[f64], nu: &DiscreteMeasure) -> f64 {
        let mut slope = vec![0.0; a.len()];
        self.rates.slope(t, i, j, p, &mut slope);
        self.rates.base(t, i, j, p, nu) + slope.iter().zip(a).map(|(x, y)| x * y).sum::<f64>()
    }

    /// Row of controlled rates out of `i`; `out[i] = 0`.
    pub fn rate_row(&self, t: f64, i: usize, a: &[f64], p: &[f64], nu: &DiscreteMeasure, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.rate(t, i, j, a, p, nu);
        }
    }

    /// `f = f0 + f1 + f2`.
    pub fn running_cost(&self, t: f64, i: usize, a: &[f64], p: &[f64], nu: &DiscreteMeasure) -> f64 {
        self.f0.value(t, i, a, p) + self.f1.value(t, i, p) + self.f2.value(t, p, nu)
    }

    pub fn terminal_cost(&self, i: usize, p: &[f64]) -> f64 {
        self.g.value(i, p)
    }

    /// Copy with `g(i, p)` replaced by `g(i, p) + shift[i]`.
    pub fn with_terminal_shift(&self, shift: Vec<f64>) -> Result<ProblemSpec> {
        if shift.len() != self.m {
            return Err(MfgError::DimensionMismatch {
                expected: self.m,
                got: shift.len(),
                context: "terminal shift",
            });
        }
        let g = ShiftedTerminalCost {
            inner: self.g.clone(),
            shift,
        };
        self.to_builder().terminal_cost(Arc::new(g)).build()
    }

    /// Copy with the running cost raised by `delta` everywhere.
    pub fn with_running_shift(&self, delta: f64) -> Result<ProblemSpec> {
        let f1 = ShiftedStateCost {
            inner: self.f1.clone(),
            delta,
        };
        self.to_builder().state_cost(Arc::new(f1)).build()
    }

    /// Control minimizing `f0` alone at `(t, i, p)`.
    pub fn argmin_control_cost(&self, t: f64, i: usize, p: &[f64]) -> Result<Vec<f64>> {
        let zeros = vec![0.0; self.control_dim()];
        crate::model::hamiltonian::minimize_tilted(self, t, i, p, &zeros).map(|m| m.alpha)
    }
}

/// Incremental construction of a [`ProblemSpec`] with custom components.
#[derive(Debug, Clone)]
pub struct ProblemSpecBuilder {
    m: usize,
    horizon: f64,
    control_box: ControlBox,
    mask: Option<TransitionMask>,
    absorbing_allowed: bool,
    rate_bounds: Option<(f64, f64)>,
    gamma: Option<f64>,
    rates: Option<Arc<dyn RateModel>>,
    f0: Option<Arc<dyn ControlCost>>,
    f1: Arc<dyn StateCost>,
    f2: Arc<dyn InteractionCost>,
    g: Arc<dyn TerminalCost>,
    p_init: Option<SimplexPoint>,
}

impl ProblemSpecBuilder {
    pub fn horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn mask(mut self, mask: TransitionMask, absorbing_allowed: bool) -> Self {
        self.mask = Some(mask);
        self.absorbing_allowed = absorbing_allowed;
        self
    }

    pub fn rate_bounds(mut self, c1: f64, c2: f64) -> Self {
        self.rate_bounds = Some((c1, c2));
        self
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn rates(mut self, q: Arc<dyn RateModel>) -> Self {
        self.rates = Some(q);
        self
    }

    pub fn control_cost(mut self, f0: Arc<dyn ControlCost>) -> Self {
        self.f0 = Some(f0);
        self
    }

    pub fn state_cost(mut self, f1: Arc<dyn StateCost>) -> Self {
        self.f1 = f1;
        self
    }

    pub fn interaction_cost(mut self, f2: Arc<dyn InteractionCost>) -> Self {
        self.f2 = f2;
        self
    }

    pub fn terminal_cost(mut self, g: Arc<dyn TerminalCost>) -> Self {
        self.g = g;
        self
    }

    pub fn p_init(mut self, p: SimplexPoint) -> Self {
        self.p_init = Some(p);
        self
    }

    pub fn build(self) -> Result<ProblemSpec> {
        let m = self.m;
        let reference = build_reference_generator(m, self.mask.as_ref(), self.absorbing_allowed)?;
        let mask = reference.mask().clone();
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(MfgError::InvalidInput(format!(
                "T must be finite and nonnegative, got {}",
                self.horizon
            )));
        }
        let (c1, c2) = self
            .rate_bounds
            .ok_or_else(|| MfgError::InvalidInput("rate_bounds are required".into()))?;
        if !(c1 > 0.0 && c1 <= c2 && c2.is_finite()) {
            return Err(MfgError::InvalidInput(format!(
                "rate_bounds must satisfy 0 < C1 <= C2 < inf, got [{c1}, {c2}]"
            )));
        }
        let gamma = self
            .gamma
            .ok_or_else(|| MfgError::InvalidInput("gamma (convexity modulus of f0) is required".into()))?;
        if !(gamma > 0.0) {
            return Err(MfgError::InvalidInput(format!("gamma must be positive, got {gamma}")));
        }
        let rates = self
            .rates
            .ok_or_else(|| MfgError::InvalidInput("rate model is required".into()))?;
        let f0 = self
            .f0
            .ok_or_else(|| MfgError::InvalidInput("control cost f0 is required".into()))?;
        let p_init = match self.p_init {
            Some(p) => p,
            None => SimplexPoint::uniform(m)?,
        };
        if p_init.dim() != m {
            return Err(MfgError::DimensionMismatch {
                expected: m,
                got: p_init.dim(),
                context: "p_init",
            });
        }
        Ok(ProblemSpec {
            m,
            horizon: self.horizon,
            control_box: self.control_box,
            mask,
            absorbing_allowed: self.absorbing_allowed,
            rate_bounds: (c1, c2),
            gamma,
            rates,
            f0,
            f1: self.f1,
            f2: self.f2,
            g: self.g,
            p_init,
            reference,
        })
    }
}

// ---------------------------------------------------------------------------
// JSON form

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoxConfig {
    Interval([f64; 2]),
    Sides(Vec<[f64; 2]>),
    Bounds { lower: Vec<f64>, upper: Vec<f64> },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaskEntry {
    Bool(bool),
    Int(u8),
}

impl MaskEntry {
    fn allowed(self) -> bool {
        match self {
            MaskEntry::Bool(b) => b,
            MaskEntry::Int(k) => k != 0,
        }
    }
}

/// Scalar applied everywhere, or an explicit `m x m` matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairCoef {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Default for PairCoef {
    fn default() -> Self {
        PairCoef::Scalar(0.0)
    }
}

/// Scalar applied everywhere, or one value per state.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateCoef {
    Scalar(f64),
    PerState(Vec<f64>),
}

/// Control slopes: scalar, per-coordinate vector, `m x m` (l = 1) or `m x m x l`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SlopeCoef {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
    Tensor(Vec<Vec<Vec<f64>>>),
}

/// Linear coefficient of `f0`: scalar, one value per state (l = 1), or `m x l`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LinearCoef {
    Scalar(f64),
    PerState(Vec<f64>),
    PerStateVector(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateConfig {
    Linear {
        #[serde(default)]
        base: PairCoef,
        slope: SlopeCoef,
        #[serde(default)]
        crowd: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlCostConfig {
    Quadratic {
        curvature: f64,
        #[serde(default)]
        linear: Option<LinearCoef>,
        #[serde(default)]
        p_coupling: f64,
    },
    Quartic {
        curvature: f64,
        quartic: f64,
        #[serde(default)]
        linear: Option<LinearCoef>,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateCostConfig {
    #[default]
    Zero,
    Constant { value: StateCoef },
    Congestion { kappa: f64 },
    Linear { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InteractionCostConfig {
    #[default]
    Zero,
    Constant { value: f64 },
    ControlMeanSq {
        kappa: f64,
        #[serde(default)]
        constant: f64,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TerminalCostConfig {
    #[default]
    Zero,
    Constant { values: StateCoef },
    Congestion {
        kappa: f64,
        #[serde(default)]
        values: Option<StateCoef>,
    },
    Linear {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        values: Option<StateCoef>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub q: RateConfig,
    pub f0: ControlCostConfig,
    #[serde(default)]
    pub f1: StateCostConfig,
    #[serde(default)]
    pub f2: InteractionCostConfig,
    #[serde(default)]
    pub g: TerminalCostConfig,
}

fn default_control_dim() -> usize {
    1
}

/// JSON description of a [`ProblemSpec`] built from the parametric families.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecConfig {
    pub m: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default = "default_control_dim")]
    pub control_dim: usize,
    pub control_box: BoxConfig,
    pub rate_bounds: [f64; 2],
    #[serde(default)]
    pub mask: Option<Vec<Vec<MaskEntry>>>,
    #[serde(default)]
    pub absorbing_allowed: bool,
    #[serde(default)]
    pub gamma: Option<f64>,
    pub family: FamilyConfig,
    #[serde(default)]
    pub p_init: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn bad(field: &str, msg: impl std::fmt::Display) -> MfgError {
    MfgError::InvalidInput(format!("{field}: {msg}"))
}

fn pair_matrix(field: &str, c: &PairCoef, m: usize) -> Result<Vec<f64>> {
    match c {
        PairCoef::Scalar(x) => Ok(vec![*x; m * m]),
        PairCoef::Matrix(rows) => {
            if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                return Err(bad(field, format!("expected a {m} x {m} matrix")));
            }
            Ok(rows.iter().flatten().copied().collect())
        }
    }
}

fn slope_tensor(field: &str, c: &SlopeCoef, m: usize, l: usize) -> Result<Vec<f64>> {
    match c {
        SlopeCoef::Scalar(x) => Ok(vec![*x; m * m * l]),
        SlopeCoef::Vector(v) => {
            if v.len() != l {
                return Err(bad(field, format!("expected {l} coordinates, got {}", v.len())));
            }
            Ok((0..m * m).flat_map(|_| v.iter().copied()).collect())
        }
        SlopeCoef::Matrix(rows) => {
            if l != 1 {
                return Err(bad(field, "an m x m slope matrix needs control_dim = 1"));
            }
            pair_matrix(field, &PairCoef::Matrix(rows.clone()), m)
        }
        SlopeCoef::Tensor(t) => {
            if t.len() != m || t.iter().any(|r| r.len() != m || r.iter().any(|v| v.len() != l)) {
                return Err(bad(field, format!("expected an {m} x {m} x {l} array")));
            }
            Ok(t.iter().flatten().flatten().copied().collect())
        }
    }
}

fn linear_rows(field: &str, c: &Option<LinearCoef>, m: usize, l: usize) -> Result<Vec<Vec<f64>>> {
    match c {
        None => Ok(Vec::new()),
        Some(LinearCoef::Scalar(x)) => Ok(vec![vec![*x; l]; m]),
        Some(LinearCoef::PerState(v)) => {
            if l != 1 || v.len() != m {
                return Err(bad(field, format!("a flat list needs control_dim = 1 and {m} entries")));
            }
            Ok(v.iter().map(|x| vec![*x]).collect())
        }
        Some(LinearCoef::PerStateVector(rows)) => {
            if rows.len() != m || rows.iter().any(|r| r.len() != l) {
                return Err(bad(field, format!("expected an {m} x {l} array")));
            }
            Ok(rows.clone())
        }
    }
}

fn state_values(field: &str, c: &StateCoef, m: usize) -> Result<Vec<f64>> {
    match c {
        StateCoef::Scalar(x) => Ok(vec![*x; m]),
        StateCoef::PerState(v) => {
            if v.len() != m {
                return Err(bad(field, format!("expected {m} values, got {}", v.len())));
            }
            Ok(v.clone())
        }
    }
}

fn square(field: &str, k: &[Vec<f64>], m: usize) -> Result<()> {
    if k.len() != m || k.iter().any(|r| r.len() != m) {
        return Err(bad(field, format!("expected a {m} x {m} matrix")));
    }
    Ok(())
}

impl SpecConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| MfgError::Parse(e.to_string()))
    }

    pub fn build(&self) -> Result<ProblemSpec> {
        let m = self.m;
        let l = self.control_dim;
        if m < 2 {
            return Err(MfgError::InvalidDimension(format!("m: need at least 2 states, got {m}")));
        }
        if l == 0 {
            return Err(bad("control_dim", "must be positive"));
        }
        let control_box = match &self.control_box {
            BoxConfig::Interval([lo, hi]) => ControlBox::new(vec![*lo; l], vec![*hi; l]),
            BoxConfig::Sides(s) => ControlBox::new(
                s.iter().map(|x| x[0]).collect(),
                s.iter().map(|x| x[1]).collect(),
            ),
            BoxConfig::Bounds { lower, upper } => ControlBox::new(lower.clone(), upper.clone()),
        }
        .map_err(|e| bad("control_box", e))?;
        if control_box.dim() != l {
            return Err(bad(
                "control_box",
                format!("has dimension {}, control_dim is {l}", control_box.dim()),
            ));
        }

        let mut builder = ProblemSpec::builder(m, self.horizon, control_box)
            .rate_bounds(self.rate_bounds[0], self.rate_bounds[1]);
        if let Some(rows) = &self.mask {
            let rows: Vec<Vec<bool>> = rows
                .iter()
                .map(|r| r.iter().map(|e| e.allowed()).collect())
                .collect();
            if rows.len() != m {
                return Err(bad("mask", format!("expected {m} rows, got {}", rows.len())));
            }
            let mask = TransitionMask::from_rows(&rows).map_err(|e| bad("mask", e))?;
            builder = builder.mask(mask, self.absorbing_allowed);
        } else if self.absorbing_allowed {
            builder = builder.mask(TransitionMask::full(m), true);
        }

        let fam = &self.family;
        let rates: Arc<dyn RateModel> = match &fam.q {
            RateConfig::Linear { base, slope, crowd } => Arc::new(
                LinearRates::new(
                    m,
                    l,
                    pair_matrix("family.q.base", base, m)?,
                    slope_tensor("family.q.slope", slope, m, l)?,
                )
                .with_crowd(*crowd),
            ),
        };
        let (f0, default_gamma): (Arc<dyn ControlCost>, f64) = match &fam.f0 {
            ControlCostConfig::Quadratic {
                curvature,
                linear,
                p_coupling,
            } => {
                if !(*curvature > 0.0) {
                    return Err(bad("family.f0.curvature", "must be positive"));
                }
                let b = linear_rows("family.f0.linear", linear, m, l)?;
                (
                    Arc::new(QuadraticControlCost::new(*curvature, b, *p_coupling)),
                    0.5 * curvature,
                )
            }
            ControlCostConfig::Quartic {
                curvature,
                quartic,
                linear,
            } => {
                if !(*curvature > 0.0 && *quartic >= 0.0) {
                    return Err(bad("family.f0", "need curvature > 0 and quartic >= 0"));
                }
                let b = linear_rows("family.f0.linear", linear, m, l)?;
                (
                    Arc::new(QuarticControlCost::new(*curvature, *quartic, b)),
                    0.5 * curvature,
                )
            }
        };
        let f1: Arc<dyn StateCost> = match &fam.f1 {
            StateCostConfig::Zero => Arc::new(LinearStateCost::zero()),
            StateCostConfig::Constant { value } => Arc::new(LinearStateCost::constant(
                state_values("family.f1.value", value, m)?,
            )),
            StateCostConfig::Congestion { kappa } => Arc::new(LinearStateCost::congestion(*kappa)),
            StateCostConfig::Linear { matrix } => {
                square("family.f1.matrix", matrix, m)?;
                Arc::new(LinearStateCost::matrix(matrix.clone()))
            }
        };
        let f2: Arc<dyn InteractionCost> = match &fam.f2 {
            InteractionCostConfig::Zero => Arc::new(ControlMeanCost::zero()),
            InteractionCostConfig::Constant { value } => Arc::new(ControlMeanCost::new(*value, 0.0)),
            InteractionCostConfig::ControlMeanSq { kappa, constant } => {
                Arc::new(ControlMeanCost::new(*constant, *kappa))
            }
        };
        let g: Arc<dyn TerminalCost> = match &fam.g {
            TerminalCostConfig::Zero => Arc::new(LinearTerminalCost::zero()),
            TerminalCostConfig::Constant { values } => Arc::new(LinearTerminalCost::constant(
                state_values("family.g.values", values, m)?,
            )),
            TerminalCostConfig::Congestion { kappa, values } => {
                let v = match values {
                    Some(v) => state_values("family.g.values", v, m)?,
                    None => vec![0.0; m],
                };
                Arc::new(LinearTerminalCost::congestion(v, *kappa))
            }
            TerminalCostConfig::Linear { matrix, values } => {
                square("family.g.matrix", matrix, m)?;
                let v = match values {
                    Some(v) => state_values("family.g.values", v, m)?,
                    None => vec![0.0; m],
                };
                Arc::new(LinearTerminalCost::matrix(v, matrix.clone()))
            }
        };

        builder = builder
            .gamma(self.gamma.unwrap_or(default_gamma))
            .rates(rates)
            .control_cost(f0)
            .state_cost(f1)
            .interaction_cost(f2)
            .terminal_cost(g);
        if let Some(p) = &self.p_init {
            if p.len() != m {
                return Err(bad("p_init", format!("expected {m} weights, got {}", p.len())));
            }
            builder = builder.p_init(SimplexPoint::new(p.clone()).map_err(|e| bad("p_init", e))?);
        }
        builder.build()
    }
}
