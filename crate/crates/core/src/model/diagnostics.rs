//! Sampled checks of the structural assumptions: rate bounds, convexity of `f0`,
//! empirical Lipschitz constants, and Lasry-Lions monotonicity of `g` and `f1`.

use rand::Rng;
use serde::Serialize;

use crate::error::{MfgError, Result};
use crate::measures::{w1, DiscreteMeasure};
use crate::model::hamiltonian::optimal_control;
use crate::model::spec::ProblemSpec;

/// Monotonicity sums below this count as violations.
pub const MONOTONE_TOL: f64 = -1e-12;

/// Uniform draw from the simplex (flat Dirichlet).
pub fn random_simplex<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

pub fn random_control<R: Rng + ?Sized>(spec: &ProblemSpec, rng: &mut R) -> Vec<f64> {
    let u: Vec<f64> = (0..spec.control_dim()).map(|_| rng.random()).collect();
    spec.control_box().point_at(&u)
}

/// Random measure on the control box with 1 to 3 atoms.
pub fn random_control_measure<R: Rng + ?Sized>(spec: &ProblemSpec, rng: &mut R) -> DiscreteMeasure {
    let k = rng.random_range(1..=3);
    let atoms: Vec<Vec<f64>> = (0..k).map(|_| random_control(spec, rng)).collect();
    let w = random_simplex(k, rng);
    DiscreteMeasure::new(atoms, w).expect("valid random measure")
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSample {
    pub t: f64,
    pub i: usize,
    pub j: usize,
    pub alpha: Vec<f64>,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexitySample {
    pub t: f64,
    pub i: usize,
    pub alpha: Vec<f64>,
    pub alpha_prime: Vec<f64>,
    pub gap: f64,
    pub required: f64,
}

/// Sampled validation of the rate bounds and of `f0`'s convexity modulus.
#[derive(Debug, Clone, Serialize)]
pub struct SpecReport {
    pub samples: usize,
    pub rate_violations: Vec<RateSample>,
    pub convexity_violations: Vec<ConvexitySample>,
}

impl SpecReport {
    pub fn is_valid(&self) -> bool {
        self.rate_violations.is_empty() && self.convexity_violations.is_empty()
    }
}

/// Checks `C1 <= q <= C2` on admissible pairs (box corners included) and the strong-convexity
/// inequality `f0(a') - f0(a) - grad f0(a).(a' - a) >= gamma |a' - a|^2` on random pairs.
pub fn validate_spec<R: Rng + ?Sized>(spec: &ProblemSpec, n_samples: usize, rng: &mut R) -> SpecReport {
    let m = spec.num_states();
    let l = spec.control_dim();
    let (c1, c2) = spec.rate_bounds();
    let corners = if l <= 4 { spec.control_box().corners() } else { Vec::new() };
    let mut rate_violations = Vec::new();
    let mut convexity_violations = Vec::new();
    let mut grad = vec![0.0; l];
    for n in 0..n_samples {
        let t = rng.random::<f64>() * spec.horizon();
        let p = random_simplex(m, rng);
        let nu = random_control_measure(spec, rng);
        let alpha = if n < corners.len() {
            corners[n].clone()
        } else {
            random_control(spec, rng)
        };
        for i in 0..m {
            for j in 0..m {
                if !spec.admissible(i, j) {
                    continue;
                }
                let q = spec.rate(t, i, j, &alpha, &p, &nu);
                if !(q >= c1 && q <= c2) && rate_violations.len() < 16 {
                    rate_violations.push(RateSample {
                        t,
                        i,
                        j,
                        alpha: alpha.clone(),
                        rate: q,
                    });
                }
            }
        }
        let i = rng.random_range(0..m);
        let a2 = random_control(spec, rng);
        let f0 = spec.control_cost();
        f0.gradient(t, i, &alpha, &p, &mut grad);
        let lin: f64 = grad.iter().zip(a2.iter().zip(&alpha)).map(|(g, (x, y))| g * (x - y)).sum();
        let gap = f0.value(t, i, &a2, &p) - f0.value(t, i, &alpha, &p) - lin;
        let d = dist(&a2, &alpha);
        let required = spec.gamma() * d * d;
        if gap < required - 1e-10 * (1.0 + required.abs()) && convexity_violations.len() < 16 {
            convexity_violations.push(ConvexitySample {
                t,
                i,
                alpha: alpha.clone(),
                alpha_prime: a2,
                gap,
                required,
            });
        }
    }
    SpecReport {
        samples: n_samples,
        rate_violations,
        convexity_violations,
    }
}

/// Largest observed difference quotients, one argument varied at a time.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LipschitzReport {
    pub q_alpha: f64,
    pub q_p: f64,
    pub q_nu: f64,
    pub f_alpha: f64,
    pub f_p: f64,
    pub f_nu: f64,
    pub g_p: f64,
    /// `|a_hat(z) - a_hat(z')| / |z - z'|_{e_i}`.
    pub ahat_z: f64,
    /// `|a_hat(p) - a_hat(p')| / |p - p'|`, not normalized by `1 + |z|`.
    pub ahat_p: f64,
}

pub fn lipschitz_probe<R: Rng + ?Sized>(spec: &ProblemSpec, n_samples: usize, rng: &mut R) -> Result<LipschitzReport> {
    let m = spec.num_states();
    let mut rep = LipschitzReport::default();
    let quot = |num: f64, den: f64| if den > 1e-14 { num.abs() / den } else { 0.0 };
    for _ in 0..n_samples {
        let t = rng.random::<f64>() * spec.horizon();
        let i = rng.random_range(0..m);
        let a = random_control(spec, rng);
        let a2 = random_control(spec, rng);
        let p = random_simplex(m, rng);
        let p2 = random_simplex(m, rng);
        let nu = random_control_measure(spec, rng);
        let nu2 = random_control_measure(spec, rng);
        let dp = dist(&p, &p2);
        let da = dist(&a, &a2);
        let dnu = w1(&nu, &nu2)?;
        for j in (0..m).filter(|&j| spec.admissible(i, j)) {
            let q = spec.rate(t, i, j, &a, &p, &nu);
            rep.q_alpha = rep.q_alpha.max(quot(spec.rate(t, i, j, &a2, &p, &nu) - q, da));
            rep.q_p = rep.q_p.max(quot(spec.rate(t, i, j, &a, &p2, &nu) - q, dp));
            rep.q_nu = rep.q_nu.max(quot(spec.rate(t, i, j, &a, &p, &nu2) - q, dnu));
        }
        let f = spec.running_cost(t, i, &a, &p, &nu);
        rep.f_alpha = rep.f_alpha.max(quot(spec.running_cost(t, i, &a2, &p, &nu) - f, da));
        rep.f_p = rep.f_p.max(quot(spec.running_cost(t, i, &a, &p2, &nu) - f, dp));
        rep.f_nu = rep.f_nu.max(quot(spec.running_cost(t, i, &a, &p, &nu2) - f, dnu));
        rep.g_p = rep
            .g_p
            .max(quot(spec.terminal_cost(i, &p) - spec.terminal_cost(i, &p2), dp));

        let z: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let z2: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let dz: Vec<f64> = z.iter().zip(&z2).map(|(x, y)| x - y).collect();
        let dz_norm = crate::markov::psi::seminorm_sq(i, &dz)?.sqrt();
        let ah = optimal_control(spec, t, i, &z, &p)?.alpha;
        let ah_z = optimal_control(spec, t, i, &z2, &p)?.alpha;
        let ah_p = optimal_control(spec, t, i, &z, &p2)?.alpha;
        rep.ahat_z = rep.ahat_z.max(quot(dist(&ah, &ah_z), dz_norm));
        rep.ahat_p = rep.ahat_p.max(quot(dist(&ah, &ah_p), dp));
    }
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityWitness {
    pub t: f64,
    pub p: Vec<f64>,
    pub p_prime: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub g_monotone: bool,
    pub f1_monotone: bool,
    pub min_g_sum: f64,
    pub min_f1_sum: f64,
    pub g_witness: Option<MonotonicityWitness>,
    pub f1_witness: Option<MonotonicityWitness>,
    pub samples: usize,
}

/// Samples `sum_i (phi(e_i,p) - phi(e_i,p')) (p_i - p'_i)` for `phi = g` and `phi = f1(t, .)`.
///
/// Requires the separable structure: rates free of the mean field and `f0` free of `p`.
pub fn check_monotonicity<R: Rng + ?Sized>(
    spec: &ProblemSpec,
    n_samples: usize,
    rng: &mut R,
) -> Result<MonotonicityReport> {
    if spec.mean_field_in_q() {
        return Err(MfgError::Structural(
            "monotonicity check needs rates independent of the mean field".into(),
        ));
    }
    if spec.control_cost().depends_on_p() {
        return Err(MfgError::Structural(
            "monotonicity check needs f0 independent of the state distribution".into(),
        ));
    }
    let m = spec.num_states();
    let mut rep = MonotonicityReport {
        g_monotone: true,
        f1_monotone: true,
        min_g_sum: f64::INFINITY,
        min_f1_sum: f64::INFINITY,
        g_witness: None,
        f1_witness: None,
        samples: 0,
    };
    // Vertex pairs first, then random pairs.
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for a in 0..m {
        for b in 0..m {
            if a != b {
                let mut p = vec![0.0; m];
                let mut q = vec![0.0; m];
                p[a] = 1.0;
                q[b] = 1.0;
                pairs.push((p, q));
            }
        }
    }
    for _ in 0..n_samples {
        pairs.push((random_simplex(m, rng), random_simplex(m, rng)));
    }
    for (p, q) in pairs {
        let t = rng.random::<f64>() * spec.horizon();
        let sum = |phi: &dyn Fn(usize, &[f64]) -> f64| -> f64 {
            (0..m).map(|i| (phi(i, &p) - phi(i, &q)) * (p[i] - q[i])).sum()
        };
        let gs = sum(&|i, x| spec.terminal_cost(i, x));
        let fs = sum(&|i, x| spec.state_cost().value(t, i, x));
        rep.samples += 1;
        rep.min_g_sum = rep.min_g_sum.min(gs);
        rep.min_f1_sum = rep.min_f1_sum.min(fs);
        if gs < MONOTONE_TOL && rep.g_witness.as_ref().is_none_or(|w| gs < w.value) {
            rep.g_monotone = false;
            rep.g_witness = Some(MonotonicityWitness {
                t,
                p: p.clone(),
                p_prime: q.clone(),
                value: gs,
            });
        }
        if fs < MONOTONE_TOL && rep.f1_witness.as_ref().is_none_or(|w| fs < w.value) {
            rep.f1_monotone = false;
            rep.f1_witness = Some(MonotonicityWitness {
                t,
                p: p.clone(),
                p_prime: q.clone(),
                value: fs,
            });
        }
    }
    Ok(rep)
}
