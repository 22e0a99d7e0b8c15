use crate::error::{MfgError, Result};
use crate::measures::discrete::DiscreteMeasure;
use crate::measures::transport::solve_transport;

/// Largest support handled by the exact transport solver when `l > 1`.
pub const MAX_LP_ATOMS: usize = 64;

/// Wasserstein-1 distance with Euclidean ground metric.
///
/// One-dimensional measures use the CDF formula `int |F - G| dx`; otherwise
/// the exact transportation problem is solved for supports up to [`MAX_LP_ATOMS`].
pub fn w1(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(MfgError::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
            context: "w1 control dimension",
        });
    }
    if mu.dim() == 1 {
        return Ok(w1_line(mu, nu));
    }
    if mu.len() > MAX_LP_ATOMS || nu.len() > MAX_LP_ATOMS {
        return Err(MfgError::Unsupported(format!(
            "exact W1 in dimension {} is limited to {MAX_LP_ATOMS} atoms per measure (got {} and {})",
            mu.dim(),
            mu.len(),
            nu.len()
        )));
    }
    // Solve with the arguments in a fixed order so that the result is exactly symmetric.
    if precedes(nu, mu) {
        w1_exact_lp(nu, mu)
    } else {
        w1_exact_lp(mu, nu)
    }
}

fn precedes(a: &DiscreteMeasure, b: &DiscreteMeasure) -> bool {
    let key = |m: &DiscreteMeasure| -> Vec<u64> {
        m.atoms()
            .flatten()
            .chain(m.weights())
            .map(|x| x.to_bits())
            .collect()
    };
    (a.len(), key(a)) < (b.len(), key(b))
}

/// `int |F_mu - F_nu| dx` for measures on the line, by a merge over sorted atoms.
fn w1_line(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let (a, wa) = (mu, mu.weights());
    let (b, wb) = (nu, nu.weights());
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0_f64, 0.0_f64);
    let mut prev: Option<f64> = None;
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let xa = if i < a.len() { a.atom(i)[0] } else { f64::INFINITY };
        let xb = if j < b.len() { b.atom(j)[0] } else { f64::INFINITY };
        let x = xa.min(xb);
        if let Some(p) = prev {
            total += (fa - fb).abs() * (x - p);
        }
        if xa == x {
            fa += wa[i];
            i += 1;
        }
        if xb == x {
            fb += wb[j];
            j += 1;
        }
        prev = Some(x);
    }
    total
}

/// Exact W1 through the transportation problem; valid in any dimension.
pub fn w1_exact_lp(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(MfgError::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
            context: "w1 control dimension",
        });
    }
    let mut cost = Vec::with_capacity(mu.len() * nu.len());
    for a in mu.atoms() {
        for b in nu.atoms() {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            cost.push(d2.sqrt());
        }
    }
    let plan = solve_transport(mu.weights(), nu.weights(), &cost)?;
    Ok(plan.cost.max(0.0))
}
