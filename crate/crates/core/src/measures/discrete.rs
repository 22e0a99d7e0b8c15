use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::error::{MfgError, Result};
use crate::markov::grid::TimeGrid;
use crate::markov::simplex::SimplexPoint;
use crate::measures::control_box::ControlBox;

/// Coordinates closer than this are treated as the same atom.
pub const ATOM_MERGE_TOL: f64 = 1e-12;

/// Weights below this are dropped when mixing measures.
pub const PRUNE_WEIGHT: f64 = 1e-14;

/// Finitely supported probability measure on `R^l`.
///
/// Atoms are kept sorted lexicographically with duplicates merged, so equal
/// measures have equal representations.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= ATOM_MERGE_TOL)
}

impl DiscreteMeasure {
    /// Builds a measure from `(atom, weight)` pairs. Weights must be nonnegative and sum to 1.
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let dim = atoms.first().map(Vec::len).unwrap_or(0);
        if atoms.is_empty() || dim == 0 {
            return Err(MfgError::InvalidInput("a measure needs at least one atom".into()));
        }
        if atoms.len() != weights.len() {
            return Err(MfgError::DimensionMismatch {
                expected: atoms.len(),
                got: weights.len(),
                context: "measure weights",
            });
        }
        let mut coords = Vec::with_capacity(dim * atoms.len());
        for a in &atoms {
            if a.len() != dim {
                return Err(MfgError::DimensionMismatch {
                    expected: dim,
                    got: a.len(),
                    context: "atom dimension",
                });
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(MfgError::InvalidInput(format!("atom {a:?} is not finite")));
            }
            coords.extend_from_slice(a);
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(MfgError::InvalidInput(format!("weight {w} is negative or not finite")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MfgError::InvalidInput(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self::canonical(dim, coords, weights))
    }

    pub fn dirac(a: Vec<f64>) -> Result<Self> {
        Self::new(vec![a], vec![1.0])
    }

    /// Sorts, merges near-equal atoms and drops zero weights. Input must be valid.
    fn canonical(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Self {
        let n = weights.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            lex_cmp(&coords[a * dim..(a + 1) * dim], &coords[b * dim..(b + 1) * dim])
        });
        let mut out_c: Vec<f64> = Vec::with_capacity(coords.len());
        let mut out_w: Vec<f64> = Vec::with_capacity(n);
        for &k in &order {
            let atom = &coords[k * dim..(k + 1) * dim];
            let w = weights[k];
            if w == 0.0 {
                continue;
            }
            let merge = out_w
                .len()
                .checked_sub(1)
                .is_some_and(|last| close(&out_c[last * dim..(last + 1) * dim], atom));
            if merge {
                *out_w.last_mut().expect("nonempty") += w;
            } else {
                out_c.extend_from_slice(atom);
                out_w.push(w);
            }
        }
        if out_w.is_empty() {
            // All weights were zero only if validation was skipped; keep a representable measure.
            out_c.extend_from_slice(&coords[..dim]);
            out_w.push(1.0);
        }
        Self {
            dim,
            coords: out_c,
            weights: out_w,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mean `int a nu(da)`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (a, w) in self.atoms().zip(&self.weights) {
            for (mk, ak) in m.iter_mut().zip(a) {
                *mk += w * ak;
            }
        }
        m
    }

    /// Second moment `int |a|^2 nu(da)`.
    pub fn second_moment(&self) -> f64 {
        self.atoms()
            .zip(&self.weights)
            .map(|(a, w)| w * a.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }

    pub fn within(&self, bx: &ControlBox) -> bool {
        bx.dim() == self.dim && self.atoms().all(|a| bx.contains(a))
    }

    /// `(1 - theta) * self + theta * other` on the union of supports.
    ///
    /// Weights under [`PRUNE_WEIGHT`] are dropped and the rest renormalized,
    /// which keeps iterated mixing from accumulating dead atoms.
    pub fn mix(&self, other: &DiscreteMeasure, theta: f64) -> Result<DiscreteMeasure> {
        if self.dim != other.dim {
            return Err(MfgError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
                context: "mixing measures",
            });
        }
        if theta == 1.0 {
            return Ok(other.clone());
        }
        if theta == 0.0 {
            return Ok(self.clone());
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        let mut weights: Vec<f64> = self.weights.iter().map(|w| (1.0 - theta) * w).collect();
        weights.extend(other.weights.iter().map(|w| theta * w));
        let mut merged = Self::canonical(self.dim, coords, weights);
        merged.prune();
        Ok(merged)
    }

    fn prune(&mut self) {
        if self.weights.iter().all(|&w| w >= PRUNE_WEIGHT) {
            let s: f64 = self.weights.iter().sum();
            self.weights.iter_mut().for_each(|w| *w /= s);
            return;
        }
        let dim = self.dim;
        let mut coords = Vec::with_capacity(self.coords.len());
        let mut weights = Vec::with_capacity(self.weights.len());
        for (a, &w) in self.coords.chunks_exact(dim).zip(&self.weights) {
            if w >= PRUNE_WEIGHT {
                coords.extend_from_slice(a);
                weights.push(w);
            }
        }
        if weights.is_empty() {
            let k = self
                .weights
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k)
                .unwrap_or(0);
            coords.extend_from_slice(&self.coords[k * dim..(k + 1) * dim]);
            weights.push(1.0);
        }
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
        self.coords = coords;
        self.weights = weights;
    }

    /// CSV text with header `a_1,...,a_l,weight`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for k in 1..=self.dim {
            let _ = write!(s, "a_{k},");
        }
        s.push_str("weight\n");
        for (a, w) in self.atoms().zip(&self.weights) {
            for x in a {
                let _ = write!(s, "{x},");
            }
            let _ = writeln!(s, "{w}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<DiscreteMeasure> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| MfgError::Parse("empty measure file".into()))?;
        let cols = header.split(',').count();
        if cols < 2 || header.split(',').last() != Some("weight") {
            return Err(MfgError::Parse(format!("bad measure header '{header}'")));
        }
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for (n, line) in lines.enumerate() {
            let vals: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|x| x.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| MfgError::Parse(format!("row {}: {e}", n + 2)))?;
            if vals.len() != cols {
                return Err(MfgError::Parse(format!(
                    "row {}: expected {cols} fields, got {}",
                    n + 2,
                    vals.len()
                )));
            }
            weights.push(vals[cols - 1]);
            atoms.push(vals[..cols - 1].to_vec());
        }
        DiscreteMeasure::new(atoms, weights)
    }
}

/// Frequency vector of a list of states.
pub fn empirical_states(states: &[usize], m: usize) -> Result<SimplexPoint> {
    if states.is_empty() {
        return Err(MfgError::InvalidInput("empty state list".into()));
    }
    let mut w = vec![0.0; m];
    for &s in states {
        if s >= m {
            return Err(MfgError::OutOfRange {
                what: "state",
                index: s,
                size: m,
            });
        }
        w[s] += 1.0;
    }
    let n = states.len() as f64;
    w.iter_mut().for_each(|x| *x /= n);
    Ok(SimplexPoint::from_raw_unchecked(w))
}

/// `(1/N) sum_n delta_{a_n}` with duplicates merged.
pub fn empirical_controls(controls: &[Vec<f64>]) -> Result<DiscreteMeasure> {
    if controls.is_empty() {
        return Err(MfgError::InvalidInput("empty control list".into()));
    }
    let n = controls.len() as f64;
    let weights = vec![1.0 / n; controls.len()];
    let dim = controls[0].len();
    if dim == 0 {
        return Err(MfgError::InvalidDimension("controls have dimension 0".into()));
    }
    let mut coords = Vec::with_capacity(dim * controls.len());
    for c in controls {
        if c.len() != dim {
            return Err(MfgError::DimensionMismatch {
                expected: dim,
                got: c.len(),
                context: "control dimension",
            });
        }
        coords.extend_from_slice(c);
    }
    let mut m = DiscreteMeasure::canonical(dim, coords, weights);
    let s: f64 = m.weights.iter().sum();
    m.weights.iter_mut().for_each(|w| *w /= s);
    Ok(m)
}

/// Law of `a(X)` for `X ~ p`: `sum_i p_i delta_{a_i}`.
pub fn pushforward_policy(a: &[Vec<f64>], p: &SimplexPoint) -> Result<DiscreteMeasure> {
    if a.len() != p.dim() {
        return Err(MfgError::DimensionMismatch {
            expected: p.dim(),
            got: a.len(),
            context: "per-state controls",
        });
    }
    DiscreteMeasure::new(a.to_vec(), p.weights().to_vec()).or_else(|e| match e {
        // p may carry rounding of order 1e-12 in its sum after projections.
        MfgError::InvalidInput(_) => {
            let s: f64 = p.weights().iter().sum();
            DiscreteMeasure::new(a.to_vec(), p.weights().iter().map(|w| w / s).collect())
        }
        other => Err(other),
    })
}

/// Control-measure flow on a grid, piecewise-constant: `nu_k` holds on `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlFlow {
    grid: TimeGrid,
    measures: Vec<DiscreteMeasure>,
}

impl ControlFlow {
    pub fn new(grid: TimeGrid, measures: Vec<DiscreteMeasure>) -> Result<Self> {
        if measures.len() != grid.n_nodes() {
            return Err(MfgError::DimensionMismatch {
                expected: grid.n_nodes(),
                got: measures.len(),
                context: "control flow nodes",
            });
        }
        let dim = measures[0].dim();
        if let Some(m) = measures.iter().find(|m| m.dim() != dim) {
            return Err(MfgError::DimensionMismatch {
                expected: dim,
                got: m.dim(),
                context: "control flow dimension",
            });
        }
        Ok(Self { grid, measures })
    }

    pub fn constant(grid: TimeGrid, nu: DiscreteMeasure) -> Self {
        Self {
            grid,
            measures: vec![nu; grid.n_nodes()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn measures(&self) -> &[DiscreteMeasure] {
        &self.measures
    }

    pub fn node(&self, k: usize) -> &DiscreteMeasure {
        &self.measures[k]
    }

    /// Measure in force on cell `k`.
    pub fn in_cell(&self, k: usize) -> &DiscreteMeasure {
        &self.measures[k]
    }

    /// Value at time `t`; the last node is used only at `t = T`.
    pub fn at(&self, t: f64) -> &DiscreteMeasure {
        if t >= self.grid.horizon() {
            self.measures.last().expect("nonempty flow")
        } else {
            &self.measures[self.grid.cell_of(t)]
        }
    }

    pub fn mix(&self, other: &ControlFlow, theta: f64) -> Result<ControlFlow> {
        let measures = self
            .measures
            .iter()
            .zip(&other.measures)
            .map(|(a, b)| a.mix(b, theta))
            .collect::<Result<Vec<_>>>()?;
        Ok(ControlFlow {
            grid: self.grid,
            measures,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_merges_and_sorts() {
        let m = DiscreteMeasure::new(
            vec![vec![2.0], vec![1.0], vec![1.0 + 1e-13], vec![3.0]],
            vec![0.25, 0.25, 0.5, 0.0],
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.atom(0), &[1.0]);
        assert_eq!(m.weights(), &[0.75, 0.25]);
    }

    #[test]
    fn empirical_examples() {
        let p = empirical_states(&[0, 0, 1, 2], 3).unwrap();
        assert_eq!(p.weights(), &[0.5, 0.25, 0.25]);
        assert_eq!(empirical_states(&[1, 1], 3).unwrap().weights(), &[0.0, 1.0, 0.0]);
        assert_eq!(empirical_states(&[0], 2).unwrap().weights(), &[1.0, 0.0]);
        assert!(empirical_states(&[], 2).is_err());

        let nu = empirical_controls(&[vec![1.0], vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(nu.len(), 2);
        assert!((nu.weights()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((nu.weights()[1] - 1.0 / 3.0).abs() < 1e-15);
        let single = empirical_controls(&[vec![0.4]]).unwrap();
        assert_eq!(single, DiscreteMeasure::dirac(vec![0.4]).unwrap());
    }

    #[test]
    fn pushforward_examples() {
        let p = SimplexPoint::new(vec![0.3, 0.7]).unwrap();
        let nu = pushforward_policy(&[vec![1.0], vec![2.0]], &p).unwrap();
        assert_eq!(nu.weights(), &[0.3, 0.7]);
        let same = pushforward_policy(&[vec![1.5], vec![1.5]], &p).unwrap();
        assert_eq!(same, DiscreteMeasure::dirac(vec![1.5]).unwrap());
        let vertex = SimplexPoint::vertex(2, 0).unwrap();
        let d = pushforward_policy(&[vec![1.0], vec![2.0]], &vertex).unwrap();
        assert_eq!(d, DiscreteMeasure::dirac(vec![1.0]).unwrap());
        assert!(pushforward_policy(&[vec![1.0]], &p).is_err());
    }

    #[test]
    fn mixing_unions_supports() {
        let a = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let b = DiscreteMeasure::dirac(vec![1.0]).unwrap();
        let c = a.mix(&b, 0.25).unwrap();
        assert_eq!(c.weights(), &[0.75, 0.25]);
        assert_eq!(a.mix(&b, 1.0).unwrap(), b);
    }

    #[test]
    fn csv_round_trip() {
        let m = DiscreteMeasure::new(vec![vec![0.1, 0.2], vec![0.3, -0.4]], vec![0.4, 0.6]).unwrap();
        assert_eq!(DiscreteMeasure::from_csv(&m.to_csv()).unwrap(), m);
    }

    #[test]
    fn control_flow_is_left_constant() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let ms = vec![
            DiscreteMeasure::dirac(vec![0.0]).unwrap(),
            DiscreteMeasure::dirac(vec![1.0]).unwrap(),
            DiscreteMeasure::dirac(vec![2.0]).unwrap(),
        ];
        let f = ControlFlow::new(g, ms).unwrap();
        assert_eq!(f.at(0.49).atom(0), &[0.0]);
        assert_eq!(f.at(0.5).atom(0), &[1.0]);
        assert_eq!(f.at(1.0).atom(0), &[2.0]);
    }
}
