//! Exact balanced transportation problem by the transportation simplex (MODI) method.

use std::collections::VecDeque;

use crate::error::{MfgError, Result};

const REDUCED_COST_TOL: f64 = 1e-12;
const MAX_PIVOTS: usize = 100_000;

/// Optimal plan of a balanced transportation problem.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub cost: f64,
    /// Basic cells `(i, j, amount)`.
    pub flows: Vec<(usize, usize, f64)>,
}

/// Minimizes `sum c_ij x_ij` subject to row sums `supply` and column sums `demand`.
///
/// `cost` is row-major `supply.len() x demand.len()`. Totals must agree to 1e-9.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportPlan> {
    let n = supply.len();
    let k = demand.len();
    if n == 0 || k == 0 {
        return Err(MfgError::InvalidInput("empty transportation problem".into()));
    }
    if cost.len() != n * k {
        return Err(MfgError::DimensionMismatch {
            expected: n * k,
            got: cost.len(),
            context: "transport cost matrix",
        });
    }
    let ts: f64 = supply.iter().sum();
    let td: f64 = demand.iter().sum();
    if (ts - td).abs() > 1e-9 {
        return Err(MfgError::InvalidInput(format!(
            "unbalanced transport: supply {ts}, demand {td}"
        )));
    }
    let c = |i: usize, j: usize| cost[i * k + j];

    // North-west corner start; always yields n + k - 1 basic cells forming a spanning tree.
    let mut a = supply.to_vec();
    let mut b = demand.to_vec();
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(n + k - 1);
    let mut x = vec![0.0; n * k];
    let mut is_basic = vec![false; n * k];
    let (mut i, mut j) = (0, 0);
    loop {
        let q = a[i].min(b[j]).max(0.0);
        x[i * k + j] = q;
        is_basic[i * k + j] = true;
        basis.push((i, j));
        a[i] -= q;
        b[j] -= q;
        if i == n - 1 && j == k - 1 {
            break;
        }
        if j == k - 1 || (i < n - 1 && a[i] <= b[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }

    let mut u = vec![0.0; n];
    let mut v = vec![0.0; k];
    let mut adj_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut adj_cols: Vec<Vec<usize>> = vec![Vec::new(); k];
    for _pivot in 0..MAX_PIVOTS {
        for r in adj_rows.iter_mut() {
            r.clear();
        }
        for r in adj_cols.iter_mut() {
            r.clear();
        }
        for &(bi, bj) in &basis {
            adj_rows[bi].push(bj);
            adj_cols[bj].push(bi);
        }
        // Potentials u_i + v_j = c_ij on the basis tree.
        let mut seen_r = vec![false; n];
        let mut seen_c = vec![false; k];
        let mut queue = VecDeque::new();
        u[0] = 0.0;
        seen_r[0] = true;
        queue.push_back((true, 0usize));
        while let Some((is_row, idx)) = queue.pop_front() {
            if is_row {
                for &cj in &adj_rows[idx] {
                    if !seen_c[cj] {
                        v[cj] = c(idx, cj) - u[idx];
                        seen_c[cj] = true;
                        queue.push_back((false, cj));
                    }
                }
            } else {
                for &ri in &adj_cols[idx] {
                    if !seen_r[ri] {
                        u[ri] = c(ri, idx) - v[idx];
                        seen_r[ri] = true;
                        queue.push_back((true, ri));
                    }
                }
            }
        }

        // Bland's rule: first cell with negative reduced cost.
        let mut entering = None;
        'scan: for ei in 0..n {
            for ej in 0..k {
                if !is_basic[ei * k + ej] && c(ei, ej) - u[ei] - v[ej] < -REDUCED_COST_TOL {
                    entering = Some((ei, ej));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let total = basis.iter().map(|&(bi, bj)| c(bi, bj) * x[bi * k + bj]).sum();
            let flows = basis
                .iter()
                .map(|&(bi, bj)| (bi, bj, x[bi * k + bj]))
                .collect();
            return Ok(TransportPlan { cost: total, flows });
        };

        // Tree path from row ei to column ej; with the entering cell it closes the cycle.
        let cycle = tree_path(&adj_rows, &adj_cols, ei, ej);
        // Cells along the path alternate -, +, -, ... starting at row ei.
        let mut theta = f64::INFINITY;
        let mut leave_pos = usize::MAX;
        for (pos, &(ci, cj)) in cycle.iter().enumerate() {
            if pos % 2 == 0 {
                let val = x[ci * k + cj];
                let better = val < theta
                    || (val == theta
                        && leave_pos != usize::MAX
                        && (ci, cj) < cycle[leave_pos]);
                if better {
                    theta = val;
                    leave_pos = pos;
                }
            }
        }
        for (pos, &(ci, cj)) in cycle.iter().enumerate() {
            if pos % 2 == 0 {
                x[ci * k + cj] -= theta;
            } else {
                x[ci * k + cj] += theta;
            }
        }
        x[ei * k + ej] = theta;
        let (li, lj) = cycle[leave_pos];
        x[li * k + lj] = 0.0;
        is_basic[li * k + lj] = false;
        is_basic[ei * k + ej] = true;
        let slot = basis
            .iter()
            .position(|&cell| cell == (li, lj))
            .expect("leaving cell is basic");
        basis[slot] = (ei, ej);
    }
    Err(MfgError::Unsupported(format!(
        "transportation simplex did not terminate within {MAX_PIVOTS} pivots"
    )))
}

/// Basic cells on the unique tree path from row `r0` to column `c1`, in order.
fn tree_path(
    adj_rows: &[Vec<usize>],
    adj_cols: &[Vec<usize>],
    r0: usize,
    c1: usize,
) -> Vec<(usize, usize)> {
    let n = adj_rows.len();
    let k = adj_cols.len();
    // Nodes: rows 0..n, columns n..n+k.
    let mut parent = vec![usize::MAX; n + k];
    let mut queue = VecDeque::new();
    parent[r0] = r0;
    queue.push_back(r0);
    while let Some(node) = queue.pop_front() {
        if node == n + c1 {
            break;
        }
        let neighbours: Vec<usize> = if node < n {
            adj_rows[node].iter().map(|&cj| n + cj).collect()
        } else {
            adj_cols[node - n].to_vec()
        };
        for nb in neighbours {
            if parent[nb] == usize::MAX {
                parent[nb] = node;
                queue.push_back(nb);
            }
        }
    }
    let mut nodes = vec![n + c1];
    let mut cur = n + c1;
    while cur != r0 {
        cur = parent[cur];
        nodes.push(cur);
    }
    nodes.reverse();
    nodes
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            if a < n {
                (a, b - n)
            } else {
                (b, a - n)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_known_optimum() {
        let supply = [0.25, 0.25, 0.5];
        let demand = [0.5, 0.25, 0.25];
        let cost = [
            0.0, 1.0, 2.0, //
            1.0, 0.0, 1.0, //
            2.0, 1.0, 0.0,
        ];
        let plan = solve_transport(&supply, &demand, &cost).unwrap();
        // r0->c0 .25, r1->c0 .25 (cost .25), r2->c1 .25 (cost .25), r2->c2 .25.
        assert!((plan.cost - 0.5).abs() < 1e-12);
        let shipped: f64 = plan.flows.iter().map(|f| f.2).sum();
        assert!((shipped - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unbalanced() {
        assert!(solve_transport(&[1.0], &[0.5], &[0.0]).is_err());
    }
}
