//! Dense revised simplex for the per-node envelope program
//! `min Σ λ_j v_j  s.t.  Σ λ_j p_j = x, Σ λ_j = 1, λ ≥ 0`.

use crate::linalg::solve;

/// Iterations after which pricing switches from Dantzig to Bland's rule.
const BLAND_AFTER: usize = 64;
const MAX_ITER: usize = 20_000;

/// Optimal value and support of the convex-combination program, starting
/// from a feasible basis of `k + 1` affinely independent points.
pub(crate) fn min_combination(
    pts: &[Vec<f64>],
    vals: &[f64],
    x: &[f64],
    mut basis: Vec<usize>,
) -> Option<(f64, Vec<(usize, f64)>)> {
    let k = x.len();
    let m = k + 1;
    let scale = 1.0 + vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-13 * scale;
    let mut rhs = x.to_vec();
    rhs.push(1.0);
    let column = |j: usize| -> Vec<f64> {
        let mut c = pts[j].clone();
        c.push(1.0);
        c
    };
    for iter in 0..MAX_ITER {
        let bmat: Vec<Vec<f64>> = (0..m)
            .map(|r| {
                basis
                    .iter()
                    .map(|&j| if r < k { pts[j][r] } else { 1.0 })
                    .collect()
            })
            .collect();
        let lam = solve(bmat.clone(), rhs.clone())?;
        let bt: Vec<Vec<f64>> = (0..m)
            .map(|r| (0..m).map(|c| bmat[c][r]).collect())
            .collect();
        let y = solve(bt, basis.iter().map(|&j| vals[j]).collect())?;
        let reduced = |j: usize| {
            let mut r = vals[j] - y[k];
            for (d, yd) in y.iter().take(k).enumerate() {
                r -= yd * pts[j][d];
            }
            r
        };
        let entering = if iter < BLAND_AFTER {
            let mut best = (usize::MAX, -tol);
            for j in 0..pts.len() {
                let r = reduced(j);
                if r < best.1 && !basis.contains(&j) {
                    best = (j, r);
                }
            }
            best.0
        } else {
            (0..pts.len())
                .find(|&j| reduced(j) < -tol && !basis.contains(&j))
                .unwrap_or(usize::MAX)
        };
        if entering == usize::MAX {
            let value: f64 = basis.iter().zip(&lam).map(|(&j, &l)| vals[j] * l).sum();
            return Some((value, basis.iter().copied().zip(lam).collect()));
        }
        let dir = solve(bmat, column(entering))?;
        let mut leave = usize::MAX;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            if dir[i] > 1e-12 {
                let ratio = lam[i].max(0.0) / dir[i];
                let better = ratio < best_ratio - 1e-15
                    || (ratio <= best_ratio + 1e-15
                        && leave != usize::MAX
                        && basis[i] < basis[leave]);
                if better {
                    best_ratio = ratio;
                    leave = i;
                }
            }
        }
        if leave == usize::MAX {
            return None;
        }
        basis[leave] = entering;
    }
    None
}

/// Kuhn-simplex vertices (as multi-indices) of the lattice cell containing
/// the point with cell index `cell` and local coordinates `frac`.
pub(crate) fn kuhn_simplex(cell: &[usize], frac: &[f64]) -> Vec<Vec<usize>> {
    let k = cell.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(a.cmp(&b)));
    let mut cur = cell.to_vec();
    let mut out = vec![cur.clone()];
    for &axis in &order {
        cur[axis] += 1;
        out.push(cur.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_well_midpoint() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 - 2.0]).collect();
        let vals: Vec<f64> = pts
            .iter()
            .map(|p| ((p[0] - 1.0).powi(2)).min((p[0] + 1.0).powi(2)))
            .collect();
        let (v, support) = min_combination(&pts, &vals, &[0.0], vec![2, 3]).unwrap();
        assert!(v.abs() < 1e-14);
        assert!(support.iter().all(|&(_, l)| l >= -1e-14));
    }

    #[test]
    fn kuhn_simplex_contains_point() {
        let s = kuhn_simplex(&[1, 2], &[0.3, 0.8]);
        assert_eq!(s, vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
    }
}
