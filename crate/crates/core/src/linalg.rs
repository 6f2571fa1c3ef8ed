//! Small dense vector helpers for n ≤ 3 (slices of `T`).

use crate::Real;

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

#[inline]
pub fn add<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

#[inline]
pub fn scale<T: Real>(a: &[T], s: T) -> Vec<T> {
    a.iter().map(|&x| x * s).collect()
}

#[inline]
pub fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}

/// `Σ_i rows[i] * coeffs[i]`, i.e. `rowsᵀ · coeffs`.
pub fn combine_rows<T: Real>(rows: &[Vec<T>], coeffs: &[T], len: usize) -> Vec<T> {
    let mut out = vec![T::zero(); len];
    for (row, &c) in rows.iter().zip(coeffs) {
        for (o, &r) in out.iter_mut().zip(row) {
            *o = *o + r * c;
        }
    }
    out
}

/// `rows · v`: coordinates of `v` in the (orthonormal) row basis.
pub fn project_rows<T: Real>(rows: &[Vec<T>], v: &[T]) -> Vec<T> {
    rows.iter().map(|r| dot(r, v)).collect()
}

/// Distance from point `x` to the axis-aligned box `[lo, hi]`.
pub fn point_box_dist<T: Real>(x: &[T], lo: &[T], hi: &[T]) -> T {
    let mut acc = T::zero();
    for i in 0..x.len() {
        let gap = (lo[i] - x[i]).max(x[i] - hi[i]).max(T::zero());
        acc = acc + gap * gap;
    }
    acc.sqrt()
}

/// Distance between two axis-aligned boxes.
pub fn box_box_dist<T: Real>(lo1: &[T], hi1: &[T], lo2: &[T], hi2: &[T]) -> T {
    let mut acc = T::zero();
    for i in 0..lo1.len() {
        let gap = (lo2[i] - hi1[i]).max(lo1[i] - hi2[i]).max(T::zero());
        acc = acc + gap * gap;
    }
    acc.sqrt()
}

/// Largest distance from a point of the box `[lo, hi]` to `x` (attained at a corner).
pub fn point_box_far<T: Real>(x: &[T], lo: &[T], hi: &[T]) -> T {
    let mut acc = T::zero();
    for i in 0..x.len() {
        let g = (x[i] - lo[i]).abs().max((hi[i] - x[i]).abs());
        acc = acc + g * g;
    }
    acc.sqrt()
}

/// Solves the dense square system `a x = b` by Gaussian elimination with
/// partial pivoting. Returns `None` when the matrix is numerically singular.
pub fn solve<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[piv][col].abs() <= T::min_positive_value() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != T::zero() {
                for k in col..n {
                    let v = a[col][k];
                    a[row][k] = a[row][k] - f * v;
                }
                b[row] = b[row] - f * b[col];
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s = s - a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matching eigenvectors (as rows), sorted by
/// decreasing eigenvalue.
pub fn symmetric_eigen<T: Real>(m: &[Vec<T>]) -> (Vec<T>, Vec<Vec<T>>) {
    let n = m.len();
    let mut a: Vec<Vec<T>> = m.to_vec();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { T::one() } else { T::zero() })
                .collect()
        })
        .collect();
    let two = T::lit(2.0);
    for _sweep in 0..64 {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off + a[p][q] * a[p][q];
            }
        }
        if off <= T::min_positive_value() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (two * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let t = if theta == T::zero() { T::one() } else { t };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j][j]
            .partial_cmp(&a[i][i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = order.iter().map(|&i| a[i][i]).collect();
    let vecs = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (vals, vecs)
}
