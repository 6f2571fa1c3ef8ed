//! The max-of-tangent-planes extension and its splitting into a linear part
//! plus a coercive function of an orthogonal projection.

use serde::Serialize;

use crate::jet::Jet1;
use crate::linalg::{dist, dot, project_rows, symmetric_eigen};
use crate::modulus::Modulus;
use crate::sampling;
use crate::Real;

/// `x ↦ max_j ⟨slopes[j], x⟩ + intercepts[j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct PiecewiseAffineMax<T> {
    pub dim: usize,
    pub slopes: Vec<Vec<T>>,
    pub intercepts: Vec<T>,
}

/// Value, active pieces and one subgradient of a [`PiecewiseAffineMax`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEval<T> {
    pub value: T,
    pub active: Vec<usize>,
    pub subgradient: Vec<T>,
}

impl<T: Real> PiecewiseAffineMax<T> {
    pub fn len(&self) -> usize {
        self.slopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slopes.is_empty()
    }

    #[inline]
    pub fn piece(&self, j: usize, x: &[T]) -> T {
        dot(&self.slopes[j], x) + self.intercepts[j]
    }

    #[inline]
    pub fn value(&self, x: &[T]) -> T {
        (0..self.len())
            .map(|j| self.piece(j, x))
            .fold(T::neg_infinity(), T::max)
    }

    /// Value, pieces within `1e-12 · scale` of the max, and the slope of the
    /// first active piece.
    pub fn eval(&self, x: &[T]) -> MaxEval<T> {
        let vals: Vec<T> = (0..self.len()).map(|j| self.piece(j, x)).collect();
        let value = vals.iter().copied().fold(T::neg_infinity(), T::max);
        let tol = T::lit(1e-12) * (T::one() + value.abs());
        let active: Vec<usize> = (0..self.len())
            .filter(|&j| value - vals[j] <= tol)
            .collect();
        let subgradient = self.slopes[active[0]].clone();
        MaxEval {
            value,
            active,
            subgradient,
        }
    }

    /// True when `t ↦ m(t d)` grows in both directions along `d`.
    pub fn coercive_along(&self, d: &[T]) -> bool {
        let up = self
            .slopes
            .iter()
            .map(|s| dot(s, d))
            .fold(T::neg_infinity(), T::max);
        let down = self
            .slopes
            .iter()
            .map(|s| -dot(s, d))
            .fold(T::neg_infinity(), T::max);
        up > T::zero() && down > T::zero()
    }
}

/// One affine piece per carrier: slope `G(y)`, intercept `f(y) − ⟨G(y), y⟩`.
pub fn build_m<T: Real>(jet: &Jet1<T>) -> PiecewiseAffineMax<T> {
    PiecewiseAffineMax {
        dim: jet.dim,
        slopes: jet.grads.clone(),
        intercepts: jet
            .points
            .iter()
            .zip(&jet.values)
            .zip(&jet.grads)
            .map(|((p, &v), g)| v - dot(g, p))
            .collect(),
    }
}

/// `m(x) = ⟨linear, x⟩ + reduced(basis · x)` with orthonormal `basis` rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Factorization<T> {
    pub linear: Vec<T>,
    pub basis: Vec<Vec<T>>,
    pub reduced: PiecewiseAffineMax<T>,
    pub k: usize,
}

/// Singular-value cutoff relative to the largest one.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Splits `m` into the centroid slope and a coercive max-affine function on
/// the span of the centered slopes.
pub fn factorize<T: Real>(m: &PiecewiseAffineMax<T>) -> Factorization<T> {
    factorize_with_cutoff(m, T::lit(RANK_CUTOFF))
}

pub fn factorize_with_cutoff<T: Real>(m: &PiecewiseAffineMax<T>, cutoff: T) -> Factorization<T> {
    let n = m.dim;
    let count = T::count(m.len());
    let mut linear = vec![T::zero(); n];
    for s in &m.slopes {
        for k in 0..n {
            linear[k] = linear[k] + s[k] / count;
        }
    }
    let centered: Vec<Vec<T>> = m
        .slopes
        .iter()
        .map(|s| s.iter().zip(&linear).map(|(&a, &b)| a - b).collect())
        .collect();
    let mut gram = vec![vec![T::zero(); n]; n];
    for d in &centered {
        for a in 0..n {
            for b in 0..n {
                gram[a][b] = gram[a][b] + d[a] * d[b];
            }
        }
    }
    let (vals, vecs) = symmetric_eigen(&gram);
    let sigma_max = vals.first().map_or(T::zero(), |v| v.max(T::zero()).sqrt());
    let k = vals
        .iter()
        .filter(|v| sigma_max > T::zero() && v.max(T::zero()).sqrt() > cutoff * sigma_max)
        .count();
    let basis: Vec<Vec<T>> = if k == n {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { T::one() } else { T::zero() })
                    .collect()
            })
            .collect()
    } else {
        vecs.into_iter().take(k).collect()
    };
    let reduced = PiecewiseAffineMax {
        dim: k,
        slopes: centered.iter().map(|d| project_rows(&basis, d)).collect(),
        intercepts: m.intercepts.clone(),
    };
    Factorization {
        linear,
        basis,
        reduced,
        k,
    }
}

impl<T: Real> Factorization<T> {
    pub fn project(&self, x: &[T]) -> Vec<T> {
        project_rows(&self.basis, x)
    }

    /// `⟨linear, x⟩ + reduced(P x)`.
    pub fn value(&self, x: &[T]) -> T {
        let r = if self.k == 0 {
            self.reduced
                .intercepts
                .iter()
                .copied()
                .fold(T::neg_infinity(), T::max)
        } else {
            self.reduced.value(&self.project(x))
        };
        dot(&self.linear, x) + r
    }

    /// Jet of the reduced function on the projected carrier: values
    /// `f(y) − ⟨linear, y⟩`, gradients `P(G(y) − linear)`. Carriers with
    /// coinciding projections are merged; the second vector maps every
    /// carrier to its reduced index.
    pub fn reduced_jet(&self, jet: &Jet1<T>) -> (Jet1<T>, Vec<usize>) {
        let mut points: Vec<Vec<T>> = Vec::new();
        let mut values = Vec::new();
        let mut grads = Vec::new();
        let mut map = Vec::with_capacity(jet.len());
        let tol = T::lit(1e-12) * (T::one() + jet.diameter());
        for i in 0..jet.len() {
            let p = self.project(&jet.points[i]);
            if let Some(j) = points.iter().position(|q| dist(q, &p) <= tol) {
                map.push(j);
                continue;
            }
            map.push(points.len());
            points.push(p);
            values.push(jet.values[i] - dot(&self.linear, &jet.points[i]));
            let g: Vec<T> = jet.grads[i]
                .iter()
                .zip(&self.linear)
                .map(|(&a, &b)| a - b)
                .collect();
            grads.push(self.project(&g));
        }
        (
            Jet1 {
                dim: self.k,
                points,
                values,
                grads,
            },
            map,
        )
    }

    /// Slope test for coercivity along `count` random unit directions of ℝᵏ.
    pub fn is_coercive(&self, count: usize, seed: u64) -> bool {
        if self.k == 0 {
            return true;
        }
        let mut rng = sampling::rng(seed);
        (0..count).all(|_| {
            let d: Vec<T> = sampling::unit_vector(&mut rng, self.k);
            self.reduced.coercive_along(&d)
        })
    }
}

/// Largest `(m(x) − m(x₀) − ⟨G(x₀), x − x₀⟩) / (ω(|x − x₀|)|x − x₀|)` over
/// points at the given radii around carrier `i`, in the coordinate
/// directions and `random_dirs` random ones.
pub fn differentiability_gap<T: Real>(
    m: &PiecewiseAffineMax<T>,
    jet: &Jet1<T>,
    i: usize,
    omega: &Modulus<T>,
    radii: &[T],
    random_dirs: usize,
    seed: u64,
) -> T {
    let x0 = &jet.points[i];
    let m0 = m.value(x0);
    let n = jet.dim;
    let mut dirs: Vec<Vec<T>> = Vec::new();
    for k in 0..n {
        for s in [T::one(), -T::one()] {
            let mut d = vec![T::zero(); n];
            d[k] = s;
            dirs.push(d);
        }
    }
    let mut rng = sampling::rng(seed);
    for _ in 0..random_dirs {
        dirs.push(sampling::unit_vector(&mut rng, n));
    }
    let mut worst = T::zero();
    for d in &dirs {
        for &r in radii {
            let x: Vec<T> = x0.iter().zip(d).map(|(&a, &b)| a + r * b).collect();
            let num = m.value(&x) - m0 - dot(&jet.grads[i], &crate::linalg::sub(&x, x0));
            worst = worst.max(num / (omega.eval_unchecked(r) * r));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs_jet() -> Jet1<f64> {
        Jet1::new(
            vec![vec![-1.0], vec![1.0]],
            vec![1.0, 1.0],
            vec![vec![-1.0], vec![1.0]],
        )
        .unwrap()
    }

    #[test]
    fn build_abs() {
        let m = build_m(&abs_jet());
        assert_eq!(m.slopes, vec![vec![-1.0], vec![1.0]]);
        assert_eq!(m.intercepts, vec![0.0, 0.0]);
        let at0 = m.eval(&[0.0]);
        assert_eq!(at0.value, 0.0);
        assert_eq!(at0.active, vec![0, 1]);
        let at2 = m.eval(&[2.0]);
        assert_eq!((at2.value, at2.active), (2.0, vec![1]));
    }

    #[test]
    fn quadratic_tangents() {
        let j = Jet1::new(
            vec![vec![-1.0], vec![0.0], vec![1.0]],
            vec![0.5, 0.0, 0.5],
            vec![vec![-1.0], vec![0.0], vec![1.0]],
        )
        .unwrap();
        let e = build_m(&j).eval(&[0.5]);
        assert_eq!(e.value, 0.0);
        assert_eq!(e.active, vec![1, 2]);
    }

    #[test]
    fn factorization_examples() {
        let f = factorize(&build_m(&abs_jet()));
        assert_eq!(f.k, 1);
        assert_eq!(f.linear, vec![0.0]);
        assert!(f.is_coercive(8, 1));

        let j2 = Jet1::<f64>::new(
            vec![vec![-1.0, 0.0], vec![1.0, 0.0]],
            vec![1.0, 1.0],
            vec![vec![-1.0, 0.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let f2 = factorize(&build_m(&j2));
        assert_eq!(f2.k, 1);
        assert!((f2.basis[0][0].abs() - 1.0).abs() < 1e-12 && f2.basis[0][1].abs() < 1e-12);
        for x in [[0.3, 2.0], [-1.5, -0.7]] {
            assert!((f2.value(&x) - x[0].abs()).abs() < 1e-12);
        }

        let aff = Jet1::<f64>::new(
            vec![vec![0.0, 0.0], vec![1.0, 2.0]],
            vec![1.0, 1.0 + 3.0 - 2.0],
            vec![vec![3.0, -1.0], vec![3.0, -1.0]],
        )
        .unwrap();
        let f3 = factorize(&build_m(&aff));
        assert_eq!(f3.k, 0);
        assert!((f3.value(&[2.0, 5.0]) - (1.0 + 6.0 - 5.0)).abs() < 1e-12);
    }

    #[test]
    fn differentiability_gap_examples() {
        let j = abs_jet();
        let m = build_m(&j);
        let radii = [0.1, 0.5];
        // Only x > 0 sampled via radii below 1 from x0 = 1 in the +/- axis directions.
        let g = differentiability_gap(&m, &j, 1, &Modulus::linear(), &radii, 0, 1);
        assert_eq!(g, 0.0);
    }
}
