//! 1-jets on finite carriers.

use serde::{Deserialize, Serialize};

use crate::linalg::{dist, dot, norm};
use crate::{Error, Real, Result};

/// Prescribed values and gradients on a finite set of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Jet1<T> {
    pub dim: usize,
    pub points: Vec<Vec<T>>,
    pub values: Vec<T>,
    pub grads: Vec<Vec<T>>,
}

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 3;

impl<T: Real> Jet1<T> {
    /// Builds a jet and rejects it if [`Jet1::validate`] reports anything.
    pub fn new(points: Vec<Vec<T>>, values: Vec<T>, grads: Vec<Vec<T>>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        let jet = Jet1 {
            dim,
            points,
            values,
            grads,
        };
        jet.ensure_valid()?;
        Ok(jet)
    }

    /// Samples a jet from a function returning `(value, gradient)`.
    pub fn sample<F>(points: Vec<Vec<T>>, f: F) -> Result<Self>
    where
        F: Fn(&[T]) -> (T, Vec<T>),
    {
        let (values, grads) = points.iter().map(|p| f(p)).unzip();
        Self::new(points, values, grads)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Lists every violated invariant; empty iff the jet is valid.
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.dim == 0 || self.dim > MAX_DIM {
            issues.push(format!("dimension {} outside 1..={MAX_DIM}", self.dim));
        }
        if self.points.is_empty() {
            issues.push("empty carrier".to_string());
        }
        if self.values.len() != self.points.len() || self.grads.len() != self.points.len() {
            issues.push(format!(
                "length mismatch: {} points, {} values, {} grads",
                self.points.len(),
                self.values.len(),
                self.grads.len()
            ));
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.len() != self.dim {
                issues.push(format!(
                    "point {i} has {} coordinates, expected {}",
                    p.len(),
                    self.dim
                ));
            }
        }
        for (i, g) in self.grads.iter().enumerate() {
            if g.len() != self.dim {
                issues.push(format!(
                    "gradient {i} has {} components, expected {}",
                    g.len(),
                    self.dim
                ));
            }
        }
        let nonfinite = self.points.iter().flatten().any(|v| !v.is_finite())
            || self.values.iter().any(|v| !v.is_finite())
            || self.grads.iter().flatten().any(|v| !v.is_finite());
        if nonfinite {
            issues.push("non-finite coordinate".to_string());
        }
        if issues.is_empty() {
            'outer: for i in 0..self.points.len() {
                for j in i + 1..self.points.len() {
                    if dist(&self.points[i], &self.points[j]) <= T::zero() {
                        issues.push(format!("points not distinct ({i}, {j})"));
                        break 'outer;
                    }
                }
            }
        }
        issues
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let issues = self.validate();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(issues.join("; ")))
        }
    }

    pub fn max_abs_value(&self) -> T {
        self.values.iter().fold(T::zero(), |a, v| a.max(v.abs()))
    }

    /// `max ‖G(y)‖` over the carrier.
    pub fn max_grad_norm(&self) -> T {
        self.grads.iter().fold(T::zero(), |a, g| a.max(norm(g)))
    }

    /// Diameter of the carrier.
    pub fn diameter(&self) -> T {
        let mut d = T::zero();
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                d = d.max(dist(&self.points[i], &self.points[j]));
            }
        }
        d
    }

    /// Magnitude scale `1 + ‖f‖∞ + ‖G‖∞·diam C` used for relative tolerances.
    pub fn scale(&self) -> T {
        T::one() + self.max_abs_value() + self.max_grad_norm() * self.diameter()
    }

    /// Taylor polynomial `f(y) + ⟨G(y), x − y⟩` of carrier `i`.
    #[inline]
    pub fn taylor(&self, i: usize, x: &[T]) -> T {
        let y = &self.points[i];
        let g = &self.grads[i];
        let mut acc = self.values[i];
        for k in 0..self.dim {
            acc = acc + g[k] * (x[k] - y[k]);
        }
        acc
    }

    /// Tangent-plane gap `f(x) − f(y) − ⟨G(y), x − y⟩` for carriers `x = i`, `y = j`.
    #[inline]
    pub fn gap(&self, i: usize, j: usize) -> T {
        self.values[i] - self.taylor(j, &self.points[i])
    }

    /// Bounding box of the carrier.
    pub fn bbox(&self) -> (Vec<T>, Vec<T>) {
        let mut lo = vec![T::infinity(); self.dim];
        let mut hi = vec![T::neg_infinity(); self.dim];
        for p in &self.points {
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Index of the carrier closest to `x` and its distance.
    pub fn nearest(&self, x: &[T]) -> (usize, T) {
        let mut best = (0, T::infinity());
        for (i, p) in self.points.iter().enumerate() {
            let d = dist(p, x);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Jet of `f − ⟨a, ·⟩ − b`.
    pub fn subtract_affine(&self, slope: &[T], offset: T) -> Self {
        Jet1 {
            dim: self.dim,
            points: self.points.clone(),
            values: self
                .points
                .iter()
                .zip(&self.values)
                .map(|(p, &v)| v - dot(slope, p) - offset)
                .collect(),
            grads: self
                .grads
                .iter()
                .map(|g| g.iter().zip(slope).map(|(&a, &b)| a - b).collect())
                .collect(),
        }
    }
}
