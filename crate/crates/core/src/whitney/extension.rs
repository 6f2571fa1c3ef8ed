use super::CubeDecomposition;
use crate::jet::Jet1;
use crate::linalg::point_box_dist;
use crate::{Error, Real, Result};

/// `x ↦ Σ_j φ_j(x) P_{p_j}(x)` where `P_p` is the tangent plane of the jet at
/// the carrier nearest to cube `j`.
#[derive(Debug, Clone)]
pub struct WhitneyJetExtension<'a, T> {
    pub jet: &'a Jet1<T>,
    pub decomp: &'a CubeDecomposition<T>,
    /// Carrier attached to each cube.
    pub anchors: Vec<usize>,
}

impl<'a, T: Real> WhitneyJetExtension<'a, T> {
    pub fn new(jet: &'a Jet1<T>, decomp: &'a CubeDecomposition<T>) -> Result<Self> {
        if jet.dim != decomp.dim {
            return Err(Error::invalid("jet and decomposition dimensions disagree"));
        }
        jet.ensure_valid()?;
        let anchors = decomp
            .cubes
            .iter()
            .map(|c| {
                let (lo, hi) = (c.lo(), c.hi());
                let mut best = 0;
                let mut best_d = T::infinity();
                for (i, p) in jet.points.iter().enumerate() {
                    let d = point_box_dist(p, &lo, &hi);
                    if d < best_d {
                        best = i;
                        best_d = d;
                    }
                }
                best
            })
            .collect();
        Ok(WhitneyJetExtension {
            jet,
            decomp,
            anchors,
        })
    }

    /// Value and gradient; exact at the carriers.
    pub fn eval(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        if let Some(i) = self.jet.points.iter().position(|p| p.as_slice() == x) {
            return Ok((self.jet.values[i], self.jet.grads[i].clone()));
        }
        let terms = self.decomp.partition_eval(x)?;
        let n = x.len();
        let mut value = T::zero();
        let mut grad = vec![T::zero(); n];
        for t in &terms {
            let p = self.anchors[t.cube];
            let tv = self.jet.taylor(p, x);
            value = value + t.weight * tv;
            for a in 0..n {
                grad[a] = grad[a] + t.weight * self.jet.grads[p][a] + t.gradient[a] * tv;
            }
        }
        Ok((value, grad))
    }
}

/// One-shot evaluation of the Whitney extension of `jet` at `x`.
pub fn whitney_extend_jet<T: Real>(
    jet: &Jet1<T>,
    decomp: &CubeDecomposition<T>,
    x: &[T],
) -> Result<(T, Vec<T>)> {
    WhitneyJetExtension::new(jet, decomp)?.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::whitney::{decompose, ClosedSetApprox};

    #[test]
    fn exact_on_carriers_and_affine_reproduced() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![-0.4, 0.9]];
        let jet = Jet1::sample(pts.clone(), |x: &[f64]| {
            (2.0 * x[0] - x[1] + 1.0, vec![2.0, -1.0])
        })
        .unwrap();
        let set = ClosedSetApprox::points(pts.clone()).unwrap();
        let d = decompose(&set, &[-1.0, -1.0], &[1.5, 1.5], 14).unwrap();
        let w = WhitneyJetExtension::new(&jet, &d).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let (v, g) = w.eval(p).unwrap();
            assert_eq!(v, jet.values[i]);
            assert_eq!(g, jet.grads[i]);
        }
        let (v, g) = w.eval(&[0.3, -0.7]).unwrap();
        assert!((v - (0.6 + 0.7 + 1.0)).abs() < 1e-12);
        assert!((g[0] - 2.0).abs() < 1e-9 && (g[1] + 1.0).abs() < 1e-9);
    }
}
