use rayon::prelude::*;
use serde::Serialize;

use super::{ClosedSetApprox, CubeDecomposition};
use crate::linalg::{dist, norm, sub};
use crate::modulus::Modulus;
use crate::sampling;
use crate::{Error, Real, Result};

/// Local searches per sampling chunk, and steps per search.
const REFINE_STARTS: usize = 4;
const REFINE_STEPS: usize = 800;

/// `φ = Σ_j budget_j φ_j`, a nonnegative function vanishing on E to first
/// order, with `λ = max_j budget_j / (ω(diam Q_j) diam Q_j)`.
#[derive(Debug, Clone)]
pub struct Corrector<T> {
    pub decomp: CubeDecomposition<T>,
    pub budgets: Vec<T>,
    pub omega: Modulus<T>,
    pub lambda: T,
}

/// Sampled bound ratios and gradient-modulus constant of a corrector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrectorSample {
    pub samples: usize,
    /// `max φ(x) / ((4/3)² λ ω(d) d)`.
    pub value_ratio: f64,
    /// `max |∇φ(x)| / ((4AN/3) λ ω(d))`.
    pub gradient_ratio: f64,
    /// `max |∇φ(x) − ∇φ(y)| / (λ ω(|x − y|))` over the sampled pairs.
    pub gamma: f64,
}

pub fn build_corrector<T: Real>(
    decomp: CubeDecomposition<T>,
    budgets: Vec<T>,
    omega: &Modulus<T>,
) -> Result<Corrector<T>> {
    if budgets.len() != decomp.cubes.len() {
        return Err(Error::invalid(format!(
            "{} budgets for {} cubes",
            budgets.len(),
            decomp.cubes.len()
        )));
    }
    if budgets.iter().any(|b| !(b.is_finite() && *b >= T::zero())) {
        return Err(Error::invalid(
            "corrector budgets must be finite and nonnegative",
        ));
    }
    let mut lambda = T::zero();
    for (c, &b) in decomp.cubes.iter().zip(&budgets) {
        let d = c.diam();
        lambda = lambda.max(b / (omega.eval(d)? * d));
    }
    Ok(Corrector {
        decomp,
        budgets,
        omega: omega.clone(),
        lambda,
    })
}

impl<T: Real> Corrector<T> {
    pub fn dim(&self) -> usize {
        self.decomp.dim
    }

    /// Value and gradient; zero on E.
    pub fn eval(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        let n = self.dim();
        if self.decomp.set.dist(x) <= T::zero() {
            return Ok((T::zero(), vec![T::zero(); n]));
        }
        let terms = self.decomp.partition_eval(x)?;
        let mut v = T::zero();
        let mut g = vec![T::zero(); n];
        for t in &terms {
            let b = self.budgets[t.cube];
            v = v + b * t.weight;
            for a in 0..n {
                g[a] = g[a] + b * t.gradient[a];
            }
        }
        Ok((v, g))
    }

    pub fn value_bound(&self, x: &[T]) -> T {
        let d = self.decomp.set.dist(x);
        T::lit(16.0 / 9.0) * self.lambda * self.omega.eval_unchecked(d) * d
    }

    pub fn gradient_bound(&self, x: &[T]) -> T {
        let d = self.decomp.set.dist(x);
        T::lit(4.0 / 3.0)
            * self.decomp.a_const
            * T::count(self.decomp.overlap_n)
            * self.lambda
            * self.omega.eval_unchecked(d)
    }

    /// `|∇φ(x) − ∇φ(x + r u)| / (λ ω(r))`, or `None` off the domain.
    fn pair_ratio(&self, x: &[T], u: &[T], r: T, g: Option<&[T]>) -> Option<f64> {
        let n = self.dim();
        let lo = &self.decomp.bbox_lo;
        let hi = &self.decomp.bbox_hi;
        let y: Vec<T> = (0..n)
            .map(|a| (x[a] + r * u[a]).max(lo[a]).min(hi[a]))
            .collect();
        let sep = dist(x, &y);
        if sep <= T::zero() || self.lambda <= T::zero() {
            return None;
        }
        let gx = match g {
            Some(g) => g.to_vec(),
            None => self.eval(x).ok()?.1,
        };
        let (_, gy) = self.eval(&y).ok()?;
        Some((norm(&sub(&gx, &gy)) / (self.lambda * self.omega.eval_unchecked(sep))).as_f64())
    }

    /// Local random search from `(x, u, r)` that keeps the best ratio.
    fn refine(
        &self,
        mut x: Vec<T>,
        mut u: Vec<T>,
        mut r: T,
        mut best: f64,
        seed: u64,
        steps: usize,
    ) -> f64 {
        let n = self.dim();
        let mut rng = sampling::rng(seed);
        let lo = &self.decomp.bbox_lo;
        let hi = &self.decomp.bbox_hi;
        let mut sigma = 0.25;
        for step in 0..steps {
            let d = self.decomp.set.dist(&x);
            let w: Vec<T> = sampling::unit_vector(&mut rng, n);
            let jump = T::lit(sigma * rand::Rng::gen_range(&mut rng, 0.0..1.0f64)) * d;
            let cx: Vec<T> = (0..n)
                .map(|a| (x[a] + jump * w[a]).max(lo[a]).min(hi[a]))
                .collect();
            let tilt: Vec<T> = sampling::unit_vector(&mut rng, n);
            let mut cu: Vec<T> = (0..n).map(|a| u[a] + T::lit(sigma) * tilt[a]).collect();
            let len = norm(&cu);
            if len <= T::zero() {
                continue;
            }
            cu.iter_mut().for_each(|c| *c = *c / len);
            let cr = r * T::lit(2f64.powf(rand::Rng::gen_range(&mut rng, -1.0..1.0) * sigma * 4.0));
            if let Some(q) = self.pair_ratio(&cx, &cu, cr, None) {
                if q > best {
                    best = q;
                    x = cx;
                    u = cu;
                    r = cr;
                }
            }
            if step % 100 == 99 {
                sigma *= 0.6;
            }
        }
        best
    }

    /// Samples `count` points and `count` pairs. Pairs mix close pairs at
    /// log-uniform separations with pairs ending on the closed set; the best
    /// close pairs are then refined by local search.
    pub fn sample_bounds(&self, count: usize, seed: u64) -> CorrectorSample {
        let n = self.dim();
        let lo = &self.decomp.bbox_lo;
        let hi = &self.decomp.bbox_hi;
        let extent = lo
            .iter()
            .zip(hi)
            .fold(T::zero(), |m, (&a, &b)| m.max(b - a))
            .as_f64();
        let carriers: Vec<Vec<T>> = match &self.decomp.set {
            ClosedSetApprox::Points { points, .. } => points.clone(),
            ClosedSetApprox::Boxes { boxes, .. } => boxes
                .iter()
                .map(|(a, b)| {
                    a.iter()
                        .zip(b)
                        .map(|(&p, &q)| (p + q) / T::lit(2.0))
                        .collect()
                })
                .collect(),
        };
        let chunks = 16usize;
        let per = count.div_ceil(chunks);
        type Start<T> = Vec<(f64, Vec<T>, Vec<T>, T)>;
        let parts: Vec<(usize, f64, f64, f64, Start<T>)> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = sampling::rng(seed.wrapping_mul(0x9e37_79b9).wrapping_add(c as u64));
                let (mut used, mut vr, mut gr, mut gamma) = (0usize, 0.0f64, 0.0f64, 0.0f64);
                let mut start: Start<T> = Vec::new();
                for s in 0..per {
                    let x: Vec<T> = sampling::uniform_in_box(&mut rng, lo, hi);
                    let Ok((v, g)) = self.eval(&x) else { continue };
                    used += 1;
                    let vb = self.value_bound(&x).as_f64();
                    let gb = self.gradient_bound(&x).as_f64();
                    if vb > 0.0 {
                        vr = vr.max(v.as_f64() / vb);
                    }
                    if gb > 0.0 {
                        gr = gr.max(norm(&g).as_f64() / gb);
                    }
                    if s % 4 == 3 && !carriers.is_empty() {
                        let y = &carriers[rand::Rng::gen_range(&mut rng, 0..carriers.len())];
                        let diff = sub(y, &x);
                        let r = norm(&diff);
                        if r > T::zero() {
                            let u: Vec<T> = diff.iter().map(|&a| a / r).collect();
                            if let Some(q) = self.pair_ratio(&x, &u, r, Some(&g)) {
                                gamma = gamma.max(q);
                            }
                        }
                    } else {
                        let u: Vec<T> = sampling::unit_vector(&mut rng, n);
                        let e: f64 = rand::Rng::gen_range(&mut rng, 0.0..5.0);
                        let r = T::lit(extent * 10f64.powf(-e));
                        if let Some(q) = self.pair_ratio(&x, &u, r, Some(&g)) {
                            gamma = gamma.max(q);
                            start.push((q, x.clone(), u, r));
                            start.sort_by(|a, b| b.0.total_cmp(&a.0));
                            start.truncate(REFINE_STARTS);
                        }
                    }
                }
                (used, vr, gr, gamma, start)
            })
            .collect();
        let refined = parts
            .par_iter()
            .enumerate()
            .flat_map_iter(|(c, p)| {
                p.4.iter()
                    .cloned()
                    .enumerate()
                    .map(move |(k, s)| (c * REFINE_STARTS + k, s))
            })
            .map(|(c, (q, x, u, r))| {
                self.refine(
                    x,
                    u,
                    r,
                    q,
                    seed ^ (c as u64).wrapping_mul(0x51_7cc1),
                    REFINE_STEPS,
                )
            })
            .reduce(|| 0.0f64, f64::max);
        let mut out = parts.iter().fold(
            CorrectorSample {
                samples: 0,
                value_ratio: 0.0,
                gradient_ratio: 0.0,
                gamma: 0.0,
            },
            |acc, p| CorrectorSample {
                samples: acc.samples + p.0,
                value_ratio: acc.value_ratio.max(p.1),
                gradient_ratio: acc.gradient_ratio.max(p.2),
                gamma: acc.gamma.max(p.3),
            },
        );
        out.gamma = out.gamma.max(refined);
        out
    }
}
