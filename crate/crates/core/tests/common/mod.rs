//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use convexjet::jet::Jet1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Analytic = Box<dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync>;

/// A convex function with Lipschitz gradient, its closed form and the
/// gradient's Lipschitz constant (an upper bound).
pub struct ConvexFn {
    pub name: &'static str,
    pub dim: usize,
    pub f: Analytic,
    pub lip_grad: f64,
}

fn rand_matrix(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// One of four families picked by `kind`, with random coefficients.
pub fn random_convex(rng: &mut ChaCha8Rng, dim: usize, kind: usize) -> ConvexFn {
    match kind % 4 {
        0 => {
            // ½xᵀAx + ⟨b, x⟩ with A = RRᵀ/n + 0.2 I.
            let r = rand_matrix(rng, dim);
            let a: Vec<Vec<f64>> = (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|j| {
                            let s: f64 =
                                (0..dim).map(|k| r[i][k] * r[j][k]).sum::<f64>() / dim as f64;
                            s + if i == j { 0.2 } else { 0.0 }
                        })
                        .collect()
                })
                .collect();
            let b: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let lip = a
                .iter()
                .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max);
            ConvexFn {
                name: "quadratic",
                dim,
                lip_grad: lip,
                f: Box::new(move |x: &[f64]| {
                    let ax: Vec<f64> = a
                        .iter()
                        .map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum())
                        .collect();
                    let v = 0.5 * ax.iter().zip(x).map(|(p, q)| p * q).sum::<f64>()
                        + b.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
                    let g = ax.iter().zip(&b).map(|(p, q)| p + q).collect();
                    (v, g)
                }),
            }
        }
        1 => {
            // log Σ exp(⟨a_i, x⟩ + c_i) + 0.1|x|².
            let rows: Vec<(Vec<f64>, f64)> = (0..3)
                .map(|_| {
                    (
                        (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        rng.gen_range(-0.5..0.5),
                    )
                })
                .collect();
            let amax = rows
                .iter()
                .map(|(a, _)| a.iter().map(|v| v * v).sum::<f64>())
                .fold(0.0, f64::max);
            ConvexFn {
                name: "log-sum-exp",
                dim,
                lip_grad: amax + 0.2,
                f: Box::new(move |x: &[f64]| {
                    let z: Vec<f64> = rows
                        .iter()
                        .map(|(a, c)| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + c)
                        .collect();
                    let zm = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let w: Vec<f64> = z.iter().map(|v| (v - zm).exp()).collect();
                    let s: f64 = w.iter().sum();
                    let norm2: f64 = x.iter().map(|v| v * v).sum();
                    let v = zm + s.ln() + 0.1 * norm2;
                    let g = (0..x.len())
                        .map(|k| {
                            rows.iter()
                                .zip(&w)
                                .map(|((a, _), wi)| a[k] * wi)
                                .sum::<f64>()
                                / s
                                + 0.2 * x[k]
                        })
                        .collect();
                    (v, g)
                }),
            }
        }
        2 => {
            // √(1 + |x − c|²).
            let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
            ConvexFn {
                name: "hyperbolic",
                dim,
                lip_grad: 1.0,
                f: Box::new(move |x: &[f64]| {
                    let d: Vec<f64> = x.iter().zip(&c).map(|(p, q)| p - q).collect();
                    let r = (1.0 + d.iter().map(|v| v * v).sum::<f64>()).sqrt();
                    (r, d.iter().map(|v| v / r).collect())
                }),
            }
        }
        _ => {
            // Σ huber(⟨a_i, x⟩ − t_i) + 0.05|x|², Huber width 0.5.
            let rows: Vec<(Vec<f64>, f64)> = (0..2)
                .map(|_| {
                    (
                        (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        rng.gen_range(-0.5..0.5),
                    )
                })
                .collect();
            let lip = rows
                .iter()
                .map(|(a, _)| a.iter().map(|v| v * v).sum::<f64>())
                .sum::<f64>()
                / 0.5
                + 0.1;
            ConvexFn {
                name: "huber",
                dim,
                lip_grad: lip,
                f: Box::new(move |x: &[f64]| {
                    let w = 0.5;
                    let mut v = 0.05 * x.iter().map(|p| p * p).sum::<f64>();
                    let mut g: Vec<f64> = x.iter().map(|p| 0.1 * p).collect();
                    for (a, t) in &rows {
                        let z = a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() - t;
                        let (hv, hd) = if z.abs() <= w {
                            (z * z / (2.0 * w), z / w)
                        } else {
                            (z.abs() - w / 2.0, z.signum())
                        };
                        v += hv;
                        for k in 0..x.len() {
                            g[k] += hd * a[k];
                        }
                    }
                    (v, g)
                }),
            }
        }
    }
}

/// Points in `[-1, 1]^dim` at least `sep` apart.
pub fn separated_points(rng: &mut ChaCha8Rng, dim: usize, count: usize, sep: f64) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = Vec::new();
    let mut tries = 0;
    while pts.len() < count && tries < 100_000 {
        tries += 1;
        let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if pts.iter().all(|q| {
            q.iter()
                .zip(&p)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                >= sep
        }) {
            pts.push(p);
        }
    }
    pts
}

pub struct SuiteCase {
    pub func: ConvexFn,
    pub jet: Jet1<f64>,
}

/// Twenty jets sampled from random convex functions, `n ≤ 2`, `|C| ≤ 20`.
pub fn jet_suite(seed: u64) -> Vec<SuiteCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..20)
        .map(|i| {
            let dim = 1 + i % 2;
            let func = random_convex(&mut rng, dim, i / 2);
            let count = rng.gen_range(3..=20);
            let pts = separated_points(&mut rng, dim, count, 0.15);
            let jet = Jet1::sample(pts, |x| (func.f)(x)).expect("valid sampled jet");
            SuiteCase { func, jet }
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
