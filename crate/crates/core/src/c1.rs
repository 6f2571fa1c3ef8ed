//! Convex C¹ extension: Whitney-extend the jet, add a smoothed majorant of
//! its distance to the tangent-plane maximum, then take the convex envelope.

use rayon::prelude::*;
use serde::Serialize;

use crate::conditions::{check_c, check_cw1_default};
use crate::envelope::{conv_envelope_grid, EnvelopeMethod, EnvelopeResult};
use crate::field::ExtensionField;
use crate::grid::{GridSpec, ScalarGrid};
use crate::jet::Jet1;
use crate::linalg::{norm, sub};
use crate::minimal::{build_m, PiecewiseAffineMax};
use crate::sampling;
use crate::whitney::{
    decompose, ClosedSetApprox, CubeDecomposition, WhitneyJetExtension, DEFAULT_MAX_GENERATION,
};
use crate::{Error, Real, Result, SCHEMA_VERSION};

/// `0` for `t ≤ 0`, `t²` up to `(K+ε)/2`, then affine with slope `K+ε`.
pub fn theta<T: Real>(k: T, eps: T, t: T) -> T {
    let l = k + eps;
    if t <= T::zero() {
        T::zero()
    } else if t <= l / T::lit(2.0) {
        t * t
    } else {
        l * (t - l / T::lit(4.0))
    }
}

/// Derivative of [`theta`].
pub fn theta_derivative<T: Real>(k: T, eps: T, t: T) -> T {
    let l = k + eps;
    if t <= T::zero() {
        T::zero()
    } else if t <= l / T::lit(2.0) {
        T::lit(2.0) * t
    } else {
        l
    }
}

/// Default smoothing parameter `min(1, K/3)`, or 1 when all gradients vanish.
pub fn default_eps<T: Real>(jet: &Jet1<T>) -> T {
    let k = jet.max_grad_norm();
    if k > T::zero() {
        T::one().min(k / T::lit(3.0))
    } else {
        T::one()
    }
}

/// Carrier bounding box widened by `2(K + ε)` on every side.
pub fn default_box<T: Real>(jet: &Jet1<T>, eps: T) -> (Vec<T>, Vec<T>) {
    let (lo, hi) = jet.bbox();
    let pad = T::lit(2.0) * (jet.max_grad_norm() + eps);
    (
        lo.iter().map(|&v| v - pad).collect(),
        hi.iter().map(|&v| v + pad).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C1Options<T> {
    /// Smoothing parameter; [`default_eps`] when absent.
    pub eps: Option<T>,
    pub max_generation: u32,
    /// Gauss–Legendre points per axis of the mollifier.
    pub quadrature: usize,
    /// Radius halvings allowed per cube.
    pub max_halvings: u32,
    pub seed: u64,
}

impl<T: Real> Default for C1Options<T> {
    fn default() -> Self {
        C1Options {
            eps: None,
            max_generation: DEFAULT_MAX_GENERATION,
            quadrature: 3,
            max_halvings: 48,
            seed: sampling::DEFAULT_SEED,
        }
    }
}

/// Pointwise access to `f̃`, `m`, `Φ = θ(d(·, C))` and `H = |f̃ − m| + 2Φ`.
pub struct Smoothing<'a, T> {
    pub jet: &'a Jet1<T>,
    pub m: PiecewiseAffineMax<T>,
    pub wext: WhitneyJetExtension<'a, T>,
    pub k: T,
    pub eps: T,
}

impl<'a, T: Real> Smoothing<'a, T> {
    pub fn new(jet: &'a Jet1<T>, decomp: &'a CubeDecomposition<T>, eps: T) -> Result<Self> {
        if !(eps > T::zero()) {
            return Err(Error::invalid("smoothing parameter must be positive"));
        }
        Ok(Smoothing {
            jet,
            m: build_m(jet),
            wext: WhitneyJetExtension::new(jet, decomp)?,
            k: jet.max_grad_norm(),
            eps,
        })
    }

    /// `f̃(x)`, or the tangent plane of the nearest carrier inside the
    /// truncation collar. The flag reports the fallback.
    pub fn ftilde(&self, x: &[T]) -> (T, Vec<T>, bool) {
        match self.wext.eval(x) {
            Ok((v, g)) => (v, g, false),
            Err(_) => {
                let (i, _) = self.jet.nearest(x);
                (self.jet.taylor(i, x), self.jet.grads[i].clone(), true)
            }
        }
    }

    pub fn phi(&self, x: &[T]) -> T {
        theta(self.k, self.eps, self.jet.nearest(x).1)
    }

    pub fn h(&self, x: &[T]) -> T {
        (self.ftilde(x).0 - self.m.value(x)).abs() + T::lit(2.0) * self.phi(x)
    }
}

/// Node samples of `Φ` and `H`.
pub fn smoothing_data<T: Real>(
    jet: &Jet1<T>,
    decomp: &CubeDecomposition<T>,
    eps: T,
    spec: &GridSpec<T>,
) -> Result<(ScalarGrid<T>, ScalarGrid<T>)> {
    let tol = T::lit(1e-12) * (T::one() + spec.max_step());
    if jet.points.iter().any(|p| !spec.contains(p, tol)) {
        return Err(Error::invalid("grid box must contain every carrier point"));
    }
    let s = Smoothing::new(jet, decomp, eps)?;
    let phi = ScalarGrid::new(spec.clone(), spec.sample(|x| s.phi(x)))?;
    let h = ScalarGrid::new(spec.clone(), spec.sample(|x| s.h(x)))?;
    Ok((phi, h))
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = 0.6f64.sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        _ => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * 1.2f64.sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * 1.2f64.sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
    }
}

/// Tensor quadrature of the biweight kernel `Π(1 − u²)²` on `[−1, 1]^k`,
/// normalized to unit mass.
fn kernel_rule(k: usize, n: usize) -> Vec<(Vec<f64>, f64)> {
    let (x, w) = gauss_legendre(n);
    let total = n.pow(k as u32);
    let mut rule: Vec<(Vec<f64>, f64)> = (0..total)
        .map(|mut code| {
            let mut u = Vec::with_capacity(k);
            let mut weight = 1.0;
            for _ in 0..k {
                let i = code % n;
                code /= n;
                u.push(x[i]);
                weight *= w[i] * (1.0 - x[i] * x[i]).powi(2);
            }
            (u, weight)
        })
        .collect();
    let mass: f64 = rule.iter().map(|r| r.1).sum();
    for r in &mut rule {
        r.1 /= mass;
    }
    rule
}

/// Node samples of the smoothed majorant and its certification data.
#[derive(Debug, Clone)]
pub struct Majorant<T> {
    pub grid: ScalarGrid<T>,
    /// `max |φ̃ − H| / Φ` over the nodes off the carrier.
    pub max_ratio: f64,
    pub max_halvings: u32,
    pub cubes_used: usize,
}

/// Blends per-cube mollifications of `H` by the partition of unity. Each
/// cube's radius starts at a quarter side and is halved until the sampled
/// error on the dilated cube, nodes included, is at most `Φ/2`.
pub fn smooth_majorant<T: Real>(
    s: &Smoothing<'_, T>,
    decomp: &CubeDecomposition<T>,
    spec: &GridSpec<T>,
    opts: &C1Options<T>,
) -> Result<Majorant<T>> {
    let k = spec.dim();
    let rule = kernel_rule(k, opts.quadrature.clamp(1, 4));
    let clamp = |x: Vec<T>| -> Vec<T> {
        (0..k)
            .map(|a| x[a].max(spec.lo[a]).min(spec.hi[a]))
            .collect()
    };
    let mollify = |x: &[T], r: T| -> T {
        rule.iter()
            .map(|(u, w)| {
                let y = clamp((0..k).map(|a| x[a] + r * T::lit(u[a])).collect());
                s.h(&y) * T::lit(*w)
            })
            .sum()
    };
    let nodes = spec.nodes();
    let terms: Vec<Option<Vec<(usize, T)>>> = nodes
        .par_iter()
        .map(|x| {
            if s.jet.nearest(x).1 <= T::zero() {
                return None;
            }
            decomp
                .partition_eval(x)
                .ok()
                .map(|ts| ts.into_iter().map(|t| (t.cube, t.weight)).collect())
        })
        .collect();
    let mut used: Vec<usize> = terms
        .iter()
        .flatten()
        .flat_map(|ts| ts.iter().map(|t| t.0))
        .collect();
    used.sort_unstable();
    used.dedup();
    let node_range = |lo: T, hi: T, a: usize| -> (usize, usize) {
        let h = spec.step(a);
        let first = ((lo - spec.lo[a]) / h).ceil().max(T::zero());
        let last = ((hi - spec.lo[a]) / h)
            .floor()
            .min(T::count(spec.res[a] - 1));
        (first.to_usize().unwrap_or(0), last.to_usize().unwrap_or(0))
    };
    let radii: Vec<Result<(T, u32)>> = used
        .par_iter()
        .map(|&j| {
            let cube = &decomp.cubes[j];
            let (dlo, dhi) = (cube.dilated_lo(), cube.dilated_hi());
            let mut samples: Vec<Vec<T>> = Vec::new();
            let total = 3usize.pow(k as u32);
            for mut code in 0..total {
                let p: Vec<T> = (0..k)
                    .map(|a| {
                        let t = code % 3;
                        code /= 3;
                        match t {
                            0 => dlo[a],
                            1 => cube.center[a],
                            _ => dhi[a],
                        }
                    })
                    .collect();
                samples.push(clamp(p));
            }
            let ranges: Vec<(usize, usize)> =
                (0..k).map(|a| node_range(dlo[a], dhi[a], a)).collect();
            if ranges.iter().all(|r| r.0 <= r.1) {
                let counts: Vec<usize> = ranges.iter().map(|r| r.1 - r.0 + 1).collect();
                let total: usize = counts.iter().product();
                for mut code in 0..total {
                    let idx: Vec<usize> = (0..k)
                        .map(|a| {
                            let i = ranges[a].0 + code % counts[a];
                            code /= counts[a];
                            i
                        })
                        .collect();
                    samples.push(spec.node(spec.flat_index(&idx)));
                }
            }
            let data: Vec<(Vec<T>, T, T)> = samples
                .into_iter()
                .map(|x| {
                    let h = s.h(&x);
                    let phi = s.phi(&x);
                    (x, h, phi)
                })
                .filter(|d| d.2 > T::zero())
                .collect();
            let mut r = cube.side / T::lit(4.0);
            for halvings in 0..=opts.max_halvings {
                if data
                    .iter()
                    .all(|(x, h, phi)| (mollify(x, r) - *h).abs() <= *phi / T::lit(2.0))
                {
                    return Ok((r, halvings));
                }
                r = r / T::lit(2.0);
            }
            Err(Error::certification(
                "smoothing",
                format!(
                    "cube {j} (side {}) not certified after {} halvings",
                    cube.side, opts.max_halvings
                ),
            ))
        })
        .collect();
    let mut radius = vec![T::zero(); decomp.cubes.len()];
    let mut max_halvings = 0;
    for (&j, r) in used.iter().zip(radii) {
        let (rj, hv) = r?;
        radius[j] = rj;
        max_halvings = max_halvings.max(hv);
    }
    let values: Vec<(T, f64)> = nodes
        .par_iter()
        .zip(&terms)
        .map(|(x, ts)| match ts {
            None => (s.h(x), 0.0),
            Some(ts) => {
                let v: T = ts.iter().map(|&(j, w)| w * mollify(x, radius[j])).sum();
                let phi = s.phi(x);
                let ratio = if phi > T::zero() {
                    ((v - s.h(x)).abs() / phi).as_f64()
                } else {
                    0.0
                };
                (v, ratio)
            }
        })
        .collect();
    let max_ratio = values.iter().map(|v| v.1).fold(0.0, f64::max);
    if max_ratio > 1.0 {
        return Err(Error::certification(
            "smoothing",
            format!("node error ratio {max_ratio:.3} exceeds 1"),
        ));
    }
    Ok(Majorant {
        grid: ScalarGrid::new(spec.clone(), values.into_iter().map(|v| v.0).collect())?,
        max_ratio,
        max_halvings,
        cubes_used: used.len(),
    })
}

/// Measured quantities of one run.
#[derive(Debug, Clone, Serialize)]
pub struct C1Report {
    pub schema_version: u32,
    /// `K = max |G|` over the carrier.
    pub max_gradient: f64,
    pub eps: f64,
    pub grid_step: f64,
    pub cubes: usize,
    pub truncated_cubes: usize,
    /// Measured `sup |∇f̃| / K` over the nodes.
    pub whitney_constant: f64,
    pub lipschitz_f: f64,
    /// `6 · whitney_constant · K`.
    pub lipschitz_bound: f64,
    pub lipschitz_ok: bool,
    pub lipschitz_h: f64,
    pub lipschitz_majorant: f64,
    pub majorant_lipschitz_ok: bool,
    pub smoothing_ratio: f64,
    pub max_halvings: u32,
    /// Smallest `g − m` over the nodes.
    pub majorant_margin: f64,
    /// Smallest boundary value of `g` minus the largest carrier value.
    pub boundary_margin: f64,
    pub carrier_value_error: f64,
    pub carrier_gradient_error: f64,
    pub sandwich_violations: usize,
    pub collar_nodes: usize,
    pub envelope_method: EnvelopeMethod,
    pub warnings: Vec<String>,
}

/// Output of [`extend_c1`] with every intermediate grid.
#[derive(Clone)]
pub struct C1Extension<T> {
    pub field: ExtensionField<T>,
    pub ftilde: ScalarGrid<T>,
    pub m_grid: ScalarGrid<T>,
    pub phi: ScalarGrid<T>,
    pub h: ScalarGrid<T>,
    pub majorant: ScalarGrid<T>,
    pub g: ScalarGrid<T>,
    pub envelope: EnvelopeResult<T>,
    pub report: C1Report,
}

fn max_fd_norm<T: Real>(grid: &ScalarGrid<T>) -> f64 {
    grid.fd_gradients()
        .iter()
        .map(|g| norm(g).as_f64())
        .fold(0.0, f64::max)
}

/// Builds a convex C¹ extension of `jet` sampled on `spec`. Refuses with
/// [`Error::ConditionFailed`] when the supporting-hyperplane condition or the
/// tangency condition fails.
pub fn extend_c1<T: Real>(
    jet: &Jet1<T>,
    spec: &GridSpec<T>,
    opts: &C1Options<T>,
) -> Result<C1Extension<T>> {
    jet.ensure_valid()?;
    if spec.dim() != jet.dim {
        return Err(Error::invalid("grid and jet dimensions disagree"));
    }
    check_c(jet).into_result()?;
    check_cw1_default(jet).into_result()?;
    let eps = opts.eps.unwrap_or_else(|| default_eps(jet));
    let set = ClosedSetApprox::points(jet.points.clone())?;
    let decomp = decompose(&set, &spec.lo, &spec.hi, opts.max_generation)?;
    let (phi, h) = smoothing_data(jet, &decomp, eps, spec)?;
    let s = Smoothing::new(jet, &decomp, eps)?;
    let nodes = spec.nodes();
    let ft: Vec<(T, Vec<T>, bool)> = nodes.par_iter().map(|x| s.ftilde(x)).collect();
    let collar_nodes = nodes
        .iter()
        .zip(&ft)
        .filter(|(x, f)| f.2 && jet.nearest(x).1 > T::zero())
        .count();
    let ftilde = ScalarGrid::new(spec.clone(), ft.iter().map(|f| f.0).collect())?;
    let m_grid = ScalarGrid::new(spec.clone(), spec.sample(|x| s.m.value(x)))?;
    let maj = smooth_majorant(&s, &decomp, spec, opts)?;
    let g_vals: Vec<T> = (0..spec.len())
        .map(|i| ftilde.values[i] + maj.grid.values[i])
        .collect();
    let g = ScalarGrid::new(spec.clone(), g_vals)?;
    let extras: Vec<(Vec<T>, T)> = jet
        .points
        .iter()
        .cloned()
        .zip(jet.values.iter().copied())
        .collect();
    let envelope = conv_envelope_grid(&g, &extras)?;
    let field = ExtensionField::from_envelope(envelope.clone(), "c1");

    let k = jet.max_grad_norm();
    let scale = jet.scale();
    let whitney_constant = if k > T::zero() {
        ft.iter()
            .map(|f| (norm(&f.1) / k).as_f64())
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let lipschitz_f = max_fd_norm(&envelope.grid);
    let lipschitz_bound = 6.0 * whitney_constant * k.as_f64();
    let lipschitz_h = max_fd_norm(&h);
    let lipschitz_majorant = max_fd_norm(&maj.grid);
    let majorant_margin = (0..spec.len())
        .map(|i| (g.values[i] - m_grid.values[i]).as_f64())
        .fold(f64::INFINITY, f64::min);
    let top = jet
        .values
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max)
        .as_f64();
    let boundary_margin = (0..spec.len())
        .filter(|&i| {
            let idx = spec.multi_index(i);
            idx.iter()
                .zip(&spec.res)
                .any(|(&a, &r)| a == 0 || a + 1 == r)
        })
        .map(|i| g.values[i].as_f64() - top)
        .fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * scale.as_f64();
    let sandwich_violations = (0..spec.len())
        .filter(|&i| {
            let f = envelope.grid.values[i].as_f64();
            f < m_grid.values[i].as_f64() - tol || f > g.values[i].as_f64() + tol
        })
        .count();
    let mut ve = 0.0f64;
    let mut ge = 0.0f64;
    for i in 0..jet.len() {
        let p = &jet.points[i];
        ve = ve.max(((field.value(p) - jet.values[i]).abs() / scale).as_f64());
        ge = ge.max(norm(&sub(&field.gradient(p), &jet.grads[i])).as_f64());
    }
    let mut warnings = decomp.warnings.clone();
    if collar_nodes > 0 {
        warnings.push(format!(
            "{collar_nodes} nodes inside the truncation collar use the nearest tangent plane"
        ));
    }
    if boundary_margin <= 0.0 {
        warnings.push("majorant does not exceed the carrier values on the grid boundary".into());
    }
    let report = C1Report {
        schema_version: SCHEMA_VERSION,
        max_gradient: k.as_f64(),
        eps: eps.as_f64(),
        grid_step: spec.max_step().as_f64(),
        cubes: decomp.len(),
        truncated_cubes: decomp.truncated.len(),
        whitney_constant,
        lipschitz_f,
        lipschitz_bound,
        lipschitz_ok: lipschitz_f <= lipschitz_bound * (1.0 + 1e-9) || k == T::zero(),
        lipschitz_h,
        lipschitz_majorant,
        majorant_lipschitz_ok: lipschitz_majorant <= (lipschitz_h + eps.as_f64()) * (1.0 + 1e-9),
        smoothing_ratio: maj.max_ratio,
        max_halvings: maj.max_halvings,
        majorant_margin,
        boundary_margin,
        carrier_value_error: ve,
        carrier_gradient_error: ge,
        sandwich_violations,
        collar_nodes,
        envelope_method: envelope.method,
        warnings,
    };
    Ok(C1Extension {
        field,
        ftilde,
        m_grid,
        phi,
        h,
        majorant: maj.grid,
        g,
        envelope,
        report,
    })
}
