//! Pairwise admissibility conditions for convex extension of 1-jets and the
//! constants they involve.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::field::ExtensionField;
use crate::jet::Jet1;
use crate::linalg::{dist, norm, sub};
use crate::modulus::Modulus;
use crate::sampling;
use crate::{Error, Real, Result};

/// Outcome of a pairwise condition check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct ConditionReport<T> {
    pub condition: String,
    pub holds: bool,
    /// Ordered pair `(x, y)` of carrier indices with the smallest margin.
    pub worst_pair: Option<(usize, usize)>,
    /// Signed slack at the worst pair.
    pub margin: T,
    /// Constant entering the check (M, η or a tolerance), if any.
    pub constant_used: T,
    pub tolerance: T,
    /// Pairs whose modulus-inverse argument had to be clamped near β.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flagged_pairs: Vec<(usize, usize)>,
}

impl<T: Real> ConditionReport<T> {
    pub(crate) fn from_margin(
        condition: &str,
        worst: Option<((usize, usize), T)>,
        constant_used: T,
        tolerance: T,
    ) -> Self {
        let (worst_pair, margin) = match worst {
            Some((p, m)) => (Some(p), m),
            None => (None, T::infinity()),
        };
        ConditionReport {
            condition: condition.to_string(),
            holds: margin >= -tolerance,
            worst_pair,
            margin,
            constant_used,
            tolerance,
            flagged_pairs: Vec::new(),
        }
    }

    /// Converts a failing report into the matching error.
    pub fn into_result(self) -> Result<Self> {
        if self.holds {
            Ok(self)
        } else {
            Err(Error::ConditionFailed {
                condition: self.condition.clone(),
                worst_pair: self.worst_pair,
                margin: self.margin.as_f64(),
            })
        }
    }
}

/// A seminorm value with the pair attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Seminorm<T> {
    pub value: T,
    pub worst_pair: Option<(usize, usize)>,
    /// Set for single-point carriers, where the seminorm is vacuous.
    pub degenerate: bool,
}

/// Minimum of `score(i, j)` over ordered pairs `i ≠ j`, ties resolved to the
/// lexicographically first pair.
pub(crate) fn min_over_pairs<T, F>(n: usize, score: F) -> Option<((usize, usize), T)>
where
    T: Real,
    F: Fn(usize, usize) -> Option<T> + Sync,
{
    let row = |i: usize| {
        let mut best: Option<((usize, usize), T)> = None;
        for j in 0..n {
            if i == j {
                continue;
            }
            if let Some(s) = score(i, j) {
                if best.is_none_or(|(_, b)| s < b) {
                    best = Some(((i, j), s));
                }
            }
        }
        best
    };
    // Small carriers stay on the calling thread.
    let rows: Vec<Option<((usize, usize), T)>> = if n < 64 {
        (0..n).map(row).collect()
    } else {
        (0..n).into_par_iter().map(row).collect()
    };
    rows.into_iter().flatten().fold(None, |acc, cur| match acc {
        Some((_, b)) if b <= cur.1 => acc,
        _ => Some(cur),
    })
}

fn max_over_pairs<T, F>(n: usize, score: F) -> Option<((usize, usize), T)>
where
    T: Real,
    F: Fn(usize, usize) -> Option<T> + Sync,
{
    min_over_pairs(n, |i, j| score(i, j).map(|s| -s)).map(|(p, s)| (p, -s))
}

/// `M(G, C) = max |G(x) − G(y)| / ω(|x − y|)`.
pub fn holder_seminorm<T: Real>(jet: &Jet1<T>, omega: &Modulus<T>) -> Seminorm<T> {
    if jet.len() < 2 {
        return Seminorm {
            value: T::zero(),
            worst_pair: None,
            degenerate: true,
        };
    }
    let best = max_over_pairs(jet.len(), |i, j| {
        (i < j).then(|| {
            let dg = dist(&jet.grads[i], &jet.grads[j]);
            dg / omega.eval_unchecked(dist(&jet.points[i], &jet.points[j]))
        })
    });
    Seminorm {
        value: best.map_or(T::zero(), |b| b.1),
        worst_pair: best.map(|b| b.0),
        degenerate: false,
    }
}

/// `M̃ = max |f(x) − f(y) − ⟨G(y), x − y⟩| / (|x − y| ω(|x − y|))`.
pub fn whitney_seminorm<T: Real>(jet: &Jet1<T>, omega: &Modulus<T>) -> Seminorm<T> {
    if jet.len() < 2 {
        return Seminorm {
            value: T::zero(),
            worst_pair: None,
            degenerate: true,
        };
    }
    let best = max_over_pairs(jet.len(), |i, j| {
        let d = dist(&jet.points[i], &jet.points[j]);
        Some(jet.gap(i, j).abs() / (d * omega.eval_unchecked(d)))
    });
    Seminorm {
        value: best.map_or(T::zero(), |b| b.1),
        worst_pair: best.map(|b| b.0),
        degenerate: false,
    }
}

/// Default slack tolerance `1e-12 · scale`.
pub fn slack_tolerance<T: Real>(jet: &Jet1<T>) -> T {
    T::lit(1e-12) * jet.scale()
}

/// Default `(tol_eq, tol_grad)` for the tangency-implies-equal-gradient check.
pub fn default_cw1_tolerances<T: Real>(jet: &Jet1<T>) -> (T, T) {
    (
        T::lit(1e-9) * jet.scale(),
        T::lit(1e-9) * (T::one() + jet.max_grad_norm()),
    )
}

/// Supporting-hyperplane condition: `f(x) − f(y) − ⟨G(y), x − y⟩ ≥ 0`.
pub fn check_c<T: Real>(jet: &Jet1<T>) -> ConditionReport<T> {
    let tol = slack_tolerance(jet);
    let worst = min_over_pairs(jet.len(), |i, j| Some(jet.gap(i, j)));
    ConditionReport::from_margin("C", worst, T::zero(), tol)
}

/// Tangency implies equal gradients: pairs with `|gap| ≤ tol_eq` must have
/// `|ΔG| ≤ tol_grad`. The margin is `tol_grad − |ΔG|` over tangent pairs.
pub fn check_cw1<T: Real>(jet: &Jet1<T>, tol_eq: T, tol_grad: T) -> ConditionReport<T> {
    let worst = min_over_pairs(jet.len(), |i, j| {
        (jet.gap(i, j).abs() <= tol_eq).then(|| tol_grad - dist(&jet.grads[i], &jet.grads[j]))
    });
    let mut report = ConditionReport::from_margin("CW1", worst, tol_eq, T::zero());
    report.holds = report.margin >= T::zero();
    report
}

/// [`check_cw1`] with the default tolerances.
pub fn check_cw1_default<T: Real>(jet: &Jet1<T>) -> ConditionReport<T> {
    let (a, b) = default_cw1_tolerances(jet);
    check_cw1(jet, a, b)
}

/// Right-hand side `|ΔG| ω⁻¹(|ΔG| / 2M)` of the quantitative condition, with
/// the argument clamped at `0.999 β`. Returns the value and whether it was clamped.
fn quantitative_rhs<T: Real>(dg: T, m: T, omega: &Modulus<T>) -> (T, bool) {
    let arg = dg / (T::lit(2.0) * m);
    let cap = T::lit(0.999) * omega.beta();
    let (arg, clamped) = if arg >= cap {
        (cap, true)
    } else {
        (arg, false)
    };
    let inv = omega.inverse(arg).unwrap_or_else(|_| T::infinity());
    (dg * inv, clamped)
}

/// Quantitative condition with modulus ω and constant η ∈ (0, 1/2], using
/// `M = holder_seminorm`. A constant gradient passes trivially.
pub fn check_cw1omega<T: Real>(
    jet: &Jet1<T>,
    omega: &Modulus<T>,
    eta: T,
) -> Result<ConditionReport<T>> {
    if !(eta > T::zero() && eta <= T::lit(0.5)) {
        return Err(Error::invalid(format!(
            "eta must lie in (0, 1/2], got {eta}"
        )));
    }
    let m = holder_seminorm(jet, omega).value;
    check_cw1omega_with(jet, omega, eta, m)
}

/// [`check_cw1omega`] with a caller-supplied `M ≥ M(G, C)`.
pub fn check_cw1omega_with<T: Real>(
    jet: &Jet1<T>,
    omega: &Modulus<T>,
    eta: T,
    m: T,
) -> Result<ConditionReport<T>> {
    let tol = slack_tolerance(jet);
    let name = if omega.is_linear() {
        "CW11"
    } else {
        "CW1omega"
    };
    if m <= T::zero() {
        let mut r = ConditionReport::from_margin(name, None, eta, tol);
        r.margin = T::zero();
        r.holds = true;
        return Ok(r);
    }
    let worst = min_over_pairs(jet.len(), |i, j| {
        let dg = dist(&jet.grads[i], &jet.grads[j]);
        let (rhs, _) = quantitative_rhs(dg, m, omega);
        Some(jet.gap(i, j) - eta * rhs)
    });
    let mut report = ConditionReport::from_margin(name, worst, eta, tol);
    for i in 0..jet.len() {
        for j in 0..jet.len() {
            if i != j {
                let dg = dist(&jet.grads[i], &jet.grads[j]);
                if quantitative_rhs(dg, m, omega).1 {
                    report.flagged_pairs.push((i, j));
                }
            }
        }
    }
    Ok(report)
}

/// Largest feasible η, or the reason none exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real", tag = "status", rename_all = "snake_case")]
pub enum BestEta<T> {
    Feasible {
        eta: T,
        worst_pair: Option<(usize, usize)>,
    },
    NotFeasible {
        worst_pair: (usize, usize),
        gap: T,
    },
}

/// `min_pairs gap / (|ΔG| ω⁻¹(|ΔG|/2M))` clamped to 1/2.
pub fn best_eta<T: Real>(jet: &Jet1<T>, omega: &Modulus<T>) -> BestEta<T> {
    let tol = slack_tolerance(jet);
    if let Some((pair, gap)) = min_over_pairs(jet.len(), |i, j| Some(jet.gap(i, j))) {
        if gap < -tol {
            return BestEta::NotFeasible {
                worst_pair: pair,
                gap,
            };
        }
    }
    let m = holder_seminorm(jet, omega).value;
    if m <= T::zero() {
        return BestEta::Feasible {
            eta: T::lit(0.5),
            worst_pair: None,
        };
    }
    let worst = min_over_pairs(jet.len(), |i, j| {
        let dg = dist(&jet.grads[i], &jet.grads[j]);
        if dg <= T::zero() {
            return None;
        }
        let (rhs, _) = quantitative_rhs(dg, m, omega);
        Some(jet.gap(i, j).max(T::zero()) / rhs)
    });
    match worst {
        Some((pair, ratio)) if ratio < T::lit(0.5) => BestEta::Feasible {
            eta: ratio,
            worst_pair: Some(pair),
        },
        _ => BestEta::Feasible {
            eta: T::lit(0.5),
            worst_pair: None,
        },
    }
}

/// Smallest constant in the η-free quantitative condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct MStar<T> {
    /// `+∞` when no constant works, `0` for an affine jet.
    pub value: T,
    pub affine: bool,
}

fn m_star_feasible<T: Real>(jet: &Jet1<T>, omega: &Modulus<T>, m: T, tol: T) -> bool {
    let n = jet.len();
    (0..n).into_par_iter().all(|i| {
        (0..n).all(|j| {
            if i == j {
                return true;
            }
            let d = dist(&jet.points[i], &jet.points[j]);
            let dg = dist(&jet.grads[i], &jet.grads[j]);
            if dg > m * omega.eval_unchecked(d) * (T::one() + T::lit(1e-12)) {
                return false;
            }
            let arg = dg / (T::lit(2.0) * m);
            match omega.inverse(arg) {
                Ok(inv) => jet.gap(i, j) >= dg * inv - tol,
                Err(_) => false,
            }
        })
    })
}

/// `M*`: the smallest `M` with `|ΔG| ≤ M ω(|Δx|)` and
/// `gap ≥ |ΔG| ω⁻¹(|ΔG| / 2M)` on all pairs, found by bisection.
pub fn m_star<T: Real>(jet: &Jet1<T>, omega: &Modulus<T>) -> MStar<T> {
    let lower = holder_seminorm(jet, omega).value;
    if lower <= T::zero() {
        return MStar {
            value: T::zero(),
            affine: true,
        };
    }
    let tol = slack_tolerance(jet);
    let infeasible = MStar {
        value: T::infinity(),
        affine: false,
    };
    if min_over_pairs(jet.len(), |i, j| Some(jet.gap(i, j))).is_some_and(|(_, g)| g < -tol) {
        return infeasible;
    }
    if m_star_feasible(jet, omega, lower, tol) {
        return MStar {
            value: lower,
            affine: false,
        };
    }
    let cap = T::lit(1e12);
    let mut lo = lower;
    let mut hi = lower * T::lit(2.0);
    while !m_star_feasible(jet, omega, hi, tol) {
        if hi > cap {
            return infeasible;
        }
        lo = hi;
        hi = hi * T::lit(2.0);
    }
    while hi - lo > T::lit(1e-9) * hi {
        let mid = T::lit(0.5) * (lo + hi);
        if m_star_feasible(jet, omega, mid, tol) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    MStar {
        value: hi,
        affine: false,
    }
}

/// Worst slack of the necessary condition (η = 1/2) on sampled point pairs
/// of a field.
#[derive(Debug, Clone, Serialize)]
pub struct NecessityReport {
    pub min_slack: f64,
    pub modulus_used: f64,
    pub pairs: usize,
    pub worst: Option<(Vec<f64>, Vec<f64>)>,
}

/// Samples `pair_count` pairs in the field box and returns the minimum of
/// `F(x) − F(y) − ⟨∇F(y), x−y⟩ − ½|Δ∇F| ω⁻¹(|Δ∇F| / 2M)` with the given `M`.
pub fn verify_necessity_with<T: Real>(
    field: &ExtensionField<T>,
    omega: &Modulus<T>,
    m: T,
    pair_count: usize,
    seed: u64,
) -> NecessityReport {
    verify_necessity_separated(field, omega, m, pair_count, T::zero(), seed)
}

/// [`verify_necessity_with`] restricted to pairs at least `min_sep` apart.
pub fn verify_necessity_separated<T: Real>(
    field: &ExtensionField<T>,
    omega: &Modulus<T>,
    m: T,
    pair_count: usize,
    min_sep: T,
    seed: u64,
) -> NecessityReport {
    let mut rng = sampling::rng(seed);
    let mut pairs = Vec::with_capacity(pair_count);
    let mut attempts = 0;
    while pairs.len() < pair_count && attempts < 20 * pair_count.max(1) {
        attempts += 1;
        let (x, y) = sampling::pairs_in_box(&mut rng, &field.lo, &field.hi, 1).remove(0);
        if dist(&x, &y) >= min_sep {
            pairs.push((x, y));
        }
    }
    let slacks: Vec<f64> = pairs
        .par_iter()
        .map(|(x, y)| {
            let (fx, gx) = (field.value(x), field.gradient(x));
            let (fy, gy) = (field.value(y), field.gradient(y));
            let lhs = fx - fy - crate::linalg::dot(&gy, &sub(x, y));
            let dg = norm(&sub(&gx, &gy));
            let rhs = if m > T::zero() && dg > T::zero() {
                quantitative_rhs(dg, m, omega).0
            } else {
                T::zero()
            };
            (lhs - T::lit(0.5) * rhs).as_f64()
        })
        .collect();
    let (idx, min_slack) =
        slacks
            .iter()
            .enumerate()
            .fold((None, f64::INFINITY), |(bi, bv), (i, &v)| {
                if v < bv {
                    (Some(i), v)
                } else {
                    (bi, bv)
                }
            });
    NecessityReport {
        min_slack,
        modulus_used: m.as_f64(),
        pairs: pairs.len(),
        worst: idx.map(|i| {
            (
                pairs[i].0.iter().map(|v| v.as_f64()).collect(),
                pairs[i].1.iter().map(|v| v.as_f64()).collect(),
            )
        }),
    }
}

/// [`verify_necessity_with`] using the gradient modulus measured on the same
/// sampled pairs (plus a fresh draw of the same size).
pub fn verify_necessity<T: Real>(
    field: &ExtensionField<T>,
    omega: &Modulus<T>,
    pair_count: usize,
    seed: u64,
) -> NecessityReport {
    let m = measure_field_modulus(field, omega, pair_count, T::zero(), seed);
    verify_necessity_with(field, omega, m, pair_count, seed)
}

/// `max |∇F(x) − ∇F(y)| / ω(|x − y|)` over random pairs at separation at
/// least `min_sep`.
pub fn measure_field_modulus<T: Real>(
    field: &ExtensionField<T>,
    omega: &Modulus<T>,
    pair_count: usize,
    min_sep: T,
    seed: u64,
) -> T {
    let mut rng = sampling::rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut pairs = Vec::with_capacity(pair_count);
    let mut attempts = 0;
    while pairs.len() < pair_count && attempts < 20 * pair_count {
        attempts += 1;
        let x = sampling::uniform_in_box(&mut rng, &field.lo, &field.hi);
        let y = if rng.gen_bool(0.5) {
            sampling::uniform_in_box(&mut rng, &field.lo, &field.hi)
        } else {
            let r: f64 = rng.gen_range(0.0..0.25);
            let u: Vec<T> = sampling::unit_vector(&mut rng, x.len());
            let span = field
                .lo
                .iter()
                .zip(&field.hi)
                .fold(T::zero(), |a, (&l, &h)| a.max(h - l));
            x.iter()
                .zip(&u)
                .enumerate()
                .map(|(k, (&xi, &ui))| {
                    (xi + ui * span * T::lit(r))
                        .max(field.lo[k])
                        .min(field.hi[k])
                })
                .collect()
        };
        let d = dist(&x, &y);
        if d > T::zero() && d >= min_sep {
            pairs.push((x, y));
        }
    }
    pairs
        .par_iter()
        .map(|(x, y)| {
            let dg = norm(&sub(&field.gradient(x), &field.gradient(y)));
            dg / omega.eval_unchecked(dist(x, y))
        })
        .reduce(T::zero, T::max)
}
