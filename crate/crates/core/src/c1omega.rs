//! Convex C^{1,ω} extension: factorize the tangent-plane maximum, re-extend
//! its coercive part from the projected carrier, lift it with a corrector
//! above the maximum and take the convex envelope.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::conditions::{
    check_cw1omega, check_cw1omega_with, holder_seminorm, measure_field_modulus,
    verify_necessity_separated,
};
use crate::envelope::{conv_envelope_grid, EnvelopeMethod, EnvelopeResult};
use crate::field::ExtensionField;
use crate::grid::{GridSpec, ScalarGrid};
use crate::jet::Jet1;
use crate::linalg::{dist, dot, norm, sub};
use crate::minimal::{build_m, factorize, Factorization, PiecewiseAffineMax};
use crate::modulus::Modulus;
use crate::sampling;
use crate::whitney::{
    build_corrector, decompose, ClosedSetApprox, WhitneyJetExtension, DEFAULT_MAX_GENERATION,
};
use crate::{Error, Real, Result, SCHEMA_VERSION};

/// Tuning knobs of [`extend_c1omega`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaOptions {
    pub max_generation: u32,
    /// Pairs drawn by each sampled modulus measurement.
    pub pair_count: usize,
    /// Factor applied to sampled budget suprema.
    pub budget_safety: f64,
    pub seed: u64,
}

impl Default for OmegaOptions {
    fn default() -> Self {
        OmegaOptions {
            max_generation: DEFAULT_MAX_GENERATION,
            pair_count: 10_000,
            budget_safety: 1.25,
            seed: sampling::DEFAULT_SEED,
        }
    }
}

/// Measured quantities of one run.
#[derive(Debug, Clone, Serialize)]
pub struct OmegaReport {
    pub schema_version: u32,
    pub condition: String,
    pub eta: f64,
    /// Gradient modulus constant `M` of the jet.
    pub modulus_constant: f64,
    pub rank: usize,
    pub linear_part: Vec<f64>,
    pub cubes: usize,
    pub truncated_cubes: usize,
    pub overlap_n: usize,
    pub partition_a: f64,
    /// Sampled `M(∇c̃) / M` for the re-extended reduced function.
    pub reextension_gamma: f64,
    /// Largest sampled `|c − c̃| / ((4 + γ) M ω(d) d)`; certified when ≤ 1.
    pub budget_ratio: f64,
    pub lambda: f64,
    pub lambda_over_m: f64,
    /// Smallest `ψ − c` over the reduced nodes.
    pub lift_min_margin: f64,
    /// Reduced nodes where `c ≤ F̃ ≤ ψ` fails beyond tolerance.
    pub sandwich_violations: usize,
    /// Full-grid nodes where `m ≤ F` fails beyond tolerance.
    pub lower_violations: usize,
    pub carrier_value_error: f64,
    pub carrier_gradient_error: f64,
    pub grid_step: f64,
    /// Sampled `M(∇F)` on pairs at least four steps apart.
    pub gradient_modulus: f64,
    pub modulus_ratio: f64,
    pub max_gradient_norm: f64,
    pub reduced_condition_holds: bool,
    pub closure_min_slack: f64,
    pub necessity_min_slack: f64,
    /// Reduced nodes inside the truncation collar, lifted by `c` itself.
    pub collar_nodes: usize,
    pub envelope_method: Option<EnvelopeMethod>,
    pub warnings: Vec<String>,
}

/// Output of [`extend_c1omega`].
#[derive(Clone)]
pub struct OmegaExtension<T> {
    pub field: ExtensionField<T>,
    pub factorization: Factorization<T>,
    pub reduced_jet: Jet1<T>,
    /// Reduced-space grid; absent when the data are affine.
    pub reduced_spec: Option<GridSpec<T>>,
    pub c_grid: Option<ScalarGrid<T>>,
    pub psi: Option<ScalarGrid<T>>,
    pub envelope: Option<EnvelopeResult<T>>,
    pub report: OmegaReport,
}

/// Reduced grid: the box of the projected corners of `spec`, with the
/// finest resolution of `spec` on every axis. With full rank the grid is
/// `spec` itself.
fn reduced_spec<T: Real>(spec: &GridSpec<T>, fac: &Factorization<T>) -> Result<GridSpec<T>> {
    let n = spec.dim();
    if fac.k == n {
        return Ok(spec.clone());
    }
    let mut lo = vec![T::infinity(); fac.k];
    let mut hi = vec![T::neg_infinity(); fac.k];
    for corner in 0..(1usize << n) {
        let x: Vec<T> = (0..n)
            .map(|a| {
                if (corner >> a) & 1 == 1 {
                    spec.hi[a]
                } else {
                    spec.lo[a]
                }
            })
            .collect();
        let p = fac.project(&x);
        for a in 0..fac.k {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let res = *spec.res.iter().max().unwrap_or(&2);
    GridSpec::new(lo, hi, vec![res; fac.k])
}

/// Sampled `sup |∇u(x) − ∇u(y)| / ω(|x − y|)` for a gradient oracle on a box,
/// mixing log-uniform separations with pairs ending at `anchors`.
pub fn sample_gradient_modulus<T: Real, F>(
    grad: F,
    lo: &[T],
    hi: &[T],
    omega: &Modulus<T>,
    anchors: &[Vec<T>],
    count: usize,
    seed: u64,
) -> f64
where
    F: Fn(&[T]) -> Option<Vec<T>> + Sync,
{
    let n = lo.len();
    let extent = lo
        .iter()
        .zip(hi)
        .fold(T::zero(), |m, (&a, &b)| m.max(b - a))
        .as_f64();
    let mut rng = sampling::rng(seed);
    let pairs: Vec<(Vec<T>, Vec<T>)> = (0..count)
        .map(|s| {
            let x: Vec<T> = sampling::uniform_in_box(&mut rng, lo, hi);
            let y: Vec<T> = if s % 4 == 3 && !anchors.is_empty() {
                anchors[rng.gen_range(0..anchors.len())].clone()
            } else {
                let u: Vec<T> = sampling::unit_vector(&mut rng, n);
                let e: f64 = rng.gen_range(0.0..4.0);
                let r = T::lit(extent * 10f64.powf(-e));
                (0..n)
                    .map(|a| (x[a] + r * u[a]).max(lo[a]).min(hi[a]))
                    .collect()
            };
            (x, y)
        })
        .collect();
    pairs
        .par_iter()
        .map(|(x, y)| {
            let sep = dist(x, y);
            if sep <= T::zero() {
                return 0.0;
            }
            match (grad(x), grad(y)) {
                (Some(gx), Some(gy)) => (norm(&sub(&gx, &gy)) / omega.eval_unchecked(sep)).as_f64(),
                _ => 0.0,
            }
        })
        .reduce(|| 0.0, f64::max)
}

/// [`measure_field_modulus`] with pairs at least four grid steps apart.
pub fn measure_gradient_modulus<T: Real>(
    field: &ExtensionField<T>,
    omega: &Modulus<T>,
    pair_count: usize,
    seed: u64,
) -> T {
    let h = field.fd_step.iter().copied().fold(T::zero(), T::max);
    measure_field_modulus(field, omega, pair_count, T::lit(4.0) * h, seed)
}

/// Worst slack of `0 ≤ c(x) − c(y) − ⟨∇c(y), x − y⟩ ≤ 2M|x − y|ω(|x − y|)`
/// over carrier pairs and of the same with `4M` over (point, carrier) pairs.
pub fn check_closure_inequalities<T: Real>(
    reduced_jet: &Jet1<T>,
    c: &PiecewiseAffineMax<T>,
    points: &[Vec<T>],
    omega: &Modulus<T>,
    m: T,
) -> f64 {
    let pair_slack = |x: &[T], cx: T, y: usize, factor: f64| -> f64 {
        let d = dist(x, &reduced_jet.points[y]);
        if d <= T::zero() {
            return f64::INFINITY;
        }
        let gap = cx
            - reduced_jet.values[y]
            - dot(&reduced_jet.grads[y], &sub(x, &reduced_jet.points[y]));
        let upper = T::lit(factor) * m * d * omega.eval_unchecked(d) - gap;
        gap.min(upper).as_f64()
    };
    let carrier = (0..reduced_jet.len())
        .flat_map(|i| (0..reduced_jet.len()).map(move |j| (i, j)))
        .map(|(i, j)| pair_slack(&reduced_jet.points[i], reduced_jet.values[i], j, 2.0))
        .fold(f64::INFINITY, f64::min);
    let off = points
        .par_iter()
        .map(|x| {
            let cx = if x.is_empty() {
                c.intercepts.iter().copied().fold(T::neg_infinity(), T::max)
            } else {
                c.value(x)
            };
            (0..reduced_jet.len())
                .map(|j| pair_slack(x, cx, j, 4.0))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    carrier.min(off)
}

fn stencil<T: Real>(center: &[T], half: T, lo: &[T], hi: &[T]) -> Vec<Vec<T>> {
    let k = center.len();
    let total = 3usize.pow(k as u32);
    (0..total)
        .map(|mut code| {
            (0..k)
                .map(|a| {
                    let off = T::lit(code as f64 % 3.0 - 1.0);
                    code /= 3;
                    (center[a] + off * half).max(lo[a]).min(hi[a])
                })
                .collect()
        })
        .collect()
}

fn carrier_errors<T: Real>(field: &ExtensionField<T>, jet: &Jet1<T>) -> (f64, f64) {
    let scale = jet.scale();
    let mut ve = 0.0f64;
    let mut ge = 0.0f64;
    for i in 0..jet.len() {
        let p = &jet.points[i];
        ve = ve.max(((field.value(p) - jet.values[i]).abs() / scale).as_f64());
        ge = ge.max(norm(&sub(&field.gradient(p), &jet.grads[i])).as_f64());
    }
    (ve, ge)
}

/// Builds a convex `C^{1,ω}` extension of `jet` sampled on `spec`.
///
/// Refuses with [`Error::ConditionFailed`] when the quantitative condition
/// fails for `(ω, η)`, and with [`Error::Certification`] when a sampled budget
/// exceeds its analytic ceiling.
pub fn extend_c1omega<T: Real>(
    jet: &Jet1<T>,
    omega: &Modulus<T>,
    eta: T,
    spec: &GridSpec<T>,
    opts: &OmegaOptions,
) -> Result<OmegaExtension<T>> {
    jet.ensure_valid()?;
    if spec.dim() != jet.dim {
        return Err(Error::invalid("grid and jet dimensions disagree"));
    }
    let tol_box = T::lit(1e-12) * (T::one() + spec.max_step());
    if jet.points.iter().any(|p| !spec.contains(p, tol_box)) {
        return Err(Error::invalid("grid box must contain every carrier point"));
    }
    let gate = check_cw1omega(jet, omega, eta)?.into_result()?;
    let m_const = holder_seminorm(jet, omega).value;
    let m = build_m(jet);
    let fac = factorize(&m);
    let (reduced_jet, _) = fac.reduced_jet(jet);
    let h = spec.max_step();
    let mut warnings: Vec<String> = gate
        .flagged_pairs
        .iter()
        .take(8)
        .map(|p| format!("pair {p:?} clamped near the modulus bound"))
        .collect();
    let mut report = OmegaReport {
        schema_version: SCHEMA_VERSION,
        condition: gate.condition.clone(),
        eta: eta.as_f64(),
        modulus_constant: m_const.as_f64(),
        rank: fac.k,
        linear_part: fac.linear.iter().map(|v| v.as_f64()).collect(),
        cubes: 0,
        truncated_cubes: 0,
        overlap_n: 0,
        partition_a: 0.0,
        reextension_gamma: 0.0,
        budget_ratio: 0.0,
        lambda: 0.0,
        lambda_over_m: 0.0,
        lift_min_margin: 0.0,
        sandwich_violations: 0,
        lower_violations: 0,
        carrier_value_error: 0.0,
        carrier_gradient_error: 0.0,
        grid_step: h.as_f64(),
        gradient_modulus: 0.0,
        modulus_ratio: 0.0,
        max_gradient_norm: 0.0,
        reduced_condition_holds: true,
        closure_min_slack: f64::INFINITY,
        necessity_min_slack: f64::INFINITY,
        collar_nodes: 0,
        envelope_method: None,
        warnings: Vec::new(),
    };

    if fac.k == 0 || m_const <= T::zero() {
        // All gradients agree: the tangent-plane maximum is the extension.
        let offset = m.value(&vec![T::zero(); jet.dim]);
        let field =
            ExtensionField::affine(jet.grads[0].clone(), offset, spec.clone(), "c1omega:affine")?;
        let (ve, ge) = carrier_errors(&field, jet);
        report.carrier_value_error = ve;
        report.carrier_gradient_error = ge;
        report.max_gradient_norm = norm(&jet.grads[0]).as_f64();
        report.warnings = warnings;
        return Ok(OmegaExtension {
            field,
            factorization: fac,
            reduced_jet,
            reduced_spec: None,
            c_grid: None,
            psi: None,
            envelope: None,
            report,
        });
    }

    report.reduced_condition_holds = check_cw1omega_with(&reduced_jet, omega, eta, m_const)?.holds;
    let rspec = reduced_spec(spec, &fac)?;
    let nodes = rspec.nodes();
    let c_vals: Vec<T> = nodes.par_iter().map(|z| fac.reduced.value(z)).collect();
    report.closure_min_slack =
        check_closure_inequalities(&reduced_jet, &fac.reduced, &nodes, omega, m_const);

    let set = ClosedSetApprox::points(reduced_jet.points.clone())?;
    let decomp = decompose(&set, &rspec.lo, &rspec.hi, opts.max_generation)?;
    report.cubes = decomp.len();
    report.truncated_cubes = decomp.truncated.len();
    report.overlap_n = decomp.overlap_n;
    report.partition_a = decomp.a_const.as_f64();

    let wext = WhitneyJetExtension::new(&reduced_jet, &decomp)?;
    let ctilde: Vec<Option<(T, Vec<T>)>> = nodes.par_iter().map(|z| wext.eval(z).ok()).collect();
    let gamma = sample_gradient_modulus(
        |z: &[T]| wext.eval(z).ok().map(|r| r.1),
        &rspec.lo,
        &rspec.hi,
        omega,
        &reduced_jet.points,
        opts.pair_count,
        opts.seed,
    ) / m_const.as_f64();
    report.reextension_gamma = gamma;
    let ceiling_factor = (4.0 + 1.1 * gamma) * m_const.as_f64();

    // Sampled suprema of |c − c̃| on every dilated cube.
    let sampled: Vec<(f64, f64)> = decomp
        .cubes
        .par_iter()
        .map(|cube| {
            let half = cube.side * (T::one() + decomp.eps0) / T::lit(2.0);
            let mut sup = 0.0f64;
            let mut ratio = 0.0f64;
            for x in stencil(&cube.center, half, &rspec.lo, &rspec.hi) {
                let Ok((ct, _)) = wext.eval(&x) else { continue };
                let e = (fac.reduced.value(&x) - ct).abs().as_f64();
                sup = sup.max(e);
                let d = set.dist(&x);
                let ceiling = ceiling_factor * (omega.eval_unchecked(d) * d).as_f64();
                if ceiling > 0.0 {
                    ratio = ratio.max(e / ceiling);
                } else if e > 0.0 {
                    ratio = f64::INFINITY;
                }
            }
            (sup, ratio)
        })
        .collect();
    let mut sup: Vec<f64> = sampled.iter().map(|s| s.0).collect();
    let (worst_cube, budget_ratio) = sampled.iter().enumerate().fold(
        (0, 0.0f64),
        |(bi, bv), (i, s)| if s.1 > bv { (i, s.1) } else { (bi, bv) },
    );
    report.budget_ratio = budget_ratio;
    if budget_ratio > 1.0 {
        return Err(Error::certification(
            "budgets",
            format!("cube {worst_cube} exceeds its ceiling by ratio {budget_ratio:.3}"),
        ));
    }
    // Every node inside a dilated cube contributes to its budget, so ψ ≥ c at nodes.
    let node_cubes: Vec<(f64, Vec<usize>)> = nodes
        .par_iter()
        .zip(&c_vals)
        .zip(&ctilde)
        .map(|((z, &c), ct)| match ct {
            Some((v, _)) => ((c - *v).abs().as_f64(), decomp.dilated_cubes_at(z)),
            None => (0.0, Vec::new()),
        })
        .collect();
    for (e, cubes) in &node_cubes {
        for &j in cubes {
            sup[j] = sup[j].max(*e);
        }
    }
    let budgets: Vec<T> = sup
        .iter()
        .map(|&s| T::lit(s * opts.budget_safety))
        .collect();
    drop(wext);
    let corrector = build_corrector(decomp, budgets, omega)?;
    report.lambda = corrector.lambda.as_f64();
    report.lambda_over_m = (corrector.lambda / m_const).as_f64();

    let lifted: Vec<(T, bool)> = nodes
        .par_iter()
        .zip(&c_vals)
        .zip(&ctilde)
        .map(|((z, &c), ct)| match ct {
            Some((v, _)) => match corrector.eval(z) {
                Ok((p, _)) => (*v + p, false),
                Err(_) => (c, true),
            },
            None => (c, true),
        })
        .collect();
    let psi_vals: Vec<T> = lifted.iter().map(|l| l.0).collect();
    report.collar_nodes = lifted.iter().filter(|l| l.1).count();
    if report.collar_nodes > 0 {
        warnings.push(format!(
            "{} reduced nodes inside the truncation collar",
            report.collar_nodes
        ));
    }
    let lift_margin = psi_vals
        .iter()
        .zip(&c_vals)
        .map(|(&p, &c)| (p - c).as_f64())
        .fold(f64::INFINITY, f64::min);
    report.lift_min_margin = lift_margin;
    let scale = jet.scale().as_f64();
    if lift_margin < -1e-9 * scale {
        return Err(Error::certification(
            "lift",
            format!("ψ falls below c by {:e}", -lift_margin),
        ));
    }
    let psi = ScalarGrid::new(rspec.clone(), psi_vals)?;
    let extras: Vec<(Vec<T>, T)> = reduced_jet
        .points
        .iter()
        .zip(&reduced_jet.values)
        .map(|(p, &v)| (p.clone(), v))
        .collect();
    let env = conv_envelope_grid(&psi, &extras)?;
    report.envelope_method = Some(env.method);
    let tol = 1e-9 * scale;
    report.sandwich_violations = (0..rspec.len())
        .filter(|&i| {
            let e = env.grid.values[i].as_f64();
            e < c_vals[i].as_f64() - tol || e > psi.values[i].as_f64() + tol
        })
        .count();
    let reduced_field = ExtensionField::from_envelope(env.clone(), "c1omega:envelope");
    let field = ExtensionField::composed(
        fac.linear.clone(),
        fac.basis.clone(),
        reduced_field,
        spec.clone(),
        "c1omega",
    )?;
    report.lower_violations = (0..spec.len())
        .filter(|&i| {
            let x = spec.node(i);
            field.dump.values[i].as_f64() < m.value(&x).as_f64() - tol
        })
        .count();
    let (ve, ge) = carrier_errors(&field, jet);
    report.carrier_value_error = ve;
    report.carrier_gradient_error = ge;
    let gm = measure_gradient_modulus(&field, omega, opts.pair_count, opts.seed);
    report.gradient_modulus = gm.as_f64();
    report.modulus_ratio = (gm / m_const).as_f64();
    report.max_gradient_norm = field.max_gradient_norm().as_f64();
    report.necessity_min_slack = verify_necessity_separated(
        &field,
        omega,
        gm,
        opts.pair_count,
        T::lit(4.0) * h,
        opts.seed,
    )
    .min_slack;
    report.warnings = warnings;
    Ok(OmegaExtension {
        field,
        factorization: fac,
        reduced_jet,
        reduced_spec: Some(rspec),
        c_grid: Some(ScalarGrid::new(psi.spec.clone(), c_vals)?),
        psi: Some(psi),
        envelope: Some(env),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_pair() -> Jet1<f64> {
        Jet1::sample(vec![vec![-1.0], vec![1.0]], |x: &[f64]| {
            (x[0] * x[0] / 2.0, vec![x[0]])
        })
        .unwrap()
    }

    #[test]
    fn quadratic_jet_round_trip() {
        let jet = quadratic_pair();
        let spec = GridSpec::cube(1, -2.0, 2.0, 81).unwrap();
        let out = extend_c1omega(
            &jet,
            &Modulus::linear(),
            0.5,
            &spec,
            &OmegaOptions::default(),
        )
        .unwrap();
        let h = spec.max_step();
        let f = &out.field;
        assert!((f.value(&[1.0]) - 0.5).abs() < 1e-6);
        assert!((f.value(&[-1.0]) - 0.5).abs() < 1e-6);
        assert!((f.gradient(&[1.0])[0] - 1.0).abs() <= 5.0 * h);
        assert!((f.gradient(&[-1.0])[0] + 1.0).abs() <= 5.0 * h);
        let at0 = f.value(&[0.0]);
        let psi = out.psi.as_ref().unwrap();
        let psi0 = psi.values[psi.spec.flat_index(&psi.spec.nearest_node(&[0.0]))];
        assert!(-0.5 <= at0 + 1e-12 && at0 <= psi0 + 1e-12);
        assert_eq!(out.report.sandwich_violations, 0);
        assert!(out.report.budget_ratio <= 1.0);
        assert!(out.report.reduced_condition_holds);
    }

    #[test]
    fn affine_jet_gives_affine_field() {
        let jet = Jet1::sample(
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.5, -1.0]],
            |x: &[f64]| (3.0 * x[0] - x[1] + 2.0, vec![3.0, -1.0]),
        )
        .unwrap();
        let spec = GridSpec::cube(2, -2.0, 2.0, 9).unwrap();
        let out = extend_c1omega(
            &jet,
            &Modulus::linear(),
            0.5,
            &spec,
            &OmegaOptions::default(),
        )
        .unwrap();
        for i in 0..spec.len() {
            let x = spec.node(i);
            assert!((out.field.value(&x) - (3.0 * x[0] - x[1] + 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn failing_jet_refused() {
        let jet = Jet1::new(
            vec![vec![0.0], vec![1.0]],
            vec![0.0, 0.0],
            vec![vec![0.0], vec![1.0]],
        )
        .unwrap();
        let spec = GridSpec::cube(1, -1.0, 2.0, 31).unwrap();
        let res = extend_c1omega(
            &jet,
            &Modulus::linear(),
            0.5,
            &spec,
            &OmegaOptions::default(),
        );
        assert!(matches!(res, Err(Error::ConditionFailed { .. })));
    }

    #[test]
    fn gradient_modulus_of_parabola() {
        let spec = GridSpec::cube(1, -1.0, 1.0, 41).unwrap();
        let f = ExtensionField::analytic(|x: &[f64]| (x[0] * x[0] / 2.0, vec![x[0]]), spec, "p")
            .unwrap();
        let m = measure_gradient_modulus(&f, &Modulus::linear(), 2000, 1);
        assert!((m - 1.0).abs() <= 0.05);
    }
}
