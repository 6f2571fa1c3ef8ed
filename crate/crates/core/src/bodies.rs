//! Convex bodies through a point cloud with prescribed outer normals.
//!
//! The cloud `K` with normals `N` becomes a jet on `K ∪ {0}` (value 1 and
//! gradient `N` on `K`, value `α < 1` and gradient 0 at the origin). A convex
//! extension `F` of that jet defines the body `{F ≤ 1}`, whose boundary passes
//! through `K` with outer normals `N`.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::c1::{extend_c1, C1Options};
use crate::c1omega::{extend_c1omega, OmegaOptions};
use crate::conditions::{
    check_c, check_cw1_default, check_cw1omega_with, min_over_pairs, ConditionReport,
};
use crate::contour::{extract, Contour};
use crate::field::ExtensionField;
use crate::grid::{GridSpec, ScalarGrid};
use crate::jet::Jet1;
use crate::linalg::{dist, dot, norm, scale, sub};
use crate::modulus::Modulus;
use crate::{sampling, Error, Real, Result, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyClass {
    C1,
    C11,
}

/// Points `K`, unit outer normals `N`, the regularity class and, for `C11`,
/// the Lipschitz constant of `N` (measured when absent) and `η ∈ (0, 1/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct NormalData<T> {
    pub points: Vec<Vec<T>>,
    pub normals: Vec<Vec<T>>,
    pub class: BodyClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<T>,
    #[serde(default = "default_eta")]
    pub eta: T,
}

fn default_eta<T: Real>() -> T {
    T::lit(0.5)
}

impl<T: Real> NormalData<T> {
    pub fn new(points: Vec<Vec<T>>, normals: Vec<Vec<T>>, class: BodyClass) -> Result<Self> {
        let data = NormalData {
            points,
            normals,
            class,
            m: None,
            eta: default_eta(),
        };
        data.ensure_valid()?;
        Ok(data)
    }

    /// `N(y) = y / |y|` at points of the unit sphere.
    pub fn sphere(points: Vec<Vec<T>>, class: BodyClass) -> Result<Self> {
        let normals = points
            .iter()
            .map(|p| scale(p, T::one() / norm(p)))
            .collect();
        Self::new(points, normals, class)
    }

    /// `count` equally spaced points of the unit circle with `N(y) = y`.
    pub fn circle(count: usize, class: BodyClass) -> Result<Self> {
        let pts = (0..count)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                vec![T::lit(t.cos()), T::lit(t.sin())]
            })
            .collect();
        Self::sphere(pts, class)
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let n = self.dim();
        if self.points.is_empty() {
            return Err(Error::invalid("empty point cloud"));
        }
        if !(2..=3).contains(&n) {
            return Err(Error::invalid(format!(
                "bodies live in 2 or 3 dimensions, got {n}"
            )));
        }
        if self.normals.len() != self.points.len() {
            return Err(Error::invalid(format!(
                "{} normals for {} points",
                self.normals.len(),
                self.points.len()
            )));
        }
        for (i, (p, v)) in self.points.iter().zip(&self.normals).enumerate() {
            if p.len() != n || v.len() != n {
                return Err(Error::invalid(format!("entry {i} has the wrong dimension")));
            }
            if p.iter().chain(v).any(|c| !c.is_finite()) {
                return Err(Error::invalid(format!("entry {i} is not finite")));
            }
            if (norm(v) - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) {
                return Err(Error::invalid(format!("normal {i} is not a unit vector")));
            }
        }
        if !(self.eta > T::zero() && self.eta <= T::lit(0.5)) {
            return Err(Error::invalid(format!(
                "eta must lie in (0, 1/2], got {}",
                self.eta
            )));
        }
        if let Some(m) = self.m {
            if !(m > T::zero() && m.is_finite()) {
                return Err(Error::invalid("normal Lipschitz constant must be positive"));
            }
        }
        Ok(())
    }

    /// Largest `|N(x) − N(y)| / |x − y|` over distinct points.
    pub fn measured_lipschitz(&self) -> T {
        let n = self.points.len();
        let mut m = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                let d = dist(&self.points[i], &self.points[j]);
                if d > T::zero() {
                    m = m.max(dist(&self.normals[i], &self.normals[j]) / d);
                }
            }
        }
        m
    }

    /// Constant used by the `C11` conditions: the supplied `M`, else the
    /// measured one, else (constant normals) `1 / min |y|`.
    pub fn lipschitz_constant(&self) -> T {
        if let Some(m) = self.m {
            return m;
        }
        let m = self.measured_lipschitz();
        if m > T::zero() {
            return m;
        }
        let r = self
            .points
            .iter()
            .map(|p| norm(p))
            .fold(T::infinity(), T::min);
        if r > T::zero() {
            T::one() / r
        } else {
            T::one()
        }
    }

    fn tolerance(&self) -> T {
        let r = self.points.iter().map(|p| norm(p)).fold(T::zero(), T::max);
        T::lit(1e-12).max(T::epsilon() * T::lit(64.0)) * (T::one() + r)
    }
}

/// Results of the outward, support and tangency conditions.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Real")]
pub struct BodyConditions<T> {
    /// `min ⟨N(y), y⟩`, which must be positive.
    pub outward: ConditionReport<T>,
    /// `⟨N(y), x − y⟩ ≤ 0` for all pairs.
    pub support: ConditionReport<T>,
    /// Tangent pairs share normals (`C1`), or
    /// `⟨N(y), y − x⟩ ≥ (η/2M)|N(y) − N(x)|²` (`C11`).
    pub tangency: ConditionReport<T>,
    pub holds: bool,
}

impl<T: Real> BodyConditions<T> {
    /// The first failing report as an error.
    pub fn into_result(self) -> Result<Self> {
        if self.holds {
            return Ok(self);
        }
        for r in [&self.outward, &self.support, &self.tangency] {
            if !r.holds {
                r.clone().into_result()?;
            }
        }
        Ok(self)
    }
}

pub fn check_body_conditions<T: Real>(data: &NormalData<T>) -> BodyConditions<T> {
    let tol = data.tolerance();
    let k = &data.points;
    let nv = &data.normals;

    let outward_worst = (0..k.len()).map(|i| ((i, i), dot(&nv[i], &k[i]))).fold(
        None,
        |acc: Option<((usize, usize), T)>, cur| match acc {
            Some((_, b)) if b <= cur.1 => acc,
            _ => Some(cur),
        },
    );
    let mut outward = ConditionReport::from_margin("O", outward_worst, T::zero(), tol);
    outward.holds = outward.margin > tol;

    // Pair (i, j) stands for x = K[i], y = K[j].
    let support_worst = min_over_pairs(k.len(), |i, j| Some(dot(&nv[j], &sub(&k[j], &k[i]))));
    let support = ConditionReport::from_margin("K", support_worst, T::zero(), tol);

    let tangency = match data.class {
        BodyClass::C1 => {
            let tol_eq = T::lit(1e3) * tol;
            let tol_n = T::lit(1e-9);
            let worst = min_over_pairs(k.len(), |i, j| {
                (dot(&nv[j], &sub(&k[i], &k[j])).abs() <= tol_eq)
                    .then(|| tol_n - dist(&nv[i], &nv[j]))
            });
            let mut r = ConditionReport::from_margin("KW1", worst, tol_eq, T::zero());
            r.holds = r.margin >= T::zero();
            r
        }
        BodyClass::C11 => {
            let m = data.lipschitz_constant();
            let c = data.eta / (T::lit(2.0) * m);
            let worst = min_over_pairs(k.len(), |i, j| {
                let dn = dist(&nv[i], &nv[j]);
                Some(dot(&nv[j], &sub(&k[j], &k[i])) - c * dn * dn)
            });
            ConditionReport::from_margin("KW11", worst, m, tol)
        }
    };
    let holds = outward.holds && support.holds && tangency.holds;
    BodyConditions {
        outward,
        support,
        tangency,
        holds,
    }
}

/// Value `α` at the origin, placed at the midpoint of its admissible interval.
pub fn body_alpha<T: Real>(data: &NormalData<T>) -> Result<T> {
    let min_o = (0..data.points.len())
        .map(|i| dot(&data.normals[i], &data.points[i]))
        .fold(T::infinity(), T::min);
    let two = T::lit(2.0);
    let (alpha, lower_gap) = match data.class {
        BodyClass::C1 => (T::one() - min_o / two, T::zero()),
        BodyClass::C11 => {
            let c = data.eta / (two * data.lipschitz_constant());
            if min_o <= c {
                return Err(Error::invalid(format!(
                    "no admissible value at the origin: min <N(y), y> = {min_o} does not exceed eta/(2M) = {c}; use a smaller eta"
                )));
            }
            (T::one() - (min_o - c) / two, c)
        }
    };
    let gap = T::one() - alpha;
    if !(gap > T::zero() && gap + lower_gap < min_o) {
        return Err(Error::invalid(format!(
            "no admissible value at the origin (min <N(y), y> = {min_o})"
        )));
    }
    Ok(alpha)
}

/// Jet on `K ∪ {0}` with the origin last.
pub fn build_body_jet<T: Real>(data: &NormalData<T>) -> Result<Jet1<T>> {
    data.ensure_valid()?;
    check_body_conditions(data).into_result()?;
    let alpha = body_alpha(data)?;
    let n = data.dim();
    let mut points = data.points.clone();
    let mut values = vec![T::one(); points.len()];
    let mut grads = data.normals.clone();
    points.push(vec![T::zero(); n]);
    values.push(alpha);
    grads.push(vec![T::zero(); n]);
    let jet = Jet1::new(points, values, grads)?;
    if data.class == BodyClass::C1 {
        for r in [check_c(&jet), check_cw1_default(&jet)] {
            if !r.holds {
                return Err(Error::certification(
                    "body jet",
                    format!(
                        "{} fails on the constructed jet (margin {})",
                        r.condition, r.margin
                    ),
                ));
            }
        }
    }
    Ok(jet)
}

/// Pipeline knobs for [`interpolate_body`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyOptions<T> {
    pub c1: C1Options<T>,
    pub omega: OmegaOptions,
    /// Random vertex pairs for the midpoint containment check.
    pub midpoint_pairs: usize,
    /// Contour vertices fed back into the body conditions.
    pub reverse_sample: usize,
}

impl<T: Real> Default for BodyOptions<T> {
    fn default() -> Self {
        BodyOptions {
            c1: C1Options::default(),
            omega: OmegaOptions::default(),
            midpoint_pairs: 20_000,
            reverse_sample: 256,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BodyDiagnostics {
    pub schema_version: u32,
    pub class: BodyClass,
    pub alpha: f64,
    pub grid_step: f64,
    /// `|F(0) − α|`.
    pub origin_error: f64,
    /// `max_K |F(y) − 1|`.
    pub level_error: f64,
    /// `min_K ⟨∇F(y)/|∇F(y)|, N(y)⟩`.
    pub min_alignment: f64,
    /// Largest distance from a point of `K` to the contour.
    pub contour_distance: f64,
    /// `max |F − 1|` over contour vertices.
    pub vertex_level_error: f64,
    /// `max F(midpoint) − 1` over sampled vertex pairs.
    pub midpoint_excess: f64,
    /// Smallest `F − 1` over the boundary nodes of the grid.
    pub boundary_margin: f64,
    pub contour_vertices: usize,
    pub contour_cells: usize,
    /// Body conditions re-run on contour vertices with normals `∇F/|∇F|`.
    pub reverse_support_margin: f64,
    pub reverse_outward_margin: f64,
    pub warnings: Vec<String>,
}

/// Body `{F ≤ 1}` and its sampled boundary.
#[derive(Clone)]
pub struct BodyResult<T> {
    pub field: ExtensionField<T>,
    pub jet: Jet1<T>,
    pub alpha: T,
    pub conditions: BodyConditions<T>,
    pub potential: ScalarGrid<T>,
    pub contour: Contour<T>,
    pub diagnostics: BodyDiagnostics,
}

impl<T: Real> BodyResult<T> {
    pub fn contains(&self, x: &[T]) -> bool {
        self.field.value(x) <= T::one()
    }
}

fn segment_dist<T: Real>(x: &[T], a: &[T], b: &[T]) -> T {
    let ab = sub(b, a);
    let len2 = dot(&ab, &ab);
    let t = if len2 > T::zero() {
        (dot(&sub(x, a), &ab) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let p: Vec<T> = a.iter().zip(&ab).map(|(&u, &v)| u + t * v).collect();
    dist(x, &p)
}

fn triangle_dist<T: Real>(x: &[T], a: &[T], b: &[T], c: &[T]) -> T {
    // Projection onto the plane, else the nearest edge.
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ax = sub(x, a);
    let (d00, d01, d11) = (dot(&ab, &ab), dot(&ab, &ac), dot(&ac, &ac));
    let (d20, d21) = (dot(&ax, &ab), dot(&ax, &ac));
    let den = d00 * d11 - d01 * d01;
    if den > T::zero() {
        let v = (d11 * d20 - d01 * d21) / den;
        let w = (d00 * d21 - d01 * d20) / den;
        if v >= T::zero() && w >= T::zero() && v + w <= T::one() {
            let p: Vec<T> = (0..x.len()).map(|k| a[k] + v * ab[k] + w * ac[k]).collect();
            return dist(x, &p);
        }
    }
    segment_dist(x, a, b)
        .min(segment_dist(x, b, c))
        .min(segment_dist(x, a, c))
}

/// Distance from `x` to the contour cells.
pub fn contour_distance<T: Real>(contour: &Contour<T>, x: &[T]) -> T {
    let v = &contour.vertices;
    contour
        .cells
        .iter()
        .map(|c| match c.len() {
            2 => segment_dist(x, &v[c[0]], &v[c[1]]),
            _ => triangle_dist(x, &v[c[0]], &v[c[1]], &v[c[2]]),
        })
        .fold(T::infinity(), T::min)
}

fn boundary_margin<T: Real>(grid: &ScalarGrid<T>) -> T {
    let spec = &grid.spec;
    (0..spec.len())
        .filter(|&i| {
            let idx = spec.multi_index(i);
            idx.iter()
                .zip(&spec.res)
                .any(|(&a, &r)| a == 0 || a + 1 == r)
        })
        .map(|i| grid.values[i] - T::one())
        .fold(T::infinity(), T::min)
}

/// Builds the body potential on `spec`, extracts `{F = 1}` and measures how
/// well the boundary reproduces `K` and `N`.
///
/// Fails with [`Error::Certification`] when the level set does not enclose
/// the origin inside the grid box.
pub fn interpolate_body<T: Real>(
    data: &NormalData<T>,
    spec: &GridSpec<T>,
    opts: &BodyOptions<T>,
) -> Result<BodyResult<T>> {
    let conditions = check_body_conditions(data).into_result()?;
    let jet = build_body_jet(data)?;
    let alpha = *jet.values.last().expect("origin appended");
    if spec.dim() != data.dim() {
        return Err(Error::invalid("grid and point cloud dimensions disagree"));
    }
    let mut warnings = Vec::new();
    let field = match data.class {
        BodyClass::C1 => {
            let ext = extend_c1(&jet, spec, &opts.c1)?;
            warnings.extend(ext.report.warnings.iter().cloned());
            ext.field
        }
        BodyClass::C11 => {
            let omega = Modulus::linear();
            let m = data
                .lipschitz_constant()
                .max(crate::conditions::holder_seminorm(&jet, &omega).value);
            let report = check_cw1omega_with(&jet, &omega, data.eta, m)?;
            if !report.holds {
                warnings.push(format!("body jet quantitative margin {}", report.margin));
            }
            let ext = extend_c1omega(&jet, &omega, data.eta, spec, &opts.omega)?;
            warnings.extend(ext.report.warnings.iter().cloned());
            ext.field
        }
    };
    let potential = ScalarGrid::from_fn(spec.clone(), |x| field.value(x))?;
    let bmargin = boundary_margin(&potential);
    let origin = vec![T::zero(); data.dim()];
    let f0 = field.value(&origin);
    if !(bmargin > T::zero()) || !(f0 < T::one()) {
        return Err(Error::certification(
            "body",
            format!("level set does not enclose the origin in the grid box (boundary margin {bmargin}, F(0) = {f0})"),
        ));
    }
    let contour = extract(&potential, T::one())?;

    let per_point: Vec<(f64, f64, f64)> = data
        .points
        .par_iter()
        .zip(&data.normals)
        .map(|(y, n)| {
            let (v, g) = (field.value(y), field.gradient(y));
            let gn = norm(&g);
            let align = if gn > T::zero() {
                dot(&g, n) / gn
            } else {
                T::zero()
            };
            (
                (v - T::one()).abs().as_f64(),
                align.as_f64(),
                contour_distance(&contour, y).as_f64(),
            )
        })
        .collect();
    let level_error = per_point.iter().map(|p| p.0).fold(0.0, f64::max);
    let min_alignment = per_point.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let cdist = per_point.iter().map(|p| p.2).fold(0.0, f64::max);

    let verts = &contour.vertices;
    let vertex_level_error = verts
        .par_iter()
        .map(|v| (field.value(v) - T::one()).abs().as_f64())
        .reduce(|| 0.0, f64::max);
    let midpoint_excess = if verts.len() < 2 {
        f64::NEG_INFINITY
    } else {
        let mut rng = sampling::rng(opts.c1.seed);
        let pairs: Vec<(usize, usize)> = (0..opts.midpoint_pairs)
            .map(|_| {
                let s = sample(&mut rng, verts.len(), 2);
                (s.index(0), s.index(1))
            })
            .collect();
        pairs
            .par_iter()
            .map(|&(a, b)| {
                let mid: Vec<T> = verts[a]
                    .iter()
                    .zip(&verts[b])
                    .map(|(&p, &q)| (p + q) / T::lit(2.0))
                    .collect();
                (field.value(&mid) - T::one()).as_f64()
            })
            .reduce(|| f64::NEG_INFINITY, f64::max)
    };

    // Reverse check on a subsample of the reconstructed boundary.
    let (mut rev_support, mut rev_outward) = (f64::INFINITY, f64::INFINITY);
    if verts.len() >= 2 {
        let mut rng = sampling::rng(opts.c1.seed ^ 0x5eed);
        let take = opts.reverse_sample.min(verts.len());
        let picks = sample(&mut rng, verts.len(), take);
        let mut pts = Vec::with_capacity(take);
        let mut nrm = Vec::with_capacity(take);
        for i in picks.iter() {
            let g = field.gradient(&verts[i]);
            let gn = norm(&g);
            if gn > T::zero() {
                pts.push(verts[i].clone());
                nrm.push(scale(&g, T::one() / gn));
            }
        }
        if !pts.is_empty() {
            let rebuilt = NormalData {
                points: pts,
                normals: nrm,
                class: BodyClass::C1,
                m: None,
                eta: data.eta,
            };
            let rc = check_body_conditions(&rebuilt);
            rev_support = rc.support.margin.as_f64();
            rev_outward = rc.outward.margin.as_f64();
        }
    }

    let diagnostics = BodyDiagnostics {
        schema_version: SCHEMA_VERSION,
        class: data.class,
        alpha: alpha.as_f64(),
        grid_step: spec.max_step().as_f64(),
        origin_error: (f0 - alpha).abs().as_f64(),
        level_error,
        min_alignment,
        contour_distance: cdist,
        vertex_level_error,
        midpoint_excess,
        boundary_margin: bmargin.as_f64(),
        contour_vertices: verts.len(),
        contour_cells: contour.cells.len(),
        reverse_support_margin: rev_support,
        reverse_outward_margin: rev_outward,
        warnings,
    };
    Ok(BodyResult {
        field,
        jet,
        alpha,
        conditions,
        potential,
        contour,
        diagnostics,
    })
}
