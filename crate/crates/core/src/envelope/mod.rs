//! Convex envelopes of sampled functions on tensor grids.
//!
//! The envelope computed here is the greatest convex function lying below
//! the data points (grid nodes plus optional scattered extra points). It is
//! piecewise affine; in one and two dimensions the pieces are kept so the
//! envelope can be evaluated exactly between nodes.

mod lp;
mod quickhull;

use rayon::prelude::*;
use serde::Serialize;

use crate::grid::{GridSpec, ScalarGrid};
use crate::linalg::dist;
use crate::modulus::Modulus;
use crate::sampling;
use crate::{Error, Real, Result};

use quickhull::ccw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeMethod {
    Hull,
    Lp,
}

#[derive(Debug, Clone)]
enum Pieces {
    /// Lower hull vertices `(x, v)` sorted by `x`.
    Chain(Vec<[f64; 2]>),
    /// Lower triangles of the lifted cloud with a bucket index.
    Triangles(TriangleIndex),
    /// No exact piece structure; evaluate by multilinear interpolation.
    Lattice,
}

#[derive(Debug, Clone)]
struct TriangleIndex {
    pts: Vec<[f64; 3]>,
    tris: Vec<[usize; 3]>,
    lo: [f64; 2],
    cell: [f64; 2],
    nb: [usize; 2],
    buckets: Vec<Vec<u32>>,
}

impl TriangleIndex {
    fn new(pts: Vec<[f64; 3]>, tris: Vec<[usize; 3]>) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &pts {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let per_axis = ((tris.len() as f64).sqrt().ceil() as usize).clamp(1, 512);
        let nb = [per_axis, per_axis];
        let cell = [
            ((hi[0] - lo[0]) / per_axis as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / per_axis as f64).max(f64::MIN_POSITIVE),
        ];
        let mut buckets = vec![Vec::new(); nb[0] * nb[1]];
        for (t, tri) in tris.iter().enumerate() {
            let mut tlo = [f64::INFINITY; 2];
            let mut thi = [f64::NEG_INFINITY; 2];
            for &v in tri {
                for k in 0..2 {
                    tlo[k] = tlo[k].min(pts[v][k]);
                    thi[k] = thi[k].max(pts[v][k]);
                }
            }
            let b0 = bucket_range(tlo[0], thi[0], lo[0], cell[0], nb[0]);
            let b1 = bucket_range(tlo[1], thi[1], lo[1], cell[1], nb[1]);
            for j in b1.0..=b1.1 {
                for i in b0.0..=b0.1 {
                    buckets[j * nb[0] + i].push(t as u32);
                }
            }
        }
        TriangleIndex {
            pts,
            tris,
            lo,
            cell,
            nb,
            buckets,
        }
    }

    /// Envelope value at `x`, using the triangle whose smallest barycentric
    /// weight is largest (robust on shared edges).
    fn eval(&self, x: [f64; 2]) -> Option<f64> {
        let i = bucket_of(x[0], self.lo[0], self.cell[0], self.nb[0]);
        let j = bucket_of(x[1], self.lo[1], self.cell[1], self.nb[1]);
        let q = [x[0], x[1], 0.0];
        let mut best: Option<(f64, f64)> = None;
        for &t in &self.buckets[j * self.nb[0] + i] {
            let [a, b, c] = self.tris[t as usize];
            let (pa, pb, pc) = (&self.pts[a], &self.pts[b], &self.pts[c]);
            let area = ccw(pa, pb, pc);
            let wa = ccw(&q, pb, pc) / area;
            let wb = ccw(pa, &q, pc) / area;
            let wc = 1.0 - wa - wb;
            let worst = wa.min(wb).min(wc);
            if worst < -1e-9 {
                continue;
            }
            if best.is_none_or(|(w, _)| worst > w) {
                best = Some((worst, wa * pa[2] + wb * pb[2] + wc * pc[2]));
            }
        }
        best.map(|(_, v)| v)
    }
}

fn bucket_of(x: f64, lo: f64, cell: f64, n: usize) -> usize {
    (((x - lo) / cell).floor().max(0.0) as usize).min(n - 1)
}

fn bucket_range(a: f64, b: f64, lo: f64, cell: f64, n: usize) -> (usize, usize) {
    let eps = 1e-9 * cell;
    (
        bucket_of(a - eps, lo, cell, n),
        bucket_of(b + eps, lo, cell, n),
    )
}

/// Result of an envelope computation on a grid.
#[derive(Debug, Clone)]
pub struct EnvelopeResult<T> {
    /// Envelope values at the grid nodes.
    pub grid: ScalarGrid<T>,
    /// Nodes where the envelope touches the input.
    pub contact: Vec<bool>,
    pub method: EnvelopeMethod,
    /// Envelope values at the extra points, in input order.
    pub extra_values: Vec<T>,
    /// Largest `input − envelope` over the nodes.
    pub max_gap: T,
    pieces: Pieces,
}

impl<T: Real> EnvelopeResult<T> {
    /// Evaluates the envelope at `x` (clamped to the grid box).
    pub fn eval(&self, x: &[T]) -> T {
        let spec = &self.grid.spec;
        let clamped: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(k, v)| v.max(spec.lo[k]).min(spec.hi[k]).as_f64())
            .collect();
        match &self.pieces {
            Pieces::Chain(hull) => T::lit(eval_chain(hull, clamped[0])),
            Pieces::Triangles(index) => match index.eval([clamped[0], clamped[1]]) {
                Some(v) => T::lit(v),
                None => self.grid.interpolate(x),
            },
            Pieces::Lattice => self.grid.interpolate(x),
        }
    }

    /// True when evaluation between nodes follows the exact affine pieces.
    pub fn has_exact_pieces(&self) -> bool {
        !matches!(self.pieces, Pieces::Lattice)
    }
}

fn eval_chain(hull: &[[f64; 2]], x: f64) -> f64 {
    if hull.len() == 1 {
        return hull[0][1];
    }
    let i = hull.partition_point(|p| p[0] <= x).clamp(1, hull.len() - 1);
    let (a, b) = (hull[i - 1], hull[i]);
    let t = (x - a[0]) / (b[0] - a[0]);
    a[1] + t * (b[1] - a[1])
}

/// Lower convex hull of `(x, v)` points via the monotone chain.
fn lower_chain(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup_by(|b, a| a[0] == b[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            let turn = robust::orient2d(
                robust::Coord { x: o[0], y: o[1] },
                robust::Coord { x: a[0], y: a[1] },
                robust::Coord { x: p[0], y: p[1] },
            );
            if turn <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Merges extra points into the node list; extras that coincide with a node
/// lower that node's value instead of being added.
fn assemble<T: Real>(
    grid: &ScalarGrid<T>,
    extras: &[(Vec<T>, T)],
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let spec = &grid.spec;
    let mut pts: Vec<Vec<f64>> = spec
        .nodes()
        .iter()
        .map(|p| p.iter().map(|v| v.as_f64()).collect())
        .collect();
    let mut vals: Vec<f64> = grid.values.iter().map(|v| v.as_f64()).collect();
    for (p, v) in extras {
        if p.len() != spec.dim() || !spec.contains(p, T::zero()) {
            return Err(Error::invalid("extra envelope point outside the grid box"));
        }
        let idx = spec.nearest_node(p);
        let flat = spec.flat_index(&idx);
        let q: Vec<f64> = p.iter().map(|c| c.as_f64()).collect();
        let span = 1.0 + pts[flat].iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if crate::linalg::dist(&pts[flat], &q) <= 1e-12 * span {
            vals[flat] = vals[flat].min(v.as_f64());
        } else {
            pts.push(q);
            vals.push(v.as_f64());
        }
    }
    Ok((pts, vals))
}

fn finish<T: Real>(
    grid: &ScalarGrid<T>,
    extras: &[(Vec<T>, T)],
    env_nodes: Vec<f64>,
    pieces: Pieces,
    method: EnvelopeMethod,
    extra_eval: impl Fn(&[f64]) -> f64,
) -> Result<EnvelopeResult<T>> {
    let scale = 1.0
        + grid
            .values
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs().as_f64()));
    let mut values = Vec::with_capacity(env_nodes.len());
    let mut contact = Vec::with_capacity(env_nodes.len());
    let mut max_gap = 0.0f64;
    for (e, input) in env_nodes.iter().zip(&grid.values) {
        let input = input.as_f64();
        if !e.is_finite() {
            return Err(Error::certification(
                "envelope",
                "non-finite envelope value",
            ));
        }
        if *e > input + 1e-9 * scale {
            return Err(Error::certification(
                "envelope",
                format!("envelope exceeds input by {:e}", e - input),
            ));
        }
        let e = e.min(input);
        max_gap = max_gap.max(input - e);
        contact.push(input - e <= 1e-9 * scale);
        values.push(T::lit(e));
    }
    let extra_values = extras
        .iter()
        .map(|(p, v)| {
            let q: Vec<f64> = p.iter().map(|c| c.as_f64()).collect();
            T::lit(extra_eval(&q).min(v.as_f64()))
        })
        .collect();
    Ok(EnvelopeResult {
        grid: ScalarGrid::new(grid.spec.clone(), values)?,
        contact,
        method,
        extra_values,
        max_gap: T::lit(max_gap),
        pieces,
    })
}

/// Greatest convex minorant of 1D grid samples.
pub fn conv_envelope_1d<T: Real>(grid: &ScalarGrid<T>) -> Result<EnvelopeResult<T>> {
    if grid.dim() != 1 {
        return Err(Error::invalid(
            "conv_envelope_1d expects a one-dimensional grid",
        ));
    }
    conv_envelope_grid(grid, &[])
}

/// Convex envelope of grid samples plus optional extra points inside the box.
/// One dimension uses the monotone chain, two the lifted hull, three the
/// per-node linear program.
pub fn conv_envelope_grid<T: Real>(
    grid: &ScalarGrid<T>,
    extras: &[(Vec<T>, T)],
) -> Result<EnvelopeResult<T>> {
    let (pts, vals) = assemble(grid, extras)?;
    let spec = &grid.spec;
    match spec.dim() {
        1 => {
            let chain = lower_chain(pts.iter().zip(&vals).map(|(p, &v)| [p[0], v]).collect());
            let env: Vec<f64> = (0..spec.len())
                .map(|i| eval_chain(&chain, pts[i][0]))
                .collect();
            let c2 = chain.clone();
            finish(
                grid,
                extras,
                env,
                Pieces::Chain(chain),
                EnvelopeMethod::Hull,
                move |q| eval_chain(&c2, q[0]),
            )
        }
        2 => {
            let lifted: Vec<[f64; 3]> = pts
                .iter()
                .zip(&vals)
                .map(|(p, &v)| [p[0], p[1], v])
                .collect();
            match quickhull::lower_hull(&lifted) {
                None => {
                    let env: Vec<f64> = vals[..spec.len()].to_vec();
                    let g = grid.clone();
                    finish(
                        grid,
                        extras,
                        env,
                        Pieces::Lattice,
                        EnvelopeMethod::Hull,
                        move |q| {
                            let x: Vec<T> = q.iter().map(|&c| T::lit(c)).collect();
                            g.interpolate(&x).as_f64()
                        },
                    )
                }
                Some(tris) => {
                    let index = TriangleIndex::new(lifted, tris);
                    let env: Result<Vec<f64>> = (0..spec.len())
                        .into_par_iter()
                        .map(|i| {
                            index.eval([pts[i][0], pts[i][1]]).ok_or_else(|| {
                                Error::certification(
                                    "envelope",
                                    format!("node {i} not covered by the lower hull"),
                                )
                            })
                        })
                        .collect();
                    let env = env?;
                    let idx2 = index.clone();
                    finish(
                        grid,
                        extras,
                        env,
                        Pieces::Triangles(index),
                        EnvelopeMethod::Hull,
                        move |q| idx2.eval([q[0], q[1]]).unwrap_or(f64::INFINITY),
                    )
                }
            }
        }
        3 => conv_envelope_lp(grid, extras),
        d => Err(Error::invalid(format!(
            "envelope dimension {d} not supported"
        ))),
    }
}

fn lp_at(spec_f: &GridSpec<f64>, pts: &[Vec<f64>], vals: &[f64], x: &[f64]) -> Result<f64> {
    let (cell, frac) = spec_f.locate(x);
    let basis: Vec<usize> = lp::kuhn_simplex(&cell, &frac)
        .iter()
        .map(|idx| spec_f.flat_index(idx))
        .collect();
    lp::min_combination(pts, vals, x, basis)
        .map(|(v, _)| v)
        .ok_or_else(|| Error::certification("envelope", "linear program failed to converge"))
}

/// Envelope by a linear program at every node (any dimension ≤ 3). Used for
/// three-dimensional grids and as an independent cross-check of the hull.
pub fn conv_envelope_lp<T: Real>(
    grid: &ScalarGrid<T>,
    extras: &[(Vec<T>, T)],
) -> Result<EnvelopeResult<T>> {
    let (pts, vals) = assemble(grid, extras)?;
    let spec = &grid.spec;
    let spec_f = GridSpec::<f64>::new(
        spec.lo.iter().map(|v| v.as_f64()).collect(),
        spec.hi.iter().map(|v| v.as_f64()).collect(),
        spec.res.clone(),
    )?;
    let env: Result<Vec<f64>> = (0..spec.len())
        .into_par_iter()
        .map(|i| lp_at(&spec_f, &pts, &vals, &pts[i]))
        .collect();
    let env = env?;
    finish(
        grid,
        extras,
        env,
        Pieces::Lattice,
        EnvelopeMethod::Lp,
        |q| lp_at(&spec_f, &pts, &vals, q).unwrap_or(f64::INFINITY),
    )
}

/// Exhaustive Carathéodory minimum: the smallest interpolated value over all
/// simplices with vertices among `nodes` containing `x` (degenerate faces
/// included). Test oracle only; cost grows like `nodes^(k+1)`.
pub fn caratheodory_oracle<T: Real>(nodes: &[Vec<T>], values: &[T], x: &[T]) -> Result<T> {
    let k = x.len();
    let p: Vec<Vec<f64>> = nodes
        .iter()
        .map(|n| n.iter().map(|v| v.as_f64()).collect())
        .collect();
    let v: Vec<f64> = values.iter().map(|v| v.as_f64()).collect();
    let q: Vec<f64> = x.iter().map(|c| c.as_f64()).collect();
    let scale = 1.0 + p.iter().flatten().fold(0.0f64, |a, c| a.max(c.abs()));
    let tol = 1e-12 * scale;
    let mut best = f64::INFINITY;
    for i in 0..p.len() {
        if dist(&p[i], &q) <= tol {
            best = best.min(v[i]);
        }
    }
    let seg = |i: usize, j: usize| -> Option<f64> {
        let d: Vec<f64> = (0..k).map(|c| p[j][c] - p[i][c]).collect();
        let len2: f64 = d.iter().map(|a| a * a).sum();
        if len2 == 0.0 {
            return None;
        }
        let t = (0..k).map(|c| (q[c] - p[i][c]) * d[c]).sum::<f64>() / len2;
        if !(-1e-12..=1.0 + 1e-12).contains(&t) {
            return None;
        }
        let off: f64 = (0..k)
            .map(|c| (p[i][c] + t * d[c] - q[c]).powi(2))
            .sum::<f64>()
            .sqrt();
        (off <= tol).then(|| v[i] + t * (v[j] - v[i]))
    };
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if let Some(val) = seg(i, j) {
                best = best.min(val);
            }
        }
    }
    if k >= 2 {
        let lift = |i: usize| [p[i][0], p[i][1], 0.0];
        let qq = [q[0], q[1], 0.0];
        let planar = k == 2;
        for a in 0..p.len() {
            for b in a + 1..p.len() {
                for c in b + 1..p.len() {
                    if planar {
                        let (pa, pb, pc) = (lift(a), lift(b), lift(c));
                        let area = ccw(&pa, &pb, &pc);
                        if area == 0.0 {
                            continue;
                        }
                        let wa = ccw(&qq, &pb, &pc) / area;
                        let wb = ccw(&pa, &qq, &pc) / area;
                        let wc = 1.0 - wa - wb;
                        if wa >= -1e-12 && wb >= -1e-12 && wc >= -1e-12 {
                            best = best.min(wa * v[a] + wb * v[b] + wc * v[c]);
                        }
                    } else if let Some(val) = simplex_value(&p, &v, &q, &[a, b, c]) {
                        best = best.min(val);
                    }
                }
            }
        }
    }
    if k >= 3 {
        for a in 0..p.len() {
            for b in a + 1..p.len() {
                for c in b + 1..p.len() {
                    for d in c + 1..p.len() {
                        if let Some(val) = simplex_value(&p, &v, &q, &[a, b, c, d]) {
                            best = best.min(val);
                        }
                    }
                }
            }
        }
    }
    if best.is_finite() {
        Ok(T::lit(best))
    } else {
        Err(Error::invalid(
            "query point outside the convex hull of the nodes",
        ))
    }
}

/// Interpolated value on the simplex `ids` if it contains `q` (least-squares
/// barycentric solve so lower-dimensional simplices in ℝ³ also work).
fn simplex_value(p: &[Vec<f64>], v: &[f64], q: &[f64], ids: &[usize]) -> Option<f64> {
    let k = q.len();
    let m = ids.len() - 1;
    let base = &p[ids[0]];
    let edges: Vec<Vec<f64>> = ids[1..]
        .iter()
        .map(|&i| (0..k).map(|c| p[i][c] - base[c]).collect())
        .collect();
    let rhs: Vec<f64> = (0..k).map(|c| q[c] - base[c]).collect();
    let gram: Vec<Vec<f64>> = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| crate::linalg::dot(&edges[a], &edges[b]))
                .collect()
        })
        .collect();
    let b: Vec<f64> = (0..m)
        .map(|a| crate::linalg::dot(&edges[a], &rhs))
        .collect();
    let det_scale: f64 = gram
        .iter()
        .map(|r| r.iter().fold(0.0f64, |s, x| s.max(x.abs())))
        .product();
    let w = crate::linalg::solve(gram, b)?;
    if det_scale == 0.0 {
        return None;
    }
    let recon: Vec<f64> = (0..k)
        .map(|c| base[c] + (0..m).map(|a| w[a] * edges[a][c]).sum::<f64>())
        .collect();
    if dist(&recon, q) > 1e-10 {
        return None;
    }
    let w0 = 1.0 - w.iter().sum::<f64>();
    if w0 < -1e-12 || w.iter().any(|&x| x < -1e-12) {
        return None;
    }
    Some(w0 * v[ids[0]] + (0..m).map(|a| w[a] * v[ids[a + 1]]).sum::<f64>())
}

/// Measured regularity of an input and its envelope.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    /// Measured gradient modulus of the input, `sup |ΔDH| / ω(|Δx|)`.
    pub modulus_input: f64,
    /// Same for the envelope.
    pub modulus_envelope: f64,
    pub ratio: f64,
    pub lip_input: f64,
    pub lip_envelope: f64,
    /// `modulus_envelope ≤ 1.1 · 4(k+1) · modulus_input`.
    pub modulus_ok: bool,
    /// `lip_envelope ≤ 1.05 · lip_input`.
    pub lip_ok: bool,
}

/// Gradient modulus of finite-difference gradients over node pairs at least
/// four steps apart: all pairs when there are few nodes, `samples` random
/// pairs otherwise.
pub fn grid_gradient_modulus<T: Real>(
    grads: &[Vec<T>],
    spec: &GridSpec<T>,
    omega: &Modulus<T>,
    samples: usize,
    seed: u64,
) -> f64 {
    use rand::Rng;
    let n = spec.len();
    let floor = 4.0 * spec.max_step().as_f64();
    let nodes: Vec<Vec<f64>> = spec
        .nodes()
        .iter()
        .map(|p| p.iter().map(|v| v.as_f64()).collect())
        .collect();
    let pair = |i: usize, j: usize| -> f64 {
        let d = dist(&nodes[i], &nodes[j]);
        if d < floor - 1e-12 {
            return 0.0;
        }
        let dg: f64 = grads[i]
            .iter()
            .zip(&grads[j])
            .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
            .sum::<f64>()
            .sqrt();
        let w = omega.eval_unchecked(T::lit(d)).as_f64();
        dg / w
    };
    if n * n / 2 <= samples {
        (0..n)
            .into_par_iter()
            .map(|i| (i + 1..n).map(|j| pair(i, j)).fold(0.0f64, f64::max))
            .reduce(|| 0.0, f64::max)
    } else {
        let mut rng = sampling::rng(seed);
        let idx: Vec<(usize, usize)> = (0..samples)
            .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
            .collect();
        idx.par_iter()
            .map(|&(i, j)| pair(i, j))
            .reduce(|| 0.0, f64::max)
    }
}

/// Checks the envelope regularity bounds on a grid function `h`.
pub fn regularity_bound_check<T: Real>(
    h: &ScalarGrid<T>,
    omega: &Modulus<T>,
    seed: u64,
) -> Result<RegularityReport> {
    let env = conv_envelope_grid(h, &[])?;
    let gh = h.fd_gradients();
    let ge = env.grid.fd_gradients();
    let samples = 200_000;
    let modulus_input = grid_gradient_modulus(&gh, &h.spec, omega, samples, seed);
    let modulus_envelope = grid_gradient_modulus(&ge, &h.spec, omega, samples, seed);
    let lip = |g: &[Vec<T>]| {
        g.iter()
            .map(|v| v.iter().map(|c| c.as_f64().powi(2)).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max)
    };
    let lip_input = lip(&gh);
    let lip_envelope = lip(&ge);
    let k = h.dim() as f64;
    let ratio = if modulus_input > 0.0 {
        modulus_envelope / modulus_input
    } else if modulus_envelope > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(RegularityReport {
        modulus_input,
        modulus_envelope,
        ratio,
        lip_input,
        lip_envelope,
        modulus_ok: modulus_envelope <= 1.1 * 4.0 * (k + 1.0) * modulus_input + 1e-9,
        lip_ok: lip_envelope <= 1.05 * lip_input + 1e-9,
    })
}
