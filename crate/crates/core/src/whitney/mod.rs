//! Dyadic Whitney cubes for the complement of a closed set, the associated
//! smooth partition of unity, jet extension and correctors.

mod corrector;
mod extension;

pub use corrector::{build_corrector, Corrector, CorrectorSample};
pub use extension::{whitney_extend_jet, WhitneyJetExtension};

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{box_box_dist, dist, point_box_dist};
use crate::sampling;
use crate::{Error, Real, Result};

/// Dilation of the cubes carrying the partition of unity.
pub const EPS0: f64 = 0.125;
pub const DEFAULT_MAX_GENERATION: u32 = 20;

/// A closed set given as finitely many points or axis-aligned boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", tag = "kind", rename_all = "lowercase")]
pub enum ClosedSetApprox<T> {
    Points {
        dim: usize,
        points: Vec<Vec<T>>,
    },
    Boxes {
        dim: usize,
        boxes: Vec<(Vec<T>, Vec<T>)>,
    },
}

impl<T: Real> ClosedSetApprox<T> {
    pub fn points(points: Vec<Vec<T>>) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("empty closed set"))?;
        if points
            .iter()
            .any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::invalid(
                "closed set points must be finite and of equal dimension",
            ));
        }
        Ok(ClosedSetApprox::Points { dim, points })
    }

    pub fn boxes(boxes: Vec<(Vec<T>, Vec<T>)>) -> Result<Self> {
        let dim = boxes
            .first()
            .map(|b| b.0.len())
            .ok_or_else(|| Error::invalid("empty closed set"))?;
        for (lo, hi) in &boxes {
            if lo.len() != dim || hi.len() != dim || lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
                return Err(Error::invalid(
                    "closed set boxes must satisfy lo <= hi componentwise",
                ));
            }
        }
        Ok(ClosedSetApprox::Boxes { dim, boxes })
    }

    pub fn dim(&self) -> usize {
        match self {
            ClosedSetApprox::Points { dim, .. } | ClosedSetApprox::Boxes { dim, .. } => *dim,
        }
    }

    /// Exact distance from `x` to the set.
    pub fn dist(&self, x: &[T]) -> T {
        match self {
            ClosedSetApprox::Points { points, .. } => points
                .iter()
                .map(|p| dist(p, x))
                .fold(T::infinity(), T::min),
            ClosedSetApprox::Boxes { boxes, .. } => boxes
                .iter()
                .map(|(lo, hi)| point_box_dist(x, lo, hi))
                .fold(T::infinity(), T::min),
        }
    }

    /// Exact distance from the box `[lo, hi]` to the set.
    pub fn dist_to_box(&self, lo: &[T], hi: &[T]) -> T {
        match self {
            ClosedSetApprox::Points { points, .. } => points
                .iter()
                .map(|p| point_box_dist(p, lo, hi))
                .fold(T::infinity(), T::min),
            ClosedSetApprox::Boxes { boxes, .. } => boxes
                .iter()
                .map(|(a, b)| box_box_dist(lo, hi, a, b))
                .fold(T::infinity(), T::min),
        }
    }

    /// True when the box `[lo, hi]` lies inside a single component box.
    pub fn contains_box(&self, lo: &[T], hi: &[T]) -> bool {
        match self {
            ClosedSetApprox::Points { .. } => false,
            ClosedSetApprox::Boxes { boxes, .. } => boxes
                .iter()
                .any(|(a, b)| (0..lo.len()).all(|k| a[k] <= lo[k] && hi[k] <= b[k])),
        }
    }
}

/// One dyadic cube: `root_lo + index · side + [0, side]^k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Cube<T> {
    pub center: Vec<T>,
    pub side: T,
    pub generation: u32,
    pub index: Vec<i64>,
}

impl<T: Real> Cube<T> {
    pub fn lo(&self) -> Vec<T> {
        self.center
            .iter()
            .map(|&c| c - self.side / T::lit(2.0))
            .collect()
    }

    pub fn hi(&self) -> Vec<T> {
        self.center
            .iter()
            .map(|&c| c + self.side / T::lit(2.0))
            .collect()
    }

    pub fn diam(&self) -> T {
        self.side * T::count(self.center.len()).sqrt()
    }

    fn half_dilated(&self) -> T {
        self.side * (T::one() + T::lit(EPS0)) / T::lit(2.0)
    }

    pub fn dilated_lo(&self) -> Vec<T> {
        let h = self.half_dilated();
        self.center.iter().map(|&c| c - h).collect()
    }

    pub fn dilated_hi(&self) -> Vec<T> {
        let h = self.half_dilated();
        self.center.iter().map(|&c| c + h).collect()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        let h = self.side / T::lit(2.0);
        x.iter()
            .zip(&self.center)
            .all(|(&v, &c)| (v - c).abs() <= h)
    }

    pub fn dilated_contains(&self, x: &[T]) -> bool {
        let h = self.half_dilated();
        x.iter().zip(&self.center).all(|(&v, &c)| (v - c).abs() < h)
    }
}

type CellKey = (u32, [i64; 3]);

fn key(generation: u32, index: &[i64]) -> CellKey {
    let mut k = [0i64; 3];
    k[..index.len()].copy_from_slice(index);
    (generation, k)
}

/// Whitney cubes of `bbox ∖ E` with measured partition-of-unity constants.
#[derive(Debug, Clone)]
pub struct CubeDecomposition<T> {
    pub dim: usize,
    pub set: ClosedSetApprox<T>,
    pub root_lo: Vec<T>,
    pub root_side: T,
    /// Box actually covered by the decomposition.
    pub bbox_lo: Vec<T>,
    pub bbox_hi: Vec<T>,
    pub eps0: T,
    pub max_generation: u32,
    pub cubes: Vec<Cube<T>>,
    /// Finest-generation cubes still too close to E; queries there are rejected.
    pub truncated: Vec<Cube<T>>,
    /// Exact maximum number of dilated cubes meeting a dilated cube.
    pub overlap_n: usize,
    /// Measured `max |∇φ_j| · diam Q_j`.
    pub a1: T,
    /// Measured `max |D²φ_j| · diam(Q_j)²`.
    pub a2: T,
    /// `√k · max(1, a1, a2)`.
    pub a_const: T,
    pub warnings: Vec<String>,
    lookup: HashMap<CellKey, usize>,
}

/// One partition-of-unity term at a query point.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTerm<T> {
    pub cube: usize,
    pub weight: T,
    pub gradient: Vec<T>,
}

fn bump(t: f64) -> (f64, f64) {
    if t.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let s = 1.0 - t * t;
    let b = (-1.0 / s).exp();
    (b, b * (-2.0 * t / (s * s)))
}

/// Builds the Whitney cubes of `[lo, hi] ∖ E`: a cube is kept once
/// `d(Q, E) ≥ diam Q` and subdivided otherwise, down to `max_generation`.
pub fn decompose<T: Real>(
    set: &ClosedSetApprox<T>,
    lo: &[T],
    hi: &[T],
    max_generation: u32,
) -> Result<CubeDecomposition<T>> {
    let k = set.dim();
    if lo.len() != k || hi.len() != k || k == 0 || k > 3 {
        return Err(Error::invalid(
            "decomposition box and closed set dimensions disagree",
        ));
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
        return Err(Error::invalid(
            "decomposition box must have positive extent",
        ));
    }
    if max_generation > 40 {
        return Err(Error::invalid("max_generation above 40 is not supported"));
    }
    let root_side = lo
        .iter()
        .zip(hi)
        .fold(T::zero(), |m, (&a, &b)| m.max(b - a));
    let root_lo = lo.to_vec();
    let mut cubes = Vec::new();
    let mut truncated = Vec::new();
    let mut stack: Vec<(u32, Vec<i64>)> = vec![(0, vec![0; k])];
    while let Some((g, idx)) = stack.pop() {
        let side = root_side / T::lit(2f64.powi(g as i32));
        let clo: Vec<T> = (0..k)
            .map(|a| root_lo[a] + side * T::lit(idx[a] as f64))
            .collect();
        let chi: Vec<T> = (0..k).map(|a| clo[a] + side).collect();
        if (0..k).any(|a| clo[a] >= hi[a]) || set.contains_box(&clo, &chi) {
            continue;
        }
        let cube = Cube {
            center: (0..k).map(|a| clo[a] + side / T::lit(2.0)).collect(),
            side,
            generation: g,
            index: idx.clone(),
        };
        let d = set.dist_to_box(&clo, &chi);
        if d >= cube.diam() {
            cubes.push(cube);
        } else if g >= max_generation {
            truncated.push(cube);
        } else {
            for child in (0..(1usize << k)).rev() {
                let cidx: Vec<i64> = (0..k)
                    .map(|a| 2 * idx[a] + ((child >> a) & 1) as i64)
                    .collect();
                stack.push((g + 1, cidx));
            }
        }
    }
    let order =
        |a: &Cube<T>, b: &Cube<T>| a.generation.cmp(&b.generation).then(a.index.cmp(&b.index));
    cubes.sort_by(order);
    truncated.sort_by(order);
    let mut warnings = Vec::new();
    if cubes.is_empty() {
        warnings.push("closed set covers the whole box: empty decomposition".to_string());
    }
    let lookup = cubes
        .iter()
        .enumerate()
        .map(|(i, c)| (key(c.generation, &c.index), i))
        .collect();
    let mut decomp = CubeDecomposition {
        dim: k,
        set: set.clone(),
        root_lo,
        root_side,
        bbox_lo: lo.to_vec(),
        bbox_hi: hi.to_vec(),
        eps0: T::lit(EPS0),
        max_generation,
        cubes,
        truncated,
        overlap_n: 0,
        a1: T::zero(),
        a2: T::zero(),
        a_const: T::one(),
        warnings,
        lookup,
    };
    decomp.overlap_n = decomp.count_overlaps();
    decomp.measure_partition_constants(0x5eed);
    Ok(decomp)
}

impl<T: Real> CubeDecomposition<T> {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    fn side_at(&self, g: u32) -> T {
        self.root_side / T::lit(2f64.powi(g as i32))
    }

    /// Width of the rejected band around E.
    pub fn collar_width(&self) -> T {
        self.side_at(self.max_generation) * T::count(self.dim).sqrt()
    }

    /// Index of the kept cube containing `x`, if any.
    pub fn locate(&self, x: &[T]) -> Option<usize> {
        for g in 0..=self.max_generation {
            let s = self.side_at(g);
            let mut idx = [0i64; 3];
            for a in 0..self.dim {
                let u = ((x[a] - self.root_lo[a]) / s).floor().to_i64()?;
                idx[a] = u;
            }
            if let Some(&j) = self.lookup.get(&(g, idx)) {
                if self.cubes[j].contains(x) {
                    return Some(j);
                }
            }
            for a in 0..self.dim {
                let u = (x[a] - self.root_lo[a]) / s;
                if u == u.floor() && idx[a] > 0 {
                    let mut alt = idx;
                    alt[a] -= 1;
                    if let Some(&j) = self.lookup.get(&(g, alt)) {
                        return Some(j);
                    }
                }
            }
        }
        None
    }

    /// Kept cubes whose dilate contains `x`.
    pub fn dilated_cubes_at(&self, x: &[T]) -> Vec<usize> {
        let half_eps = T::lit(EPS0 / 2.0);
        let mut out = Vec::new();
        for g in 0..=self.max_generation {
            let s = self.side_at(g);
            let mut choices: [[i64; 2]; 3] = [[0; 2]; 3];
            let mut counts = [1usize; 3];
            for a in 0..self.dim {
                let u = (x[a] - self.root_lo[a]) / s;
                let base = u.floor();
                let frac = u - base;
                let i = base.to_i64().unwrap_or(0);
                choices[a][0] = i;
                if frac <= half_eps {
                    choices[a][1] = i - 1;
                    counts[a] = 2;
                } else if frac >= T::one() - half_eps {
                    choices[a][1] = i + 1;
                    counts[a] = 2;
                }
            }
            let total: usize = counts[..self.dim].iter().product();
            for combo in 0..total {
                let mut rem = combo;
                let mut idx = [0i64; 3];
                for a in 0..self.dim {
                    idx[a] = choices[a][rem % counts[a]];
                    rem /= counts[a];
                }
                if let Some(&j) = self.lookup.get(&(g, idx)) {
                    if self.cubes[j].dilated_contains(x) {
                        out.push(j);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Partition of unity at `x`: weights and gradients of every φ_j that is
    /// nonzero at `x`. Errors inside E, in the truncation collar or outside
    /// the covered box.
    pub fn partition_eval(&self, x: &[T]) -> Result<Vec<PartitionTerm<T>>> {
        if x.len() != self.dim {
            return Err(Error::invalid("query dimension mismatch"));
        }
        let d = self.set.dist(x);
        if self.locate(x).is_none() {
            return Err(Error::Collar {
                distance: d.as_f64(),
            });
        }
        let ids = self.dilated_cubes_at(x);
        let mut raw: Vec<(usize, f64, Vec<f64>)> = Vec::with_capacity(ids.len());
        for j in ids {
            let c = &self.cubes[j];
            let half = (c.side * (T::one() + self.eps0) / T::lit(2.0)).as_f64();
            let ts: Vec<f64> = (0..self.dim)
                .map(|a| (x[a] - c.center[a]).as_f64() / half)
                .collect();
            let parts: Vec<(f64, f64)> = ts.iter().map(|&t| bump(t)).collect();
            let w: f64 = parts.iter().map(|p| p.0).product();
            if w <= 0.0 {
                continue;
            }
            let grad: Vec<f64> = (0..self.dim)
                .map(|a| {
                    let others: f64 = (0..self.dim)
                        .filter(|&b| b != a)
                        .map(|b| parts[b].0)
                        .product();
                    parts[a].1 * others / half
                })
                .collect();
            raw.push((j, w, grad));
        }
        let total: f64 = raw.iter().map(|r| r.1).sum();
        if !(total > 0.0) {
            return Err(Error::Collar {
                distance: d.as_f64(),
            });
        }
        let mut tgrad = vec![0.0; self.dim];
        for r in &raw {
            for a in 0..self.dim {
                tgrad[a] += r.2[a];
            }
        }
        Ok(raw
            .into_iter()
            .map(|(j, w, g)| PartitionTerm {
                cube: j,
                weight: T::lit(w / total),
                gradient: (0..self.dim)
                    .map(|a| T::lit((g[a] * total - w * tgrad[a]) / (total * total)))
                    .collect(),
            })
            .collect())
    }

    /// Maximum number of dilated cubes meeting a given dilated cube (exact
    /// pairwise count by a sweep over the first axis).
    fn count_overlaps(&self) -> usize {
        let n = self.cubes.len();
        if n == 0 {
            return 0;
        }
        let boxes: Vec<(Vec<f64>, Vec<f64>)> = self
            .cubes
            .iter()
            .map(|c| {
                (
                    c.dilated_lo().iter().map(|v| v.as_f64()).collect(),
                    c.dilated_hi().iter().map(|v| v.as_f64()).collect(),
                )
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| boxes[a].0[0].total_cmp(&boxes[b].0[0]));
        let mut counts = vec![1usize; n];
        for (pos, &i) in order.iter().enumerate() {
            for &j in &order[pos + 1..] {
                if boxes[j].0[0] >= boxes[i].1[0] {
                    break;
                }
                let overlap = (0..self.dim)
                    .all(|a| boxes[i].0[a] < boxes[j].1[a] && boxes[j].0[a] < boxes[i].1[a]);
                if overlap {
                    counts[i] += 1;
                    counts[j] += 1;
                }
            }
        }
        counts.into_iter().max().unwrap_or(0)
    }

    /// Samples every cube's dilate and records the derivative constants of the
    /// partition of unity.
    fn measure_partition_constants(&mut self, seed: u64) {
        let n = self.cubes.len();
        if n == 0 {
            return;
        }
        let stride = (n / 4000).max(1);
        let picks: Vec<usize> = (0..n).step_by(stride).collect();
        let this = &*self;
        let per_cube: Vec<(f64, f64)> = picks
            .par_iter()
            .map(|&j| {
                let mut rng = sampling::rng(seed ^ j as u64);
                let c = &this.cubes[j];
                let diam = c.diam().as_f64();
                let (dlo, dhi) = (c.dilated_lo(), c.dilated_hi());
                let mut a1 = 0.0f64;
                let mut a2 = 0.0f64;
                for _ in 0..6 {
                    let x: Vec<T> = sampling::uniform_in_box(&mut rng, &dlo, &dhi);
                    if !this.in_bbox(&x) {
                        continue;
                    }
                    let Ok(terms) = this.partition_eval(&x) else {
                        continue;
                    };
                    let Some(tj) = terms.iter().find(|t| t.cube == j) else {
                        continue;
                    };
                    a1 = a1.max(crate::linalg::norm(&tj.gradient).as_f64() * diam);
                    let h = c.side * T::lit(1e-4);
                    for a in 0..this.dim {
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[a] = xp[a] + h;
                        xm[a] = xm[a] - h;
                        let gp = this
                            .partition_eval(&xp)
                            .ok()
                            .and_then(|t| t.into_iter().find(|t| t.cube == j));
                        let gm = this
                            .partition_eval(&xm)
                            .ok()
                            .and_then(|t| t.into_iter().find(|t| t.cube == j));
                        let zero = vec![T::zero(); this.dim];
                        let gp = gp.map_or(zero.clone(), |t| t.gradient);
                        let gm = gm.map_or(zero, |t| t.gradient);
                        let second = crate::linalg::norm(&crate::linalg::sub(&gp, &gm)).as_f64()
                            / (2.0 * h.as_f64());
                        a2 = a2.max(second * diam * diam);
                    }
                }
                (a1, a2)
            })
            .collect();
        let (a1, a2) = per_cube
            .iter()
            .fold((0.0f64, 0.0f64), |acc, p| (acc.0.max(p.0), acc.1.max(p.1)));
        self.a1 = T::lit(a1);
        self.a2 = T::lit(a2);
        self.a_const = T::count(self.dim).sqrt() * T::lit(1f64.max(a1).max(a2));
    }

    pub fn in_bbox(&self, x: &[T]) -> bool {
        (0..self.dim).all(|a| x[a] >= self.bbox_lo[a] && x[a] <= self.bbox_hi[a])
    }

    /// Exact checks of the cube properties on the emitted list.
    pub fn check_invariants(&self) -> InvariantReport {
        let k = self.dim;
        let eps0 = self.eps0.as_f64();
        let mut r = InvariantReport {
            cubes: self.cubes.len(),
            truncated: self.truncated.len(),
            overlap_n: self.overlap_n,
            overlap_bound: 12usize.pow(k as u32),
            ..Default::default()
        };
        let mut min_ratio = f64::INFINITY;
        let mut max_ratio = 0.0f64;
        for c in &self.cubes {
            let diam = c.diam().as_f64();
            let (lo, hi) = (c.lo(), c.hi());
            let d = self.set.dist_to_box(&lo, &hi).as_f64();
            if c.generation > 0 {
                min_ratio = min_ratio.min(d / diam);
                max_ratio = max_ratio.max(d / diam);
            }
            let (dlo, dhi) = (c.dilated_lo(), c.dilated_hi());
            let dstar = self.set.dist_to_box(&dlo, &dhi).as_f64();
            let dstar_diam = c.diam().as_f64() * (1.0 + eps0);
            if dstar < 0.75 * diam * (1.0 - 1e-12) {
                r.vii_lower_violations += 1;
            }
            if c.generation > 0 && d + dstar_diam > (6.0 + eps0) * diam * (1.0 + 1e-12) {
                r.vii_upper_violations += 1;
            }
            if c.generation > 0 && d + diam > 5.0 * diam * (1.0 + 1e-12) {
                r.vi_violations += 1;
            }
        }
        r.min_distance_ratio = min_ratio;
        r.max_distance_ratio = max_ratio;
        r.iii_holds = min_ratio >= 1.0 - 1e-12 && max_ratio <= 4.0 + 1e-12
            || self.cubes.iter().all(|c| c.generation == 0);
        let fine = self.max_generation;
        let to_units = |c: &Cube<T>| -> Vec<(i128, i128)> {
            let shift = fine - c.generation;
            c.index
                .iter()
                .map(|&i| ((i as i128) << shift, ((i as i128) + 1) << shift))
                .collect()
        };
        let all: Vec<&Cube<T>> = self.cubes.iter().chain(&self.truncated).collect();
        let units: Vec<Vec<(i128, i128)>> = all.iter().map(|c| to_units(c)).collect();
        let mut order: Vec<usize> = (0..all.len()).collect();
        order.sort_by_key(|&i| units[i][0].0);
        let mut overlaps = 0usize;
        let mut touching_ratio = 1.0f64;
        for (pos, &i) in order.iter().enumerate() {
            for &j in &order[pos + 1..] {
                if units[j][0].0 > units[i][0].1 {
                    break;
                }
                let inter =
                    (0..k).all(|a| units[i][a].0 < units[j][a].1 && units[j][a].0 < units[i][a].1);
                if inter {
                    overlaps += 1;
                }
                let touch = (0..k)
                    .all(|a| units[i][a].0 <= units[j][a].1 && units[j][a].0 <= units[i][a].1);
                if touch && i < self.cubes.len() && j < self.cubes.len() {
                    let ratio = (all[i].side / all[j].side).as_f64();
                    touching_ratio = touching_ratio.max(ratio.max(1.0 / ratio));
                }
            }
        }
        r.interior_overlaps = overlaps;
        r.max_touching_ratio = touching_ratio;
        r
    }

    /// Fraction of `count` random points of `bbox ∖ (E ∪ collar)` that lie in
    /// some cube, plus the worst deviation of Σφ_j from 1.
    pub fn check_coverage(&self, count: usize, seed: u64) -> (usize, usize, f64) {
        let mut rng = sampling::rng(seed);
        let mut tested = 0;
        let mut covered = 0;
        let mut worst = 0.0f64;
        let collar = self.collar_width();
        for _ in 0..count {
            let x: Vec<T> = sampling::uniform_in_box(&mut rng, &self.bbox_lo, &self.bbox_hi);
            let d = self.set.dist(&x);
            if d <= T::zero() || d <= T::lit(2.0) * collar {
                continue;
            }
            if let ClosedSetApprox::Boxes { boxes, .. } = &self.set {
                if boxes
                    .iter()
                    .any(|(a, b)| (0..self.dim).all(|q| a[q] <= x[q] && x[q] <= b[q]))
                {
                    continue;
                }
            }
            tested += 1;
            if let Ok(terms) = self.partition_eval(&x) {
                covered += 1;
                let s: f64 = terms.iter().map(|t| t.weight.as_f64()).sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
        (tested, covered, worst)
    }
}

/// Results of [`CubeDecomposition::check_invariants`].
#[derive(Debug, Clone, Default, Serialize)]
pub struct InvariantReport {
    pub cubes: usize,
    pub truncated: usize,
    pub interior_overlaps: usize,
    pub min_distance_ratio: f64,
    pub max_distance_ratio: f64,
    pub iii_holds: bool,
    pub max_touching_ratio: f64,
    pub overlap_n: usize,
    pub overlap_bound: usize,
    pub vi_violations: usize,
    pub vii_lower_violations: usize,
    pub vii_upper_violations: usize,
}

impl InvariantReport {
    pub fn all_hold(&self) -> bool {
        self.interior_overlaps == 0
            && self.iii_holds
            && self.max_touching_ratio <= 4.0
            && self.overlap_n <= self.overlap_bound
            && self.vi_violations == 0
            && self.vii_lower_violations == 0
            && self.vii_upper_violations == 0
    }
}
