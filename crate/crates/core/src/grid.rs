//! Uniform tensor lattices and sampled scalar fields on them.
//!
//! Nodes are stored with axis 0 varying fastest.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GridSpec<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    pub res: Vec<usize>,
}

impl<T: Real> GridSpec<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>, res: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != res.len() || lo.is_empty() {
            return Err(Error::invalid(
                "grid box and resolution dimensions disagree",
            ));
        }
        for k in 0..lo.len() {
            if !(lo[k].is_finite() && hi[k].is_finite() && lo[k] < hi[k]) {
                return Err(Error::invalid(format!(
                    "grid axis {k} has an empty or non-finite extent"
                )));
            }
            if res[k] < 2 {
                return Err(Error::invalid(format!(
                    "grid axis {k} needs at least 2 nodes"
                )));
            }
        }
        Ok(GridSpec { lo, hi, res })
    }

    /// Cube grid `[lo, hi]^dim` with `res` nodes per axis.
    pub fn cube(dim: usize, lo: T, hi: T, res: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], vec![res; dim])
    }

    pub fn dim(&self) -> usize {
        self.res.len()
    }

    pub fn len(&self) -> usize {
        self.res.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self, axis: usize) -> T {
        (self.hi[axis] - self.lo[axis]) / T::count(self.res[axis] - 1)
    }

    /// Largest per-axis step.
    pub fn max_step(&self) -> T {
        (0..self.dim())
            .map(|k| self.step(k))
            .fold(T::zero(), T::max)
    }

    pub fn coord(&self, axis: usize, i: usize) -> T {
        if i + 1 == self.res[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + self.step(axis) * T::count(i)
        }
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = Vec::with_capacity(self.dim());
        for &r in &self.res {
            idx.push(flat % r);
            flat /= r;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for k in (0..self.dim()).rev() {
            flat = flat * self.res[k] + idx[k];
        }
        flat
    }

    pub fn node(&self, flat: usize) -> Vec<T> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.coord(k, i))
            .collect()
    }

    pub fn nodes(&self) -> Vec<Vec<T>> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn contains(&self, x: &[T], tol: T) -> bool {
        x.iter()
            .enumerate()
            .all(|(k, &v)| v >= self.lo[k] - tol && v <= self.hi[k] + tol)
    }

    /// Cell containing `x` (clamped) and local coordinates in `[0, 1]`.
    pub fn locate(&self, x: &[T]) -> (Vec<usize>, Vec<T>) {
        let mut cell = Vec::with_capacity(self.dim());
        let mut frac = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let h = self.step(k);
            let u = ((x[k] - self.lo[k]) / h).max(T::zero());
            let last = self.res[k] - 2;
            let i = u.floor().to_usize().unwrap_or(0).min(last);
            let t = (u - T::count(i)).max(T::zero()).min(T::one());
            cell.push(i);
            frac.push(t);
        }
        (cell, frac)
    }

    /// Index of the node nearest to `x` (clamped to the box).
    pub fn nearest_node(&self, x: &[T]) -> Vec<usize> {
        (0..self.dim())
            .map(|k| {
                let u = ((x[k] - self.lo[k]) / self.step(k)).round().max(T::zero());
                u.to_usize().unwrap_or(0).min(self.res[k] - 1)
            })
            .collect()
    }

    /// Evaluates `f` at every node in parallel, preserving node order.
    pub fn sample<F>(&self, f: F) -> Vec<T>
    where
        F: Fn(&[T]) -> T + Sync,
    {
        (0..self.len())
            .into_par_iter()
            .map(|i| f(&self.node(i)))
            .collect()
    }

    /// Fallible variant of [`GridSpec::sample`]; the first failing node wins.
    pub fn try_sample<F>(&self, f: F) -> Result<Vec<T>>
    where
        F: Fn(&[T]) -> Result<T> + Sync,
    {
        (0..self.len())
            .into_par_iter()
            .map(|i| f(&self.node(i)))
            .collect()
    }
}

/// Values (and optionally gradients) on the nodes of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ScalarGrid<T> {
    pub spec: GridSpec<T>,
    pub values: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grads: Option<Vec<Vec<T>>>,
}

impl<T: Real> ScalarGrid<T> {
    pub fn new(spec: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::invalid(format!(
                "grid has {} nodes but {} values",
                spec.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid values must be finite"));
        }
        Ok(ScalarGrid {
            spec,
            values,
            grads: None,
        })
    }

    pub fn from_fn<F: Fn(&[T]) -> T + Sync>(spec: GridSpec<T>, f: F) -> Result<Self> {
        let values = spec.sample(f);
        Self::new(spec, values)
    }

    pub fn with_grads(mut self, grads: Vec<Vec<T>>) -> Self {
        self.grads = Some(grads);
        self
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn at(&self, idx: &[usize]) -> T {
        self.values[self.spec.flat_index(idx)]
    }

    /// Multilinear interpolation (clamped to the box).
    pub fn interpolate(&self, x: &[T]) -> T {
        let (cell, frac) = self.spec.locate(x);
        let d = self.dim();
        let mut acc = T::zero();
        let mut idx = vec![0usize; d];
        for corner in 0..(1usize << d) {
            let mut w = T::one();
            for k in 0..d {
                let bit = (corner >> k) & 1;
                idx[k] = cell[k] + bit;
                w = w * if bit == 1 {
                    frac[k]
                } else {
                    T::one() - frac[k]
                };
            }
            if w != T::zero() {
                acc = acc + w * self.at(&idx);
            }
        }
        acc
    }

    /// Finite-difference gradient at a node: centered in the interior,
    /// one-sided on the boundary.
    pub fn fd_gradient(&self, idx: &[usize]) -> Vec<T> {
        let mut g = Vec::with_capacity(self.dim());
        let mut a = idx.to_vec();
        let mut b = idx.to_vec();
        for k in 0..self.dim() {
            a[k] = idx[k].saturating_sub(1);
            b[k] = (idx[k] + 1).min(self.spec.res[k] - 1);
            let span = T::count(b[k] - a[k]) * self.spec.step(k);
            g.push((self.at(&b) - self.at(&a)) / span);
            a[k] = idx[k];
            b[k] = idx[k];
        }
        g
    }

    /// Finite-difference gradients at every node.
    pub fn fd_gradients(&self) -> Vec<Vec<T>> {
        (0..self.spec.len())
            .into_par_iter()
            .map(|i| self.fd_gradient(&self.spec.multi_index(i)))
            .collect()
    }

    /// Smallest `(v(a) + v(b))/2 − v((a + b)/2)` over `pairs` random node
    /// pairs whose midpoint is a node. Negative values witness nonconvexity.
    pub fn midpoint_slack(&self, pairs: usize, seed: u64) -> f64 {
        use rand::Rng;
        let d = self.dim();
        let mut rng = crate::sampling::rng(seed);
        let draws: Vec<(Vec<usize>, Vec<usize>)> = (0..pairs)
            .map(|_| {
                let a: Vec<usize> = (0..d).map(|k| rng.gen_range(0..self.spec.res[k])).collect();
                let b: Vec<usize> = (0..d)
                    .map(|k| {
                        let r = self.spec.res[k];
                        let parity = a[k] % 2;
                        let half = (r - parity).div_ceil(2);
                        2 * rng.gen_range(0..half) + parity
                    })
                    .collect();
                (a, b)
            })
            .collect();
        draws
            .par_iter()
            .map(|(a, b)| {
                let m: Vec<usize> = a.iter().zip(b).map(|(&x, &y)| (x + y) / 2).collect();
                ((self.at(a) + self.at(b)) / T::lit(2.0) - self.at(&m)).as_f64()
            })
            .reduce(|| f64::INFINITY, f64::min)
    }

    /// Writes `x0,..,value[,g0,..]` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.dim();
        let mut header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
        header.push("value".into());
        if self.grads.is_some() {
            header.extend((0..d).map(|k| format!("g{k}")));
        }
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.spec.len() {
            let mut row: Vec<String> = self.spec.node(i).iter().map(|v| format!("{v}")).collect();
            row.push(format!("{}", self.values[i]));
            if let Some(gs) = &self.grads {
                row.extend(gs[i].iter().map(|v| format!("{v}")));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads a grid written by [`ScalarGrid::write_csv`]. Coordinate columns
    /// are those whose header starts with `x`; the lattice is recovered from
    /// the distinct coordinates per axis.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::invalid("empty CSV"))??;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let d = cols.iter().take_while(|c| c.starts_with('x')).count();
        if d == 0 || cols.get(d) != Some(&"value") {
            return Err(Error::invalid("CSV header must be x0,..,value[,g0,..]"));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (ln, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| Error::invalid(format!("CSV line {}: {e}", ln + 2)))?;
            if row.len() < d + 1 {
                return Err(Error::invalid(format!("CSV line {} too short", ln + 2)));
            }
            rows.push(row);
        }
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); d];
        for row in &rows {
            for k in 0..d {
                axes[k].push(row[k]);
            }
        }
        for a in axes.iter_mut() {
            a.sort_by(|x, y| x.total_cmp(y));
            a.dedup();
        }
        let spec = GridSpec::new(
            axes.iter().map(|a| T::lit(a[0])).collect(),
            axes.iter()
                .map(|a| T::lit(*a.last().unwrap_or(&0.0)))
                .collect(),
            axes.iter().map(Vec::len).collect(),
        )?;
        if rows.len() != spec.len() {
            return Err(Error::invalid("CSV rows do not form a full tensor grid"));
        }
        let mut values = vec![T::nan(); spec.len()];
        for row in &rows {
            let idx: Vec<usize> = (0..d)
                .map(|k| axes[k].partition_point(|&v| v < row[k]))
                .collect();
            values[spec.flat_index(&idx)] = T::lit(row[d]);
        }
        Self::new(spec, values)
    }
}
