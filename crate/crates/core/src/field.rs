//! Scalar fields with gradient access on a declared box.

use std::fmt;
use std::sync::Arc;

use crate::envelope::EnvelopeResult;
use crate::grid::{GridSpec, ScalarGrid};
use crate::linalg::{dot, project_rows};
use crate::{Error, Real, Result};

pub type AnalyticFn<T> = Arc<dyn Fn(&[T]) -> (T, Vec<T>) + Send + Sync>;

#[derive(Clone)]
pub enum FieldKind<T> {
    /// Exact piecewise-affine convex envelope.
    Envelope(EnvelopeResult<T>),
    /// Multilinear interpolation of node values.
    Lattice(ScalarGrid<T>),
    /// `x ↦ ⟨linear, x⟩ + reduced(basis · x)`.
    Composed {
        linear: Vec<T>,
        basis: Vec<Vec<T>>,
        reduced: Box<ExtensionField<T>>,
    },
    Affine {
        slope: Vec<T>,
        offset: T,
    },
    /// Closed-form value and gradient.
    Analytic(AnalyticFn<T>),
}

/// A field `F` with value and gradient at any point of its box, a tag naming
/// the construction that produced it, and a node sampling for dumps.
#[derive(Clone)]
pub struct ExtensionField<T> {
    kind: FieldKind<T>,
    pub provenance: String,
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    /// Step of the centered differences used for sampled kinds.
    pub fd_step: Vec<T>,
    pub dump: ScalarGrid<T>,
}

impl<T: Real> fmt::Debug for ExtensionField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExtensionField")
            .field("provenance", &self.provenance)
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .finish()
    }
}

impl<T: Real> ExtensionField<T> {
    fn steps(spec: &GridSpec<T>) -> Vec<T> {
        (0..spec.dim()).map(|k| spec.step(k)).collect()
    }

    pub fn from_envelope(env: EnvelopeResult<T>, provenance: impl Into<String>) -> Self {
        let spec = env.grid.spec.clone();
        let dump = env.grid.clone();
        ExtensionField {
            lo: spec.lo.clone(),
            hi: spec.hi.clone(),
            fd_step: Self::steps(&spec),
            kind: FieldKind::Envelope(env),
            provenance: provenance.into(),
            dump,
        }
    }

    pub fn from_lattice(grid: ScalarGrid<T>, provenance: impl Into<String>) -> Self {
        let spec = grid.spec.clone();
        ExtensionField {
            lo: spec.lo.clone(),
            hi: spec.hi.clone(),
            fd_step: Self::steps(&spec),
            dump: grid.clone(),
            kind: FieldKind::Lattice(grid),
            provenance: provenance.into(),
        }
    }

    pub fn affine(
        slope: Vec<T>,
        offset: T,
        spec: GridSpec<T>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let dump = ScalarGrid::from_fn(spec.clone(), |x| dot(&slope, x) + offset)?;
        Ok(ExtensionField {
            lo: spec.lo.clone(),
            hi: spec.hi.clone(),
            fd_step: Self::steps(&spec),
            kind: FieldKind::Affine { slope, offset },
            provenance: provenance.into(),
            dump,
        })
    }

    pub fn analytic<F>(f: F, spec: GridSpec<T>, provenance: impl Into<String>) -> Result<Self>
    where
        F: Fn(&[T]) -> (T, Vec<T>) + Send + Sync + 'static,
    {
        let f: AnalyticFn<T> = Arc::new(f);
        let g = f.clone();
        let dump = ScalarGrid::from_fn(spec.clone(), move |x| g(x).0)?;
        Ok(ExtensionField {
            lo: spec.lo.clone(),
            hi: spec.hi.clone(),
            fd_step: Self::steps(&spec),
            kind: FieldKind::Analytic(f),
            provenance: provenance.into(),
            dump,
        })
    }

    /// `x ↦ ⟨linear, x⟩ + reduced(P x)` sampled on `spec` for dumps.
    pub fn composed(
        linear: Vec<T>,
        basis: Vec<Vec<T>>,
        reduced: ExtensionField<T>,
        spec: GridSpec<T>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let mut field = ExtensionField {
            lo: spec.lo.clone(),
            hi: spec.hi.clone(),
            fd_step: Self::steps(&spec),
            kind: FieldKind::Composed {
                linear,
                basis,
                reduced: Box::new(reduced),
            },
            provenance: provenance.into(),
            dump: ScalarGrid::new(spec.clone(), vec![T::zero(); spec.len()])?,
        };
        let values = spec.sample(|x| field.value(x));
        field.dump = ScalarGrid::new(spec, values)?;
        Ok(field)
    }

    pub fn kind(&self) -> &FieldKind<T> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter().enumerate().all(|(k, &v)| {
                let tol = T::lit(1e-9) * (self.hi[k] - self.lo[k]);
                v >= self.lo[k] - tol && v <= self.hi[k] + tol
            })
    }

    /// Value at `x`; sampled kinds clamp `x` to the box.
    pub fn value(&self, x: &[T]) -> T {
        match &self.kind {
            FieldKind::Envelope(env) => env.eval(x),
            FieldKind::Lattice(grid) => grid.interpolate(x),
            FieldKind::Composed {
                linear,
                basis,
                reduced,
            } => dot(linear, x) + reduced.value(&project_rows(basis, x)),
            FieldKind::Affine { slope, offset } => dot(slope, x) + *offset,
            FieldKind::Analytic(f) => f(x).0,
        }
    }

    /// Gradient at `x`: exact for affine and analytic kinds, centered
    /// differences with the grid step (clipped at the box) otherwise.
    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        match &self.kind {
            FieldKind::Affine { slope, .. } => slope.clone(),
            FieldKind::Analytic(f) => f(x).1,
            FieldKind::Composed {
                linear,
                basis,
                reduced,
            } => {
                let g = reduced.gradient(&project_rows(basis, x));
                let mut out = linear.clone();
                for (row, &c) in basis.iter().zip(&g) {
                    for (o, &r) in out.iter_mut().zip(row) {
                        *o = *o + r * c;
                    }
                }
                out
            }
            FieldKind::Envelope(_) | FieldKind::Lattice(_) => self.centered_difference(x),
        }
    }

    fn centered_difference(&self, x: &[T]) -> Vec<T> {
        let mut g = Vec::with_capacity(x.len());
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        for k in 0..x.len() {
            let h = self.fd_step[k];
            a[k] = (x[k] - h).max(self.lo[k]);
            b[k] = (x[k] + h).min(self.hi[k]);
            let span = b[k] - a[k];
            g.push(if span > T::zero() {
                (self.value(&b) - self.value(&a)) / span
            } else {
                T::zero()
            });
            a[k] = x[k];
            b[k] = x[k];
        }
        g
    }

    /// Value and gradient, rejecting points outside the declared box.
    pub fn eval(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        if !self.contains(x) {
            return Err(Error::invalid(format!(
                "query point outside the field box ({})",
                self.provenance
            )));
        }
        Ok((self.value(x), self.gradient(x)))
    }

    /// Largest gradient norm over the dump nodes.
    pub fn max_gradient_norm(&self) -> T {
        let spec = &self.dump.spec;
        (0..spec.len())
            .map(|i| crate::linalg::norm(&self.gradient(&spec.node(i))))
            .fold(T::zero(), T::max)
    }
}
