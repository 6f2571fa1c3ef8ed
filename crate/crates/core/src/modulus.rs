//! Moduli of continuity: concave, strictly increasing ω with ω(0) = 0.

use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ModulusKind<T> {
    /// ω(t) = t.
    Linear,
    /// ω(t) = t^α with α ∈ (0, 1).
    Holder { alpha: T },
    /// Concave piecewise-linear through (0, 0) and the given knots, extended
    /// past the last knot with the last slope.
    Pwl { knots: Vec<(T, T)> },
}

/// A modulus of continuity, optionally capped at a finite supremum β.
///
/// With a cap the modulus is `min(base(t), β)` and its inverse is only
/// defined on `[0, β)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Modulus<T> {
    kind: ModulusKind<T>,
    bound: Option<T>,
}

impl<T: Real> Modulus<T> {
    pub fn linear() -> Self {
        Modulus {
            kind: ModulusKind::Linear,
            bound: None,
        }
    }

    pub fn holder(alpha: T) -> Result<Self> {
        if !(alpha > T::zero() && alpha < T::one()) {
            return Err(Error::invalid(format!(
                "holder exponent must lie in (0,1), got {alpha}"
            )));
        }
        Ok(Modulus {
            kind: ModulusKind::Holder { alpha },
            bound: None,
        })
    }

    /// Concave piecewise-linear modulus through the origin and `knots`.
    pub fn pwl(knots: Vec<(T, T)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::invalid(
                "piecewise-linear modulus needs at least one knot",
            ));
        }
        let mut prev = (T::zero(), T::zero());
        let mut prev_slope = T::infinity();
        for &(t, w) in &knots {
            if !(t.is_finite() && w.is_finite()) || t <= prev.0 || w <= prev.1 {
                return Err(Error::invalid(
                    "piecewise-linear knots must be finite and strictly increasing in t and w",
                ));
            }
            let slope = (w - prev.1) / (t - prev.0);
            if slope > prev_slope * (T::one() + T::rel_eps()) {
                return Err(Error::invalid(
                    "piecewise-linear modulus must be concave (nonincreasing slopes)",
                ));
            }
            prev_slope = slope;
            prev = (t, w);
        }
        Ok(Modulus {
            kind: ModulusKind::Pwl { knots },
            bound: None,
        })
    }

    /// Caps the modulus at β, making it bounded.
    pub fn with_bound(mut self, beta: T) -> Result<Self> {
        if !(beta > T::zero()) || beta.is_nan() {
            return Err(Error::invalid("modulus bound must be positive"));
        }
        self.bound = if beta.is_finite() { Some(beta) } else { None };
        Ok(self)
    }

    pub fn kind(&self) -> &ModulusKind<T> {
        &self.kind
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, ModulusKind::Linear) && self.bound.is_none()
    }

    /// Supremum β of ω; `+∞` for unbounded moduli.
    pub fn beta(&self) -> T {
        self.bound.unwrap_or_else(T::infinity)
    }

    fn base(&self, t: T) -> T {
        match &self.kind {
            ModulusKind::Linear => t,
            ModulusKind::Holder { alpha } => {
                if t == T::zero() {
                    T::zero()
                } else {
                    t.powf(*alpha)
                }
            }
            ModulusKind::Pwl { knots } => {
                let mut prev = (T::zero(), T::zero());
                for &(kt, kw) in knots {
                    if t <= kt {
                        return prev.1 + (t - prev.0) * (kw - prev.1) / (kt - prev.0);
                    }
                    prev = (kt, kw);
                }
                let slope = last_slope(knots);
                prev.1 + (t - prev.0) * slope
            }
        }
    }

    fn base_inverse(&self, s: T) -> T {
        match &self.kind {
            ModulusKind::Linear => s,
            ModulusKind::Holder { alpha } => {
                if s == T::zero() {
                    T::zero()
                } else {
                    s.powf(T::one() / *alpha)
                }
            }
            ModulusKind::Pwl { knots } => {
                let mut prev = (T::zero(), T::zero());
                for &(kt, kw) in knots {
                    if s <= kw {
                        return prev.0 + (s - prev.1) * (kt - prev.0) / (kw - prev.1);
                    }
                    prev = (kt, kw);
                }
                prev.0 + (s - prev.1) / last_slope(knots)
            }
        }
    }

    /// ω(t) for t ≥ 0.
    pub fn eval(&self, t: T) -> Result<T> {
        if t < T::zero() || t.is_nan() {
            return Err(Error::invalid(format!(
                "modulus argument must be nonnegative, got {t}"
            )));
        }
        Ok(self.eval_unchecked(t))
    }

    /// ω(t) without the sign check; callers guarantee t ≥ 0.
    #[inline]
    pub fn eval_unchecked(&self, t: T) -> T {
        let v = self.base(t);
        match self.bound {
            Some(beta) => v.min(beta),
            None => v,
        }
    }

    /// ω⁻¹(s) for 0 ≤ s < β.
    pub fn inverse(&self, s: T) -> Result<T> {
        if s < T::zero() || s.is_nan() {
            return Err(Error::invalid(format!(
                "modulus inverse argument must be nonnegative, got {s}"
            )));
        }
        if let Some(beta) = self.bound {
            if s >= beta {
                return Err(Error::Domain {
                    value: s.as_f64(),
                    beta: beta.as_f64(),
                });
            }
        }
        Ok(self.base_inverse(s))
    }

    /// Parses the short CLI forms `linear` and `holder:α`.
    pub fn parse_short(spec: &str) -> Option<Result<Self>> {
        let spec = spec.trim();
        if spec.eq_ignore_ascii_case("linear") {
            return Some(Ok(Self::linear()));
        }
        let alpha = spec.strip_prefix("holder:")?;
        Some(
            alpha
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("bad holder exponent {alpha:?}: {e}")))
                .and_then(|a| Self::holder(T::lit(a))),
        )
    }
}

fn last_slope<T: Real>(knots: &[(T, T)]) -> T {
    let n = knots.len();
    let (t1, w1) = knots[n - 1];
    let (t0, w0) = if n >= 2 {
        knots[n - 2]
    } else {
        (T::zero(), T::zero())
    };
    (w1 - w0) / (t1 - t0)
}

/// JSON form: `{"kind": "linear"|"holder"|"pwl", "alpha": .., "knots": [[t, w], ..], "bound": ..}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulusSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

impl<T: Real> TryFrom<ModulusSpec> for Modulus<T> {
    type Error = Error;

    fn try_from(spec: ModulusSpec) -> Result<Self> {
        let base = match spec.kind.as_str() {
            "linear" => Modulus::linear(),
            "holder" => {
                let a = spec
                    .alpha
                    .ok_or_else(|| Error::invalid("holder modulus requires \"alpha\""))?;
                Modulus::holder(T::lit(a))?
            }
            "pwl" => {
                let knots = spec
                    .knots
                    .ok_or_else(|| Error::invalid("pwl modulus requires \"knots\""))?;
                Modulus::pwl(knots.iter().map(|k| (T::lit(k[0]), T::lit(k[1]))).collect())?
            }
            other => return Err(Error::invalid(format!("unknown modulus kind {other:?}"))),
        };
        match spec.bound {
            Some(b) => base.with_bound(T::lit(b)),
            None => Ok(base),
        }
    }
}

impl<T: Real> From<&Modulus<T>> for ModulusSpec {
    fn from(m: &Modulus<T>) -> Self {
        let bound = m.bound.map(|b| b.as_f64());
        match &m.kind {
            ModulusKind::Linear => ModulusSpec {
                kind: "linear".into(),
                alpha: None,
                knots: None,
                bound,
            },
            ModulusKind::Holder { alpha } => ModulusSpec {
                kind: "holder".into(),
                alpha: Some(alpha.as_f64()),
                knots: None,
                bound,
            },
            ModulusKind::Pwl { knots } => ModulusSpec {
                kind: "pwl".into(),
                alpha: None,
                knots: Some(
                    knots
                        .iter()
                        .map(|&(t, w)| [t.as_f64(), w.as_f64()])
                        .collect(),
                ),
                bound,
            },
        }
    }
}

impl<T: Real> Serialize for Modulus<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModulusSpec::from(self).serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for Modulus<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = ModulusSpec::deserialize(d)?;
        Modulus::try_from(spec).map_err(serde::de::Error::custom)
    }
}
