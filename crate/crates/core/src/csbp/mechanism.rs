use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::lambda::{psi, LambdaMeasure};
use crate::{invalid, Result};

/// Closed-form branching mechanism supplied by the caller.
pub type PsiFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// What is known about `psi` at infinity, for deciding Grey's criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GreyHint {
    /// `∫^∞ dq/psi(q) < ∞`.
    Extinct,
    /// `∫^∞ dq/psi(q) = ∞`.
    Persists,
    /// `psi(q)` grows like `q^index`; undecided at index 1.
    GrowthIndex(f64),
}

#[derive(Clone)]
pub enum MechanismKind {
    /// `psi(q) = scale q^2 / 2`.
    Feller { scale: f64 },
    /// `psi(q) = q log q`.
    Neveu,
    /// `psi(q) = ∫ (e^{-qx} - 1 + qx) x^{-2} Lambda(dx)`.
    FromLambda(LambdaMeasure),
    Custom {
        label: String,
        f: PsiFn,
        hint: Option<GreyHint>,
    },
}

impl fmt::Debug for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MechanismKind::Feller { scale } => {
                f.debug_struct("Feller").field("scale", scale).finish()
            }
            MechanismKind::Neveu => f.write_str("Neveu"),
            MechanismKind::FromLambda(m) => f.debug_tuple("FromLambda").field(&m.label()).finish(),
            MechanismKind::Custom { label, hint, .. } => f
                .debug_struct("Custom")
                .field("label", label)
                .field("hint", hint)
                .finish(),
        }
    }
}

/// Branching mechanism `psi` of a continuous-state branching process.
#[derive(Debug, Clone)]
pub struct BranchingMechanism {
    kind: MechanismKind,
}

impl BranchingMechanism {
    /// Feller diffusion `dZ = sqrt(Z) dW`, i.e. `psi(q) = q^2 / 2`.
    pub fn feller() -> Self {
        Self {
            kind: MechanismKind::Feller { scale: 1.0 },
        }
    }

    /// `psi(q) = scale q^2 / 2`.
    pub fn feller_scaled(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("Feller scale must be positive"));
        }
        Ok(Self {
            kind: MechanismKind::Feller { scale },
        })
    }

    pub fn neveu() -> Self {
        Self {
            kind: MechanismKind::Neveu,
        }
    }

    pub fn from_lambda(m: LambdaMeasure) -> Self {
        Self {
            kind: MechanismKind::FromLambda(m),
        }
    }

    /// A closed-form `psi`, checked for `psi(0) = 0` and convexity on a
    /// geometric grid.
    pub fn custom(label: impl Into<String>, f: PsiFn, hint: Option<GreyHint>) -> Result<Self> {
        if f(0.0) != 0.0 {
            return Err(invalid("a branching mechanism must vanish at 0"));
        }
        let qs: Vec<f64> = (-20..=40).map(|k| 2f64.powf(k as f64 / 2.0)).collect();
        let vals: Vec<f64> = qs.iter().map(|q| f(*q)).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(invalid("psi must be finite on (0, ∞)"));
        }
        for i in 1..qs.len() - 1 {
            let chord = vals[i - 1]
                + (vals[i + 1] - vals[i - 1]) * (qs[i] - qs[i - 1]) / (qs[i + 1] - qs[i - 1]);
            let slack = 1e-9 * vals[i - 1].abs().max(vals[i + 1].abs());
            if vals[i] > chord + slack {
                return Err(invalid(format!("psi is not convex near q = {}", qs[i])));
            }
        }
        Ok(Self {
            kind: MechanismKind::Custom {
                label: label.into(),
                f,
                hint,
            },
        })
    }

    pub fn kind(&self) -> &MechanismKind {
        &self.kind
    }

    pub fn label(&self) -> String {
        match &self.kind {
            MechanismKind::Feller { scale } if *scale == 1.0 => "feller".into(),
            MechanismKind::Feller { scale } => format!("feller*{scale}"),
            MechanismKind::Neveu => "neveu".into(),
            MechanismKind::FromLambda(m) => format!("lambda({})", m.label()),
            MechanismKind::Custom { label, .. } => label.clone(),
        }
    }

    /// True when `psi` has a closed form (no quadrature behind it).
    pub fn is_closed_form(&self) -> bool {
        !matches!(self.kind, MechanismKind::FromLambda(_))
    }

    /// `psi(q)` for `q >= 0`.
    pub fn eval(&self, q: f64) -> Result<f64> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(invalid(format!("psi needs a finite q >= 0, got {q}")));
        }
        Ok(match &self.kind {
            MechanismKind::Feller { scale } => scale * q * q / 2.0,
            MechanismKind::Neveu if q == 0.0 => 0.0,
            MechanismKind::Neveu => q * q.ln(),
            MechanismKind::FromLambda(m) => psi(m, q)?,
            MechanismKind::Custom { f, .. } => f(q),
        })
    }
}
