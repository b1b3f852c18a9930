use std::fmt;
use std::sync::Arc;

use crate::numerics::special::ln_beta;
use crate::numerics::{integrate_singular, QuadOptions};
use crate::{invalid, Result};

/// Point mass of a [`LambdaMeasure`] at `location` in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Shape of an absolutely continuous component.
#[derive(Clone)]
pub enum DensityShape {
    /// The `Beta(2 - alpha, alpha)` probability density, `alpha` in `(0, 2)`.
    /// `alpha = 1` is the uniform density.
    Beta { alpha: f64 },
    /// User density behaving like `x^left_exponent` near 0 and
    /// `(1-x)^right_exponent` near 1.
    Custom {
        f: DensityFn,
        left_exponent: f64,
        right_exponent: f64,
        regular_variation_index: Option<f64>,
        label: String,
    },
}

impl fmt::Debug for DensityShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityShape::Beta { alpha } => write!(f, "Beta(2-{alpha}, {alpha})"),
            DensityShape::Custom {
                label,
                left_exponent,
                right_exponent,
                regular_variation_index,
                ..
            } => f
                .debug_struct("Custom")
                .field("label", label)
                .field("left_exponent", left_exponent)
                .field("right_exponent", right_exponent)
                .field("regular_variation_index", regular_variation_index)
                .finish(),
        }
    }
}

/// `weight * shape(x) dx` on `(0, 1)`.
#[derive(Debug, Clone)]
pub struct DensityComponent {
    weight: f64,
    shape: DensityShape,
    mass: f64,
    ln_norm: f64,
}

impl DensityComponent {
    pub fn beta(alpha: f64, weight: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(invalid(format!(
                "beta parameter must lie in (0, 2), got {alpha}"
            )));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(invalid("weight must be positive"));
        }
        Ok(Self {
            weight,
            shape: DensityShape::Beta { alpha },
            mass: weight,
            ln_norm: ln_beta(2.0 - alpha, alpha),
        })
    }

    pub fn custom(
        f: DensityFn,
        left_exponent: f64,
        right_exponent: f64,
        regular_variation_index: Option<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if left_exponent <= -1.0 || right_exponent <= -1.0 {
            return Err(invalid("density must be integrable at both endpoints"));
        }
        let total = integrate_singular(
            |x| f(x),
            0.0,
            1.0,
            left_exponent,
            right_exponent,
            QuadOptions::new(1e-12),
        )?
        .value;
        if !(total > 0.0 && total.is_finite()) {
            return Err(invalid(format!("density integrates to {total}")));
        }
        Ok(Self {
            weight: 1.0,
            shape: DensityShape::Custom {
                f,
                left_exponent,
                right_exponent,
                regular_variation_index,
                label: label.into(),
            },
            mass: total,
            ln_norm: 0.0,
        })
    }

    pub fn shape(&self) -> &DensityShape {
        &self.shape
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Total mass of the component.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_split(x, 1.0 - x)
    }

    /// Density at `x` given `1 - x` separately, for accuracy next to 1.
    pub fn eval_split(&self, x: f64, one_minus_x: f64) -> f64 {
        if !(x > 0.0 && one_minus_x > 0.0) {
            return 0.0;
        }
        match &self.shape {
            DensityShape::Beta { alpha } => {
                let a = *alpha;
                self.weight
                    * ((1.0 - a) * x.ln() + (a - 1.0) * one_minus_x.ln() - self.ln_norm).exp()
            }
            DensityShape::Custom { f, .. } => self.weight * f(x),
        }
    }

    pub fn left_exponent(&self) -> f64 {
        match &self.shape {
            DensityShape::Beta { alpha } => 1.0 - alpha,
            DensityShape::Custom { left_exponent, .. } => *left_exponent,
        }
    }

    pub fn right_exponent(&self) -> f64 {
        match &self.shape {
            DensityShape::Beta { alpha } => alpha - 1.0,
            DensityShape::Custom { right_exponent, .. } => *right_exponent,
        }
    }

    /// Index `alpha` such that the density behaves like `x^{1-alpha}` at 0,
    /// when known.
    pub fn regular_variation_index(&self) -> Option<f64> {
        match &self.shape {
            DensityShape::Beta { alpha } => Some(*alpha),
            DensityShape::Custom {
                regular_variation_index,
                ..
            } => *regular_variation_index,
        }
    }

    /// `ln B(2 - alpha, alpha)` for beta components.
    pub(crate) fn ln_norm(&self) -> f64 {
        self.ln_norm
    }

    fn scaled(&self, c: f64) -> Self {
        Self {
            weight: self.weight * c,
            mass: self.mass * c,
            ..self.clone()
        }
    }

    fn label(&self) -> String {
        let base = match &self.shape {
            DensityShape::Beta { alpha } if *alpha == 1.0 => "bs".to_string(),
            DensityShape::Beta { alpha } => format!("beta:{alpha}"),
            DensityShape::Custom { label, .. } => label.clone(),
        };
        if self.weight == 1.0 {
            base
        } else {
            format!("{base}*{}", self.weight)
        }
    }
}

/// A finite measure on `[0, 1]`: an atom at 0 (`kingman_mass`), atoms in
/// `(0, 1]` and absolutely continuous components.
#[derive(Debug, Clone)]
pub struct LambdaMeasure {
    kingman_mass: f64,
    atoms: Vec<Atom>,
    densities: Vec<DensityComponent>,
}

/// A single additive piece of a measure.
#[derive(Debug, Clone, Copy)]
pub enum Component<'a> {
    Kingman(f64),
    Atom(Atom),
    Density(&'a DensityComponent),
}

impl LambdaMeasure {
    pub fn new(
        kingman_mass: f64,
        atoms: Vec<Atom>,
        densities: Vec<DensityComponent>,
    ) -> Result<Self> {
        if !(kingman_mass >= 0.0 && kingman_mass.is_finite()) {
            return Err(invalid("kingman mass must be finite and nonnegative"));
        }
        for a in &atoms {
            if !(a.location > 0.0 && a.location <= 1.0) {
                return Err(invalid(format!(
                    "atom location {} outside (0, 1]",
                    a.location
                )));
            }
            if !(a.mass > 0.0 && a.mass.is_finite()) {
                return Err(invalid("atom masses must be positive"));
            }
        }
        let m = Self {
            kingman_mass,
            atoms,
            densities,
        };
        if !(m.total_mass() > 0.0) {
            return Err(invalid("measure has zero total mass"));
        }
        Ok(m)
    }

    /// `delta_0`.
    pub fn kingman() -> Self {
        Self {
            kingman_mass: 1.0,
            atoms: vec![],
            densities: vec![],
        }
    }

    /// Uniform measure on `(0, 1)`.
    pub fn bolthausen_sznitman() -> Self {
        Self::beta(1.0).expect("alpha = 1 is valid")
    }

    /// `Beta(2 - alpha, alpha)` probability measure.
    pub fn beta(alpha: f64) -> Result<Self> {
        Ok(Self {
            kingman_mass: 0.0,
            atoms: vec![],
            densities: vec![DensityComponent::beta(alpha, 1.0)?],
        })
    }

    /// Unit point mass at `p` in `(0, 1]`.
    pub fn dirac(p: f64) -> Result<Self> {
        Self::new(
            0.0,
            vec![Atom {
                location: p,
                mass: 1.0,
            }],
            vec![],
        )
    }

    pub fn custom(density: DensityComponent) -> Self {
        Self {
            kingman_mass: 0.0,
            atoms: vec![],
            densities: vec![density],
        }
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("scale must be positive"));
        }
        Ok(Self {
            kingman_mass: self.kingman_mass * c,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    location: a.location,
                    mass: a.mass * c,
                })
                .collect(),
            densities: self.densities.iter().map(|d| d.scaled(c)).collect(),
        })
    }

    /// Sum of two measures. Atoms at equal locations are combined.
    pub fn plus(&self, other: &Self) -> Self {
        let mut atoms = self.atoms.clone();
        for a in &other.atoms {
            match atoms.iter_mut().find(|b| b.location == a.location) {
                Some(b) => b.mass += a.mass,
                None => atoms.push(*a),
            }
        }
        let mut densities = self.densities.clone();
        densities.extend(other.densities.iter().cloned());
        Self {
            kingman_mass: self.kingman_mass + other.kingman_mass,
            atoms,
            densities,
        }
    }

    pub fn kingman_mass(&self) -> f64 {
        self.kingman_mass
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn densities(&self) -> &[DensityComponent] {
        &self.densities
    }

    pub fn components(&self) -> impl Iterator<Item = Component<'_>> {
        let k = (self.kingman_mass > 0.0).then_some(Component::Kingman(self.kingman_mass));
        k.into_iter()
            .chain(self.atoms.iter().map(|a| Component::Atom(*a)))
            .chain(self.densities.iter().map(Component::Density))
    }

    /// `Lambda([0, 1])`.
    pub fn total_mass(&self) -> f64 {
        self.kingman_mass
            + self.atoms.iter().map(|a| a.mass).sum::<f64>()
            + self.densities.iter().map(|d| d.mass()).sum::<f64>()
    }

    /// `Lambda([0, x])`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(invalid("x must lie in [0, 1]"));
        }
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| a.location <= x)
            .map(|a| a.mass)
            .sum();
        let mut dens = 0.0;
        if x > 0.0 {
            for d in &self.densities {
                dens += if x == 1.0 {
                    d.mass()
                } else {
                    integrate_singular(
                        |y| d.eval(y),
                        0.0,
                        x,
                        d.left_exponent(),
                        0.0,
                        QuadOptions::new(1e-12),
                    )?
                    .value
                };
            }
        }
        Ok(self.kingman_mass + atoms + dens)
    }

    /// Mass of the atom at 1.
    pub fn mass_at_one(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.location == 1.0)
            .map(|a| a.mass)
            .sum()
    }

    /// True when every merger involves all blocks.
    pub fn is_star(&self) -> bool {
        self.kingman_mass == 0.0
            && self.densities.is_empty()
            && self.atoms.iter().all(|a| a.location == 1.0)
    }

    /// Density part evaluated at `x` in `(0, 1)`.
    pub fn density_at(&self, x: f64) -> f64 {
        self.density_at_split(x, 1.0 - x)
    }

    /// Density part at `x` given `1 - x` separately.
    pub fn density_at_split(&self, x: f64, one_minus_x: f64) -> f64 {
        self.densities
            .iter()
            .map(|d| d.eval_split(x, one_minus_x))
            .sum()
    }

    /// Short description in the measure grammar where possible.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.kingman_mass > 0.0 {
            parts.push(if self.kingman_mass == 1.0 {
                "kingman".to_string()
            } else {
                format!("kingman*{}", self.kingman_mass)
            });
        }
        for a in &self.atoms {
            parts.push(if a.mass == 1.0 {
                format!("dirac:{}", a.location)
            } else {
                format!("dirac:{}*{}", a.location, a.mass)
            });
        }
        parts.extend(self.densities.iter().map(|d| d.label()));
        if parts.len() == 1 {
            parts.pop().unwrap_or_default()
        } else {
            format!("mix:{}", parts.join("+"))
        }
    }
}
