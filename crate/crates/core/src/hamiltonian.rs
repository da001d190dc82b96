//! Hamiltonian symbols `H(x, p)` for the supported model families.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{sample_real, GridFunction, PhaseSpaceGrid};
use crate::scalar::{lit, Real};
use crate::star::{DampingParams, SeriesOrder, StarProduct};

pub type SymbolFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

#[derive(Clone)]
pub enum HamiltonianSpec<T> {
    /// `p²/2m`
    Free { mass: T },
    /// `p²/2m + mω²x²/2`
    Harmonic { mass: T, omega: T },
    /// `p² + x` (mass absorbed)
    Linear,
    /// `a p² + b x² + 2c x p`
    Quadratic { a: T, b: T, c: T },
    /// Harmonic symbol evolved with the γ-deformed product.
    Damped { mass: T, omega: T, gamma: T },
    Custom { name: String, symbol: SymbolFn<T> },
}

impl<T: fmt::Debug> fmt::Debug for HamiltonianSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Free { mass } => f.debug_struct("Free").field("mass", mass).finish(),
            Self::Harmonic { mass, omega } => {
                f.debug_struct("Harmonic").field("mass", mass).field("omega", omega).finish()
            }
            Self::Linear => f.write_str("Linear"),
            Self::Quadratic { a, b, c } => {
                f.debug_struct("Quadratic").field("a", a).field("b", b).field("c", c).finish()
            }
            Self::Damped { mass, omega, gamma } => f
                .debug_struct("Damped")
                .field("mass", mass)
                .field("omega", omega)
                .field("gamma", gamma)
                .finish(),
            Self::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish(),
        }
    }
}

/// Sign class of `ab − c²` for the quadratic family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadraticClass {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

fn positive<T: Real>(name: &str, v: T) -> Result<()> {
    if v.is_finite() && v > T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn finite<T: Real>(name: &str, v: T) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")))
    }
}

impl<T: Real> HamiltonianSpec<T> {
    pub fn free(mass: T) -> Result<Self> {
        positive("mass", mass)?;
        Ok(Self::Free { mass })
    }

    pub fn harmonic(mass: T, omega: T) -> Result<Self> {
        positive("mass", mass)?;
        positive("omega", omega)?;
        Ok(Self::Harmonic { mass, omega })
    }

    pub fn linear() -> Self {
        Self::Linear
    }

    pub fn quadratic(a: T, b: T, c: T) -> Result<Self> {
        finite("a", a)?;
        finite("b", b)?;
        finite("c", c)?;
        Ok(Self::Quadratic { a, b, c })
    }

    pub fn damped(mass: T, omega: T, gamma: T) -> Result<Self> {
        positive("mass", mass)?;
        positive("omega", omega)?;
        DampingParams::new(gamma, mass)?;
        Ok(Self::Damped { mass, omega, gamma })
    }

    pub fn custom(name: impl Into<String>, symbol: impl Fn(T, T) -> T + Send + Sync + 'static) -> Self {
        Self::Custom { name: name.into(), symbol: Arc::new(symbol) }
    }

    pub fn family_name(&self) -> &str {
        match self {
            Self::Free { .. } => "free",
            Self::Harmonic { .. } => "harmonic",
            Self::Linear => "linear",
            Self::Quadratic { .. } => "quadratic",
            Self::Damped { .. } => "damped",
            Self::Custom { .. } => "custom",
        }
    }

    pub fn eval(&self, x: T, p: T) -> T {
        let half = lit::<T>(0.5);
        match self {
            Self::Free { mass } => p * p * half / *mass,
            Self::Harmonic { mass, omega } | Self::Damped { mass, omega, .. } => {
                p * p * half / *mass + half * *mass * *omega * *omega * x * x
            }
            Self::Linear => p * p + x,
            Self::Quadratic { a, b, c } => *a * p * p + *b * x * x + lit::<T>(2.0) * *c * x * p,
            Self::Custom { symbol, .. } => symbol(x, p),
        }
    }

    pub fn sample(&self, grid: &PhaseSpaceGrid<T>) -> Result<GridFunction<T>> {
        sample_real(grid, |x, p| self.eval(x, p))
    }

    /// Total polynomial degree of the symbol, if it is a polynomial.
    pub fn polynomial_degree(&self) -> Option<usize> {
        match self {
            Self::Custom { .. } => None,
            _ => Some(2),
        }
    }

    pub fn damping(&self) -> Option<DampingParams<T>> {
        match self {
            Self::Damped { mass, gamma, .. } => Some(DampingParams { gamma: *gamma, mass: *mass }),
            _ => None,
        }
    }

    /// `ab − c²` for the quadratic family, or its equivalent for the
    /// harmonic-type families (`ω²/4`).
    pub fn discriminant(&self) -> Option<T> {
        let quarter = lit::<T>(0.25);
        match self {
            Self::Quadratic { a, b, c } => Some(*a * *b - *c * *c),
            Self::Harmonic { omega, .. } | Self::Damped { omega, .. } => Some(*omega * *omega * quarter),
            Self::Free { .. } => Some(T::zero()),
            _ => None,
        }
    }

    pub fn quadratic_class(&self) -> Option<QuadraticClass> {
        if !matches!(self, Self::Quadratic { .. }) {
            return None;
        }
        let d = self.discriminant()?;
        Some(if d > T::zero() {
            QuadraticClass::Elliptic
        } else if d < T::zero() {
            QuadraticClass::Hyperbolic
        } else {
            QuadraticClass::Parabolic
        })
    }

    /// Product that evolves this family: ⋆_γ for the damped oscillator, the
    /// Moyal product otherwise. `order` only matters for the series products.
    pub fn star_product(&self, kernel: bool, order: SeriesOrder) -> StarProduct<T> {
        match (self.damping(), kernel) {
            (Some(d), _) => StarProduct::Gamma(d, order),
            (None, true) => StarProduct::Kernel,
            (None, false) => StarProduct::Series(order),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation() {
        let h = HamiltonianSpec::<f64>::harmonic(2.0, 3.0).unwrap();
        assert!((h.eval(1.0, 2.0) - (1.0 + 9.0)).abs() < 1e-14);
        let q = HamiltonianSpec::<f64>::quadratic(1.0, 4.0, 1.0).unwrap();
        assert!((q.eval(1.0, 1.0) - 7.0).abs() < 1e-14);
        assert_eq!(HamiltonianSpec::<f64>::linear().eval(3.0, 2.0), 7.0);
        let c = HamiltonianSpec::custom("quartic", |x: f64, p: f64| x.powi(4) + p * p);
        assert_eq!(c.eval(2.0, 1.0), 17.0);
        assert_eq!(format!("{c:?}"), "Custom { name: \"quartic\" }");
    }

    #[test]
    fn validation() {
        assert!(HamiltonianSpec::free(0.0).is_err());
        assert!(HamiltonianSpec::harmonic(1.0, -1.0).is_err());
        assert!(HamiltonianSpec::damped(1.0, 1.0, -0.1).is_err());
        assert!(HamiltonianSpec::quadratic(f64::NAN, 1.0, 0.0).is_err());
    }

    #[test]
    fn classes() {
        let cls = |a, b, c| HamiltonianSpec::quadratic(a, b, c).unwrap().quadratic_class().unwrap();
        assert_eq!(cls(1.0, 1.0, 0.0), QuadraticClass::Elliptic);
        assert_eq!(cls(1.0, 1.0, 1.0), QuadraticClass::Parabolic);
        assert_eq!(cls(1.0, -1.0, 0.0), QuadraticClass::Hyperbolic);
        let h = HamiltonianSpec::harmonic(1.0, 2.0).unwrap();
        assert_eq!(h.discriminant(), Some(1.0));
    }

    #[test]
    fn damped_uses_gamma_product() {
        let d = HamiltonianSpec::damped(1.0, 1.0, 0.1).unwrap();
        assert!(matches!(d.star_product(true, SeriesOrder::new(2)), StarProduct::Gamma(..)));
        let h = HamiltonianSpec::<f64>::linear();
        assert_eq!(h.star_product(true, SeriesOrder::new(2)), StarProduct::Kernel);
    }
}
