//! Moyal star product by the kernel route and the bidifferential series,
//! Poisson and Moyal brackets, and the γ-deformed product.
//!
//! Series convention:
//! `f⋆g = Σ_n (iħ/2)ⁿ/n! · Pⁿ(f, g)` with
//! `Pⁿ(f, g) = Σ_j C(n, j)(−1)ʲ ∂xⁿ⁻ʲ∂pʲ f · ∂pⁿ⁻ʲ∂xʲ g`.
//!
//! The γ-deformed bidifferential adds `c·∂p f·∂p g` with `c = −2γm`, whose
//! n-th power expands over `i + j + l = n` as
//! `n!/(i! j! l!) (−1)ʲ cˡ ∂xⁱ∂pʲ⁺ˡ f · ∂pⁱ⁺ˡ∂xʲ g`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, QuantizationParams};
use crate::scalar::{cplx, creal, from_usize, lit, Complex, Real};
use crate::stencil::{partial_table, Axis, DEFAULT_ACCURACY};
use crate::weyl::{inverse_weyl, kernel_multiply, weyl_kernel};

/// Highest power of ħ retained by the series routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesOrder {
    pub max_order: usize,
}

impl SeriesOrder {
    pub fn new(max_order: usize) -> Self {
        Self { max_order }
    }
}

/// Damping rate and mass of the γ-deformed product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingParams<T> {
    pub gamma: T,
    pub mass: T,
}

impl<T: Real> DampingParams<T> {
    pub fn new(gamma: T, mass: T) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= T::zero()) {
            return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {gamma}")));
        }
        if !(mass.is_finite() && mass > T::zero()) {
            return Err(Error::InvalidParameter(format!("mass must be > 0, got {mass}")));
        }
        Ok(Self { gamma, mass })
    }

    /// Coefficient of `∂p f·∂p g` in the deformed bracket, `−2γm`.
    pub fn coupling(&self) -> T {
        -lit::<T>(2.0) * self.gamma * self.mass
    }
}

/// How a star product is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StarProduct<T> {
    /// Weyl kernels, matrix product, inverse transform.
    Kernel,
    /// Truncated Moyal series.
    Series(SeriesOrder),
    /// Truncated γ-deformed series.
    Gamma(DampingParams<T>, SeriesOrder),
}

impl<T: Real> StarProduct<T> {
    pub fn apply(
        &self,
        f: &GridFunction<T>,
        g: &GridFunction<T>,
        q: QuantizationParams<T>,
    ) -> Result<GridFunction<T>> {
        match *self {
            StarProduct::Kernel => star_kernel_route(f, g, q),
            StarProduct::Series(order) => star_series(f, g, q, order),
            StarProduct::Gamma(d, order) => star_gamma(f, g, q, d, order),
        }
    }
}

/// `f⋆g = W⁻¹(W(f)·W(g))`.
pub fn star_kernel_route<T: Real>(
    f: &GridFunction<T>,
    g: &GridFunction<T>,
    q: QuantizationParams<T>,
) -> Result<GridFunction<T>> {
    f.check_same_grid(g)?;
    let k = kernel_multiply(&weyl_kernel(f, q), &weyl_kernel(g, q))?;
    Ok(inverse_weyl(&k))
}

/// Truncated Moyal series with the default stencil accuracy.
pub fn star_series<T: Real>(
    f: &GridFunction<T>,
    g: &GridFunction<T>,
    q: QuantizationParams<T>,
    order: SeriesOrder,
) -> Result<GridFunction<T>> {
    bidifferential_series(f, g, q, order, T::zero(), DEFAULT_ACCURACY)
}

/// Truncated Moyal series with an explicit stencil accuracy order.
pub fn star_series_with_accuracy<T: Real>(
    f: &GridFunction<T>,
    g: &GridFunction<T>,
    q: QuantizationParams<T>,
    order: SeriesOrder,
    accuracy: usize,
) -> Result<GridFunction<T>> {
    bidifferential_series(f, g, q, order, T::zero(), accuracy)
}

/// Truncated γ-deformed series.
pub fn star_gamma<T: Real>(
    f: &GridFunction<T>,
    g: &GridFunction<T>,
    q: QuantizationParams<T>,
    d: DampingParams<T>,
    order: SeriesOrder,
) -> Result<GridFunction<T>> {
    bidifferential_series(f, g, q, order, d.coupling(), DEFAULT_ACCURACY)
}

fn factorials<T: Real>(n: usize) -> Vec<T> {
    let mut out = vec![T::one(); n + 1];
    for i in 1..=n {
        out[i] = out[i - 1] * from_usize(i);
    }
    out
}

fn bidifferential_series<T: Real>(
    f: &GridFunction<T>,
    g: &GridFunction<T>,
    q: QuantizationParams<T>,
    order: SeriesOrder,
    c: T,
    accuracy: usize,
) -> Result<GridFunction<T>> {
    f.check_same_grid(g)?;
    let n_max = order.max_order;
    let df = partial_table(f, n_max, accuracy)?;
    let dg = partial_table(g, n_max, accuracy)?;
    let fact = factorials::<T>(n_max);
    let (rows, cols) = f.fine().shape();
    let mut acc = DMatrix::from_element(rows, cols, creal(T::zero()));
    // (iħ/2)ⁿ
    let mut h_pow = creal(T::one());
    let half_ih = cplx(T::zero(), q.hbar * lit(0.5));
    for n in 0..=n_max {
        let l_max = if c == T::zero() { 0 } else { n };
        for l in 0..=l_max {
            let c_pow = c.powi(l as i32);
            for j in 0..=(n - l) {
                let i = n - l - j;
                let sign = if j % 2 == 0 { T::one() } else { -T::one() };
                let coef = h_pow * (sign * c_pow / (fact[i] * fact[j] * fact[l]));
                let a = df[i][j + l].fine();
                let b = dg[j][i + l].fine();
                acc.zip_zip_apply(a, b, |s, x, y| *s += x * y * coef);
            }
        }
        h_pow *= half_ih;
    }
    Ok(GridFunction::from_fine_unchecked(f.grid(), acc))
}

/// `∂x f ∂p g − ∂p f ∂x g`.
pub fn poisson_bracket<T: Real>(f: &GridFunction<T>, g: &GridFunction<T>) -> Result<GridFunction<T>> {
    poisson_bracket_with_accuracy(f, g, DEFAULT_ACCURACY)
}

pub fn poisson_bracket_with_accuracy<T: Real>(
    f: &GridFunction<T>,
    g: &GridFunction<T>,
    accuracy: usize,
) -> Result<GridFunction<T>> {
    use crate::stencil::derivative;
    f.check_same_grid(g)?;
    let fx = derivative(f, Axis::X, 1, accuracy)?;
    let fp = derivative(f, Axis::P, 1, accuracy)?;
    let gx = derivative(g, Axis::X, 1, accuracy)?;
    let gp = derivative(g, Axis::P, 1, accuracy)?;
    fx.mul(&gp)?.sub(&fp.mul(&gx)?)
}

/// `(f⋆g − g⋆f)/iħ` with the chosen product.
pub fn moyal_bracket<T: Real>(
    f: &GridFunction<T>,
    g: &GridFunction<T>,
    q: QuantizationParams<T>,
    product: StarProduct<T>,
) -> Result<GridFunction<T>> {
    let fg = product.apply(f, g, q)?;
    let gf = product.apply(g, f, q)?;
    let inv = Complex::new(T::zero(), -T::one() / q.hbar);
    Ok(fg.sub(&gf)?.scale(inv))
}

/// Polynomial inputs use the series (which terminates), others the kernel route.
pub fn default_product<T: Real>(polynomial_degree: Option<usize>) -> StarProduct<T> {
    match polynomial_degree {
        Some(d) => StarProduct::Series(SeriesOrder::new(d)),
        None => StarProduct::Kernel,
    }
}
