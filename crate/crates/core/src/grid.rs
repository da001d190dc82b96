//! Discretized one-degree-of-freedom phase space.
//!
//! Node convention: cell midpoints, `x_i = x_min + (i + ½)·dx` and
//! `p_k = p_min + (k + ½)·dp`. Every [`GridFunction`] additionally carries
//! samples on the half-nodes `x_i + dx/2` between consecutive x nodes (the
//! "fine" x axis with `2·n_x − 1` rows, even rows are the nodes). The Weyl
//! kernel evaluates its argument at `(x + x′)/2`, which lands on exactly
//! these points, so no interpolation is ever needed on the forward map.
//!
//! Quadrature is the midpoint rule over node rows only.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::{cabs, cfinite, creal, from_usize, lit, to_f64, Complex, Real};

/// Reduced Planck constant used as the deformation parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationParams<T> {
    pub hbar: T,
}

impl<T: Real> QuantizationParams<T> {
    pub fn new(hbar: T) -> Result<Self> {
        if !(hbar.is_finite() && hbar > T::zero()) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { hbar })
    }

    /// `2πħ`, the phase-space cell area.
    pub fn cell(&self) -> T {
        T::two_pi() * self.hbar
    }
}

/// Uniform rectangular box in `(x, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid<T> {
    x_min: T,
    x_max: T,
    n_x: usize,
    p_min: T,
    p_max: T,
    n_p: usize,
    dx: T,
    dp: T,
}

impl<T: Real> PhaseSpaceGrid<T> {
    pub fn new(x_min: T, x_max: T, n_x: usize, p_min: T, p_max: T, n_p: usize) -> Result<Self> {
        for (name, v) in [("x_min", x_min), ("x_max", x_max), ("p_min", p_min), ("p_max", p_max)] {
            if !v.is_finite() {
                return Err(Error::InvalidGrid(format!("{name} is not finite")));
            }
        }
        if n_x < 2 || n_p < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points per axis, got n_x = {n_x}, n_p = {n_p}"
            )));
        }
        if x_max <= x_min {
            return Err(Error::InvalidGrid(format!("inverted x interval [{x_min}, {x_max}]")));
        }
        if p_max <= p_min {
            return Err(Error::InvalidGrid(format!("inverted p interval [{p_min}, {p_max}]")));
        }
        Ok(Self {
            x_min,
            x_max,
            n_x,
            p_min,
            p_max,
            n_p,
            dx: (x_max - x_min) / from_usize(n_x),
            dp: (p_max - p_min) / from_usize(n_p),
        })
    }

    /// Grid whose momentum box is matched to the position sampling:
    /// `p ∈ [−πħ/dx, πħ/dx]` with `n_p = 2·n_x` points, so that
    /// `dx·dp = 2πħ / n_p`. On such a grid the discrete Weyl transform of a
    /// constant is exactly `identity / dx` and kernel traces agree with
    /// phase-space traces to round-off.
    pub fn matched(x_min: T, x_max: T, n_x: usize, q: QuantizationParams<T>) -> Result<Self> {
        if n_x < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 x points, got {n_x}")));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGrid(format!("invalid x interval [{x_min}, {x_max}]")));
        }
        let dx = (x_max - x_min) / from_usize(n_x);
        let half = T::pi() * q.hbar / dx;
        Self::new(x_min, x_max, n_x, -half, half, 2 * n_x)
    }

    pub fn x_min(&self) -> T {
        self.x_min
    }
    pub fn x_max(&self) -> T {
        self.x_max
    }
    pub fn p_min(&self) -> T {
        self.p_min
    }
    pub fn p_max(&self) -> T {
        self.p_max
    }
    pub fn n_x(&self) -> usize {
        self.n_x
    }
    pub fn n_p(&self) -> usize {
        self.n_p
    }
    pub fn dx(&self) -> T {
        self.dx
    }
    pub fn dp(&self) -> T {
        self.dp
    }
    /// Number of rows on the fine x axis (nodes plus half-nodes).
    pub fn n_fine(&self) -> usize {
        2 * self.n_x - 1
    }

    pub fn x(&self, i: usize) -> T {
        self.x_min + (from_usize::<T>(i) + lit(0.5)) * self.dx
    }

    /// Position of fine row `r`; even rows are nodes, odd rows half-nodes.
    pub fn x_fine(&self, r: usize) -> T {
        self.x_min + from_usize::<T>(r + 1) * self.dx * lit(0.5)
    }

    pub fn p(&self, k: usize) -> T {
        self.p_min + (from_usize::<T>(k) + lit(0.5)) * self.dp
    }

    pub fn x_nodes(&self) -> Vec<T> {
        (0..self.n_x).map(|i| self.x(i)).collect()
    }

    pub fn p_nodes(&self) -> Vec<T> {
        (0..self.n_p).map(|k| self.p(k)).collect()
    }

    pub fn area(&self) -> T {
        (self.x_max - self.x_min) * (self.p_max - self.p_min)
    }

    /// `dx·(p_max − p_min) / 2πħ`; equals 1 on a matched grid.
    pub fn band_ratio(&self, q: QuantizationParams<T>) -> T {
        self.dx * (self.p_max - self.p_min) / q.cell()
    }

    /// True when the momentum box exactly covers the band resolvable by the
    /// x sampling and is fine enough to separate every kernel offset.
    pub fn is_matched(&self, q: QuantizationParams<T>) -> bool {
        let r = to_f64(self.band_ratio(q));
        (r - 1.0).abs() < 1e-9 && self.n_p >= 2 * self.n_x - 1
    }

    /// Same box scaled about its centre by `factor`, with the same spacings
    /// (node counts rounded to the nearest integer).
    pub fn scaled(&self, factor: T) -> Result<Self> {
        let cx = (self.x_min + self.x_max) * lit(0.5);
        let cp = (self.p_min + self.p_max) * lit(0.5);
        let nx = (to_f64(from_usize::<T>(self.n_x) * factor)).round() as usize;
        let np = (to_f64(from_usize::<T>(self.n_p) * factor)).round() as usize;
        let hx = from_usize::<T>(nx) * self.dx * lit(0.5);
        let hp = from_usize::<T>(np) * self.dp * lit(0.5);
        Self::new(cx - hx, cx + hx, nx, cp - hp, cp + hp, np)
    }
}

/// Complex samples of a phase-space function on the fine x axis times the
/// p axis. Immutable once built; all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T: Real> {
    grid: PhaseSpaceGrid<T>,
    fine: DMatrix<Complex<T>>,
}

impl<T: Real> GridFunction<T> {
    /// Wrap fine-axis samples, checking shape and finiteness.
    pub fn from_fine(grid: &PhaseSpaceGrid<T>, fine: DMatrix<Complex<T>>) -> Result<Self> {
        let expected = (grid.n_fine(), grid.n_p());
        if fine.shape() != expected {
            return Err(Error::ShapeMismatch { expected, found: fine.shape() });
        }
        for r in 0..expected.0 {
            for k in 0..expected.1 {
                if !cfinite(fine[(r, k)]) {
                    return Err(Error::NonFiniteSample {
                        x: to_f64(grid.x_fine(r)),
                        p: to_f64(grid.p(k)),
                    });
                }
            }
        }
        Ok(Self { grid: grid.clone(), fine })
    }

    pub(crate) fn from_fine_unchecked(grid: &PhaseSpaceGrid<T>, fine: DMatrix<Complex<T>>) -> Self {
        debug_assert_eq!(fine.shape(), (grid.n_fine(), grid.n_p()));
        Self { grid: grid.clone(), fine }
    }

    pub fn constant(grid: &PhaseSpaceGrid<T>, c: Complex<T>) -> Self {
        Self::from_fine_unchecked(grid, DMatrix::from_element(grid.n_fine(), grid.n_p(), c))
    }

    pub fn grid(&self) -> &PhaseSpaceGrid<T> {
        &self.grid
    }

    /// Samples on the fine x axis (rows) times p (columns).
    pub fn fine(&self) -> &DMatrix<Complex<T>> {
        &self.fine
    }

    pub fn into_fine(self) -> DMatrix<Complex<T>> {
        self.fine
    }

    /// Value at x node `i`, p node `k`.
    pub fn at(&self, i: usize, k: usize) -> Complex<T> {
        self.fine[(2 * i, k)]
    }

    /// Node samples as an `n_x × n_p` matrix.
    pub fn values(&self) -> DMatrix<Complex<T>> {
        DMatrix::from_fn(self.grid.n_x(), self.grid.n_p(), |i, k| self.at(i, k))
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self::from_fine_unchecked(&self.grid, self.fine.map(f))
    }

    pub fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>,
    ) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self::from_fine_unchecked(&self.grid, self.fine.zip_map(&other.fine, f)))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise (commutative) product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        self.map(|v| v * c)
    }

    pub fn scale_real(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Max-norm over node samples.
    pub fn max_abs(&self) -> T {
        self.node_fold(|acc, v| acc.max(cabs(v)))
    }

    /// Max-norm of the difference over node samples.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.check_same_grid(other)?;
        let mut m = T::zero();
        for i in 0..self.grid.n_x() {
            for k in 0..self.grid.n_p() {
                m = m.max(cabs(self.at(i, k) - other.at(i, k)));
            }
        }
        Ok(m)
    }

    /// Largest |Im| over node samples.
    pub fn max_imag_abs(&self) -> T {
        self.node_fold(|acc, v| acc.max(v.im.abs()))
    }

    /// Smallest real part over node samples.
    pub fn min_real(&self) -> T {
        let mut m = self.at(0, 0).re;
        for i in 0..self.grid.n_x() {
            for k in 0..self.grid.n_p() {
                m = m.min(self.at(i, k).re);
            }
        }
        m
    }

    fn node_fold(&self, f: impl Fn(T, Complex<T>) -> T) -> T {
        let mut acc = T::zero();
        for i in 0..self.grid.n_x() {
            for k in 0..self.grid.n_p() {
                acc = f(acc, self.at(i, k));
            }
        }
        acc
    }
}

/// Sample `f` on every fine-axis row and every p node.
pub fn sample<T: Real>(
    grid: &PhaseSpaceGrid<T>,
    f: impl Fn(T, T) -> Complex<T>,
) -> Result<GridFunction<T>> {
    let mut fine = DMatrix::from_element(grid.n_fine(), grid.n_p(), creal(T::zero()));
    for r in 0..grid.n_fine() {
        let x = grid.x_fine(r);
        for k in 0..grid.n_p() {
            let p = grid.p(k);
            let v = f(x, p);
            if !cfinite(v) {
                return Err(Error::NonFiniteSample { x: to_f64(x), p: to_f64(p) });
            }
            fine[(r, k)] = v;
        }
    }
    Ok(GridFunction::from_fine_unchecked(grid, fine))
}

/// [`sample`] for real-valued maps.
pub fn sample_real<T: Real>(
    grid: &PhaseSpaceGrid<T>,
    f: impl Fn(T, T) -> T,
) -> Result<GridFunction<T>> {
    sample(grid, |x, p| creal(f(x, p)))
}

/// Midpoint-rule approximation of `∫∫ f dx dp` over the box.
pub fn integrate<T: Real>(f: &GridFunction<T>) -> Complex<T> {
    let g = f.grid();
    let mut s = creal(T::zero());
    for i in 0..g.n_x() {
        for k in 0..g.n_p() {
            s += f.at(i, k);
        }
    }
    s * (g.dx() * g.dp())
}

/// Midpoint rule restricted to the centred sub-box whose side lengths are
/// `fraction` of the full box (nodes with centres inside it).
pub fn integrate_inner<T: Real>(f: &GridFunction<T>, fraction: T) -> Complex<T> {
    let g = f.grid();
    let cx = (g.x_min() + g.x_max()) * lit(0.5);
    let cp = (g.p_min() + g.p_max()) * lit(0.5);
    let hx = (g.x_max() - g.x_min()) * fraction * lit(0.5);
    let hp = (g.p_max() - g.p_min()) * fraction * lit(0.5);
    let mut s = creal(T::zero());
    for i in 0..g.n_x() {
        if (g.x(i) - cx).abs() > hx {
            continue;
        }
        for k in 0..g.n_p() {
            if (g.p(k) - cp).abs() <= hp {
                s += f.at(i, k);
            }
        }
    }
    s * (g.dx() * g.dp())
}

/// `(1/2πħ) ∫∫ f dx dp`.
pub fn phase_space_trace<T: Real>(f: &GridFunction<T>, q: QuantizationParams<T>) -> Complex<T> {
    integrate(f) / q.cell()
}
