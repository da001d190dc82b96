//! Weyl quantization as an integral-kernel transform, its inverse (the
//! Wigner transform), and the matrix algebra of kernels.
//!
//! A kernel is stored as the `n_x × n_x` matrix `K[i][j] ≈ κ(x_i, x_j)`.
//! Operators act by `∫ κ(x, y) ψ(y) dy`, so composition is a matrix product
//! weighted by `dx` and the identity operator is `identity / dx`.
//!
//! Forward map:
//! `K[i][j] = (dp / 2πħ) Σ_k f((x_i + x_j)/2, p_k) e^{i p_k (x_i − x_j)/ħ}`,
//! where the midpoint is fine row `i + j` of the sampled function.
//!
//! Inverse map:
//! `A(x, p) = dx Σ_d κ(x − d·dx/2, x + d·dx/2) e^{i p d dx/ħ}`.
//! For a node row and even `d`, or a half-node row and odd `d`, both
//! arguments are x nodes. Otherwise both are half-nodes, and the kernel is
//! evaluated there by band-limited (trigonometric) interpolation,
//! `κ(x_a + dx/2, x_b + dx/2) = (S κ S†)[a][b]`, with `S` the unitary
//! half-sample shift.
//!
//! On a matched grid (see [`PhaseSpaceGrid::matched`]) the p sums are exact
//! discrete Fourier transforms: the constant function maps to
//! `identity / dx`, and `kernel_trace(K) = phase_space_trace(inverse_weyl(K))`
//! to round-off for every `K`.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, PhaseSpaceGrid, QuantizationParams};
use crate::scalar::{cabs, cexp, cis, creal, from_usize, lit, to_f64, Complex, Real};

/// Non-fatal issues detected while building a kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelWarning {
    /// `dx·(p_max − p_min)/2πħ` differs from 1: below 1 the momentum band of
    /// the x sampling is truncated, above 1 the phase `e^{ip(x−x′)/ħ}` is
    /// under-resolved at large offsets.
    UnmatchedBand { ratio: f64 },
    /// Too few p nodes to separate all `2·n_x − 1` kernel offsets.
    OffsetAliasing { n_p: usize, needed: usize },
    /// The function has not decayed at the p edges (relative magnitude).
    EdgeNotDecayed { relative: f64 },
}

/// Complex matrix `κ(x_i, x_j)` of a Weyl-quantized operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorKernel<T: Real> {
    grid: PhaseSpaceGrid<T>,
    q: QuantizationParams<T>,
    values: DMatrix<Complex<T>>,
    warnings: Vec<KernelWarning>,
}

impl<T: Real> OperatorKernel<T> {
    pub fn from_matrix(
        grid: &PhaseSpaceGrid<T>,
        q: QuantizationParams<T>,
        values: DMatrix<Complex<T>>,
    ) -> Result<Self> {
        let n = grid.n_x();
        if values.shape() != (n, n) {
            return Err(Error::ShapeMismatch { expected: (n, n), found: values.shape() });
        }
        Ok(Self { grid: grid.clone(), q, values, warnings: Vec::new() })
    }

    /// Kernel of the identity operator, `identity / dx`.
    pub fn identity(grid: &PhaseSpaceGrid<T>, q: QuantizationParams<T>) -> Self {
        let n = grid.n_x();
        let v = DMatrix::from_diagonal_element(n, n, creal(T::one() / grid.dx()));
        Self { grid: grid.clone(), q, values: v, warnings: Vec::new() }
    }

    pub fn grid(&self) -> &PhaseSpaceGrid<T> {
        &self.grid
    }
    pub fn params(&self) -> QuantizationParams<T> {
        self.q
    }
    pub fn values(&self) -> &DMatrix<Complex<T>> {
        &self.values
    }
    pub fn into_values(self) -> DMatrix<Complex<T>> {
        self.values
    }
    pub fn warnings(&self) -> &[KernelWarning] {
        &self.warnings
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        Self { values: &self.values * c, ..self.clone() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self { values: &self.values + &other.values, ..self.clone() })
    }

    /// `‖(K − K†)/2‖_F / ‖K‖_F` (zero for the zero kernel).
    pub fn antihermitian_norm(&self) -> T {
        let total = self.values.norm();
        if total == T::zero() {
            return T::zero();
        }
        let anti = (&self.values - self.values.adjoint()) * creal(lit::<T>(0.5));
        anti.norm() / total
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.antihermitian_norm() <= tol
    }

    /// `(K + K†)/2` together with the discarded relative anti-Hermitian norm.
    pub fn hermitized(&self) -> (Self, T) {
        let r = self.antihermitian_norm();
        let h = (&self.values + self.values.adjoint()) * creal(lit::<T>(0.5));
        (Self { values: h, ..self.clone() }, r)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.q != other.q {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Write the kernel as CSV rows `i,j,re,im`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "i,j,re,im")?;
        for i in 0..self.values.nrows() {
            for j in 0..self.values.ncols() {
                let v = self.values[(i, j)];
                writeln!(w, "{i},{j},{:.11e},{:.11e}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// `e^{i p_k d dx / ħ}` for offsets `d ∈ [−(n_x−1), n_x−1]`, row `d + n_x − 1`.
fn phase_table<T: Real>(grid: &PhaseSpaceGrid<T>, q: QuantizationParams<T>) -> DMatrix<Complex<T>> {
    let n = grid.n_x() as isize;
    DMatrix::from_fn((2 * n - 1) as usize, grid.n_p(), |row, k| {
        let d = row as isize - (n - 1);
        let d: T = lit(d as f64);
        cis(grid.p(k) * d * grid.dx() / q.hbar)
    })
}

fn band_warnings<T: Real>(grid: &PhaseSpaceGrid<T>, q: QuantizationParams<T>) -> Vec<KernelWarning> {
    let mut w = Vec::new();
    let ratio = to_f64(grid.band_ratio(q));
    if (ratio - 1.0).abs() > 1e-9 {
        w.push(KernelWarning::UnmatchedBand { ratio });
    }
    let needed = 2 * grid.n_x() - 1;
    if grid.n_p() < needed {
        w.push(KernelWarning::OffsetAliasing { n_p: grid.n_p(), needed });
    }
    w
}

/// Discrete Weyl map `f ↦ κ_f`.
pub fn weyl_kernel<T: Real>(f: &GridFunction<T>, q: QuantizationParams<T>) -> OperatorKernel<T> {
    let grid = f.grid();
    let n = grid.n_x();
    let np = grid.n_p();
    let data = f.fine();
    let ph = phase_table(grid, q);
    let w = grid.dp() / q.cell();
    let mut values = DMatrix::from_element(n, n, creal(T::zero()));
    for i in 0..n {
        for j in 0..n {
            let r = i + j;
            let drow = i + n - 1 - j; // offset i − j
            let mut acc = creal(T::zero());
            for k in 0..np {
                acc += data[(r, k)] * ph[(drow, k)];
            }
            values[(i, j)] = acc * w;
        }
    }
    let mut warnings = band_warnings(grid, q);
    let peak = f.max_abs();
    if peak > T::zero() {
        let mut edge = T::zero();
        for r in 0..grid.n_fine() {
            edge = edge.max(cabs(data[(r, 0)])).max(cabs(data[(r, np - 1)]));
        }
        let rel = to_f64(edge / peak);
        if rel > 1e-6 {
            warnings.push(KernelWarning::EdgeNotDecayed { relative: rel });
        }
    }
    OperatorKernel { grid: grid.clone(), q, values, warnings }
}

/// Unitary shift by half a sample, `(Sψ)_a = ψ(x_a + dx/2)` for
/// trigonometric interpolation on `n` points.
fn half_shift<T: Real>(n: usize) -> DMatrix<Complex<T>> {
    let nn: T = from_usize(n);
    // symmetric frequency set for odd n, [−n/2, n/2) for even n
    let lo = -((n / 2) as isize);
    let hi = lo + n as isize;
    DMatrix::from_fn(n, n, |a, b| {
        let t = from_usize::<T>(a) - from_usize::<T>(b) + lit(0.5);
        let mut acc = creal(T::zero());
        for l in lo..hi {
            acc += cis(T::two_pi() * lit::<T>(l as f64) * t / nn);
        }
        acc / nn
    })
}

/// Kernel values at half-node pairs, `κ(x_a + dx/2, x_b + dx/2)`.
fn half_node_kernel<T: Real>(k: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    let s = half_shift::<T>(k.nrows());
    &s * k * s.adjoint()
}

/// Discrete Wigner map `κ ↦ A(x, p)` on the fine x axis.
pub fn inverse_weyl<T: Real>(kernel: &OperatorKernel<T>) -> GridFunction<T> {
    let grid = kernel.grid();
    let n = grid.n_x() as isize;
    let np = grid.n_p();
    let ph = phase_table(grid, kernel.params());
    let k_nodes = kernel.values();
    let k_half = half_node_kernel(k_nodes);
    let dx = grid.dx();
    let mut out = DMatrix::from_element(grid.n_fine(), np, creal(T::zero()));
    let mut row_terms: Vec<(usize, Complex<T>)> = Vec::with_capacity((2 * n) as usize);
    for r in 0..grid.n_fine() as isize {
        row_terms.clear();
        // offsets d with (r − d) and (r + d) inside the index range
        for d in -(n - 1)..=(n - 1) {
            let lo = r - d;
            let hi = r + d;
            let v = if lo.rem_euclid(2) == 0 {
                let (a, b) = (lo / 2, hi / 2);
                if a < 0 || b < 0 || a >= n || b >= n {
                    continue;
                }
                k_nodes[(a as usize, b as usize)]
            } else {
                let (a, b) = ((lo - 1).div_euclid(2), (hi - 1).div_euclid(2));
                if a < 0 || b < 0 || a >= n || b >= n {
                    continue;
                }
                k_half[(a as usize, b as usize)]
            };
            row_terms.push(((d + n - 1) as usize, v));
        }
        for k in 0..np {
            let mut acc = creal(T::zero());
            for &(drow, v) in &row_terms {
                acc += v * ph[(drow, k)];
            }
            out[(r as usize, k)] = acc * dx;
        }
    }
    GridFunction::from_fine_unchecked(grid, out)
}

/// Operator composition `(AB)(x, x′) = ∫ A(x, y) B(y, x′) dy`.
pub fn kernel_multiply<T: Real>(
    a: &OperatorKernel<T>,
    b: &OperatorKernel<T>,
) -> Result<OperatorKernel<T>> {
    a.check_compatible(b)?;
    let values = (&a.values * &b.values) * creal(a.grid.dx());
    Ok(OperatorKernel { grid: a.grid.clone(), q: a.q, values, warnings: Vec::new() })
}

/// `Σ_i κ(x_i, x_i) dx`.
pub fn kernel_trace<T: Real>(k: &OperatorKernel<T>) -> Complex<T> {
    k.values.trace() * k.grid.dx()
}

/// Relative anti-Hermitian norm above which [`kernel_exp`] refuses to run.
pub const HERMITIAN_TOL: f64 = 1e-8;

/// Eigendecomposition of the Hermitian operator matrix `K·dx`, reusable for
/// any number of exponentials `exp(s·Ĥ)`.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum<T: Real> {
    grid: PhaseSpaceGrid<T>,
    q: QuantizationParams<T>,
    eigenvalues: DVector<T>,
    eigenvectors: DMatrix<Complex<T>>,
    discarded: T,
}

impl<T: Real> HermitianSpectrum<T> {
    /// Hermitize `k` and diagonalize; errors if the anti-Hermitian part
    /// exceeds [`HERMITIAN_TOL`].
    pub fn new(k: &OperatorKernel<T>) -> Result<Self> {
        let (h, discarded) = k.hermitized();
        if to_f64(discarded) > HERMITIAN_TOL {
            return Err(Error::NonHermitian { relative_norm: to_f64(discarded) });
        }
        let m = h.values * creal(k.grid.dx());
        if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Eigensolver("non-finite matrix entries".into()));
        }
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("finite eigenvalues")
        });
        let eigenvalues = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
        let eigenvectors = DMatrix::from_fn(order.len(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Self { grid: k.grid.clone(), q: k.q, eigenvalues, eigenvectors, discarded })
    }

    /// Ascending eigenvalues of the operator.
    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.eigenvalues
    }

    /// Orthonormal (in ℂⁿ) eigenvectors, columns matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<Complex<T>> {
        &self.eigenvectors
    }

    /// Relative anti-Hermitian norm discarded by the symmetrization.
    pub fn discarded_norm(&self) -> T {
        self.discarded
    }

    /// Kernel of `exp(s·Ĥ)`.
    pub fn exp_kernel(&self, s: Complex<T>) -> OperatorKernel<T> {
        let v = &self.eigenvectors;
        let weights: Vec<Complex<T>> = self.eigenvalues.iter().map(|&l| cexp(s * l)).collect();
        let n = v.nrows();
        let scaled = DMatrix::from_fn(n, n, |r, c| v[(r, c)] * weights[c]);
        let values = (scaled * v.adjoint()) / creal(self.grid.dx());
        OperatorKernel { grid: self.grid.clone(), q: self.q, values, warnings: Vec::new() }
    }

    /// `Tr exp(s·Ĥ) = Σ_n e^{s λ_n}`.
    pub fn trace_exp(&self, s: Complex<T>) -> Complex<T> {
        self.eigenvalues.iter().fold(creal(T::zero()), |acc, &l| acc + cexp(s * l))
    }
}

/// Kernel of `exp(s·Ĥ)` for a Hermitian kernel `Ĥ`.
pub fn kernel_exp<T: Real>(h: &OperatorKernel<T>, s: Complex<T>) -> Result<OperatorKernel<T>> {
    Ok(HermitianSpectrum::new(h)?.exp_kernel(s))
}
