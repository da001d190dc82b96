//! Star exponentials `Exp_⋆(s·H)` by four numerical routes, plus the
//! closed forms of the model families.
//!
//! Imaginary time uses `s = −τ/ħ`, real time `s = −it/ħ`; complex time
//! arguments follow the Wick convention `τ = it`.
//!
//! Moyal-product routes run in kernel space (matrices) and map back to phase
//! space once at the end; on matched grids this is identical to repeated
//! kernel-route star products. Series products (used for ⋆_γ) act directly
//! on grid functions.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, PhaseSpaceGrid, QuantizationParams};
use crate::hamiltonian::HamiltonianSpec;
use crate::scalar::{cabs, cexp, cfinite, cplx, creal, csqrt, from_usize, lit, to_f64, Complex, Real};
use crate::star::StarProduct;
use crate::weyl::{inverse_weyl, weyl_kernel, HermitianSpectrum, OperatorKernel};

/// Relative size of the last series term at which the sum is accepted.
pub const SERIES_CUTOFF: f64 = 1e-12;
/// Maximum number of series terms when no explicit count is given.
pub const SERIES_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeMode {
    Imaginary,
    Real,
}

/// Sample times for the ODE route.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionSchedule<T> {
    mode: TimeMode,
    samples: Vec<T>,
    substeps: usize,
}

impl<T: Real> EvolutionSchedule<T> {
    pub fn new(mode: TimeMode, samples: Vec<T>, substeps: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("schedule has no samples".into()));
        }
        if substeps == 0 {
            return Err(Error::InvalidParameter("substeps must be positive".into()));
        }
        if !samples.iter().all(|t| t.is_finite()) || samples[0] < T::zero() {
            return Err(Error::InvalidParameter("schedule times must be finite and non-negative".into()));
        }
        if samples.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("schedule times must be strictly increasing".into()));
        }
        Ok(Self { mode, samples, substeps })
    }

    /// `n` points from `start` to `end` in geometric progression.
    pub fn geometric(mode: TimeMode, start: T, end: T, n: usize, substeps: usize) -> Result<Self> {
        if !(start > T::zero() && end > start && n >= 2) {
            return Err(Error::InvalidParameter("geometric schedule needs 0 < start < end and n >= 2".into()));
        }
        let ratio = (end / start).ln() / from_usize::<T>(n - 1);
        let samples = (0..n).map(|i| start * (ratio * from_usize::<T>(i)).exp()).collect();
        Self::new(mode, samples, substeps)
    }

    /// `n` evenly spaced points from `start` to `end`.
    pub fn uniform(mode: TimeMode, start: T, end: T, n: usize, substeps: usize) -> Result<Self> {
        if !(end > start && n >= 2) {
            return Err(Error::InvalidParameter("uniform schedule needs start < end and n >= 2".into()));
        }
        let step = (end - start) / from_usize::<T>(n - 1);
        let samples = (0..n).map(|i| start + step * from_usize::<T>(i)).collect();
        Self::new(mode, samples, substeps)
    }

    pub fn mode(&self) -> TimeMode {
        self.mode
    }
    pub fn samples(&self) -> &[T] {
        &self.samples
    }
    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// Wick-convention complex time for a sample.
    pub fn complex_time(&self, t: T) -> Complex<T> {
        match self.mode {
            TimeMode::Imaginary => creal(t),
            TimeMode::Real => cplx(T::zero(), t),
        }
    }
}

/// `s = −τ/ħ` for complex time `τ`.
pub fn exponent<T: Real>(tau: Complex<T>, q: QuantizationParams<T>) -> Complex<T> {
    -tau / q.hbar
}

/// Element arithmetic shared by the series, squaring and ODE routes.
trait Algebra<T: Real> {
    type E: Clone;
    fn one(&self) -> Self::E;
    fn mul(&self, a: &Self::E, b: &Self::E) -> Result<Self::E>;
    /// `a·x + y`
    fn axpy(&self, a: Complex<T>, x: &Self::E, y: &Self::E) -> Self::E;
    fn scale(&self, a: Complex<T>, x: &Self::E) -> Self::E;
    fn norm(&self, x: &Self::E) -> T;
    fn finish(&self, x: &Self::E) -> GridFunction<T>;
}

struct KernelAlgebra<T: Real> {
    grid: PhaseSpaceGrid<T>,
    q: QuantizationParams<T>,
}

impl<T: Real> Algebra<T> for KernelAlgebra<T> {
    type E = DMatrix<Complex<T>>;
    fn one(&self) -> Self::E {
        OperatorKernel::identity(&self.grid, self.q).into_values()
    }
    fn mul(&self, a: &Self::E, b: &Self::E) -> Result<Self::E> {
        Ok((a * b) * creal(self.grid.dx()))
    }
    fn axpy(&self, a: Complex<T>, x: &Self::E, y: &Self::E) -> Self::E {
        x * a + y
    }
    fn scale(&self, a: Complex<T>, x: &Self::E) -> Self::E {
        x * a
    }
    fn norm(&self, x: &Self::E) -> T {
        // Frobenius norm of the operator matrix K·dx
        x.norm() * self.grid.dx()
    }
    fn finish(&self, x: &Self::E) -> GridFunction<T> {
        let k = OperatorKernel::from_matrix(&self.grid, self.q, x.clone()).expect("square kernel");
        inverse_weyl(&k)
    }
}

struct FunctionAlgebra<T: Real> {
    grid: PhaseSpaceGrid<T>,
    q: QuantizationParams<T>,
    product: StarProduct<T>,
}

impl<T: Real> Algebra<T> for FunctionAlgebra<T> {
    type E = GridFunction<T>;
    fn one(&self) -> Self::E {
        GridFunction::constant(&self.grid, creal(T::one()))
    }
    fn mul(&self, a: &Self::E, b: &Self::E) -> Result<Self::E> {
        self.product.apply(a, b, self.q)
    }
    fn axpy(&self, a: Complex<T>, x: &Self::E, y: &Self::E) -> Self::E {
        x.zip_with(y, |u, v| u * a + v).expect("same grid")
    }
    fn scale(&self, a: Complex<T>, x: &Self::E) -> Self::E {
        x.scale(a)
    }
    fn norm(&self, x: &Self::E) -> T {
        x.fine().iter().fold(T::zero(), |m, z| m.max(cabs(*z)))
    }
    fn finish(&self, x: &Self::E) -> GridFunction<T> {
        x.clone()
    }
}

/// Partial sum of the exponential series and its last-term diagnostic.
#[derive(Debug, Clone)]
pub struct SeriesExp<T: Real> {
    pub value: GridFunction<T>,
    pub terms: usize,
    /// Norm of the last added term relative to the partial sum.
    pub last_term: T,
}

fn series_in<T: Real, A: Algebra<T>>(
    alg: &A,
    h: &A::E,
    s: Complex<T>,
    n_terms: Option<usize>,
) -> Result<(A::E, usize, T)> {
    let mut sum = alg.one();
    let mut term = alg.one();
    let cap = n_terms.unwrap_or(SERIES_CAP).max(1);
    let mut rel = T::one();
    let mut used = 1;
    for n in 1..cap {
        let ht = alg.mul(h, &term)?;
        term = alg.scale(s / from_usize::<T>(n), &ht);
        sum = alg.axpy(creal(T::one()), &term, &sum);
        used = n + 1;
        let sn = alg.norm(&sum);
        rel = alg.norm(&term) / sn;
        if !sn.is_finite() || !rel.is_finite() {
            return Err(Error::SeriesDivergence { last_term: f64::INFINITY });
        }
        if n_terms.is_none() && rel < lit(SERIES_CUTOFF) {
            return Ok((sum, used, rel));
        }
    }
    if n_terms.is_none() {
        return Err(Error::SeriesDivergence { last_term: to_f64(rel) });
    }
    Ok((sum, used, rel))
}

/// Exponential series `Σ sⁿ H^{⋆n}/n!`.
///
/// With `n_terms = None` the sum runs until the last term falls below
/// [`SERIES_CUTOFF`] relative to the partial sum, and fails with
/// [`Error::SeriesDivergence`] if that does not happen within
/// [`SERIES_CAP`] terms. With `Some(n)` exactly `n` terms are summed.
pub fn star_exp_series<T: Real>(
    h: &GridFunction<T>,
    q: QuantizationParams<T>,
    s: Complex<T>,
    n_terms: Option<usize>,
    product: StarProduct<T>,
) -> Result<SeriesExp<T>> {
    let grid = h.grid().clone();
    let (value, terms, last_term) = match product {
        StarProduct::Kernel => {
            let alg = KernelAlgebra { grid, q };
            let hk = weyl_kernel(h, q).into_values();
            let (e, n, r) = series_in(&alg, &hk, s, n_terms)?;
            (alg.finish(&e), n, r)
        }
        _ => {
            let alg = FunctionAlgebra { grid, q, product };
            let (e, n, r) = series_in(&alg, h, s, n_terms)?;
            (e, n, r)
        }
    };
    Ok(SeriesExp { value, terms, last_term })
}

fn squaring_in<T: Real, A: Algebra<T>>(alg: &A, h: &A::E, s: Complex<T>, k: usize) -> Result<A::E> {
    let scale: T = lit(0.5f64.powi(k as i32));
    let (mut e, _, _) = series_in(alg, h, s * scale, None)?;
    for _ in 0..k {
        e = alg.mul(&e, &e)?;
    }
    Ok(e)
}

/// Number of squarings that brings `|s|·‖Ĥ‖` below one half.
pub fn squaring_steps<T: Real>(h: &GridFunction<T>, q: QuantizationParams<T>, s: Complex<T>) -> usize {
    let hk = weyl_kernel(h, q);
    let norm = to_f64(hk.values().norm() * h.grid().dx());
    let x = to_f64(cabs(s)) * norm;
    if x <= 0.5 {
        0
    } else {
        (x / 0.5).log2().ceil() as usize
    }
}

/// Series at `s/2ᵏ` followed by `k` star-squarings (`None` picks `k`).
pub fn star_exp_squaring<T: Real>(
    h: &GridFunction<T>,
    q: QuantizationParams<T>,
    s: Complex<T>,
    k: Option<usize>,
    product: StarProduct<T>,
) -> Result<GridFunction<T>> {
    let k = k.unwrap_or_else(|| squaring_steps(h, q, s));
    let grid = h.grid().clone();
    match product {
        StarProduct::Kernel => {
            let alg = KernelAlgebra { grid, q };
            let hk = weyl_kernel(h, q).into_values();
            Ok(alg.finish(&squaring_in(&alg, &hk, s, k)?))
        }
        _ => {
            let alg = FunctionAlgebra { grid, q, product };
            squaring_in(&alg, h, s, k)
        }
    }
}

/// `inverse_weyl(exp(s·weyl_kernel(H)))` via Hermitian eigendecomposition.
pub fn star_exp_kernel<T: Real>(
    h: &GridFunction<T>,
    q: QuantizationParams<T>,
    s: Complex<T>,
) -> Result<GridFunction<T>> {
    let spec = HermitianSpectrum::new(&weyl_kernel(h, q))?;
    Ok(inverse_weyl(&spec.exp_kernel(s)))
}

/// Settings for [`star_exp_ode`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions<T> {
    /// Norm beyond which the integration is declared blown up.
    pub blowup_norm: T,
    /// Re-run the first interval with doubled substeps and report the change.
    pub step_halving: bool,
}

impl<T: Real> Default for OdeOptions<T> {
    fn default() -> Self {
        Self { blowup_norm: lit(1e12), step_halving: true }
    }
}

/// Output of [`star_exp_ode`]; on failure `values` holds the samples
/// reached before the error.
#[derive(Debug, Clone)]
pub struct OdeRun<T: Real> {
    pub times: Vec<T>,
    pub values: Vec<GridFunction<T>>,
    pub failure: Option<Error>,
    /// Relative change of the first nonzero sample under step halving.
    pub step_halving: Option<T>,
}

struct Rk4<'a, T: Real, A: Algebra<T>> {
    alg: &'a A,
    h: &'a A::E,
    /// `dE/dt = rate · H⋆E`
    rate: Complex<T>,
}

impl<T: Real, A: Algebra<T>> Rk4<'_, T, A> {
    fn rhs(&self, e: &A::E) -> Result<A::E> {
        Ok(self.alg.scale(self.rate, &self.alg.mul(self.h, e)?))
    }

    fn step(&self, e: &A::E, dt: T) -> Result<A::E> {
        let half = creal(dt * lit(0.5));
        let full = creal(dt);
        let k1 = self.rhs(e)?;
        let k2 = self.rhs(&self.alg.axpy(half, &k1, e))?;
        let k3 = self.rhs(&self.alg.axpy(half, &k2, e))?;
        let k4 = self.rhs(&self.alg.axpy(full, &k3, e))?;
        let sixth = creal(dt / lit(6.0));
        let third = creal(dt / lit(3.0));
        let mut out = self.alg.axpy(sixth, &k1, e);
        out = self.alg.axpy(third, &k2, &out);
        out = self.alg.axpy(third, &k3, &out);
        Ok(self.alg.axpy(sixth, &k4, &out))
    }

    fn advance(&self, e: &A::E, from: T, to: T, substeps: usize) -> Result<A::E> {
        let dt = (to - from) / from_usize::<T>(substeps);
        let mut cur = e.clone();
        for _ in 0..substeps {
            cur = self.step(&cur, dt)?;
        }
        Ok(cur)
    }
}

fn ode_in<T: Real, A: Algebra<T>>(
    alg: &A,
    h: &A::E,
    q: QuantizationParams<T>,
    schedule: &EvolutionSchedule<T>,
    opts: OdeOptions<T>,
) -> OdeRun<T> {
    let rate = match schedule.mode() {
        TimeMode::Imaginary => creal(-T::one() / q.hbar),
        TimeMode::Real => cplx(T::zero(), -T::one() / q.hbar),
    };
    let rk = Rk4 { alg, h, rate };
    let mut run = OdeRun { times: Vec::new(), values: Vec::new(), failure: None, step_halving: None };
    let mut e = alg.one();
    let mut t = T::zero();
    for &target in schedule.samples() {
        if target > t {
            match rk.advance(&e, t, target, schedule.substeps()) {
                Ok(next) => {
                    if opts.step_halving && run.step_halving.is_none() {
                        if let Ok(fine) = rk.advance(&e, t, target, 2 * schedule.substeps()) {
                            let d = alg.norm(&alg.axpy(creal(-T::one()), &fine, &next));
                            run.step_halving = Some(d / alg.norm(&fine));
                        }
                    }
                    e = next;
                }
                Err(err) => {
                    run.failure = Some(err);
                    return run;
                }
            }
            t = target;
        }
        let n = alg.norm(&e);
        if !n.is_finite() || n > opts.blowup_norm {
            run.failure = Some(Error::BlowUp { time: to_f64(target), norm: to_f64(n) });
            return run;
        }
        run.times.push(target);
        run.values.push(alg.finish(&e));
    }
    run
}

/// RK4 integration of `∂_τE = −(1/ħ)H⋆E` (or `∂_tE = −(i/ħ)H⋆E`), `E(0) = 1`,
/// sampled at the schedule times.
pub fn star_exp_ode<T: Real>(
    h: &GridFunction<T>,
    q: QuantizationParams<T>,
    schedule: &EvolutionSchedule<T>,
    product: StarProduct<T>,
    opts: OdeOptions<T>,
) -> OdeRun<T> {
    let grid = h.grid().clone();
    match product {
        StarProduct::Kernel => {
            let alg = KernelAlgebra { grid, q };
            let hk = weyl_kernel(h, q).into_values();
            ode_in(&alg, &hk, q, schedule, opts)
        }
        _ => {
            let alg = FunctionAlgebra { grid, q, product };
            ode_in(&alg, h, q, schedule, opts)
        }
    }
}

// Overflow-free hyperbolic functions for large |Re z|.

fn e_neg2<T: Real>(z: Complex<T>) -> (Complex<T>, T) {
    // returns (e^{−2|z|'}, sign) with z' = sign·z, Re z' ≥ 0
    let sign = if z.re >= T::zero() { T::one() } else { -T::one() };
    (cexp(z * lit::<T>(-2.0) * sign), sign)
}

fn ctanh_stable<T: Real>(z: Complex<T>) -> Complex<T> {
    let (e, sign) = e_neg2(z);
    let one = creal(T::one());
    (one - e) / (one + e) * sign
}

fn csech_stable<T: Real>(z: Complex<T>) -> Complex<T> {
    let sign = if z.re >= T::zero() { T::one() } else { -T::one() };
    let zp = z * sign;
    cexp(-zp) * lit::<T>(2.0) / (creal(T::one()) + cexp(zp * lit::<T>(-2.0)))
}

fn ccsch_stable<T: Real>(z: Complex<T>) -> Complex<T> {
    let sign = if z.re >= T::zero() { T::one() } else { -T::one() };
    let zp = z * sign;
    cexp(-zp) * lit::<T>(2.0) / (creal(T::one()) - cexp(zp * lit::<T>(-2.0))) * sign
}

fn singular_guard<T: Real>(den: Complex<T>, tau: Complex<T>, what: &str) -> Result<()> {
    if !cfinite(den) || cabs(den) < lit(1e-300) {
        return Err(Error::Singular { time: to_f64(cabs(tau)), reason: what.into() });
    }
    Ok(())
}

/// Quadratic-family factors `(sech(rτ), tanh(rτ)/r)` with `r = √(ab − c²)`.
fn quadratic_factors<T: Real>(delta: T, tau: Complex<T>) -> Result<(Complex<T>, Complex<T>)> {
    if delta == T::zero() {
        return Ok((creal(T::one()), tau));
    }
    let r = csqrt(creal(delta));
    let z = r * tau;
    let sech = csech_stable(z);
    // cosh(z) = 0 shows up as a non-finite sech
    if !cfinite(sech) || cabs(sech) > lit(1e12) {
        return Err(Error::Singular { time: to_f64(cabs(tau)), reason: "cosh(√(ab−c²)·τ) = 0".into() });
    }
    Ok((sech, ctanh_stable(z) / r))
}

/// Damped-family factors: prefactor and the two quadratic coefficients
/// `(pre, A, B)` with `E = pre·exp(−A x² − B p²)`.
fn damped_factors<T: Real>(
    mass: T,
    omega: T,
    gamma: T,
    q: QuantizationParams<T>,
    tau: Complex<T>,
) -> Result<(Complex<T>, Complex<T>, Complex<T>)> {
    let half = lit::<T>(0.5);
    let z = tau * (omega * half);
    let sech = csech_stable(z);
    if !cfinite(sech) || cabs(sech) > lit(1e12) {
        return Err(Error::Singular { time: to_f64(cabs(tau)), reason: "cos(ωt/2) = 0".into() });
    }
    let th = ctanh_stable(z);
    let d = creal(T::one()) - cplx(T::zero(), lit::<T>(2.0) * gamma / omega) * th;
    singular_guard(d, tau, "1 − (2iγ/ω)·tanh(ωτ/2) = 0")?;
    let pre = cexp(cplx(T::zero(), -gamma * half) * tau) * sech / csqrt(d);
    let k = th / (q.hbar * omega);
    let a = k * (mass * omega * omega);
    let b = k / (d * mass);
    Ok((pre, a, b))
}

/// Closed-form star exponential `Exp_⋆(−τH/ħ)` sampled on `grid`.
pub fn closed_form<T: Real>(
    spec: &HamiltonianSpec<T>,
    q: QuantizationParams<T>,
    grid: &PhaseSpaceGrid<T>,
    tau: Complex<T>,
) -> Result<GridFunction<T>> {
    let hb = q.hbar;
    match spec {
        HamiltonianSpec::Free { .. }
        | HamiltonianSpec::Harmonic { .. }
        | HamiltonianSpec::Quadratic { .. } => {
            let delta = spec.discriminant().expect("quadratic-type family");
            let (pre, k) = quadratic_factors(delta, tau)?;
            crate::grid::sample(grid, |x, p| pre * cexp(-k * spec.eval(x, p) / hb))
        }
        HamiltonianSpec::Linear => {
            let twelfth = lit::<T>(1.0 / 12.0);
            crate::grid::sample(grid, |x, p| {
                cexp(-tau / hb * (creal(x + p * p) - tau * tau * twelfth))
            })
        }
        HamiltonianSpec::Damped { mass, omega, gamma } => {
            let (pre, a, b) = damped_factors(*mass, *omega, *gamma, q, tau)?;
            crate::grid::sample(grid, |x, p| pre * cexp(-(a * (x * x) + b * (p * p))))
        }
        HamiltonianSpec::Custom { name, .. } => {
            Err(Error::Unsupported(format!("no closed form for custom Hamiltonian '{name}'")))
        }
    }
}

/// Closed-form partition trace `(1/2πħ)∫Exp_⋆(−τH/ħ) dx dp` over all of
/// phase space, for the families where it is finite.
pub fn closed_form_trace<T: Real>(spec: &HamiltonianSpec<T>, tau: Complex<T>) -> Result<Complex<T>> {
    let half = lit::<T>(0.5);
    match spec {
        HamiltonianSpec::Harmonic { .. } | HamiltonianSpec::Quadratic { .. } => {
            let delta = spec.discriminant().expect("quadratic-type family");
            if delta <= T::zero() {
                return Err(Error::Unsupported("trace diverges unless ab − c² > 0".into()));
            }
            let z = tau * delta.sqrt();
            singular_guard(z, tau, "trace diverges at τ = 0")?;
            Ok(ccsch_stable(z) * half)
        }
        HamiltonianSpec::Damped { omega, gamma, .. } => {
            let z = tau * (*omega * half);
            singular_guard(z, tau, "trace diverges at τ = 0")?;
            Ok(cexp(cplx(T::zero(), -*gamma * half) * tau) * ccsch_stable(z) * half)
        }
        _ => Err(Error::Unsupported(format!(
            "the {} family has no finite phase-space trace",
            spec.family_name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{phase_space_trace, sample_real};
    use crate::star::{star_gamma, star_series, DampingParams, SeriesOrder};

    fn q(h: f64) -> QuantizationParams<f64> {
        QuantizationParams::new(h).unwrap()
    }

    fn ho() -> HamiltonianSpec<f64> {
        HamiltonianSpec::harmonic(1.0, 1.0).unwrap()
    }

    fn core_diff(a: &GridFunction<f64>, b: &GridFunction<f64>, half_width: f64) -> f64 {
        let g = a.grid();
        let mut m: f64 = 0.0;
        for i in 0..g.n_x() {
            for k in 0..g.n_p() {
                if g.x(i).abs() <= half_width && g.p(k).abs() <= half_width {
                    m = m.max((a.at(i, k) - b.at(i, k)).norm());
                }
            }
        }
        m
    }

    #[test]
    fn schedule_validation() {
        assert!(EvolutionSchedule::new(TimeMode::Imaginary, vec![0.0, 1.0, 1.0], 1).is_err());
        assert!(EvolutionSchedule::new(TimeMode::Imaginary, vec![-1.0, 1.0], 1).is_err());
        assert!(EvolutionSchedule::<f64>::new(TimeMode::Imaginary, vec![], 1).is_err());
        assert!(EvolutionSchedule::new(TimeMode::Real, vec![0.5], 0).is_err());
        let g = EvolutionSchedule::<f64>::geometric(TimeMode::Imaginary, 0.5, 16.0, 6, 1).unwrap();
        assert!((g.samples()[5] - 16.0).abs() < 1e-12);
        assert!((g.samples()[1] / g.samples()[0] - 2.0).abs() < 1e-12);
        let u = EvolutionSchedule::uniform(TimeMode::Real, 0.0, 1.0, 5, 2).unwrap();
        assert_eq!(u.samples(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(u.complex_time(0.5), cplx(0.0, 0.5));
    }

    #[test]
    fn zero_exponent_gives_one() {
        let qq = q(1.0);
        let g = PhaseSpaceGrid::matched(-5.0, 5.0, 24, qq).unwrap();
        let h = ho().sample(&g).unwrap();
        let one = GridFunction::constant(&g, creal(1.0));
        let z = creal(0.0);
        let s = star_exp_series(&h, qq, z, None, StarProduct::Kernel).unwrap();
        assert!(s.value.max_abs_diff(&one).unwrap() < 1e-8);
        assert!(star_exp_kernel(&h, qq, z).unwrap().max_abs_diff(&one).unwrap() < 1e-8);
        assert!(star_exp_squaring(&h, qq, z, Some(3), StarProduct::Kernel).unwrap().max_abs_diff(&one).unwrap() < 1e-8);
        for spec in [ho(), HamiltonianSpec::linear(), HamiltonianSpec::damped(1.0, 1.0, 0.2).unwrap()] {
            let c = closed_form(&spec, qq, &g, z).unwrap();
            assert!(c.max_abs_diff(&one).unwrap() < 1e-14);
        }
    }

    #[test]
    fn two_terms_is_first_order() {
        let qq = q(1.0);
        let g = PhaseSpaceGrid::matched(-7.0, 7.0, 40, qq).unwrap();
        let h = sample_real(&g, |x, p| (-x * x - p * p).exp() * (3.0 + x)).unwrap();
        let s = cplx(-0.7, 0.1);
        let e = star_exp_series(&h, qq, s, Some(2), StarProduct::Kernel).unwrap();
        let expect = h.scale(s).map(|z| z + creal(1.0));
        assert!(e.value.max_abs_diff(&expect).unwrap() < 1e-8, "{}", e.value.max_abs_diff(&expect).unwrap());
        assert_eq!(e.terms, 2);
    }

    #[test]
    fn divergence_is_reported() {
        let qq = q(1.0);
        let g = PhaseSpaceGrid::matched(-8.0, 8.0, 32, qq).unwrap();
        let h = ho().sample(&g).unwrap();
        let err = star_exp_series(&h, qq, creal(-20.0), None, StarProduct::Kernel).unwrap_err();
        assert!(matches!(err, Error::SeriesDivergence { .. }), "{err:?}");
    }

    #[test]
    fn free_particle_series_is_pointwise() {
        let qq = q(1.0);
        let g = PhaseSpaceGrid::new(-3.0, 3.0, 16, -4.0, 4.0, 32).unwrap();
        let spec = HamiltonianSpec::free(1.5).unwrap();
        let h = spec.sample(&g).unwrap();
        for tau in [0.05, 0.2] {
            let e = star_exp_series(&h, qq, creal(-tau), None, StarProduct::Series(SeriesOrder::new(2))).unwrap();
            let exact = sample_real(&g, |_, p| (-tau * p * p / 3.0).exp()).unwrap();
            assert!(e.value.max_abs_diff(&exact).unwrap() < 1e-8);
        }
    }

    #[test]
    fn harmonic_closed_form_values() {
        let qq = q(1.0);
        let g = PhaseSpaceGrid::new(-1.0, 1.0, 2, -1.0, 1.0, 2).unwrap();
        let e = closed_form(&ho(), qq, &g, creal(1.0)).unwrap();
        // H(±0.5, ±0.5) = 0.25; value sech(0.5)·exp(−0.5·tanh(0.5))
        let expect = (1.0 / 0.5f64.cosh()) * (-0.5 * 0.5f64.tanh()).exp();
        assert!((e.at(0, 0).re - expect).abs() < 1e-14);
        let origin = PhaseSpaceGrid::new(-1.5, 1.5, 3, -1.5, 1.5, 3).unwrap();
        let e0 = closed_form(&ho(), qq, &origin, creal(1.0)).unwrap();
        assert!((e0.at(1, 1).re - 0.886819).abs() < 1e-6);
    }

    #[test]
    fn quadratic_reduces_to_harmonic() {
        let qq = q(0.8);
        let (m, w): (f64, f64) = (1.3, 1.7);
        let g = PhaseSpaceGrid::new(-3.0, 3.0, 12, -3.0, 3.0, 12).unwrap();
        let quad = HamiltonianSpec::<f64>::quadratic(0.5 / m, 0.5 * m * w * w, 0.0).unwrap();
        let harm = HamiltonianSpec::harmonic(m, w).unwrap();
        assert!((quad.discriminant().unwrap().sqrt() - w / 2.0).abs() < 1e-14);
        for tau in [cplx(0.7, 0.0), cplx(0.0, 0.9), cplx(2.0, 0.3)] {
            let a = closed_form(&quad, qq, &g, tau).unwrap();
            let b = closed_form(&harm, qq, &g, tau).unwrap();
            assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
        }
    }

    #[test]
    fn real_time_caustic_is_an_error() {
        let qq = q(1.0);
        let g = PhaseSpaceGrid::new(-1.0, 1.0, 2, -1.0, 1.0, 2).unwrap();
        // cos(ωt/2) = 0 at t = π for ω = 1
        let tau = cplx(0.0, std::f64::consts::PI);
        assert!(matches!(closed_form(&ho(), qq, &g, tau), Err(Error::Singular { .. })));
        let d = HamiltonianSpec::damped(1.0, 1.0, 0.1).unwrap();
        assert!(matches!(closed_form(&d, qq, &g, tau), Err(Error::Singular { .. })));
    }

    #[test]
    fn closed_form_traces() {
        let t = closed_form_trace(&ho(), creal(2.0)).unwrap();
        assert!((t.re - 0.5 / 1.0f64.sinh()).abs() < 1e-14);
        let big = closed_form_trace(&ho(), creal(1400.0)).unwrap();
        assert!(big.re.is_finite() && big.re > 0.0);
        let d = HamiltonianSpec::damped(1.0, 2.0, 0.2).unwrap();
        let z = closed_form_trace(&d, creal(3.0)).unwrap();
        let expect = cexp(cplx(0.0, -0.3)) * (0.5 / 3.0f64.sinh());
        assert!((z - expect).norm() < 1e-14);
        assert!(closed_form_trace(&HamiltonianSpec::<f64>::linear(), creal(1.0)).is_err());
        assert!(closed_form_trace(&ho(), creal(0.0)).is_err());
    }

    #[test]
    fn closed_form_trace_matches_quadrature() {
        let qq = q(1.0);
        for spec in [
            HamiltonianSpec::quadratic(2.0, 1.0, 0.5).unwrap(),
            HamiltonianSpec::damped(1.0, 1.0, 0.1).unwrap(),
        ] {
            let g = PhaseSpaceGrid::new(-12.0, 12.0, 160, -12.0, 12.0, 160).unwrap();
            let tau = creal(1.5);
            let e = closed_form(&spec, qq, &g, tau).unwrap();
            let num = phase_space_trace(&e, qq);
            let exact = closed_form_trace(&spec, tau).unwrap();
            assert!((num - exact).norm() < 1e-8, "{spec:?} {num} {exact}");
        }
    }

    /// Central difference in τ of the closed form, against −(1/ħ)H⋆E by a
    /// series product that terminates exactly for quadratic H.
    fn ode_residual(spec: &HamiltonianSpec<f64>, qq: QuantizationParams<f64>, g: &PhaseSpaceGrid<f64>, tau: f64) -> f64 {
        let eps = 1e-4;
        let ep = closed_form(spec, qq, g, creal(tau + eps)).unwrap();
        let em = closed_form(spec, qq, g, creal(tau - eps)).unwrap();
        let e = closed_form(spec, qq, g, creal(tau)).unwrap();
        let dt = ep.sub(&em).unwrap().scale_real(0.5 / eps);
        let h = spec.sample(g).unwrap();
        let he = match spec.damping() {
            Some(d) => star_gamma(&h, &e, qq, d, SeriesOrder::new(2)).unwrap(),
            None => star_series(&h, &e, qq, SeriesOrder::new(2)).unwrap(),
        };
        dt.add(&he.scale_real(1.0 / qq.hbar)).unwrap().max_abs()
    }

    #[test]
    fn closed_forms_satisfy_the_evolution_equation() {
        let qq = q(1.0);
        let g = PhaseSpaceGrid::new(-4.0, 4.0, 80, -4.0, 4.0, 160).unwrap();
        for spec in [
            ho(),
            HamiltonianSpec::quadratic(2.0, 1.0, 0.5).unwrap(),
            HamiltonianSpec::quadratic(1.0, 4.0, 1.0).unwrap(),
            HamiltonianSpec::free(2.0).unwrap(),
            HamiltonianSpec::damped(1.0, 1.0, 0.1).unwrap(),
            HamiltonianSpec::damped(1.0, 2.0, 0.2).unwrap(),
        ] {
            for tau in [0.3, 1.0] {
                let r = ode_residual(&spec, qq, &g, tau);
                assert!(r < 1e-6, "{spec:?} τ={tau} residual {r}");
            }
        }
        let small = PhaseSpaceGrid::new(-2.0, 2.0, 60, -3.0, 3.0, 120).unwrap();
        let r = ode_residual(&HamiltonianSpec::linear(), qq, &small, 0.1);
        assert!(r < 1e-5, "linear residual {r}");
    }

    #[test]
    fn squaring_matches_closed_form_and_semigroup() {
        let qq = q(1.0);
        let g = PhaseSpaceGrid::matched(-8.0, 8.0, 64, qq).unwrap();
        let h = ho().sample(&g).unwrap();
        let e2 = star_exp_squaring(&h, qq, creal(-2.0), None, StarProduct::Kernel).unwrap();
        let exact = closed_form(&ho(), qq, &g, creal(2.0)).unwrap();
        let d = core_diff(&e2, &exact, 4.0);
        assert!(d < 1e-5, "{d}");
        assert!(e2.max_imag_abs() < 1e-8);
        let e1 = star_exp_squaring(&h, qq, creal(-1.0), None, StarProduct::Kernel).unwrap();
        let sq = crate::star::star_kernel_route(&e1, &e1, qq).unwrap();
        assert!(sq.max_abs_diff(&e2).unwrap() < 1e-5);
        let kr = star_exp_kernel(&h, qq, creal(-2.0)).unwrap();
        assert!(kr.max_abs_diff(&e2).unwrap() < 1e-5);
        // k = 0 is the plain series
        let e_small = star_exp_squaring(&h, qq, creal(-0.001), Some(0), StarProduct::Kernel).unwrap();
        let series = star_exp_series(&h, qq, creal(-0.001), None, StarProduct::Kernel).unwrap();
        assert_eq!(e_small, series.value);
    }

    #[test]
    fn kernel_route_trace_is_csch() {
        let qq = q(1.0);
        let g = PhaseSpaceGrid::matched(-8.0, 8.0, 64, qq).unwrap();
        let h = ho().sample(&g).unwrap();
        for tau in [1.0, 2.5, 6.0] {
            let e = star_exp_kernel(&h, qq, creal(-tau)).unwrap();
            let z = phase_space_trace(&e, qq);
            let exact = 0.5 / (tau / 2.0f64).sinh();
            assert!(((z.re - exact) / exact).abs() < 1e-4, "τ={tau} {z} {exact}");
            assert!(e.max_imag_abs() < 1e-8);
        }
    }

    #[test]
    fn ode_routes() {
        let qq = q(1.0);
        let g = PhaseSpaceGrid::matched(-6.0, 6.0, 32, qq).unwrap();
        let zero = GridFunction::constant(&g, creal(0.0));
        let sched = EvolutionSchedule::new(TimeMode::Imaginary, vec![0.5, 1.0], 4).unwrap();
        let run = star_exp_ode(&zero, qq, &sched, StarProduct::Kernel, OdeOptions::default());
        assert!(run.failure.is_none());
        let one = GridFunction::constant(&g, creal(1.0));
        for v in &run.values {
            assert!(v.max_abs_diff(&one).unwrap() < 1e-12);
        }

        // harmonic: RK4 result against the eigendecomposition and residual
        let h = ho().sample(&g).unwrap();
        let lam = to_f64(HermitianSpectrum::new(&weyl_kernel(&h, qq)).unwrap().eigenvalues().max());
        let sched = EvolutionSchedule::new(TimeMode::Imaginary, vec![0.25, 0.5], (0.5 * lam) as usize + 8).unwrap();
        let run = star_exp_ode(&h, qq, &sched, StarProduct::Kernel, OdeOptions::default());
        assert!(run.failure.is_none());
        assert!(run.step_halving.unwrap() < 1e-5, "{:?}", run.step_halving);
        for (t, v) in run.times.iter().zip(&run.values) {
            let k = star_exp_kernel(&h, qq, creal(-t)).unwrap();
            assert!(v.max_abs_diff(&k).unwrap() < 1e-5);
            let eps = 1e-4;
            let dp = star_exp_kernel(&h, qq, creal(-(t + eps))).unwrap();
            let dm = star_exp_kernel(&h, qq, creal(-(t - eps))).unwrap();
            let dt = dp.sub(&dm).unwrap().scale_real(0.5 / eps);
            let he = crate::star::star_kernel_route(&h, v, qq).unwrap();
            let res = dt.add(&he).unwrap().max_abs();
            assert!(res < 1e-5, "residual {res}");
        }
    }

    #[test]
    fn ode_free_particle_is_pointwise() {
        let qq = q(1.0);
        let g = PhaseSpaceGrid::new(-2.0, 2.0, 12, -4.0, 4.0, 32).unwrap();
        let h = HamiltonianSpec::free(1.0).unwrap().sample(&g).unwrap();
        let sched = EvolutionSchedule::new(TimeMode::Imaginary, vec![0.1, 0.2], 200).unwrap();
        let run = star_exp_ode(&h, qq, &sched, StarProduct::Series(SeriesOrder::new(2)), OdeOptions::default());
        for (t, v) in run.times.iter().zip(&run.values) {
            let exact = sample_real(&g, |_, p| (-t * p * p / 2.0).exp()).unwrap();
            assert!(v.max_abs_diff(&exact).unwrap() < 1e-8);
        }
    }

    #[test]
    fn ode_blow_up_returns_partial_results() {
        let qq = q(1.0);
        let g = PhaseSpaceGrid::matched(-6.0, 6.0, 16, qq).unwrap();
        let h = sample_real(&g, |_, _| -5.0).unwrap();
        let sched = EvolutionSchedule::new(TimeMode::Imaginary, vec![1.0, 2.0, 10.0], 50).unwrap();
        let opts = OdeOptions { blowup_norm: 1e8, step_halving: false };
        let run = star_exp_ode(&h, qq, &sched, StarProduct::Kernel, opts);
        assert_eq!(run.values.len(), 2);
        assert!(matches!(run.failure, Some(Error::BlowUp { .. })));
    }

    #[test]
    fn damped_ode_matches_closed_form() {
        let qq = q(1.0);
        let g = PhaseSpaceGrid::new(-5.0, 5.0, 40, -5.0, 5.0, 80).unwrap();
        let spec = HamiltonianSpec::damped(1.0, 1.0, 0.1).unwrap();
        let h = spec.sample(&g).unwrap();
        let prod = StarProduct::Gamma(DampingParams::new(0.1, 1.0).unwrap(), SeriesOrder::new(2));
        let sched = EvolutionSchedule::new(TimeMode::Imaginary, vec![0.5, 1.0], 400).unwrap();
        let run = star_exp_ode(&h, qq, &sched, prod, OdeOptions::default());
        assert!(run.failure.is_none(), "{:?}", run.failure);
        for (t, v) in run.times.iter().zip(&run.values) {
            let exact = closed_form(&spec, qq, &g, creal(*t)).unwrap();
            let d = core_diff(v, &exact, 3.0);
            assert!(d < 1e-5, "τ={t} {d}");
        }
    }

    #[test]
    fn real_time_harmonic_is_unimodular_trace() {
        // Tr e^{−itĤ/ħ} from the closed form equals ½csc-type continuation
        let tau = cplx(0.0, 1.3);
        let z = closed_form_trace(&ho(), tau).unwrap();
        let expect = creal(0.5) / cplx(0.0, (0.65f64).sin());
        assert!((z - expect).norm() < 1e-12);
    }
}
