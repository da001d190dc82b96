//! Partition traces `Z(τ) = (1/2πħ)∫Exp_⋆(−τH/ħ) dx dp`, ground-state
//! energies from their decay rate, the ground-state Wigner function, and
//! spectra from real-time traces.
//!
//! The energy is the slope of a straight-line fit of `ln Z` against `τ`,
//! `E₀ = −ħ·slope`, with `exp(intercept)` as the degeneracy estimate.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{integrate, integrate_inner, phase_space_trace, GridFunction, PhaseSpaceGrid, QuantizationParams};
use crate::hamiltonian::HamiltonianSpec;
use crate::scalar::{cabs, cfinite, cis, cln, cplx, creal, from_usize, lit, to_f64, Complex, Real};
use crate::star::SeriesOrder;
use crate::star_exp::{
    closed_form, closed_form_trace, star_exp_kernel, star_exp_ode, star_exp_series, star_exp_squaring,
    EvolutionSchedule, OdeOptions, TimeMode,
};
use crate::weyl::{inverse_weyl, weyl_kernel, HermitianSpectrum};

/// Fraction of the box used for the truncation diagnostic.
pub const INNER_FRACTION: f64 = 0.9;

/// How star exponentials are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Kernel,
    Squaring,
    Ode,
    Series,
    ClosedForm,
}

impl Route {
    pub fn name(&self) -> &'static str {
        match self {
            Route::Kernel => "kernel",
            Route::Squaring => "squaring",
            Route::Ode => "ode",
            Route::Series => "series",
            Route::ClosedForm => "closed-form",
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sampled partition trace.
#[derive(Debug, Clone)]
pub struct TraceCurve<T: Real> {
    times: Vec<T>,
    z: Vec<Complex<T>>,
    diagnostics: Vec<T>,
    route: Option<Route>,
    failure: Option<Error>,
}

impl<T: Real> TraceCurve<T> {
    /// Curve from given values; diagnostics are zero and no route is set.
    pub fn from_values(times: Vec<T>, z: Vec<Complex<T>>) -> Result<Self> {
        if times.len() != z.len() {
            return Err(Error::ShapeMismatch { expected: (times.len(), 1), found: (z.len(), 1) });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTrace("times must be strictly increasing".into()));
        }
        if let Some(i) = z.iter().position(|v| !cfinite(*v)) {
            return Err(Error::InvalidTrace(format!("non-finite trace at τ = {}", times[i])));
        }
        let diagnostics = vec![T::zero(); times.len()];
        Ok(Self { times, z, diagnostics, route: None, failure: None })
    }

    /// Closed-form full-plane trace on the given times.
    pub fn exact(spec: &HamiltonianSpec<T>, times: &[T]) -> Result<Self> {
        let mut z = Vec::with_capacity(times.len());
        for &t in times {
            z.push(closed_form_trace(spec, creal(t))?);
        }
        let mut c = Self::from_values(times.to_vec(), z)?;
        c.route = Some(Route::ClosedForm);
        Ok(c)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }
    pub fn values(&self) -> &[Complex<T>] {
        &self.z
    }
    /// Per-point `|Z − Z_inner|/|Z|` with `Z_inner` integrated over the
    /// centred sub-box of relative size [`INNER_FRACTION`].
    pub fn diagnostics(&self) -> &[T] {
        &self.diagnostics
    }
    pub fn route(&self) -> Option<Route> {
        self.route
    }
    /// Error that stopped the computation early, if any.
    pub fn failure(&self) -> Option<&Error> {
        self.failure.as_ref()
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: T, f: &GridFunction<T>, q: QuantizationParams<T>) -> bool {
        let z = phase_space_trace(f, q);
        if !cfinite(z) {
            self.failure = Some(Error::InvalidTrace(format!("trace overflowed at τ = {t}")));
            return false;
        }
        let inner = integrate_inner(f, lit(INNER_FRACTION)) / q.cell();
        let mag = cabs(z);
        let diag = if mag > T::zero() { cabs(z - inner) / mag } else { T::one() };
        self.times.push(t);
        self.z.push(z);
        self.diagnostics.push(diag);
        true
    }
}

/// Default imaginary-time schedule: 32 geometric points from 0.5 to 16.
pub fn default_schedule<T: Real>() -> EvolutionSchedule<T> {
    EvolutionSchedule::geometric(TimeMode::Imaginary, lit(0.5), lit(16.0), 32, 1)
        .expect("valid default schedule")
}

/// Default fit window: the upper half `[τ_max/2, τ_max]` of the curve.
pub fn default_window<T: Real>(times: &[T]) -> (T, T) {
    let hi = times.last().copied().unwrap_or_else(T::zero);
    (hi * lit(0.5), hi)
}

/// Star exponential `Exp_⋆(−τH/ħ)` at one imaginary time by the given route.
pub fn star_exp_at<T: Real>(
    spec: &HamiltonianSpec<T>,
    q: QuantizationParams<T>,
    grid: &PhaseSpaceGrid<T>,
    tau: T,
    route: Route,
    substeps: usize,
) -> Result<GridFunction<T>> {
    let s = creal(-tau / q.hbar);
    match route {
        Route::ClosedForm => closed_form(spec, q, grid, creal(tau)),
        Route::Kernel => {
            check_hermitian_family(spec)?;
            star_exp_kernel(&spec.sample(grid)?, q, s)
        }
        Route::Squaring => {
            if spec.damping().is_some() {
                return Err(Error::Unsupported(
                    "squaring needs star products of non-polynomial functions, which the γ-deformed series cannot \
                     evaluate exactly; use the ode or series route"
                        .into(),
                ));
            }
            star_exp_squaring(&spec.sample(grid)?, q, s, None, crate::star::StarProduct::Kernel)
        }
        Route::Series => {
            let product = numeric_product(spec);
            Ok(star_exp_series(&spec.sample(grid)?, q, s, None, product)?.value)
        }
        Route::Ode => {
            let sched = EvolutionSchedule::new(TimeMode::Imaginary, vec![tau], substeps)?;
            let run = star_exp_ode(&spec.sample(grid)?, q, &sched, numeric_product(spec), OdeOptions::default());
            match run.failure {
                Some(e) => Err(e),
                None => Ok(run.values.into_iter().next().expect("one sample")),
            }
        }
    }
}

fn check_hermitian_family<T: Real>(spec: &HamiltonianSpec<T>) -> Result<()> {
    if spec.damping().is_some() {
        return Err(Error::Unsupported(
            "the damped family evolves with the γ-deformed product, which has no Hermitian kernel".into(),
        ));
    }
    Ok(())
}

/// Product for the series and ODE routes: quadratic symbols make `H⋆E`
/// terminate at second order, so the series product is exact for them.
fn numeric_product<T: Real>(spec: &HamiltonianSpec<T>) -> crate::star::StarProduct<T> {
    match spec.polynomial_degree() {
        Some(d) => spec.star_product(false, SeriesOrder::new(d)),
        None => crate::star::StarProduct::Kernel,
    }
}

/// `Z(τ)` on `grid` at every schedule time.
///
/// Evaluation stops at the first failing point; the partial curve is
/// returned with the error recorded in [`TraceCurve::failure`].
pub fn partition_trace<T: Real>(
    spec: &HamiltonianSpec<T>,
    q: QuantizationParams<T>,
    grid: &PhaseSpaceGrid<T>,
    schedule: &EvolutionSchedule<T>,
    route: Route,
) -> Result<TraceCurve<T>> {
    if schedule.mode() != TimeMode::Imaginary {
        return Err(Error::InvalidParameter("partition traces need an imaginary-time schedule".into()));
    }
    let mut curve = TraceCurve { times: Vec::new(), z: Vec::new(), diagnostics: Vec::new(), route: Some(route), failure: None };
    match route {
        Route::Kernel => {
            check_hermitian_family(spec)?;
            let spectrum = HermitianSpectrum::new(&weyl_kernel(&spec.sample(grid)?, q))?;
            for &t in schedule.samples() {
                let f = inverse_weyl(&spectrum.exp_kernel(creal(-t / q.hbar)));
                if !curve.push(t, &f, q) {
                    break;
                }
            }
        }
        Route::Ode => {
            let run = star_exp_ode(&spec.sample(grid)?, q, schedule, numeric_product(spec), OdeOptions::default());
            for (t, f) in run.times.iter().zip(&run.values) {
                if !curve.push(*t, f, q) {
                    break;
                }
            }
            if curve.failure.is_none() {
                curve.failure = run.failure;
            }
        }
        _ => {
            for &t in schedule.samples() {
                match star_exp_at(spec, q, grid, t, route, schedule.substeps()) {
                    Ok(f) => {
                        if !curve.push(t, &f, q) {
                            break;
                        }
                    }
                    Err(e @ Error::Unsupported(_)) => return Err(e),
                    Err(e) => {
                        curve.failure = Some(e);
                        break;
                    }
                }
            }
        }
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    DivergentTrace,
    UnboundedBelow,
    ContinuousSpectrumSuspected,
}

impl FitStatus {
    pub fn name(&self) -> &'static str {
        match self {
            FitStatus::Converged => "converged",
            FitStatus::DivergentTrace => "divergent_trace",
            FitStatus::UnboundedBelow => "unbounded_below",
            FitStatus::ContinuousSpectrumSuspected => "continuous_spectrum_suspected",
        }
    }
}

impl fmt::Display for FitStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Thresholds that classify a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitTolerances<T> {
    /// Relative slope change between the window halves.
    pub drift: T,
    /// Truncation diagnostic above which the spectrum is suspected continuous.
    pub truncation: T,
    /// Truncation diagnostic above which the trace is considered divergent.
    pub divergence: T,
    /// Growth of the second divided difference of `ln Z` across the window.
    pub curvature: T,
}

impl<T: Real> Default for FitTolerances<T> {
    fn default() -> Self {
        Self { drift: lit(1e-3), truncation: lit(1e-3), divergence: lit(0.5), curvature: lit(1e-6) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate<T> {
    pub e0: Complex<T>,
    pub degeneracy: T,
    pub fit_window: (T, T),
    /// RMS residual of the line fit.
    pub residual: T,
    /// `ħ·(|slope drift| + 2·standard error of the slope)`.
    pub uncertainty: T,
    /// Slope of the second window half minus the first, in energy units.
    pub slope_drift: T,
    pub points: usize,
    pub status: FitStatus,
}

struct LineFit<T> {
    slope: T,
    intercept: T,
    rms: T,
    slope_se: T,
}

fn line_fit<T: Real>(x: &[T], y: &[T]) -> LineFit<T> {
    let n = from_usize::<T>(x.len());
    let mx = x.iter().fold(T::zero(), |a, &v| a + v) / n;
    let my = y.iter().fold(T::zero(), |a, &v| a + v) / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr = x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| {
        let r = b - (intercept + slope * a);
        acc + r * r
    });
    let rms = (ssr / n).sqrt();
    let dof = if x.len() > 2 { from_usize::<T>(x.len() - 2) } else { T::one() };
    let slope_se = (ssr / dof / sxx).sqrt();
    LineFit { slope, intercept, rms, slope_se }
}

fn window_indices<T: Real>(times: &[T], window: (T, T)) -> Result<Vec<usize>> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!("fit window needs lo < hi, got [{lo}, {hi}]")));
    }
    // small slack so windows given by rounded endpoints still catch the nodes
    let slack = (hi - lo) * lit(1e-9);
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= lo - slack && times[i] <= hi + slack).collect();
    if idx.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "fit window [{lo}, {hi}] holds {} trace points, need at least 4",
            idx.len()
        )));
    }
    Ok(idx)
}

/// Classify and assemble an estimate from the real part of `ln Z`.
fn finish_estimate<T: Real>(
    curve: &TraceCurve<T>,
    idx: &[usize],
    y_re: &[T],
    y_im: Option<&[T]>,
    q: QuantizationParams<T>,
    tol: FitTolerances<T>,
) -> SpectrumEstimate<T> {
    let t: Vec<T> = idx.iter().map(|&i| curve.times[i]).collect();
    let fit = line_fit(&t, y_re);
    let half = t.len() / 2;
    let a = line_fit(&t[..half.max(2)], &y_re[..half.max(2)]);
    let b = line_fit(&t[t.len() - (t.len() - half).max(2)..], &y_re[y_re.len() - (t.len() - half).max(2)..]);
    let drift = b.slope - a.slope;

    let mut dd2 = Vec::new();
    for i in 1..t.len() - 1 {
        let l = (y_re[i] - y_re[i - 1]) / (t[i] - t[i - 1]);
        let r = (y_re[i + 1] - y_re[i]) / (t[i + 1] - t[i]);
        dd2.push(lit::<T>(2.0) * (r - l) / (t[i + 1] - t[i - 1]));
    }
    let curvature_growth = dd2[dd2.len() - 1] - dd2[0];
    let max_diag = idx.iter().fold(T::zero(), |m, &i| m.max(curve.diagnostics[i]));

    let status = if curvature_growth > tol.curvature && dd2[dd2.len() - 1] > T::zero() {
        FitStatus::UnboundedBelow
    } else if max_diag > tol.divergence {
        FitStatus::DivergentTrace
    } else if max_diag > tol.truncation || drift.abs() > tol.drift * fit.slope.abs() {
        FitStatus::ContinuousSpectrumSuspected
    } else {
        FitStatus::Converged
    };

    let (im_slope, im_intercept, im_se) = match y_im {
        Some(y) => {
            let f = line_fit(&t, y);
            (f.slope, f.intercept, f.slope_se)
        }
        None => (T::zero(), T::zero(), T::zero()),
    };
    let _ = im_intercept;
    let hb = q.hbar;
    // floor for when the data are exact to rounding and drift/SE vanish
    let y_max = y_re.iter().fold(T::zero(), |m, &y| m.max(y.abs()));
    let rounding = lit::<T>(64.0) * T::default_epsilon() * (y_max + T::one()) / (t[t.len() - 1] - t[0]);
    SpectrumEstimate {
        e0: cplx(-hb * fit.slope, -hb * im_slope),
        degeneracy: fit.intercept.exp(),
        fit_window: (t[0], t[t.len() - 1]),
        residual: fit.rms,
        uncertainty: hb * (drift.abs() + lit::<T>(2.0) * (fit.slope_se + im_se) + rounding),
        slope_drift: -hb * drift,
        points: t.len(),
        status,
    }
}

/// Line fit of `ln Z(τ)` over `window` (default: upper half of the curve).
///
/// Errors when the window holds fewer than 4 points or when `Z` is not
/// positive and real there.
pub fn ground_energy<T: Real>(
    curve: &TraceCurve<T>,
    q: QuantizationParams<T>,
    window: Option<(T, T)>,
) -> Result<SpectrumEstimate<T>> {
    ground_energy_with(curve, q, window, FitTolerances::default())
}

pub fn ground_energy_with<T: Real>(
    curve: &TraceCurve<T>,
    q: QuantizationParams<T>,
    window: Option<(T, T)>,
    tol: FitTolerances<T>,
) -> Result<SpectrumEstimate<T>> {
    let window = window.unwrap_or_else(|| default_window(&curve.times));
    let idx = window_indices(&curve.times, window)?;
    let mut y = Vec::with_capacity(idx.len());
    for &i in &idx {
        let z = curve.z[i];
        let tiny = cabs(z) * lit(1e-6);
        if !(z.re > T::zero()) || z.im.abs() > tiny {
            return Err(Error::InvalidTrace(format!(
                "Z({}) = {} is not positive and real",
                curve.times[i], z
            )));
        }
        y.push(z.re.ln());
    }
    Ok(finish_estimate(curve, &idx, &y, None, q, tol))
}

/// Complex fit for non-Hermitian evolutions: `ln Z` is continued along the
/// curve by choosing, at each point, the branch closest to the linear
/// extrapolation of the previous two.
pub fn ground_energy_complex<T: Real>(
    curve: &TraceCurve<T>,
    q: QuantizationParams<T>,
    window: Option<(T, T)>,
) -> Result<SpectrumEstimate<T>> {
    let window = window.unwrap_or_else(|| default_window(&curve.times));
    let idx = window_indices(&curve.times, window)?;
    let phases = unwrap_phase(curve)?;
    let mut re = Vec::with_capacity(idx.len());
    let mut im = Vec::with_capacity(idx.len());
    for &i in &idx {
        let z = curve.z[i];
        if cabs(z) == T::zero() {
            return Err(Error::InvalidTrace(format!("Z({}) = 0", curve.times[i])));
        }
        re.push(cln(z).re);
        im.push(phases[i]);
    }
    Ok(finish_estimate(curve, &idx, &re, Some(&im), q, FitTolerances::default()))
}

fn unwrap_phase<T: Real>(curve: &TraceCurve<T>) -> Result<Vec<T>> {
    let two_pi = T::two_pi();
    let mut out: Vec<T> = Vec::with_capacity(curve.len());
    for i in 0..curve.len() {
        let raw = cln(curve.z[i]).im;
        if i == 0 {
            out.push(raw);
            continue;
        }
        let predicted = if i >= 2 {
            let (t0, t1, t2) = (curve.times[i - 2], curve.times[i - 1], curve.times[i]);
            out[i - 1] + (out[i - 1] - out[i - 2]) * (t2 - t1) / (t1 - t0)
        } else {
            out[i - 1]
        };
        let k = ((predicted - raw) / two_pi).round();
        let phase = raw + k * two_pi;
        if (phase - predicted).abs() > T::frac_pi_2() {
            return Err(Error::BranchTracking {
                tau_lo: to_f64(curve.times[i - 1]),
                tau_hi: to_f64(curve.times[i]),
            });
        }
        out.push(phase);
    }
    Ok(out)
}

/// Complex ground-state energy of the damped oscillator from its exact
/// phase-space trace.
pub fn ground_energy_damped<T: Real>(
    spec: &HamiltonianSpec<T>,
    q: QuantizationParams<T>,
    schedule: &EvolutionSchedule<T>,
    window: Option<(T, T)>,
) -> Result<SpectrumEstimate<T>> {
    if spec.damping().is_none() {
        return Err(Error::InvalidParameter(format!("expected the damped family, got {}", spec.family_name())));
    }
    let curve = TraceCurve::exact(spec, schedule.samples())?;
    ground_energy_complex(&curve, q, window)
}

/// Normalized ground-state Wigner function.
#[derive(Debug, Clone)]
pub struct WignerState<T: Real> {
    pub rho: GridFunction<T>,
    /// `∫ρ` before renormalization; close to 1 when `e0` is accurate.
    pub raw_norm: T,
    pub tau: T,
    pub e0: T,
    /// Max-norm distance between the extractions at `τ` and `1.25τ`.
    pub convergence: T,
    pub family: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerOptions<T> {
    pub route: Route,
    pub substeps: usize,
    pub tolerance: T,
}

impl<T: Real> Default for WignerOptions<T> {
    fn default() -> Self {
        Self { route: Route::Kernel, substeps: 1, tolerance: lit(1e-4) }
    }
}

/// `ρ₀ = e^{τE₀/ħ}·Exp_⋆(−τH/ħ)/2πħ`, renormalized to unit integral.
pub fn ground_wigner<T: Real>(
    spec: &HamiltonianSpec<T>,
    q: QuantizationParams<T>,
    grid: &PhaseSpaceGrid<T>,
    tau: T,
    opts: WignerOptions<T>,
) -> Result<WignerState<T>> {
    check_hermitian_family(spec)?;
    if !(tau > T::zero()) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let late = tau * lit(1.25);
    let sched = EvolutionSchedule::geometric(TimeMode::Imaginary, tau * lit(0.5), late, 8, opts.substeps)?;
    let curve = partition_trace(spec, q, grid, &sched, opts.route)?;
    if let Some(e) = curve.failure() {
        return Err(e.clone());
    }
    let est = ground_energy(&curve, q, Some((tau * lit(0.5), late)))?;
    if est.status != FitStatus::Converged {
        return Err(Error::NotConverged(format!(
            "ground-state fit status is {}; no isolated ground state",
            est.status
        )));
    }
    let e0 = est.e0.re;
    let extract = |t: T| -> Result<(GridFunction<T>, T)> {
        let e = star_exp_at(spec, q, grid, t, opts.route, opts.substeps)?;
        let rho = e.scale_real((t * e0 / q.hbar).exp() / q.cell());
        let norm = integrate(&rho).re;
        Ok((rho.scale_real(T::one() / norm), norm))
    };
    let (rho, raw_norm) = extract(tau)?;
    let (rho_late, _) = extract(late)?;
    let convergence = rho.max_abs_diff(&rho_late)?;
    if convergence > opts.tolerance {
        return Err(Error::NotConverged(format!(
            "ground Wigner function changed by {convergence} between τ = {tau} and {late}"
        )));
    }
    Ok(WignerState { rho, raw_norm, tau, e0, convergence, family: spec.family_name().to_string() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak<T> {
    pub energy: T,
    /// Peak amplitude over the window sum; 1 for a non-degenerate level.
    pub weight: T,
}

#[derive(Debug, Clone)]
pub struct RealTimeSpectrum<T> {
    pub peaks: Vec<Peak<T>>,
    /// Fourier resolution `2πħ/T`.
    pub resolution: T,
    /// Kernel eigenvalues in range whose neighbour is closer than the
    /// window's main-lobe half-width.
    pub unresolved: usize,
    /// Kernel eigenvalues outside the Nyquist band `|E| < πħ/dt`.
    pub aliased: usize,
    pub energies: Vec<T>,
    pub amplitude: Vec<T>,
}

/// Zero-padding factor of the energy grid relative to `2πħ/T`.
const PAD: usize = 8;
/// Peaks below this fraction of the largest one are ignored.
const PEAK_FLOOR: f64 = 0.05;

/// Hann-windowed Fourier analysis of `Z(t) = Tr e^{−itĤ/ħ}`.
pub fn real_time_spectrum<T: Real>(
    spec: &HamiltonianSpec<T>,
    q: QuantizationParams<T>,
    grid: &PhaseSpaceGrid<T>,
    schedule: &EvolutionSchedule<T>,
    energy_range: Option<(T, T)>,
) -> Result<RealTimeSpectrum<T>> {
    check_hermitian_family(spec)?;
    if schedule.mode() != TimeMode::Real {
        return Err(Error::InvalidParameter("real_time_spectrum needs a real-time schedule".into()));
    }
    let t = schedule.samples();
    if t.len() < 8 {
        return Err(Error::InvalidParameter("real-time schedule needs at least 8 samples".into()));
    }
    let dt = t[1] - t[0];
    if t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > dt * lit(1e-6)) {
        return Err(Error::InvalidParameter("real-time schedule must be uniform".into()));
    }
    let spectrum = HermitianSpectrum::new(&weyl_kernel(&spec.sample(grid)?, q))?;
    let lambdas: Vec<T> = spectrum.eigenvalues().iter().copied().collect();
    let z = trace_series(&lambdas, t, q);
    analyze(&lambdas, t, &z, q, energy_range)
}

fn trace_series<T: Real>(lambdas: &[T], t: &[T], q: QuantizationParams<T>) -> Vec<Complex<T>> {
    let dt = t[1] - t[0];
    let mut z = vec![creal(T::zero()); t.len()];
    for &l in lambdas {
        let mut ph = cis(-l * t[0] / q.hbar);
        let step = cis(-l * dt / q.hbar);
        for v in z.iter_mut() {
            *v += ph;
            ph *= step;
        }
    }
    z
}

fn analyze<T: Real>(
    lambdas: &[T],
    t: &[T],
    z: &[Complex<T>],
    q: QuantizationParams<T>,
    energy_range: Option<(T, T)>,
) -> Result<RealTimeSpectrum<T>> {
    let n = t.len();
    let dt = t[1] - t[0];
    let span = dt * from_usize::<T>(n);
    let resolution = T::two_pi() * q.hbar / span;
    let nyquist = T::pi() * q.hbar / dt;
    let (lo, hi) = energy_range.unwrap_or((-nyquist, nyquist));
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!("energy range needs lo < hi, got [{lo}, {hi}]")));
    }
    let hann: Vec<T> = (0..n)
        .map(|j| lit::<T>(0.5) * (T::one() - (T::two_pi() * from_usize::<T>(j) / from_usize::<T>(n - 1)).cos()))
        .collect();
    let wsum = hann.iter().fold(T::zero(), |a, &w| a + w);
    let de = resolution / from_usize::<T>(PAD);
    let m = to_f64((hi - lo) / de).ceil() as usize + 1;
    let energies: Vec<T> = (0..m).map(|i| lo + de * from_usize::<T>(i)).collect();
    let weighted: Vec<Complex<T>> = z.iter().zip(&hann).map(|(v, &w)| *v * w).collect();
    let amplitude: Vec<T> = energies
        .iter()
        .map(|&e| {
            let mut ph = cis(e * t[0] / q.hbar);
            let step = cis(e * dt / q.hbar);
            let mut acc = creal(T::zero());
            for v in &weighted {
                acc += *v * ph;
                ph *= step;
            }
            cabs(acc)
        })
        .collect();
    let top = amplitude.iter().fold(T::zero(), |a, &v| a.max(v));
    let mut peaks = Vec::new();
    for i in 1..m.saturating_sub(1) {
        let (a, b, c) = (amplitude[i - 1], amplitude[i], amplitude[i + 1]);
        if b > a && b >= c && b >= top * lit(PEAK_FLOOR) {
            let den = a - lit::<T>(2.0) * b + c;
            let delta = if den != T::zero() { lit::<T>(0.5) * (a - c) / den } else { T::zero() };
            let height = b - lit::<T>(0.25) * (a - c) * delta;
            peaks.push(Peak { energy: energies[i] + delta * de, weight: height / wsum });
        }
    }
    // Hann main lobe half-width is two resolution bins
    let lobe = resolution * lit(2.0);
    let inside: Vec<T> = lambdas.iter().copied().filter(|&l| l >= lo && l <= hi).collect();
    let mut unresolved = 0;
    for i in 0..inside.len() {
        let close = inside.iter().enumerate().any(|(j, &o)| j != i && (o - inside[i]).abs() < lobe && (o - inside[i]).abs() > lit(1e-9));
        if close {
            unresolved += 1;
        }
    }
    let aliased = lambdas.iter().filter(|l| l.abs() >= nyquist).count();
    Ok(RealTimeSpectrum { peaks, resolution, unresolved, aliased, energies, amplitude })
}
