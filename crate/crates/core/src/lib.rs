//! Phase-space (deformation) quantization on a discretized `(x, p)` plane.
//!
//! The crate computes Moyal star products, star exponentials of Hamiltonian
//! symbols, phase-space traces, and ground-state energies extracted from the
//! imaginary-time decay of the partition trace.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

// `!(a < b)` checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod feynman_kac;
pub mod grid;
pub mod hamiltonian;
pub mod oracle;
pub mod scalar;
pub mod star;
pub mod star_exp;
pub mod stencil;
pub mod weyl;

pub use error::{Error, Result};
pub use feynman_kac::{
    default_schedule, default_window, ground_energy, ground_energy_complex, ground_energy_damped,
    ground_wigner, partition_trace, real_time_spectrum, FitStatus, Peak, RealTimeSpectrum, Route,
    SpectrumEstimate, TraceCurve, WignerOptions, WignerState,
};
pub use grid::{
    integrate, integrate_inner, phase_space_trace, sample, sample_real, GridFunction,
    PhaseSpaceGrid, QuantizationParams,
};
pub use hamiltonian::{HamiltonianSpec, QuadraticClass};
pub use oracle::{
    build_position_hamiltonian, eigen_ground, matrix_elements, oracle_for, restrict, wigner_of_state,
    PositionHamiltonian,
};
pub use scalar::{Complex, Real};
pub use star::{
    moyal_bracket, poisson_bracket, star_gamma, star_kernel_route, star_series, DampingParams,
    SeriesOrder, StarProduct,
};
pub use star_exp::{
    closed_form, closed_form_trace, star_exp_kernel, star_exp_ode, star_exp_series,
    star_exp_squaring, EvolutionSchedule, OdeOptions, OdeRun, SeriesExp, TimeMode,
};
pub use weyl::{
    inverse_weyl, kernel_exp, kernel_multiply, kernel_trace, weyl_kernel, HermitianSpectrum,
    KernelWarning, OperatorKernel,
};

pub type C64 = Complex<f64>;
pub type Grid = PhaseSpaceGrid<f64>;
pub type Quantization = QuantizationParams<f64>;
pub type Function = GridFunction<f64>;
pub type Kernel = OperatorKernel<f64>;
pub type Hamiltonian = HamiltonianSpec<f64>;
pub type Schedule = EvolutionSchedule<f64>;
