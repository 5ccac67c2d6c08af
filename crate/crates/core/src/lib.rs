//! Quantum dynamics of a damped vibrating string coupled to a continuum of
//! massless scalar fields.
//!
//! The string's normal modes couple to the reservoir through a minimal
//! coupling `(pi_psi - R)^2 / 2 lambda`. This crate computes the resulting
//! memory kernel, per-mode Heisenberg solutions as coefficient functions over
//! the initial operators, normal-ordered energies, first-order transition
//! rates, and the reservoir source shapes. A discretized-bath integrator
//! ([`bathsim`]) cross-checks the analytic results.
//!
//! With the `parallel` feature (on by default) sweeps over times, frequencies
//! and independent runs use rayon; results are identical either way.

pub mod bathsim;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod fieldrep;
pub mod grid;
pub mod kernel;
pub mod model;
pub mod observables;
pub mod quad;
pub mod transitions;

pub use bathsim::{discretize_bath, evolve_coefficients, fit_decay_rate, DiscreteBath, GridPolicy, OracleOptions, OracleRun};
pub use dynamics::{
    bath_mode_solution, ccr_defect, mode_solution, mode_solution_with, string_solution, BathModeSolution,
    CoefficientSolution, DampingConvention, ModeDamping,
};
pub use error::{Error, Result};
pub use fieldrep::{bath_hamiltonian_identity, source_shapes, BoxLattice, FieldSample, SourceShapes};
pub use grid::{OmegaGrid, OmegaGridSpec, TimeGrid};
pub use kernel::{gamma_integral, gamma_kernel, noise_correlator, KernelSample};
pub use model::{
    build_spectrum, eval_coupling, CouplingKind, CouplingSpec, CouplingTable, ModeSpectrum, Quantum,
    ReservoirSpec, StringFockState, StringParams,
};
pub use observables::{
    reservoir_energy_asymptotic, string_energy_asymptotic, string_energy_timeseries, EnergyMethod, EnergyReport,
};
pub use transitions::{
    absorption_rate_fock, absorption_rate_thermal, emission_rate, reduced_density_diagonal, DensityOptions,
    RateReport, ThermalRule,
};
