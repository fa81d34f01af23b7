//! Steady state, transport and metrology of a two-cavity optical molecule
//! coupled to two thermal reservoirs, described by a non-secular
//! (Bloch–Redfield type) master equation restricted to the vacuum and the two
//! single-excitation supermodes.
//!
//! Conventions: ħ = k_B = 1 and all energies, rates and temperatures share one
//! unit. The three-level basis is |g⟩ = |00⟩ (index 0), |e⟩ = upper supermode
//! (index 1) and |f⟩ = lower supermode (index 2).

pub mod dynamics;
pub mod error;
pub mod liouvillian;
pub mod model;
pub mod observables;
pub mod steady;

pub use error::{Error, Result};
pub use liouvillian::{build_block_generator, total_generator, State3, Superoperator3};
pub use model::{derive_params, planck_occupation, DerivedParams, ModeValues, Reservoir, SystemParams};
pub use steady::{
    coherence_from_populations, cross_validate, steady_analytic, steady_by_reduction,
    steady_from_cofactors, steady_numeric_oracle, transfer_generator_a, SteadyState,
    TransferGenerator,
};
pub use observables::{
    curl_flux, decompose_transfer, entropy_production_rate, evaluate, evaluate_lenient, heat_current,
    heat_current_split, qfi_general, qfi_lambda, spectral_decomposition, Evaluation, ObservablesRecord,
    QfiOptions, QfiResult, SpectralDecomp,
};
pub use dynamics::{evolve, relax_to_steady, EquationsOfMotion, Trajectory};
