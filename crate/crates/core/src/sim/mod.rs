//! Quantum simulation of valid preparations, and the behaviors they generate.
//!
//! The model factors `ω̂ = v ∘ u` through Bob's support algebra and realizes
//! `v` by a purification of the marginal, giving commuting local maps
//! `ν_A`, `ν_B` on a doubled space.

mod behavior;
mod model;

pub use behavior::{
    behavior_of, chsh_family, chsh_optimal_settings, chsh_value, correlator, is_local_2222,
    ns_check, random_qubit_povm, Behavior, EffectPairing, NsReport, Povm, POVM_TOL, PROB_NEG_TOL,
    PROB_SUM_TOL,
};
pub use model::{
    build_simulation, extract_u, reproduction_check, restrict_support, ReproductionReport,
    SimulationModel, SupportRestriction, CONDITIONING_GUARD, REPRODUCTION_TOL,
};
