//! Vulnerability analysis of finitely-long proof-of-work blockchains to
//! double-spending attacks.
//!
//! The success probability of an attack is available exactly
//! ([`probability`]), in the infinite-chain limit, and empirically through a
//! seeded random walk ([`montecarlo`]) and a block-level race
//! ([`chainsim`]). [`sweep`] produces the parameter tables.

pub mod chainsim;
pub mod combinatorics;
mod error;
pub mod montecarlo;
pub mod probability;
mod scaled;
pub mod sweep;

pub use combinatorics::{
    catalan, catalan_generating_partial, coeff_bruteforce, coeff_closed_form, coeff_recursive,
    CatalanTable, CoefficientTable, Step, WalkPath,
};
pub use error::{Error, Result};
pub use montecarlo::{estimate, simulate_walk, MonteCarloEstimate, TrialOutcome};
pub use probability::{
    asymptotic_limit, convergence_gap, dsa_success_probability, success_probability_closed_form,
    success_probability_dp, success_probability_exact, AttackScenario, ClosedFormEvaluator,
    DeficitState, Method, ProbabilityGrid,
};
