// SPDX-License-Identifier: Apache-2.0

//! Spectral core identification for object-exchange markets.
//!
//! The crate models a square market: `n` agents, each endowed with one
//! object, each ranking the objects it would accept in exchange. Two routes
//! lead from a preference profile to the set of agents that anchor the
//! market:
//!
//! * [`ttc`] runs the classical top-trading-cycles procedure and reads the
//!   core off the removal rounds. Exact, combinatorial, quadratic.
//! * [`markov`] turns the profile into a row-stochastic preference matrix
//!   and [`spectral`] extracts its leading vectors (stationary distribution
//!   or top right singular vector); [`core_id`] converts the vector into
//!   per-agent scores and a predicted core. Approximate, numerical, near
//!   linear for truncated lists.
//!
//! The crate is `no_std` (with `alloc`); file formats, the command line
//! interface, and the experiment harness live in the companion `ttc-cli`
//! crate.

#![no_std]
#![warn(missing_docs)]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod core_id;
pub mod markov;
pub mod profile;
pub mod spectral;
pub mod ttc;

pub use core_id::{
    compare_to_truth, identify_core_iterative, identify_core_topk, score_agents, score_values,
    spearman, Convention, CoreEstimate, CoreIdError, MatchMetrics,
};
pub use markov::{
    build_scores, default_eps, normalize_rows, perturb_ranks, perturb_scores, smooth_truncated,
    MarkovError, ScoreMatrix, StochasticMatrix,
};
pub use profile::{
    generate_from_utility, generate_random, Allocation, NullPlacement, PreferenceProfile,
    ProfileError,
};
pub use spectral::{
    canonicalize_sign, randomized_rank1, right_singular_power, stationary_power, ScoreMode,
    SolverKind, SolverOptions, SpectralError, SpectralScore,
};
pub use ttc::{
    check_individual_rationality, check_pareto_bruteforce, ground_truth_core, run_ttc, CoreSet,
    TtcError, TtcOutcome,
};
