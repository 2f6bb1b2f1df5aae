//! Deterministic supply-chain simulator and adversary.
//!
//! Drives scripted product lifecycles through a real ledger, injects
//! file-level tampering and counterfeit probes, and carries the
//! independent reference state machine plus random log generation used to
//! cross-check the registry.

pub mod cost;
pub mod equivalence;
pub mod fuzz;
pub mod oracle;
pub mod rng;
mod scenario;

pub use crate::registry::counterfeit_probe;
pub use equivalence::{
    check_exhaustive, check_random_log, Divergence, ExhaustiveCheck, LogCheck, SmallWorld,
};
pub use oracle::{chain_tx_log, reference_state_machine, LoggedTx, RefOutcome, ReferenceMachine};
pub use rng::SplitMix64;
pub use scenario::{
    apply_mutation, run_scenario, Actor, ActorCounts, Mutation, Scenario, SimError, SimOutput,
    TraceAction, TraceEvent, TraceOutcome,
};
