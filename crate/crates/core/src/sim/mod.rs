//! Deterministic multi-agent scenarios over the simulated chain and the proxy.
//!
//! One tick: mine a block when due, let agents act in role order, run the
//! protocol timers, then check every invariant.

mod config;
mod engine;
mod report;

pub use config::{
    preset, preset_source, price_at, AgentSpec, DisputerProfile, InvalidConfig, LockerProfile, PlanStep,
    PlannedAction, PricePoint, RelayerProfile, Role, ScenarioConfig, TeleporterProfile, PRESET_NAMES,
};
pub use engine::{run_scenario, Sim, SimError, INVARIANTS};
pub use report::{
    ActionFailure, AgentOutcome, FinalState, RosterEntry, SimReport, Tally, TheftWindow, TickSnapshot, UnwrapOutcome,
    Violation,
};

#[cfg(test)]
mod tests;
