use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bridge::BridgeKind;
use crate::btc::Hash256;
use crate::proxy::{EventRecord, UnwrapStatus};
use crate::value::{Ratio, Sats, Units};

/// An agent action the protocol refused.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionFailure {
    pub tick: u64,
    pub agent: String,
    pub action: String,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub checked: u64,
    pub failed: u64,
}

/// Accounting snapshot taken after every tick.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickSnapshot {
    pub tick: u64,
    pub time: u64,
    pub supply: Sats,
    pub locked: Sats,
    /// Confirmed satoshi at all Locker addresses.
    pub locker_btc: Sats,
    /// Stolen satoshi mined but not yet slashed.
    pub theft_delta: Sats,
    pub failed: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheftWindow {
    pub txid: Hash256,
    pub locker: String,
    pub amount: Sats,
    pub mined_tick: Option<u64>,
    pub slashed_tick: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnwrapOutcome {
    pub request_id: Hash256,
    pub user: String,
    pub locker: String,
    pub amount_due: Sats,
    pub created_at: u64,
    pub deadline: u64,
    pub status: UnwrapStatus,
    pub resolved_at: Option<u64>,
    pub compensation: Units,
    /// Value of the compensation and of the amount due at claim time.
    pub compensation_value: Option<Ratio>,
    pub due_value: Option<Ratio>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentOutcome {
    pub btc: Sats,
    pub telebtc: Sats,
    pub tokens: Units,
    pub actions: u64,
    pub failures: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub name: String,
    pub role: String,
    pub profile: String,
    pub outcome: AgentOutcome,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub tick: u64,
    pub invariant: String,
    pub detail: String,
    /// Hex digest of the accounting state at the failing tick.
    pub digest: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalState {
    pub total_supply: Sats,
    pub total_locked: Sats,
    pub treasury: Units,
    pub bond_escrow: Units,
    pub bonds_posted: Units,
    pub bonds_paid: Units,
    pub chain_height: u64,
    pub finalized_height: u64,
    /// Per-locker (collateral, locked_btc, status).
    pub lockers: BTreeMap<String, (Units, Sats, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    pub scenario: String,
    pub seed: u64,
    pub bridge: BridgeKind,
    pub ticks_run: u64,
    pub tick_seconds: u64,
    pub roster: Vec<RosterEntry>,
    pub events: Vec<EventRecord>,
    pub failures: Vec<ActionFailure>,
    pub invariants: BTreeMap<String, Tally>,
    pub ticks: Vec<TickSnapshot>,
    pub unwraps: Vec<UnwrapOutcome>,
    pub thefts: Vec<TheftWindow>,
    pub final_state: FinalState,
    pub violation: Option<Violation>,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// The event log alone, one JSON object per line.
    pub fn events_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse_events_jsonl(s: &str) -> Result<Vec<EventRecord>, serde_json::Error> {
        s.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
    }

    pub fn violations(&self) -> u64 {
        self.invariants.values().map(|t| t.failed).sum()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let f = &self.final_state;
        let _ = writeln!(s, "scenario {} seed {} bridge {:?}", self.scenario, self.seed, self.bridge);
        let _ = writeln!(s, "ticks {} ({} s each), chain height {}, finalized {}", self.ticks_run, self.tick_seconds, f.chain_height, f.finalized_height);
        let _ = writeln!(s, "supply {} sat, locked {} sat, treasury {}", f.total_supply, f.total_locked, f.treasury);
        let _ = writeln!(s, "bonds posted {} paid {} escrow {}", f.bonds_posted, f.bonds_paid, f.bond_escrow);
        let _ = writeln!(s, "events {}, refused actions {}", self.events.len(), self.failures.len());
        let (mut paid, mut slashed, mut open) = (0, 0, 0);
        for u in &self.unwraps {
            match u.status {
                UnwrapStatus::Paid => paid += 1,
                UnwrapStatus::Slashed => slashed += 1,
                UnwrapStatus::Open => open += 1,
            }
        }
        let _ = writeln!(s, "unwraps: {paid} paid, {slashed} slashed, {open} open");
        for t in &self.thefts {
            let _ = writeln!(s, "theft by {}: {} sat, mined {:?}, slashed {:?}", t.locker, t.amount, t.mined_tick, t.slashed_tick);
        }
        let _ = writeln!(s, "invariants:");
        for (name, t) in &self.invariants {
            let _ = writeln!(s, "  {name:<26} {} checks, {} failed", t.checked, t.failed);
        }
        let _ = writeln!(s, "agents:");
        for r in &self.roster {
            let o = &r.outcome;
            let _ = writeln!(
                s,
                "  {:<14} {:<10} {:<20} btc {} telebtc {} tokens {} actions {} refused {}",
                r.name, r.role, r.profile, o.btc, o.telebtc, o.tokens, o.actions, o.failures
            );
        }
        match &self.violation {
            None => s.push_str("violations: 0\n"),
            Some(v) => {
                let _ = writeln!(s, "VIOLATION at tick {}: {} ({}) digest {}", v.tick, v.invariant, v.detail, v.digest);
            }
        }
        s
    }
}
