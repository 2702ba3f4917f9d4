use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bridge::{BridgeKind, OptimisticParams};
use crate::lockers::EconParams;
use crate::proxy::ProxyParams;
use crate::value::{PriceQuote, Ratio, Sats};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid scenario: {0}")]
pub struct InvalidConfig(pub String);

/// A full scenario description. Every field except `name`, `seed`,
/// `bridge`, `duration_ticks` and `agents` has a default.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub seed: u64,
    pub bridge: BridgeKind,
    pub duration_ticks: u64,
    #[serde(default = "default_tick_seconds")]
    pub tick_seconds: u64,
    #[serde(default = "default_block_every")]
    pub block_every_ticks: u64,
    #[serde(default = "default_epoch_len")]
    pub epoch_len: u64,
    /// Depth at which either bridge finalizes.
    #[serde(default = "default_fn")]
    pub finalization_number: u64,
    #[serde(default)]
    pub econ: EconParams,
    #[serde(default)]
    pub proxy: ProxyParams,
    #[serde(default)]
    pub optimistic: OptimisticParams,
    #[serde(default)]
    pub prices: Vec<PricePoint>,
    pub agents: Vec<AgentSpec>,
}

fn default_tick_seconds() -> u64 {
    60
}

fn default_block_every() -> u64 {
    10
}

fn default_epoch_len() -> u64 {
    16
}

fn default_fn() -> u64 {
    3
}

fn default_patience() -> u64 {
    3
}

/// Price breakpoint; the path holds each value until the next breakpoint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricePoint {
    pub tick: u64,
    pub btc_price: Ratio,
    pub collateral_price: Ratio,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub name: String,
    pub role: Role,
    /// Satoshi allocated in the genesis coinbase.
    #[serde(default)]
    pub btc: Sats,
    /// Whole collateral tokens in the agent's wallet at start.
    #[serde(default)]
    pub tokens: u64,
    #[serde(default)]
    pub plan: Vec<PlanStep>,
    /// Ticks to wait after a lock finalizes before self-submitting it.
    #[serde(default = "default_patience")]
    pub patience_ticks: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Role {
    Locker {
        /// Whole tokens posted at registration.
        collateral: u64,
        #[serde(default)]
        profile: LockerProfile,
    },
    Relayer {
        #[serde(default)]
        profile: RelayerProfile,
    },
    Teleporter {
        #[serde(default)]
        profile: TeleporterProfile,
    },
    Disputer {
        #[serde(default)]
        profile: DisputerProfile,
    },
    Slasher,
    Liquidator,
    User,
    Noop,
}

impl Role {
    /// Position in the intra-tick order.
    pub fn rank(&self) -> u8 {
        match self {
            Role::Relayer { .. } => 0,
            Role::Teleporter { .. } => 1,
            Role::Locker { .. } => 2,
            Role::Disputer { .. } => 3,
            Role::Slasher => 4,
            Role::Liquidator => 5,
            Role::User => 6,
            Role::Noop => 7,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Role::Relayer { .. } => "relayer",
            Role::Teleporter { .. } => "teleporter",
            Role::Locker { .. } => "locker",
            Role::Disputer { .. } => "disputer",
            Role::Slasher => "slasher",
            Role::Liquidator => "liquidator",
            Role::User => "user",
            Role::Noop => "noop",
        }
    }

    /// Behavior profile name, without its parameters.
    pub fn profile(&self) -> String {
        let v = match self {
            Role::Locker { profile, .. } => serde_json::to_value(profile),
            Role::Relayer { profile } => serde_json::to_value(profile),
            Role::Teleporter { profile } => serde_json::to_value(profile),
            Role::Disputer { profile } => serde_json::to_value(profile),
            _ => return "honest".into(),
        };
        match v.expect("profiles serialize") {
            serde_json::Value::String(s) => s,
            serde_json::Value::Object(m) => m.keys().next().cloned().unwrap_or_default(),
            other => other.to_string(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LockerProfile {
    #[default]
    Honest,
    /// Moves `amount` satoshi of custodied BTC to an outside address at `tick`.
    ThiefAtTick { tick: u64, amount: Sats },
    /// Never pays unwrap requests.
    LazyIgnoreUnwraps,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RelayerProfile {
    #[default]
    Honest,
    /// Posts fabricated roots at the listed heights plus `random` more
    /// heights drawn from the seed, and tries to mint against them.
    FakeRootAtHeight {
        #[serde(default)]
        heights: Vec<u64>,
        #[serde(default)]
        random: u32,
        /// Upper bound for random heights.
        #[serde(default = "default_fake_span")]
        max_height: u64,
    },
    /// Claims an epoch-final timestamp `ahead_seconds` in the future.
    TimestampAttacker { ahead_seconds: u64 },
}

fn default_fake_span() -> u64 {
    20
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TeleporterProfile {
    #[default]
    Honest,
    /// Relays nothing; users must self-submit.
    CensorTeleporters,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DisputerProfile {
    #[default]
    Honest,
    /// Also challenges honest roots with the given probability.
    Griefing { probability_bps: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanStep {
    pub tick: u64,
    pub action: PlannedAction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PlannedAction {
    /// Sends BTC to a Locker with a mint request for the agent itself.
    Lock {
        amount: Sats,
        #[serde(default)]
        teleporter_fee_bps: u16,
        #[serde(default)]
        locker: Option<String>,
    },
    /// Burns TeleBTC; `None` burns the whole balance.
    Unwrap {
        #[serde(default)]
        amount: Option<Sats>,
        #[serde(default)]
        locker: Option<String>,
    },
    Reserve {
        amount: Sats,
        #[serde(default)]
        locker: Option<String>,
    },
}

impl ScenarioConfig {
    pub fn from_json(s: &str) -> Result<Self, InvalidConfig> {
        let cfg: ScenarioConfig = serde_json::from_str(s).map_err(|e| InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), InvalidConfig> {
        let bad = |m: &str| Err(InvalidConfig(m.to_string()));
        if self.tick_seconds == 0 || self.block_every_ticks == 0 {
            return bad("tick_seconds and block_every_ticks must be positive");
        }
        if self.duration_ticks == 0 || self.duration_ticks > 100_000 {
            return bad("duration_ticks must be in 1..=100000");
        }
        if self.epoch_len < 2 || self.finalization_number == 0 {
            return bad("epoch_len must be at least 2 and finalization_number positive");
        }
        self.econ.validate().map_err(|e| InvalidConfig(e.to_string()))?;
        self.proxy.fees.validate().map_err(|e| InvalidConfig(e.to_string()))?;
        for w in self.prices.windows(2) {
            if w[0].tick >= w[1].tick {
                return bad("price breakpoints must have increasing ticks");
            }
        }
        if self.prices.iter().any(|p| !p.btc_price.is_positive() || !p.collateral_price.is_positive()) {
            return bad("prices must be positive");
        }
        let mut names = BTreeSet::new();
        for a in &self.agents {
            if !names.insert(a.name.as_str()) {
                return Err(InvalidConfig(format!("duplicate agent name {}", a.name)));
            }
            if matches!(a.role, Role::Locker { collateral: 0, .. }) {
                return Err(InvalidConfig(format!("locker {} needs collateral", a.name)));
            }
        }
        let lockers: BTreeSet<&str> = self
            .agents
            .iter()
            .filter(|a| matches!(a.role, Role::Locker { .. }))
            .map(|a| a.name.as_str())
            .collect();
        for a in &self.agents {
            for step in &a.plan {
                let named = match &step.action {
                    PlannedAction::Lock { locker, .. }
                    | PlannedAction::Unwrap { locker, .. }
                    | PlannedAction::Reserve { locker, .. } => locker,
                };
                if let Some(l) = named {
                    if !lockers.contains(l.as_str()) {
                        return Err(InvalidConfig(format!("{} names unknown locker {l}", a.name)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Step interpolation: the last breakpoint at or before `tick`, else the first.
    pub fn price_at(&self, tick: u64, time: u64) -> PriceQuote {
        price_at(&self.prices, tick, time)
    }
}

pub fn price_at(path: &[PricePoint], tick: u64, time: u64) -> PriceQuote {
    let p = path.iter().take_while(|p| p.tick <= tick).last().or(path.first());
    match p {
        Some(p) => PriceQuote::new(p.btc_price.clone(), p.collateral_price.clone(), time),
        None => PriceQuote::unit(time),
    }
}

pub const PRESET_NAMES: [&str; 8] = [
    "honest-run",
    "thief-locker",
    "lazy-locker",
    "fake-root-attack",
    "timestamp-attack",
    "price-crash-liquidation",
    "censorship-self-submit",
    "reservation-expiry",
];

pub fn preset_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "honest-run" => include_str!("../../presets/honest-run.json"),
        "thief-locker" => include_str!("../../presets/thief-locker.json"),
        "lazy-locker" => include_str!("../../presets/lazy-locker.json"),
        "fake-root-attack" => include_str!("../../presets/fake-root-attack.json"),
        "timestamp-attack" => include_str!("../../presets/timestamp-attack.json"),
        "price-crash-liquidation" => include_str!("../../presets/price-crash-liquidation.json"),
        "censorship-self-submit" => include_str!("../../presets/censorship-self-submit.json"),
        "reservation-expiry" => include_str!("../../presets/reservation-expiry.json"),
        _ => return None,
    })
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    preset_source(name).map(|s| ScenarioConfig::from_json(s).expect("shipped presets are valid"))
}
