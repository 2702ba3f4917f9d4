use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{
    AgentSpec, DisputerProfile, InvalidConfig, LockerProfile, PlannedAction, RelayerProfile, Role, ScenarioConfig,
    TeleporterProfile,
};
use super::report::{
    ActionFailure, AgentOutcome, FinalState, RosterEntry, SimReport, Tally, TheftWindow, TickSnapshot, UnwrapOutcome,
    Violation,
};
use crate::bridge::{Bridge, BridgeKind, Checkpoint, OptimisticBridge, RecordId, RootStatus, SpvBridge};
use crate::btc::{merkle_root, sha256d, BlockHeader, Hash256, MerkleProof};
use crate::chainsim::{
    build_lock_tx, build_transfer_tx, build_unlock_payment_tx, ChainParams, ChainState, OutPoint, SimTx, TxOut,
};
use crate::ids::{AccountId, BtcAddress};
use crate::lockers::{liquidation_check, LockerStatus};
use crate::proxy::{Event, Proxy, ProxyError, TxEvidence, UnwrapStatus};
use crate::value::{tokens, PriceQuote, Sats};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    InvalidConfig(#[from] InvalidConfig),
    #[error("invariant {} violated at tick {}: {}", .0.invariant, .0.tick, .0.detail)]
    InvariantViolation(Box<Violation>, Box<SimReport>),
}

pub const INVARIANTS: [&str; 8] = [
    "peg_supply_equality",
    "peg_backing",
    "no_double_mint",
    "bridge_finalized_prefix",
    "bond_conservation",
    "collateral_conservation",
    "liquidation_health",
    "user_outcome",
];

#[derive(Clone, Debug)]
struct PendingLock {
    txid: Hash256,
    finalized_tick: Option<u64>,
    attempted: bool,
}

#[derive(Clone, Debug)]
struct Payment {
    txid: Hash256,
    done: bool,
}

#[derive(Clone, Debug)]
struct FakeRoot {
    height: u64,
    record: Option<RecordId>,
    tx: Option<SimTx>,
    proved: bool,
    wrapped: bool,
}

#[derive(Clone, Debug)]
struct Agent {
    spec: AgentSpec,
    id: AccountId,
    addr: BtcAddress,
    rng: ChaCha8Rng,
    locks: Vec<PendingLock>,
    unwraps: Vec<Hash256>,
    payments: BTreeMap<Hash256, Payment>,
    theft_done: bool,
    fakes: Vec<FakeRoot>,
    attacked: BTreeSet<u64>,
    cursor: u64,
    theft_candidates: Vec<Hash256>,
    judged: BTreeSet<RecordId>,
    actions: u64,
    failures: u64,
}

/// Everything but the agents, so an acting agent can borrow it mutably.
struct World {
    cfg: ScenarioConfig,
    chain: ChainState,
    proxy: Proxy,
    mempool: Vec<SimTx>,
    tick: u64,
    start: u64,
    quote: PriceQuote,
    failures: Vec<ActionFailure>,
    thefts: BTreeMap<Hash256, TheftWindow>,
    locker_names: BTreeMap<AccountId, String>,
    names: BTreeMap<AccountId, String>,
}

pub struct Sim {
    w: World,
    agents: Vec<Agent>,
    order: Vec<usize>,
    ticks: Vec<TickSnapshot>,
    tallies: BTreeMap<String, Tally>,
    outcomes: BTreeMap<Hash256, UnwrapOutcome>,
    prev_finalized: Vec<(u64, Hash256)>,
    events_checked: usize,
    minted: BTreeSet<Hash256>,
    violation: Option<Violation>,
}

fn label_seed(seed: u64, name: &str) -> u64 {
    let h = sha256d(name.as_bytes());
    let mut b = [0u8; 8];
    b.copy_from_slice(&h.as_bytes()[..8]);
    seed ^ u64::from_le_bytes(b)
}

impl Sim {
    pub fn new(cfg: &ScenarioConfig) -> Result<Sim, SimError> {
        cfg.validate()?;
        let cfg = cfg.clone();
        let alloc: Vec<(BtcAddress, Sats)> = cfg
            .agents
            .iter()
            .filter(|a| a.btc > 0)
            .map(|a| (BtcAddress::from_label(&a.name), a.btc))
            .collect();
        let chain = ChainState::new(ChainParams::toy(cfg.epoch_len), &alloc);
        let g = chain.genesis().header;
        let cp = Checkpoint::from_header(0, g, g.timestamp);
        let rule = chain.params().rule.clone();
        let bridge = match cfg.bridge {
            BridgeKind::Spv => Bridge::Spv(SpvBridge::new(&cp, rule, cfg.finalization_number)),
            BridgeKind::Optimistic => {
                let mut p = cfg.optimistic.clone();
                p.finalization_number = cfg.finalization_number;
                Bridge::Optimistic(OptimisticBridge::new(&cp, rule, p))
            }
        };
        let mut proxy = Proxy::new(cfg.proxy.clone(), cfg.econ.clone(), bridge)
            .map_err(|e| InvalidConfig(e.to_string()))?;
        let start = g.timestamp as u64;
        let mut names = BTreeMap::new();
        let mut locker_names = BTreeMap::new();
        let mut agents = Vec::new();
        for spec in &cfg.agents {
            let id = AccountId::from_label(&spec.name);
            let addr = BtcAddress::from_label(&spec.name);
            names.insert(id, spec.name.clone());
            proxy.endow_tokens(&id, tokens(spec.tokens));
            if let Role::Locker { collateral, .. } = spec.role {
                proxy.endow_tokens(&id, tokens(collateral));
                proxy
                    .register_locker(id, addr, tokens(collateral), start)
                    .map_err(|e| InvalidConfig(format!("{}: {e}", spec.name)))?;
                locker_names.insert(id, spec.name.clone());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(label_seed(cfg.seed, &spec.name));
            let mut fakes = Vec::new();
            if let Role::Relayer { profile: RelayerProfile::FakeRootAtHeight { heights, random, max_height } } = &spec.role {
                let mut hs: BTreeSet<u64> = heights.iter().copied().filter(|h| *h > 0).collect();
                for _ in 0..*random {
                    hs.insert(rng.random_range(2..=(*max_height).max(2)));
                }
                fakes = hs.into_iter().map(|h| FakeRoot { height: h, record: None, tx: None, proved: false, wrapped: false }).collect();
            }
            agents.push(Agent {
                spec: spec.clone(),
                id,
                addr,
                rng,
                locks: Vec::new(),
                unwraps: Vec::new(),
                payments: BTreeMap::new(),
                theft_done: false,
                fakes,
                attacked: BTreeSet::new(),
                cursor: 0,
                theft_candidates: Vec::new(),
                judged: BTreeSet::new(),
                actions: 0,
                failures: 0,
            });
        }
        let mut order: Vec<usize> = (0..agents.len()).collect();
        order.sort_by_key(|&i| (agents[i].spec.role.rank(), i));
        let quote = cfg.price_at(0, start);
        let tallies = INVARIANTS.iter().map(|n| (n.to_string(), Tally::default())).collect();
        Ok(Sim {
            w: World {
                cfg,
                chain,
                proxy,
                mempool: Vec::new(),
                tick: 0,
                start,
                quote,
                failures: Vec::new(),
                thefts: BTreeMap::new(),
                locker_names,
                names,
            },
            agents,
            order,
            ticks: Vec::new(),
            tallies,
            outcomes: BTreeMap::new(),
            prev_finalized: Vec::new(),
            events_checked: 0,
            minted: BTreeSet::new(),
            violation: None,
        })
    }

    pub fn tick(&self) -> u64 {
        self.w.tick
    }

    pub fn now(&self) -> u64 {
        self.w.now()
    }

    pub fn proxy(&self) -> &Proxy {
        &self.w.proxy
    }

    /// Direct state access for negative-control tests.
    #[doc(hidden)]
    pub fn proxy_mut(&mut self) -> &mut Proxy {
        &mut self.w.proxy
    }

    pub fn chain(&self) -> &ChainState {
        &self.w.chain
    }

    pub fn violation(&self) -> Option<&Violation> {
        self.violation.as_ref()
    }

    /// Advances one tick: block production, agents in role order, protocol
    /// timers, then the invariant suite. Returns the failed invariant ids.
    pub fn step(&mut self) -> Vec<String> {
        self.w.tick += 1;
        let now = self.w.now();
        self.w.quote = self.w.cfg.price_at(self.w.tick, now);
        if self.w.tick.is_multiple_of(self.w.cfg.block_every_ticks) {
            self.w.mine(now as u32);
        }
        let mut agents = std::mem::take(&mut self.agents);
        for &i in &self.order {
            act(&mut agents[i], &mut self.w);
        }
        self.agents = agents;
        self.w.proxy.tick(now);
        self.check()
    }

    /// Runs to the configured duration, stopping at the first violation.
    pub fn run(mut self) -> Result<SimReport, SimError> {
        while self.w.tick < self.w.cfg.duration_ticks {
            self.step();
            if self.violation.is_some() {
                break;
            }
        }
        let report = self.report();
        match report.violation.clone() {
            Some(v) => Err(SimError::InvariantViolation(Box::new(v), Box::new(report))),
            None => Ok(report),
        }
    }

    fn pass(&mut self, id: &str, ok: bool, detail: impl FnOnce() -> String, failed: &mut Vec<String>) {
        let t = self.tallies.get_mut(id).expect("known invariant");
        t.checked += 1;
        if !ok {
            t.failed += 1;
            failed.push(id.to_string());
            if self.violation.is_none() {
                self.violation = Some(Violation {
                    tick: self.w.tick,
                    invariant: id.to_string(),
                    detail: detail(),
                    digest: self.digest(),
                });
            }
        }
    }

    fn digest(&self) -> String {
        let p = &self.w.proxy;
        let state = serde_json::json!({
            "tick": self.w.tick,
            "supply": p.total_supply(),
            "balances": p.telebtc().balances().iter().map(|(k, v)| (k.to_string(), v.to_string())).collect::<Vec<_>>(),
            "lockers": p.lockers().all().collect::<Vec<_>>(),
            "chain_tip": self.w.chain.tip(),
            "finalized": p.bridge().finalized_roots(),
        });
        sha256d(state.to_string().as_bytes()).to_string()
    }

    /// Invariant suite over the current state.
    pub fn check(&mut self) -> Vec<String> {
        let mut failed = Vec::new();
        let now = self.w.now();
        let tick = self.w.tick;

        // theft windows open when the theft is mined and close on the slash
        for t in self.w.thefts.values_mut() {
            if t.mined_tick.is_none() && self.w.chain.locate(&t.txid).is_ok() {
                t.mined_tick = Some(tick);
            }
        }
        let new_events: Vec<_> = self.w.proxy.events()[self.events_checked..].to_vec();
        self.events_checked = self.w.proxy.events().len();
        for e in &new_events {
            if let Event::TheftSlashed { txid, .. } = &e.event {
                if let Some(t) = self.w.thefts.get_mut(txid) {
                    t.slashed_tick.get_or_insert(tick);
                }
            }
        }

        let p = &self.w.proxy;
        let supply = p.total_supply();
        let locked = p.lockers().total_locked();
        let locker_btc: Sats = p.lockers().all().map(|l| self.w.chain.balance(&l.btc_address)).sum();
        let theft_delta: Sats = self
            .w
            .thefts
            .values()
            .filter(|t| t.mined_tick.is_some() && t.slashed_tick.is_none())
            .map(|t| t.amount)
            .sum();
        self.pass("peg_supply_equality", supply == locked, || format!("supply {supply} != locked {locked}"), &mut failed);
        self.pass(
            "peg_backing",
            supply <= locker_btc + theft_delta,
            || format!("supply {supply} exceeds locker BTC {locker_btc} + theft delta {theft_delta}"),
            &mut failed,
        );

        let mut dup = None;
        for e in &new_events {
            if let Event::Wrapped { txid, .. } = &e.event {
                if !self.minted.insert(*txid) {
                    dup = Some(*txid);
                }
            }
        }
        self.pass("no_double_mint", dup.is_none(), || format!("txid {} minted twice", dup.unwrap()), &mut failed);

        let fin = self.w.proxy.bridge().finalized_roots();
        let mut bad = None;
        if !fin.starts_with(&self.prev_finalized) {
            bad = Some("finalized sequence rewritten".to_string());
        }
        for (h, root) in &fin {
            let canon = self.w.chain.canonical_block(*h).map(|b| b.header.merkle_root);
            if canon != Some(*root) {
                bad = Some(format!("finalized root at height {h} is not on the Bitcoin chain"));
                break;
            }
        }
        self.prev_finalized = fin;
        self.pass("bridge_finalized_prefix", bad.is_none(), || bad.clone().unwrap_or_default(), &mut failed);

        let p = &self.w.proxy;
        let bonds_ok = match p.bridge().as_optimistic() {
            Some(b) => {
                let (posted, paid) = b.bond_totals();
                posted == paid + b.escrow()
            }
            None => true,
        };
        self.pass("bond_conservation", bonds_ok, || "bonds posted != paid + escrow".into(), &mut failed);

        let p = &self.w.proxy;
        let held = p.tokens().sum_balances()
            + p.lockers().total_collateral()
            + p.reservation_escrow()
            + p.treasury()
            + p.bond_escrow();
        let total = p.tokens().total_supply();
        self.pass("collateral_conservation", held == total, || format!("tokens held {held} != issued {total}"), &mut failed);

        let dr = self.w.proxy.lockers().params().discount_ratio.clone();
        let mut bad_liq = None;
        for e in &new_events {
            if let Event::Liquidated { pre_ratio, post_ratio, locker, .. } = &e.event {
                let applies = &dr * pre_ratio > crate::value::Ratio::one();
                if applies && post_ratio.as_ref().is_some_and(|post| post <= pre_ratio) {
                    bad_liq = Some(format!("liquidation of {locker} lowered health"));
                }
            }
        }
        self.pass("liquidation_health", bad_liq.is_none(), || bad_liq.clone().unwrap_or_default(), &mut failed);

        let mut bad_user = None;
        let quote = self.w.quote.clone();
        let reqs: Vec<_> = self.w.proxy.requests().values().cloned().collect();
        for r in reqs {
            let o = self.outcomes.entry(r.id).or_insert_with(|| UnwrapOutcome {
                request_id: r.id,
                user: self.w.names.get(&r.user).cloned().unwrap_or_else(|| r.user.to_string()),
                locker: self.w.names.get(&r.locker).cloned().unwrap_or_else(|| r.locker.to_string()),
                amount_due: r.amount_due,
                created_at: r.created_at,
                deadline: r.deadline,
                status: UnwrapStatus::Open,
                resolved_at: None,
                compensation: 0,
                compensation_value: None,
                due_value: None,
            });
            if o.status == UnwrapStatus::Open && r.status != UnwrapStatus::Open {
                o.status = r.status;
                o.resolved_at = Some(now);
                o.compensation = r.compensation;
                if r.status == UnwrapStatus::Slashed {
                    let cv = quote.collateral_value(r.compensation);
                    let dv = quote.btc_value(r.amount_due);
                    if cv < dv {
                        bad_user = Some(format!("request {} compensated below amount due", r.id));
                    }
                    o.compensation_value = Some(cv);
                    o.due_value = Some(dv);
                }
            }
        }
        self.pass("user_outcome", bad_user.is_none(), || bad_user.clone().unwrap_or_default(), &mut failed);

        self.ticks.push(TickSnapshot { tick, time: now, supply, locked, locker_btc, theft_delta, failed: failed.clone() });
        failed
    }

    pub fn report(&self) -> SimReport {
        let p = &self.w.proxy;
        let roster = self
            .agents
            .iter()
            .map(|a| RosterEntry {
                name: a.spec.name.clone(),
                role: a.spec.role.label().into(),
                profile: a.spec.role.profile(),
                outcome: AgentOutcome {
                    btc: self.w.chain.balance(&a.addr),
                    telebtc: p.telebtc_balance(&a.id),
                    tokens: p.token_balance(&a.id),
                    actions: a.actions,
                    failures: a.failures,
                },
            })
            .collect();
        let (posted, paid) = p.bridge().as_optimistic().map(|b| b.bond_totals()).unwrap_or((0, 0));
        let final_state = FinalState {
            total_supply: p.total_supply(),
            total_locked: p.lockers().total_locked(),
            treasury: p.treasury(),
            bond_escrow: p.bond_escrow(),
            bonds_posted: posted,
            bonds_paid: paid,
            chain_height: self.w.chain.height(),
            finalized_height: p.bridge().last_finalized_height(),
            lockers: p
                .lockers()
                .all()
                .map(|l| {
                    let name = self.w.locker_names.get(&l.id).cloned().unwrap_or_else(|| l.id.to_string());
                    (name, (l.collateral, l.locked_btc, format!("{:?}", l.status)))
                })
                .collect(),
        };
        SimReport {
            scenario: self.w.cfg.name.clone(),
            seed: self.w.cfg.seed,
            bridge: self.w.cfg.bridge,
            ticks_run: self.w.tick,
            tick_seconds: self.w.cfg.tick_seconds,
            roster,
            events: p.events().to_vec(),
            failures: self.w.failures.clone(),
            invariants: self.tallies.clone(),
            ticks: self.ticks.clone(),
            unwraps: self.outcomes.values().cloned().collect(),
            thefts: self.w.thefts.values().cloned().collect(),
            final_state,
            violation: self.violation.clone(),
        }
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimReport, SimError> {
    Sim::new(cfg)?.run()
}

/// A lock transaction that never touches Bitcoin.
fn fake_lock_tx(name: &str, height: u64, locker: BtcAddress) -> SimTx {
    let seed = sha256d(format!("fabricated:{name}:{height}").as_bytes());
    let payload = crate::chainsim::RequestPayload::Lock {
        target_receiver: AccountId::from_label(name),
        teleporter_fee_bps: 0,
    };
    SimTx::new(
        vec![OutPoint { txid: seed, vout: 0 }],
        vec![TxOut { address: locker, amount: 10 * crate::value::SATS_PER_BTC }],
        Some(payload.encode()),
    )
}

impl World {
    fn now(&self) -> u64 {
        self.start + self.tick * self.cfg.tick_seconds
    }

    fn mine(&mut self, ts: u32) {
        let txs = std::mem::take(&mut self.mempool);
        self.chain.mine(txs, ts).expect("agents only broadcast valid, non-conflicting transactions");
    }

    fn fail(&mut self, a: &mut Agent, action: &str, err: impl ToString) {
        a.failures += 1;
        self.failures.push(ActionFailure {
            tick: self.tick,
            agent: a.spec.name.clone(),
            action: action.to_string(),
            error: err.to_string(),
        });
    }

    fn outcome<T, E: ToString>(&mut self, a: &mut Agent, action: &str, r: Result<T, E>) -> Option<T> {
        a.actions += 1;
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.fail(a, action, e);
                None
            }
        }
    }

    /// Confirmed outputs of `addr` not already spent by a queued transaction.
    fn spendable(&self, addr: &BtcAddress) -> Vec<(OutPoint, TxOut)> {
        let queued: BTreeSet<OutPoint> = self.mempool.iter().flat_map(|t| t.inputs.iter().copied()).collect();
        self.chain.utxos_of(addr).into_iter().filter(|(op, _)| !queued.contains(op)).collect()
    }

    fn finalized_height(&self) -> u64 {
        self.proxy.bridge().last_finalized_height()
    }

    /// Inclusion data for a finalized transaction.
    fn evidence(&self, txid: &Hash256) -> Option<(SimTx, u64, u64, MerkleProof)> {
        let inc = self.chain.inclusion_proof(txid).ok()?;
        if inc.height > self.finalized_height() {
            return None;
        }
        let tx = self.chain.tx(txid)?.clone();
        Some((tx, inc.height, inc.tx_index as u64, inc.proof))
    }

    fn wrap(&mut self, a: &mut Agent, txid: &Hash256) {
        let Some((tx, h, i, proof)) = self.evidence(txid) else { return };
        let (now, quote) = (self.now(), self.quote.clone());
        let r = self.proxy.wrap(TxEvidence { tx: &tx, height: h, tx_index: i, proof: &proof }, a.id, now, &quote);
        self.outcome(a, "wrap", r);
    }

    fn locker_id(&self, name: &str) -> AccountId {
        AccountId::from_label(name)
    }

    fn active_lockers(&self) -> Vec<(AccountId, BtcAddress, Sats)> {
        self.proxy
            .lockers()
            .all()
            .filter(|l| l.status == LockerStatus::Active)
            .map(|l| (l.id, l.btc_address, l.locked_btc))
            .collect()
    }

    /// Locker with the most free capacity that covers `amount`.
    fn best_for_lock(&self, amount: Sats) -> Option<AccountId> {
        let mut best: Option<(Sats, AccountId)> = None;
        for (id, _, _) in self.active_lockers() {
            let free = self.proxy.free_capacity(&id, &self.quote);
            if free >= amount && best.is_none_or(|(f, _)| free > f) {
                best = Some((free, id));
            }
        }
        best.map(|(_, id)| id)
    }

    /// Locker with the most locked BTC.
    fn best_for_unwrap(&self) -> Option<AccountId> {
        let mut best: Option<(Sats, AccountId)> = None;
        for (id, _, locked) in self.active_lockers() {
            if best.is_none_or(|(l, _)| locked > l) {
                best = Some((locked, id));
            }
        }
        best.map(|(_, id)| id)
    }
}

fn act(a: &mut Agent, w: &mut World) {
    match a.spec.role.clone() {
        Role::Relayer { profile } => relayer(a, w, &profile),
        Role::Teleporter { profile } => teleporter(a, w, &profile),
        Role::Locker { profile, .. } => locker(a, w, &profile),
        Role::Disputer { profile } => disputer(a, w, &profile),
        Role::Slasher => slasher(a, w),
        Role::Liquidator => liquidator(a, w),
        Role::User | Role::Noop => {}
    }
    if !matches!(a.spec.role, Role::Noop) {
        common(a, w);
    }
}

fn relayer(a: &mut Agent, w: &mut World, profile: &RelayerProfile) {
    let now = w.now();
    match w.cfg.bridge {
        BridgeKind::Spv => {
            if !matches!(profile, RelayerProfile::Honest) {
                return;
            }
            loop {
                let next = w.proxy.bridge().as_spv().expect("spv").max_height() + 1;
                let Some(b) = w.chain.canonical_block(next) else { break };
                let header = b.header;
                let r = w.proxy.relay_header(&header, now);
                if w.outcome(a, "relay_header", r).is_none() {
                    break;
                }
            }
        }
        BridgeKind::Optimistic => match profile {
            RelayerProfile::Honest => {
                answer_challenges(a, w);
                submit_honest_roots(a, w);
            }
            RelayerProfile::FakeRootAtHeight { .. } => fake_roots(a, w),
            RelayerProfile::TimestampAttacker { ahead_seconds } => timestamp_attack(a, w, *ahead_seconds),
        },
    }
}

fn optimistic(w: &World) -> &OptimisticBridge {
    w.proxy.bridge().as_optimistic().expect("optimistic bridge")
}

/// Height where a root may go next, and whether it sits on a usable
/// canonical parent.
fn submittable(w: &World, height: u64) -> bool {
    let b = optimistic(w);
    let last = b.last_submitted_height();
    if height != last && height != last + 1 {
        return false;
    }
    let (Some(_), Some(parent)) = (w.chain.canonical_block(height), w.chain.canonical_block(height - 1)) else {
        return false;
    };
    b.usable_record(height - 1, &parent.header.merkle_root, w.now()).is_some()
}

fn epoch_ts(w: &World, height: u64) -> Option<u32> {
    let b = optimistic(w);
    b.needs_epoch_timestamp(height).then(|| w.chain.canonical_block(height).expect("exists").header.timestamp)
}

fn honest_record_exists(w: &World, height: u64) -> bool {
    let Some(block) = w.chain.canonical_block(height) else { return false };
    let b = optimistic(w);
    b.records_at(height).any(|r| {
        r.root == block.header.merkle_root
            && r.status != RootStatus::Invalid
            && r.epoch_timestamp.is_none_or(|t| t == block.header.timestamp)
    })
}

fn submit_honest_roots(a: &mut Agent, w: &mut World) {
    loop {
        let last = optimistic(w).last_submitted_height();
        let h = if last == 0 || honest_record_exists(w, last) { last + 1 } else { last };
        if !submittable(w, h) {
            break;
        }
        let block = w.chain.canonical_block(h).expect("submittable");
        let root = block.header.merkle_root;
        let parent = w.chain.canonical_block(h - 1).expect("submittable").header.merkle_root;
        let ts = epoch_ts(w, h);
        let now = w.now();
        let r = w.proxy.submit_root(a.id, root, h, parent, ts, now);
        if w.outcome(a, "submit_root", r).is_none() {
            break;
        }
    }
}

fn answer_challenges(a: &mut Agent, w: &mut World) {
    let mine: Vec<(RecordId, u64)> = optimistic(w)
        .records()
        .filter(|r| r.relayer == a.id && r.status == RootStatus::Challenged)
        .map(|r| (r.id, r.height))
        .collect();
    for (id, h) in mine {
        let header = w.chain.canonical_block(h).expect("relayed from chain").header;
        let prev = w.chain.canonical_block(h - 1).expect("parent").header;
        let now = w.now();
        let r = w.proxy.prove_root(id, &header, &prev, now);
        w.outcome(a, "prove_root", r);
    }
}

/// A header claiming `root` on the canonical parent, without the work.
fn forged_header(w: &World, height: u64, root: Hash256, bits: u32) -> BlockHeader {
    let prev = w.chain.canonical_block(height - 1).expect("parent").header;
    let mut h = BlockHeader {
        version: 1,
        parent_hash: prev.hash(),
        merkle_root: root,
        timestamp: w.chain.canonical_block(height).map(|b| b.header.timestamp).unwrap_or(prev.timestamp + 600),
        bits,
        nonce: 0,
    };
    // no hashpower: keep the first nonce that misses the target
    while h.meets_pow().unwrap_or(false) {
        h.nonce += 1;
    }
    h
}

fn fake_roots(a: &mut Agent, w: &mut World) {
    let mut fakes = std::mem::take(&mut a.fakes);
    for f in fakes.iter_mut() {
        match f.record {
            None => {
                if !submittable(w, f.height) {
                    continue;
                }
                let Some((_, locker_addr, _)) = w.active_lockers().first().copied() else { continue };
                let tx = fake_lock_tx(&a.spec.name, f.height, locker_addr);
                let root = merkle_root(&[tx.txid]).expect("one leaf");
                f.tx = Some(tx);
                let parent = w.chain.canonical_block(f.height - 1).expect("submittable").header.merkle_root;
                let ts = epoch_ts(w, f.height);
                let now = w.now();
                let r = w.proxy.submit_root(a.id, root, f.height, parent, ts, now);
                match w.outcome(a, "submit_fake_root", r) {
                    Some(id) => f.record = Some(id),
                    None => f.height = u64::MAX,
                }
            }
            Some(id) => {
                let rec = optimistic(w).record(id).expect("own record").clone();
                if rec.status == RootStatus::Challenged && !f.proved {
                    f.proved = true;
                    let header = forged_header(w, f.height, rec.root, rec.bits);
                    let prev = w.chain.canonical_block(f.height - 1).expect("parent").header;
                    let now = w.now();
                    let r = w.proxy.prove_root(id, &header, &prev, now);
                    w.outcome(a, "prove_fake_root", r);
                }
                if !f.wrapped && w.finalized_height() >= f.height {
                    f.wrapped = true;
                    let tx = f.tx.clone().expect("submitted");
                    let proof = MerkleProof { leaf: tx.txid, index: 0, siblings: vec![] };
                    let (now, quote) = (w.now(), w.quote.clone());
                    let ev = TxEvidence { tx: &tx, height: f.height, tx_index: 0, proof: &proof };
                    let r = w.proxy.wrap(ev, a.id, now, &quote);
                    w.outcome(a, "wrap_fabricated", r);
                }
            }
        }
    }
    a.fakes = fakes;
}

fn timestamp_attack(a: &mut Agent, w: &mut World, ahead: u64) {
    let l = w.chain.params().rule.epoch_len;
    let last = optimistic(w).last_submitted_height();
    for h in [last, last + 1] {
        if h % l != l - 1 || a.attacked.contains(&h) || !submittable(w, h) || honest_record_exists(w, h) {
            continue;
        }
        a.attacked.insert(h);
        let root = w.chain.canonical_block(h).expect("submittable").header.merkle_root;
        let parent = w.chain.canonical_block(h - 1).expect("submittable").header.merkle_root;
        let now = w.now();
        let ts = now + optimistic(w).params().max_future_drift + ahead;
        let r = w.proxy.submit_root(a.id, root, h, parent, Some(ts.min(u32::MAX as u64) as u32), now);
        w.outcome(a, "submit_future_timestamp", r);
    }
}

fn teleporter(a: &mut Agent, w: &mut World, profile: &TeleporterProfile) {
    if *profile == TeleporterProfile::CensorTeleporters {
        return;
    }
    let fin = w.finalized_height();
    while a.cursor < fin {
        a.cursor += 1;
        let txs = w.chain.canonical_block(a.cursor).expect("finalized is canonical").txs.clone();
        for tx in txs.iter().filter(|t| !t.is_coinbase()) {
            let lock = matches!(tx.payload(), Some(crate::chainsim::RequestPayload::Lock { .. }));
            let to_locker = tx.outputs.iter().any(|o| w.proxy.lockers().by_address(&o.address).is_some());
            if lock && to_locker && !w.proxy.used_txids().contains(&tx.txid) {
                w.wrap(a, &tx.txid);
            }
        }
    }
}

fn locker(a: &mut Agent, w: &mut World, profile: &LockerProfile) {
    if let LockerProfile::ThiefAtTick { tick, amount } = profile {
        if w.tick >= *tick && !a.theft_done {
            a.theft_done = true;
            let utxos = w.spendable(&a.addr);
            let stash = BtcAddress::from_label(&format!("{}-stash", a.spec.name));
            let r = build_transfer_tx(&utxos, stash, *amount, None);
            if let Some(tx) = w.outcome(a, "steal", r) {
                w.thefts.insert(
                    tx.txid,
                    TheftWindow { txid: tx.txid, locker: a.spec.name.clone(), amount: *amount, mined_tick: None, slashed_tick: None },
                );
                w.mempool.push(tx);
            }
        }
    }
    if *profile == LockerProfile::LazyIgnoreUnwraps {
        return;
    }
    let open: Vec<_> = w
        .proxy
        .requests()
        .values()
        .filter(|r| r.locker == a.id && r.status == UnwrapStatus::Open && !a.payments.contains_key(&r.id))
        .map(|r| (r.id, r.btc_receiver, r.amount_due))
        .collect();
    for (id, receiver, due) in open {
        let utxos = w.spendable(&a.addr);
        let r = build_unlock_payment_tx(&utxos, receiver, due, id);
        match r {
            Ok(tx) => {
                a.actions += 1;
                a.payments.insert(id, Payment { txid: tx.txid, done: false });
                w.mempool.push(tx);
            }
            // change from an earlier payment is still queued; retry next tick
            Err(_) if !w.mempool.is_empty() => {}
            Err(e) => {
                w.fail(a, "pay_unwrap", e);
                a.payments.insert(id, Payment { txid: Hash256::ZERO, done: true });
            }
        }
    }
    let due: Vec<(Hash256, Hash256)> = a.payments.iter().filter(|(_, p)| !p.done).map(|(r, p)| (*r, p.txid)).collect();
    for (request, txid) in due {
        let Some((tx, h, i, proof)) = w.evidence(&txid) else { continue };
        a.payments.get_mut(&request).expect("listed").done = true;
        let now = w.now();
        let r = w.proxy.submit_payment_proof(request, TxEvidence { tx: &tx, height: h, tx_index: i, proof: &proof }, now, &w.chain);
        w.outcome(a, "submit_payment_proof", r);
    }
}

/// A record is honest if it matches the Bitcoin chain at its height,
/// including any epoch timestamp it claims.
fn record_is_honest(w: &World, root: &Hash256, height: u64, ts: Option<u32>) -> bool {
    match w.chain.canonical_block(height) {
        Some(b) => b.header.merkle_root == *root && ts.is_none_or(|t| t == b.header.timestamp),
        None => false,
    }
}

fn disputer(a: &mut Agent, w: &mut World, profile: &DisputerProfile) {
    if w.cfg.bridge != BridgeKind::Optimistic {
        return;
    }
    let now = w.now();
    let open: Vec<_> = optimistic(w)
        .records()
        .filter(|r| r.status == RootStatus::Pending && now < r.challenge_deadline && !a.judged.contains(&r.id))
        .map(|r| (r.id, r.root, r.height, r.epoch_timestamp))
        .collect();
    for (id, root, height, ts) in open {
        a.judged.insert(id);
        let honest = record_is_honest(w, &root, height, ts);
        let grief = match profile {
            DisputerProfile::Honest => false,
            DisputerProfile::Griefing { probability_bps } => honest && a.rng.random_range(0..10_000) < *probability_bps,
        };
        if !honest || grief {
            let r = w.proxy.challenge_root(a.id, id, now);
            w.outcome(a, "challenge_root", r);
        }
    }
}

fn slasher(a: &mut Agent, w: &mut World) {
    let fin = w.finalized_height();
    while a.cursor < fin {
        a.cursor += 1;
        let txs = w.chain.canonical_block(a.cursor).expect("finalized").txs.clone();
        for tx in txs.iter().filter(|t| !t.is_coinbase()) {
            if w.proxy.theft_amount(tx, &w.chain).is_some_and(|(_, s)| s > 0) {
                a.theft_candidates.push(tx.txid);
            }
        }
    }
    let grace = w.proxy.lockers().params().theft_grace;
    let now = w.now();
    let mut keep = Vec::new();
    for txid in std::mem::take(&mut a.theft_candidates) {
        let Some((tx, h, i, proof)) = w.evidence(&txid) else { continue };
        let Some((locker, stolen)) = w.proxy.theft_amount(&tx, &w.chain) else { continue };
        if w.proxy.lockers().is_recorded_payment(&locker, &txid) || w.proxy.is_reported_theft(&txid) {
            continue;
        }
        let header = w.chain.canonical_block(h).expect("finalized").header;
        if header.timestamp as u64 + grace >= now {
            keep.push(txid);
            continue;
        }
        let quote = w.quote.clone();
        let ev = TxEvidence { tx: &tx, height: h, tx_index: i, proof: &proof };
        let r = w.proxy.report_theft(ev, &header, a.id, stolen, now, &quote, &w.chain);
        w.outcome(a, "report_theft", r);
    }
    a.theft_candidates = keep;
}

fn liquidator(a: &mut Agent, w: &mut World) {
    let quote = w.quote.clone();
    let params = w.proxy.lockers().params().clone();
    for (id, _, locked) in w.active_lockers() {
        let budget = (w.proxy.telebtc_balance(&a.id)).min(locked);
        if budget == 0 {
            continue;
        }
        let l = w.proxy.lockers().get(&id).expect("active");
        let cv = quote.collateral_value(l.collateral);
        let lv = quote.btc_value(l.locked_btc);
        let ok = |x: Sats| liquidation_check(&cv, &lv, &quote.btc_value(x), &params).is_ok();
        if !ok(1) {
            continue;
        }
        // valid amounts form a prefix of 1..=budget
        let (mut lo, mut hi) = (1, budget);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let now = w.now();
        let r = w.proxy.liquidate(a.id, id, lo, now, &quote);
        w.outcome(a, "liquidate", r);
    }
}

/// Plan steps, self-submission of own locks, and timeout claims.
fn common(a: &mut Agent, w: &mut World) {
    let now = w.now();
    let steps: Vec<PlannedAction> =
        a.spec.plan.iter().filter(|s| s.tick == w.tick).map(|s| s.action.clone()).collect();
    for step in steps {
        match step {
            PlannedAction::Lock { amount, teleporter_fee_bps, locker } => {
                let reserved = w
                    .proxy
                    .reservations()
                    .values()
                    .find(|r| r.user == a.id && r.status == crate::proxy::ReservationStatus::Open && r.amount >= amount)
                    .map(|r| r.locker);
                let target = locker.map(|n| w.locker_id(&n)).or(reserved).or_else(|| w.best_for_lock(amount));
                let Some(target) = target else {
                    a.actions += 1;
                    w.fail(a, "lock", "no locker with enough free capacity");
                    continue;
                };
                let addr = w.proxy.lockers().get(&target).expect("registered").btc_address;
                let utxos = w.spendable(&a.addr);
                let r = build_lock_tx(&utxos, addr, amount, a.id, teleporter_fee_bps as u32);
                if let Some(tx) = w.outcome(a, "lock", r) {
                    a.locks.push(PendingLock { txid: tx.txid, finalized_tick: None, attempted: false });
                    w.mempool.push(tx);
                }
            }
            PlannedAction::Unwrap { amount, locker } => {
                let x = amount.unwrap_or_else(|| w.proxy.telebtc_balance(&a.id));
                let target = locker.map(|n| w.locker_id(&n)).or_else(|| w.best_for_unwrap());
                let Some(target) = target else {
                    a.actions += 1;
                    w.fail(a, "unwrap", "no active locker");
                    continue;
                };
                let quote = w.quote.clone();
                let r = w.proxy.unwrap(a.id, x, target, a.addr, now, &quote);
                if let Some(id) = w.outcome(a, "unwrap", r) {
                    a.unwraps.push(id);
                }
            }
            PlannedAction::Reserve { amount, locker } => {
                let target = locker.map(|n| w.locker_id(&n)).or_else(|| w.best_for_lock(amount));
                let deposit = w.proxy.params().reservation_deposit;
                let quote = w.quote.clone();
                let r = match target {
                    Some(t) => w.proxy.reserve_capacity(a.id, t, amount, deposit, now, &quote),
                    None => Err(ProxyError::InsufficientCapacity),
                };
                w.outcome(a, "reserve", r);
            }
        }
    }

    let fin = w.finalized_height();
    let mut locks = std::mem::take(&mut a.locks);
    for l in locks.iter_mut() {
        if l.attempted || w.proxy.used_txids().contains(&l.txid) {
            l.attempted = true;
            continue;
        }
        if l.finalized_tick.is_none() && w.chain.locate(&l.txid).is_ok_and(|(_, h, _)| h <= fin) {
            l.finalized_tick = Some(w.tick);
        }
        if l.finalized_tick.is_some_and(|t| w.tick >= t + a.spec.patience_ticks) {
            l.attempted = true;
            let txid = l.txid;
            w.wrap(a, &txid);
        }
    }
    locks.retain(|l| !l.attempted);
    a.locks = locks;

    let quote = w.quote.clone();
    for id in a.unwraps.clone() {
        let r = &w.proxy.requests()[&id];
        if r.status == UnwrapStatus::Open && now > r.deadline {
            let res = w.proxy.claim_timeout(id, now, &quote);
            w.outcome(a, "claim_timeout", res);
        }
    }
    a.unwraps.retain(|id| w.proxy.requests()[id].status == UnwrapStatus::Open);
}
