//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines come out in order and
//! uncaptured. A criterion whose input data is missing from the
//! repository prints FAIL with the reason but does not flip the exit code;
//! every other failure does.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use telebtc_core::bridge::{Checkpoint, OptimisticBridge, OptimisticParams, RootStatus, SpvBridge};
use telebtc_core::btc::{
    hash_pair, merkle_branch, merkle_root, read_header_file, sha256d, verify_merkle_branch, BlockHeader, Hash256,
    RetargetRule, Target256,
};
use telebtc_core::chainsim::{ChainParams, ChainState};
use telebtc_core::lockers::{liquidation_check, EconParams};
use telebtc_core::proxy::{Event, UnwrapStatus};
use telebtc_core::sim::{preset, run_scenario, Sim, SimReport, PRESET_NAMES};
use telebtc_core::{AccountId, Ratio};

enum Verdict {
    Pass(String),
    Fail(String),
    /// Input data the check needs is not available.
    Missing(String),
}

type Check = fn() -> Verdict;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn verdict(r: Result<String, String>) -> Verdict {
    match r {
        Ok(s) => Verdict::Pass(s),
        Err(s) => Verdict::Fail(s),
    }
}

fn run(name: &str) -> Result<SimReport, String> {
    run_scenario(&preset(name).ok_or("unknown preset")?).map_err(|e| format!("{name}: {e}"))
}

fn peg_safety() -> Verdict {
    verdict((|| {
        let mut ticks = 0;
        let mut windows = 0;
        for name in PRESET_NAMES {
            let t0 = Instant::now();
            let r = run(name)?;
            ensure(r.ticks_run <= 500, format!("{name}: {} ticks", r.ticks_run))?;
            for th in &r.thefts {
                ensure(th.slashed_tick.is_some(), format!("{name}: theft {} never slashed", th.txid))?;
                windows += 1;
            }
            let in_window = |tick: u64| {
                r.thefts.iter().any(|t| matches!((t.mined_tick, t.slashed_tick), (Some(m), Some(s)) if tick >= m && tick < s))
            };
            for s in &r.ticks {
                ensure(s.supply == s.locked, format!("{name} tick {}: supply {} locked {}", s.tick, s.supply, s.locked))?;
                if !in_window(s.tick) {
                    ensure(
                        s.supply <= s.locker_btc,
                        format!("{name} tick {}: supply {} above locker btc {}", s.tick, s.supply, s.locker_btc),
                    )?;
                }
                ticks += 1;
            }
            ensure(r.violation.is_none(), format!("{name}: {:?}", r.violation))?;
            ensure(t0.elapsed() < Duration::from_secs(10), format!("{name} took {:?}", t0.elapsed()))?;
        }
        Ok(format!("{} presets, {ticks} ticks, {windows} theft window(s) closed on the slashing tick", PRESET_NAMES.len()))
    })())
}

fn bridge_equivalence() -> Verdict {
    verdict((|| {
        let fnum = 6;
        let mut chain = ChainState::new(ChainParams::toy(16), &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(1000);
        let mut ts = chain.genesis().header.timestamp;
        for _ in 0..1000 {
            ts += rng.random_range(150..1100);
            chain.mine(vec![], ts).map_err(|e| e.to_string())?;
        }
        let g = chain.genesis().header;
        let cp = Checkpoint::from_header(0, g, g.timestamp);
        let rule = chain.params().rule.clone();

        let mut spv = SpvBridge::new(&cp, rule.clone(), fnum);
        for h in 1..=1000 {
            spv.add_header(&chain.canonical_block(h).unwrap().header).map_err(|e| format!("spv height {h}: {e}"))?;
        }

        let params = OptimisticParams { finalization_number: fnum, ..OptimisticParams::default() };
        let bond = params.relayer_bond;
        let mut opt = OptimisticBridge::new(&cp, rule, params);
        let relayer = AccountId::from_label("relayer");
        let mut now = g.timestamp as u64;
        for h in 1..=1000u64 {
            let head = chain.canonical_block(h).unwrap().header;
            let prev = chain.canonical_block(h - 1).unwrap().header;
            now = (now + 301).max(head.timestamp as u64);
            opt.tick(now);
            let ets = opt.needs_epoch_timestamp(h).then_some(head.timestamp);
            opt.submit_root(head.merkle_root, h, prev.merkle_root, relayer, bond, ets, now)
                .map_err(|e| format!("optimistic height {h}: {e}"))?;
        }
        opt.tick(now + 301);

        let a = spv.finalized_roots();
        let b = opt.finalized_roots();
        ensure(a.len() as u64 == 1000 - fnum, format!("spv finalized {} roots", a.len()))?;
        ensure(a == b, format!("sequences differ: spv {} optimistic {}", a.len(), b.len()))?;
        let bits: std::collections::BTreeSet<u32> = (0..=1000).map(|h| chain.canonical_block(h).unwrap().header.bits).collect();
        Ok(format!("{} identical (height, root) pairs over {} distinct difficulty values", a.len(), bits.len()))
    })())
}

fn challenge_soundness() -> Verdict {
    verdict((|| {
        let forger = AccountId::from_label("forger");
        let (mut fabricated, mut challenged_honest) = (0, 0);
        for seed in 0..100u64 {
            let mut cfg = preset("fake-root-attack").ok_or("unknown preset")?;
            cfg.seed = seed;
            let mut sim = Sim::new(&cfg).map_err(|e| e.to_string())?;
            while sim.tick() < cfg.duration_ticks {
                sim.step();
            }
            ensure(sim.violation().is_none(), format!("seed {seed}: {:?}", sim.violation()))?;
            let bridge = sim.proxy().bridge().as_optimistic().ok_or("not optimistic")?;
            let r = sim.report();
            for rec in bridge.records().filter(|r| r.height > 0) {
                let canonical = sim.chain().canonical_block(rec.height).map(|b| b.header.merkle_root);
                let honest = canonical == Some(rec.root);
                if !honest {
                    fabricated += 1;
                    ensure(rec.relayer == forger, format!("seed {seed}: non-canonical root from an honest relayer"))?;
                    ensure(
                        rec.status != RootStatus::Verified,
                        format!("seed {seed}: fabricated root at height {} verified", rec.height),
                    )?;
                } else {
                    ensure(
                        rec.status != RootStatus::Invalid,
                        format!("seed {seed}: honest root at height {} slashed", rec.height),
                    )?;
                }
            }
            for e in &r.events {
                if let Event::RootChallenged { record, .. } = &e.event {
                    let rec = bridge.record(*record).unwrap();
                    if sim.chain().canonical_block(rec.height).map(|b| b.header.merkle_root) == Some(rec.root) {
                        challenged_honest += 1;
                    }
                }
                if let Event::RootSettled { record, status: RootStatus::Verified, .. } = &e.event {
                    let rec = bridge.record(*record).unwrap();
                    ensure(rec.relayer != forger || sim.chain().canonical_block(rec.height).map(|b| b.header.merkle_root) == Some(rec.root),
                        format!("seed {seed}: fabricated record {record} settled verified"))?;
                }
            }
        }
        ensure(fabricated >= 100, format!("only {fabricated} fabricated roots submitted"))?;
        Ok(format!("100 seeds: {fabricated} fabricated roots none verified, {challenged_honest} griefed honest roots none slashed"))
    })())
}

fn liquidation_health() -> Verdict {
    // params: CR > LR > 1 and 1/LR < DR <= 1; state: DR > LV/CV and CV/LV < LR
    let strat = (2u64..300, 1u64..1000, 1u64..1000, 1u64..1000, 1u64..1_000_000_000_000, 1u64..1_000_000);
    let mut runner = TestRunner::new(Config { cases: 10_000, failure_persistence: None, ..Config::default() });
    let accepted = std::cell::Cell::new(0u64);
    let res = runner.run(&strat, |(cr_bp, lr_f, dr_f, k_f, lv, xs)| {
        let one = Ratio::one();
        let cr = Ratio::new(100 + cr_bp as i128, 100);
        let lr = &one + &((&cr - &one) * Ratio::new(lr_f as i128, 1000));
        let dr_lo = lr.recip();
        let dr = &dr_lo + &((&one - &dr_lo) * Ratio::new(dr_f as i128, 1000));
        // CV/LV strictly inside (1/DR, LR)
        let lo = dr.recip();
        let k = &lo + &((&lr - &lo) * Ratio::new(k_f as i128, 1000));
        let lv = Ratio::from_integer(lv as i128);
        let cv = &k * &lv;
        // X strictly below the over-liquidation bound
        let bound = (&(&cr * &lv) - &cv) / (&cr - &dr.recip());
        let cap = if bound < lv { bound } else { lv.clone() };
        let x = &cap * &Ratio::new(xs as i128, 1_000_000);
        let p = EconParams { collateralization_ratio: cr, liquidation_ratio: lr, discount_ratio: dr.clone(), ..EconParams::default() };
        p.validate().map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(dr > &lv / &cv);
        prop_assert!(liquidation_check(&cv, &lv, &x, &p).is_ok(), "generated triple not accepted");
        let pre = &cv / &lv;
        let post = (&cv - &(&x / &dr)) / (&lv - &x);
        prop_assert!(post > pre, "post {} <= pre {}", post, pre);
        accepted.set(accepted.get() + 1);
        Ok(())
    });
    match res {
        Ok(()) => Verdict::Pass(format!("{} accepted triples, post-ratio > pre-ratio in every case", accepted.get())),
        Err(e) => Verdict::Fail(e.to_string()),
    }
}

fn liveness() -> Verdict {
    verdict((|| {
        let (mut paid, mut slashed) = (0, 0);
        for name in ["lazy-locker", "honest-run"] {
            let r = run(name)?;
            for u in &r.unwraps {
                let at = u.resolved_at.ok_or_else(|| format!("{name}: unwrap {} never resolved", u.request_id))?;
                ensure(at <= u.deadline + r.tick_seconds, format!("{name}: resolved at {at}, deadline {}", u.deadline))?;
                match u.status {
                    UnwrapStatus::Paid => paid += 1,
                    UnwrapStatus::Slashed => {
                        let (c, d) = (u.compensation_value.as_ref().unwrap(), u.due_value.as_ref().unwrap());
                        ensure(c >= d, format!("{name}: compensation {c} below due {d}"))?;
                        slashed += 1;
                    }
                    UnwrapStatus::Open => return Err(format!("{name}: unwrap still open")),
                }
            }
        }
        ensure(slashed > 0, "no slashed unwrap exercised")?;
        Ok(format!("{paid} paid, {slashed} slashed, all within deadline + 1 tick"))
    })())
}

const GENESIS_HASH: &str = "000000000019d6689c085ae165831e934ff763ae46a2a6c172b3f1b60a8ce26f";

fn real_headers() -> Verdict {
    let path = std::env::var_os("TELEBTC_MAINNET_HEADERS")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mainnet-headers.bin"));
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) => return Verdict::Missing(format!("{}: {e}", path.display())),
    };
    let headers = match read_header_file(&bytes) {
        Ok(h) => h,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let r = (|| {
        let g = headers[0];
        ensure(g.hash().to_string() == GENESIS_HASH, format!("genesis hash {}", g.hash()))?;
        ensure(g == BlockHeader::genesis_mainnet(), "genesis fields differ")?;
        let rule = RetargetRule::mainnet();
        let mut spv = SpvBridge::new(&Checkpoint::from_header(0, g, g.timestamp), rule.clone(), 6);
        for (i, h) in headers.iter().enumerate().take(4032).skip(1) {
            spv.add_header(h).map_err(|e| format!("height {i}: {e}"))?;
        }
        Ok(headers.len().min(4032))
    })();
    match r {
        Err(e) => Verdict::Fail(e),
        Ok(n) if n < 4032 => Verdict::Missing(format!(
            "fixture holds {n} of the 4032 headers needed; genesis and heights 1..{} verify, the 2016 retarget is untested",
            n - 1
        )),
        Ok(_) => {
            let rule = RetargetRule::mainnet();
            let old = Target256::from_bits(headers[2015].bits).unwrap();
            let bits = rule.next_target(&old, headers[0].timestamp, headers[2015].timestamp).to_bits();
            if bits == headers[2016].bits {
                Verdict::Pass(format!("4032 headers verify, retarget bits {bits:#010x} match height 2016"))
            } else {
                Verdict::Fail(format!("computed bits {bits:#010x}, archival {:#010x}", headers[2016].bits))
            }
        }
    }
}

fn timestamp_attack() -> Verdict {
    verdict((|| {
        let cfg = preset("timestamp-attack").ok_or("unknown preset")?;
        let drift = cfg.optimistic.max_future_drift;
        let r = run("timestamp-attack")?;
        let skewer = AccountId::from_label("skewer");
        let refused: Vec<_> = r.failures.iter().filter(|f| f.agent == "skewer").collect();
        ensure(!refused.is_empty(), "attacker never refused")?;
        for f in &refused {
            ensure(f.error.contains("beyond the allowed drift"), format!("unexpected refusal: {}", f.error))?;
        }
        for e in &r.events {
            if let Event::RootSubmitted { relayer, epoch_timestamp: Some(ts), .. } = &e.event {
                ensure(
                    *relayer != skewer || (*ts as u64) <= e.time + drift,
                    format!("future timestamp {ts} accepted at {}", e.time),
                )?;
            }
        }
        Ok(format!("{} future epoch timestamps refused at submission", refused.len()))
    })())
}

fn determinism() -> Verdict {
    verdict((|| {
        let mut bytes = 0;
        for name in PRESET_NAMES {
            let (a, b) = (run(name)?.to_json(), run(name)?.to_json());
            ensure(a == b, format!("{name}: reports differ"))?;
            bytes += a.len();
        }
        Ok(format!("{} presets byte-identical on replay ({bytes} report bytes)", PRESET_NAMES.len()))
    })())
}

fn naive_root(level: &[Hash256]) -> Hash256 {
    if level.len() == 1 {
        return level[0];
    }
    let mut next = Vec::new();
    let mut i = 0;
    while i < level.len() {
        let r = if i + 1 < level.len() { level[i + 1] } else { level[i] };
        next.push(hash_pair(&level[i], &r));
        i += 2;
    }
    naive_root(&next)
}

fn merkle_oracle() -> Verdict {
    verdict((|| {
        let (mut branches, mut flips) = (0u64, 0u64);
        for n in 1..=16usize {
            let leaves: Vec<Hash256> = (0..n).map(|i| sha256d(format!("leaf {n} {i}").as_bytes())).collect();
            let root = naive_root(&leaves);
            ensure(merkle_root(&leaves).unwrap() == root, format!("root mismatch at n={n}"))?;
            for i in 0..n {
                let p = merkle_branch(&leaves, i).unwrap();
                ensure(verify_merkle_branch(&p, &root), format!("n={n} i={i} does not verify"))?;
                branches += 1;
                let mut bad = |q: &telebtc_core::btc::MerkleProof, r: &Hash256, what: &str| {
                    flips += 1;
                    ensure(!verify_merkle_branch(q, r), format!("n={n} i={i}: flipped {what} still verifies"))
                };
                for bit in 0..256 {
                    let mut q = p.clone();
                    q.leaf.0[bit / 8] ^= 1 << (bit % 8);
                    bad(&q, &root, "leaf bit")?;
                    for s in 0..p.siblings.len() {
                        let mut q = p.clone();
                        q.siblings[s].0[bit / 8] ^= 1 << (bit % 8);
                        bad(&q, &root, "sibling bit")?;
                    }
                    let mut r = root;
                    r.0[bit / 8] ^= 1 << (bit % 8);
                    bad(&p, &r, "root bit")?;
                }
                for bit in 0..64 {
                    let j = p.index ^ (1 << bit);
                    if (j as usize) < n {
                        let mut q = p.clone();
                        q.index = j;
                        bad(&q, &root, "index bit")?;
                    }
                }
            }
        }
        Ok(format!("{branches} branches match the brute-force root, {flips} single-bit flips all rejected"))
    })())
}

fn main() {
    let criteria: [(u32, &str, Check, Duration); 9] = [
        (1, "peg safety", peg_safety, Duration::from_secs(80)),
        (2, "bridge equivalence", bridge_equivalence, Duration::from_secs(5)),
        (3, "challenge-game soundness", challenge_soundness, Duration::from_secs(30)),
        (4, "liquidation health", liquidation_health, Duration::from_secs(5)),
        (5, "liveness outcome bound", liveness, Duration::from_secs(10)),
        (6, "real-header replay", real_headers, Duration::from_secs(2)),
        (7, "timestamp-attack rejection", timestamp_attack, Duration::from_secs(5)),
        (8, "determinism", determinism, Duration::from_secs(20)),
        (9, "merkle oracle", merkle_oracle, Duration::from_secs(5)),
    ];
    let (mut passed, mut failed, mut missing) = (0, 0, 0);
    for (n, name, check, budget) in criteria {
        let t0 = Instant::now();
        let v = check();
        let took = t0.elapsed();
        let v = match v {
            Verdict::Pass(s) if took > budget => Verdict::Fail(format!("{s}; took {took:.2?}, budget {budget:?}")),
            v => v,
        };
        match v {
            Verdict::Pass(s) => {
                passed += 1;
                println!("PASS {n} {name} ({took:.2?}): {s}");
            }
            Verdict::Fail(s) => {
                failed += 1;
                println!("FAIL {n} {name} ({took:.2?}): {s}");
            }
            Verdict::Missing(s) => {
                missing += 1;
                println!("FAIL {n} {name} ({took:.2?}): input data unavailable: {s}");
            }
        }
    }
    println!("acceptance: {passed} passed, {failed} failed, {missing} failed for missing input data");
    if failed > 0 {
        std::process::exit(1);
    }
}
