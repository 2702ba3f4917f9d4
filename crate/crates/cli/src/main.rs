//! `telebtc`: run scenarios, replay real header files, inspect reports.
//!
//! Exit codes: 0 clean, 1 usage/config/I-O error, 2 protocol detection
//! (invariant violation or rejected header).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};

use telebtc_core::bridge::{Checkpoint, OptimisticBridge, OptimisticParams, SpvBridge};
use telebtc_core::btc::{read_header_file, BlockHeader, Hash256, RetargetRule};
use telebtc_core::sim::{preset, run_scenario, ScenarioConfig, SimError, SimReport, PRESET_NAMES};
use telebtc_core::AccountId;

#[derive(Parser)]
#[command(name = "telebtc", version, about = "Wrapped-BTC protocol simulator and light-client tools")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and print its summary or event log.
    Run {
        /// Scenario JSON file, or the name of a shipped preset.
        #[arg(long)]
        scenario: String,
        /// Overrides the seed in the scenario.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the full report (JSON) here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Summary)]
        format: Format,
    },
    /// Feed a raw 80-byte header file through a bridge.
    VerifyHeaders {
        #[arg(long)]
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = BridgeArg::Spv)]
        bridge: BridgeArg,
        /// height:hash:bits:epoch_start_ts; defaults to mainnet genesis.
        #[arg(long)]
        checkpoint: Option<CheckpointArg>,
        /// Stop after this many headers past the checkpoint.
        #[arg(long)]
        count: Option<usize>,
        /// Depth at which headers finalize.
        #[arg(long, default_value_t = 6)]
        finalization: u64,
    },
    /// List shipped presets, or print one as JSON.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
    /// Print a saved report.
    Report {
        #[arg(long)]
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Summary)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Summary,
    Events,
}

#[derive(Clone, Copy, ValueEnum)]
enum BridgeArg {
    Spv,
    Optimistic,
}

#[derive(Clone, Debug)]
struct CheckpointArg {
    height: u64,
    hash: Hash256,
    bits: u32,
    epoch_start_ts: u32,
}

impl FromStr for CheckpointArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [h, hash, bits, ts] = parts[..] else {
            return Err("expected height:hash:bits:epoch_start_ts".into());
        };
        let bits = bits.trim_start_matches("0x");
        Ok(CheckpointArg {
            height: h.parse().map_err(|e| format!("height: {e}"))?,
            hash: hash.parse().map_err(|e| format!("hash: {e:?}"))?,
            bits: u32::from_str_radix(bits, 16).map_err(|e| format!("bits (hex): {e}"))?,
            epoch_start_ts: ts.parse().map_err(|e| format!("epoch_start_ts: {e}"))?,
        })
    }
}

/// Error that maps to exit 1.
struct Usage(String);

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let res = match cli.cmd {
        Cmd::Run { scenario, seed, out, format } => cmd_run(&scenario, seed, out.as_deref(), format),
        Cmd::VerifyHeaders { file, bridge, checkpoint, count, finalization } => {
            cmd_verify(&file, bridge, checkpoint, count, finalization)
        }
        Cmd::Presets { show } => cmd_presets(show.as_deref()),
        Cmd::Report { file, format } => cmd_report(&file, format),
    };
    match res {
        Ok(code) => code,
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_scenario(arg: &str) -> Result<ScenarioConfig, Usage> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(cfg) = preset(arg) {
            return Ok(cfg);
        }
    }
    let text = std::fs::read_to_string(path).map_err(|e| Usage(format!("{arg}: {e}")))?;
    ScenarioConfig::from_json(&text).map_err(|e| Usage(format!("{arg}: {e}")))
}

fn emit(report: &SimReport, format: Format) {
    match format {
        Format::Summary => print!("{}", report.summary()),
        Format::Events => print!("{}", report.events_jsonl()),
    }
}

fn cmd_run(scenario: &str, seed: Option<u64>, out: Option<&Path>, format: Format) -> Result<ExitCode, Usage> {
    let mut cfg = load_scenario(scenario)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let (report, violation) = match run_scenario(&cfg) {
        Ok(r) => (r, None),
        Err(SimError::InvalidConfig(e)) => return Err(Usage(format!("{scenario}: {e}"))),
        Err(SimError::InvariantViolation(v, r)) => (*r, Some(v)),
    };
    if let Some(path) = out {
        std::fs::write(path, report.to_json()).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    }
    emit(&report, format);
    match violation {
        None => Ok(ExitCode::SUCCESS),
        Some(v) => {
            eprintln!(
                "invariant {} violated at tick {}: {}\nstate digest {}",
                v.invariant, v.tick, v.detail, v.digest
            );
            Ok(ExitCode::from(2))
        }
    }
}

fn cmd_report(file: &Path, format: Format) -> Result<ExitCode, Usage> {
    let text = std::fs::read_to_string(file).map_err(|e| Usage(format!("{}: {e}", file.display())))?;
    let report = SimReport::from_json(&text).map_err(|e| Usage(format!("{}: {e}", file.display())))?;
    emit(&report, format);
    Ok(ExitCode::SUCCESS)
}

fn cmd_presets(show: Option<&str>) -> Result<ExitCode, Usage> {
    match show {
        Some(name) => {
            let cfg = preset(name).ok_or_else(|| Usage(format!("unknown preset {name}")))?;
            println!("{}", cfg.to_json());
        }
        None => {
            for name in PRESET_NAMES {
                let cfg = preset(name).expect("shipped preset");
                println!("{name:<26} {:<11} {}", format!("{:?}", cfg.bridge).to_lowercase(), cfg.description);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::large_enum_variant)]
enum Feeder {
    Spv(SpvBridge),
    Optimistic { bridge: OptimisticBridge, now: u64, prev_root: Hash256 },
}

fn cmd_verify(
    file: &Path,
    bridge: BridgeArg,
    checkpoint: Option<CheckpointArg>,
    count: Option<usize>,
    finalization: u64,
) -> Result<ExitCode, Usage> {
    let bytes = std::fs::read(file).map_err(|e| Usage(format!("{}: {e}", file.display())))?;
    let headers = read_header_file(&bytes).map_err(|e| Usage(format!("{}: {e}", file.display())))?;
    let genesis = BlockHeader::genesis_mainnet();
    let cp_arg = checkpoint.unwrap_or(CheckpointArg {
        height: 0,
        hash: genesis.hash(),
        bits: genesis.bits,
        epoch_start_ts: genesis.timestamp,
    });
    // the checkpoint header is either the first one in the file or the built-in genesis
    let (cp_header, rest) = match headers.first() {
        Some(h) if h.hash() == cp_arg.hash => (*h, &headers[1..]),
        _ if cp_arg.hash == genesis.hash() => (genesis, &headers[..]),
        _ => return Err(Usage(format!("checkpoint {} is not the first header in the file", cp_arg.hash))),
    };
    if cp_header.bits != cp_arg.bits {
        return Err(Usage(format!("checkpoint bits {:#010x} but the header carries {:#010x}", cp_arg.bits, cp_header.bits)));
    }
    let cp = Checkpoint::from_header(cp_arg.height, cp_header, cp_arg.epoch_start_ts);
    let rest = &rest[..count.unwrap_or(rest.len()).min(rest.len())];

    let rule = RetargetRule::mainnet();
    let mut feeder = match bridge {
        BridgeArg::Spv => Feeder::Spv(SpvBridge::new(&cp, rule, finalization)),
        BridgeArg::Optimistic => {
            let params = OptimisticParams { finalization_number: finalization, ..OptimisticParams::default() };
            Feeder::Optimistic {
                bridge: OptimisticBridge::new(&cp, rule, params),
                now: cp_header.timestamp as u64,
                prev_root: cp_header.merkle_root,
            }
        }
    };
    let relayer = AccountId::from_label("relayer");
    let mut retargets = Vec::new();
    let mut last_bits = cp_header.bits;
    for (i, h) in rest.iter().enumerate() {
        let height = cp.height + 1 + i as u64;
        let res = match &mut feeder {
            Feeder::Spv(b) => b.add_header(h).map(|_| ()).map_err(|e| format!("{e:?}: {e}")),
            Feeder::Optimistic { bridge, now, prev_root } => {
                *now = (*now + bridge.params().challenge_period).max(h.timestamp as u64);
                bridge.tick(*now);
                let ets = bridge.needs_epoch_timestamp(height).then_some(h.timestamp);
                let bond = bridge.params().relayer_bond;
                let r = bridge
                    .submit_root(h.merkle_root, height, *prev_root, relayer, bond, ets, *now)
                    .map(|_| ())
                    .map_err(|e| format!("{e:?}: {e}"));
                *prev_root = h.merkle_root;
                r
            }
        };
        if let Err(e) = res {
            println!("accepted {i} headers");
            eprintln!("rejected header at height {height} ({}): {e}", h.hash());
            return Ok(ExitCode::from(2));
        }
        if h.bits != last_bits {
            retargets.push((height, last_bits, h.bits));
            last_bits = h.bits;
        }
    }
    let (kind, finalized) = match &mut feeder {
        Feeder::Spv(b) => ("spv", b.finalized_roots().len()),
        Feeder::Optimistic { bridge, now, .. } => {
            bridge.tick(*now + bridge.params().challenge_period);
            ("optimistic", bridge.finalized_roots().len())
        }
    };
    let tip = cp.height + rest.len() as u64;
    println!("bridge {kind}: accepted {} headers, finalized {finalized}, tip height {tip}", rest.len());
    for (height, from, to) in &retargets {
        println!("retarget at height {height}: {from:#010x} -> {to:#010x}");
    }
    Ok(ExitCode::SUCCESS)
}
