//! Browser bindings. Every export returns a JSON string; the `*_json`
//! functions hold the logic and run natively in tests.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use telebtc_core::lockers::{liquidation_check, EconParams};
use telebtc_core::proxy::FeeParams;
use telebtc_core::sim::{preset, run_scenario, SimError, PRESET_NAMES};
use telebtc_core::Ratio;

fn ratio(label: &str, s: &str) -> Result<Ratio, String> {
    s.parse().map_err(|_| format!("{label}: not a number: {s:?}"))
}

fn num(r: &Ratio) -> Value {
    json!({ "exact": r.to_string(), "approx": r.to_f64() })
}

/// Minting and burning fee (bps) sampled over r in [0, 2 r0].
pub fn fee_curve_json(mint_base: u32, mint_max: u32, burn_max: u32, r0: &str, points: u32) -> Result<String, String> {
    let fees = FeeParams { mint_fee_base: mint_base, mint_fee_max: mint_max, burn_fee_max: burn_max, r0: ratio("r0", r0)? };
    fees.validate().map_err(|e| e.to_string())?;
    let n = points.clamp(2, 1000) as i128;
    let pts: Vec<Value> = (0..=n)
        .map(|i| {
            let r = &fees.r0 * &Ratio::new(2 * i, n);
            json!({ "r": r.to_f64(), "mint_bps": fees.minting_fee_bps(Some(&r)), "burn_bps": fees.burning_fee_bps(Some(&r)) })
        })
        .collect();
    Ok(json!({ "points": pts, "empty_pool": { "mint_bps": fees.minting_fee_bps(None), "burn_bps": fees.burning_fee_bps(None) } }).to_string())
}

/// Checks one liquidation under default parameters and reports both ratios.
pub fn liquidation_json(collateral_value: &str, locked_value: &str, x: &str) -> Result<String, String> {
    let p = EconParams::default();
    let (cv, lv, x) = (ratio("collateral value", collateral_value)?, ratio("locked value", locked_value)?, ratio("X", x)?);
    if !cv.is_positive() || !lv.is_positive() || !x.is_positive() {
        return Err("all three values must be positive".into());
    }
    let pre = &cv / &lv;
    // largest X that keeps the post ratio under CR, capped by the position
    let slope = &p.collateralization_ratio - &p.discount_ratio.recip();
    let bound = (&(&p.collateralization_ratio * &lv) - &cv) / slope;
    let max_x = bound.min(lv.clone()).max(Ratio::zero());
    let mut out = json!({
        "params": {
            "collateralization_ratio": num(&p.collateralization_ratio),
            "liquidation_ratio": num(&p.liquidation_ratio),
            "discount_ratio": num(&p.discount_ratio),
        },
        "pre_ratio": num(&pre),
        "max_x": num(&max_x),
        "health_improves": p.discount_ratio > &lv / &cv,
    });
    match liquidation_check(&cv, &lv, &x, &p) {
        Ok(()) => {
            let paid = &x / &p.discount_ratio;
            let post = (&cv - &paid) / (&lv - &x);
            out["accepted"] = json!(true);
            out["collateral_paid"] = num(&paid);
            out["post_ratio"] = num(&post);
        }
        Err(e) => {
            out["accepted"] = json!(false);
            out["reason"] = json!(e.to_string());
        }
    }
    Ok(out.to_string())
}

/// Runs a shipped preset and returns its summary and per-tick series.
pub fn run_preset_json(name: &str, seed: Option<u64>) -> Result<String, String> {
    let mut cfg = preset(name).ok_or_else(|| format!("unknown preset {name}"))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = match run_scenario(&cfg) {
        Ok(r) => r,
        Err(SimError::InvariantViolation(_, r)) => *r,
        Err(e) => return Err(e.to_string()),
    };
    let series: Vec<Value> = report
        .ticks
        .iter()
        .map(|t| json!([t.tick, t.supply, t.locker_btc, t.theft_delta]))
        .collect();
    Ok(json!({
        "summary": report.summary(),
        "violations": report.violations(),
        "events": report.events.len(),
        "series": series,
    })
    .to_string())
}

pub fn preset_names_json() -> String {
    json!(PRESET_NAMES).to_string()
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn fee_curve(mint_base: u32, mint_max: u32, burn_max: u32, r0: &str, points: u32) -> Result<String, JsValue> {
    js(fee_curve_json(mint_base, mint_max, burn_max, r0, points))
}

#[wasm_bindgen]
pub fn liquidation(collateral_value: &str, locked_value: &str, x: &str) -> Result<String, JsValue> {
    js(liquidation_json(collateral_value, locked_value, x))
}

/// `seed` of 0 keeps the preset's own seed.
#[wasm_bindgen]
pub fn run_preset(name: &str, seed: u32) -> Result<String, JsValue> {
    js(run_preset_json(name, (seed != 0).then_some(seed as u64)))
}

#[wasm_bindgen]
pub fn preset_names() -> String {
    preset_names_json()
}
