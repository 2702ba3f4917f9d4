//! TeleBTC protocol core.
//!
//! * [`btc`]: Bitcoin header codec, proof-of-work and Merkle proofs.
//! * [`chainsim`]: a deterministic simulated Bitcoin chain with toy proof-of-work.
//! * [`bridge`]: the SPV and optimistic light-client bridges.
//! * [`lockers`]: Locker registration, collateral, liquidation and slashing.
//! * [`proxy`]: wrap and unwrap flows, fees, reservations and theft reports.
//! * [`sim`]: the multi-agent scenario harness, invariants and reports.

pub mod bridge;
pub mod btc;
pub mod chainsim;
pub mod ids;
pub mod lockers;
pub mod proxy;
pub mod sim;
pub mod value;

pub use ids::{AccountId, BtcAddress};
pub use value::{PriceQuote, Ratio, Sats, Units};
