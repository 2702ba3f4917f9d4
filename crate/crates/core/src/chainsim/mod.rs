//! Deterministic simulated Bitcoin chain.
//!
//! Toy proof-of-work with real header hashing and retargeting, forks with a
//! first-seen tie rule, and a UTXO model without scripts: an output belongs
//! to whoever the address names.

mod chain;
mod payload;
mod tx;

pub use chain::{solve_header, ChainError, ChainParams, ChainState, SimBlock, TxInclusion};
pub use payload::{PayloadError, RequestPayload, PAYLOAD_VERSION, TAG_LOCK, TAG_UNLOCK};
pub use tx::{
    build_lock_tx, build_transfer_tx, build_unlock_payment_tx, tx_sender, OutPoint, OutputResolver, SimTx,
    TxBuildError, TxOut,
};
