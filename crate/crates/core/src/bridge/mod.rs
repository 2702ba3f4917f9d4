//! Light-client bridges: full-header SPV and bonded optimistic roots.
//!
//! Both start from a trusted checkpoint and answer the same two questions
//! for the proxy: is this transaction in a finalized block, and is this
//! header the finalized one at its height.

mod optimistic;
mod spv;

use serde::{Deserialize, Serialize};

pub use optimistic::{
    BondPayout, MerkleRootRecord, OptimisticBridge, OptimisticError, OptimisticParams, ProofFailure, ProofOutcome,
    RecordId, RootStatus, Transition,
};
pub use spv::{Accepted, Rejection, SpvBridge};

use crate::btc::{BlockHeader, Hash256, MerkleProof};

/// Trusted starting point: a full header, its height, and the timestamp of
/// the first block of its difficulty epoch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub height: u64,
    pub header: BlockHeader,
    pub epoch_start_ts: u32,
}

impl Checkpoint {
    pub fn from_header(height: u64, header: BlockHeader, epoch_start_ts: u32) -> Self {
        Checkpoint { height, header, epoch_start_ts }
    }

    pub fn hash(&self) -> Hash256 {
        self.header.hash()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BridgeKind {
    Spv,
    Optimistic,
}

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Bridge {
    Spv(SpvBridge),
    Optimistic(OptimisticBridge),
}

impl Bridge {
    pub fn kind(&self) -> BridgeKind {
        match self {
            Bridge::Spv(_) => BridgeKind::Spv,
            Bridge::Optimistic(_) => BridgeKind::Optimistic,
        }
    }

    pub fn check_tx_proof(&self, txid: &Hash256, height: u64, tx_index: u64, proof: &MerkleProof) -> bool {
        match self {
            Bridge::Spv(b) => b.check_tx_proof(txid, height, tx_index, proof),
            Bridge::Optimistic(b) => b.check_tx_proof(txid, height, tx_index, proof),
        }
    }

    pub fn attest_header(&self, height: u64, header: &BlockHeader) -> bool {
        match self {
            Bridge::Spv(b) => b.attest_header(height, header),
            Bridge::Optimistic(b) => b.attest_header(height, header),
        }
    }

    pub fn last_finalized_height(&self) -> u64 {
        match self {
            Bridge::Spv(b) => b.last_finalized_height(),
            Bridge::Optimistic(b) => b.last_finalized_height(),
        }
    }

    pub fn finalized_roots(&self) -> Vec<(u64, Hash256)> {
        match self {
            Bridge::Spv(b) => b.finalized_roots(),
            Bridge::Optimistic(b) => b.finalized_roots(),
        }
    }

    pub fn as_spv(&self) -> Option<&SpvBridge> {
        match self {
            Bridge::Spv(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_optimistic(&self) -> Option<&OptimisticBridge> {
        match self {
            Bridge::Optimistic(b) => Some(b),
            _ => None,
        }
    }

    pub fn spv_mut(&mut self) -> Option<&mut SpvBridge> {
        match self {
            Bridge::Spv(b) => Some(b),
            _ => None,
        }
    }

    pub fn optimistic_mut(&mut self) -> Option<&mut OptimisticBridge> {
        match self {
            Bridge::Optimistic(b) => Some(b),
            _ => None,
        }
    }
}
