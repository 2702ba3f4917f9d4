use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_bigint::BigUint;

use super::Checkpoint;
use crate::btc::{verify_merkle_branch, BlockHeader, Hash256, MerkleProof, RetargetRule, Target256};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Rejection {
    #[error("header already submitted")]
    Duplicate,
    #[error("parent {0} is unknown")]
    UnknownParent(Hash256),
    #[error("bits {got:#010x} but the chain requires {expected:#010x}")]
    WrongTargetBits { expected: u32, got: u32 },
    #[error("hash does not meet the target")]
    InsufficientPoW,
    #[error("parent is at or below the finalized height")]
    BelowFinalized,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Accepted {
    pub height: u64,
    pub finalized: Vec<(u64, Hash256)>,
}

#[derive(Clone, Debug)]
struct Stored {
    header: BlockHeader,
    height: u64,
    chain_work: BigUint,
    epoch_start_ts: u32,
}

/// Header-chain light client: four checks per header, finalization at a
/// fixed depth below the highest header, pruning of everything else.
#[derive(Clone, Debug)]
pub struct SpvBridge {
    rule: RetargetRule,
    finalization_number: u64,
    checkpoint_height: u64,
    headers: BTreeMap<Hash256, Stored>,
    by_height: BTreeMap<u64, Vec<Hash256>>,
    finalized: BTreeMap<u64, Hash256>,
    last_finalized_height: u64,
    max_height: u64,
    pruned: BTreeSet<Hash256>,
    epoch_targets: BTreeMap<u64, Target256>,
}

impl SpvBridge {
    pub fn new(checkpoint: &Checkpoint, rule: RetargetRule, finalization_number: u64) -> Self {
        let hash = checkpoint.header.hash();
        let h = checkpoint.height;
        let mut bridge = SpvBridge {
            checkpoint_height: h,
            finalization_number,
            headers: BTreeMap::new(),
            by_height: BTreeMap::new(),
            finalized: BTreeMap::from([(h, hash)]),
            last_finalized_height: h,
            max_height: h,
            pruned: BTreeSet::new(),
            epoch_targets: BTreeMap::new(),
            rule,
        };
        if let Ok(t) = checkpoint.header.target() {
            bridge.epoch_targets.insert(bridge.rule.epoch_of(h), t);
        }
        bridge.headers.insert(
            hash,
            Stored {
                header: checkpoint.header,
                height: h,
                chain_work: BigUint::default(),
                epoch_start_ts: checkpoint.epoch_start_ts,
            },
        );
        bridge.by_height.insert(h, vec![hash]);
        bridge
    }

    pub fn rule(&self) -> &RetargetRule {
        &self.rule
    }

    pub fn finalization_number(&self) -> u64 {
        self.finalization_number
    }

    pub fn last_finalized_height(&self) -> u64 {
        self.last_finalized_height
    }

    pub fn max_height(&self) -> u64 {
        self.max_height
    }

    pub fn finalized_hash(&self, height: u64) -> Option<Hash256> {
        self.finalized.get(&height).copied()
    }

    pub fn finalized_header(&self, height: u64) -> Option<&BlockHeader> {
        self.finalized.get(&height).map(|h| &self.headers[h].header)
    }

    /// (height, merkle root) for every finalized header above the checkpoint.
    pub fn finalized_roots(&self) -> Vec<(u64, Hash256)> {
        self.finalized
            .range(self.checkpoint_height + 1..)
            .map(|(h, hash)| (*h, self.headers[hash].header.merkle_root))
            .collect()
    }

    pub fn contains(&self, hash: &Hash256) -> bool {
        self.headers.contains_key(hash)
    }

    pub fn height_of(&self, hash: &Hash256) -> Option<u64> {
        self.headers.get(hash).map(|s| s.height)
    }

    pub fn stored_count(&self) -> usize {
        self.headers.len()
    }

    pub fn epoch_target(&self, epoch: u64) -> Option<&Target256> {
        self.epoch_targets.get(&epoch)
    }

    pub fn chain_work(&self, hash: &Hash256) -> Option<&BigUint> {
        self.headers.get(hash).map(|s| &s.chain_work)
    }

    fn required_bits(&self, parent: &Stored) -> u32 {
        let height = parent.height + 1;
        if !self.rule.is_boundary(height) {
            return parent.header.bits;
        }
        let old = parent.header.target().expect("stored headers carry valid bits");
        self.rule
            .next_target(&old, parent.epoch_start_ts, parent.header.timestamp)
            .to_bits()
    }

    pub fn add_header(&mut self, header: &BlockHeader) -> Result<Accepted, Rejection> {
        let hash = header.hash();
        if self.headers.contains_key(&hash) || self.pruned.contains(&hash) {
            return Err(Rejection::Duplicate);
        }
        let Some(parent) = self.headers.get(&header.parent_hash) else {
            return Err(if self.pruned.contains(&header.parent_hash) {
                Rejection::BelowFinalized
            } else {
                Rejection::UnknownParent(header.parent_hash)
            });
        };
        let height = parent.height + 1;
        if height <= self.last_finalized_height {
            return Err(Rejection::BelowFinalized);
        }
        let expected = self.required_bits(parent);
        if header.bits != expected {
            return Err(Rejection::WrongTargetBits { expected, got: header.bits });
        }
        let target = header.target().map_err(|_| Rejection::InsufficientPoW)?;
        if !target.is_met_by(&hash) {
            return Err(Rejection::InsufficientPoW);
        }

        let epoch_start_ts = if self.rule.is_boundary(height) {
            header.timestamp
        } else {
            parent.epoch_start_ts
        };
        let chain_work = &parent.chain_work + target.work();
        self.headers.insert(hash, Stored { header: *header, height, chain_work, epoch_start_ts });
        self.by_height.entry(height).or_default().push(hash);

        let mut finalized = Vec::new();
        if height > self.max_height {
            self.max_height = height;
            finalized = self.finalize_sweep(hash, height);
        }
        Ok(Accepted { height, finalized })
    }

    /// Finalizes the ancestor of `tip` at `tip_height - finalization_number`
    /// and prunes every header that does not descend from it.
    fn finalize_sweep(&mut self, tip: Hash256, tip_height: u64) -> Vec<(u64, Hash256)> {
        let Some(target) = tip_height.checked_sub(self.finalization_number) else {
            return Vec::new();
        };
        if target <= self.last_finalized_height {
            return Vec::new();
        }
        let mut chain = Vec::new();
        let mut cur = tip;
        loop {
            let s = &self.headers[&cur];
            if s.height <= self.last_finalized_height {
                break;
            }
            if s.height <= target {
                chain.push((s.height, cur));
            }
            cur = s.header.parent_hash;
        }
        chain.reverse();
        for &(h, hash) in &chain {
            self.finalized.insert(h, hash);
            if self.rule.is_boundary(h) {
                let t = self.headers[&hash].header.target().expect("stored");
                self.epoch_targets.insert(self.rule.epoch_of(h), t);
            }
        }
        let old_last = self.last_finalized_height;
        self.last_finalized_height = target;

        // prune competitors at the finalized heights, then their descendants
        let mut dropped: BTreeSet<Hash256> = BTreeSet::new();
        for h in old_last + 1..=self.max_height {
            let Some(list) = self.by_height.get_mut(&h) else { continue };
            let keep_only = self.finalized.get(&h).copied();
            list.retain(|hash| {
                let s = &self.headers[hash];
                let drop = match keep_only {
                    Some(f) => *hash != f,
                    None => dropped.contains(&s.header.parent_hash),
                };
                if drop {
                    dropped.insert(*hash);
                }
                !drop
            });
        }
        for hash in &dropped {
            self.headers.remove(hash);
            self.pruned.insert(*hash);
        }
        chain
    }

    /// True iff the proof places `txid` at `tx_index` under the merkle root
    /// of the finalized header at `height`.
    pub fn check_tx_proof(&self, txid: &Hash256, height: u64, tx_index: u64, proof: &MerkleProof) -> bool {
        if height > self.last_finalized_height || height <= self.checkpoint_height {
            return false;
        }
        let Some(header) = self.finalized_header(height) else { return false };
        proof.leaf == *txid && proof.index == tx_index && verify_merkle_branch(proof, &header.merkle_root)
    }

    pub fn attest_header(&self, height: u64, header: &BlockHeader) -> bool {
        height > self.checkpoint_height && self.finalized_hash(height) == Some(header.hash())
    }

    /// One line per stored header: height, hash, finalized flag.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for (h, hashes) in &self.by_height {
            for hash in hashes {
                let fin = self.finalized.get(h) == Some(hash);
                let _ = writeln!(out, "{h}\t{hash}\t{}", if fin { "finalized" } else { "pending" });
            }
        }
        out
    }
}
