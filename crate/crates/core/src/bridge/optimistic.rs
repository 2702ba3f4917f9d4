use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Checkpoint;
use crate::btc::{verify_merkle_branch, BlockHeader, Hash256, MerkleProof, RetargetRule};
use crate::ids::AccountId;
use crate::value::Units;

pub type RecordId = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RootStatus {
    Pending,
    Challenged,
    Verified,
    Invalid,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleRootRecord {
    pub id: RecordId,
    pub root: Hash256,
    pub height: u64,
    pub parent: Option<RecordId>,
    pub relayer: AccountId,
    pub relayer_collateral: Units,
    pub status: RootStatus,
    pub submitted_at: u64,
    pub challenge_deadline: u64,
    pub proof_deadline: Option<u64>,
    pub disputer: Option<AccountId>,
    pub disputer_collateral: Option<Units>,
    pub epoch_timestamp: Option<u32>,
    /// Bits the underlying header must carry, derived from the ancestors'
    /// epoch timestamps.
    pub bits: u32,
    pub pruned: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimisticParams {
    pub challenge_period: u64,
    pub proof_period: u64,
    pub relayer_bond: Units,
    pub disputer_bond: Units,
    pub max_future_drift: u64,
    pub finalization_number: u64,
}

impl Default for OptimisticParams {
    fn default() -> Self {
        OptimisticParams {
            challenge_period: 300,
            proof_period: 1200,
            relayer_bond: 10 * crate::value::COLLATERAL_UNIT,
            disputer_bond: 10 * crate::value::COLLATERAL_UNIT,
            max_future_drift: 7200,
            finalization_number: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OptimisticError {
    #[error("bond {got} below required {required}")]
    InsufficientBond { got: Units, required: Units },
    #[error("no usable root {0} at the previous height")]
    ParentNotUsable(Hash256),
    #[error("height {height} must carry an epoch timestamp")]
    MissingEpochTimestamp { height: u64 },
    #[error("epoch timestamp {ts} is beyond the allowed drift")]
    FutureTimestamp { ts: u32 },
    #[error("root already submitted at this height")]
    DuplicateRoot,
    #[error("height {height} is neither the last submitted height nor the next")]
    HeightOutOfOrder { height: u64 },
    #[error("unknown record {0}")]
    UnknownRecord(RecordId),
    #[error("record already verified")]
    AlreadyVerified,
    #[error("challenge window closed")]
    ChallengeWindowClosed,
    #[error("record already challenged")]
    AlreadyChallenged,
    #[error("record is not challenged")]
    NotChallenged,
    #[error("proof window closed; record invalidated")]
    ProofWindowClosed,
}

/// Why a submitted proof did not settle the challenge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProofFailure {
    RootMismatch,
    ParentRootMismatch,
    NotLinked,
    WrongBits,
    InsufficientPoW,
    TimestampMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProofOutcome {
    Verified,
    Failed(ProofFailure),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BondPayout {
    pub record: RecordId,
    pub to: AccountId,
    pub amount: Units,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub record: RecordId,
    pub height: u64,
    pub to: RootStatus,
}

/// Merkle-root-only bridge with bonded submissions and a challenge game.
#[derive(Clone, Debug)]
pub struct OptimisticBridge {
    params: OptimisticParams,
    rule: RetargetRule,
    checkpoint: Checkpoint,
    checkpoint_record: RecordId,
    records: BTreeMap<RecordId, MerkleRootRecord>,
    by_height: BTreeMap<u64, Vec<RecordId>>,
    next_id: RecordId,
    last_submitted_height: u64,
    max_verified_height: u64,
    finalized: BTreeMap<u64, RecordId>,
    last_finalized_height: u64,
    epoch_timestamps: BTreeMap<u64, (Option<u32>, Option<u32>)>,
    escrow: Units,
    posted: Units,
    paid: Units,
    payouts: Vec<BondPayout>,
}

impl OptimisticBridge {
    pub fn new(checkpoint: &Checkpoint, rule: RetargetRule, params: OptimisticParams) -> Self {
        let h = checkpoint.height;
        let rec = MerkleRootRecord {
            id: 0,
            root: checkpoint.header.merkle_root,
            height: h,
            parent: None,
            relayer: AccountId([0; 20]),
            relayer_collateral: 0,
            status: RootStatus::Verified,
            submitted_at: 0,
            challenge_deadline: 0,
            proof_deadline: None,
            disputer: None,
            disputer_collateral: None,
            epoch_timestamp: Some(checkpoint.header.timestamp),
            bits: checkpoint.header.bits,
            pruned: false,
        };
        OptimisticBridge {
            params,
            checkpoint: checkpoint.clone(),
            checkpoint_record: 0,
            records: BTreeMap::from([(0, rec)]),
            by_height: BTreeMap::from([(h, vec![0])]),
            next_id: 1,
            last_submitted_height: h,
            max_verified_height: h,
            finalized: BTreeMap::from([(h, 0)]),
            last_finalized_height: h,
            epoch_timestamps: BTreeMap::new(),
            escrow: 0,
            posted: 0,
            paid: 0,
            payouts: Vec::new(),
            rule,
        }
    }

    pub fn params(&self) -> &OptimisticParams {
        &self.params
    }

    pub fn rule(&self) -> &RetargetRule {
        &self.rule
    }

    pub fn record(&self, id: RecordId) -> Option<&MerkleRootRecord> {
        self.records.get(&id)
    }

    pub fn records(&self) -> impl Iterator<Item = &MerkleRootRecord> {
        self.records.values().filter(|r| r.id != self.checkpoint_record)
    }

    pub fn records_at(&self, height: u64) -> impl Iterator<Item = &MerkleRootRecord> {
        self.by_height.get(&height).into_iter().flatten().map(|id| &self.records[id])
    }

    pub fn last_submitted_height(&self) -> u64 {
        self.last_submitted_height
    }

    pub fn last_finalized_height(&self) -> u64 {
        self.last_finalized_height
    }

    pub fn finalized_root(&self, height: u64) -> Option<Hash256> {
        if height <= self.checkpoint.height {
            return None;
        }
        self.finalized.get(&height).map(|id| self.records[id].root)
    }

    pub fn finalized_roots(&self) -> Vec<(u64, Hash256)> {
        self.finalized
            .range(self.checkpoint.height + 1..)
            .map(|(h, id)| (*h, self.records[id].root))
            .collect()
    }

    pub fn epoch_timestamps(&self) -> &BTreeMap<u64, (Option<u32>, Option<u32>)> {
        &self.epoch_timestamps
    }

    /// Bonds currently held by the contract.
    pub fn escrow(&self) -> Units {
        self.escrow
    }

    /// (total posted, total paid out); posted == paid + escrow always.
    pub fn bond_totals(&self) -> (Units, Units) {
        (self.posted, self.paid)
    }

    pub fn take_payouts(&mut self) -> Vec<BondPayout> {
        std::mem::take(&mut self.payouts)
    }

    /// Heights whose header must carry an epoch timestamp: the last block of
    /// an epoch and the first block of the next.
    pub fn needs_epoch_timestamp(&self, height: u64) -> bool {
        let l = self.rule.epoch_len;
        height.is_multiple_of(l) || height % l == l - 1
    }

    fn is_usable(&self, r: &MerkleRootRecord, now: u64) -> bool {
        !r.pruned
            && match r.status {
                RootStatus::Verified => true,
                RootStatus::Pending => now >= r.challenge_deadline,
                _ => false,
            }
    }

    /// The usable record carrying `root` at `height`, if any.
    pub fn usable_record(&self, height: u64, root: &Hash256, now: u64) -> Option<&MerkleRootRecord> {
        self.records_at(height).find(|r| r.root == *root && self.is_usable(r, now))
    }

    fn ancestor_at(&self, from: RecordId, height: u64) -> &MerkleRootRecord {
        let mut cur = &self.records[&from];
        while cur.height > height {
            cur = &self.records[&cur.parent.expect("non-checkpoint record has a parent")];
        }
        cur
    }

    fn required_bits(&self, parent: &MerkleRootRecord) -> u32 {
        let height = parent.height + 1;
        if !self.rule.is_boundary(height) {
            return parent.bits;
        }
        let first_height = height - self.rule.epoch_len;
        let first_ts = if first_height < self.checkpoint.height {
            self.checkpoint.epoch_start_ts
        } else {
            self.ancestor_at(parent.id, first_height)
                .epoch_timestamp
                .expect("epoch-start records carry timestamps")
        };
        let last_ts = parent.epoch_timestamp.expect("epoch-final records carry timestamps");
        let old = crate::btc::Target256::from_bits(parent.bits).expect("valid stored bits");
        self.rule.next_target(&old, first_ts, last_ts).to_bits()
    }

    /// Posts a root on top of the usable root `parent_root` at `height - 1`.
    #[allow(clippy::too_many_arguments)]
    pub fn submit_root(
        &mut self,
        root: Hash256,
        height: u64,
        parent_root: Hash256,
        relayer: AccountId,
        collateral: Units,
        epoch_timestamp: Option<u32>,
        now: u64,
    ) -> Result<RecordId, OptimisticError> {
        if collateral < self.params.relayer_bond {
            return Err(OptimisticError::InsufficientBond { got: collateral, required: self.params.relayer_bond });
        }
        if height != self.last_submitted_height + 1 && height != self.last_submitted_height {
            return Err(OptimisticError::HeightOutOfOrder { height });
        }
        if self.records_at(height).any(|r| r.root == root && r.status != RootStatus::Invalid) {
            return Err(OptimisticError::DuplicateRoot);
        }
        let parent = self
            .usable_record(height - 1, &parent_root, now)
            .ok_or(OptimisticError::ParentNotUsable(parent_root))?;
        let epoch_timestamp = if self.needs_epoch_timestamp(height) {
            let ts = epoch_timestamp.ok_or(OptimisticError::MissingEpochTimestamp { height })?;
            if ts as u64 > now + self.params.max_future_drift {
                return Err(OptimisticError::FutureTimestamp { ts });
            }
            Some(ts)
        } else {
            None
        };
        let bits = self.required_bits(parent);
        let parent_id = parent.id;
        let id = self.next_id;
        self.next_id += 1;
        let rec = MerkleRootRecord {
            id,
            root,
            height,
            parent: Some(parent_id),
            relayer,
            relayer_collateral: collateral,
            status: RootStatus::Pending,
            submitted_at: now,
            challenge_deadline: now + self.params.challenge_period,
            proof_deadline: None,
            disputer: None,
            disputer_collateral: None,
            epoch_timestamp,
            bits,
            pruned: false,
        };
        self.records.insert(id, rec);
        self.by_height.entry(height).or_default().push(id);
        self.last_submitted_height = self.last_submitted_height.max(height);
        self.escrow += collateral;
        self.posted += collateral;
        Ok(id)
    }

    pub fn challenge_root(
        &mut self,
        id: RecordId,
        disputer: AccountId,
        collateral: Units,
        now: u64,
    ) -> Result<(), OptimisticError> {
        let bond = self.params.disputer_bond;
        let proof_period = self.params.proof_period;
        let r = self.records.get_mut(&id).ok_or(OptimisticError::UnknownRecord(id))?;
        match r.status {
            RootStatus::Verified => return Err(OptimisticError::AlreadyVerified),
            RootStatus::Challenged => return Err(OptimisticError::AlreadyChallenged),
            RootStatus::Invalid => return Err(OptimisticError::ChallengeWindowClosed),
            RootStatus::Pending => {}
        }
        if now >= r.challenge_deadline {
            return Err(OptimisticError::ChallengeWindowClosed);
        }
        if collateral < bond {
            return Err(OptimisticError::InsufficientBond { got: collateral, required: bond });
        }
        r.status = RootStatus::Challenged;
        r.proof_deadline = Some(now + proof_period);
        r.disputer = Some(disputer);
        r.disputer_collateral = Some(collateral);
        self.escrow += collateral;
        self.posted += collateral;
        Ok(())
    }

    fn check_proof(&self, r: &MerkleRootRecord, header: &BlockHeader, prev: &BlockHeader) -> Option<ProofFailure> {
        let parent = &self.records[&r.parent.expect("challenged records have parents")];
        if header.merkle_root != r.root {
            return Some(ProofFailure::RootMismatch);
        }
        if prev.merkle_root != parent.root {
            return Some(ProofFailure::ParentRootMismatch);
        }
        if header.parent_hash != prev.hash() {
            return Some(ProofFailure::NotLinked);
        }
        if parent.id == self.checkpoint_record && prev.hash() != self.checkpoint.header.hash() {
            return Some(ProofFailure::NotLinked);
        }
        if header.bits != r.bits {
            return Some(ProofFailure::WrongBits);
        }
        if !header.meets_pow().unwrap_or(false) {
            return Some(ProofFailure::InsufficientPoW);
        }
        let ts_ok = |claimed: Option<u32>, actual: u32| claimed.is_none_or(|c| c == actual);
        if !ts_ok(r.epoch_timestamp, header.timestamp) || !ts_ok(parent.epoch_timestamp, prev.timestamp) {
            return Some(ProofFailure::TimestampMismatch);
        }
        None
    }

    /// The relayer answers a challenge with the full header and its parent.
    /// A failed proof leaves the record challenged until the deadline.
    pub fn prove_root(
        &mut self,
        id: RecordId,
        header: &BlockHeader,
        prev: &BlockHeader,
        now: u64,
    ) -> Result<ProofOutcome, OptimisticError> {
        let r = self.records.get(&id).ok_or(OptimisticError::UnknownRecord(id))?;
        if r.status != RootStatus::Challenged {
            return Err(OptimisticError::NotChallenged);
        }
        if now > r.proof_deadline.expect("challenged") {
            self.invalidate(id);
            return Err(OptimisticError::ProofWindowClosed);
        }
        if let Some(f) = self.check_proof(r, header, prev) {
            return Ok(ProofOutcome::Failed(f));
        }
        let r = self.records.get_mut(&id).expect("checked");
        r.status = RootStatus::Verified;
        let amount = r.relayer_collateral + r.disputer_collateral.unwrap_or(0);
        let (to, height) = (r.relayer, r.height);
        self.pay(id, to, amount);
        self.on_verified(id, height);
        Ok(ProofOutcome::Verified)
    }

    fn pay(&mut self, record: RecordId, to: AccountId, amount: Units) {
        self.escrow -= amount;
        self.paid += amount;
        self.payouts.push(BondPayout { record, to, amount });
    }

    fn invalidate(&mut self, id: RecordId) {
        let r = self.records.get_mut(&id).expect("known record");
        r.status = RootStatus::Invalid;
        let amount = r.relayer_collateral + r.disputer_collateral.unwrap_or(0);
        let to = r.disputer.expect("invalid only after a challenge");
        self.pay(id, to, amount);
    }

    /// Settles expired windows and runs the finalization sweep.
    pub fn tick(&mut self, now: u64) -> Vec<Transition> {
        let mut out = Vec::new();
        let due: Vec<(RecordId, RootStatus)> = self
            .records
            .values()
            .filter_map(|r| match r.status {
                RootStatus::Pending if now >= r.challenge_deadline => Some((r.id, RootStatus::Verified)),
                RootStatus::Challenged if now > r.proof_deadline.expect("challenged") => {
                    Some((r.id, RootStatus::Invalid))
                }
                _ => None,
            })
            .collect();
        for (id, to) in due {
            let height = self.records[&id].height;
            match to {
                RootStatus::Verified => {
                    let r = self.records.get_mut(&id).expect("due");
                    r.status = RootStatus::Verified;
                    let (relayer, bond) = (r.relayer, r.relayer_collateral);
                    self.pay(id, relayer, bond);
                    self.on_verified(id, height);
                }
                _ => self.invalidate(id),
            }
            out.push(Transition { record: id, height, to });
        }
        out
    }

    fn on_verified(&mut self, id: RecordId, height: u64) {
        if self.records[&id].pruned || height <= self.max_verified_height {
            return;
        }
        self.max_verified_height = height;
        let Some(target) = height.checked_sub(self.params.finalization_number) else { return };
        if target <= self.last_finalized_height {
            return;
        }
        let mut chain = Vec::new();
        let mut cur = id;
        loop {
            let r = &self.records[&cur];
            if r.height <= self.last_finalized_height {
                break;
            }
            if r.height <= target {
                chain.push((r.height, cur));
            }
            cur = r.parent.expect("above checkpoint");
        }
        let old_last = self.last_finalized_height;
        for &(h, rid) in &chain {
            self.finalized.insert(h, rid);
            let ts = self.records[&rid].epoch_timestamp;
            let l = self.rule.epoch_len;
            let entry = self.epoch_timestamps.entry(h / l).or_default();
            if h % l == 0 {
                entry.0 = ts;
            } else if h % l == l - 1 {
                entry.1 = ts;
            }
        }
        self.last_finalized_height = target;
        // competitors at finalized heights, and their descendants, lose usability
        let mut dead = std::collections::BTreeSet::new();
        let heights: Vec<u64> = self.by_height.range(old_last + 1..).map(|(h, _)| *h).collect();
        for h in heights {
            let keep = self.finalized.get(&h).copied();
            for rid in self.by_height[&h].clone() {
                let parent_dead = self.records[&rid].parent.is_some_and(|p| dead.contains(&p));
                let drop = match keep {
                    Some(k) => rid != k,
                    None => parent_dead,
                };
                if drop {
                    dead.insert(rid);
                    self.records.get_mut(&rid).expect("indexed").pruned = true;
                }
            }
        }
    }

    pub fn check_tx_proof(&self, txid: &Hash256, height: u64, tx_index: u64, proof: &MerkleProof) -> bool {
        let Some(root) = self.finalized_root(height) else { return false };
        proof.leaf == *txid && proof.index == tx_index && verify_merkle_branch(proof, &root)
    }

    /// A full header matches the finalized root at `height` and its recorded bits.
    pub fn attest_header(&self, height: u64, header: &BlockHeader) -> bool {
        let Some(id) = self.finalized.get(&height) else { return false };
        let r = &self.records[id];
        height > self.checkpoint.height
            && header.merkle_root == r.root
            && header.bits == r.bits
            && header.meets_pow().unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chainsim::{solve_header, ChainParams, ChainState};
    use crate::value::COLLATERAL_UNIT;

    const BOND: Units = 10 * COLLATERAL_UNIT;

    fn relayer() -> AccountId {
        AccountId::from_label("relayer")
    }

    fn disputer() -> AccountId {
        AccountId::from_label("disputer")
    }

    fn setup(blocks: usize) -> (ChainState, OptimisticBridge) {
        let mut chain = ChainState::new(ChainParams::toy(16), &[]);
        let mut ts = chain.genesis().header.timestamp;
        for _ in 0..blocks {
            ts += 600;
            chain.mine(vec![], ts).unwrap();
        }
        let g = chain.genesis().header;
        let cp = Checkpoint::from_header(0, g, g.timestamp);
        let bridge = OptimisticBridge::new(&cp, chain.params().rule.clone(), OptimisticParams::default());
        (chain, bridge)
    }

    fn submit_honest(chain: &ChainState, b: &mut OptimisticBridge, height: u64, now: u64) -> RecordId {
        let h = chain.canonical_block(height).unwrap().header;
        let p = chain.canonical_block(height - 1).unwrap().header;
        let ts = b.needs_epoch_timestamp(height).then_some(h.timestamp);
        b.submit_root(h.merkle_root, height, p.merkle_root, relayer(), BOND, ts, now).unwrap()
    }

    #[test]
    fn honest_root_pending_then_verified() {
        let (chain, mut b) = setup(2);
        let id = submit_honest(&chain, &mut b, 1, 1000);
        let r = b.record(id).unwrap();
        assert_eq!(r.status, RootStatus::Pending);
        assert_eq!(r.challenge_deadline, 1300);
        assert!(b.tick(1299).is_empty());
        let t = b.tick(1300);
        assert_eq!(t, vec![Transition { record: id, height: 1, to: RootStatus::Verified }]);
        assert_eq!(b.take_payouts(), vec![BondPayout { record: id, to: relayer(), amount: BOND }]);
        assert_eq!(b.escrow(), 0);
    }

    #[test]
    fn submission_errors() {
        let (chain, mut b) = setup(20);
        let h1 = chain.canonical_block(1).unwrap().header;
        let g = chain.genesis().header;
        assert_eq!(
            b.submit_root(h1.merkle_root, 1, g.merkle_root, relayer(), BOND - 1, None, 0),
            Err(OptimisticError::InsufficientBond { got: BOND - 1, required: BOND })
        );
        assert_eq!(
            b.submit_root(h1.merkle_root, 1, Hash256([1; 32]), relayer(), BOND, None, 0),
            Err(OptimisticError::ParentNotUsable(Hash256([1; 32])))
        );
        let id = b.submit_root(h1.merkle_root, 1, g.merkle_root, relayer(), BOND, None, 0).unwrap();
        assert_eq!(
            b.submit_root(h1.merkle_root, 1, g.merkle_root, relayer(), BOND, None, 0),
            Err(OptimisticError::DuplicateRoot)
        );
        let h2 = chain.canonical_block(2).unwrap().header;
        // parent still inside its challenge window
        assert_eq!(
            b.submit_root(h2.merkle_root, 2, h1.merkle_root, relayer(), BOND, None, 100),
            Err(OptimisticError::ParentNotUsable(h1.merkle_root))
        );
        // past the window it is usable even before tick
        assert!(b.submit_root(h2.merkle_root, 2, h1.merkle_root, relayer(), BOND, None, 300).is_ok());
        assert_eq!(b.record(id).unwrap().status, RootStatus::Pending);
        assert_eq!(
            b.submit_root(Hash256([2; 32]), 4, h2.merkle_root, relayer(), BOND, None, 700),
            Err(OptimisticError::HeightOutOfOrder { height: 4 })
        );
    }

    #[test]
    fn epoch_boundary_timestamps() {
        let (chain, mut b) = setup(17);
        let mut now = chain.genesis().header.timestamp as u64;
        for h in 1..15 {
            submit_honest(&chain, &mut b, h, now);
            now += 600;
            b.tick(now);
        }
        let h15 = chain.canonical_block(15).unwrap().header;
        let h14 = chain.canonical_block(14).unwrap().header;
        assert_eq!(
            b.submit_root(h15.merkle_root, 15, h14.merkle_root, relayer(), BOND, None, now),
            Err(OptimisticError::MissingEpochTimestamp { height: 15 })
        );
        let far = (now + 365 * 86_400) as u32;
        assert_eq!(
            b.submit_root(h15.merkle_root, 15, h14.merkle_root, relayer(), BOND, Some(far), now),
            Err(OptimisticError::FutureTimestamp { ts: far })
        );
        let edge = (now + 7200) as u32;
        assert!(b.clone().submit_root(h15.merkle_root, 15, h14.merkle_root, relayer(), BOND, Some(edge), now).is_ok());
        b.submit_root(h15.merkle_root, 15, h14.merkle_root, relayer(), BOND, Some(h15.timestamp), now).unwrap();
        b.tick(now + 300);
        let h16 = chain.canonical_block(16).unwrap().header;
        let id = b
            .submit_root(h16.merkle_root, 16, h15.merkle_root, relayer(), BOND, Some(h16.timestamp), now + 300)
            .unwrap();
        assert_eq!(b.record(id).unwrap().bits, h16.bits);
    }

    #[test]
    fn challenge_rules() {
        let (chain, mut b) = setup(2);
        let id = submit_honest(&chain, &mut b, 1, 1000);
        assert_eq!(
            b.challenge_root(id, disputer(), BOND - 1, 1100),
            Err(OptimisticError::InsufficientBond { got: BOND - 1, required: BOND })
        );
        assert_eq!(b.challenge_root(id, disputer(), BOND, 1300), Err(OptimisticError::ChallengeWindowClosed));
        b.challenge_root(id, disputer(), BOND, 1299).unwrap();
        let r = b.record(id).unwrap();
        assert_eq!(r.status, RootStatus::Challenged);
        assert_eq!(r.proof_deadline, Some(2499));
        assert_eq!(b.challenge_root(id, disputer(), BOND, 1299), Err(OptimisticError::AlreadyChallenged));
    }

    #[test]
    fn honest_relayer_wins_the_game() {
        let (chain, mut b) = setup(2);
        let id = submit_honest(&chain, &mut b, 1, 1000);
        b.challenge_root(id, disputer(), BOND, 1100).unwrap();
        let h1 = chain.canonical_block(1).unwrap().header;
        let g = chain.genesis().header;
        assert_eq!(b.prove_root(id, &h1, &g, 1200), Ok(ProofOutcome::Verified));
        assert_eq!(b.record(id).unwrap().status, RootStatus::Verified);
        assert_eq!(b.take_payouts(), vec![BondPayout { record: id, to: relayer(), amount: 2 * BOND }]);
        assert_eq!(b.challenge_root(id, disputer(), BOND, 1200), Err(OptimisticError::AlreadyVerified));
    }

    #[test]
    fn fabricated_root_is_invalidated() {
        let (chain, mut b) = setup(2);
        let g = chain.genesis().header;
        let fake = Hash256([0xee; 32]);
        let id = b.submit_root(fake, 1, g.merkle_root, relayer(), BOND, None, 1000).unwrap();
        b.challenge_root(id, disputer(), BOND, 1010).unwrap();
        // the honest header does not carry the fake root
        let h1 = chain.canonical_block(1).unwrap().header;
        assert_eq!(b.prove_root(id, &h1, &g, 1020), Ok(ProofOutcome::Failed(ProofFailure::RootMismatch)));
        assert_eq!(b.record(id).unwrap().status, RootStatus::Challenged);
        assert!(b.tick(2210).is_empty());
        let t = b.tick(2211);
        assert_eq!(t[0].to, RootStatus::Invalid);
        assert_eq!(b.take_payouts(), vec![BondPayout { record: id, to: disputer(), amount: 2 * BOND }]);
        let (posted, paid) = b.bond_totals();
        assert_eq!(posted, paid);
    }

    #[test]
    fn late_proof_invalidates() {
        let (chain, mut b) = setup(2);
        let id = submit_honest(&chain, &mut b, 1, 1000);
        b.challenge_root(id, disputer(), BOND, 1000).unwrap();
        let h1 = chain.canonical_block(1).unwrap().header;
        let g = chain.genesis().header;
        assert_eq!(b.prove_root(id, &h1, &g, 2201), Err(OptimisticError::ProofWindowClosed));
        assert_eq!(b.record(id).unwrap().status, RootStatus::Invalid);
        assert_eq!(b.prove_root(id, &h1, &g, 2201), Err(OptimisticError::NotChallenged));
    }

    #[test]
    fn stale_target_header_fails_proof() {
        let (chain, mut b) = setup(0);
        let mut chain = chain;
        let mut ts = chain.genesis().header.timestamp;
        for _ in 0..15 {
            ts += 100;
            chain.mine(vec![], ts).unwrap();
        }
        let mut now = ts as u64;
        for h in 1..=15 {
            submit_honest(&chain, &mut b, h, now);
            now += 300;
            b.tick(now);
        }
        let p = chain.canonical_block(15).unwrap().header;
        let mut stale = BlockHeader {
            version: 1,
            parent_hash: p.hash(),
            merkle_root: Hash256([7; 32]),
            timestamp: ts + 100,
            bits: p.bits,
            nonce: 0,
        };
        solve_header(&mut stale);
        let id = b
            .submit_root(stale.merkle_root, 16, p.merkle_root, relayer(), BOND, Some(stale.timestamp), now)
            .unwrap();
        assert_ne!(b.record(id).unwrap().bits, p.bits);
        b.challenge_root(id, disputer(), BOND, now + 1).unwrap();
        assert_eq!(b.prove_root(id, &stale, &p, now + 2), Ok(ProofOutcome::Failed(ProofFailure::WrongBits)));
    }

    #[test]
    fn claimed_timestamp_must_match_header() {
        let (chain, mut b) = setup(16);
        let mut now = chain.canonical_block(16).unwrap().header.timestamp as u64;
        for h in 1..=15 {
            submit_honest(&chain, &mut b, h, now);
            now += 300;
            b.tick(now);
        }
        let h16 = chain.canonical_block(16).unwrap().header;
        let h15 = chain.canonical_block(15).unwrap().header;
        let id = b
            .submit_root(h16.merkle_root, 16, h15.merkle_root, relayer(), BOND, Some(h16.timestamp + 1), now)
            .unwrap();
        b.challenge_root(id, disputer(), BOND, now).unwrap();
        assert_eq!(
            b.prove_root(id, &h16, &h15, now),
            Ok(ProofOutcome::Failed(ProofFailure::TimestampMismatch))
        );
    }

    #[test]
    fn finalization_and_tx_proofs() {
        let alice = crate::BtcAddress::from_label("alice");
        let mut chain = ChainState::new(ChainParams::toy(16), &[(alice, 1000)]);
        let tx = crate::chainsim::build_transfer_tx(
            &chain.utxos_of(&alice),
            crate::BtcAddress::from_label("bob"),
            10,
            None,
        )
        .unwrap();
        let mut ts = chain.genesis().header.timestamp;
        ts += 600;
        chain.mine(vec![tx.clone()], ts).unwrap();
        for _ in 0..7 {
            ts += 600;
            chain.mine(vec![], ts).unwrap();
        }
        let g = chain.genesis().header;
        let cp = Checkpoint::from_header(0, g, g.timestamp);
        let mut b = OptimisticBridge::new(&cp, chain.params().rule.clone(), OptimisticParams::default());
        let inc = chain.inclusion_proof(&tx.txid).unwrap();
        let mut now = 0;
        for h in 1..=6 {
            submit_honest(&chain, &mut b, h, now);
            assert!(!b.check_tx_proof(&tx.txid, 1, 1, &inc.proof));
            now += 300;
            b.tick(now);
        }
        assert_eq!(b.last_finalized_height(), 0);
        submit_honest(&chain, &mut b, 7, now);
        b.tick(now + 300);
        assert_eq!(b.last_finalized_height(), 1);
        assert!(b.check_tx_proof(&tx.txid, 1, 1, &inc.proof));
        assert!(b.attest_header(1, &chain.canonical_block(1).unwrap().header));
        assert!(!b.attest_header(1, &chain.canonical_block(2).unwrap().header));
    }

    #[test]
    fn competing_roots_resolve_by_descendants() {
        let (chain, mut b) = setup(10);
        let g = chain.genesis().header;
        let decoy = b.submit_root(Hash256([0xdd; 32]), 1, g.merkle_root, relayer(), BOND, None, 0).unwrap();
        let honest = submit_honest(&chain, &mut b, 1, 0);
        let mut now = 300;
        b.tick(now);
        for h in 2..=7 {
            submit_honest(&chain, &mut b, h, now);
            now += 300;
            b.tick(now);
        }
        assert_eq!(b.finalized_root(1), Some(chain.canonical_block(1).unwrap().header.merkle_root));
        assert!(b.record(decoy).unwrap().pruned);
        assert!(!b.record(honest).unwrap().pruned);
        // both unchallenged records still got their bonds back
        let (posted, paid) = b.bond_totals();
        assert_eq!(posted, paid);
    }
}
