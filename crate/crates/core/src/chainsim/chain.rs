use std::collections::BTreeMap;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::tx::{OutPoint, OutputResolver, SimTx, TxOut};
use crate::btc::{merkle_branch, merkle_root, BlockHeader, Hash256, MerkleProof, RetargetRule, Target256};
use crate::ids::BtcAddress;
use crate::value::{Sats, SATS_PER_BTC};

const BLOCK_VERSION: i32 = 0x2000_0000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainParams {
    pub rule: RetargetRule,
    pub genesis_bits: u32,
    pub genesis_timestamp: u32,
    pub subsidy: Sats,
    pub miner: BtcAddress,
}

impl ChainParams {
    /// Toy difficulty: the nonce search takes a handful of hashes.
    pub fn toy(epoch_len: u64) -> Self {
        let bits = 0x2000_ffff;
        ChainParams {
            rule: RetargetRule {
                epoch_len,
                block_interval: 600,
                pow_limit: Target256::from_bits(bits).expect("static bits"),
            },
            genesis_bits: bits,
            genesis_timestamp: 1_700_000_000,
            subsidy: 50 * SATS_PER_BTC,
            miner: BtcAddress::from_label("miner"),
        }
    }
}

impl Default for ChainParams {
    fn default() -> Self {
        ChainParams::toy(16)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimBlock {
    pub header: BlockHeader,
    pub txs: Vec<SimTx>,
    pub height: u64,
}

impl SimBlock {
    pub fn hash(&self) -> Hash256 {
        self.header.hash()
    }

    pub fn txids(&self) -> Vec<Hash256> {
        self.txs.iter().map(|t| t.txid).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("unknown parent block {0}")]
    UnknownParent(Hash256),
    #[error("tx {txid} spends missing or spent output {outpoint:?}")]
    DoubleSpend { txid: Hash256, outpoint: OutPoint },
    #[error("tx {0} creates more value than it spends")]
    InvalidAmounts(Hash256),
    #[error("tx {0} is malformed")]
    MalformedTx(Hash256),
    #[error("tx {0} not found")]
    TxNotFound(Hash256),
    #[error("tx {0} is not on the canonical chain")]
    TxNotOnCanonicalChain(Hash256),
}

/// Where a canonical transaction sits, with its proof against the block's merkle root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxInclusion {
    pub block_hash: Hash256,
    pub height: u64,
    pub tx_index: usize,
    pub proof: MerkleProof,
}

type Utxos = BTreeMap<OutPoint, TxOut>;

#[derive(Clone, Debug)]
struct Entry {
    block: SimBlock,
    chain_work: BigUint,
}

/// The simulated chain. Blocks are never deleted; forks stay queryable.
#[derive(Clone, Debug)]
pub struct ChainState {
    params: ChainParams,
    blocks: BTreeMap<Hash256, Entry>,
    tips: Vec<Hash256>,
    canonical: Vec<Hash256>,
    tip_utxos: BTreeMap<Hash256, Utxos>,
    tx_blocks: BTreeMap<Hash256, Vec<(Hash256, usize)>>,
    outputs: Utxos,
    mined: u64,
}

fn coinbase(seq: u64, height: u64, outputs: Vec<TxOut>) -> SimTx {
    let mut tag = b"coinbase".to_vec();
    tag.extend_from_slice(&seq.to_le_bytes());
    tag.extend_from_slice(&height.to_le_bytes());
    SimTx::new(vec![], outputs, Some(tag))
}

/// Linear nonce search from the header's current nonce.
pub fn solve_header(header: &mut BlockHeader) {
    let target = header.target().expect("mining against a valid target");
    while !target.is_met_by(&header.hash()) {
        header.nonce = header.nonce.wrapping_add(1);
    }
}

fn apply_tx(utxos: &mut Utxos, tx: &SimTx) {
    for i in &tx.inputs {
        utxos.remove(i);
    }
    for (vout, o) in tx.outputs.iter().enumerate() {
        utxos.insert(OutPoint { txid: tx.txid, vout: vout as u32 }, *o);
    }
}

impl ChainState {
    /// Genesis pays `allocations` in a single coinbase.
    pub fn new(params: ChainParams, allocations: &[(BtcAddress, Sats)]) -> Self {
        let outs = allocations.iter().map(|&(address, amount)| TxOut { address, amount }).collect();
        let cb = coinbase(0, 0, outs);
        let mut header = BlockHeader {
            version: BLOCK_VERSION,
            parent_hash: Hash256::ZERO,
            merkle_root: cb.txid,
            timestamp: params.genesis_timestamp,
            bits: params.genesis_bits,
            nonce: 0,
        };
        solve_header(&mut header);
        let hash = header.hash();
        let work = header.target().expect("genesis bits").work();
        let mut utxos = Utxos::new();
        apply_tx(&mut utxos, &cb);
        let mut chain = ChainState {
            params,
            blocks: BTreeMap::new(),
            tips: vec![hash],
            canonical: vec![hash],
            tip_utxos: BTreeMap::new(),
            tx_blocks: BTreeMap::new(),
            outputs: utxos.clone(),
            mined: 1,
        };
        chain.tx_blocks.insert(cb.txid, vec![(hash, 0)]);
        chain.tip_utxos.insert(hash, utxos);
        chain.blocks.insert(hash, Entry { block: SimBlock { header, txs: vec![cb], height: 0 }, chain_work: work });
        chain
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn genesis(&self) -> &SimBlock {
        &self.blocks[&self.canonical[0]].block
    }

    pub fn tip(&self) -> Hash256 {
        *self.canonical.last().expect("genesis")
    }

    pub fn height(&self) -> u64 {
        self.canonical.len() as u64 - 1
    }

    pub fn tips(&self) -> &[Hash256] {
        &self.tips
    }

    pub fn block(&self, hash: &Hash256) -> Option<&SimBlock> {
        self.blocks.get(hash).map(|e| &e.block)
    }

    pub fn chain_work(&self, hash: &Hash256) -> Option<&BigUint> {
        self.blocks.get(hash).map(|e| &e.chain_work)
    }

    pub fn canonical_block(&self, height: u64) -> Option<&SimBlock> {
        self.canonical.get(height as usize).and_then(|h| self.block(h))
    }

    pub fn canonical_hashes(&self) -> &[Hash256] {
        &self.canonical
    }

    pub fn canonical_headers(&self) -> Vec<BlockHeader> {
        self.canonical.iter().map(|h| self.blocks[h].block.header).collect()
    }

    pub fn is_canonical(&self, hash: &Hash256) -> bool {
        self.blocks
            .get(hash)
            .is_some_and(|e| self.canonical.get(e.block.height as usize) == Some(hash))
    }

    pub fn tx(&self, txid: &Hash256) -> Option<&SimTx> {
        let (block, idx) = self.tx_blocks.get(txid)?.first()?;
        self.blocks[block].block.txs.get(*idx)
    }

    /// Bits a child of `parent` must carry.
    pub fn required_bits(&self, parent: &Hash256) -> Option<u32> {
        let p = &self.blocks.get(parent)?.block;
        let height = p.height + 1;
        let rule = &self.params.rule;
        if !rule.is_boundary(height) {
            return Some(p.header.bits);
        }
        let first = self.ancestor(parent, height - rule.epoch_len)?;
        let old = p.header.target().ok()?;
        let t = rule.next_target(&old, first.header.timestamp, p.header.timestamp);
        Some(t.to_bits())
    }

    /// Ancestor of `from` (inclusive) at `height`.
    pub fn ancestor(&self, from: &Hash256, height: u64) -> Option<&SimBlock> {
        let mut cur = &self.blocks.get(from)?.block;
        if height > cur.height {
            return None;
        }
        while cur.height > height {
            cur = &self.blocks[&cur.header.parent_hash].block;
        }
        Some(cur)
    }

    fn utxos_at(&self, hash: &Hash256) -> Utxos {
        if let Some(u) = self.tip_utxos.get(hash) {
            return u.clone();
        }
        let mut path = Vec::new();
        let mut cur = *hash;
        loop {
            let b = &self.blocks[&cur].block;
            path.push(cur);
            if b.height == 0 {
                break;
            }
            cur = b.header.parent_hash;
        }
        let mut utxos = Utxos::new();
        for h in path.iter().rev() {
            for tx in &self.blocks[h].block.txs {
                apply_tx(&mut utxos, tx);
            }
        }
        utxos
    }

    /// Validates `txs` against the parent's UTXO view, prepends a coinbase
    /// collecting subsidy plus fees, and mines the block.
    pub fn mine_block(&mut self, parent: Hash256, txs: Vec<SimTx>, timestamp: u32) -> Result<SimBlock, ChainError> {
        let parent_entry = self.blocks.get(&parent).ok_or(ChainError::UnknownParent(parent))?;
        let height = parent_entry.block.height + 1;
        let parent_work = parent_entry.chain_work.clone();
        let mut view = self.utxos_at(&parent);
        let mut fees: Sats = 0;
        for tx in &txs {
            if tx.is_coinbase() || !tx.txid_is_consistent() {
                return Err(ChainError::MalformedTx(tx.txid));
            }
            let mut spent: u128 = 0;
            for op in &tx.inputs {
                let out = view
                    .remove(op)
                    .ok_or(ChainError::DoubleSpend { txid: tx.txid, outpoint: *op })?;
                spent += out.amount as u128;
            }
            let created: u128 = tx.outputs.iter().map(|o| o.amount as u128).sum();
            if created > spent {
                return Err(ChainError::InvalidAmounts(tx.txid));
            }
            fees += (spent - created) as Sats;
            for (vout, o) in tx.outputs.iter().enumerate() {
                view.insert(OutPoint { txid: tx.txid, vout: vout as u32 }, *o);
            }
        }
        let cb = coinbase(
            self.mined,
            height,
            vec![TxOut { address: self.params.miner, amount: self.params.subsidy + fees }],
        );
        apply_tx(&mut view, &cb);
        let mut all = Vec::with_capacity(txs.len() + 1);
        all.push(cb);
        all.extend(txs);
        let txids: Vec<Hash256> = all.iter().map(|t| t.txid).collect();
        let mut header = BlockHeader {
            version: BLOCK_VERSION,
            parent_hash: parent,
            merkle_root: merkle_root(&txids).expect("coinbase present"),
            timestamp,
            bits: self.required_bits(&parent).expect("parent known"),
            nonce: 0,
        };
        solve_header(&mut header);
        let hash = header.hash();
        let work = parent_work + header.target().expect("derived bits").work();
        let block = SimBlock { header, txs: all, height };

        self.mined += 1;
        for (i, tx) in block.txs.iter().enumerate() {
            self.tx_blocks.entry(tx.txid).or_default().push((hash, i));
            for (vout, o) in tx.outputs.iter().enumerate() {
                self.outputs.insert(OutPoint { txid: tx.txid, vout: vout as u32 }, *o);
            }
        }
        self.tips.retain(|t| *t != parent);
        self.tip_utxos.remove(&parent);
        self.tips.push(hash);
        self.tip_utxos.insert(hash, view);
        let beats_tip = work > self.blocks[&self.tip()].chain_work;
        self.blocks.insert(hash, Entry { block: block.clone(), chain_work: work });
        if beats_tip {
            self.reorg_to(hash);
        }
        Ok(block)
    }

    fn reorg_to(&mut self, tip: Hash256) {
        let mut path = Vec::new();
        let mut cur = tip;
        loop {
            if self.is_canonical(&cur) {
                break;
            }
            path.push(cur);
            cur = self.blocks[&cur].block.header.parent_hash;
        }
        let fork_height = self.blocks[&cur].block.height as usize;
        self.canonical.truncate(fork_height + 1);
        self.canonical.extend(path.into_iter().rev());
    }

    /// Mines on the canonical tip.
    pub fn mine(&mut self, txs: Vec<SimTx>, timestamp: u32) -> Result<SimBlock, ChainError> {
        self.mine_block(self.tip(), txs, timestamp)
    }

    /// Location of `txid` on the canonical chain.
    pub fn locate(&self, txid: &Hash256) -> Result<(Hash256, u64, usize), ChainError> {
        let spots = self.tx_blocks.get(txid).ok_or(ChainError::TxNotFound(*txid))?;
        spots
            .iter()
            .find(|(b, _)| self.is_canonical(b))
            .map(|(b, i)| (*b, self.blocks[b].block.height, *i))
            .ok_or(ChainError::TxNotOnCanonicalChain(*txid))
    }

    pub fn inclusion_proof(&self, txid: &Hash256) -> Result<TxInclusion, ChainError> {
        let (block_hash, height, tx_index) = self.locate(txid)?;
        let block = &self.blocks[&block_hash].block;
        let proof = merkle_branch(&block.txids(), tx_index).expect("index from block");
        Ok(TxInclusion { block_hash, height, tx_index, proof })
    }

    /// Canonical confirmations: 1 when in the tip block.
    pub fn confirmations(&self, txid: &Hash256) -> Option<u64> {
        self.locate(txid).ok().map(|(_, h, _)| self.height() - h + 1)
    }

    pub fn utxos(&self) -> &Utxos {
        &self.tip_utxos[&self.tip()]
    }

    /// Unspent outputs owned by `address` at the canonical tip.
    pub fn utxos_of(&self, address: &BtcAddress) -> Vec<(OutPoint, TxOut)> {
        self.utxos()
            .iter()
            .filter(|(_, o)| &o.address == address)
            .map(|(op, o)| (*op, *o))
            .collect()
    }

    pub fn balance(&self, address: &BtcAddress) -> Sats {
        self.utxos().values().filter(|o| &o.address == address).map(|o| o.amount).sum()
    }

    pub fn total_utxo_value(&self) -> u128 {
        self.utxos().values().map(|o| o.amount as u128).sum()
    }
}

impl OutputResolver for ChainState {
    fn resolve_output(&self, outpoint: &OutPoint) -> Option<TxOut> {
        self.outputs.get(outpoint).copied()
    }
}
