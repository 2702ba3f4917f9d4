use serde::{Deserialize, Serialize};

use super::payload::RequestPayload;
use crate::btc::{sha256d, Hash256};
use crate::ids::{AccountId, BtcAddress};
use crate::value::{Sats, BPS_DENOM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OutPoint {
    pub txid: Hash256,
    pub vout: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TxOut {
    pub address: BtcAddress,
    pub amount: Sats,
}

/// A simulated Bitcoin transaction. Ownership is by address identity;
/// there are no scripts or signatures.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimTx {
    pub txid: Hash256,
    pub inputs: Vec<OutPoint>,
    pub outputs: Vec<TxOut>,
    pub data_payload: Option<Vec<u8>>,
}

impl SimTx {
    pub fn new(inputs: Vec<OutPoint>, outputs: Vec<TxOut>, data_payload: Option<Vec<u8>>) -> Self {
        let txid = sha256d(&encode_parts(&inputs, &outputs, data_payload.as_deref()));
        SimTx { txid, inputs, outputs, data_payload }
    }

    pub fn is_coinbase(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Canonical encoding hashed into the txid.
    pub fn encode(&self) -> Vec<u8> {
        encode_parts(&self.inputs, &self.outputs, self.data_payload.as_deref())
    }

    pub fn total_out(&self) -> Sats {
        self.outputs.iter().map(|o| o.amount).sum()
    }

    pub fn payload(&self) -> Option<RequestPayload> {
        self.data_payload.as_deref().and_then(|p| RequestPayload::decode(p).ok())
    }

    pub fn paid_to(&self, address: &BtcAddress) -> Sats {
        self.outputs.iter().filter(|o| &o.address == address).map(|o| o.amount).sum()
    }

    /// True iff the stored txid matches the contents.
    pub fn txid_is_consistent(&self) -> bool {
        sha256d(&self.encode()) == self.txid
    }
}

fn encode_parts(inputs: &[OutPoint], outputs: &[TxOut], payload: Option<&[u8]>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + inputs.len() * 36 + outputs.len() * 28);
    out.extend_from_slice(&(inputs.len() as u32).to_le_bytes());
    for i in inputs {
        out.extend_from_slice(&i.txid.0);
        out.extend_from_slice(&i.vout.to_le_bytes());
    }
    out.extend_from_slice(&(outputs.len() as u32).to_le_bytes());
    for o in outputs {
        out.extend_from_slice(&o.address.0);
        out.extend_from_slice(&o.amount.to_le_bytes());
    }
    match payload {
        Some(p) => {
            out.push(1);
            out.extend_from_slice(&(p.len() as u32).to_le_bytes());
            out.extend_from_slice(p);
        }
        None => out.push(0),
    }
    out
}

/// Looks up previous outputs; the chain implements it over every block it has seen.
pub trait OutputResolver {
    fn resolve_output(&self, outpoint: &OutPoint) -> Option<TxOut>;
}

/// The sender of a transaction is the owner of its first input's previous output.
pub fn tx_sender(tx: &SimTx, resolver: &impl OutputResolver) -> Option<BtcAddress> {
    tx.inputs.first().and_then(|i| resolver.resolve_output(i)).map(|o| o.address)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TxBuildError {
    #[error("inputs hold {available} sat, need {needed}")]
    InsufficientFunds { available: Sats, needed: Sats },
    #[error("teleporter fee {0} bps exceeds 10000")]
    FeeBpsOutOfRange(u32),
}

/// Spends `utxos` in order until `amount` is covered. Change returns to the
/// owner of the first utxo.
pub fn build_transfer_tx(
    utxos: &[(OutPoint, TxOut)],
    to: BtcAddress,
    amount: Sats,
    payload: Option<Vec<u8>>,
) -> Result<SimTx, TxBuildError> {
    let mut inputs = Vec::new();
    let mut gathered: Sats = 0;
    for (op, out) in utxos {
        if gathered >= amount && !inputs.is_empty() {
            break;
        }
        inputs.push(*op);
        gathered += out.amount;
    }
    if gathered < amount || inputs.is_empty() {
        return Err(TxBuildError::InsufficientFunds { available: gathered, needed: amount });
    }
    let mut outputs = vec![TxOut { address: to, amount }];
    let change = gathered - amount;
    if change > 0 {
        outputs.push(TxOut { address: utxos[0].1.address, amount: change });
    }
    Ok(SimTx::new(inputs, outputs, payload))
}

/// User lock: pays `amount` to the Locker and carries the mint request payload.
pub fn build_lock_tx(
    user_utxos: &[(OutPoint, TxOut)],
    locker_address: BtcAddress,
    amount: Sats,
    target_receiver: AccountId,
    teleporter_fee_bps: u32,
) -> Result<SimTx, TxBuildError> {
    if teleporter_fee_bps as u64 > BPS_DENOM {
        return Err(TxBuildError::FeeBpsOutOfRange(teleporter_fee_bps));
    }
    let payload = RequestPayload::Lock {
        target_receiver,
        teleporter_fee_bps: teleporter_fee_bps as u16,
    };
    build_transfer_tx(user_utxos, locker_address, amount, Some(payload.encode()))
}

/// Locker payment for an unwrap request, tagged with the request id.
pub fn build_unlock_payment_tx(
    locker_utxos: &[(OutPoint, TxOut)],
    receiver: BtcAddress,
    amount: Sats,
    request_id: Hash256,
) -> Result<SimTx, TxBuildError> {
    let payload = RequestPayload::UnlockPayment { request_id };
    build_transfer_tx(locker_utxos, receiver, amount, Some(payload.encode()))
}
