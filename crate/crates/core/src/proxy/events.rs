use serde::{Deserialize, Serialize};

use crate::bridge::{ProofFailure, RecordId, RootStatus};
use crate::btc::Hash256;
use crate::ids::{AccountId, BtcAddress};
use crate::value::{Ratio, Sats, Units};

/// One state transition on the target chain. Externally tagged so that
/// 128-bit amounts survive a JSON round trip.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    LockerRegistered { locker: AccountId, btc_address: BtcAddress, collateral: Units },
    LockerDeregistered { locker: AccountId, returned: Units },
    CollateralAdjusted { locker: AccountId, delta: i128, collateral: Units },
    Wrapped {
        txid: Hash256,
        locker: AccountId,
        receiver: AccountId,
        submitter: AccountId,
        amount: Sats,
        teleporter_fee: Sats,
        locker_fee: Sats,
        received: Sats,
        reservation: Option<u64>,
    },
    ReservationOpened { id: u64, user: AccountId, locker: AccountId, amount: Sats, deposit: Units, expires_at: u64 },
    ReservationConsumed { id: u64, refunded: Units },
    ReservationExpired { id: u64, forfeited: Units },
    UnwrapRequested {
        request_id: Hash256,
        user: AccountId,
        locker: AccountId,
        btc_receiver: BtcAddress,
        burnt_gross: Sats,
        amount_due: Sats,
        locker_fee: Sats,
        deadline: u64,
    },
    UnwrapPaid { request_id: Hash256, txid: Hash256 },
    TimeoutSlashed { request_id: Hash256, locker: AccountId, user: AccountId, collateral_out: Units, exhausted: bool },
    TheftSlashed {
        txid: Hash256,
        locker: AccountId,
        slasher: AccountId,
        stolen: Sats,
        collateral_out: Units,
        exhausted: bool,
    },
    Liquidated {
        locker: AccountId,
        liquidator: AccountId,
        burnt: Sats,
        collateral_out: Units,
        pre_ratio: Ratio,
        post_ratio: Option<Ratio>,
    },
    HeaderAccepted { height: u64, hash: Hash256 },
    HeaderFinalized { height: u64, hash: Hash256 },
    RootSubmitted { record: RecordId, height: u64, root: Hash256, relayer: AccountId, epoch_timestamp: Option<u32> },
    RootChallenged { record: RecordId, disputer: AccountId },
    RootProofFailed { record: RecordId, reason: ProofFailure },
    RootSettled { record: RecordId, height: u64, status: RootStatus },
    BondPaid { record: RecordId, to: AccountId, amount: Units },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: u64,
    pub event: Event,
}
