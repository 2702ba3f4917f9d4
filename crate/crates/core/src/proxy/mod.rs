//! The target-chain side: wrap and unwrap flows, TeleBTC and collateral
//! token ledgers, reservations, theft reports, and bonded bridge calls.
//!
//! The proxy owns the bridge and the Locker registry so that cross-contract
//! calls happen atomically inside one method.

mod events;
mod fees;
mod ledger;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use events::{Event, EventRecord};
pub use fees::{FeeParams, FeeParamsError};
pub use ledger::{Shortfall, TokenLedger};

use crate::bridge::{
    Accepted, Bridge, OptimisticError, ProofOutcome, RecordId, Rejection,
};
use crate::btc::{sha256d, BlockHeader, Hash256, MerkleProof};
use crate::chainsim::{tx_sender, OutputResolver, RequestPayload, SimTx};
use crate::ids::{AccountId, BtcAddress};
use crate::lockers::{EconParams, EconParamsError, LockerError, LockerStatus, LockersManager};
use crate::value::{bps_of, PriceQuote, Ratio, Sats, Units, COLLATERAL_UNIT};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxyParams {
    pub fees: FeeParams,
    pub reservation_window: u64,
    pub reservation_deposit: Units,
}

impl Default for ProxyParams {
    fn default() -> Self {
        ProxyParams { fees: FeeParams::default(), reservation_window: 3 * 3600, reservation_deposit: COLLATERAL_UNIT / 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProxyError {
    #[error("transaction already used")]
    DuplicateTx,
    #[error("inclusion not proven against a finalized block")]
    NotFinalized,
    #[error("transaction contents do not hash to its txid")]
    TxidMismatch,
    #[error("missing or malformed request payload")]
    MalformedPayload,
    #[error("no output pays a registered locker")]
    NotALocker,
    #[error("locker lacks minting capacity")]
    CapacityExceeded,
    #[error("locker lacks free capacity for the reservation")]
    InsufficientCapacity,
    #[error("reservation deposit too small")]
    DepositTooSmall,
    #[error("insufficient TeleBTC: {0}")]
    InsufficientBalance(Shortfall),
    #[error("insufficient collateral tokens: {0}")]
    InsufficientTokens(Shortfall),
    #[error("locker holds too little BTC for this request")]
    LockerTooSmall,
    #[error("unknown unwrap request")]
    UnknownRequest,
    #[error("request already resolved")]
    AlreadyResolved,
    #[error("payment deadline passed")]
    DeadlinePassed,
    #[error("deadline not reached")]
    DeadlineNotReached,
    #[error("payment not sent by the locker")]
    SenderMismatch,
    #[error("payment does not reach the receiver")]
    ReceiverMismatch,
    #[error("payment amount differs from the amount due")]
    AmountMismatch,
    #[error("transaction does not spend a locker's BTC")]
    NotALockerSpend,
    #[error("transaction is a recorded payment")]
    RecordedPayment,
    #[error("transaction is inside the grace period")]
    TooRecent,
    #[error("theft already reported")]
    DuplicateReport,
    #[error("operation needs the other bridge kind")]
    WrongBridge,
    #[error(transparent)]
    Locker(#[from] LockerError),
    #[error(transparent)]
    Header(#[from] Rejection),
    #[error(transparent)]
    Root(#[from] OptimisticError),
    #[error(transparent)]
    Econ(#[from] EconParamsError),
    #[error(transparent)]
    Fees(#[from] FeeParamsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnwrapStatus {
    Open,
    Paid,
    Slashed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnwrapRequest {
    pub id: Hash256,
    pub user: AccountId,
    pub locker: AccountId,
    pub btc_receiver: BtcAddress,
    pub amount_burnt_gross: Sats,
    pub amount_due: Sats,
    pub created_at: u64,
    pub deadline: u64,
    pub status: UnwrapStatus,
    /// Collateral paid to the user if the request was slashed.
    pub compensation: Units,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReservationStatus {
    Open,
    Consumed,
    Expired,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reservation {
    pub id: u64,
    pub user: AccountId,
    pub locker: AccountId,
    pub amount: Sats,
    pub deposit: Units,
    pub expires_at: u64,
    pub status: ReservationStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrapReceipt {
    pub amount: Sats,
    pub teleporter_fee: Sats,
    pub locker_fee: Sats,
    pub received: Sats,
    pub locker: AccountId,
    pub receiver: AccountId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheftReceipt {
    pub locker: AccountId,
    pub stolen: Sats,
    pub collateral_out: Units,
    pub exhausted: bool,
}

/// A transaction together with where the bridge should find it.
#[derive(Clone, Copy, Debug)]
pub struct TxEvidence<'a> {
    pub tx: &'a SimTx,
    pub height: u64,
    pub tx_index: u64,
    pub proof: &'a MerkleProof,
}

#[derive(Clone, Debug)]
pub struct Proxy {
    params: ProxyParams,
    telebtc: TokenLedger,
    tokens: TokenLedger,
    lockers: LockersManager,
    bridge: Bridge,
    used_txids: BTreeSet<Hash256>,
    reported_thefts: BTreeSet<Hash256>,
    requests: BTreeMap<Hash256, UnwrapRequest>,
    reservations: BTreeMap<u64, Reservation>,
    next_reservation: u64,
    unwrap_seq: u64,
    treasury: Units,
    reservation_escrow: Units,
    events: Vec<EventRecord>,
}

impl Proxy {
    pub fn new(params: ProxyParams, econ: EconParams, bridge: Bridge) -> Result<Self, ProxyError> {
        params.fees.validate()?;
        Ok(Proxy {
            params,
            telebtc: TokenLedger::default(),
            tokens: TokenLedger::default(),
            lockers: LockersManager::new(econ)?,
            bridge,
            used_txids: BTreeSet::new(),
            reported_thefts: BTreeSet::new(),
            requests: BTreeMap::new(),
            reservations: BTreeMap::new(),
            next_reservation: 0,
            unwrap_seq: 0,
            treasury: 0,
            reservation_escrow: 0,
            events: Vec::new(),
        })
    }

    pub fn params(&self) -> &ProxyParams {
        &self.params
    }

    pub fn telebtc(&self) -> &TokenLedger {
        &self.telebtc
    }

    pub fn tokens(&self) -> &TokenLedger {
        &self.tokens
    }

    pub fn lockers(&self) -> &LockersManager {
        &self.lockers
    }

    pub fn bridge(&self) -> &Bridge {
        &self.bridge
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn requests(&self) -> &BTreeMap<Hash256, UnwrapRequest> {
        &self.requests
    }

    pub fn reservations(&self) -> &BTreeMap<u64, Reservation> {
        &self.reservations
    }

    pub fn used_txids(&self) -> &BTreeSet<Hash256> {
        &self.used_txids
    }

    pub fn treasury(&self) -> Units {
        self.treasury
    }

    pub fn reservation_escrow(&self) -> Units {
        self.reservation_escrow
    }

    fn log(&mut self, time: u64, event: Event) {
        self.events.push(EventRecord { time, event });
    }

    /// Genesis endowment of collateral tokens.
    pub fn endow_tokens(&mut self, to: &AccountId, amount: Units) {
        self.tokens.mint(to, amount);
    }

    /// Test hook: mints TeleBTC with no backing. Only negative controls use it.
    #[doc(hidden)]
    pub fn debug_mint_unbacked(&mut self, to: &AccountId, amount: Sats) {
        self.telebtc.mint(to, amount as u128);
    }

    pub fn total_supply(&self) -> Sats {
        self.telebtc.total_supply() as Sats
    }

    pub fn telebtc_balance(&self, who: &AccountId) -> Sats {
        self.telebtc.balance(who) as Sats
    }

    pub fn token_balance(&self, who: &AccountId) -> Units {
        self.tokens.balance(who)
    }

    // ---- fees -----------------------------------------------------------

    /// Total free capacity value over total locked value; `None` with nothing locked.
    pub fn capacity_ratio(&self, quote: &PriceQuote) -> Option<Ratio> {
        let (cap, locked) = self.lockers.capacity_and_locked_value(quote);
        locked.is_positive().then(|| cap / locked)
    }

    pub fn minting_fee_bps(&self, quote: &PriceQuote) -> u32 {
        self.params.fees.minting_fee_bps(self.capacity_ratio(quote).as_ref())
    }

    pub fn burning_fee_bps(&self, quote: &PriceQuote) -> u32 {
        self.params.fees.burning_fee_bps(self.capacity_ratio(quote).as_ref())
    }

    // ---- lockers --------------------------------------------------------

    pub fn register_locker(
        &mut self,
        locker: AccountId,
        btc_address: BtcAddress,
        collateral: Units,
        now: u64,
    ) -> Result<(), ProxyError> {
        if self.tokens.balance(&locker) < collateral {
            return Err(ProxyError::InsufficientTokens(Shortfall {
                have: self.tokens.balance(&locker),
                need: collateral,
            }));
        }
        self.lockers.register(locker, btc_address, collateral)?;
        self.tokens.debit(&locker, collateral).expect("checked");
        self.log(now, Event::LockerRegistered { locker, btc_address, collateral });
        Ok(())
    }

    pub fn deregister_locker(&mut self, locker: AccountId, now: u64) -> Result<Units, ProxyError> {
        let returned = self.lockers.deregister(&locker)?;
        self.tokens.credit(&locker, returned);
        self.log(now, Event::LockerDeregistered { locker, returned });
        Ok(returned)
    }

    pub fn adjust_collateral(
        &mut self,
        locker: AccountId,
        delta: i128,
        now: u64,
        quote: &PriceQuote,
    ) -> Result<Units, ProxyError> {
        if delta > 0 {
            self.tokens.debit(&locker, delta as Units).map_err(ProxyError::InsufficientTokens)?;
        }
        let collateral = match self.lockers.adjust_collateral(&locker, delta, quote) {
            Ok(c) => c,
            Err(e) => {
                if delta > 0 {
                    self.tokens.credit(&locker, delta as Units);
                }
                return Err(e.into());
            }
        };
        if delta < 0 {
            self.tokens.credit(&locker, delta.unsigned_abs());
        }
        self.log(now, Event::CollateralAdjusted { locker, delta, collateral });
        Ok(collateral)
    }

    fn open_reserved(&self, locker: &AccountId) -> Sats {
        self.reservations
            .values()
            .filter(|r| r.status == ReservationStatus::Open && &r.locker == locker)
            .map(|r| r.amount)
            .sum()
    }

    /// Minting capacity minus open reservations.
    pub fn free_capacity(&self, locker: &AccountId, quote: &PriceQuote) -> Sats {
        self.lockers
            .minting_capacity(locker, quote)
            .map(|c| c.saturating_sub(self.open_reserved(locker)))
            .unwrap_or(0)
    }

    pub fn liquidate(
        &mut self,
        liquidator: AccountId,
        locker: AccountId,
        x: Sats,
        now: u64,
        quote: &PriceQuote,
    ) -> Result<Units, ProxyError> {
        let have = self.telebtc.balance(&liquidator);
        if have < x as u128 {
            return Err(ProxyError::InsufficientBalance(Shortfall { have, need: x as u128 }));
        }
        let out = self.lockers.liquidate(&locker, x, quote)?;
        self.telebtc.burn(&liquidator, x as u128).expect("checked");
        self.tokens.credit(&liquidator, out.collateral_out);
        self.log(
            now,
            Event::Liquidated {
                locker,
                liquidator,
                burnt: x,
                collateral_out: out.collateral_out,
                pre_ratio: out.pre_ratio,
                post_ratio: out.post_ratio,
            },
        );
        Ok(out.collateral_out)
    }

    // ---- wrap -----------------------------------------------------------

    fn check_inclusion(&self, ev: &TxEvidence) -> Result<(), ProxyError> {
        if !ev.tx.txid_is_consistent() {
            return Err(ProxyError::TxidMismatch);
        }
        if !self.bridge.check_tx_proof(&ev.tx.txid, ev.height, ev.tx_index, ev.proof) {
            return Err(ProxyError::NotFinalized);
        }
        Ok(())
    }

    /// Mints against a proven lock transaction. The submitter earns the
    /// teleporter fee; the locker earns the minting fee.
    pub fn wrap(
        &mut self,
        ev: TxEvidence,
        submitter: AccountId,
        now: u64,
        quote: &PriceQuote,
    ) -> Result<WrapReceipt, ProxyError> {
        let tx = ev.tx;
        if self.used_txids.contains(&tx.txid) {
            return Err(ProxyError::DuplicateTx);
        }
        self.check_inclusion(&ev)?;
        let Some(RequestPayload::Lock { target_receiver, teleporter_fee_bps }) = tx.payload() else {
            return Err(ProxyError::MalformedPayload);
        };
        if teleporter_fee_bps as u64 > crate::value::BPS_DENOM {
            return Err(ProxyError::MalformedPayload);
        }
        let locker = tx
            .outputs
            .iter()
            .find_map(|o| self.lockers.by_address(&o.address).filter(|l| l.status == LockerStatus::Active))
            .ok_or(ProxyError::NotALocker)?;
        let (locker_id, locker_addr) = (locker.id, locker.btc_address);
        let amount = tx.paid_to(&locker_addr);

        let reservation = self
            .reservations
            .values()
            .find(|r| {
                r.status == ReservationStatus::Open
                    && r.user == target_receiver
                    && r.locker == locker_id
                    && r.amount >= amount
            })
            .map(|r| r.id);
        if reservation.is_none() && self.free_capacity(&locker_id, quote) < amount {
            return Err(ProxyError::CapacityExceeded);
        }

        let mint_bps = self.minting_fee_bps(quote);
        let teleporter_fee = bps_of(amount, teleporter_fee_bps as u64);
        let locker_fee = bps_of(amount, mint_bps as u64).min(amount - teleporter_fee);
        let received = amount - teleporter_fee - locker_fee;
        self.telebtc.mint(&submitter, teleporter_fee as u128);
        self.telebtc.mint(&locker_id, locker_fee as u128);
        self.telebtc.mint(&target_receiver, received as u128);
        self.lockers.add_locked(&locker_id, amount)?;
        self.used_txids.insert(tx.txid);
        self.log(
            now,
            Event::Wrapped {
                txid: tx.txid,
                locker: locker_id,
                receiver: target_receiver,
                submitter,
                amount,
                teleporter_fee,
                locker_fee,
                received,
                reservation,
            },
        );
        if let Some(id) = reservation {
            let r = self.reservations.get_mut(&id).expect("found above");
            r.status = ReservationStatus::Consumed;
            let (user, refunded) = (r.user, r.deposit);
            self.reservation_escrow -= refunded;
            self.tokens.credit(&user, refunded);
            self.log(now, Event::ReservationConsumed { id, refunded });
        }
        Ok(WrapReceipt { amount, teleporter_fee, locker_fee, received, locker: locker_id, receiver: target_receiver })
    }

    pub fn reserve_capacity(
        &mut self,
        user: AccountId,
        locker: AccountId,
        amount: Sats,
        deposit: Units,
        now: u64,
        quote: &PriceQuote,
    ) -> Result<u64, ProxyError> {
        if deposit < self.params.reservation_deposit {
            return Err(ProxyError::DepositTooSmall);
        }
        if self.free_capacity(&locker, quote) < amount {
            return Err(ProxyError::InsufficientCapacity);
        }
        self.tokens.debit(&user, deposit).map_err(ProxyError::InsufficientTokens)?;
        self.reservation_escrow += deposit;
        let id = self.next_reservation;
        self.next_reservation += 1;
        let expires_at = now + self.params.reservation_window;
        self.reservations.insert(
            id,
            Reservation { id, user, locker, amount, deposit, expires_at, status: ReservationStatus::Open },
        );
        self.log(now, Event::ReservationOpened { id, user, locker, amount, deposit, expires_at });
        Ok(id)
    }

    /// Open reservations strictly past expiry forfeit their deposit.
    pub fn expire_reservations(&mut self, now: u64) -> Vec<u64> {
        let due: Vec<u64> = self
            .reservations
            .values()
            .filter(|r| r.status == ReservationStatus::Open && now > r.expires_at)
            .map(|r| r.id)
            .collect();
        for id in &due {
            let r = self.reservations.get_mut(id).expect("listed");
            r.status = ReservationStatus::Expired;
            let forfeited = r.deposit;
            self.reservation_escrow -= forfeited;
            self.treasury += forfeited;
            self.log(now, Event::ReservationExpired { id: *id, forfeited });
        }
        due
    }

    // ---- unwrap ---------------------------------------------------------

    pub fn unwrap(
        &mut self,
        user: AccountId,
        x: Sats,
        locker: AccountId,
        btc_receiver: BtcAddress,
        now: u64,
        quote: &PriceQuote,
    ) -> Result<Hash256, ProxyError> {
        let have = self.telebtc.balance(&user);
        if have < x as u128 {
            return Err(ProxyError::InsufficientBalance(Shortfall { have, need: x as u128 }));
        }
        let fee = bps_of(x, self.burning_fee_bps(quote) as u64);
        let due = x - fee;
        let l = self
            .lockers
            .get(&locker)
            .filter(|l| l.status == LockerStatus::Active)
            .ok_or(LockerError::NotRegistered)?;
        if l.locked_btc < due {
            return Err(ProxyError::LockerTooSmall);
        }
        self.telebtc.transfer(&user, &locker, fee as u128).expect("checked");
        self.telebtc.burn(&user, due as u128).expect("checked");
        self.lockers.sub_locked(&locker, due)?;

        let mut pre = b"unwrap".to_vec();
        pre.extend_from_slice(&self.unwrap_seq.to_le_bytes());
        pre.extend_from_slice(user.as_bytes());
        pre.extend_from_slice(locker.as_bytes());
        let id = sha256d(&pre);
        self.unwrap_seq += 1;
        let deadline = now + self.lockers.params().unwrap_deadline;
        self.requests.insert(
            id,
            UnwrapRequest {
                id,
                user,
                locker,
                btc_receiver,
                amount_burnt_gross: x,
                amount_due: due,
                created_at: now,
                deadline,
                status: UnwrapStatus::Open,
                compensation: 0,
            },
        );
        self.log(
            now,
            Event::UnwrapRequested {
                request_id: id,
                user,
                locker,
                btc_receiver,
                burnt_gross: x,
                amount_due: due,
                locker_fee: fee,
                deadline,
            },
        );
        Ok(id)
    }

    pub fn submit_payment_proof(
        &mut self,
        request_id: Hash256,
        ev: TxEvidence,
        now: u64,
        resolver: &dyn OutputResolver,
    ) -> Result<(), ProxyError> {
        let req = self.requests.get(&request_id).ok_or(ProxyError::UnknownRequest)?;
        if req.status != UnwrapStatus::Open {
            return Err(ProxyError::AlreadyResolved);
        }
        if now > req.deadline {
            return Err(ProxyError::DeadlinePassed);
        }
        let tx = ev.tx;
        if self.used_txids.contains(&tx.txid) {
            return Err(ProxyError::DuplicateTx);
        }
        self.check_inclusion(&ev)?;
        let locker_addr = self.lockers.get(&req.locker).map(|l| l.btc_address).ok_or(LockerError::NotRegistered)?;
        if tx_sender_dyn(tx, resolver) != Some(locker_addr) {
            return Err(ProxyError::SenderMismatch);
        }
        if tx.payload() != Some(RequestPayload::UnlockPayment { request_id }) {
            return Err(ProxyError::MalformedPayload);
        }
        let paid = tx.paid_to(&req.btc_receiver);
        if paid == 0 && req.amount_due > 0 {
            return Err(ProxyError::ReceiverMismatch);
        }
        if paid != req.amount_due {
            return Err(ProxyError::AmountMismatch);
        }
        let locker = req.locker;
        self.requests.get_mut(&request_id).expect("found").status = UnwrapStatus::Paid;
        self.used_txids.insert(tx.txid);
        self.lockers.record_payment_txid(&locker, tx.txid)?;
        self.log(now, Event::UnwrapPaid { request_id, txid: tx.txid });
        Ok(())
    }

    pub fn claim_timeout(&mut self, request_id: Hash256, now: u64, quote: &PriceQuote) -> Result<Units, ProxyError> {
        let req = self.requests.get(&request_id).ok_or(ProxyError::UnknownRequest)?;
        if req.status != UnwrapStatus::Open {
            return Err(ProxyError::AlreadyResolved);
        }
        if now <= req.deadline {
            return Err(ProxyError::DeadlineNotReached);
        }
        let (locker, user) = (req.locker, req.user);
        let burnt_value = quote.btc_value(req.amount_due);
        let out = self.lockers.slash_for_timeout(&locker, &burnt_value, quote)?;
        self.tokens.credit(&user, out.collateral_out);
        let req = self.requests.get_mut(&request_id).expect("found");
        req.status = UnwrapStatus::Slashed;
        req.compensation = out.collateral_out;
        self.log(
            now,
            Event::TimeoutSlashed {
                request_id,
                locker,
                user,
                collateral_out: out.collateral_out,
                exhausted: out.exhausted,
            },
        );
        Ok(out.collateral_out)
    }

    // ---- theft ----------------------------------------------------------

    /// Satoshi a transaction moves out of a locker: spent locker inputs minus
    /// change back, capped at what the locker custodies for the protocol.
    pub fn theft_amount(&self, tx: &SimTx, resolver: &dyn OutputResolver) -> Option<(AccountId, Sats)> {
        let sender = tx_sender_dyn(tx, resolver)?;
        let l = self.lockers.by_address(&sender)?;
        let spent: Sats = tx
            .inputs
            .iter()
            .filter_map(|i| resolver.resolve_output(i))
            .filter(|o| o.address == sender)
            .map(|o| o.amount)
            .sum();
        let stolen = spent.saturating_sub(tx.paid_to(&sender)).min(l.locked_btc);
        Some((l.id, stolen))
    }

    /// `header` is the block containing the transaction; its timestamp
    /// dates the theft.
    #[allow(clippy::too_many_arguments)]
    pub fn report_theft(
        &mut self,
        ev: TxEvidence,
        header: &BlockHeader,
        slasher: AccountId,
        slasher_telebtc: Sats,
        now: u64,
        quote: &PriceQuote,
        resolver: &dyn OutputResolver,
    ) -> Result<TheftReceipt, ProxyError> {
        let tx = ev.tx;
        if self.reported_thefts.contains(&tx.txid) {
            return Err(ProxyError::DuplicateReport);
        }
        self.check_inclusion(&ev)?;
        if !self.bridge.attest_header(ev.height, header) {
            return Err(ProxyError::NotFinalized);
        }
        let (locker, stolen) = self.theft_amount(tx, resolver).ok_or(ProxyError::NotALockerSpend)?;
        if stolen == 0 {
            return Err(ProxyError::NotALockerSpend);
        }
        if self.lockers.is_recorded_payment(&locker, &tx.txid) {
            return Err(ProxyError::RecordedPayment);
        }
        if header.timestamp as u64 + self.lockers.params().theft_grace >= now {
            return Err(ProxyError::TooRecent);
        }
        let have = self.telebtc.balance(&slasher);
        if have < slasher_telebtc as u128 {
            return Err(ProxyError::InsufficientBalance(Shortfall { have, need: slasher_telebtc as u128 }));
        }
        let out = self.lockers.slash_for_theft(&locker, stolen, slasher_telebtc, quote)?;
        self.telebtc.burn(&slasher, stolen as u128).expect("checked");
        self.tokens.credit(&slasher, out.collateral_out);
        self.reported_thefts.insert(tx.txid);
        self.log(
            now,
            Event::TheftSlashed {
                txid: tx.txid,
                locker,
                slasher,
                stolen,
                collateral_out: out.collateral_out,
                exhausted: out.exhausted,
            },
        );
        Ok(TheftReceipt { locker, stolen, collateral_out: out.collateral_out, exhausted: out.exhausted })
    }

    pub fn is_reported_theft(&self, txid: &Hash256) -> bool {
        self.reported_thefts.contains(txid)
    }

    // ---- bridge ---------------------------------------------------------

    pub fn relay_header(&mut self, header: &BlockHeader, now: u64) -> Result<Accepted, ProxyError> {
        let b = self.bridge.spv_mut().ok_or(ProxyError::WrongBridge)?;
        let acc = b.add_header(header)?;
        self.log(now, Event::HeaderAccepted { height: acc.height, hash: header.hash() });
        for &(height, hash) in &acc.finalized {
            self.log(now, Event::HeaderFinalized { height, hash });
        }
        Ok(acc)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn submit_root(
        &mut self,
        relayer: AccountId,
        root: Hash256,
        height: u64,
        parent_root: Hash256,
        epoch_timestamp: Option<u32>,
        now: u64,
    ) -> Result<RecordId, ProxyError> {
        let b = self.bridge.optimistic_mut().ok_or(ProxyError::WrongBridge)?;
        let bond = b.params().relayer_bond;
        let have = self.tokens.balance(&relayer);
        if have < bond {
            return Err(ProxyError::InsufficientTokens(Shortfall { have, need: bond }));
        }
        let record = b.submit_root(root, height, parent_root, relayer, bond, epoch_timestamp, now)?;
        self.tokens.debit(&relayer, bond).expect("checked");
        self.log(now, Event::RootSubmitted { record, height, root, relayer, epoch_timestamp });
        Ok(record)
    }

    pub fn challenge_root(&mut self, disputer: AccountId, record: RecordId, now: u64) -> Result<(), ProxyError> {
        let b = self.bridge.optimistic_mut().ok_or(ProxyError::WrongBridge)?;
        let bond = b.params().disputer_bond;
        let have = self.tokens.balance(&disputer);
        if have < bond {
            return Err(ProxyError::InsufficientTokens(Shortfall { have, need: bond }));
        }
        b.challenge_root(record, disputer, bond, now)?;
        self.tokens.debit(&disputer, bond).expect("checked");
        self.log(now, Event::RootChallenged { record, disputer });
        Ok(())
    }

    pub fn prove_root(
        &mut self,
        record: RecordId,
        header: &BlockHeader,
        prev: &BlockHeader,
        now: u64,
    ) -> Result<ProofOutcome, ProxyError> {
        let b = self.bridge.optimistic_mut().ok_or(ProxyError::WrongBridge)?;
        let res = b.prove_root(record, header, prev, now);
        let height = b.record(record).map(|r| r.height).unwrap_or(0);
        match &res {
            Ok(ProofOutcome::Verified) => {
                self.log(now, Event::RootSettled { record, height, status: crate::bridge::RootStatus::Verified })
            }
            Ok(ProofOutcome::Failed(reason)) => self.log(now, Event::RootProofFailed { record, reason: *reason }),
            Err(OptimisticError::ProofWindowClosed) => {
                self.log(now, Event::RootSettled { record, height, status: crate::bridge::RootStatus::Invalid })
            }
            Err(_) => {}
        }
        self.pay_bonds(now);
        Ok(res?)
    }

    fn pay_bonds(&mut self, now: u64) {
        let Some(b) = self.bridge.optimistic_mut() else { return };
        for p in b.take_payouts() {
            self.tokens.credit(&p.to, p.amount);
            self.log(now, Event::BondPaid { record: p.record, to: p.to, amount: p.amount });
        }
    }

    /// Per-tick housekeeping: bridge timers, then reservation expiry.
    pub fn tick(&mut self, now: u64) {
        if let Some(b) = self.bridge.optimistic_mut() {
            for t in b.tick(now) {
                self.log(now, Event::RootSettled { record: t.record, height: t.height, status: t.to });
            }
            self.pay_bonds(now);
        }
        self.expire_reservations(now);
    }

    /// Collateral tokens held by the bridge as bonds.
    pub fn bond_escrow(&self) -> Units {
        self.bridge.as_optimistic().map(|b| b.escrow()).unwrap_or(0)
    }
}

fn tx_sender_dyn(tx: &SimTx, resolver: &dyn OutputResolver) -> Option<BtcAddress> {
    struct R<'a>(&'a dyn OutputResolver);
    impl OutputResolver for R<'_> {
        fn resolve_output(&self, op: &crate::chainsim::OutPoint) -> Option<crate::chainsim::TxOut> {
            self.0.resolve_output(op)
        }
    }
    tx_sender(tx, &R(resolver))
}
