//! Locker registry: collateral, minting capacity, liquidation and slashing.
//!
//! This contract only keeps the books. Moving collateral tokens and burning
//! TeleBTC is the proxy's job; every mutating call here returns the amount
//! the proxy must move.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::btc::Hash256;
use crate::ids::{AccountId, BtcAddress};
use crate::value::{PriceQuote, Ratio, Sats, Units};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LockerStatus {
    Active,
    Deregistered,
    FullySlashed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockerAccount {
    pub id: AccountId,
    pub btc_address: BtcAddress,
    pub collateral: Units,
    pub locked_btc: Sats,
    pub status: LockerStatus,
    pub recorded_payment_txids: BTreeSet<Hash256>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EconParams {
    pub collateralization_ratio: Ratio,
    pub liquidation_ratio: Ratio,
    pub discount_ratio: Ratio,
    pub theft_grace: u64,
    pub unwrap_deadline: u64,
}

impl Default for EconParams {
    fn default() -> Self {
        EconParams {
            collateralization_ratio: Ratio::new(3, 2),
            liquidation_ratio: Ratio::new(6, 5),
            discount_ratio: Ratio::new(19, 20),
            theft_grace: 7200,
            unwrap_deadline: 21_600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EconParamsError {
    #[error("collateralization ratio must exceed 1")]
    CollateralizationRatio,
    #[error("liquidation ratio must lie strictly between 1 and the collateralization ratio")]
    LiquidationRatio,
    #[error("discount ratio must lie in (1/liquidation ratio, 1]")]
    DiscountRatio,
}

impl EconParams {
    /// Checks `1/LR < DR <= 1 < LR < CR`. DR = 1 is tolerated as a
    /// configuration edge; it removes the liquidation discount.
    pub fn validate(&self) -> Result<(), EconParamsError> {
        let one = Ratio::one();
        if self.collateralization_ratio <= one {
            return Err(EconParamsError::CollateralizationRatio);
        }
        if self.liquidation_ratio <= one || self.liquidation_ratio >= self.collateralization_ratio {
            return Err(EconParamsError::LiquidationRatio);
        }
        if self.discount_ratio > one || self.discount_ratio <= self.liquidation_ratio.recip() {
            return Err(EconParamsError::DiscountRatio);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LockerError {
    #[error("locker already registered")]
    AlreadyRegistered,
    #[error("bitcoin address claimed by another locker")]
    AddressInUse,
    #[error("collateral must be positive")]
    ZeroCollateral,
    #[error("locker not registered")]
    NotRegistered,
    #[error("locker still custodies {0} sat")]
    OutstandingLockedBtc(Sats),
    #[error("withdrawal would leave the locker under-collateralized")]
    WouldBreachHealth,
    #[error("collateral ratio is not below the liquidation ratio")]
    NotLiquidatable,
    #[error("liquidation would restore the ratio past the collateralization ratio")]
    OverLiquidation,
    #[error("amount exceeds the locker's locked BTC")]
    ExceedsPosition,
    #[error("slasher must supply exactly the stolen amount of TeleBTC")]
    WrongTeleBtcAmount,
}

/// Collateral released by a slash; `exhausted` marks a capped transfer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlashOutcome {
    pub collateral_out: Units,
    pub exhausted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiquidationOutcome {
    pub collateral_out: Units,
    pub pre_ratio: Ratio,
    pub post_ratio: Option<Ratio>,
}

/// Both liquidation conditions over exact values. `x` is the value of the
/// TeleBTC offered.
pub fn liquidation_check(
    collateral_value: &Ratio,
    locked_value: &Ratio,
    x: &Ratio,
    params: &EconParams,
) -> Result<(), LockerError> {
    if !locked_value.is_positive() || collateral_value / locked_value >= params.liquidation_ratio {
        return Err(LockerError::NotLiquidatable);
    }
    if x > locked_value {
        return Err(LockerError::ExceedsPosition);
    }
    let remaining = locked_value - x;
    if !remaining.is_positive() {
        return Err(LockerError::OverLiquidation);
    }
    let post = (collateral_value - &(x / &params.discount_ratio)) / remaining;
    if post >= params.collateralization_ratio {
        return Err(LockerError::OverLiquidation);
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LockersManager {
    params: EconParams,
    lockers: BTreeMap<AccountId, LockerAccount>,
    collateral_in: Units,
    collateral_out: Units,
}

impl LockersManager {
    pub fn new(params: EconParams) -> Result<Self, EconParamsError> {
        params.validate()?;
        Ok(LockersManager { params, lockers: BTreeMap::new(), collateral_in: 0, collateral_out: 0 })
    }

    pub fn params(&self) -> &EconParams {
        &self.params
    }

    pub fn get(&self, id: &AccountId) -> Option<&LockerAccount> {
        self.lockers.get(id)
    }

    pub fn all(&self) -> impl Iterator<Item = &LockerAccount> {
        self.lockers.values()
    }

    /// Registered (not deregistered) locker owning `address`.
    pub fn by_address(&self, address: &BtcAddress) -> Option<&LockerAccount> {
        self.lockers
            .values()
            .find(|l| &l.btc_address == address && l.status != LockerStatus::Deregistered)
    }

    pub fn total_locked(&self) -> Sats {
        self.lockers.values().map(|l| l.locked_btc).sum()
    }

    /// (collateral deposited, collateral paid out) over the contract's life.
    pub fn collateral_flows(&self) -> (Units, Units) {
        (self.collateral_in, self.collateral_out)
    }

    pub fn total_collateral(&self) -> Units {
        self.lockers.values().map(|l| l.collateral).sum()
    }

    fn active(&self, id: &AccountId) -> Result<&LockerAccount, LockerError> {
        self.lockers
            .get(id)
            .filter(|l| l.status == LockerStatus::Active)
            .ok_or(LockerError::NotRegistered)
    }

    fn account_mut(&mut self, id: &AccountId) -> &mut LockerAccount {
        self.lockers.get_mut(id).expect("checked by caller")
    }

    pub fn register(&mut self, id: AccountId, btc_address: BtcAddress, collateral: Units) -> Result<(), LockerError> {
        if self.lockers.get(&id).is_some_and(|l| l.status != LockerStatus::Deregistered) {
            return Err(LockerError::AlreadyRegistered);
        }
        if self.by_address(&btc_address).is_some() {
            return Err(LockerError::AddressInUse);
        }
        if collateral == 0 {
            return Err(LockerError::ZeroCollateral);
        }
        self.collateral_in += collateral;
        self.lockers.insert(
            id,
            LockerAccount {
                id,
                btc_address,
                collateral,
                locked_btc: 0,
                status: LockerStatus::Active,
                recorded_payment_txids: BTreeSet::new(),
            },
        );
        Ok(())
    }

    /// Returns the remaining collateral.
    pub fn deregister(&mut self, id: &AccountId) -> Result<Units, LockerError> {
        let l = self.active(id)?;
        if l.locked_btc > 0 {
            return Err(LockerError::OutstandingLockedBtc(l.locked_btc));
        }
        let l = self.account_mut(id);
        let out = std::mem::take(&mut l.collateral);
        l.status = LockerStatus::Deregistered;
        self.collateral_out += out;
        Ok(out)
    }

    /// Positive `delta` deposits, negative withdraws. Withdrawing everything
    /// with nothing locked deregisters the locker.
    pub fn adjust_collateral(&mut self, id: &AccountId, delta: i128, quote: &PriceQuote) -> Result<Units, LockerError> {
        let l = self.active(id)?;
        if delta >= 0 {
            self.collateral_in += delta as Units;
            let l = self.account_mut(id);
            l.collateral += delta as Units;
            return Ok(l.collateral);
        }
        let take = delta.unsigned_abs();
        if take > l.collateral {
            return Err(LockerError::WouldBreachHealth);
        }
        let left = l.collateral - take;
        if l.locked_btc > 0 {
            let ratio = quote.collateral_value(left) / quote.btc_value(l.locked_btc);
            if ratio < self.params.collateralization_ratio {
                return Err(LockerError::WouldBreachHealth);
            }
        }
        self.collateral_out += take;
        let l = self.account_mut(id);
        l.collateral = left;
        if left == 0 {
            l.status = LockerStatus::Deregistered;
        }
        Ok(left)
    }

    /// CollateralValue / LockedBtcValue; `None` with nothing locked.
    pub fn health_ratio(&self, id: &AccountId, quote: &PriceQuote) -> Option<Ratio> {
        let l = self.lockers.get(id)?;
        (l.locked_btc > 0).then(|| quote.collateral_value(l.collateral) / quote.btc_value(l.locked_btc))
    }

    fn capacity_value(&self, l: &LockerAccount, quote: &PriceQuote) -> Ratio {
        let max = quote.collateral_value(l.collateral) / &self.params.collateralization_ratio;
        (max - quote.btc_value(l.locked_btc)).max(Ratio::zero())
    }

    /// Satoshi the locker may still accept while staying at the
    /// collateralization ratio.
    pub fn minting_capacity(&self, id: &AccountId, quote: &PriceQuote) -> Result<Sats, LockerError> {
        let l = self.active(id)?;
        Ok(quote.sats_for_value(&self.capacity_value(l, quote)))
    }

    /// Sum of capacity value over active lockers and total locked value.
    pub fn capacity_and_locked_value(&self, quote: &PriceQuote) -> (Ratio, Ratio) {
        let mut cap = Ratio::zero();
        let mut locked = Ratio::zero();
        for l in self.lockers.values() {
            if l.status == LockerStatus::Active {
                cap = cap + self.capacity_value(l, quote);
            }
            locked = locked + quote.btc_value(l.locked_btc);
        }
        (cap, locked)
    }

    pub fn add_locked(&mut self, id: &AccountId, sats: Sats) -> Result<(), LockerError> {
        self.active(id)?;
        self.account_mut(id).locked_btc += sats;
        Ok(())
    }

    pub fn sub_locked(&mut self, id: &AccountId, sats: Sats) -> Result<(), LockerError> {
        let l = self.lockers.get(id).ok_or(LockerError::NotRegistered)?;
        if sats > l.locked_btc {
            return Err(LockerError::ExceedsPosition);
        }
        self.account_mut(id).locked_btc -= sats;
        Ok(())
    }

    /// Caller burns `x_telebtc` and receives discounted collateral.
    pub fn liquidate(&mut self, id: &AccountId, x_telebtc: Sats, quote: &PriceQuote) -> Result<LiquidationOutcome, LockerError> {
        let l = self.active(id)?;
        if x_telebtc > l.locked_btc {
            return Err(LockerError::ExceedsPosition);
        }
        let cv = quote.collateral_value(l.collateral);
        let lv = quote.btc_value(l.locked_btc);
        let x = quote.btc_value(x_telebtc);
        liquidation_check(&cv, &lv, &x, &self.params)?;
        let out = quote
            .units_for_value(&(&x / &self.params.discount_ratio))
            .min(l.collateral);
        let pre_ratio = &cv / &lv;
        let l = self.account_mut(id);
        l.collateral -= out;
        l.locked_btc -= x_telebtc;
        let post_ratio = (l.locked_btc > 0)
            .then(|| quote.collateral_value(l.collateral) / quote.btc_value(l.locked_btc));
        self.collateral_out += out;
        Ok(LiquidationOutcome { collateral_out: out, pre_ratio, post_ratio })
    }

    fn take_collateral(&mut self, id: &AccountId, wanted: Units) -> SlashOutcome {
        let l = self.account_mut(id);
        let out = wanted.min(l.collateral);
        let exhausted = wanted >= l.collateral;
        l.collateral -= out;
        if exhausted {
            l.status = LockerStatus::FullySlashed;
        }
        self.collateral_out += out;
        SlashOutcome { collateral_out: out, exhausted }
    }

    /// The slasher burns `stolen` TeleBTC and receives collateral worth
    /// value(stolen)/DR, capped at what is left.
    pub fn slash_for_theft(
        &mut self,
        id: &AccountId,
        stolen: Sats,
        slasher_telebtc: Sats,
        quote: &PriceQuote,
    ) -> Result<SlashOutcome, LockerError> {
        let l = self.lockers.get(id).filter(|l| l.status != LockerStatus::Deregistered);
        let l = l.ok_or(LockerError::NotRegistered)?;
        if slasher_telebtc != stolen {
            return Err(LockerError::WrongTeleBtcAmount);
        }
        if stolen > l.locked_btc {
            return Err(LockerError::ExceedsPosition);
        }
        let wanted = quote.units_for_value(&(quote.btc_value(stolen) / &self.params.discount_ratio));
        self.account_mut(id).locked_btc -= stolen;
        Ok(self.take_collateral(id, wanted))
    }

    /// Compensates an unpaid unwrap with collateral worth burnt_value/DR.
    /// The request's satoshi left `locked_btc` when it was opened.
    pub fn slash_for_timeout(&mut self, id: &AccountId, burnt_value: &Ratio, quote: &PriceQuote) -> Result<SlashOutcome, LockerError> {
        let l = self.lockers.get(id).filter(|l| l.status != LockerStatus::Deregistered);
        l.ok_or(LockerError::NotRegistered)?;
        let wanted = quote.units_for_value(&(burnt_value / &self.params.discount_ratio));
        Ok(self.take_collateral(id, wanted))
    }

    pub fn record_payment_txid(&mut self, id: &AccountId, txid: Hash256) -> Result<(), LockerError> {
        let l = self.lockers.get_mut(id).ok_or(LockerError::NotRegistered)?;
        l.recorded_payment_txids.insert(txid);
        Ok(())
    }

    pub fn is_recorded_payment(&self, id: &AccountId, txid: &Hash256) -> bool {
        self.lockers.get(id).is_some_and(|l| l.recorded_payment_txids.contains(txid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{btc, tokens, COLLATERAL_UNIT};
    use proptest::prelude::*;

    fn id(s: &str) -> AccountId {
        AccountId::from_label(s)
    }

    fn addr(s: &str) -> BtcAddress {
        BtcAddress::from_label(s)
    }

    fn manager() -> LockersManager {
        LockersManager::new(EconParams::default()).unwrap()
    }

    fn q() -> PriceQuote {
        PriceQuote::unit(0)
    }

    #[test]
    fn param_bounds() {
        assert!(EconParams::default().validate().is_ok());
        let mut p = EconParams { discount_ratio: Ratio::new(5, 6), ..EconParams::default() };
        assert_eq!(p.validate(), Err(EconParamsError::DiscountRatio));
        p.discount_ratio = Ratio::one();
        assert!(p.validate().is_ok());
        p.liquidation_ratio = Ratio::new(3, 2);
        assert_eq!(p.validate(), Err(EconParamsError::LiquidationRatio));
    }

    #[test]
    fn register_and_capacity() {
        let mut m = manager();
        m.register(id("l"), addr("l"), tokens(150)).unwrap();
        assert_eq!(m.minting_capacity(&id("l"), &q()), Ok(btc(100)));
        assert_eq!(m.register(id("l"), addr("l2"), tokens(1)), Err(LockerError::AlreadyRegistered));
        assert_eq!(m.register(id("m"), addr("l"), tokens(1)), Err(LockerError::AddressInUse));
        assert_eq!(m.register(id("m"), addr("m"), 0), Err(LockerError::ZeroCollateral));
    }

    #[test]
    fn capacity_boundary_and_price_move() {
        let mut m = manager();
        m.register(id("l"), addr("l"), tokens(150)).unwrap();
        m.add_locked(&id("l"), btc(100)).unwrap();
        assert_eq!(m.minting_capacity(&id("l"), &q()), Ok(0));
        m.sub_locked(&id("l"), btc(50)).unwrap();
        assert_eq!(m.minting_capacity(&id("l"), &q()), Ok(btc(50)));
        // BTC doubles: max locked value 100 = 50 BTC, all of it used
        let doubled = PriceQuote::new(Ratio::from_integer(2), Ratio::one(), 0);
        assert_eq!(m.minting_capacity(&id("l"), &doubled), Ok(0));
        let up = PriceQuote::new(Ratio::new(3, 2), Ratio::one(), 0);
        // 100/1.5 = 66.67 BTC max; 50 locked; 16.67 BTC left, floored to sats
        assert_eq!(m.minting_capacity(&id("l"), &up), Ok(1_666_666_666));
    }

    #[test]
    fn deregister_paths() {
        let mut m = manager();
        m.register(id("l"), addr("l"), tokens(150)).unwrap();
        m.add_locked(&id("l"), 1).unwrap();
        assert_eq!(m.deregister(&id("l")), Err(LockerError::OutstandingLockedBtc(1)));
        m.sub_locked(&id("l"), 1).unwrap();
        assert_eq!(m.deregister(&id("l")), Ok(tokens(150)));
        assert_eq!(m.deregister(&id("l")), Err(LockerError::NotRegistered));
        // partially slashed, then out
        m.register(id("k"), addr("k"), tokens(100)).unwrap();
        m.add_locked(&id("k"), btc(10)).unwrap();
        let s = m.slash_for_theft(&id("k"), btc(10), btc(10), &q()).unwrap();
        assert_eq!(m.deregister(&id("k")), Ok(tokens(100) - s.collateral_out));
        let (cin, cout) = m.collateral_flows();
        assert_eq!(cin, cout);
    }

    #[test]
    fn withdrawal_health() {
        let mut m = manager();
        m.register(id("l"), addr("l"), tokens(150)).unwrap();
        m.add_locked(&id("l"), btc(50)).unwrap();
        // 70/50 = 1.4 < 1.5
        assert_eq!(m.adjust_collateral(&id("l"), -(tokens(80) as i128), &q()), Err(LockerError::WouldBreachHealth));
        assert_eq!(m.adjust_collateral(&id("l"), -(tokens(75) as i128), &q()), Ok(tokens(75)));
        assert_eq!(m.adjust_collateral(&id("l"), tokens(5) as i128, &q()), Ok(tokens(80)));
        m.sub_locked(&id("l"), btc(50)).unwrap();
        assert_eq!(m.adjust_collateral(&id("l"), -(tokens(80) as i128), &q()), Ok(0));
        assert_eq!(m.get(&id("l")).unwrap().status, LockerStatus::Deregistered);
    }

    #[test]
    fn liquidation_reference_example() {
        let mut m = manager();
        m.register(id("l"), addr("l"), tokens(110)).unwrap();
        m.add_locked(&id("l"), btc(100)).unwrap();
        let out = m.liquidate(&id("l"), btc(40), &q()).unwrap();
        // 40 / 0.95 = 800/19 tokens, floored to base units
        assert_eq!(out.collateral_out, 4_210_526_315);
        assert_eq!((Ratio::new(800, 19) * Ratio::from_integer(COLLATERAL_UNIT as i128)).floor_u128(), 4_210_526_315);
        let exact_post = (Ratio::from_integer(110) - Ratio::new(800, 19)) / Ratio::from_integer(60);
        assert_eq!(exact_post, Ratio::new(43, 38));
        let post = out.post_ratio.unwrap();
        assert!(post >= exact_post && post < Ratio::new(3, 2));
        assert!(post > out.pre_ratio);
        assert_eq!(m.get(&id("l")).unwrap().locked_btc, btc(60));
    }

    #[test]
    fn liquidation_rejections() {
        let p = EconParams::default();
        let r = |n: i128| Ratio::from_integer(n);
        // ratio 1.25 >= 1.2
        assert_eq!(liquidation_check(&r(125), &r(100), &r(1), &p), Err(LockerError::NotLiquidatable));
        // X = 90: (110 - 94.7)/10 > 1.5
        assert_eq!(liquidation_check(&r(110), &r(100), &r(90), &p), Err(LockerError::OverLiquidation));
        assert_eq!(liquidation_check(&r(110), &r(100), &r(101), &p), Err(LockerError::ExceedsPosition));
        assert_eq!(liquidation_check(&r(110), &r(100), &r(100), &p), Err(LockerError::OverLiquidation));
        assert!(liquidation_check(&r(110), &r(100), &r(40), &p).is_ok());
        let mut m = manager();
        m.register(id("l"), addr("l"), tokens(110)).unwrap();
        m.add_locked(&id("l"), btc(100)).unwrap();
        assert_eq!(m.liquidate(&id("l"), btc(101), &q()), Err(LockerError::ExceedsPosition));
    }

    #[test]
    fn theft_slash_amounts() {
        let mut m = manager();
        m.register(id("l"), addr("l"), tokens(100)).unwrap();
        m.add_locked(&id("l"), btc(100)).unwrap();
        assert_eq!(m.slash_for_theft(&id("l"), btc(10), btc(9), &q()), Err(LockerError::WrongTeleBtcAmount));
        let s = m.slash_for_theft(&id("l"), btc(10), btc(10), &q()).unwrap();
        // 10 / 0.95 = 10.526315789...
        assert_eq!(s.collateral_out, 1_052_631_578);
        assert!(!s.exhausted);
        assert_eq!(m.get(&id("l")).unwrap().locked_btc, btc(90));
        let s = m.slash_for_theft(&id("l"), btc(90), btc(90), &q()).unwrap();
        assert!(s.exhausted);
        assert_eq!(s.collateral_out, tokens(100) - 1_052_631_578);
        assert_eq!(m.get(&id("l")).unwrap().status, LockerStatus::FullySlashed);
    }

    #[test]
    fn timeout_slash_amounts() {
        let mut m = manager();
        m.register(id("l"), addr("l"), tokens(150)).unwrap();
        let s = m.slash_for_timeout(&id("l"), &"99.7".parse().unwrap(), &q()).unwrap();
        // 99.7 / 0.95 = 104.947368421...
        assert_eq!(s.collateral_out, 10_494_736_842);
        assert!(s.collateral_out >= tokens(99) + 70_000_000);
        let s2 = m.slash_for_timeout(&id("l"), &"99.7".parse().unwrap(), &q()).unwrap();
        assert!(s2.exhausted);
        assert_eq!(s2.collateral_out, tokens(150) - 10_494_736_842);
        assert_eq!(m.get(&id("l")).unwrap().collateral, 0);

        let p = EconParams { discount_ratio: Ratio::one(), ..EconParams::default() };
        let mut m = LockersManager::new(p).unwrap();
        m.register(id("l"), addr("l"), tokens(150)).unwrap();
        let s = m.slash_for_timeout(&id("l"), &"99.7".parse().unwrap(), &q()).unwrap();
        assert_eq!(s.collateral_out, 9_970_000_000);
    }

    #[test]
    fn recorded_payments() {
        let mut m = manager();
        m.register(id("l"), addr("l"), tokens(1)).unwrap();
        m.record_payment_txid(&id("l"), Hash256([1; 32])).unwrap();
        m.record_payment_txid(&id("l"), Hash256([1; 32])).unwrap();
        m.record_payment_txid(&id("l"), Hash256([2; 32])).unwrap();
        assert_eq!(m.get(&id("l")).unwrap().recorded_payment_txids.len(), 2);
        assert!(m.is_recorded_payment(&id("l"), &Hash256([2; 32])));
    }

    #[test]
    fn restored_locker_is_not_liquidatable_again() {
        // after a liquidation lifts the ratio back over LR, a second call fails
        let mut m = manager();
        m.register(id("l"), addr("l"), tokens(110)).unwrap();
        m.add_locked(&id("l"), btc(100)).unwrap();
        m.liquidate(&id("l"), btc(60), &q()).unwrap();
        // (110 - 63.16)/40 = 1.171 < 1.2: still liquidatable, try to push further
        let post = m.health_ratio(&id("l"), &q()).unwrap();
        assert!(post < Ratio::new(6, 5));
        m.adjust_collateral(&id("l"), tokens(10) as i128, &q()).unwrap();
        assert_eq!(m.liquidate(&id("l"), btc(1), &q()), Err(LockerError::NotLiquidatable));
    }

    proptest! {
        #[test]
        fn accepted_liquidation_improves_health(
            cv in 1u64..1_000_000, lv in 1u64..1_000_000, x in 1u64..1_000_000,
        ) {
            let p = EconParams::default();
            let (cv, lv, x) = (Ratio::from_integer(cv as i128), Ratio::from_integer(lv as i128), Ratio::from_integer(x as i128));
            if liquidation_check(&cv, &lv, &x, &p).is_ok() && p.discount_ratio > &lv / &cv {
                let post = (&cv - &(&x / &p.discount_ratio)) / (&lv - &x);
                prop_assert!(post > &cv / &lv);
            }
        }

        #[test]
        fn theft_slash_exceeds_stolen_when_healthy(stolen in 1u64..btc(50), extra in 1u64..tokens(100) as u64) {
            let mut m = manager();
            let coll = stolen as u128 + extra as u128;
            m.register(id("l"), addr("l"), coll).unwrap();
            m.add_locked(&id("l"), stolen).unwrap();
            let s = m.slash_for_theft(&id("l"), stolen, stolen, &q()).unwrap();
            prop_assert!(s.collateral_out > stolen as u128);
        }
    }
}
