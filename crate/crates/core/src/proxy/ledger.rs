use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ids::AccountId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("balance {have} is below {need}")]
pub struct Shortfall {
    pub have: u128,
    pub need: u128,
}

/// Fungible balances. TeleBTC uses it with a mutable supply; the collateral
/// token uses it with a fixed one.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    balances: BTreeMap<AccountId, u128>,
    total_supply: u128,
}

impl TokenLedger {
    pub fn balance(&self, who: &AccountId) -> u128 {
        self.balances.get(who).copied().unwrap_or(0)
    }

    pub fn total_supply(&self) -> u128 {
        self.total_supply
    }

    pub fn balances(&self) -> &BTreeMap<AccountId, u128> {
        &self.balances
    }

    pub fn mint(&mut self, to: &AccountId, amount: u128) {
        if amount == 0 {
            return;
        }
        *self.balances.entry(*to).or_default() += amount;
        self.total_supply += amount;
    }

    pub fn burn(&mut self, from: &AccountId, amount: u128) -> Result<(), Shortfall> {
        self.debit(from, amount)?;
        self.total_supply -= amount;
        Ok(())
    }

    pub fn transfer(&mut self, from: &AccountId, to: &AccountId, amount: u128) -> Result<(), Shortfall> {
        self.debit(from, amount)?;
        if amount > 0 {
            *self.balances.entry(*to).or_default() += amount;
        }
        Ok(())
    }

    /// Removes `amount` from circulation into a contract's custody.
    pub fn debit(&mut self, from: &AccountId, amount: u128) -> Result<(), Shortfall> {
        let have = self.balance(from);
        if have < amount {
            return Err(Shortfall { have, need: amount });
        }
        if amount > 0 {
            let b = self.balances.get_mut(from).expect("nonzero balance");
            *b -= amount;
            if *b == 0 {
                self.balances.remove(from);
            }
        }
        Ok(())
    }

    /// Returns custody to an account.
    pub fn credit(&mut self, to: &AccountId, amount: u128) {
        if amount > 0 {
            *self.balances.entry(*to).or_default() += amount;
        }
    }

    pub fn sum_balances(&self) -> u128 {
        self.balances.values().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supply_tracks_mint_and_burn() {
        let a = AccountId::from_label("a");
        let b = AccountId::from_label("b");
        let mut l = TokenLedger::default();
        l.mint(&a, 100);
        l.transfer(&a, &b, 40).unwrap();
        l.burn(&b, 10).unwrap();
        assert_eq!(l.total_supply(), 90);
        assert_eq!(l.sum_balances(), 90);
        assert_eq!(l.burn(&b, 31), Err(Shortfall { have: 30, need: 31 }));
        assert_eq!(l.balance(&a), 60);
    }
}
