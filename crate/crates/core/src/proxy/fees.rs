use serde::{Deserialize, Serialize};

use crate::value::{Ratio, BPS_DENOM};

/// Piecewise-linear fee curves over r = free capacity value / locked value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeeParams {
    pub mint_fee_base: u32,
    pub mint_fee_max: u32,
    pub burn_fee_max: u32,
    pub r0: Ratio,
}

impl Default for FeeParams {
    fn default() -> Self {
        FeeParams { mint_fee_base: 10, mint_fee_max: 100, burn_fee_max: 30, r0: Ratio::one() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeeParamsError {
    #[error("mint fee base exceeds mint fee max")]
    BaseAboveMax,
    #[error("fee above 10000 bps")]
    OutOfRange,
    #[error("knee ratio must be positive")]
    Knee,
}

impl FeeParams {
    pub fn validate(&self) -> Result<(), FeeParamsError> {
        if self.mint_fee_base > self.mint_fee_max {
            return Err(FeeParamsError::BaseAboveMax);
        }
        if [self.mint_fee_max, self.burn_fee_max].iter().any(|&f| f as u64 > BPS_DENOM) {
            return Err(FeeParamsError::OutOfRange);
        }
        if !self.r0.is_positive() {
            return Err(FeeParamsError::Knee);
        }
        Ok(())
    }

    /// r / r0 clamped to [0, 1]; `None` (nothing locked) counts as saturated.
    fn level(&self, r: Option<&Ratio>) -> Ratio {
        match r {
            None => Ratio::one(),
            Some(r) => (r / &self.r0).min(Ratio::one()).max(Ratio::zero()),
        }
    }

    /// Rises toward `mint_fee_max` as free capacity runs out.
    pub fn minting_fee_bps(&self, r: Option<&Ratio>) -> u32 {
        let span = Ratio::from_integer((self.mint_fee_max - self.mint_fee_base) as i128);
        let extra = span * (Ratio::one() - self.level(r));
        self.mint_fee_base + extra.round_u64() as u32
    }

    /// Proportional to r up to the knee.
    pub fn burning_fee_bps(&self, r: Option<&Ratio>) -> u32 {
        (Ratio::from_integer(self.burn_fee_max as i128) * self.level(r)).round_u64() as u32
    }
}
