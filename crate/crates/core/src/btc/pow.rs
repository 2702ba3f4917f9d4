//! Proof-of-work targets: compact `bits` encoding, work, and difficulty
//! retargeting.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::hash::Hash256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CompactError {
    #[error("compact target {0:#010x} has its sign bit set")]
    NegativeTarget(u32),
    #[error("compact target {0:#010x} exceeds 2^256 - 1")]
    Overflow(u32),
}

/// A 256-bit proof-of-work target.
///
/// A header hash meets the target when the hash, interpreted as a
/// little-endian integer over its internal byte order (equivalently, the
/// reversed-hex display form read as a big-endian number), is at most the
/// target.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Target256(BigUint);

impl Target256 {
    pub fn max_value() -> Self {
        Target256((BigUint::one() << 256u32) - BigUint::one())
    }

    /// Panics if `value` exceeds 2^256 - 1.
    pub fn new(value: BigUint) -> Self {
        assert!(value.bits() <= 256, "target exceeds 256 bits");
        Target256(value)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    /// Decodes Bitcoin's compact representation: a one-byte base-256
    /// exponent followed by a 23-bit mantissa and a sign bit.
    pub fn from_bits(bits: u32) -> Result<Self, CompactError> {
        let exponent = bits >> 24;
        let mantissa = bits & 0x007f_ffff;
        if mantissa != 0 && bits & 0x0080_0000 != 0 {
            return Err(CompactError::NegativeTarget(bits));
        }
        let value = if exponent <= 3 {
            BigUint::from(mantissa >> (8 * (3 - exponent)))
        } else {
            BigUint::from(mantissa) << (8 * (exponent - 3))
        };
        if value.bits() > 256 {
            return Err(CompactError::Overflow(bits));
        }
        Ok(Target256(value))
    }

    /// Canonical compact encoding (lossy: keeps the top three significant bytes).
    pub fn to_bits(&self) -> u32 {
        let mut size = self.0.bits().div_ceil(8) as u32;
        let mut compact: u32 = if size <= 3 {
            (self.0.to_u64().unwrap_or(0) << (8 * (3 - size))) as u32
        } else {
            (&self.0 >> (8 * (size - 3))).to_u32().unwrap_or(0)
        };
        if compact & 0x0080_0000 != 0 {
            compact >>= 8;
            size += 1;
        }
        compact | (size << 24)
    }

    /// The target after a round trip through the compact encoding.
    pub fn normalized(&self) -> Self {
        Target256::from_bits(self.to_bits()).expect("canonical encoding always decodes")
    }

    /// True iff `hash` as a little-endian integer is at most this target.
    pub fn is_met_by(&self, hash: &Hash256) -> bool {
        BigUint::from_bytes_le(&hash.0) <= self.0
    }

    /// Expected number of hashes to meet this target: floor(2^256 / (target + 1)).
    pub fn work(&self) -> BigUint {
        (BigUint::one() << 256u32) / (&self.0 + BigUint::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl fmt::Debug for Target256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Target256({:#x})", self.0)
    }
}

pub fn bits_to_target(bits: u32) -> Result<Target256, CompactError> {
    Target256::from_bits(bits)
}

/// Difficulty retarget: scales `old_target` by the observed epoch timespan
/// over the expected one, with the timespan clamped to a factor of four
/// either way. The result is capped at 2^256 - 1.
pub fn retarget(
    old_target: &Target256,
    first_timestamp: u32,
    last_timestamp: u32,
    epoch_len: u64,
    block_interval: u64,
) -> Target256 {
    let expected = (epoch_len * block_interval) as i64;
    let actual = (last_timestamp as i64 - first_timestamp as i64).clamp(expected / 4, expected * 4);
    let scaled = old_target.value() * BigUint::from(actual as u64) / BigUint::from(expected as u64);
    Target256(scaled.min(Target256::max_value().0))
}

/// Epoch length, spacing and easiest-allowed target for one chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetargetRule {
    pub epoch_len: u64,
    pub block_interval: u64,
    pub pow_limit: Target256,
}

impl RetargetRule {
    pub fn mainnet() -> Self {
        RetargetRule {
            epoch_len: 2016,
            block_interval: 600,
            pow_limit: Target256::from_bits(0x1d00_ffff).expect("static bits"),
        }
    }

    pub fn is_boundary(&self, height: u64) -> bool {
        height.is_multiple_of(self.epoch_len)
    }

    pub fn epoch_of(&self, height: u64) -> u64 {
        height / self.epoch_len
    }

    /// Target for the epoch following one that ran from `first` to `last`,
    /// rounded through the compact encoding the way headers carry it.
    pub fn next_target(&self, old: &Target256, first: u32, last: u32) -> Target256 {
        let t = retarget(old, first, last, self.epoch_len, self.block_interval);
        t.min(self.pow_limit.clone()).normalized()
    }
}
