//! Exact value arithmetic shared by the Locker and proxy contracts.
//!
//! BTC amounts are integer satoshi, collateral amounts are integer base units
//! (`COLLATERAL_UNIT` base units per whole collateral token), and prices are
//! exact rationals. Conversions back to integers always floor, which keeps
//! rounding dust inside the protocol.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Satoshi per BTC.
pub const SATS_PER_BTC: u64 = 100_000_000;

/// Base units per whole collateral token.
pub const COLLATERAL_UNIT: u128 = 100_000_000;

/// Basis-point denominator.
pub const BPS_DENOM: u64 = 10_000;

pub type Sats = u64;

/// Collateral token amount in base units.
pub type Units = u128;

/// An exact non-negative rational used for prices, ratios and values.
///
/// Serialized as a decimal string when the denominator allows it
/// (`"1.5"`), otherwise as `"num/den"`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ratio(pub BigRational);

impl Ratio {
    pub fn zero() -> Self {
        Ratio(BigRational::zero())
    }

    pub fn one() -> Self {
        Ratio(BigRational::one())
    }

    pub fn from_integer(n: i128) -> Self {
        Ratio(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn new(num: i128, den: i128) -> Self {
        Ratio(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn recip(&self) -> Self {
        Ratio(self.0.recip())
    }

    /// Largest integer not above the value, clamped at zero.
    pub fn floor_u128(&self) -> u128 {
        if self.0.is_negative() {
            return 0;
        }
        self.0.numer().div_floor(self.0.denom()).to_u128().unwrap_or(u128::MAX)
    }

    pub fn floor_u64(&self) -> u64 {
        self.floor_u128().min(u64::MAX as u128) as u64
    }

    /// Nearest integer, halves rounded up.
    pub fn round_u64(&self) -> u64 {
        let half = Ratio::new(1, 2);
        (self.clone() + half).floor_u64()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn min(self, other: Ratio) -> Ratio {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Ratio) -> Ratio {
        if self >= other {
            self
        } else {
            other
        }
    }
}

macro_rules! ratio_binop {
    ($tr:ident, $method:ident) => {
        impl std::ops::$tr for Ratio {
            type Output = Ratio;
            fn $method(self, rhs: Ratio) -> Ratio {
                Ratio(std::ops::$tr::$method(self.0, rhs.0))
            }
        }
        impl<'a> std::ops::$tr<&'a Ratio> for &'a Ratio {
            type Output = Ratio;
            fn $method(self, rhs: &'a Ratio) -> Ratio {
                Ratio(std::ops::$tr::$method(&self.0, &rhs.0))
            }
        }
        impl<'a> std::ops::$tr<&'a Ratio> for Ratio {
            type Output = Ratio;
            fn $method(self, rhs: &'a Ratio) -> Ratio {
                Ratio(std::ops::$tr::$method(self.0, &rhs.0))
            }
        }
    };
}

ratio_binop!(Add, add);
ratio_binop!(Sub, sub);
ratio_binop!(Mul, mul);
ratio_binop!(Div, div);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid decimal or fraction: {0:?}")]
pub struct ParseRatioError(pub String);

impl FromStr for Ratio {
    type Err = ParseRatioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRatioError(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| err())?;
            let d: BigInt = d.trim().parse().map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            return Ok(Ratio(BigRational::new(n, d)));
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
        {
            return Err(err());
        }
        let digits = format!("{int_part}{frac_part}");
        let numer: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits.parse().map_err(|_| err())?
        };
        let denom = num_traits::pow(BigInt::from(10), frac_part.len());
        let r = BigRational::new(numer, denom);
        Ok(Ratio(if neg { -r } else { r }))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Terminating decimals print exactly; everything else as a fraction.
        let mut den = self.0.denom().clone();
        let mut scale = 0usize;
        for p in [2u32, 5] {
            while (&den % p).is_zero() {
                den /= p;
            }
        }
        if den.is_one() {
            let mut scaled = self.0.clone();
            while !scaled.is_integer() {
                scaled *= BigRational::from_integer(BigInt::from(10));
                scale += 1;
            }
            let n = scaled.to_integer();
            let neg = n.is_negative();
            let digits = n.abs().to_string();
            let digits = if digits.len() <= scale {
                format!("{}{}", "0".repeat(scale + 1 - digits.len()), digits)
            } else {
                digits
            };
            let (i, frac) = digits.split_at(digits.len() - scale);
            let sign = if neg { "-" } else { "" };
            if frac.is_empty() {
                write!(f, "{sign}{i}")
            } else {
                write!(f, "{sign}{i}.{frac}")
            }
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
            Float(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Int(i) => Ok(Ratio::from_integer(i as i128)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
            // Floats go through their shortest decimal form, so 1.6 means 16/10.
            Raw::Float(x) => x.to_string().parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Oracle prices, both in value units.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceQuote {
    /// Value units per whole BTC.
    pub btc_price: Ratio,
    /// Value units per whole collateral token.
    pub collateral_price: Ratio,
    /// Sim time of the quote.
    pub timestamp: u64,
}

impl PriceQuote {
    pub fn new(btc_price: Ratio, collateral_price: Ratio, timestamp: u64) -> Self {
        assert!(btc_price.is_positive() && collateral_price.is_positive(), "prices must be positive");
        PriceQuote { btc_price, collateral_price, timestamp }
    }

    /// Both prices equal to one value unit.
    pub fn unit(timestamp: u64) -> Self {
        PriceQuote::new(Ratio::one(), Ratio::one(), timestamp)
    }

    pub fn btc_value(&self, sats: Sats) -> Ratio {
        Ratio::new(sats as i128, SATS_PER_BTC as i128) * self.btc_price.clone()
    }

    pub fn collateral_value(&self, units: Units) -> Ratio {
        Ratio(BigRational::new(BigInt::from(units), BigInt::from(COLLATERAL_UNIT)))
            * self.collateral_price.clone()
    }

    /// Collateral base units worth `value`, floored.
    pub fn units_for_value(&self, value: &Ratio) -> Units {
        (value / &self.collateral_price * Ratio::from_integer(COLLATERAL_UNIT as i128)).floor_u128()
    }

    /// Satoshi worth `value`, floored.
    pub fn sats_for_value(&self, value: &Ratio) -> Sats {
        (value / &self.btc_price * Ratio::from_integer(SATS_PER_BTC as i128)).floor_u64()
    }
}

/// `amount * bps / 10000`, floored.
pub fn bps_of(amount: Sats, bps: u64) -> Sats {
    ((amount as u128 * bps as u128) / BPS_DENOM as u128) as Sats
}

/// Whole collateral tokens to base units.
pub fn tokens(n: u64) -> Units {
    n as u128 * COLLATERAL_UNIT
}

/// Whole BTC to satoshi.
pub fn btc(n: u64) -> Sats {
    n * SATS_PER_BTC
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_and_fractions() {
        assert_eq!("1.5".parse::<Ratio>().unwrap(), Ratio::new(3, 2));
        assert_eq!("0.95".parse::<Ratio>().unwrap(), Ratio::new(19, 20));
        assert_eq!("-2".parse::<Ratio>().unwrap(), Ratio::from_integer(-2));
        assert_eq!("800/19".parse::<Ratio>().unwrap(), Ratio::new(800, 19));
        assert_eq!(".5".parse::<Ratio>().unwrap(), Ratio::new(1, 2));
        assert!("1.2.3".parse::<Ratio>().is_err());
        assert!("1/0".parse::<Ratio>().is_err());
        assert!("".parse::<Ratio>().is_err());
    }

    #[test]
    fn display_is_exact() {
        assert_eq!(Ratio::new(3, 2).to_string(), "1.5");
        assert_eq!(Ratio::new(1, 200).to_string(), "0.005");
        assert_eq!(Ratio::new(-1, 4).to_string(), "-0.25");
        assert_eq!(Ratio::new(800, 19).to_string(), "800/19");
        assert_eq!(Ratio::from_integer(42).to_string(), "42");
    }

    #[test]
    fn json_accepts_numbers_and_strings() {
        let r: Ratio = serde_json::from_str("1.6").unwrap();
        assert_eq!(r, Ratio::new(8, 5));
        let r: Ratio = serde_json::from_str("\"0.95\"").unwrap();
        assert_eq!(r, Ratio::new(19, 20));
        let r: Ratio = serde_json::from_str("3").unwrap();
        assert_eq!(r, Ratio::from_integer(3));
        assert_eq!(serde_json::to_string(&Ratio::new(19, 20)).unwrap(), "\"0.95\"");
    }

    #[test]
    fn floor_and_round() {
        assert_eq!(Ratio::new(800, 19).floor_u128(), 42);
        assert_eq!(Ratio::new(-1, 2).floor_u128(), 0);
        assert_eq!(Ratio::new(5, 2).round_u64(), 3);
        assert_eq!(Ratio::new(549, 10).round_u64(), 55);
    }

    #[test]
    fn quote_conversions_floor() {
        let q = PriceQuote::unit(0);
        assert_eq!(q.btc_value(btc(2)), Ratio::from_integer(2));
        assert_eq!(q.units_for_value(&Ratio::new(800, 19)), 4_210_526_315);
        assert_eq!(q.sats_for_value(&Ratio::new(1, 3)), 33_333_333);
        assert_eq!(bps_of(100_000_000, 50), 500_000);
    }
}
