//! Identifiers on both chains: 20-byte Bitcoin addresses and 20-byte
//! target-chain accounts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

macro_rules! id20 {
    ($name:ident, $domain:literal) => {
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub [u8; 20]);

        impl $name {
            /// Deterministic identifier derived from a human-readable label.
            pub fn from_label(label: &str) -> Self {
                let digest = Sha256::new()
                    .chain_update($domain.as_bytes())
                    .chain_update(label.as_bytes())
                    .finalize();
                let mut out = [0u8; 20];
                out.copy_from_slice(&digest[..20]);
                $name(out)
            }

            pub fn as_bytes(&self) -> &[u8; 20] {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&hex::encode(self.0))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), &hex::encode(self.0)[..8])
            }
        }

        impl FromStr for $name {
            type Err = hex::FromHexError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let mut out = [0u8; 20];
                hex::decode_to_slice(s, &mut out)?;
                Ok($name(out))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_string())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

id20!(BtcAddress, "btc-address:");
id20!(AccountId, "account:");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_domain_separated() {
        assert_ne!(BtcAddress::from_label("alice").0, AccountId::from_label("alice").0);
        assert_eq!(AccountId::from_label("alice"), AccountId::from_label("alice"));
    }

    #[test]
    fn hex_round_trip() {
        let a = BtcAddress::from_label("locker-1");
        assert_eq!(a.to_string().parse::<BtcAddress>().unwrap(), a);
        assert!("abcd".parse::<AccountId>().is_err());
    }
}
