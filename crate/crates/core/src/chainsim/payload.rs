//! Request payloads carried in simulated transactions.
//!
//! Layout: `version (0x01) || tag || body`.
//! * tag `0x01` lock request: `target_receiver (20) || teleporter_fee_bps (u16 BE)`
//! * tag `0x02` unlock payment: `request_id (32)`

use crate::btc::Hash256;
use crate::ids::AccountId;

pub const PAYLOAD_VERSION: u8 = 0x01;
pub const TAG_LOCK: u8 = 0x01;
pub const TAG_UNLOCK: u8 = 0x02;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RequestPayload {
    Lock { target_receiver: AccountId, teleporter_fee_bps: u16 },
    UnlockPayment { request_id: Hash256 },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PayloadError {
    #[error("payload is empty")]
    Empty,
    #[error("unsupported payload version {0:#04x}")]
    Version(u8),
    #[error("unknown payload tag {0:#04x}")]
    Tag(u8),
    #[error("payload body has length {got}, expected {expected}")]
    Length { got: usize, expected: usize },
}

impl RequestPayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![PAYLOAD_VERSION];
        match self {
            RequestPayload::Lock { target_receiver, teleporter_fee_bps } => {
                out.push(TAG_LOCK);
                out.extend_from_slice(target_receiver.as_bytes());
                out.extend_from_slice(&teleporter_fee_bps.to_be_bytes());
            }
            RequestPayload::UnlockPayment { request_id } => {
                out.push(TAG_UNLOCK);
                out.extend_from_slice(request_id.as_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PayloadError> {
        let (&version, rest) = bytes.split_first().ok_or(PayloadError::Empty)?;
        if version != PAYLOAD_VERSION {
            return Err(PayloadError::Version(version));
        }
        let (&tag, body) = rest.split_first().ok_or(PayloadError::Empty)?;
        match tag {
            TAG_LOCK => {
                if body.len() != 22 {
                    return Err(PayloadError::Length { got: body.len(), expected: 22 });
                }
                let mut recv = [0u8; 20];
                recv.copy_from_slice(&body[..20]);
                Ok(RequestPayload::Lock {
                    target_receiver: AccountId(recv),
                    teleporter_fee_bps: u16::from_be_bytes([body[20], body[21]]),
                })
            }
            TAG_UNLOCK => {
                if body.len() != 32 {
                    return Err(PayloadError::Length { got: body.len(), expected: 32 });
                }
                let mut id = [0u8; 32];
                id.copy_from_slice(body);
                Ok(RequestPayload::UnlockPayment { request_id: Hash256(id) })
            }
            other => Err(PayloadError::Tag(other)),
        }
    }
}
