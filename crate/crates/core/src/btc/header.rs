use serde::{Deserialize, Serialize};

use super::hash::{sha256d, Hash256};
use super::pow::{CompactError, Target256};

/// Serialized header size.
pub const HEADER_LEN: usize = 80;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HeaderError {
    #[error("header must be exactly 80 bytes, got {0}")]
    WrongLength(usize),
    #[error("header file length {0} is not a multiple of 80")]
    TruncatedFile(usize),
}

/// The 80-byte Bitcoin consensus block header.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BlockHeader {
    pub version: i32,
    pub parent_hash: Hash256,
    pub merkle_root: Hash256,
    pub timestamp: u32,
    pub bits: u32,
    pub nonce: u32,
}

impl BlockHeader {
    /// Consensus serialization: every integer little-endian, hashes in
    /// internal byte order.
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&self.version.to_le_bytes());
        out[4..36].copy_from_slice(&self.parent_hash.0);
        out[36..68].copy_from_slice(&self.merkle_root.0);
        out[68..72].copy_from_slice(&self.timestamp.to_le_bytes());
        out[72..76].copy_from_slice(&self.bits.to_le_bytes());
        out[76..80].copy_from_slice(&self.nonce.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, HeaderError> {
        let b: &[u8; HEADER_LEN] = bytes
            .try_into()
            .map_err(|_| HeaderError::WrongLength(bytes.len()))?;
        let u32_at = |i: usize| u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]]);
        let hash_at = |i: usize| {
            let mut h = [0u8; 32];
            h.copy_from_slice(&b[i..i + 32]);
            Hash256(h)
        };
        Ok(BlockHeader {
            version: u32_at(0) as i32,
            parent_hash: hash_at(4),
            merkle_root: hash_at(36),
            timestamp: u32_at(68),
            bits: u32_at(72),
            nonce: u32_at(76),
        })
    }

    pub fn hash(&self) -> Hash256 {
        sha256d(&self.encode())
    }

    pub fn target(&self) -> Result<Target256, CompactError> {
        Target256::from_bits(self.bits)
    }

    /// True iff the header hash, read as a little-endian 256-bit integer,
    /// is at most the target encoded in `bits`.
    pub fn meets_pow(&self) -> Result<bool, CompactError> {
        Ok(self.target()?.is_met_by(&self.hash()))
    }

    /// The mainnet genesis header.
    pub fn genesis_mainnet() -> Self {
        BlockHeader {
            version: 1,
            parent_hash: Hash256::ZERO,
            merkle_root: Hash256::from_hex(
                "4a5e1e4baab89f3a32518a88c31bc87f618f76673e2cc77ab2127b7afdeda33b",
            )
            .expect("static hex"),
            timestamp: 1_231_006_505,
            bits: 0x1d00_ffff,
            nonce: 2_083_236_893,
        }
    }
}

pub fn encode_header(h: &BlockHeader) -> [u8; HEADER_LEN] {
    h.encode()
}

pub fn decode_header(bytes: &[u8]) -> Result<BlockHeader, HeaderError> {
    BlockHeader::decode(bytes)
}

pub fn header_hash(h: &BlockHeader) -> Hash256 {
    h.hash()
}

pub fn meets_pow(h: &BlockHeader) -> Result<bool, CompactError> {
    h.meets_pow()
}

/// Parses a raw header dump: concatenated 80-byte headers, no delimiters.
pub fn read_header_file(bytes: &[u8]) -> Result<Vec<BlockHeader>, HeaderError> {
    if !bytes.len().is_multiple_of(HEADER_LEN) {
        return Err(HeaderError::TruncatedFile(bytes.len()));
    }
    bytes.chunks_exact(HEADER_LEN).map(BlockHeader::decode).collect()
}

pub fn write_header_file<'a>(headers: impl IntoIterator<Item = &'a BlockHeader>) -> Vec<u8> {
    headers.into_iter().flat_map(|h| h.encode()).collect()
}
