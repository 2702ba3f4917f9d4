//! Bitcoin header codec, proof-of-work arithmetic and Merkle proofs.
//!
//! Everything here is a pure function over byte strings and big integers,
//! usable on real mainnet headers as well as the simulated chain.

mod hash;
mod header;
mod merkle;
mod pow;

pub use hash::{hash_pair, sha256d, Hash256};
pub use header::{
    decode_header, encode_header, header_hash, meets_pow, read_header_file, write_header_file,
    BlockHeader, HeaderError, HEADER_LEN,
};
pub use merkle::{merkle_branch, merkle_root, verify_merkle_branch, MerkleError, MerkleProof};
pub use pow::{bits_to_target, retarget, CompactError, RetargetRule, Target256};
