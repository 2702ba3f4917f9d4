//! Bitcoin transaction Merkle trees.
//!
//! Levels with an odd node count duplicate their last node. Duplicate
//! adjacent leaves are not detected here; callers rely on txid uniqueness.

use serde::{Deserialize, Serialize};

use super::hash::{hash_pair, Hash256};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MerkleError {
    #[error("merkle tree needs at least one leaf")]
    EmptyLeaves,
    #[error("leaf index {index} out of range for {len} leaves")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Inclusion proof for one leaf: the sibling at each level, bottom up.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MerkleProof {
    pub leaf: Hash256,
    pub index: u64,
    pub siblings: Vec<Hash256>,
}

fn next_level(level: &[Hash256]) -> Vec<Hash256> {
    level
        .chunks(2)
        .map(|pair| match pair {
            [l, r] => hash_pair(l, r),
            [l] => hash_pair(l, l),
            _ => unreachable!(),
        })
        .collect()
}

pub fn merkle_root(leaves: &[Hash256]) -> Result<Hash256, MerkleError> {
    if leaves.is_empty() {
        return Err(MerkleError::EmptyLeaves);
    }
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = next_level(&level);
    }
    Ok(level[0])
}

pub fn merkle_branch(leaves: &[Hash256], index: usize) -> Result<MerkleProof, MerkleError> {
    if index >= leaves.len() {
        return Err(MerkleError::IndexOutOfRange { index, len: leaves.len() });
    }
    let mut siblings = Vec::new();
    let mut level = leaves.to_vec();
    let mut pos = index;
    while level.len() > 1 {
        let sib = if pos.is_multiple_of(2) {
            *level.get(pos + 1).unwrap_or(&level[pos])
        } else {
            level[pos - 1]
        };
        siblings.push(sib);
        level = next_level(&level);
        pos /= 2;
    }
    Ok(MerkleProof { leaf: leaves[index], index: index as u64, siblings })
}

impl MerkleProof {
    /// Folds the leaf up through the siblings; the index bit at each level
    /// says whether the running hash is the right child.
    pub fn compute_root(&self) -> Option<Hash256> {
        if self.siblings.len() < 64 && self.index >> self.siblings.len() != 0 {
            return None;
        }
        let mut acc = self.leaf;
        let mut idx = self.index;
        for sib in &self.siblings {
            acc = if idx & 1 == 0 { hash_pair(&acc, sib) } else { hash_pair(sib, &acc) };
            idx >>= 1;
        }
        Some(acc)
    }
}

pub fn verify_merkle_branch(proof: &MerkleProof, root: &Hash256) -> bool {
    proof.compute_root().as_ref() == Some(root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btc::hash::sha256d;

    fn raw(hex_str: &str) -> Hash256 {
        let mut b = [0u8; 32];
        hex::decode_to_slice(hex_str, &mut b).unwrap();
        Hash256(b)
    }

    fn leaf(tag: &str) -> Hash256 {
        sha256d(tag.as_bytes())
    }

    #[test]
    fn single_and_pair() {
        let a = leaf("a");
        let b = leaf("b");
        assert_eq!(merkle_root(&[a]).unwrap(), a);
        assert_eq!(merkle_root(&[a, b]).unwrap(), hash_pair(&a, &b));
        assert_eq!(merkle_root(&[]), Err(MerkleError::EmptyLeaves));
    }

    #[test]
    fn three_leaves_match_python_oracle() {
        // Root over [H(a||b), H(c||c)] computed with hashlib.
        let (a, b, c) = (leaf("a"), leaf("b"), leaf("c"));
        assert_eq!(a, raw("bf5d3affb73efd2ec6c36ad3112dd933efed63c4e1cbffcfa88e2759c144f2d8"));
        assert_eq!(
            merkle_root(&[a, b, c]).unwrap(),
            raw("74449b8328cb6e97d305adb2fca5e90993fdf9c667fa40cb625f40508da40cbf")
        );
    }

    #[test]
    fn branch_shapes() {
        let a = leaf("a");
        let b = leaf("b");
        let p = merkle_branch(&[a], 0).unwrap();
        assert!(p.siblings.is_empty());
        assert!(verify_merkle_branch(&p, &a));
        let p = merkle_branch(&[a, b], 0).unwrap();
        assert_eq!(p.siblings, vec![b]);
        assert_eq!(
            merkle_branch(&[a, b], 2),
            Err(MerkleError::IndexOutOfRange { index: 2, len: 2 })
        );
    }

    #[test]
    fn odd_last_leaf_is_its_own_sibling() {
        let leaves: Vec<_> = ["a", "b", "c"].iter().map(|s| leaf(s)).collect();
        let p = merkle_branch(&leaves, 2).unwrap();
        assert_eq!(p.siblings[0], leaves[2]);
        assert!(verify_merkle_branch(&p, &merkle_root(&leaves).unwrap()));
    }

    #[test]
    fn index_beyond_depth_is_rejected() {
        let leaves: Vec<_> = ["a", "b"].iter().map(|s| leaf(s)).collect();
        let mut p = merkle_branch(&leaves, 1).unwrap();
        p.index = 3;
        assert!(!verify_merkle_branch(&p, &merkle_root(&leaves).unwrap()));
    }

    #[test]
    fn flipped_sibling_bit_fails() {
        let leaves: Vec<_> = (0..16).map(|i| leaf(&i.to_string())).collect();
        let root = merkle_root(&leaves).unwrap();
        let mut p = merkle_branch(&leaves, 5).unwrap();
        assert!(verify_merkle_branch(&p, &root));
        p.siblings[2].0[7] ^= 0x10;
        assert!(!verify_merkle_branch(&p, &root));
    }
}
