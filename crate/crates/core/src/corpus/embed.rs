//! Deterministic feature-hashing embedder.
//!
//! Each whitespace token is hashed with 64-bit FNV-1a over
//! `seed.to_le_bytes() ++ token_utf8`. The token adds `+1` to bucket
//! `hash % dim` when bit 32 of the hash is clear and `-1` when it is set.
//! The summed vector is L2-normalized unless it is all zeros.

use super::{EmbeddedUser, UserRecord};
use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a64(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

pub fn hash_embed(text: &str, dim: usize, seed: u64) -> Vec<f32> {
    assert!(dim >= 1, "hash_embed requires dim >= 1");
    let mut acc = vec![0.0f64; dim];
    for token in text.split_whitespace() {
        let h = fnv1a64(seed, token.as_bytes());
        let bucket = (h % dim as u64) as usize;
        let sign = if (h >> 32) & 1 == 0 { 1.0 } else { -1.0 };
        acc[bucket] += sign;
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        acc.iter_mut().for_each(|v| *v /= norm);
    }
    acc.into_iter().map(|v| v as f32).collect()
}

/// Embeds every tweet of every user, preserving order.
pub fn embed_corpus(users: &[UserRecord], dim: usize, seed: u64) -> Result<Vec<EmbeddedUser>> {
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be positive".into()));
    }
    users
        .iter()
        .map(|u| {
            let mut data = Vec::with_capacity(u.tweets.len() * dim);
            for t in &u.tweets {
                data.extend(hash_embed(&t.text, dim, seed));
            }
            EmbeddedUser::new(u.user_id.clone(), u.label, dim, data)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_text_is_zero() {
        assert_eq!(hash_embed("", 8, 42), vec![0.0; 8]);
        assert_eq!(hash_embed("   ", 8, 42), vec![0.0; 8]);
    }

    #[test]
    fn deterministic() {
        assert_eq!(hash_embed("hello there world", 16, 9), hash_embed("hello there world", 16, 9));
        assert_ne!(hash_embed("hello there world", 16, 9), hash_embed("hello there world", 16, 10));
    }

    #[test]
    fn repeated_token_hits_one_bucket() {
        // Both tokens land in the same bucket with the same sign, giving +-2
        // before normalization.
        let h = fnv1a64(1, b"a");
        let bucket = (h % 4) as usize;
        let sign = if (h >> 32) & 1 == 0 { 1.0 } else { -1.0 };
        let mut expected = vec![0.0f32; 4];
        expected[bucket] = sign;
        assert_eq!(hash_embed("a a", 4, 1), expected);
    }

    #[test]
    fn fnv_reference_vector() {
        // FNV-1a of the empty byte string is the offset basis; with the
        // eight zero bytes of seed 0 prepended, each byte only multiplies.
        let mut h = FNV_OFFSET;
        for _ in 0..8 {
            h = h.wrapping_mul(FNV_PRIME);
        }
        assert_eq!(fnv1a64(0, b""), h);
    }

    proptest! {
        #[test]
        fn unit_norm_or_zero(text in "[a-z ]{0,40}", dim in 1usize..64, seed in any::<u64>()) {
            let v = hash_embed(&text, dim, seed);
            let norm = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-6);
        }
    }
}
