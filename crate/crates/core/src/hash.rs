//! Content hashes for provenance and stage-seed derivation.

use alloc::string::String;
use sha2::{Digest, Sha256};

use crate::corpus::Corpus;

// Field and record separators keep distinct corpora from colliding when
// their concatenated text happens to agree.
const UNIT: u8 = 0x1f;
const RECORD: u8 = 0x1e;

/// Hex SHA-256 over every sentence's document id, domain, words and tags.
pub fn corpus_hash(corpus: &Corpus) -> String {
    let mut h = Sha256::new();
    for s in corpus.sentences() {
        h.update(s.doc_id.as_bytes());
        h.update([UNIT]);
        h.update(s.domain.as_str().as_bytes());
        for (i, w) in s.words().iter().enumerate() {
            h.update([UNIT]);
            h.update(w.as_bytes());
            if let Some(tags) = s.tags() {
                h.update(b"\t");
                h.update(tags[i].as_bytes());
            }
        }
        h.update([RECORD]);
    }
    to_hex(&h.finalize())
}

/// Hex SHA-256 of arbitrary bytes.
pub fn bytes_hash(bytes: &[u8]) -> String {
    to_hex(&Sha256::digest(bytes))
}

/// `SHA-256(master_le ‖ stage)` truncated to its first eight bytes.
pub fn derive_seed(master: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(stage.as_bytes());
    let d = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    u64::from_le_bytes(b)
}

fn to_hex(bytes: &[u8]) -> String {
    const DIGITS: &[u8; 16] = b"0123456789abcdef";
    let mut s = String::with_capacity(bytes.len() * 2);
    for &b in bytes {
        s.push(DIGITS[(b >> 4) as usize] as char);
        s.push(DIGITS[(b & 0xf) as usize] as char);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::sentence;
    use alloc::vec;

    #[test]
    fn sha256_of_abc_matches_known_digest() {
        assert_eq!(
            bytes_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn corpus_hash_tracks_content() {
        let a = Corpus::new("a", vec![sentence(&["x", "y"], Some(&["N", "V"]), "d")]);
        let b = Corpus::new("b", vec![sentence(&["x", "y"], Some(&["N", "V"]), "d")]);
        let c = Corpus::new("a", vec![sentence(&["x", "y"], Some(&["N", "N"]), "d")]);
        let d = Corpus::new("a", vec![sentence(&["xy"], Some(&["N"]), "d")]);
        assert_eq!(corpus_hash(&a), corpus_hash(&b));
        assert_ne!(corpus_hash(&a), corpus_hash(&c));
        assert_ne!(corpus_hash(&a), corpus_hash(&d));
    }

    #[test]
    fn stage_seeds_differ_by_stage_and_master() {
        assert_eq!(derive_seed(7, "pretrain"), derive_seed(7, "pretrain"));
        assert_ne!(derive_seed(7, "pretrain"), derive_seed(7, "domain-tune"));
        assert_ne!(derive_seed(7, "pretrain"), derive_seed(8, "pretrain"));
    }
}
