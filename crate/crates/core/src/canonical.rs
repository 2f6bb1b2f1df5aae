//! Canonical byte encoding used for every hash and signature.
//!
//! The encoding is compact JSON with object keys in lexicographic byte
//! order, integers in base 10 (arbitrary width), and byte strings as `0x`
//! lowercase hex. Equal values always produce identical bytes, and distinct
//! values of the same type always produce distinct bytes, so a ledger line
//! can be checked for canonicity by decoding and re-encoding it.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::types::Hash;

/// Encodes `value` in canonical form.
///
/// Total on the crate's own types: they only use string map keys and
/// integer or string leaves.
pub fn canonical_serialize<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    // `serde_json::Value` keeps objects in a BTreeMap, which is what sorts
    // the keys; the compact writer then emits no whitespace.
    let tree = serde_json::to_value(value).expect("canonical encoding of a well-formed value");
    serde_json::to_vec(&tree).expect("writing a JSON tree to memory")
}

/// Canonical encoding as a `String` (always valid UTF-8).
pub fn canonical_string<T: Serialize + ?Sized>(value: &T) -> String {
    String::from_utf8(canonical_serialize(value)).expect("JSON output is UTF-8")
}

/// SHA-256 of raw bytes.
pub fn hash_bytes(bytes: &[u8]) -> Hash {
    Hash(Sha256::digest(bytes).into())
}

/// SHA-256 of the canonical encoding of `value`.
pub fn hash_of<T: Serialize + ?Sized>(value: &T) -> Hash {
    hash_bytes(&canonical_serialize(value))
}

/// SHA-256 over the concatenation of several byte strings.
pub fn hash_concat(parts: &[&[u8]]) -> Hash {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    Hash(hasher.finalize().into())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use serde::Serialize;

    use super::*;

    #[derive(Serialize)]
    struct Sample {
        zeta: u64,
        alpha: String,
        big: u128,
        list: Vec<u8>,
        nested: Option<Hash>,
    }

    #[test]
    fn keys_sorted_no_whitespace() {
        let s = Sample {
            zeta: 7,
            alpha: "a b".into(),
            big: 100_000_000_000_000_000_000,
            list: vec![3, 1],
            nested: None,
        };
        assert_eq!(
            canonical_string(&s),
            r#"{"alpha":"a b","big":100000000000000000000,"list":[3,1],"nested":null,"zeta":7}"#
        );
    }

    #[test]
    fn map_keys_sorted() {
        let mut m = BTreeMap::new();
        m.insert("b".to_string(), 1u32);
        m.insert("a".to_string(), 2u32);
        m.insert("B".to_string(), 3u32);
        assert_eq!(canonical_string(&m), r#"{"B":3,"a":2,"b":1}"#);
    }

    #[test]
    fn empty_digest_is_well_known() {
        assert_eq!(
            hash_bytes(b"").to_string(),
            "0xe3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn one_byte_flip_changes_digest() {
        let mut data = b"provenance".to_vec();
        let before = hash_bytes(&data);
        assert_eq!(before, hash_bytes(&data));
        data[3] ^= 0x01;
        assert_ne!(before, hash_bytes(&data));
    }

    #[test]
    fn concat_matches_single_buffer() {
        assert_eq!(hash_concat(&[b"ab", b"cd"]), hash_bytes(b"abcd"));
    }
}
