//! Canonical JSON encoding and content digests.
//!
//! Canonical form: object keys sorted, two-space indentation, LF line endings,
//! UTF-8, trailing newline. Two equal values always encode to the same bytes.

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn to_canonical_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    // serde_json::Value keeps object keys in a BTreeMap, so routing through it
    // sorts every map and struct.
    let value = serde_json::to_value(value).map_err(|e| Error::Precondition(e.to_string()))?;
    let mut out = serde_json::to_vec_pretty(&value).map_err(|e| Error::Precondition(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(String::from_utf8(to_canonical_bytes(value)?).expect("serde_json emits UTF-8"))
}

/// Compact single-line canonical form, used inside prompts.
pub fn to_compact_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value).map_err(|e| Error::Precondition(e.to_string()))?;
    Ok(value.to_string())
}

pub fn from_json_bytes<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| Error::parse(bytes, &e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest over a sequence of labelled parts, length-prefixed so that
/// `("ab", "c")` and `("a", "bc")` differ.
pub fn digest_parts<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    hex::encode(hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn keys_are_sorted_and_trailing_newline() {
        let mut m = HashMap::new();
        m.insert("zeta", 1);
        m.insert("alpha", 2);
        let s = to_canonical_string(&m).unwrap();
        assert_eq!(s, "{\n  \"alpha\": 2,\n  \"zeta\": 1\n}\n");
    }

    #[test]
    fn digest_parts_is_boundary_sensitive() {
        assert_ne!(
            digest_parts([b"ab".as_slice(), b"c".as_slice()]),
            digest_parts([b"a".as_slice(), b"bc".as_slice()])
        );
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
