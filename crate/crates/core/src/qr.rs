//! Text payload carried by a product's QR code.
//!
//! ```text
//! acp:v1:<chain_id>:<contract>:<product_id>:<crc32>
//! ```
//!
//! `chain_id` is base 10 without leading zeros, `contract` is `0x` plus 40
//! lowercase hex digits, `product_id` follows the registry charset (so it
//! never contains `:`), and `crc32` is 8 lowercase hex digits of the IEEE
//! CRC-32 of every byte before the final `:`.

use std::fmt;

use crate::registry::is_valid_product_id;
use crate::types::Address;

pub const PREFIX: &str = "acp";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QrError {
    #[error("product id is not 1-64 characters of [A-Za-z0-9._-]")]
    BadProductId,
    #[error("payload does not start with acp:v1")]
    BadPrefix,
    #[error("malformed payload: {0}")]
    BadStructure(&'static str),
    #[error("checksum mismatch: payload says {found:08x}, content hashes to {expected:08x}")]
    ChecksumMismatch { expected: u32, found: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrPayload {
    pub version: u32,
    pub chain_id: u64,
    pub contract: Address,
    pub product_id: String,
    pub checksum: u32,
}

/// IEEE 802.3 CRC-32 (reflected, init and final XOR `0xffffffff`).
pub fn checksum(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

fn prefix_of(chain_id: u64, contract: &Address, product_id: &str) -> String {
    format!("{PREFIX}:v{VERSION}:{chain_id}:{contract}:{product_id}")
}

pub fn encode_payload(
    chain_id: u64,
    contract: &Address,
    product_id: &str,
) -> Result<String, QrError> {
    if !is_valid_product_id(product_id) {
        return Err(QrError::BadProductId);
    }
    let body = prefix_of(chain_id, contract, product_id);
    let crc = checksum(body.as_bytes());
    Ok(format!("{body}:{crc:08x}"))
}

fn is_lower_hex(s: &str) -> bool {
    s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

pub fn decode_payload(s: &str) -> Result<QrPayload, QrError> {
    let fields: Vec<&str> = s.split(':').collect();
    if fields.len() < 2 || fields[0] != PREFIX || fields[1] != "v1" {
        return Err(QrError::BadPrefix);
    }
    let [_, _, chain, contract, product_id, crc] = fields[..] else {
        return Err(QrError::BadStructure("expected 6 colon-separated fields"));
    };

    let canonical_int = !chain.is_empty()
        && chain.bytes().all(|b| b.is_ascii_digit())
        && (chain == "0" || !chain.starts_with('0'));
    if !canonical_int {
        return Err(QrError::BadStructure("chain id must be a base-10 integer"));
    }
    let chain_id: u64 = chain
        .parse()
        .map_err(|_| QrError::BadStructure("chain id out of range"))?;
    let contract: Address = contract.parse().map_err(|_| {
        QrError::BadStructure("contract must be 0x followed by 40 lowercase hex digits")
    })?;
    if !is_valid_product_id(product_id) {
        return Err(QrError::BadStructure(
            "product id has invalid characters or length",
        ));
    }
    if crc.len() != 8 || !is_lower_hex(crc) {
        return Err(QrError::BadStructure(
            "checksum must be 8 lowercase hex digits",
        ));
    }
    let found = u32::from_str_radix(crc, 16).expect("checked hex");
    let body = &s[..s.len() - crc.len() - 1];
    let expected = checksum(body.as_bytes());
    if expected != found {
        return Err(QrError::ChecksumMismatch { expected, found });
    }
    Ok(QrPayload {
        version: VERSION,
        chain_id,
        contract,
        product_id: product_id.to_string(),
        checksum: found,
    })
}

impl QrPayload {
    pub fn new(chain_id: u64, contract: Address, product_id: &str) -> Result<Self, QrError> {
        let encoded = encode_payload(chain_id, &contract, product_id)?;
        decode_payload(&encoded)
    }

    /// Whether this payload points at the given registry.
    pub fn binds_to(&self, chain_id: u64, contract: &Address) -> bool {
        self.chain_id == chain_id && self.contract == *contract
    }
}

impl fmt::Display for QrPayload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{:08x}",
            prefix_of(self.chain_id, &self.contract, &self.product_id),
            self.checksum
        )
    }
}
