//! The product registry state machine.
//!
//! Accounts, fixed roles, balances, the faucet, and the product lifecycle
//! (register, transfer between trusted nodes, sell to a consumer). State is
//! a plain value: [`apply_tx`] returns a new state and leaves its input
//! untouched.

mod rules;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::canonical::{canonical_serialize, hash_of};
use crate::crypto::{address_of, verify, KeyPair};
use crate::types::{Address, Gas, Hash, PublicKey, Signature, Wei};

pub use rules::{
    admit, apply_tx, apply_verified, counterfeit_probe, execute, verify_product, ChainRules,
    ExecContext, VerificationResult,
};

/// Longest accepted product id, in characters.
pub const MAX_PRODUCT_ID_LEN: usize = 64;
/// Longest accepted product name, in bytes.
pub const MAX_NAME_LEN: usize = 256;
/// Longest accepted product metadata, in bytes.
pub const MAX_METADATA_LEN: usize = 1024;

/// 1 to 64 characters drawn from `[A-Za-z0-9._-]`.
pub fn is_valid_product_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= MAX_PRODUCT_ID_LEN
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Manufacturer,
    Distributor,
    Retailer,
    Consumer,
    Authority,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::Manufacturer,
        Role::Distributor,
        Role::Retailer,
        Role::Consumer,
        Role::Authority,
    ];

    /// Manufacturers, distributors and retailers.
    pub fn is_trusted_node(self) -> bool {
        matches!(
            self,
            Role::Manufacturer | Role::Distributor | Role::Retailer
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Manufacturer => "manufacturer",
            Role::Distributor => "distributor",
            Role::Retailer => "retailer",
            Role::Consumer => "consumer",
            Role::Authority => "authority",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown role {s:?}"))
    }
}

/// Product availability. `Unavailable` is absorbing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Available,
    Unavailable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Available => "Available",
            Status::Unavailable => "Unavailable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Account {
    pub address: Address,
    pub role: Role,
    pub balance: Wei,
    pub nonce: u64,
    pub last_faucet_claim: Option<u64>,
}

impl Account {
    pub fn new(address: Address, role: Role, balance: Wei) -> Self {
        Self {
            address,
            role,
            balance,
            nonce: 0,
            last_faucet_claim: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductRecord {
    pub product_id: String,
    pub name: String,
    pub metadata: String,
    pub manufacturer: Address,
    pub current_owner: Address,
    pub status: Status,
    /// Every owner in order, starting with the manufacturer.
    pub history: Vec<Address>,
    pub registered_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractInfo {
    pub address: Address,
    pub deployer: Address,
}

/// Full registry state. Maps are ordered so the canonical encoding (and
/// therefore [`RegistryState::commitment`]) is independent of insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryState {
    pub chain_id: u64,
    pub contract: Option<ContractInfo>,
    pub accounts: BTreeMap<Address, Account>,
    pub products: BTreeMap<String, ProductRecord>,
}

impl RegistryState {
    pub fn new(chain_id: u64) -> Self {
        Self {
            chain_id,
            contract: None,
            accounts: BTreeMap::new(),
            products: BTreeMap::new(),
        }
    }

    pub fn role_of(&self, address: &Address) -> Option<Role> {
        self.accounts.get(address).map(|a| a.role)
    }

    pub fn balance_of(&self, address: &Address) -> Wei {
        self.accounts.get(address).map_or(0, |a| a.balance)
    }

    pub fn nonce_of(&self, address: &Address) -> u64 {
        self.accounts.get(address).map_or(0, |a| a.nonce)
    }

    pub fn total_supply(&self) -> Wei {
        self.accounts.values().map(|a| a.balance).sum()
    }

    /// Hash of the canonical encoding; pinned as `state_root` in headers.
    pub fn commitment(&self) -> Hash {
        hash_of(self)
    }
}

/// Convenience alias for [`RegistryState::commitment`].
pub fn state_commitment(state: &RegistryState) -> Hash {
    state.commitment()
}

/// Contract address for a deploy: trailing 20 bytes of
/// SHA-256(sender || nonce as 8 big-endian bytes).
pub fn contract_address(sender: &Address, nonce: u64) -> Address {
    let digest = crate::canonical::hash_concat(&[sender.as_bytes(), &nonce.to_be_bytes()]);
    let mut out = [0u8; 20];
    out.copy_from_slice(&digest.0[12..]);
    Address(out)
}

/// One registry operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TxKind {
    Deploy {
        code_size: u32,
    },
    Register {
        product_id: String,
        name: String,
        metadata: String,
    },
    Transfer {
        product_id: String,
        new_owner: Address,
    },
    Sell {
        product_id: String,
        consumer: Address,
    },
    FaucetClaim,
}

impl TxKind {
    pub fn category(&self) -> TxCategory {
        match self {
            TxKind::Deploy { .. } => TxCategory::Deploy,
            TxKind::Register { .. } => TxCategory::Register,
            TxKind::Transfer { .. } => TxCategory::Transfer,
            TxKind::Sell { .. } => TxCategory::Sell,
            TxKind::FaucetClaim => TxCategory::FaucetClaim,
        }
    }

    pub fn product_id(&self) -> Option<&str> {
        match self {
            TxKind::Register { product_id, .. }
            | TxKind::Transfer { product_id, .. }
            | TxKind::Sell { product_id, .. } => Some(product_id),
            TxKind::Deploy { .. } | TxKind::FaucetClaim => None,
        }
    }
}

/// Transaction categories, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TxCategory {
    Deploy,
    Register,
    Transfer,
    Sell,
    FaucetClaim,
}

impl TxCategory {
    pub const ALL: [TxCategory; 5] = [
        TxCategory::Deploy,
        TxCategory::Register,
        TxCategory::Transfer,
        TxCategory::Sell,
        TxCategory::FaucetClaim,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TxCategory::Deploy => "Deploy",
            TxCategory::Register => "Register",
            TxCategory::Transfer => "Transfer",
            TxCategory::Sell => "Sell",
            TxCategory::FaucetClaim => "FaucetClaim",
        }
    }
}

#[derive(Serialize)]
struct SigningPayload<'a> {
    chain_id: u64,
    sender: &'a Address,
    nonce: u64,
    kind: &'a TxKind,
    gas_price: u64,
}

/// A signed transaction.
///
/// The signature covers `(chain_id, sender, nonce, kind, gas_price)`, so an
/// envelope signed for one chain never verifies on another. The public key
/// travels with the envelope; `sender` must be its derived address.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxEnvelope {
    pub sender: Address,
    pub public_key: PublicKey,
    pub nonce: u64,
    pub kind: TxKind,
    /// Wei per unit of gas.
    pub gas_price: u64,
    pub signature: Signature,
}

impl TxEnvelope {
    pub fn signing_bytes(
        chain_id: u64,
        sender: &Address,
        nonce: u64,
        kind: &TxKind,
        gas_price: u64,
    ) -> Vec<u8> {
        canonical_serialize(&SigningPayload {
            chain_id,
            sender,
            nonce,
            kind,
            gas_price,
        })
    }

    pub fn sign(key: &KeyPair, chain_id: u64, nonce: u64, kind: TxKind, gas_price: u64) -> Self {
        let sender = key.address();
        let msg = Self::signing_bytes(chain_id, &sender, nonce, &kind, gas_price);
        Self {
            sender,
            public_key: key.public_key(),
            nonce,
            kind,
            gas_price,
            signature: key.sign(&msg),
        }
    }

    pub fn hash(&self) -> Hash {
        hash_of(self)
    }

    /// Checks key/address binding and the signature for `chain_id`.
    pub fn signature_valid(&self, chain_id: u64) -> bool {
        address_of(&self.public_key) == self.sender
            && verify(
                &self.public_key,
                &Self::signing_bytes(
                    chain_id,
                    &self.sender,
                    self.nonce,
                    &self.kind,
                    self.gas_price,
                ),
                &self.signature,
            )
    }
}

/// An envelope whose signature has been checked for a given chain.
///
/// Lets callers verify once and execute many times (mempools, exhaustive
/// exploration). Only obtainable through [`VerifiedTx::check`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifiedTx {
    tx: TxEnvelope,
    hash: Hash,
    chain_id: u64,
}

impl VerifiedTx {
    pub fn check(tx: &TxEnvelope, chain_id: u64) -> Option<Self> {
        tx.signature_valid(chain_id).then(|| Self {
            hash: tx.hash(),
            tx: tx.clone(),
            chain_id,
        })
    }

    pub fn tx(&self) -> &TxEnvelope {
        &self.tx
    }

    pub fn hash(&self) -> Hash {
        self.hash
    }

    pub fn chain_id(&self) -> u64 {
        self.chain_id
    }
}

/// Receipt-level rejection codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, thiserror::Error)]
pub enum ErrorCode {
    #[error("BadSignature")]
    BadSignature,
    #[error("UnknownAccount")]
    UnknownAccount,
    #[error("BadNonce")]
    BadNonce,
    #[error("InsufficientFunds")]
    InsufficientFunds,
    #[error("AlreadyDeployed")]
    AlreadyDeployed,
    #[error("NotDeployed")]
    NotDeployed,
    #[error("NotTrustedNode")]
    NotTrustedNode,
    #[error("NotManufacturer")]
    NotManufacturer,
    #[error("BadProductId")]
    BadProductId,
    #[error("BadMetadata")]
    BadMetadata,
    #[error("DuplicateProductId")]
    DuplicateProductId,
    #[error("UnknownProduct")]
    UnknownProduct,
    #[error("NotOwner")]
    NotOwner,
    #[error("ProductUnavailable")]
    ProductUnavailable,
    #[error("NotConsumer")]
    NotConsumer,
    #[error("FaucetCooldown")]
    FaucetCooldown,
}

impl ErrorCode {
    /// Codes raised before the sender is authenticated. Such transactions
    /// change nothing and may not be included in a block.
    pub fn is_unauthenticated(self) -> bool {
        matches!(
            self,
            ErrorCode::BadSignature | ErrorCode::UnknownAccount | ErrorCode::BadNonce
        )
    }
}

/// Outcome of one transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Receipt {
    pub tx_hash: Hash,
    pub accepted: bool,
    pub gas_used: Gas,
    pub fee: Wei,
    pub error: Option<ErrorCode>,
}
