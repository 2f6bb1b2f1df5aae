//! Anti-counterfeit product provenance on a permissioned proof-of-authority
//! ledger.
//!
//! - [`ledger`]: hash-linked blocks, round-robin sealing, validation, files.
//! - [`registry`]: the product lifecycle state machine.
//! - [`gas`]: gas metering, fee settlement, cost reports.
//! - [`qr`]: the checksummed payload printed on a product.
//! - [`simnet`]: deterministic supply-chain simulation, tampering, and the
//!   reference oracle.

pub mod canonical;
pub mod crypto;
pub mod gas;
pub mod ledger;
pub mod qr;
pub mod registry;
pub mod simnet;
pub mod types;

pub use canonical::{canonical_serialize, hash_bytes, hash_of};
pub use crypto::{address_of, KeyPair};
pub use types::{Address, Gas, Hash, PublicKey, Signature, Wei};
