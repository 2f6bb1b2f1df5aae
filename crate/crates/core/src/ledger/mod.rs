//! Hash-linked, authority-sealed block chain.
//!
//! Blocks carry a header (linkage, transaction root, sealer, state root),
//! the transactions in execution order, and an Ed25519 seal over the
//! header hash. Authorities seal in strict round-robin by block index.
//! Block 0 is synthesized from the [`GenesisConfig`]; the config file, not
//! the block, is the root of trust.

mod block;
mod genesis;
mod store;
mod validate;

pub use block::{expected_sealer, seal_block, tx_root, Block, BlockHeader, SealError};
pub use genesis::{
    AuthorityEntry, GenesisConfig, GenesisError, DEFAULT_CHAIN_ID, DEFAULT_FAUCET_AMOUNT,
    DEFAULT_FAUCET_COOLDOWN,
};
pub use store::{
    encode_block_line, encode_chain, load_chain, parse_block_line, validate_file, LedgerError,
    LedgerStore,
};
pub use validate::{
    replay, validate_chain, Replay, Replayer, Rule, ValidationFailure, ValidationReport,
};
