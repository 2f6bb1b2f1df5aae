use std::fmt;

use serde::{Deserialize, Serialize};

use super::block::{expected_sealer, tx_root, Block, BlockHeader};
use super::genesis::GenesisConfig;
use crate::crypto::verify;
use crate::registry::{execute, ChainRules, ErrorCode, ExecContext, Receipt, RegistryState};
use crate::types::{Hash, Signature};

/// The invariant a block violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// The line could not be decoded, or is not in canonical form.
    Parse,
    /// Block 0 differs from the block the genesis config describes.
    Genesis,
    Index,
    Linkage,
    Timestamp,
    NotAuthority,
    RoundRobin,
    Seal,
    TxRoot,
    TxSignature,
    TxNonce,
    StateRoot,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Parse => "parse",
            Rule::Genesis => "genesis",
            Rule::Index => "index",
            Rule::Linkage => "linkage",
            Rule::Timestamp => "timestamp",
            Rule::NotAuthority => "not_authority",
            Rule::RoundRobin => "round_robin",
            Rule::Seal => "seal",
            Rule::TxRoot => "tx_root",
            Rule::TxSignature => "tx_signature",
            Rule::TxNonce => "tx_nonce",
            Rule::StateRoot => "state_root",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// First offending block and what it broke.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("block {block_index}: {rule}: {detail}")]
pub struct ValidationFailure {
    pub block_index: u64,
    pub rule: Rule,
    pub detail: String,
}

impl ValidationFailure {
    pub fn new(block_index: u64, rule: Rule, detail: impl Into<String>) -> Self {
        Self {
            block_index,
            rule,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationReport {
    Ok {
        blocks: u64,
        tip_hash: Hash,
        state_root: Hash,
    },
    Failed(ValidationFailure),
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, ValidationReport::Ok { .. })
    }

    pub fn failure(&self) -> Option<&ValidationFailure> {
        match self {
            ValidationReport::Ok { .. } => None,
            ValidationReport::Failed(f) => Some(f),
        }
    }
}

/// Result of replaying a whole chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replay {
    pub state: RegistryState,
    /// One vector per block, aligned with the block's transactions.
    pub receipts: Vec<Vec<Receipt>>,
    pub tip: BlockHeader,
}

/// Incremental validator: feed blocks in order, each is checked against
/// the tip and the replayed registry state.
#[derive(Debug, Clone)]
pub struct Replayer {
    genesis: GenesisConfig,
    rules: ChainRules,
    state: RegistryState,
    tip: Option<BlockHeader>,
    receipts: Vec<Vec<Receipt>>,
}

impl Replayer {
    pub fn new(genesis: &GenesisConfig) -> Self {
        Self {
            rules: genesis.rules(),
            state: genesis.genesis_state(),
            genesis: genesis.clone(),
            tip: None,
            receipts: Vec::new(),
        }
    }

    pub fn genesis(&self) -> &GenesisConfig {
        &self.genesis
    }

    pub fn rules(&self) -> &ChainRules {
        &self.rules
    }

    pub fn state(&self) -> &RegistryState {
        &self.state
    }

    pub fn tip(&self) -> Option<&BlockHeader> {
        self.tip.as_ref()
    }

    pub fn receipts(&self) -> &[Vec<Receipt>] {
        &self.receipts
    }

    pub fn len(&self) -> usize {
        self.receipts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.receipts.is_empty()
    }

    /// Validates `block` as the next block and, if it passes, advances.
    /// On failure nothing changes.
    pub fn push(&mut self, block: &Block) -> Result<&[Receipt], ValidationFailure> {
        let (state, receipts) = match &self.tip {
            None => {
                check_genesis(block, &self.genesis)?;
                (self.state.clone(), Vec::new())
            }
            Some(tip) => check_block(tip, &self.state, block, &self.genesis, &self.rules)?,
        };
        self.state = state;
        self.tip = Some(block.header.clone());
        self.receipts.push(receipts);
        Ok(self.receipts.last().expect("just pushed"))
    }

    pub fn finish(self) -> Option<Replay> {
        let tip = self.tip?;
        Some(Replay {
            state: self.state,
            receipts: self.receipts,
            tip,
        })
    }
}

/// Block 0 as described by a genesis config.
pub(crate) fn genesis_block(genesis: &GenesisConfig) -> Block {
    Block {
        header: BlockHeader {
            index: 0,
            timestamp: 0,
            prev_hash: Hash::ZERO,
            tx_root: tx_root(&[]),
            sealer: genesis.authorities[0].address,
            state_root: genesis.genesis_state().commitment(),
        },
        txs: Vec::new(),
        seal: Signature::ZERO,
    }
}

fn check_genesis(block: &Block, genesis: &GenesisConfig) -> Result<(), ValidationFailure> {
    let fail = |detail: String| {
        Err(ValidationFailure::new(
            block.header.index,
            Rule::Genesis,
            detail,
        ))
    };
    if let Err(e) = genesis.validate() {
        return Err(ValidationFailure::new(0, Rule::Genesis, e.to_string()));
    }
    if block.header.index != 0 {
        return Err(ValidationFailure::new(
            0,
            Rule::Index,
            format!("first block has index {}", block.header.index),
        ));
    }
    if *block != genesis_block(genesis) {
        return fail("block 0 does not match the genesis config".into());
    }
    Ok(())
}

/// Checks one block against its parent and the parent's state; returns
/// the successor state and the block's receipts.
pub(crate) fn check_block(
    parent: &BlockHeader,
    state: &RegistryState,
    block: &Block,
    genesis: &GenesisConfig,
    rules: &ChainRules,
) -> Result<(RegistryState, Vec<Receipt>), ValidationFailure> {
    let h = &block.header;
    let fail = |rule: Rule, detail: String| Err(ValidationFailure::new(h.index, rule, detail));

    if h.index != parent.index + 1 {
        return fail(
            Rule::Index,
            format!("expected index {}, found {}", parent.index + 1, h.index),
        );
    }
    let parent_hash = parent.hash();
    if h.prev_hash != parent_hash {
        return fail(
            Rule::Linkage,
            format!(
                "prev_hash {} does not match parent hash {}",
                h.prev_hash, parent_hash
            ),
        );
    }
    if h.timestamp < parent.timestamp {
        return fail(
            Rule::Timestamp,
            format!(
                "timestamp {} precedes parent timestamp {}",
                h.timestamp, parent.timestamp
            ),
        );
    }
    let Some(pos) = genesis.authority_index(&h.sealer) else {
        return fail(
            Rule::NotAuthority,
            format!("sealer {} is not an authority", h.sealer),
        );
    };
    let expected = expected_sealer(&genesis.authorities, h.index);
    if expected.address != h.sealer {
        return fail(
            Rule::RoundRobin,
            format!(
                "block {} belongs to {}, sealed by {}",
                h.index, expected.address, h.sealer
            ),
        );
    }
    if !verify(
        &genesis.authorities[pos].public_key,
        h.hash().as_bytes(),
        &block.seal,
    ) {
        return fail(
            Rule::Seal,
            "seal does not verify under the sealer's key".into(),
        );
    }
    let root = tx_root(&block.txs);
    if root != h.tx_root {
        return fail(
            Rule::TxRoot,
            format!("tx_root {} recomputes to {}", h.tx_root, root),
        );
    }

    let ctx = ExecContext {
        block_index: h.index,
        timestamp: h.timestamp,
        sealer: h.sealer,
    };
    let mut next = state.clone();
    let mut receipts = Vec::with_capacity(block.txs.len());
    for (i, tx) in block.txs.iter().enumerate() {
        let receipt = execute(&mut next, tx, &ctx, rules);
        match receipt.error {
            Some(ErrorCode::BadNonce) => {
                return fail(
                    Rule::TxNonce,
                    format!("tx {i}: nonce {} out of order", tx.nonce),
                );
            }
            Some(code) if code.is_unauthenticated() => {
                return fail(Rule::TxSignature, format!("tx {i}: {code}"));
            }
            _ => receipts.push(receipt),
        }
    }
    let commitment = next.commitment();
    if commitment != h.state_root {
        return fail(
            Rule::StateRoot,
            format!("state_root {} recomputes to {}", h.state_root, commitment),
        );
    }
    Ok((next, receipts))
}

/// Replays a chain from genesis, stopping at the first invalid block.
pub fn replay(blocks: &[Block], genesis: &GenesisConfig) -> Result<Replay, ValidationFailure> {
    let mut replayer = Replayer::new(genesis);
    for block in blocks {
        replayer.push(block)?;
    }
    replayer
        .finish()
        .ok_or_else(|| ValidationFailure::new(0, Rule::Genesis, "chain is empty"))
}

/// Checks every chain invariant and names the first offending block.
pub fn validate_chain(blocks: &[Block], genesis: &GenesisConfig) -> ValidationReport {
    match replay(blocks, genesis) {
        Ok(r) => ValidationReport::Ok {
            blocks: blocks.len() as u64,
            tip_hash: r.tip.hash(),
            state_root: r.state.commitment(),
        },
        Err(f) => ValidationReport::Failed(f),
    }
}

impl GenesisConfig {
    /// Block 0: index 0, zero parent, empty transaction list, the genesis
    /// state root, and an all-zero seal.
    pub fn genesis_block(&self) -> Block {
        genesis_block(self)
    }
}
