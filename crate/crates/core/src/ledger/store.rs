//! Line-delimited ledger file: one canonical block encoding per line, LF
//! terminated, block 0 first.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use super::block::{seal_block, Block, BlockHeader, SealError};
use super::genesis::GenesisConfig;
use super::validate::{Replayer, Rule, ValidationFailure, ValidationReport};
use crate::canonical::canonical_string;
use crate::crypto::KeyPair;
use crate::registry::{execute, ErrorCode, ExecContext, Receipt, RegistryState, TxEnvelope};

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("ledger file {0} not found")]
    NotFound(PathBuf),
    #[error("ledger file {0} already exists")]
    AlreadyExists(PathBuf),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation failed: {0}")]
    ValidationFailed(ValidationFailure),
    #[error("cannot seal: {0}")]
    Seal(#[from] SealError),
    #[error("transaction {index} cannot be included: {code}")]
    Unincludable { index: usize, code: ErrorCode },
    #[error("storage failure: {0}")]
    StorageFailure(#[from] io::Error),
}

impl LedgerError {
    /// Parse and validation errors as a report naming the offending block.
    pub fn as_failure(&self) -> Option<ValidationFailure> {
        match self {
            LedgerError::Parse { line, message } => Some(ValidationFailure::new(
                (*line as u64).saturating_sub(1),
                Rule::Parse,
                message.clone(),
            )),
            LedgerError::ValidationFailed(f) => Some(f.clone()),
            _ => None,
        }
    }
}

/// The canonical line for a block, without the terminator.
pub fn encode_block_line(block: &Block) -> String {
    canonical_string(block)
}

/// The whole file body for a chain.
pub fn encode_chain(blocks: &[Block]) -> String {
    blocks.iter().fold(String::new(), |mut out, b| {
        out.push_str(&encode_block_line(b));
        out.push('\n');
        out
    })
}

/// Decodes one line (1-based `line` for messages), insisting on canonical form.
pub fn parse_block_line(line: usize, bytes: &[u8]) -> Result<Block, LedgerError> {
    let parse = |message: String| LedgerError::Parse { line, message };
    let text = std::str::from_utf8(bytes).map_err(|e| parse(format!("invalid UTF-8: {e}")))?;
    let block: Block = serde_json::from_str(text).map_err(|e| parse(e.to_string()))?;
    if encode_block_line(&block) != text {
        return Err(parse("block is not in canonical encoding".into()));
    }
    Ok(block)
}

/// Parses and validates line by line, so the first bad line or block wins.
fn read_validated(
    bytes: &[u8],
    genesis: &GenesisConfig,
) -> Result<(Vec<Block>, Replayer), LedgerError> {
    if bytes.is_empty() {
        return Err(LedgerError::Parse {
            line: 1,
            message: "empty file: genesis block required".into(),
        });
    }
    let mut replayer = Replayer::new(genesis);
    let mut blocks = Vec::new();
    let mut rest = bytes;
    let mut line = 0usize;
    while !rest.is_empty() {
        line += 1;
        let (content, terminated) = match rest.iter().position(|b| *b == b'\n') {
            Some(i) => {
                let c = &rest[..i];
                rest = &rest[i + 1..];
                (c, true)
            }
            None => {
                let c = rest;
                rest = &[];
                (c, false)
            }
        };
        let block = parse_block_line(line, content)?;
        if !terminated {
            return Err(LedgerError::Parse {
                line,
                message: "truncated final line (missing LF)".into(),
            });
        }
        replayer
            .push(&block)
            .map_err(LedgerError::ValidationFailed)?;
        blocks.push(block);
    }
    Ok((blocks, replayer))
}

fn read_file(path: &Path) -> Result<Vec<u8>, LedgerError> {
    fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => LedgerError::NotFound(path.to_path_buf()),
        _ => LedgerError::StorageFailure(e),
    })
}

/// Loads and fully validates a ledger file.
pub fn load_chain(path: &Path, genesis: &GenesisConfig) -> Result<LedgerStore, LedgerError> {
    let bytes = read_file(path)?;
    let (blocks, replayer) = read_validated(&bytes, genesis)?;
    Ok(LedgerStore {
        path: Some(path.to_path_buf()),
        blocks,
        replayer,
    })
}

/// Validates a ledger file; parse errors are reported against the block
/// on the offending line. Only I/O problems are returned as errors.
pub fn validate_file(
    path: &Path,
    genesis: &GenesisConfig,
) -> Result<ValidationReport, LedgerError> {
    match load_chain(path, genesis) {
        Ok(store) => Ok(ValidationReport::Ok {
            blocks: store.len() as u64,
            tip_hash: store.tip().hash(),
            state_root: store.state().commitment(),
        }),
        Err(e) => match e.as_failure() {
            Some(f) => Ok(ValidationReport::Failed(f)),
            None => Err(e),
        },
    }
}

/// Append-only chain store, optionally backed by a ledger file.
#[derive(Debug, Clone)]
pub struct LedgerStore {
    path: Option<PathBuf>,
    blocks: Vec<Block>,
    replayer: Replayer,
}

impl LedgerStore {
    /// A chain holding only block 0, kept in memory.
    pub fn in_memory(genesis: &GenesisConfig) -> Result<Self, LedgerError> {
        let mut replayer = Replayer::new(genesis);
        let block = genesis.genesis_block_checked()?;
        replayer
            .push(&block)
            .map_err(LedgerError::ValidationFailed)?;
        Ok(Self {
            path: None,
            blocks: vec![block],
            replayer,
        })
    }

    /// Creates a new ledger file holding block 0. Refuses to overwrite.
    pub fn create(path: &Path, genesis: &GenesisConfig) -> Result<Self, LedgerError> {
        if path.exists() {
            return Err(LedgerError::AlreadyExists(path.to_path_buf()));
        }
        let mut store = Self::in_memory(genesis)?;
        write_atomically(path, encode_chain(&store.blocks).as_bytes())?;
        store.path = Some(path.to_path_buf());
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn genesis(&self) -> &GenesisConfig {
        self.replayer.genesis()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip(&self) -> &BlockHeader {
        &self
            .blocks
            .last()
            .expect("store always holds block 0")
            .header
    }

    pub fn state(&self) -> &RegistryState {
        self.replayer.state()
    }

    /// Receipts per block, recomputed by replay.
    pub fn receipts(&self) -> &[Vec<Receipt>] {
        self.replayer.receipts()
    }

    /// Executes `txs` on top of the tip and seals them into the next block.
    /// Does not append. Fails if any transaction is unauthenticated.
    pub fn seal_next(
        &self,
        txs: &[TxEnvelope],
        sealer: &KeyPair,
        timestamp: u64,
    ) -> Result<(Block, Vec<Receipt>), LedgerError> {
        let tip = self.tip();
        let ctx = ExecContext {
            block_index: tip.index + 1,
            timestamp,
            sealer: sealer.address(),
        };
        let mut state = self.state().clone();
        let mut receipts = Vec::with_capacity(txs.len());
        for (index, tx) in txs.iter().enumerate() {
            let receipt = execute(&mut state, tx, &ctx, self.replayer.rules());
            if let Some(code) = receipt.error.filter(|c| c.is_unauthenticated()) {
                return Err(LedgerError::Unincludable { index, code });
            }
            receipts.push(receipt);
        }
        let block = seal_block(
            txs,
            tip,
            state.commitment(),
            sealer,
            timestamp,
            &self.genesis().authorities,
        )?;
        Ok((block, receipts))
    }

    /// Validates `block` against the tip, persists it, then adopts it.
    /// The file is replaced atomically, so a failed append leaves it as it was.
    pub fn append_block(&mut self, block: Block) -> Result<&[Receipt], LedgerError> {
        let mut next = self.replayer.clone();
        next.push(&block).map_err(LedgerError::ValidationFailed)?;
        if let Some(path) = &self.path {
            let mut bytes = read_file(path)?;
            bytes.extend_from_slice(encode_block_line(&block).as_bytes());
            bytes.push(b'\n');
            write_atomically(path, &bytes)?;
        }
        self.replayer = next;
        self.blocks.push(block);
        Ok(self.replayer.receipts().last().expect("just pushed"))
    }
}

impl GenesisConfig {
    fn genesis_block_checked(&self) -> Result<Block, LedgerError> {
        self.validate().map_err(|e| {
            LedgerError::ValidationFailed(ValidationFailure::new(0, Rule::Genesis, e.to_string()))
        })?;
        Ok(self.genesis_block())
    }
}

fn write_atomically(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile_in(dir, path)?;
    tmp.1.write_all(bytes)?;
    tmp.1.sync_all()?;
    drop(tmp.1);
    fs::rename(&tmp.0, path)
}

fn tempfile_in(dir: &Path, target: &Path) -> io::Result<(PathBuf, fs::File)> {
    let stem = target
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "ledger".into());
    let tmp = dir.join(format!(".{stem}.{}.tmp", std::process::id()));
    let file = fs::OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .open(&tmp)?;
    Ok((tmp, file))
}
