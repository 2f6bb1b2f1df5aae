use serde::{Deserialize, Serialize};

use super::{
    contract_address, is_valid_product_id, Account, ContractInfo, ErrorCode, ProductRecord,
    Receipt, RegistryState, Role, Status, TxEnvelope, TxKind, VerifiedTx, MAX_METADATA_LEN,
    MAX_NAME_LEN,
};
use crate::gas::{self, GasParams};
use crate::types::{Address, Gas, Wei};

/// Genesis-level parameters the state machine needs at execution time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainRules {
    pub gas: GasParams,
    pub faucet_amount: Wei,
    pub faucet_cooldown: u64,
}

/// Where a transaction executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecContext {
    pub block_index: u64,
    /// Logical seconds since genesis.
    pub timestamp: u64,
    /// Receives the fee.
    pub sealer: Address,
}

/// Pure transition: returns the successor state and the receipt.
pub fn apply_tx(
    state: &RegistryState,
    tx: &TxEnvelope,
    ctx: &ExecContext,
    rules: &ChainRules,
) -> (RegistryState, Receipt) {
    let mut next = state.clone();
    let receipt = execute(&mut next, tx, ctx, rules);
    (next, receipt)
}

/// Pure transition for an envelope whose signature is already checked.
pub fn apply_verified(
    state: &RegistryState,
    tx: &VerifiedTx,
    ctx: &ExecContext,
    rules: &ChainRules,
) -> (RegistryState, Receipt) {
    let mut next = state.clone();
    let receipt = execute_verified(&mut next, tx, ctx, rules);
    (next, receipt)
}

/// In-place form of [`apply_tx`], used by replay loops.
pub fn execute(
    state: &mut RegistryState,
    tx: &TxEnvelope,
    ctx: &ExecContext,
    rules: &ChainRules,
) -> Receipt {
    match VerifiedTx::check(tx, state.chain_id) {
        Some(verified) => execute_verified(state, &verified, ctx, rules),
        None => rejected(tx.hash(), ErrorCode::BadSignature, 0, 0),
    }
}

fn rejected(tx_hash: crate::types::Hash, code: ErrorCode, gas_used: Gas, fee: Wei) -> Receipt {
    Receipt {
        tx_hash,
        accepted: false,
        gas_used,
        fee,
        error: Some(code),
    }
}

pub(crate) fn execute_verified(
    state: &mut RegistryState,
    verified: &VerifiedTx,
    ctx: &ExecContext,
    rules: &ChainRules,
) -> Receipt {
    let tx = verified.tx();
    let tx_hash = verified.hash();
    if verified.chain_id() != state.chain_id {
        return rejected(tx_hash, ErrorCode::BadSignature, 0, 0);
    }
    let Some(account) = state.accounts.get(&tx.sender) else {
        return rejected(tx_hash, ErrorCode::UnknownAccount, 0, 0);
    };
    if account.nonce != tx.nonce {
        return rejected(tx_hash, ErrorCode::BadNonce, 0, 0);
    }

    if let TxKind::FaucetClaim = tx.kind {
        return faucet_claim(state, tx, ctx.timestamp, rules, tx_hash);
    }

    let admitted = admit(state, &tx.sender, &tx.kind);
    let gas_used = gas::intrinsic_gas(&rules.gas, &tx.kind)
        + if admitted.is_ok() {
            gas::storage_gas(&rules.gas, &tx.kind)
        } else {
            0
        };
    let fee = gas::fee(gas_used, tx.gas_price);

    bump_nonce(state, &tx.sender);
    if gas::settle_in_place(state, &tx.sender, &ctx.sealer, fee).is_err() {
        return rejected(tx_hash, ErrorCode::InsufficientFunds, 0, 0);
    }
    if let Err(code) = admitted {
        return rejected(tx_hash, code, gas_used, fee);
    }
    commit(state, tx, ctx);
    Receipt {
        tx_hash,
        accepted: true,
        gas_used,
        fee,
        error: None,
    }
}

fn bump_nonce(state: &mut RegistryState, sender: &Address) {
    if let Some(account) = state.accounts.get_mut(sender) {
        account.nonce += 1;
    }
}

fn faucet_claim(
    state: &mut RegistryState,
    tx: &TxEnvelope,
    now: u64,
    rules: &ChainRules,
    tx_hash: crate::types::Hash,
) -> Receipt {
    let account = state
        .accounts
        .get_mut(&tx.sender)
        .expect("sender checked by caller");
    account.nonce += 1;
    let cooled = match account.last_faucet_claim {
        None => true,
        Some(last) => now.saturating_sub(last) >= rules.faucet_cooldown,
    };
    if !cooled {
        return rejected(tx_hash, ErrorCode::FaucetCooldown, 0, 0);
    }
    account.balance += rules.faucet_amount;
    account.last_faucet_claim = Some(now);
    Receipt {
        tx_hash,
        accepted: true,
        gas_used: 0,
        fee: 0,
        error: None,
    }
}

/// Variant-specific admission. Read-only; the checks are ordered so that
/// the most informative code wins (a duplicate id is reported as such
/// whoever submits it, a sold product as unavailable whoever tries to move it).
pub fn admit(state: &RegistryState, sender: &Address, kind: &TxKind) -> Result<(), ErrorCode> {
    let sender_role = state.role_of(sender);
    match kind {
        TxKind::Deploy { .. } => {
            if state.contract.is_some() {
                return Err(ErrorCode::AlreadyDeployed);
            }
            match sender_role {
                Some(r) if r.is_trusted_node() || r == Role::Authority => Ok(()),
                _ => Err(ErrorCode::NotTrustedNode),
            }
        }
        TxKind::Register {
            product_id,
            name,
            metadata,
        } => {
            if state.contract.is_none() {
                return Err(ErrorCode::NotDeployed);
            }
            if !is_valid_product_id(product_id) {
                return Err(ErrorCode::BadProductId);
            }
            if state.products.contains_key(product_id) {
                return Err(ErrorCode::DuplicateProductId);
            }
            if sender_role != Some(Role::Manufacturer) {
                return Err(ErrorCode::NotManufacturer);
            }
            if name.len() > MAX_NAME_LEN || metadata.len() > MAX_METADATA_LEN {
                return Err(ErrorCode::BadMetadata);
            }
            Ok(())
        }
        TxKind::Transfer {
            product_id,
            new_owner,
        } => {
            movable(state, sender, product_id)?;
            match state.role_of(new_owner) {
                Some(r) if r.is_trusted_node() => Ok(()),
                _ => Err(ErrorCode::NotTrustedNode),
            }
        }
        TxKind::Sell {
            product_id,
            consumer,
        } => {
            movable(state, sender, product_id)?;
            match state.role_of(consumer) {
                Some(Role::Consumer) => Ok(()),
                _ => Err(ErrorCode::NotConsumer),
            }
        }
        TxKind::FaucetClaim => Ok(()),
    }
}

fn movable(state: &RegistryState, sender: &Address, product_id: &str) -> Result<(), ErrorCode> {
    if state.contract.is_none() {
        return Err(ErrorCode::NotDeployed);
    }
    let product = state
        .products
        .get(product_id)
        .ok_or(ErrorCode::UnknownProduct)?;
    if product.status == Status::Unavailable {
        return Err(ErrorCode::ProductUnavailable);
    }
    if product.current_owner != *sender {
        return Err(ErrorCode::NotOwner);
    }
    Ok(())
}

/// Applies an admitted variant's effect.
fn commit(state: &mut RegistryState, tx: &TxEnvelope, ctx: &ExecContext) {
    match &tx.kind {
        TxKind::Deploy { .. } => {
            state.contract = Some(ContractInfo {
                address: contract_address(&tx.sender, tx.nonce),
                deployer: tx.sender,
            });
        }
        TxKind::Register {
            product_id,
            name,
            metadata,
        } => {
            state.products.insert(
                product_id.clone(),
                ProductRecord {
                    product_id: product_id.clone(),
                    name: name.clone(),
                    metadata: metadata.clone(),
                    manufacturer: tx.sender,
                    current_owner: tx.sender,
                    status: Status::Available,
                    history: vec![tx.sender],
                    registered_at: ctx.block_index,
                },
            );
        }
        TxKind::Transfer {
            product_id,
            new_owner,
        } => {
            let product = state.products.get_mut(product_id).expect("admitted");
            product.current_owner = *new_owner;
            product.history.push(*new_owner);
        }
        TxKind::Sell {
            product_id,
            consumer,
        } => {
            let product = state.products.get_mut(product_id).expect("admitted");
            product.current_owner = *consumer;
            product.history.push(*consumer);
            product.status = Status::Unavailable;
        }
        TxKind::FaucetClaim => {}
    }
}

/// Read-only lookup a consumer performs after scanning a product code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub product_id: String,
    /// `false` means the id was never registered: a suspected counterfeit.
    pub exists: bool,
    pub status: Option<Status>,
    pub manufacturer: Option<Address>,
    pub current_owner: Option<Address>,
    pub history: Vec<Address>,
}

/// Gas-free query of a product's status and owner history.
pub fn verify_product(state: &RegistryState, product_id: &str) -> VerificationResult {
    match state.products.get(product_id) {
        Some(p) => VerificationResult {
            product_id: product_id.to_string(),
            exists: true,
            status: Some(p.status),
            manufacturer: Some(p.manufacturer),
            current_owner: Some(p.current_owner),
            history: p.history.clone(),
        },
        None => VerificationResult {
            product_id: product_id.to_string(),
            exists: false,
            status: None,
            manufacturer: None,
            current_owner: None,
            history: Vec::new(),
        },
    }
}

/// Verification of an id that is expected to be fake.
pub fn counterfeit_probe(state: &RegistryState, fake_id: &str) -> VerificationResult {
    verify_product(state, fake_id)
}

impl Account {
    pub(crate) fn authority(address: Address) -> Self {
        Account::new(address, Role::Authority, 0)
    }
}
