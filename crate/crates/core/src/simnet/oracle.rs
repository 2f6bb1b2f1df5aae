//! Brute-force reference state machine.
//!
//! A second, deliberately naive implementation of the registry rules:
//! accounts and products live in plain vectors searched linearly, gas is
//! recomputed from the raw parameters, and none of the registry module's
//! transition code is reused. Only the signature primitive and the byte
//! encoding are shared. It exists to be compared against the registry in
//! tests.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::canonical::{canonical_serialize, hash_concat, hash_of};
use crate::crypto::{address_of, verify};
use crate::gas::GasParams;
use crate::ledger::GenesisConfig;
use crate::registry::{
    Account, ContractInfo, ErrorCode, ExecContext, ProductRecord, RegistryState, Role, Status,
    TxEnvelope, TxKind,
};
use crate::types::{Address, Hash, Wei};

/// A transaction and the context it executed in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedTx {
    pub tx: TxEnvelope,
    pub ctx: ExecContext,
}

/// What the oracle thinks happened to one transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefOutcome {
    pub accepted: bool,
    pub error: Option<ErrorCode>,
    pub gas_used: u64,
    pub fee: Wei,
}

#[derive(Debug, Clone)]
struct RefAccount {
    address: Address,
    role: Role,
    balance: Wei,
    nonce: u64,
    last_claim: Option<u64>,
}

#[derive(Debug, Clone)]
struct RefProduct {
    id: String,
    name: String,
    metadata: String,
    maker: Address,
    owners: Vec<Address>,
    sold: bool,
    block: u64,
}

#[derive(Debug, Clone)]
pub struct ReferenceMachine {
    chain_id: u64,
    gas: GasParams,
    faucet_amount: Wei,
    faucet_cooldown: u64,
    accounts: Vec<RefAccount>,
    contract: Option<(Address, Address)>,
    products: Vec<RefProduct>,
    /// Shared between clones: validity depends only on the envelope, and
    /// branching searches clone the machine at every node.
    signature_memo: Rc<RefCell<HashMap<Hash, bool>>>,
    faucet_grants: u64,
}

impl ReferenceMachine {
    pub fn new(genesis: &GenesisConfig) -> Self {
        let mut accounts: Vec<RefAccount> = Vec::new();
        let mut add = |address: Address, role: Role| {
            if !accounts.iter().any(|a| a.address == address) {
                let balance = genesis
                    .initial_balances
                    .iter()
                    .find(|(a, _)| **a == address)
                    .map_or(0, |(_, b)| *b);
                accounts.push(RefAccount {
                    address,
                    role,
                    balance,
                    nonce: 0,
                    last_claim: None,
                });
            }
        };
        for (address, role) in &genesis.roles {
            add(*address, *role);
        }
        for a in &genesis.authorities {
            add(a.address, Role::Authority);
        }
        Self {
            chain_id: genesis.chain_id,
            gas: genesis.gas_params.clone(),
            faucet_amount: genesis.faucet_amount,
            faucet_cooldown: genesis.faucet_cooldown,
            accounts,
            contract: None,
            products: Vec::new(),
            signature_memo: Rc::default(),
            faucet_grants: 0,
        }
    }

    /// Accepted faucet claims so far.
    pub fn faucet_grants(&self) -> u64 {
        self.faucet_grants
    }

    fn account(&self, address: &Address) -> Option<usize> {
        self.accounts.iter().position(|a| a.address == *address)
    }

    fn product(&self, id: &str) -> Option<usize> {
        self.products.iter().position(|p| p.id == id)
    }

    fn signed_correctly(&mut self, tx: &TxEnvelope) -> bool {
        let key = hash_of(tx);
        if let Some(ok) = self.signature_memo.borrow().get(&key) {
            return *ok;
        }
        let msg = canonical_serialize(&serde_json::json!({
            "chain_id": self.chain_id,
            "sender": tx.sender,
            "nonce": tx.nonce,
            "kind": tx.kind,
            "gas_price": tx.gas_price,
        }));
        let ok =
            address_of(&tx.public_key) == tx.sender && verify(&tx.public_key, &msg, &tx.signature);
        self.signature_memo.borrow_mut().insert(key, ok);
        ok
    }

    fn id_ok(id: &str) -> bool {
        let n = id.chars().count();
        (1..=64).contains(&n)
            && id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-')
    }

    fn role(&self, address: &Address) -> Option<Role> {
        self.account(address).map(|i| self.accounts[i].role)
    }

    /// First failing rule for a non-faucet operation, if any.
    fn refusal(&self, sender: &Address, kind: &TxKind) -> Option<ErrorCode> {
        let trusted = |r: Option<Role>| {
            r == Some(Role::Manufacturer)
                || r == Some(Role::Distributor)
                || r == Some(Role::Retailer)
        };
        let move_check = |id: &str| -> Option<ErrorCode> {
            if self.contract.is_none() {
                return Some(ErrorCode::NotDeployed);
            }
            let p = match self.product(id) {
                None => return Some(ErrorCode::UnknownProduct),
                Some(i) => &self.products[i],
            };
            if p.sold {
                return Some(ErrorCode::ProductUnavailable);
            }
            if p.owners.last() != Some(sender) {
                return Some(ErrorCode::NotOwner);
            }
            None
        };
        match kind {
            TxKind::Deploy { .. } => {
                if self.contract.is_some() {
                    Some(ErrorCode::AlreadyDeployed)
                } else if !(trusted(self.role(sender))
                    || self.role(sender) == Some(Role::Authority))
                {
                    Some(ErrorCode::NotTrustedNode)
                } else {
                    None
                }
            }
            TxKind::Register {
                product_id,
                name,
                metadata,
            } => {
                if self.contract.is_none() {
                    Some(ErrorCode::NotDeployed)
                } else if !Self::id_ok(product_id) {
                    Some(ErrorCode::BadProductId)
                } else if self.product(product_id).is_some() {
                    Some(ErrorCode::DuplicateProductId)
                } else if self.role(sender) != Some(Role::Manufacturer) {
                    Some(ErrorCode::NotManufacturer)
                } else if name.len() > 256 || metadata.len() > 1024 {
                    Some(ErrorCode::BadMetadata)
                } else {
                    None
                }
            }
            TxKind::Transfer {
                product_id,
                new_owner,
            } => move_check(product_id)
                .or_else(|| (!trusted(self.role(new_owner))).then_some(ErrorCode::NotTrustedNode)),
            TxKind::Sell {
                product_id,
                consumer,
            } => move_check(product_id).or_else(|| {
                (self.role(consumer) != Some(Role::Consumer)).then_some(ErrorCode::NotConsumer)
            }),
            TxKind::FaucetClaim => None,
        }
    }

    fn gas(&self, kind: &TxKind, accepted: bool) -> u64 {
        let g = &self.gas;
        let calldata = canonical_serialize(kind);
        let zeros = calldata.iter().filter(|b| **b == 0).count() as u64;
        let nonzeros = calldata.len() as u64 - zeros;
        let mut total =
            g.base_tx + zeros * g.calldata_zero_byte + nonzeros * g.calldata_nonzero_byte;
        if accepted {
            let l = &g.layout;
            total += match kind {
                TxKind::Deploy { code_size } => g.create_base + u64::from(*code_size) * g.code_byte,
                TxKind::Register { .. } => u64::from(l.register_new) * g.sstore_new,
                TxKind::Transfer { .. } => {
                    u64::from(l.transfer_update) * g.sstore_update
                        + u64::from(l.transfer_new) * g.sstore_new
                }
                TxKind::Sell { .. } => {
                    u64::from(l.sell_update) * g.sstore_update
                        + u64::from(l.sell_new) * g.sstore_new
                }
                TxKind::FaucetClaim => 0,
            };
        }
        total
    }

    fn reject(code: ErrorCode, gas_used: u64, fee: Wei) -> RefOutcome {
        RefOutcome {
            accepted: false,
            error: Some(code),
            gas_used,
            fee,
        }
    }

    pub fn step(&mut self, tx: &TxEnvelope, ctx: &ExecContext) -> RefOutcome {
        if !self.signed_correctly(tx) {
            return Self::reject(ErrorCode::BadSignature, 0, 0);
        }
        let Some(who) = self.account(&tx.sender) else {
            return Self::reject(ErrorCode::UnknownAccount, 0, 0);
        };
        if self.accounts[who].nonce != tx.nonce {
            return Self::reject(ErrorCode::BadNonce, 0, 0);
        }
        self.accounts[who].nonce += 1;

        if tx.kind == TxKind::FaucetClaim {
            let now = ctx.timestamp;
            let acct = &mut self.accounts[who];
            let waited = match acct.last_claim {
                None => u64::MAX,
                Some(t) if now > t => now - t,
                Some(_) => 0,
            };
            if waited < self.faucet_cooldown {
                return Self::reject(ErrorCode::FaucetCooldown, 0, 0);
            }
            acct.balance += self.faucet_amount;
            acct.last_claim = Some(now);
            self.faucet_grants += 1;
            return RefOutcome {
                accepted: true,
                error: None,
                gas_used: 0,
                fee: 0,
            };
        }

        let refusal = self.refusal(&tx.sender, &tx.kind);
        let gas_used = self.gas(&tx.kind, refusal.is_none());
        let fee = Wei::from(gas_used) * Wei::from(tx.gas_price);
        if self.accounts[who].balance < fee {
            return Self::reject(ErrorCode::InsufficientFunds, 0, 0);
        }
        if fee > 0 {
            self.accounts[who].balance -= fee;
            let sealer = match self.account(&ctx.sealer) {
                Some(i) => i,
                None => {
                    self.accounts.push(RefAccount {
                        address: ctx.sealer,
                        role: Role::Authority,
                        balance: 0,
                        nonce: 0,
                        last_claim: None,
                    });
                    self.accounts.len() - 1
                }
            };
            self.accounts[sealer].balance += fee;
        }
        if let Some(code) = refusal {
            return Self::reject(code, gas_used, fee);
        }

        match &tx.kind {
            TxKind::Deploy { .. } => {
                let digest = hash_concat(&[tx.sender.as_bytes(), &tx.nonce.to_be_bytes()]);
                let mut addr = [0u8; 20];
                addr.copy_from_slice(&digest.0[12..32]);
                self.contract = Some((Address(addr), tx.sender));
            }
            TxKind::Register {
                product_id,
                name,
                metadata,
            } => self.products.push(RefProduct {
                id: product_id.clone(),
                name: name.clone(),
                metadata: metadata.clone(),
                maker: tx.sender,
                owners: vec![tx.sender],
                sold: false,
                block: ctx.block_index,
            }),
            TxKind::Transfer {
                product_id,
                new_owner,
            } => {
                let i = self.product(product_id).expect("checked");
                self.products[i].owners.push(*new_owner);
            }
            TxKind::Sell {
                product_id,
                consumer,
            } => {
                let i = self.product(product_id).expect("checked");
                self.products[i].owners.push(*consumer);
                self.products[i].sold = true;
            }
            TxKind::FaucetClaim => unreachable!("handled above"),
        }
        RefOutcome {
            accepted: true,
            error: None,
            gas_used,
            fee,
        }
    }

    pub fn run(&mut self, log: &[LoggedTx]) -> Vec<RefOutcome> {
        log.iter().map(|l| self.step(&l.tx, &l.ctx)).collect()
    }

    /// The oracle's state in the registry's representation, for comparing
    /// commitments.
    pub fn to_state(&self) -> RegistryState {
        let mut state = RegistryState::new(self.chain_id);
        state.contract = self
            .contract
            .map(|(address, deployer)| ContractInfo { address, deployer });
        for a in &self.accounts {
            state.accounts.insert(
                a.address,
                Account {
                    address: a.address,
                    role: a.role,
                    balance: a.balance,
                    nonce: a.nonce,
                    last_faucet_claim: a.last_claim,
                },
            );
        }
        for p in &self.products {
            state.products.insert(
                p.id.clone(),
                ProductRecord {
                    product_id: p.id.clone(),
                    name: p.name.clone(),
                    metadata: p.metadata.clone(),
                    manufacturer: p.maker,
                    current_owner: *p.owners.last().expect("never empty"),
                    status: if p.sold {
                        Status::Unavailable
                    } else {
                        Status::Available
                    },
                    history: p.owners.clone(),
                    registered_at: p.block,
                },
            );
        }
        state
    }
}

/// Folds `log` from genesis with the reference rules.
pub fn reference_state_machine(log: &[LoggedTx], genesis: &GenesisConfig) -> RegistryState {
    let mut machine = ReferenceMachine::new(genesis);
    machine.run(log);
    machine.to_state()
}

/// Flattens a chain's blocks into a transaction log.
pub fn chain_tx_log(blocks: &[crate::ledger::Block]) -> Vec<LoggedTx> {
    blocks
        .iter()
        .flat_map(|b| {
            let ctx = ExecContext {
                block_index: b.header.index,
                timestamp: b.header.timestamp,
                sealer: b.header.sealer,
            };
            b.txs.iter().map(move |tx| LoggedTx {
                tx: tx.clone(),
                ctx,
            })
        })
        .collect()
}
