//! Seeded random transaction logs for equivalence testing.
//!
//! Logs mix well-formed lifecycles with every rejection path: forged
//! signatures, unknown senders, stale nonces, underfunded senders, role
//! violations, bad ids, double sells, and faucet claims around the
//! cooldown boundary.

use std::collections::BTreeMap;

use super::oracle::LoggedTx;
use super::rng::SplitMix64;
use crate::crypto::KeyPair;
use crate::ledger::{expected_sealer, AuthorityEntry, GenesisConfig};
use crate::registry::{ExecContext, Role, TxEnvelope, TxKind};
use crate::types::{Address, Wei};

/// Size bounds of a generated log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogShape {
    pub max_txs: usize,
    /// Keys generated, including one that is never given an account.
    pub max_accounts: usize,
    pub max_products: usize,
}

impl Default for LogShape {
    fn default() -> Self {
        Self {
            max_txs: 200,
            max_accounts: 10,
            max_products: 20,
        }
    }
}

/// A generated case: the genesis, every key, and the log.
#[derive(Debug, Clone)]
pub struct RandomLog {
    pub genesis: GenesisConfig,
    pub keys: Vec<KeyPair>,
    pub log: Vec<LoggedTx>,
}

const BALANCES: [Wei; 5] = [
    0,
    1_000_000_000_000,
    100_000_000_000_000,
    10_000_000_000_000_000,
    1_000_000_000_000_000_000,
];
const GAS_PRICES: [u64; 4] = [1, 1_000_000_000, 1_100_000_000, 50_000_000_000];
const TIME_STEPS: [u64; 6] = [0, 1, 3_600, 86_399, 86_400, 100_000];

pub fn random_tx_log(seed: u64, shape: LogShape) -> RandomLog {
    assert!(shape.max_accounts >= 3 && shape.max_products >= 1);
    let mut rng = SplitMix64::new(seed);
    let key_count = 3 + rng.index(shape.max_accounts - 2);
    let keys: Vec<KeyPair> = (0..key_count)
        .map(|_| KeyPair::from_secret(rng.bytes32()))
        .collect();

    // keys[0] is an authority, keys[1] a manufacturer, the last key never
    // gets an account; the rest draw random roles.
    let mut roles = BTreeMap::new();
    roles.insert(keys[0].address(), Role::Authority);
    roles.insert(keys[1].address(), Role::Manufacturer);
    for key in &keys[2..key_count - 1] {
        roles.insert(key.address(), *rng.pick(&Role::ALL));
    }
    let authorities: Vec<AuthorityEntry> = keys
        .iter()
        .filter(|k| roles.get(&k.address()) == Some(&Role::Authority))
        .map(|k| AuthorityEntry {
            address: k.address(),
            public_key: k.public_key(),
        })
        .collect();
    let mut genesis = GenesisConfig::new(authorities);
    genesis.initial_balances = roles
        .keys()
        .map(|a| (*a, *rng.pick(&BALANCES)))
        .filter(|(_, b)| *b > 0)
        .collect();
    genesis.roles = roles;

    let product_count = 1 + rng.index(shape.max_products);
    let mut ids: Vec<String> = (0..product_count).map(|i| format!("P-{i}")).collect();
    ids.push("bad id!".into());
    ids.push("x".repeat(65));

    let addresses: Vec<Address> = keys.iter().map(|k| k.address()).collect();
    let mut nonces = vec![0u64; keys.len()];
    let mut owner_guess: BTreeMap<String, usize> = BTreeMap::new();
    let tx_count = rng.index(shape.max_txs + 1);
    let mut time = 0u64;
    let mut block_index = 1u64;
    let mut log = Vec::with_capacity(tx_count);

    for _ in 0..tx_count {
        time += *rng.pick(&TIME_STEPS);
        if rng.chance(1, 2) {
            block_index += 1;
        }
        let ctx = ExecContext {
            block_index,
            timestamp: time,
            sealer: expected_sealer(&genesis.authorities, block_index).address,
        };

        let id = rng.pick(&ids).clone();
        let mut sender = rng.index(keys.len());
        let kind = match rng.below(20) {
            0 => TxKind::Deploy {
                code_size: 1 + rng.below(3000) as u32,
            },
            1..=5 => {
                let name = if rng.chance(1, 30) {
                    "n".repeat(257)
                } else {
                    format!("item {id}")
                };
                TxKind::Register {
                    product_id: id,
                    name,
                    metadata: String::new(),
                }
            }
            6..=10 => {
                if let Some(owner) = owner_guess.get(&id).filter(|_| rng.chance(3, 4)) {
                    sender = *owner;
                }
                let to = rng.index(keys.len());
                owner_guess.insert(id.clone(), to);
                TxKind::Transfer {
                    product_id: id,
                    new_owner: addresses[to],
                }
            }
            11..=15 => {
                if let Some(owner) = owner_guess.get(&id).filter(|_| rng.chance(3, 4)) {
                    sender = *owner;
                }
                let to = rng.index(keys.len());
                TxKind::Sell {
                    product_id: id,
                    consumer: addresses[to],
                }
            }
            _ => TxKind::FaucetClaim,
        };
        if let TxKind::Register { product_id, .. } = &kind {
            owner_guess.entry(product_id.clone()).or_insert(sender);
        }

        let gas_price = *rng.pick(&GAS_PRICES);
        let forged = rng.chance(1, 20);
        let stale = rng.chance(1, 20);
        let nonce = if stale {
            nonces[sender] + 1 + rng.below(2)
        } else {
            nonces[sender]
        };
        let mut tx = TxEnvelope::sign(&keys[sender], genesis.chain_id, nonce, kind, gas_price);
        if forged {
            let other = (sender + 1) % keys.len();
            let forged_tx = TxEnvelope::sign(
                &keys[other],
                genesis.chain_id,
                nonce,
                tx.kind.clone(),
                gas_price,
            );
            tx.signature = forged_tx.signature;
        }
        let has_account = sender != keys.len() - 1;
        if !forged && !stale && has_account {
            nonces[sender] += 1;
        }
        log.push(LoggedTx { tx, ctx });
    }

    RandomLog { genesis, keys, log }
}
