//! Cross-checks between the registry and the reference state machine.

use std::collections::HashMap;

use super::fuzz::{random_tx_log, LogShape};
use super::oracle::{RefOutcome, ReferenceMachine};
use crate::crypto::KeyPair;
use crate::ledger::{AuthorityEntry, GenesisConfig};
use crate::registry::{
    apply_verified, execute, ExecContext, Receipt, RegistryState, Role, TxCategory, TxEnvelope,
    TxKind, VerifiedTx,
};
use crate::types::{Hash, Wei, WEI_PER_ETH};

/// Where the two implementations first disagreed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    /// Position in the log (or depth in the exhaustive search), 0-based.
    pub step: usize,
    pub detail: String,
}

/// Summary of one agreeing random log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogCheck {
    pub txs: usize,
    pub accepted: usize,
    pub faucet_grants: u64,
    pub commitment: Hash,
    pub initial_supply: Wei,
    pub final_supply: Wei,
}

impl LogCheck {
    /// Supply only grows through faucet grants; fees merely move value.
    pub fn conserves_supply(&self, faucet_amount: Wei) -> bool {
        self.final_supply == self.initial_supply + faucet_amount * Wei::from(self.faucet_grants)
    }
}

fn same_outcome(receipt: &Receipt, reference: &RefOutcome) -> bool {
    receipt.accepted == reference.accepted
        && receipt.error == reference.error
        && receipt.gas_used == reference.gas_used
        && receipt.fee == reference.fee
}

/// Folds the seeded random log through both implementations, comparing
/// every receipt and the final commitments.
pub fn check_random_log(seed: u64, shape: LogShape) -> Result<LogCheck, Divergence> {
    let case = random_tx_log(seed, shape);
    let rules = case.genesis.rules();
    let mut state = case.genesis.genesis_state();
    let mut oracle = ReferenceMachine::new(&case.genesis);
    let mut accepted = 0;
    let mut grants = 0u64;
    for (step, entry) in case.log.iter().enumerate() {
        let receipt = execute(&mut state, &entry.tx, &entry.ctx, &rules);
        let reference = oracle.step(&entry.tx, &entry.ctx);
        if !same_outcome(&receipt, &reference) {
            return Err(Divergence {
                step,
                detail: format!("seed {seed}: registry {receipt:?}, oracle {reference:?}"),
            });
        }
        if receipt.accepted {
            accepted += 1;
            if entry.tx.kind.category() == TxCategory::FaucetClaim {
                grants += 1;
            }
        }
    }
    if grants != oracle.faucet_grants() {
        return Err(Divergence {
            step: case.log.len(),
            detail: format!(
                "seed {seed}: faucet grants {grants} vs {}",
                oracle.faucet_grants()
            ),
        });
    }
    let commitment = state.commitment();
    let reference = oracle.to_state().commitment();
    if commitment != reference {
        return Err(Divergence {
            step: case.log.len(),
            detail: format!("seed {seed}: commitment {commitment} vs {reference}"),
        });
    }
    Ok(LogCheck {
        txs: case.log.len(),
        accepted,
        faucet_grants: grants,
        commitment,
        initial_supply: case.genesis.initial_supply(),
        final_supply: state.total_supply(),
    })
}

/// The fixed world for exhaustive search: one product, three funded actors
/// (manufacturer, distributor, consumer) and a separate sealing authority.
pub struct SmallWorld {
    pub genesis: GenesisConfig,
    pub actors: [KeyPair; 3],
    pub product_id: &'static str,
}

impl SmallWorld {
    pub fn new() -> Self {
        let sealer = KeyPair::from_secret([0xee; 32]);
        let actors = [0x01u8, 0x02, 0x03].map(|b| KeyPair::from_secret([b; 32]));
        let mut genesis = GenesisConfig::new(vec![AuthorityEntry {
            address: sealer.address(),
            public_key: sealer.public_key(),
        }]);
        for (key, role) in
            actors
                .iter()
                .zip([Role::Manufacturer, Role::Distributor, Role::Consumer])
        {
            genesis.roles.insert(key.address(), role);
            genesis.initial_balances.insert(key.address(), WEI_PER_ETH);
        }
        Self {
            genesis,
            actors,
            product_id: "P-1",
        }
    }

    /// Every (sender, kind) drawn from Register/Transfer/Sell: 3 registers
    /// plus 3×3 transfers plus 3×3 sells.
    pub fn moves(&self) -> Vec<(usize, TxKind)> {
        let id = self.product_id.to_string();
        let mut moves = Vec::new();
        for s in 0..3 {
            moves.push((
                s,
                TxKind::Register {
                    product_id: id.clone(),
                    name: "item".into(),
                    metadata: String::new(),
                },
            ));
        }
        for s in 0..3 {
            for t in &self.actors {
                moves.push((
                    s,
                    TxKind::Transfer {
                        product_id: id.clone(),
                        new_owner: t.address(),
                    },
                ));
            }
        }
        for s in 0..3 {
            for t in &self.actors {
                moves.push((
                    s,
                    TxKind::Sell {
                        product_id: id.clone(),
                        consumer: t.address(),
                    },
                ));
            }
        }
        moves
    }
}

impl Default for SmallWorld {
    fn default() -> Self {
        Self::new()
    }
}

/// Result of an exhaustive sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExhaustiveCheck {
    /// Non-empty sequences compared, i.e. nodes of the search tree.
    pub sequences: u64,
    pub max_len: usize,
}

struct Search<'a> {
    world: &'a SmallWorld,
    moves: Vec<(usize, TxKind)>,
    max_len: usize,
    /// Envelopes signed once per (move, nonce) and verified once.
    signed: HashMap<(usize, u64), VerifiedTx>,
    sequences: u64,
    path: Vec<usize>,
}

impl Search<'_> {
    fn envelope(&mut self, mv: usize, nonce: u64) -> VerifiedTx {
        let world = self.world;
        let (sender, kind) = &self.moves[mv];
        self.signed
            .entry((mv, nonce))
            .or_insert_with(|| {
                let tx = TxEnvelope::sign(
                    &world.actors[*sender],
                    world.genesis.chain_id,
                    nonce,
                    kind.clone(),
                    world.genesis.gas_params.default_gas_price,
                );
                VerifiedTx::check(&tx, world.genesis.chain_id).expect("freshly signed")
            })
            .clone()
    }

    fn explore(
        &mut self,
        state: &RegistryState,
        oracle: &ReferenceMachine,
    ) -> Result<(), Divergence> {
        let depth = self.path.len();
        if depth == self.max_len {
            return Ok(());
        }
        let rules = self.world.genesis.rules();
        let ctx = ExecContext {
            block_index: depth as u64 + 1,
            timestamp: depth as u64,
            sealer: self.world.genesis.authorities[0].address,
        };
        for mv in 0..self.moves.len() {
            let sender = self.world.actors[self.moves[mv].0].address();
            let tx = self.envelope(mv, state.nonce_of(&sender));
            let (next, receipt) = apply_verified(state, &tx, &ctx, &rules);
            let mut next_oracle = oracle.clone();
            let reference = next_oracle.step(tx.tx(), &ctx);
            self.path.push(mv);
            self.sequences += 1;
            let fail = |detail: String| Divergence {
                step: depth,
                detail: format!("moves {:?}: {detail}", self.path),
            };
            if !same_outcome(&receipt, &reference) {
                return Err(fail(format!("registry {receipt:?}, oracle {reference:?}")));
            }
            let (a, b) = (next.commitment(), next_oracle.to_state().commitment());
            if a != b {
                return Err(fail(format!("commitment {a} vs {b}")));
            }
            self.explore(&next, &next_oracle)?;
            self.path.pop();
        }
        Ok(())
    }
}

/// Compares both implementations on every sequence of up to `max_len`
/// moves in [`SmallWorld`], sharing prefixes.
pub fn check_exhaustive(max_len: usize) -> Result<ExhaustiveCheck, Divergence> {
    let world = SmallWorld::new();
    let genesis_state = world.genesis.genesis_state();
    let oracle = ReferenceMachine::new(&world.genesis);
    if genesis_state.commitment() != oracle.to_state().commitment() {
        return Err(Divergence {
            step: 0,
            detail: "genesis states differ".into(),
        });
    }
    let mut search = Search {
        moves: world.moves(),
        world: &world,
        max_len,
        signed: HashMap::new(),
        sequences: 0,
        path: Vec::new(),
    };
    search.explore(&genesis_state, &oracle)?;
    Ok(ExhaustiveCheck {
        sequences: search.sequences,
        max_len,
    })
}
