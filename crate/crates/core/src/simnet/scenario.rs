use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rng::SplitMix64;
use crate::canonical::canonical_string;
use crate::crypto::KeyPair;
use crate::ledger::{
    encode_chain, expected_sealer, AuthorityEntry, Block, GenesisConfig, LedgerError, LedgerStore,
};
use crate::registry::{
    execute, verify_product, ExecContext, Receipt, RegistryState, Role, Status, TxEnvelope, TxKind,
    VerificationResult,
};
use crate::types::Address;

fn one() -> u32 {
    1
}

fn default_clock_step() -> u64 {
    3600
}

/// How many accounts of each role the simulation creates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActorCounts {
    pub manufacturers: u32,
    pub distributors: u32,
    pub retailers: u32,
    pub consumers: u32,
    pub authorities: u32,
}

impl Default for ActorCounts {
    fn default() -> Self {
        Self {
            manufacturers: 1,
            distributors: 1,
            retailers: 1,
            consumers: 1,
            authorities: 1,
        }
    }
}

/// One byte overwrite in the persisted ledger file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mutation {
    /// Block index, i.e. zero-based line number.
    pub target: u64,
    /// Offset within the line, terminator excluded.
    pub byte_offset: u64,
    pub new_byte: u8,
}

/// A simulation run, fully determined by its fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    #[serde(default)]
    pub actors: ActorCounts,
    #[serde(default = "one")]
    pub products: u32,
    /// Extra adversarial actions interleaved with the lifecycles:
    /// counterfeit probes, double-sell and duplicate-registration attempts,
    /// faucet claims.
    #[serde(default)]
    pub steps: u32,
    #[serde(default)]
    pub tamper_plan: Option<Vec<Mutation>>,
    /// Logical seconds per simulated action.
    #[serde(default = "default_clock_step")]
    pub clock_step: u64,
    /// Transactions per block.
    #[serde(default = "one")]
    pub block_size: u32,
}

impl Scenario {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            actors: ActorCounts::default(),
            products: 1,
            steps: 0,
            tamper_plan: None,
            clock_step: default_clock_step(),
            block_size: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let a = &self.actors;
        let invalid = |m: &str| Err(SimError::ScenarioInvalid(m.to_string()));
        if a.manufacturers == 0 || a.authorities == 0 {
            return invalid("at least one manufacturer and one authority are required");
        }
        let total = [
            a.manufacturers,
            a.distributors,
            a.retailers,
            a.consumers,
            a.authorities,
        ]
        .iter()
        .map(|c| u64::from(*c))
        .sum::<u64>();
        if total > 10_000 {
            return invalid("more than 10000 actors");
        }
        if self.block_size == 0 {
            return invalid("block_size must be positive");
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)?;
        let sc: Scenario = serde_json::from_str(&text)
            .map_err(|e| SimError::ScenarioInvalid(format!("{}: {e}", path.display())))?;
        sc.validate()?;
        Ok(sc)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    ScenarioInvalid(String),
    #[error("mutation targets block {target} offset {offset}, outside the ledger file")]
    MutationOutOfRange { target: u64, offset: u64 },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceAction {
    Tx(TxKind),
    Verify { product_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceOutcome {
    Receipt(Receipt),
    Verification(VerificationResult),
}

/// One simulated action and what came of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: u64,
    pub time: u64,
    pub actor: Address,
    /// Block the transaction was sealed into; `None` for verifications.
    pub block: Option<u64>,
    pub action: TraceAction,
    pub outcome: TraceOutcome,
}

#[derive(Debug, Clone)]
pub struct Actor {
    pub role: Role,
    pub key: KeyPair,
}

impl Actor {
    pub fn address(&self) -> Address {
        self.key.address()
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub genesis: GenesisConfig,
    pub actors: Vec<Actor>,
    /// The chain as sealed, before tampering.
    pub blocks: Vec<Block>,
    /// Ledger file bytes, with the tamper plan applied.
    pub chain_bytes: Vec<u8>,
    pub trace: Vec<TraceEvent>,
    pub final_state: RegistryState,
}

impl SimOutput {
    /// Trace as line-delimited canonical JSON.
    pub fn trace_lines(&self) -> String {
        self.trace.iter().fold(String::new(), |mut out, ev| {
            out.push_str(&canonical_string(ev));
            out.push('\n');
            out
        })
    }

    /// Writes `genesis.json`, `chain.log` and `trace.jsonl` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("genesis.json"), self.genesis.to_pretty_json())?;
        std::fs::write(dir.join("chain.log"), &self.chain_bytes)?;
        std::fs::write(dir.join("trace.jsonl"), self.trace_lines())?;
        Ok(())
    }
}

/// Overwrites one byte of a ledger file image.
pub fn apply_mutation(bytes: &mut [u8], m: &Mutation) -> Result<(), SimError> {
    let out_of_range = SimError::MutationOutOfRange {
        target: m.target,
        offset: m.byte_offset,
    };
    let mut start = 0usize;
    for _ in 0..m.target {
        match bytes[start..].iter().position(|b| *b == b'\n') {
            Some(i) => start += i + 1,
            None => return Err(out_of_range),
        }
    }
    let line_len = bytes[start..]
        .iter()
        .position(|b| *b == b'\n')
        .unwrap_or(bytes.len() - start);
    if m.byte_offset >= line_len as u64 {
        return Err(out_of_range);
    }
    bytes[start + m.byte_offset as usize] = m.new_byte;
    Ok(())
}

#[derive(Debug, Clone)]
enum Step {
    Register { by: usize },
    Transfer { to: usize },
    Sell { to: usize },
    Verify { by: usize },
}

struct Sim {
    rng: SplitMix64,
    actors: Vec<Actor>,
    store: LedgerStore,
    gas_price: u64,
    clock: u64,
    clock_step: u64,
    block_size: usize,
    /// Chain state plus the effects of pending transactions.
    working: RegistryState,
    pending: Vec<TxEnvelope>,
    pending_receipts: Vec<Receipt>,
    /// Index and timestamp of the block being filled.
    batch: Option<ExecContext>,
    trace: Vec<TraceEvent>,
}

impl Sim {
    fn by_role(&self, role: Role) -> Vec<usize> {
        (0..self.actors.len())
            .filter(|i| self.actors[*i].role == role)
            .collect()
    }

    fn index_of(&self, address: &Address) -> Option<usize> {
        self.actors.iter().position(|a| a.address() == *address)
    }

    fn submit(&mut self, actor: usize, kind: TxKind) -> Result<Receipt, SimError> {
        let ctx = match self.batch {
            Some(ctx) => ctx,
            None => {
                let index = self.store.tip().index + 1;
                let ctx = ExecContext {
                    block_index: index,
                    timestamp: self.clock,
                    sealer: expected_sealer(&self.store.genesis().authorities, index).address,
                };
                self.batch = Some(ctx);
                ctx
            }
        };
        let key = &self.actors[actor].key;
        let nonce = self.working.nonce_of(&key.address());
        let tx = TxEnvelope::sign(
            key,
            self.working.chain_id,
            nonce,
            kind.clone(),
            self.gas_price,
        );
        let rules = self.store.genesis().rules();
        let receipt = execute(&mut self.working, &tx, &ctx, &rules);
        debug_assert!(!receipt.error.is_some_and(|c| c.is_unauthenticated()));
        self.pending.push(tx);
        self.pending_receipts.push(receipt.clone());
        self.trace.push(TraceEvent {
            step: self.trace.len() as u64,
            time: self.clock,
            actor: key.address(),
            block: Some(ctx.block_index),
            action: TraceAction::Tx(kind),
            outcome: TraceOutcome::Receipt(receipt.clone()),
        });
        if self.pending.len() >= self.block_size {
            self.seal()?;
        }
        self.clock += self.clock_step;
        Ok(receipt)
    }

    fn seal(&mut self) -> Result<(), SimError> {
        let Some(ctx) = self.batch.take() else {
            return Ok(());
        };
        let sealer_idx = self
            .index_of(&ctx.sealer)
            .expect("sealers are simulated actors");
        let txs = std::mem::take(&mut self.pending);
        let (block, receipts) =
            self.store
                .seal_next(&txs, &self.actors[sealer_idx].key, ctx.timestamp)?;
        debug_assert_eq!(receipts, self.pending_receipts);
        self.pending_receipts.clear();
        self.store.append_block(block)?;
        debug_assert_eq!(self.store.state(), &self.working);
        Ok(())
    }

    /// Consumers read confirmed state, so anything pending is sealed first.
    fn verify(&mut self, actor: usize, product_id: &str) -> Result<VerificationResult, SimError> {
        self.seal()?;
        let result = verify_product(self.store.state(), product_id);
        self.trace.push(TraceEvent {
            step: self.trace.len() as u64,
            time: self.clock,
            actor: self.actors[actor].address(),
            block: None,
            action: TraceAction::Verify {
                product_id: product_id.to_string(),
            },
            outcome: TraceOutcome::Verification(result.clone()),
        });
        self.clock += self.clock_step;
        Ok(result)
    }

    /// Route for one product: manufacturer, then a distributor and a
    /// retailer when present, sometimes one extra hop within the last tier,
    /// then a consumer.
    fn plan_lifecycle(&mut self) -> VecDeque<Step> {
        let manufacturers = self.by_role(Role::Manufacturer);
        let distributors = self.by_role(Role::Distributor);
        let retailers = self.by_role(Role::Retailer);
        let consumers = self.by_role(Role::Consumer);

        let maker = *self.rng.pick(&manufacturers);
        let mut steps = VecDeque::from([Step::Register { by: maker }]);
        let mut owner = maker;
        let mut last_tier: &[usize] = &[];
        for tier in [&distributors, &retailers] {
            if !tier.is_empty() {
                owner = *self.rng.pick(tier);
                steps.push_back(Step::Transfer { to: owner });
                last_tier = tier;
            }
        }
        let others: Vec<usize> = last_tier.iter().copied().filter(|i| *i != owner).collect();
        if !others.is_empty() && self.rng.chance(1, 2) {
            steps.push_back(Step::Transfer {
                to: *self.rng.pick(&others),
            });
        }
        if !consumers.is_empty() {
            let buyer = *self.rng.pick(&consumers);
            steps.push_back(Step::Sell { to: buyer });
            steps.push_back(Step::Verify { by: buyer });
        }
        steps
    }

    fn run_step(&mut self, product_id: &str, step: Step) -> Result<(), SimError> {
        match step {
            Step::Register { by } => {
                let n = self.trace.len();
                self.submit(
                    by,
                    TxKind::Register {
                        product_id: product_id.to_string(),
                        name: format!("Product {product_id}"),
                        metadata: format!("lot={n}"),
                    },
                )?;
            }
            Step::Transfer { to } | Step::Sell { to } => {
                let owner = self.working.products[product_id].current_owner;
                let from = self.index_of(&owner).expect("owners are actors");
                let target = self.actors[to].address();
                let kind = if matches!(step, Step::Sell { .. }) {
                    TxKind::Sell {
                        product_id: product_id.to_string(),
                        consumer: target,
                    }
                } else {
                    TxKind::Transfer {
                        product_id: product_id.to_string(),
                        new_owner: target,
                    }
                };
                self.submit(from, kind)?;
            }
            Step::Verify { by } => {
                self.verify(by, product_id)?;
            }
        }
        Ok(())
    }

    fn noise(&mut self) -> Result<(), SimError> {
        let non_authorities: Vec<usize> = (0..self.actors.len())
            .filter(|i| self.actors[*i].role != Role::Authority)
            .collect();
        let consumers = self.by_role(Role::Consumer);
        let manufacturers = self.by_role(Role::Manufacturer);
        let sold: Vec<String> = self
            .working
            .products
            .values()
            .filter(|p| p.status == Status::Unavailable)
            .map(|p| p.product_id.clone())
            .collect();
        let registered: Vec<String> = self.working.products.keys().cloned().collect();

        match self.rng.below(4) {
            1 if !sold.is_empty() && !consumers.is_empty() => {
                let id = self.rng.pick(&sold).clone();
                let history = &self.working.products[&id].history;
                let seller = self
                    .index_of(&history[history.len() - 2])
                    .expect("sellers are actors");
                let buyer = *self.rng.pick(&consumers);
                let consumer = self.actors[buyer].address();
                self.submit(
                    seller,
                    TxKind::Sell {
                        product_id: id,
                        consumer,
                    },
                )?;
            }
            2 if !registered.is_empty() => {
                let id = self.rng.pick(&registered).clone();
                let by = *self.rng.pick(&manufacturers);
                self.submit(
                    by,
                    TxKind::Register {
                        product_id: id,
                        name: "Counterfeit copy".into(),
                        metadata: String::new(),
                    },
                )?;
            }
            3 if !non_authorities.is_empty() => {
                let by = *self.rng.pick(&non_authorities);
                self.submit(by, TxKind::FaucetClaim)?;
            }
            _ => {
                let by = if consumers.is_empty() {
                    self.rng.index(self.actors.len())
                } else {
                    *self.rng.pick(&consumers)
                };
                let fake = format!("FAKE-{}", self.rng.below(1_000_000));
                self.verify(by, &fake)?;
            }
        }
        Ok(())
    }
}

/// Runs a scenario end to end: actor creation and faucet bootstrapping,
/// one deploy, interleaved product lifecycles and adversarial steps, then
/// the tamper plan against the serialized ledger.
pub fn run_scenario(sc: &Scenario) -> Result<SimOutput, SimError> {
    sc.validate()?;
    let mut rng = SplitMix64::new(sc.seed);
    let counts = [
        (Role::Authority, sc.actors.authorities),
        (Role::Manufacturer, sc.actors.manufacturers),
        (Role::Distributor, sc.actors.distributors),
        (Role::Retailer, sc.actors.retailers),
        (Role::Consumer, sc.actors.consumers),
    ];
    let actors: Vec<Actor> = counts
        .iter()
        .flat_map(|(role, n)| std::iter::repeat_n(*role, *n as usize))
        .map(|role| Actor {
            role,
            key: KeyPair::from_secret(rng.bytes32()),
        })
        .collect();

    let mut genesis = GenesisConfig::new(
        actors
            .iter()
            .filter(|a| a.role == Role::Authority)
            .map(|a| AuthorityEntry {
                address: a.address(),
                public_key: a.key.public_key(),
            })
            .collect(),
    );
    genesis.roles = actors.iter().map(|a| (a.address(), a.role)).collect();
    let store = LedgerStore::in_memory(&genesis)?;

    let mut sim = Sim {
        rng,
        working: store.state().clone(),
        gas_price: genesis.gas_params.default_gas_price,
        actors,
        store,
        clock: 0,
        clock_step: sc.clock_step,
        block_size: sc.block_size as usize,
        pending: Vec::new(),
        pending_receipts: Vec::new(),
        batch: None,
        trace: Vec::new(),
    };

    for i in 0..sim.actors.len() {
        if sim.actors[i].role != Role::Authority {
            sim.submit(i, TxKind::FaucetClaim)?;
        }
    }
    let manufacturers = sim.by_role(Role::Manufacturer);
    let deployer = *sim.rng.pick(&manufacturers);
    let code_size = genesis.gas_params.default_code_size;
    sim.submit(deployer, TxKind::Deploy { code_size })?;

    let mut lifecycles: Vec<(String, VecDeque<Step>)> = (1..=sc.products)
        .map(|i| (format!("P-{i:04}"), sim.plan_lifecycle()))
        .collect();
    let mut noise_left = u64::from(sc.steps);
    loop {
        lifecycles.retain(|(_, steps)| !steps.is_empty());
        let lifecycle_left: u64 = lifecycles.iter().map(|(_, s)| s.len() as u64).sum();
        if lifecycle_left + noise_left == 0 {
            break;
        }
        if sim.rng.below(lifecycle_left + noise_left) < noise_left {
            noise_left -= 1;
            sim.noise()?;
        } else {
            let pick = sim.rng.index(lifecycles.len());
            let (id, steps) = &mut lifecycles[pick];
            let step = steps.pop_front().expect("non-empty");
            let id = id.clone();
            sim.run_step(&id, step)?;
        }
    }
    sim.seal()?;

    let blocks = sim.store.blocks().to_vec();
    let mut chain_bytes = encode_chain(&blocks).into_bytes();
    for m in sc.tamper_plan.iter().flatten() {
        apply_mutation(&mut chain_bytes, m)?;
    }
    Ok(SimOutput {
        genesis,
        actors: sim.actors,
        blocks,
        chain_bytes,
        trace: sim.trace,
        final_state: sim.store.state().clone(),
    })
}
