use std::fs;
use std::path::{Path, PathBuf};

use acp_core::crypto::KeyFile;
use acp_core::gas::gas_report;
use acp_core::ledger::{
    expected_sealer, load_chain, validate_file, AuthorityEntry, GenesisConfig, LedgerError,
    LedgerStore, ValidationReport,
};
use acp_core::qr::{decode_payload, encode_payload};
use acp_core::registry::{verify_product, Role, Status, TxEnvelope, TxKind, VerificationResult};
use acp_core::simnet::{run_scenario, Scenario};
use acp_core::{canonical::canonical_string, KeyPair};

use crate::args::{Cli, Command, InitArgs, KeygenArgs, SimulateArgs, TxArgs, TxCommand};

/// Process exit statuses; part of the command-line contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Code {
    Chain = 1,
    Usage = 2,
    Negative = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub code: Code,
    pub message: String,
}

fn fail<T>(code: Code, message: impl Into<String>) -> Result<T, Failure> {
    Err(Failure {
        code,
        message: message.into(),
    })
}

impl From<LedgerError> for Failure {
    fn from(e: LedgerError) -> Self {
        let message = match e.as_failure() {
            Some(f) => format!(
                "chain invalid at block {} ({}): {}",
                f.block_index, f.rule, f.detail
            ),
            None => e.to_string(),
        };
        Failure {
            code: Code::Chain,
            message,
        }
    }
}

type Outcome = Result<(), Failure>;

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Init(args) => init(&cli.db, &cli.genesis, args),
        Command::Keygen(args) => keygen(args),
        Command::Tx(args) => tx(&cli.db, &cli.genesis, args),
        Command::Verify { qr } => verify(&cli.db, &cli.genesis, &qr),
        Command::Qr { id } => qr(&cli.db, &cli.genesis, &id),
        Command::History { id } => history(&cli.db, &cli.genesis, &id),
        Command::GasReport { csv } => report(&cli.db, &cli.genesis, csv.as_deref()),
        Command::Validate => validate(&cli.db, &cli.genesis),
        Command::Simulate(args) => simulate(args),
    }
}

fn load_genesis(path: &Path) -> Result<GenesisConfig, Failure> {
    GenesisConfig::load(path).or_else(|e| fail(Code::Chain, e.to_string()))
}

fn open(db: &Path, genesis: &Path) -> Result<LedgerStore, Failure> {
    let genesis = load_genesis(genesis)?;
    Ok(load_chain(db, &genesis)?)
}

fn read_key(path: &Path) -> Result<(KeyFile, KeyPair), Failure> {
    let bad = |m: String| Failure {
        code: Code::Usage,
        message: format!("key file {}: {m}", path.display()),
    };
    let text = fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let file: KeyFile = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let key = file.key_pair().map_err(|e| bad(e.to_string()))?;
    Ok((file, key))
}

fn init(db: &Path, genesis_path: &Path, args: InitArgs) -> Outcome {
    for path in [genesis_path, db] {
        if path.exists() {
            return fail(Code::Chain, format!("{} already exists", path.display()));
        }
    }
    let mut authorities = Vec::new();
    let mut roles = Vec::new();
    for path in &args.keys {
        let (file, key) = read_key(path)?;
        if file.role == Role::Authority {
            authorities.push(AuthorityEntry {
                address: key.address(),
                public_key: key.public_key(),
            });
        }
        roles.push((file.role, key.address()));
    }
    roles.extend(args.accounts.iter().copied());
    if authorities.is_empty() {
        return fail(
            Code::Usage,
            "at least one authority key file is required (--key)",
        );
    }

    let mut genesis = GenesisConfig::new(authorities);
    genesis.chain_id = args.chain_id;
    for (role, address) in roles {
        if let Some(previous) = genesis.roles.insert(address, role) {
            if previous != role {
                return fail(Code::Usage, format!("{address} given two roles"));
            }
        }
    }
    genesis.initial_balances = args.funds.into_iter().collect();
    if let Err(e) = genesis.validate() {
        return fail(Code::Usage, e.to_string());
    }

    fs::write(genesis_path, genesis.to_pretty_json())
        .or_else(|e| fail(Code::Chain, format!("{}: {e}", genesis_path.display())))?;
    let store = LedgerStore::create(db, &genesis)?;
    println!("chain {} initialised", genesis.chain_id);
    println!("genesis: {}", genesis_path.display());
    println!("ledger:  {}", db.display());
    println!("block 0: {}", store.tip().hash());
    for (i, a) in genesis.authorities.iter().enumerate() {
        println!("sealer {i}: {}", a.address);
    }
    Ok(())
}

fn keygen(args: KeygenArgs) -> Outcome {
    let mut secret = [0u8; 32];
    getrandom::getrandom(&mut secret)
        .or_else(|e| fail(Code::Chain, format!("no system randomness: {e}")))?;
    let key = KeyPair::from_secret(secret);
    let file = KeyFile::new(&key, args.role);
    let path = args.out.unwrap_or_else(|| {
        let addr = key.address().to_string();
        PathBuf::from(format!("{}-{}.key.json", args.role, &addr[2..10]))
    });
    if path.exists() {
        return fail(Code::Usage, format!("{} already exists", path.display()));
    }
    let json = serde_json::to_string_pretty(&file).expect("key file serializes") + "\n";
    fs::write(&path, json).or_else(|e| fail(Code::Chain, format!("{}: {e}", path.display())))?;
    eprintln!(
        "warning: {} holds an unencrypted secret key; keep it private",
        path.display()
    );
    println!("{}", key.address());
    Ok(())
}

fn tx(db: &Path, genesis: &Path, args: TxArgs) -> Outcome {
    let Some(key_path) = &args.key else {
        return fail(Code::Usage, "--key <file> is required");
    };
    let mut store = open(db, genesis)?;
    let (_, key) = read_key(key_path)?;
    let genesis = store.genesis().clone();

    let kind = match args.kind {
        TxCommand::Deploy { code_size } => TxKind::Deploy {
            code_size: code_size.unwrap_or(genesis.gas_params.default_code_size),
        },
        TxCommand::Register { id, name, metadata } => TxKind::Register {
            product_id: id,
            name,
            metadata,
        },
        TxCommand::Transfer { id, to } => TxKind::Transfer {
            product_id: id,
            new_owner: to,
        },
        TxCommand::Sell { id, to } => TxKind::Sell {
            product_id: id,
            consumer: to,
        },
        TxCommand::Faucet => TxKind::FaucetClaim,
    };

    let index = store.tip().index + 1;
    let turn = expected_sealer(&genesis.authorities, index).address;
    let mut sealer = (key.address() == turn).then(|| key.clone());
    for path in &args.sealer_keys {
        let (_, k) = read_key(path)?;
        if k.address() == turn {
            sealer = Some(k);
        }
    }
    let Some(sealer) = sealer else {
        return fail(
            Code::Usage,
            format!("block {index} must be sealed by {turn}; pass its key with --sealer-key"),
        );
    };
    let timestamp = args.time.unwrap_or(store.tip().timestamp + 1);
    if timestamp < store.tip().timestamp {
        return fail(
            Code::Usage,
            format!(
                "--time {timestamp} is before the tip's {}",
                store.tip().timestamp
            ),
        );
    }

    let nonce = store.state().nonce_of(&key.address());
    let gas_price = args
        .gas_price
        .unwrap_or(genesis.gas_params.default_gas_price);
    let envelope = TxEnvelope::sign(&key, genesis.chain_id, nonce, kind, gas_price);
    let (block, _) = match store.seal_next(&[envelope], &sealer, timestamp) {
        Err(LedgerError::Unincludable { code, .. }) => {
            return fail(Code::Chain, format!("transaction not included: {code}"));
        }
        other => other?,
    };
    let receipt = store.append_block(block)?[0].clone();
    println!("{}", canonical_string(&receipt));
    match receipt.error {
        None => {
            println!("accepted in block {index}");
            Ok(())
        }
        Some(code) => {
            println!("rejected in block {index}: {code}");
            fail(Code::Chain, "")
        }
    }
}

fn print_verification(v: &VerificationResult) {
    println!("product:      {}", v.product_id);
    if let Some(status) = v.status {
        println!("status:       {status}");
    }
    if let Some(m) = v.manufacturer {
        println!("manufacturer: {m}");
    }
    if let Some(o) = v.current_owner {
        println!("owner:        {o}");
    }
    println!("history:");
    for (i, owner) in v.history.iter().enumerate() {
        println!("  {i}. {owner}");
    }
}

fn counterfeit(message: String) -> Outcome {
    println!("SUSPECTED COUNTERFEIT: {message}");
    fail(Code::Negative, "")
}

fn verify(db: &Path, genesis: &Path, payload: &str) -> Outcome {
    let store = open(db, genesis)?;
    let payload = match decode_payload(payload) {
        Ok(p) => p,
        Err(e) => return counterfeit(format!("unreadable QR payload ({e})")),
    };
    let state = store.state();
    let Some(contract) = state.contract else {
        return fail(
            Code::Chain,
            "no registry contract is deployed on this chain",
        );
    };
    if !payload.binds_to(state.chain_id, &contract.address) {
        return counterfeit(format!(
            "payload names chain {} contract {}, this registry is chain {} contract {}",
            payload.chain_id, payload.contract, state.chain_id, contract.address
        ));
    }
    let result = verify_product(state, &payload.product_id);
    if !result.exists {
        return counterfeit(format!("product {} is not registered", result.product_id));
    }
    print_verification(&result);
    if result.status == Some(Status::Unavailable) {
        println!(
            "note: already sold to a consumer; any further sale of this code is a resale or a copy"
        );
    }
    Ok(())
}

fn qr(db: &Path, genesis: &Path, id: &str) -> Outcome {
    let store = open(db, genesis)?;
    let state = store.state();
    let Some(contract) = state.contract else {
        return fail(
            Code::Chain,
            "no registry contract is deployed on this chain",
        );
    };
    let payload = encode_payload(state.chain_id, &contract.address, id)
        .or_else(|e| fail(Code::Usage, e.to_string()))?;
    if !state.products.contains_key(id) {
        eprintln!("warning: {id} is not registered yet");
    }
    println!("{payload}");
    Ok(())
}

fn history(db: &Path, genesis: &Path, id: &str) -> Outcome {
    let store = open(db, genesis)?;
    let result = verify_product(store.state(), id);
    if !result.exists {
        return counterfeit(format!("product {id} is not registered"));
    }
    for (i, owner) in result.history.iter().enumerate() {
        let role = store.state().role_of(owner).map_or("unknown", Role::as_str);
        println!("{i}\t{owner}\t{role}");
    }
    Ok(())
}

fn report(db: &Path, genesis: &Path, csv: Option<&Path>) -> Outcome {
    let store = open(db, genesis)?;
    let report = gas_report(store.blocks(), store.genesis()).or_else(|f| {
        fail(
            Code::Chain,
            format!("chain invalid at block {} ({})", f.block_index, f.rule),
        )
    })?;
    let table = report.to_csv();
    match csv {
        Some(path) => {
            fs::write(path, &table)
                .or_else(|e| fail(Code::Chain, format!("{}: {e}", path.display())))?;
            println!("wrote {}", path.display());
        }
        None => print!("{table}"),
    }
    println!(
        "grand total: {} wei = {} ETH (~{} ETH)",
        report.total_fee_wei(),
        report.total_fee_eth(),
        report.total_fee_eth_display()
    );
    Ok(())
}

fn validate(db: &Path, genesis: &Path) -> Outcome {
    let genesis = load_genesis(genesis)?;
    match validate_file(db, &genesis)? {
        ValidationReport::Ok {
            blocks,
            tip_hash,
            state_root,
        } => {
            println!("OK: {blocks} blocks");
            println!("tip:        {tip_hash}");
            println!("state_root: {state_root}");
            Ok(())
        }
        ValidationReport::Failed(f) => {
            println!(
                "INVALID: block {} rule {}: {}",
                f.block_index, f.rule, f.detail
            );
            fail(Code::Chain, "")
        }
    }
}

fn simulate(args: SimulateArgs) -> Outcome {
    let mut scenario =
        Scenario::load(&args.scenario).or_else(|e| fail(Code::Usage, e.to_string()))?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let out = run_scenario(&scenario).or_else(|e| fail(Code::Usage, e.to_string()))?;
    out.write_to(&args.out)
        .or_else(|e| fail(Code::Chain, format!("{}: {e}", args.out.display())))?;
    println!("seed:        {}", scenario.seed);
    println!("actors:      {}", out.actors.len());
    println!("blocks:      {}", out.blocks.len());
    println!("trace:       {} events", out.trace.len());
    println!("state_root:  {}", out.final_state.commitment());
    println!("written to:  {}", args.out.display());
    let chain = args.out.join("chain.log");
    if let ValidationReport::Failed(f) = validate_file(&chain, &out.genesis)? {
        println!(
            "tampered:    validation fails at block {} ({})",
            f.block_index, f.rule
        );
    }
    Ok(())
}
