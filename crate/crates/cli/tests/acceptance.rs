//! Acceptance suite. Runs every criterion in sequence (no parallel test
//! threads, so the time limits measure the work itself), prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use acp_core::gas::{gas_report, DEFAULT_GAS_PRICE};
use acp_core::ledger::{
    encode_block_line, encode_chain, load_chain, validate_file, GenesisConfig, LedgerStore,
    DEFAULT_FAUCET_AMOUNT, DEFAULT_FAUCET_COOLDOWN,
};
use acp_core::qr::{checksum, decode_payload, encode_payload};
use acp_core::registry::{ErrorCode, Role, Status, TxCategory, TxEnvelope, TxKind};
use acp_core::simnet::cost::cost_chain;
use acp_core::simnet::fuzz::LogShape;
use acp_core::simnet::{
    apply_mutation, check_exhaustive, check_random_log, run_scenario, LogCheck, Mutation, Scenario,
    SimOutput, SplitMix64,
};
use acp_core::types::{Address, WEI_PER_ETH};
use acp_core::KeyPair;

/// 0.00064428 ETH in wei.
const PAPER_TOTAL_WEI: u128 = 644_280_000_000_000;

struct Verdict {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        ok,
        detail: detail.into(),
    }
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn acp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acp"))
        .args(args)
        .output()
        .expect("acp binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn scenario(name: &str) -> Scenario {
    Scenario::load(&workspace().join("scenarios").join(name)).expect("scenario file loads")
}

fn persist(dir: &Path, genesis: &GenesisConfig, chain: &str) -> (PathBuf, PathBuf) {
    let g = dir.join("genesis.json");
    let db = dir.join("chain.log");
    fs::write(&g, genesis.to_pretty_json()).unwrap();
    fs::write(&db, chain).unwrap();
    (g, db)
}

fn criterion_1() -> Verdict {
    let chain = cost_chain(DEFAULT_GAS_PRICE);
    let report = gas_report(&chain.blocks, &chain.genesis).expect("cost chain validates");
    let gas = |c| report.row(c).total_gas;
    let (d, r, s) = (
        gas(TxCategory::Deploy),
        gas(TxCategory::Register),
        gas(TxCategory::Sell),
    );
    let single = [TxCategory::Deploy, TxCategory::Register, TxCategory::Sell]
        .iter()
        .all(|c| report.row(*c).tx_count == 1);
    check(
        single && d > r && r > s,
        format!("gas Deploy {d} > Register {r} > Sell {s}"),
    )
}

fn criterion_2(tmp: &Path) -> Verdict {
    let chain = cost_chain(DEFAULT_GAS_PRICE);
    let (g, db) = persist(tmp, &chain.genesis, &encode_chain(&chain.blocks));
    let csv = tmp.join("report.csv");
    let out = acp(&[
        "--db",
        path_str(&db),
        "--genesis",
        path_str(&g),
        "gas-report",
        "--csv",
        path_str(&csv),
    ]);
    if !out.status.success() {
        return check(false, format!("gas-report exited {:?}", out.status.code()));
    }
    let table = fs::read_to_string(&csv).unwrap();
    let total_row = table
        .lines()
        .find(|l| l.starts_with("TOTAL,"))
        .unwrap_or("");
    let cols: Vec<&str> = total_row.split(',').collect();
    let Some(total) = cols.get(4).and_then(|v| v.parse::<u128>().ok()) else {
        return check(false, format!("no TOTAL row in {table:?}"));
    };
    let counts_ok = ["Deploy,1,", "Register,1,", "Sell,1,"]
        .iter()
        .all(|p| table.lines().any(|l| l.starts_with(p)))
        && cols[1] == "3";
    let within = total * 10 >= PAPER_TOTAL_WEI * 9 && total * 10 <= PAPER_TOTAL_WEI * 11;
    let script = workspace()
        .join("crates/core/examples/calibrate_gas_price.rs")
        .is_file();
    let deviation = (total as f64 / PAPER_TOTAL_WEI as f64 - 1.0) * 100.0;
    check(
        counts_ok && within && script,
        format!(
            "total {} ETH at {} gwei vs 0.00064428 ETH ({deviation:+.2}%, limit ±10%)",
            cols.get(5).unwrap_or(&"?"),
            DEFAULT_GAS_PRICE as f64 / 1e9
        ),
    )
}

fn criterion_3(tmp: &Path) -> Verdict {
    let out = run_scenario(&scenario("fifty_blocks.json")).expect("scenario runs");
    if out.blocks.len() != 50 {
        return check(
            false,
            format!("scenario chain has {} blocks, not 50", out.blocks.len()),
        );
    }
    let (_, db) = persist(tmp, &out.genesis, &encode_chain(&out.blocks));
    let clean = fs::read(&db).unwrap();
    if !validate_file(&db, &out.genesis).unwrap().is_ok() {
        return check(false, "untampered chain does not validate");
    }
    let line_lens: Vec<u64> = out
        .blocks
        .iter()
        .map(|b| encode_block_line(b).len() as u64)
        .collect();
    let line_starts: Vec<usize> = line_lens
        .iter()
        .scan(0usize, |acc, len| {
            let start = *acc;
            *acc += *len as usize + 1;
            Some(start)
        })
        .collect();

    let mut rng = SplitMix64::new(0x7a3e);
    let mut caught = 0;
    let mut misses = Vec::new();
    for _ in 0..100 {
        let target = rng.below(50);
        let byte_offset = rng.below(line_lens[target as usize]);
        let old = clean[line_starts[target as usize] + byte_offset as usize];
        let new_byte = old ^ (1 + rng.below(255) as u8);
        let mut bytes = clean.clone();
        apply_mutation(
            &mut bytes,
            &Mutation {
                target,
                byte_offset,
                new_byte,
            },
        )
        .unwrap();
        fs::write(&db, &bytes).unwrap();
        match validate_file(&db, &out.genesis).unwrap().failure() {
            Some(f) if f.block_index == target => caught += 1,
            other => misses.push(format!("block {target}+{byte_offset}: {other:?}")),
        }
    }
    fs::write(&db, &clean).unwrap();
    check(
        caught == 100,
        format!(
            "{caught}/100 mutations rejected at the mutated block{}",
            if misses.is_empty() {
                String::new()
            } else {
                format!("; missed {misses:?}")
            }
        ),
    )
}

fn criterion_4(checks: &mut Vec<LogCheck>) -> Verdict {
    let mut txs = 0;
    for seed in 0..1000u64 {
        match check_random_log(seed, LogShape::default()) {
            Ok(c) => {
                txs += c.txs;
                checks.push(c);
            }
            Err(d) => return check(false, format!("random log diverged: {d:?}")),
        }
    }
    match check_exhaustive(4) {
        Ok(ex) => check(
            ex.sequences == 21 + 441 + 9261 + 194_481,
            format!(
                "1000 random logs ({txs} txs) and {} exhaustive sequences agree",
                ex.sequences
            ),
        ),
        Err(d) => check(false, format!("exhaustive search diverged: {d:?}")),
    }
}

fn actor(out: &SimOutput, role: Role) -> &KeyPair {
    &out.actors.iter().find(|a| a.role == role).unwrap().key
}

fn criterion_5(tmp: &Path) -> Verdict {
    let out = run_scenario(&scenario("seed42.json")).expect("scenario runs");
    let expected: Vec<Address> = [
        Role::Manufacturer,
        Role::Distributor,
        Role::Retailer,
        Role::Consumer,
    ]
    .iter()
    .map(|r| actor(&out, *r).address())
    .collect();
    let product = &out.final_state.products["P-0001"];
    let lifecycle = product.history == expected && product.status == Status::Unavailable;

    let mut store = LedgerStore::in_memory(&out.genesis).unwrap();
    for b in &out.blocks[1..] {
        store.append_block(b.clone()).unwrap();
    }
    let retailer = actor(&out, Role::Retailer);
    let resale = TxEnvelope::sign(
        retailer,
        out.genesis.chain_id,
        store.state().nonce_of(&retailer.address()),
        TxKind::Sell {
            product_id: "P-0001".into(),
            consumer: expected[3],
        },
        DEFAULT_GAS_PRICE,
    );
    let sealer = actor(&out, Role::Authority);
    let (block, receipts) = store
        .seal_next(&[resale], sealer, store.tip().timestamp + 1)
        .unwrap();
    let second_sale = receipts[0].error;
    store.append_block(block).unwrap();

    let (g, db) = persist(tmp, &out.genesis, &encode_chain(store.blocks()));
    let contract = store.state().contract.unwrap().address;
    let fake = encode_payload(out.genesis.chain_id, &contract, "FAKE-1").unwrap();
    let probe = acp(&[
        "--db",
        path_str(&db),
        "--genesis",
        path_str(&g),
        "verify",
        "--qr",
        &fake,
    ]);
    let stdout = String::from_utf8_lossy(&probe.stdout);
    let genuine = encode_payload(out.genesis.chain_id, &contract, "P-0001").unwrap();
    let real = acp(&[
        "--db",
        path_str(&db),
        "--genesis",
        path_str(&g),
        "verify",
        "--qr",
        &genuine,
    ]);
    let real_out = String::from_utf8_lossy(&real.stdout);

    check(
        lifecycle
            && second_sale == Some(ErrorCode::ProductUnavailable)
            && probe.status.code() == Some(3)
            && stdout.contains("SUSPECTED COUNTERFEIT")
            && real.status.code() == Some(0)
            && real_out.contains("Unavailable"),
        format!(
            "history [M, D, R, C] {}, status {}, second sale {:?}, unregistered verify exit {:?}, genuine exit {:?}",
            product.history == expected,
            product.status,
            second_sale,
            probe.status.code(),
            real.status.code()
        ),
    )
}

/// Plain bitwise CRC-32 (reflected, polynomial 0xEDB88320).
fn crc32_bitwise(data: &[u8]) -> u32 {
    let mut crc = 0xffff_ffffu32;
    for byte in data {
        crc ^= u32::from(*byte);
        for _ in 0..8 {
            crc = if crc & 1 == 1 {
                (crc >> 1) ^ 0xedb8_8320
            } else {
                crc >> 1
            };
        }
    }
    !crc
}

const ID_CHARS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789._-";

fn criterion_6() -> Verdict {
    let mut rng = SplitMix64::new(0x9e);
    let mut round_trips = 0;
    let mut rejected = 0;
    for _ in 0..10_000 {
        let chain_id = match rng.below(3) {
            0 => 5,
            1 => rng.below(1000),
            _ => rng.next_u64(),
        };
        let mut contract = [0u8; 20];
        contract.copy_from_slice(&rng.bytes32()[..20]);
        let contract = Address(contract);
        let len = 1 + rng.index(64);
        let id: String = (0..len).map(|_| *rng.pick(ID_CHARS) as char).collect();
        let encoded = encode_payload(chain_id, &contract, &id).unwrap();
        if let Ok(p) = decode_payload(&encoded) {
            if p.chain_id == chain_id
                && p.contract == contract
                && p.product_id == id
                && p.to_string() == encoded
            {
                round_trips += 1;
            }
        }

        let mut bytes = encoded.into_bytes();
        let pos = rng.index(bytes.len());
        let mut c = bytes[pos];
        while c == bytes[pos] {
            c = 0x20 + rng.below(95) as u8;
        }
        bytes[pos] = c;
        if decode_payload(std::str::from_utf8(&bytes).unwrap()).is_err() {
            rejected += 1;
        }
    }
    let check_value = checksum(b"123456789");
    let oracle = crc32_bitwise(b"123456789");
    check(
        round_trips == 10_000
            && rejected == 10_000
            && check_value == 0xcbf4_3926
            && oracle == check_value
            && checksum(b"") == 0
            && crc32_bitwise(b"") == 0,
        format!(
            "{round_trips}/10000 round trips, {rejected}/10000 corruptions rejected, checksum(\"123456789\") = {check_value:#010x} (oracle {oracle:#010x})"
        ),
    )
}

fn criterion_7(checks: &[LogCheck]) -> Verdict {
    let authority = KeyPair::from_secret([0xa7; 32]);
    let consumer = KeyPair::from_secret([0xc7; 32]);
    let mut genesis = GenesisConfig::new(vec![acp_core::ledger::AuthorityEntry {
        address: authority.address(),
        public_key: authority.public_key(),
    }]);
    genesis.roles.insert(consumer.address(), Role::Consumer);
    let mut store = LedgerStore::in_memory(&genesis).unwrap();
    let mut outcomes = Vec::new();
    for (nonce, t) in [0u64, 86_399, 86_400].into_iter().enumerate() {
        let tx = TxEnvelope::sign(
            &consumer,
            genesis.chain_id,
            nonce as u64,
            TxKind::FaucetClaim,
            DEFAULT_GAS_PRICE,
        );
        let (block, receipts) = store.seal_next(&[tx], &authority, t).unwrap();
        store.append_block(block).unwrap();
        outcomes.push((
            receipts[0].error,
            store.state().balance_of(&consumer.address()),
        ));
    }
    let half = DEFAULT_FAUCET_AMOUNT;
    let boundary = DEFAULT_FAUCET_COOLDOWN == 86_400
        && half == WEI_PER_ETH / 2
        && outcomes
            == [
                (None, half),
                (Some(ErrorCode::FaucetCooldown), half),
                (None, 2 * half),
            ];
    let conserved = checks.iter().filter(|c| c.conserves_supply(half)).count();
    let grants: u64 = checks.iter().map(|c| c.faucet_grants).sum();
    check(
        boundary && checks.len() == 1000 && conserved == 1000 && grants > 0,
        format!(
            "t=0/86399/86400 -> grant/{:?}/grant; supply conserved in {conserved}/{} runs ({grants} grants)",
            outcomes[1].0.map_or("grant".into(), |c| c.to_string()),
            checks.len()
        ),
    )
}

fn criterion_8(tmp: &Path) -> Verdict {
    let out = run_scenario(&scenario("fifty_blocks.json")).expect("scenario runs");
    let (g, db) = persist(tmp, &out.genesis, &encode_chain(&out.blocks));
    let a = load_chain(&db, &out.genesis).unwrap();
    let b = load_chain(&db, &out.genesis).unwrap();
    let in_process = a.state().commitment() == b.state().commitment()
        && a.state().commitment() == out.final_state.commitment();
    let report_a = gas_report(a.blocks(), a.genesis()).unwrap().to_csv();
    let report_b = gas_report(b.blocks(), b.genesis()).unwrap().to_csv();

    let args = |extra: &[&str]| {
        let mut v = vec!["--db", path_str(&db), "--genesis", path_str(&g)];
        v.extend_from_slice(extra);
        v.iter().map(|s| s.to_string()).collect::<Vec<_>>()
    };
    let run = |extra: &[&str]| {
        let owned = args(extra);
        let refs: Vec<&str> = owned.iter().map(String::as_str).collect();
        acp(&refs)
    };
    let root_line = |o: &Output| {
        String::from_utf8_lossy(&o.stdout)
            .lines()
            .find(|l| l.starts_with("state_root:"))
            .map(|l| l.split_whitespace().last().unwrap_or("").to_string())
    };
    let v1 = run(&["validate"]);
    let v2 = run(&["validate"]);
    let (csv1, csv2) = (tmp.join("r1.csv"), tmp.join("r2.csv"));
    let r1 = run(&["gas-report", "--csv", path_str(&csv1)]);
    let r2 = run(&["gas-report", "--csv", path_str(&csv2)]);
    let stdout1 = acp(&args(&["gas-report"])
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>())
    .stdout;
    let stdout2 = acp(&args(&["gas-report"])
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>())
    .stdout;
    let bytes1 = fs::read(&csv1).unwrap_or_default();
    let bytes2 = fs::read(&csv2).unwrap_or_default();

    let expected_root = out.final_state.commitment().to_string();
    let roots_ok = root_line(&v1).as_deref() == Some(expected_root.as_str())
        && root_line(&v1) == root_line(&v2);
    let reports_ok = r1.status.success()
        && r2.status.success()
        && !bytes1.is_empty()
        && bytes1 == bytes2
        && bytes1 == report_a.as_bytes()
        && report_a == report_b
        && stdout1 == stdout2;
    check(
        in_process && roots_ok && reports_ok,
        format!(
            "tip state_root {} identical in-process and across 2 processes; gas-report bytes identical ({} bytes)",
            &expected_root[..18],
            bytes1.len()
        ),
    )
}

fn main() {
    // `cargo test -- <filter>` style arguments are accepted and ignored;
    // `--list` support keeps `cargo test -- --list` working.
    if std::env::args().any(|a| a == "--list") {
        for i in 1..=8 {
            println!("criterion_{i}: test");
        }
        return;
    }
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = |name: &str| {
        let d = tmp.path().join(name);
        fs::create_dir_all(&d).unwrap();
        d
    };
    let mut random_checks = Vec::new();

    type Run<'a> = Box<dyn FnOnce() -> Verdict + 'a>;
    let d2 = dir("c2");
    let d3 = dir("c3");
    let d5 = dir("c5");
    let d8 = dir("c8");
    let mut failed = 0;
    {
        let criteria: Vec<(u32, &str, Duration, Run)> = vec![
            (
                1,
                "cost ordering",
                Duration::from_secs(1),
                Box::new(criterion_1),
            ),
            (
                2,
                "total cost calibration",
                Duration::from_secs(1),
                Box::new(|| criterion_2(&d2)),
            ),
            (
                3,
                "tamper evidence",
                Duration::from_secs(5),
                Box::new(|| criterion_3(&d3)),
            ),
            (
                4,
                "oracle equivalence",
                Duration::from_secs(30),
                Box::new(|| criterion_4(&mut random_checks)),
            ),
            (
                5,
                "lifecycle and anti-counterfeit",
                Duration::from_secs(1),
                Box::new(|| criterion_5(&d5)),
            ),
            (
                6,
                "QR payload",
                Duration::from_secs(5),
                Box::new(criterion_6),
            ),
        ];
        for (n, name, limit, run) in criteria {
            failed += record(n, name, Some(limit), run);
        }
    }
    failed += record(
        7,
        "faucet economics",
        None,
        Box::new(|| criterion_7(&random_checks)),
    );
    failed += record(8, "replay determinism", None, Box::new(|| criterion_8(&d8)));

    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn record(
    n: u32,
    name: &str,
    limit: Option<Duration>,
    run: Box<dyn FnOnce() -> Verdict + '_>,
) -> u32 {
    let start = Instant::now();
    let verdict = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
        .unwrap_or_else(|_| check(false, "panicked"));
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed < l);
    let ok = verdict.ok && in_time;
    let budget = match limit {
        Some(l) => format!("{:.2}s, limit {}s", elapsed.as_secs_f64(), l.as_secs()),
        None => format!("{:.2}s", elapsed.as_secs_f64()),
    };
    let line = format!(
        "{} [{n}] {name}: {}{} ({budget})",
        if ok { "PASS" } else { "FAIL" },
        verdict.detail,
        if in_time { "" } else { "; over time limit" },
    );
    println!("{line}");
    u32::from(!ok)
}
