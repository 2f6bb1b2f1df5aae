use std::collections::BTreeMap;

use acp_core::ledger::{validate_chain, LedgerStore, Rule};
use acp_core::registry::{ErrorCode, Role, Status, TxEnvelope, TxKind};
use acp_core::simnet::{
    apply_mutation, chain_tx_log, counterfeit_probe, reference_state_machine, run_scenario,
    ActorCounts, Mutation, Scenario, SimError, SimOutput, TraceAction, TraceOutcome,
};
use acp_core::types::Address;
use proptest::prelude::*;

fn seed42() -> SimOutput {
    run_scenario(&Scenario::new(42)).unwrap()
}

fn busy(seed: u64) -> Scenario {
    let mut sc = Scenario::new(seed);
    sc.actors = ActorCounts {
        manufacturers: 2,
        distributors: 2,
        retailers: 2,
        consumers: 3,
        authorities: 3,
    };
    sc.products = 6;
    sc.steps = 12;
    sc
}

fn actor(out: &SimOutput, role: Role) -> Address {
    out.actors
        .iter()
        .find(|a| a.role == role)
        .unwrap()
        .address()
}

#[test]
fn seed_42_lifecycle() {
    let out = seed42();
    let p = &out.final_state.products["P-0001"];
    assert_eq!(
        p.history,
        vec![
            actor(&out, Role::Manufacturer),
            actor(&out, Role::Distributor),
            actor(&out, Role::Retailer),
            actor(&out, Role::Consumer),
        ]
    );
    assert_eq!(p.status, Status::Unavailable);
    assert!(validate_chain(&out.blocks, &out.genesis).is_ok());

    let last = out.trace.last().unwrap();
    assert_eq!(last.actor, actor(&out, Role::Consumer));
    match &last.outcome {
        TraceOutcome::Verification(v) => {
            assert!(v.exists);
            assert_eq!(v.history, p.history);
        }
        other => panic!("expected a verification, got {other:?}"),
    }
}

#[test]
fn seed_42_second_sale_is_rejected() {
    let out = seed42();
    let mut store = LedgerStore::in_memory(&out.genesis).unwrap();
    for b in &out.blocks[1..] {
        store.append_block(b.clone()).unwrap();
    }
    let retailer = out
        .actors
        .iter()
        .find(|a| a.role == Role::Retailer)
        .unwrap();
    let sealer = &out
        .actors
        .iter()
        .find(|a| a.role == Role::Authority)
        .unwrap()
        .key;
    let tx = TxEnvelope::sign(
        &retailer.key,
        5,
        store.state().nonce_of(&retailer.address()),
        TxKind::Sell {
            product_id: "P-0001".into(),
            consumer: actor(&out, Role::Consumer),
        },
        1_000_000_000,
    );
    let (block, receipts) = store
        .seal_next(&[tx], sealer, store.tip().timestamp + 1)
        .unwrap();
    assert_eq!(receipts[0].error, Some(ErrorCode::ProductUnavailable));
    store.append_block(block).unwrap();
    assert_eq!(store.state().products["P-0001"].history.len(), 4);
}

#[test]
fn probes() {
    let out = run_scenario(&busy(9)).unwrap();
    assert!(!counterfeit_probe(&out.final_state, "FAKE-1").exists);
    let sold = counterfeit_probe(&out.final_state, "P-0001");
    assert!(sold.exists);
    assert_eq!(sold.status, Some(Status::Unavailable));

    let mut sc = busy(9);
    sc.actors.consumers = 0;
    let out = run_scenario(&sc).unwrap();
    let unsold = counterfeit_probe(&out.final_state, "P-0001");
    assert_eq!(unsold.status, Some(Status::Available));
}

#[test]
fn runs_are_deterministic() {
    let a = run_scenario(&busy(5)).unwrap();
    let b = run_scenario(&busy(5)).unwrap();
    assert_eq!(a.chain_bytes, b.chain_bytes);
    assert_eq!(a.trace_lines(), b.trace_lines());
    let c = run_scenario(&busy(6)).unwrap();
    assert_ne!(a.chain_bytes, c.chain_bytes);
}

#[test]
fn oracle_agrees_on_scenario_logs() {
    for seed in [42, 1, 2, 3] {
        let out = if seed == 42 {
            seed42()
        } else {
            run_scenario(&busy(seed)).unwrap()
        };
        let log = chain_tx_log(&out.blocks);
        assert_eq!(
            reference_state_machine(&log, &out.genesis).commitment(),
            out.final_state.commitment(),
            "seed {seed}"
        );
    }
    let out = seed42();
    assert_eq!(
        reference_state_machine(&[], &out.genesis).commitment(),
        out.genesis.genesis_state().commitment()
    );
}

#[test]
fn batched_blocks_validate() {
    let mut sc = busy(11);
    sc.block_size = 4;
    let out = run_scenario(&sc).unwrap();
    assert!(out.blocks.iter().any(|b| b.txs.len() > 1));
    assert!(validate_chain(&out.blocks, &out.genesis).is_ok());
    let log = chain_tx_log(&out.blocks);
    assert_eq!(
        reference_state_machine(&log, &out.genesis).commitment(),
        out.final_state.commitment()
    );
}

#[test]
fn verify_history_is_the_accepted_ownership_subsequence() {
    for seed in 0..8 {
        let out = run_scenario(&busy(seed)).unwrap();
        let mut owners: BTreeMap<String, Vec<Address>> = BTreeMap::new();
        let mut checked = 0;
        for ev in &out.trace {
            match (&ev.action, &ev.outcome) {
                (TraceAction::Tx(kind), TraceOutcome::Receipt(r)) if r.accepted => match kind {
                    TxKind::Register { product_id, .. } => {
                        owners.insert(product_id.clone(), vec![ev.actor]);
                    }
                    TxKind::Transfer {
                        product_id,
                        new_owner,
                    } => {
                        owners.get_mut(product_id).unwrap().push(*new_owner);
                    }
                    TxKind::Sell {
                        product_id,
                        consumer,
                    } => {
                        owners.get_mut(product_id).unwrap().push(*consumer);
                    }
                    _ => {}
                },
                (TraceAction::Verify { product_id }, TraceOutcome::Verification(v)) => {
                    let expected = owners.get(product_id).cloned().unwrap_or_default();
                    assert_eq!(v.history, expected, "seed {seed} step {}", ev.step);
                    assert_eq!(v.exists, owners.contains_key(product_id));
                    checked += 1;
                }
                _ => {}
            }
        }
        assert!(checked > 0);
    }
}

#[test]
fn tamper_plan_breaks_the_mutated_block() {
    let clean = seed42();
    let target = 3;
    let mut sc = Scenario::new(42);
    sc.tamper_plan = Some(vec![Mutation {
        target,
        byte_offset: 40,
        new_byte: b'7',
    }]);
    let out = run_scenario(&sc).unwrap();
    assert_ne!(out.chain_bytes, clean.chain_bytes);

    let dir = tempfile::tempdir().unwrap();
    out.write_to(dir.path()).unwrap();
    let report =
        acp_core::ledger::validate_file(&dir.path().join("chain.log"), &out.genesis).unwrap();
    assert_eq!(report.failure().unwrap().block_index, target);

    sc.tamper_plan = Some(vec![Mutation {
        target: 999,
        byte_offset: 0,
        new_byte: 0,
    }]);
    assert!(matches!(
        run_scenario(&sc),
        Err(SimError::MutationOutOfRange { .. })
    ));
}

#[test]
fn invalid_scenarios_are_refused() {
    let mut sc = Scenario::new(1);
    sc.actors.manufacturers = 0;
    assert!(matches!(
        run_scenario(&sc),
        Err(SimError::ScenarioInvalid(_))
    ));
    let mut sc = Scenario::new(1);
    sc.actors.authorities = 0;
    assert!(matches!(
        run_scenario(&sc),
        Err(SimError::ScenarioInvalid(_))
    ));
    let mut sc = Scenario::new(1);
    sc.block_size = 0;
    assert!(matches!(
        run_scenario(&sc),
        Err(SimError::ScenarioInvalid(_))
    ));
}

#[test]
fn scenario_files_parse_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(&path, r#"{"seed": 42}"#).unwrap();
    assert_eq!(Scenario::load(&path).unwrap(), Scenario::new(42));
    std::fs::write(&path, r#"{"seed": 42, "colour": "red"}"#).unwrap();
    assert!(matches!(
        Scenario::load(&path),
        Err(SimError::ScenarioInvalid(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Any single-byte change to a persisted chain is caught at the block
    /// that was changed.
    #[test]
    fn tampering_is_detected_at_the_mutated_block(
        target in 0u64..20,
        offset_seed in any::<u64>(),
        delta in 1u8..=255,
    ) {
        let out = run_scenario(&busy(3)).unwrap();
        prop_assume!((target as usize) < out.blocks.len());
        let line_len = acp_core::ledger::encode_block_line(&out.blocks[target as usize]).len() as u64;
        let byte_offset = offset_seed % line_len;
        let mut bytes = out.chain_bytes.clone();
        let line_start: usize = out.blocks[..target as usize]
            .iter()
            .map(|b| acp_core::ledger::encode_block_line(b).len() + 1)
            .sum();
        let new_byte = bytes[line_start + byte_offset as usize].wrapping_add(delta);
        apply_mutation(&mut bytes, &Mutation { target, byte_offset, new_byte }).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.log");
        std::fs::write(&path, &bytes).unwrap();
        let report = acp_core::ledger::validate_file(&path, &out.genesis).unwrap();
        let failure = report.failure().cloned();
        prop_assert!(failure.is_some());
        let failure = failure.unwrap();
        prop_assert_eq!(failure.block_index, target, "rule {}", failure.rule);
        if target == 0 {
            prop_assert!(matches!(failure.rule, Rule::Parse | Rule::Genesis));
        }
    }
}
