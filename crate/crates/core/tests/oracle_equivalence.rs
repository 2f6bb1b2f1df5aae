use acp_core::ledger::DEFAULT_FAUCET_AMOUNT;
use acp_core::simnet::fuzz::LogShape;
use acp_core::simnet::{check_exhaustive, check_random_log};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn registry_and_reference_agree(seed in any::<u64>()) {
        let check = check_random_log(seed, LogShape::default());
        prop_assert!(check.is_ok(), "{:?}", check);
        let check = check.unwrap();
        prop_assert!(check.conserves_supply(DEFAULT_FAUCET_AMOUNT));
    }

    #[test]
    fn small_logs_agree(seed in any::<u64>()) {
        let shape = LogShape { max_txs: 20, max_accounts: 3, max_products: 1 };
        prop_assert!(check_random_log(seed, shape).is_ok());
    }
}

#[test]
fn random_logs_exercise_rejections_and_grants() {
    let checks: Vec<_> = (0..30)
        .map(|s| check_random_log(s, LogShape::default()).unwrap())
        .collect();
    let txs: usize = checks.iter().map(|c| c.txs).sum();
    let accepted: usize = checks.iter().map(|c| c.accepted).sum();
    assert!(accepted > 0 && accepted < txs);
    assert!(checks.iter().any(|c| c.faucet_grants > 0));
}

#[test]
fn exhaustive_up_to_three_moves() {
    // 21 + 21^2 + 21^3 sequences; the acceptance suite goes one deeper.
    let check = check_exhaustive(3).unwrap();
    assert_eq!(check.sequences, 21 + 441 + 9261);
}
