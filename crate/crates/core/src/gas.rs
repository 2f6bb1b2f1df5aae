//! Gas metering, fee settlement and cost reporting.
//!
//! Costs follow the EVM's shape: a flat per-transaction base, a per-byte
//! calldata charge (the calldata being the canonical encoding of the
//! operation), and storage charges per slot written. The number of slots
//! each operation writes is configurable through [`StorageLayout`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::canonical::canonical_serialize;
use crate::ledger::{replay, Block, GenesisConfig, ValidationFailure};
use crate::registry::{Account, Receipt, RegistryState, TxCategory, TxEnvelope, TxKind};
use crate::types::{Address, Gas, Wei, WEI_PER_ETH};

/// Shipped gas price, in wei per gas (1.1 gwei).
///
/// Calibrated so that one deploy, one registration and one sale together
/// cost about 0.00064428 ETH; `cargo run -p acp-core --example calibrate_gas_price`
/// re-derives it.
pub const DEFAULT_GAS_PRICE: u64 = 1_100_000_000;

/// Slots written by each successful operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StorageLayout {
    /// Record, owner slot, history slot.
    pub register_new: u32,
    pub transfer_update: u32,
    pub transfer_new: u32,
    /// Owner and status.
    pub sell_update: u32,
    pub sell_new: u32,
}

impl Default for StorageLayout {
    fn default() -> Self {
        Self {
            register_new: 3,
            transfer_update: 1,
            transfer_new: 1,
            sell_update: 2,
            sell_new: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GasParams {
    pub base_tx: Gas,
    pub calldata_zero_byte: Gas,
    pub calldata_nonzero_byte: Gas,
    pub sstore_new: Gas,
    pub sstore_update: Gas,
    pub create_base: Gas,
    pub code_byte: Gas,
    pub default_code_size: u32,
    /// Wei per gas.
    pub default_gas_price: u64,
    pub layout: StorageLayout,
}

impl Default for GasParams {
    fn default() -> Self {
        Self {
            base_tx: 21_000,
            calldata_zero_byte: 4,
            calldata_nonzero_byte: 16,
            sstore_new: 20_000,
            sstore_update: 5_000,
            create_base: 32_000,
            code_byte: 200,
            default_code_size: 2_000,
            default_gas_price: DEFAULT_GAS_PRICE,
            layout: StorageLayout::default(),
        }
    }
}

impl GasParams {
    /// Every cost constant must be strictly positive.
    pub fn validate(&self) -> Result<(), String> {
        let named = [
            ("base_tx", self.base_tx),
            ("calldata_zero_byte", self.calldata_zero_byte),
            ("calldata_nonzero_byte", self.calldata_nonzero_byte),
            ("sstore_new", self.sstore_new),
            ("sstore_update", self.sstore_update),
            ("create_base", self.create_base),
            ("code_byte", self.code_byte),
            ("default_code_size", u64::from(self.default_code_size)),
            ("default_gas_price", self.default_gas_price),
        ];
        match named.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(format!("gas parameter {name} must be positive")),
            None => Ok(()),
        }
    }
}

/// Per-byte calldata cost.
pub fn calldata_gas(params: &GasParams, calldata: &[u8]) -> Gas {
    calldata
        .iter()
        .map(|b| {
            if *b == 0 {
                params.calldata_zero_byte
            } else {
                params.calldata_nonzero_byte
            }
        })
        .sum()
}

/// Base cost plus calldata; what a rejected transaction pays.
pub fn intrinsic_gas(params: &GasParams, kind: &TxKind) -> Gas {
    if let TxKind::FaucetClaim = kind {
        return 0;
    }
    params.base_tx + calldata_gas(params, &canonical_serialize(kind))
}

/// Creation or storage cost charged on success.
pub fn storage_gas(params: &GasParams, kind: &TxKind) -> Gas {
    let l = &params.layout;
    match kind {
        TxKind::Deploy { code_size } => {
            params.create_base + params.code_byte * Gas::from(*code_size)
        }
        TxKind::Register { .. } => Gas::from(l.register_new) * params.sstore_new,
        TxKind::Transfer { .. } => {
            Gas::from(l.transfer_update) * params.sstore_update
                + Gas::from(l.transfer_new) * params.sstore_new
        }
        TxKind::Sell { .. } => {
            Gas::from(l.sell_update) * params.sstore_update
                + Gas::from(l.sell_new) * params.sstore_new
        }
        TxKind::FaucetClaim => 0,
    }
}

/// Gas the transaction would be charged against `state`, assuming it is
/// authenticated: full cost if the registry would admit it, intrinsic
/// cost otherwise. Faucet claims are free.
pub fn gas_for_tx(params: &GasParams, tx: &TxEnvelope, state: &RegistryState) -> Gas {
    let intrinsic = intrinsic_gas(params, &tx.kind);
    if crate::registry::admit(state, &tx.sender, &tx.kind).is_ok() {
        intrinsic + storage_gas(params, &tx.kind)
    } else {
        intrinsic
    }
}

/// Exact fee in wei. A `u64 × u64` product always fits in `u128`.
pub fn fee(gas: Gas, gas_price: u64) -> Wei {
    Wei::from(gas) * Wei::from(gas_price)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("insufficient funds: balance {balance} wei, fee {fee} wei")]
pub struct InsufficientFunds {
    pub balance: Wei,
    pub fee: Wei,
}

/// Moves `fee` from `payer` to `sealer`. Total supply is unchanged.
pub fn settle(
    state: &RegistryState,
    payer: &Address,
    sealer: &Address,
    fee: Wei,
) -> Result<RegistryState, InsufficientFunds> {
    let mut next = state.clone();
    settle_in_place(&mut next, payer, sealer, fee)?;
    Ok(next)
}

/// In-place [`settle`]. A sealer without an account gets an authority account.
pub fn settle_in_place(
    state: &mut RegistryState,
    payer: &Address,
    sealer: &Address,
    fee: Wei,
) -> Result<(), InsufficientFunds> {
    if fee == 0 {
        return Ok(());
    }
    let balance = state.balance_of(payer);
    if balance < fee {
        return Err(InsufficientFunds { balance, fee });
    }
    if let Some(acct) = state.accounts.get_mut(payer) {
        acct.balance -= fee;
    }
    state
        .accounts
        .entry(*sealer)
        .or_insert_with(|| Account::authority(*sealer))
        .balance += fee;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasReportRow {
    /// A [`TxCategory`] name, or `TOTAL`.
    pub category: String,
    pub tx_count: u64,
    pub total_gas: u128,
    /// `total_gas / tx_count`, rounded down; 0 when there are no transactions.
    pub avg_gas_per_tx: u128,
    pub total_fee: Wei,
}

impl GasReportRow {
    fn empty(category: &str) -> Self {
        Self {
            category: category.to_string(),
            tx_count: 0,
            total_gas: 0,
            avg_gas_per_tx: 0,
            total_fee: 0,
        }
    }

    fn add(&mut self, gas: Gas, fee: Wei) {
        self.tx_count += 1;
        self.total_gas += u128::from(gas);
        self.total_fee += fee;
        self.avg_gas_per_tx = self.total_gas / u128::from(self.tx_count);
    }

    pub fn total_fee_eth(&self) -> String {
        format_eth(self.total_fee)
    }
}

/// Per-category cost totals of a chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasReport {
    /// One row per category, in [`TxCategory::ALL`] order.
    pub rows: Vec<GasReportRow>,
    pub total: GasReportRow,
}

pub const CSV_HEADER: &str =
    "category,tx_count,total_gas,avg_gas_per_tx,total_fee_wei,total_fee_eth";

impl GasReport {
    /// Aggregates receipts paired with the transactions that produced them.
    pub fn from_receipts<'a>(
        items: impl IntoIterator<Item = (&'a TxEnvelope, &'a Receipt)>,
    ) -> Self {
        let mut rows: Vec<GasReportRow> = TxCategory::ALL
            .iter()
            .map(|c| GasReportRow::empty(c.as_str()))
            .collect();
        let mut total = GasReportRow::empty("TOTAL");
        for (tx, receipt) in items {
            let idx = TxCategory::ALL
                .iter()
                .position(|c| *c == tx.kind.category())
                .expect("every category has a row");
            rows[idx].add(receipt.gas_used, receipt.fee);
            total.add(receipt.gas_used, receipt.fee);
        }
        Self { rows, total }
    }

    pub fn row(&self, category: TxCategory) -> &GasReportRow {
        &self.rows[category as usize]
    }

    pub fn total_fee_wei(&self) -> Wei {
        self.total.total_fee
    }

    /// Grand total in ETH to full wei precision.
    pub fn total_fee_eth(&self) -> String {
        format_eth(self.total.total_fee)
    }

    /// Grand total in ETH rounded half-up to 8 decimals.
    pub fn total_fee_eth_display(&self) -> String {
        format_eth_rounded(self.total.total_fee, 8)
    }

    /// Comma-separated table, header first, `TOTAL` last.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for row in self.rows.iter().chain(std::iter::once(&self.total)) {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                row.category,
                row.tx_count,
                row.total_gas,
                row.avg_gas_per_tx,
                row.total_fee,
                row.total_fee_eth()
            )
            .expect("writing to a String");
        }
        out
    }
}

/// Replays `blocks` and aggregates the recomputed receipts.
pub fn gas_report(
    blocks: &[Block],
    genesis: &GenesisConfig,
) -> Result<GasReport, ValidationFailure> {
    let replayed = replay(blocks, genesis)?;
    Ok(GasReport::from_receipts(
        blocks
            .iter()
            .zip(&replayed.receipts)
            .flat_map(|(b, rs)| b.txs.iter().zip(rs)),
    ))
}

/// `wei` as a decimal ETH string with all 18 fractional digits.
pub fn format_eth(wei: Wei) -> String {
    format!("{}.{:018}", wei / WEI_PER_ETH, wei % WEI_PER_ETH)
}

/// `wei` in ETH rounded half-up to `decimals` (at most 18) fractional digits.
pub fn format_eth_rounded(wei: Wei, decimals: u32) -> String {
    assert!(decimals <= 18);
    let unit = 10u128.pow(18 - decimals);
    let scaled = (wei + unit / 2) / unit;
    if decimals == 0 {
        return scaled.to_string();
    }
    let denom = 10u128.pow(decimals);
    format!(
        "{}.{:0width$}",
        scaled / denom,
        scaled % denom,
        width = decimals as usize
    )
}
