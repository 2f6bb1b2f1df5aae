use std::path::PathBuf;

use acp_core::registry::Role;
use acp_core::Address;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "acp",
    version,
    about = "Supply-chain provenance ledger with counterfeit detection"
)]
pub struct Cli {
    /// Ledger file.
    #[arg(long, global = true, default_value = "chain.log")]
    pub db: PathBuf,
    /// Genesis configuration.
    #[arg(long, global = true, default_value = "genesis.json")]
    pub genesis: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create the genesis configuration and a chain holding block 0.
    Init(InitArgs),
    /// Generate a key pair and store it in a key file.
    Keygen(KeygenArgs),
    /// Sign a transaction, seal it into a new block and append it.
    Tx(TxArgs),
    /// Check a scanned QR payload against the registry.
    Verify {
        #[arg(long)]
        qr: String,
    },
    /// Print the QR payload for a product of this registry.
    Qr {
        #[arg(long)]
        id: String,
    },
    /// Print a product's owner history.
    History {
        #[arg(long)]
        id: String,
    },
    /// Gas and fee totals per transaction category.
    GasReport {
        /// Also write the table to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Replay and check the whole chain.
    Validate,
    /// Run a simulated supply chain.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Key file of an account to register; authorities become sealers in
    /// the order given.
    #[arg(long = "key", value_name = "FILE")]
    pub keys: Vec<PathBuf>,
    /// Register an account by address only.
    #[arg(long = "account", value_name = "ROLE:ADDRESS", value_parser = parse_account)]
    pub accounts: Vec<(Role, Address)>,
    /// Starting balance in wei.
    #[arg(long = "fund", value_name = "ADDRESS=WEI", value_parser = parse_fund)]
    pub funds: Vec<(Address, u128)>,
    #[arg(long, default_value_t = acp_core::ledger::DEFAULT_CHAIN_ID)]
    pub chain_id: u64,
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    #[arg(long)]
    pub role: Role,
    /// Defaults to `<role>-<address prefix>.key.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TxArgs {
    #[command(subcommand)]
    pub kind: TxCommand,
    /// Sender's key file.
    #[arg(long, global = true)]
    pub key: Option<PathBuf>,
    /// Gas price in gwei; defaults to the chain's calibrated price.
    #[arg(long, global = true, value_parser = parse_gwei)]
    pub gas_price: Option<u64>,
    /// Authority key files; the one whose turn it is seals the block.
    #[arg(long = "sealer-key", global = true)]
    pub sealer_keys: Vec<PathBuf>,
    /// Block timestamp in logical seconds; defaults to one past the tip.
    #[arg(long, global = true)]
    pub time: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum TxCommand {
    Deploy {
        /// Contract size in bytes; defaults to the chain's default.
        #[arg(long)]
        code_size: Option<u32>,
    },
    Register {
        #[arg(long)]
        id: String,
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "")]
        metadata: String,
    },
    Transfer {
        #[arg(long)]
        id: String,
        #[arg(long)]
        to: Address,
    },
    Sell {
        #[arg(long)]
        id: String,
        #[arg(long)]
        to: Address,
    },
    Faucet,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "sim-out")]
    pub out: PathBuf,
}

fn parse_account(s: &str) -> Result<(Role, Address), String> {
    let (role, addr) = s.split_once(':').ok_or("expected ROLE:ADDRESS")?;
    Ok((role.parse()?, addr.parse().map_err(|e| format!("{e}"))?))
}

fn parse_fund(s: &str) -> Result<(Address, u128), String> {
    let (addr, wei) = s.split_once('=').ok_or("expected ADDRESS=WEI")?;
    Ok((
        addr.parse().map_err(|e| format!("{e}"))?,
        wei.parse().map_err(|e| format!("{e}"))?,
    ))
}

/// Decimal gwei to integer wei, exact up to 9 fractional digits.
pub fn parse_gwei(s: &str) -> Result<u64, String> {
    let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
    let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
    if !digits(whole) || (s.contains('.') && !digits(frac)) || frac.len() > 9 {
        return Err(format!(
            "{s:?} is not a gwei amount with at most 9 decimals"
        ));
    }
    let whole: u64 = whole
        .parse()
        .map_err(|_| "gas price too large".to_string())?;
    let frac: u64 = format!("{frac:0<9}").parse().expect("nine digits");
    whole
        .checked_mul(1_000_000_000)
        .and_then(|w| w.checked_add(frac))
        .filter(|w| *w > 0)
        .ok_or_else(|| "gas price must be positive and below 2^64 wei".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gwei_parsing() {
        assert_eq!(parse_gwei("1.1"), Ok(1_100_000_000));
        assert_eq!(parse_gwei("20"), Ok(20_000_000_000));
        assert_eq!(parse_gwei("0.000000001"), Ok(1));
        assert!(parse_gwei("0").is_err());
        assert!(parse_gwei("1.").is_err());
        assert!(parse_gwei(".5").is_err());
        assert!(parse_gwei("0.0000000001").is_err());
        assert!(parse_gwei("-1").is_err());
        assert!(parse_gwei("99999999999").is_err());
    }

    #[test]
    fn cli_shape_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
