use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crypto::address_of;
use crate::gas::GasParams;
use crate::registry::{Account, ChainRules, RegistryState, Role};
use crate::types::{Address, PublicKey, Wei};

pub const DEFAULT_CHAIN_ID: u64 = 5;
/// 0.5 ETH.
pub const DEFAULT_FAUCET_AMOUNT: Wei = 500_000_000_000_000_000;
/// 24 hours.
pub const DEFAULT_FAUCET_COOLDOWN: u64 = 86_400;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthorityEntry {
    pub address: Address,
    pub public_key: PublicKey,
}

#[derive(Debug, thiserror::Error)]
pub enum GenesisError {
    #[error("genesis file {0}: {1}")]
    Io(String, std::io::Error),
    #[error("genesis file {0}: {1}")]
    Parse(String, serde_json::Error),
    #[error("invalid genesis: {0}")]
    Invalid(String),
}

fn default_chain_id() -> u64 {
    DEFAULT_CHAIN_ID
}

fn default_faucet_amount() -> Wei {
    DEFAULT_FAUCET_AMOUNT
}

fn default_faucet_cooldown() -> u64 {
    DEFAULT_FAUCET_COOLDOWN
}

/// Chain parameters fixed at genesis: authorities, roles, balances, costs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenesisConfig {
    #[serde(default = "default_chain_id")]
    pub chain_id: u64,
    /// Sealers, in round-robin order.
    pub authorities: Vec<AuthorityEntry>,
    #[serde(default)]
    pub roles: BTreeMap<Address, Role>,
    #[serde(default)]
    pub initial_balances: BTreeMap<Address, Wei>,
    #[serde(default)]
    pub gas_params: GasParams,
    #[serde(default = "default_faucet_amount")]
    pub faucet_amount: Wei,
    #[serde(default = "default_faucet_cooldown")]
    pub faucet_cooldown: u64,
}

impl GenesisConfig {
    /// Config with default parameters and the given sealers.
    pub fn new(authorities: Vec<AuthorityEntry>) -> Self {
        Self {
            chain_id: DEFAULT_CHAIN_ID,
            authorities,
            roles: BTreeMap::new(),
            initial_balances: BTreeMap::new(),
            gas_params: GasParams::default(),
            faucet_amount: DEFAULT_FAUCET_AMOUNT,
            faucet_cooldown: DEFAULT_FAUCET_COOLDOWN,
        }
    }

    pub fn validate(&self) -> Result<(), GenesisError> {
        let invalid = |m: String| Err(GenesisError::Invalid(m));
        if self.chain_id == 0 {
            return invalid("chain_id must be positive".into());
        }
        if self.authorities.is_empty() {
            return invalid("at least one authority is required".into());
        }
        let mut seen = BTreeSet::new();
        for a in &self.authorities {
            if address_of(&a.public_key) != a.address {
                return invalid(format!(
                    "authority {} does not match its public key",
                    a.address
                ));
            }
            if !seen.insert(a.address) {
                return invalid(format!("authority {} listed twice", a.address));
            }
            if let Some(role) = self.roles.get(&a.address) {
                if *role != Role::Authority {
                    return invalid(format!("authority {} has role {role}", a.address));
                }
            }
        }
        if let Some(addr) = self
            .initial_balances
            .keys()
            .find(|a| !self.roles.contains_key(a) && !seen.contains(a))
        {
            return invalid(format!("initial balance for unknown account {addr}"));
        }
        self.gas_params.validate().map_err(GenesisError::Invalid)
    }

    pub fn rules(&self) -> ChainRules {
        ChainRules {
            gas: self.gas_params.clone(),
            faucet_amount: self.faucet_amount,
            faucet_cooldown: self.faucet_cooldown,
        }
    }

    /// Registry state before any transaction.
    pub fn genesis_state(&self) -> RegistryState {
        let mut state = RegistryState::new(self.chain_id);
        for (addr, role) in &self.roles {
            state.accounts.insert(*addr, Account::new(*addr, *role, 0));
        }
        for a in &self.authorities {
            state
                .accounts
                .entry(a.address)
                .or_insert_with(|| Account::new(a.address, Role::Authority, 0));
        }
        for (addr, balance) in &self.initial_balances {
            if let Some(acct) = state.accounts.get_mut(addr) {
                acct.balance = *balance;
            }
        }
        state
    }

    pub fn initial_supply(&self) -> Wei {
        self.initial_balances.values().sum()
    }

    pub fn authority_index(&self, address: &Address) -> Option<usize> {
        self.authorities.iter().position(|a| a.address == *address)
    }

    pub fn load(path: &Path) -> Result<Self, GenesisError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| GenesisError::Io(name.clone(), e))?;
        let config: Self = serde_json::from_str(&text).map_err(|e| GenesisError::Parse(name, e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_pretty_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("genesis serializes");
        s.push('\n');
        s
    }
}
