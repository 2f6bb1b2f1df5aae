//! The reference cost chain: one deploy at the default code size, one
//! registration, one sale, each sealed in its own block.

use crate::crypto::KeyPair;
use crate::ledger::{AuthorityEntry, Block, GenesisConfig, LedgerStore};
use crate::registry::{Role, TxEnvelope, TxKind};
use crate::types::WEI_PER_ETH;

pub const COST_PRODUCT_ID: &str = "P-001";

pub struct CostChain {
    pub genesis: GenesisConfig,
    pub blocks: Vec<Block>,
    pub authority: KeyPair,
    pub manufacturer: KeyPair,
    pub consumer: KeyPair,
}

pub fn cost_chain_kinds(consumer: &KeyPair, code_size: u32) -> [TxKind; 3] {
    [
        TxKind::Deploy { code_size },
        TxKind::Register {
            product_id: COST_PRODUCT_ID.into(),
            name: "Genuine Product".into(),
            metadata: String::new(),
        },
        TxKind::Sell {
            product_id: COST_PRODUCT_ID.into(),
            consumer: consumer.address(),
        },
    ]
}

/// Builds the chain at `gas_price` wei per gas, with otherwise default
/// parameters.
pub fn cost_chain(gas_price: u64) -> CostChain {
    let authority = KeyPair::from_secret([0xa1; 32]);
    let manufacturer = KeyPair::from_secret([0x11; 32]);
    let consumer = KeyPair::from_secret([0xc1; 32]);

    let mut genesis = GenesisConfig::new(vec![AuthorityEntry {
        address: authority.address(),
        public_key: authority.public_key(),
    }]);
    genesis
        .roles
        .insert(manufacturer.address(), Role::Manufacturer);
    genesis.roles.insert(consumer.address(), Role::Consumer);
    genesis
        .initial_balances
        .insert(manufacturer.address(), WEI_PER_ETH);

    let mut store = LedgerStore::in_memory(&genesis).expect("valid genesis");
    let code_size = genesis.gas_params.default_code_size;
    for (nonce, kind) in cost_chain_kinds(&consumer, code_size)
        .into_iter()
        .enumerate()
    {
        let tx = TxEnvelope::sign(
            &manufacturer,
            genesis.chain_id,
            nonce as u64,
            kind,
            gas_price,
        );
        let timestamp = store.tip().timestamp + 1;
        let (block, receipts) = store
            .seal_next(&[tx], &authority, timestamp)
            .expect("cost chain seals");
        assert!(
            receipts[0].accepted,
            "cost chain tx rejected: {:?}",
            receipts[0].error
        );
        store.append_block(block).expect("cost chain appends");
    }
    CostChain {
        blocks: store.blocks().to_vec(),
        genesis,
        authority,
        manufacturer,
        consumer,
    }
}
