use serde::{Deserialize, Serialize};

use super::genesis::AuthorityEntry;
use crate::canonical::{hash_bytes, hash_concat, hash_of};
use crate::crypto::KeyPair;
use crate::registry::TxEnvelope;
use crate::types::{Address, Hash, Signature};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockHeader {
    pub index: u64,
    /// Logical seconds since genesis.
    pub timestamp: u64,
    pub prev_hash: Hash,
    pub tx_root: Hash,
    pub sealer: Address,
    pub state_root: Hash,
}

impl BlockHeader {
    pub fn hash(&self) -> Hash {
        hash_of(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub header: BlockHeader,
    pub txs: Vec<TxEnvelope>,
    /// Sealer's signature over the header hash; all zeros on block 0.
    pub seal: Signature,
}

impl Block {
    pub fn index(&self) -> u64 {
        self.header.index
    }

    pub fn hash(&self) -> Hash {
        self.header.hash()
    }
}

/// Sequential fold `acc = H(acc || H(tx))` starting from `H("")`.
pub fn tx_root(txs: &[TxEnvelope]) -> Hash {
    txs.iter().fold(hash_bytes(b""), |acc, tx| {
        hash_concat(&[acc.as_bytes(), tx.hash().as_bytes()])
    })
}

/// The authority whose turn it is to seal block `index`.
pub fn expected_sealer(authorities: &[AuthorityEntry], index: u64) -> &AuthorityEntry {
    let n = authorities.len() as u64;
    &authorities[(index % n) as usize]
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SealError {
    #[error("{0} is not an authority")]
    NotAuthority(Address),
    #[error("block {index} must be sealed by {expected}, not {got}")]
    WrongTurn {
        index: u64,
        expected: Address,
        got: Address,
    },
    #[error("timestamp {timestamp} precedes parent timestamp {parent}")]
    ClockRegression { timestamp: u64, parent: u64 },
}

/// Builds and signs the child of `parent`.
pub fn seal_block(
    pending: &[TxEnvelope],
    parent: &BlockHeader,
    state_root: Hash,
    sealer_key: &KeyPair,
    timestamp: u64,
    authorities: &[AuthorityEntry],
) -> Result<Block, SealError> {
    let sealer = sealer_key.address();
    if !authorities.iter().any(|a| a.address == sealer) {
        return Err(SealError::NotAuthority(sealer));
    }
    let index = parent.index + 1;
    let expected = expected_sealer(authorities, index).address;
    if expected != sealer {
        return Err(SealError::WrongTurn {
            index,
            expected,
            got: sealer,
        });
    }
    if timestamp < parent.timestamp {
        return Err(SealError::ClockRegression {
            timestamp,
            parent: parent.timestamp,
        });
    }
    let header = BlockHeader {
        index,
        timestamp,
        prev_hash: parent.hash(),
        tx_root: tx_root(pending),
        sealer,
        state_root,
    };
    let seal = sealer_key.sign(header.hash().as_bytes());
    Ok(Block {
        header,
        txs: pending.to_vec(),
        seal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::verify;

    fn keys(n: u8) -> (Vec<KeyPair>, Vec<AuthorityEntry>) {
        let keys: Vec<KeyPair> = (1..=n).map(|i| KeyPair::from_secret([i; 32])).collect();
        let entries = keys
            .iter()
            .map(|k| AuthorityEntry {
                address: k.address(),
                public_key: k.public_key(),
            })
            .collect();
        (keys, entries)
    }

    fn genesis_header(sealer: Address) -> BlockHeader {
        BlockHeader {
            index: 0,
            timestamp: 0,
            prev_hash: Hash::ZERO,
            tx_root: tx_root(&[]),
            sealer,
            state_root: Hash::ZERO,
        }
    }

    #[test]
    fn empty_block_on_genesis() {
        let (keys, auth) = keys(1);
        let parent = genesis_header(auth[0].address);
        let block = seal_block(&[], &parent, Hash::ZERO, &keys[0], 10, &auth).unwrap();
        assert_eq!(block.header.index, 1);
        assert_eq!(block.header.tx_root, hash_bytes(b""));
        assert_eq!(block.header.prev_hash, parent.hash());
        assert!(verify(
            &keys[0].public_key(),
            block.hash().as_bytes(),
            &block.seal
        ));
    }

    #[test]
    fn round_robin_schedule() {
        let (keys, auth) = keys(3);
        let mut parent = genesis_header(auth[0].address);
        let mut sealers = Vec::new();
        for i in 1..=6u64 {
            let key = &keys[(i % 3) as usize];
            let block = seal_block(&[], &parent, Hash::ZERO, key, i, &auth).unwrap();
            sealers.push(
                auth.iter()
                    .position(|a| a.address == block.header.sealer)
                    .unwrap(),
            );
            parent = block.header;
        }
        // authorities[i mod 3] for i = 1..=6.
        assert_eq!(sealers, vec![1, 2, 0, 1, 2, 0]);
    }

    #[test]
    fn seal_errors() {
        let (keys, auth) = keys(3);
        let parent = genesis_header(auth[0].address);
        assert!(matches!(
            seal_block(&[], &parent, Hash::ZERO, &keys[0], 1, &auth),
            Err(SealError::WrongTurn { index: 1, .. })
        ));
        let outsider = KeyPair::from_secret([99; 32]);
        assert_eq!(
            seal_block(&[], &parent, Hash::ZERO, &outsider, 1, &auth),
            Err(SealError::NotAuthority(outsider.address()))
        );
        let mut later = parent.clone();
        later.timestamp = 50;
        assert_eq!(
            seal_block(&[], &later, Hash::ZERO, &keys[1], 49, &auth),
            Err(SealError::ClockRegression {
                timestamp: 49,
                parent: 50
            })
        );
    }

    #[test]
    fn sealing_is_deterministic() {
        let (keys, auth) = keys(2);
        let parent = genesis_header(auth[0].address);
        let tx = TxEnvelope::sign(&keys[0], 5, 0, crate::registry::TxKind::FaucetClaim, 1);
        let a = seal_block(
            std::slice::from_ref(&tx),
            &parent,
            Hash([7; 32]),
            &keys[1],
            3,
            &auth,
        )
        .unwrap();
        let b = seal_block(&[tx], &parent, Hash([7; 32]), &keys[1], 3, &auth).unwrap();
        assert_eq!(
            crate::canonical::canonical_serialize(&a),
            crate::canonical::canonical_serialize(&b)
        );
    }

    #[test]
    fn tx_root_is_sequential_fold() {
        let k = KeyPair::from_secret([5; 32]);
        let t1 = TxEnvelope::sign(&k, 5, 0, crate::registry::TxKind::FaucetClaim, 1);
        let t2 = TxEnvelope::sign(&k, 5, 1, crate::registry::TxKind::FaucetClaim, 1);
        let step1 = hash_concat(&[hash_bytes(b"").as_bytes(), t1.hash().as_bytes()]);
        let step2 = hash_concat(&[step1.as_bytes(), t2.hash().as_bytes()]);
        assert_eq!(tx_root(&[t1.clone(), t2.clone()]), step2);
        assert_ne!(tx_root(&[t2, t1]), step2);
    }
}
