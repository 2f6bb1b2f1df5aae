//! Ed25519 keys and account address derivation.

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Serialize};

use crate::canonical::hash_bytes;
use crate::types::{Address, PublicKey, Signature};

/// Derives the account address of a verification key.
pub fn address_of(public_key: &PublicKey) -> Address {
    let digest = hash_bytes(public_key.as_bytes());
    let mut out = [0u8; 20];
    out.copy_from_slice(&digest.0[12..]);
    Address(out)
}

/// A signing key together with its derived identity.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
    public_key: PublicKey,
    address: Address,
}

impl KeyPair {
    /// Builds a key pair from 32 secret seed bytes.
    pub fn from_secret(secret: [u8; 32]) -> Self {
        let signing = SigningKey::from_bytes(&secret);
        let public_key = PublicKey(signing.verifying_key().to_bytes());
        Self {
            address: address_of(&public_key),
            public_key,
            signing,
        }
    }

    pub fn secret(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    pub fn public_key(&self) -> PublicKey {
        self.public_key
    }

    pub fn address(&self) -> Address {
        self.address
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.signing.sign(message).to_bytes())
    }
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair")
            .field("address", &self.address)
            .finish_non_exhaustive()
    }
}

/// Strict Ed25519 verification. Malformed keys simply fail.
pub fn verify(public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    let Ok(key) = VerifyingKey::from_bytes(public_key.as_bytes()) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
    key.verify_strict(message, &sig).is_ok()
}

#[derive(Debug, thiserror::Error)]
pub enum KeyFileError {
    #[error("bad secret key: {0}")]
    Hex(#[from] crate::types::HexError),
    #[error("secret key does not match the recorded public key or address")]
    IdentityMismatch,
}

/// On-disk key file. Stored unencrypted.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyFile {
    pub address: Address,
    pub public_key: PublicKey,
    pub role: crate::registry::Role,
    pub secret_key: String,
}

impl KeyFile {
    pub fn new(key: &KeyPair, role: crate::registry::Role) -> Self {
        Self {
            address: key.address(),
            public_key: key.public_key(),
            role,
            secret_key: format!("0x{}", hex::encode(key.secret())),
        }
    }

    /// Rebuilds the key pair, checking that the stored identity matches.
    pub fn key_pair(&self) -> Result<KeyPair, KeyFileError> {
        let secret = crate::types::decode_fixed_hex::<32>(&self.secret_key)?;
        let key = KeyPair::from_secret(secret);
        if key.public_key() != self.public_key || key.address() != self.address {
            return Err(KeyFileError::IdentityMismatch);
        }
        Ok(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_verify_and_single_bit_perturbations() {
        let key = KeyPair::from_secret([9u8; 32]);
        let msg = b"register P-001".to_vec();
        let sig = key.sign(&msg);
        assert!(verify(&key.public_key(), &msg, &sig));

        for bit in [0usize, 7, 40, 100] {
            let mut m = msg.clone();
            let len = m.len();
            m[bit / 8 % len] ^= 1 << (bit % 8);
            assert!(!verify(&key.public_key(), &m, &sig));
        }
        for bit in [0usize, 255, 256, 511] {
            let mut s = sig;
            s.0[bit / 8] ^= 1 << (bit % 8);
            assert!(!verify(&key.public_key(), &msg, &s));
        }
    }

    #[test]
    fn address_is_tail_of_key_hash() {
        let key = KeyPair::from_secret([1u8; 32]);
        let digest = hash_bytes(key.public_key().as_bytes());
        assert_eq!(&key.address().0[..], &digest.0[12..]);
    }
}
