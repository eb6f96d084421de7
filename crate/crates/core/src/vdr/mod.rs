//! A local stand-in for a verifiable data registry: DID documents, a
//! trusted issuer list and a trusted schema list, persisted as a
//! hash-chained JSON-lines log.

mod registry;
mod verify;

use k256::ecdsa::VerifyingKey;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{derive_did, KeyPair, KeyScheme, DID_METHOD_EBSI};
use crate::eds::{Did, Timestamp, DEFAULT_KEY_FRAGMENT};

pub use registry::{
    entry_hash, verify_log_file, LogEntry, Record, Registry, RegistryState, GENESIS_HASH,
};
pub use verify::{
    verify_credential_full, CheckOutcome, VerificationCheck, VerificationReport,
    CHECK_ISSUER_RESOLVES, CHECK_ISSUER_TRUSTED, CHECK_PROOF, CHECK_SCHEMA_TRUSTED,
};

pub const SECP256K1_KEY_TYPE: &str = "EcdsaSecp256k1VerificationKey2019";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegistryError {
    #[error("DID `{0}` is already registered")]
    DuplicateDid(Did),
    #[error("invalid DID document: {0}")]
    InvalidDocument(String),
    #[error("registry log line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("registry I/O: {0}")]
    Io(String),
}

impl RegistryError {
    pub fn code(&self) -> &'static str {
        match self {
            RegistryError::DuplicateDid(_) => "duplicate-did",
            RegistryError::InvalidDocument(_) => "invalid-did-document",
            RegistryError::CorruptLog { .. } => "corrupt-log",
            RegistryError::Io(_) => "registry-io",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationMethod {
    pub id: String,
    #[serde(rename = "type")]
    pub scheme: String,
    pub controller: Did,
    /// `z` + base58btc of the compressed SEC1 public key.
    pub public_key_multibase: String,
}

impl VerificationMethod {
    pub fn public_key_bytes(&self) -> Option<Vec<u8>> {
        let rest = self.public_key_multibase.strip_prefix('z')?;
        bs58::decode(rest).into_vec().ok()
    }

    pub fn ec_public_key(&self) -> Option<VerifyingKey> {
        if self.scheme != SECP256K1_KEY_TYPE {
            return None;
        }
        VerifyingKey::from_sec1_bytes(&self.public_key_bytes()?).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DidDocument {
    pub id: Did,
    pub verification_method: Vec<VerificationMethod>,
    pub created: Timestamp,
    pub updated: Timestamp,
}

impl DidDocument {
    /// Document for a secp256k1 key: the DID is derived from the key and
    /// the single method is `<did>#keys-1`.
    pub fn for_key(key: &KeyPair, created: Timestamp) -> Result<Self, RegistryError> {
        if key.scheme() != KeyScheme::EcSecp256k1 {
            return Err(RegistryError::InvalidDocument(
                "DID documents carry secp256k1 keys only".into(),
            ));
        }
        let public = key.public_key_bytes();
        let id = derive_did(&public, DID_METHOD_EBSI)
            .map_err(|e| RegistryError::InvalidDocument(e.to_string()))?;
        Ok(Self {
            verification_method: vec![VerificationMethod {
                id: id.key_url(DEFAULT_KEY_FRAGMENT),
                scheme: SECP256K1_KEY_TYPE.to_string(),
                controller: id.clone(),
                public_key_multibase: format!("z{}", bs58::encode(public).into_string()),
            }],
            id,
            created,
            updated: created,
        })
    }

    pub fn find_method(&self, id: &str) -> Option<&VerificationMethod> {
        self.verification_method.iter().find(|m| m.id == id)
    }

    pub fn validate(&self) -> Result<(), RegistryError> {
        let bad = |m: String| Err(RegistryError::InvalidDocument(m));
        if self.verification_method.is_empty() {
            return bad("at least one verification method is required".into());
        }
        let prefix = format!("{}#", self.id);
        for m in &self.verification_method {
            if !m.id.starts_with(&prefix) || m.id.len() == prefix.len() {
                return bad(format!("method `{}` is not a key of `{}`", m.id, self.id));
            }
            if m.public_key_bytes().is_none_or(|b| b.is_empty()) {
                return bad(format!("method `{}` has no public key", m.id));
            }
        }
        if self.updated < self.created {
            return bad("updated precedes created".into());
        }
        Ok(())
    }
}
