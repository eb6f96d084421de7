//! Signatures on both sides of the conversion: X.509 XML-DSig on inbound
//! ELMO documents, detached ES256K JWS on outbound credentials and
//! presentations.

mod did;
pub mod jws;
mod keys;
mod proofs;
pub mod xmldsig;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eds::EdsError;

pub use did::{derive_did, DID_METHOD_EBSI};
pub use keys::{KeyPair, KeyScheme};
pub use proofs::{
    create_presentation, sign_credential, verify_credential_signature, verify_presentation,
    VerifiablePresentation, PRESENTATION_TYPE,
};
pub use xmldsig::{verify_xmldsig, ElmoXmlSignature};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("document carries no XML signature")]
    MissingSignature,
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("credential proof is the placeholder; the credential is unsigned")]
    PlaceholderProof,
    #[error("credential is not signed")]
    UnsignedCredential,
    #[error("credential is already signed")]
    AlreadySigned,
    #[error("verification method `{0}` not found in the DID document")]
    UnknownVerificationMethod(String),
    #[error("presentation nonce must not be empty")]
    EmptyNonce,
    #[error("cannot sign document: {0}")]
    UnsignableDocument(String),
    #[error(transparent)]
    Credential(#[from] EdsError),
}

impl CryptoError {
    pub fn code(&self) -> &'static str {
        match self {
            CryptoError::MissingSignature => "missing-signature",
            CryptoError::InvalidKey(_) => "invalid-key",
            CryptoError::PlaceholderProof => "placeholder-proof",
            CryptoError::UnsignedCredential => "unsigned-credential",
            CryptoError::AlreadySigned => "already-signed",
            CryptoError::UnknownVerificationMethod(_) => "unknown-verification-method",
            CryptoError::EmptyNonce => "empty-nonce",
            CryptoError::UnsignableDocument(_) => "unsignable-document",
            CryptoError::Credential(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerificationResult {
    Valid,
    DigestMismatch,
    SignatureInvalid,
    UntrustedCertificate,
    UnsupportedAlgorithm,
}

impl VerificationResult {
    pub fn is_valid(self) -> bool {
        self == VerificationResult::Valid
    }

    pub fn code(self) -> &'static str {
        match self {
            VerificationResult::Valid => "valid",
            VerificationResult::DigestMismatch => "digest-mismatch",
            VerificationResult::SignatureInvalid => "signature-invalid",
            VerificationResult::UntrustedCertificate => "untrusted-certificate",
            VerificationResult::UnsupportedAlgorithm => "unsupported-algorithm",
        }
    }
}
