use serde::{Deserialize, Serialize};

use super::{derive_did, jws, CryptoError, KeyPair, VerificationResult, DID_METHOD_EBSI};
use crate::eds::{
    serialize_jsonld, Did, EdsCredential, ProofBlock, ProofState, Timestamp, DEFAULT_KEY_FRAGMENT,
    PROOF_TYPE, W3C_CREDENTIALS_CONTEXT,
};
use crate::vdr::DidDocument;

pub const PRESENTATION_TYPE: &str = "VerifiablePresentation";

/// Signs the credential with a detached ES256K JWS over its canonical bytes
/// (with `proof.jws` empty). Only `proof.type`, `proof.verificationMethod`
/// and `proof.jws` change.
pub fn sign_credential(
    cred: &EdsCredential,
    key: &KeyPair,
    verification_method: &str,
) -> Result<EdsCredential, CryptoError> {
    let signing_key = key.ec_signing_key()?;
    match cred.proof.state() {
        ProofState::Placeholder | ProofState::Pending => {}
        ProofState::Signed | ProofState::Malformed => return Err(CryptoError::AlreadySigned),
    }
    let mut out = cred.clone();
    out.proof.proof_type = PROOF_TYPE.to_string();
    out.proof.verification_method = verification_method.to_string();
    let payload = out.signing_payload()?;
    out.proof.jws = jws::sign_detached(signing_key, &payload);
    Ok(out)
}

/// Verifies the credential proof against the key in `did_doc` whose id
/// equals `proof.verificationMethod`.
pub fn verify_credential_signature(
    cred: &EdsCredential,
    did_doc: &DidDocument,
) -> Result<VerificationResult, CryptoError> {
    match cred.proof.state() {
        ProofState::Placeholder => return Err(CryptoError::PlaceholderProof),
        ProofState::Pending => return Err(CryptoError::UnsignedCredential),
        ProofState::Malformed => return Ok(VerificationResult::SignatureInvalid),
        ProofState::Signed => {}
    }
    let vm = &cred.proof.verification_method;
    let method = did_doc
        .find_method(vm)
        .ok_or_else(|| CryptoError::UnknownVerificationMethod(vm.clone()))?;
    let Some(key) = method.ec_public_key() else {
        return Ok(VerificationResult::UnsupportedAlgorithm);
    };
    let Ok(payload) = cred.signing_payload() else {
        return Ok(VerificationResult::SignatureInvalid);
    };
    Ok(if jws::verify_detached(&cred.proof.jws, &payload, &key) {
        VerificationResult::Valid
    } else {
        VerificationResult::SignatureInvalid
    })
}

/// A one-time presentation: the holder signs the credential bytes followed
/// by a verifier-chosen nonce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifiablePresentation {
    #[serde(rename = "@context")]
    pub contexts: Vec<String>,
    #[serde(rename = "type")]
    pub types: Vec<String>,
    pub holder: Did,
    #[serde(rename = "verifiableCredential")]
    pub credential: EdsCredential,
    pub nonce: String,
    pub proof: ProofBlock,
}

fn presentation_payload(cred: &EdsCredential, nonce: &str) -> Result<Vec<u8>, CryptoError> {
    let mut bytes = serialize_jsonld(cred)?;
    bytes.extend_from_slice(nonce.as_bytes());
    Ok(bytes)
}

pub fn create_presentation(
    cred: &EdsCredential,
    holder_key: &KeyPair,
    nonce: &str,
) -> Result<VerifiablePresentation, CryptoError> {
    if cred.proof.state() != ProofState::Signed {
        return Err(CryptoError::UnsignedCredential);
    }
    if nonce.is_empty() {
        return Err(CryptoError::EmptyNonce);
    }
    let signing_key = holder_key.ec_signing_key()?;
    let holder = derive_did(&holder_key.public_key_bytes(), DID_METHOD_EBSI)?;
    let payload = presentation_payload(cred, nonce)?;
    Ok(VerifiablePresentation {
        contexts: vec![W3C_CREDENTIALS_CONTEXT.to_string()],
        types: vec![PRESENTATION_TYPE.to_string()],
        credential: cred.clone(),
        nonce: nonce.to_string(),
        proof: ProofBlock {
            proof_type: PROOF_TYPE.to_string(),
            created: Timestamp(chrono::Utc::now()),
            verification_method: holder.key_url(DEFAULT_KEY_FRAGMENT),
            jws: jws::sign_detached(signing_key, &payload),
        },
        holder,
    })
}

/// Checks the holder proof for `expected_nonce`. A presentation made for a
/// different nonce fails with `SignatureInvalid`.
pub fn verify_presentation(
    vp: &VerifiablePresentation,
    holder_doc: &DidDocument,
    expected_nonce: &str,
) -> Result<VerificationResult, CryptoError> {
    if expected_nonce.is_empty() {
        return Err(CryptoError::EmptyNonce);
    }
    let vm = &vp.proof.verification_method;
    if holder_doc.id != vp.holder {
        return Err(CryptoError::UnknownVerificationMethod(vm.clone()));
    }
    let method = holder_doc
        .find_method(vm)
        .ok_or_else(|| CryptoError::UnknownVerificationMethod(vm.clone()))?;
    let Some(key) = method.ec_public_key() else {
        return Ok(VerificationResult::UnsupportedAlgorithm);
    };
    let Ok(payload) = presentation_payload(&vp.credential, expected_nonce) else {
        return Ok(VerificationResult::SignatureInvalid);
    };
    Ok(if jws::verify_detached(&vp.proof.jws, &payload, &key) {
        VerificationResult::Valid
    } else {
        VerificationResult::SignatureInvalid
    })
}
