use serde::{Deserialize, Serialize};

use super::RegistryState;
use crate::crypto::{verify_credential_signature, CryptoError, VerificationResult};
use crate::eds::{EdsCredential, ProofState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckOutcome {
    Pass,
    Fail,
    /// Not evaluated because a prerequisite is missing.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationCheck {
    pub name: String,
    pub outcome: CheckOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub valid: bool,
    pub checks: Vec<VerificationCheck>,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&VerificationCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_ISSUER_RESOLVES: &str = "issuer-did-resolves";
pub const CHECK_ISSUER_TRUSTED: &str = "issuer-trusted";
pub const CHECK_SCHEMA_TRUSTED: &str = "schema-trusted";
pub const CHECK_PROOF: &str = "proof-valid";

fn check(
    name: &str,
    outcome: CheckOutcome,
    code: Option<&str>,
    detail: String,
) -> VerificationCheck {
    VerificationCheck {
        name: name.to_string(),
        outcome,
        code: code.map(str::to_string),
        detail,
    }
}

/// Runs the four verifier checks in order: the issuer DID resolves, the
/// issuer is a trusted issuer, the credential schema is trusted, and the
/// proof verifies against the resolved issuer document. Each check is
/// evaluated on its own; the proof check is skipped when the issuer does
/// not resolve, except that a placeholder or unsigned proof always fails.
pub fn verify_credential_full(state: &RegistryState, cred: &EdsCredential) -> VerificationReport {
    use CheckOutcome::*;
    let issuer = &cred.issuer;
    let resolved = state.resolve_did(issuer);
    let mut checks = Vec::with_capacity(4);

    checks.push(match resolved {
        Some(_) => check(
            CHECK_ISSUER_RESOLVES,
            Pass,
            None,
            format!("{issuer} resolved"),
        ),
        None => check(
            CHECK_ISSUER_RESOLVES,
            Fail,
            Some("unknown-did"),
            format!("{issuer} is not registered"),
        ),
    });
    checks.push(if state.is_trusted_issuer(issuer) {
        check(
            CHECK_ISSUER_TRUSTED,
            Pass,
            None,
            format!("{issuer} is a trusted issuer"),
        )
    } else {
        check(
            CHECK_ISSUER_TRUSTED,
            Fail,
            Some("untrusted-issuer"),
            format!("{issuer} is not a trusted issuer"),
        )
    });
    let schema = &cred.credential_schema.id;
    checks.push(if state.is_trusted_schema(schema) {
        check(
            CHECK_SCHEMA_TRUSTED,
            Pass,
            None,
            format!("{schema} is a trusted schema"),
        )
    } else {
        check(
            CHECK_SCHEMA_TRUSTED,
            Fail,
            Some("unknown-schema"),
            format!("{schema} is not a trusted schema"),
        )
    });

    let vm = &cred.proof.verification_method;
    let proof = match (cred.proof.state(), resolved) {
        (ProofState::Placeholder, _) => check(
            CHECK_PROOF,
            Fail,
            Some(CryptoError::PlaceholderProof.code()),
            "proof is the placeholder".into(),
        ),
        (ProofState::Pending, _) => check(
            CHECK_PROOF,
            Fail,
            Some(CryptoError::UnsignedCredential.code()),
            "proof has no signature".into(),
        ),
        (_, None) => check(
            CHECK_PROOF,
            Skipped,
            None,
            "issuer DID document unavailable".into(),
        ),
        (_, Some(doc)) => match verify_credential_signature(cred, doc) {
            Ok(VerificationResult::Valid) => check(
                CHECK_PROOF,
                Pass,
                None,
                format!("signature by {vm} verified"),
            ),
            Ok(r) => check(
                CHECK_PROOF,
                Fail,
                Some(r.code()),
                format!("signature by {vm} did not verify"),
            ),
            Err(e) => check(CHECK_PROOF, Fail, Some(e.code()), e.to_string()),
        },
    };
    checks.push(proof);

    VerificationReport {
        valid: checks.iter().all(|c| c.outcome == Pass),
        checks,
    }
}
