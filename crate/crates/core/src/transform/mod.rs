//! ELMO to EDS conversion driven by per-document-type claim templates.

mod convert;
mod template;

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eds::{Did, EdsCredential, EdsError};
use crate::elmo::{DocumentType, ElmoError, ValidationReport};

pub use convert::{
    convert, convert_bytes, convert_with, credential_id, insert_placeholders, unaccounted_claims,
};
pub use template::{
    select_template, ClaimMapping, ConversionTemplate, TemplateSet, TransformId,
    ACHIEVEMENT_PLACEHOLDER, LOS_PLACEHOLDER,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConversionError {
    #[error("input failed validation with {} error(s)", .0.errors().count())]
    Validation(ValidationReport),
    #[error(transparent)]
    Elmo(#[from] ElmoError),
    #[error("required target `{target}` could not be filled: {reason}")]
    UnmappableClaim { target: String, reason: String },
    #[error("signing mode needs both an issuer and a holder DID")]
    MissingDid,
    #[error(transparent)]
    Eds(#[from] EdsError),
    #[error("conversion template: {0}")]
    Template(String),
}

impl ConversionError {
    pub fn code(&self) -> &'static str {
        match self {
            ConversionError::Validation(_) => "validation-failed",
            ConversionError::Elmo(e) => e.code(),
            ConversionError::UnmappableClaim { .. } => "unmappable-claim",
            ConversionError::MissingDid => "missing-did",
            ConversionError::Eds(e) => e.code(),
            ConversionError::Template(_) => "invalid-template",
        }
    }
}

/// Whether the output carries sentinel DIDs and a placeholder proof, or
/// real DIDs and an empty proof awaiting a signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConversionMode {
    #[default]
    Placeholder,
    Signing,
}

impl FromStr for ConversionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "placeholder" => Ok(ConversionMode::Placeholder),
            "signing" => Ok(ConversionMode::Signing),
            other => Err(format!(
                "unknown mode `{other}` (expected placeholder or signing)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConversionOptions {
    pub mode: ConversionMode,
    pub issuer_did: Option<Did>,
    pub holder_did: Option<Did>,
    /// Skip classification and use this type.
    pub document_type: Option<DocumentType>,
    /// `credentialSchema.id`; the placeholder schema when unset.
    pub schema_id: Option<String>,
}

impl ConversionOptions {
    pub fn signing(issuer: Did, holder: Did) -> Self {
        Self {
            mode: ConversionMode::Signing,
            issuer_did: Some(issuer),
            holder_did: Some(holder),
            ..Self::default()
        }
    }
}

/// One mapped claim: where it came from, where it went and what was written.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClaimTrace {
    pub source: String,
    pub target: String,
    pub value: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConversionWarning {
    pub path: String,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConversionReport {
    pub credential: EdsCredential,
    pub document_type: DocumentType,
    /// Source values copied verbatim into `extension`.
    pub carried_extensions: Vec<(String, String)>,
    pub mapped_claims: Vec<ClaimTrace>,
    pub warnings: Vec<ConversionWarning>,
}
