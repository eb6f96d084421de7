//! ELMO (EMREX) XML credentials: parsing, validation and classification.

mod classify;
mod parse;
mod validate;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use base64::Engine;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::xmldsig::ElmoXmlSignature;

pub use classify::detect_document_type;
pub(crate) use parse::parse_timestamp;
pub use parse::{
    parse_elmo, parse_elmo_with, ParseOptions, DEFAULT_MAX_INPUT_BYTES, MAX_LOS_DEPTH,
};
pub use validate::{validate_elmo, Finding, Severity, ValidationReport};

pub const ELMO_NS: &str = "https://github.com/emrex-eu/elmo-schemas/tree/v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ElmoError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("schema violation at `{path}`: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("input of {size} bytes exceeds the {limit} byte limit")]
    OversizeInput { size: usize, limit: usize },
    #[error("document matches neither the certificate nor the transcript shape")]
    UnclassifiableDocument,
}

impl ElmoError {
    /// Stable kebab-case code, used in HTTP and CLI error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            ElmoError::MalformedXml(_) => "malformed-xml",
            ElmoError::SchemaViolation { .. } => "schema-violation",
            ElmoError::OversizeInput { .. } => "oversize-input",
            ElmoError::UnclassifiableDocument => "unclassifiable-document",
        }
    }

    pub fn path(&self) -> Option<&str> {
        match self {
            ElmoError::SchemaViolation { path, .. } => Some(path),
            _ => None,
        }
    }
}

/// The two credential shapes the converter knows how to map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DocumentType {
    UpperSecondarySchoolCertificate,
    TranscriptOfRecords,
}

impl DocumentType {
    pub const ALL: [DocumentType; 2] = [
        DocumentType::UpperSecondarySchoolCertificate,
        DocumentType::TranscriptOfRecords,
    ];

    /// Type label used in the credential's `type` array.
    pub fn label(self) -> &'static str {
        match self {
            DocumentType::UpperSecondarySchoolCertificate => "UpperSecondarySchoolCertificate",
            DocumentType::TranscriptOfRecords => "TranscriptOfRecords",
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            DocumentType::UpperSecondarySchoolCertificate => "certificate",
            DocumentType::TranscriptOfRecords => "transcript",
        }
    }
}

impl fmt::Display for DocumentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DocumentType {
    type Err = String;

    /// Accepts the short names (`certificate`, `transcript`) and the labels.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        DocumentType::ALL
            .into_iter()
            .find(|d| d.short_name().eq_ignore_ascii_case(s) || d.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                format!("unknown document type `{s}` (expected certificate or transcript)")
            })
    }
}

/// An ELMO element the typed model has no field for, kept by path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extra {
    pub path: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Identifier {
    pub scheme: Option<String>,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Address {
    pub lines: Vec<String>,
    pub postal_code: Option<String>,
    pub locality: Option<String>,
    pub country: Option<String>,
    pub extras: Vec<Extra>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ElmoLearner {
    pub citizenship: Option<String>,
    pub identifiers: Vec<Identifier>,
    pub given_names: Option<String>,
    pub family_name: Option<String>,
    pub birth_date: Option<String>,
    /// Raw ISO/IEC 5218 text; see [`ElmoLearner::gender_code`].
    pub gender: Option<String>,
    pub current_address: Option<Address>,
    pub extras: Vec<Extra>,
}

impl ElmoLearner {
    pub fn gender_code(&self) -> Option<Result<i64, String>> {
        self.gender
            .as_deref()
            .map(|g| g.trim().parse::<i64>().map_err(|_| g.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ElmoIssuer {
    pub country: Option<String>,
    pub identifiers: Vec<Identifier>,
    pub title: Option<String>,
    pub url: Option<String>,
    pub current_address: Option<Address>,
    pub extras: Vec<Extra>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LosType {
    DegreeProgramme,
    Module,
    Course,
    Diploma,
    Other(String),
}

impl LosType {
    pub fn from_elmo(text: &str) -> Self {
        let squashed: String = text
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_ascii_lowercase();
        match squashed.as_str() {
            "degreeprogramme" | "degreeprogram" => LosType::DegreeProgramme,
            "module" => LosType::Module,
            "course" => LosType::Course,
            "diploma" => LosType::Diploma,
            _ => LosType::Other(text.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultStatus {
    Passed,
    Failed,
    InProgress,
}

impl ResultStatus {
    pub fn from_elmo(text: &str) -> Option<Self> {
        match text
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_', ' '], "")
            .as_str()
        {
            "passed" => Some(ResultStatus::Passed),
            "failed" => Some(ResultStatus::Failed),
            "inprogress" => Some(ResultStatus::InProgress),
            _ => None,
        }
    }
}

/// Result block of a learning opportunity instance. Values are kept as
/// written; the typed accessors parse on demand.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ElmoResult {
    pub grade: Option<String>,
    pub credits: Option<String>,
    pub credit_scheme: Option<String>,
    pub status: Option<String>,
}

impl ElmoResult {
    pub fn is_empty(&self) -> bool {
        self.grade.is_none()
            && self.credits.is_none()
            && self.credit_scheme.is_none()
            && self.status.is_none()
    }

    /// A grade or a credit value; status alone does not count.
    pub fn carries_outcome(&self) -> bool {
        self.grade.is_some() || self.credits.is_some()
    }

    pub fn credits_value(&self) -> Option<Result<f64, String>> {
        self.credits.as_deref().map(parse_decimal)
    }

    pub fn status_value(&self) -> Option<ResultStatus> {
        self.status.as_deref().and_then(ResultStatus::from_elmo)
    }
}

pub(crate) fn parse_decimal(text: &str) -> Result<f64, String> {
    match text.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(text.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElmoLearningOpportunity {
    /// Model path, e.g. `reports[0].children[2]`.
    pub path: String,
    pub depth: usize,
    pub los_type: Option<String>,
    pub title: String,
    pub title_lang: Option<String>,
    pub isced_code: Option<String>,
    pub eqf_level: Option<String>,
    pub language_of_instruction: Option<String>,
    pub grading_scheme: Option<String>,
    pub result: ElmoResult,
    pub children: Vec<ElmoLearningOpportunity>,
    pub extras: Vec<Extra>,
}

impl ElmoLearningOpportunity {
    pub fn kind(&self) -> Option<LosType> {
        self.los_type.as_deref().map(LosType::from_elmo)
    }

    pub fn eqf_value(&self) -> Option<Result<i64, String>> {
        self.eqf_level
            .as_deref()
            .map(|v| v.trim().parse::<i64>().map_err(|_| v.to_string()))
    }

    /// Pre-order walk over this node and its descendants.
    pub fn walk(&self) -> Vec<&ElmoLearningOpportunity> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.walk());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ElmoAttachment {
    pub type_label: Option<String>,
    /// Content as written, usually a `data:` URI.
    pub content: Option<String>,
    pub extras: Vec<Extra>,
}

impl ElmoAttachment {
    pub fn mime_type(&self) -> Option<&str> {
        let rest = self.content.as_deref()?.strip_prefix("data:")?;
        let meta = rest.split_once(',')?.0;
        let mime = meta.split(';').next().unwrap_or("");
        (!mime.is_empty()).then_some(mime)
    }

    /// Decoded bytes of a `data:` URI, or the raw text otherwise.
    pub fn content_bytes(&self) -> Option<Vec<u8>> {
        let content = self.content.as_deref()?;
        if let Some((meta, payload)) = content
            .strip_prefix("data:")
            .and_then(|r| r.split_once(','))
        {
            if meta.ends_with(";base64") {
                let cleaned: String = payload.chars().filter(|c| !c.is_whitespace()).collect();
                return base64::engine::general_purpose::STANDARD
                    .decode(cleaned)
                    .ok();
            }
            return Some(payload.as_bytes().to_vec());
        }
        Some(content.as_bytes().to_vec())
    }
}

/// A parsed ELMO document. Immutable once built; the raw input is shared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElmoDocument {
    pub generated_date: DateTime<Utc>,
    /// `generatedDate` exactly as written.
    pub generated_date_raw: String,
    pub learner: ElmoLearner,
    pub issuer: ElmoIssuer,
    /// Top-level learning opportunities of every report, in document order.
    pub reports: Vec<ElmoLearningOpportunity>,
    pub attachments: Vec<ElmoAttachment>,
    pub xml_signature: Option<ElmoXmlSignature>,
    /// Root-level and report-level elements without a typed field.
    pub extras: Vec<Extra>,
    raw_bytes: Arc<[u8]>,
}

/// Whether a flattened claim came from a typed field or the extras map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClaimOrigin {
    Typed,
    Extra,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafClaim {
    pub path: String,
    pub value: String,
    pub origin: ClaimOrigin,
}

impl ElmoDocument {
    pub fn raw_bytes(&self) -> &[u8] {
        &self.raw_bytes
    }

    /// Every learning opportunity, pre-order.
    pub fn all_learning_opportunities(&self) -> Vec<&ElmoLearningOpportunity> {
        self.reports.iter().flat_map(|r| r.walk()).collect()
    }

    /// Flattens the document into `(path, value)` leaf claims: every typed
    /// field that is set plus every extras entry.
    pub fn leaf_claims(&self) -> Vec<LeafClaim> {
        let mut out = Vec::new();
        let mut typed = |path: String, value: &str| {
            out.push(LeafClaim {
                path,
                value: value.to_string(),
                origin: ClaimOrigin::Typed,
            })
        };
        typed("generatedDate".into(), &self.generated_date_raw);

        let l = &self.learner;
        flatten_identifiers("learner", &l.identifiers, &mut typed);
        for (name, v) in [
            ("citizenship", &l.citizenship),
            ("givenNames", &l.given_names),
            ("familyName", &l.family_name),
            ("bday", &l.birth_date),
            ("gender", &l.gender),
        ] {
            if let Some(v) = v {
                typed(format!("learner.{name}"), v);
            }
        }
        if let Some(a) = &l.current_address {
            flatten_address("learner.currentAddress", a, &mut typed);
        }

        let i = &self.issuer;
        flatten_identifiers("issuer", &i.identifiers, &mut typed);
        for (name, v) in [
            ("country", &i.country),
            ("title", &i.title),
            ("url", &i.url),
        ] {
            if let Some(v) = v {
                typed(format!("issuer.{name}"), v);
            }
        }
        if let Some(a) = &i.current_address {
            flatten_address("issuer.currentAddress", a, &mut typed);
        }

        for los in self.all_learning_opportunities() {
            let p = &los.path;
            typed(format!("{p}.title"), &los.title);
            for (name, v) in [
                ("title@lang", &los.title_lang),
                ("type", &los.los_type),
                ("iscedCode", &los.isced_code),
                ("eqfLevel", &los.eqf_level),
                ("languageOfInstruction", &los.language_of_instruction),
                ("gradingScheme", &los.grading_scheme),
                ("result.grade", &los.result.grade),
                ("result.credits", &los.result.credits),
                ("result.creditScheme", &los.result.credit_scheme),
                ("result.status", &los.result.status),
            ] {
                if let Some(v) = v {
                    typed(format!("{p}.{name}"), v);
                }
            }
        }

        for (idx, a) in self.attachments.iter().enumerate() {
            if let Some(v) = &a.type_label {
                typed(format!("attachments[{idx}].type"), v);
            }
            if let Some(v) = &a.content {
                typed(format!("attachments[{idx}].content"), v);
            }
        }

        let extras = self
            .extras
            .iter()
            .chain(&l.extras)
            .chain(l.current_address.iter().flat_map(|a| &a.extras))
            .chain(&i.extras)
            .chain(i.current_address.iter().flat_map(|a| &a.extras))
            .chain(
                self.all_learning_opportunities()
                    .into_iter()
                    .flat_map(|o| &o.extras),
            )
            .chain(self.attachments.iter().flat_map(|a| &a.extras));
        for e in extras {
            out.push(LeafClaim {
                path: e.path.clone(),
                value: e.value.clone(),
                origin: ClaimOrigin::Extra,
            });
        }
        out
    }
}

fn flatten_identifiers(prefix: &str, ids: &[Identifier], emit: &mut impl FnMut(String, &str)) {
    for (idx, id) in ids.iter().enumerate() {
        emit(format!("{prefix}.identifier[{idx}]"), &id.value);
        if let Some(s) = &id.scheme {
            emit(format!("{prefix}.identifier[{idx}]@type"), s);
        }
    }
}

fn flatten_address(prefix: &str, a: &Address, emit: &mut impl FnMut(String, &str)) {
    for (idx, line) in a.lines.iter().enumerate() {
        emit(format!("{prefix}.addressLine[{idx}]"), line);
    }
    for (name, v) in [
        ("postalCode", &a.postal_code),
        ("locality", &a.locality),
        ("country", &a.country),
    ] {
        if let Some(v) = v {
            emit(format!("{prefix}.{name}"), v);
        }
    }
}
