//! EBSI diploma schema credential model and its canonical JSON-LD form.
//!
//! Canonical form is compact UTF-8 JSON with members in this order:
//! `@context`, `id`, `type`, `issuer`, `issuanceDate`, `credentialSubject`,
//! `credentialSchema`, `extension`, `proof`. Optional members that are
//! absent are omitted, as is an empty `extension`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use base64::Engine;
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

pub const W3C_CREDENTIALS_CONTEXT: &str = "https://www.w3.org/2018/credentials/v1";
pub const EBSI_CONTEXT: &str = "https://essif.europa.eu/schemas/v-a/2020/v1";
pub const VC_TYPE: &str = "VerifiableCredential";
pub const VA_TYPE: &str = "VerifiableAttestation";
pub const PLACEHOLDER_SCHEMA_ID: &str =
    "https://api.preprod.ebsi.eu/trusted-schemas-registry/v1/schemas/PLACEHOLDER";
pub const SCHEMA_VALIDATOR_TYPE: &str = "FullJsonSchemaValidator2021";
pub const PROOF_TYPE: &str = "EcdsaSecp256k1Signature2019";
pub const JWS_PLACEHOLDER: &str = "PLACEHOLDER";
pub const ISSUER_SENTINEL: &str = "did:ebsi:xyz-issuer";
pub const HOLDER_SENTINEL: &str = "did:ebsi:xyz-holder";
/// Fragment appended to an issuer DID to name its signing key.
pub const DEFAULT_KEY_FRAGMENT: &str = "keys-1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EdsError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("schema violation at `{path}`: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("invalid DID `{0}`")]
    InvalidDid(String),
}

impl EdsError {
    pub fn code(&self) -> &'static str {
        match self {
            EdsError::MalformedJson(_) => "malformed-json",
            EdsError::SchemaViolation { .. } => "schema-violation",
            EdsError::InvariantViolation(_) => "invariant-violation",
            EdsError::InvalidDid(_) => "invalid-did",
        }
    }
}

/// A decentralized identifier `did:<method>:<identifier>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Did {
    method: String,
    identifier: String,
}

impl Did {
    pub fn new(method: &str, identifier: &str) -> Result<Self, EdsError> {
        format!("did:{method}:{identifier}").parse()
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn identifier(&self) -> &str {
        &self.identifier
    }

    pub fn issuer_sentinel() -> Self {
        ISSUER_SENTINEL.parse().expect("sentinel is a valid DID")
    }

    pub fn holder_sentinel() -> Self {
        HOLDER_SENTINEL.parse().expect("sentinel is a valid DID")
    }

    /// DID URL of a key, `did:...#<fragment>`.
    pub fn key_url(&self, fragment: &str) -> String {
        format!("{self}#{fragment}")
    }
}

impl FromStr for Did {
    type Err = EdsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EdsError::InvalidDid(s.to_string());
        let rest = s.strip_prefix("did:").ok_or_else(bad)?;
        let (method, identifier) = rest.split_once(':').ok_or_else(bad)?;
        let method_ok = !method.is_empty()
            && method
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit());
        let id_ok = !identifier.is_empty()
            && !identifier.ends_with(':')
            && identifier.bytes().all(|b| {
                b.is_ascii_alphanumeric() || matches!(b, b'.' | b'-' | b'_' | b':' | b'%')
            });
        if !method_ok || !id_ok {
            return Err(bad());
        }
        Ok(Did {
            method: method.to_string(),
            identifier: identifier.to_string(),
        })
    }
}

impl fmt::Display for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "did:{}:{}", self.method, self.identifier)
    }
}

impl Serialize for Did {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Did {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// UTC timestamp, written as RFC 3339 with a `Z` suffix and fractional
/// seconds only when present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub DateTime<Utc>);

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_rfc3339_opts(SecondsFormat::AutoSi, true))
    }
}

impl FromStr for Timestamp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DateTime::parse_from_rfc3339(s)
            .map(|d| Timestamp(d.with_timezone(&Utc)))
            .map_err(|e| format!("`{s}` is not an RFC 3339 timestamp: {e}"))
    }
}

impl From<DateTime<Utc>> for Timestamp {
    fn from(d: DateTime<Utc>) -> Self {
        Timestamp(d)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EdsAchievement {
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iscedf_code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eqf_level: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_of_instruction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading_scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grade: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credit_points: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sub_achievements: Vec<EdsAchievement>,
}

impl EdsAchievement {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            iscedf_code: None,
            eqf_level: None,
            language_of_instruction: None,
            grading_scheme: None,
            grade: None,
            credit_points: None,
            sub_achievements: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EdsSubject {
    pub id: Did,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identifier: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub given_names: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date_of_birth: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citizenship: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<String>,
    #[serde(default)]
    pub achieved: Vec<EdsAchievement>,
}

impl EdsSubject {
    pub fn new(id: Did) -> Self {
        Self {
            id,
            identifier: None,
            given_names: None,
            family_name: None,
            date_of_birth: None,
            citizenship: None,
            gender: None,
            achieved: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialSchema {
    pub id: String,
    #[serde(rename = "type")]
    pub schema_type: String,
}

impl Default for CredentialSchema {
    fn default() -> Self {
        Self {
            id: PLACEHOLDER_SCHEMA_ID.to_string(),
            schema_type: SCHEMA_VALIDATOR_TYPE.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProofBlock {
    #[serde(rename = "type")]
    pub proof_type: String,
    pub created: Timestamp,
    pub verification_method: String,
    pub jws: String,
}

/// Signature state of a proof block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProofState {
    Placeholder,
    /// Empty `jws`: built in signing mode, not yet signed.
    Pending,
    Signed,
    Malformed,
}

impl ProofBlock {
    pub fn placeholder(created: Timestamp, issuer: &Did) -> Self {
        Self {
            proof_type: PROOF_TYPE.to_string(),
            created,
            verification_method: issuer.key_url(DEFAULT_KEY_FRAGMENT),
            jws: JWS_PLACEHOLDER.to_string(),
        }
    }

    pub fn state(&self) -> ProofState {
        if self.jws == JWS_PLACEHOLDER {
            ProofState::Placeholder
        } else if self.jws.is_empty() {
            ProofState::Pending
        } else if is_compact_jws(&self.jws) {
            ProofState::Signed
        } else {
            ProofState::Malformed
        }
    }
}

/// Three base64url segments separated by two dots; the payload segment may
/// be empty (detached form).
pub fn is_compact_jws(s: &str) -> bool {
    let parts: Vec<&str> = s.split('.').collect();
    parts.len() == 3
        && !parts[0].is_empty()
        && !parts[2].is_empty()
        && parts.iter().all(|p| {
            p.bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
                && base64::engine::general_purpose::URL_SAFE_NO_PAD
                    .decode(p)
                    .is_ok()
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EdsCredential {
    #[serde(rename = "@context")]
    pub contexts: Vec<String>,
    pub id: String,
    #[serde(rename = "type")]
    pub types: Vec<String>,
    pub issuer: Did,
    pub issuance_date: Timestamp,
    pub credential_subject: EdsSubject,
    pub credential_schema: CredentialSchema,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extension: BTreeMap<String, String>,
    pub proof: ProofBlock,
}

impl EdsCredential {
    /// Document-type label, the last entry of `type`.
    pub fn document_label(&self) -> Option<&str> {
        self.types.last().map(String::as_str)
    }

    pub fn check_invariants(&self) -> Result<(), EdsError> {
        let fail = |m: &str| Err(EdsError::InvariantViolation(m.to_string()));
        if self.contexts.first().map(String::as_str) != Some(W3C_CREDENTIALS_CONTEXT) {
            return fail("first @context must be the W3C credentials context");
        }
        if self.id.trim().is_empty() {
            return fail("id is empty");
        }
        if self.types.len() < 3 || self.types[0] != VC_TYPE || self.types[1] != VA_TYPE {
            return fail("type must start with VerifiableCredential, VerifiableAttestation and name the document type");
        }
        if self.credential_schema.id.trim().is_empty() {
            return fail("credentialSchema.id is empty");
        }
        if self.proof.state() == ProofState::Malformed {
            return fail("proof.jws is neither the placeholder nor a compact JWS");
        }
        fn walk(a: &EdsAchievement) -> Result<(), EdsError> {
            if let Some(l) = a.eqf_level {
                if !(1..=8).contains(&l) {
                    return Err(EdsError::InvariantViolation(format!(
                        "eqfLevel {l} of `{}` outside 1..8",
                        a.title
                    )));
                }
            }
            if let Some(c) = a.credit_points {
                if !c.is_finite() || c < 0.0 {
                    return Err(EdsError::InvariantViolation(format!(
                        "creditPoints of `{}` must be a non-negative number",
                        a.title
                    )));
                }
            }
            a.sub_achievements.iter().try_for_each(walk)
        }
        self.credential_subject.achieved.iter().try_for_each(walk)
    }

    /// Canonical bytes of the credential with `proof.jws` emptied: the
    /// payload that a proof signs.
    pub fn signing_payload(&self) -> Result<Vec<u8>, EdsError> {
        let mut unsigned = self.clone();
        unsigned.proof.jws.clear();
        serialize_jsonld(&unsigned)
    }
}

pub fn serialize_jsonld(cred: &EdsCredential) -> Result<Vec<u8>, EdsError> {
    cred.check_invariants()?;
    serde_json::to_vec(cred).map_err(|e| EdsError::InvariantViolation(e.to_string()))
}

const TOP_MEMBERS: [&str; 9] = [
    "@context",
    "id",
    "type",
    "issuer",
    "issuanceDate",
    "credentialSubject",
    "credentialSchema",
    "extension",
    "proof",
];
const SUBJECT_MEMBERS: [&str; 8] = [
    "id",
    "identifier",
    "givenNames",
    "familyName",
    "dateOfBirth",
    "citizenship",
    "gender",
    "achieved",
];
const ACHIEVEMENT_MEMBERS: [&str; 8] = [
    "title",
    "iscedfCode",
    "eqfLevel",
    "languageOfInstruction",
    "gradingScheme",
    "grade",
    "creditPoints",
    "subAchievements",
];

/// Parses a credential. Members the model does not know are moved into
/// `extension`, keyed by their JSON path; non-string values are kept as
/// compact JSON text.
pub fn parse_eds(input: &[u8]) -> Result<EdsCredential, EdsError> {
    let mut value: Value =
        serde_json::from_slice(input).map_err(|e| EdsError::MalformedJson(e.to_string()))?;
    let top = value
        .as_object_mut()
        .ok_or_else(|| EdsError::SchemaViolation {
            path: String::new(),
            reason: "credential must be a JSON object".into(),
        })?;

    let mut moved = Vec::new();
    take_unknown(top, "", &TOP_MEMBERS, &mut moved);
    if let Some(Value::Object(subject)) = top.get_mut("credentialSubject") {
        take_unknown(subject, "credentialSubject", &SUBJECT_MEMBERS, &mut moved);
        if let Some(Value::Array(list)) = subject.get_mut("achieved") {
            for (i, a) in list.iter_mut().enumerate() {
                take_achievement(a, &format!("credentialSubject.achieved[{i}]"), &mut moved);
            }
        }
    }
    if !moved.is_empty() {
        let ext = top
            .entry("extension")
            .or_insert_with(|| Value::Object(Map::new()));
        if let Value::Object(ext) = ext {
            for (k, v) in moved {
                ext.entry(k).or_insert(v);
            }
        }
    }

    let cred: EdsCredential =
        serde_json::from_value(value).map_err(|e| EdsError::SchemaViolation {
            path: String::new(),
            reason: e.to_string(),
        })?;
    cred.check_invariants()
        .map_err(|e| EdsError::SchemaViolation {
            path: String::new(),
            reason: e.to_string(),
        })?;
    Ok(cred)
}

fn take_achievement(a: &mut Value, path: &str, moved: &mut Vec<(String, Value)>) {
    if let Value::Object(obj) = a {
        take_unknown(obj, path, &ACHIEVEMENT_MEMBERS, moved);
        if let Some(Value::Array(list)) = obj.get_mut("subAchievements") {
            for (i, s) in list.iter_mut().enumerate() {
                take_achievement(s, &format!("{path}.subAchievements[{i}]"), moved);
            }
        }
    }
}

fn take_unknown(
    obj: &mut Map<String, Value>,
    path: &str,
    known: &[&str],
    moved: &mut Vec<(String, Value)>,
) {
    let unknown: Vec<String> = obj
        .keys()
        .filter(|k| !known.contains(&k.as_str()))
        .cloned()
        .collect();
    for k in unknown {
        let v = obj.remove(&k).expect("key listed above");
        let text = match v {
            Value::String(s) => s,
            other => other.to_string(),
        };
        let key = if path.is_empty() {
            k
        } else {
            format!("{path}.{k}")
        };
        moved.push((key, Value::String(text)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EdsCredential {
        let created: Timestamp = "2022-06-01T08:15:00Z".parse().unwrap();
        let mut subject = EdsSubject::new(Did::holder_sentinel());
        let mut a = EdsAchievement::new("Linear Algebra");
        a.credit_points = Some(7.5);
        a.eqf_level = Some(6);
        subject.achieved.push(a);
        EdsCredential {
            contexts: vec![W3C_CREDENTIALS_CONTEXT.into(), EBSI_CONTEXT.into()],
            id: "urn:uuid:00000000-0000-8000-8000-000000000000".into(),
            types: vec![VC_TYPE.into(), VA_TYPE.into(), "TranscriptOfRecords".into()],
            issuer: Did::issuer_sentinel(),
            issuance_date: created,
            credential_subject: subject,
            credential_schema: CredentialSchema::default(),
            extension: BTreeMap::new(),
            proof: ProofBlock::placeholder(created, &Did::issuer_sentinel()),
        }
    }

    #[test]
    fn did_parsing() {
        let d: Did = "did:ebsi:zAbc".parse().unwrap();
        assert_eq!(d.method(), "ebsi");
        assert_eq!(d.identifier(), "zAbc");
        assert_eq!(d.to_string(), "did:ebsi:zAbc");
        for bad in [
            "did:ebsi:",
            "did::x",
            "ebsi:x",
            "did:EBSI:x",
            "did:ebsi:a b",
            "did:ebsi:x:",
        ] {
            assert!(bad.parse::<Did>().is_err(), "{bad}");
        }
        assert!("did:web:example.com:user".parse::<Did>().is_ok());
    }

    #[test]
    fn serialization_starts_with_contexts_and_round_trips() {
        let c = sample();
        let bytes = serialize_jsonld(&c).unwrap();
        assert!(bytes.starts_with(br#"{"@context":["https://www.w3.org/2018/credentials/v1""#));
        assert_eq!(parse_eds(&bytes).unwrap(), c);
        assert_eq!(serialize_jsonld(&c).unwrap(), bytes);
    }

    #[test]
    fn member_order() {
        let mut c = sample();
        c.extension.insert("b".into(), "2".into());
        c.extension.insert("a".into(), "1".into());
        let text = String::from_utf8(serialize_jsonld(&c).unwrap()).unwrap();
        let pos = |k: &str| text.find(&format!("\"{k}\":")).unwrap();
        let order = [
            "@context",
            "type",
            "issuer",
            "issuanceDate",
            "credentialSubject",
            "credentialSchema",
            "extension",
            "proof",
        ];
        for w in order.windows(2) {
            assert!(pos(w[0]) < pos(w[1]), "{} before {}", w[0], w[1]);
        }
        assert!(text.contains(r#""extension":{"a":"1","b":"2"}"#));
        assert!(text.contains(r#""creditPoints":7.5"#));
        assert!(!text.contains(": ") && !text.contains(", ") && !text.contains('\n'));
    }

    #[test]
    fn invariant_violations() {
        let mut c = sample();
        c.types.clear();
        assert!(matches!(
            serialize_jsonld(&c),
            Err(EdsError::InvariantViolation(_))
        ));
        let mut c = sample();
        c.credential_schema.id.clear();
        assert!(serialize_jsonld(&c).is_err());
        let mut c = sample();
        c.proof.jws = "not a jws".into();
        assert!(serialize_jsonld(&c).is_err());
        let mut c = sample();
        c.credential_subject.achieved[0].eqf_level = Some(9);
        assert!(serialize_jsonld(&c).is_err());
        let mut c = sample();
        c.contexts.reverse();
        assert!(serialize_jsonld(&c).is_err());
    }

    #[test]
    fn empty_object_is_a_schema_violation() {
        assert!(matches!(
            parse_eds(b"{}"),
            Err(EdsError::SchemaViolation { .. })
        ));
        assert!(matches!(
            parse_eds(b"[]"),
            Err(EdsError::SchemaViolation { .. })
        ));
        assert!(matches!(parse_eds(b"{"), Err(EdsError::MalformedJson(_))));
    }

    #[test]
    fn unknown_members_move_to_extension() {
        let c = sample();
        let mut v: Value = serde_json::from_slice(&serialize_jsonld(&c).unwrap()).unwrap();
        v["vendorScore"] = serde_json::json!({"x": 1});
        v["credentialSubject"]["nickname"] = "Ann".into();
        v["credentialSubject"]["achieved"][0]["room"] = 12.into();
        let parsed = parse_eds(v.to_string().as_bytes()).unwrap();
        assert_eq!(parsed.extension["vendorScore"], r#"{"x":1}"#);
        assert_eq!(parsed.extension["credentialSubject.nickname"], "Ann");
        assert_eq!(parsed.extension["credentialSubject.achieved[0].room"], "12");
        assert_eq!(parsed.credential_subject, c.credential_subject);
    }

    #[test]
    fn jws_shapes() {
        assert!(is_compact_jws("eyJh..c2ln"));
        assert!(is_compact_jws("eyJh.cGF5.c2ln"));
        assert!(!is_compact_jws("eyJh.c2ln"));
        assert!(!is_compact_jws("eyJh..c2l+"));
        assert!(!is_compact_jws("..x"));
        let mut p = sample().proof;
        assert_eq!(p.state(), ProofState::Placeholder);
        p.jws.clear();
        assert_eq!(p.state(), ProofState::Pending);
    }

    #[test]
    fn timestamps_normalise_to_utc() {
        let t: Timestamp = "2022-06-01T10:15:00+02:00".parse().unwrap();
        assert_eq!(t.to_string(), "2022-06-01T08:15:00Z");
        let t: Timestamp = "2022-06-01T10:15:00.250Z".parse().unwrap();
        assert_eq!(t.to_string(), "2022-06-01T10:15:00.250Z");
    }
}
