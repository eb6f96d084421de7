use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ConversionError;
use crate::elmo::DocumentType;

pub const LOS_PLACEHOLDER: &str = "{los}";
pub const ACHIEVEMENT_PLACEHOLDER: &str = "{achievement}";

/// Value transforms applied between an ELMO leaf and its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformId {
    Identity,
    UtcTimestamp,
    CountryCode,
    GenderWord,
    IscedCode,
    Integer,
    LanguageName,
    GradingScheme,
    Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClaimMapping {
    pub source: String,
    pub target: String,
    pub transform: TransformId,
    /// Also keep the source value, as written, in `extension`.
    #[serde(default)]
    pub carry: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConversionTemplate {
    pub document_type: DocumentType,
    /// Map nested learning opportunities to sub-achievements; otherwise
    /// only top-level ones become achievements.
    pub recursive: bool,
    pub claim_mappings: Vec<ClaimMapping>,
    #[serde(default)]
    pub required_targets: Vec<String>,
}

/// Targets a mapping may write to.
const SUBJECT_TARGETS: [&str; 6] = [
    "identifier",
    "givenNames",
    "familyName",
    "dateOfBirth",
    "citizenship",
    "gender",
];
const ACHIEVEMENT_TARGETS: [&str; 7] = [
    "title",
    "iscedfCode",
    "eqfLevel",
    "languageOfInstruction",
    "gradingScheme",
    "grade",
    "creditPoints",
];

pub(crate) enum Target<'a> {
    IssuanceDate,
    Subject(&'a str),
    Achievement(&'a str),
}

pub(crate) fn parse_target(target: &str) -> Option<Target<'_>> {
    if target == "issuanceDate" {
        return Some(Target::IssuanceDate);
    }
    if let Some(f) = target.strip_prefix("credentialSubject.") {
        return SUBJECT_TARGETS.contains(&f).then_some(Target::Subject(f));
    }
    if let Some(f) = target
        .strip_prefix(ACHIEVEMENT_PLACEHOLDER)
        .and_then(|r| r.strip_prefix('.'))
    {
        return ACHIEVEMENT_TARGETS
            .contains(&f)
            .then_some(Target::Achievement(f));
    }
    None
}

fn row(source: &str, target: &str, transform: TransformId, carry: bool) -> ClaimMapping {
    ClaimMapping {
        source: source.to_string(),
        target: target.to_string(),
        transform,
        carry,
    }
}

/// The mapping table shared by both built-in templates.
fn builtin_rows() -> Vec<ClaimMapping> {
    use TransformId::*;
    vec![
        row("generatedDate", "issuanceDate", UtcTimestamp, true),
        row(
            "learner.identifier[0]",
            "credentialSubject.identifier",
            Identity,
            true,
        ),
        row(
            "learner.givenNames",
            "credentialSubject.givenNames",
            Identity,
            false,
        ),
        row(
            "learner.familyName",
            "credentialSubject.familyName",
            Identity,
            false,
        ),
        row(
            "learner.bday",
            "credentialSubject.dateOfBirth",
            Identity,
            false,
        ),
        row(
            "learner.citizenship",
            "credentialSubject.citizenship",
            CountryCode,
            false,
        ),
        row(
            "learner.gender",
            "credentialSubject.gender",
            GenderWord,
            false,
        ),
        row("{los}.title", "{achievement}.title", Identity, false),
        row(
            "{los}.iscedCode",
            "{achievement}.iscedfCode",
            IscedCode,
            false,
        ),
        row("{los}.eqfLevel", "{achievement}.eqfLevel", Integer, false),
        row(
            "{los}.languageOfInstruction",
            "{achievement}.languageOfInstruction",
            LanguageName,
            true,
        ),
        row(
            "{los}.gradingScheme",
            "{achievement}.gradingScheme",
            GradingScheme,
            false,
        ),
        row("{los}.result.grade", "{achievement}.grade", Identity, false),
        row(
            "{los}.result.credits",
            "{achievement}.creditPoints",
            Decimal,
            false,
        ),
    ]
}

impl ConversionTemplate {
    pub fn builtin(document_type: DocumentType) -> Self {
        Self {
            document_type,
            recursive: document_type == DocumentType::TranscriptOfRecords,
            claim_mappings: builtin_rows(),
            required_targets: vec!["issuanceDate".into(), "{achievement}.title".into()],
        }
    }

    pub fn validate(&self) -> Result<(), ConversionError> {
        let bad = |m: String| Err(ConversionError::Template(m));
        let mut sources = HashSet::new();
        for m in &self.claim_mappings {
            if !sources.insert(m.source.as_str()) {
                return bad(format!("source `{}` is mapped twice", m.source));
            }
            let Some(target) = parse_target(&m.target) else {
                return bad(format!("unknown target `{}`", m.target));
            };
            let per_los = m.source.starts_with(&format!("{LOS_PLACEHOLDER}."));
            if per_los != matches!(target, Target::Achievement(_)) {
                return bad(format!(
                    "`{}` -> `{}`: {{los}} sources map exactly to {{achievement}} targets",
                    m.source, m.target
                ));
            }
        }
        for t in &self.required_targets {
            if parse_target(t).is_none() {
                return bad(format!("unknown required target `{t}`"));
            }
        }
        if !self.required_targets.iter().any(|t| t == "issuanceDate") {
            return bad("issuanceDate must be a required target".into());
        }
        if !self
            .required_targets
            .iter()
            .any(|t| t == "{achievement}.title")
        {
            return bad("{achievement}.title must be a required target".into());
        }
        Ok(())
    }
}

/// One template per document type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    certificate: ConversionTemplate,
    transcript: ConversionTemplate,
}

#[derive(Deserialize)]
struct OverrideFile {
    templates: Vec<ConversionTemplate>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    pub fn builtin() -> Self {
        Self {
            certificate: ConversionTemplate::builtin(DocumentType::UpperSecondarySchoolCertificate),
            transcript: ConversionTemplate::builtin(DocumentType::TranscriptOfRecords),
        }
    }

    pub fn get(&self, dt: DocumentType) -> &ConversionTemplate {
        match dt {
            DocumentType::UpperSecondarySchoolCertificate => &self.certificate,
            DocumentType::TranscriptOfRecords => &self.transcript,
        }
    }

    /// Replaces the templates named in an override document
    /// (`{"templates": [...]}`); others stay built in.
    pub fn with_overrides_json(mut self, json: &str) -> Result<Self, ConversionError> {
        let file: OverrideFile = serde_json::from_str(json)
            .map_err(|e| ConversionError::Template(format!("override file: {e}")))?;
        let mut seen = HashSet::new();
        for t in file.templates {
            t.validate()?;
            if !seen.insert(t.document_type) {
                return Err(ConversionError::Template(format!(
                    "template for {} given twice",
                    t.document_type
                )));
            }
            match t.document_type {
                DocumentType::UpperSecondarySchoolCertificate => self.certificate = t,
                DocumentType::TranscriptOfRecords => self.transcript = t,
            }
        }
        Ok(self)
    }

    pub fn from_override_file(path: impl AsRef<Path>) -> Result<Self, ConversionError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConversionError::Template(format!("{}: {e}", path.display())))?;
        Self::builtin().with_overrides_json(&text)
    }
}

/// The built-in template for `dt`.
pub fn select_template(dt: DocumentType) -> ConversionTemplate {
    ConversionTemplate::builtin(dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid_and_differ_in_recursion() {
        let c = select_template(DocumentType::UpperSecondarySchoolCertificate);
        let t = select_template(DocumentType::TranscriptOfRecords);
        c.validate().unwrap();
        t.validate().unwrap();
        assert!(!c.recursive);
        assert!(t.recursive);
        assert_eq!(
            c,
            select_template(DocumentType::UpperSecondarySchoolCertificate)
        );
    }

    #[test]
    fn overrides() {
        let mut t = select_template(DocumentType::TranscriptOfRecords);
        t.claim_mappings.retain(|m| m.source != "learner.bday");
        let json = serde_json::json!({ "templates": [t] }).to_string();
        let set = TemplateSet::builtin().with_overrides_json(&json).unwrap();
        assert_eq!(set.get(DocumentType::TranscriptOfRecords), &t);
        assert_eq!(
            set.get(DocumentType::UpperSecondarySchoolCertificate),
            &select_template(DocumentType::UpperSecondarySchoolCertificate)
        );
    }

    #[test]
    fn bad_overrides() {
        let mut t = select_template(DocumentType::TranscriptOfRecords);
        t.claim_mappings[2].target = "credentialSubject.nickname".into();
        let json = serde_json::json!({ "templates": [t] }).to_string();
        assert!(TemplateSet::builtin().with_overrides_json(&json).is_err());

        let mut t = select_template(DocumentType::TranscriptOfRecords);
        t.claim_mappings[3].source = t.claim_mappings[2].source.clone();
        let json = serde_json::json!({ "templates": [t] }).to_string();
        assert!(TemplateSet::builtin().with_overrides_json(&json).is_err());

        let mut t = select_template(DocumentType::TranscriptOfRecords);
        t.claim_mappings[7].target = "credentialSubject.givenNames".into();
        t.claim_mappings.remove(2);
        let json = serde_json::json!({ "templates": [t] }).to_string();
        assert!(TemplateSet::builtin().with_overrides_json(&json).is_err());

        assert!(TemplateSet::builtin().with_overrides_json("{").is_err());
    }
}
