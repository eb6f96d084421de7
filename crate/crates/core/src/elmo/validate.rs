use serde::{Deserialize, Serialize};

use super::{ElmoDocument, ElmoLearningOpportunity};
use crate::standards::{
    is_ects_scheme, map_gender, validate_eqf_level, StandardId, StandardsRegistry,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub path: String,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Warning)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    fn push(&mut self, severity: Severity, path: impl Into<String>, code: &str, message: String) {
        self.findings.push(Finding {
            severity,
            path: path.into(),
            code: code.to_string(),
            message,
        });
    }

    fn error(&mut self, path: impl Into<String>, code: &str, message: String) {
        self.push(Severity::Error, path, code, message);
    }

    fn warning(&mut self, path: impl Into<String>, code: &str, message: String) {
        self.push(Severity::Warning, path, code, message);
    }
}

/// Checks the value domains of every coded field. Absent optional fields
/// are not findings.
pub fn validate_elmo(doc: &ElmoDocument, registries: &StandardsRegistry) -> ValidationReport {
    let mut r = ValidationReport::default();
    let l = &doc.learner;
    if let Some(c) = &l.citizenship {
        check_country(&mut r, registries, "learner.citizenship", c);
    }
    if let Some(g) = l.gender_code() {
        match g {
            Ok(code) if map_gender(code).is_ok() => {}
            _ => r.error(
                "learner.gender",
                "invalid-gender-code",
                format!(
                    "`{}` is not an ISO/IEC 5218 code (0, 1, 2, 9)",
                    l.gender.as_deref().unwrap_or("")
                ),
            ),
        }
    }
    if let Some(b) = &l.birth_date {
        if chrono::NaiveDate::parse_from_str(b.trim(), "%Y-%m-%d").is_err() {
            r.error(
                "learner.bday",
                "invalid-date",
                format!("`{b}` is not a YYYY-MM-DD date"),
            );
        }
    }
    if let Some(a) = &l.current_address {
        if let Some(c) = &a.country {
            check_country(&mut r, registries, "learner.currentAddress.country", c);
        }
    }

    let i = &doc.issuer;
    if i.identifiers.is_empty() {
        r.error(
            "issuer.identifier",
            "missing-issuer-identifier",
            "issuer has no identifier".into(),
        );
    }
    match &i.country {
        Some(c) => check_country(&mut r, registries, "issuer.country", c),
        None => r.warning(
            "issuer.country",
            "missing-issuer-country",
            "issuer has no country".into(),
        ),
    }
    if let Some(a) = &i.current_address {
        if let Some(c) = &a.country {
            check_country(&mut r, registries, "issuer.currentAddress.country", c);
        }
    }

    for los in doc.all_learning_opportunities() {
        check_los(&mut r, registries, los);
    }
    r
}

fn check_country(r: &mut ValidationReport, reg: &StandardsRegistry, path: &str, code: &str) {
    let lookup = reg.lookup(StandardId::Iso3166Alpha2, code);
    match lookup {
        Ok(Some(_)) => {
            if code.trim().len() != 2 || code.trim() != code.trim().to_ascii_uppercase() {
                r.warning(
                    path,
                    "non-canonical-code",
                    format!("country code `{code}` should be upper case"),
                );
            }
        }
        Ok(None) => match reg.country_for_numeric(code) {
            Some(alpha2) => r.warning(
                path,
                "numeric-country-code",
                format!("`{code}` is an ISO 3166-1 numeric code; alpha-2 is `{alpha2}`"),
            ),
            None => r.error(
                path,
                "unknown-country",
                format!("`{code}` is not an assigned ISO 3166-1 alpha-2 code"),
            ),
        },
        Err(e) => r.error(path, "unknown-standard", e.to_string()),
    }
}

fn check_los(r: &mut ValidationReport, reg: &StandardsRegistry, los: &ElmoLearningOpportunity) {
    let p = &los.path;
    if los.title.is_empty() {
        r.warning(
            format!("{p}.title"),
            "empty-title",
            "learning opportunity title is empty".into(),
        );
    }
    if let Some(code) = &los.isced_code {
        match reg.lookup(StandardId::IscedF2013, code) {
            Ok(Some(_)) => {}
            Ok(None) => r.error(
                format!("{p}.iscedCode"),
                "unknown-isced-code",
                format!("`{code}` is not an ISCED-F 2013 field"),
            ),
            Err(e) => r.error(format!("{p}.iscedCode"), "unknown-standard", e.to_string()),
        }
    }
    if let Some(level) = los.eqf_value() {
        match level {
            Ok(n) if validate_eqf_level(n) => {}
            _ => r.error(
                format!("{p}.eqfLevel"),
                "invalid-eqf-level",
                format!(
                    "`{}` is not an EQF level 1..8",
                    los.eqf_level.as_deref().unwrap_or("")
                ),
            ),
        }
    }
    if let Some(lang) = &los.language_of_instruction {
        match reg.lookup(StandardId::Iso639_1, lang) {
            Ok(Some(_)) => {}
            Ok(None) => r.error(
                format!("{p}.languageOfInstruction"),
                "unknown-language",
                format!("`{lang}` is not an ISO 639-1 code"),
            ),
            Err(e) => r.error(
                format!("{p}.languageOfInstruction"),
                "unknown-standard",
                e.to_string(),
            ),
        }
    }
    if let Some(credits) = los.result.credits_value() {
        match credits {
            Ok(v) if v >= 0.0 => {}
            _ => r.error(
                format!("{p}.result.credits"),
                "invalid-credits",
                format!(
                    "`{}` is not a non-negative decimal",
                    los.result.credits.as_deref().unwrap_or("")
                ),
            ),
        }
    }
    if let (Some(scheme), Some(grade)) = (&los.grading_scheme, &los.result.grade) {
        if is_ects_scheme(scheme) {
            match reg.lookup(StandardId::Ects, grade) {
                Ok(Some(_)) => {}
                Ok(None) => r.error(
                    format!("{p}.result.grade"),
                    "unknown-ects-grade",
                    format!("`{grade}` is not an ECTS grade"),
                ),
                Err(e) => r.error(
                    format!("{p}.result.grade"),
                    "unknown-standard",
                    e.to_string(),
                ),
            }
        }
    }
    if let Some(status) = &los.result.status {
        if los.result.status_value().is_none() {
            r.warning(
                format!("{p}.result.status"),
                "unknown-result-status",
                format!("`{status}` is not passed, failed or in-progress"),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elmo::parse_elmo;

    fn doc_with(learner: &str, los: &str) -> ElmoDocument {
        let xml = format!(
            r#"<elmo xmlns="https://github.com/emrex-eu/elmo-schemas/tree/v1"><generatedDate>2022-01-01T00:00:00Z</generatedDate><learner>{learner}</learner><report><issuer><country>SE</country><identifier type="schac">uu.se</identifier><title>U</title></issuer><learningOpportunitySpecification><title>T</title>{los}</learningOpportunitySpecification></report></elmo>"#
        );
        parse_elmo(xml.as_bytes()).unwrap()
    }

    fn codes(r: &ValidationReport) -> Vec<(&str, Severity)> {
        r.findings
            .iter()
            .map(|f| (f.code.as_str(), f.severity))
            .collect()
    }

    fn check(learner: &str, los: &str) -> ValidationReport {
        validate_elmo(&doc_with(learner, los), StandardsRegistry::builtin())
    }

    #[test]
    fn clean_document() {
        let r = check("<citizenship>SE</citizenship><gender>2</gender>", "");
        assert!(r.findings.is_empty(), "{r:?}");
    }

    #[test]
    fn unknown_country() {
        let r = check("<citizenship>ZZ</citizenship>", "");
        assert_eq!(codes(&r), [("unknown-country", Severity::Error)]);
        assert_eq!(r.findings[0].path, "learner.citizenship");
    }

    #[test]
    fn numeric_country_warns() {
        let r = check("<citizenship>752</citizenship>", "");
        assert_eq!(codes(&r), [("numeric-country-code", Severity::Warning)]);
        assert!(!r.has_errors());
    }

    #[test]
    fn gender_five() {
        let r = check("<gender>5</gender>", "");
        assert_eq!(codes(&r), [("invalid-gender-code", Severity::Error)]);
        let r = check("<gender>f</gender>", "");
        assert_eq!(codes(&r), [("invalid-gender-code", Severity::Error)]);
    }

    #[test]
    fn los_domains() {
        let r = check(
            "",
            "<iscedCode>8888</iscedCode><specifies><learningOpportunityInstance>\
             <gradingSchemeLocalId>ECTS</gradingSchemeLocalId><resultLabel>G</resultLabel>\
             <credit><value>-1</value></credit><level><type>EQF</type><value>9</value></level>\
             <languageOfInstruction>xx</languageOfInstruction><status>done</status>\
             </learningOpportunityInstance></specifies>",
        );
        let mut got = codes(&r);
        got.sort();
        assert_eq!(
            got,
            [
                ("invalid-credits", Severity::Error),
                ("invalid-eqf-level", Severity::Error),
                ("unknown-ects-grade", Severity::Error),
                ("unknown-isced-code", Severity::Error),
                ("unknown-language", Severity::Error),
                ("unknown-result-status", Severity::Warning),
            ]
        );
    }

    #[test]
    fn local_grades_are_not_checked() {
        let r = check(
            "",
            "<specifies><learningOpportunityInstance><gradingSchemeLocalId>de-1-6</gradingSchemeLocalId>\
             <resultLabel>1.3</resultLabel></learningOpportunityInstance></specifies>",
        );
        assert!(r.findings.is_empty());
    }
}
