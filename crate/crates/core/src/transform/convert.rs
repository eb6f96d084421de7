use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::{DateTime, Utc};
use sha2::{Digest, Sha256};

use super::template::{parse_target, Target, LOS_PLACEHOLDER};
use super::{
    ClaimTrace, ConversionError, ConversionMode, ConversionOptions, ConversionReport,
    ConversionTemplate, ConversionWarning, TemplateSet, TransformId,
};
use crate::eds::{
    CredentialSchema, Did, EdsAchievement, EdsCredential, EdsSubject, ProofBlock, ProofState,
    Timestamp, DEFAULT_KEY_FRAGMENT, EBSI_CONTEXT, VA_TYPE, VC_TYPE, W3C_CREDENTIALS_CONTEXT,
};
use crate::elmo::{
    detect_document_type, parse_decimal, parse_elmo, parse_timestamp, validate_elmo, ClaimOrigin,
    ElmoDocument, ElmoLearningOpportunity, LeafClaim,
};
use crate::standards::{
    is_ects_scheme, map_gender, map_grading_scheme, StandardId, StandardsRegistry,
};

/// `urn:uuid:` id derived from the SHA-256 of the raw input, shaped like
/// an RFC 4122 UUID (version nibble 8, variant 10).
pub fn credential_id(raw: &[u8]) -> String {
    let digest = Sha256::digest(raw);
    let mut b = [0u8; 16];
    b.copy_from_slice(&digest[..16]);
    b[6] = (b[6] & 0x0f) | 0x80;
    b[8] = (b[8] & 0x3f) | 0x80;
    let h = hex::encode(b);
    format!(
        "urn:uuid:{}-{}-{}-{}-{}",
        &h[..8],
        &h[8..12],
        &h[12..16],
        &h[16..20],
        &h[20..]
    )
}

#[derive(Debug, Clone, PartialEq)]
enum Mapped {
    Text(String),
    Int(i64),
    Number(f64),
    Time(DateTime<Utc>),
}

impl Mapped {
    fn render(&self) -> String {
        match self {
            Mapped::Text(s) => s.clone(),
            Mapped::Int(n) => n.to_string(),
            Mapped::Number(f) => serde_json::to_string(f).unwrap_or_else(|_| f.to_string()),
            Mapped::Time(t) => Timestamp(*t).to_string(),
        }
    }

    fn into_text(self) -> String {
        match self {
            Mapped::Text(s) => s,
            other => other.render(),
        }
    }
}

struct Ctx<'a> {
    standards: &'a StandardsRegistry,
    leaves: HashMap<&'a str, &'a LeafClaim>,
    mapped: HashSet<String>,
    carried: Vec<(String, String)>,
    traces: Vec<ClaimTrace>,
    warnings: Vec<ConversionWarning>,
}

impl Ctx<'_> {
    fn warn(&mut self, path: &str, code: &str, message: String) {
        self.warnings.push(ConversionWarning {
            path: path.to_string(),
            code: code.to_string(),
            message,
        });
    }

    fn apply(&mut self, t: TransformId, path: &str, raw: &str) -> Result<Mapped, String> {
        let std = self.standards;
        let lookup = |id: StandardId, code: &str| -> Result<Option<String>, String> {
            std.lookup(id, code)
                .map(|o| o.map(str::to_string))
                .map_err(|e| e.to_string())
        };
        Ok(match t {
            TransformId::Identity => Mapped::Text(raw.to_string()),
            TransformId::UtcTimestamp => Mapped::Time(
                parse_timestamp(raw).ok_or_else(|| format!("`{raw}` is not a timestamp"))?,
            ),
            TransformId::CountryCode => {
                if lookup(StandardId::Iso3166Alpha2, raw)?.is_some() {
                    Mapped::Text(
                        std.canonicalize(StandardId::Iso3166Alpha2, raw)
                            .map_err(|e| e.to_string())?,
                    )
                } else if let Some(alpha2) = std.country_for_numeric(raw) {
                    Mapped::Text(alpha2.to_string())
                } else {
                    return Err(format!("`{raw}` is not an ISO 3166-1 country code"));
                }
            }
            TransformId::GenderWord => {
                let code = raw
                    .trim()
                    .parse::<i64>()
                    .map_err(|_| format!("`{raw}` is not an ISO/IEC 5218 code"))?;
                Mapped::Text(map_gender(code).map_err(|e| e.to_string())?.to_string())
            }
            TransformId::IscedCode => {
                if lookup(StandardId::IscedF2013, raw)?.is_none() {
                    return Err(format!("`{raw}` is not an ISCED-F 2013 field"));
                }
                Mapped::Text(
                    std.canonicalize(StandardId::IscedF2013, raw)
                        .map_err(|e| e.to_string())?,
                )
            }
            TransformId::Integer => Mapped::Int(
                raw.trim()
                    .parse::<i64>()
                    .map_err(|_| format!("`{raw}` is not an integer"))?,
            ),
            TransformId::LanguageName => Mapped::Text(
                lookup(StandardId::Iso639_1, raw)?
                    .ok_or_else(|| format!("`{raw}` is not an ISO 639-1 language code"))?,
            ),
            TransformId::GradingScheme => {
                if !is_ects_scheme(raw) {
                    self.warn(
                        path,
                        "local-grading-scheme",
                        format!("grading scheme `{raw}` is not ECTS; grades are kept as written"),
                    );
                }
                Mapped::Text(map_grading_scheme(raw, "").0)
            }
            TransformId::Decimal => {
                Mapped::Number(parse_decimal(raw).map_err(|v| format!("`{v}` is not a number"))?)
            }
        })
    }

    /// Looks up `source`, transforms it and hands the value to `assign`.
    /// Failures leave the leaf unmapped, so it lands in `extension`.
    fn map_claim(
        &mut self,
        source: &str,
        target: &str,
        transform: TransformId,
        carry: bool,
        assign: impl FnOnce(Mapped) -> Result<Mapped, String>,
    ) {
        let Some(leaf) = self.leaves.get(source).copied() else {
            return;
        };
        let outcome = self.apply(transform, source, &leaf.value).and_then(assign);
        match outcome {
            Ok(written) => {
                self.mapped.insert(source.to_string());
                if carry {
                    self.carried.push((source.to_string(), leaf.value.clone()));
                }
                self.traces.push(ClaimTrace {
                    source: source.to_string(),
                    target: target.to_string(),
                    value: leaf.value.clone(),
                    output: written.render(),
                });
            }
            Err(reason) => self.warn(
                source,
                "transform-failed",
                format!("not mapped to `{target}`, kept in extension: {reason}"),
            ),
        }
    }
}

fn assign_text(slot: &mut Option<String>, v: Mapped) -> Result<Mapped, String> {
    let s = v.into_text();
    *slot = Some(s.clone());
    Ok(Mapped::Text(s))
}

fn assign_achievement(
    a: &mut EdsAchievement,
    titled: &mut bool,
    field: &str,
    v: Mapped,
) -> Result<Mapped, String> {
    match field {
        "title" => {
            let s = v.into_text();
            a.title = s.clone();
            *titled = true;
            Ok(Mapped::Text(s))
        }
        "iscedfCode" => assign_text(&mut a.iscedf_code, v),
        "languageOfInstruction" => assign_text(&mut a.language_of_instruction, v),
        "gradingScheme" => assign_text(&mut a.grading_scheme, v),
        "grade" => assign_text(&mut a.grade, v),
        "eqfLevel" => {
            let n = match v {
                Mapped::Int(n) => n,
                Mapped::Text(s) => s
                    .trim()
                    .parse()
                    .map_err(|_| format!("`{s}` is not an integer"))?,
                other => return Err(format!("`{}` is not an integer", other.render())),
            };
            let level = u8::try_from(n)
                .ok()
                .filter(|l| (1..=8).contains(l))
                .ok_or_else(|| format!("EQF level {n} outside 1..8"))?;
            a.eqf_level = Some(level);
            Ok(Mapped::Int(n))
        }
        "creditPoints" => {
            let f = match v {
                Mapped::Number(f) => f,
                Mapped::Int(n) => n as f64,
                Mapped::Text(s) => {
                    parse_decimal(&s).map_err(|v| format!("`{v}` is not a number"))?
                }
                Mapped::Time(_) => return Err("a timestamp is not a number".into()),
            };
            if f < 0.0 {
                return Err(format!("negative credits {f}"));
            }
            a.credit_points = Some(f);
            Ok(Mapped::Number(f))
        }
        other => Err(format!("unknown achievement field `{other}`")),
    }
}

fn assign_subject(s: &mut EdsSubject, field: &str, v: Mapped) -> Result<Mapped, String> {
    let slot = match field {
        "identifier" => &mut s.identifier,
        "givenNames" => &mut s.given_names,
        "familyName" => &mut s.family_name,
        "dateOfBirth" => &mut s.date_of_birth,
        "citizenship" => &mut s.citizenship,
        "gender" => &mut s.gender,
        other => return Err(format!("unknown subject field `{other}`")),
    };
    assign_text(slot, v)
}

fn subject_has(s: &EdsSubject, field: &str) -> bool {
    match field {
        "identifier" => s.identifier.is_some(),
        "givenNames" => s.given_names.is_some(),
        "familyName" => s.family_name.is_some(),
        "dateOfBirth" => s.date_of_birth.is_some(),
        "citizenship" => s.citizenship.is_some(),
        "gender" => s.gender.is_some(),
        _ => false,
    }
}

fn achievement_has(a: &EdsAchievement, titled: bool, field: &str) -> bool {
    match field {
        "title" => titled,
        "iscedfCode" => a.iscedf_code.is_some(),
        "eqfLevel" => a.eqf_level.is_some(),
        "languageOfInstruction" => a.language_of_instruction.is_some(),
        "gradingScheme" => a.grading_scheme.is_some(),
        "grade" => a.grade.is_some(),
        "creditPoints" => a.credit_points.is_some(),
        _ => false,
    }
}

fn build_achievement(
    ctx: &mut Ctx<'_>,
    template: &ConversionTemplate,
    los: &ElmoLearningOpportunity,
    out_path: &str,
) -> Result<EdsAchievement, ConversionError> {
    let mut a = EdsAchievement::new("");
    let mut titled = false;
    for m in &template.claim_mappings {
        let Some(rest) = m.source.strip_prefix(LOS_PLACEHOLDER) else {
            continue;
        };
        let Some(Target::Achievement(field)) = parse_target(&m.target) else {
            continue;
        };
        let source = format!("{}{rest}", los.path);
        let target = format!("{out_path}.{field}");
        ctx.map_claim(&source, &target, m.transform, m.carry, |v| {
            assign_achievement(&mut a, &mut titled, field, v)
        });
    }
    for req in &template.required_targets {
        if let Some(Target::Achievement(field)) = parse_target(req) {
            if !achievement_has(&a, titled, field) {
                return Err(ConversionError::UnmappableClaim {
                    target: format!("{out_path}.{field}"),
                    reason: format!("`{}` has no mappable value", los.path),
                });
            }
        }
    }
    if template.recursive {
        for (j, child) in los.children.iter().enumerate() {
            let sub = build_achievement(
                ctx,
                template,
                child,
                &format!("{out_path}.subAchievements[{j}]"),
            )?;
            a.sub_achievements.push(sub);
        }
    }
    Ok(a)
}

/// Text an unmapped typed leaf is stored under in `extension`: numbers in
/// their shortest form, everything else as written.
fn extension_value(leaf: &LeafClaim) -> String {
    let p = leaf.path.as_str();
    let v = leaf.value.as_str();
    if p.ends_with(".result.credits") {
        if let Ok(f) = parse_decimal(v) {
            return f.to_string();
        }
    } else if p.ends_with(".eqfLevel") || p == "learner.gender" {
        if let Ok(n) = v.trim().parse::<i64>() {
            return n.to_string();
        }
    }
    v.to_string()
}

fn signing_dids(opts: &ConversionOptions) -> Result<(Did, Did), ConversionError> {
    match opts.mode {
        ConversionMode::Placeholder => Ok((Did::issuer_sentinel(), Did::holder_sentinel())),
        ConversionMode::Signing => match (&opts.issuer_did, &opts.holder_did) {
            (Some(i), Some(h)) => Ok((i.clone(), h.clone())),
            _ => Err(ConversionError::MissingDid),
        },
    }
}

/// Converts with the built-in templates and code lists.
pub fn convert(
    doc: &ElmoDocument,
    opts: &ConversionOptions,
) -> Result<ConversionReport, ConversionError> {
    convert_with(
        doc,
        opts,
        &TemplateSet::builtin(),
        StandardsRegistry::builtin(),
    )
}

/// Parses and converts raw ELMO bytes.
pub fn convert_bytes(
    raw: &[u8],
    opts: &ConversionOptions,
) -> Result<ConversionReport, ConversionError> {
    convert(&parse_elmo(raw)?, opts)
}

pub fn convert_with(
    doc: &ElmoDocument,
    opts: &ConversionOptions,
    templates: &TemplateSet,
    standards: &StandardsRegistry,
) -> Result<ConversionReport, ConversionError> {
    let (issuer, holder) = signing_dids(opts)?;
    let validation = validate_elmo(doc, standards);
    if validation.has_errors() {
        return Err(ConversionError::Validation(validation));
    }
    let document_type = match opts.document_type {
        Some(dt) => dt,
        None => detect_document_type(doc)?,
    };
    let template = templates.get(document_type);

    let leaves = doc.leaf_claims();
    let mut ctx = Ctx {
        standards,
        leaves: leaves.iter().map(|l| (l.path.as_str(), l)).collect(),
        mapped: HashSet::new(),
        carried: Vec::new(),
        traces: Vec::new(),
        warnings: validation
            .warnings()
            .map(|f| ConversionWarning {
                path: f.path.clone(),
                code: f.code.clone(),
                message: f.message.clone(),
            })
            .collect(),
    };

    let mut issuance = None;
    let mut subject = EdsSubject::new(holder);
    for m in &template.claim_mappings {
        if m.source.starts_with(LOS_PLACEHOLDER) {
            continue;
        }
        match parse_target(&m.target) {
            Some(Target::IssuanceDate) => {
                ctx.map_claim(&m.source, &m.target, m.transform, m.carry, |v| match v {
                    Mapped::Time(t) => {
                        issuance = Some(Timestamp(t));
                        Ok(Mapped::Time(t))
                    }
                    Mapped::Text(s) => {
                        let t: Timestamp = s.parse()?;
                        issuance = Some(t);
                        Ok(Mapped::Time(t.0))
                    }
                    other => Err(format!("`{}` is not a timestamp", other.render())),
                });
            }
            Some(Target::Subject(field)) => {
                ctx.map_claim(&m.source, &m.target, m.transform, m.carry, |v| {
                    assign_subject(&mut subject, field, v)
                });
            }
            _ => {}
        }
    }

    for (i, top) in doc.reports.iter().enumerate() {
        let a = build_achievement(
            &mut ctx,
            template,
            top,
            &format!("credentialSubject.achieved[{i}]"),
        )?;
        subject.achieved.push(a);
    }

    let Some(issuance) = issuance else {
        let source = template
            .claim_mappings
            .iter()
            .find(|m| m.target == "issuanceDate")
            .map(|m| m.source.as_str())
            .unwrap_or("");
        return Err(ConversionError::UnmappableClaim {
            target: "issuanceDate".into(),
            reason: format!("no usable value at `{source}`"),
        });
    };
    for req in &template.required_targets {
        if let Some(Target::Subject(field)) = parse_target(req) {
            if !subject_has(&subject, field) {
                return Err(ConversionError::UnmappableClaim {
                    target: req.clone(),
                    reason: "no usable source value".into(),
                });
            }
        }
    }

    let mut extension = BTreeMap::new();
    for leaf in &leaves {
        match leaf.origin {
            ClaimOrigin::Extra => {
                extension.insert(leaf.path.clone(), leaf.value.clone());
            }
            ClaimOrigin::Typed if !ctx.mapped.contains(&leaf.path) => {
                extension.insert(leaf.path.clone(), extension_value(leaf));
            }
            ClaimOrigin::Typed => {}
        }
    }
    for (path, value) in &ctx.carried {
        extension.insert(path.clone(), value.clone());
    }

    let proof = match opts.mode {
        ConversionMode::Placeholder => ProofBlock::placeholder(issuance, &issuer),
        ConversionMode::Signing => {
            let mut p = ProofBlock::placeholder(issuance, &issuer);
            p.jws.clear();
            p
        }
    };
    let credential = EdsCredential {
        contexts: vec![
            W3C_CREDENTIALS_CONTEXT.to_string(),
            EBSI_CONTEXT.to_string(),
        ],
        id: credential_id(doc.raw_bytes()),
        types: vec![
            VC_TYPE.to_string(),
            VA_TYPE.to_string(),
            document_type.label().to_string(),
        ],
        issuer,
        issuance_date: issuance,
        credential_subject: subject,
        credential_schema: match &opts.schema_id {
            Some(id) => CredentialSchema {
                id: id.clone(),
                ..CredentialSchema::default()
            },
            None => CredentialSchema::default(),
        },
        extension,
        proof,
    };
    credential.check_invariants()?;

    Ok(ConversionReport {
        credential,
        document_type,
        carried_extensions: ctx.carried,
        mapped_claims: ctx.traces,
        warnings: ctx.warnings,
    })
}

/// Rewrites the DIDs and proof for `opts.mode`. Placeholder mode installs
/// the sentinels and the placeholder proof. Signing mode installs the given
/// DIDs and turns a placeholder proof into an empty one for the issuer key;
/// a proof that is already signed is left alone.
pub fn insert_placeholders(
    cred: &EdsCredential,
    opts: &ConversionOptions,
) -> Result<EdsCredential, ConversionError> {
    let (issuer, holder) = signing_dids(opts)?;
    let mut out = cred.clone();
    match opts.mode {
        ConversionMode::Placeholder => {
            out.proof = ProofBlock::placeholder(cred.proof.created, &issuer);
        }
        ConversionMode::Signing => {
            if matches!(
                out.proof.state(),
                ProofState::Placeholder | ProofState::Pending
            ) {
                out.proof.verification_method = issuer.key_url(DEFAULT_KEY_FRAGMENT);
                out.proof.jws.clear();
            }
        }
    }
    out.issuer = issuer;
    out.credential_subject.id = holder;
    Ok(out)
}

/// Leaf claims of `doc` that the report neither mapped nor kept in
/// `extension`. Empty for every successful conversion.
pub fn unaccounted_claims(doc: &ElmoDocument, report: &ConversionReport) -> Vec<LeafClaim> {
    let mapped: HashSet<&str> = report
        .mapped_claims
        .iter()
        .map(|t| t.source.as_str())
        .collect();
    doc.leaf_claims()
        .into_iter()
        .filter(|l| {
            !mapped.contains(l.path.as_str()) && !report.credential.extension.contains_key(&l.path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elmo::DocumentType;

    fn sweden() -> ElmoDocument {
        parse_elmo(include_bytes!(
            "../../../../fixtures/elmo/transcript_sweden.xml"
        ))
        .unwrap()
    }

    #[test]
    fn uuid_shape() {
        let id = credential_id(b"abc");
        assert_eq!(id.len(), "urn:uuid:".len() + 36);
        let hex = id.trim_start_matches("urn:uuid:");
        assert_eq!(&hex[14..15], "8");
        assert!(matches!(&hex[19..20], "8" | "9" | "a" | "b"));
    }

    #[test]
    fn placeholder_mode_uses_sentinels() {
        let r = convert(&sweden(), &ConversionOptions::default()).unwrap();
        assert_eq!(r.document_type, DocumentType::TranscriptOfRecords);
        assert_eq!(r.credential.issuer, Did::issuer_sentinel());
        assert_eq!(r.credential.credential_subject.id, Did::holder_sentinel());
        assert_eq!(r.credential.proof.state(), ProofState::Placeholder);
        assert_eq!(r.credential.proof.created, r.credential.issuance_date);
        assert!(unaccounted_claims(&sweden(), &r).is_empty());
    }

    #[test]
    fn signing_mode_needs_dids() {
        let opts = ConversionOptions {
            mode: ConversionMode::Signing,
            ..Default::default()
        };
        assert_eq!(
            convert(&sweden(), &opts).unwrap_err(),
            ConversionError::MissingDid
        );

        let i: Did = "did:ebsi:zIssuer".parse().unwrap();
        let h: Did = "did:ebsi:zHolder".parse().unwrap();
        let r = convert(&sweden(), &ConversionOptions::signing(i.clone(), h.clone())).unwrap();
        assert_eq!(r.credential.issuer, i);
        assert_eq!(r.credential.credential_subject.id, h);
        assert_eq!(r.credential.proof.state(), ProofState::Pending);
        assert_eq!(
            r.credential.proof.verification_method,
            "did:ebsi:zIssuer#keys-1"
        );
    }

    #[test]
    fn insert_placeholders_is_idempotent() {
        let r = convert(&sweden(), &ConversionOptions::default()).unwrap();
        let i: Did = "did:ebsi:zIssuer".parse().unwrap();
        let h: Did = "did:ebsi:zHolder".parse().unwrap();
        let opts = ConversionOptions::signing(i, h);
        let once = insert_placeholders(&r.credential, &opts).unwrap();
        assert_eq!(insert_placeholders(&once, &opts).unwrap(), once);
        let back = insert_placeholders(&once, &ConversionOptions::default()).unwrap();
        assert_eq!(back, r.credential);
    }

    #[test]
    fn forced_certificate_drops_nesting() {
        let opts = ConversionOptions {
            document_type: Some(DocumentType::UpperSecondarySchoolCertificate),
            ..Default::default()
        };
        let doc = sweden();
        let r = convert(&doc, &opts).unwrap();
        assert!(r
            .credential
            .credential_subject
            .achieved
            .iter()
            .all(|a| a.sub_achievements.is_empty()));
        assert!(unaccounted_claims(&doc, &r).is_empty());
    }

    #[test]
    fn failed_transform_is_a_warning() {
        let mut t = ConversionTemplate::builtin(DocumentType::TranscriptOfRecords);
        for m in &mut t.claim_mappings {
            if m.source == "learner.givenNames" {
                m.transform = TransformId::Integer;
            }
        }
        let json = serde_json::json!({ "templates": [t] }).to_string();
        let set = TemplateSet::builtin().with_overrides_json(&json).unwrap();
        let doc = sweden();
        let r = convert_with(
            &doc,
            &ConversionOptions::default(),
            &set,
            StandardsRegistry::builtin(),
        )
        .unwrap();
        assert!(r
            .warnings
            .iter()
            .any(|w| w.code == "transform-failed" && w.path == "learner.givenNames"));
        assert!(r.credential.credential_subject.given_names.is_none());
        assert!(r.credential.extension.contains_key("learner.givenNames"));
        assert!(unaccounted_claims(&doc, &r).is_empty());
    }
}
