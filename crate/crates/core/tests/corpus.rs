mod common;

use common::{read, CORPUS};
use elmo2eds_core::elmo::{
    detect_document_type, parse_elmo, parse_elmo_with, validate_elmo, ClaimOrigin, DocumentType,
    ElmoError, ParseOptions, Severity,
};
use elmo2eds_core::standards::StandardsRegistry;
use elmo2eds_core::transform::{
    convert, convert_bytes, unaccounted_claims, ConversionError, ConversionOptions,
};
use proptest::prelude::*;

#[test]
fn corpus_classification() {
    for (name, label) in CORPUS {
        let doc = parse_elmo(&read(&format!("elmo/{name}.xml"))).unwrap();
        assert_eq!(detect_document_type(&doc).unwrap().label(), label, "{name}");
    }
    let signed = parse_elmo(&read("elmo/transcript_sweden_signed.xml")).unwrap();
    assert_eq!(
        detect_document_type(&signed).unwrap(),
        DocumentType::TranscriptOfRecords
    );
    for name in ["minimal", "workshop"] {
        let doc = parse_elmo(&read(&format!("elmo/{name}.xml"))).unwrap();
        assert_eq!(
            detect_document_type(&doc).unwrap_err(),
            ElmoError::UnclassifiableDocument,
            "{name}"
        );
    }
}

#[test]
fn unclassifiable_documents_are_not_converted() {
    let err = convert_bytes(&read("elmo/workshop.xml"), &ConversionOptions::default()).unwrap_err();
    assert_eq!(
        err,
        ConversionError::Elmo(ElmoError::UnclassifiableDocument)
    );
}

#[test]
fn corpus_validates_clean() {
    for (name, _) in CORPUS {
        let doc = parse_elmo(&read(&format!("elmo/{name}.xml"))).unwrap();
        let r = validate_elmo(&doc, StandardsRegistry::builtin());
        assert!(!r.has_errors(), "{name}: {:?}", r.findings);
    }
}

#[test]
fn unknown_country_is_rejected() {
    let doc = parse_elmo(&read("elmo/bad_country.xml")).unwrap();
    let r = validate_elmo(&doc, StandardsRegistry::builtin());
    let f: Vec<_> = r.errors().collect();
    assert_eq!(f.len(), 1);
    assert_eq!(f[0].code, "unknown-country");
    assert_eq!(f[0].path, "learner.citizenship");
    assert_eq!(f[0].severity, Severity::Error);

    match convert(&doc, &ConversionOptions::default()).unwrap_err() {
        ConversionError::Validation(report) => assert_eq!(report, r),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn parse_failures() {
    assert!(matches!(
        parse_elmo(b"<elmo><unclosed></elmo>"),
        Err(ElmoError::MalformedXml(_))
    ));
    assert!(matches!(
        parse_elmo(b"<?xml version=\"1.0\"?><!DOCTYPE elmo [<!ENTITY x \"y\">]><elmo/>"),
        Err(ElmoError::MalformedXml(_))
    ));
    let raw = read("elmo/transcript_sweden.xml");
    let small = ParseOptions {
        max_input_bytes: 100,
    };
    assert_eq!(
        parse_elmo_with(&raw, small).unwrap_err(),
        ElmoError::OversizeInput {
            size: raw.len(),
            limit: 100
        }
    );
    let no_date = String::from_utf8(raw.clone()).unwrap().replacen(
        "<generatedDate>2022-06-01T10:15:00+02:00</generatedDate>",
        "",
        1,
    );
    match parse_elmo(no_date.as_bytes()).unwrap_err() {
        ElmoError::SchemaViolation { path, .. } => assert_eq!(path, "generatedDate"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn bom_is_accepted() {
    let mut raw = vec![0xef, 0xbb, 0xbf];
    raw.extend(read("elmo/transcript_sweden.xml"));
    let doc = parse_elmo(&raw).unwrap();
    assert_eq!(
        detect_document_type(&doc).unwrap(),
        DocumentType::TranscriptOfRecords
    );
}

#[test]
fn corpus_conversion_is_lossless() {
    for (name, _) in CORPUS {
        let doc = parse_elmo(&read(&format!("elmo/{name}.xml"))).unwrap();
        let r = convert(&doc, &ConversionOptions::default()).unwrap();
        assert!(unaccounted_claims(&doc, &r).is_empty(), "{name}");
        for leaf in doc.leaf_claims() {
            if leaf.origin == ClaimOrigin::Extra {
                assert_eq!(
                    r.credential.extension.get(&leaf.path),
                    Some(&leaf.value),
                    "{name}"
                );
            }
        }
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[derive(Debug, Clone)]
struct Course {
    title: String,
    grade: Option<&'static str>,
    credits: Option<u32>,
    extra: Option<(String, String)>,
}

fn text() -> impl Strategy<Value = String> {
    "[A-Za-zäöüß&<>][A-Za-z0-9 äöüß&<>]{0,14}[A-Za-z0-9]"
}

fn course() -> impl Strategy<Value = Course> {
    (
        text(),
        proptest::option::of(prop::sample::select(vec![
            "A", "B", "C", "D", "E", "FX", "F",
        ])),
        proptest::option::of(0u32..600),
        proptest::option::of(("[a-z]{3,8}", text())),
    )
        .prop_map(|(title, grade, credits, extra)| Course {
            title,
            grade,
            credits,
            extra,
        })
}

fn document(given: &str, learner_extra: &(String, String), courses: &[Course]) -> String {
    let mut parts = String::new();
    for c in courses {
        let mut loi = String::new();
        if let Some(g) = c.grade {
            loi.push_str(&format!(
                "<gradingSchemeLocalId>ECTS</gradingSchemeLocalId><resultLabel>{g}</resultLabel>"
            ));
        }
        if let Some(cr) = c.credits {
            loi.push_str(&format!(
                "<credit><scheme>ects</scheme><value>{}.{}</value></credit>",
                cr / 10,
                cr % 10
            ));
        }
        let extra = c
            .extra
            .as_ref()
            .map(|(n, v)| format!("<x{n}>{}</x{n}>", esc(v)))
            .unwrap_or_default();
        parts.push_str(&format!(
            "<hasPart><learningOpportunitySpecification><title>{}</title><type>Course</type>{extra}\
             <specifies><learningOpportunityInstance>{loi}</learningOpportunityInstance></specifies>\
             </learningOpportunitySpecification></hasPart>",
            esc(&c.title)
        ));
    }
    let (xn, xv) = learner_extra;
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\
         <elmo xmlns=\"https://github.com/emrex-eu/elmo-schemas/tree/v1\">\
         <generatedDate>2023-03-01T12:00:00+01:00</generatedDate>\
         <learner><citizenship>NL</citizenship><givenNames>{}</givenNames><x{xn}>{}</x{xn}></learner>\
         <report><issuer><country>NL</country><identifier type=\"schac\">uva.nl</identifier><title>UvA</title></issuer>\
         <learningOpportunitySpecification><title>Programme</title><type>Degree Programme</type>\
         <specifies><learningOpportunityInstance><credit><value>1</value></credit></learningOpportunityInstance></specifies>\
         {parts}</learningOpportunitySpecification></report></elmo>",
        esc(given),
        esc(xv)
    )
}

proptest! {
    #[test]
    fn every_leaf_is_mapped_or_kept(
        given in text(),
        learner_extra in ("[a-z]{3,8}", text()),
        courses in prop::collection::vec(course(), 1..6)
            .prop_filter("a transcript needs a graded course", |cs| {
                cs.iter().any(|c| c.grade.is_some() || c.credits.is_some())
            }),
    ) {
        let xml = document(&given, &learner_extra, &courses);
        let doc = parse_elmo(xml.as_bytes()).unwrap();
        let r = convert(&doc, &ConversionOptions::default()).unwrap();
        prop_assert!(unaccounted_claims(&doc, &r).is_empty());
        prop_assert_eq!(r.credential.credential_subject.given_names.as_deref(), Some(given.as_str()));
        let learner_key = format!("learner.x{}", learner_extra.0);
        prop_assert_eq!(r.credential.extension.get(&learner_key), Some(&learner_extra.1));
        let subs = &r.credential.credential_subject.achieved[0].sub_achievements;
        prop_assert_eq!(subs.len(), courses.len());
        for (i, (a, c)) in subs.iter().zip(&courses).enumerate() {
            prop_assert_eq!(&a.title, &c.title);
            prop_assert_eq!(a.grade.as_deref(), c.grade);
            prop_assert_eq!(a.credit_points, c.credits.map(|v| f64::from(v) / 10.0));
            if let Some((n, v)) = &c.extra {
                let key = format!("reports[0].children[{i}].x{n}");
                prop_assert_eq!(r.credential.extension.get(&key), Some(v));
            }
        }
    }
}
