mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{did, fixture, read};
use elmo2eds_core::eds::{parse_eds, PLACEHOLDER_SCHEMA_ID};

fn elmo2eds(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elmo2eds"))
        .args(args)
        .current_dir(dir)
        .env_remove("ELMO2EDS_REGISTRY_PATH")
        .output()
        .unwrap()
}

fn fx(rel: &str) -> String {
    fixture(rel).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

#[test]
fn convert_writes_the_golden_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let o = elmo2eds(
        dir.path(),
        &[
            "convert",
            &fx("elmo/transcript_germany.xml"),
            "-o",
            "out.jsonld",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(
        std::fs::read(dir.path().join("out.jsonld")).unwrap(),
        read("golden/transcript_germany.jsonld")
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(elmo2eds(d, &["convert"]).status.code(), Some(2));
    assert_eq!(elmo2eds(d, &["--help"]).status.code(), Some(0));
    assert_eq!(
        elmo2eds(d, &["convert", "--mode", "fast", &fx("elmo/minimal.xml")])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        elmo2eds(d, &["convert", "--sign", &fx("elmo/minimal.xml")])
            .status
            .code(),
        Some(2)
    );

    let o = elmo2eds(d, &["--json", "convert", &fx("elmo/workshop.xml")]);
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["code"], "unclassifiable-document");
    assert!(o.stdout.is_empty());
}

#[test]
fn validate_reports_findings() {
    let dir = tempfile::tempdir().unwrap();
    let o = elmo2eds(
        dir.path(),
        &["--json", "validate", &fx("elmo/bad_country.xml")],
    );
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["valid"], false);
    assert_eq!(v["findings"][0]["code"], "unknown-country");

    let o = elmo2eds(
        dir.path(),
        &["--json", "validate", &fx("elmo/certificate_finland.xml")],
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["documentType"], "UpperSecondarySchoolCertificate");
}

#[test]
fn did_derive_matches_the_golden_table() {
    let dids: serde_json::Value = serde_json::from_slice(&read("golden/dids.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let o = elmo2eds(dir.path(), &["did", "derive", "--key", &fx("keys/k1.jwk")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), did("k1.jwk").to_string());
    assert!(dids.to_string().contains(&stdout(&o)));
}

#[test]
fn sign_register_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let holder = did("k2.jwk").to_string();
    let issuer = did("k1.jwk").to_string();
    let reg = d.join("registry.jsonl").display().to_string();

    assert_eq!(
        elmo2eds(
            d,
            &[
                "convert",
                &fx("elmo/transcript_sweden.xml"),
                "-o",
                "p.jsonld"
            ]
        )
        .status
        .code(),
        Some(0)
    );
    let o = elmo2eds(
        d,
        &[
            "sign",
            "p.jsonld",
            "--key",
            &fx("keys/k1.jwk"),
            "--holder-did",
            &holder,
            "-o",
            "s.jsonld",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    // The same credential straight from convert --sign.
    let o = elmo2eds(
        d,
        &[
            "convert",
            &fx("elmo/transcript_sweden.xml"),
            "--sign",
            "--issuer-key",
            &fx("keys/k1.jwk"),
            "--holder-did",
            &holder,
            "-o",
            "s2.jsonld",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let signed = std::fs::read(d.join("s.jsonld")).unwrap();
    assert_eq!(signed, std::fs::read(d.join("s2.jsonld")).unwrap());
    assert_eq!(parse_eds(&signed).unwrap().issuer.to_string(), issuer);

    // Signing with a key that is not the issuer's.
    let o = elmo2eds(d, &["sign", "s.jsonld", "--key", &fx("keys/k2.jwk")]);
    assert_eq!(o.status.code(), Some(2));

    assert_eq!(
        elmo2eds(d, &["verify", "s.jsonld", "--registry", &reg])
            .status
            .code(),
        Some(1)
    );
    for args in [
        vec![
            "registry",
            "register-did",
            "--key",
            &fx("keys/k1.jwk"),
            "--registry",
            &reg,
        ],
        vec!["registry", "add-issuer", &issuer, "--registry", &reg],
        vec![
            "registry",
            "add-schema",
            PLACEHOLDER_SCHEMA_ID,
            "--registry",
            &reg,
        ],
    ] {
        let o = elmo2eds(d, &args.iter().map(|s| s.as_ref()).collect::<Vec<&str>>());
        assert_eq!(
            o.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let o = elmo2eds(d, &["--json", "verify", "s.jsonld", "--registry", &reg]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(
        elmo2eds(d, &["registry", "check", "--registry", &reg])
            .status
            .code(),
        Some(0)
    );

    let text = std::fs::read_to_string(&reg)
        .unwrap()
        .replace("keys-1", "keys-2");
    std::fs::write(&reg, text).unwrap();
    assert_eq!(
        elmo2eds(d, &["registry", "check", "--registry", &reg])
            .status
            .code(),
        Some(1)
    );
}
