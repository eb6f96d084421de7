//! Byte-level comparison with outputs produced by the standalone Python
//! implementation in tools/golden_oracle.py.

mod common;

use common::{key, read, read_str, CORPUS};
use elmo2eds_core::crypto::{
    derive_did, sign_credential, verify_credential_signature, VerificationResult,
};
use elmo2eds_core::eds::{parse_eds, serialize_jsonld, Timestamp};
use elmo2eds_core::transform::{convert_bytes, ConversionOptions};
use elmo2eds_core::vdr::DidDocument;

#[test]
fn placeholder_conversion_matches_golden_bytes() {
    for (name, label) in CORPUS {
        let raw = read(&format!("elmo/{name}.xml"));
        let report = convert_bytes(&raw, &ConversionOptions::default()).unwrap();
        assert_eq!(report.document_type.label(), label, "{name}");
        let out = serialize_jsonld(&report.credential).unwrap();
        let golden = read(&format!("golden/{name}.jsonld"));
        assert_eq!(
            String::from_utf8_lossy(&out),
            String::from_utf8_lossy(&golden),
            "{name}"
        );
    }
}

#[test]
fn golden_files_round_trip_through_the_model() {
    for (name, _) in CORPUS {
        let golden = read(&format!("golden/{name}.jsonld"));
        let cred = parse_eds(&golden).unwrap();
        assert_eq!(serialize_jsonld(&cred).unwrap(), golden, "{name}");
    }
}

#[test]
fn dids_match_oracle() {
    let dids: serde_json::Value = serde_json::from_str(&read_str("golden/dids.json")).unwrap();
    for name in ["k1", "k2"] {
        let k = key(&format!("{name}.jwk"));
        let did = derive_did(&k.public_key_bytes(), "ebsi").unwrap();
        assert_eq!(did.to_string(), dids[name].as_str().unwrap());
        let from_pem = key(&format!("{name}.pem"));
        assert_eq!(from_pem.public_key_bytes(), k.public_key_bytes());
    }
}

#[test]
fn deterministic_jws_matches_oracle() {
    let k1 = key("k1.jwk");
    let did = derive_did(&k1.public_key_bytes(), "ebsi").unwrap();
    let cred = parse_eds(&read("golden/transcript_sweden.jsonld")).unwrap();
    let signed = sign_credential(&cred, &k1, &did.key_url("keys-1")).unwrap();
    assert_eq!(
        signed.proof.jws,
        read_str("golden/transcript_sweden.k1.jws").trim()
    );

    let created: Timestamp = "2024-01-01T00:00:00Z".parse().unwrap();
    let doc = DidDocument::for_key(&k1, created).unwrap();
    assert_eq!(
        verify_credential_signature(&signed, &doc).unwrap(),
        VerificationResult::Valid
    );
    let other = DidDocument::for_key(&key("k2.jwk"), created).unwrap();
    assert!(verify_credential_signature(&signed, &other).is_err());
}
