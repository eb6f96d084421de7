#![allow(dead_code)]

use std::path::PathBuf;

use elmo2eds_core::crypto::KeyPair;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

pub fn read(rel: &str) -> Vec<u8> {
    std::fs::read(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn read_str(rel: &str) -> String {
    String::from_utf8(read(rel)).unwrap()
}

pub fn key(name: &str) -> KeyPair {
    KeyPair::from_file(fixture(&format!("keys/{name}"))).unwrap()
}

pub const CORPUS: [(&str, &str); 4] = [
    ("transcript_sweden", "TranscriptOfRecords"),
    ("transcript_germany", "TranscriptOfRecords"),
    (
        "certificate_germany_abitur",
        "UpperSecondarySchoolCertificate",
    ),
    ("certificate_finland", "UpperSecondarySchoolCertificate"),
];
