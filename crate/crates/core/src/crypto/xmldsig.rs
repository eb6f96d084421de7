//! Enveloped XML-DSig verification under a constrained profile.
//!
//! Supported: one enveloped `Signature` element, `Reference URI=""`,
//! SHA-256 digest, RSA PKCS#1 v1.5 with SHA-256. Instead of exclusive
//! canonicalization the profile digests the raw document bytes with the
//! `Signature` element cut out and line endings normalized to `\n`; the
//! signature covers the raw `SignedInfo` element bytes under the same
//! line-ending normalization. Documents signed by tools that apply full
//! C14N will generally not verify.

use std::ops::Range;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use roxmltree::Node;
use rsa::pkcs8::DecodePublicKey;
use rsa::{Pkcs1v15Sign, RsaPrivateKey, RsaPublicKey};
use sha2::{Digest, Sha256};
use x509_cert::der::{Decode, Encode};
use x509_cert::Certificate;

use super::{CryptoError, VerificationResult};
use crate::elmo::{ElmoDocument, ElmoError};

pub const DSIG_NS: &str = "http://www.w3.org/2000/09/xmldsig#";
pub const SHA256_URI: &str = "http://www.w3.org/2001/04/xmlenc#sha256";
pub const RSA_SHA256_URI: &str = "http://www.w3.org/2001/04/xmldsig-more#rsa-sha256";
pub const ENVELOPED_URI: &str = "http://www.w3.org/2000/09/xmldsig#enveloped-signature";
pub const EXC_C14N_URI: &str = "http://www.w3.org/2001/10/xml-exc-c14n#";

/// The enveloped signature block of an ELMO document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElmoXmlSignature {
    pub signed_info_digest_algorithm: String,
    pub signature_algorithm: String,
    pub reference_uri: Option<String>,
    pub transforms: Vec<String>,
    pub digest_value: Vec<u8>,
    pub signature_value: Vec<u8>,
    /// DER certificate from `KeyInfo/X509Data/X509Certificate`.
    pub certificate: Vec<u8>,
    /// Byte range of the `Signature` element in the raw input.
    pub signature_range: Range<usize>,
    /// Byte range of the `SignedInfo` element in the raw input.
    pub signed_info_range: Range<usize>,
}

fn dsig_child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| {
        c.is_element() && c.tag_name().name() == name && c.tag_name().namespace() == Some(DSIG_NS)
    })
}

fn require<'a, 'i>(node: Node<'a, 'i>, name: &str, path: &str) -> Result<Node<'a, 'i>, ElmoError> {
    dsig_child(node, name).ok_or_else(|| ElmoError::SchemaViolation {
        path: format!("{path}.{name}"),
        reason: "missing".into(),
    })
}

/// Base64 with whitespace ignored; undecodable text yields no bytes, which
/// later fails verification rather than parsing.
fn lenient_b64(node: Node) -> Vec<u8> {
    let text: String = node
        .children()
        .filter_map(|c| c.text())
        .flat_map(|t| t.chars())
        .filter(|c| !c.is_whitespace())
        .collect();
    STANDARD.decode(text).unwrap_or_default()
}

impl ElmoXmlSignature {
    /// Reads the block from a parsed `Signature` element. `offset` is the
    /// number of raw bytes that precede the parsed text (a stripped BOM).
    pub(crate) fn from_node(sig: Node, offset: usize) -> Result<Self, ElmoError> {
        let si = require(sig, "SignedInfo", "Signature")?;
        let method = require(si, "SignatureMethod", "Signature.SignedInfo")?;
        let reference = require(si, "Reference", "Signature.SignedInfo")?;
        let digest_method = require(reference, "DigestMethod", "Signature.SignedInfo.Reference")?;
        let digest_value = require(reference, "DigestValue", "Signature.SignedInfo.Reference")?;
        let sig_value = require(sig, "SignatureValue", "Signature")?;
        let key_info = require(sig, "KeyInfo", "Signature")?;
        let x509 = require(key_info, "X509Data", "Signature.KeyInfo")?;
        let cert = require(x509, "X509Certificate", "Signature.KeyInfo.X509Data")?;
        let transforms = dsig_child(reference, "Transforms")
            .map(|t| {
                t.children()
                    .filter(|c| c.is_element() && c.tag_name().name() == "Transform")
                    .map(|c| c.attribute("Algorithm").unwrap_or("").to_string())
                    .collect()
            })
            .unwrap_or_default();
        let shift = |r: Range<usize>| r.start + offset..r.end + offset;
        Ok(Self {
            signed_info_digest_algorithm: digest_method
                .attribute("Algorithm")
                .unwrap_or("")
                .to_string(),
            signature_algorithm: method.attribute("Algorithm").unwrap_or("").to_string(),
            reference_uri: reference.attribute("URI").map(str::to_string),
            transforms,
            digest_value: lenient_b64(digest_value),
            signature_value: lenient_b64(sig_value),
            certificate: lenient_b64(cert),
            signature_range: shift(sig.range()),
            signed_info_range: shift(si.range()),
        })
    }

    fn profile_supported(&self) -> bool {
        self.signed_info_digest_algorithm == SHA256_URI
            && self.signature_algorithm == RSA_SHA256_URI
            && self.reference_uri.as_deref().unwrap_or("").is_empty()
            && self
                .transforms
                .iter()
                .all(|t| t == ENVELOPED_URI || t == EXC_C14N_URI)
    }
}

pub fn normalize_newlines(data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len());
    let mut i = 0;
    while i < data.len() {
        match data[i] {
            b'\r' => {
                out.push(b'\n');
                if data.get(i + 1) == Some(&b'\n') {
                    i += 1;
                }
            }
            b => out.push(b),
        }
        i += 1;
    }
    out
}

/// Digest input: the raw bytes without the signature element, newline-normalized.
pub fn digest_input(raw: &[u8], signature_range: Range<usize>) -> Vec<u8> {
    let mut body = raw[..signature_range.start].to_vec();
    body.extend_from_slice(&raw[signature_range.end..]);
    normalize_newlines(&body)
}

fn rsa_public_key(cert_der: &[u8]) -> Result<RsaPublicKey, VerificationResult> {
    let cert = Certificate::from_der(cert_der).map_err(|_| VerificationResult::SignatureInvalid)?;
    let spki = cert
        .tbs_certificate
        .subject_public_key_info
        .to_der()
        .map_err(|_| VerificationResult::SignatureInvalid)?;
    RsaPublicKey::from_public_key_der(&spki).map_err(|_| VerificationResult::UnsupportedAlgorithm)
}

/// Checks the document's enveloped signature; with `trusted_cert` the
/// embedded certificate must also equal it byte for byte.
pub fn verify_xmldsig(
    doc: &ElmoDocument,
    trusted_cert: Option<&[u8]>,
) -> Result<VerificationResult, CryptoError> {
    let sig = doc
        .xml_signature
        .as_ref()
        .ok_or(CryptoError::MissingSignature)?;
    Ok(verify_block(doc.raw_bytes(), sig, trusted_cert))
}

fn verify_block(
    raw: &[u8],
    sig: &ElmoXmlSignature,
    trusted_cert: Option<&[u8]>,
) -> VerificationResult {
    if !sig.profile_supported() {
        return VerificationResult::UnsupportedAlgorithm;
    }
    let digest = Sha256::digest(digest_input(raw, sig.signature_range.clone()));
    if digest[..] != sig.digest_value[..] {
        return VerificationResult::DigestMismatch;
    }
    let key = match rsa_public_key(&sig.certificate) {
        Ok(k) => k,
        Err(r) => return r,
    };
    let signed_info = normalize_newlines(&raw[sig.signed_info_range.clone()]);
    let hashed = Sha256::digest(&signed_info);
    if key
        .verify(Pkcs1v15Sign::new::<Sha256>(), &hashed, &sig.signature_value)
        .is_err()
    {
        return VerificationResult::SignatureInvalid;
    }
    match trusted_cert {
        Some(pinned) if pinned != sig.certificate.as_slice() => {
            VerificationResult::UntrustedCertificate
        }
        _ => VerificationResult::Valid,
    }
}

/// Signs `source` under the same profile, inserting the signature block
/// as the last child of the root element.
pub fn sign_enveloped(
    source: &[u8],
    key: &RsaPrivateKey,
    cert_der: &[u8],
) -> Result<Vec<u8>, CryptoError> {
    let close = source
        .windows(7)
        .rposition(|w| w == b"</elmo>")
        .ok_or_else(|| CryptoError::UnsignableDocument("no </elmo> end tag".into()))?;
    let mut prefix = source[..close].to_vec();
    prefix.extend_from_slice(b"  ");
    let mut suffix = b"\n".to_vec();
    suffix.extend_from_slice(&source[close..]);

    let mut body = prefix.clone();
    body.extend_from_slice(&suffix);
    let digest = Sha256::digest(normalize_newlines(&body));
    let signed_info = format!(
        "<SignedInfo>\
         <CanonicalizationMethod Algorithm=\"{EXC_C14N_URI}\"/>\
         <SignatureMethod Algorithm=\"{RSA_SHA256_URI}\"/>\
         <Reference URI=\"\">\
         <Transforms><Transform Algorithm=\"{ENVELOPED_URI}\"/></Transforms>\
         <DigestMethod Algorithm=\"{SHA256_URI}\"/>\
         <DigestValue>{}</DigestValue>\
         </Reference>\
         </SignedInfo>",
        STANDARD.encode(digest)
    );
    let hashed = Sha256::digest(normalize_newlines(signed_info.as_bytes()));
    let signature = key
        .sign(Pkcs1v15Sign::new::<Sha256>(), &hashed)
        .map_err(|e| CryptoError::InvalidKey(e.to_string()))?;
    let block = format!(
        "<Signature xmlns=\"{DSIG_NS}\">{signed_info}<SignatureValue>{}</SignatureValue>\
         <KeyInfo><X509Data><X509Certificate>{}</X509Certificate></X509Data></KeyInfo></Signature>",
        STANDARD.encode(signature),
        STANDARD.encode(cert_der)
    );
    let mut out = prefix;
    out.extend_from_slice(block.as_bytes());
    out.extend_from_slice(&suffix);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newline_normalization() {
        assert_eq!(normalize_newlines(b"a\r\nb\rc\n\r\n"), b"a\nb\nc\n\n");
        assert_eq!(normalize_newlines(b""), b"");
    }

    #[test]
    fn digest_input_excises_range() {
        assert_eq!(digest_input(b"ab<S/>cd", 2..6), b"abcd");
    }
}
