//! Detached, unencoded-payload JWS (RFC 7797) with ES256K.
//!
//! The protected header is fixed to
//! `{"alg":"ES256K","b64":false,"crit":["b64"]}`; the signing input is
//! `base64url(header) || "." || payload` and the compact form is
//! `base64url(header) ".." base64url(r || s)`. Signatures are
//! deterministic (RFC 6979) and low-S.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use k256::ecdsa::signature::{Signer, Verifier};
use k256::ecdsa::{Signature, SigningKey, VerifyingKey};

pub const PROTECTED_HEADER: &str = r#"{"alg":"ES256K","b64":false,"crit":["b64"]}"#;

fn signing_input(header_b64: &str, payload: &[u8]) -> Vec<u8> {
    let mut input = Vec::with_capacity(header_b64.len() + 1 + payload.len());
    input.extend_from_slice(header_b64.as_bytes());
    input.push(b'.');
    input.extend_from_slice(payload);
    input
}

pub fn sign_detached(key: &SigningKey, payload: &[u8]) -> String {
    let header = URL_SAFE_NO_PAD.encode(PROTECTED_HEADER);
    let sig: Signature = key.sign(&signing_input(&header, payload));
    let sig = sig.normalize_s().unwrap_or(sig);
    format!("{header}..{}", URL_SAFE_NO_PAD.encode(sig.to_bytes()))
}

fn header_ok(header_b64: &str) -> bool {
    let Ok(raw) = URL_SAFE_NO_PAD.decode(header_b64) else {
        return false;
    };
    let Ok(v) = serde_json::from_slice::<serde_json::Value>(&raw) else {
        return false;
    };
    v.get("alg").and_then(|a| a.as_str()) == Some("ES256K")
        && v.get("b64").and_then(|b| b.as_bool()) == Some(false)
        && v.get("crit")
            .and_then(|c| c.as_array())
            .is_some_and(|c| c.iter().any(|x| x == "b64"))
}

/// True iff `jws` is a detached ES256K JWS over `payload` by `key`.
pub fn verify_detached(jws: &str, payload: &[u8], key: &VerifyingKey) -> bool {
    let mut parts = jws.split('.');
    let (Some(header), Some(""), Some(sig), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return false;
    };
    if !header_ok(header) {
        return false;
    }
    let Ok(sig) = URL_SAFE_NO_PAD.decode(sig) else {
        return false;
    };
    let Ok(sig) = Signature::from_slice(&sig) else {
        return false;
    };
    if sig.normalize_s().is_some() {
        return false;
    }
    key.verify(&signing_input(header, payload), &sig).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_determinism() {
        let key = SigningKey::from_slice(&[9u8; 32]).unwrap();
        let a = sign_detached(&key, b"payload");
        assert_eq!(a, sign_detached(&key, b"payload"));
        assert!(a.starts_with("eyJhbGciOiJFUzI1NksiLCJiNjQiOmZhbHNlLCJjcml0IjpbImI2NCJdfQ.."));
        assert!(verify_detached(&a, b"payload", key.verifying_key()));
        assert!(!verify_detached(&a, b"payloaD", key.verifying_key()));
        let other = SigningKey::from_slice(&[8u8; 32]).unwrap();
        assert!(!verify_detached(&a, b"payload", other.verifying_key()));
    }

    #[test]
    fn attached_or_foreign_headers_are_rejected() {
        let key = SigningKey::from_slice(&[9u8; 32]).unwrap();
        let jws = sign_detached(&key, b"p");
        let (h, s) = jws.split_once("..").unwrap();
        assert!(!verify_detached(
            &format!("{h}.cA.{s}"),
            b"p",
            key.verifying_key()
        ));
        let es256 = URL_SAFE_NO_PAD.encode(r#"{"alg":"ES256","b64":false,"crit":["b64"]}"#);
        assert!(!verify_detached(
            &format!("{es256}..{s}"),
            b"p",
            key.verifying_key()
        ));
        assert!(!verify_detached("", b"p", key.verifying_key()));
    }

    #[test]
    fn high_s_is_rejected() {
        let key = SigningKey::from_slice(&[9u8; 32]).unwrap();
        let jws = sign_detached(&key, b"p");
        let (h, s) = jws.split_once("..").unwrap();
        let sig = Signature::from_slice(&URL_SAFE_NO_PAD.decode(s).unwrap()).unwrap();
        let (r, s_scalar) = sig.split_scalars();
        let high = Signature::from_scalars(r, -*s_scalar).unwrap();
        let forged = format!("{h}..{}", URL_SAFE_NO_PAD.encode(high.to_bytes()));
        assert!(!verify_detached(&forged, b"p", key.verifying_key()));
    }
}
