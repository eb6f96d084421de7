mod common;

use common::{key, read};
use elmo2eds_core::crypto::{
    create_presentation, derive_did, sign_credential, verify_credential_signature,
    verify_presentation, CryptoError, KeyPair, VerificationResult,
};
use elmo2eds_core::eds::{parse_eds, serialize_jsonld, EdsCredential, ProofState, Timestamp};
use elmo2eds_core::transform::{convert_bytes, ConversionOptions};
use elmo2eds_core::vdr::DidDocument;
use proptest::prelude::*;

fn created() -> Timestamp {
    "2024-01-01T00:00:00Z".parse().unwrap()
}

fn signing_conversion(issuer: &KeyPair, holder: &KeyPair) -> EdsCredential {
    let i = derive_did(&issuer.public_key_bytes(), "ebsi").unwrap();
    let h = derive_did(&holder.public_key_bytes(), "ebsi").unwrap();
    convert_bytes(
        &read("elmo/transcript_germany.xml"),
        &ConversionOptions::signing(i, h),
    )
    .unwrap()
    .credential
}

#[test]
fn placeholder_and_pending_proofs_are_refused() {
    let k1 = key("k1.jwk");
    let doc = DidDocument::for_key(&k1, created()).unwrap();
    let placeholder = parse_eds(&read("golden/transcript_germany.jsonld")).unwrap();
    assert_eq!(
        verify_credential_signature(&placeholder, &doc).unwrap_err(),
        CryptoError::PlaceholderProof
    );
    let pending = signing_conversion(&k1, &key("k2.jwk"));
    assert_eq!(pending.proof.state(), ProofState::Pending);
    assert_eq!(
        verify_credential_signature(&pending, &doc).unwrap_err(),
        CryptoError::UnsignedCredential
    );
}

#[test]
fn signing_twice_is_refused() {
    let k1 = key("k1.jwk");
    let cred = signing_conversion(&k1, &key("k2.jwk"));
    let vm = cred.proof.verification_method.clone();
    let signed = sign_credential(&cred, &k1, &vm).unwrap();
    assert_eq!(
        sign_credential(&signed, &k1, &vm).unwrap_err(),
        CryptoError::AlreadySigned
    );
}

#[test]
fn rsa_keys_cannot_sign_credentials() {
    let cred = signing_conversion(&key("k1.jwk"), &key("k2.jwk"));
    let rsa = key("elmo_issuer.key.pem");
    let vm = cred.proof.verification_method.clone();
    assert!(matches!(
        sign_credential(&cred, &rsa, &vm),
        Err(CryptoError::InvalidKey(_))
    ));
}

#[test]
fn presentation_binds_the_nonce() {
    let (k1, k2) = (key("k1.jwk"), key("k2.jwk"));
    let cred = signing_conversion(&k1, &k2);
    let vm = cred.proof.verification_method.clone();
    let signed = sign_credential(&cred, &k1, &vm).unwrap();
    let holder_doc = DidDocument::for_key(&k2, created()).unwrap();

    let vp = create_presentation(&signed, &k2, "n-0451").unwrap();
    assert_eq!(vp.holder, holder_doc.id);
    assert_eq!(
        verify_presentation(&vp, &holder_doc, "n-0451").unwrap(),
        VerificationResult::Valid
    );
    assert_eq!(
        verify_presentation(&vp, &holder_doc, "n-0452").unwrap(),
        VerificationResult::SignatureInvalid
    );
    let issuer_doc = DidDocument::for_key(&k1, created()).unwrap();
    assert!(verify_presentation(&vp, &issuer_doc, "n-0451").is_err());
    assert_eq!(
        create_presentation(&signed, &k2, "").unwrap_err(),
        CryptoError::EmptyNonce
    );
    assert_eq!(
        create_presentation(&cred, &k2, "n").unwrap_err(),
        CryptoError::UnsignedCredential
    );
}

#[test]
fn signed_credential_survives_serialization() {
    let k1 = key("k1.jwk");
    let cred = signing_conversion(&k1, &key("k2.jwk"));
    let signed = sign_credential(&cred, &k1, &cred.proof.verification_method.clone()).unwrap();
    let reparsed = parse_eds(&serialize_jsonld(&signed).unwrap()).unwrap();
    let doc = DidDocument::for_key(&k1, created()).unwrap();
    assert_eq!(
        verify_credential_signature(&reparsed, &doc).unwrap(),
        VerificationResult::Valid
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sign_then_verify(
        secret in prop::array::uniform32(1u8..),
        grade in "[A-F]",
        extra in "[ -~]{0,24}",
    ) {
        let k = KeyPair::from_secp256k1_secret(&secret).unwrap();
        let mut cred = signing_conversion(&k, &key("k2.jwk"));
        cred.credential_subject.achieved[0].grade = Some(grade.clone());
        cred.extension.insert("x-test".into(), extra);
        let vm = cred.proof.verification_method.clone();
        let signed = sign_credential(&cred, &k, &vm).unwrap();
        let doc = DidDocument::for_key(&k, created()).unwrap();
        prop_assert_eq!(verify_credential_signature(&signed, &doc).unwrap(), VerificationResult::Valid);

        let mut tampered = signed.clone();
        tampered.credential_subject.achieved[0].grade = Some(format!("{grade}+"));
        prop_assert_eq!(
            verify_credential_signature(&tampered, &doc).unwrap(),
            VerificationResult::SignatureInvalid
        );

        let mut moved = signed;
        moved.extension.insert("x-injected".into(), "1".into());
        prop_assert_eq!(
            verify_credential_signature(&moved, &doc).unwrap(),
            VerificationResult::SignatureInvalid
        );
    }
}
