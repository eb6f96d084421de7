//! Python bindings. Credentials cross the boundary as canonical JSON-LD
//! strings; failures raise `ConversionError` or `ValueError` whose message
//! starts with the error code.

use elmo2eds_core::crypto::{derive_did, sign_credential, KeyPair, DID_METHOD_EBSI};
use elmo2eds_core::eds::{parse_eds, serialize_jsonld, Did, DEFAULT_KEY_FRAGMENT};
use elmo2eds_core::elmo::{parse_elmo, validate_elmo, DocumentType};
use elmo2eds_core::standards::StandardsRegistry;
use elmo2eds_core::transform::{
    convert_bytes, insert_placeholders, ConversionMode, ConversionOptions,
};
use elmo2eds_core::vdr::{verify_log_file, RegistryError};
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

create_exception!(elmo2eds, ConversionError, PyValueError);

fn coded(code: &str, message: impl std::fmt::Display) -> String {
    format!("{code}: {message}")
}

fn parse_did(text: &str) -> Result<Did, String> {
    text.parse::<Did>().map_err(|e| coded(e.code(), e))
}

fn key_did(key: &KeyPair) -> Result<Did, String> {
    derive_did(&key.public_key_bytes(), DID_METHOD_EBSI).map_err(|e| coded(e.code(), e))
}

fn load_key(path: &str) -> Result<KeyPair, String> {
    KeyPair::from_file(path).map_err(|e| coded(e.code(), e))
}

fn convert_impl(
    xml: &[u8],
    mode: &str,
    document_type: Option<&str>,
    issuer_did: Option<&str>,
    holder_did: Option<&str>,
) -> Result<(String, usize), String> {
    let opts = ConversionOptions {
        mode: mode
            .parse::<ConversionMode>()
            .map_err(|e| coded("usage", e))?,
        document_type: document_type
            .map(|t| t.parse::<DocumentType>().map_err(|e| coded("usage", e)))
            .transpose()?,
        issuer_did: issuer_did.map(parse_did).transpose()?,
        holder_did: holder_did.map(parse_did).transpose()?,
        schema_id: None,
    };
    let report = convert_bytes(xml, &opts).map_err(|e| coded(e.code(), e))?;
    let bytes = serialize_jsonld(&report.credential).map_err(|e| coded(e.code(), e))?;
    Ok((
        String::from_utf8(bytes).expect("JSON is UTF-8"),
        report.warnings.len(),
    ))
}

fn validate_impl(xml: &[u8]) -> Result<String, String> {
    let doc = parse_elmo(xml).map_err(|e| coded(e.code(), e))?;
    let report = validate_elmo(&doc, StandardsRegistry::builtin());
    serde_json::to_string(&report.findings).map_err(|e| coded("io", e))
}

fn sign_impl(credential: &str, key_path: &str, holder_did: Option<&str>) -> Result<String, String> {
    let key = load_key(key_path)?;
    let issuer = key_did(&key)?;
    let mut cred = parse_eds(credential.as_bytes()).map_err(|e| coded(e.code(), e))?;
    if cred.issuer == Did::issuer_sentinel() {
        let holder = match holder_did {
            Some(h) => parse_did(h)?,
            None => cred.credential_subject.id.clone(),
        };
        cred = insert_placeholders(&cred, &ConversionOptions::signing(issuer.clone(), holder))
            .map_err(|e| coded(e.code(), e))?;
    }
    if cred.issuer != issuer {
        return Err(coded(
            "key-mismatch",
            format!(
                "key belongs to {issuer}, credential is issued by {}",
                cred.issuer
            ),
        ));
    }
    let signed = sign_credential(&cred, &key, &issuer.key_url(DEFAULT_KEY_FRAGMENT))
        .map_err(|e| coded(e.code(), e))?;
    let bytes = serialize_jsonld(&signed).map_err(|e| coded(e.code(), e))?;
    Ok(String::from_utf8(bytes).expect("JSON is UTF-8"))
}

/// Converts ELMO XML bytes and returns `(jsonld, warning_count)`.
#[pyfunction]
#[pyo3(signature = (xml, mode="placeholder", document_type=None, issuer_did=None, holder_did=None))]
fn convert(
    xml: &[u8],
    mode: &str,
    document_type: Option<&str>,
    issuer_did: Option<&str>,
    holder_did: Option<&str>,
) -> PyResult<(String, usize)> {
    convert_impl(xml, mode, document_type, issuer_did, holder_did).map_err(ConversionError::new_err)
}

/// Validation findings of an ELMO document as a JSON array.
#[pyfunction]
fn validate(xml: &[u8]) -> PyResult<String> {
    validate_impl(xml).map_err(ConversionError::new_err)
}

/// Signs a credential with the secp256k1 key in `key_path`.
#[pyfunction]
#[pyo3(signature = (credential, key_path, holder_did=None))]
fn sign(credential: &str, key_path: &str, holder_did: Option<&str>) -> PyResult<String> {
    sign_impl(credential, key_path, holder_did).map_err(PyValueError::new_err)
}

/// `did:ebsi` identifier of the key in `key_path`.
#[pyfunction]
fn did_for_key(key_path: &str) -> PyResult<String> {
    load_key(key_path)
        .and_then(|k| key_did(&k))
        .map(|d| d.to_string())
        .map_err(PyValueError::new_err)
}

/// Whether the registry log at `path` has an intact hash chain.
#[pyfunction]
fn verify_log(path: &str) -> PyResult<bool> {
    match verify_log_file(path) {
        Ok(ok) => Ok(ok),
        Err(RegistryError::CorruptLog { .. }) => Ok(false),
        Err(e) => Err(PyOSError::new_err(e.to_string())),
    }
}

#[pymodule]
fn elmo2eds(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ConversionError", m.py().get_type::<ConversionError>())?;
    m.add_function(wrap_pyfunction!(convert, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(sign, m)?)?;
    m.add_function(wrap_pyfunction!(did_for_key, m)?)?;
    m.add_function(wrap_pyfunction!(verify_log, m)?)?;
    Ok(())
}
