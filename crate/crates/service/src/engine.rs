//! Conversion and signing shared by the CLI and the HTTP service.

use elmo2eds_core::crypto::{derive_did, sign_credential, CryptoError, KeyPair, DID_METHOD_EBSI};
use elmo2eds_core::eds::{serialize_jsonld, Did, EdsError, DEFAULT_KEY_FRAGMENT};
use elmo2eds_core::elmo::{parse_elmo_with, DocumentType, Finding, ParseOptions};
use elmo2eds_core::standards::StandardsRegistry;
use elmo2eds_core::transform::{
    convert_with, ConversionError, ConversionMode, ConversionOptions, ConversionReport, TemplateSet,
};
use elmo2eds_core::vdr::RegistryError;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, ServiceConfig};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Conversion(#[from] ConversionError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Credential(#[from] EdsError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("signing is not available: {0}")]
    SigningUnavailable(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Conversion(e) => e.code(),
            ServiceError::Crypto(e) => e.code(),
            ServiceError::Credential(e) => e.code(),
            ServiceError::Registry(e) => e.code(),
            ServiceError::Config(_) => "invalid-config",
            ServiceError::SigningUnavailable(_) => "signing-unavailable",
            ServiceError::Usage(_) => "usage",
            ServiceError::Io(_) => "io",
        }
    }

    pub fn path(&self) -> Option<&str> {
        match self {
            ServiceError::Conversion(ConversionError::Elmo(e)) => e.path(),
            ServiceError::Conversion(ConversionError::UnmappableClaim { target, .. }) => {
                Some(target)
            }
            ServiceError::Credential(EdsError::SchemaViolation { path, .. })
                if !path.is_empty() =>
            {
                Some(path)
            }
            _ => None,
        }
    }

    pub fn findings(&self) -> &[Finding] {
        match self {
            ServiceError::Conversion(ConversionError::Validation(r)) => &r.findings,
            _ => &[],
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            code: self.code().to_string(),
            message: self.to_string(),
            path: self.path().map(str::to_string),
            findings: self.findings().to_vec(),
        }
    }
}

/// JSON error shape for HTTP responses and `--json` CLI output.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub findings: Vec<Finding>,
}

pub fn read_file(path: &std::path::Path) -> Result<Vec<u8>, ServiceError> {
    std::fs::read(path).map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))
}

pub fn did_of(key: &KeyPair) -> Result<Did, ServiceError> {
    Ok(derive_did(&key.public_key_bytes(), DID_METHOD_EBSI)?)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConvertRequest {
    pub mode: Option<ConversionMode>,
    pub document_type: Option<DocumentType>,
    /// Sign with the issuer key; implies signing mode.
    pub sign: bool,
}

pub struct ConvertOutput {
    pub report: ConversionReport,
    /// Canonical JSON-LD of `report.credential`.
    pub body: Vec<u8>,
}

/// Everything a conversion needs, loaded once.
#[derive(Debug)]
pub struct Engine {
    pub templates: TemplateSet,
    pub mode_default: ConversionMode,
    pub issuer_key: Option<KeyPair>,
    pub issuer_did: Option<Did>,
    pub holder_did: Option<Did>,
    pub schema_id: Option<String>,
    pub max_input_bytes: usize,
}

impl Default for Engine {
    fn default() -> Self {
        Self {
            templates: TemplateSet::builtin(),
            mode_default: ConversionMode::Placeholder,
            issuer_key: None,
            issuer_did: None,
            holder_did: None,
            schema_id: None,
            max_input_bytes: ServiceConfig::default().max_body_bytes,
        }
    }
}

impl Engine {
    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, ServiceError> {
        let templates = match &cfg.mapping_override_path {
            Some(p) => TemplateSet::from_override_file(p)?,
            None => TemplateSet::builtin(),
        };
        let issuer_key = cfg
            .issuer_key_path
            .as_ref()
            .map(KeyPair::from_file)
            .transpose()?;
        let issuer_did = issuer_key.as_ref().map(did_of).transpose()?;
        let holder_did = match (&cfg.holder_key_path, &cfg.holder_did) {
            (Some(p), _) => Some(did_of(&KeyPair::from_file(p)?)?),
            (None, Some(d)) => Some(d.parse::<Did>()?),
            (None, None) => None,
        };
        Ok(Self {
            templates,
            mode_default: cfg.mode_default,
            issuer_key,
            issuer_did,
            holder_did,
            schema_id: cfg.schema_id.clone(),
            max_input_bytes: cfg.max_body_bytes,
        })
    }

    pub fn convert(&self, raw: &[u8], req: ConvertRequest) -> Result<ConvertOutput, ServiceError> {
        let mode = if req.sign {
            ConversionMode::Signing
        } else {
            req.mode.unwrap_or(self.mode_default)
        };
        let mut opts = ConversionOptions {
            mode,
            document_type: req.document_type,
            schema_id: self.schema_id.clone(),
            ..ConversionOptions::default()
        };
        if mode == ConversionMode::Signing {
            let (Some(i), Some(h)) = (&self.issuer_did, &self.holder_did) else {
                return Err(ServiceError::SigningUnavailable(
                    "signing mode needs an issuer key and a holder DID".into(),
                ));
            };
            opts.issuer_did = Some(i.clone());
            opts.holder_did = Some(h.clone());
        }
        let doc = parse_elmo_with(
            raw,
            ParseOptions {
                max_input_bytes: self.max_input_bytes,
            },
        )
        .map_err(ConversionError::from)?;
        let mut report = convert_with(&doc, &opts, &self.templates, StandardsRegistry::builtin())?;
        if req.sign {
            let key = self.issuer_key.as_ref().ok_or_else(|| {
                ServiceError::SigningUnavailable("no issuer key configured".into())
            })?;
            let vm = report.credential.issuer.key_url(DEFAULT_KEY_FRAGMENT);
            report.credential = sign_credential(&report.credential, key, &vm)?;
        }
        let body = serialize_jsonld(&report.credential)?;
        Ok(ConvertOutput { report, body })
    }
}
