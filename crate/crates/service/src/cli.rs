//! `elmo2eds` command line. Exit codes: 0 success, 1 rejected input or a
//! failed check, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use elmo2eds_core::crypto::{sign_credential, KeyPair};
use elmo2eds_core::eds::{parse_eds, serialize_jsonld, Did, Timestamp, DEFAULT_KEY_FRAGMENT};
use elmo2eds_core::elmo::{
    detect_document_type, parse_elmo, validate_elmo, DocumentType, Finding, Severity,
};
use elmo2eds_core::standards::StandardsRegistry;
use elmo2eds_core::transform::{
    insert_placeholders, ConversionMode, ConversionOptions, ConversionWarning,
};
use elmo2eds_core::vdr::{
    verify_credential_full, verify_log_file, CheckOutcome, DidDocument, LogEntry, Registry,
};
use serde_json::json;

use crate::config::ServiceConfig;
use crate::engine::{did_of, read_file, ConvertRequest, Engine, ServiceError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "elmo2eds",
    version,
    about = "Convert ELMO credentials to EBSI diploma credentials"
)]
pub struct Cli {
    /// Machine-readable JSON output and errors.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert an ELMO XML document to EDS JSON-LD.
    Convert(ConvertArgs),
    /// Parse, validate and classify an ELMO document.
    Validate { input: PathBuf },
    /// Sign an EDS credential with an issuer key.
    Sign(SignArgs),
    /// Run the four verifier checks against a registry log.
    Verify {
        input: PathBuf,
        #[arg(long, env = "ELMO2EDS_REGISTRY_PATH")]
        registry: PathBuf,
    },
    /// DID utilities.
    #[command(subcommand)]
    Did(DidCommand),
    /// Manage the local registry log.
    #[command(subcommand)]
    Registry(RegistryCommand),
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `listen_address`.
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// placeholder or signing
    #[arg(long)]
    pub mode: Option<ConversionMode>,
    /// Skip classification: certificate or transcript.
    #[arg(long = "type")]
    pub document_type: Option<DocumentType>,
    /// Sign with the issuer key (implies signing mode).
    #[arg(long)]
    pub sign: bool,
    #[arg(long)]
    pub issuer_key: Option<PathBuf>,
    #[arg(long, conflicts_with = "holder_did")]
    pub holder_key: Option<PathBuf>,
    #[arg(long)]
    pub holder_did: Option<String>,
    /// Mapping override file.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    #[arg(long)]
    pub schema_id: Option<String>,
    /// Service config to take defaults from.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SignArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub key: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Holder DID to install when signing a placeholder credential.
    #[arg(long)]
    pub holder_did: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum DidCommand {
    /// Print the did:ebsi identifier of a secp256k1 key.
    Derive {
        #[arg(long)]
        key: PathBuf,
    },
    /// Print the DID document of a secp256k1 key.
    Document {
        #[arg(long)]
        key: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RegistryPath {
    #[arg(long, env = "ELMO2EDS_REGISTRY_PATH")]
    pub registry: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum RegistryCommand {
    /// Add a DID to the trusted issuer list.
    AddIssuer {
        did: String,
        #[command(flatten)]
        path: RegistryPath,
    },
    /// Remove a DID from the trusted issuer list.
    RemoveIssuer {
        did: String,
        #[command(flatten)]
        path: RegistryPath,
    },
    /// Add a schema id to the trusted schema list.
    AddSchema {
        id: String,
        #[arg(long, default_value = "")]
        descriptor: String,
        #[command(flatten)]
        path: RegistryPath,
    },
    /// Register the DID document of a key, or a document from a file.
    RegisterDid {
        #[arg(
            long,
            required_unless_present = "document",
            conflicts_with = "document"
        )]
        key: Option<PathBuf>,
        #[arg(long)]
        document: Option<PathBuf>,
        #[command(flatten)]
        path: RegistryPath,
    },
    /// Check the hash chain of the log.
    Check {
        #[command(flatten)]
        path: RegistryPath,
    },
}

struct Out {
    json: bool,
}

impl Out {
    fn stdout(&self, text: &str) {
        let mut o = std::io::stdout().lock();
        let _ = writeln!(o, "{text}");
    }

    fn value(&self, v: &serde_json::Value) {
        self.stdout(&v.to_string());
    }

    fn warnings(&self, warnings: &[ConversionWarning]) {
        for w in warnings {
            if self.json {
                eprintln!("{}", json!({ "warning": w }));
            } else {
                eprintln!("warning: {}: {} [{}]", w.path, w.message, w.code);
            }
        }
    }

    fn error(&self, e: &ServiceError) {
        if self.json {
            eprintln!("{}", json!({ "error": e.body() }));
        } else {
            eprintln!("error: {e}");
            for f in e.findings() {
                eprintln!("  {}", finding_line(f));
            }
        }
    }
}

fn finding_line(f: &Finding) -> String {
    let sev = match f.severity {
        Severity::Error => "error",
        Severity::Warning => "warning",
    };
    format!("{sev}: {}: {} [{}]", f.path, f.message, f.code)
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), ServiceError> {
    match path {
        Some(p) => {
            std::fs::write(p, bytes).map_err(|e| ServiceError::Io(format!("{}: {e}", p.display())))
        }
        None => {
            let mut o = std::io::stdout().lock();
            o.write_all(bytes)
                .and_then(|_| o.write_all(b"\n"))
                .map_err(|e| ServiceError::Io(e.to_string()))
        }
    }
}

fn exit_code(e: &ServiceError) -> i32 {
    match e {
        ServiceError::Usage(_) => EXIT_USAGE,
        _ => EXIT_REJECTED,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let out = Out { json: cli.json };
    match dispatch(cli.command, &out) {
        Ok(code) => code,
        Err(e) => {
            out.error(&e);
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, out: &Out) -> Result<i32, ServiceError> {
    match cmd {
        Command::Convert(a) => convert(a, out),
        Command::Validate { input } => validate(&input, out),
        Command::Sign(a) => sign(a, out),
        Command::Verify { input, registry } => verify(&input, &registry, out),
        Command::Did(DidCommand::Derive { key }) => {
            let did = did_of(&KeyPair::from_file(&key)?)?;
            if out.json {
                out.value(&json!({ "did": did }));
            } else {
                out.stdout(&did.to_string());
            }
            Ok(EXIT_OK)
        }
        Command::Did(DidCommand::Document { key }) => {
            let doc =
                DidDocument::for_key(&KeyPair::from_file(&key)?, Timestamp(chrono::Utc::now()))?;
            out.value(&serde_json::to_value(doc).map_err(|e| ServiceError::Io(e.to_string()))?);
            Ok(EXIT_OK)
        }
        Command::Registry(r) => registry(r, out),
        Command::Serve { config, listen } => {
            let mut cfg = ServiceConfig::load(config.as_deref())?;
            if let Some(l) = listen {
                cfg.listen_address = l;
            }
            crate::init_logging(&cfg.log_level);
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| ServiceError::Io(e.to_string()))?;
            rt.block_on(crate::http::serve(&cfg))?;
            Ok(EXIT_OK)
        }
    }
}

fn convert(a: ConvertArgs, out: &Out) -> Result<i32, ServiceError> {
    let mut cfg = match &a.config {
        Some(p) => ServiceConfig::load(Some(p))?,
        None => ServiceConfig::default(),
    };
    if a.issuer_key.is_some() {
        cfg.issuer_key_path = a.issuer_key.clone();
    }
    if a.holder_key.is_some() {
        cfg.holder_key_path = a.holder_key.clone();
        cfg.holder_did = None;
    }
    if a.holder_did.is_some() {
        cfg.holder_did = a.holder_did.clone();
        cfg.holder_key_path = None;
    }
    if a.mapping.is_some() {
        cfg.mapping_override_path = a.mapping.clone();
    }
    if a.schema_id.is_some() {
        cfg.schema_id = a.schema_id.clone();
    }
    let engine = Engine::from_config(&cfg)?;
    let signing = a.sign || a.mode.unwrap_or(cfg.mode_default) == ConversionMode::Signing;
    if signing && (engine.issuer_did.is_none() || engine.holder_did.is_none()) {
        return Err(ServiceError::Usage(
            "signing mode needs --issuer-key and --holder-key or --holder-did".into(),
        ));
    }
    let raw = read_file(&a.input)?;
    let result = engine.convert(
        &raw,
        ConvertRequest {
            mode: a.mode,
            document_type: a.document_type,
            sign: a.sign,
        },
    )?;
    out.warnings(&result.report.warnings);
    write_output(a.output.as_deref(), &result.body)?;
    Ok(EXIT_OK)
}

fn validate(input: &Path, out: &Out) -> Result<i32, ServiceError> {
    let raw = read_file(input)?;
    let (findings, document_type) = match parse_elmo(&raw) {
        Err(e) => (
            vec![Finding {
                severity: Severity::Error,
                path: e.path().unwrap_or("").to_string(),
                code: e.code().to_string(),
                message: e.to_string(),
            }],
            None,
        ),
        Ok(doc) => {
            let mut findings = validate_elmo(&doc, StandardsRegistry::builtin()).findings;
            let dt = match detect_document_type(&doc) {
                Ok(dt) => Some(dt),
                Err(e) => {
                    findings.push(Finding {
                        severity: Severity::Error,
                        path: String::new(),
                        code: e.code().to_string(),
                        message: e.to_string(),
                    });
                    None
                }
            };
            (findings, dt)
        }
    };
    let errors = findings
        .iter()
        .filter(|f| f.severity == Severity::Error)
        .count();
    if out.json {
        out.value(&json!({
            "valid": errors == 0,
            "documentType": document_type,
            "findings": findings,
        }));
    } else {
        for f in &findings {
            out.stdout(&finding_line(f));
        }
        let warnings = findings.len() - errors;
        match document_type {
            Some(dt) if errors == 0 => out.stdout(&format!("ok: {dt}, {warnings} warning(s)")),
            _ => out.stdout(&format!(
                "invalid: {errors} error(s), {warnings} warning(s)"
            )),
        }
    }
    Ok(if errors == 0 { EXIT_OK } else { EXIT_REJECTED })
}

fn sign(a: SignArgs, out: &Out) -> Result<i32, ServiceError> {
    let key = KeyPair::from_file(&a.key)?;
    let issuer = did_of(&key)?;
    let mut cred = parse_eds(&read_file(&a.input)?)?;
    if cred.issuer == Did::issuer_sentinel() {
        let holder = match &a.holder_did {
            Some(h) => h.parse::<Did>()?,
            None => cred.credential_subject.id.clone(),
        };
        cred = insert_placeholders(&cred, &ConversionOptions::signing(issuer.clone(), holder))?;
    } else if let Some(h) = &a.holder_did {
        if cred.credential_subject.id != h.parse::<Did>()? {
            return Err(ServiceError::Usage(
                "--holder-did only applies to placeholder credentials".into(),
            ));
        }
    }
    if cred.issuer != issuer {
        return Err(ServiceError::Usage(format!(
            "key belongs to {issuer}, credential is issued by {}",
            cred.issuer
        )));
    }
    let signed = sign_credential(&cred, &key, &issuer.key_url(DEFAULT_KEY_FRAGMENT))?;
    write_output(a.output.as_deref(), &serialize_jsonld(&signed)?)?;
    if out.json && a.output.is_some() {
        out.value(
            &json!({ "issuer": issuer, "verificationMethod": signed.proof.verification_method }),
        );
    }
    Ok(EXIT_OK)
}

fn verify(input: &Path, registry: &Path, out: &Out) -> Result<i32, ServiceError> {
    let cred = parse_eds(&read_file(input)?)?;
    let reg = Registry::open(registry)?;
    let report = verify_credential_full(reg.state(), &cred);
    if out.json {
        out.value(&serde_json::to_value(&report).map_err(|e| ServiceError::Io(e.to_string()))?);
    } else {
        for c in &report.checks {
            let mark = match c.outcome {
                CheckOutcome::Pass => "pass",
                CheckOutcome::Fail => "FAIL",
                CheckOutcome::Skipped => "skip",
            };
            let code = c
                .code
                .as_deref()
                .map(|c| format!(" [{c}]"))
                .unwrap_or_default();
            out.stdout(&format!("{mark} {}: {}{code}", c.name, c.detail));
        }
        out.stdout(if report.valid { "valid" } else { "invalid" });
    }
    Ok(if report.valid { EXIT_OK } else { EXIT_REJECTED })
}

fn print_entry(out: &Out, e: &LogEntry) {
    if out.json {
        out.value(&json!({ "seq": e.seq, "hash": e.hash }));
    } else {
        out.stdout(&format!("appended entry {} ({})", e.seq, e.hash));
    }
}

fn registry(cmd: RegistryCommand, out: &Out) -> Result<i32, ServiceError> {
    let entry = match cmd {
        RegistryCommand::Check { path } => {
            let (ok, detail) = match verify_log_file(&path.registry) {
                Ok(true) => (true, "hash chain intact".to_string()),
                Ok(false) => (false, "hash chain broken".to_string()),
                Err(e) => (false, e.to_string()),
            };
            if out.json {
                out.value(&json!({ "valid": ok, "detail": detail }));
            } else {
                out.stdout(&format!("{}: {detail}", if ok { "ok" } else { "corrupt" }));
            }
            return Ok(if ok { EXIT_OK } else { EXIT_REJECTED });
        }
        RegistryCommand::AddIssuer { did, path } => {
            Registry::open(&path.registry)?.add_trusted_issuer(did.parse()?)?
        }
        RegistryCommand::RemoveIssuer { did, path } => {
            Registry::open(&path.registry)?.remove_trusted_issuer(did.parse()?)?
        }
        RegistryCommand::AddSchema {
            id,
            descriptor,
            path,
        } => Registry::open(&path.registry)?.add_trusted_schema(&id, &descriptor)?,
        RegistryCommand::RegisterDid {
            key,
            document,
            path,
        } => {
            let doc = match (key, document) {
                (Some(k), _) => {
                    DidDocument::for_key(&KeyPair::from_file(&k)?, Timestamp(chrono::Utc::now()))?
                }
                (None, Some(d)) => serde_json::from_slice(&read_file(&d)?)
                    .map_err(|e| ServiceError::Io(format!("{}: {e}", d.display())))?,
                (None, None) => {
                    return Err(ServiceError::Usage(
                        "--key or --document is required".into(),
                    ))
                }
            };
            Registry::open(&path.registry)?.register_did(doc)?
        }
    };
    print_entry(out, &entry);
    Ok(EXIT_OK)
}
