//! Code registries for the external standards referenced by ELMO and EDS.
//!
//! Every registry is backed by a checked-in code list under
//! `fixtures/standards/<STANDARD_ID>.tsv` (one `<code>\t<display-name>` record
//! per line). The built-in set is compiled into the crate and loaded once;
//! [`StandardsRegistry::load_dir`] reads an alternative directory with the
//! same layout.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StandardsError {
    #[error("unknown standard `{0}`")]
    UnknownStandard(String),
    #[error("invalid ISO/IEC 5218 gender code {0}")]
    InvalidGenderCode(i64),
    #[error("{path}:{line}: {reason}")]
    MalformedFixture {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("cannot read code list {path}: {reason}")]
    Io { path: String, reason: String },
}

/// External standards with a checked-in code list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StandardId {
    #[serde(rename = "ISO3166_1_ALPHA2")]
    Iso3166Alpha2,
    #[serde(rename = "ISO_IEC_5218")]
    IsoIec5218,
    #[serde(rename = "ISCED_F_2013")]
    IscedF2013,
    #[serde(rename = "ISO639_1")]
    Iso639_1,
    #[serde(rename = "EQF")]
    Eqf,
    #[serde(rename = "ECTS")]
    Ects,
}

impl StandardId {
    pub const ALL: [StandardId; 6] = [
        StandardId::Iso3166Alpha2,
        StandardId::IsoIec5218,
        StandardId::IscedF2013,
        StandardId::Iso639_1,
        StandardId::Eqf,
        StandardId::Ects,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StandardId::Iso3166Alpha2 => "ISO3166_1_ALPHA2",
            StandardId::IsoIec5218 => "ISO_IEC_5218",
            StandardId::IscedF2013 => "ISCED_F_2013",
            StandardId::Iso639_1 => "ISO639_1",
            StandardId::Eqf => "EQF",
            StandardId::Ects => "ECTS",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.tsv", self.as_str())
    }

    fn builtin_source(self) -> &'static str {
        match self {
            StandardId::Iso3166Alpha2 => {
                include_str!("../../../fixtures/standards/ISO3166_1_ALPHA2.tsv")
            }
            StandardId::IsoIec5218 => include_str!("../../../fixtures/standards/ISO_IEC_5218.tsv"),
            StandardId::IscedF2013 => include_str!("../../../fixtures/standards/ISCED_F_2013.tsv"),
            StandardId::Iso639_1 => include_str!("../../../fixtures/standards/ISO639_1.tsv"),
            StandardId::Eqf => include_str!("../../../fixtures/standards/EQF.tsv"),
            StandardId::Ects => include_str!("../../../fixtures/standards/ECTS.tsv"),
        }
    }
}

impl fmt::Display for StandardId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StandardId {
    type Err = StandardsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StandardId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| StandardsError::UnknownStandard(s.to_string()))
    }
}

/// Numeric ISO 3166-1 codes to alpha-2, used only to recognise (and warn
/// about) numeric country codes in ELMO input.
const NUMERIC_COUNTRIES: &str = include_str!("../../../fixtures/standards/ISO3166_1_NUMERIC.tsv");
const NUMERIC_FILE: &str = "ISO3166_1_NUMERIC.tsv";

/// One immutable code list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeRegistry {
    standard: StandardId,
    entries: BTreeMap<String, String>,
    source_fixture: PathBuf,
}

impl CodeRegistry {
    pub fn parse(
        standard: StandardId,
        text: &str,
        source_fixture: impl Into<PathBuf>,
    ) -> Result<Self, StandardsError> {
        let source_fixture = source_fixture.into();
        let entries = parse_tsv(text, &source_fixture)?;
        Ok(Self {
            standard,
            entries,
            source_fixture,
        })
    }

    pub fn standard(&self) -> StandardId {
        self.standard
    }

    pub fn source_fixture(&self) -> &Path {
        &self.source_fixture
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Canonical spelling of `code` for this standard.
    ///
    /// Countries and ECTS grades are uppercased, languages lowercased,
    /// numeric codes lose leading zeros. ISCED-F codes written without
    /// their leading zero ("541") resolve to the assigned four-digit form
    /// ("0541") when only the latter exists.
    pub fn canonicalize(&self, code: &str) -> String {
        let code = code.trim();
        match self.standard {
            StandardId::Iso3166Alpha2 | StandardId::Ects => code.to_ascii_uppercase(),
            StandardId::Iso639_1 => code.to_ascii_lowercase(),
            StandardId::Eqf | StandardId::IsoIec5218 => match code.parse::<i64>() {
                Ok(n) => n.to_string(),
                Err(_) => code.to_string(),
            },
            StandardId::IscedF2013 => {
                if !self.entries.contains_key(code)
                    && code.len() == 3
                    && code.bytes().all(|b| b.is_ascii_digit())
                {
                    let padded = format!("0{code}");
                    if self.entries.contains_key(&padded) {
                        return padded;
                    }
                }
                code.to_string()
            }
        }
    }

    pub fn get(&self, code: &str) -> Option<&str> {
        self.entries
            .get(&self.canonicalize(code))
            .map(String::as_str)
    }

    pub fn contains(&self, code: &str) -> bool {
        self.get(code).is_some()
    }
}

fn parse_tsv(text: &str, source: &Path) -> Result<BTreeMap<String, String>, StandardsError> {
    let mut entries = BTreeMap::new();
    let malformed = |line: usize, reason: &str| StandardsError::MalformedFixture {
        path: source.display().to_string(),
        line,
        reason: reason.to_string(),
    };
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (code, name) = line
            .split_once('\t')
            .ok_or_else(|| malformed(idx + 1, "expected `<code>\\t<display-name>`"))?;
        if code.is_empty() || name.is_empty() {
            return Err(malformed(idx + 1, "empty code or display name"));
        }
        if entries.insert(code.to_string(), name.to_string()).is_some() {
            return Err(malformed(idx + 1, &format!("duplicate code `{code}`")));
        }
    }
    if entries.is_empty() {
        return Err(malformed(0, "code list is empty"));
    }
    Ok(entries)
}

/// The full set of registries consulted during validation and conversion.
#[derive(Debug, Clone)]
pub struct StandardsRegistry {
    registries: BTreeMap<StandardId, CodeRegistry>,
    numeric_countries: BTreeMap<String, String>,
}

impl StandardsRegistry {
    /// The compiled-in registries, parsed on first use.
    pub fn builtin() -> &'static StandardsRegistry {
        static BUILTIN: OnceLock<StandardsRegistry> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            let registries = StandardId::ALL
                .into_iter()
                .map(|id| {
                    let path = PathBuf::from("fixtures/standards").join(id.file_name());
                    let reg = CodeRegistry::parse(id, id.builtin_source(), path)
                        .expect("built-in code list is well-formed");
                    (id, reg)
                })
                .collect();
            let numeric_countries =
                parse_tsv(NUMERIC_COUNTRIES, Path::new(NUMERIC_FILE)).expect("numeric list");
            StandardsRegistry {
                registries,
                numeric_countries,
            }
        })
    }

    /// Loads every `<STANDARD_ID>.tsv` present in `dir`. Missing files are
    /// skipped; lookups against them report [`StandardsError::UnknownStandard`].
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, StandardsError> {
        let dir = dir.as_ref();
        let read = |path: &Path| {
            std::fs::read_to_string(path).map_err(|e| StandardsError::Io {
                path: path.display().to_string(),
                reason: e.to_string(),
            })
        };
        let mut registries = BTreeMap::new();
        for id in StandardId::ALL {
            let path = dir.join(id.file_name());
            if path.exists() {
                registries.insert(id, CodeRegistry::parse(id, &read(&path)?, path)?);
            }
        }
        let numeric_path = dir.join(NUMERIC_FILE);
        let numeric_countries = if numeric_path.exists() {
            parse_tsv(&read(&numeric_path)?, &numeric_path)?
        } else {
            BTreeMap::new()
        };
        Ok(Self {
            registries,
            numeric_countries,
        })
    }

    pub fn registry(&self, standard: StandardId) -> Result<&CodeRegistry, StandardsError> {
        self.registries
            .get(&standard)
            .ok_or_else(|| StandardsError::UnknownStandard(standard.to_string()))
    }

    /// Display name of `code`, or `None` when the code is not assigned.
    pub fn lookup(&self, standard: StandardId, code: &str) -> Result<Option<&str>, StandardsError> {
        Ok(self.registry(standard)?.get(code))
    }

    /// Same as [`lookup`](Self::lookup) with the standard given by its id text.
    pub fn lookup_by_name(
        &self,
        standard: &str,
        code: &str,
    ) -> Result<Option<&str>, StandardsError> {
        self.lookup(standard.parse()?, code)
    }

    pub fn canonicalize(&self, standard: StandardId, code: &str) -> Result<String, StandardsError> {
        Ok(self.registry(standard)?.canonicalize(code))
    }

    /// Alpha-2 code for an ISO 3166-1 numeric code such as `752`.
    pub fn country_for_numeric(&self, code: &str) -> Option<&str> {
        let code = code.trim();
        if code.is_empty() || !code.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        self.numeric_countries
            .get(&format!("{code:0>3}"))
            .map(String::as_str)
    }
}

/// EQF defines exactly eight levels.
pub fn validate_eqf_level(level: i64) -> bool {
    (1..=8).contains(&level)
}

pub const ECTS_SCHEME: &str = "ECTS";
pub const LOCAL_SCHEME_PREFIX: &str = "local:";
pub const ECTS_GRADES: [&str; 7] = ["A", "B", "C", "D", "E", "FX", "F"];

pub fn is_ects_scheme(scheme: &str) -> bool {
    scheme.trim().eq_ignore_ascii_case(ECTS_SCHEME)
}

/// Maps an ELMO grading scheme and grade onto the EDS pair.
///
/// ECTS passes through unchanged; any other scheme keeps its grade verbatim
/// and gets a `local:` scheme label. No grade conversion is attempted.
pub fn map_grading_scheme(elmo_scheme: &str, grade: &str) -> (String, String) {
    if is_ects_scheme(elmo_scheme) {
        (ECTS_SCHEME.to_string(), grade.to_string())
    } else {
        (
            format!("{LOCAL_SCHEME_PREFIX}{}", elmo_scheme.trim()),
            grade.to_string(),
        )
    }
}

/// ISO/IEC 5218 code to the word form written into EDS output.
pub fn map_gender(code: i64) -> Result<&'static str, StandardsError> {
    match code {
        0 => Ok("unknown"),
        1 => Ok("male"),
        2 => Ok("female"),
        9 => Ok("not applicable"),
        other => Err(StandardsError::InvalidGenderCode(other)),
    }
}
