//! ELMO (EMREX) to European Diploma Supplement credential conversion.
//!
//! Parsing and validation live in [`elmo`], the output model in [`eds`],
//! the mapping engine in [`transform`], signatures and DIDs in [`crypto`]
//! and the local trust registry in [`vdr`].

pub mod crypto;
pub mod eds;
pub mod elmo;
pub mod standards;
pub mod transform;
pub mod vdr;

pub use eds::{parse_eds, serialize_jsonld, EdsCredential};
pub use elmo::{parse_elmo, validate_elmo, DocumentType, ElmoDocument};
pub use transform::{convert, ConversionOptions, ConversionReport};
