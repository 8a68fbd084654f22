//! Web usage analytics for a bibliographic document-delivery service.
//!
//! The crate covers the whole offline pipeline: parsing the query, display
//! and order logs, persisting them in an append-only file store, computing
//! the descriptive indicator board and the journal usage factors, and the
//! co-usage analysis (co-occurrence counting, equivalence-coefficient
//! normalisation, constrained single-link clustering and strategic maps).

pub mod cluster;
pub mod cousage;
pub mod error;
pub mod factors;
pub mod fixture;
pub mod ingest;
pub mod map;
pub mod stats;
pub mod store;
pub mod time;

pub use error::{Error, Result};
