//! Test support: brute-force reference implementations and synthetic data.
//!
//! The oracles here are written independently of the library code paths
//! they check: per-bin membership scans instead of bin arithmetic, a
//! triangular kernel instead of floor/fraction interpolation, run-generated
//! uniform patterns instead of transition counting, and a full sort instead
//! of selection.

pub mod oracle;
pub mod synth;

use std::path::PathBuf;

/// Bundled response file whose agreement profile matches the reference
/// annotation tables.
pub fn agreement_csv_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/agreement_responses.csv")
}

/// Bundled 30-image fixture corpus and its triplet file.
pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/fixtures")
}
