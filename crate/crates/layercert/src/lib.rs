//! File formats, random generators and the benchmark harness around
//! `layercert-core`.

pub mod bench;
pub mod format;
pub mod gen;
pub mod idx;
pub mod profile;

pub use layercert_core as core;
