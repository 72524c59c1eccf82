//! IO and orchestration half of the resonance laboratory. The numerical
//! content lives in `reslab-core`; this crate adds configuration files,
//! deterministic reports, CSV export, independent high-precision oracles
//! for cross-checking the evaluators, and the experiment pipelines behind
//! the `reslab` binary.

pub mod config;
pub mod csvio;
pub mod oracle;
pub mod parallel;
pub mod report;
pub mod runners;
pub mod sources;
