//! Benchmark harness for the pre-gen engine; see `benches/`.
pub use pregen_core::*;
