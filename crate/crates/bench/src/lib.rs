//! Benchmark-only crate; all code lives under `benches/`.
