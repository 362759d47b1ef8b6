//! Benchmark harnesses and reporting for the satkit toolkit: capped
//! solve-rate sweeps, uncapped decision duels, aggregation comparisons over
//! trained replicas, CSV/SVG output, and built-in diagnostics.

pub mod experiments;
pub mod report;
pub mod selftest;
