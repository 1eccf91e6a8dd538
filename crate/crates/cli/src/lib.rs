//! Companion crate to `diffuse-core`: everything that needs an operating
//! system. Map file formats, the rayon thread-pool backend, the benchmark
//! harness, the validation suite, and the `diffuse` binary built on top.

pub mod backend;
pub mod bench;
pub mod error;
pub mod mapio;
pub mod validate;
