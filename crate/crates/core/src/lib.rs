// SPDX-License-Identifier: Apache-2.0

//! A desk-scale WebAssembly 1.0 runtime.
//!
//! The pipeline is decode ([`codec`]) → validate ([`validate`]) →
//! tree building and profile-driven rewriting ([`tree`]) → execution
//! ([`exec`]), with a small WASI preview1 subset ([`wasi`]). The
//! [`suite`] module builds the benchmark corpus and random programs,
//! and [`harness`] turns timed runs into reports.

pub mod codec;
pub mod exec;
pub mod harness;
pub mod model;
pub mod par;
pub mod suite;
pub mod tree;
pub mod validate;
pub mod wasi;

#[cfg(test)]
mod flat_oracle;

pub use codec::{decode_module, encode_module, MalformedError, MalformedKind};
pub use model::*;
pub use validate::{validate_module, ValidatedModule, ValidationError};
