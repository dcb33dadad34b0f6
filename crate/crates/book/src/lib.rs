//! The guide under `book/` compiled as doc comments, one module per chapter,
//! so `cargo test` runs every code block against the current library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/charts.md")]
pub mod charts {}
#[doc = include_str!("../../../book/src/potentials.md")]
pub mod potentials {}
#[doc = include_str!("../../../book/src/offsets.md")]
pub mod offsets {}
#[doc = include_str!("../../../book/src/spectra.md")]
pub mod spectra {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
