//! Keeps the book honest: every chapter is included as rustdoc, so
//! `cargo test --doc -p concordia-guide` compiles and runs each code block
//! in `book/src/`. mdbook itself cannot execute snippets against external
//! crates; this shim is the workaround, and a chapter module failing here
//! means the book has drifted from the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/data-model.md")]
pub mod data_model {}

#[doc = include_str!("../../../book/src/concordance.md")]
pub mod concordance {}

#[doc = include_str!("../../../book/src/dependence.md")]
pub mod dependence {}

#[doc = include_str!("../../../book/src/robust-slopes.md")]
pub mod robust_slopes {}

#[doc = include_str!("../../../book/src/attenuation.md")]
pub mod attenuation {}

#[doc = include_str!("../../../book/src/ensembles.md")]
pub mod ensembles {}

#[doc = include_str!("../../../book/src/decomposition.md")]
pub mod decomposition {}

#[doc = include_str!("../../../book/src/synthetic-data.md")]
pub mod synthetic_data {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
