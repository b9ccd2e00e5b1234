//! Doc-tests for the guide. Each chapter of `book/src` becomes the docs of one
//! module here, so `cargo test --doc` runs every snippet in the book.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/kernels.md")]
pub mod kernels {}
#[doc = include_str!("../../../book/src/renewal.md")]
pub mod renewal {}
#[doc = include_str!("../../../book/src/mittag-leffler.md")]
pub mod mittag_leffler {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/limit.md")]
pub mod limit {}
#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod diagnostics {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
