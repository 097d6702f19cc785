//! Compiles the Rust blocks of the guide in `book/src` as doc-tests.
//!
//! One module per chapter, so a failing snippet is reported under the
//! chapter it came from. Run with `cargo test -p edchrom-book-snippets --doc`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/isotherm.md")]
pub mod isotherm {}

#[doc = include_str!("../../../book/src/discretization.md")]
pub mod discretization {}

#[doc = include_str!("../../../book/src/time-stepping.md")]
pub mod time_stepping {}

#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod diagnostics {}

#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}

#[doc = include_str!("../../../book/src/displacement.md")]
pub mod displacement {}

#[doc = include_str!("../../../README.md")]
pub mod readme {}
