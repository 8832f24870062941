//! Runs the guide's code samples as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/parsing.md")]
pub mod parsing {}

#[doc = include_str!("../../../book/src/graphs.md")]
pub mod graphs {}

#[doc = include_str!("../../../book/src/characters.md")]
pub mod characters {}

#[doc = include_str!("../../../book/src/relations.md")]
pub mod relations {}

#[doc = include_str!("../../../book/src/attention.md")]
pub mod attention {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
