//! Doc-tests for the guide in `book/`.
//!
//! mdbook cannot run book code blocks as tests against this workspace, so
//! each chapter is included verbatim as a module's documentation and
//! `cargo test --doc -p trojanlab-book` compiles and runs every Rust
//! snippet. One module per chapter keeps failures traceable to their
//! source file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/classifier.md")]
pub mod classifier {}

#[doc = include_str!("../../../book/src/data-and-triggers.md")]
pub mod data_and_triggers {}

#[doc = include_str!("../../../book/src/insertion-objective.md")]
pub mod insertion_objective {}

#[doc = include_str!("../../../book/src/choosing-weights.md")]
pub mod choosing_weights {}

#[doc = include_str!("../../../book/src/pruning-and-bits.md")]
pub mod pruning_and_bits {}

#[doc = include_str!("../../../book/src/defense.md")]
pub mod defense {}

#[doc = include_str!("../../../book/src/running-experiments.md")]
pub mod running_experiments {}
