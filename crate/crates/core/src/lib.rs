//! Mining biographical records from unpunctuated literary Chinese gazetteer
//! text.
//!
//! The pipeline annotates passages with dictionary matches ([`lexicon`]),
//! resolves the resulting ambiguity lattice into dynasty-consistent label
//! sequences ([`lattice`]), selects record-bearing sequences with label
//! patterns and grammar rules ([`extract`]), and links the records against a
//! reference table ([`linkage`]). [`seqmodel`] gathers label n-gram
//! statistics for discovering new patterns.

pub mod corpus;
pub mod dynasty;
pub mod error;
pub mod lattice;
pub mod extract;
pub mod lexicon;
pub mod linkage;
pub mod natural;
pub mod seqmodel;
pub mod span;

pub use error::{Error, Result};
