//! Corrective retrieval-augmented generation.
//!
//! Each question's retrieved documents are scored by a relevance evaluator,
//! the scores select one of three actions (Correct, Incorrect, Ambiguous),
//! and the action decides how the generator's context is built: refined
//! internal knowledge, external Wikipedia knowledge, or both.

pub mod attribution;
pub mod backend;
pub mod disk_cache;
pub mod dispatch;
pub mod error;
pub mod eval;
pub mod orchestrator;
pub mod prompt;
pub mod refine;
pub mod retry;
pub mod types;
pub mod wiki;

pub use error::CoreError;
pub use types::*;
