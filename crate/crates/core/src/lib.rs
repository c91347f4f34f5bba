//! Hierarchical instruction resolution engine.
//!
//! Converts a mixed-authority conversation context into a maximally
//! consistent, hierarchy-compliant set of applicable instructions:
//! rule-based atomization, pairwise conflict detection (rule-based or via an
//! external chat-completions detector), exact lexicographic weighted Boolean
//! optimization, and context refinement with explicit rejection notices.
//! Companion modules provide an output-compliance verifier, a closed-form
//! alignment-loss engine with analytic gradients, and a hierarchy-aware
//! training-dataset builder.

pub mod atomizer;
pub mod config;
pub mod conflict;
pub mod context;
pub mod dataset;
pub mod error;
pub mod loss;
pub mod nli;
pub mod pipeline;
pub mod refiner;
pub mod rules;
pub mod solver;
pub mod verifier;
pub mod wcnf;

pub use error::{Error, Result};
