//! Crate-wide error type shared by the pipeline stages and the CLI.

use thiserror::Error;

/// Unified error enum for the resolution pipeline.
///
/// Note that solving itself has no infeasibility error: the empty selection
/// always satisfies every hard clause, so an optimizer run can fail only on
/// malformed inputs, never on unsatisfiability.
#[derive(Debug, Error)]
pub enum Error {
    /// Atomization produced more instructions than the configured cap allows.
    #[error("instruction count {count} exceeds the configured cap of {cap}")]
    CapExceeded { count: usize, cap: usize },

    /// The conflict matrix dimension does not match the instruction list.
    #[error("conflict matrix is {matrix_n}x{matrix_n} but {atom_count} instructions were supplied")]
    MatrixShapeMismatch { matrix_n: usize, atom_count: usize },

    /// An instruction carries an authority level deeper than the configured hierarchy.
    #[error("authority level {level} exceeds the configured hierarchy depth {depth}")]
    LevelOutOfRange { level: u8, depth: u8 },

    /// The exhaustive oracle was asked to enumerate too large an instance.
    #[error("instance has {n} instructions; exhaustive enumeration is limited to {limit}")]
    TooLarge { n: usize, limit: usize },

    /// The weighted-CNF export base does not strictly dominate the instance size.
    #[error("weight base {base} must exceed the instruction count {n} for strict level dominance")]
    BaseTooSmall { base: u64, n: usize },

    /// A rejected instruction has no conflicting selected partner to report.
    #[error("rejected instruction {id} has no conflicting selected partner in the matrix")]
    InconsistentResolution { id: usize },

    /// The reference model assigns all probability to one candidate, which
    /// would require an infinite score gap.
    #[error("reference distribution is degenerate: q_ref(accepted) = {q_ref}")]
    DegenerateReference { q_ref: f64 },

    /// The external relation detector could not be reached after retrying.
    #[error("detector backend unavailable after {attempts} attempt(s): {detail}")]
    BackendUnavailable { attempts: u32, detail: String },

    /// The external detector answered, but no relation label could be parsed.
    #[error("no relation label found in detector response: {snippet:?}")]
    MalformedResponse { snippet: String },

    /// Invalid configuration (bad file, missing endpoint, out-of-range knob).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed caller-supplied input (context JSON, seed cases, score lines).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
