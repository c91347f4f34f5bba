//! Domain vocabulary: roles, authority levels, messages, and the atomic
//! instructions every other stage of the pipeline consumes.
//!
//! Authority is a discrete rank where a lower number means higher priority:
//! 0 = system, 1 = user, 2 = tool/document/history. Assistant-authored content
//! folds into level 2, as prior turns are history rather than live direction.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Source of a message. Serialized lowercase; parsing accepts any casing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::System, Role::User, Role::Assistant, Role::Tool];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Tool => "tool",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "system" => Ok(Role::System),
            "user" => Ok(Role::User),
            "assistant" => Ok(Role::Assistant),
            "tool" => Ok(Role::Tool),
            other => Err(Error::InvalidInput(format!("unknown role: {other:?}"))),
        }
    }
}

impl<'de> Deserialize<'de> for Role {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Discrete authority rank; smaller value = higher priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AuthorityLevel(pub u8);

impl AuthorityLevel {
    pub const SYSTEM: AuthorityLevel = AuthorityLevel(0);
    pub const USER: AuthorityLevel = AuthorityLevel(1);
    pub const CONTEXTUAL: AuthorityLevel = AuthorityLevel(2);

    pub fn level(self) -> u8 {
        self.0
    }
}

impl fmt::Display for AuthorityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Fixed role-to-authority mapping: System→0, User→1, Assistant/Tool→2.
pub fn authority_of(role: Role) -> AuthorityLevel {
    match role {
        Role::System => AuthorityLevel::SYSTEM,
        Role::User => AuthorityLevel::USER,
        Role::Assistant | Role::Tool => AuthorityLevel::CONTEXTUAL,
    }
}

/// True iff `a` outranks `b` (strictly higher authority, i.e. smaller level).
pub fn dominates(a: AuthorityLevel, b: AuthorityLevel) -> bool {
    a.0 < b.0
}

/// One role-tagged turn of the raw conversation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub role: Role,
    pub content: String,
    pub turn_index: usize,
}

/// The raw input context: an ordered list of messages, kept exactly as
/// ingested (no deduplication, no reordering).
///
/// The JSON wire shape is `{"messages": [{"role": ..., "content": ...}]}`;
/// turn indices are assigned from position on ingestion and are not part of
/// the wire format.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Context {
    pub messages: Vec<Message>,
}

#[derive(Serialize, Deserialize)]
struct ContextWire {
    messages: Vec<MessageWire>,
}

#[derive(Serialize, Deserialize)]
struct MessageWire {
    role: Role,
    content: String,
}

impl Serialize for Context {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let wire = ContextWire {
            messages: self
                .messages
                .iter()
                .map(|m| MessageWire { role: m.role, content: m.content.clone() })
                .collect(),
        };
        wire.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Context {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = ContextWire::deserialize(deserializer)?;
        Ok(Context::new(
            wire.messages.into_iter().map(|m| (m.role, m.content)),
        ))
    }
}

impl Context {
    /// Builds a context from `(role, content)` turns, assigning turn indices
    /// in order.
    pub fn new(turns: impl IntoIterator<Item = (Role, String)>) -> Self {
        let messages = turns
            .into_iter()
            .enumerate()
            .map(|(turn_index, (role, content))| Message { role, content, turn_index })
            .collect();
        Context { messages }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Copy of this context without messages of the given role; surviving
    /// messages keep their original turn indices.
    pub fn without_role(&self, role: Role) -> Context {
        Context {
            messages: self
                .messages
                .iter()
                .filter(|m| m.role != role)
                .cloned()
                .collect(),
        }
    }
}

/// Classification of an atomic unit: a directive versus plain information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstructionKind {
    Imperative,
    Declarative,
}

/// A minimal self-contained unit extracted from a message, annotated with the
/// authority of its source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicInstruction {
    /// Contiguous 0-based index in document order, global across the context.
    pub id: usize,
    pub content: String,
    pub authority: AuthorityLevel,
    pub source_role: Role,
    pub source_turn: usize,
    pub kind: InstructionKind,
}

/// Deterministic rule applied when several co-optimal selections exist.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Prefer keeping instructions with lower ids (earlier in the document).
    #[default]
    LowestIndexFirst,
}

/// Engine-wide hierarchy knobs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HierarchyConfig {
    /// Depth of the hierarchy: levels run 0..=depth. Default 2 (three tiers).
    pub depth: u8,
    pub tie_break: TieBreak,
    /// Hard cap on the number of atomic instructions; exceeding it is an
    /// error, never a truncation. Protects the O(N²) scan and the solver.
    pub max_instructions: usize,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            depth: 2,
            tie_break: TieBreak::LowestIndexFirst,
            max_instructions: 512,
        }
    }
}
