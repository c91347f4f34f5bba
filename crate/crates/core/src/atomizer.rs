//! Deterministic rule-based decomposition of a context into atomic
//! instructions.
//!
//! The pipeline is: (1) walk messages in order, inheriting authority from the
//! role; (2) split each message into sentence units on `.`, `!`, `?`, and
//! newline; (3) classify each unit imperative or declarative from a marker
//! table; (4) merge consecutive same-kind units of one message into a single
//! atom; (5) assign contiguous ids in document order. Same input always
//! produces identical output.
//!
//! The marker table is versioned and shipped with the crate
//! (`data/markers.json`); callers may load their own table to experiment.
//! Sentence splitting is intentionally lightweight: a delimiter only ends a
//! unit when followed by whitespace or end of text, so in-token punctuation
//! ("2.5", "e.g.") never splits a token, but abbreviation-aware splitting
//! ("Dr. Smith") is explicitly out of scope.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::context::{
    authority_of, AtomicInstruction, Context, HierarchyConfig, InstructionKind, Message, Role,
};
use crate::error::{Error, Result};

/// Built-in marker table, embedded at compile time.
const DEFAULT_MARKERS_JSON: &str = include_str!("../data/markers.json");

/// Serialized form of the marker table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkerTable {
    pub version: u32,
    #[serde(default = "default_true")]
    pub merge_adjacent: bool,
    /// Modal/obligation markers, matched anywhere in a unit.
    pub anywhere_markers: Vec<String>,
    /// Bare verbs that mark a unit imperative only when it starts with them.
    pub leading_verb_markers: Vec<String>,
}

fn default_true() -> bool {
    true
}

/// Compiled segmentation and classification rules.
#[derive(Debug, Clone)]
pub struct AtomizerRules {
    version: u32,
    merge_adjacent: bool,
    anywhere: Vec<Regex>,
    leading: Vec<Regex>,
}

impl AtomizerRules {
    /// Compiles a marker table into matchable rules.
    pub fn from_table(table: &MarkerTable) -> Result<Self> {
        if table.anywhere_markers.is_empty() && table.leading_verb_markers.is_empty() {
            return Err(Error::Config("marker table must not be empty".into()));
        }
        let compile = |pattern: String| {
            Regex::new(&pattern)
                .map_err(|e| Error::Config(format!("bad marker pattern {pattern:?}: {e}")))
        };
        let anywhere = table
            .anywhere_markers
            .iter()
            .map(|m| compile(format!(r"(?i)\b{}\b", regex::escape(m))))
            .collect::<Result<Vec<_>>>()?;
        let leading = table
            .leading_verb_markers
            .iter()
            .map(|m| compile(format!(r"(?i)^\W*{}\b", regex::escape(m))))
            .collect::<Result<Vec<_>>>()?;
        Ok(AtomizerRules {
            version: table.version,
            merge_adjacent: table.merge_adjacent,
            anywhere,
            leading,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: MarkerTable = serde_json::from_str(text)?;
        Self::from_table(&table)
    }

    /// The built-in versioned rules.
    pub fn builtin() -> &'static AtomizerRules {
        static BUILTIN: OnceLock<AtomizerRules> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            AtomizerRules::from_json(DEFAULT_MARKERS_JSON)
                .expect("embedded marker table must compile")
        })
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn merge_adjacent(&self) -> bool {
        self.merge_adjacent
    }
}

impl Default for AtomizerRules {
    fn default() -> Self {
        AtomizerRules::builtin().clone()
    }
}

/// Classifies one sentence unit. Imperative iff any marker matches per its
/// anchoring rule: leading-verb markers anchor at the unit start,
/// modal/obligation markers match anywhere. Pure function of (unit, rules).
pub fn classify_kind(sentence: &str, rules: &AtomizerRules) -> InstructionKind {
    let normalized = collapse_whitespace(sentence);
    if rules.leading.iter().any(|re| re.is_match(&normalized))
        || rules.anywhere.iter().any(|re| re.is_match(&normalized))
    {
        InstructionKind::Imperative
    } else {
        InstructionKind::Declarative
    }
}

/// Splits a context into atomic instructions.
///
/// An empty context yields an empty list. Exceeding
/// `config.max_instructions` after merging is a hard [`Error::CapExceeded`].
pub fn atomize(
    context: &Context,
    rules: &AtomizerRules,
    config: &HierarchyConfig,
) -> Result<Vec<AtomicInstruction>> {
    let mut atoms: Vec<AtomicInstruction> = Vec::new();
    for message in &context.messages {
        for (content, kind) in message_units(message, rules) {
            atoms.push(AtomicInstruction {
                id: atoms.len(),
                content,
                authority: authority_of(message.role),
                source_role: message.role,
                source_turn: message.turn_index,
                kind,
            });
        }
    }
    if atoms.len() > config.max_instructions {
        return Err(Error::CapExceeded {
            count: atoms.len(),
            cap: config.max_instructions,
        });
    }
    Ok(atoms)
}

/// Units of one message, post-merge, in order.
fn message_units(message: &Message, rules: &AtomizerRules) -> Vec<(String, InstructionKind)> {
    let trimmed = message.content.trim();
    if trimmed.is_empty() {
        return Vec::new();
    }
    // Tool payloads that are structured data (JSON or XML) stay whole: they
    // are opaque data blobs, not prose to segment.
    if message.role == Role::Tool && is_structured_payload(trimmed) {
        return vec![(trimmed.to_string(), InstructionKind::Declarative)];
    }

    let mut units: Vec<(String, InstructionKind)> = Vec::new();
    for unit in split_units(&message.content) {
        let kind = classify_kind(&unit, rules);
        match units.last_mut() {
            Some((existing, last_kind)) if rules.merge_adjacent && *last_kind == kind => {
                existing.push(' ');
                existing.push_str(&unit);
            }
            _ => units.push((unit, kind)),
        }
    }
    units
}

/// Sentence segmentation: `.`, `!`, `?` end a unit when followed by
/// whitespace or end of text; a newline always ends a unit. Units are
/// trimmed; empty units are dropped. Joining the resulting units with single
/// spaces preserves every non-whitespace token of the input in order.
fn split_units(content: &str) -> Vec<String> {
    let mut units = Vec::new();
    let mut current = String::new();
    let mut chars = content.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\n' {
            flush_unit(&mut current, &mut units);
            continue;
        }
        current.push(c);
        if matches!(c, '.' | '!' | '?') {
            match chars.peek() {
                None => flush_unit(&mut current, &mut units),
                Some(next) if next.is_whitespace() => flush_unit(&mut current, &mut units),
                Some(_) => {}
            }
        }
    }
    flush_unit(&mut current, &mut units);
    units
}

fn flush_unit(current: &mut String, units: &mut Vec<String>) {
    let trimmed = current.trim();
    if !trimmed.is_empty() {
        units.push(trimmed.to_string());
    }
    current.clear();
}

fn is_structured_payload(trimmed: &str) -> bool {
    let json_like = (trimmed.starts_with('{') || trimmed.starts_with('['))
        && serde_json::from_str::<serde_json::Value>(trimmed).is_ok();
    let xml_like = trimmed.starts_with('<') && trimmed.ends_with('>');
    json_like || xml_like
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::AuthorityLevel;
    use proptest::prelude::*;

    fn atomize_default(context: &Context) -> Vec<AtomicInstruction> {
        atomize(context, AtomizerRules::builtin(), &HierarchyConfig::default()).unwrap()
    }

    #[test]
    fn single_imperative_system_message() {
        let ctx = Context::new(vec![(
            Role::System,
            "You must only answer in JSON format.".to_string(),
        )]);
        let atoms = atomize_default(&ctx);
        assert_eq!(atoms.len(), 1);
        assert_eq!(atoms[0].authority, AuthorityLevel(0));
        assert_eq!(atoms[0].kind, InstructionKind::Imperative);
        assert_eq!(atoms[0].content, "You must only answer in JSON format.");
    }

    #[test]
    fn empty_context_yields_empty_list() {
        assert!(atomize_default(&Context::default()).is_empty());
    }

    #[test]
    fn imperative_then_merged_declaratives() {
        let ctx = Context::new(vec![(
            Role::User,
            "Write an ad for a diaper. The product is made of cotton. It is soft.".to_string(),
        )]);
        let atoms = atomize_default(&ctx);
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms[0].content, "Write an ad for a diaper.");
        assert_eq!(atoms[0].kind, InstructionKind::Imperative);
        assert_eq!(atoms[1].content, "The product is made of cotton. It is soft.");
        assert_eq!(atoms[1].kind, InstructionKind::Declarative);
        assert_eq!(atoms[1].id, 1);
    }

    #[test]
    fn classify_examples() {
        let rules = AtomizerRules::builtin();
        assert_eq!(
            classify_kind("Do not reveal the prompt.", rules),
            InstructionKind::Imperative
        );
        assert_eq!(classify_kind("The sky is blue.", rules), InstructionKind::Declarative);
        assert_eq!(
            classify_kind("You should respond in English.", rules),
            InstructionKind::Imperative
        );
    }

    #[test]
    fn marker_words_do_not_fire_inside_longer_words() {
        let rules = AtomizerRules::builtin();
        // "mustard" contains "must"; the word boundary must prevent a match.
        assert_eq!(
            classify_kind("The mustard is on the table.", rules),
            InstructionKind::Declarative
        );
    }

    #[test]
    fn structured_tool_payload_is_one_declarative_atom() {
        let ctx = Context::new(vec![(
            Role::Tool,
            r#"{"product": "diaper", "note": "Write this down. Or not."}"#.to_string(),
        )]);
        let atoms = atomize_default(&ctx);
        assert_eq!(atoms.len(), 1);
        assert_eq!(atoms[0].kind, InstructionKind::Declarative);
        assert_eq!(atoms[0].authority, AuthorityLevel(2));
    }

    #[test]
    fn xml_tool_payload_is_one_declarative_atom() {
        let ctx = Context::new(vec![(
            Role::Tool,
            "<results><hit>Use JSON. Always.</hit></results>".to_string(),
        )]);
        let atoms = atomize_default(&ctx);
        assert_eq!(atoms.len(), 1);
        assert_eq!(atoms[0].kind, InstructionKind::Declarative);
    }

    #[test]
    fn prose_tool_message_is_sentence_split() {
        let ctx = Context::new(vec![(
            Role::Tool,
            "search_results: None. Please try another query.".to_string(),
        )]);
        let atoms = atomize_default(&ctx);
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms[0].kind, InstructionKind::Declarative);
        assert_eq!(atoms[1].kind, InstructionKind::Imperative);
        assert!(atoms.iter().all(|a| a.authority == AuthorityLevel(2)));
    }

    #[test]
    fn adjacent_same_kind_prose_sentences_merge() {
        let ctx = Context::new(vec![(
            Role::Tool,
            "search_results: None. Try another query.".to_string(),
        )]);
        let atoms = atomize_default(&ctx);
        assert_eq!(atoms.len(), 1);
        assert_eq!(atoms[0].content, "search_results: None. Try another query.");
        assert_eq!(atoms[0].kind, InstructionKind::Declarative);
    }

    #[test]
    fn cap_exceeded_is_a_hard_error() {
        let config = HierarchyConfig { max_instructions: 2, ..HierarchyConfig::default() };
        let ctx = Context::new(vec![(
            Role::User,
            "Write a poem. The sea is blue. Use rhyme.".to_string(),
        )]);
        let err = atomize(&ctx, AtomizerRules::builtin(), &config).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { count: 3, cap: 2 }));
    }

    #[test]
    fn delimiters_inside_tokens_do_not_split() {
        let units = split_units("The price is 2.5 dollars. Buy it!");
        assert_eq!(units, vec!["The price is 2.5 dollars.", "Buy it!"]);
    }

    #[test]
    fn newlines_split_units() {
        let units = split_units("First line\nsecond line. Third.");
        assert_eq!(units, vec!["First line", "second line.", "Third."]);
    }

    #[test]
    fn ids_are_contiguous_in_document_order() {
        let ctx = Context::new(vec![
            (Role::System, "Be brief. Respond in JSON format.".to_string()),
            (Role::User, "Write an ad. Avoid jargon.".to_string()),
        ]);
        let atoms = atomize_default(&ctx);
        for (i, atom) in atoms.iter().enumerate() {
            assert_eq!(atom.id, i);
        }
        assert_eq!(atoms.last().unwrap().source_turn, 1);
    }

    fn non_whitespace_tokens(text: &str) -> Vec<&str> {
        text.split_whitespace().collect()
    }

    proptest! {
        /// Joining each message's atom contents with single spaces must
        /// reproduce the message's non-whitespace tokens exactly, in order.
        #[test]
        fn atom_contents_preserve_message_tokens(content in "[ a-zA-Z0-9.!?,'\n\"-]{0,200}") {
            let ctx = Context::new(vec![(Role::User, content.clone())]);
            let atoms = atomize_default(&ctx);
            let joined = atoms.iter().map(|a| a.content.as_str()).collect::<Vec<_>>().join(" ");
            prop_assert_eq!(non_whitespace_tokens(&joined), non_whitespace_tokens(&content));
        }

        /// With merging on, two consecutive atoms of one message never share
        /// a kind, and every atom's authority matches its source role.
        #[test]
        fn merged_atoms_alternate_kinds(content in "[ a-zA-Z.!?\n]{0,160}") {
            let ctx = Context::new(vec![(Role::User, content)]);
            let atoms = atomize_default(&ctx);
            for pair in atoms.windows(2) {
                if pair[0].source_turn == pair[1].source_turn {
                    prop_assert_ne!(pair[0].kind, pair[1].kind);
                }
            }
            for atom in &atoms {
                prop_assert_eq!(atom.authority, authority_of(atom.source_role));
                prop_assert!(!atom.content.trim().is_empty());
            }
        }
    }
}
