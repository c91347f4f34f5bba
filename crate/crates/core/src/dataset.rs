//! Construction of hierarchy-aware preference-training records.
//!
//! Seed cases pair one base instruction with aligned and conflicting
//! variants plus an accepted/rejected response pair. Variants are validated
//! with the relation detector (aligned variants must not contradict the seed
//! or each other; conflict variants must genuinely contradict the seed),
//! texts are dealt onto the three authority levels, tool-level content is
//! wrapped in `<tool_output>` tags, and each case becomes one training
//! record carrying hierarchy metadata: a doubled weight for conflict cases
//! and the static authority-ordering matrix over (system, user, tool).

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use rand::{RngExt as _, SeedableRng as _};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conflict::{Relation, RelationDetector};
use crate::context::Role;
use crate::error::{Error, Result};

/// System message used when no content lands at the system level.
pub const DEFAULT_SYSTEM_PROMPT: &str = "You are a helpful assistant.";

/// Static authority ordering over (system, user, tool): entry `[a][b] = 1`
/// means level `a` overrides level `b`. Strictly upper-triangular.
pub const AUTHORITY_MATRIX: [[u8; 3]; 3] = [[0, 1, 1], [0, 0, 1], [0, 0, 0]];

/// Which pair of authority levels a conflict variant exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictType {
    SystemOverUser,
    SystemOverTool,
    UserOverTool,
}

impl ConflictType {
    pub fn as_str(self) -> &'static str {
        match self {
            ConflictType::SystemOverUser => "system_over_user",
            ConflictType::SystemOverTool => "system_over_tool",
            ConflictType::UserOverTool => "user_over_tool",
        }
    }
}

impl std::fmt::Display for ConflictType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A conflicting variant of the seed instruction, tagged with the level
/// pairing it is meant to exercise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictVariant {
    pub text: String,
    pub conflict_type: ConflictType,
}

/// One synthesis unit: a seed instruction, its variants, and a preference
/// response pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedCase {
    pub seed_instruction: String,
    #[serde(default)]
    pub aligned_variants: Vec<String>,
    #[serde(default)]
    pub conflict_variants: Vec<ConflictVariant>,
    pub accepted_response: String,
    pub rejected_response: String,
}

impl SeedCase {
    pub fn validate(&self) -> Result<()> {
        if self.aligned_variants.is_empty() && self.conflict_variants.is_empty() {
            return Err(Error::InvalidInput(
                "seed case needs at least one aligned or conflict variant".into(),
            ));
        }
        if self.accepted_response.is_empty() || self.rejected_response.is_empty() {
            return Err(Error::InvalidInput("seed case responses must be non-empty".into()));
        }
        Ok(())
    }
}

/// Reads seed cases from JSONL (one case per line, blank lines skipped).
pub fn read_seed_cases<R: BufRead>(reader: R) -> Result<Vec<SeedCase>> {
    let mut cases = Vec::new();
    for (number, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let case: SeedCase = serde_json::from_str(&line).map_err(|e| {
            Error::InvalidInput(format!("seed case on line {}: {e}", number + 1))
        })?;
        case.validate()
            .map_err(|e| Error::InvalidInput(format!("seed case on line {}: {e}", number + 1)))?;
        cases.push(case);
    }
    Ok(cases)
}

/// An artificial conflicting instruction with a response that follows it
/// instead of the case's real instructions; used to synthesize rejected
/// responses for aligned cases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeldOutEntry {
    pub instruction: String,
    pub response: String,
}

/// Pool of held-out conflicting instruction/response pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HeldOutPool {
    pub entries: Vec<HeldOutEntry>,
}

impl HeldOutPool {
    /// Parses a JSON array of `{"instruction": …, "response": …}` objects.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let entries: Vec<HeldOutEntry> = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("held-out pool: {e}")))?;
        Ok(HeldOutPool { entries })
    }
}

/// One role-tagged message of a training record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMessage {
    pub role: Role,
    pub content: String,
}

/// Hierarchy metadata attached to every record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub hierarchy_weight: f64,
    pub is_conflict: bool,
    pub has_tool: bool,
    pub conflict_type: Option<ConflictType>,
    pub conflict_matrix: [[u8; 3]; 3],
}

/// One processed training example: role-separated messages plus hierarchy
/// metadata, with the rejected response carried alongside for preference
/// training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub id: String,
    pub messages: Vec<RecordMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected_response: Option<String>,
    pub training_metadata: TrainingMetadata,
}

impl TrainingRecord {
    /// Checks the schema invariants: a strictly upper-triangular conflict
    /// matrix, the weight keyed to the conflict flag, and `has_tool`
    /// agreeing with the messages.
    pub fn validate(&self) -> Result<()> {
        for (a, row) in self.training_metadata.conflict_matrix.iter().enumerate() {
            for (b, &entry) in row.iter().enumerate() {
                if entry != 0 && a >= b {
                    return Err(Error::InvalidInput(format!(
                        "conflict_matrix[{a}][{b}] = {entry} breaks strict upper triangularity"
                    )));
                }
            }
        }
        let expected = if self.training_metadata.is_conflict { 2.0 } else { 1.0 };
        if self.training_metadata.hierarchy_weight != expected {
            return Err(Error::InvalidInput(format!(
                "hierarchy_weight {} does not match is_conflict {}",
                self.training_metadata.hierarchy_weight, self.training_metadata.is_conflict
            )));
        }
        let has_tool_message = self.messages.iter().any(|m| m.role == Role::Tool);
        if has_tool_message != self.training_metadata.has_tool {
            return Err(Error::InvalidInput(format!(
                "has_tool {} does not match the messages",
                self.training_metadata.has_tool
            )));
        }
        Ok(())
    }

    /// Pretty JSON with 4-space indentation; the canonical on-disk form for
    /// single records.
    pub fn to_pretty_json(&self) -> Result<String> {
        let mut buf = Vec::new();
        let formatter = serde_json::ser::PrettyFormatter::with_indent(b"    ");
        let mut serializer = serde_json::Serializer::with_formatter(&mut buf, formatter);
        self.serialize(&mut serializer)?;
        Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
    }

    /// Compact single-line JSON; the JSONL corpus form.
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Wraps content destined for the tool level.
pub fn wrap_tool_content(content: &str) -> String {
    format!("<tool_output>{content}</tool_output>")
}

/// Inverse of [`wrap_tool_content`]; returns the input unchanged when the
/// tags are absent.
pub fn unwrap_tool_content(content: &str) -> &str {
    content
        .strip_prefix("<tool_output>")
        .and_then(|rest| rest.strip_suffix("</tool_output>"))
        .unwrap_or(content)
}

/// The variants of a case that survived detector validation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidatedCase {
    pub aligned_ok: Vec<String>,
    pub conflict_ok: Vec<(String, ConflictType)>,
}

fn contradicts<D: RelationDetector + ?Sized>(detector: &D, a: &str, b: &str) -> Result<bool> {
    Ok(detector.detect(a, b)? == Relation::Contradiction
        || detector.detect(b, a)? == Relation::Contradiction)
}

/// Filters a case's variants with the detector: an aligned variant is kept
/// iff it contradicts neither the seed nor any previously kept aligned
/// variant; a conflict variant is kept iff it contradicts the seed. Dropped
/// variants are logged with the reason.
pub fn validate_case<D: RelationDetector + ?Sized>(
    case: &SeedCase,
    detector: &D,
) -> Result<ValidatedCase> {
    case.validate()?;
    let mut validated = ValidatedCase::default();
    'aligned: for variant in &case.aligned_variants {
        if contradicts(detector, variant, &case.seed_instruction)? {
            log::debug!("dropped aligned variant (contradicts the seed): {variant:?}");
            continue;
        }
        for kept in &validated.aligned_ok {
            if contradicts(detector, variant, kept)? {
                log::debug!(
                    "dropped aligned variant (contradicts retained variant {kept:?}): {variant:?}"
                );
                continue 'aligned;
            }
        }
        validated.aligned_ok.push(variant.clone());
    }
    for variant in &case.conflict_variants {
        if contradicts(detector, &variant.text, &case.seed_instruction)? {
            validated.conflict_ok.push((variant.text.clone(), variant.conflict_type));
        } else {
            log::debug!(
                "dropped conflict variant (no contradiction with the seed): {:?}",
                variant.text
            );
        }
    }
    Ok(validated)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the per-case assignment seed from the corpus seed and the case's
/// position, so corpora are reproducible while cases stay decorrelated.
pub fn case_assignment_seed(corpus_seed: u64, case_index: usize) -> u64 {
    splitmix64(corpus_seed ^ splitmix64(case_index as u64))
}

/// Deals a validated case onto the three authority levels and assembles the
/// training record.
///
/// The seed instruction always speaks as the user. A case with at least one
/// surviving conflict variant becomes a conflict record driven by the first
/// such variant: for `system_over_user` the variant becomes the system
/// message; for `system_over_tool` it lands at the tool level and the first
/// surviving aligned variant is promoted to the system message so the
/// overriding level has content; for `user_over_tool` it lands at the tool
/// level. Remaining aligned variants are assigned to levels pseudo-randomly
/// from `assignment_seed`. Tool-level content is wrapped in `<tool_output>`
/// tags, an empty system slot receives [`DEFAULT_SYSTEM_PROMPT`], and the
/// accepted response becomes the assistant message. Aligned records draw
/// their rejected response from the held-out pool when one is available.
pub fn assemble_record(
    case: &SeedCase,
    validated: &ValidatedCase,
    case_index: usize,
    assignment_seed: u64,
    pool: Option<&HeldOutPool>,
) -> TrainingRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(assignment_seed);
    let mut system_texts: Vec<&str> = Vec::new();
    let mut user_texts: Vec<&str> = vec![&case.seed_instruction];
    let mut tool_texts: Vec<&str> = Vec::new();
    let mut aligned: VecDeque<&str> =
        validated.aligned_ok.iter().map(String::as_str).collect();

    let primary_conflict = validated.conflict_ok.first();
    if let Some((text, conflict_type)) = primary_conflict {
        match conflict_type {
            ConflictType::SystemOverUser => system_texts.push(text),
            ConflictType::SystemOverTool => {
                tool_texts.push(text);
                if let Some(promoted) = aligned.pop_front() {
                    system_texts.push(promoted);
                }
            }
            ConflictType::UserOverTool => tool_texts.push(text),
        }
    }
    for text in aligned {
        match rng.random_range(0..3) {
            0 => system_texts.push(text),
            1 => user_texts.push(text),
            _ => tool_texts.push(text),
        }
    }
    if system_texts.is_empty() {
        system_texts.push(DEFAULT_SYSTEM_PROMPT);
    }

    let mut messages = vec![
        RecordMessage { role: Role::System, content: system_texts.join(" ") },
        RecordMessage { role: Role::User, content: user_texts.join(" ") },
    ];
    let has_tool = !tool_texts.is_empty();
    if has_tool {
        messages.push(RecordMessage {
            role: Role::Tool,
            content: wrap_tool_content(&tool_texts.join(" ")),
        });
    }
    messages.push(RecordMessage {
        role: Role::Assistant,
        content: case.accepted_response.clone(),
    });

    let is_conflict = primary_conflict.is_some();
    let rejected_response = if is_conflict {
        Some(case.rejected_response.clone())
    } else {
        match pool {
            Some(pool) if !pool.entries.is_empty() => {
                let pick = rng.random_range(0..pool.entries.len());
                Some(pool.entries[pick].response.clone())
            }
            _ => Some(case.rejected_response.clone()),
        }
    };

    let record = TrainingRecord {
        id: format!(
            "{}_sample_{case_index}",
            if is_conflict { "conflict" } else { "aligned" }
        ),
        messages,
        rejected_response,
        training_metadata: TrainingMetadata {
            hierarchy_weight: if is_conflict { 2.0 } else { 1.0 },
            is_conflict,
            has_tool,
            conflict_type: primary_conflict.map(|(_, t)| *t),
            conflict_matrix: AUTHORITY_MATRIX,
        },
    };
    debug_assert!(record.validate().is_ok());
    record
}

/// Per-corpus record counts by kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub n_conflict: usize,
    pub n_aligned: usize,
}

/// Validates and assembles every case in input order, writing one JSONL
/// record per case to `records_out` and, when given, one record id per line
/// to `manifest_out`. Both sinks are flushed after every case so an aborted
/// run leaves a usable prefix plus a manifest of what it covered.
pub fn build_corpus<D: RelationDetector + ?Sized, W: Write>(
    cases: &[SeedCase],
    detector: &D,
    corpus_seed: u64,
    pool: Option<&HeldOutPool>,
    records_out: &mut W,
    mut manifest_out: Option<&mut dyn Write>,
) -> Result<CorpusSummary> {
    let mut summary = CorpusSummary::default();
    for (case_index, case) in cases.iter().enumerate() {
        let validated = validate_case(case, detector)?;
        let record = assemble_record(
            case,
            &validated,
            case_index,
            case_assignment_seed(corpus_seed, case_index),
            pool,
        );
        if record.training_metadata.is_conflict {
            summary.n_conflict += 1;
        } else {
            summary.n_aligned += 1;
        }
        writeln!(records_out, "{}", record.to_json_line()?)?;
        records_out.flush()?;
        if let Some(manifest) = manifest_out.as_deref_mut() {
            writeln!(manifest, "{}", record.id)?;
            manifest.flush()?;
        }
    }
    Ok(summary)
}
