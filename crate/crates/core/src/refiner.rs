//! Rendering a solved instruction set into a refined context.
//!
//! The refined context carries the selected instructions grouped by
//! authority level, an explicit notice for every rejected instruction naming
//! what overruled it, and a deterministic three-section text rendering:
//!
//! ```text
//! ## Active Instructions     one "- " bullet per selected instruction,
//!                            grouped under "[level k: name]" headings
//! ## Overruled               "<text> — overruled by: <text>" per rejection;
//!                            the whole section is omitted when nothing was
//!                            rejected
//! ## Context Data            selected declarative atoms, verbatim, id order
//! ```
//!
//! The struct itself serializes to JSON as the machine-readable twin of the
//! text rendering. `RENDER_FORMAT_VERSION` tracks the layout so downstream
//! consumers can detect changes.

use serde::{Deserialize, Serialize};

use crate::conflict::ConflictMatrix;
use crate::context::{AtomicInstruction, InstructionKind};
use crate::error::{Error, Result};
use crate::solver::Resolution;

/// Version of the rendered three-section layout.
pub const RENDER_FORMAT_VERSION: u32 = 1;

/// Why an instruction was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    /// A strictly higher-authority instruction conflicted with it.
    Overruled,
    /// A same-authority conflict was resolved by the deterministic
    /// tie-break rule.
    TieBreak,
}

/// One selected instruction with its authority level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveBlock {
    pub level: u8,
    pub text: String,
}

/// One rejected instruction paired with the selected instruction that
/// overruled it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionNotice {
    pub instruction: String,
    pub conflicting_with: String,
    pub reason: RejectionReason,
}

/// The refined context: structured fields plus their text rendering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedContext {
    pub format_version: u32,
    /// Selected instructions, ascending authority level, id order within a
    /// level.
    pub active_blocks: Vec<ActiveBlock>,
    /// One notice per rejected instruction, in rejected-id order.
    pub rejection_notices: Vec<RejectionNotice>,
    pub rendered: String,
}

fn level_label(level: u8) -> String {
    match level {
        0 => "level 0: system".to_string(),
        1 => "level 1: user".to_string(),
        2 => "level 2: context".to_string(),
        k => format!("level {k}"),
    }
}

/// Renders a resolution against its atoms and conflict matrix.
///
/// Each rejected instruction is paired with the highest-authority selected
/// instruction it conflicts with (lowest id on level ties). A rejected
/// instruction with no conflicting selected partner is impossible for an
/// optimal resolution and reports [`Error::InconsistentResolution`].
pub fn refine(
    atoms: &[AtomicInstruction],
    resolution: &Resolution,
    matrix: &ConflictMatrix,
) -> Result<RefinedContext> {
    if matrix.n() != atoms.len() {
        return Err(Error::MatrixShapeMismatch { matrix_n: matrix.n(), atom_count: atoms.len() });
    }
    let position_of = |id: usize| {
        atoms
            .iter()
            .position(|a| a.id == id)
            .ok_or_else(|| Error::InvalidInput(format!("resolution references unknown id {id}")))
    };
    if resolution.selected.len() + resolution.rejected.len() != atoms.len() {
        return Err(Error::InvalidInput(format!(
            "resolution covers {} ids but there are {} atoms",
            resolution.selected.len() + resolution.rejected.len(),
            atoms.len()
        )));
    }

    let mut selected: Vec<&AtomicInstruction> = Vec::new();
    for &id in &resolution.selected {
        selected.push(&atoms[position_of(id)?]);
    }
    // Ascending level, id order within a level (selected ids are ascending).
    selected.sort_by_key(|a| a.authority.0);
    let active_blocks: Vec<ActiveBlock> = selected
        .iter()
        .map(|a| ActiveBlock { level: a.authority.0, text: a.content.clone() })
        .collect();

    let mut rejection_notices = Vec::new();
    for &id in &resolution.rejected {
        let rejected = &atoms[position_of(id)?];
        let partner = resolution
            .selected
            .iter()
            .map(|&sid| position_of(sid))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|&spos| matrix.conflict(position_of(id).unwrap(), spos))
            .map(|spos| &atoms[spos])
            .min_by_key(|a| (a.authority.0, a.id))
            .ok_or(Error::InconsistentResolution { id })?;
        let reason = if partner.authority.0 < rejected.authority.0 {
            RejectionReason::Overruled
        } else {
            RejectionReason::TieBreak
        };
        rejection_notices.push(RejectionNotice {
            instruction: rejected.content.clone(),
            conflicting_with: partner.content.clone(),
            reason,
        });
    }

    let context_data: Vec<&AtomicInstruction> = {
        let mut declaratives: Vec<&AtomicInstruction> = selected
            .iter()
            .copied()
            .filter(|a| a.kind == InstructionKind::Declarative)
            .collect();
        declaratives.sort_by_key(|a| a.id);
        declaratives
    };

    let mut rendered = String::from("## Active Instructions\n");
    let mut current_level = None;
    for block in &active_blocks {
        if current_level != Some(block.level) {
            rendered.push_str(&format!("\n[{}]\n", level_label(block.level)));
            current_level = Some(block.level);
        }
        rendered.push_str(&format!("- {}\n", block.text));
    }
    if !rejection_notices.is_empty() {
        rendered.push_str("\n## Overruled\n\n");
        for notice in &rejection_notices {
            rendered.push_str(&format!(
                "{} — overruled by: {}\n",
                notice.instruction, notice.conflicting_with
            ));
        }
    }
    rendered.push_str("\n## Context Data\n");
    if !context_data.is_empty() {
        rendered.push('\n');
        for atom in &context_data {
            rendered.push_str(&atom.content);
            rendered.push('\n');
        }
    }

    Ok(RefinedContext {
        format_version: RENDER_FORMAT_VERSION,
        active_blocks,
        rejection_notices,
        rendered,
    })
}

/// Recovers the instruction texts from the Active Instructions section of a
/// rendering, in order. Lines that belong to a multi-line instruction are
/// rejoined with newlines.
pub fn parse_active_instructions(rendered: &str) -> Vec<String> {
    let mut texts: Vec<String> = Vec::new();
    let mut in_section = false;
    for line in rendered.lines() {
        if line.starts_with("## ") {
            in_section = line == "## Active Instructions";
            continue;
        }
        if !in_section || line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
            continue;
        }
        if let Some(text) = line.strip_prefix("- ") {
            texts.push(text.to_string());
        } else if let Some(last) = texts.last_mut() {
            last.push('\n');
            last.push_str(line);
        }
    }
    texts
}
