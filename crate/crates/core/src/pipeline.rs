//! End-to-end orchestration: atomize → conflict scan → solve → refine.
//!
//! The bundle returned by [`resolve_context`] carries every intermediate
//! product so callers can inspect (or re-verify) each stage. With a
//! deterministic detector the whole pipeline is a pure function of the
//! input context and configuration.

use serde::{Deserialize, Serialize};

use crate::atomizer::{atomize, AtomizerRules};
use crate::conflict::{build_conflict_matrix, ConflictMatrix, DetectorSpec, RelationDetector};
use crate::context::{AtomicInstruction, Context, HierarchyConfig};
use crate::error::Result;
use crate::refiner::{refine, RefinedContext};
use crate::solver::{solve, Resolution};

/// Every stage's output for one resolved context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolveBundle {
    pub atoms: Vec<AtomicInstruction>,
    pub matrix: ConflictMatrix,
    pub resolution: Resolution,
    pub refined: RefinedContext,
}

/// Runs the full pipeline over a raw context.
pub fn resolve_context(
    context: &Context,
    rules: &AtomizerRules,
    hierarchy: &HierarchyConfig,
    detector: &dyn RelationDetector,
    spec: &DetectorSpec,
) -> Result<ResolveBundle> {
    let atoms = atomize(context, rules, hierarchy)?;
    let matrix = build_conflict_matrix(detector, &atoms, spec)?;
    let resolution = solve(&atoms, &matrix, hierarchy)?;
    let refined = refine(&atoms, &resolution, &matrix)?;
    Ok(ResolveBundle { atoms, matrix, resolution, refined })
}

/// Human-readable rendering of a bundle (the `--format text` shape).
pub fn render_bundle_text(bundle: &ResolveBundle) -> String {
    let mut out = String::new();
    out.push_str("Instructions:\n");
    for atom in &bundle.atoms {
        out.push_str(&format!(
            "  [{}] level {} {} {}: {}\n",
            atom.id,
            atom.authority.level(),
            atom.source_role,
            match atom.kind {
                crate::context::InstructionKind::Imperative => "imperative",
                crate::context::InstructionKind::Declarative => "declarative",
            },
            atom.content
        ));
    }
    out.push_str("Conflicts:\n");
    let pairs = bundle.matrix.conflict_pairs();
    if pairs.is_empty() {
        out.push_str("  none\n");
    }
    for (i, j) in pairs {
        out.push_str(&format!("  ({i}, {j})\n"));
    }
    let ids = |list: &[usize]| {
        list.iter().map(|id| id.to_string()).collect::<Vec<_>>().join(", ")
    };
    out.push_str(&format!("Selected: {}\n", ids(&bundle.resolution.selected)));
    out.push_str(&format!("Rejected: {}\n", ids(&bundle.resolution.rejected)));
    out.push_str(&format!("Objective: {:?}\n", bundle.resolution.objective.counts()));
    out.push_str(&format!(
        "Tie broken: {}\n",
        if bundle.resolution.tie_broken { "yes" } else { "no" }
    ));
    out.push('\n');
    out.push_str(&bundle.refined.rendered);
    out
}
