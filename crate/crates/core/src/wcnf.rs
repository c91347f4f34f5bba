//! Weighted-CNF export of the selection problem, for cross-checking against
//! external MaxSAT solvers.
//!
//! The emitted text is the classic weighted DIMACS shape: a header
//! `p wcnf <nvars> <nclauses> <top>`, one soft unit clause per instruction
//! whose weight is Bᴷ⁻ᴬ⁽ⁱ⁾ (base B strictly greater than the instruction
//! count, so one instruction at some level outweighs every instruction below
//! it combined), and one hard clause `¬i ∨ ¬j` per conflict pair. `top` is
//! one more than the total soft weight, the conventional "unsatisfiable"
//! marker weight for hard clauses.
//!
//! [`parse_weighted_cnf`] reads that format back and
//! [`WcnfInstance::exhaustive_best`] solves small parsed instances by
//! enumeration, so tests can verify the encoding end-to-end: optimizing the
//! emitted formula must reproduce the solver's selection exactly.

use crate::conflict::ConflictMatrix;
use crate::context::{AtomicInstruction, HierarchyConfig};
use crate::error::{Error, Result};
use crate::solver::BRUTE_FORCE_LIMIT;

/// Soft-clause weight for one instruction: base^(depth − level).
pub fn soft_weight(base: u64, depth: u8, level: u8) -> u128 {
    (base as u128)
        .checked_pow((depth - level) as u32)
        .expect("soft weight overflows u128")
}

/// Renders the selection problem as weighted-CNF text.
///
/// Variable v (1-based) corresponds to `atoms[v-1]`; setting it true means
/// selecting that instruction.
pub fn to_weighted_cnf(
    atoms: &[AtomicInstruction],
    matrix: &ConflictMatrix,
    config: &HierarchyConfig,
    base: u64,
) -> Result<String> {
    if matrix.n() != atoms.len() {
        return Err(Error::MatrixShapeMismatch { matrix_n: matrix.n(), atom_count: atoms.len() });
    }
    if base as usize <= atoms.len() {
        return Err(Error::BaseTooSmall { base, n: atoms.len() });
    }
    for atom in atoms {
        if atom.authority.0 > config.depth {
            return Err(Error::LevelOutOfRange { level: atom.authority.0, depth: config.depth });
        }
    }

    let weights: Vec<u128> =
        atoms.iter().map(|a| soft_weight(base, config.depth, a.authority.0)).collect();
    let top = weights
        .iter()
        .try_fold(0u128, |acc, w| acc.checked_add(*w))
        .and_then(|sum| sum.checked_add(1))
        .expect("top weight overflows u128");
    let hard = matrix.conflict_pairs();

    let mut out = String::new();
    out.push_str("c weighted-cnf export: soft unit clause per instruction, hard clause per conflict pair\n");
    out.push_str("c variable v corresponds to instruction index v-1\n");
    out.push_str(&format!(
        "p wcnf {} {} {top}\n",
        atoms.len(),
        atoms.len() + hard.len()
    ));
    for (index, weight) in weights.iter().enumerate() {
        out.push_str(&format!("{weight} {} 0\n", index + 1));
    }
    for (i, j) in hard {
        out.push_str(&format!("{top} -{} -{} 0\n", i + 1, j + 1));
    }
    Ok(out)
}

/// A parsed weighted-CNF formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WcnfInstance {
    pub nvars: usize,
    pub top: u128,
    /// (weight, literals) for clauses with weight < top.
    pub soft: Vec<(u128, Vec<i64>)>,
    /// Literals of mandatory clauses (weight = top).
    pub hard: Vec<Vec<i64>>,
}

/// Parses weighted-CNF text (comment lines skipped, declared clause count
/// enforced).
pub fn parse_weighted_cnf(text: &str) -> Result<WcnfInstance> {
    let bad = |line: &str, why: &str| Error::InvalidInput(format!("bad wcnf line {line:?}: {why}"));
    let mut header: Option<(usize, usize, u128)> = None;
    let mut soft = Vec::new();
    let mut hard = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("p wcnf") {
            if header.is_some() {
                return Err(bad(line, "duplicate header"));
            }
            let fields: Vec<&str> = rest.split_whitespace().collect();
            let [nvars, nclauses, top] = fields[..] else {
                return Err(bad(line, "header needs nvars nclauses top"));
            };
            header = Some((
                nvars.parse().map_err(|_| bad(line, "nvars"))?,
                nclauses.parse().map_err(|_| bad(line, "nclauses"))?,
                top.parse().map_err(|_| bad(line, "top"))?,
            ));
            continue;
        }
        let Some((nvars, _, top)) = header else {
            return Err(bad(line, "clause before header"));
        };
        let mut tokens = line.split_whitespace();
        let weight: u128 = tokens
            .next()
            .ok_or_else(|| bad(line, "empty clause"))?
            .parse()
            .map_err(|_| bad(line, "weight"))?;
        let mut literals = Vec::new();
        let mut terminated = false;
        for token in tokens {
            let literal: i64 = token.parse().map_err(|_| bad(line, "literal"))?;
            if literal == 0 {
                terminated = true;
                break;
            }
            if literal.unsigned_abs() as usize > nvars {
                return Err(bad(line, "literal out of range"));
            }
            literals.push(literal);
        }
        if !terminated {
            return Err(bad(line, "missing terminating 0"));
        }
        if weight >= top {
            hard.push(literals);
        } else {
            soft.push((weight, literals));
        }
    }
    let Some((nvars, nclauses, top)) = header else {
        return Err(Error::InvalidInput("wcnf text has no header".into()));
    };
    if soft.len() + hard.len() != nclauses {
        return Err(Error::InvalidInput(format!(
            "wcnf declares {nclauses} clauses but contains {}",
            soft.len() + hard.len()
        )));
    }
    Ok(WcnfInstance { nvars, top, soft, hard })
}

impl WcnfInstance {
    /// Maximum satisfiable soft weight over all assignments meeting the hard
    /// clauses, by exhaustive enumeration; ties prefer the assignment that
    /// sets the lowest differing variable true (the solver's tie-break).
    ///
    /// Returns the winning assignment (indexed by variable − 1) and its
    /// satisfied soft weight.
    pub fn exhaustive_best(&self) -> Result<(Vec<bool>, u128)> {
        if self.nvars > BRUTE_FORCE_LIMIT {
            return Err(Error::TooLarge { n: self.nvars, limit: BRUTE_FORCE_LIMIT });
        }
        let satisfied = |clause: &[i64], mask: u32| {
            clause.iter().any(|&lit| {
                let var = lit.unsigned_abs() as usize - 1;
                (mask & (1 << var) != 0) == (lit > 0)
            })
        };
        let tie_key =
            |mask: u32| (0..self.nvars).fold(0u32, |k, v| k | (((mask >> v) & 1) << (self.nvars - 1 - v)));

        let mut best: Option<(u128, u32)> = None;
        for mask in 0..(1u32 << self.nvars) {
            if !self.hard.iter().all(|clause| satisfied(clause, mask)) {
                continue;
            }
            let weight: u128 = self
                .soft
                .iter()
                .filter(|(_, clause)| satisfied(clause, mask))
                .map(|(w, _)| *w)
                .sum();
            best = match best {
                None => Some((weight, mask)),
                Some((bw, _)) if weight > bw => Some((weight, mask)),
                Some((bw, bm)) if weight == bw && tie_key(mask) > tie_key(bm) => {
                    Some((weight, mask))
                }
                keep => keep,
            };
        }
        let (weight, mask) = best.ok_or_else(|| {
            Error::InvalidInput("hard clauses are unsatisfiable".into())
        })?;
        Ok(((0..self.nvars).map(|v| mask & (1 << v) != 0).collect(), weight))
    }
}
