//! Pairwise conflict detection over atomic instructions.
//!
//! A scan queries a relation detector for ordered pairs of instructions and
//! records a Boolean conflict matrix: `entries[i][j] = entries[j][i] = true`
//! iff either direction of the pair classifies as Contradiction. Entailment
//! and Neutral never register a conflict — registration is deliberately
//! conservative, since a spurious conflict merely drops a lower-authority
//! instruction while a missed one would let contradictory instructions
//! coexist downstream.
//!
//! Detector failures abort the scan. Defaulting a failed query to Neutral
//! would silently produce an empty matrix and select contradictory
//! instructions together — a safety inversion, so it is never done.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::context::AtomicInstruction;
use crate::error::{Error, Result};
use crate::rules;

/// Semantic relation between an ordered pair of instruction texts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Entailment,
    Neutral,
    Contradiction,
}

/// Which instruction pairs a scan queries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanScope {
    /// Only pairs whose instructions sit at different authority levels.
    CrossLevelOnly,
    /// Every pair, including same-level ones. The solver handles intra-level
    /// conflicts via tie-breaking, so scanning them is the safer default.
    #[default]
    AllPairs,
}

/// Detector backend selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    RuleBased,
    External,
}

/// Upper bound on scan worker threads.
pub const MAX_PARALLELISM: usize = 64;

/// How a conflict scan runs: backend, worker count, and pair scope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSpec {
    pub backend: BackendKind,
    pub parallelism: usize,
    pub scan_scope: ScanScope,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec {
            backend: BackendKind::RuleBased,
            parallelism: 1,
            scan_scope: ScanScope::AllPairs,
        }
    }
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.parallelism == 0 || self.parallelism > MAX_PARALLELISM {
            return Err(Error::Config(format!(
                "parallelism must be in 1..={MAX_PARALLELISM}, got {}",
                self.parallelism
            )));
        }
        Ok(())
    }
}

/// A pluggable pairwise relation classifier over instruction texts.
///
/// Implementations must be consistent within one scan: identical inputs must
/// yield identical relations, or the matrix would depend on query order.
pub trait RelationDetector: Sync {
    fn detect(&self, premise: &str, hypothesis: &str) -> Result<Relation>;
}

/// Classifies one ordered instruction pair with the given detector.
pub fn detect_relation(
    detector: &dyn RelationDetector,
    premise: &AtomicInstruction,
    hypothesis: &AtomicInstruction,
) -> Result<Relation> {
    detector.detect(&premise.content, &hypothesis.content)
}

/// Deterministic pattern-table detector; see [`rules::rule_based_detect`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBasedDetector;

impl RelationDetector for RuleBasedDetector {
    fn detect(&self, premise: &str, hypothesis: &str) -> Result<Relation> {
        Ok(rules::rule_based_detect(premise, hypothesis))
    }
}

/// N×N Boolean incompatibility relation plus the per-pair relation labels
/// that produced it (audit trail).
///
/// Wire shape: `{"n": N, "conflicts": [[i,j], ...], "relations": {"i,j":
/// "contradiction", ...}}` where `conflicts` lists unordered pairs (i < j)
/// and `relations` records every queried ordered pair whose label was not
/// Neutral (absent pairs read back as Neutral).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictMatrix {
    n: usize,
    entries: Vec<bool>,
    relations: Vec<Relation>,
}

impl ConflictMatrix {
    pub fn empty(n: usize) -> Self {
        ConflictMatrix {
            n,
            entries: vec![false; n * n],
            relations: vec![Relation::Neutral; n * n],
        }
    }

    /// Builds a matrix directly from unordered conflict pairs, recording
    /// Contradiction for both directions of each pair.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut matrix = ConflictMatrix::empty(n);
        for &(i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!(
                    "conflict pair ({i},{j}) out of range for n={n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidInput(format!(
                    "conflict pair ({i},{j}) references the diagonal"
                )));
            }
            matrix.record(i, j, Relation::Contradiction);
        }
        Ok(matrix)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn conflict(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.n + j]
    }

    pub fn relation(&self, i: usize, j: usize) -> Relation {
        self.relations[i * self.n + j]
    }

    /// Unordered conflict pairs (i < j), ascending.
    pub fn conflict_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.conflict(i, j) {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    /// Ids of all instructions in conflict with `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.conflict(i, j)).collect()
    }

    /// Records the relation for ordered pair (i, j); a Contradiction marks
    /// the unordered conflict in both directions.
    fn record(&mut self, i: usize, j: usize, relation: Relation) {
        self.relations[i * self.n + j] = relation;
        if relation == Relation::Contradiction {
            self.entries[i * self.n + j] = true;
            self.entries[j * self.n + i] = true;
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ConflictMatrixWire {
    n: usize,
    conflicts: Vec<(usize, usize)>,
    #[serde(default)]
    relations: BTreeMap<String, Relation>,
}

impl Serialize for ConflictMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut relations = BTreeMap::new();
        for i in 0..self.n {
            for j in 0..self.n {
                let relation = self.relation(i, j);
                if i != j && relation != Relation::Neutral {
                    relations.insert(format!("{i},{j}"), relation);
                }
            }
        }
        ConflictMatrixWire { n: self.n, conflicts: self.conflict_pairs(), relations }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ConflictMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = ConflictMatrixWire::deserialize(deserializer)?;
        let mut matrix =
            ConflictMatrix::from_pairs(wire.n, &wire.conflicts).map_err(D::Error::custom)?;
        for (key, relation) in wire.relations {
            let (i, j) = parse_pair_key(&key).map_err(D::Error::custom)?;
            if i >= wire.n || j >= wire.n {
                return Err(D::Error::custom(format!(
                    "relation key {key:?} out of range for n={}",
                    wire.n
                )));
            }
            matrix.record(i, j, relation);
        }
        Ok(matrix)
    }
}

fn parse_pair_key(key: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidInput(format!("relation key {key:?} is not \"i,j\""));
    let (i, j) = key.split_once(',').ok_or_else(bad)?;
    Ok((
        i.trim().parse().map_err(|_| bad())?,
        j.trim().parse().map_err(|_| bad())?,
    ))
}

/// Scans all instruction pairs per `spec` and assembles the conflict matrix.
///
/// Both directions of every in-scope pair are queried. Results land in the
/// matrix by pair index, so worker completion order never affects the output.
/// Any detector error aborts the scan (the error for the earliest pair in
/// scan order is returned).
pub fn build_conflict_matrix(
    detector: &dyn RelationDetector,
    atoms: &[AtomicInstruction],
    spec: &DetectorSpec,
) -> Result<ConflictMatrix> {
    spec.validate()?;
    let n = atoms.len();
    let mut matrix = ConflictMatrix::empty(n);

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if spec.scan_scope == ScanScope::CrossLevelOnly
                && atoms[i].authority == atoms[j].authority
            {
                continue;
            }
            pairs.push((i, j));
        }
    }

    let workers = spec.parallelism.min(pairs.len().max(1));
    let results: Vec<Result<(Relation, Relation)>> = if workers <= 1 {
        pairs
            .iter()
            .map(|&(i, j)| query_both(detector, atoms, i, j))
            .collect()
    } else {
        let chunk_size = pairs.len().div_ceil(workers);
        let chunks: Vec<&[(usize, usize)]> = pairs.chunks(chunk_size).collect();
        let mut collected: Vec<Vec<Result<(Relation, Relation)>>> = Vec::new();
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .iter()
                .map(|chunk| {
                    scope.spawn(move || {
                        chunk
                            .iter()
                            .map(|&(i, j)| query_both(detector, atoms, i, j))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for handle in handles {
                collected.push(handle.join().expect("scan worker panicked"));
            }
        });
        collected.into_iter().flatten().collect()
    };

    for (&(i, j), outcome) in pairs.iter().zip(results) {
        let (forward, backward) = outcome?;
        matrix.record(i, j, forward);
        matrix.record(j, i, backward);
    }
    Ok(matrix)
}

fn query_both(
    detector: &dyn RelationDetector,
    atoms: &[AtomicInstruction],
    i: usize,
    j: usize,
) -> Result<(Relation, Relation)> {
    Ok((
        detect_relation(detector, &atoms[i], &atoms[j])?,
        detect_relation(detector, &atoms[j], &atoms[i])?,
    ))
}
