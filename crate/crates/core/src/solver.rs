//! Exact lexicographic selection of a maximal conflict-free instruction set.
//!
//! Selecting instructions to maximize the weighted sum Σ Bᴷ⁻ᴬ⁽ⁱ⁾·zᵢ (base B
//! larger than the instruction count) under the hard constraint that no
//! conflict pair is fully selected is equivalent to maximizing the per-level
//! selection counts in lexicographic order from the highest-authority level
//! down — a positional-numeral argument, checked in tests against explicit
//! big-integer weighted sums. The solver works directly on that count vector,
//! which keeps arithmetic small and exact regardless of depth.
//!
//! [`solve`] runs branch-and-bound over the conflict graph (per connected
//! component, vertices in id order, include-branch first) and never prunes a
//! branch whose optimistic bound ties the incumbent, so every co-optimal
//! selection is visited: ties are detected exactly, and the incumbent is the
//! tie-break-preferred selection because include-first visitation order is
//! exactly "prefer keeping lower ids". [`brute_force_solve`] enumerates all
//! 2^N assignments and is the oracle the solver is tested against.

use serde::{Deserialize, Serialize};

use crate::conflict::ConflictMatrix;
use crate::context::{AtomicInstruction, HierarchyConfig, TieBreak};
use crate::error::{Error, Result};

/// Per-authority-level selected-instruction counts; `counts[k]` is the
/// number of selected instructions at level k.
///
/// Ordering is lexicographic from level 0 (highest authority) upward, which
/// coincides with comparing Σ Bᴷ⁻ᵏ·counts[k] for any base B exceeding the
/// instruction count. Only vectors of equal length (same hierarchy depth)
/// are comparable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector {
    counts: Vec<u64>,
}

impl ObjectiveVector {
    /// The all-zero vector over levels 0..=depth.
    pub fn zero(depth: u8) -> Self {
        ObjectiveVector { counts: vec![0; depth as usize + 1] }
    }

    /// Counts the given authority levels into a vector over 0..=depth.
    pub fn from_levels(levels: impl IntoIterator<Item = u8>, depth: u8) -> Self {
        let mut v = ObjectiveVector::zero(depth);
        for level in levels {
            v.counts[level as usize] += 1;
        }
        v
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Σ counts[k] · base^(K−k) with K = depth — the explicit big-integer
    /// objective this vector's ordering stands in for.
    ///
    /// Panics on u128 overflow; callers keep base and depth desk-scale.
    pub fn weighted_sum(&self, base: u64) -> u128 {
        let k = self.counts.len() - 1;
        self.counts.iter().enumerate().fold(0u128, |acc, (level, &count)| {
            let weight = (base as u128)
                .checked_pow((k - level) as u32)
                .expect("weight overflows u128");
            acc.checked_add((count as u128).checked_mul(weight).expect("term overflows u128"))
                .expect("sum overflows u128")
        })
    }
}

/// Outcome of one solve: the partition of instruction ids, the achieved
/// objective, and search statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    /// Selected instruction ids, ascending.
    pub selected: Vec<usize>,
    /// Rejected instruction ids, ascending.
    pub rejected: Vec<usize>,
    pub objective: ObjectiveVector,
    /// True when the search ran to completion (always, for these exact
    /// solvers — there is no timeout budget).
    pub optimal: bool,
    /// Search-tree nodes visited (assignments evaluated, for the oracle).
    pub nodes_explored: u64,
    /// True when two or more distinct selections achieve the optimum and
    /// the tie-break rule chose among them.
    pub tie_broken: bool,
}

/// Exhaustive-enumeration cutoff for [`brute_force_solve`].
pub const BRUTE_FORCE_LIMIT: usize = 20;

fn validate(atoms: &[AtomicInstruction], matrix: &ConflictMatrix, config: &HierarchyConfig) -> Result<()> {
    if matrix.n() != atoms.len() {
        return Err(Error::MatrixShapeMismatch { matrix_n: matrix.n(), atom_count: atoms.len() });
    }
    for atom in atoms {
        if atom.authority.0 > config.depth {
            return Err(Error::LevelOutOfRange { level: atom.authority.0, depth: config.depth });
        }
    }
    let mut ids: Vec<usize> = atoms.iter().map(|a| a.id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("duplicate instruction ids".into()));
    }
    // The only tie-break rule; matching here keeps the enum honest if one
    // is ever added.
    let TieBreak::LowestIndexFirst = config.tie_break;
    Ok(())
}

fn finish(
    atoms: &[AtomicInstruction],
    matrix: &ConflictMatrix,
    config: &HierarchyConfig,
    selected_positions: &[bool],
    nodes_explored: u64,
    tie_broken: bool,
) -> Resolution {
    let mut selected = Vec::new();
    let mut rejected = Vec::new();
    for (pos, atom) in atoms.iter().enumerate() {
        if selected_positions[pos] {
            selected.push(atom.id);
        } else {
            rejected.push(atom.id);
        }
    }
    selected.sort_unstable();
    rejected.sort_unstable();
    let objective = ObjectiveVector::from_levels(
        atoms.iter().enumerate().filter(|(p, _)| selected_positions[*p]).map(|(_, a)| a.authority.0),
        config.depth,
    );

    // Hard constraint: no conflict pair fully selected.
    debug_assert!(
        (0..atoms.len()).all(|i| {
            (0..atoms.len())
                .all(|j| !(matrix.conflict(i, j) && selected_positions[i] && selected_positions[j]))
        }),
        "selection violates a conflict pair"
    );
    // Maximality: every rejected instruction conflicts with something
    // selected, otherwise adding it would strictly improve the objective.
    debug_assert!(
        (0..atoms.len()).filter(|&p| !selected_positions[p]).all(|p| {
            (0..atoms.len()).any(|j| selected_positions[j] && matrix.conflict(p, j))
        }),
        "a rejected instruction conflicts with nothing selected"
    );

    Resolution { selected, rejected, objective, optimal: true, nodes_explored, tie_broken }
}

/// Branch-and-bound state for one connected component of the conflict graph.
struct ComponentSearch<'a> {
    /// Component vertices as atom positions, ascending by atom id.
    vertices: &'a [usize],
    /// Neighbor lists as local indices into `vertices`.
    adjacency: &'a [Vec<usize>],
    /// Authority level per local vertex.
    levels: &'a [usize],
    state: Vec<VertexState>,
    /// Selected count per authority level among decided vertices.
    current: Vec<u64>,
    /// Count per level of still-undecided vertices (the optimistic slack).
    remaining: Vec<u64>,
    membership: Vec<bool>,
    best: Option<(ObjectiveVector, Vec<bool>)>,
    tie: bool,
    nodes: u64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum VertexState {
    Undecided,
    Included,
    Excluded,
}

impl ComponentSearch<'_> {
    /// True when current + remaining is lexicographically below `best` —
    /// nothing beneath this node can tie the incumbent.
    fn strictly_worse_than_best(&self) -> bool {
        let Some((best, _)) = &self.best else { return false };
        for (level, best_count) in best.counts().iter().enumerate() {
            let bound = self.current[level] + self.remaining[level];
            if bound != *best_count {
                return bound < *best_count;
            }
        }
        false
    }

    fn search(&mut self, k: usize) {
        self.nodes += 1;
        if k == self.vertices.len() {
            let candidate = ObjectiveVector { counts: self.current.clone() };
            match &self.best {
                Some((best, _)) if candidate < *best => {}
                Some((best, _)) if candidate == *best => {
                    // A later leaf is membership-lexicographically smaller
                    // than the incumbent (include-first, id-order DFS), so
                    // the incumbent stays.
                    self.tie = true;
                }
                _ => {
                    self.best = Some((candidate, self.membership.clone()));
                    self.tie = false;
                }
            }
            return;
        }
        if self.strictly_worse_than_best() {
            return;
        }
        if self.state[k] == VertexState::Excluded {
            return self.search(k + 1);
        }

        let level = self.levels[k];
        self.remaining[level] -= 1;

        // Include branch first: visits selections in "prefer lower ids" order.
        self.state[k] = VertexState::Included;
        self.membership[k] = true;
        self.current[level] += 1;
        let mut forced = Vec::new();
        for &n in &self.adjacency[k] {
            if self.state[n] == VertexState::Undecided {
                self.state[n] = VertexState::Excluded;
                self.remaining[self.levels[n]] -= 1;
                forced.push(n);
            }
        }
        self.search(k + 1);
        for n in forced {
            self.state[n] = VertexState::Undecided;
            self.remaining[self.levels[n]] += 1;
        }
        self.current[level] -= 1;
        self.membership[k] = false;

        self.state[k] = VertexState::Excluded;
        self.search(k + 1);

        self.state[k] = VertexState::Undecided;
        self.remaining[level] += 1;
    }
}

/// Returns the lexicographically optimal conflict-free selection.
///
/// Deterministic: among co-optimal selections the one keeping the
/// lowest-id instructions is returned (at the smallest id where two
/// co-optima differ, the returned one selects it) and `tie_broken` is set.
pub fn solve(
    atoms: &[AtomicInstruction],
    matrix: &ConflictMatrix,
    config: &HierarchyConfig,
) -> Result<Resolution> {
    validate(atoms, matrix, config)?;
    let n = atoms.len();

    // Connected components of the conflict graph; each optimizes
    // independently because the objective is a sum of per-component count
    // vectors and lexicographic order is translation-invariant.
    let mut component_of = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by_key(|&p| atoms[p].id);
    for &start in &order {
        if component_of[start] != usize::MAX {
            continue;
        }
        let label = components.len();
        let mut members = vec![start];
        component_of[start] = label;
        let mut frontier = vec![start];
        while let Some(v) = frontier.pop() {
            for u in matrix.neighbors(v) {
                if component_of[u] == usize::MAX {
                    component_of[u] = label;
                    members.push(u);
                    frontier.push(u);
                }
            }
        }
        members.sort_unstable_by_key(|&p| atoms[p].id);
        components.push(members);
    }

    let mut selected_positions = vec![false; n];
    let mut nodes_explored = 0;
    let mut tie_broken = false;
    for vertices in &components {
        let local_index = |p: usize| vertices.iter().position(|&v| v == p).unwrap();
        let adjacency: Vec<Vec<usize>> = vertices
            .iter()
            .map(|&v| matrix.neighbors(v).into_iter().map(local_index).collect())
            .collect();
        let levels: Vec<usize> =
            vertices.iter().map(|&v| atoms[v].authority.0 as usize).collect();
        let mut remaining = vec![0u64; config.depth as usize + 1];
        for &level in &levels {
            remaining[level] += 1;
        }
        let mut search = ComponentSearch {
            vertices,
            adjacency: &adjacency,
            levels: &levels,
            state: vec![VertexState::Undecided; vertices.len()],
            current: vec![0; config.depth as usize + 1],
            remaining,
            membership: vec![false; vertices.len()],
            best: None,
            tie: false,
            nodes: 0,
        };
        search.search(0);
        let (_, membership) = search.best.expect("component search found no leaf");
        for (local, &position) in vertices.iter().enumerate() {
            selected_positions[position] = membership[local];
        }
        nodes_explored += search.nodes;
        tie_broken |= search.tie;
    }

    Ok(finish(atoms, matrix, config, &selected_positions, nodes_explored, tie_broken))
}

/// Enumerates all 2^N assignments — ground truth for testing [`solve`].
pub fn brute_force_solve(
    atoms: &[AtomicInstruction],
    matrix: &ConflictMatrix,
    config: &HierarchyConfig,
) -> Result<Resolution> {
    validate(atoms, matrix, config)?;
    let n = atoms.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { n, limit: BRUTE_FORCE_LIMIT });
    }

    // conflicting[p]: bitmask over positions conflicting with p.
    let conflicting: Vec<u32> = (0..n)
        .map(|p| matrix.neighbors(p).into_iter().fold(0u32, |m, q| m | (1 << q)))
        .collect();
    // Rank positions by atom id so the tie key prefers keeping low ids.
    let mut by_id: Vec<usize> = (0..n).collect();
    by_id.sort_unstable_by_key(|&p| atoms[p].id);
    let mut rank = vec![0usize; n];
    for (r, &p) in by_id.iter().enumerate() {
        rank[p] = r;
    }
    // Higher key = keeps a lower id at the first id where two masks differ.
    let tie_key = |mask: u32| -> u32 {
        (0..n).filter(|&p| mask & (1 << p) != 0).fold(0, |k, p| k | (1 << (n - 1 - rank[p])))
    };

    let mut best_mask = 0u32;
    let mut best_objective = ObjectiveVector::zero(config.depth);
    let mut optima = 0u64;
    for mask in 0..(1u32 << n) {
        let feasible = (0..n).all(|p| mask & (1 << p) == 0 || conflicting[p] & mask == 0);
        if !feasible {
            continue;
        }
        let objective = ObjectiveVector::from_levels(
            (0..n).filter(|&p| mask & (1 << p) != 0).map(|p| atoms[p].authority.0),
            config.depth,
        );
        match objective.cmp(&best_objective) {
            std::cmp::Ordering::Greater => {
                best_objective = objective;
                best_mask = mask;
                optima = 1;
            }
            std::cmp::Ordering::Equal => {
                optima += 1;
                if tie_key(mask) > tie_key(best_mask) {
                    best_mask = mask;
                }
            }
            std::cmp::Ordering::Less => {}
        }
    }

    let selected_positions: Vec<bool> = (0..n).map(|p| best_mask & (1 << p) != 0).collect();
    Ok(finish(atoms, matrix, config, &selected_positions, 1 << n, optima >= 2))
}
