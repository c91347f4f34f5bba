//! Acceptance gate: one test per release criterion, each printing a
//! `acceptance: criterion N ... PASS` line on success (visible with
//! `cargo test --test acceptance -- --show-output`).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{RngExt as _, SeedableRng as _};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use hier_core::atomizer::{atomize, AtomizerRules};
use hier_core::conflict::{build_conflict_matrix, ConflictMatrix, DetectorSpec, RuleBasedDetector};
use hier_core::context::{AtomicInstruction, AuthorityLevel, Context, InstructionKind, Role};
use hier_core::dataset::{
    build_corpus, read_seed_cases, HeldOutPool, TrainingRecord, AUTHORITY_MATRIX,
};
use hier_core::loss::{grad_check, hcal, LossParams, PreferenceScores};
use hier_core::pipeline::resolve_context;
use hier_core::refiner::RejectionReason;
use hier_core::solver::{brute_force_solve, solve, ObjectiveVector};
use hier_core::verifier::{check, ConstraintKind};
use hier_core::context::HierarchyConfig;
use hier_core::wcnf::{parse_weighted_cnf, to_weighted_cnf};

fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn read_fixture(name: &str) -> String {
    let path = fixture_path(name);
    std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

fn atom(id: usize, level: u8) -> AtomicInstruction {
    AtomicInstruction {
        id,
        content: format!("instruction {id}"),
        authority: AuthorityLevel(level),
        source_role: match level {
            0 => Role::System,
            1 => Role::User,
            _ => Role::Tool,
        },
        source_turn: id,
        kind: InstructionKind::Imperative,
    }
}

/// Random instance: uniform levels 0..=2 and independent conflict edges.
fn random_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    density: f64,
) -> (Vec<AtomicInstruction>, ConflictMatrix) {
    let atoms: Vec<AtomicInstruction> =
        (0..n).map(|id| atom(id, rng.random_range(0..=2))).collect();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < density {
                pairs.push((i, j));
            }
        }
    }
    let matrix = ConflictMatrix::from_pairs(n, &pairs).expect("valid pairs");
    (atoms, matrix)
}

const DENSITIES: [f64; 3] = [0.1, 0.3, 0.6];

#[test]
fn criterion_01_solver_matches_exhaustive_oracle() {
    let start = Instant::now();
    let config = HierarchyConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0001);
    for n in 2..=12 {
        for i in 0..500 {
            let density = DENSITIES[i % DENSITIES.len()];
            let (atoms, matrix) = random_instance(&mut rng, n, density);
            let fast = solve(&atoms, &matrix, &config).expect("solve");
            let oracle = brute_force_solve(&atoms, &matrix, &config).expect("oracle");
            assert_eq!(
                fast.selected, oracle.selected,
                "divergence at n={n} density={density} instance={i}"
            );
            assert_eq!(fast.objective, oracle.objective);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "suite took {elapsed:?}, budget is 60s");
    println!("acceptance: criterion 1 (solver matches exhaustive oracle) ... PASS");
}

#[test]
fn criterion_02_demo_context_resolves_end_to_end() {
    let context = Context::from_json(&read_fixture("demo_context.json")).expect("fixture parses");
    let bundle = resolve_context(
        &context,
        AtomizerRules::builtin(),
        &HierarchyConfig::default(),
        &RuleBasedDetector,
        &DetectorSpec::default(),
    )
    .expect("pipeline");

    // Atom ids: 0-1 system (persona, JSON), 2 user task, 3 user plain-text,
    // 4 tool payload.
    assert_eq!(bundle.atoms.len(), 5);
    assert_eq!(bundle.resolution.selected, vec![0, 1, 2, 4]);
    assert_eq!(bundle.resolution.rejected, vec![3]);

    assert_eq!(bundle.refined.rejection_notices.len(), 1);
    let notice = &bundle.refined.rejection_notices[0];
    assert_eq!(notice.instruction, "Respond in plain text, do not use JSON.");
    assert_eq!(notice.conflicting_with, "Respond in JSON format.");
    assert_eq!(notice.reason, RejectionReason::Overruled);
    println!("acceptance: criterion 2 (demo context resolves end to end) ... PASS");
}

#[test]
fn criterion_03_vector_order_agrees_with_weighted_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0003);
    for instance in 0..200 {
        let n = rng.random_range(2..=12usize);
        let base = n as u64 + 1;
        let levels: Vec<u8> = (0..n).map(|_| rng.random_range(0..=2)).collect();
        for _ in 0..25 {
            let subset = |rng: &mut ChaCha8Rng| -> ObjectiveVector {
                ObjectiveVector::from_levels(
                    levels.iter().copied().filter(|_| rng.random::<bool>()),
                    2,
                )
            };
            let a = subset(&mut rng);
            let b = subset(&mut rng);
            assert_eq!(
                a.cmp(&b),
                a.weighted_sum(base).cmp(&b.weighted_sum(base)),
                "ordering split at instance {instance}: {a:?} vs {b:?} at base {base}"
            );
        }
    }
    println!("acceptance: criterion 3 (vector order agrees with weighted sums) ... PASS");
}

#[test]
fn criterion_04_unconflicted_instructions_always_survive() {
    let config = HierarchyConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0004);
    for i in 0..1000 {
        let n = rng.random_range(2..=12usize);
        let density = DENSITIES[i % DENSITIES.len()];
        let (atoms, matrix) = random_instance(&mut rng, n, density);
        let resolution = solve(&atoms, &matrix, &config).expect("solve");
        for (position, atom) in atoms.iter().enumerate() {
            if matrix.neighbors(position).is_empty() {
                assert!(
                    resolution.selected.contains(&atom.id),
                    "instance {i}: unconflicted atom {} was dropped",
                    atom.id
                );
            }
        }
    }
    println!("acceptance: criterion 4 (unconflicted instructions always survive) ... PASS");
}

#[test]
fn criterion_05_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0005);
    let mut checked = 0;
    let mut draws = 0;
    while checked < 100 {
        draws += 1;
        assert!(draws < 1000, "conditioning filter rejected too many draws");
        let tau = rng.random_range(0.1..=1.0);
        let gap: f64 = rng.random_range(-3.0..=3.0);
        assert!(gap.abs() / tau <= 30.0 + 1e-12, "draws must respect the gap/tau bound");
        let s_l = rng.random_range(-3.0..=0.0);
        let scores = if draws % 2 == 1 {
            let ref_l = rng.random_range(-3.0..=0.0);
            let ref_gap = rng.random_range(-2.0..=2.0);
            PreferenceScores::with_reference(s_l + gap, s_l, ref_l + ref_gap, ref_l)
        } else {
            PreferenceScores::new(s_l + gap, s_l)
        };
        let params = LossParams {
            tau,
            gamma: rng.random_range(0.0..=2.0),
            beta: rng.random_range(0.0..=1.0),
        };
        // Central differences cannot resolve the gradient to 1e-6 relative
        // where the loss terms nearly cancel, so such draws are skipped:
        // the check presumes a well-conditioned point.
        let pref_only =
            hcal(&scores, &LossParams { tau, gamma: 0.0, beta: 0.0 }).expect("loss");
        let no_kl = hcal(&scores, &LossParams { tau, gamma: params.gamma, beta: 0.0 })
            .expect("loss");
        let full = hcal(&scores, &params).expect("loss");
        let term_sum = pref_only.grad_s_w.abs()
            + (no_kl.grad_s_w - pref_only.grad_s_w).abs()
            + (full.grad_s_w - no_kl.grad_s_w).abs();
        if full.grad_s_w.abs() < 1e-3 * term_sum {
            continue;
        }
        checked += 1;
        let err = grad_check(&scores, &params, 1e-6).expect("grad check");
        assert!(err < 1e-6, "draw {draws}: relative error {err}");
    }

    // Equal scores: both softplus terms sit at ln 2, so the total collapses
    // to (1 + gamma) * ln 2 when the divergence term is off.
    for gamma in [0.0, 0.37, 1.0, 2.0] {
        let params = LossParams { tau: 0.1, gamma, beta: 0.0 };
        let breakdown = hcal(&PreferenceScores::new(-0.7, -0.7), &params).expect("loss");
        let expected = (1.0 + gamma) * std::f64::consts::LN_2;
        assert!(
            (breakdown.total - expected).abs() < 1e-12,
            "gamma={gamma}: {} vs {expected}",
            breakdown.total
        );
    }
    println!("acceptance: criterion 5 (gradients match central differences) ... PASS");
}

#[test]
fn criterion_06_worked_loss_value_is_reproduced() {
    let params = LossParams { tau: 0.1, gamma: 1.0, beta: 0.0 };
    let breakdown = hcal(&PreferenceScores::new(-1.0, -1.5), &params).expect("loss");
    // softplus(-5) + softplus(-0.5), evaluated independently to full
    // precision.
    let expected = 0.4807923326692247;
    assert!(
        (breakdown.total - expected).abs() < 1e-9,
        "total {} differs from {expected}",
        breakdown.total
    );
    println!("acceptance: criterion 6 (worked loss value is reproduced) ... PASS");
}

#[test]
fn criterion_07_training_records_conform_to_schema() {
    // The bundled canonical record round-trips byte-identically.
    let raw = read_fixture("canonical_record.json");
    let record: TrainingRecord = serde_json::from_str(&raw).expect("fixture parses");
    record.validate().expect("fixture record is valid");
    let reserialized = record.to_pretty_json().expect("serialize") + "\n";
    assert_eq!(raw, reserialized, "canonical record round-trip changed bytes");

    // Every record built from the 20-case fixture validates, with the
    // weight keyed to is_conflict and the fixed level-ordering matrix.
    let cases =
        read_seed_cases(read_fixture("seed_cases.jsonl").as_bytes()).expect("cases parse");
    let pool = HeldOutPool::from_json_str(&read_fixture("held_out_pool.json")).expect("pool");
    let mut records_buf = Vec::new();
    let mut manifest_buf = Vec::new();
    let summary = build_corpus(
        &cases,
        &RuleBasedDetector,
        41,
        Some(&pool),
        &mut records_buf,
        Some(&mut manifest_buf),
    )
    .expect("corpus builds");
    assert_eq!((summary.n_conflict, summary.n_aligned), (12, 8), "hand-labeled split");

    let records_text = String::from_utf8(records_buf).expect("utf8");
    let mut ids = Vec::new();
    let mut n_checked = 0;
    for line in records_text.lines() {
        let record: TrainingRecord = serde_json::from_str(line).expect("record parses");
        record.validate().expect("record is valid");
        let meta = &record.training_metadata;
        let expected_weight = if meta.is_conflict { 2.0 } else { 1.0 };
        assert_eq!(meta.hierarchy_weight, expected_weight);
        assert_eq!(meta.conflict_matrix, AUTHORITY_MATRIX);
        // Compact serialize→parse→serialize is also byte-stable.
        assert_eq!(record.to_json_line().expect("line"), line);
        ids.push(record.id.clone());
        n_checked += 1;
    }
    assert_eq!(n_checked, 20);
    let manifest_text = String::from_utf8(manifest_buf).expect("utf8");
    let manifest_ids: Vec<&str> = manifest_text.lines().map(|l| l.trim()).collect();
    assert_eq!(manifest_ids.join("\n"), ids.join("\n"));
    println!("acceptance: criterion 7 (training records conform to schema) ... PASS");
}

#[test]
fn criterion_08_cnf_export_recovers_the_demo_instance() {
    let context = Context::from_json(&read_fixture("demo_context.json")).expect("fixture parses");
    let config = HierarchyConfig::default();
    let atoms = atomize(&context, AtomizerRules::builtin(), &config).expect("atomize");
    let matrix =
        build_conflict_matrix(&RuleBasedDetector, &atoms, &DetectorSpec::default()).expect("scan");

    let text = to_weighted_cnf(&atoms, &matrix, &config, 6).expect("export");
    let parsed = parse_weighted_cnf(&text).expect("parse back");

    assert_eq!(parsed.nvars, 5);
    assert_eq!(parsed.top, 86);
    let mut weights: Vec<u128> = parsed.soft.iter().map(|(w, _)| *w).collect();
    weights.sort_unstable();
    assert_eq!(weights, vec![1, 6, 6, 36, 36]);
    assert_eq!(parsed.hard.len(), 1);
    let mut hard = parsed.hard[0].clone();
    hard.sort_unstable();
    assert_eq!(hard, vec![-4, -2], "hard clause forbids co-selecting atoms 1 and 3");

    let (assignment, best_weight) = parsed.exhaustive_best().expect("exhaustive");
    let from_cnf: Vec<usize> =
        assignment.iter().enumerate().filter(|&(_, &on)| on).map(|(v, _)| v).collect();
    let resolution = solve(&atoms, &matrix, &config).expect("solve");
    assert_eq!(from_cnf, resolution.selected);
    assert_eq!(best_weight, 36 + 36 + 6 + 1);
    println!("acceptance: criterion 8 (cnf export recovers the demo instance) ... PASS");
}

#[derive(Deserialize)]
struct VerifierCase {
    constraint: ConstraintKind,
    output: String,
    expect: bool,
}

#[test]
fn criterion_09_verifier_fixtures_match_hand_labels() {
    let cases: Vec<VerifierCase> =
        serde_json::from_str(&read_fixture("verifier_cases.json")).expect("fixture parses");
    assert!(cases.len() >= 10, "fixture should exercise at least ten labeled cases");

    for required in [
        ConstraintKind::NoCommas,
        ConstraintKind::MinCommas { k: 3 },
        ConstraintKind::IsJsonWithKey { key: "language".into() },
        ConstraintKind::IsJsonWithKey { key: "summary".into() },
    ] {
        assert!(
            cases.iter().any(|c| c.constraint == required),
            "fixture is missing {required:?}"
        );
    }

    for (index, case) in cases.iter().enumerate() {
        assert_eq!(
            check(&case.output, &case.constraint),
            case.expect,
            "case {index}: {:?} on {:?}",
            case.constraint,
            case.output
        );
    }
    println!("acceptance: criterion 9 (verifier fixtures match hand labels) ... PASS");
}

#[test]
fn criterion_10_resolution_output_is_bit_stable() {
    let binary = env!("CARGO_BIN_EXE_hier-resolve");
    let demo = fixture_path("demo_context.json");
    let mut outputs = Vec::new();
    for _ in 0..10 {
        let result = Command::new(binary)
            .args(["resolve", "--in"])
            .arg(&demo)
            .args(["--detector", "rule"])
            .output()
            .expect("binary runs");
        assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
        outputs.push(result.stdout);
    }
    assert!(
        outputs.windows(2).all(|pair| pair[0] == pair[1]),
        "repeated runs disagreed"
    );
    println!("acceptance: criterion 10 (resolution output is bit stable) ... PASS");
}
