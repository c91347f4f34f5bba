//! `hier-resolve`: command-line front end for the instruction-hierarchy
//! toolkit.
//!
//! Exit codes: 0 success (for `verify`, also "all constraints pass"),
//! 1 domain error (or failed verification), 2 usage error. All results go
//! to standard output unless `--out` is given; logs go to standard error.

use std::fs;
use std::io::{BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hier_core::atomizer::atomize;
use hier_core::config::AppConfig;
use hier_core::conflict::{
    build_conflict_matrix, BackendKind, ConflictMatrix, RelationDetector, Relation,
    RuleBasedDetector,
};
use hier_core::context::{AtomicInstruction, Context};
use hier_core::dataset::{build_corpus, read_seed_cases, HeldOutPool};
use hier_core::error::{Error, Result};
use hier_core::loss::{hcal, read_score_lines, LossParams};
use hier_core::nli::{
    benchmark_detector, read_labeled_pairs, EndpointConfig, HttpTransport, MockTransport,
    NliDetector,
};
use hier_core::pipeline::{render_bundle_text, resolve_context, ResolveBundle};
use hier_core::solver::solve;
use hier_core::verifier::{evaluate, CompilationTable};
use hier_core::wcnf::to_weighted_cnf;

#[derive(Parser)]
#[command(
    name = "hier-resolve",
    version,
    about = "Resolve hierarchical instruction conflicts: atomize, scan, solve, refine",
    propagate_version = true
)]
struct Cli {
    /// JSON configuration file (detector, endpoint, hierarchy, atomizer rules).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Detector backend, overriding the config file.
    #[arg(long, global = true, value_enum)]
    detector: Option<DetectorChoice>,

    /// Replay fixture for the external detector; forces offline mock mode.
    #[arg(long, global = true, value_name = "FIXTURE")]
    mock: Option<PathBuf>,

    /// Write results here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DetectorChoice {
    Rule,
    External,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    #[default]
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Split a context (`{"messages": [...]}`) into atomic instructions.
    Atomize {
        /// Context JSON file.
        #[arg(long, value_name = "PATH")]
        r#in: PathBuf,
    },
    /// Scan an atom list (JSON array) for pairwise conflicts.
    Scan {
        /// Atom list JSON file (as emitted by `atomize`).
        #[arg(long, value_name = "PATH")]
        r#in: PathBuf,
    },
    /// Optimize a conflict instance (`{"atoms": [...], "matrix": {...}}`).
    Solve {
        /// Instance JSON file.
        #[arg(long, value_name = "PATH")]
        r#in: PathBuf,
        /// Emit the instance as a weighted-CNF text instead of solving it.
        #[arg(long)]
        emit_wcnf: bool,
        /// Weight base for --emit-wcnf (default: atom count + 1).
        #[arg(long, value_name = "B")]
        base: Option<u64>,
    },
    /// Run the full pipeline: atomize, scan, solve, refine.
    Resolve {
        /// Context JSON file.
        #[arg(long, value_name = "PATH")]
        r#in: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
    /// Check a candidate model output against a resolved bundle; exits 0
    /// iff every compiled constraint passes.
    Verify {
        /// Resolved bundle JSON file (as emitted by `resolve`).
        #[arg(long, value_name = "PATH")]
        r#in: PathBuf,
        /// File holding the candidate output text.
        #[arg(long, value_name = "PATH")]
        output: PathBuf,
    },
    /// Evaluate loss terms over a JSONL score stream
    /// (`{"s_w", "s_l", ...}` or `{"logp_w": [...], "logp_l": [...]}`).
    Loss {
        /// Scores JSONL file.
        #[arg(long, value_name = "PATH")]
        r#in: PathBuf,
        /// Preference-term temperature (default 0.1).
        #[arg(long)]
        tau: Option<f64>,
        /// Semantic-term weight (default 1.0).
        #[arg(long)]
        gamma: Option<f64>,
        /// Divergence-term weight (default 0.1).
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Build a training corpus from seed cases (JSONL).
    BuildDataset {
        /// Seed cases JSONL file.
        #[arg(long, value_name = "PATH")]
        r#in: PathBuf,
        /// Corpus seed for deterministic level assignment.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Held-out pool JSON file for aligned-case rejected responses.
        #[arg(long, value_name = "PATH")]
        held_out_pool: Option<PathBuf>,
    },
    /// Score the detector against gold-labeled pairs (JSONL).
    BenchDetector {
        /// Labeled pairs JSONL file.
        #[arg(long, value_name = "PATH")]
        r#in: PathBuf,
    },
}

/// Detector construction resolved from config and global flags.
enum AnyDetector {
    Rule(RuleBasedDetector),
    Http(Box<NliDetector<HttpTransport>>),
    Mock(Box<NliDetector<MockTransport>>),
}

impl RelationDetector for AnyDetector {
    fn detect(&self, premise: &str, hypothesis: &str) -> Result<Relation> {
        match self {
            AnyDetector::Rule(d) => d.detect(premise, hypothesis),
            AnyDetector::Http(d) => d.detect(premise, hypothesis),
            AnyDetector::Mock(d) => d.detect(premise, hypothesis),
        }
    }
}

fn load_config(cli: &Cli) -> Result<AppConfig> {
    let mut config = match &cli.config {
        Some(path) => AppConfig::load(path)?,
        None => AppConfig::default(),
    };
    if let Some(choice) = cli.detector {
        config.detector.backend = match choice {
            DetectorChoice::Rule => BackendKind::RuleBased,
            DetectorChoice::External => BackendKind::External,
        };
    }
    Ok(config)
}

fn build_detector(config: &AppConfig, mock: Option<&Path>) -> Result<AnyDetector> {
    if let Some(fixture_path) = mock {
        let text = fs::read_to_string(fixture_path)
            .map_err(|e| Error::Config(format!("reading {}: {e}", fixture_path.display())))?;
        let transport = MockTransport::from_fixture_json(&text)?;
        let endpoint = config.endpoint.clone().unwrap_or_else(|| EndpointConfig {
            base_url: "mock://endpoint".to_string(),
            model_name: "replay".to_string(),
            ..EndpointConfig::default()
        });
        return Ok(AnyDetector::Mock(Box::new(NliDetector::with_transport(
            endpoint, transport,
        )?)));
    }
    match config.detector.backend {
        BackendKind::RuleBased => Ok(AnyDetector::Rule(RuleBasedDetector)),
        BackendKind::External => {
            let endpoint = config.endpoint.clone().ok_or_else(|| {
                Error::Config("external detector requires an endpoint section".into())
            })?;
            Ok(AnyDetector::Http(Box::new(NliDetector::new(endpoint)?)))
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("reading {}: {e}", path.display())))
}

fn open_reader(path: &Path) -> Result<BufReader<fs::File>> {
    Ok(BufReader::new(fs::File::open(path).map_err(|e| {
        Error::InvalidInput(format!("reading {}: {e}", path.display()))
    })?))
}

/// Writes to `--out` or standard output, ensuring a trailing newline.
fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    let with_newline = if content.ends_with('\n') {
        content.to_string()
    } else {
        format!("{content}\n")
    };
    match out {
        Some(path) => fs::write(path, with_newline)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(with_newline.as_bytes())?;
            lock.flush()?;
        }
    }
    Ok(())
}

#[derive(serde::Serialize, serde::Deserialize)]
struct SolveInput {
    atoms: Vec<AtomicInstruction>,
    matrix: ConflictMatrix,
}

fn run(cli: Cli) -> Result<u8> {
    let config = load_config(&cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Atomize { r#in } => {
            let context = Context::from_json(&read_file(r#in)?)?;
            let rules = config.load_atomizer_rules()?;
            let atoms = atomize(&context, &rules, &config.hierarchy)?;
            emit(out, &serde_json::to_string_pretty(&atoms)?)?;
        }
        Command::Scan { r#in } => {
            let atoms: Vec<AtomicInstruction> = serde_json::from_str(&read_file(r#in)?)?;
            let detector = build_detector(&config, cli.mock.as_deref())?;
            let matrix = build_conflict_matrix(&detector, &atoms, &config.detector)?;
            emit(out, &serde_json::to_string_pretty(&matrix)?)?;
        }
        Command::Solve { r#in, emit_wcnf, base } => {
            let input: SolveInput = serde_json::from_str(&read_file(r#in)?)?;
            if *emit_wcnf {
                let base = base.unwrap_or(input.atoms.len() as u64 + 1);
                let text =
                    to_weighted_cnf(&input.atoms, &input.matrix, &config.hierarchy, base)?;
                emit(out, &text)?;
            } else {
                let resolution = solve(&input.atoms, &input.matrix, &config.hierarchy)?;
                emit(out, &serde_json::to_string_pretty(&resolution)?)?;
            }
        }
        Command::Resolve { r#in, format } => {
            let context = Context::from_json(&read_file(r#in)?)?;
            let rules = config.load_atomizer_rules()?;
            let detector = build_detector(&config, cli.mock.as_deref())?;
            let bundle = resolve_context(
                &context,
                &rules,
                &config.hierarchy,
                &detector,
                &config.detector,
            )?;
            match format {
                OutputFormat::Json => emit(out, &serde_json::to_string_pretty(&bundle)?)?,
                OutputFormat::Text => emit(out, &render_bundle_text(&bundle))?,
            }
        }
        Command::Verify { r#in, output } => {
            let bundle: ResolveBundle = serde_json::from_str(&read_file(r#in)?)?;
            let candidate = read_file(output)?;
            let report = evaluate(
                &candidate,
                &bundle.resolution,
                &bundle.atoms,
                &CompilationTable::builtin(),
            );
            emit(out, &serde_json::to_string_pretty(&report)?)?;
            if !report.all_pass {
                return Ok(1);
            }
        }
        Command::Loss { r#in, tau, gamma, beta } => {
            let defaults = LossParams::default();
            let params = LossParams {
                tau: tau.unwrap_or(defaults.tau),
                gamma: gamma.unwrap_or(defaults.gamma),
                beta: beta.unwrap_or(defaults.beta),
            };
            let scores = read_score_lines(open_reader(r#in)?)?;
            let mut lines = String::new();
            for entry in &scores {
                let breakdown = hcal(entry, &params)?;
                lines.push_str(&serde_json::to_string(&breakdown)?);
                lines.push('\n');
            }
            emit(out, &lines)?;
        }
        Command::BuildDataset { r#in, seed, held_out_pool } => {
            let cases = read_seed_cases(open_reader(r#in)?)?;
            let pool = match held_out_pool {
                Some(path) => Some(HeldOutPool::from_json_str(&read_file(path)?)?),
                None => None,
            };
            let detector = build_detector(&config, cli.mock.as_deref())?;
            let summary = match out {
                Some(path) => {
                    let mut records = fs::File::create(path)?;
                    let manifest_path = PathBuf::from(format!("{}.manifest", path.display()));
                    let mut manifest = fs::File::create(&manifest_path)?;
                    build_corpus(
                        &cases,
                        &detector,
                        *seed,
                        pool.as_ref(),
                        &mut records,
                        Some(&mut manifest),
                    )?
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    build_corpus(&cases, &detector, *seed, pool.as_ref(), &mut lock, None)?
                }
            };
            eprintln!("{}", serde_json::to_string(&summary)?);
        }
        Command::BenchDetector { r#in } => {
            let pairs = read_labeled_pairs(open_reader(r#in)?)?;
            let detector = build_detector(&config, cli.mock.as_deref())?;
            let metrics = benchmark_detector(&detector, &pairs)?;
            emit(out, &serde_json::to_string_pretty(&metrics)?)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(1)
        }
    }
}
