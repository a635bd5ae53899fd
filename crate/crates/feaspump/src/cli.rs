//! Command-line front end.
//!
//! Six subcommands cover the full workflow: `gen` writes instance files,
//! `fp` runs the classic pump, `train` fits a pump agent and saves
//! checkpoints and logs, `eval` scores a single solver, `compare` rebuilds
//! the head-to-head tables from a run directory, and `selftest` cross-checks
//! the numerics against the independent references in [`crate::oracle`].
//!
//! A run directory has a fixed layout, created by `train` and consumed by
//! `compare`:
//!
//! ```text
//! run/
//!   instances/
//!     train_<kind>_<n>x<m>/inst_00000.txt ...   training pool
//!     eval_<kind>_<n>x<m>/inst_00000.txt ...    held-out pool
//!   checkpoints/<variant>_<kind>_<n>x<m>_{best,final}.json
//!   logs/train_<variant>_<kind>_<n>x<m>.{csv,meta.json}
//!   reports/compare_<kind>_<n>x<m>.{csv,txt}
//! ```
//!
//! Exit codes: `0` success, `1` usage error, `2` data error (unreadable or
//! inconsistent inputs), `3` numerical failure (solver breakdown or a failed
//! self-check).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{ConfigError, RunConfig};
use crate::derive_seed;
use crate::env::Variant;
use crate::eval::{self, EvalError, MetricsTable};
use crate::fp::{self, FpError, Termination};
use crate::instance::{generate, InstanceError, Kind, MipInstance};
use crate::lp::LpError;
use crate::nn::{checkpoint, NnError, Policy};
use crate::oracle;
use crate::ppo::{PpoError, RunMetadata, TRAIN_CSV_HEADER};

/// Seed-derivation tag for `gen` instance files.
pub const SEED_TAG_GEN: u64 = 32;
/// Seed-derivation tag for a run's training pool.
pub const SEED_TAG_TRAIN_POOL: u64 = 33;
/// Seed-derivation tag for a run's held-out evaluation pool.
pub const SEED_TAG_EVAL_POOL: u64 = 34;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// A subcommand failure, bucketed by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<InstanceError> for CliError {
    fn from(e: InstanceError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<LpError> for CliError {
    fn from(e: LpError) -> Self {
        match e {
            LpError::BadDimensions(_) | LpError::BoundOrder { .. } => CliError::Data(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFiniteActivation(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<FpError> for CliError {
    fn from(e: FpError) -> Self {
        match e {
            FpError::Lp(inner) => inner.into(),
            FpError::Instance(inner) => inner.into(),
            FpError::RelaxationInfeasible => CliError::Data(e.to_string()),
        }
    }
}

impl From<PpoError> for CliError {
    fn from(e: PpoError) -> Self {
        match e {
            PpoError::Nn(inner) => inner.into(),
            PpoError::NonFiniteLoss(_) | PpoError::BadBuffer(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Fp(inner) => inner.into(),
            EvalError::Ppo(inner) => inner.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "feaspump",
    version,
    about = "Feasibility search for bounded integer programs: classic pump, trained pump agents, benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a directory of random feasible instances.
    Gen {
        /// Number of variables.
        #[arg(long)]
        n: usize,
        /// Number of constraint rows.
        #[arg(long)]
        m: usize,
        /// How many instances to write.
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// `ip` (all variables integral) or `mip` (a proper subset).
        #[arg(long, default_value = "ip")]
        kind: Kind,
        /// Master seed; instance `i` uses a seed derived from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the classic feasibility pump on an instance file or directory.
    Fp {
        /// Instance file, or a directory of instances to score in bulk.
        #[arg(long)]
        input: PathBuf,
        /// Step cap per run.
        #[arg(long, default_value_t = 100)]
        cap: usize,
        /// Seed for restart perturbations (and per-instance derivation in
        /// directory mode).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the full step-by-step trace as JSON lines (single-instance
        /// mode only).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Train a pump agent and write checkpoints, logs, and pools to a run
    /// directory.
    Train {
        /// Observation/architecture variant: `mlp` or `cnn`.
        #[arg(long)]
        variant: Variant,
        /// Number of variables.
        #[arg(long)]
        n: usize,
        /// Number of constraint rows.
        #[arg(long)]
        m: usize,
        /// `ip` or `mip`.
        #[arg(long, default_value = "ip")]
        kind: Kind,
        /// TOML config file; omitted keys use built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Training-pool size when the pool is generated fresh.
        #[arg(long, default_value_t = 200)]
        train_count: usize,
        /// Held-out-pool size when the pool is generated fresh.
        #[arg(long, default_value_t = 100)]
        eval_count: usize,
    },
    /// Score one solver (`fp` or a checkpoint file) on an instance directory.
    Eval {
        /// `fp` for the classic pump, or a path to a checkpoint JSON file.
        solver: String,
        /// Directory of instance files.
        #[arg(long)]
        instances: PathBuf,
        /// Step cap per episode.
        #[arg(long, default_value_t = 100)]
        cap: usize,
        /// Master evaluation seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Act with the distribution mean instead of sampling (checkpoint
        /// solvers only).
        #[arg(long)]
        deterministic: bool,
        /// Also write the table as CSV to this path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Rebuild head-to-head comparison tables from a run directory.
    Compare {
        /// Run directory written by `train` (and/or `gen` into
        /// `instances/eval_*`).
        #[arg(long)]
        run: PathBuf,
        /// Step cap per episode.
        #[arg(long, default_value_t = 100)]
        cap: usize,
        /// Master evaluation seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cross-check solver, projection, generator, gradient, advantage, and
    /// metric computations against independent references.
    Selftest {
        /// Seed for the randomized check cases.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Entry point returning a process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen {
            n,
            m,
            count,
            kind,
            seed,
            out,
        } => cmd_gen(n, m, count, kind, seed, &out),
        Command::Fp {
            input,
            cap,
            seed,
            trace,
        } => cmd_fp(&input, cap, seed, trace.as_deref()),
        Command::Train {
            variant,
            n,
            m,
            kind,
            config,
            out,
            train_count,
            eval_count,
        } => cmd_train(
            variant,
            n,
            m,
            kind,
            config.as_deref(),
            &out,
            train_count,
            eval_count,
        ),
        Command::Eval {
            solver,
            instances,
            cap,
            seed,
            deterministic,
            csv,
        } => cmd_eval(
            &solver,
            &instances,
            cap,
            seed,
            deterministic,
            csv.as_deref(),
        ),
        Command::Compare { run, cap, seed } => cmd_compare(&run, cap, seed),
        Command::Selftest { seed } => cmd_selftest(seed),
    }
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

fn cmd_gen(
    n: usize,
    m: usize,
    count: usize,
    kind: Kind,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    if count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    fs::create_dir_all(out)?;
    for i in 0..count {
        let inst = generate(derive_seed(seed, SEED_TAG_GEN, i as u64), n, m, kind)?;
        inst.save(&out.join(instance_file_name(i)))?;
    }
    println!(
        "wrote {count} {kind} instances of size {n}x{m} to {}",
        out.display()
    );
    Ok(())
}

fn instance_file_name(index: usize) -> String {
    format!("inst_{index:05}.txt")
}

/// Loads every `*.txt` file in `dir`, in name order.
fn load_instances(dir: &Path) -> Result<Vec<MipInstance>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Data(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().map(|x| x == "txt").unwrap_or(false))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Data(format!(
            "no instance files (*.txt) in {}",
            dir.display()
        )));
    }
    let mut instances = Vec::with_capacity(paths.len());
    for path in &paths {
        let inst = MipInstance::load(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        instances.push(inst);
    }
    Ok(instances)
}

/// Errors unless all instances share one `(kind, n, m)` signature.
fn require_uniform(instances: &[MipInstance], origin: &Path) -> Result<(), CliError> {
    let first = &instances[0];
    for inst in instances {
        if inst.n != first.n || inst.m != first.m || inst.kind != first.kind {
            return Err(CliError::Data(format!(
                "mixed instance signatures in {} ({} {}x{} vs {} {}x{})",
                origin.display(),
                first.kind,
                first.n,
                first.m,
                inst.kind,
                inst.n,
                inst.m
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// fp
// ---------------------------------------------------------------------------

fn cmd_fp(input: &Path, cap: usize, seed: u64, trace: Option<&Path>) -> Result<(), CliError> {
    if cap == 0 {
        return Err(CliError::Usage("--cap must be at least 1".into()));
    }
    if input.is_dir() {
        if trace.is_some() {
            return Err(CliError::Usage(
                "--trace records a single run; pass an instance file, not a directory".into(),
            ));
        }
        let instances = load_instances(input)?;
        require_uniform(&instances, input)?;
        let outcome = eval::evaluate_fp(&instances, cap, seed)?;
        let table = single_solver_table(&instances, cap, seed, "fp".into(), outcome.row);
        print!("{}", table.render_text());
        return Ok(());
    }

    let inst = MipInstance::load(input)?;
    let result = fp::run_fp(&inst, cap, seed)?;
    println!(
        "instance: {} ({} {}x{})",
        input.display(),
        inst.kind,
        inst.n,
        inst.m
    );
    let verdict = match result.terminated_by {
        Termination::FoundFeasible => "feasible",
        Termination::StepLimit => "step limit reached",
    };
    println!("steps: {} ({verdict})", result.steps_taken);
    println!("perturbations: {}", result.perturbation_count);
    println!("lp solves: {}", result.lp_solves);
    if let Some(solution) = &result.solution {
        let rendered: Vec<String> = solution.iter().map(|v| format!("{v}")).collect();
        println!("solution: {}", rendered.join(" "));
    }
    if let Some(trace_path) = trace {
        fs::write(trace_path, fp::trace_to_jsonl(&result.trace))?;
        println!(
            "trace: {} ({} records)",
            trace_path.display(),
            result.trace.len()
        );
    }
    Ok(())
}

fn single_solver_table(
    instances: &[MipInstance],
    cap: usize,
    seed: u64,
    label: String,
    row: eval::MetricsRow,
) -> MetricsTable {
    let first = &instances[0];
    MetricsTable {
        kind: first.kind,
        n: first.n,
        m: first.m,
        cap,
        seed,
        instance_hash: eval::instance_set_hash(instances),
        cells: vec![(label, Some(row))],
    }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    variant: Variant,
    n: usize,
    m: usize,
    kind: Kind,
    config: Option<&Path>,
    out: &Path,
    train_count: usize,
    eval_count: usize,
) -> Result<(), CliError> {
    if train_count == 0 || eval_count == 0 {
        return Err(CliError::Usage(
            "--train-count and --eval-count must be at least 1".into(),
        ));
    }
    let run_cfg = match config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut env_cfg = run_cfg.env;
    env_cfg.variant = variant;

    for sub in ["instances", "checkpoints", "logs", "reports"] {
        fs::create_dir_all(out.join(sub))?;
    }
    let set_slug = format!("{kind}_{n}x{m}");
    let master = run_cfg.train.seed;
    let train_pool = load_or_generate_pool(
        &out.join("instances").join(format!("train_{set_slug}")),
        n,
        m,
        kind,
        train_count,
        master,
        SEED_TAG_TRAIN_POOL,
    )?;
    let eval_pool = load_or_generate_pool(
        &out.join("instances").join(format!("eval_{set_slug}")),
        n,
        m,
        kind,
        eval_count,
        master,
        SEED_TAG_EVAL_POOL,
    )?;

    let run_slug = format!("{variant}_{set_slug}");
    let meta_path = out.join("logs").join(format!("train_{run_slug}.meta.json"));
    let metadata = RunMetadata::new(
        variant,
        n,
        m,
        train_pool.len(),
        eval_pool.len(),
        &env_cfg,
        &run_cfg.train,
    );
    fs::write(&meta_path, metadata.to_json())?;

    let csv_path = out.join("logs").join(format!("train_{run_slug}.csv"));
    let mut csv_file = fs::File::create(&csv_path)?;
    writeln!(csv_file, "{TRAIN_CSV_HEADER}")?;
    csv_file.flush()?;

    println!(
        "training {variant} on {} {kind} instances of size {n}x{m} ({} held out), {} iterations",
        train_pool.len(),
        eval_pool.len(),
        run_cfg.train.iterations
    );
    let iterations = run_cfg.train.iterations;
    let mut sink_err: Option<std::io::Error> = None;
    let outcome = {
        let mut sink = |record: &crate::ppo::IterationRecord| {
            if sink_err.is_none() {
                let line = crate::ppo::record_to_csv(record);
                if let Err(e) = writeln!(csv_file, "{line}").and_then(|_| csv_file.flush()) {
                    sink_err = Some(e);
                }
            }
            println!(
                "iter {:>3}/{iterations}  ep_len_mean {:>7.2}  eval {:>7.2}  entropy {:>6.3}",
                record.iteration, record.ep_len_mean, record.eval_ep_len_mean, record.entropy
            );
        };
        crate::ppo::train_with_sink(
            &train_pool,
            &eval_pool,
            variant,
            &env_cfg,
            &run_cfg.train,
            &mut sink,
        )
    };
    if let Some(e) = sink_err {
        return Err(CliError::Data(format!(
            "writing {}: {e}",
            csv_path.display()
        )));
    }
    let outcome = outcome?;

    let best_path = out
        .join("checkpoints")
        .join(format!("{run_slug}_best.json"));
    let final_path = out
        .join("checkpoints")
        .join(format!("{run_slug}_final.json"));
    checkpoint::save(&outcome.best_policy, &outcome.best_critic, &best_path)?;
    checkpoint::save(&outcome.policy, &outcome.critic, &final_path)?;

    println!(
        "best held-out mean episode length {:.2} at iteration {}",
        outcome.best_eval_ep_len, outcome.best_iteration
    );
    println!(
        "checkpoints: {} and {}",
        best_path.display(),
        final_path.display()
    );
    println!(
        "log: {} (metadata {})",
        csv_path.display(),
        meta_path.display()
    );
    Ok(())
}

/// Reuses an existing pool directory (so several runs share identical
/// instance sets) or generates and saves a fresh one.
fn load_or_generate_pool(
    dir: &Path,
    n: usize,
    m: usize,
    kind: Kind,
    count: usize,
    master_seed: u64,
    tag: u64,
) -> Result<Vec<MipInstance>, CliError> {
    let has_files = dir.is_dir()
        && fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .any(|e| e.path().extension().map(|x| x == "txt").unwrap_or(false));
    if has_files {
        let instances = load_instances(dir)?;
        require_uniform(&instances, dir)?;
        let first = &instances[0];
        if first.n != n || first.m != m || first.kind != kind {
            return Err(CliError::Data(format!(
                "existing pool {} holds {} {}x{} instances, but {} {}x{} was requested",
                dir.display(),
                first.kind,
                first.n,
                first.m,
                kind,
                n,
                m
            )));
        }
        println!(
            "reusing pool {} ({} instances)",
            dir.display(),
            instances.len()
        );
        return Ok(instances);
    }
    fs::create_dir_all(dir)?;
    let mut instances = Vec::with_capacity(count);
    for i in 0..count {
        let inst = generate(derive_seed(master_seed, tag, i as u64), n, m, kind)?;
        inst.save(&dir.join(instance_file_name(i)))?;
        instances.push(inst);
    }
    println!("generated pool {} ({count} instances)", dir.display());
    Ok(instances)
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

fn cmd_eval(
    solver: &str,
    instances_dir: &Path,
    cap: usize,
    seed: u64,
    deterministic: bool,
    csv: Option<&Path>,
) -> Result<(), CliError> {
    if cap == 0 {
        return Err(CliError::Usage("--cap must be at least 1".into()));
    }
    let instances = load_instances(instances_dir)?;
    require_uniform(&instances, instances_dir)?;

    let (label, row) = if solver == "fp" {
        if deterministic {
            return Err(CliError::Usage(
                "--deterministic only applies to checkpoint solvers; the pump has its own restart randomness".into(),
            ));
        }
        (
            String::from("fp"),
            eval::evaluate_fp(&instances, cap, seed)?.row,
        )
    } else {
        let (mut policy, _critic) = checkpoint::load(Path::new(solver))?;
        let label = policy.variant().to_string();
        let row = eval::evaluate_policy(&mut policy, &instances, cap, seed, deterministic)?.row;
        (label, row)
    };

    let table = single_solver_table(&instances, cap, seed, label, row);
    print!("{}", table.render_text());
    if let Some(csv_path) = csv {
        fs::write(csv_path, table.to_csv())?;
        println!("\ncsv: {}", csv_path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

fn cmd_compare(run: &Path, cap: usize, seed: u64) -> Result<(), CliError> {
    if cap == 0 {
        return Err(CliError::Usage("--cap must be at least 1".into()));
    }
    let instances_root = run.join("instances");
    if !instances_root.is_dir() {
        return Err(CliError::Data(format!(
            "{} has no instances/ directory; expected a run directory",
            run.display()
        )));
    }
    let mut set_dirs: Vec<PathBuf> = fs::read_dir(&instances_root)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|s| s.to_str())
                    .map(|s| s.starts_with("eval_"))
                    .unwrap_or(false)
        })
        .collect();
    set_dirs.sort();
    if set_dirs.is_empty() {
        return Err(CliError::Data(format!(
            "no evaluation instance sets (instances/eval_*) under {}",
            run.display()
        )));
    }

    fs::create_dir_all(run.join("reports"))?;
    for set_dir in &set_dirs {
        let instances = load_instances(set_dir)?;
        require_uniform(&instances, set_dir)?;
        let first = &instances[0];
        let set_slug = format!("{}_{}x{}", first.kind, first.n, first.m);

        let mut mlp = load_best_policy(run, "mlp", &set_slug)?;
        let mut cnn = load_best_policy(run, "cnn", &set_slug)?;
        let table = eval::compare(&instances, cap, seed, mlp.as_mut(), cnn.as_mut())?;

        let csv_path = run.join("reports").join(format!("compare_{set_slug}.csv"));
        let txt_path = run.join("reports").join(format!("compare_{set_slug}.txt"));
        fs::write(&csv_path, table.to_csv())?;
        fs::write(&txt_path, table.render_text())?;
        println!("{}", table.render_text());
        println!(
            "reports: {} and {}\n",
            csv_path.display(),
            txt_path.display()
        );
    }
    Ok(())
}

/// Loads `checkpoints/<variant>_<set>_best.json` if present; a missing file
/// leaves the column absent rather than failing the whole comparison.
fn load_best_policy(run: &Path, variant: &str, set_slug: &str) -> Result<Option<Policy>, CliError> {
    let path = run
        .join("checkpoints")
        .join(format!("{variant}_{set_slug}_best.json"));
    if !path.is_file() {
        return Ok(None);
    }
    let (policy, _critic) = checkpoint::load(&path)?;
    Ok(Some(policy))
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

fn cmd_selftest(seed: u64) -> Result<(), CliError> {
    let suites = [
        oracle::lp_suite(seed, 120),
        oracle::projection_suite(seed.wrapping_add(1), 40),
        oracle::generator_suite(seed.wrapping_add(2), 240, 12, 2_000_000),
        oracle::gradient_suite(seed.wrapping_add(3), 2),
        oracle::gae_suite(seed.wrapping_add(4), 60),
        oracle::metrics_suite(seed.wrapping_add(5), 60),
    ];
    let mut failed = Vec::new();
    for suite in &suites {
        println!("{}", suite.render());
        if !suite.passed() {
            failed.push(suite.name);
        }
    }
    if failed.is_empty() {
        println!("all {} suites passed", suites.len());
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "self-check failures in: {}",
            failed.join(", ")
        )))
    }
}
