//! `cplab`: train, evaluate, and inspect conscious-bottleneck runs.
//!
//! Exit codes: 0 success, 1 usage error, 2 bad configuration, 3 runtime
//! failure (numerical abort, missing checkpoint, I/O).

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use cplab_env::{oracle_fall_prob, reset, sample_trajectory, step};
use cplab_harness::baseline::eval_baseline;
use cplab_harness::error::{HarnessError, Result};
use cplab_harness::eval::EvalOptions;
use cplab_harness::{
    collect_statements, evaluate, manifest, resolve_statements, run_gradient_suite,
    train_baseline, write_loss_curve, write_report, write_statements_tsv,
};
use cplab_tensor::SeededRng;
use cplab_train::{load_checkpoint, RunConfig, Trainer};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Parser)]
#[command(name = "cplab", version, about = "Conscious-bottleneck lab on the blocks-fall world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the representation, bottleneck, predictor, and verifier.
    Train(TrainArgs),
    /// Probe, oracle, statement, and mutual-information report for a run.
    Eval(EvalArgs),
    /// Exact fall probabilities for sampled world states.
    Oracle(OracleArgs),
    /// Linear-probe table only, for a quick look at a checkpoint.
    Probe(EvalArgs),
    /// Emit statements from fresh trajectories and resolve them.
    Statements(EvalArgs),
    /// Train and score the pixel-space baseline forecaster.
    Baseline(BaselineArgs),
    /// Finite-difference audit of every primitive and network path.
    Gradcheck(GradcheckArgs),
    /// Print the default configuration as TOML.
    Config,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Run directory for metrics and checkpoints (default runs/<timestamp>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of optimizer steps.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Run directory holding checkpoint_final.bin; reports land here too.
    #[arg(long)]
    out: PathBuf,
    /// Fresh evaluation trajectories.
    #[arg(long)]
    trajectories: Option<usize>,
    /// Length of each evaluation trajectory.
    #[arg(long)]
    length: Option<usize>,
    /// Cap on oracle enumeration points.
    #[arg(long)]
    oracle_points: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Number of sampled world states.
    #[arg(long, default_value_t = 20)]
    states: usize,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Output directory (default runs/<timestamp>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of baseline training steps.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Seed for the random evaluation points.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the full error table as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let invocation: String = std::env::args().collect::<Vec<_>>().join(" ");
    if let Err(err) = dispatch(cli, &invocation) {
        eprintln!("error: {err}");
        let code = match err {
            HarnessError::Config(_) => 2,
            _ => 3,
        };
        std::process::exit(code);
    }
}

fn dispatch(cli: Cli, invocation: &str) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(args, invocation),
        Command::Eval(args) => cmd_eval(args, invocation, false),
        Command::Probe(args) => cmd_eval(args, invocation, true),
        Command::Statements(args) => cmd_statements(args, invocation),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Baseline(args) => cmd_baseline(args, invocation),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Config => {
            print!("{}", RunConfig::default().to_toml_string()?);
            Ok(())
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::from_path(path)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

fn default_run_dir() -> PathBuf {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    PathBuf::from("runs").join(stamp.to_string())
}

fn seed_of(common: &ConfigArgs, cfg: &RunConfig) -> u64 {
    common.seed.unwrap_or(cfg.train.seed)
}

fn cmd_train(args: TrainArgs, invocation: &str) -> Result<()> {
    let mut cfg = load_config(&args.common.config)?;
    if let Some(steps) = args.steps {
        cfg.train.steps = steps;
    }
    let seed = seed_of(&args.common, &cfg);
    let out = args.out.unwrap_or_else(default_run_dir);
    manifest::write_manifest(&out, "train", &cfg, seed, invocation)?;

    let total = cfg.train.steps;
    let log_every = (total / 20).max(1);
    let mut trainer = Trainer::new(cfg, seed)?;
    println!("training {total} steps, seed {seed}, out {}", out.display());
    let artifacts = trainer.run(&out, |step, bd| {
        if step == 0 || (step + 1) % log_every == 0 {
            println!(
                "step {:>6}  total {:8.4}  nce {:7.4}  pred {:7.4}  ent {:7.4}  div {:7.4}",
                step + 1,
                bd.total,
                bd.nce,
                bd.prediction,
                bd.entropy_reg,
                bd.diversity_reg
            );
        }
    })?;
    write_loss_curve(&artifacts.metrics_path, &out.join("loss_curve.csv"))?;
    println!("final checkpoint: {}", artifacts.final_checkpoint.display());
    Ok(())
}

fn eval_options(args: &EvalArgs) -> EvalOptions {
    let mut opts = EvalOptions::default();
    if let Some(n) = args.trajectories {
        opts.trajectories = n;
    }
    if let Some(n) = args.length {
        opts.trajectory_length = n;
    }
    if let Some(n) = args.oracle_points {
        opts.oracle_points = n;
    }
    opts
}

fn load_run_checkpoint(out: &Path) -> Result<cplab_tensor::ParameterStore> {
    let path = out.join("checkpoint_final.bin");
    if !path.is_file() {
        return Err(HarnessError::Data(format!(
            "no checkpoint at {}; train into this directory first",
            path.display()
        )));
    }
    Ok(load_checkpoint(&path)?)
}

fn cmd_eval(args: EvalArgs, invocation: &str, probes_only: bool) -> Result<()> {
    let cfg = load_config(&args.common.config)?;
    let seed = seed_of(&args.common, &cfg);
    let store = load_run_checkpoint(&args.out)?;
    let opts = eval_options(&args);
    let command = if probes_only { "probe" } else { "eval" };
    manifest::write_manifest(&args.out, command, &cfg, seed, invocation)?;

    let report = evaluate(&cfg, &store, None, seed, &opts)?;
    println!("probe AUC by feature source (fall within {} steps):", report.horizon);
    println!(
        "  conscious {:.4}  full-state {:.4}  random-slots {:.4}  oracle {:.4}",
        report.conscious_auc, report.full_h_auc, report.random_slot_auc, report.oracle_auc
    );
    for probe in &report.probe_reports {
        println!(
            "  {:>14} pile {}  auc {:.4}  acc {:.4}  n {}",
            probe.source, probe.pile, probe.auc, probe.accuracy, probe.n
        );
    }
    if probes_only {
        return Ok(());
    }
    println!(
        "statements: {} resolved, {} open, {} came true, verifier AUC {:.4}",
        report.statements_resolved,
        report.statements_unresolved,
        report.statements_came_true,
        report.verifier_statement_auc
    );
    println!(
        "slot MI vs hidden factors: selected {:.4}  random {:.4}  (n = {})",
        report.mi.selected_mean, report.mi.random_mean, report.mi.n
    );

    let statements = statement_rows(&cfg, &store, seed, &opts)?;
    write_report(&report, &statements, &args.out)?;
    println!("report written to {}", args.out.join("report.json").display());
    Ok(())
}

fn statement_rows(
    cfg: &RunConfig,
    store: &cplab_tensor::ParameterStore,
    seed: u64,
    opts: &EvalOptions,
) -> Result<Vec<cplab_harness::StatementRow>> {
    let mut rng = SeededRng::new(seed).fork("statement-dump");
    let evals = cplab_harness::eval_fresh_trajectories(
        cfg,
        store,
        opts.trajectories,
        opts.trajectory_length,
        &mut rng,
    )?;
    Ok(collect_statements(&evals))
}

fn cmd_statements(args: EvalArgs, invocation: &str) -> Result<()> {
    let cfg = load_config(&args.common.config)?;
    let seed = seed_of(&args.common, &cfg);
    let store = load_run_checkpoint(&args.out)?;
    let opts = eval_options(&args);
    manifest::write_manifest(&args.out, "statements", &cfg, seed, invocation)?;

    let rows = statement_rows(&cfg, &store, seed, &opts)?;
    let path = args.out.join("statements.tsv");
    let file = std::fs::File::create(&path)?;
    write_statements_tsv(&rows, std::io::BufWriter::new(file))?;

    for row in rows.iter().take(10) {
        println!("{}", row.utterance);
    }
    match resolve_statements(&rows) {
        Ok(res) => println!(
            "{} statements ({} resolved, {} came true), verifier AUC {:.4}",
            rows.len(),
            res.resolved,
            res.came_true,
            res.auc
        ),
        Err(err) => println!("{} statements; resolution skipped: {err}", rows.len()),
    }
    println!("full dump: {}", path.display());
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let cfg = load_config(&args.common.config)?;
    let seed = seed_of(&args.common, &cfg);
    let mut rng = SeededRng::new(seed).fork("oracle-cli");
    let horizon = cfg.train.horizon;

    let mut lines = vec!["state_id,pile,horizon,standing,probability".to_string()];
    for state_id in 0..args.states {
        let mut state = reset(&cfg.env, &mut rng)?;
        for _ in 0..rng.below(12) {
            state = step(&cfg.env, &state, &mut rng).0;
        }
        for pile in 0..cfg.env.piles {
            let p = oracle_fall_prob(&cfg.env, &state, pile, horizon)?;
            let standing = state.piles[pile].is_standing();
            lines.push(format!("{state_id},{pile},{horizon},{standing},{p:.6}"));
        }
    }
    let body = lines.join("\n") + "\n";
    match &args.out {
        Some(path) => {
            std::fs::write(path, body)?;
            println!("wrote {} states to {}", args.states, path.display());
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn cmd_baseline(args: BaselineArgs, invocation: &str) -> Result<()> {
    let mut cfg = load_config(&args.common.config)?;
    if let Some(steps) = args.steps {
        cfg.train.steps = steps;
    }
    let seed = seed_of(&args.common, &cfg);
    let out = args.out.unwrap_or_else(default_run_dir);
    manifest::write_manifest(&out, "baseline", &cfg, seed, invocation)?;

    println!("training pixel baseline for {} steps", cfg.train.steps);
    let (model, curve) = train_baseline(&cfg, seed)?;
    let final_loss = curve.last().copied().unwrap_or(f64::NAN);
    println!("final prediction loss {final_loss:.4}");

    let opts = EvalOptions::default();
    let mut rng = SeededRng::new(seed).fork("baseline-cli");
    let mut trajectories = Vec::with_capacity(opts.trajectories);
    for _ in 0..opts.trajectories {
        trajectories.push(sample_trajectory(&cfg.env, &mut rng, opts.trajectory_length)?);
    }
    let refs: Vec<&cplab_env::Trajectory> = trajectories.iter().collect();
    let reports = eval_baseline(&model, &cfg.env, &refs, cfg.train.horizon, &mut rng)?;
    for report in &reports {
        println!(
            "  pile {}  auc {:.4}  n {}  positives {}",
            report.pile, report.auc, report.n, report.n_pos
        );
    }

    let summary = serde_json::json!({
        "seed": seed,
        "steps": cfg.train.steps,
        "final_loss": final_loss,
        "loss_curve": curve,
        "reports": reports,
    });
    let path = out.join("baseline_report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
    println!("report written to {}", path.display());
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<()> {
    let report = run_gradient_suite(args.seed);
    println!(
        "{} primitives, max error {:.3e} (tolerance {:.0e})",
        report.primitives.len(),
        report.max_primitive_error(),
        cplab_harness::gradcheck::PRIMITIVE_TOLERANCE
    );
    println!(
        "{} composites, max error {:.3e} (tolerance {:.0e})",
        report.composites.len(),
        report.max_composite_error(),
        cplab_harness::gradcheck::COMPOSITE_TOLERANCE
    );
    println!("elapsed {:.1}s", report.elapsed_secs);
    if let Some(path) = &args.out {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
        println!("table written to {}", path.display());
    }
    if report.passed() {
        println!("gradient audit: pass");
        Ok(())
    } else {
        for entry in report.failures() {
            eprintln!("  over tolerance: {} at {:.3e}", entry.name, entry.max_error);
        }
        Err(HarnessError::Numerical("gradient audit failed".to_string()))
    }
}
