//! `ngc`: train, evaluate and inspect learned KV-cache eviction on toy tasks.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use ngc_core::harness::experiment::{run_eval, train_arm, warm_start, write_eval_outputs, write_training_outputs, Arm};
use ngc_core::harness::selftest::run_selftest;
use ngc_core::harness::ExperimentConfig;
use ngc_core::model::checkpoint;
use ngc_core::replay::{build_replay_masks, example_log, mask_grid, mask_pgm, EXAMPLE_SIZE};
use ngc_core::training::TrainMode;
use ngc_core::{NgcError, Result, RetentionLog};

#[derive(Parser, Debug)]
#[command(name = "ngc", version, about = "Learned KV-cache eviction on toy tasks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON experiment config; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config value by dotted path, e.g. `eviction.rate=0.25`.
    /// Values are parsed as JSON, falling back to a plain string.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    run_id: Option<String>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Warm-start a model (or load one) and train it with policy gradients.
    Train {
        #[arg(long, default_value = "ngc")]
        mode: TrainMode,
        /// Put the eviction-rate tag in every training prompt.
        #[arg(long)]
        interoception: bool,
        /// Sample each group's rate from the current stage ± one level.
        #[arg(long)]
        rate_spread: bool,
        /// Start from this checkpoint instead of a fresh warm start.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Overrides `train_steps`.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Evaluate a checkpoint over the configured scorers and rates.
    Eval(EvalArgs),
    /// Evaluate a checkpoint over an explicit list of eviction rates and
    /// print the CSV.
    Sweep {
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
    },
    /// Print the replay visibility grid of a retention log.
    InspectMasks {
        /// JSONL retention log; the built-in ten-token example when omitted.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Number of tokens covered by the log (required with `--log`).
        #[arg(long)]
        size: Option<usize>,
        #[arg(long, default_value_t = 0)]
        layer: usize,
        /// Emit a plain-text PGM image instead of the character grid.
        #[arg(long)]
        pgm: bool,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Append the rate tag to every prompt.
    #[arg(long)]
    tagged: bool,
    /// Comma-separated scorer names; overrides `eval_scorers`.
    #[arg(long, value_delimiter = ',')]
    scorers: Vec<String>,
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| NgcError::Config(format!("--set {key}: {part:?} is not inside an object")))?;
        if i + 1 == parts.len() {
            if !obj.contains_key(*part) {
                return Err(NgcError::Config(format!("--set {key}: unknown key {part:?}")));
            }
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .get_mut(*part)
            .ok_or_else(|| NgcError::Config(format!("--set {key}: unknown key {part:?}")))?;
    }
    Err(NgcError::Config("--set needs a key".into()))
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| NgcError::Io(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if !common.overrides.is_empty() {
        let mut doc: Value = serde_json::from_str(&cfg.to_json())?;
        for o in &common.overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| NgcError::Usage(format!("--set {o:?} is not KEY=VALUE")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, key, value)?;
        }
        cfg = ExperimentConfig::from_json(&doc.to_string())?;
    }
    cfg.apply_env()?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(r) = &common.run_id {
        cfg.run_id = r.clone();
    }
    if let Some(d) = &common.output_dir {
        cfg.output_dir = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_run_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.run_dir();
    fs::create_dir_all(&dir).map_err(|e| NgcError::Io(format!("{}: {e}", dir.display())))?;
    fs::write(dir.join("config.json"), cfg.to_json())?;
    Ok(dir)
}

fn parse_scorers(cfg: &mut ExperimentConfig, names: &[String]) -> Result<()> {
    if !names.is_empty() {
        cfg.eval_scorers = names.iter().map(|n| n.parse()).collect::<Result<_>>()?;
    }
    Ok(())
}

fn train(
    mut cfg: ExperimentConfig,
    mode: TrainMode,
    interoception: bool,
    rate_spread: bool,
    init: Option<&Path>,
    steps: Option<u64>,
) -> Result<()> {
    if let Some(s) = steps {
        cfg.train_steps = s;
    }
    let dir = prepare_run_dir(&cfg)?;
    let base = match init {
        Some(path) => checkpoint::load(path)?,
        None => {
            eprintln!("warm start: {} steps", cfg.sft.steps);
            let (params, losses) = warm_start(&cfg)?;
            let mut csv = String::from("step,loss\n");
            for (i, l) in losses.iter().enumerate() {
                csv.push_str(&format!("{i},{l}\n"));
            }
            fs::write(dir.join("warm_start.csv"), csv)?;
            checkpoint::save(&params, &dir.join("base.ckpt"))?;
            params
        }
    };
    if base.config.n_layers != cfg.eviction.layers {
        return Err(NgcError::Load(format!(
            "checkpoint has {} layers, config expects {}",
            base.config.n_layers, cfg.eviction.layers
        )));
    }
    let arm = Arm {
        mode,
        interoception,
        rate_spread,
    };
    let every = (cfg.train_steps / 10).max(1);
    let (params, metrics) = train_arm(&base, &cfg, arm, |m| {
        if m.step % every == 0 {
            eprintln!(
                "step {:>5}  reward {:.3}  grad {:.3}  peak {:.1}",
                m.step, m.mean_reward, m.grad_norm, m.mean_peak_cache
            );
        }
    })?;
    write_training_outputs(&dir, &metrics)?;
    checkpoint::save(&params, &dir.join("model.ckpt"))?;
    println!("{}", dir.display());
    Ok(())
}

fn eval(mut cfg: ExperimentConfig, args: &EvalArgs, rates: Option<&[f64]>) -> Result<()> {
    parse_scorers(&mut cfg, &args.scorers)?;
    let rates = rates.map(<[f64]>::to_vec).unwrap_or_else(|| cfg.eval_rates.clone());
    if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(NgcError::Usage("--eps values must lie in [0, 1]".into()));
    }
    cfg.eval_rates = rates.clone();
    cfg.validate()?;
    let params = checkpoint::load(&args.checkpoint)?;
    let dir = prepare_run_dir(&cfg)?;
    let report = run_eval(&params, &cfg, &rates, args.tagged)?;
    write_eval_outputs(&dir, &report)?;
    print!("{}", report.to_csv());
    Ok(())
}

fn inspect_masks(log: Option<&Path>, size: Option<usize>, layer: usize, pgm: bool) -> Result<()> {
    let (log, size) = match log {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| NgcError::Load(format!("{}: {e}", path.display())))?;
            let log = RetentionLog::read_jsonl(std::io::BufReader::new(file))?;
            let size = size.ok_or_else(|| NgcError::Usage("--log needs --size".into()))?;
            (log, size)
        }
        None => (example_log(), size.unwrap_or(EXAMPLE_SIZE)),
    };
    let layers = log.records.iter().map(|r| r.layer + 1).max().unwrap_or(1).max(layer + 1);
    let masks = build_replay_masks(&log, size, layers, None)?;
    let text = if pgm {
        mask_pgm(&masks, &log, layer)
    } else {
        mask_grid(&masks, &log, layer)
    };
    print!("{text}");
    Ok(())
}

fn selftest() -> Result<bool> {
    let checks = run_selftest();
    let mut out = std::io::stdout().lock();
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{status}  {:<34} {}", c.name, c.detail)?;
    }
    Ok(checks.iter().all(|c| c.passed))
}

/// Exit status for each diagnostic category.
fn exit_code(err: &NgcError) -> u8 {
    match err {
        NgcError::Usage(_) => 2,
        NgcError::Config(_) => 3,
        NgcError::Io(_) => 4,
        NgcError::Load(_) => 5,
        NgcError::Numeric(_) => 6,
        NgcError::Consistency(_) => 7,
        NgcError::Dimension(_) | NgcError::Domain(_) | NgcError::State(_) => 8,
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Command::InspectMasks { log, size, layer, pgm } = &cli.command {
        inspect_masks(log.as_deref(), *size, *layer, *pgm)?;
        return Ok(true);
    }
    if let Command::Selftest = cli.command {
        return selftest();
    }
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Train {
            mode,
            interoception,
            rate_spread,
            init,
            steps,
        } => train(cfg, mode, interoception, rate_spread, init.as_deref(), steps)?,
        Command::Eval(args) => eval(cfg, &args, None)?,
        Command::Sweep { eval: args, eps } => eval(cfg, &args, Some(&eps))?,
        Command::InspectMasks { .. } | Command::Selftest => unreachable!("handled above"),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("ngc: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
