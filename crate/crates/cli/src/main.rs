use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use waterdist_core::eval::{
    aggregate_runs, run_episode, write_mean_series_csv, write_series_csv, write_summary_csv,
    Aggregate, Policy, SummaryRow,
};
use waterdist_core::learner::{train_observed, EpisodeRecord, TrainObserver};
use waterdist_core::{ExperimentConfig, PolicyKind, QModel};

/// Train and evaluate value-aligned water distribution policies.
#[derive(Debug, Parser)]
#[command(name = "waterdist", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the learner named by `policy_kind` and write the model as JSON.
    Train {
        #[command(flatten)]
        common: Common,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate one policy on the fixed scenario and, with runs > 0, on
    /// random initial states.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Model file, or `local` for the greedy-equity baseline.
        #[arg(long)]
        model: String,
        /// Output directory for the CSV files.
        #[arg(long)]
        out: PathBuf,
        /// Override the evaluation epsilon.
        #[arg(long = "eps-eval")]
        eps_eval: Option<f64>,
        /// Override the number of random initial states.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Evaluate several policies on shared random initial states.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Model file or `local`; repeat for each policy.
        #[arg(long = "model", required = true)]
        models: Vec<String>,
        /// Output directory for the CSV files.
        #[arg(long)]
        out: PathBuf,
        /// Evaluation epsilon; repeat to sweep several values.
        #[arg(long = "eps-eval")]
        eps_eval: Vec<f64>,
        /// Override the number of random initial states.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Print the effective configuration as JSON.
    DumpConfig {
        #[command(flatten)]
        common: Common,
        /// Write to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration; the built-in defaults when omitted.
    #[arg(long, env = "WATERDIST_CONFIG")]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train { common, out } => train(&common.load()?, &out),
        Command::Evaluate {
            common,
            model,
            out,
            eps_eval,
            runs,
        } => {
            let config = with_overrides(common.load()?, eps_eval, runs)?;
            evaluate(&config, &model, &out)
        }
        Command::Compare {
            common,
            models,
            out,
            eps_eval,
            runs,
        } => {
            let config = with_overrides(common.load()?, None, runs)?;
            compare(&config, &models, &eps_eval, &out)
        }
        Command::DumpConfig { common, out } => {
            let json = common.load()?.to_json()? + "\n";
            match out {
                Some(path) => {
                    fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?
                }
                None => io::stdout().write_all(json.as_bytes())?,
            }
            Ok(())
        }
    }
}

fn with_overrides(
    mut config: ExperimentConfig,
    eps_eval: Option<f64>,
    runs: Option<usize>,
) -> Result<ExperimentConfig> {
    if let Some(e) = eps_eval {
        config.eval.epsilon_eval = e;
    }
    if let Some(n) = runs {
        config.eval.n_runs = n;
    }
    config.validate()?;
    Ok(config)
}

struct Progress {
    every: usize,
}

impl TrainObserver for Progress {
    fn on_episode(&mut self, r: &EpisodeRecord) {
        let n = r.episode + 1;
        if !n.is_multiple_of(self.every) {
            return;
        }
        match r.lagrange {
            Some(l) => info!(
                "episode {n}: r_hat {:.4} lambda {:.5} v_hat {:.4} r_hat_episode {:.4}",
                r.avg_reward, l.lambda, l.v_hat, l.r_hat
            ),
            None => info!("episode {n}: r_hat {:.4}", r.avg_reward),
        }
    }
}

fn train(config: &ExperimentConfig, out: &Path) -> Result<()> {
    if config.policy_kind == PolicyKind::Local {
        bail!("local policy needs no training");
    }
    info!(
        "training {} for {} episodes (seed {})",
        config.policy_kind, config.hyper.episodes, config.seed
    );
    let model = train_observed(
        config.policy_kind,
        &config.env,
        &config.hyper,
        config.seed,
        &mut Progress { every: 1000 },
    )?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    model
        .save(out)
        .with_context(|| format!("writing model {}", out.display()))?;
    info!("model written to {}", out.display());
    Ok(())
}

/// A model file or the literal `local`.
enum Loaded {
    Local,
    Model(Box<QModel>),
}

impl Loaded {
    fn open(arg: &str, config: &ExperimentConfig) -> Result<Self> {
        if arg == PolicyKind::Local.name() {
            return Ok(Loaded::Local);
        }
        let model = QModel::load(arg).with_context(|| format!("loading model {arg}"))?;
        model
            .check_compatible(&config.env, Some(&config.hyper.level_params))
            .with_context(|| format!("model {arg} does not match the configuration"))?;
        Ok(Loaded::Model(Box::new(model)))
    }

    fn policy(&self) -> Policy<'_> {
        match self {
            Loaded::Local => Policy::Local,
            Loaded::Model(m) => Policy::Learned(m),
        }
    }
}

fn summary_row(
    policy: Policy<'_>,
    config: &ExperimentConfig,
    eps_eval: f64,
    score: f64,
    ratio: f64,
    length: f64,
) -> SummaryRow {
    SummaryRow {
        policy: policy.name().to_string(),
        eps_train: policy.epsilon_train(),
        eps_eval,
        tau: config.hyper.tau,
        score,
        violation_ratio: ratio,
        episode_length: length,
        seed: config.seed,
    }
}

fn aggregate_row(
    policy: Policy<'_>,
    config: &ExperimentConfig,
    eps_eval: f64,
    agg: &Aggregate,
) -> SummaryRow {
    summary_row(
        policy,
        config,
        eps_eval,
        agg.mean_score,
        agg.mean_violation_ratio,
        agg.mean_length,
    )
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn evaluate(config: &ExperimentConfig, arg: &str, out: &Path) -> Result<()> {
    let loaded = Loaded::open(arg, config)?;
    let policy = loaded.policy();
    let eps = config.eval.epsilon_eval;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let (traj, metrics) = run_episode(
        policy,
        &config.eval_env_fixed(),
        config.eval.initial_state.clone(),
        eps,
        config.hyper.tau,
    )?;
    write_series_csv(create(out, "series.csv")?, &traj, &metrics)?;
    let row = summary_row(
        policy,
        config,
        eps,
        metrics.score,
        metrics.violation_ratio,
        metrics.length as f64,
    );
    write_summary_csv(create(out, "summary.csv")?, std::slice::from_ref(&row))?;
    println!(
        "{} fixed scenario: score {:.4} violation_ratio {:.4} length {}",
        policy.name(),
        metrics.score,
        metrics.violation_ratio,
        metrics.length
    );

    if config.eval.n_runs > 0 {
        let agg = aggregate_runs(policy, &config.eval_env_random(), &config.eval_options())?;
        write_summary_csv(
            create(out, "aggregate.csv")?,
            &[aggregate_row(policy, config, eps, &agg)],
        )?;
        write_mean_series_csv(
            create(out, "mean_series.csv")?,
            &[(policy.name().to_string(), agg.mean_series.clone())],
        )?;
        println!(
            "{} over {} random starts: score {:.4} violation_ratio {:.4}",
            policy.name(),
            config.eval.n_runs,
            agg.mean_score,
            agg.mean_violation_ratio
        );
    }
    Ok(())
}

fn compare(config: &ExperimentConfig, args: &[String], sweep: &[f64], out: &Path) -> Result<()> {
    if config.eval.n_runs == 0 {
        bail!("compare needs at least one random initial state (set --runs)");
    }
    let sweep = if sweep.is_empty() {
        vec![config.eval.epsilon_eval]
    } else {
        sweep.to_vec()
    };
    if let Some(e) = sweep.iter().find(|e| e.is_nan() || **e < 0.0) {
        bail!("--eps-eval must be >= 0, got {e}");
    }
    let loaded = args
        .iter()
        .map(|s| Loaded::open(s, config))
        .collect::<Result<Vec<_>>>()?;
    let labels = column_labels(&loaded, args);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut rows = Vec::new();
    for &eps in &sweep {
        let mut opts = config.eval_options();
        opts.epsilon_eval = eps;
        let mut series = Vec::new();
        for (l, label) in loaded.iter().zip(&labels) {
            let policy = l.policy();
            let agg = aggregate_runs(policy, &config.eval_env_random(), &opts)?;
            println!(
                "{label} eps_eval {eps}: score {:.4} violation_ratio {:.4}",
                agg.mean_score, agg.mean_violation_ratio
            );
            rows.push(aggregate_row(policy, config, eps, &agg));
            series.push((label.clone(), agg.mean_series));
        }
        let name = if sweep.len() == 1 {
            "mean_series.csv".to_string()
        } else {
            format!("mean_series_eps{eps}.csv")
        };
        write_mean_series_csv(create(out, &name)?, &series)?;
    }
    write_summary_csv(create(out, "summary.csv")?, &rows)?;
    Ok(())
}

/// Policy names, falling back to the file stem when a name repeats.
fn column_labels(loaded: &[Loaded], args: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    loaded
        .iter()
        .zip(args)
        .map(|(l, arg)| {
            let name = l.policy().name().to_string();
            if seen.insert(name.clone()) {
                name
            } else {
                let stem = Path::new(arg)
                    .file_stem()
                    .map_or_else(|| arg.clone(), |s| s.to_string_lossy().into_owned());
                format!("{name}:{stem}")
            }
        })
        .collect()
}
