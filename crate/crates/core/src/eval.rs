//! Greedy evaluation of the local baseline and of trained models: single
//! episodes, aggregates over random initial states, series normalisation
//! and CSV export.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::admissibility::{
    admissible_subset, is_violation, local_choice, score_actions, ScoredAction,
};
use crate::env::{sample_initial, Action, EnvConfig, Episode, WorldState};
use crate::error::{Error, Result};
use crate::learner::QModel;

/// A policy under evaluation. Evaluation never explores.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'m> {
    Local,
    Learned(&'m QModel),
}

impl Policy<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Local => "local",
            Policy::Learned(m) => m.kind.name(),
        }
    }

    /// Epsilon used during training; the local policy behaves as epsilon = 0.
    pub fn epsilon_train(&self) -> f64 {
        match self {
            Policy::Local => 0.0,
            Policy::Learned(m) => m.hyper.epsilon,
        }
    }

    /// Pick an action from the scored legal set. Learned policies choose
    /// within the `epsilon_eval`-admissible subset.
    pub fn choose(&self, state: &WorldState, scored: &[ScoredAction], epsilon_eval: f64) -> Action {
        match self {
            Policy::Local => local_choice(scored).expect("non-empty action set").action,
            Policy::Learned(m) => m
                .choose(&m.key(state), &admissible_subset(scored, epsilon_eval))
                .expect("non-empty action set"),
        }
    }
}

/// Per-step record of one evaluation episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    /// Alignment of each successor state.
    pub rewards: Vec<f64>,
    pub violations: Vec<bool>,
    pub actions: Vec<Action>,
    /// Successor states, aligned with `rewards`.
    pub states: Vec<WorldState>,
    pub truncated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// Mean reward over the path.
    pub score: f64,
    pub violation_ratio: f64,
    pub violations: usize,
    pub length: usize,
    pub final_distribution: Vec<f64>,
    pub running_average: Vec<f64>,
}

impl RunMetrics {
    pub fn from_series(rewards: &[f64], violations: &[bool], final_distribution: Vec<f64>) -> Self {
        let length = rewards.len();
        let count = violations.iter().filter(|&&v| v).count();
        let running_average = running_average(rewards);
        RunMetrics {
            score: running_average.last().copied().unwrap_or(0.0),
            violation_ratio: if length == 0 {
                0.0
            } else {
                count as f64 / length as f64
            },
            violations: count,
            length,
            final_distribution,
            running_average,
        }
    }
}

/// Prefix means: element `k` is the mean of `rewards[..=k]`.
pub fn running_average(rewards: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    rewards
        .iter()
        .enumerate()
        .map(|(i, r)| {
            sum += r;
            sum / (i + 1) as f64
        })
        .collect()
}

/// Run `policy` greedily from `initial` until the episode ends.
pub fn run_episode(
    policy: Policy<'_>,
    config: &EnvConfig,
    initial: WorldState,
    epsilon_eval: f64,
    tau: f64,
) -> Result<(Trajectory, RunMetrics)> {
    let mut env = Episode::start_from(config, initial.clone())?;
    let mut traj = Trajectory::default();
    while !env.is_done() {
        let scored = score_actions(env.state(), config)?;
        let action = policy.choose(env.state(), &scored, epsilon_eval);
        let out = env.step_trusted(&action)?;
        traj.rewards.push(out.reward);
        traj.violations.push(is_violation(out.reward, tau));
        traj.actions.push(action);
        traj.states.push(out.next_state);
    }
    traj.truncated = env.is_truncated();
    let final_distribution = traj
        .states
        .last()
        .map_or_else(|| initial.levels.clone(), |s| s.levels.clone());
    let metrics = RunMetrics::from_series(&traj.rewards, &traj.violations, final_distribution);
    Ok((traj, metrics))
}

/// Re-apply a logged action sequence and return the reward series.
pub fn replay(config: &EnvConfig, initial: WorldState, actions: &[Action]) -> Result<Vec<f64>> {
    let mut env = Episode::start_from(config, initial)?;
    actions
        .iter()
        .map(|a| env.step(a).map(|o| o.reward))
        .collect()
}

/// Crop every series to `floor(1.2 * reference_len)` (when given), then pad
/// each one with its last value up to the longest cropped length.
pub fn normalize_series(
    series: &[Vec<f64>],
    reference_len: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    if series.is_empty() {
        return Err(Error::EmptyInput("no series to normalise"));
    }
    if series.iter().any(Vec::is_empty) {
        return Err(Error::EmptyInput("series must be non-empty"));
    }
    let cap = reference_len.map(|r| r * 6 / 5);
    let cropped: Vec<&[f64]> = series
        .iter()
        .map(|s| match cap {
            Some(c) => &s[..s.len().min(c.max(1))],
            None => &s[..],
        })
        .collect();
    let target = cropped.iter().map(|s| s.len()).max().unwrap_or(0);
    Ok(cropped
        .into_iter()
        .map(|s| {
            let mut out = s.to_vec();
            out.resize(target, *s.last().expect("non-empty"));
            out
        })
        .collect())
}

/// Element-wise mean of equal-length series.
pub fn mean_of_series(series: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = series.first() else {
        return Vec::new();
    };
    let n = series.len() as f64;
    (0..first.len())
        .map(|i| series.iter().map(|s| s[i]).sum::<f64>() / n)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub n_runs: usize,
    pub seed: u64,
    pub epsilon_eval: f64,
    pub tau: f64,
    /// Start of the reference run whose length sets the crop for the mean
    /// series. `None` disables cropping.
    pub reference_start: Option<WorldState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub mean_series: Vec<f64>,
    pub mean_score: f64,
    pub mean_violation_ratio: f64,
    pub mean_length: f64,
    pub reference_length: Option<usize>,
    pub runs: Vec<RunMetrics>,
}

/// Initial states for an aggregate evaluation. Depends only on the seed and
/// the reset distribution, so every policy sees the same starts.
pub fn initial_states(config: &EnvConfig, n_runs: usize, seed: u64) -> Vec<WorldState> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    (0..n_runs)
        .map(|_| {
            let mut rng = ChaCha8Rng::seed_from_u64(master.gen());
            sample_initial(config, &mut rng)
        })
        .collect()
}

/// Evaluate `policy` from `opts.n_runs` random initial states. Metrics are
/// averages of per-run values on the original lengths; only the mean series
/// is built from normalised series.
pub fn aggregate_runs(
    policy: Policy<'_>,
    config: &EnvConfig,
    opts: &EvalOptions,
) -> Result<Aggregate> {
    if opts.n_runs == 0 {
        return Err(Error::EmptyInput("n_runs must be at least 1"));
    }
    let starts = initial_states(config, opts.n_runs, opts.seed);
    let results: Vec<(Vec<f64>, RunMetrics)> = starts
        .into_par_iter()
        .map(|s| {
            run_episode(policy, config, s, opts.epsilon_eval, opts.tau).map(|(t, m)| (t.rewards, m))
        })
        .collect::<Result<_>>()?;

    let reference_length = match &opts.reference_start {
        Some(s) => Some(
            run_episode(policy, config, s.clone(), opts.epsilon_eval, opts.tau)?
                .0
                .len(),
        ),
        None => None,
    };
    // Zero-length runs (start already past the total) carry no series.
    let series: Vec<Vec<f64>> = results
        .iter()
        .filter(|(r, _)| !r.is_empty())
        .map(|(r, _)| r.clone())
        .collect();
    let mean_series = if series.is_empty() {
        Vec::new()
    } else {
        mean_of_series(&normalize_series(&series, reference_length)?)
    };

    let n = results.len() as f64;
    let runs: Vec<RunMetrics> = results.into_iter().map(|(_, m)| m).collect();
    Ok(Aggregate {
        mean_series,
        mean_score: runs.iter().map(|m| m.score).sum::<f64>() / n,
        mean_violation_ratio: runs.iter().map(|m| m.violation_ratio).sum::<f64>() / n,
        mean_length: runs.iter().map(|m| m.length as f64).sum::<f64>() / n,
        reference_length,
        runs,
    })
}

/// One line of a summary CSV. Column order is fixed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub policy: String,
    pub eps_train: f64,
    pub eps_eval: f64,
    pub tau: f64,
    pub score: f64,
    pub violation_ratio: f64,
    pub episode_length: f64,
    pub seed: u64,
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "policy",
            "eps_train",
            "eps_eval",
            "tau",
            "score",
            "violation_ratio",
            "episode_length",
            "seed",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-step CSV: `step, reward, running_average, violation, position, load,
/// x0..x{V-1}`. Steps are numbered from 1.
pub fn write_series_csv<W: Write>(out: W, traj: &Trajectory, metrics: &RunMetrics) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let villages = traj.states.first().map_or(0, |s| s.levels.len());
    let mut header: Vec<String> = [
        "step",
        "reward",
        "running_average",
        "violation",
        "position",
        "load",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..villages).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for (i, state) in traj.states.iter().enumerate() {
        let mut row = vec![
            (i + 1).to_string(),
            traj.rewards[i].to_string(),
            metrics.running_average[i].to_string(),
            u8::from(traj.violations[i]).to_string(),
            state.position.to_string(),
            state.load.to_string(),
        ];
        row.extend(state.levels.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean series of several policies side by side: `step, <name>...`.
pub fn write_mean_series_csv<W: Write>(out: W, named: &[(String, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string()];
    header.extend(named.iter().map(|(n, _)| n.clone()));
    w.write_record(&header)?;
    let len = named.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    for i in 0..len {
        let mut row = vec![(i + 1).to_string()];
        row.extend(
            named
                .iter()
                .map(|(_, s)| s.get(i).map_or_else(String::new, f64::to_string)),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
