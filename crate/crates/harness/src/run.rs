//! Seeded training runs.
//!
//! A seed fixes the initial weights, the action-sampling stream and the
//! serve sequence of every episode, independently of the learning settings,
//! so runs that differ only in a swept value are paired.

use std::path::PathBuf;

use lfcs_core::controller::{lfcs_episode, EpisodeReport, EpropAgent};
use lfcs_core::{AgentPair, Hyper, ModelParams, NetworkWeights, Pong};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Algo, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::metrics::{self, MetricsRow};

const ACTION_STREAM: u64 = 0x5851_f42d_4c95_7f2d;

/// Environment seed of `episode` in the run seeded with `seed`.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    // splitmix64 of the pair
    let mut z = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(episode as u64)
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn model_params(cfg: &ExperimentConfig) -> ModelParams<f64> {
    ModelParams::default().with_neurons(cfg.neurons)
}

pub fn hyper(cfg: &ExperimentConfig) -> Hyper<f64> {
    Hyper {
        epsilon: cfg.epsilon,
        lambda_c: cfg.lambda_c,
        eta: cfg.eta,
    }
}

pub fn initial_weights(cfg: &ExperimentConfig, seed: u64) -> Result<NetworkWeights<f64>> {
    let w = NetworkWeights::init(&model_params(cfg), cfg.sigma_rec, seed)?;
    Ok(if cfg.recurrent {
        w
    } else {
        w.without_recurrence()
    })
}

fn row(
    cfg: &ExperimentConfig,
    seed: u64,
    episode: usize,
    frames: u64,
    r: &EpisodeReport<f64>,
) -> MetricsRow {
    MetricsRow {
        experiment: cfg.name.clone(),
        seed,
        episode,
        frames,
        reward: r.reward,
        surrogate_pre: r.surrogate_pre,
        surrogate_post: r.surrogate_post,
        entropy: r.mean_entropy,
        accepted: r.accepted,
    }
    .canonical()
}

/// Trains one seed and returns one row per episode.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    let params = model_params(cfg);
    let hyper = hyper(cfg);
    let mut env = Pong::new(cfg.pong()?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ACTION_STREAM);
    let weights = initial_weights(cfg, seed)?;
    let mut rows = Vec::with_capacity(cfg.episodes);
    let mut frames = 0u64;
    match cfg.algo {
        Algo::Lfcs => {
            let mut pair = AgentPair::new(weights, hyper)
                .with_replays(cfg.replays)
                .with_guard(cfg.guard)
                .with_persistent_optimizer(cfg.persistent_optimizer);
            for ep in 0..cfg.episodes {
                let (_, report) = lfcs_episode(
                    &mut pair,
                    &mut env,
                    episode_seed(seed, ep),
                    &mut rng,
                    &params,
                )?;
                frames += report.frames as u64;
                rows.push(row(cfg, seed, ep, frames, &report));
            }
        }
        Algo::Eprop => {
            let mut agent =
                EpropAgent::new(weights, hyper).with_persistent_optimizer(cfg.persistent_optimizer);
            for ep in 0..cfg.episodes {
                let (_, report) =
                    agent.episode(&mut env, episode_seed(seed, ep), &mut rng, &params)?;
                frames += report.frames as u64;
                rows.push(row(cfg, seed, ep, frames, &report));
            }
        }
    }
    Ok(rows)
}

/// Trains every seed of `cfg` in parallel. Rows are ordered by the seed
/// list, then by episode.
pub fn run_in_memory(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    let per_seed: Vec<Vec<MetricsRow>> = cfg
        .seeds
        .par_iter()
        .map(|&s| run_seed(cfg, s))
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub seed_files: Vec<PathBuf>,
    pub merged: PathBuf,
    pub config_file: PathBuf,
    pub rows: Vec<MetricsRow>,
}

/// Runs `cfg` and writes `<out>/<name>/seed-<s>.csv`, the merged
/// `<out>/<name>/metrics.csv` and the full configuration `run.config`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let dir = cfg.out.join(&cfg.name);
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(dir.clone(), e))?;
    let config_file = dir.join("run.config");
    std::fs::write(&config_file, cfg.to_text())
        .map_err(|e| HarnessError::io(config_file.clone(), e))?;

    let rows = run_in_memory(cfg)?;
    let mut seed_files = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let path = dir.join(format!("seed-{seed}.csv"));
        let mine: Vec<MetricsRow> = rows.iter().filter(|r| r.seed == seed).cloned().collect();
        metrics::write_file(&path, &mine)?;
        seed_files.push(path);
    }
    let merged = dir.join("metrics.csv");
    metrics::write_file(&merged, &rows)?;
    Ok(RunOutput {
        dir,
        seed_files,
        merged,
        config_file,
        rows,
    })
}
