//! Acceptance run: prints one `PASS`/`FAIL` line per criterion.
//!
//! Criteria 1-3 and 7 are exact, statistical or single-episode checks and
//! decide the exit status. The training comparisons (4, 5, 6, 8, 9) are
//! reported at the reduced budget in [`Scale`]; they are printed but do not
//! fail the run unless `LFCS_ACCEPTANCE_STRICT=1`.
//!
//! `LFCS_ACCEPTANCE_SCALE=full` switches to the larger budget, and
//! `LFCS_ACCEPTANCE_ONLY=1,7` runs a subset.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use lfcs_core::plasticity::clip_ratio;
use lfcs_core::{replay_memory, run_episode, AgentPair, Hyper, ModelParams, Pong, PongConfig};
use lfcs_harness::aggregate::{checkpoints, curves, mean, median, std, top_k, Curve};
use lfcs_harness::config::{Algo, ExperimentConfig};
use lfcs_harness::oracle::{
    check_calibration, check_clip_bounds, check_determinism, check_finite_difference,
    check_lfcs_eprop_equivalence, check_score_function, check_softmax_entropy, check_state_ranges,
    check_td_telescoping, check_trace_streaming, timed, Check,
};
use lfcs_harness::run::{initial_weights, run_in_memory};
use lfcs_harness::MetricsRow;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SCORE_FUNCTION_SAMPLES: usize = 100_000;
const RANDOM_ROLLOUTS: u64 = 10_000;
/// Fraction of checkpoints, after the first tenth of training, at which
/// lf-cs must lead e-prop.
const LEAD_FRACTION: f64 = 0.8;
const REACH_LEVEL: f64 = -0.5;
const TOP_K: usize = 50;
const REPLAY_PASSES: usize = 50;
const NONDECREASING_FRACTION: f64 = 0.9;
/// Entropy floor as a fraction of `ln K`.
const ENTROPY_FLOOR: f64 = 0.1;
const ABLATION_WINS: usize = 4;

/// Training budget of the comparison criteria.
#[derive(Debug, Clone, Copy)]
struct Scale {
    neurons: usize,
    /// Episodes per seed on pong-100.
    episodes: usize,
    /// Episodes per seed on pong-200.
    episodes_200: usize,
    seeds: u64,
    seeds_200: u64,
}

impl Scale {
    fn from_env() -> Self {
        match std::env::var("LFCS_ACCEPTANCE_SCALE").as_deref() {
            Ok("full") => Scale {
                neurons: 500,
                episodes: 5000,
                episodes_200: 2500,
                seeds: 5,
                seeds_200: 4,
            },
            _ => Scale {
                neurons: 100,
                episodes: 600,
                episodes_200: 300,
                seeds: 5,
                seeds_200: 4,
            },
        }
    }

    fn base(&self, name: &str) -> ExperimentConfig {
        ExperimentConfig {
            name: name.into(),
            episodes: self.episodes,
            seeds: (1..=self.seeds).collect(),
            neurons: self.neurons,
            // Fresh moments each episode do not learn at this budget.
            persistent_optimizer: true,
            ..ExperimentConfig::default()
        }
    }
}

struct Verdict {
    id: u8,
    title: &'static str,
    passed: bool,
    gating: bool,
    detail: String,
    seconds: f64,
}

fn verdict(
    id: u8,
    title: &'static str,
    gating: bool,
    f: impl FnOnce() -> (bool, String),
) -> Verdict {
    let start = Instant::now();
    let (passed, detail) = f();
    let v = Verdict {
        id,
        title,
        passed,
        gating,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    };
    println!(
        "criterion {} {:<26} {} ({:.0}s){}: {}",
        v.id,
        v.title,
        if v.passed { "PASS" } else { "FAIL" },
        v.seconds,
        if v.gating { "" } else { " [reported]" },
        v.detail
    );
    v
}

fn train(cfg: &ExperimentConfig) -> Vec<MetricsRow> {
    run_in_memory(cfg).unwrap_or_else(|e| panic!("{}: {e}", cfg.name))
}

fn fmt(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

fn summarize(checks: &[Check]) -> (bool, String) {
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect();
    if failed.is_empty() {
        (true, format!("{} checks", checks.len()))
    } else {
        (false, failed.join("; "))
    }
}

fn oracle_battery() -> (bool, String) {
    let checks = [
        timed("trace streaming", check_trace_streaming),
        timed("readout finite difference", check_finite_difference),
        timed("td telescoping", check_td_telescoping),
        timed("clip bounds", || check_clip_bounds(clip_ratio)),
        timed("softmax and entropy", check_softmax_entropy),
        timed("spike and filter ranges", check_state_ranges),
        timed("lfcs vs eprop", check_lfcs_eprop_equivalence),
        timed("determinism", check_determinism),
    ];
    let total: f64 = checks.iter().map(|c| c.seconds).sum();
    let (ok, detail) = summarize(&checks);
    (ok && total < 60.0, format!("{detail}, {total:.2}s"))
}

fn outcome(o: Result<String, String>) -> (bool, String) {
    match o {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    }
}

fn paired_frames_to_reach(cs: &[Curve]) -> Vec<f64> {
    cs.iter()
        .map(|c| {
            c.frames_to_reach(REACH_LEVEL)
                .map_or(f64::INFINITY, |f| f as f64)
        })
        .collect()
}

fn lfcs_beats_eprop(scale: &Scale) -> (bool, String) {
    let lf = train(&scale.base("lfcs"));
    let ep = train(&ExperimentConfig {
        algo: Algo::Eprop,
        ..scale.base("eprop")
    });
    let (lf_c, ep_c) = (curves(&lf).unwrap(), curves(&ep).unwrap());
    let (lf_b, ep_b) = (checkpoints(&lf_c).unwrap(), checkpoints(&ep_c).unwrap());
    let start = lf_b.len() / 10;
    let lead = lf_b[start..]
        .iter()
        .zip(&ep_b[start..])
        .filter(|(a, b)| a.mean > b.mean)
        .count() as f64
        / (lf_b.len() - start) as f64;
    let lf_reach = median(&paired_frames_to_reach(&lf_c)).unwrap();
    let ep_reach = median(&paired_frames_to_reach(&ep_c)).unwrap();
    let faster = lf_reach < ep_reach;
    (
        lead >= LEAD_FRACTION && faster,
        format!(
            "lf-cs leads at {:.0}% of checkpoints (need {:.0}%); median frames to reach {REACH_LEVEL}: lf-cs {lf_reach}, e-prop {ep_reach}; final mean lf-cs {:.3} e-prop {:.3}",
            100.0 * lead,
            100.0 * LEAD_FRACTION,
            lf_b.last().unwrap().mean,
            ep_b.last().unwrap().mean,
        ),
    )
}

fn epsilon_peak(scale: &Scale) -> (bool, String) {
    let values = [0.01, 0.05, 0.2, 1.0];
    let medians: Vec<f64> = values
        .iter()
        .map(|&eps| {
            let rows = train(&ExperimentConfig {
                epsilon: eps,
                guard: true,
                ..scale.base(&format!("eps-{eps}"))
            });
            let maxima: Vec<f64> = curves(&rows)
                .unwrap()
                .iter()
                .map(Curve::max_smoothed)
                .collect();
            median(&maxima).unwrap()
        })
        .collect();
    let mid = medians[2];
    (
        mid >= medians[0] && mid >= medians[3],
        format!(
            "median max smoothed reward at eps {:?}: {}",
            values,
            fmt(&medians)
        ),
    )
}

fn replays_help(scale: &Scale) -> (bool, String) {
    let tops: Vec<f64> = [1usize, 3, 5]
        .iter()
        .map(|&r| {
            let rows = train(&ExperimentConfig {
                env: "pong-200".into(),
                replays: r,
                guard: true,
                episodes: scale.episodes_200,
                seeds: (1..=scale.seeds_200).collect(),
                ..scale.base(&format!("replays-{r}"))
            });
            let rewards: Vec<f64> = rows.iter().map(|r| r.reward).collect();
            top_k(&rewards, TOP_K).unwrap().median
        })
        .collect();
    (
        tops[0] <= tops[1] && tops[1] <= tops[2] && tops[2] > tops[0],
        format!(
            "top-{TOP_K} median reward at replays [1, 3, 5]: {}",
            fmt(&tops)
        ),
    )
}

fn replay_stability() -> (bool, String) {
    let params = ModelParams::default().with_neurons(200);
    let floor = ENTROPY_FLOOR * (params.n_actions as f64).ln();
    let mut notes = Vec::new();
    let mut ok = true;
    for seed in 1..=3u64 {
        let cfg = ExperimentConfig {
            neurons: params.n,
            ..ExperimentConfig::default()
        };
        let theta = initial_weights(&cfg, seed).unwrap();
        let mut env = Pong::new(PongConfig::pong100()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let buffer = run_episode(&theta, &mut env, seed, &mut rng, &params).unwrap();
        let replay = |epsilon: f64| {
            let hyper = Hyper {
                epsilon,
                ..Hyper::default()
            };
            let mut pair = AgentPair::new(theta.clone(), hyper).with_guard(true);
            replay_memory(&mut pair, &buffer, REPLAY_PASSES, &params).unwrap()
        };
        let tight = replay(0.05);
        let rising = tight
            .windows(2)
            .filter(|w| w[1].surrogate >= w[0].surrogate)
            .count() as f64
            / (tight.len() - 1) as f64;
        let tight_min = tight
            .iter()
            .map(|s| s.mean_entropy)
            .fold(f64::INFINITY, f64::min);
        let loose_min = replay(1.0)
            .iter()
            .map(|s| s.mean_entropy)
            .fold(f64::INFINITY, f64::min);
        ok &= rising >= NONDECREASING_FRACTION && tight_min >= floor && loose_min < floor;
        notes.push(format!(
            "seed {seed}: eps 0.05 non-decreasing {:.0}%, min entropy {tight_min:.3}; eps 1.0 min entropy {loose_min:.3}",
            100.0 * rising
        ));
    }
    (ok, format!("floor {floor:.3}; {}", notes.join("; ")))
}

fn eta_robust(scale: &Scale) -> (bool, String) {
    let eta0 = 1.5e-3;
    let bands: Vec<(f64, f64)> = [0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&m| {
            let rows = train(&ExperimentConfig {
                eta: m * eta0,
                ..scale.base(&format!("eta-{m}"))
            });
            let finals: Vec<f64> = curves(&rows)
                .unwrap()
                .iter()
                .map(Curve::final_smoothed)
                .collect();
            (mean(&finals).unwrap(), std(&finals).unwrap())
        })
        .collect();
    let lo = bands
        .iter()
        .map(|(m, s)| m - s)
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = bands
        .iter()
        .map(|(m, s)| m + s)
        .fold(f64::INFINITY, f64::min);
    let shown: Vec<String> = bands
        .iter()
        .map(|(m, s)| format!("{m:.3}±{s:.3}"))
        .collect();
    (
        lo <= hi,
        format!(
            "final smoothed at eta0 x [0.5, 1, 2, 4]: {}",
            shown.join(", ")
        ),
    )
}

fn recurrence_helps(scale: &Scale) -> (bool, String) {
    let with = curves(&train(&scale.base("recurrent"))).unwrap();
    let without = curves(&train(&ExperimentConfig {
        recurrent: false,
        ..scale.base("ablation")
    }))
    .unwrap();
    let a: Vec<f64> = with.iter().map(Curve::final_smoothed).collect();
    let b: Vec<f64> = without.iter().map(Curve::final_smoothed).collect();
    let wins = a.iter().zip(&b).filter(|(x, y)| x > y).count();
    (
        wins >= ABLATION_WINS,
        format!(
            "recurrent wins on {wins}/{} seeds (need {ABLATION_WINS}); final smoothed {} vs ablation {}",
            a.len(),
            fmt(&a),
            fmt(&b)
        ),
    )
}

fn main() -> ExitCode {
    // Under `cargo test` the binary also receives harness flags; only a
    // plain run or an explicit `acceptance` filter executes the criteria.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }

    let only: Option<BTreeSet<u8>> = std::env::var("LFCS_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: u8| only.as_ref().is_none_or(|set| set.contains(&id));
    let strict = std::env::var("LFCS_ACCEPTANCE_STRICT").as_deref() == Ok("1");
    let scale = Scale::from_env();
    println!("acceptance scale: {scale:?}");

    let mut verdicts = Vec::new();
    if wanted(1) {
        verdicts.push(verdict(1, "oracle battery", true, oracle_battery));
    }
    if wanted(2) {
        verdicts.push(verdict(2, "score-function mean", true, || {
            outcome(check_score_function(SCORE_FUNCTION_SAMPLES))
        }));
    }
    if wanted(3) {
        verdicts.push(verdict(3, "pong calibration", true, || {
            outcome(check_calibration(RANDOM_ROLLOUTS))
        }));
    }
    if wanted(4) {
        verdicts.push(verdict(4, "lf-cs vs e-prop", strict, || {
            lfcs_beats_eprop(&scale)
        }));
    }
    if wanted(5) {
        verdicts.push(verdict(5, "stiffness optimum", strict, || {
            epsilon_peak(&scale)
        }));
    }
    if wanted(6) {
        verdicts.push(verdict(6, "replay benefit", strict, || {
            replays_help(&scale)
        }));
    }
    if wanted(7) {
        verdicts.push(verdict(7, "replay stability", true, replay_stability));
    }
    if wanted(8) {
        verdicts.push(verdict(8, "learning-rate robustness", strict, || {
            eta_robust(&scale)
        }));
    }
    if wanted(9) {
        verdicts.push(verdict(9, "recurrence ablation", strict, || {
            recurrence_helps(&scale)
        }));
    }

    let passed = verdicts.iter().filter(|v| v.passed).count();
    let blocking: Vec<u8> = verdicts
        .iter()
        .filter(|v| v.gating && !v.passed)
        .map(|v| v.id)
        .collect();
    println!("acceptance: {passed}/{} criteria passed", verdicts.len());
    if blocking.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing gating criteria {blocking:?}");
        ExitCode::FAILURE
    }
}
