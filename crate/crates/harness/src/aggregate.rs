//! Summaries over seeds: learning-curve bands, per-run maxima and the
//! distribution of the best episodes.

use std::collections::BTreeMap;

use crate::error::{HarnessError, Result};
use crate::metrics::MetricsRow;

/// Trailing window used to smooth learning curves.
pub const SMOOTHING_WINDOW: usize = 50;

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`
/// (position `q (n - 1)`).
pub fn percentile(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(HarnessError::Empty("percentile of no data"));
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(HarnessError::Empty("mean of no data"));
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Population standard deviation.
pub fn std(xs: &[f64]) -> Result<f64> {
    let m = mean(xs)?;
    Ok((xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt())
}

pub fn median(xs: &[f64]) -> Result<f64> {
    percentile(&sorted(xs), 0.5)
}

/// Trailing mean over the last `window` values (fewer at the start).
pub fn smooth(xs: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        acc += x;
        if i >= window {
            acc -= xs[i - window];
        }
        out.push(acc / (i + 1).min(window) as f64);
    }
    out
}

/// One seed's curve: cumulative frames and rewards, in episode order.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub seed: u64,
    pub frames: Vec<u64>,
    pub rewards: Vec<f64>,
}

impl Curve {
    pub fn smoothed(&self) -> Vec<f64> {
        smooth(&self.rewards, SMOOTHING_WINDOW)
    }

    /// Largest smoothed reward of the run.
    pub fn max_smoothed(&self) -> f64 {
        self.smoothed()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_smoothed(&self) -> f64 {
        self.smoothed().last().copied().unwrap_or(f64::NAN)
    }

    /// Cumulative frames at which the smoothed reward first reaches `level`.
    pub fn frames_to_reach(&self, level: f64) -> Option<u64> {
        self.smoothed()
            .iter()
            .position(|&r| r >= level)
            .map(|i| self.frames[i])
    }
}

/// Splits rows into per-seed curves, ordered by seed.
pub fn curves(rows: &[MetricsRow]) -> Result<Vec<Curve>> {
    if rows.is_empty() {
        return Err(HarnessError::Empty("no metrics rows"));
    }
    let mut by_seed: BTreeMap<u64, Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        by_seed.entry(r.seed).or_default().push(r);
    }
    Ok(by_seed
        .into_iter()
        .map(|(seed, mut rs)| {
            rs.sort_by_key(|r| r.episode);
            Curve {
                seed,
                frames: rs.iter().map(|r| r.frames).collect(),
                rewards: rs.iter().map(|r| r.reward).collect(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub frames: u64,
    pub mean: f64,
    pub std: f64,
    pub p20: f64,
    pub p80: f64,
}

/// Band of smoothed rewards across seeds at every episode index that all
/// seeds reached.
pub fn checkpoints(curves: &[Curve]) -> Result<Vec<Checkpoint>> {
    if curves.is_empty() {
        return Err(HarnessError::Empty("no curves"));
    }
    let smoothed: Vec<Vec<f64>> = curves.iter().map(Curve::smoothed).collect();
    let len = smoothed.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let xs: Vec<f64> = smoothed.iter().map(|s| s[i]).collect();
            let sorted = sorted(&xs);
            Ok(Checkpoint {
                frames: curves[0].frames[i],
                mean: mean(&xs)?,
                std: std(&xs)?,
                p20: percentile(&sorted, 0.2)?,
                p80: percentile(&sorted, 0.8)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopK {
    pub count: usize,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
}

/// Median and quartiles of the `k` largest values.
pub fn top_k(values: &[f64], k: usize) -> Result<TopK> {
    if values.is_empty() || k == 0 {
        return Err(HarnessError::Empty("top-k of no data"));
    }
    let s = sorted(values);
    let top = &s[s.len().saturating_sub(k)..];
    Ok(TopK {
        count: top.len(),
        median: percentile(top, 0.5)?,
        p25: percentile(top, 0.25)?,
        p75: percentile(top, 0.75)?,
    })
}

/// Human-readable summary of one experiment.
pub fn report(name: &str, rows: &[MetricsRow]) -> Result<String> {
    let cs = curves(rows)?;
    let bands = checkpoints(&cs)?;
    let maxima: Vec<f64> = cs.iter().map(Curve::max_smoothed).collect();
    let finals: Vec<f64> = cs.iter().map(Curve::final_smoothed).collect();
    let all: Vec<f64> = rows.iter().map(|r| r.reward).collect();
    let top = top_k(&all, 50)?;
    let mut out = format!(
        "# {name}: {} seeds, {} episodes each\n",
        cs.len(),
        bands.len()
    );
    out.push_str("frames,mean,std,p20,p80\n");
    let stride = (bands.len() / 20).max(1);
    let tail = if (bands.len() - 1) % stride == 0 {
        None
    } else {
        bands.last()
    };
    for b in bands.iter().step_by(stride).chain(tail) {
        out.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{:.4}\n",
            b.frames, b.mean, b.std, b.p20, b.p80
        ));
    }
    out.push_str(&format!(
        "final smoothed: mean {:.4} std {:.4}\nper-seed max smoothed: median {:.4}\ntop-{} rewards: median {} p25 {} p75 {}\n",
        mean(&finals)?,
        std(&finals)?,
        median(&maxima)?,
        top.count,
        top.median,
        top.p25,
        top.p75
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Rank-based percentile computed independently: the weighted average of
    /// the two order statistics around `q (n - 1)`.
    fn brute_percentile(xs: &[f64], q: f64) -> f64 {
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let target = q * (n - 1) as f64;
        let mut best = f64::NAN;
        for i in 0..n {
            for j in i..n {
                if i as f64 <= target && target <= j as f64 && j - i <= 1 {
                    let w = if j == i { 0.0 } else { target - i as f64 };
                    best = v[i] * (1.0 - w) + v[j] * w;
                }
            }
        }
        best
    }

    #[test]
    fn percentile_known_values() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&xs, 0.2).unwrap(), 1.8);
        assert_eq!(percentile(&xs, 0.8).unwrap(), 4.2);
        assert_eq!(percentile(&xs, 0.5).unwrap(), 3.0);
        assert_eq!(percentile(&[7.0], 0.3).unwrap(), 7.0);
        assert!(percentile(&[], 0.5).is_err());
    }

    #[test]
    fn single_seed_band_is_the_run() {
        let c = Curve {
            seed: 1,
            frames: vec![100, 200, 300],
            rewards: vec![-2.0, 0.0, 1.0],
        };
        let bands = checkpoints(std::slice::from_ref(&c)).unwrap();
        let s = c.smoothed();
        for (b, x) in bands.iter().zip(&s) {
            assert_eq!(b.mean, *x);
            assert_eq!(b.std, 0.0);
            assert_eq!((b.p20, b.p80), (*x, *x));
        }
        assert_eq!(s, vec![-2.0, -1.0, -1.0 / 3.0]);
    }

    #[test]
    fn constant_rewards_give_equal_percentiles() {
        let t = top_k(&[0.5; 80], 50).unwrap();
        assert_eq!((t.median, t.p25, t.p75, t.count), (0.5, 0.5, 0.5, 50));
    }

    #[test]
    fn smoothing_window_and_reach() {
        let xs: Vec<f64> = (0..120).map(|i| if i < 60 { -2.0 } else { 1.0 }).collect();
        let s = smooth(&xs, 50);
        assert_eq!(s[49], -2.0);
        assert_eq!(s[109], 1.0);
        assert!((s[84] - (25.0 * 1.0 + 25.0 * -2.0) / 50.0).abs() < 1e-12);
        let c = Curve {
            seed: 0,
            frames: (1..=120).map(|i| 100 * i).collect(),
            rewards: xs,
        };
        // Smoothed reward first reaches -0.5 once 25 of the last 50 are wins.
        assert_eq!(c.frames_to_reach(-0.5), Some(100 * 85));
        assert_eq!(c.frames_to_reach(2.0), None);
    }

    #[test]
    fn top_k_takes_the_largest() {
        let xs: Vec<f64> = (0..100).map(f64::from).collect();
        let t = top_k(&xs, 50).unwrap();
        assert_eq!(t.median, 74.5);
        assert_eq!(t.p25, 62.25);
        assert_eq!(t.p75, 86.75);
        assert_eq!(top_k(&xs[..10], 50).unwrap().count, 10);
    }

    #[test]
    fn report_lists_each_checkpoint_once() {
        for n in [1usize, 3, 20, 21, 45] {
            let rows: Vec<MetricsRow> = (0..n)
                .map(|i| MetricsRow {
                    experiment: "x".into(),
                    seed: 1,
                    episode: i,
                    frames: 100 * (i as u64 + 1),
                    reward: -1.0,
                    surrogate_pre: 0.0,
                    surrogate_post: 0.0,
                    entropy: 1.0,
                    accepted: true,
                })
                .collect();
            let text = report("x", &rows).unwrap();
            let frames: Vec<&str> = text
                .lines()
                .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
                .map(|l| l.split(',').next().unwrap())
                .collect();
            let mut unique = frames.clone();
            unique.dedup();
            assert_eq!(frames, unique, "n = {n}");
            assert_eq!(*frames.last().unwrap(), (100 * n).to_string());
        }
    }

    proptest! {
        #[test]
        fn percentile_matches_brute_force(
            xs in prop::collection::vec(-100.0f64..100.0, 1..40),
            q in 0.0f64..=1.0,
        ) {
            let got = percentile(&sorted(&xs), q).unwrap();
            let want = brute_percentile(&xs, q);
            prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }

        #[test]
        fn smoothing_stays_within_range(xs in prop::collection::vec(-5.0f64..2.0, 1..200)) {
            for s in smooth(&xs, SMOOTHING_WINDOW) {
                prop_assert!((-5.0 - 1e-9..=2.0 + 1e-9).contains(&s));
            }
        }
    }
}
