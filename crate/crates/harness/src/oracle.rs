//! Battery of independent numerical checks on the learning machinery.
//! Each check computes its expectation a second, simpler way (unrolled
//! sums, finite differences, sampling, brute force) and compares.

use std::time::Instant;

use lfcs_core::plasticity::{
    clip_ratio, discounted_return, grad_eprop, grad_lfcs, td_error, Gradients, TraceState,
};
use lfcs_core::pong::{meets_targets, random_episode, SCORE_TARGETS};
use lfcs_core::rsn::pseudo_derivative_at;
use lfcs_core::{
    entropy, policy_with_value, sample_action, softmax, surrogate_loss, AgentPair, EpisodeBuffer,
    Hyper, ModelParams, NetworkState, NetworkWeights, Pong, PongConfig, StepRecord,
};
use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct OracleReport {
    pub checks: Vec<Check>,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{} {:<28} {:>7.3}s  {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.seconds,
                c.detail
            ));
        }
        out
    }
}

/// Outcome of a single check: `Ok(detail)` or `Err(detail)`.
pub type Outcome = std::result::Result<String, String>;

/// Runs one check and records its outcome and wall time.
pub fn timed(name: &'static str, f: impl FnOnce() -> Outcome) -> Check {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    Check {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn max_abs(a: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let scale = max_abs(want.iter().copied()).max(f64::MIN_POSITIVE);
    max_abs(got.iter().zip(want).map(|(a, b)| a - b)) / scale
}

pub fn toy_params(n: usize) -> ModelParams<f64> {
    ModelParams::default().with_neurons(n)
}

pub fn toy_weights(
    params: &ModelParams<f64>,
    readout_scale: f64,
    seed: u64,
) -> NetworkWeights<f64> {
    let mut w = NetworkWeights::init(params, 1.0, seed).expect("valid toy parameters");
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    w.a_pi = Array2::from_shape_fn((params.n_actions, params.n), |_| {
        readout_scale * (rng.random::<f64>() - 0.5)
    });
    w
}

/// Rolls `theta` over a smooth input sequence of length `t`, sampling
/// actions from its policy; every third frame carries a `+-1` reward.
pub fn toy_episode(
    theta: &NetworkWeights<f64>,
    params: &ModelParams<f64>,
    t: usize,
    seed: u64,
) -> EpisodeBuffer<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = NetworkState::new(params);
    let mut input = Array1::zeros(params.n);
    let mut buf = EpisodeBuffer::new(seed);
    for frame in 0..t {
        let x = frame as f64 * 0.37 + seed as f64 * 0.1;
        let xi = Array1::from(vec![
            0.5 + 0.4 * x.sin(),
            0.5 + 0.4 * (1.3 * x).cos(),
            0.3,
            (frame % 7) as f64 / 7.0,
        ]);
        st.advance(theta, params, xi.view(), &mut input)
            .expect("toy dynamics stay finite");
        let out = policy_with_value(&theta.a_pi, &theta.c_v, st.s_hat.view()).expect("toy readout");
        let action = sample_action(out.pi.view(), &mut rng).expect("toy policy");
        let reward = if frame % 3 == 2 {
            if action == frame % 2 {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        };
        buf.push(StepRecord {
            xi,
            action,
            reward,
            pi_ref: Some(out.pi),
            done: frame + 1 == t,
        });
    }
    buf
}

/// Streaming traces against the unrolled double sums
/// `sum_{t' <= t} gamma^(t - t') (...)` on random inputs.
pub fn check_trace_streaming() -> Outcome {
    let (k, n, t_len, gamma) = (3, 4, 10, 0.9);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut frames = Vec::new();
    let mut tr = TraceState::new(k, n, gamma, true, true);
    let mut worst: f64 = 0.0;
    for t in 0..t_len {
        let pi = softmax(Array1::from_shape_fn(k, |_| rng.random_range(-1.0..1.0)).view());
        let p = Array1::from_shape_fn(n, |_| rng.random_range(0.0..5.0));
        let e = Array1::from_shape_fn(n, |_| rng.random::<f64>());
        let s = Array1::from_shape_fn(n, |_| rng.random::<f64>());
        let rho = rng.random_range(0.8..1.2);
        let a = rng.random_range(0..k);
        tr.update(rho, a, pi.view(), p.view(), e.view(), s.view())
            .map_err(|e| e.to_string())?;
        frames.push((rho, a, pi, p, e, s));

        let mut e_want = Array3::<f64>::zeros((k, n, n));
        let mut g_want = Array2::<f64>::zeros((k, n));
        let mut h_want = Array2::<f64>::zeros((n, n));
        let mut hv_want = Array1::<f64>::zeros(n);
        for (tp, (rho, a, pi, p, e, s)) in frames.iter().enumerate() {
            let w = gamma.powi((t - tp) as i32);
            for kk in 0..k {
                let c = rho * (if kk == *a { 1.0 } else { 0.0 } - pi[kk]);
                for i in 0..n {
                    g_want[[kk, i]] += w * c * s[i];
                    for j in 0..n {
                        e_want[[kk, i, j]] += w * c * p[i] * e[j];
                    }
                }
            }
            for i in 0..n {
                hv_want[i] += w * s[i];
                for j in 0..n {
                    h_want[[i, j]] += w * p[i] * e[j];
                }
            }
        }
        let pairs: [(&[f64], &[f64]); 4] = [
            (
                tr.e_pol.as_ref().unwrap().as_slice().unwrap(),
                e_want.as_slice().unwrap(),
            ),
            (tr.g.as_slice().unwrap(), g_want.as_slice().unwrap()),
            (
                tr.h_mat.as_ref().unwrap().as_slice().unwrap(),
                h_want.as_slice().unwrap(),
            ),
            (
                tr.h_vec.as_ref().unwrap().as_slice().unwrap(),
                hv_want.as_slice().unwrap(),
            ),
        ];
        for (got, want) in pairs {
            worst = worst.max(rel_err(got, want));
        }
    }
    if worst <= 1e-12 {
        Ok(format!("max relative error {worst:.2e}"))
    } else {
        Err(format!("max relative error {worst:.2e} > 1e-12"))
    }
}

/// Summed clipped-ratio readout gradient of `theta` on a stored episode.
pub fn summed_readout_gradient(
    theta: &NetworkWeights<f64>,
    buf: &EpisodeBuffer<f64>,
    eps: f64,
    params: &ModelParams<f64>,
) -> Gradients<f64> {
    let (k, n) = (params.n_actions, params.n);
    let mut tr = TraceState::new(k, n, params.gamma, theta.trainable_recurrent, false);
    let mut total = Gradients::zeros(k, n, theta.trainable_recurrent, false);
    let mut st = NetworkState::new(params);
    let mut input = Array1::zeros(n);
    for rec in &buf.records {
        st.advance(theta, params, rec.xi.view(), &mut input)
            .expect("finite replay");
        let out = policy_with_value(&theta.a_pi, &theta.c_v, st.s_hat.view()).expect("readout");
        let rho = out.pi[rec.action] / rec.pi_ref.as_ref().expect("reference stored")[rec.action];
        tr.update(
            clip_ratio(rho, eps),
            rec.action,
            out.pi.view(),
            st.pseudo_derivative(params).view(),
            st.e.view(),
            st.s_hat.view(),
        )
        .expect("trace update");
        total.add_assign(&grad_lfcs(&tr, rec.reward, &theta.a_pi));
    }
    total
}

/// Readout gradient against central finite differences of the clipped
/// surrogate (N=5, K=3, T=10, no clip binding).
pub fn check_finite_difference() -> Outcome {
    let p = toy_params(5);
    let theta_ref = toy_weights(&p, 2.0, 3);
    let buf = toy_episode(&theta_ref, &p, 10, 11);
    let mut theta = theta_ref.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    theta
        .a_pi
        .mapv_inplace(|a| a + 0.3 * (rng.random::<f64>() - 0.5));
    let eps = 10.0;
    let analytic = summed_readout_gradient(&theta, &buf, eps, &p).a_pi / buf.len() as f64;
    let h = 1e-6;
    let mut fd = Array2::<f64>::zeros(analytic.dim());
    for ((k, i), slot) in fd.indexed_iter_mut() {
        let mut up = theta.clone();
        up.a_pi[[k, i]] += h;
        let mut down = theta.clone();
        down.a_pi[[k, i]] -= h;
        let f = |w: &NetworkWeights<f64>| surrogate_loss(&buf, w, eps, &p).expect("surrogate");
        *slot = (f(&up) - f(&down)) / (2.0 * h);
    }
    let err = rel_err(fd.as_slice().unwrap(), analytic.as_slice().unwrap());
    if err <= 1e-5 {
        Ok(format!("relative error {err:.2e}"))
    } else {
        Err(format!("relative error {err:.2e} > 1e-5"))
    }
}

/// `sum_t gamma^t delta_t = R_0 - V_0` with `V_T = 0`.
pub fn check_td_telescoping() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gamma: f64 = 0.98;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let t = rng.random_range(1..60);
        let r: Vec<f64> = (0..t).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..t).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut acc = 0.0;
        for i in 0..t {
            let next = if i + 1 < t { v[i + 1] } else { 0.0 };
            acc += gamma.powi(i as i32) * td_error(r[i], v[i], next, gamma);
        }
        let want = discounted_return(&r, gamma).map_err(|e| e.to_string())?[0] - v[0];
        worst = worst.max((acc - want).abs() / want.abs().max(1.0));
    }
    if worst <= 1e-12 {
        Ok(format!("max error {worst:.2e}"))
    } else {
        Err(format!("max error {worst:.2e} > 1e-12"))
    }
}

/// Monte-Carlo mean of `V d log pi / dA` over actions drawn from a frozen
/// toy network; every coordinate must lie within 4 standard errors of zero.
pub fn check_score_function(samples: usize) -> Outcome {
    let p = toy_params(5);
    let theta = toy_weights(&p, 2.0, 21);
    let buf = toy_episode(&theta, &p, 10, 0);
    let mut st = NetworkState::new(&p);
    let mut input = Array1::zeros(p.n);
    let c = Array1::from_elem(p.n, 0.7);
    let mut frames = Vec::new();
    for rec in &buf.records {
        st.advance(&theta, &p, rec.xi.view(), &mut input)
            .map_err(|e| e.to_string())?;
        let out = policy_with_value(&theta.a_pi, &c, st.s_hat.view()).map_err(|e| e.to_string())?;
        frames.push((st.s_hat.clone(), out));
    }
    let (k, n) = (p.n_actions, p.n);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut sum = Array2::<f64>::zeros((k, n));
    let mut sq = Array2::<f64>::zeros((k, n));
    for m in 0..samples {
        let (s_hat, out) = &frames[m % frames.len()];
        let a = sample_action(out.pi.view(), &mut rng).map_err(|e| e.to_string())?;
        for kk in 0..k {
            let one = if kk == a { 1.0 } else { 0.0 };
            for i in 0..n {
                let x = out.v * (one - out.pi[kk]) * s_hat[i];
                sum[[kk, i]] += x;
                sq[[kk, i]] += x * x;
            }
        }
    }
    let total = samples as f64;
    let mut worst: f64 = 0.0;
    let mut live = 0;
    for (s, q) in sum.iter().zip(&sq) {
        if *q == 0.0 {
            continue;
        }
        live += 1;
        let mean = s / total;
        let se = ((q / total - mean * mean) / total).sqrt();
        worst = worst.max(mean.abs() / se);
    }
    if live == 0 {
        return Err("no active coordinates".into());
    }
    if worst <= 4.0 {
        Ok(format!("{live} coordinates, max |mean|/se {worst:.2}"))
    } else {
        Err(format!("max |mean|/se {worst:.2} > 4"))
    }
}

/// Clip stays inside `[1 - eps, 1 + eps]` and is the identity inside it.
pub fn check_clip_bounds(clip: impl Fn(f64, f64) -> f64) -> Outcome {
    for &eps in &[0.0, 0.01, 0.05, 0.2, 1.0, 3.0] {
        for i in 0..=400 {
            let rho = i as f64 * 0.01;
            let c = clip(rho, eps);
            if c < 1.0 - eps - 1e-15 || c > 1.0 + eps + 1e-15 {
                return Err(format!("clip({rho}, {eps}) = {c} outside band"));
            }
            if (rho - 1.0).abs() <= eps && c != rho {
                return Err(format!("clip({rho}, {eps}) = {c} altered an in-band ratio"));
            }
        }
    }
    Ok("6 stiffness values x 401 ratios".into())
}

pub fn check_softmax_entropy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let k = rng.random_range(1..8);
        let y = Array1::from_shape_fn(k, |_| rng.random_range(-50.0..50.0));
        let pi = softmax(y.view());
        if (pi.sum() - 1.0f64).abs() > 1e-12 || pi.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(format!("softmax not normalized for {y}"));
        }
        let shift = rng.random_range(-100.0..100.0);
        let shifted = softmax(y.mapv(|v| v + shift).view());
        if max_abs((&shifted - &pi).iter().copied()) > 1e-12 {
            return Err("softmax not shift invariant".into());
        }
        let h = entropy(pi.view());
        if !(h >= -1e-12 && h <= (k as f64).ln() + 1e-12) {
            return Err(format!("entropy {h} outside [0, ln {k}]"));
        }
    }
    Ok("1000 random logit vectors".into())
}

/// Spikes binary, filters and spike response in `[0, 1]`, pseudo-derivative
/// in `(0, 1 / (4 dv)]`, over a long driven simulation.
pub fn check_state_ranges() -> Outcome {
    let p = toy_params(50);
    let w = NetworkWeights::init(&p, 1.0, 4).map_err(|e| e.to_string())?;
    let mut st = NetworkState::new(&p);
    let mut input = Array1::zeros(p.n);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let peak = 1.0 / (4.0 * p.delta_v);
    let mut spikes = 0.0;
    for _ in 0..2000 {
        let xi = Array1::from_shape_fn(4, |_| rng.random::<f64>());
        st.advance(&w, &p, xi.view(), &mut input)
            .map_err(|e| e.to_string())?;
        spikes += st.s.sum();
        if st.s.iter().any(|&s| s != 0.0 && s != 1.0) {
            return Err("non-binary spike".into());
        }
        if st
            .s_hat
            .iter()
            .chain(st.e.iter())
            .any(|&x| !(0.0..=1.0).contains(&x))
        {
            return Err("filter or spike response outside [0, 1]".into());
        }
        for &v in st.v.iter() {
            let d = pseudo_derivative_at(v - p.v_th, p.delta_v);
            if !(d >= 0.0 && d <= peak * (1.0 + 1e-12)) {
                return Err(format!("pseudo-derivative {d} outside [0, {peak}]"));
            }
        }
    }
    if spikes == 0.0 {
        return Err("network never spiked".into());
    }
    Ok(format!("2000 frames, {} spikes", spikes as u64))
}

/// With unit ratios and no critic the two rules coincide.
pub fn check_lfcs_eprop_equivalence() -> Outcome {
    let p = toy_params(6);
    let theta = toy_weights(&p, 2.0, 5);
    let buf = toy_episode(&theta, &p, 30, 2);
    let mut tr = TraceState::new(3, p.n, p.gamma, true, false);
    let mut st = NetworkState::new(&p);
    let mut input = Array1::zeros(p.n);
    let mut worst: f64 = 0.0;
    for rec in &buf.records {
        st.advance(&theta, &p, rec.xi.view(), &mut input)
            .map_err(|e| e.to_string())?;
        let out = policy_with_value(&theta.a_pi, &theta.c_v, st.s_hat.view())
            .map_err(|e| e.to_string())?;
        tr.update(
            1.0,
            rec.action,
            out.pi.view(),
            st.pseudo_derivative(&p).view(),
            st.e.view(),
            st.s_hat.view(),
        )
        .map_err(|e| e.to_string())?;
        let a = grad_lfcs(&tr, rec.reward, &theta.a_pi);
        let b = grad_eprop(&tr, rec.reward, &theta.a_pi, &theta.c_v, 0.0);
        worst = worst.max(rel_err(
            a.a_pi.as_slice().unwrap(),
            b.a_pi.as_slice().unwrap(),
        ));
        worst = worst.max(rel_err(
            a.w_rec.as_ref().unwrap().as_slice().unwrap(),
            b.w_rec.as_ref().unwrap().as_slice().unwrap(),
        ));
    }
    // Replay through the acting weights reproduces unit ratios, so the
    // summed clipped-ratio gradient equals the summed e-prop one.
    let lf = summed_readout_gradient(&theta, &buf, 0.2, &p);
    let mut tr = TraceState::new(3, p.n, p.gamma, true, false);
    let mut st = NetworkState::new(&p);
    let mut ep = Gradients::zeros(3, p.n, true, false);
    for rec in &buf.records {
        st.advance(&theta, &p, rec.xi.view(), &mut input)
            .map_err(|e| e.to_string())?;
        let out = policy_with_value(&theta.a_pi, &theta.c_v, st.s_hat.view())
            .map_err(|e| e.to_string())?;
        tr.update(
            1.0,
            rec.action,
            out.pi.view(),
            st.pseudo_derivative(&p).view(),
            st.e.view(),
            st.s_hat.view(),
        )
        .map_err(|e| e.to_string())?;
        ep.add_assign(&grad_eprop(&tr, rec.reward, &theta.a_pi, &theta.c_v, 0.0));
    }
    worst = worst.max(rel_err(
        lf.a_pi.as_slice().unwrap(),
        ep.a_pi.as_slice().unwrap(),
    ));
    if worst <= 1e-12 {
        Ok(format!("max relative difference {worst:.2e}"))
    } else {
        Err(format!("max relative difference {worst:.2e} > 1e-12"))
    }
}

/// Two identical seeded training runs agree bit for bit.
pub fn check_determinism() -> Outcome {
    let p = toy_params(30);
    let run = || -> lfcs_core::Result<AgentPair<f64>> {
        let mut pair = AgentPair::new(toy_weights(&p, 1.0, 9), Hyper::default()).with_replays(2);
        let mut env = Pong::new(PongConfig::pong100())?;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for ep in 0..4 {
            lfcs_core::lfcs_episode(&mut pair, &mut env, ep, &mut rng, &p)?;
        }
        Ok(pair)
    };
    let (a, b) = (
        run().map_err(|e| e.to_string())?,
        run().map_err(|e| e.to_string())?,
    );
    let bits = |w: &NetworkWeights<f64>| -> Vec<u64> {
        w.w_rec
            .iter()
            .chain(w.a_pi.iter())
            .map(|x| x.to_bits())
            .collect()
    };
    if bits(&a.theta_ref) == bits(&b.theta_ref) && bits(&a.theta_new) == bits(&b.theta_new) {
        Ok("4 episodes x 2 replays, bitwise equal".into())
    } else {
        Err("weights differ between identical runs".into())
    }
}

/// Scripted extremes hit the score targets; random play stays in bounds.
pub fn check_calibration(rollouts: u64) -> Outcome {
    let cfg = PongConfig::pong100();
    if !meets_targets(&cfg, 64).map_err(|e| e.to_string())? {
        return Err("scripted policies miss the score targets".into());
    }
    for target in SCORE_TARGETS {
        let c = PongConfig {
            horizon: target.horizon,
            ..cfg.clone()
        };
        for k in 0..rollouts {
            let r = random_episode(&c, k, k ^ 0xabcdef).map_err(|e| e.to_string())?;
            if r < target.passive || r > target.oracle {
                return Err(format!(
                    "T={} random rollout {k} scored {r}",
                    target.horizon
                ));
            }
        }
    }
    Ok(format!(
        "targets met on 64 seeds; {rollouts} random rollouts per horizon in bounds"
    ))
}

/// Runs every check.
pub fn oracle_suite() -> OracleReport {
    OracleReport {
        checks: vec![
            timed("trace streaming", check_trace_streaming),
            timed("readout finite difference", check_finite_difference),
            timed("td telescoping", check_td_telescoping),
            timed("score function mean", || check_score_function(100_000)),
            timed("clip bounds", || check_clip_bounds(clip_ratio)),
            timed("softmax and entropy", check_softmax_entropy),
            timed("spike and filter ranges", check_state_ranges),
            timed("lfcs vs eprop", check_lfcs_eprop_equivalence),
            timed("determinism", check_determinism),
            timed("pong calibration", || check_calibration(10_000)),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_clip_is_caught() {
        assert!(check_clip_bounds(clip_ratio).is_ok());
        // Off-by-one-epsilon band.
        let loose = |rho: f64, eps: f64| rho.max(1.0 - 2.0 * eps).min(1.0 + 2.0 * eps);
        assert!(check_clip_bounds(loose).is_err());
        let shrunk = |rho: f64, eps: f64| rho.max(1.0 - eps / 2.0).min(1.0 + eps / 2.0);
        assert!(check_clip_bounds(shrunk).is_err());
    }

    #[test]
    fn small_trace_oracle_is_fast() {
        let c = timed("trace", check_trace_streaming);
        assert!(c.passed, "{}", c.detail);
        assert!(c.seconds < 1.0);
    }
}
