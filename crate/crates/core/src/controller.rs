//! Two-timescale learning: a frozen reference network acts and fills an
//! episode buffer, a fast network learns from the buffer frame by frame
//! (optionally replaying it several times), and at the end of the transfer
//! period the fast network is copied into the reference, subject to an
//! optional stiffness guard. The single-network e-prop baseline lives here
//! too.

use ndarray::Array1;
use rand::Rng;

use crate::buffer::{EpisodeBuffer, StepRecord};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::plasticity::grads::{accumulate_lfcs, accumulate_value_path};
use crate::plasticity::{
    clip_ratio, evaluate_replay, td_error, Gradients, Hyper, OptState, TraceState, REFERENCE_FLOOR,
};
use crate::policy::{entropy, policy, policy_with_value, sample_action};
use crate::rsn::{ModelParams, NetworkState, NetworkWeights};
use crate::scalar::Scalar;

/// Reference and fast networks plus the settings that couple them.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPair<S> {
    pub theta_ref: NetworkWeights<S>,
    pub theta_new: NetworkWeights<S>,
    pub hyper: Hyper<S>,
    /// Passes over each stored episode, at least one.
    pub n_replays: usize,
    pub guard_enabled: bool,
    /// Frames between transfers; `None` means once per episode.
    pub transfer_period: Option<usize>,
    /// Keep the optimizer state of the fast network across episodes instead
    /// of starting each episode fresh.
    pub persistent_optimizer: bool,
    frames_since_transfer: usize,
    optimizer: Option<OptState<S>>,
}

impl<S: Scalar> AgentPair<S> {
    /// Both networks start from `theta`.
    pub fn new(theta: NetworkWeights<S>, hyper: Hyper<S>) -> Self {
        Self {
            theta_new: theta.clone(),
            theta_ref: theta,
            hyper,
            n_replays: 1,
            guard_enabled: false,
            transfer_period: None,
            persistent_optimizer: false,
            frames_since_transfer: 0,
            optimizer: None,
        }
    }

    pub fn with_persistent_optimizer(mut self, persistent: bool) -> Self {
        self.persistent_optimizer = persistent;
        self
    }

    pub fn with_replays(mut self, n: usize) -> Self {
        self.n_replays = n;
        self
    }

    pub fn with_guard(mut self, enabled: bool) -> Self {
        self.guard_enabled = enabled;
        self
    }

    pub fn with_transfer_period(mut self, frames: usize) -> Self {
        self.transfer_period = Some(frames);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.n_replays == 0 {
            return Err(Error::InvalidParameter {
                name: "n_replays",
                reason: "need at least one pass".into(),
            });
        }
        if self.transfer_period == Some(0) {
            return Err(Error::InvalidParameter {
                name: "transfer_period",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Turns the reward stream into TD errors. Without a critic the TD error is
/// the reward itself and is available immediately; with a critic it needs
/// the next frame's value, so it lags one frame.
struct TdStream<S> {
    critic: bool,
    gamma: S,
    pending: Option<(S, S)>,
}

impl<S: Scalar> TdStream<S> {
    fn new(critic: bool, gamma: S) -> Self {
        Self {
            critic,
            gamma,
            pending: None,
        }
    }

    /// Call after the network advanced, before the traces see this frame.
    fn before_traces(&mut self, v_now: S) -> Option<S> {
        if !self.critic {
            return None;
        }
        self.pending
            .take()
            .map(|(r, v)| td_error(r, v, v_now, self.gamma))
    }

    /// Call after the traces absorbed this frame.
    fn after_traces(&mut self, reward: S, v_now: S) -> Option<S> {
        if self.critic {
            self.pending = Some((reward, v_now));
            None
        } else {
            Some(reward)
        }
    }

    /// Terminal frame: the value beyond the episode is zero.
    fn finish(&mut self) -> Option<S> {
        self.pending
            .take()
            .map(|(r, v)| td_error(r, v, S::zero(), self.gamma))
    }
}

/// Rolls the frozen network `theta_ref` through one episode, sampling actions
/// from its policy and recording `(xi, a, r, pi_ref)` per frame.
pub fn run_episode<S, E, R>(
    theta_ref: &NetworkWeights<S>,
    env: &mut E,
    env_seed: u64,
    rng: &mut R,
    params: &ModelParams<S>,
) -> Result<EpisodeBuffer<S>>
where
    S: Scalar,
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    check_env(env, params)?;
    let mut xi = env.reset(env_seed);
    let mut state = NetworkState::new(params);
    let mut input = Array1::zeros(params.n);
    let mut buffer = EpisodeBuffer::new(env_seed);
    loop {
        let xi_s = Array1::from_iter(xi.iter().map(|&x| S::lit(x)));
        state.advance(theta_ref, params, xi_s.view(), &mut input)?;
        let out = policy_with_value(&theta_ref.a_pi, &theta_ref.c_v, state.s_hat.view())?;
        let action = sample_action(out.pi.view(), rng)?;
        let tr = env.step(action)?;
        buffer.push(StepRecord {
            xi: xi_s,
            action,
            reward: S::lit(tr.reward),
            pi_ref: Some(out.pi),
            done: tr.done,
        });
        if tr.done {
            break;
        }
        xi = tr.xi;
    }
    Ok(buffer)
}

fn check_env<S: Scalar, E: Environment + ?Sized>(env: &E, params: &ModelParams<S>) -> Result<()> {
    params.validate()?;
    if env.observation_dim() != params.input_dim {
        return Err(Error::DimensionMismatch {
            context: "environment observation",
            expected: params.input_dim,
            got: env.observation_dim(),
        });
    }
    if env.n_actions() != params.n_actions {
        return Err(Error::DimensionMismatch {
            context: "environment actions",
            expected: params.n_actions,
            got: env.n_actions(),
        });
    }
    Ok(())
}

/// What a call to [`learn_online`] did.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnReport<S> {
    pub passes: usize,
    pub optimizer_steps: u64,
    /// Taken-action ratios of the first frame of every pass.
    pub first_ratios: Vec<S>,
}

/// Replays the stored world states through `theta_new`, stepping the
/// optimizer every frame with the clipped-ratio rule, `n_replays` times.
///
/// Traces are rebuilt on every pass. The optimizer state persists across
/// the passes of this call; it is fresh on entry unless the pair keeps it
/// across episodes.
pub fn learn_online<S: Scalar>(
    pair: &mut AgentPair<S>,
    buffer: &EpisodeBuffer<S>,
    params: &ModelParams<S>,
) -> Result<LearnReport<S>> {
    pair.validate()?;
    if buffer.is_empty() {
        return Err(Error::Empty("learn_online"));
    }
    let hyper = pair.hyper;
    let critic = hyper.critic_enabled();
    let kept = if pair.persistent_optimizer {
        pair.optimizer.take()
    } else {
        None
    };
    let theta = &mut pair.theta_new;
    let mut opt = kept.unwrap_or_else(|| OptState::new(theta, hyper.eta, critic));
    let mut traces = TraceState::new(
        params.n_actions,
        params.n,
        params.gamma,
        theta.trainable_recurrent,
        critic,
    );
    let mut grads = Gradients::zeros_like(theta, critic);
    let mut input = Array1::zeros(params.n);
    let mut p = Array1::zeros(params.n);
    let floor = S::lit(REFERENCE_FLOOR);
    let mut first_ratios = Vec::with_capacity(pair.n_replays);

    let mut apply = |theta: &mut NetworkWeights<S>,
                     traces: &TraceState<S>,
                     opt: &mut OptState<S>,
                     delta: S|
     -> Result<()> {
        grads.fill_zero();
        accumulate_lfcs(traces, delta, &theta.a_pi, &mut grads);
        if critic {
            accumulate_value_path(traces, delta, &theta.c_v, hyper.lambda_c, false, &mut grads);
        }
        opt.step(theta, &grads)
    };

    for _ in 0..pair.n_replays {
        traces.reset();
        let mut state = NetworkState::new(params);
        let mut td = TdStream::new(critic, params.gamma);
        for (t, rec) in buffer.records.iter().enumerate() {
            let pi_ref = rec.reference_prob(t)?;
            if !(pi_ref > floor) {
                return Err(Error::DegenerateReference {
                    step: t,
                    prob: pi_ref.to_f64_lossy(),
                });
            }
            state.advance(theta, params, rec.xi.view(), &mut input)?;
            let out = policy_with_value(&theta.a_pi, &theta.c_v, state.s_hat.view())?;
            if let Some(delta) = td.before_traces(out.v) {
                apply(theta, &traces, &mut opt, delta)?;
            }
            let rho = out.pi[rec.action] / pi_ref;
            if t == 0 {
                first_ratios.push(rho);
            }
            state.pseudo_derivative_into(params, &mut p);
            traces.update(
                clip_ratio(rho, hyper.epsilon),
                rec.action,
                out.pi.view(),
                p.view(),
                state.e.view(),
                state.s_hat.view(),
            )?;
            if let Some(delta) = td.after_traces(rec.reward, out.v) {
                apply(theta, &traces, &mut opt, delta)?;
            }
        }
        if let Some(delta) = td.finish() {
            apply(theta, &traces, &mut opt, delta)?;
        }
    }
    let optimizer_steps = opt.steps;
    if pair.persistent_optimizer {
        pair.optimizer = Some(opt);
    }
    Ok(LearnReport {
        passes: pair.n_replays,
        optimizer_steps,
        first_ratios,
    })
}

/// True iff `max_t |1 - pi_new(a_t) / pi_ref(a_t)| < epsilon` on the stored
/// episode.
pub fn transfer_guard<S: Scalar>(
    pair: &AgentPair<S>,
    buffer: &EpisodeBuffer<S>,
    params: &ModelParams<S>,
) -> Result<bool> {
    let eval = evaluate_replay(buffer, &pair.theta_new, pair.hyper.epsilon, params)?;
    Ok(eval.max_deviation < pair.hyper.epsilon)
}

/// Slow-timescale step: copies the fast network into the reference, or, when
/// the guard is enabled and rejects the candidate, discards the candidate.
/// Returns whether the candidate was accepted.
pub fn transfer<S: Scalar>(
    pair: &mut AgentPair<S>,
    buffer: &EpisodeBuffer<S>,
    params: &ModelParams<S>,
) -> Result<bool> {
    let accepted = !pair.guard_enabled || transfer_guard(pair, buffer, params)?;
    if accepted {
        pair.theta_ref.clone_from(&pair.theta_new);
    } else {
        pair.theta_new.clone_from(&pair.theta_ref);
    }
    pair.frames_since_transfer = 0;
    Ok(accepted)
}

/// Per-episode summary produced by both learners.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReport<S> {
    pub reward: S,
    pub frames: usize,
    /// Clipped surrogate of the fast network before learning on this episode.
    pub surrogate_pre: S,
    /// Clipped surrogate of the fast network after learning on this episode.
    pub surrogate_post: S,
    /// Mean entropy of the acting policy over the episode.
    pub mean_entropy: S,
    /// A transfer happened and was accepted.
    pub accepted: bool,
}

fn mean_entropy<S: Scalar>(buffer: &EpisodeBuffer<S>) -> S {
    let total: S = buffer
        .records
        .iter()
        .filter_map(|r| r.pi_ref.as_ref())
        .map(|pi| entropy(pi.view()))
        .sum();
    total / S::lit(buffer.len().max(1) as f64)
}

/// One full two-timescale episode: act with the reference, learn online with
/// the fast network, then transfer when the period has elapsed.
pub fn lfcs_episode<S, E, R>(
    pair: &mut AgentPair<S>,
    env: &mut E,
    env_seed: u64,
    rng: &mut R,
    params: &ModelParams<S>,
) -> Result<(EpisodeBuffer<S>, EpisodeReport<S>)>
where
    S: Scalar,
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    pair.validate()?;
    let buffer = run_episode(&pair.theta_ref, env, env_seed, rng, params)?;
    let eps = pair.hyper.epsilon;
    let surrogate_pre = evaluate_replay(&buffer, &pair.theta_new, eps, params)?.s_clip;
    learn_online(pair, &buffer, params)?;
    let surrogate_post = evaluate_replay(&buffer, &pair.theta_new, eps, params)?.s_clip;
    pair.frames_since_transfer += buffer.len();
    let due = pair
        .transfer_period
        .map_or(true, |period| pair.frames_since_transfer >= period);
    let accepted = if due {
        transfer(pair, &buffer, params)?
    } else {
        false
    };
    let report = EpisodeReport {
        reward: buffer.total_reward(),
        frames: buffer.len(),
        surrogate_pre,
        surrogate_post,
        mean_entropy: mean_entropy(&buffer),
        accepted,
    };
    Ok((buffer, report))
}

/// Single-network e-prop episode: the network acts while accumulating the
/// e-prop gradient (ratios fixed at one), and one optimizer step is applied
/// at the end of the episode. No replay.
pub fn run_eprop_baseline<S, E, R>(
    theta: &mut NetworkWeights<S>,
    env: &mut E,
    env_seed: u64,
    rng: &mut R,
    params: &ModelParams<S>,
    hyper: &Hyper<S>,
) -> Result<(EpisodeBuffer<S>, EpisodeReport<S>)>
where
    S: Scalar,
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    eprop_episode(theta, &mut None, false, env, env_seed, rng, params, hyper)
}

/// Single-network e-prop learner that can keep its optimizer state across
/// episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EpropAgent<S> {
    pub theta: NetworkWeights<S>,
    pub hyper: Hyper<S>,
    pub persistent_optimizer: bool,
    optimizer: Option<OptState<S>>,
}

impl<S: Scalar> EpropAgent<S> {
    pub fn new(theta: NetworkWeights<S>, hyper: Hyper<S>) -> Self {
        Self {
            theta,
            hyper,
            persistent_optimizer: false,
            optimizer: None,
        }
    }

    pub fn with_persistent_optimizer(mut self, persistent: bool) -> Self {
        self.persistent_optimizer = persistent;
        self
    }

    pub fn episode<E, R>(
        &mut self,
        env: &mut E,
        env_seed: u64,
        rng: &mut R,
        params: &ModelParams<S>,
    ) -> Result<(EpisodeBuffer<S>, EpisodeReport<S>)>
    where
        E: Environment + ?Sized,
        R: Rng + ?Sized,
    {
        eprop_episode(
            &mut self.theta,
            &mut self.optimizer,
            self.persistent_optimizer,
            env,
            env_seed,
            rng,
            params,
            &self.hyper,
        )
    }
}

#[allow(clippy::too_many_arguments)]
fn eprop_episode<S, E, R>(
    theta: &mut NetworkWeights<S>,
    optimizer: &mut Option<OptState<S>>,
    keep_optimizer: bool,
    env: &mut E,
    env_seed: u64,
    rng: &mut R,
    params: &ModelParams<S>,
    hyper: &Hyper<S>,
) -> Result<(EpisodeBuffer<S>, EpisodeReport<S>)>
where
    S: Scalar,
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    hyper.validate()?;
    check_env(env, params)?;
    let critic = hyper.critic_enabled();
    let mut traces = TraceState::new(
        params.n_actions,
        params.n,
        params.gamma,
        theta.trainable_recurrent,
        critic,
    );
    let mut total = Gradients::zeros_like(theta, critic);
    let mut state = NetworkState::new(params);
    let mut input = Array1::zeros(params.n);
    let mut p = Array1::zeros(params.n);
    let mut buffer = EpisodeBuffer::new(env_seed);
    let mut td = TdStream::new(critic, params.gamma);

    let accumulate =
        |total: &mut Gradients<S>, traces: &TraceState<S>, theta: &NetworkWeights<S>, delta: S| {
            accumulate_lfcs(traces, delta, &theta.a_pi, total);
            if critic {
                accumulate_value_path(traces, delta, &theta.c_v, hyper.lambda_c, true, total);
            }
        };

    let mut xi = env.reset(env_seed);
    loop {
        let xi_s = Array1::from_iter(xi.iter().map(|&x| S::lit(x)));
        state.advance(theta, params, xi_s.view(), &mut input)?;
        let out = policy_with_value(&theta.a_pi, &theta.c_v, state.s_hat.view())?;
        if let Some(delta) = td.before_traces(out.v) {
            accumulate(&mut total, &traces, theta, delta);
        }
        let action = sample_action(out.pi.view(), rng)?;
        state.pseudo_derivative_into(params, &mut p);
        traces.update(
            S::one(),
            action,
            out.pi.view(),
            p.view(),
            state.e.view(),
            state.s_hat.view(),
        )?;
        let tr = env.step(action)?;
        let reward = S::lit(tr.reward);
        if let Some(delta) = td.after_traces(reward, out.v) {
            accumulate(&mut total, &traces, theta, delta);
        }
        buffer.push(StepRecord {
            xi: xi_s,
            action,
            reward,
            pi_ref: Some(out.pi),
            done: tr.done,
        });
        if tr.done {
            break;
        }
        xi = tr.xi;
    }
    if let Some(delta) = td.finish() {
        accumulate(&mut total, &traces, theta, delta);
    }

    let surrogate_pre = evaluate_replay(&buffer, theta, hyper.epsilon, params)?.s_clip;
    let kept = if keep_optimizer {
        optimizer.take()
    } else {
        None
    };
    let mut opt = kept.unwrap_or_else(|| OptState::new(theta, hyper.eta, critic));
    opt.step(theta, &total)?;
    if keep_optimizer {
        *optimizer = Some(opt);
    }
    let surrogate_post = evaluate_replay(&buffer, theta, hyper.epsilon, params)?.s_clip;
    let report = EpisodeReport {
        reward: buffer.total_reward(),
        frames: buffer.len(),
        surrogate_pre,
        surrogate_post,
        mean_entropy: mean_entropy(&buffer),
        accepted: true,
    };
    Ok((buffer, report))
}

/// One step of the repeated-replay protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayStep<S> {
    /// Clipped surrogate of the reference after the guard decision, measured
    /// against the policy that recorded the episode.
    pub surrogate: S,
    /// Mean policy entropy of the reference over the stored episode.
    pub mean_entropy: S,
    /// Deviation from the current reference the guard saw before deciding.
    pub max_deviation: S,
    pub accepted: bool,
}

/// Overwrites the stored reference probabilities with those of `theta`.
pub fn rereference<S: Scalar>(
    buffer: &mut EpisodeBuffer<S>,
    theta: &NetworkWeights<S>,
    params: &ModelParams<S>,
) -> Result<()> {
    let mut state = NetworkState::new(params);
    let mut input = Array1::zeros(params.n);
    for rec in buffer.records.iter_mut() {
        state.advance(theta, params, rec.xi.view(), &mut input)?;
        rec.pi_ref = Some(policy(&theta.a_pi, state.s_hat.view())?.pi);
    }
    Ok(())
}

/// Replays one stored episode `replays` times. Each replay is a single
/// online pass followed by a transfer decision. An accepted transfer moves
/// the reference, so the next replay's ratios and guard are taken against
/// the new reference; with the guard enabled a replay that moves too far
/// from the current reference is discarded.
pub fn replay_memory<S: Scalar>(
    pair: &mut AgentPair<S>,
    buffer: &EpisodeBuffer<S>,
    replays: usize,
    params: &ModelParams<S>,
) -> Result<Vec<ReplayStep<S>>> {
    let saved = pair.n_replays;
    pair.n_replays = 1;
    let eps = pair.hyper.epsilon;
    let mut work = buffer.clone();
    rereference(&mut work, &pair.theta_ref, params)?;
    let mut out = Vec::with_capacity(replays);
    let result = (|| {
        for _ in 0..replays {
            learn_online(pair, &work, params)?;
            let before = evaluate_replay(&work, &pair.theta_new, eps, params)?;
            let accepted = transfer(pair, &work, params)?;
            if accepted {
                rereference(&mut work, &pair.theta_ref, params)?;
            }
            let after = evaluate_replay(buffer, &pair.theta_ref, eps, params)?;
            out.push(ReplayStep {
                surrogate: after.s_clip,
                mean_entropy: after.mean_entropy,
                max_deviation: before.max_deviation,
                accepted,
            });
        }
        Ok(())
    })();
    pair.n_replays = saved;
    result.map(|()| out)
}
