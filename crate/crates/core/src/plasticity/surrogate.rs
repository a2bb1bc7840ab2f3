use ndarray::Array1;

use super::{clip_ratio, discounted_return, REFERENCE_FLOOR};
use crate::buffer::EpisodeBuffer;
use crate::error::{Error, Result};
use crate::policy::{entropy, policy};
use crate::rsn::{ModelParams, NetworkState, NetworkWeights};
use crate::scalar::Scalar;

/// Diagnostics from re-simulating a stored episode through a network.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayEvaluation<S> {
    /// Mean over frames of `clip(rho) R`.
    pub s_clip: S,
    /// Mean over frames of `min(rho R, clip(rho) R)`; reported for comparison only.
    pub ppo_clip: S,
    /// Mean over frames of `rho R`.
    pub unclipped: S,
    /// `max_t |1 - rho_t|` over the taken actions.
    pub max_deviation: S,
    /// Mean entropy of the replayed policy.
    pub mean_entropy: S,
    /// Per-frame ratios of the taken actions.
    pub ratios: Vec<S>,
}

/// Replays the stored world states through `theta` and compares the taken
/// actions' probabilities with the stored reference probabilities.
pub fn evaluate_replay<S: Scalar>(
    episode: &EpisodeBuffer<S>,
    theta: &NetworkWeights<S>,
    epsilon: S,
    params: &ModelParams<S>,
) -> Result<ReplayEvaluation<S>> {
    if episode.is_empty() {
        return Err(Error::Empty("evaluate_replay"));
    }
    let returns = discounted_return(&episode.rewards(), params.gamma)?;
    let mut state = NetworkState::new(params);
    let mut input = Array1::zeros(params.n);
    let floor = S::lit(REFERENCE_FLOOR);

    let mut ratios = Vec::with_capacity(episode.len());
    let (mut s_clip, mut ppo, mut raw) = (S::zero(), S::zero(), S::zero());
    let (mut max_dev, mut ent) = (S::zero(), S::zero());
    for (t, (rec, &ret)) in episode.records.iter().zip(&returns).enumerate() {
        let pi_ref = rec.reference_prob(t)?;
        if !(pi_ref > floor) {
            return Err(Error::DegenerateReference {
                step: t,
                prob: pi_ref.to_f64_lossy(),
            });
        }
        state.advance(theta, params, rec.xi.view(), &mut input)?;
        let out = policy(&theta.a_pi, state.s_hat.view())?;
        let rho = out.pi[rec.action] / pi_ref;
        let clipped = clip_ratio(rho, epsilon);
        s_clip += clipped * ret;
        ppo += (rho * ret).min(clipped * ret);
        raw += rho * ret;
        max_dev = max_dev.max((S::one() - rho).abs());
        ent += entropy(out.pi.view());
        ratios.push(rho);
    }
    let len = S::lit(episode.len() as f64);
    Ok(ReplayEvaluation {
        s_clip: s_clip / len,
        ppo_clip: ppo / len,
        unclipped: raw / len,
        max_deviation: max_dev,
        mean_entropy: ent / len,
        ratios,
    })
}

/// Clipped surrogate `mean_t clip(rho_t, 1-eps, 1+eps) R_t` of `theta` on a
/// stored episode.
pub fn surrogate_loss<S: Scalar>(
    episode: &EpisodeBuffer<S>,
    theta: &NetworkWeights<S>,
    epsilon: S,
    params: &ModelParams<S>,
) -> Result<S> {
    evaluate_replay(episode, theta, epsilon, params).map(|r| r.s_clip)
}
