//! Linear readouts of the filtered spikes: action distribution, value
//! estimate, action sampling and entropy.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput<S> {
    /// Logits `y = A_pi s_hat`.
    pub y: Array1<S>,
    /// `softmax(y)`.
    pub pi: Array1<S>,
    /// Value estimate, zero unless filled from a value readout.
    pub v: S,
}

/// Action distribution of the readout `a_pi` applied to `s_hat`.
pub fn policy<S: Scalar>(a_pi: &Array2<S>, s_hat: ArrayView1<S>) -> Result<PolicyOutput<S>> {
    if a_pi.ncols() != s_hat.len() {
        return Err(Error::DimensionMismatch {
            context: "policy",
            expected: a_pi.ncols(),
            got: s_hat.len(),
        });
    }
    let y = a_pi.dot(&s_hat);
    let pi = softmax(y.view());
    Ok(PolicyOutput {
        y,
        pi,
        v: S::zero(),
    })
}

/// Like [`policy`], also filling `v` from the value readout.
pub fn policy_with_value<S: Scalar>(
    a_pi: &Array2<S>,
    c_v: &Array1<S>,
    s_hat: ArrayView1<S>,
) -> Result<PolicyOutput<S>> {
    let mut out = policy(a_pi, s_hat)?;
    out.v = value(c_v, s_hat)?;
    Ok(out)
}

/// Max-subtracted softmax.
pub fn softmax<S: Scalar>(y: ArrayView1<S>) -> Array1<S> {
    let max = y.iter().copied().fold(S::neg_infinity(), S::max);
    let mut out = y.mapv(|v| (v - max).exp());
    let total: S = out.sum();
    out.mapv_inplace(|v| v / total);
    out
}

/// `V = sum_i c_v[i] s_hat[i]`.
pub fn value<S: Scalar>(c_v: &Array1<S>, s_hat: ArrayView1<S>) -> Result<S> {
    if c_v.len() != s_hat.len() {
        return Err(Error::DimensionMismatch {
            context: "value",
            expected: c_v.len(),
            got: s_hat.len(),
        });
    }
    Ok(c_v.dot(&s_hat))
}

/// Draws an action index with probability `pi[k]`.
pub fn sample_action<S: Scalar, R: Rng + ?Sized>(pi: ArrayView1<S>, rng: &mut R) -> Result<usize> {
    if pi.is_empty() {
        return Err(Error::DegenerateDistribution("empty distribution".into()));
    }
    let mut total = 0.0f64;
    for &p in pi.iter() {
        let p = p.to_f64_lossy();
        if !p.is_finite() || p < 0.0 {
            return Err(Error::DegenerateDistribution(format!(
                "invalid probability {p}"
            )));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::DegenerateDistribution(format!(
            "probabilities sum to {total}"
        )));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &p) in pi.iter().enumerate() {
        let p = p.to_f64_lossy();
        if p > 0.0 {
            last_positive = k;
            acc += p;
            if u < acc {
                return Ok(k);
            }
        }
    }
    // Rounding left u just above the cumulative sum.
    Ok(last_positive)
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy<S: Scalar>(pi: ArrayView1<S>) -> S {
    pi.iter()
        .filter(|&&p| p > S::zero())
        .fold(S::zero(), |h, &p| h - p * p.ln())
}
