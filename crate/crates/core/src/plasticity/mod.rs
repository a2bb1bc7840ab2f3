//! Learning mathematics: returns, TD errors, probability ratios, streaming
//! eligibility traces, the e-prop and clipped-ratio plasticity rules, the
//! replay surrogate and the adaptive-moment optimizer.
//!
//! Every rule here is written as *ascent*: applying the returned gradients
//! with [`OptState::step`] increases the expected return (equivalently the
//! clipped surrogate).

mod adam;
pub(crate) mod grads;
mod surrogate;
mod traces;

pub use adam::{Adam, OptState};
pub use grads::{grad_eprop, grad_lfcs, Gradients};
pub use surrogate::{evaluate_replay, surrogate_loss, ReplayEvaluation};
pub use traces::TraceState;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Reference probabilities at or below this value are treated as degenerate.
pub const REFERENCE_FLOOR: f64 = 1e-12;

/// Learning hyper-parameters shared by both learners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper<S> {
    /// Clip half-width (stiffness) of the probability ratio.
    pub epsilon: S,
    /// Weight of the value path; zero disables the critic entirely.
    pub lambda_c: S,
    /// Optimizer learning rate.
    pub eta: S,
}

impl<S: Scalar> Default for Hyper<S> {
    fn default() -> Self {
        Self {
            epsilon: S::lit(0.2),
            lambda_c: S::zero(),
            eta: S::lit(1.5e-3),
        }
    }
}

impl<S: Scalar> Hyper<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= S::zero()) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must be non-negative, got {}", self.epsilon),
            });
        }
        if !(self.lambda_c >= S::zero()) || !self.lambda_c.is_finite() {
            return Err(Error::InvalidParameter {
                name: "lambda_c",
                reason: format!("must be finite and non-negative, got {}", self.lambda_c),
            });
        }
        if !(self.eta > S::zero()) || !self.eta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("must be finite and positive, got {}", self.eta),
            });
        }
        Ok(())
    }

    pub fn critic_enabled(&self) -> bool {
        self.lambda_c > S::zero()
    }
}

/// `R^t = sum_{tau >= t} gamma^(tau - t) r^tau`, one backward pass.
pub fn discounted_return<S: Scalar>(rewards: &[S], gamma: S) -> Result<Vec<S>> {
    if rewards.is_empty() {
        return Err(Error::Empty("discounted_return"));
    }
    let mut out = vec![S::zero(); rewards.len()];
    let mut acc = S::zero();
    for (r, slot) in rewards.iter().zip(out.iter_mut()).rev() {
        acc = *r + gamma * acc;
        *slot = acc;
    }
    Ok(out)
}

/// `delta = r + gamma V' - V`; pass `v_next = 0` at the terminal frame.
#[inline]
pub fn td_error<S: Scalar>(r: S, v: S, v_next: S, gamma: S) -> S {
    r + gamma * v_next - v
}

/// `rho = pi_new(a) / pi_ref(a)`.
pub fn ratio<S: Scalar>(pi_new_a: S, pi_ref_a: S) -> Result<S> {
    if !(pi_ref_a > S::lit(REFERENCE_FLOOR)) {
        return Err(Error::DegenerateReference {
            step: 0,
            prob: pi_ref_a.to_f64_lossy(),
        });
    }
    Ok(pi_new_a / pi_ref_a)
}

/// `min(max(rho, 1 - epsilon), 1 + epsilon)`.
#[inline]
pub fn clip_ratio<S: Scalar>(rho: S, epsilon: S) -> S {
    rho.max(S::one() - epsilon).min(S::one() + epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn return_of_final_reward() {
        let r = discounted_return(&[0.0, 0.0, 1.0], 0.98).unwrap();
        assert_relative_eq!(r[0], 0.9604, max_relative = 1e-14);
        assert_relative_eq!(r[1], 0.98, max_relative = 1e-14);
        assert_eq!(r[2], 1.0);
        assert!(discounted_return(&[0.0f64; 5], 0.9)
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));
        assert!(discounted_return::<f64>(&[], 0.9).is_err());
    }

    #[test]
    fn return_matches_double_loop() {
        let rewards: Vec<f64> = (0..20)
            .map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0)
            .collect();
        let gamma = 0.98;
        let fast = discounted_return(&rewards, gamma).unwrap();
        for t in 0..rewards.len() {
            let brute: f64 = (t..rewards.len())
                .map(|tau| gamma.powi((tau - t) as i32) * rewards[tau])
                .sum();
            assert_relative_eq!(fast[t], brute, max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn td_error_cases() {
        assert_eq!(td_error(0.7, 0.0, 0.0, 0.98), 0.7);
        let c = 2.5;
        assert_relative_eq!(
            td_error(0.0, c, c, 0.98),
            c * (0.98 - 1.0),
            max_relative = 1e-14
        );
    }

    #[test]
    fn ratio_cases() {
        assert_eq!(ratio(0.3, 0.3).unwrap(), 1.0);
        assert_relative_eq!(ratio(0.6, 0.5).unwrap(), 1.2, max_relative = 1e-15);
        assert!(ratio(0.5, 1e-13).is_err());
        assert!(ratio(0.5, 0.0).is_err());
    }

    #[test]
    fn clip_cases() {
        assert_relative_eq!(clip_ratio(1.3, 0.2), 1.2, max_relative = 1e-15);
        assert_relative_eq!(clip_ratio(0.5, 0.2), 0.8, max_relative = 1e-15);
        for eps in [0.0, 0.01, 0.2, 1.0, 5.0] {
            assert_eq!(clip_ratio(1.0, eps), 1.0);
        }
    }

    #[test]
    fn hyper_validation() {
        assert!(Hyper::<f64>::default().validate().is_ok());
        let mut h = Hyper::<f64>::default();
        h.epsilon = -0.1;
        assert!(h.validate().is_err());
        let mut h = Hyper::<f64>::default();
        h.eta = 0.0;
        assert!(h.validate().is_err());
    }

    proptest! {
        #[test]
        fn clip_stays_in_band(rho in -10.0f64..10.0, eps in 0.0f64..3.0) {
            let c = clip_ratio(rho, eps);
            prop_assert!(c >= 1.0 - eps && c <= 1.0 + eps);
        }

        #[test]
        fn td_errors_telescope(
            rewards in proptest::collection::vec(-2.0f64..2.0, 1..40),
            values in proptest::collection::vec(-3.0f64..3.0, 40),
            gamma in 0.5f64..0.999,
        ) {
            let t_len = rewards.len();
            let v = &values[..t_len];
            let deltas: Vec<f64> = (0..t_len)
                .map(|t| td_error(rewards[t], v[t], if t + 1 < t_len { v[t + 1] } else { 0.0 }, gamma))
                .collect();
            let big_r = discounted_return(&rewards, gamma).unwrap();
            for t in 0..t_len {
                let lhs: f64 = (t..t_len).map(|tau| gamma.powi((tau - t) as i32) * deltas[tau]).sum();
                let rhs = big_r[t] - v[t];
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()) * t_len as f64);
            }
        }
    }
}
