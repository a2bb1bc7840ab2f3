use super::grads::Gradients;
use crate::error::{Error, Result};
use crate::rsn::NetworkWeights;
use crate::scalar::Scalar;

/// Bias-corrected adaptive-moment optimizer for one parameter block,
/// stepping in the ascent direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<S> {
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
    /// Steps taken so far.
    pub t: u64,
    pub m: Vec<S>,
    pub v: Vec<S>,
    // Set once any non-zero gradient has been seen; until then an update is
    // exactly zero and the arithmetic can be skipped.
    touched: bool,
}

impl<S: Scalar> Adam<S> {
    pub fn new(len: usize, lr: S) -> Self {
        Self {
            lr,
            beta1: S::lit(0.9),
            beta2: S::lit(0.999),
            eps: S::lit(1e-8),
            t: 0,
            m: vec![S::zero(); len],
            v: vec![S::zero(); len],
            touched: false,
        }
    }

    /// `params += lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [S], grads: &[S]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                context: "adam step",
                expected: self.m.len(),
                got: grads.len().min(params.len()),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("optimizer gradient"));
        }
        self.step_unchecked(params, grads);
        Ok(())
    }

    fn step_unchecked(&mut self, params: &mut [S], grads: &[S]) {
        self.t += 1;
        if !self.touched {
            if grads.iter().all(|g| *g == S::zero()) {
                return;
            }
            self.touched = true;
        }
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let bc1 = S::one() - self.beta1.powi(t);
        let bc2 = S::one() - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        let (one_b1, one_b2) = (S::one() - b1, S::one() - b2);
        let step = self.lr / bc1;
        let inv_bc2 = S::one() / bc2;
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = b1 * *m + one_b1 * g;
            *v = b2 * *v + one_b2 * g * g;
            *p += step * *m / ((*v * inv_bc2).sqrt() + self.eps);
        }
    }
}

/// Optimizer state for all trainable blocks of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState<S> {
    pub w_rec: Option<Adam<S>>,
    pub a_pi: Adam<S>,
    pub c_v: Option<Adam<S>>,
    pub steps: u64,
}

impl<S: Scalar> OptState<S> {
    pub fn new(weights: &NetworkWeights<S>, eta: S, value_path: bool) -> Self {
        let n = weights.n();
        Self {
            w_rec: weights.trainable_recurrent.then(|| Adam::new(n * n, eta)),
            a_pi: Adam::new(weights.a_pi.len(), eta),
            c_v: value_path.then(|| Adam::new(n, eta)),
            steps: 0,
        }
    }

    /// Applies one ascent step. Non-finite gradients are rejected before any
    /// parameter is touched.
    pub fn step(&mut self, weights: &mut NetworkWeights<S>, grads: &Gradients<S>) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::NonFinite("optimizer gradient"));
        }
        if grads.a_pi.dim() != weights.a_pi.dim() {
            return Err(Error::DimensionMismatch {
                context: "optimizer readout",
                expected: weights.a_pi.len(),
                got: grads.a_pi.len(),
            });
        }
        self.steps += 1;
        self.a_pi.step_unchecked(
            weights.a_pi.as_slice_mut().expect("contiguous readout"),
            grads.a_pi.as_slice().expect("contiguous gradient"),
        );
        if let (Some(opt), Some(g)) = (self.w_rec.as_mut(), grads.w_rec.as_ref()) {
            if weights.trainable_recurrent {
                opt.step(
                    weights
                        .w_rec
                        .as_slice_mut()
                        .expect("contiguous recurrent weights"),
                    g.as_slice().expect("contiguous gradient"),
                )?;
            }
        }
        if let (Some(opt), Some(g)) = (self.c_v.as_mut(), grads.c_v.as_ref()) {
            opt.step(
                weights
                    .c_v
                    .as_slice_mut()
                    .expect("contiguous value readout"),
                g.as_slice().expect("contiguous gradient"),
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut opt = Adam::new(1, 1e-3);
        let mut x = [0.0f64];
        opt.step(&mut x, &[0.5]).unwrap();
        // m_hat = g, v_hat = g^2, so the move is lr * g / (|g| + eps).
        let expected = 1e-3 * 0.5 / (0.5 + 1e-8);
        assert_relative_eq!(x[0], expected, max_relative = 1e-12);
        assert!((x[0] - 9.99998e-4).abs() < 3e-9);
    }

    #[test]
    fn two_steps_match_closed_form() {
        let mut opt = Adam::new(1, 0.01);
        let mut x = [1.0f64];
        opt.step(&mut x, &[2.0]).unwrap();
        opt.step(&mut x, &[-1.0]).unwrap();
        let m1 = 0.1 * 2.0;
        let v1 = 0.001 * 4.0;
        let x1 = 1.0 + 0.01 * (m1 / 0.1) / ((v1 / 0.001f64).sqrt() + 1e-8);
        let m2 = 0.9 * m1 + 0.1 * -1.0;
        let v2 = 0.999 * v1 + 0.001 * 1.0;
        let bc1 = 1.0 - 0.9f64.powi(2);
        let bc2 = 1.0 - 0.999f64.powi(2);
        let x2 = x1 + 0.01 * (m2 / bc1) / ((v2 / bc2).sqrt() + 1e-8);
        assert_relative_eq!(x[0], x2, max_relative = 1e-12);
    }

    #[test]
    fn zero_gradient_leaves_params_and_counts() {
        let mut opt = Adam::new(3, 1e-3);
        let mut x = [1.0f64, -2.0, 3.0];
        opt.step(&mut x, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(x, [1.0, -2.0, 3.0]);
        assert_eq!(opt.t, 1);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut opt = Adam::new(2, 1e-3);
        let mut x = [1.0f64, 1.0];
        assert!(opt.step(&mut x, &[f64::NAN, 0.0]).is_err());
        assert_eq!(x, [1.0, 1.0]);
        assert!(opt.step(&mut x, &[1.0]).is_err());
    }

    #[test]
    fn identical_runs_identical_trajectories() {
        let run = || {
            let mut opt = Adam::new(2, 1e-2);
            let mut x = [0.0f64, 0.0];
            let mut traj = Vec::new();
            for i in 0..50 {
                let g = [(i as f64).sin(), (i as f64 * 0.3).cos()];
                opt.step(&mut x, &g).unwrap();
                traj.push(x);
            }
            traj
        };
        assert_eq!(run(), run());
    }
}
