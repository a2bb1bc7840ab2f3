use ndarray::{Array1, Array2, Array3, ArrayView1, Axis, Zip};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Streaming eligibility accumulators.
///
/// Each accumulator holds a gamma-discounted sum over past frames, so the
/// double sums of the plasticity rules cost one update per frame:
///
/// ```text
/// E[k,i,j] <- gamma E[k,i,j] + rho_clip (1_k(a) - pi_k) p_i e_j
/// G[k,i]   <- gamma G[k,i]   + rho_clip (1_k(a) - pi_k) s_hat_i
/// H[i,j]   <- gamma H[i,j]   + p_i e_j          (value path only)
/// h[i]     <- gamma h[i]     + s_hat_i          (value path only)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct TraceState<S> {
    /// Pseudo-derivatives of the latest frame.
    pub p: Array1<S>,
    /// Recurrent-weight eligibility, `K x N x N`; absent when recurrence is frozen.
    pub e_pol: Option<Array3<S>>,
    /// Readout eligibility, `K x N`.
    pub g: Array2<S>,
    /// Value-path recurrent eligibility, `N x N`.
    pub h_mat: Option<Array2<S>>,
    /// Value-path readout eligibility, length `N`.
    pub h_vec: Option<Array1<S>>,
    pub gamma: S,
}

impl<S: Scalar> TraceState<S> {
    pub fn new(n_actions: usize, n: usize, gamma: S, recurrent: bool, value_path: bool) -> Self {
        Self {
            p: Array1::zeros(n),
            e_pol: recurrent.then(|| Array3::zeros((n_actions, n, n))),
            g: Array2::zeros((n_actions, n)),
            h_mat: (value_path && recurrent).then(|| Array2::zeros((n, n))),
            h_vec: value_path.then(|| Array1::zeros(n)),
            gamma,
        }
    }

    pub fn n(&self) -> usize {
        self.g.ncols()
    }

    pub fn n_actions(&self) -> usize {
        self.g.nrows()
    }

    /// Zeroes every accumulator (episode start).
    pub fn reset(&mut self) {
        self.p.fill(S::zero());
        self.g.fill(S::zero());
        if let Some(e) = self.e_pol.as_mut() {
            e.fill(S::zero());
        }
        if let Some(h) = self.h_mat.as_mut() {
            h.fill(S::zero());
        }
        if let Some(h) = self.h_vec.as_mut() {
            h.fill(S::zero());
        }
    }

    /// Folds one frame into the accumulators. Call once per frame, after the
    /// network step that produced `p`, `e` and `s_hat`.
    pub fn update(
        &mut self,
        rho_clip: S,
        action: usize,
        pi: ArrayView1<S>,
        p: ArrayView1<S>,
        e: ArrayView1<S>,
        s_hat: ArrayView1<S>,
    ) -> Result<()> {
        let (k_len, n) = (self.n_actions(), self.n());
        if pi.len() != k_len {
            return Err(Error::DimensionMismatch {
                context: "update_traces pi",
                expected: k_len,
                got: pi.len(),
            });
        }
        for (got, context) in [
            (p.len(), "update_traces p"),
            (e.len(), "update_traces e"),
            (s_hat.len(), "update_traces s_hat"),
        ] {
            if got != n {
                return Err(Error::DimensionMismatch {
                    context,
                    expected: n,
                    got,
                });
            }
        }
        if action >= k_len {
            return Err(Error::DimensionMismatch {
                context: "update_traces action",
                expected: k_len,
                got: action,
            });
        }
        if !rho_clip.is_finite()
            || pi.iter().any(|x| !x.is_finite())
            || p.iter().any(|x| !x.is_finite())
            || e.iter().any(|x| !x.is_finite())
            || s_hat.iter().any(|x| !x.is_finite())
        {
            return Err(Error::NonFinite("update_traces inputs"));
        }

        let gamma = self.gamma;
        self.p.assign(&p);
        let coef = |k: usize| {
            let one_hot = if k == action { S::one() } else { S::zero() };
            rho_clip * (one_hot - pi[k])
        };

        for (k, mut row) in self.g.axis_iter_mut(Axis(0)).enumerate() {
            let c = coef(k);
            Zip::from(&mut row)
                .and(&s_hat)
                .for_each(|g, &sh| *g = gamma * *g + c * sh);
        }

        if let Some(e_pol) = self.e_pol.as_mut() {
            let e = e.as_slice().expect("contiguous spike response");
            for (k, mut plane) in e_pol.axis_iter_mut(Axis(0)).enumerate() {
                let c = coef(k);
                for (i, mut row) in plane.axis_iter_mut(Axis(0)).enumerate() {
                    let f = c * p[i];
                    let row = row.as_slice_mut().expect("contiguous trace row");
                    for (x, &ej) in row.iter_mut().zip(e) {
                        *x = gamma * *x + f * ej;
                    }
                }
            }
        }

        if let Some(h) = self.h_mat.as_mut() {
            let e = e.as_slice().expect("contiguous spike response");
            for (i, mut row) in h.axis_iter_mut(Axis(0)).enumerate() {
                let f = p[i];
                let row = row.as_slice_mut().expect("contiguous trace row");
                for (x, &ej) in row.iter_mut().zip(e) {
                    *x = gamma * *x + f * ej;
                }
            }
        }
        if let Some(h) = self.h_vec.as_mut() {
            Zip::from(h)
                .and(&s_hat)
                .for_each(|h, &sh| *h = gamma * *h + sh);
        }

        if self.g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("eligibility trace"));
        }
        Ok(())
    }
}
