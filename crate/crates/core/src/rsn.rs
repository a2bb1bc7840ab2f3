//! Discrete-time leaky integrate-and-fire recurrent network.
//!
//! Per frame the network filters its spikes, integrates the membrane
//! potential and thresholds it:
//!
//! ```text
//! s_hat_i <- (1 - dt/tau_s) s_hat_i + (dt/tau_s) s_i
//! v_i     <- (1 - dt/tau_m) v_i + (dt/tau_m) (sum_j w_ij s_hat_j(prev) + I_i + v_rest) - w_res s_i(prev)
//! s_i     <- H[v_i - v_th]
//! ```
//!
//! Alongside the dynamics the network carries the per-presynaptic spike
//! response `e_j` (the running derivative of `v_i` with respect to `w_ij`),
//! which the plasticity rules consume.

use ndarray::{Array1, Array2, ArrayView1, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Scalar constants of the spiking model.
///
/// Only the ratios `dt/tau` enter the dynamics, so they are stored directly.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S> {
    /// Neuron count.
    pub n: usize,
    pub dt_over_tau_s: S,
    pub dt_over_tau_m: S,
    pub v_rest: S,
    pub v_th: S,
    /// Reset amplitude subtracted one frame after a spike.
    pub w_res: S,
    /// Standard deviation of the input projection.
    pub sigma_in: S,
    /// Width of the pseudo-derivative.
    pub delta_v: S,
    /// Discount factor.
    pub gamma: S,
    /// Number of discrete actions (K).
    pub n_actions: usize,
    /// Dimensionality of the observed world state (d).
    pub input_dim: usize,
}

impl<S: Scalar> Default for ModelParams<S> {
    fn default() -> Self {
        Self {
            n: 500,
            dt_over_tau_s: S::lit(1.0 / 4.0),
            dt_over_tau_m: S::lit(1.0 / 6.0),
            v_rest: S::lit(-4.0),
            v_th: S::zero(),
            w_res: S::lit(20.0),
            sigma_in: S::lit(10.0),
            delta_v: S::lit(0.05),
            gamma: S::lit(0.98),
            n_actions: 3,
            input_dim: 4,
        }
    }
}

impl<S: Scalar> ModelParams<S> {
    pub fn with_neurons(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        let unit = |x: S| x > S::zero() && x <= S::one();
        if self.n == 0 {
            return bad("n", "need at least one neuron");
        }
        if !unit(self.dt_over_tau_s) {
            return bad("dt_over_tau_s", "must lie in (0, 1]");
        }
        if !unit(self.dt_over_tau_m) {
            return bad("dt_over_tau_m", "must lie in (0, 1]");
        }
        if !(self.delta_v > S::zero()) {
            return bad("delta_v", "must be positive");
        }
        if !(self.gamma > S::zero() && self.gamma < S::one()) {
            return bad("gamma", "must lie in (0, 1)");
        }
        if self.n_actions < 2 {
            return bad("n_actions", "need at least two actions");
        }
        if self.input_dim == 0 {
            return bad("input_dim", "need at least one input dimension");
        }
        for (name, x) in [
            ("v_rest", self.v_rest),
            ("v_th", self.v_th),
            ("w_res", self.w_res),
            ("sigma_in", self.sigma_in),
        ] {
            if !x.is_finite() {
                return bad(name, "must be finite");
            }
        }
        Ok(())
    }

    /// `1 - dt/tau_s`, the Euler decay of the spike filter.
    pub fn filter_decay(&self) -> S {
        S::one() - self.dt_over_tau_s
    }

    /// `1 - dt/tau_m`, the Euler decay of the membrane.
    pub fn membrane_decay(&self) -> S {
        S::one() - self.dt_over_tau_m
    }

    /// `exp(-dt/tau_m)`, the decay of the spike response.
    pub fn response_decay(&self) -> S {
        (-self.dt_over_tau_m).exp()
    }
}

/// Trainable and fixed synaptic matrices of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights<S> {
    /// Input projection, `N x d`.
    pub w_in: Array2<S>,
    /// Recurrent synapses, `N x N`, entry `[i, j]` from `j` to `i`.
    pub w_rec: Array2<S>,
    /// Policy readout, `K x N`.
    pub a_pi: Array2<S>,
    /// Value readout, length `N`.
    pub c_v: Array1<S>,
    /// When false, `w_rec` is identically zero and never updated.
    pub trainable_recurrent: bool,
}

impl<S: Scalar> NetworkWeights<S> {
    /// Draws `w_in ~ N(0, sigma_in^2)` and `w_rec ~ N(0, sigma_rec^2 / N)`;
    /// readouts start at zero. The same seed always gives the same weights.
    pub fn init(params: &ModelParams<S>, sigma_rec: S, seed: u64) -> Result<Self> {
        params.validate()?;
        if !(sigma_rec >= S::zero()) || !sigma_rec.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sigma_rec",
                reason: format!("must be finite and non-negative, got {sigma_rec}"),
            });
        }
        let (n, d, k) = (params.n, params.input_dim, params.n_actions);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let standard = Normal::new(0.0f64, 1.0).expect("unit normal");

        let sigma_in = params.sigma_in.to_f64_lossy();
        let w_in = Array2::from_shape_fn((n, d), |_| S::lit(sigma_in * standard.sample(&mut rng)));

        let rec_std = sigma_rec.to_f64_lossy() / (n as f64).sqrt();
        let w_rec = Array2::from_shape_fn((n, n), |_| S::lit(rec_std * standard.sample(&mut rng)));

        Ok(Self {
            w_in,
            w_rec,
            a_pi: Array2::zeros((k, n)),
            c_v: Array1::zeros(n),
            trainable_recurrent: true,
        })
    }

    /// Severs the recurrent connections and freezes them at zero.
    pub fn without_recurrence(mut self) -> Self {
        self.w_rec.fill(S::zero());
        self.trainable_recurrent = false;
        self
    }

    pub fn n(&self) -> usize {
        self.w_rec.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.a_pi.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.w_rec.iter().all(|x| x.is_finite())
            && self.a_pi.iter().all(|x| x.is_finite())
            && self.c_v.iter().all(|x| x.is_finite())
    }
}

/// Dynamic variables of one network, plus the values from the previous frame
/// that the update needs.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState<S> {
    /// Membrane potentials.
    pub v: Array1<S>,
    /// Spikes to be used in the coming frame (each 0 or 1).
    pub s: Array1<S>,
    /// Spikes of the previous frame; these drive the reset.
    pub s_prev: Array1<S>,
    /// Filtered spikes, each in `[0, 1]`.
    pub s_hat: Array1<S>,
    /// Filtered spikes of the previous frame.
    pub s_hat_prev: Array1<S>,
    /// Spike response, one entry per presynaptic neuron.
    pub e: Array1<S>,
    /// Frames simulated so far.
    pub t: usize,
}

impl<S: Scalar> NetworkState<S> {
    /// Silent network at rest with zero filters and spike response.
    pub fn new(params: &ModelParams<S>) -> Self {
        let n = params.n;
        Self {
            v: Array1::from_elem(n, params.v_rest),
            s: Array1::zeros(n),
            s_prev: Array1::zeros(n),
            s_hat: Array1::zeros(n),
            s_hat_prev: Array1::zeros(n),
            e: Array1::zeros(n),
            t: 0,
        }
    }

    /// One full frame: input projection, membrane update and spike response.
    /// `input` is scratch space of length `N` and holds the projected input
    /// afterwards.
    pub fn advance(
        &mut self,
        weights: &NetworkWeights<S>,
        params: &ModelParams<S>,
        xi: ArrayView1<S>,
        input: &mut Array1<S>,
    ) -> Result<()> {
        project_input_into(&weights.w_in, xi, input)?;
        network_step(self, input.view(), weights, params)?;
        spike_response_step(&mut self.e, self.s_hat_prev.view(), params);
        Ok(())
    }

    /// Pseudo-derivative of the current membrane potentials, centred on the threshold.
    pub fn pseudo_derivative(&self, params: &ModelParams<S>) -> Array1<S> {
        let mut p = Array1::zeros(self.v.len());
        self.pseudo_derivative_into(params, &mut p);
        p
    }

    pub fn pseudo_derivative_into(&self, params: &ModelParams<S>, out: &mut Array1<S>) {
        Zip::from(out)
            .and(&self.v)
            .for_each(|p, &v| *p = pseudo_derivative_at(v - params.v_th, params.delta_v));
    }
}

/// `I = w_in xi`.
pub fn project_input<S: Scalar>(w_in: &Array2<S>, xi: ArrayView1<S>) -> Result<Array1<S>> {
    let mut out = Array1::zeros(w_in.nrows());
    project_input_into(w_in, xi, &mut out)?;
    Ok(out)
}

pub fn project_input_into<S: Scalar>(
    w_in: &Array2<S>,
    xi: ArrayView1<S>,
    out: &mut Array1<S>,
) -> Result<()> {
    if xi.len() != w_in.ncols() {
        return Err(Error::DimensionMismatch {
            context: "project_input",
            expected: w_in.ncols(),
            got: xi.len(),
        });
    }
    if out.len() != w_in.nrows() {
        return Err(Error::DimensionMismatch {
            context: "project_input output",
            expected: w_in.nrows(),
            got: out.len(),
        });
    }
    ndarray::linalg::general_mat_vec_mul(S::one(), w_in, &xi, S::zero(), out);
    Ok(())
}

/// Advances the membrane dynamics by one frame.
///
/// Order within the frame: filter with the current spikes, integrate the
/// membrane using the previous filtered spikes and previous spikes, then
/// threshold to produce the spikes for the next frame.
pub fn network_step<S: Scalar>(
    state: &mut NetworkState<S>,
    input: ArrayView1<S>,
    weights: &NetworkWeights<S>,
    params: &ModelParams<S>,
) -> Result<()> {
    let n = state.v.len();
    if input.len() != n {
        return Err(Error::DimensionMismatch {
            context: "network_step input",
            expected: n,
            got: input.len(),
        });
    }
    if weights.n() != n {
        return Err(Error::DimensionMismatch {
            context: "network_step weights",
            expected: n,
            got: weights.n(),
        });
    }

    let a_s = params.dt_over_tau_s;
    let a_m = params.dt_over_tau_m;
    let keep_s = params.filter_decay();
    let keep_m = params.membrane_decay();

    // (i) filter
    state.s_hat_prev.assign(&state.s_hat);
    Zip::from(&mut state.s_hat)
        .and(&state.s)
        .for_each(|sh, &s| *sh = keep_s * *sh + a_s * s);

    // (ii) membrane
    let mut drive = Array1::zeros(n);
    if weights.trainable_recurrent {
        ndarray::linalg::general_mat_vec_mul(
            S::one(),
            &weights.w_rec,
            &state.s_hat_prev,
            S::zero(),
            &mut drive,
        );
    }
    let v_rest = params.v_rest;
    let w_res = params.w_res;
    Zip::from(&mut state.v)
        .and(&drive)
        .and(&input)
        .and(&state.s_prev)
        .for_each(|v, &rec, &i, &s_prev| {
            *v = keep_m * *v + a_m * (rec + i + v_rest) - w_res * s_prev;
        });
    if let Some(neuron) = state.v.iter().position(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            frame: state.t,
            neuron,
        });
    }

    // (iii) threshold
    std::mem::swap(&mut state.s_prev, &mut state.s);
    let v_th = params.v_th;
    Zip::from(&mut state.s).and(&state.v).for_each(|s, &v| {
        *s = if v - v_th >= S::zero() {
            S::one()
        } else {
            S::zero()
        };
    });
    state.t += 1;
    Ok(())
}

/// Surrogate derivative of the spike threshold,
/// `e^{v/dv} / (dv (e^{v/dv} + 1)^2)`, evaluated in the overflow-free form
/// `1 / (dv (e^{x/2} + e^{-x/2})^2)` with `x = v/dv`.
pub fn pseudo_derivative<S: Scalar>(v: ArrayView1<S>, delta_v: S) -> Array1<S> {
    v.mapv(|v| pseudo_derivative_at(v, delta_v))
}

#[inline]
pub fn pseudo_derivative_at<S: Scalar>(v: S, delta_v: S) -> S {
    let half = (v / delta_v) * S::lit(0.5);
    let c = half.exp() + (-half).exp();
    let p = S::one() / (delta_v * c * c);
    if p.is_finite() {
        p
    } else {
        S::zero()
    }
}

/// `e_j <- exp(-dt/tau_m) e_j + (1 - exp(-dt/tau_m)) s_hat_j(prev)`.
pub fn spike_response_step<S: Scalar>(
    e: &mut Array1<S>,
    s_hat_prev: ArrayView1<S>,
    params: &ModelParams<S>,
) {
    let decay = params.response_decay();
    let gain = S::one() - decay;
    Zip::from(e)
        .and(&s_hat_prev)
        .for_each(|e, &sh| *e = decay * *e + gain * sh);
}
