use ndarray::{Array1, Array2, Axis, Zip};

use super::traces::TraceState;
use crate::rsn::NetworkWeights;
use crate::scalar::Scalar;

/// Ascent directions for the trainable parameters of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<S> {
    /// `None` when recurrence is frozen.
    pub w_rec: Option<Array2<S>>,
    pub a_pi: Array2<S>,
    /// `None` when the value path is disabled.
    pub c_v: Option<Array1<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn zeros(n_actions: usize, n: usize, recurrent: bool, value_path: bool) -> Self {
        Self {
            w_rec: recurrent.then(|| Array2::zeros((n, n))),
            a_pi: Array2::zeros((n_actions, n)),
            c_v: value_path.then(|| Array1::zeros(n)),
        }
    }

    pub fn zeros_like(weights: &NetworkWeights<S>, value_path: bool) -> Self {
        Self::zeros(
            weights.n_actions(),
            weights.n(),
            weights.trainable_recurrent,
            value_path,
        )
    }

    pub fn fill_zero(&mut self) {
        self.a_pi.fill(S::zero());
        if let Some(w) = self.w_rec.as_mut() {
            w.fill(S::zero());
        }
        if let Some(c) = self.c_v.as_mut() {
            c.fill(S::zero());
        }
    }

    /// `self += other`, matching present components.
    pub fn add_assign(&mut self, other: &Gradients<S>) {
        self.a_pi += &other.a_pi;
        if let (Some(a), Some(b)) = (self.w_rec.as_mut(), other.w_rec.as_ref()) {
            *a += b;
        }
        if let (Some(a), Some(b)) = (self.c_v.as_mut(), other.c_v.as_ref()) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a_pi.iter().all(|x| x.is_finite())
            && self.w_rec.iter().flatten().all(|x| x.is_finite())
            && self.c_v.iter().flatten().all(|x| x.is_finite())
    }

    /// Largest absolute entry; handy for diagnostics.
    pub fn max_abs(&self) -> S {
        self.a_pi
            .iter()
            .chain(self.w_rec.iter().flatten())
            .chain(self.c_v.iter().flatten())
            .fold(S::zero(), |m, x| m.max(x.abs()))
    }
}

/// Adds `delta * sum_k A[k,i] E[k,i,j]` into `w`.
fn accumulate_policy_recurrent<S: Scalar>(
    tr: &TraceState<S>,
    delta: S,
    a_pi: &Array2<S>,
    w: &mut Array2<S>,
) {
    let Some(e_pol) = tr.e_pol.as_ref() else {
        return;
    };
    for (k, plane) in e_pol.axis_iter(Axis(0)).enumerate() {
        for (i, (row, mut out)) in plane
            .axis_iter(Axis(0))
            .zip(w.axis_iter_mut(Axis(0)))
            .enumerate()
        {
            let c = delta * a_pi[[k, i]];
            if c == S::zero() {
                continue;
            }
            let out = out.as_slice_mut().expect("contiguous gradient row");
            let row = row.as_slice().expect("contiguous trace row");
            for (o, &x) in out.iter_mut().zip(row) {
                *o += c * x;
            }
        }
    }
}

/// Clipped-ratio rule for one frame:
/// `dw[i,j] = delta sum_k A[k,i] E[k,i,j]`, `dA[k,i] = delta G[k,i]`.
///
/// The traces must have been built with the clipped ratios. With ratios
/// forced to one this is exactly the policy part of [`grad_eprop`].
pub fn grad_lfcs<S: Scalar>(tr: &TraceState<S>, delta: S, a_pi: &Array2<S>) -> Gradients<S> {
    let mut out = Gradients::zeros(tr.n_actions(), tr.n(), tr.e_pol.is_some(), false);
    accumulate_lfcs(tr, delta, a_pi, &mut out);
    out
}

/// In-place form of [`grad_lfcs`]: adds this frame's contribution to `out`.
pub(crate) fn accumulate_lfcs<S: Scalar>(
    tr: &TraceState<S>,
    delta: S,
    a_pi: &Array2<S>,
    out: &mut Gradients<S>,
) {
    if delta == S::zero() {
        return;
    }
    Zip::from(&mut out.a_pi)
        .and(&tr.g)
        .for_each(|o, &g| *o += delta * g);
    if let Some(w) = out.w_rec.as_mut() {
        accumulate_policy_recurrent(tr, delta, a_pi, w);
    }
}

/// Value-path contributions shared by both learners:
/// `dw[i,j] += delta lambda_c sum_k C[k] H[i,j]` and `dC = delta h`.
pub(crate) fn accumulate_value_path<S: Scalar>(
    tr: &TraceState<S>,
    delta: S,
    c_v: &Array1<S>,
    lambda_c: S,
    include_recurrent: bool,
    out: &mut Gradients<S>,
) {
    if delta == S::zero() {
        return;
    }
    if include_recurrent && lambda_c != S::zero() {
        if let (Some(w), Some(h)) = (out.w_rec.as_mut(), tr.h_mat.as_ref()) {
            let c = delta * lambda_c * c_v.sum();
            if c != S::zero() {
                Zip::from(w).and(h).for_each(|o, &x| *o += c * x);
            }
        }
    }
    if let (Some(dc), Some(h)) = (out.c_v.as_mut(), tr.h_vec.as_ref()) {
        Zip::from(dc).and(h).for_each(|o, &x| *o += delta * x);
    }
}

/// E-prop actor-critic rule for one frame:
///
/// ```text
/// dw[i,j] = delta (sum_k A[k,i] E[k,i,j] + lambda_c sum_k C[k] H[i,j])
/// dA[k,i] = delta G[k,i]
/// dC[i]   = delta h[i]
/// ```
///
/// The value terms are present only when `lambda_c > 0`.
pub fn grad_eprop<S: Scalar>(
    tr: &TraceState<S>,
    delta: S,
    a_pi: &Array2<S>,
    c_v: &Array1<S>,
    lambda_c: S,
) -> Gradients<S> {
    let value_path = lambda_c > S::zero();
    let mut out = Gradients::zeros(tr.n_actions(), tr.n(), tr.e_pol.is_some(), value_path);
    accumulate_lfcs(tr, delta, a_pi, &mut out);
    if value_path {
        accumulate_value_path(tr, delta, c_v, lambda_c, true, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn filled_traces(seed: u64, value_path: bool) -> TraceState<f64> {
        let (k, n) = (3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tr = TraceState::new(k, n, 0.95, true, value_path);
        for _ in 0..6 {
            let pi = array![0.2, 0.5, 0.3];
            let p = Array1::from_shape_fn(n, |_| rng.random_range(0.0..5.0));
            let e = Array1::from_shape_fn(n, |_| rng.random::<f64>());
            let s = Array1::from_shape_fn(n, |_| rng.random::<f64>());
            tr.update(
                1.0,
                rng.random_range(0..k),
                pi.view(),
                p.view(),
                e.view(),
                s.view(),
            )
            .unwrap();
        }
        tr
    }

    #[test]
    fn zero_delta_gives_zero_gradient() {
        let tr = filled_traces(1, true);
        let a = Array2::from_elem((3, 4), 0.7);
        let g = grad_lfcs(&tr, 0.0, &a);
        assert_eq!(g.max_abs(), 0.0);
        let g = grad_eprop(&tr, 0.0, &a, &Array1::from_elem(4, 0.3), 0.5);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn lfcs_equals_eprop_without_critic() {
        let tr = filled_traces(2, false);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = Array2::from_shape_fn((3, 4), |_| rng.random_range(-1.0..1.0));
        let c = Array1::from_shape_fn(4, |_| rng.random_range(-1.0..1.0));
        let l = grad_lfcs(&tr, 0.8, &a);
        let e = grad_eprop(&tr, 0.8, &a, &c, 0.0);
        assert_eq!(l, e);
        assert!(e.c_v.is_none());
    }

    #[test]
    fn recurrent_gradient_matches_explicit_sum() {
        let tr = filled_traces(3, true);
        let a = array![
            [0.5, -1.0, 0.25, 2.0],
            [1.5, 0.0, -0.5, 1.0],
            [-2.0, 0.75, 1.0, 0.0]
        ];
        let c = array![0.1, -0.2, 0.3, 0.4];
        let (delta, lambda) = (1.7, 0.6);
        let g = grad_eprop(&tr, delta, &a, &c, lambda);
        let e = tr.e_pol.as_ref().unwrap();
        let h = tr.h_mat.as_ref().unwrap();
        let c_sum: f64 = c.sum();
        for i in 0..4 {
            for j in 0..4 {
                let policy: f64 = (0..3).map(|k| a[[k, i]] * e[[k, i, j]]).sum();
                let expected = delta * (policy + lambda * c_sum * h[[i, j]]);
                let got = g.w_rec.as_ref().unwrap()[[i, j]];
                assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0));
            }
            for k in 0..3 {
                assert_eq!(g.a_pi[[k, i]], delta * tr.g[[k, i]]);
            }
            assert_eq!(
                g.c_v.as_ref().unwrap()[i],
                delta * tr.h_vec.as_ref().unwrap()[i]
            );
        }
    }
}
