//! Gated recurrent unit: forward pass, cache, and backpropagation through
//! time.
//!
//! Gate equations, single-bias formulation with the reset gate applied
//! inside the recurrent candidate term:
//!
//! ```text
//! z_t = σ(x_t·W_z + h_{t-1}·U_z + b_z)
//! r_t = σ(x_t·W_r + h_{t-1}·U_r + b_r)
//! h̃_t = tanh(x_t·W_h + (r_t ⊙ h_{t-1})·U_h + b_h)
//! h_t = (1 - z_t) ⊙ h_{t-1} + z_t ⊙ h̃_t
//! ```

use rand::RngCore;

use super::init::glorot_uniform;
use super::tensor::{gemm_nn, gemm_nt, gemm_tn, Scalar, Tensor};
use super::NeuralError;

/// Trainable GRU parameters. Input kernels are `[input_dim × hidden]`,
/// recurrent kernels `[hidden × hidden]`, biases `[hidden]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams<S> {
    pub w_z: Tensor<S>,
    pub w_r: Tensor<S>,
    pub w_h: Tensor<S>,
    pub u_z: Tensor<S>,
    pub u_r: Tensor<S>,
    pub u_h: Tensor<S>,
    pub b_z: Tensor<S>,
    pub b_r: Tensor<S>,
    pub b_h: Tensor<S>,
}

impl<S: Scalar> GruParams<S> {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        GruParams {
            w_z: Tensor::zeros(&[input_dim, hidden]),
            w_r: Tensor::zeros(&[input_dim, hidden]),
            w_h: Tensor::zeros(&[input_dim, hidden]),
            u_z: Tensor::zeros(&[hidden, hidden]),
            u_r: Tensor::zeros(&[hidden, hidden]),
            u_h: Tensor::zeros(&[hidden, hidden]),
            b_z: Tensor::zeros(&[hidden]),
            b_r: Tensor::zeros(&[hidden]),
            b_h: Tensor::zeros(&[hidden]),
        }
    }

    /// Glorot-uniform kernels, zero biases.
    pub fn glorot(input_dim: usize, hidden: usize, rng: &mut dyn RngCore) -> Self {
        let mut p = Self::zeros(input_dim, hidden);
        for w in [&mut p.w_z, &mut p.w_r, &mut p.w_h] {
            glorot_uniform(w, input_dim, hidden, rng);
        }
        for u in [&mut p.u_z, &mut p.u_r, &mut p.u_h] {
            glorot_uniform(u, hidden, hidden, rng);
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w_z.cols()
    }

    /// `3·((input_dim + hidden)·hidden + hidden)`.
    pub fn param_count(&self) -> usize {
        3 * ((self.input_dim() + self.hidden()) * self.hidden() + self.hidden())
    }

    pub fn tensors(&self) -> [&Tensor<S>; 9] {
        [
            &self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h, &self.b_z,
            &self.b_r, &self.b_h,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor<S>; 9] {
        [
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }
}

/// Activations retained by the forward pass for backpropagation.
///
/// `hs` holds `h_0..h_T` (length `T + 1`); the remaining vectors hold one
/// entry per timestep.
#[derive(Debug, Clone)]
pub struct GruCache<S> {
    pub xs: Vec<Tensor<S>>,
    pub hs: Vec<Tensor<S>>,
    zs: Vec<Tensor<S>>,
    rs: Vec<Tensor<S>>,
    hcs: Vec<Tensor<S>>,
    rhs: Vec<Tensor<S>>,
}

impl<S: Scalar> GruCache<S> {
    pub fn steps(&self) -> usize {
        self.xs.len()
    }

    /// Hidden state after step `t` (1-based; `hidden(0)` is `h_0`).
    pub fn hidden(&self, t: usize) -> &Tensor<S> {
        &self.hs[t]
    }

    /// The hidden sequence `h_1..h_T`.
    pub fn hidden_seq(&self) -> &[Tensor<S>] {
        &self.hs[1..]
    }
}

fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// Run the GRU over `xs` (one `[batch × input_dim]` tensor per timestep).
/// `h0` defaults to zeros.
pub fn gru_forward<S: Scalar>(
    xs: Vec<Tensor<S>>,
    params: &GruParams<S>,
    h0: Option<Tensor<S>>,
) -> Result<GruCache<S>, NeuralError> {
    let input_dim = params.input_dim();
    let hidden = params.hidden();
    let batch = xs
        .first()
        .map(|x| x.rows())
        .ok_or_else(|| NeuralError::ShapeMismatch("empty input sequence".into()))?;
    for x in &xs {
        if x.shape() != [batch, input_dim] {
            return Err(NeuralError::ShapeMismatch(format!(
                "input step shape {:?}, want [{batch}, {input_dim}]",
                x.shape()
            )));
        }
    }
    let h0 = h0.unwrap_or_else(|| Tensor::zeros(&[batch, hidden]));
    if h0.shape() != [batch, hidden] {
        return Err(NeuralError::ShapeMismatch(format!(
            "h0 shape {:?}, want [{batch}, {hidden}]",
            h0.shape()
        )));
    }

    let steps = xs.len();
    let mut cache = GruCache {
        xs,
        hs: Vec::with_capacity(steps + 1),
        zs: Vec::with_capacity(steps),
        rs: Vec::with_capacity(steps),
        hcs: Vec::with_capacity(steps),
        rhs: Vec::with_capacity(steps),
    };
    cache.hs.push(h0);

    for t in 0..steps {
        let x = &cache.xs[t];
        let h_prev = &cache.hs[t];

        let mut a_z = broadcast_bias(batch, &params.b_z);
        gemm_nn(batch, input_dim, hidden, x.data(), params.w_z.data(), a_z.data_mut());
        gemm_nn(batch, hidden, hidden, h_prev.data(), params.u_z.data(), a_z.data_mut());
        let mut a_r = broadcast_bias(batch, &params.b_r);
        gemm_nn(batch, input_dim, hidden, x.data(), params.w_r.data(), a_r.data_mut());
        gemm_nn(batch, hidden, hidden, h_prev.data(), params.u_r.data(), a_r.data_mut());

        let z = map(&a_z, sigmoid);
        let r = map(&a_r, sigmoid);

        let mut rh = r.clone();
        for (rv, hv) in rh.data_mut().iter_mut().zip(h_prev.data()) {
            *rv = *rv * *hv;
        }

        let mut a_h = broadcast_bias(batch, &params.b_h);
        gemm_nn(batch, input_dim, hidden, x.data(), params.w_h.data(), a_h.data_mut());
        gemm_nn(batch, hidden, hidden, rh.data(), params.u_h.data(), a_h.data_mut());
        let hc = map(&a_h, |v| v.tanh());

        let mut h = Tensor::zeros(&[batch, hidden]);
        for i in 0..h.len() {
            let zv = z.data()[i];
            h.data_mut()[i] =
                (S::one() - zv) * h_prev.data()[i] + zv * hc.data()[i];
        }

        cache.zs.push(z);
        cache.rs.push(r);
        cache.hcs.push(hc);
        cache.rhs.push(rh);
        cache.hs.push(h);
    }
    Ok(cache)
}

/// Gradients produced by [`gru_backward`]: one tensor per parameter, plus
/// gradients on the input sequence and the initial hidden state.
#[derive(Debug, Clone)]
pub struct GruGrads<S> {
    pub params: GruParams<S>,
    pub dxs: Vec<Tensor<S>>,
    pub dh0: Tensor<S>,
}

/// Backpropagate `grad_h_seq` (one upstream gradient per timestep) through
/// the cached forward pass.
pub fn gru_backward<S: Scalar>(
    params: &GruParams<S>,
    cache: &GruCache<S>,
    grad_h_seq: &[Tensor<S>],
) -> Result<GruGrads<S>, NeuralError> {
    let steps = cache.steps();
    if grad_h_seq.len() != steps {
        return Err(NeuralError::ShapeMismatch(format!(
            "{} upstream gradients for {} steps",
            grad_h_seq.len(),
            steps
        )));
    }
    let input_dim = params.input_dim();
    let hidden = params.hidden();
    let batch = cache.hs[0].rows();

    let mut grads = GruGrads {
        params: GruParams::zeros(input_dim, hidden),
        dxs: (0..steps).map(|_| Tensor::zeros(&[batch, input_dim])).collect(),
        dh0: Tensor::zeros(&[batch, hidden]),
    };

    let mut dh = Tensor::zeros(&[batch, hidden]);
    for t in (0..steps).rev() {
        if grad_h_seq[t].shape() != [batch, hidden] {
            return Err(NeuralError::ShapeMismatch(format!(
                "upstream gradient {} shape {:?}",
                t,
                grad_h_seq[t].shape()
            )));
        }
        for (dv, gv) in dh.data_mut().iter_mut().zip(grad_h_seq[t].data()) {
            *dv = *dv + *gv;
        }

        let x = &cache.xs[t];
        let h_prev = &cache.hs[t];
        let (z, r, hc, rh) = (&cache.zs[t], &cache.rs[t], &cache.hcs[t], &cache.rhs[t]);

        // h = (1-z)·h_prev + z·hc
        let mut da_z = Tensor::zeros(&[batch, hidden]);
        let mut da_h = Tensor::zeros(&[batch, hidden]);
        let mut dh_prev = Tensor::zeros(&[batch, hidden]);
        for i in 0..dh.len() {
            let dhv = dh.data()[i];
            let zv = z.data()[i];
            let hcv = hc.data()[i];
            let hpv = h_prev.data()[i];
            let dz = dhv * (hcv - hpv);
            da_z.data_mut()[i] = dz * zv * (S::one() - zv);
            da_h.data_mut()[i] = dhv * zv * (S::one() - hcv * hcv);
            dh_prev.data_mut()[i] = dhv * (S::one() - zv);
        }

        // candidate path
        let mut drh = Tensor::zeros(&[batch, hidden]);
        gemm_nt(batch, hidden, hidden, da_h.data(), params.u_h.data(), drh.data_mut());
        gemm_nt(batch, hidden, input_dim, da_h.data(), params.w_h.data(), grads.dxs[t].data_mut());
        gemm_tn(batch, input_dim, hidden, x.data(), da_h.data(), grads.params.w_h.data_mut());
        gemm_tn(batch, hidden, hidden, rh.data(), da_h.data(), grads.params.u_h.data_mut());
        add_col_sum(&da_h, &mut grads.params.b_h);

        // reset gate path
        let mut da_r = Tensor::zeros(&[batch, hidden]);
        for i in 0..drh.len() {
            let drhv = drh.data()[i];
            let rv = r.data()[i];
            dh_prev.data_mut()[i] = dh_prev.data()[i] + drhv * rv;
            let dr = drhv * h_prev.data()[i];
            da_r.data_mut()[i] = dr * rv * (S::one() - rv);
        }
        gemm_nt(batch, hidden, input_dim, da_r.data(), params.w_r.data(), grads.dxs[t].data_mut());
        gemm_nt(batch, hidden, hidden, da_r.data(), params.u_r.data(), dh_prev.data_mut());
        gemm_tn(batch, input_dim, hidden, x.data(), da_r.data(), grads.params.w_r.data_mut());
        gemm_tn(batch, hidden, hidden, h_prev.data(), da_r.data(), grads.params.u_r.data_mut());
        add_col_sum(&da_r, &mut grads.params.b_r);

        // update gate path
        gemm_nt(batch, hidden, input_dim, da_z.data(), params.w_z.data(), grads.dxs[t].data_mut());
        gemm_nt(batch, hidden, hidden, da_z.data(), params.u_z.data(), dh_prev.data_mut());
        gemm_tn(batch, input_dim, hidden, x.data(), da_z.data(), grads.params.w_z.data_mut());
        gemm_tn(batch, hidden, hidden, h_prev.data(), da_z.data(), grads.params.u_z.data_mut());
        add_col_sum(&da_z, &mut grads.params.b_z);

        dh = dh_prev;
    }
    grads.dh0 = dh;
    Ok(grads)
}

fn broadcast_bias<S: Scalar>(batch: usize, bias: &Tensor<S>) -> Tensor<S> {
    let hidden = bias.len();
    let mut out = Tensor::zeros(&[batch, hidden]);
    for row in 0..batch {
        out.row_mut(row).copy_from_slice(bias.data());
    }
    out
}

fn add_col_sum<S: Scalar>(m: &Tensor<S>, acc: &mut Tensor<S>) {
    let cols = m.cols();
    for row in 0..m.rows() {
        let r = m.row(row);
        for (a, &v) in acc.data_mut().iter_mut().zip(r) {
            *a = *a + v;
        }
        debug_assert_eq!(r.len(), cols);
    }
}

fn map<S: Scalar>(t: &Tensor<S>, f: impl Fn(S) -> S) -> Tensor<S> {
    let mut out = t.clone();
    out.data_mut().iter_mut().for_each(|v| *v = f(*v));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_params(input_dim: usize, hidden: usize, v: f64) -> GruParams<f64> {
        let mut p = GruParams::zeros(input_dim, hidden);
        for t in p.tensors_mut() {
            t.fill(v);
        }
        p
    }

    #[test]
    fn zero_params_give_zero_hidden() {
        let p = GruParams::<f64>::zeros(2, 3);
        let xs = vec![
            Tensor::from_vec(&[1, 2], vec![1.0, -1.0]).unwrap(),
            Tensor::from_vec(&[1, 2], vec![0.5, 2.0]).unwrap(),
        ];
        let cache = gru_forward(xs, &p, None).unwrap();
        for t in 1..=2 {
            assert!(cache.hidden(t).data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn scalar_hand_case() {
        // 1-dim cell, every parameter 0.5, x = [1], h0 = 0. Worked through
        // the four gate formulas on plain scalars:
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let z = sig(1.0 * 0.5 + 0.0 * 0.5 + 0.5);
        let r = sig(1.0 * 0.5 + 0.0 * 0.5 + 0.5);
        let hc = (1.0f64 * 0.5 + (r * 0.0) * 0.5 + 0.5).tanh();
        let expect = (1.0 - z) * 0.0 + z * hc;

        let p = constant_params(1, 1, 0.5);
        let xs = vec![Tensor::from_vec(&[1, 1], vec![1.0]).unwrap()];
        let cache = gru_forward(xs, &p, None).unwrap();
        assert!((cache.hidden(1).data()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn param_count_matches_formula() {
        assert_eq!(GruParams::<f32>::zeros(1, 64).param_count(), 12_672);
        assert_eq!(GruParams::<f32>::zeros(64, 64).param_count(), 24_768);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_grads() {
        let mut rng = crate::neural::seeded_rng(7);
        let p = GruParams::<f64>::glorot(3, 4, &mut rng);
        let xs = vec![
            Tensor::from_vec(&[2, 3], vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6]).unwrap(),
            Tensor::from_vec(&[2, 3], vec![1.0, 0.0, -1.0, 0.2, 0.2, 0.2]).unwrap(),
        ];
        let cache = gru_forward(xs, &p, None).unwrap();
        let zeros: Vec<_> = (0..2).map(|_| Tensor::zeros(&[2, 4])).collect();
        let grads = gru_backward(&p, &cache, &zeros).unwrap();
        for t in grads.params.tensors() {
            assert!(t.data().iter().all(|&v| v == 0.0));
        }
        assert!(grads.dh0.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_wrong_len() {
        let p = GruParams::<f64>::zeros(1, 1);
        let xs = vec![Tensor::from_vec(&[1, 1], vec![1.0]).unwrap()];
        let cache = gru_forward(xs, &p, None).unwrap();
        assert!(gru_backward(&p, &cache, &[]).is_err());
    }

    /// Loss used by the finite-difference oracle: a fixed random linear
    /// functional of the hidden sequence, so grad_h_seq equals the
    /// coefficients exactly.
    fn probe_loss(
        params: &GruParams<f64>,
        xs: &[Tensor<f64>],
        cs: &[Tensor<f64>],
        h0: &Tensor<f64>,
    ) -> f64 {
        let cache = gru_forward(xs.to_vec(), params, Some(h0.clone())).unwrap();
        cs.iter()
            .enumerate()
            .map(|(t, c)| {
                cache
                    .hidden(t + 1)
                    .data()
                    .iter()
                    .zip(c.data())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .sum()
    }

    fn random_tensor(shape: &[usize], rng: &mut impl rand::Rng) -> Tensor<f64> {
        let data = (0..shape.iter().product::<usize>())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn backward_matches_central_finite_differences() {
        use crate::neural::gradcheck::rel_error;

        let (input_dim, hidden, batch, steps) = (3usize, 4usize, 2usize, 3usize);
        let mut rng = crate::neural::seeded_rng(11);
        let params = GruParams::<f64>::glorot(input_dim, hidden, &mut rng);
        let xs: Vec<_> = (0..steps).map(|_| random_tensor(&[batch, input_dim], &mut rng)).collect();
        let cs: Vec<_> = (0..steps).map(|_| random_tensor(&[batch, hidden], &mut rng)).collect();
        let h0 = random_tensor(&[batch, hidden], &mut rng);

        let cache = gru_forward(xs.clone(), &params, Some(h0.clone())).unwrap();
        let grads = gru_backward(&params, &cache, &cs).unwrap();

        let eps = 1e-5;
        let mut worst = 0.0f64;

        // All nine parameter tensors.
        for ti in 0..9 {
            let len = params.tensors()[ti].len();
            for i in 0..len {
                let mut p = params.clone();
                p.tensors_mut()[ti].data_mut()[i] += eps;
                let up = probe_loss(&p, &xs, &cs, &h0);
                p.tensors_mut()[ti].data_mut()[i] -= 2.0 * eps;
                let down = probe_loss(&p, &xs, &cs, &h0);
                let numeric = (up - down) / (2.0 * eps);
                worst = worst.max(rel_error(grads.params.tensors()[ti].data()[i], numeric));
            }
        }

        // The input sequence.
        for (t, x) in xs.iter().enumerate() {
            for i in 0..x.len() {
                let mut xs2 = xs.clone();
                xs2[t].data_mut()[i] += eps;
                let up = probe_loss(&params, &xs2, &cs, &h0);
                xs2[t].data_mut()[i] -= 2.0 * eps;
                let down = probe_loss(&params, &xs2, &cs, &h0);
                let numeric = (up - down) / (2.0 * eps);
                worst = worst.max(rel_error(grads.dxs[t].data()[i], numeric));
            }
        }

        // The initial hidden state.
        for i in 0..h0.len() {
            let mut h = h0.clone();
            h.data_mut()[i] += eps;
            let up = probe_loss(&params, &xs, &cs, &h);
            h.data_mut()[i] -= 2.0 * eps;
            let down = probe_loss(&params, &xs, &cs, &h);
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(rel_error(grads.dh0.data()[i], numeric));
        }

        assert!(worst < 1e-4, "max relative error {worst}");
    }
}
