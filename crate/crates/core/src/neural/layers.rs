//! Embedding and dense+softmax layers plus sparse categorical
//! cross-entropy.

use rand::RngCore;

use super::init::glorot_uniform;
use super::tensor::{gemm_nn, gemm_nt, gemm_tn, Scalar, Tensor};
use super::NeuralError;

/// Token-id → dense-vector lookup table, `[vocab_size × embed_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingParams<S> {
    pub table: Tensor<S>,
}

impl<S: Scalar> EmbeddingParams<S> {
    pub fn zeros(vocab_size: usize, embed_dim: usize) -> Self {
        EmbeddingParams {
            table: Tensor::zeros(&[vocab_size, embed_dim]),
        }
    }

    pub fn glorot(vocab_size: usize, embed_dim: usize, rng: &mut dyn RngCore) -> Self {
        let mut p = Self::zeros(vocab_size, embed_dim);
        glorot_uniform(&mut p.table, vocab_size, embed_dim, rng);
        p
    }

    pub fn vocab_size(&self) -> usize {
        self.table.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.table.cols()
    }

    pub fn param_count(&self) -> usize {
        self.table.len()
    }
}

/// Gather rows of the table for each id: output is `[len(ids) × embed_dim]`.
pub fn embedding_forward<S: Scalar>(
    ids: &[usize],
    params: &EmbeddingParams<S>,
) -> Result<Tensor<S>, NeuralError> {
    let dim = params.embed_dim();
    let vocab = params.vocab_size();
    let mut out = Tensor::zeros(&[ids.len(), dim]);
    for (row, &id) in ids.iter().enumerate() {
        if id >= vocab {
            return Err(NeuralError::IndexOutOfRange { index: id, bound: vocab });
        }
        out.row_mut(row).copy_from_slice(params.table.row(id));
    }
    Ok(out)
}

/// Scatter-add upstream gradients into the rows selected by `ids`.
/// Repeated ids accumulate.
pub fn embedding_backward<S: Scalar>(
    ids: &[usize],
    grad_out: &Tensor<S>,
    grad_table: &mut Tensor<S>,
) -> Result<(), NeuralError> {
    if grad_out.shape() != [ids.len(), grad_table.cols()] {
        return Err(NeuralError::ShapeMismatch(format!(
            "embedding grad shape {:?} for {} ids × {} dims",
            grad_out.shape(),
            ids.len(),
            grad_table.cols()
        )));
    }
    let vocab = grad_table.rows();
    for (row, &id) in ids.iter().enumerate() {
        if id >= vocab {
            return Err(NeuralError::IndexOutOfRange { index: id, bound: vocab });
        }
        let src = grad_out.row(row);
        for (dst, &v) in grad_table.row_mut(id).iter_mut().zip(src) {
            *dst = *dst + v;
        }
    }
    Ok(())
}

/// Affine map applied identically at every timestep: `W: [in × out]`,
/// `b: [out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<S> {
    pub w: Tensor<S>,
    pub b: Tensor<S>,
}

impl<S: Scalar> DenseParams<S> {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        DenseParams {
            w: Tensor::zeros(&[input_dim, output_dim]),
            b: Tensor::zeros(&[output_dim]),
        }
    }

    pub fn glorot(input_dim: usize, output_dim: usize, rng: &mut dyn RngCore) -> Self {
        let mut p = Self::zeros(input_dim, output_dim);
        glorot_uniform(&mut p.w, input_dim, output_dim, rng);
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// `softmax(h·W + b)` row by row, with max subtraction for stability.
/// Each output row sums to 1.
pub fn dense_softmax_forward<S: Scalar>(
    h: &Tensor<S>,
    params: &DenseParams<S>,
) -> Result<Tensor<S>, NeuralError> {
    if h.shape().len() != 2 || h.cols() != params.input_dim() {
        return Err(NeuralError::ShapeMismatch(format!(
            "dense input {:?}, want [_, {}]",
            h.shape(),
            params.input_dim()
        )));
    }
    let batch = h.rows();
    let (din, dout) = (params.input_dim(), params.output_dim());
    let mut logits = Tensor::zeros(&[batch, dout]);
    for row in 0..batch {
        logits.row_mut(row).copy_from_slice(params.b.data());
    }
    gemm_nn(batch, din, dout, h.data(), params.w.data(), logits.data_mut());
    softmax_rows(&mut logits);
    Ok(logits)
}

/// In-place row softmax.
pub fn softmax_rows<S: Scalar>(logits: &mut Tensor<S>) {
    let cols = logits.cols();
    for row in 0..logits.rows() {
        let r = logits.row_mut(row);
        let mut max = r[0];
        for &v in r.iter() {
            if v > max {
                max = v;
            }
        }
        let mut sum = S::zero();
        for v in r.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in r.iter_mut() {
            *v = *v / sum;
        }
        debug_assert_eq!(r.len(), cols);
    }
}

/// Backward through the dense layer given the gradient on the logits
/// (softmax already folded into it by [`sparse_ce_loss`]). Accumulates
/// `dW`/`db` and returns the gradient on `h`.
pub fn dense_backward<S: Scalar>(
    h: &Tensor<S>,
    params: &DenseParams<S>,
    grad_logits: &Tensor<S>,
    grad_w: &mut Tensor<S>,
    grad_b: &mut Tensor<S>,
) -> Result<Tensor<S>, NeuralError> {
    let batch = h.rows();
    if grad_logits.shape() != [batch, params.output_dim()] {
        return Err(NeuralError::ShapeMismatch(format!(
            "logit grad {:?}, want [{batch}, {}]",
            grad_logits.shape(),
            params.output_dim()
        )));
    }
    let (din, dout) = (params.input_dim(), params.output_dim());
    let mut dh = Tensor::zeros(&[batch, din]);
    gemm_nt(batch, dout, din, grad_logits.data(), params.w.data(), dh.data_mut());
    gemm_tn(batch, din, dout, h.data(), grad_logits.data(), grad_w.data_mut());
    for row in 0..batch {
        let r = grad_logits.row(row);
        for (b, &v) in grad_b.data_mut().iter_mut().zip(r) {
            *b = *b + v;
        }
    }
    Ok(dh)
}

/// Mean negative log-likelihood of the integer targets over every
/// `(sequence position, batch row)` cell, together with the combined
/// softmax+cross-entropy gradient `(probs − one_hot) / count` on the
/// logits.
///
/// `probs` holds one `[batch × V]` tensor per timestep; `targets` holds
/// the matching id column per timestep.
pub fn sparse_ce_loss<S: Scalar>(
    probs: &[Tensor<S>],
    targets: &[Vec<usize>],
) -> Result<(S, Vec<Tensor<S>>), NeuralError> {
    if probs.len() != targets.len() {
        return Err(NeuralError::ShapeMismatch(format!(
            "{} prob steps vs {} target steps",
            probs.len(),
            targets.len()
        )));
    }
    let mut count = 0usize;
    for (p, t) in probs.iter().zip(targets) {
        if p.rows() != t.len() {
            return Err(NeuralError::ShapeMismatch(format!(
                "{} prob rows vs {} targets in one step",
                p.rows(),
                t.len()
            )));
        }
        count += t.len();
    }
    if count == 0 {
        return Err(NeuralError::ShapeMismatch("empty batch".into()));
    }

    let eps = S::from_f64(1e-12);
    let inv = S::one() / S::from_f64(count as f64);
    let mut loss = S::zero();
    let mut grads = Vec::with_capacity(probs.len());
    for (p, ids) in probs.iter().zip(targets) {
        let vocab = p.cols();
        let mut g = p.clone();
        for (row, &id) in ids.iter().enumerate() {
            if id >= vocab {
                return Err(NeuralError::IndexOutOfRange { index: id, bound: vocab });
            }
            let pr = p.row(row)[id];
            loss = loss - (pr.max(eps)).ln();
            let grow = g.row_mut(row);
            grow[id] = grow[id] - S::one();
        }
        g.data_mut().iter_mut().for_each(|v| *v = *v * inv);
        grads.push(g);
    }
    loss = loss * inv;
    if !loss.is_finite() {
        return Err(NeuralError::NonFinite("cross-entropy loss".into()));
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_gathers_rows_verbatim() {
        let params = EmbeddingParams {
            table: Tensor::from_vec(&[3, 2], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(),
        };
        let out = embedding_forward(&[0, 2, 0], &params).unwrap();
        assert_eq!(out.data(), &[0.0, 1.0, 4.0, 5.0, 0.0, 1.0]);
        assert!(embedding_forward(&[3], &params).is_err());
    }

    #[test]
    fn repeated_id_gradient_sums() {
        let mut grad_table = Tensor::<f64>::zeros(&[3, 2]);
        let grad_out = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 10.0, 20.0]).unwrap();
        embedding_backward(&[1, 1], &grad_out, &mut grad_table).unwrap();
        assert_eq!(grad_table.row(1), &[11.0, 22.0]);
        assert_eq!(grad_table.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn equal_logits_give_uniform_distribution() {
        let params = DenseParams::<f64>::zeros(2, 4);
        let h = Tensor::from_vec(&[1, 2], vec![0.3, -0.7]).unwrap();
        let probs = dense_softmax_forward(&h, &params).unwrap();
        for &p in probs.data() {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_of_one_two_three() {
        // exp-normalized [1, 2, 3], evaluated by hand.
        let mut t = Tensor::from_vec(&[1, 3], vec![1.0f64, 2.0, 3.0]).unwrap();
        softmax_rows(&mut t);
        let expect = [0.09003057317038046, 0.24472847105479767, 0.6652409557748219];
        for (a, e) in t.data().iter().zip(expect) {
            assert!((a - e).abs() < 1e-9);
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let mut a = Tensor::from_vec(&[1, 3], vec![0.1f64, -2.0, 5.0]).unwrap();
        let mut b = Tensor::from_vec(&[1, 3], vec![100.1, 98.0, 105.0]).unwrap();
        softmax_rows(&mut a);
        softmax_rows(&mut b);
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn dense_param_count_row() {
        assert_eq!(DenseParams::<f32>::zeros(64, 350).param_count(), 22_750);
        assert_eq!(EmbeddingParams::<f32>::zeros(350, 64).param_count(), 22_400);
    }

    #[test]
    fn perfect_prediction_zero_loss() {
        let probs = vec![Tensor::from_vec(&[2, 2], vec![1.0f64, 0.0, 0.0, 1.0]).unwrap()];
        let (loss, _) = sparse_ce_loss(&probs, &[vec![0, 1]]).unwrap();
        assert!(loss.abs() < 1e-9);
    }

    #[test]
    fn uniform_probs_loss_is_ln_v() {
        let probs = vec![Tensor::from_vec(&[1, 4], vec![0.25; 4]).unwrap()];
        let (loss, grads) = sparse_ce_loss(&probs, &[vec![2]]).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);
        // grad = (p - onehot)/count
        assert_eq!(grads[0].data(), &[0.25, 0.25, -0.75, 0.25]);
    }

    #[test]
    fn target_out_of_range_is_an_error() {
        let probs = vec![Tensor::from_vec(&[1, 2], vec![0.5, 0.5]).unwrap()];
        assert!(matches!(
            sparse_ce_loss(&probs, &[vec![2]]),
            Err(NeuralError::IndexOutOfRange { .. })
        ));
    }
}
