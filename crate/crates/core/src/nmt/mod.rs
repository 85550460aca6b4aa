//! The two translation models: a GRU over raw token ids fed as scalars,
//! and a GRU over learned embeddings. Both are per-timestep sequence
//! labelers — source position t predicts target position t — which is
//! what their input/output shapes require.

pub mod checkpoint;
pub mod train;

pub use checkpoint::{load_checkpoint, parse_checkpoint, save_checkpoint, CheckpointMeta};
pub use train::{train, EpochStats, TrainConfig, TrainReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Vocabulary, PAD_ID, PAD_TOKEN, UNK_TOKEN};
use crate::neural::{
    dense_backward, dense_softmax_forward, embedding_backward, embedding_forward, gru_backward,
    gru_forward, seeded_rng, sparse_ce_loss, DenseParams, EmbeddingParams, GruCache, GruGrads,
    GruParams, NeuralError, Scalar, Tensor,
};

#[derive(Debug, Error)]
pub enum NmtError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("checkpoint version mismatch: {0}")]
    VersionMismatch(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SimpleGru,
    EmbeddedGru,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::SimpleGru => write!(f, "simple_gru"),
            ModelKind::EmbeddedGru => write!(f, "embedded_gru"),
        }
    }
}

/// Architecture description. `source_vocab_size` and `embed_dim` only
/// matter for the embedded model; vocabulary sizes count every id a
/// sequence may contain (pad and unk included).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hidden: usize,
    #[serde(default)]
    pub embed_dim: usize,
    pub seq_len: usize,
    #[serde(default)]
    pub source_vocab_size: usize,
    pub target_vocab_size: usize,
}

impl ModelSpec {
    pub fn simple(seq_len: usize, target_vocab_size: usize) -> Self {
        ModelSpec {
            kind: ModelKind::SimpleGru,
            hidden: 64,
            embed_dim: 0,
            seq_len,
            source_vocab_size: 0,
            target_vocab_size,
        }
    }

    pub fn embedded(seq_len: usize, source_vocab_size: usize, target_vocab_size: usize) -> Self {
        ModelSpec {
            kind: ModelKind::EmbeddedGru,
            hidden: 64,
            embed_dim: 64,
            seq_len,
            source_vocab_size,
            target_vocab_size,
        }
    }

    fn validate(&self) -> Result<(), NmtError> {
        if self.hidden == 0 || self.seq_len == 0 {
            return Err(NmtError::InvalidSpec("hidden and seq_len must be positive".into()));
        }
        if self.target_vocab_size < 2 {
            return Err(NmtError::InvalidSpec("target vocabulary needs at least 2 ids".into()));
        }
        if self.kind == ModelKind::EmbeddedGru && (self.embed_dim == 0 || self.source_vocab_size == 0)
        {
            return Err(NmtError::InvalidSpec(
                "embedded model needs embed_dim and source_vocab_size".into(),
            ));
        }
        Ok(())
    }

    fn gru_input_dim(&self) -> usize {
        match self.kind {
            ModelKind::SimpleGru => 1,
            ModelKind::EmbeddedGru => self.embed_dim,
        }
    }
}

/// Trainable state for either model kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<S> {
    pub spec: ModelSpec,
    pub embedding: Option<EmbeddingParams<S>>,
    pub gru: GruParams<S>,
    pub dense: DenseParams<S>,
}

/// Gradients mirroring a model's parameters, in the same shapes.
#[derive(Debug, Clone)]
pub struct ModelGrads<S> {
    pub embedding: Option<EmbeddingParams<S>>,
    pub gru: GruParams<S>,
    pub dense: DenseParams<S>,
}

/// Everything the backward pass needs from one forward run, plus the
/// per-timestep output distributions.
pub struct ForwardCache<S> {
    pub gru: GruCache<S>,
    pub probs: Vec<Tensor<S>>,
    ids_by_step: Vec<Vec<usize>>,
}

/// Seeded parameter construction per the spec's layer stack.
pub fn build_model<S: Scalar>(spec: ModelSpec, seed: u64) -> Result<Model<S>, NmtError> {
    spec.validate()?;
    let mut rng = seeded_rng(seed);
    let embedding = match spec.kind {
        ModelKind::SimpleGru => None,
        ModelKind::EmbeddedGru => Some(EmbeddingParams::glorot(
            spec.source_vocab_size,
            spec.embed_dim,
            &mut rng,
        )),
    };
    let gru = GruParams::glorot(spec.gru_input_dim(), spec.hidden, &mut rng);
    let dense = DenseParams::glorot(spec.hidden, spec.target_vocab_size, &mut rng);
    Ok(Model {
        spec,
        embedding,
        gru,
        dense,
    })
}

impl<S: Scalar> Model<S> {
    /// Total trainable parameter count.
    pub fn param_count(&self) -> usize {
        self.embedding.as_ref().map_or(0, EmbeddingParams::param_count)
            + self.gru.param_count()
            + self.dense.param_count()
    }

    /// Parameters in canonical order (embedding table, the nine GRU
    /// tensors, dense kernel, dense bias). Checkpoints, Adam state, and
    /// gradients all follow this order.
    pub fn param_tensors(&self) -> Vec<&Tensor<S>> {
        let mut out = Vec::with_capacity(12);
        if let Some(e) = &self.embedding {
            out.push(&e.table);
        }
        out.extend(self.gru.tensors());
        out.push(&self.dense.w);
        out.push(&self.dense.b);
        out
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut out = Vec::with_capacity(12);
        if let Some(e) = &mut self.embedding {
            out.push(&mut e.table);
        }
        out.extend(self.gru.tensors_mut());
        out.push(&mut self.dense.w);
        out.push(&mut self.dense.b);
        out
    }

    /// Canonical (name, tensor) pairs, same order as [`param_tensors`].
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<S>)> {
        let tensors = self.param_tensors();
        self.tensor_names().into_iter().zip(tensors).collect()
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(12);
        if self.embedding.is_some() {
            names.push("embedding.table".to_string());
        }
        for n in ["w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h"] {
            names.push(format!("gru.{n}"));
        }
        names.push("dense.w".to_string());
        names.push("dense.b".to_string());
        names
    }

    fn step_inputs(&self, batch: &[&[u32]]) -> Result<(Vec<Tensor<S>>, Vec<Vec<usize>>), NmtError> {
        let t_len = self.spec.seq_len;
        for row in batch {
            if row.len() != t_len {
                return Err(NeuralError::ShapeMismatch(format!(
                    "source row length {} but model expects {}",
                    row.len(),
                    t_len
                ))
                .into());
            }
        }
        let mut xs = Vec::with_capacity(t_len);
        let mut ids_by_step = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let ids: Vec<usize> = batch.iter().map(|row| row[t] as usize).collect();
            let x = match (&self.spec.kind, &self.embedding) {
                (ModelKind::SimpleGru, _) => {
                    let data: Vec<S> = ids.iter().map(|&id| S::from_f64(id as f64)).collect();
                    Tensor::from_vec(&[batch.len(), 1], data)?
                }
                (ModelKind::EmbeddedGru, Some(e)) => embedding_forward(&ids, e)?,
                (ModelKind::EmbeddedGru, None) => {
                    return Err(NmtError::InvalidSpec("embedded model without table".into()))
                }
            };
            xs.push(x);
            ids_by_step.push(ids);
        }
        Ok((xs, ids_by_step))
    }

    /// Run the full stack over a batch of padded source rows.
    pub fn forward(&self, batch: &[&[u32]]) -> Result<ForwardCache<S>, NmtError> {
        let (xs, ids_by_step) = self.step_inputs(batch)?;
        let gru = gru_forward(xs, &self.gru, None)?;
        let mut probs = Vec::with_capacity(self.spec.seq_len);
        for t in 1..=self.spec.seq_len {
            probs.push(dense_softmax_forward(gru.hidden(t), &self.dense)?);
        }
        Ok(ForwardCache {
            gru,
            probs,
            ids_by_step,
        })
    }

    /// Mean sparse cross-entropy over a batch, no gradients.
    pub fn loss(&self, src: &[&[u32]], tgt: &[&[u32]]) -> Result<S, NmtError> {
        let cache = self.forward(src)?;
        let targets = target_columns(tgt, self.spec.seq_len)?;
        let (loss, _) = sparse_ce_loss(&cache.probs, &targets)?;
        Ok(loss)
    }

    /// Forward + backward over a batch. Returns the loss, the cache (for
    /// accuracy bookkeeping), and gradients in canonical order.
    pub fn compute_grads(
        &self,
        src: &[&[u32]],
        tgt: &[&[u32]],
    ) -> Result<(S, ForwardCache<S>, ModelGrads<S>), NmtError> {
        let cache = self.forward(src)?;
        let targets = target_columns(tgt, self.spec.seq_len)?;
        let (loss, grad_logits) = sparse_ce_loss(&cache.probs, &targets)?;

        let mut grads = ModelGrads {
            embedding: self
                .embedding
                .as_ref()
                .map(|e| EmbeddingParams::zeros(e.vocab_size(), e.embed_dim())),
            gru: GruParams::zeros(self.spec.gru_input_dim(), self.spec.hidden),
            dense: DenseParams::zeros(self.spec.hidden, self.spec.target_vocab_size),
        };

        let mut grad_h = Vec::with_capacity(self.spec.seq_len);
        for t in 0..self.spec.seq_len {
            grad_h.push(dense_backward(
                cache.gru.hidden(t + 1),
                &self.dense,
                &grad_logits[t],
                &mut grads.dense.w,
                &mut grads.dense.b,
            )?);
        }
        let gru_grads: GruGrads<S> = gru_backward(&self.gru, &cache.gru, &grad_h)?;
        grads.gru = gru_grads.params;

        if let Some(et) = &mut grads.embedding {
            for (t, ids) in cache.ids_by_step.iter().enumerate() {
                embedding_backward(ids, &gru_grads.dxs[t], &mut et.table)?;
            }
        }
        Ok((loss, cache, grads))
    }

    /// Argmax decode of one padded source row; ties break toward the
    /// smaller id.
    pub fn predict(&self, source: &[u32]) -> Result<Vec<u32>, NmtError> {
        let cache = self.forward(&[source])?;
        Ok(cache
            .probs
            .iter()
            .map(|p| argmax_row(p.row(0)) as u32)
            .collect())
    }
}

fn target_columns(tgt: &[&[u32]], t_len: usize) -> Result<Vec<Vec<usize>>, NmtError> {
    for row in tgt {
        if row.len() != t_len {
            return Err(NeuralError::ShapeMismatch(format!(
                "target row length {} but model expects {}",
                row.len(),
                t_len
            ))
            .into());
        }
    }
    Ok((0..t_len)
        .map(|t| tgt.iter().map(|row| row[t] as usize).collect())
        .collect())
}

pub(crate) fn argmax_row<S: Scalar>(row: &[S]) -> usize {
    let mut best = 0usize;
    let mut best_v = row[0];
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Token-level match fraction between prediction and target matrices.
/// Unmasked counts every position (the paper-comparable number); masked
/// counts only positions whose target is not the pad id. A mask that
/// selects nothing yields 1.0 vacuously.
pub fn accuracy(pred: &[Vec<u32>], target: &[Vec<u32>], masked: bool) -> Result<f64, NmtError> {
    if pred.len() != target.len() {
        return Err(NeuralError::ShapeMismatch(format!(
            "{} prediction rows vs {} target rows",
            pred.len(),
            target.len()
        ))
        .into());
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for (p, t) in pred.iter().zip(target) {
        if p.len() != t.len() {
            return Err(NeuralError::ShapeMismatch(format!(
                "row lengths {} vs {}",
                p.len(),
                t.len()
            ))
            .into());
        }
        for (a, b) in p.iter().zip(t) {
            if masked && *b == PAD_ID {
                continue;
            }
            total += 1;
            if a == b {
                hits += 1;
            }
        }
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(hits as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    /// Pads stripped from the output.
    Clean,
    /// Pads render as `<PAD>`.
    Verbose,
}

/// Render an id sequence as words. Unknown or out-of-vocabulary ids
/// render as `<UNK>` in both modes.
pub fn ids_to_text(ids: &[u32], vocab: &Vocabulary, mode: RenderMode) -> String {
    let mut words: Vec<&str> = Vec::with_capacity(ids.len());
    for &id in ids {
        if id == PAD_ID {
            if mode == RenderMode::Verbose {
                words.push(PAD_TOKEN);
            }
            continue;
        }
        words.push(vocab.word_of(id).unwrap_or(UNK_TOKEN));
    }
    words.join(" ")
}

/// Argmax per output row, then render. Accepts the per-timestep
/// probability rows of a single sequence.
pub fn logits_to_text<S: Scalar>(probs: &[Tensor<S>], vocab: &Vocabulary, mode: RenderMode) -> String {
    let ids: Vec<u32> = probs.iter().map(|p| argmax_row(p.row(0)) as u32).collect();
    ids_to_text(&ids, vocab, mode)
}

/// Compare analytic gradients against 64-bit central finite differences
/// over every parameter (or a seeded 10⁴-element subsample for larger
/// models). Returns the max relative error.
pub fn grad_check(
    model: &mut Model<f64>,
    src: &[&[u32]],
    tgt: &[&[u32]],
    epsilon: f64,
) -> Result<f64, NmtError> {
    use rand::seq::SliceRandom;

    let (_, _, grads) = model.compute_grads(src, tgt)?;
    let analytic: Vec<Tensor<f64>> = {
        let mut v = Vec::new();
        if let Some(e) = &grads.embedding {
            v.push(e.table.clone());
        }
        v.extend(grads.gru.tensors().into_iter().cloned());
        v.push(grads.dense.w.clone());
        v.push(grads.dense.b.clone());
        v
    };

    let sizes: Vec<usize> = analytic.iter().map(Tensor::len).collect();
    let total: usize = sizes.iter().sum();
    let mut coords: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .flat_map(|(ti, &len)| (0..len).map(move |i| (ti, i)))
        .collect();
    const LIMIT: usize = 10_000;
    if total > LIMIT {
        coords.shuffle(&mut seeded_rng(total as u64));
        coords.truncate(LIMIT);
    }

    let mut worst = 0.0f64;
    for (ti, i) in coords {
        let orig = model.param_tensors()[ti].data()[i];
        model.param_tensors_mut()[ti].data_mut()[i] = orig + epsilon;
        let up = model.loss(src, tgt)?.to_f64();
        model.param_tensors_mut()[ti].data_mut()[i] = orig - epsilon;
        let down = model.loss(src, tgt)?.to_f64();
        model.param_tensors_mut()[ti].data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let err = crate::neural::gradcheck::rel_error(analytic[ti].data()[i], numeric);
        if err > worst {
            worst = err;
        }
    }
    Ok(worst)
}
