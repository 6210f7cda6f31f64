//! String-side model: a character tokenizer, a small Transformer encoder,
//! and L2 normalization onto the same sphere the graph embedder targets.
//!
//! Training minimizes the squared surrogate loss ‖h(x) − z‖² = 2 − 2⟨h, z⟩
//! against frozen graph embeddings. Dropout is fixed at 0 (the full-scale
//! reference setting), so there is no dropout plumbing at all.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::embedder::{embed, EmbedderParams, UnitEmbedding};
use crate::error::{Error, Result};
use crate::graph::PaddedGraph;
use crate::optim::{Adam, AdamConfig};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const PAD_ID: usize = 0;
pub const START_ID: usize = 1;
const RESERVED_IDS: usize = 2;
const LN_EPS: f64 = 1e-5;

/// Full-scale reference settings; desk defaults are smaller.
pub mod full_scale {
    pub const BATCH_SIZE: usize = 128;
    pub const LEARNING_RATE: f64 = 1e-3;
    pub const MAX_LEN: usize = 25;
    pub const LAYERS: usize = 4;
    pub const WIDTH: usize = 128;
    pub const DROPOUT: f64 = 0.0;
}

/// Character vocabulary with dense ids: 0 = padding, 1 = sequence start,
/// then the corpus characters in sorted order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    chars: Vec<char>,
}

impl Vocabulary {
    pub fn from_corpus<'a>(inputs: impl IntoIterator<Item = &'a str>) -> Self {
        let mut chars: Vec<char> = inputs.into_iter().flat_map(|s| s.chars()).collect();
        chars.sort_unstable();
        chars.dedup();
        Vocabulary { chars }
    }

    /// Total id count including the two reserved ids.
    pub fn size(&self) -> usize {
        self.chars.len() + RESERVED_IDS
    }

    pub fn id(&self, c: char) -> Result<usize> {
        self.chars
            .binary_search(&c)
            .map(|i| i + RESERVED_IDS)
            .map_err(|_| Error::Input(format!("character '{}' not in vocabulary", c)))
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }
}

/// A tokenized input: start id, character ids, padding to fixed length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tokens {
    /// Length max_len + 1.
    pub ids: Vec<usize>,
    /// Number of non-padding positions (1 + character count).
    pub valid: usize,
}

/// Strict tokenization: unknown characters and overlength inputs are errors,
/// never silently truncated.
pub fn tokenize(s: &str, vocab: &Vocabulary, max_len: usize) -> Result<Tokens> {
    let n_chars = s.chars().count();
    if n_chars > max_len {
        return Err(Error::Input(format!(
            "input of {} characters exceeds the maximum length {}",
            n_chars, max_len
        )));
    }
    let mut ids = Vec::with_capacity(max_len + 1);
    ids.push(START_ID);
    for c in s.chars() {
        ids.push(vocab.id(c)?);
    }
    ids.resize(max_len + 1, PAD_ID);
    Ok(Tokens { ids, valid: 1 + n_chars })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressorConfig {
    pub layers: usize,
    pub width: usize,
    pub heads: usize,
    pub max_len: usize,
    /// Output embedding dimension; must match the graph embedder's.
    pub dim: usize,
}

impl RegressorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0
            || self.width == 0
            || self.heads == 0
            || self.max_len == 0
            || self.dim == 0
        {
            return Err(Error::Config("regressor dimensions must be positive".into()));
        }
        if self.width % self.heads != 0 {
            return Err(Error::Config(format!(
                "head count {} must divide model width {}",
                self.heads, self.width
            )));
        }
        Ok(())
    }
}

/// Sinusoidal positional encodings for `len` positions at `width` channels.
fn positional_encoding(len: usize, width: usize) -> Tensor {
    let mut pe = Tensor::zeros(&[len, width]);
    for pos in 0..len {
        for i in 0..width / 2 {
            let rate = (pos as f64) / 10000f64.powf(2.0 * i as f64 / width as f64);
            pe.set2(pos, 2 * i, rate.sin());
            if 2 * i + 1 < width {
                pe.set2(pos, 2 * i + 1, rate.cos());
            }
        }
    }
    pe
}

#[derive(Clone, Debug)]
struct LayerParams {
    wq: Tensor,
    bq: Tensor,
    wk: Tensor,
    bk: Tensor,
    wv: Tensor,
    bv: Tensor,
    wo: Tensor,
    bo: Tensor,
    ln1_gamma: Tensor,
    ln1_beta: Tensor,
    ffn_w1: Tensor,
    ffn_b1: Tensor,
    ffn_w2: Tensor,
    ffn_b2: Tensor,
    ln2_gamma: Tensor,
    ln2_beta: Tensor,
}

const LAYER_TENSOR_NAMES: [&str; 16] = [
    "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln1.gamma", "ln1.beta", "ffn.w1", "ffn.b1",
    "ffn.w2", "ffn.b2", "ln2.gamma", "ln2.beta",
];

impl LayerParams {
    fn tensors(&self) -> [&Tensor; 16] {
        [
            &self.wq,
            &self.bq,
            &self.wk,
            &self.bk,
            &self.wv,
            &self.bv,
            &self.wo,
            &self.bo,
            &self.ln1_gamma,
            &self.ln1_beta,
            &self.ffn_w1,
            &self.ffn_b1,
            &self.ffn_w2,
            &self.ffn_b2,
            &self.ln2_gamma,
            &self.ln2_beta,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor; 16] {
        [
            &mut self.wq,
            &mut self.bq,
            &mut self.wk,
            &mut self.bk,
            &mut self.wv,
            &mut self.bv,
            &mut self.wo,
            &mut self.bo,
            &mut self.ln1_gamma,
            &mut self.ln1_beta,
            &mut self.ffn_w1,
            &mut self.ffn_b1,
            &mut self.ffn_w2,
            &mut self.ffn_b2,
            &mut self.ln2_gamma,
            &mut self.ln2_beta,
        ]
    }
}

/// Learned parameters of the string encoder.
#[derive(Clone, Debug)]
pub struct RegressorParams {
    pub cfg: RegressorConfig,
    pub vocab: Vocabulary,
    token_embedding: Tensor,
    layers: Vec<LayerParams>,
    proj_w: Tensor,
    proj_b: Tensor,
    /// Fixed, recomputed from the config; never checkpointed.
    positional: Tensor,
}

pub const REGRESSOR_CHECKPOINT_KIND: &str = "string-regressor";

impl RegressorParams {
    pub fn init(cfg: RegressorConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        cfg.validate()?;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let w = cfg.width;
        let std = (1.0 / w as f64).sqrt();
        let mut layers = Vec::with_capacity(cfg.layers);
        for _ in 0..cfg.layers {
            layers.push(LayerParams {
                wq: Tensor::randn(&[w, w], std, &mut rng),
                bq: Tensor::zeros(&[1, w]),
                wk: Tensor::randn(&[w, w], std, &mut rng),
                bk: Tensor::zeros(&[1, w]),
                wv: Tensor::randn(&[w, w], std, &mut rng),
                bv: Tensor::zeros(&[1, w]),
                wo: Tensor::randn(&[w, w], std, &mut rng),
                bo: Tensor::zeros(&[1, w]),
                ln1_gamma: Tensor::zeros(&[1, w]).map(|_| 1.0),
                ln1_beta: Tensor::zeros(&[1, w]),
                ffn_w1: Tensor::randn(&[w, 4 * w], std, &mut rng),
                ffn_b1: Tensor::zeros(&[1, 4 * w]),
                ffn_w2: Tensor::randn(&[4 * w, w], (1.0 / (4.0 * w as f64)).sqrt(), &mut rng),
                ffn_b2: Tensor::zeros(&[1, w]),
                ln2_gamma: Tensor::zeros(&[1, w]).map(|_| 1.0),
                ln2_beta: Tensor::zeros(&[1, w]),
            });
        }
        Ok(RegressorParams {
            token_embedding: Tensor::randn(&[vocab.size(), w], 0.5, &mut rng),
            proj_w: Tensor::randn(&[w, cfg.dim], std, &mut rng),
            proj_b: Tensor::zeros(&[1, cfg.dim]),
            positional: positional_encoding(cfg.max_len + 1, w),
            cfg,
            vocab,
            layers,
        })
    }

    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("embedding".to_string(), &self.token_embedding)];
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, t) in LAYER_TENSOR_NAMES.iter().zip(layer.tensors()) {
                out.push((format!("layer{}.{}", l, name), t));
            }
        }
        out.push(("proj.w".into(), &self.proj_w));
        out.push(("proj.b".into(), &self.proj_b));
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = vec![("embedding".to_string(), &mut self.token_embedding)];
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (name, t) in LAYER_TENSOR_NAMES.iter().zip(layer.tensors_mut()) {
                out.push((format!("layer{}.{}", l, name), t));
            }
        }
        out.push(("proj.w".into(), &mut self.proj_w));
        out.push(("proj.b".into(), &mut self.proj_b));
        out
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let meta = serde_json::json!({
            "layers": self.cfg.layers,
            "width": self.cfg.width,
            "heads": self.cfg.heads,
            "max_len": self.cfg.max_len,
            "dim": self.cfg.dim,
            "vocab": self.vocab.chars.iter().collect::<String>(),
        });
        let mut ck = Checkpoint::with_meta(REGRESSOR_CHECKPOINT_KIND, meta);
        for (name, t) in self.named_tensors() {
            ck.add(name, t.clone())?;
        }
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(REGRESSOR_CHECKPOINT_KIND)?;
        let get = |key: &str| -> Result<usize> {
            ck.meta[key]
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| Error::Format(format!("checkpoint meta missing '{}'", key)))
        };
        let cfg = RegressorConfig {
            layers: get("layers")?,
            width: get("width")?,
            heads: get("heads")?,
            max_len: get("max_len")?,
            dim: get("dim")?,
        };
        cfg.validate()?;
        let vocab_str = ck.meta["vocab"]
            .as_str()
            .ok_or_else(|| Error::Format("checkpoint meta missing 'vocab'".into()))?;
        let vocab = Vocabulary { chars: vocab_str.chars().collect() };
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let t = |name: &str| ck.tensor(&format!("layer{}.{}", l, name)).cloned();
            layers.push(LayerParams {
                wq: t("wq")?,
                bq: t("bq")?,
                wk: t("wk")?,
                bk: t("bk")?,
                wv: t("wv")?,
                bv: t("bv")?,
                wo: t("wo")?,
                bo: t("bo")?,
                ln1_gamma: t("ln1.gamma")?,
                ln1_beta: t("ln1.beta")?,
                ffn_w1: t("ffn.w1")?,
                ffn_b1: t("ffn.b1")?,
                ffn_w2: t("ffn.w2")?,
                ffn_b2: t("ffn.b2")?,
                ln2_gamma: t("ln2.gamma")?,
                ln2_beta: t("ln2.beta")?,
            });
        }
        let token_embedding = ck.tensor("embedding")?.clone();
        if token_embedding.shape() != [vocab.size(), cfg.width] {
            return Err(Error::Format(format!(
                "embedding table shape {:?} does not match vocabulary size {} and width {}",
                token_embedding.shape(),
                vocab.size(),
                cfg.width
            )));
        }
        Ok(RegressorParams {
            token_embedding,
            proj_w: ck.tensor("proj.w")?.clone(),
            proj_b: ck.tensor("proj.b")?.clone(),
            positional: positional_encoding(cfg.max_len + 1, cfg.width),
            cfg,
            vocab,
            layers,
        })
    }
}

/// Tape handles for one registration of the regressor parameters.
pub struct RegressorVars {
    embedding: Var,
    layers: Vec<Vec<Var>>,
    proj_w: Var,
    proj_b: Var,
}

impl RegressorVars {
    pub fn register(tape: &mut Tape, params: &RegressorParams) -> Self {
        RegressorVars {
            embedding: tape.input(params.token_embedding.clone()),
            layers: params
                .layers
                .iter()
                .map(|l| l.tensors().map(|t| tape.input(t.clone())).to_vec())
                .collect(),
            proj_w: tape.input(params.proj_w.clone()),
            proj_b: tape.input(params.proj_b.clone()),
        }
    }

    /// Same fixed order as `RegressorParams::named_tensors`.
    pub fn ordered(&self) -> Vec<Var> {
        let mut out = vec![self.embedding];
        for l in &self.layers {
            out.extend(l.iter().copied());
        }
        out.extend([self.proj_w, self.proj_b]);
        out
    }
}

/// Build the encoder on the tape: embeddings + positional encodings, then
/// post-norm Transformer layers (self-attention with padded keys masked out,
/// 4× feed-forward), pooled at the start token, projected and normalized.
pub fn regress_on_tape(
    tape: &mut Tape,
    vars: &RegressorVars,
    params: &RegressorParams,
    tokens: &Tokens,
    norm_eps: f64,
) -> Result<Var> {
    let cfg = params.cfg;
    let dh = cfg.width / cfg.heads;
    let embedded = tape.gather_rows(vars.embedding, &tokens.ids)?;
    let pe = tape.input(params.positional.clone());
    let mut x = tape.add(embedded, pe)?;

    for layer in &vars.layers {
        let [wq, bq, wk, bk, wv, bv, wo, bo, ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b] =
            layer.as_slice()
        else {
            return Err(Error::Contract("layer variable list out of shape".into()));
        };
        let q_lin = tape.matmul(x, *wq)?;
        let q = tape.add_row(q_lin, *bq)?;
        let k_lin = tape.matmul(x, *wk)?;
        let k = tape.add_row(k_lin, *bk)?;
        let v_lin = tape.matmul(x, *wv)?;
        let v = tape.add_row(v_lin, *bv)?;

        let mut heads = Vec::with_capacity(cfg.heads);
        for h in 0..cfg.heads {
            let (lo, hi) = (h * dh, (h + 1) * dh);
            let qh = tape.slice_cols(q, lo, hi)?;
            let kh = tape.slice_cols(k, lo, hi)?;
            let vh = tape.slice_cols(v, lo, hi)?;
            let scores = tape.matmul_tb(qh, kh)?;
            let scaled = tape.scale(scores, 1.0 / (dh as f64).sqrt())?;
            let attn = tape.masked_softmax_rows(scaled, tokens.valid)?;
            heads.push(tape.matmul(attn, vh)?);
        }
        let cat = tape.concat_cols(&heads)?;
        let o_lin = tape.matmul(cat, *wo)?;
        let attn_out = tape.add_row(o_lin, *bo)?;
        let res1 = tape.add(x, attn_out)?;
        x = tape.layer_norm_rows(res1, *ln1_g, *ln1_b, LN_EPS)?;

        let h_lin = tape.matmul(x, *w1)?;
        let h_aff = tape.add_row(h_lin, *b1)?;
        let h_act = tape.relu(h_aff)?;
        let f_lin = tape.matmul(h_act, *w2)?;
        let ffn = tape.add_row(f_lin, *b2)?;
        let res2 = tape.add(x, ffn)?;
        x = tape.layer_norm_rows(res2, *ln2_g, *ln2_b, LN_EPS)?;
    }

    let pooled = tape.slice_rows(x, 0, 1)?;
    let out_lin = tape.matmul(pooled, vars.proj_w)?;
    let out = tape.add_row(out_lin, vars.proj_b)?;
    let norm = tape.norm2(out)?;
    let norm_value = tape.value(norm).scalar_value()?;
    if norm_value <= 0.0 && norm_eps == 0.0 {
        return Err(Error::DegenerateEmbedding(norm_value));
    }
    let safe_norm = if norm_eps > 0.0 { tape.add_scalar(norm, norm_eps)? } else { norm };
    tape.div_scalar(out, safe_norm)
}

/// Embed one string with frozen parameters.
pub fn regress(s: &str, params: &RegressorParams) -> Result<UnitEmbedding> {
    let tokens = tokenize(s, &params.vocab, params.cfg.max_len)?;
    let mut tape = Tape::new();
    let vars = RegressorVars::register(&mut tape, params);
    let h = regress_on_tape(&mut tape, &vars, params, &tokens, 0.0)?;
    UnitEmbedding::new(tape.value(h).data().to_vec())
}

/// Squared distance between unit vectors via the inner-product identity.
pub fn surrogate_loss(h: &UnitEmbedding, z: &UnitEmbedding) -> f64 {
    2.0 - 2.0 * h.dot(z)
}

/// The same loss on the tape: 2 − 2⟨h, z⟩.
pub fn surrogate_loss_on_tape(tape: &mut Tape, h: Var, z: Var) -> Result<Var> {
    let sim = tape.dot(h, z)?;
    let neg = tape.scale(sim, -2.0)?;
    tape.add_scalar(neg, 2.0)
}

/// Precompute frozen graph-embedding targets for regression training.
pub fn embed_targets(graphs: &[PaddedGraph], embedder: &EmbedderParams) -> Result<Vec<Tensor>> {
    graphs
        .par_iter()
        .map(|g| embed(&g.relax(), embedder).map(|z| z.to_tensor()))
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RegressorTrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_steps: u64,
    /// Evaluations without improvement before stopping.
    pub patience: u32,
    /// Steps between validation evaluations.
    pub eval_every: u64,
    pub seed: u64,
}

impl Default for RegressorTrainConfig {
    fn default() -> Self {
        RegressorTrainConfig {
            batch_size: 32,
            learning_rate: full_scale::LEARNING_RATE,
            max_steps: 2000,
            patience: 10,
            eval_every: 200,
            seed: 0,
        }
    }
}

pub struct RegressorOutcome {
    pub params: RegressorParams,
    pub log: Vec<crate::contrastive::ProgressRow>,
}

/// Train the encoder against frozen graph embeddings with early stopping on
/// validation mean squared error. The vocabulary is built from the training
/// inputs; validation strings with unseen characters fail strictly.
pub fn train_regressor(
    train: &[(String, PaddedGraph)],
    val: &[(String, PaddedGraph)],
    embedder: &EmbedderParams,
    cfg: RegressorConfig,
    tcfg: &RegressorTrainConfig,
) -> Result<RegressorOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("regressor training needs a non-empty train set".into()));
    }
    if embedder.cfg.dim != cfg.dim {
        return Err(Error::Config(format!(
            "regressor dim {} must match embedder dim {}",
            cfg.dim, embedder.cfg.dim
        )));
    }
    if tcfg.batch_size == 0 || tcfg.learning_rate < 0.0 {
        return Err(Error::Config("invalid optimizer settings".into()));
    }

    let vocab = Vocabulary::from_corpus(train.iter().map(|(s, _)| s.as_str()));
    let mut params = RegressorParams::init(cfg, vocab, tcfg.seed)?;

    // Tokenize everything once, strictly, and freeze targets.
    let train_tokens: Vec<Tokens> = train
        .iter()
        .map(|(s, _)| tokenize(s, &params.vocab, cfg.max_len))
        .collect::<Result<_>>()?;
    let val_tokens: Vec<Tokens> = val
        .iter()
        .map(|(s, _)| tokenize(s, &params.vocab, cfg.max_len))
        .collect::<Result<_>>()?;
    let train_graphs: Vec<PaddedGraph> = train.iter().map(|(_, g)| g.clone()).collect();
    let val_graphs: Vec<PaddedGraph> = val.iter().map(|(_, g)| g.clone()).collect();
    let train_targets = embed_targets(&train_graphs, embedder)?;
    let val_targets = embed_targets(&val_graphs, embedder)?;

    let shapes: Vec<Vec<usize>> =
        params.named_tensors().iter().map(|(_, t)| t.shape().to_vec()).collect();
    let shape_refs: Vec<&[usize]> = shapes.iter().map(|s| s.as_slice()).collect();
    let mut adam = Adam::new(AdamConfig::with_lr(tcfg.learning_rate), &shape_refs);

    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(tcfg.seed);
    let batch_size = tcfg.batch_size.min(train.len());
    let mut log = Vec::new();
    let mut best: Option<(f64, RegressorParams)> = None;
    let mut evals_without_improvement = 0u32;

    for step in 1..=tcfg.max_steps {
        let picked = rand::seq::index::sample(&mut rng, train.len(), batch_size);
        let batch: Vec<usize> = picked.iter().collect();

        // Per-sample tapes in parallel; order-preserving collect keeps the
        // reduction deterministic regardless of thread scheduling.
        let per_sample: Vec<Result<(f64, Vec<Tensor>)>> = batch
            .par_iter()
            .map(|&i| {
                let mut tape = Tape::new();
                let vars = RegressorVars::register(&mut tape, &params);
                let h = regress_on_tape(
                    &mut tape,
                    &vars,
                    &params,
                    &train_tokens[i],
                    crate::contrastive::TRAIN_NORM_EPS,
                )?;
                let z = tape.input(train_targets[i].clone());
                let loss = surrogate_loss_on_tape(&mut tape, h, z)?;
                let grads = tape.backward(loss)?;
                let gs: Vec<Tensor> = vars
                    .ordered()
                    .iter()
                    .zip(&shapes)
                    .map(|(&v, shape)| grads.wrt_or_zeros(v, shape))
                    .collect();
                Ok((tape.value(loss).scalar_value()?, gs))
            })
            .collect();

        let mut mean_grads: Vec<Tensor> = shapes.iter().map(|s| Tensor::zeros(s)).collect();
        let mut loss_sum = 0.0;
        for sample in per_sample {
            let (loss, gs) = sample.map_err(|e| match e {
                Error::NonFinite(what) => Error::Diverged { step: step as usize, what },
                other => other,
            })?;
            loss_sum += loss;
            for (acc, g) in mean_grads.iter_mut().zip(&gs) {
                acc.axpy(1.0, g);
            }
        }
        let scale = 1.0 / batch_size as f64;
        for g in &mut mean_grads {
            *g = g.map(|v| v * scale);
        }
        let train_loss = loss_sum * scale;

        let mut tensors = params.named_tensors_mut();
        let mut refs: Vec<&mut Tensor> = tensors.iter_mut().map(|(_, t)| &mut **t).collect();
        adam.step(&mut refs, &mean_grads)?;
        drop(tensors);

        let mut row =
            crate::contrastive::ProgressRow { step, train_loss, val_loss: None };
        if !val.is_empty() && step % tcfg.eval_every == 0 {
            let val_mse = mean_loss(&params, &val_tokens, &val_targets)?;
            row.val_loss = Some(val_mse);
            let improved = best.as_ref().is_none_or(|(b, _)| val_mse < *b);
            if improved {
                best = Some((val_mse, params.clone()));
                evals_without_improvement = 0;
            } else {
                evals_without_improvement += 1;
            }
            log.push(row);
            if evals_without_improvement >= tcfg.patience {
                break;
            }
            continue;
        }
        log.push(row);
    }

    let params = match best {
        Some((_, p)) => p,
        None => params,
    };
    Ok(RegressorOutcome { params, log })
}

/// Mean surrogate loss of the current parameters over a tokenized set.
pub fn mean_loss(
    params: &RegressorParams,
    tokens: &[Tokens],
    targets: &[Tensor],
) -> Result<f64> {
    if tokens.len() != targets.len() {
        return Err(Error::Contract(format!(
            "{} token sequences but {} targets",
            tokens.len(),
            targets.len()
        )));
    }
    let losses: Vec<Result<f64>> = tokens
        .par_iter()
        .zip(targets.par_iter())
        .map(|(t, z)| {
            let mut tape = Tape::new();
            let vars = RegressorVars::register(&mut tape, params);
            let h = regress_on_tape(&mut tape, &vars, params, t, 0.0)?;
            let zv = tape.input(z.clone());
            let loss = surrogate_loss_on_tape(&mut tape, h, zv)?;
            tape.value(loss).scalar_value()
        })
        .collect();
    let mut sum = 0.0;
    for l in losses {
        sum += l?;
    }
    Ok(sum / tokens.len().max(1) as f64)
}
