//! Graph-side feature map: relational GCN layers over a relaxed graph,
//! sum pooling, a small MLP, and L2 normalization onto the unit sphere.
//!
//! Each layer computes σ(Σ_s E_s F W_s), one term per edge label (no-edge
//! counts as a label, so virtual padding nodes still exchange messages
//! through it). The whole map is built on the differentiation tape so both
//! training and gradient-based decoding can differentiate through it — with
//! respect to the parameters and with respect to the relaxed graph itself.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::graph::{GraphSpace, RelaxedGraph};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// A vector on the unit sphere S^{d−1}.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitEmbedding(Vec<f64>);

pub const UNIT_TOL: f64 = 1e-6;

impl UnitEmbedding {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::Contract(format!(
                "embedding norm {} is not 1 within {}",
                norm, UNIT_TOL
            )));
        }
        Ok(UnitEmbedding(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &UnitEmbedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![1, self.0.len()], self.0.clone()).expect("length matches")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    /// Number of R-GCN layers (L).
    pub layers: usize,
    /// Hidden width of the graph layers and the MLP (d_h).
    pub hidden: usize,
    /// Output embedding dimension (d).
    pub dim: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig { layers: 2, hidden: 64, dim: 64 }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.dim == 0 {
            return Err(Error::Config(format!(
                "embedder dimensions must be positive: layers={}, hidden={}, dim={}",
                self.layers, self.hidden, self.dim
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

/// One relational graph-convolution layer on the tape:
/// σ(Σ_s E_s @ F @ W_s), with `e` of shape [m, m, S] and `w` of shape
/// [S, d_in, d_out].
pub fn rgcn_layer(
    tape: &mut Tape,
    f: Var,
    e: Var,
    w: Var,
    activation: Activation,
) -> Result<Var> {
    let s_count = tape.value(e).shape().get(2).copied().ok_or(Error::Shape {
        op: "rgcn-layer",
        details: "edge tensor must be rank 3".into(),
    })?;
    if tape.value(w).shape().first() != Some(&s_count) {
        return Err(Error::Shape {
            op: "rgcn-layer",
            details: format!(
                "weight stack {:?} does not match {} edge labels",
                tape.value(w).shape(),
                s_count
            ),
        });
    }
    let mut acc: Option<Var> = None;
    for s in 0..s_count {
        let e_s = tape.slice_axis2(e, s)?;
        let w_s = tape.slice_axis0(w, s)?;
        let msg = tape.matmul(e_s, f)?;
        let term = tape.matmul(msg, w_s)?;
        acc = Some(match acc {
            Some(prev) => tape.add(prev, term)?,
            None => term,
        });
    }
    let pre = acc.expect("at least one edge label");
    match activation {
        Activation::Relu => tape.relu(pre),
        Activation::Identity => Ok(pre),
    }
}

/// Learned parameters of the graph embedding map.
#[derive(Clone, Debug)]
pub struct EmbedderParams {
    pub cfg: EmbedderConfig,
    pub space: GraphSpace,
    /// One [S, d_in, d_h] stack per layer; layer 0 has d_in = T+1.
    pub relation_weights: Vec<Tensor>,
    pub mlp_hidden_w: Tensor,
    pub mlp_hidden_b: Tensor,
    pub mlp_out_w: Tensor,
    pub mlp_out_b: Tensor,
}

pub const EMBEDDER_CHECKPOINT_KIND: &str = "graph-embedder";

impl EmbedderParams {
    /// Seeded Gaussian initialization scaled by fan-in.
    pub fn init(cfg: EmbedderConfig, space: GraphSpace, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut relation_weights = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let d_in = if l == 0 { space.t + 1 } else { cfg.hidden };
            let std = (2.0 / (space.s * d_in) as f64).sqrt();
            relation_weights.push(Tensor::randn(&[space.s, d_in, cfg.hidden], std, &mut rng));
        }
        let mlp_hidden_w =
            Tensor::randn(&[cfg.hidden, cfg.hidden], (2.0 / cfg.hidden as f64).sqrt(), &mut rng);
        let mlp_hidden_b = Tensor::zeros(&[1, cfg.hidden]);
        let mlp_out_w =
            Tensor::randn(&[cfg.hidden, cfg.dim], (1.0 / cfg.hidden as f64).sqrt(), &mut rng);
        let mlp_out_b = Tensor::zeros(&[1, cfg.dim]);
        Ok(EmbedderParams {
            cfg,
            space,
            relation_weights,
            mlp_hidden_w,
            mlp_hidden_b,
            mlp_out_w,
            mlp_out_b,
        })
    }

    /// Parameter tensors with stable names, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (l, w) in self.relation_weights.iter().enumerate() {
            out.push((format!("layer{}.w", l), w));
        }
        out.push(("mlp.hidden.w".into(), &self.mlp_hidden_w));
        out.push(("mlp.hidden.b".into(), &self.mlp_hidden_b));
        out.push(("mlp.out.w".into(), &self.mlp_out_w));
        out.push(("mlp.out.b".into(), &self.mlp_out_b));
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        for (l, w) in self.relation_weights.iter_mut().enumerate() {
            out.push((format!("layer{}.w", l), w));
        }
        out.push(("mlp.hidden.w".into(), &mut self.mlp_hidden_w));
        out.push(("mlp.hidden.b".into(), &mut self.mlp_hidden_b));
        out.push(("mlp.out.w".into(), &mut self.mlp_out_w));
        out.push(("mlp.out.b".into(), &mut self.mlp_out_b));
        out
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let meta = serde_json::json!({
            "layers": self.cfg.layers,
            "hidden": self.cfg.hidden,
            "dim": self.cfg.dim,
            "m_max": self.space.m_max,
            "t": self.space.t,
            "s": self.space.s,
        });
        let mut ck = Checkpoint::with_meta(EMBEDDER_CHECKPOINT_KIND, meta);
        for (name, t) in self.named_tensors() {
            ck.add(name, t.clone())?;
        }
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(EMBEDDER_CHECKPOINT_KIND)?;
        let get = |key: &str| -> Result<usize> {
            ck.meta[key]
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| Error::Format(format!("checkpoint meta missing '{}'", key)))
        };
        let cfg =
            EmbedderConfig { layers: get("layers")?, hidden: get("hidden")?, dim: get("dim")? };
        let space = GraphSpace::new(get("m_max")?, get("t")?, get("s")?)?;
        let mut relation_weights = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let w = ck.tensor(&format!("layer{}.w", l))?.clone();
            let d_in = if l == 0 { space.t + 1 } else { cfg.hidden };
            if w.shape() != [space.s, d_in, cfg.hidden] {
                return Err(Error::Format(format!(
                    "layer {} weights have shape {:?}, expected [{}, {}, {}]",
                    l,
                    w.shape(),
                    space.s,
                    d_in,
                    cfg.hidden
                )));
            }
            relation_weights.push(w);
        }
        let params = EmbedderParams {
            cfg,
            space,
            relation_weights,
            mlp_hidden_w: ck.tensor("mlp.hidden.w")?.clone(),
            mlp_hidden_b: ck.tensor("mlp.hidden.b")?.clone(),
            mlp_out_w: ck.tensor("mlp.out.w")?.clone(),
            mlp_out_b: ck.tensor("mlp.out.b")?.clone(),
        };
        if params.mlp_out_w.shape() != [cfg.hidden, cfg.dim] {
            return Err(Error::Format("MLP output shape inconsistent with config".into()));
        }
        Ok(params)
    }
}

/// Tape handles for one registration of the embedder parameters.
pub struct EmbedderVars {
    pub relation_weights: Vec<Var>,
    pub mlp_hidden_w: Var,
    pub mlp_hidden_b: Var,
    pub mlp_out_w: Var,
    pub mlp_out_b: Var,
}

impl EmbedderVars {
    pub fn register(tape: &mut Tape, params: &EmbedderParams) -> Self {
        EmbedderVars {
            relation_weights: params
                .relation_weights
                .iter()
                .map(|w| tape.input(w.clone()))
                .collect(),
            mlp_hidden_w: tape.input(params.mlp_hidden_w.clone()),
            mlp_hidden_b: tape.input(params.mlp_hidden_b.clone()),
            mlp_out_w: tape.input(params.mlp_out_w.clone()),
            mlp_out_b: tape.input(params.mlp_out_b.clone()),
        }
    }

    /// Same fixed order as `EmbedderParams::named_tensors`.
    pub fn ordered(&self) -> Vec<Var> {
        let mut out = self.relation_weights.clone();
        out.extend([self.mlp_hidden_w, self.mlp_hidden_b, self.mlp_out_w, self.mlp_out_b]);
        out
    }
}

/// Build the full embedding map on the tape: R-GCN layers, sum pooling, MLP,
/// L2 normalization. Returns a [1, d] unit row.
///
/// `norm_eps` is added to the norm before dividing; pass 0 for inference
/// (a zero pre-normalization vector then fails with a degenerate-embedding
/// error) and a tiny constant inside training losses for stability.
pub fn embed_on_tape(
    tape: &mut Tape,
    vars: &EmbedderVars,
    f: Var,
    e: Var,
    norm_eps: f64,
) -> Result<Var> {
    let mut h = f;
    for w in &vars.relation_weights {
        h = rgcn_layer(tape, h, e, *w, Activation::Relu)?;
    }
    let pooled = tape.col_sums(h)?;
    let hidden_lin = tape.matmul(pooled, vars.mlp_hidden_w)?;
    let hidden_aff = tape.add_row(hidden_lin, vars.mlp_hidden_b)?;
    let hidden = tape.relu(hidden_aff)?;
    let out_lin = tape.matmul(hidden, vars.mlp_out_w)?;
    let out = tape.add_row(out_lin, vars.mlp_out_b)?;
    let norm = tape.norm2(out)?;
    let norm_value = tape.value(norm).scalar_value()?;
    if norm_value <= 0.0 && norm_eps == 0.0 {
        return Err(Error::DegenerateEmbedding(norm_value));
    }
    let safe_norm = if norm_eps > 0.0 { tape.add_scalar(norm, norm_eps)? } else { norm };
    tape.div_scalar(out, safe_norm)
}

/// Embed one relaxed graph with frozen parameters.
pub fn embed(g: &RelaxedGraph, params: &EmbedderParams) -> Result<UnitEmbedding> {
    if g.space() != params.space {
        return Err(Error::Shape {
            op: "embed",
            details: format!(
                "graph space {:?} does not match embedder space {:?}",
                g.space(),
                params.space
            ),
        });
    }
    let mut tape = Tape::new();
    let vars = EmbedderVars::register(&mut tape, params);
    let f = tape.input(g.f.clone());
    let e = tape.input(g.e.clone());
    let z = embed_on_tape(&mut tape, &vars, f, e, 0.0)?;
    UnitEmbedding::new(tape.value(z).data().to_vec())
}

/// Embed a batch sharing one padded size.
pub fn embed_batch(graphs: &[RelaxedGraph], params: &EmbedderParams) -> Result<Vec<UnitEmbedding>> {
    if let Some(bad) = graphs.iter().find(|g| g.space() != params.space) {
        return Err(Error::Shape {
            op: "embed-batch",
            details: format!("graph space {:?} differs from embedder's", bad.space()),
        });
    }
    graphs.iter().map(|g| embed(g, params)).collect()
}
