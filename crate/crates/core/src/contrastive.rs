//! Contrastive training of the graph embedder: node-drop augmentation,
//! in-batch negative tuples, the generic contrastive loss family and its
//! InfoNCE member, plus the two training entry points (pre-training on an
//! auxiliary graph set, fine-tuning with early stopping).
//!
//! The InfoNCE form is τ·log(ε + Σ_k exp((⟨z,z_k⁻⟩ − ⟨z,z⁺⟩)/τ)), which is
//! the generic loss φ(Σ_k ϕ(·)) with φ(t) = τ·log(ε+t) and ϕ(t) = exp(t/τ);
//! both are implemented as separate code paths and cross-checked in tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::holdout_split;
use crate::embedder::{embed_on_tape, EmbedderConfig, EmbedderParams, EmbedderVars, UNIT_TOL};
use crate::error::{Error, Result};
use crate::graph::{PaddedGraph, RelaxedGraph, NO_EDGE};
use crate::optim::{Adam, AdamConfig};
use crate::tape::{Tape, Var};

/// Norm floor used inside training losses only; inference embeds strictly.
pub const TRAIN_NORM_EPS: f64 = 1e-12;

/// Fraction of the output set held out for early stopping.
pub const VALIDATION_FRACTION: f64 = 0.1;

/// Full-scale reference settings; desk defaults are smaller.
pub mod full_scale {
    pub const BATCH_SIZE: usize = 512;
    pub const LEARNING_RATE: f64 = 1e-3;
    pub const PRETRAIN_STEPS: u64 = 640_000;
    pub const NODE_DROP_RATE: f64 = 0.05;
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContrastiveConfig {
    /// Temperature τ of the InfoNCE loss.
    pub temperature: f64,
    /// The ε constant inside the logarithm.
    pub epsilon: f64,
    /// Node-dropping rate for augmentation.
    pub drop_rate: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fine-tuning step budget.
    pub max_steps: u64,
    /// Pre-training step budget (T₁).
    pub pretrain_steps: u64,
    /// Evaluations without improvement before stopping.
    pub patience: u32,
    /// Steps between validation evaluations.
    pub eval_every: u64,
    pub seed: u64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        ContrastiveConfig {
            temperature: 0.1,
            epsilon: 1.0,
            drop_rate: full_scale::NODE_DROP_RATE,
            batch_size: 64,
            learning_rate: full_scale::LEARNING_RATE,
            max_steps: 1000,
            pretrain_steps: 0,
            patience: 10,
            eval_every: 200,
            seed: 0,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature <= 0.0 {
            return Err(Error::Config(format!("temperature {} must be > 0", self.temperature)));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::Config(format!("epsilon {} must be > 0", self.epsilon)));
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return Err(Error::Config(format!("drop rate {} outside [0, 1)", self.drop_rate)));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2".into()));
        }
        if self.learning_rate < 0.0 {
            return Err(Error::Config("learning rate must be non-negative".into()));
        }
        Ok(())
    }
}

/// One anchor with its positive and negatives, all relaxed.
#[derive(Clone, Debug)]
pub struct ContrastiveTuple {
    pub anchor: RelaxedGraph,
    pub positive: RelaxedGraph,
    pub negatives: Vec<RelaxedGraph>,
}

impl ContrastiveTuple {
    pub fn new(
        anchor: RelaxedGraph,
        positive: RelaxedGraph,
        negatives: Vec<RelaxedGraph>,
    ) -> Result<Self> {
        if negatives.is_empty() {
            return Err(Error::Contract("a contrastive tuple needs at least one negative".into()));
        }
        let space = anchor.space();
        if positive.space() != space || negatives.iter().any(|g| g.space() != space) {
            return Err(Error::Contract("tuple members must share one padded space".into()));
        }
        Ok(ContrastiveTuple { anchor, positive, negatives })
    }
}

/// Replace ⌈rate·n_real⌉ uniformly chosen real nodes by virtual ones and cut
/// their edges; at least one real node always survives.
pub fn node_drop_augment(
    g: &PaddedGraph,
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PaddedGraph> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("drop rate {} outside [0, 1)", rate)));
    }
    let space = g.space();
    let real: Vec<usize> = (0..space.m_max).filter(|&i| !g.is_virtual(i)).collect();
    if real.is_empty() {
        return Err(Error::GraphInvariant(
            "cannot augment a graph with zero real nodes".into(),
        ));
    }
    let mut k = (rate * real.len() as f64).ceil() as usize;
    if k >= real.len() {
        k = real.len() - 1;
    }
    if k == 0 {
        return Ok(g.clone());
    }
    let chosen = rand::seq::index::sample(rng, real.len(), k);
    let dropped: Vec<usize> = chosen.iter().map(|i| real[i]).collect();

    let m = space.m_max;
    let mut labels = g.labels().to_vec();
    let mut edges = vec![NO_EDGE; m * m];
    for i in 0..m {
        for j in 0..m {
            edges[i * m + j] = g.edge(i, j);
        }
    }
    for &d in &dropped {
        labels[d] = space.virtual_label();
        for i in 0..m {
            edges[d * m + i] = NO_EDGE;
            edges[i * m + d] = NO_EDGE;
        }
    }
    PaddedGraph::new(space, labels, edges)
}

/// In-batch tuples: each anchor's positive is its own augmentation and its
/// negatives are the other B−1 augmentations.
pub fn build_batch_tuples(
    batch: &[PaddedGraph],
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ContrastiveTuple>> {
    if batch.len() < 2 {
        return Err(Error::Config(format!(
            "contrastive batches need at least 2 graphs, got {}",
            batch.len()
        )));
    }
    let augmented: Vec<RelaxedGraph> = batch
        .iter()
        .map(|g| node_drop_augment(g, rate, rng).map(|a| a.relax()))
        .collect::<Result<_>>()?;
    let mut tuples = Vec::with_capacity(batch.len());
    for (i, g) in batch.iter().enumerate() {
        let negatives: Vec<RelaxedGraph> = augmented
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i)
            .map(|(_, a)| a.clone())
            .collect();
        tuples.push(ContrastiveTuple::new(g.relax(), augmented[i].clone(), negatives)?);
    }
    Ok(tuples)
}

fn check_unit(tape: &Tape, v: Var, what: &str) -> Result<()> {
    let t = tape.value(v);
    let norm: f64 = t.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::Contract(format!(
            "{} has norm {}, expected a unit vector",
            what, norm
        )));
    }
    Ok(())
}

/// A scalar-to-scalar map built on the tape.
pub type TapeScalarFn<'a> = &'a mut dyn FnMut(&mut Tape, Var) -> Result<Var>;

/// The generic contrastive loss φ(Σ_k ϕ(−⟨z,z⁺⟩ + ⟨z,z_k⁻⟩)) for monotone
/// increasing differentiable φ, ϕ.
pub fn generic_contrastive_loss(
    tape: &mut Tape,
    z: Var,
    z_pos: Var,
    negatives: &[Var],
    outer: TapeScalarFn,
    inner: TapeScalarFn,
) -> Result<Var> {
    if negatives.is_empty() {
        return Err(Error::Contract("contrastive loss needs at least one negative".into()));
    }
    check_unit(tape, z, "anchor")?;
    check_unit(tape, z_pos, "positive")?;
    for (k, &n) in negatives.iter().enumerate() {
        check_unit(tape, n, &format!("negative {}", k))?;
    }
    let pos = tape.dot(z, z_pos)?;
    let mut acc: Option<Var> = None;
    for &neg in negatives {
        let sim = tape.dot(z, neg)?;
        let diff = tape.sub(sim, pos)?;
        let term = inner(tape, diff)?;
        acc = Some(match acc {
            Some(prev) => tape.add(prev, term)?,
            None => term,
        });
    }
    outer(tape, acc.expect("at least one negative"))
}

/// InfoNCE: τ·log(ε + Σ_k exp((⟨z,z_k⁻⟩ − ⟨z,z⁺⟩)/τ)).
pub fn infonce_loss(
    tape: &mut Tape,
    z: Var,
    z_pos: Var,
    negatives: &[Var],
    temperature: f64,
    epsilon: f64,
) -> Result<Var> {
    if temperature <= 0.0 {
        return Err(Error::Config(format!("temperature {} must be > 0", temperature)));
    }
    if epsilon <= 0.0 {
        return Err(Error::Config(format!("epsilon {} must be > 0", epsilon)));
    }
    if negatives.is_empty() {
        return Err(Error::Contract("contrastive loss needs at least one negative".into()));
    }
    check_unit(tape, z, "anchor")?;
    check_unit(tape, z_pos, "positive")?;
    for (k, &n) in negatives.iter().enumerate() {
        check_unit(tape, n, &format!("negative {}", k))?;
    }
    let pos = tape.dot(z, z_pos)?;
    let mut acc: Option<Var> = None;
    for &neg in negatives {
        let sim = tape.dot(z, neg)?;
        let diff = tape.sub(sim, pos)?;
        let scaled = tape.scale(diff, 1.0 / temperature)?;
        let term = tape.exp(scaled)?;
        acc = Some(match acc {
            Some(prev) => tape.add(prev, term)?,
            None => term,
        });
    }
    let shifted = tape.add_scalar(acc.expect("at least one negative"), epsilon)?;
    let logged = tape.ln(shifted)?;
    tape.scale(logged, temperature)
}

/// Mean InfoNCE over a batch with in-batch negatives: anchor i against its
/// own augmentation as positive and the other augmentations as negatives.
/// Embeddings are computed once and shared across the tuples.
pub fn batch_loss_on_tape(
    tape: &mut Tape,
    vars: &EmbedderVars,
    anchors: &[RelaxedGraph],
    positives: &[RelaxedGraph],
    temperature: f64,
    epsilon: f64,
) -> Result<Var> {
    let b = anchors.len();
    if b < 2 || positives.len() != b {
        return Err(Error::Contract(format!(
            "batch loss needs matched anchor/positive lists of length >= 2, got {} and {}",
            b,
            positives.len()
        )));
    }
    let mut z_anchor = Vec::with_capacity(b);
    let mut z_pos = Vec::with_capacity(b);
    for g in anchors {
        let f = tape.input(g.f.clone());
        let e = tape.input(g.e.clone());
        z_anchor.push(embed_on_tape(tape, vars, f, e, TRAIN_NORM_EPS)?);
    }
    for g in positives {
        let f = tape.input(g.f.clone());
        let e = tape.input(g.e.clone());
        z_pos.push(embed_on_tape(tape, vars, f, e, TRAIN_NORM_EPS)?);
    }
    let mut acc: Option<Var> = None;
    for i in 0..b {
        let negatives: Vec<Var> =
            (0..b).filter(|&k| k != i).map(|k| z_pos[k]).collect();
        let loss = infonce_loss(tape, z_anchor[i], z_pos[i], &negatives, temperature, epsilon)?;
        acc = Some(match acc {
            Some(prev) => tape.add(prev, loss)?,
            None => loss,
        });
    }
    tape.scale(acc.expect("non-empty batch"), 1.0 / b as f64)
}

/// One row of training progress; validation loss only on evaluation steps.
#[derive(Clone, Copy, Debug)]
pub struct ProgressRow {
    pub step: u64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

pub struct ContrastiveOutcome {
    pub params: EmbedderParams,
    pub log: Vec<ProgressRow>,
}

/// Fine-tune (or train from scratch) with early stopping on a held-out
/// split of the output set. Returns the best-by-validation parameters.
pub fn train_contrastive(
    outputs: &[PaddedGraph],
    embedder_cfg: EmbedderConfig,
    cfg: &ContrastiveConfig,
    init: Option<EmbedderParams>,
) -> Result<ContrastiveOutcome> {
    run_training(outputs, embedder_cfg, cfg, init, Mode::FineTune)
}

/// Pre-train on an auxiliary output set: a plain budget of `pretrain_steps`
/// optimization steps, no validation split, no early stopping.
pub fn pretrain_output(
    extra_outputs: &[PaddedGraph],
    embedder_cfg: EmbedderConfig,
    cfg: &ContrastiveConfig,
) -> Result<ContrastiveOutcome> {
    run_training(extra_outputs, embedder_cfg, cfg, None, Mode::Pretrain)
}

#[derive(PartialEq)]
enum Mode {
    FineTune,
    Pretrain,
}

fn run_training(
    outputs: &[PaddedGraph],
    embedder_cfg: EmbedderConfig,
    cfg: &ContrastiveConfig,
    init: Option<EmbedderParams>,
    mode: Mode,
) -> Result<ContrastiveOutcome> {
    cfg.validate()?;
    if outputs.len() < 2 {
        return Err(Error::Config(format!(
            "contrastive training needs at least 2 output graphs, got {}",
            outputs.len()
        )));
    }
    let space = outputs[0].space();
    if outputs.iter().any(|g| g.space() != space) {
        return Err(Error::Shape {
            op: "contrastive-train",
            details: "output graphs do not share one padded space".into(),
        });
    }
    let mut params = match init {
        Some(p) => {
            if p.space != space || p.cfg != embedder_cfg {
                return Err(Error::Config(
                    "initial parameters do not match the requested embedder shape".into(),
                ));
            }
            p
        }
        None => EmbedderParams::init(embedder_cfg, space, cfg.seed)?,
    };

    let total_steps = match mode {
        Mode::FineTune => cfg.max_steps,
        Mode::Pretrain => cfg.pretrain_steps,
    };
    if total_steps == 0 {
        return Ok(ContrastiveOutcome { params, log: Vec::new() });
    }

    // Pre-training uses every graph; fine-tuning holds out a split.
    let (train_idx, val_idx) = match mode {
        Mode::Pretrain => ((0..outputs.len()).collect::<Vec<_>>(), Vec::new()),
        Mode::FineTune => holdout_split(outputs.len(), VALIDATION_FRACTION, cfg.seed)?,
    };
    let batch_size = cfg.batch_size.min(train_idx.len());
    if batch_size < 2 {
        return Err(Error::Config("training split too small for a contrastive batch".into()));
    }

    // Fixed validation tuples: one augmentation pass with its own stream.
    let (val_anchors, val_positives) = {
        let mut val_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
        let mut anchors = Vec::with_capacity(val_idx.len());
        let mut positives = Vec::with_capacity(val_idx.len());
        for &i in &val_idx {
            anchors.push(outputs[i].relax());
            positives.push(node_drop_augment(&outputs[i], cfg.drop_rate, &mut val_rng)?.relax());
        }
        (anchors, positives)
    };
    let validate = val_anchors.len() >= 2;

    let shapes: Vec<&[usize]> = params.named_tensors().iter().map(|(_, t)| t.shape()).collect();
    let shapes: Vec<Vec<usize>> = shapes.into_iter().map(|s| s.to_vec()).collect();
    let shape_refs: Vec<&[usize]> = shapes.iter().map(|s| s.as_slice()).collect();
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.learning_rate), &shape_refs);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = Vec::new();
    let mut best: Option<(f64, EmbedderParams)> = None;
    let mut evals_without_improvement = 0u32;

    for step in 1..=total_steps {
        let picked = rand::seq::index::sample(&mut rng, train_idx.len(), batch_size);
        let mut anchors = Vec::with_capacity(batch_size);
        let mut positives = Vec::with_capacity(batch_size);
        for i in picked.iter() {
            let g = &outputs[train_idx[i]];
            anchors.push(g.relax());
            positives.push(node_drop_augment(g, cfg.drop_rate, &mut rng)?.relax());
        }

        let mut tape = Tape::new();
        let vars = EmbedderVars::register(&mut tape, &params);
        let train_loss = (|| -> Result<f64> {
            let loss =
                batch_loss_on_tape(&mut tape, &vars, &anchors, &positives, cfg.temperature, cfg.epsilon)?;
            let grads = tape.backward(loss)?;
            let ordered = vars.ordered();
            let grad_tensors: Vec<_> = ordered
                .iter()
                .zip(&shapes)
                .map(|(&v, shape)| grads.wrt_or_zeros(v, shape))
                .collect();
            let mut tensors = params.named_tensors_mut();
            let mut refs: Vec<&mut crate::tensor::Tensor> =
                tensors.iter_mut().map(|(_, t)| &mut **t).collect();
            adam.step(&mut refs, &grad_tensors)?;
            tape.value(loss).scalar_value()
        })()
        .map_err(|e| match e {
            Error::NonFinite(what) => Error::Diverged { step: step as usize, what },
            other => other,
        })?;

        let mut row = ProgressRow { step, train_loss, val_loss: None };
        if validate && step % cfg.eval_every == 0 {
            let val_loss = evaluate_loss(&params, &val_anchors, &val_positives, cfg)?;
            row.val_loss = Some(val_loss);
            let improved = best.as_ref().is_none_or(|(b, _)| val_loss < *b);
            if improved {
                best = Some((val_loss, params.clone()));
                evals_without_improvement = 0;
            } else {
                evals_without_improvement += 1;
            }
            log.push(row);
            if evals_without_improvement >= cfg.patience {
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
    Ok(ContrastiveOutcome { params, log })
}

/// Batch loss at the current parameters, no gradient.
fn evaluate_loss(
    params: &EmbedderParams,
    anchors: &[RelaxedGraph],
    positives: &[RelaxedGraph],
    cfg: &ContrastiveConfig,
) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = EmbedderVars::register(&mut tape, params);
    let loss =
        batch_loss_on_tape(&mut tape, &vars, anchors, positives, cfg.temperature, cfg.epsilon)?;
    tape.value(loss).scalar_value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphSpace;
    use crate::tensor::Tensor;
    use rand::Rng;

    fn space() -> GraphSpace {
        GraphSpace::new(4, 3, 3).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn toy_graphs(count: usize, seed: u64) -> Vec<PaddedGraph> {
        let mut r = rng(seed);
        (0..count)
            .map(|_| {
                let n = r.gen_range(2..=space().m_max);
                let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..space().t)).collect();
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        if r.gen_bool(0.5) {
                            edges.push((i, j, r.gen_range(1..space().s)));
                        }
                    }
                }
                PaddedGraph::pad(space(), &labels, &edges).unwrap()
            })
            .collect()
    }

    #[test]
    fn zero_rate_changes_nothing() {
        let g = &toy_graphs(1, 1)[0];
        let out = node_drop_augment(g, 0.0, &mut rng(2)).unwrap();
        assert_eq!(&out, g);
    }

    #[test]
    fn small_rate_drops_exactly_one_node() {
        // ceil(0.05 * n) = 1 for n <= 9 with at least 2 real nodes.
        let g = PaddedGraph::pad(space(), &[0, 1, 2], &[(0, 1, 1), (1, 2, 2)]).unwrap();
        for seed in 0..20 {
            let out = node_drop_augment(&g, 0.05, &mut rng(seed)).unwrap();
            assert_eq!(out.real_node_count(), 2);
        }
    }

    #[test]
    fn dropped_node_loses_all_edges() {
        let g = PaddedGraph::pad(space(), &[0, 1, 2, 0], &[(0, 1, 1), (0, 2, 2), (0, 3, 1)])
            .unwrap();
        // Rate high enough to drop 3 of 4; floor keeps one real node.
        let out = node_drop_augment(&g, 0.99, &mut rng(3)).unwrap();
        assert_eq!(out.real_node_count(), 1);
        for i in 0..4 {
            if out.is_virtual(i) {
                for j in 0..4 {
                    assert_eq!(out.edge(i, j), NO_EDGE);
                }
            }
        }
    }

    #[test]
    fn augmenting_empty_graph_fails() {
        let g = PaddedGraph::pad(space(), &[], &[]).unwrap();
        assert!(node_drop_augment(&g, 0.1, &mut rng(4)).is_err());
    }

    #[test]
    fn anchor_and_augmentation_always_share_a_real_node() {
        let graphs = toy_graphs(50, 5);
        let mut r = rng(6);
        for g in &graphs {
            let a = node_drop_augment(g, 0.7, &mut r).unwrap();
            let shared = (0..space().m_max)
                .filter(|&i| !g.is_virtual(i) && !a.is_virtual(i))
                .count();
            assert!(shared >= 1);
        }
    }

    /// Unit-vector tape inputs for loss tests.
    fn unit_var(tape: &mut Tape, v: &[f64]) -> Var {
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let data: Vec<f64> = v.iter().map(|x| x / norm).collect();
        tape.input(Tensor::new(vec![1, v.len()], data).unwrap())
    }

    fn identity_fn() -> impl FnMut(&mut Tape, Var) -> Result<Var> {
        |_: &mut Tape, v: Var| Ok(v)
    }

    #[test]
    fn generic_loss_identity_examples() {
        // phi = psi = identity, z+ = z, one orthogonal negative -> -1 + 0.
        let mut tape = Tape::new();
        let z = unit_var(&mut tape, &[1.0, 0.0]);
        let zp = unit_var(&mut tape, &[1.0, 0.0]);
        let neg = unit_var(&mut tape, &[0.0, 1.0]);
        let mut outer = identity_fn();
        let mut inner = identity_fn();
        let l =
            generic_contrastive_loss(&mut tape, z, zp, &[neg], &mut outer, &mut inner).unwrap();
        assert!((tape.value(l).scalar_value().unwrap() + 1.0).abs() < 1e-12);

        // Negative equal to the positive -> terms cancel to 0.
        let mut tape = Tape::new();
        let z = unit_var(&mut tape, &[0.6, 0.8]);
        let zp = unit_var(&mut tape, &[0.0, 1.0]);
        let neg = unit_var(&mut tape, &[0.0, 1.0]);
        let mut outer = identity_fn();
        let mut inner = identity_fn();
        let l =
            generic_contrastive_loss(&mut tape, z, zp, &[neg], &mut outer, &mut inner).unwrap();
        assert!(tape.value(l).scalar_value().unwrap().abs() < 1e-12);
    }

    #[test]
    fn generic_loss_rejects_non_unit_inputs() {
        let mut tape = Tape::new();
        let z = tape.input(Tensor::new(vec![1, 2], vec![2.0, 0.0]).unwrap());
        let zp = unit_var(&mut tape, &[1.0, 0.0]);
        let neg = unit_var(&mut tape, &[0.0, 1.0]);
        let mut outer = identity_fn();
        let mut inner = identity_fn();
        let err = generic_contrastive_loss(&mut tape, z, zp, &[neg], &mut outer, &mut inner)
            .unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn infonce_analytic_values() {
        // tau=1, eps ~ 0, z+ = z, one orthogonal negative: log(e^{-1}) = -1.
        let mut tape = Tape::new();
        let z = unit_var(&mut tape, &[1.0, 0.0]);
        let zp = unit_var(&mut tape, &[1.0, 0.0]);
        let neg = unit_var(&mut tape, &[0.0, 1.0]);
        let l = infonce_loss(&mut tape, z, zp, &[neg], 1.0, 1e-300).unwrap();
        assert!((tape.value(l).scalar_value().unwrap() + 1.0).abs() < 1e-9);

        // tau=1, eps=1, equal similarities: log(1 + e^0) = log 2.
        let mut tape = Tape::new();
        let z = unit_var(&mut tape, &[1.0, 0.0]);
        let zp = unit_var(&mut tape, &[0.0, 1.0]);
        let neg = unit_var(&mut tape, &[0.0, 1.0]);
        let l = infonce_loss(&mut tape, z, zp, &[neg], 1.0, 1.0).unwrap();
        assert!((tape.value(l).scalar_value().unwrap() - 2.0f64.ln()).abs() < 1e-9);

        // tau=0.5: 0.5 * log(exp((0-1)/0.5)) = -1.
        let mut tape = Tape::new();
        let z = unit_var(&mut tape, &[1.0, 0.0]);
        let zp = unit_var(&mut tape, &[1.0, 0.0]);
        let neg = unit_var(&mut tape, &[0.0, 1.0]);
        let l = infonce_loss(&mut tape, z, zp, &[neg], 0.5, 1e-300).unwrap();
        assert!((tape.value(l).scalar_value().unwrap() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn infonce_equals_generic_with_log_exp_pair() {
        let mut r = rng(7);
        for _ in 0..100 {
            let d = r.gen_range(2..6);
            let k = r.gen_range(1..5);
            let tau = r.gen_range(0.2..2.0);
            let eps = r.gen_range(0.1..2.0);
            let randv =
                |r: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| r.gen_range(-1.0..1.0)).collect() };

            let mut tape = Tape::new();
            let z = unit_var(&mut tape, &randv(&mut r));
            let zp = unit_var(&mut tape, &randv(&mut r));
            let negs: Vec<Var> = (0..k).map(|_| unit_var(&mut tape, &randv(&mut r))).collect();

            let direct = infonce_loss(&mut tape, z, zp, &negs, tau, eps).unwrap();
            let mut outer = |t: &mut Tape, v: Var| -> Result<Var> {
                let shifted = t.add_scalar(v, eps)?;
                let logged = t.ln(shifted)?;
                t.scale(logged, tau)
            };
            let mut inner = |t: &mut Tape, v: Var| -> Result<Var> {
                let scaled = t.scale(v, 1.0 / tau)?;
                t.exp(scaled)
            };
            let generic =
                generic_contrastive_loss(&mut tape, z, zp, &negs, &mut outer, &mut inner)
                    .unwrap();
            let a = tape.value(direct).scalar_value().unwrap();
            let b = tape.value(generic).scalar_value().unwrap();
            assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
        }
    }

    #[test]
    fn infonce_rejects_bad_config() {
        let mut tape = Tape::new();
        let z = unit_var(&mut tape, &[1.0, 0.0]);
        let zp = unit_var(&mut tape, &[0.0, 1.0]);
        let neg = unit_var(&mut tape, &[0.0, 1.0]);
        assert!(infonce_loss(&mut tape, z, zp, &[neg], 0.0, 1.0).is_err());
        assert!(infonce_loss(&mut tape, z, zp, &[neg], 1.0, 0.0).is_err());
        assert!(infonce_loss(&mut tape, z, zp, &[], 1.0, 1.0).is_err());
    }

    #[test]
    fn batch_tuples_have_in_batch_negatives() {
        let graphs = toy_graphs(4, 8);
        let tuples = build_batch_tuples(&graphs, 0.3, &mut rng(9)).unwrap();
        assert_eq!(tuples.len(), 4);
        assert!(tuples.iter().all(|t| t.negatives.len() == 3));
        // B=2 gives K=1.
        let two = build_batch_tuples(&graphs[..2], 0.3, &mut rng(9)).unwrap();
        assert!(two.iter().all(|t| t.negatives.len() == 1));
        // B<2 rejected.
        assert!(build_batch_tuples(&graphs[..1], 0.3, &mut rng(9)).is_err());
    }

    #[test]
    fn batch_tuples_are_seed_deterministic() {
        let graphs = toy_graphs(6, 10);
        let a = build_batch_tuples(&graphs, 0.4, &mut rng(11)).unwrap();
        let b = build_batch_tuples(&graphs, 0.4, &mut rng(11)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.positive, y.positive);
        }
    }

    fn small_embedder() -> EmbedderConfig {
        EmbedderConfig { layers: 2, hidden: 8, dim: 6 }
    }

    #[test]
    fn training_reduces_loss_on_a_toy_set() {
        let graphs = toy_graphs(64, 12);
        let cfg = ContrastiveConfig {
            batch_size: 16,
            max_steps: 200,
            eval_every: 50,
            seed: 13,
            ..Default::default()
        };
        let outcome = train_contrastive(&graphs, small_embedder(), &cfg, None).unwrap();
        let first = outcome.log.first().unwrap().train_loss;
        let last_avg: f64 = outcome.log.iter().rev().take(10).map(|r| r.train_loss).sum::<f64>()
            / 10.0;
        assert!(
            last_avg < first,
            "loss did not improve: first {} last-avg {}",
            first,
            last_avg
        );
    }

    #[test]
    fn zero_learning_rate_keeps_initial_parameters() {
        let graphs = toy_graphs(16, 14);
        let cfg = ContrastiveConfig {
            batch_size: 8,
            max_steps: 20,
            learning_rate: 0.0,
            seed: 15,
            ..Default::default()
        };
        let outcome = train_contrastive(&graphs, small_embedder(), &cfg, None).unwrap();
        let fresh = EmbedderParams::init(small_embedder(), space(), 15).unwrap();
        for ((_, a), (_, b)) in outcome.params.named_tensors().iter().zip(fresh.named_tensors())
        {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn zero_pretrain_steps_return_fresh_init() {
        let graphs = toy_graphs(8, 16);
        let cfg = ContrastiveConfig { pretrain_steps: 0, seed: 17, ..Default::default() };
        let outcome = pretrain_output(&graphs, small_embedder(), &cfg).unwrap();
        let fresh = EmbedderParams::init(small_embedder(), space(), 17).unwrap();
        for ((_, a), (_, b)) in outcome.params.named_tensors().iter().zip(fresh.named_tensors())
        {
            assert_eq!(a.data(), b.data());
        }
        assert!(outcome.log.is_empty());
    }

    #[test]
    fn fine_tuning_from_checkpoint_matches_contract() {
        // Init passed explicitly behaves like fresh apart from the start point.
        let graphs = toy_graphs(16, 18);
        let pre_cfg =
            ContrastiveConfig { pretrain_steps: 10, batch_size: 8, seed: 19, ..Default::default() };
        let pre = pretrain_output(&graphs, small_embedder(), &pre_cfg).unwrap();
        let cfg = ContrastiveConfig {
            batch_size: 8,
            max_steps: 5,
            seed: 19,
            ..Default::default()
        };
        let tuned =
            train_contrastive(&graphs, small_embedder(), &cfg, Some(pre.params.clone())).unwrap();
        // Same shapes, different values after real steps.
        assert_eq!(tuned.params.cfg, pre.params.cfg);
        // Mismatched shape is rejected.
        let wrong = EmbedderConfig { layers: 1, hidden: 8, dim: 6 };
        assert!(train_contrastive(&graphs, wrong, &cfg, Some(pre.params)).is_err());
    }
}
