//! Decoding: turning a predicted embedding back into a discrete graph.
//!
//! Two mechanisms are provided. Candidate selection picks the candidate graph
//! whose embedding has the largest inner product with the prediction.
//! Projected gradient descent starts from a feasible relaxed graph and
//! minimizes the squared embedding distance directly over the relaxed graph
//! space, projecting back onto it after every step; with best-iterate
//! tracking (the default) the returned objective never exceeds the
//! initialization's.

use rand::Rng;
use rayon::prelude::*;

use crate::embedder::{embed, embed_on_tape, EmbedderParams, EmbedderVars, UnitEmbedding};
use crate::error::{Error, Result};
use crate::graph::{PaddedGraph, RelaxedGraph, VariableGraph};
use crate::regressor::{regress, RegressorParams};
pub use crate::simplex::{project_relaxed_graph, project_simplex};
use crate::tape::Tape;

/// Candidate graphs with their precomputed unit embeddings.
#[derive(Clone, Debug)]
pub struct CandidateIndex {
    graphs: Vec<PaddedGraph>,
    embeddings: Vec<UnitEmbedding>,
}

impl CandidateIndex {
    /// Embed every candidate once with the frozen graph embedder.
    pub fn build(graphs: Vec<PaddedGraph>, params: &EmbedderParams) -> Result<Self> {
        let embeddings: Vec<UnitEmbedding> = graphs
            .par_iter()
            .map(|g| embed(&g.relax(), params))
            .collect::<Result<_>>()?;
        Ok(CandidateIndex { graphs, embeddings })
    }

    /// Pair graphs with embeddings computed elsewhere.
    pub fn from_parts(graphs: Vec<PaddedGraph>, embeddings: Vec<UnitEmbedding>) -> Result<Self> {
        if graphs.len() != embeddings.len() {
            return Err(Error::Contract(format!(
                "{} candidate graphs but {} embeddings",
                graphs.len(),
                embeddings.len()
            )));
        }
        if let Some(first) = embeddings.first() {
            if embeddings.iter().any(|e| e.dim() != first.dim()) {
                return Err(Error::Contract("candidate embeddings disagree on dimension".into()));
            }
        }
        Ok(CandidateIndex { graphs, embeddings })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graph(&self, j: usize) -> &PaddedGraph {
        &self.graphs[j]
    }

    pub fn embedding(&self, j: usize) -> &UnitEmbedding {
        &self.embeddings[j]
    }

    /// Seeded uniform subsample of the candidates, at least one surviving.
    /// Kept in ascending original order so index ties stay deterministic.
    pub fn subsample(&self, ratio: f64, rng: &mut impl Rng) -> Result<CandidateIndex> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::Config(format!(
                "candidate ratio {} outside (0, 1]",
                ratio
            )));
        }
        if self.is_empty() {
            return Err(Error::Input("cannot subsample an empty candidate index".into()));
        }
        let keep = ((ratio * self.len() as f64).round() as usize).clamp(1, self.len());
        let mut picked: Vec<usize> = rand::seq::index::sample(rng, self.len(), keep).into_vec();
        picked.sort_unstable();
        Ok(CandidateIndex {
            graphs: picked.iter().map(|&j| self.graphs[j].clone()).collect(),
            embeddings: picked.iter().map(|&j| self.embeddings[j].clone()).collect(),
        })
    }
}

/// Highest-inner-product candidate; ties resolve to the lowest index.
pub fn candidate_select(z: &UnitEmbedding, index: &CandidateIndex) -> Result<(usize, f64)> {
    if index.is_empty() {
        return Err(Error::Input("candidate index is empty".into()));
    }
    if index.embeddings[0].dim() != z.dim() {
        return Err(Error::Shape {
            op: "candidate-select",
            details: format!(
                "query dimension {} vs candidate dimension {}",
                z.dim(),
                index.embeddings[0].dim()
            ),
        });
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for (j, e) in index.embeddings.iter().enumerate() {
        let score = z.dot(e);
        if score > best.1 {
            best = (j, score);
        }
    }
    Ok(best)
}

/// Projected-gradient-descent settings.
#[derive(Clone, Copy, Debug)]
pub struct PgdConfig {
    /// Step size; 0 degenerates to returning the initialization.
    pub eta: f64,
    /// Iteration count T₂.
    pub steps: usize,
    /// Return the lowest-objective iterate seen (including the
    /// initialization) instead of the last one.
    pub best_iterate: bool,
}

impl Default for PgdConfig {
    fn default() -> Self {
        PgdConfig { eta: 1.0, steps: 2000, best_iterate: true }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.eta.is_finite() || self.eta < 0.0 {
            return Err(Error::Config(format!("step size {} must be finite and ≥ 0", self.eta)));
        }
        Ok(())
    }
}

/// Result of a PGD run: the chosen iterate, its objective value, and the
/// full per-iterate objective trace (length steps + 1, starting at the
/// initialization).
#[derive(Clone, Debug)]
pub struct PgdOutcome {
    pub graph: RelaxedGraph,
    pub objective: f64,
    pub trace: Vec<f64>,
}

fn decode_error(iter: usize, err: Error) -> Error {
    match err {
        Error::NonFinite(what) => Error::Decode { iter, what },
        Error::DegenerateEmbedding(n) => Error::Decode {
            iter,
            what: format!("embedding collapsed to norm {}", n),
        },
        other => other,
    }
}

/// Minimize ‖ψ(ỹ) − z‖² over the relaxed graph space by gradient steps on
/// (F, E) followed by projection back onto the space. Both vectors are unit,
/// so the objective is evaluated as 2 − 2⟨ψ(ỹ), z⟩.
pub fn pgd_decode(
    z: &UnitEmbedding,
    params: &EmbedderParams,
    init: &RelaxedGraph,
    cfg: &PgdConfig,
) -> Result<PgdOutcome> {
    cfg.validate()?;
    if init.space() != params.space {
        return Err(Error::Shape {
            op: "pgd-decode",
            details: format!(
                "initialization space {:?} does not match embedder space {:?}",
                init.space(),
                params.space
            ),
        });
    }
    if z.dim() != params.cfg.dim {
        return Err(Error::Shape {
            op: "pgd-decode",
            details: format!("target dimension {} vs embedder dimension {}", z.dim(), params.cfg.dim),
        });
    }

    let mut current = init.clone();
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    let mut best = (f64::INFINITY, current.clone());

    for iter in 0..=cfg.steps {
        let mut tape = Tape::new();
        let vars = EmbedderVars::register(&mut tape, params);
        let f = tape.input(current.f.clone());
        let e = tape.input(current.e.clone());
        let result = (|| {
            let psi = embed_on_tape(&mut tape, &vars, f, e, 0.0)?;
            let zv = tape.input(z.to_tensor());
            let sim = tape.dot(psi, zv)?;
            let neg = tape.scale(sim, -2.0)?;
            tape.add_scalar(neg, 2.0)
        })();
        let loss = result.map_err(|err| decode_error(iter, err))?;
        let objective = tape.value(loss).scalar_value()?;
        if !objective.is_finite() {
            return Err(Error::Decode { iter, what: format!("objective {}", objective) });
        }
        trace.push(objective);
        if objective < best.0 {
            best = (objective, current.clone());
        }
        if iter == cfg.steps {
            break;
        }

        let grads = tape.backward(loss).map_err(|err| decode_error(iter, err))?;
        let g_f = grads.wrt_or_zeros(f, current.f.shape());
        let g_e = grads.wrt_or_zeros(e, current.e.shape());
        let mut f_next = current.f.clone();
        f_next.axpy(-cfg.eta, &g_f);
        let mut e_next = current.e.clone();
        e_next.axpy(-cfg.eta, &g_e);
        current =
            project_relaxed_graph(init.space(), &f_next, &e_next).map_err(|err| decode_error(iter, err))?;
    }

    let (objective, graph) = if cfg.best_iterate {
        best
    } else {
        (*trace.last().expect("at least the initialization is recorded"), current)
    };
    Ok(PgdOutcome { graph, objective, trace })
}

/// How to turn a predicted embedding into a graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeStrategy {
    /// Best candidate by inner product.
    Candidate,
    /// PGD initialized at a uniformly random candidate.
    PgdFromRandomCandidate,
    /// PGD initialized at the best candidate.
    PgdFromBestCandidate,
}

impl std::str::FromStr for DecodeStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "candidate" => Ok(DecodeStrategy::Candidate),
            "pgd-random" => Ok(DecodeStrategy::PgdFromRandomCandidate),
            "pgd-best" => Ok(DecodeStrategy::PgdFromBestCandidate),
            other => Err(Error::Config(format!(
                "unknown strategy '{}'; expected candidate, pgd-random, or pgd-best",
                other
            ))),
        }
    }
}

impl std::fmt::Display for DecodeStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DecodeStrategy::Candidate => "candidate",
            DecodeStrategy::PgdFromRandomCandidate => "pgd-random",
            DecodeStrategy::PgdFromBestCandidate => "pgd-best",
        })
    }
}

/// A decoded prediction: the discrete graph, the surrogate objective of the
/// relaxed solution it came from, and the per-iterate objective trace.
#[derive(Clone, Debug)]
pub struct DecodeOutcome {
    pub graph: VariableGraph,
    pub objective: f64,
    pub trace: Vec<f64>,
}

/// Full decoding pipeline for one input string.
pub fn decode(
    x: &str,
    regressor: &RegressorParams,
    embedder: &EmbedderParams,
    index: &CandidateIndex,
    strategy: DecodeStrategy,
    pgd: &PgdConfig,
    rng: &mut impl Rng,
) -> Result<DecodeOutcome> {
    let h = regress(x, regressor)?;
    let (best_j, best_score) = candidate_select(&h, index)?;
    match strategy {
        DecodeStrategy::Candidate => {
            let objective = 2.0 - 2.0 * best_score;
            Ok(DecodeOutcome {
                graph: index.graph(best_j).strip(),
                objective,
                trace: vec![objective],
            })
        }
        DecodeStrategy::PgdFromRandomCandidate | DecodeStrategy::PgdFromBestCandidate => {
            let start = match strategy {
                DecodeStrategy::PgdFromRandomCandidate => rng.gen_range(0..index.len()),
                _ => best_j,
            };
            let init = index.graph(start).relax();
            let out = pgd_decode(&h, embedder, &init, pgd)?;
            Ok(DecodeOutcome {
                graph: out.graph.unrelax(),
                objective: out.objective,
                trace: out.trace,
            })
        }
    }
}
