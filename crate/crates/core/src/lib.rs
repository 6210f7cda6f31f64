//! Supervised graph prediction over small labeled graphs.
//!
//! The pipeline has three stages:
//!
//! 1. An output embedder (R-GCN + sum pooling + MLP, unit-normalized) maps
//!    relaxed graphs onto the unit sphere. It is trained contrastively on
//!    output graphs alone, with node-dropping augmentation and an InfoNCE
//!    objective, optionally warm-started from an auxiliary output corpus.
//! 2. A character-level Transformer regressor maps input strings onto the
//!    same sphere by minimizing the squared distance to the frozen graph
//!    embeddings.
//! 3. Decoding either selects the best candidate graph by inner product or
//!    runs projected gradient descent over the relaxed graph space, with
//!    per-row/per-fiber simplex projections.
//!
//! Evaluation is exact graph edit distance against reference graphs, plus a
//! grid runner that sweeps decoding strategies and candidate-set sizes.

pub mod checkpoint;
pub mod contrastive;
pub mod corpus;
pub mod dataset;
pub mod decoder;
pub mod embedder;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod ged;
pub mod graph;
pub mod optim;
pub mod regressor;
pub mod simplex;
pub mod tape;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
