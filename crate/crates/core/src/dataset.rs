//! Line-delimited dataset I/O and split helpers.
//!
//! File format: first line is a header `{"node_labels": [...], "edge_labels":
//! [...]}`; every following line is a record `{"input": "...", "nodes":
//! ["a", ...], "edges": [[i, j, "label"], ...]}` with 0-based endpoints and
//! label names resolved against the header alphabets. Edge label index 0 is
//! no-edge and never appears in a record.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphSpace, LabelAlphabets, PaddedGraph, VariableGraph, NO_EDGE};

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    node_labels: Vec<String>,
    edge_labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    input: String,
    nodes: Vec<String>,
    edges: Vec<(usize, usize, String)>,
}

/// A supervised corpus: input strings paired with output graphs.
#[derive(Clone, Debug)]
pub struct Dataset {
    alphabets: LabelAlphabets,
    pairs: Vec<(String, VariableGraph)>,
}

impl Dataset {
    pub fn new(alphabets: LabelAlphabets, pairs: Vec<(String, VariableGraph)>) -> Result<Self> {
        for (_, g) in &pairs {
            if let Some(&bad) = g.labels().iter().find(|&&l| l >= alphabets.t()) {
                return Err(Error::Input(format!(
                    "node label id {} outside alphabet of size {}",
                    bad,
                    alphabets.t()
                )));
            }
            if let Some(&(i, j, s)) = g.edges().iter().find(|&&(_, _, s)| s >= alphabets.s()) {
                return Err(Error::Input(format!(
                    "edge ({},{}) label id {} outside alphabet of size {}",
                    i,
                    j,
                    s,
                    alphabets.s()
                )));
            }
        }
        Ok(Dataset { alphabets, pairs })
    }

    pub fn alphabets(&self) -> &LabelAlphabets {
        &self.alphabets
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(String, VariableGraph)] {
        &self.pairs
    }

    pub fn inputs(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|(s, _)| s.as_str())
    }

    pub fn graphs(&self) -> impl Iterator<Item = &VariableGraph> {
        self.pairs.iter().map(|(_, g)| g)
    }

    /// Pad every output graph to the given capacity.
    pub fn padded_graphs(&self, m_max: usize) -> Result<Vec<PaddedGraph>> {
        let space = self.alphabets.space(m_max);
        self.pairs.iter().map(|(_, g)| PaddedGraph::from_variable(space, g)).collect()
    }

    pub fn space(&self, m_max: usize) -> GraphSpace {
        self.alphabets.space(m_max)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Format(format!("{}: empty dataset file", path.display())))??;
        let header: HeaderLine = serde_json::from_str(&header_line)
            .map_err(|e| Error::Format(format!("{}: bad header: {}", path.display(), e)))?;
        let alphabets = LabelAlphabets::new(header.node_labels, header.edge_labels)?;

        let mut pairs = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: RecordLine = serde_json::from_str(&line).map_err(|e| {
                Error::Format(format!("{}: line {}: {}", path.display(), lineno + 2, e))
            })?;
            let labels: Vec<usize> = record
                .nodes
                .iter()
                .map(|name| alphabets.node_id(name))
                .collect::<Result<_>>()?;
            let mut edges = Vec::with_capacity(record.edges.len());
            for (i, j, name) in &record.edges {
                let s = alphabets.edge_id(name)?;
                if s == NO_EDGE {
                    return Err(Error::Input(format!(
                        "{}: line {}: edge ({},{}) uses the no-edge label",
                        path.display(),
                        lineno + 2,
                        i,
                        j
                    )));
                }
                edges.push((*i, *j, s));
            }
            let graph = VariableGraph::new(labels, edges).map_err(|e| {
                Error::Format(format!("{}: line {}: {}", path.display(), lineno + 2, e))
            })?;
            pairs.push((record.input, graph));
        }
        Dataset::new(alphabets, pairs)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let header = HeaderLine {
            node_labels: self.alphabets.node_names().to_vec(),
            edge_labels: self.alphabets.edge_names().to_vec(),
        };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        for (input, g) in &self.pairs {
            let record = RecordLine {
                input: input.clone(),
                nodes: g
                    .labels()
                    .iter()
                    .map(|&l| self.alphabets.node_names()[l].clone())
                    .collect(),
                edges: g
                    .edges()
                    .iter()
                    .map(|&(i, j, s)| (i, j, self.alphabets.edge_names()[s].clone()))
                    .collect(),
            };
            writeln!(w, "{}", serde_json::to_string(&record)?)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Largest input length in characters.
    pub fn max_input_len(&self) -> usize {
        self.pairs.iter().map(|(s, _)| s.chars().count()).max().unwrap_or(0)
    }
}

/// Deterministic holdout split: shuffles indices by seed and carves off
/// `ceil(val_fraction * n)` for validation. Both halves are non-empty when
/// `n ≥ 2` and `0 < val_fraction < 1`.
pub fn holdout_split(n: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::Config(format!(
            "validation fraction {} outside [0, 1)",
            val_fraction
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut n_val = (val_fraction * n as f64).ceil() as usize;
    if n_val >= n && n > 0 {
        n_val = n - 1;
    }
    let val = indices[..n_val].to_vec();
    let train = indices[n_val..].to_vec();
    Ok((train, val))
}
