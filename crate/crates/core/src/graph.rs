//! Labeled graph spaces: discrete padded graphs, their simplex relaxation,
//! and the conversions between them.
//!
//! Graphs live at a fixed size `m_max` by padding with virtual nodes (label
//! index `T`, where real labels occupy `0..T`). Edge label `0` is reserved
//! for "no edge", which makes "virtual nodes have no edges" a single equality
//! check. Relaxation replaces every label with a one-hot row/fiber; the
//! inverse takes argmaxes and deletes virtual nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Edge label index reserved for "no edge".
pub const NO_EDGE: usize = 0;

/// Named label sets for nodes and edges. Index 0 of the edge alphabet is the
/// no-edge label; the virtual (padding) node label sits at index `T`, one
/// past the real node labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAlphabets {
    node_labels: Vec<String>,
    edge_labels: Vec<String>,
}

impl LabelAlphabets {
    pub fn new(node_labels: Vec<String>, edge_labels: Vec<String>) -> Result<Self> {
        if node_labels.is_empty() || edge_labels.is_empty() {
            return Err(Error::Config("label alphabets must be non-empty".into()));
        }
        for (what, labels) in [("node", &node_labels), ("edge", &edge_labels)] {
            let mut seen = std::collections::HashSet::new();
            for l in labels {
                if !seen.insert(l) {
                    return Err(Error::Config(format!("duplicate {} label '{}'", what, l)));
                }
            }
        }
        Ok(LabelAlphabets { node_labels, edge_labels })
    }

    /// Number of real node labels (T).
    pub fn t(&self) -> usize {
        self.node_labels.len()
    }

    /// Number of edge labels including no-edge (S).
    pub fn s(&self) -> usize {
        self.edge_labels.len()
    }

    /// Label index of the virtual padding node.
    pub fn virtual_id(&self) -> usize {
        self.t()
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_labels
    }

    pub fn edge_names(&self) -> &[String] {
        &self.edge_labels
    }

    pub fn node_id(&self, name: &str) -> Result<usize> {
        self.node_labels
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| Error::Input(format!("unknown node label '{}'", name)))
    }

    pub fn edge_id(&self, name: &str) -> Result<usize> {
        self.edge_labels
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| Error::Input(format!("unknown edge label '{}'", name)))
    }

    pub fn space(&self, m_max: usize) -> GraphSpace {
        GraphSpace { m_max, t: self.t(), s: self.s() }
    }
}

/// Dimensions of a padded graph space: capacity and alphabet sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpace {
    /// Node count after padding.
    pub m_max: usize,
    /// Real node label count; the virtual label has index `t`.
    pub t: usize,
    /// Edge label count including no-edge.
    pub s: usize,
}

impl GraphSpace {
    pub fn new(m_max: usize, t: usize, s: usize) -> Result<Self> {
        if m_max == 0 || t == 0 || s == 0 {
            return Err(Error::Config(format!(
                "graph space dimensions must be positive, got m_max={}, t={}, s={}",
                m_max, t, s
            )));
        }
        Ok(GraphSpace { m_max, t, s })
    }

    pub fn virtual_label(&self) -> usize {
        self.t
    }
}

/// A discrete graph padded to `m_max` nodes with virtual-label fill.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaddedGraph {
    space: GraphSpace,
    /// Length m_max; values in [0, T], where T means virtual.
    labels: Vec<usize>,
    /// Row-major m_max × m_max symmetric matrix; values in [0, S).
    edges: Vec<usize>,
}

impl PaddedGraph {
    pub fn new(space: GraphSpace, labels: Vec<usize>, edges: Vec<usize>) -> Result<Self> {
        let m = space.m_max;
        if labels.len() != m || edges.len() != m * m {
            return Err(Error::GraphInvariant(format!(
                "expected {} labels and {} edge entries, got {} and {}",
                m,
                m * m,
                labels.len(),
                edges.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > space.t) {
            return Err(Error::GraphInvariant(format!(
                "node label {} out of range [0, {}]",
                bad, space.t
            )));
        }
        if let Some(&bad) = edges.iter().find(|&&e| e >= space.s) {
            return Err(Error::GraphInvariant(format!(
                "edge label {} out of range [0, {})",
                bad, space.s
            )));
        }
        for i in 0..m {
            if edges[i * m + i] != NO_EDGE {
                return Err(Error::GraphInvariant(format!(
                    "diagonal entry ({0},{0}) must be no-edge",
                    i
                )));
            }
            for j in (i + 1)..m {
                if edges[i * m + j] != edges[j * m + i] {
                    return Err(Error::GraphInvariant(format!(
                        "edge matrix not symmetric at ({},{})",
                        i, j
                    )));
                }
                if edges[i * m + j] != NO_EDGE
                    && (labels[i] == space.t || labels[j] == space.t)
                {
                    return Err(Error::GraphInvariant(format!(
                        "edge ({},{}) touches a virtual node",
                        i, j
                    )));
                }
            }
        }
        Ok(PaddedGraph { space, labels, edges })
    }

    /// Pad a discrete graph given as a node-label list and a labeled edge
    /// list. Real nodes occupy the low indices; the rest become virtual.
    pub fn pad(
        space: GraphSpace,
        node_labels: &[usize],
        edge_list: &[(usize, usize, usize)],
    ) -> Result<Self> {
        let n = node_labels.len();
        let m = space.m_max;
        if n > m {
            return Err(Error::Capacity(format!(
                "{} nodes exceed padded capacity {}",
                n, m
            )));
        }
        let mut labels = vec![space.virtual_label(); m];
        labels[..n].copy_from_slice(node_labels);
        let mut edges = vec![NO_EDGE; m * m];
        for &(i, j, s) in edge_list {
            if i >= n || j >= n || i == j {
                return Err(Error::GraphInvariant(format!(
                    "edge ({},{}) has invalid endpoints for {} nodes",
                    i, j, n
                )));
            }
            if s == NO_EDGE || s >= space.s {
                return Err(Error::GraphInvariant(format!(
                    "edge ({},{}) has invalid label {}",
                    i, j, s
                )));
            }
            let existing = edges[i * m + j];
            if existing != NO_EDGE {
                return Err(Error::GraphInvariant(format!(
                    "duplicate edge ({},{}): label {} conflicts with {}",
                    i, j, s, existing
                )));
            }
            edges[i * m + j] = s;
            edges[j * m + i] = s;
        }
        Self::new(space, labels, edges)
    }

    pub fn from_variable(space: GraphSpace, g: &VariableGraph) -> Result<Self> {
        Self::pad(space, g.labels(), g.edges())
    }

    pub fn space(&self) -> GraphSpace {
        self.space
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn edge(&self, i: usize, j: usize) -> usize {
        self.edges[i * self.space.m_max + j]
    }

    pub fn is_virtual(&self, i: usize) -> bool {
        self.labels[i] == self.space.virtual_label()
    }

    pub fn real_node_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != self.space.virtual_label()).count()
    }

    /// One-hot relaxation: each label row/fiber becomes an exact vertex of
    /// its simplex.
    pub fn relax(&self) -> RelaxedGraph {
        let m = self.space.m_max;
        let tp1 = self.space.t + 1;
        let s = self.space.s;
        let mut f = Tensor::zeros(&[m, tp1]);
        for (i, &l) in self.labels.iter().enumerate() {
            f.set2(i, l, 1.0);
        }
        let mut e = Tensor::zeros(&[m, m, s]);
        for i in 0..m {
            for j in 0..m {
                e.set3(i, j, self.edge(i, j), 1.0);
            }
        }
        RelaxedGraph { space: self.space, f, e }
    }

    /// Drop the virtual nodes, reindexing survivors in order.
    pub fn strip(&self) -> VariableGraph {
        let m = self.space.m_max;
        let keep: Vec<usize> = (0..m).filter(|&i| !self.is_virtual(i)).collect();
        let labels: Vec<usize> = keep.iter().map(|&i| self.labels[i]).collect();
        let mut edge_list = Vec::new();
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate().skip(a + 1) {
                let s = self.edge(i, j);
                if s != NO_EDGE {
                    edge_list.push((a, b, s));
                }
            }
        }
        VariableGraph::new(labels, edge_list).expect("stripped graph is valid by construction")
    }

    /// Relabel node positions: node `i` moves to `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let m = self.space.m_max;
        check_permutation(perm, m)?;
        let mut labels = vec![0; m];
        let mut edges = vec![NO_EDGE; m * m];
        for i in 0..m {
            labels[perm[i]] = self.labels[i];
            for j in 0..m {
                edges[perm[i] * m + perm[j]] = self.edge(i, j);
            }
        }
        Self::new(self.space, labels, edges)
    }
}

/// A point in the relaxed graph space: label distributions instead of labels.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedGraph {
    space: GraphSpace,
    /// m_max × (T+1); rows on the simplex.
    pub f: Tensor,
    /// m_max × m_max × S; fibers on the simplex, symmetric in (i, j).
    pub e: Tensor,
}

pub const RELAXED_TOL: f64 = 1e-9;

impl RelaxedGraph {
    pub fn new(space: GraphSpace, f: Tensor, e: Tensor) -> Result<Self> {
        let g = RelaxedGraph { space, f, e };
        g.validate(RELAXED_TOL)?;
        Ok(g)
    }

    /// Construct without validating; for intermediate states inside
    /// optimization loops that re-establish the invariants themselves.
    pub fn new_unchecked(space: GraphSpace, f: Tensor, e: Tensor) -> Self {
        RelaxedGraph { space, f, e }
    }

    pub fn space(&self) -> GraphSpace {
        self.space
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let m = self.space.m_max;
        let (tp1, s) = (self.space.t + 1, self.space.s);
        if self.f.shape() != [m, tp1] {
            return Err(Error::GraphInvariant(format!(
                "label matrix shape {:?}, expected [{}, {}]",
                self.f.shape(),
                m,
                tp1
            )));
        }
        if self.e.shape() != [m, m, s] {
            return Err(Error::GraphInvariant(format!(
                "edge tensor shape {:?}, expected [{}, {}, {}]",
                self.e.shape(),
                m,
                m,
                s
            )));
        }
        for i in 0..m {
            check_simplex(self.f.row(i), tol)
                .map_err(|why| Error::GraphInvariant(format!("label row {}: {}", i, why)))?;
        }
        for i in 0..m {
            for j in 0..m {
                let fiber = self.e.fiber(i, j);
                check_simplex(fiber, tol).map_err(|why| {
                    Error::GraphInvariant(format!("edge fiber ({},{}): {}", i, j, why))
                })?;
                let mirror = self.e.fiber(j, i);
                if fiber.iter().zip(mirror).any(|(a, b)| (a - b).abs() > tol) {
                    return Err(Error::GraphInvariant(format!(
                        "edge fibers ({},{}) and ({},{}) differ",
                        i, j, j, i
                    )));
                }
            }
            let diag = self.e.fiber(i, i);
            if (diag[NO_EDGE] - 1.0).abs() > tol {
                return Err(Error::GraphInvariant(format!(
                    "diagonal fiber ({0},{0}) must be one-hot no-edge",
                    i
                )));
            }
        }
        Ok(())
    }

    /// Argmax decoding with lowest-index tie-breaks, then deletion of
    /// virtual-labeled nodes and their incident edges.
    pub fn unrelax(&self) -> VariableGraph {
        let m = self.space.m_max;
        let keep: Vec<usize> = (0..m)
            .filter(|&i| argmax_lowest(self.f.row(i)) != self.space.virtual_label())
            .collect();
        let labels: Vec<usize> = keep.iter().map(|&i| argmax_lowest(self.f.row(i))).collect();
        let mut edge_list = Vec::new();
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate().skip(a + 1) {
                let s = argmax_lowest(self.e.fiber(i, j));
                if s != NO_EDGE {
                    edge_list.push((a, b, s));
                }
            }
        }
        VariableGraph::new(labels, edge_list).expect("argmax labels are in range")
    }

    /// Relabel node positions: node `i` moves to `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let m = self.space.m_max;
        check_permutation(perm, m)?;
        let (tp1, s) = (self.space.t + 1, self.space.s);
        let mut f = Tensor::zeros(&[m, tp1]);
        let mut e = Tensor::zeros(&[m, m, s]);
        for i in 0..m {
            for c in 0..tp1 {
                f.set2(perm[i], c, self.f.at2(i, c));
            }
            for j in 0..m {
                for c in 0..s {
                    e.set3(perm[i], perm[j], c, self.e.at3(i, j, c));
                }
            }
        }
        Ok(RelaxedGraph { space: self.space, f, e })
    }
}

/// An unpadded discrete graph: what evaluation actually compares.
///
/// Edges are stored as a sorted list of `(i, j, label)` with `i < j` and
/// label ≠ no-edge; equality is positional, not up to isomorphism.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableGraph {
    labels: Vec<usize>,
    edges: Vec<(usize, usize, usize)>,
}

impl VariableGraph {
    pub fn new(labels: Vec<usize>, mut edges: Vec<(usize, usize, usize)>) -> Result<Self> {
        let n = labels.len();
        for e in edges.iter_mut() {
            if e.0 > e.1 {
                *e = (e.1, e.0, e.2);
            }
        }
        edges.sort_unstable();
        for w in edges.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(Error::GraphInvariant(format!(
                    "duplicate edge ({},{})",
                    w[0].0, w[0].1
                )));
            }
        }
        for &(i, j, s) in &edges {
            if i == j || j >= n {
                return Err(Error::GraphInvariant(format!(
                    "edge ({},{}) has invalid endpoints for {} nodes",
                    i, j, n
                )));
            }
            if s == NO_EDGE {
                return Err(Error::GraphInvariant(format!(
                    "edge ({},{}) carries the no-edge label",
                    i, j
                )));
            }
        }
        Ok(VariableGraph { labels, edges })
    }

    pub fn empty() -> Self {
        VariableGraph { labels: Vec::new(), edges: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn edges(&self) -> &[(usize, usize, usize)] {
        &self.edges
    }

    /// Dense symmetric adjacency with labels; no-edge = 0.
    pub fn edge_matrix(&self) -> Vec<usize> {
        let n = self.n();
        let mut m = vec![NO_EDGE; n * n];
        for &(i, j, s) in &self.edges {
            m[i * n + j] = s;
            m[j * n + i] = s;
        }
        m
    }

    /// Neighbors of node `i` with edge labels.
    pub fn neighbors(&self, i: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &(a, b, s) in &self.edges {
            if a == i {
                out.push((b, s));
            } else if b == i {
                out.push((a, s));
            }
        }
        out
    }
}

fn check_simplex(xs: &[f64], tol: f64) -> std::result::Result<(), String> {
    if let Some(&bad) = xs.iter().find(|&&v| v < -tol) {
        return Err(format!("negative coordinate {}", bad));
    }
    let sum: f64 = xs.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(format!("coordinates sum to {}, not 1", sum));
    }
    Ok(())
}

fn check_permutation(perm: &[usize], m: usize) -> Result<()> {
    if perm.len() != m {
        return Err(Error::Contract(format!(
            "permutation length {} for {} nodes",
            perm.len(),
            m
        )));
    }
    let mut seen = vec![false; m];
    for &p in perm {
        if p >= m || seen[p] {
            return Err(Error::Contract("not a permutation".into()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Index of the maximum, ties broken by lowest index.
pub fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}
