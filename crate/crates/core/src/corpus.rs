//! Synthetic corpus generation: seeded random connected labeled graphs paired
//! with an exact, parseable string form of each graph.
//!
//! The string is a canonical serialization produced by a lowest-index
//! depth-first traversal: node label characters joined by edge label
//! characters, side branches in parentheses, and edges back to an
//! already-visited node written as the edge character followed by that node's
//! single-digit index. Graphs are renumbered into traversal order first, so
//! parsing a serialization recovers the graph bit for bit.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{LabelAlphabets, VariableGraph, NO_EDGE};

/// Single-character node label names, in label-index order.
const NODE_CHARS: &str = "abcdefghi";
/// Single-character edge label names; index 0 is the no-edge name and is
/// never serialized.
const EDGE_CHARS: &str = ".-=#:+%&!";
/// Probability of adding each possible extra edge beyond the spanning tree.
const EXTRA_EDGE_PROB: f64 = 0.2;

/// Label alphabets whose names are the single characters the serializer emits.
pub fn make_alphabets(t: usize, s: usize) -> Result<LabelAlphabets> {
    if t == 0 || t > NODE_CHARS.len() {
        return Err(Error::Config(format!(
            "node label count {} outside supported range 1..={}",
            t,
            NODE_CHARS.len()
        )));
    }
    if s < 2 || s > EDGE_CHARS.len() {
        return Err(Error::Config(format!(
            "edge label count {} outside supported range 2..={}",
            s,
            EDGE_CHARS.len()
        )));
    }
    let node_labels: Vec<String> = NODE_CHARS.chars().take(t).map(String::from).collect();
    let edge_labels: Vec<String> = EDGE_CHARS.chars().take(s).map(String::from).collect();
    LabelAlphabets::new(node_labels, edge_labels)
}

/// Depth-first discovery order from node 0, visiting neighbors in ascending
/// index order. Errors if the graph is empty or disconnected.
fn dfs_order(g: &VariableGraph) -> Result<Vec<usize>> {
    let n = g.n();
    if n == 0 {
        return Err(Error::Input("cannot serialize an empty graph".into()));
    }
    let adj = g.edge_matrix();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut stack = vec![(0usize, 0usize)];
    seen[0] = true;
    order.push(0);
    while let Some((u, next)) = stack.pop() {
        for v in next..n {
            if adj[u * n + v] != NO_EDGE && !seen[v] {
                seen[v] = true;
                order.push(v);
                stack.push((u, v + 1));
                stack.push((v, 0));
                break;
            }
        }
    }
    if order.len() != n {
        return Err(Error::Input(format!(
            "graph is disconnected: reached {} of {} nodes",
            order.len(),
            n
        )));
    }
    Ok(order)
}

/// Renumber a connected graph into its own depth-first discovery order.
/// The result serializes without any further reordering.
pub fn canonicalize(g: &VariableGraph) -> Result<VariableGraph> {
    let order = dfs_order(g)?;
    // order[k] = old index discovered k-th; invert to map old → new.
    let mut new_of_old = vec![0usize; g.n()];
    for (new, &old) in order.iter().enumerate() {
        new_of_old[old] = new;
    }
    let labels: Vec<usize> = order.iter().map(|&old| g.labels()[old]).collect();
    let edges: Vec<(usize, usize, usize)> = g
        .edges()
        .iter()
        .map(|&(i, j, s)| (new_of_old[i], new_of_old[j], s))
        .collect();
    VariableGraph::new(labels, edges)
}

fn node_char(alphabets: &LabelAlphabets, label: usize) -> Result<char> {
    let name = alphabets
        .node_names()
        .get(label)
        .ok_or_else(|| Error::Input(format!("node label {} out of range", label)))?;
    single_char(name, "node")
}

fn edge_char(alphabets: &LabelAlphabets, label: usize) -> Result<char> {
    if label == NO_EDGE {
        return Err(Error::Input("the no-edge label cannot be serialized".into()));
    }
    let name = alphabets
        .edge_names()
        .get(label)
        .ok_or_else(|| Error::Input(format!("edge label {} out of range", label)))?;
    single_char(name, "edge")
}

fn single_char(name: &str, what: &str) -> Result<char> {
    let mut chars = name.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(Error::Input(format!(
            "{} label name '{}' is not a single character",
            what, name
        ))),
    }
}

/// Serialize a connected graph, canonicalizing it first. Returns the string
/// together with the renumbered graph it describes exactly.
pub fn canonical_serialize(
    g: &VariableGraph,
    alphabets: &LabelAlphabets,
) -> Result<(String, VariableGraph)> {
    let canonical = canonicalize(g)?;
    if canonical.n() > 10 {
        return Err(Error::Capacity(
            "serialization uses single-digit node references; at most 10 nodes".into(),
        ));
    }
    let n = canonical.n();
    let adj = canonical.edge_matrix();

    // In canonical order, the traversal discovers nodes 0, 1, 2, … in turn;
    // node u's tree children and back references follow from index order.
    let mut parent = vec![usize::MAX; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut back_refs: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut seen = vec![false; n];
    let mut stack = vec![(0usize, 0usize)];
    seen[0] = true;
    while let Some((u, next)) = stack.pop() {
        for v in next..n {
            if adj[u * n + v] != NO_EDGE && !seen[v] {
                seen[v] = true;
                parent[v] = u;
                children[u].push(v);
                stack.push((u, v + 1));
                stack.push((v, 0));
                break;
            }
        }
    }
    for u in 0..n {
        for v in 0..u {
            if adj[u * n + v] != NO_EDGE && parent[u] != v && parent[v] != u {
                back_refs[u].push(v);
            }
        }
    }

    let mut out = String::new();
    // Iterative emission: frames carry what to write before each subtree.
    enum Piece {
        Node(usize),
        Char(char),
    }
    let mut emit = vec![Piece::Node(0)];
    while let Some(piece) = emit.pop() {
        match piece {
            Piece::Char(c) => out.push(c),
            Piece::Node(u) => {
                out.push(node_char(alphabets, canonical.labels()[u])?);
                let mut tail: Vec<Piece> = Vec::new();
                for &v in &back_refs[u] {
                    tail.push(Piece::Char(edge_char(alphabets, adj[u * n + v])?));
                    tail.push(Piece::Char(
                        char::from_digit(v as u32, 10).expect("index below 10"),
                    ));
                }
                let kids = &children[u];
                for (pos, &c) in kids.iter().enumerate() {
                    let last = pos + 1 == kids.len();
                    if !last {
                        tail.push(Piece::Char('('));
                    }
                    tail.push(Piece::Char(edge_char(alphabets, adj[u * n + c])?));
                    tail.push(Piece::Node(c));
                    if !last {
                        tail.push(Piece::Char(')'));
                    }
                }
                // Reverse so the stack pops them in written order.
                while let Some(p) = tail.pop() {
                    emit.push(p);
                }
            }
        }
    }
    Ok((out, canonical))
}

/// Parse a serialization back into the graph it describes.
pub fn parse_input(s: &str, alphabets: &LabelAlphabets) -> Result<VariableGraph> {
    let node_of: std::collections::HashMap<char, usize> = alphabets
        .node_names()
        .iter()
        .enumerate()
        .filter_map(|(i, name)| name.chars().next().map(|c| (c, i)))
        .collect();
    let edge_of: std::collections::HashMap<char, usize> = alphabets
        .edge_names()
        .iter()
        .enumerate()
        .skip(1)
        .filter_map(|(i, name)| name.chars().next().map(|c| (c, i)))
        .collect();

    let mut labels: Vec<usize> = Vec::new();
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    let mut current: Option<usize> = None;
    let mut pending: Option<usize> = None;

    for (pos, c) in s.chars().enumerate() {
        let fail = |what: &str| Error::Input(format!("char {} ('{}'): {}", pos, c, what));
        if let Some(&label) = node_of.get(&c) {
            let id = labels.len();
            labels.push(label);
            match (current, pending.take()) {
                (Some(from), Some(e)) => edges.push((from, id, e)),
                (Some(_), None) => return Err(fail("adjacent nodes need an edge")),
                (None, Some(_)) => return Err(fail("edge before the first node")),
                (None, None) => {}
            }
            current = Some(id);
        } else if let Some(&e) = edge_of.get(&c) {
            if current.is_none() {
                return Err(fail("edge before the first node"));
            }
            if pending.replace(e).is_some() {
                return Err(fail("two edges in a row"));
            }
        } else if let Some(d) = c.to_digit(10) {
            let target = d as usize;
            let from = current.ok_or_else(|| fail("node reference before the first node"))?;
            let e = pending.take().ok_or_else(|| fail("node reference needs an edge"))?;
            if target >= labels.len() {
                return Err(fail("reference to a node not seen yet"));
            }
            edges.push((from, target, e));
        } else if c == '(' {
            let u = current.ok_or_else(|| fail("branch before the first node"))?;
            if pending.is_some() {
                return Err(fail("dangling edge before a branch"));
            }
            open.push(u);
        } else if c == ')' {
            if pending.is_some() {
                return Err(fail("dangling edge at branch end"));
            }
            current = Some(open.pop().ok_or_else(|| fail("unmatched branch close"))?);
        } else {
            return Err(fail("unknown character"));
        }
    }
    if pending.is_some() {
        return Err(Error::Input("input ends on a dangling edge".into()));
    }
    if !open.is_empty() {
        return Err(Error::Input("unclosed branch".into()));
    }
    if labels.is_empty() {
        return Err(Error::Input("input describes no nodes".into()));
    }
    VariableGraph::new(labels, edges)
}

/// Generate `n` seeded random connected labeled graphs paired with their
/// canonical serializations.
pub fn gen_synthetic_corpus(
    n: usize,
    m_max: usize,
    t: usize,
    s: usize,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("corpus size must be at least 1".into()));
    }
    if !(2..=9).contains(&m_max) {
        return Err(Error::Config(format!(
            "graph size cap {} outside supported range 2..=9",
            m_max
        )));
    }
    let alphabets = make_alphabets(t, s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let nodes = rng.gen_range(1..=m_max);
        let labels: Vec<usize> = (0..nodes).map(|_| rng.gen_range(0..t)).collect();
        let mut edges: Vec<(usize, usize, usize)> = Vec::new();
        // Random spanning tree keeps the graph connected…
        for i in 1..nodes {
            let p = rng.gen_range(0..i);
            edges.push((p, i, rng.gen_range(1..s)));
        }
        // …plus sparse extra edges for cycles.
        for i in 0..nodes {
            for j in (i + 1)..nodes {
                let is_tree = edges.iter().any(|&(a, b, _)| (a, b) == (i, j));
                if !is_tree && rng.gen_bool(EXTRA_EDGE_PROB) {
                    edges.push((i, j, rng.gen_range(1..s)));
                }
            }
        }
        let raw = VariableGraph::new(labels, edges)?;
        let (input, canonical) = canonical_serialize(&raw, &alphabets)?;
        pairs.push((input, canonical));
    }
    Dataset::new(alphabets, pairs)
}
