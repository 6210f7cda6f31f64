//! Exact graph edit distance under unit edit costs, computed by depth-first
//! branch and bound over node assignments.
//!
//! Every node of the first graph is either mapped to a distinct node of the
//! second or deleted; leftover nodes of the second are insertions. The edit
//! cost of a complete assignment is the number of node relabels, node
//! insertions/deletions, and edge insertions/deletions/relabels it implies.
//! Exactness is kept tractable by capping the real node count.

use crate::error::{Error, Result};
use crate::graph::{VariableGraph, NO_EDGE};

/// Largest real node count accepted per graph; beyond this the exhaustive
/// search is no longer reasonable and the call fails instead of guessing.
pub const MAX_EXACT_NODES: usize = 10;

/// Unit edit costs. Every operation costs 1; the only knob is whether edge
/// labels are compared at all.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EditCosts {
    /// When false, edges are compared by presence alone and a relabel is free.
    pub use_edge_labels: bool,
}

impl Default for EditCosts {
    fn default() -> Self {
        EditCosts { use_edge_labels: true }
    }
}

/// Cost of aligning two edge slots (0 = absent).
fn edge_cost(e1: usize, e2: usize, costs: EditCosts) -> u32 {
    match (e1 == NO_EDGE, e2 == NO_EDGE) {
        (true, true) => 0,
        (true, false) | (false, true) => 1,
        (false, false) => {
            if costs.use_edge_labels && e1 != e2 {
                1
            } else {
                0
            }
        }
    }
}

struct Search<'a> {
    n1: usize,
    n2: usize,
    labels1: &'a [usize],
    labels2: &'a [usize],
    adj1: Vec<usize>,
    adj2: Vec<usize>,
    costs: EditCosts,
    /// Assignment target per node of graph 1: Some(j) or None for deletion.
    assignment: Vec<Option<usize>>,
    used2: Vec<bool>,
    best: u32,
}

impl<'a> Search<'a> {
    /// Edge-alignment cost incurred by fixing node `i`'s target, against all
    /// previously fixed nodes.
    fn edge_delta(&self, i: usize, target: Option<usize>) -> u32 {
        let mut delta = 0;
        for i_prev in 0..i {
            let e1 = self.adj1[i * self.n1 + i_prev];
            match (target, self.assignment[i_prev]) {
                (Some(j), Some(j_prev)) => {
                    let e2 = self.adj2[j * self.n2 + j_prev];
                    delta += edge_cost(e1, e2, self.costs);
                }
                // A deleted endpoint deletes every incident edge.
                _ => {
                    if e1 != NO_EDGE {
                        delta += 1;
                    }
                }
            }
        }
        delta
    }

    /// Cost of everything graph 2 still owns once all of graph 1 is fixed:
    /// unmatched nodes are insertions, as is every edge touching one.
    fn completion_cost(&self) -> u32 {
        let mut cost = 0;
        for j in 0..self.n2 {
            if !self.used2[j] {
                cost += 1;
            }
            for j_next in (j + 1)..self.n2 {
                if self.adj2[j * self.n2 + j_next] != NO_EDGE
                    && (!self.used2[j] || !self.used2[j_next])
                {
                    cost += 1;
                }
            }
        }
        cost
    }

    fn recurse(&mut self, i: usize, cost_so_far: u32) {
        if cost_so_far >= self.best {
            return;
        }
        if i == self.n1 {
            let total = cost_so_far + self.completion_cost();
            if total < self.best {
                self.best = total;
            }
            return;
        }
        // Admissible lower bound: surplus nodes on either side must be
        // inserted or deleted no matter how the rest is assigned.
        let remaining1 = self.n1 - i;
        let available2 = self.used2.iter().filter(|&&u| !u).count();
        let bound = cost_so_far + (available2.max(remaining1) - remaining1.min(available2)) as u32;
        if bound >= self.best {
            return;
        }

        // Try candidate targets, cheapest node cost first so good complete
        // assignments tighten the bound early.
        let mut targets: Vec<(u32, usize)> = (0..self.n2)
            .filter(|&j| !self.used2[j])
            .map(|j| (u32::from(self.labels1[i] != self.labels2[j]), j))
            .collect();
        targets.sort_by_key(|&(c, j)| (c, j));
        for (node_cost, j) in targets {
            let delta = self.edge_delta(i, Some(j));
            self.assignment[i] = Some(j);
            self.used2[j] = true;
            self.recurse(i + 1, cost_so_far + node_cost + delta);
            self.used2[j] = false;
        }
        // Deletion branch.
        let delta = self.edge_delta(i, None);
        self.assignment[i] = None;
        self.recurse(i + 1, cost_so_far + 1 + delta);
    }
}

/// Exact graph edit distance between two unpadded graphs under unit costs.
/// Fails if either graph has more than [`MAX_EXACT_NODES`] nodes.
pub fn ged(g1: &VariableGraph, g2: &VariableGraph, costs: EditCosts) -> Result<f64> {
    for (name, g) in [("first", g1), ("second", g2)] {
        if g.n() > MAX_EXACT_NODES {
            return Err(Error::Capacity(format!(
                "{} graph has {} nodes; exact edit distance is capped at {}",
                name,
                g.n(),
                MAX_EXACT_NODES
            )));
        }
    }
    // Every node and edge deleted, every node and edge inserted.
    let upper = (g1.n() + g1.edges().len() + g2.n() + g2.edges().len()) as u32;
    let mut search = Search {
        n1: g1.n(),
        n2: g2.n(),
        labels1: g1.labels(),
        labels2: g2.labels(),
        adj1: g1.edge_matrix(),
        adj2: g2.edge_matrix(),
        costs,
        assignment: vec![None; g1.n()],
        used2: vec![false; g2.n()],
        best: upper + 1,
    };
    search.recurse(0, 0);
    Ok(f64::from(search.best.min(upper)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph(labels: &[usize], edges: &[(usize, usize, usize)]) -> VariableGraph {
        VariableGraph::new(labels.to_vec(), edges.to_vec()).unwrap()
    }

    #[test]
    fn identical_graphs_have_zero_distance() {
        let g = graph(&[0, 1, 2], &[(0, 1, 1), (1, 2, 2)]);
        assert_eq!(ged(&g, &g, EditCosts::default()).unwrap(), 0.0);
    }

    #[test]
    fn single_node_relabel_costs_one() {
        let a = graph(&[0, 1], &[(0, 1, 1)]);
        let b = graph(&[0, 2], &[(0, 1, 1)]);
        assert_eq!(ged(&a, &b, EditCosts::default()).unwrap(), 1.0);
    }

    #[test]
    fn added_node_with_edge_costs_two() {
        let a = graph(&[0, 1], &[(0, 1, 1)]);
        let b = graph(&[0, 1, 1], &[(0, 1, 1), (1, 2, 1)]);
        assert_eq!(ged(&a, &b, EditCosts::default()).unwrap(), 2.0);
    }

    #[test]
    fn empty_graph_distance_counts_all_insertions() {
        let g = graph(&[0, 1, 0], &[(0, 1, 1), (0, 2, 2)]);
        let d = ged(&VariableGraph::empty(), &g, EditCosts::default()).unwrap();
        assert_eq!(d, 5.0); // three nodes plus two edges
        assert_eq!(ged(&g, &VariableGraph::empty(), EditCosts::default()).unwrap(), 5.0);
    }

    #[test]
    fn edge_relabel_costs_one_only_when_labels_observed() {
        let a = graph(&[0, 0], &[(0, 1, 1)]);
        let b = graph(&[0, 0], &[(0, 1, 2)]);
        assert_eq!(ged(&a, &b, EditCosts::default()).unwrap(), 1.0);
        assert_eq!(ged(&a, &b, EditCosts { use_edge_labels: false }).unwrap(), 0.0);
    }

    #[test]
    fn isomorphic_relabelings_are_free() {
        // Same triangle written with permuted node order.
        let a = graph(&[0, 1, 2], &[(0, 1, 1), (1, 2, 2), (0, 2, 1)]);
        let b = graph(&[2, 0, 1], &[(1, 2, 1), (0, 2, 2), (0, 1, 1)]);
        assert_eq!(ged(&a, &b, EditCosts::default()).unwrap(), 0.0);
    }

    #[test]
    fn oversized_graphs_are_rejected() {
        let labels = vec![0; MAX_EXACT_NODES + 1];
        let big = graph(&labels, &[]);
        let small = graph(&[0], &[]);
        assert!(ged(&big, &small, EditCosts::default()).is_err());
        assert!(ged(&small, &big, EditCosts::default()).is_err());
    }

    fn random_graph(rng: &mut ChaCha8Rng, max_n: usize, t: usize, s: usize) -> VariableGraph {
        let n = rng.gen_range(0..=max_n);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..t)).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_bool(0.4) {
                    edges.push((i, j, rng.gen_range(1..s)));
                }
            }
        }
        VariableGraph::new(labels, edges).unwrap()
    }

    #[test]
    fn distance_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..60 {
            let a = random_graph(&mut rng, 5, 3, 3);
            let b = random_graph(&mut rng, 5, 3, 3);
            for costs in [EditCosts::default(), EditCosts { use_edge_labels: false }] {
                let ab = ged(&a, &b, costs).unwrap();
                let ba = ged(&b, &a, costs).unwrap();
                assert_eq!(ab, ba, "asymmetry between {:?} and {:?}", a, b);
            }
        }
    }

    #[test]
    fn triangle_inequality_holds_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..40 {
            let a = random_graph(&mut rng, 4, 3, 3);
            let b = random_graph(&mut rng, 4, 3, 3);
            let c = random_graph(&mut rng, 4, 3, 3);
            let costs = EditCosts::default();
            let ab = ged(&a, &b, costs).unwrap();
            let bc = ged(&b, &c, costs).unwrap();
            let ac = ged(&a, &c, costs).unwrap();
            assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn distance_never_exceeds_delete_everything_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..60 {
            let a = random_graph(&mut rng, 5, 2, 3);
            let b = random_graph(&mut rng, 5, 2, 3);
            let d = ged(&a, &b, EditCosts::default()).unwrap();
            let bound = (a.n() + a.edges().len() + b.n() + b.edges().len()) as f64;
            assert!(d <= bound);
        }
    }
}
