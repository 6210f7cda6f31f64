//! Independent oracles and sampling helpers for the acceptance suite.
//!
//! Everything here recomputes results from first principles — brute-force
//! enumeration rather than the production algorithms — so agreement is
//! evidence, not circularity.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sgp_core::embedder::UnitEmbedding;
use sgp_core::ged::EditCosts;
use sgp_core::graph::{GraphSpace, RelaxedGraph, VariableGraph, NO_EDGE};
use sgp_core::simplex::project_relaxed_graph;
use sgp_core::Tensor;

/// Euclidean projection onto the probability simplex by trying every support
/// set of an active-set KKT solution and keeping the feasible one closest to
/// the input. Exponential in k; intended for k ≤ 8.
pub fn qp_project_oracle(v: &[f64]) -> Vec<f64> {
    let k = v.len();
    assert!(k >= 1 && k <= 16, "oracle is for small dimensions");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).collect();
        let sum: f64 = support.iter().map(|&i| v[i]).sum();
        let shift = (1.0 - sum) / support.len() as f64;
        let mut b = vec![0.0; k];
        let mut feasible = true;
        for &i in &support {
            b[i] = v[i] + shift;
            if b[i] < -1e-12 {
                feasible = false;
                break;
            }
        }
        if !feasible {
            continue;
        }
        let dist: f64 = (0..k).map(|i| (b[i] - v[i]) * (b[i] - v[i])).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, b));
        }
    }
    let (_, mut b) = best.expect("the full support is always feasible in at least one subset");
    for x in &mut b {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    b
}

/// Cost of one complete node mapping, recomputed from scratch.
fn mapping_cost(
    g1: &VariableGraph,
    g2: &VariableGraph,
    adj1: &[usize],
    adj2: &[usize],
    mapped: &[(usize, usize)],
    costs: EditCosts,
) -> u32 {
    let (n1, n2) = (g1.n(), g2.n());
    let image: Vec<Option<usize>> = {
        let mut im = vec![None; n1];
        for &(i, j) in mapped {
            im[i] = Some(j);
        }
        im
    };
    let covered2: Vec<bool> = {
        let mut c = vec![false; n2];
        for &(_, j) in mapped {
            c[j] = true;
        }
        c
    };
    let mut cost = (n1 - mapped.len()) as u32 + (n2 - mapped.len()) as u32;
    for &(i, j) in mapped {
        if g1.labels()[i] != g2.labels()[j] {
            cost += 1;
        }
    }
    let pair_cost = |e1: usize, e2: usize| -> u32 {
        match (e1 == NO_EDGE, e2 == NO_EDGE) {
            (true, true) => 0,
            (false, false) => u32::from(costs.use_edge_labels && e1 != e2),
            _ => 1,
        }
    };
    for i in 0..n1 {
        for i2 in (i + 1)..n1 {
            let e1 = adj1[i * n1 + i2];
            match (image[i], image[i2]) {
                (Some(j), Some(j2)) => cost += pair_cost(e1, adj2[j * n2 + j2]),
                _ => cost += u32::from(e1 != NO_EDGE),
            }
        }
    }
    for j in 0..n2 {
        for j2 in (j + 1)..n2 {
            if adj2[j * n2 + j2] != NO_EDGE && !(covered2[j] && covered2[j2]) {
                cost += 1;
            }
        }
    }
    cost
}

/// Exact graph edit distance by exhaustive enumeration of every subset of
/// kept nodes and every injective assignment of it. Feasible for ≤5 nodes.
pub fn ged_oracle(g1: &VariableGraph, g2: &VariableGraph, costs: EditCosts) -> f64 {
    let (n1, n2) = (g1.n(), g2.n());
    assert!(n1 <= 6 && n2 <= 6, "oracle is exponential; keep graphs tiny");
    let adj1 = g1.edge_matrix();
    let adj2 = g2.edge_matrix();
    let mut best = u32::MAX;

    fn assign(
        chosen: &[usize],
        pos: usize,
        used: &mut [bool],
        current: &mut Vec<(usize, usize)>,
        visit: &mut dyn FnMut(&[(usize, usize)]),
    ) {
        if pos == chosen.len() {
            visit(current);
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                current.push((chosen[pos], j));
                assign(chosen, pos + 1, used, current, visit);
                current.pop();
                used[j] = false;
            }
        }
    }

    for mask in 0u32..(1 << n1) {
        let chosen: Vec<usize> = (0..n1).filter(|&i| mask & (1 << i) != 0).collect();
        if chosen.len() > n2 {
            continue;
        }
        let mut used = vec![false; n2];
        let mut current = Vec::new();
        assign(&chosen, 0, &mut used, &mut current, &mut |mapped| {
            let c = mapping_cost(g1, g2, &adj1, &adj2, mapped, costs);
            if c < best {
                best = c;
            }
        });
    }
    f64::from(best)
}

/// Random graph with up to `max_n` nodes (possibly zero), for oracle tests.
pub fn random_variable_graph(
    rng: &mut ChaCha8Rng,
    max_n: usize,
    t: usize,
    s: usize,
) -> VariableGraph {
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
    VariableGraph::new(labels, edges).expect("construction is valid")
}

/// Random feasible relaxed graph: noise pushed through the projection.
pub fn random_relaxed_graph(rng: &mut ChaCha8Rng, space: GraphSpace) -> RelaxedGraph {
    let f = Tensor::randn(&[space.m_max, space.t + 1], 1.0, rng);
    let e = Tensor::randn(&[space.m_max, space.m_max, space.s], 1.0, rng);
    project_relaxed_graph(space, &f, &e).expect("projection of finite noise succeeds")
}

/// Random point on the unit sphere.
pub fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> UnitEmbedding {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return UnitEmbedding::new(v.into_iter().map(|x| x / n).collect())
                .expect("normalized");
        }
    }
}
