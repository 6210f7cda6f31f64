//! Prediction quality metrics: per-example graph edit distances, their mean
//! and spread, exact-match counts, and cross-seed aggregation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ged::{ged, EditCosts};
use crate::graph::VariableGraph;

/// Metrics over one aligned prediction/reference list.
#[derive(Clone, Debug)]
pub struct EvalMetrics {
    pub mean_ged: f64,
    pub std_ged: f64,
    /// Number of predictions with edit distance exactly zero.
    pub perfect: usize,
    pub count: usize,
    /// Per-example distances, in input order.
    pub geds: Vec<f64>,
}

/// Mean and population standard deviation. Empty input → error.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Input("cannot aggregate an empty value list".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Score predictions against references pairwise.
pub fn evaluate(
    predictions: &[VariableGraph],
    references: &[VariableGraph],
    costs: EditCosts,
) -> Result<EvalMetrics> {
    if predictions.len() != references.len() {
        return Err(Error::Input(format!(
            "{} predictions but {} references",
            predictions.len(),
            references.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Input("cannot evaluate an empty prediction list".into()));
    }
    let geds: Vec<f64> = predictions
        .par_iter()
        .zip(references.par_iter())
        .map(|(p, r)| ged(p, r, costs))
        .collect::<Result<_>>()?;
    let (mean_ged, std_ged) = mean_std(&geds)?;
    let perfect = geds.iter().filter(|&&d| d == 0.0).count();
    Ok(EvalMetrics { mean_ged, std_ged, perfect, count: geds.len(), geds })
}

/// The most frequent graph in a list; frequency ties resolve to the graph
/// seen first. This is the constant-predictor baseline.
pub fn modal_graph(graphs: &[VariableGraph]) -> Result<VariableGraph> {
    if graphs.is_empty() {
        return Err(Error::Input("cannot take the mode of an empty graph list".into()));
    }
    type Key = (Vec<usize>, Vec<(usize, usize, usize)>);
    let mut counts: std::collections::BTreeMap<Key, (usize, usize)> =
        std::collections::BTreeMap::new();
    for (pos, g) in graphs.iter().enumerate() {
        let key = (g.labels().to_vec(), g.edges().to_vec());
        let entry = counts.entry(key).or_insert((0, pos));
        entry.0 += 1;
    }
    let (_, &(_, first)) = counts
        .iter()
        .max_by(|(_, &(ca, fa)), (_, &(cb, fb))| ca.cmp(&cb).then(fb.cmp(&fa)))
        .expect("non-empty");
    Ok(graphs[first].clone())
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
    fn identical_lists_score_perfectly() {
        let refs = vec![graph(&[0, 1], &[(0, 1, 1)]), graph(&[2], &[])];
        let m = evaluate(&refs, &refs, EditCosts::default()).unwrap();
        assert_eq!(m.mean_ged, 0.0);
        assert_eq!(m.std_ged, 0.0);
        assert_eq!(m.perfect, 2);
        assert_eq!(m.count, 2);
    }

    #[test]
    fn one_wrong_label_among_two_gives_mean_half() {
        let refs = vec![graph(&[0], &[]), graph(&[1], &[])];
        let preds = vec![graph(&[0], &[]), graph(&[2], &[])];
        let m = evaluate(&preds, &refs, EditCosts::default()).unwrap();
        assert_eq!(m.mean_ged, 0.5);
        assert_eq!(m.perfect, 1);
        assert_eq!(m.geds, vec![0.0, 1.0]);
    }

    #[test]
    fn misaligned_or_empty_lists_are_rejected() {
        let refs = vec![graph(&[0], &[])];
        assert!(evaluate(&[], &refs, EditCosts::default()).is_err());
        assert!(evaluate(&[], &[], EditCosts::default()).is_err());
    }

    #[test]
    fn perfect_count_equals_zero_distance_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rand_graph = |rng: &mut ChaCha8Rng| {
            let n = rng.gen_range(1..=4);
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen_bool(0.4) {
                        edges.push((i, j, rng.gen_range(1..3)));
                    }
                }
            }
            VariableGraph::new(labels, edges).unwrap()
        };
        let refs: Vec<VariableGraph> = (0..40).map(|_| rand_graph(&mut rng)).collect();
        let preds: Vec<VariableGraph> = refs
            .iter()
            .map(|g| if rng.gen_bool(0.5) { g.clone() } else { rand_graph(&mut rng) })
            .collect();
        let m = evaluate(&preds, &refs, EditCosts::default()).unwrap();
        let zero_rows = m.geds.iter().filter(|&&d| d == 0.0).count();
        assert_eq!(m.perfect, zero_rows);
    }

    #[test]
    fn mean_std_hand_values() {
        let (mean, std) = mean_std(&[1.0, 3.0]).unwrap();
        assert_eq!(mean, 2.0);
        assert_eq!(std, 1.0);
        assert!(mean_std(&[]).is_err());
        let (m1, s1) = mean_std(&[4.25]).unwrap();
        assert_eq!((m1, s1), (4.25, 0.0));
    }

    #[test]
    fn modal_graph_picks_the_most_frequent() {
        let a = graph(&[0], &[]);
        let b = graph(&[1], &[]);
        let list = vec![a.clone(), b.clone(), b.clone(), a.clone(), b.clone()];
        assert_eq!(modal_graph(&list).unwrap(), b);
    }

    #[test]
    fn modal_graph_tie_goes_to_the_earliest() {
        let a = graph(&[0, 1], &[(0, 1, 1)]);
        let b = graph(&[1], &[]);
        let list = vec![a.clone(), b.clone(), b.clone(), a.clone()];
        assert_eq!(modal_graph(&list).unwrap(), a);
        assert!(modal_graph(&[]).is_err());
    }
}
