//! Euclidean projection onto the probability simplex, scalar and graph-wide.
//!
//! The per-vector routine is the classic sort-and-threshold algorithm: find
//! the largest support whose shifted entries stay positive, then clip. The
//! graph-wide routine applies it independently to every label row and edge
//! fiber (mirrored pairs averaged first) and pins diagonal fibers to no-edge,
//! which is exactly the projection onto the relaxed graph space.

use crate::error::{Error, Result};
use crate::graph::{GraphSpace, RelaxedGraph, NO_EDGE};
use crate::tensor::Tensor;

/// Euclidean projection of `v` onto `{b : b ≥ 0, Σb = 1}`.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Contract("cannot project an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("simplex projection input".into()));
    }
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite values compare"));
    // Largest rho with sorted[rho-1] + (1 - prefix_sum(rho)) / rho > 0.
    let mut prefix = 0.0;
    let mut rho = 0;
    let mut shift = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        prefix += u;
        let candidate = (1.0 - prefix) / (i + 1) as f64;
        if u + candidate > 0.0 {
            rho = i + 1;
            shift = candidate;
        }
    }
    debug_assert!(rho >= 1, "rho >= 1 because the largest entry always qualifies");
    Ok(v.iter().map(|&x| (x + shift).max(0.0)).collect())
}

/// Projection onto the relaxed graph space: every label row and edge fiber
/// onto its simplex, edge fibers symmetrized by averaging the two mirrored
/// fibers before projecting, diagonal fibers reset to exact one-hot no-edge.
pub fn project_relaxed_graph(space: GraphSpace, f: &Tensor, e: &Tensor) -> Result<RelaxedGraph> {
    let m = space.m_max;
    let (tp1, s) = (space.t + 1, space.s);
    if f.shape() != [m, tp1] {
        return Err(Error::Shape {
            op: "project-relaxed",
            details: format!("label matrix {:?}, expected [{}, {}]", f.shape(), m, tp1),
        });
    }
    if e.shape() != [m, m, s] {
        return Err(Error::Shape {
            op: "project-relaxed",
            details: format!("edge tensor {:?}, expected [{}, {}, {}]", e.shape(), m, m, s),
        });
    }

    let mut pf = Tensor::zeros(&[m, tp1]);
    for i in 0..m {
        let row = project_simplex(f.row(i))?;
        for (c, &v) in row.iter().enumerate() {
            pf.set2(i, c, v);
        }
    }

    let mut pe = Tensor::zeros(&[m, m, s]);
    for i in 0..m {
        pe.set3(i, i, NO_EDGE, 1.0);
        for j in (i + 1)..m {
            let (a, b) = (e.fiber(i, j), e.fiber(j, i));
            let avg: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect();
            let proj = project_simplex(&avg)?;
            for (c, &v) in proj.iter().enumerate() {
                pe.set3(i, j, c, v);
                pe.set3(j, i, c, v);
            }
        }
    }
    Ok(RelaxedGraph::new_unchecked(space, pf, pe))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{:?} vs {:?}", a, b);
        }
    }

    #[test]
    fn symmetric_input_projects_to_uniform() {
        let p = project_simplex(&[0.5, 0.5, 0.5]).unwrap();
        assert_close(&p, &[1.0 / 3.0; 3], 1e-15);
    }

    #[test]
    fn dominant_coordinate_saturates() {
        let p = project_simplex(&[2.0, 0.0, 0.0]).unwrap();
        assert_close(&p, &[1.0, 0.0, 0.0], 1e-15);
    }

    #[test]
    fn feasible_point_is_fixed() {
        let p = project_simplex(&[0.2, 0.8]).unwrap();
        assert_eq!(p, vec![0.2, 0.8]);
    }

    #[test]
    fn single_coordinate_goes_to_one() {
        let p = project_simplex(&[-7.3]).unwrap();
        assert_close(&p, &[1.0], 1e-12);
    }

    #[test]
    fn output_is_always_on_the_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let k = rng.gen_range(1..=8);
            let v: Vec<f64> = (0..k).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let p = project_simplex(&v).unwrap();
            assert!(p.iter().all(|&x| x >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_finite_input() {
        assert!(project_simplex(&[f64::NAN, 0.0]).is_err());
        assert!(project_simplex(&[]).is_err());
    }

    fn space() -> GraphSpace {
        GraphSpace::new(3, 2, 2).unwrap()
    }

    #[test]
    fn feasible_relaxed_graph_is_nearly_fixed() {
        use crate::graph::PaddedGraph;
        let g = PaddedGraph::pad(space(), &[0, 1], &[(0, 1, 1)]).unwrap().relax();
        let p = project_relaxed_graph(space(), &g.f, &g.e).unwrap();
        // One-hot rows sum to exactly 1, so projection is an exact identity.
        assert_eq!(p.f, g.f);
        assert_eq!(p.e, g.e);
    }

    #[test]
    fn mirrored_fibers_are_averaged() {
        let sp = space();
        let mut f = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            f.set2(i, 0, 1.0);
        }
        let mut e = Tensor::zeros(&[3, 3, 2]);
        for i in 0..3 {
            for j in 0..3 {
                e.set3(i, j, 0, 1.0);
            }
        }
        // Asymmetric pair: (1,0) vs (0,1) must average to (0.5, 0.5).
        e.set3(0, 1, 0, 1.0);
        e.set3(0, 1, 1, 0.0);
        e.set3(1, 0, 0, 0.0);
        e.set3(1, 0, 1, 1.0);
        let p = project_relaxed_graph(sp, &f, &e).unwrap();
        assert_eq!(p.e.fiber(0, 1), &[0.5, 0.5]);
        assert_eq!(p.e.fiber(1, 0), &[0.5, 0.5]);
    }

    #[test]
    fn diagonal_reset_and_validation_pass() {
        let sp = space();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let f = Tensor::new(
                vec![3, 3],
                (0..9).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            )
            .unwrap();
            let e = Tensor::new(
                vec![3, 3, 2],
                (0..18).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            )
            .unwrap();
            let p = project_relaxed_graph(sp, &f, &e).unwrap();
            p.validate(1e-12).unwrap();
            for i in 0..3 {
                assert_eq!(p.e.fiber(i, i), &[1.0, 0.0]);
            }
        }
    }
}
