mod support;

use chronotopic::embedding::{knn_rows, Metric};
use chronotopic::manifold::{
    core_distances, fit_curve, fuzzy_graph, hdbscan, mutual_reachability_mst, reduce,
    ReduceParams, Selection,
};
use proptest::prelude::*;

fn three_blobs(seed: u64, dim: usize, per: usize, sd: f64) -> (Vec<Vec<f64>>, Vec<i64>) {
    let centers: Vec<Vec<f64>> = (0..3)
        .map(|c| (0..dim).map(|j| if j == c { 1.5 } else { 0.0 }).collect())
        .collect();
    support::blobs(seed, &centers, per, sd)
}

#[test]
fn blobs_are_recovered() {
    let (mut x, mut truth) = three_blobs(1, 2, 67, 0.05);
    x.truncate(200);
    truth.truncate(200);
    let out = hdbscan(&x, 15, Some(5), Selection::Eom).unwrap();
    assert_eq!(out.n_clusters(), 3);
    assert!(support::adjusted_rand(&out.labels, &truth) >= 0.95);
}

#[test]
fn mst_weight_matches_kruskal() {
    for (seed, n) in [(3u64, 50usize), (4, 120), (5, 300)] {
        let (x, _) = three_blobs(seed, 3, n / 3 + 1, 0.3);
        let x = &x[..n];
        for ms in [1usize, 5] {
            let core = core_distances(x, ms);
            let oracle = support::kruskal_weight(n, |i, j| {
                support::euclid(&x[i], &x[j]).max(core[i]).max(core[j])
            });
            let prim: f64 = mutual_reachability_mst(x, ms).iter().map(|e| e.2).sum();
            assert!((prim - oracle).abs() <= 1e-9 * oracle.max(1.0), "{prim} vs {oracle}");
        }
    }
}

#[test]
fn identical_points_agree_with_direct_trace() {
    // all mutual-reachability distances are zero: no split ever leaves two
    // children of size >= 15, so the root is the only cluster
    let x = vec![vec![3.0, 3.0]; 20];
    let out = hdbscan(&x, 15, None, Selection::Eom).unwrap();
    assert_eq!(out.sizes(), vec![20]);
}

#[test]
fn calibration_holds_on_blob_graph() {
    let (x, _) = three_blobs(2, 8, 67, 0.2);
    let g = fuzzy_graph(&knn_rows(&x, 15, Metric::Euclidean).unwrap()).unwrap();
    for i in 0..g.n {
        // recompute the outgoing mass directly from rho and sigma
        let nbrs = knn_rows(&x, 15, Metric::Euclidean).unwrap();
        let mass: f64 = nbrs.distances[i]
            .iter()
            .map(|&d| (-(d - g.rho[i]).max(0.0) / g.sigma[i]).exp())
            .sum();
        assert!((mass - 15f64.log2()).abs() < 1e-3);
        assert!(g.calibration_residual(i) < 1e-3);
        for &(j, w) in &g.adjacency[i] {
            assert!(w > 0.0 && w <= 1.0);
            assert_eq!(w, g.weight(j, i));
        }
    }
}

#[test]
fn curve_fit_reaches_least_squares_optimum() {
    for (min_dist, spread) in [(0.0, 1.0), (0.1, 1.0), (0.5, 1.0), (0.0, 2.0)] {
        let fit = fit_curve(min_dist, spread).unwrap();
        // independent coarse-to-fine grid search over (a, b)
        let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
        let target = |d: f64| if d < min_dist { 1.0 } else { (-(d - min_dist) / spread).exp() };
        let rmse = |a: f64, b: f64| {
            (xs.iter()
                .map(|&d| {
                    let f = if d == 0.0 { 1.0 } else { 1.0 / (1.0 + a * d.powf(2.0 * b)) };
                    (f - target(d)).powi(2)
                })
                .sum::<f64>()
                / 300.0)
                .sqrt()
        };
        let (mut ba, mut bb, mut best) = (1.0, 1.0, f64::INFINITY);
        let (mut wa, mut wb) = (4.0, 2.0);
        for _ in 0..12 {
            let (ca, cb) = (ba, bb);
            for i in -10..=10 {
                for j in -10..=10 {
                    let a = (ca + wa * i as f64 / 10.0).max(1e-6);
                    let b = (cb + wb * j as f64 / 10.0).max(1e-6);
                    let r = rmse(a, b);
                    if r < best {
                        (ba, bb, best) = (a, b, r);
                    }
                }
            }
            wa /= 4.0;
            wb /= 4.0;
        }
        assert!((fit.rmse - rmse(fit.a, fit.b)).abs() < 1e-12);
        assert!(fit.rmse <= best + 1e-6, "{min_dist}/{spread}: {} vs grid {best}", fit.rmse);
        assert!(fit.rmse < 0.025);
    }
}

#[test]
fn layout_separates_blobs() {
    let (x, truth) = three_blobs(6, 16, 67, 0.1);
    let g = fuzzy_graph(&knn_rows(&x, 15, Metric::Euclidean).unwrap()).unwrap();
    let fit = fit_curve(0.0, 1.0).unwrap();
    let r = reduce(&g, &x, &ReduceParams::new(2, fit.a, fit.b, 3)).unwrap();
    let centroid = |c: i64| -> Vec<f64> {
        let members: Vec<&Vec<f64>> = r.points.iter().zip(&truth).filter(|(_, &t)| t == c).map(|(p, _)| p).collect();
        (0..2).map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64).collect()
    };
    let cents: Vec<Vec<f64>> = (0..3).map(centroid).collect();
    let intra: f64 = r
        .points
        .iter()
        .zip(&truth)
        .map(|(p, &t)| support::euclid(p, &cents[t as usize]))
        .sum::<f64>()
        / r.n() as f64;
    let inter = (support::euclid(&cents[0], &cents[1])
        + support::euclid(&cents[0], &cents[2])
        + support::euclid(&cents[1], &cents[2]))
        / 3.0;
    assert!(inter >= 3.0 * intra, "inter {inter} intra {intra}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn labels_survive_rotation(seed in 0u64..500, angle in 0.0f64..std::f64::consts::TAU) {
        let (x, _) = three_blobs(seed, 2, 30, 0.15);
        let (c, s) = (angle.cos(), angle.sin());
        let rotated: Vec<Vec<f64>> = x.iter().map(|p| vec![c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect();
        let a = hdbscan(&x, 10, Some(4), Selection::Eom).unwrap();
        let b = hdbscan(&rotated, 10, Some(4), Selection::Eom).unwrap();
        prop_assert!((support::adjusted_rand(&a.labels, &b.labels) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cluster_sizes_and_strengths(seed in 0u64..500, mcs in 2usize..20) {
        let (x, _) = three_blobs(seed, 3, 25, 0.4);
        let out = hdbscan(&x, mcs, None, Selection::Eom).unwrap();
        prop_assert!(out.sizes().iter().all(|&s| s >= mcs));
        prop_assert_eq!(out.sizes().iter().sum::<usize>() + out.n_outliers(), x.len());
        for (l, st) in out.labels.iter().zip(&out.strengths) {
            prop_assert!((0.0..=1.0).contains(st));
            if *l < 0 {
                prop_assert_eq!(*st, 0.0);
            }
        }
    }
}
