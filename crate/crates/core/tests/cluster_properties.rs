use offloadlab::cluster::{
    assign_cluster, evaluate_models, inertia, kmeans_fit, train_clustered_models, ClusteredModel, KMeansConfig,
};
use offloadlab::features::{Dataset, Feature};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sse(points: &[&Vec<f64>]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let d = points[0].len();
    let n = points.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n).collect();
    points
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(x, m)| (x - m).powi(2)).sum::<f64>())
        .sum()
}

fn brute_force(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let mut best = f64::INFINITY;
    for code in 0..k.pow(n as u32) {
        let mut c = code;
        let mut groups: Vec<Vec<&Vec<f64>>> = vec![Vec::new(); k];
        for p in points {
            groups[c % k].push(p);
            c /= k;
        }
        best = best.min(groups.iter().map(|g| sse(g)).sum());
    }
    best
}

fn points(max_n: usize, dims: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0..10.0f64, dims), 1..=max_n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kmeans_is_never_below_the_partition_optimum(pts in points(7, 2), k in 1usize..=3, seed in any::<u64>()) {
        prop_assume!(pts.len() >= k);
        let m = kmeans_fit(&pts, k, seed, &KMeansConfig::default()).unwrap();
        let opt = brute_force(&pts, k);
        prop_assert!(m.inertia >= opt * (1.0 - 1e-12) - 1e-12, "{} < {}", m.inertia, opt);
        prop_assert!(m.inertia_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15));
        prop_assert!((inertia(&pts, &m.centroids) - m.inertia).abs() <= 1e-12 * m.inertia.max(1.0));
    }

    #[test]
    fn converged_centroids_are_member_means(pts in points(40, 3), k in 1usize..=4, seed in any::<u64>()) {
        prop_assume!(pts.len() >= k);
        let cfg = KMeansConfig { tol: 0.0, max_iter: 1000, restarts: 2 };
        let m = kmeans_fit(&pts, k, seed, &cfg).unwrap();
        let labels: Vec<usize> = pts.iter().map(|p| assign_cluster(&m, p).unwrap()).collect();
        for (j, c) in m.centroids.iter().enumerate() {
            let members: Vec<&Vec<f64>> = pts.iter().zip(&labels).filter(|(_, &l)| l == j).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for d in 0..3 {
                let mean = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
                prop_assert!((c[d] - mean).abs() < 1e-9, "centroid {} dim {}: {} vs {}", j, d, c[d], mean);
            }
        }
    }

    #[test]
    fn predictions_ignore_positive_affine_feature_changes(
        seed in any::<u64>(),
        scale in prop::collection::vec(0.1..1e6f64, 2),
        shift in prop::collection::vec(-1e3..1e3f64, 2),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random(), rng.random()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| (3.0 * r[0]).sin() + r[1] * r[1]).collect();
        let moved: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| v * scale[j] + shift[j]).collect())
            .collect();
        let f = [Feature::TaskSize, Feature::Speed];
        let a = Dataset::new(f.to_vec(), rows.clone(), y.clone()).unwrap();
        let b = Dataset::new(f.to_vec(), moved.clone(), y).unwrap();
        let ma = train_clustered_models(&a, 3, &f, 4, &KMeansConfig::default()).unwrap();
        let mb = train_clustered_models(&b, 3, &f, 4, &KMeansConfig::default()).unwrap();
        for (p, q) in rows.iter().zip(&moved) {
            let (pa, pb) = (
                offloadlab::cluster::clustering_predict(&ma, p).unwrap(),
                offloadlab::cluster::clustering_predict(&mb, q).unwrap(),
            );
            prop_assert!((pa - pb).abs() < 1e-6 * (1.0 + pa.abs()), "{} vs {}", pa, pb);
        }
    }
}

fn planted(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let regimes = [
        ((0.2, 0.2), (1.0, 5.0, -1.0)),
        ((0.5, 0.8), (-2.0, 0.0, 4.0)),
        ((0.8, 0.2), (6.0, -3.0, 2.0)),
    ];
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..150 {
        for ((cx, cy), (b0, b1, b2)) in regimes {
            let (a, b) = (cx + rng.random_range(-0.08..0.08), cy + rng.random_range(-0.08..0.08));
            rows.push(vec![a, b]);
            y.push(b0 + b1 * a + b2 * b);
        }
    }
    Dataset::new(vec![Feature::TaskSize, Feature::OffloadingRatio], rows, y).unwrap()
}

#[test]
fn planted_regimes_are_recovered_at_three_clusters() {
    let ds = planted(3);
    let (train, test) = ds.split(0.2, 1).unwrap();
    let f = [Feature::TaskSize, Feature::OffloadingRatio];
    let report = evaluate_models(&train, &test, 5, &f, 2, &KMeansConfig::default()).unwrap();
    let m1 = report.at_k(1).unwrap().mae;
    let m3 = report.at_k(3).unwrap().mae;
    assert!(m3 < 1e-9, "noise-free regimes should fit exactly, got {m3}");
    assert!(m1 > 0.1);
    assert!(report.best().unwrap().k >= 3);
}

#[test]
fn clustered_training_is_deterministic_and_survives_json() {
    let ds = planted(9);
    let f = [Feature::TaskSize, Feature::OffloadingRatio];
    let a = train_clustered_models(&ds, 4, &f, 12, &KMeansConfig::default()).unwrap();
    let b = train_clustered_models(&ds, 4, &f, 12, &KMeansConfig::default()).unwrap();
    assert_eq!(a, b);
    let json = a.to_json().unwrap();
    assert_eq!(json, b.to_json().unwrap());
    let back = ClusteredModel::from_json(&json).unwrap();
    assert_eq!(back, a);
    for row in ds.rows().iter().take(20) {
        assert_eq!(
            offloadlab::cluster::clustering_predict(&a, row).unwrap().to_bits(),
            offloadlab::cluster::clustering_predict(&back, row).unwrap().to_bits()
        );
    }
}

#[test]
fn tampered_model_files_are_rejected() {
    let ds = planted(1);
    let f = [Feature::TaskSize, Feature::OffloadingRatio];
    let json = train_clustered_models(&ds, 2, &f, 0, &KMeansConfig::default())
        .unwrap()
        .to_json()
        .unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
    v["version"] = 2.into();
    assert!(ClusteredModel::from_json(&v.to_string()).is_err());
    let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
    v["clusters"].as_array_mut().unwrap().pop();
    assert!(ClusteredModel::from_json(&v.to_string()).is_err());
    let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
    v["format"] = "other".into();
    assert!(ClusteredModel::from_json(&v.to_string()).is_err());
    assert!(ClusteredModel::from_json("{").is_err());
}
