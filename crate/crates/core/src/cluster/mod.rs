//! Clustered energy predictor: scale features to `[0, 1]`, segment the
//! training rows with k-means, fit one regression per cluster and route each
//! query to the model of its nearest centroid.

mod kmeans;
mod ols;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use kmeans::{assign_cluster, inertia, kmeans_fit, KMeansConfig, KMeansModel};
pub use ols::{fit_linear_model, FitKind, LinearFit, RIDGE_JITTER};

use crate::error::{Error, Result};
use crate::features::{apply_min_max, fit_min_max, Dataset, Feature, FeatureTable, ScalingParams};

pub const MODEL_FORMAT: &str = "offloadlab.clustered-model";
pub const MODEL_VERSION: u32 = 1;

/// Regression family fitted inside each cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteredModel {
    pub format: String,
    pub version: u32,
    pub family: ModelFamily,
    pub feature_subset: Vec<Feature>,
    pub scaling: ScalingParams,
    pub kmeans: KMeansModel,
    /// One fit per cluster, indexed like `kmeans.centroids`. Coefficients act
    /// on scaled features and predict raw joules.
    pub clusters: Vec<LinearFit>,
}

impl ClusteredModel {
    pub fn k(&self) -> usize {
        self.kmeans.k
    }

    /// Structural checks applied to every model read from disk.
    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::invalid(format!("unexpected model format `{}`", self.format)));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                self.version
            )));
        }
        let d = self.feature_subset.len();
        if d == 0 {
            return Err(Error::invalid("model has an empty feature subset"));
        }
        self.scaling.validate()?;
        if self.scaling.dims() != d {
            return Err(Error::Shape("scaling dims differ from feature subset".into()));
        }
        let k = self.kmeans.k;
        if k == 0 || self.kmeans.centroids.len() != k || self.clusters.len() != k {
            return Err(Error::Shape(format!(
                "k = {k} with {} centroids and {} cluster models",
                self.kmeans.centroids.len(),
                self.clusters.len()
            )));
        }
        for c in &self.kmeans.centroids {
            if c.len() != d || c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("malformed centroid"));
            }
        }
        for m in &self.clusters {
            if m.coefficients.len() != d + 1 || m.coefficients.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("malformed cluster coefficients"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<ClusteredModel> {
        let model: ClusteredModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    /// Predicts every row of `table`, picking the model's features by name.
    pub fn predict_table(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        table
            .project(&self.feature_subset)?
            .iter()
            .map(|p| clustering_predict(self, p))
            .collect()
    }
}

/// Fits scaling, clustering and per-cluster regressions on `training`.
pub fn train_clustered_models(
    training: &Dataset,
    num_clusters: usize,
    feature_subset: &[Feature],
    seed: u64,
    kmeans_cfg: &KMeansConfig,
) -> Result<ClusteredModel> {
    if feature_subset.is_empty() {
        return Err(Error::invalid("feature subset is empty"));
    }
    if training.len() < num_clusters {
        return Err(Error::InsufficientData(format!(
            "{} training rows for {num_clusters} clusters",
            training.len()
        )));
    }
    let data = training.select(feature_subset)?;
    let scaling = fit_min_max(data.rows())?;
    let scaled = apply_min_max(data.rows(), &scaling)?;
    let km = kmeans_fit(&scaled, num_clusters, seed, kmeans_cfg)?;

    let d = feature_subset.len();
    let mut members: Vec<(Vec<Vec<f64>>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); num_clusters];
    for (p, &y) in scaled.into_iter().zip(data.targets()) {
        let j = assign_cluster(&km, &p)?;
        members[j].0.push(p);
        members[j].1.push(y);
    }
    let clusters = members
        .iter()
        .map(|(xs, ys)| {
            if xs.len() < d + 2 {
                Ok(LinearFit::mean_only(ys, d))
            } else {
                fit_linear_model(xs, ys)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ClusteredModel {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        family: ModelFamily::Linear,
        feature_subset: feature_subset.to_vec(),
        scaling,
        kmeans: km,
        clusters,
    })
}

/// Energy prediction for one raw (unscaled) point in the model's feature order.
pub fn clustering_predict(model: &ClusteredModel, point: &[f64]) -> Result<f64> {
    let scaled = model.scaling.apply_point(point)?;
    let j = assign_cluster(&model.kmeans, &scaled)?;
    model.clusters[j].predict(&scaled)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub k: usize,
    pub mae: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub feature_subset: Vec<Feature>,
    pub n_train: usize,
    pub n_test: usize,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn best(&self) -> Option<&EvalRow> {
        self.rows
            .iter()
            .min_by(|a, b| a.mae.total_cmp(&b.mae).then(a.k.cmp(&b.k)))
    }

    pub fn at_k(&self, k: usize) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.k == k)
    }

    /// CSV with header `k,mae,mse`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "mae", "mse"])?;
        for r in &self.rows {
            w.write_record([r.k.to_string(), r.mae.to_string(), r.mse.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("eval csv", e))?;
        Ok(())
    }
}

/// MAE and MSE of `model` over `test`.
pub fn prediction_errors(model: &ClusteredModel, test: &Dataset) -> Result<(f64, f64)> {
    if test.is_empty() {
        return Err(Error::InsufficientData("empty test split".into()));
    }
    let data = test.select(&model.feature_subset)?;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (p, &y) in data.rows().iter().zip(data.targets()) {
        let e = clustering_predict(model, p)? - y;
        abs += e.abs();
        sq += e * e;
    }
    let n = test.len() as f64;
    Ok((abs / n, sq / n))
}

/// Trains and scores one model per cluster count `1..=k_max`.
pub fn evaluate_models(
    training: &Dataset,
    test: &Dataset,
    k_max: usize,
    feature_subset: &[Feature],
    seed: u64,
    kmeans_cfg: &KMeansConfig,
) -> Result<EvalReport> {
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let rows = (1..=k_max)
        .map(|k| {
            let model = train_clustered_models(training, k, feature_subset, seed, kmeans_cfg)?;
            let (mae, mse) = prediction_errors(&model, test)?;
            Ok(EvalRow { k, mae, mse })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        feature_subset: feature_subset.to_vec(),
        n_train: training.len(),
        n_test: test.len(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planted(n_per: usize, seed: u64) -> Dataset {
        // Two blobs in (TaskSize, Speed) with different linear laws.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n_per {
            let (a, b) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            rows.push(vec![a, b]);
            y.push(1.0 + 2.0 * a - b);
            let (a, b) = (rng.random_range(10.0..11.0), rng.random_range(10.0..11.0));
            rows.push(vec![a, b]);
            y.push(-4.0 + 0.5 * a + 3.0 * b);
        }
        Dataset::new(vec![Feature::TaskSize, Feature::Speed], rows, y).unwrap()
    }

    #[test]
    fn planted_laws_are_recovered() {
        let ds = planted(100, 1);
        let subset = [Feature::TaskSize, Feature::Speed];
        let m = train_clustered_models(&ds, 2, &subset, 3, &KMeansConfig::default()).unwrap();
        for (p, y) in ds.rows().iter().zip(ds.targets()) {
            assert!((clustering_predict(&m, p).unwrap() - y).abs() < 1e-6);
        }
        // out-of-range point still gets a prediction from the law of its side
        let far = clustering_predict(&m, &[12.0, 12.0]).unwrap();
        assert!((far - (-4.0 + 6.0 + 36.0)).abs() < 1e-6);
    }

    #[test]
    fn one_cluster_is_global_ols() {
        let ds = planted(30, 2);
        let subset = [Feature::TaskSize, Feature::Speed];
        let m = train_clustered_models(&ds, 1, &subset, 0, &KMeansConfig::default()).unwrap();
        let scaled = apply_min_max(ds.rows(), &m.scaling).unwrap();
        let global = fit_linear_model(&scaled, ds.targets()).unwrap();
        for (p, s) in ds.rows().iter().zip(&scaled) {
            assert_eq!(clustering_predict(&m, p).unwrap(), global.predict(s).unwrap());
        }
    }

    #[test]
    fn small_clusters_use_the_mean() {
        let rows = vec![vec![0.0], vec![0.1], vec![0.2], vec![0.3], vec![5.0]];
        let ds = Dataset::new(vec![Feature::Speed], rows, vec![1.0, 2.0, 3.0, 4.0, 9.0]).unwrap();
        let m = train_clustered_models(&ds, 2, &[Feature::Speed], 1, &KMeansConfig::default()).unwrap();
        let lone = assign_cluster(&m.kmeans, &m.scaling.apply_point(&[5.0]).unwrap()).unwrap();
        assert_eq!(m.clusters[lone].kind, FitKind::MeanOnly);
        assert_eq!(m.clusters[lone].intercept(), 9.0);
    }

    #[test]
    fn model_file_round_trip_and_validation() {
        let ds = planted(20, 3);
        let subset = [Feature::TaskSize, Feature::Speed];
        let m = train_clustered_models(&ds, 2, &subset, 1, &KMeansConfig::default()).unwrap();
        let text = m.to_json().unwrap();
        assert_eq!(ClusteredModel::from_json(&text).unwrap(), m);

        let mut wrong = m.clone();
        wrong.version = 99;
        assert!(ClusteredModel::from_json(&wrong.to_json().unwrap()).is_err());
        let mut wrong = m.clone();
        wrong.clusters.pop();
        assert!(ClusteredModel::from_json(&wrong.to_json().unwrap()).is_err());
        assert!(ClusteredModel::from_json("{}").is_err());
    }

    #[test]
    fn predict_table_requires_model_features() {
        let ds = planted(20, 4);
        let m = train_clustered_models(
            &ds,
            2,
            &[Feature::TaskSize, Feature::Speed],
            1,
            &KMeansConfig::default(),
        )
        .unwrap();
        let ok = FeatureTable {
            features: vec![Feature::Speed, Feature::TaskSize],
            rows: vec![vec![0.5, 0.5]],
        };
        let p = m.predict_table(&ok).unwrap();
        assert!((p[0] - 1.5).abs() < 1e-6);
        let missing = FeatureTable {
            features: vec![Feature::Speed],
            rows: vec![vec![0.5]],
        };
        assert!(matches!(m.predict_table(&missing), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn perfect_fit_has_zero_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rows: Vec<Vec<f64>> = (0..80).map(|_| vec![rng.random(), rng.random()]).collect();
        let y = rows.iter().map(|r| 3.0 + r[0] - 2.0 * r[1]).collect();
        let ds = Dataset::new(vec![Feature::TaskSize, Feature::OffloadingRatio], rows, y).unwrap();
        let (train, test) = ds.split(0.25, 1).unwrap();
        let rep = evaluate_models(&train, &test, 3, ds.features(), 2, &KMeansConfig::default()).unwrap();
        assert_eq!(rep.rows.len(), 3);
        for r in &rep.rows {
            assert!(r.mae < 1e-9 && r.mse < 1e-18, "{r:?}");
        }
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("k,mae,mse\n1,"));
    }
}
