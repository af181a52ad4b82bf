//! Experiment configuration: a TOML file, `--set key=value` overrides and the
//! global flags, merged in that order.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use offloadlab::cluster::KMeansConfig;
use offloadlab::datagen::{ColumnMap, ScenarioSpec, EARTH_RADIUS_M};
use offloadlab::features::{Feature, DEFAULT_MI_BINS};
use offloadlab::greedy::GreedyConfig;
use offloadlab::spectral::SpectralConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed. Scenario `i` of a dataset uses `seed + i`; clustering and
    /// the train/test split use `seed` directly.
    pub seed: u64,
    /// Worker threads for sweeps and evaluation. 0 means one per core.
    pub jobs: usize,
    pub out_dir: PathBuf,
    /// Sampling ranges. Its own `seed` field is replaced by the master seed.
    pub scenario: ScenarioSpec,
    pub spectral: SpectralConfig,
    pub greedy: GreedyConfig,
    pub dataset: DatasetConfig,
    pub clustering: ClusteringConfig,
    pub sweep: SweepConfig,
    pub ingest: IngestConfig,
    pub predict: PredictConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            jobs: 0,
            out_dir: PathBuf::from("out"),
            scenario: ScenarioSpec::default(),
            spectral: SpectralConfig::default(),
            greedy: GreedyConfig::default(),
            dataset: DatasetConfig::default(),
            clustering: ClusteringConfig::default(),
            sweep: SweepConfig::default(),
            ingest: IngestConfig::default(),
            predict: PredictConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Scenarios drawn by `gen-data`.
    pub scenarios: usize,
    /// Dataset read by `train` and `evaluate`. Defaults to `<out_dir>/dataset.csv`.
    pub path: Option<PathBuf>,
    pub test_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            scenarios: 20,
            path: None,
            test_fraction: 0.2,
        }
    }
}

/// A named feature subset: an explicit list, or the `mi_top` highest-MI features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetSpec {
    pub name: String,
    #[serde(default)]
    pub features: Option<Vec<Feature>>,
    #[serde(default)]
    pub mi_top: Option<usize>,
}

impl SubsetSpec {
    pub fn explicit(name: &str, features: &[Feature]) -> SubsetSpec {
        SubsetSpec {
            name: name.into(),
            features: Some(features.to_vec()),
            mi_top: None,
        }
    }

    pub fn top(name: &str, n: usize) -> SubsetSpec {
        SubsetSpec {
            name: name.into(),
            features: None,
            mi_top: Some(n),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok_name = !self.name.is_empty()
            && self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !ok_name {
            bail!("subset name `{}` must be non-empty [A-Za-z0-9_-]", self.name);
        }
        match (&self.features, self.mi_top) {
            (Some(f), None) if !f.is_empty() => Ok(()),
            (None, Some(n)) if n > 0 => Ok(()),
            _ => bail!(
                "subset `{}` needs exactly one of a non-empty `features` list or `mi_top` >= 1",
                self.name
            ),
        }
    }

    /// Concrete features, given an MI ranking (best first) for `mi_top` subsets.
    pub fn resolve(&self, ranking: &[(Feature, f64)]) -> Result<Vec<Feature>> {
        if let Some(f) = &self.features {
            return Ok(f.clone());
        }
        let n = self.mi_top.unwrap_or(0);
        if n > ranking.len() {
            bail!(
                "subset `{}` asks for {n} features, dataset has {}",
                self.name,
                ranking.len()
            );
        }
        Ok(ranking[..n].iter().map(|(f, _)| *f).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub k_max: usize,
    /// Cluster count for `train`.
    pub num_clusters: usize,
    pub bins: usize,
    pub kmeans: KMeansConfig,
    /// Features used by `train`.
    pub train_subset: SubsetSpec,
    /// Subsets scored by `evaluate`, one report each.
    pub subsets: Vec<SubsetSpec>,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            k_max: 10,
            num_clusters: 3,
            bins: DEFAULT_MI_BINS,
            kmeans: KMeansConfig::default(),
            train_subset: SubsetSpec::explicit("primary", &Feature::PRIMARY),
            subsets: vec![
                SubsetSpec::top("mi_top2", 2),
                SubsetSpec::explicit("primary", &Feature::PRIMARY),
                SubsetSpec::explicit("all", &Feature::ALL),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub speeds: Vec<f64>,
    pub carrier_freqs: Vec<f64>,
    pub data_sizes: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            speeds: vec![100.0, 200.0, 300.0, 400.0],
            carrier_freqs: vec![28e9],
            data_sizes: vec![2e5, 4e5, 6e5, 8e5, 1e6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub input: Option<PathBuf>,
    /// `simple` or `ved`. Ignored when `columns` is set.
    pub preset: String,
    pub columns: Option<ColumnMap>,
    pub earth_radius_m: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            input: None,
            preset: "simple".into(),
            columns: None,
            earth_radius_m: EARTH_RADIUS_M,
        }
    }
}

impl IngestConfig {
    pub fn column_map(&self) -> Result<ColumnMap> {
        match &self.columns {
            Some(c) => Ok(c.clone()),
            None => ColumnMap::preset(&self.preset).with_context(|| format!("unknown column preset `{}`", self.preset)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    /// Defaults to `<out_dir>/model.json`.
    pub model: Option<PathBuf>,
    /// Feature CSV to score.
    pub input: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads `path` (or starts from defaults), applies `key=value` overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
                toml::from_str::<toml::Table>(&text).with_context(|| format!("cannot parse config {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(table).try_into().context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.spectral.validate()?;
        self.greedy.validate()?;
        self.clustering.kmeans.validate()?;
        if self.out_dir.as_os_str().is_empty() {
            bail!("out_dir is empty");
        }
        if self.dataset.scenarios == 0 {
            bail!("dataset.scenarios must be at least 1");
        }
        let tf = self.dataset.test_fraction;
        if !(tf > 0.0 && tf < 1.0) {
            bail!("dataset.test_fraction must lie in (0, 1), got {tf}");
        }
        if self.clustering.k_max == 0 || self.clustering.num_clusters == 0 {
            bail!("clustering.k_max and clustering.num_clusters must be at least 1");
        }
        if self.clustering.bins < 2 {
            bail!("clustering.bins must be at least 2");
        }
        self.clustering.train_subset.validate()?;
        let mut names = std::collections::BTreeSet::new();
        for s in &self.clustering.subsets {
            s.validate()?;
            if !names.insert(s.name.as_str()) {
                bail!("duplicate subset name `{}`", s.name);
            }
        }
        if !(self.ingest.earth_radius_m > 0.0 && self.ingest.earth_radius_m.is_finite()) {
            bail!("ingest.earth_radius_m must be positive");
        }
        for (name, grid) in [
            ("sweep.speeds", &self.sweep.speeds),
            ("sweep.carrier_freqs", &self.sweep.carrier_freqs),
            ("sweep.data_sizes", &self.sweep.data_sizes),
        ] {
            if grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                bail!("{name} holds a negative or non-finite value");
            }
        }
        if self.sweep.carrier_freqs.contains(&0.0) {
            bail!("sweep.carrier_freqs must be positive");
        }
        Ok(())
    }

    /// The scenario spec with the master seed applied.
    pub fn scenario_spec(&self) -> ScenarioSpec {
        self.scenario.with_seed(self.seed)
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset
            .path
            .clone()
            .unwrap_or_else(|| self.out_dir.join("dataset.csv"))
    }

    pub fn model_path(&self) -> PathBuf {
        self.predict
            .model
            .clone()
            .unwrap_or_else(|| self.out_dir.join("model.json"))
    }
}

/// Sets a dotted key in a TOML table. The value is read as a TOML literal when
/// it parses as one, otherwise as a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .with_context(|| format!("override `{assignment}` is not key=value"))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key `{key}` is malformed");
    }
    let value = parse_value(raw.trim());

    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => bail!("override `{key}`: `{p}` is not a table"),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use offloadlab::datagen::Range;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(
            ExperimentConfig::from_toml_str("").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn shipped_default_config_matches_code_defaults() {
        let text = include_str!("../../../configs/default.toml");
        assert_eq!(
            ExperimentConfig::from_toml_str(text).unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "seed=9").unwrap();
        apply_override(&mut t, "scenario.speed_mps=[200.0, 200.0]").unwrap();
        apply_override(&mut t, "greedy.step = 0.05").unwrap();
        apply_override(&mut t, "out_dir=results/run1").unwrap();
        apply_override(&mut t, "clustering.kmeans.restarts=3").unwrap();
        let cfg: ExperimentConfig = toml::Value::Table(t).try_into().unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.scenario.speed_mps, Range(200.0, 200.0));
        assert_eq!(cfg.greedy.step, 0.05);
        assert_eq!(cfg.out_dir, PathBuf::from("results/run1"));
        assert_eq!(cfg.clustering.kmeans.restarts, 3);
    }

    #[test]
    fn bad_overrides_are_rejected() {
        let mut t = toml::Table::new();
        assert!(apply_override(&mut t, "seed").is_err());
        assert!(apply_override(&mut t, "a..b=1").is_err());
        apply_override(&mut t, "seed=1").unwrap();
        assert!(apply_override(&mut t, "seed.x=1").is_err());
    }

    #[test]
    fn unknown_keys_fail() {
        assert!(ExperimentConfig::from_toml_str("sed = 3").is_err());
        assert!(ExperimentConfig::from_toml_str("[greedy]\nstpe = 0.1").is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        for text in [
            "[dataset]\ntest_fraction = 1.0",
            "[clustering]\nk_max = 0",
            "[sweep]\nspeeds = [-1.0]",
            "[greedy]\nstep = 0.0",
            "[[clustering.subsets]]\nname = \"x\"",
            "[[clustering.subsets]]\nname = \"x\"\nmi_top = 2\nfeatures = [\"Speed\"]",
            "[[clustering.subsets]]\nname = \"a b\"\nmi_top = 2",
            "[[clustering.subsets]]\nname = \"x\"\nmi_top = 1\n[[clustering.subsets]]\nname = \"x\"\nmi_top = 2",
        ] {
            assert!(ExperimentConfig::from_toml_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn subsets_resolve_against_ranking() {
        let ranking = vec![(Feature::Speed, 0.9), (Feature::TaskSize, 0.5), (Feature::CpuFreq, 0.1)];
        assert_eq!(
            SubsetSpec::top("t", 2).resolve(&ranking).unwrap(),
            vec![Feature::Speed, Feature::TaskSize]
        );
        assert!(SubsetSpec::top("t", 4).resolve(&ranking).is_err());
        let s = SubsetSpec::explicit("e", &[Feature::Bandwidth]);
        assert_eq!(s.resolve(&ranking).unwrap(), vec![Feature::Bandwidth]);
    }

    #[test]
    fn missing_file_is_an_error() {
        assert!(ExperimentConfig::load(Some(Path::new("/nonexistent/x.toml")), &[]).is_err());
    }
}
