//! Subcommands. Each one computes every output in memory first and returns the
//! files to write, so a failure part-way leaves nothing on disk.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{debug, info, warn};
use offloadlab::cluster::{evaluate_models, train_clustered_models, ClusteredModel, EvalReport};
use offloadlab::datagen::{
    build_dataset, generate_scenario, ingest_trajectory_reader, trajectory_speeds, IngestReport, ScenarioSpec,
};
use offloadlab::features::{rank_features, Dataset, Feature, FeatureTable};
use offloadlab::greedy::{optimize, OffloadSolution};
use offloadlab::model::{system_total_energy, OffloadRatio, Scenario};
use offloadlab::spectral::CachedSpectralModel;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;

/// One file produced by a subcommand, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Output {
    fn new(name: impl Into<String>, bytes: Vec<u8>) -> Output {
        Output {
            name: name.into(),
            bytes,
        }
    }
}

/// Writes `outputs` under `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, outputs: &[Output]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let mut written = Vec::with_capacity(outputs.len());
    for o in outputs {
        let path = dir.join(&o.name);
        std::fs::write(&path, &o.bytes).with_context(|| format!("cannot write {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("cannot start worker pool")
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_csv_reader(open(path)?).with_context(|| format!("cannot load dataset {}", path.display()))
}

#[derive(Serialize)]
struct SolutionFile<'a> {
    seed: u64,
    n_devices: usize,
    n_tasks: usize,
    #[serde(flatten)]
    solution: &'a OffloadSolution,
}

fn solve(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<OffloadSolution> {
    let se = CachedSpectralModel::new(cfg.spectral.clone());
    Ok(optimize(scenario, &cfg.greedy, &se)?)
}

fn base_scenario(cfg: &ExperimentConfig) -> Result<Scenario> {
    Ok(generate_scenario(&cfg.scenario_spec(), &cfg.spectral)?)
}

/// Greedy offloading for the configured scenario: `solution.json` and `trace.csv`.
pub fn cmd_optimize(cfg: &ExperimentConfig) -> Result<Vec<Output>> {
    let scenario = base_scenario(cfg)?;
    let solution = solve(cfg, &scenario)?;
    info!(
        "optimize: {:.6e} J -> {:.6e} J in {} evaluations ({:?})",
        solution.initial_energy, solution.total_energy, solution.evaluations, solution.termination
    );
    let mut trace = Vec::new();
    solution.write_trace_csv(&mut trace)?;
    let file = SolutionFile {
        seed: cfg.seed,
        n_devices: scenario.devices().len(),
        n_tasks: scenario.tasks().len(),
        solution: &solution,
    };
    Ok(vec![
        Output::new("solution.json", json_bytes(&file)?),
        Output::new("trace.csv", trace),
    ])
}

/// Total greedy energy over the speed x carrier-frequency grid, with every
/// device's channel pinned to the grid point.
pub fn cmd_sweep_modulation(cfg: &ExperimentConfig) -> Result<Vec<Output>> {
    let (speeds, freqs) = (&cfg.sweep.speeds, &cfg.sweep.carrier_freqs);
    if speeds.is_empty() || freqs.is_empty() {
        bail!("sweep-modulation needs non-empty sweep.speeds and sweep.carrier_freqs");
    }
    let scenario = base_scenario(cfg)?;
    let grid: Vec<(f64, f64)> = speeds
        .iter()
        .flat_map(|&v| freqs.iter().map(move |&f| (v, f)))
        .collect();
    let energies = pool(cfg.jobs)?.install(|| {
        grid.par_iter()
            .map(|&(v, f)| {
                let s = scenario.map_channels(|c| {
                    c.speed_mps = v;
                    c.carrier_freq_hz = f;
                })?;
                let e = solve(cfg, &s)?.total_energy;
                debug!("sweep-modulation v={v} fc={f}: {e}");
                Ok(e)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let rows = grid
        .iter()
        .zip(&energies)
        .map(|(&(v, f), e)| vec![v.to_string(), f.to_string(), e.to_string()]);
    let csv = csv_bytes(&["speed_mps", "carrier_freq_hz", "total_energy_j"], rows)?;
    Ok(vec![Output::new("sweep_modulation.csv", csv)])
}

/// Greedy energy against the all-local policy as every task's size varies.
pub fn cmd_sweep_datasize(cfg: &ExperimentConfig) -> Result<Vec<Output>> {
    if cfg.sweep.data_sizes.is_empty() {
        bail!("sweep-datasize needs a non-empty sweep.data_sizes");
    }
    let scenario = base_scenario(cfg)?;
    let rows = pool(cfg.jobs)?.install(|| {
        cfg.sweep
            .data_sizes
            .par_iter()
            .map(|&d| {
                let s = scenario.map_tasks(|t| t.data_bits = d)?;
                let greedy = solve(cfg, &s)?.total_energy;
                let se = CachedSpectralModel::new(cfg.spectral.clone());
                let local = system_total_energy(&s.with_ratios(&vec![OffloadRatio::LOCAL; s.tasks().len()])?, &se)?;
                Ok([d, greedy, local, local - greedy])
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let csv = csv_bytes(
        &[
            "data_size_bits",
            "energy_offload_policy_j",
            "energy_local_policy_j",
            "gap_j",
        ],
        rows.iter().map(|r| r.iter().map(f64::to_string).collect()),
    )?;
    Ok(vec![Output::new("sweep_datasize.csv", csv)])
}

/// Specs for `n` scenarios seeded `seed, seed + 1, ...`.
pub fn dataset_specs(base: &ScenarioSpec, seed: u64, n: usize) -> Vec<ScenarioSpec> {
    (0..n as u64).map(|i| base.with_seed(seed.wrapping_add(i))).collect()
}

/// Dataset of greedy-optimised tasks: `dataset.csv`.
pub fn cmd_gen_data(cfg: &ExperimentConfig) -> Result<Vec<Output>> {
    let specs = dataset_specs(&cfg.scenario, cfg.seed, cfg.dataset.scenarios);
    let ds = build_dataset(&specs, &cfg.greedy, &cfg.spectral)?;
    info!("gen-data: {} rows from {} scenarios", ds.len(), specs.len());
    let mut bytes = Vec::new();
    ds.write_csv(&mut bytes)?;
    Ok(vec![Output::new("dataset.csv", bytes)])
}

/// Trains one clustered model on the whole dataset: `model.json`.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<Output>> {
    let ds = read_dataset(&cfg.dataset_path())?;
    let spec = &cfg.clustering.train_subset;
    let ranking = if spec.mi_top.is_some() {
        rank_features(&ds, cfg.clustering.bins)?
    } else {
        Vec::new()
    };
    let subset = spec.resolve(&ranking)?;
    let model = train_clustered_models(
        &ds,
        cfg.clustering.num_clusters,
        &subset,
        cfg.seed,
        &cfg.clustering.kmeans,
    )?;
    info!(
        "train: k={} on {:?}, inertia {:.6e}",
        model.k(),
        subset,
        model.kmeans.inertia
    );
    let mut bytes = model.to_json()?.into_bytes();
    bytes.push(b'\n');
    Ok(vec![Output::new("model.json", bytes)])
}

/// Scores a feature CSV with a trained model: `predictions.csv`.
pub fn cmd_predict(cfg: &ExperimentConfig) -> Result<Vec<Output>> {
    let model_path = cfg.model_path();
    let text =
        std::fs::read_to_string(&model_path).with_context(|| format!("cannot read model {}", model_path.display()))?;
    let model = ClusteredModel::from_json(&text).with_context(|| format!("invalid model {}", model_path.display()))?;
    let input = cfg.predict.input.clone().unwrap_or_else(|| cfg.dataset_path());
    let table =
        FeatureTable::from_csv_reader(open(&input)?).with_context(|| format!("cannot load {}", input.display()))?;
    let preds = model
        .predict_table(&table)
        .with_context(|| format!("{} does not fit the model's features", input.display()))?;
    let rows = table.project(&model.feature_subset)?;
    let mut header: Vec<&str> = model.feature_subset.iter().map(|f| f.name()).collect();
    header.push("predicted_energy_j");
    let csv = csv_bytes(
        &header,
        rows.iter().zip(&preds).map(|(r, p)| {
            let mut rec: Vec<String> = r.iter().map(f64::to_string).collect();
            rec.push(p.to_string());
            rec
        }),
    )?;
    Ok(vec![Output::new("predictions.csv", csv)])
}

/// MI ranking plus a k-sweep report for every configured subset.
pub fn cmd_evaluate(cfg: &ExperimentConfig) -> Result<Vec<Output>> {
    let ds = read_dataset(&cfg.dataset_path())?;
    let (train, test) = ds.split(cfg.dataset.test_fraction, cfg.seed)?;
    if train.is_empty() || test.is_empty() {
        bail!("dataset of {} rows is too small to split", ds.len());
    }
    let ranking = rank_features(&train, cfg.clustering.bins)?;
    let subsets = cfg
        .clustering
        .subsets
        .iter()
        .map(|s| Ok((s.name.clone(), s.resolve(&ranking)?)))
        .collect::<Result<Vec<(String, Vec<Feature>)>>>()?;
    let reports = pool(cfg.jobs)?.install(|| {
        subsets
            .par_iter()
            .map(|(_, features)| {
                Ok(evaluate_models(
                    &train,
                    &test,
                    cfg.clustering.k_max,
                    features,
                    cfg.seed,
                    &cfg.clustering.kmeans,
                )?)
            })
            .collect::<Result<Vec<EvalReport>>>()
    })?;

    let mi = csv_bytes(
        &["feature", "mutual_information_bits"],
        ranking.iter().map(|(f, v)| vec![f.name().to_string(), v.to_string()]),
    )?;
    let mut outputs = vec![Output::new("mi_ranking.csv", mi)];
    for ((name, features), report) in subsets.iter().zip(&reports) {
        if let Some(best) = report.best() {
            info!("evaluate {name} {features:?}: best k={} mae={:.6e}", best.k, best.mae);
        }
        let mut bytes = Vec::new();
        report.write_csv(&mut bytes)?;
        outputs.push(Output::new(format!("eval_{name}.csv"), bytes));
    }
    Ok(outputs)
}

/// Per-segment speeds from a GPS trajectory CSV: `speeds.csv` and `ingest_report.log`.
pub fn cmd_ingest(cfg: &ExperimentConfig) -> Result<Vec<Output>> {
    let input = cfg.ingest.input.as_ref().context("ingest.input is not set")?;
    let columns = cfg.ingest.column_map()?;
    let (trips, report) = ingest_trajectory_reader(open(input)?, &columns)
        .with_context(|| format!("cannot ingest {}", input.display()))?;
    let mut rows = Vec::new();
    let mut short = Vec::new();
    for trip in &trips {
        if trip.points.len() < 2 {
            short.push(trip.id.clone());
            continue;
        }
        for s in trajectory_speeds(&trip.points, cfg.ingest.earth_radius_m)? {
            rows.push(vec![
                trip.id.clone(),
                s.t_start_s.to_string(),
                s.t_end_s.to_string(),
                s.distance_m.to_string(),
                s.speed_mps.to_string(),
            ]);
        }
    }
    if report.rows_skipped > 0 {
        warn!("ingest: skipped {} of {} rows", report.rows_skipped, report.rows_read);
    }
    let csv = csv_bytes(&["trip", "t_start_s", "t_end_s", "distance_m", "speed_mps"], rows)?;
    Ok(vec![
        Output::new("speeds.csv", csv),
        Output::new("ingest_report.log", report_log(&report, &short)?),
    ])
}

fn report_log(report: &IngestReport, short_trips: &[String]) -> Result<Vec<u8>> {
    let mut log = Vec::new();
    report.write_log(&mut log)?;
    for id in short_trips {
        log.extend_from_slice(format!("short trip={id} reason=fewer than two points\n").as_bytes());
    }
    Ok(log)
}
