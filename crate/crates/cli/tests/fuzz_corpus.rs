//! Replays the checked-in fuzz seeds through the parsers on stable.

use std::fs;
use std::path::PathBuf;

use offloadlab::cluster::{clustering_predict, ClusteredModel};
use offloadlab::datagen::{ingest_trajectory_reader, ColumnMap};
use offloadlab::features::{Dataset, FeatureTable};
use offloadlab_cli::config::{apply_override, ExperimentConfig};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn config_seeds_load() {
    for (p, b) in seeds("config_toml") {
        ExperimentConfig::from_toml_str(std::str::from_utf8(&b).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e:#}", p.display()));
    }
    for (p, b) in seeds("config_override") {
        let mut t = toml::Table::new();
        for line in std::str::from_utf8(&b).unwrap().lines() {
            apply_override(&mut t, line).unwrap_or_else(|e| panic!("{}: {e:#}", p.display()));
        }
        let cfg: ExperimentConfig = toml::Value::Table(t).try_into().unwrap();
        cfg.validate().unwrap();
    }
}

#[test]
fn table_seeds_parse_and_round_trip() {
    for (p, b) in seeds("dataset_csv") {
        let ds = Dataset::from_csv_reader(b.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let mut out = Vec::new();
        ds.write_csv(&mut out).unwrap();
        assert_eq!(Dataset::from_csv_reader(out.as_slice()).unwrap(), ds);
    }
    for (p, b) in seeds("feature_table_csv") {
        FeatureTable::from_csv_reader(b.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn trajectory_and_model_seeds_parse() {
    for (p, b) in seeds("trajectory_csv") {
        let (trips, report) = ingest_trajectory_reader(b.as_slice(), &ColumnMap::default())
            .unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(trips.len(), report.trips);
    }
    for (p, b) in seeds("model_json") {
        let m = ClusteredModel::from_json(std::str::from_utf8(&b).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        clustering_predict(&m, &vec![0.5; m.feature_subset.len()]).unwrap();
    }
}
