#![no_main]

use libfuzzer_sys::fuzz_target;
use offloadlab::cluster::{clustering_predict, ClusteredModel};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = ClusteredModel::from_json(text) {
        let point = vec![0.5; model.feature_subset.len()];
        let _ = clustering_predict(&model, &point);
        let back = ClusteredModel::from_json(&model.to_json().expect("serialise")).expect("reparse");
        assert_eq!(back.feature_subset, model.feature_subset);
    }
});
