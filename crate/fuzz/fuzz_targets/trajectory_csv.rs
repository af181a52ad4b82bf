#![no_main]

use libfuzzer_sys::fuzz_target;
use offloadlab::datagen::{ingest_trajectory_reader, trajectory_speeds, ColumnMap, EARTH_RADIUS_M};

fuzz_target!(|data: &[u8]| {
    if let Ok((trips, report)) = ingest_trajectory_reader(data, &ColumnMap::default()) {
        assert_eq!(trips.len(), report.trips);
        for trip in trips.iter().filter(|t| t.points.len() >= 2) {
            if let Ok(speeds) = trajectory_speeds(&trip.points, EARTH_RADIUS_M) {
                assert!(speeds.iter().all(|s| s.speed_mps >= 0.0));
            }
        }
    }
});
