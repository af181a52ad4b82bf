use offloadlab::datagen::{ingest_trajectory_reader, trajectory_speeds, ColumnMap, TrajectoryPoint, EARTH_RADIUS_M};
use proptest::prelude::*;

fn pt(t: f64, lat: f64, lon: f64) -> TrajectoryPoint {
    TrajectoryPoint::new(t, lat, lon).unwrap()
}

proptest! {
    #[test]
    fn speeds_ignore_time_shift_and_direction(
        lat in -60.0..60.0f64,
        lon in -179.0..179.0f64,
        dlat in -0.01..0.01f64,
        dlon in -0.01..0.01f64,
        dt in 0.5..30.0f64,
        shift in -1e6..1e6f64,
    ) {
        let fwd = trajectory_speeds(&[pt(0.0, lat, lon), pt(dt, lat + dlat, lon + dlon)], EARTH_RADIUS_M).unwrap();
        let moved = trajectory_speeds(&[pt(shift, lat, lon), pt(shift + dt, lat + dlat, lon + dlon)], EARTH_RADIUS_M).unwrap();
        let back = trajectory_speeds(&[pt(0.0, lat + dlat, lon + dlon), pt(dt, lat, lon)], EARTH_RADIUS_M).unwrap();
        prop_assert!((fwd[0].speed_mps - moved[0].speed_mps).abs() <= 1e-6 * (1.0 + fwd[0].speed_mps));
        prop_assert!((fwd[0].distance_m - back[0].distance_m).abs() <= 1e-9 * (1.0 + fwd[0].distance_m));
        prop_assert!(fwd[0].speed_mps >= 0.0);
    }

    #[test]
    fn ingest_never_panics_on_arbitrary_text(text in "[a-z0-9,.\\-\n]{0,200}") {
        let _ = ingest_trajectory_reader(text.as_bytes(), &ColumnMap::default());
    }
}

#[test]
fn meridian_step_matches_arc_length() {
    // 0.001 degrees of latitude in 2 s
    let s = trajectory_speeds(&[pt(0.0, 45.0, 7.0), pt(2.0, 45.001, 7.0)], EARTH_RADIUS_M).unwrap();
    let arc = EARTH_RADIUS_M * 0.001f64.to_radians();
    assert!((s[0].distance_m - arc).abs() < 1e-6);
    assert!((s[0].speed_mps - arc / 2.0).abs() < 1e-6);
}

#[test]
fn antimeridian_crossing_takes_the_short_way() {
    let s = trajectory_speeds(&[pt(0.0, 0.0, 179.9995), pt(1.0, 0.0, -179.9995)], EARTH_RADIUS_M).unwrap();
    let arc = EARTH_RADIUS_M * 0.001f64.to_radians();
    assert!((s[0].distance_m - arc).abs() < 1e-6, "{}", s[0].distance_m);
}
