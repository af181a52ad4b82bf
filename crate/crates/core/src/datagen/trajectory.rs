//! GPS trajectory ingestion and per-segment speed estimation.
//!
//! Consecutive fixes are close together compared with the Earth's radius, so
//! the central angle uses the small-angle form of the spherical law of
//! cosines, `φ² ≈ Δlat² + (cos lat̄ · Δlon)²`, and the distance is `R·φ`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6.371e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub timestamp_s: f64,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
}

impl TrajectoryPoint {
    pub fn new(timestamp_s: f64, latitude_deg: f64, longitude_deg: f64) -> Result<Self> {
        if !timestamp_s.is_finite() {
            return Err(Error::invalid(format!("non-finite timestamp {timestamp_s}")));
        }
        if !(latitude_deg.abs() <= 90.0) {
            return Err(Error::invalid(format!("latitude {latitude_deg} outside [-90, 90]")));
        }
        if !(longitude_deg.abs() <= 180.0) {
            return Err(Error::invalid(format!("longitude {longitude_deg} outside [-180, 180]")));
        }
        Ok(TrajectoryPoint {
            timestamp_s,
            latitude_deg,
            longitude_deg,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub id: String,
    pub points: Vec<TrajectoryPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSample {
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub distance_m: f64,
    pub speed_mps: f64,
}

fn central_angle(a: &TrajectoryPoint, b: &TrajectoryPoint) -> f64 {
    let lat1 = a.latitude_deg.to_radians();
    let lat2 = b.latitude_deg.to_radians();
    let dlat = lat2 - lat1;
    let mut dlon = (b.longitude_deg - a.longitude_deg).to_radians();
    // take the short way across the antimeridian
    if dlon > std::f64::consts::PI {
        dlon -= 2.0 * std::f64::consts::PI;
    } else if dlon < -std::f64::consts::PI {
        dlon += 2.0 * std::f64::consts::PI;
    }
    let x = dlon * (0.5 * (lat1 + lat2)).cos();
    (dlat * dlat + x * x).sqrt()
}

/// One speed sample per consecutive pair. Pairs sharing a timestamp are
/// skipped; a timestamp going backwards is an error.
pub fn trajectory_speeds(points: &[TrajectoryPoint], earth_radius_m: f64) -> Result<Vec<SpeedSample>> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    if !(earth_radius_m.is_finite() && earth_radius_m > 0.0) {
        return Err(Error::domain("earth radius must be > 0"));
    }
    let mut out = Vec::with_capacity(points.len() - 1);
    for pair in points.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.timestamp_s - a.timestamp_s;
        if dt < 0.0 {
            return Err(Error::invalid(format!(
                "timestamps out of order: {} after {}",
                b.timestamp_s, a.timestamp_s
            )));
        }
        if dt == 0.0 {
            continue;
        }
        let distance_m = earth_radius_m * central_angle(a, b);
        out.push(SpeedSample {
            t_start_s: a.timestamp_s,
            t_end_s: b.timestamp_s,
            distance_m,
            speed_mps: distance_m / dt,
        });
    }
    Ok(out)
}

/// Names of the CSV columns holding each trajectory field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    pub trip: String,
    pub timestamp: String,
    pub latitude: String,
    pub longitude: String,
    /// Seconds per timestamp unit (1e-3 for milliseconds).
    #[serde(default = "one")]
    pub timestamp_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl ColumnMap {
    /// Column layout of the Vehicle Energy Dataset dynamic-data files.
    pub fn ved() -> ColumnMap {
        ColumnMap {
            trip: "Trip".into(),
            timestamp: "Timestamp(ms)".into(),
            latitude: "Latitude[deg]".into(),
            longitude: "Longitude[deg]".into(),
            timestamp_scale: 1e-3,
        }
    }

    pub fn preset(name: &str) -> Option<ColumnMap> {
        match name {
            "ved" => Some(ColumnMap::ved()),
            "simple" => Some(ColumnMap::default()),
            _ => None,
        }
    }
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            trip: "trip".into(),
            timestamp: "timestamp".into(),
            latitude: "lat".into(),
            longitude: "lon".into(),
            timestamp_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRow {
    /// 1-based data row number (header excluded).
    pub row: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: u64,
    pub rows_skipped: u64,
    pub trips: usize,
    pub skipped: Vec<SkippedRow>,
}

impl IngestReport {
    /// Line-oriented log: a summary line, then one line per skipped row.
    pub fn write_log<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "rows_read={} rows_skipped={} trips={}",
            self.rows_read, self.rows_skipped, self.trips
        )?;
        for s in &self.skipped {
            writeln!(out, "skipped row={} reason={}", s.row, s.reason)?;
        }
        Ok(())
    }
}

fn parse_row(record: &csv::StringRecord, idx: &[usize; 4], scale: f64) -> Result<(String, TrajectoryPoint)> {
    let field = |i: usize| {
        record
            .get(i)
            .ok_or_else(|| Error::invalid(format!("missing field {}", i + 1)))
    };
    let num = |i: usize| -> Result<f64> {
        let s = field(i)?;
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::invalid(format!("`{s}` is not a number")))
    };
    let trip = field(idx[0])?.trim().to_string();
    if trip.is_empty() {
        return Err(Error::invalid("empty trip id"));
    }
    let point = TrajectoryPoint::new(num(idx[1])? * scale, num(idx[2])?, num(idx[3])?)?;
    Ok((trip, point))
}

/// Reads a headered trajectory CSV and groups rows into trips (in order of
/// first appearance), each sorted by timestamp. Malformed rows are skipped and
/// counted in the report.
pub fn ingest_trajectory_reader<R: Read>(reader: R, columns: &ColumnMap) -> Result<(Vec<Trip>, IngestReport)> {
    if !(columns.timestamp_scale.is_finite() && columns.timestamp_scale > 0.0) {
        return Err(Error::invalid("timestamp_scale must be > 0"));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::Headers)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut report = IngestReport::default();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok((Vec::new(), report));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let idx = [
        find(&columns.trip)?,
        find(&columns.timestamp)?,
        find(&columns.latitude)?,
        find(&columns.longitude)?,
    ];

    let mut trips: Vec<Trip> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        let row = report.rows_read + 1;
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                report.rows_read += 1;
                match parse_row(&record, &idx, columns.timestamp_scale) {
                    Ok((id, p)) => {
                        let slot = *by_id.entry(id.clone()).or_insert_with(|| {
                            trips.push(Trip { id, points: Vec::new() });
                            trips.len() - 1
                        });
                        trips[slot].points.push(p);
                    }
                    Err(e) => {
                        report.rows_skipped += 1;
                        report.skipped.push(SkippedRow {
                            row,
                            reason: e.to_string(),
                        });
                    }
                }
            }
            Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Err(e.into()),
            Err(e) => {
                report.rows_read += 1;
                report.rows_skipped += 1;
                report.skipped.push(SkippedRow {
                    row,
                    reason: e.to_string(),
                });
            }
        }
    }
    for t in &mut trips {
        t.points.sort_by(|a, b| a.timestamp_s.total_cmp(&b.timestamp_s));
    }
    report.trips = trips.len();
    Ok((trips, report))
}

pub fn ingest_trajectory_csv(path: impl AsRef<Path>, columns: &ColumnMap) -> Result<(Vec<Trip>, IngestReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_trajectory_reader(std::io::BufReader::new(file), columns)
}
