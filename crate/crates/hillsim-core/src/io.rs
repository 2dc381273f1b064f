//! File formats for trajectories, waypoint lists, tracking logs, metrics,
//! and episode summaries.
//!
//! Two trajectory encodings exist side by side: a columnar record document
//! (JSON, versioned via `schema_version`) used as the pipeline interchange
//! format, and a flat row form (`t,x,y,z,vx,vy,vz,frame`) for CSV export and
//! row-oriented JSON. Floats are written in shortest round-trip form, so
//! save followed by load is bit-exact; the only deliberately lossy column is
//! the display-time column of the waypoint CSV, which is recomputed from the
//! stored frequency on load.
//!
//! All writers go through [`atomic_write`]: content lands in a temporary
//! file in the destination directory and is renamed into place, so an
//! interrupted run never leaves a partial output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cw::{Frame, HillState, SampledTrajectory};
use crate::docking::EpisodeSummary;
use crate::scaling::WaypointList;
use crate::sim::{SimLog, TrackingMetrics};

/// Version tag written into every JSON document this module produces.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: schema error: {detail}")]
    Schema { path: PathBuf, detail: String },
    #[error("{path}: unsupported extension `{ext}` (expected {expected})")]
    UnknownExtension {
        path: PathBuf,
        ext: String,
        expected: &'static str,
    },
}

impl IoError {
    fn schema(path: &Path, detail: impl std::fmt::Display) -> Self {
        IoError::Schema {
            path: path.to_path_buf(),
            detail: detail.to_string(),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FileFormat {
    Csv,
    Json,
}

fn detect_format(path: &Path) -> Result<FileFormat, IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => Ok(FileFormat::Csv),
        Some(e) if e.eq_ignore_ascii_case("json") => Ok(FileFormat::Json),
        other => Err(IoError::UnknownExtension {
            path: path.to_path_buf(),
            ext: other.unwrap_or("").to_string(),
            expected: ".csv or .json",
        }),
    }
}

/// Write `contents` to `path` through a temp file in the same directory
/// plus a rename, replacing any existing file only on success.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::io(path, e))?;
    tmp.write_all(contents).map_err(|e| IoError::io(path, e))?;
    tmp.persist(path).map_err(|e| IoError::io(path, e.error))?;
    Ok(())
}

/// Atomic plain-text write (validation reports, manifests rendered upstream).
pub fn save_text(path: &Path, text: &str) -> Result<(), IoError> {
    atomic_write(path, text.as_bytes())
}

fn read_to_string(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializing plain data structs");
    text.push('\n');
    text
}

/// Columnar trajectory document: parallel `times` and 6-wide `states` rows
/// `[x, y, z, vx, vy, vz]` in m and m/s, tagged with the frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub schema_version: u32,
    pub frame: Frame,
    pub times: Vec<f64>,
    pub states: Vec<[f64; 6]>,
}

impl TrajectoryRecord {
    pub fn from_trajectory(traj: &SampledTrajectory) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            frame: traj.frame,
            times: traj.times.clone(),
            states: traj
                .states
                .iter()
                .map(|s| [s.x, s.y, s.z, s.vx, s.vy, s.vz])
                .collect(),
        }
    }

    pub fn into_trajectory(self) -> Result<SampledTrajectory, String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {} (this build reads {})",
                self.schema_version, SCHEMA_VERSION
            ));
        }
        let states = self
            .states
            .iter()
            .map(|r| HillState::new(r[0], r[1], r[2], r[3], r[4], r[5]))
            .collect();
        SampledTrajectory::new(self.times, states, self.frame).map_err(|e| e.to_string())
    }
}

/// Save a trajectory as a versioned JSON record document.
pub fn save_trajectory_record(traj: &SampledTrajectory, path: &Path) -> Result<(), IoError> {
    atomic_write(
        path,
        to_pretty_json(&TrajectoryRecord::from_trajectory(traj)).as_bytes(),
    )
}

/// Load a versioned JSON record document.
pub fn load_trajectory_record(path: &Path) -> Result<SampledTrajectory, IoError> {
    let text = read_to_string(path)?;
    let record: TrajectoryRecord =
        serde_json::from_str(&text).map_err(|e| IoError::schema(path, e))?;
    record
        .into_trajectory()
        .map_err(|detail| IoError::schema(path, detail))
}

/// One trajectory sample in flat row form, the shape used by the CSV export
/// and the row-oriented JSON export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub frame: Frame,
}

/// Flatten a trajectory into rows (one per sample, frame tag repeated).
pub fn trajectory_rows(traj: &SampledTrajectory) -> Vec<TrajectoryRow> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| TrajectoryRow {
            t,
            x: s.x,
            y: s.y,
            z: s.z,
            vx: s.vx,
            vy: s.vy,
            vz: s.vz,
            frame: traj.frame,
        })
        .collect()
}

fn rows_to_trajectory(rows: &[TrajectoryRow], path: &Path) -> Result<SampledTrajectory, IoError> {
    if rows.is_empty() {
        return Err(IoError::schema(path, "no data rows"));
    }
    let frame = rows[0].frame;
    if let Some(i) = rows.iter().position(|r| r.frame != frame) {
        return Err(IoError::schema(
            path,
            format!("mixed frame tags: row {i} is `{}`, row 0 is `{frame}`", rows[i].frame),
        ));
    }
    let times = rows.iter().map(|r| r.t).collect();
    let states = rows
        .iter()
        .map(|r| HillState::new(r.x, r.y, r.z, r.vx, r.vy, r.vz))
        .collect();
    SampledTrajectory::new(times, states, frame).map_err(|e| IoError::schema(path, e))
}

fn trajectory_to_csv(traj: &SampledTrajectory) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in trajectory_rows(traj) {
        w.serialize(row).expect("csv row of plain floats");
    }
    w.into_inner().expect("vec writer never fails")
}

fn trajectory_from_csv(text: &str, path: &Path) -> Result<SampledTrajectory, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let rows: Vec<TrajectoryRow> = reader
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| IoError::schema(path, e))?;
    rows_to_trajectory(&rows, path)
}

/// Save a trajectory, format chosen by extension: `.json` writes the
/// versioned record document, `.csv` the `t,x,y,z,vx,vy,vz,frame` rows.
pub fn save_trajectory(traj: &SampledTrajectory, path: &Path) -> Result<(), IoError> {
    match detect_format(path)? {
        FileFormat::Json => save_trajectory_record(traj, path),
        FileFormat::Csv => atomic_write(path, &trajectory_to_csv(traj)),
    }
}

/// Load a trajectory saved by [`save_trajectory`] (either format).
pub fn load_trajectory(path: &Path) -> Result<SampledTrajectory, IoError> {
    match detect_format(path)? {
        FileFormat::Json => load_trajectory_record(path),
        FileFormat::Csv => trajectory_from_csv(&read_to_string(path)?, path),
    }
}

/// Save the row-oriented JSON export (same field names as the CSV columns).
pub fn save_trajectory_rows_json(traj: &SampledTrajectory, path: &Path) -> Result<(), IoError> {
    atomic_write(path, to_pretty_json(&trajectory_rows(traj)).as_bytes())
}

/// Load the row-oriented JSON export.
pub fn load_trajectory_rows_json(path: &Path) -> Result<SampledTrajectory, IoError> {
    let text = read_to_string(path)?;
    let rows: Vec<TrajectoryRow> =
        serde_json::from_str(&text).map_err(|e| IoError::schema(path, e))?;
    rows_to_trajectory(&rows, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WaypointDoc {
    schema_version: u32,
    frequency_hz: f64,
    positions: Vec<[f64; 3]>,
}

const WAYPOINT_FREQ_PREFIX: &str = "# frequency_hz=";

fn waypoints_to_csv(wps: &WaypointList) -> Vec<u8> {
    let mut out = Vec::new();
    // Frequency rides in a comment so the numeric round trip does not
    // depend on the 6-decimal display times.
    writeln!(out, "{WAYPOINT_FREQ_PREFIX}{}", wps.frequency).expect("vec write");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "t", "x", "y", "z"]).expect("header");
    for (k, p) in wps.positions.iter().enumerate() {
        w.write_record([
            k.to_string(),
            format!("{:.6}", wps.time_of(k)),
            format!("{}", p[0]),
            format!("{}", p[1]),
            format!("{}", p[2]),
        ])
        .expect("csv row of plain floats");
    }
    w.into_inner().expect("vec writer never fails")
}

fn waypoints_from_csv(text: &str, path: &Path) -> Result<WaypointList, IoError> {
    let mut lines = text.lines();
    let freq_line = lines
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| IoError::schema(path, "empty file"))?;
    let frequency: f64 = freq_line
        .strip_prefix(WAYPOINT_FREQ_PREFIX)
        .ok_or_else(|| {
            IoError::schema(
                path,
                format!("first line must be `{WAYPOINT_FREQ_PREFIX}<hz>`, got `{freq_line}`"),
            )
        })?
        .trim()
        .parse()
        .map_err(|e| IoError::schema(path, format!("frequency: {e}")))?;

    let rest: String = lines.collect::<Vec<_>>().join("\n");
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(rest.as_bytes());
    let header = reader.headers().map_err(|e| IoError::schema(path, e))?;
    if header != ["k", "t", "x", "y", "z"][..] {
        return Err(IoError::schema(
            path,
            format!("header must be k,t,x,y,z, got {header:?}"),
        ));
    }
    let mut positions = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IoError::schema(path, e))?;
        if record.len() != 5 {
            return Err(IoError::schema(
                path,
                format!("row {i}: expected 5 columns k,t,x,y,z, got {}", record.len()),
            ));
        }
        let k: usize = record[0]
            .parse()
            .map_err(|e| IoError::schema(path, format!("row {i}, column k: {e}")))?;
        if k != i {
            return Err(IoError::schema(
                path,
                format!("row {i}: index column holds {k}, expected {i}"),
            ));
        }
        let mut p = [0.0; 3];
        for (j, slot) in p.iter_mut().enumerate() {
            *slot = record[2 + j].parse().map_err(|e| {
                IoError::schema(path, format!("row {i}, column {}: {e}", ["x", "y", "z"][j]))
            })?;
        }
        positions.push(nalgebra::Vector3::new(p[0], p[1], p[2]));
    }
    WaypointList::new(frequency, positions).map_err(|e| IoError::schema(path, e))
}

/// Save a waypoint list; `.csv` writes `k,t,x,y,z` rows under a frequency
/// comment, `.json` the equivalent versioned document.
pub fn save_waypoints(wps: &WaypointList, path: &Path) -> Result<(), IoError> {
    match detect_format(path)? {
        FileFormat::Csv => atomic_write(path, &waypoints_to_csv(wps)),
        FileFormat::Json => {
            let doc = WaypointDoc {
                schema_version: SCHEMA_VERSION,
                frequency_hz: wps.frequency,
                positions: wps.positions.iter().map(|p| [p[0], p[1], p[2]]).collect(),
            };
            atomic_write(path, to_pretty_json(&doc).as_bytes())
        }
    }
}

/// Load a waypoint list saved by [`save_waypoints`] (either format).
pub fn load_waypoints(path: &Path) -> Result<WaypointList, IoError> {
    match detect_format(path)? {
        FileFormat::Csv => waypoints_from_csv(&read_to_string(path)?, path),
        FileFormat::Json => {
            let doc: WaypointDoc = serde_json::from_str(&read_to_string(path)?)
                .map_err(|e| IoError::schema(path, e))?;
            if doc.schema_version != SCHEMA_VERSION {
                return Err(IoError::schema(
                    path,
                    format!(
                        "unsupported schema_version {} (this build reads {})",
                        doc.schema_version, SCHEMA_VERSION
                    ),
                ));
            }
            let positions = doc
                .positions
                .iter()
                .map(|p| nalgebra::Vector3::new(p[0], p[1], p[2]))
                .collect();
            WaypointList::new(doc.frequency_hz, positions).map_err(|e| IoError::schema(path, e))
        }
    }
}

/// One tracking-log sample pairing the commanded waypoint with the drone
/// state and the actuator command; `fz` is the vertical thrust deviation
/// from hover, N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimLogRow {
    pub t: f64,
    pub wx: f64,
    pub wy: f64,
    pub wz: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub fz: f64,
    pub mx: f64,
    pub my: f64,
    pub mz: f64,
}

/// Flatten a tracking log into export rows.
pub fn sim_log_rows(log: &SimLog) -> Vec<SimLogRow> {
    log.entries
        .iter()
        .map(|e| SimLogRow {
            t: e.t,
            wx: e.waypoint[0],
            wy: e.waypoint[1],
            wz: e.waypoint[2],
            x: e.state.position[0],
            y: e.state.position[1],
            z: e.state.position[2],
            fz: e.command.dfz,
            mx: e.command.mx,
            my: e.command.my,
            mz: e.command.mz,
        })
        .collect()
}

/// Save a tracking log; `.csv` writes `t,wx,wy,wz,x,y,z,fz,mx,my,mz` rows
/// (waypoint and state columns side by side for direct plotting), `.json`
/// the same rows as a JSON array.
pub fn save_sim_log(log: &SimLog, path: &Path) -> Result<(), IoError> {
    let rows = sim_log_rows(log);
    match detect_format(path)? {
        FileFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in &rows {
                w.serialize(row).expect("csv row of plain floats");
            }
            atomic_write(path, &w.into_inner().expect("vec writer never fails"))
        }
        FileFormat::Json => atomic_write(path, to_pretty_json(&rows).as_bytes()),
    }
}

/// Save tracking metrics as JSON (the only metrics format).
pub fn save_metrics(metrics: &TrackingMetrics, path: &Path) -> Result<(), IoError> {
    if detect_format(path)? != FileFormat::Json {
        return Err(IoError::UnknownExtension {
            path: path.to_path_buf(),
            ext: "csv".into(),
            expected: ".json",
        });
    }
    atomic_write(path, to_pretty_json(metrics).as_bytes())
}

/// Load tracking metrics saved by [`save_metrics`].
pub fn load_metrics(path: &Path) -> Result<TrackingMetrics, IoError> {
    serde_json::from_str(&read_to_string(path)?).map_err(|e| IoError::schema(path, e))
}

/// Save a docking episode summary as JSON.
pub fn save_episode_summary(summary: &EpisodeSummary, path: &Path) -> Result<(), IoError> {
    atomic_write(path, to_pretty_json(summary).as_bytes())
}
