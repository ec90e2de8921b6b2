//! Trace export: one CSV row per step plus a JSON sidecar with the scenario
//! and its metrics.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a parsed
//! trace is bit-identical to the one written. Missing values are empty cells.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Point2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::Side;
use crate::dynamics::{ControlInput, RobotKind, RobotState};
use crate::engine::{still_record, SimOutcome, Status, TraceRecord};
use crate::perception::{ImageObservation, Region};
use crate::scenarios::{RunMetrics, ScenarioDef};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("row {row}: {msg}")]
    Format { row: usize, msg: String },
    #[error("trace has no rows")]
    Empty,
}

trait Cell: Sized {
    fn write(&self) -> String;
    fn read(s: &str) -> Option<Self>;
}

impl Cell for f64 {
    fn write(&self) -> String {
        self.to_string()
    }
    fn read(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl Cell for u32 {
    fn write(&self) -> String {
        self.to_string()
    }
    fn read(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl Cell for u8 {
    fn write(&self) -> String {
        self.to_string()
    }
    fn read(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl Cell for bool {
    fn write(&self) -> String {
        u8::from(*self).to_string()
    }
    fn read(s: &str) -> Option<Self> {
        match s {
            "0" => Some(false),
            "1" => Some(true),
            _ => None,
        }
    }
}

impl Cell for Side {
    fn write(&self) -> String {
        i8::from(*self).to_string()
    }
    fn read(s: &str) -> Option<Self> {
        s.parse::<i8>().ok().and_then(|v| Side::try_from(v).ok())
    }
}

impl Cell for Region {
    fn write(&self) -> String {
        self.as_str().to_owned()
    }
    fn read(s: &str) -> Option<Self> {
        Region::parse(s)
    }
}

impl<T: Cell> Cell for Option<T> {
    fn write(&self) -> String {
        self.as_ref().map_or_else(String::new, Cell::write)
    }
    fn read(s: &str) -> Option<Self> {
        if s.is_empty() {
            Some(None)
        } else {
            T::read(s).map(Some)
        }
    }
}

trait Visitor {
    fn cell<T: Cell>(&mut self, name: &str, v: &mut T);
}

fn visit_state<V: Visitor>(v: &mut V, p: &str, s: &mut RobotState) {
    for (axis, i) in [("x", 0), ("y", 1), ("z", 2)] {
        v.cell(&format!("{p}_{axis}_m"), &mut s.position[i]);
    }
    for (axis, i) in [("roll", 0), ("pitch", 1), ("yaw", 2)] {
        v.cell(&format!("{p}_{axis}_rad"), &mut s.orientation[i]);
    }
    visit_axes(v, &format!("{p}_vel"), &mut s.body_velocity);
}

fn visit_axes<V: Visitor>(v: &mut V, p: &str, a: &mut ControlInput) {
    v.cell(&format!("{p}_x_mps"), &mut a.x);
    v.cell(&format!("{p}_y_mps"), &mut a.y);
    v.cell(&format!("{p}_z_mps"), &mut a.z);
    v.cell(&format!("{p}_roll_radps"), &mut a.roll);
    v.cell(&format!("{p}_pitch_radps"), &mut a.pitch);
    v.cell(&format!("{p}_yaw_radps"), &mut a.yaw);
}

fn visit_view<V: Visitor>(v: &mut V, p: &str, o: &mut ImageObservation) -> Result<(), String> {
    let (mut u, mut w) = (o.tag_px.map(|t| t.0), o.tag_px.map(|t| t.1));
    v.cell(&format!("{p}_tag_u_px"), &mut u);
    v.cell(&format!("{p}_tag_v_px"), &mut w);
    v.cell(&format!("{p}_region"), &mut o.region);
    o.tag_px = match (u, w) {
        (Some(u), Some(w)) => Some((u, w)),
        (None, None) => None,
        _ => return Err(format!("{p} tag has only one pixel coordinate")),
    };
    Ok(())
}

// The single source of column order.
fn visit<V: Visitor>(v: &mut V, r: &mut TraceRecord) -> Result<(), String> {
    v.cell("t_s", &mut r.t_s);
    visit_state(v, "asv", &mut r.asv);
    visit_state(v, "auv", &mut r.auv);
    visit_view(v, "asv_view", &mut r.asv_view)?;
    visit_view(v, "auv_view", &mut r.auv_view)?;
    r.asv_view.timestamp_s = r.t_s;
    r.auv_view.timestamp_s = r.t_s;
    v.cell("sonar_range_m", &mut r.sonar_range_m);
    v.cell("wall_distance_m", &mut r.wall_distance_m);
    v.cell("relative_yaw_rad", &mut r.relative_yaw_rad);
    visit_axes(v, "planner", &mut r.planner);
    visit_axes(v, "asv_ibvs", &mut r.asv_ibvs);
    visit_axes(v, "auv_ibvs", &mut r.auv_ibvs);
    visit_axes(v, "avoidance", &mut r.avoidance);
    visit_axes(v, "depth_hold", &mut r.depth_hold);
    v.cell("yank_radps", &mut r.yank_radps);
    visit_axes(v, "asv_cmd", &mut r.asv_cmd);
    visit_axes(v, "auv_cmd", &mut r.auv_cmd);
    v.cell("k_p", &mut r.k_p);
    v.cell("k_v", &mut r.k_v);
    v.cell("lambda", &mut r.lambda);
    v.cell("mu", &mut r.mu);
    v.cell("yank_active", &mut r.yank_active);
    v.cell("yank_count", &mut r.yank_count);
    v.cell("level", &mut r.level);
    Ok(())
}

fn template() -> TraceRecord {
    let at = |kind| RobotState::at_rest(kind, Point2::origin(), 0.0, 0.0);
    still_record(0.0, at(RobotKind::Asv), at(RobotKind::Auv))
}

struct Names(Vec<String>);
impl Visitor for Names {
    fn cell<T: Cell>(&mut self, name: &str, _: &mut T) {
        self.0.push(name.to_owned());
    }
}

struct Enc(Vec<String>);
impl Visitor for Enc {
    fn cell<T: Cell>(&mut self, _: &str, v: &mut T) {
        self.0.push(v.write());
    }
}

struct Dec<'a> {
    row: &'a csv::StringRecord,
    at: usize,
    err: Option<String>,
}
impl Visitor for Dec<'_> {
    fn cell<T: Cell>(&mut self, name: &str, v: &mut T) {
        let raw = self.row.get(self.at).unwrap_or("");
        self.at += 1;
        match T::read(raw) {
            Some(x) => *v = x,
            None if self.err.is_none() => self.err = Some(format!("bad {name} value '{raw}'")),
            None => {}
        }
    }
}

/// Column names, in file order.
pub fn columns() -> Vec<String> {
    let mut n = Names(Vec::new());
    visit(&mut n, &mut template()).expect("template is well formed");
    n.0
}

pub fn write_csv<W: Write>(out: W, trace: &[TraceRecord]) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns())?;
    for r in trace {
        let mut e = Enc(Vec::new());
        visit(&mut e, &mut r.clone()).map_err(|msg| TraceError::Format { row: 0, msg })?;
        w.write_record(&e.0)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn to_csv_string(trace: &[TraceRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, trace).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

/// Parses a trace; the header must match [`columns`] exactly.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let cols = columns();
    let header = rd.headers()?.clone();
    if header.len() != cols.len() || header.iter().zip(&cols).any(|(a, b)| a != b) {
        return Err(TraceError::Format {
            row: 0,
            msg: "unexpected header".into(),
        });
    }
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let mut rec = template();
        let mut d = Dec {
            row: &row,
            at: 0,
            err: None,
        };
        let shape = visit(&mut d, &mut rec);
        if let Some(msg) = d.err.or(shape.err()) {
            return Err(TraceError::Format { row: i + 1, msg });
        }
        if ![rec.asv.position, rec.auv.position]
            .iter()
            .all(|p: &Vector3<f64>| p.iter().all(|c| c.is_finite()))
        {
            return Err(TraceError::Format {
                row: i + 1,
                msg: "non-finite position".into(),
            });
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(TraceError::Empty);
    }
    Ok(out)
}

/// Sidecar written next to each trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMeta {
    pub schema_version: u32,
    pub scenario: ScenarioDef,
    pub status: Status,
    pub final_time_s: f64,
    pub steps: usize,
    pub metrics: RunMetrics,
    /// Whether the status matched the scenario's expectation, if it had one.
    pub expectation_met: Option<bool>,
}

impl RunMeta {
    pub fn new(def: &ScenarioDef, outcome: &SimOutcome, metrics: RunMetrics) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: def.clone(),
            status: outcome.status,
            final_time_s: outcome.final_time_s,
            steps: outcome.trace.len(),
            metrics,
            expectation_met: def.expected.map(|e| e == outcome.status),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, TraceError> {
        let meta: Self = serde_json::from_str(s)?;
        if meta.schema_version != SCHEMA_VERSION {
            return Err(TraceError::Format {
                row: 0,
                msg: format!("unsupported schema_version {}", meta.schema_version),
            });
        }
        Ok(meta)
    }
}

/// `run.csv` -> `run.meta.json`.
pub fn meta_path(trace_path: &Path) -> PathBuf {
    trace_path.with_extension("meta.json")
}

/// JSON has no infinity; store non-finite distances as null and read null back as +inf.
pub mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, Mode};
    use crate::scenarios::{builtin, metrics, BuiltinName};
    use proptest::prelude::*;

    #[test]
    fn columns_are_unique_and_stable() {
        let cols = columns();
        let set: std::collections::HashSet<_> = cols.iter().collect();
        assert_eq!(set.len(), cols.len());
        assert_eq!(cols.len(), 1 + 2 * 12 + 2 * 3 + 3 + 7 * 6 + 1 + 7);
        assert_eq!(cols[0], "t_s");
        assert_eq!(cols.last().unwrap(), "level");
    }

    #[test]
    fn real_trace_round_trips() {
        let def = builtin(BuiltinName::Case3, Mode::DogWalking);
        let out = run(&def).unwrap();
        let text = to_csv_string(&out.trace);
        let back = read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.len(), out.trace.len());
        for (a, b) in back.iter().zip(&out.trace) {
            assert_eq!(a, b);
        }
        assert_eq!(to_csv_string(&back), text);
    }

    #[test]
    fn meta_round_trips_with_infinite_clearance() {
        let mut def = builtin(BuiltinName::Case1, Mode::DogWalking);
        def.world.obstacles.clear();
        let out = run(&def).unwrap();
        let m = metrics(&out, &def);
        assert!(m.min_obstacle_clearance_m.is_infinite());
        let meta = RunMeta::new(&def, &out, m);
        assert_eq!(RunMeta::from_json(&meta.to_json()).unwrap(), meta);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_csv(&b""[..]).is_err());
        let header = columns().join(",") + "\n";
        assert!(matches!(
            read_csv(header.as_bytes()),
            Err(TraceError::Empty)
        ));
        assert!(read_csv(&b"a,b\n1,2\n"[..]).is_err());
        let mut row = vec!["0"; columns().len()];
        row[columns().iter().position(|c| c == "lambda").unwrap()] = "2";
        let text = header.clone() + &row.join(",") + "\n";
        assert!(matches!(
            read_csv(text.as_bytes()),
            Err(TraceError::Format { row: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn floats_round_trip_bitwise(vals in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 4),
                                     noise in -1e-300f64..1e-300, yc in 0u32..1000, level in 0u8..3) {
            let mut r = template();
            r.t_s = vals[0];
            r.asv.position.x = vals[1];
            r.auv_cmd.yaw = vals[2] + noise;
            r.sonar_range_m = Some(vals[3]);
            r.mu = Some(Side::Right);
            r.asv_view.tag_px = None;
            r.asv_view.region = Region::OutOfView;
            r.yank_count = yc;
            r.level = level;
            r.asv_view.timestamp_s = r.t_s;
            r.auv_view.timestamp_s = r.t_s;
            let back = read_csv(to_csv_string(std::slice::from_ref(&r)).as_bytes()).unwrap();
            prop_assert_eq!(&back[0], &r);
        }
    }
}
