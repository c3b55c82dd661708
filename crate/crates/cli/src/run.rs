//! Scan execution and output files.
//!
//! Points run on the rayon pool; every file goes through one writer thread.
//! Outputs are a function of the resolved configuration only, except
//! `timing.json`, which holds wall-clock times.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use nhdeco::circuit::{adaptive_schedule, coherence_from_circuit, CircuitMode};
use nhdeco::dynamics::{coherence_for_spec, CoherenceTrace, Method};
use nhdeco::spectral::susceptibility_map;
use nhdeco::ModelSpec;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Experiment, Resolved};
use crate::CliError;

pub const INDEX_FILE: &str = "index.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMING_FILE: &str = "timing.json";
pub const COMBINED_FILE: &str = "combined.csv";

/// One point of the Cartesian product of scan axes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub id: usize,
    pub label: String,
    pub spec: ModelSpec,
    /// Coupling angle when the point came from a `theta` axis.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

/// Expands the scan axes: models × h_y × couplings.
pub fn expand(r: &Resolved) -> Vec<Point> {
    let mut points = Vec::new();
    for model in &r.models {
        let hys = if r.scan.hy.is_empty() || r.experiment == Experiment::Susceptibility {
            vec![model.h.1]
        } else {
            r.scan.hy.clone()
        };
        let couplings: Vec<((f64, f64), Option<f64>)> = if !r.scan.theta.is_empty() {
            let mag = r.delta_magnitude();
            r.scan
                .theta
                .iter()
                .map(|&t| ((mag * t.sin(), mag * t.cos()), Some(t)))
                .collect()
        } else if !r.scan.delta.is_empty() {
            r.scan.delta.iter().map(|&d| (d, None)).collect()
        } else {
            vec![(model.delta, None)]
        };
        for &hy in &hys {
            for &(delta, theta) in &couplings {
                let spec = model.with_h((model.h.0, hy)).with_delta(delta);
                let id = points.len();
                points.push(Point {
                    id,
                    label: label(&spec, theta, r.experiment),
                    spec,
                    theta,
                });
            }
        }
    }
    points
}

fn label(s: &ModelSpec, theta: Option<f64>, e: Experiment) -> String {
    let mut l = format!("{}_n{}", s.kind, s.n);
    if e != Experiment::Susceptibility {
        let _ = write!(l, "_hy{:.4}", s.h.1);
    }
    match theta {
        Some(t) => {
            let _ = write!(l, "_theta{:.4}", t);
        }
        None => {
            let _ = write!(l, "_dx{:.4}_dy{:.4}", s.delta.0, s.delta.1);
        }
    }
    l
}

/// Seed of the shot sampler at one point.
pub fn point_seed(seed: u64, id: usize) -> u64 {
    seed ^ (id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

/// Outcome of one point, as recorded in the index and manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    #[serde(flatten)]
    pub point: Point,
    pub status: Status,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip)]
    pub seconds: f64,
    #[serde(skip)]
    coherence: Option<CoherenceTrace>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub out: PathBuf,
    pub points: Vec<PointRecord>,
    /// Every file written, relative to the output directory, sorted.
    pub files: Vec<String>,
    pub wall_seconds: f64,
}

impl RunReport {
    pub fn failures(&self) -> impl Iterator<Item = &PointRecord> {
        self.points.iter().filter(|p| p.status == Status::Failed)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    config: &'a Resolved,
    seed: u64,
    index: &'static str,
    combined: Option<&'static str>,
    points: &'a [PointRecord],
    files: &'a [String],
}

#[derive(Serialize)]
struct Timing {
    wall_seconds: f64,
    points: Vec<(usize, f64)>,
}

type Write = (String, Vec<u8>);

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

fn run_point(r: &Resolved, p: &Point, tx: &mpsc::Sender<Write>) -> PointRecord {
    let start = Instant::now();
    let mut files = Vec::new();
    let mut send = |name: String, bytes: Vec<u8>| {
        files.push(name.clone());
        // the writer outlives every worker, so a send cannot fail
        let _ = tx.send((name, bytes));
    };
    let stem = format!("p{:03}_{}", p.id, p.label);
    let mut message = None;
    let outcome: nhdeco::Result<Option<CoherenceTrace>> = (|| match r.experiment {
        Experiment::Coherence => {
            let tr = coherence_for_spec(&p.spec, &r.times(), r.method)?;
            send(format!("traces/{stem}.csv"), csv_bytes(|b| tr.write_csv(b)));
            Ok(Some(tr))
        }
        Experiment::Susceptibility => {
            let m = susceptibility_map(&p.spec, &r.scan.map_hx, &r.scan.map_hy, p.spec.delta)?;
            send(format!("maps/{stem}.csv"), csv_bytes(|b| m.write_csv(b)));
            Ok(None)
        }
        Experiment::Circuit => {
            let schedule = adaptive_schedule(&p.spec, r.tolerance, r.t_max)?;
            let exact = coherence_from_circuit(&p.spec, &schedule, CircuitMode::Exact)?;
            if exact.broken_phase {
                message = Some("broken phase: circuit estimator not valid".to_string());
            }
            let dense = coherence_for_spec(&p.spec, &exact.trace.times, Method::Dense)?;
            send(
                format!("traces/{stem}_exact.csv"),
                csv_bytes(|b| exact.trace.write_csv(b)),
            );
            send(
                format!("traces/{stem}_dense.csv"),
                csv_bytes(|b| dense.write_csv(b)),
            );
            if r.shots > 0 {
                let mode = CircuitMode::Shots {
                    shots: r.shots,
                    seed: point_seed(r.seed, p.id),
                };
                let shots = coherence_from_circuit(&p.spec, &schedule, mode)?;
                send(
                    format!("traces/{stem}_shots.csv"),
                    csv_bytes(|b| shots.trace.write_csv(b)),
                );
            }
            let mut sched = String::from("step,dt\n");
            for (k, dt) in schedule.iter().enumerate() {
                let _ = writeln!(sched, "{k},{dt}");
            }
            send(format!("traces/{stem}_schedule.csv"), sched.into_bytes());
            Ok(None)
        }
    })();
    let (status, coherence) = match outcome {
        Ok(c) => (Status::Ok, c),
        Err(e) => {
            message = Some(e.to_string());
            (Status::Failed, None)
        }
    };
    PointRecord {
        point: p.clone(),
        status,
        files,
        message,
        seconds: start.elapsed().as_secs_f64(),
        coherence,
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn index_csv(points: &[PointRecord]) -> String {
    let mut s = String::from("id,label,kind,n,j,u,hx,hy,dx,dy,theta,status,files,message\n");
    for p in points {
        let m = &p.point.spec;
        let theta = p.point.theta.map(|t| t.to_string()).unwrap_or_default();
        let status = match p.status {
            Status::Ok => "ok",
            Status::Failed => "failed",
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.point.id,
            p.point.label,
            m.kind,
            m.n,
            m.j,
            m.u,
            m.h.0,
            m.h.1,
            m.delta.0,
            m.delta.1,
            theta,
            status,
            csv_field(&p.files.join(";")),
            csv_field(p.message.as_deref().unwrap_or("")),
        );
    }
    s
}

/// Wide table `t, C(point 0), C(point 1), …` over the shared time grid.
fn combined_csv(times: &[f64], points: &[PointRecord]) -> Option<String> {
    let ok: Vec<(&str, &CoherenceTrace)> = points
        .iter()
        .filter_map(|p| p.coherence.as_ref().map(|c| (p.point.label.as_str(), c)))
        .collect();
    if ok.is_empty() {
        return None;
    }
    let mut s = String::from("t");
    for (l, _) in &ok {
        let _ = write!(s, ",{l}");
    }
    s.push('\n');
    for (k, t) in times.iter().enumerate() {
        let _ = write!(s, "{t}");
        for (_, c) in &ok {
            let _ = write!(s, ",{}", c.coherence[k]);
        }
        s.push('\n');
    }
    Some(s)
}

fn writer(root: PathBuf, rx: mpsc::Receiver<Write>) -> std::io::Result<()> {
    for (name, bytes) in rx {
        let path = root.join(&name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, bytes)?;
    }
    Ok(())
}

/// Runs every point of `r` and writes traces, maps, index, and manifest
/// under `r.out`. Point failures are recorded, not raised.
pub fn run_scan(r: &Resolved) -> Result<RunReport, CliError> {
    let start = Instant::now();
    std::fs::create_dir_all(&r.out)?;
    let points = expand(r);
    let (tx, rx) = mpsc::channel::<Write>();
    let root = r.out.clone();
    let handle = std::thread::spawn(move || writer(root, rx));

    let records: Vec<PointRecord> = points.par_iter().map(|p| run_point(r, p, &tx)).collect();

    let mut files: Vec<String> = records.iter().flat_map(|p| p.files.clone()).collect();
    let combined = if r.experiment == Experiment::Coherence {
        combined_csv(&r.times(), &records)
    } else {
        None
    };
    if let Some(c) = combined.as_ref() {
        files.push(COMBINED_FILE.into());
        let _ = tx.send((COMBINED_FILE.into(), c.clone().into_bytes()));
    }
    files.push(INDEX_FILE.into());
    let _ = tx.send((INDEX_FILE.into(), index_csv(&records).into_bytes()));
    files.push(MANIFEST_FILE.into());
    files.sort();
    let manifest = Manifest {
        tool: "nhdeco-cli",
        version: env!("CARGO_PKG_VERSION"),
        core_version: nhdeco::VERSION,
        config: r,
        seed: r.seed,
        index: INDEX_FILE,
        combined: combined.as_ref().map(|_| COMBINED_FILE),
        points: &records,
        files: &files,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    let _ = tx.send((MANIFEST_FILE.into(), json));
    let wall_seconds = start.elapsed().as_secs_f64();
    let timing = Timing {
        wall_seconds,
        points: records.iter().map(|p| (p.point.id, p.seconds)).collect(),
    };
    let _ = tx.send((TIMING_FILE.into(), serde_json::to_vec_pretty(&timing)?));
    drop(tx);
    handle
        .join()
        .map_err(|_| CliError::Config("output writer panicked".into()))??;

    Ok(RunReport {
        out: r.out.clone(),
        points: records,
        files,
        wall_seconds,
    })
}

/// Reads a run's index back as `(id, status, files)` rows.
pub fn read_index(out: &Path) -> std::io::Result<Vec<(usize, String, Vec<String>)>> {
    let text = std::fs::read_to_string(out.join(INDEX_FILE))?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let cols = split_csv(line);
        let id = cols[0].parse().unwrap_or(usize::MAX);
        let files = if cols[12].is_empty() {
            Vec::new()
        } else {
            cols[12].split(';').map(str::to_string).collect()
        };
        rows.push((id, cols[11].clone(), files));
    }
    Ok(rows)
}

fn split_csv(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nhdeco::ModelKind;

    #[test]
    fn empty_axes_give_one_point() {
        let m = ModelSpec::ising(4, 0.5, (1.0, 0.3), (0.05, 0.02));
        let r = Resolved::custom(m);
        let pts = expand(&r);
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].spec, m);
    }

    #[test]
    fn axes_multiply() {
        let mut r = Resolved::custom(ModelSpec::ising(4, 0.5, (1.0, 0.0), (0.0, 0.0)));
        r.scan.hy = vec![0.0, 0.5, 0.9];
        r.scan.theta = vec![0.1, 0.2];
        r.models
            .push(ModelSpec::heisenberg(4, 0.5, (1.0, 0.0), (0.0, 0.0)));
        let pts = expand(&r);
        assert_eq!(pts.len(), 12);
        assert_eq!(pts[11].spec.kind, ModelKind::Heisenberg);
        let ids: Vec<usize> = pts.iter().map(|p| p.id).collect();
        assert_eq!(ids, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn csv_quoting_round_trips() {
        let f = csv_field("a, \"b\"");
        assert_eq!(split_csv(&format!("x,{f},y")), vec!["x", "a, \"b\"", "y"]);
    }

    #[test]
    fn point_seeds_differ() {
        assert_ne!(point_seed(7, 0), point_seed(7, 1));
        assert_eq!(point_seed(7, 0), 7);
    }
}
