//! Result bundles on disk and plot-ready exports.
//!
//! A bundle directory holds:
//!
//! * `trajectory.csv`: one row per step, columns in [`trajectory_header`] order
//! * `theta_norms.csv`: `k,phase,theta_norm` per step
//! * `summary.json`: run metadata, phase table and metrics
//! * `config.toml`: the effective configuration
//! * `checkpoint.bin`: estimator state (see [`crate::estimation::write_checkpoint`])
//!
//! Numbers are written in scientific notation with 17 significant digits, so
//! every value reads back bit-identical.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dynamics::SystemState;
use crate::estimation::write_checkpoint;
use crate::harness::{Phase, PhaseInfo, StepRecord, Summary, Surrogate, TrajectoryLog};
use crate::{Error, Result, NUM_ROBOTS};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

/// Numeric columns after `k` and `phase`.
pub const NUMERIC_COLUMNS: usize = 12 + 6 + 18 + 18 + 2 + 6;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trajectory_header() -> Vec<String> {
    let mut h = vec!["k".to_string(), "phase".to_string()];
    for i in 1..=NUM_ROBOTS {
        h.push(format!("x{i}"));
        h.push(format!("y{i}"));
    }
    for i in 1..=NUM_ROBOTS {
        h.push(format!("vx{i}"));
        h.push(format!("vy{i}"));
    }
    for i in 1..=NUM_ROBOTS {
        h.push(format!("ax{i}"));
        h.push(format!("ay{i}"));
    }
    for prefix in ["z2", "z2hat"] {
        for i in 1..=NUM_ROBOTS {
            for j in 1..=6 {
                h.push(format!("{prefix}_r{i}_{j}"));
            }
        }
    }
    h.push("eps_norm".into());
    h.push("eps_a_norm".into());
    for i in 1..=NUM_ROBOTS {
        h.push(format!("d_robot{i}"));
    }
    for i in 1..=NUM_ROBOTS {
        h.push(format!("d_wall{i}"));
    }
    h
}

/// One trajectory row as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub k: u64,
    pub phase: Phase,
    pub values: Vec<f64>,
}

impl TrajectoryRow {
    pub fn state(&self) -> [f64; 12] {
        std::array::from_fn(|i| self.values[i])
    }

    pub fn eps_norm(&self) -> f64 {
        self.values[54]
    }

    pub fn eps_a_norm(&self) -> f64 {
        self.values[55]
    }
}

pub fn row_values(r: &StepRecord) -> Vec<f64> {
    let mut v = Vec::with_capacity(NUMERIC_COLUMNS);
    v.extend_from_slice(&r.state);
    v.extend_from_slice(&r.input);
    v.extend_from_slice(&r.z2);
    v.extend_from_slice(&r.z2_hat);
    v.push(r.eps_norm);
    v.push(r.eps_a_norm);
    v.extend_from_slice(&r.distances);
    v
}

fn parse_phase(s: &str) -> Option<Phase> {
    match s {
        "identification" => Some(Phase::Identification),
        "control" => Some(Phase::Control),
        _ => None,
    }
}

pub fn write_trajectory<W: Write>(mut w: W, records: &[StepRecord]) -> Result<()> {
    writeln!(w, "{}", trajectory_header().join(","))?;
    let mut line = String::new();
    for r in records {
        line.clear();
        write!(line, "{},{}", r.k, r.phase.tag()).unwrap();
        for v in row_values(r) {
            line.push(',');
            line.push_str(&fmt_f64(v));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn table_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Table {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| table_error(path, "empty file"))?;
    if header != trajectory_header().join(",") {
        return Err(table_error(path, "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(n, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != NUMERIC_COLUMNS + 2 {
                return Err(table_error(
                    path,
                    format!("row {}: {} columns", n + 1, cells.len()),
                ));
            }
            let k = cells[0]
                .parse()
                .map_err(|_| table_error(path, format!("row {}: bad k", n + 1)))?;
            let phase = parse_phase(cells[1])
                .ok_or_else(|| table_error(path, format!("row {}: bad phase", n + 1)))?;
            let values = cells[2..]
                .iter()
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| table_error(path, format!("row {}: {e}", n + 1)))?;
            Ok(TrajectoryRow { k, phase, values })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMeta {
    pub phase: Phase,
    pub case: Option<String>,
    pub start: [[f64; 2]; NUM_ROBOTS],
    pub targets: [[f64; 2]; NUM_ROBOTS],
    pub steps: usize,
    pub arrived_at: Option<usize>,
    pub duration_s: f64,
}

impl From<&PhaseInfo> for PhaseMeta {
    fn from(p: &PhaseInfo) -> Self {
        PhaseMeta {
            phase: p.phase,
            case: p.case.clone(),
            start: std::array::from_fn(|i| p.start.position(i)),
            targets: p.targets.0,
            steps: p.steps,
            arrived_at: p.arrived_at,
            duration_s: p.duration_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSummary {
    pub variant: String,
    pub estimator: String,
    pub seed: u64,
    pub config_sha256: String,
    pub phases: Vec<PhaseMeta>,
    pub metrics: Summary,
}

impl BundleSummary {
    pub fn new(cfg: &RunConfig, log: &TrajectoryLog, metrics: Summary) -> Self {
        BundleSummary {
            variant: cfg.variant.name().to_string(),
            estimator: format!("{:?}", cfg.estimator).to_lowercase(),
            seed: cfg.seed,
            config_sha256: cfg.digest(),
            phases: log.phases.iter().map(PhaseMeta::from).collect(),
            metrics,
        }
    }
}

pub fn write_bundle(
    dir: &Path,
    cfg: &RunConfig,
    log: &TrajectoryLog,
    summary: &BundleSummary,
    surrogate: &Surrogate,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(fs::File::create(dir.join(TRAJECTORY_FILE))?);
    write_trajectory(&mut w, &log.records)?;
    w.flush()?;
    write_theta_norms(dir, &log.records)?;
    fs::write(
        dir.join(SUMMARY_FILE),
        serde_json::to_string_pretty(summary)? + "\n",
    )?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_toml())?;
    let states: Vec<_> = surrogate.estimators.iter().collect();
    let mut w = BufWriter::new(fs::File::create(dir.join(CHECKPOINT_FILE))?);
    write_checkpoint(&mut w, &states)?;
    w.flush()?;
    Ok(())
}

pub fn read_summary(dir: &Path) -> Result<BundleSummary> {
    let text = fs::read_to_string(dir.join(SUMMARY_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    ErrorNorm,
    ParameterNorm,
    Trajectory,
}

impl ExportKind {
    pub const ALL: [ExportKind; 3] = [
        ExportKind::ErrorNorm,
        ExportKind::ParameterNorm,
        ExportKind::Trajectory,
    ];
}

/// Per-step parameter norms, written next to the trajectory.
pub const THETA_NORM_FILE: &str = "theta_norms.csv";

pub fn write_theta_norms(dir: &Path, records: &[StepRecord]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(dir.join(THETA_NORM_FILE))?);
    writeln!(w, "k,phase,theta_norm")?;
    for r in records {
        writeln!(w, "{},{},{}", r.k, r.phase.tag(), fmt_f64(r.theta_norm))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes plot-ready files for `which` from the bundle in `dir` into `out`
/// and returns their paths.
///
/// * error norms: `error_norm_<phase>.csv` with `k,eps_norm,eps_a_norm`
/// * parameter norms: `theta_norm_<phase>.csv` with `k,theta_norm`
/// * trajectories: `trajectory_xy.csv` with `segment,series,robot,k,x,y`,
///   where `series` is `path`, `start` or `target` and `segment` names the
///   phase (`identification` or `case-<id>`). Each path begins at the start point.
pub fn export_plot_data(dir: &Path, out: &Path, which: &[ExportKind]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let rows = read_trajectory(&dir.join(TRAJECTORY_FILE))?;
    let summary = read_summary(dir)?;
    let mut written = Vec::new();
    for kind in which {
        match kind {
            ExportKind::ErrorNorm => {
                for phase in [Phase::Identification, Phase::Control] {
                    let path = out.join(format!("error_norm_{}.csv", phase.tag()));
                    let mut w = BufWriter::new(fs::File::create(&path)?);
                    writeln!(w, "k,eps_norm,eps_a_norm")?;
                    for r in rows.iter().filter(|r| r.phase == phase) {
                        writeln!(
                            w,
                            "{},{},{}",
                            r.k,
                            fmt_f64(r.eps_norm()),
                            fmt_f64(r.eps_a_norm())
                        )?;
                    }
                    w.flush()?;
                    written.push(path);
                }
            }
            ExportKind::ParameterNorm => {
                let src = dir.join(THETA_NORM_FILE);
                let text = fs::read_to_string(&src)?;
                for phase in [Phase::Identification, Phase::Control] {
                    let path = out.join(format!("theta_norm_{}.csv", phase.tag()));
                    let mut w = BufWriter::new(fs::File::create(&path)?);
                    writeln!(w, "k,theta_norm")?;
                    for line in text.lines().skip(1) {
                        let cells: Vec<&str> = line.split(',').collect();
                        if cells.len() != 3 {
                            return Err(table_error(&src, "expected 3 columns"));
                        }
                        if parse_phase(cells[1]) == Some(phase) {
                            writeln!(w, "{},{}", cells[0], cells[2])?;
                        }
                    }
                    w.flush()?;
                    written.push(path);
                }
            }
            ExportKind::Trajectory => {
                let path = out.join("trajectory_xy.csv");
                let mut w = BufWriter::new(fs::File::create(&path)?);
                write_xy(&mut w, &rows, &summary.phases)?;
                w.flush()?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

fn write_xy<W: Write>(mut w: W, rows: &[TrajectoryRow], phases: &[PhaseMeta]) -> Result<()> {
    writeln!(w, "segment,series,robot,k,x,y")?;
    let mut cursor = 0usize;
    for meta in phases {
        let segment = match &meta.case {
            Some(c) => format!("case-{c}"),
            None => meta.phase.tag().to_string(),
        };
        let seg_rows: Vec<&TrajectoryRow> = rows
            .iter()
            .skip(cursor)
            .take_while(|r| r.phase == meta.phase)
            .take(meta.steps)
            .collect();
        cursor += seg_rows.len();
        let first_k = seg_rows.first().map(|r| r.k).unwrap_or(0);
        for i in 0..NUM_ROBOTS {
            let [sx, sy] = meta.start[i];
            let [tx, ty] = meta.targets[i];
            let robot = i + 1;
            writeln!(
                w,
                "{segment},start,{robot},,{},{}",
                fmt_f64(sx),
                fmt_f64(sy)
            )?;
            writeln!(
                w,
                "{segment},target,{robot},,{},{}",
                fmt_f64(tx),
                fmt_f64(ty)
            )?;
            writeln!(
                w,
                "{segment},path,{robot},{},{},{}",
                first_k as i64 - 1,
                fmt_f64(sx),
                fmt_f64(sy)
            )?;
            for r in &seg_rows {
                let x = SystemState::from_slice(&r.state()).position(i);
                writeln!(
                    w,
                    "{segment},path,{robot},{},{},{}",
                    r.k,
                    fmt_f64(x[0]),
                    fmt_f64(x[1])
                )?;
            }
        }
    }
    Ok(())
}

/// Reads `trajectory_xy.csv` back as `(segment, series, robot, x, y)`.
pub fn read_xy(path: &Path) -> Result<Vec<(String, String, usize, f64, f64)>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .skip(1)
        .map(|line| {
            let c: Vec<&str> = line.split(',').collect();
            if c.len() != 6 {
                return Err(table_error(path, format!("bad row `{line}`")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| table_error(path, format!("`{s}`: {e}")))
            };
            let robot = c[2]
                .parse()
                .map_err(|_| table_error(path, format!("bad robot `{}`", c[2])))?;
            Ok((
                c[0].to_string(),
                c[1].to_string(),
                robot,
                num(c[4])?,
                num(c[5])?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_has_fixed_width() {
        let h = trajectory_header();
        assert_eq!(h.len(), 64);
        assert_eq!(h[0], "k");
        assert_eq!(h[2], "x1");
        assert_eq!(h[14], "ax1");
        assert_eq!(h[56], "eps_norm");
        assert_eq!(h[57], "eps_a_norm");
        assert_eq!(h[63], "d_wall3");
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
            0.0,
        ] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    }
}
