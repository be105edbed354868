//! CSV and JSON artifacts.
//!
//! CSV files are comma separated with a header row; floats use the shortest
//! representation that round-trips. Nothing time-dependent goes into any artifact
//! except `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use oscillab_core::estimate::{SurvivorCurve, SweepResult};
use oscillab_core::histogram::MeasureHistogram;
use oscillab_core::tracking::LiftedPhase;
use oscillab_core::{LimitCycle, TrajectoryRecord};
use serde::Serialize;

use crate::error::CliError;

/// Shortest round-trip text of `x` (`NaN`, `inf` and `-inf` for non-finite values).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Collects the files written by one run.
#[derive(Debug)]
pub struct ArtifactDir {
    root: PathBuf,
    pub written: Vec<String>,
}

impl ArtifactDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, CliError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self { root, written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.path(name);
        let io = |e: csv::Error| CliError::Io { path: path.clone(), source: e.into() };
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.note(name);
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.note(name);
        Ok(())
    }

    fn note(&mut self, name: &str) {
        if !self.written.iter().any(|n| n == name) {
            self.written.push(name.to_string());
        }
    }
}

pub fn write_trajectory(dir: &mut ArtifactDir, traj: &TrajectoryRecord) -> Result<(), CliError> {
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.dim).map(|k| format!("x{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..traj.len()).map(|i| {
        std::iter::once(fmt_f64(traj.times[i])).chain(traj.state(i).iter().map(|v| fmt_f64(*v))).collect::<Vec<_>>()
    });
    dir.csv("trajectory.csv", &header, rows)
}

pub fn write_phase(dir: &mut ArtifactDir, lp: &LiftedPhase) -> Result<(), CliError> {
    let rows =
        lp.times.iter().zip(&lp.phi).zip(&lp.winding).map(|((t, p), w)| vec![fmt_f64(*t), fmt_f64(*p), w.to_string()]);
    dir.csv("phase.csv", &["t", "phi", "winding"], rows)
}

pub fn write_cycle(dir: &mut ArtifactDir, cycle: &LimitCycle) -> Result<(), CliError> {
    let mut header = vec!["s".to_string()];
    header.extend((1..=cycle.dim()).map(|k| format!("x{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..cycle.n_samples()).map(|i| {
        std::iter::once(fmt_f64(cycle.sample_time(i)))
            .chain(cycle.sample(i).iter().map(|v| fmt_f64(*v)))
            .collect::<Vec<_>>()
    });
    dir.csv("cycle.csv", &header, rows)
}

fn bin_header(dim: usize, value: &[&str]) -> Vec<String> {
    let axes = ["bin_x", "bin_y", "bin_z"];
    axes[..dim].iter().chain(value).map(|s| s.to_string()).collect()
}

/// Bin centers and weights; bins are listed with the last axis varying fastest.
pub fn write_histogram(
    dir: &mut ArtifactDir,
    name: &str,
    hist: &MeasureHistogram,
    with_density: bool,
) -> Result<(), CliError> {
    let value: &[&str] = if with_density { &["weight", "density"] } else { &["weight"] };
    let header = bin_header(hist.grid.dim(), value);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let vol = hist.grid.cell_volume();
    let rows = hist.weights.iter().enumerate().map(|(i, w)| {
        let mut row: Vec<String> = hist.grid.center(i).into_iter().map(fmt_f64).collect();
        row.push(fmt_f64(*w));
        if with_density {
            row.push(fmt_f64(w / vol));
        }
        row
    });
    dir.csv(name, &header, rows)
}

#[derive(Serialize)]
struct MeasureMeta<'a> {
    grid: &'a oscillab_core::GridSpec,
    kind: oscillab_core::histogram::MeasureKind,
    estimator: oscillab_core::histogram::EstimatorKind,
    total_samples: u64,
    burn_in: f64,
    clipped_fraction: f64,
    weight_sum: f64,
    survivors: Option<&'a SurvivorCurve>,
    survivor_fraction: Option<f64>,
}

pub fn write_measure(
    dir: &mut ArtifactDir,
    hist: &MeasureHistogram,
    survivors: Option<&SurvivorCurve>,
) -> Result<(), CliError> {
    write_histogram(dir, "measure.csv", hist, false)?;
    dir.json(
        "measure.meta.json",
        &MeasureMeta {
            grid: &hist.grid,
            kind: hist.kind,
            estimator: hist.estimator,
            total_samples: hist.total_samples,
            burn_in: hist.burn_in,
            clipped_fraction: hist.clipped_fraction,
            weight_sum: hist.total(),
            survivors,
            survivor_fraction: survivors.map(SurvivorCurve::final_fraction),
        },
    )
}

pub fn write_survivors(dir: &mut ArtifactDir, curve: &SurvivorCurve) -> Result<(), CliError> {
    let n = curve.n_paths.max(1) as f64;
    let rows =
        curve.times.iter().zip(&curve.survivors).map(|(t, s)| vec![fmt_f64(*t), s.to_string(), fmt_f64(*s as f64 / n)]);
    dir.csv("survivors.csv", &["t", "survivors", "fraction"], rows)
}

pub fn write_sweep(dir: &mut ArtifactDir, sweep: &SweepResult) -> Result<(), CliError> {
    let rows = sweep.points.iter().map(|p| {
        vec![
            fmt_f64(p.sigma),
            fmt_f64(p.c_sigma),
            fmt_f64(p.std_error),
            p.n_survivors.to_string(),
            p.n_paths.to_string(),
            p.dropped.to_string(),
        ]
    });
    dir.csv("sweep.csv", &["sigma", "c_sigma", "std_error", "n_survivors", "n_paths", "dropped"], rows)
}
