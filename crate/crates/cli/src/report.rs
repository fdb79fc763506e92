//! Report emission: metric rows, calibration rows, sample dumps, and grid
//! dumps with their PNG renders. All numeric formatting is fixed so a rerun
//! with the same config reproduces every artifact byte for byte.

use crate::config::ExperimentConfig;
use anyhow::{Context, Result};
use induced::grid::GridDensity;
use induced::heatmap::write_values_png;
use induced::{KlDivergence, Point, ScoreField};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Formats a metric value; infinite KL is written as a flag string, never a
/// large float.
pub fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.6e}")
    }
}

pub fn kl_value(kl: KlDivergence) -> f64 {
    match kl {
        KlDivergence::Finite(v) => v,
        KlDivergence::Infinite => f64::INFINITY,
    }
}

/// One metric row with the config echo columns.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub experiment: &'static str,
    pub method: String,
    pub target_m: String,
    pub metric: String,
    pub value: f64,
}

pub struct Report {
    out_dir: PathBuf,
    cfg_hash: String,
    master_seed: u64,
    n_echo: usize,
    kde_h: f64,
    grid_echo: String,
    rows: Vec<ReportRow>,
    calibrations: Vec<String>,
}

impl Report {
    pub fn new(cfg: &ExperimentConfig, out_dir: &Path, master_seed: u64) -> Result<Self> {
        fs::create_dir_all(out_dir)
            .with_context(|| format!("creating output dir {}", out_dir.display()))?;
        Ok(Report {
            out_dir: out_dir.to_path_buf(),
            cfg_hash: cfg.hash(),
            master_seed,
            n_echo: cfg.samplers.sampler_n,
            kde_h: cfg.kde.bandwidth,
            grid_echo: cfg.grid_echo(),
            rows: Vec::new(),
            calibrations: Vec::new(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    /// First value matching (experiment, method, target, metric), if any.
    pub fn value(&self, method: &str, target: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.target_m == target && r.metric == metric)
            .map(|r| r.value)
    }

    pub fn push(
        &mut self,
        experiment: &'static str,
        method: impl Into<String>,
        target_m: impl Into<String>,
        metric: impl Into<String>,
        value: f64,
    ) {
        self.rows.push(ReportRow {
            experiment,
            method: method.into(),
            target_m: target_m.into(),
            metric: metric.into(),
            value,
        });
    }

    pub fn push_calibration(
        &mut self,
        family: &str,
        target_m: f64,
        cal: &induced::constraints::CalibrationResult,
    ) {
        let ess = cal.ess.map(fmt_value).unwrap_or_default();
        self.calibrations.push(format!(
            "{family},{target_m},{},{},{},{ess}",
            fmt_value(cal.knob),
            fmt_value(cal.achieved_mean),
            cal.iterations
        ));
    }

    /// Write `metrics.csv` (and `calibration.csv` when any calibration ran).
    pub fn write_csv(&self, name: &str) -> Result<PathBuf> {
        let mut text =
            String::from("experiment,method,target_m,metric,value,master_seed,n,kde_h,grid,config_hash\n");
        for row in &self.rows {
            writeln!(
                text,
                "{},{},{},{},{},{},{},{},{},{}",
                row.experiment,
                row.method,
                row.target_m,
                row.metric,
                fmt_value(row.value),
                self.master_seed,
                self.n_echo,
                self.kde_h,
                self.grid_echo,
                self.cfg_hash
            )?;
        }
        let path = self.out_dir.join(name);
        fs::write(&path, text)?;

        if !self.calibrations.is_empty() {
            let mut text = String::from("family,target_m,knob,achieved_mean,iterations,ess\n");
            for line in &self.calibrations {
                writeln!(text, "{line}")?;
            }
            fs::write(self.out_dir.join("calibration.csv"), text)?;
        }
        Ok(path)
    }

    /// Dump a grid density to CSV and render its PNG from the re-parsed dump,
    /// so the image is a pure function of the dump file.
    pub fn emit_heatmap(&self, name: &str, density: &GridDensity) -> Result<()> {
        let dump_path = self.out_dir.join(format!("{name}.grid.csv"));
        write_grid_dump(&dump_path, density)?;
        let (nx, ny, values) = read_grid_dump(&dump_path)?;
        write_values_png(&values, nx, ny, &self.out_dir.join(format!("{name}.png")))?;
        Ok(())
    }

    /// Dump and render raw nonnegative cell values (score fields and other
    /// non-density panels).
    pub fn emit_heatmap_raw(
        &self,
        name: &str,
        values: &[f64],
        nx: usize,
        ny: usize,
        grid: &induced::Grid2D,
    ) -> Result<()> {
        let dump_path = self.out_dir.join(format!("{name}.grid.csv"));
        let mut text = format!(
            "# nx={} ny={} xmin={} xmax={} ymin={} ymax={}\n",
            nx, ny, grid.xmin, grid.xmax, grid.ymin, grid.ymax
        );
        for row in values.chunks(nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.9e}")).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        fs::write(&dump_path, text)?;
        let (nx, ny, parsed) = read_grid_dump(&dump_path)?;
        write_values_png(&parsed, nx, ny, &self.out_dir.join(format!("{name}.png")))?;
        Ok(())
    }

    /// Sample dump in the shared schema `x,y,score,weight`.
    pub fn emit_samples(
        &self,
        name: &str,
        points: &[Point],
        score: &ScoreField,
        weights: Option<&[f64]>,
    ) -> Result<()> {
        let mut text = String::from("x,y,score,weight\n");
        let uniform = 1.0 / points.len() as f64;
        for (i, p) in points.iter().enumerate() {
            let w = weights.map(|w| w[i]).unwrap_or(uniform);
            writeln!(
                text,
                "{:.9e},{:.9e},{:.9e},{:.9e}",
                p.x,
                p.y,
                score.eval(*p),
                w
            )?;
        }
        fs::write(self.out_dir.join(format!("{name}.csv")), text)?;
        Ok(())
    }
}

pub fn write_grid_dump(path: &Path, density: &GridDensity) -> Result<()> {
    let grid = density.grid();
    let mut text = format!(
        "# nx={} ny={} xmin={} xmax={} ymin={} ymax={}\n",
        grid.nx, grid.ny, grid.xmin, grid.xmax, grid.ymin, grid.ymax
    );
    for row in density.values().chunks(grid.nx) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.9e}")).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_grid_dump(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().context("empty grid dump")?;
    let mut nx = 0;
    let mut ny = 0;
    for token in header.trim_start_matches('#').split_whitespace() {
        if let Some(v) = token.strip_prefix("nx=") {
            nx = v.parse()?;
        }
        if let Some(v) = token.strip_prefix("ny=") {
            ny = v.parse()?;
        }
    }
    let mut values = Vec::with_capacity(nx * ny);
    for line in lines {
        for field in line.split(',') {
            values.push(field.parse::<f64>()?);
        }
    }
    anyhow::ensure!(values.len() == nx * ny, "grid dump size mismatch");
    Ok((nx, ny, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use induced::Grid2D;

    #[test]
    fn grid_dump_round_trip() {
        let grid = Grid2D::new(-1.0, 1.0, -1.0, 1.0, 20, 10);
        let values: Vec<f64> = (0..grid.len()).map(|i| 1.0 + (i % 13) as f64).collect();
        let density = GridDensity::from_values(grid, values).unwrap();
        let dir = std::env::temp_dir().join("induced_report_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("dump.grid.csv");
        write_grid_dump(&path, &density).unwrap();
        let (nx, ny, parsed) = read_grid_dump(&path).unwrap();
        assert_eq!((nx, ny), (20, 10));
        for (a, b) in parsed.iter().zip(density.values()) {
            assert!((a - b).abs() <= b.abs() * 1e-9);
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn infinite_values_flagged() {
        assert_eq!(fmt_value(f64::INFINITY), "inf");
        assert!(fmt_value(0.5).contains('e'));
    }
}
