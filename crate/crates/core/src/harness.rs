//! Multi-seed experiments, aggregation, rate fitting and plot scripts.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::learner::{run, Cadence, Record, Reference, RunConfig, Schedules};
use crate::oracle::{extragradient, solve_vgne};

/// Environment variable that overrides every configured output directory.
pub const OUTPUT_DIR_ENV: &str = "VGNE_OUTPUT_DIR";

/// Minimum checkpoints inside a fit window.
pub const MIN_FIT_POINTS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Builtin game name or path to a game file.
    pub game: String,
    pub schedules: Schedules,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub cadence: Cadence,
    pub output_dir: PathBuf,
    /// File stem of the outputs: `<label>_raw.csv`, `<label>_aggregate.csv`.
    pub label: String,
    pub allow_invalid_schedules: bool,
}

impl ExperimentConfig {
    pub fn new(game: impl Into<String>, schedules: Schedules, horizon: u64, seeds: Vec<u64>) -> Self {
        Self {
            game: game.into(),
            schedules,
            horizon,
            seeds,
            cadence: Cadence::default(),
            output_dir: PathBuf::from("."),
            label: "experiment".into(),
            allow_invalid_schedules: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(Error::Config("seed list contains duplicates".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.label.is_empty()
            || !self.label.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        {
            return Err(Error::Config(format!(
                "label {:?} must be nonempty and use only letters, digits, '-', '_' or '.'",
                self.label
            )));
        }
        if !self.allow_invalid_schedules {
            let report = self.schedules.validate();
            if !report.is_valid() {
                return Err(Error::InvalidSchedules(report.failures().join(", ")));
            }
        }
        Ok(())
    }

    pub fn raw_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}_raw.csv", self.label))
    }

    pub fn aggregate_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}_aggregate.csv", self.label))
    }
}

/// Output directory from [`OUTPUT_DIR_ENV`] when set and nonempty.
pub fn output_dir_override() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// Mean and standard error across seeds at one checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub t: u64,
    pub seeds: usize,
    pub mean_err_primal_sq: f64,
    pub se_err_primal_sq: f64,
    pub mean_err_dual_sq: f64,
    pub se_err_dual_sq: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub label: String,
    pub reference: Reference,
    /// Per-seed records, ordered by seed then `t`.
    pub raw: Vec<Record>,
    pub aggregate: Vec<AggregateRow>,
    pub raw_path: PathBuf,
    pub aggregate_path: PathBuf,
}

impl ExperimentResult {
    /// `(t, mean err_primal_sq)` pairs.
    pub fn series(&self) -> Vec<(u64, f64)> {
        self.aggregate.iter().map(|r| (r.t, r.mean_err_primal_sq)).collect()
    }

    pub fn mean_at(&self, t: u64) -> Option<f64> {
        self.aggregate.iter().find(|r| r.t == t).map(|r| r.mean_err_primal_sq)
    }
}

/// The v-GNE of `game`: exact for quadratic games, extragradient otherwise.
pub fn reference_solution(game: &GameSpec) -> Result<Reference> {
    if game.as_quadratic().is_some() {
        let sol = solve_vgne(game, 1e-12)?;
        Ok(Reference {
            primal: sol.primal.into_vector(),
            dual: sol.dual,
        })
    } else {
        let sol = extragradient(game, 0.0, 1e-10, 5_000_000)?;
        Ok(Reference {
            primal: sol.primal.into_vector(),
            dual: sol.dual,
        })
    }
}

fn ensure_writable(dir: &Path) -> Result<()> {
    let wrap = |source| Error::OutputDir {
        path: dir.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(wrap)?;
    let probe = dir.join(format!(".vgne-write-probe-{}", std::process::id()));
    fs::File::create(&probe).map_err(wrap)?;
    fs::remove_file(&probe).map_err(wrap)?;
    Ok(())
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates per-seed records. Records are ordered by seed first, so the
/// result does not depend on the order in which they are supplied.
pub fn aggregate(records: &[Record]) -> Vec<AggregateRow> {
    let mut sorted = records.to_vec();
    sorted.sort_by_key(|r| (r.t, r.seed));
    sorted
        .chunk_by(|a, b| a.t == b.t)
        .map(|group| {
            let primal: Vec<f64> = group.iter().map(|r| r.err_primal_sq).collect();
            let dual: Vec<f64> = group.iter().map(|r| r.err_dual_sq).collect();
            let (mp, sp) = mean_and_se(&primal);
            let (md, sd) = mean_and_se(&dual);
            AggregateRow {
                t: group[0].t,
                seeds: group.len(),
                mean_err_primal_sq: mp,
                se_err_primal_sq: sp,
                mean_err_dual_sq: md,
                se_err_dual_sq: sd,
            }
        })
        .collect()
}

pub fn write_records<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Resolves the game and runs every seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let game = config::load_game(&cfg.game)?;
    run_experiment_on(&game, cfg)
}

/// Runs every seed of `cfg` on `game` in parallel and writes the raw and
/// aggregate CSVs. Fails before running anything if the output directory
/// cannot be written.
pub fn run_experiment_on(game: &GameSpec, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    ensure_writable(&cfg.output_dir)?;
    let (reference, raw) = run_seeds(game, cfg)?;
    let aggregate = aggregate(&raw);
    let (raw_path, aggregate_path) = (cfg.raw_path(), cfg.aggregate_path());
    write_records(&raw_path, &raw)?;
    write_records(&aggregate_path, &aggregate)?;
    Ok(ExperimentResult {
        label: cfg.label.clone(),
        reference,
        raw,
        aggregate,
        raw_path,
        aggregate_path,
    })
}

/// Runs every seed of `cfg` on `game` without writing anything. Records
/// are ordered by seed then `t`.
pub fn run_seeds(game: &GameSpec, cfg: &ExperimentConfig) -> Result<(Reference, Vec<Record>)> {
    cfg.validate()?;
    let reference = reference_solution(game)?;
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    let trajectories = seeds
        .par_iter()
        .map(|&seed| {
            let mut run_cfg = RunConfig::new(cfg.schedules, cfg.horizon, seed);
            run_cfg.cadence = cfg.cadence;
            run_cfg.allow_invalid_schedules = cfg.allow_invalid_schedules;
            run(game, &run_cfg, &reference)
        })
        .collect::<Result<Vec<_>>>()?;
    let raw = trajectories.into_iter().flat_map(|t| t.records).collect();
    Ok((reference, raw))
}

/// Least-squares line through log-log data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub t_min: u64,
    pub t_max: u64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`; returns
/// `(slope, intercept, R²)`. `R²` is 1 when `y` is constant.
pub fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// `[max(10³, T/100), T]`.
pub fn default_fit_window(horizon: u64) -> (u64, u64) {
    (1000.max(horizon / 100), horizon)
}

/// Fits `log err = slope·log t + intercept` over checkpoints with
/// `t_min ≤ t ≤ t_max`.
pub fn fit_rate(series: &[(u64, f64)], t_min: u64, t_max: u64) -> Result<RateFit> {
    if t_min >= t_max {
        return Err(Error::InvalidArgument(format!("fit window needs t_min < t_max, got [{t_min}, {t_max}]")));
    }
    let window: Vec<(u64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= t_min && t <= t_max)
        .collect();
    if window.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidArgument(format!(
            "fit window [{t_min}, {t_max}] holds {} checkpoints, need at least {MIN_FIT_POINTS}",
            window.len()
        )));
    }
    if let Some(&(t, v)) = window.iter().find(|&&(_, v)| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!("non-positive error {v} at t = {t}")));
    }
    let xs: Vec<f64> = window.iter().map(|&(t, _)| (t as f64).ln()).collect();
    let ys: Vec<f64> = window.iter().map(|&(_, v)| v.ln()).collect();
    let (slope, intercept, r_squared) = least_squares_line(&xs, &ys);
    Ok(RateFit {
        slope,
        intercept,
        t_min,
        t_max,
        r_squared,
    })
}

/// Reads `(t, mean err_primal_sq)` from an aggregate CSV, or averages
/// `err_primal_sq` over seeds from a raw CSV.
pub fn read_series(path: &Path) -> Result<Vec<(u64, f64)>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().any(|h| h == "mean_err_primal_sq") {
        let rows = reader.deserialize::<AggregateRow>().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(rows.iter().map(|r| (r.t, r.mean_err_primal_sq)).collect())
    } else if headers.iter().any(|h| h == "err_primal_sq") {
        let rows = reader.deserialize::<Record>().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(aggregate(&rows).iter().map(|r| (r.t, r.mean_err_primal_sq)).collect())
    } else {
        Err(Error::Config(format!(
            "{} has neither a mean_err_primal_sq nor an err_primal_sq column",
            path.display()
        )))
    }
}

/// One curve of a plot: a label and an aggregate CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub aggregate_csv: PathBuf,
}

fn relative_to(path: &Path, base: &Path) -> PathBuf {
    path.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| path.to_path_buf())
}

fn python_str(s: &str) -> String {
    format!("{s:?}")
}

/// Writes a matplotlib script drawing mean `err_primal_sq` against `t` on
/// log-log axes, one curve per series. CSV paths inside the script are
/// relative to the script's directory when possible.
pub fn emit_plot_script(series: &[PlotSeries], output: &Path) -> Result<()> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("nothing to plot".into()));
    }
    let base = output.parent().unwrap_or(Path::new(""));
    let mut script = String::from(
        "#!/usr/bin/env python3\n\
         import csv\n\
         import os\n\
         \n\
         import matplotlib\n\
         matplotlib.use(\"Agg\")\n\
         import matplotlib.pyplot as plt\n\
         \n\
         HERE = os.path.dirname(os.path.abspath(__file__))\n\
         SERIES = [\n",
    );
    for s in series {
        let rel = relative_to(&s.aggregate_csv, base);
        script.push_str(&format!(
            "    ({}, {}),\n",
            python_str(&s.label),
            python_str(&rel.to_string_lossy())
        ));
    }
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    script.push_str(&format!(
        "]\n\
         \n\
         fig, ax = plt.subplots(figsize=(6, 4))\n\
         for label, path in SERIES:\n\
         \x20   with open(os.path.join(HERE, path)) as fh:\n\
         \x20       rows = list(csv.DictReader(fh))\n\
         \x20   t = [int(r[\"t\"]) for r in rows]\n\
         \x20   err = [float(r[\"mean_err_primal_sq\"]) for r in rows]\n\
         \x20   ax.loglog(t, err, label=label)\n\
         ax.set_xlabel(\"iteration t\")\n\
         ax.set_ylabel(\"mean squared distance to equilibrium\")\n\
         ax.legend()\n\
         fig.tight_layout()\n\
         fig.savefig(os.path.join(HERE, {}))\n",
        python_str(&format!("{stem}.png"))
    ));
    let mut file = fs::File::create(output)?;
    file.write_all(script.as_bytes())?;
    Ok(())
}

/// Sampling exponents of the three-curve comparison, with file labels.
pub const FIG1_VARIANTS: [(&str, f64); 3] = [("s-4-7", 4.0 / 7.0), ("s-2", 2.0), ("s-10", 10.0)];

#[derive(Clone, Debug, PartialEq)]
pub struct Fig1Result {
    pub runs: Vec<ExperimentResult>,
    pub plot_script: PathBuf,
    /// Fit of the `s = 4/7` curve over the default window.
    pub fit: Option<RateFit>,
}

/// Runs the sampling-exponent comparison on `base.game` with `g = 4/7`,
/// `e = 2/7` and the scales of `base.schedules`, then writes `fig1.py`.
pub fn reproduce_fig1(base: &ExperimentConfig) -> Result<Fig1Result> {
    let mut runs = Vec::new();
    for (label, s) in FIG1_VARIANTS {
        let mut cfg = base.clone();
        cfg.schedules = Schedules {
            gamma_exp: 4.0 / 7.0,
            eps_exp: 2.0 / 7.0,
            sigma_exp: s,
            ..base.schedules
        };
        cfg.label = format!("{}_{label}", base.label);
        runs.push(run_experiment(&cfg)?);
    }
    let plot_script = base.output_dir.join("fig1.py");
    let series: Vec<PlotSeries> = runs
        .iter()
        .zip(FIG1_VARIANTS)
        .map(|(r, (_, s))| PlotSeries {
            label: format!("s = {}", fraction_label(s)),
            aggregate_csv: r.aggregate_path.clone(),
        })
        .collect();
    emit_plot_script(&series, &plot_script)?;
    let (t_min, t_max) = default_fit_window(base.horizon);
    let fit = fit_rate(&runs[0].series(), t_min, t_max).ok();
    Ok(Fig1Result { runs, plot_script, fit })
}

fn fraction_label(v: f64) -> String {
    if (v - 4.0 / 7.0).abs() < 1e-12 {
        "4/7".into()
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(dir: &Path, seeds: Vec<u64>) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new("paper-example", Schedules::default(), 10, seeds);
        cfg.cadence = Cadence::Every(1);
        cfg.output_dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn single_seed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let res = run_experiment(&tiny(dir.path(), vec![3])).unwrap();
        assert_eq!(res.raw.len(), 10);
        assert_eq!(res.aggregate.len(), 10);
        assert!(res.aggregate[0].se_err_primal_sq.is_nan());
        assert_eq!(read_series(&res.raw_path).unwrap(), res.series());
        assert_eq!(read_series(&res.aggregate_path).unwrap(), res.series());
    }

    #[test]
    fn aggregation_ignores_seed_order() {
        let dir = tempfile::tempdir().unwrap();
        let a = run_experiment(&tiny(dir.path(), vec![1, 2, 3, 4])).unwrap();
        let first = fs::read(&a.aggregate_path).unwrap();
        let b = run_experiment(&tiny(dir.path(), vec![4, 2, 1, 3])).unwrap();
        assert_eq!(a.aggregate, b.aggregate);
        assert_eq!(first, fs::read(&b.aggregate_path).unwrap());
        let mut shuffled = a.raw.clone();
        shuffled.reverse();
        assert_eq!(aggregate(&shuffled), a.aggregate);
    }

    #[test]
    fn config_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(run_experiment(&tiny(dir.path(), vec![])).is_err());
        assert!(run_experiment(&tiny(dir.path(), vec![1, 1])).is_err());
        let mut cfg = tiny(dir.path(), vec![1]);
        cfg.label = "../x".into();
        assert!(cfg.validate().is_err());
        let mut cfg = tiny(dir.path(), vec![1]);
        cfg.schedules.gamma_exp = 0.5;
        assert!(matches!(cfg.validate(), Err(Error::InvalidSchedules(_))));
        cfg.allow_invalid_schedules = true;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn unwritable_output_fails_first() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let cfg = tiny(&blocker.join("sub"), vec![1]);
        assert!(matches!(run_experiment(&cfg), Err(Error::OutputDir { .. })));
    }

    #[test]
    fn planted_exponent() {
        let series: Vec<(u64, f64)> = (0..40)
            .map(|k| {
                let t = (10f64.powf(3.0 + k as f64 / 20.0)).round() as u64;
                (t, 7.0 / (t as f64).powf(4.0 / 7.0))
            })
            .collect();
        let fit = fit_rate(&series, 1000, 100_000).unwrap();
        assert!((fit.slope + 4.0 / 7.0).abs() < 1e-6);
        assert!((fit.intercept - 7f64.ln()).abs() < 1e-6);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn fit_edge_cases() {
        let flat: Vec<(u64, f64)> = (1..=10).map(|t| (t * 100, 0.3)).collect();
        let fit = fit_rate(&flat, 100, 1000).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert!(fit_rate(&flat, 100, 300).is_err());
        assert!(fit_rate(&flat, 500, 500).is_err());
        let mut bad = flat.clone();
        bad[3].1 = 0.0;
        assert!(fit_rate(&bad, 100, 1000).is_err());
    }

    #[test]
    fn default_window() {
        assert_eq!(default_fit_window(100_000), (1000, 100_000));
        assert_eq!(default_fit_window(10_000_000), (100_000, 10_000_000));
    }

    #[test]
    fn plot_script_lists_series() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("plot.py");
        let series = vec![
            PlotSeries {
                label: "a".into(),
                aggregate_csv: dir.path().join("a_aggregate.csv"),
            },
            PlotSeries {
                label: "b".into(),
                aggregate_csv: dir.path().join("b_aggregate.csv"),
            },
        ];
        emit_plot_script(&series, &out).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        assert!(text.contains("(\"a\", \"a_aggregate.csv\")"));
        assert!(text.contains("(\"b\", \"b_aggregate.csv\")"));
        assert!(!text.contains(&dir.path().to_string_lossy().to_string()));
        assert!(emit_plot_script(&[], &out).is_err());
    }
}
