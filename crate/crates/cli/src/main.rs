//! `vgne`: run the payoff-based learner, the exact oracles, the
//! diagnostics suite and the rate-fitting harness from the command line.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use vgne_core::builtin;
use vgne_core::config::{self, parse_real};
use vgne_core::diagnostics::{self, LemmaReport, SmoothingProbe};
use vgne_core::game::GameSpec;
use vgne_core::harness::{self, ExperimentConfig};
use vgne_core::learner::Cadence;
use vgne_core::oracle;

#[derive(Parser)]
#[command(name = "vgne", version, about = "Payoff-based learning of variational GNEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the learner over one or more seeds and write per-checkpoint errors.
    Learn(LearnArgs),
    /// Solve for the v-GNE (or a regularized solution) exactly.
    Oracle(OracleArgs),
    /// Run numerical checks of the estimator and regularization properties.
    Diagnose(DiagnoseArgs),
    /// Fit a log-log rate to a raw or aggregate CSV.
    RateFit(RateFitArgs),
    /// Compare sampling exponents s = 4/7, 2, 10 and write a plot script.
    #[command(name = "reproduce-fig1")]
    ReproduceFig1(Fig1Args),
}

fn real(s: &str) -> std::result::Result<f64, String> {
    parse_real(s)
}

#[derive(Args)]
struct ScheduleFlags {
    /// Step-size scale G in γ_t = G/t^g.
    #[arg(long = "G", value_parser = real)]
    gamma_scale: Option<f64>,
    /// Step-size exponent g (fractions such as 4/7 accepted).
    #[arg(long = "g", value_parser = real)]
    gamma_exp: Option<f64>,
    /// Regularization scale E in ε_t = E/t^e.
    #[arg(long = "E", value_parser = real)]
    eps_scale: Option<f64>,
    /// Regularization exponent e.
    #[arg(long = "e", value_parser = real)]
    eps_exp: Option<f64>,
    /// Sampling scale S in σ_t = S/t^s.
    #[arg(long = "S", value_parser = real)]
    sigma_scale: Option<f64>,
    /// Sampling exponent s.
    #[arg(long = "s", value_parser = real)]
    sigma_exp: Option<f64>,
}

#[derive(Args)]
struct RunFlags {
    /// Builtin game (paper-example, softplus-coupled, random:<seed>) or game file.
    #[arg(long)]
    game: Option<String>,
    /// Experiment TOML; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of iterations T.
    #[arg(long, short = 'T')]
    horizon: Option<u64>,
    /// Number of seeds.
    #[arg(long)]
    seeds: Option<u64>,
    /// First seed; seeds are base, base+1, ...
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Record every k-th iteration.
    #[arg(long, conflicts_with = "per_decade")]
    every: Option<u64>,
    /// Record about k log-spaced iterations per decade.
    #[arg(long)]
    per_decade: Option<u32>,
    /// Run even if the schedules violate the step-size conditions.
    #[arg(long)]
    allow_invalid_schedules: bool,
    #[command(flatten)]
    schedules: ScheduleFlags,
}

impl RunFlags {
    fn experiment(&self, default_horizon: u64, default_seeds: u64) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => config::load_experiment(path).with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::new(
                builtin::PAPER_EXAMPLE,
                Default::default(),
                default_horizon,
                (0..default_seeds).collect(),
            ),
        };
        if let Some(g) = &self.game {
            cfg.game = g.clone();
        }
        if let Some(t) = self.horizon {
            cfg.horizon = t;
        }
        if let Some(n) = self.seeds {
            cfg.seeds = (self.seed_base..self.seed_base + n).collect();
        } else if self.seed_base != 0 {
            let n = cfg.seeds.len() as u64;
            cfg.seeds = (self.seed_base..self.seed_base + n).collect();
        }
        if let Some(k) = self.every {
            cfg.cadence = Cadence::Every(k);
        }
        if let Some(k) = self.per_decade {
            cfg.cadence = Cadence::PerDecade(k);
        }
        cfg.allow_invalid_schedules |= self.allow_invalid_schedules;
        let s = &self.schedules;
        let sched = &mut cfg.schedules;
        for (flag, slot) in [
            (s.gamma_scale, &mut sched.gamma_scale),
            (s.gamma_exp, &mut sched.gamma_exp),
            (s.eps_scale, &mut sched.eps_scale),
            (s.eps_exp, &mut sched.eps_exp),
            (s.sigma_scale, &mut sched.sigma_scale),
            (s.sigma_exp, &mut sched.sigma_exp),
        ] {
            if let Some(v) = flag {
                *slot = v;
            }
        }
        if let Some(dir) = harness::output_dir_override() {
            cfg.output_dir = dir;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Places `path` inside the override directory when one is set.
fn output_path(path: &Path) -> PathBuf {
    match (harness::output_dir_override(), path.file_name()) {
        (Some(dir), Some(name)) => dir.join(name),
        _ => path.to_path_buf(),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    run: RunFlags,
    /// Per-seed CSV (t, seed, err_primal_sq, err_dual_sq, gamma, eps, sigma).
    /// Without it, raw and aggregate CSVs go to the configured output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn learn(args: &LearnArgs) -> Result<()> {
    let cfg = args.run.experiment(10_000, 1)?;
    let (series, written) = match &args.output {
        Some(path) => {
            let path = output_path(path);
            create_parent(&path)?;
            let game = config::load_game(&cfg.game)?;
            let (_, raw) = harness::run_seeds(&game, &cfg)?;
            harness::write_records(&path, &raw)?;
            let series: Vec<(u64, f64)> = harness::aggregate(&raw)
                .iter()
                .map(|r| (r.t, r.mean_err_primal_sq))
                .collect();
            (series, vec![path])
        }
        None => {
            let res = harness::run_experiment(&cfg)?;
            (res.series(), vec![res.raw_path.clone(), res.aggregate_path.clone()])
        }
    };
    let mut out = io::stdout().lock();
    if let Some(&(t, err)) = series.last() {
        writeln!(out, "mean err_primal_sq at t = {t}: {err:e} ({} seeds)", cfg.seeds.len())?;
    }
    let (t_min, t_max) = harness::default_fit_window(cfg.horizon);
    if let Ok(fit) = harness::fit_rate(&series, t_min, t_max) {
        writeln!(out, "log-log slope over [{t_min}, {t_max}]: {:.4} (R² {:.4})", fit.slope, fit.r_squared)?;
    }
    for path in written {
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

#[derive(Args)]
struct OracleArgs {
    /// Builtin game or game file.
    #[arg(long, default_value = builtin::PAPER_EXAMPLE)]
    game: String,
    /// Solve the regularized problem with this weight instead.
    #[arg(long, value_parser = real)]
    epsilon: Option<f64>,
    /// Active-set tolerance.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Also write the CSV block to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn oracle(args: &OracleArgs) -> Result<()> {
    let game = config::load_game(&args.game)?;
    let mut rows: Vec<(String, String, String)> = Vec::new();
    let mut text = String::new();
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
    let (primal, dual) = match args.epsilon {
        None => {
            let sol = oracle::solve_vgne(&game, args.tol)?;
            text.push_str(&format!("game: {}\n", game.name()));
            text.push_str(&format!("a* = [{}]\n", join(sol.primal.as_slice())));
            text.push_str(&format!("lambda* = [{}]\n", join(sol.dual.as_slice())));
            text.push_str(&format!("active set: {:?}\n", sol.active_set));
            text.push_str(&format!("stationarity residual: {:e}\n", sol.stationarity_residual));
            text.push_str(&format!("complementarity residual: {:e}\n", sol.complementarity_residual));
            text.push_str(&format!("feasibility violation: {:e}\n", sol.feasibility_violation));
            for j in &sol.active_set {
                rows.push(("active".into(), j.to_string(), "1".into()));
            }
            rows.push(("stationarity_residual".into(), String::new(), sol.stationarity_residual.to_string()));
            rows.push((
                "complementarity_residual".into(),
                String::new(),
                sol.complementarity_residual.to_string(),
            ));
            rows.push(("feasibility_violation".into(), String::new(), sol.feasibility_violation.to_string()));
            (sol.primal.into_vector(), sol.dual)
        }
        Some(eps) => {
            let sol = oracle::solve_regularized_vi(&game, eps, args.tol)?;
            text.push_str(&format!("game: {} (regularized, epsilon = {eps})\n", game.name()));
            text.push_str(&format!("a = [{}]\n", join(sol.primal.as_slice())));
            text.push_str(&format!("lambda = [{}]\n", join(sol.dual.as_slice())));
            text.push_str(&format!("stationarity residual: {:e}\n", sol.stationarity_residual));
            text.push_str(&format!("complementarity residual: {:e}\n", sol.complementarity_residual));
            text.push_str(&format!("feasibility violation: {:e}\n", sol.feasibility_violation));
            rows.push(("epsilon".into(), String::new(), eps.to_string()));
            rows.push(("stationarity_residual".into(), String::new(), sol.stationarity_residual.to_string()));
            rows.push((
                "complementarity_residual".into(),
                String::new(),
                sol.complementarity_residual.to_string(),
            ));
            rows.push(("feasibility_violation".into(), String::new(), sol.feasibility_violation.to_string()));
            (sol.primal.into_vector(), sol.dual)
        }
    };
    let mut all = Vec::new();
    for (k, v) in primal.iter().enumerate() {
        all.push(("primal".to_string(), k.to_string(), v.to_string()));
    }
    for (j, v) in dual.iter().enumerate() {
        all.push(("dual".to_string(), j.to_string(), v.to_string()));
    }
    all.extend(rows);

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["quantity", "index", "value"])?;
    for (q, i, v) in &all {
        writer.write_record([q, i, v])?;
    }
    let csv_bytes = writer.into_inner().context("flushing CSV")?;
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    writeln!(out)?;
    out.write_all(&csv_bytes)?;
    if let Some(path) = &args.csv {
        let path = output_path(path);
        create_parent(&path)?;
        std::fs::write(&path, &csv_bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
enum Check {
    /// Strong monotonicity of the plain and regularized extended operator.
    Monotonicity,
    /// Distance of regularized solutions to the v-GNE.
    Lemma3,
    /// Drift of regularized solutions along ε_t = t^{-2/7}.
    Lemma4,
    /// Unbiasedness of the two-point estimate.
    Lemma6,
    /// Quadratic growth of the estimate's second moment.
    Lemma7,
    /// Dual sampling term and smoothing bias order.
    Lemma8,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Quadratic game for the exact-oracle and estimator checks.
    #[arg(long, default_value = builtin::PAPER_EXAMPLE)]
    game: String,
    /// Non-quadratic game for the smoothing-bias slope.
    #[arg(long, default_value = builtin::SOFTPLUS_COUPLED)]
    smooth_game: String,
    /// Checks to run (repeatable); all when omitted.
    #[arg(long = "lemma", value_enum)]
    lemmas: Vec<Check>,
    /// Monte Carlo draws for the estimator checks.
    #[arg(long, default_value_t = diagnostics::DEFAULT_SAMPLES)]
    samples: usize,
    /// Draws per radius for the smoothing-bias slope.
    #[arg(long, default_value_t = 4_000_000)]
    q_samples: usize,
    /// Random pairs for the monotonicity check.
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    /// Sampling radius for the estimator checks.
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probe mean (comma separated); defaults to the v-GNE shifted by ±0.25.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mu: Option<Vec<f64>>,
    /// Probe dual (comma separated); defaults to λ* + 0.5.
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    /// Also write the report to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Exit with status 1 if any check fails.
    #[arg(long)]
    strict: bool,
}

const DISTANCE_GRID: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
const Q_SIGMAS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
const GROWTH_SCALES: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

fn probe_point(game: &GameSpec, args: &DiagnoseArgs) -> Result<(Vec<f64>, Vec<f64>)> {
    let reference = harness::reference_solution(game)?;
    let mu = match &args.mu {
        Some(v) => v.clone(),
        None => reference
            .primal
            .iter()
            .enumerate()
            .map(|(k, v)| v + if k % 2 == 0 { 0.25 } else { -0.25 })
            .collect(),
    };
    let lambda = match &args.lambda {
        Some(v) => v.clone(),
        None => reference.dual.iter().map(|v| v + 0.5).collect(),
    };
    Ok((mu, lambda))
}

fn diagnose(args: &DiagnoseArgs) -> Result<bool> {
    let checks: Vec<Check> = if args.lemmas.is_empty() {
        Check::value_variants().to_vec()
    } else {
        let mut v = args.lemmas.clone();
        v.sort();
        v.dedup();
        v
    };
    let game = config::load_game(&args.game)?;
    let needs_probe = checks.iter().any(|c| matches!(c, Check::Lemma6 | Check::Lemma7 | Check::Lemma8));
    let probe = if needs_probe {
        let (mu, lambda) = probe_point(&game, args)?;
        Some(SmoothingProbe::new(
            game.action(&mu)?,
            DVector::from_vec(lambda),
            args.sigma,
            args.samples,
            args.seed,
        )?)
    } else {
        None
    };
    let mut report = LemmaReport::default();
    for check in checks {
        match check {
            Check::Monotonicity => {
                report.extend(diagnostics::operator_inequality_report(&game, args.pairs, 1.0, 0.5, args.seed)?)
            }
            Check::Lemma3 => report.extend(diagnostics::regularization_path_report(&game, &DISTANCE_GRID)?),
            Check::Lemma4 => report.extend(diagnostics::drift_schedule_report(&game, 1.0, 2.0 / 7.0, 200)?),
            Check::Lemma6 => report.extend(diagnostics::unbiasedness_report(&game, probe.as_ref().unwrap())?),
            Check::Lemma7 => report.extend(diagnostics::second_moment_growth_report(
                &game,
                probe.as_ref().unwrap(),
                &GROWTH_SCALES,
            )?),
            Check::Lemma8 => {
                report.extend(diagnostics::s_term_report(&game, probe.as_ref().unwrap())?);
                let smooth = config::load_game(&args.smooth_game)?;
                let (mu, lambda) = if smooth.name() == builtin::SOFTPLUS_COUPLED {
                    (builtin::SOFTPLUS_ANCHOR.to_vec(), vec![1.0])
                } else {
                    let r = harness::reference_solution(&smooth)?;
                    (r.primal.as_slice().to_vec(), r.dual.as_slice().to_vec())
                };
                report.extend(diagnostics::q_term_report(
                    &smooth,
                    &smooth.action(&mu)?,
                    &DVector::from_vec(lambda),
                    &Q_SIGMAS,
                    args.q_samples,
                    args.seed,
                )?);
            }
        }
    }

    let mut writer = csv::Writer::from_writer(Vec::new());
    for check in &report.checks {
        writer.serialize(check)?;
    }
    let bytes = writer.into_inner().context("flushing CSV")?;
    io::stdout().lock().write_all(&bytes)?;
    if let Some(path) = &args.csv {
        let path = output_path(path);
        create_parent(&path)?;
        std::fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    let failed = report.failures().count();
    eprintln!("{} checks, {failed} failed", report.checks.len());
    Ok(failed == 0)
}

#[derive(Args)]
struct RateFitArgs {
    /// Raw (per-seed) or aggregate CSV produced by `learn`.
    input: PathBuf,
    /// Start of the fit window; defaults to max(1000, T/100).
    #[arg(long)]
    t_min: Option<u64>,
    /// End of the fit window; defaults to the last checkpoint T.
    #[arg(long)]
    t_max: Option<u64>,
}

fn rate_fit(args: &RateFitArgs) -> Result<()> {
    let series = harness::read_series(&args.input)?;
    let Some(&(last, _)) = series.last() else {
        bail!("{} has no rows", args.input.display());
    };
    let (default_min, default_max) = harness::default_fit_window(last);
    let fit = harness::fit_rate(
        &series,
        args.t_min.unwrap_or(default_min),
        args.t_max.unwrap_or(default_max),
    )?;
    let mut writer = csv::Writer::from_writer(io::stdout().lock());
    writer.serialize(fit)?;
    writer.flush()?;
    Ok(())
}

#[derive(Args)]
struct Fig1Args {
    /// Builtin game or game file.
    #[arg(long, default_value = builtin::PAPER_EXAMPLE)]
    game: String,
    #[arg(long, short = 'T', default_value_t = 100_000)]
    horizon: u64,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[arg(long, default_value_t = 20)]
    per_decade: u32,
    /// Directory for the CSVs and fig1.py.
    #[arg(long, default_value = "fig1")]
    output_dir: PathBuf,
    /// Step-size scale G.
    #[arg(long = "G", value_parser = real, default_value = "1")]
    gamma_scale: f64,
    /// Regularization scale E.
    #[arg(long = "E", value_parser = real, default_value = "1")]
    eps_scale: f64,
    /// Sampling scale S.
    #[arg(long = "S", value_parser = real, default_value = "1")]
    sigma_scale: f64,
}

fn reproduce_fig1(args: &Fig1Args) -> Result<()> {
    let mut cfg = ExperimentConfig::new(
        args.game.clone(),
        Default::default(),
        args.horizon,
        (args.seed_base..args.seed_base + args.seeds).collect(),
    );
    cfg.schedules.gamma_scale = args.gamma_scale;
    cfg.schedules.eps_scale = args.eps_scale;
    cfg.schedules.sigma_scale = args.sigma_scale;
    cfg.cadence = Cadence::PerDecade(args.per_decade);
    cfg.output_dir = harness::output_dir_override().unwrap_or_else(|| args.output_dir.clone());
    cfg.label = "fig1".into();
    let res = harness::reproduce_fig1(&cfg)?;
    let mut out = io::stdout().lock();
    for (run, (_, s)) in res.runs.iter().zip(harness::FIG1_VARIANTS) {
        let last = run.aggregate.last().map(|r| r.mean_err_primal_sq).unwrap_or(f64::NAN);
        writeln!(out, "s = {s:.4}: mean err_primal_sq at T = {}: {last:e}", args.horizon)?;
        writeln!(out, "  wrote {}", run.aggregate_path.display())?;
    }
    if let Some(fit) = res.fit {
        writeln!(
            out,
            "s = 4/7 slope over [{}, {}]: {:.4} (R² {:.4})",
            fit.t_min, fit.t_max, fit.slope, fit.r_squared
        )?;
    }
    writeln!(out, "plot script: {}", res.plot_script.display())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Learn(a) => learn(a).map(|_| true),
        Command::Oracle(a) => oracle(a).map(|_| true),
        Command::Diagnose(a) => diagnose(a).map(|ok| ok || !a.strict),
        Command::RateFit(a) => rate_fit(a).map(|_| true),
        Command::ReproduceFig1(a) => reproduce_fig1(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
