//! Numerical checks of the estimator and regularization properties.
//!
//! Every check is deterministic given its inputs and seed. Monte Carlo
//! checks accept within four standard errors unless stated otherwise.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::augmented::extended_raw;
use crate::error::{check_len, Error, Result};
use crate::game::{GameSpec, JointAction};
use crate::harness::least_squares_line;
use crate::learner::two_point_estimate;
use crate::oracle::{solve_regularized_vi, solve_vgne};

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const STD_ERROR_BAND: f64 = 4.0;

/// A Gaussian mixed strategy around `(μ, λ)` and how to sample it.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothingProbe {
    pub mu: JointAction,
    pub lambda: DVector<f64>,
    pub sigma: f64,
    pub num_samples: usize,
    pub seed: u64,
    /// Pair every draw `ξ` with `−ξ`. Both members are exact Gaussian
    /// draws, so sample means stay unbiased; statistics are computed over
    /// pair averages.
    pub antithetic: bool,
}

impl SmoothingProbe {
    pub fn new(mu: JointAction, lambda: DVector<f64>, sigma: f64, num_samples: usize, seed: u64) -> Result<Self> {
        let probe = Self {
            mu,
            lambda,
            sigma,
            num_samples,
            seed,
            antithetic: false,
        };
        probe.validate()?;
        Ok(probe)
    }

    pub fn antithetic(mut self) -> Self {
        self.antithetic = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.num_samples == 0 {
            return Err(Error::InvalidArgument("num_samples must be at least 1".into()));
        }
        Ok(())
    }

    fn check(&self, game: &GameSpec) -> Result<()> {
        self.validate()?;
        check_len("joint action", game.dim(), self.mu.dim())?;
        check_len("dual variable", game.num_constraints(), self.lambda.len())
    }

    /// Calls `visit` once per independent unit (a draw, or an antithetic
    /// pair passed as two actions).
    fn for_each_draw<F: FnMut(&[JointAction])>(&self, mut visit: F) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let d = self.mu.dim();
        let mu = self.mu.as_vector();
        let units = if self.antithetic {
            (self.num_samples / 2).max(1)
        } else {
            self.num_samples
        };
        for _ in 0..units {
            let xi = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let plus = self.mu.with_flat(mu + &xi * self.sigma).expect("same layout");
            if self.antithetic {
                let minus = self.mu.with_flat(mu - &xi * self.sigma).expect("same layout");
                visit(&[plus, minus]);
            } else {
                visit(&[plus]);
            }
        }
    }
}

/// Running mean and variance (Welford).
#[derive(Clone, Debug)]
struct Moments {
    count: usize,
    mean: DVector<f64>,
    m2: DVector<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: DVector::zeros(dim),
            m2: DVector::zeros(dim),
        }
    }

    fn push(&mut self, x: &DVector<f64>) {
        self.count += 1;
        let delta = x - &self.mean;
        self.mean += &delta / self.count as f64;
        let delta2 = x - &self.mean;
        self.m2 += delta.component_mul(&delta2);
    }

    fn std_error(&self) -> DVector<f64> {
        if self.count < 2 {
            return DVector::from_element(self.mean.len(), f64::INFINITY);
        }
        let n = self.count as f64;
        self.m2.map(|v| (v / (n - 1.0) / n).sqrt())
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

fn lagrangian(game: &GameSpec, i: usize, a: &JointAction, lambda: &DVector<f64>) -> f64 {
    let cs = game.constraints();
    game.cost_raw(i, a.as_slice()) + lambda.dot(&(cs.k() * a.as_vector() - cs.l()))
}

/// Monte Carlo value of the smoothed Lagrangian `E[U^i(x, λ)]`,
/// `x ~ N(μ, σ²I)`.
pub fn smoothed_cost(game: &GameSpec, probe: &SmoothingProbe, i: usize) -> Result<MonteCarloEstimate> {
    probe.check(game)?;
    game.check_player(i)?;
    let mut moments = Moments::new(1);
    probe.for_each_draw(|draws| {
        let v = draws.iter().map(|a| lagrangian(game, i, a, &probe.lambda)).sum::<f64>() / draws.len() as f64;
        moments.push(&DVector::from_element(1, v));
    });
    Ok(MonteCarloEstimate {
        mean: moments.mean[0],
        std_error: moments.std_error()[0],
        samples: probe.num_samples,
    })
}

/// Sample statistics of the two-point estimate `m^i`.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorStatistics {
    pub mean: DVector<f64>,
    pub std_error: DVector<f64>,
    /// Sample mean of `‖m^i‖²`.
    pub second_moment: f64,
    pub samples: usize,
}

pub fn estimator_statistics(game: &GameSpec, probe: &SmoothingProbe, i: usize) -> Result<EstimatorStatistics> {
    probe.check(game)?;
    game.check_player(i)?;
    let range = game.block_range(i);
    let mu_i = &probe.mu.as_slice()[range.clone()];
    let u_mu = lagrangian(game, i, &probe.mu, &probe.lambda);
    let mut moments = Moments::new(range.len());
    let mut second = 0.0;
    let mut count = 0usize;
    probe.for_each_draw(|draws| {
        let mut avg = DVector::zeros(range.len());
        for a in draws {
            let u_a = lagrangian(game, i, a, &probe.lambda);
            let m = DVector::from_vec(two_point_estimate(u_a, u_mu, a.block(i), mu_i, probe.sigma));
            second += m.norm_squared();
            count += 1;
            avg += m;
        }
        moments.push(&(avg / draws.len() as f64));
    });
    Ok(EstimatorStatistics {
        std_error: moments.std_error(),
        mean: moments.mean,
        second_moment: second / count as f64,
        samples: count,
    })
}

/// Exact block `W^i(μ, λ)` of the extended pseudo-gradient.
pub fn exact_primal_block(game: &GameSpec, mu: &JointAction, lambda: &DVector<f64>, i: usize) -> Result<DVector<f64>> {
    check_len("joint action", game.dim(), mu.dim())?;
    check_len("dual variable", game.num_constraints(), lambda.len())?;
    game.check_player(i)?;
    let w = extended_raw(game, mu.as_vector(), lambda, 0.0);
    let range = game.block_range(i);
    Ok(w.rows(range.start, range.len()).into_owned())
}

/// Estimate of the smoothing bias `Q^i = W̃^i_σ(μ) − W^i(μ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTermEstimate {
    pub bias: DVector<f64>,
    pub std_error: DVector<f64>,
    /// `‖bias‖²` minus the sampling-noise contribution `Σ se²`; unbiased for
    /// `‖Q^i‖²`.
    pub norm_sq: f64,
    /// `‖bias‖²` as measured.
    pub norm_sq_raw: f64,
    /// Interval for `‖Q^i‖` from per-coordinate four-standard-error bands.
    pub norm_interval: (f64, f64),
}

impl QTermEstimate {
    pub fn indistinguishable_from_zero(&self) -> bool {
        self.norm_interval.0 == 0.0
    }
}

pub fn q_term_statistics(game: &GameSpec, probe: &SmoothingProbe, i: usize) -> Result<QTermEstimate> {
    let stats = estimator_statistics(game, probe, i)?;
    let exact = exact_primal_block(game, &probe.mu, &probe.lambda, i)?;
    let bias = &stats.mean - exact;
    let noise: f64 = stats.std_error.iter().map(|s| s * s).sum();
    let lo = bias.zip_map(&stats.std_error, |b, s| (b.abs() - STD_ERROR_BAND * s).max(0.0));
    let hi = bias.zip_map(&stats.std_error, |b, s| b.abs() + STD_ERROR_BAND * s);
    Ok(QTermEstimate {
        norm_sq: bias.norm_squared() - noise,
        norm_sq_raw: bias.norm_squared(),
        norm_interval: (lo.norm(), hi.norm()),
        bias,
        std_error: stats.std_error,
    })
}

/// `E‖K(μ − a)‖²` by sampling; see [`s_term_exact`] for the closed form.
pub fn s_term_second_moment(game: &GameSpec, probe: &SmoothingProbe) -> Result<MonteCarloEstimate> {
    probe.check(game)?;
    let k = game.constraints().k();
    let mut moments = Moments::new(1);
    probe.for_each_draw(|draws| {
        let v = draws
            .iter()
            .map(|a| (k * (probe.mu.as_vector() - a.as_vector())).norm_squared())
            .sum::<f64>()
            / draws.len() as f64;
        moments.push(&DVector::from_element(1, v));
    });
    Ok(MonteCarloEstimate {
        mean: moments.mean[0],
        std_error: moments.std_error()[0],
        samples: probe.num_samples,
    })
}

/// `σ²·Σ_{jk} K_{jk}²`.
pub fn s_term_exact(game: &GameSpec, sigma: f64) -> f64 {
    sigma * sigma * game.constraints().k().norm_squared()
}

/// One row of a diagnostic report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub lemma: String,
    pub case: String,
    pub statistic: f64,
    pub bound: f64,
    pub pass: bool,
    /// Inputs needed to reproduce the check.
    pub inputs: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LemmaReport {
    pub checks: Vec<LemmaCheck>,
}

impl LemmaReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &LemmaCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn extend(&mut self, other: LemmaReport) {
        self.checks.extend(other.checks);
    }

    fn push(&mut self, lemma: &str, case: String, statistic: f64, bound: f64, pass: bool, inputs: String) {
        self.checks.push(LemmaCheck {
            lemma: lemma.into(),
            case,
            statistic,
            bound,
            pass,
            inputs,
        });
    }
}

const ORACLE_TOL: f64 = 1e-12;

/// Distance of the regularized solution to the v-GNE against
/// `ε·‖λ*‖·L/(‖K‖·ν)` (`lemma3`) and against `‖λ*‖·√(ε/4ν)`
/// (`lemma3-sqrt`) at every grid point, plus the drift ratios between
/// consecutive grid points (see [`drift_ratios`]).
///
/// The linear bound can fail when `K` is badly conditioned; the square-root
/// bound follows from strong monotonicity and complementarity alone.
pub fn regularization_path_report(game: &GameSpec, eps_grid: &[f64]) -> Result<LemmaReport> {
    if let Some(bad) = eps_grid.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::InvalidArgument(format!("regularization grid must be positive, got {bad}")));
    }
    let quad = game.as_quadratic().ok_or(Error::NotQuadratic)?;
    let sol = solve_vgne(game, ORACLE_TOL)?;
    let (nu, lip, k_norm) = (quad.nu(), quad.lipschitz(), game.constraints().k_norm());
    let lambda_norm = sol.dual.norm();
    let mut report = LemmaReport::default();
    for &eps in eps_grid {
        let reg = solve_regularized_vi(game, eps, ORACLE_TOL)?;
        let dist = (sol.primal.as_vector() - reg.primal.as_vector()).norm();
        let bound = if k_norm > 0.0 {
            eps * lambda_norm * lip / (k_norm * nu)
        } else {
            0.0
        };
        report.push(
            "lemma3",
            format!("{} eps={eps:e}", game.name()),
            dist,
            bound,
            dist <= bound + 1e-12,
            format!("game={} eps={eps:e} nu={nu} L={lip} |K|={k_norm} |lambda*|={lambda_norm}", game.name()),
        );
        // always valid: ν‖a* − a*_ε‖² ≤ ε(⟨λ*, λ_ε⟩ − ‖λ_ε‖²) ≤ ε‖λ*‖²/4
        let sqrt_bound = lambda_norm * (eps / (4.0 * nu)).sqrt();
        report.push(
            "lemma3-sqrt",
            format!("{} eps={eps:e}", game.name()),
            dist,
            sqrt_bound,
            dist <= sqrt_bound + 1e-12,
            format!("game={} eps={eps:e} nu={nu} |lambda*|={lambda_norm}", game.name()),
        );
    }
    for (idx, ratio) in drift_ratios(game, eps_grid)?.into_iter().enumerate() {
        let inputs = format!("game={} eps_prev={:e} eps={:e}", game.name(), eps_grid[idx], eps_grid[idx + 1]);
        report.push(
            "lemma4-primal",
            format!("{} step={}", game.name(), idx + 1),
            ratio.primal,
            f64::INFINITY,
            ratio.primal.is_finite(),
            inputs.clone(),
        );
        report.push(
            "lemma4-dual",
            format!("{} step={}", game.name(), idx + 1),
            ratio.dual,
            f64::INFINITY,
            ratio.dual.is_finite(),
            inputs,
        );
    }
    Ok(report)
}

/// Normalized drift between consecutive regularized solutions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftRatio {
    /// `‖a*_t − a*_{t−1}‖²·ε_t/(ε_t − ε_{t−1})²`
    pub primal: f64,
    /// `‖λ*_t − λ*_{t−1}‖²·ε_t²/(ε_t − ε_{t−1})²`
    pub dual: f64,
}

/// Drift ratios for each consecutive pair of `eps_seq`. Equal neighbours
/// have identical solutions and are reported as zero drift.
pub fn drift_ratios(game: &GameSpec, eps_seq: &[f64]) -> Result<Vec<DriftRatio>> {
    let sols = eps_seq
        .iter()
        .map(|&e| solve_regularized_vi(game, e, ORACLE_TOL))
        .collect::<Result<Vec<_>>>()?;
    Ok(sols
        .windows(2)
        .map(|w| {
            let (prev, cur) = (&w[0], &w[1]);
            let de = cur.epsilon - prev.epsilon;
            if de == 0.0 {
                return DriftRatio { primal: 0.0, dual: 0.0 };
            }
            let da = (cur.primal.as_vector() - prev.primal.as_vector()).norm_squared();
            let dl = (&cur.dual - &prev.dual).norm_squared();
            DriftRatio {
                primal: da * cur.epsilon / (de * de),
                dual: dl * cur.epsilon * cur.epsilon / (de * de),
            }
        })
        .collect())
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Drift along `ε_t = E/t^e`, `t = 2..=horizon`: the maximum ratio must not
/// exceed ten times the median.
pub fn drift_schedule_report(game: &GameSpec, eps_scale: f64, eps_exp: f64, horizon: u64) -> Result<LemmaReport> {
    if horizon < 2 {
        return Err(Error::InvalidArgument("drift schedule needs at least two points".into()));
    }
    let eps: Vec<f64> = (1..=horizon).map(|t| eps_scale * (t as f64).powf(-eps_exp)).collect();
    let ratios = drift_ratios(game, &eps)?;
    let mut report = LemmaReport::default();
    let inputs = format!("game={} E={eps_scale} e={eps_exp} t=2..{horizon}", game.name());
    for (name, values) in [
        ("lemma4-primal", ratios.iter().map(|r| r.primal).collect::<Vec<_>>()),
        ("lemma4-dual", ratios.iter().map(|r| r.dual).collect::<Vec<_>>()),
    ] {
        let max = values.iter().copied().fold(0.0, f64::max);
        let bound = 10.0 * median(&values);
        report.push(
            name,
            format!("{} max vs 10x median", game.name()),
            max,
            bound,
            max <= bound,
            inputs.clone(),
        );
    }
    Ok(report)
}

/// Samples pairs `z₁, z₂` (primal in `[−r, r]^D`, dual in `[0, r]^n`) and
/// checks `⟨W(z₁)−W(z₂), z₁−z₂⟩ ≥ ν‖a₁−a₂‖²` and its regularized
/// counterpart `… ≥ ν‖a₁−a₂‖² + ε‖λ₁−λ₂‖²`. The statistic is the smallest
/// slack; a check passes when no slack falls below `−1e-12`.
pub fn operator_inequality_report(
    game: &GameSpec,
    num_pairs: usize,
    radius: f64,
    eps: f64,
    seed: u64,
) -> Result<LemmaReport> {
    let nu = game.as_quadratic().ok_or(Error::NotQuadratic)?.nu();
    if num_pairs == 0 || !(radius > 0.0) || eps < 0.0 {
        return Err(Error::InvalidArgument("need num_pairs ≥ 1, radius > 0, eps ≥ 0".into()));
    }
    let (d, n) = (game.dim(), game.num_constraints());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let a = DVector::from_fn(d, |_, _| rng.random_range(-radius..radius));
        let l = DVector::from_fn(n, |_, _| rng.random_range(0.0..radius));
        (a, l)
    };
    const SLACK_TOL: f64 = 1e-12;
    let (mut min_plain, mut min_reg) = (f64::INFINITY, f64::INFINITY);
    let (mut bad_plain, mut bad_reg) = (0usize, 0usize);
    for _ in 0..num_pairs {
        let (a1, l1) = draw(&mut rng);
        let (a2, l2) = draw(&mut rng);
        let mut z1 = DVector::zeros(d + n);
        let mut z2 = DVector::zeros(d + n);
        z1.rows_mut(0, d).copy_from(&a1);
        z1.rows_mut(d, n).copy_from(&l1);
        z2.rows_mut(0, d).copy_from(&a2);
        z2.rows_mut(d, n).copy_from(&l2);
        let dz = &z1 - &z2;
        let da = (&a1 - &a2).norm_squared();
        let dl = (&l1 - &l2).norm_squared();
        let plain = (extended_raw(game, &a1, &l1, 0.0) - extended_raw(game, &a2, &l2, 0.0)).dot(&dz) - nu * da;
        let reg = (extended_raw(game, &a1, &l1, eps) - extended_raw(game, &a2, &l2, eps)).dot(&dz)
            - nu * da
            - eps * dl;
        min_plain = min_plain.min(plain);
        min_reg = min_reg.min(reg);
        bad_plain += usize::from(plain < -SLACK_TOL);
        bad_reg += usize::from(reg < -SLACK_TOL);
    }
    let inputs = format!("game={} pairs={num_pairs} radius={radius} eps={eps} seed={seed}", game.name());
    let mut report = LemmaReport::default();
    report.push(
        "primal-monotonicity",
        format!("{} violations={bad_plain}", game.name()),
        min_plain,
        -SLACK_TOL,
        bad_plain == 0,
        inputs.clone(),
    );
    report.push(
        "regularized-monotonicity",
        format!("{} violations={bad_reg}", game.name()),
        min_reg,
        -SLACK_TOL,
        bad_reg == 0,
        inputs,
    );
    Ok(report)
}

/// Sample mean of `m^i` against the exact `W^i(μ, λ)`, per coordinate.
pub fn unbiasedness_report(game: &GameSpec, probe: &SmoothingProbe) -> Result<LemmaReport> {
    let mut report = LemmaReport::default();
    for i in 0..game.num_players() {
        let stats = estimator_statistics(game, probe, i)?;
        let exact = exact_primal_block(game, &probe.mu, &probe.lambda, i)?;
        for c in 0..exact.len() {
            let dev = (stats.mean[c] - exact[c]).abs();
            let band = STD_ERROR_BAND * stats.std_error[c];
            report.push(
                "lemma6",
                format!("{} player={i} coord={c}", game.name()),
                dev,
                band,
                dev <= band,
                format!("game={} sigma={} samples={} seed={}", game.name(), probe.sigma, probe.num_samples, probe.seed),
            );
        }
    }
    Ok(report)
}

/// `E‖m^i‖²` at `(c·μ, c·λ)` for `c` in `scales`: the log-log growth between
/// consecutive scales must stay within `2 + 0.3`.
pub fn second_moment_growth_report(game: &GameSpec, probe: &SmoothingProbe, scales: &[f64]) -> Result<LemmaReport> {
    let mut report = LemmaReport::default();
    for i in 0..game.num_players() {
        let moments = scales
            .iter()
            .map(|&c| {
                let scaled = SmoothingProbe {
                    mu: probe.mu.with_flat(probe.mu.as_vector() * c)?,
                    lambda: &probe.lambda * c,
                    ..probe.clone()
                };
                Ok(estimator_statistics(game, &scaled, i)?.second_moment)
            })
            .collect::<Result<Vec<f64>>>()?;
        for w in 0..scales.len().saturating_sub(1) {
            let growth = (moments[w + 1] / moments[w]).ln() / (scales[w + 1] / scales[w]).ln();
            report.push(
                "lemma7",
                format!("{} player={i} c={}->{}", game.name(), scales[w], scales[w + 1]),
                growth,
                2.3,
                growth <= 2.3,
                format!(
                    "game={} sigma={} samples={} seed={} moments={:?}",
                    game.name(),
                    probe.sigma,
                    probe.num_samples,
                    probe.seed,
                    moments
                ),
            );
        }
    }
    Ok(report)
}

/// Sampled `E‖K(μ − a)‖²` within 5% of `σ²·Σ K_{jk}²`.
pub fn s_term_report(game: &GameSpec, probe: &SmoothingProbe) -> Result<LemmaReport> {
    let est = s_term_second_moment(game, probe)?;
    let exact = s_term_exact(game, probe.sigma);
    let rel = (est.mean / exact - 1.0).abs();
    let mut report = LemmaReport::default();
    report.push(
        "lemma8-s",
        format!("{} sigma={}", game.name(), probe.sigma),
        rel,
        0.05,
        rel <= 0.05,
        format!(
            "game={} sigma={} samples={} seed={} sampled={} exact={exact}",
            game.name(),
            probe.sigma,
            probe.num_samples,
            probe.seed,
            est.mean
        ),
    );
    Ok(report)
}

/// Smoothing bias across sampling radii.
#[derive(Clone, Debug, PartialEq)]
pub struct QScaling {
    pub sigmas: Vec<f64>,
    /// `Σ_i ‖Q^i‖²` (noise-corrected) at each radius.
    pub norm_sq: Vec<f64>,
    /// Fitted slope of `log Σ‖Q^i‖²` against `log σ`.
    pub slope: f64,
}

pub fn q_term_scaling(
    game: &GameSpec,
    mu: &JointAction,
    lambda: &DVector<f64>,
    sigmas: &[f64],
    num_samples: usize,
    seed: u64,
) -> Result<QScaling> {
    if sigmas.len() < 2 {
        return Err(Error::InvalidArgument("need at least two sampling radii".into()));
    }
    let mut norm_sq = Vec::with_capacity(sigmas.len());
    for (k, &sigma) in sigmas.iter().enumerate() {
        let probe = SmoothingProbe::new(mu.clone(), lambda.clone(), sigma, num_samples, seed.wrapping_add(k as u64))?
            .antithetic();
        let mut total = 0.0;
        for i in 0..game.num_players() {
            total += q_term_statistics(game, &probe, i)?.norm_sq;
        }
        norm_sq.push(total);
    }
    let slope = if norm_sq.iter().all(|v| *v > 0.0) {
        let xs: Vec<f64> = sigmas.iter().map(|s| s.ln()).collect();
        let ys: Vec<f64> = norm_sq.iter().map(|v| v.ln()).collect();
        least_squares_line(&xs, &ys).0
    } else {
        f64::NAN
    };
    Ok(QScaling {
        sigmas: sigmas.to_vec(),
        norm_sq,
        slope,
    })
}

/// Slope of `log E‖Q‖²` against `log σ` within `2 ± 0.3`.
pub fn q_term_report(
    game: &GameSpec,
    mu: &JointAction,
    lambda: &DVector<f64>,
    sigmas: &[f64],
    num_samples: usize,
    seed: u64,
) -> Result<LemmaReport> {
    let scaling = q_term_scaling(game, mu, lambda, sigmas, num_samples, seed)?;
    let dev = (scaling.slope - 2.0).abs();
    let mut report = LemmaReport::default();
    report.push(
        "lemma8-q",
        format!("{} slope", game.name()),
        scaling.slope,
        0.3,
        dev <= 0.3,
        format!(
            "game={} sigmas={:?} samples={num_samples} seed={seed} norm_sq={:?}",
            game.name(),
            sigmas,
            scaling.norm_sq
        ),
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    fn two_player_probe(sigma: f64, samples: usize, seed: u64) -> (GameSpec, SmoothingProbe) {
        let game = builtin::paper_example();
        let probe = SmoothingProbe::new(
            game.action(&[0.5, -0.3]).unwrap(),
            DVector::from_vec(vec![0.8]),
            sigma,
            samples,
            seed,
        )
        .unwrap();
        (game, probe)
    }

    #[test]
    fn smoothed_quadratic_cost_matches_gaussian_integral() {
        let (game, probe) = two_player_probe(0.3, DEFAULT_SAMPLES, 1);
        let quad = game.as_quadratic().unwrap();
        for i in 0..2 {
            let est = smoothed_cost(&game, &probe, i).unwrap();
            let exact =
                lagrangian(&game, i, &probe.mu, &probe.lambda) + 0.5 * probe.sigma.powi(2) * quad.a(i).trace();
            assert!((est.mean - exact).abs() <= STD_ERROR_BAND * est.std_error, "{est:?} vs {exact}");
        }
    }

    #[test]
    fn point_mass_limit() {
        let (game, probe) = two_player_probe(1e-6, 1000, 2);
        let exact = lagrangian(&game, 0, &probe.mu, &probe.lambda);
        let est = smoothed_cost(&game, &probe, 0).unwrap();
        assert!((est.mean - exact).abs() <= 1e-6 * exact.abs());
    }

    #[test]
    fn linear_cost_is_not_smoothed() {
        // J^1 = a^1 + 2a^2, J^2 = -a^2: zero Hessians
        let dims = vec![1, 1];
        let quad = crate::game::QuadraticGame::new(
            &dims,
            vec![nalgebra::DMatrix::zeros(2, 2), nalgebra::DMatrix::zeros(2, 2)],
            vec![DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![0.0, -1.0])],
        )
        .unwrap();
        let game = GameSpec::new(
            "linear",
            dims,
            crate::game::CostModel::Quadratic(quad),
            crate::game::ConstraintSet::unconstrained(2),
        )
        .unwrap();
        let probe = SmoothingProbe::new(game.action(&[0.2, 0.4]).unwrap(), DVector::zeros(0), 0.5, 4000, 3)
            .unwrap()
            .antithetic();
        let est = smoothed_cost(&game, &probe, 0).unwrap();
        assert!((est.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn std_error_shrinks_like_inverse_root() {
        let (game, small) = two_player_probe(0.3, 20_000, 4);
        let large = SmoothingProbe {
            num_samples: 40_000,
            seed: 5,
            ..small.clone()
        };
        let ratio = smoothed_cost(&game, &small, 0).unwrap().std_error / smoothed_cost(&game, &large, 0).unwrap().std_error;
        assert!((1.2..=1.7).contains(&ratio), "{ratio}");
    }

    #[test]
    fn q_term_vanishes_for_quadratic_games() {
        let (game, probe) = two_player_probe(0.2, DEFAULT_SAMPLES, 6);
        for i in 0..2 {
            let q = q_term_statistics(&game, &probe, i).unwrap();
            assert!(q.indistinguishable_from_zero(), "{q:?}");
        }
    }

    #[test]
    fn q_term_drops_when_sigma_halves() {
        let game = builtin::softplus_paper_example();
        let mu = game.action(&[0.0, 1.0]).unwrap();
        let lambda = DVector::from_vec(vec![1.0]);
        let scaling = q_term_scaling(&game, &mu, &lambda, &[0.2, 0.1], 1_000_000, 7).unwrap();
        let drop = scaling.norm_sq[0] / scaling.norm_sq[1];
        assert!((3.0..=5.5).contains(&drop), "{scaling:?}");
    }

    #[test]
    fn probe_preconditions() {
        let game = builtin::paper_example();
        assert!(SmoothingProbe::new(game.zero_action(), DVector::zeros(1), 0.0, 10, 0).is_err());
        assert!(SmoothingProbe::new(game.zero_action(), DVector::zeros(1), 0.1, 0, 0).is_err());
        let probe = SmoothingProbe::new(game.zero_action(), DVector::zeros(2), 0.1, 10, 0).unwrap();
        assert!(smoothed_cost(&game, &probe, 0).is_err());
    }

    #[test]
    fn degenerate_grid_has_zero_drift() {
        let game = builtin::paper_example();
        let ratios = drift_ratios(&game, &[0.1, 0.1, 0.05]).unwrap();
        assert_eq!(ratios[0], DriftRatio { primal: 0.0, dual: 0.0 });
        assert!(ratios[1].primal > 0.0);
        let report = regularization_path_report(&game, &[0.1, 0.1]).unwrap();
        assert!(report.all_pass());
    }

    #[test]
    fn two_player_path_report() {
        let game = builtin::paper_example();
        let report = regularization_path_report(&game, &[1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
        assert!(report.all_pass(), "{:?}", report.failures().collect::<Vec<_>>());
        assert!(regularization_path_report(&game, &[0.1, 0.0]).is_err());
    }

    #[test]
    fn reports_are_deterministic() {
        let (game, probe) = two_player_probe(0.1, 2000, 8);
        assert_eq!(unbiasedness_report(&game, &probe).unwrap(), unbiasedness_report(&game, &probe).unwrap());
        assert_eq!(
            operator_inequality_report(&game, 100, 1.0, 0.5, 1).unwrap(),
            operator_inequality_report(&game, 100, 1.0, 0.5, 1).unwrap()
        );
    }
}
