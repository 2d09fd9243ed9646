//! Payoff-based learning with Gaussian sampling and two-point estimates.
//!
//! Each player keeps the mean `μ^i` of a Gaussian mixed strategy, plays a
//! sample `a^i ~ N(μ^i, σ_t²I)` and observes only its Lagrangian payoff at
//! the sample and at the mean. A single dual vector is updated by projected
//! descent with a vanishing Tikhonov term:
//!
//! ```text
//! m^i   = (U^i(a, λ) − U^i(μ, λ))·(a^i − μ^i)/σ_t²
//! μ^i  ← μ^i − γ_t·m^i
//! λ    ← Π_{R^n_+}[λ − γ_t·(−g(a) + ε_t·λ)]
//! ```
//!
//! with `γ_t = G/t^g`, `ε_t = E/t^e` and `σ_t = S/t^s`, `t = 1, 2, …`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::game::{GameSpec, JointAction};

/// Tolerance for the strict inequalities on the schedule exponents.
const EXPONENT_TOL: f64 = 1e-12;

/// Power-law families `γ_t = G/t^g`, `ε_t = E/t^e`, `σ_t = S/t^s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedules {
    #[serde(rename = "G")]
    pub gamma_scale: f64,
    #[serde(rename = "g")]
    pub gamma_exp: f64,
    #[serde(rename = "E")]
    pub eps_scale: f64,
    #[serde(rename = "e")]
    pub eps_exp: f64,
    #[serde(rename = "S")]
    pub sigma_scale: f64,
    #[serde(rename = "s")]
    pub sigma_exp: f64,
}

impl Default for Schedules {
    fn default() -> Self {
        Self::rate_optimal(4.0 / 7.0)
    }
}

impl Schedules {
    /// Unit scales with `g = 4/7`, `e = 2/7` and the given sampling exponent.
    pub fn rate_optimal(sigma_exp: f64) -> Self {
        Self {
            gamma_scale: 1.0,
            gamma_exp: 4.0 / 7.0,
            eps_scale: 1.0,
            eps_exp: 2.0 / 7.0,
            sigma_scale: 1.0,
            sigma_exp,
        }
    }

    pub fn gamma(&self, t: u64) -> f64 {
        self.gamma_scale * (t as f64).powf(-self.gamma_exp)
    }

    pub fn eps(&self, t: u64) -> f64 {
        self.eps_scale * (t as f64).powf(-self.eps_exp)
    }

    pub fn sigma(&self, t: u64) -> f64 {
        self.sigma_scale * (t as f64).powf(-self.sigma_exp)
    }

    pub fn validate(&self) -> ScheduleReport {
        validate_schedules(self)
    }
}

/// Step-size conditions, the auxiliary exponent `h` and the predicted
/// rate exponent of `E‖μ(t) − a*‖²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleReport {
    pub positive: bool,
    /// `s + g > 1`
    pub sampling_decay: bool,
    /// `g + e < 1`
    pub regularization_decay: bool,
    /// `g > 1/2`
    pub step_decay: bool,
    /// `h = min{2 − g − e, g + s, 2g}`
    pub h: f64,
    /// `min{2e, h − g}`
    pub exponent: f64,
}

impl ScheduleReport {
    pub fn is_valid(&self) -> bool {
        self.positive && self.sampling_decay && self.regularization_decay && self.step_decay
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.positive {
            out.push("all scales and exponents must be positive");
        }
        if !self.sampling_decay {
            out.push("s + g > 1");
        }
        if !self.regularization_decay {
            out.push("g + e < 1");
        }
        if !self.step_decay {
            out.push("g > 1/2");
        }
        out
    }
}

pub fn validate_schedules(sched: &Schedules) -> ScheduleReport {
    let Schedules {
        gamma_scale,
        gamma_exp: g,
        eps_scale,
        eps_exp: e,
        sigma_scale,
        sigma_exp: s,
    } = *sched;
    let positive = [gamma_scale, g, eps_scale, e, sigma_scale, s]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite());
    let h = (2.0 - g - e).min(g + s).min(2.0 * g);
    ScheduleReport {
        positive,
        sampling_decay: s + g > 1.0 + EXPONENT_TOL,
        regularization_decay: g + e < 1.0 - EXPONENT_TOL,
        step_decay: g > 0.5 + EXPONENT_TOL,
        h,
        exponent: (2.0 * e).min(h - g),
    }
}

/// Values revealed to the players at one iteration. Only payoffs and
/// constraint values cross this boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Feedback {
    /// `U^i(a(t), λ(t))` per player.
    pub u_at_a: Vec<f64>,
    /// `U^i(μ(t), λ(t))` per player.
    pub u_at_mu: Vec<f64>,
    /// `g(a(t)) = K·a(t) − l`.
    pub g_at_a: DVector<f64>,
}

/// Source of payoff feedback for the learner.
pub trait PayoffEnvironment {
    fn dims(&self) -> &[usize];
    fn num_constraints(&self) -> usize;
    fn feedback(&mut self, sampled: &JointAction, mu: &JointAction, lambda: &DVector<f64>) -> Feedback;
}

/// Exact payoff feedback from a game, with an optional additive Gaussian
/// observation noise on the payoffs (off by default).
pub struct GameEnvironment<'a> {
    game: &'a GameSpec,
    noise: Option<(f64, ChaCha8Rng)>,
}

impl<'a> GameEnvironment<'a> {
    pub fn new(game: &'a GameSpec) -> Self {
        Self { game, noise: None }
    }

    pub fn with_observation_noise(mut self, std_dev: f64, seed: u64) -> Self {
        if std_dev > 0.0 {
            self.noise = Some((std_dev, ChaCha8Rng::seed_from_u64(seed)));
        }
        self
    }
}

impl PayoffEnvironment for GameEnvironment<'_> {
    fn dims(&self) -> &[usize] {
        self.game.dims()
    }

    fn num_constraints(&self) -> usize {
        self.game.num_constraints()
    }

    fn feedback(&mut self, sampled: &JointAction, mu: &JointAction, lambda: &DVector<f64>) -> Feedback {
        let cs = self.game.constraints();
        let g_at_a = cs.k() * sampled.as_vector() - cs.l();
        let g_at_mu = cs.k() * mu.as_vector() - cs.l();
        let pen_a = lambda.dot(&g_at_a);
        let pen_mu = lambda.dot(&g_at_mu);
        let players = self.game.num_players();
        let mut u_at_a: Vec<f64> = (0..players)
            .map(|i| self.game.cost_raw(i, sampled.as_slice()) + pen_a)
            .collect();
        let mut u_at_mu: Vec<f64> = (0..players)
            .map(|i| self.game.cost_raw(i, mu.as_slice()) + pen_mu)
            .collect();
        if let Some((std_dev, rng)) = self.noise.as_mut() {
            for u in u_at_a.iter_mut().chain(u_at_mu.iter_mut()) {
                *u += *std_dev * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Feedback {
            u_at_a,
            u_at_mu,
            g_at_a,
        }
    }
}

/// Learner iterate: Gaussian means, dual vector, iteration counter and
/// the random stream used for sampling.
#[derive(Clone, Debug)]
pub struct LearnerState {
    pub mu: JointAction,
    pub lambda: DVector<f64>,
    pub t: u64,
    rng: ChaCha8Rng,
}

impl LearnerState {
    /// Starts at `t = 1` from the given means and a projected dual.
    pub fn new(mu: JointAction, lambda: DVector<f64>, seed: u64) -> Self {
        Self {
            mu,
            lambda: lambda.map(|v| v.max(0.0)),
            t: 1,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn zeros(dims: &[usize], num_constraints: usize, seed: u64) -> Self {
        Self::new(JointAction::zeros(dims), DVector::zeros(num_constraints), seed)
    }

    /// Draws `a^i ~ N(μ^i, σ²I)` for every player, consuming the stream in
    /// coordinate order.
    pub fn sample_action(&mut self, sigma: f64) -> Result<JointAction> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("sampling radius must be positive, got {sigma}")));
        }
        let rng = &mut self.rng;
        let sample = self
            .mu
            .as_vector()
            .map(|m| m + sigma * rng.sample::<f64, _>(StandardNormal));
        self.mu.with_flat(sample)
    }

    /// Applies one update with the schedules evaluated at the current `t`.
    pub fn step(&mut self, sampled: &JointAction, feedback: &Feedback, sched: &Schedules) -> Result<()> {
        let players = self.mu.num_players();
        check_len("joint action", self.mu.dim(), sampled.dim())?;
        check_len("payoffs at the sample", players, feedback.u_at_a.len())?;
        check_len("payoffs at the mean", players, feedback.u_at_mu.len())?;
        check_len("constraint values", self.lambda.len(), feedback.g_at_a.len())?;
        let gamma = sched.gamma(self.t);
        let eps = sched.eps(self.t);
        let sigma = sched.sigma(self.t);
        for i in 0..players {
            let m = two_point_estimate(
                feedback.u_at_a[i],
                feedback.u_at_mu[i],
                sampled.block(i),
                self.mu.block(i),
                sigma,
            );
            for (mu, mi) in self.mu.block_mut(i).iter_mut().zip(m) {
                *mu -= gamma * mi;
            }
        }
        self.lambda = dual_update(&self.lambda, &feedback.g_at_a, gamma, eps);
        self.t += 1;
        Ok(())
    }
}

/// `m^i = (U^i(a) − U^i(μ))·(a^i − μ^i)/σ²`.
pub fn two_point_estimate(u_at_a: f64, u_at_mu: f64, a_i: &[f64], mu_i: &[f64], sigma: f64) -> Vec<f64> {
    let scale = (u_at_a - u_at_mu) / (sigma * sigma);
    a_i.iter().zip(mu_i).map(|(a, m)| scale * (a - m)).collect()
}

/// `Π_{R^n_+}[λ − γ·(−g + ε·λ)]`.
pub fn dual_update(lambda: &DVector<f64>, g: &DVector<f64>, gamma: f64, eps: f64) -> DVector<f64> {
    lambda.zip_map(g, |l, gj| (l - gamma * (-gj + eps * l)).max(0.0))
}

/// Which iterations are recorded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cadence {
    /// Every `k`-th iteration.
    Every(u64),
    /// `round(10^{j/k})` for `j = 0, 1, …`.
    PerDecade(u32),
}

impl Default for Cadence {
    fn default() -> Self {
        Cadence::PerDecade(20)
    }
}

impl Cadence {
    /// Sorted checkpoints in `1..=horizon`; the horizon is always included.
    pub fn checkpoints(&self, horizon: u64) -> Vec<u64> {
        let mut out: Vec<u64> = match *self {
            Cadence::Every(k) => {
                let k = k.max(1);
                (1..=horizon / k).map(|j| j * k).collect()
            }
            Cadence::PerDecade(per_decade) => {
                let per_decade = per_decade.max(1) as f64;
                let mut pts = Vec::new();
                for j in 0.. {
                    let t = 10f64.powf(j as f64 / per_decade).round() as u64;
                    if t > horizon {
                        break;
                    }
                    pts.push(t);
                }
                pts
            }
        };
        out.push(horizon);
        out.dedup();
        out
    }
}

/// Squared distance of the means and the dual to a reference equilibrium.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub primal: DVector<f64>,
    pub dual: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub schedules: Schedules,
    pub horizon: u64,
    pub seed: u64,
    pub cadence: Cadence,
    pub allow_invalid_schedules: bool,
    pub init_mu: Option<Vec<f64>>,
    pub init_lambda: Option<Vec<f64>>,
    /// Standard deviation of additive payoff noise; zero disables it.
    pub observation_noise: f64,
}

impl RunConfig {
    pub fn new(schedules: Schedules, horizon: u64, seed: u64) -> Self {
        Self {
            schedules,
            horizon,
            seed,
            cadence: Cadence::default(),
            allow_invalid_schedules: false,
            init_mu: None,
            init_lambda: None,
            observation_noise: 0.0,
        }
    }
}

/// One recorded checkpoint. Field order matches the CSV columns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: u64,
    pub seed: u64,
    pub err_primal_sq: f64,
    pub err_dual_sq: f64,
    pub gamma: f64,
    pub eps: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub records: Vec<Record>,
    pub final_mu: DVector<f64>,
    pub final_lambda: DVector<f64>,
}

/// Runs the learner against a game for `cfg.horizon` iterations. The row
/// recorded at `t` describes the iterate after the `t`-th update, together
/// with the parameters used by that update.
pub fn run(game: &GameSpec, cfg: &RunConfig, reference: &Reference) -> Result<Trajectory> {
    let mut env = GameEnvironment::new(game).with_observation_noise(cfg.observation_noise, cfg.seed ^ 0x6e6f_6973_65);
    run_with(&mut env, cfg, reference)
}

pub fn run_with<E: PayoffEnvironment>(env: &mut E, cfg: &RunConfig, reference: &Reference) -> Result<Trajectory> {
    if cfg.horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let report = cfg.schedules.validate();
    if !report.is_valid() && !cfg.allow_invalid_schedules {
        return Err(Error::InvalidSchedules(report.failures().join(", ")));
    }
    let dims = env.dims().to_vec();
    let n = env.num_constraints();
    check_len("reference primal", dims.iter().sum(), reference.primal.len())?;
    check_len("reference dual", n, reference.dual.len())?;

    let mu = match &cfg.init_mu {
        Some(v) => JointAction::from_flat(&dims, DVector::from_column_slice(v))?,
        None => JointAction::zeros(&dims),
    };
    let lambda = match &cfg.init_lambda {
        Some(v) => {
            check_len("initial dual", n, v.len())?;
            DVector::from_column_slice(v)
        }
        None => DVector::zeros(n),
    };
    let mut state = LearnerState::new(mu, lambda, cfg.seed);
    let checkpoints = cfg.cadence.checkpoints(cfg.horizon);
    let mut next = checkpoints.iter().peekable();
    let mut records = Vec::with_capacity(checkpoints.len());
    let sched = &cfg.schedules;

    while state.t <= cfg.horizon {
        let t = state.t;
        let sigma = sched.sigma(t);
        let sampled = state.sample_action(sigma)?;
        let feedback = env.feedback(&sampled, &state.mu, &state.lambda);
        state.step(&sampled, &feedback, sched)?;
        if next.peek() == Some(&&t) {
            next.next();
            records.push(Record {
                t,
                seed: cfg.seed,
                err_primal_sq: (state.mu.as_vector() - &reference.primal).norm_squared(),
                err_dual_sq: (&state.lambda - &reference.dual).norm_squared(),
                gamma: sched.gamma(t),
                eps: sched.eps(t),
                sigma,
            });
        }
    }
    Ok(Trajectory {
        seed: cfg.seed,
        records,
        final_mu: state.mu.into_vector(),
        final_lambda: state.lambda,
    })
}
