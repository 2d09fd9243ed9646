use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vgne_core::augmented::{augmented_cost, AugmentedPoint};
use vgne_core::builtin::{paper_example, random_quadratic};
use vgne_core::learner::{
    run, Feedback, GameEnvironment, LearnerState, PayoffEnvironment, Reference, RunConfig, Schedules,
};

fn reference() -> Reference {
    Reference {
        primal: DVector::from_vec(vec![0.0, 1.0]),
        dual: DVector::from_vec(vec![1.0]),
    }
}

/// `μ⁺ = μ − γ·m` blockwise and `λ⁺ = Π₊[λ − γ(−Kμ + S + l + ελ)]` with
/// `S = K(μ − a)`, checked against an independent recomputation.
#[test]
fn step_matches_decomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..20 {
        let game = random_quadratic(seed).unwrap();
        let (d, n) = (game.dim(), game.num_constraints());
        let mu = game.action(&(0..d).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>()).unwrap();
        let lambda = DVector::from_fn(n, |_, _| rng.random_range(0.0..2.0));
        let mut state = LearnerState::new(mu.clone(), lambda.clone(), seed);
        state.t = rng.random_range(1..1000);
        let sched = Schedules::default();
        let (gamma, eps, sigma) = (sched.gamma(state.t), sched.eps(state.t), sched.sigma(state.t));
        let sampled = state.sample_action(sigma).unwrap();
        let feedback = GameEnvironment::new(&game).feedback(&sampled, &mu, &lambda);
        state.step(&sampled, &feedback, &sched).unwrap();

        for i in 0..game.num_players() {
            let at = |a| augmented_cost(&game, i, &AugmentedPoint::new(a, lambda.clone())).unwrap();
            let diff = at(sampled.clone()) - at(mu.clone());
            for (k, c) in game.block_range(i).enumerate() {
                let m = diff * (sampled.as_slice()[c] - mu.as_slice()[c]) / (sigma * sigma);
                let expected = mu.as_slice()[c] - gamma * m;
                let got = state.mu.block(i)[k];
                assert!((got - expected).abs() <= 1e-9 * (1.0 + expected.abs()), "seed {seed}");
            }
        }
        let cs = game.constraints();
        let s_term = cs.k() * (mu.as_vector() - sampled.as_vector());
        let inner = -(cs.k() * mu.as_vector()) + s_term + cs.l() + &lambda * eps;
        let expected = (&lambda - inner * gamma).map(|v| v.max(0.0));
        assert!((&state.lambda - expected).amax() <= 1e-12, "seed {seed}");
    }
}

struct Recording<'a> {
    inner: GameEnvironment<'a>,
    lambdas: Vec<DVector<f64>>,
}

impl PayoffEnvironment for Recording<'_> {
    fn dims(&self) -> &[usize] {
        self.inner.dims()
    }

    fn num_constraints(&self) -> usize {
        self.inner.num_constraints()
    }

    fn feedback(&mut self, sampled: &vgne_core::game::JointAction, mu: &vgne_core::game::JointAction, lambda: &DVector<f64>) -> Feedback {
        self.lambdas.push(lambda.clone());
        self.inner.feedback(sampled, mu, lambda)
    }
}

#[test]
fn dual_stays_nonnegative() {
    let game = random_quadratic(5).unwrap();
    let sol = vgne_core::oracle::solve_vgne(&game, 1e-12).unwrap();
    let reference = Reference {
        primal: sol.primal.into_vector(),
        dual: sol.dual,
    };
    let mut env = Recording {
        inner: GameEnvironment::new(&game),
        lambdas: Vec::new(),
    };
    let mut cfg = RunConfig::new(Schedules::default(), 5000, 3);
    cfg.init_lambda = Some(vec![-1.0; game.num_constraints()]);
    let traj = vgne_core::learner::run_with(&mut env, &cfg, &reference).unwrap();
    assert_eq!(env.lambdas.len(), 5000);
    assert!(env.lambdas.iter().all(|l| l.iter().all(|&v| v >= 0.0)));
    assert!(traj.final_lambda.iter().all(|&v| v >= 0.0));
}

#[test]
fn runs_are_reproducible() {
    let game = paper_example();
    let cfg = RunConfig::new(Schedules::default(), 2000, 9);
    let a = run(&game, &cfg, &reference()).unwrap();
    let b = run(&game, &cfg, &reference()).unwrap();
    assert_eq!(a, b);
    let c = run(&game, &RunConfig { seed: 10, ..cfg }, &reference()).unwrap();
    assert_ne!(a.final_mu, c.final_mu);
}

/// With `s = 10` the sampling radius drops below the resolution of the
/// means, samples coincide with the means and the estimate is zero.
#[test]
fn fast_sampling_decay_freezes_means() {
    let game = paper_example();
    let sched = Schedules::rate_optimal(10.0);
    let short = run(&game, &RunConfig::new(sched, 1000, 4), &reference()).unwrap();
    let long = run(&game, &RunConfig::new(sched, 5000, 4), &reference()).unwrap();
    assert_eq!(short.final_mu, long.final_mu);
    assert_ne!(short.final_lambda, long.final_lambda);
}

#[test]
fn rate_optimal_schedules_approach_equilibrium() {
    let game = paper_example();
    let traj = run(&game, &RunConfig::new(Schedules::default(), 50_000, 1), &reference()).unwrap();
    let first = traj.records.iter().find(|r| r.t >= 100).unwrap().err_primal_sq;
    let last = traj.records.last().unwrap().err_primal_sq;
    assert!(last < first, "{first} -> {last}");
}
