use nalgebra::DVector;
use proptest::prelude::*;

use vgne_core::augmented::{extended_pseudo_gradient, AugmentedPoint};
use vgne_core::builtin::random_quadratic;
use vgne_core::game::JointAction;
use vgne_core::harness::{aggregate, fit_rate};
use vgne_core::learner::{dual_update, two_point_estimate, Cadence, Record, Schedules};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn joint_action_round_trip(blocks in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 1..4), 1..5)) {
        let a = JointAction::from_blocks(&blocks);
        prop_assert_eq!(a.blocks(), blocks.clone());
        let dims: Vec<usize> = blocks.iter().map(Vec::len).collect();
        let b = JointAction::from_flat(&dims, a.as_vector().clone()).unwrap();
        prop_assert_eq!(&a, &b);
        for (i, block) in blocks.iter().enumerate() {
            prop_assert_eq!(a.block(i), block.as_slice());
        }
    }

    #[test]
    fn pseudo_gradient_is_affine_map(seed in 0u64..200, x in prop::collection::vec(-3.0f64..3.0, 6)) {
        let game = random_quadratic(seed).unwrap();
        let quad = game.as_quadratic().unwrap();
        let a = DVector::from_column_slice(&x[..game.dim()]);
        let m = game.pseudo_gradient(&game.action(a.as_slice()).unwrap()).unwrap();
        let expected = quad.p() * &a + quad.q();
        for k in 0..game.dim() {
            prop_assert!(close(m[k], expected[k], 1e-12));
        }
    }

    #[test]
    fn strong_monotonicity_on_pairs(seed in 0u64..200, x in prop::collection::vec(-3.0f64..3.0, 12)) {
        let game = random_quadratic(seed).unwrap();
        let d = game.dim();
        let a1 = game.action(&x[..d]).unwrap();
        let a2 = game.action(&x[6..6 + d]).unwrap();
        let dm = game.pseudo_gradient(&a1).unwrap() - game.pseudo_gradient(&a2).unwrap();
        let da = a1.as_vector() - a2.as_vector();
        prop_assert!(dm.dot(&da) >= game.nu() * da.norm_squared() - 1e-10);
    }

    #[test]
    fn constraint_value_is_affine(seed in 0u64..200, alpha in 0.0f64..=1.0, x in prop::collection::vec(-5.0f64..5.0, 12)) {
        let game = random_quadratic(seed).unwrap();
        let d = game.dim();
        let a1 = game.action(&x[..d]).unwrap();
        let a2 = game.action(&x[6..6 + d]).unwrap();
        let mix = game.action((a1.as_vector() * alpha + a2.as_vector() * (1.0 - alpha)).as_slice()).unwrap();
        let lhs = game.constraint_value(&mix).unwrap();
        let rhs = game.constraint_value(&a1).unwrap() * alpha + game.constraint_value(&a2).unwrap() * (1.0 - alpha);
        for j in 0..lhs.len() {
            prop_assert!(close(lhs[j], rhs[j], 1e-12));
        }
    }

    #[test]
    fn extended_operator_is_affine_in_dual(
        seed in 0u64..200,
        alpha in 0.0f64..=1.0,
        x in prop::collection::vec(-2.0f64..2.0, 6),
        l1 in prop::collection::vec(0.0f64..3.0, 3),
        l2 in prop::collection::vec(0.0f64..3.0, 3),
    ) {
        let game = random_quadratic(seed).unwrap();
        let (d, n) = (game.dim(), game.num_constraints());
        let a = game.action(&x[..d]).unwrap();
        let lam1 = DVector::from_column_slice(&l1[..n]);
        let lam2 = DVector::from_column_slice(&l2[..n]);
        let w = |l: DVector<f64>| extended_pseudo_gradient(&game, &AugmentedPoint::new(a.clone(), l)).unwrap();
        let lhs = w(&lam1 * alpha + &lam2 * (1.0 - alpha));
        let rhs = w(lam1) * alpha + w(lam2) * (1.0 - alpha);
        for k in 0..lhs.len() {
            prop_assert!(close(lhs[k], rhs[k], 1e-12));
        }
    }

    #[test]
    fn dual_update_projects(
        l in prop::collection::vec(0.0f64..5.0, 1..5),
        g in prop::collection::vec(-5.0f64..5.0, 5),
        gamma in 0.0f64..2.0,
        eps in 0.0f64..1.0,
    ) {
        let lam = DVector::from_vec(l.clone());
        let gv = DVector::from_column_slice(&g[..l.len()]);
        let next = dual_update(&lam, &gv, gamma, eps);
        for j in 0..l.len() {
            let free = l[j] + gamma * g[j] - gamma * eps * l[j];
            prop_assert!(next[j] >= 0.0);
            prop_assert!(close(next[j], free.max(0.0), 1e-14));
        }
    }

    #[test]
    fn two_point_estimate_scales_with_payoff_gap(
        diff in -10.0f64..10.0,
        xi in prop::collection::vec(-3.0f64..3.0, 1..4),
        sigma in 0.01f64..2.0,
    ) {
        let mu = vec![0.5; xi.len()];
        let a: Vec<f64> = mu.iter().zip(&xi).map(|(m, x)| m + sigma * x).collect();
        let m = two_point_estimate(1.0 + diff, 1.0, &a, &mu, sigma);
        for (k, mk) in m.iter().enumerate() {
            prop_assert!(close(*mk, diff * xi[k] / sigma, 1e-9));
        }
    }

    #[test]
    fn schedule_validation_matches_conditions(g in 0.3f64..1.2, e in 0.0f64..0.8, s in 0.0f64..3.0) {
        let sched = Schedules { gamma_exp: g, eps_exp: e, sigma_exp: s, ..Schedules::default() };
        let report = sched.validate();
        let expected = s + g > 1.0 && g + e < 1.0 && g > 0.5;
        // skip knife-edge draws inside the validator's tolerance
        prop_assume!((s + g - 1.0).abs() > 1e-9 && (g + e - 1.0).abs() > 1e-9 && (g - 0.5).abs() > 1e-9);
        prop_assert_eq!(report.is_valid(), expected);
        let h = (2.0 - g - e).min(g + s).min(2.0 * g);
        prop_assert!(close(report.h, h, 1e-15));
        prop_assert!(close(report.exponent, (2.0 * e).min(h - g), 1e-15));
    }

    #[test]
    fn checkpoints_are_sorted_and_end_at_horizon(horizon in 1u64..100_000, k in 1u64..500, per in 1u32..40) {
        for cadence in [Cadence::Every(k), Cadence::PerDecade(per)] {
            let pts = cadence.checkpoints(horizon);
            prop_assert_eq!(*pts.last().unwrap(), horizon);
            prop_assert!(pts.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(pts[0] >= 1);
        }
    }

    #[test]
    fn fit_recovers_planted_power_law(c in 0.01f64..100.0, p in -2.0f64..0.5) {
        let series: Vec<(u64, f64)> = (0..=40)
            .map(|k| {
                let t = 10f64.powf(3.0 + k as f64 / 20.0).round() as u64;
                (t, c * (t as f64).powf(p))
            })
            .collect();
        let fit = fit_rate(&series, 1000, 100_000).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-6);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-6);
    }

    #[test]
    fn aggregation_is_permutation_invariant(
        errs in prop::collection::vec(0.0f64..10.0, 12),
        order in Just((0..12usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let records: Vec<Record> = errs
            .iter()
            .enumerate()
            .map(|(k, &e)| Record {
                t: (k % 3) as u64 + 1,
                seed: (k / 3) as u64,
                err_primal_sq: e,
                err_dual_sq: e * 0.5,
                gamma: 1.0,
                eps: 1.0,
                sigma: 1.0,
            })
            .collect();
        let shuffled: Vec<Record> = order.iter().map(|&k| records[k]).collect();
        prop_assert_eq!(aggregate(&records), aggregate(&shuffled));
    }
}
