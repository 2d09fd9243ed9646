//! Built-in game families.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::game::{ConstraintSet, CostFn, CostModel, GameSpec, PseudoGradientFn, QuadraticGame};

pub const PAPER_EXAMPLE: &str = "paper-example";
pub const SOFTPLUS_COUPLED: &str = "softplus-coupled";

/// Point through which every softplus kink of [`softplus_paper_example`]
/// passes: the v-GNE of [`paper_example`].
pub const SOFTPLUS_ANCHOR: [f64; 2] = [0.0, 1.0];

/// Two scalar players with `J¹ = 3/2·(a¹)² + a¹a²`, `J² = ½·(a²)² − a¹a²`
/// and the shared constraint `a¹ + a² ≥ 1`. Its v-GNE is `a* = [0, 1]`
/// with multiplier `λ* = 1`.
pub fn paper_example() -> GameSpec {
    let dims = vec![1, 1];
    let a1 = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 0.0]);
    let a2 = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 1.0]);
    let quad = QuadraticGame::new(&dims, vec![a1, a2], vec![DVector::zeros(2), DVector::zeros(2)])
        .expect("static game data");
    let constraints = ConstraintSet::new(
        DMatrix::from_row_slice(1, 2, &[-1.0, -1.0]),
        DVector::from_vec(vec![-1.0]),
    )
    .expect("static constraint data");
    GameSpec::new(PAPER_EXAMPLE, dims, CostModel::Quadratic(quad), constraints).expect("static game")
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Seeded random strongly monotone quadratic game with `2 ≤ D ≤ 6`
/// and `1 ≤ n ≤ 3` coupling constraints.
///
/// `P = BBᵀ/D + ½I + S` with `S` skew-symmetric outside the diagonal
/// blocks, so `ν ≥ ½`. Constraints are built around a point displaced
/// from the unconstrained equilibrium, and the first one always excludes
/// that equilibrium, so at least one constraint binds.
pub fn random_quadratic(seed: u64) -> Result<GameSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(2..=6usize);
    let players = rng.random_range(2..=d.min(3));
    let n = rng.random_range(1..=3usize);

    // split d into `players` positive parts
    let mut dims = vec![1usize; players];
    for _ in players..d {
        let idx = rng.random_range(0..players);
        dims[idx] += 1;
    }
    let mut offsets = vec![0];
    for di in &dims {
        offsets.push(offsets.last().unwrap() + di);
    }

    let b = DMatrix::from_fn(d, d, |_, _| normal(&mut rng));
    let mut p = &b * b.transpose() / d as f64 + DMatrix::identity(d, d) * 0.5;
    let c = DMatrix::from_fn(d, d, |_, _| normal(&mut rng));
    let mut skew = (&c - c.transpose()) * 0.5;
    for i in 0..players {
        let (lo, w) = (offsets[i], dims[i]);
        skew.view_mut((lo, lo), (w, w)).fill(0.0);
    }
    p += skew;
    let q = DVector::from_fn(d, |_, _| normal(&mut rng));
    let extra: Vec<DVector<f64>> = (0..players)
        .map(|_| DVector::from_fn(d, |_, _| normal(&mut rng)))
        .collect();

    let k = DMatrix::from_fn(n, d, |_, _| normal(&mut rng));
    let unconstrained = p
        .clone()
        .lu()
        .solve(&(-&q))
        .ok_or_else(|| Error::InvalidArgument("singular random pseudo-gradient".into()))?;
    let mut shift = DVector::from_fn(d, |_, _| 1.5 * normal(&mut rng));
    let slack = DVector::from_fn(n, |_, _| rng.random_range(0.1..1.0));
    // the first constraint must cut off the unconstrained equilibrium
    let along = k.row(0).dot(&shift.transpose());
    if along > 0.0 {
        shift = -shift;
    }
    let along = along.abs();
    if along < 2.0 * slack[0] {
        shift *= 2.0 * slack[0] / along.max(1e-12);
    }
    let l = &k * (unconstrained + shift) + slack;

    let quad = QuadraticGame::from_pseudo_gradient(&dims, p, q, Some(extra))?;
    let constraints = ConstraintSet::new(k, l)?;
    GameSpec::new(format!("random:{seed}"), dims, CostModel::Quadratic(quad), constraints)
}

/// Shape of the softplus perturbation in [`softplus_coupled`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoftplusParams {
    /// Weight `c` of the perturbation in each cost.
    pub strength: f64,
    /// Weight `κ` of the other players' first coordinates.
    pub coupling: f64,
    /// Sharpness `β` of the softplus.
    pub sharpness: f64,
}

impl Default for SoftplusParams {
    fn default() -> Self {
        Self {
            strength: 1.0,
            coupling: 0.2,
            sharpness: 1000.0,
        }
    }
}

/// `softplus_β(x) = ln(1 + e^{βx})/β`, evaluated without overflow.
pub fn softplus(x: f64, beta: f64) -> f64 {
    x.max(0.0) + (-(beta * x).abs()).exp().ln_1p() / beta
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `φ(x) = ½·softplus_β(x)²`: convex, quadratic growth, Lipschitz
/// derivative, and a curvature jump of width `1/β` at zero.
pub fn squashed_square(x: f64, beta: f64) -> f64 {
    0.5 * softplus(x, beta).powi(2)
}

pub fn squashed_square_derivative(x: f64, beta: f64) -> f64 {
    softplus(x, beta) * logistic(beta * x)
}

/// Adds `c·φ(w_i·a − w_i·anchor)` to each cost of a quadratic base game,
/// where `w_i` weights player `i`'s first coordinate by 1 and every other
/// player's first coordinate by `κ`. The kinks of all perturbations pass
/// through `anchor`.
pub fn softplus_coupled(base: &GameSpec, anchor: &DVector<f64>, params: SoftplusParams) -> Result<GameSpec> {
    let quad = base.as_quadratic().ok_or(Error::NotQuadratic)?.clone();
    let d = base.dim();
    if anchor.len() != d {
        return Err(Error::DimensionMismatch {
            what: "softplus anchor",
            expected: d,
            got: anchor.len(),
        });
    }
    let players = base.num_players();
    let firsts: Vec<usize> = (0..players).map(|i| base.block_range(i).start).collect();
    let weights: Vec<Vec<(usize, f64)>> = (0..players)
        .map(|i| {
            firsts
                .iter()
                .enumerate()
                .map(|(j, &c)| (c, if j == i { 1.0 } else { params.coupling }))
                .collect()
        })
        .collect();
    let shifts: Vec<f64> = weights
        .iter()
        .map(|w| w.iter().map(|&(c, wc)| wc * anchor[c]).sum())
        .collect();
    let weights = Arc::new(weights);
    let shifts = Arc::new(shifts);
    let argument = {
        let weights = Arc::clone(&weights);
        let shifts = Arc::clone(&shifts);
        move |i: usize, a: &[f64]| -> f64 {
            weights[i].iter().map(|&(c, wc)| wc * a[c]).sum::<f64>() - shifts[i]
        }
    };
    let argument = Arc::new(argument);

    let costs: Vec<CostFn> = (0..players)
        .map(|i| {
            let quad = quad.clone();
            let argument = Arc::clone(&argument);
            Arc::new(move |a: &[f64]| {
                quad.cost(i, a) + params.strength * squashed_square(argument(i, a), params.sharpness)
            }) as CostFn
        })
        .collect();
    let gradient: PseudoGradientFn = {
        let argument = Arc::clone(&argument);
        let firsts = firsts.clone();
        Arc::new(move |a: &[f64]| {
            let mut m = quad.pseudo_gradient(&DVector::from_column_slice(a));
            for (i, &c) in firsts.iter().enumerate() {
                m[c] += params.strength * squashed_square_derivative(argument(i, a), params.sharpness);
            }
            m.as_slice().to_vec()
        })
    };
    // the perturbation Jacobian is bounded by c·sup φ''·(1 + κ·(N−1))
    let lipschitz = base.lipschitz() + params.strength * 1.2 * (1.0 + params.coupling * (players - 1) as f64);
    Ok(GameSpec::new(
        format!("{}+softplus", base.name()),
        base.dims().to_vec(),
        CostModel::BlackBox {
            costs,
            gradient: Some(gradient),
        },
        base.constraints().clone(),
    )?
    .with_known_lipschitz(lipschitz))
}

/// The softplus family on top of [`paper_example`], anchored at its v-GNE.
pub fn softplus_paper_example() -> GameSpec {
    softplus_coupled(
        &paper_example(),
        &DVector::from_column_slice(&SOFTPLUS_ANCHOR),
        SoftplusParams::default(),
    )
    .expect("static game")
    .with_name(SOFTPLUS_COUPLED)
}

/// Resolves `paper-example`, `softplus-coupled` and `random:<seed>`.
pub fn by_name(name: &str) -> Option<Result<GameSpec>> {
    match name {
        PAPER_EXAMPLE => Some(Ok(paper_example())),
        SOFTPLUS_COUPLED => Some(Ok(softplus_paper_example())),
        _ => {
            let seed = name.strip_prefix("random:")?;
            Some(
                seed.parse::<u64>()
                    .map_err(|e| Error::Config(format!("bad random game seed {seed:?}: {e}")))
                    .and_then(random_quadratic),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{probe_lipschitz, probe_monotonicity};

    #[test]
    fn random_games_are_well_formed() {
        for seed in 0..50 {
            let game = random_quadratic(seed).unwrap();
            assert!((2..=6).contains(&game.dim()));
            assert!((1..=3).contains(&game.num_constraints()));
            let q = game.as_quadratic().unwrap();
            assert!(q.nu() >= 0.5 - 1e-12);
            assert!(game.constraints().value(game.constraints().slater_point()).unwrap().max() < 0.0);
            let sol = crate::oracle::solve_vgne(&game, 1e-12).unwrap();
            assert!(!sol.active_set.is_empty(), "seed {seed}");
        }
    }

    #[test]
    fn random_games_are_deterministic() {
        let a = random_quadratic(7).unwrap();
        let b = random_quadratic(7).unwrap();
        assert_eq!(a.as_quadratic(), b.as_quadratic());
        assert_eq!(a.constraints(), b.constraints());
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1e6, 1000.0), 1e6);
        assert!(softplus(-1e6, 1000.0) >= 0.0);
        assert!((softplus(0.0, 1000.0) - 2f64.ln() / 1000.0).abs() < 1e-15);
    }

    #[test]
    fn softplus_family_keeps_monotonicity() {
        let game = softplus_paper_example();
        let nu = probe_monotonicity(&game, 10_000, 2.0, 1).unwrap();
        assert!(!nu.flagged && nu.value > 0.8, "{nu:?}");
        let l = probe_lipschitz(&game, 10_000, 2.0, 1).unwrap();
        assert!(l.value <= game.lipschitz());
    }

    #[test]
    fn softplus_gradient_matches_finite_differences() {
        let game = softplus_paper_example();
        let model = game.model().clone();
        let CostModel::BlackBox { costs, .. } = model else { unreachable!() };
        for point in [[0.0, 1.0], [0.3, 0.2], [-0.5, 1.7]] {
            let a = game.action(&point).unwrap();
            let m = game.pseudo_gradient(&a).unwrap();
            for i in 0..2 {
                let h = 1e-6;
                let mut up = point;
                let mut down = point;
                up[i] += h;
                down[i] -= h;
                let fd = (costs[i](&up) - costs[i](&down)) / (2.0 * h);
                assert!((fd - m[i]).abs() < 1e-5 * (1.0 + fd.abs()), "{point:?} {i}: {fd} vs {}", m[i]);
            }
        }
    }

    #[test]
    fn lookup_by_name() {
        assert!(by_name("paper-example").unwrap().is_ok());
        assert!(by_name("random:3").unwrap().is_ok());
        assert!(by_name("random:x").unwrap().is_err());
        assert!(by_name("nope").is_none());
    }
}
