//! Exact first-order solvers used as ground truth.
//!
//! For quadratic games `M(a) = P·a + q`, the v-GNE and the solutions of the
//! Tikhonov-regularized problem are found by enumerating active sets of the
//! complementarity system
//!
//! ```text
//! P·a + Kᵀλ + q = 0,   λ ≥ 0,   ε·λ − g(a) ≥ 0,   λ ⊥ (ε·λ − g(a)).
//! ```

use nalgebra::{DMatrix, DVector};

use crate::augmented::{extended_raw, AugmentedPoint};
use crate::error::{Error, Result};
use crate::game::{GameSpec, JointAction};
use crate::learner::{dual_update, Schedules};

/// Largest constraint count accepted by the active-set enumeration.
pub const MAX_ENUMERATED_CONSTRAINTS: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub primal: JointAction,
    pub dual: DVector<f64>,
    /// Constraints binding at the solution.
    pub active_set: Vec<usize>,
    /// `‖M(a*) + Kᵀλ*‖`
    pub stationarity_residual: f64,
    /// `max_j |λ*_j·g_j(a*)|`
    pub complementarity_residual: f64,
    /// `max_j max(g_j(a*), 0)`
    pub feasibility_violation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedSolution {
    pub primal: JointAction,
    pub dual: DVector<f64>,
    pub epsilon: f64,
    /// `‖M(a) + Kᵀλ‖`
    pub stationarity_residual: f64,
    /// `max_j |λ_j·(g_j(a) − ε·λ_j)|`
    pub complementarity_residual: f64,
    /// `max_j max(g_j(a) − ε·λ_j, 0)`
    pub feasibility_violation: f64,
}

fn masks_by_size(n: usize) -> Vec<u32> {
    let mut masks: Vec<u32> = (0..(1u32 << n)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    masks
}

fn members(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|j| mask & (1 << j) != 0).collect()
}

/// Solves the KKT system for every active set until one satisfies all
/// sign conditions.
fn enumerate_active_sets(game: &GameSpec, eps: f64, tol: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let quad = game.as_quadratic().ok_or(Error::NotQuadratic)?;
    let cs = game.constraints();
    let (n, d) = (cs.num_constraints(), cs.dim());
    if n > MAX_ENUMERATED_CONSTRAINTS {
        return Err(Error::TooManyConstraints {
            n,
            limit: MAX_ENUMERATED_CONSTRAINTS,
        });
    }
    let (p, q, k, l) = (quad.p(), quad.q(), cs.k(), cs.l());
    let scale = 1.0 + p.abs().max() + k.abs().max() + q.abs().max() + l.abs().max();
    let check_tol = tol.max(1e-9) * scale;

    for mask in masks_by_size(n) {
        let active = members(mask, n);
        let m = active.len();
        let mut kkt = DMatrix::zeros(d + m, d + m);
        kkt.view_mut((0, 0), (d, d)).copy_from(p);
        let mut rhs = DVector::zeros(d + m);
        rhs.rows_mut(0, d).copy_from(&(-q));
        for (r, &j) in active.iter().enumerate() {
            let row = k.row(j);
            kkt.view_mut((d + r, 0), (1, d)).copy_from(&row);
            kkt.view_mut((0, d + r), (d, 1)).copy_from(&row.transpose());
            kkt[(d + r, d + r)] = -eps;
            rhs[d + r] = l[j];
        }
        let Ok(x) = kkt.clone().svd(true, true).solve(&rhs, 1e-13) else {
            continue;
        };
        if (&kkt * &x - &rhs).amax() > check_tol {
            continue;
        }
        let a = x.rows(0, d).into_owned();
        let mut lambda = DVector::zeros(n);
        for (r, &j) in active.iter().enumerate() {
            lambda[j] = x[d + r];
        }
        if lambda.iter().any(|&v| v < -check_tol) {
            continue;
        }
        let g = k * &a - l;
        let inactive_ok = (0..n)
            .filter(|j| mask & (1 << j) == 0)
            .all(|j| g[j] <= check_tol);
        if !inactive_ok {
            continue;
        }
        lambda.apply(|v| *v = v.max(0.0));
        return Ok((a, lambda));
    }
    Err(Error::NoKktSolution)
}

/// Least-norm nonnegative multiplier with `Kᵀλ = r`, supported on `rows`.
///
/// The optimum restricted to its support `B` is the pseudo-inverse solution
/// of `K_Bᵀλ_B = r`, so enumerating supports finds it.
fn least_norm_multiplier(k: &DMatrix<f64>, rows: &[usize], r: &DVector<f64>, tol: f64) -> Option<DVector<f64>> {
    let n = k.nrows();
    let mut best: Option<DVector<f64>> = None;
    for mask in masks_by_size(rows.len()) {
        let support: Vec<usize> = members(mask, rows.len()).into_iter().map(|s| rows[s]).collect();
        let kt = DMatrix::from_fn(k.ncols(), support.len(), |c, s| k[(support[s], c)]);
        let lam_b = if support.is_empty() {
            DVector::zeros(0)
        } else {
            match kt.clone().svd(true, true).solve(r, 1e-13) {
                Ok(v) => v,
                Err(_) => continue,
            }
        };
        if (&kt * &lam_b - r).amax() > tol || lam_b.iter().any(|&v| v < -tol) {
            continue;
        }
        let mut lambda = DVector::zeros(n);
        for (s, &j) in support.iter().enumerate() {
            lambda[j] = lam_b[s].max(0.0);
        }
        if best.as_ref().is_none_or(|b| lambda.norm() < b.norm()) {
            best = Some(lambda);
        }
    }
    best
}

/// The variational GNE of a strongly monotone quadratic game.
///
/// When multipliers are not unique, the one of least norm is returned.
pub fn solve_vgne(game: &GameSpec, tol: f64) -> Result<OracleSolution> {
    let (a, lambda) = enumerate_active_sets(game, 0.0, tol)?;
    let cs = game.constraints();
    let g = cs.k() * &a - cs.l();
    let scale = 1.0 + g.amax().max(a.amax());
    let binding: Vec<usize> = (0..g.len()).filter(|&j| g[j].abs() <= 1e-9 * scale).collect();
    let m = game.pseudo_gradient_raw(&a);
    let residual_tol = 1e-9 * (1.0 + m.amax());
    let dual = least_norm_multiplier(cs.k(), &binding, &(-&m), residual_tol).unwrap_or(lambda);
    Ok(build_solution(game, a, dual))
}

fn build_solution(game: &GameSpec, a: DVector<f64>, dual: DVector<f64>) -> OracleSolution {
    let cs = game.constraints();
    let g = cs.k() * &a - cs.l();
    let stationarity = (game.pseudo_gradient_raw(&a) + cs.k().tr_mul(&dual)).norm();
    let complementarity = dual.component_mul(&g).amax();
    let scale = 1.0 + g.amax().max(a.amax());
    let active_set = (0..g.len()).filter(|&j| g[j].abs() <= 1e-9 * scale).collect();
    OracleSolution {
        primal: JointAction::from_flat(game.dims(), a).expect("solver keeps the layout"),
        dual,
        active_set,
        stationarity_residual: stationarity,
        complementarity_residual: if g.is_empty() { 0.0 } else { complementarity },
        feasibility_violation: g.iter().fold(0.0, |acc, &v| acc.max(v)),
    }
}

fn build_regularized(game: &GameSpec, a: DVector<f64>, dual: DVector<f64>, eps: f64) -> RegularizedSolution {
    let cs = game.constraints();
    let slack = cs.k() * &a - cs.l() - &dual * eps;
    let stationarity = (game.pseudo_gradient_raw(&a) + cs.k().tr_mul(&dual)).norm();
    RegularizedSolution {
        primal: JointAction::from_flat(game.dims(), a).expect("solver keeps the layout"),
        complementarity_residual: dual.component_mul(&slack).iter().fold(0.0, |acc, v| acc.max(v.abs())),
        feasibility_violation: slack.iter().fold(0.0, |acc, &v| acc.max(v)),
        dual,
        epsilon: eps,
        stationarity_residual: stationarity,
    }
}

/// The unique solution of the regularized problem with weight `eps > 0`.
pub fn solve_regularized_vi(game: &GameSpec, eps: f64, tol: f64) -> Result<RegularizedSolution> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("regularization weight must be positive, got {eps}")));
    }
    let (a, lambda) = enumerate_active_sets(game, eps, tol)?;
    Ok(build_regularized(game, a, lambda, eps))
}

/// Projected extragradient on `W_ε` with step `1/(2·(L + ‖K‖ + ε))`.
///
/// Works for any game; stops once the natural residual
/// `‖z − Π[z − W_ε(z)]‖` drops below `tol`.
pub fn extragradient(game: &GameSpec, eps: f64, tol: f64, max_iter: usize) -> Result<RegularizedSolution> {
    if eps < 0.0 {
        return Err(Error::InvalidArgument(format!("regularization weight must be nonnegative, got {eps}")));
    }
    let d = game.dim();
    let n = game.num_constraints();
    let step = 1.0 / (2.0 * (game.lipschitz() + game.constraints().k_norm() + eps));
    let project = |z: &mut DVector<f64>| {
        for j in d..d + n {
            z[j] = z[j].max(0.0);
        }
    };
    let field = |z: &DVector<f64>| {
        let a = z.rows(0, d).into_owned();
        let lambda = z.rows(d, n).into_owned();
        extended_raw(game, &a, &lambda, eps)
    };

    let mut z = DVector::zeros(d + n);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let w = field(&z);
        let mut natural = &z - &w;
        project(&mut natural);
        residual = (&z - natural).norm();
        if residual <= tol {
            let a = z.rows(0, d).into_owned();
            let lambda = z.rows(d, n).into_owned();
            return Ok(build_regularized(game, a, lambda, eps));
        }
        let mut half = &z - &w * step;
        project(&mut half);
        let mut next = &z - field(&half) * step;
        project(&mut next);
        z = next;
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        last_step: residual,
    })
}

/// Exact-gradient counterpart of the payoff-based learner:
/// `μ ← μ − γ_t·W^pr(μ, λ)`, `λ ← Π_+[λ − γ_t·(−g(μ) + ε_t·λ)]`.
///
/// Returns the initial point followed by `horizon` iterates.
pub fn first_order_trajectory(
    game: &GameSpec,
    sched: &Schedules,
    horizon: u64,
    init: Option<AugmentedPoint>,
) -> Result<Vec<AugmentedPoint>> {
    let init = init.unwrap_or_else(|| AugmentedPoint::new(game.zero_action(), DVector::zeros(game.num_constraints())));
    crate::error::check_len("joint action", game.dim(), init.primal.dim())?;
    crate::error::check_len("dual variable", game.num_constraints(), init.dual.len())?;
    let cs = game.constraints();
    let mut points = Vec::with_capacity(horizon as usize + 1);
    let mut mu = init.primal.as_vector().clone();
    let mut lambda = init.dual.map(|v| v.max(0.0));
    points.push(init);
    for t in 1..=horizon {
        let gamma = sched.gamma(t);
        let eps = sched.eps(t);
        let w_pr = game.pseudo_gradient_raw(&mu) + cs.k().tr_mul(&lambda);
        let g = cs.k() * &mu - cs.l();
        mu -= w_pr * gamma;
        lambda = dual_update(&lambda, &g, gamma, eps);
        points.push(AugmentedPoint::new(JointAction::from_flat(game.dims(), mu.clone())?, lambda.clone()));
    }
    Ok(points)
}
