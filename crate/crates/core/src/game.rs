//! Games with jointly linear coupling constraints.
//!
//! A game has `N` players; player `i` controls a block `a^i` of the joint
//! action `a ∈ R^D` and pays `J^i(a)`. The shared feasible set is
//! `C = {a : K·a − l ≤ 0}`. Player indices are zero-based throughout the
//! crate.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};

/// Joint action of all players, stored flat with a block layout.
#[derive(Clone, Debug, PartialEq)]
pub struct JointAction {
    flat: DVector<f64>,
    offsets: Arc<[usize]>,
}

fn offsets_of(dims: &[usize]) -> Arc<[usize]> {
    let mut offsets = Vec::with_capacity(dims.len() + 1);
    let mut acc = 0;
    offsets.push(0);
    for d in dims {
        acc += d;
        offsets.push(acc);
    }
    offsets.into()
}

impl JointAction {
    pub fn zeros(dims: &[usize]) -> Self {
        let offsets = offsets_of(dims);
        let total = *offsets.last().unwrap_or(&0);
        Self {
            flat: DVector::zeros(total),
            offsets,
        }
    }

    pub fn from_flat(dims: &[usize], flat: DVector<f64>) -> Result<Self> {
        let offsets = offsets_of(dims);
        check_len("joint action", *offsets.last().unwrap_or(&0), flat.len())?;
        Ok(Self { flat, offsets })
    }

    pub fn from_blocks(blocks: &[Vec<f64>]) -> Self {
        let dims: Vec<usize> = blocks.iter().map(Vec::len).collect();
        let flat = DVector::from_iterator(
            dims.iter().sum(),
            blocks.iter().flat_map(|b| b.iter().copied()),
        );
        Self {
            flat,
            offsets: offsets_of(&dims),
        }
    }

    /// A new action with the same block layout and the given flat values.
    pub fn with_flat(&self, flat: DVector<f64>) -> Result<Self> {
        check_len("joint action", self.flat.len(), flat.len())?;
        Ok(Self {
            flat,
            offsets: Arc::clone(&self.offsets),
        })
    }

    pub fn num_players(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.flat.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.flat.as_slice()[self.block_range(i)]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let range = self.block_range(i);
        &mut self.flat.as_mut_slice()[range]
    }

    pub fn blocks(&self) -> Vec<Vec<f64>> {
        (0..self.num_players()).map(|i| self.block(i).to_vec()).collect()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.flat
    }

    pub fn as_slice(&self) -> &[f64] {
        self.flat.as_slice()
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.flat
    }
}

/// Affine coupling constraints `g(a) = K·a − l ≤ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSet {
    k: DMatrix<f64>,
    l: DVector<f64>,
    slater_point: DVector<f64>,
}

impl ConstraintSet {
    /// Builds the set and checks Slater's condition numerically.
    pub fn new(k: DMatrix<f64>, l: DVector<f64>) -> Result<Self> {
        check_len("constraint offsets l", k.nrows(), l.len())?;
        let slater_point = find_slater_point(&k, &l)?;
        Ok(Self { k, l, slater_point })
    }

    /// No coupling constraints on a `dim`-dimensional joint action.
    pub fn unconstrained(dim: usize) -> Self {
        Self {
            k: DMatrix::zeros(0, dim),
            l: DVector::zeros(0),
            slater_point: DVector::zeros(dim),
        }
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn l(&self) -> &DVector<f64> {
        &self.l
    }

    pub fn num_constraints(&self) -> usize {
        self.k.nrows()
    }

    pub fn dim(&self) -> usize {
        self.k.ncols()
    }

    /// A strictly feasible point found during construction.
    pub fn slater_point(&self) -> &DVector<f64> {
        &self.slater_point
    }

    /// Spectral norm `‖K‖`.
    pub fn k_norm(&self) -> f64 {
        if self.k.is_empty() {
            return 0.0;
        }
        self.k.singular_values().max()
    }

    pub fn value(&self, a: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("joint action", self.dim(), a.len())?;
        Ok(&self.k * a - &self.l)
    }

    pub fn is_feasible(&self, a: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.value(a)?.iter().all(|&g| g <= tol))
    }
}

/// Minimizes `max_j g_j(a)` by subgradient steps from a least-norm start.
fn find_slater_point(k: &DMatrix<f64>, l: &DVector<f64>) -> Result<DVector<f64>> {
    let (n, d) = k.shape();
    if n == 0 {
        return Ok(DVector::zeros(d));
    }
    let max_g = |a: &DVector<f64>| (k * a - l).max();

    let shifted = l.map(|v| v - 1.0);
    let mut a = k
        .clone()
        .svd(true, true)
        .solve(&shifted, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(d));
    let mut best = a.clone();
    let mut best_val = max_g(&a);
    if best_val < 0.0 {
        return Ok(best);
    }

    let scale = 1.0 + a.norm();
    for step in 0..500 {
        let g = k * &a - l;
        let worst = g.imax();
        let row = k.row(worst).transpose();
        let row_norm = row.norm();
        if row_norm == 0.0 {
            // a zero row with l_j <= 0 can never be strictly satisfied
            break;
        }
        let alpha = 0.5 * scale / ((step + 1) as f64).sqrt();
        a -= row * (alpha / row_norm);
        let val = max_g(&a);
        if val < best_val {
            best_val = val;
            best.copy_from(&a);
        }
        if best_val < 0.0 {
            return Ok(best);
        }
    }
    Err(Error::Infeasible { best: best_val })
}

/// Quadratic costs `J^i(a) = ½·aᵀA_i a + b_iᵀa`, with the stacked
/// pseudo-gradient `M(a) = P·a + q`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticGame {
    a: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
    p: DMatrix<f64>,
    q: DVector<f64>,
}

impl QuadraticGame {
    /// `a_blocks[i]` is `A_i` (D×D, symmetrized on entry) and `b_blocks[i]`
    /// is `b_i` (length D).
    pub fn new(dims: &[usize], a_blocks: Vec<DMatrix<f64>>, b_blocks: Vec<DVector<f64>>) -> Result<Self> {
        let n_players = dims.len();
        check_len("number of A_i blocks", n_players, a_blocks.len())?;
        check_len("number of b_i blocks", n_players, b_blocks.len())?;
        let d: usize = dims.iter().sum();
        let offsets = offsets_of(dims);
        let mut p = DMatrix::zeros(d, d);
        let mut q = DVector::zeros(d);
        let mut sym_blocks = Vec::with_capacity(n_players);
        for (i, (a_i, b_i)) in a_blocks.into_iter().zip(&b_blocks).enumerate() {
            check_len("rows of A_i", d, a_i.nrows())?;
            check_len("columns of A_i", d, a_i.ncols())?;
            check_len("length of b_i", d, b_i.len())?;
            let sym = (&a_i + a_i.transpose()) * 0.5;
            let (lo, hi) = (offsets[i], offsets[i + 1]);
            p.rows_mut(lo, hi - lo).copy_from(&sym.rows(lo, hi - lo));
            q.rows_mut(lo, hi - lo).copy_from(&b_i.rows(lo, hi - lo));
            sym_blocks.push(sym);
        }
        Ok(Self {
            a: sym_blocks,
            b: b_blocks,
            p,
            q,
        })
    }

    /// Builds per-player costs realizing a given pseudo-gradient `P·a + q`.
    ///
    /// The diagonal blocks `P_ii` are Hessians of `J^i` in `a^i` and must be
    /// symmetric. `extra_linear[i]`, if given, adds terms to `b_i` outside of
    /// player `i`'s block (they change cost values but not `M`).
    pub fn from_pseudo_gradient(
        dims: &[usize],
        p: DMatrix<f64>,
        q: DVector<f64>,
        extra_linear: Option<Vec<DVector<f64>>>,
    ) -> Result<Self> {
        let d: usize = dims.iter().sum();
        check_len("rows of P", d, p.nrows())?;
        check_len("columns of P", d, p.ncols())?;
        check_len("length of q", d, q.len())?;
        let offsets = offsets_of(dims);
        let mut a_blocks = Vec::with_capacity(dims.len());
        let mut b_blocks = Vec::with_capacity(dims.len());
        for i in 0..dims.len() {
            let (lo, hi) = (offsets[i], offsets[i + 1]);
            let w = hi - lo;
            let diag = p.view((lo, lo), (w, w));
            if (diag - diag.transpose()).abs().max() > 1e-12 * (1.0 + diag.abs().max()) {
                return Err(Error::InvalidArgument(format!(
                    "diagonal block {i} of P is not symmetric"
                )));
            }
            let mut a_i = DMatrix::zeros(d, d);
            a_i.rows_mut(lo, w).copy_from(&p.rows(lo, w));
            a_i.columns_mut(lo, w).copy_from(&p.rows(lo, w).transpose());
            let mut b_i = match &extra_linear {
                Some(extra) => {
                    check_len("length of extra linear term", d, extra[i].len())?;
                    extra[i].clone()
                }
                None => DVector::zeros(d),
            };
            b_i.rows_mut(lo, w).copy_from(&q.rows(lo, w));
            a_blocks.push(a_i);
            b_blocks.push(b_i);
        }
        Self::new(dims, a_blocks, b_blocks)
    }

    pub fn a(&self, i: usize) -> &DMatrix<f64> {
        &self.a[i]
    }

    pub fn b(&self, i: usize) -> &DVector<f64> {
        &self.b[i]
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn cost(&self, i: usize, a: &[f64]) -> f64 {
        let (a_i, b_i) = (&self.a[i], &self.b[i]);
        let d = a.len();
        let mut total = 0.0;
        for r in 0..d {
            let mut row = 0.0;
            for c in 0..d {
                row += a_i[(r, c)] * a[c];
            }
            total += a[r] * (0.5 * row + b_i[r]);
        }
        total
    }

    pub fn pseudo_gradient(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.p * a + &self.q
    }

    /// Strong monotonicity modulus: smallest eigenvalue of `(P + Pᵀ)/2`.
    pub fn nu(&self) -> f64 {
        let sym = (&self.p + self.p.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }

    /// Lipschitz constant of `M`: largest singular value of `P`.
    pub fn lipschitz(&self) -> f64 {
        self.p.singular_values().max()
    }
}

pub type CostFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type PseudoGradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum CostModel {
    Quadratic(QuadraticGame),
    /// Arbitrary cost evaluators. Without an analytic pseudo-gradient,
    /// gradients fall back to central finite differences.
    BlackBox {
        costs: Vec<CostFn>,
        gradient: Option<PseudoGradientFn>,
    },
}

impl fmt::Debug for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostModel::Quadratic(q) => f.debug_tuple("Quadratic").field(q).finish(),
            CostModel::BlackBox { costs, gradient } => f
                .debug_struct("BlackBox")
                .field("players", &costs.len())
                .field("analytic_gradient", &gradient.is_some())
                .finish(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GameSpec {
    name: String,
    dims: Vec<usize>,
    offsets: Arc<[usize]>,
    model: CostModel,
    constraints: ConstraintSet,
    known_nu: Option<f64>,
    known_lipschitz: Option<f64>,
}

impl GameSpec {
    pub fn new(
        name: impl Into<String>,
        dims: Vec<usize>,
        model: CostModel,
        constraints: ConstraintSet,
    ) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(
                "a game needs at least one player and positive block dimensions".into(),
            ));
        }
        let d: usize = dims.iter().sum();
        check_len("columns of K", d, constraints.dim())?;
        match &model {
            CostModel::Quadratic(q) => check_len("quadratic game dimension", d, q.p().nrows())?,
            CostModel::BlackBox { costs, .. } => {
                check_len("number of cost evaluators", dims.len(), costs.len())?
            }
        }
        Ok(Self {
            name: name.into(),
            offsets: offsets_of(&dims),
            dims,
            model,
            constraints,
            known_nu: None,
            known_lipschitz: None,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_known_nu(mut self, nu: f64) -> Self {
        self.known_nu = Some(nu);
        self
    }

    pub fn with_known_lipschitz(mut self, l: f64) -> Self {
        self.known_lipschitz = Some(l);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_players(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.num_constraints()
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn model(&self) -> &CostModel {
        &self.model
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticGame> {
        match &self.model {
            CostModel::Quadratic(q) => Some(q),
            CostModel::BlackBox { .. } => None,
        }
    }

    pub fn zero_action(&self) -> JointAction {
        JointAction::zeros(&self.dims)
    }

    pub fn action(&self, flat: &[f64]) -> Result<JointAction> {
        JointAction::from_flat(&self.dims, DVector::from_column_slice(flat))
    }

    pub(crate) fn check_player(&self, i: usize) -> Result<()> {
        if i < self.num_players() {
            Ok(())
        } else {
            Err(Error::PlayerIndex {
                index: i,
                players: self.num_players(),
            })
        }
    }

    /// `J^i(a)` on a raw flat action, without layout checks.
    pub(crate) fn cost_raw(&self, i: usize, a: &[f64]) -> f64 {
        match &self.model {
            CostModel::Quadratic(q) => q.cost(i, a),
            CostModel::BlackBox { costs, .. } => costs[i](a),
        }
    }

    pub fn evaluate_cost(&self, i: usize, a: &JointAction) -> Result<f64> {
        self.check_player(i)?;
        check_len("joint action", self.dim(), a.dim())?;
        Ok(self.cost_raw(i, a.as_slice()))
    }

    /// Stacked partial gradients `∂J^i/∂a^i`.
    ///
    /// Exact for quadratic games and black-box games with an analytic
    /// gradient; otherwise approximated by central differences with step
    /// `1e-6·(1 + ‖a‖)`.
    pub fn pseudo_gradient(&self, a: &JointAction) -> Result<DVector<f64>> {
        check_len("joint action", self.dim(), a.dim())?;
        Ok(self.pseudo_gradient_raw(a.as_vector()))
    }

    pub(crate) fn pseudo_gradient_raw(&self, a: &DVector<f64>) -> DVector<f64> {
        match &self.model {
            CostModel::Quadratic(q) => q.pseudo_gradient(a),
            CostModel::BlackBox {
                gradient: Some(grad),
                ..
            } => DVector::from_vec(grad(a.as_slice())),
            CostModel::BlackBox {
                costs,
                gradient: None,
            } => {
                let h = 1e-6 * (1.0 + a.norm());
                let mut out = DVector::zeros(a.len());
                let mut x = a.clone();
                for (i, cost) in costs.iter().enumerate() {
                    for c in self.block_range(i) {
                        let orig = x[c];
                        x[c] = orig + h;
                        let up = cost(x.as_slice());
                        x[c] = orig - h;
                        let down = cost(x.as_slice());
                        x[c] = orig;
                        out[c] = (up - down) / (2.0 * h);
                    }
                }
                out
            }
        }
    }

    pub fn constraint_value(&self, a: &JointAction) -> Result<DVector<f64>> {
        self.constraints.value(a.as_vector())
    }

    /// Strong monotonicity modulus: user-supplied, exact for quadratic
    /// games, otherwise probed.
    pub fn nu(&self) -> f64 {
        if let Some(nu) = self.known_nu {
            return nu;
        }
        match &self.model {
            CostModel::Quadratic(q) => q.nu(),
            CostModel::BlackBox { .. } => probe_monotonicity(self, DEFAULT_PROBE_PAIRS, 1.0, 0)
                .map(|p| p.value)
                .unwrap_or(f64::NAN),
        }
    }

    /// Lipschitz constant of the pseudo-gradient, resolved like [`GameSpec::nu`].
    pub fn lipschitz(&self) -> f64 {
        if let Some(l) = self.known_lipschitz {
            return l;
        }
        match &self.model {
            CostModel::Quadratic(q) => q.lipschitz(),
            CostModel::BlackBox { .. } => probe_lipschitz(self, DEFAULT_PROBE_PAIRS, 1.0, 0)
                .map(|p| p.value)
                .unwrap_or(f64::NAN),
        }
    }
}

pub const DEFAULT_PROBE_PAIRS: usize = 10_000;

/// Result of a sampled estimate of ν or L.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeEstimate {
    pub value: f64,
    pub pairs_used: usize,
    /// Set when a monotonicity estimate is not strictly positive.
    pub flagged: bool,
}

fn probe_pairs<F>(game: &GameSpec, num_pairs: usize, radius: f64, seed: u64, mut visit: F) -> Result<usize>
where
    F: FnMut(&DVector<f64>, &DVector<f64>),
{
    if num_pairs == 0 {
        return Err(Error::InvalidArgument("num_pairs must be at least 1".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("probe radius must be positive".into()));
    }
    let d = game.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = 0;
    for _ in 0..num_pairs {
        let a1 = DVector::from_fn(d, |_, _| rng.random_range(-radius..radius));
        let a2 = DVector::from_fn(d, |_, _| rng.random_range(-radius..radius));
        let diff = &a1 - &a2;
        let dist_sq = diff.norm_squared();
        if dist_sq <= f64::EPSILON * (1.0 + a1.norm_squared()) {
            continue;
        }
        let dm = game.pseudo_gradient_raw(&a1) - game.pseudo_gradient_raw(&a2);
        visit(&diff, &dm);
        used += 1;
    }
    Ok(used)
}

/// Minimum of `⟨M(a₁)−M(a₂), a₁−a₂⟩/‖a₁−a₂‖²` over sampled pairs in the
/// cube `[−radius, radius]^D`.
pub fn probe_monotonicity(game: &GameSpec, num_pairs: usize, radius: f64, seed: u64) -> Result<ProbeEstimate> {
    let mut min = f64::INFINITY;
    let used = probe_pairs(game, num_pairs, radius, seed, |diff, dm| {
        min = min.min(dm.dot(diff) / diff.norm_squared());
    })?;
    Ok(ProbeEstimate {
        value: min,
        pairs_used: used,
        flagged: !(min > 0.0),
    })
}

/// Maximum of `‖M(a₁)−M(a₂)‖/‖a₁−a₂‖` over sampled pairs.
pub fn probe_lipschitz(game: &GameSpec, num_pairs: usize, radius: f64, seed: u64) -> Result<ProbeEstimate> {
    let mut max: f64 = 0.0;
    let used = probe_pairs(game, num_pairs, radius, seed, |diff, dm| {
        max = max.max(dm.norm() / diff.norm());
    })?;
    Ok(ProbeEstimate {
        value: max,
        pairs_used: used,
        flagged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use approx::assert_relative_eq;

    fn isotropic(scale: f64) -> GameSpec {
        let dims = vec![1, 1];
        let p = DMatrix::identity(2, 2) * scale;
        let q = QuadraticGame::from_pseudo_gradient(&dims, p, DVector::zeros(2), None).unwrap();
        GameSpec::new("iso", dims, CostModel::Quadratic(q), ConstraintSet::unconstrained(2)).unwrap()
    }

    #[test]
    fn two_player_costs() {
        let game = builtin::paper_example();
        let a = game.action(&[1.0, 1.0]).unwrap();
        assert_eq!(game.evaluate_cost(0, &a).unwrap(), 2.5);
        let zero = game.zero_action();
        assert_eq!(game.evaluate_cost(1, &zero).unwrap(), 0.0);
    }

    #[test]
    fn cost_rejects_bad_inputs() {
        let game = builtin::paper_example();
        let short = JointAction::from_blocks(&[vec![1.0]]);
        match game.evaluate_cost(0, &short) {
            Err(Error::DimensionMismatch { expected, got, .. }) => {
                assert_eq!((expected, got), (2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            game.evaluate_cost(2, &game.zero_action()),
            Err(Error::PlayerIndex { index: 2, players: 2 })
        ));
    }

    #[test]
    fn two_player_pseudo_gradient() {
        let game = builtin::paper_example();
        let m = game.pseudo_gradient(&game.action(&[0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn identity_pseudo_gradient() {
        let game = isotropic(1.0);
        let a = game.action(&[0.3, -2.0]).unwrap();
        assert_eq!(game.pseudo_gradient(&a).unwrap().as_slice(), a.as_slice());
    }

    #[test]
    fn constraint_values() {
        let game = builtin::paper_example();
        let g = game.constraint_value(&game.action(&[0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(g.as_slice(), &[0.0]);
        let g = game.constraint_value(&game.action(&[1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(g.as_slice(), &[-1.0]);
    }

    #[test]
    fn slater_rejects_empty_interior() {
        // a <= 0 and -a <= 0 leaves only a single point
        let k = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let l = DVector::from_vec(vec![0.0, 0.0]);
        assert!(matches!(ConstraintSet::new(k, l), Err(Error::Infeasible { .. })));

        let k = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, -1.0]);
        let l = DVector::from_vec(vec![1.0, -2.0]);
        assert!(matches!(ConstraintSet::new(k, l), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn slater_point_is_strictly_feasible() {
        let k = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, -1.0]);
        let l = DVector::from_vec(vec![1.0, 1.0, -1.5]);
        let cs = ConstraintSet::new(k, l).unwrap();
        assert!(cs.value(cs.slater_point()).unwrap().max() < 0.0);
    }

    #[test]
    fn quadratic_constants() {
        let game = builtin::paper_example();
        let q = game.as_quadratic().unwrap();
        assert_relative_eq!(q.nu(), 1.0, epsilon = 1e-12);
        // singular values of [[3,1],[-1,1]]: sqrt(6 ± sqrt(20))
        assert_relative_eq!(q.lipschitz(), (6.0 + 20f64.sqrt()).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn probes_on_isotropic_game() {
        let game = isotropic(2.0);
        let nu = probe_monotonicity(&game, 100, 1.0, 3).unwrap();
        let l = probe_lipschitz(&game, 100, 1.0, 3).unwrap();
        assert_relative_eq!(nu.value, 2.0, epsilon = 1e-12);
        assert_relative_eq!(l.value, 2.0, epsilon = 1e-12);
        assert!(!nu.flagged);
    }

    #[test]
    fn probes_on_paper_example() {
        let game = builtin::paper_example();
        let nu = probe_monotonicity(&game, 10_000, 1.0, 11).unwrap();
        assert!((nu.value - 1.0).abs() <= 0.1, "{nu:?}");
        let l = probe_lipschitz(&game, 10_000, 1.0, 11).unwrap();
        let exact = (6.0 + 20f64.sqrt()).sqrt();
        assert!(l.value <= exact + 1e-12 && l.value >= 0.9 * exact, "{l:?}");
    }

    #[test]
    fn monotonicity_probe_flags_violation() {
        let dims = vec![1, 1];
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        let q = QuadraticGame::from_pseudo_gradient(&dims, p, DVector::zeros(2), None).unwrap();
        let game =
            GameSpec::new("bad", dims, CostModel::Quadratic(q), ConstraintSet::unconstrained(2)).unwrap();
        let est = probe_monotonicity(&game, 1000, 1.0, 0).unwrap();
        assert!(est.flagged && est.value < 0.0);
    }

    #[test]
    fn probes_skip_degenerate_pairs() {
        let dims = vec![1];
        let q = QuadraticGame::from_pseudo_gradient(&dims, DMatrix::identity(1, 1), DVector::zeros(1), None)
            .unwrap();
        let game =
            GameSpec::new("tiny", dims, CostModel::Quadratic(q), ConstraintSet::unconstrained(1)).unwrap();
        // radius so small that every sampled pair coincides to rounding
        let est = probe_lipschitz(&game, 10, 1e-300, 0).unwrap();
        assert!(est.value.is_finite());
        assert!(probe_lipschitz(&game, 0, 1.0, 0).is_err());
    }

    #[test]
    fn finite_difference_gradient_matches_quadratic() {
        let quad = builtin::random_quadratic(5).unwrap();
        let q = quad.as_quadratic().unwrap().clone();
        let costs: Vec<CostFn> = (0..quad.num_players())
            .map(|i| {
                let q = q.clone();
                Arc::new(move |a: &[f64]| q.cost(i, a)) as CostFn
            })
            .collect();
        let bb = GameSpec::new(
            "bb",
            quad.dims().to_vec(),
            CostModel::BlackBox { costs, gradient: None },
            quad.constraints().clone(),
        )
        .unwrap();
        let a = quad.action(&(0..quad.dim()).map(|k| 0.3 * k as f64 - 0.7).collect::<Vec<_>>()).unwrap();
        let exact = quad.pseudo_gradient(&a).unwrap();
        let approx = bb.pseudo_gradient(&a).unwrap();
        assert!((exact - approx).norm() <= 1e-6 * (1.0 + a.as_vector().norm()));
    }
}
