//! The dual-extended game: primal players pay Lagrangians
//! `U^i(a, λ) = J^i(a) + ⟨λ, K·a − l⟩` and a dual player pays
//! `−⟨λ, K·a − l⟩` over `λ ∈ R^n_+`.

use nalgebra::DVector;

use crate::error::{check_len, Result};
use crate::game::{GameSpec, JointAction};

/// A point `z = [a, λ]` of the extended game.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedPoint {
    pub primal: JointAction,
    pub dual: DVector<f64>,
}

impl AugmentedPoint {
    pub fn new(primal: JointAction, dual: DVector<f64>) -> Self {
        Self { primal, dual }
    }

    /// Stacks `[a, λ]` into one vector of length `D + n`.
    pub fn concatenate(&self) -> DVector<f64> {
        let d = self.primal.dim();
        let mut out = DVector::zeros(d + self.dual.len());
        out.rows_mut(0, d).copy_from(self.primal.as_vector());
        out.rows_mut(d, self.dual.len()).copy_from(&self.dual);
        out
    }

    pub fn project_dual(&mut self) {
        self.dual.apply(|v| *v = v.max(0.0));
    }
}

/// Tikhonov weight `ε_t ≥ 0` applied to the dual block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regularization {
    epsilon: f64,
}

impl Regularization {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon >= 0.0 && epsilon.is_finite() {
            Ok(Self { epsilon })
        } else {
            Err(crate::Error::InvalidArgument(format!(
                "regularization weight must be finite and nonnegative, got {epsilon}"
            )))
        }
    }

    pub fn none() -> Self {
        Self { epsilon: 0.0 }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

fn check_point(game: &GameSpec, z: &AugmentedPoint) -> Result<()> {
    check_len("joint action", game.dim(), z.primal.dim())?;
    check_len("dual variable", game.num_constraints(), z.dual.len())
}

/// `U^i(a, λ) = J^i(a) + ⟨λ, K·a − l⟩`.
pub fn augmented_cost(game: &GameSpec, i: usize, z: &AugmentedPoint) -> Result<f64> {
    check_point(game, z)?;
    let j = game.evaluate_cost(i, &z.primal)?;
    let g = game.constraint_value(&z.primal)?;
    Ok(j + z.dual.dot(&g))
}

/// `U^{N+1}(a, λ) = −⟨λ, K·a − l⟩`.
pub fn dual_cost(game: &GameSpec, z: &AugmentedPoint) -> Result<f64> {
    check_point(game, z)?;
    let g = game.constraint_value(&z.primal)?;
    Ok(-z.dual.dot(&g))
}

/// `W(a, λ)`: primal blocks `M^i(a) + (Kᵀλ)^i`, dual block `−K·a + l`.
pub fn extended_pseudo_gradient(game: &GameSpec, z: &AugmentedPoint) -> Result<DVector<f64>> {
    check_point(game, z)?;
    Ok(extended_raw(game, z.primal.as_vector(), &z.dual, 0.0))
}

pub(crate) fn extended_raw(game: &GameSpec, a: &DVector<f64>, lambda: &DVector<f64>, eps: f64) -> DVector<f64> {
    let cs = game.constraints();
    let d = a.len();
    let n = lambda.len();
    let mut out = DVector::zeros(d + n);
    let primal = game.pseudo_gradient_raw(a) + cs.k().tr_mul(lambda);
    out.rows_mut(0, d).copy_from(&primal);
    let dual = cs.l() - cs.k() * a + lambda * eps;
    out.rows_mut(d, n).copy_from(&dual);
    out
}

/// First `D` coordinates of an extended pseudo-gradient (`W^pr`).
pub fn primal_block(w: &DVector<f64>, d: usize) -> Result<DVector<f64>> {
    if w.len() < d {
        return Err(crate::Error::DimensionMismatch {
            what: "extended pseudo-gradient",
            expected: d,
            got: w.len(),
        });
    }
    Ok(w.rows(0, d).into_owned())
}

/// `W_t(a, λ) = W(a, λ) + [0, …, 0, ε_t·λ]`.
pub fn regularized_pseudo_gradient(
    game: &GameSpec,
    z: &AugmentedPoint,
    reg: Regularization,
) -> Result<DVector<f64>> {
    check_point(game, z)?;
    Ok(extended_raw(game, z.primal.as_vector(), &z.dual, reg.epsilon()))
}
