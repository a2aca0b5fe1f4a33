use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{BasisFamily, IntegratorModel, LqtError, WeightSchedule};

const CONDITION_LIMIT: f64 = 1e12;
const REGULARIZER: f64 = 1e-9;
const REFINEMENT_STEPS: usize = 4;

/// Control-primitive weights Ŵ plus the recursive feedback gains K̃_t.
#[derive(Clone, Debug)]
pub struct ControlPrimitiveController {
    dim: usize,
    horizon: usize,
    dt: f64,
    count: usize,
    centers: Vec<f64>,
    bandwidth: f64,
    weights: DMatrix<f64>,
    gains: Vec<DMatrix<f64>>,
    propagators: Vec<DMatrix<f64>>,
    origin: Vec<f64>,
}

/// States and commands produced by running the feedback law.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub states: Vec<DVector<f64>>,
    pub commands: Vec<DVector<f64>>,
}

impl Rollout {
    pub fn positions(&self, dim: usize) -> Vec<Vec<f64>> {
        self.states.iter().map(|x| x.rows(0, dim).iter().copied().collect()).collect()
    }
}

fn check_shapes(model: &IntegratorModel, basis: &BasisFamily, weights: &WeightSchedule) -> Result<(), LqtError> {
    if model.dim() != basis.dim() || model.dim() != weights.dim() {
        return Err(LqtError::Shape(format!(
            "dimension mismatch: model {}, basis {}, weights {}",
            model.dim(),
            basis.dim(),
            weights.dim()
        )));
    }
    if basis.horizon() != weights.horizon() {
        return Err(LqtError::Shape(format!(
            "basis covers {} commands but weights cover {}",
            basis.horizon(),
            weights.horizon()
        )));
    }
    Ok(())
}

/// Ψᵀ S̃ᵤᵀ Q̃ S̃ᵤ Ψ + Ψᵀ R Ψ and Ψᵀ S̃ᵤᵀ Q̃ S̃ₓ, accumulated block by block.
pub(crate) fn normal_equations(
    model: &IntegratorModel,
    basis: &BasisFamily,
    weights: &WeightSchedule,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let horizon = weights.horizon();
    let na = model.aug_dim();
    let batch = model.batch(horizon);
    let su_psi = &batch.su_aug * basis.matrix();
    let cols = su_psi.ncols();

    let mut normal = DMatrix::zeros(cols, cols);
    let mut rhs = DMatrix::zeros(cols, na);
    for t in 0..=horizon {
        let g = su_psi.rows(t * na, na);
        let qt = weights.augmented_q(t);
        let gq = g.transpose() * &qt;
        normal += &gq * g;
        rhs += &gq * batch.sx_aug.rows(t * na, na);
    }
    let d = model.dim();
    for t in 0..horizon {
        let psi_t = basis.step(t);
        normal += psi_t.transpose() * weights.r(t) * &psi_t;
        debug_assert_eq!(psi_t.nrows(), d);
    }
    (normal, rhs)
}

impl ControlPrimitiveController {
    /// Closed-form optimal weights (normal equations of the augmented
    /// tracking problem), solved by a regularized Cholesky factorization
    /// followed by iterative refinement against the unregularized matrix.
    pub fn solve(model: &IntegratorModel, basis: &BasisFamily, weights: &WeightSchedule) -> Result<Self, LqtError> {
        check_shapes(model, basis, weights)?;
        let (normal, rhs) = normal_equations(model, basis, weights);

        let eig = SymmetricEigen::new(normal.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(condition <= CONDITION_LIMIT) {
            return Err(LqtError::IllConditioned { condition, min_eigenvalue: min, max_eigenvalue: max });
        }

        let lambda = REGULARIZER * normal.trace();
        let mut regularized = normal.clone();
        for i in 0..regularized.nrows() {
            regularized[(i, i)] += lambda;
        }
        let chol = regularized.cholesky().ok_or(LqtError::IllConditioned {
            condition,
            min_eigenvalue: min,
            max_eigenvalue: max,
        })?;
        let mut w = chol.solve(&rhs);
        for _ in 0..REFINEMENT_STEPS {
            let residual = &rhs - &normal * &w;
            w += chol.solve(&residual);
        }

        Ok(Self {
            dim: model.dim(),
            horizon: weights.horizon(),
            dt: model.dt(),
            count: basis.count(),
            centers: basis.centers().to_vec(),
            bandwidth: basis.bandwidth(),
            weights: w,
            gains: Vec::new(),
            propagators: Vec::new(),
            origin: vec![0.0; model.dim()],
        })
    }

    /// Declares that the controller was solved for a reference translated by
    /// `-origin`. Commands are then computed from states expressed relative to
    /// `origin`, which keeps large precisions from amplifying round-off.
    pub fn with_origin(mut self, origin: &[f64]) -> Result<Self, LqtError> {
        if origin.len() != self.dim {
            return Err(LqtError::DimensionMismatch { expected: self.dim, found: origin.len() });
        }
        check_finite_slice(origin)?;
        self.origin = origin.to_vec();
        Ok(self)
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    fn local(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut local = x.clone();
        for (i, o) in self.origin.iter().enumerate() {
            local[i] -= o;
        }
        local
    }

    fn global(&self, mut x: DVector<f64>) -> DVector<f64> {
        for (i, o) in self.origin.iter().enumerate() {
            x[i] += o;
        }
        x
    }

    /// K̃_t = Ψ_t Ŵ P_t with P_t = P_{t-1} (Ã − B̃ K̃_{t-1})⁻¹ and P_0 = I.
    pub fn derive_gains(mut self, model: &IntegratorModel, basis: &BasisFamily) -> Result<Self, LqtError> {
        let na = model.aug_dim();
        let mut gains = Vec::<DMatrix<f64>>::with_capacity(self.horizon);
        let mut propagators = Vec::<DMatrix<f64>>::with_capacity(self.horizon);
        let mut p = DMatrix::<f64>::identity(na, na);
        for t in 0..self.horizon {
            if t > 0 {
                let closed = model.aug_transition(t - 1) - model.aug_input(t - 1) * &gains[t - 1];
                let inv = closed.try_inverse().ok_or(LqtError::SingularClosedLoop { step: t - 1 })?;
                p *= inv;
                if !p.iter().all(|v| v.is_finite()) {
                    return Err(LqtError::SingularClosedLoop { step: t - 1 });
                }
            }
            gains.push(basis.step(t) * &self.weights * &p);
            propagators.push(p.clone());
        }
        self.gains = gains;
        self.propagators = propagators;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn gains(&self) -> &[DMatrix<f64>] {
        &self.gains
    }

    pub fn propagator(&self, t: usize) -> &DMatrix<f64> {
        &self.propagators[t]
    }

    /// Commands of the open-loop batch solution, `u = −Ψ Ŵ x̃0`.
    pub fn batch_commands(&self, basis: &BasisFamily, start_state: &DVector<f64>) -> DVector<f64> {
        -(basis.matrix() * &self.weights * IntegratorModel::augment(&self.local(start_state)))
    }

    /// Batch-optimal state sequence `(S̃ₓ − S̃ᵤ Ψ Ŵ) x̃0`, without the constant
    /// coordinate.
    pub fn batch_states(
        &self,
        model: &IntegratorModel,
        basis: &BasisFamily,
        start_state: &DVector<f64>,
    ) -> Vec<DVector<f64>> {
        let batch = model.batch(self.horizon);
        let x0 = IntegratorModel::augment(&self.local(start_state));
        let stacked = (&batch.sx_aug - &batch.su_aug * basis.matrix() * &self.weights) * x0;
        let na = model.aug_dim();
        (0..=self.horizon)
            .map(|t| self.global(stacked.rows(t * na, na - 1).into_owned()))
            .collect()
    }

    /// Runs `u_t = −K̃_t x̃_t`. Offsets in `perturbations` are added to the
    /// state at their step before the command is computed.
    pub fn rollout(
        &self,
        model: &IntegratorModel,
        start_state: &DVector<f64>,
        perturbations: Option<&BTreeMap<usize, DVector<f64>>>,
    ) -> Result<Rollout, LqtError> {
        if self.gains.len() != self.horizon {
            return Err(LqtError::MissingGains);
        }
        if start_state.len() != model.state_dim() {
            return Err(LqtError::DimensionMismatch { expected: model.state_dim(), found: start_state.len() });
        }
        let mut states = Vec::with_capacity(self.horizon + 1);
        let mut commands = Vec::with_capacity(self.horizon);
        let mut x = start_state.clone();
        for t in 0..=self.horizon {
            if let Some(offset) = perturbations.and_then(|p| p.get(&t)) {
                x += offset;
            }
            states.push(x.clone());
            if t == self.horizon {
                break;
            }
            let u = -(&self.gains[t] * IntegratorModel::augment(&self.local(&x)));
            x = model.step(t, &x, &u);
            commands.push(u);
        }
        Ok(Rollout { states, commands })
    }

    pub fn to_record(&self) -> ControllerRecord {
        ControllerRecord {
            k: self.count,
            dim: self.dim,
            dt: self.dt,
            centers: self.centers.clone(),
            bandwidth: self.bandwidth,
            w: row_major(&self.weights),
            gains: self.gains.iter().map(row_major).collect(),
            origin: self.origin.clone(),
        }
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect()
}

/// Serialized controller: basis description, Ŵ and the gain schedule, all
/// row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerRecord {
    #[serde(rename = "K")]
    pub k: usize,
    pub dim: usize,
    pub dt: f64,
    pub centers: Vec<f64>,
    pub bandwidth: f64,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    pub gains: Vec<Vec<f64>>,
    #[serde(default)]
    pub origin: Vec<f64>,
}

impl ControllerRecord {
    /// Rebuilds the feedback law from a record. Only the gain schedule is
    /// needed to run it.
    pub fn into_controller(self) -> Result<ControlPrimitiveController, LqtError> {
        let na = 3 * self.dim + 1;
        let rows = self.k * self.dim;
        if self.w.len() != rows * na {
            return Err(LqtError::Shape(format!("W has {} entries, expected {}", self.w.len(), rows * na)));
        }
        let weights = DMatrix::from_row_slice(rows, na, &self.w);
        let mut gains = Vec::with_capacity(self.gains.len());
        for g in &self.gains {
            if g.len() != self.dim * na {
                return Err(LqtError::Shape(format!("gain has {} entries, expected {}", g.len(), self.dim * na)));
            }
            gains.push(DMatrix::from_row_slice(self.dim, na, g));
        }
        Ok(ControlPrimitiveController {
            dim: self.dim,
            horizon: gains.len(),
            dt: self.dt,
            count: self.k,
            centers: self.centers,
            bandwidth: self.bandwidth,
            weights,
            gains,
            propagators: Vec::new(),
            origin: if self.origin.is_empty() { vec![0.0; self.dim] } else { self.origin },
        })
    }
}

fn check_finite_slice(values: &[f64]) -> Result<(), LqtError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LqtError::NonFinite)
    }
}
