//! Linear quadratic tracking with control primitives (LQT-CP).
//!
//! A virtual point mass driven by a triple integrator tracks the
//! acceleration profile of a demonstration and is attracted to a goal at
//! the end of the horizon. Commands are constrained to the span of a
//! radial basis, so the whole problem reduces to estimating a weight
//! matrix; the same weights yield a time-varying feedback law.

mod basis;
mod controller;
mod model;
mod reference;
mod weights;

use nalgebra::DVector;
use thiserror::Error;

pub use basis::BasisFamily;
pub use controller::{ControlPrimitiveController, ControllerRecord, Rollout};
pub use model::{BatchSystemMatrices, IntegratorModel};
pub use reference::{ReferenceSample, ReferenceTrajectory, ViaPoint};
pub use weights::{WeightConfig, WeightSchedule};

#[cfg(test)]
pub(crate) use controller::normal_equations;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LqtError {
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
    #[error("non-finite value in trajectory input")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("weight {name} must be positive, got {value}")]
    InvalidWeight { name: &'static str, value: f64 },
    #[error("via-point step {step} outside [1, {}]", horizon.saturating_sub(1))]
    ViaIndexOutOfRange { step: usize, horizon: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("normal matrix ill-conditioned (condition {condition:.3e}, eigenvalues in [{min_eigenvalue:.3e}, {max_eigenvalue:.3e}])")]
    IllConditioned { condition: f64, min_eigenvalue: f64, max_eigenvalue: f64 },
    #[error("closed-loop transition singular at step {step}")]
    SingularClosedLoop { step: usize },
    #[error("gain schedule not derived")]
    MissingGains,
}

/// Bundles model, basis and weight config for one horizon length.
#[derive(Clone, Debug)]
pub struct MotionGenerator {
    model: IntegratorModel,
    basis: BasisFamily,
    config: WeightConfig,
}

/// Output of [`MotionGenerator::generate`].
#[derive(Clone, Debug)]
pub struct GeneratedMotion {
    pub controller: ControlPrimitiveController,
    pub rollout: Rollout,
    pub weights: WeightSchedule,
}

impl GeneratedMotion {
    pub fn positions(&self) -> Vec<Vec<f64>> {
        self.rollout.positions(self.controller.dim())
    }
}

impl MotionGenerator {
    pub fn new(dim: usize, dt: f64, horizon: usize, config: WeightConfig) -> Result<Self, LqtError> {
        Ok(Self {
            model: IntegratorModel::new(dim, dt)?,
            basis: BasisFamily::new(BasisFamily::DEFAULT_COUNT, dim, horizon)?,
            config,
        })
    }

    pub fn with_basis(model: IntegratorModel, basis: BasisFamily, config: WeightConfig) -> Self {
        Self { model, basis, config }
    }

    pub fn model(&self) -> &IntegratorModel {
        &self.model
    }

    pub fn basis(&self) -> &BasisFamily {
        &self.basis
    }

    pub fn config(&self) -> &WeightConfig {
        &self.config
    }

    /// Solves for the controller tracking `reference` and runs it from rest
    /// at the reference's first position.
    pub fn generate(&self, reference: &ReferenceTrajectory) -> Result<GeneratedMotion, LqtError> {
        reference.validate()?;
        let origin = reference.start().to_vec();
        let local = reference.translated(&origin.iter().map(|o| -o).collect::<Vec<_>>())?;
        let local_weights = WeightSchedule::from_config(&local, &self.config)?;
        let controller = ControlPrimitiveController::solve(&self.model, &self.basis, &local_weights)?
            .derive_gains(&self.model, &self.basis)?
            .with_origin(&origin)?;
        let weights = WeightSchedule::from_config(reference, &self.config)?;
        let start = rest_state(reference.start());
        let rollout = controller.rollout(&self.model, &start, None)?;
        Ok(GeneratedMotion { controller, rollout, weights })
    }
}

/// `[p; 0; 0]`.
pub fn rest_state(position: &[f64]) -> DVector<f64> {
    let d = position.len();
    let mut x = DVector::zeros(3 * d);
    x.rows_mut(0, d).copy_from_slice(position);
    x
}

#[cfg(test)]
mod tests;
