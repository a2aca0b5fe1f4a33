use nalgebra::{DMatrix, DVector};

use super::{LqtError, ReferenceTrajectory, ViaPoint};

/// Scalar weights used to assemble a [`WeightSchedule`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightConfig {
    pub track_acc_weight: f64,
    pub terminal_pos_weight: f64,
    pub r_weight: f64,
    pub via_precision: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self { track_acc_weight: 1.0, terminal_pos_weight: 1e8, r_weight: 1e-5, via_precision: 1e8 }
    }
}

/// Per-step precision and command weights together with the tracked targets
/// μ_t (via-point positions already written in).
#[derive(Clone, Debug)]
pub struct WeightSchedule {
    dim: usize,
    targets: Vec<DVector<f64>>,
    q: Vec<DMatrix<f64>>,
    r: Vec<DMatrix<f64>>,
    via: Vec<ViaPoint>,
}

impl WeightSchedule {
    /// Interior steps track acceleration, the last step tracks the goal
    /// position, and every via-point pins the position at its step.
    pub fn build(
        reference: &ReferenceTrajectory,
        track_acc_weight: f64,
        terminal_pos_weight: f64,
        r_weight: f64,
        via: &[ViaPoint],
    ) -> Result<Self, LqtError> {
        for (name, w) in [
            ("track_acc_weight", track_acc_weight),
            ("terminal_pos_weight", terminal_pos_weight),
            ("r_weight", r_weight),
        ] {
            if !(w > 0.0) || !w.is_finite() {
                return Err(LqtError::InvalidWeight { name, value: w });
            }
        }
        let dim = reference.dim();
        let horizon = reference.horizon();
        if horizon < 1 {
            return Err(LqtError::TooFewSamples(reference.steps.len()));
        }
        let n = 3 * dim;
        let mut targets: Vec<DVector<f64>> = reference
            .steps
            .iter()
            .map(|s| DVector::from_iterator(n, s.p.iter().chain(&s.v).chain(&s.a).copied()))
            .collect();
        for (t, g) in targets[horizon].iter_mut().zip(&reference.goal[..dim]) {
            *t = *g;
        }

        let mut q = vec![DMatrix::zeros(n, n); horizon + 1];
        for qt in q.iter_mut().take(horizon).skip(1) {
            for i in 0..dim {
                qt[(2 * dim + i, 2 * dim + i)] = track_acc_weight;
            }
        }
        for i in 0..dim {
            q[horizon][(i, i)] = terminal_pos_weight;
        }
        for v in via {
            if v.step == 0 || v.step >= horizon {
                return Err(LqtError::ViaIndexOutOfRange { step: v.step, horizon });
            }
            if v.position.len() != dim {
                return Err(LqtError::DimensionMismatch { expected: dim, found: v.position.len() });
            }
            if !(v.precision > 0.0) || !v.precision.is_finite() {
                return Err(LqtError::InvalidWeight { name: "via precision", value: v.precision });
            }
            for i in 0..dim {
                targets[v.step][i] = v.position[i];
                q[v.step][(i, i)] += v.precision;
            }
        }
        let r = vec![DMatrix::identity(dim, dim) * r_weight; horizon];
        Ok(Self { dim, targets, q, r, via: via.to_vec() })
    }

    /// Builds from a config, using the reference's own via-points at the
    /// configured precision.
    pub fn from_config(reference: &ReferenceTrajectory, config: &WeightConfig) -> Result<Self, LqtError> {
        let via: Vec<ViaPoint> = reference
            .via
            .iter()
            .map(|v| ViaPoint { precision: config.via_precision, ..v.clone() })
            .collect();
        Self::build(reference, config.track_acc_weight, config.terminal_pos_weight, config.r_weight, &via)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.q.len() - 1
    }

    pub fn target(&self, t: usize) -> &DVector<f64> {
        &self.targets[t]
    }

    pub fn q(&self, t: usize) -> &DMatrix<f64> {
        &self.q[t]
    }

    pub fn r(&self, t: usize) -> &DMatrix<f64> {
        &self.r[t]
    }

    pub fn via(&self) -> &[ViaPoint] {
        &self.via
    }

    /// Q̃_t = [I 0; -μᵀ 1] · diag(Q_t, 1) · [I -μ; 0 1].
    pub fn augmented_q(&self, t: usize) -> DMatrix<f64> {
        let n = 3 * self.dim;
        let mu = &self.targets[t];
        let mut left = DMatrix::identity(n + 1, n + 1);
        let mut right = DMatrix::identity(n + 1, n + 1);
        for i in 0..n {
            left[(n, i)] = -mu[i];
            right[(i, n)] = -mu[i];
        }
        let mut mid = DMatrix::zeros(n + 1, n + 1);
        mid.view_mut((0, 0), (n, n)).copy_from(&self.q[t]);
        mid[(n, n)] = 1.0;
        left * mid * right
    }

    /// (μ−x)ᵀQ(μ−x) + uᵀRu over the whole horizon.
    pub fn cost(&self, states: &[DVector<f64>], commands: &[DVector<f64>]) -> f64 {
        let tracking: f64 = states
            .iter()
            .zip(&self.targets)
            .zip(&self.q)
            .map(|((x, mu), q)| {
                let e = mu - x;
                (e.transpose() * q * &e)[(0, 0)]
            })
            .sum();
        let effort: f64 = commands
            .iter()
            .zip(&self.r)
            .map(|(u, r)| (u.transpose() * r * u)[(0, 0)])
            .sum();
        tracking + effort
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(n: usize) -> ReferenceTrajectory {
        let positions: Vec<Vec<f64>> = (0..n).map(|k| vec![k as f64 * 0.01, 0.5]).collect();
        let goal = positions[n - 1].clone();
        ReferenceTrajectory::from_positions(&positions, 0.01, &goal).unwrap()
    }

    #[test]
    fn two_block_patterns_without_via() {
        let r = straight(11);
        let w = WeightSchedule::build(&r, 2.0, 1e4, 1e-5, &[]).unwrap();
        assert!(w.q(0).iter().all(|v| *v == 0.0));
        for t in 1..10 {
            let q = w.q(t);
            for i in 0..6 {
                for j in 0..6 {
                    let expected = if i == j && i >= 4 { 2.0 } else { 0.0 };
                    assert_eq!(q[(i, j)], expected);
                }
            }
        }
        let q = w.q(10);
        assert_eq!(q[(0, 0)], 1e4);
        assert_eq!(q[(1, 1)], 1e4);
        assert_eq!(q.iter().filter(|v| **v != 0.0).count(), 2);
        assert_eq!(w.r(3)[(1, 1)], 1e-5);
    }

    #[test]
    fn via_point_only_touches_its_step() {
        let r = straight(11);
        let base = WeightSchedule::build(&r, 1.0, 1e4, 1e-5, &[]).unwrap();
        let via = [ViaPoint { step: 5, position: vec![0.2, 0.7], precision: 1e4 }];
        let w = WeightSchedule::build(&r, 1.0, 1e4, 1e-5, &via).unwrap();
        for t in 0..=10 {
            if t == 5 {
                assert_eq!(w.q(t)[(0, 0)], 1e4);
                assert_eq!(w.target(t)[0], 0.2);
                assert_eq!(w.target(t)[1], 0.7);
            } else {
                assert_eq!(w.q(t), base.q(t));
                assert_eq!(w.target(t), base.target(t));
            }
        }
    }

    #[test]
    fn rejects_bad_via_index_and_weights() {
        let r = straight(11);
        for step in [0, 10, 11] {
            let via = [ViaPoint { step, position: vec![0.0, 0.0], precision: 1.0 }];
            assert!(matches!(
                WeightSchedule::build(&r, 1.0, 1.0, 1.0, &via),
                Err(LqtError::ViaIndexOutOfRange { .. })
            ));
        }
        assert!(WeightSchedule::build(&r, 0.0, 1.0, 1.0, &[]).is_err());
        assert!(WeightSchedule::build(&r, 1.0, 1.0, -1.0, &[]).is_err());
    }

    #[test]
    fn hand_arithmetic_cost() {
        // single-step 1-D: Q=1 on position, R=1, μ=0, x=2, u=3 → 4 + 9
        let positions = vec![vec![0.0], vec![0.0], vec![0.0]];
        let r = ReferenceTrajectory::from_positions(&positions, 1.0, &[0.0]).unwrap();
        let w = WeightSchedule::build(&r, 1.0, 1.0, 1.0, &[]).unwrap();
        let zero = DVector::zeros(3);
        let x = DVector::from_vec(vec![2.0, 0.0, 0.0]);
        let states = vec![zero.clone(), zero.clone(), x];
        let commands = vec![DVector::zeros(1), DVector::from_vec(vec![3.0])];
        assert!((w.cost(&states, &commands) - 13.0).abs() < 1e-12);
    }

    #[test]
    fn exact_tracking_costs_nothing() {
        let r = straight(11);
        let w = WeightSchedule::build(&r, 1.0, 1e4, 1e-5, &[]).unwrap();
        let states: Vec<DVector<f64>> = (0..=10).map(|t| w.target(t).clone()).collect();
        let commands = vec![DVector::zeros(2); 10];
        assert_eq!(w.cost(&states, &commands), 0.0);
    }
}
