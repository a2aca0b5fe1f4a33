//! Classical discrete movement primitive: exponential canonical system,
//! normalized RBF forcing term learned by locally weighted regression, and a
//! critically damped spring-damper pulled toward the goal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lqt::ReferenceTrajectory;
use crate::path::SampledPath;

const SUBSTEPS: usize = 10;
const CONVERGED: f64 = 1e-4;
const MAX_DURATION_FACTOR: f64 = 20.0;
const DEGENERATE_SPAN: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DmpError {
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("expected dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmpConfig {
    pub alpha_z: f64,
    pub alpha_x: f64,
    pub basis_count: usize,
}

impl Default for DmpConfig {
    fn default() -> Self {
        Self { alpha_z: 25.0, alpha_x: 3.0, basis_count: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalDmp {
    pub alpha_z: f64,
    pub beta_z: f64,
    pub alpha_x: f64,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    /// One weight vector per dimension.
    pub weights: Vec<Vec<f64>>,
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    pub duration: f64,
}

impl ClassicalDmp {
    pub fn train(positions: &[Vec<f64>], dt: f64) -> Result<Self, DmpError> {
        Self::train_with(&DmpConfig::default(), positions, dt)
    }

    pub fn train_with(config: &DmpConfig, positions: &[Vec<f64>], dt: f64) -> Result<Self, DmpError> {
        if positions.len() < 3 {
            return Err(DmpError::TooFewSamples(positions.len()));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(DmpError::InvalidTimeStep(dt));
        }
        let dim = positions[0].len();
        for p in positions {
            if p.len() != dim {
                return Err(DmpError::DimensionMismatch { expected: dim, found: p.len() });
            }
            if !p.iter().all(|v| v.is_finite()) {
                return Err(DmpError::NonFinite);
            }
        }
        let goal = positions[positions.len() - 1].clone();
        let start = positions[0].clone();
        let reference = ReferenceTrajectory::from_positions(positions, dt, &goal).map_err(|_| DmpError::NonFinite)?;
        let duration = reference.duration();

        let n = config.basis_count;
        let centers: Vec<f64> = (0..n)
            .map(|i| (-config.alpha_x * i as f64 / (n - 1).max(1) as f64).exp())
            .collect();
        let widths: Vec<f64> = (0..n)
            .map(|i| {
                let gap = if i + 1 < n { centers[i] - centers[i + 1] } else { centers[i - 1] - centers[i] };
                1.0 / (gap * gap)
            })
            .collect();

        let mut dmp = Self {
            alpha_z: config.alpha_z,
            beta_z: config.alpha_z / 4.0,
            alpha_x: config.alpha_x,
            centers,
            widths,
            weights: vec![vec![0.0; n]; dim],
            start,
            goal,
            duration,
        };

        let tau = duration;
        for d in 0..dim {
            let span = dmp.goal[d] - dmp.start[d];
            let amplitude = if span.abs() < DEGENERATE_SPAN { 1.0 } else { span };
            for i in 0..n {
                let mut num = 0.0;
                let mut den = 0.0;
                for (t, s) in reference.steps.iter().enumerate() {
                    let x = dmp.phase(t as f64 * dt);
                    let target = tau * tau * s.a[d]
                        - dmp.alpha_z * (dmp.beta_z * (dmp.goal[d] - s.p[d]) - tau * s.v[d]);
                    let scale = x * amplitude;
                    let psi = dmp.basis(i, x);
                    num += psi * scale * target;
                    den += psi * scale * scale;
                }
                dmp.weights[d][i] = if den > 1e-300 { num / den } else { 0.0 };
            }
        }
        Ok(dmp)
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    fn phase(&self, time: f64) -> f64 {
        (-self.alpha_x * time / self.duration).exp()
    }

    fn basis(&self, i: usize, x: f64) -> f64 {
        (-self.widths[i] * (x - self.centers[i]).powi(2)).exp()
    }

    fn forcing(&self, d: usize, x: f64, amplitude: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.centers.len() {
            let psi = self.basis(i, x);
            num += psi * self.weights[d][i];
            den += psi;
        }
        if den <= 1e-300 {
            0.0
        } else {
            num / den * x * amplitude
        }
    }

    /// Unrolls toward `new_goal` from rest at `new_start`, sampled every `dt`.
    /// Integration runs past the demonstrated duration until the state has
    /// settled, so the endpoint is the converged attractor.
    pub fn rollout(&self, new_start: &[f64], new_goal: &[f64], dt: f64) -> Result<SampledPath, DmpError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(DmpError::InvalidTimeStep(dt));
        }
        let dim = self.dim();
        for v in [new_start, new_goal] {
            if v.len() != dim {
                return Err(DmpError::DimensionMismatch { expected: dim, found: v.len() });
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(DmpError::NonFinite);
            }
        }
        let amplitude: Vec<f64> = (0..dim)
            .map(|d| {
                let span = self.goal[d] - self.start[d];
                if span.abs() < DEGENERATE_SPAN {
                    1.0
                } else {
                    new_goal[d] - new_start[d]
                }
            })
            .collect();

        let tau = self.duration;
        let h = dt / SUBSTEPS as f64;
        let mut y = new_start.to_vec();
        let mut z = vec![0.0; dim];
        let mut positions = vec![y.clone()];
        let max_steps = (MAX_DURATION_FACTOR * tau / dt).ceil() as usize;
        let nominal = (tau / dt).round() as usize;
        for step in 0..max_steps {
            for sub in 0..SUBSTEPS {
                let time = step as f64 * dt + sub as f64 * h;
                let x = self.phase(time);
                for d in 0..dim {
                    let zdot = (self.alpha_z * (self.beta_z * (new_goal[d] - y[d]) - z[d])
                        + self.forcing(d, x, amplitude[d]))
                        / tau;
                    z[d] += h * zdot;
                    y[d] += h * z[d] / tau;
                }
            }
            positions.push(y.clone());
            if step + 1 >= nominal {
                let err = y.iter().zip(new_goal).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let speed = z.iter().map(|v| v * v).sum::<f64>().sqrt() / tau;
                if err < CONVERGED && speed < CONVERGED {
                    break;
                }
            }
        }
        Ok(SampledPath { dt, positions })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn min_jerk(from: &[f64], to: &[f64], samples: usize) -> Vec<Vec<f64>> {
        (0..samples)
            .map(|k| {
                let s = k as f64 / (samples - 1) as f64;
                let b = 10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5);
                from.iter().zip(to).map(|(a, c)| a + b * (c - a)).collect()
            })
            .collect()
    }

    fn curved(samples: usize) -> Vec<Vec<f64>> {
        (0..samples)
            .map(|k| {
                let s = k as f64 / (samples - 1) as f64;
                vec![0.3 + 0.2 * s, -0.1 + 0.15 * (std::f64::consts::PI * s).sin() + 0.1 * s]
            })
            .collect()
    }

    fn rmse(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let sum: f64 = a.iter().zip(b).map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).sum();
        (sum / a.len() as f64).sqrt()
    }

    fn length(path: &[Vec<f64>]) -> f64 {
        path.windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .sum()
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn straight_line_converges_to_goal() {
        let demo = min_jerk(&[0.0, 0.0], &[0.3, -0.2], 101);
        let dmp = ClassicalDmp::train(&demo, 0.01).unwrap();
        let out = dmp.rollout(&[0.0, 0.0], &[0.3, -0.2], 0.01).unwrap();
        assert!(dist(out.positions.last().unwrap(), &[0.3, -0.2]) < 1e-3);
    }

    #[test]
    fn reproduces_its_demonstration() {
        for demo in [min_jerk(&[0.0, 0.0], &[0.3, -0.2], 101), curved(151)] {
            let dmp = ClassicalDmp::train(&demo, 0.01).unwrap();
            let out = dmp.rollout(&demo[0], demo.last().unwrap(), 0.01).unwrap();
            let err = rmse(&out.positions[..demo.len()], &demo);
            assert!(err < 0.02 * length(&demo), "{err}");
        }
    }

    #[test]
    fn identity_rollout_is_deterministic() {
        let demo = curved(101);
        let dmp = ClassicalDmp::train(&demo, 0.01).unwrap();
        let a = dmp.rollout(&demo[0], demo.last().unwrap(), 0.01).unwrap();
        let b = dmp.rollout(&dmp.start.clone(), &dmp.goal.clone(), 0.01).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_span_collapses_to_fixed_point() {
        let demo = curved(101);
        let dmp = ClassicalDmp::train(&demo, 0.01).unwrap();
        let out = dmp.rollout(&[0.5, 0.5], &[0.5, 0.5], 0.01).unwrap();
        assert!(dist(out.positions.last().unwrap(), &[0.5, 0.5]) < 1e-3);
    }

    #[test]
    fn degenerate_demo_translates() {
        let mut demo = curved(101);
        let last = demo.len() - 1;
        demo[last] = demo[0].clone();
        let dmp = ClassicalDmp::train(&demo, 0.01).unwrap();
        let out = dmp.rollout(&[1.0, 1.0], &[1.0, 1.0], 0.01).unwrap();
        assert!(dist(out.positions.last().unwrap(), &[1.0, 1.0]) < 1e-3);
        assert!(out.positions.iter().all(|p| p.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn endpoints_converge_for_goals_within_three_spans() {
        let demo = curved(101);
        let dmp = ClassicalDmp::train(&demo, 0.01).unwrap();
        for goal in [[0.5, 0.0], [1.1, 0.6], [-0.5, -0.7], [0.3, 0.5]] {
            let out = dmp.rollout(&demo[0], &goal, 0.01).unwrap();
            assert!(dist(out.positions.last().unwrap(), &goal) < 1e-3, "{goal:?}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(ClassicalDmp::train(&[vec![0.0], vec![1.0]], 0.01).unwrap_err(), DmpError::TooFewSamples(2));
        let demo = curved(10);
        assert!(matches!(ClassicalDmp::train(&demo, 0.0), Err(DmpError::InvalidTimeStep(_))));
        let dmp = ClassicalDmp::train(&demo, 0.01).unwrap();
        assert!(matches!(dmp.rollout(&[0.0], &[0.0, 0.0], 0.01), Err(DmpError::DimensionMismatch { .. })));
    }
}
