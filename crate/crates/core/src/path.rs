use serde::{Deserialize, Serialize};

/// Positions sampled at a fixed time step; the common trajectory file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledPath {
    pub dt: f64,
    pub positions: Vec<Vec<f64>>,
}

impl SampledPath {
    pub fn duration(&self) -> f64 {
        self.positions.len().saturating_sub(1) as f64 * self.dt
    }

    pub fn end(&self) -> Option<&[f64]> {
        self.positions.last().map(|p| p.as_slice())
    }

    /// Smallest distance between `point` and any sample in `[from, to]`.
    pub fn closest_approach(&self, point: &[f64], from: usize, to: usize) -> f64 {
        self.positions[from.min(self.positions.len())..(to + 1).min(self.positions.len())]
            .iter()
            .map(|p| p.iter().zip(point).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn distance_at(&self, step: usize, point: &[f64]) -> f64 {
        self.positions[step.min(self.positions.len() - 1)]
            .iter()
            .zip(point)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}
