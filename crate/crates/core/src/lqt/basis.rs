use nalgebra::DMatrix;

use super::LqtError;

/// Radial basis functions over normalized time, shared by every command
/// dimension.
#[derive(Clone, Debug)]
pub struct BasisFamily {
    count: usize,
    dim: usize,
    horizon: usize,
    centers: Vec<f64>,
    bandwidth: f64,
    /// horizon × count, each column scaled to unit maximum
    phi: DMatrix<f64>,
    psi: DMatrix<f64>,
}

impl BasisFamily {
    pub const DEFAULT_COUNT: usize = 12;

    /// `count` equispaced centers, bandwidth `1/(2 count²)` used as the
    /// Gaussian variance.
    pub fn new(count: usize, dim: usize, horizon: usize) -> Result<Self, LqtError> {
        let bandwidth = 1.0 / (2.0 * (count * count) as f64);
        Self::with_bandwidth(count, dim, horizon, bandwidth)
    }

    pub fn with_bandwidth(count: usize, dim: usize, horizon: usize, bandwidth: f64) -> Result<Self, LqtError> {
        if count == 0 || dim == 0 || horizon == 0 {
            return Err(LqtError::Shape(format!(
                "basis needs positive count/dim/horizon, got {count}/{dim}/{horizon}"
            )));
        }
        if !(bandwidth > 0.0) {
            return Err(LqtError::Shape(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let centers: Vec<f64> = if count == 1 {
            vec![0.5]
        } else {
            (0..count).map(|k| k as f64 / (count - 1) as f64).collect()
        };
        let time = |t: usize| if horizon == 1 { 0.0 } else { t as f64 / (horizon - 1) as f64 };
        let mut phi = DMatrix::from_fn(horizon, count, |t, k| {
            let s = time(t) - centers[k];
            (-s * s / (2.0 * bandwidth)).exp()
        });
        for mut col in phi.column_iter_mut() {
            let max = col.max();
            col /= max;
        }
        let mut psi = DMatrix::zeros(horizon * dim, count * dim);
        for t in 0..horizon {
            for k in 0..count {
                for i in 0..dim {
                    psi[(t * dim + i, k * dim + i)] = phi[(t, k)];
                }
            }
        }
        Ok(Self { count, dim, horizon, centers, bandwidth, phi, psi })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Per-dimension activations, horizon × count.
    pub fn activations(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Ψ, (horizon·dim) × (count·dim).
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.psi
    }

    /// Ψ_t, dim × (count·dim).
    pub fn step(&self, t: usize) -> DMatrix<f64> {
        self.psi.rows(t * self.dim, self.dim).into_owned()
    }
}
