use nalgebra::{DMatrix, DVector};

use super::LqtError;

/// Discrete triple integrator: state = position ⊕ velocity ⊕ acceleration,
/// command = jerk, exact zero-order hold over `dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorModel {
    dim: usize,
    dt: f64,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

/// Trajectory-level maps `x = S_x x0 + S_u u` and their augmented forms.
#[derive(Clone, Debug)]
pub struct BatchSystemMatrices {
    pub sx: DMatrix<f64>,
    pub su: DMatrix<f64>,
    pub sx_aug: DMatrix<f64>,
    pub su_aug: DMatrix<f64>,
}

impl IntegratorModel {
    pub const ORDER: usize = 3;

    pub fn new(dim: usize, dt: f64) -> Result<Self, LqtError> {
        if dim == 0 {
            return Err(LqtError::DimensionMismatch { expected: 1, found: 0 });
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(LqtError::InvalidTimeStep(dt));
        }
        let n = 3 * dim;
        let mut a = DMatrix::identity(n, n);
        let mut b = DMatrix::zeros(n, dim);
        for i in 0..dim {
            a[(i, dim + i)] = dt;
            a[(i, 2 * dim + i)] = dt * dt / 2.0;
            a[(dim + i, 2 * dim + i)] = dt;
            b[(i, i)] = dt.powi(3) / 6.0;
            b[(dim + i, i)] = dt * dt / 2.0;
            b[(2 * dim + i, i)] = dt;
        }
        Ok(Self { dim, dt, a, b })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn state_dim(&self) -> usize {
        3 * self.dim
    }

    pub fn aug_dim(&self) -> usize {
        3 * self.dim + 1
    }

    /// `A_t`. The model is time-invariant; the step index is kept so callers
    /// read like the per-step formulation.
    pub fn transition(&self, _t: usize) -> &DMatrix<f64> {
        &self.a
    }

    pub fn input(&self, _t: usize) -> &DMatrix<f64> {
        &self.b
    }

    pub fn aug_transition(&self, t: usize) -> DMatrix<f64> {
        let n = self.state_dim();
        let mut out = DMatrix::zeros(n + 1, n + 1);
        out.view_mut((0, 0), (n, n)).copy_from(self.transition(t));
        out[(n, n)] = 1.0;
        out
    }

    pub fn aug_input(&self, t: usize) -> DMatrix<f64> {
        let n = self.state_dim();
        let mut out = DMatrix::zeros(n + 1, self.dim);
        out.view_mut((0, 0), (n, self.dim)).copy_from(self.input(t));
        out
    }

    pub fn step(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.transition(t) * x + self.input(t) * u
    }

    /// Augmented state `[x; 1]`.
    pub fn augment(x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(x.len() + 1);
        out.rows_mut(0, x.len()).copy_from(x);
        out[x.len()] = 1.0;
        out
    }

    /// Stacks the transition blocks for a horizon of `horizon` commands.
    pub fn batch(&self, horizon: usize) -> BatchSystemMatrices {
        let n = self.state_dim();
        let na = n + 1;
        let d = self.dim;
        let rows = (horizon + 1) * n;
        let rows_aug = (horizon + 1) * na;

        let mut sx = DMatrix::zeros(rows, n);
        let mut sx_aug = DMatrix::zeros(rows_aug, na);
        let mut power = DMatrix::identity(n, n);
        for t in 0..=horizon {
            sx.view_mut((t * n, 0), (n, n)).copy_from(&power);
            sx_aug.view_mut((t * na, 0), (n, n)).copy_from(&power);
            sx_aug[(t * na + n, n)] = 1.0;
            power = self.transition(t) * power;
        }

        // column block k is the response of state t > k to u_k: A^{t-1-k} B
        let mut su = DMatrix::zeros(rows, horizon * d);
        let mut su_aug = DMatrix::zeros(rows_aug, horizon * d);
        for k in 0..horizon {
            let mut block = self.input(k).clone();
            for t in (k + 1)..=horizon {
                su.view_mut((t * n, k * d), (n, d)).copy_from(&block);
                su_aug.view_mut((t * na, k * d), (n, d)).copy_from(&block);
                block = self.transition(t) * block;
            }
        }
        BatchSystemMatrices { sx, su, sx_aug, su_aug }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_triple_integrator_one_step() {
        let m = IntegratorModel::new(1, 0.1).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let u = DVector::from_vec(vec![6.0]);
        let y = m.step(0, &x, &u);
        // constant jerk 6 for 0.1 s: p += v dt + a dt^2/2 + j dt^3/6
        assert!((y[0] - (1.0 + 0.2 + 0.015 + 0.001)).abs() < 1e-14);
        assert!((y[1] - (2.0 + 0.3 + 0.03)).abs() < 1e-14);
        assert!((y[2] - 3.6).abs() < 1e-14);
    }

    #[test]
    fn augmented_bottom_row() {
        let m = IntegratorModel::new(2, 0.01).unwrap();
        let a = m.aug_transition(0);
        let n = m.state_dim();
        for j in 0..n {
            assert_eq!(a[(n, j)], 0.0);
        }
        assert_eq!(a[(n, n)], 1.0);
        let b = m.aug_input(0);
        assert!(b.row(n).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn batch_reproduces_rollout() {
        let m = IntegratorModel::new(2, 0.05).unwrap();
        let horizon = 7;
        let batch = m.batch(horizon);
        let x0 = DVector::from_fn(6, |i, _| 0.1 * i as f64 - 0.2);
        let u = DVector::from_fn(horizon * 2, |i, _| (i as f64 * 0.7).sin());
        let stacked = &batch.sx * &x0 + &batch.su * &u;
        let mut x = x0.clone();
        for t in 0..=horizon {
            let block = stacked.rows(t * 6, 6);
            assert!((block - &x).amax() < 1e-12);
            if t < horizon {
                x = m.step(t, &x, &u.rows(t * 2, 2).into_owned());
            }
        }
        let aug = &batch.sx_aug * IntegratorModel::augment(&x0) + &batch.su_aug * &u;
        for t in 0..=horizon {
            assert!((aug.rows(t * 7, 6) - stacked.rows(t * 6, 6)).amax() < 1e-12);
            assert_eq!(aug[t * 7 + 6], 1.0);
        }
    }
}
