//! Online ridge regression for one group.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Regularized least-squares statistics `(V, b, theta_hat)`.
///
/// `theta_hat` is re-solved from scratch through a Cholesky factor after
/// every update.
#[derive(Clone, Debug)]
pub struct RidgeState {
    v: DMatrix<f64>,
    b: DVector<f64>,
    theta_hat: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    update_count: u64,
}

impl RidgeState {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("ridge state", "zero dimension"));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid("ridge state", format!("lambda {lambda}")));
        }
        let v = DMatrix::identity(dim, dim) * lambda;
        let chol = Cholesky::new(v.clone()).expect("scaled identity is positive definite");
        Ok(Self {
            v,
            b: DVector::zeros(dim),
            theta_hat: DVector::zeros(dim),
            chol,
            update_count: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn theta_hat(&self) -> &[f64] {
        self.theta_hat.as_slice()
    }

    fn vector(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(DVector::from_column_slice(x))
    }

    /// Adds one observation `(x, reward)`.
    pub fn observe(&mut self, x: &[f64], reward: f64) -> Result<()> {
        let x = self.vector(x)?;
        if !reward.is_finite() {
            return Err(Error::invalid("ridge update", format!("reward {reward}")));
        }
        self.v.ger(1.0, &x, &x, 1.0);
        self.b.axpy(reward, &x, 1.0);
        self.chol = Cholesky::new(self.v.clone())
            .ok_or_else(|| Error::invalid("ridge update", "design matrix lost definiteness"))?;
        self.theta_hat = self.chol.solve(&self.b);
        self.update_count += 1;
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.theta_hat.dot(&self.vector(x)?))
    }

    /// `sqrt(x^T V^-1 x)`.
    pub fn width(&self, x: &[f64]) -> Result<f64> {
        let x = self.vector(x)?;
        let y = self.chol.solve(&x);
        Ok(x.dot(&y).max(0.0).sqrt())
    }

    /// `||V theta_hat - b||`.
    pub fn residual(&self) -> f64 {
        (&self.v * &self.theta_hat - &self.b).norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn single_observation_closed_form() {
        let mut r = RidgeState::new(3, 1.0).unwrap();
        r.observe(&[1.0, 0.0, 0.0], 1.0).unwrap();
        assert_abs_diff_eq!(r.v()[(0, 0)], 2.0);
        assert_abs_diff_eq!(r.v()[(1, 1)], 1.0);
        assert_eq!(r.b().as_slice(), &[1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(r.theta_hat()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.predict(&[1.0, 0.0, 0.0]).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.width(&[1.0, 0.0, 0.0]).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn fresh_width_is_norm_over_sqrt_lambda() {
        let r = RidgeState::new(2, 4.0).unwrap();
        assert_abs_diff_eq!(r.width(&[3.0, 4.0]).unwrap(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn rejects_wrong_dimension() {
        let mut r = RidgeState::new(2, 1.0).unwrap();
        assert!(r.observe(&[1.0], 1.0).is_err());
        assert!(RidgeState::new(2, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn solve_stays_consistent(obs in prop::collection::vec((prop::collection::vec(-1.0f64..1.0, 4), -2.0f64..2.0), 1..60)) {
            let mut r = RidgeState::new(4, 1.0).unwrap();
            for (x, y) in &obs {
                r.observe(x, *y).unwrap();
                prop_assert!(r.residual() <= 1e-8 * (1.0 + r.b().norm()));
            }
            prop_assert_eq!(r.update_count(), obs.len() as u64);
        }
    }
}
