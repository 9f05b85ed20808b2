use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::features::DesignMatrix;

pub const DEFAULT_RIDGE: f64 = 1e-6;

/// A learner mapping design rows to predicted standard scores.
pub trait Regressor {
    fn name(&self) -> &str;
    fn fit(&mut self, x: &DesignMatrix) -> Result<()>;
    fn predict(&self, row: &[f64]) -> f64;
}

/// Least squares with a vanishing ridge term, solved through the normal
/// equations and a Cholesky factorization.
#[derive(Debug, Clone)]
pub struct LinearRegression {
    pub ridge: f64,
    coefficients: Vec<f64>,
}

impl Default for LinearRegression {
    fn default() -> Self {
        LinearRegression::new(DEFAULT_RIDGE)
    }
}

impl LinearRegression {
    pub fn new(ridge: f64) -> Self {
        LinearRegression {
            ridge,
            coefficients: Vec::new(),
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

impl Regressor for LinearRegression {
    fn name(&self) -> &str {
        "linear"
    }

    fn fit(&mut self, x: &DesignMatrix) -> Result<()> {
        if x.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        if x.targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("targets"));
        }
        let d = x.width;
        // accumulate X'X (upper triangle) and X'y row by row
        let mut gram = vec![0.0; d * d];
        let mut rhs = vec![0.0; d];
        for (i, &y) in x.targets.iter().enumerate() {
            let row = x.row(i);
            for a in 0..d {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                rhs[a] += ra * y;
                let line = &mut gram[a * d..(a + 1) * d];
                for b in a..d {
                    line[b] += ra * row[b];
                }
            }
        }
        let gram = DMatrix::from_fn(d, d, |a, b| {
            let v = if a <= b {
                gram[a * d + b]
            } else {
                gram[b * d + a]
            };
            if a == b {
                v + self.ridge
            } else {
                v
            }
        });
        let chol = gram.cholesky().ok_or(Error::Singular)?;
        let beta = chol.solve(&DVector::from_vec(rhs));
        self.coefficients = beta.iter().copied().collect();
        Ok(())
    }

    fn predict(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }
}
