use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hypertree::JunctionHypertree;
use crate::planner::QuerySpec;
use crate::semiring::Covariance;

const PIVOT_TOL: f64 = 1e-12;

/// Least-squares model fit from a covariance aggregate. Features and target
/// are slots of the lifted vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinRegModel {
    pub features: Vec<usize>,
    pub target: usize,
    /// Intercept first, then one weight per feature.
    pub weights: Vec<f64>,
    pub lambda: f64,
    /// In-sample coefficient of determination.
    pub r2: f64,
    pub n: f64,
}

impl LinRegModel {
    pub fn intercept(&self) -> f64 {
        self.weights[0]
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.weights[0] + self.weights[1..].iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
    }
}

/// Solves `(XᵀX + λI) w = Xᵀy` where `X` has a leading column of ones. The
/// ones column never appears in the aggregate: its products are the count
/// and the sums.
pub fn fit_from_aggregate(cov: &Covariance, features: &[usize], target: usize, lambda: f64) -> Result<LinRegModel> {
    let d = cov.dim();
    if let Some(s) = features.iter().chain([&target]).find(|&&s| s >= d) {
        return Err(Error::InvalidQuery(format!("slot {s} is outside the {d}-dimensional aggregate")));
    }
    if features.contains(&target) {
        return Err(Error::InvalidQuery("target slot is also a feature".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Numeric(format!("ridge penalty must be a finite λ ≥ 0, got {lambda}")));
    }
    if cov.count <= 0.0 {
        return Err(Error::Numeric("aggregate covers no tuples".into()));
    }
    let m = features.len() + 1;
    // slot of column i, with None for the ones column
    let col = |i: usize| (i > 0).then(|| features[i - 1]);
    let gram = DMatrix::from_fn(m, m, |i, j| match (col(i), col(j)) {
        (None, None) => cov.count,
        (None, Some(s)) | (Some(s), None) => cov.sums[s],
        (Some(a), Some(b)) => cov.quad_at(a, b),
    });
    let xty = DVector::from_fn(m, |i, _| match col(i) {
        None => cov.sums[target],
        Some(s) => cov.quad_at(s, target),
    });
    let normal = &gram + DMatrix::identity(m, m) * lambda;
    let singular = || {
        Error::Numeric(if lambda == 0.0 {
            "normal matrix is singular; retry with a ridge penalty λ > 0".into()
        } else {
            "normal matrix is not positive definite".into()
        })
    };
    let chol = normal.clone().cholesky().ok_or_else(singular)?;
    // Rounding can let an exactly singular matrix through with a tiny pivot.
    let scale = normal.diagonal().max();
    let l = chol.l_dirty();
    if (0..m).any(|i| l[(i, i)] * l[(i, i)] <= PIVOT_TOL * scale) {
        return Err(singular());
    }
    let w = chol.solve(&xty);
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("solution is not finite".into()));
    }
    let yy = cov.quad_at(target, target);
    let sse = yy - 2.0 * w.dot(&xty) + (&gram * &w).dot(&w);
    let sst = yy - cov.sums[target] * cov.sums[target] / cov.count;
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    Ok(LinRegModel {
        features: features.to_vec(),
        target,
        weights: w.iter().copied().collect(),
        lambda,
        r2,
        n: cov.count,
    })
}

impl JunctionHypertree {
    /// Fits a model on the full join: the total aggregate is read from the
    /// calibrated tree and the normal equations are solved locally.
    pub fn train_linreg(&mut self, features: &[usize], target: usize, lambda: f64) -> Result<LinRegModel> {
        let out = self.execute(&QuerySpec::new())?;
        let total = out.result.total()?;
        let cov = total
            .as_covariance()
            .ok_or_else(|| Error::InvalidQuery(format!("regression needs the covariance semi-ring, not {}", self.kind)))?;
        fit_from_aggregate(cov, features, target, lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiring::{lift, Value};

    fn aggregate(rows: &[[f64; 2]]) -> Covariance {
        let mut acc = Value::Cov(Box::new(Covariance::zero(2)));
        for r in rows {
            acc = acc.add(&lift(r)).unwrap();
        }
        acc.as_covariance().unwrap().clone()
    }

    #[test]
    fn exact_line() {
        let cov = aggregate(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [5.0, 10.0]]);
        let m = fit_from_aggregate(&cov, &[0], 1, 0.0).unwrap();
        assert!((m.weights[1] - 2.0).abs() < 1e-9);
        assert!(m.intercept().abs() < 1e-9);
        assert!((m.r2 - 1.0).abs() < 1e-9);
        assert!((m.predict(&[7.0]) - 14.0).abs() < 1e-9);
    }

    #[test]
    fn singular_needs_ridge() {
        let cov = aggregate(&[[1.0, 2.0], [1.0, 3.0]]);
        let err = fit_from_aggregate(&cov, &[0], 1, 0.0).unwrap_err();
        assert!(err.to_string().contains("λ > 0"));
        assert!(fit_from_aggregate(&cov, &[0], 1, 0.5).is_ok());
        assert!(fit_from_aggregate(&cov, &[0], 1, -1.0).is_err());
        assert!(fit_from_aggregate(&cov, &[0], 0, 1.0).is_err());
    }
}
