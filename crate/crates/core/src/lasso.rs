//! L1-regularized linear regression for trip duration, solved by cyclic
//! coordinate descent with soft-thresholding.
//!
//! Features are standardized to zero mean and unit variance internally
//! (constant columns get coefficient zero) and the fitted coefficients are
//! reported back in the original feature scale. The per-coordinate update is
//! `b_j <- S(<x_j, r> + b_j * ||x_j||^2, alpha) / ||x_j||^2` in standardized
//! space, so `alpha >= alpha_max = max_j |<x_j, y_centered>|` shrinks every
//! coefficient to exactly zero. The penalty is applied to the plain
//! residual-sum objective with no `1/n` factor, which means useful `alpha`
//! values grow with the number of rows; [`alpha_max`] gives the data-driven
//! reference point.
//!
//! No clamping on prediction: a model asked to extrapolate may return
//! negative durations and callers see that honestly.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub alpha: f64,
    pub max_iterations: usize,
    /// Convergence threshold on the largest standardized-coefficient change
    /// in a sweep.
    pub tolerance: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig { alpha: 1.0, max_iterations: 1000, tolerance: 1e-10 }
    }
}

impl LassoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha must be finite and non-negative"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !self.tolerance.is_finite() || self.tolerance <= 0.0 {
            return Err(Error::invalid("tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub alpha: f64,
    /// In the original (unstandardized) feature scale.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub converged: bool,
    pub n_iterations: usize,
}

impl LassoModel {
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                actual: row.len(),
            });
        }
        Ok(self.intercept + self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>())
    }

    pub fn predict_batch(&self, x: &[f64]) -> Result<Vec<f64>> {
        let dim = self.coefficients.len();
        if dim == 0 || !x.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: x.len() % dim.max(1) });
        }
        (0..x.len() / dim).map(|i| self.predict(&x[i * dim..(i + 1) * dim])).collect()
    }

    pub fn nonzero_count(&self) -> usize {
        self.coefficients.iter().filter(|&&b| b != 0.0).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<LassoModel> {
        Ok(serde_json::from_str(json)?)
    }
}

/// Per-sweep value of the objective (residual sum of squares plus the
/// penalty on the reported coefficients).
#[derive(Debug, Clone, PartialEq)]
pub struct LassoTrace {
    pub objective_per_sweep: Vec<f64>,
}

/// The scalar shrinkage kernel: zero inside `[-threshold, threshold]`, else
/// moved toward zero by `threshold`.
pub fn soft_threshold(z: f64, threshold: f64) -> f64 {
    if z > threshold {
        z - threshold
    } else if z < -threshold {
        z + threshold
    } else {
        0.0
    }
}

/// Centered, standardized design: only non-constant columns take part in
/// descent.
struct Standardized {
    n_features: usize,
    means: Vec<f64>,
    stds: Vec<f64>,
    /// Column-major values for the non-constant features.
    columns: Vec<Vec<f64>>,
    /// Original feature index per active column.
    active: Vec<usize>,
    column_norms_sq: Vec<f64>,
    y_mean: f64,
    y_centered: Vec<f64>,
}

impl Standardized {
    fn build(x: &[f64], n_features: usize, y: &[f64]) -> Result<Self> {
        let n_rows = y.len();
        if n_rows < 2 {
            return Err(Error::invalid("need at least 2 examples"));
        }
        if n_features == 0 || x.len() != n_rows * n_features {
            return Err(Error::invalid(format!(
                "matrix shape mismatch: {} values for {n_rows} rows of {n_features} features",
                x.len()
            )));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite value in training data"));
        }

        let mut means = vec![0.0; n_features];
        for row in 0..n_rows {
            for j in 0..n_features {
                means[j] += x[row * n_features + j];
            }
        }
        for m in &mut means {
            *m /= n_rows as f64;
        }
        let mut variances = vec![0.0; n_features];
        for row in 0..n_rows {
            for j in 0..n_features {
                let d = x[row * n_features + j] - means[j];
                variances[j] += d * d;
            }
        }
        let stds: Vec<f64> = variances.iter().map(|v| (v / n_rows as f64).sqrt()).collect();

        let mut columns = Vec::new();
        let mut active = Vec::new();
        let mut column_norms_sq = Vec::new();
        for j in 0..n_features {
            if stds[j] <= 1e-12 * (1.0 + means[j].abs()) {
                continue;
            }
            let col: Vec<f64> =
                (0..n_rows).map(|row| (x[row * n_features + j] - means[j]) / stds[j]).collect();
            column_norms_sq.push(col.iter().map(|v| v * v).sum());
            columns.push(col);
            active.push(j);
        }

        let y_mean = y.iter().sum::<f64>() / n_rows as f64;
        let y_centered = y.iter().map(|v| v - y_mean).collect();
        Ok(Standardized {
            n_features,
            means,
            stds,
            columns,
            active,
            column_norms_sq,
            y_mean,
            y_centered,
        })
    }

    /// Cyclic coordinate descent from `beta` (standardized coefficients,
    /// one per active column), updated in place.
    fn descend(
        &self,
        beta: &mut [f64],
        alpha: f64,
        tolerance: f64,
        max_iterations: usize,
        mut trace: Option<&mut Vec<f64>>,
    ) -> (bool, usize) {
        let mut residual = self.y_centered.clone();
        for (col, &b) in self.columns.iter().zip(beta.iter()) {
            if b != 0.0 {
                for (r, v) in residual.iter_mut().zip(col) {
                    *r -= b * v;
                }
            }
        }

        let mut converged = beta.is_empty();
        let mut sweeps = 0;
        for _ in 0..max_iterations {
            if converged {
                break;
            }
            sweeps += 1;
            let mut max_change = 0.0f64;
            // indexed: the loop walks three parallel arrays and mutates one
            #[allow(clippy::needless_range_loop)]
            for j in 0..beta.len() {
                let col = &self.columns[j];
                let old = beta[j];
                let z = col.iter().zip(&residual).map(|(v, r)| v * r).sum::<f64>()
                    + old * self.column_norms_sq[j];
                let new = soft_threshold(z, alpha) / self.column_norms_sq[j];
                if new != old {
                    for (r, v) in residual.iter_mut().zip(col) {
                        *r -= (new - old) * v;
                    }
                    beta[j] = new;
                }
                max_change = max_change.max((new - old).abs());
            }
            if let Some(history) = trace.as_deref_mut() {
                let sse: f64 = residual.iter().map(|r| r * r).sum();
                let penalty: f64 = beta
                    .iter()
                    .zip(&self.active)
                    .map(|(b, &j)| (b / self.stds[j]).abs())
                    .sum();
                history.push(sse + alpha * penalty);
            }
            converged = max_change < tolerance;
        }
        (converged, sweeps)
    }

    fn destandardize(&self, beta: &[f64], alpha: f64, converged: bool, sweeps: usize) -> LassoModel {
        let mut coefficients = vec![0.0; self.n_features];
        for (b, &j) in beta.iter().zip(&self.active) {
            coefficients[j] = b / self.stds[j];
        }
        let intercept =
            self.y_mean - coefficients.iter().zip(&self.means).map(|(b, m)| b * m).sum::<f64>();
        LassoModel { alpha, coefficients, intercept, converged, n_iterations: sweeps }
    }
}

pub fn fit(x: &[f64], n_features: usize, y: &[f64], config: &LassoConfig) -> Result<LassoModel> {
    fit_with_trace(x, n_features, y, config).map(|(model, _)| model)
}

pub fn fit_with_trace(
    x: &[f64],
    n_features: usize,
    y: &[f64],
    config: &LassoConfig,
) -> Result<(LassoModel, LassoTrace)> {
    config.validate()?;
    let std = Standardized::build(x, n_features, y)?;
    let mut beta = vec![0.0; std.columns.len()];
    let mut objective = Vec::new();
    let (converged, sweeps) = std.descend(
        &mut beta,
        config.alpha,
        config.tolerance,
        config.max_iterations,
        Some(&mut objective),
    );
    if !converged {
        log::warn!("coordinate descent did not converge in {sweeps} sweeps");
    }
    Ok((
        std.destandardize(&beta, config.alpha, converged, sweeps),
        LassoTrace { objective_per_sweep: objective },
    ))
}

/// Smallest penalty that shrinks every coefficient to zero: the largest
/// absolute correlation between a standardized column and the centered
/// target.
pub fn alpha_max(x: &[f64], n_features: usize, y: &[f64]) -> Result<f64> {
    let std = Standardized::build(x, n_features, y)?;
    Ok(std
        .columns
        .iter()
        .map(|col| col.iter().zip(&std.y_centered).map(|(v, r)| v * r).sum::<f64>().abs())
        .fold(0.0, f64::max))
}

/// Fits one model per penalty, warm-starting each from the previous
/// solution. Penalties must be non-negative and non-increasing.
pub fn regularization_path(
    x: &[f64],
    n_features: usize,
    y: &[f64],
    alphas: &[f64],
    config: &LassoConfig,
) -> Result<Vec<LassoModel>> {
    if alphas.is_empty() {
        return Err(Error::invalid("empty alpha list"));
    }
    if alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(Error::invalid("alphas must be finite and non-negative"));
    }
    if alphas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid("alphas must be non-increasing"));
    }
    config.validate()?;
    let std = Standardized::build(x, n_features, y)?;
    let mut beta = vec![0.0; std.columns.len()];
    let mut models = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let (converged, sweeps) =
            std.descend(&mut beta, alpha, config.tolerance, config.max_iterations, None);
        models.push(std.destandardize(&beta, alpha, converged, sweeps));
    }
    Ok(models)
}
