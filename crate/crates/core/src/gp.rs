//! Gaussian process regression with the Matern 5/2 kernel.
//!
//! Inference is exact: the Gram matrix (plus observation noise and a small
//! diagonal jitter) is Cholesky-factored once at fit time, and predictions
//! reuse the factor through triangular solves. No matrix is ever inverted
//! explicitly. A fitted model is immutable and safe to share across threads.

use thiserror::Error;

const SQRT_5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("invalid kernel parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("kernel distance must be finite and non-negative, got {0}")]
    InvalidDistance(f64),
    #[error("point dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has {points} points but {targets} targets")]
    LengthMismatch { points: usize, targets: usize },
    #[error("non-finite value in dataset")]
    NonFiniteData,
    #[error("covariance matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
}

/// Matern 5/2 kernel hyperparameters plus the noise model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    variance: f64,
    lengthscale: f64,
    noise_variance: f64,
    diag_jitter: f64,
}

impl KernelParams {
    pub fn new(
        variance: f64,
        lengthscale: f64,
        noise_variance: f64,
        diag_jitter: f64,
    ) -> Result<Self, GpError> {
        let check = |name: &'static str, value: f64, strict: bool| {
            if !value.is_finite() || value < 0.0 || (strict && value == 0.0) {
                Err(GpError::InvalidParameter { name, value })
            } else {
                Ok(())
            }
        };
        check("variance", variance, true)?;
        check("lengthscale", lengthscale, true)?;
        check("noise_variance", noise_variance, false)?;
        check("diag_jitter", diag_jitter, false)?;
        Ok(Self {
            variance,
            lengthscale,
            noise_variance,
            diag_jitter,
        })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn diag_jitter(&self) -> f64 {
        self.diag_jitter
    }

    /// Same kernel with a different diagonal jitter.
    pub fn with_diag_jitter(self, diag_jitter: f64) -> Result<Self, GpError> {
        Self::new(self.variance, self.lengthscale, self.noise_variance, diag_jitter)
    }
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            variance: 1.0,
            lengthscale: 1.0,
            noise_variance: 1e-2,
            diag_jitter: 1e-10,
        }
    }
}

/// Training inputs and targets.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self, GpError> {
        if points.len() != targets.len() {
            return Err(GpError::LengthMismatch {
                points: points.len(),
                targets: targets.len(),
            });
        }
        if let Some(first) = points.first() {
            let dim = first.len();
            for p in &points {
                if p.len() != dim {
                    return Err(GpError::DimensionMismatch {
                        expected: dim,
                        got: p.len(),
                    });
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(GpError::NonFiniteData);
                }
            }
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(GpError::NonFiniteData);
        }
        Ok(Self { points, targets })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }
}

/// Matern 5/2 covariance for a pairwise distance `r`:
/// `variance * (1 + sqrt(5) r / l + 5 r^2 / (3 l^2)) * exp(-sqrt(5) r / l)`.
pub fn matern52(r: f64, params: &KernelParams) -> Result<f64, GpError> {
    if !r.is_finite() || r < 0.0 {
        return Err(GpError::InvalidDistance(r));
    }
    Ok(matern52_raw(r, params.variance, params.lengthscale))
}

fn matern52_raw(r: f64, variance: f64, lengthscale: f64) -> f64 {
    let s = SQRT_5 * r / lengthscale;
    variance * (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Cross-covariance matrix between two point sets; `out[i][j] = k(a[i], b[j])`.
pub fn kernel_matrix(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    params: &KernelParams,
) -> Result<Vec<Vec<f64>>, GpError> {
    let dim = a.first().or_else(|| b.first()).map_or(0, Vec::len);
    for p in a.iter().chain(b) {
        if p.len() != dim {
            return Err(GpError::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
    }
    Ok(a.iter()
        .map(|pa| {
            b.iter()
                .map(|pb| matern52_raw(euclidean_distance(pa, pb), params.variance, params.lengthscale))
                .collect()
        })
        .collect())
}

/// Trained GP surrogate: dataset, kernel, Cholesky factor of the regularized
/// Gram matrix, and the precomputed weight vector.
#[derive(Debug, Clone)]
pub struct FittedGp {
    data: Dataset,
    params: KernelParams,
    mean_constant: f64,
    chol: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Fits an exact GP: factors `K + (noise + jitter) I` and solves for the
/// weights `w = (K + (noise + jitter) I)^{-1} (y - mean_constant)`.
pub fn fit(data: &Dataset, params: &KernelParams, mean_constant: f64) -> Result<FittedGp, GpError> {
    if data.is_empty() {
        return Err(GpError::EmptyDataset);
    }
    if !mean_constant.is_finite() {
        return Err(GpError::InvalidParameter {
            name: "mean_constant",
            value: mean_constant,
        });
    }
    let mut gram = kernel_matrix(data.points(), data.points(), params)?;
    let ridge = params.noise_variance + params.diag_jitter;
    for (i, row) in gram.iter_mut().enumerate() {
        row[i] += ridge;
    }
    let chol = cholesky(&gram)?;
    let centered: Vec<f64> = data.targets().iter().map(|y| y - mean_constant).collect();
    let half = solve_lower(&chol, &centered);
    let weights = solve_lower_transposed(&chol, &half);
    Ok(FittedGp {
        data: data.clone(),
        params: *params,
        mean_constant,
        chol,
        weights,
    })
}

impl FittedGp {
    /// Posterior mean and standard deviation of the latent function at `x`.
    ///
    /// Observation noise is not added to the predictive variance; the sigma
    /// returned is the model's uncertainty about the noiseless function.
    pub fn posterior(&self, x: &[f64]) -> Result<(f64, f64), GpError> {
        if x.len() != self.data.dim() {
            return Err(GpError::DimensionMismatch {
                expected: self.data.dim(),
                got: x.len(),
            });
        }
        let k_star: Vec<f64> = self
            .data
            .points()
            .iter()
            .map(|p| {
                matern52_raw(
                    euclidean_distance(p, x),
                    self.params.variance,
                    self.params.lengthscale,
                )
            })
            .collect();
        let mu = self.mean_constant
            + k_star
                .iter()
                .zip(&self.weights)
                .map(|(k, w)| k * w)
                .sum::<f64>();
        let v = solve_lower(&self.chol, &k_star);
        let var = self.params.variance - v.iter().map(|vi| vi * vi).sum::<f64>();
        Ok((mu, var.max(0.0).sqrt()))
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn mean_constant(&self) -> f64 {
        self.mean_constant
    }
}

fn cholesky(matrix: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, GpError> {
    let n = matrix.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let dot: f64 = l[i][..j].iter().zip(&l[j][..j]).map(|(a, b)| a * b).sum();
            let sum = matrix[i][j] - dot;
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(GpError::NotPositiveDefinite { row: i, pivot: sum });
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Ok(l)
}

fn solve_lower(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for j in 0..i {
            sum -= l[i][j] * x[j];
        }
        x[i] = sum / l[i][i];
    }
    x
}

fn solve_lower_transposed(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = b[i];
        for j in (i + 1)..n {
            sum -= l[j][i] * x[j];
        }
        x[i] = sum / l[i][i];
    }
    x
}
