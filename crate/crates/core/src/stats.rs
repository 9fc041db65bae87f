//! Forecast-error covariance models and multivariate normal draws.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// Covariance of the experts' forecast errors.
///
/// Common-correlation variants restrict `rho` to `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceSpec {
    /// Common variance and common correlation.
    Equicorrelated { n: usize, sigma2: f64, rho: f64 },
    /// Expert-specific standard deviations, common correlation.
    Heterogeneous { sigmas: Vec<f64>, rho: f64 },
    /// Arbitrary symmetric positive definite matrix.
    General { matrix: DMatrix<f64> },
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho = {rho} outside [0, 1)")));
    }
    Ok(())
}

impl CovarianceSpec {
    pub fn equicorrelated(n: usize, sigma2: f64, rho: f64) -> Result<Self> {
        let spec = CovarianceSpec::Equicorrelated { n, sigma2, rho };
        spec.validate()?;
        Ok(spec)
    }

    pub fn heterogeneous(sigmas: Vec<f64>, rho: f64) -> Result<Self> {
        let spec = CovarianceSpec::Heterogeneous { sigmas, rho };
        spec.validate()?;
        Ok(spec)
    }

    pub fn general(matrix: DMatrix<f64>) -> Result<Self> {
        let spec = CovarianceSpec::General { matrix };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CovarianceSpec::Equicorrelated { n, sigma2, rho } => {
                if *n == 0 {
                    return Err(Error::InvalidSize("covariance needs n >= 1".into()));
                }
                if !(sigma2.is_finite() && *sigma2 > 0.0) {
                    return Err(Error::InvalidParameter(format!("sigma2 = {sigma2} must be > 0")));
                }
                check_rho(*rho)
            }
            CovarianceSpec::Heterogeneous { sigmas, rho } => {
                if sigmas.is_empty() {
                    return Err(Error::InvalidSize("covariance needs n >= 1".into()));
                }
                if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
                    return Err(Error::InvalidParameter(format!("sigma = {s} must be > 0")));
                }
                check_rho(*rho)
            }
            CovarianceSpec::General { matrix } => {
                let n = matrix.nrows();
                if n == 0 || matrix.ncols() != n {
                    return Err(Error::Shape("covariance matrix must be square and non-empty".into()));
                }
                for i in 0..n {
                    for j in 0..i {
                        let (a, b) = (matrix[(i, j)], matrix[(j, i)]);
                        if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                            return Err(Error::InvalidParameter(format!(
                                "covariance matrix not symmetric at ({}, {})",
                                i + 1,
                                j + 1
                            )));
                        }
                    }
                }
                if matrix.clone().cholesky().is_none() {
                    return Err(Error::InvalidParameter(
                        "covariance matrix is not positive definite".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CovarianceSpec::Equicorrelated { n, .. } => *n,
            CovarianceSpec::Heterogeneous { sigmas, .. } => sigmas.len(),
            CovarianceSpec::General { matrix } => matrix.nrows(),
        }
    }

    /// Standard deviations and common correlation, when the spec has one.
    fn common_correlation(&self) -> Option<(Vec<f64>, f64)> {
        match self {
            CovarianceSpec::Equicorrelated { n, sigma2, rho } => Some((vec![sigma2.sqrt(); *n], *rho)),
            CovarianceSpec::Heterogeneous { sigmas, rho } => Some((sigmas.clone(), *rho)),
            CovarianceSpec::General { .. } => None,
        }
    }

    /// Σ: variances on the diagonal, `rho σᵢ σⱼ` off it.
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        match self {
            CovarianceSpec::Equicorrelated { n, sigma2, rho } => {
                DMatrix::from_fn(*n, *n, |i, j| if i == j { *sigma2 } else { rho * sigma2 })
            }
            CovarianceSpec::Heterogeneous { sigmas, rho } => {
                let n = sigmas.len();
                DMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        sigmas[i] * sigmas[i]
                    } else {
                        rho * sigmas[i] * sigmas[j]
                    }
                })
            }
            CovarianceSpec::General { matrix } => matrix.clone(),
        }
    }

    /// Σ⁻¹, in closed form for the common-correlation variants and by
    /// Cholesky inversion otherwise.
    pub fn precision_matrix(&self) -> Result<DMatrix<f64>> {
        self.validate()?;
        match self.common_correlation() {
            Some((sigmas, _)) if sigmas.len() == 1 => Ok(DMatrix::from_element(1, 1, 1.0 / (sigmas[0] * sigmas[0]))),
            Some((sigmas, rho)) => precision_matrix_closed_form(&sigmas, rho),
            None => numeric_inverse(&self.covariance_matrix()),
        }
    }
}

/// Cholesky-based inverse of a symmetric positive definite matrix.
pub fn numeric_inverse(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    matrix
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Numeric("matrix is not positive definite".into()))
}

/// Inverse of the common-correlation covariance matrix:
///
/// ```text
/// diag:     (1 + (n-2)ρ) / ((1-ρ)(1+(n-1)ρ) σᵢ²)
/// off-diag:        -ρ    / ((1-ρ)(1+(n-1)ρ) σᵢ σⱼ)
/// ```
pub fn precision_matrix_closed_form(sigmas: &[f64], rho: f64) -> Result<DMatrix<f64>> {
    let n = sigmas.len();
    if n < 2 {
        return Err(Error::InvalidSize(format!(
            "closed-form precision needs n >= 2, got {n}"
        )));
    }
    check_rho(rho)?;
    if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::InvalidParameter(format!("sigma = {s} must be > 0")));
    }
    let nf = n as f64;
    let denom = (1.0 - rho) * (1.0 + (nf - 1.0) * rho);
    let diag = (1.0 + (nf - 2.0) * rho) / denom;
    let off = -rho / denom;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag / (sigmas[i] * sigmas[i])
        } else {
            off / (sigmas[i] * sigmas[j])
        }
    }))
}

/// Reusable sampler for `N(0, Σ)`.
///
/// Uses `diag(σ)` when errors are independent and the lower Cholesky factor
/// otherwise.
#[derive(Debug, Clone)]
pub struct ErrorSampler {
    factor: Factor,
}

#[derive(Debug, Clone)]
enum Factor {
    Diagonal(Vec<f64>),
    Lower(DMatrix<f64>),
}

impl ErrorSampler {
    pub fn new(spec: &CovarianceSpec) -> Result<Self> {
        spec.validate()?;
        let factor = match spec.common_correlation() {
            Some((sigmas, 0.0)) => Factor::Diagonal(sigmas),
            _ => {
                let chol = spec
                    .covariance_matrix()
                    .cholesky()
                    .ok_or_else(|| Error::Numeric("Cholesky factorisation of the covariance failed".into()))?;
                Factor::Lower(chol.unpack())
            }
        };
        Ok(ErrorSampler { factor })
    }

    pub fn dim(&self) -> usize {
        match &self.factor {
            Factor::Diagonal(s) => s.len(),
            Factor::Lower(l) => l.nrows(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        match &self.factor {
            Factor::Diagonal(s) => z.iter().zip(s).map(|(z, s)| z * s).collect(),
            Factor::Lower(l) => (l * DVector::from_vec(z)).data.into(),
        }
    }

    /// One draw from the stream keyed by `seed`.
    pub fn sample_seeded(&self, seed: u64) -> Vec<f64> {
        self.sample(&mut rng::stream(seed))
    }
}

/// One zero-mean draw with covariance `spec`, reproducible per `(spec, seed)`.
pub fn sample_errors(spec: &CovarianceSpec, seed: u64) -> Result<Vec<f64>> {
    Ok(ErrorSampler::new(spec)?.sample_seeded(seed))
}

/// Truth, errors and the resulting point forecasts `x = θ·1 + ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDraw {
    pub theta: f64,
    pub errors: Vec<f64>,
    pub forecasts: Vec<f64>,
}

impl ForecastDraw {
    pub fn from_errors(theta: f64, errors: Vec<f64>) -> Self {
        let forecasts = errors.iter().map(|e| theta + e).collect();
        ForecastDraw {
            theta,
            errors,
            forecasts,
        }
    }
}

pub fn make_draw(theta: f64, spec: &CovarianceSpec, seed: u64) -> Result<ForecastDraw> {
    Ok(ForecastDraw::from_errors(theta, sample_errors(spec, seed)?))
}
