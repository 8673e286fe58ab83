//! Exponential families `f_θ(x) = exp(θᵀT(x) − A(θ)) h(x)` with natural
//! parameter θ, plus the two concrete families used by the built-in problems:
//! a mean-shifted standard Gaussian and a Gaussian in natural `(m, S)`
//! coordinates (`m = Σ⁻¹μ`, `S = Σ⁻¹`).
//!
//! All densities are handled in log domain; nothing here exponentiates a
//! log-density ratio.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::linalg;
use crate::param::{Block, NaturalParameter, ParamShape};
use crate::real::Real;

/// Minimum eigenvalue of the matrix block accepted by
/// [`NaturalGaussian::validate`]. The feasible sets used in practice keep the
/// spectrum well above this; the slack lets finite-difference probes step
/// slightly outside them.
pub const MIN_PRECISION_EIGENVALUE: f64 = 1e-12;

/// An exponential family: sufficient statistic, base measure, log-partition
/// function, and a sampler.
///
/// Implementations must keep the flattened layouts of
/// [`sufficient_statistic`](ExponentialFamily::sufficient_statistic) and
/// [`grad_log_partition`](ExponentialFamily::grad_log_partition) consistent
/// with [`NaturalParameter::flatten`], so that `θᵀT(x)` is a plain dot
/// product of flat vectors.
pub trait ExponentialFamily<R: Real>: Send + Sync {
    /// Dimension `k` of the sample space.
    fn sample_dim(&self) -> usize;

    /// Block structure of the natural parameter.
    fn param_shape(&self) -> ParamShape;

    /// Flattened parameter dimension `p`.
    fn param_dim(&self) -> usize {
        self.param_shape().dim()
    }

    /// Check that θ is accepted by this family (structure, finiteness, and
    /// positive definiteness where required).
    fn validate(&self, theta: &NaturalParameter<R>) -> Result<()>;

    /// Log-partition `A(θ)`, the log normalizer.
    fn log_partition(&self, theta: &NaturalParameter<R>) -> Result<R>;

    /// `∇A(θ)` as a flat vector; equals `E_θ[T(X)]`.
    fn grad_log_partition(&self, theta: &NaturalParameter<R>) -> Result<Vec<R>>;

    /// Sufficient statistic `T(x)` as a flat vector.
    fn sufficient_statistic(&self, x: &[R]) -> Result<Vec<R>>;

    /// `log h(x)` for the base measure.
    fn log_base(&self, x: &[R]) -> R;

    /// `log f_θ(x) = θᵀT(x) − A(θ) + log h(x)`.
    fn log_density(&self, theta: &NaturalParameter<R>, x: &[R]) -> Result<R> {
        let t = self.sufficient_statistic(x)?;
        let flat = theta.flatten();
        let dot: R = flat.iter().zip(t.iter()).map(|(&a, &b)| a * b).sum();
        Ok(dot - self.log_partition(theta)? + self.log_base(x))
    }

    /// Draw one sample `X ~ f_θ`.
    fn sample(&self, theta: &NaturalParameter<R>, rng: &mut dyn RngCore) -> Result<Vec<R>>;
}

/// Standard Gaussian with mean shifted by θ: `f_θ = N(θ, I_k)`.
///
/// `T(x) = x`, `A(θ) = ½‖θ‖²`, `h` the standard normal density.
#[derive(Debug, Clone)]
pub struct MeanShiftGaussian {
    dim: usize,
}

impl MeanShiftGaussian {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "sample dimension must be at least 1");
        MeanShiftGaussian { dim }
    }
}

impl<R: Real> ExponentialFamily<R> for MeanShiftGaussian {
    fn sample_dim(&self) -> usize {
        self.dim
    }

    fn param_shape(&self) -> ParamShape {
        ParamShape::vector(self.dim)
    }

    fn validate(&self, theta: &NaturalParameter<R>) -> Result<()> {
        let shift = single_vector_block(theta, self.dim)?;
        if shift.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter {
                reason: "mean shift has non-finite entries".to_string(),
            });
        }
        Ok(())
    }

    fn log_partition(&self, theta: &NaturalParameter<R>) -> Result<R> {
        let shift = single_vector_block(theta, self.dim)?;
        self.validate(theta)?;
        Ok(half::<R>() * dot(shift, shift))
    }

    fn grad_log_partition(&self, theta: &NaturalParameter<R>) -> Result<Vec<R>> {
        self.validate(theta)?;
        Ok(theta.flatten())
    }

    fn sufficient_statistic(&self, x: &[R]) -> Result<Vec<R>> {
        check_sample_dim(x, self.dim)?;
        Ok(x.to_vec())
    }

    fn log_base(&self, x: &[R]) -> R {
        -half::<R>() * dot(x, x) - half::<R>() * R::cast(self.dim as f64) * R::ln_two_pi()
    }

    fn sample(&self, theta: &NaturalParameter<R>, rng: &mut dyn RngCore) -> Result<Vec<R>> {
        self.validate(theta)?;
        let shift = single_vector_block(theta, self.dim)?;
        Ok(shift
            .iter()
            .map(|&m| m + R::standard_normal(rng))
            .collect())
    }
}

/// Gaussian in natural coordinates: θ = (m, S) with `m = Σ⁻¹μ`, `S = Σ⁻¹`.
///
/// `T(x) = (x, −½xxᵀ)`, `A(m, S) = ½(mᵀS⁻¹m − log|S|) + (k/2)·ln 2π`,
/// `h ≡ 1`. Sampling draws from `N(S⁻¹m, S⁻¹)`.
#[derive(Debug, Clone)]
pub struct NaturalGaussian {
    dim: usize,
}

impl NaturalGaussian {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "sample dimension must be at least 1");
        NaturalGaussian { dim }
    }

    /// The two-dimensional case used by the polytope problem.
    pub fn bivariate() -> Self {
        NaturalGaussian::new(2)
    }

    fn split<'a, R: Real>(&self, theta: &'a NaturalParameter<R>) -> Result<(&'a [R], &'a [R])> {
        let blocks = theta.blocks();
        match blocks {
            [Block::Vector(m), Block::SymMatrix { side, data }]
                if m.len() == self.dim && *side == self.dim =>
            {
                Ok((m.as_slice(), data.as_slice()))
            }
            _ => Err(Error::StructureMismatch {
                context: "NaturalGaussian parameter",
            }),
        }
    }
}

impl<R: Real> ExponentialFamily<R> for NaturalGaussian {
    fn sample_dim(&self) -> usize {
        self.dim
    }

    fn param_shape(&self) -> ParamShape {
        ParamShape::vector_and_matrix(self.dim, self.dim)
    }

    fn validate(&self, theta: &NaturalParameter<R>) -> Result<()> {
        let (m, s) = self.split(theta)?;
        if m.iter().chain(s.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter {
                reason: "parameter has non-finite entries".to_string(),
            });
        }
        let (evals, _) = linalg::sym_eigen(s, self.dim)?;
        let min = evals[0];
        if !(min > R::cast(MIN_PRECISION_EIGENVALUE)) {
            return Err(Error::InvalidParameter {
                reason: format!(
                    "precision matrix is not positive definite: smallest eigenvalue {:.3e}",
                    min.to_f64_lossy()
                ),
            });
        }
        Ok(())
    }

    fn log_partition(&self, theta: &NaturalParameter<R>) -> Result<R> {
        self.validate(theta)?;
        let (m, s) = self.split(theta)?;
        let l = linalg::cholesky(s, self.dim)?;
        let u = linalg::cholesky_solve(&l, self.dim, m);
        let quad = dot(m, &u);
        let log_det = linalg::cholesky_log_det(&l, self.dim);
        Ok(half::<R>() * (quad - log_det)
            + half::<R>() * R::cast(self.dim as f64) * R::ln_two_pi())
    }

    fn grad_log_partition(&self, theta: &NaturalParameter<R>) -> Result<Vec<R>> {
        self.validate(theta)?;
        let (m, s) = self.split(theta)?;
        let n = self.dim;
        let l = linalg::cholesky(s, n)?;
        let u = linalg::cholesky_solve(&l, n, m); // S⁻¹m, the mean
        let s_inv = linalg::cholesky_inverse(&l, n);
        let mut out = Vec::with_capacity(n + n * n);
        out.extend_from_slice(&u);
        for i in 0..n {
            for j in 0..n {
                out.push(-half::<R>() * (u[i] * u[j] + s_inv[i * n + j]));
            }
        }
        Ok(out)
    }

    fn sufficient_statistic(&self, x: &[R]) -> Result<Vec<R>> {
        check_sample_dim(x, self.dim)?;
        let n = self.dim;
        let mut out = Vec::with_capacity(n + n * n);
        out.extend_from_slice(x);
        for i in 0..n {
            for j in 0..n {
                out.push(-half::<R>() * x[i] * x[j]);
            }
        }
        Ok(out)
    }

    fn log_base(&self, _x: &[R]) -> R {
        R::zero()
    }

    fn sample(&self, theta: &NaturalParameter<R>, rng: &mut dyn RngCore) -> Result<Vec<R>> {
        self.validate(theta)?;
        let (m, s) = self.split(theta)?;
        let n = self.dim;
        let l = linalg::cholesky(s, n)?;
        let mean = linalg::cholesky_solve(&l, n, m);
        let z: Vec<R> = (0..n).map(|_| R::standard_normal(rng)).collect();
        // With S = LLᵀ, the vector L⁻ᵀz has covariance S⁻¹.
        let w = linalg::solve_lower_transpose(&l, n, &z);
        Ok(mean.iter().zip(w.iter()).map(|(&a, &b)| a + b).collect())
    }
}

fn half<R: Real>() -> R {
    R::cast(0.5)
}

fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

fn check_sample_dim<R: Real>(x: &[R], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "sample point",
            expected: dim,
            got: x.len(),
        });
    }
    Ok(())
}

fn single_vector_block<R: Real>(theta: &NaturalParameter<R>, dim: usize) -> Result<&[R]> {
    match theta.blocks() {
        [Block::Vector(v)] if v.len() == dim => Ok(v.as_slice()),
        _ => Err(Error::StructureMismatch {
            context: "MeanShiftGaussian parameter",
        }),
    }
}
