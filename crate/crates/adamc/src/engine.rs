//! The adaptive sampling engine: each iteration draws `X_n ~ f_{θ_n}`,
//! accumulates the unbiased weight `φ(X_n) f(X_n) / f_{θ_n}(X_n)`, forms the
//! stochastic gradient of the per-sample variance, and takes a projected
//! gradient step `θ_{n+1} = Π(θ_n − (C/√n)·g_n)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exp_family::ExponentialFamily;
use crate::param::{NaturalParameter, ParamShape};
use crate::problems::Problem;
use crate::projection::FeasibleSet;
use crate::real::Real;

/// Run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamcConfig<R: Real> {
    /// The constant `C` in the step size `C/√n`. `C = 0` disables adaptation
    /// and the run degenerates to static importance sampling at `theta1`.
    pub step_scale: R,
    /// Initial parameter `θ₁`; must lie in the feasible set.
    pub theta1: NaturalParameter<R>,
    /// Number of iterations (one sample per iteration).
    pub n_iters: u64,
    /// Seed for the run's random stream.
    pub seed: u64,
    /// Trajectory snapshot cadence; a snapshot is recorded every
    /// `snapshot_every` iterations and at the final iteration.
    pub snapshot_every: u64,
}

impl<R: Real> AdamcConfig<R> {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_scale >= R::zero()) || !self.step_scale.is_finite() {
            return Err(Error::InvalidConfig(
                "step scale C must be finite and >= 0".to_string(),
            ));
        }
        if self.n_iters == 0 {
            return Err(Error::InvalidConfig("n_iters must be >= 1".to_string()));
        }
        if self.snapshot_every == 0 {
            return Err(Error::InvalidConfig(
                "snapshot_every must be >= 1".to_string(),
            ));
        }
        if !self.theta1.is_finite() {
            return Err(Error::InvalidConfig("theta1 must be finite".to_string()));
        }
        Ok(())
    }
}

/// One recorded point of the θ trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<R> {
    pub iteration: u64,
    pub estimate: R,
    pub std_error: R,
    pub theta: Vec<R>,
}

/// Mutable run state: iteration counter, current θ, accumulated weight
/// moments, and the random stream.
pub struct AdamcState<R: Real> {
    n_done: u64,
    theta: NaturalParameter<R>,
    shape: ParamShape,
    sum_w: R,
    sum_w2: R,
    rng: ChaCha8Rng,
    // Per-θ quantities shared by the weight and the gradient.
    flat_theta: Vec<R>,
    log_partition: R,
    grad_log_partition: Vec<R>,
}

impl<R: Real> AdamcState<R> {
    /// Initialize at `θ₁` with the stream for `(seed, replicate)`.
    pub fn new(
        family: &dyn ExponentialFamily<R>,
        theta1: NaturalParameter<R>,
        seed: u64,
        replicate: u64,
    ) -> Result<Self> {
        family.validate(&theta1)?;
        let flat_theta = theta1.flatten();
        let log_partition = family.log_partition(&theta1)?;
        let grad_log_partition = family.grad_log_partition(&theta1)?;
        Ok(AdamcState {
            n_done: 0,
            shape: theta1.shape(),
            theta: theta1,
            sum_w: R::zero(),
            sum_w2: R::zero(),
            rng: replicate_rng(seed, replicate),
            flat_theta,
            log_partition,
            grad_log_partition,
        })
    }

    pub fn iterations(&self) -> u64 {
        self.n_done
    }

    pub fn theta(&self) -> &NaturalParameter<R> {
        &self.theta
    }

    pub fn sum_weights(&self) -> R {
        self.sum_w
    }

    pub fn sum_squared_weights(&self) -> R {
        self.sum_w2
    }

    /// Running estimate `(1/n) Σ w_i`.
    pub fn estimate(&self) -> R {
        if self.n_done == 0 {
            R::zero()
        } else {
            self.sum_w / R::cast(self.n_done as f64)
        }
    }

    /// Plug-in standard error `sqrt(max(0, Σw²/n − estimate²) / n)`.
    ///
    /// This treats the weights as if they were i.i.d.; it ignores the
    /// adaptivity of the θ_i and is consistent because the per-sample
    /// variance converges along the run.
    pub fn std_error(&self) -> R {
        if self.n_done == 0 {
            return R::zero();
        }
        let n = R::cast(self.n_done as f64);
        let mean = self.sum_w / n;
        let var = (self.sum_w2 / n - mean * mean).max(R::zero());
        (var / n).sqrt()
    }

    fn set_theta(&mut self, theta: NaturalParameter<R>, family: &dyn ExponentialFamily<R>) -> Result<()> {
        self.flat_theta = theta.flatten();
        self.log_partition = family.log_partition(&theta)?;
        self.grad_log_partition = family.grad_log_partition(&theta)?;
        self.theta = theta;
        Ok(())
    }
}

/// Deterministic per-replicate stream: the 256-bit ChaCha key is derived
/// from `(seed, replicate)`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&replicate.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Importance weight `φ(x) · f(x) / f_θ(x)`, computed as
/// `φ(x) · exp(log f(x) − log f_θ(x))`. Returns exactly zero when `φ(x) = 0`
/// without touching the densities.
pub fn weight<R: Real>(
    problem: &dyn Problem<R>,
    family: &dyn ExponentialFamily<R>,
    theta: &NaturalParameter<R>,
    x: &[R],
) -> Result<R> {
    let phi = problem.integrand(x);
    if phi == R::zero() {
        return Ok(R::zero());
    }
    let log_ratio = problem.nominal_log_density(x) - family.log_density(theta, x)?;
    finite_or_fault(log_ratio, "weight", theta, x)?;
    Ok(phi * log_ratio.exp())
}

/// Stochastic gradient `g = (∇A(θ) − T(x)) · φ²(x) f²(x) / f_θ²(x)`, an
/// unbiased estimate of `∇V(θ)` when `x ~ f_θ`. Returns the zero vector when
/// `φ(x) = 0`.
pub fn stochastic_gradient<R: Real>(
    problem: &dyn Problem<R>,
    family: &dyn ExponentialFamily<R>,
    theta: &NaturalParameter<R>,
    x: &[R],
) -> Result<Vec<R>> {
    let p = family.param_dim();
    let phi = problem.integrand(x);
    if phi == R::zero() {
        return Ok(vec![R::zero(); p]);
    }
    let log_ratio = problem.nominal_log_density(x) - family.log_density(theta, x)?;
    finite_or_fault(log_ratio, "stochastic_gradient", theta, x)?;
    // w² as exp(2·log ratio)·φ², never squaring a possibly huge intermediate.
    let scale = phi * phi * (log_ratio + log_ratio).exp();
    let grad_a = family.grad_log_partition(theta)?;
    let t = family.sufficient_statistic(x)?;
    Ok(grad_a
        .iter()
        .zip(t.iter())
        .map(|(&a, &ti)| (a - ti) * scale)
        .collect())
}

/// One iteration: sample, accumulate, gradient, projected step. The step
/// size uses the 1-based index of the iteration being performed.
pub fn step<R: Real>(
    state: &mut AdamcState<R>,
    problem: &dyn Problem<R>,
    family: &dyn ExponentialFamily<R>,
    set: &FeasibleSet<R>,
    config: &AdamcConfig<R>,
) -> Result<()> {
    let n = state.n_done + 1;
    let x = family.sample(&state.theta, &mut state.rng)?;

    let phi = problem.integrand(&x);
    if phi != R::zero() {
        let t = family.sufficient_statistic(&x)?;
        let dot: R = state
            .flat_theta
            .iter()
            .zip(t.iter())
            .map(|(&a, &b)| a * b)
            .sum();
        let log_density = dot - state.log_partition + family.log_base(&x);
        let log_ratio = problem.nominal_log_density(&x) - log_density;
        finite_or_fault(log_ratio, "step", &state.theta, &x)?;
        let w = phi * log_ratio.exp();
        let w2 = phi * phi * (log_ratio + log_ratio).exp();
        state.sum_w += w;
        state.sum_w2 += w2;
        let grad_scale = w2;

        if grad_scale != R::zero() && config.step_scale > R::zero() {
            let step_size = config.step_scale / R::cast(n as f64).sqrt();
            let mut flat = state.flat_theta.clone();
            for ((f, &a), &ti) in flat
                .iter_mut()
                .zip(state.grad_log_partition.iter())
                .zip(t.iter())
            {
                *f = *f - step_size * (a - ti) * grad_scale;
            }
            if flat.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: "step (parameter update)",
                    details: format!(
                        "theta = {:?}, x = {:?}",
                        state.flat_theta.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>(),
                        x.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>()
                    ),
                });
            }
            let proposal = NaturalParameter::from_flat(&state.shape, &flat)?;
            let projected = set.project(&proposal)?;
            state.set_theta(projected, family)?;
        }
    }
    // φ = 0 contributes a zero weight and a zero gradient: θ is unchanged.
    state.n_done = n;
    Ok(())
}

/// Completed-run report: final estimate, plug-in standard error, trajectory
/// snapshots, and the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport<R: Real> {
    pub estimate: R,
    pub std_error: R,
    pub n: u64,
    pub theta_final: NaturalParameter<R>,
    pub trajectory: Vec<Snapshot<R>>,
    pub seed: u64,
    pub config: AdamcConfig<R>,
}

/// Execute `n_iters` iterations from `θ₁`. Deterministic given the seed.
pub fn run<R: Real>(
    problem: &dyn Problem<R>,
    family: &dyn ExponentialFamily<R>,
    set: &FeasibleSet<R>,
    config: &AdamcConfig<R>,
) -> Result<RunReport<R>> {
    run_replicate(problem, family, set, config, 0)
}

/// As [`run`], with the random stream for the given replicate index.
/// Replicate 0 is the stream [`run`] itself uses.
pub fn run_replicate<R: Real>(
    problem: &dyn Problem<R>,
    family: &dyn ExponentialFamily<R>,
    set: &FeasibleSet<R>,
    config: &AdamcConfig<R>,
    replicate: u64,
) -> Result<RunReport<R>> {
    config.validate()?;
    if problem.sample_dim() != family.sample_dim() {
        return Err(Error::DimensionMismatch {
            context: "run (problem vs family sample dimension)",
            expected: family.sample_dim(),
            got: problem.sample_dim(),
        });
    }
    if config.theta1.shape() != family.param_shape() {
        return Err(Error::StructureMismatch {
            context: "run (theta1 vs family parameter shape)",
        });
    }
    if !set.contains(&config.theta1)? {
        return Err(Error::InvalidConfig(
            "theta1 lies outside the feasible set".to_string(),
        ));
    }

    let mut state = AdamcState::new(family, config.theta1.clone(), config.seed, replicate)?;
    let mut trajectory = Vec::new();
    for i in 1..=config.n_iters {
        step(&mut state, problem, family, set, config)?;
        if i % config.snapshot_every == 0 || i == config.n_iters {
            trajectory.push(Snapshot {
                iteration: i,
                estimate: state.estimate(),
                std_error: state.std_error(),
                theta: state.theta.flatten(),
            });
        }
    }
    Ok(RunReport {
        estimate: state.estimate(),
        std_error: state.std_error(),
        n: state.n_done,
        theta_final: state.theta.clone(),
        trajectory,
        seed: config.seed,
        config: config.clone(),
    })
}

/// Run `replicates` independent copies in parallel, with streams derived
/// from `(config.seed, replicate index)`.
pub fn run_replicates<R: Real>(
    problem: &dyn Problem<R>,
    family: &dyn ExponentialFamily<R>,
    set: &FeasibleSet<R>,
    config: &AdamcConfig<R>,
    replicates: u64,
) -> Result<Vec<RunReport<R>>> {
    (0..replicates)
        .into_par_iter()
        .map(|r| run_replicate(problem, family, set, config, r))
        .collect()
}

fn finite_or_fault<R: Real>(
    value: R,
    context: &'static str,
    theta: &NaturalParameter<R>,
    x: &[R],
) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context,
            details: format!(
                "log-density ratio = {}, theta = {:?}, x = {:?}",
                value.to_f64_lossy(),
                theta.flatten().iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>(),
                x.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>()
            ),
        })
    }
}
