//! Deterministic ground truth at low dimension: tensor-grid quadrature for
//! the integral, the per-sample variance `V(θ)` and the weight's fourth
//! moment `K(θ)`, finite-difference gradients of `V`, and a multi-start
//! projected-gradient search for the optimal variance `V*`.
//!
//! Everything accumulates in log domain, so probes deep in the tails (where
//! the weight moments exceed the floating-point range) still report a usable
//! log value.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exp_family::ExponentialFamily;
use crate::param::{NaturalParameter, ParamShape};
use crate::problems::Problem;
use crate::projection::{FeasibleSet, SetBlock};
use crate::real::Real;

/// Mass allowed outside the integration rectangle before the coverage check
/// rejects a grid.
pub const COVERAGE_BUDGET: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    /// Midpoint rule; robust for indicator-type integrands.
    Midpoint,
    /// Tensor Gauss–Legendre; fast-converging for smooth integrands.
    GaussLegendre,
}

/// A tensor-product integration grid on an axis-aligned rectangle.
#[derive(Debug, Clone)]
pub struct QuadratureGrid<R> {
    nodes_per_dim: Vec<usize>,
    lo: Vec<R>,
    hi: Vec<R>,
    rule: QuadratureRule,
    /// Rough spatial resolution; tests use it to scale grid-error tolerances.
    truncation_hint: R,
}

impl<R: Real> QuadratureGrid<R> {
    pub fn new(
        rule: QuadratureRule,
        nodes_per_dim: Vec<usize>,
        lo: Vec<R>,
        hi: Vec<R>,
    ) -> Result<Self> {
        if nodes_per_dim.is_empty() || nodes_per_dim.len() != lo.len() || lo.len() != hi.len() {
            return Err(Error::InvalidConfig(
                "grid dimensions must be consistent and non-empty".to_string(),
            ));
        }
        if nodes_per_dim.iter().any(|&n| n < 16) {
            return Err(Error::InvalidConfig(
                "each grid dimension needs at least 16 nodes".to_string(),
            ));
        }
        if lo.iter().zip(hi.iter()).any(|(&l, &h)| !(l < h)) {
            return Err(Error::InvalidConfig(
                "grid rectangle must satisfy lo < hi".to_string(),
            ));
        }
        let mut hint = R::zero();
        for (i, &n) in nodes_per_dim.iter().enumerate() {
            let spacing = (hi[i] - lo[i]) / R::cast(n as f64);
            hint = hint.max(spacing);
        }
        if rule == QuadratureRule::GaussLegendre {
            // Spectral accuracy on smooth integrands; the spacing is not the
            // limiting factor.
            hint = R::cast(1e-12);
        }
        Ok(QuadratureGrid {
            nodes_per_dim,
            lo,
            hi,
            rule,
            truncation_hint: hint,
        })
    }

    pub fn midpoint(nodes_per_dim: Vec<usize>, lo: Vec<R>, hi: Vec<R>) -> Result<Self> {
        QuadratureGrid::new(QuadratureRule::Midpoint, nodes_per_dim, lo, hi)
    }

    pub fn gauss_legendre(nodes_per_dim: Vec<usize>, lo: Vec<R>, hi: Vec<R>) -> Result<Self> {
        QuadratureGrid::new(QuadratureRule::GaussLegendre, nodes_per_dim, lo, hi)
    }

    /// Default grid for a problem: midpoint 512 per dimension over a bounded
    /// support, otherwise Gauss–Legendre on `[−10, 10]^k` (2048 nodes in one
    /// dimension, 512 per dimension in two).
    pub fn default_for(problem: &dyn Problem<R>) -> Result<Self> {
        let k = problem.sample_dim();
        match problem.bounded_support() {
            Some((lo, hi)) => QuadratureGrid::midpoint(vec![512; k], lo, hi),
            None => {
                let n = if k == 1 { 2048 } else { 512 };
                QuadratureGrid::gauss_legendre(
                    vec![n; k],
                    vec![R::cast(-10.0); k],
                    vec![R::cast(10.0); k],
                )
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.nodes_per_dim.len()
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn truncation_hint(&self) -> R {
        self.truncation_hint
    }

    fn axis_nodes(&self, d: usize) -> (Vec<R>, Vec<R>) {
        let n = self.nodes_per_dim[d];
        let (lo, hi) = (self.lo[d], self.hi[d]);
        match self.rule {
            QuadratureRule::Midpoint => {
                let h = (hi - lo) / R::cast(n as f64);
                let points = (0..n)
                    .map(|i| lo + h * (R::cast(i as f64) + R::cast(0.5)))
                    .collect();
                (points, vec![h; n])
            }
            QuadratureRule::GaussLegendre => {
                let (xs, ws) = gauss_legendre_unit(n);
                let half_len = (hi.to_f64_lossy() - lo.to_f64_lossy()) / 2.0;
                let mid = (hi.to_f64_lossy() + lo.to_f64_lossy()) / 2.0;
                let points = xs.iter().map(|&x| R::cast(mid + half_len * x)).collect();
                let weights = ws.iter().map(|&w| R::cast(w * half_len)).collect();
                (points, weights)
            }
        }
    }
}

/// Nodes and weights of the n-point Gauss–Legendre rule on `[−1, 1]`,
/// via Newton iteration on the Legendre recurrence.
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0f64; n];
    let mut ws = vec![0.0f64; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        xs[n - 1 - i] = x;
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

struct MomentNode<R> {
    log_weight: R,
    /// `ln|φ(x)| + ln f(x)`.
    log_phi_f: R,
    log_base: R,
    statistic: Vec<R>,
}

struct MassNode<R> {
    log_weight: R,
    log_base: R,
    statistic: Vec<R>,
}

/// Precomputed grid evaluation of one (problem, family) pair; reusable
/// across many θ probes.
pub struct QuadratureOracle<'a, R: Real> {
    family: &'a dyn ExponentialFamily<R>,
    shape: ParamShape,
    nodes: Vec<MomentNode<R>>,
    /// All grid nodes, kept only when the nominal support is unbounded, for
    /// the per-θ sampling-density coverage check.
    mass_nodes: Option<Vec<MassNode<R>>>,
    integral: R,
    truncation_hint: R,
}

impl<'a, R: Real> QuadratureOracle<'a, R> {
    pub fn new(
        problem: &'a dyn Problem<R>,
        family: &'a dyn ExponentialFamily<R>,
        grid: &QuadratureGrid<R>,
    ) -> Result<Self> {
        let k = problem.sample_dim();
        if k > 2 {
            return Err(Error::InvalidConfig(format!(
                "quadrature oracle supports sample dimensions 1 and 2, got {k}"
            )));
        }
        if family.sample_dim() != k {
            return Err(Error::DimensionMismatch {
                context: "QuadratureOracle (family vs problem dimension)",
                expected: k,
                got: family.sample_dim(),
            });
        }
        if grid.dim() != k {
            return Err(Error::DimensionMismatch {
                context: "QuadratureOracle (grid vs problem dimension)",
                expected: k,
                got: grid.dim(),
            });
        }

        let keep_mass = problem.bounded_support().is_none();
        let mut nodes = Vec::new();
        let mut mass_nodes = if keep_mass { Some(Vec::new()) } else { None };
        let mut integral = R::zero();
        let mut nominal_mass = R::zero();

        let mut visit = |x: &[R], w: R| -> Result<()> {
            let log_f = problem.nominal_log_density(x);
            let log_w = w.ln();
            if let Some(mass) = mass_nodes.as_mut() {
                mass.push(MassNode {
                    log_weight: log_w,
                    log_base: family.log_base(x),
                    statistic: family.sufficient_statistic(x)?,
                });
            }
            if log_f == R::neg_infinity() {
                return Ok(());
            }
            nominal_mass = nominal_mass + w * log_f.exp();
            let phi = problem.integrand(x);
            if phi == R::zero() {
                return Ok(());
            }
            integral = integral + w * phi * log_f.exp();
            nodes.push(MomentNode {
                log_weight: log_w,
                log_phi_f: phi.abs().ln() + log_f,
                log_base: family.log_base(x),
                statistic: family.sufficient_statistic(x)?,
            });
            Ok(())
        };

        match k {
            1 => {
                let (points, weights) = grid.axis_nodes(0);
                for (x, w) in points.iter().zip(weights.iter()) {
                    visit(&[*x], *w)?;
                }
            }
            2 => {
                let (px, wx) = grid.axis_nodes(0);
                let (py, wy) = grid.axis_nodes(1);
                for (x, w0) in px.iter().zip(wx.iter()) {
                    for (y, w1) in py.iter().zip(wy.iter()) {
                        visit(&[*x, *y], *w0 * *w1)?;
                    }
                }
            }
            _ => unreachable!(),
        }

        let missing = (R::one() - nominal_mass).abs().to_f64_lossy();
        if missing > COVERAGE_BUDGET {
            return Err(Error::GridCoverage {
                missing,
                budget: COVERAGE_BUDGET,
            });
        }

        Ok(QuadratureOracle {
            family,
            shape: family.param_shape(),
            nodes,
            mass_nodes,
            integral,
            truncation_hint: grid.truncation_hint(),
        })
    }

    /// `I` by quadrature on this grid.
    pub fn integral(&self) -> R {
        self.integral
    }

    pub fn truncation_hint(&self) -> R {
        self.truncation_hint
    }

    /// `log ∫ |φ|^q f^q / f_θ^{q−1} dx`: the log of the q-th weight moment
    /// under `X ~ f_θ` (for even q; odd orders use `|φ|`).
    pub fn log_moment(&self, order: u32, theta: &NaturalParameter<R>) -> Result<R> {
        let q = R::cast(order as f64);
        let qm1 = q - R::one();
        let log_partition = self.family.log_partition(theta)?;
        self.check_family_mass(theta, log_partition)?;
        let flat = theta.flatten();

        let mut max = R::neg_infinity();
        let mut exponents = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let dot: R = flat
                .iter()
                .zip(node.statistic.iter())
                .map(|(&a, &b)| a * b)
                .sum();
            let e = node.log_weight + q * node.log_phi_f - qm1 * (node.log_base + dot);
            if e > max {
                max = e;
            }
            exponents.push(e);
        }
        if max == R::neg_infinity() {
            return Ok(R::neg_infinity());
        }
        let sum: R = exponents.iter().map(|&e| (e - max).exp()).sum();
        Ok(max + sum.ln() + qm1 * log_partition)
    }

    /// Per-sample variance `V(θ) = ∫ φ²f²/f_θ − I²` on this grid.
    pub fn variance(&self, theta: &NaturalParameter<R>) -> Result<R> {
        let m2 = self.log_moment(2, theta)?;
        Ok(m2.exp() - self.integral * self.integral)
    }

    /// Fourth moment `K(θ) = ∫ φ⁴f⁴/f_θ³`; may overflow to `+∞` for extreme
    /// θ even when the log (see [`log_moment`](Self::log_moment)) is finite.
    pub fn fourth_moment(&self, theta: &NaturalParameter<R>) -> Result<R> {
        Ok(self.log_moment(4, theta)?.exp())
    }

    /// Central finite differences of [`variance`](Self::variance), with the
    /// per-coordinate step `h·(1 + |θ_i|)`.
    pub fn grad_variance_fd(&self, theta: &NaturalParameter<R>, h: R) -> Result<Vec<R>> {
        let flat = theta.flatten();
        let mut grad = Vec::with_capacity(flat.len());
        for k in 0..flat.len() {
            let hk = h * (R::one() + flat[k].abs());
            let dir = self.shape.unit_direction(k);
            let plus = theta.add_scaled(&dir, hk)?;
            let minus = theta.add_scaled(&dir, -hk)?;
            for probe in [&plus, &minus] {
                if let Err(e) = self.family.validate(probe) {
                    return Err(Error::InvalidParameter {
                        reason: format!(
                            "theta too close to the validity boundary for step {:.3e}: {e}",
                            hk.to_f64_lossy()
                        ),
                    });
                }
            }
            let v_plus = self.variance(&plus)?;
            let v_minus = self.variance(&minus)?;
            grad.push((v_plus - v_minus) / (hk + hk));
        }
        Ok(grad)
    }

    /// Sampling-density mass check for unbounded nominal supports:
    /// `∫_grid f_θ` must be within the coverage budget of 1.
    fn check_family_mass(&self, theta: &NaturalParameter<R>, log_partition: R) -> Result<()> {
        let Some(mass_nodes) = &self.mass_nodes else {
            return Ok(());
        };
        let flat = theta.flatten();
        let mut mass = R::zero();
        for node in mass_nodes {
            let dot: R = flat
                .iter()
                .zip(node.statistic.iter())
                .map(|(&a, &b)| a * b)
                .sum();
            mass = mass + (node.log_weight + dot - log_partition + node.log_base).exp();
        }
        let missing = (R::one() - mass).abs().to_f64_lossy();
        if missing > COVERAGE_BUDGET {
            return Err(Error::GridCoverage {
                missing,
                budget: COVERAGE_BUDGET,
            });
        }
        Ok(())
    }
}

/// One-shot `V(θ)` (see [`QuadratureOracle::variance`]).
pub fn variance_quadrature<R: Real>(
    problem: &dyn Problem<R>,
    family: &dyn ExponentialFamily<R>,
    theta: &NaturalParameter<R>,
    grid: &QuadratureGrid<R>,
) -> Result<R> {
    QuadratureOracle::new(problem, family, grid)?.variance(theta)
}

/// One-shot `K(θ)` (see [`QuadratureOracle::fourth_moment`]).
pub fn fourth_moment_quadrature<R: Real>(
    problem: &dyn Problem<R>,
    family: &dyn ExponentialFamily<R>,
    theta: &NaturalParameter<R>,
    grid: &QuadratureGrid<R>,
) -> Result<R> {
    QuadratureOracle::new(problem, family, grid)?.fourth_moment(theta)
}

/// One-shot `log K(θ)`; finite whenever the fourth moment is, even when it
/// exceeds the floating-point range.
pub fn log_fourth_moment_quadrature<R: Real>(
    problem: &dyn Problem<R>,
    family: &dyn ExponentialFamily<R>,
    theta: &NaturalParameter<R>,
    grid: &QuadratureGrid<R>,
) -> Result<R> {
    QuadratureOracle::new(problem, family, grid)?.log_moment(4, theta)
}

/// One-shot finite-difference `∇V(θ)` (see
/// [`QuadratureOracle::grad_variance_fd`]).
pub fn grad_variance_fd<R: Real>(
    problem: &dyn Problem<R>,
    family: &dyn ExponentialFamily<R>,
    theta: &NaturalParameter<R>,
    grid: &QuadratureGrid<R>,
    h: R,
) -> Result<Vec<R>> {
    QuadratureOracle::new(problem, family, grid)?.grad_variance_fd(theta, h)
}

/// Result of the deterministic variance minimization.
#[derive(Debug, Clone)]
pub struct OptimalVariance<R: Real> {
    pub theta_star: NaturalParameter<R>,
    pub v_star: R,
    /// False when some start hit the iteration cap before stalling; the best
    /// point found is still reported.
    pub converged: bool,
    /// Converged objective value per start; convexity should keep their
    /// spread tiny.
    pub start_values: Vec<R>,
}

/// Minimize `V` over the feasible set by projected gradient descent on the
/// quadrature objective with finite-difference gradients, from several
/// deterministic starts.
pub fn optimal_variance<R: Real>(
    problem: &dyn Problem<R>,
    family: &dyn ExponentialFamily<R>,
    set: &FeasibleSet<R>,
    grid: &QuadratureGrid<R>,
) -> Result<OptimalVariance<R>> {
    let oracle = QuadratureOracle::new(problem, family, grid)?;
    let starts = default_starts::<R>(set);

    let outcomes: Vec<(NaturalParameter<R>, R, bool)> = starts
        .par_iter()
        .map(|start| projected_descent(&oracle, set, start))
        .collect::<Result<_>>()?;

    let start_values: Vec<R> = outcomes.iter().map(|(_, v, _)| *v).collect();
    let converged = outcomes.iter().all(|(_, _, c)| *c);
    let best = outcomes
        .into_iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("objective values are finite"))
        .expect("at least one start");
    Ok(OptimalVariance {
        theta_star: best.0,
        v_star: best.1,
        converged: converged && best.2,
        start_values,
    })
}

/// Five deterministic starts spread through the product set.
fn default_starts<R: Real>(set: &FeasibleSet<R>) -> Vec<NaturalParameter<R>> {
    [0.1, 0.3, 0.5, 0.7, 0.9]
        .iter()
        .map(|&fr| {
            let frac = R::cast(fr);
            let blocks = set
                .blocks()
                .iter()
                .map(|b| match b {
                    SetBlock::Box { lo, hi } => crate::param::Block::Vector(
                        lo.iter()
                            .zip(hi.iter())
                            .map(|(&l, &h)| l + frac * (h - l))
                            .collect(),
                    ),
                    SetBlock::SpectralBox { lo, hi, side } => {
                        let v = *lo + frac * (*hi - *lo);
                        let mut data = vec![R::zero(); side * side];
                        for i in 0..*side {
                            data[i * side + i] = v;
                        }
                        crate::param::Block::SymMatrix { side: *side, data }
                    }
                })
                .collect();
            NaturalParameter::from_blocks(blocks).expect("start blocks are well formed")
        })
        .collect()
}

fn projected_descent<R: Real>(
    oracle: &QuadratureOracle<R>,
    set: &FeasibleSet<R>,
    start: &NaturalParameter<R>,
) -> Result<(NaturalParameter<R>, R, bool)> {
    const MAX_ITERS: usize = 800;
    const FD_STEP: f64 = 1e-4;

    let mut theta = set.project(start)?;
    let mut value = oracle.variance(&theta)?;
    let shape = theta.shape();
    let mut step = R::zero();
    let mut stalls = 0u32;

    for iter in 0..MAX_ITERS {
        let grad = oracle.grad_variance_fd(&theta, R::cast(FD_STEP))?;
        let grad_norm = norm(&grad);
        if iter == 0 {
            let theta_norm = norm(&theta.flatten());
            step = (R::one() + theta_norm) / (R::one() + grad_norm);
        }

        let mut accepted = false;
        for _ in 0..60 {
            let flat = theta.flatten();
            let candidate_flat: Vec<R> = flat
                .iter()
                .zip(grad.iter())
                .map(|(&t, &g)| t - step * g)
                .collect();
            let candidate =
                set.project(&NaturalParameter::from_flat(&shape, &candidate_flat)?)?;
            let candidate_value = oracle.variance(&candidate)?;
            let move_flat = candidate.flatten();
            let decrease_ref: R = grad
                .iter()
                .zip(flat.iter().zip(move_flat.iter()))
                .map(|(&g, (&a, &b))| g * (a - b))
                .sum();
            if candidate_value <= value - R::cast(1e-4) * decrease_ref.max(R::zero()) {
                let moved = distance(&flat, &move_flat);
                let improvement = value - candidate_value;
                theta = candidate;
                value = candidate_value;
                step = step * R::cast(1.25);
                accepted = true;
                let tiny_move = moved <= R::cast(1e-10) * (R::one() + norm(&flat));
                // Relative stagnation: progress per accepted step below 1e-8
                // of the current objective.
                let tiny_gain = improvement <= R::cast(1e-8) * value.abs();
                if tiny_move || tiny_gain {
                    stalls += 1;
                } else {
                    stalls = 0;
                }
                break;
            }
            step = step / R::cast(2.0);
            if step < R::cast(1e-18) {
                break;
            }
        }
        if !accepted {
            // No descent direction at working precision: stationary.
            return Ok((theta, value, true));
        }
        if stalls >= 3 {
            return Ok((theta, value, true));
        }
    }
    Ok((theta, value, false))
}

fn norm<R: Real>(v: &[R]) -> R {
    v.iter().map(|&x| x * x).sum::<R>().sqrt()
}

fn distance<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<R>()
        .sqrt()
}
