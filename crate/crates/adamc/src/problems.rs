//! Built-in integration problems: the area of a polygon under a uniform
//! nominal on the unit square, an arithmetic Asian call option under a
//! k-dimensional standard normal nominal, and a constant-integrand problem
//! with known closed forms used by the oracle tests.

use crate::error::{Error, Result};
use crate::exp_family::{MeanShiftGaussian, NaturalGaussian};
use crate::param::NaturalParameter;
use crate::projection::{FeasibleSet, SetBlock};
use crate::real::Real;

/// An integration problem `I = ∫ φ(x) f(x) dx` with integrand φ and nominal
/// density f given in log domain.
pub trait Problem<R: Real>: Send + Sync {
    /// Dimension `k` of the sample space.
    fn sample_dim(&self) -> usize;

    /// Integrand φ(x). Must return exactly zero off the support of `φ·f`.
    fn integrand(&self, x: &[R]) -> R;

    /// `log f(x)` of the nominal density; `−∞` off its support.
    fn nominal_log_density(&self, x: &[R]) -> R;

    /// Rectangle outside which `φ·f` vanishes, when the support is bounded.
    fn bounded_support(&self) -> Option<(Vec<R>, Vec<R>)> {
        None
    }

    fn name(&self) -> &'static str;
}

/// A simple polygon given by its vertices in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon<R> {
    vertices: Vec<[R; 2]>,
}

impl<R: Real> Polygon<R> {
    pub fn new(vertices: Vec<[R; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidConfig(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "polygon vertices must be finite".to_string(),
            ));
        }
        Ok(Polygon { vertices })
    }

    pub fn vertices(&self) -> &[[R; 2]] {
        &self.vertices
    }

    /// Point-in-polygon by even-odd ray casting. Boundary points (edges and
    /// vertices) count as inside.
    pub fn contains(&self, p: [R; 2]) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            if on_segment(self.vertices[i], self.vertices[(i + 1) % n], p) {
                return true;
            }
        }
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x_cross = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Shoelace area.
    pub fn area(&self) -> R {
        let n = self.vertices.len();
        let mut acc = R::zero();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            acc = acc + (a[0] * b[1] - b[0] * a[1]);
        }
        (acc / R::cast(2.0)).abs()
    }

    pub fn perimeter(&self) -> R {
        let n = self.vertices.len();
        let mut acc = R::zero();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            acc = acc + (dx * dx + dy * dy).sqrt();
        }
        acc
    }
}

fn on_segment<R: Real>(a: [R; 2], b: [R; 2], p: [R; 2]) -> bool {
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    if cross != R::zero() {
        return false;
    }
    let within = |lo: R, hi: R, v: R| v >= lo.min(hi) && v <= lo.max(hi);
    within(a[0], b[0], p[0]) && within(a[1], b[1], p[1])
}

/// Area of a polygon inside the unit square: `φ = 1_Q`, `f` uniform on
/// `[0,1]²`.
#[derive(Debug, Clone)]
pub struct PolytopeProblem<R> {
    polygon: Polygon<R>,
}

impl<R: Real> PolytopeProblem<R> {
    pub fn new(polygon: Polygon<R>) -> Result<Self> {
        for v in polygon.vertices() {
            if v.iter().any(|&c| c < R::zero() || c > R::one()) {
                return Err(Error::InvalidConfig(
                    "polygon corners must lie inside the unit square".to_string(),
                ));
            }
        }
        Ok(PolytopeProblem { polygon })
    }

    pub fn polygon(&self) -> &Polygon<R> {
        &self.polygon
    }

    /// Exact area of the target region (shoelace).
    pub fn area(&self) -> R {
        self.polygon.area()
    }

    /// Recommended sampling family: a bivariate Gaussian in natural
    /// coordinates.
    pub fn recommended_family(&self) -> NaturalGaussian {
        NaturalGaussian::bivariate()
    }

    /// Default feasible set: `m ∈ [0,25]²`, spectrum of `S` in `[1, 50]`.
    pub fn default_feasible_set(&self) -> FeasibleSet<R> {
        FeasibleSet::new(vec![
            SetBlock::Box {
                lo: vec![R::zero(); 2],
                hi: vec![R::cast(25.0); 2],
            },
            SetBlock::SpectralBox {
                lo: R::one(),
                hi: R::cast(50.0),
                side: 2,
            },
        ])
        .expect("static bounds are valid")
    }

    /// Default initial parameter: the Gaussian that moment-matches the
    /// uniform nominal (`μ = (½, ½)`, `Σ = I/12`), i.e. `S = 12·I`,
    /// `m = S μ = (6, 6)`.
    pub fn default_initial_parameter(&self) -> NaturalParameter<R> {
        let twelve = R::cast(12.0);
        NaturalParameter::vector_and_matrix(
            vec![R::cast(6.0); 2],
            vec![twelve, R::zero(), R::zero(), twelve],
            2,
        )
        .expect("static parameter is well formed")
    }
}

impl<R: Real> Default for PolytopeProblem<R> {
    /// The default quadrilateral with corners (0.05, 0.9), (0.8, 0.9),
    /// (1, 0.7), (0.15, 0.7); its area is 0.16.
    fn default() -> Self {
        let corners = [[0.05, 0.9], [0.8, 0.9], [1.0, 0.7], [0.15, 0.7]];
        let vertices = corners
            .iter()
            .map(|v| [R::cast(v[0]), R::cast(v[1])])
            .collect();
        PolytopeProblem::new(Polygon::new(vertices).expect("static polygon is valid"))
            .expect("static polygon is inside the unit square")
    }
}

impl<R: Real> Problem<R> for PolytopeProblem<R> {
    fn sample_dim(&self) -> usize {
        2
    }

    fn integrand(&self, x: &[R]) -> R {
        debug_assert_eq!(x.len(), 2);
        if self.polygon.contains([x[0], x[1]]) {
            R::one()
        } else {
            R::zero()
        }
    }

    fn nominal_log_density(&self, x: &[R]) -> R {
        let inside = x
            .iter()
            .all(|&v| v >= R::zero() && v <= R::one());
        if inside {
            R::zero()
        } else {
            R::neg_infinity()
        }
    }

    fn bounded_support(&self) -> Option<(Vec<R>, Vec<R>)> {
        Some((vec![R::zero(); 2], vec![R::one(); 2]))
    }

    fn name(&self) -> &'static str {
        "polytope"
    }
}

/// Parameters of an arithmetic Asian call option under Black–Scholes
/// dynamics with `steps` equally spaced monitoring dates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsianParams<R> {
    pub initial_price: R,
    pub strike: R,
    pub rate: R,
    pub volatility: R,
    pub maturity: R,
    pub steps: usize,
}

impl<R: Real> AsianParams<R> {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_price > R::zero()) {
            return Err(Error::InvalidConfig("initial price must be > 0".to_string()));
        }
        if !(self.strike >= R::zero()) {
            return Err(Error::InvalidConfig("strike must be >= 0".to_string()));
        }
        if !(self.volatility >= R::zero()) {
            return Err(Error::InvalidConfig("volatility must be >= 0".to_string()));
        }
        if !(self.maturity > R::zero()) {
            return Err(Error::InvalidConfig("maturity must be > 0".to_string()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig(
                "number of monitoring dates must be >= 1".to_string(),
            ));
        }
        Ok(())
    }
}

impl<R: Real> Default for AsianParams<R> {
    /// S0 = K = 50, r = 0.05, σ = 0.3, T = 1, 64 monitoring dates.
    fn default() -> Self {
        AsianParams {
            initial_price: R::cast(50.0),
            strike: R::cast(50.0),
            rate: R::cast(0.05),
            volatility: R::cast(0.3),
            maturity: R::one(),
            steps: 64,
        }
    }
}

/// Discounted arithmetic Asian call payoff driven by i.i.d. standard normal
/// shocks; the nominal is the standard normal on `ℝ^k`.
#[derive(Debug, Clone)]
pub struct AsianOption<R> {
    params: AsianParams<R>,
}

impl<R: Real> AsianOption<R> {
    pub fn new(params: AsianParams<R>) -> Result<Self> {
        params.validate()?;
        Ok(AsianOption { params })
    }

    pub fn params(&self) -> &AsianParams<R> {
        &self.params
    }

    /// `e^{−rT} · max((1/k) Σ_j S_j − K, 0)` where
    /// `S_j = S0 · exp((r − σ²/2)·jT/k + σ√(T/k)·Σ_{i≤j} x_i)`.
    ///
    /// Prices are accumulated through their logs so a long streak of large
    /// shocks cannot overflow intermediate products.
    pub fn payoff(&self, x: &[R]) -> R {
        debug_assert_eq!(x.len(), self.params.steps);
        let k = R::cast(self.params.steps as f64);
        let dt = self.params.maturity / k;
        let half = R::cast(0.5);
        let drift = (self.params.rate - half * self.params.volatility * self.params.volatility)
            * dt;
        let shock_scale = self.params.volatility * dt.sqrt();

        let mut log_price = self.params.initial_price.ln();
        let mut price_sum = R::zero();
        for &shock in x {
            log_price = log_price + drift + shock_scale * shock;
            price_sum = price_sum + log_price.exp();
        }
        let average = price_sum / k;
        let discount = (-self.params.rate * self.params.maturity).exp();
        discount * (average - self.params.strike).max(R::zero())
    }

    /// The importance weight specialized to the mean-shift family:
    /// `φ(x) · exp(½‖θ‖² − xᵀθ)`. Kept alongside the generic weight as an
    /// independent cross-check.
    pub fn mean_shift_weight(&self, shift: &[R], x: &[R]) -> R {
        let phi = self.payoff(x);
        if phi == R::zero() {
            return R::zero();
        }
        let half = R::cast(0.5);
        let norm2: R = shift.iter().map(|&t| t * t).sum();
        let dot: R = shift.iter().zip(x.iter()).map(|(&t, &v)| t * v).sum();
        phi * (half * norm2 - dot).exp()
    }

    pub fn recommended_family(&self) -> MeanShiftGaussian {
        MeanShiftGaussian::new(self.params.steps)
    }

    /// Default feasible set `[−0.5, 0.5]^k`.
    pub fn default_feasible_set(&self) -> FeasibleSet<R> {
        let half = R::cast(0.5);
        FeasibleSet::from_box(
            vec![-half; self.params.steps],
            vec![half; self.params.steps],
        )
        .expect("static bounds are valid")
    }

    pub fn default_initial_parameter(&self) -> NaturalParameter<R> {
        NaturalParameter::vector(vec![R::zero(); self.params.steps])
    }
}

impl<R: Real> Problem<R> for AsianOption<R> {
    fn sample_dim(&self) -> usize {
        self.params.steps
    }

    fn integrand(&self, x: &[R]) -> R {
        self.payoff(x)
    }

    fn nominal_log_density(&self, x: &[R]) -> R {
        standard_normal_log_density(x)
    }

    fn name(&self) -> &'static str {
        "asian"
    }
}

/// `φ ≡ 1` under a standard normal nominal: `I = 1` with closed-form
/// variance `V(θ) = e^{‖θ‖²} − 1` under the mean-shift family.
#[derive(Debug, Clone)]
pub struct ConstantIntegrand {
    dim: usize,
}

impl ConstantIntegrand {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "sample dimension must be at least 1");
        ConstantIntegrand { dim }
    }

    pub fn recommended_family(&self) -> MeanShiftGaussian {
        MeanShiftGaussian::new(self.dim)
    }

    /// Default feasible set `[−1, 1]^k`.
    pub fn default_feasible_set<R: Real>(&self) -> FeasibleSet<R> {
        FeasibleSet::from_box(vec![-R::one(); self.dim], vec![R::one(); self.dim])
            .expect("static bounds are valid")
    }

    pub fn default_initial_parameter<R: Real>(&self) -> NaturalParameter<R> {
        NaturalParameter::vector(vec![R::zero(); self.dim])
    }
}

impl<R: Real> Problem<R> for ConstantIntegrand {
    fn sample_dim(&self) -> usize {
        self.dim
    }

    fn integrand(&self, _x: &[R]) -> R {
        R::one()
    }

    fn nominal_log_density(&self, x: &[R]) -> R {
        standard_normal_log_density(x)
    }

    fn name(&self) -> &'static str {
        "constant"
    }
}

fn standard_normal_log_density<R: Real>(x: &[R]) -> R {
    let half = R::cast(0.5);
    let norm2: R = x.iter().map(|&v| v * v).sum();
    -half * norm2 - half * R::cast(x.len() as f64) * R::ln_two_pi()
}
