//! Experiment configuration: a flat `key = value` text format with `#`
//! comments and dotted keys for problem parameters, plus the assembly of the
//! configured problem, family, feasible set, and run settings.

use std::fmt;

use adamc::engine::AdamcConfig;
use adamc::exp_family::{ExponentialFamily, MeanShiftGaussian, NaturalGaussian};
use adamc::param::NaturalParameter;
use adamc::problems::{
    AsianOption, AsianParams, ConstantIntegrand, Polygon, PolytopeProblem, Problem,
};
use adamc::projection::{FeasibleSet, SetBlock};

/// A configuration error; carries the offending key where there is one.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn key_err<T>(key: &str, detail: impl fmt::Display) -> Result<T, ConfigError> {
    Err(ConfigError(format!("key `{key}`: {detail}")))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    Polytope { corners: Vec<[f64; 2]> },
    Asian(AsianParams<f64>),
    Constant { dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    MeanShift,
    NaturalGaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Theta1Spec {
    /// The per-problem documented default.
    Default,
    Zeros,
    Explicit(Vec<f64>),
}

/// Parsed experiment configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub family: FamilyKind,
    pub step_scale: f64,
    pub theta1: Theta1Spec,
    pub n_iters: u64,
    pub seed: u64,
    pub replicates: u64,
    pub snapshot_every: Option<u64>,
    pub out_dir: String,
    pub box_lo: Option<Vec<f64>>,
    pub box_hi: Option<Vec<f64>>,
    pub spectral_lo: Option<f64>,
    pub spectral_hi: Option<f64>,
    pub oracle_thetas: Vec<Vec<f64>>,
    pub replicate_seeds: Option<Vec<u64>>,
}

/// Everything needed to run: the concrete problem, family, feasible set, and
/// engine configuration.
pub struct Assembled {
    pub problem: Box<dyn Problem<f64>>,
    pub family: Box<dyn ExponentialFamily<f64>>,
    pub set: FeasibleSet<f64>,
    pub run: AdamcConfig<f64>,
    pub family_kind: FamilyKind,
}

const DEFAULT_CORNERS: [[f64; 2]; 4] = [[0.05, 0.9], [0.8, 0.9], [1.0, 0.7], [0.15, 0.7]];

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut problem_name: Option<String> = None;
    let mut family: Option<String> = None;
    let mut step_scale: Option<f64> = None;
    let mut theta1: Option<Theta1Spec> = None;
    let mut n_iters: Option<u64> = None;
    let mut seed: Option<u64> = None;
    let mut replicates: Option<u64> = None;
    let mut snapshot_every: Option<u64> = None;
    let mut out_dir: Option<String> = None;
    let mut corners: Option<Vec<[f64; 2]>> = None;
    let mut asian = AsianParams::<f64>::default();
    let mut constant_dim: usize = 1;
    let mut box_lo: Option<Vec<f64>> = None;
    let mut box_hi: Option<Vec<f64>> = None;
    let mut spectral_lo: Option<f64> = None;
    let mut spectral_hi: Option<f64> = None;
    let mut oracle_thetas: Vec<Vec<f64>> = Vec::new();
    let mut replicate_seeds: Option<Vec<u64>> = None;

    for (line_no, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError(format!(
                "line {}: expected `key = value`, got `{line}`",
                line_no + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "problem" => problem_name = Some(value.to_string()),
            "family" => family = Some(value.to_string()),
            "c" => step_scale = Some(parse_f64(key, value)?),
            "theta1" => {
                theta1 = Some(match value {
                    "default" => Theta1Spec::Default,
                    "zeros" => Theta1Spec::Zeros,
                    _ => Theta1Spec::Explicit(parse_f64_list(key, value)?),
                })
            }
            "n_iters" => n_iters = Some(parse_u64(key, value)?),
            "seed" => seed = Some(parse_u64(key, value)?),
            "replicates" => replicates = Some(parse_u64(key, value)?),
            "snapshot_every" => snapshot_every = Some(parse_u64(key, value)?),
            "out_dir" => out_dir = Some(value.to_string()),
            "problem.polytope.corners" => corners = Some(parse_corners(key, value)?),
            "problem.asian.initial_price" => asian.initial_price = parse_f64(key, value)?,
            "problem.asian.strike" => asian.strike = parse_f64(key, value)?,
            "problem.asian.rate" => asian.rate = parse_f64(key, value)?,
            "problem.asian.sigma" => asian.volatility = parse_f64(key, value)?,
            "problem.asian.maturity" => asian.maturity = parse_f64(key, value)?,
            "problem.asian.steps" => asian.steps = parse_u64(key, value)? as usize,
            "problem.constant.dim" => {
                constant_dim = parse_u64(key, value)? as usize;
                if constant_dim == 0 {
                    return key_err(key, "must be >= 1");
                }
            }
            "set.box_lo" => box_lo = Some(parse_f64_list(key, value)?),
            "set.box_hi" => box_hi = Some(parse_f64_list(key, value)?),
            "set.spectral_lo" => spectral_lo = Some(parse_f64(key, value)?),
            "set.spectral_hi" => spectral_hi = Some(parse_f64(key, value)?),
            "oracle.thetas" => {
                oracle_thetas = value
                    .split(';')
                    .map(|chunk| parse_f64_list(key, chunk))
                    .collect::<Result<_, _>>()?
            }
            "replicate.seeds" => {
                replicate_seeds = Some(
                    value
                        .split(',')
                        .map(|v| {
                            v.trim()
                                .parse::<u64>()
                                .map_err(|e| ConfigError(format!("key `{key}`: {e}")))
                        })
                        .collect::<Result<_, _>>()?,
                )
            }
            _ => return Err(ConfigError(format!("unknown key `{key}`"))),
        }
    }

    let problem_name =
        problem_name.ok_or_else(|| ConfigError("key `problem` is required".to_string()))?;
    let problem = match problem_name.as_str() {
        "polytope" => ProblemKind::Polytope {
            corners: corners.unwrap_or_else(|| DEFAULT_CORNERS.to_vec()),
        },
        "asian" => ProblemKind::Asian(asian),
        "constant" => ProblemKind::Constant { dim: constant_dim },
        other => return key_err("problem", format!("unknown problem `{other}`")),
    };

    let family = match family.as_deref() {
        None => match problem {
            ProblemKind::Polytope { .. } => FamilyKind::NaturalGaussian,
            _ => FamilyKind::MeanShift,
        },
        Some("mean_shift") => FamilyKind::MeanShift,
        Some("natural_gaussian") => FamilyKind::NaturalGaussian,
        Some(other) => return key_err("family", format!("unknown family `{other}`")),
    };

    let step_scale = step_scale.unwrap_or(match problem {
        ProblemKind::Polytope { .. } => 0.5,
        ProblemKind::Asian(_) => 0.01,
        ProblemKind::Constant { .. } => 0.5,
    });
    if !step_scale.is_finite() || step_scale < 0.0 {
        return key_err("c", "must be finite and >= 0");
    }

    let n_iters = n_iters.unwrap_or(1_000_000);
    if n_iters == 0 {
        return key_err("n_iters", "must be >= 1");
    }
    let replicates = replicates.unwrap_or(2);
    if let Some(0) = snapshot_every {
        return key_err("snapshot_every", "must be >= 1");
    }

    Ok(ExperimentConfig {
        problem,
        family,
        step_scale,
        theta1: theta1.unwrap_or(Theta1Spec::Default),
        n_iters,
        seed: seed.unwrap_or(1),
        replicates,
        snapshot_every,
        out_dir: out_dir.unwrap_or_else(|| ".".to_string()),
        box_lo,
        box_hi,
        spectral_lo,
        spectral_hi,
        oracle_thetas,
        replicate_seeds,
    })
}

impl ExperimentConfig {
    pub fn assemble(&self) -> Result<Assembled, ConfigError> {
        let (problem, recommended): (Box<dyn Problem<f64>>, FamilyKind) = match &self.problem {
            ProblemKind::Polytope { corners } => {
                let polygon = Polygon::new(corners.clone())
                    .map_err(|e| ConfigError(format!("key `problem.polytope.corners`: {e}")))?;
                let p = PolytopeProblem::new(polygon)
                    .map_err(|e| ConfigError(format!("key `problem.polytope.corners`: {e}")))?;
                (Box::new(p), FamilyKind::NaturalGaussian)
            }
            ProblemKind::Asian(params) => {
                let p = AsianOption::new(*params)
                    .map_err(|e| ConfigError(format!("key `problem.asian`: {e}")))?;
                (Box::new(p), FamilyKind::MeanShift)
            }
            ProblemKind::Constant { dim } => {
                (Box::new(ConstantIntegrand::new(*dim)), FamilyKind::MeanShift)
            }
        };
        let k = problem.sample_dim();

        let family: Box<dyn ExponentialFamily<f64>> = match self.family {
            FamilyKind::MeanShift => Box::new(MeanShiftGaussian::new(k)),
            FamilyKind::NaturalGaussian => Box::new(NaturalGaussian::new(k)),
        };

        let set = self.build_set(k, recommended)?;
        let theta1 = self.build_theta1(&*family)?;
        family
            .validate(&theta1)
            .map_err(|e| ConfigError(format!("key `theta1`: {e}")))?;
        match set.contains(&theta1) {
            Ok(true) => {}
            Ok(false) => {
                return key_err("theta1", "lies outside the feasible set");
            }
            Err(e) => return key_err("theta1", e),
        }

        let run = AdamcConfig {
            step_scale: self.step_scale,
            theta1,
            n_iters: self.n_iters,
            seed: self.seed,
            snapshot_every: self
                .snapshot_every
                .unwrap_or_else(|| (self.n_iters / 100).max(1)),
        };
        Ok(Assembled {
            problem,
            family,
            set,
            run,
            family_kind: self.family,
        })
    }

    fn build_set(&self, k: usize, recommended: FamilyKind) -> Result<FeasibleSet<f64>, ConfigError> {
        let has_override = self.box_lo.is_some() || self.box_hi.is_some();
        let default_box: (Vec<f64>, Vec<f64>) = match &self.problem {
            ProblemKind::Polytope { .. } => (vec![0.0; k], vec![25.0; k]),
            ProblemKind::Asian(_) => (vec![-0.5; k], vec![0.5; k]),
            ProblemKind::Constant { .. } => (vec![-1.0; k], vec![1.0; k]),
        };
        if self.family != recommended && !has_override {
            return key_err(
                "set.box_lo",
                "explicit set bounds are required when overriding the default family",
            );
        }
        let expand = |v: &[f64]| -> Vec<f64> {
            if v.len() == 1 {
                vec![v[0]; k]
            } else {
                v.to_vec()
            }
        };
        let lo = self.box_lo.as_deref().map(expand).unwrap_or(default_box.0);
        let hi = self.box_hi.as_deref().map(expand).unwrap_or(default_box.1);
        if lo.len() != k || hi.len() != k {
            return key_err(
                "set.box_lo",
                format!("expected {k} bounds, got {} and {}", lo.len(), hi.len()),
            );
        }

        let mut blocks = vec![SetBlock::Box { lo, hi }];
        if self.family == FamilyKind::NaturalGaussian {
            blocks.push(SetBlock::SpectralBox {
                lo: self.spectral_lo.unwrap_or(1.0),
                hi: self.spectral_hi.unwrap_or(50.0),
                side: k,
            });
        } else if self.spectral_lo.is_some() || self.spectral_hi.is_some() {
            return key_err(
                "set.spectral_lo",
                "spectral bounds only apply to the natural_gaussian family",
            );
        }
        FeasibleSet::new(blocks).map_err(|e| ConfigError(format!("key `set`: {e}")))
    }

    fn build_theta1(
        &self,
        family: &dyn ExponentialFamily<f64>,
    ) -> Result<NaturalParameter<f64>, ConfigError> {
        let shape = family.param_shape();
        match &self.theta1 {
            Theta1Spec::Zeros => NaturalParameter::from_flat(&shape, &vec![0.0; shape.dim()])
                .map_err(|e| ConfigError(format!("key `theta1`: {e}"))),
            Theta1Spec::Explicit(values) => NaturalParameter::from_flat(&shape, values)
                .map_err(|e| ConfigError(format!("key `theta1`: {e}"))),
            Theta1Spec::Default => match (&self.problem, self.family) {
                (ProblemKind::Polytope { .. }, FamilyKind::NaturalGaussian) => {
                    Ok(PolytopeProblem::<f64>::default().default_initial_parameter())
                }
                _ => NaturalParameter::from_flat(&shape, &vec![0.0; shape.dim()])
                    .map_err(|e| ConfigError(format!("key `theta1`: {e}"))),
            },
        }
    }

    /// Canonical flat-text form with every effective value explicit; parsing
    /// it back reproduces the run bit for bit.
    pub fn echo(&self, assembled: &Assembled) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        match &self.problem {
            ProblemKind::Polytope { corners } => {
                push("problem", "polytope".to_string());
                push(
                    "problem.polytope.corners",
                    corners
                        .iter()
                        .map(|c| format!("{},{}", c[0], c[1]))
                        .collect::<Vec<_>>()
                        .join("; "),
                );
            }
            ProblemKind::Asian(p) => {
                push("problem", "asian".to_string());
                push("problem.asian.initial_price", format!("{}", p.initial_price));
                push("problem.asian.strike", format!("{}", p.strike));
                push("problem.asian.rate", format!("{}", p.rate));
                push("problem.asian.sigma", format!("{}", p.volatility));
                push("problem.asian.maturity", format!("{}", p.maturity));
                push("problem.asian.steps", format!("{}", p.steps));
            }
            ProblemKind::Constant { dim } => {
                push("problem", "constant".to_string());
                push("problem.constant.dim", format!("{dim}"));
            }
        }
        push(
            "family",
            match self.family {
                FamilyKind::MeanShift => "mean_shift".to_string(),
                FamilyKind::NaturalGaussian => "natural_gaussian".to_string(),
            },
        );
        push("c", format!("{}", self.step_scale));
        push("theta1", join_f64(&assembled.run.theta1.flatten()));
        push("n_iters", format!("{}", assembled.run.n_iters));
        push("seed", format!("{}", assembled.run.seed));
        push("snapshot_every", format!("{}", assembled.run.snapshot_every));
        push("replicates", format!("{}", self.replicates));
        for block in assembled.set.blocks() {
            match block {
                SetBlock::Box { lo, hi } => {
                    push("set.box_lo", join_f64(lo));
                    push("set.box_hi", join_f64(hi));
                }
                SetBlock::SpectralBox { lo, hi, .. } => {
                    push("set.spectral_lo", format!("{lo}"));
                    push("set.spectral_hi", format!("{hi}"));
                }
            }
        }
        if !self.oracle_thetas.is_empty() {
            push(
                "oracle.thetas",
                self.oracle_thetas
                    .iter()
                    .map(|t| join_f64(t))
                    .collect::<Vec<_>>()
                    .join(" ; "),
            );
        }
        if let Some(seeds) = &self.replicate_seeds {
            push(
                "replicate.seeds",
                seeds
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        out
    }
}

fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .map_err(|e| ConfigError(format!("key `{key}`: {e}")))
}

fn parse_u64(key: &str, value: &str) -> Result<u64, ConfigError> {
    value
        .parse::<u64>()
        .map_err(|e| ConfigError(format!("key `{key}`: {e}")))
}

fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|v| parse_f64(key, v.trim()))
        .collect()
}

fn parse_corners(key: &str, value: &str) -> Result<Vec<[f64; 2]>, ConfigError> {
    value
        .split(';')
        .map(|pair| {
            let coords = parse_f64_list(key, pair)?;
            if coords.len() != 2 {
                return key_err(key, "each corner needs exactly two coordinates");
            }
            Ok([coords[0], coords[1]])
        })
        .collect()
}
