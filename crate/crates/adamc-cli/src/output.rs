//! Report files: summary JSON, trajectory CSV, confidence-ellipse CSV for
//! two-dimensional Gaussian runs, replicate tables, and oracle JSON rows.
//! Floats are printed in shortest round-trip form, so identical runs produce
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use adamc::engine::RunReport;
use adamc::linalg;
use adamc::param::Block;
use serde::Serialize;

/// Write via a temporary file and rename, so readers never observe a
/// half-written file.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

#[derive(Serialize)]
struct Summary<'a> {
    estimate: f64,
    std_error: f64,
    n: u64,
    seed: u64,
    theta_final: &'a [f64],
    config_echo: &'a str,
}

pub fn summary_json(report: &RunReport<f64>, echo: &str) -> String {
    let theta = report.theta_final.flatten();
    let summary = Summary {
        estimate: report.estimate,
        std_error: report.std_error,
        n: report.n,
        seed: report.seed,
        theta_final: &theta,
        config_echo: echo,
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    text
}

/// `iter,estimate,std_error,theta_0..theta_{p-1}`, one row per snapshot.
pub fn trajectory_csv(report: &RunReport<f64>) -> String {
    let p = report.theta_final.dim();
    let mut out = String::from("iter,estimate,std_error");
    for i in 0..p {
        write!(out, ",theta_{i}").unwrap();
    }
    out.push('\n');
    for snap in &report.trajectory {
        write!(out, "{},{},{}", snap.iteration, snap.estimate, snap.std_error).unwrap();
        for v in &snap.theta {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Confidence levels emitted for the sampling-distribution ellipses, with
/// the matching chi-square(2) quantiles.
const ELLIPSE_LEVELS: [(f64, f64); 3] = [
    (0.68, 2.2788685663767296),  // -2 ln(1 - 0.68)
    (0.95, 5.991464547107982),   // -2 ln(1 - 0.95)
    (0.997, 11.618285980628055), // -2 ln(1 - 0.997)
];

/// Per-snapshot confidence ellipses of the sampling Gaussian, for runs with
/// a two-dimensional natural `(m, S)` parameter: center `S⁻¹m` and the two
/// semi-axis vectors of `{x | (x−μ)ᵀ S (x−μ) ≤ q}` at each level.
///
/// Returns `None` when the parameter is not of that shape.
pub fn ellipses_csv(report: &RunReport<f64>) -> Option<String> {
    let mut out =
        String::from("iter,level,center_x,center_y,axis1_x,axis1_y,axis2_x,axis2_y\n");
    for snap in &report.trajectory {
        let theta = adamc::param::NaturalParameter::from_flat(
            &report.theta_final.shape(),
            &snap.theta,
        )
        .ok()?;
        let (m, s) = match theta.blocks() {
            [Block::Vector(m), Block::SymMatrix { side: 2, data }] if m.len() == 2 => {
                (m.clone(), data.clone())
            }
            _ => return None,
        };
        let l = linalg::cholesky(&s, 2).ok()?;
        let center = linalg::cholesky_solve(&l, 2, &m);
        // Covariance is S⁻¹; its eigenvectors are those of S with inverted
        // eigenvalues.
        let (evals, evecs) = linalg::sym_eigen(&s, 2).ok()?;
        for (level, q) in ELLIPSE_LEVELS {
            let mut axes = [[0.0f64; 2]; 2];
            for (j, axis) in axes.iter_mut().enumerate() {
                let scale = (q / evals[j]).sqrt();
                *axis = [scale * evecs[j], scale * evecs[2 + j]];
            }
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                snap.iteration,
                level,
                center[0],
                center[1],
                axes[0][0],
                axes[0][1],
                axes[1][0],
                axes[1][1]
            )
            .unwrap();
        }
    }
    Some(out)
}

/// `replicate,estimate,std_error`, one row per replicate.
pub fn replicates_csv(reports: &[RunReport<f64>]) -> String {
    let mut out = String::from("replicate,estimate,std_error\n");
    for (i, r) in reports.iter().enumerate() {
        writeln!(out, "{},{},{}", i, r.estimate, r.std_error).unwrap();
    }
    out
}

#[derive(Serialize)]
struct Aggregate {
    mean: f64,
    sample_variance: f64,
    n: u64,
    replicates: usize,
}

pub fn aggregate_json(reports: &[RunReport<f64>]) -> String {
    let estimates: Vec<f64> = reports.iter().map(|r| r.estimate).collect();
    let count = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / count;
    let sample_variance = if estimates.len() > 1 {
        estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (count - 1.0)
    } else {
        0.0
    };
    let mut text = serde_json::to_string_pretty(&Aggregate {
        mean,
        sample_variance,
        n: reports.first().map(|r| r.n).unwrap_or(0),
        replicates: reports.len(),
    })
    .expect("aggregate serializes");
    text.push('\n');
    text
}

#[derive(Serialize)]
pub struct OracleRow<'a> {
    pub theta: &'a [f64],
    pub v: f64,
    /// `K(θ)`; null when it exceeds the floating-point range (see `log_k`).
    pub k: Option<f64>,
    pub log_k: f64,
    pub grad: &'a [f64],
}

#[derive(Serialize)]
pub struct OracleStarRow<'a> {
    pub theta_star: &'a [f64],
    pub v_star: f64,
    pub converged: bool,
}
