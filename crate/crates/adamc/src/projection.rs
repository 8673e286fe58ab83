//! Euclidean projection onto the convex compact feasible sets used by the
//! projected SGD update: products of coordinate boxes (for vector blocks)
//! and spectral boxes `{ a·I ⪯ S ⪯ b·I }` (for symmetric matrix blocks).
//!
//! Spectral projection clamps eigenvalues, which is the exact Frobenius
//! projection onto a spectral interval. A matrix whose spectrum is already
//! inside the interval (within a few ulps, to absorb eigensolver rounding)
//! is returned unchanged, which makes `project ∘ project = project` hold
//! bit-for-bit.

use crate::error::{Error, Result};
use crate::linalg;
use crate::param::{Block, NaturalParameter};
use crate::real::Real;

/// One factor of a product feasible set.
#[derive(Debug, Clone, PartialEq)]
pub enum SetBlock<R> {
    /// Coordinate box `[lo, hi]` for a vector block.
    Box { lo: Vec<R>, hi: Vec<R> },
    /// Spectral box `{ S symmetric | lo·I ⪯ S ⪯ hi·I }` for a matrix block.
    SpectralBox { lo: R, hi: R, side: usize },
}

/// A convex compact product set matching a parameter's block structure.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet<R> {
    blocks: Vec<SetBlock<R>>,
}

impl<R: Real> FeasibleSet<R> {
    pub fn new(blocks: Vec<SetBlock<R>>) -> Result<Self> {
        for block in &blocks {
            match block {
                SetBlock::Box { lo, hi } => {
                    if lo.len() != hi.len() {
                        return Err(Error::DimensionMismatch {
                            context: "FeasibleSet box bounds",
                            expected: lo.len(),
                            got: hi.len(),
                        });
                    }
                    if lo.iter().zip(hi.iter()).any(|(&l, &h)| !(l <= h)) {
                        return Err(Error::InvalidConfig(
                            "box bounds must satisfy lo <= hi elementwise".to_string(),
                        ));
                    }
                }
                SetBlock::SpectralBox { lo, hi, side } => {
                    if !(*lo > R::zero() && lo <= hi) {
                        return Err(Error::InvalidConfig(
                            "spectral bounds must satisfy 0 < lo <= hi".to_string(),
                        ));
                    }
                    if *side == 0 {
                        return Err(Error::InvalidConfig(
                            "spectral box needs a positive matrix side".to_string(),
                        ));
                    }
                }
            }
        }
        Ok(FeasibleSet { blocks })
    }

    /// A single coordinate box.
    pub fn from_box(lo: Vec<R>, hi: Vec<R>) -> Result<Self> {
        FeasibleSet::new(vec![SetBlock::Box { lo, hi }])
    }

    pub fn blocks(&self) -> &[SetBlock<R>] {
        &self.blocks
    }

    /// Euclidean projection of θ onto the set, blockwise.
    pub fn project(&self, theta: &NaturalParameter<R>) -> Result<NaturalParameter<R>> {
        let theta_blocks = theta.blocks();
        if theta_blocks.len() != self.blocks.len() {
            return Err(Error::StructureMismatch {
                context: "FeasibleSet::project",
            });
        }
        let mut out = Vec::with_capacity(theta_blocks.len());
        for (tb, sb) in theta_blocks.iter().zip(self.blocks.iter()) {
            match (tb, sb) {
                (Block::Vector(x), SetBlock::Box { lo, hi }) => {
                    out.push(Block::Vector(project_box(x, lo, hi)?));
                }
                (Block::SymMatrix { side, data }, SetBlock::SpectralBox { lo, hi, side: s }) => {
                    if side != s {
                        return Err(Error::StructureMismatch {
                            context: "FeasibleSet::project (matrix side)",
                        });
                    }
                    out.push(Block::SymMatrix {
                        side: *side,
                        data: project_spectral_box(data, *side, *lo, *hi)?,
                    });
                }
                _ => {
                    return Err(Error::StructureMismatch {
                        context: "FeasibleSet::project (block kind)",
                    });
                }
            }
        }
        NaturalParameter::from_blocks(out)
    }

    /// Membership test consistent with [`project`](Self::project): everything
    /// the projection outputs is a member.
    pub fn contains(&self, theta: &NaturalParameter<R>) -> Result<bool> {
        let theta_blocks = theta.blocks();
        if theta_blocks.len() != self.blocks.len() {
            return Err(Error::StructureMismatch {
                context: "FeasibleSet::contains",
            });
        }
        for (tb, sb) in theta_blocks.iter().zip(self.blocks.iter()) {
            match (tb, sb) {
                (Block::Vector(x), SetBlock::Box { lo, hi }) => {
                    if x.len() != lo.len() {
                        return Err(Error::DimensionMismatch {
                            context: "FeasibleSet::contains",
                            expected: lo.len(),
                            got: x.len(),
                        });
                    }
                    if x.iter()
                        .zip(lo.iter().zip(hi.iter()))
                        .any(|(&v, (&l, &h))| v < l || v > h)
                    {
                        return Ok(false);
                    }
                }
                (Block::SymMatrix { side, data }, SetBlock::SpectralBox { lo, hi, side: s }) => {
                    if side != s {
                        return Err(Error::StructureMismatch {
                            context: "FeasibleSet::contains (matrix side)",
                        });
                    }
                    let tol = spectral_slack(*side, *lo, *hi);
                    let (evals, _) = linalg::sym_eigen(data, *side)?;
                    if evals[0] < *lo - tol || evals[*side - 1] > *hi + tol {
                        return Ok(false);
                    }
                }
                _ => {
                    return Err(Error::StructureMismatch {
                        context: "FeasibleSet::contains (block kind)",
                    });
                }
            }
        }
        Ok(true)
    }

    /// `max ‖θ₁ − θ₂‖₂` over the product set, in the flattened Euclidean
    /// (Frobenius) norm: `sqrt(Σ ‖hi − lo‖² + Σ (hi − lo)²·side)`.
    pub fn diameter(&self) -> R {
        let mut acc = R::zero();
        for block in &self.blocks {
            match block {
                SetBlock::Box { lo, hi } => {
                    for (&l, &h) in lo.iter().zip(hi.iter()) {
                        acc = acc + (h - l) * (h - l);
                    }
                }
                SetBlock::SpectralBox { lo, hi, side } => {
                    let d = *hi - *lo;
                    acc = acc + d * d * R::cast(*side as f64);
                }
            }
        }
        acc.sqrt()
    }
}

/// Elementwise clamp of `x` to `[lo, hi]`.
pub fn project_box<R: Real>(x: &[R], lo: &[R], hi: &[R]) -> Result<Vec<R>> {
    if x.len() != lo.len() || lo.len() != hi.len() {
        return Err(Error::DimensionMismatch {
            context: "project_box",
            expected: lo.len(),
            got: x.len(),
        });
    }
    Ok(x.iter()
        .zip(lo.iter().zip(hi.iter()))
        .map(|(&v, (&l, &h))| if v < l { l } else if v > h { h } else { v })
        .collect())
}

/// Frobenius projection of a symmetric matrix onto `{ lo·I ⪯ S ⪯ hi·I }`:
/// eigendecompose, clamp the spectrum, reconstruct.
///
/// A matrix already inside the set (within eigensolver rounding) is returned
/// unchanged, so repeated projection is exactly idempotent.
pub fn project_spectral_box<R: Real>(s: &[R], side: usize, lo: R, hi: R) -> Result<Vec<R>> {
    if s.len() != side * side {
        return Err(Error::DimensionMismatch {
            context: "project_spectral_box",
            expected: side * side,
            got: s.len(),
        });
    }
    let (evals, evecs) = linalg::sym_eigen(s, side)?;
    let tol = spectral_slack(side, lo, hi);
    if evals[0] >= lo - tol && evals[side - 1] <= hi + tol {
        return Ok(s.to_vec());
    }
    let clamped: Vec<R> = evals
        .iter()
        .map(|&w| if w < lo { lo } else if w > hi { hi } else { w })
        .collect();
    Ok(linalg::from_eigen(&clamped, &evecs, side))
}

/// Tolerance absorbing the eigensolver's rounding when re-examining a matrix
/// that was just projected; a handful of ulps at the scale of the bounds.
fn spectral_slack<R: Real>(side: usize, lo: R, hi: R) -> R {
    let scale = R::one().max(lo.abs()).max(hi.abs());
    R::epsilon() * R::cast(8.0 * side as f64) * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quad_set() -> FeasibleSet<f64> {
        FeasibleSet::new(vec![
            SetBlock::Box {
                lo: vec![0.0, 0.0],
                hi: vec![25.0, 25.0],
            },
            SetBlock::SpectralBox {
                lo: 1.0,
                hi: 50.0,
                side: 2,
            },
        ])
        .unwrap()
    }

    fn random_theta(rng: &mut ChaCha8Rng, scale: f64) -> NaturalParameter<f64> {
        let m = vec![
            f64::standard_normal(rng) * scale,
            f64::standard_normal(rng) * scale,
        ];
        let a = f64::standard_normal(rng) * scale;
        let b = f64::standard_normal(rng) * scale;
        let c = f64::standard_normal(rng) * scale;
        NaturalParameter::vector_and_matrix(m, vec![a, b, b, c], 2).unwrap()
    }

    #[test]
    fn box_projection_clamps() {
        let out = project_box(&[26.0, -1.0], &[0.0, 0.0], &[25.0, 25.0]).unwrap();
        assert_eq!(out, vec![25.0, 0.0]);
        let fixed = project_box(&[10.0, 10.0], &[0.0, 0.0], &[25.0, 25.0]).unwrap();
        assert_eq!(fixed, vec![10.0, 10.0]);
        let low = project_box(&[-3.0], &[-0.5], &[0.5]).unwrap();
        assert_eq!(low, vec![-0.5]);
        assert!(project_box(&[1.0], &[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn spectral_projection_clamps_diagonal() {
        let out = project_spectral_box(&[0.5, 0.0, 0.0, 60.0], 2, 1.0, 50.0).unwrap();
        assert_eq!(out, vec![1.0, 0.0, 0.0, 50.0]);
    }

    #[test]
    fn spectral_projection_fixes_members_exactly() {
        let s = vec![10.0, 3.0, 3.0, 20.0]; // eigenvalues ~ (9.2, 20.8) ⊂ [1, 50]
        let out = project_spectral_box(&s, 2, 1.0, 50.0).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn spectral_projection_hand_example() {
        // Eigenpairs (59, (1,1)/√2) and (1, (1,−1)/√2); clamping 59 → 50
        // reconstructs [[25.5, 24.5], [24.5, 25.5]].
        let out = project_spectral_box(&[30.0, 29.0, 29.0, 30.0], 2, 1.0, 50.0).unwrap();
        let expect = [25.5f64, 24.5, 24.5, 25.5];
        for (a, b) in out.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn composite_projection_matches_blockwise() {
        let set = quad_set();
        let theta =
            NaturalParameter::vector_and_matrix(vec![30.0, -5.0], vec![0.5, 0.0, 0.0, 60.0], 2)
                .unwrap();
        let projected = set.project(&theta).unwrap();
        let expect =
            NaturalParameter::vector_and_matrix(vec![25.0, 0.0], vec![1.0, 0.0, 0.0, 50.0], 2)
                .unwrap();
        assert_eq!(projected, expect);
        assert!(set.contains(&projected).unwrap());

        let interior =
            NaturalParameter::vector_and_matrix(vec![10.0, 10.0], vec![10.0, 0.0, 0.0, 10.0], 2)
                .unwrap();
        assert_eq!(set.project(&interior).unwrap(), interior);
    }

    #[test]
    fn projection_is_idempotent_bitwise() {
        let set = quad_set();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let theta = random_theta(&mut rng, 40.0);
            let once = set.project(&theta).unwrap();
            let twice = set.project(&once).unwrap();
            assert_eq!(once, twice);
            assert!(set.contains(&once).unwrap());
        }
    }

    #[test]
    fn projection_is_nonexpansive() {
        let set = quad_set();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..1000 {
            let u = random_theta(&mut rng, 60.0);
            let v = random_theta(&mut rng, 60.0);
            let pu = set.project(&u).unwrap().flatten();
            let pv = set.project(&v).unwrap().flatten();
            let dist = |a: &[f64], b: &[f64]| {
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            };
            assert!(dist(&pu, &pv) <= dist(&u.flatten(), &v.flatten()) + 1e-12);
        }
    }

    #[test]
    fn projection_is_closest_point() {
        let set = quad_set();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let theta = random_theta(&mut rng, 60.0);
            let projected = set.project(&theta).unwrap().flatten();
            // A probe inside the set: box coordinates in range, spectrum in range.
            let m = vec![
                f64::unit_uniform(&mut rng) * 25.0,
                f64::unit_uniform(&mut rng) * 25.0,
            ];
            let d1 = 1.0 + f64::unit_uniform(&mut rng) * 49.0;
            let d2 = 1.0 + f64::unit_uniform(&mut rng) * 49.0;
            let angle = f64::unit_uniform(&mut rng) * std::f64::consts::PI;
            let (c, s) = (angle.cos(), angle.sin());
            let probe_s = vec![
                c * c * d1 + s * s * d2,
                c * s * (d1 - d2),
                c * s * (d1 - d2),
                s * s * d1 + c * c * d2,
            ];
            let probe = NaturalParameter::vector_and_matrix(m, probe_s, 2).unwrap();
            assert!(set.contains(&probe).unwrap());
            let flat = theta.flatten();
            let dist = |a: &[f64], b: &[f64]| {
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            };
            assert!(dist(&flat, &projected) <= dist(&flat, &probe.flatten()) + 1e-9);
        }
    }

    #[test]
    fn spectral_output_spectrum_is_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..500 {
            let theta = random_theta(&mut rng, 80.0);
            let projected = quad_set().project(&theta).unwrap();
            if let Block::SymMatrix { side, data } = &projected.blocks()[1] {
                for i in 0..*side {
                    for j in (i + 1)..*side {
                        assert_eq!(data[i * side + j], data[j * side + i]);
                    }
                }
                let (evals, _) = linalg::sym_eigen(data, *side).unwrap();
                assert!(evals[0] >= 1.0 - 1e-10);
                assert!(evals[*side - 1] <= 50.0 + 1e-10);
            } else {
                panic!("expected matrix block");
            }
        }
    }

    #[test]
    fn diameter_closed_forms() {
        let unit = FeasibleSet::from_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!((unit.diameter() - 2.0f64.sqrt()).abs() < 1e-15);

        let cube = FeasibleSet::from_box(vec![-0.5f64; 64], vec![0.5; 64]).unwrap();
        assert!((cube.diameter() - 8.0).abs() < 1e-12);

        let spectral = FeasibleSet::new(vec![SetBlock::SpectralBox {
            lo: 1.0,
            hi: 50.0,
            side: 2,
        }])
        .unwrap();
        assert!((spectral.diameter() - 49.0 * 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn invalid_bounds_are_rejected() {
        assert!(FeasibleSet::from_box(vec![1.0], vec![0.0]).is_err());
        assert!(FeasibleSet::<f64>::new(vec![SetBlock::SpectralBox {
            lo: 0.0,
            hi: 1.0,
            side: 2
        }])
        .is_err());
        assert!(FeasibleSet::<f64>::new(vec![SetBlock::SpectralBox {
            lo: 2.0,
            hi: 1.0,
            side: 2
        }])
        .is_err());
    }

    #[test]
    fn structure_mismatch_is_detected() {
        let set = quad_set();
        let wrong = NaturalParameter::vector(vec![1.0, 2.0]);
        assert!(set.project(&wrong).is_err());
    }
}
