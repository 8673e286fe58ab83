//! Natural parameters as ordered blocks of vectors and symmetric matrices,
//! with an exact round-tripping flattened representation.
//!
//! Matrix blocks are stored as full row-major matrices with both triangles
//! populated, so the flat inner product `θᵀT(x)` equals `Tr(S M)` for a
//! matrix-valued statistic `M` with no factor bookkeeping.

use crate::error::{Error, Result};
use crate::real::Real;

/// One block of a natural parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Block<R> {
    /// A plain vector block.
    Vector(Vec<R>),
    /// A symmetric matrix block, row-major, `side * side` entries.
    SymMatrix { side: usize, data: Vec<R> },
}

/// Shape descriptor for a parameter, independent of its values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockShape {
    Vector(usize),
    SymMatrix(usize),
}

impl BlockShape {
    pub fn flat_len(&self) -> usize {
        match *self {
            BlockShape::Vector(n) => n,
            BlockShape::SymMatrix(side) => side * side,
        }
    }
}

/// Ordered block shapes; fixed per exponential family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamShape(pub Vec<BlockShape>);

impl ParamShape {
    pub fn vector(n: usize) -> Self {
        ParamShape(vec![BlockShape::Vector(n)])
    }

    pub fn vector_and_matrix(n: usize, side: usize) -> Self {
        ParamShape(vec![BlockShape::Vector(n), BlockShape::SymMatrix(side)])
    }

    /// Total flattened dimension `p`.
    pub fn dim(&self) -> usize {
        self.0.iter().map(BlockShape::flat_len).sum()
    }

    /// Unit direction along flat coordinate `k`, mapped into the symmetric
    /// subspace (off-diagonal coordinates become `(E_ij + E_ji) / 2`).
    /// Directional derivatives along these directions match the flattened
    /// gradient convention coordinate by coordinate.
    pub fn unit_direction<R: Real>(&self, k: usize) -> NaturalParameter<R> {
        let mut flat = vec![R::zero(); self.dim()];
        flat[k] = R::one();
        NaturalParameter::from_flat(self, &flat).expect("shape and flat length agree")
    }
}

/// A point θ in the natural parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalParameter<R> {
    blocks: Vec<Block<R>>,
}

impl<R: Real> NaturalParameter<R> {
    /// Build from blocks. Matrix blocks are symmetrized as `(S + Sᵀ)/2` so
    /// the symmetry invariant holds bitwise afterwards.
    pub fn from_blocks(mut blocks: Vec<Block<R>>) -> Result<Self> {
        for block in &mut blocks {
            if let Block::SymMatrix { side, data } = block {
                let n = *side;
                if data.len() != n * n {
                    return Err(Error::DimensionMismatch {
                        context: "NaturalParameter matrix block",
                        expected: n * n,
                        got: data.len(),
                    });
                }
                symmetrize(data, n);
            }
        }
        Ok(NaturalParameter { blocks })
    }

    /// Single-vector-block parameter.
    pub fn vector(values: Vec<R>) -> Self {
        NaturalParameter {
            blocks: vec![Block::Vector(values)],
        }
    }

    /// `(m, S)` parameter with a vector block and a symmetric matrix block.
    pub fn vector_and_matrix(m: Vec<R>, s: Vec<R>, side: usize) -> Result<Self> {
        Self::from_blocks(vec![
            Block::Vector(m),
            Block::SymMatrix { side, data: s },
        ])
    }

    pub fn blocks(&self) -> &[Block<R>] {
        &self.blocks
    }

    pub fn shape(&self) -> ParamShape {
        ParamShape(
            self.blocks
                .iter()
                .map(|b| match b {
                    Block::Vector(v) => BlockShape::Vector(v.len()),
                    Block::SymMatrix { side, .. } => BlockShape::SymMatrix(*side),
                })
                .collect(),
        )
    }

    /// Total flattened dimension `p`.
    pub fn dim(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Vector(v) => v.len(),
                Block::SymMatrix { side, .. } => side * side,
            })
            .sum()
    }

    /// Flatten into `ℝ^p`: vector entries, then row-major matrix entries,
    /// block by block.
    pub fn flatten(&self) -> Vec<R> {
        let mut out = Vec::with_capacity(self.dim());
        for block in &self.blocks {
            match block {
                Block::Vector(v) => out.extend_from_slice(v),
                Block::SymMatrix { data, .. } => out.extend_from_slice(data),
            }
        }
        out
    }

    /// Rebuild from a flat vector. Inverse of [`flatten`](Self::flatten):
    /// the symmetrizing average leaves already-symmetric data bit-identical.
    pub fn from_flat(shape: &ParamShape, flat: &[R]) -> Result<Self> {
        if flat.len() != shape.dim() {
            return Err(Error::DimensionMismatch {
                context: "NaturalParameter::from_flat",
                expected: shape.dim(),
                got: flat.len(),
            });
        }
        let mut blocks = Vec::with_capacity(shape.0.len());
        let mut offset = 0;
        for bs in &shape.0 {
            let len = bs.flat_len();
            let chunk = &flat[offset..offset + len];
            offset += len;
            match *bs {
                BlockShape::Vector(_) => blocks.push(Block::Vector(chunk.to_vec())),
                BlockShape::SymMatrix(side) => {
                    let mut data = chunk.to_vec();
                    symmetrize(&mut data, side);
                    blocks.push(Block::SymMatrix { side, data });
                }
            }
        }
        Ok(NaturalParameter { blocks })
    }

    /// `self + scale * direction`, staying in the symmetric subspace.
    pub fn add_scaled(&self, direction: &NaturalParameter<R>, scale: R) -> Result<Self> {
        let shape = self.shape();
        if shape != direction.shape() {
            return Err(Error::StructureMismatch {
                context: "NaturalParameter::add_scaled",
            });
        }
        let mut flat = self.flatten();
        for (dst, src) in flat.iter_mut().zip(direction.flatten()) {
            *dst = *dst + scale * src;
        }
        Self::from_flat(&shape, &flat)
    }

    /// True when every coordinate is finite.
    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| match b {
            Block::Vector(v) => v.iter().all(|x| x.is_finite()),
            Block::SymMatrix { data, .. } => data.iter().all(|x| x.is_finite()),
        })
    }
}

fn symmetrize<R: Real>(data: &mut [R], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (data[i * n + j] + data[j * n + i]) / R::cast(2.0);
            data[i * n + j] = avg;
            data[j * n + i] = avg;
        }
    }
}
