//! Finite-dimensional C*-algebras as direct sums of matrix blocks,
//! their elements, and K0 arithmetic.
//!
//! An algebra `M_{n_1}(C) ⊕ … ⊕ M_{n_m}(C)` is described by its ordered
//! list of block sizes. Its K0 group is Z^m, with the class of a module
//! given by the vector of fiber multiplicities.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use serde::{Deserialize, Serialize};

/// A finite-dimensional C*-algebra, `M_{n_1}(C) ⊕ … ⊕ M_{n_m}(C)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlgebraDescriptor {
    block_sizes: Vec<usize>,
}

impl AlgebraDescriptor {
    /// Builds the algebra with the given matrix-block sizes.
    pub fn new(block_sizes: Vec<usize>) -> Result<Self> {
        if block_sizes.is_empty() {
            return Err(Error::InvalidAlgebra("block list must be nonempty".into()));
        }
        if block_sizes.contains(&0) {
            return Err(Error::InvalidAlgebra("block sizes must be >= 1".into()));
        }
        Ok(Self { block_sizes })
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    /// Number of simple summands.
    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn block_size(&self, i: usize) -> usize {
        self.block_sizes[i]
    }

    /// The scalars, `A = C`.
    pub fn scalars() -> Self {
        Self {
            block_sizes: vec![1],
        }
    }
}

/// An element of a finite-dimensional C*-algebra, one square matrix per
/// block. The C*-norm is the maximum of the blocks' spectral norms.
#[derive(Debug, Clone)]
pub struct AlgebraElement {
    pub algebra: AlgebraDescriptor,
    pub blocks: Vec<CMat>,
}

impl AlgebraElement {
    pub fn new(algebra: AlgebraDescriptor, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != algebra.num_blocks() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} blocks, got {}",
                algebra.num_blocks(),
                blocks.len()
            )));
        }
        for (i, b) in blocks.iter().enumerate() {
            let n = algebra.block_size(i);
            if b.shape() != (n, n) {
                return Err(Error::ShapeMismatch(format!(
                    "block {i} has shape {:?}, expected ({n}, {n})",
                    b.shape()
                )));
            }
        }
        Ok(Self { algebra, blocks })
    }

    pub fn zero(algebra: &AlgebraDescriptor) -> Self {
        let blocks = algebra
            .block_sizes()
            .iter()
            .map(|&n| linalg::zeros(n, n))
            .collect();
        Self {
            algebra: algebra.clone(),
            blocks,
        }
    }

    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(linalg::spectral_norm)
            .fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.algebra != other.algebra {
            return Err(Error::AlgebraMismatch(
                "product of elements of different algebras".into(),
            ));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Self {
            algebra: self.algebra.clone(),
            blocks,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.algebra != other.algebra {
            return Err(Error::AlgebraMismatch(
                "sum of elements of different algebras".into(),
            ));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            algebra: self.algebra.clone(),
            blocks,
        })
    }
}

/// An element of K0 = Z^m as a canonical formal difference of two
/// entrywise-nonnegative vectors: `min(plus_i, minus_i) = 0` for all i.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct K0Class {
    plus: Vec<u64>,
    minus: Vec<u64>,
}

impl K0Class {
    /// Canonicalizes an arbitrary formal difference.
    pub fn from_difference(plus: &[i64], minus: &[i64]) -> Result<Self> {
        if plus.len() != minus.len() {
            return Err(Error::ShapeMismatch(format!(
                "K0 vectors of lengths {} and {}",
                plus.len(),
                minus.len()
            )));
        }
        let mut p = Vec::with_capacity(plus.len());
        let mut m = Vec::with_capacity(plus.len());
        for (&a, &b) in plus.iter().zip(minus) {
            let d = a - b;
            p.push(d.max(0) as u64);
            m.push((-d).max(0) as u64);
        }
        Ok(Self { plus: p, minus: m })
    }

    /// The class of a module with the given fiber multiplicities.
    pub fn from_dims(dims: &[usize]) -> Self {
        Self {
            plus: dims.iter().map(|&d| d as u64).collect(),
            minus: vec![0; dims.len()],
        }
    }

    pub fn zero(len: usize) -> Self {
        Self {
            plus: vec![0; len],
            minus: vec![0; len],
        }
    }

    pub fn plus(&self) -> &[u64] {
        &self.plus
    }

    pub fn minus(&self) -> &[u64] {
        &self.minus
    }

    pub fn len(&self) -> usize {
        self.plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.plus.iter().all(|&x| x == 0) && self.minus.iter().all(|&x| x == 0)
    }

    fn signed(&self) -> Vec<i64> {
        self.plus
            .iter()
            .zip(&self.minus)
            .map(|(&p, &m)| p as i64 - m as i64)
            .collect()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let (a, b) = (self.signed(), other.signed());
        if a.len() != b.len() {
            return Err(Error::ShapeMismatch(
                "K0 classes over different algebras".into(),
            ));
        }
        let sum: Vec<i64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        Self::from_difference(&sum, &vec![0; sum.len()])
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self {
            plus: self.minus.clone(),
            minus: self.plus.clone(),
        }
    }
}

impl std::fmt::Display for K0Class {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(+{:?}, -{:?})", self.plus, self.minus)
    }
}
