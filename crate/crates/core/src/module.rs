//! Finite-rank Hilbert C*-modules as block tuples of rectangular matrix
//! spaces, inner products, sums, and orthonormal dimension.
//!
//! Over `A = ⊕ M_{n_i}(C)`, a module with fiber multiplicities `d_i` is
//! the space of tuples of `d_i × n_i` matrices. The `A`-valued inner
//! product is `⟨x, y⟩_i = x_i^* G_i y_i` where the optional Gram metrics
//! `G_i` deform the standard inner product; they realize graph
//! inner-products of operators.

use crate::algebra::{AlgebraDescriptor, AlgebraElement};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::operator::Operator;
use crate::GRAM_PD_TOL;
use num_complex::Complex64;

/// A finite-rank Hilbert module over a finite-dimensional C*-algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct HilbertModule {
    algebra: AlgebraDescriptor,
    dims: Vec<usize>,
    /// `None` means the standard inner product (identity Grams).
    grams: Option<Vec<CMat>>,
}

impl HilbertModule {
    /// A module with the standard inner product.
    pub fn standard(algebra: AlgebraDescriptor, dims: Vec<usize>) -> Result<Self> {
        if dims.len() != algebra.num_blocks() {
            return Err(Error::InvalidModule(format!(
                "dims has length {}, algebra has {} blocks",
                dims.len(),
                algebra.num_blocks()
            )));
        }
        Ok(Self {
            algebra,
            dims,
            grams: None,
        })
    }

    /// A module with explicit Gram metrics, checked Hermitian positive
    /// definite at relative tolerance `GRAM_PD_TOL`.
    pub fn with_grams(
        algebra: AlgebraDescriptor,
        dims: Vec<usize>,
        grams: Vec<CMat>,
    ) -> Result<Self> {
        if dims.len() != algebra.num_blocks() {
            return Err(Error::InvalidModule(format!(
                "dims has length {}, algebra has {} blocks",
                dims.len(),
                algebra.num_blocks()
            )));
        }
        if grams.len() != dims.len() {
            return Err(Error::InvalidModule(
                "one Gram matrix per block required".into(),
            ));
        }
        for (i, g) in grams.iter().enumerate() {
            let d = dims[i];
            if g.shape() != (d, d) {
                return Err(Error::ShapeMismatch(format!(
                    "Gram {i} has shape {:?}, expected ({d}, {d})",
                    g.shape()
                )));
            }
            let herm_res = linalg::spectral_norm(&(g - g.adjoint()));
            let scale = linalg::spectral_norm(g).max(1.0);
            if herm_res > 1e-12 * scale {
                return Err(Error::InvalidModule(format!(
                    "Gram {i} is not Hermitian (residual {herm_res:.3e})"
                )));
            }
            if d > 0 {
                let eig = linalg::herm_eigen(g);
                let min_eig = eig.values[0];
                let max_eig = eig.values[d - 1].max(0.0);
                if min_eig <= GRAM_PD_TOL * max_eig.max(1.0) {
                    return Err(Error::GramNotPositive { min_eig });
                }
            }
        }
        Ok(Self {
            algebra,
            dims,
            grams: Some(grams),
        })
    }

    pub fn zero(algebra: AlgebraDescriptor) -> Self {
        let m = algebra.num_blocks();
        Self {
            algebra,
            dims: vec![0; m],
            grams: None,
        }
    }

    pub fn algebra(&self) -> &AlgebraDescriptor {
        &self.algebra
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, block: usize) -> usize {
        self.dims[block]
    }

    pub fn num_blocks(&self) -> usize {
        self.dims.len()
    }

    pub fn has_default_grams(&self) -> bool {
        self.grams.is_none()
    }

    /// The Gram metric of a block (identity when default).
    pub fn gram(&self, block: usize) -> CMat {
        match &self.grams {
            Some(g) => g[block].clone(),
            None => linalg::identity(self.dims[block]),
        }
    }

    pub fn grams(&self) -> Option<&[CMat]> {
        self.grams.as_deref()
    }

    pub fn is_zero_module(&self) -> bool {
        self.dims.iter().all(|&d| d == 0)
    }

    /// `G^{1/2}` per block; identity fast path for default Grams.
    pub(crate) fn gram_sqrt(&self, block: usize) -> CMat {
        match &self.grams {
            None => linalg::identity(self.dims[block]),
            Some(g) => linalg::herm_sqrt(&g[block]),
        }
    }

    /// `G^{-1/2}` per block; identity fast path for default Grams.
    pub(crate) fn gram_inv_sqrt(&self, block: usize) -> CMat {
        match &self.grams {
            None => linalg::identity(self.dims[block]),
            Some(g) => linalg::herm_inv_sqrt(&g[block]),
        }
    }

    /// `G^{-1}` per block.
    pub(crate) fn gram_inv(&self, block: usize) -> CMat {
        match &self.grams {
            None => linalg::identity(self.dims[block]),
            Some(g) => linalg::herm_apply(&g[block], |x| 1.0 / x),
        }
    }

    /// Orthogonal sum. Explicit Grams combine block-diagonally; mixing a
    /// default-Gram module with an explicit-Gram one promotes the default
    /// side to identity Grams.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.algebra != other.algebra {
            return Err(Error::AlgebraMismatch(
                "direct sum over different algebras".into(),
            ));
        }
        let dims: Vec<usize> = self
            .dims
            .iter()
            .zip(&other.dims)
            .map(|(&a, &b)| a + b)
            .collect();
        if self.grams.is_none() && other.grams.is_none() {
            return Self::standard(self.algebra.clone(), dims);
        }
        let grams: Vec<CMat> = (0..self.num_blocks())
            .map(|i| {
                let (a, b) = (self.gram(i), other.gram(i));
                let (da, db) = (self.dims[i], other.dims[i]);
                let mut g = linalg::zeros(da + db, da + db);
                g.view_mut((0, 0), (da, da)).copy_from(&a);
                g.view_mut((da, da), (db, db)).copy_from(&b);
                g
            })
            .collect();
        Self::with_grams(self.algebra.clone(), dims, grams)
    }

    /// The K0 class of the module: its vector of fiber multiplicities.
    pub fn k0_class(&self) -> crate::algebra::K0Class {
        crate::algebra::K0Class::from_dims(&self.dims)
    }

    /// The orthonormal dimension of the module restricted to one block:
    /// the fiber multiplicity, which equals the Hilbert-space dimension
    /// of `E e_0` for a minimal projection `e_0` in that block.
    pub fn orthonormal_dimension(&self, block: usize) -> Result<usize> {
        if block >= self.num_blocks() {
            return Err(Error::IndexOutOfRange(format!(
                "block {block} of {}",
                self.num_blocks()
            )));
        }
        Ok(self.dims[block])
    }

    /// Same fibers as `self`, with Grams `G_i = 1 + M_i^* M_i` built from
    /// an operator `t` out of this module; realizes the graph
    /// inner-product `⟨x, y⟩ + ⟨t x, t y⟩`. The zero operator returns the
    /// module unchanged.
    pub fn graph_module(&self, t: &Operator) -> Result<Self> {
        if t.source() != self {
            return Err(Error::ShapeMismatch(
                "graph_module requires t with source E".into(),
            ));
        }
        if !self.has_default_grams() {
            return Err(Error::Unsupported(
                "graph_module is defined for modules with the standard inner product".into(),
            ));
        }
        if t.blocks()
            .iter()
            .all(|m| m.iter().all(|z| *z == Complex64::new(0.0, 0.0)))
        {
            return Ok(self.clone());
        }
        let grams: Vec<CMat> = (0..self.num_blocks())
            .map(|i| {
                let m = t.block(i);
                linalg::identity(self.dims[i]) + m.adjoint() * m
            })
            .collect();
        Self::with_grams(self.algebra.clone(), self.dims.clone(), grams)
    }

    pub fn zero_element(&self) -> ModuleElement {
        let blocks = (0..self.num_blocks())
            .map(|i| linalg::zeros(self.dims[i], self.algebra.block_size(i)))
            .collect();
        ModuleElement {
            module: self.clone(),
            blocks,
        }
    }
}

/// An element of a Hilbert module: one `d_i × n_i` matrix per block.
#[derive(Debug, Clone)]
pub struct ModuleElement {
    module: HilbertModule,
    blocks: Vec<CMat>,
}

impl ModuleElement {
    pub fn new(module: HilbertModule, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != module.num_blocks() {
            return Err(Error::ShapeMismatch("one block per algebra summand".into()));
        }
        for (i, b) in blocks.iter().enumerate() {
            let expected = (module.dim(i), module.algebra().block_size(i));
            if b.shape() != expected {
                return Err(Error::ShapeMismatch(format!(
                    "element block {i} has shape {:?}, expected {:?}",
                    b.shape(),
                    expected
                )));
            }
        }
        Ok(Self { module, blocks })
    }

    pub fn module(&self) -> &HilbertModule {
        &self.module
    }

    pub fn block(&self, i: usize) -> &CMat {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    /// The algebra-valued inner product `⟨x, y⟩_i = x_i^* G_i y_i`.
    pub fn inner_product(&self, other: &Self) -> Result<AlgebraElement> {
        if self.module != other.module {
            return Err(Error::ShapeMismatch(
                "inner product of elements of different modules".into(),
            ));
        }
        let blocks: Vec<CMat> = (0..self.module.num_blocks())
            .map(|i| {
                let g = self.module.gram(i);
                self.blocks[i].adjoint() * g * &other.blocks[i]
            })
            .collect();
        AlgebraElement::new(self.module.algebra().clone(), blocks)
    }

    /// `‖x‖ = ‖⟨x, x⟩‖^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.inner_product(self)
            .map(|ip| ip.norm().sqrt())
            .unwrap_or(0.0)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.module != other.module {
            return Err(Error::ShapeMismatch(
                "sum of elements of different modules".into(),
            ));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            module: self.module.clone(),
            blocks,
        })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            module: self.module.clone(),
            blocks: self.blocks.iter().map(|b| b * c).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalars() -> AlgebraDescriptor {
        AlgebraDescriptor::scalars()
    }

    #[test]
    fn inner_product_zero_and_orthogonal() {
        let e = HilbertModule::standard(scalars(), vec![2]).unwrap();
        let zero = e.zero_element();
        assert_eq!(zero.inner_product(&zero).unwrap().norm(), 0.0);

        let x = ModuleElement::new(
            e.clone(),
            vec![CMat::from_row_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)])],
        )
        .unwrap();
        let y = ModuleElement::new(
            e,
            vec![CMat::from_row_slice(2, 1, &[c(0.0, 0.0), c(1.0, 0.0)])],
        )
        .unwrap();
        assert!(x.inner_product(&y).unwrap().norm() < 1e-15);
    }

    #[test]
    fn inner_product_matrix_block_example() {
        // A = M_2, E = Mat(1, 2): x = [1 0], y = [1 1] gives [[1, 1], [0, 0]].
        let algebra = AlgebraDescriptor::new(vec![2]).unwrap();
        let e = HilbertModule::standard(algebra, vec![1]).unwrap();
        let x = ModuleElement::new(
            e.clone(),
            vec![CMat::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)])],
        )
        .unwrap();
        let y = ModuleElement::new(
            e,
            vec![CMat::from_row_slice(1, 2, &[c(1.0, 0.0), c(1.0, 0.0)])],
        )
        .unwrap();
        let ip = x.inner_product(&y).unwrap();
        let expected =
            CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(linalg::diff_norm(&ip.blocks[0], &expected) < 1e-15);
    }

    #[test]
    fn inner_product_is_hermitian_symmetric() {
        let algebra = AlgebraDescriptor::new(vec![1, 2]).unwrap();
        let e = generate::random_module(&algebra, &[2, 3], 7);
        let x = generate::random_element(&e, 1);
        let y = generate::random_element(&e, 2);
        let xy = x.inner_product(&y).unwrap();
        let yx = y.inner_product(&x).unwrap();
        for i in 0..2 {
            assert!(linalg::diff_norm(&xy.blocks[i], &yx.blocks[i].adjoint()) < 1e-12);
        }
    }

    #[test]
    fn direct_sum_dims_add() {
        let a = scalars();
        let e = HilbertModule::standard(a.clone(), vec![2]).unwrap();
        let f = HilbertModule::standard(a.clone(), vec![3]).unwrap();
        assert_eq!(e.direct_sum(&f).unwrap().dims(), &[5]);

        let zero = HilbertModule::standard(a, vec![0]).unwrap();
        let sum = e.direct_sum(&zero).unwrap();
        assert_eq!(sum.dims(), e.dims());
        assert!(sum.has_default_grams());

        let algebra = AlgebraDescriptor::new(vec![1, 2]).unwrap();
        let g = HilbertModule::standard(algebra.clone(), vec![1, 0]).unwrap();
        let h = HilbertModule::standard(algebra, vec![0, 2]).unwrap();
        assert_eq!(g.direct_sum(&h).unwrap().dims(), &[1, 2]);
    }

    #[test]
    fn k0_class_readout() {
        let e = HilbertModule::standard(scalars(), vec![2]).unwrap();
        assert_eq!(e.k0_class().plus(), &[2]);
        assert_eq!(e.k0_class().minus(), &[0]);

        let algebra = AlgebraDescriptor::new(vec![1, 2]).unwrap();
        let f = HilbertModule::standard(algebra, vec![1, 3]).unwrap();
        assert_eq!(f.k0_class().plus(), &[1, 3]);
        assert_eq!(f.k0_class().minus(), &[0, 0]);

        let zero = HilbertModule::standard(scalars(), vec![0]).unwrap();
        assert!(zero.k0_class().is_zero());
    }

    #[test]
    fn graph_module_of_zero_operator_is_plain() {
        let e = HilbertModule::standard(scalars(), vec![2]).unwrap();
        let zero = crate::operator::Operator::zero(
            e.clone(),
            HilbertModule::standard(scalars(), vec![1]).unwrap(),
        )
        .unwrap();
        let g = e.graph_module(&zero).unwrap();
        assert_eq!(g, e);
        assert!(g.has_default_grams());
    }

    #[test]
    fn orthonormal_dimension_readout() {
        let e = HilbertModule::standard(AlgebraDescriptor::new(vec![2]).unwrap(), vec![4]).unwrap();
        assert_eq!(e.orthonormal_dimension(0).unwrap(), 4);

        let f = HilbertModule::standard(AlgebraDescriptor::new(vec![1, 3]).unwrap(), vec![0, 5])
            .unwrap();
        assert_eq!(f.orthonormal_dimension(0).unwrap(), 0);
        assert_eq!(f.orthonormal_dimension(1).unwrap(), 5);
        assert!(f.orthonormal_dimension(2).is_err());
    }

    #[test]
    fn gram_validation_rejects_non_positive() {
        let a = scalars();
        let bad = CMat::from_row_slice(1, 1, &[c(-1.0, 0.0)]);
        assert!(HilbertModule::with_grams(a.clone(), vec![1], vec![bad]).is_err());
        let good = CMat::from_row_slice(1, 1, &[c(2.0, 0.0)]);
        assert!(HilbertModule::with_grams(a, vec![1], vec![good]).is_ok());
    }

    #[test]
    fn cauchy_schwarz_and_polarization_on_random_samples() {
        let algebra = AlgebraDescriptor::new(vec![2, 1]).unwrap();
        for seed in 0..10 {
            let e = generate::random_module(&algebra, &[3, 2], seed);
            let x = generate::random_element(&e, seed * 2 + 1);
            let y = generate::random_element(&e, seed * 2 + 2);
            let ip_norm = x.inner_product(&y).unwrap().norm();
            assert!(ip_norm <= x.norm() * y.norm() + 1e-10);

            // polarization: 4<y,x> = sum_{k=0..3} i^k <x + i^k y, x + i^k y>
            let mut rec = AlgebraElement::zero(&algebra);
            for k in 0..4u32 {
                let ik = Complex64::i().powu(k);
                let z = x.add(&y.scale(ik)).unwrap();
                let term = z.inner_product(&z).unwrap();
                let scaled = AlgebraElement::new(
                    algebra.clone(),
                    term.blocks.iter().map(|b| b * ik).collect(),
                )
                .unwrap();
                rec = rec.add(&scaled).unwrap();
            }
            let four_ip = y.inner_product(&x).unwrap();
            let resid: f64 = (0..2)
                .map(|i| {
                    linalg::diff_norm(&rec.blocks[i], &(four_ip.blocks[i].clone() * c(4.0, 0.0)))
                })
                .fold(0.0, f64::max);
            assert!(resid <= 1e-10 * (1.0 + 4.0 * four_ip.norm()));
        }
    }
}
