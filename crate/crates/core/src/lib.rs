//! Complexes of Hilbert C*-modules over finite-dimensional C*-algebras.
//!
//! Everything here is restricted to C*-algebras of the form
//! `M_{n_1}(C) ⊕ … ⊕ M_{n_m}(C)`. In this setting every densely defined
//! operator is everywhere-defined and adjointable, every range is closed,
//! and every module is finite-rank, so the operator-theoretic statements
//! about bounded transforms, Hodge decompositions, parametrices, and
//! K0-valued Fredholm indices become exactly checkable finite linear
//! algebra. The modules below follow that pipeline:
//!
//! - [`algebra`]: block descriptors, algebra elements, K0 classes.
//! - [`module`]: finite-rank Hilbert modules with optional Gram metrics.
//! - [`operator`]: adjointable operators, functional calculus, bounded
//!   transform, kernel/range projections, polar decomposition.
//! - [`complex`]: (quasi)complexes, derived complexes, Dirac and Laplace
//!   operators.
//! - [`hodge`]: harmonic splittings and cohomology.
//! - [`fredholm`]: parametrices, chain maps, index computations.
//! - [`perturbation`]: gap/Riesz metrics and index-stability sweeps.
//! - [`products`]: direct sums and tensor products of complexes.
//! - [`doc`]: the on-disk document format.
//! - [`generate`]: seeded construction of operators and complexes.

pub mod algebra;
pub mod complex;
pub mod doc;
pub mod error;
pub mod fredholm;
pub mod generate;
pub mod hodge;
mod linalg;
pub mod module;
pub mod operator;
pub mod perturbation;
pub mod products;

pub use algebra::{AlgebraDescriptor, AlgebraElement, K0Class};
pub use complex::{Complex, ComplexKind, DiracPair};
pub use error::{Error, Result};
pub use module::{HilbertModule, ModuleElement};
pub use operator::{BoundedTransformPair, Operator};

/// Default relative cutoff for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Default relative tolerance for the complex property `t_{k+1} t_k = 0`.
pub const DEFAULT_COMPLEX_TOL: f64 = 1e-10;
/// Relative positive-definiteness tolerance for Gram metrics.
pub const GRAM_PD_TOL: f64 = 1e-12;

#[cfg(test)]
mod concurrency {
    // every value is immutable after construction and freely shareable
    fn assert_send_sync<T: Send + Sync>() {}

    #[test]
    fn core_types_are_send_and_sync() {
        assert_send_sync::<crate::AlgebraDescriptor>();
        assert_send_sync::<crate::AlgebraElement>();
        assert_send_sync::<crate::K0Class>();
        assert_send_sync::<crate::HilbertModule>();
        assert_send_sync::<crate::ModuleElement>();
        assert_send_sync::<crate::Operator>();
        assert_send_sync::<crate::Complex>();
        assert_send_sync::<crate::fredholm::Parametrix>();
        assert_send_sync::<crate::fredholm::ChainMap>();
        assert_send_sync::<crate::doc::ComplexDocument>();
    }
}
