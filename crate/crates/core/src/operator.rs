//! Adjointable operators between modules, functional calculus, bounded
//! transform, polar decomposition, kernel/range projections.
//!
//! With explicit Gram metrics, the adjoint is `G_E^{-1} M^* G_F`, and all
//! spectral work happens in "whitened" coordinates `G^{1/2} M G^{-1/2}`
//! where the module inner products become standard. Spectral quantities
//! always come from Hermitian eigenproblems or SVDs of whitened blocks.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::module::{HilbertModule, ModuleElement};
use num_complex::Complex64;

/// An adjointable module map: one `e_i × d_i` complex matrix per block
/// (target fibers × source fibers).
#[derive(Debug, Clone)]
pub struct Operator {
    source: HilbertModule,
    target: HilbertModule,
    blocks: Vec<CMat>,
}

impl Operator {
    pub fn new(source: HilbertModule, target: HilbertModule, blocks: Vec<CMat>) -> Result<Self> {
        if source.algebra() != target.algebra() {
            return Err(Error::AlgebraMismatch(
                "operator between modules over different algebras".into(),
            ));
        }
        if blocks.len() != source.num_blocks() {
            return Err(Error::ShapeMismatch(
                "one matrix block per algebra summand".into(),
            ));
        }
        for (i, b) in blocks.iter().enumerate() {
            let expected = (target.dim(i), source.dim(i));
            if b.shape() != expected {
                return Err(Error::ShapeMismatch(format!(
                    "operator block {i} has shape {:?}, expected {:?}",
                    b.shape(),
                    expected
                )));
            }
        }
        Ok(Self {
            source,
            target,
            blocks,
        })
    }

    pub fn zero(source: HilbertModule, target: HilbertModule) -> Result<Self> {
        let blocks = (0..source.num_blocks())
            .map(|i| linalg::zeros(target.dim(i), source.dim(i)))
            .collect();
        Self::new(source, target, blocks)
    }

    pub fn identity(module: &HilbertModule) -> Self {
        let blocks = (0..module.num_blocks())
            .map(|i| linalg::identity(module.dim(i)))
            .collect();
        Self {
            source: module.clone(),
            target: module.clone(),
            blocks,
        }
    }

    pub fn source(&self) -> &HilbertModule {
        &self.source
    }

    pub fn target(&self) -> &HilbertModule {
        &self.target
    }

    pub fn block(&self, i: usize) -> &CMat {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_endomorphism(&self) -> bool {
        self.source == self.target
    }

    /// Applies the operator to a module element.
    pub fn apply(&self, x: &ModuleElement) -> Result<ModuleElement> {
        if x.module() != &self.source {
            return Err(Error::ShapeMismatch(
                "element not in the operator's source".into(),
            ));
        }
        let blocks = (0..self.num_blocks())
            .map(|i| &self.blocks[i] * x.block(i))
            .collect();
        ModuleElement::new(self.target.clone(), blocks)
    }

    /// Gram-aware adjoint `G_src^{-1} M^* G_tgt`.
    pub fn adjoint(&self) -> Self {
        let blocks = (0..self.num_blocks())
            .map(|i| {
                if self.source.has_default_grams() && self.target.has_default_grams() {
                    self.blocks[i].adjoint()
                } else {
                    self.source.gram_inv(i) * self.blocks[i].adjoint() * self.target.gram(i)
                }
            })
            .collect();
        Self {
            source: self.target.clone(),
            target: self.source.clone(),
            blocks,
        }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if other.target != self.source {
            return Err(Error::ShapeMismatch("composition chain mismatch".into()));
        }
        let blocks = (0..self.num_blocks())
            .map(|i| &self.blocks[i] * &other.blocks[i])
            .collect();
        Ok(Self {
            source: other.source.clone(),
            target: self.target.clone(),
            blocks,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.source != other.source || self.target != other.target {
            return Err(Error::ShapeMismatch(
                "sum of operators with different shapes".into(),
            ));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            source: self.source.clone(),
            target: self.target.clone(),
            blocks,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            source: self.source.clone(),
            target: self.target.clone(),
            blocks: self.blocks.iter().map(|b| b * c).collect(),
        }
    }

    /// Whitened block `G_tgt^{1/2} M G_src^{-1/2}`: the matrix of the
    /// operator between the standard inner products.
    pub(crate) fn whitened_block(&self, i: usize) -> CMat {
        if self.source.has_default_grams() && self.target.has_default_grams() {
            return self.blocks[i].clone();
        }
        self.target.gram_sqrt(i) * &self.blocks[i] * self.source.gram_inv_sqrt(i)
    }

    /// Builds an operator back from whitened blocks.
    pub(crate) fn from_whitened(
        source: &HilbertModule,
        target: &HilbertModule,
        whitened: Vec<CMat>,
    ) -> Result<Self> {
        let blocks = whitened
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                if source.has_default_grams() && target.has_default_grams() {
                    w
                } else {
                    target.gram_inv_sqrt(i) * w * source.gram_sqrt(i)
                }
            })
            .collect();
        Self::new(source.clone(), target.clone(), blocks)
    }

    /// Operator norm: max over blocks of the Gram-weighted spectral norm.
    pub fn norm(&self) -> f64 {
        (0..self.num_blocks())
            .map(|i| linalg::spectral_norm(&self.whitened_block(i)))
            .fold(0.0, f64::max)
    }

    /// All Gram-weighted singular values per block, descending.
    pub fn singular_values(&self) -> Vec<Vec<f64>> {
        (0..self.num_blocks())
            .map(|i| linalg::singular_values(&self.whitened_block(i)))
            .collect()
    }

    /// Per-block numerical rank at relative tolerance `tol`.
    pub fn ranks(&self, tol: f64) -> Vec<usize> {
        (0..self.num_blocks())
            .map(|i| {
                let w = self.whitened_block(i);
                let sv = linalg::singular_values(&w);
                linalg::rank_with_tol(&sv, w.nrows(), w.ncols(), tol)
            })
            .collect()
    }

    /// Hermiticity residual `‖T - T^*‖` relative to `‖T‖`.
    pub fn hermiticity_residual(&self) -> Result<f64> {
        if !self.is_endomorphism() {
            return Err(Error::ShapeMismatch(
                "Hermiticity is for endomorphisms".into(),
            ));
        }
        Ok(self.sub(&self.adjoint())?.norm())
    }

    /// Applies a real scalar function to a Hermitian operator through an
    /// orthonormal eigenbasis per block, with respect to the module's
    /// inner product.
    pub fn herm_funcalc(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let res = self.hermiticity_residual()?;
        let scale = self.norm();
        if res > 1e-8 * scale.max(1.0) {
            return Err(Error::NotHermitian {
                residual: res / scale.max(1.0),
            });
        }
        let whitened = (0..self.num_blocks())
            .map(|i| {
                let w = self.whitened_block(i);
                // symmetrize: whitened Hermitian-w.r.t-Gram operators are
                // Hermitian matrices up to rounding
                linalg::herm_apply(&w, &f)
            })
            .collect();
        Self::from_whitened(&self.source, &self.target, whitened)
    }

    /// Eigenvalues (ascending, per block) of a Hermitian operator with
    /// respect to the module inner product.
    pub fn herm_eigenvalues(&self) -> Result<Vec<Vec<f64>>> {
        let res = self.hermiticity_residual()?;
        if res > 1e-8 * self.norm().max(1.0) {
            return Err(Error::NotHermitian { residual: res });
        }
        Ok((0..self.num_blocks())
            .map(|i| linalg::herm_eigen(&self.whitened_block(i)).values)
            .collect())
    }

    /// The bounded transform `F_t = t (1 + t^* t)^{-1/2}` together with
    /// the resolvent square root `Q_t = (1 + t^* t)^{-1/2}`.
    pub fn bounded_transform(&self) -> BoundedTransformPair {
        let q = self.resolvent_sqrt();
        let f = self.compose(&q).expect("shapes agree by construction");
        BoundedTransformPair { f, q }
    }

    /// `Q_t = (1 + t^* t)^{-1/2}`, computed by functional calculus on
    /// `t^* t`.
    pub fn resolvent_sqrt(&self) -> Operator {
        let tst = self
            .adjoint()
            .compose(self)
            .expect("t* t is an endomorphism");
        tst.herm_funcalc(|x| 1.0 / (1.0 + x.max(0.0)).sqrt())
            .expect("t* t is Hermitian by construction")
    }

    /// `Q_t^{-1} = (1 + t^* t)^{1/2}`, by functional calculus (never by
    /// matrix inversion of `Q_t`).
    pub fn resolvent_inv_sqrt(&self) -> Operator {
        let tst = self
            .adjoint()
            .compose(self)
            .expect("t* t is an endomorphism");
        tst.herm_funcalc(|x| (1.0 + x.max(0.0)).sqrt())
            .expect("t* t is Hermitian by construction")
    }

    /// Gram-orthogonal projection onto the kernel, at relative rank
    /// tolerance `tol`.
    pub fn kernel_projection(&self, tol: f64) -> Operator {
        let whitened = (0..self.num_blocks())
            .map(|i| {
                let w = self.whitened_block(i);
                let dec = linalg::svd(&w);
                let r = linalg::rank_with_tol(&dec.sigma, w.nrows(), w.ncols(), tol);
                linalg::identity(w.ncols()) - linalg::projector_from_columns(&dec.v, r)
            })
            .collect();
        Self::from_whitened(&self.source, &self.source, whitened).expect("square by construction")
    }

    /// Gram-orthogonal projection onto the range.
    pub fn range_projection(&self, tol: f64) -> Operator {
        let whitened = (0..self.num_blocks())
            .map(|i| {
                let w = self.whitened_block(i);
                let dec = linalg::svd(&w);
                let r = linalg::rank_with_tol(&dec.sigma, w.nrows(), w.ncols(), tol);
                linalg::projector_from_columns(&dec.u, r)
            })
            .collect();
        Self::from_whitened(&self.target, &self.target, whitened).expect("square by construction")
    }

    /// Polar decomposition `T = V |T|` with `V` the canonical partial
    /// isometry and `|T| = (T^* T)^{1/2}`.
    pub fn polar_decompose(&self, tol: f64) -> (Operator, Operator) {
        let mut v_blocks = Vec::with_capacity(self.num_blocks());
        let mut abs_blocks = Vec::with_capacity(self.num_blocks());
        for i in 0..self.num_blocks() {
            let w = self.whitened_block(i);
            let dec = linalg::svd(&w);
            let r = linalg::rank_with_tol(&dec.sigma, w.nrows(), w.ncols(), tol);
            let mut v = linalg::zeros(w.nrows(), w.ncols());
            let mut abs = linalg::zeros(w.ncols(), w.ncols());
            for j in 0..r {
                v += dec.u.column(j) * dec.v.column(j).adjoint();
                abs += (dec.v.column(j) * dec.v.column(j).adjoint())
                    * Complex64::new(dec.sigma[j], 0.0);
            }
            v_blocks.push(v);
            abs_blocks.push(abs);
        }
        let v = Self::from_whitened(&self.source, &self.target, v_blocks).expect("shapes agree");
        let abs =
            Self::from_whitened(&self.source, &self.source, abs_blocks).expect("shapes agree");
        (v, abs)
    }

    /// Moore-Penrose pseudo-inverse with respect to the module inner
    /// products.
    pub fn pseudo_inverse(&self, tol: f64) -> Operator {
        let whitened = (0..self.num_blocks())
            .map(|i| linalg::pinv(&self.whitened_block(i), tol))
            .collect();
        Self::from_whitened(&self.target, &self.source, whitened).expect("shapes agree")
    }

    /// Exact inverse for invertible endomorphisms.
    pub fn inverse(&self) -> Result<Operator> {
        if !self.is_endomorphism() {
            return Err(Error::ShapeMismatch("inverse of a non-endomorphism".into()));
        }
        let blocks: Option<Vec<CMat>> = self.blocks.iter().map(linalg::try_inverse).collect();
        match blocks {
            Some(blocks) => Self::new(self.source.clone(), self.target.clone(), blocks),
            None => Err(Error::Singular("operator block is not invertible".into())),
        }
    }

    /// Smallest nonzero Gram-weighted singular value over all blocks (the
    /// reduced minimum modulus), and 0 for the zero operator.
    pub fn reduced_minimum_modulus(&self, tol: f64) -> f64 {
        let mut gamma = f64::INFINITY;
        for i in 0..self.num_blocks() {
            let w = self.whitened_block(i);
            let sv = linalg::singular_values(&w);
            let r = linalg::rank_with_tol(&sv, w.nrows(), w.ncols(), tol);
            if r > 0 {
                gamma = gamma.min(sv[r - 1]);
            }
        }
        if gamma.is_infinite() {
            0.0
        } else {
            gamma
        }
    }

    /// Vertical stack: maps the common source into `self.target ⊕
    /// other.target`; used for exact subspace intersections.
    pub fn stack(&self, other: &Self) -> Result<Operator> {
        if self.source != other.source {
            return Err(Error::ShapeMismatch(
                "stacked operators must share a source".into(),
            ));
        }
        let target = self.target.direct_sum(&other.target)?;
        let blocks = (0..self.num_blocks())
            .map(|i| {
                let (a, b) = (&self.blocks[i], &other.blocks[i]);
                let mut m = linalg::zeros(a.nrows() + b.nrows(), a.ncols());
                m.view_mut((0, 0), a.shape()).copy_from(a);
                m.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
                m
            })
            .collect();
        Self::new(self.source.clone(), target, blocks)
    }
}

/// The bounded transform `F_t` and resolvent square root `Q_t` of an
/// operator.
#[derive(Debug, Clone)]
pub struct BoundedTransformPair {
    pub f: Operator,
    pub q: Operator,
}

/// Residual norms for the eight bounded-transform relations.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub entries: Vec<(String, f64)>,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| *r)
    }
}

/// Checks the eight relations satisfied by the bounded transform and the
/// resolvent of an operator, returning named residual operator norms.
pub fn check_bt_identities(t: &Operator) -> IdentityReport {
    let ts = t.adjoint();
    let BoundedTransformPair { f, q } = t.bounded_transform();
    let q_inv = t.resolvent_inv_sqrt();
    let fs = f.adjoint();
    let q_star = ts.resolvent_sqrt();
    let q_star_inv = ts.resolvent_inv_sqrt();
    let id_src = Operator::identity(t.source());

    let mut entries = Vec::new();
    let mut push = |name: &str, op: Result<Operator>| {
        entries.push((name.to_string(), op.expect("shapes agree").norm()));
    };

    // (i) F_t = t Q_t
    push("f_eq_t_q", f.sub(&t.compose(&q).unwrap()));
    // (ii) t = F_t Q_t^{-1}
    push("t_eq_f_qinv", t.sub(&f.compose(&q_inv).unwrap()));
    // (iii) Q_t^2 = 1 - F_t^* F_t
    push(
        "q2_eq_one_minus_fsf",
        q.compose(&q)
            .unwrap()
            .sub(&id_src.sub(&fs.compose(&f).unwrap()).unwrap()),
    );
    // (iv) Q_t Q_t^{-1} = 1
    push("q_qinv_eq_one", q.compose(&q_inv).unwrap().sub(&id_src));
    // (v) Q_t^2 Q_t^{-2} = 1
    push(
        "q2_qinv2_eq_one",
        q.compose(&q)
            .unwrap()
            .compose(&q_inv.compose(&q_inv).unwrap())
            .unwrap()
            .sub(&id_src),
    );
    // (vi) Q_t t^* = F_t^*
    push("q_tstar_eq_fstar", q.compose(&ts).unwrap().sub(&fs));
    // (vii) Q_{t^*} F_t = F_t Q_t
    push(
        "qstar_f_eq_f_q",
        q_star.compose(&f).unwrap().sub(&f.compose(&q).unwrap()),
    );
    // (viii) F_t Q_t^{-1} = Q_{t^*}^{-1} F_t
    push(
        "f_qinv_eq_qstarinv_f",
        f.compose(&q_inv)
            .unwrap()
            .sub(&q_star_inv.compose(&f).unwrap()),
    );

    IdentityReport { entries }
}

/// Reduced minimum modulus plus the closed-range decomposition residuals
/// `E = ker T ⊕ ran T^*` and `F = ker T^* ⊕ ran T`.
#[derive(Debug, Clone)]
pub struct ClosedRangeReport {
    pub gamma: f64,
    pub source_decomposition_residual: f64,
    pub target_decomposition_residual: f64,
}

pub fn closed_range_report(t: &Operator, tol: f64) -> ClosedRangeReport {
    let gamma = t.reduced_minimum_modulus(tol);
    let id_src = Operator::identity(t.source());
    let id_tgt = Operator::identity(t.target());
    let ts = t.adjoint();
    let src = id_src
        .sub(
            &t.kernel_projection(tol)
                .add(&ts.range_projection(tol))
                .unwrap(),
        )
        .unwrap()
        .norm();
    let tgt = id_tgt
        .sub(
            &ts.kernel_projection(tol)
                .add(&t.range_projection(tol))
                .unwrap(),
        )
        .unwrap()
        .norm();
    ClosedRangeReport {
        gamma,
        source_decomposition_residual: src,
        target_decomposition_residual: tgt,
    }
}
