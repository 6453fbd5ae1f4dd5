//! Parametrices, Putinar's even/odd operators, index computation in K0,
//! index theorems as executable checks, and maps of complexes.
//!
//! Every operator in this model is compact, so every finite-length
//! (quasi)complex is Fredholm; the canonical parametrix is the blockwise
//! Moore-Penrose pseudo-inverse, whose residuals are exactly the
//! harmonic projections. Residual norms are always reported so that the
//! near-invertibility structure stays visible.

use crate::algebra::K0Class;
use crate::complex::{assemble_grid, Complex, ComplexKind};
use crate::error::{Error, Result};
use crate::hodge;
use crate::linalg::CMat;
use crate::module::HilbertModule;
use crate::operator::Operator;

/// A parametrix of a (quasi)complex: operators `P_k : E_{k+1} → E_k`
/// together with the residuals `C_k = 1 - (P_k t_k + t_{k-1} P_{k-1})`.
#[derive(Debug, Clone)]
pub struct Parametrix {
    pub ops: Vec<Operator>,
    pub residuals: Vec<Operator>,
}

impl Parametrix {
    /// Wraps candidate ops, recomputing the residual operators.
    pub fn from_ops(complex: &Complex, ops: Vec<Operator>) -> Result<Self> {
        if ops.len() != complex.num_diffs() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parametrix ops, got {}",
                complex.num_diffs(),
                ops.len()
            )));
        }
        for (k, p) in ops.iter().enumerate() {
            if p.source() != complex.module(k + 1) || p.target() != complex.module(k) {
                return Err(Error::ShapeMismatch(format!(
                    "parametrix op {k} must map E_{} to E_{k}",
                    k + 1
                )));
            }
        }
        let residuals = compute_residuals(complex, &ops)?;
        Ok(Self { ops, residuals })
    }

    pub fn residual_norms(&self) -> Vec<f64> {
        self.residuals.iter().map(|c| c.norm()).collect()
    }

    pub fn max_residual_norm(&self) -> f64 {
        self.residual_norms().into_iter().fold(0.0, f64::max)
    }

    /// `‖P_k P_{k+1}‖` for consecutive ops (the quasicomplex property of
    /// the parametrix itself).
    pub fn composite_norms(&self) -> Vec<f64> {
        (0..self.ops.len().saturating_sub(1))
            .map(|k| {
                self.ops[k]
                    .compose(&self.ops[k + 1])
                    .expect("chain shapes")
                    .norm()
            })
            .collect()
    }
}

fn compute_residuals(complex: &Complex, ops: &[Operator]) -> Result<Vec<Operator>> {
    (0..complex.num_modules())
        .map(|k| {
            let mut acc = Operator::identity(complex.module(k));
            if k < complex.num_diffs() {
                acc = acc.sub(&ops[k].compose(complex.diff(k))?)?;
            }
            if k >= 1 {
                acc = acc.sub(&complex.diff(k - 1).compose(&ops[k - 1])?)?;
            }
            Ok(acc)
        })
        .collect()
}

/// The canonical parametrix: blockwise Moore-Penrose pseudo-inverses of
/// the differentials. Its residuals are the harmonic projections, and it
/// is itself a complex (`P_k P_{k+1} = 0`).
pub fn pseudo_inverse_parametrix(complex: &Complex, tol: f64) -> Result<Parametrix> {
    if complex.kind() != ComplexKind::Complex {
        return Err(Error::Unsupported(
            "the pseudo-inverse parametrix requires kind = complex".into(),
        ));
    }
    let ops: Vec<Operator> = complex
        .diffs()
        .iter()
        .map(|t| t.pseudo_inverse(tol))
        .collect();
    Parametrix::from_ops(complex, ops)
}

/// Builds the associated parametrix `P̂_k = R_k P_k` from candidate ops
/// and (approximate) inverses `R_k` of `D_k = P_k t_k + t_{k-1} P_{k-1}`.
/// When `inverses` is `None`, the `D_k` are inverted exactly and a
/// numerically singular `D_k` is an error.
pub fn associated_parametrix(
    complex: &Complex,
    candidate: &[Operator],
    inverses: Option<&[Operator]>,
) -> Result<Parametrix> {
    let raw = Parametrix::from_ops(complex, candidate.to_vec())?;
    let d: Vec<Operator> = raw
        .residuals
        .iter()
        .enumerate()
        .map(|(k, c)| {
            Operator::identity(complex.module(k))
                .sub(c)
                .expect("endomorphism")
        })
        .collect();
    let r: Vec<Operator> = match inverses {
        Some(r) => {
            if r.len() != complex.num_modules() {
                return Err(Error::ShapeMismatch(format!(
                    "expected {} inverses, got {}",
                    complex.num_modules(),
                    r.len()
                )));
            }
            r.to_vec()
        }
        None => d
            .iter()
            .enumerate()
            .map(|(k, dk)| {
                dk.inverse().map_err(|_| {
                    Error::Singular(format!("D_{k} = P_k t_k + t_{{k-1}} P_{{k-1}} is singular and no inverses were supplied"))
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let ops: Vec<Operator> = (0..complex.num_diffs())
        .map(|k| r[k].compose(&candidate[k]).expect("shapes agree"))
        .collect();
    Parametrix::from_ops(complex, ops)
}

/// Outcome of the `P̃ t P̃` construction: a parametrix that is also a
/// (quasi)complex.
#[derive(Debug, Clone)]
pub struct QuasicomplexParametrix {
    pub parametrix: Parametrix,
    /// `‖P_k P_{k+1}‖` of the output.
    pub composite_norms: Vec<f64>,
    /// Set when the input residuals exceeded 1/2 in norm; the
    /// construction is still performed.
    pub input_residual_warning: bool,
}

/// Sandwiches a parametrix through the differentials: `P_k = P̃_k t_k
/// P̃_k`. For the pseudo-inverse parametrix of a complex this returns the
/// input unchanged.
pub fn quasicomplex_parametrix(
    complex: &Complex,
    seed: &Parametrix,
) -> Result<QuasicomplexParametrix> {
    if seed.ops.len() != complex.num_diffs() {
        return Err(Error::ShapeMismatch(
            "parametrix does not match the complex".into(),
        ));
    }
    let input_residual_warning = seed.max_residual_norm() > 0.5;
    let ops: Vec<Operator> = (0..complex.num_diffs())
        .map(|k| {
            seed.ops[k]
                .compose(complex.diff(k))
                .and_then(|pt| pt.compose(&seed.ops[k]))
                .expect("chain shapes agree")
        })
        .collect();
    let parametrix = Parametrix::from_ops(complex, ops)?;
    let composite_norms = parametrix.composite_norms();
    Ok(QuasicomplexParametrix {
        parametrix,
        composite_norms,
        input_residual_warning,
    })
}

/// Report for a joint parametrix `(P_l, P_r)`: the residual norms
/// `‖1 - (P_{l,k} t_k + t_{k-1} P_{r,k-1})‖` plus the invertibility
/// diagnostic for `Γ_k = 1 + t_{k-1} P_{r,k-1} P_{r,k} t_k`, whose
/// inverse is `2 - Γ_k` on a complex.
#[derive(Debug, Clone)]
pub struct JointParametrixReport {
    pub residual_norms: Vec<f64>,
    pub gamma_inverse_residuals: Vec<f64>,
}

pub fn verify_joint_parametrix(
    complex: &Complex,
    left: &[Operator],
    right: &[Operator],
) -> Result<JointParametrixReport> {
    if left.len() != complex.num_diffs() || right.len() != complex.num_diffs() {
        return Err(Error::ShapeMismatch(
            "joint parametrix must have one (P_l, P_r) pair per differential".into(),
        ));
    }
    for side in [left, right] {
        for (k, p) in side.iter().enumerate() {
            if p.source() != complex.module(k + 1) || p.target() != complex.module(k) {
                return Err(Error::ShapeMismatch(format!(
                    "joint parametrix op {k} has the wrong shape"
                )));
            }
        }
    }
    let mut residual_norms = Vec::with_capacity(complex.num_modules());
    for k in 0..complex.num_modules() {
        let mut acc = Operator::identity(complex.module(k));
        if k < complex.num_diffs() {
            acc = acc.sub(&left[k].compose(complex.diff(k))?)?;
        }
        if k >= 1 {
            acc = acc.sub(&complex.diff(k - 1).compose(&right[k - 1])?)?;
        }
        residual_norms.push(acc.norm());
    }

    let mut gamma_inverse_residuals = Vec::new();
    if complex.kind() == ComplexKind::Complex {
        for k in 1..complex.num_diffs() {
            // X = t_{k-1} P_{r,k-1} P_{r,k} t_k squares to zero
            let x = complex
                .diff(k - 1)
                .compose(&right[k - 1])?
                .compose(&right[k])?
                .compose(complex.diff(k))?;
            let id = Operator::identity(complex.module(k));
            let gamma = id.add(&x)?;
            let claimed_inverse = id.sub(&x)?;
            gamma_inverse_residuals.push(gamma.compose(&claimed_inverse)?.sub(&id)?.norm());
        }
    }
    Ok(JointParametrixReport {
        residual_norms,
        gamma_inverse_residuals,
    })
}

/// The bounded-transform transfer: from a parametrix `P` of the bounded
/// transform complex, `P_{l,k} = P_k Q_{t_k^*}` and `P_{r,k} = Q_{t_k}
/// P_k` form a joint parametrix of the original complex with the same
/// residuals.
pub fn transfer_joint_parametrix(
    complex: &Complex,
    tol: f64,
) -> Result<(Vec<Operator>, Vec<Operator>)> {
    let btc = complex.bounded_transform_complex()?;
    let p = pseudo_inverse_parametrix(&btc, tol)?;
    let mut left = Vec::with_capacity(complex.num_diffs());
    let mut right = Vec::with_capacity(complex.num_diffs());
    for k in 0..complex.num_diffs() {
        let q_star = complex.diff(k).adjoint().resolvent_sqrt();
        let q = complex.diff(k).resolvent_sqrt();
        left.push(p.ops[k].compose(&q_star)?);
        right.push(q.compose(&p.ops[k])?);
    }
    Ok((left, right))
}

/// The Exel index of an operator with closed range:
/// `ind T = [ker T] - [ker T^*]` in K0.
pub fn index_operator(t: &Operator, tol: f64) -> K0Class {
    let ranks = t.ranks(tol);
    let plus: Vec<i64> = (0..t.num_blocks())
        .map(|i| t.source().dim(i) as i64 - ranks[i] as i64)
        .collect();
    let minus: Vec<i64> = (0..t.num_blocks())
        .map(|i| t.target().dim(i) as i64 - ranks[i] as i64)
        .collect();
    K0Class::from_difference(&plus, &minus).expect("equal lengths")
}

/// The Fredholm index of a (quasi)complex, `ind(t_•) = ind(D^+)`.
pub fn index_complex(complex: &Complex, tol: f64) -> K0Class {
    index_operator(&complex.dirac().even, tol)
}

/// The Euler form of the index: the alternating sum of cohomology
/// classes.
pub fn euler_index(complex: &Complex, tol: f64) -> Result<K0Class> {
    if complex.kind() != ComplexKind::Complex {
        return Err(Error::Unsupported(
            "the Euler index requires kind = complex".into(),
        ));
    }
    let m = complex.algebra().num_blocks();
    let mut acc = K0Class::zero(m);
    for k in 0..complex.num_modules() {
        let (_, class) = hodge::cohomology(complex, k, tol)?;
        acc = if k % 2 == 0 {
            acc.add(&class)?
        } else {
            acc.sub(&class)?
        };
    }
    Ok(acc)
}

/// The alternating sum of the module classes themselves (rank-nullity
/// form of the index).
pub fn euler_module_index(complex: &Complex) -> K0Class {
    let m = complex.algebra().num_blocks();
    let mut acc = K0Class::zero(m);
    for k in 0..complex.num_modules() {
        let class = K0Class::from_dims(complex.module(k).dims());
        acc = if k % 2 == 0 {
            acc.add(&class).expect("same algebra")
        } else {
            acc.sub(&class).expect("same algebra")
        };
    }
    acc
}

/// Putinar's even/odd operators: the Dirac-shaped roll-ups with the
/// parametrix in place of the adjoint differentials. `T_ev` has `t_{2k}`
/// on the diagonal and `P_{2k+1}` on the superdiagonal; `T_odd` has
/// `P_{2k}` on the diagonal and `t_{2k+1}` on the subdiagonal.
pub fn putinar_tev(complex: &Complex, parametrix: &Parametrix) -> Result<(Operator, Operator)> {
    if parametrix.ops.len() != complex.num_diffs() {
        return Err(Error::ShapeMismatch(
            "parametrix does not match the complex".into(),
        ));
    }
    let even_idx = complex.even_indices();
    let odd_idx = complex.odd_indices();
    let even_mods: Vec<HilbertModule> = even_idx
        .iter()
        .map(|&k| complex.module(k).clone())
        .collect();
    let odd_mods: Vec<HilbertModule> = odd_idx.iter().map(|&k| complex.module(k).clone()).collect();
    let diff = |j: usize| -> Option<Operator> {
        if j < complex.num_diffs() {
            Some(complex.diff(j).clone())
        } else {
            None
        }
    };
    let par = |j: usize| -> Option<Operator> { parametrix.ops.get(j).cloned() };

    let t_ev = assemble_grid(complex.algebra(), &even_mods, &odd_mods, |row, col| {
        if col == row {
            diff(2 * row)
        } else if col == row + 1 {
            par(2 * row + 1)
        } else {
            None
        }
    });
    let t_odd = assemble_grid(complex.algebra(), &odd_mods, &even_mods, |row, col| {
        if col == row {
            par(2 * row)
        } else if row == col + 1 {
            diff(2 * col + 1)
        } else {
            None
        }
    });
    Ok((t_ev, t_odd))
}

/// Checks `ind T = ind (T + P^*)` for a parametrix `P` of `T`.
#[derive(Debug, Clone)]
pub struct AdjointParametrixIndexReport {
    pub index_t: K0Class,
    pub index_t_plus_pstar: K0Class,
    pub left_residual: f64,
    pub right_residual: f64,
}

impl AdjointParametrixIndexReport {
    pub fn indices_equal(&self) -> bool {
        self.index_t == self.index_t_plus_pstar
    }
}

pub fn index_with_adjoint_of_parametrix_check(
    t: &Operator,
    p: &Operator,
    tol: f64,
) -> Result<AdjointParametrixIndexReport> {
    if p.source() != t.target() || p.target() != t.source() {
        return Err(Error::ShapeMismatch(
            "P must map the target of T back to its source".into(),
        ));
    }
    let id_src = Operator::identity(t.source());
    let id_tgt = Operator::identity(t.target());
    let left_residual = id_src.sub(&p.compose(t)?)?.norm();
    let right_residual = id_tgt.sub(&t.compose(p)?)?.norm();
    let sum = t.add(&p.adjoint())?;
    Ok(AdjointParametrixIndexReport {
        index_t: index_operator(t, tol),
        index_t_plus_pstar: index_operator(&sum, tol),
        left_residual,
        right_residual,
    })
}

/// The alternating sum of orthonormal dimensions of cohomology for a
/// complex over a single-block algebra; equals the unique entry of the
/// K0-valued index.
pub fn kdim_index(complex: &Complex, tol: f64) -> Result<i64> {
    if complex.algebra().num_blocks() != 1 {
        return Err(Error::Unsupported(
            "kdim index is defined over single-block algebras".into(),
        ));
    }
    let dims = hodge::cohomology_dims(complex, tol)?;
    Ok(dims
        .iter()
        .enumerate()
        .map(|(k, d)| (if k % 2 == 0 { 1 } else { -1 }) * d[0] as i64)
        .sum())
}

/// Restriction of an operator over `M_n(C)` to the first-column spaces
/// `E e_0`: numerically the single matrix block itself.
pub fn psi_restrict(t: &Operator) -> Result<CMat> {
    if t.source().algebra().num_blocks() != 1 {
        return Err(Error::Unsupported(
            "psi restriction is defined over single-block algebras".into(),
        ));
    }
    Ok(t.block(0).clone())
}

/// A map of complexes: operators `G_k : E_k → F_k` with the commutation
/// residuals `‖G_{k+1} t_k - s_k G_k‖`.
#[derive(Debug, Clone)]
pub struct ChainMap {
    pub maps: Vec<Operator>,
    pub commutation_residuals: Vec<f64>,
}

impl ChainMap {
    pub fn new(source: &Complex, target: &Complex, maps: Vec<Operator>) -> Result<Self> {
        if source.num_modules() != target.num_modules() {
            return Err(Error::ShapeMismatch(
                "chain map between complexes of different lengths".into(),
            ));
        }
        if maps.len() != source.num_modules() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} maps, got {}",
                source.num_modules(),
                maps.len()
            )));
        }
        for (k, g) in maps.iter().enumerate() {
            if g.source() != source.module(k) || g.target() != target.module(k) {
                return Err(Error::ShapeMismatch(format!(
                    "chain map component {k} has the wrong shape"
                )));
            }
        }
        let commutation_residuals = (0..source.num_diffs())
            .map(|k| {
                maps[k + 1]
                    .compose(source.diff(k))
                    .and_then(|a| target.diff(k).compose(&maps[k]).and_then(|b| a.sub(&b)))
                    .map(|d| d.norm())
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            maps,
            commutation_residuals,
        })
    }

    pub fn identity(complex: &Complex) -> Self {
        let maps = complex.modules().iter().map(Operator::identity).collect();
        Self::new(complex, complex, maps).expect("identity is a chain map")
    }

    pub fn max_commutation_residual(&self) -> f64 {
        self.commutation_residuals
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.max_commutation_residual() <= tol
    }
}

/// Builds the chain map and rejects it when a commutation residual
/// exceeds `tol` (relative to the differentials' norms).
pub fn validate_chain_map(
    source: &Complex,
    target: &Complex,
    maps: Vec<Operator>,
    tol: f64,
) -> Result<ChainMap> {
    let map = ChainMap::new(source, target, maps)?;
    let scale = 1.0
        + source
            .diffs()
            .iter()
            .chain(target.diffs())
            .map(|t| t.norm())
            .fold(0.0, f64::max);
    if !map.is_valid(tol * scale) {
        return Err(Error::ShapeMismatch(format!(
            "not a chain map: max commutation residual {:.3e}",
            map.max_commutation_residual()
        )));
    }
    Ok(map)
}

/// Residuals of the homotopy relation `g_k - h_k = p_k t_k + s_{k-1}
/// p_{k-1}`, with `p_k : E_{k+1} → F_k`.
pub fn chain_homotopy_check(
    source: &Complex,
    target: &Complex,
    g: &ChainMap,
    h: &ChainMap,
    homotopy: &[Operator],
) -> Result<Vec<f64>> {
    if homotopy.len() != source.num_diffs() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} homotopy components, got {}",
            source.num_diffs(),
            homotopy.len()
        )));
    }
    for (k, p) in homotopy.iter().enumerate() {
        if p.source() != source.module(k + 1) || p.target() != target.module(k) {
            return Err(Error::ShapeMismatch(format!(
                "homotopy component {k} has the wrong shape"
            )));
        }
    }
    (0..source.num_modules())
        .map(|k| {
            let mut rhs = Operator::zero(source.module(k).clone(), target.module(k).clone())?;
            if k < source.num_diffs() {
                rhs = rhs.add(&homotopy[k].compose(source.diff(k))?)?;
            }
            if k >= 1 {
                rhs = rhs.add(&target.diff(k - 1).compose(&homotopy[k - 1])?)?;
            }
            let lhs = g.maps[k].sub(&h.maps[k])?;
            Ok(lhs.sub(&rhs)?.norm())
        })
        .collect()
}

/// The maps induced on harmonic spaces, as the projection-sandwiched
/// operators `P̂^{(s)}_k G_k P̂^{(t)}_k`; chain-homotopic maps induce
/// equal sandwiches.
pub fn induced_cohomology_map(
    source: &Complex,
    target: &Complex,
    g: &ChainMap,
    tol: f64,
) -> Result<Vec<Operator>> {
    (0..source.num_modules())
        .map(|k| {
            let p_src = hodge::hodge_split(source, k, tol)?.harmonic;
            let p_tgt = hodge::hodge_split(target, k, tol)?.harmonic;
            p_tgt.compose(&g.maps[k])?.compose(&p_src)
        })
        .collect()
}

/// Report for a short exact sequence of complexes `0 → T → U → V → 0`.
#[derive(Debug, Clone)]
pub struct SesReport {
    pub index_first: K0Class,
    pub index_middle: K0Class,
    pub index_last: K0Class,
    /// Index of each per-k sequence `0 → E_k → F_k → G_k → 0` viewed as a
    /// complex (must be zero).
    pub rung_indices: Vec<K0Class>,
    /// Smallest reduced minimum modulus over the rung Laplacians (each
    /// rung is exact, so its Laplacians are invertible).
    pub min_rung_laplace_gamma: f64,
}

impl SesReport {
    /// `ind T - ind U + ind V = 0`.
    pub fn alternating_sum_is_zero(&self) -> Result<bool> {
        let sum = self
            .index_first
            .sub(&self.index_middle)?
            .add(&self.index_last)?;
        Ok(sum.is_zero())
    }
}

/// Verifies per-k exactness of `0 → T_k → U_k → V_k → 0` via rank
/// equalities, checks that the rungs have index zero and invertible
/// Laplacians, and reports the three indices.
pub fn ses_index_check(
    first: &Complex,
    middle: &Complex,
    last: &Complex,
    into_middle: &ChainMap,
    onto_last: &ChainMap,
    tol: f64,
) -> Result<SesReport> {
    let n = first.num_modules();
    if middle.num_modules() != n || last.num_modules() != n {
        return Err(Error::ShapeMismatch(
            "the three complexes must have equal length".into(),
        ));
    }
    let scale = 1.0
        + [first, middle, last]
            .iter()
            .flat_map(|c| c.diffs().iter().map(|t| t.norm()))
            .fold(0.0, f64::max);
    if into_middle.max_commutation_residual() > 1e-8 * scale
        || onto_last.max_commutation_residual() > 1e-8 * scale
    {
        return Err(Error::ShapeMismatch(
            "the maps are not chain maps at tolerance 1e-8".into(),
        ));
    }

    let mut rung_indices = Vec::with_capacity(n);
    let mut min_gamma = f64::INFINITY;
    for k in 0..n {
        let g = &into_middle.maps[k];
        let h = &onto_last.maps[k];
        let comp_norm = h.compose(g)?.norm();
        if comp_norm > 1e-8 * scale {
            return Err(Error::NotExact {
                k,
                reason: format!("H_k G_k has norm {comp_norm:.3e}"),
            });
        }
        let g_ranks = g.ranks(tol);
        let h_ranks = h.ranks(tol);
        for block in 0..first.algebra().num_blocks() {
            let (de, df, dg) = (
                first.module(k).dim(block),
                middle.module(k).dim(block),
                last.module(k).dim(block),
            );
            if g_ranks[block] != de {
                return Err(Error::NotExact {
                    k,
                    reason: format!("G_k is not injective in block {block}"),
                });
            }
            if h_ranks[block] != dg {
                return Err(Error::NotExact {
                    k,
                    reason: format!("H_k is not surjective in block {block}"),
                });
            }
            if g_ranks[block] + h_ranks[block] != df {
                return Err(Error::NotExact {
                    k,
                    reason: format!("ran G_k is smaller than ker H_k in block {block}"),
                });
            }
        }
        // the rung as a complex: exact, so index 0 and invertible Laplacian
        let rung = Complex::new(
            vec![
                first.module(k).clone(),
                middle.module(k).clone(),
                last.module(k).clone(),
            ],
            vec![g.clone(), h.clone()],
            ComplexKind::Quasicomplex,
            1e-8,
        )?;
        rung_indices.push(index_complex(&rung, tol));
        for j in 0..rung.num_modules() {
            let lap = rung.laplace_k(j)?;
            let kernel_rank: usize = hodge::projection_rank(&lap.kernel_projection(tol))
                .iter()
                .sum();
            if kernel_rank != 0 {
                return Err(Error::NotExact {
                    k,
                    reason: format!("rung Laplacian {j} has nontrivial kernel"),
                });
            }
            if !rung.module(j).is_zero_module() {
                min_gamma = min_gamma.min(lap.reduced_minimum_modulus(tol));
            }
        }
    }

    Ok(SesReport {
        index_first: index_complex(first, tol),
        index_middle: index_complex(middle, tol),
        index_last: index_complex(last, tol),
        rung_indices,
        min_rung_laplace_gamma: if min_gamma.is_finite() {
            min_gamma
        } else {
            0.0
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::AlgebraDescriptor;
    use crate::generate;
    use crate::{DEFAULT_COMPLEX_TOL, DEFAULT_RANK_TOL};
    use num_complex::Complex64;

    const TOL: f64 = DEFAULT_RANK_TOL;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn scalar_module(d: usize) -> HilbertModule {
        HilbertModule::standard(AlgebraDescriptor::scalars(), vec![d]).unwrap()
    }

    fn scalar_op(rows: usize, cols: usize, entries: &[f64]) -> Operator {
        let data: Vec<Complex64> = entries.iter().map(|&x| c(x)).collect();
        Operator::new(
            scalar_module(cols),
            scalar_module(rows),
            vec![CMat::from_row_slice(rows, cols, &data)],
        )
        .unwrap()
    }

    fn fix_complex() -> Complex {
        Complex::new(
            vec![scalar_module(1), scalar_module(2), scalar_module(1)],
            vec![scalar_op(2, 1, &[1.0, 1.0]), scalar_op(1, 2, &[1.0, -1.0])],
            ComplexKind::Complex,
            DEFAULT_COMPLEX_TOL,
        )
        .unwrap()
    }

    fn row10_complex() -> Complex {
        Complex::new(
            vec![scalar_module(2), scalar_module(1)],
            vec![scalar_op(1, 2, &[1.0, 0.0])],
            ComplexKind::Complex,
            DEFAULT_COMPLEX_TOL,
        )
        .unwrap()
    }

    #[test]
    fn pseudo_inverse_parametrix_examples() {
        // zero complex: P = 0, residuals 1
        let zero = Complex::new(
            vec![scalar_module(2), scalar_module(1)],
            vec![Operator::zero(scalar_module(2), scalar_module(1)).unwrap()],
            ComplexKind::Complex,
            DEFAULT_COMPLEX_TOL,
        )
        .unwrap();
        let p = pseudo_inverse_parametrix(&zero, TOL).unwrap();
        assert!(p.ops[0].norm() < 1e-14);
        assert!((p.residual_norms()[0] - 1.0).abs() < 1e-13);

        // exact complex: residuals 0
        let fix = fix_complex();
        let p = pseudo_inverse_parametrix(&fix, TOL).unwrap();
        assert!(p.max_residual_norm() < 1e-12);
        for n in p.composite_norms() {
            assert!(n < 1e-12);
        }

        // length-1 row(1,0): P = col(1,0), C_0 = diag(0,1), C_1 = 0
        let c1 = row10_complex();
        let p = pseudo_inverse_parametrix(&c1, TOL).unwrap();
        assert!(p.ops[0].sub(&scalar_op(2, 1, &[1.0, 0.0])).unwrap().norm() < 1e-13);
        let expected_c0 = scalar_op(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!(p.residuals[0].sub(&expected_c0).unwrap().norm() < 1e-13);
        assert!(p.residuals[1].norm() < 1e-13);
    }

    #[test]
    fn pseudo_inverse_residuals_are_harmonic_projections() {
        let algebra = AlgebraDescriptor::new(vec![1, 2]).unwrap();
        for seed in 0..5 {
            let cplx = generate::random_complex_with_dims(&algebra, 2, 4, seed + 11);
            let p = pseudo_inverse_parametrix(&cplx, TOL).unwrap();
            for k in 0..cplx.num_modules() {
                let harmonic = hodge::hodge_split(&cplx, k, TOL).unwrap().harmonic;
                assert!(
                    p.residuals[k].sub(&harmonic).unwrap().norm() < 1e-9,
                    "seed {seed} k {k}"
                );
            }
        }
    }

    #[test]
    fn associated_parametrix_examples() {
        // exact complex with exact inverses
        let fix = fix_complex();
        let p = pseudo_inverse_parametrix(&fix, TOL).unwrap();
        let hat = associated_parametrix(&fix, &p.ops, None).unwrap();
        assert!(hat.max_residual_norm() < 1e-9);

        // identity inverses reproduce the parametrix when C_k = 0
        let ids: Vec<Operator> = fix.modules().iter().map(Operator::identity).collect();
        let hat2 = associated_parametrix(&fix, &p.ops, Some(&ids)).unwrap();
        for (a, b) in hat2.ops.iter().zip(&p.ops) {
            assert!(a.sub(b).unwrap().norm() < 1e-12);
        }

        // zero complex with P = 0: D_k = 0 singular
        let zero = Complex::new(
            vec![scalar_module(1), scalar_module(1)],
            vec![Operator::zero(scalar_module(1), scalar_module(1)).unwrap()],
            ComplexKind::Complex,
            DEFAULT_COMPLEX_TOL,
        )
        .unwrap();
        let p0 = pseudo_inverse_parametrix(&zero, TOL).unwrap();
        assert!(matches!(
            associated_parametrix(&zero, &p0.ops, None),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn quasicomplex_parametrix_examples() {
        let fix = fix_complex();
        let p = pseudo_inverse_parametrix(&fix, TOL).unwrap();
        let qp = quasicomplex_parametrix(&fix, &p).unwrap();
        // pseudo-inverse satisfies P t P = P
        for (a, b) in qp.parametrix.ops.iter().zip(&p.ops) {
            assert!(a.sub(b).unwrap().norm() < 1e-12);
        }
        assert!(!qp.input_residual_warning);

        // zero seed on the zero complex
        let zero = Complex::new(
            vec![scalar_module(1), scalar_module(1)],
            vec![Operator::zero(scalar_module(1), scalar_module(1)).unwrap()],
            ComplexKind::Complex,
            DEFAULT_COMPLEX_TOL,
        )
        .unwrap();
        let p0 = pseudo_inverse_parametrix(&zero, TOL).unwrap();
        let qp0 = quasicomplex_parametrix(&zero, &p0).unwrap();
        assert!(qp0.parametrix.ops[0].norm() < 1e-14);
        assert!(qp0.input_residual_warning, "residual 1 exceeds 1/2");

        // perturbed seed: output regains the quasicomplex property
        let algebra = AlgebraDescriptor::new(vec![1]).unwrap();
        let cplx = generate::random_complex_with_dims(&algebra, 3, 4, 77);
        let p = pseudo_inverse_parametrix(&cplx, TOL).unwrap();
        let mut perturbed = p.ops.clone();
        for (k, op) in perturbed.iter_mut().enumerate() {
            let noise =
                generate::random_operator(op.source(), op.target(), 1000 + k as u64).scale(c(1e-7));
            *op = op.add(&noise).unwrap();
        }
        let seeded = Parametrix::from_ops(&cplx, perturbed).unwrap();
        let qp = quasicomplex_parametrix(&cplx, &seeded).unwrap();
        for n in &qp.composite_norms {
            assert!(*n <= 1e-6, "composite norm {n}");
        }
    }

    #[test]
    fn joint_parametrix_examples() {
        let fix = fix_complex();
        let p = pseudo_inverse_parametrix(&fix, TOL).unwrap();
        let report = verify_joint_parametrix(&fix, &p.ops, &p.ops).unwrap();
        for r in &report.residual_norms {
            assert!(*r < 1e-12);
        }
        for g in &report.gamma_inverse_residuals {
            assert!(*g < 1e-12);
        }

        // Pl = Pr = 0: residual C_k = 1
        let zeros: Vec<Operator> = (0..fix.num_diffs())
            .map(|k| Operator::zero(fix.module(k + 1).clone(), fix.module(k).clone()).unwrap())
            .collect();
        let report = verify_joint_parametrix(&fix, &zeros, &zeros).unwrap();
        for r in &report.residual_norms {
            assert!((*r - 1.0).abs() < 1e-13);
        }

        // transfer construction from the bounded transform
        let (left, right) = transfer_joint_parametrix(&fix, TOL).unwrap();
        let report = verify_joint_parametrix(&fix, &left, &right).unwrap();
        for r in &report.residual_norms {
            assert!(*r < 1e-8, "transfer residual {r}");
        }
    }

    #[test]
    fn transfer_joint_parametrix_residuals_are_harmonic() {
        let algebra = AlgebraDescriptor::new(vec![2]).unwrap();
        for seed in 0..5 {
            let cplx = generate::random_complex_with_dims(&algebra, 2, 3, seed + 60);
            let (left, right) = transfer_joint_parametrix(&cplx, TOL).unwrap();
            let report = verify_joint_parametrix(&cplx, &left, &right).unwrap();
            for (k, r) in report.residual_norms.iter().enumerate() {
                let h = hodge::hodge_split(&cplx, k, TOL).unwrap().harmonic.norm();
                assert!(*r <= h + 1e-8, "seed {seed} k {k}: {r} vs harmonic {h}");
            }
        }
    }

    #[test]
    fn index_operator_examples() {
        let id = Operator::identity(&scalar_module(3));
        assert!(index_operator(&id, TOL).is_zero());

        let row = scalar_op(1, 2, &[1.0, 0.0]);
        let idx = index_operator(&row, TOL);
        assert_eq!(idx.plus(), &[1]);
        assert_eq!(idx.minus(), &[0]);

        // zero C^2 -> C^3: canonical difference [2] - [3] = -[1]
        let zero = Operator::zero(scalar_module(2), scalar_module(3)).unwrap();
        let idx = index_operator(&zero, TOL);
        assert_eq!(idx.plus(), &[0]);
        assert_eq!(idx.minus(), &[1]);
    }

    #[test]
    fn index_complex_examples() {
        assert!(index_complex(&fix_complex(), TOL).is_zero());

        let idx = index_complex(&row10_complex(), TOL);
        assert_eq!(idx.plus(), &[1]);
        assert_eq!(idx.minus(), &[0]);

        // zero complex 0 -> C -> C^2 -> C -> 0: balanced parities
        let z = Complex::new(
            vec![scalar_module(1), scalar_module(2), scalar_module(1)],
            vec![
                Operator::zero(scalar_module(1), scalar_module(2)).unwrap(),
                Operator::zero(scalar_module(2), scalar_module(1)).unwrap(),
            ],
            ComplexKind::Complex,
            DEFAULT_COMPLEX_TOL,
        )
        .unwrap();
        assert!(index_complex(&z, TOL).is_zero());

        // a single module with no differentials has index [E_0]
        let single = Complex::new(
            vec![scalar_module(3)],
            vec![],
            ComplexKind::Complex,
            DEFAULT_COMPLEX_TOL,
        )
        .unwrap();
        let idx = index_complex(&single, TOL);
        assert_eq!(idx.plus(), &[3]);
        assert_eq!(idx, euler_index(&single, TOL).unwrap());
    }

    #[test]
    fn euler_index_agrees() {
        for cplx in [fix_complex(), row10_complex()] {
            let a = index_complex(&cplx, TOL);
            let b = euler_index(&cplx, TOL).unwrap();
            let c = euler_module_index(&cplx);
            assert_eq!(a, b);
            assert_eq!(a, c);
        }
        let algebra = AlgebraDescriptor::new(vec![1, 3]).unwrap();
        for seed in 0..6 {
            let cplx = generate::random_complex_with_dims(&algebra, 3, 4, seed + 40);
            let a = index_complex(&cplx, TOL);
            let b = euler_index(&cplx, TOL).unwrap();
            let c = euler_module_index(&cplx);
            assert_eq!(a, b, "seed {seed}");
            assert_eq!(a, c, "seed {seed}");
        }
    }

    #[test]
    fn putinar_consistency() {
        // length-1: T_ev = t
        let c1 = row10_complex();
        let p = pseudo_inverse_parametrix(&c1, TOL).unwrap();
        let (t_ev, t_odd) = putinar_tev(&c1, &p).unwrap();
        assert!(t_ev.sub(c1.diff(0)).unwrap().norm() < 1e-14);
        assert!(t_odd.sub(&p.ops[0]).unwrap().norm() < 1e-14);
        assert_eq!(index_operator(&t_ev, TOL), index_complex(&c1, TOL));

        let fix = fix_complex();
        let p = pseudo_inverse_parametrix(&fix, TOL).unwrap();
        let (t_ev, t_odd) = putinar_tev(&fix, &p).unwrap();
        assert!(index_operator(&t_ev, TOL).is_zero());
        // on an exact complex the pseudo-inverse makes T_odd an exact
        // inverse of T_ev
        let id = Operator::identity(t_ev.source());
        assert!(id.sub(&t_odd.compose(&t_ev).unwrap()).unwrap().norm() < 1e-12);

        let algebra = AlgebraDescriptor::new(vec![1, 2]).unwrap();
        for seed in 0..6 {
            let cplx = generate::random_complex_with_dims(&algebra, 3, 3, seed + 700);
            let p = pseudo_inverse_parametrix(&cplx, TOL).unwrap();
            let (t_ev, _) = putinar_tev(&cplx, &p).unwrap();
            assert_eq!(
                index_operator(&t_ev, TOL),
                index_complex(&cplx, TOL),
                "seed {seed}"
            );
            // quasicomplex parametrix route
            let qp = quasicomplex_parametrix(&cplx, &p).unwrap();
            let (t_ev2, _) = putinar_tev(&cplx, &qp.parametrix).unwrap();
            assert_eq!(
                index_operator(&t_ev2, TOL),
                index_complex(&cplx, TOL),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn index_with_adjoint_of_parametrix() {
        let id = Operator::identity(&scalar_module(2));
        let rep = index_with_adjoint_of_parametrix_check(&id, &id, TOL).unwrap();
        assert!(rep.indices_equal());
        assert!(rep.index_t.is_zero());

        let t = scalar_op(1, 2, &[1.0, 0.0]);
        let p = scalar_op(2, 1, &[1.0, 0.0]);
        let rep = index_with_adjoint_of_parametrix_check(&t, &p, TOL).unwrap();
        assert!(rep.indices_equal());
        assert_eq!(rep.index_t.plus(), &[1]);

        let algebra = AlgebraDescriptor::new(vec![2, 1]).unwrap();
        for seed in 0..8 {
            let e = HilbertModule::standard(algebra.clone(), vec![3, 2]).unwrap();
            let f = HilbertModule::standard(algebra.clone(), vec![2, 3]).unwrap();
            let t = generate::random_operator(&e, &f, seed + 300);
            let p = t.pseudo_inverse(TOL);
            let rep = index_with_adjoint_of_parametrix_check(&t, &p, TOL).unwrap();
            assert!(rep.indices_equal(), "seed {seed}");
        }
    }

    #[test]
    fn kdim_and_psi_restriction() {
        let algebra2 = AlgebraDescriptor::new(vec![2]).unwrap();
        let e = HilbertModule::standard(algebra2.clone(), vec![2]).unwrap();
        let id = Operator::identity(&e);
        let psi = psi_restrict(&id).unwrap();
        assert_eq!(psi.shape(), (2, 2));

        // kdim over [1]
        let fix = fix_complex();
        assert_eq!(kdim_index(&fix, TOL).unwrap(), 0);
        assert_eq!(kdim_index(&row10_complex(), TOL).unwrap(), 1);

        // same complex re-based over [2] with the same fiber multiplicities
        let m2 = |d: usize| HilbertModule::standard(algebra2.clone(), vec![d]).unwrap();
        let re_based = Complex::new(
            vec![m2(2), m2(1)],
            vec![Operator::new(
                m2(2),
                m2(1),
                vec![CMat::from_row_slice(1, 2, &[c(1.0), c(0.0)])],
            )
            .unwrap()],
            ComplexKind::Complex,
            DEFAULT_COMPLEX_TOL,
        )
        .unwrap();
        assert_eq!(kdim_index(&re_based, TOL).unwrap(), 1);

        // multi-block algebras are rejected
        let algebra12 = AlgebraDescriptor::new(vec![1, 2]).unwrap();
        let bad = generate::random_complex_with_dims(&algebra12, 1, 2, 3);
        assert!(kdim_index(&bad, TOL).is_err());
    }

    #[test]
    fn kdim_matches_hilbert_space_index_of_psi() {
        let algebra = AlgebraDescriptor::new(vec![3]).unwrap();
        for seed in 0..6 {
            let cplx = generate::random_complex_with_dims(&algebra, 2, 4, seed + 500);
            let kdim = kdim_index(&cplx, TOL).unwrap();
            // independent oracle: classical alternating sum of cohomology
            // dims of the plain matrices, via SVD ranks
            let ranks: Vec<usize> = cplx
                .diffs()
                .iter()
                .map(|t| {
                    let m = psi_restrict(t).unwrap();
                    let sv = crate::linalg::singular_values(&m);
                    crate::linalg::rank_with_tol(&sv, m.nrows(), m.ncols(), TOL)
                })
                .collect();
            let mut classical = 0i64;
            for k in 0..cplx.num_modules() {
                let d = cplx.module(k).dim(0) as i64;
                let r_out = if k < ranks.len() { ranks[k] as i64 } else { 0 };
                let r_in = if k > 0 { ranks[k - 1] as i64 } else { 0 };
                let h = d - r_out - r_in;
                classical += if k % 2 == 0 { h } else { -h };
            }
            assert_eq!(kdim, classical, "seed {seed}");
        }
    }

    #[test]
    fn chain_map_and_homotopy() {
        let fix = fix_complex();
        let id = ChainMap::identity(&fix);
        assert!(id.max_commutation_residual() < 1e-14);

        // induced map of the identity is the harmonic projection itself
        let induced = induced_cohomology_map(&fix, &fix, &id, TOL).unwrap();
        for (k, op) in induced.iter().enumerate() {
            let h = hodge::hodge_split(&fix, k, TOL).unwrap().harmonic;
            assert!(op.sub(&h).unwrap().norm() < 1e-12);
        }

        // zero maps and zero homotopy
        let zero_maps: Vec<Operator> = fix
            .modules()
            .iter()
            .map(|m| Operator::zero(m.clone(), m.clone()).unwrap())
            .collect();
        let z = ChainMap::new(&fix, &fix, zero_maps).unwrap();
        let zero_homotopy: Vec<Operator> = (0..fix.num_diffs())
            .map(|k| Operator::zero(fix.module(k + 1).clone(), fix.module(k).clone()).unwrap())
            .collect();
        let residuals = chain_homotopy_check(&fix, &fix, &z, &z, &zero_homotopy).unwrap();
        for r in residuals {
            assert!(r < 1e-14);
        }
    }

    #[test]
    fn homotopic_maps_induce_equal_harmonic_maps() {
        let algebra = AlgebraDescriptor::new(vec![1, 2]).unwrap();
        for seed in 0..5 {
            let cplx = generate::random_complex_with_dims(&algebra, 2, 4, seed + 900);
            let g = ChainMap::identity(&cplx);
            // h = g - (p t + s p) for random p
            let homotopy: Vec<Operator> = (0..cplx.num_diffs())
                .map(|k| {
                    generate::random_operator(
                        cplx.module(k + 1),
                        cplx.module(k),
                        seed * 17 + k as u64,
                    )
                })
                .collect();
            let h_maps: Vec<Operator> = (0..cplx.num_modules())
                .map(|k| {
                    let mut rhs =
                        Operator::zero(cplx.module(k).clone(), cplx.module(k).clone()).unwrap();
                    if k < cplx.num_diffs() {
                        rhs = rhs
                            .add(&homotopy[k].compose(cplx.diff(k)).unwrap())
                            .unwrap();
                    }
                    if k >= 1 {
                        rhs = rhs
                            .add(&cplx.diff(k - 1).compose(&homotopy[k - 1]).unwrap())
                            .unwrap();
                    }
                    g.maps[k].sub(&rhs).unwrap()
                })
                .collect();
            let h = ChainMap::new(&cplx, &cplx, h_maps).unwrap();
            assert!(h.max_commutation_residual() < 1e-8, "h is a chain map");
            let residuals = chain_homotopy_check(&cplx, &cplx, &g, &h, &homotopy).unwrap();
            for r in &residuals {
                assert!(*r < 1e-10);
            }
            let ig = induced_cohomology_map(&cplx, &cplx, &g, TOL).unwrap();
            let ih = induced_cohomology_map(&cplx, &cplx, &h, TOL).unwrap();
            for (a, b) in ig.iter().zip(&ih) {
                assert!(a.sub(b).unwrap().norm() < 1e-8, "seed {seed}");
            }
        }
    }

    #[test]
    fn ses_split_case_and_conjugated_case() {
        let algebra = AlgebraDescriptor::new(vec![1, 2]).unwrap();
        for seed in 0..4 {
            let t = generate::random_complex_with_dims(&algebra, 2, 3, seed + 1200);
            let v = generate::random_complex_with_dims(&algebra, 2, 3, seed + 1300);
            // middle = T ⊕ V with canonical injection and projection
            let (middle, inj, proj) = split_middle(&t, &v);
            let g = ChainMap::new(&t, &middle, inj.clone()).unwrap();
            let h = ChainMap::new(&middle, &v, proj.clone()).unwrap();
            let report = ses_index_check(&t, &middle, &v, &g, &h, TOL).unwrap();
            assert!(report.alternating_sum_is_zero().unwrap(), "seed {seed}");
            for idx in &report.rung_indices {
                assert!(idx.is_zero());
            }
            assert!(report.min_rung_laplace_gamma > 1e-6);

            // conjugate the split middle with unitaries W_k: the sequence
            // 0 -> T -> W(T⊕V) -> V -> 0 stays exact with the same indices
            let mut rng = generate::rng(seed + 4242);
            let unitaries: Vec<Operator> = middle
                .modules()
                .iter()
                .map(|m| generate::near_identity_unitary(m, 1.2, &mut rng))
                .collect();
            let conj_diffs: Vec<Operator> = (0..middle.num_diffs())
                .map(|k| {
                    unitaries[k + 1]
                        .compose(middle.diff(k))
                        .unwrap()
                        .compose(&unitaries[k].adjoint())
                        .unwrap()
                })
                .collect();
            let conj_middle = Complex::new(
                middle.modules().to_vec(),
                conj_diffs,
                ComplexKind::Complex,
                1e-8,
            )
            .unwrap();
            let conj_inj: Vec<Operator> = inj
                .iter()
                .zip(&unitaries)
                .map(|(e, w)| w.compose(e).unwrap())
                .collect();
            let conj_proj: Vec<Operator> = proj
                .iter()
                .zip(&unitaries)
                .map(|(p, w)| p.compose(&w.adjoint()).unwrap())
                .collect();
            let g = ChainMap::new(&t, &conj_middle, conj_inj).unwrap();
            let h = ChainMap::new(&conj_middle, &v, conj_proj).unwrap();
            let report = ses_index_check(&t, &conj_middle, &v, &g, &h, TOL).unwrap();
            assert!(
                report.alternating_sum_is_zero().unwrap(),
                "seed {seed} conjugated"
            );
        }
    }

    /// Builds `T ⊕ V` with its canonical injection/projection chain maps.
    fn split_middle(t: &Complex, v: &Complex) -> (Complex, Vec<Operator>, Vec<Operator>) {
        let modules: Vec<HilbertModule> = t
            .modules()
            .iter()
            .zip(v.modules())
            .map(|(a, b)| a.direct_sum(b).unwrap())
            .collect();
        let algebra = t.algebra();
        let mut diffs = Vec::new();
        for k in 0..t.num_diffs() {
            let parts = [t.diff(k).clone(), v.diff(k).clone()];
            let sources = [t.module(k).clone(), v.module(k).clone()];
            let targets = [t.module(k + 1).clone(), v.module(k + 1).clone()];
            diffs.push(crate::complex::block_diagonal_general(
                algebra, &parts, &sources, &targets,
            ));
        }
        let middle = Complex::new(modules, diffs, ComplexKind::Complex, 1e-8).unwrap();
        let mut inj = Vec::new();
        let mut proj = Vec::new();
        for k in 0..t.num_modules() {
            let summands = [t.module(k).clone(), v.module(k).clone()];
            let e = crate::complex::summand_embedding(algebra, &summands, 0);
            let e2 = crate::complex::summand_embedding(algebra, &summands, 1);
            inj.push(e);
            proj.push(e2.adjoint());
        }
        (middle, inj, proj)
    }
}
