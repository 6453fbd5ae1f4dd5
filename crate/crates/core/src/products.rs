//! Direct sums and (minimal) tensor products of complexes, sign
//! operators, the sharp Dirac operator, and their index identities.
//!
//! Tensor conventions: the block map of `A ⊗ B` lists pairs `(iA, iB)`
//! with the left factor outer; Kronecker products put the left factor's
//! indices outer as well. Within a total degree `k`, the summands `L_j ⊗
//! M_i` with `j + i = k` are ordered with `j` descending, matching the
//! displayed length-one diagram with the middle term `(L_1 ⊗ M_0) ⊕ (L_0
//! ⊗ M_1)`. The sign operators are `σ_j = (-1)^j`.

use crate::algebra::AlgebraDescriptor;
use crate::complex::{block_diagonal_general, Complex, ComplexKind};
use crate::error::{Error, Result};
use crate::fredholm::Parametrix;
use crate::linalg;
use crate::module::HilbertModule;
use crate::operator::Operator;
use num_complex::Complex64;

/// Direct sum of two complexes over the same algebra, padding the
/// shorter one with zero modules on the right.
pub fn direct_sum_complex(a: &Complex, b: &Complex) -> Result<Complex> {
    if a.algebra() != b.algebra() {
        return Err(Error::AlgebraMismatch(
            "direct sum of complexes over different algebras".into(),
        ));
    }
    let algebra = a.algebra().clone();
    let n = a.num_modules().max(b.num_modules());
    let pad = |c: &Complex, k: usize| -> HilbertModule {
        if k < c.num_modules() {
            c.module(k).clone()
        } else {
            HilbertModule::zero(algebra.clone())
        }
    };
    let pad_diff = |c: &Complex, k: usize| -> Operator {
        if k < c.num_diffs() {
            c.diff(k).clone()
        } else {
            Operator::zero(pad(c, k), pad(c, k + 1)).expect("zero operator")
        }
    };
    let modules: Vec<HilbertModule> = (0..n)
        .map(|k| pad(a, k).direct_sum(&pad(b, k)).expect("same algebra"))
        .collect();
    let diffs: Vec<Operator> = (0..n - 1)
        .map(|k| {
            let parts = [pad_diff(a, k), pad_diff(b, k)];
            let sources = [pad(a, k), pad(b, k)];
            let targets = [pad(a, k + 1), pad(b, k + 1)];
            block_diagonal_general(&algebra, &parts, &sources, &targets)
        })
        .collect();
    let kind = if a.kind() == ComplexKind::Complex && b.kind() == ComplexKind::Complex {
        ComplexKind::Complex
    } else {
        ComplexKind::Quasicomplex
    };
    Complex::new(modules, diffs, kind, a.tol_complex().max(b.tol_complex()))
}

/// Kronecker block sizes of `A ⊗ B`, pairs `(iA, iB)` in lexicographic
/// order with the left factor outer.
pub fn tensor_algebra(a: &AlgebraDescriptor, b: &AlgebraDescriptor) -> AlgebraDescriptor {
    let mut blocks = Vec::with_capacity(a.num_blocks() * b.num_blocks());
    for &na in a.block_sizes() {
        for &nb in b.block_sizes() {
            blocks.push(na * nb);
        }
    }
    AlgebraDescriptor::new(blocks).expect("nonempty, positive")
}

/// `L ⊗ M` as a module over `A ⊗ B`: fiber multiplicities multiply per
/// paired block, Grams are Kronecker products.
pub fn tensor_module(l: &HilbertModule, m: &HilbertModule) -> HilbertModule {
    let algebra = tensor_algebra(l.algebra(), m.algebra());
    let mut dims = Vec::with_capacity(algebra.num_blocks());
    for i in 0..l.num_blocks() {
        for j in 0..m.num_blocks() {
            dims.push(l.dim(i) * m.dim(j));
        }
    }
    if l.has_default_grams() && m.has_default_grams() {
        return HilbertModule::standard(algebra, dims).expect("shapes agree");
    }
    let mut grams = Vec::with_capacity(algebra.num_blocks());
    for i in 0..l.num_blocks() {
        for j in 0..m.num_blocks() {
            grams.push(linalg::kron(&l.gram(i), &m.gram(j)));
        }
    }
    HilbertModule::with_grams(algebra, dims, grams).expect("kron of positive is positive")
}

/// `S ⊗ T` as an operator between tensor modules.
pub fn tensor_operator(s: &Operator, t: &Operator) -> Operator {
    let source = tensor_module(s.source(), t.source());
    let target = tensor_module(s.target(), t.target());
    let mut blocks = Vec::with_capacity(source.num_blocks());
    for i in 0..s.num_blocks() {
        for j in 0..t.num_blocks() {
            blocks.push(linalg::kron(s.block(i), t.block(j)));
        }
    }
    Operator::new(source, target, blocks).expect("kron shapes agree")
}

/// The layout of a tensor-product complex: for each total degree, the
/// ordered `(j, i)` pairs (left degree descending), and the block map of
/// the tensor algebra.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TensorLayout {
    /// `degree_map[k]` lists the `(j, i)` summands of total degree `k`.
    pub degree_map: Vec<Vec<(usize, usize)>>,
    /// Pairs `(iA, iB)` labelling the blocks of `A ⊗ B`.
    pub block_map: Vec<(usize, usize)>,
}

impl TensorLayout {
    pub fn new(left: &Complex, right: &Complex) -> Self {
        let total = left.num_modules() + right.num_modules() - 1;
        let degree_map = (0..total)
            .map(|k| {
                let mut pairs = Vec::new();
                for j in (0..left.num_modules()).rev() {
                    if k >= j {
                        let i = k - j;
                        if i < right.num_modules() {
                            pairs.push((j, i));
                        }
                    }
                }
                pairs
            })
            .collect();
        let mut block_map = Vec::new();
        for ia in 0..left.algebra().num_blocks() {
            for ib in 0..right.algebra().num_blocks() {
                block_map.push((ia, ib));
            }
        }
        Self {
            degree_map,
            block_map,
        }
    }
}

/// The tensor product of two complexes: modules `E_k = ⊕_{j+i=k} L_j ⊗
/// M_i` and differentials `T_k = ⊕ (R_j ⊗ 1 + σ_j ⊗ S_i)` with `σ_j =
/// (-1)^j`.
pub fn tensor_complex(left: &Complex, right: &Complex) -> Result<(Complex, TensorLayout)> {
    if left.kind() != ComplexKind::Complex || right.kind() != ComplexKind::Complex {
        return Err(Error::Unsupported(
            "tensor products require kind = complex".into(),
        ));
    }
    let layout = TensorLayout::new(left, right);
    let algebra = tensor_algebra(left.algebra(), right.algebra());
    let summand = |j: usize, i: usize| tensor_module(left.module(j), right.module(i));

    let modules: Vec<HilbertModule> = layout
        .degree_map
        .iter()
        .map(|pairs| {
            let mut acc = HilbertModule::zero(algebra.clone());
            for &(j, i) in pairs {
                acc = acc.direct_sum(&summand(j, i))?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut diffs = Vec::with_capacity(modules.len() - 1);
    for k in 0..modules.len() - 1 {
        let cols: Vec<HilbertModule> = layout.degree_map[k]
            .iter()
            .map(|&(j, i)| summand(j, i))
            .collect();
        let rows: Vec<HilbertModule> = layout.degree_map[k + 1]
            .iter()
            .map(|&(j, i)| summand(j, i))
            .collect();
        let grid = crate::complex::assemble_grid(&algebra, &cols, &rows, |r, c| {
            let (j, i) = layout.degree_map[k][c];
            let (jt, it) = layout.degree_map[k + 1][r];
            if jt == j + 1 && it == i {
                // R_j ⊗ 1_{M_i}
                Some(tensor_operator(
                    left.diff(j),
                    &Operator::identity(right.module(i)),
                ))
            } else if jt == j && it == i + 1 {
                // σ_j ⊗ S_i
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                Some(
                    tensor_operator(&Operator::identity(left.module(j)), right.diff(i))
                        .scale(Complex64::new(sign, 0.0)),
                )
            } else {
                None
            }
        });
        // reshape the grid operator onto the flattened module list
        diffs.push(Operator::new(
            modules[k].clone(),
            modules[k + 1].clone(),
            grid.blocks().to_vec(),
        )?);
    }
    let complex = Complex::new(modules, diffs, ComplexKind::Complex, 1e-9)?;
    Ok((complex, layout))
}

/// The tensor parametrix `P_k = ⊕ (P̂_j ⊗ 1_{M_i} + σ_j Ĉ_j ⊗ P̃_i)`,
/// whose residual is exactly `⊕ Ĉ_j ⊗ C̃_i`.
pub fn tensor_parametrix(
    left: &Complex,
    left_parametrix: &Parametrix,
    right: &Complex,
    right_parametrix: &Parametrix,
) -> Result<(Parametrix, Operator)> {
    let (product, layout) = tensor_complex(left, right)?;
    let algebra = product.algebra().clone();
    let summand = |j: usize, i: usize| tensor_module(left.module(j), right.module(i));

    let mut ops = Vec::with_capacity(product.num_diffs());
    for k in 0..product.num_diffs() {
        let cols: Vec<HilbertModule> = layout.degree_map[k + 1]
            .iter()
            .map(|&(j, i)| summand(j, i))
            .collect();
        let rows: Vec<HilbertModule> = layout.degree_map[k]
            .iter()
            .map(|&(j, i)| summand(j, i))
            .collect();
        let grid = crate::complex::assemble_grid(&algebra, &cols, &rows, |r, c| {
            let (js, is) = layout.degree_map[k + 1][c];
            let (jt, it) = layout.degree_map[k][r];
            if js == jt + 1 && is == it {
                // P̂_j ⊗ 1_{M_i} : L_{j+1} ⊗ M_i → L_j ⊗ M_i
                Some(tensor_operator(
                    &left_parametrix.ops[jt],
                    &Operator::identity(right.module(it)),
                ))
            } else if js == jt && is == it + 1 {
                // σ_j Ĉ_j ⊗ P̃_i : L_j ⊗ M_{i+1} → L_j ⊗ M_i
                let sign = if jt % 2 == 0 { 1.0 } else { -1.0 };
                Some(
                    tensor_operator(&left_parametrix.residuals[jt], &right_parametrix.ops[it])
                        .scale(Complex64::new(sign, 0.0)),
                )
            } else {
                None
            }
        });
        ops.push(Operator::new(
            product.module(k + 1).clone(),
            product.module(k).clone(),
            grid.blocks().to_vec(),
        )?);
    }
    let parametrix = Parametrix::from_ops(&product, ops)?;

    // predicted residual at each degree: ⊕ Ĉ_j ⊗ C̃_i, block-diagonal
    // over the (j, i) summands; assembled over all degrees for a single
    // comparison operator
    let mut predicted_parts: Vec<Operator> = Vec::new();
    let mut predicted_mods: Vec<HilbertModule> = Vec::new();
    for pairs in &layout.degree_map {
        for &(j, i) in pairs {
            predicted_parts.push(tensor_operator(
                &left_parametrix.residuals[j],
                &right_parametrix.residuals[i],
            ));
            predicted_mods.push(summand(j, i));
        }
    }
    let predicted =
        block_diagonal_general(&algebra, &predicted_parts, &predicted_mods, &predicted_mods);
    Ok((parametrix, predicted))
}

/// Residual of the tensor-parametrix identity: `‖(1 - (P T + T P)) - ⊕
/// Ĉ_j ⊗ C̃_i‖`, maximized over degrees.
pub fn tensor_parametrix_residual(
    product: &Complex,
    parametrix: &Parametrix,
    predicted: &Operator,
) -> Result<f64> {
    // the predicted operator is block-diagonal over all (degree, pair)
    // summands in order; slice it per degree by offset
    let mut max_resid: f64 = 0.0;
    let algebra = product.algebra();
    let mut offsets = vec![0usize; algebra.num_blocks()];
    for k in 0..product.num_modules() {
        let module = product.module(k);
        let mut blocks = Vec::with_capacity(algebra.num_blocks());
        for b in 0..algebra.num_blocks() {
            let d = module.dim(b);
            let view = predicted
                .block(b)
                .view((offsets[b], offsets[b]), (d, d))
                .into_owned();
            offsets[b] += d;
            blocks.push(view);
        }
        let predicted_k = Operator::new(module.clone(), module.clone(), blocks)?;
        max_resid = max_resid.max(parametrix.residuals[k].sub(&predicted_k)?.norm());
    }
    Ok(max_resid)
}

/// The sharp Dirac operator of two complexes, together with the layout
/// unitaries: `V* D+_T U = D+_R # D+_S`.
#[derive(Debug, Clone)]
pub struct SharpDirac {
    pub sharp: Operator,
    /// `U : (L_ev ⊗ M_ev) ⊕ (L_odd ⊗ M_odd) → E_ev(T)`.
    pub u: Operator,
    /// `V : (L_odd ⊗ M_ev) ⊕ (L_ev ⊗ M_odd) → E_odd(T)`.
    pub v: Operator,
    /// `‖V* D+_T U - D#‖`.
    pub intertwine_residual: f64,
}

pub fn sharp_dirac(left: &Complex, right: &Complex) -> Result<SharpDirac> {
    let (product, layout) = tensor_complex(left, right)?;
    let dirac_t = product.dirac();
    let dirac_r = left.dirac();
    let dirac_s = right.dirac();

    let l_ev = left.even_module();
    let l_odd = left.odd_module();
    let m_ev = right.even_module();
    let m_odd = right.odd_module();

    // D# = [[D+_R ⊗ 1,  -1 ⊗ D-_S], [1 ⊗ D+_S,  D-_R ⊗ 1]]
    let a = tensor_operator(&dirac_r.even, &Operator::identity(&m_ev));
    let b =
        tensor_operator(&Operator::identity(&l_odd), &dirac_s.odd).scale(Complex64::new(-1.0, 0.0));
    let c = tensor_operator(&Operator::identity(&l_ev), &dirac_s.even);
    let d = tensor_operator(&dirac_r.odd, &Operator::identity(&m_odd));

    let src1 = tensor_module(&l_ev, &m_ev);
    let src2 = tensor_module(&l_odd, &m_odd);
    let tgt1 = tensor_module(&l_odd, &m_ev);
    let tgt2 = tensor_module(&l_ev, &m_odd);
    let algebra = product.algebra().clone();
    let sharp = crate::complex::assemble_grid(
        &algebra,
        &[src1.clone(), src2.clone()],
        &[tgt1.clone(), tgt2.clone()],
        |r, cdx| match (r, cdx) {
            (0, 0) => Some(a.clone()),
            (0, 1) => Some(b.clone()),
            (1, 0) => Some(c.clone()),
            (1, 1) => Some(d.clone()),
            _ => None,
        },
    );

    let u = layout_unitary(left, right, &layout, &product, Parity::Even)?;
    let v = layout_unitary(left, right, &layout, &product, Parity::Odd)?;
    let intertwine_residual = v
        .adjoint()
        .compose(&dirac_t.even)?
        .compose(&u)?
        .sub(&sharp_rebased(&sharp, &u, &v)?)?
        .norm();
    Ok(SharpDirac {
        sharp,
        u,
        v,
        intertwine_residual,
    })
}

enum Parity {
    Even,
    Odd,
}

/// `V* D+_T U` lives on the parity-split tensor modules; rebase the
/// assembled sharp operator onto the same source/target so the two can
/// be subtracted.
fn sharp_rebased(sharp: &Operator, u: &Operator, v: &Operator) -> Result<Operator> {
    Operator::new(
        u.source().clone(),
        v.source().clone(),
        sharp.blocks().to_vec(),
    )
}

/// Builds the permutation unitary from the parity-split Kronecker layout
/// onto the degree-graded layout of the tensor complex.
///
/// Even: `(L_ev ⊗ M_ev) ⊕ (L_odd ⊗ M_odd) → ⊕_{k even} ⊕_{j+i=k} L_j ⊗
/// M_i`; odd analogously with `(L_odd ⊗ M_ev) ⊕ (L_ev ⊗ M_odd)`.
fn layout_unitary(
    left: &Complex,
    right: &Complex,
    layout: &TensorLayout,
    product: &Complex,
    parity: Parity,
) -> Result<Operator> {
    let (l_first, m_first, l_second, m_second, product_indices) = match parity {
        Parity::Even => (
            left.even_indices(),
            right.even_indices(),
            left.odd_indices(),
            right.odd_indices(),
            product.even_indices(),
        ),
        Parity::Odd => (
            left.odd_indices(),
            right.even_indices(),
            left.even_indices(),
            right.odd_indices(),
            product.odd_indices(),
        ),
    };

    let source_first = tensor_module(
        &crate::complex::direct_sum_modules(
            left.algebra(),
            l_first.iter().map(|&j| left.module(j)),
        ),
        &crate::complex::direct_sum_modules(
            right.algebra(),
            m_first.iter().map(|&i| right.module(i)),
        ),
    );
    let source_second = tensor_module(
        &crate::complex::direct_sum_modules(
            left.algebra(),
            l_second.iter().map(|&j| left.module(j)),
        ),
        &crate::complex::direct_sum_modules(
            right.algebra(),
            m_second.iter().map(|&i| right.module(i)),
        ),
    );
    let source = source_first.direct_sum(&source_second)?;
    let target = crate::complex::direct_sum_modules(
        product.algebra(),
        product_indices.iter().map(|&k| product.module(k)),
    );

    let algebra = product.algebra();
    let mut blocks = Vec::with_capacity(algebra.num_blocks());
    for (bidx, &(ba, bb)) in layout.block_map.iter().enumerate() {
        let rows = target.dim(bidx);
        let cols = source.dim(bidx);
        let mut mat = linalg::zeros(rows, cols);

        // target offsets: for each product degree k (restricted to the
        // parity), for each (j, i) pair, for each (row of L_j, row of M_i)
        let mut target_offset_of = std::collections::HashMap::new();
        {
            let mut off = 0usize;
            for &k in &product_indices {
                for &(j, i) in &layout.degree_map[k] {
                    let dl = left.module(j).dim(ba);
                    let dm = right.module(i).dim(bb);
                    target_offset_of.insert((j, i), off);
                    off += dl * dm;
                }
            }
        }

        // source offsets: first summand (l_first ⊗ m_first as one
        // Kronecker of direct sums), then second
        let mut col = 0usize;
        let mut fill = |l_list: &[usize], m_list: &[usize], col: &mut usize| {
            let m_total: usize = m_list.iter().map(|&i| right.module(i).dim(bb)).sum();
            let _ = m_total;
            for &j in l_list {
                for lr in 0..left.module(j).dim(ba) {
                    for &i in m_list {
                        for mr in 0..right.module(i).dim(bb) {
                            let dm = right.module(i).dim(bb);
                            let row = target_offset_of[&(j, i)] + lr * dm + mr;
                            mat[(row, *col)] = Complex64::new(1.0, 0.0);
                            *col += 1;
                        }
                    }
                }
            }
        };
        fill(&l_first, &m_first, &mut col);
        fill(&l_second, &m_second, &mut col);
        debug_assert_eq!(col, cols);
        blocks.push(mat);
    }
    Operator::new(source, target, blocks)
}
