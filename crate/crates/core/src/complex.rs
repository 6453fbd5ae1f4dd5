//! Complexes and quasicomplexes of Hilbert C*-modules, derived
//! complexes, and the Dirac and Laplace operators.
//!
//! A complex holds modules `E_0 … E_{N+1}` and differentials
//! `t_k : E_k → E_{k+1}` for `k = 0 … N`, with `t_k = 0` outside that
//! range. `kind = Quasicomplex` drops the requirement that consecutive
//! compositions vanish (every operator here is compact, so any sequence
//! qualifies); the composite norms are still recorded.

use crate::error::{Error, Result};
use crate::linalg;
use crate::module::HilbertModule;
use crate::operator::Operator;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComplexKind {
    Complex,
    Quasicomplex,
}

/// A finite sequence of modules and differentials.
#[derive(Debug, Clone)]
pub struct Complex {
    modules: Vec<HilbertModule>,
    diffs: Vec<Operator>,
    kind: ComplexKind,
    tol_complex: f64,
    /// `‖t_{k+1} t_k‖` for each consecutive pair.
    composite_norms: Vec<f64>,
}

impl Complex {
    pub fn new(
        modules: Vec<HilbertModule>,
        diffs: Vec<Operator>,
        kind: ComplexKind,
        tol_complex: f64,
    ) -> Result<Self> {
        if modules.is_empty() {
            return Err(Error::ShapeMismatch(
                "a complex needs at least one module".into(),
            ));
        }
        if diffs.len() + 1 != modules.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} modules require {} differentials, got {}",
                modules.len(),
                modules.len() - 1,
                diffs.len()
            )));
        }
        let algebra = modules[0].algebra();
        if modules.iter().any(|m| m.algebra() != algebra) {
            return Err(Error::AlgebraMismatch(
                "all modules must share one algebra".into(),
            ));
        }
        for (k, t) in diffs.iter().enumerate() {
            if t.source() != &modules[k] || t.target() != &modules[k + 1] {
                return Err(Error::ShapeMismatch(format!(
                    "differential {k} does not map E_{k} to E_{}",
                    k + 1
                )));
            }
        }
        let mut composite_norms = Vec::new();
        for k in 0..diffs.len().saturating_sub(1) {
            let norm = diffs[k + 1].compose(&diffs[k])?.norm();
            if kind == ComplexKind::Complex {
                let bound = tol_complex * (1.0 + diffs[k + 1].norm() * diffs[k].norm());
                if norm > bound {
                    return Err(Error::ComplexProperty {
                        k,
                        norm,
                        tol: bound,
                    });
                }
            }
            composite_norms.push(norm);
        }
        Ok(Self {
            modules,
            diffs,
            kind,
            tol_complex,
            composite_norms,
        })
    }

    pub fn modules(&self) -> &[HilbertModule] {
        &self.modules
    }

    pub fn diffs(&self) -> &[Operator] {
        &self.diffs
    }

    pub fn kind(&self) -> ComplexKind {
        self.kind
    }

    pub fn tol_complex(&self) -> f64 {
        self.tol_complex
    }

    pub fn composite_norms(&self) -> &[f64] {
        &self.composite_norms
    }

    pub fn algebra(&self) -> &crate::algebra::AlgebraDescriptor {
        self.modules[0].algebra()
    }

    /// Number of differentials (N + 1 for modules E_0 … E_{N+1}).
    pub fn num_diffs(&self) -> usize {
        self.diffs.len()
    }

    pub fn num_modules(&self) -> usize {
        self.modules.len()
    }

    pub fn module(&self, k: usize) -> &HilbertModule {
        &self.modules[k]
    }

    pub fn diff(&self, k: usize) -> &Operator {
        &self.diffs[k]
    }

    /// `t_k`, or the zero operator on the right boundary modules when `k`
    /// is out of range.
    fn diff_term(&self, k: isize) -> Option<&Operator> {
        if k < 0 || k as usize >= self.diffs.len() {
            None
        } else {
            Some(&self.diffs[k as usize])
        }
    }

    /// `Q_{t_k}` on `E_k`; identity when `t_k` is a boundary zero.
    pub fn resolvent(&self, k: usize) -> Operator {
        if k < self.diffs.len() {
            self.diffs[k].resolvent_sqrt()
        } else {
            Operator::identity(&self.modules[k])
        }
    }

    /// `Q_{t_{k-1}^*}` on `E_k`; identity at the left boundary.
    pub fn resolvent_star(&self, k: usize) -> Operator {
        if k >= 1 && k - 1 < self.diffs.len() {
            self.diffs[k - 1].adjoint().resolvent_sqrt()
        } else {
            Operator::identity(&self.modules[k])
        }
    }

    /// Bounded transform `F_{t_k}`; zero at boundaries.
    fn bt_diff(&self, k: isize) -> Option<Operator> {
        self.diff_term(k).map(|t| t.bounded_transform().f)
    }

    /// Even-degree modules `E_0, E_2, …` in ascending order.
    pub fn even_indices(&self) -> Vec<usize> {
        (0..self.num_modules()).filter(|k| k % 2 == 0).collect()
    }

    pub fn odd_indices(&self) -> Vec<usize> {
        (0..self.num_modules()).filter(|k| k % 2 == 1).collect()
    }

    pub fn even_module(&self) -> HilbertModule {
        direct_sum_modules(
            self.algebra(),
            self.even_indices().iter().map(|&k| &self.modules[k]),
        )
    }

    pub fn odd_module(&self) -> HilbertModule {
        direct_sum_modules(
            self.algebra(),
            self.odd_indices().iter().map(|&k| &self.modules[k]),
        )
    }

    /// The even and odd Dirac operators: the bidiagonal roll-up with
    /// `t_{2k}` on the diagonal and `t_{2k+1}^*` on the superdiagonal.
    pub fn dirac(&self) -> DiracPair {
        let even_idx = self.even_indices();
        let odd_idx = self.odd_indices();
        let adjoints: Vec<Option<Operator>> = odd_idx
            .iter()
            .map(|&j| self.diff_term(j as isize).map(|t| t.adjoint()))
            .collect();
        let even = assemble_block_operator(self, &even_idx, &odd_idx, |row, col| {
            // row indexes E_{2row+1}, col indexes E_{2col}
            if col == row {
                self.diff_term(2 * row as isize).cloned()
            } else if col == row + 1 {
                adjoints[row].clone()
            } else {
                None
            }
        });
        let odd = even.adjoint();
        DiracPair { even, odd }
    }

    /// The k-th Laplace operator `t_k^* t_k + t_{k-1} t_{k-1}^*` on `E_k`.
    pub fn laplace_k(&self, k: usize) -> Result<Operator> {
        if k >= self.num_modules() {
            return Err(Error::IndexOutOfRange(format!(
                "laplace index {k} of {} modules",
                self.num_modules()
            )));
        }
        let mut delta = Operator::zero(self.modules[k].clone(), self.modules[k].clone())?;
        if let Some(t) = self.diff_term(k as isize) {
            delta = delta.add(&t.adjoint().compose(t)?)?;
        }
        if let Some(t) = self.diff_term(k as isize - 1) {
            delta = delta.add(&t.compose(&t.adjoint())?)?;
        }
        Ok(delta)
    }

    pub fn laplace(&self) -> Vec<Operator> {
        (0..self.num_modules())
            .map(|k| self.laplace_k(k).expect("k in range"))
            .collect()
    }

    /// Block-diagonal `⊕ Δ_{2k}` on the even module.
    pub fn laplace_even(&self) -> Operator {
        let idx = self.even_indices();
        let parts: Vec<Operator> = idx.iter().map(|&k| self.laplace_k(k).unwrap()).collect();
        block_diagonal(self, &idx, &parts)
    }

    pub fn laplace_odd(&self) -> Operator {
        let idx = self.odd_indices();
        let parts: Vec<Operator> = idx.iter().map(|&k| self.laplace_k(k).unwrap()).collect();
        block_diagonal(self, &idx, &parts)
    }

    /// The adjoint complex: reversed modules with differentials
    /// `t_{N-j}^*`, re-indexed as a cochain complex.
    pub fn adjoint_complex(&self) -> Complex {
        let n = self.num_diffs();
        let modules: Vec<HilbertModule> = self.modules.iter().rev().cloned().collect();
        let diffs: Vec<Operator> = (0..n).map(|j| self.diffs[n - 1 - j].adjoint()).collect();
        Complex::new(modules, diffs, self.kind, self.tol_complex)
            .expect("adjoint of a valid complex is valid")
    }

    /// The bounded transform complex, with differentials `F_{t_k}`.
    pub fn bounded_transform_complex(&self) -> Result<Complex> {
        if self.kind != ComplexKind::Complex {
            return Err(Error::Unsupported(
                "bounded transform complex requires kind = complex".into(),
            ));
        }
        let diffs: Vec<Operator> = self.diffs.iter().map(|t| t.bounded_transform().f).collect();
        Complex::new(
            self.modules.clone(),
            diffs,
            self.kind,
            self.tol_complex.max(1e-9),
        )
    }

    /// The graph-norm complex: modules carry the graph inner-products
    /// `G_k = 1 + t_k^* t_k`, differentials keep their matrices.
    pub fn graph_norm_complex(&self) -> Result<Complex> {
        if self.kind != ComplexKind::Complex {
            return Err(Error::Unsupported(
                "graph-norm complex requires kind = complex".into(),
            ));
        }
        if self.modules.iter().any(|m| !m.has_default_grams()) {
            return Err(Error::Unsupported(
                "graph-norm complex requires modules with the standard inner product".into(),
            ));
        }
        let mut graph_modules = Vec::with_capacity(self.num_modules());
        for k in 0..self.num_modules() {
            if k < self.diffs.len() {
                graph_modules.push(self.modules[k].graph_module(&self.diffs[k])?);
            } else {
                graph_modules.push(self.modules[k].clone());
            }
        }
        let diffs: Vec<Operator> = (0..self.num_diffs())
            .map(|k| {
                Operator::new(
                    graph_modules[k].clone(),
                    graph_modules[k + 1].clone(),
                    self.diffs[k].blocks().to_vec(),
                )
                .expect("same matrices, same fibers")
            })
            .collect();
        Complex::new(graph_modules, diffs, self.kind, self.tol_complex.max(1e-9))
    }

    /// Residual norms for the resolvent-sequence relations, the
    /// Dirac/Laplace factorizations, and the derived-complex
    /// intertwinings.
    pub fn structural_checks(&self) -> Result<StructuralReport> {
        if self.kind != ComplexKind::Complex {
            return Err(Error::Unsupported(
                "structural checks require kind = complex".into(),
            ));
        }
        let mut entries: Vec<(String, f64)> = Vec::new();
        let n_modules = self.num_modules();

        let q: Vec<Operator> = (0..n_modules).map(|k| self.resolvent(k)).collect();
        let q_star: Vec<Operator> = (0..n_modules).map(|k| self.resolvent_star(k)).collect();
        let f: Vec<Option<Operator>> = (0..n_modules).map(|k| self.bt_diff(k as isize)).collect();

        for k in 0..n_modules {
            let id = Operator::identity(&self.modules[k]);
            let q2 = q[k].compose(&q[k])?;
            let qs2 = q_star[k].compose(&q_star[k])?;

            // (ii) commutation
            let comm = q[k]
                .compose(&q_star[k])?
                .sub(&q_star[k].compose(&q[k])?)?
                .norm();
            entries.push((format!("q_commutation_{k}"), comm));

            // (i) Q_k^2 Q_{(k-1)*}^2 = 1 - F_k^* F_k - F_{k-1} F_{k-1}^*
            let mut rhs = id.clone();
            if let Some(fk) = &f[k] {
                rhs = rhs.sub(&fk.adjoint().compose(fk)?)?;
            }
            if k >= 1 {
                if let Some(fk1) = &f[k - 1] {
                    rhs = rhs.sub(&fk1.compose(&fk1.adjoint())?)?;
                }
            }
            let lhs = q2.compose(&qs2)?;
            entries.push((format!("resolvent_identity_{k}"), lhs.sub(&rhs)?.norm()));

            // (iv) ‖1 - Q^2 Q*^2‖ ≤ 1: report the excess over 1
            let excess = (id.sub(&lhs)?.norm() - 1.0).max(0.0);
            entries.push((format!("resolvent_contraction_{k}"), excess));

            // (iii) F_k Q_{(k-1)*} = F_k = Q_{k+1} F_k
            if let Some(fk) = &f[k] {
                let left = fk.compose(&q_star[k])?.sub(fk)?.norm();
                let right = q[k + 1].compose(fk)?.sub(fk)?.norm();
                entries.push((format!("bt_absorb_left_{k}"), left));
                entries.push((format!("bt_absorb_right_{k}"), right));
            }
        }

        // Dirac/Laplace factorizations
        let dirac = self.dirac();
        let lap_ev = self.laplace_even();
        let lap_odd = self.laplace_odd();
        entries.push((
            "laplace_even_eq_odd_even".into(),
            lap_ev.sub(&dirac.odd.compose(&dirac.even)?)?.norm(),
        ));
        entries.push((
            "laplace_odd_eq_even_odd".into(),
            lap_odd.sub(&dirac.even.compose(&dirac.odd)?)?.norm(),
        ));

        // Laplace of the bounded transform complex:
        // Δ^F_ev = Δ_ev (⊕ Q_{2k}^2 Q_{(2k-1)*}^2)
        let btc = self.bounded_transform_complex()?;
        let even_idx = self.even_indices();
        let factors: Vec<Operator> = even_idx
            .iter()
            .map(|&k| {
                let q2 = q[k].compose(&q[k]).unwrap();
                let qs2 = q_star[k].compose(&q_star[k]).unwrap();
                q2.compose(&qs2).unwrap()
            })
            .collect();
        let factor = block_diagonal(self, &even_idx, &factors);
        entries.push((
            "bt_laplace_even_factorization".into(),
            btc.laplace_even().sub(&lap_ev.compose(&factor)?)?.norm(),
        ));

        // Q_{D+} = ⊕ Q_{2k} Q_{(2k-1)*}
        let q_dirac = dirac.even.resolvent_sqrt();
        let q_parts: Vec<Operator> = even_idx
            .iter()
            .map(|&k| q[k].compose(&q_star[k]).unwrap())
            .collect();
        let q_expected = block_diagonal(self, &even_idx, &q_parts);
        entries.push((
            "dirac_resolvent_product".into(),
            q_dirac.sub(&q_expected)?.norm(),
        ));

        // graph-norm intertwinings, when the complex has default Grams
        if self.modules.iter().all(|m| m.has_default_grams()) {
            let graph = self.graph_norm_complex()?;
            for k in 0..self.num_diffs() {
                // t_k Q_k = Q_{k+1} F_{t_k}  (vertical maps into the graph modules)
                let q_to_graph_k = Operator::new(
                    self.modules[k].clone(),
                    graph.module(k).clone(),
                    q[k].blocks().to_vec(),
                )?;
                let q_to_graph_k1 = Operator::new(
                    self.modules[k + 1].clone(),
                    graph.module(k + 1).clone(),
                    q[k + 1].blocks().to_vec(),
                )?;
                let lhs = graph.diff(k).compose(&q_to_graph_k)?;
                let rhs = q_to_graph_k1.compose(f[k].as_ref().expect("k < num_diffs"))?;
                entries.push((format!("graph_intertwine_{k}"), lhs.sub(&rhs)?.norm()));

                // the graph adjoint of t_k has the matrix Q_k F_{t_k}^*
                let expected = q[k].compose(&f[k].as_ref().expect("k < num_diffs").adjoint())?;
                let rebased = Operator::new(
                    graph.module(k + 1).clone(),
                    graph.module(k).clone(),
                    expected.blocks().to_vec(),
                )?;
                entries.push((
                    format!("graph_adjoint_{k}"),
                    graph.diff(k).adjoint().sub(&rebased)?.norm(),
                ));
            }

            // D+_{graph} Q_ev = Q_odd D+_{F}
            let graph_dirac = graph.dirac();
            let bt_dirac = btc.dirac();
            let q_ev_parts: Vec<Operator> = even_idx
                .iter()
                .map(|&k| {
                    Operator::new(
                        self.modules[k].clone(),
                        graph.module(k).clone(),
                        q[k].blocks().to_vec(),
                    )
                    .expect("same fibers")
                })
                .collect();
            let odd_idx = self.odd_indices();
            let q_odd_parts: Vec<Operator> = odd_idx
                .iter()
                .map(|&k| {
                    Operator::new(
                        self.modules[k].clone(),
                        graph.module(k).clone(),
                        q[k].blocks().to_vec(),
                    )
                    .expect("same fibers")
                })
                .collect();
            let q_ev = block_diagonal_general(
                self.algebra(),
                &q_ev_parts,
                &even_idx
                    .iter()
                    .map(|&k| self.modules[k].clone())
                    .collect::<Vec<_>>(),
                &even_idx
                    .iter()
                    .map(|&k| graph.module(k).clone())
                    .collect::<Vec<_>>(),
            );
            let q_odd = block_diagonal_general(
                self.algebra(),
                &q_odd_parts,
                &odd_idx
                    .iter()
                    .map(|&k| self.modules[k].clone())
                    .collect::<Vec<_>>(),
                &odd_idx
                    .iter()
                    .map(|&k| graph.module(k).clone())
                    .collect::<Vec<_>>(),
            );
            let lhs = graph_dirac.even.compose(&q_ev)?;
            let rhs = q_odd.compose(&bt_dirac.even)?;
            entries.push(("graph_dirac_intertwine".into(), lhs.sub(&rhs)?.norm()));
        }

        Ok(StructuralReport { entries })
    }
}

/// The even/odd Dirac pair of a complex.
#[derive(Debug, Clone)]
pub struct DiracPair {
    pub even: Operator,
    pub odd: Operator,
}

impl DiracPair {
    pub fn even_module(&self) -> &HilbertModule {
        self.even.source()
    }

    pub fn odd_module(&self) -> &HilbertModule {
        self.even.target()
    }
}

#[derive(Debug, Clone)]
pub struct StructuralReport {
    pub entries: Vec<(String, f64)>,
}

impl StructuralReport {
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }
}

pub(crate) fn direct_sum_modules<'a>(
    algebra: &crate::algebra::AlgebraDescriptor,
    modules: impl Iterator<Item = &'a HilbertModule>,
) -> HilbertModule {
    let mut acc = HilbertModule::zero(algebra.clone());
    for m in modules {
        acc = acc.direct_sum(m).expect("same algebra");
    }
    acc
}

/// Assembles the block operator with rows indexed by the odd modules of
/// `complex` (per `row_idx`) and columns by the even ones, given an
/// entries callback. Row/column index lists refer to module positions in
/// the complex.
fn assemble_block_operator(
    complex: &Complex,
    col_idx: &[usize],
    row_idx: &[usize],
    entry: impl Fn(usize, usize) -> Option<Operator>,
) -> Operator {
    let cols: Vec<HilbertModule> = col_idx.iter().map(|&k| complex.module(k).clone()).collect();
    let rows: Vec<HilbertModule> = row_idx.iter().map(|&k| complex.module(k).clone()).collect();
    assemble_grid(complex.algebra(), &cols, &rows, entry)
}

/// Assembles a block operator `⊕cols → ⊕rows` from an entries callback;
/// entry `(r, c)` must map `cols[c]` into `rows[r]` when present.
pub(crate) fn assemble_grid(
    algebra: &crate::algebra::AlgebraDescriptor,
    cols: &[HilbertModule],
    rows: &[HilbertModule],
    entry: impl Fn(usize, usize) -> Option<Operator>,
) -> Operator {
    let source = direct_sum_modules(algebra, cols.iter());
    let target = direct_sum_modules(algebra, rows.iter());
    let m = algebra.num_blocks();
    let mut blocks = Vec::with_capacity(m);
    for b in 0..m {
        let col_dims: Vec<usize> = cols.iter().map(|md| md.dim(b)).collect();
        let row_dims: Vec<usize> = rows.iter().map(|md| md.dim(b)).collect();
        let total_cols: usize = col_dims.iter().sum();
        let total_rows: usize = row_dims.iter().sum();
        let mut big = linalg::zeros(total_rows, total_cols);
        let mut row_off = 0;
        for (r, &rd) in row_dims.iter().enumerate() {
            let mut col_off = 0;
            for (c, &cd) in col_dims.iter().enumerate() {
                if let Some(op) = entry(r, c) {
                    big.view_mut((row_off, col_off), (rd, cd))
                        .copy_from(op.block(b));
                }
                col_off += cd;
            }
            row_off += rd;
        }
        blocks.push(big);
    }
    Operator::new(source, target, blocks).expect("assembled shapes agree")
}

/// Block-diagonal operator `⊕ parts[k]` over the listed module indices;
/// each part must be an endomorphism of the corresponding module.
pub(crate) fn block_diagonal(complex: &Complex, idx: &[usize], parts: &[Operator]) -> Operator {
    let modules: Vec<HilbertModule> = idx.iter().map(|&k| complex.module(k).clone()).collect();
    block_diagonal_general(complex.algebra(), parts, &modules, &modules)
}

/// Block-diagonal operator between direct sums of possibly different
/// source and target module lists.
pub(crate) fn block_diagonal_general(
    algebra: &crate::algebra::AlgebraDescriptor,
    parts: &[Operator],
    sources: &[HilbertModule],
    targets: &[HilbertModule],
) -> Operator {
    let source = direct_sum_modules(algebra, sources.iter());
    let target = direct_sum_modules(algebra, targets.iter());
    let m = algebra.num_blocks();
    let mut blocks = Vec::with_capacity(m);
    for b in 0..m {
        let total_cols: usize = sources.iter().map(|md| md.dim(b)).sum();
        let total_rows: usize = targets.iter().map(|md| md.dim(b)).sum();
        let mut big = linalg::zeros(total_rows, total_cols);
        let mut row_off = 0;
        let mut col_off = 0;
        for (p, part) in parts.iter().enumerate() {
            let rd = targets[p].dim(b);
            let cd = sources[p].dim(b);
            big.view_mut((row_off, col_off), (rd, cd))
                .copy_from(part.block(b));
            row_off += rd;
            col_off += cd;
        }
        blocks.push(big);
    }
    Operator::new(source, target, blocks).expect("assembled shapes agree")
}

/// Embedding of the `pos`-th summand into the direct sum of the listed
/// modules (block column of the identity); its adjoint is the
/// corresponding projection. Handy for building split exact sequences.
pub fn summand_embedding(
    algebra: &crate::algebra::AlgebraDescriptor,
    summands: &[HilbertModule],
    pos: usize,
) -> Operator {
    let target = direct_sum_modules(algebra, summands.iter());
    let source = summands[pos].clone();
    let m = algebra.num_blocks();
    let mut blocks = Vec::with_capacity(m);
    for b in 0..m {
        let total_rows: usize = summands.iter().map(|md| md.dim(b)).sum();
        let d = source.dim(b);
        let mut big = linalg::zeros(total_rows, d);
        let offset: usize = summands[..pos].iter().map(|md| md.dim(b)).sum();
        for i in 0..d {
            big[(offset + i, i)] = Complex64::new(1.0, 0.0);
        }
        blocks.push(big);
    }
    Operator::new(source, target, blocks).expect("shapes agree")
}
