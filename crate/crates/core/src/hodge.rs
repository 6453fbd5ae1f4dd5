//! Weak/strong Hodge decompositions, harmonic spaces, cohomology
//! modules.
//!
//! Every complex in this model has strong Hodge decomposition (all
//! ranges are closed), so each module splits exactly into harmonic,
//! exact, and coexact summands, and cohomology is realized by the
//! harmonic projection `ker Δ_k = ker t_k ∩ ker t_{k-1}^*`.

use crate::algebra::K0Class;
use crate::complex::{Complex, ComplexKind};
use crate::error::{Error, Result};
use crate::module::HilbertModule;
use crate::operator::Operator;

/// The three mutually orthogonal Hermitian idempotents splitting `E_k`.
#[derive(Debug, Clone)]
pub struct HodgeSplit {
    /// Projection onto `ker t_k ∩ ker t_{k-1}^* = ker Δ_k`.
    pub harmonic: Operator,
    /// Projection onto `ran t_k^*`.
    pub coexact: Operator,
    /// Projection onto `ran t_{k-1}`.
    pub exact: Operator,
    pub at: usize,
}

impl HodgeSplit {
    /// Max pairwise-product norm of the three projections.
    pub fn orthogonality_residual(&self) -> f64 {
        let hc = self
            .harmonic
            .compose(&self.coexact)
            .map(|o| o.norm())
            .unwrap_or(f64::NAN);
        let he = self
            .harmonic
            .compose(&self.exact)
            .map(|o| o.norm())
            .unwrap_or(f64::NAN);
        let ce = self
            .coexact
            .compose(&self.exact)
            .map(|o| o.norm())
            .unwrap_or(f64::NAN);
        hc.max(he).max(ce)
    }

    /// `‖1 - (harmonic + coexact + exact)‖`.
    pub fn completeness_residual(&self) -> f64 {
        let id = Operator::identity(self.harmonic.source());
        id.sub(&self.harmonic)
            .and_then(|r| r.sub(&self.coexact))
            .and_then(|r| r.sub(&self.exact))
            .map(|r| r.norm())
            .unwrap_or(f64::NAN)
    }
}

/// Computes the Hodge splitting of `E_k` from the Laplace kernel and the
/// neighboring range projections.
pub fn hodge_split(complex: &Complex, k: usize, tol: f64) -> Result<HodgeSplit> {
    if complex.kind() != ComplexKind::Complex {
        return Err(Error::Unsupported(
            "Hodge splitting requires kind = complex".into(),
        ));
    }
    if k >= complex.num_modules() {
        return Err(Error::IndexOutOfRange(format!(
            "module index {k} of {}",
            complex.num_modules()
        )));
    }
    let module = complex.module(k);
    let harmonic = complex.laplace_k(k)?.kernel_projection(tol);
    let coexact = if k < complex.num_diffs() {
        complex.diff(k).adjoint().range_projection(tol)
    } else {
        Operator::zero(module.clone(), module.clone())?
    };
    let exact = if k >= 1 && k - 1 < complex.num_diffs() {
        complex.diff(k - 1).range_projection(tol)
    } else {
        Operator::zero(module.clone(), module.clone())?
    };
    Ok(HodgeSplit {
        harmonic,
        coexact,
        exact,
        at: k,
    })
}

/// The k-th cohomology, realized by the harmonic projection: a module
/// whose fiber multiplicities are the per-block ranks of `P_harm`,
/// together with its K0 class.
pub fn cohomology(complex: &Complex, k: usize, tol: f64) -> Result<(HilbertModule, K0Class)> {
    let split = hodge_split(complex, k, tol)?;
    let dims = projection_rank(&split.harmonic);
    let module = HilbertModule::standard(complex.algebra().clone(), dims.clone())?;
    Ok((module, K0Class::from_dims(&dims)))
}

/// Per-block rank of a Hermitian idempotent, read off its trace.
pub(crate) fn projection_rank(p: &Operator) -> Vec<usize> {
    (0..p.num_blocks())
        .map(|i| {
            let tr: f64 = p.block(i).diagonal().iter().map(|z| z.re).sum();
            tr.round().max(0.0) as usize
        })
        .collect()
}

/// Cohomology dims for every k.
pub fn cohomology_dims(complex: &Complex, tol: f64) -> Result<Vec<Vec<usize>>> {
    (0..complex.num_modules())
        .map(|k| cohomology(complex, k, tol).map(|(m, _)| m.dims().to_vec()))
        .collect()
}

#[derive(Debug, Clone)]
pub struct HodgeReport {
    pub entries: Vec<(String, f64)>,
}

impl HodgeReport {
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }
}

/// Residuals of the strong Hodge equivalences at every k:
/// `ker t_k = ker Δ_k ⊕ ran t_{k-1}`, `ker t_{k-1}^* = ker Δ_k ⊕ ran
/// t_k^*`, `ran Δ_k = ran t_k^* ⊕ ran t_{k-1}`, plus polar-decomposition
/// consistency of the even Dirac operator.
pub fn check_hodge_equivalences(complex: &Complex, tol: f64) -> Result<HodgeReport> {
    if complex.kind() != ComplexKind::Complex {
        return Err(Error::Unsupported(
            "Hodge equivalences require kind = complex".into(),
        ));
    }
    let mut entries = Vec::new();
    for k in 0..complex.num_modules() {
        let split = hodge_split(complex, k, tol)?;
        let module = complex.module(k);

        entries.push((format!("orthogonality_{k}"), split.orthogonality_residual()));
        entries.push((format!("completeness_{k}"), split.completeness_residual()));

        // ker t_k = ker Δ_k ⊕ ran t_{k-1}
        let ker_tk = if k < complex.num_diffs() {
            complex.diff(k).kernel_projection(tol)
        } else {
            Operator::identity(module)
        };
        entries.push((
            format!("ker_t_split_{k}"),
            ker_tk.sub(&split.harmonic.add(&split.exact)?)?.norm(),
        ));

        // ker t_{k-1}^* = ker Δ_k ⊕ ran t_k^*
        let ker_ts = if k >= 1 && k - 1 < complex.num_diffs() {
            complex.diff(k - 1).adjoint().kernel_projection(tol)
        } else {
            Operator::identity(module)
        };
        entries.push((
            format!("ker_tstar_split_{k}"),
            ker_ts.sub(&split.harmonic.add(&split.coexact)?)?.norm(),
        ));

        // ran Δ_k = ran t_k^* ⊕ ran t_{k-1}
        let ran_delta = complex.laplace_k(k)?.range_projection(tol);
        entries.push((
            format!("ran_delta_split_{k}"),
            ran_delta.sub(&split.coexact.add(&split.exact)?)?.norm(),
        ));

        // ker Δ_k = ker t_k ∧ ker t_{k-1}^*, the meet computed exactly as
        // the kernel of the stacked operator [t_k; t_{k-1}^*]
        let meet = kernel_meet_projection(complex, k, tol)?;
        entries.push((
            format!("harmonic_is_kernel_meet_{k}"),
            split.harmonic.sub(&meet)?.norm(),
        ));
    }

    // even Dirac operator polar-decomposition consistency
    let dirac = complex.dirac();
    let (v, abs) = dirac.even.polar_decompose(tol);
    entries.push((
        "dirac_polar_factorization".into(),
        dirac.even.sub(&v.compose(&abs)?)?.norm(),
    ));
    entries.push((
        "dirac_polar_initial_projection".into(),
        v.adjoint()
            .compose(&v)?
            .sub(&dirac.even.adjoint().range_projection(tol))?
            .norm(),
    ));
    entries.push((
        "dirac_polar_final_projection".into(),
        v.compose(&v.adjoint())?
            .sub(&dirac.even.range_projection(tol))?
            .norm(),
    ));

    Ok(HodgeReport { entries })
}

/// Projection onto `ker t_k ∩ ker t_{k-1}^*`, computed limit-free as the
/// kernel of the stacked operator.
pub fn kernel_meet_projection(complex: &Complex, k: usize, tol: f64) -> Result<Operator> {
    let module = complex.module(k);
    let tk = if k < complex.num_diffs() {
        Some(complex.diff(k).clone())
    } else {
        None
    };
    let ts = if k >= 1 && k - 1 < complex.num_diffs() {
        Some(complex.diff(k - 1).adjoint())
    } else {
        None
    };
    match (tk, ts) {
        (Some(a), Some(b)) => Ok(a.stack(&b)?.kernel_projection(tol)),
        (Some(a), None) => Ok(a.kernel_projection(tol)),
        (None, Some(b)) => Ok(b.kernel_projection(tol)),
        (None, None) => Ok(Operator::identity(module)),
    }
}
