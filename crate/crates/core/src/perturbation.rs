//! Gap and Riesz metrics, the V operator, hat-doubling, relative
//! bounds, and index-stability sweeps.
//!
//! The sweeps only accept perturbations that keep the complex property:
//! conjugation by near-identity unitaries, and edits that map coexact
//! summands into exact-plus-harmonic summands (which compose to zero
//! against the differentials on both sides).

use crate::complex::{Complex, ComplexKind};
use crate::error::{Error, Result};
use crate::fredholm::index_complex;
use crate::generate;
use crate::hodge;
use crate::linalg;
use crate::operator::Operator;
use num_complex::Complex64;
use rand::Rng;

/// `γ(s, t) = (‖Q_t² - Q_s²‖² + ‖Q_{t*}² - Q_{s*}²‖² + 2 ‖F_t Q_t - F_s
/// Q_s‖²)^{1/2}`, an operator-level form of the gap metric.
pub fn gap_metric(t: &Operator, s: &Operator) -> Result<f64> {
    check_same_shape(t, s)?;
    let bt = t.bounded_transform();
    let bs = s.bounded_transform();
    let bt_star = t.adjoint().bounded_transform();
    let bs_star = s.adjoint().bounded_transform();
    let a = bt.q.compose(&bt.q)?.sub(&bs.q.compose(&bs.q)?)?.norm();
    let b = bt_star
        .q
        .compose(&bt_star.q)?
        .sub(&bs_star.q.compose(&bs_star.q)?)?
        .norm();
    let c = bt.f.compose(&bt.q)?.sub(&bs.f.compose(&bs.q)?)?.norm();
    Ok((a * a + b * b + 2.0 * c * c).sqrt())
}

/// `δ(t, s) = ‖F_t - F_s‖`, the Riesz metric.
pub fn riesz_metric(t: &Operator, s: &Operator) -> Result<f64> {
    check_same_shape(t, s)?;
    Ok(t.bounded_transform()
        .f
        .sub(&s.bounded_transform().f)?
        .norm())
}

/// The orthogonal projection of `E ⊕ F` onto the graph of `t`, in block
/// form `[[Q², Q F*], [F Q, F F*]]`.
pub fn graph_projection(t: &Operator) -> Result<Operator> {
    let bt = t.bounded_transform();
    let e = t.source();
    let f = t.target();
    let sum = e.direct_sum(f)?;
    let q2 = bt.q.compose(&bt.q)?;
    let qfs = bt.q.compose(&bt.f.adjoint())?;
    let fq = bt.f.compose(&bt.q)?;
    let ffs = bt.f.compose(&bt.f.adjoint())?;
    let blocks = (0..t.num_blocks())
        .map(|i| {
            let (d, g) = (e.dim(i), f.dim(i));
            let mut big = linalg::zeros(d + g, d + g);
            big.view_mut((0, 0), (d, d)).copy_from(q2.block(i));
            big.view_mut((0, d), (d, g)).copy_from(qfs.block(i));
            big.view_mut((d, 0), (g, d)).copy_from(fq.block(i));
            big.view_mut((d, d), (g, g)).copy_from(ffs.block(i));
            big
        })
        .collect();
    Operator::new(sum.clone(), sum, blocks)
}

/// The a-priori gap metric `‖P_Γ(t) - P_Γ(s)‖` via graph projections.
/// Unlike the explicit resolvent formula, this form is exactly invariant
/// under hat-doubling; it never exceeds [`gap_metric`].
pub fn graph_gap_metric(t: &Operator, s: &Operator) -> Result<f64> {
    check_same_shape(t, s)?;
    Ok(graph_projection(t)?.sub(&graph_projection(s)?)?.norm())
}

/// `V_{t,s} = Q_t Q_s + F_t^* F_s` on the common source.
pub fn v_operator(t: &Operator, s: &Operator) -> Result<Operator> {
    check_same_shape(t, s)?;
    let bt = t.bounded_transform();
    let bs = s.bounded_transform();
    bt.q.compose(&bs.q)?.add(&bt.f.adjoint().compose(&bs.f)?)
}

fn check_same_shape(t: &Operator, s: &Operator) -> Result<()> {
    if t.source() != s.source() || t.target() != s.target() {
        return Err(Error::ShapeMismatch(
            "metric requires operators with common source and target".into(),
        ));
    }
    Ok(())
}

/// Checks the V-operator lemma: `‖F_s V_{s,t} - F_t‖ ≤ γ(t, s)`, the
/// sampled quadratic bound, and invertibility of `V_{t,s}` when
/// `γ(t, s) < 1`.
#[derive(Debug, Clone)]
pub struct VLemmaReport {
    pub gamma: f64,
    /// `‖F_s V_{s,t} - F_t‖`.
    pub transfer_norm: f64,
    /// Max over samples of `| ‖Vx‖² - ‖x‖² | / ‖x‖²`.
    pub max_quadratic_defect: f64,
    /// Condition estimate `σ_max / σ_min` of `V_{t,s}`, when `γ < 1`.
    pub v_condition: Option<f64>,
}

pub fn v_lemma_check(
    t: &Operator,
    s: &Operator,
    samples: usize,
    seed: u64,
) -> Result<VLemmaReport> {
    let gamma = gap_metric(t, s)?;
    let v_st = v_operator(s, t)?;
    let v_ts = v_operator(t, s)?;
    let fs = s.bounded_transform().f;
    let ft = t.bounded_transform().f;
    let transfer_norm = fs.compose(&v_st)?.sub(&ft)?.norm();

    let mut max_quadratic_defect: f64 = 0.0;
    for i in 0..samples {
        let x = generate::random_element(t.source(), seed.wrapping_add(i as u64));
        let nx = x.norm();
        if nx < 1e-12 {
            continue;
        }
        let vx = v_ts.apply(&x)?;
        let defect = (vx.norm().powi(2) - nx.powi(2)).abs() / nx.powi(2);
        max_quadratic_defect = max_quadratic_defect.max(defect);
    }

    let v_condition = if gamma < 1.0 {
        let sv: Vec<f64> = v_ts.singular_values().into_iter().flatten().collect();
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if smin > 0.0 && smin.is_finite() {
            Some(smax / smin)
        } else {
            None
        }
    } else {
        None
    };

    Ok(VLemmaReport {
        gamma,
        transfer_norm,
        max_quadratic_defect,
        v_condition,
    })
}

/// The self-adjoint doubling `t̂ = [[0, t*], [t, 0]]` on `E ⊕ F`.
pub fn hat_operator(t: &Operator) -> Result<Operator> {
    let e = t.source();
    let f = t.target();
    let sum = e.direct_sum(f)?;
    let ts = t.adjoint();
    let blocks = (0..t.num_blocks())
        .map(|i| {
            let (d, g) = (e.dim(i), f.dim(i));
            let mut big = linalg::zeros(d + g, d + g);
            big.view_mut((0, d), (d, g)).copy_from(ts.block(i));
            big.view_mut((d, 0), (g, d)).copy_from(t.block(i));
            big
        })
        .collect();
    Operator::new(sum.clone(), sum, blocks)
}

/// Finds, over the given grid of `alpha` values (ascending), the
/// smallest `alpha` whose minimal `beta` in `‖ŝ x‖ ≤ α ‖t̂ x‖ + β ‖x‖`
/// stays at or below `beta_cap`; falls back to the grid point with the
/// smallest `beta`. The minimal `beta` for fixed `alpha` is
/// `max(0, sup_{‖x‖=1} (‖ŝ x‖ - α ‖t̂ x‖))`, maximized by projected
/// ascent from multiple starts.
pub fn relative_bound(
    s: &Operator,
    t: &Operator,
    grid: &[f64],
    beta_cap: f64,
) -> Result<(f64, f64)> {
    check_same_shape(t, s)?;
    if grid.is_empty() {
        return Err(Error::Infeasible("empty alpha grid".into()));
    }
    let s_hat = hat_operator(s)?;
    let t_hat = hat_operator(t)?;
    if s_hat.norm() == 0.0 {
        return Ok((grid[0], 0.0));
    }
    let mut best: Option<(f64, f64)> = None;
    for &alpha in grid {
        if alpha < 0.0 {
            return Err(Error::Infeasible(
                "alpha grid entries must be nonnegative".into(),
            ));
        }
        let beta = minimal_beta(&s_hat, &t_hat, alpha);
        if beta <= beta_cap {
            return Ok((alpha, beta));
        }
        match best {
            Some((_, b)) if b <= beta => {}
            _ => best = Some((alpha, beta)),
        }
    }
    Ok(best.expect("grid is nonempty"))
}

fn minimal_beta(s_hat: &Operator, t_hat: &Operator, alpha: f64) -> f64 {
    let mut sup: f64 = 0.0;
    for i in 0..s_hat.num_blocks() {
        let a = s_hat.whitened_block(i);
        let b = t_hat.whitened_block(i);
        if a.ncols() == 0 {
            continue;
        }
        sup = sup.max(sup_norm_difference(&a, &b, alpha));
    }
    sup.max(0.0)
}

/// `sup_{‖x‖ = 1} (‖A x‖ - α ‖B x‖)` by projected gradient ascent with
/// deterministic multi-start.
fn sup_norm_difference(a: &linalg::CMat, b: &linalg::CMat, alpha: f64) -> f64 {
    use nalgebra::DVector;
    let n = a.ncols();
    let ata = a.adjoint() * a;
    let btb = b.adjoint() * b;
    let mut rng = generate::rng(0x5eed);
    let mut best = f64::NEG_INFINITY;
    let starts = 8 + 2 * n;
    for start in 0..starts {
        let mut x: DVector<Complex64> = if start < n {
            let mut e = DVector::zeros(n);
            e[start] = Complex64::new(1.0, 0.0);
            e
        } else {
            DVector::from_fn(n, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
        };
        let norm = x.norm();
        if norm == 0.0 {
            continue;
        }
        x /= Complex64::new(norm, 0.0);
        let mut value = objective(&ata, &btb, &x, alpha);
        for _ in 0..200 {
            // gradient of |Ax| - alpha |Bx| on the sphere
            let ax = &ata * &x;
            let bx = &btb * &x;
            let na = x.dotc(&ax).re.max(0.0).sqrt();
            let nb = x.dotc(&bx).re.max(0.0).sqrt();
            let mut grad: DVector<Complex64> = DVector::zeros(n);
            if na > 1e-14 {
                grad += ax.scale(1.0 / na);
            }
            if nb > 1e-14 {
                grad -= bx.scale(alpha / nb);
            }
            // project out the radial component and step
            let radial = x.dotc(&grad);
            grad -= x.scale_complex(radial);
            let gn = grad.norm();
            if gn < 1e-12 {
                break;
            }
            let mut step = 0.5;
            let mut advanced = false;
            while step > 1e-6 {
                let mut candidate = &x + grad.scale(step / gn);
                let cn = candidate.norm();
                candidate /= Complex64::new(cn, 0.0);
                let cv = objective(&ata, &btb, &candidate, alpha);
                if cv > value + 1e-15 {
                    x = candidate;
                    value = cv;
                    advanced = true;
                    break;
                }
                step *= 0.5;
            }
            if !advanced {
                break;
            }
        }
        best = best.max(value);
    }
    best
}

fn objective(
    ata: &linalg::CMat,
    btb: &linalg::CMat,
    x: &nalgebra::DVector<Complex64>,
    alpha: f64,
) -> f64 {
    let na = x.dotc(&(ata * x)).re.max(0.0).sqrt();
    let nb = x.dotc(&(btb * x)).re.max(0.0).sqrt();
    na - alpha * nb
}

trait ScaleComplex {
    fn scale_complex(&self, c: Complex64) -> Self;
}

impl ScaleComplex for nalgebra::DVector<Complex64> {
    fn scale_complex(&self, c: Complex64) -> Self {
        self * c
    }
}

/// Which distance a sweep reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMetric {
    Gap,
    Riesz,
    OperatorNorm,
    Relative,
}

impl std::fmt::Display for SweepMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SweepMetric::Gap => "gap",
            SweepMetric::Riesz => "riesz",
            SweepMetric::OperatorNorm => "operator-norm",
            SweepMetric::Relative => "relative",
        };
        f.write_str(s)
    }
}

/// Kinds of perturbation families for a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbKind {
    /// Perturbations with operator norm at most epsilon.
    Bounded,
    /// Perturbations scaled relative to `1 + ‖t_k‖`.
    Relative,
    /// Compact perturbations (everything here is compact); reported in
    /// the gap metric.
    Compact,
}

/// Outcome of an index-stability sweep.
#[derive(Debug, Clone)]
pub struct PerturbationReport {
    pub metric_used: SweepMetric,
    pub epsilon: f64,
    pub trials: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub index_changes: usize,
    pub max_metric_observed: f64,
    pub seed: u64,
}

/// Runs `trials` complex-property-preserving perturbations of size
/// `epsilon` and reports how often the index moved (it must not).
pub fn perturb_sweep(
    complex: &Complex,
    kind: PerturbKind,
    epsilon: f64,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<PerturbationReport> {
    if complex.kind() != ComplexKind::Complex {
        return Err(Error::Unsupported(
            "perturbation sweeps require kind = complex".into(),
        ));
    }
    let base_index = index_complex(complex, tol);
    let metric_used = match kind {
        PerturbKind::Bounded => SweepMetric::OperatorNorm,
        PerturbKind::Relative => SweepMetric::Relative,
        PerturbKind::Compact => SweepMetric::Gap,
    };
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut index_changes = 0usize;
    let mut max_metric_observed: f64 = 0.0;

    for trial in 0..trials {
        let trial_seed = seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(trial as u64);
        let mut rng = generate::rng(trial_seed);
        let perturbed = match propose(complex, kind, epsilon, &mut rng, tol) {
            Ok(c) => c,
            Err(_) => {
                rejected += 1;
                continue;
            }
        };
        // verify the complex property really held
        let valid = Complex::new(
            perturbed.modules().to_vec(),
            perturbed.diffs().to_vec(),
            ComplexKind::Complex,
            complex.tol_complex().max(1e-9),
        );
        let perturbed = match valid {
            Ok(c) => c,
            Err(_) => {
                rejected += 1;
                continue;
            }
        };
        accepted += 1;
        for k in 0..complex.num_diffs() {
            let d = match metric_used {
                SweepMetric::Gap => gap_metric(complex.diff(k), perturbed.diff(k))?,
                SweepMetric::Riesz => riesz_metric(complex.diff(k), perturbed.diff(k))?,
                SweepMetric::OperatorNorm => complex.diff(k).sub(perturbed.diff(k))?.norm(),
                SweepMetric::Relative => {
                    complex.diff(k).sub(perturbed.diff(k))?.norm() / (1.0 + complex.diff(k).norm())
                }
            };
            max_metric_observed = max_metric_observed.max(d);
        }
        if index_complex(&perturbed, tol) != base_index {
            index_changes += 1;
        }
    }

    Ok(PerturbationReport {
        metric_used,
        epsilon,
        trials,
        accepted,
        rejected,
        index_changes,
        max_metric_observed,
        seed,
    })
}

/// Proposes one perturbed complex. Alternates between unitary
/// conjugation and harmonic-block edits.
fn propose(
    complex: &Complex,
    kind: PerturbKind,
    epsilon: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
    tol: f64,
) -> Result<Complex> {
    let conjugate: bool = rng.gen_bool(0.5);
    let scale_for = |t: &Operator| match kind {
        PerturbKind::Relative => epsilon * (1.0 + t.norm()),
        _ => epsilon,
    };
    let diffs: Vec<Operator> = if conjugate {
        let unitaries: Vec<Operator> = complex
            .modules()
            .iter()
            .map(|m| generate::near_identity_unitary(m, epsilon / 2.0, rng))
            .collect();
        (0..complex.num_diffs())
            .map(|k| {
                unitaries[k + 1]
                    .compose(complex.diff(k))
                    .and_then(|a| a.compose(&unitaries[k].adjoint()))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        // r_k = (P_exact + P_harm at k+1) X P_coexact at k
        (0..complex.num_diffs())
            .map(|k| {
                let split_src = hodge::hodge_split(complex, k, tol)?;
                let split_tgt = hodge::hodge_split(complex, k + 1, tol)?;
                let target_proj = split_tgt.exact.add(&split_tgt.harmonic)?;
                let x = generate::random_operator(
                    complex.module(k),
                    complex.module(k + 1),
                    rng.gen::<u64>(),
                );
                let raw = target_proj.compose(&x)?.compose(&split_src.coexact)?;
                let n = raw.norm();
                let scaled = if n > 0.0 {
                    raw.scale(Complex64::new(scale_for(complex.diff(k)) / n, 0.0))
                } else {
                    raw
                };
                complex.diff(k).add(&scaled)
            })
            .collect::<Result<Vec<_>>>()?
    };
    Complex::new(
        complex.modules().to_vec(),
        diffs,
        ComplexKind::Complex,
        complex.tol_complex().max(1e-9),
    )
}

/// Per-step record of a homotopy path.
#[derive(Debug, Clone)]
pub struct HomotopyStep {
    pub lambda: f64,
    pub index: crate::algebra::K0Class,
    /// `sup_k γ(t_k^{λ}, t_k^{λ'})` to the previous step.
    pub gap_to_previous: f64,
}

#[derive(Debug, Clone)]
pub struct HomotopyReport {
    pub steps: Vec<HomotopyStep>,
    pub index_constant: bool,
}

/// Walks the linear interpolation between two complexes on the same
/// modules, verifying the complex property at each step and asserting a
/// constant index.
pub fn homotopy_path_check(
    c0: &Complex,
    c1: &Complex,
    steps: usize,
    tol: f64,
) -> Result<HomotopyReport> {
    if c0.num_modules() != c1.num_modules() {
        return Err(Error::ShapeMismatch(
            "homotopy endpoints have different lengths".into(),
        ));
    }
    for k in 0..c0.num_modules() {
        if c0.module(k) != c1.module(k) {
            return Err(Error::ShapeMismatch(format!(
                "module {k} differs between the endpoints"
            )));
        }
    }
    let steps = steps.max(1);
    let mut report_steps: Vec<HomotopyStep> = Vec::with_capacity(steps + 1);
    let mut previous: Option<Complex> = None;
    for i in 0..=steps {
        let lambda = i as f64 / steps as f64;
        let diffs: Vec<Operator> = (0..c0.num_diffs())
            .map(|k| {
                let a = c0.diff(k).scale(Complex64::new(1.0 - lambda, 0.0));
                let b = c1.diff(k).scale(Complex64::new(lambda, 0.0));
                a.add(&b)
            })
            .collect::<Result<Vec<_>>>()?;
        let interpolated = Complex::new(
            c0.modules().to_vec(),
            diffs,
            ComplexKind::Complex,
            c0.tol_complex().max(1e-9),
        )
        .map_err(|e| match e {
            Error::ComplexProperty { k, norm, tol } => Error::Infeasible(format!(
                "interpolation breaks the complex property at step {i} (k = {k}, norm {norm:.3e}, tol {tol:.3e})"
            )),
            other => other,
        })?;
        let gap_to_previous = match &previous {
            None => 0.0,
            Some(prev) => {
                let mut g: f64 = 0.0;
                for k in 0..c0.num_diffs() {
                    g = g.max(gap_metric(prev.diff(k), interpolated.diff(k))?);
                }
                g
            }
        };
        report_steps.push(HomotopyStep {
            lambda,
            index: index_complex(&interpolated, tol),
            gap_to_previous,
        });
        previous = Some(interpolated);
    }
    let first = report_steps[0].index.clone();
    let index_constant = report_steps.iter().all(|s| s.index == first);
    Ok(HomotopyReport {
        steps: report_steps,
        index_constant,
    })
}
