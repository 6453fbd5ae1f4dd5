//! Seeded construction of operators and complexes.
//!
//! Everything here is deterministic in the seed: fixtures, randomized
//! test corpora, and the `random` CLI command all go through these
//! helpers. Complexes are built from orthonormal frames so that the
//! complex property and the target cohomology hold by construction.

use crate::algebra::AlgebraDescriptor;
use crate::complex::{Complex, ComplexKind};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::module::{HilbertModule, ModuleElement};
use crate::operator::Operator;
use crate::DEFAULT_COMPLEX_TOL;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    let r = (-2.0 * u1.ln()).sqrt();
    Complex64::new(
        r * (2.0 * std::f64::consts::PI * u2).cos(),
        r * (2.0 * std::f64::consts::PI * u2).sin(),
    )
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-distributed random unitary: the eigenvector matrix of a
/// Gaussian Hermitian matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    if n == 0 {
        return linalg::zeros(0, 0);
    }
    let g = random_matrix(rng, n, n);
    let h = (&g + g.adjoint()).scale(0.5);
    linalg::herm_eigen(&h).vectors
}

/// A module with random well-conditioned Gram metrics.
pub fn random_module(algebra: &AlgebraDescriptor, dims: &[usize], seed: u64) -> HilbertModule {
    let mut r = rng(seed.wrapping_mul(0x9e37_79b9).wrapping_add(17));
    let grams: Vec<CMat> = dims
        .iter()
        .map(|&d| {
            let u = random_unitary(&mut r, d);
            let mut g = linalg::zeros(d, d);
            for i in 0..d {
                let lambda = Complex64::new(r.gen_range(0.5..2.0), 0.0);
                g += (u.column(i) * u.column(i).adjoint()) * lambda;
            }
            g
        })
        .collect();
    HilbertModule::with_grams(algebra.clone(), dims.to_vec(), grams)
        .expect("construction is positive definite")
}

pub fn random_element(module: &HilbertModule, seed: u64) -> ModuleElement {
    let mut r = rng(seed.wrapping_mul(0x85eb_ca6b).wrapping_add(3));
    let blocks = (0..module.num_blocks())
        .map(|i| random_matrix(&mut r, module.dim(i), module.algebra().block_size(i)))
        .collect();
    ModuleElement::new(module.clone(), blocks).expect("shapes agree")
}

pub fn random_operator(source: &HilbertModule, target: &HilbertModule, seed: u64) -> Operator {
    let mut r = rng(seed.wrapping_mul(0xc2b2_ae35).wrapping_add(5));
    let blocks = (0..source.num_blocks())
        .map(|i| random_matrix(&mut r, target.dim(i), source.dim(i)))
        .collect();
    Operator::new(source.clone(), target.clone(), blocks).expect("shapes agree")
}

/// Specification for a random complex: per-module fiber dimensions and an
/// optional per-module target cohomology (all per algebra block).
#[derive(Debug, Clone)]
pub struct ComplexSpec {
    pub algebra: AlgebraDescriptor,
    /// `dims[k][i]` is the fiber multiplicity of module `k` in block `i`;
    /// length N+2 for a complex with N+1 differentials.
    pub dims: Vec<Vec<usize>>,
    /// Optional target cohomology dims, same shape as `dims`.
    pub target_cohomology: Option<Vec<Vec<usize>>>,
}

/// Per block, solves for the differential ranks `r_k` implied by module
/// dims and target harmonic dims: `h_k = d_k - r_{k-1} - r_k`.
fn solve_ranks(dims: &[usize], target_h: &[usize]) -> Result<Vec<usize>> {
    let n_modules = dims.len();
    let mut ranks = Vec::with_capacity(n_modules.saturating_sub(1));
    let mut prev = 0usize;
    for k in 0..n_modules {
        let slack = dims[k] as i64 - target_h[k] as i64 - prev as i64;
        if k + 1 == n_modules {
            if slack != 0 {
                return Err(Error::Infeasible(format!(
                    "dimension/Euler constraint fails at the last module: d = {}, h = {}, incoming rank = {}",
                    dims[k], target_h[k], prev
                )));
            }
        } else {
            if slack < 0 {
                return Err(Error::Infeasible(format!(
                    "target cohomology too large at k = {k}: d = {}, h = {}, incoming rank = {}",
                    dims[k], target_h[k], prev
                )));
            }
            ranks.push(slack as usize);
            prev = slack as usize;
        }
    }
    Ok(ranks)
}

/// Builds a deterministic complex whose cohomology per block matches the
/// target exactly. Differentials map coexact frames isomorphically onto
/// exact frames through well-conditioned invertible factors.
pub fn random_complex(spec: &ComplexSpec, seed: u64) -> Result<Complex> {
    let m = spec.algebra.num_blocks();
    let n_modules = spec.dims.len();
    if n_modules == 0 {
        return Err(Error::Infeasible(
            "a complex needs at least one module".into(),
        ));
    }
    for d in &spec.dims {
        if d.len() != m {
            return Err(Error::ShapeMismatch(
                "dims rows must match the number of algebra blocks".into(),
            ));
        }
    }
    let mut r = rng(seed);

    // Resolve per-block harmonic targets.
    let targets: Vec<Vec<usize>> = match &spec.target_cohomology {
        Some(t) => {
            if t.len() != n_modules || t.iter().any(|row| row.len() != m) {
                return Err(Error::ShapeMismatch(
                    "target cohomology must have the shape of dims".into(),
                ));
            }
            t.clone()
        }
        None => {
            // pick feasible random ranks per block, then read off h
            let mut targets = vec![vec![0usize; m]; n_modules];
            for block in 0..m {
                let mut prev = 0usize;
                for k in 0..n_modules {
                    let d = spec.dims[k][block];
                    if k + 1 == n_modules {
                        targets[k][block] = d - prev.min(d);
                        // prev <= d is guaranteed by the rank cap below
                    } else {
                        let d_next = spec.dims[k + 1][block];
                        let cap = (d - prev.min(d)).min(d_next);
                        let rank = if cap == 0 { 0 } else { r.gen_range(0..=cap) };
                        targets[k][block] = d - prev - rank;
                        prev = rank;
                    }
                }
            }
            targets
        }
    };

    // Per-block ranks.
    let mut ranks_per_block = Vec::with_capacity(m);
    for block in 0..m {
        let dims: Vec<usize> = spec.dims.iter().map(|row| row[block]).collect();
        let hs: Vec<usize> = targets.iter().map(|row| row[block]).collect();
        ranks_per_block.push(solve_ranks(&dims, &hs)?);
    }

    let modules: Vec<HilbertModule> = spec
        .dims
        .iter()
        .map(|row| {
            HilbertModule::standard(spec.algebra.clone(), row.clone()).expect("validated above")
        })
        .collect();

    // Per module and block, a random unitary frame split as
    // [exact | coexact | harmonic] columns.
    // frame_cols[k][block] = (exact_frame, coexact_frame)
    let mut exact_frames: Vec<Vec<CMat>> = Vec::with_capacity(n_modules);
    let mut coexact_frames: Vec<Vec<CMat>> = Vec::with_capacity(n_modules);
    for k in 0..n_modules {
        let mut ex_row = Vec::with_capacity(m);
        let mut co_row = Vec::with_capacity(m);
        for block in 0..m {
            let d = spec.dims[k][block];
            let u = random_unitary(&mut r, d);
            let r_in = if k == 0 {
                0
            } else {
                ranks_per_block[block][k - 1]
            };
            let r_out = if k + 1 == n_modules {
                0
            } else {
                ranks_per_block[block][k]
            };
            ex_row.push(u.columns(0, r_in).into_owned());
            co_row.push(u.columns(r_in, r_out).into_owned());
        }
        exact_frames.push(ex_row);
        coexact_frames.push(co_row);
    }

    let mut diffs = Vec::with_capacity(n_modules - 1);
    for k in 0..n_modules - 1 {
        let blocks: Vec<CMat> = (0..m)
            .map(|block| {
                let rank = ranks_per_block[block][k];
                let a = &coexact_frames[k][block]; // d_k x rank
                let b = &exact_frames[k + 1][block]; // d_{k+1} x rank
                if rank == 0 {
                    return linalg::zeros(spec.dims[k + 1][block], spec.dims[k][block]);
                }
                // well-conditioned invertible middle factor
                let u = random_unitary(&mut r, rank);
                let mut mid = linalg::zeros(rank, rank);
                for i in 0..rank {
                    mid[(i, i)] = Complex64::new(r.gen_range(0.4..2.5), 0.0);
                }
                b * u.adjoint() * mid * u * a.adjoint()
            })
            .collect();
        diffs.push(
            Operator::new(modules[k].clone(), modules[k + 1].clone(), blocks)
                .expect("shapes agree"),
        );
    }

    Complex::new(modules, diffs, ComplexKind::Complex, DEFAULT_COMPLEX_TOL)
}

/// Convenience: random complex with random dims bounded by `max_dim`,
/// `length + 1` differentials, over the given algebra.
pub fn random_complex_with_dims(
    algebra: &AlgebraDescriptor,
    length: usize,
    max_dim: usize,
    seed: u64,
) -> Complex {
    let mut r = rng(seed.wrapping_add(0xabcd));
    let n_modules = length + 2;
    let dims: Vec<Vec<usize>> = (0..n_modules)
        .map(|_| {
            (0..algebra.num_blocks())
                .map(|_| r.gen_range(0..=max_dim))
                .collect()
        })
        .collect();
    let spec = ComplexSpec {
        algebra: algebra.clone(),
        dims,
        target_cohomology: None,
    };
    random_complex(&spec, seed).expect("no target means always feasible")
}

/// Near-identity unitary `exp(i eps H)` per block of a module.
pub fn near_identity_unitary(module: &HilbertModule, eps: f64, rng: &mut ChaCha8Rng) -> Operator {
    let blocks: Vec<CMat> = (0..module.num_blocks())
        .map(|i| {
            let d = module.dim(i);
            if d == 0 {
                return linalg::zeros(0, 0);
            }
            let g = random_matrix(rng, d, d);
            let h = (&g + g.adjoint()).scale(0.5);
            let h_norm = linalg::spectral_norm(&h).max(1e-300);
            let h_scaled = h.scale(eps / h_norm);
            // exp(i h_scaled) by Hermitian eigendecomposition
            let eig = linalg::herm_eigen(&h_scaled);
            let mut u = linalg::zeros(d, d);
            for j in 0..d {
                let phase = Complex64::new(0.0, eig.values[j]).exp();
                u += (eig.vectors.column(j) * eig.vectors.column(j).adjoint()) * phase;
            }
            u
        })
        .collect();
    Operator::new(module.clone(), module.clone(), blocks).expect("square blocks")
}
