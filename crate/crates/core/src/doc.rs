//! The on-disk complex document format.
//!
//! Text-based JSON with explicit decimal floats so that fixtures are
//! diffable and portable; serde_json prints the shortest decimal that
//! parses back to the identical f64, so round-trips are bit-exact.
//! Matrices are dense, row-major, entries as `(re, im)` pairs.

use crate::algebra::AlgebraDescriptor;
use crate::complex::{Complex, ComplexKind};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::module::HilbertModule;
use crate::operator::Operator;
use crate::products::TensorLayout;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixData {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `(re, im)` pairs, `rows * cols` of them.
    pub data: Vec<(f64, f64)>,
}

impl MatrixData {
    pub fn from_matrix(m: &CMat) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let z = m[(r, c)];
                data.push((z.re, z.im));
            }
        }
        Self { rows, cols, data }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::ShapeMismatch(format!(
                "matrix declared {}x{} but carries {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        let mut m = CMat::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let (re, im) = self.data[r * self.cols + c];
                m[(r, c)] = Complex64::new(re, im);
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AlgebraData {
    pub blocks: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModuleData {
    pub dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grams: Option<Vec<MatrixData>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor_layout: Option<TensorLayout>,
}

/// A complex as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ComplexDocument {
    #[serde(default)]
    pub metadata: Metadata,
    pub algebra: AlgebraData,
    pub modules: Vec<ModuleData>,
    /// One list of per-block matrices per differential.
    pub diffs: Vec<Vec<MatrixData>>,
    /// "complex" or "quasicomplex".
    pub kind: String,
    pub tol_complex: f64,
}

impl ComplexDocument {
    pub fn from_complex(complex: &Complex, metadata: Metadata) -> Self {
        let algebra = AlgebraData {
            blocks: complex.algebra().block_sizes().to_vec(),
        };
        let modules = complex
            .modules()
            .iter()
            .map(|m| ModuleData {
                dims: m.dims().to_vec(),
                grams: m
                    .grams()
                    .map(|gs| gs.iter().map(MatrixData::from_matrix).collect()),
            })
            .collect();
        let diffs = complex
            .diffs()
            .iter()
            .map(|t| t.blocks().iter().map(MatrixData::from_matrix).collect())
            .collect();
        let kind = match complex.kind() {
            ComplexKind::Complex => "complex".to_string(),
            ComplexKind::Quasicomplex => "quasicomplex".to_string(),
        };
        Self {
            metadata,
            algebra,
            modules,
            diffs,
            kind,
            tol_complex: complex.tol_complex(),
        }
    }

    pub fn to_complex(&self) -> Result<Complex> {
        let algebra = AlgebraDescriptor::new(self.algebra.blocks.clone())?;
        let kind = match self.kind.as_str() {
            "complex" => ComplexKind::Complex,
            "quasicomplex" => ComplexKind::Quasicomplex,
            other => {
                return Err(Error::ShapeMismatch(format!(
                    "kind must be \"complex\" or \"quasicomplex\", got {other:?}"
                )))
            }
        };
        let modules: Vec<HilbertModule> = self
            .modules
            .iter()
            .enumerate()
            .map(|(k, md)| {
                match &md.grams {
                    None => HilbertModule::standard(algebra.clone(), md.dims.clone()),
                    Some(gs) => {
                        let grams = gs
                            .iter()
                            .map(MatrixData::to_matrix)
                            .collect::<Result<Vec<_>>>()?;
                        HilbertModule::with_grams(algebra.clone(), md.dims.clone(), grams)
                    }
                }
                .map_err(|e| Error::InvalidModule(format!("module {k}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if modules.is_empty() {
            return Err(Error::ShapeMismatch(
                "a document needs at least one module".into(),
            ));
        }
        if self.diffs.len() + 1 != modules.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} modules require {} differentials, got {}",
                modules.len(),
                modules.len() - 1,
                self.diffs.len()
            )));
        }
        let diffs: Vec<Operator> = self
            .diffs
            .iter()
            .enumerate()
            .map(|(k, blocks)| {
                let mats = blocks
                    .iter()
                    .map(MatrixData::to_matrix)
                    .collect::<Result<Vec<_>>>()?;
                Operator::new(modules[k].clone(), modules[k + 1].clone(), mats)
                    .map_err(|e| Error::ShapeMismatch(format!("differential {k}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Complex::new(modules, diffs, kind, self.tol_complex)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ShapeMismatch(format!("parse error: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matrix_payload_round_trips_any_finite_floats(
            rows in 0usize..4,
            cols in 0usize..4,
            fill in proptest::collection::vec((-1e300f64..1e300, -1e300f64..1e300), 0..16),
        ) {
            let mut data = vec![(0.0, 0.0); rows * cols];
            for (slot, value) in data.iter_mut().zip(fill) {
                *slot = value;
            }
            let md = MatrixData { rows, cols, data };
            let m = md.to_matrix().unwrap();
            let back = MatrixData::from_matrix(&m);
            prop_assert_eq!(&md, &back);
            let json = serde_json::to_string(&md).unwrap();
            let parsed: MatrixData = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(&md, &parsed);
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let algebra = AlgebraDescriptor::new(vec![1, 2]).unwrap();
        for seed in 0..5 {
            let cplx = generate::random_complex_with_dims(&algebra, 2, 4, seed);
            let doc = ComplexDocument::from_complex(
                &cplx,
                Metadata {
                    name: Some(format!("fixture-{seed}")),
                    seed: Some(seed),
                    tensor_layout: None,
                },
            );
            let json = doc.to_json();
            let parsed = ComplexDocument::from_json(&json).unwrap();
            assert_eq!(doc, parsed, "documents compare equal after parsing");
            assert_eq!(json, parsed.to_json(), "serialization is stable");
            // and the parsed complex carries bit-identical matrices
            let back = parsed.to_complex().unwrap();
            for (a, b) in cplx.diffs().iter().zip(back.diffs()) {
                for i in 0..a.num_blocks() {
                    assert_eq!(a.block(i), b.block(i));
                }
            }
        }
    }

    #[test]
    fn grams_survive_round_trip() {
        let algebra = AlgebraDescriptor::new(vec![2]).unwrap();
        let e = generate::random_module(&algebra, &[3], 9);
        let f = HilbertModule::standard(algebra.clone(), vec![2]).unwrap();
        let t = generate::random_operator(&e, &f, 3);
        let cplx = Complex::new(
            vec![e, f],
            vec![t],
            ComplexKind::Complex,
            crate::DEFAULT_COMPLEX_TOL,
        )
        .unwrap();
        let doc = ComplexDocument::from_complex(&cplx, Metadata::default());
        let back = ComplexDocument::from_json(&doc.to_json())
            .unwrap()
            .to_complex()
            .unwrap();
        assert!(!back.module(0).has_default_grams());
        assert_eq!(back.module(0).gram(0), cplx.module(0).gram(0));
    }

    #[test]
    fn malformed_documents_are_rejected() {
        // bad matrix payload length
        let bad = MatrixData {
            rows: 2,
            cols: 2,
            data: vec![(1.0, 0.0)],
        };
        assert!(bad.to_matrix().is_err());

        // kind must be known
        let algebra = AlgebraDescriptor::scalars();
        let cplx = generate::random_complex_with_dims(&algebra, 1, 2, 0);
        let mut doc = ComplexDocument::from_complex(&cplx, Metadata::default());
        doc.kind = "chain".into();
        assert!(doc.to_complex().is_err());

        // not JSON at all
        assert!(ComplexDocument::from_json("{").is_err());

        // no modules at all
        let empty = ComplexDocument {
            metadata: Metadata::default(),
            algebra: AlgebraData { blocks: vec![1] },
            modules: vec![],
            diffs: vec![],
            kind: "complex".into(),
            tol_complex: 1e-10,
        };
        assert!(empty.to_complex().is_err());
    }

    #[test]
    fn complex_property_violation_surfaces_from_documents() {
        let algebra = AlgebraDescriptor::scalars();
        let one = MatrixData {
            rows: 1,
            cols: 1,
            data: vec![(1.0, 0.0)],
        };
        let doc = ComplexDocument {
            metadata: Metadata::default(),
            algebra: AlgebraData { blocks: vec![1] },
            modules: vec![
                ModuleData {
                    dims: vec![1],
                    grams: None,
                },
                ModuleData {
                    dims: vec![1],
                    grams: None,
                },
                ModuleData {
                    dims: vec![1],
                    grams: None,
                },
            ],
            diffs: vec![vec![one.clone()], vec![one]],
            kind: "complex".into(),
            tol_complex: crate::DEFAULT_COMPLEX_TOL,
        };
        match doc.to_complex() {
            Err(Error::ComplexProperty { k, .. }) => assert_eq!(k, 0),
            other => panic!("expected a complex-property error, got {other:?}"),
        }
        let _ = algebra;
    }
}
