//! JSON documents for spaces, kernels, observables and command inputs.
//!
//! Complex numbers are stored as parallel `re`/`im` arrays. Numbers are
//! written in the shortest form that parses back to the same `f64`.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cstar::ComplexObservable;
use crate::error::{Result, TpsError};
use crate::linalg::{CMat, CVec};
use crate::space::{PureStateSpace, Ray, TransitionKernel};
use crate::spectral::{Observable, ObservableFunction, Term};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointDoc {
    pub sector: usize,
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub im: Vec<f64>,
}

impl PointDoc {
    pub fn from_ray(ray: &Ray) -> Self {
        let v = ray.vector();
        Self { sector: ray.sector(), re: v.iter().map(|z| z.re).collect(), im: v.iter().map(|z| z.im).collect() }
    }

    /// Normalizes the amplitudes; a missing `im` array means a real vector.
    pub fn to_ray(&self) -> Result<Ray> {
        if !self.im.is_empty() && self.im.len() != self.re.len() {
            return Err(TpsError::Document(format!(
                "point has {} real and {} imaginary components",
                self.re.len(),
                self.im.len()
            )));
        }
        let v = CVec::from_iterator(
            self.re.len(),
            self.re.iter().enumerate().map(|(k, &re)| Complex64::new(re, self.im.get(k).copied().unwrap_or(0.0))),
        );
        Ray::new(self.sector, v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDoc {
    pub sectors: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<PointDoc>,
}

impl SpaceDoc {
    pub fn from_space(space: &PureStateSpace) -> Self {
        Self {
            sectors: space.sectors().to_vec(),
            hbar: Some(space.hbar().to_vec()),
            points: space.points().iter().map(PointDoc::from_ray).collect(),
        }
    }

    pub fn to_space(&self) -> Result<PureStateSpace> {
        let space = match &self.hbar {
            Some(h) => PureStateSpace::with_hbar(self.sectors.clone(), h.clone())?,
            None => PureStateSpace::new(self.sectors.clone())?,
        };
        let points = self.points.iter().map(PointDoc::to_ray).collect::<Result<Vec<_>>>()?;
        space.with_points(points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDoc {
    pub n: usize,
    pub p: Vec<Vec<f64>>,
}

impl KernelDoc {
    pub fn from_kernel(k: &TransitionKernel) -> Self {
        Self { n: k.n(), p: k.rows() }
    }

    pub fn to_kernel(&self) -> Result<TransitionKernel> {
        if self.p.len() != self.n {
            return Err(TpsError::Document(format!("n = {} but p has {} rows", self.n, self.p.len())));
        }
        TransitionKernel::from_rows(&self.p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDoc {
    pub c: f64,
    pub point: PointDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDoc {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub im: Vec<Vec<f64>>,
}

impl MatrixDoc {
    pub fn from_matrix(m: &CMat) -> Self {
        let rows = |f: fn(&Complex64) -> f64| (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect();
        Self { re: rows(|z| z.re), im: rows(|z| z.im) }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        let n = self.re.len();
        let square = |rows: &Vec<Vec<f64>>| rows.iter().all(|r| r.len() == n);
        if !square(&self.re) || !(self.im.is_empty() || (self.im.len() == n && square(&self.im))) {
            return Err(TpsError::Document("operator block is not a square matrix".into()));
        }
        Ok(CMat::from_fn(n, n, |i, j| {
            Complex64::new(self.re[i][j], self.im.get(i).map_or(0.0, |r| r[j]))
        }))
    }
}

/// A real observable, either as a finite combination `Σ c_k p_{ρ_k}` or as
/// explicit Hermitian blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableDoc {
    Terms { terms: Vec<TermDoc> },
    Blocks { blocks: Vec<MatrixDoc> },
}

impl ObservableDoc {
    pub fn from_function(f: &ObservableFunction) -> Self {
        Self::Terms {
            terms: f.terms().iter().map(|t| TermDoc { c: t.coefficient, point: PointDoc::from_ray(&t.point) }).collect(),
        }
    }

    pub fn from_observable(a: &Observable) -> Self {
        Self::Blocks { blocks: a.blocks().iter().map(MatrixDoc::from_matrix).collect() }
    }

    pub fn to_function(&self) -> Result<ObservableFunction> {
        match self {
            Self::Terms { terms } => Ok(ObservableFunction::new(
                terms
                    .iter()
                    .map(|t| Ok(Term { coefficient: t.c, point: t.point.to_ray()? }))
                    .collect::<Result<_>>()?,
            )),
            Self::Blocks { blocks } => {
                let blocks = blocks.iter().map(MatrixDoc::to_matrix).collect::<Result<_>>()?;
                Ok(Observable::from_blocks(blocks)?.to_function())
            }
        }
    }

    pub fn to_observable(&self, dims: &[usize]) -> Result<Observable> {
        match self {
            Self::Terms { .. } => self.to_function()?.operator(dims),
            Self::Blocks { blocks } => {
                let a = Observable::from_blocks(blocks.iter().map(MatrixDoc::to_matrix).collect::<Result<_>>()?)?;
                if a.dims() != dims {
                    return Err(TpsError::Document(format!("operator blocks {:?} do not match sectors {dims:?}", a.dims())));
                }
                Ok(a)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexDoc {
    pub re: ObservableDoc,
    pub im: ObservableDoc,
}

impl ComplexDoc {
    pub fn to_complex(&self, dims: &[usize]) -> Result<ComplexObservable> {
        ComplexObservable::new(self.re.to_observable(dims)?, self.im.to_observable(dims)?)
    }

    pub fn from_complex(a: &ComplexObservable) -> Self {
        Self { re: ObservableDoc::from_observable(&a.re), im: ObservableDoc::from_observable(&a.im) }
    }
}

/// Input of the `flow` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowDoc {
    pub space: SpaceDoc,
    pub hamiltonian: ObservableDoc,
    pub initial: PointDoc,
    /// Second ray flowed alongside `initial` for the unitarity check;
    /// defaults to the first basis vector of the same sector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<PointDoc>,
    pub t: f64,
    pub steps: usize,
    /// `"exact"` or `"rk4"`.
    #[serde(default = "default_integrator")]
    pub integrator: String,
}

fn default_integrator() -> String {
    "rk4".into()
}

/// Input of the `spectral` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralDoc {
    pub space: SpaceDoc,
    pub function: ObservableDoc,
}

/// Either kind of input accepted by `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VerifyInput {
    Kernel(KernelDoc),
    Space(SpaceDoc),
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| TpsError::Document(e.to_string()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| TpsError::Document(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        TpsError::Document(m) => TpsError::Document(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("documents serialize") + "\n"
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial document.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let io = |e: std::io::Error| TpsError::Document(format!("{}: {e}", path.display()));
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn space_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let points: Vec<Ray> = (0..4).map(|i| Ray::random(i % 2, [2, 3][i % 2], &mut rng)).collect();
        let space = PureStateSpace::with_hbar(vec![2, 3], vec![1.0, 0.25]).unwrap().with_points(points).unwrap();
        let text = to_json(&SpaceDoc::from_space(&space));
        let back = parse::<SpaceDoc>(&text).unwrap().to_space().unwrap();
        assert_eq!(back.hbar(), space.hbar());
        for (a, b) in back.points().iter().zip(space.points()) {
            assert_eq!(a.vector(), b.vector());
        }
    }

    #[test]
    fn documents_are_validated() {
        assert!(parse::<SpaceDoc>(r#"{"sectors":[2],"bogus":1}"#).is_err());
        let k: KernelDoc = parse(r#"{"n":3,"p":[[1,0],[0,1]]}"#).unwrap();
        assert!(k.to_kernel().is_err());
        let p: PointDoc = parse(r#"{"sector":0,"re":[1,0],"im":[0]}"#).unwrap();
        assert!(p.to_ray().is_err());
        let p: PointDoc = parse(r#"{"sector":0,"re":[3,4]}"#).unwrap();
        assert!((p.to_ray().unwrap().vector()[1].re - 0.8).abs() < 1e-15);
    }

    #[test]
    fn verify_input_dispatch() {
        assert!(matches!(parse::<VerifyInput>(r#"{"n":1,"p":[[1]]}"#).unwrap(), VerifyInput::Kernel(_)));
        assert!(matches!(parse::<VerifyInput>(r#"{"sectors":[1,1]}"#).unwrap(), VerifyInput::Space(_)));
        assert!(parse::<VerifyInput>(r#"{"points":[]}"#).is_err());
    }

    #[test]
    fn observable_forms_agree() {
        let blocks: ObservableDoc = parse(r#"{"blocks":[{"re":[[1,0],[0,-1]]}]}"#).unwrap();
        let terms: ObservableDoc = parse(
            r#"{"terms":[{"c":1,"point":{"sector":0,"re":[1,0]}},{"c":-1,"point":{"sector":0,"re":[0,1]}}]}"#,
        )
        .unwrap();
        let a = blocks.to_observable(&[2]).unwrap();
        let b = terms.to_observable(&[2]).unwrap();
        assert!((&a - &b).norm() < 1e-15);
        assert!(blocks.to_observable(&[3]).is_err());
        let hermitian_fail: ObservableDoc = parse(r#"{"blocks":[{"re":[[0,1],[0,0]]}]}"#).unwrap();
        assert!(hermitian_fail.to_observable(&[2]).is_err());
    }

    #[test]
    fn atomic_write() {
        let dir = std::env::temp_dir().join(format!("tpspace-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("k.json");
        write_atomic(&path, "{}").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "{}");
        fs::remove_dir_all(&dir).unwrap();
    }
}
