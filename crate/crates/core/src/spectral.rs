//! Observables as functions on the pure state space, their spectral
//! resolutions, and the Jordan product built from squares.
//!
//! A finite combination `f = Σ cᵢ p_{ρᵢ}` is represented twice: as the term
//! list itself ([`ObservableFunction`]), evaluated through transition
//! probabilities, and as its operator realization ([`Observable`]), one
//! Hermitian block `Σ cᵢ |Ωᵢ⟩⟨Ωᵢ|` per sector. Every function built here is
//! again such an element, so the two views are interchangeable.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Result, TpsError};
use crate::lattice::SubspaceElement;
use crate::linalg::{self, CMat};
use crate::report::{CheckRecord, MaxDeviation};
use crate::space::{transition_probability, Ray};

/// Relative tolerance for merging eigenvalues into one spectral projection.
pub const EIGEN_MERGE_TOL: f64 = 1e-9;

/// Anything that can be evaluated on rays.
pub trait PointFunction {
    fn value_at(&self, ray: &Ray) -> Result<f64>;
}

#[derive(Debug, Clone)]
pub struct Term {
    pub coefficient: f64,
    pub point: Ray,
}

/// An element `Σ cᵢ p_{ρᵢ}` of the span of the transition probability functions.
#[derive(Debug, Clone, Default)]
pub struct ObservableFunction {
    terms: Vec<Term>,
}

impl ObservableFunction {
    pub fn new(terms: Vec<Term>) -> Self {
        Self { terms }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, Ray)>) -> Self {
        Self { terms: pairs.into_iter().map(|(coefficient, point)| Term { coefficient, point }).collect() }
    }

    /// `p_ρ`.
    pub fn point(ray: Ray) -> Self {
        Self::from_pairs([(1.0, ray)])
    }

    /// The unit function, written as the sum over a basis of every sector.
    pub fn unit(dims: &[usize]) -> Self {
        Self::from_pairs(
            dims.iter()
                .enumerate()
                .flat_map(|(s, &d)| (0..d).map(move |k| (1.0, Ray::basis(s, d, k)))),
        )
    }

    /// Random element with `n_terms` terms, coefficients uniform in `[-2, 2]`.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], n_terms: usize, rng: &mut R) -> Self {
        Self::from_pairs((0..n_terms).map(|_| {
            let sector = rng.random_range(0..dims.len());
            (rng.random_range(-2.0..=2.0), Ray::random(sector, dims[sector], rng))
        }))
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// `f(σ) = Σ cᵢ p(ρᵢ, σ)`.
    pub fn eval(&self, sigma: &Ray) -> Result<f64> {
        self.terms
            .iter()
            .map(|t| Ok(t.coefficient * transition_probability(&t.point, sigma)?))
            .sum()
    }

    /// Operator blocks `A_α = Σ_{ρᵢ ∈ α} cᵢ |Ωᵢ⟩⟨Ωᵢ|`.
    pub fn operator(&self, dims: &[usize]) -> Result<Observable> {
        let mut blocks: Vec<CMat> = dims.iter().map(|&d| CMat::zeros(d, d)).collect();
        for t in &self.terms {
            let s = t.point.sector();
            let d = *dims.get(s).ok_or(TpsError::SectorOutOfRange { sector: s, sectors: dims.len() })?;
            if t.point.dim() != d {
                return Err(TpsError::DimensionMismatch { expected: d, found: t.point.dim() });
            }
            blocks[s] += t.point.projector().scale(t.coefficient);
        }
        Ok(Observable { blocks })
    }
}

impl PointFunction for ObservableFunction {
    fn value_at(&self, ray: &Ray) -> Result<f64> {
        self.eval(ray)
    }
}

/// Hermitian operator blocks, one per sector: the operator side of a function
/// on the pure state space.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    blocks: Vec<CMat>,
}

impl Observable {
    pub fn zero(dims: &[usize]) -> Self {
        Self { blocks: dims.iter().map(|&d| CMat::zeros(d, d)).collect() }
    }

    pub fn unit(dims: &[usize]) -> Self {
        Self { blocks: dims.iter().map(|&d| CMat::identity(d, d)).collect() }
    }

    /// Accepts square blocks that are Hermitian to 1e-10 and stores their Hermitian part.
    pub fn from_blocks(blocks: Vec<CMat>) -> Result<Self> {
        for b in &blocks {
            if b.nrows() != b.ncols() {
                return Err(TpsError::NotSquare { rows: b.nrows(), cols: b.ncols() });
            }
            if linalg::max_abs_entry(&(b - b.adjoint())) > 1e-10 * (1.0 + linalg::max_abs_entry(b)) {
                return Err(TpsError::Precondition("operator block is not Hermitian".into()));
            }
        }
        Ok(Self { blocks: blocks.iter().map(linalg::hermitian_part).collect() })
    }

    /// Hermitian part of arbitrary square blocks; used for results of
    /// identities whose Hermiticity is exact in exact arithmetic.
    pub(crate) fn hermitian(blocks: Vec<CMat>) -> Self {
        Self { blocks: blocks.iter().map(linalg::hermitian_part).collect() }
    }

    pub fn random<R: Rng + ?Sized>(dims: &[usize], scale: f64, rng: &mut R) -> Self {
        Self { blocks: dims.iter().map(|&d| linalg::random_hermitian(d, scale, rng)).collect() }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    pub fn block(&self, sector: usize) -> &CMat {
        &self.blocks[sector]
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    /// `Â(σ) = ⟨Ω_σ, A_{α(σ)} Ω_σ⟩`.
    pub fn eval(&self, sigma: &Ray) -> Result<f64> {
        let b = self
            .blocks
            .get(sigma.sector())
            .ok_or(TpsError::SectorOutOfRange { sector: sigma.sector(), sectors: self.blocks.len() })?;
        if b.nrows() != sigma.dim() {
            return Err(TpsError::DimensionMismatch { expected: b.nrows(), found: sigma.dim() });
        }
        Ok(linalg::expectation(b, sigma.vector()))
    }

    /// Sup-norm over the pure states: the largest operator norm among the blocks.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(linalg::op_norm).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { blocks: self.blocks.iter().map(|b| b.scale(c)).collect() }
    }

    /// Blockwise map, kept crate-private so Hermiticity stays the caller's job.
    pub(crate) fn zip_with(&self, other: &Self, f: impl Fn(&CMat, &CMat) -> CMat) -> Self {
        assert_eq!(self.dims(), other.dims(), "observables over different spaces");
        Self { blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect() }
    }

    /// Term-list form `Σ λ |v⟩⟨v|` from the eigenvectors. Not canonical.
    pub fn to_function(&self) -> ObservableFunction {
        let mut pairs = Vec::new();
        for (s, b) in self.blocks.iter().enumerate() {
            let (values, vectors) = linalg::hermitian_eigen(b);
            for (k, &l) in values.iter().enumerate() {
                if l != 0.0 {
                    pairs.push((l, Ray::new(s, vectors.column(k).into_owned()).expect("unit eigenvector")));
                }
            }
        }
        ObservableFunction::from_pairs(pairs)
    }

    /// The operator-side product `½(AB + BA)`; an oracle for [`jordan`].
    pub fn anticommutator(&self, other: &Self) -> Self {
        Self::hermitian(self.zip_with(other, linalg::anticommutator_half).blocks)
    }
}

impl PointFunction for Observable {
    fn value_at(&self, ray: &Ray) -> Result<f64> {
        self.eval(ray)
    }
}

impl Add for &Observable {
    type Output = Observable;
    fn add(self, rhs: &Observable) -> Observable {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Observable {
    type Output = Observable;
    fn sub(self, rhs: &Observable) -> Observable {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &Observable {
    type Output = Observable;
    fn neg(self) -> Observable {
        self.scale(-1.0)
    }
}

impl Mul<&Observable> for f64 {
    type Output = Observable;
    fn mul(self, rhs: &Observable) -> Observable {
        rhs.scale(self)
    }
}

/// `p_Q(σ)`; see [`SubspaceElement::p_q`].
pub fn p_q(q: &SubspaceElement, sigma: &Ray) -> Result<f64> {
    q.p_q(sigma)
}

impl PointFunction for SpectralResolution {
    fn value_at(&self, ray: &Ray) -> Result<f64> {
        self.eval(ray)
    }
}

/// `f = Σ_j λ_j p_{Q_j}` with mutually orthogonal `Q_j` summing to the unit.
#[derive(Debug, Clone)]
pub struct SpectralResolution {
    pairs: Vec<(f64, SubspaceElement)>,
}

impl SpectralResolution {
    pub fn pairs(&self) -> &[(f64, SubspaceElement)] {
        &self.pairs
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.pairs.iter().map(|(l, _)| *l).collect()
    }

    pub fn eval(&self, sigma: &Ray) -> Result<f64> {
        self.pairs.iter().map(|(l, q)| Ok(l * q.p_q(sigma)?)).sum()
    }

    pub fn to_observable(&self) -> Observable {
        let dims = self.pairs[0].1.sector_dims().to_vec();
        let mut blocks: Vec<CMat> = dims.iter().map(|&d| CMat::zeros(d, d)).collect();
        for (l, q) in &self.pairs {
            for (s, b) in blocks.iter_mut().enumerate() {
                if q.dim_in(s) > 0 {
                    *b += q.projector(s).scale(*l);
                }
            }
        }
        Observable::hermitian(blocks)
    }

    /// Applies `g` to the eigenvalues and re-merges coinciding values.
    pub fn map(&self, g: impl Fn(f64) -> f64) -> Self {
        let dims = self.pairs[0].1.sector_dims().to_vec();
        let mut items = Vec::new();
        for (l, q) in &self.pairs {
            for s in 0..dims.len() {
                let b = q.block(s);
                for k in 0..b.ncols() {
                    items.push(Eigenpair { value: g(*l), sector: s, vector: b.column(k).into_owned() });
                }
            }
        }
        group_eigenpairs(&dims, items)
    }

    /// Largest pairwise overlap `‖P_{Q_i} P_{Q_j}‖` and the gap `‖Σ_j P_{Q_j} − 1‖`.
    pub fn invariant_violations(&self) -> (f64, f64) {
        let dims = self.pairs[0].1.sector_dims().to_vec();
        let mut overlap = 0.0_f64;
        for i in 0..self.pairs.len() {
            for j in (i + 1)..self.pairs.len() {
                for s in 0..dims.len() {
                    let (a, b) = (self.pairs[i].1.block(s), self.pairs[j].1.block(s));
                    if a.ncols() > 0 && b.ncols() > 0 {
                        overlap = overlap.max(linalg::op_norm(&(a.adjoint() * b)));
                    }
                }
            }
        }
        let mut gap = 0.0_f64;
        for (s, &d) in dims.iter().enumerate() {
            let mut sum = CMat::zeros(d, d);
            for (_, q) in &self.pairs {
                if q.dim_in(s) > 0 {
                    sum += q.projector(s);
                }
            }
            gap = gap.max(linalg::op_norm(&(sum - CMat::identity(d, d))));
        }
        (overlap, gap)
    }
}

struct Eigenpair {
    value: f64,
    sector: usize,
    vector: nalgebra::DVector<Complex64>,
}

/// Groups eigenpairs whose values agree within the merge tolerance. The order
/// of the input (sector, then index) fixes the reduction order.
fn group_eigenpairs(dims: &[usize], mut items: Vec<Eigenpair>) -> SpectralResolution {
    items.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.sector.cmp(&b.sector)));
    let mut groups: Vec<Vec<Eigenpair>> = Vec::new();
    for item in items {
        match groups.last_mut() {
            Some(g) if (g[0].value - item.value).abs() <= EIGEN_MERGE_TOL * g[0].value.abs().max(1.0) => g.push(item),
            _ => groups.push(vec![item]),
        }
    }
    let pairs = groups
        .into_iter()
        .map(|g| {
            let value = g.iter().map(|e| e.value).sum::<f64>() / g.len() as f64;
            let mut per_sector: Vec<Vec<nalgebra::DVector<Complex64>>> = vec![Vec::new(); dims.len()];
            for e in g {
                per_sector[e.sector].push(e.vector);
            }
            let blocks = per_sector
                .into_iter()
                .zip(dims)
                .map(|(vs, &d)| if vs.is_empty() { linalg::empty_basis(d) } else { CMat::from_columns(&vs) })
                .collect();
            let q = SubspaceElement::from_blocks(dims, blocks).expect("eigenvectors of a Hermitian block are orthonormal");
            (value, q)
        })
        .collect();
    SpectralResolution { pairs }
}

/// Spectral resolution from the per-sector eigendecompositions; eigenvalues
/// strictly decreasing.
pub fn spectral_resolution(f: &Observable) -> SpectralResolution {
    let dims = f.dims();
    let mut items = Vec::new();
    for (s, b) in f.blocks().iter().enumerate() {
        let (values, vectors) = linalg::hermitian_eigen(b);
        for (k, value) in values.into_iter().enumerate() {
            items.push(Eigenpair { value, sector: s, vector: vectors.column(k).into_owned() });
        }
    }
    group_eigenpairs(&dims, items)
}

pub fn spectral_resolution_of(f: &ObservableFunction, dims: &[usize]) -> Result<SpectralResolution> {
    Ok(spectral_resolution(&f.operator(dims)?))
}

/// `f² = Σ_j λ_j² p_{Q_j}`.
pub fn square(f: &Observable) -> Observable {
    spectral_resolution(f).map(|l| l * l).to_observable()
}

/// `f ∘ g = ¼((f + g)² − (f − g)²)`, squares taken spectrally.
pub fn jordan(f: &Observable, g: &Observable) -> Observable {
    let plus = square(&(f + g));
    let minus = square(&(f - g));
    (&plus - &minus).scale(0.25)
}

/// Largest `|F(σ) − G(σ)|` over the given rays.
pub fn max_pointwise_gap(a: &impl PointFunction, b: &impl PointFunction, rays: &[Ray]) -> Result<f64> {
    let mut worst = 0.0_f64;
    for r in rays {
        let d = (a.value_at(r)? - b.value_at(r)?).abs();
        worst = if d.is_nan() { f64::NAN } else { worst.max(d) };
    }
    Ok(worst)
}

/// Sup-norm distance between two observables.
pub fn distance(a: &Observable, b: &Observable) -> f64 {
    (a - b).norm()
}

/// The Jordan-Banach axioms on random pairs of `≤ 5`-term elements:
/// sub-multiplicativity, `‖A²‖ = ‖A‖²`, `‖A²‖ ≤ ‖A² + B²‖`, the Jordan identity,
/// bilinearity, and agreement with the anticommutator.
pub fn check_jb_axioms<R: Rng + ?Sized>(dims: &[usize], trials: usize, tol: f64, rng: &mut R) -> Result<Vec<CheckRecord>> {
    let mut submult = MaxDeviation::default();
    let mut square_norm = MaxDeviation::default();
    let mut positivity = MaxDeviation::default();
    let mut identity = MaxDeviation::default();
    let mut bilinear = MaxDeviation::default();
    let mut anticomm = MaxDeviation::default();
    for _ in 0..trials {
        let a = random_element(dims, rng)?;
        let b = random_element(dims, rng)?;
        let c = random_element(dims, rng)?;
        let ab = jordan(&a, &b);
        submult.push((ab.norm() - a.norm() * b.norm()).max(0.0));
        let a2 = square(&a);
        let b2 = square(&b);
        square_norm.push_diff(a2.norm(), a.norm() * a.norm());
        positivity.push((a2.norm() - (&a2 + &b2).norm()).max(0.0));
        identity.push(distance(&jordan(&a2, &ab), &jordan(&a, &jordan(&a2, &b))));
        let (x, y) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let combo = &a.scale(x) + &b.scale(y);
        let lhs = jordan(&combo, &c);
        let rhs = &jordan(&a, &c).scale(x) + &jordan(&b, &c).scale(y);
        bilinear.push(distance(&lhs, &rhs));
        anticomm.push(distance(&ab, &a.anticommutator(&b)));
    }
    Ok(vec![
        submult.record("jb.submultiplicative", tol),
        square_norm.record("jb.square_norm", tol),
        positivity.record("jb.square_sum_bound", tol),
        identity.record("jordan.identity", tol),
        bilinear.record("jordan.bilinearity", tol),
        anticomm.record("jordan.anticommutator", tol),
    ])
}

/// Random element with 1 to 5 terms.
pub fn random_element<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Observable> {
    let n = rng.random_range(1..=5);
    ObservableFunction::random(dims, n, rng).operator(dims)
}
