//! The lattice of orthoclosed subsets, realized as tuples of subspaces, one
//! per sector.
//!
//! In the Hilbert model an orthoclosed subset of the pure state space is the
//! set of rays lying in a closed subspace of `⊕_α C^{d_α}` that decomposes
//! along the sectors, so an element is a list of orthonormal basis matrices.
//! Orthocomplement, meet and join act sector by sector.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Result, TpsError};
use crate::linalg::{self, CMat, CVec};
use crate::report::{CheckRecord, MaxDeviation};
use crate::space::{transition_probability, Ray};

/// Orthonormality tolerance for basis blocks.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Below this squared norm a projection counts as zero.
const DEGENERATE_PROJECTION: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct SubspaceElement {
    dims: Vec<usize>,
    blocks: Vec<CMat>,
}

impl SubspaceElement {
    pub fn zero(dims: &[usize]) -> Self {
        Self { dims: dims.to_vec(), blocks: dims.iter().map(|&d| linalg::empty_basis(d)).collect() }
    }

    pub fn unit(dims: &[usize]) -> Self {
        Self { dims: dims.to_vec(), blocks: dims.iter().map(|&d| CMat::identity(d, d)).collect() }
    }

    /// The atom `ρ^⊥⊥ = {ρ}`.
    pub fn atom(dims: &[usize], ray: &Ray) -> Result<Self> {
        Self::orthoclosure(dims, std::slice::from_ref(ray))
    }

    /// Validates orthonormal blocks.
    pub fn from_blocks(dims: &[usize], blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != dims.len() {
            return Err(TpsError::DimensionMismatch { expected: dims.len(), found: blocks.len() });
        }
        for (b, &d) in blocks.iter().zip(dims) {
            if b.nrows() != d {
                return Err(TpsError::DimensionMismatch { expected: d, found: b.nrows() });
            }
            if b.ncols() > d {
                return Err(TpsError::Precondition("more basis columns than the sector dimension".into()));
            }
            let gram = b.adjoint() * b;
            if linalg::max_abs_entry(&(gram - CMat::identity(b.ncols(), b.ncols()))) > ORTHONORMAL_TOL {
                return Err(TpsError::Precondition("basis columns are not orthonormal".into()));
            }
        }
        Ok(Self { dims: dims.to_vec(), blocks })
    }

    /// Span of arbitrary columns placed in one sector; other sectors are empty.
    pub fn span_in_sector(dims: &[usize], sector: usize, columns: &CMat) -> Result<Self> {
        let d = *dims
            .get(sector)
            .ok_or(TpsError::SectorOutOfRange { sector, sectors: dims.len() })?;
        if columns.nrows() != d {
            return Err(TpsError::DimensionMismatch { expected: d, found: columns.nrows() });
        }
        let mut out = Self::zero(dims);
        out.blocks[sector] = linalg::column_span(columns);
        Ok(out)
    }

    /// `S^⊥⊥` for a set of rays: the per-sector span of their vectors.
    pub fn orthoclosure(dims: &[usize], rays: &[Ray]) -> Result<Self> {
        let mut cols: Vec<Vec<&CVec>> = vec![Vec::new(); dims.len()];
        for r in rays {
            check_ray_dims(dims, r)?;
            cols[r.sector()].push(r.vector());
        }
        let blocks = dims
            .iter()
            .zip(cols)
            .map(|(&d, vs)| {
                if vs.is_empty() {
                    linalg::empty_basis(d)
                } else {
                    linalg::column_span(&CMat::from_columns(&vs.into_iter().cloned().collect::<Vec<_>>()))
                }
            })
            .collect();
        Ok(Self { dims: dims.to_vec(), blocks })
    }

    /// Random element: each sector gets a uniformly chosen dimension.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        let blocks = dims
            .iter()
            .map(|&d| {
                let k = rng.random_range(0..=d);
                random_block(d, k, rng)
            })
            .collect();
        Self { dims: dims.to_vec(), blocks }
    }

    /// Random `k`-dimensional subspace of one sector.
    pub fn random_in_sector<R: Rng + ?Sized>(dims: &[usize], sector: usize, k: usize, rng: &mut R) -> Self {
        let mut out = Self::zero(dims);
        out.blocks[sector] = random_block(dims[sector], k.min(dims[sector]), rng);
        out
    }

    pub fn sector_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn block(&self, sector: usize) -> &CMat {
        &self.blocks[sector]
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn dim_in(&self, sector: usize) -> usize {
        self.blocks[sector].ncols()
    }

    /// Total dimension `Σ_α dim_α`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.ncols()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn projector(&self, sector: usize) -> CMat {
        linalg::projector(&self.blocks[sector])
    }

    pub fn check_ray(&self, ray: &Ray) -> Result<()> {
        check_ray_dims(&self.dims, ray)
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(TpsError::Precondition("subspace elements belong to different spaces".into()));
        }
        Ok(())
    }

    /// `p_Q(σ) = ⟨Ω_σ, P_Q Ω_σ⟩`, the sum of `p(e_i, σ)` over any basis of `Q`.
    pub fn p_q(&self, sigma: &Ray) -> Result<f64> {
        self.check_ray(sigma)?;
        let b = &self.blocks[sigma.sector()];
        Ok((b.adjoint() * sigma.vector()).norm_squared())
    }

    pub fn contains_ray(&self, ray: &Ray) -> Result<bool> {
        Ok(self.p_q(ray)? > 1.0 - ORTHONORMAL_TOL)
    }

    /// The basis columns as atoms.
    pub fn atoms(&self) -> Vec<Ray> {
        let mut out = Vec::with_capacity(self.dim());
        for (sector, b) in self.blocks.iter().enumerate() {
            for k in 0..b.ncols() {
                out.push(Ray::new(sector, b.column(k).into_owned()).expect("orthonormal columns are nonzero"));
            }
        }
        out
    }

    /// Random ray in `Q`: a sector is drawn with probability proportional to its
    /// block dimension. Panics on the zero element.
    pub fn random_ray<R: Rng + ?Sized>(&self, rng: &mut R) -> Ray {
        let total = self.dim();
        assert!(total > 0, "the zero element contains no rays");
        let mut pick = rng.random_range(0..total);
        let sector = self
            .blocks
            .iter()
            .position(|b| {
                if pick < b.ncols() {
                    true
                } else {
                    pick -= b.ncols();
                    false
                }
            })
            .expect("pick is below the total dimension");
        let b = &self.blocks[sector];
        let c = linalg::random_unit_vector(b.ncols(), rng);
        Ray::new(sector, b * c).expect("unit combination of orthonormal columns")
    }

    /// `Q ≤ R`.
    pub fn leq(&self, other: &Self) -> bool {
        self.blocks.iter().zip(&other.blocks).all(|(q, r)| {
            let residual = q - linalg::projector(r) * q;
            q.ncols() == 0 || linalg::max_abs_entry(&residual) < 1e-9
        })
    }

    /// Basis-independent distance `max_α ‖P_{Q,α} − P_{R,α}‖`.
    pub fn distance(&self, other: &Self) -> f64 {
        (0..self.dims.len())
            .map(|a| linalg::op_norm(&(self.projector(a) - other.projector(a))))
            .fold(0.0, f64::max)
    }

    pub fn orthoplement(&self) -> Self {
        orthoplement(self)
    }
}

fn check_ray_dims(dims: &[usize], ray: &Ray) -> Result<()> {
    let d = *dims
        .get(ray.sector())
        .ok_or(TpsError::SectorOutOfRange { sector: ray.sector(), sectors: dims.len() })?;
    if d != ray.dim() {
        return Err(TpsError::DimensionMismatch { expected: d, found: ray.dim() });
    }
    Ok(())
}

fn random_block<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> CMat {
    if k == 0 {
        return linalg::empty_basis(d);
    }
    linalg::column_span(&linalg::gaussian_matrix(d, k, rng))
}

/// `Q^⊥`: the orthogonal complement in every sector.
pub fn orthoplement(q: &SubspaceElement) -> SubspaceElement {
    let blocks = q
        .blocks
        .iter()
        .zip(&q.dims)
        .map(|(b, &d)| {
            if b.ncols() == 0 {
                CMat::identity(d, d)
            } else {
                linalg::null_space(&b.adjoint())
            }
        })
        .collect();
    SubspaceElement { dims: q.dims.clone(), blocks }
}

pub fn orthoclosure(dims: &[usize], rays: &[Ray]) -> Result<SubspaceElement> {
    SubspaceElement::orthoclosure(dims, rays)
}

/// `Q ∧ R`: null space of the stacked complement projections `[P_{Q^⊥}; P_{R^⊥}]`.
pub fn meet(q: &SubspaceElement, r: &SubspaceElement) -> Result<SubspaceElement> {
    q.same_space(r)?;
    let blocks = q
        .dims
        .iter()
        .enumerate()
        .map(|(a, &d)| {
            if q.dim_in(a) == 0 || r.dim_in(a) == 0 {
                return linalg::empty_basis(d);
            }
            let id = CMat::identity(d, d);
            let mut stacked = CMat::zeros(2 * d, d);
            stacked.view_mut((0, 0), (d, d)).copy_from(&(&id - q.projector(a)));
            stacked.view_mut((d, 0), (d, d)).copy_from(&(&id - r.projector(a)));
            if linalg::max_abs_entry(&stacked) < ORTHONORMAL_TOL {
                return CMat::identity(d, d);
            }
            linalg::null_space(&stacked)
        })
        .collect();
    Ok(SubspaceElement { dims: q.dims.clone(), blocks })
}

/// `Q ∨ R = (Q ∪ R)^⊥⊥`: the per-sector span.
pub fn join(q: &SubspaceElement, r: &SubspaceElement) -> Result<SubspaceElement> {
    q.same_space(r)?;
    let blocks = q
        .blocks
        .iter()
        .zip(&r.blocks)
        .map(|(a, b)| {
            let d = a.nrows();
            if a.ncols() + b.ncols() == 0 {
                return linalg::empty_basis(d);
            }
            let mut cols = CMat::zeros(d, a.ncols() + b.ncols());
            cols.view_mut((0, 0), (d, a.ncols())).copy_from(a);
            cols.view_mut((0, a.ncols()), (d, b.ncols())).copy_from(b);
            linalg::column_span(&cols)
        })
        .collect();
    Ok(SubspaceElement { dims: q.dims.clone(), blocks })
}

/// Sasaki projection `φ_Q(σ)`: project the representative onto `Q` and renormalize.
pub fn sasaki_project(sigma: &Ray, q: &SubspaceElement) -> Result<Ray> {
    q.check_ray(sigma)?;
    let b = q.block(sigma.sector());
    let projected = b * (b.adjoint() * sigma.vector());
    if projected.norm_squared() < DEGENERATE_PROJECTION {
        return Err(TpsError::DegenerateProjection);
    }
    Ray::new(sigma.sector(), projected)
}

/// `p(σ,ρ) = p(σ,φ_Q σ)·p(φ_Q σ,ρ)` for `samples` random `ρ ∈ Q`.
pub fn check_sasaki_factorization<R: Rng + ?Sized>(
    sigma: &Ray,
    q: &SubspaceElement,
    samples: usize,
    tol: f64,
    rng: &mut R,
) -> Result<CheckRecord> {
    let phi = sasaki_project(sigma, q)?;
    let to_phi = transition_probability(sigma, &phi)?;
    let mut dev = MaxDeviation::default();
    for _ in 0..samples {
        let rho = q.random_ray(rng);
        let lhs = transition_probability(sigma, &rho)?;
        let rhs = to_phi * transition_probability(&phi, &rho)?;
        dev.push_diff(lhs, rhs);
    }
    Ok(dev.record("sasaki_factorization", tol))
}

/// Random nested pair `Q ≤ R` inside one sector.
pub fn random_nested_pair<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> (SubspaceElement, SubspaceElement) {
    let sector = rng.random_range(0..dims.len());
    let d = dims[sector];
    let k = rng.random_range(0..=d);
    let outer = SubspaceElement::random_in_sector(dims, sector, k, rng);
    let j = rng.random_range(0..=k);
    let mut inner = SubspaceElement::zero(dims);
    if j > 0 {
        let mix = linalg::gaussian_matrix(k, j, rng);
        inner.blocks[sector] = linalg::column_span(&(outer.block(sector) * mix));
    }
    (inner, outer)
}

/// Orthomodular law `Q ≤ R ⟹ R = Q ∨ (R ∧ Q^⊥)` on random nested pairs;
/// the violation is the subspace distance.
pub fn check_orthomodularity<R: Rng + ?Sized>(dims: &[usize], trials: usize, tol: f64, rng: &mut R) -> CheckRecord {
    let mut dev = MaxDeviation::default();
    for _ in 0..trials {
        let (q, r) = random_nested_pair(dims, rng);
        dev.push(orthomodular_deviation(&q, &r).unwrap_or(f64::NAN));
    }
    dev.record("orthomodularity", tol)
}

pub fn orthomodular_deviation(q: &SubspaceElement, r: &SubspaceElement) -> Result<f64> {
    let rebuilt = join(q, &meet(r, &orthoplement(q))?)?;
    Ok(r.distance(&rebuilt))
}

/// Both De Morgan laws on random pairs.
pub fn check_de_morgan<R: Rng + ?Sized>(dims: &[usize], trials: usize, tol: f64, rng: &mut R) -> CheckRecord {
    let mut dev = MaxDeviation::default();
    for _ in 0..trials {
        let q = SubspaceElement::random(dims, rng);
        let r = SubspaceElement::random(dims, rng);
        let (qc, rc) = (orthoplement(&q), orthoplement(&r));
        let laws = (|| -> Result<(f64, f64)> {
            let a = orthoplement(&join(&q, &r)?).distance(&meet(&qc, &rc)?);
            let b = orthoplement(&meet(&q, &r)?).distance(&join(&qc, &rc)?);
            Ok((a, b))
        })();
        match laws {
            Ok((a, b)) => {
                dev.push(a);
                dev.push(b);
            }
            Err(_) => dev.push(f64::NAN),
        }
    }
    dev.record("de_morgan", tol)
}

pub fn check_double_complement<R: Rng + ?Sized>(dims: &[usize], trials: usize, tol: f64, rng: &mut R) -> CheckRecord {
    let mut dev = MaxDeviation::default();
    for _ in 0..trials {
        let q = SubspaceElement::random(dims, rng);
        dev.push(orthoplement(&orthoplement(&q)).distance(&q));
    }
    dev.record("double_complement", tol)
}

/// Every element is the join of the atoms read off its basis columns.
pub fn check_atomisticity<R: Rng + ?Sized>(dims: &[usize], trials: usize, tol: f64, rng: &mut R) -> CheckRecord {
    let mut dev = MaxDeviation::default();
    for _ in 0..trials {
        let q = SubspaceElement::random(dims, rng);
        let rebuilt = q
            .atoms()
            .iter()
            .try_fold(SubspaceElement::zero(dims), |acc, a| join(&acc, &SubspaceElement::atom(dims, a)?));
        dev.push(rebuilt.map(|r| r.distance(&q)).unwrap_or(f64::NAN));
    }
    dev.record("atomisticity", tol)
}

#[derive(Debug, Clone)]
pub struct CoveringReport {
    pub dim_q: usize,
    pub dim_join: usize,
    /// `(ρ ∨ Q) ∧ Q^⊥`.
    pub residual: SubspaceElement,
    pub is_atom: bool,
}

impl CoveringReport {
    pub fn holds(&self) -> bool {
        self.is_atom && self.dim_join == self.dim_q + 1
    }
}

/// Covering property: for `ρ ∉ Q`, `(ρ ∨ Q) ∧ Q^⊥` is an atom and
/// `dim(ρ ∨ Q) = dim Q + 1`.
pub fn check_covering(rho: &Ray, q: &SubspaceElement) -> Result<CoveringReport> {
    if q.contains_ray(rho)? {
        return Err(TpsError::Precondition("the ray already lies in Q".into()));
    }
    let dims = q.sector_dims();
    let joined = join(&SubspaceElement::atom(dims, rho)?, q)?;
    let residual = meet(&joined, &orthoplement(q))?;
    Ok(CoveringReport { dim_q: q.dim(), dim_join: joined.dim(), is_atom: residual.dim() == 1, residual })
}

/// Randomized covering check: count of failures as the violation.
pub fn check_covering_random<R: Rng + ?Sized>(dims: &[usize], trials: usize, rng: &mut R) -> CheckRecord {
    let mut failures = 0usize;
    let mut samples = 0usize;
    while samples < trials {
        let sector = rng.random_range(0..dims.len());
        let k = rng.random_range(0..dims[sector]);
        let q = SubspaceElement::random_in_sector(dims, sector, k, rng);
        let rho_sector = rng.random_range(0..dims.len());
        let rho = Ray::random(rho_sector, dims[rho_sector], rng);
        match check_covering(&rho, &q) {
            Ok(rep) if rep.holds() => {}
            Ok(_) => failures += 1,
            Err(TpsError::Precondition(_)) => continue,
            Err(_) => failures += 1,
        }
        samples += 1;
    }
    CheckRecord::new("covering", failures as f64, 0.0, samples)
}

/// Bloch vector `(x, y, z)` of a unit vector `c ∈ C²` under the density
/// parametrization `½[[1+x, y+iz], [y−iz, 1−x]]`.
pub fn bloch_vector(c0: Complex64, c1: Complex64) -> [f64; 3] {
    let off = c0 * c1.conj();
    [c0.norm_sqr() - c1.norm_sqr(), 2.0 * off.re, 2.0 * off.im]
}

#[derive(Debug, Clone)]
pub struct TwoSphereReport {
    pub max_error: f64,
    pub samples: usize,
}

/// Samples pairs `z, w` in the plane `ρ ∨ σ`, maps them onto the Bloch sphere
/// and compares `p(z, w)` with `½(1 + cos θ)`.
pub fn check_two_sphere<R: Rng + ?Sized>(
    rho: &Ray,
    sigma: &Ray,
    samples: usize,
    rng: &mut R,
) -> Result<TwoSphereReport> {
    if rho.sector() != sigma.sector() {
        return Err(TpsError::Precondition("rays lie in different sectors".into()));
    }
    if rho.same_point(sigma) {
        return Err(TpsError::Precondition("rays coincide".into()));
    }
    let d = rho.dim();
    let mut dims = vec![0; rho.sector() + 1];
    dims[rho.sector()] = d;
    let plane = SubspaceElement::orthoclosure(&dims, &[rho.clone(), sigma.clone()])?;
    let basis = plane.block(rho.sector());
    debug_assert_eq!(basis.ncols(), 2);
    let mut max_error = 0.0_f64;
    for _ in 0..samples {
        let cz = linalg::random_unit_vector(2, rng);
        let cw = linalg::random_unit_vector(2, rng);
        let z = Ray::new(rho.sector(), basis * &cz)?;
        let w = Ray::new(rho.sector(), basis * &cw)?;
        let p = transition_probability(&z, &w)?;
        let (bz, bw) = (bloch_vector(cz[0], cz[1]), bloch_vector(cw[0], cw[1]));
        let cos = (bz[0] * bw[0] + bz[1] * bw[1] + bz[2] * bw[2]).clamp(-1.0, 1.0);
        let theta = cos.acos();
        let err = (p - 0.5 * (1.0 + theta.cos())).abs();
        max_error = if err.is_nan() { f64::NAN } else { max_error.max(err) };
    }
    Ok(TwoSphereReport { max_error, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(21)
    }

    fn e(d: usize, k: usize) -> Ray {
        Ray::basis(0, d, k)
    }

    fn span(d: usize, ks: &[usize]) -> SubspaceElement {
        let rays: Vec<Ray> = ks.iter().map(|&k| e(d, k)).collect();
        SubspaceElement::orthoclosure(&[d], &rays).unwrap()
    }

    #[test]
    fn complement_of_a_line() {
        let q = span(3, &[0]);
        let c = orthoplement(&q);
        assert!(c.distance(&span(3, &[1, 2])) < 1e-12);
        assert_eq!(q.dim() + c.dim(), 3);
    }

    #[test]
    fn complement_of_zero_is_unit() {
        let c = orthoplement(&SubspaceElement::zero(&[2, 3]));
        assert!(c.distance(&SubspaceElement::unit(&[2, 3])) < 1e-15);
        assert!(orthoplement(&SubspaceElement::unit(&[2, 3])).is_zero());
    }

    #[test]
    fn random_complement_projections_sum_to_identity() {
        let mut rng = rng();
        let q = SubspaceElement::random_in_sector(&[4], 0, 2, &mut rng);
        let c = orthoplement(&q);
        let sum = q.projector(0) + c.projector(0);
        assert!(linalg::max_abs_entry(&(sum - CMat::identity(4, 4))) < 1e-12);
        assert!(orthoplement(&c).distance(&q) < 1e-10);
    }

    #[test]
    fn closure_examples() {
        assert_eq!(span(3, &[0, 1]).dim(), 2);
        let mut rng = rng();
        let rho = Ray::random(0, 3, &mut rng);
        let atom = SubspaceElement::atom(&[3], &rho).unwrap();
        assert_eq!(atom.dim(), 1);
        assert!(atom.contains_ray(&rho).unwrap());
        let sigma = Ray::random(0, 3, &mut rng);
        let plane = SubspaceElement::orthoclosure(&[3], &[rho.clone(), sigma.clone()]).unwrap();
        assert_eq!(plane.dim(), 2);
        assert!(plane.contains_ray(&rho).unwrap() && plane.contains_ray(&sigma).unwrap());
        // Idempotent.
        let again = SubspaceElement::orthoclosure(&[3], &plane.atoms()).unwrap();
        assert!(again.distance(&plane) < 1e-12);
    }

    #[test]
    fn meet_and_join_of_coordinate_planes() {
        let m = meet(&span(3, &[0, 1]), &span(3, &[1, 2])).unwrap();
        assert!(m.distance(&span(3, &[1])) < 1e-12);
        let j = join(&span(3, &[0]), &span(3, &[1])).unwrap();
        assert!(j.distance(&span(3, &[0, 1])) < 1e-12);
    }

    #[test]
    fn dimension_formula_for_generic_pairs() {
        let mut rng = rng();
        for (a, b) in [(2, 2), (3, 3), (2, 4), (1, 3), (3, 4)] {
            let q = SubspaceElement::random_in_sector(&[5], 0, a, &mut rng);
            let r = SubspaceElement::random_in_sector(&[5], 0, b, &mut rng);
            let jd = join(&q, &r).unwrap().dim();
            let md = meet(&q, &r).unwrap().dim();
            // Generic position: dim(Q∧R) = max(0, a + b − 5).
            assert_eq!(md, (a + b).saturating_sub(5));
            assert_eq!(jd, a + b - md);
        }
    }

    #[test]
    fn sasaki_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sigma = Ray::from_real(0, &[s, 0.0, s]).unwrap();
        let phi = sasaki_project(&sigma, &span(3, &[0, 1])).unwrap();
        assert!(phi.same_point(&e(3, 0)));
        let inside = Ray::from_real(0, &[0.6, 0.8, 0.0]).unwrap();
        assert!(sasaki_project(&inside, &span(3, &[0, 1])).unwrap().same_point(&inside));
        assert_eq!(sasaki_project(&e(3, 2), &span(3, &[0, 1])).unwrap_err(), TpsError::DegenerateProjection);
    }

    #[test]
    fn sasaki_factorization_on_random_data() {
        let mut rng = rng();
        let q = SubspaceElement::random_in_sector(&[4], 0, 2, &mut rng);
        let sigma = Ray::random(0, 4, &mut rng);
        let rec = check_sasaki_factorization(&sigma, &q, 20, 1e-10, &mut rng).unwrap();
        assert!(rec.pass, "{rec:?}");
        assert_eq!(rec.samples, 20);
    }

    #[test]
    fn orthomodularity_examples() {
        let q = span(3, &[0]);
        let r = span(3, &[0, 1]);
        assert!(orthomodular_deviation(&q, &r).unwrap() < 1e-12);
        assert!(meet(&r, &orthoplement(&r)).unwrap().is_zero());
        assert!(orthomodular_deviation(&r, &r).unwrap() < 1e-12);
        let mut rng = rng();
        let rec = check_orthomodularity(&[5], 100, 1e-9, &mut rng);
        assert!(rec.pass, "{rec:?}");
    }

    #[test]
    fn covering_examples() {
        let q = span(4, &[0, 1]);
        let rep = check_covering(&e(4, 2), &q).unwrap();
        assert!(rep.holds());
        assert_eq!((rep.dim_join, rep.dim_q), (3, 2));
        assert!(rep.residual.distance(&span(4, &[2])) < 1e-12);

        let mut rng = rng();
        let q = SubspaceElement::random_in_sector(&[4], 0, 2, &mut rng);
        let rep = check_covering(&Ray::random(0, 4, &mut rng), &q).unwrap();
        assert!(rep.holds());
        assert_eq!(rep.residual.dim(), 1);

        assert!(matches!(check_covering(&e(4, 0), &span(4, &[0, 1])), Err(TpsError::Precondition(_))));
    }

    #[test]
    fn two_sphere_endpoints() {
        // Orthogonal rays sit at antipodes, equal rays coincide.
        let (a, b) = (bloch_vector(linalg::ONE, linalg::ZERO), bloch_vector(linalg::ZERO, linalg::ONE));
        let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        assert_eq!(cos, -1.0);
        assert!((0.5 * (1.0 + cos.acos().cos())).abs() < 1e-15);
        assert!((0.5 * (1.0 + (1.0f64).acos().cos()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_sphere_random_planes() {
        let mut rng = rng();
        let rho = Ray::random(0, 4, &mut rng);
        let sigma = Ray::random(0, 4, &mut rng);
        let rep = check_two_sphere(&rho, &sigma, 50, &mut rng).unwrap();
        assert!(rep.max_error < 1e-10, "{rep:?}");
        assert!(check_two_sphere(&rho, &rho, 5, &mut rng).is_err());
    }

    #[test]
    fn join_across_sectors_has_unit_blocks() {
        let dims = [2, 3];
        let mut rng = rng();
        let a = Ray::random(0, 2, &mut rng);
        let b = Ray::random(1, 3, &mut rng);
        let j = join(&SubspaceElement::atom(&dims, &a).unwrap(), &SubspaceElement::atom(&dims, &b).unwrap()).unwrap();
        assert_eq!((j.dim_in(0), j.dim_in(1)), (1, 1));
        // No superposition across sectors: only a and b themselves lie in the join.
        let mixed = j.random_ray(&mut rng);
        assert!(mixed.same_point(&a) || mixed.same_point(&b));
    }

    #[test]
    fn randomized_lattice_laws() {
        let mut rng = rng();
        let dims = [2, 5];
        assert!(check_de_morgan(&dims, 50, 1e-9, &mut rng).pass);
        assert!(check_double_complement(&dims, 50, 1e-10, &mut rng).pass);
        assert!(check_atomisticity(&dims, 50, 1e-9, &mut rng).pass);
        assert!(check_covering_random(&dims, 50, &mut rng).pass);
    }

    #[test]
    fn from_blocks_rejects_non_orthonormal() {
        let m = CMat::from_element(2, 1, linalg::ONE);
        assert!(SubspaceElement::from_blocks(&[2], vec![m]).is_err());
    }
}
