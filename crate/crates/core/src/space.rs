//! Finite transition probability spaces: rays, sector tables and kernels.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Result, TpsError};
use crate::lattice::SubspaceElement;
use crate::linalg::{self, CMat, CVec};

/// Two rays are the same point when `|⟨u,v⟩|² > 1 − SAME_POINT_EPS`.
pub const SAME_POINT_EPS: f64 = 1e-10;
/// Edge threshold of the sector graph.
pub const SECTOR_EPS: f64 = 1e-12;
/// Tolerance on the unit norm of a ray representative.
pub const NORM_TOL: f64 = 1e-12;

/// A pure state: a unit vector of one sector, up to a phase.
#[derive(Debug, Clone)]
pub struct Ray {
    sector: usize,
    vector: CVec,
}

impl Ray {
    /// Normalizes `vector`; fails on zero or non-finite input.
    pub fn new(sector: usize, vector: CVec) -> Result<Self> {
        if vector.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(TpsError::NonFinite);
        }
        if vector.is_empty() {
            return Err(TpsError::DimensionMismatch { expected: 1, found: 0 });
        }
        let norm = vector.norm();
        if norm <= f64::MIN_POSITIVE * 1e10 {
            return Err(TpsError::ZeroVector);
        }
        if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            // Already unit up to rounding; keep the stored amplitudes bit-for-bit.
            return Ok(Self { sector, vector });
        }
        Ok(Self { sector, vector: vector / Complex64::from(norm) })
    }

    /// Accepts an already normalized vector, rejecting it otherwise.
    pub fn from_unit(sector: usize, vector: CVec) -> Result<Self> {
        let norm = vector.norm();
        if !norm.is_finite() {
            return Err(TpsError::NonFinite);
        }
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(TpsError::NotNormalized { norm });
        }
        Self::new(sector, vector)
    }

    pub fn from_components(sector: usize, components: &[Complex64]) -> Result<Self> {
        Self::new(sector, CVec::from_column_slice(components))
    }

    /// Real amplitudes, convenient in examples and tests.
    pub fn from_real(sector: usize, components: &[f64]) -> Result<Self> {
        Self::new(
            sector,
            CVec::from_iterator(components.len(), components.iter().map(|&x| Complex64::from(x))),
        )
    }

    /// The standard basis vector `e_index` of a sector of dimension `dim`.
    pub fn basis(sector: usize, dim: usize, index: usize) -> Self {
        let mut v = CVec::zeros(dim);
        v[index] = linalg::ONE;
        Self { sector, vector: v }
    }

    pub fn random<R: Rng + ?Sized>(sector: usize, dim: usize, rng: &mut R) -> Self {
        Self { sector, vector: linalg::random_unit_vector(dim, rng) }
    }

    pub fn sector(&self) -> usize {
        self.sector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn vector(&self) -> &CVec {
        &self.vector
    }

    pub fn projector(&self) -> CMat {
        linalg::outer(&self.vector)
    }

    /// Multiplies the representative by `e^{iθ}`; the point is unchanged.
    pub fn with_phase(&self, theta: f64) -> Self {
        Self { sector: self.sector, vector: &self.vector * Complex64::from_polar(1.0, theta) }
    }

    /// Projective identity: same sector and overlap `> 1 − SAME_POINT_EPS`.
    pub fn same_point(&self, other: &Ray) -> bool {
        self.sector == other.sector
            && self.dim() == other.dim()
            && linalg::inner(&self.vector, &other.vector).norm_sqr() > 1.0 - SAME_POINT_EPS
    }
}

/// `|⟨Ω_ρ, Ω_σ⟩|²` inside a sector, zero across sectors.
pub fn transition_probability(rho: &Ray, sigma: &Ray) -> Result<f64> {
    if rho.sector != sigma.sector {
        return Ok(0.0);
    }
    if rho.dim() != sigma.dim() {
        return Err(TpsError::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
    }
    Ok(linalg::inner(&rho.vector, &sigma.vector).norm_sqr().min(1.0))
}

/// A union of projective Hilbert spaces, one per sector, with an optional
/// sampled configuration of points and a per-sector Planck constant.
#[derive(Debug, Clone)]
pub struct PureStateSpace {
    sectors: Vec<usize>,
    hbar: Vec<f64>,
    points: Vec<Ray>,
}

impl PureStateSpace {
    pub fn new(sectors: Vec<usize>) -> Result<Self> {
        let hbar = vec![1.0; sectors.len()];
        Self::with_hbar(sectors, hbar)
    }

    pub fn with_hbar(sectors: Vec<usize>, hbar: Vec<f64>) -> Result<Self> {
        if sectors.is_empty() {
            return Err(TpsError::Precondition("a space needs at least one sector".into()));
        }
        if let Some(pos) = sectors.iter().position(|&d| d == 0) {
            return Err(TpsError::Precondition(format!("sector {pos} has dimension 0")));
        }
        if hbar.len() != sectors.len() {
            return Err(TpsError::DimensionMismatch { expected: sectors.len(), found: hbar.len() });
        }
        for (sector, (&h, &d)) in hbar.iter().zip(&sectors).enumerate() {
            if !h.is_finite() || (d > 1 && h <= 0.0) || h < 0.0 {
                return Err(TpsError::InvalidHbar { sector, value: h });
            }
        }
        Ok(Self { sectors, hbar, points: Vec::new() })
    }

    /// Every point is validated against the sector table; duplicates are rejected.
    pub fn with_points(mut self, points: Vec<Ray>) -> Result<Self> {
        for p in &points {
            self.check_ray(p)?;
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i].same_point(&points[j]) {
                    return Err(TpsError::DuplicatePoint { first: i, second: j });
                }
            }
        }
        self.points = points;
        Ok(self)
    }

    /// The classical space on `n` points: every point is its own one-dimensional sector.
    pub fn classical(n: usize) -> Result<Self> {
        let space = Self::new(vec![1; n])?;
        let points = (0..n).map(|k| Ray::basis(k, 1, 0)).collect();
        space.with_points(points)
    }

    pub fn sectors(&self) -> &[usize] {
        &self.sectors
    }

    pub fn hbar(&self) -> &[f64] {
        &self.hbar
    }

    pub fn hbar_of(&self, sector: usize) -> f64 {
        self.hbar[sector]
    }

    pub fn points(&self) -> &[Ray] {
        &self.points
    }

    pub fn total_dim(&self) -> usize {
        self.sectors.iter().sum()
    }

    pub fn is_classical(&self) -> bool {
        self.sectors.iter().all(|&d| d == 1)
    }

    pub fn check_ray(&self, ray: &Ray) -> Result<()> {
        let d = *self
            .sectors
            .get(ray.sector)
            .ok_or(TpsError::SectorOutOfRange { sector: ray.sector, sectors: self.sectors.len() })?;
        if d != ray.dim() {
            return Err(TpsError::DimensionMismatch { expected: d, found: ray.dim() });
        }
        Ok(())
    }

    pub fn random_ray_in<R: Rng + ?Sized>(&self, sector: usize, rng: &mut R) -> Ray {
        Ray::random(sector, self.sectors[sector], rng)
    }

    /// A random point, sector drawn uniformly.
    pub fn random_ray<R: Rng + ?Sized>(&self, rng: &mut R) -> Ray {
        let sector = rng.random_range(0..self.sectors.len());
        self.random_ray_in(sector, rng)
    }
}

/// Pairwise transition probabilities over a finite list of points.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    p: DMatrix<f64>,
}

impl TransitionKernel {
    /// Shape and finiteness are enforced here; the axioms are checked by
    /// [`check_tps_axioms`] so corrupted data can still be reported on.
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        if p.nrows() != p.ncols() {
            return Err(TpsError::NotSquare { rows: p.nrows(), cols: p.ncols() });
        }
        if p.nrows() == 0 {
            return Err(TpsError::EmptyKernel);
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(TpsError::NonFinite);
        }
        Ok(Self { p })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(TpsError::NotSquare { rows: n, cols: bad.len() });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.p.row(i).iter().copied().collect()).collect()
    }

    /// Principal sub-kernel on `indices`.
    pub fn restrict(&self, indices: &[usize]) -> TransitionKernel {
        let m = indices.len();
        TransitionKernel { p: DMatrix::from_fn(m, m, |a, b| self.p[(indices[a], indices[b])]) }
    }
}

/// Kernel of the sampled configuration of `space`.
pub fn kernel_from_points(space: &PureStateSpace) -> Result<TransitionKernel> {
    kernel_from_rays(space.points())
}

pub fn kernel_from_rays(points: &[Ray]) -> Result<TransitionKernel> {
    let n = points.len();
    if n == 0 {
        return Err(TpsError::EmptyKernel);
    }
    let mut p = DMatrix::from_element(n, n, 0.0);
    for i in 0..n {
        p[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let v = transition_probability(&points[i], &points[j])?;
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
    TransitionKernel::new(p)
}

/// The kernel-level axioms of a transition probability space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelAxiom {
    /// Every entry lies in `[0, 1]`.
    Range,
    /// `p(ρ,ρ) = 1`, and `p(ρ,σ) = 1` only for `ρ = σ`.
    Identity,
    /// `p(ρ,σ) = 0` exactly when `p(σ,ρ) = 0`.
    ZeroSymmetry,
    /// `p(ρ,σ) = p(σ,ρ)`.
    Symmetry,
}

impl KernelAxiom {
    pub const ALL: [KernelAxiom; 4] =
        [KernelAxiom::Range, KernelAxiom::Identity, KernelAxiom::ZeroSymmetry, KernelAxiom::Symmetry];

    pub fn name(self) -> &'static str {
        match self {
            KernelAxiom::Range => "range",
            KernelAxiom::Identity => "identity",
            KernelAxiom::ZeroSymmetry => "zero_symmetry",
            KernelAxiom::Symmetry => "symmetry",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomOutcome {
    pub axiom: KernelAxiom,
    pub pass: bool,
    pub max_violation: f64,
    /// First offending index pair, if any.
    pub witness: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub tolerance: f64,
    pub outcomes: Vec<AxiomOutcome>,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }

    pub fn outcome(&self, axiom: KernelAxiom) -> &AxiomOutcome {
        self.outcomes.iter().find(|o| o.axiom == axiom).expect("every axiom is reported")
    }

    pub fn failures(&self) -> impl Iterator<Item = &AxiomOutcome> {
        self.outcomes.iter().filter(|o| !o.pass)
    }
}

#[derive(Default)]
struct Worst {
    value: f64,
    witness: Option<(usize, usize)>,
}

impl Worst {
    fn offer(&mut self, value: f64, at: (usize, usize)) {
        if value > self.value {
            self.value = value;
            self.witness = Some(at);
        }
    }
}

/// Checks range, identity, zero-symmetry and symmetry. Never fails; the
/// report carries each violation magnitude.
pub fn check_tps_axioms(kernel: &TransitionKernel, tol: f64) -> AxiomReport {
    let n = kernel.n();
    let p = &kernel.p;
    let mut range = Worst::default();
    let mut identity = Worst::default();
    let mut zero_sym = Worst::default();
    let mut sym = Worst::default();
    for i in 0..n {
        for j in 0..n {
            let v = p[(i, j)];
            range.offer((-v).max(v - 1.0).max(0.0), (i, j));
            if i == j {
                identity.offer((1.0 - v).abs(), (i, j));
                continue;
            }
            // Distinct indices are distinct points.
            identity.offer((v - (1.0 - SAME_POINT_EPS)).max(0.0), (i, j));
            let w = p[(j, i)];
            sym.offer((v - w).abs(), (i, j));
            if (v.abs() <= tol) != (w.abs() <= tol) {
                zero_sym.offer(v.abs().max(w.abs()), (i, j));
            }
        }
    }
    let make = |axiom, w: Worst| AxiomOutcome { axiom, pass: w.value <= tol, max_violation: w.value, witness: w.witness };
    AxiomReport {
        tolerance: tol,
        outcomes: vec![
            make(KernelAxiom::Range, range),
            make(KernelAxiom::Identity, identity),
            make(KernelAxiom::ZeroSymmetry, zero_sym),
            make(KernelAxiom::Symmetry, sym),
        ],
    }
}

/// Connected components of the graph with an edge wherever `p > SECTOR_EPS`
/// in either direction. Blocks are sorted, ordered by their smallest index.
pub fn sectors(kernel: &TransitionKernel) -> Vec<Vec<usize>> {
    let n = kernel.n();
    let mut label = vec![usize::MAX; n];
    let mut blocks = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = blocks.len();
        let mut block = vec![start];
        label[start] = id;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if label[j] == usize::MAX && kernel.p[(i, j)].max(kernel.p[(j, i)]) > SECTOR_EPS {
                    label[j] = id;
                    block.push(j);
                    stack.push(j);
                }
            }
        }
        block.sort_unstable();
        blocks.push(block);
    }
    blocks
}

/// Both basis criteria, evaluated independently.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisCheck {
    /// `|B| = dim(ambient)`.
    pub cardinality: bool,
    /// `Σ_{ρ∈B} p(ρ,σ) = 1` on the ambient subspace: the rank identity
    /// `Σ |ρ⟩⟨ρ| = P_ambient` together with the Monte-Carlo spot checks.
    pub unit_sum: bool,
    /// Largest deviation of `Σ p(ρ,σ)` from 1 over the sampled `σ`.
    pub max_sum_deviation: f64,
    /// Operator-norm gap between `Σ |ρ⟩⟨ρ|` and the ambient projection.
    pub rank_identity_gap: f64,
    pub samples: usize,
}

impl BasisCheck {
    pub fn is_basis(&self) -> bool {
        self.cardinality && self.unit_sum
    }

    pub fn criteria_agree(&self) -> bool {
        self.cardinality == self.unit_sum
    }
}

pub const BASIS_SAMPLES: usize = 100;
const BASIS_TOL: f64 = 1e-9;

/// Decides whether the pairwise orthogonal `rays` form a basis of `ambient`.
pub fn basis_check<R: Rng + ?Sized>(
    rays: &[Ray],
    ambient: &SubspaceElement,
    rng: &mut R,
) -> Result<BasisCheck> {
    for (i, a) in rays.iter().enumerate() {
        ambient.check_ray(a)?;
        if (ambient.p_q(a)? - 1.0).abs() > BASIS_TOL {
            return Err(TpsError::Precondition(format!("ray {i} lies outside the ambient subspace")));
        }
        for (j, b) in rays.iter().enumerate().skip(i + 1) {
            if transition_probability(a, b)? > BASIS_TOL {
                return Err(TpsError::Precondition(format!("rays {i} and {j} are not orthogonal")));
            }
        }
    }
    let cardinality = rays.len() == ambient.dim();

    let dims = ambient.sector_dims();
    let mut rank_identity_gap = 0.0_f64;
    for (sector, &d) in dims.iter().enumerate() {
        let mut sum = CMat::zeros(d, d);
        for r in rays.iter().filter(|r| r.sector() == sector) {
            sum += r.projector();
        }
        let gap = linalg::op_norm(&(sum - ambient.projector(sector)));
        rank_identity_gap = rank_identity_gap.max(gap);
    }

    let mut max_sum_deviation = 0.0_f64;
    let mut samples = 0;
    if ambient.dim() > 0 {
        for _ in 0..BASIS_SAMPLES {
            let sigma = ambient.random_ray(rng);
            let total: f64 = rays
                .iter()
                .map(|r| transition_probability(r, &sigma))
                .sum::<Result<f64>>()?;
            max_sum_deviation = max_sum_deviation.max((total - 1.0).abs());
            samples += 1;
        }
    }
    let unit_sum = rank_identity_gap <= BASIS_TOL && max_sum_deviation <= BASIS_TOL;
    Ok(BasisCheck { cardinality, unit_sum, max_sum_deviation, rank_identity_gap, samples })
}
