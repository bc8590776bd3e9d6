//! The associative `*`-product assembled from the Jordan product and the
//! rescaled bracket, states on the block algebra, and the infimum formula
//! for transition probabilities.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Result, TpsError};
use crate::linalg::{self, CMat};
use crate::poisson::rescaled_bracket;
use crate::report::{CheckRecord, MaxDeviation};
use crate::space::{transition_probability, PureStateSpace, Ray};
use crate::spectral::{jordan, Observable, ObservableFunction};

/// `f + ig` with `f`, `g` real observables.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexObservable {
    pub re: Observable,
    pub im: Observable,
}

impl ComplexObservable {
    pub fn new(re: Observable, im: Observable) -> Result<Self> {
        if re.dims() != im.dims() {
            return Err(TpsError::Precondition("real and imaginary parts live on different spaces".into()));
        }
        Ok(Self { re, im })
    }

    pub fn real(re: Observable) -> Self {
        let im = Observable::zero(&re.dims());
        Self { re, im }
    }

    pub fn from_functions(re: &ObservableFunction, im: &ObservableFunction, dims: &[usize]) -> Result<Self> {
        Self::new(re.operator(dims)?, im.operator(dims)?)
    }

    pub fn zero(dims: &[usize]) -> Self {
        Self::real(Observable::zero(dims))
    }

    pub fn unit(dims: &[usize]) -> Self {
        Self::real(Observable::unit(dims))
    }

    pub fn random<R: Rng + ?Sized>(dims: &[usize], scale: f64, rng: &mut R) -> Self {
        Self { re: Observable::random(dims, scale, rng), im: Observable::random(dims, scale, rng) }
    }

    /// Splits arbitrary square blocks into Hermitian and anti-Hermitian parts.
    pub fn from_blocks(blocks: Vec<CMat>) -> Result<Self> {
        for b in &blocks {
            if b.nrows() != b.ncols() {
                return Err(TpsError::NotSquare { rows: b.nrows(), cols: b.ncols() });
            }
        }
        let re = Observable::hermitian(blocks.clone());
        let im = Observable::hermitian(blocks.iter().map(|b| b * (-linalg::I)).collect());
        Ok(Self { re, im })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.re.dims()
    }

    pub fn blocks(&self) -> Vec<CMat> {
        self.re.blocks().iter().zip(self.im.blocks()).map(|(f, g)| f + g * linalg::I).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self { re: self.re.clone(), im: -&self.im }
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.im.norm() == 0.0
    }

    pub fn norm(&self) -> f64 {
        self.blocks().iter().map(linalg::op_norm).fold(0.0, f64::max)
    }

    fn distance(&self, other: &Self) -> f64 {
        self.blocks()
            .iter()
            .zip(other.blocks())
            .map(|(a, b)| linalg::op_norm(&(a - b)))
            .fold(0.0, f64::max)
    }
}

fn assemble(a: &ComplexObservable, b: &ComplexObservable, space: &PureStateSpace, sign: f64) -> Result<ComplexObservable> {
    if a.dims() != b.dims() {
        return Err(TpsError::Precondition("factors live on different spaces".into()));
    }
    if a.dims() != space.sectors() {
        return Err(TpsError::Precondition("factors do not match the space".into()));
    }
    let (f, g, h, k) = (&a.re, &a.im, &b.re, &b.im);
    let c = |x: &Observable, y: &Observable| rescaled_bracket(x, y, space).scale(0.5 * sign);
    let re = &(&jordan(f, h) - &jordan(g, k)) + &(&c(f, k) + &c(g, h));
    let im = &(&jordan(f, k) + &jordan(g, h)) - &(&c(f, h) - &c(g, k));
    ComplexObservable::new(re, im)
}

/// `f·g = f∘g − ½i[f, g]` with `[f, g] = ħ{f, g}`, extended bilinearly.
pub fn cstar_product(a: &ComplexObservable, b: &ComplexObservable, space: &PureStateSpace) -> Result<ComplexObservable> {
    assemble(a, b, space, 1.0)
}

/// `f∘g + ½i[f, g]`: the product of the opposite algebra.
pub fn opposite_product(a: &ComplexObservable, b: &ComplexObservable, space: &PureStateSpace) -> Result<ComplexObservable> {
    assemble(a, b, space, -1.0)
}

/// Entrywise complex conjugation in the standard basis, an anti-isomorphism
/// between the algebra and its opposite.
pub fn conjugate(a: &ComplexObservable) -> ComplexObservable {
    ComplexObservable::from_blocks(a.blocks().iter().map(|b| b.map(|z| z.conj())).collect())
        .expect("square blocks")
}

/// Randomized check of the C*-axioms and of the assembly itself.
pub fn check_cstar_axioms<R: Rng + ?Sized>(
    space: &PureStateSpace,
    trials: usize,
    tol: f64,
    rng: &mut R,
) -> Result<Vec<CheckRecord>> {
    let dims = space.sectors().to_vec();
    let unit_hbar = PureStateSpace::new(dims.clone())?;
    let mut matrix = MaxDeviation::default();
    let mut assoc = MaxDeviation::default();
    let mut cstar = MaxDeviation::default();
    let mut submult = MaxDeviation::default();
    let mut anti = MaxDeviation::default();
    let mut isometry = MaxDeviation::default();
    let mut unit = MaxDeviation::default();
    let mut opposite = MaxDeviation::default();
    let mut hbar = MaxDeviation::default();
    let one = ComplexObservable::unit(&dims);
    for _ in 0..trials {
        let a = ComplexObservable::random(&dims, 1.0, rng);
        let b = ComplexObservable::random(&dims, 1.0, rng);
        let c = ComplexObservable::random(&dims, 1.0, rng);
        let ab = cstar_product(&a, &b, space)?;
        let direct: Vec<CMat> = a.blocks().iter().zip(b.blocks()).map(|(x, y)| x * y).collect();
        matrix.push(ab.distance(&ComplexObservable::from_blocks(direct)?));
        let left = cstar_product(&ab, &c, space)?;
        let right = cstar_product(&a, &cstar_product(&b, &c, space)?, space)?;
        assoc.push(left.distance(&right));
        let n = a.norm();
        cstar.push((cstar_product(&a.adjoint(), &a, space)?.norm() - n * n).abs());
        submult.push((ab.norm() - n * b.norm()).max(0.0));
        let rev = cstar_product(&b.adjoint(), &a.adjoint(), space)?;
        anti.push(ab.adjoint().distance(&rev));
        isometry.push((a.adjoint().norm() - n).abs());
        unit.push(cstar_product(&one, &a, space)?.distance(&a).max(cstar_product(&a, &one, space)?.distance(&a)));
        opposite.push(opposite_product(&a, &b, space)?.distance(&cstar_product(&b, &a, space)?));
        hbar.push(ab.distance(&cstar_product(&a, &b, &unit_hbar)?));
    }
    Ok(vec![
        matrix.record("cstar.matrix_product", tol),
        assoc.record("cstar.associativity", tol),
        cstar.record("cstar.cstar_identity", tol),
        submult.record("cstar.submultiplicative", tol),
        anti.record("cstar.involution_antihomomorphism", tol),
        isometry.record("cstar.involution_isometry", tol),
        unit.record("cstar.unit", tol),
        opposite.record("cstar.opposite_product", tol),
        hbar.record("cstar.hbar_independence", tol.min(1e-12)),
    ])
}

/// A finitely supported state: one density block per sector, jointly of unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFunctional {
    blocks: Vec<CMat>,
}

const STATE_TOL: f64 = 1e-10;

impl StateFunctional {
    pub fn new(blocks: Vec<CMat>) -> Result<Self> {
        let mut total = 0.0;
        for b in &blocks {
            if b.nrows() != b.ncols() {
                return Err(TpsError::NotSquare { rows: b.nrows(), cols: b.ncols() });
            }
            if linalg::max_abs_entry(&(b - b.adjoint())) > STATE_TOL {
                return Err(TpsError::Precondition("density block is not Hermitian".into()));
            }
            let (values, _) = linalg::hermitian_eigen(b);
            if values.iter().any(|&l| l < -STATE_TOL) {
                return Err(TpsError::Precondition("density block is not positive".into()));
            }
            total += b.trace().re;
        }
        if (total - 1.0).abs() > STATE_TOL {
            return Err(TpsError::Precondition(format!("state has trace {total}")));
        }
        Ok(Self { blocks: blocks.iter().map(linalg::hermitian_part).collect() })
    }

    /// The vector state `|Ω⟩⟨Ω|` of a ray.
    pub fn from_ray(ray: &Ray, dims: &[usize]) -> Result<Self> {
        let d = *dims
            .get(ray.sector())
            .ok_or(TpsError::SectorOutOfRange { sector: ray.sector(), sectors: dims.len() })?;
        if d != ray.dim() {
            return Err(TpsError::DimensionMismatch { expected: d, found: ray.dim() });
        }
        let blocks = dims
            .iter()
            .enumerate()
            .map(|(s, &d)| if s == ray.sector() { ray.projector() } else { CMat::zeros(d, d) })
            .collect();
        Ok(Self { blocks })
    }

    /// Random full-rank mixture across all sectors.
    pub fn random_mixed<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        let raw: Vec<CMat> = dims
            .iter()
            .map(|&d| {
                let g = linalg::gaussian_matrix(d, d, rng);
                &g * g.adjoint()
            })
            .collect();
        let total: f64 = raw.iter().map(|b| b.trace().re).sum();
        Self { blocks: raw.iter().map(|b| b.unscale(total)).collect() }
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn weights(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.trace().re).collect()
    }

    /// Pure iff the support is one sector and that block has rank one.
    pub fn is_pure(&self) -> bool {
        self.to_ray().is_some()
    }

    /// The ray of a pure state.
    pub fn to_ray(&self) -> Option<Ray> {
        let support: Vec<usize> = (0..self.blocks.len()).filter(|&s| self.weights()[s] > STATE_TOL).collect();
        let [s] = support[..] else { return None };
        let (values, vectors) = linalg::hermitian_eigen(&self.blocks[s]);
        if (values[0] - 1.0).abs() > STATE_TOL {
            return None;
        }
        Ray::new(s, vectors.column(0).into_owned()).ok()
    }
}

/// `ω(a) = Σ_α tr(D_α A_α)`.
pub fn state_eval(omega: &StateFunctional, a: &ComplexObservable) -> Result<Complex64> {
    if omega.blocks.iter().map(|b| b.nrows()).collect::<Vec<_>>() != a.dims() {
        return Err(TpsError::Precondition("state and observable live on different spaces".into()));
    }
    Ok(omega.blocks.iter().zip(a.blocks()).map(|(d, m)| (d * m).trace()).sum())
}

/// `p(ρ, σ) = 1 − ¼‖ρ − σ‖²` with the dual (trace) norm of the state difference.
pub fn tp_from_state_norm(rho: &StateFunctional, sigma: &StateFunctional) -> Result<f64> {
    if !rho.is_pure() || !sigma.is_pure() {
        return Err(TpsError::Precondition("transition probabilities are defined between pure states".into()));
    }
    if rho.blocks.len() != sigma.blocks.len() {
        return Err(TpsError::Precondition("states live on different spaces".into()));
    }
    let norm: f64 = rho.blocks.iter().zip(&sigma.blocks).map(|(a, b)| linalg::trace_norm(&(a - b))).sum();
    Ok((1.0 - 0.25 * norm * norm).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfimumReport {
    /// `p(ρ, σ)` from the overlap.
    pub p: f64,
    /// `ρ(P_σ)`.
    pub attained: f64,
    pub attainment_gap: f64,
    /// Smallest `ρ(A)` over the sampled feasible operators.
    pub min_sample: f64,
    /// `max(0, p − min_sample)`.
    pub lower_bound_violation: f64,
    pub samples: usize,
}

impl InfimumReport {
    pub fn records(&self, attain_tol: f64, bound_tol: f64) -> [CheckRecord; 2] {
        [
            CheckRecord::new("mtp.attainment", self.attainment_gap, attain_tol, 1),
            CheckRecord::new("mtp.lower_bound", self.lower_bound_violation, bound_tol, self.samples),
        ]
    }
}

/// Random Hermitian with spectrum in `[0, 1]`.
fn random_effect<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let u = linalg::random_unitary(d, rng);
    let diag = CMat::from_diagonal(&linalg::CVec::from_fn(d, |_, _| Complex64::new(rng.random::<f64>(), 0.0)));
    &u * diag * u.adjoint()
}

/// Feasible operator `A = P_σ + (1 − P_σ)B(1 − P_σ)` on σ's sector, arbitrary
/// effects elsewhere: `0 ≤ A ≤ 1` and `σ(A) = 1` by construction.
fn random_feasible<R: Rng + ?Sized>(sigma: &Ray, dims: &[usize], rng: &mut R) -> Observable {
    let blocks = dims
        .iter()
        .enumerate()
        .map(|(s, &d)| {
            let b = random_effect(d, rng);
            if s != sigma.sector() {
                return b;
            }
            let p = sigma.projector();
            let q = CMat::identity(d, d) - &p;
            &p + &q * b * &q
        })
        .collect();
    Observable::hermitian(blocks)
}

/// `p(ρ, σ) = inf{ f(ρ) : 0 ≤ f ≤ 1, f(σ) = 1 }`: attainment by `P_σ` and a
/// sampled one-sided bound.
pub fn mtp_infimum_check<R: Rng + ?Sized>(
    rho: &Ray,
    sigma: &Ray,
    space: &PureStateSpace,
    trials: usize,
    rng: &mut R,
) -> Result<InfimumReport> {
    space.check_ray(rho)?;
    space.check_ray(sigma)?;
    let p = transition_probability(rho, sigma)?;
    let attained = if rho.sector() == sigma.sector() { linalg::expectation(&sigma.projector(), rho.vector()) } else { 0.0 };
    let mut min_sample = f64::INFINITY;
    for _ in 0..trials {
        let a = random_feasible(sigma, space.sectors(), rng);
        min_sample = min_sample.min(a.eval(rho)?);
    }
    Ok(InfimumReport {
        p,
        attained,
        attainment_gap: (attained - p).abs(),
        min_sample,
        lower_bound_violation: if trials == 0 { 0.0 } else { (p - min_sample).max(0.0) },
        samples: trials,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripReport {
    /// Number of pure states when the extreme boundary is finite (all sectors one-dimensional).
    pub extreme_points: Option<usize>,
    pub rays_to_pure: usize,
    pub rays_checked: usize,
    pub pure_to_rays: MaxDeviation,
    pub mixed_rejected: usize,
    pub mixed_checked: usize,
    /// Largest `|x² + y² + z² − 1|` of pure states in two-dimensional sectors.
    pub bloch_radius: MaxDeviation,
    /// Largest disagreement among overlap, state-norm and infimum values.
    pub mielnik: MaxDeviation,
    pub lower_bound: MaxDeviation,
}

impl RoundtripReport {
    pub fn records(&self, tol: f64) -> Vec<CheckRecord> {
        let miss = |ok: usize, all: usize| (all - ok) as f64;
        vec![
            CheckRecord::new("pure_states.rays_are_pure", miss(self.rays_to_pure, self.rays_checked), 0.0, self.rays_checked),
            self.pure_to_rays.record("pure_states.pure_are_rays", tol),
            CheckRecord::new("pure_states.mixed_rejected", miss(self.mixed_rejected, self.mixed_checked), 0.0, self.mixed_checked),
            self.bloch_radius.record("pure_states.bloch_sphere", tol),
            self.mielnik.record("pure_states.mielnik_consistency", tol),
            self.lower_bound.record("pure_states.infimum_lower_bound", tol),
        ]
    }
}

/// Pure states of the block algebra against the rays of the space.
pub fn pure_state_roundtrip<R: Rng + ?Sized>(space: &PureStateSpace, samples: usize, rng: &mut R) -> Result<RoundtripReport> {
    let dims = space.sectors().to_vec();
    let mut report = RoundtripReport {
        extreme_points: dims.iter().all(|&d| d == 1).then_some(dims.len()),
        rays_to_pure: 0,
        rays_checked: 0,
        pure_to_rays: MaxDeviation::default(),
        mixed_rejected: 0,
        mixed_checked: 0,
        bloch_radius: MaxDeviation::default(),
        mielnik: MaxDeviation::default(),
        lower_bound: MaxDeviation::default(),
    };
    let mut rays: Vec<Ray> = space.points().to_vec();
    if report.extreme_points.is_some() {
        rays.extend((0..dims.len()).map(|s| Ray::basis(s, 1, 0)));
    } else {
        rays.extend((0..samples).map(|_| space.random_ray(rng)));
    }
    for ray in &rays {
        report.rays_checked += 1;
        let state = StateFunctional::from_ray(ray, &dims)?;
        if state.is_pure() {
            report.rays_to_pure += 1;
        }
        // Back from the state: the recovered ray must give the same density.
        match state.to_ray() {
            Some(back) => {
                let again = StateFunctional::from_ray(&back, &dims)?;
                let gap = state.blocks.iter().zip(&again.blocks).map(|(a, b)| linalg::max_abs_entry(&(a - b))).fold(0.0, f64::max);
                report.pure_to_rays.push(gap);
            }
            None => report.pure_to_rays.push(f64::INFINITY),
        }
        if ray.dim() == 2 {
            let d = &state.blocks[ray.sector()];
            let x = (d[(0, 0)] - d[(1, 1)]).re;
            let yz = 2.0 * d[(0, 1)].norm();
            report.bloch_radius.push((x * x + yz * yz - 1.0).abs());
        }
    }
    if dims.iter().any(|&d| d > 1) || dims.len() > 1 {
        for _ in 0..samples.max(1) {
            report.mixed_checked += 1;
            if !StateFunctional::random_mixed(&dims, rng).is_pure() {
                report.mixed_rejected += 1;
            }
        }
    }
    for pair in rays.windows(2) {
        let (rho, sigma) = (&pair[0], &pair[1]);
        let p = transition_probability(rho, sigma)?;
        let by_norm = tp_from_state_norm(&StateFunctional::from_ray(rho, &dims)?, &StateFunctional::from_ray(sigma, &dims)?)?;
        let inf = mtp_infimum_check(rho, sigma, space, 20, rng)?;
        report.mielnik.push((p - by_norm).abs().max((p - inf.attained).abs()));
        report.lower_bound.push(inf.lower_bound_violation);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(5)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sigma(k: usize) -> Observable {
        let m = match k {
            0 => [c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)],
            1 => [c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)],
            _ => [c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)],
        };
        Observable::from_blocks(vec![CMat::from_row_slice(2, 2, &m)]).unwrap()
    }

    #[test]
    fn pauli_products() {
        let space = PureStateSpace::new(vec![2]).unwrap();
        let x = ComplexObservable::real(sigma(0));
        let y = ComplexObservable::real(sigma(1));
        let xy = cstar_product(&x, &y, &space).unwrap();
        let i_z = ComplexObservable::new(Observable::zero(&[2]), sigma(2)).unwrap();
        assert!(xy.distance(&i_z) < 1e-12);
        let yx = opposite_product(&x, &y, &space).unwrap();
        assert!(yx.distance(&i_z.adjoint()) < 1e-12);
        assert!(yx.distance(&conjugate(&xy)) < 1e-12);
    }

    #[test]
    fn commuting_and_unit_products() {
        let mut rng = rng();
        let space = PureStateSpace::new(vec![3]).unwrap();
        let one = ComplexObservable::unit(&[3]);
        assert!(cstar_product(&one, &one, &space).unwrap().distance(&one) < 1e-14);
        let d = |v: [f64; 3]| {
            let m = CMat::from_diagonal(&linalg::CVec::from_fn(3, |i, _| c(v[i], 0.0)));
            ComplexObservable::real(Observable::from_blocks(vec![m]).unwrap())
        };
        let (a, b) = (d([1.0, 2.0, -1.0]), d([0.5, 0.0, 3.0]));
        let ab = cstar_product(&a, &b, &space).unwrap();
        let j = ComplexObservable::real(jordan(&a.re, &b.re));
        assert!(ab.distance(&j) < 1e-12);
        assert!(opposite_product(&a, &b, &space).unwrap().distance(&ab) < 1e-12);
        let b = ComplexObservable::random(&[3], 1.0, &mut rng);
        assert!(opposite_product(&one, &b, &space).unwrap().distance(&b) < 1e-12);
    }

    #[test]
    fn axioms_on_two_sectors() {
        let mut rng = rng();
        let space = PureStateSpace::with_hbar(vec![2, 3], vec![1.0, 3.0]).unwrap();
        for rec in check_cstar_axioms(&space, 100, 1e-9, &mut rng).unwrap() {
            assert!(rec.pass, "{rec:?}");
        }
    }

    #[test]
    fn cstar_identity_examples() {
        let space = PureStateSpace::new(vec![2]).unwrap();
        let m = CMat::from_diagonal(&linalg::CVec::from_vec(vec![c(-3.0, 0.0), c(2.0, 0.0)]));
        let a = ComplexObservable::real(Observable::from_blocks(vec![m]).unwrap());
        assert!((cstar_product(&a.adjoint(), &a, &space).unwrap().norm() - 9.0).abs() < 1e-12);
        assert!((a.norm() - 3.0).abs() < 1e-12);
        let z = ComplexObservable::zero(&[2]);
        assert_eq!(cstar_product(&z, &z, &space).unwrap().norm(), 0.0);
    }

    #[test]
    fn states() {
        let mut rng = rng();
        let dims = [2, 3];
        let r = Ray::random(1, 3, &mut rng);
        let omega = StateFunctional::from_ray(&r, &dims).unwrap();
        assert!(omega.is_pure());
        assert!(omega.to_ray().unwrap().same_point(&r));
        let one = ComplexObservable::unit(&dims);
        assert!((state_eval(&omega, &one).unwrap() - 1.0).norm() < 1e-14);
        let a = ComplexObservable::real(Observable::random(&dims, 1.0, &mut rng));
        let v = state_eval(&omega, &a).unwrap();
        assert!(v.im.abs() < 1e-14 && (v.re - a.re.eval(&r).unwrap()).abs() < 1e-12);

        let mixed = StateFunctional::random_mixed(&dims, &mut rng);
        assert!(!mixed.is_pure());
        assert!(StateFunctional::new(mixed.blocks().to_vec()).is_ok());
        let b = ComplexObservable::random(&dims, 1.0, &mut rng);
        let oracle: Complex64 = (0..2)
            .map(|s| {
                let (d, m) = (&mixed.blocks()[s], &b.blocks()[s]);
                let mut t = linalg::ZERO;
                for i in 0..d.nrows() {
                    for j in 0..d.nrows() {
                        t += d[(i, j)] * m[(j, i)];
                    }
                }
                t
            })
            .sum();
        assert!((state_eval(&mixed, &b).unwrap() - oracle).norm() < 1e-12);
        let space = PureStateSpace::new(dims.to_vec()).unwrap();
        let bb = cstar_product(&b.adjoint(), &b, &space).unwrap();
        assert!(state_eval(&mixed, &bb).unwrap().re >= 0.0);
        assert!(StateFunctional::new(vec![CMat::identity(2, 2)]).is_err());
    }

    #[test]
    fn norm_formula_for_transition_probability() {
        let mut rng = rng();
        let dims = [3, 2];
        let (r, s) = (Ray::random(0, 3, &mut rng), Ray::random(0, 3, &mut rng));
        let st = |x: &Ray| StateFunctional::from_ray(x, &dims).unwrap();
        let p = transition_probability(&r, &s).unwrap();
        assert!((tp_from_state_norm(&st(&r), &st(&s)).unwrap() - p).abs() < 1e-10);
        let diff = linalg::trace_norm(&(st(&r).blocks()[0].clone() - st(&s).blocks()[0].clone()));
        assert!((diff - 2.0 * (1.0 - p).sqrt()).abs() < 1e-10);
        assert!((tp_from_state_norm(&st(&r), &st(&r)).unwrap() - 1.0).abs() < 1e-12);
        let (e0, e1) = (Ray::basis(0, 3, 0), Ray::basis(0, 3, 1));
        assert!(tp_from_state_norm(&st(&e0), &st(&e1)).unwrap().abs() < 1e-12);
        let other = Ray::random(1, 2, &mut rng);
        assert_eq!(tp_from_state_norm(&st(&r), &st(&other)).unwrap(), 0.0);
        let mixed = StateFunctional::random_mixed(&dims, &mut rng);
        assert!(tp_from_state_norm(&st(&r), &mixed).is_err());
    }

    #[test]
    fn infimum_formula() {
        let mut rng = rng();
        let space = PureStateSpace::new(vec![3]).unwrap();
        let r = Ray::random(0, 3, &mut rng);
        let same = mtp_infimum_check(&r, &r, &space, 50, &mut rng).unwrap();
        assert!((same.attained - 1.0).abs() < 1e-12 && same.lower_bound_violation < 1e-10);
        let (e0, e1) = (Ray::basis(0, 3, 0), Ray::basis(0, 3, 1));
        let orth = mtp_infimum_check(&e0, &e1, &space, 50, &mut rng).unwrap();
        assert!(orth.attained.abs() < 1e-14);
        let s = Ray::random(0, 3, &mut rng);
        let rep = mtp_infimum_check(&r, &s, &space, 500, &mut rng).unwrap();
        assert!(rep.attainment_gap < 1e-10);
        assert!(rep.min_sample >= rep.p - 1e-10);
        assert!(rep.records(1e-10, 1e-10).iter().all(|c| c.pass));
    }

    #[test]
    fn roundtrips() {
        let mut rng = rng();
        let qubit = PureStateSpace::new(vec![2]).unwrap();
        let rep = pure_state_roundtrip(&qubit, 50, &mut rng).unwrap();
        assert!(rep.bloch_radius.value < 1e-12);
        assert!(rep.records(1e-9).iter().all(|c| c.pass));

        let classical = PureStateSpace::classical(2).unwrap();
        let rep = pure_state_roundtrip(&classical, 10, &mut rng).unwrap();
        assert_eq!(rep.extreme_points, Some(2));
        assert!(rep.records(1e-9).iter().all(|c| c.pass));

        let mixed = PureStateSpace::new(vec![2, 3]).unwrap();
        let rep = pure_state_roundtrip(&mixed, 30, &mut rng).unwrap();
        assert_eq!(rep.extreme_points, None);
        assert_eq!(rep.mixed_rejected, rep.mixed_checked);
        assert!(rep.records(1e-9).iter().all(|c| c.pass), "{rep:?}");
    }
}
