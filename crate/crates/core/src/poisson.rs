//! The Fubini-Study Poisson structure on each sector, Hamiltonian flows, and
//! the compatibility laws tying the bracket to the Jordan product.
//!
//! Two independent evaluations of the bracket are provided: the operator
//! formula `{f, g}(ρ) = (i/ħ) ⟨Ω_ρ, (AB − BA) Ω_ρ⟩` and the symplectic one,
//! computed in affine chart coordinates from derivatives of the functions
//! and the inverse Fubini-Study metric.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Result, TpsError};
use crate::linalg::{self, CMat, CVec};
use crate::report::{CheckRecord, MaxDeviation};
use crate::space::{transition_probability, PureStateSpace, Ray};
use crate::spectral::{jordan, Observable, PointFunction};

/// Scale of the Fubini-Study symplectic form that makes the chart bracket
/// coincide with the operator bracket. Recovered numerically by
/// [`calibrate_normalization`].
pub const FUBINI_STUDY_NORMALIZATION: f64 = 2.0;
/// Central finite-difference step for chart derivatives.
pub const CHART_STEP: f64 = 1e-5;
/// A pivot component below this fraction of the largest one is degenerate.
const PIVOT_DEGENERACY: f64 = 1e-6;
/// RK4 switches chart once a coordinate exceeds this modulus.
const CHART_SWITCH: f64 = 2.0;

pub const EXACT_UNITARITY_TOL: f64 = 1e-12;
pub const RK4_UNITARITY_TOL: f64 = 1e-6;

/// Affine chart: the representative has component `pivot` equal to 1 and the
/// remaining `d − 1` components stored in `coords`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    sector: usize,
    pivot: usize,
    coords: Vec<Complex64>,
}

impl ChartPoint {
    pub fn from_ray(ray: &Ray, pivot: usize) -> Result<Self> {
        let v = ray.vector();
        if pivot >= v.len() {
            return Err(TpsError::Precondition(format!("pivot {pivot} out of range")));
        }
        let best = largest_component(v);
        if v[pivot].norm() < PIVOT_DEGENERACY * v[best].norm() {
            return Err(TpsError::ChartPivot { pivot, suggested: best });
        }
        let coords = (0..v.len()).filter(|&k| k != pivot).map(|k| v[k] / v[pivot]).collect();
        Ok(Self { sector: ray.sector(), pivot, coords })
    }

    /// Chart centred on the largest-modulus component.
    pub fn best(ray: &Ray) -> Self {
        Self::from_ray(ray, largest_component(ray.vector())).expect("largest component is never degenerate")
    }

    pub fn new(sector: usize, pivot: usize, coords: Vec<Complex64>) -> Self {
        Self { sector, pivot, coords }
    }

    pub fn sector(&self) -> usize {
        self.sector
    }

    pub fn pivot(&self) -> usize {
        self.pivot
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len() + 1
    }

    /// Unnormalized representative with a 1 in the pivot slot.
    pub fn representative(&self) -> CVec {
        lift(self.pivot, &self.coords)
    }

    pub fn to_ray(&self) -> Ray {
        Ray::new(self.sector, self.representative()).expect("pivot component is 1")
    }
}

fn largest_component(v: &CVec) -> usize {
    (0..v.len()).fold(0, |best, k| if v[k].norm() > v[best].norm() { k } else { best })
}

fn lift(pivot: usize, coords: &[Complex64]) -> CVec {
    let d = coords.len() + 1;
    CVec::from_iterator(
        d,
        (0..d).map(|k| match k.cmp(&pivot) {
            std::cmp::Ordering::Less => coords[k],
            std::cmp::Ordering::Equal => linalg::ONE,
            std::cmp::Ordering::Greater => coords[k - 1],
        }),
    )
}

/// Inverse Fubini-Study metric `g^{ij̄} = (1 + |z|²)(δ_ij + z_i z̄_j)`.
fn inverse_metric(coords: &[Complex64]) -> CMat {
    let m = coords.len();
    let n = 1.0 + coords.iter().map(|z| z.norm_sqr()).sum::<f64>();
    CMat::from_fn(m, m, |i, j| {
        let delta = if i == j { linalg::ONE } else { linalg::ZERO };
        (delta + coords[i] * coords[j].conj()) * n
    })
}

fn sector_hbar(space: &PureStateSpace, sector: usize) -> Result<f64> {
    space
        .hbar()
        .get(sector)
        .copied()
        .ok_or(TpsError::SectorOutOfRange { sector, sectors: space.sectors().len() })
}

/// Operator side of the bracket: `{F, G}_α = i(F_α G_α − G_α F_α)/ħ_α`.
pub fn bracket(f: &Observable, g: &Observable, space: &PureStateSpace) -> Observable {
    let blocks = f
        .blocks()
        .iter()
        .zip(g.blocks())
        .enumerate()
        .map(|(s, (a, b))| {
            if a.nrows() <= 1 {
                return CMat::zeros(a.nrows(), a.nrows());
            }
            (linalg::commutator(a, b) * linalg::I).unscale(space.hbar_of(s))
        })
        .collect();
    Observable::from_blocks(blocks).expect("i[A,B] is Hermitian")
}

/// The ħ-free commutator `[F, G] = ħ{F, G} = i(FG − GF)`.
pub fn rescaled_bracket(f: &Observable, g: &Observable, space: &PureStateSpace) -> Observable {
    let b = bracket(f, g, space);
    per_sector_scale(&b, |s| if f.block(s).nrows() <= 1 { 0.0 } else { space.hbar_of(s) })
}

pub fn per_sector_scale(f: &Observable, factor: impl Fn(usize) -> f64) -> Observable {
    let blocks = f.blocks().iter().enumerate().map(|(s, b)| b.scale(factor(s))).collect();
    Observable::from_blocks(blocks).expect("real scaling keeps Hermiticity")
}

/// `{f, g}(ρ) = (i/ħ(ρ)) ⟨Ω_ρ, (AB − BA) Ω_ρ⟩`.
pub fn commutator_bracket(f: &Observable, g: &Observable, rho: &Ray, space: &PureStateSpace) -> Result<f64> {
    space.check_ray(rho)?;
    let s = rho.sector();
    if rho.dim() == 1 {
        return Ok(0.0);
    }
    let c = linalg::commutator(f.block(s), g.block(s));
    let v = rho.vector();
    Ok((v.dotc(&(c * v)) * linalg::I).re / sector_hbar(space, s)?)
}

/// Complex derivatives `∂F/∂z_i = ½(∂_x − i∂_y)F` by central differences.
fn chart_gradient(f: &impl PointFunction, point: &ChartPoint) -> Result<Vec<Complex64>> {
    let m = point.coords.len();
    let h = CHART_STEP;
    let eval = |coords: &[Complex64]| f.value_at(&ChartPoint::new(point.sector, point.pivot, coords.to_vec()).to_ray());
    let mut grad = Vec::with_capacity(m);
    for i in 0..m {
        let mut c = point.coords.clone();
        let mut partial = |delta: Complex64| -> Result<f64> {
            c[i] = point.coords[i] + delta;
            let plus = eval(&c)?;
            c[i] = point.coords[i] - delta;
            let minus = eval(&c)?;
            c[i] = point.coords[i];
            Ok((plus - minus) / (2.0 * h))
        };
        let dx = partial(Complex64::new(h, 0.0))?;
        let dy = partial(Complex64::new(0.0, h))?;
        grad.push(Complex64::new(dx, -dy) * 0.5);
    }
    Ok(grad)
}

fn chart_bracket_scaled(
    f: &impl PointFunction,
    g: &impl PointFunction,
    point: &ChartPoint,
    space: &PureStateSpace,
    normalization: f64,
) -> Result<f64> {
    space.check_ray(&point.to_ray())?;
    if point.coords.is_empty() {
        return Ok(0.0);
    }
    let df = chart_gradient(f, point)?;
    let dg = chart_gradient(g, point)?;
    let ginv = inverse_metric(&point.coords);
    let mut acc = linalg::ZERO;
    for i in 0..df.len() {
        for j in 0..df.len() {
            acc += dg[i] * ginv[(i, j)] * df[j].conj();
        }
    }
    Ok(normalization * acc.im / sector_hbar(space, point.sector)?)
}

/// `{f, g}` from the Fubini-Study symplectic form in the chart of `point`,
/// with derivatives by central differences of step [`CHART_STEP`].
pub fn chart_bracket(
    f: &impl PointFunction,
    g: &impl PointFunction,
    point: &ChartPoint,
    space: &PureStateSpace,
) -> Result<f64> {
    chart_bracket_scaled(f, g, point, space, FUBINI_STUDY_NORMALIZATION)
}

/// Least-squares fit of the symplectic-form scale on `CP¹` (ħ = 1): the
/// operator bracket regressed on the unnormalized chart bracket.
pub fn calibrate_normalization<R: Rng + ?Sized>(samples: usize, rng: &mut R) -> Result<f64> {
    let space = PureStateSpace::new(vec![2])?;
    let (mut num, mut den) = (0.0, 0.0);
    for _ in 0..samples {
        let f = Observable::random(&[2], 1.0, rng);
        let g = Observable::random(&[2], 1.0, rng);
        let rho = Ray::random(0, 2, rng);
        let raw = chart_bracket_scaled(&f, &g, &ChartPoint::best(&rho), &space, 1.0)?;
        let reference = commutator_bracket(&f, &g, &rho, &space)?;
        num += raw * reference;
        den += raw * raw;
    }
    Ok(num / den)
}

/// Hamiltonian vector field in chart coordinates,
/// `ż = −(i c / 2ħ) g^{-1} ∂_{z̄}H` with `c` the form normalization and
/// `∂_{z̄_j}H = ((Aψ)_j − H ψ_j)/|ψ|²`.
fn hamiltonian_velocity(a: &CMat, pivot: usize, coords: &[Complex64], hbar: f64) -> Vec<Complex64> {
    let psi = lift(pivot, coords);
    let norm2 = psi.norm_squared();
    let a_psi = a * &psi;
    let energy = psi.dotc(&a_psi).re / norm2;
    let grad: Vec<Complex64> = (0..psi.len())
        .filter(|&k| k != pivot)
        .map(|k| (a_psi[k] - psi[k] * energy) / norm2)
        .collect();
    let ginv = inverse_metric(coords);
    let factor = -linalg::I * (FUBINI_STUDY_NORMALIZATION / (2.0 * hbar));
    (0..coords.len())
        .map(|i| (0..coords.len()).map(|j| ginv[(i, j)] * grad[j]).sum::<Complex64>() * factor)
        .collect()
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<Ray>,
    pub label: String,
}

impl Trajectory {
    pub fn last(&self) -> &Ray {
        self.points.last().expect("trajectories are nonempty")
    }

    /// CSV with header `t,re_0,…,re_{d−1},im_0,…,im_{d−1},unitarity_dev`.
    pub fn to_csv(&self, deviations: &[f64]) -> String {
        let d = self.points[0].dim();
        let mut out = String::from("t");
        for k in 0..d {
            out.push_str(&format!(",re_{k}"));
        }
        for k in 0..d {
            out.push_str(&format!(",im_{k}"));
        }
        out.push_str(",unitarity_dev\n");
        for (i, (t, p)) in self.times.iter().zip(&self.points).enumerate() {
            out.push_str(&format!("{t:.17e}"));
            for z in p.vector().iter() {
                out.push_str(&format!(",{:.17e}", z.re));
            }
            for z in p.vector().iter() {
                out.push_str(&format!(",{:.17e}", z.im));
            }
            out.push_str(&format!(",{:.17e}\n", deviations.get(i).copied().unwrap_or(0.0)));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Projection of `exp(−itA/ħ)Ω`.
    Exact,
    /// Fixed-step fourth-order Runge-Kutta on chart coordinates.
    Rk4,
}

fn sample_times(t: f64, steps: usize) -> Result<Vec<f64>> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(TpsError::Precondition("flow time must be finite and nonnegative".into()));
    }
    if t == 0.0 || steps == 0 {
        return Ok(vec![0.0]);
    }
    Ok((0..=steps).map(|j| t * j as f64 / steps as f64).collect())
}

pub fn exact_flow(h: &Observable, rho0: &Ray, t: f64, steps: usize, space: &PureStateSpace) -> Result<Trajectory> {
    space.check_ray(rho0)?;
    let times = sample_times(t, steps)?;
    let s = rho0.sector();
    let hbar = space.hbar_of(s);
    let (values, vectors) = linalg::hermitian_eigen(h.block(s));
    let coeffs = vectors.adjoint() * rho0.vector();
    let points = times
        .iter()
        .map(|&tau| {
            if rho0.dim() == 1 {
                return Ok(rho0.clone());
            }
            let phased = CVec::from_iterator(
                values.len(),
                values.iter().zip(coeffs.iter()).map(|(&l, &c)| c * Complex64::from_polar(1.0, -l * tau / hbar)),
            );
            Ray::new(s, &vectors * phased)
        })
        .collect::<Result<_>>()?;
    Ok(Trajectory { times, points, label: "exact".into() })
}

pub fn rk4_flow(h: &Observable, rho0: &Ray, t: f64, steps: usize, space: &PureStateSpace) -> Result<Trajectory> {
    space.check_ray(rho0)?;
    let times = sample_times(t, steps)?;
    let s = rho0.sector();
    if rho0.dim() == 1 {
        let points = vec![rho0.clone(); times.len()];
        return Ok(Trajectory { times, points, label: "rk4".into() });
    }
    let a = h.block(s);
    let hbar = space.hbar_of(s);
    let dt = if times.len() > 1 { t / steps as f64 } else { 0.0 };
    let mut point = ChartPoint::best(rho0);
    let mut points = vec![rho0.clone()];
    let axpy = |z: &[Complex64], k: &[Complex64], c: f64| -> Vec<Complex64> {
        z.iter().zip(k).map(|(a, b)| a + b * c).collect()
    };
    for _ in 1..times.len() {
        let z = &point.coords;
        let k1 = hamiltonian_velocity(a, point.pivot, z, hbar);
        let k2 = hamiltonian_velocity(a, point.pivot, &axpy(z, &k1, dt / 2.0), hbar);
        let k3 = hamiltonian_velocity(a, point.pivot, &axpy(z, &k2, dt / 2.0), hbar);
        let k4 = hamiltonian_velocity(a, point.pivot, &axpy(z, &k3, dt), hbar);
        let next: Vec<Complex64> = (0..z.len())
            .map(|i| z[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0))
            .collect();
        if next.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(TpsError::Integration("non-finite chart coordinates".into()));
        }
        point.coords = next;
        if point.coords.iter().any(|c| c.norm() > CHART_SWITCH) {
            point = ChartPoint::best(&point.to_ray());
        }
        points.push(point.to_ray());
    }
    Ok(Trajectory { times, points, label: "rk4".into() })
}

pub fn hamiltonian_flow(
    h: &Observable,
    rho0: &Ray,
    t: f64,
    steps: usize,
    integrator: Integrator,
    space: &PureStateSpace,
) -> Result<Trajectory> {
    match integrator {
        Integrator::Exact => exact_flow(h, rho0, t, steps, space),
        Integrator::Rk4 => rk4_flow(h, rho0, t, steps, space),
    }
}

/// `|p(ρ(t), σ(t)) − p(ρ, σ)|` at every sampled time.
pub fn unitarity_deviations(a: &Trajectory, b: &Trajectory) -> Result<Vec<f64>> {
    let p0 = transition_probability(&a.points[0], &b.points[0])?;
    a.points
        .iter()
        .zip(&b.points)
        .map(|(x, y)| Ok((transition_probability(x, y)? - p0).abs()))
        .collect()
}

/// Flows `ρ0` and `σ0` under `H` and reports the largest drift of their
/// transition probability.
pub fn check_unitarity(
    h: &Observable,
    rho0: &Ray,
    sigma0: &Ray,
    t: f64,
    steps: usize,
    integrator: Integrator,
    space: &PureStateSpace,
) -> Result<CheckRecord> {
    if rho0.sector() != sigma0.sector() {
        return Err(TpsError::Precondition("unitarity is checked within one sector".into()));
    }
    let a = hamiltonian_flow(h, rho0, t, steps, integrator, space)?;
    let b = hamiltonian_flow(h, sigma0, t, steps, integrator, space)?;
    let mut dev = MaxDeviation::default();
    for d in unitarity_deviations(&a, &b)? {
        dev.push(d);
    }
    let (name, tol) = match integrator {
        Integrator::Exact => ("unitarity.exact", EXACT_UNITARITY_TOL),
        Integrator::Rk4 => ("unitarity.rk4", RK4_UNITARITY_TOL),
    };
    Ok(dev.record(name, tol))
}

fn random_rays<R: Rng + ?Sized>(space: &PureStateSpace, n: usize, rng: &mut R) -> Vec<Ray> {
    (0..n).map(|_| space.random_ray(rng)).collect()
}

/// `{H, f∘g} = {H, f}∘g + f∘{H, g}` evaluated at random rays.
pub fn check_leibniz<R: Rng + ?Sized>(
    h: &Observable,
    f: &Observable,
    g: &Observable,
    samples: usize,
    tol: f64,
    space: &PureStateSpace,
    rng: &mut R,
) -> Result<CheckRecord> {
    let lhs = bracket(h, &jordan(f, g), space);
    let rhs = &jordan(&bracket(h, f, space), g) + &jordan(f, &bracket(h, g, space));
    let mut dev = MaxDeviation::default();
    for r in random_rays(space, samples, rng) {
        dev.push_diff(lhs.eval(&r)?, rhs.eval(&r)?);
    }
    Ok(dev.record("leibniz", tol))
}

/// Associator identity `(f∘g)∘h − f∘(g∘h) = k{{f, h}, g}` with `k = ħ²/4`
/// for the raw bracket, and with `k = ¼` for the rescaled bracket.
pub fn check_associator<R: Rng + ?Sized>(
    f: &Observable,
    g: &Observable,
    h: &Observable,
    samples: usize,
    tol: f64,
    space: &PureStateSpace,
    rng: &mut R,
) -> Result<(CheckRecord, CheckRecord)> {
    let lhs = &jordan(&jordan(f, g), h) - &jordan(f, &jordan(g, h));
    let raw = per_sector_scale(&bracket(&bracket(f, h, space), g, space), |s| {
        let hb = space.hbar_of(s);
        hb * hb / 4.0
    });
    let rescaled = rescaled_bracket(&rescaled_bracket(f, h, space), g, space).scale(0.25);
    let (mut dr, mut ds) = (MaxDeviation::default(), MaxDeviation::default());
    for r in random_rays(space, samples, rng) {
        let l = lhs.eval(&r)?;
        dr.push_diff(l, raw.eval(&r)?);
        ds.push_diff(l, rescaled.eval(&r)?);
    }
    Ok((dr.record("associator.raw", tol), ds.record("associator.rescaled", tol)))
}

/// Jacobi identity of the bracket on operator blocks.
pub fn jacobi_violation(f: &Observable, g: &Observable, h: &Observable, space: &PureStateSpace) -> f64 {
    let a = bracket(f, &bracket(g, h, space), space);
    let b = bracket(g, &bracket(h, f, space), space);
    let c = bracket(h, &bracket(f, g, space), space);
    (&(&a + &b) + &c).norm()
}

/// Heisenberg picture `α_t(F) = U† F U` with `U = exp(−itH/ħ)`, so that
/// `α_t(f)(ρ) = f(ρ(t))`.
pub fn evolve_observable(f: &Observable, h: &Observable, t: f64, space: &PureStateSpace) -> Observable {
    let blocks = f
        .blocks()
        .iter()
        .zip(h.blocks())
        .enumerate()
        .map(|(s, (a, hb))| {
            if a.nrows() <= 1 {
                return a.clone();
            }
            let u = linalg::unitary_exp(hb, -t / space.hbar_of(s));
            u.adjoint() * a * u
        })
        .collect();
    Observable::from_blocks(blocks).expect("unitary conjugation keeps Hermiticity")
}

/// One observation of an unknown multiple of the bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketSample {
    pub sector: usize,
    /// `i⟨Ω, (AB − BA) Ω⟩`, the bracket at ħ = 1.
    pub reference: f64,
    pub observed: f64,
}

/// Per-sector least-squares fit of `observed = reference / ħ`. Sectors with
/// no informative samples yield `None`.
pub fn fit_hbar(samples: &[BracketSample], sectors: usize) -> Vec<Option<f64>> {
    let mut num = vec![0.0; sectors];
    let mut den = vec![0.0; sectors];
    for s in samples.iter().filter(|s| s.sector < sectors) {
        num[s.sector] += s.reference * s.observed;
        den[s.sector] += s.reference * s.reference;
    }
    num.iter()
        .zip(&den)
        .map(|(&n, &d)| if d > 0.0 && n != 0.0 { Some(d / n) } else { None })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{square, ObservableFunction};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(41)
    }

    fn pauli() -> [Observable; 3] {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let x = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let y = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let z = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        [x, y, z].map(|m| Observable::from_blocks(vec![m]).unwrap())
    }

    #[test]
    fn chart_round_trip_and_pivot_errors() {
        let mut rng = rng();
        let r = Ray::random(0, 3, &mut rng);
        for pivot in 0..3 {
            let c = ChartPoint::from_ray(&r, pivot).unwrap();
            assert!(c.to_ray().same_point(&r));
            let back = ChartPoint::from_ray(&c.to_ray(), pivot).unwrap();
            for (a, b) in back.coords().iter().zip(c.coords()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
        let e = Ray::basis(0, 3, 2);
        assert_eq!(ChartPoint::from_ray(&e, 0).unwrap_err(), TpsError::ChartPivot { pivot: 0, suggested: 2 });
    }

    #[test]
    fn bracket_is_antisymmetric() {
        let mut rng = rng();
        let space = PureStateSpace::new(vec![3]).unwrap();
        let f = Observable::random(&[3], 1.0, &mut rng);
        let g = Observable::random(&[3], 1.0, &mut rng);
        let r = Ray::random(0, 3, &mut rng);
        assert_eq!(commutator_bracket(&f, &f, &r, &space).unwrap(), 0.0);
        let ab = commutator_bracket(&f, &g, &r, &space).unwrap();
        let ba = commutator_bracket(&g, &f, &r, &space).unwrap();
        assert!((ab + ba).abs() < 1e-14);
        assert!(chart_bracket(&f, &f, &ChartPoint::best(&r), &space).unwrap().abs() < 1e-12);
    }

    #[test]
    fn pauli_bracket() {
        // i[σx, σy] = i·2iσz = −2σz; at e₁ the expectation of σz is 1.
        let [x, y, _] = pauli();
        let space = PureStateSpace::new(vec![2]).unwrap();
        let e1 = Ray::basis(0, 2, 0);
        assert!((commutator_bracket(&x, &y, &e1, &space).unwrap() + 2.0).abs() < 1e-14);
        let chart = chart_bracket(&x, &y, &ChartPoint::best(&e1), &space).unwrap();
        assert!((chart + 2.0).abs() < 2e-6, "{chart}");
        let space2 = PureStateSpace::with_hbar(vec![2], vec![2.0]).unwrap();
        assert!((commutator_bracket(&x, &y, &e1, &space2).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn normalization_is_recovered_by_fit() {
        let mut rng = rng();
        let c = calibrate_normalization(50, &mut rng).unwrap();
        assert!((c - FUBINI_STUDY_NORMALIZATION).abs() < 1e-8 * FUBINI_STUDY_NORMALIZATION, "{c}");
    }

    #[test]
    fn chart_and_operator_brackets_agree() {
        let mut rng = rng();
        for d in 2..=4 {
            let space = PureStateSpace::new(vec![d]).unwrap();
            for _ in 0..20 {
                let f = ObservableFunction::random(&[d], 3, &mut rng);
                let g = ObservableFunction::random(&[d], 3, &mut rng);
                let r = Ray::random(0, d, &mut rng);
                let a = commutator_bracket(&f.operator(&[d]).unwrap(), &g.operator(&[d]).unwrap(), &r, &space).unwrap();
                let b = chart_bracket(&f, &g, &ChartPoint::best(&r), &space).unwrap();
                assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "d={d}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn identity_flow_is_stationary() {
        let mut rng = rng();
        let space = PureStateSpace::new(vec![3]).unwrap();
        let r = Ray::random(0, 3, &mut rng);
        for integrator in [Integrator::Exact, Integrator::Rk4] {
            let traj = hamiltonian_flow(&Observable::unit(&[3]), &r, 2.0, 100, integrator, &space).unwrap();
            assert!(traj.points.iter().all(|p| p.same_point(&r)));
        }
    }

    #[test]
    fn rabi_oscillation() {
        // H = σz, ρ0 = (1,1)/√2: p(ρ(t), ρ0) = cos²(t).
        let [_, _, z] = pauli();
        let space = PureStateSpace::new(vec![2]).unwrap();
        let r0 = Ray::from_real(0, &[1.0, 1.0]).unwrap();
        for integrator in [Integrator::Exact, Integrator::Rk4] {
            let traj = hamiltonian_flow(&z, &r0, std::f64::consts::PI, 1000, integrator, &space).unwrap();
            for (t, p) in traj.times.iter().zip(&traj.points) {
                let prob = transition_probability(p, &r0).unwrap();
                assert!((prob - t.cos().powi(2)).abs() < 1e-9, "{integrator:?} t={t}");
            }
            assert!((transition_probability(traj.last(), &r0).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_time_returns_initial_point() {
        let mut rng = rng();
        let space = PureStateSpace::new(vec![3]).unwrap();
        let h = Observable::random(&[3], 1.0, &mut rng);
        let r = Ray::random(0, 3, &mut rng);
        let traj = exact_flow(&h, &r, 0.0, 50, &space).unwrap();
        assert_eq!(traj.points.len(), 1);
        assert!(traj.points[0].same_point(&r));
        assert!(exact_flow(&h, &r, -1.0, 10, &space).is_err());
    }

    #[test]
    fn rk4_tracks_exact_flow() {
        let mut rng = rng();
        let space = PureStateSpace::new(vec![3]).unwrap();
        let h = Observable::random(&[3], 1.0, &mut rng);
        let h = h.scale(4.0 / h.norm());
        let r = Ray::random(0, 3, &mut rng);
        let exact = exact_flow(&h, &r, 10.0, 20_000, &space).unwrap();
        let rk = rk4_flow(&h, &r, 10.0, 20_000, &space).unwrap();
        let p = transition_probability(exact.last(), rk.last()).unwrap();
        assert!(1.0 - p < 1e-9, "{}", 1.0 - p);
    }

    #[test]
    fn unitarity_checks() {
        let mut rng = rng();
        let space = PureStateSpace::new(vec![3]).unwrap();
        let h = Observable::random(&[3], 1.0, &mut rng);
        let (r, s) = (Ray::random(0, 3, &mut rng), Ray::random(0, 3, &mut rng));
        assert!(check_unitarity(&h, &r, &s, 5.0, 200, Integrator::Exact, &space).unwrap().pass);
        assert!(check_unitarity(&h, &r, &s, 5.0, 5000, Integrator::Rk4, &space).unwrap().pass);

        let classical = PureStateSpace::classical(3).unwrap();
        let hc = Observable::random(&[1, 1, 1], 1.0, &mut rng);
        let p = &classical.points()[1];
        let rec = check_unitarity(&hc, p, p, 3.0, 100, Integrator::Rk4, &classical).unwrap();
        assert_eq!(rec.max_violation, 0.0);
    }

    #[test]
    fn flow_derivative_matches_bracket() {
        let mut rng = rng();
        let space = PureStateSpace::with_hbar(vec![3], vec![0.7]).unwrap();
        let h = Observable::random(&[3], 1.0, &mut rng);
        let f = Observable::random(&[3], 1.0, &mut rng);
        let r = Ray::random(0, 3, &mut rng);
        let eps = 1e-4;
        let plus = exact_flow(&h, &r, eps, 1, &space).unwrap();
        let value_plus = f.eval(plus.last()).unwrap();
        let minus = evolve_observable(&f, &h, -eps, &space).eval(&r).unwrap();
        let derivative = (value_plus - minus) / (2.0 * eps);
        let expected = commutator_bracket(&h, &f, &r, &space).unwrap();
        assert!((derivative - expected).abs() < 1e-5, "{derivative} vs {expected}");
    }

    #[test]
    fn automorphism_respects_squares() {
        let mut rng = rng();
        let space = PureStateSpace::new(vec![3]).unwrap();
        let h = Observable::random(&[3], 1.0, &mut rng);
        let f = Observable::random(&[3], 1.0, &mut rng);
        let lhs = evolve_observable(&square(&f), &h, 1.3, &space);
        let rhs = square(&evolve_observable(&f, &h, 1.3, &space));
        assert!((&lhs - &rhs).norm() < 1e-10);
    }

    #[test]
    fn leibniz_and_jacobi() {
        let mut rng = rng();
        let space = PureStateSpace::new(vec![3]).unwrap();
        let [h, f, g] = [0; 3].map(|_| Observable::random(&[3], 1.0, &mut rng));
        assert!(check_leibniz(&h, &f, &g, 50, 1e-8, &space, &mut rng).unwrap().pass);
        assert!(jacobi_violation(&h, &f, &g, &space) < 1e-9);
        let u = Observable::unit(&[3]);
        let rec = check_leibniz(&h, &u, &u, 10, 1e-12, &space, &mut rng).unwrap();
        assert!(rec.pass);

        let classical = PureStateSpace::classical(3).unwrap();
        let [h, f, g] = [0; 3].map(|_| Observable::random(&[1, 1, 1], 1.0, &mut rng));
        let rec = check_leibniz(&h, &f, &g, 10, 0.0, &classical, &mut rng).unwrap();
        assert_eq!(rec.max_violation, 0.0);
    }

    #[test]
    fn associator_for_pauli_triple() {
        let mut rng = rng();
        let [x, y, z] = pauli();
        for hbar in [1.0, 2.0] {
            let space = PureStateSpace::with_hbar(vec![2], vec![hbar]).unwrap();
            let (raw, rescaled) = check_associator(&x, &y, &z, 30, 1e-10, &space, &mut rng).unwrap();
            assert!(raw.pass && rescaled.pass, "{raw:?} {rescaled:?}");
        }
        // ħ = 2 means k = 1: the raw identity holds with unit coefficient.
        let space = PureStateSpace::with_hbar(vec![2], vec![2.0]).unwrap();
        let lhs = &jordan(&jordan(&x, &z), &y) - &jordan(&x, &jordan(&z, &y));
        let rhs = bracket(&bracket(&x, &y, &space), &z, &space);
        assert!((&lhs - &rhs).norm() < 1e-12);
    }

    #[test]
    fn classical_associator_vanishes() {
        let mut rng = rng();
        let space = PureStateSpace::classical(4).unwrap();
        let [f, g, h] = [0; 3].map(|_| Observable::random(&[1, 1, 1, 1], 1.0, &mut rng));
        let (raw, rescaled) = check_associator(&f, &g, &h, 20, 1e-12, &space, &mut rng).unwrap();
        assert!(raw.pass && rescaled.pass);
        assert!(bracket(&f, &g, &space).norm() == 0.0);
    }

    #[test]
    fn hbar_fit() {
        let mut rng = rng();
        let mk = |hbar: [f64; 2], rng: &mut ChaCha8Rng| {
            let space = PureStateSpace::with_hbar(vec![2, 3], hbar.to_vec()).unwrap();
            let unit = PureStateSpace::new(vec![2, 3]).unwrap();
            (0..40)
                .map(|_| {
                    let f = Observable::random(&[2, 3], 1.0, rng);
                    let g = Observable::random(&[2, 3], 1.0, rng);
                    let r = space.random_ray(rng);
                    BracketSample {
                        sector: r.sector(),
                        reference: commutator_bracket(&f, &g, &r, &unit).unwrap(),
                        observed: commutator_bracket(&f, &g, &r, &space).unwrap(),
                    }
                })
                .collect::<Vec<_>>()
        };
        let fit = fit_hbar(&mk([1.0, 1.0], &mut rng), 2);
        assert!(fit.iter().all(|h| (h.unwrap() - 1.0).abs() < 1e-9));
        let half: Vec<BracketSample> =
            mk([1.0, 1.0], &mut rng).into_iter().map(|s| BracketSample { observed: s.observed * 0.5, ..s }).collect();
        assert!(fit_hbar(&half, 2).iter().all(|h| (h.unwrap() - 2.0).abs() < 1e-9));
        let mixed = fit_hbar(&mk([1.0, 3.0], &mut rng), 2);
        assert!((mixed[0].unwrap() - 1.0).abs() < 1e-9 && (mixed[1].unwrap() - 3.0).abs() < 1e-9);
        assert_eq!(fit_hbar(&[], 1), vec![None]);
    }

    #[test]
    fn csv_layout() {
        let traj = Trajectory { times: vec![0.0], points: vec![Ray::basis(0, 2, 0)], label: "x".into() };
        let csv = traj.to_csv(&[0.0]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,re_0,re_1,im_0,im_1,unitarity_dev");
        assert_eq!(lines.count(), 1);
    }
}
