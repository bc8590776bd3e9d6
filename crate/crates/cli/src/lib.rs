//! Command implementations behind the `tpspace` binary. Each command turns
//! parsed documents into a [`Report`]; the binary only handles files and
//! exit codes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use tpspace::cstar::{check_cstar_axioms, pure_state_roundtrip};
use tpspace::error::{Result, TpsError};
use tpspace::io::{FlowDoc, KernelDoc, MatrixDoc, PointDoc, SpaceDoc, SpectralDoc};
use tpspace::lattice::{self, SubspaceElement};
use tpspace::poisson::{self, ChartPoint, Integrator};
use tpspace::reconstruct::{reconstruct_kernel, ReconstructionConfig};
use tpspace::report::{CheckRecord, MaxDeviation, Report};
use tpspace::space::{basis_check, check_tps_axioms, kernel_from_rays, sectors, PureStateSpace, Ray, TransitionKernel};
use tpspace::spectral::{self, Observable};

pub const DEFAULT_TOL: f64 = 1e-9;
/// Relative tolerance of the finite-difference chart bracket.
pub const CHART_TOL: f64 = 1e-6;
const TRIALS: usize = 50;

/// Named groups of checks run by `verify` on a space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Axioms,
    TwoSphere,
    Lattice,
    Jordan,
    Poisson,
    Cstar,
    States,
}

impl Suite {
    pub const ALL: [Suite; 7] =
        [Suite::Axioms, Suite::TwoSphere, Suite::Lattice, Suite::Jordan, Suite::Poisson, Suite::Cstar, Suite::States];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Axioms => "axioms",
            Suite::TwoSphere => "two_sphere",
            Suite::Lattice => "lattice",
            Suite::Jordan => "jordan",
            Suite::Poisson => "poisson",
            Suite::Cstar => "cstar",
            Suite::States => "states",
        }
    }

    /// `"all"` or a comma-separated list of suite names.
    pub fn parse_list(list: &str) -> Result<Vec<Suite>> {
        if list == "all" {
            return Ok(Self::ALL.to_vec());
        }
        list.split(',')
            .map(|s| {
                Self::ALL
                    .into_iter()
                    .find(|x| x.name() == s.trim())
                    .ok_or_else(|| TpsError::Config(format!("unknown suite `{s}`")))
            })
            .collect()
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Kernel-level axioms. Failing axioms are named in the record notes.
pub fn verify_kernel(kernel: &TransitionKernel, tol: f64, seed: u64) -> Report {
    let mut report = Report::new("verify.kernel", seed);
    let axioms = check_tps_axioms(kernel, tol);
    for o in &axioms.outcomes {
        let mut rec = CheckRecord::new(format!("axiom.{}", o.axiom.name()), o.max_violation, tol, kernel.n() * kernel.n());
        if let Some((i, j)) = o.witness.filter(|_| !o.pass) {
            rec = rec.with_note(format!("violated at entry ({i}, {j})"));
        }
        report.push(rec);
    }
    if axioms.all_pass() {
        let blocks = sectors(kernel);
        report.payload = Some(json!({ "sectors": blocks }));
    }
    report
}

/// Runs the chosen suites on a space with sampled instances.
pub fn verify_space(space: &PureStateSpace, suites: &[Suite], tol: f64, seed: u64) -> Result<Report> {
    let mut report = Report::new("verify.space", seed);
    let mut rng = rng(seed);
    let dims = space.sectors().to_vec();
    let classical = space.is_classical();
    for suite in suites {
        match suite {
            Suite::Axioms => report.extend(axiom_checks(space, tol, &mut rng)?),
            Suite::TwoSphere => report.extend(two_sphere_checks(space, &mut rng)?),
            Suite::Lattice => report.extend(lattice_checks(&dims, tol, &mut rng)?),
            Suite::Jordan => {
                report.extend(spectral::check_jb_axioms(&dims, TRIALS, tol, &mut rng)?);
                if classical {
                    report.push(classical_product_check(&dims, &mut rng)?);
                }
            }
            Suite::Poisson => report.extend(poisson_checks(space, tol, &mut rng)?),
            Suite::Cstar => report.extend(check_cstar_axioms(space, TRIALS, tol, &mut rng)?),
            Suite::States => report.extend(pure_state_roundtrip(space, TRIALS, &mut rng)?.records(tol)),
        }
    }
    report.payload = Some(json!({
        "sectors": dims,
        "classical": classical,
        "suites": suites.iter().map(|s| s.name()).collect::<Vec<_>>(),
    }));
    Ok(report)
}

fn axiom_checks(space: &PureStateSpace, tol: f64, rng: &mut ChaCha8Rng) -> Result<Vec<CheckRecord>> {
    let mut rays = space.points().to_vec();
    for s in 0..space.sectors().len() {
        if space.sectors()[s] > 1 || !rays.iter().any(|r| r.sector() == s) {
            rays.push(space.random_ray_in(s, rng));
        }
    }
    let kernel = kernel_from_rays(&rays)?;
    let axioms = check_tps_axioms(&kernel, tol);
    let mut out: Vec<CheckRecord> = axioms
        .outcomes
        .iter()
        .map(|o| CheckRecord::new(format!("axiom.{}", o.axiom.name()), o.max_violation, tol, kernel.n() * kernel.n()))
        .collect();
    // Every sector's standard basis, and a rotated one, must be a basis of the sector.
    let mut misses = 0usize;
    for (s, &d) in space.sectors().iter().enumerate() {
        let ambient = SubspaceElement::random_in_sector(space.sectors(), s, d, rng);
        let basis: Vec<Ray> = ambient.atoms();
        let check = basis_check(&basis, &ambient, rng)?;
        if !(check.is_basis() && check.criteria_agree()) {
            misses += 1;
        }
    }
    out.push(CheckRecord::new("axiom.basis", misses as f64, 0.0, space.sectors().len()));
    Ok(out)
}

fn two_sphere_checks(space: &PureStateSpace, rng: &mut ChaCha8Rng) -> Result<Vec<CheckRecord>> {
    let mut dev = MaxDeviation::default();
    for (s, &d) in space.sectors().iter().enumerate() {
        if d < 2 {
            continue;
        }
        let (rho, sigma) = (Ray::random(s, d, rng), Ray::random(s, d, rng));
        let rep = lattice::check_two_sphere(&rho, &sigma, 100, rng)?;
        dev.push(rep.max_error);
        dev.samples += rep.samples - 1;
    }
    let rec = dev.record("two_sphere", 1e-10);
    Ok(vec![if dev.samples == 0 { rec.with_note("no sector of dimension two or more") } else { rec }])
}

fn lattice_checks(dims: &[usize], tol: f64, rng: &mut ChaCha8Rng) -> Result<Vec<CheckRecord>> {
    let mut out = vec![
        lattice::check_orthomodularity(dims, TRIALS, tol, rng),
        lattice::check_de_morgan(dims, TRIALS, tol, rng),
        lattice::check_double_complement(dims, TRIALS, tol, rng),
        lattice::check_atomisticity(dims, TRIALS, tol, rng),
        lattice::check_covering_random(dims, TRIALS, rng),
    ];
    let mut sasaki = MaxDeviation::default();
    let mut tries = 0;
    while sasaki.samples < TRIALS && tries < 20 * TRIALS {
        tries += 1;
        let q = SubspaceElement::random(dims, rng);
        let sector = rng.random_range(0..dims.len());
        let sigma = Ray::random(sector, dims[sector], rng);
        match lattice::check_sasaki_factorization(&sigma, &q, 5, tol, rng) {
            Ok(rec) => sasaki.push(rec.max_violation),
            Err(TpsError::DegenerateProjection) => continue,
            Err(e) => return Err(e),
        }
    }
    out.push(sasaki.record("sasaki_factorization", tol));
    Ok(out)
}

fn classical_product_check(dims: &[usize], rng: &mut ChaCha8Rng) -> Result<CheckRecord> {
    let mut dev = MaxDeviation::default();
    for _ in 0..TRIALS {
        let f = spectral::random_element(dims, rng)?;
        let g = spectral::random_element(dims, rng)?;
        let fg = spectral::jordan(&f, &g);
        for s in 0..dims.len() {
            let r = Ray::basis(s, 1, 0);
            dev.push_diff(fg.eval(&r)?, f.eval(&r)? * g.eval(&r)?);
        }
    }
    Ok(dev.record("jordan.classical_pointwise", 1e-14))
}

fn poisson_checks(space: &PureStateSpace, tol: f64, rng: &mut ChaCha8Rng) -> Result<Vec<CheckRecord>> {
    let dims = space.sectors().to_vec();
    let mut chart = MaxDeviation::default();
    for (s, &d) in dims.iter().enumerate() {
        if d < 2 {
            continue;
        }
        for _ in 0..TRIALS / 5 {
            let f = Observable::random(&dims, 1.0, rng);
            let g = Observable::random(&dims, 1.0, rng);
            let rho = Ray::random(s, d, rng);
            let a = poisson::commutator_bracket(&f, &g, &rho, space)?;
            let b = poisson::chart_bracket(&f, &g, &ChartPoint::best(&rho), space)?;
            chart.push((a - b).abs() / a.abs().max(1.0));
        }
    }
    let mut out = vec![chart.record("bracket.chart_consistency", CHART_TOL)];
    let [h, f, g] = [0; 3].map(|_| Observable::random(&dims, 1.0, rng));
    out.push(poisson::check_leibniz(&h, &f, &g, TRIALS, tol.max(1e-8), space, rng)?);
    let (raw, rescaled) = poisson::check_associator(&h, &f, &g, TRIALS, tol.max(1e-8), space, rng)?;
    out.push(raw);
    out.push(rescaled);
    out.push(CheckRecord::new("jacobi", poisson::jacobi_violation(&h, &f, &g, space), tol, 1));
    let mut unitarity = MaxDeviation::default();
    let mut automorphism = MaxDeviation::default();
    for (s, &d) in dims.iter().enumerate() {
        let (rho, sigma) = (Ray::random(s, d, rng), Ray::random(s, d, rng));
        let rec = poisson::check_unitarity(&h, &rho, &sigma, 3.0, 30, Integrator::Exact, space)?;
        unitarity.push(rec.max_violation);
    }
    let lhs = poisson::evolve_observable(&spectral::square(&f), &h, 1.0, space);
    let rhs = spectral::square(&poisson::evolve_observable(&f, &h, 1.0, space));
    automorphism.push((&lhs - &rhs).norm());
    out.push(unitarity.record("unitarity.exact", poisson::EXACT_UNITARITY_TOL));
    out.push(automorphism.record("automorphism.square", 1e-10));
    if space.is_classical() {
        let note = "classical space: brackets vanish identically";
        out = out.into_iter().map(|r| r.with_note(note)).collect();
    }
    Ok(out)
}

/// Spectral resolution of a function: eigenvalues, the projection blocks
/// of each spectral subspace, and the reconstruction residual.
pub fn spectral_report(doc: &SpectralDoc, tol: f64, seed: u64) -> Result<Report> {
    let space = doc.space.to_space()?;
    let dims = space.sectors().to_vec();
    let f = doc.function.to_observable(&dims)?;
    let resolution = spectral::spectral_resolution(&f);
    let mut rng = rng(seed);
    let rays: Vec<Ray> = (0..100).map(|_| space.random_ray(&mut rng)).collect();
    let residual = spectral::max_pointwise_gap(&f, &resolution, &rays)?;
    let (overlap, completeness) = resolution.invariant_violations();
    let mut report = Report::new("spectral", seed);
    report.push(CheckRecord::new("spectral.reconstruction", residual, tol, rays.len()));
    report.push(CheckRecord::new("spectral.orthogonality", overlap, 1e-10, resolution.pairs().len()));
    report.push(CheckRecord::new("spectral.completeness", completeness, 1e-10, 1));
    let pairs: Vec<_> = resolution
        .pairs()
        .iter()
        .map(|(l, q)| {
            json!({
                "value": l,
                "dims": (0..dims.len()).map(|s| q.dim_in(s)).collect::<Vec<_>>(),
                "projectors": (0..dims.len()).map(|s| MatrixDoc::from_matrix(&q.projector(s))).collect::<Vec<_>>(),
            })
        })
        .collect();
    report.payload = Some(json!({ "eigenvalues": resolution.eigenvalues(), "resolution": pairs }));
    Ok(report)
}

/// Integrates the flow of `doc`, returning the report and the CSV trajectory.
pub fn flow_report(doc: &FlowDoc, tol: f64, seed: u64) -> Result<(Report, String)> {
    let space = doc.space.to_space()?;
    let dims = space.sectors().to_vec();
    let h = doc.hamiltonian.to_observable(&dims)?;
    let integrator = match doc.integrator.as_str() {
        "exact" => Integrator::Exact,
        "rk4" => Integrator::Rk4,
        other => return Err(TpsError::Document(format!("unknown integrator `{other}`"))),
    };
    let initial = doc.initial.to_ray()?;
    space.check_ray(&initial)?;
    let partner = match &doc.partner {
        Some(p) => p.to_ray()?,
        None => Ray::basis(initial.sector(), initial.dim(), 0),
    };
    let a = poisson::hamiltonian_flow(&h, &initial, doc.t, doc.steps, integrator, &space)?;
    let b = poisson::hamiltonian_flow(&h, &partner, doc.t, doc.steps, integrator, &space)?;
    let deviations = poisson::unitarity_deviations(&a, &b)?;
    let mut unitarity = MaxDeviation::default();
    deviations.iter().for_each(|&d| unitarity.push(d));
    let (name, utol) = match integrator {
        Integrator::Exact => ("unitarity.exact", poisson::EXACT_UNITARITY_TOL),
        Integrator::Rk4 => ("unitarity.rk4", poisson::RK4_UNITARITY_TOL),
    };
    let mut report = Report::new("flow", seed);
    report.push(unitarity.record(name, utol));
    let mut rng = rng(seed);
    let f = Observable::random(&dims, 1.0, &mut rng);
    let g = Observable::random(&dims, 1.0, &mut rng);
    report.push(poisson::check_leibniz(&h, &f, &g, TRIALS, tol.max(1e-8), &space, &mut rng)?);
    report.payload = Some(json!({
        "integrator": doc.integrator,
        "rows": a.times.len(),
        "final": PointDoc::from_ray(a.last()),
    }));
    Ok((report, a.to_csv(&deviations)))
}

/// Splits the kernel into sectors and reconstructs each one.
pub fn reconstruct_report(doc: &KernelDoc, tol: f64, seed: u64) -> Result<Report> {
    let kernel = doc.to_kernel()?;
    let cfg = ReconstructionConfig { tolerance: tol, seed, ..Default::default() };
    let rec = reconstruct_kernel(&kernel, &cfg)?;
    let mut report = Report::new("reconstruct", seed);
    for (s, b) in rec.blocks.iter().enumerate() {
        let rec_s = CheckRecord::new(format!("reconstruct.sector_{s}"), b.residual, tol, rec.sectors[s].len());
        report.push(if b.converged { rec_s } else { rec_s.with_note("did not converge; best residual reported") });
    }
    report.push(CheckRecord::new("reconstruct.residual", rec.residual, tol, kernel.n()));
    let space = PureStateSpace::new(rec.sector_dims())?;
    let points: Vec<PointDoc> = rec.rays.iter().map(PointDoc::from_ray).collect();
    report.payload = Some(json!({
        "converged": rec.converged(),
        "residual": rec.residual,
        "sectors": rec.sectors,
        "blocks": rec.blocks.iter().map(|b| json!({
            "rank": b.rank,
            "residual": b.residual,
            "converged": b.converged,
            "restarts": b.restarts_used,
            "real": b.real,
        })).collect::<Vec<_>>(),
        "space": SpaceDoc { points, ..SpaceDoc::from_space(&space) },
    }));
    Ok(report)
}
