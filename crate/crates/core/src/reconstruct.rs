//! Recovering a Hilbert-space model from a raw transition kernel.
//!
//! Within one irreducible block the kernel is fitted by unit vectors
//! `v_1, …, v_n ∈ C^d` minimizing
//!
//! ```text
//! L(v) = Σ_{i<j} (|⟨v_i, v_j⟩|² − p_ij)²
//! ```
//!
//! Each restart first looks for the Gram matrix `G = V†V` directly: it must
//! be Hermitian PSD of rank `d` and have `|G_ij|² = p_ij`, and a relaxed
//! reflect-reflect iteration between those two sets lands near a solution
//! far more often than descent on `L` from random rays. The rank-`d` factor
//! of that Gram matrix is then polished by Levenberg-Marquardt.
//! [`optimize_configuration`] exposes plain Riemannian gradient descent on
//! the product of spheres for callers with their own starting point.
//!
//! The rank `d` ascends from a lower bound read off the kernel's own rank,
//! and the first rank whose fit meets the tolerance wins. A finite kernel
//! does not pin the configuration down up to unitaries, so the output is
//! *a* minimal-rank model, canonicalized for reproducibility.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TpsError};
use crate::linalg::{self, CMat, CVec};

type DVec = nalgebra::DVector<f64>;
use crate::space::{sectors, transition_probability, Ray, TransitionKernel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    /// Highest rank tried; clipped to the block size.
    pub max_rank: usize,
    /// Random starts per rank.
    pub restarts: usize,
    /// Gradient descent iterations; the Levenberg-Marquardt polish is capped at the smaller of this and 1000.
    pub max_iterations: usize,
    /// First trial step of the line search before Barzilai-Borwein steps are available.
    pub initial_step: f64,
    /// Sufficient-decrease constant of the Armijo rule.
    pub armijo: f64,
    /// Step shrink factor while backtracking.
    pub backtrack: f64,
    /// Accept a rank once the RMS residual falls below this.
    pub tolerance: f64,
    pub gradient_tolerance: f64,
    pub seed: u64,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            max_rank: 8,
            restarts: 20,
            max_iterations: 20_000,
            initial_step: 0.05,
            armijo: 1e-4,
            backtrack: 0.5,
            tolerance: 1e-9,
            gradient_tolerance: 1e-13,
            seed: 0,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.initial_step, self.armijo, self.backtrack, self.tolerance, self.gradient_tolerance];
        if self.max_rank == 0 || self.restarts == 0 || self.max_iterations == 0 {
            return Err(TpsError::Config("max_rank, restarts and max_iterations must be positive".into()));
        }
        if positive.iter().any(|x| !(x.is_finite() && *x > 0.0)) || self.backtrack >= 1.0 || self.armijo >= 1.0 {
            return Err(TpsError::Config("step parameters must be positive, armijo and backtrack below 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    /// Canonicalized rays, all in `sector`.
    pub rays: Vec<Ray>,
    pub sector: usize,
    pub rank: usize,
    /// RMS of `|⟨v_i, v_j⟩|² − p_ij` over pairs.
    pub residual: f64,
    /// Riemannian gradient norm of `L` at the returned point.
    pub gradient_norm: f64,
    /// Optimizer iterations spent over all ranks and restarts.
    pub iterations: usize,
    /// Restarts run at the returned rank.
    pub restarts_used: usize,
    pub converged: bool,
    /// The canonical configuration is real up to 1e-8.
    pub real: bool,
}

/// A single optimizer run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub vectors: CMat,
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Objective after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

fn project_tangent(v: &CMat, mut grad: CMat) -> CMat {
    for i in 0..v.ncols() {
        let vi = v.column(i);
        let radial = vi.dotc(&grad.column(i)).re;
        let tangent = grad.column(i) - vi * Complex64::from(radial);
        grad.set_column(i, &tangent);
    }
    grad
}

struct Problem<'a> {
    p: &'a DMatrix<f64>,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.p.nrows()
    }

    fn objective(&self, v: &CMat) -> f64 {
        let g = v.adjoint() * v;
        let n = self.n();
        let mut sum = 0.0;
        for j in 0..n {
            for i in 0..j {
                let r = g[(i, j)].norm_sqr() - self.p[(i, j)];
                sum += r * r;
            }
        }
        sum
    }

    /// Riemannian gradient: `4 V (R ∘ G)` projected onto the sphere tangents.
    fn gradient(&self, v: &CMat) -> CMat {
        let g = v.adjoint() * v;
        let n = self.n();
        let w = CMat::from_fn(n, n, |j, i| {
            if i == j {
                linalg::ZERO
            } else {
                g[(j, i)] * (4.0 * (g[(i, j)].norm_sqr() - self.p[(i, j)]))
            }
        });
        project_tangent(v, v * w)
    }

    fn rms(&self, objective: f64) -> f64 {
        let pairs = self.n() * (self.n() - 1) / 2;
        if pairs == 0 {
            0.0
        } else {
            (objective / pairs as f64).sqrt()
        }
    }
}

fn retract(v: &CMat) -> CMat {
    let mut out = v.clone();
    for mut c in out.column_iter_mut() {
        let n = c.norm();
        c /= Complex64::from(n);
    }
    out
}

fn real_dot(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Gradient descent with Barzilai-Borwein trial steps and Armijo backtracking.
/// Only steps that decrease the objective are accepted.
fn descend(problem: &Problem<'_>, start: CMat, cfg: &ReconstructionConfig, target: f64) -> RunOutcome {
    let mut v = retract(&start);
    let mut f = problem.objective(&v);
    let mut grad = problem.gradient(&v);
    let mut history = vec![f];
    let mut step = cfg.initial_step;
    let mut iterations = 0;
    let mut prev: Option<(CMat, CMat)> = None;
    while iterations < cfg.max_iterations {
        let gnorm2 = grad.norm_squared();
        if gnorm2.sqrt() <= cfg.gradient_tolerance || f <= target {
            break;
        }
        if let Some((pv, pg)) = &prev {
            let s = &v - pv;
            let y = &grad - pg;
            let sy = real_dot(&s, &y).abs();
            if sy > 0.0 {
                step = (s.norm_squared() / sy).clamp(1e-10, 1e4);
            }
        }
        let mut alpha = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = retract(&(&v - &grad * Complex64::from(alpha)));
            let ft = problem.objective(&trial);
            if ft <= f - cfg.armijo * alpha * gnorm2 && ft < f {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= cfg.backtrack;
        }
        iterations += 1;
        let Some((next, fnext)) = accepted else { break };
        let gnext = problem.gradient(&next);
        prev = Some((std::mem::replace(&mut v, next), std::mem::replace(&mut grad, gnext)));
        f = fnext;
        history.push(f);
    }
    let gradient_norm = grad.norm();
    RunOutcome { vectors: v, objective: f, gradient_norm, iterations, history }
}

/// `|⟨v_i, v_j⟩|² / (|v_i|² |v_j|²) − p_ij` and its real Jacobian, columns
/// ordered as (re, im) of each vector component, vector by vector.
fn scaled_residuals(p: &DMatrix<f64>, v: &CMat) -> (DVec, DMatrix<f64>) {
    let (d, n) = v.shape();
    let norms: Vec<f64> = v.column_iter().map(|c| c.norm_squared()).collect();
    let g = v.adjoint() * v;
    let m = n * n.saturating_sub(1) / 2;
    let mut r = DVec::zeros(m);
    let mut jac = DMatrix::zeros(m, 2 * d * n);
    let mut row = 0;
    for j in 0..n {
        for i in 0..j {
            let gij = g[(i, j)];
            let q = gij.norm_sqr() / (norms[i] * norms[j]);
            r[row] = q - p[(i, j)];
            // d|g|²/dv_i = 2 Re(g v_j† δ), the normalization adds −2 q Re(v_i† δ).
            for (a, b, ga, na) in [(i, j, gij, norms[i]), (j, i, gij.conj(), norms[j])] {
                let nb = norms[b];
                for k in 0..d {
                    let w = (ga * v[(k, b)].conj()) / (na * nb) - v[(k, a)].conj() * (q / na);
                    jac[(row, 2 * (d * a + k))] = 2.0 * w.re;
                    jac[(row, 2 * (d * a + k) + 1)] = -2.0 * w.im;
                }
            }
            row += 1;
        }
    }
    (r, jac)
}

/// Levenberg-Marquardt on the scale-invariant residuals. Vectors are
/// renormalized after each accepted step, so objective values agree with
/// gradient descent on the spheres.
fn levenberg_marquardt(p: &DMatrix<f64>, start: CMat, max_iterations: usize, target: f64) -> RunOutcome {
    let (d, n) = start.shape();
    let mut v = retract(&start);
    let (mut r, mut jac) = scaled_residuals(p, &v);
    let mut f = r.norm_squared();
    let mut history = vec![f];
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while iterations < max_iterations && f > target {
        iterations += 1;
        let jt = jac.transpose();
        let normal = &jt * &jac;
        let rhs = -(&jt * &r);
        let mut accepted = false;
        while lambda < 1e12 {
            let mut a = normal.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda;
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let delta = chol.solve(&rhs);
            let trial = retract(&CMat::from_fn(d, n, |k, c| {
                v[(k, c)] + Complex64::new(delta[2 * (d * c + k)], delta[2 * (d * c + k) + 1])
            }));
            let (rt, jt) = scaled_residuals(p, &trial);
            let ft = rt.norm_squared();
            if ft < f {
                (v, r, jac, f) = (trial, rt, jt, ft);
                lambda = (lambda * 0.3).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            break;
        }
        history.push(f);
    }
    let gradient_norm = Problem { p }.gradient(&v).norm();
    RunOutcome { vectors: v, objective: f, gradient_norm, iterations, history }
}

/// Runs the optimizer from the given starting rays (columns of `start`).
pub fn optimize_configuration(p: &TransitionKernel, start: CMat, cfg: &ReconstructionConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    if start.ncols() != p.n() {
        return Err(TpsError::DimensionMismatch { expected: p.n(), found: start.ncols() });
    }
    let problem = Problem { p: p.matrix() };
    let pairs = (p.n() * p.n().saturating_sub(1) / 2).max(1) as f64;
    Ok(descend(&problem, start, cfg, polish_target(cfg, pairs)))
}

fn polish_target(cfg: &ReconstructionConfig, pairs: f64) -> f64 {
    // Push well below the acceptance threshold so the reported residual has margin.
    let rms = cfg.tolerance * 1e-2;
    rms * rms * pairs
}

fn check_block(p: &TransitionKernel) -> Result<()> {
    let n = p.n();
    for i in 0..n {
        if (p.get(i, i) - 1.0).abs() > 1e-9 {
            return Err(TpsError::Precondition(format!("diagonal entry {i} is not 1")));
        }
        for j in 0..n {
            let v = p.get(i, j);
            if !(-1e-12..=1.0 + 1e-12).contains(&v) || (v - p.get(j, i)).abs() > 1e-9 {
                return Err(TpsError::Precondition(format!("entry ({i},{j}) is out of range or asymmetric")));
            }
        }
    }
    let components = sectors(p).len();
    if components > 1 {
        return Err(TpsError::Reducible { components });
    }
    Ok(())
}

/// Relaxed reflect-reflect iterations per restart and the relaxation parameter.
const PROJECTION_ITERATIONS: usize = 5000;
const PROJECTION_BETA: f64 = 0.8;
const PROJECTION_TOL: f64 = 1e-6;
const POLISH_ITERATIONS: usize = 1000;
/// Canonical imaginary parts below this are treated as noise around a real configuration.
const REAL_SNAP: f64 = 1e-2;

/// Fits one irreducible block; see the module documentation.
pub fn reconstruct_sector(p: &TransitionKernel, cfg: &ReconstructionConfig) -> Result<ReconstructionResult> {
    reconstruct_block(p, cfg, 0)
}

fn pair_count(n: usize) -> f64 {
    (n * n.saturating_sub(1) / 2).max(1) as f64
}

/// Nearest Hermitian PSD matrix of rank at most `rank`.
fn project_rank(g: &CMat, rank: usize) -> CMat {
    let (values, vectors) = linalg::hermitian_eigen(g);
    let mut out = CMat::zeros(g.nrows(), g.ncols());
    for (k, &l) in values.iter().enumerate().take(rank) {
        if l > 0.0 {
            let u = vectors.column(k);
            out += u * u.adjoint() * Complex64::from(l);
        }
    }
    out
}

/// Imposes the moduli `m_ij` (unit diagonal) and keeps the phases of `g`.
fn project_moduli(g: &CMat, m: &DMatrix<f64>) -> CMat {
    CMat::from_fn(g.nrows(), g.ncols(), |i, j| {
        if i == j {
            linalg::ONE
        } else {
            let z = g[(i, j)];
            let r = z.norm();
            if r > 0.0 {
                z * (m[(i, j)] / r)
            } else {
                Complex64::from(m[(i, j)])
            }
        }
    })
}

/// One restart. The Gram matrix `G = V†V` is sought as a point in two sets,
/// Hermitian PSD of rank `d` and moduli `|G_ij| = √p_ij`, by relaxed
/// reflect-reflect iteration from a random Hermitian start. Its rank-`d`
/// factor then seeds Levenberg-Marquardt on the rays themselves.
fn projection_run(p: &DMatrix<f64>, rank: usize, cfg: &ReconstructionConfig, rng: &mut ChaCha8Rng) -> RunOutcome {
    let n = p.nrows();
    let m = p.map(|x| x.clamp(0.0, 1.0).sqrt());
    let x0 = linalg::gaussian_matrix(n, n, rng);
    let mut x = (&x0 + x0.adjoint()) * Complex64::from(0.5);
    let mut iterations = 0;
    while iterations < PROJECTION_ITERATIONS {
        let b = project_moduli(&x, &m);
        let a = project_rank(&(&b * Complex64::from(2.0) - &x), rank);
        x += (&a - &b) * Complex64::from(PROJECTION_BETA);
        iterations += 1;
        if iterations % 20 == 0 {
            let gap = a.iter().zip(m.iter()).map(|(z, r)| (z.norm() - r).abs()).fold(0.0, f64::max);
            if gap < PROJECTION_TOL {
                break;
            }
        }
    }
    let (values, vectors) = linalg::hermitian_eigen(&project_moduli(&x, &m));
    let mut start = CMat::from_fn(rank, n, |k, i| vectors[(i, k)].conj() * values[k].max(0.0).sqrt());
    // A column that vanished in the truncation gets a random direction.
    for i in 0..n {
        if start.column(i).norm() < 1e-12 {
            start.set_column(i, &linalg::gaussian_matrix(rank, 1, rng).column(0));
        }
    }
    let problem = Problem { p };
    let target = polish_target(cfg, pair_count(n));
    let mut run = levenberg_marquardt(p, start, cfg.max_iterations.min(POLISH_ITERATIONS), target);
    if let Some(snapped) = snap_to_real(&problem, &run, cfg.max_iterations.min(POLISH_ITERATIONS), target) {
        iterations += run.iterations;
        run = snapped;
    }
    run.iterations += iterations;
    run
}

/// Real configurations are degenerate minima, and the optimizer tends to
/// stop beside them with small spurious imaginary parts. When the
/// gauge-fixed vectors are nearly real, refit from their real part; the
/// Levenberg-Marquardt steps stay real from a real start.
fn snap_to_real(problem: &Problem<'_>, run: &RunOutcome, cap: usize, target: f64) -> Option<RunOutcome> {
    let rays: Vec<Ray> = run.vectors.column_iter().map(|c| Ray::new(0, c.into_owned())).collect::<Result<_>>().ok()?;
    let rays = gauge_canonicalize(&rays).ok()?;
    let max_im = rays.iter().flat_map(|r| r.vector().iter().map(|z| z.im.abs())).fold(0.0, f64::max);
    if max_im == 0.0 || max_im > REAL_SNAP {
        return None;
    }
    let real = CMat::from_columns(&rays.iter().map(|r| r.vector().map(|z| Complex64::from(z.re))).collect::<Vec<_>>());
    let snapped = levenberg_marquardt(problem.p, real, cap, target);
    (snapped.objective <= run.objective.max(target)).then_some(snapped)
}

/// `P = G ∘ Ḡ` for the Gram matrix `G` of any exact model, so a rank-`r`
/// model forces `rank P ≤ r²`. The numerical rank of `P` uses a threshold
/// scaled by the fit tolerance so that kernels exact to that tolerance are
/// not over-counted.
pub fn rank_lower_bound(p: &TransitionKernel, tolerance: f64) -> usize {
    let n = p.n();
    let threshold = (10.0 * n as f64 * tolerance).max(1e-8);
    let eigen = p.matrix().clone().symmetric_eigen();
    let rank = eigen.eigenvalues.iter().filter(|l| l.abs() > threshold).count();
    ((rank as f64).sqrt().ceil() as usize).max(1)
}

fn reconstruct_block(p: &TransitionKernel, cfg: &ReconstructionConfig, sector: usize) -> Result<ReconstructionResult> {
    cfg.validate()?;
    check_block(p)?;
    let n = p.n();
    let problem = Problem { p: p.matrix() };
    let max_rank = cfg.max_rank.min(n);
    let min_rank = rank_lower_bound(p, cfg.tolerance).min(max_rank);
    let chunk = rayon::current_num_threads().max(1);

    let mut best: Option<(usize, RunOutcome)> = None;
    let mut iterations = 0;
    // Every rank runs the full budget unless one converges.
    let mut restarts_used = cfg.restarts;
    'ranks: for rank in min_rank..=max_rank {
        let mut start = 0;
        while start < cfg.restarts {
            let end = (start + chunk).min(cfg.restarts);
            let runs: Vec<RunOutcome> = (start..end)
                .into_par_iter()
                .map(|restart| {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream((rank as u64) << 32 | restart as u64);
                    projection_run(p.matrix(), rank, cfg, &mut rng)
                })
                .collect();
            // Runs are scanned in restart order so the outcome does not depend on the thread count.
            for (restart, run) in (start..end).zip(runs) {
                iterations += run.iterations;
                let done = problem.rms(run.objective) < cfg.tolerance;
                if best.as_ref().is_none_or(|(_, b)| run.objective < b.objective) {
                    best = Some((rank, run));
                }
                if done {
                    restarts_used = restart + 1;
                    break 'ranks;
                }
            }
            start = end;
        }
    }
    let (rank, run) = best.expect("at least one run");
    let to_rays = |m: &CMat| -> Result<Vec<Ray>> {
        let rays: Vec<Ray> = m.column_iter().map(|c| Ray::new(sector, c.into_owned())).collect::<Result<_>>()?;
        gauge_canonicalize(&rays)
    };
    let rays = to_rays(&run.vectors)?;
    let residual = problem.rms(run.objective);
    let real = rays.iter().all(|r| r.vector().iter().all(|z| z.im.abs() < 1e-8));
    Ok(ReconstructionResult {
        rays,
        sector,
        rank,
        residual,
        gradient_norm: run.gradient_norm,
        iterations,
        restarts_used,
        converged: residual < cfg.tolerance,
        real,
    })
}

/// Reconstruction of a whole kernel: sectors first, then each block.
#[derive(Debug, Clone)]
pub struct KernelReconstruction {
    /// Kernel indices of each sector.
    pub sectors: Vec<Vec<usize>>,
    pub blocks: Vec<ReconstructionResult>,
    /// One ray per kernel index, in the original order.
    pub rays: Vec<Ray>,
    /// RMS residual of the assembled model against the full kernel.
    pub residual: f64,
}

impl KernelReconstruction {
    pub fn converged(&self) -> bool {
        self.blocks.iter().all(|b| b.converged)
    }

    pub fn sector_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.rank).collect()
    }
}

pub fn reconstruct_kernel(kernel: &TransitionKernel, cfg: &ReconstructionConfig) -> Result<KernelReconstruction> {
    let blocks_idx = sectors(kernel);
    let mut blocks = Vec::with_capacity(blocks_idx.len());
    let mut rays: Vec<Option<Ray>> = vec![None; kernel.n()];
    for (s, idx) in blocks_idx.iter().enumerate() {
        let result = reconstruct_block(&kernel.restrict(idx), cfg, s)?;
        for (k, &i) in idx.iter().enumerate() {
            // Canonical rays live in C^{n_block}; trim to the recovered rank.
            let v = result.rays[k].vector().rows(0, result.rank).into_owned();
            rays[i] = Some(Ray::new(s, v)?);
        }
        blocks.push(result);
    }
    let rays: Vec<Ray> = rays.into_iter().map(|r| r.expect("every index is in a sector")).collect();
    let residual = embedding_residual(kernel, &rays)?;
    Ok(KernelReconstruction { sectors: blocks_idx, blocks, rays, residual })
}

/// RMS of `p(ρ_i, ρ_j) − p_ij` over the pairs `i < j`.
pub fn embedding_residual(p: &TransitionKernel, rays: &[Ray]) -> Result<f64> {
    let n = p.n();
    if rays.len() != n {
        return Err(TpsError::DimensionMismatch { expected: n, found: rays.len() });
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for j in 0..n {
        for i in 0..j {
            let r = transition_probability(&rays[i], &rays[j])? - p.get(i, j);
            sum += r * r;
            pairs += 1;
        }
    }
    Ok(if pairs == 0 { 0.0 } else { (sum / pairs as f64).sqrt() })
}

const GAUGE_EPS: f64 = 1e-10;

/// Quotients out the unitary and phase gauge: the rays are expressed in the
/// orthonormal frame obtained by Gram-Schmidt on the rays in order, after
/// rotating each ray so that its first non-vanishing overlap with an earlier
/// ray is real and nonnegative. The first ray becomes `(1, 0, …, 0)`.
pub fn gauge_canonicalize(rays: &[Ray]) -> Result<Vec<Ray>> {
    let first = rays.first().ok_or(TpsError::Precondition("nothing to canonicalize".into()))?;
    let (sector, d) = (first.sector(), first.dim());
    if let Some(bad) = rays.iter().find(|r| r.dim() != d || r.sector() != sector) {
        return Err(TpsError::DimensionMismatch { expected: d, found: bad.dim() });
    }
    let mut frame: Vec<CVec> = Vec::new();
    let mut phased: Vec<CVec> = Vec::with_capacity(rays.len());
    for ray in rays {
        let mut v = ray.vector().clone();
        if let Some(ov) = phased.iter().map(|w| w.dotc(&v)).find(|z| z.norm() > GAUGE_EPS) {
            v *= ov.conj() / ov.norm();
        }
        let mut residual = v.clone();
        for f in &frame {
            residual -= f * f.dotc(&v);
        }
        let rn = residual.norm();
        if rn > 1e-9 && frame.len() < d {
            frame.push(residual / Complex64::from(rn));
        }
        phased.push(v);
    }
    phased
        .iter()
        .map(|v| {
            let coords = CVec::from_iterator(d, (0..d).map(|k| frame.get(k).map_or(linalg::ZERO, |f| f.dotc(v))));
            Ray::new(sector, coords)
        })
        .collect()
}
