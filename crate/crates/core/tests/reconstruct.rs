mod common;

use common::{overlap, ray, rng};
use proptest::prelude::*;
use tpspace::linalg;
use tpspace::reconstruct::{
    embedding_residual, gauge_canonicalize, rank_lower_bound, reconstruct_kernel, reconstruct_sector,
    ReconstructionConfig,
};
use tpspace::space::{kernel_from_rays, Ray, TransitionKernel};

fn random_rays(n: usize, d: usize, seed: u64) -> Vec<Ray> {
    let mut r = rng(seed);
    (0..n).map(|_| Ray::random(0, d, &mut r)).collect()
}

fn recover(rays: &[Ray]) -> (usize, f64) {
    let kernel = kernel_from_rays(rays).unwrap();
    let result = reconstruct_sector(&kernel, &ReconstructionConfig::default()).unwrap();
    assert!(result.converged);
    (result.rank, embedding_residual(&kernel, &result.rays).unwrap())
}

#[test]
fn two_point_block_needs_a_plane() {
    let kernel = TransitionKernel::from_rows(&[vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
    let result = reconstruct_sector(&kernel, &ReconstructionConfig::default()).unwrap();
    assert_eq!(result.rank, 2);
    assert!(result.residual < 1e-10);
    assert!((overlap(&result.rays[0], &result.rays[1]) - 0.3).abs() < 1e-9);
}

#[test]
fn generated_kernels_recover_their_dimension() {
    let (rank, residual) = recover(&random_rays(6, 2, 1));
    assert_eq!(rank, 2);
    assert!(residual < 1e-8);
    let (rank, residual) = recover(&random_rays(8, 3, 2));
    assert_eq!(rank, 3);
    assert!(residual < 1e-7);
}

#[test]
fn disconnected_kernels_split_into_sectors() {
    let rows = vec![
        vec![1.0, 0.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
    ];
    let rec = reconstruct_kernel(&TransitionKernel::from_rows(&rows).unwrap(), &ReconstructionConfig::default()).unwrap();
    assert_eq!(rec.sector_dims(), vec![1, 1, 1, 1]);
    assert!(rec.converged() && rec.residual == 0.0);
}

#[test]
fn residual_examples() {
    let rays = random_rays(5, 3, 3);
    assert!(embedding_residual(&kernel_from_rays(&rays).unwrap(), &rays).unwrap() < 1e-14);
    let half = TransitionKernel::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
    let orthonormal = [Ray::basis(0, 2, 0), Ray::basis(0, 2, 1)];
    assert!((embedding_residual(&half, &orthonormal).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn residual_grows_linearly_with_perturbation() {
    let rays = random_rays(5, 3, 4);
    let kernel = kernel_from_rays(&rays).unwrap();
    let mut r = rng(5);
    let dir = linalg::random_unit_vector(3, &mut r);
    let v = rays[0].vector();
    let tangent = (&dir - v * v.dotc(&dir)).normalize();
    let residual = |angle: f64| {
        let mut moved = rays.clone();
        moved[0] = Ray::new(0, v * linalg::ONE.scale(angle.cos()) + &tangent * linalg::ONE.scale(angle.sin())).unwrap();
        embedding_residual(&kernel, &moved).unwrap()
    };
    let (a, b) = (residual(1e-3), residual(2e-3));
    assert!(a > 0.0 && (b / a - 2.0).abs() < 0.05, "{a} {b}");
}

#[test]
fn canonical_forms() {
    let single = Ray::from_components(0, &[num_complex::Complex64::new(0.3, -0.4), num_complex::Complex64::new(0.5, 0.2)]).unwrap();
    let canon = gauge_canonicalize(&[single]).unwrap();
    assert!(canon[0].same_point(&Ray::basis(0, 2, 0)));

    let pair = random_rays(2, 2, 6);
    let r = overlap(&pair[0], &pair[1]).sqrt();
    let canon = gauge_canonicalize(&pair).unwrap();
    let expected = Ray::from_real(0, &[r, (1.0 - r * r).sqrt()]).unwrap();
    assert!((canon[1].vector() - expected.vector()).norm() < 1e-12);
}

#[test]
fn rank_bound_is_tight_for_generic_qubits() {
    let kernel = kernel_from_rays(&random_rays(8, 2, 7)).unwrap();
    assert_eq!(rank_lower_bound(&kernel, 1e-9), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn small_round_trip(rays in prop::collection::vec(ray(0, 2), 3..7), seed in 0u64..1000) {
        let kernel = kernel_from_rays(&rays).unwrap();
        let cfg = ReconstructionConfig { seed, ..ReconstructionConfig::default() };
        let result = reconstruct_sector(&kernel, &cfg).unwrap();
        prop_assert!(result.converged);
        prop_assert!(result.rank <= 2);
        prop_assert!(embedding_residual(&kernel, &result.rays).unwrap() < 1e-8);
    }

    #[test]
    fn canonical_form_is_gauge_invariant(seed in any::<u64>(), phases in prop::collection::vec(-3.2..3.2f64, 4)) {
        let rays = random_rays(4, 3, seed);
        let u = linalg::random_unitary(3, &mut rng(seed ^ 0xa5a5));
        let moved: Vec<Ray> = rays
            .iter()
            .zip(&phases)
            .map(|(r, &t)| Ray::new(0, &u * r.vector()).unwrap().with_phase(t))
            .collect();
        let (a, b) = (gauge_canonicalize(&rays).unwrap(), gauge_canonicalize(&moved).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.vector() - y.vector()).norm() < 1e-9);
        }
    }
}
