#![allow(dead_code)]

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tpspace::space::Ray;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Components of a nonzero vector of length `dim`.
pub fn components(dim: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dim)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect::<Vec<_>>())
        .prop_filter("vector too short", |v| v.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-3)
}

pub fn ray(sector: usize, dim: usize) -> impl Strategy<Value = Ray> {
    components(dim).prop_map(move |c| Ray::from_components(sector, &c).unwrap())
}

/// A pair of rays in one sector of dimension 2 to 4.
pub fn ray_pair() -> impl Strategy<Value = (Ray, Ray)> {
    (2usize..=4).prop_flat_map(|d| (ray(0, d), ray(0, d)))
}

/// `|⟨u, v⟩|²` by hand.
pub fn overlap(a: &Ray, b: &Ray) -> f64 {
    if a.sector() != b.sector() {
        return 0.0;
    }
    a.vector().iter().zip(b.vector().iter()).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm_sqr()
}
