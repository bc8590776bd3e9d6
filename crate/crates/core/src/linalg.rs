//! Dense complex linear algebra helpers shared by the geometric modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative singular value threshold used for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

pub fn inner(u: &CVec, v: &CVec) -> Complex64 {
    u.dotc(v)
}

/// `B B†` for a matrix whose columns are orthonormal.
pub fn projector(basis: &CMat) -> CMat {
    basis * basis.adjoint()
}

pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

pub fn empty_basis(dim: usize) -> CMat {
    CMat::zeros(dim, 0)
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, s| acc.max(*s))
}

/// Sum of singular values.
pub fn trace_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().sum()
}

/// Orthonormal basis for the column span of `cols`, dropping directions whose
/// singular value falls below `RANK_TOL` times the leading one.
pub fn column_span(cols: &CMat) -> CMat {
    let rows = cols.nrows();
    if cols.ncols() == 0 || rows == 0 {
        return empty_basis(rows);
    }
    let svd = cols.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, s| a.max(*s));
    if smax <= f64::MIN_POSITIVE {
        return empty_basis(rows);
    }
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&k| svd.singular_values[k] > RANK_TOL * smax)
        .collect();
    let mut out = CMat::zeros(rows, keep.len());
    for (j, &k) in keep.iter().enumerate() {
        out.set_column(j, &u.column(k));
    }
    out
}

/// Orthonormal basis of the null space of `m` (columns live in `C^{m.ncols()}`).
///
/// The threshold is `RANK_TOL` relative to the leading singular value; an
/// identically zero matrix has the whole space as null space.
pub fn null_space(m: &CMat) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return empty_basis(0);
    }
    // Pad so the thin SVD returns a complete right singular basis.
    let rows = m.nrows().max(n);
    let mut padded = CMat::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, s| a.max(*s));
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| smax <= f64::MIN_POSITIVE || svd.singular_values[k] <= RANK_TOL * smax)
        .collect();
    let mut out = CMat::zeros(n, keep.len());
    for (j, &k) in keep.iter().enumerate() {
        let row = v_t.row(k);
        for i in 0..n {
            out[(i, j)] = row[i].conj();
        }
    }
    out
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues in decreasing order.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let sym = hermitian_part(m);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// `exp(i * scale * A)` for Hermitian `A`.
pub fn unitary_exp(a: &CMat, scale: f64) -> CMat {
    let (values, vectors) = hermitian_eigen(a);
    let phases = CVec::from_iterator(
        values.len(),
        values.iter().map(|&l| Complex64::from_polar(1.0, scale * l)),
    );
    &vectors * CMat::from_diagonal(&phases) * vectors.adjoint()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn anticommutator_half(a: &CMat, b: &CMat) -> CMat {
    (a * b + b * a).scale(0.5)
}

/// Real expectation `⟨v, A v⟩` for Hermitian `A`.
pub fn expectation(a: &CMat, v: &CVec) -> f64 {
    v.dotc(&(a * v)).re
}

pub fn gaussian_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CVec {
    CVec::from_iterator(
        dim,
        (0..dim).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))),
    )
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Random unit vector, uniformly distributed on the sphere of `C^dim`.
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CVec {
    loop {
        let v = gaussian_vector(dim, rng);
        let n = v.norm();
        if n > 1e-6 {
            return v / Complex64::from(n);
        }
    }
}

/// Random Hermitian matrix from the Gaussian unitary ensemble, scaled by `scale`.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> CMat {
    hermitian_part(&gaussian_matrix(dim, dim, rng)).scale(scale)
}

/// Random unitary from the QR factorization of a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMat {
    let g = gaussian_matrix(dim, dim, rng);
    g.qr().q()
}

pub fn max_abs_entry(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn null_space_of_rank_deficient_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = gaussian_matrix(5, 2, &mut rng);
        let m = &b * b.adjoint();
        let ns = null_space(&m);
        assert_eq!(ns.ncols(), 3);
        assert!(max_abs_entry(&(&m * &ns)) < 1e-10);
        let gram = ns.adjoint() * &ns;
        assert!(max_abs_entry(&(gram - CMat::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn null_space_of_zero_is_everything() {
        let ns = null_space(&CMat::zeros(3, 3));
        assert_eq!(ns.ncols(), 3);
    }

    #[test]
    fn span_drops_dependent_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = gaussian_matrix(4, 2, &mut rng);
        let mut cols = CMat::zeros(4, 3);
        cols.view_mut((0, 0), (4, 2)).copy_from(&b);
        let combo = b.column(0) * Complex64::new(0.3, -1.0) + b.column(1);
        cols.set_column(2, &combo);
        assert_eq!(column_span(&cols).ncols(), 2);
    }

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_hermitian(4, 1.0, &mut rng);
        let (vals, vecs) = hermitian_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let d = CMat::from_diagonal(&CVec::from_iterator(4, vals.iter().map(|&l| Complex64::from(l))));
        let back = &vecs * d * vecs.adjoint();
        assert!(max_abs_entry(&(back - a)) < 1e-12);
    }

    #[test]
    fn unitary_exp_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_hermitian(3, 2.0, &mut rng);
        let u = unitary_exp(&a, 0.7);
        assert!(max_abs_entry(&(u.adjoint() * &u - CMat::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn trace_norm_of_rank_two_difference() {
        // ‖|u⟩⟨u| − |v⟩⟨v|‖₁ = 2√(1 − |⟨u,v⟩|²)
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_unit_vector(3, &mut rng);
        let v = random_unit_vector(3, &mut rng);
        let p = inner(&u, &v).norm_sqr();
        let tn = trace_norm(&(outer(&u) - outer(&v)));
        assert!((tn - 2.0 * (1.0 - p).sqrt()).abs() < 1e-12);
    }
}
