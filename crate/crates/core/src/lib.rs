//! Transition probability spaces at finite dimension.
//!
//! A space is a list of sectors `ℙℂ^d` with `p(ρ, σ) = |⟨ρ, σ⟩|²` inside a
//! sector and zero across sectors. From that kernel the crate builds and
//! checks the orthoclosed-subset lattice ([`lattice`]), spectral resolutions
//! and the Jordan product ([`spectral`]), the Fubini-Study bracket and its
//! flows ([`poisson`]) and the assembled C*-algebra ([`cstar`]). The reverse
//! problem, finding rays that realize a given kernel, lives in
//! [`reconstruct`].
//!
//! ```
//! use tpspace::space::{kernel_from_rays, check_tps_axioms, Ray};
//!
//! let rays = [Ray::from_real(0, &[1.0, 0.0]).unwrap(), Ray::from_real(0, &[1.0, 1.0]).unwrap()];
//! let kernel = kernel_from_rays(&rays).unwrap();
//! assert!((kernel.get(0, 1) - 0.5).abs() < 1e-15);
//! assert!(check_tps_axioms(&kernel, 1e-12).all_pass());
//! ```

pub mod error;
pub mod lattice;
pub mod linalg;
pub mod report;
pub mod space;
pub mod spectral;
pub mod reconstruct;
pub mod poisson;
pub mod cstar;
pub mod io;

// The book chapters run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/transition-probabilities.md")]
    mod transition_probabilities {}
    #[doc = include_str!("../../../book/src/lattice.md")]
    mod lattice {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/poisson.md")]
    mod poisson {}
    #[doc = include_str!("../../../book/src/cstar.md")]
    mod cstar {}
    #[doc = include_str!("../../../book/src/reconstruction.md")]
    mod reconstruction {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
