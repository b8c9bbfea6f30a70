//! Disordered non-Hermitian Su-Schrieffer-Heeger chains.
//!
//! The crate builds dense real-space Hamiltonians for four chiral-symmetric
//! chain variants (nonreciprocal intercell hopping, an extra long-range
//! intercell bond, random nonreciprocity, and on-site gain/loss), diagonalizes
//! them in a biorthonormal basis and evaluates the open-bulk real-space
//! winding number, inverse participation ratios and the zero-energy
//! localization length. [`ensemble`] averages these over disorder
//! realizations and sweeps two-parameter grids deterministically.
//!
//! ```no_run
//! use nhtai::lattice::{build_hamiltonian, chiral_operator, sample_disorder, ModelSpec};
//! use nhtai::observables::{winding_number, WindingConfig};
//! use nhtai::spectral::{chiral_branches, decompose};
//!
//! let spec = ModelSpec { t_prime: 1.2, gamma: 1.0, w1: 2.0, ..ModelSpec::default() };
//! let real = sample_disorder(&spec, 7);
//! let h = build_hamiltonian(&spec, &real).unwrap();
//! let c = chiral_operator(&spec);
//! let d = decompose(&h, 1e-8).unwrap();
//! let b = chiral_branches(&d, &c, 2).unwrap();
//! let cfg = WindingConfig::new(spec.n_sites(), 20).unwrap();
//! let nu = winding_number(&d, &b, &c, &cfg).unwrap();
//! println!("nu = {nu}");
//! ```

pub mod analytic;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod lattice;
pub mod observables;
pub mod output;
pub mod spectral;
pub mod validate;

pub use error::{Error, Result};
pub use faer::c64;
