//! Quantum intermediate scattering functions from stochastic thermal wave packets.
//!
//! The ISF `I(q, t)` of a one-dimensional particle is evaluated as the
//! ensemble average of overlaps between a thermal wave packet that is kicked
//! by `exp(iqx)` and then evolved, and the same packet evolved and then
//! kicked. The exact spectral trace and the analytic ballistic result serve as
//! oracles; model fitting and the dynamical structure factor post-process the
//! traces.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below name the double precision instantiations used by the CLI.

// `!(x > 0)` deliberately rejects NaN; matrix kernels read best indexed.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod dynamics;
pub mod eigen;
pub mod ensemble;
pub mod error;
pub mod isf;
pub mod num;
pub mod spectrum;
pub mod system;
pub mod units;

pub use error::{Error, Result};
pub use num::{Complex, Real};

pub type Grid64 = system::Grid<f64>;
pub type Hamiltonian64 = system::HamiltonianMatrix<f64>;
pub type Spectrum64 = spectrum::Spectrum<f64>;
pub type ThermalWeights64 = spectrum::ThermalWeights<f64>;
pub type KickMatrix64 = dynamics::KickMatrix<f64>;
pub type IsfTrace64 = isf::IsfTrace<f64>;
pub type FitResult64 = analysis::FitResult<f64>;
pub type DsfTrace64 = analysis::DsfTrace<f64>;

pub type Grid32 = system::Grid<f32>;
pub type Spectrum32 = spectrum::Spectrum<f32>;
pub type IsfTrace32 = isf::IsfTrace<f32>;
