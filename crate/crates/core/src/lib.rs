//! Electromagnetic scattering from dielectric gratings periodic in one
//! transverse direction, computed with a variable phase method, and the
//! Casimir interaction energy between two such gratings.
//!
//! Units: lengths in `l0`, wavenumbers in `1/l0`, `hbar = c = 1`. Energies per
//! unit area are in `hbar c / l0^3`.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod casimir;
pub mod coupling;
pub mod error;
pub mod linalg;
pub mod ode;
pub mod profile;
pub mod quadrature;
pub mod smatrix;
pub mod solve;

pub use basis::{build_basis, Axis, Frequency, ModeBasis};
pub use error::{ChannelTag, Error, Result};
pub use profile::{CheckResult, FermiStepParams, FourierProfile};
