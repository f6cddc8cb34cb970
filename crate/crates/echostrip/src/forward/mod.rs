//! Forward solvers: the characteristic march for radial damping media, the
//! retarded-potential march for potential scattering, and the
//! finite-difference references they are checked against.

pub mod fd_oracle;
pub mod goursat;
pub mod lippmann;
pub mod types;

pub use goursat::{solve_radial_damping, solve_radial_damping_with, GoursatField};
pub use lippmann::{born_term, solve_potential, VolterraConfig, WaveField};
pub use types::{ReceiverWaveform, SingularPart};
