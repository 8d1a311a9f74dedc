//! Decoherence of a charge or neutral dipole in a two-path interferometer,
//! in free space and near a perfectly conducting plane.
//!
//! Natural units (`ħ = c = 1`). The two branches follow `z0·ẑ ± x(t)·ĵ`.

pub mod decoherence;
pub mod kernels;
pub mod oracle;
pub mod quadrature;
pub mod scenario;
pub mod trajectories;
