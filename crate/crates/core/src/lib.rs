//! Inertial manifolds for semilinear parabolic systems whose leading part is
//! a Jordan block `[[1,1],[0,1]]·A` (or a larger triangular pattern times `A`),
//! with `A` positive self-adjoint.
//!
//! The crate computes the sharp spectral-gap machinery for such systems at
//! Galerkin scale:
//!
//! * [`spectra`] — eigenvalue ladders of `A` and spectral projectors,
//! * [`linop`] — closed-form norms of the solution operators `𝕃` and `L` in
//!   exponentially weighted trajectory spaces, the optimal weight `θ`, and a
//!   brute-force frequency-sweep oracle,
//! * [`gapcheck`] — every spectral-gap condition normalized to `lhs > L`,
//! * [`dynamics`] — exact Jordan-block propagators and an exponential time
//!   integrator for the truncated semilinear system,
//! * [`perron`] — the inertial manifold as a fixed point of
//!   `ξ ↦ 𝕃𝔽(ξ) + 𝕋ξ₀⁺` on a discretized weighted half-line, with
//!   invariance and exponential-tracking verification,
//! * [`sharpness`] — counterexamples that merge two eigenvalues and rotate
//!   them into a complex pair once the gap condition fails,
//! * [`kwak`] — concrete transforms for 1D viscous Burgers and scalar
//!   reaction-diffusion-advection via Fourier pseudospectral methods,
//! * [`verify`] — the end-to-end verification suite used by the `acceptance`
//!   test target and the CLI.

pub mod dynamics;
pub mod gapcheck;
pub mod kwak;
pub mod linop;
pub mod perron;
pub mod sharpness;
pub mod spectra;
pub mod util;
pub mod verify;

pub use dynamics::{BlockPattern, JordanSystem, NonlinearitySpec, StateVector, Trajectory};
pub use gapcheck::{GapConditionKind, SpectralGapReport};
pub use linop::{NormMode, OperatorNormResult, WeightParameter};
pub use perron::{ManifoldGraph, SolverSettings, TrackingReport, WeightedTrajectory};
pub use sharpness::{CounterexampleInstance, OscillationReport};
pub use spectra::{EigenvalueLadder, Generator, SpectralProjector};
