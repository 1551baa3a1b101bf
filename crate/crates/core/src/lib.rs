//! Frank-Wolfe with exact line search over the Euclidean ball: ambient
//! simulation, the scalar `(r, s)` dynamics, a backward-forward construction of
//! slow trajectories, stable-phase searches and the experiment drivers.
//!
//! Everything numeric is generic over a [`numeric::ScalarContext`]; the
//! aliases below fix the two shipped backends.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fwcore;
pub mod numeric;
pub mod search;
pub mod worstcase;

pub use error::{Error, Result};
pub use numeric::{
    make_context, Backend, BigReal, ExtendedContext, HardwareContext, PrecisionConfig, PrecisionMode, Scalar,
    ScalarContext,
};

/// Scalar of the 53-bit backend.
pub type HardwareReal = f64;
/// Scalar of the arbitrary-width backend.
pub type ExtendedReal = BigReal;

pub type HardwareTrajectory = fwcore::Trajectory<HardwareReal>;
pub type ExtendedTrajectory = fwcore::Trajectory<ExtendedReal>;
pub type HardwareRSState = dynamics::RSState<HardwareReal>;
pub type ExtendedRSState = dynamics::RSState<ExtendedReal>;
pub type HardwareCertificate = worstcase::LowerBoundCertificate<HardwareReal>;
pub type ExtendedCertificate = worstcase::LowerBoundCertificate<ExtendedReal>;
