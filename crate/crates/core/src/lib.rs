//! Numerical laboratory for the 1-D double-power nonlinear Schrodinger
//! equation: ground-state profiles by quadrature, the one-sided frequency
//! derivative of the profile family at zero frequency, the mass-derivative
//! limit, cutoff unstable directions, and direct split-step time evolution.

pub mod error;
pub mod fit;
pub mod model;
pub mod par;
pub mod profile;
pub mod quad;
pub mod series;

pub mod eta;
pub mod evolve;
pub mod mass;
pub mod unstable;

pub use error::{Error, Result};
pub use model::{ModelParams, StabilityClass, StabilityTag};
pub use profile::ProfileEvaluator;
