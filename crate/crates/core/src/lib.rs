//! Weak Euler simulation of SDEs driven by spherically-symmetric stable
//! noise, Brownian motion and Poisson point measures.

pub mod error;
pub mod euler;
pub mod fields;
pub mod generator;
pub mod harness;
pub mod levy;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod rng;
pub mod stable;
pub mod stats;
pub mod testfn;

pub use error::{Error, Result, ValidationIssue};
pub use euler::{EulerOptions, EulerScheme, PathBatch, TimeGrid};
pub use fields::{MatrixField, ScalarField, VectorField};
pub use generator::{apply_generator, dynkin_residual, mollify, GeneratorValue, QuadratureSpec};
pub use harness::{
    estimate_functional, one_step_check, predicted_kappa, weak_error_study, Ladder, RateFit, Reference,
};
pub use levy::LevyComponent;
pub use model::{Model, ModelSpec, Preset, PresetParams};
pub use oracle::{Symbol, SymbolGrid};
pub use rng::RngStream;
pub use stable::{AlphaRegime, SphereFunction, StableLaw};
pub use stats::McEstimate;
pub use testfn::TestFunction;
