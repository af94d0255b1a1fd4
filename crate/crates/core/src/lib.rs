//! Speckle-tracking phase and dark-field retrieval.
//!
//! Recovers a sample's phase shift and its effective small-angle scattering
//! (dark-field) diffusion map from reference/sample speckle image pairs, by
//! inverting a Fokker–Planck model of speckle deformation pixel by pixel.
//!
//! * [`field`], [`geometry`], [`model`]: shared domain types.
//! * [`diffops`]: finite-difference and spectral derivatives.
//! * [`synth`]: seeded speckle references and smooth phantoms.
//! * [`forward`](mod@forward): the forward model (full, simplified and tensor forms).
//! * [`solver`]: two-shot, least-squares and tensor inversions.
//! * [`phase`]: FFT Poisson integration of the phase Laplacian.
//! * [`metrics`]: CNR and relative RMS error.
//! * [`io`]: PFM/raw field files and run configuration.
//!
//! Units are SI throughout; photon energy is the one exception and is given
//! in eV. `D_eff` comes out in meters.

pub mod diffops;
pub mod error;
pub mod field;
pub mod forward;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod model;
pub mod phase;
pub mod solver;
mod spectral;
pub mod synth;

pub use diffops::{Boundary, StencilKind, StencilScheme};
pub use error::{MistError, Result};
pub use field::ScalarField;
pub use forward::{
    add_noise, forward, forward_full, forward_simplified, forward_tensor, Diffusion, ForwardMode,
};
pub use geometry::{wave_number_from_energy, Geometry};
pub use metrics::{cnr, rms_relative_error, CnrReport, Roi};
pub use model::{ReconstructionResult, SpecklePair, TensorResult};
pub use phase::{integrate_phase, spectral_laplacian, PoissonOptions};
pub use solver::{
    solve_least_squares, solve_tensor, solve_two_shot, validate_decorrelation, SolverOptions,
};
pub use synth::{generate_speckle, SpeckleSpec};
