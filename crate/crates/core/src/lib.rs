//! Geometric phases of polarized light in coiled fibers.
//!
//! The pipeline runs from fiber geometry to wave-vector trajectory
//! ([`geometry`]), through the geometric-phase kernel ([`phase`]) and its
//! split into photon and zero-point parts on a truncated Fock space
//! ([`fock`]), to a first-quantized spin-1 time evolution that checks the
//! closed-form solution numerically ([`evolution`]). [`gyrotropic`] decides
//! which circular modes survive in a gyrotropic medium, and [`scenario`]
//! strings everything together behind a config file.

pub mod error;
pub mod evolution;
pub mod fock;
pub mod geometry;
pub mod gyrotropic;
pub mod io;
pub mod phase;
pub mod plot;
pub mod scenario;

pub use error::{Error, Result};
pub use evolution::{evolve, EvolutionResult, PhotonState, SpinMatrices};
pub use fock::{build_fock_system, FockSystem, ModeOccupation, Ordering};
pub use geometry::{
    helix_to_trajectory, reparameterize, sampled_path_to_trajectory, AngularSample,
    AngularTrajectory, HelixSpec, SampledPath, Vec3,
};
pub use gyrotropic::{classify, GyrotropicTensors, ModeClassification, Verdict};
pub use phase::{mode_resolved_phases, phase_kernel, Helicity, PhaseKernel, PhaseReport};
pub use scenario::{run_scenario, ScenarioConfig};
