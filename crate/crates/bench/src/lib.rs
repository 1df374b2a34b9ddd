//! Shared fixtures for the benchmarks.

use vacphase::{helix_to_trajectory, AngularTrajectory, HelixSpec};

/// One closed turn of a helix with tangent tilt `theta`.
pub fn coil(theta: f64, samples_per_turn: usize) -> AngularTrajectory {
    helix_to_trajectory(&HelixSpec::with_tilt(1.0, theta, 1.0, samples_per_turn), 1.0)
        .expect("valid helix")
}
