//! Geometric-phase integrals over wave-vector trajectories.
//!
//! Everything here is built on the kernel `∫ φ̇ (1 − cos θ) dt`, which depends
//! only on the path traced by `k̂` on the unit sphere. Mode phases scale the
//! kernel by the expectation of the relevant spin-operator piece.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{helix_to_trajectory, AngularTrajectory, HelixSpec, PathOptions};
use crate::io::csv_bytes;

/// Right-handed (`+1`) or left-handed (`-1`) circular polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Helicity {
    Right,
    Left,
}

impl Helicity {
    pub fn sign(self) -> f64 {
        match self {
            Helicity::Right => 1.0,
            Helicity::Left => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Helicity::Right => Helicity::Left,
            Helicity::Left => Helicity::Right,
        }
    }
}

impl From<Helicity> for i8 {
    fn from(h: Helicity) -> i8 {
        match h {
            Helicity::Right => 1,
            Helicity::Left => -1,
        }
    }
}

impl TryFrom<i8> for Helicity {
    type Error = Error;
    fn try_from(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Helicity::Right),
            -1 => Ok(Helicity::Left),
            _ => Err(Error::config(format!("helicity must be +1 or -1, got {v}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseKernel {
    /// `∫ φ̇ (1 − cos θ) dt` in radians, unreduced.
    pub value: f64,
    /// Solid angle (sr) enclosed by the closed `k̂` loop; absent for open paths.
    pub cyclic_solid_angle: Option<f64>,
}

/// Running value of the kernel at every sample.
///
/// Each segment contributes `Δφ · [(1 − cos θ_i) + (1 − cos θ_{i+1})] / 2`,
/// the composite trapezoid on `φ̇ (1 − cos θ)` with φ̇ taken as the segment
/// difference. Time stamps cancel, so relabeling time leaves the sum unchanged.
pub fn cumulative_kernel(traj: &AngularTrajectory) -> Vec<f64> {
    let s = traj.samples();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(s.len());
    out.push(0.0);
    for w in s.windows(2) {
        let weight = 0.5 * ((1.0 - w[0].theta.cos()) + (1.0 - w[1].theta.cos()));
        acc += (w[1].phi - w[0].phi) * weight;
        out.push(acc);
    }
    out
}

pub fn phase_kernel(traj: &AngularTrajectory) -> Result<PhaseKernel> {
    if traj.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: traj.len(),
        });
    }
    let value = *cumulative_kernel(traj).last().expect("nonempty");
    Ok(PhaseKernel {
        value,
        cyclic_solid_angle: traj.is_closed().then_some(value),
    })
}

/// Kernel of a constant-tilt helix over one full turn: `2π (1 − cos θ)`.
pub fn solid_angle_of_cone(theta: f64) -> f64 {
    TAU * (1.0 - theta.cos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePhase {
    pub sigma: Helicity,
    pub occupation: u32,
    /// Part carried by the photons themselves (normal-ordered spin).
    pub phase_quantal: f64,
    /// Zero-point contribution, `±kernel/2`.
    pub phase_vacuum: f64,
    pub phase_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub kernel: PhaseKernel,
    pub per_mode: Vec<ModePhase>,
    /// `(n_R − n_L) · kernel`.
    pub multiphoton_phase: f64,
    /// Sum of both vacuum phases; zero by construction.
    pub vacuum_sum: f64,
}

impl PhaseReport {
    pub fn mode(&self, sigma: Helicity) -> &ModePhase {
        self.per_mode
            .iter()
            .find(|m| m.sigma == sigma)
            .expect("report carries both helicities")
    }

    /// Key-value text form (TOML).
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("report encoding: {e}")))
    }

    /// CSV with columns `sigma,n,quantal,vacuum,total`.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        csv_bytes(
            &["sigma", "n", "quantal", "vacuum", "total"],
            self.per_mode.iter().map(|m| {
                [
                    i8::from(m.sigma).to_string(),
                    m.occupation.to_string(),
                    m.phase_quantal.to_string(),
                    m.phase_vacuum.to_string(),
                    m.phase_total.to_string(),
                ]
            }),
        )
    }
}

/// Assembles a report from per-helicity quantal and vacuum pieces.
pub(crate) fn assemble_report(
    kernel: PhaseKernel,
    n_r: u32,
    n_l: u32,
    quantal: (f64, f64),
    vacuum: (f64, f64),
) -> PhaseReport {
    // `+ 0.0` folds −0 into +0 so reports never print "-0".
    let mode = |sigma, occupation, q: f64, v: f64| ModePhase {
        sigma,
        occupation,
        phase_quantal: q + 0.0,
        phase_vacuum: v + 0.0,
        phase_total: q + v,
    };
    PhaseReport {
        kernel,
        per_mode: vec![
            mode(Helicity::Right, n_r, quantal.0, vacuum.0),
            mode(Helicity::Left, n_l, quantal.1, vacuum.1),
        ],
        multiphoton_phase: (n_r as f64 - n_l as f64) * kernel.value,
        vacuum_sum: vacuum.0 + vacuum.1,
    }
}

/// Closed-form mode phases for `n_R` right- and `n_L` left-handed photons.
///
/// Right: `+(n_R + 1/2)·Ω`, left: `−(n_L + 1/2)·Ω`, where the halves are the
/// zero-point parts.
pub fn mode_resolved_phases(kernel: PhaseKernel, n_r: i64, n_l: i64) -> Result<PhaseReport> {
    if n_r < 0 || n_l < 0 {
        return Err(Error::config(format!(
            "occupations must be nonnegative, got n_R={n_r}, n_L={n_l}"
        )));
    }
    let (n_r, n_l) = (
        u32::try_from(n_r).map_err(|_| Error::config("n_R too large"))?,
        u32::try_from(n_l).map_err(|_| Error::config("n_L too large"))?,
    );
    let v = kernel.value;
    let half = 0.5 * v;
    Ok(assemble_report(
        kernel,
        n_r,
        n_l,
        (n_r as f64 * v, -(n_l as f64 * v)),
        (half, -half),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    /// Kernels from coarsest to finest.
    pub kernels: Vec<PhaseKernel>,
    pub sample_counts: Vec<usize>,
    /// Richardson estimate `(K_k − K_{k−1}) / 3` of the error in level `k ≥ 1`.
    pub error_estimates: Vec<f64>,
    /// Richardson-extrapolated value from the two finest levels.
    pub extrapolated: Option<f64>,
}

/// Evaluates the kernel at successively doubled sample densities.
///
/// Helix trajectories are regenerated from their closed form starting at the
/// given density. Other trajectories are subsampled, so the finest level is
/// the trajectory as given.
pub fn quadrature_refine(traj: &AngularTrajectory, levels: usize) -> Result<RefinementReport> {
    if levels == 0 {
        return Err(Error::config("levels must be at least 1"));
    }
    let mut trajs = Vec::with_capacity(levels);
    if let Some(m) = traj.motion() {
        let s = traj.samples();
        let cycles = (s[s.len() - 1].phi - s[0].phi) / TAU;
        let base = m.spec.samples_per_turn;
        for k in 0..levels {
            let spec = HelixSpec {
                samples_per_turn: base << k,
                ..m.spec
            };
            trajs.push(helix_to_trajectory(&spec, cycles)?);
        }
    } else {
        let n = traj.len();
        for k in (0..levels).rev() {
            let stride = 1usize << k;
            let mut picked: Vec<_> = traj.samples().iter().step_by(stride).copied().collect();
            if !(n - 1).is_multiple_of(stride) {
                picked.push(traj.samples()[n - 1]);
            }
            if picked.len() < 2 {
                return Err(Error::config(format!(
                    "{levels} levels need more than {n} samples"
                )));
            }
            let mut sub = AngularTrajectory::from_samples(picked, PathOptions::default())?;
            if traj.is_closed() != sub.is_closed() {
                sub = AngularTrajectory::from_samples(
                    sub.samples().to_vec(),
                    PathOptions {
                        closure_tol: f64::INFINITY,
                        ..PathOptions::default()
                    },
                )?;
            }
            trajs.push(sub);
        }
    }
    let kernels = trajs.iter().map(phase_kernel).collect::<Result<Vec<_>>>()?;
    let error_estimates: Vec<f64> = kernels
        .windows(2)
        .map(|w| (w[1].value - w[0].value) / 3.0)
        .collect();
    let extrapolated = error_estimates
        .last()
        .map(|e| kernels[kernels.len() - 1].value + e);
    Ok(RefinementReport {
        sample_counts: trajs.iter().map(AngularTrajectory::len).collect(),
        kernels,
        error_estimates,
        extrapolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{helix_to_trajectory, AngularSample};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI, SQRT_2};

    fn cone(theta: f64, cycles: f64) -> AngularTrajectory {
        helix_to_trajectory(&HelixSpec::with_tilt(1.0, theta, cycles, 256), cycles).unwrap()
    }

    #[test]
    fn equatorial_turn_is_two_pi() {
        let k = phase_kernel(&cone(FRAC_PI_2, 1.0)).unwrap();
        assert!((k.value - TAU).abs() < 1e-12);
        assert_eq!(k.cyclic_solid_angle, Some(k.value));
    }

    #[test]
    fn sixty_degree_turn_is_pi() {
        let k = phase_kernel(&cone(FRAC_PI_3, 1.0)).unwrap();
        assert!((k.value - PI).abs() < 1e-12);
    }

    #[test]
    fn half_turn_at_quarter_pi() {
        // closed form for constant θ over φ ∈ [0, π]
        let expected = PI * (1.0 - SQRT_2 / 2.0);
        // independent check: midpoint rule on a fine grid
        let n = 100_000;
        let fine: f64 = (0..n)
            .map(|_| (PI / n as f64) * (1.0 - FRAC_PI_4.cos()))
            .sum();
        assert!((fine - expected).abs() < 1e-9);
        let k = phase_kernel(&cone(FRAC_PI_4, 0.5)).unwrap();
        assert!((k.value - expected).abs() < 1e-12);
        assert_eq!(k.cyclic_solid_angle, None);
    }

    #[test]
    fn straight_fiber_has_no_phase() {
        let samples = (0..10)
            .map(|i| AngularSample { t: i as f64, theta: 0.0, phi: 0.0 })
            .collect();
        let traj = AngularTrajectory::from_samples(samples, PathOptions::default()).unwrap();
        assert_eq!(phase_kernel(&traj).unwrap().value, 0.0);
    }

    #[test]
    fn single_photon_right() {
        let k = PhaseKernel { value: TAU, cyclic_solid_angle: Some(TAU) };
        let r = mode_resolved_phases(k, 1, 0).unwrap();
        assert!((r.mode(Helicity::Right).phase_total - 3.0 * PI).abs() < 1e-12);
        assert!((r.mode(Helicity::Left).phase_total + PI).abs() < 1e-12);
        assert!((r.multiphoton_phase - TAU).abs() < 1e-12);
        assert_eq!(r.vacuum_sum, 0.0);
    }

    #[test]
    fn balanced_occupation_keeps_vacuum() {
        let omega = 1.234;
        let k = PhaseKernel { value: omega, cyclic_solid_angle: None };
        let r = mode_resolved_phases(k, 3, 3).unwrap();
        assert_eq!(r.multiphoton_phase, 0.0);
        assert_eq!(r.mode(Helicity::Right).phase_vacuum, omega / 2.0);
        assert_eq!(r.mode(Helicity::Left).phase_vacuum, -omega / 2.0);
        assert_eq!(
            r.mode(Helicity::Right).phase_total,
            -r.mode(Helicity::Left).phase_total
        );
    }

    #[test]
    fn vacuum_only_at_sixty_degrees() {
        let k = phase_kernel(&cone(FRAC_PI_3, 1.0)).unwrap();
        let r = mode_resolved_phases(k, 0, 0).unwrap();
        assert!((r.mode(Helicity::Right).phase_vacuum - FRAC_PI_2).abs() < 1e-12);
        assert!((r.mode(Helicity::Left).phase_vacuum + FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn negative_occupation_rejected() {
        let k = PhaseKernel { value: 1.0, cyclic_solid_angle: None };
        assert!(matches!(mode_resolved_phases(k, -1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn refine_single_level_has_no_estimate() {
        let r = quadrature_refine(&cone(FRAC_PI_3, 1.0), 1).unwrap();
        assert_eq!(r.kernels.len(), 1);
        assert!(r.error_estimates.is_empty());
        assert!(r.extrapolated.is_none());
    }

    #[test]
    fn refine_constant_trajectory() {
        let samples = (0..=16)
            .map(|i| AngularSample { t: i as f64, theta: 0.7, phi: 0.2 })
            .collect();
        let traj = AngularTrajectory::from_samples(samples, PathOptions::default()).unwrap();
        let r = quadrature_refine(&traj, 3).unwrap();
        assert!(r.kernels.iter().all(|k| k.value == 0.0));
        assert_eq!(r.sample_counts, vec![5, 9, 17]);
    }

    #[test]
    fn refine_helix_doubles_density() {
        let r = quadrature_refine(&cone(FRAC_PI_4, 1.0), 3).unwrap();
        assert_eq!(r.sample_counts, vec![257, 513, 1025]);
        for k in &r.kernels {
            assert!((k.value - solid_angle_of_cone(FRAC_PI_4)).abs() < 1e-12);
        }
    }

    #[test]
    fn helicity_wire_form() {
        assert_eq!(i8::from(Helicity::Left), -1);
        assert!(Helicity::try_from(0).is_err());
    }
}
