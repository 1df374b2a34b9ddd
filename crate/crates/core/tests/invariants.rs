use proptest::prelude::*;

use vacphase::fock::phases_from_fock;
use vacphase::geometry::{AngularSample, PathOptions};
use vacphase::{
    build_fock_system, helix_to_trajectory, mode_resolved_phases, phase_kernel, reparameterize,
    AngularTrajectory, Helicity, HelixSpec, ModeOccupation,
};

/// A smooth random open trajectory: θ and φ are low-order trigonometric series.
fn wander(coef: [f64; 4], n: usize) -> AngularTrajectory {
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64 * 5.0;
            AngularSample {
                t,
                theta: 1.2 + 0.4 * (coef[0] * t).sin() + 0.2 * (coef[1] * t).cos(),
                phi: coef[2] * t + 0.5 * (coef[3] * t).sin(),
            }
        })
        .collect();
    AngularTrajectory::from_samples(samples, PathOptions::default()).unwrap()
}

fn coefs() -> impl Strategy<Value = [f64; 4]> {
    [0.1..2.0f64, 0.1..2.0f64, -3.0..3.0f64, 0.1..2.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_additive_over_splits(c in coefs(), split in 2usize..197) {
        let traj = wander(c, 200);
        let whole = phase_kernel(&traj).unwrap().value;
        let a = phase_kernel(&traj.window(0, split + 1, PathOptions::default()).unwrap()).unwrap().value;
        let b = phase_kernel(&traj.window(split, 200, PathOptions::default()).unwrap()).unwrap().value;
        prop_assert!((a + b - whole).abs() < 1e-12 * whole.abs().max(1.0));
    }

    #[test]
    fn reversal_negates_kernel(c in coefs()) {
        let traj = wander(c, 150);
        let end = traj.end_time();
        let rev: Vec<_> = traj
            .samples()
            .iter()
            .rev()
            .map(|s| AngularSample { t: end - s.t, ..*s })
            .collect();
        let rev = AngularTrajectory::from_samples(rev, PathOptions::default()).unwrap();
        let (k, kr) = (phase_kernel(&traj).unwrap().value, phase_kernel(&rev).unwrap().value);
        prop_assert!((k + kr).abs() < 1e-12 * k.abs().max(1.0));
    }

    #[test]
    fn monotone_time_maps_leave_kernel_unchanged(c in coefs(), warp in 0.0..0.15f64, stretch in 0.01..100.0f64) {
        let traj = wander(c, 120);
        let base = phase_kernel(&traj).unwrap().value;
        let map: Vec<_> = traj
            .times()
            .iter()
            .map(|&t| (t, stretch * (t + warp * (1.3 * t).sin())))
            .collect();
        let k = phase_kernel(&reparameterize(&traj, &map).unwrap()).unwrap().value;
        prop_assert!((k - base).abs() < 1e-9);
    }

    #[test]
    fn helix_scale_invariance(theta in 0.05..1.5f64, s in 1e-3..1e3f64, turns in 0.3..3.0f64) {
        let spec = HelixSpec::with_tilt(1.0, theta, turns, 64);
        let big = HelixSpec { radius: spec.radius * s, pitch_per_turn: spec.pitch_per_turn * s, ..spec };
        let k = phase_kernel(&helix_to_trajectory(&spec, turns).unwrap()).unwrap().value;
        let kb = phase_kernel(&helix_to_trajectory(&big, turns).unwrap()).unwrap().value;
        prop_assert!((k - kb).abs() < 1e-9);
    }

    #[test]
    fn helicity_exchange_negates_phases(c in coefs(), n_r in 0i64..8, n_l in 0i64..8) {
        let kernel = phase_kernel(&wander(c, 80)).unwrap();
        let a = mode_resolved_phases(kernel, n_r, n_l).unwrap();
        let b = mode_resolved_phases(kernel, n_l, n_r).unwrap();
        prop_assert_eq!(a.multiphoton_phase, -b.multiphoton_phase);
        prop_assert_eq!(a.mode(Helicity::Right).phase_total, -b.mode(Helicity::Left).phase_total);
        prop_assert_eq!(a.vacuum_sum, 0.0);
    }

    #[test]
    fn fock_route_matches_closed_form(c in coefs(), n_r in 0usize..5, n_l in 0usize..5) {
        let kernel = phase_kernel(&wander(c, 80)).unwrap();
        let sys = build_fock_system(5).unwrap();
        let fock = phases_from_fock(&sys, ModeOccupation::new(n_r, n_l), kernel).unwrap();
        let closed = mode_resolved_phases(kernel, n_r as i64, n_l as i64).unwrap();
        for (f, c) in fock.per_mode.iter().zip(&closed.per_mode) {
            prop_assert!((f.phase_total - c.phase_total).abs() <= 1e-12 * c.phase_total.abs().max(kernel.value.abs()));
        }
        prop_assert_eq!(fock.vacuum_sum, 0.0);
    }
}

#[test]
fn negative_occupations_rejected() {
    let kernel = phase_kernel(&wander([1.0, 1.0, 1.0, 1.0], 20)).unwrap();
    assert!(mode_resolved_phases(kernel, -1, 0).is_err());
    assert!(mode_resolved_phases(kernel, 0, -2).is_err());
}
