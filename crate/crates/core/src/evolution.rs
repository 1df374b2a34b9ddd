//! Spin-1 evolution of a photon's polarization along the fiber.
//!
//! The state obeys `i ∂ψ/∂t = H(t) ψ` with `H(t) = (k̂ × k̂̇) · S`. Helicity
//! `k̂ · S` is conserved, and the closed-form solution is
//! `ψ(t) = e^{−iφ_g(t)} V(t) |σ⟩` with `V = exp(β S₊ − β* S₋)`,
//! `β = −(θ/2) e^{−iφ}` and `φ_g = σ ∫ φ̇ (1 − cos θ) dt`.
//!
//! All phases in this module are reported in the `e^{−iφ}` convention of that
//! solution: a state that picks up `e^{−iφ}` has phase `+φ`. The residual
//! check in [`analytic_residual`] is what pins this sign down; with the
//! opposite sign the residual does not vanish.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{derivative_weights, unwrap_near, AngularTrajectory, Vec3};
use crate::io::csv_bytes;
use crate::phase::{cumulative_kernel, Helicity};

pub type Matrix3c = Matrix3<Complex64>;
pub type Vector3c = Vector3<Complex64>;

/// Default target for the accumulated integrator error (radians of phase).
pub const DEFAULT_STEP_TOLERANCE: f64 = 1e-9;
/// Hard cap on integrator steps per run.
pub const MAX_STEPS: usize = 20_000_000;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Spin-1 matrices in the helicity basis ordered `(+1, 0, −1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinMatrices {
    pub s1: Matrix3c,
    pub s2: Matrix3c,
    pub s3: Matrix3c,
    pub s_plus: Matrix3c,
    pub s_minus: Matrix3c,
}

impl Default for SpinMatrices {
    fn default() -> Self {
        Self::new()
    }
}

impl SpinMatrices {
    pub fn new() -> Self {
        let r = Complex64::new(SQRT_2, 0.0);
        #[rustfmt::skip]
        let s_plus = Matrix3c::new(
            ZERO, r, ZERO,
            ZERO, ZERO, r,
            ZERO, ZERO, ZERO,
        );
        let s_minus = s_plus.adjoint();
        let s1 = (s_plus + s_minus) * Complex64::new(0.5, 0.0);
        let s2 = (s_plus - s_minus) * Complex64::new(0.0, -0.5);
        let s3 = Matrix3c::from_diagonal(&Vector3c::new(ONE, ZERO, -ONE));
        SpinMatrices {
            s1,
            s2,
            s3,
            s_plus,
            s_minus,
        }
    }

    /// `v · S`.
    pub fn along(&self, v: Vec3) -> Matrix3c {
        self.s1 * Complex64::new(v.x, 0.0)
            + self.s2 * Complex64::new(v.y, 0.0)
            + self.s3 * Complex64::new(v.z, 0.0)
    }

    /// Basis vector `|m⟩` for `m ∈ {+1, 0, −1}`.
    pub fn basis(m: i8) -> Vector3c {
        let mut v = Vector3c::zeros();
        v[(1 - m) as usize] = ONE;
        v
    }

    /// `V(θ, φ) = exp(β S₊ − β* S₋)` with `β = −(θ/2) e^{−iφ}`.
    pub fn rotation(&self, theta: f64, phi: f64) -> Matrix3c {
        let beta = Complex64::from_polar(-0.5 * theta, -phi);
        exp_spin1_generator(&(self.s_plus * beta - self.s_minus * beta.conj()))
    }
}

/// Exponential of an anti-Hermitian spin-1 rotation generator `G = −i α n·S`.
///
/// Such generators satisfy `G³ = −α² G`, so
/// `exp(G) = 1 + (sin α / α) G + ((1 − cos α) / α²) G²` with `α² = −tr(G²)/2`.
pub fn exp_spin1_generator(g: &Matrix3c) -> Matrix3c {
    let g2 = g * g;
    let alpha2 = (-0.5 * g2.trace().re).max(0.0);
    let (a, b) = if alpha2 < 1e-8 {
        (1.0 - alpha2 / 6.0 + alpha2 * alpha2 / 120.0, 0.5 - alpha2 / 24.0 + alpha2 * alpha2 / 720.0)
    } else {
        let alpha = alpha2.sqrt();
        (alpha.sin() / alpha, (1.0 - alpha.cos()) / alpha2)
    };
    Matrix3c::identity() + g * Complex64::new(a, 0.0) + g2 * Complex64::new(b, 0.0)
}

/// `k̂ × k̂̇` from angles and their rates: `θ̇ e_φ − φ̇ sin θ e_θ`.
pub fn angular_velocity(theta: f64, phi: f64, theta_dot: f64, phi_dot: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let e_theta = Vec3::new(ct * cp, ct * sp, -st);
    let e_phi = Vec3::new(-sp, cp, 0.0);
    e_phi * theta_dot - e_theta * (phi_dot * st)
}

/// Effective Hamiltonian `(k̂ × k̂̇) · S` at time `t`.
pub fn h_eff(traj: &AngularTrajectory, t: f64, spin: &SpinMatrices) -> Result<Matrix3c> {
    let (theta, phi) = traj.angles_at(t)?;
    let (theta_dot, phi_dot) = traj.rates_at(t)?;
    Ok(spin.along(angular_velocity(theta, phi, theta_dot, phi_dot)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonState {
    pub amplitudes: Vector3c,
}

impl PhotonState {
    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }
}

impl Serialize for PhotonState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.amplitudes.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }
}

/// Unit eigenvector of `k̂ · S` with eigenvalue `σ`, in the gauge `V(θ, φ)|σ⟩`.
pub fn helicity_eigenstate(theta: f64, phi: f64, sigma: Helicity, spin: &SpinMatrices) -> PhotonState {
    PhotonState {
        amplitudes: spin.rotation(theta, phi) * SpinMatrices::basis(sigma.sign() as i8),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub amplitudes: [[f64; 2]; 3],
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionResult {
    pub sigma: Helicity,
    pub final_state: PhotonState,
    /// Accumulated phase relative to the instantaneous eigenstate `V(t)|σ⟩`,
    /// tracked continuously (not reduced mod 2π). For closed paths it agrees
    /// with `−arg⟨ψ(0)|ψ(T)⟩` modulo 2π.
    pub total_phase: f64,
    /// `∫ ⟨ψ|H|ψ⟩ dt`.
    pub dynamical_phase: f64,
    /// `total_phase − dynamical_phase`.
    pub geometric_phase_numeric: f64,
    /// `−arg⟨ψ(0)|ψ(T)⟩`; absent when the overlap vanishes.
    pub pancharatnam_phase: Option<f64>,
    /// The trajectory does not return to its starting direction.
    pub noncyclic: bool,
    /// Largest departure `sqrt(1 − |⟨V(t)σ|ψ(t)⟩|²)` from the instantaneous eigenstate.
    pub max_residual: f64,
    /// Largest `|⟨ψ| k̂·S |ψ⟩ − σ|`.
    pub max_helicity_error: f64,
    /// Largest amplitude on the zero-helicity state.
    pub max_longitudinal: f64,
    pub norm_drift: f64,
    pub steps: usize,
    #[serde(skip)]
    pub trace: Option<Vec<TraceRow>>,
}

impl EvolutionResult {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("evolution encoding: {e}")))
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        csv_bytes(
            &["sigma", "total", "dynamical", "geometric", "max_residual", "norm_drift"],
            [[
                i8::from(self.sigma).to_string(),
                self.total_phase.to_string(),
                self.dynamical_phase.to_string(),
                self.geometric_phase_numeric.to_string(),
                self.max_residual.to_string(),
                self.norm_drift.to_string(),
            ]],
        )
    }

    pub fn trace_csv(&self) -> Result<Option<Vec<u8>>> {
        let Some(trace) = &self.trace else {
            return Ok(None);
        };
        let header = ["t", "re_p", "im_p", "re_0", "im_0", "re_m", "im_m", "energy"];
        let rows = trace.iter().map(|r| {
            let mut row = vec![r.t.to_string()];
            for a in r.amplitudes {
                row.push(a[0].to_string());
                row.push(a[1].to_string());
            }
            row.push(r.energy.to_string());
            row
        });
        csv_bytes(&header, rows).map(Some)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Target bound on the accumulated midpoint-rule error.
    pub step_tolerance: f64,
    pub record_trace: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            step_tolerance: DEFAULT_STEP_TOLERANCE,
            record_trace: false,
        }
    }
}

fn expect_real(psi: &Vector3c, m: &Matrix3c) -> f64 {
    psi.dotc(&(m * psi)).re
}

struct Frame {
    eigen: Vector3c,
    longitudinal: Vector3c,
    helicity_op: Matrix3c,
}

fn frame(spin: &SpinMatrices, theta: f64, phi: f64, sigma: Helicity) -> Frame {
    let v = spin.rotation(theta, phi);
    Frame {
        eigen: v * SpinMatrices::basis(sigma.sign() as i8),
        longitudinal: v * SpinMatrices::basis(0),
        helicity_op: spin.along(Vec3::from_angles(theta, phi)),
    }
}

/// Integrates the polarization along `traj` starting from the helicity-`σ` eigenstate.
///
/// Each step applies `exp(−i H(t_mid) Δt)`, which is exactly unitary. Steps
/// never straddle trajectory samples, and their size is chosen so the
/// accumulated second-order error stays below `step_tolerance`.
pub fn evolve(traj: &AngularTrajectory, sigma: Helicity, opts: EvolveOptions) -> Result<EvolutionResult> {
    if traj.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: traj.len(),
        });
    }
    if !(opts.step_tolerance.is_finite() && opts.step_tolerance > 0.0) {
        return Err(Error::config("step tolerance must be positive"));
    }
    let spin = SpinMatrices::new();
    let samples = traj.samples();
    let nseg = samples.len() - 1;
    let seg_rates: Vec<(f64, f64)> = match traj.motion() {
        Some(m) => vec![(0.0, m.rate); nseg],
        None => (0..nseg).map(|i| traj.segment_rates(i)).collect(),
    };

    // Step size from the error model Δt² · T · |ω|² · max(|ω|, rate) / 12 ≤ tol.
    let mut omega_max = 0.0f64;
    let mut rate_max = 0.0f64;
    for (i, &(td, pd)) in seg_rates.iter().enumerate() {
        let st = samples[i].theta.sin().max(samples[i + 1].theta.sin());
        omega_max = omega_max.max(td.hypot(pd * st));
        rate_max = rate_max.max(td.abs().max(pd.abs()));
    }
    let span = traj.end_time() - traj.start_time();
    let stiffness = omega_max * omega_max * omega_max.max(rate_max);
    let dt_max = if stiffness > 0.0 {
        (12.0 * opts.step_tolerance / (stiffness * span)).sqrt()
    } else {
        f64::INFINITY
    };
    let substeps: Vec<usize> = samples
        .windows(2)
        .map(|w| ((w[1].t - w[0].t) / dt_max).ceil().max(1.0) as usize)
        .collect();
    let total_steps: usize = substeps.iter().sum();
    if total_steps > MAX_STEPS {
        return Err(Error::Integration(format!(
            "step underflow: {total_steps} steps needed (limit {MAX_STEPS}); loosen the step tolerance"
        )));
    }

    let angles = |i: usize, t: f64| -> (f64, f64) {
        let (a, b) = (&samples[i], &samples[i + 1]);
        match traj.motion() {
            Some(m) => (m.theta, samples[0].phi + m.rate * (t - samples[0].t)),
            None => {
                let w = (t - a.t) / (b.t - a.t);
                (a.theta + w * (b.theta - a.theta), a.phi + w * (b.phi - a.phi))
            }
        }
    };
    let hamiltonian = |i: usize, t: f64| -> Matrix3c {
        let (theta, phi) = angles(i, t);
        let (td, pd) = seg_rates[i];
        spin.along(angular_velocity(theta, phi, td, pd))
    };

    let f0 = frame(&spin, samples[0].theta, samples[0].phi, sigma);
    let psi0 = f0.eigen;
    let mut psi = psi0;
    let mut lifted = 0.0f64;
    let mut last_arg = 0.0f64;
    let mut dynamical = 0.0;
    let mut max_residual = 0.0f64;
    let mut max_helicity_error = 0.0f64;
    let mut max_longitudinal = 0.0f64;
    let mut norm_drift = 0.0f64;
    let mut trace = opts.record_trace.then(Vec::new);
    if let Some(tr) = trace.as_mut() {
        tr.push(trace_row(samples[0].t, &psi, expect_real(&psi, &hamiltonian(0, samples[0].t))));
    }

    for i in 0..nseg {
        let (ta, tb) = (samples[i].t, samples[i + 1].t);
        let m = substeps[i];
        let dt = (tb - ta) / m as f64;
        if dt.is_nan() || dt <= 0.0 || dt < f64::EPSILON * ta.abs().max(tb.abs()) * 4.0 {
            return Err(Error::Integration(format!("step underflow in segment {i}")));
        }
        for k in 0..m {
            let t0 = ta + dt * k as f64;
            let t1 = if k + 1 == m { tb } else { ta + dt * (k + 1) as f64 };
            let e0 = expect_real(&psi, &hamiltonian(i, t0));
            let h_mid = hamiltonian(i, 0.5 * (t0 + t1));
            let u = exp_spin1_generator(&(h_mid * Complex64::new(0.0, -(t1 - t0))));
            psi = u * psi;
            let e1 = expect_real(&psi, &hamiltonian(i, t1));
            dynamical += 0.5 * (e0 + e1) * (t1 - t0);

            let (theta, phi) = angles(i, t1);
            let f = frame(&spin, theta, phi, sigma);
            let overlap = f.eigen.dotc(&psi);
            let arg = unwrap_near(overlap.arg(), last_arg);
            lifted += arg - last_arg;
            last_arg = arg;
            let norm = psi.norm();
            norm_drift = norm_drift.max((norm - 1.0).abs());
            max_residual = max_residual.max((1.0 - overlap.norm_sqr() / (norm * norm)).max(0.0).sqrt());
            max_longitudinal = max_longitudinal.max(f.longitudinal.dotc(&psi).norm());
            max_helicity_error =
                max_helicity_error.max((expect_real(&psi, &f.helicity_op) - sigma.sign()).abs());
            if let Some(tr) = trace.as_mut() {
                tr.push(trace_row(t1, &psi, e1));
            }
        }
    }

    let total_phase = -lifted;
    let overlap = psi0.dotc(&psi);
    Ok(EvolutionResult {
        sigma,
        final_state: PhotonState { amplitudes: psi },
        total_phase,
        dynamical_phase: dynamical,
        geometric_phase_numeric: total_phase - dynamical,
        pancharatnam_phase: (overlap.norm() > 1e-8).then(|| -overlap.arg()),
        noncyclic: !traj.is_closed(),
        max_residual,
        max_helicity_error,
        max_longitudinal,
        norm_drift,
        steps: total_steps,
        trace,
    })
}

fn trace_row(t: f64, psi: &Vector3c, energy: f64) -> TraceRow {
    TraceRow {
        t,
        amplitudes: [0, 1, 2].map(|j| [psi[j].re, psi[j].im]),
        energy,
    }
}

/// Sign of the geometric phase factor in the trial solution `e^{∓iφ_g} V(t)|σ⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseSign {
    /// `e^{−iφ_g}`, i.e. `exp[(1/i) φ_g]`.
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `max_t ‖i ∂ψ/∂t − H ψ‖` over interior samples.
    pub max_residual: f64,
    /// Same quantity on every other sample.
    pub coarse_residual: Option<f64>,
    /// `log₂(coarse / fine)`; close to 2 when differencing error dominates.
    pub observed_order: Option<f64>,
    /// Fewer than 64 samples per 2π of azimuth.
    pub coarse_grid: bool,
}

/// Residual of the closed-form solution, using the established sign convention.
pub fn analytic_residual(traj: &AngularTrajectory, sigma: Helicity) -> Result<ResidualReport> {
    analytic_residual_with(traj, sigma, PhaseSign::Minus)
}

/// Residual of the trial solution `e^{∓iφ_g(t)} V(t)|σ⟩` on the sample grid.
pub fn analytic_residual_with(
    traj: &AngularTrajectory,
    sigma: Helicity,
    sign: PhaseSign,
) -> Result<ResidualReport> {
    if traj.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: traj.len(),
        });
    }
    let spin = SpinMatrices::new();
    let max_residual = residual_on(traj, sigma, sign, 1, &spin);
    let coarse_residual = (traj.len() >= 5).then(|| residual_on(traj, sigma, sign, 2, &spin));
    let observed_order = coarse_residual
        .filter(|&c| c > 0.0 && max_residual > 0.0)
        .map(|c| (c / max_residual).log2());
    let s = traj.samples();
    let sweep = (s[s.len() - 1].phi - s[0].phi).abs();
    let per_turn = (s.len() - 1) as f64 * 2.0 * PI / sweep.max(f64::MIN_POSITIVE);
    Ok(ResidualReport {
        max_residual,
        coarse_residual,
        observed_order,
        coarse_grid: sweep > 0.0 && per_turn < 64.0,
    })
}

fn residual_on(
    traj: &AngularTrajectory,
    sigma: Helicity,
    sign: PhaseSign,
    stride: usize,
    spin: &SpinMatrices,
) -> f64 {
    let picked: Vec<_> = traj.samples().iter().step_by(stride).copied().collect();
    let n = picked.len();
    let kernel: Vec<f64> = match traj.motion() {
        Some(m) => picked
            .iter()
            .map(|s| m.rate * (1.0 - m.theta.cos()) * (s.t - picked[0].t))
            .collect(),
        None => {
            let sub = AngularTrajectory::from_samples(picked.clone(), Default::default())
                .expect("subsample of a valid trajectory");
            cumulative_kernel(&sub)
        }
    };
    let factor = match sign {
        PhaseSign::Minus => -1.0,
        PhaseSign::Plus => 1.0,
    };
    let e_sigma = SpinMatrices::basis(sigma.sign() as i8);
    let psi: Vec<Vector3c> = picked
        .iter()
        .zip(&kernel)
        .map(|(s, &k)| {
            let phase = Complex64::from_polar(1.0, factor * sigma.sign() * k);
            spin.rotation(s.theta, s.phi) * e_sigma * phase
        })
        .collect();
    let mut worst = 0.0f64;
    for i in 1..n - 1 {
        let ts = [picked[i - 1].t, picked[i].t, picked[i + 1].t];
        let w = derivative_weights(ts[1], &ts);
        let dpsi = psi[i - 1] * Complex64::new(w[0], 0.0)
            + psi[i] * Complex64::new(w[1], 0.0)
            + psi[i + 1] * Complex64::new(w[2], 0.0);
        let (td, pd) = match traj.motion() {
            Some(m) => (0.0, m.rate),
            None => {
                let mut r = (0.0, 0.0);
                for (j, wj) in w.iter().enumerate() {
                    r.0 += wj * picked[i - 1 + j].theta;
                    r.1 += wj * picked[i - 1 + j].phi;
                }
                r
            }
        };
        let h = spin.along(angular_velocity(picked[i].theta, picked[i].phi, td, pd));
        let r = dpsi * I - h * psi[i];
        worst = worst.max(r.norm());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{helix_to_trajectory, AngularSample, HelixSpec, PathOptions};
    use crate::phase::{phase_kernel, solid_angle_of_cone};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    /// Scaling-and-squaring Taylor exponential, independent of the closed form.
    fn expm_taylor(a: &Matrix3c) -> Matrix3c {
        let norm: f64 = a.iter().map(|z| z.norm()).sum();
        let squarings = norm.log2().ceil().max(0.0) as i32 + 4;
        let scaled = a * Complex64::new(0.5f64.powi(squarings), 0.0);
        let mut term = Matrix3c::identity();
        let mut sum = Matrix3c::identity();
        for k in 1..30 {
            term = term * scaled * Complex64::new(1.0 / k as f64, 0.0);
            sum += term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    fn max_abs(m: &Matrix3c) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn coil(theta: f64, cycles: f64, spt: usize) -> AngularTrajectory {
        helix_to_trajectory(&HelixSpec::with_tilt(1.0, theta, cycles, spt), cycles).unwrap()
    }

    #[test]
    fn spin_algebra() {
        let s = SpinMatrices::new();
        let comm = |a: &Matrix3c, b: &Matrix3c| a * b - b * a;
        assert!(max_abs(&(comm(&s.s1, &s.s2) - s.s3 * I)) < 1e-14);
        assert!(max_abs(&(comm(&s.s2, &s.s3) - s.s1 * I)) < 1e-14);
        assert!(max_abs(&(comm(&s.s3, &s.s1) - s.s2 * I)) < 1e-14);
        for m in [&s.s1, &s.s2, &s.s3] {
            assert!(max_abs(&(m - m.adjoint())) < 1e-15);
        }
    }

    #[test]
    fn closed_form_exponential_matches_taylor() {
        let s = SpinMatrices::new();
        for (theta, phi) in [(0.0, 0.0), (1e-6, 0.3), (0.7, 1.9), (2.9, -2.0), (PI, 0.5)] {
            let beta = Complex64::from_polar(-0.5 * theta, -phi);
            let g = s.s_plus * beta - s.s_minus * beta.conj();
            assert!(max_abs(&(exp_spin1_generator(&g) - expm_taylor(&g))) < 1e-13);
        }
        let g = s.along(Vec3::new(0.3, -1.2, 2.0)) * Complex64::new(0.0, -0.8);
        assert!(max_abs(&(exp_spin1_generator(&g) - expm_taylor(&g))) < 1e-13);
    }

    #[test]
    fn eigenstates() {
        let s = SpinMatrices::new();
        let up = helicity_eigenstate(0.0, 0.0, Helicity::Right, &s);
        assert_eq!(up.amplitudes, SpinMatrices::basis(1));

        let flipped = helicity_eigenstate(PI, 0.0, Helicity::Right, &s);
        assert!((flipped.amplitudes[2].norm() - 1.0).abs() < 1e-12);

        let side = helicity_eigenstate(FRAC_PI_2, 0.0, Helicity::Right, &s);
        let r = s.s1 * side.amplitudes - side.amplitudes;
        assert!(r.norm() < 1e-12);

        for (theta, phi) in [(0.4, 1.0), (2.0, -0.5)] {
            for sigma in [Helicity::Right, Helicity::Left] {
                let v = helicity_eigenstate(theta, phi, sigma, &s).amplitudes;
                let k = s.along(Vec3::from_angles(theta, phi));
                assert!((k * v - v * Complex64::new(sigma.sign(), 0.0)).norm() < 1e-12);
                assert!((v.norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn angular_velocity_matches_finite_difference() {
        let (theta, phi, td, pd) = (0.8, 0.3, 0.2, 1.1);
        let h = 1e-6;
        let k = |t: f64| Vec3::from_angles(theta + td * t, phi + pd * t);
        let kdot = (k(h) - k(-h)) * (0.5 / h);
        let fd = k(0.0).cross(kdot);
        let w = angular_velocity(theta, phi, td, pd);
        assert!((fd - w).norm() < 1e-9);
    }

    #[test]
    fn straight_fiber_hamiltonian_vanishes() {
        let samples = (0..5)
            .map(|i| AngularSample { t: i as f64, theta: 0.0, phi: 0.0 })
            .collect();
        let traj = AngularTrajectory::from_samples(samples, PathOptions::default()).unwrap();
        let h = h_eff(&traj, 1.5, &SpinMatrices::new()).unwrap();
        assert_eq!(max_abs(&h), 0.0);
        let r = evolve(&traj, Helicity::Right, EvolveOptions::default()).unwrap();
        assert_eq!(r.total_phase, 0.0);
        assert_eq!(r.geometric_phase_numeric, 0.0);
        let res = analytic_residual(&traj, Helicity::Right).unwrap();
        assert_eq!(res.max_residual, 0.0);
    }

    #[test]
    fn equatorial_hamiltonian_has_rate_magnitude() {
        let traj = coil(FRAC_PI_2, 1.0, 64);
        let rate = traj.motion().unwrap().rate;
        let s = SpinMatrices::new();
        let h = h_eff(&traj, 0.0, &s).unwrap();
        // k̂ × k̂̇ = rate · ẑ at θ = π/2
        assert!(max_abs(&(h - s.s3 * Complex64::new(rate, 0.0))) < 1e-14);
    }

    #[test]
    fn time_outside_trajectory_rejected() {
        let traj = coil(FRAC_PI_3, 1.0, 64);
        assert!(matches!(
            h_eff(&traj, traj.end_time() * 2.0, &SpinMatrices::new()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn cyclic_phase_at_sixty_degrees() {
        let traj = coil(FRAC_PI_3, 1.0, 256);
        let plus = evolve(&traj, Helicity::Right, EvolveOptions::default()).unwrap();
        let minus = evolve(&traj, Helicity::Left, EvolveOptions::default()).unwrap();
        assert!((plus.geometric_phase_numeric - PI).abs() < 1e-6, "{}", plus.geometric_phase_numeric);
        assert!((plus.geometric_phase_numeric + minus.geometric_phase_numeric).abs() < 1e-9);
        assert!(plus.norm_drift < 1e-9);
        assert!(plus.max_longitudinal < 1e-10);
        assert!(plus.max_helicity_error < 1e-8);
        assert!(plus.dynamical_phase.abs() < 1e-9);
        assert!(!plus.noncyclic);
        let p = plus.pancharatnam_phase.unwrap();
        assert!((p - plus.total_phase).rem_euclid(2.0 * PI).min((plus.total_phase - p).rem_euclid(2.0 * PI)) < 1e-6);
    }

    #[test]
    fn open_path_is_flagged() {
        let traj = coil(FRAC_PI_3, 0.5, 256);
        let r = evolve(&traj, Helicity::Right, EvolveOptions::default()).unwrap();
        assert!(r.noncyclic);
        let k = phase_kernel(&traj).unwrap().value;
        assert!((r.geometric_phase_numeric - k).abs() < 1e-6);
    }

    #[test]
    fn trace_is_recorded_on_request() {
        let traj = coil(FRAC_PI_3, 1.0, 32);
        let opts = EvolveOptions { step_tolerance: 1e-4, record_trace: true };
        let r = evolve(&traj, Helicity::Right, opts).unwrap();
        assert_eq!(r.trace.as_ref().unwrap().len(), r.steps + 1);
        let csv = String::from_utf8(r.trace_csv().unwrap().unwrap()).unwrap();
        assert!(csv.starts_with("t,re_p"));
    }

    #[test]
    fn impossible_tolerance_underflows() {
        let traj = coil(FRAC_PI_3, 1.0, 32);
        let opts = EvolveOptions { step_tolerance: 1e-30, record_trace: false };
        assert!(matches!(evolve(&traj, Helicity::Right, opts), Err(Error::Integration(_))));
    }

    #[test]
    fn residual_picks_one_sign() {
        let traj = coil(FRAC_PI_3, 1.0, 1024);
        let rate = traj.motion().unwrap().rate;
        let minus = analytic_residual_with(&traj, Helicity::Right, PhaseSign::Minus).unwrap();
        let plus = analytic_residual_with(&traj, Helicity::Right, PhaseSign::Plus).unwrap();
        assert!(minus.max_residual < 1e-4 * rate);
        assert!(plus.max_residual > 0.1 * rate);
        let order = minus.observed_order.unwrap();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn sampled_trajectory_residual_converges() {
        // a precessing path with varying θ, no closed form attached
        let build = |n: usize| {
            let samples = (0..=n)
                .map(|i| {
                    let t = 4.0 * i as f64 / n as f64;
                    AngularSample { t, theta: 0.9 + 0.3 * (1.3 * t).sin(), phi: 1.7 * t }
                })
                .collect();
            AngularTrajectory::from_samples(samples, PathOptions::default()).unwrap()
        };
        let r1 = analytic_residual(&build(400), Helicity::Left).unwrap().max_residual;
        let r2 = analytic_residual(&build(800), Helicity::Left).unwrap().max_residual;
        assert!(r2 < r1 / 3.0, "{r1} {r2}");
        let traj = build(800);
        let e = evolve(&traj, Helicity::Left, EvolveOptions::default()).unwrap();
        assert!(e.max_helicity_error < 1e-8);
        assert!(e.max_longitudinal < 1e-10);
    }

    #[test]
    fn helix_oracle_matches_kernel_for_two_turns() {
        let traj = coil(FRAC_PI_2, 2.0, 128);
        let r = evolve(&traj, Helicity::Right, EvolveOptions::default()).unwrap();
        assert!((r.geometric_phase_numeric - 2.0 * solid_angle_of_cone(FRAC_PI_2)).abs() < 1e-6);
    }
}
