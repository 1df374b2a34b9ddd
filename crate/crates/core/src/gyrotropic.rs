//! Circular-mode propagation in a gyrotropic medium.
//!
//! Permittivity and permeability have the form
//!
//! ```text
//!       ⎛ ε₁   iε₂  0  ⎞         ⎛ μ₁   iμ₂  0  ⎞
//!   ε = ⎜ −iε₂  ε₁  0  ⎟ ,   μ = ⎜ −iμ₂  μ₁  0  ⎟
//!       ⎝ 0     0   ε₃ ⎠         ⎝ 0     0   μ₃ ⎠
//! ```
//!
//! and a wave along the third axis sees `n±² = (ε₁ ± ε₂)(μ₁ ± μ₂)`, with `+`
//! for right- and `−` for left-handed light. A mode with `n² < 0` has an
//! imaginary propagation constant and its vacuum fluctuation is treated as
//! suppressed; so is a mode at cutoff (`n² = 0`).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::csv_bytes;
use crate::phase::{Helicity, PhaseKernel};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const DEFAULT_CUTOFF_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GyrotropicTensors {
    pub eps1: f64,
    pub eps2: f64,
    #[serde(default = "one")]
    pub eps3: f64,
    pub mu1: f64,
    pub mu2: f64,
    #[serde(default = "one")]
    pub mu3: f64,
}

fn one() -> f64 {
    1.0
}

impl GyrotropicTensors {
    /// In-plane components only; the axial ones default to 1 and do not enter on-axis dispersion.
    pub fn planar(eps1: f64, eps2: f64, mu1: f64, mu2: f64) -> Self {
        GyrotropicTensors {
            eps1,
            eps2,
            eps3: 1.0,
            mu1,
            mu2,
            mu3: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.eps1, self.eps2, self.eps3, self.mu1, self.mu2, self.mu3];
        if all.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::config("tensor components must be finite"))
        }
    }

    /// Full 3×3 permittivity tensor.
    pub fn permittivity(&self) -> [[Complex64; 3]; 3] {
        gyro_tensor(self.eps1, self.eps2, self.eps3)
    }

    pub fn permeability(&self) -> [[Complex64; 3]; 3] {
        gyro_tensor(self.mu1, self.mu2, self.mu3)
    }

    /// `|ε₂| > |ε₁| = −ε₁` and `μ₁ ± μ₂ > 0`: exactly one circular mode propagates.
    pub fn in_single_mode_regime(&self) -> bool {
        self.eps1 <= 0.0
            && self.eps2.abs() > self.eps1.abs()
            && self.mu1 + self.mu2 > 0.0
            && self.mu1 - self.mu2 > 0.0
    }
}

fn gyro_tensor(d: f64, off: f64, axial: f64) -> [[Complex64; 3]; 3] {
    let z = Complex64::new(0.0, 0.0);
    [
        [Complex64::new(d, 0.0), Complex64::new(0.0, off), z],
        [Complex64::new(0.0, -off), Complex64::new(d, 0.0), z],
        [z, z, Complex64::new(axial, 0.0)],
    ]
}

/// `(n₊², n₋²)`.
pub fn refractive_indices(t: &GyrotropicTensors) -> (f64, f64) {
    (
        (t.eps1 + t.eps2) * (t.mu1 + t.mu2),
        (t.eps1 - t.eps2) * (t.mu1 - t.mu2),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Propagating,
    Evanescent,
    Cutoff,
}

impl Verdict {
    pub fn propagates(self) -> bool {
        self == Verdict::Propagating
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Propagating => "Propagating",
            Verdict::Evanescent => "Evanescent",
            Verdict::Cutoff => "Cutoff",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeVerdict {
    pub sigma: Helicity,
    pub n_squared: f64,
    /// Propagation constant `n ω / c` (rad/m), principal square root.
    pub k_prop: [f64; 2],
    pub verdict: Verdict,
}

impl ModeVerdict {
    pub fn k(&self) -> Complex64 {
        Complex64::new(self.k_prop[0], self.k_prop[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeClassification {
    pub omega: f64,
    pub right: ModeVerdict,
    pub left: ModeVerdict,
}

impl ModeClassification {
    pub fn mode(&self, sigma: Helicity) -> &ModeVerdict {
        match sigma {
            Helicity::Right => &self.right,
            Helicity::Left => &self.left,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("classification encoding: {e}")))
    }
}

pub fn verdict_for(n_squared: f64, cutoff_eps: f64) -> Verdict {
    if n_squared > cutoff_eps {
        Verdict::Propagating
    } else if n_squared < -cutoff_eps {
        Verdict::Evanescent
    } else {
        Verdict::Cutoff
    }
}

pub fn classify(t: &GyrotropicTensors, omega: f64) -> Result<ModeClassification> {
    classify_with(t, omega, DEFAULT_CUTOFF_EPS)
}

pub fn classify_with(t: &GyrotropicTensors, omega: f64, cutoff_eps: f64) -> Result<ModeClassification> {
    t.validate()?;
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::config(format!("omega must be positive, got {omega}")));
    }
    if cutoff_eps.is_nan() || cutoff_eps < 0.0 {
        return Err(Error::config("cutoff threshold must be nonnegative"));
    }
    let (np, nm) = refractive_indices(t);
    let mode = |sigma, n2: f64| {
        let verdict = verdict_for(n2, cutoff_eps);
        let k = match verdict {
            Verdict::Propagating => Complex64::new(n2.sqrt(), 0.0),
            Verdict::Evanescent => Complex64::new(0.0, (-n2).sqrt()),
            Verdict::Cutoff => Complex64::new(n2, 0.0).sqrt(),
        } * (omega / SPEED_OF_LIGHT);
        ModeVerdict {
            sigma,
            n_squared: n2,
            k_prop: [k.re, k.im],
            verdict,
        }
    };
    Ok(ModeClassification {
        omega,
        right: mode(Helicity::Right, np),
        left: mode(Helicity::Left, nm),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilteredMode {
    pub sigma: Helicity,
    pub verdict: Verdict,
    /// Vacuum phase before filtering, `±kernel/2`.
    pub vacuum_phase: f64,
    /// Contribution kept after filtering.
    pub observed: f64,
    /// `c / (ω |Im n|)` for evanescent modes.
    pub attenuation_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredVacuumReport {
    pub kernel: PhaseKernel,
    pub classification: ModeClassification,
    pub modes: Vec<FilteredMode>,
    pub net_vacuum_phase: f64,
    pub no_observable_signal: bool,
}

impl FilteredVacuumReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("media report encoding: {e}")))
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        csv_bytes(
            &["sigma", "verdict", "n_squared", "vacuum", "observed"],
            self.modes.iter().map(|m| {
                [
                    i8::from(m.sigma).to_string(),
                    m.verdict.as_str().to_string(),
                    self.classification.mode(m.sigma).n_squared.to_string(),
                    m.vacuum_phase.to_string(),
                    m.observed.to_string(),
                ]
            }),
        )
    }
}

/// Vacuum geometric phase left over after the medium suppresses non-propagating modes.
pub fn surviving_vacuum_phase(
    t: &GyrotropicTensors,
    omega: f64,
    kernel: PhaseKernel,
) -> Result<FilteredVacuumReport> {
    surviving_vacuum_phase_with(t, omega, kernel, DEFAULT_CUTOFF_EPS)
}

pub fn surviving_vacuum_phase_with(
    t: &GyrotropicTensors,
    omega: f64,
    kernel: PhaseKernel,
    cutoff_eps: f64,
) -> Result<FilteredVacuumReport> {
    let classification = classify_with(t, omega, cutoff_eps)?;
    let half = 0.5 * kernel.value;
    let modes: Vec<FilteredMode> = [(Helicity::Right, half), (Helicity::Left, -half)]
        .into_iter()
        .map(|(sigma, vacuum_phase)| {
            let m = classification.mode(sigma);
            let attenuation_length = (m.verdict == Verdict::Evanescent)
                .then(|| SPEED_OF_LIGHT / (omega * (-m.n_squared).sqrt()));
            FilteredMode {
                sigma,
                verdict: m.verdict,
                vacuum_phase,
                observed: if m.verdict.propagates() { vacuum_phase } else { 0.0 },
                attenuation_length,
            }
        })
        .collect();
    let net_vacuum_phase = modes.iter().map(|m| m.observed).sum();
    let no_observable_signal = !modes.iter().any(|m| m.verdict.propagates());
    Ok(FilteredVacuumReport {
        kernel,
        classification,
        modes,
        net_vacuum_phase,
        no_observable_signal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub eps1: (f64, f64, usize),
    pub eps2: (f64, f64, usize),
    pub mu1: f64,
    pub mu2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub tensors: GyrotropicTensors,
    pub n_plus_sq: f64,
    pub n_minus_sq: f64,
    pub verdict_r: Verdict,
    pub verdict_l: Verdict,
}

fn linspace((a, b, n): (f64, f64, usize)) -> Vec<f64> {
    match n {
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Verdict pairs over an `ε₁ × ε₂` grid at fixed `μ₁, μ₂`.
pub fn regime_sweep(grid: &SweepGrid, cutoff_eps: f64) -> Result<Vec<SweepCell>> {
    if grid.eps1.2 == 0 || grid.eps2.2 == 0 {
        return Err(Error::config("sweep grid is empty"));
    }
    let vals = [grid.eps1.0, grid.eps1.1, grid.eps2.0, grid.eps2.1, grid.mu1, grid.mu2];
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("sweep bounds must be finite"));
    }
    let mut cells = Vec::with_capacity(grid.eps1.2 * grid.eps2.2);
    for e1 in linspace(grid.eps1) {
        for e2 in linspace(grid.eps2) {
            let tensors = GyrotropicTensors::planar(e1, e2, grid.mu1, grid.mu2);
            let (np, nm) = refractive_indices(&tensors);
            cells.push(SweepCell {
                tensors,
                n_plus_sq: np,
                n_minus_sq: nm,
                verdict_r: verdict_for(np, cutoff_eps),
                verdict_l: verdict_for(nm, cutoff_eps),
            });
        }
    }
    Ok(cells)
}

/// CSV `eps1,eps2,mu1,mu2,n_plus_sq,n_minus_sq,verdict_R,verdict_L`.
pub fn sweep_csv(cells: &[SweepCell]) -> Result<Vec<u8>> {
    csv_bytes(
        &["eps1", "eps2", "mu1", "mu2", "n_plus_sq", "n_minus_sq", "verdict_R", "verdict_L"],
        cells.iter().map(|c| {
            [
                c.tensors.eps1.to_string(),
                c.tensors.eps2.to_string(),
                c.tensors.mu1.to_string(),
                c.tensors.mu2.to_string(),
                c.n_plus_sq.to_string(),
                c.n_minus_sq.to_string(),
                c.verdict_r.as_str().to_string(),
                c.verdict_l.as_str().to_string(),
            ]
        }),
    )
}
