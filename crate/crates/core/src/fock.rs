//! Two-mode truncated Fock space for right- and left-handed photons.
//!
//! Basis states `|n_R, n_L⟩` are ordered with `n_R` major and `n_L` minor,
//! i.e. index `n_R · (n_max + 1) + n_L`. Linear-polarization operators are
//! derived from the circular ones through
//! `a₁ = (a_R + a_L)/√2`, `a₂ = i (a_R − a_L)/√2`.
//!
//! Quadratic operators (the spin pieces and number operators) are formed in a
//! space padded by one extra level per mode and then projected back. The
//! bare ladder matrices still show the usual truncation artifact in
//! `[a, a†]` at the top level, but `a a†` is exact on every retained state.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{csv_bytes, write_atomic};
use crate::phase::{assemble_report, PhaseKernel, PhaseReport};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Largest accepted per-mode truncation; the dense dimension is `(n_max + 1)²`.
pub const MAX_N_MAX: usize = 16;

const IDENTITY_TOL: f64 = 1e-14;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeOccupation {
    pub n_r: usize,
    pub n_l: usize,
}

impl ModeOccupation {
    pub fn new(n_r: usize, n_l: usize) -> Self {
        ModeOccupation { n_r, n_l }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ordering {
    /// Symmetrized products as they arise from the field expansion, zero-point terms kept.
    Nonnormal,
    /// Creation operators to the left; zero-point terms removed.
    Normal,
}

#[derive(Debug, Clone)]
pub struct FockSystem {
    n_max: usize,
    pub a_r: CMatrix,
    pub a_r_dag: CMatrix,
    pub a_l: CMatrix,
    pub a_l_dag: CMatrix,
    pub a_1: CMatrix,
    pub a_1_dag: CMatrix,
    pub a_2: CMatrix,
    pub a_2_dag: CMatrix,
    pub number_r: CMatrix,
    pub number_l: CMatrix,
    /// Total S₃ from the linear-polarization expression.
    pub s3_linear: CMatrix,
    /// Total S₃ from the circular expression, zero-point terms kept.
    pub s3_nonnormal: CMatrix,
    pub s3_normal: CMatrix,
    s3_r_nonnormal: CMatrix,
    s3_l_nonnormal: CMatrix,
    s3_r_normal: CMatrix,
    s3_l_normal: CMatrix,
}

/// Single-mode annihilation operator on `levels` states.
fn annihilation(levels: usize) -> CMatrix {
    let mut a = CMatrix::zeros(levels, levels);
    for n in 1..levels {
        a[(n - 1, n)] = c((n as f64).sqrt());
    }
    a
}

/// Ladder operators `(a_R, a_L)` on the two-mode space with `levels` per mode.
fn circular_ladders(levels: usize) -> (CMatrix, CMatrix) {
    let a = annihilation(levels);
    let id = CMatrix::identity(levels, levels);
    (a.kronecker(&id), id.kronecker(&a))
}

/// `(a₁, a₂)` from the circular ladders.
fn linear_from_circular(a_r: &CMatrix, a_l: &CMatrix) -> (CMatrix, CMatrix) {
    let s = c(FRAC_1_SQRT_2);
    ((a_r + a_l) * s, (a_r - a_l) * (I * FRAC_1_SQRT_2))
}

fn dag(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// S₃ in the linear basis:
/// `(i/2)[a₁ a₂† − a₁† a₂ − a₂ a₁† + a₂† a₁]`.
fn s3_from_linear(a1: &CMatrix, a2: &CMatrix) -> CMatrix {
    let (a1d, a2d) = (dag(a1), dag(a2));
    (a1 * &a2d - &a1d * a2 - a2 * &a1d + &a2d * a1) * (I * 0.5)
}

/// `(a a† + a† a) / 2`.
fn symmetrized_number(a: &CMatrix) -> CMatrix {
    let ad = dag(a);
    (a * &ad + &ad * a) * c(0.5)
}

/// Projects a padded-space operator onto states with both occupations `≤ n_max`.
fn project(m: &CMatrix, n_max: usize) -> CMatrix {
    let padded = n_max + 2;
    let keep: Vec<usize> = (0..=n_max)
        .flat_map(|r| (0..=n_max).map(move |l| r * padded + l))
        .collect();
    let d = keep.len();
    CMatrix::from_fn(d, d, |i, j| m[(keep[i], keep[j])])
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Residuals of the structural identities a [`FockSystem`] must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub n_max: usize,
    /// `max |a_R − (a₁ − i a₂)/√2|` and the analogous checks for the other ladders.
    pub basis_change: f64,
    /// `max |S₃(linear) − S₃(circular)|`.
    pub linear_vs_circular: f64,
    /// `max |[a, a†] − 1|` over states below the top level of each mode.
    pub commutator_interior: f64,
    /// Largest deviation of `[a, a†]` from the identity at the top level.
    pub commutator_boundary: f64,
    pub hermiticity: f64,
    /// `max |[S₃, n̂_R]|, |[S₃, n̂_L]|`.
    pub number_commutator: f64,
    /// `max |S₃_R(nonnormal) − S₃_R(normal) − 1/2|` (and the left analogue).
    pub ordering_gap: f64,
    /// `max |S₃(nonnormal) − S₃(normal)|`.
    pub total_ordering_gap: f64,
}

impl IdentityReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("identity report encoding: {e}")))
    }

    pub fn passes(&self, tol: f64) -> bool {
        [
            self.basis_change,
            self.linear_vs_circular,
            self.commutator_interior,
            self.hermiticity,
            self.number_commutator,
            self.ordering_gap,
            self.total_ordering_gap,
        ]
        .iter()
        .all(|&r| r <= tol)
    }
}

impl FockSystem {
    /// Builds every operator for truncation `n_max` and checks the identities.
    pub fn build(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::config("n_max must be at least 1"));
        }
        if n_max > MAX_N_MAX {
            return Err(Error::Resource(format!(
                "n_max = {n_max} exceeds the dense-matrix limit {MAX_N_MAX} (dimension {})",
                (n_max + 1) * (n_max + 1)
            )));
        }
        let (a_r, a_l) = circular_ladders(n_max + 1);
        let (a_1, a_2) = linear_from_circular(&a_r, &a_l);

        let (pa_r, pa_l) = circular_ladders(n_max + 2);
        let (pa_1, pa_2) = linear_from_circular(&pa_r, &pa_l);
        let s3_linear = project(&s3_from_linear(&pa_1, &pa_2), n_max);
        let s3_r_nonnormal = project(&symmetrized_number(&pa_r), n_max);
        let s3_l_nonnormal = -project(&symmetrized_number(&pa_l), n_max);
        let number_r = project(&(dag(&pa_r) * &pa_r), n_max);
        let number_l = project(&(dag(&pa_l) * &pa_l), n_max);
        let s3_r_normal = number_r.clone();
        let s3_l_normal = -number_l.clone();

        let sys = FockSystem {
            n_max,
            a_r_dag: dag(&a_r),
            a_l_dag: dag(&a_l),
            a_1_dag: dag(&a_1),
            a_2_dag: dag(&a_2),
            s3_nonnormal: &s3_r_nonnormal + &s3_l_nonnormal,
            s3_normal: &s3_r_normal + &s3_l_normal,
            a_r,
            a_l,
            a_1,
            a_2,
            number_r,
            number_l,
            s3_linear,
            s3_r_nonnormal,
            s3_l_nonnormal,
            s3_r_normal,
            s3_l_normal,
        };
        let report = sys.identities();
        if !report.passes(IDENTITY_TOL) {
            return Err(Error::Consistency(format!(
                "Fock operator identities violated: {report:?}"
            )));
        }
        Ok(sys)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        (self.n_max + 1) * (self.n_max + 1)
    }

    pub fn index(&self, occ: ModeOccupation) -> Result<usize> {
        if occ.n_r > self.n_max || occ.n_l > self.n_max {
            return Err(Error::config(format!(
                "occupation ({}, {}) exceeds truncation n_max = {}",
                occ.n_r, occ.n_l, self.n_max
            )));
        }
        Ok(occ.n_r * (self.n_max + 1) + occ.n_l)
    }

    pub fn occupation(&self, index: usize) -> ModeOccupation {
        ModeOccupation::new(index / (self.n_max + 1), index % (self.n_max + 1))
    }

    pub fn basis_vector(&self, occ: ModeOccupation) -> Result<CVector> {
        let mut v = CVector::zeros(self.dim());
        v[self.index(occ)?] = c(1.0);
        Ok(v)
    }

    /// Right and left pieces of S₃; the left piece carries its minus sign.
    pub fn s3_parts(&self, ordering: Ordering) -> (&CMatrix, &CMatrix) {
        match ordering {
            Ordering::Nonnormal => (&self.s3_r_nonnormal, &self.s3_l_nonnormal),
            Ordering::Normal => (&self.s3_r_normal, &self.s3_l_normal),
        }
    }

    pub fn s3(&self, ordering: Ordering) -> &CMatrix {
        match ordering {
            Ordering::Nonnormal => &self.s3_nonnormal,
            Ordering::Normal => &self.s3_normal,
        }
    }

    pub fn identities(&self) -> IdentityReport {
        let d = self.dim();
        let id = CMatrix::identity(d, d);
        let s = c(FRAC_1_SQRT_2);
        let basis_change = [
            max_abs(&(&self.a_r - (&self.a_1 - &self.a_2 * I) * s)),
            max_abs(&(&self.a_l - (&self.a_1 + &self.a_2 * I) * s)),
            max_abs(&(&self.a_r_dag - (&self.a_1_dag + &self.a_2_dag * I) * s)),
            max_abs(&(&self.a_l_dag - (&self.a_1_dag - &self.a_2_dag * I) * s)),
        ]
        .into_iter()
        .fold(0.0, f64::max);

        let comm_r = &self.a_r * &self.a_r_dag - &self.a_r_dag * &self.a_r - &id;
        let comm_l = &self.a_l * &self.a_l_dag - &self.a_l_dag * &self.a_l - &id;
        let (mut interior, mut boundary) = (0.0f64, 0.0f64);
        for i in 0..d {
            let occ = self.occupation(i);
            for j in 0..d {
                for (comm, top) in [(&comm_r, occ.n_r == self.n_max), (&comm_l, occ.n_l == self.n_max)] {
                    let v = comm[(i, j)].norm();
                    if top {
                        boundary = boundary.max(v);
                    } else {
                        interior = interior.max(v);
                    }
                }
            }
        }

        let hermiticity = [
            &self.s3_linear,
            &self.s3_nonnormal,
            &self.s3_normal,
            &self.s3_r_nonnormal,
            &self.s3_l_nonnormal,
        ]
        .iter()
        .map(|m| max_abs(&(*m - m.adjoint())))
        .fold(0.0, f64::max);

        let commutes = |a: &CMatrix, b: &CMatrix| max_abs(&(a * b - b * a));
        let number_commutator = [
            commutes(&self.s3_nonnormal, &self.number_r),
            commutes(&self.s3_nonnormal, &self.number_l),
            commutes(&self.s3_linear, &self.number_r),
            commutes(&self.s3_linear, &self.number_l),
        ]
        .into_iter()
        .fold(0.0, f64::max);

        let half = &id * c(0.5);
        let ordering_gap = max_abs(&(&self.s3_r_nonnormal - &self.s3_r_normal - &half))
            .max(max_abs(&(&self.s3_l_nonnormal - &self.s3_l_normal + &half)));

        IdentityReport {
            n_max: self.n_max,
            basis_change,
            linear_vs_circular: max_abs(&(&self.s3_linear - &self.s3_nonnormal)),
            commutator_interior: interior,
            commutator_boundary: boundary,
            hermiticity,
            number_commutator,
            ordering_gap,
            total_ordering_gap: max_abs(&(&self.s3_nonnormal - &self.s3_normal)),
        }
    }

    /// Nonzero entries as CSV `row,col,re,im`.
    pub fn operator_csv(m: &CMatrix) -> Result<Vec<u8>> {
        let mut rows = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                if z != Complex64::new(0.0, 0.0) {
                    rows.push((i, j, z));
                }
            }
        }
        rows.sort_by_key(|r| (r.0, r.1));
        csv_bytes(
            &["row", "col", "re", "im"],
            rows.into_iter()
                .map(|(i, j, z)| [i.to_string(), j.to_string(), z.re.to_string(), z.im.to_string()]),
        )
    }

    /// Diagonal expectation table over all basis states.
    pub fn expectation_csv(&self) -> Result<Vec<u8>> {
        let rows = (0..self.dim()).map(|i| {
            let occ = self.occupation(i);
            let diag = |m: &CMatrix| m[(i, i)].re.to_string();
            [
                occ.n_r.to_string(),
                occ.n_l.to_string(),
                diag(&self.s3_nonnormal),
                diag(&self.s3_r_nonnormal),
                diag(&self.s3_l_nonnormal),
                diag(&self.s3_r_normal),
                diag(&self.s3_l_normal),
            ]
        });
        csv_bytes(
            &["n_r", "n_l", "s3_total", "s3_r_nonnormal", "s3_l_nonnormal", "s3_r_normal", "s3_l_normal"],
            rows,
        )
    }

    /// Writes the operator matrices and the expectation table into `dir`.
    pub fn export(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        let ops: [(&str, &CMatrix); 9] = [
            ("a_r", &self.a_r),
            ("a_l", &self.a_l),
            ("a_1", &self.a_1),
            ("a_2", &self.a_2),
            ("s3_linear", &self.s3_linear),
            ("s3_nonnormal", &self.s3_nonnormal),
            ("s3_normal", &self.s3_normal),
            ("s3_r_nonnormal", &self.s3_r_nonnormal),
            ("s3_l_nonnormal", &self.s3_l_nonnormal),
        ];
        let mut written = Vec::new();
        for (name, m) in ops {
            let p = dir.join(format!("op_{name}.csv"));
            write_atomic(&p, &Self::operator_csv(m)?)?;
            written.push(p);
        }
        let p = dir.join("expectations.csv");
        write_atomic(&p, &self.expectation_csv()?)?;
        written.push(p);
        Ok(written)
    }
}

pub fn build_fock_system(n_max: usize) -> Result<FockSystem> {
    FockSystem::build(n_max)
}

pub fn s3_parts(sys: &FockSystem, ordering: Ordering) -> (&CMatrix, &CMatrix) {
    sys.s3_parts(ordering)
}

pub enum State<'a> {
    Basis(ModeOccupation),
    Vector(&'a CVector),
}

/// `v† · op · v`.
///
/// A non-unit vector is normalized with a warning, or rejected when `strict`.
pub fn expectation(sys: &FockSystem, op: &CMatrix, state: State<'_>, strict: bool) -> Result<Complex64> {
    let d = sys.dim();
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::config(format!(
            "operator is {}x{}, system dimension is {d}",
            op.nrows(),
            op.ncols()
        )));
    }
    match state {
        State::Basis(occ) => {
            let i = sys.index(occ)?;
            Ok(op[(i, i)])
        }
        State::Vector(v) => {
            if v.len() != d {
                return Err(Error::config(format!(
                    "state has length {}, system dimension is {d}",
                    v.len()
                )));
            }
            let norm = v.norm();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::config("state vector has zero or non-finite norm"));
            }
            if (norm - 1.0).abs() > 1e-12 {
                if strict {
                    return Err(Error::config(format!("state vector norm is {norm}, expected 1")));
                }
                warn!("normalizing state vector with norm {norm}");
            }
            let ov = op * v;
            Ok(v.dotc(&ov) / (norm * norm))
        }
    }
}

/// Mode phases from matrix expectations of the spin pieces.
///
/// Quantal parts are `Ω · ⟨n_R, n_L| S₃_σ(normal) |n_R, n_L⟩`; vacuum parts are
/// `Ω · ⟨0,0| S₃_σ(nonnormal) |0,0⟩`, the phase carried by the vacuum itself.
pub fn phases_from_fock(sys: &FockSystem, occ: ModeOccupation, kernel: PhaseKernel) -> Result<PhaseReport> {
    sys.index(occ)?;
    let v = kernel.value;
    let (r_norm, l_norm) = sys.s3_parts(Ordering::Normal);
    let (r_full, l_full) = sys.s3_parts(Ordering::Nonnormal);
    let at = |m: &CMatrix, o: ModeOccupation| -> Result<f64> {
        Ok(expectation(sys, m, State::Basis(o), true)?.re)
    };
    let vac = ModeOccupation::new(0, 0);
    let quantal = (v * at(r_norm, occ)?, v * at(l_norm, occ)?);
    let vacuum = (v * at(r_full, vac)?, v * at(l_full, vac)?);
    let to_u32 = |n: usize| u32::try_from(n).map_err(|_| Error::config("occupation too large"));
    Ok(assemble_report(kernel, to_u32(occ.n_r)?, to_u32(occ.n_l)?, quantal, vacuum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{mode_resolved_phases, Helicity};
    use std::f64::consts::{PI, TAU};

    /// Dense two-mode operators assembled entry by entry, independent of `kronecker`.
    fn brute_ladder(n_max: usize, right: bool) -> CMatrix {
        let l = n_max + 1;
        let d = l * l;
        let mut m = CMatrix::zeros(d, d);
        for r in 0..l {
            for s in 0..l {
                let col = r * l + s;
                if right && r > 0 {
                    m[((r - 1) * l + s, col)] = c((r as f64).sqrt());
                }
                if !right && s > 0 {
                    m[(r * l + s - 1, col)] = c((s as f64).sqrt());
                }
            }
        }
        m
    }

    #[test]
    fn ladders_match_brute_force() {
        let sys = build_fock_system(3).unwrap();
        assert_eq!(sys.a_r, brute_ladder(3, true));
        assert_eq!(sys.a_l, brute_ladder(3, false));
    }

    #[test]
    fn smallest_system_diagonal() {
        let sys = build_fock_system(1).unwrap();
        assert_eq!(sys.dim(), 4);
        let expected = [0.0, -1.0, 1.0, 0.0];
        for m in [&sys.s3_nonnormal, &sys.s3_linear] {
            for (i, e) in expected.iter().enumerate() {
                assert!((m[(i, i)].re - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_truncation_rejected() {
        assert!(matches!(build_fock_system(0), Err(Error::Config(_))));
        assert!(matches!(build_fock_system(MAX_N_MAX + 1), Err(Error::Resource(_))));
    }

    #[test]
    fn linear_and_circular_agree() {
        let sys = build_fock_system(2).unwrap();
        assert!(max_abs(&(&sys.s3_linear - &sys.s3_nonnormal)) < 1e-15);
    }

    #[test]
    fn zero_point_parts() {
        let sys = build_fock_system(3).unwrap();
        let vac = State::Basis(ModeOccupation::new(0, 0));
        let (r_nn, _) = sys.s3_parts(Ordering::Nonnormal);
        let (r_n, _) = sys.s3_parts(Ordering::Normal);
        assert_eq!(expectation(&sys, r_nn, vac, true).unwrap().re, 0.5);
        let vac = State::Basis(ModeOccupation::new(0, 0));
        assert_eq!(expectation(&sys, r_n, vac, true).unwrap().re, 0.0);
    }

    #[test]
    fn halves_cancel_in_total() {
        let sys = build_fock_system(4).unwrap();
        for nr in 0..=4 {
            for nl in 0..=4 {
                let occ = ModeOccupation::new(nr, nl);
                let (r, l) = sys.s3_parts(Ordering::Nonnormal);
                let sum = expectation(&sys, r, State::Basis(occ), true).unwrap()
                    + expectation(&sys, l, State::Basis(occ), true).unwrap();
                assert!((sum.re - (nr as f64 - nl as f64)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn left_piece_at_two_one() {
        let sys = build_fock_system(2).unwrap();
        let (_, l) = sys.s3_parts(Ordering::Nonnormal);
        // brute force: v† L v with an explicit basis vector
        let v = sys.basis_vector(ModeOccupation::new(2, 1)).unwrap();
        let brute = v.dotc(&(l * &v));
        assert!((brute.re + 1.5).abs() < 1e-14);
        let e = expectation(&sys, l, State::Basis(ModeOccupation::new(2, 1)), true).unwrap();
        assert!((e.re + 1.5).abs() < 1e-14);
    }

    #[test]
    fn expectation_values() {
        let sys = build_fock_system(2).unwrap();
        let total = sys.s3(Ordering::Nonnormal);
        let one_r = expectation(&sys, total, State::Basis(ModeOccupation::new(1, 0)), true).unwrap();
        assert!((one_r.re - 1.0).abs() < 1e-15);
        let vac = expectation(&sys, total, State::Basis(ModeOccupation::new(0, 0)), true).unwrap();
        assert_eq!(vac.re, 0.0);

        // (|0,0⟩ + |1,0⟩)/√2 against S₃_R: (1/2)(1/2) + (1/2)(3/2) = 1
        let mut v = sys.basis_vector(ModeOccupation::new(0, 0)).unwrap();
        v += sys.basis_vector(ModeOccupation::new(1, 0)).unwrap();
        v *= c(FRAC_1_SQRT_2);
        let (r, _) = sys.s3_parts(Ordering::Nonnormal);
        let e = expectation(&sys, r, State::Vector(&v), true).unwrap();
        assert!((e.re - 1.0).abs() < 1e-12 && e.im.abs() < 1e-12);
    }

    #[test]
    fn non_unit_vector_strict_vs_lenient() {
        let sys = build_fock_system(1).unwrap();
        let v = sys.basis_vector(ModeOccupation::new(1, 0)).unwrap() * c(2.0);
        let total = sys.s3(Ordering::Nonnormal);
        assert!(expectation(&sys, total, State::Vector(&v), true).is_err());
        let e = expectation(&sys, total, State::Vector(&v), false).unwrap();
        assert!((e.re - 1.0).abs() < 1e-15);
        let short = CVector::zeros(3);
        assert!(expectation(&sys, total, State::Vector(&short), false).is_err());
    }

    #[test]
    fn fock_route_vacuum() {
        let sys = build_fock_system(2).unwrap();
        let k = PhaseKernel { value: TAU, cyclic_solid_angle: Some(TAU) };
        let r = phases_from_fock(&sys, ModeOccupation::new(0, 0), k).unwrap();
        assert_eq!(r.mode(Helicity::Right).phase_vacuum, PI);
        assert_eq!(r.mode(Helicity::Left).phase_vacuum, -PI);
        assert_eq!(r.vacuum_sum, 0.0);
    }

    #[test]
    fn fock_route_single_photons() {
        let sys = build_fock_system(2).unwrap();
        let omega = 0.9;
        let k = PhaseKernel { value: omega, cyclic_solid_angle: None };
        let r = phases_from_fock(&sys, ModeOccupation::new(1, 1), k).unwrap();
        assert!(r.multiphoton_phase.abs() < 1e-15);
        assert!((r.mode(Helicity::Right).phase_total - 1.5 * omega).abs() < 1e-14);
        assert!((r.mode(Helicity::Left).phase_total + 1.5 * omega).abs() < 1e-14);

        let k = PhaseKernel { value: PI, cyclic_solid_angle: Some(PI) };
        let r = phases_from_fock(&sys, ModeOccupation::new(0, 1), k).unwrap();
        assert!((r.mode(Helicity::Left).phase_total + 1.5 * PI).abs() < 1e-14);
    }

    #[test]
    fn occupation_beyond_truncation_rejected() {
        let sys = build_fock_system(2).unwrap();
        let k = PhaseKernel { value: 1.0, cyclic_solid_angle: None };
        assert!(matches!(
            phases_from_fock(&sys, ModeOccupation::new(3, 0), k),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn routes_agree_with_closed_form() {
        let sys = build_fock_system(5).unwrap();
        let k = PhaseKernel { value: 2.345, cyclic_solid_angle: None };
        for nr in 0..5 {
            for nl in 0..5 {
                let a = phases_from_fock(&sys, ModeOccupation::new(nr, nl), k).unwrap();
                let b = mode_resolved_phases(k, nr as i64, nl as i64).unwrap();
                for (x, y) in a.per_mode.iter().zip(&b.per_mode) {
                    assert!((x.phase_total - y.phase_total).abs() <= 1e-12 * y.phase_total.abs());
                    assert_eq!(x.phase_vacuum, y.phase_vacuum);
                }
            }
        }
    }

    #[test]
    fn commutator_artifact_confined_to_boundary() {
        let sys = build_fock_system(3).unwrap();
        let rep = sys.identities();
        assert!(rep.commutator_interior < 1e-14);
        assert!(rep.commutator_boundary > 1.0);
    }

    #[test]
    fn operator_csv_lists_nonzeros() {
        let sys = build_fock_system(1).unwrap();
        let text = String::from_utf8(FockSystem::operator_csv(&sys.a_r).unwrap()).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "row,col,re,im");
        assert_eq!(lines.len(), 3);
    }
}
