//! Fiber center-lines and the wave-vector trajectories they induce.
//!
//! The wave vector is always tangent to the fiber, so its direction is
//! `k̂ = (sinθ cosφ, sinθ sinφ, cosθ)` with θ, φ taken from the tangent of
//! the center-line. Time is arc length along the fiber (units with c = 1).

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default angular tolerance for deciding whether `k̂(T) = k̂(0)`.
pub const DEFAULT_CLOSURE_TOL: f64 = 1e-9;
/// Below this polar angle (or within it of π) the azimuth is a gauge choice.
pub const DEFAULT_POLE_TOL: f64 = 1e-6;
/// Smallest accepted `samples_per_turn` for a helix.
pub const MIN_SAMPLES_PER_TURN: usize = 16;
/// Widest stencil used for one-sided tangents at path ends.
const END_STENCIL: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    /// Unit vector with polar angle `theta` and azimuth `phi`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Vec3::new(st * cp, st * sp, ct)
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    /// Polar angle in `[0, π]`, computed with `atan2` so it stays accurate near the poles.
    pub fn polar_angle(self) -> f64 {
        self.x.hypot(self.y).atan2(self.z)
    }

    pub fn azimuth(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Angle between two vectors, accurate for nearly parallel inputs.
    pub fn angle_to(self, o: Vec3) -> f64 {
        self.cross(o).norm().atan2(self.dot(o))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A uniformly coiled fiber: radius, rise per turn, and sampling density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelixSpec {
    /// Coil radius (m).
    pub radius: f64,
    /// Rise along the coil axis per full turn (m).
    pub pitch_per_turn: f64,
    pub turns: f64,
    pub samples_per_turn: usize,
}

impl HelixSpec {
    /// Helix whose tangent keeps the polar angle `theta` with the coil axis.
    pub fn with_tilt(radius: f64, theta: f64, turns: f64, samples_per_turn: usize) -> Self {
        HelixSpec {
            radius,
            pitch_per_turn: TAU * radius / theta.tan(),
            turns,
            samples_per_turn,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::config(format!(
                "helix radius must be positive, got {}",
                self.radius
            )));
        }
        if !(self.pitch_per_turn.is_finite() && self.pitch_per_turn >= 0.0) {
            return Err(Error::config(format!(
                "helix pitch_per_turn must be nonnegative, got {}",
                self.pitch_per_turn
            )));
        }
        if !(self.turns.is_finite() && self.turns > 0.0) {
            return Err(Error::config(format!(
                "helix turns must be positive, got {}",
                self.turns
            )));
        }
        if self.samples_per_turn < MIN_SAMPLES_PER_TURN {
            return Err(Error::config(format!(
                "helix samples_per_turn must be at least {MIN_SAMPLES_PER_TURN}, got {}",
                self.samples_per_turn
            )));
        }
        Ok(())
    }

    /// Polar angle of the tangent, constant along the helix.
    pub fn tilt(&self) -> f64 {
        (TAU * self.radius).atan2(self.pitch_per_turn)
    }

    /// Azimuthal rate dφ/ds with respect to arc length.
    pub fn azimuth_rate(&self) -> f64 {
        let rise = self.pitch_per_turn / TAU;
        1.0 / self.radius.hypot(rise)
    }

    /// Center-line position where the tangent azimuth equals `phi`.
    ///
    /// The coil is phased so the tangent azimuth starts at 0.
    pub fn position(&self, phi: f64) -> Vec3 {
        let rise = self.pitch_per_turn / TAU;
        Vec3::new(self.radius * phi.sin(), -self.radius * phi.cos(), rise * phi)
    }

    /// Unit tangent at azimuth `phi`.
    pub fn tangent(&self, phi: f64) -> Vec3 {
        Vec3::from_angles(self.tilt(), phi)
    }

    /// Samples the center-line over `cycles` turns, arc length as time.
    pub fn sample_path(&self, cycles: f64) -> Result<SampledPath> {
        self.validate()?;
        let (n, phi_end) = self.grid(cycles)?;
        let rate = self.azimuth_rate();
        let points = (0..=n)
            .map(|i| {
                let phi = phi_end * i as f64 / n as f64;
                PathPoint {
                    t: phi / rate,
                    position: self.position(phi),
                }
            })
            .collect();
        SampledPath::new(points)
    }

    fn grid(&self, cycles: f64) -> Result<(usize, f64)> {
        if !(cycles.is_finite() && cycles > 0.0) {
            return Err(Error::config(format!("cycles must be positive, got {cycles}")));
        }
        let n = ((cycles * self.samples_per_turn as f64).round() as usize).max(2);
        Ok((n, TAU * cycles))
    }
}

/// Closed-form angular motion attached to trajectories generated from a helix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelixMotion {
    pub spec: HelixSpec,
    pub theta: f64,
    /// dφ/dt.
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: f64,
    pub position: Vec3,
}

/// A sampled fiber center-line with strictly increasing time stamps.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    points: Vec<PathPoint>,
}

impl SampledPath {
    pub fn new(points: Vec<PathPoint>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InsufficientSamples {
                needed: 3,
                got: points.len(),
            });
        }
        for (i, p) in points.iter().enumerate() {
            if !p.t.is_finite() || !p.position.is_finite() {
                return Err(Error::config(format!("non-finite path sample at index {i}")));
            }
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[1].t <= w[0].t {
                return Err(Error::config(format!(
                    "path time must strictly increase (index {}: {} then {})",
                    i + 1,
                    w[0].t,
                    w[1].t
                )));
            }
            if w[1].position == w[0].position {
                return Err(Error::DegenerateTangent { index: i + 1 });
            }
        }
        Ok(SampledPath { points })
    }

    pub fn points(&self) -> &[PathPoint] {
        &self.points
    }

    /// Reads a `t,x,y,z` text file; `#` starts a comment line.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(file);
        let mut points = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            };
            if record.len() != 4 {
                return Err(parse_err(format!("expected 4 fields, got {}", record.len())));
            }
            let mut v = [0.0; 4];
            for (slot, field) in v.iter_mut().zip(record.iter()) {
                *slot = field
                    .parse()
                    .map_err(|_| parse_err(format!("not a number: {field:?}")))?;
            }
            if let Some(prev) = points.last().map(|p: &PathPoint| p.t) {
                if v[0] <= prev {
                    return Err(parse_err(format!("non-monotone t: {} after {prev}", v[0])));
                }
            }
            points.push(PathPoint {
                t: v[0],
                position: Vec3::new(v[1], v[2], v[3]),
            });
        }
        SampledPath::new(points)
    }

    /// Writes the path in the same `t,x,y,z` format [`SampledPath::read`] accepts.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("# t,x,y,z\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.t, p.position.x, p.position.y, p.position.z
            ));
        }
        crate::io::write_atomic(path.as_ref(), out.as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularSample {
    pub t: f64,
    pub theta: f64,
    pub phi: f64,
}

impl AngularSample {
    pub fn direction(&self) -> Vec3 {
        Vec3::from_angles(self.theta, self.phi)
    }
}

/// Time-sampled wave-vector angles with continuous (unwrapped) azimuth.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularTrajectory {
    samples: Vec<AngularSample>,
    closed: bool,
    degenerate_phi: bool,
    motion: Option<HelixMotion>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    pub closure_tol: f64,
    pub pole_tol: f64,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            closure_tol: DEFAULT_CLOSURE_TOL,
            pole_tol: DEFAULT_POLE_TOL,
        }
    }
}

impl AngularTrajectory {
    /// Builds a trajectory from raw samples, unwrapping φ and checking invariants.
    ///
    /// `closed` is decided by comparing the first and last directions.
    pub fn from_samples(samples: Vec<AngularSample>, opts: PathOptions) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: samples.len(),
            });
        }
        for (i, s) in samples.iter().enumerate() {
            if !(s.t.is_finite() && s.phi.is_finite()) {
                return Err(Error::config(format!("non-finite angular sample at index {i}")));
            }
            if !(0.0..=PI).contains(&s.theta) {
                return Err(Error::config(format!(
                    "theta out of [0, π] at index {i}: {}",
                    s.theta
                )));
            }
        }
        if samples.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::config("trajectory time must strictly increase"));
        }
        let mut samples = samples;
        let mut degenerate_phi = false;
        for i in 0..samples.len() {
            if near_pole(samples[i].theta, opts.pole_tol) {
                degenerate_phi = true;
                samples[i].phi = if i == 0 { 0.0 } else { samples[i - 1].phi };
            } else if i > 0 {
                samples[i].phi = unwrap_near(samples[i].phi, samples[i - 1].phi);
            }
        }
        let first = samples[0].direction();
        let last = samples[samples.len() - 1].direction();
        let closed = first.angle_to(last) <= opts.closure_tol;
        Ok(AngularTrajectory {
            samples,
            closed,
            degenerate_phi,
            motion: None,
        })
    }

    pub fn samples(&self) -> &[AngularSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Whether `k̂(T) = k̂(0)` within the closure tolerance.
    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Whether some sample sat within the pole tolerance, where φ is a gauge choice.
    pub fn has_degenerate_phi(&self) -> bool {
        self.degenerate_phi
    }

    pub fn motion(&self) -> Option<&HelixMotion> {
        self.motion.as_ref()
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (a, b) = (self.start_time(), self.end_time());
        let slack = 1e-12 * (b - a).abs().max(1.0);
        if !(t >= a - slack && t <= b + slack) {
            return Err(Error::Domain(format!("t = {t} outside trajectory range [{a}, {b}]")));
        }
        Ok(())
    }

    /// Index of the segment `[t_i, t_{i+1}]` containing `t`.
    fn segment(&self, t: f64) -> usize {
        let idx = self.samples.partition_point(|s| s.t <= t);
        idx.saturating_sub(1).min(self.samples.len() - 2)
    }

    /// (θ, φ) at time `t`; closed form for helices, linear interpolation otherwise.
    pub fn angles_at(&self, t: f64) -> Result<(f64, f64)> {
        self.check_time(t)?;
        if let Some(m) = &self.motion {
            return Ok((m.theta, self.samples[0].phi + m.rate * (t - self.start_time())));
        }
        let i = self.segment(t);
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let w = (t - a.t) / (b.t - a.t);
        Ok((a.theta + w * (b.theta - a.theta), a.phi + w * (b.phi - a.phi)))
    }

    /// (dθ/dt, dφ/dt) at time `t`.
    ///
    /// Sampled trajectories use the slope of the enclosing segment, so the
    /// rates are exactly those of the piecewise-linear interpolant used by
    /// [`AngularTrajectory::angles_at`].
    pub fn rates_at(&self, t: f64) -> Result<(f64, f64)> {
        self.check_time(t)?;
        if let Some(m) = &self.motion {
            return Ok((0.0, m.rate));
        }
        let i = self.segment(t);
        Ok(self.segment_rates(i))
    }

    pub(crate) fn segment_rates(&self, i: usize) -> (f64, f64) {
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let dt = b.t - a.t;
        ((b.theta - a.theta) / dt, (b.phi - a.phi) / dt)
    }

    /// Rates at sample `i` from centered (one-sided at the ends) differences.
    pub fn sample_rates(&self, i: usize) -> (f64, f64) {
        if let Some(m) = &self.motion {
            return (0.0, m.rate);
        }
        let n = self.samples.len();
        let idx: Vec<usize> = if n == 2 {
            vec![0, 1]
        } else if i == 0 {
            vec![0, 1, 2]
        } else if i == n - 1 {
            vec![n - 3, n - 2, n - 1]
        } else {
            vec![i - 1, i, i + 1]
        };
        let ts: Vec<f64> = idx.iter().map(|&j| self.samples[j].t).collect();
        let w = derivative_weights(self.samples[i].t, &ts);
        let mut rates = (0.0, 0.0);
        for (wj, &j) in w.iter().zip(&idx) {
            rates.0 += wj * self.samples[j].theta;
            rates.1 += wj * self.samples[j].phi;
        }
        rates
    }

    /// Restriction to samples `range`, keeping the analytic motion if any.
    pub fn window(&self, start: usize, end: usize, opts: PathOptions) -> Result<Self> {
        if end > self.samples.len() || end < start + 2 {
            return Err(Error::config(format!(
                "invalid sample window {start}..{end} of {}",
                self.samples.len()
            )));
        }
        let mut sub = AngularTrajectory::from_samples(self.samples[start..end].to_vec(), opts)?;
        sub.motion = self.motion;
        Ok(sub)
    }
}

fn near_pole(theta: f64, tol: f64) -> bool {
    theta < tol || theta > PI - tol
}

/// Shifts `phi` by the multiple of 2π that brings it closest to `prev`.
pub fn unwrap_near(phi: f64, prev: f64) -> f64 {
    phi - TAU * ((phi - prev) / TAU).round()
}

/// Weights `w` such that `Σ w_j f(x_j)` is the derivative at `x0` of the
/// Lagrange interpolant through the nodes `xs`.
pub(crate) fn derivative_weights(x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|j| {
            let mut total = 0.0;
            for m in (0..n).filter(|&m| m != j) {
                let mut term = 1.0 / (xs[j] - xs[m]);
                for l in (0..n).filter(|&l| l != j && l != m) {
                    term *= (x0 - xs[l]) / (xs[j] - xs[l]);
                }
                total += term;
            }
            total
        })
        .collect()
}

/// Wave-vector trajectory of a helix traversed for `cycles` turns.
pub fn helix_to_trajectory(spec: &HelixSpec, cycles: f64) -> Result<AngularTrajectory> {
    helix_to_trajectory_with(spec, cycles, PathOptions::default())
}

pub fn helix_to_trajectory_with(
    spec: &HelixSpec,
    cycles: f64,
    opts: PathOptions,
) -> Result<AngularTrajectory> {
    spec.validate()?;
    let (n, phi_end) = spec.grid(cycles)?;
    let theta = spec.tilt();
    let rate = spec.azimuth_rate();
    let samples = (0..=n)
        .map(|i| {
            let phi = phi_end * i as f64 / n as f64;
            AngularSample {
                t: phi / rate,
                theta,
                phi,
            }
        })
        .collect();
    Ok(AngularTrajectory {
        samples,
        closed: (cycles - cycles.round()).abs() < 1e-9,
        degenerate_phi: near_pole(theta, opts.pole_tol),
        motion: Some(HelixMotion {
            spec: *spec,
            theta,
            rate,
        }),
    })
}

/// Tangent directions of a sampled center-line.
///
/// Interior samples use the three-point centered difference; the ends use a
/// one-sided stencil over up to seven points so their accuracy matches the
/// interior on smooth curves.
pub fn path_tangents(path: &SampledPath) -> Result<Vec<Vec3>> {
    let pts = path.points();
    let n = pts.len();
    let stencil = |idx: &[usize], at: usize| -> Result<Vec3> {
        let ts: Vec<f64> = idx.iter().map(|&j| pts[j].t).collect();
        let w = derivative_weights(pts[at].t, &ts);
        let d = idx
            .iter()
            .zip(&w)
            .fold(Vec3::default(), |acc, (&j, &wj)| acc + pts[j].position * wj);
        d.normalized().ok_or(Error::DegenerateTangent { index: at })
    };
    let end = END_STENCIL.min(n);
    (0..n)
        .map(|i| {
            if i == 0 {
                stencil(&(0..end).collect::<Vec<_>>(), 0)
            } else if i == n - 1 {
                stencil(&(n - end..n).collect::<Vec<_>>(), i)
            } else {
                stencil(&[i - 1, i, i + 1], i)
            }
        })
        .collect()
}

pub fn sampled_path_to_trajectory(path: &SampledPath) -> Result<AngularTrajectory> {
    sampled_path_to_trajectory_with(path, PathOptions::default())
}

pub fn sampled_path_to_trajectory_with(
    path: &SampledPath,
    opts: PathOptions,
) -> Result<AngularTrajectory> {
    let tangents = path_tangents(path)?;
    let samples = path
        .points()
        .iter()
        .zip(&tangents)
        .map(|(p, k)| AngularSample {
            t: p.t,
            theta: k.polar_angle(),
            phi: k.azimuth(),
        })
        .collect();
    AngularTrajectory::from_samples(samples, opts)
}

/// Relabels a trajectory's time axis through a monotone map.
///
/// `map` holds `(old_t, new_t)` knots of a piecewise-linear map; both columns
/// must strictly increase and the old column must span the trajectory. Every
/// sample keeps its angles and only its time stamp changes.
pub fn reparameterize(traj: &AngularTrajectory, map: &[(f64, f64)]) -> Result<AngularTrajectory> {
    if map.len() < 2 {
        return Err(Error::config("time map needs at least two knots"));
    }
    if map
        .windows(2)
        .any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1))
    {
        return Err(Error::config("time map must be strictly increasing"));
    }
    let (t0, t1) = (traj.start_time(), traj.end_time());
    let slack = 1e-12 * (t1 - t0).abs().max(1.0);
    if (map[0].0 - t0).abs() > slack || (map[map.len() - 1].0 - t1).abs() > slack {
        return Err(Error::config(format!(
            "time map must span [{t0}, {t1}], got [{}, {}]",
            map[0].0,
            map[map.len() - 1].0
        )));
    }
    let relabel = |t: f64| -> f64 {
        let j = map
            .partition_point(|k| k.0 <= t)
            .saturating_sub(1)
            .min(map.len() - 2);
        let (a, b) = (map[j], map[j + 1]);
        a.1 + (t - a.0) * (b.1 - a.1) / (b.0 - a.0)
    };
    let samples = traj
        .samples
        .iter()
        .map(|s| AngularSample {
            t: relabel(s.t),
            ..*s
        })
        .collect();
    let mut out = AngularTrajectory::from_samples(samples, PathOptions::default())?;
    out.closed = traj.closed;
    out.degenerate_phi = traj.degenerate_phi;
    Ok(out)
}
