//! Applied systems realized as piecewise-smooth maps: a relay-controlled
//! first-order system, a periodically forced integrate-and-fire neuron and a
//! planar relay system on a sliding surface.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bifurcation::{MapFamily, ScanOptions};
use crate::circlemap::{self, reduce};
use crate::error::{Error, Result};
use crate::farey::{is_neighbor_pair, Rational};
use crate::ode::{self, OdeOptions, Stop};
use crate::pwmap::{Branch, PiecewiseMap1D, BOUNDARY_EPSILON};
use crate::symbolic::{Symbol, SymbolicWord, ENUMERATION_LIMIT};

/// Autonomous scalar vector field.
#[derive(Clone)]
pub enum ScalarField {
    /// `slope * x + offset`
    Affine { slope: f64, offset: f64 },
    Custom {
        label: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalarField::Affine { slope, offset } => write!(f, "Affine({slope}, {offset})"),
            ScalarField::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

impl ScalarField {
    pub fn affine(slope: f64, offset: f64) -> Self {
        ScalarField::Affine { slope, offset }
    }

    pub fn custom(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField::Custom {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarField::Affine { slope, offset } => slope * x + offset,
            ScalarField::Custom { f, .. } => f(x),
        }
    }

    /// Time-`t` flow of `x' = field(x) + u`, in closed form when affine.
    pub fn flow(&self, x0: f64, u: f64, t: f64) -> Result<f64> {
        match *self {
            ScalarField::Affine { slope, offset } => Ok(affine_flow(slope, offset + u, x0, t)),
            ScalarField::Custom { .. } => self.flow_numeric(x0, u, t),
        }
    }

    pub fn flow_numeric(&self, x0: f64, u: f64, t: f64) -> Result<f64> {
        let rhs = |_t: f64, x: f64| self.eval(x) + u;
        ode::flow(&rhs, x0, t, &OdeOptions::default())
    }
}

fn affine_flow(a: f64, c: f64, x0: f64, t: f64) -> f64 {
    if a == 0.0 {
        return x0 + c * t;
    }
    let e = (a * t).exp();
    e * x0 + (c / a) * (e - 1.0)
}

/// Numerical derivative taken on one side only, so it never straddles the
/// discontinuity at 0.
fn one_sided_branch(
    label: String,
    g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    left_side: bool,
) -> Result<Branch> {
    let g = Arc::new(g);
    let g2 = Arc::clone(&g);
    Branch::custom_with_derivative(
        label,
        move |x| g(x),
        move |x| {
            let h = 1e-6 * x.abs().max(1.0);
            if left_side {
                (g2(x) - g2(x - h)) / h
            } else {
                (g2(x + h) - g2(x)) / h
            }
        },
    )
}

/// First-order plant `y' = f(y) + u` under relay feedback around `y*`.
#[derive(Debug, Clone)]
pub struct RelayModel1D {
    pub field: ScalarField,
    pub k: f64,
    pub period: f64,
    pub y_star: f64,
}

#[derive(Debug, Clone)]
pub struct RelayMap {
    /// Map in the shifted coordinate `z = y - y*`.
    pub map: PiecewiseMap1D,
    /// False when the sliding condition fails ("tracking regime lost").
    pub sliding: bool,
}

impl RelayModel1D {
    pub fn sliding(&self) -> bool {
        let f = self.field.eval(self.y_star);
        f + self.k < 0.0 && f - self.k > 0.0
    }

    /// `P_L` for `y < y*` (input `-k`), `P_R` for `y > y*` (input `+k`).
    pub fn p_left(&self, y: f64) -> Result<f64> {
        self.field.flow(y, -self.k, self.period)
    }

    pub fn p_right(&self, y: f64) -> Result<f64> {
        self.field.flow(y, self.k, self.period)
    }

    pub fn relay_map(&self) -> Result<RelayMap> {
        if !(self.period > 0.0) {
            return Err(Error::InvalidArgument("sampling period must be positive".into()));
        }
        let ys = self.y_star;
        let pl0 = self.p_left(ys)?;
        let pr0 = self.p_right(ys)?;
        let (left, right) = match self.field {
            ScalarField::Affine { slope, .. } => {
                let e = (slope * self.period).exp();
                (Branch::linear(e), Branch::linear(e))
            }
            ScalarField::Custom { .. } => {
                let (m1, m2) = (self.clone(), self.clone());
                (
                    one_sided_branch(
                        "relay-left".into(),
                        move |z| m1.p_left(ys + z).map(|v| v - pl0).unwrap_or(f64::NAN),
                        true,
                    )?,
                    one_sided_branch(
                        "relay-right".into(),
                        move |z| m2.p_right(ys + z).map(|v| v - pr0).unwrap_or(f64::NAN),
                        false,
                    )?,
                )
            }
        };
        Ok(RelayMap {
            map: PiecewiseMap1D::new(left, right, pl0 - ys, ys - pr0)?,
            sliding: self.sliding(),
        })
    }

    /// Virtual fixed points `(y_L, y_R)`: equilibria of `f(y) - k` and `f(y) + k`.
    pub fn virtual_fixed_points(&self) -> Result<(f64, f64)> {
        let solve = |u: f64| -> Result<f64> {
            match self.field {
                ScalarField::Affine { slope, offset } if slope != 0.0 => Ok(-(offset + u) / slope),
                _ => {
                    let g = |y: f64| self.field.eval(y) + u;
                    let (mut a, mut b) = (-1.0, 1.0);
                    for _ in 0..60 {
                        if g(a) * g(b) <= 0.0 {
                            return Ok(crate::pwmap::bisect(&g, a, b, g(a)));
                        }
                        a *= 2.0;
                        b *= 2.0;
                    }
                    Err(Error::RootNotFound(format!("equilibrium of f + {u}")))
                }
            }
        };
        Ok((solve(-self.k)?, solve(self.k)?))
    }
}

/// `y*(λ) = y_L + λ (y_R - y_L)` for a fixed relay model.
#[derive(Debug, Clone)]
pub struct RelaySweep {
    pub model: RelayModel1D,
    pub y_left: f64,
    pub y_right: f64,
}

impl RelaySweep {
    pub fn new(model: RelayModel1D) -> Result<Self> {
        let (y_left, y_right) = model.virtual_fixed_points()?;
        Ok(RelaySweep {
            model,
            y_left,
            y_right,
        })
    }

    pub fn y_star(&self, lambda: f64) -> f64 {
        self.y_left + lambda * (self.y_right - self.y_left)
    }
}

impl MapFamily for RelaySweep {
    fn at(&self, lambda: f64) -> Result<PiecewiseMap1D> {
        let model = RelayModel1D {
            y_star: self.y_star(lambda),
            ..self.model.clone()
        };
        let mut map = model.relay_map()?.map;
        // The sweep ends exactly on the virtual fixed points.
        if lambda == 0.0 {
            map.mu_left = 0.0;
        }
        if lambda == 1.0 {
            map.mu_right = 0.0;
        }
        Ok(map)
    }
}

/// Leaky integrate-and-fire neuron under a periodic pulse of amplitude `A`,
/// active for `d T` of each period `T`.
#[derive(Debug, Clone)]
pub struct IfModel {
    pub field: ScalarField,
    pub theta: f64,
    pub amplitude: f64,
    pub duty: f64,
    pub period: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrobeResult {
    pub x: f64,
    pub spikes: u32,
}

pub const MAX_RESETS: u32 = 10_000;

#[derive(Debug, Clone)]
pub struct InducedMap {
    /// Normal form in `z = x - Σ`.
    pub map: PiecewiseMap1D,
    pub sigma: f64,
    /// Spikes for states above `Σ`; one fewer below.
    pub upper_spikes: u32,
}

impl IfModel {
    fn check(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.period > 0.0 && (0.0..=1.0).contains(&self.duty)) {
            return Err(Error::InvalidArgument(format!(
                "IF model needs theta > 0, T > 0, d in [0, 1] (got {}, {}, {})",
                self.theta, self.period, self.duty
            )));
        }
        Ok(())
    }

    fn on_time(&self) -> f64 {
        self.duty * self.period
    }

    fn off_time(&self) -> f64 {
        (1.0 - self.duty) * self.period
    }

    /// Time-`T` state and the number of resets during the pulse.
    pub fn strobe(&self, x0: f64) -> Result<StrobeResult> {
        match self.field {
            ScalarField::Affine { slope, offset } => self.strobe_affine(slope, offset, x0),
            ScalarField::Custom { .. } => self.strobe_numeric(x0),
        }
    }

    fn strobe_affine(&self, s: f64, c: f64, x0: f64) -> Result<StrobeResult> {
        self.check()?;
        if !(x0 < self.theta) || !x0.is_finite() {
            return Err(Error::InvalidArgument(format!("x0 = {x0} must lie below the threshold")));
        }
        let mut remaining = self.on_time();
        let mut x = x0;
        let mut spikes = 0u32;
        loop {
            match self.affine_hit_time(s, c, x) {
                Some(t) if t <= remaining => {
                    remaining -= t;
                    x = 0.0;
                    spikes += 1;
                    if spikes > MAX_RESETS {
                        return Err(Error::EventDetection("reset cap exceeded".into()));
                    }
                }
                _ => {
                    x = affine_flow(s, c + self.amplitude, x, remaining);
                    break;
                }
            }
        }
        Ok(StrobeResult {
            x: affine_flow(s, c, x, self.off_time()),
            spikes,
        })
    }

    /// Time for the pulsed flow to carry `x` up to the threshold.
    fn affine_hit_time(&self, s: f64, c: f64, x: f64) -> Option<f64> {
        let drive = c + self.amplitude;
        if s == 0.0 {
            return (drive > 0.0).then(|| (self.theta - x) / drive);
        }
        let xa = -drive / s;
        if s < 0.0 && xa > self.theta {
            Some(((xa - x) / (xa - self.theta)).ln() / -s)
        } else if s > 0.0 && self.theta > x && s * x + drive > 0.0 {
            Some(((self.theta - xa) / (x - xa)).ln() / s)
        } else {
            None
        }
    }

    /// Same as [`IfModel::strobe`] but through the adaptive integrator with
    /// threshold events.
    pub fn strobe_numeric(&self, x0: f64) -> Result<StrobeResult> {
        self.strobe_capped(x0, MAX_RESETS)
    }

    fn strobe_capped(&self, x0: f64, max_resets: u32) -> Result<StrobeResult> {
        self.check()?;
        let opts = OdeOptions::default();
        let a = self.amplitude;
        let pulse = |_t: f64, x: f64| self.field.eval(x) + a;
        let (mut t, mut x) = (0.0, x0);
        let mut spikes = 0u32;
        let t_on = self.on_time();
        loop {
            let threshold = (spikes < max_resets).then_some(self.theta);
            match ode::integrate(&pulse, t, x, t_on, threshold, &opts)? {
                Stop::Event { t: te } => {
                    spikes += 1;
                    if spikes > MAX_RESETS {
                        return Err(Error::EventDetection("reset cap exceeded".into()));
                    }
                    t = te;
                    x = 0.0;
                }
                Stop::End { x: xe } => {
                    x = xe;
                    break;
                }
            }
        }
        let off = |_t: f64, x: f64| self.field.eval(x);
        Ok(StrobeResult {
            x: ode::flow(&off, x, self.off_time(), &opts)?,
            spikes,
        })
    }

    /// Time-`T` state with exactly `k` resets, continued smoothly past the
    /// region where `k` is the natural count.
    fn strobe_forced(&self, x0: f64, k: u32) -> Result<f64> {
        match self.field {
            ScalarField::Affine { slope: s, offset: c } => {
                let xa_drive = c + self.amplitude;
                let x_on = if k == 0 {
                    affine_flow(s, xa_drive, x0, self.on_time())
                } else {
                    let t1 = self
                        .affine_hit_time_ext(s, c, x0)
                        .ok_or_else(|| Error::Internal("threshold unreachable".into()))?;
                    let tau = self
                        .affine_hit_time_ext(s, c, 0.0)
                        .ok_or_else(|| Error::Internal("threshold unreachable".into()))?;
                    let last = t1 + (k - 1) as f64 * tau;
                    affine_flow(s, xa_drive, 0.0, self.on_time() - last)
                };
                Ok(affine_flow(s, c, x_on, self.off_time()))
            }
            ScalarField::Custom { .. } => Ok(self.strobe_capped(x0, k)?.x),
        }
    }

    /// Hit time without the `x < θ` restriction (negative above θ).
    fn affine_hit_time_ext(&self, s: f64, c: f64, x: f64) -> Option<f64> {
        let drive = c + self.amplitude;
        if s == 0.0 {
            return (drive > 0.0).then(|| (self.theta - x) / drive);
        }
        let xa = -drive / s;
        let ratio = (xa - x) / (xa - self.theta);
        (ratio > 0.0).then(|| ratio.ln() / -s)
    }

    /// Spike count of states just below the threshold.
    pub fn max_spikes(&self) -> Result<u32> {
        Ok(self.strobe(self.theta * (1.0 - 1e-13))?.spikes)
    }

    /// Boundary `Σ_n`: states above it spike `n` times, below it `n - 1`.
    pub fn sigma(&self, n: u32) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidArgument("Σ_n needs n >= 1".into()));
        }
        let count = |x: f64| self.strobe(x).map(|r| r.spikes);
        let (mut lo, mut hi) = (0.0, self.theta * (1.0 - 1e-13));
        if count(hi)? < n || count(lo)? >= n {
            return Err(Error::RootNotFound(format!("Σ_{n} is not inside [0, θ)")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if count(mid)? >= n {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Induced map around its single discontinuity, or `None` when the
    /// stroboscopic map is continuous on `[0, θ)`.
    pub fn induced_map(&self) -> Result<Option<InducedMap>> {
        let m = self.max_spikes()?;
        if m == 0 || self.strobe(0.0)?.spikes == m {
            return Ok(None);
        }
        let sigma = self.sigma(m)?;
        let below = self.strobe_forced(sigma, m - 1)?;
        let above = self.strobe_forced(sigma, m)?;
        let (m1, m2) = (self.clone(), self.clone());
        let left = one_sided_branch(
            format!("if-left(n={})", m - 1),
            move |z| m1.strobe_forced(sigma + z, m - 1).map(|v| v - below).unwrap_or(f64::NAN),
            true,
        )?;
        let right = one_sided_branch(
            format!("if-right(n={m})"),
            move |z| m2.strobe_forced(sigma + z, m).map(|v| v - above).unwrap_or(f64::NAN),
            false,
        )?;
        Ok(Some(InducedMap {
            map: PiecewiseMap1D::new(left, right, below - sigma, sigma - above)?,
            sigma,
            upper_spikes: m,
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiringRecord {
    pub amplitude: f64,
    /// Spike counts on either side of the discontinuity.
    pub spikes_low: u32,
    pub eta: Option<Rational>,
    pub rho: Option<Rational>,
    pub period: Option<usize>,
    /// Spike total over one detected period divided by the period.
    pub spike_average: Option<Rational>,
    pub contracting: bool,
    pub weak_expansion: bool,
    pub note: String,
}

impl FiringRecord {
    pub fn firing_rate(&self, period: f64) -> Option<f64> {
        self.eta.map(|e| e.to_f64() / period)
    }
}

/// Firing number `η = n + ρ` over a list of amplitudes.
pub fn firing_number_scan(base: &IfModel, amplitudes: &[f64], opts: &ScanOptions) -> Vec<FiringRecord> {
    amplitudes
        .par_iter()
        .map(|&a| {
            let model = IfModel {
                amplitude: a,
                ..base.clone()
            };
            firing_number(&model, opts).unwrap_or_else(|e| FiringRecord {
                amplitude: a,
                spikes_low: 0,
                eta: None,
                rho: None,
                period: None,
                spike_average: None,
                contracting: false,
                weak_expansion: false,
                note: e.to_string(),
            })
        })
        .collect()
}

pub fn firing_number(model: &IfModel, opts: &ScanOptions) -> Result<FiringRecord> {
    let mut rec = FiringRecord {
        amplitude: model.amplitude,
        spikes_low: 0,
        eta: None,
        rho: None,
        period: None,
        spike_average: None,
        contracting: false,
        weak_expansion: false,
        note: String::new(),
    };
    let Some(induced) = model.induced_map()? else {
        let spikes = model.max_spikes()?;
        rec.spikes_low = spikes;
        rec.eta = Some(Rational::integer(spikes as u64));
        rec.rho = Some(Rational::ZERO);
        rec.period = Some(1);
        rec.spike_average = rec.eta;
        rec.contracting = true;
        rec.note = "continuous".into();
        return Ok(rec);
    };
    let n = induced.upper_spikes - 1;
    rec.spikes_low = n;
    let m = &induced.map;
    let class = m.classify();
    rec.contracting = class.contracting;
    if m.mu_left <= 0.0 || m.mu_right <= 0.0 {
        let (eta, note) = if m.mu_left <= 0.0 {
            (n, "fixed point below the discontinuity")
        } else {
            (n + 1, "fixed point above the discontinuity")
        };
        rec.eta = Some(Rational::integer(eta as u64));
        rec.rho = Some(if eta == n { Rational::ZERO } else { Rational::ONE });
        rec.period = Some(1);
        rec.spike_average = rec.eta;
        rec.note = note.into();
        return Ok(rec);
    }
    let red = reduce(m)?;
    rec.weak_expansion = red.weak_expansion;
    let lift = red.lift();
    let rot = circlemap::rotation_number(&lift, opts.iterations, opts.q_max)?;
    let Some(lock) = rot.lock else {
        rec.note = format!("unresolved (rho ~ {:.6})", rot.estimate);
        return Ok(rec);
    };
    let q = lock.ratio.denom();
    rec.rho = Some(lock.ratio);
    rec.eta = Some(Rational::integer(n as u64).checked_add(&lock.ratio)?);
    rec.period = Some(q as usize);
    let (points, _) = lift.source_orbit(lock.point, q as usize);
    let mut total = 0u64;
    for z in points {
        total += model.strobe(induced.sigma + z)?.spikes as u64;
    }
    rec.spike_average = Some(Rational::new(total, q)?);
    if rec.weak_expansion {
        rec.note = "expanding: uniqueness not claimed".into();
    }
    Ok(rec)
}

/// Cell of a `(d, 1/A)` raster of the IF model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IfPlaneCell {
    pub i: usize,
    pub j: usize,
    pub duty: f64,
    pub inv_amplitude: f64,
    pub spikes_low: u32,
    pub eta: Option<Rational>,
    pub period: Option<usize>,
}

/// Firing number over a `width x height` grid of duty cycles and inverse
/// amplitudes, inclusive of both range ends.
pub fn if_plane_scan(
    base: &IfModel,
    duty: (f64, f64),
    inv_amplitude: (f64, f64),
    width: usize,
    height: usize,
    opts: &ScanOptions,
) -> Result<Vec<IfPlaneCell>> {
    if width == 0 || height == 0 || !(inv_amplitude.0 > 0.0) || !(inv_amplitude.1 > 0.0) {
        return Err(Error::InvalidArgument("IF plane needs a non-empty grid and positive 1/A".into()));
    }
    let t = |k: usize, n: usize| if n <= 1 { 0.5 } else { k as f64 / (n - 1) as f64 };
    Ok((0..width * height)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % width, k / width);
            let d = duty.0 + (duty.1 - duty.0) * t(i, width);
            let v = inv_amplitude.0 + (inv_amplitude.1 - inv_amplitude.0) * t(j, height);
            let model = IfModel {
                duty: d,
                amplitude: 1.0 / v,
                ..base.clone()
            };
            let rec = firing_number(&model, opts).ok();
            IfPlaneCell {
                i,
                j,
                duty: d,
                inv_amplitude: v,
                spikes_low: rec.as_ref().map_or(0, |r| r.spikes_low),
                eta: rec.as_ref().and_then(|r| r.eta),
                period: rec.as_ref().and_then(|r| r.period),
            }
        })
        .collect())
}

type Vec2 = [f64; 2];
type Mat2 = [[f64; 2]; 2];

fn mat_vec(m: &Mat2, v: &Vec2) -> Vec2 {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// `y'' = a0 y + a1 y' + b u` with relay input `u = ±k` switched on
/// `σ = y - y* + c1 y'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanarRelayModel {
    pub a0: f64,
    pub a1: f64,
    pub b: f64,
    pub k: f64,
    pub period: f64,
    pub c1: f64,
    pub y_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanarRelayMap {
    pub rho: Mat2,
    pub mu_left: Vec2,
    pub mu_right: Vec2,
    pub fixed_left: Vec2,
    pub fixed_right: Vec2,
    pub c1: f64,
    pub y_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarOrbit {
    pub points: Vec<Vec2>,
    pub word: SymbolicWord,
    pub eta: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarAnalysis {
    pub both_virtual: bool,
    pub orbits: Vec<PlanarOrbit>,
    pub border_collisions: usize,
    pub unresolved: usize,
}

impl PlanarRelayModel {
    fn matrix(&self) -> Mat2 {
        [[0.0, 1.0], [self.a0, self.a1]]
    }

    /// Real eigenvalues, rejecting complex, repeated or non-negative ones.
    pub fn eigenvalues(&self) -> Result<(f64, f64)> {
        let tr = self.a1;
        let det = -self.a0;
        let disc = tr * tr - 4.0 * det;
        if !(disc > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eigenvalues are complex or repeated (discriminant {disc:e})"
            )));
        }
        let s = disc.sqrt();
        let (l1, l2) = (0.5 * (tr - s), 0.5 * (tr + s));
        if !(l2 < 0.0) {
            return Err(Error::InvalidArgument(format!("eigenvalues {l1}, {l2} are not both negative")));
        }
        Ok((l1, l2))
    }

    /// `exp(A T)` by Sylvester's formula for distinct real eigenvalues.
    pub fn exp_at(&self) -> Result<Mat2> {
        let (l1, l2) = self.eigenvalues()?;
        let a = self.matrix();
        let (e1, e2) = ((l1 * self.period).exp(), (l2 * self.period).exp());
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let id = if i == j { 1.0 } else { 0.0 };
                out[i][j] = (e1 * (a[i][j] - l2 * id) - e2 * (a[i][j] - l1 * id)) / (l1 - l2);
            }
        }
        Ok(out)
    }

    pub fn planar_map(&self) -> Result<PlanarRelayMap> {
        if !(self.period > 0.0) {
            return Err(Error::InvalidArgument("sampling period must be positive".into()));
        }
        let rho = self.exp_at()?;
        // A^{-1} B with B = (0, b).
        let a_inv_b = [self.b / self.a0, 0.0];
        let rm = [[rho[0][0] - 1.0, rho[0][1]], [rho[1][0], rho[1][1] - 1.0]];
        let v = mat_vec(&rm, &a_inv_b);
        let mu_right = [self.k * v[0], self.k * v[1]];
        let fixed_right = [-self.k * a_inv_b[0], -self.k * a_inv_b[1]];
        Ok(PlanarRelayMap {
            rho,
            mu_left: [-mu_right[0], -mu_right[1]],
            mu_right,
            fixed_left: [-fixed_right[0], -fixed_right[1]],
            fixed_right,
            c1: self.c1,
            y_star: self.y_star,
        })
    }
}

impl PlanarRelayMap {
    pub fn sigma(&self, y: &Vec2) -> f64 {
        y[0] - self.y_star + self.c1 * y[1]
    }

    /// Both fixed points lie on the wrong side of the switching line.
    pub fn both_virtual(&self) -> bool {
        self.sigma(&self.fixed_right) < 0.0 && self.sigma(&self.fixed_left) > 0.0
    }

    pub fn step(&self, y: &Vec2) -> Vec2 {
        let mu = if self.sigma(y) < 0.0 { &self.mu_left } else { &self.mu_right };
        let r = mat_vec(&self.rho, y);
        [r[0] + mu[0], r[1] + mu[1]]
    }

    pub fn find_attractor(&self, seed: Vec2, burn_in: usize, max_period: usize, tol: f64) -> Result<Option<PlanarOrbit>> {
        let mut y = seed;
        for _ in 0..burn_in {
            y = self.step(&y);
            if !(y[0].is_finite() && y[1].is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        let mut tail = vec![y];
        for _ in 0..2 * max_period {
            y = self.step(&y);
            tail.push(y);
        }
        let dist = |a: &Vec2, b: &Vec2| (a[0] - b[0]).hypot(a[1] - b[1]);
        for p in 1..=max_period {
            if (0..p).all(|i| dist(&tail[i + p], &tail[i]) < tol) {
                let mut points = tail[..p].to_vec();
                let mut symbols = Vec::with_capacity(p);
                for (i, pt) in points.iter().enumerate() {
                    let s = self.sigma(pt);
                    if s.abs() < BOUNDARY_EPSILON {
                        return Err(Error::BorderCollision { step: burn_in + i, x: s });
                    }
                    symbols.push(if s < 0.0 { Symbol::L } else { Symbol::R });
                }
                let word = SymbolicWord::new(&symbols)?;
                let k = word.least_rotation_offset();
                points.rotate_left(k);
                let word = word.shift(k);
                return Ok(Some(PlanarOrbit {
                    eta: word.eta_number(),
                    word,
                    points,
                }));
            }
        }
        Ok(None)
    }

    /// Attractors reached from a 4x4 seed grid over a box around both
    /// virtual fixed points.
    pub fn analyze(&self) -> PlanarAnalysis {
        let (fl, fr) = (self.fixed_left, self.fixed_right);
        let x0 = fl[0].min(fr[0]);
        let x1 = fl[0].max(fr[0]);
        let half = 0.5 * (x1 - x0).max(1e-3);
        let (bx0, bx1) = (x0 - half, x1 + half);
        let (by0, by1) = (-2.0 * half, 2.0 * half);
        let mut orbits: Vec<PlanarOrbit> = Vec::new();
        let mut border_collisions = 0;
        let mut unresolved = 0;
        for i in 0..4 {
            for j in 0..4 {
                let seed = [
                    bx0 + (bx1 - bx0) * (i as f64 + 0.5) / 4.0,
                    by0 + (by1 - by0) * (j as f64 + 0.5) / 4.0,
                ];
                match self.find_attractor(seed, 10_000, 200, 1e-10) {
                    Ok(Some(o)) => {
                        let dup = orbits.iter().any(|p| {
                            p.word == o.word
                                && p.points
                                    .iter()
                                    .zip(&o.points)
                                    .all(|(a, b)| (a[0] - b[0]).abs() < 1e-7 && (a[1] - b[1]).abs() < 1e-7)
                        });
                        if !dup {
                            orbits.push(o);
                        }
                    }
                    Ok(None) => unresolved += 1,
                    Err(_) => border_collisions += 1,
                }
            }
        }
        orbits.sort_by(|a, b| a.eta.cmp(&b.eta).then(a.word.len().cmp(&b.word.len())));
        PlanarAnalysis {
            both_virtual: self.both_virtual(),
            orbits,
            border_collisions,
            unresolved,
        }
    }
}

impl PlanarOrbit {
    /// Maximin test; long words fall back to the equivalent p,q-ordering test.
    pub fn is_maximin(&self) -> Result<bool> {
        if self.word.len() <= ENUMERATION_LIMIT {
            self.word.is_maximin()
        } else {
            self.word.is_pq_ordered()
        }
    }
}

impl PlanarAnalysis {
    /// At most two orbits, Farey neighbours when two, all maximin.
    pub fn quasi_contraction_ok(&self) -> bool {
        if self.orbits.len() > 2 {
            return false;
        }
        if self.orbits.len() == 2 {
            let (a, b) = (self.orbits[0].eta, self.orbits[1].eta);
            if !(a < b && is_neighbor_pair(a, b).unwrap_or(false)) {
                return false;
            }
        }
        self.orbits.iter().all(|o| o.is_maximin().unwrap_or(false))
    }
}

/// One point of a `(k, y*)` sweep of the planar relay.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarPoint {
    pub k: f64,
    pub y_star: f64,
    pub analysis: Option<PlanarAnalysis>,
    pub error: Option<String>,
}

pub fn planar_scan(base: &PlanarRelayModel, points: &[(f64, f64)]) -> Vec<PlanarPoint> {
    points
        .par_iter()
        .map(|&(k, y_star)| {
            let model = PlanarRelayModel { k, y_star, ..*base };
            match model.planar_map() {
                Ok(pm) => PlanarPoint {
                    k,
                    y_star,
                    analysis: Some(pm.analyze()),
                    error: None,
                },
                Err(e) => PlanarPoint {
                    k,
                    y_star,
                    analysis: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}
