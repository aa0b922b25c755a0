//! One- and two-parameter scans, devil's staircases, the period
//! incrementing geometry and the composed-map reduction.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::circlemap::{self, reduce, RotationResult};
use crate::error::{Error, Result};
use crate::farey::{is_neighbor_pair, mediant, Rational};
use crate::pwmap::{canonical_rotation, Attractor, AttractorOptions, Branch, OrbitRecord, PiecewiseMap1D};
use crate::symbolic::{Symbol, SymbolicWord};

const CURVE_GRID: usize = 1024;
const SAME_ORBIT_TOL: f64 = 1e-7;

type CurveFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A curve `λ -> (μ_L(λ), μ_R(λ))` on `[0, 1]`.
#[derive(Clone)]
pub struct ParamCurve {
    mu_left: CurveFn,
    mu_right: CurveFn,
    label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CurveCheck {
    pub positive_inside: bool,
    pub monotone: bool,
    pub endpoints: bool,
}

impl CurveCheck {
    pub fn ok(&self) -> bool {
        self.positive_inside && self.monotone && self.endpoints
    }
}

impl ParamCurve {
    pub fn new<L, R>(label: impl Into<String>, mu_left: L, mu_right: R) -> Self
    where
        L: Fn(f64) -> f64 + Send + Sync + 'static,
        R: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ParamCurve {
            mu_left: Arc::new(mu_left),
            mu_right: Arc::new(mu_right),
            label: label.into(),
        }
    }

    /// `(μ sin(λπ/2), μ cos(λπ/2))`, with exact zeros at both ends.
    pub fn quarter_circle(mu: f64) -> Self {
        Self::new(
            format!("quarter-circle(mu={mu})"),
            move |l| mu * (l * FRAC_PI_2).sin(),
            move |l| mu * ((1.0 - l) * FRAC_PI_2).sin(),
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn at(&self, lambda: f64) -> (f64, f64) {
        ((self.mu_left)(lambda), (self.mu_right)(lambda))
    }

    /// Positivity inside, strict monotonicity on the open interval and the
    /// endpoint zeros, all on a 1024-point grid.
    pub fn check(&self) -> CurveCheck {
        let h = 1e-7;
        let mut positive_inside = true;
        let mut monotone = true;
        for i in 1..CURVE_GRID {
            let l = i as f64 / CURVE_GRID as f64;
            let (ml, mr) = self.at(l);
            positive_inside &= ml > 0.0 && mr > 0.0;
            let (ml1, mr1) = self.at(l + h);
            let (ml0, mr0) = self.at(l - h);
            monotone &= ml1 - ml0 > 0.0 && mr1 - mr0 < 0.0;
        }
        let endpoints = self.at(0.0).0.abs() <= 1e-10 && self.at(1.0).1.abs() <= 1e-10;
        CurveCheck {
            positive_inside,
            monotone,
            endpoints,
        }
    }
}

/// A one-parameter family of maps.
pub trait MapFamily: Sync {
    fn at(&self, lambda: f64) -> Result<PiecewiseMap1D>;
}

/// Fixed branches with offsets taken from a curve.
#[derive(Clone)]
pub struct CurveFamily {
    pub base: PiecewiseMap1D,
    pub curve: ParamCurve,
}

impl MapFamily for CurveFamily {
    fn at(&self, lambda: f64) -> Result<PiecewiseMap1D> {
        let (ml, mr) = self.curve.at(lambda);
        Ok(self.base.with_offsets(ml, mr))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub iterations: usize,
    pub q_max: u64,
    pub attractor: AttractorOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            iterations: circlemap::DEFAULT_ITERATIONS,
            q_max: circlemap::DEFAULT_Q_MAX,
            attractor: AttractorOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    Periodic { orbit: OrbitRecord },
    Coexistence { first: OrbitRecord, second: OrbitRecord },
    Aperiodic { eta_estimate: f64 },
    BorderCollision { eta: Option<Rational> },
    Failed { reason: String },
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Periodic { orbit } if orbit.period == 1 => "fixed-point",
            Outcome::Periodic { .. } => "periodic",
            Outcome::Coexistence { .. } => "coexistence",
            Outcome::Aperiodic { .. } => "aperiodic",
            Outcome::BorderCollision { .. } => "border-collision",
            Outcome::Failed { .. } => "failed",
        }
    }

    pub fn orbits(&self) -> Vec<&OrbitRecord> {
        match self {
            Outcome::Periodic { orbit } => vec![orbit],
            Outcome::Coexistence { first, second } => vec![first, second],
            _ => Vec::new(),
        }
    }

    /// The single η of the outcome, when there is one.
    pub fn eta(&self) -> Option<Rational> {
        match self {
            Outcome::Periodic { orbit } => Some(orbit.eta),
            Outcome::BorderCollision { eta } => *eta,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRecord {
    pub index: usize,
    pub lambda: f64,
    pub mu_left: f64,
    pub mu_right: f64,
    pub outcome: Outcome,
    pub rotation: Option<RotationResult>,
    pub geometry: Option<IncrementingGeometry>,
}

/// Classification of a single map.
pub fn classify_map(m: &PiecewiseMap1D, opts: &ScanOptions) -> (Outcome, Option<RotationResult>, Option<IncrementingGeometry>) {
    let (ml, mr) = (m.mu_left, m.mu_right);
    if ml == 0.0 || mr == 0.0 {
        let eta = if ml == 0.0 && mr > 0.0 {
            Some(Rational::ZERO)
        } else if mr == 0.0 && ml > 0.0 {
            Some(Rational::ONE)
        } else {
            None
        };
        return (Outcome::BorderCollision { eta }, None, None);
    }
    if ml > 0.0 && mr > 0.0 {
        if let Ok(red) = reduce(m) {
            return rotation_outcome(&red.lift(), opts);
        }
    }
    let outcome = two_seed_outcome(m, opts);
    let geometry = if ml > 0.0 && mr > 0.0 && m.classify().right_decreasing {
        incrementing_case(m, INCREMENTING_DEPTH).ok()
    } else {
        None
    };
    (outcome, None, geometry)
}

fn rotation_outcome(
    lift: &circlemap::LiftedCircleMap,
    opts: &ScanOptions,
) -> (Outcome, Option<RotationResult>, Option<IncrementingGeometry>) {
    let rot = match circlemap::rotation_number(lift, opts.iterations, opts.q_max) {
        Ok(r) => r,
        Err(e) => return (Outcome::Failed { reason: e.to_string() }, None, None),
    };
    let outcome = match rot.lock {
        Some(lock) => {
            let q = lock.ratio.denom() as usize;
            let (points, word) = lift.source_orbit(lock.point, q);
            let m = &lift.reduction.map;
            let multiplier: f64 = points
                .iter()
                .zip(word.symbols())
                .map(|(&x, s)| m.branch_derivative(s, x))
                .product();
            let orbit = OrbitRecord {
                period: q,
                eta: word.eta_number(),
                word,
                stable: multiplier.abs() < 1.0,
                multiplier,
                points,
            };
            Outcome::Periodic {
                orbit: canonical_rotation(orbit),
            }
        }
        None => Outcome::Aperiodic {
            eta_estimate: rot.estimate,
        },
    };
    (outcome, Some(rot), None)
}

/// Forward iteration from the two lateral images of the discontinuity.
pub fn two_seed_outcome(m: &PiecewiseMap1D, opts: &ScanOptions) -> Outcome {
    let mut orbits: Vec<OrbitRecord> = Vec::new();
    let mut collision = false;
    let mut aperiodic = None;
    let mut failure = None;
    for seed in [m.mu_left, -m.mu_right] {
        match m.find_attractor(seed, &opts.attractor) {
            Ok(Attractor::Periodic(o)) => {
                if !orbits.iter().any(|p| same_orbit(p, &o)) {
                    orbits.push(o);
                }
            }
            Ok(Attractor::Aperiodic { eta_estimate }) => aperiodic = Some(eta_estimate),
            Err(Error::BorderCollision { .. }) => collision = true,
            Err(e) => failure = Some(e.to_string()),
        }
    }
    orbits.sort_by(|a, b| a.period.cmp(&b.period).then(a.points[0].total_cmp(&b.points[0])));
    match orbits.len() {
        0 => {
            if collision {
                Outcome::BorderCollision { eta: None }
            } else if let Some(eta_estimate) = aperiodic {
                Outcome::Aperiodic { eta_estimate }
            } else {
                Outcome::Failed {
                    reason: failure.unwrap_or_else(|| "no attractor".into()),
                }
            }
        }
        1 => Outcome::Periodic {
            orbit: orbits.pop().expect("one orbit"),
        },
        _ => {
            let second = orbits.pop().expect("two orbits");
            let first = orbits.pop().expect("two orbits");
            Outcome::Coexistence { first, second }
        }
    }
}

fn same_orbit(a: &OrbitRecord, b: &OrbitRecord) -> bool {
    a.word == b.word
        && a
            .points
            .iter()
            .zip(&b.points)
            .all(|(x, y)| (x - y).abs() < SAME_ORBIT_TOL)
}

/// Samples `λ_i = i/(samples-1)` and classifies every map, in parallel on
/// the current rayon pool. Output order follows the sample index.
pub fn scan_curve<F: MapFamily + ?Sized>(family: &F, samples: usize, opts: &ScanOptions) -> Result<Vec<ScanRecord>> {
    if samples < 2 {
        return Err(Error::InvalidArgument("a curve scan needs at least 2 samples".into()));
    }
    Ok((0..samples)
        .into_par_iter()
        .map(|i| {
            let lambda = i as f64 / (samples - 1) as f64;
            scan_point(family, i, lambda, opts)
        })
        .collect())
}

pub fn scan_point<F: MapFamily + ?Sized>(family: &F, index: usize, lambda: f64, opts: &ScanOptions) -> ScanRecord {
    match family.at(lambda) {
        Ok(m) => {
            let (outcome, rotation, geometry) = classify_map(&m, opts);
            ScanRecord {
                index,
                lambda,
                mu_left: m.mu_left,
                mu_right: m.mu_right,
                outcome,
                rotation,
                geometry,
            }
        }
        Err(e) => ScanRecord {
            index,
            lambda,
            mu_left: f64::NAN,
            mu_right: f64::NAN,
            outcome: Outcome::Failed { reason: e.to_string() },
            rotation: None,
            geometry: None,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StairStep {
    pub lambda: f64,
    pub eta: Option<Rational>,
}

/// η per sample, in λ order.
pub fn staircase(records: &[ScanRecord]) -> Vec<StairStep> {
    let mut steps: Vec<StairStep> = records
        .iter()
        .map(|r| StairStep {
            lambda: r.lambda,
            eta: r.outcome.eta(),
        })
        .collect();
    steps.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    steps
}

pub fn unresolved_fraction(steps: &[StairStep]) -> f64 {
    if steps.is_empty() {
        return 0.0;
    }
    steps.iter().filter(|s| s.eta.is_none()).count() as f64 / steps.len() as f64
}

pub fn is_monotone(steps: &[StairStep]) -> bool {
    let resolved: Vec<Rational> = steps.iter().filter_map(|s| s.eta).collect();
    resolved.windows(2).all(|w| w[0] <= w[1])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plateau {
    pub eta: Rational,
    pub word: Option<SymbolicWord>,
    pub first: usize,
    pub last: usize,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
}

/// Merges consecutive samples with the same η into plateaus; unresolved
/// samples break plateaus.
pub fn plateaus(records: &[ScanRecord]) -> Vec<Plateau> {
    let mut out: Vec<Plateau> = Vec::new();
    let mut prev_resolved = false;
    for (i, r) in records.iter().enumerate() {
        let Some(eta) = r.outcome.eta() else {
            prev_resolved = false;
            continue;
        };
        let word = r.outcome.orbits().first().map(|o| o.word.clone());
        match out.last_mut() {
            Some(p) if prev_resolved && p.eta == eta => {
                p.last = i;
                p.lambda_hi = r.lambda;
                if p.word.is_none() {
                    p.word = word;
                }
            }
            _ => out.push(Plateau {
                eta,
                word,
                first: i,
                last: i,
                lambda_lo: r.lambda,
                lambda_hi: r.lambda,
            }),
        }
        prev_resolved = true;
    }
    out
}

/// Result of checking consecutive plateau triples against the Farey rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjacencyReport {
    pub triples_checked: usize,
    pub violations: Vec<String>,
}

/// For consecutive plateaus `α, Δ, β` with `α, β` Farey neighbours, checks
/// `η_Δ = mediant(η_α, η_β)` and `word_Δ = word_α ++ word_β`.
pub fn farey_adjacency(plats: &[Plateau]) -> AdjacencyReport {
    let mut distinct: Vec<&Plateau> = Vec::new();
    for p in plats {
        if distinct.last().is_none_or(|q| q.eta != p.eta) {
            distinct.push(p);
        }
    }
    let mut report = AdjacencyReport {
        triples_checked: 0,
        violations: Vec::new(),
    };
    for w in distinct.windows(3) {
        let (a, d, b) = (w[0], w[1], w[2]);
        if !(a.eta < b.eta) || !is_neighbor_pair(a.eta, b.eta).unwrap_or(false) {
            continue;
        }
        report.triples_checked += 1;
        let m = mediant(a.eta, b.eta).expect("ordered pair");
        if d.eta != m {
            report
                .violations
                .push(format!("{} between {} and {} (expected {m})", d.eta, a.eta, b.eta));
            continue;
        }
        if let (Some(wa), Some(wd), Some(wb)) = (&a.word, &d.word, &b.word) {
            let cat = wa.minimal_rotation().concat(&wb.minimal_rotation());
            if wd.minimal_rotation() != cat {
                report
                    .violations
                    .push(format!("word {wd} at {} is not {wa} ++ {wb}", d.eta));
            }
        }
    }
    report
}

/// Bisects `λ` between a sample inside a plateau and one outside it.
pub fn refine_edge<F: MapFamily + ?Sized>(
    family: &F,
    mut inside: f64,
    mut outside: f64,
    eta: Rational,
    steps: usize,
    opts: &ScanOptions,
) -> f64 {
    for _ in 0..steps.min(40) {
        let mid = 0.5 * (inside + outside);
        if scan_point(family, 0, mid, opts).outcome.eta() == Some(eta) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Refines both edges of every plateau by bisection.
pub fn refine_plateaus<F: MapFamily + ?Sized>(
    family: &F,
    records: &[ScanRecord],
    plats: &mut [Plateau],
    steps: usize,
    opts: &ScanOptions,
) {
    let edges: Vec<(f64, f64)> = plats
        .par_iter()
        .map(|p| {
            let lo = if p.first > 0 {
                refine_edge(family, p.lambda_lo, records[p.first - 1].lambda, p.eta, steps, opts)
            } else {
                p.lambda_lo
            };
            let hi = if p.last + 1 < records.len() {
                refine_edge(family, p.lambda_hi, records[p.last + 1].lambda, p.eta, steps, opts)
            } else {
                p.lambda_hi
            };
            (lo, hi)
        })
        .collect();
    for (p, (lo, hi)) in plats.iter_mut().zip(edges) {
        p.lambda_lo = lo;
        p.lambda_hi = hi;
    }
}

/// Samples between consecutive resolved records whose η values are not
/// Farey neighbours, so plateaus narrower than the scan step are not
/// skipped. Returns all records sorted by λ; new records get indices after
/// the original ones.
pub fn fill_plateau_gaps<F: MapFamily + ?Sized>(
    family: &F,
    records: &[ScanRecord],
    max_depth: usize,
    opts: &ScanOptions,
) -> Vec<ScanRecord> {
    let gaps: Vec<Vec<ScanRecord>> = records
        .par_windows(2)
        .map(|w| {
            let mut found = Vec::new();
            fill_gap(family, &w[0], &w[1], max_depth, opts, &mut found);
            found
        })
        .collect();
    let mut out: Vec<ScanRecord> = Vec::with_capacity(records.len());
    let mut next = records.len();
    for (i, r) in records.iter().enumerate() {
        out.push(r.clone());
        if let Some(extra) = gaps.get(i) {
            for mut e in extra.iter().cloned() {
                e.index = next;
                next += 1;
                out.push(e);
            }
        }
    }
    out
}

fn fill_gap<F: MapFamily + ?Sized>(
    family: &F,
    lo: &ScanRecord,
    hi: &ScanRecord,
    depth: usize,
    opts: &ScanOptions,
    found: &mut Vec<ScanRecord>,
) {
    let (Some(a), Some(b)) = (lo.outcome.eta(), hi.outcome.eta()) else {
        return;
    };
    if depth == 0 || a == b || is_neighbor_pair(a.min(b), a.max(b)).unwrap_or(true) {
        return;
    }
    let mid = scan_point(family, 0, 0.5 * (lo.lambda + hi.lambda), opts);
    fill_gap(family, lo, &mid, depth - 1, opts, found);
    found.push(mid.clone());
    fill_gap(family, &mid, hi, depth - 1, opts, found);
}

pub const INCREMENTING_DEPTH: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "case", content = "n")]
pub enum IncrementingCase {
    /// `a_{n-1}` in `f((0, μ_L])`: `L^{n-1}R` and `L^nR` coexist.
    S1(usize),
    /// `f((0, μ_L])` inside `(a_n, a_{n-1})`: unique `L^nR`.
    S2(usize),
    /// `a_n` in `f((0, μ_L])`: `L^nR` and `L^{n+1}R` coexist.
    S3(usize),
}

impl IncrementingCase {
    /// Exponents `n` of the `L^nR` orbits predicted by the case.
    pub fn exponents(&self) -> Vec<usize> {
        match *self {
            IncrementingCase::S1(n) => vec![n - 1, n],
            IncrementingCase::S2(n) => vec![n],
            IncrementingCase::S3(n) => vec![n, n + 1],
        }
    }

    pub fn is_coexistence(&self) -> bool {
        !matches!(self, IncrementingCase::S2(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementingGeometry {
    /// `a_0 = 0`, `a_n` the `n`-th left preimage of 0.
    pub a: Vec<f64>,
    /// `b_n`, right preimage of `a_n`.
    pub b: Vec<f64>,
    /// `f((0, μ_L]) = [f(μ_L), -μ_R)`.
    pub image: (f64, f64),
    pub case: IncrementingCase,
}

/// Preimages of 0 and the resulting S1/S2 case for an increasing-decreasing map.
pub fn incrementing_case(m: &PiecewiseMap1D, depth: usize) -> Result<IncrementingGeometry> {
    let (ml, mr) = (m.mu_left, m.mu_right);
    if !(ml > 0.0 && mr > 0.0) {
        return Err(Error::InvalidArgument("incrementing geometry needs mu_left, mu_right > 0".into()));
    }
    let lo = m.right_full(ml);
    let image = (lo, -mr);
    if !(lo < -mr) {
        return Err(Error::NonOrientable("right branch is not decreasing".into()));
    }
    let mut a = vec![0.0];
    let mut b = vec![right_preimage(m, 0.0)?];
    let mut hits = Vec::new();
    loop {
        let n = a.len();
        if n > depth {
            return Err(Error::InvalidArgument(format!(
                "preimage depth {depth} exhausted before leaving the absorbing interval"
            )));
        }
        let an = left_preimage(m, a[n - 1])?;
        if !(an < a[n - 1]) {
            return Err(Error::Internal(format!("a_{n} = {an} is not below a_{}", n - 1)));
        }
        a.push(an);
        b.push(right_preimage(m, an)?);
        if an >= lo && an < -mr {
            hits.push(n);
        }
        if an < lo {
            break;
        }
    }
    let case = match hits.as_slice() {
        [] => IncrementingCase::S2(a.len() - 1),
        [j] => IncrementingCase::S1(j + 1),
        _ => {
            return Err(Error::Internal(format!(
                "several preimages of 0 inside f((0, mu_L]): {hits:?}"
            )))
        }
    };
    Ok(IncrementingGeometry { a, b, image, case })
}

fn left_preimage(m: &PiecewiseMap1D, y: f64) -> Result<f64> {
    let target = y - m.mu_left;
    if m.left.slope().is_some() {
        return m.left.solve(target, 0.0, 0.0);
    }
    let mut lo = -1.0f64.max(y.abs());
    for _ in 0..80 {
        if m.left.eval(lo) <= target {
            return m.left.solve(target, lo, 0.0);
        }
        lo *= 2.0;
    }
    Err(Error::RootNotFound(format!("left preimage of {y}")))
}

fn right_preimage(m: &PiecewiseMap1D, y: f64) -> Result<f64> {
    let target = y + m.mu_right;
    if m.right.slope().is_some() {
        return m.right.solve(target, 0.0, 0.0);
    }
    let mut hi = m.mu_left.max(1.0);
    for _ in 0..80 {
        let v = m.right.eval(hi);
        if (v - target) * (m.right.eval(0.0) - target) <= 0.0 {
            return m.right.solve(target, 0.0, hi);
        }
        hi *= 2.0;
    }
    Err(Error::RootNotFound(format!("right preimage of {y}")))
}

/// Cross-check of detected orbits against the geometry: the predicted
/// exponents must be exactly the `n` of the detected `L^nR` words.
pub fn geometry_agrees(outcome: &Outcome, geometry: Option<&IncrementingGeometry>) -> bool {
    match (outcome, geometry) {
        (Outcome::BorderCollision { .. }, None) => true,
        (_, None) => false,
        (o, Some(g)) => {
            let mut found: Vec<usize> = Vec::new();
            for orbit in o.orbits() {
                if orbit.word.r_count() != 1 || orbit.word != SymbolicWord::l_power_r(orbit.period - 1) {
                    return false;
                }
                found.push(orbit.period - 1);
            }
            found.sort_unstable();
            found == g.case.exponents()
        }
    }
}

/// Two-dimensional scan over `(μ_L, μ_R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlaneGrid {
    pub mu_left: (f64, f64),
    pub mu_right: (f64, f64),
    pub width: usize,
    pub height: usize,
}

impl PlaneGrid {
    pub fn cell(&self, i: usize, j: usize) -> (f64, f64) {
        let t = |k: usize, n: usize| if n <= 1 { 0.5 } else { k as f64 / (n - 1) as f64 };
        (
            self.mu_left.0 + (self.mu_left.1 - self.mu_left.0) * t(i, self.width),
            self.mu_right.0 + (self.mu_right.1 - self.mu_right.0) * t(j, self.height),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaneCell {
    pub i: usize,
    pub j: usize,
    pub mu_left: f64,
    pub mu_right: f64,
    pub label: &'static str,
    pub periods: Vec<usize>,
    pub eta: Option<Rational>,
    pub coexistence: bool,
}

pub fn scan_plane(base: &PiecewiseMap1D, grid: &PlaneGrid, opts: &ScanOptions) -> Result<Vec<PlaneCell>> {
    if grid.width == 0 || grid.height == 0 {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let n = grid.width * grid.height;
    Ok((0..n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % grid.width, k / grid.width);
            let (ml, mr) = grid.cell(i, j);
            let (outcome, _, _) = classify_map(&base.with_offsets(ml, mr), opts);
            let periods = outcome.orbits().iter().map(|o| o.period).collect();
            PlaneCell {
                i,
                j,
                mu_left: ml,
                mu_right: mr,
                label: outcome.label(),
                periods,
                eta: outcome.eta(),
                coexistence: matches!(outcome, Outcome::Coexistence { .. }),
            }
        })
        .collect())
}

/// Map obtained by composing source branches along two words.
#[derive(Debug, Clone)]
pub struct ComposedMap {
    pub map: PiecewiseMap1D,
    pub word_x: SymbolicWord,
    pub word_y: SymbolicWord,
    pub source: PiecewiseMap1D,
}

/// Composes the full source branches along `word_x` (new left branch) and
/// `word_y` (new right branch), first symbol applied first, and rewrites the
/// result in normal form around 0.
pub fn codim2_reduce(source: &PiecewiseMap1D, word_x: &SymbolicWord, word_y: &SymbolicWord) -> Result<ComposedMap> {
    if word_x.get(0) != Symbol::L || word_y.get(0) != Symbol::R {
        return Err(Error::InvalidArgument(format!(
            "composition words must start with L and R respectively (got {word_x}, {word_y})"
        )));
    }
    if !word_x.is_primitive() || !word_y.is_primitive() {
        return Err(Error::InvalidArgument("composition words must be primitive".into()));
    }
    let composed = |word: &SymbolicWord| -> Result<(Branch, f64)> {
        let at0 = source.compose_word(word, 0.0);
        let (s1, w1) = (source.clone(), word.clone());
        let (s2, w2) = (source.clone(), word.clone());
        let branch = Branch::custom_with_derivative(
            format!("compose({word})"),
            move |x| s1.compose_word(&w1, x) - at0,
            move |x| {
                let mut y = x;
                let mut d = 1.0;
                for s in w2.symbols() {
                    d *= s2.branch_derivative(s, y);
                    y = s2.branch_full(s, y);
                }
                d
            },
        )?;
        Ok((branch, at0))
    };
    let (left, mu_left) = composed(word_x)?;
    let (right, at0) = composed(word_y)?;
    let map = PiecewiseMap1D::new(left, right, mu_left, -at0)?;
    Ok(ComposedMap {
        map,
        word_x: word_x.clone(),
        word_y: word_y.clone(),
        source: source.clone(),
    })
}

impl ComposedMap {
    /// Source orbit obtained by replacing `L` with `word_x` and `R` with `word_y`.
    pub fn expand_orbit(&self, orbit: &OrbitRecord) -> Result<OrbitRecord> {
        let word = orbit.word.substitute(&self.word_x, &self.word_y);
        let mut points = Vec::with_capacity(word.len());
        for (&x, s) in orbit.points.iter().zip(orbit.word.symbols()) {
            let block = if s == Symbol::L { &self.word_x } else { &self.word_y };
            let mut y = x;
            for t in block.symbols() {
                if Symbol::from_state(y) != Some(t) {
                    return Err(Error::DomainMismatch(format!(
                        "point {y:e} does not lie in the {t:?} domain required by {block}"
                    )));
                }
                points.push(y);
                y = self.source.branch_full(t, y);
            }
        }
        let multiplier: f64 = points
            .iter()
            .zip(word.symbols())
            .map(|(&x, s)| self.source.branch_derivative(s, x))
            .product();
        Ok(OrbitRecord {
            period: word.len(),
            eta: word.eta_number(),
            word,
            stable: multiplier.abs() < 1.0,
            multiplier,
            points,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: u64, q: u64) -> Rational {
        Rational::new(p, q).unwrap()
    }

    fn w(s: &str) -> SymbolicWord {
        s.parse().unwrap()
    }

    fn fast() -> ScanOptions {
        ScanOptions {
            iterations: 20_000,
            q_max: 50,
            ..ScanOptions::default()
        }
    }

    #[test]
    fn quarter_circle_conditions() {
        let c = ParamCurve::quarter_circle(1.0);
        assert!(c.check().ok());
        assert_eq!(c.at(0.0).0, 0.0);
        assert_eq!(c.at(1.0).1, 0.0);
        let bad = ParamCurve::new("flat", |_| 1.0, |_| 1.0);
        assert!(!bad.check().ok());
    }

    #[test]
    fn staircase_endpoints() {
        let fam = CurveFamily {
            base: PiecewiseMap1D::linear(0.5, 0.5, 1.0, 1.0).unwrap(),
            curve: ParamCurve::quarter_circle(1.0),
        };
        let recs = scan_curve(&fam, 2, &fast()).unwrap();
        let st = staircase(&recs);
        assert_eq!(st[0].eta, Some(Rational::ZERO));
        assert_eq!(st[1].eta, Some(Rational::ONE));
        assert_eq!(recs[0].outcome.label(), "border-collision");
    }

    #[test]
    fn adding_scan_small() {
        let fam = CurveFamily {
            base: PiecewiseMap1D::linear(0.5, 0.5, 1.0, 1.0).unwrap(),
            curve: ParamCurve::quarter_circle(1.0),
        };
        let recs = scan_curve(&fam, 101, &fast()).unwrap();
        let st = staircase(&recs);
        assert!(is_monotone(&st));
        let mid = recs[50].outcome.eta().unwrap();
        assert_eq!(mid, r(1, 2));
        let plats = plateaus(&recs);
        let rep = farey_adjacency(&plats);
        assert!(rep.violations.is_empty(), "{:?}", rep.violations);
    }

    #[test]
    fn two_fifths_between_third_and_half() {
        let fam = CurveFamily {
            base: PiecewiseMap1D::linear(0.5, 0.5, 1.0, 1.0).unwrap(),
            curve: ParamCurve::quarter_circle(1.0),
        };
        let opts = fast();
        let eta_at = |l: f64| scan_point(&fam, 0, l, &opts).outcome.eta();
        // Find a λ on the 1/3 plateau and one on the 1/2 plateau.
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        let l3 = *grid.iter().find(|&&l| eta_at(l) == Some(r(1, 3))).unwrap();
        let l2 = *grid.iter().find(|&&l| eta_at(l) == Some(r(1, 2))).unwrap();
        let (mut lo, mut hi) = (l3, l2);
        let mut found = false;
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            match eta_at(mid) {
                Some(e) if e == r(2, 5) => {
                    found = true;
                    break;
                }
                Some(e) if e <= r(2, 5) => lo = mid,
                _ => hi = mid,
            }
        }
        assert!(found);
    }

    #[test]
    fn incrementing_linear_closed_form() {
        let m = PiecewiseMap1D::linear(0.5, -0.5, 5.0, 1.0).unwrap();
        let g = incrementing_case(&m, 100).unwrap();
        assert_eq!(g.case, IncrementingCase::S2(1));
        assert_eq!(g.a[1], -10.0);
        // a_n = (a_{n-1} - μ_L) / 0.5
        let m = PiecewiseMap1D::linear(0.5, -0.5, 0.05, 1.0).unwrap();
        let g = incrementing_case(&m, 100).unwrap();
        for n in 1..g.a.len() {
            assert!((g.a[n] - (g.a[n - 1] - 0.05) / 0.5).abs() < 1e-12);
            assert!((g.b[n] - (g.a[n] + 1.0) / -0.5).abs() < 1e-12);
        }
        for n in 2..g.a.len() {
            let ratio = (g.a[n - 1] - g.a[n]) / (g.a[n - 2] - g.a[n - 1]);
            assert!(ratio > 1.0);
        }
        let m = PiecewiseMap1D::linear(0.5, -0.5, 0.05, 1.0).unwrap();
        let Outcome::Periodic { orbit } = two_seed_outcome(&m, &fast()) else {
            panic!("expected a unique orbit");
        };
        assert!(geometry_agrees(&Outcome::Periodic { orbit }, Some(&g)));
    }

    #[test]
    fn incrementing_case_grows_as_mu_left_vanishes() {
        let mut last = 0;
        for ml in [1.0, 0.1, 0.01, 0.001, 1e-4] {
            let m = PiecewiseMap1D::linear(0.5, -0.5, ml, 1.0).unwrap();
            let g = incrementing_case(&m, 1000).unwrap();
            let n = *g.case.exponents().last().unwrap();
            assert!(n >= last);
            last = n;
        }
        assert!(last >= 10);
    }

    #[test]
    fn incrementing_coexistence_matches_detection() {
        let mut coexist = 0;
        for i in 1..400 {
            let ml = 0.01 + 0.99 * i as f64 / 400.0;
            let m = PiecewiseMap1D::linear(0.5, -0.5, ml, 1.0).unwrap();
            let (outcome, _, geometry) = classify_map(&m, &fast());
            assert!(geometry_agrees(&outcome, geometry.as_ref()), "mu_L = {ml}: {outcome:?} vs {geometry:?}");
            if matches!(outcome, Outcome::Coexistence { .. }) {
                coexist += 1;
            }
        }
        assert!(coexist > 0);
    }

    #[test]
    fn negative_quadrant_has_two_fixed_points() {
        let m = PiecewiseMap1D::linear(0.5, 0.5, -0.3, -0.2).unwrap();
        let (o, _, _) = classify_map(&m, &fast());
        let Outcome::Coexistence { first, second } = o else {
            panic!("expected coexistence");
        };
        assert_eq!((first.period, second.period), (1, 1));
        assert_ne!(first.word, second.word);
    }

    #[test]
    fn identity_reduction() {
        let m = PiecewiseMap1D::linear(0.5, 0.5, 0.7, 0.4).unwrap();
        let c = codim2_reduce(&m, &w("L"), &w("R")).unwrap();
        for x in [-0.3, -0.01, 0.2, 0.6] {
            assert!((c.map.step(x) - m.step(x)).abs() < 1e-15);
        }
        assert!(codim2_reduce(&m, &w("R"), &w("R")).is_err());
    }

    #[test]
    fn expansion_checks_domains() {
        let m = PiecewiseMap1D::linear(0.5, 0.5, 1.0, 1.0).unwrap();
        let c = codim2_reduce(&m, &w("LR"), &w("R")).unwrap();
        let orbit = OrbitRecord {
            points: vec![-3.0],
            word: w("L"),
            period: 1,
            eta: Rational::ZERO,
            multiplier: 0.25,
            stable: true,
        };
        assert!(matches!(c.expand_orbit(&orbit), Err(Error::DomainMismatch(_))));
    }
}
