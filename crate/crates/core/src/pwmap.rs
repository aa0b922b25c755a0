//! Piecewise-smooth maps with a single discontinuity at `x = 0`.
//!
//! The full map is `x -> mu_left + f_L(x)` for `x < 0` and
//! `x -> -mu_right + f_R(x)` for `x > 0`, with `f_L(0) = f_R(0) = 0`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::farey::Rational;
use crate::symbolic::{Symbol, SymbolicWord};

pub const BOUNDARY_EPSILON: f64 = 1e-12;
pub const DIVERGENCE_LIMIT: f64 = 1e8;
const ORIGIN_TOL: f64 = 1e-12;
const CLASSIFY_GRID: usize = 1024;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One smooth branch `f` with `f(0) = 0`.
#[derive(Clone)]
pub enum Branch {
    Linear { slope: f64 },
    /// `slope * x + curvature * x^2`
    Quadratic { slope: f64, curvature: f64 },
    /// `gain * tanh(x / scale)`
    Tanh { gain: f64, scale: f64 },
    Custom {
        label: String,
        eval: ScalarFn,
        derivative: Option<ScalarFn>,
    },
}

impl Branch {
    pub fn linear(slope: f64) -> Self {
        Branch::Linear { slope }
    }

    pub fn custom<F>(label: impl Into<String>, eval: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::build_custom(label.into(), Arc::new(eval), None)
    }

    pub fn custom_with_derivative<F, D>(label: impl Into<String>, eval: F, derivative: D) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::build_custom(label.into(), Arc::new(eval), Some(Arc::new(derivative)))
    }

    fn build_custom(label: String, eval: ScalarFn, derivative: Option<ScalarFn>) -> Result<Self> {
        let at_zero = eval(0.0);
        if !(at_zero.abs() <= ORIGIN_TOL) {
            return Err(Error::InvalidArgument(format!(
                "branch '{label}' has f(0) = {at_zero:e}, expected 0"
            )));
        }
        Ok(Branch::Custom {
            label,
            eval,
            derivative,
        })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Branch::Linear { slope } => slope * x,
            Branch::Quadratic { slope, curvature } => x * (slope + curvature * x),
            Branch::Tanh { gain, scale } => gain * (x / scale).tanh(),
            Branch::Custom { eval, .. } => eval(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Branch::Linear { slope } => *slope,
            Branch::Quadratic { slope, curvature } => slope + 2.0 * curvature * x,
            Branch::Tanh { gain, scale } => {
                let c = (x / scale).cosh();
                gain / (scale * c * c)
            }
            Branch::Custom {
                eval, derivative, ..
            } => match derivative {
                Some(d) => d(x),
                None => {
                    let h = 1e-6 * x.abs().max(1.0);
                    (eval(x + h) - eval(x - h)) / (2.0 * h)
                }
            },
        }
    }

    pub fn slope(&self) -> Option<f64> {
        match self {
            Branch::Linear { slope } => Some(*slope),
            _ => None,
        }
    }

    /// Solves `f(x) = y` for `x` in `[lo, hi]` on a monotone branch.
    ///
    /// Closed form for linear branches, otherwise guarded Newton with a
    /// bisection fallback.
    pub fn solve(&self, y: f64, lo: f64, hi: f64) -> Result<f64> {
        if let Branch::Linear { slope } = self {
            if *slope == 0.0 {
                return Err(Error::RootNotFound("constant branch has no inverse".into()));
            }
            return Ok(y / slope);
        }
        let g = |x: f64| self.eval(x) - y;
        let (mut a, mut b) = (lo, hi);
        let (mut ga, gb) = (g(a), g(b));
        if ga == 0.0 {
            return Ok(a);
        }
        if gb == 0.0 {
            return Ok(b);
        }
        if ga.signum() == gb.signum() {
            return Err(Error::RootNotFound(format!(
                "f(x) = {y} not bracketed on [{lo}, {hi}]"
            )));
        }
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let gx = g(x);
            if gx == 0.0 {
                return Ok(x);
            }
            if gx.signum() == ga.signum() {
                a = x;
                ga = gx;
            } else {
                b = x;
            }
            let d = self.derivative(x);
            let newton = x - gx / d;
            x = if d != 0.0 && newton > a.min(b) && newton < a.max(b) {
                newton
            } else {
                0.5 * (a + b)
            };
            if (b - a).abs() <= 1e-12 * x.abs().max(1.0) || (g(x)).abs() <= 1e-15 {
                return Ok(x);
            }
        }
        Ok(x)
    }
}

impl fmt::Debug for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branch::Linear { slope } => write!(f, "Linear({slope})"),
            Branch::Quadratic { slope, curvature } => write!(f, "Quadratic({slope}, {curvature})"),
            Branch::Tanh { gain, scale } => write!(f, "Tanh({gain}, {scale})"),
            Branch::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryRule {
    LeftImage,
    #[default]
    RightImage,
    Bivalued,
}

/// Image of a point; two values only at `x = 0` under the bivalued rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Image {
    Single(f64),
    Pair(f64, f64),
}

#[derive(Debug, Clone)]
pub struct PiecewiseMap1D {
    pub left: Branch,
    pub right: Branch,
    pub mu_left: f64,
    pub mu_right: f64,
    pub boundary_rule: BoundaryRule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitRecord {
    pub points: Vec<f64>,
    pub word: SymbolicWord,
    pub period: usize,
    pub eta: Rational,
    pub multiplier: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Itinerary {
    pub symbols: Vec<Symbol>,
    pub states: Vec<f64>,
    /// Step at which the trajectory entered the boundary band.
    pub border_collision: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractorOptions {
    pub burn_in: usize,
    pub max_period: usize,
    pub tol: f64,
}

impl Default for AttractorOptions {
    fn default() -> Self {
        AttractorOptions {
            burn_in: 10_000,
            max_period: 200,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Attractor {
    Periodic(OrbitRecord),
    Aperiodic { eta_estimate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapClassification {
    pub absorbing: (f64, f64),
    pub left_increasing: bool,
    pub right_increasing: bool,
    pub right_decreasing: bool,
    pub left_sup_slope: f64,
    pub right_sup_slope: f64,
    pub contracting: bool,
    pub warnings: Vec<String>,
}

impl PiecewiseMap1D {
    pub fn new(left: Branch, right: Branch, mu_left: f64, mu_right: f64) -> Result<Self> {
        if !mu_left.is_finite() || !mu_right.is_finite() {
            return Err(Error::NonFinite);
        }
        for (name, b) in [("left", &left), ("right", &right)] {
            let v = b.eval(0.0);
            if !(v.abs() <= ORIGIN_TOL) {
                return Err(Error::InvalidArgument(format!(
                    "{name} branch has f(0) = {v:e}, expected 0"
                )));
            }
        }
        Ok(PiecewiseMap1D {
            left,
            right,
            mu_left,
            mu_right,
            boundary_rule: BoundaryRule::default(),
        })
    }

    pub fn linear(a: f64, b: f64, mu_left: f64, mu_right: f64) -> Result<Self> {
        Self::new(Branch::linear(a), Branch::linear(b), mu_left, mu_right)
    }

    pub fn with_boundary_rule(mut self, rule: BoundaryRule) -> Self {
        self.boundary_rule = rule;
        self
    }

    pub fn with_offsets(&self, mu_left: f64, mu_right: f64) -> Self {
        PiecewiseMap1D {
            mu_left,
            mu_right,
            ..self.clone()
        }
    }

    /// `mu_left + f_L(x)`, evaluated for any `x`.
    #[inline]
    pub fn left_full(&self, x: f64) -> f64 {
        self.mu_left + self.left.eval(x)
    }

    /// `-mu_right + f_R(x)`, evaluated for any `x`.
    #[inline]
    pub fn right_full(&self, x: f64) -> f64 {
        -self.mu_right + self.right.eval(x)
    }

    #[inline]
    pub fn branch_full(&self, s: Symbol, x: f64) -> f64 {
        match s {
            Symbol::L => self.left_full(x),
            Symbol::R => self.right_full(x),
        }
    }

    pub fn branch_derivative(&self, s: Symbol, x: f64) -> f64 {
        match s {
            Symbol::L => self.left.derivative(x),
            Symbol::R => self.right.derivative(x),
        }
    }

    pub fn apply(&self, x: f64) -> Result<Image> {
        if !x.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(if x < 0.0 {
            Image::Single(self.left_full(x))
        } else if x > 0.0 {
            Image::Single(self.right_full(x))
        } else {
            match self.boundary_rule {
                BoundaryRule::LeftImage => Image::Single(self.mu_left),
                BoundaryRule::RightImage => Image::Single(-self.mu_right),
                BoundaryRule::Bivalued => Image::Pair(self.mu_left, -self.mu_right),
            }
        })
    }

    /// Single-valued step; `x = 0` resolves to the left image only under
    /// [`BoundaryRule::LeftImage`].
    #[inline]
    pub fn step(&self, x: f64) -> f64 {
        if x < 0.0 || (x == 0.0 && self.boundary_rule == BoundaryRule::LeftImage) {
            self.left_full(x)
        } else {
            self.right_full(x)
        }
    }

    pub fn itinerary(&self, x0: f64, n: usize) -> Result<Itinerary> {
        if n == 0 {
            return Err(Error::InvalidArgument("itinerary length must be >= 1".into()));
        }
        if !x0.is_finite() {
            return Err(Error::NonFinite);
        }
        let mut states = vec![x0];
        let mut symbols = Vec::with_capacity(n);
        let mut x = x0;
        for k in 0..n {
            if x.abs() < BOUNDARY_EPSILON {
                return Ok(Itinerary {
                    symbols,
                    states,
                    border_collision: Some(k),
                });
            }
            symbols.push(if x < 0.0 { Symbol::L } else { Symbol::R });
            x = self.step(x);
            if !x.is_finite() {
                return Err(Error::NonFinite);
            }
            states.push(x);
        }
        Ok(Itinerary {
            symbols,
            states,
            border_collision: None,
        })
    }

    #[inline]
    fn guarded_step(&self, x: f64, k: usize) -> Result<f64> {
        if x.abs() < BOUNDARY_EPSILON {
            return Err(Error::BorderCollision { step: k, x });
        }
        let y = self.step(x);
        if !y.is_finite() {
            return Err(Error::NonFinite);
        }
        if y.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Divergence(y.abs()));
        }
        Ok(y)
    }

    /// Forward iteration followed by least-period detection.
    pub fn find_attractor(&self, x0: f64, opts: &AttractorOptions) -> Result<Attractor> {
        if !x0.is_finite() {
            return Err(Error::NonFinite);
        }
        let mut x = x0;
        for k in 0..opts.burn_in {
            x = self.guarded_step(x, k)?;
        }
        let window = 2 * opts.max_period;
        let mut tail = Vec::with_capacity(window + 1);
        tail.push(x);
        for k in 0..window {
            x = self.guarded_step(x, opts.burn_in + k)?;
            tail.push(x);
        }
        for p in 1..=opts.max_period {
            if (0..p).all(|i| (tail[i + p] - tail[i]).abs() < opts.tol) {
                if let Some(k) = tail[..p].iter().position(|v| v.abs() < BOUNDARY_EPSILON) {
                    return Err(Error::BorderCollision {
                        step: opts.burn_in + k,
                        x: tail[k],
                    });
                }
                let symbols: Vec<Symbol> = tail[..p]
                    .iter()
                    .map(|&v| if v < 0.0 { Symbol::L } else { Symbol::R })
                    .collect();
                let word = SymbolicWord::new(&symbols)?;
                let raw = self.orbit_record(tail[..p].to_vec(), word.clone());
                let refined = self
                    .solve_orbit(&word, Some(tail[0]))
                    .ok()
                    .filter(|o| o.points.iter().zip(&tail[..p]).all(|(a, b)| (a - b).abs() < 10.0 * opts.tol));
                let record = refined.unwrap_or(raw);
                return Ok(Attractor::Periodic(canonical_rotation(record)));
            }
        }
        // No cycle: estimate the R-fraction over a long tail.
        let mut r = 0usize;
        const TAIL: usize = 4096;
        for k in 0..TAIL {
            if x > 0.0 {
                r += 1;
            }
            x = self.guarded_step(x, opts.burn_in + window + k)?;
        }
        Ok(Attractor::Aperiodic {
            eta_estimate: r as f64 / TAIL as f64,
        })
    }

    fn orbit_record(&self, points: Vec<f64>, word: SymbolicWord) -> OrbitRecord {
        let multiplier: f64 = points
            .iter()
            .zip(word.symbols())
            .map(|(&x, s)| self.branch_derivative(s, x))
            .product();
        OrbitRecord {
            period: points.len(),
            eta: word.eta_number(),
            word,
            stable: multiplier.abs() < 1.0,
            multiplier,
            points,
        }
    }

    /// Applies the branches named by `word` in order, ignoring domains.
    pub fn compose_word(&self, word: &SymbolicWord, x: f64) -> f64 {
        word.symbols().fold(x, |y, s| self.branch_full(s, y))
    }

    fn compose_word_derivative(&self, word: &SymbolicWord, x: f64) -> (f64, f64) {
        let mut y = x;
        let mut d = 1.0;
        for s in word.symbols() {
            d *= self.branch_derivative(s, y);
            y = self.branch_full(s, y);
        }
        (y, d)
    }

    /// Periodic orbit with prescribed itinerary `word`, starting at the
    /// point whose symbol is `word[0]`. Works for expanding branches too.
    pub fn solve_orbit(&self, word: &SymbolicWord, seed: Option<f64>) -> Result<OrbitRecord> {
        let first = word.get(0);
        let mut root = None;
        let mut x = seed.unwrap_or(match first {
            Symbol::L => -0.5 * self.mu_right.abs().max(1e-3),
            Symbol::R => 0.5 * self.mu_left.abs().max(1e-3),
        });
        for _ in 0..100 {
            let (y, d) = self.compose_word_derivative(word, x);
            let g = y - x;
            let dg = d - 1.0;
            if !g.is_finite() || dg == 0.0 || !dg.is_finite() {
                break;
            }
            let step = g / dg;
            x -= step;
            if step.abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
                root = Some(x);
                break;
            }
        }
        if root.is_none() && (self.compose_word(word, x) - x).abs() < 1e-13 * x.abs().max(1.0) {
            root = Some(x);
        }
        let mut candidate = root.and_then(|x| self.orbit_if_consistent(word, x));
        if candidate.is_none() {
            candidate = self.scan_orbit(word);
        }
        candidate.ok_or_else(|| {
            Error::RootNotFound(format!("no periodic orbit with itinerary {word}"))
        })
    }

    fn scan_orbit(&self, word: &SymbolicWord) -> Option<OrbitRecord> {
        let (lo, hi) = self.classify_interval();
        let (a, b) = match word.get(0) {
            Symbol::L => (lo.min(-BOUNDARY_EPSILON), -BOUNDARY_EPSILON),
            Symbol::R => (BOUNDARY_EPSILON, hi.max(BOUNDARY_EPSILON)),
        };
        const SCAN: usize = 4096;
        let g = |x: f64| self.compose_word(word, x) - x;
        let mut prev_x = a;
        let mut prev_g = g(a);
        for i in 1..=SCAN {
            let x = a + (b - a) * i as f64 / SCAN as f64;
            let gx = g(x);
            if prev_g.signum() != gx.signum() {
                let root = bisect(&g, prev_x, x, prev_g);
                if let Some(o) = self.orbit_if_consistent(word, root) {
                    return Some(o);
                }
            }
            prev_x = x;
            prev_g = gx;
        }
        None
    }

    fn orbit_if_consistent(&self, word: &SymbolicWord, x0: f64) -> Option<OrbitRecord> {
        let mut points = Vec::with_capacity(word.len());
        let mut x = x0;
        for s in word.symbols() {
            if x.abs() < BOUNDARY_EPSILON || Symbol::from_state(x) != Some(s) {
                return None;
            }
            points.push(x);
            x = self.branch_full(s, x);
        }
        let closure = (x - x0).abs();
        if !(closure <= 1e-9 * x0.abs().max(1.0)) {
            return None;
        }
        Some(self.orbit_record(points, word.clone()))
    }

    /// Largest orbit-closure defect `|f(x_i) - x_{i+1}|`.
    pub fn closure_defect(&self, orbit: &OrbitRecord) -> f64 {
        let n = orbit.points.len();
        (0..n)
            .map(|i| (self.step(orbit.points[i]) - orbit.points[(i + 1) % n]).abs())
            .fold(0.0, f64::max)
    }

    fn classify_interval(&self) -> (f64, f64) {
        let (ml, mr) = (self.mu_left, self.mu_right);
        if ml > 0.0 && mr > 0.0 {
            let lo = (-mr).min(self.right_full(ml));
            let hi = ml.max(self.left_full(-mr));
            (lo, hi)
        } else {
            let r = ml.abs().max(mr.abs()).max(1.0);
            (-2.0 * r, 2.0 * r)
        }
    }

    /// Absorbing interval: `[-mu_right, mu_left]` when the right branch
    /// increases, `[f(mu_left), mu_left]` when it decreases.
    pub fn absorbing_interval(&self) -> (f64, f64) {
        if self.mu_left > 0.0 && self.mu_right > 0.0 {
            let fr = self.right_full(self.mu_left);
            if fr < -self.mu_right {
                (fr, self.mu_left)
            } else {
                (-self.mu_right, self.mu_left)
            }
        } else {
            self.classify_interval()
        }
    }

    /// Sampled monotonicity and contraction flags on the absorbing interval.
    pub fn classify(&self) -> MapClassification {
        let (lo, hi) = self.absorbing_interval();
        let sample = |b: &Branch, a: f64, c: f64| -> (f64, f64, f64) {
            let mut min_d = f64::INFINITY;
            let mut max_d = f64::NEG_INFINITY;
            let mut sup = 0.0f64;
            for i in 0..=CLASSIFY_GRID {
                let x = a + (c - a) * i as f64 / CLASSIFY_GRID as f64;
                let d = b.derivative(x);
                min_d = min_d.min(d);
                max_d = max_d.max(d);
                sup = sup.max(d.abs());
            }
            (min_d, max_d, sup * 1.01)
        };
        let (l_min, _, l_sup) = sample(&self.left, lo.min(0.0), 0.0);
        let (r_min, r_max, r_sup) = sample(&self.right, 0.0, hi.max(0.0));
        let mut warnings = Vec::new();
        let left_increasing = l_min > 0.0;
        if !left_increasing {
            warnings.push("left branch not increasing on the absorbing interval".into());
        }
        let contracting = l_sup < 1.0 && r_sup < 1.0;
        if !contracting {
            warnings.push(format!(
                "branches not contracting (sup |f'| = {:.4}, {:.4})",
                l_sup, r_sup
            ));
        }
        MapClassification {
            absorbing: (lo, hi),
            left_increasing,
            right_increasing: r_min > 0.0,
            right_decreasing: r_max < 0.0,
            left_sup_slope: l_sup,
            right_sup_slope: r_sup,
            contracting,
            warnings,
        }
    }
}

/// Rotates an orbit so that its word is the minimal rotation.
pub fn canonical_rotation(o: OrbitRecord) -> OrbitRecord {
    let k = o.word.least_rotation_offset();
    if k == 0 {
        return o;
    }
    let mut points = o.points;
    points.rotate_left(k);
    OrbitRecord {
        points,
        word: o.word.shift(k),
        ..o
    }
}

pub(crate) fn bisect(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut ga: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Serializable branch description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BranchSpec {
    Linear { slope: f64 },
    Quadratic { slope: f64, curvature: f64 },
    Tanh { gain: f64, scale: f64 },
}

impl BranchSpec {
    pub fn build(&self) -> Branch {
        match *self {
            BranchSpec::Linear { slope } => Branch::Linear { slope },
            BranchSpec::Quadratic { slope, curvature } => Branch::Quadratic { slope, curvature },
            BranchSpec::Tanh { gain, scale } => Branch::Tanh { gain, scale },
        }
    }
}

/// Text form of a map: branches, offsets and boundary rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub left: BranchSpec,
    pub right: BranchSpec,
    #[serde(default = "one")]
    pub mu_left: f64,
    #[serde(default = "one")]
    pub mu_right: f64,
    #[serde(default)]
    pub boundary_rule: BoundaryRule,
}

fn one() -> f64 {
    1.0
}

impl MapSpec {
    pub fn build(&self) -> Result<PiecewiseMap1D> {
        if let BranchSpec::Tanh { scale, .. } = self.left.clone() {
            if scale == 0.0 {
                return Err(Error::InvalidArgument("tanh scale must be non-zero".into()));
            }
        }
        if let BranchSpec::Tanh { scale, .. } = self.right.clone() {
            if scale == 0.0 {
                return Err(Error::InvalidArgument("tanh scale must be non-zero".into()));
            }
        }
        Ok(PiecewiseMap1D::new(self.left.build(), self.right.build(), self.mu_left, self.mu_right)?
            .with_boundary_rule(self.boundary_rule))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("map spec: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adding() -> PiecewiseMap1D {
        PiecewiseMap1D::linear(0.5, 0.5, 1.0, 1.0).unwrap()
    }

    #[test]
    fn apply_examples() {
        let m = adding();
        let x1 = -2.0 / 3.0;
        let Image::Single(y) = m.apply(x1).unwrap() else { panic!() };
        assert!((y - 2.0 / 3.0).abs() < 1e-15);
        let bi = m.clone().with_boundary_rule(BoundaryRule::Bivalued);
        assert_eq!(bi.apply(0.0).unwrap(), Image::Pair(1.0, -1.0));
        let z = PiecewiseMap1D::linear(0.3, 0.7, 0.0, 0.0).unwrap();
        assert_eq!(z.apply(0.0).unwrap(), Image::Single(0.0));
        assert!(m.apply(f64::NAN).is_err());
    }

    #[test]
    fn itinerary_examples() {
        let m = adding();
        let it = m.itinerary(-2.0 / 3.0, 4).unwrap();
        assert_eq!(SymbolicWord::new(&it.symbols).unwrap().to_string(), "LRLR");
        assert_eq!(it.states.len(), 5);
        let neg = PiecewiseMap1D::linear(0.5, 0.5, -0.2, -0.3).unwrap();
        let it = neg.itinerary(-1.0, 6).unwrap();
        assert!(it.symbols.iter().all(|&s| s == Symbol::L));
        let it = neg.itinerary(1.0, 6).unwrap();
        assert!(it.symbols.iter().all(|&s| s == Symbol::R));
        let fixed_at_zero = PiecewiseMap1D::linear(0.5, 0.5, 0.0, 0.0).unwrap();
        let it = fixed_at_zero.itinerary(0.0, 3).unwrap();
        assert_eq!(it.border_collision, Some(0));
    }

    #[test]
    fn attractor_adding_two_cycle() {
        let m = adding();
        let Attractor::Periodic(o) = m.find_attractor(0.3, &AttractorOptions::default()).unwrap() else {
            panic!("expected periodic orbit");
        };
        assert_eq!(o.word.to_string(), "LR");
        assert_eq!(o.eta, Rational::new(1, 2).unwrap());
        assert!((o.points[0] + 2.0 / 3.0).abs() < 1e-14);
        assert!((o.points[1] - 2.0 / 3.0).abs() < 1e-14);
        assert!(o.stable);
        assert!(m.closure_defect(&o) < 1e-12);
    }

    #[test]
    fn attractor_negative_offsets() {
        let m = PiecewiseMap1D::linear(0.5, 0.5, -0.1, -0.1).unwrap();
        let Attractor::Periodic(o) = m.find_attractor(-1.0, &AttractorOptions::default()).unwrap() else {
            panic!("expected fixed point");
        };
        assert_eq!(o.word.to_string(), "L");
        assert!((o.points[0] + 0.2).abs() < 1e-14);
    }

    #[test]
    fn attractor_incrementing_lnr() {
        let m = PiecewiseMap1D::linear(0.5, -0.5, 0.05, 1.0).unwrap();
        for x0 in [-0.5, 0.02] {
            let Attractor::Periodic(o) = m.find_attractor(x0, &AttractorOptions::default()).unwrap() else {
                panic!("expected periodic orbit");
            };
            assert_eq!(o.word.r_count(), 1);
            assert_eq!(o.word, SymbolicWord::l_power_r(o.period - 1));
        }
    }

    #[test]
    fn solve_orbit_expanding() {
        let m = PiecewiseMap1D::linear(-2.5, 1.2, -1.45, 1.0).unwrap();
        let word: SymbolicWord = "LRLRL".parse().unwrap();
        let o = m.solve_orbit(&word, None).unwrap();
        assert!(!o.stable);
        assert!(m.closure_defect(&o) < 1e-12);
        assert!((o.points[0] + 0.64468).abs() < 1e-4);
    }

    #[test]
    fn solve_orbit_rejects_inconsistent_word() {
        let m = adding();
        let word: SymbolicWord = "LLLLR".parse().unwrap();
        assert!(matches!(m.solve_orbit(&word, None), Err(Error::RootNotFound(_))));
    }

    #[test]
    fn custom_branch_checks_origin() {
        assert!(Branch::custom("shifted", |x| x + 0.1).is_err());
        let b = Branch::custom("cubic", |x| 0.5 * x + x * x * x).unwrap();
        assert!((b.derivative(0.2) - (0.5 + 3.0 * 0.04)).abs() < 1e-8);
        let y = b.solve(0.3, 0.0, 1.0).unwrap();
        assert!((b.eval(y) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn classification_flags() {
        let c = adding().classify();
        assert_eq!(c.absorbing, (-1.0, 1.0));
        assert!(c.left_increasing && c.right_increasing && c.contracting);
        let inc = PiecewiseMap1D::linear(0.5, -0.5, 0.4, 1.0).unwrap().classify();
        assert!(inc.right_decreasing);
        assert_eq!(inc.absorbing, (-1.2, 0.4));
        let exp = PiecewiseMap1D::linear(1.5, 0.5, 1.0, 1.0).unwrap().classify();
        assert!(!exp.contracting);
        assert!(!exp.warnings.is_empty());
    }

    #[test]
    fn map_spec_round_trip() {
        let text = r#"{"left":{"kind":"linear","slope":0.5},"right":{"kind":"tanh","gain":0.4,"scale":2.0},"mu_left":0.3,"mu_right":0.7,"boundary_rule":"bivalued"}"#;
        let spec = MapSpec::from_json(text).unwrap();
        let m = spec.build().unwrap();
        assert_eq!(m.boundary_rule, BoundaryRule::Bivalued);
        assert!((m.right.derivative(0.0) - 0.2).abs() < 1e-15);
        assert!(MapSpec::from_json("{").is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let m = PiecewiseMap1D::linear(3.0, 3.0, -1.0, -1.0).unwrap();
        assert!(matches!(
            m.find_attractor(-1.0, &AttractorOptions::default()),
            Err(Error::Divergence(_))
        ));
    }
}
