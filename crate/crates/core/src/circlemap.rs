//! Circle-map reduction, lifts and rotation numbers.
//!
//! With `φ(x) = (x + μ_R)/(μ_L + μ_R)` an orientation preserving map on the
//! absorbing interval `[-μ_R, μ_L]` becomes a degree-one circle map whose
//! lift jumps upward by `gap` at every integer. Iterates are carried as an
//! integer part plus a fractional part so long runs keep full precision.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::farey::{fractions_in_window, Rational};
use crate::pwmap::PiecewiseMap1D;
use crate::symbolic::{Symbol, SymbolicWord};

pub const DEFAULT_ITERATIONS: usize = 100_000;
pub const DEFAULT_Q_MAX: u64 = 100;
pub const LOCK_TOL: f64 = 1e-10;
const SCAN_POINTS: usize = 4096;
const BISECTION_STEPS: usize = 200;
const MONOTONE_GRID: usize = 1024;

/// A point of the lifted line split as `int + frac`, `frac` in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftState {
    pub int: i64,
    pub frac: f64,
}

impl LiftState {
    pub fn at(x: f64) -> Self {
        normalize(0, x)
    }

    pub fn value(&self) -> f64 {
        self.int as f64 + self.frac
    }
}

#[inline]
fn normalize(int: i64, v: f64) -> LiftState {
    let f = v.floor();
    let mut s = LiftState {
        int: int + f as i64,
        frac: v - f,
    };
    if s.frac >= 1.0 {
        s.int += 1;
        s.frac = 0.0;
    }
    s
}

/// A degree-one lift `F`, described by its values on `[0, 1)`.
pub trait CircleLift: Sync {
    /// `F(y)` for `y` in `[0, 1)`, right-continuous at 0.
    fn base(&self, y: f64) -> f64;

    /// `lim F(y)` as `y -> 1-`.
    fn base_left_end(&self) -> f64;

    fn seed(&self) -> f64 {
        0.25
    }

    fn gap(&self) -> f64 {
        self.base(0.0) + 1.0 - self.base_left_end()
    }

    #[inline]
    fn step(&self, s: LiftState) -> LiftState {
        normalize(s.int, self.base(s.frac))
    }

    /// Step taking the left-lateral value at integers.
    #[inline]
    fn step_left(&self, s: LiftState) -> LiftState {
        if s.frac == 0.0 {
            normalize(s.int - 1, self.base_left_end())
        } else {
            self.step(s)
        }
    }

    fn iterate(&self, mut s: LiftState, n: usize) -> LiftState {
        for _ in 0..n {
            s = self.step(s);
        }
        s
    }

    fn eval(&self, x: f64) -> f64 {
        self.step(LiftState::at(x)).value()
    }
}

/// `F(x) = x + p/q`, iterated exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidRotation {
    pub shift: Rational,
}

impl CircleLift for RigidRotation {
    fn base(&self, y: f64) -> f64 {
        y + self.shift.to_f64()
    }

    fn base_left_end(&self) -> f64 {
        1.0 + self.shift.to_f64()
    }

    fn iterate(&self, s: LiftState, n: usize) -> LiftState {
        let (p, q) = (self.shift.numer() as u128, self.shift.denom() as u128);
        let k = n as u128 * p;
        let whole = (k / q) as i64;
        let rem = (k % q) as u64;
        if rem == 0 {
            return LiftState {
                int: s.int + whole,
                frac: s.frac,
            };
        }
        normalize(s.int + whole, s.frac + rem as f64 / q as f64)
    }
}

#[derive(Debug, Clone)]
pub struct CircleReduction {
    pub map: PiecewiseMap1D,
    /// `φ(0)`, the circle image of the discontinuity.
    pub c: f64,
    pub gap: f64,
    /// Invertible but with some `|f'| >= 1`.
    pub weak_expansion: bool,
    span: f64,
}

impl CircleReduction {
    pub fn phi(&self, x: f64) -> f64 {
        (x + self.map.mu_right) / self.span
    }

    pub fn phi_inv(&self, y: f64) -> f64 {
        y * self.span - self.map.mu_right
    }

    pub fn lift(&self) -> LiftedCircleMap {
        LiftedCircleMap {
            reduction: self.clone(),
        }
    }
}

pub fn reduce(m: &PiecewiseMap1D) -> Result<CircleReduction> {
    let (ml, mr) = (m.mu_left, m.mu_right);
    if !(ml > 0.0 && mr > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "circle reduction needs mu_left, mu_right > 0 (got {ml}, {mr})"
        )));
    }
    let mut sup = 0.0f64;
    for i in 0..=MONOTONE_GRID {
        let t = i as f64 / MONOTONE_GRID as f64;
        let dl = m.left.derivative(-mr * (1.0 - t));
        let dr = m.right.derivative(ml * t);
        if !(dl > 0.0) {
            return Err(Error::NonOrientable(format!(
                "left branch slope {dl:e} at x = {:e}",
                -mr * (1.0 - t)
            )));
        }
        if !(dr > 0.0) {
            return Err(Error::NonOrientable(format!(
                "right branch slope {dr:e} at x = {:e}",
                ml * t
            )));
        }
        sup = sup.max(dl).max(dr);
    }
    let span = ml + mr;
    let gap = (m.left_full(-mr) - m.right_full(ml)) / span;
    if gap < 0.0 {
        return Err(Error::NegativeGap(gap));
    }
    Ok(CircleReduction {
        map: m.clone(),
        c: mr / span,
        gap,
        weak_expansion: sup * 1.01 >= 1.0,
        span,
    })
}

#[derive(Debug, Clone)]
pub struct LiftedCircleMap {
    pub reduction: CircleReduction,
}

impl CircleLift for LiftedCircleMap {
    #[inline]
    fn base(&self, y: f64) -> f64 {
        let r = &self.reduction;
        let x = r.phi_inv(y);
        if x < 0.0 {
            r.phi(r.map.left_full(x))
        } else {
            r.phi(r.map.right_full(x)) + 1.0
        }
    }

    fn base_left_end(&self) -> f64 {
        let r = &self.reduction;
        r.phi(r.map.right_full(r.map.mu_left)) + 1.0
    }

    fn seed(&self) -> f64 {
        0.5 * self.reduction.c
    }
}

impl LiftedCircleMap {
    /// Symbol of a circle point: `L` below `c`, `R` at or above.
    pub fn symbol(&self, y: f64) -> Symbol {
        if y < self.reduction.c {
            Symbol::L
        } else {
            Symbol::R
        }
    }

    /// Circle orbit of `y0` under `q` steps, mapped back to the source map.
    pub fn source_orbit(&self, y0: f64, q: usize) -> (Vec<f64>, SymbolicWord) {
        let mut s = LiftState::at(y0);
        let mut pts = Vec::with_capacity(q);
        let mut syms = Vec::with_capacity(q);
        for _ in 0..q {
            pts.push(self.reduction.phi_inv(s.frac));
            syms.push(self.symbol(s.frac));
            s = self.step(s);
        }
        (pts, SymbolicWord::new(&syms).expect("q >= 1"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lock {
    pub ratio: Rational,
    pub point: f64,
    pub residual: f64,
    /// Accepted from a tolerance dip without a sign change.
    pub one_sided: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotationResult {
    pub estimate: f64,
    pub error_bound: f64,
    pub lock: Option<Lock>,
    /// Left- and right-lateral runs disagree by more than `2/N`.
    pub boundary_sensitive: bool,
}

impl RotationResult {
    pub fn locked(&self) -> Option<Rational> {
        self.lock.map(|l| l.ratio)
    }
}

pub fn rotation_number<F: CircleLift + ?Sized>(f: &F, n: usize, q_max: u64) -> Result<RotationResult> {
    rotation_number_from(f, f.seed(), n, q_max)
}

pub fn rotation_number_from<F: CircleLift + ?Sized>(
    f: &F,
    x0: f64,
    n: usize,
    q_max: u64,
) -> Result<RotationResult> {
    if n < 100 {
        return Err(Error::InvalidArgument(format!("rotation number needs N >= 100 (got {n})")));
    }
    let start = LiftState::at(x0);
    let mut right = start;
    let mut left = start;
    for _ in 0..n {
        right = f.step(right);
        left = f.step_left(left);
    }
    let drift = |s: LiftState| ((s.int - start.int) as f64 + (s.frac - start.frac)) / n as f64;
    let estimate = drift(right);
    let error_bound = 1.0 / n as f64;
    let boundary_sensitive = (drift(left) - estimate).abs() > 2.0 * error_bound;
    let lock = lock_rational_with_hint(f, estimate, error_bound, q_max, Some(right.frac));
    Ok(RotationResult {
        estimate,
        error_bound,
        lock,
        boundary_sensitive,
    })
}

/// `F^q(x) - x - p` in split arithmetic.
pub fn lift_residual<F: CircleLift + ?Sized>(f: &F, x: f64, p: u64, q: u64) -> f64 {
    let s = f.iterate(LiftState { int: 0, frac: x }, q as usize);
    (s.int - p as i64) as f64 + (s.frac - x)
}

pub fn lock_rational<F: CircleLift + ?Sized>(f: &F, estimate: f64, err: f64, q_max: u64) -> Option<Lock> {
    lock_rational_with_hint(f, estimate, err, q_max, None)
}

fn lock_rational_with_hint<F: CircleLift + ?Sized>(
    f: &F,
    estimate: f64,
    err: f64,
    q_max: u64,
    hint: Option<f64>,
) -> Option<Lock> {
    let candidates = fractions_in_window(estimate - err, estimate + err, q_max);
    for r in candidates {
        let (p, q) = (r.numer(), r.denom());
        if let Some(x) = hint {
            let res = lift_residual(f, x, p, q);
            if res.abs() < LOCK_TOL {
                return Some(Lock {
                    ratio: r,
                    point: x,
                    residual: res.abs(),
                    one_sided: false,
                });
            }
        }
        if let Some(lock) = solve_lock(f, r) {
            return Some(lock);
        }
    }
    None
}

/// Root of `G(x) = F^q(x) - x - p` on `[0, 1)` from a grid scan plus bisection.
fn solve_lock<F: CircleLift + ?Sized>(f: &F, r: Rational) -> Option<Lock> {
    let (p, q) = (r.numer(), r.denom());
    let g = |x: f64| lift_residual(f, x, p, q);
    let grid: Vec<f64> = (0..SCAN_POINTS).map(|i| i as f64 / SCAN_POINTS as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&x| g(x)).collect();
    let mut dip: Option<(f64, f64)> = None;
    for i in 0..SCAN_POINTS {
        let (x, gx) = (grid[i], values[i]);
        if gx.abs() < LOCK_TOL && dip.is_none_or(|(_, d)| gx.abs() < d) {
            dip = Some((x, gx.abs()));
        }
        if i + 1 == SCAN_POINTS {
            break;
        }
        let (x1, g1) = (grid[i + 1], values[i + 1]);
        if gx.signum() != g1.signum() {
            let (mut a, mut b, mut ga) = (x, x1, gx);
            for _ in 0..BISECTION_STEPS {
                let m = 0.5 * (a + b);
                if m == a || m == b {
                    break;
                }
                let gm = g(m);
                if gm.signum() == ga.signum() {
                    a = m;
                    ga = gm;
                } else {
                    b = m;
                }
            }
            for cand in [a, b] {
                let res = g(cand).abs();
                if res < LOCK_TOL {
                    return Some(Lock {
                        ratio: r,
                        point: cand,
                        residual: res,
                        one_sided: false,
                    });
                }
            }
        }
    }
    dip.map(|(x, res)| Lock {
        ratio: r,
        point: x,
        residual: res,
        one_sided: true,
    })
}

/// Checks `F(x_i) = x_{i+p}` on the lifted cycle and `F^q(x_i) = x_i + p`.
pub fn verify_pq_ordering<F: CircleLift + ?Sized>(f: &F, orbit: &[f64], p: u64) -> bool {
    const TOL: f64 = 1e-9;
    let q = orbit.len();
    if q == 0 || orbit.windows(2).any(|w| !(w[0] < w[1])) {
        return false;
    }
    let p = p as usize;
    (0..q).all(|i| {
        let target = orbit[(i + p) % q] + ((i + p) / q) as f64;
        let one = (f.eval(orbit[i]) - target).abs() < TOL;
        let full = lift_residual(f, orbit[i], p as u64, q as u64).abs() < TOL;
        one && full
    })
}

/// Sorted points on `[0, 1)` of the lifted cycle through `x`.
pub fn cycle_points<F: CircleLift + ?Sized>(f: &F, x: f64, q: u64) -> Vec<f64> {
    let mut s = LiftState::at(x);
    let mut pts = Vec::with_capacity(q as usize);
    for _ in 0..q {
        pts.push(s.frac);
        s = f.step(s);
    }
    pts.sort_by(f64::total_cmp);
    pts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OmegaLimit {
    Periodic { ratio: Rational },
    /// Heuristic: the orbit tail avoids the forward images of the gap.
    CantorLike { coverage: f64 },
    Undecided,
}

pub fn classify_omega_limit<F: CircleLift + ?Sized>(f: &F, n: usize, q_max: u64) -> Result<OmegaLimit> {
    let rot = rotation_number(f, n, q_max)?;
    if let Some(r) = rot.locked() {
        return Ok(OmegaLimit::Periodic { ratio: r });
    }
    let gap = f.gap();
    if !(gap > 0.0) {
        return Ok(OmegaLimit::Undecided);
    }
    let hole_steps = n.min(2000);
    // Hole U = (F(1-) - 1, F(0)) mod 1 and its forward images, split at 0.
    let lo = f.base_left_end() - 1.0;
    let hi = f.base(0.0);
    let mut holes: Vec<(f64, f64)> = Vec::new();
    let mut current = vec![(lo.rem_euclid(1.0), lo.rem_euclid(1.0) + (hi - lo))];
    for _ in 0..hole_steps {
        let mut next = Vec::new();
        for &(a, b) in &current {
            for (u, v) in split_unit(a, b) {
                holes.push((u, v));
                if v - u > 1e-15 {
                    let fu = f.eval(u);
                    let fv = f.eval(v - 1e-16 * v.max(1.0)).max(fu);
                    let base = fu.floor();
                    next.push((fu - base, fv - base));
                }
            }
        }
        current = next;
    }
    let merged = merge(holes);
    let coverage: f64 = merged.iter().map(|(a, b)| b - a).sum();
    let mut s = LiftState::at(f.seed());
    s = f.iterate(s, n);
    let tail_clear = (0..256).all(|_| {
        s = f.step(s);
        !merged.iter().any(|&(a, b)| s.frac > a + 1e-12 && s.frac < b - 1e-12)
    });
    if tail_clear && coverage > 0.5 {
        Ok(OmegaLimit::CantorLike { coverage })
    } else {
        Ok(OmegaLimit::Undecided)
    }
}

fn split_unit(a: f64, b: f64) -> Vec<(f64, f64)> {
    if b <= 1.0 {
        vec![(a, b)]
    } else if b - a >= 1.0 {
        vec![(0.0, 1.0)]
    } else {
        vec![(a, 1.0), (0.0, b - 1.0)]
    }
}

fn merge(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: u64, q: u64) -> Rational {
        Rational::new(p, q).unwrap()
    }

    fn adding(mu_l: f64, mu_r: f64) -> LiftedCircleMap {
        reduce(&PiecewiseMap1D::linear(0.5, 0.5, mu_l, mu_r).unwrap())
            .unwrap()
            .lift()
    }

    #[test]
    fn reduce_examples() {
        let red = reduce(&PiecewiseMap1D::linear(0.5, 0.5, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(red.c, 0.5);
        assert!((red.gap - 0.5).abs() < 1e-15);
        assert!(!red.weak_expansion);
        let red = reduce(&PiecewiseMap1D::linear(0.5, 0.5, 3.0, 1.0).unwrap()).unwrap();
        assert_eq!(red.c, 0.25);
        let red = reduce(&PiecewiseMap1D::linear(0.99, 0.99, 1.0, 1.0).unwrap()).unwrap();
        assert!((red.gap - 0.01).abs() < 1e-14);
        assert!(!red.weak_expansion);
        let red = reduce(&PiecewiseMap1D::linear(1.2, 0.5, 1.0, 1.0).unwrap()).unwrap();
        assert!((red.gap - 0.15).abs() < 1e-14);
        assert!(red.weak_expansion);
    }

    #[test]
    fn reduce_errors() {
        let dec = PiecewiseMap1D::linear(0.5, -0.5, 1.0, 1.0).unwrap();
        assert!(matches!(reduce(&dec), Err(Error::NonOrientable(_))));
        let wide = PiecewiseMap1D::linear(1.5, 1.5, 1.0, 1.0).unwrap();
        assert!(matches!(reduce(&wide), Err(Error::NegativeGap(_))));
        let neg = PiecewiseMap1D::linear(0.5, 0.5, -1.0, 1.0).unwrap();
        assert!(reduce(&neg).is_err());
    }

    #[test]
    fn lift_is_degree_one() {
        let f = adding(1.0, 0.7);
        for i in 0..1000 {
            let x = -3.0 + 6.0 * i as f64 / 1000.0 + 1e-4;
            assert!((f.eval(x + 1.0) - f.eval(x) - 1.0).abs() < 1e-14);
        }
        assert!((f.gap() - f.reduction.gap).abs() < 1e-15);
    }

    #[test]
    fn rigid_rotation_is_exact() {
        for (p, q) in [(1, 2), (2, 5), (3, 7), (0, 1), (1, 1)] {
            let f = RigidRotation { shift: r(p, q) };
            let res = rotation_number(&f, 10_000, 100).unwrap();
            let lock = res.lock.unwrap();
            assert_eq!(lock.ratio, r(p, q));
            assert_eq!(lock.residual, 0.0);
        }
    }

    #[test]
    fn adding_two_cycle_locks_half() {
        let f = adding(1.0, 1.0);
        let res = rotation_number(&f, 10_000, 50).unwrap();
        assert!((res.estimate - 0.5).abs() <= 1e-4);
        let lock = res.lock.unwrap();
        assert_eq!(lock.ratio, r(1, 2));
        assert!(lift_residual(&f, lock.point, 1, 2).abs() < 1e-10);
        let (pts, word) = f.source_orbit(lock.point, 2);
        assert_eq!(word.minimal_rotation().to_string(), "LR");
        assert!(pts.iter().any(|x| (x + 2.0 / 3.0).abs() < 1e-9));
    }

    #[test]
    fn lock_without_hint_uses_scan() {
        let f = adding(1.0, 1.0);
        let lock = lock_rational(&f, 0.5, 1e-4, 50).unwrap();
        assert_eq!(lock.ratio, r(1, 2));
        assert!(lock.residual < 1e-10);
        assert!(lock_rational(&f, 0.618034, 1e-6, 20).is_none());
    }

    #[test]
    fn pq_ordering_of_locked_orbit() {
        // mu_right tuned so that the attractor is the 2/5 orbit.
        let f = adding(1.0, 0.35);
        let res = rotation_number(&f, 100_000, 100).unwrap();
        let lock = res.lock.unwrap();
        let (p, q) = (lock.ratio.numer(), lock.ratio.denom());
        let pts = cycle_points(&f, lock.point, q);
        assert!(verify_pq_ordering(&f, &pts, p));
        let mut bad = pts.clone();
        if q >= 3 {
            bad.swap(0, 1);
            assert!(!verify_pq_ordering(&f, &bad, p));
        }
        let fixed = RigidRotation { shift: Rational::ZERO };
        assert!(verify_pq_ordering(&fixed, &[0.3], 0));
    }

    #[test]
    fn omega_limit_verdicts() {
        let f = adding(1.0, 1.0);
        assert_eq!(
            classify_omega_limit(&f, 10_000, 100).unwrap(),
            OmegaLimit::Periodic { ratio: r(1, 2) }
        );
        let irr = IrrationalShift(0.5 * (5f64.sqrt() - 1.0));
        assert_eq!(classify_omega_limit(&irr, 10_000, 100).unwrap(), OmegaLimit::Undecided);
    }

    struct IrrationalShift(f64);

    impl CircleLift for IrrationalShift {
        fn base(&self, y: f64) -> f64 {
            y + self.0
        }
        fn base_left_end(&self) -> f64 {
            1.0 + self.0
        }
    }
}
