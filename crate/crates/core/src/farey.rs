//! Exact rationals, Farey sequences and Farey/Stern–Brocot parent lookup.
//!
//! All values are reduced non-negative fractions with 64-bit storage.
//! Denominators are capped at 2^31 so every cross product fits in `u64`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest denominator accepted anywhere in the crate.
pub const MAX_DENOMINATOR: u64 = 1 << 31;

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// A reduced fraction `p/q` with `q >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rational {
    p: u64,
    q: u64,
}

impl Rational {
    pub const ZERO: Rational = Rational { p: 0, q: 1 };
    pub const ONE: Rational = Rational { p: 1, q: 1 };

    /// Builds `p/q` in lowest terms.
    pub fn new(p: u64, q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidArgument("zero denominator".into()));
        }
        let g = gcd(p, q);
        let (p, q) = (p / g, q / g);
        if q > MAX_DENOMINATOR {
            return Err(Error::Overflow(q));
        }
        if p > MAX_DENOMINATOR.saturating_mul(MAX_DENOMINATOR) {
            return Err(Error::Overflow(p));
        }
        Ok(Rational { p, q })
    }

    pub fn integer(n: u64) -> Self {
        Rational { p: n, q: 1 }
    }

    pub fn numer(&self) -> u64 {
        self.p
    }

    pub fn denom(&self) -> u64 {
        self.q
    }

    pub fn to_f64(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    /// True when the value lies in the closed unit interval.
    pub fn in_unit_interval(&self) -> bool {
        self.p <= self.q
    }

    /// Exact sum, used for `n + ρ` style identities.
    pub fn checked_add(&self, other: &Rational) -> Result<Rational> {
        let q = (self.q as u128) * (other.q as u128);
        let p = (self.p as u128) * (other.q as u128) + (other.p as u128) * (self.q as u128);
        let g = gcd128(p, q);
        let (p, q) = (p / g, q / g);
        if q > MAX_DENOMINATOR as u128 || p > u64::MAX as u128 {
            return Err(Error::Overflow(q.min(u64::MAX as u128) as u64));
        }
        Rational::new(p as u64, q as u64)
    }

    fn check_unit(&self) -> Result<()> {
        if self.in_unit_interval() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{self} lies outside [0, 1]"
            )))
        }
    }
}

fn gcd128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = (self.p as u128) * (other.q as u128);
        let rhs = (other.p as u128) * (self.q as u128);
        lhs.cmp(&rhs)
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse rational '{s}'"));
        let (p, q) = match s.trim().split_once('/') {
            Some((p, q)) => (p.trim(), q.trim()),
            None => (s.trim(), "1"),
        };
        let p: u64 = p.parse().map_err(|_| bad())?;
        let q: u64 = q.parse().map_err(|_| bad())?;
        Rational::new(p, q)
    }
}

/// Parents of a node in the Farey tree: `left < child < right`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FareyParents {
    pub left: Rational,
    pub right: Rational,
}

/// Ascending Farey sequence of order `n`.
pub fn farey_sequence(n: u64) -> Result<Vec<Rational>> {
    if n < 1 {
        return Err(Error::InvalidArgument("Farey order must be >= 1".into()));
    }
    if n > MAX_DENOMINATOR {
        return Err(Error::Overflow(n));
    }
    // Classic next-term recurrence on consecutive neighbours.
    let mut out = vec![Rational::ZERO];
    let (mut a, mut b, mut c, mut d) = (0u64, 1u64, 1u64, n);
    while c <= n {
        out.push(Rational { p: c, q: d });
        let k = (n + b) / d;
        let (na, nb) = (c, d);
        c = k * c - a;
        d = k * d - b;
        a = na;
        b = nb;
    }
    Ok(out)
}

/// Farey sum `(a.p + b.p) / (a.q + b.q)`.
pub fn mediant(a: Rational, b: Rational) -> Result<Rational> {
    if a >= b {
        return Err(Error::InvalidArgument(format!(
            "mediant requires {a} < {b}"
        )));
    }
    Rational::new(a.p + b.p, a.q + b.q)
}

/// Neighbour test `b.p * a.q - a.p * b.q == 1` for `a < b`.
pub fn is_neighbor_pair(a: Rational, b: Rational) -> Result<bool> {
    if a >= b {
        return Err(Error::InvalidArgument(format!(
            "neighbour test requires {a} < {b}"
        )));
    }
    let det = (b.p as u128) * (a.q as u128) - (a.p as u128) * (b.q as u128);
    Ok(det == 1)
}

/// Farey parents of an interior node, found by batched Stern–Brocot descent.
///
/// Each batch performs a whole run of left (or right) moves at once, so the
/// loop runs once per continued-fraction term of `x`.
pub fn farey_parents(x: Rational) -> Result<FareyParents> {
    x.check_unit()?;
    if x == Rational::ZERO || x == Rational::ONE {
        return Err(Error::InvalidArgument(format!(
            "{x} is a root of the Farey tree and has no parents"
        )));
    }
    let (p, q) = (x.p as u128, x.q as u128);
    let (mut lo, mut hi) = ((0u128, 1u128), (1u128, 1u128));
    loop {
        let m = (lo.0 + hi.0, lo.1 + hi.1);
        if m.0 == p && m.1 == q {
            break;
        }
        // d_lo = x - lo > 0 and d_hi = hi - x > 0, scaled by denominators.
        let d_lo = p * lo.1 - q * lo.0;
        let d_hi = q * hi.0 - p * hi.1;
        if m.0 * q > p * m.1 {
            // x < m: move hi towards lo k times.
            let k = (d_hi - 1) / d_lo;
            hi = (hi.0 + k * lo.0, hi.1 + k * lo.1);
        } else {
            let k = (d_lo - 1) / d_hi;
            lo = (lo.0 + k * hi.0, lo.1 + k * hi.1);
        }
    }
    Ok(FareyParents {
        left: Rational::new(lo.0 as u64, lo.1 as u64)?,
        right: Rational::new(hi.0 as u64, hi.1 as u64)?,
    })
}

/// Depth-first Stern–Brocot enumeration of every fraction in `[lo, hi]`
/// with denominator at most `q_max`, returned in order of increasing
/// denominator (ties by value).
pub fn fractions_in_window(lo: f64, hi: f64, q_max: u64) -> Vec<Rational> {
    let mut out = Vec::new();
    if !(lo <= hi) || q_max == 0 {
        return out;
    }
    let inside = |r: &Rational| {
        let v = r.to_f64();
        v >= lo && v <= hi
    };
    for end in [Rational::ZERO, Rational::ONE] {
        if inside(&end) {
            out.push(end);
        }
    }
    let mut stack = vec![(Rational::ZERO, Rational::ONE)];
    while let Some((a, b)) = stack.pop() {
        let m = Rational {
            p: a.p + b.p,
            q: a.q + b.q,
        };
        if m.q > q_max {
            continue;
        }
        if inside(&m) {
            out.push(m);
        }
        if lo < m.to_f64() {
            stack.push((a, m));
        }
        if hi > m.to_f64() {
            stack.push((m, b));
        }
    }
    out.sort_by(|x, y| x.q.cmp(&y.q).then(x.cmp(y)));
    out
}
