//! Periodic symbolic sequences over `{L, R}`.
//!
//! A [`SymbolicWord`] is a finite block standing for its infinite periodic
//! extension. Bits are packed (`R = 1`) so rotations and comparisons stay
//! cheap during exhaustive enumeration.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::farey::{farey_parents, gcd, Rational};

/// Exhaustive maximin/minimax checks enumerate `W_{p,q}` only up to this length.
pub const ENUMERATION_LIMIT: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Symbol {
    L,
    R,
}

impl Symbol {
    pub fn from_state(x: f64) -> Option<Symbol> {
        if x < 0.0 {
            Some(Symbol::L)
        } else if x > 0.0 {
            Some(Symbol::R)
        } else {
            None
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::L => 'L',
            Symbol::R => 'R',
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SymbolicWord {
    bits: Vec<u64>,
    len: usize,
}

impl SymbolicWord {
    pub fn new(symbols: &[Symbol]) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidArgument("empty symbolic word".into()));
        }
        Ok(Self::from_fn(symbols.len(), |i| symbols[i] == Symbol::R))
    }

    fn from_fn(len: usize, mut is_r: impl FnMut(usize) -> bool) -> Self {
        let mut bits = vec![0u64; len.div_ceil(64)];
        for i in 0..len {
            if is_r(i) {
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        SymbolicWord { bits, len }
    }

    /// `L^n R`.
    pub fn l_power_r(n: usize) -> Self {
        Self::from_fn(n + 1, |i| i == n)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    fn bit(&self, i: usize) -> bool {
        (self.bits[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn get(&self, i: usize) -> Symbol {
        if self.bit(i) {
            Symbol::R
        } else {
            Symbol::L
        }
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    pub fn r_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn l_count(&self) -> usize {
        self.len - self.r_count()
    }

    pub fn concat(&self, other: &SymbolicWord) -> SymbolicWord {
        let n = self.len;
        Self::from_fn(n + other.len, |i| if i < n { self.bit(i) } else { other.bit(i - n) })
    }

    /// Cyclic rotation: the first symbol moves to the back, `k` times.
    pub fn shift(&self, k: usize) -> SymbolicWord {
        let k = k % self.len;
        Self::from_fn(self.len, |i| self.bit((i + k) % self.len))
    }

    /// Lexicographic order of the infinite periodic extensions.
    pub fn compare(&self, other: &SymbolicWord) -> Ordering {
        let (a, b) = (self.len, other.len);
        let horizon = a / gcd(a as u64, b as u64) as usize * b;
        for i in 0..horizon {
            match self.bit(i % a).cmp(&other.bit(i % b)) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }

    /// Offset `k` such that `shift(k)` is the least rotation (Booth).
    pub fn least_rotation_offset(&self) -> usize {
        booth(self.len, |i| self.bit(i))
    }

    fn greatest_rotation_offset(&self) -> usize {
        booth(self.len, |i| !self.bit(i))
    }

    pub fn minimal_rotation(&self) -> SymbolicWord {
        self.shift(self.least_rotation_offset())
    }

    pub fn maximal_rotation(&self) -> SymbolicWord {
        self.shift(self.greatest_rotation_offset())
    }

    pub fn is_minimal(&self) -> bool {
        self.minimal_rotation() == *self
    }

    /// Same rotation class (equal as cyclic words of the same length).
    pub fn same_cycle(&self, other: &SymbolicWord) -> bool {
        self.len == other.len && self.minimal_rotation() == other.minimal_rotation()
    }

    /// Not a repetition of a strictly shorter block.
    pub fn is_primitive(&self) -> bool {
        let n = self.len;
        (1..n)
            .filter(|d| n.is_multiple_of(*d))
            .all(|d| (0..n).any(|i| self.bit(i) != self.bit((i + d) % n)))
    }

    /// `(#R) / length`, reduced.
    pub fn eta_number(&self) -> Rational {
        Rational::new(self.r_count() as u64, self.len as u64).expect("word length is non-zero")
    }

    /// Replaces every `L` by `on_l` and every `R` by `on_r`.
    pub fn substitute(&self, on_l: &SymbolicWord, on_r: &SymbolicWord) -> SymbolicWord {
        let mut out: Vec<Symbol> = Vec::new();
        for s in self.symbols() {
            let block = if s == Symbol::L { on_l } else { on_r };
            out.extend(block.symbols());
        }
        SymbolicWord::new(&out).expect("substitution of non-empty words")
    }

    fn cmp_finite(&self, other: &SymbolicWord) -> Ordering {
        debug_assert_eq!(self.len, other.len);
        for i in 0..self.len {
            match self.bit(i).cmp(&other.bit(i)) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }

    fn coprime_primitive(&self) -> Result<()> {
        if !self.is_primitive() {
            return Err(Error::InvalidArgument(format!("{self} is not primitive")));
        }
        if gcd(self.r_count() as u64, self.len as u64) != 1 {
            return Err(Error::InvalidArgument(format!(
                "{self}: gcd(#R, length) != 1"
            )));
        }
        Ok(())
    }

    /// Checks whether the sorted shifts form an arithmetic progression of
    /// indices mod `q`; returns the common step `k` when they do.
    pub fn pq_ordering(&self) -> Result<Option<usize>> {
        if !self.is_primitive() {
            return Err(Error::InvalidArgument(format!("{self} is not primitive")));
        }
        let q = self.len;
        if q == 1 {
            return Ok(Some(0));
        }
        let shifts: Vec<SymbolicWord> = (0..q).map(|i| self.shift(i)).collect();
        let mut order: Vec<usize> = (0..q).collect();
        order.sort_by(|&i, &j| shifts[i].cmp_finite(&shifts[j]));
        let k = (order[1] + q - order[0]) % q;
        let progression = order.windows(2).all(|w| (w[1] + q - w[0]) % q == k);
        Ok(progression.then_some(k))
    }

    pub fn is_pq_ordered(&self) -> Result<bool> {
        Ok(self.pq_ordering()?.is_some())
    }

    /// Exhaustive maximin test over `W_{p,q}`.
    pub fn is_maximin(&self) -> Result<bool> {
        self.coprime_primitive()?;
        let classes = enumerate_wpq(self.r_count(), self.len, true)?;
        let best = classes
            .iter()
            .max_by(|a, b| a.cmp_finite(b))
            .expect("W_{p,q} is non-empty");
        Ok(self.minimal_rotation() == *best)
    }

    /// Exhaustive minimax test over `W_{p,q}`.
    pub fn is_minimax(&self) -> Result<bool> {
        self.coprime_primitive()?;
        let classes = enumerate_wpq(self.r_count(), self.len, true)?;
        let best = classes
            .iter()
            .map(|w| w.maximal_rotation())
            .min_by(|a, b| a.cmp_finite(b))
            .expect("W_{p,q} is non-empty");
        Ok(self.maximal_rotation() == best)
    }
}

/// Booth's least-rotation algorithm on an implicit bit string.
fn booth(n: usize, bit: impl Fn(usize) -> bool) -> usize {
    let at = |i: isize| bit(i as usize % n) as u8;
    let mut f: Vec<isize> = vec![-1; 2 * n];
    let mut k: isize = 0;
    for j in 1..2 * n as isize {
        let sj = at(j);
        let mut i = f[(j - k - 1) as usize];
        while i != -1 && sj != at(k + i + 1) {
            if sj < at(k + i + 1) {
                k = j - i - 1;
            }
            i = f[i as usize];
        }
        if sj != at(k + i + 1) {
            if sj < at(k) {
                k = j;
            }
            f[(j - k) as usize] = -1;
        } else {
            f[(j - k) as usize] = i + 1;
        }
    }
    k as usize % n
}

impl fmt::Display for SymbolicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.symbols() {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for SymbolicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymbolicWord({self})")
    }
}

impl FromStr for SymbolicWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let symbols = s
            .trim()
            .chars()
            .map(|c| match c {
                'L' | 'l' => Ok(Symbol::L),
                'R' | 'r' => Ok(Symbol::R),
                other => Err(Error::InvalidArgument(format!(
                    "invalid symbol '{other}' in word '{s}'"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        SymbolicWord::new(&symbols)
    }
}

impl Serialize for SymbolicWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SymbolicWord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All length-`q` words with exactly `p` symbols `R`; with `up_to_rotation`
/// only the minimal representative of each rotation class is kept.
pub fn enumerate_wpq(p: usize, q: usize, up_to_rotation: bool) -> Result<Vec<SymbolicWord>> {
    if q == 0 || p > q {
        return Err(Error::InvalidArgument(format!(
            "W_{{p,q}} needs 0 <= p <= q and q >= 1 (got p={p}, q={q})"
        )));
    }
    if q > ENUMERATION_LIMIT {
        return Err(Error::Capacity {
            q,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut out = Vec::new();
    // Gosper's hack over q-bit masks with p ones, visited in increasing order.
    let limit = 1u64 << q;
    let mut mask: u64 = if p == 0 { 0 } else { (1u64 << p) - 1 };
    loop {
        let w = SymbolicWord {
            bits: vec![mask],
            len: q,
        };
        if !up_to_rotation || w.is_minimal() {
            out.push(w);
        }
        if mask == 0 {
            break;
        }
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
        if mask >= limit {
            break;
        }
    }
    out.sort_by(|a, b| a.cmp_finite(b));
    Ok(out)
}

/// Word at node `x` of the Farey tree of symbolic sequences, in minimal form.
pub fn farey_word(x: Rational) -> Result<SymbolicWord> {
    if !x.in_unit_interval() {
        return Err(Error::InvalidArgument(format!("{x} lies outside [0, 1]")));
    }
    let leaf_l = SymbolicWord::new(&[Symbol::L])?;
    let leaf_r = SymbolicWord::new(&[Symbol::R])?;
    if x == Rational::ZERO {
        return Ok(leaf_l);
    }
    if x == Rational::ONE {
        return Ok(leaf_r);
    }
    // Walk the tree from the root, carrying the words of the current
    // Farey interval ends.
    let target = farey_parents(x)?;
    let (mut lo, mut hi) = ((Rational::ZERO, leaf_l), (Rational::ONE, leaf_r));
    loop {
        let m = crate::farey::mediant(lo.0, hi.0)?;
        let word = lo.1.concat(&hi.1);
        if m == x {
            debug_assert_eq!((lo.0, hi.0), (target.left, target.right));
            debug_assert!(word.is_minimal(), "Farey word {word} is not minimal");
            return Ok(word);
        }
        if x < m {
            hi = (m, word);
        } else {
            lo = (m, word);
        }
    }
}
