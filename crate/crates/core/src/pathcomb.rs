//! Exact counts of constrained lattice walks.
//!
//! A walk of half-length `n` is a word of `2n` unit steps. [`Step::Up`] is
//! the transmitted ("a") direction and [`Step::Down`] the reflected ("b")
//! direction. The end offset `p` is measured toward the transmitted side:
//! a walk ending at `p` has `n + p` up-steps and `n - p` down-steps.
//!
//! A *reflection* is any change of direction, counted with the walk's
//! entry direction taken as [`Step::Up`] (the neutron enters the lattice
//! travelling in the transmitted direction). Under this orientation the
//! closed-form counts below agree with [`enumerate_paths`] exactly.
//!
//! Everything here is exact integer arithmetic.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

/// Arbitrary-precision non-negative count.
pub type ExactCount = BigUint;

/// Largest half-length accepted by [`enumerate_paths`].
pub const ENUMERATION_LIMIT: u32 = 14;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathError {
    #[error("half-length {0} exceeds the enumeration budget of {ENUMERATION_LIMIT}")]
    EnumerationBudget(u32),
}

/// `C(n, k)`, zero outside `0 <= k <= n`.
pub fn binomial(n: u64, k: i64) -> ExactCount {
    if k < 0 || k as u64 > n {
        return BigUint::zero();
    }
    let k = (k as u64).min(n - k as u64);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Number of ways to write `total` as an ordered sum of `parts` positive
/// integers. Equals `C(total-1, parts-1)` with the convention that the empty
/// sum has exactly one composition.
pub fn compositions(total: i64, parts: i64) -> ExactCount {
    match (total, parts) {
        (0, 0) => BigUint::one(),
        (t, q) if t <= 0 || q <= 0 || q > t => BigUint::zero(),
        (t, q) => binomial((t - 1) as u64, q - 1),
    }
}

/// Unconstrained walks of `2n` steps from offset 0 to offset `p`:
/// `C(2n, n+p)`. Zero when `|p| > n`.
pub fn count_paths_to_node(n: u32, p: i64) -> ExactCount {
    if p.unsigned_abs() > n as u64 {
        return BigUint::zero();
    }
    binomial(2 * n as u64, n as i64 + p)
}

/// Walks of `2n` steps ending at `p` with exactly `k` reflections.
///
/// Even `k = 2m`: `C(n-p-1, m-1) · C(n+p, m)`; odd `k = 2m+1`:
/// `C(n-p-1, m) · C(n+p, m)`. The first factor counts compositions of the
/// `n-p` down-steps into runs, so `C(-1,-1)` is taken as one.
pub fn count_paths_with_reflections(n: u32, k: u32, p: i64) -> ExactCount {
    if p.unsigned_abs() > n as u64 {
        return BigUint::zero();
    }
    let ups = n as i64 + p;
    let downs = n as i64 - p;
    let m = (k / 2) as i64;
    if k.is_multiple_of(2) {
        // ends travelling up: m+1 up-runs (one seeded by the entry), m down-runs
        compositions(downs, m) * compositions(ups + 1, m + 1)
    } else {
        // ends travelling down: m+1 runs of each
        compositions(downs, m + 1) * compositions(ups + 1, m + 1)
    }
}

/// The `n`-th Catalan number `C(2n, n) / (n+1)`.
pub fn catalan(n: u32) -> ExactCount {
    binomial(2 * n as u64, n as i64) / (n as u64 + 1)
}

/// Narayana number: Dyck paths of length `2n` with exactly `k` peaks,
/// `C(n,k) · C(n,k-1) / n`. The empty path gives `N(0,0) = 1`; otherwise
/// zero for `k` outside `[1, n]`.
pub fn narayana(n: u32, k: u32) -> ExactCount {
    if n == 0 && k == 0 {
        return BigUint::one();
    }
    if n == 0 || k == 0 || k > n {
        return BigUint::zero();
    }
    binomial(n as u64, k as i64) * binomial(n as u64, k as i64 - 1) / n
}

/// Memo table for height-bounded Dyck counts `H(n, k, h)`.
///
/// Uses the last-return decomposition: a path of half-length `n+1` is a
/// bounded path of half-length `i` followed by `U · (inner path of
/// half-length n-i, bound h-1) · D`. An empty inner path contributes the
/// single peak `UD`.
#[derive(Debug, Default, Clone)]
pub struct BoundedDyckTable {
    memo: HashMap<(u32, u32, u32), ExactCount>,
}

impl BoundedDyckTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, n: u32, k: u32, h: u32) -> ExactCount {
        if n == 0 {
            return if k == 0 { BigUint::one() } else { BigUint::zero() };
        }
        if k == 0 || h == 0 || k > n {
            return BigUint::zero();
        }
        // the bound cannot bind above height n
        let h = h.min(n);
        if let Some(v) = self.memo.get(&(n, k, h)) {
            return v.clone();
        }
        let m = n - 1;
        let mut total = BigUint::zero();
        for i in 0..=m {
            let inner = m - i;
            for j in 0..=k.min(i) {
                let head = self.get(i, j, h);
                if head.is_zero() {
                    continue;
                }
                let tail = if inner == 0 {
                    if k - j == 1 {
                        BigUint::one()
                    } else {
                        BigUint::zero()
                    }
                } else {
                    self.get(inner, k - j, h - 1)
                };
                if !tail.is_zero() {
                    total += head * tail;
                }
            }
        }
        self.memo.insert((n, k, h), total.clone());
        total
    }
}

/// Dyck paths of length `2n` with exactly `k` peaks that never exceed
/// height `h`.
pub fn bounded_peak_dyck(n: u32, k: u32, h: u32) -> ExactCount {
    BoundedDyckTable::new().get(n, k, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    Up,
    Down,
}

/// A walk as an explicit list of steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StepWord(pub Vec<Step>);

impl StepWord {
    pub fn end_offset(&self) -> i64 {
        let height: i64 = self.0.iter().map(|s| if *s == Step::Up { 1 } else { -1 }).sum();
        height / 2
    }

    /// Direction changes, including a change at the first step when the walk
    /// starts downward.
    pub fn reflections(&self) -> u32 {
        let mut prev = Step::Up;
        let mut count = 0;
        for &s in &self.0 {
            if s != prev {
                count += 1;
            }
            prev = s;
        }
        count
    }

    pub fn peaks(&self) -> u32 {
        self.0
            .windows(2)
            .filter(|w| w[0] == Step::Up && w[1] == Step::Down)
            .count() as u32
    }

    pub fn max_height(&self) -> i64 {
        let mut y = 0i64;
        let mut top = 0;
        for &s in &self.0 {
            y += if s == Step::Up { 1 } else { -1 };
            top = top.max(y);
        }
        top
    }
}

impl std::fmt::Display for StepWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for s in &self.0 {
            f.write_str(if *s == Step::Up { "U" } else { "D" })?;
        }
        Ok(())
    }
}

/// Constraint bag for [`enumerate_paths`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathSpec {
    pub half_length: u32,
    pub end_offset: Option<i64>,
    pub reflections: Option<u32>,
    pub peaks: Option<u32>,
    /// Never drop below height 0 (forces end offset 0).
    pub dyck: bool,
    pub height_bound: Option<u32>,
}

impl PathSpec {
    pub fn new(half_length: u32) -> Self {
        Self { half_length, ..Self::default() }
    }

    pub fn dyck(half_length: u32) -> Self {
        Self { half_length, dyck: true, end_offset: Some(0), ..Self::default() }
    }

    pub fn ending_at(mut self, p: i64) -> Self {
        self.end_offset = Some(p);
        self
    }

    pub fn with_reflections(mut self, k: u32) -> Self {
        self.reflections = Some(k);
        self
    }

    pub fn with_peaks(mut self, k: u32) -> Self {
        self.peaks = Some(k);
        self
    }

    pub fn bounded_by(mut self, h: u32) -> Self {
        self.height_bound = Some(h);
        self
    }

    fn accepts(&self, w: &StepWord) -> bool {
        self.end_offset.is_none_or(|p| w.end_offset() == p)
            && self.reflections.is_none_or(|k| w.reflections() == k)
            && self.peaks.is_none_or(|k| w.peaks() == k)
    }
}

/// Exhaustively lists every walk of `2·half_length` steps satisfying the
/// constraints. Height constraints prune the search; the remaining filters
/// are applied to complete words.
pub fn enumerate_paths(spec: &PathSpec) -> Result<Vec<StepWord>, PathError> {
    let n = spec.half_length;
    if n > ENUMERATION_LIMIT {
        return Err(PathError::EnumerationBudget(n));
    }
    let len = 2 * n as usize;
    let mut out = Vec::new();
    let mut word = Vec::with_capacity(len);
    descend(spec, len, 0, &mut word, &mut out);
    Ok(out)
}

fn descend(spec: &PathSpec, len: usize, height: i64, word: &mut Vec<Step>, out: &mut Vec<StepWord>) {
    let remaining = (len - word.len()) as i64;
    if let Some(p) = spec.end_offset {
        if (2 * p - height).abs() > remaining {
            return;
        }
    }
    if remaining == 0 {
        let w = StepWord(word.clone());
        if spec.accepts(&w) {
            out.push(w);
        }
        return;
    }
    for step in [Step::Up, Step::Down] {
        let next = height + if step == Step::Up { 1 } else { -1 };
        if spec.dyck && next < 0 {
            continue;
        }
        if spec.height_bound.is_some_and(|h| next > h as i64) {
            continue;
        }
        word.push(step);
        descend(spec, len, next, word, out);
        word.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn binomial_basics() {
        assert_eq!(binomial(4, 2), big(6));
        assert_eq!(binomial(5, -1), big(0));
        assert_eq!(binomial(10, 10), big(1));
        assert_eq!(binomial(3, 4), big(0));
        assert_eq!(binomial(0, 0), big(1));
    }

    #[test]
    fn compositions_convention() {
        assert_eq!(compositions(0, 0), big(1));
        assert_eq!(compositions(0, 1), big(0));
        assert_eq!(compositions(5, 0), big(0));
        assert_eq!(compositions(5, 2), big(4));
    }

    #[test]
    fn node_counts() {
        assert_eq!(count_paths_to_node(2, 2), big(1));
        assert_eq!(count_paths_to_node(2, 1), big(4));
        assert_eq!(count_paths_to_node(3, 0), big(20));
        assert_eq!(count_paths_to_node(3, 4), big(0));
    }

    #[test]
    fn reflection_counts() {
        assert_eq!(count_paths_with_reflections(2, 0, 2), big(1));
        let total: BigUint = (0..=6).map(|k| count_paths_with_reflections(3, k, 1)).sum();
        assert_eq!(total, big(15));
    }

    #[test]
    fn catalan_and_narayana() {
        assert_eq!(catalan(0), big(1));
        assert_eq!(catalan(3), big(5));
        assert_eq!(catalan(10), big(16796));
        for n in 1..8 {
            assert_eq!(narayana(n, 1), big(1));
        }
        assert_eq!(narayana(4, 2), big(6));
        assert_eq!(narayana(4, 0), big(0));
        assert_eq!(narayana(0, 0), big(1));
        assert_eq!(narayana(4, 5), big(0));
    }

    #[test]
    fn bounded_dyck_edges() {
        assert_eq!(bounded_peak_dyck(0, 0, 5), big(1));
        assert_eq!(bounded_peak_dyck(0, 1, 5), big(0));
        assert_eq!(bounded_peak_dyck(3, 0, 3), big(0));
        assert_eq!(bounded_peak_dyck(3, 1, 0), big(0));
        // UDUD is the only height-1 path of length 4
        assert_eq!(bounded_peak_dyck(2, 1, 1), big(0));
        assert_eq!(bounded_peak_dyck(2, 2, 1), big(1));
        assert_eq!(bounded_peak_dyck(5, 3, 5), narayana(5, 3));
    }

    #[test]
    fn enumeration_examples() {
        let one = enumerate_paths(&PathSpec::dyck(1)).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].to_string(), "UD");
        assert_eq!(enumerate_paths(&PathSpec::new(2).ending_at(1)).unwrap().len(), 4);
        assert_eq!(enumerate_paths(&PathSpec::dyck(3)).unwrap().len(), 5);
        assert_eq!(
            enumerate_paths(&PathSpec::new(15)),
            Err(PathError::EnumerationBudget(15))
        );
    }

    #[test]
    fn word_statistics() {
        let w = StepWord(vec![Step::Up, Step::Up, Step::Down, Step::Up]);
        assert_eq!(w.end_offset(), 1);
        assert_eq!(w.reflections(), 2);
        assert_eq!(w.peaks(), 1);
        assert_eq!(w.max_height(), 2);
        let starts_down = StepWord(vec![Step::Down, Step::Up]);
        assert_eq!(starts_down.reflections(), 2);
    }
}
