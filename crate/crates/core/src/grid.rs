//! The discrete geometric bid domain, its equal-revenue weights, and
//! upward-closed subsets of the bid space.
//!
//! A grid with ratio `delta` and `num_levels = N + 1` has level values
//! `(1 + delta)^t` for `t = 0..=N`. Bid vectors are stored as level indices.
//! Points of the full space are numbered in mixed radix with bidder 0 as the
//! most significant digit, so raising any coordinate raises the index.

use std::cmp::Ordering;
use std::fmt;

use fixedbitset::FixedBitSet;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{pow, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BidGrid {
    delta: Rational,
    num_levels: usize,
    n: usize,
    values: Vec<Rational>,
    weights: Vec<Rational>,
}

impl BidGrid {
    pub fn new(delta: Rational, num_levels: usize, n: usize) -> Result<Self> {
        if !delta.is_positive() {
            return Err(Error::InvalidGrid(format!("delta must be positive, got {delta}")));
        }
        if num_levels == 0 {
            return Err(Error::InvalidGrid("at least one level is required".into()));
        }
        if n == 0 {
            return Err(Error::InvalidGrid("at least one bidder is required".into()));
        }
        let ratio = Rational::one() + &delta;
        let mut values = Vec::with_capacity(num_levels);
        let mut current = Rational::one();
        for _ in 0..num_levels {
            values.push(current.clone());
            current *= &ratio;
        }
        let top = num_levels - 1;
        let weights = (0..num_levels)
            .map(|t| if t == top { Rational::one() / &values[top] } else { &delta / (&values[t] * &ratio) })
            .collect();
        Ok(Self { delta, num_levels, n, values, weights })
    }

    /// Same levels, different number of bidders.
    pub fn with_bidders(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("at least one bidder is required".into()));
        }
        Ok(Self { n, ..self.clone() })
    }

    pub fn delta(&self) -> &Rational {
        &self.delta
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    pub fn top_level(&self) -> usize {
        self.num_levels - 1
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn level_value(&self, t: usize) -> Result<&Rational> {
        self.values.get(t).ok_or(Error::LevelOutOfRange { level: t, max: self.top_level() })
    }

    pub fn level_values(&self) -> &[Rational] {
        &self.values
    }

    /// Equal-revenue mass of level `t`: `delta / (1+delta)^(t+1)` below the
    /// top level and `(1+delta)^(-N)` at the top.
    pub fn weight_level(&self, t: usize) -> Result<&Rational> {
        self.weights.get(t).ok_or(Error::LevelOutOfRange { level: t, max: self.top_level() })
    }

    pub fn level_weights(&self) -> &[Rational] {
        &self.weights
    }

    /// Product of the per-coordinate weights.
    pub fn weight_vector(&self, b: &BidVector) -> Result<Rational> {
        self.validate(b)?;
        Ok(self.weight_of_levels(b.levels()))
    }

    pub(crate) fn weight_of_levels(&self, levels: &[usize]) -> Rational {
        levels.iter().fold(Rational::one(), |acc, &t| acc * &self.weights[t])
    }

    /// Number of points in the full bid space, saturating at `usize::MAX`.
    pub fn num_points(&self) -> usize {
        checked_power(self.num_levels, self.n).unwrap_or(usize::MAX)
    }

    /// Number of `(n-1)`-dimensional "other bids" vectors.
    pub fn num_others(&self) -> usize {
        checked_power(self.num_levels, self.n - 1).unwrap_or(usize::MAX)
    }

    pub fn validate(&self, b: &BidVector) -> Result<()> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: b.len() });
        }
        if let Some(&t) = b.levels().iter().find(|&&t| t >= self.num_levels) {
            return Err(Error::LevelOutOfRange { level: t, max: self.top_level() });
        }
        Ok(())
    }

    pub fn point_index(&self, levels: &[usize]) -> usize {
        levels.iter().fold(0, |acc, &t| acc * self.num_levels + t)
    }

    pub fn point_levels(&self, index: usize) -> Vec<usize> {
        decode(index, self.n, self.num_levels)
    }

    pub fn point(&self, index: usize) -> BidVector {
        BidVector::new(self.point_levels(index))
    }

    /// Index stride of coordinate `i`.
    pub fn stride(&self, i: usize) -> usize {
        self.num_levels.pow((self.n - 1 - i) as u32)
    }

    /// Splits a point into (index of `b_{-i}`, level of `b_i`).
    pub fn split(&self, index: usize, i: usize) -> (usize, usize) {
        let stride = self.stride(i);
        let high = index / (stride * self.num_levels);
        let level = (index / stride) % self.num_levels;
        let low = index % stride;
        (high * stride + low, level)
    }

    /// Inverse of [`split`](Self::split).
    pub fn join(&self, i: usize, others: usize, level: usize) -> usize {
        let stride = self.stride(i);
        let high = others / stride;
        let low = others % stride;
        (high * self.num_levels + level) * stride + low
    }

    pub fn others_levels(&self, others: usize) -> Vec<usize> {
        decode(others, self.n - 1, self.num_levels)
    }

    pub fn others_index(&self, levels: &[usize]) -> usize {
        self.point_index(levels)
    }

    pub fn weight_others(&self, others: usize) -> Rational {
        self.weight_of_levels(&self.others_levels(others))
    }

    pub fn points(&self) -> impl Iterator<Item = BidVector> + '_ {
        (0..self.num_points()).map(move |idx| self.point(idx))
    }

    /// Weights of every point, indexed by point index.
    pub fn point_weights(&self) -> Vec<Rational> {
        (0..self.num_points()).map(|idx| self.weight_of_levels(&self.point_levels(idx))).collect()
    }

    /// Weights of every `b_{-i}` vector, indexed by others index.
    pub fn others_weights(&self) -> Vec<Rational> {
        (0..self.num_others()).map(|o| self.weight_others(o)).collect()
    }

    /// Indices of the points directly above `index` (one coordinate one level up).
    pub fn upper_covers(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        let levels = self.point_levels(index);
        (0..self.n).filter(move |&i| levels[i] < self.top_level()).map(move |i| index + self.stride(i))
    }
}

fn checked_power(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

fn decode(mut index: usize, dims: usize, radix: usize) -> Vec<usize> {
    let mut levels = vec![0; dims];
    for slot in levels.iter_mut().rev() {
        *slot = index % radix;
        index /= radix;
    }
    levels
}

/// A bid vector as level indices. Ordered componentwise.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BidVector(Vec<usize>);

impl BidVector {
    pub fn new(levels: Vec<usize>) -> Self {
        Self(levels)
    }

    pub fn levels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_levels(self) -> Vec<usize> {
        self.0
    }
}

impl PartialOrd for BidVector {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.0.len() != other.0.len() {
            return None;
        }
        let le = self.0.iter().zip(&other.0).all(|(a, b)| a <= b);
        let ge = self.0.iter().zip(&other.0).all(|(a, b)| a >= b);
        match (le, ge) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (false, false) => None,
        }
    }
}

impl From<Vec<usize>> for BidVector {
    fn from(levels: Vec<usize>) -> Self {
        Self(levels)
    }
}

impl fmt::Display for BidVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, t) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, ")")
    }
}

/// True iff `members` (a point-indexed indicator) is closed under
/// componentwise increase.
pub fn is_upward_closed_bits(grid: &BidGrid, members: &FixedBitSet) -> bool {
    members.ones().all(|p| grid.upper_covers(p).all(|q| members.contains(q)))
}

/// Set-of-vectors form of the closure check.
pub fn is_upward_closed(grid: &BidGrid, vectors: &[BidVector]) -> Result<bool> {
    let mut bits = FixedBitSet::with_capacity(grid.num_points());
    for b in vectors {
        grid.validate(b)?;
        bits.insert(grid.point_index(b.levels()));
    }
    Ok(is_upward_closed_bits(grid, &bits))
}

/// An upward-closed subset of the bid space, one bit per grid point.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Upset {
    members: FixedBitSet,
}

impl Upset {
    pub fn new(grid: &BidGrid, members: FixedBitSet) -> Result<Self> {
        if members.len() != grid.num_points() {
            return Err(Error::InvalidArgument(format!(
                "indicator has {} bits, grid has {} points",
                members.len(),
                grid.num_points()
            )));
        }
        if let Some(p) = members.ones().find(|&p| grid.upper_covers(p).any(|q| !members.contains(q))) {
            return Err(Error::NotUpwardClosed(format!("{} is a member but a point above it is not", grid.point(p))));
        }
        Ok(Self { members })
    }

    pub fn from_vectors(grid: &BidGrid, vectors: &[BidVector]) -> Result<Self> {
        let mut bits = FixedBitSet::with_capacity(grid.num_points());
        for b in vectors {
            grid.validate(b)?;
            bits.insert(grid.point_index(b.levels()));
        }
        Self::new(grid, bits)
    }

    /// The smallest upset containing every vector given.
    pub fn generated_by(grid: &BidGrid, vectors: &[BidVector]) -> Result<Self> {
        let mut bits = FixedBitSet::with_capacity(grid.num_points());
        for b in vectors {
            grid.validate(b)?;
        }
        for p in 0..grid.num_points() {
            let levels = grid.point_levels(p);
            if vectors.iter().any(|b| b.levels().iter().zip(&levels).all(|(lo, t)| lo <= t)) {
                bits.insert(p);
            }
        }
        Ok(Self { members: bits })
    }

    pub fn empty(grid: &BidGrid) -> Self {
        Self { members: FixedBitSet::with_capacity(grid.num_points()) }
    }

    pub fn full(grid: &BidGrid) -> Self {
        let mut members = FixedBitSet::with_capacity(grid.num_points());
        members.insert_range(..);
        Self { members }
    }

    pub(crate) fn from_bits_unchecked(members: FixedBitSet) -> Self {
        Self { members }
    }

    pub fn bits(&self) -> &FixedBitSet {
        &self.members
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.contains(index)
    }

    pub fn contains_vector(&self, grid: &BidGrid, b: &BidVector) -> bool {
        grid.validate(b).is_ok() && self.members.contains(grid.point_index(b.levels()))
    }

    pub fn len(&self) -> usize {
        self.members.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_clear()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.ones()
    }

    pub fn vectors(&self, grid: &BidGrid) -> Vec<BidVector> {
        self.members.ones().map(|p| grid.point(p)).collect()
    }

    pub fn union(&self, other: &Upset) -> Upset {
        let mut members = self.members.clone();
        members.union_with(&other.members);
        Upset { members }
    }

    pub fn intersection(&self, other: &Upset) -> Upset {
        let mut members = self.members.clone();
        members.intersect_with(&other.members);
        Upset { members }
    }

    pub fn is_subset(&self, other: &Upset) -> bool {
        self.members.is_subset(&other.members)
    }

    /// `S↓i`: the `b_{-i}` vectors that extend to a member of `S`. For an
    /// upset that is exactly the set of `b_{-i}` with `(b_{-i}, N)` in `S`.
    pub fn project(&self, grid: &BidGrid, i: usize) -> FixedBitSet {
        let top = grid.top_level();
        let mut out = FixedBitSet::with_capacity(grid.num_others());
        for o in 0..grid.num_others() {
            if self.members.contains(grid.join(i, o, top)) {
                out.insert(o);
            }
        }
        out
    }

    /// Invariant under every permutation of coordinates.
    pub fn is_symmetric(&self, grid: &BidGrid) -> bool {
        is_permutation_invariant(grid, &self.members)
    }
}

fn is_permutation_invariant(grid: &BidGrid, members: &FixedBitSet) -> bool {
    // adjacent transpositions generate the symmetric group
    members.ones().all(|p| {
        let levels = grid.point_levels(p);
        (0..grid.n().saturating_sub(1)).all(|i| {
            let mut swapped = levels.clone();
            swapped.swap(i, i + 1);
            members.contains(grid.point_index(&swapped))
        })
    })
}

/// Guard for exhaustive enumeration over the bid space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationLimits {
    pub max_points: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self { max_points: 16 }
    }
}

impl EnumerationLimits {
    pub fn admits(&self, grid: &BidGrid) -> bool {
        grid.num_points() <= self.max_points
    }

    fn check(&self, grid: &BidGrid) -> Result<()> {
        if self.admits(grid) {
            Ok(())
        } else {
            Err(Error::DomainTooLarge { points: grid.num_points(), cap: self.max_points })
        }
    }
}

/// Every upward-closed subset of the grid exactly once, `∅` first.
///
/// Points are decided from the highest index down; a point may join only when
/// all of its upper covers already have, so every branch yields a valid upset.
pub fn enumerate_upsets(grid: &BidGrid, limits: EnumerationLimits) -> Result<Vec<Upset>> {
    limits.check(grid)?;
    let total = grid.num_points();
    let covers: Vec<Vec<usize>> = (0..total).map(|p| grid.upper_covers(p).collect()).collect();
    let mut out = Vec::new();
    let mut current = FixedBitSet::with_capacity(total);
    descend(total, &covers, &mut current, &mut out);
    Ok(out)
}

fn descend(next: usize, covers: &[Vec<usize>], current: &mut FixedBitSet, out: &mut Vec<Upset>) {
    if next == 0 {
        out.push(Upset { members: current.clone() });
        return;
    }
    let p = next - 1;
    descend(p, covers, current, out);
    if covers[p].iter().all(|&q| current.contains(q)) {
        current.insert(p);
        descend(p, covers, current, out);
        current.set(p, false);
    }
}

/// Upsets invariant under all coordinate permutations.
pub fn enumerate_symmetric_upsets(grid: &BidGrid, limits: EnumerationLimits) -> Result<Vec<Upset>> {
    Ok(enumerate_upsets(grid, limits)?.into_iter().filter(|s| s.is_symmetric(grid)).collect())
}

/// `Σ_{t >= k} w(t)`, which telescopes to `(1+delta)^(-k)`.
pub fn tail_weight(grid: &BidGrid, k: usize) -> Rational {
    grid.level_weights().iter().skip(k).fold(Rational::zero(), |acc, w| acc + w)
}

/// `(1+delta)^t` computed directly rather than read from the level table.
pub fn level_value_direct(delta: &Rational, t: usize) -> Rational {
    pow(&(Rational::one() + delta), t)
}
