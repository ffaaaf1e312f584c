//! Revenue benchmarks: the fixed-price benchmark `F2`, the best k-item
//! Vickrey revenue `maxV`, user tables, and derived benchmarks.

use std::fmt;
use std::ops::Mul;

use num_traits::{FromPrimitive, Signed, Zero};

use crate::error::{Error, Result};
use crate::grid::{BidGrid, BidVector};
use crate::rational::Rational;

/// `max_{2<=k<=n} k * v_(k)` over values sorted descending.
pub fn f2<T>(values: &[T]) -> Result<T>
where
    T: Clone + PartialOrd + FromPrimitive + Mul<Output = T>,
{
    if values.len() < 2 {
        return Err(Error::TooFewBidders(values.len()));
    }
    let sorted = sorted_desc(values);
    Ok(best_multiple(&sorted, 2..=sorted.len(), 0))
}

/// `max_{1<=k<n} k * v_(k+1)` over values sorted descending.
pub fn maxv<T>(values: &[T]) -> Result<T>
where
    T: Clone + PartialOrd + FromPrimitive + Mul<Output = T>,
{
    if values.len() < 2 {
        return Err(Error::TooFewBidders(values.len()));
    }
    let sorted = sorted_desc(values);
    Ok(best_multiple(&sorted, 1..=sorted.len() - 1, 1))
}

fn sorted_desc<T: Clone + PartialOrd>(values: &[T]) -> Vec<T> {
    let mut sorted = values.to_vec();
    // stable: ties keep index order
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sorted
}

/// `max over k of k * sorted[k - 1 + offset]`.
fn best_multiple<T>(sorted: &[T], ks: std::ops::RangeInclusive<usize>, offset: usize) -> T
where
    T: Clone + PartialOrd + FromPrimitive + Mul<Output = T>,
{
    let mut best: Option<T> = None;
    for k in ks {
        let term = T::from_usize(k).expect("small integer") * sorted[k - 1 + offset].clone();
        if best.as_ref().is_none_or(|b| term > *b) {
            best = Some(term);
        }
    }
    best.expect("range is non-empty")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    F2,
    MaxV,
}

impl Builtin {
    pub fn evaluate(self, values: &[Rational]) -> Result<Rational> {
        match self {
            Builtin::F2 => f2(values),
            Builtin::MaxV => maxv(values),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::F2 => "f2",
            Builtin::MaxV => "maxv",
        }
    }
}

impl std::str::FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f2" => Ok(Builtin::F2),
            "maxv" => Ok(Builtin::MaxV),
            other => Err(Error::InvalidArgument(format!("unknown benchmark {other:?}"))),
        }
    }
}

/// Anything that assigns a value to every grid point.
pub trait Benchmark {
    fn grid(&self) -> &BidGrid;
    fn value_at(&self, levels: &[usize]) -> Rational;
}

/// A builtin benchmark evaluated from its formula on demand, without a table.
#[derive(Clone, Debug)]
pub struct FormulaBenchmark {
    grid: BidGrid,
    which: Builtin,
}

impl FormulaBenchmark {
    pub fn new(grid: BidGrid, which: Builtin) -> Result<Self> {
        if grid.n() < 2 {
            return Err(Error::TooFewBidders(grid.n()));
        }
        Ok(Self { grid, which })
    }
}

impl Benchmark for FormulaBenchmark {
    fn grid(&self) -> &BidGrid {
        &self.grid
    }

    fn value_at(&self, levels: &[usize]) -> Rational {
        let values: Vec<Rational> = levels.iter().map(|&t| self.grid.level_values()[t].clone()).collect();
        self.which.evaluate(&values).expect("n >= 2 checked at construction")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchmarkKind {
    Builtin(Builtin),
    Custom,
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchmarkKind::Builtin(b) => f.write_str(b.name()),
            BenchmarkKind::Custom => f.write_str("custom"),
        }
    }
}

/// A benchmark tabulated at every grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkTable {
    grid: BidGrid,
    kind: BenchmarkKind,
    values: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonotoneViolation {
    pub lower: BidVector,
    pub upper: BidVector,
}

impl BenchmarkTable {
    /// Validated custom table: non-negative and monotone.
    pub fn from_values(grid: BidGrid, values: Vec<Rational>) -> Result<Self> {
        let table = Self::from_values_unchecked(grid, values)?;
        if let Some(p) = table.values.iter().position(|v| v.is_negative()) {
            return Err(Error::InvalidBenchmark(format!(
                "negative value {} at {}",
                table.values[p],
                table.grid.point(p)
            )));
        }
        if let Err(v) = check_monotone(&table) {
            return Err(Error::InvalidBenchmark(format!("not monotone: f{} > f{}", v.lower, v.upper)));
        }
        Ok(table)
    }

    /// Skips validation. Used for derived functions such as `max(0, c - f)`
    /// that are decreasing by construction.
    pub fn from_values_unchecked(grid: BidGrid, values: Vec<Rational>) -> Result<Self> {
        if values.len() != grid.num_points() {
            return Err(Error::InvalidBenchmark(format!(
                "{} values for {} grid points",
                values.len(),
                grid.num_points()
            )));
        }
        Ok(Self { grid, kind: BenchmarkKind::Custom, values })
    }

    pub fn zero(grid: BidGrid) -> Self {
        let values = vec![Rational::zero(); grid.num_points()];
        Self { grid, kind: BenchmarkKind::Custom, values }
    }

    pub fn grid(&self) -> &BidGrid {
        &self.grid
    }

    pub fn kind(&self) -> BenchmarkKind {
        self.kind
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn value(&self, index: usize) -> &Rational {
        &self.values[index]
    }

    pub fn value_of(&self, b: &BidVector) -> Result<&Rational> {
        self.grid.validate(b)?;
        Ok(&self.values[self.grid.point_index(b.levels())])
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(Zero::is_zero)
    }

    /// Pointwise multiple `c * f`; the result is a custom table.
    pub fn scaled(&self, c: &Rational) -> Self {
        Self {
            grid: self.grid.clone(),
            kind: BenchmarkKind::Custom,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

impl Benchmark for BenchmarkTable {
    fn grid(&self) -> &BidGrid {
        &self.grid
    }

    fn value_at(&self, levels: &[usize]) -> Rational {
        self.values[self.grid.point_index(levels)].clone()
    }
}

pub fn tabulate<B: Benchmark>(f: &B) -> BenchmarkTable {
    let grid = f.grid().clone();
    let values = (0..grid.num_points()).map(|p| f.value_at(&grid.point_levels(p))).collect();
    BenchmarkTable { grid, kind: BenchmarkKind::Custom, values }
}

pub fn builtin_table(grid: &BidGrid, which: Builtin) -> Result<BenchmarkTable> {
    let formula = FormulaBenchmark::new(grid.clone(), which)?;
    let mut table = tabulate(&formula);
    table.kind = BenchmarkKind::Builtin(which);
    Ok(table)
}

/// Exact check over all covering pairs; reports the first `(lower, upper)`
/// pair with `f(lower) > f(upper)`.
pub fn check_monotone(table: &BenchmarkTable) -> std::result::Result<(), MonotoneViolation> {
    let grid = &table.grid;
    for p in 0..grid.num_points() {
        for q in grid.upper_covers(p) {
            if table.values[p] > table.values[q] {
                return Err(MonotoneViolation { lower: grid.point(p), upper: grid.point(q) });
            }
        }
    }
    Ok(())
}

/// Invariance under coordinate permutations, via sorted-key canonicalization.
pub fn check_symmetric(table: &BenchmarkTable) -> bool {
    let grid = &table.grid;
    (0..grid.num_points()).all(|p| {
        let mut levels = grid.point_levels(p);
        levels.sort_unstable();
        table.values[p] == table.values[grid.point_index(&levels)]
    })
}

/// Limited-supply sandwich for supply `k`: in each bid vector the `n - k`
/// lowest bids (descending sort, ties by index) are raised to the k-th
/// highest bid for `f1`, and dropped for `f2`. Builtin formulas drop them to
/// zero; a custom table has no values below the grid, so they drop to level 0.
pub fn limited_supply_bounds(table: &BenchmarkTable, k: usize) -> Result<(BenchmarkTable, BenchmarkTable)> {
    let grid = &table.grid;
    let n = grid.n();
    if k < 2 || k >= n {
        return Err(Error::InvalidSupply { k, n });
    }
    let mut upper = Vec::with_capacity(grid.num_points());
    let mut lower = Vec::with_capacity(grid.num_points());
    for p in 0..grid.num_points() {
        let levels = grid.point_levels(p);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| levels[b].cmp(&levels[a]));
        let kth = levels[order[k - 1]];
        let dropped = &order[k..];

        let mut raised = levels.clone();
        for &i in dropped {
            raised[i] = kth;
        }
        upper.push(table.value_at(&raised));

        lower.push(match table.kind {
            BenchmarkKind::Builtin(which) => {
                let mut values: Vec<Rational> = levels.iter().map(|&t| grid.level_values()[t].clone()).collect();
                for &i in dropped {
                    values[i] = Rational::zero();
                }
                which.evaluate(&values)?
            }
            BenchmarkKind::Custom => {
                let mut floored = levels.clone();
                for &i in dropped {
                    floored[i] = 0;
                }
                table.value_at(&floored)
            }
        });
    }
    Ok((
        BenchmarkTable::from_values_unchecked(grid.clone(), upper)?,
        BenchmarkTable::from_values_unchecked(grid.clone(), lower)?,
    ))
}

/// `G(z) = f(1, z)`: pins bidder 0 to the lowest level and returns a table
/// over the remaining bidders.
pub fn fix_lowest_coordinate<B: Benchmark>(f: &B) -> Result<BenchmarkTable> {
    let outer = f.grid();
    if outer.n() < 3 {
        return Err(Error::InvalidArgument(format!(
            "pinning a coordinate needs at least 3 bidders, got {}",
            outer.n()
        )));
    }
    let inner = outer.with_bidders(outer.n() - 1)?;
    let mut full = vec![0; outer.n()];
    let values = (0..inner.num_points())
        .map(|p| {
            full[1..].copy_from_slice(&inner.point_levels(p));
            f.value_at(&full)
        })
        .collect();
    BenchmarkTable::from_values_unchecked(inner, values)
}

/// `H(z) = max(0, c - f(z))`, decreasing whenever `f` is increasing.
pub fn shifted_complement(table: &BenchmarkTable, c: &Rational) -> BenchmarkTable {
    let values = table
        .values
        .iter()
        .map(|v| {
            let d = c - v;
            if d.is_positive() {
                d
            } else {
                Rational::zero()
            }
        })
        .collect();
    BenchmarkTable { grid: table.grid.clone(), kind: BenchmarkKind::Custom, values }
}
