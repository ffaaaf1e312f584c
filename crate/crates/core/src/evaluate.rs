//! Bid-independent auctions given by per-bidder price distributions, their
//! expected revenue and competitive ratio, and the rescaling reduction that
//! lifts an n-bidder auction to n+1 bidders.

use std::fmt;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::benchmark::BenchmarkTable;
use crate::error::{Error, Result};
use crate::grid::{level_value_direct, BidGrid, BidVector};
use crate::rational::{format_rational, Rational};

/// `z[i][others][level]`: probability of offering bidder `i` the price at
/// `level` when the others bid `others`. The key never includes `b_i`, so
/// every profile is bid-independent and hence truthful.
#[derive(Clone, Debug, PartialEq)]
pub struct AuctionProfile {
    grid: BidGrid,
    z: Vec<Vec<Vec<Rational>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileViolation {
    pub bidder: usize,
    pub others: Vec<usize>,
    pub reason: String,
}

impl fmt::Display for ProfileViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bidder {} at others {:?}: {}", self.bidder, self.others, self.reason)
    }
}

impl AuctionProfile {
    pub fn zero(grid: BidGrid) -> Self {
        let z = vec![vec![vec![Rational::zero(); grid.num_levels()]; grid.num_others()]; grid.n()];
        Self { grid, z }
    }

    /// Builds a profile, checking shape and probability bounds.
    pub fn new(grid: BidGrid, z: Vec<Vec<Vec<Rational>>>) -> Result<Self> {
        let shape_ok = z.len() == grid.n()
            && z.iter().all(|zi| zi.len() == grid.num_others() && zi.iter().all(|row| row.len() == grid.num_levels()));
        if !shape_ok {
            return Err(Error::InvalidProfile(format!(
                "expected {} bidders x {} others x {} levels",
                grid.n(),
                grid.num_others(),
                grid.num_levels()
            )));
        }
        let profile = Self { grid, z };
        check_profile_valid(&profile).map_err(|v| Error::InvalidProfile(v.to_string()))?;
        Ok(profile)
    }

    pub(crate) fn from_tables_unchecked(grid: BidGrid, z: Vec<Vec<Vec<Rational>>>) -> Self {
        Self { grid, z }
    }

    pub fn grid(&self) -> &BidGrid {
        &self.grid
    }

    pub fn tables(&self) -> &[Vec<Vec<Rational>>] {
        &self.z
    }

    /// Offer distribution for bidder `i` facing `others` (an index from
    /// [`BidGrid::others_index`]).
    pub fn offers(&self, i: usize, others: usize) -> &[Rational] {
        &self.z[i][others]
    }

    pub fn offer(&self, i: usize, others: usize, level: usize) -> &Rational {
        &self.z[i][others][level]
    }

    /// Expected payment of bidder `i` at grid point `point`.
    pub(crate) fn bidder_revenue(&self, i: usize, point: usize) -> Rational {
        let (others, own) = self.grid.split(point, i);
        let values = self.grid.level_values();
        self.z[i][others][..=own]
            .iter()
            .zip(values)
            .filter(|(p, _)| !p.is_zero())
            .fold(Rational::zero(), |acc, (p, v)| acc + p * v)
    }

    pub(crate) fn revenue_at(&self, point: usize) -> Rational {
        (0..self.grid.n()).map(|i| self.bidder_revenue(i, point)).fold(Rational::zero(), |a, b| a + b)
    }
}

/// Checks `0 <= z <= 1` entrywise and `Σ_p z_i(b_{-i}, p) <= 1`, reporting
/// the first violation in bidder-major order.
pub fn check_profile_valid(profile: &AuctionProfile) -> std::result::Result<(), ProfileViolation> {
    let grid = profile.grid();
    for (i, zi) in profile.z.iter().enumerate() {
        for (o, row) in zi.iter().enumerate() {
            let violation = |reason: String| ProfileViolation { bidder: i, others: grid.others_levels(o), reason };
            if let Some((t, p)) = row.iter().enumerate().find(|(_, p)| p.is_negative() || **p > Rational::one()) {
                return Err(violation(format!("probability {} at level {t}", format_rational(p))));
            }
            let total: Rational = row.iter().fold(Rational::zero(), |a, b| a + b);
            if total > Rational::one() {
                return Err(violation(format!("probabilities sum to {}", format_rational(&total))));
            }
        }
    }
    Ok(())
}

/// `Σ_i Σ_{p <= b_i} p · z_i(b_{-i}, p)`; a bidder accepts any price not
/// above their bid.
pub fn expected_revenue(profile: &AuctionProfile, b: &BidVector) -> Result<Rational> {
    profile.grid().validate(b)?;
    Ok(profile.revenue_at(profile.grid().point_index(b.levels())))
}

#[derive(Clone, Debug, PartialEq)]
pub enum CompetitiveRatio {
    Finite {
        ratio: Rational,
        argmax: BidVector,
    },
    /// Some bid vector has positive benchmark and zero revenue.
    Unbounded {
        argmax: BidVector,
    },
}

impl CompetitiveRatio {
    pub fn argmax(&self) -> &BidVector {
        match self {
            CompetitiveRatio::Finite { argmax, .. } | CompetitiveRatio::Unbounded { argmax } => argmax,
        }
    }

    pub fn value(&self) -> Option<&Rational> {
        match self {
            CompetitiveRatio::Finite { ratio, .. } => Some(ratio),
            CompetitiveRatio::Unbounded { .. } => None,
        }
    }
}

impl fmt::Display for CompetitiveRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompetitiveRatio::Finite { ratio, .. } => f.write_str(&format_rational(ratio)),
            CompetitiveRatio::Unbounded { .. } => f.write_str("unbounded"),
        }
    }
}

/// `max_b f(b) / revenue(b)` over the grid. Points with `f(b) = 0`
/// contribute 0; ties keep the first point in grid order.
pub fn competitive_ratio(profile: &AuctionProfile, f: &BenchmarkTable) -> Result<CompetitiveRatio> {
    let grid = profile.grid();
    if grid != f.grid() {
        return Err(Error::InvalidArgument("auction and benchmark are on different grids".into()));
    }
    // None stands for an infinite ratio.
    let ratios: Vec<Option<Rational>> = (0..grid.num_points())
        .into_par_iter()
        .map(|p| {
            let value = f.value(p);
            if value.is_zero() {
                return Some(Rational::zero());
            }
            let revenue = profile.revenue_at(p);
            if revenue.is_zero() {
                None
            } else {
                Some(value / revenue)
            }
        })
        .collect();
    if let Some(p) = ratios.iter().position(Option::is_none) {
        return Ok(CompetitiveRatio::Unbounded { argmax: grid.point(p) });
    }
    let mut best = 0;
    for (p, r) in ratios.iter().enumerate().skip(1) {
        if r > &ratios[best] {
            best = p;
        }
    }
    let ratio = ratios[best].clone().expect("all ratios are finite here");
    Ok(CompetitiveRatio::Finite { ratio, argmax: grid.point(best) })
}

/// Offer made to one bidder of the lifted auction.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledOffer {
    pub bidder: usize,
    /// The other bidder with the lowest bid (largest index on ties) used as the unit.
    pub reference: usize,
    /// Levels of the remaining bids after dividing by the reference bid.
    pub inner_bids: BidVector,
    /// `(price level, probability)` with zero-probability prices omitted.
    pub offers: Vec<(usize, Rational)>,
}

impl ScaledOffer {
    /// Expected payment when the bidder bids at `own_level`.
    pub fn expected_payment(&self, delta: &Rational, own_level: usize) -> Rational {
        self.offers
            .iter()
            .filter(|(level, _)| *level <= own_level)
            .fold(Rational::zero(), |acc, (level, p)| acc + p * level_value_direct(delta, *level))
    }
}

/// Index of the smallest entry among `levels` except `skip`, largest index on ties.
pub fn lowest_other(levels: &[usize], skip: Option<usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, &t) in levels.iter().enumerate() {
        if Some(j) == skip {
            continue;
        }
        if best.is_none_or(|k| t <= levels[k]) {
            best = Some(j);
        }
    }
    best
}

/// Runs an `n`-bidder auction on `n+1` bids (given as levels of the same
/// geometric grid). Bidder `i` is offered `p · b_{i*}` where `i*` has the
/// lowest other bid and `p` is drawn from the inner auction on the remaining
/// bids divided by `b_{i*}`. Every bidder, including the overall lowest,
/// gets this offer.
pub fn scale_reduce(inner: &AuctionProfile, b: &BidVector) -> Result<Vec<ScaledOffer>> {
    let grid = inner.grid();
    let levels = b.levels();
    if levels.len() != grid.n() + 1 {
        return Err(Error::DimensionMismatch { expected: grid.n() + 1, got: levels.len() });
    }
    let mut result = Vec::with_capacity(levels.len());
    for i in 0..levels.len() {
        let reference = lowest_other(levels, Some(i)).expect("at least two bidders");
        let base = levels[reference];
        let mut rescaled = Vec::with_capacity(grid.n() - 1);
        for (j, &t) in levels.iter().enumerate() {
            if j == i || j == reference {
                continue;
            }
            let shifted = t - base;
            if shifted > grid.top_level() {
                return Err(Error::GridOverflow { level: shifted, max: grid.top_level() });
            }
            rescaled.push(shifted);
        }
        let inner_bidder = if i < reference { i } else { i - 1 };
        let others = grid.others_index(&rescaled);
        let offers = inner
            .offers(inner_bidder, others)
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(t, p)| (t + base, p.clone()))
            .collect();
        result.push(ScaledOffer { bidder: i, reference, inner_bids: BidVector::new(rescaled), offers });
    }
    Ok(result)
}
