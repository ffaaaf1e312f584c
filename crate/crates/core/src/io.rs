//! JSON documents for grids, benchmarks, verdicts, auction profiles and
//! ratio reports. Rationals are written as `"p/q"` strings; levels and
//! bidder indices are 0-based.

use std::path::Path;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::attainability::{OptimalRatio, Verdict};
use crate::benchmark::{builtin_table, BenchmarkKind, BenchmarkTable, Builtin};
use crate::error::{Error, Result};
use crate::evaluate::{AuctionProfile, CompetitiveRatio};
use crate::grid::{BidGrid, Upset};
use crate::rational::{format_rational, parse_rational, to_f64, Rational};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub delta: String,
    /// Number of grid levels (top level plus one).
    pub levels: usize,
    pub n: usize,
}

impl GridDoc {
    pub fn from_grid(grid: &BidGrid) -> Self {
        Self { delta: format_rational(grid.delta()), levels: grid.num_levels(), n: grid.n() }
    }

    pub fn to_grid(&self) -> Result<BidGrid> {
        BidGrid::new(parse_rational(&self.delta)?, self.levels, self.n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueEntry {
    pub levels: Vec<usize>,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkDoc {
    pub grid: GridDoc,
    /// `f2`, `maxv` or `custom`.
    pub kind: String,
    /// Every grid point exactly once for `custom`; absent for builtins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<ValueEntry>>,
}

impl BenchmarkDoc {
    pub fn from_table(table: &BenchmarkTable) -> Self {
        let grid = table.grid();
        let (kind, values) = match table.kind() {
            BenchmarkKind::Builtin(b) => (b.name().to_string(), None),
            BenchmarkKind::Custom => (
                "custom".to_string(),
                Some(
                    (0..grid.num_points())
                        .map(|p| ValueEntry { levels: grid.point_levels(p), value: format_rational(table.value(p)) })
                        .collect(),
                ),
            ),
        };
        Self { grid: GridDoc::from_grid(grid), kind, values }
    }

    pub fn to_table(&self) -> Result<BenchmarkTable> {
        let grid = self.grid.to_grid()?;
        if self.kind == "custom" {
            let entries = self
                .values
                .as_ref()
                .ok_or_else(|| Error::InvalidBenchmark("custom benchmark needs a values list".into()))?;
            let mut values: Vec<Option<Rational>> = vec![None; grid.num_points()];
            for entry in entries {
                let b = crate::grid::BidVector::new(entry.levels.clone());
                grid.validate(&b)?;
                let slot = &mut values[grid.point_index(&entry.levels)];
                if slot.is_some() {
                    return Err(Error::InvalidBenchmark(format!("duplicate entry for {b}")));
                }
                *slot = Some(parse_rational(&entry.value)?);
            }
            let values = values
                .into_iter()
                .enumerate()
                .map(|(p, v)| v.ok_or_else(|| Error::InvalidBenchmark(format!("missing value for {}", grid.point(p)))))
                .collect::<Result<Vec<_>>>()?;
            BenchmarkTable::from_values(grid, values)
        } else {
            let which: Builtin = self.kind.parse()?;
            if self.values.is_some() {
                return Err(Error::InvalidBenchmark("builtin benchmarks take no values list".into()));
            }
            builtin_table(&grid, which)
        }
    }
}

fn upset_levels(grid: &BidGrid, s: &Upset) -> Vec<Vec<usize>> {
    s.indices().map(|p| grid.point_levels(p)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictDoc {
    pub attainable: bool,
    pub lambda: String,
    pub witness_upset: Option<Vec<Vec<usize>>>,
    pub method: String,
}

impl VerdictDoc {
    pub fn from_verdict(grid: &BidGrid, v: &Verdict) -> Self {
        Self {
            attainable: v.attainable,
            lambda: format_rational(&v.lambda),
            witness_upset: v.witness.as_ref().map(|s| upset_levels(grid, s)),
            method: v.method.name().to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimalDoc {
    pub lambda: String,
    pub decimal: f64,
    pub witness_upset: Option<Vec<Vec<usize>>>,
    pub method: String,
}

impl OptimalDoc {
    pub fn new(grid: &BidGrid, lambda: &Rational, witness: Option<&Upset>, method: &str) -> Self {
        Self {
            lambda: format_rational(lambda),
            decimal: to_f64(lambda),
            witness_upset: witness.map(|s| upset_levels(grid, s)),
            method: method.to_string(),
        }
    }

    pub fn from_optimal(grid: &BidGrid, o: &OptimalRatio) -> Self {
        Self::new(grid, &o.lambda, o.witness.as_ref(), o.method.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceEntry {
    pub level: usize,
    pub prob: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfferEntry {
    pub bidder: usize,
    pub others: Vec<usize>,
    pub prices: Vec<PriceEntry>,
}

/// Only rows with some positive probability are listed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDoc {
    pub grid: GridDoc,
    pub z: Vec<OfferEntry>,
}

impl ProfileDoc {
    pub fn from_profile(profile: &AuctionProfile) -> Self {
        let grid = profile.grid();
        let mut z = Vec::new();
        for i in 0..grid.n() {
            for o in 0..grid.num_others() {
                let prices: Vec<PriceEntry> = profile
                    .offers(i, o)
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| !p.is_zero())
                    .map(|(level, p)| PriceEntry { level, prob: format_rational(p) })
                    .collect();
                if !prices.is_empty() {
                    z.push(OfferEntry { bidder: i, others: grid.others_levels(o), prices });
                }
            }
        }
        Self { grid: GridDoc::from_grid(grid), z }
    }

    pub fn to_profile(&self) -> Result<AuctionProfile> {
        let grid = self.grid.to_grid()?;
        let mut z = vec![vec![vec![Rational::zero(); grid.num_levels()]; grid.num_others()]; grid.n()];
        for entry in &self.z {
            if entry.bidder >= grid.n() {
                return Err(Error::InvalidProfile(format!("bidder {} out of range", entry.bidder)));
            }
            if entry.others.len() != grid.n() - 1 {
                return Err(Error::DimensionMismatch { expected: grid.n() - 1, got: entry.others.len() });
            }
            if let Some(&t) = entry.others.iter().find(|&&t| t > grid.top_level()) {
                return Err(Error::LevelOutOfRange { level: t, max: grid.top_level() });
            }
            let row = &mut z[entry.bidder][grid.others_index(&entry.others)];
            for price in &entry.prices {
                if price.level > grid.top_level() {
                    return Err(Error::LevelOutOfRange { level: price.level, max: grid.top_level() });
                }
                row[price.level] += parse_rational(&price.prob)?;
            }
        }
        AuctionProfile::new(grid, z)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioDoc {
    /// `"p/q"` or `"unbounded"`.
    pub ratio: String,
    pub argmax_bid: Vec<usize>,
}

impl RatioDoc {
    pub fn from_ratio(r: &CompetitiveRatio) -> Self {
        Self { ratio: r.to_string(), argmax_bid: r.argmax().levels().to_vec() }
    }
}

/// Limited-supply bounds for supply `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupplyBoundsDoc {
    pub k: usize,
    pub upper: BenchmarkDoc,
    pub lower: BenchmarkDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationDoc {
    pub benchmark: String,
    pub n: usize,
    pub samples: usize,
    pub blocks: usize,
    pub seed: u64,
    pub estimate: f64,
    pub error: Option<f64>,
}

pub fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(doc)?)
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn read_benchmark(path: &Path) -> Result<BenchmarkTable> {
    read_json::<BenchmarkDoc>(path)?.to_table()
}

pub fn read_profile(path: &Path) -> Result<AuctionProfile> {
    read_json::<ProfileDoc>(path)?.to_profile()
}
