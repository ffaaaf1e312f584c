//! Deciding whether a benchmark admits a truthful auction with ratio λ.
//!
//! Two independent routes: maximizing `lhs / rhs_base` over enumerated upsets,
//! where `lhs = Σ_{b∈S} w(b) f(b)` and `rhs_base = Σ_i Σ_{b_{-i}∈S↓i} w(b_{-i})`,
//! and exact feasibility of the revenue-table linear system.

use fixedbitset::FixedBitSet;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::benchmark::{check_symmetric, BenchmarkTable};
use crate::error::{Error, Result};
use crate::grid::{enumerate_symmetric_upsets, enumerate_upsets, BidGrid, EnumerationLimits, Upset};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Enumeration,
    Lp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Enumeration => "enumeration",
            Method::Lp => "lp",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub attainable: bool,
    pub lambda: Rational,
    /// Upset with the largest `lhs - λ·rhs_base`; only for enumeration verdicts
    /// that fail.
    pub witness: Option<Upset>,
    pub method: Method,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimalRatio {
    pub lambda: Rational,
    pub witness: Option<Upset>,
    pub method: Method,
}

/// Size guards for both routes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub enumeration: EnumerationLimits,
    /// Largest grid (in points) handed to the exact LP.
    pub lp_max_points: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { enumeration: EnumerationLimits::default(), lp_max_points: 64 }
    }
}

/// Precomputed weights for evaluating both sides of the condition quickly.
pub(crate) struct ConditionWeights {
    pub point: Vec<Rational>,
    pub others: Vec<Rational>,
}

impl ConditionWeights {
    pub fn new(grid: &BidGrid) -> Self {
        Self { point: grid.point_weights(), others: grid.others_weights() }
    }

    pub fn lhs(&self, values: &[Rational], s: &Upset) -> Rational {
        s.indices().fold(
            Rational::zero(),
            |acc, p| {
                if values[p].is_zero() {
                    acc
                } else {
                    acc + &self.point[p] * &values[p]
                }
            },
        )
    }

    /// `Σ_i Σ_{b_{-i} ∈ S↓i} g_i(b_{-i}) w(b_{-i})`, with `g ≡ 1` when `mass` is `None`.
    pub fn rhs(&self, grid: &BidGrid, s: &Upset, mass: Option<&[Vec<Rational>]>) -> Rational {
        let mut total = Rational::zero();
        for i in 0..grid.n() {
            for o in s.project(grid, i).ones() {
                match mass {
                    None => total += &self.others[o],
                    Some(g) => {
                        if !g[i][o].is_zero() {
                            total += &self.others[o] * &g[i][o];
                        }
                    }
                }
            }
        }
        total
    }
}

/// Both sides of the characterization inequality for `S`; it reads
/// `lhs <= λ · rhs_base`.
pub fn condition_sides(f: &BenchmarkTable, s: &Upset) -> (Rational, Rational) {
    let weights = ConditionWeights::new(f.grid());
    (weights.lhs(f.values(), s), weights.rhs(f.grid(), s, None))
}

fn candidate_upsets(f: &BenchmarkTable, symmetric_only: bool, limits: EnumerationLimits) -> Result<Vec<Upset>> {
    if symmetric_only {
        if !check_symmetric(f) {
            return Err(Error::NotSymmetric);
        }
        enumerate_symmetric_upsets(f.grid(), limits)
    } else {
        enumerate_upsets(f.grid(), limits)
    }
}

fn all_sides(f: &BenchmarkTable, upsets: &[Upset]) -> Vec<(Rational, Rational)> {
    let weights = ConditionWeights::new(f.grid());
    upsets.par_iter().map(|s| (weights.lhs(f.values(), s), weights.rhs(f.grid(), s, None))).collect()
}

/// Checks `lhs <= λ · rhs_base` for every upset (every symmetric one when
/// `symmetric_only`). Beyond the enumeration cap the decision falls back to
/// LP feasibility and the verdict says so.
pub fn check_attainable(
    f: &BenchmarkTable,
    lambda: &Rational,
    symmetric_only: bool,
    limits: Limits,
) -> Result<Verdict> {
    if !limits.enumeration.admits(f.grid()) {
        if symmetric_only && !check_symmetric(f) {
            return Err(Error::NotSymmetric);
        }
        let attainable = lp_feasible(f, lambda, limits)?;
        return Ok(Verdict { attainable, lambda: lambda.clone(), witness: None, method: Method::Lp });
    }
    let upsets = candidate_upsets(f, symmetric_only, limits.enumeration)?;
    let sides = all_sides(f, &upsets);
    let mut worst: Option<(usize, Rational)> = None;
    for (k, (lhs, rhs)) in sides.iter().enumerate() {
        let excess = lhs - lambda * rhs;
        if excess.is_positive() && worst.as_ref().is_none_or(|(_, w)| excess > *w) {
            worst = Some((k, excess));
        }
    }
    Ok(Verdict {
        attainable: worst.is_none(),
        lambda: lambda.clone(),
        witness: worst.map(|(k, _)| upsets[k].clone()),
        method: Method::Enumeration,
    })
}

/// Smallest attainable ratio: the maximum of `lhs / rhs_base` over non-empty
/// upsets, with a maximizing upset as witness. An identically zero benchmark
/// gives 0 with the full grid.
pub fn optimal_ratio(f: &BenchmarkTable, symmetric_only: bool, limits: Limits) -> Result<OptimalRatio> {
    if !limits.enumeration.admits(f.grid()) {
        if symmetric_only && !check_symmetric(f) {
            return Err(Error::NotSymmetric);
        }
        let lambda = optimal_ratio_lp(f, limits)?;
        return Ok(OptimalRatio { lambda, witness: None, method: Method::Lp });
    }
    if f.is_zero() {
        return Ok(OptimalRatio {
            lambda: Rational::zero(),
            witness: Some(Upset::full(f.grid())),
            method: Method::Enumeration,
        });
    }
    let upsets = candidate_upsets(f, symmetric_only, limits.enumeration)?;
    let sides = all_sides(f, &upsets);
    let mut best: Option<(usize, Rational)> = None;
    for (k, (lhs, rhs)) in sides.iter().enumerate() {
        if upsets[k].is_empty() {
            continue;
        }
        let value = lhs / rhs;
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((k, value));
        }
    }
    let (k, lambda) = best.expect("the full grid is always a candidate");
    Ok(OptimalRatio { lambda, witness: Some(upsets[k].clone()), method: Method::Enumeration })
}

/// Upsets for which the inequality holds with equality at `λ`.
pub fn tight_upsets(f: &BenchmarkTable, lambda: &Rational, limits: EnumerationLimits) -> Result<Vec<Upset>> {
    let upsets = enumerate_upsets(f.grid(), limits)?;
    let sides = all_sides(f, &upsets);
    Ok(upsets.into_iter().zip(sides).filter(|(_, (lhs, rhs))| *lhs == lambda * rhs).map(|(s, _)| s).collect())
}

fn lp_guard(grid: &BidGrid, limits: Limits) -> Result<()> {
    if grid.num_points() > limits.lp_max_points {
        Err(Error::DomainTooLarge { points: grid.num_points(), cap: limits.lp_max_points })
    } else {
        Ok(())
    }
}

/// Variable index of `x_i(b)` (or `y_i(b)`) with `b` a point index.
fn revenue_var(grid: &BidGrid, i: usize, point: usize) -> usize {
    i * grid.num_points() + point
}

/// Adds the per-bidder rows shared by both LP formulations: the mass bound
/// `Σ_t w(t) x_i(b_{-i}, t) <= 1` (or `<= λ` when `budget_var` is given)
/// and monotonicity in the own bid.
fn add_bidder_rows(lp: &mut LinearProgram, grid: &BidGrid, budget_var: Option<usize>) {
    let levels = grid.num_levels();
    for i in 0..grid.n() {
        for o in 0..grid.num_others() {
            let mut row: Vec<(usize, Rational)> = (0..levels)
                .map(|t| (revenue_var(grid, i, grid.join(i, o, t)), grid.level_weights()[t].clone()))
                .collect();
            match budget_var {
                Some(v) => {
                    row.push((v, -Rational::one()));
                    lp.add_constraint(row, Relation::Le, Rational::zero());
                }
                None => lp.add_constraint(row, Relation::Le, Rational::one()),
            }
            for t in 0..levels - 1 {
                lp.add_constraint(
                    vec![
                        (revenue_var(grid, i, grid.join(i, o, t)), Rational::one()),
                        (revenue_var(grid, i, grid.join(i, o, t + 1)), -Rational::one()),
                    ],
                    Relation::Le,
                    Rational::zero(),
                );
            }
        }
    }
}

/// Exact feasibility of the revenue-table system at ratio `λ`:
/// `λ Σ_i x_i(b) >= f(b)`, `Σ_t w(t) x_i(b_{-i}, t) <= 1`, `x_i` monotone in
/// the own bid, `x >= 0`.
pub fn lp_feasible(f: &BenchmarkTable, lambda: &Rational, limits: Limits) -> Result<bool> {
    let grid = f.grid();
    lp_guard(grid, limits)?;
    if lambda.is_negative() {
        return Ok(f.is_zero());
    }
    let mut lp = LinearProgram::new(grid.n() * grid.num_points());
    for p in 0..grid.num_points() {
        let row = if lambda.is_zero() {
            Vec::new()
        } else {
            (0..grid.n()).map(|i| (revenue_var(grid, i, p), lambda.clone())).collect()
        };
        if row.is_empty() && f.value(p).is_positive() {
            return Ok(false);
        }
        if !row.is_empty() {
            lp.add_constraint(row, Relation::Ge, f.value(p).clone());
        }
    }
    add_bidder_rows(&mut lp, grid, None);
    Ok(lp.is_feasible())
}

/// Minimizes λ over `(y, λ)` with `y_i = λ x_i`: `Σ_i y_i(b) >= f(b)`,
/// `Σ_t w(t) y_i(b_{-i}, t) <= λ`, `y_i` monotone, `y >= 0`.
pub fn optimal_ratio_lp(f: &BenchmarkTable, limits: Limits) -> Result<Rational> {
    let grid = f.grid();
    lp_guard(grid, limits)?;
    if f.is_zero() {
        return Ok(Rational::zero());
    }
    let lambda_var = grid.n() * grid.num_points();
    let mut lp = LinearProgram::new(lambda_var + 1);
    for p in 0..grid.num_points() {
        let row = (0..grid.n()).map(|i| (revenue_var(grid, i, p), Rational::one())).collect();
        lp.add_constraint(row, Relation::Ge, f.value(p).clone());
    }
    add_bidder_rows(&mut lp, grid, Some(lambda_var));
    lp.set_objective(vec![(lambda_var, Rational::one())]);
    match lp.solve() {
        LpOutcome::Optimal { value, .. } => Ok(value),
        LpOutcome::Infeasible | LpOutcome::Unbounded => {
            Err(Error::InvariantViolation("ratio-minimizing program must have an optimum".into()))
        }
    }
}

/// Points of an upset as a bitset, for callers that only hold indices.
pub fn upset_bits(s: &Upset) -> &FixedBitSet {
    s.bits()
}
