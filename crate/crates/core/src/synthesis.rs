//! Turning an attainable benchmark into an explicit auction.
//!
//! The state keeps a residual benchmark `f`, per-bidder mass budgets
//! `g_i(b_{-i})` and a strictly decreasing chain of tight upsets
//! `R = S_0 ⊋ S_1 ⊋ … ⊋ ∅`, where `R` is the support of `f`. Each step
//! moves revenue `ε` onto one bidder for all `b_{-i}` in `R↓i \ S_1↓i`,
//! charging `λε` against `f` and `ε / c` against `g_i`, and stops at the
//! first point where some `f`, some `g_i` or the slack of a new upset
//! reaches zero. When `f` vanishes the accumulated revenue tables satisfy
//! `λ Σ_i x_i = f` exactly.

use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::attainability::{check_attainable, ConditionWeights, Limits};
use crate::benchmark::BenchmarkTable;
use crate::error::{Error, Result};
use crate::evaluate::AuctionProfile;
use crate::grid::{enumerate_upsets, BidGrid, EnumerationLimits, Upset};
use crate::rational::{format_rational, Rational};

/// `x[i][point]`: expected revenue collected from bidder `i` at each grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct RevenueTables {
    grid: BidGrid,
    x: Vec<Vec<Rational>>,
}

impl RevenueTables {
    pub fn zero(grid: BidGrid) -> Self {
        let x = vec![vec![Rational::zero(); grid.num_points()]; grid.n()];
        Self { grid, x }
    }

    pub fn new(grid: BidGrid, x: Vec<Vec<Rational>>) -> Result<Self> {
        if x.len() != grid.n() || x.iter().any(|xi| xi.len() != grid.num_points()) {
            return Err(Error::InvalidArgument(format!(
                "revenue tables need {} bidders x {} points",
                grid.n(),
                grid.num_points()
            )));
        }
        Ok(Self { grid, x })
    }

    pub fn grid(&self) -> &BidGrid {
        &self.grid
    }

    pub fn bidder(&self, i: usize) -> &[Rational] {
        &self.x[i]
    }

    pub fn get(&self, i: usize, point: usize) -> &Rational {
        &self.x[i][point]
    }

    pub fn total(&self, point: usize) -> Rational {
        self.x.iter().fold(Rational::zero(), |acc, xi| acc + &xi[point])
    }
}

/// `z_i(b_{-i}, t) = (x_i(b_{-i}, t) - x_i(b_{-i}, t-1)) / value(t)`.
pub fn x_to_z(x: &RevenueTables) -> Result<AuctionProfile> {
    let grid = x.grid();
    let values = grid.level_values();
    let mut z = Vec::with_capacity(grid.n());
    for i in 0..grid.n() {
        let mut zi = Vec::with_capacity(grid.num_others());
        for o in 0..grid.num_others() {
            let mut row = Vec::with_capacity(grid.num_levels());
            let mut previous = Rational::zero();
            for (t, value) in values.iter().enumerate() {
                let current = x.get(i, grid.join(i, o, t));
                let step = current - &previous;
                if step.is_negative() {
                    return Err(Error::NonMonotoneRevenue(format!(
                        "bidder {} at others {:?}, level {t}",
                        i + 1,
                        grid.others_levels(o)
                    )));
                }
                row.push(step / value);
                previous = current.clone();
            }
            zi.push(row);
        }
        z.push(zi);
    }
    Ok(AuctionProfile::from_tables_unchecked(grid.clone(), z))
}

/// Inverse of [`x_to_z`]: `x_i(b) = Σ_{t <= b_i} value(t) z_i(b_{-i}, t)`.
pub fn z_to_x(profile: &AuctionProfile) -> RevenueTables {
    let grid = profile.grid();
    let x = (0..grid.n()).map(|i| (0..grid.num_points()).map(|p| profile.bidder_revenue(i, p)).collect()).collect();
    RevenueTables { grid: grid.clone(), x }
}

/// First violated constraint of the revenue-table system at ratio `λ`, if any.
pub fn ls2_violation(x: &RevenueTables, f: &BenchmarkTable, lambda: &Rational) -> Option<String> {
    let grid = x.grid();
    if grid != f.grid() {
        return Some("revenue tables and benchmark are on different grids".into());
    }
    for i in 0..grid.n() {
        if let Some(p) = x.bidder(i).iter().position(Signed::is_negative) {
            return Some(format!("x_{} is negative at {}", i + 1, grid.point(p)));
        }
    }
    for p in 0..grid.num_points() {
        if lambda * x.total(p) < *f.value(p) {
            return Some(format!("revenue below f / lambda at {}", grid.point(p)));
        }
    }
    let weights = grid.level_weights();
    for i in 0..grid.n() {
        for o in 0..grid.num_others() {
            let column: Vec<&Rational> = (0..grid.num_levels()).map(|t| x.get(i, grid.join(i, o, t))).collect();
            if column.windows(2).any(|w| w[0] > w[1]) {
                return Some(format!("x_{} not monotone at others {:?}", i + 1, grid.others_levels(o)));
            }
            let mass = column.iter().zip(weights).fold(Rational::zero(), |acc, (v, w)| acc + *v * w);
            if mass > Rational::one() {
                return Some(format!("x_{} exceeds unit mass at others {:?}", i + 1, grid.others_levels(o)));
            }
        }
    }
    None
}

/// Exact check of all constraint families of the revenue-table system.
pub fn verify_ls2(x: &RevenueTables, f: &BenchmarkTable, lambda: &Rational) -> bool {
    ls2_violation(x, f, lambda).is_none()
}

/// Coordinate and targets for one step: `(others, c)` pairs where `c` is the
/// lowest level at which the residual benchmark is non-zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Direction {
    pub bidder: usize,
    pub targets: Vec<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    FZero,
    GZero,
    NewTight,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::FZero => "f-zero",
            EventKind::GZero => "g-zero",
            EventKind::NewTight => "new-tight",
        }
    }
}

/// Step length and the bounds that bind at it, in handling order.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub epsilon: Rational,
    pub events: Vec<EventKind>,
    /// Upsets whose slack reaches zero exactly at `epsilon`.
    pub new_tight: Vec<Upset>,
}

#[derive(Clone, Debug)]
pub struct SynthesisConfig {
    pub max_steps: usize,
    pub limits: EnumerationLimits,
    /// Assert every state invariant after each step (costly, meant for tests).
    pub check_invariants: bool,
    pub record_trace: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            max_steps: 1_000_000,
            limits: EnumerationLimits::default(),
            check_invariants: false,
            record_trace: false,
        }
    }
}

pub struct SynthesisState {
    grid: BidGrid,
    lambda: Rational,
    f: Vec<Rational>,
    g: Vec<Vec<Rational>>,
    x: Vec<Vec<Rational>>,
    chain: Vec<Upset>,
    upsets: Vec<Upset>,
    weights: ConditionWeights,
}

impl SynthesisState {
    pub fn new(f: &BenchmarkTable, lambda: &Rational, limits: EnumerationLimits) -> Result<Self> {
        let grid = f.grid().clone();
        let upsets = enumerate_upsets(&grid, limits)?;
        let mut state = Self {
            lambda: lambda.clone(),
            f: f.values().to_vec(),
            g: vec![vec![Rational::one(); grid.num_others()]; grid.n()],
            x: vec![vec![Rational::zero(); grid.num_points()]; grid.n()],
            chain: Vec::new(),
            weights: ConditionWeights::new(&grid),
            upsets,
            grid,
        };
        let support = state.support();
        state.chain = if support.is_empty() { vec![support] } else { vec![support, Upset::empty(&state.grid)] };
        state.fold_tight();
        Ok(state)
    }

    pub fn grid(&self) -> &BidGrid {
        &self.grid
    }

    pub fn lambda(&self) -> &Rational {
        &self.lambda
    }

    pub fn residual(&self) -> &[Rational] {
        &self.f
    }

    pub fn budgets(&self) -> &[Vec<Rational>] {
        &self.g
    }

    pub fn chain(&self) -> &[Upset] {
        &self.chain
    }

    pub fn revenue(&self) -> RevenueTables {
        RevenueTables { grid: self.grid.clone(), x: self.x.clone() }
    }

    pub fn is_done(&self) -> bool {
        self.chain[0].is_empty()
    }

    fn support(&self) -> Upset {
        let mut bits = fixedbitset::FixedBitSet::with_capacity(self.grid.num_points());
        for (p, v) in self.f.iter().enumerate() {
            bits.set(p, v.is_positive());
        }
        Upset::from_bits_unchecked(bits)
    }

    /// `λ · Σ_i Σ_{S↓i} g_i w − Σ_S w f`; non-negative for every upset.
    pub fn slack(&self, s: &Upset) -> Rational {
        &self.lambda * self.weights.rhs(&self.grid, s, Some(&self.g)) - self.weights.lhs(&self.f, s)
    }

    /// Rate at which a step along `dir` consumes the slack of `s`.
    fn rate(&self, dir: &Direction, s: &Upset) -> Rational {
        let i = dir.bidder;
        let projected = s.project(&self.grid, i);
        let mut budget = Rational::zero();
        let mut benchmark = Rational::zero();
        for &(o, c) in &dir.targets {
            let w = &self.weights.others[o];
            if projected.contains(o) {
                budget += w / &self.grid.level_values()[c];
            }
            let inside: Rational = (c..self.grid.num_levels())
                .filter(|&t| s.contains(self.grid.join(i, o, t)))
                .fold(Rational::zero(), |acc, t| acc + &self.grid.level_weights()[t]);
            benchmark += w * inside;
        }
        &self.lambda * (budget - benchmark)
    }

    /// Lowest coordinate with budget left on `R↓i \ S_1↓i`.
    pub fn pick_direction(&self) -> Result<Direction> {
        let r = &self.chain[0];
        let s1 = &self.chain[1];
        for i in 0..self.grid.n() {
            let r_proj = r.project(&self.grid, i);
            let s1_proj = s1.project(&self.grid, i);
            let targets: Vec<(usize, usize)> = r_proj
                .ones()
                .filter(|&o| !s1_proj.contains(o) && self.g[i][o].is_positive())
                .map(|o| {
                    let c = (0..self.grid.num_levels())
                        .find(|&t| !self.f[self.grid.join(i, o, t)].is_zero())
                        .expect("top point of a projection lies in the support");
                    (o, c)
                })
                .collect();
            if !targets.is_empty() {
                return Ok(Direction { bidder: i, targets });
            }
        }
        Err(Error::InvariantViolation("no coordinate has budget outside the first tight set".into()))
    }

    /// Largest step along `dir` that keeps every invariant.
    pub fn max_step(&self, dir: &Direction) -> Result<Step> {
        let i = dir.bidder;
        let values = self.grid.level_values();
        let f_bound = dir
            .targets
            .iter()
            .map(|&(o, c)| &self.f[self.grid.join(i, o, c)] / &self.lambda)
            .min()
            .expect("direction has targets");
        let g_bound =
            dir.targets.iter().map(|&(o, c)| &self.g[i][o] * &values[c]).min().expect("direction has targets");

        let candidates: Vec<Result<Option<(usize, Rational)>>> = self
            .upsets
            .par_iter()
            .enumerate()
            .map(|(k, s)| {
                let rate = self.rate(dir, s);
                if !rate.is_positive() {
                    return Ok(None);
                }
                let slack = self.slack(s);
                if slack.is_zero() {
                    return Err(Error::InvariantViolation(format!(
                        "step would break tight upset {:?}",
                        s.vectors(&self.grid)
                    )));
                }
                Ok(Some((k, slack / rate)))
            })
            .collect();
        let mut tight_bound: Option<Rational> = None;
        let mut hits: Vec<(usize, Rational)> = Vec::new();
        for c in candidates {
            if let Some((k, bound)) = c? {
                if tight_bound.as_ref().is_none_or(|b| bound < *b) {
                    tight_bound = Some(bound.clone());
                }
                hits.push((k, bound));
            }
        }

        let mut epsilon = f_bound.clone().min(g_bound.clone());
        if let Some(b) = &tight_bound {
            epsilon = epsilon.min(b.clone());
        }
        let mut events = Vec::new();
        if f_bound == epsilon {
            events.push(EventKind::FZero);
        }
        if g_bound == epsilon {
            events.push(EventKind::GZero);
        }
        let new_tight: Vec<Upset> =
            hits.into_iter().filter(|(_, b)| *b == epsilon).map(|(k, _)| self.upsets[k].clone()).collect();
        if !new_tight.is_empty() {
            events.push(EventKind::NewTight);
        }
        Ok(Step { epsilon, events, new_tight })
    }

    /// The update: `f -= λε` and `x_i += ε` at `(b_{-i}, t)` for `t >= c`,
    /// `g_i(b_{-i}) -= ε / value(c)`.
    pub fn apply_step(&mut self, dir: &Direction, epsilon: &Rational) {
        if epsilon.is_zero() {
            return;
        }
        let i = dir.bidder;
        let charge = &self.lambda * epsilon;
        for &(o, c) in &dir.targets {
            for t in c..self.grid.num_levels() {
                let p = self.grid.join(i, o, t);
                self.f[p] -= &charge;
                self.x[i][p] += epsilon;
            }
            self.g[i][o] -= epsilon / &self.grid.level_values()[c];
        }
    }

    /// Shrinks the chain after `f` lost support and absorbs new tight sets.
    pub fn handle_events(&mut self, events: &[EventKind]) {
        if events.contains(&EventKind::FZero) {
            self.restrict_to_support();
        }
        self.fold_tight();
    }

    fn restrict_to_support(&mut self) {
        let r = self.support();
        let mut chain: Vec<Upset> = vec![r.clone()];
        for s in &self.chain[1..] {
            let cut = s.intersection(&r);
            if chain.last() != Some(&cut) {
                chain.push(cut);
            }
        }
        if !chain.last().is_some_and(Upset::is_empty) {
            chain.push(Upset::empty(&self.grid));
        }
        self.chain = chain;
    }

    /// Inserts `S' ∪ S_1` after `R` for every tight `S'` (restricted to `R`)
    /// that lies strictly between `S_1` and `R`. Unions of tight upsets are
    /// tight because the slack is modular.
    fn fold_tight(&mut self) {
        if self.chain.len() < 2 {
            return;
        }
        let r = self.chain[0].clone();
        let mut tight: Vec<Upset> =
            self.upsets.par_iter().filter(|s| self.slack(s).is_zero()).map(|s| s.intersection(&r)).collect();
        tight.sort_by_key(Upset::len);
        for s in tight {
            let joined = s.union(&self.chain[1]);
            if joined != self.chain[1] && joined != r {
                self.chain.insert(1, joined);
            }
        }
    }

    /// Checks non-negativity and monotonicity of `f`, the condition with
    /// budgets on every upset, tightness of the chain below `R`, and the
    /// shape of the budgets.
    pub fn check_invariants(&self) -> Result<()> {
        let grid = &self.grid;
        let fail = |msg: String| Err(Error::InvariantViolation(msg));
        if let Some(p) = self.f.iter().position(Signed::is_negative) {
            return fail(format!("residual benchmark negative at {}", grid.point(p)));
        }
        for p in 0..grid.num_points() {
            if let Some(q) = grid.upper_covers(p).find(|&q| self.f[q] < self.f[p]) {
                return fail(format!("residual benchmark decreases from {} to {}", grid.point(p), grid.point(q)));
            }
        }
        for s in &self.upsets {
            if self.slack(s).is_negative() {
                return fail(format!("condition violated on {:?}", s.vectors(grid)));
            }
        }
        for pair in self.chain.windows(2) {
            if !pair[1].is_subset(&pair[0]) || pair[1] == pair[0] {
                return fail("chain is not strictly decreasing".into());
            }
        }
        if self.chain.last().is_some_and(|s| !s.is_empty()) || self.chain[0] != self.support() {
            return fail("chain must run from the support down to the empty set".into());
        }
        if let Some(s) = self.chain[1..].iter().find(|s| !self.slack(s).is_zero()) {
            return fail(format!("chain set {:?} is not tight", s.vectors(grid)));
        }
        for i in 0..grid.n() {
            if self.g[i].iter().any(|v| v.is_negative() || *v > Rational::one()) {
                return fail(format!("budget of bidder {} outside [0, 1]", i + 1));
            }
            for pair in self.chain.windows(2) {
                let band: Vec<usize> = {
                    let upper = pair[0].project(grid, i);
                    let lower = pair[1].project(grid, i);
                    upper.ones().filter(|o| !lower.contains(*o)).collect()
                };
                for &a in &band {
                    for &b in &band {
                        let (la, lb) = (grid.others_levels(a), grid.others_levels(b));
                        if la.iter().zip(&lb).all(|(s, t)| s <= t) && self.g[i][a] < self.g[i][b] {
                            return fail(format!("budget of bidder {} increases within a band", i + 1));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn snapshot(&self, step: usize, dir: Option<&Direction>, taken: Option<&Step>) -> TraceStep {
        TraceStep {
            step,
            bidder: dir.map(|d| d.bidder),
            targets: dir.map(|d| d.targets.clone()).unwrap_or_default(),
            epsilon: taken.map(|s| s.epsilon.clone()),
            events: taken.map(|s| s.events.clone()).unwrap_or_default(),
            f: self.f.clone(),
            g: self.g.clone(),
            x: self.x.clone(),
            chain: self.chain.clone(),
        }
    }
}

/// State of the procedure after one step (step 0 is the initial state).
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub bidder: Option<usize>,
    pub targets: Vec<(usize, usize)>,
    pub epsilon: Option<Rational>,
    pub events: Vec<EventKind>,
    pub f: Vec<Rational>,
    pub g: Vec<Vec<Rational>>,
    pub x: Vec<Vec<Rational>>,
    pub chain: Vec<Upset>,
}

#[derive(Clone, Debug)]
pub struct Synthesis {
    pub revenue: RevenueTables,
    pub steps: usize,
    pub trace: Vec<TraceStep>,
}

/// Runs the procedure to completion. Fails with `NotAttainable` when the
/// condition does not hold at `λ`.
pub fn synthesize(f: &BenchmarkTable, lambda: &Rational, config: &SynthesisConfig) -> Result<Synthesis> {
    let limits = Limits { enumeration: config.limits, ..Limits::default() };
    if !config.limits.admits(f.grid()) {
        return Err(Error::DomainTooLarge { points: f.grid().num_points(), cap: config.limits.max_points });
    }
    if lambda.is_negative() || !check_attainable(f, lambda, false, limits)?.attainable {
        return Err(Error::NotAttainable { lambda: lambda.clone() });
    }
    let mut state = SynthesisState::new(f, lambda, config.limits)?;
    let mut trace = Vec::new();
    if config.record_trace {
        trace.push(state.snapshot(0, None, None));
    }
    if config.check_invariants {
        state.check_invariants()?;
    }
    let mut steps = 0;
    while !state.is_done() {
        if steps == config.max_steps {
            return Err(Error::IterationCapExceeded(config.max_steps));
        }
        let dir = state.pick_direction()?;
        let step = state.max_step(&dir)?;
        if !step.epsilon.is_positive() {
            return Err(Error::InvariantViolation("step length is not positive".into()));
        }
        state.apply_step(&dir, &step.epsilon);
        state.handle_events(&step.events);
        steps += 1;
        if config.check_invariants {
            state.check_invariants()?;
        }
        if config.record_trace {
            trace.push(state.snapshot(steps, Some(&dir), Some(&step)));
        }
    }
    Ok(Synthesis { revenue: state.revenue(), steps, trace })
}

fn describe_set(grid: &BidGrid, s: &Upset) -> String {
    let items: Vec<String> = s.indices().map(|p| describe_point(grid, &grid.point_levels(p))).collect();
    format!("{{{}}}", items.join(", "))
}

fn describe_point(grid: &BidGrid, levels: &[usize]) -> String {
    let values: Vec<String> = levels.iter().map(|&t| format_rational(&grid.level_values()[t])).collect();
    if values.len() == 1 {
        values[0].clone()
    } else {
        format!("({})", values.join(","))
    }
}

/// Text rendering of a trace. Two-bidder grids use the square layout with
/// `b_2` decreasing down the rows and `b_1` increasing across the columns;
/// other grids list points in index order.
pub fn render_trace(grid: &BidGrid, trace: &[TraceStep]) -> String {
    let mut out = String::new();
    for record in trace {
        render_header(&mut out, grid, record);
        if grid.n() == 2 {
            render_square(&mut out, grid, record);
        } else {
            render_listing(&mut out, grid, record);
        }
        let chain: Vec<String> = record.chain.iter().map(|s| describe_set(grid, s)).collect();
        let _ = writeln!(out, "  chain: {}", chain.join(" > "));
        out.push('\n');
    }
    out
}

fn render_header(out: &mut String, grid: &BidGrid, record: &TraceStep) {
    let Some(i) = record.bidder else {
        let _ = writeln!(out, "initial");
        return;
    };
    let t: Vec<String> = record.targets.iter().map(|&(o, _)| describe_point(grid, &grid.others_levels(o))).collect();
    let c: Vec<String> = record.targets.iter().map(|&(_, c)| format_rational(&grid.level_values()[c])).collect();
    let events: Vec<&str> = record.events.iter().map(|e| e.name()).collect();
    let _ = writeln!(
        out,
        "step {}: i = {}, T = {{{}}}, c = ({}), epsilon = {}, events: {}",
        record.step,
        i + 1,
        t.join(", "),
        c.join(", "),
        record.epsilon.as_ref().map(format_rational).unwrap_or_default(),
        events.join(", ")
    );
}

fn render_square(out: &mut String, grid: &BidGrid, record: &TraceStep) {
    let levels = grid.num_levels();
    let mut tables: Vec<(String, Vec<Vec<String>>)> = Vec::new();
    let square = |values: &[Rational]| -> Vec<Vec<String>> {
        (0..levels)
            .rev()
            .map(|b2| (0..levels).map(|b1| format_rational(&values[grid.point_index(&[b1, b2])])).collect())
            .collect()
    };
    tables.push(("x1".into(), square(&record.x[0])));
    tables.push(("x2".into(), square(&record.x[1])));
    tables.push(("f".into(), square(&record.f)));
    let width = tables.iter().flat_map(|(_, rows)| rows.iter().flatten()).map(String::len).max().unwrap_or(1);
    let block = levels * (width + 1) - 1;
    let headers: Vec<String> = tables.iter().map(|(name, _)| format!("{name:<block$}")).collect();
    let _ = writeln!(out, "  {}", headers.join(" | ").trim_end());
    for r in 0..levels {
        let cells: Vec<String> = tables
            .iter()
            .map(|(_, rows)| rows[r].iter().map(|c| format!("{c:>width$}")).collect::<Vec<_>>().join(" "))
            .collect();
        let _ = writeln!(out, "  {}", cells.join(" | "));
    }
    let g1: Vec<String> = (0..levels).rev().map(|t| format_rational(&record.g[0][t])).collect();
    let g2: Vec<String> = (0..levels).map(|t| format_rational(&record.g[1][t])).collect();
    let down: Vec<String> = (0..levels).rev().map(|t| format_rational(&grid.level_values()[t])).collect();
    let across: Vec<String> = (0..levels).map(|t| format_rational(&grid.level_values()[t])).collect();
    let _ = writeln!(out, "  g1 (b2 = {}): {}", down.join(", "), g1.join(" "));
    let _ = writeln!(out, "  g2 (b1 = {}): {}", across.join(", "), g2.join(" "));
}

fn render_listing(out: &mut String, grid: &BidGrid, record: &TraceStep) {
    for p in 0..grid.num_points() {
        let xs: Vec<String> = record.x.iter().map(|xi| format_rational(&xi[p])).collect();
        let _ = writeln!(
            out,
            "  {}: f = {}, x = [{}]",
            describe_point(grid, &grid.point_levels(p)),
            format_rational(&record.f[p]),
            xs.join(", ")
        );
    }
    for (i, gi) in record.g.iter().enumerate() {
        let entries: Vec<String> = gi
            .iter()
            .enumerate()
            .map(|(o, v)| format!("{} -> {}", describe_point(grid, &grid.others_levels(o)), format_rational(v)))
            .collect();
        let _ = writeln!(out, "  g{}: {}", i + 1, entries.join(", "));
    }
}
