//! Closed-form optimal ratios, the equal-revenue distribution and the
//! quantities used to check the lower-bound argument numerically.

use std::fmt::Write as _;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::benchmark::{
    builtin_table, fix_lowest_coordinate, shifted_complement, BenchmarkTable, Builtin, FormulaBenchmark,
};
use crate::error::{Error, Result};
use crate::grid::BidGrid;
use crate::rational::{binomial, format_rational, int, pow, to_f64, Rational};

fn require_bidders(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::TooFewBidders(n))
    } else {
        Ok(())
    }
}

/// `λ_n = 1 - Σ_{i=2}^{n} (-1/n)^{i-1} · i/(i-1) · C(n-1, i-1)`, exactly.
pub fn lambda_n(n: usize) -> Result<Rational> {
    require_bidders(n)?;
    let minus_inv = Rational::new((-1).into(), n.into());
    let mut power = Rational::one();
    let mut total = Rational::one();
    for i in 2..=n {
        power *= &minus_inv;
        let coeff = Rational::new(i.into(), (i - 1).into()) * Rational::from_integer(binomial(n - 1, i - 1));
        total -= &power * coeff;
    }
    Ok(total)
}

/// `γ_n = (n/(n-1))^(n-1) - 1`, exactly.
pub fn gamma_n(n: usize) -> Result<Rational> {
    require_bidders(n)?;
    Ok(pow(&Rational::new(n.into(), (n - 1).into()), n - 1) - Rational::one())
}

/// `E[maxV] = n (n/(n-1))^(n-1) - n` under i.i.d. equal-revenue values.
pub fn expected_maxv(n: usize) -> Result<Rational> {
    require_bidders(n)?;
    let nn = int(n as i64);
    Ok(&nn * pow(&Rational::new(n.into(), (n - 1).into()), n - 1) - nn)
}

/// `Σ_b w(b) f(b)` over the grid, summed exactly in parallel chunks.
pub fn expected_benchmark_discrete(f: &BenchmarkTable) -> Rational {
    let grid = f.grid();
    let values = f.values();
    let levels = grid.num_levels();
    // Rows share the weight of their leading coordinate.
    let rows = grid.num_points() / levels;
    let lw = grid.level_weights();
    (0..rows)
        .into_par_iter()
        .map(|r| {
            let base = r * levels;
            let prefix = grid.weight_of_levels(&grid.point_levels(base)[..grid.n() - 1]);
            let row = (0..levels).fold(Rational::zero(), |acc, t| {
                let v = &values[base + t];
                if v.is_zero() {
                    acc
                } else {
                    acc + &lw[t] * v
                }
            });
            prefix * row
        })
        .reduce(Rational::zero, |a, b| a + b)
}

fn check_z(z: f64) -> Result<()> {
    if !z.is_finite() || z <= 0.0 {
        Err(Error::InvalidArgument(format!("tail point must be finite and positive, got {z}")))
    } else {
        Ok(())
    }
}

/// `Pr[F_{n,k} >= z] = 1 - (z - n - k + 1)(z + 1 - k)^(n-1) / z^n` for
/// `z >= n + k - 1`, and 1 below. The product is expanded symbolically so
/// its leading `z^n` cancels exactly, leaving a polynomial in `1/z`.
pub fn f_nk_tail(n: usize, k: usize, z: f64) -> Result<f64> {
    check_z(z)?;
    if n == 0 {
        return Ok(0.0);
    }
    if z <= (n + k) as f64 - 1.0 {
        return Ok(1.0);
    }
    let coeffs = tail_coefficients(n, k);
    // 1 - P(z)/z^n = -Σ_{j<n} c_j z^(j-n) = Σ_{m=1}^{n} -c_{n-m} u^m with u = 1/z.
    let u = 1.0 / z;
    let mut acc = 0.0;
    for m in (1..=n).rev() {
        acc = (acc - coeffs[n - m]) * u;
    }
    Ok(acc.clamp(0.0, 1.0))
}

/// Coefficients `c_0..c_n` of `(z + a - n)(z + a)^(n-1)` with `a = 1 - k`.
fn tail_coefficients(n: usize, k: usize) -> Vec<f64> {
    let a = 1 - k as i64;
    // (z + a)^(n-1) = Σ_j C(n-1, j) a^(n-1-j) z^j
    let base: Vec<Rational> =
        (0..n).map(|j| Rational::from_integer(binomial(n - 1, j)) * pow(&int(a), n - 1 - j)).collect();
    let shift = int(a - n as i64);
    let mut coeffs = vec![Rational::zero(); n + 1];
    for (j, c) in base.iter().enumerate() {
        coeffs[j + 1] += c;
        coeffs[j] += c * &shift;
    }
    coeffs.iter().map(to_f64).collect()
}

/// The recursion `Pr[F_{n,k} >= z] = Σ_{i=1}^{n} C(n,i) ((k+i-1)/z)^i Pr[F_{n-i,k+i} < z]`
/// with `Pr[F_{0,k} >= z] = 0`.
pub fn f_nk_tail_recursive(n: usize, k: usize, z: f64) -> Result<f64> {
    check_z(z)?;
    Ok(tail_by_recursion(n, k, z))
}

fn tail_by_recursion(n: usize, k: usize, z: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if z <= (n + k) as f64 - 1.0 {
        return 1.0;
    }
    (1..=n)
        .map(|i| {
            let c = to_f64(&Rational::from_integer(binomial(n, i)));
            let p = ((k + i - 1) as f64 / z).powi(i as i32);
            c * p * (1.0 - tail_by_recursion(n - i, k + i, z))
        })
        .sum()
}

/// `Pr[maxV >= z]` for `n` i.i.d. equal-revenue values; 1 for `z <= n - 1`.
pub fn maxv_tail(n: usize, z: f64) -> Result<f64> {
    require_bidders(n)?;
    if z <= n as f64 - 1.0 {
        return Ok(1.0);
    }
    f_nk_tail(n, 0, z)
}

/// Draws i.i.d. values with `Pr[v > x] = 1/x` on `[1, ∞)`.
pub struct EqualRevenueSampler {
    n: usize,
    rng: ChaCha8Rng,
}

impl EqualRevenueSampler {
    pub fn new(n: usize, seed: u64) -> Self {
        Self { n, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Sampler for one block of a larger run; blocks use disjoint streams.
    pub fn for_block(n: usize, seed: u64, block: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        Self { n, rng }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `v = 1/u`, defined for `u` in `(0, 1]`.
    pub fn inverse_cdf(u: f64) -> f64 {
        1.0 / u
    }

    pub fn sample_value(&mut self) -> f64 {
        // random() is uniform on [0, 1); flip it onto (0, 1].
        let u = 1.0 - self.rng.random::<f64>();
        Self::inverse_cdf(u)
    }

    pub fn sample_bids(&mut self) -> Vec<f64> {
        (0..self.n).map(|_| self.sample_value()).collect()
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.sample_value();
        }
    }
}

/// Convenience wrapper around [`EqualRevenueSampler::sample_bids`].
pub fn sample_bids(sampler: &mut EqualRevenueSampler) -> Vec<f64> {
    sampler.sample_bids()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub estimate: f64,
    /// `1.2533 · sd(block means) / sqrt(blocks)`; NaN for a single block.
    pub error: f64,
}

/// Median of block means of `stat` over `samples` draws split into `blocks`
/// nearly equal blocks, each with its own stream derived from `seed`.
pub fn mc_expected<F>(stat: F, n: usize, samples: usize, blocks: usize, seed: u64) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if blocks == 0 || samples < blocks {
        return Err(Error::InvalidArgument(format!(
            "need samples >= blocks >= 1, got samples={samples}, blocks={blocks}"
        )));
    }
    let base = samples / blocks;
    let extra = samples % blocks;
    let means: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let size = base + usize::from(b < extra);
            let mut sampler = EqualRevenueSampler::for_block(n, seed, b as u64);
            let mut bids = vec![0.0; n];
            let mut total = 0.0;
            for _ in 0..size {
                sampler.fill(&mut bids);
                total += stat(&bids);
            }
            total / size as f64
        })
        .collect();
    let mut sorted = means.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = blocks / 2;
    let estimate = if blocks % 2 == 1 { sorted[mid] } else { 0.5 * (sorted[mid - 1] + sorted[mid]) };
    let error = if blocks < 2 {
        f64::NAN
    } else {
        let mean = means.iter().sum::<f64>() / blocks as f64;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (blocks - 1) as f64;
        1.2533 * var.sqrt() / (blocks as f64).sqrt()
    };
    Ok(Estimate { estimate, error })
}

/// Exact discrete sums behind the tightness of the lower bound on `n`
/// bidders, next to the values they approach as the grid is refined.
#[derive(Clone, Debug, PartialEq)]
pub struct TightnessReport {
    /// `Σ w·G_n` with `G_n(z) = F2(1, z)` on `n + 1` bidders.
    pub g_sum: Rational,
    /// `λ_{n+1} · n`.
    pub g_target: Rational,
    /// `Σ w·H_n` with `H_n = max(0, n + 1 - F2)` on `n` bidders.
    pub h_sum: Rational,
    /// `(λ_{n+1} - λ_n) · n`.
    pub h_target: Rational,
}

impl TightnessReport {
    pub fn g_relative_error(&self) -> f64 {
        relative_error(&self.g_sum, &self.g_target)
    }

    pub fn h_relative_error(&self) -> f64 {
        relative_error(&self.h_sum, &self.h_target)
    }
}

pub fn relative_error(value: &Rational, target: &Rational) -> f64 {
    to_f64(&((value - target) / target))
}

/// Computes both sums on `grid` (whose bidder count is `n`).
pub fn check_gn_tight(grid: &BidGrid, max_points: usize) -> Result<TightnessReport> {
    let n = grid.n();
    if grid.num_points() > max_points {
        return Err(Error::DomainTooLarge { points: grid.num_points(), cap: max_points });
    }
    let outer = FormulaBenchmark::new(grid.with_bidders(n + 1)?, Builtin::F2)?;
    let g_table = fix_lowest_coordinate(&outer)?;
    let f2 = builtin_table(grid, Builtin::F2)?;
    let h_table = shifted_complement(&f2, &int(n as i64 + 1));
    let nn = int(n as i64);
    let upper = lambda_n(n + 1)?;
    Ok(TightnessReport {
        g_sum: expected_benchmark_discrete(&g_table),
        g_target: &upper * &nn,
        h_sum: expected_benchmark_discrete(&h_table),
        h_target: (upper - lambda_n(n)?) * nn,
    })
}

/// CSV rows `n, λ_n, λ_n decimal, γ_n, γ_n decimal` for `2 <= n <= max_n`.
pub fn ratio_table(max_n: usize) -> Result<String> {
    require_bidders(max_n)?;
    let mut out = String::from("n,lambda_n,lambda_n_decimal,gamma_n,gamma_n_decimal\n");
    for n in 2..=max_n {
        let l = lambda_n(n)?;
        let g = gamma_n(n)?;
        let _ =
            writeln!(out, "{n},{},{:.12},{},{:.12}", format_rational(&l), to_f64(&l), format_rational(&g), to_f64(&g));
    }
    Ok(out)
}

/// Evaluates a builtin benchmark on real-valued bids.
pub fn builtin_on_reals(which: Builtin, bids: &[f64]) -> f64 {
    let result = match which {
        Builtin::F2 => crate::benchmark::f2(bids),
        Builtin::MaxV => crate::benchmark::maxv(bids),
    };
    result.unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn small_closed_forms() {
        assert_eq!(lambda_n(2).unwrap(), int(2));
        assert_eq!(lambda_n(3).unwrap(), ratio(13, 6));
        assert_eq!(gamma_n(2).unwrap(), int(1));
        assert_eq!(gamma_n(3).unwrap(), ratio(5, 4));
        assert_eq!(gamma_n(4).unwrap(), ratio(37, 27));
        assert_eq!(expected_maxv(2).unwrap(), int(2));
        assert_eq!(expected_maxv(3).unwrap(), ratio(15, 4));
        assert!(matches!(lambda_n(1), Err(Error::TooFewBidders(1))));
    }

    #[test]
    fn tails() {
        assert!((f_nk_tail(2, 0, 3.0).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        assert!((f_nk_tail(1, 1, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((f_nk_tail_recursive(1, 1, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(f_nk_tail(0, 3, 7.0).unwrap(), 0.0);
        assert_eq!(f_nk_tail(3, 2, 4.0).unwrap(), 1.0);
        assert!((maxv_tail(3, 3.0).unwrap() - 11.0 / 27.0).abs() < 1e-15);
        assert_eq!(maxv_tail(3, 2.0).unwrap(), 1.0);
        assert!(maxv_tail(3, 1e12).unwrap() < 1e-20);
        assert!(f_nk_tail(2, 0, f64::NAN).is_err());
        assert!(f_nk_tail(2, 0, -1.0).is_err());
    }

    #[test]
    fn inverse_cdf() {
        assert_eq!(EqualRevenueSampler::inverse_cdf(1.0), 1.0);
        assert_eq!(EqualRevenueSampler::inverse_cdf(0.25), 4.0);
    }

    #[test]
    fn sampler_is_reproducible() {
        let a: Vec<f64> = (0..5).flat_map(|_| EqualRevenueSampler::new(3, 7).sample_bids()).collect();
        let b: Vec<f64> = (0..5).flat_map(|_| EqualRevenueSampler::new(3, 7).sample_bids()).collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|&v| v >= 1.0));
    }

    #[test]
    fn constant_statistic() {
        let e = mc_expected(|_| 2.5, 3, 1000, 10, 1).unwrap();
        assert_eq!(e, Estimate { estimate: 2.5, error: 0.0 });
        assert!(mc_expected(|_| 1.0, 3, 0, 1, 1).is_err());
        assert!(mc_expected(|_| 1.0, 3, 5, 10, 1).is_err());
    }

    #[test]
    fn discrete_expectation_of_constants_and_small_tables() {
        let g = BidGrid::new(ratio(1, 3), 4, 2).unwrap();
        let c = BenchmarkTable::from_values(g.clone(), vec![ratio(7, 3); g.num_points()]).unwrap();
        assert_eq!(expected_benchmark_discrete(&c), ratio(7, 3));
        let g = BidGrid::new(int(1), 2, 2).unwrap();
        let f = BenchmarkTable::from_values(g, vec![ratio(3, 2), ratio(3, 2), ratio(3, 2), ratio(7, 2)]).unwrap();
        assert_eq!(expected_benchmark_discrete(&f), int(2));
    }

    #[test]
    fn table_rows() {
        let csv = ratio_table(3).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("2,2,2.0"));
        assert!(lines[2].starts_with("3,13/6,2.16"));
        assert!(lines[2].contains(",5/4,1.25"));
    }
}
