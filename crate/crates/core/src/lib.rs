//! Exact tools for truthful digital-goods auctions measured against a
//! benchmark on a discretized bid domain.

pub mod attainability;
pub mod benchmark;
pub mod cli;
pub mod error;
pub mod evaluate;
pub mod grid;
pub mod io;
pub mod lp;
pub mod rational;
pub mod ratios;
pub mod synthesis;

pub use attainability::{check_attainable, optimal_ratio, optimal_ratio_lp, Verdict};
pub use benchmark::{BenchmarkTable, Builtin};
pub use error::{Error, Result};
pub use evaluate::{competitive_ratio, expected_revenue, AuctionProfile, CompetitiveRatio};
pub use grid::{BidGrid, BidVector, Upset};
pub use rational::Rational;
pub use synthesis::{synthesize, verify_ls2, x_to_z, RevenueTables};
