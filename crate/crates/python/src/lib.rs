//! Python bindings for `optauction`.
//!
//! Exact values cross the boundary as `fractions.Fraction`. Inputs accept
//! anything whose `str()` parses as a rational, such as `Fraction`, `int`
//! or `"5/4"`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use optauction::attainability::{check_attainable, optimal_ratio, Limits};
use optauction::benchmark::{builtin_table, check_symmetric, BenchmarkTable, Builtin};
use optauction::evaluate::{competitive_ratio, expected_revenue, AuctionProfile, CompetitiveRatio};
use optauction::grid::{BidGrid, BidVector, EnumerationLimits};
use optauction::io::{from_json, to_json, BenchmarkDoc, ProfileDoc};
use optauction::rational::{format_rational, parse_rational};
use optauction::ratios::{builtin_on_reals, gamma_n, lambda_n, mc_expected};
use optauction::synthesis::{synthesize, x_to_z, SynthesisConfig};
use optauction::{Error, Rational};

trait OrPyErr<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPyErr<T> for optauction::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(|e| match e {
            Error::InvariantViolation(_) | Error::IterationCapExceeded(_) => PyRuntimeError::new_err(e.to_string()),
            _ => PyValueError::new_err(e.to_string()),
        })
    }
}

fn fraction<'py>(py: Python<'py>, value: &Rational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((format_rational(value),))
}

fn fractions<'py>(py: Python<'py>, values: &[Rational]) -> PyResult<Vec<Bound<'py, PyAny>>> {
    values.iter().map(|v| fraction(py, v)).collect()
}

fn rational(value: &Bound<'_, PyAny>) -> PyResult<Rational> {
    parse_rational(&value.str()?.to_string()).py()
}

fn limits(max_points: usize) -> Limits {
    Limits { enumeration: EnumerationLimits { max_points }, ..Limits::default() }
}

/// Geometric bid grid `{(1 + delta)^t : t < levels}` for `n` bidders.
#[pyclass(name = "Grid", module = "optauction", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: BidGrid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(delta: &Bound<'_, PyAny>, levels: usize, n: usize) -> PyResult<Self> {
        Ok(Self { inner: BidGrid::new(rational(delta)?, levels, n).py()? })
    }

    #[getter]
    fn delta<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, self.inner.delta())
    }

    #[getter]
    fn num_levels(&self) -> usize {
        self.inner.num_levels()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn num_points(&self) -> usize {
        self.inner.num_points()
    }

    fn level_values<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyAny>>> {
        fractions(py, self.inner.level_values())
    }

    /// Level vectors in table order.
    fn points(&self) -> Vec<Vec<usize>> {
        self.inner.points().map(BidVector::into_levels).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(delta={}, levels={}, n={})",
            format_rational(self.inner.delta()),
            self.inner.num_levels(),
            self.inner.n()
        )
    }
}

/// Monotone benchmark tabulated on a grid.
#[pyclass(name = "Benchmark", module = "optauction", frozen)]
struct PyBenchmark {
    inner: BenchmarkTable,
}

#[pymethods]
impl PyBenchmark {
    /// One of `"f2"` or `"maxv"`.
    #[staticmethod]
    fn builtin(grid: PyRef<'_, PyGrid>, kind: &str) -> PyResult<Self> {
        let which: Builtin = kind.parse().py()?;
        Ok(Self { inner: builtin_table(&grid.inner, which).py()? })
    }

    /// Values listed in the order of `Grid.points()`.
    #[staticmethod]
    fn custom(grid: PyRef<'_, PyGrid>, values: Vec<Bound<'_, PyAny>>) -> PyResult<Self> {
        let values = values.iter().map(rational).collect::<PyResult<Vec<_>>>()?;
        Ok(Self { inner: BenchmarkTable::from_values(grid.inner.clone(), values).py()? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc: BenchmarkDoc = from_json(text).py()?;
        Ok(Self { inner: doc.to_table().py()? })
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&BenchmarkDoc::from_table(&self.inner)).py()
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid { inner: self.inner.grid().clone() }
    }

    fn values<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyAny>>> {
        fractions(py, self.inner.values())
    }

    fn value<'py>(&self, py: Python<'py>, levels: Vec<usize>) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, self.inner.value_of(&BidVector::new(levels)).py()?)
    }

    fn scaled(&self, c: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(Self { inner: self.inner.scaled(&rational(c)?) })
    }

    fn is_symmetric(&self) -> bool {
        check_symmetric(&self.inner)
    }
}

/// Outcome of an attainability check.
#[pyclass(name = "Verdict", module = "optauction", frozen, get_all)]
struct PyVerdict {
    attainable: bool,
    ratio: Py<PyAny>,
    /// Level vectors of the most violated upset, if any.
    witness: Option<Vec<Vec<usize>>>,
    method: String,
}

#[pymethods]
impl PyVerdict {
    fn __repr__(&self) -> String {
        format!("Verdict(attainable={}, method={:?})", self.attainable, self.method)
    }
}

/// Auction given by per-bidder price distributions.
#[pyclass(name = "Auction", module = "optauction", frozen)]
struct PyAuction {
    inner: AuctionProfile,
}

#[pymethods]
impl PyAuction {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc: ProfileDoc = from_json(text).py()?;
        Ok(Self { inner: doc.to_profile().py()? })
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&ProfileDoc::from_profile(&self.inner)).py()
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid { inner: self.inner.grid().clone() }
    }

    /// Offer probabilities by level for `bidder` facing the other bids.
    fn offers<'py>(&self, py: Python<'py>, bidder: usize, others: Vec<usize>) -> PyResult<Vec<Bound<'py, PyAny>>> {
        let grid = self.inner.grid();
        if bidder >= grid.n() {
            return Err(PyValueError::new_err(format!("bidder {bidder} out of range")));
        }
        let mut full = others.clone();
        full.insert(bidder, 0);
        grid.validate(&BidVector::new(full)).py()?;
        fractions(py, self.inner.offers(bidder, grid.others_index(&others)))
    }

    fn revenue<'py>(&self, py: Python<'py>, bids: Vec<usize>) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, &expected_revenue(&self.inner, &BidVector::new(bids)).py()?)
    }

    /// Worst-case ratio against `benchmark`; `None` when unbounded.
    fn competitive_ratio<'py>(
        &self,
        py: Python<'py>,
        benchmark: PyRef<'_, PyBenchmark>,
    ) -> PyResult<Option<Bound<'py, PyAny>>> {
        match competitive_ratio(&self.inner, &benchmark.inner).py()? {
            CompetitiveRatio::Finite { ratio, .. } => Ok(Some(fraction(py, &ratio)?)),
            CompetitiveRatio::Unbounded { .. } => Ok(None),
        }
    }
}

#[pyfunction(name = "check_attainable")]
#[pyo3(signature = (benchmark, ratio, symmetric = false, max_points = 16))]
fn py_check_attainable(
    py: Python<'_>,
    benchmark: PyRef<'_, PyBenchmark>,
    ratio: &Bound<'_, PyAny>,
    symmetric: bool,
    max_points: usize,
) -> PyResult<PyVerdict> {
    let lambda = rational(ratio)?;
    let f = &benchmark.inner;
    let v = py.detach(|| check_attainable(f, &lambda, symmetric, limits(max_points))).py()?;
    Ok(PyVerdict {
        attainable: v.attainable,
        ratio: fraction(py, &v.lambda)?.unbind(),
        witness: v.witness.map(|s| s.vectors(f.grid()).into_iter().map(BidVector::into_levels).collect()),
        method: v.method.name().to_string(),
    })
}

#[pyfunction(name = "optimal_ratio")]
#[pyo3(signature = (benchmark, symmetric = false, max_points = 16))]
fn py_optimal_ratio<'py>(
    py: Python<'py>,
    benchmark: PyRef<'_, PyBenchmark>,
    symmetric: bool,
    max_points: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let f = &benchmark.inner;
    let best = py.detach(|| optimal_ratio(f, symmetric, limits(max_points))).py()?;
    fraction(py, &best.lambda)
}

/// Auction attaining `ratio`, or the optimal ratio when omitted.
#[pyfunction(name = "synthesize")]
#[pyo3(signature = (benchmark, ratio = None, max_points = 16))]
fn py_synthesize(
    py: Python<'_>,
    benchmark: PyRef<'_, PyBenchmark>,
    ratio: Option<&Bound<'_, PyAny>>,
    max_points: usize,
) -> PyResult<PyAuction> {
    let lambda = ratio.map(rational).transpose()?;
    let f = &benchmark.inner;
    let profile = py.detach(|| {
        let lim = limits(max_points);
        let lambda = match lambda {
            Some(l) => l,
            None => optimal_ratio(f, false, lim)?.lambda,
        };
        let config = SynthesisConfig { limits: lim.enumeration, ..Default::default() };
        x_to_z(&synthesize(f, &lambda, &config)?.revenue)
    });
    Ok(PyAuction { inner: profile.py()? })
}

#[pyfunction(name = "lambda_n")]
fn py_lambda_n(py: Python<'_>, n: usize) -> PyResult<Bound<'_, PyAny>> {
    fraction(py, &lambda_n(n).py()?)
}

#[pyfunction(name = "gamma_n")]
fn py_gamma_n(py: Python<'_>, n: usize) -> PyResult<Bound<'_, PyAny>> {
    fraction(py, &gamma_n(n).py()?)
}

/// Median-of-means estimate and its error under equal-revenue values.
#[pyfunction(name = "simulate")]
#[pyo3(signature = (benchmark, n, samples = 1_000_000, seed = 0, blocks = 50))]
fn py_simulate(
    py: Python<'_>,
    benchmark: &str,
    n: usize,
    samples: usize,
    seed: u64,
    blocks: usize,
) -> PyResult<(f64, Option<f64>)> {
    let which: Builtin = benchmark.parse().py()?;
    if n < 2 {
        return Err(PyValueError::new_err(Error::TooFewBidders(n).to_string()));
    }
    let est = py.detach(|| mc_expected(|b| builtin_on_reals(which, b), n, samples, blocks, seed)).py()?;
    Ok((est.estimate, est.error.is_finite().then_some(est.error)))
}

#[pymodule(name = "optauction")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyBenchmark>()?;
    m.add_class::<PyVerdict>()?;
    m.add_class::<PyAuction>()?;
    m.add_function(wrap_pyfunction!(py_check_attainable, m)?)?;
    m.add_function(wrap_pyfunction!(py_optimal_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(py_synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(py_lambda_n, m)?)?;
    m.add_function(wrap_pyfunction!(py_gamma_n, m)?)?;
    m.add_function(wrap_pyfunction!(py_simulate, m)?)?;
    Ok(())
}
