//! Python bindings: PDE and Monte Carlo prices, the exercise boundary and
//! the verification report. Heavy calls release the GIL.

use heston_amer::boundary::default_tol;
use heston_amer::mc::{european_mc_price, lsmc_price, McConfig};
use heston_amer::model::feller_satisfied;
use heston_amer::{
    extract_boundary, run_suite, solve_american, solve_european, Error, GridSpec, PenaltyFamily,
    PutSpec, SolverOptions, SuiteConfig,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter { .. } | Error::InvalidLattice(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Heston parameters `(κ, θ, σ, ρ, r, δ)`.
#[pyclass(name = "HestonParams", from_py_object)]
#[derive(Clone, Copy)]
struct PyParams {
    inner: heston_amer::HestonParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (kappa=1.5, theta=0.04, sigma=0.3, rho=-0.5, r=0.05, delta=0.02))]
    fn new(kappa: f64, theta: f64, sigma: f64, rho: f64, r: f64, delta: f64) -> PyResult<Self> {
        let inner = heston_amer::HestonParams::new(kappa, theta, sigma, rho, r, delta)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }
    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }
    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }
    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }
    #[getter]
    fn r(&self) -> f64 {
        self.inner.r
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    /// `2κθ ≥ σ²`.
    fn feller(&self) -> bool {
        feller_satisfied(&self.inner)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "HestonParams(kappa={}, theta={}, sigma={}, rho={}, r={}, delta={})",
            p.kappa, p.theta, p.sigma, p.rho, p.r, p.delta
        )
    }
}

/// Contract, starting state and lattice shared by the functions below.
struct Setup {
    params: heston_amer::HestonParams,
    spec: PutSpec,
    spot: f64,
    y0: f64,
    grid: GridSpec,
}

impl Setup {
    #[allow(clippy::too_many_arguments)]
    fn new(
        params: Option<PyParams>,
        strike: f64,
        maturity: f64,
        spot: f64,
        y0: f64,
        nx: usize,
        ny: usize,
        steps: usize,
    ) -> PyResult<Self> {
        Ok(Self {
            params: params.map(|p| p.inner).unwrap_or_else(heston_amer::HestonParams::desk),
            spec: PutSpec::new(strike, maturity).map_err(to_py)?,
            spot,
            y0,
            grid: GridSpec {
                nx,
                ny,
                steps,
                ..GridSpec::desk()
            },
        })
    }

    fn american(&self) -> heston_amer::Result<heston_amer::PriceSurface> {
        let lattice = self.grid.build(&self.params, &self.spec, self.spot, self.y0)?;
        solve_american(
            &self.params,
            &self.spec,
            &lattice,
            &PenaltyFamily::for_put(&self.params, &self.spec),
            &SolverOptions::default(),
        )
    }

    fn european(&self) -> heston_amer::Result<heston_amer::PriceSurface> {
        let lattice = self.grid.build(&self.params, &self.spec, self.spot, self.y0)?;
        solve_european(&self.params, &self.spec, &lattice, &SolverOptions::default())
    }
}

fn mc_config(paths: usize, dates: usize, substeps: usize, seed: u64) -> McConfig {
    McConfig {
        paths,
        dates,
        substeps,
        seed,
    }
}

/// American put at `(0, spot, y0)` by the penalized PDE solver.
#[pyfunction]
#[pyo3(signature = (params=None, strike=100.0, maturity=1.0, spot=100.0, y0=0.04, nx=161, ny=81, steps=100))]
#[allow(clippy::too_many_arguments)]
fn american_put(
    py: Python<'_>,
    params: Option<PyParams>,
    strike: f64,
    maturity: f64,
    spot: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    steps: usize,
) -> PyResult<f64> {
    let s = Setup::new(params, strike, maturity, spot, y0, nx, ny, steps)?;
    py.detach(|| s.american().map(|u| u.price(s.spot, s.y0)))
        .map_err(to_py)
}

/// European put at `(0, spot, y0)` by the PDE solver.
#[pyfunction]
#[pyo3(signature = (params=None, strike=100.0, maturity=1.0, spot=100.0, y0=0.04, nx=161, ny=81, steps=100))]
#[allow(clippy::too_many_arguments)]
fn european_put(
    py: Python<'_>,
    params: Option<PyParams>,
    strike: f64,
    maturity: f64,
    spot: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    steps: usize,
) -> PyResult<f64> {
    let s = Setup::new(params, strike, maturity, spot, y0, nx, ny, steps)?;
    py.detach(|| s.european().map(|u| u.price(s.spot, s.y0)))
        .map_err(to_py)
}

/// American put by least-squares Monte Carlo: `(price, standard error)`.
#[pyfunction]
#[pyo3(signature = (params=None, strike=100.0, maturity=1.0, spot=100.0, y0=0.04, paths=100_000, dates=50, substeps=4, seed=20_240_601))]
#[allow(clippy::too_many_arguments)]
fn lsmc_put(
    py: Python<'_>,
    params: Option<PyParams>,
    strike: f64,
    maturity: f64,
    spot: f64,
    y0: f64,
    paths: usize,
    dates: usize,
    substeps: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let p = params.map(|p| p.inner).unwrap_or_else(heston_amer::HestonParams::desk);
    let spec = PutSpec::new(strike, maturity).map_err(to_py)?;
    let cfg = mc_config(paths, dates, substeps, seed);
    let est = py
        .detach(|| lsmc_price(&p, &spec, spot, y0, &cfg))
        .map_err(to_py)?;
    Ok((est.price, est.std_error))
}

/// European put by Monte Carlo: `(price, standard error)`.
#[pyfunction]
#[pyo3(signature = (params=None, strike=100.0, maturity=1.0, spot=100.0, y0=0.04, paths=100_000, dates=50, substeps=4, seed=20_240_601))]
#[allow(clippy::too_many_arguments)]
fn european_mc_put(
    py: Python<'_>,
    params: Option<PyParams>,
    strike: f64,
    maturity: f64,
    spot: f64,
    y0: f64,
    paths: usize,
    dates: usize,
    substeps: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let p = params.map(|p| p.inner).unwrap_or_else(heston_amer::HestonParams::desk);
    let spec = PutSpec::new(strike, maturity).map_err(to_py)?;
    let cfg = mc_config(paths, dates, substeps, seed);
    let est = py
        .detach(|| european_mc_price(&p, &spec, spot, y0, &cfg))
        .map_err(to_py)?;
    Ok((est.price, est.std_error))
}

/// Exercise boundary `b(t, y)` on the lattice nodes: `(t_nodes, y_nodes,
/// rows)` with one row per time node. Unresolved nodes are `nan`.
#[pyfunction]
#[pyo3(signature = (params=None, strike=100.0, maturity=1.0, spot=100.0, y0=0.04, nx=161, ny=81, steps=100))]
#[allow(clippy::too_many_arguments)]
fn exercise_boundary(
    py: Python<'_>,
    params: Option<PyParams>,
    strike: f64,
    maturity: f64,
    spot: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    steps: usize,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let s = Setup::new(params, strike, maturity, spot, y0, nx, ny, steps)?;
    let b = py
        .detach(|| {
            let u = s.american()?;
            extract_boundary(&u, default_tol(&u))
        })
        .map_err(to_py)?;
    let rows = (0..b.nt())
        .map(|ti| {
            (0..b.ny())
                .map(|k| {
                    if b.is_unresolved(ti, k) {
                        f64::NAN
                    } else {
                        b.b(ti, k)
                    }
                })
                .collect()
        })
        .collect();
    Ok((b.t_nodes, b.y_nodes, rows))
}

/// Runs the verification suite and returns the report as JSON text.
#[pyfunction]
#[pyo3(signature = (params=None, strike=100.0, maturity=1.0, spot=100.0, y0=0.04, nx=161, ny=81, steps=100, paths=100_000, dates=50, substeps=4, seed=20_240_601))]
#[allow(clippy::too_many_arguments)]
fn verify(
    py: Python<'_>,
    params: Option<PyParams>,
    strike: f64,
    maturity: f64,
    spot: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    steps: usize,
    paths: usize,
    dates: usize,
    substeps: usize,
    seed: u64,
) -> PyResult<String> {
    let s = Setup::new(params, strike, maturity, spot, y0, nx, ny, steps)?;
    let cfg = SuiteConfig {
        params: s.params,
        spec: s.spec,
        s0: s.spot,
        y0: s.y0,
        grid: s.grid,
        solver: SolverOptions::default(),
        mc: mc_config(paths, dates, substeps, seed),
    };
    py.detach(|| run_suite(&cfg).and_then(|r| r.to_json()))
        .map_err(to_py)
}

#[pymodule(name = "heston_amer")]
fn heston_amer_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_function(wrap_pyfunction!(american_put, m)?)?;
    m.add_function(wrap_pyfunction!(european_put, m)?)?;
    m.add_function(wrap_pyfunction!(lsmc_put, m)?)?;
    m.add_function(wrap_pyfunction!(european_mc_put, m)?)?;
    m.add_function(wrap_pyfunction!(exercise_boundary, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
