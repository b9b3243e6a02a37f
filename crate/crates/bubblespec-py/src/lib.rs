//! Python bindings. Validation errors raise `ValueError`, numerical failures
//! raise `RuntimeError`.

use bubblespec::linear_evolution::evolve_linear as core_evolve_linear;
use bubblespec::nonlinear_dynamics::{self as nl, ForcingSpec, NonlinearSystem, Waveform};
use bubblespec::periodic_orbit::{self as po, FixedPointMethod, PeriodicOptions};
use bubblespec::rate_report as rr;
use bubblespec::spectrum::{self as sp, Region};
use bubblespec::{build_operator, Error, GalerkinState};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Validation(m) => PyValueError::new_err(m),
        Error::Numerical(m) => PyRuntimeError::new_err(m),
    }
}

#[pyclass(name = "PhysicalParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyParams {
    #[pyo3(get)]
    kappa: f64,
    #[pyo3(get)]
    gamma: f64,
    #[pyo3(get)]
    c_v: f64,
    #[pyo3(get)]
    r_g: f64,
    #[pyo3(get)]
    t_inf: f64,
    #[pyo3(get)]
    p_inf_star: f64,
    #[pyo3(get)]
    sigma: f64,
    #[pyo3(get)]
    mu_l: f64,
    #[pyo3(get)]
    rho_l: f64,
}

impl PyParams {
    fn core(&self) -> PyResult<bubblespec::PhysicalParams> {
        bubblespec::PhysicalParams::new(
            self.kappa,
            self.gamma,
            self.c_v,
            self.r_g,
            self.t_inf,
            self.p_inf_star,
            self.sigma,
            self.mu_l,
            self.rho_l,
        )
        .map_err(to_py)
    }

    fn from_core(p: &bubblespec::PhysicalParams) -> Self {
        Self {
            kappa: p.kappa,
            gamma: p.gamma,
            c_v: p.c_v,
            r_g: p.r_g,
            t_inf: p.t_inf,
            p_inf_star: p.p_inf_star,
            sigma: p.sigma,
            mu_l: p.mu_l,
            rho_l: p.rho_l,
        }
    }
}

#[pymethods]
impl PyParams {
    #[new]
    #[allow(clippy::too_many_arguments)]
    fn new(
        kappa: f64,
        gamma: f64,
        c_v: f64,
        r_g: f64,
        t_inf: f64,
        p_inf_star: f64,
        sigma: f64,
        mu_l: f64,
        rho_l: f64,
    ) -> PyResult<Self> {
        let p = Self {
            kappa,
            gamma,
            c_v,
            r_g,
            t_inf,
            p_inf_star,
            sigma,
            mu_l,
            rho_l,
        };
        p.core()?;
        Ok(p)
    }

    /// Air bubble in water at room temperature.
    #[staticmethod]
    fn air_water() -> Self {
        Self::from_core(&bubblespec::PhysicalParams::air_water())
    }

    /// Copy with the thermal conductivity replaced.
    fn with_kappa(&self, kappa: f64) -> PyResult<Self> {
        let p = Self {
            kappa,
            ..self.clone()
        };
        p.core()?;
        Ok(p)
    }

    fn __repr__(&self) -> String {
        format!(
            "PhysicalParams(kappa={:e}, gamma={:e}, c_v={:e}, r_g={:e}, t_inf={:e}, p_inf_star={:e}, sigma={:e}, mu_l={:e}, rho_l={:e})",
            self.kappa, self.gamma, self.c_v, self.r_g, self.t_inf, self.p_inf_star, self.sigma, self.mu_l, self.rho_l
        )
    }
}

#[pyclass(name = "Equilibrium", frozen, from_py_object)]
#[derive(Clone)]
struct PyEquilibrium {
    inner: bubblespec::Equilibrium,
}

#[pymethods]
impl PyEquilibrium {
    #[getter]
    fn params(&self) -> PyParams {
        PyParams::from_core(&self.inner.params)
    }
    #[getter]
    fn mass(&self) -> f64 {
        self.inner.m
    }
    #[getter]
    fn r_star(&self) -> f64 {
        self.inner.r_star
    }
    #[getter]
    fn rho_star(&self) -> f64 {
        self.inner.rho_star
    }
    #[getter]
    fn p_star(&self) -> f64 {
        self.inner.p_star
    }
    #[getter]
    fn chi(&self) -> f64 {
        self.inner.chi
    }
    #[getter]
    fn kappa_bar(&self) -> f64 {
        self.inner.kappa_bar
    }
    #[getter]
    fn omega0(&self) -> f64 {
        self.inner.omega0()
    }

    /// Relative residuals (mass identity, pressure balance).
    fn identity_residuals(&self) -> (f64, f64) {
        self.inner.identity_residuals()
    }

    fn __repr__(&self) -> String {
        format!(
            "Equilibrium(r_star={:e}, rho_star={:e}, chi={:e})",
            self.inner.r_star, self.inner.rho_star, self.inner.chi
        )
    }
}

#[pyclass(name = "RateBound", frozen, skip_from_py_object)]
struct PyRateBound {
    #[pyo3(get)]
    beta: f64,
    #[pyo3(get)]
    epsilon_used: f64,
    #[pyo3(get)]
    branch_terms: [f64; 3],
    #[pyo3(get)]
    delta_disc: f64,
    #[pyo3(get)]
    binding_branch: usize,
}

#[pyclass(name = "PeriodicSolution", frozen, skip_from_py_object)]
struct PyPeriodicSolution {
    #[pyo3(get)]
    period: f64,
    #[pyo3(get)]
    residual: f64,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    method: &'static str,
    /// (ℛ, ℛ̇, c_1, …, c_N) at t = 0.
    #[pyo3(get)]
    w0: Vec<f64>,
    #[pyo3(get)]
    floquet: Vec<Complex64>,
    #[pyo3(get)]
    contraction_rate: Option<f64>,
}

#[pyclass(name = "RegimeReport", frozen, skip_from_py_object)]
struct PyRegimeReport {
    inner: rr::RegimeReport,
}

#[pymethods]
impl PyRegimeReport {
    #[getter]
    fn chi_values(&self) -> Vec<f64> {
        self.inner.chi_values.clone()
    }
    #[getter]
    fn beta_bound(&self) -> Vec<f64> {
        self.inner.beta_bound.clone()
    }
    #[getter]
    fn beta_isothermal(&self) -> Vec<f64> {
        self.inner.beta_isothermal.clone()
    }
    #[getter]
    fn beta_adiabatic(&self) -> Vec<f64> {
        self.inner.beta_adiabatic.clone()
    }
    #[getter]
    fn beta_p91_isothermal(&self) -> Vec<f64> {
        self.inner.beta_p91_isothermal.clone()
    }
    #[getter]
    fn beta_p91_adiabatic_per(&self) -> Vec<f64> {
        self.inner.beta_p91_adiabatic_per.clone()
    }
    #[getter]
    fn spectral_abscissa(&self) -> Vec<f64> {
        self.inner.spectral_abscissa.clone()
    }
    #[getter]
    fn binding_branch(&self) -> Vec<usize> {
        self.inner.binding_branch.clone()
    }
    #[getter]
    fn regime_labels(&self) -> Vec<&'static str> {
        self.inner
            .regime_labels
            .iter()
            .map(|r| r.as_str())
            .collect()
    }

    fn crossovers(&self) -> Vec<usize> {
        self.inner.crossovers()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn summary(&self) -> String {
        self.inner.summary()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
fn solve_equilibrium(params: &PyParams, mass: f64) -> PyResult<PyEquilibrium> {
    let inner = bubblespec::solve_equilibrium(&params.core()?, mass).map_err(to_py)?;
    Ok(PyEquilibrium { inner })
}

/// Mass of the bubble whose equilibrium radius is `r_star`.
#[pyfunction]
fn mass_for_radius(params: &PyParams, r_star: f64) -> PyResult<f64> {
    Ok(bubblespec::params::mass_for_radius(&params.core()?, r_star))
}

/// Roots of the characteristic function in the default search region,
/// sorted by real part.
#[pyfunction]
#[pyo3(signature = (eq, max_roots = 64))]
fn find_roots(py: Python<'_>, eq: &PyEquilibrium, max_roots: usize) -> PyResult<Vec<Complex64>> {
    let e = eq.inner;
    let roots = py
        .detach(|| sp::find_roots(&e, &Region::default_for(&e), max_roots))
        .map_err(to_py)?;
    Ok(roots.iter().map(|r| r.tau).collect())
}

#[pyfunction]
fn rate_lower_bound(eq: &PyEquilibrium) -> PyRateBound {
    let rb = sp::rate_lower_bound(&eq.inner);
    PyRateBound {
        beta: rb.beta,
        epsilon_used: rb.epsilon_used,
        branch_terms: rb.branch_terms,
        delta_disc: rb.delta_disc,
        binding_branch: rb.binding_branch,
    }
}

/// Σ_{j≥1} 1/(j⁴ + B²) for B ≥ 0.
#[pyfunction]
#[pyo3(signature = (b, tol = 1e-15))]
fn quartic_sum(b: f64, tol: f64) -> PyResult<f64> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(PyValueError::new_err(format!(
            "B must be finite and nonnegative, got {b}"
        )));
    }
    Ok(sp::quartic_sum(b, tol))
}

/// Eigenvalues of the N-mode truncated generator.
#[pyfunction]
fn truncated_spectrum(eq: &PyEquilibrium, n: usize) -> PyResult<Vec<Complex64>> {
    Ok(build_operator(&eq.inner, n).map_err(to_py)?.eigenvalues())
}

#[pyfunction]
fn spectral_abscissa(eq: &PyEquilibrium, n: usize) -> PyResult<f64> {
    Ok(build_operator(&eq.inner, n)
        .map_err(to_py)?
        .spectral_abscissa())
}

/// (β_isothermal, β_adiabatic).
#[pyfunction]
fn regime_bounds(eq: &PyEquilibrium) -> (f64, f64) {
    rr::regime_bounds(&eq.inner)
}

/// (β_P91_isothermal, β_P91_adiabatic_per) at forcing frequency `omega`.
#[pyfunction]
fn prosperetti_rates(eq: &PyEquilibrium, omega: f64) -> (f64, f64) {
    rr::prosperetti_rates(&eq.inner, omega)
}

#[pyfunction]
#[pyo3(signature = (params, mass, chi_grid, omega = None))]
fn sweep_chi(
    py: Python<'_>,
    params: &PyParams,
    mass: f64,
    chi_grid: Vec<f64>,
    omega: Option<f64>,
) -> PyResult<PyRegimeReport> {
    let p = params.core()?;
    let inner = py
        .detach(|| rr::sweep_chi(&p, mass, &chi_grid, omega))
        .map_err(to_py)?;
    Ok(PyRegimeReport { inner })
}

/// Linear evolution from a radial displacement `r0` [m] at rest, with the
/// density coefficients zero. Returns (radius perturbations, energies).
#[pyfunction]
fn evolve_linear(
    eq: &PyEquilibrium,
    n: usize,
    r0: f64,
    times: Vec<f64>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let op = build_operator(&eq.inner, n).map_err(to_py)?;
    let w0 = GalerkinState::linear(&eq.inner, r0, 0.0, vec![0.0; n]);
    let trace = core_evolve_linear(&op, &w0, &times).map_err(to_py)?;
    Ok((trace.radius_perturbation(), trace.energies))
}

fn system(
    eq: &PyEquilibrium,
    n: usize,
    omega: Option<f64>,
    amplitude: f64,
) -> PyResult<NonlinearSystem> {
    let forcing = ForcingSpec {
        omega: omega.unwrap_or_else(|| eq.inner.omega0()),
        amplitude,
        waveform: Waveform::Cosine,
    };
    NonlinearSystem::new(&eq.inner, n, forcing).map_err(to_py)
}

/// Nonlinear evolution from a radial displacement `r0` [m] under cosine
/// forcing. Returns (times, radius perturbations, physical masses).
#[pyfunction]
#[pyo3(signature = (eq, n, r0, t_end, n_out, omega = None, amplitude = 0.0, tol = 1e-10))]
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn evolve_nonlinear(
    py: Python<'_>,
    eq: &PyEquilibrium,
    n: usize,
    r0: f64,
    t_end: f64,
    n_out: usize,
    omega: Option<f64>,
    amplitude: f64,
    tol: f64,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let sys = system(eq, n, omega, amplitude)?;
    let coeffs = vec![0.0; n];
    let w0 = GalerkinState {
        r_pert: r0,
        r_dot: 0.0,
        z: sys.z_of(r0, &coeffs).map_err(to_py)?,
        coeffs,
    };
    let trace = py
        .detach(|| nl::evolve_nonlinear(&sys, &w0, t_end, n_out, tol))
        .map_err(to_py)?;
    let r = trace.states.iter().map(|s| s.r_pert).collect();
    Ok((trace.times, r, trace.mass))
}

/// Periodic orbit under cosine forcing and its Floquet multipliers.
#[pyfunction]
#[pyo3(signature = (eq, n, amplitude, omega = None, tol = 1e-10))]
fn find_periodic(
    py: Python<'_>,
    eq: &PyEquilibrium,
    n: usize,
    amplitude: f64,
    omega: Option<f64>,
    tol: f64,
) -> PyResult<PyPeriodicSolution> {
    let sys = system(eq, n, omega, amplitude)?;
    let opts = PeriodicOptions {
        tol,
        ..PeriodicOptions::default()
    };
    let sol = py
        .detach(|| {
            let mut sol = po::find_periodic(&sys, &opts)?;
            po::floquet_multipliers(&sys, &mut sol)?;
            Ok(sol)
        })
        .map_err(to_py)?;
    Ok(PyPeriodicSolution {
        period: sol.period,
        residual: sol.residual,
        iterations: sol.iterations,
        method: match sol.method {
            FixedPointMethod::Picard => "picard",
            FixedPointMethod::Newton => "newton",
        },
        w0: sol.w0.to_vector().iter().copied().collect(),
        floquet: sol.floquet,
        contraction_rate: sol.contraction_rate,
    })
}

#[pymodule]
fn bubblespec_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyEquilibrium>()?;
    m.add_class::<PyRateBound>()?;
    m.add_class::<PyPeriodicSolution>()?;
    m.add_class::<PyRegimeReport>()?;
    m.add_function(wrap_pyfunction!(solve_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(mass_for_radius, m)?)?;
    m.add_function(wrap_pyfunction!(find_roots, m)?)?;
    m.add_function(wrap_pyfunction!(rate_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(quartic_sum, m)?)?;
    m.add_function(wrap_pyfunction!(truncated_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_abscissa, m)?)?;
    m.add_function(wrap_pyfunction!(regime_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(prosperetti_rates, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_chi, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_linear, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_nonlinear, m)?)?;
    m.add_function(wrap_pyfunction!(find_periodic, m)?)?;
    Ok(())
}
