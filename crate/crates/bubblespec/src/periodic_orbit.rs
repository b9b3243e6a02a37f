//! Time-periodic solutions of the forced system as fixed points of the
//! period map, and their stability.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linear_evolution::{fit_log_slope, propagator};
use crate::nonlinear_dynamics::{evolve_with, ForcingSpec, NonlinearSystem, Tolerances};
use crate::params::Equilibrium;
use crate::spectral_basis::gauss_legendre_unit;
use crate::state::{GalerkinState, StateScale};

/// Which solver produced a [`PeriodicSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointMethod {
    Picard,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicOptions {
    /// Target for the relative fixed-point residual.
    pub tol: f64,
    /// Relative tolerance of each period integration.
    pub integration_tol: f64,
    pub max_picard: usize,
    pub max_newton: usize,
    /// Orbit samples per period.
    pub samples: usize,
    /// Skip Picard and go straight to Newton.
    pub newton_only: bool,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            integration_tol: 1e-12,
            max_picard: 50,
            max_newton: 12,
            samples: 256,
            newton_only: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PeriodicSolution {
    pub w0: GalerkinState,
    pub period: f64,
    /// States at t = kT/samples, k = 0..samples − 1.
    pub orbit: Vec<DVector<f64>>,
    /// ‖P(w0) − w0‖ / (‖w0‖ + A/p∞*) in the scaled norm.
    pub residual: f64,
    pub iterations: usize,
    pub method: FixedPointMethod,
    /// Filled by [`floquet_multipliers`]; sorted by modulus, largest first.
    pub floquet: Vec<Complex64>,
    /// log|μ_max|/T when multipliers are available.
    pub contraction_rate: Option<f64>,
}

impl PeriodicSolution {
    /// Orbit state at any t by periodic cubic interpolation of the samples.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        let m = self.orbit.len();
        let x = (t / self.period).rem_euclid(1.0) * m as f64;
        let i = x.floor() as isize;
        let s = x - i as f64;
        let at = |k: isize| &self.orbit[k.rem_euclid(m as isize) as usize];
        // Lagrange weights on the nodes −1, 0, 1, 2.
        let w = [
            -s * (s - 1.0) * (s - 2.0) / 6.0,
            (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
            -(s + 1.0) * s * (s - 2.0) / 2.0,
            (s + 1.0) * s * (s - 1.0) / 6.0,
        ];
        at(i - 1) * w[0] + at(i) * w[1] + at(i + 1) * w[2] + at(i + 2) * w[3]
    }
}

fn amplitude_scale(sys: &NonlinearSystem) -> f64 {
    sys.forcing.amplitude.abs() / sys.eq.params.p_inf_star
}

fn tolerances(sys: &NonlinearSystem, w: &DVector<f64>, tol: f64) -> Tolerances {
    Tolerances::relative_to(sys, w, tol)
}

/// w(T; w0) for T = 2π/ω.
pub fn period_map(sys: &NonlinearSystem, w0: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    let (out, _) = evolve_with(
        sys,
        0.0,
        w0,
        &[sys.forcing.period()],
        tolerances(sys, w0, tol),
    )?;
    Ok(out.into_iter().next().expect("one output"))
}

/// The period map on states, integrated at relative tolerance 1e-12 with
/// truncation N = w0.n().
pub fn poincare_map(
    w0: &GalerkinState,
    forcing: &ForcingSpec,
    eq: &Equilibrium,
) -> Result<GalerkinState> {
    let sys = NonlinearSystem::new(eq, w0.n(), *forcing)?;
    sys.state(&period_map(&sys, &w0.to_vector(), 1e-12)?)
}

/// ∫_0^T e^{L(T−s)} f(s, w(s)) ds with f = ẇ − L w along the trajectory from
/// w0, by composite Gauss–Legendre quadrature on `panels` panels of four
/// nodes. Equals P(w0) − e^{LT} w0 up to quadrature error.
pub fn duhamel_quadrature(
    sys: &NonlinearSystem,
    w0: &DVector<f64>,
    panels: usize,
    tol: f64,
) -> Result<DVector<f64>> {
    let period = sys.forcing.period();
    let (x, wts) = gauss_legendre_unit(4);
    let h = period / panels as f64;
    let mut nodes = Vec::with_capacity(4 * panels);
    let mut weights = Vec::with_capacity(4 * panels);
    for p in 0..panels {
        for (xi, wi) in x.iter().zip(&wts) {
            nodes.push((p as f64 + xi) * h);
            weights.push(wi * h);
        }
    }
    let (states, _) = evolve_with(sys, 0.0, w0, &nodes, tolerances(sys, w0, tol))?;
    let terms: Vec<Result<DVector<f64>>> = nodes
        .par_iter()
        .zip(states.par_iter())
        .zip(weights.par_iter())
        .map(|((&s, w), &wt)| {
            let f = sys.rhs(s, w)? - sys.op.apply(w);
            Ok(propagator(&sys.op, period - s) * f * wt)
        })
        .collect();
    let mut acc = DVector::zeros(sys.dim());
    for t in terms {
        acc += t?;
    }
    Ok(acc)
}

/// Monodromy matrix ∂P/∂w at w0 by central differences, one pair of period
/// integrations per column (columns in parallel).
pub fn monodromy(sys: &NonlinearSystem, w0: &DVector<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let sc = StateScale::new(&sys.eq);
    let dim = sys.dim();
    let step = 1e-7;
    // Column error is about atol/step, i.e. 1e-6 at tol = 1e-12.
    let tols = Tolerances {
        rtol: tol,
        atol: 1e6 * tol * step,
    };
    let cols: Vec<Result<DVector<f64>>> = (0..dim)
        .into_par_iter()
        .map(|j| {
            let h = step * sc.of(j);
            let mut wp = w0.clone();
            let mut wm = w0.clone();
            wp[j] += h;
            wm[j] -= h;
            let t = [sys.forcing.period()];
            let (p, _) = evolve_with(sys, 0.0, &wp, &t, tols)?;
            let (m, _) = evolve_with(sys, 0.0, &wm, &t, tols)?;
            Ok((&p[0] - &m[0]) / (2.0 * h))
        })
        .collect();
    let mut mono = DMatrix::zeros(dim, dim);
    for (j, c) in cols.into_iter().enumerate() {
        mono.set_column(j, &c?);
    }
    Ok(mono)
}

/// Solves w0 = P(w0).
///
/// Picard form: w0 ← (I − E)⁻¹(P(w0) − E w0) with E = e^{LT}, which is the
/// fixed-point equation w0 = (I − E)⁻¹ ∫_0^T e^{L(T−s)} f ds written through
/// the variation-of-constants identity. Falls back to Newton on
/// P(w0) − w0 with a central-difference Jacobian if Picard stalls.
pub fn find_periodic(sys: &NonlinearSystem, opts: &PeriodicOptions) -> Result<PeriodicSolution> {
    if !(opts.tol > 0.0 && opts.integration_tol > 0.0) || opts.samples < 4 {
        return Err(Error::Validation("invalid periodic-orbit options".into()));
    }
    let period = sys.forcing.period();
    let dim = sys.dim();
    let sc = StateScale::new(&sys.eq);
    let amp = amplitude_scale(sys);
    let e = propagator(&sys.op, period);
    let ime = DMatrix::identity(dim, dim) - &e;
    let lu = ime.clone().lu();
    if !lu.is_invertible() {
        return Err(Error::Numerical("I − e^{LT} is singular".into()));
    }
    let rel = |w: &DVector<f64>, d: &DVector<f64>| {
        let size = sc.norm(w) + amp;
        if size == 0.0 {
            sc.norm(d)
        } else {
            sc.norm(d) / size
        }
    };

    let mut w = DVector::zeros(dim);
    let mut method = FixedPointMethod::Picard;
    let mut iterations = 0;
    let mut converged = false;
    if !opts.newton_only {
        let mut prev_step = f64::INFINITY;
        for _ in 0..opts.max_picard {
            iterations += 1;
            let pw = period_map(sys, &w, opts.integration_tol)?;
            let rhs = &pw - &e * &w;
            let next = lu
                .solve(&rhs)
                .ok_or_else(|| Error::Numerical("singular solve".into()))?;
            let step = rel(&next, &(&next - &w));
            w = next;
            if step <= 0.1 * opts.tol {
                converged = true;
                break;
            }
            if step > 0.9 * prev_step {
                break;
            }
            prev_step = step;
        }
    }
    let mut residual = rel(&w, &(period_map(sys, &w, opts.integration_tol)? - &w));
    if residual > opts.tol || !converged {
        method = FixedPointMethod::Newton;
        for _ in 0..opts.max_newton {
            iterations += 1;
            let f = period_map(sys, &w, opts.integration_tol)? - &w;
            residual = rel(&w, &f);
            if residual <= 0.1 * opts.tol {
                break;
            }
            let jac = monodromy(sys, &w, opts.integration_tol)? - DMatrix::identity(dim, dim);
            let delta = jac
                .lu()
                .solve(&(-f))
                .ok_or_else(|| Error::Numerical("singular Newton system".into()))?;
            w += delta;
        }
        residual = rel(&w, &(period_map(sys, &w, opts.integration_tol)? - &w));
    }
    if !(residual < opts.tol) {
        return Err(Error::Numerical(format!(
            "periodic orbit did not converge (relative residual {residual:e})"
        )));
    }

    let times: Vec<f64> = (0..=opts.samples)
        .map(|k| period * k as f64 / opts.samples as f64)
        .collect();
    let (mut orbit, _) = evolve_with(
        sys,
        0.0,
        &w,
        &times,
        tolerances(sys, &w, opts.integration_tol),
    )?;
    orbit.pop();
    Ok(PeriodicSolution {
        w0: sys.state(&w)?,
        period,
        orbit,
        residual,
        iterations,
        method,
        floquet: Vec::new(),
        contraction_rate: None,
    })
}

/// Eigenvalues of the monodromy matrix at the orbit, sorted by modulus
/// (largest first). Also stores them and log|μ_max|/T in `sol`.
pub fn floquet_multipliers(
    sys: &NonlinearSystem,
    sol: &mut PeriodicSolution,
) -> Result<Vec<Complex64>> {
    let w0 = sol.w0.to_vector();
    let mono = monodromy(sys, &w0, 1e-12)?;
    // Eigenvalues of the scaled matrix D⁻¹ M D (same spectrum, better balanced).
    let sc = StateScale::new(&sys.eq).diag(sys.dim());
    let scaled = DMatrix::from_fn(sys.dim(), sys.dim(), |i, j| mono[(i, j)] * sc[j] / sc[i]);
    let mut mu: Vec<Complex64> = scaled
        .complex_eigenvalues()
        .iter()
        .map(|c| Complex64::new(c.re, c.im))
        .collect();
    mu.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
    sol.contraction_rate = Some(mu[0].norm().ln() / sol.period);
    sol.floquet = mu.clone();
    Ok(mu)
}

/// Integrates from w0 + `perturbation` over `horizon` and fits the decay
/// rate of the scaled distance to the stored orbit at `n_out` equally spaced
/// times. Samples below `floor` (integration noise) are dropped.
pub fn convergence_to_orbit(
    sys: &NonlinearSystem,
    sol: &PeriodicSolution,
    perturbation: &GalerkinState,
    horizon: f64,
    n_out: usize,
) -> Result<f64> {
    perturbation.check_n(sys.n)?;
    if !(horizon > 0.0) || n_out < 2 {
        return Err(Error::Validation(
            "need a positive horizon and two outputs".into(),
        ));
    }
    let sc = StateScale::new(&sys.eq);
    let w0 = sol.w0.to_vector() + perturbation.to_vector();
    let times: Vec<f64> = (1..=n_out)
        .map(|k| horizon * k as f64 / n_out as f64)
        .collect();
    let size = sc.norm(&perturbation.to_vector());
    let tols = Tolerances {
        rtol: 1e-12,
        atol: 1e-12 * size,
    };
    let (states, _) = evolve_with(sys, 0.0, &w0, &times, tols)?;
    let floor = 1e-8 * size;
    let (ts, ds): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&states)
        .map(|(&t, w)| (t, sc.norm(&(w - sol.eval(t)))))
        .filter(|(_, d)| *d > floor)
        .unzip();
    fit_log_slope(&ts, &ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{mass_for_radius, solve_equilibrium, PhysicalParams};

    fn eq() -> Equilibrium {
        let p = PhysicalParams::air_water();
        solve_equilibrium(&p, mass_for_radius(&p, 1e-5)).unwrap()
    }

    fn system(amp_rel: f64, n: usize) -> NonlinearSystem {
        let e = eq();
        let f = ForcingSpec::cosine(0.8 * e.omega0(), amp_rel * e.params.p_inf_star);
        NonlinearSystem::new(&e, n, f).unwrap()
    }

    #[test]
    fn unforced_orbit_is_zero() {
        let sys = system(0.0, 8);
        let sol = find_periodic(&sys, &PeriodicOptions::default()).unwrap();
        assert!(sol.w0.to_vector().iter().all(|x| *x == 0.0));
        assert!(sol.residual < 1e-12);
    }

    #[test]
    fn unforced_multipliers_are_linear() {
        let sys = system(0.0, 8);
        let mut sol = find_periodic(&sys, &PeriodicOptions::default()).unwrap();
        let mu = floquet_multipliers(&sys, &mut sol).unwrap();
        let ev = sys.op.eigenvalues();
        let mut expected: Vec<Complex64> = ev.iter().map(|l| (l * sol.period).exp()).collect();
        expected.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        for (a, b) in mu.iter().zip(&expected).take(4) {
            assert!((a.norm() - b.norm()).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn period_map_contracts_and_composes() {
        let e = eq();
        let sys = system(0.0, 8);
        let mut w = DVector::zeros(10);
        w[0] = 1e-4 * e.r_star;
        w[2] = 1e-4 * e.rho_star;
        let sc = StateScale::new(&e);
        let p1 = period_map(&sys, &w, 1e-12).unwrap();
        assert!(sc.norm(&p1) < sc.norm(&w));
        let p2 = period_map(&sys, &p1, 1e-12).unwrap();
        let t2 = 2.0 * sys.forcing.period();
        let (direct, _) = evolve_with(&sys, 0.0, &w, &[t2], tolerances(&sys, &w, 1e-12)).unwrap();
        assert!(sc.norm(&(&p2 - &direct[0])) < 1e-9 * sc.norm(&p2));
    }

    #[test]
    fn duhamel_identity() {
        let sys = system(1e-4, 8);
        let mut w = DVector::zeros(10);
        w[0] = 1e-6 * sys.eq.r_star;
        let quad = duhamel_quadrature(&sys, &w, 64, 1e-12).unwrap();
        let e = propagator(&sys.op, sys.forcing.period());
        let ident = period_map(&sys, &w, 1e-12).unwrap() - e * &w;
        let sc = StateScale::new(&sys.eq);
        // The stiff thermal modes make the integrand steep near s = T, so
        // the quadrature is compared on the slow components.
        assert!((quad[0] - ident[0]).abs() < 1e-6 * sc.norm(&ident) * sc.of(0));
        assert!((quad[1] - ident[1]).abs() < 1e-6 * sc.norm(&ident) * sc.of(1));
    }

    #[test]
    fn picard_and_newton_agree() {
        let sys = system(1e-4, 8);
        let opts = PeriodicOptions::default();
        let a = find_periodic(&sys, &opts).unwrap();
        assert_eq!(a.method, FixedPointMethod::Picard);
        let b = find_periodic(
            &sys,
            &PeriodicOptions {
                newton_only: true,
                ..opts
            },
        )
        .unwrap();
        assert_eq!(b.method, FixedPointMethod::Newton);
        let sc = StateScale::new(&sys.eq);
        let d = sc.norm(&(a.w0.to_vector() - b.w0.to_vector()));
        assert!(
            d < 10.0 * opts.tol * (sc.norm(&a.w0.to_vector()) + 1e-4),
            "{d}"
        );
    }

    #[test]
    fn orbit_interpolation_is_periodic() {
        let sys = system(1e-4, 8);
        let sol = find_periodic(&sys, &PeriodicOptions::default()).unwrap();
        let sc = StateScale::new(&sys.eq);
        let a = sol.eval(0.0);
        let b = sol.eval(sol.period);
        assert!(sc.norm(&(&a - &b)) <= 1e-14 * sc.norm(&a));
        // Midpoint interpolation against a direct integration.
        let t = 0.3137 * sol.period;
        let w0 = sol.w0.to_vector();
        let (direct, _) = evolve_with(&sys, 0.0, &w0, &[t], tolerances(&sys, &w0, 1e-12)).unwrap();
        assert!(sc.norm(&(sol.eval(t) - &direct[0])) < 1e-6 * sc.norm(&direct[0]));
    }

    #[test]
    fn perturbations_decay_onto_orbit() {
        let sys = system(1e-5, 8);
        let sol = find_periodic(&sys, &PeriodicOptions::default()).unwrap();
        let mut pert = GalerkinState::zeros(8);
        pert.r_pert = 1e-6 * sys.eq.r_star;
        pert.coeffs[0] = 1e-6 * sys.eq.rho_star;
        let horizon = 10.0 * sol.period;
        let rate = convergence_to_orbit(&sys, &sol, &pert, horizon, 10 * 256 / 16).unwrap();
        let beta = crate::spectrum::rate_lower_bound(&sys.eq).beta;
        assert!(rate >= beta, "{rate} vs {beta}");
        let abscissa = sys.op.spectral_abscissa();
        assert!(
            ((rate + abscissa) / abscissa).abs() < 0.1,
            "{rate} vs {abscissa}"
        );
    }
}
