//! Linear evolution e^{Lt} w0, the mass constraint, the energy functional and
//! its dissipation, and decay-rate fitting.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linear_operator::TruncatedOperator;
use crate::params::{lambda, Equilibrium};
use crate::state::{gamma_dot, GalerkinState, StateScale};

/// Sampled trajectory with the energy and the L²-type norm at each time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub times: Vec<f64>,
    pub states: Vec<GalerkinState>,
    pub energies: Vec<f64>,
    pub norms: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn radius_perturbation(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.r_pert).collect()
    }
}

/// Propagator e^{Lt}, computed on the rescaled generator.
pub fn propagator(op: &TruncatedOperator, t: f64) -> DMatrix<f64> {
    let d = StateScale::new(&op.eq).diag(op.dim());
    let n = op.dim();
    let scaled = DMatrix::from_fn(n, n, |i, j| op.matrix[(i, j)] * d[j] / d[i] * t);
    let e = scaled.exp();
    DMatrix::from_fn(n, n, |i, j| e[(i, j)] * d[i] / d[j])
}

/// Evaluates w(t) = e^{Lt} w0 at the given nondecreasing times (t ≥ 0).
/// Propagators for repeated increments are reused.
pub fn evolve_linear(op: &TruncatedOperator, w0: &GalerkinState, times: &[f64]) -> Result<Trace> {
    w0.check_n(op.n)?;
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Validation(
            "times must be finite and nonnegative".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Validation("times must be nondecreasing".into()));
    }
    let mut cache: HashMap<u64, DMatrix<f64>> = HashMap::new();
    let mut w = w0.to_vector();
    let mut t_prev = 0.0;
    let mut states = Vec::with_capacity(times.len());
    let mut energies = Vec::with_capacity(times.len());
    let mut norms = Vec::with_capacity(times.len());
    for &t in times {
        let dt = t - t_prev;
        if dt > 0.0 {
            // Round the increment so that uniformly spaced grids share one key.
            let key = round_sig(dt).to_bits();
            let e = cache.entry(key).or_insert_with(|| propagator(op, dt));
            w = &*e * &w;
        }
        t_prev = t;
        let s = GalerkinState::from_vector_linear(&op.eq, &w);
        energies.push(energy_total(&op.eq, &s)?);
        norms.push(l2_norm(&op.eq, &s));
        states.push(s);
    }
    Ok(Trace {
        times: times.to_vec(),
        states,
        energies,
        norms,
    })
}

fn round_sig(x: f64) -> f64 {
    let e = x.abs().log10().floor();
    let f = 10f64.powf(12.0 - e);
    (x * f).round() / f
}

fn ratio(eq: &Equilibrium) -> f64 {
    let g = eq.params.gamma;
    g / (g - 1.0)
}

/// ∫_{B_1} u = (γ/(γ−1)) Σ Γ_j c_j.
pub fn mean_u(eq: &Equilibrium, s: &GalerkinState) -> f64 {
    ratio(eq) * gamma_dot(eq.params.gamma, &s.coeffs)
}

/// Linearized mass residual (γ/(γ−1)) Σ Γ_j c_j + (4π/3) z + 4π(ρ*/R*) ℛ,
/// using the state's own `z`.
pub fn mass_residual(eq: &Equilibrium, s: &GalerkinState) -> f64 {
    mean_u(eq, s) + 4.0 * PI / 3.0 * s.z + 4.0 * PI * eq.rho_star / eq.r_star * s.r_pert
}

/// Size of the individual terms of [`mass_residual`], for relative checks.
pub fn mass_scale(eq: &Equilibrium, s: &GalerkinState) -> f64 {
    mean_u(eq, s).abs()
        + 4.0 * PI / 3.0 * s.z.abs()
        + 4.0 * PI * eq.rho_star / eq.r_star * s.r_pert.abs()
}

/// Boundary density from the linearized pressure balance
/// R_g T∞ z = −2σℛ/R*² + 4μ_l ℛ̇/R* + ρ_l R* ℛ̈.
pub fn boundary_z(eq: &Equilibrium, s: &GalerkinState, r_ddot: f64) -> f64 {
    let p = &eq.params;
    (-2.0 * p.sigma * s.r_pert / (eq.r_star * eq.r_star)
        + 4.0 * p.mu_l * s.r_dot / eq.r_star
        + p.rho_l * eq.r_star * r_ddot)
        / (p.r_g * p.t_inf)
}

/// Relative mass residual along a trace with z taken from the boundary
/// condition and ℛ̈ from the generator. Unlike [`mass_residual`] on states
/// built by [`GalerkinState::linear`], this is not satisfied by construction.
pub fn trace_mass_residuals(op: &TruncatedOperator, trace: &Trace) -> Vec<f64> {
    trace
        .states
        .iter()
        .map(|s| {
            let r_ddot = op.apply(&s.to_vector())[1];
            let bc = GalerkinState {
                z: boundary_z(&op.eq, s, r_ddot),
                ..s.clone()
            };
            let scale = mass_scale(&op.eq, &bc);
            if scale == 0.0 {
                0.0
            } else {
                mass_residual(&op.eq, &bc).abs() / scale
            }
        })
        .collect()
}

/// Adjusts ℛ so that the mass residual vanishes for the given c and z.
pub fn project_mass_constraint(eq: &Equilibrium, s: &GalerkinState) -> GalerkinState {
    let r = -eq.r_star / (4.0 * PI * eq.rho_star) * (mean_u(eq, s) + 4.0 * PI / 3.0 * s.z);
    GalerkinState {
        r_pert: r,
        ..s.clone()
    }
}

fn check_constrained(eq: &Equilibrium, s: &GalerkinState) -> Result<()> {
    let res = mass_residual(eq, s).abs();
    let scale = mass_scale(eq, s);
    if res > 1e-8 * scale {
        return Err(Error::Validation(format!(
            "state violates the mass constraint (relative residual {:e})",
            res / scale
        )));
    }
    Ok(())
}

/// Linearized energy
/// E = −4πσℛ² − 4πR_gT∞R*²ℛz − (2πR_gT∞R*³/(3ρ*))z²
///     + (c_vγT∞R*³/(2ρ*)) Σ c_j² + 2πρ_l R*³ ℛ̇².
/// Only meaningful on states satisfying the mass constraint; others are
/// rejected.
pub fn energy_total(eq: &Equilibrium, s: &GalerkinState) -> Result<f64> {
    check_constrained(eq, s)?;
    let p = &eq.params;
    let rt = p.r_g * p.t_inf;
    let r = eq.r_star;
    let c2: f64 = s.coeffs.iter().map(|c| c * c).sum();
    Ok(-4.0 * PI * p.sigma * s.r_pert.powi(2)
        - 4.0 * PI * rt * r * r * s.r_pert * s.z
        - 2.0 * PI * rt * r.powi(3) / (3.0 * eq.rho_star) * s.z * s.z
        + p.c_v * p.gamma * p.t_inf * r.powi(3) / (2.0 * eq.rho_star) * c2
        + 2.0 * PI * p.rho_l * r.powi(3) * s.r_dot.powi(2))
}

/// The same energy after eliminating z with the constraint:
/// 2π(4σ + 3p∞R*)ℛ² − (R*²(3p∞R* + 6σ)/(8πρ*²))(∫u)²
///     + (c_vγT∞R*³/(2ρ*)) Σ c_j² + 2πρ_l R*³ ℛ̇².
pub fn energy_constrained_form(eq: &Equilibrium, s: &GalerkinState) -> f64 {
    let p = &eq.params;
    let r = eq.r_star;
    let iu = mean_u(eq, s);
    let c2: f64 = s.coeffs.iter().map(|c| c * c).sum();
    2.0 * PI * (4.0 * p.sigma + 3.0 * p.p_inf_star * r) * s.r_pert.powi(2)
        - r * r * (3.0 * p.p_inf_star * r + 6.0 * p.sigma) / (8.0 * PI * eq.rho_star.powi(2))
            * iu
            * iu
        + p.c_v * p.gamma * p.t_inf * r.powi(3) / (2.0 * eq.rho_star) * c2
        + 2.0 * PI * p.rho_l * r.powi(3) * s.r_dot.powi(2)
}

/// dE/dt = −(κT∞R*/ρ*²) Σ λ_j c_j² − 16πμ_l R* ℛ̇².
pub fn dissipation_rate(eq: &Equilibrium, s: &GalerkinState) -> f64 {
    let p = &eq.params;
    let heat: f64 = s
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| lambda(i + 1) * c * c)
        .sum();
    -p.kappa * p.t_inf * eq.r_star / eq.rho_star.powi(2) * heat
        - 16.0 * PI * p.mu_l * eq.r_star * s.r_dot.powi(2)
}

/// Lower bound
/// E ≥ (c_vT∞R*³/(2ρ*)) Σ c_j² + 2π(4σ + 3p∞R*)ℛ² + 2πρ_l R*³ ℛ̇²
/// on constrained states; it follows from (∫u)² ≤ (4π/3) Σ c_j².
pub fn coercivity_bound(eq: &Equilibrium, s: &GalerkinState) -> f64 {
    let p = &eq.params;
    let r = eq.r_star;
    let c2: f64 = s.coeffs.iter().map(|c| c * c).sum();
    p.c_v * p.t_inf * r.powi(3) / (2.0 * eq.rho_star) * c2
        + 2.0 * PI * (4.0 * p.sigma + 3.0 * p.p_inf_star * r) * s.r_pert.powi(2)
        + 2.0 * PI * p.rho_l * r.powi(3) * s.r_dot.powi(2)
}

/// ‖ϱ‖_{L²(B_1)} + |ℛ| + |ℛ̇| with ϱ = u + z, where
/// ‖u + z‖² = Σ c_j² + 2z∫u + (4π/3)z².
pub fn l2_norm(eq: &Equilibrium, s: &GalerkinState) -> f64 {
    let c2: f64 = s.coeffs.iter().map(|c| c * c).sum();
    let sq = c2 + 2.0 * s.z * mean_u(eq, s) + 4.0 * PI / 3.0 * s.z * s.z;
    sq.max(0.0).sqrt() + s.r_pert.abs() + s.r_dot.abs()
}

/// Result of a log-linear fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Decay rate, positive for decay.
    pub rate: f64,
    /// Root-mean-square residual of log(norm).
    pub residual: f64,
    pub samples: usize,
}

/// Fits log‖w(t)‖ ≈ log C − rate·t over the samples of `trace` with t in
/// the closed `window`.
pub fn fit_decay_rate(trace: &Trace, window: (f64, f64)) -> Result<DecayFit> {
    let (ts, vs): (Vec<f64>, Vec<f64>) = trace
        .times
        .iter()
        .zip(&trace.norms)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .unzip();
    let rate = fit_log_slope(&ts, &vs)?;
    let intercept = vs
        .iter()
        .zip(&ts)
        .map(|(v, t)| v.ln() + rate * t)
        .sum::<f64>()
        / ts.len() as f64;
    let residual = (vs
        .iter()
        .zip(&ts)
        .map(|(v, t)| (v.ln() - intercept + rate * t).powi(2))
        .sum::<f64>()
        / ts.len() as f64)
        .sqrt();
    Ok(DecayFit {
        rate,
        residual,
        samples: ts.len(),
    })
}

/// Least-squares slope of log(values) against time, returned as a decay
/// rate (positive for decay). Nonpositive values are rejected.
pub fn fit_log_slope(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::Validation(
            "need at least two samples of equal length".into(),
        ));
    }
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Validation("values must be positive".into()));
    }
    let n = times.len() as f64;
    let tm = times.iter().sum::<f64>() / n;
    let ym = values.iter().map(|v| v.ln()).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (t, v) in times.iter().zip(values) {
        sxy += (t - tm) * (v.ln() - ym);
        sxx += (t - tm).powi(2);
    }
    if sxx == 0.0 {
        return Err(Error::Validation("times are all equal".into()));
    }
    Ok(-sxy / sxx)
}

/// The state vector with ℛ and ℛ̇ replaced; used to build constrained
/// random states in tests and diagnostics.
pub fn constrained_state(eq: &Equilibrium, r_dot: f64, coeffs: Vec<f64>, z: f64) -> GalerkinState {
    project_mass_constraint(
        eq,
        &GalerkinState {
            r_pert: 0.0,
            r_dot,
            coeffs,
            z,
        },
    )
}

/// Convenience: e^{Lt} applied to a raw vector.
pub fn apply_propagator(op: &TruncatedOperator, t: f64, w: &DVector<f64>) -> DVector<f64> {
    propagator(op, t) * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_operator::{build_operator, eval_data, q_closed_deriv};
    use crate::params::{mass_for_radius, solve_equilibrium, PhysicalParams};
    use crate::spectrum::{find_roots, Region};
    use crate::state::linear_z;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn eq() -> Equilibrium {
        let p = PhysicalParams::air_water();
        solve_equilibrium(&p, mass_for_radius(&p, 1e-5)).unwrap()
    }

    fn sample_state(eq: &Equilibrium, n: usize) -> GalerkinState {
        let coeffs = (0..n)
            .map(|j| 1e-3 * eq.rho_star / (j + 1) as f64 * (j as f64).cos())
            .collect();
        GalerkinState::linear(
            eq,
            1e-3 * eq.r_star,
            0.5 * eq.r_star * eq.omega0() * 1e-3,
            coeffs,
        )
    }

    /// Classical RK4 with a fixed small step, on the scaled system.
    fn rk4(op: &TruncatedOperator, w0: &DVector<f64>, t: f64, steps: usize) -> DVector<f64> {
        let h = t / steps as f64;
        let mut w = w0.clone();
        for _ in 0..steps {
            let k1 = op.apply(&w);
            let k2 = op.apply(&(&w + &k1 * (h / 2.0)));
            let k3 = op.apply(&(&w + &k2 * (h / 2.0)));
            let k4 = op.apply(&(&w + &k3 * h));
            w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        w
    }

    #[test]
    fn matches_rk4_oracle() {
        let eq = eq();
        let op = build_operator(&eq, 4).unwrap();
        let w0 = sample_state(&eq, 4);
        let t = 2e-6;
        let trace = evolve_linear(&op, &w0, &[t]).unwrap();
        // Stiffest rate ≈ κ̄π²·16·(1+…) ≈ 3e7, so h = 2e-10 is well inside RK4 stability.
        let oracle = rk4(&op, &w0.to_vector(), t, 10_000);
        let got = trace.states[0].to_vector();
        let sc = StateScale::new(&eq);
        assert!(sc.norm(&(got - &oracle)) < 1e-10 * sc.norm(&oracle));
    }

    #[test]
    fn uniform_grid_matches_direct_exponential() {
        let eq = eq();
        let op = build_operator(&eq, 16).unwrap();
        let w0 = sample_state(&eq, 16);
        let times: Vec<f64> = (0..=50).map(|k| k as f64 * 1e-7).collect();
        let trace = evolve_linear(&op, &w0, &times).unwrap();
        let direct = apply_propagator(&op, 5e-6, &w0.to_vector());
        let sc = StateScale::new(&eq);
        let last = trace.states.last().unwrap().to_vector();
        assert!(sc.norm(&(last - &direct)) < 1e-11 * sc.norm(&direct));
    }

    #[test]
    fn energy_dissipation_identity() {
        let eq = eq();
        let op = build_operator(&eq, 24).unwrap();
        let w = sample_state(&eq, 24);
        // E is quadratic, so the central difference along the flow direction
        // L w has no truncation error.
        let v = w.to_vector();
        let lw = op.apply(&v);
        let h = 1e-4 * StateScale::new(&eq).norm(&v) / StateScale::new(&eq).norm(&lw);
        let at = |s: f64| {
            energy_total(
                &eq,
                &GalerkinState::from_vector_linear(&eq, &(&v + &lw * s)),
            )
            .unwrap()
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let d = dissipation_rate(&eq, &w);
        assert!(((fd - d) / d).abs() < 1e-6, "{fd} vs {d}");
    }

    #[test]
    fn energy_forms_agree() {
        let eq = eq();
        let w = sample_state(&eq, 12);
        let a = energy_total(&eq, &w).unwrap();
        let b = energy_constrained_form(&eq, &w);
        assert!(((a - b) / a).abs() < 1e-12);
    }

    #[test]
    fn energy_rejects_unconstrained_state() {
        let eq = eq();
        let mut w = sample_state(&eq, 6);
        w.z *= 1.1;
        assert!(energy_total(&eq, &w).is_err());
        let fixed = project_mass_constraint(&eq, &w);
        assert!(energy_total(&eq, &fixed).is_ok());
    }

    #[test]
    fn projection_is_consistent_with_linear_z() {
        let eq = eq();
        let w = sample_state(&eq, 8);
        let p = project_mass_constraint(&eq, &w);
        assert!((p.r_pert - w.r_pert).abs() < 1e-12 * w.r_pert.abs());
        assert!((linear_z(&eq, p.r_pert, &p.coeffs) - p.z).abs() < 1e-12 * p.z.abs());
    }

    #[test]
    fn boundary_mass_residual_along_trace() {
        let eq = eq();
        let op = build_operator(&eq, 32).unwrap();
        let w0 = sample_state(&eq, 32);
        let times: Vec<f64> = (0..20).map(|k| k as f64 * 2e-7).collect();
        let trace = evolve_linear(&op, &w0, &times).unwrap();
        for r in trace_mass_residuals(&op, &trace) {
            assert!(r < 1e-10, "{r}");
        }
    }

    #[test]
    fn residue_expansion_matches_propagator() {
        // ℛ(t) = Σ_k e^{τ_k t} DATA(τ_k)/Q'(τ_k) over the roots of Q.
        let eq = eq();
        let n = 128;
        let op = build_operator(&eq, n).unwrap();
        let mut coeffs = vec![0.0; n];
        coeffs[0] = 1e-3 * eq.rho_star;
        coeffs[1] = -5e-4 * eq.rho_star;
        let w0 = GalerkinState::linear(&eq, 1e-3 * eq.r_star, 0.0, coeffs);
        let region = Region {
            re_min: -30.5 * eq.kappa_bar * PI * PI,
            ..Region::default_for(&eq)
        };
        let roots = find_roots(&eq, &region, 400).unwrap();
        let t = 2.0 / (eq.kappa_bar * PI * PI);
        let mut sum = Complex64::new(0.0, 0.0);
        for r in &roots {
            let res = eval_data(r.tau, &w0, &eq).unwrap() / q_closed_deriv(r.tau, &eq).unwrap();
            sum += (r.tau * t).exp() * res;
        }
        let r_t = apply_propagator(&op, t, &w0.to_vector())[0];
        assert!(sum.im.abs() < 1e-10 * sum.re.abs());
        assert!(((sum.re - r_t) / r_t).abs() < 1e-5, "{} vs {r_t}", sum.re);
    }

    #[test]
    fn decay_rate_fit() {
        let ts: Vec<f64> = (0..10).map(|k| k as f64 * 0.1).collect();
        let vs: Vec<f64> = ts.iter().map(|t| 3.0 * (-2.5 * t).exp()).collect();
        assert!((fit_log_slope(&ts, &vs).unwrap() - 2.5).abs() < 1e-12);
        assert!(fit_log_slope(&ts, &[0.0; 10]).is_err());
    }

    #[test]
    fn late_fit_approaches_rightmost_root() {
        let eq = eq();
        let op = build_operator(&eq, 64).unwrap();
        let roots = find_roots(&eq, &Region::default_for(&eq), 400).unwrap();
        let tau1 = crate::spectrum::rightmost(&roots).unwrap().tau;
        let w0 = sample_state(&eq, 64);
        let t0 = 10.0 / tau1.re.abs();
        // Whole oscillation periods so the fit is not biased by the phase.
        let period = 2.0 * PI / tau1.im.abs();
        let t1 = t0 + 8.0 * period;
        let times: Vec<f64> = (0..=400).map(|k| t1 * k as f64 / 400.0).collect();
        let tr = evolve_linear(&op, &w0, &times).unwrap();
        let fit = fit_decay_rate(&tr, (t0, t1)).unwrap();
        assert!(
            ((fit.rate + tau1.re) / tau1.re).abs() < 0.01,
            "{} vs {}",
            fit.rate,
            tau1.re
        );
        let beta = crate::spectrum::rate_lower_bound(&eq).beta;
        assert!(fit.rate >= beta - 1e-6);
    }

    #[test]
    fn semigroup_bound_on_random_states() {
        use rand::{Rng, SeedableRng};
        let eq = eq();
        let n = 24;
        let op = build_operator(&eq, n).unwrap();
        let beta = crate::spectrum::rate_lower_bound(&eq).beta;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let times: Vec<f64> = (0..=60).map(|k| k as f64 * 2e-6).collect();
        let mut constants = Vec::new();
        for _ in 0..50 {
            let coeffs = (0..n)
                .map(|_| rng.random_range(-1.0..1.0) * eq.rho_star)
                .collect();
            let rdot = rng.random_range(-1.0..1.0) * eq.r_star * eq.omega0();
            let w0 =
                constrained_state(&eq, rdot, coeffs, rng.random_range(-1.0..1.0) * eq.rho_star);
            let w0 = GalerkinState::linear(&eq, w0.r_pert, w0.r_dot, w0.coeffs);
            let tr = evolve_linear(&op, &w0, &times).unwrap();
            // Smallest C with ‖w(t)‖ ≤ C e^{−βt} ‖w0‖ on the grid.
            let c = tr
                .times
                .iter()
                .zip(&tr.norms)
                .map(|(t, v)| v * (beta * t).exp() / tr.norms[0])
                .fold(0.0, f64::max);
            constants.push(c);
        }
        // C stays bounded (the bound is uniform, not growing with time).
        let worst = constants.iter().cloned().fold(0.0, f64::max);
        assert!(worst < 1e3, "{worst}");
    }

    #[test]
    fn trace_energy_is_monotone() {
        let eq = eq();
        let op = build_operator(&eq, 32).unwrap();
        let w0 = sample_state(&eq, 32);
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 1e-7).collect();
        let tr = evolve_linear(&op, &w0, &times).unwrap();
        for w in tr.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * tr.energies[0].abs());
        }
        let zero = evolve_linear(&op, &GalerkinState::zeros(32), &times).unwrap();
        assert!(zero.norms.iter().all(|v| *v == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn coercivity_holds(
            r_dot in -1.0f64..1.0,
            z in -1.0f64..1.0,
            cs in proptest::collection::vec(-1.0f64..1.0, 1..40),
        ) {
            let eq = eq();
            let s = constrained_state(
                &eq,
                r_dot * eq.r_star * eq.omega0(),
                cs.iter().map(|c| c * eq.rho_star).collect(),
                z * eq.rho_star,
            );
            let e = energy_total(&eq, &s).unwrap();
            let b = coercivity_bound(&eq, &s);
            prop_assert!(e >= b * (1.0 - 1e-12), "{} < {}", e, b);
        }

        #[test]
        fn energy_never_increases(scale in 0.1f64..10.0, t in 1e-8f64..1e-5) {
            let eq = eq();
            let op = build_operator(&eq, 12).unwrap();
            let w0 = sample_state(&eq, 12);
            let v0 = w0.to_vector() * scale;
            let e0 = energy_total(&eq, &GalerkinState::from_vector_linear(&eq, &v0)).unwrap();
            let v1 = apply_propagator(&op, t, &v0);
            let e1 = energy_total(&eq, &GalerkinState::from_vector_linear(&eq, &v1)).unwrap();
            prop_assert!(e1 <= e0 * (1.0 + 1e-12));
        }
    }
}
