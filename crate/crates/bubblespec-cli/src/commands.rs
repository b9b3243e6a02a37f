//! Subcommand pipelines.

use bubblespec::linear_evolution::{evolve_linear, trace_mass_residuals};
use bubblespec::nonlinear_dynamics::{evolve_nonlinear, ForcingSpec, NonlinearSystem};
use bubblespec::periodic_orbit::{
    find_periodic, floquet_multipliers, FixedPointMethod, PeriodicOptions,
};
use bubblespec::rate_report::{log_grid, regime_bounds, sweep_chi, Regime};
use bubblespec::spectrum::{find_roots, rate_lower_bound, rightmost, sector_check, Region};
use bubblespec::{build_operator, solve_equilibrium, Equilibrium, GalerkinState};
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{csv, Emitter};
use crate::CliError;

/// Upper limit on roots reported by `spectrum`.
const MAX_ROOTS: usize = 64;

fn forcing(cfg: &RunConfig, eq: &Equilibrium) -> ForcingSpec {
    ForcingSpec {
        omega: cfg.omega.unwrap_or_else(|| eq.omega0()),
        amplitude: cfg.amplitude,
        waveform: cfg.waveform,
    }
}

fn horizon(cfg: &RunConfig, eq: &Equilibrium) -> f64 {
    cfg.t_end
        .unwrap_or_else(|| 20.0 / rate_lower_bound(eq).beta)
}

fn output_times(t_end: f64, n_out: usize) -> Vec<f64> {
    (0..=n_out)
        .map(|k| t_end * k as f64 / n_out as f64)
        .collect()
}

pub fn equilibrium(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let eq = solve_equilibrium(&cfg.params, cfg.m)?;
    let (mass_res, pressure_res) = eq.identity_residuals();
    out.json(
        "equilibrium.json",
        json!({
            "M": eq.m,
            "R_star": eq.r_star,
            "rho_star": eq.rho_star,
            "p_star": eq.p_star,
            "chi": eq.chi,
            "kappa_bar": eq.kappa_bar,
            "omega0": eq.omega0(),
            "b": eq.b,
            "d": eq.d,
            "theta_gamma": eq.theta_gamma,
            "mass_identity_residual": mass_res,
            "pressure_identity_residual": pressure_res,
        }),
    )
}

pub fn spectrum(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let eq = solve_equilibrium(&cfg.params, cfg.m)?;
    let region = Region::default_for(&eq);
    let roots = find_roots(&eq, &region, MAX_ROOTS)?;
    let top = rightmost(&roots).ok_or_else(|| {
        CliError::Core(bubblespec::Error::Numerical(
            "no roots in the search region".into(),
        ))
    })?;
    let half_angle = sector_check(&roots)?;
    let abscissa = build_operator(&eq, cfg.n)?.spectral_abscissa();
    out.text(
        "spectrum_roots.csv",
        &csv(
            &["re", "im", "residual", "multiplicity"],
            roots
                .iter()
                .map(|r| vec![r.tau.re, r.tau.im, r.residual, r.multiplicity as f64]),
        ),
    )?;
    out.json(
        "spectrum.json",
        json!({
            "n_roots": roots.len(),
            "rightmost_re": top.tau.re,
            "rightmost_im": top.tau.im.abs(),
            "truncated_abscissa": abscissa,
            "N": cfg.n,
            "sector_half_angle": half_angle,
            "region": {"re_min": region.re_min, "re_max": region.re_max, "im_max": region.im_max},
        }),
    )
}

pub fn rate_bound(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let eq = solve_equilibrium(&cfg.params, cfg.m)?;
    let rb = rate_lower_bound(&eq);
    let (iso, adi) = regime_bounds(&eq);
    out.json(
        "rate_bound.json",
        json!({
            "beta": rb.beta,
            "epsilon": rb.epsilon_used,
            "branch_terms": rb.branch_terms,
            "delta_disc": rb.delta_disc,
            "binding_branch": rb.binding_branch,
            "regime": Regime::from_branch(rb.binding_branch).as_str(),
            "beta_isothermal": iso,
            "beta_adiabatic": adi,
        }),
    )
}

pub fn simulate_linear(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let eq = solve_equilibrium(&cfg.params, cfg.m)?;
    let op = build_operator(&eq, cfg.n)?;
    let w0 = GalerkinState::linear(&eq, cfg.r0 * eq.r_star, 0.0, vec![0.0; cfg.n]);
    let t_end = horizon(cfg, &eq);
    let trace = evolve_linear(&op, &w0, &output_times(t_end, cfg.n_out))?;
    let mass = trace_mass_residuals(&op, &trace);
    out.text(
        "linear_trace.csv",
        &csv(
            &["t", "R_pert", "R_dot", "energy", "norm", "mass_residual"],
            (0..trace.len()).map(|i| {
                let s = &trace.states[i];
                vec![
                    trace.times[i],
                    s.r_pert,
                    s.r_dot,
                    trace.energies[i],
                    trace.norms[i],
                    mass[i],
                ]
            }),
        ),
    )?;
    let monotone = trace
        .energies
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    out.json(
        "linear_summary.json",
        json!({
            "N": cfg.n,
            "t_end": t_end,
            "energy_initial": trace.energies[0],
            "energy_final": trace.energies[trace.len() - 1],
            "energy_monotone": monotone,
            "max_mass_residual": mass.iter().cloned().fold(0.0, f64::max),
        }),
    )
}

pub fn simulate_nonlinear(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let eq = solve_equilibrium(&cfg.params, cfg.m)?;
    let sys = NonlinearSystem::new(&eq, cfg.n, forcing(cfg, &eq))?;
    let coeffs = vec![0.0; cfg.n];
    let r_pert = cfg.r0 * eq.r_star;
    let w0 = GalerkinState {
        r_pert,
        r_dot: 0.0,
        z: sys.z_of(r_pert, &coeffs)?,
        coeffs,
    };
    let t_end = horizon(cfg, &eq);
    let trace = evolve_nonlinear(&sys, &w0, t_end, cfg.n_out, cfg.integration_tol)?;
    let mass_err: Vec<f64> = trace.mass.iter().map(|m| (m - eq.m) / eq.m).collect();
    out.text(
        "nonlinear_trace.csv",
        &csv(
            &[
                "t",
                "R_pert",
                "R_dot",
                "z",
                "mass_rel_error",
                "min_density",
                "norm",
            ],
            (0..trace.times.len()).map(|i| {
                let s = &trace.states[i];
                vec![
                    trace.times[i],
                    s.r_pert,
                    s.r_dot,
                    trace.z[i],
                    mass_err[i],
                    trace.min_density[i],
                    trace.norms[i],
                ]
            }),
        ),
    )?;
    out.json(
        "nonlinear_summary.json",
        json!({
            "N": cfg.n,
            "t_end": t_end,
            "max_mass_rel_error": mass_err.iter().fold(0.0_f64, |a, b| a.max(b.abs())),
            "min_density": trace.min_density.iter().cloned().fold(f64::INFINITY, f64::min),
            "accepted_steps": trace.stats.accepted,
            "rejected_steps": trace.stats.rejected,
        }),
    )
}

pub fn periodic(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let eq = solve_equilibrium(&cfg.params, cfg.m)?;
    let sys = NonlinearSystem::new(&eq, cfg.n, forcing(cfg, &eq))?;
    let opts = PeriodicOptions {
        tol: cfg.tol,
        integration_tol: cfg.integration_tol,
        ..PeriodicOptions::default()
    };
    let mut sol = find_periodic(&sys, &opts)?;
    let mu = floquet_multipliers(&sys, &mut sol)?;
    let m = sol.orbit.len();
    out.text(
        "periodic_orbit.csv",
        &csv(
            &["t", "R_pert", "R_dot", "c_1"],
            sol.orbit
                .iter()
                .enumerate()
                .map(|(k, w)| vec![sol.period * k as f64 / m as f64, w[0], w[1], w[2]]),
        ),
    )?;
    let w0 = &sol.w0;
    let coeff_max = w0.coeffs.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
    out.json(
        "periodic.json",
        json!({
            "N": cfg.n,
            "omega": sys.forcing.omega,
            "amplitude": sys.forcing.amplitude,
            "period": sol.period,
            "residual": sol.residual,
            "iterations": sol.iterations,
            "method": match sol.method {
                FixedPointMethod::Picard => "picard",
                FixedPointMethod::Newton => "newton",
            },
            "w0_R_pert": w0.r_pert,
            "w0_R_dot": w0.r_dot,
            "w0_z": w0.z,
            "w0_coeff_max_abs": coeff_max,
            "floquet_max_modulus": mu[0].norm(),
            "contraction_rate": sol.contraction_rate,
            "truncated_abscissa": sys.op.spectral_abscissa(),
        }),
    )
}

pub fn compare_rates(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let eq = solve_equilibrium(&cfg.params, cfg.m)?;
    let lo = cfg.chi_min.unwrap_or(eq.chi * 1e-4);
    let hi = cfg.chi_max.unwrap_or(eq.chi * 1e4);
    let grid = log_grid(lo, hi, cfg.chi_points);
    let report = sweep_chi(&cfg.params, cfg.m, &grid, cfg.omega)?;
    out.text("rates.csv", &report.to_csv())?;
    out.text("rates_summary.txt", &report.summary())
}
