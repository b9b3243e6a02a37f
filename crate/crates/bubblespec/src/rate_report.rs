//! Closed-form thermal damping rates in the isothermal and adiabatic limits,
//! Prosperetti's approximate rates, and χ sweeps that compare them with the
//! rigorous bound and the truncated-spectrum abscissa.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linear_operator::build_operator;
use crate::params::{solve_equilibrium, Equilibrium, PhysicalParams};
use crate::spectrum::rate_lower_bound;

/// Truncation used for the spectral abscissa in sweeps.
pub const SWEEP_MODES: usize = 128;

/// (β_isothermal, β_adiabatic) with the viscous contribution dropped.
pub fn regime_bounds(eq: &Equilibrium) -> (f64, f64) {
    let p = &eq.params;
    let theta = eq.theta_gamma;
    let iso = 4.0 * theta * eq.p_star / (90.0 * p.rho_l * eq.chi);
    let ratio = p.p_inf_star * eq.r_star / (2.0 * p.p_inf_star * eq.r_star + 6.0 * p.sigma);
    let adi = (1.0 - (theta / (ratio + theta)).sqrt()) * PI * PI * eq.chi / (eq.r_star * eq.r_star);
    (iso, adi)
}

/// Prosperetti's nearly isothermal rate (forced or unforced, same formula)
/// and the periodically forced nearly adiabatic rate at angular frequency
/// `omega`. The second entry is NaN unless `omega > 0`.
pub fn prosperetti_rates(eq: &Equilibrium, omega: f64) -> (f64, f64) {
    let p = &eq.params;
    let g = p.gamma;
    let iso = eq.theta_gamma * eq.p_star / (10.0 * p.rho_l * eq.chi);
    let adi = if omega > 0.0 {
        9.0 * g * (g - 1.0) * eq.p_star * eq.chi.sqrt()
            / (2f64.powf(1.5) * p.rho_l * omega.powf(1.5) * eq.r_star.powi(3))
    } else {
        f64::NAN
    };
    (iso, adi)
}

/// Classification of a sweep point by the branch that binds the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Thermal-diffusion branch, relevant for small χ.
    Adiabatic,
    /// Natural-frequency branch.
    Inertial,
    /// Quartic-sum branch, relevant for large χ.
    Isothermal,
}

impl Regime {
    pub fn from_branch(branch: usize) -> Self {
        match branch {
            1 => Regime::Adiabatic,
            2 => Regime::Inertial,
            _ => Regime::Isothermal,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Adiabatic => "adiabatic",
            Regime::Inertial => "inertial",
            Regime::Isothermal => "isothermal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub chi_values: Vec<f64>,
    pub beta_bound: Vec<f64>,
    pub beta_isothermal: Vec<f64>,
    pub beta_adiabatic: Vec<f64>,
    pub beta_p91_isothermal: Vec<f64>,
    pub beta_p91_adiabatic_per: Vec<f64>,
    /// Largest real part of the N = 128 truncated spectrum (negative).
    pub spectral_abscissa: Vec<f64>,
    pub binding_branch: Vec<usize>,
    pub regime_labels: Vec<Regime>,
    /// Forcing frequency used for the periodic adiabatic rate, per point.
    pub omega: Vec<f64>,
}

impl RegimeReport {
    pub fn len(&self) -> usize {
        self.chi_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi_values.is_empty()
    }

    /// Indices i where the binding branch differs between points i − 1 and i.
    pub fn crossovers(&self) -> Vec<usize> {
        (1..self.len())
            .filter(|&i| self.binding_branch[i] != self.binding_branch[i - 1])
            .collect()
    }

    /// Indices where |abscissa| < beta_bound, i.e. where the bound fails.
    pub fn dominance_violations(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| -self.spectral_abscissa[i] < self.beta_bound[i])
            .collect()
    }

    /// First index from which |abscissa| ≥ β_isothermal holds for all later
    /// points, if any.
    pub fn isothermal_dominance_start(&self) -> Option<usize> {
        let mut start = None;
        for i in (0..self.len()).rev() {
            if -self.spectral_abscissa[i] >= self.beta_isothermal[i] {
                start = Some(i);
            } else {
                break;
            }
        }
        start
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "chi,beta_bound,beta_iso,beta_adi,beta_P91_iso,beta_P91_adi_per,abscissa,binding_branch\n",
        );
        for i in 0..self.len() {
            let _ = writeln!(
                s,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                self.chi_values[i],
                self.beta_bound[i],
                self.beta_isothermal[i],
                self.beta_adiabatic[i],
                self.beta_p91_isothermal[i],
                self.beta_p91_adiabatic_per[i],
                self.spectral_abscissa[i],
                self.binding_branch[i],
            );
        }
        s
    }

    /// Plain-text summary: one line per point plus crossover information.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for i in 0..self.len() {
            let _ = writeln!(
                s,
                "chi={:e} regime={} |abscissa|={:e} beta={:e}",
                self.chi_values[i],
                self.regime_labels[i].as_str(),
                -self.spectral_abscissa[i],
                self.beta_bound[i],
            );
        }
        let cross = self.crossovers();
        let _ = writeln!(s, "crossovers: {}", cross.len());
        for i in cross {
            let _ = writeln!(
                s,
                "  branch {} -> {} between chi={:e} and chi={:e}",
                self.binding_branch[i - 1],
                self.binding_branch[i],
                self.chi_values[i - 1],
                self.chi_values[i],
            );
        }
        match self.isothermal_dominance_start() {
            Some(i) => {
                let _ = writeln!(
                    s,
                    "|abscissa| >= beta_iso from chi={:e}",
                    self.chi_values[i]
                );
            }
            None => {
                let _ = writeln!(s, "|abscissa| >= beta_iso not reached on this grid");
            }
        }
        s
    }
}

/// Equilibrium with thermal diffusivity `chi`, reached by rescaling κ.
/// ρ* does not depend on κ, so the rescaling is exact.
pub fn equilibrium_with_chi(params: &PhysicalParams, m: f64, chi: f64) -> Result<Equilibrium> {
    if !(chi > 0.0 && chi.is_finite()) {
        return Err(Error::Validation(format!(
            "chi must be positive, got {chi}"
        )));
    }
    let base = solve_equilibrium(params, m)?;
    let kappa = chi * params.gamma * params.c_v * base.rho_star;
    solve_equilibrium(&params.with_kappa(kappa), m)
}

struct SweepPoint {
    bound: f64,
    branch: usize,
    iso: f64,
    adi: f64,
    p91_iso: f64,
    p91_adi: f64,
    abscissa: f64,
    omega: f64,
}

fn sweep_point(
    params: &PhysicalParams,
    m: f64,
    chi: f64,
    omega: Option<f64>,
) -> Result<SweepPoint> {
    let eq = equilibrium_with_chi(params, m, chi)?;
    let rb = rate_lower_bound(&eq);
    let (iso, adi) = regime_bounds(&eq);
    let omega = omega.unwrap_or_else(|| eq.omega0());
    let (p91_iso, p91_adi) = prosperetti_rates(&eq, omega);
    let abscissa = build_operator(&eq, SWEEP_MODES)?.spectral_abscissa();
    Ok(SweepPoint {
        bound: rb.beta,
        branch: rb.binding_branch,
        iso,
        adi,
        p91_iso,
        p91_adi,
        abscissa,
        omega,
    })
}

/// Evaluates all rates over `chi_grid`, in parallel over grid points.
/// `omega` defaults to the natural frequency ω0 at each point.
pub fn sweep_chi(
    params: &PhysicalParams,
    m: f64,
    chi_grid: &[f64],
    omega: Option<f64>,
) -> Result<RegimeReport> {
    if let Some(w) = omega {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::Validation(format!(
                "omega must be positive, got {w}"
            )));
        }
    }
    let points: Vec<SweepPoint> = chi_grid
        .par_iter()
        .map(|&chi| sweep_point(params, m, chi, omega))
        .collect::<Result<_>>()?;
    Ok(RegimeReport {
        chi_values: chi_grid.to_vec(),
        beta_bound: points.iter().map(|p| p.bound).collect(),
        beta_isothermal: points.iter().map(|p| p.iso).collect(),
        beta_adiabatic: points.iter().map(|p| p.adi).collect(),
        beta_p91_isothermal: points.iter().map(|p| p.p91_iso).collect(),
        beta_p91_adiabatic_per: points.iter().map(|p| p.p91_adi).collect(),
        spectral_abscissa: points.iter().map(|p| p.abscissa).collect(),
        binding_branch: points.iter().map(|p| p.branch).collect(),
        regime_labels: points
            .iter()
            .map(|p| Regime::from_branch(p.branch))
            .collect(),
        omega: points.iter().map(|p| p.omega).collect(),
    })
}

/// `n` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}
