//! The truncated linear generator, the characteristic function Q(τ) and the
//! initial-data functional DATA(τ).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{gamma_coeff, lambda, Equilibrium};
use crate::series::{mode_sum, mode_sum_deriv, mode_sum_weighted, zeta_even};
use crate::state::{gamma_dot, linear_z, GalerkinState};

/// How the mode-coupling block of the generator is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Assembly {
    /// Exact inverse of the truncated mass matrix: uses
    /// γ_N = 1/(1 − a Σ_{j≤N} Γ_j²) in place of γ. The truncated system then
    /// conserves the linearized mass and dissipates the linearized energy
    /// exactly.
    #[default]
    Galerkin,
    /// Inverse built from the infinite sum Σ Γ_j² (γ_N replaced by γ).
    ClosedForm,
}

/// Dense (N+2)×(N+2) generator acting on (ℛ, ℛ̇, c_1, …, c_N).
#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    pub n: usize,
    pub matrix: DMatrix<f64>,
    pub eq: Equilibrium,
    pub assembly: Assembly,
}

impl TruncatedOperator {
    pub fn dim(&self) -> usize {
        self.n + 2
    }

    pub fn apply(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.matrix * w
    }

    /// Eigenvalues, computed on the diagonally rescaled matrix D⁻¹ L D with
    /// D = diag(R*, R*ω0, ρ*, …) so that all blocks are of comparable size.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let s = crate::state::StateScale::new(&self.eq).diag(self.dim());
        let scaled = DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            self.matrix[(i, j)] * s[j] / s[i]
        });
        let mut ev: Vec<Complex64> = scaled
            .complex_eigenvalues()
            .iter()
            .map(|c| Complex64::new(c.re, c.im))
            .collect();
        ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        ev
    }

    /// Largest real part of the spectrum.
    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues()[0].re
    }
}

/// γ_N = 1/(1 − a Σ_{j≤N} Γ_j²), which tends to γ as N → ∞.
pub fn gamma_n(eq: &Equilibrium, n: usize) -> f64 {
    let g = eq.params.gamma;
    let s: f64 = (1..=n).map(|j| gamma_coeff(g, j).powi(2)).sum();
    1.0 / (1.0 - eq.a_coef() * s)
}

/// Assembles the generator with the default [`Assembly::Galerkin`] variant.
pub fn build_operator(eq: &Equilibrium, n: usize) -> Result<TruncatedOperator> {
    build_operator_with(eq, n, Assembly::Galerkin)
}

pub fn build_operator_with(
    eq: &Equilibrium,
    n: usize,
    assembly: Assembly,
) -> Result<TruncatedOperator> {
    if n < 1 {
        return Err(Error::Validation(
            "truncation level must be at least 1".into(),
        ));
    }
    let p = &eq.params;
    let gam: Vec<f64> = (1..=n).map(|j| gamma_coeff(p.gamma, j)).collect();
    let g_eff = match assembly {
        Assembly::Galerkin => gamma_n(eq, n),
        Assembly::ClosedForm => p.gamma,
    };
    let coupling = eq.a_coef() * g_eff;
    let visc = 4.0 * p.mu_l / (p.rho_l * eq.r_star * eq.r_star);
    let geo = 3.0 * eq.rho_star / eq.r_star;

    let dim = n + 2;
    let mut m = DMatrix::zeros(dim, dim);
    m[(0, 1)] = 1.0;
    m[(1, 0)] = -eq.b;
    m[(1, 1)] = -visc;
    for k in 0..n {
        m[(1, k + 2)] = -eq.d * gam[k];
    }
    for j in 0..n {
        m[(j + 2, 1)] = geo * g_eff * gam[j];
        for k in 0..n {
            let e_k = eq.kappa_bar * lambda(k + 1) * coupling;
            m[(j + 2, k + 2)] = -e_k * gam[j] * gam[k];
        }
        m[(j + 2, j + 2)] -= eq.kappa_bar * lambda(j + 1);
    }
    Ok(TruncatedOperator {
        n,
        matrix: m,
        eq: *eq,
        assembly,
    })
}

/// Left-hand mass matrix A_N of the truncated system A_N ẇ = B_N w.
pub fn mass_matrix(eq: &Equilibrium, n: usize) -> DMatrix<f64> {
    let g = eq.params.gamma;
    let a = eq.a_coef();
    let geo = 3.0 * eq.rho_star / eq.r_star;
    let mut m = DMatrix::identity(n + 2, n + 2);
    for j in 0..n {
        let gj = gamma_coeff(g, j + 1);
        m[(j + 2, 0)] = -geo * gj;
        for k in 0..n {
            m[(j + 2, k + 2)] -= a * gj * gamma_coeff(g, k + 1);
        }
    }
    m
}

/// Right-hand matrix B_N of the truncated system A_N ẇ = B_N w.
pub fn rhs_matrix(eq: &Equilibrium, n: usize) -> DMatrix<f64> {
    let p = &eq.params;
    let mut m = DMatrix::zeros(n + 2, n + 2);
    m[(0, 1)] = 1.0;
    m[(1, 0)] = -eq.b;
    m[(1, 1)] = -4.0 * p.mu_l / (p.rho_l * eq.r_star * eq.r_star);
    for k in 0..n {
        m[(1, k + 2)] = -eq.d * gamma_coeff(p.gamma, k + 1);
        m[(k + 2, k + 2)] = -eq.kappa_bar * lambda(k + 1);
    }
    m
}

/// Closed-form inverse of the mass matrix using Σ_{j≥1} Γ_j² in place of the
/// truncated sum.
pub fn mass_matrix_inverse_closed(eq: &Equilibrium, n: usize) -> DMatrix<f64> {
    let g = eq.params.gamma;
    let c = eq.a_coef() * g;
    let geo = 3.0 * eq.rho_star / eq.r_star;
    let mut m = DMatrix::identity(n + 2, n + 2);
    for j in 0..n {
        let gj = gamma_coeff(g, j + 1);
        m[(j + 2, 0)] = geo * g * gj;
        for k in 0..n {
            m[(j + 2, k + 2)] += c * gj * gamma_coeff(g, k + 1);
        }
    }
    m
}

fn check_pole(s: Complex64) -> Result<()> {
    if s.re < 0.0 {
        let j = (-s.re).sqrt().round().max(1.0);
        let pole = Complex64::new(-j * j, 0.0);
        if (s - pole).norm() <= 1e-12 * j * j {
            return Err(Error::Validation(format!(
                "τ lies on the pole −κ̄π²{}²",
                j as u64
            )));
        }
    }
    Ok(())
}

/// Dimensionless argument s = τ/(π²κ̄) of the mode sums.
fn s_of(tau: Complex64, eq: &Equilibrium) -> Complex64 {
    tau / (PI * PI * eq.kappa_bar)
}

fn q_from_sum(tau: Complex64, eq: &Equilibrium, sum: Complex64) -> Complex64 {
    let p = &eq.params;
    let g = p.gamma;
    let factor = 4.0 * PI / (3.0 * g) + 8.0 * (g - 1.0) / (PI * g) * sum;
    factor * surface_poly(tau, eq) / (p.r_g * p.t_inf) + 4.0 * PI * eq.rho_star / eq.r_star
}

/// ρ_l R* τ² + 4μ_l τ/R* − 2σ/R*².
fn surface_poly(tau: Complex64, eq: &Equilibrium) -> Complex64 {
    let p = &eq.params;
    p.rho_l * eq.r_star * tau * tau + 4.0 * p.mu_l / eq.r_star * tau
        - 2.0 * p.sigma / (eq.r_star * eq.r_star)
}

/// Characteristic function Q(τ) with the mode sum in closed form
/// Σ_j π²κ̄/(π²κ̄j² + τ) = (π√s coth(π√s) − 1)/(2s), s = τ/(π²κ̄).
pub fn q_closed(tau: Complex64, eq: &Equilibrium) -> Result<Complex64> {
    let s = s_of(tau, eq);
    check_pole(s)?;
    Ok(q_from_sum(tau, eq, mode_sum(s)))
}

/// Derivative Q'(τ), analytic.
pub fn q_closed_deriv(tau: Complex64, eq: &Equilibrium) -> Result<Complex64> {
    let p = &eq.params;
    let g = p.gamma;
    let s = s_of(tau, eq);
    check_pole(s)?;
    let c = 8.0 * (g - 1.0) / (PI * g);
    let factor = 4.0 * PI / (3.0 * g) + c * mode_sum(s);
    let dfactor = c * mode_sum_deriv(s) / (PI * PI * eq.kappa_bar);
    let poly = surface_poly(tau, eq);
    let dpoly = 2.0 * p.rho_l * eq.r_star * tau + 4.0 * p.mu_l / eq.r_star;
    Ok((dfactor * poly + factor * dpoly) / (p.r_g * p.t_inf))
}

/// Characteristic function Q(τ) with the mode sum truncated adaptively.
///
/// The sum is accelerated by Σ 1/(j²+s) = ζ(2) − s Σ 1/(j²(j²+s)) and
/// truncated at the first N with N² ≥ 2|s| and tail bound 2|s|/(3N³) times
/// the sum's prefactor below `tol` relative to the leading term 4π/(3γ).
pub fn eval_q(tau: Complex64, eq: &Equilibrium, tol: f64) -> Result<Complex64> {
    if !(tol > 0.0) {
        return Err(Error::Validation("tolerance must be positive".into()));
    }
    let s = s_of(tau, eq);
    check_pole(s)?;
    let sum = truncated_mode_sum(s, eq.params.gamma, tol)?;
    Ok(q_from_sum(tau, eq, sum))
}

const TERM_CAP: usize = 10_000_000;

fn truncated_mode_sum(s: Complex64, gamma: f64, tol: f64) -> Result<Complex64> {
    let prefactor = 8.0 * (gamma - 1.0) / (PI * gamma);
    let lead = 4.0 * PI / (3.0 * gamma);
    let target = tol * lead / prefactor;
    let sa = s.norm();
    let mut n = ((2.0 * sa).sqrt().ceil() as usize).max(1);
    let by_tail = (2.0 * sa / (3.0 * target)).cbrt().ceil() as usize;
    n = n.max(by_tail);
    if n > TERM_CAP {
        return Err(Error::Numerical(format!(
            "mode sum needs {n} terms for tolerance {tol}"
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for j in (1..=n).rev() {
        let x = (j * j) as f64;
        acc += 1.0 / (x * (x + s));
    }
    Ok(zeta_even(2) - s * acc)
}

/// Initial-data functional DATA(τ) for the state `w0`; z(0) is taken from the
/// linearized mass constraint.
pub fn eval_data(tau: Complex64, w0: &GalerkinState, eq: &Equilibrium) -> Result<Complex64> {
    let p = &eq.params;
    let g = p.gamma;
    let s = s_of(tau, eq);
    check_pole(s)?;
    let ratio = g / (g - 1.0);
    let z0 = linear_z(eq, w0.r_pert, &w0.coeffs);
    // Σ_j Γ_j c_j/(κ̄λ_j + τ) over the finite state.
    let mut modes = Complex64::new(0.0, 0.0);
    for (i, &c) in w0.coeffs.iter().enumerate() {
        let j = i + 1;
        modes += gamma_coeff(g, j) * c / (eq.kappa_bar * lambda(j) + tau);
    }
    // Γ_j² = C/j² with C = 8(γ−1)²/(πγ²).
    let c2 = 8.0 * (g - 1.0).powi(2) / (PI * g * g);
    let w = mode_sum_weighted(s);
    let gz = c2 * z0 * w / (PI * PI * eq.kappa_bar);
    let weighted = c2 * s * w;
    let first = -ratio * (modes + gz);
    let bracket = 4.0 * PI / 3.0 - ratio * weighted;
    let initial =
        p.rho_l * eq.r_star * (w0.r_dot + tau * w0.r_pert) + 4.0 * p.mu_l / eq.r_star * w0.r_pert;
    let second = bracket * initial / (p.r_g * p.t_inf);
    Ok(first + second)
}

/// Σ_j Γ_j c_j for a state, exposed for diagnostics.
pub fn coupling_sum(eq: &Equilibrium, w: &GalerkinState) -> f64 {
    gamma_dot(eq.params.gamma, &w.coeffs)
}
