//! The Galerkin state vector w = (ℛ, ℛ̇, c_1, …, c_N) and its scaling.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::params::{gamma_coeff, Equilibrium};

/// Perturbation of the equilibrium bubble in Galerkin coordinates.
///
/// `z` is the boundary density perturbation ϱ(1, t). Constructors that take an
/// [`Equilibrium`] fill it from the appropriate mass constraint; it is kept
/// as a separate field so that unconstrained states can be represented and
/// rejected where the constraint matters.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinState {
    pub r_pert: f64,
    pub r_dot: f64,
    pub coeffs: Vec<f64>,
    pub z: f64,
}

impl GalerkinState {
    pub fn zeros(n: usize) -> Self {
        Self {
            r_pert: 0.0,
            r_dot: 0.0,
            coeffs: vec![0.0; n],
            z: 0.0,
        }
    }

    /// State whose `z` satisfies the linearized mass constraint.
    pub fn linear(eq: &Equilibrium, r_pert: f64, r_dot: f64, coeffs: Vec<f64>) -> Self {
        let z = linear_z(eq, r_pert, &coeffs);
        Self {
            r_pert,
            r_dot,
            coeffs,
            z,
        }
    }

    /// Truncation level N.
    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    /// The vector (ℛ, ℛ̇, c_1, …, c_N).
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.n() + 2);
        v[0] = self.r_pert;
        v[1] = self.r_dot;
        for (i, c) in self.coeffs.iter().enumerate() {
            v[i + 2] = *c;
        }
        v
    }

    /// Inverse of [`Self::to_vector`] with `z` from the linearized constraint.
    pub fn from_vector_linear(eq: &Equilibrium, v: &DVector<f64>) -> Self {
        Self::linear(eq, v[0], v[1], v.as_slice()[2..].to_vec())
    }

    pub fn is_finite(&self) -> bool {
        self.r_pert.is_finite()
            && self.r_dot.is_finite()
            && self.z.is_finite()
            && self.coeffs.iter().all(|c| c.is_finite())
    }

    pub(crate) fn check_n(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::Validation(format!(
                "state has {} modes, expected {n}",
                self.n()
            )));
        }
        Ok(())
    }
}

/// z = −(3γ/(4π(γ−1))) Σ Γ_j c_j − (3ρ*/R*) ℛ.
pub fn linear_z(eq: &Equilibrium, r_pert: f64, coeffs: &[f64]) -> f64 {
    -eq.a_coef() * gamma_dot(eq.params.gamma, coeffs) - 3.0 * eq.rho_star / eq.r_star * r_pert
}

/// Σ_j Γ_j c_j.
pub fn gamma_dot(gamma: f64, coeffs: &[f64]) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| gamma_coeff(gamma, i + 1) * c)
        .sum()
}

/// Characteristic magnitudes used to nondimensionalize states:
/// R* for ℛ, R*ω0 for ℛ̇ and ρ* for the mode coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateScale {
    pub radius: f64,
    pub velocity: f64,
    pub density: f64,
}

impl StateScale {
    pub fn new(eq: &Equilibrium) -> Self {
        Self {
            radius: eq.r_star,
            velocity: eq.r_star * eq.omega0(),
            density: eq.rho_star,
        }
    }

    pub fn of(&self, i: usize) -> f64 {
        match i {
            0 => self.radius,
            1 => self.velocity,
            _ => self.density,
        }
    }

    /// Diagonal of the scaling as a vector of length `len`.
    pub fn diag(&self, len: usize) -> DVector<f64> {
        DVector::from_fn(len, |i, _| self.of(i))
    }

    /// Euclidean norm of the scaled vector.
    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        v.iter()
            .enumerate()
            .map(|(i, x)| (x / self.of(i)).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}
