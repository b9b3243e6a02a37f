//! The nonlinear Galerkin system with periodic forcing.
//!
//! With R = R* + ℛ, the boundary density follows from exact mass
//! conservation, z = ρ*R*³/R³ − ρ* − a Σ Γ_j c_j with a = 3γ/(4π(γ−1)), and
//! the radius obeys the Rayleigh–Plesset balance
//!
//!   ρ_l R ℛ̈ = R_gT∞(ρ* + z) − p∞(t) − 2σ/R − 4μ_l ℛ̇/R − (3/2)ρ_l ℛ̇².
//!
//! Projecting the gas density equation on φ_k gives
//!
//!   ċ_k = D_k + (ℛ̇/R) Y_k + v_k ż,   ż = z_R ℛ̇ − a Σ Γ_j ċ_j,
//!
//! where D_k = (K/R²) ∫ (Δu/ρ̄ − |∇u|²/ρ̄²) φ_k with K = κ/(γc_v),
//! ρ̄ = ρ* + u + z, Y_k = ∫ y ∂_y u φ_k, v_k = −Γ_k + (Y_k/3 + c_k)/(γ(ρ* + z))
//! and z_R = −3ρ*R*³/R⁴. The ċ equations are coupled only through the rank-one
//! term a v Γᵀ ċ, which is solved by the Sherman–Morrison formula.
//!
//! Relative to the linear mass matrix M₀ = I − aΓΓᵀ the system reads
//! ẇ = L w + 𝓝¹(w) ẇ + 𝓝⁰(t, w), with the c-block of 𝓝¹ equal to
//! −a M₀⁻¹(v + Γ)Γᵀ.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::integrator::{ExpRk4, StepStats};
use crate::linear_evolution::l2_norm;
use crate::linear_operator::{build_operator, gamma_n, TruncatedOperator};
use crate::params::{gamma_coeff, lambda, Equilibrium};
use crate::spectral_basis::{eval_phi, ModeTable, QuadratureRule};
use crate::state::{GalerkinState, StateScale};

/// Shape of the pressure modulation ψ(t; ω, A).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Waveform {
    /// A cos(ωt).
    #[default]
    Cosine,
    /// A sin(ωt).
    Sine,
}

/// Far-field pressure p∞(t) = p∞* + ψ(t; ω, A).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingSpec {
    pub omega: f64,
    pub amplitude: f64,
    pub waveform: Waveform,
}

impl ForcingSpec {
    pub fn cosine(omega: f64, amplitude: f64) -> Self {
        Self {
            omega,
            amplitude,
            waveform: Waveform::Cosine,
        }
    }

    /// No forcing; `omega` still sets the period used by periodic-orbit code.
    pub fn unforced(omega: f64) -> Self {
        Self::cosine(omega, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::Validation(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::Validation("amplitude must be finite".into()));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn psi(&self, t: f64) -> f64 {
        match self.waveform {
            Waveform::Cosine => self.amplitude * (self.omega * t).cos(),
            Waveform::Sine => self.amplitude * (self.omega * t).sin(),
        }
    }
}

/// The rank-one factor of 𝓝¹ and the remainder 𝓝⁰ at one state.
#[derive(Debug, Clone)]
pub struct NonlinearSplit {
    /// 𝓝¹ = −a q Γᵀ on the c-block, with q = M₀⁻¹(v + Γ).
    pub q: DVector<f64>,
    /// Spectral norm of 𝓝¹, a‖q‖‖Γ‖.
    pub n1_norm: f64,
    pub n0: DVector<f64>,
}

/// Density profile and radius reconstructed from a state.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalProfile {
    /// Quadrature nodes y_q followed by y = 1.
    pub y: Vec<f64>,
    /// ρ̄(y) = ρ* + Σ c_j φ_j(y) + z.
    pub density: Vec<f64>,
    pub radius: f64,
    pub radius_dot: f64,
}

/// Precomputed tables for one (equilibrium, N, forcing) triple.
#[derive(Debug, Clone)]
pub struct NonlinearSystem {
    pub eq: Equilibrium,
    pub n: usize,
    pub forcing: ForcingSpec,
    pub op: TruncatedOperator,
    table: ModeTable,
    ymat: DMatrix<f64>,
    gam: DVector<f64>,
    lam: DVector<f64>,
    gamma_n: f64,
}

impl NonlinearSystem {
    pub fn new(eq: &Equilibrium, n: usize, forcing: ForcingSpec) -> Result<Self> {
        forcing.validate()?;
        let op = build_operator(eq, n)?;
        let table = ModeTable::new(n, QuadratureRule::for_modes(n));
        let ymat = table.y_dy_matrix();
        let g = eq.params.gamma;
        Ok(Self {
            eq: *eq,
            n,
            forcing,
            op,
            table,
            ymat,
            gam: DVector::from_fn(n, |j, _| gamma_coeff(g, j + 1)),
            lam: DVector::from_fn(n, |j, _| lambda(j + 1)),
            gamma_n: gamma_n(eq, n),
        })
    }

    pub fn with_forcing(&self, forcing: ForcingSpec) -> Result<Self> {
        forcing.validate()?;
        Ok(Self {
            forcing,
            ..self.clone()
        })
    }

    pub fn dim(&self) -> usize {
        self.n + 2
    }

    fn check_dim(&self, w: &DVector<f64>) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::Validation(format!(
                "state has dimension {}, expected {}",
                w.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn radius(&self, r_pert: f64) -> Result<f64> {
        let r = self.eq.r_star + r_pert;
        if !(r > 0.0) {
            return Err(Error::Numerical(format!("bubble collapsed: R = {r:e}")));
        }
        Ok(r)
    }

    /// z = ρ*R*³/R³ − ρ* − a Σ Γ_j c_j.
    pub fn z_of(&self, r_pert: f64, coeffs: &[f64]) -> Result<f64> {
        let r = self.radius(r_pert)?;
        let e = &self.eq;
        let gc: f64 = coeffs.iter().zip(self.gam.iter()).map(|(c, g)| c * g).sum();
        Ok(e.rho_star * cube_ratio_minus_one(r_pert, r) - e.a_coef() * gc)
    }

    /// Converts a raw vector to a state with the nonlinear z.
    pub fn state(&self, w: &DVector<f64>) -> Result<GalerkinState> {
        self.check_dim(w)?;
        let coeffs = w.as_slice()[2..].to_vec();
        let z = self.z_of(w[0], &coeffs)?;
        Ok(GalerkinState {
            r_pert: w[0],
            r_dot: w[1],
            coeffs,
            z,
        })
    }

    /// Right-hand side ẇ = g(t, w). Fails on collapse, nonpositive density
    /// or ‖𝓝¹‖ ≥ 1/2.
    pub fn rhs(&self, t: f64, w: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.eval(t, w)?.0)
    }

    /// ẇ together with q = M₀⁻¹(v + Γ) and ‖𝓝¹‖.
    fn eval(&self, t: f64, w: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>, f64)> {
        self.check_dim(w)?;
        let e = &self.eq;
        let p = &e.params;
        let n = self.n;
        let r_pert = w[0];
        let r_dot = w[1];
        let c = w.rows(2, n).into_owned();
        let r = self.radius(r_pert)?;
        let a = e.a_coef();
        let z = e.rho_star * cube_ratio_minus_one(r_pert, r) - a * self.gam.dot(&c);
        let rho_b = e.rho_star + z;
        if !(rho_b > 0.0) {
            return Err(Error::Numerical(format!(
                "boundary density nonpositive: {rho_b:e}"
            )));
        }
        let z_r = -3.0 * e.rho_star * e.r_star.powi(3) / r.powi(4);

        // Quadrature of the conduction term.
        let u = &self.table.phi * &c;
        let du = &self.table.dphi * &c;
        let lap = -(&self.table.phi * c.component_mul(&self.lam));
        let mut h = DVector::zeros(self.table.rule.len());
        for q in 0..h.len() {
            let rho = rho_b + u[q];
            if !(rho > 0.0) {
                return Err(Error::Numerical(format!(
                    "density nonpositive at y = {:e}",
                    self.table.rule.nodes[q]
                )));
            }
            h[q] = self.table.rule.weights[q] * (lap[q] / rho - (du[q] / rho).powi(2));
        }
        let k_cond = p.kappa / (p.gamma * p.c_v);
        let d = self.table.phi.tr_mul(&h) * (k_cond / (r * r));

        let y = &self.ymat * &c;
        let v = -&self.gam + (&y / 3.0 + &c) / (p.gamma * rho_b);
        let rvec = d + &y * (r_dot / r) + &v * (z_r * r_dot);

        // 𝓝¹ guard.
        let vg = &v + &self.gam;
        let q = &vg + &self.gam * (a * self.gamma_n * self.gam.dot(&vg));
        let n1 = a * q.norm() * self.gam.norm();
        if !(n1 < 0.5) {
            return Err(Error::Numerical(format!(
                "left the small-data regime: ‖N1‖ = {n1:e}"
            )));
        }

        // (I + a vΓᵀ) ċ = r by Sherman–Morrison.
        let denom = 1.0 + a * self.gam.dot(&v);
        let c_dot = &rvec - &v * (a * self.gam.dot(&rvec) / denom);

        // R_gT∞(ρ* + z) − p∞(t) − 2σ/R with the equilibrium balance
        // R_gT∞ρ* = p∞* + 2σ/R* subtracted, so that w = 0 is an exact rest state.
        let r_ddot = (p.r_g * p.t_inf * z - self.forcing.psi(t)
            + 2.0 * p.sigma * r_pert / (r * e.r_star)
            - 4.0 * p.mu_l * r_dot / r
            - 1.5 * p.rho_l * r_dot * r_dot)
            / (p.rho_l * r);

        let mut out = DVector::zeros(n + 2);
        out[0] = r_dot;
        out[1] = r_ddot;
        out.rows_mut(2, n).copy_from(&c_dot);
        Ok((out, q, n1))
    }

    /// The decomposition ẇ = L w + 𝓝¹ ẇ + 𝓝⁰ − (ψ/(ρ_l R*)) e₁.
    pub fn split(&self, t: f64, w: &DVector<f64>) -> Result<NonlinearSplit> {
        let (wdot, q, n1) = self.eval(t, w)?;
        let a = self.eq.a_coef();
        let n = self.n;
        // (I − 𝓝¹) ẇ on the c-block adds a q (Γᵀ ċ).
        let mut lhs = wdot.clone();
        let gc = self.gam.dot(&wdot.rows(2, n));
        for k in 0..n {
            lhs[k + 2] += a * q[k] * gc;
        }
        let mut n0 = lhs - self.op.apply(w);
        n0[1] += self.forcing.psi(t) / (self.eq.params.rho_l * self.eq.r_star);
        Ok(NonlinearSplit { q, n1_norm: n1, n0 })
    }

    /// The forcing vector f(t, 0) = −(ψ(t)/(ρ_l R*)) (0, 1, 0, …).
    pub fn forcing_vector(&self, t: f64) -> DVector<f64> {
        let mut f = DVector::zeros(self.dim());
        f[1] = -self.forcing.psi(t) / (self.eq.params.rho_l * self.eq.r_star);
        f
    }

    /// Density on the quadrature nodes and at y = 1.
    pub fn profile(&self, s: &GalerkinState) -> Result<PhysicalProfile> {
        if s.n() != self.n {
            return Err(Error::Validation("state truncation does not match".into()));
        }
        let z = self.z_of(s.r_pert, &s.coeffs)?;
        let c = DVector::from_column_slice(&s.coeffs);
        let u = &self.table.phi * &c;
        let mut y = self.table.rule.nodes.clone();
        let mut density: Vec<f64> = u.iter().map(|v| self.eq.rho_star + v + z).collect();
        y.push(1.0);
        density.push(self.eq.rho_star + z);
        if let Some((i, d)) = density.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
            return Err(Error::Numerical(format!(
                "negative density {d:e} at y = {:e}",
                y[i]
            )));
        }
        Ok(PhysicalProfile {
            y,
            density,
            radius: self.eq.r_star + s.r_pert,
            radius_dot: s.r_dot,
        })
    }

    /// Gas mass R³ ∫_{B_1} ρ̄ by quadrature.
    pub fn physical_mass(&self, s: &GalerkinState) -> Result<f64> {
        let prof = self.profile(s)?;
        let integral: f64 = self
            .table
            .rule
            .weights
            .iter()
            .zip(&prof.density)
            .map(|(w, d)| w * d)
            .sum();
        Ok(prof.radius.powi(3) * integral)
    }

    pub fn min_density(&self, s: &GalerkinState) -> Result<f64> {
        Ok(self
            .profile(s)?
            .density
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }
}

/// z for a state, from exact mass conservation.
pub fn z_from_state(w: &GalerkinState, eq: &Equilibrium) -> Result<f64> {
    let r = eq.r_star + w.r_pert;
    if !(r > 0.0) {
        return Err(Error::Numerical(format!("bubble collapsed: R = {r:e}")));
    }
    let gc: f64 = w
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| gamma_coeff(eq.params.gamma, i + 1) * c)
        .sum();
    Ok(eq.rho_star * cube_ratio_minus_one(w.r_pert, r) - eq.a_coef() * gc)
}

/// (R*/R)³ − 1 = −x(3 − 3x + x²) with x = ℛ/R, free of cancellation for
/// small ℛ.
fn cube_ratio_minus_one(r_pert: f64, r: f64) -> f64 {
    let x = r_pert / r;
    -x * (3.0 - 3.0 * x + x * x)
}

/// ẇ at (t, w). Builds the tables for each call; use [`NonlinearSystem`] in
/// loops.
pub fn assemble_rhs(
    t: f64,
    w: &GalerkinState,
    forcing: &ForcingSpec,
    eq: &Equilibrium,
) -> Result<DVector<f64>> {
    let sys = NonlinearSystem::new(eq, w.n(), *forcing)?;
    sys.rhs(t, &w.to_vector())
}

/// Density profile, R and Ṙ for a state. The profile is evaluated on the
/// default quadrature nodes for its truncation and at y = 1.
pub fn reconstruct_physical(w: &GalerkinState, eq: &Equilibrium) -> Result<PhysicalProfile> {
    let n = w.n();
    let z = z_from_state(w, eq)?;
    let rule = QuadratureRule::for_modes(n);
    let mut y = rule.nodes;
    y.push(1.0);
    let mut density = Vec::with_capacity(y.len());
    for &yy in &y {
        let u: f64 = w
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * eval_phi(j + 1, yy))
            .sum();
        let d = eq.rho_star + u + z;
        if !(d > 0.0) {
            return Err(Error::Numerical(format!(
                "negative density {d:e} at y = {yy:e}"
            )));
        }
        density.push(d);
    }
    Ok(PhysicalProfile {
        y,
        density,
        radius: eq.r_star + w.r_pert,
        radius_dot: w.r_dot,
    })
}

/// Sampled nonlinear trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearTrace {
    pub times: Vec<f64>,
    pub states: Vec<GalerkinState>,
    pub z: Vec<f64>,
    pub mass: Vec<f64>,
    pub min_density: Vec<f64>,
    pub norms: Vec<f64>,
    pub stats: StepStats,
}

/// Tolerances for [`evolve_with`]. `atol` applies to the state scaled by
/// (R*, R*ω0, ρ*, …).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerances {
    /// rtol = tol and atol = tol times the larger of the scaled size of w0
    /// and A/p∞*, so that small-amplitude runs are resolved relative to
    /// their own size.
    pub fn relative_to(sys: &NonlinearSystem, w0: &DVector<f64>, tol: f64) -> Self {
        let size = StateScale::new(&sys.eq)
            .norm(w0)
            .max(sys.forcing.amplitude.abs() / sys.eq.params.p_inf_star);
        let size = if size > 0.0 { size } else { 1e-12 };
        Self {
            rtol: tol,
            atol: tol * size,
        }
    }
}

/// Integrates from w0 at t0 through `times`, returning raw state vectors.
pub fn evolve_with(
    sys: &NonlinearSystem,
    t0: f64,
    w0: &DVector<f64>,
    times: &[f64],
    tol: Tolerances,
) -> Result<(Vec<DVector<f64>>, StepStats)> {
    sys.check_dim(w0)?;
    let scale = StateScale::new(&sys.eq).diag(sys.dim());
    let mut it = ExpRk4::new(&sys.op.matrix, scale, tol.rtol, tol.atol)?;
    let l = sys.op.matrix.clone();
    let mut out = Vec::with_capacity(times.len());
    it.integrate(
        |t, w| Ok(sys.rhs(t, w)? - &l * w),
        t0,
        w0,
        times,
        |_, w| {
            out.push(w.clone());
            Ok(())
        },
    )?;
    Ok((out, it.stats))
}

/// Integrates the forced system over [0, t_end] with `n_out` equal output
/// intervals and records z, the physical mass and the minimum density at
/// each output time (including t = 0).
pub fn evolve_nonlinear(
    sys: &NonlinearSystem,
    w0: &GalerkinState,
    t_end: f64,
    n_out: usize,
    tol: f64,
) -> Result<NonlinearTrace> {
    if !(t_end > 0.0) || n_out == 0 {
        return Err(Error::Validation(
            "need t_end > 0 and at least one output".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::Validation("tolerance must be positive".into()));
    }
    w0.check_n(sys.n)?;
    let v0 = w0.to_vector();
    let times: Vec<f64> = (0..=n_out)
        .map(|k| t_end * k as f64 / n_out as f64)
        .collect();
    let (vs, stats) = evolve_with(
        sys,
        0.0,
        &v0,
        &times,
        Tolerances::relative_to(sys, &v0, tol),
    )?;
    let mut trace = NonlinearTrace {
        times,
        states: Vec::with_capacity(vs.len()),
        z: Vec::with_capacity(vs.len()),
        mass: Vec::with_capacity(vs.len()),
        min_density: Vec::with_capacity(vs.len()),
        norms: Vec::with_capacity(vs.len()),
        stats,
    };
    for v in &vs {
        let s = sys.state(v)?;
        trace.z.push(s.z);
        trace.mass.push(sys.physical_mass(&s)?);
        trace.min_density.push(sys.min_density(&s)?);
        trace.norms.push(l2_norm(&sys.eq, &s));
        trace.states.push(s);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_evolution::{apply_propagator, fit_log_slope};
    use crate::params::{mass_for_radius, solve_equilibrium, PhysicalParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eq() -> Equilibrium {
        let p = PhysicalParams::air_water();
        solve_equilibrium(&p, mass_for_radius(&p, 1e-5)).unwrap()
    }

    fn random_vector(eq: &Equilibrium, n: usize, size: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let sc = StateScale::new(eq);
        DVector::from_fn(n + 2, |i, _| {
            let decay = if i >= 2 { 1.0 / (i - 1) as f64 } else { 1.0 };
            size * sc.of(i) * decay * rng.random_range(-1.0..1.0)
        })
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let e = eq();
        let sys = NonlinearSystem::new(&e, 8, ForcingSpec::unforced(1e6)).unwrap();
        for t in [0.0, 1e-6, 3.3e-5] {
            let d = sys.rhs(t, &DVector::zeros(10)).unwrap();
            assert!(d.iter().all(|x| *x == 0.0), "{d}");
        }
    }

    #[test]
    fn forcing_at_rest() {
        let e = eq();
        let f = ForcingSpec::cosine(1.2e6, 1e-3 * e.params.p_inf_star);
        let sys = NonlinearSystem::new(&e, 8, f).unwrap();
        let t = 0.7e-6;
        let d = sys.rhs(t, &DVector::zeros(10)).unwrap();
        let expected = sys.forcing_vector(t);
        let sc = StateScale::new(&e);
        assert!(sc.norm(&(&d - &expected)) < 1e-12 * sc.norm(&expected));
        assert!(
            (sys.forcing_vector(t + f.period())[1] - expected[1]).abs() < 1e-9 * expected[1].abs()
        );
    }

    #[test]
    fn z_taylor_expansion() {
        let e = eq();
        for x in [1e-3, 1e-4] {
            let r = x * e.r_star;
            let w = GalerkinState {
                r_pert: r,
                ..GalerkinState::zeros(4)
            };
            let z = z_from_state(&w, &e).unwrap();
            // (1 + x)^{-3} = 1 − 3x + 6x² − …
            let quad = (z + 3.0 * e.rho_star * x) / (e.rho_star * x * x);
            assert!((quad - 6.0).abs() < 20.0 * x, "{quad}");
        }
        assert_eq!(z_from_state(&GalerkinState::zeros(3), &e).unwrap(), 0.0);
        let collapsed = GalerkinState {
            r_pert: -2.0 * e.r_star,
            ..GalerkinState::zeros(3)
        };
        assert!(z_from_state(&collapsed, &e).is_err());
    }

    #[test]
    fn mass_is_exact_for_random_states() {
        let e = eq();
        let n = 12;
        let sys = NonlinearSystem::new(&e, n, ForcingSpec::unforced(1e6)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let v = random_vector(&e, n, 1e-2, &mut rng);
            let s = sys.state(&v).unwrap();
            let m = sys.physical_mass(&s).unwrap();
            assert!(((m - e.m) / e.m).abs() < 1e-10);
            let prof = reconstruct_physical(&s, &e).unwrap();
            assert_eq!(*prof.density.last().unwrap(), e.rho_star + s.z);
        }
    }

    #[test]
    fn jacobian_matches_operator() {
        let e = eq();
        let n = 16;
        let sys = NonlinearSystem::new(&e, n, ForcingSpec::unforced(1e6)).unwrap();
        let sc = StateScale::new(&e);
        let dim = n + 2;
        let mut worst: f64 = 0.0;
        for j in 0..dim {
            let h = 1e-7 * sc.of(j);
            let mut wp = DVector::zeros(dim);
            wp[j] = h;
            let fp = sys.rhs(0.0, &wp).unwrap();
            let fm = sys.rhs(0.0, &(-wp)).unwrap();
            let col = (fp - fm) / (2.0 * h);
            for i in 0..dim {
                let l = sys.op.matrix[(i, j)];
                // Compare on the scaled matrix D⁻¹ J D.
                let s = sc.of(j) / sc.of(i);
                let err = ((col[i] - l) * s).abs();
                let floor = 1e-9 * (sys.op.matrix[(i, i)].abs() + 1.0);
                worst = worst.max(err / (l.abs() * s).max(floor));
            }
        }
        assert!(worst < 1e-5, "{worst}");
    }

    #[test]
    fn nonlinear_terms_are_small() {
        let e = eq();
        let n = 10;
        let sys = NonlinearSystem::new(&e, n, ForcingSpec::cosine(1e6, 1e3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dir = random_vector(&e, n, 1.0, &mut rng);
        let sc = StateScale::new(&e);
        let mut q0 = Vec::new();
        let mut q1 = Vec::new();
        for eps in [1e-2, 1e-3, 1e-4] {
            let w = &dir * eps;
            let s = sys.split(0.3e-6, &w).unwrap();
            q0.push(sc.norm(&s.n0) / eps.powi(2));
            q1.push(s.n1_norm / eps);
            // The split reproduces ẇ.
            let wdot = sys.rhs(0.3e-6, &w).unwrap();
            let a = e.a_coef();
            let gc: f64 = (0..n)
                .map(|k| gamma_coeff(e.params.gamma, k + 1) * wdot[k + 2])
                .sum();
            let mut n1w = DVector::zeros(n + 2);
            for k in 0..n {
                n1w[k + 2] = -a * s.q[k] * gc;
            }
            let rebuilt = sys.op.apply(&w) + n1w + &s.n0 + sys.forcing_vector(0.3e-6);
            assert!(sc.norm(&(&rebuilt - &wdot)) < 1e-9 * sc.norm(&wdot));
        }
        for r in [&q0, &q1] {
            let (lo, hi) = r
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(l, h), x| (l.min(*x), h.max(*x)));
            assert!(hi / lo < 1.5, "{r:?}");
        }
    }

    #[test]
    fn regime_guard_trips() {
        let e = eq();
        let sys = NonlinearSystem::new(&e, 6, ForcingSpec::unforced(1e6)).unwrap();
        let mut w = DVector::zeros(8);
        w[2] = -5.0 * e.rho_star;
        assert!(matches!(sys.rhs(0.0, &w), Err(Error::Numerical(_))));
        w[2] = 0.0;
        w[0] = -1.5 * e.r_star;
        assert!(matches!(sys.rhs(0.0, &w), Err(Error::Numerical(_))));
    }

    #[test]
    fn unforced_decay_matches_linear() {
        let e = eq();
        let n = 12;
        let sys = NonlinearSystem::new(&e, n, ForcingSpec::unforced(1e6)).unwrap();
        let mut coeffs = vec![0.0; n];
        coeffs[0] = 1e-4 * e.rho_star;
        let w0 = GalerkinState {
            r_pert: 1e-4 * e.r_star,
            r_dot: 0.0,
            z: 0.0,
            coeffs,
        };
        let t_end = 60e-6;
        let tr = evolve_nonlinear(&sys, &w0, t_end, 60, 1e-9).unwrap();
        let lin: Vec<f64> = tr
            .times
            .iter()
            .map(|&t| {
                let v = apply_propagator(&sys.op, t, &w0.to_vector());
                l2_norm(&e, &GalerkinState::from_vector_linear(&e, &v))
            })
            .collect();
        let late = 20..tr.times.len();
        let fit_n = fit_log_slope(&tr.times[late.clone()], &tr.norms[late.clone()]).unwrap();
        let fit_l = fit_log_slope(&tr.times[late.clone()], &lin[late]).unwrap();
        assert!(((fit_n - fit_l) / fit_l).abs() < 0.1, "{fit_n} vs {fit_l}");
        for m in &tr.mass {
            assert!(((m - e.m) / e.m).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_data_zero_trace() {
        let e = eq();
        let sys = NonlinearSystem::new(&e, 6, ForcingSpec::unforced(1e6)).unwrap();
        let tr = evolve_nonlinear(&sys, &GalerkinState::zeros(6), 1e-5, 4, 1e-8).unwrap();
        for s in &tr.states {
            assert!(s.to_vector().iter().all(|x| x.abs() < 1e-20));
        }
    }
}
