//! Physical parameters, the equilibrium bubble and derived constants.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Physical constants of the gas and the surrounding liquid, in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Thermal conductivity of the gas [W/(m K)].
    pub kappa: f64,
    /// Adiabatic constant c_p / c_v.
    pub gamma: f64,
    /// Heat capacity at constant volume [J/(kg K)].
    pub c_v: f64,
    /// Specific gas constant [J/(kg K)].
    pub r_g: f64,
    /// Far-field liquid temperature [K].
    pub t_inf: f64,
    /// Far-field equilibrium liquid pressure [Pa].
    pub p_inf_star: f64,
    /// Surface tension [N/m].
    pub sigma: f64,
    /// Liquid dynamic viscosity [Pa s].
    pub mu_l: f64,
    /// Liquid density [kg/m^3].
    pub rho_l: f64,
}

/// Config keys accepted by [`PhysicalParams::from_map`], in canonical order.
pub const CONFIG_KEYS: [&str; 10] = [
    "kappa",
    "gamma",
    "c_v",
    "R_g",
    "T_inf",
    "p_inf_star",
    "sigma",
    "mu_l",
    "rho_l",
    "M",
];

impl PhysicalParams {
    /// Validating constructor.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kappa: f64,
        gamma: f64,
        c_v: f64,
        r_g: f64,
        t_inf: f64,
        p_inf_star: f64,
        sigma: f64,
        mu_l: f64,
        rho_l: f64,
    ) -> Result<Self> {
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
        p.validate()?;
        Ok(p)
    }

    /// Air-like gas in water at room temperature. Heat capacities are chosen so
    /// that `gamma = 1 + R_g / c_v` holds to rounding.
    pub fn air_water() -> Self {
        let r_g = 287.05;
        let gamma = 1.4;
        Self {
            kappa: 0.0257,
            gamma,
            c_v: r_g / (gamma - 1.0),
            r_g,
            t_inf: 293.15,
            p_inf_star: 101_325.0,
            sigma: 0.0728,
            mu_l: 1.002e-3,
            rho_l: 998.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("c_v", self.c_v),
            ("R_g", self.r_g),
            ("T_inf", self.t_inf),
            ("p_inf_star", self.p_inf_star),
            ("sigma", self.sigma),
            ("mu_l", self.mu_l),
            ("rho_l", self.rho_l),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::Validation(format!("{name} is not finite")));
            }
        }
        for (name, v) in [
            ("kappa", self.kappa),
            ("c_v", self.c_v),
            ("R_g", self.r_g),
            ("T_inf", self.t_inf),
            ("p_inf_star", self.p_inf_star),
            ("rho_l", self.rho_l),
        ] {
            if v <= 0.0 {
                return Err(Error::Validation(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.sigma < 0.0 || self.mu_l < 0.0 {
            return Err(Error::Validation(
                "sigma and mu_l must be nonnegative".into(),
            ));
        }
        if self.gamma <= 1.0 {
            return Err(Error::Validation(format!(
                "gamma must exceed 1, got {}",
                self.gamma
            )));
        }
        let expected = 1.0 + self.r_g / self.c_v;
        if ((self.gamma - expected) / expected).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "gamma = {} is inconsistent with 1 + R_g/c_v = {expected}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Parses a flat key/number map holding exactly the keys in [`CONFIG_KEYS`].
    /// Returns the parameters and the bubble mass `M`.
    pub fn from_map(map: &BTreeMap<String, f64>) -> Result<(Self, f64)> {
        for key in map.keys() {
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::Validation(format!("unknown parameter key `{key}`")));
            }
        }
        let get = |k: &str| {
            map.get(k)
                .copied()
                .ok_or_else(|| Error::Validation(format!("missing parameter key `{k}`")))
        };
        let params = Self::new(
            get("kappa")?,
            get("gamma")?,
            get("c_v")?,
            get("R_g")?,
            get("T_inf")?,
            get("p_inf_star")?,
            get("sigma")?,
            get("mu_l")?,
            get("rho_l")?,
        )?;
        let m = get("M")?;
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Validation(format!("M must be positive, got {m}")));
        }
        Ok((params, m))
    }

    /// Parses TOML text with exactly the parameter keys at top level.
    pub fn from_toml_str(text: &str) -> Result<(Self, f64)> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Validation(format!("bad config: {e}")))?;
        let mut map = BTreeMap::new();
        for (k, v) in table {
            let x = match v {
                toml::Value::Float(f) => f,
                toml::Value::Integer(i) => i as f64,
                other => {
                    return Err(Error::Validation(format!(
                        "key `{k}` must be a number, got {}",
                        other.type_str()
                    )))
                }
            };
            map.insert(k, x);
        }
        Self::from_map(&map)
    }

    /// Renders the parameters and mass as TOML with full precision.
    pub fn to_toml_string(&self, m: f64) -> String {
        let vals = [
            self.kappa,
            self.gamma,
            self.c_v,
            self.r_g,
            self.t_inf,
            self.p_inf_star,
            self.sigma,
            self.mu_l,
            self.rho_l,
            m,
        ];
        CONFIG_KEYS
            .iter()
            .zip(vals)
            .map(|(k, v)| format!("{k} = {v:e}\n"))
            .collect()
    }

    /// Returns a copy with `kappa` replaced.
    pub fn with_kappa(&self, kappa: f64) -> Self {
        Self { kappa, ..*self }
    }

    /// ϑ(γ) = 1 − 1/γ.
    pub fn theta(&self) -> f64 {
        1.0 - 1.0 / self.gamma
    }
}

/// Equilibrium bubble of mass `m` and the composite constants used by the
/// linear and nonlinear models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub params: PhysicalParams,
    pub m: f64,
    pub rho_star: f64,
    pub r_star: f64,
    pub p_star: f64,
    /// χ / R*² [1/s].
    pub kappa_bar: f64,
    /// Thermal diffusivity κ / (c_p ρ*) [m²/s].
    pub chi: f64,
    /// Restoring coefficient [1/s²].
    pub b: f64,
    /// Density-to-acceleration coupling [m³/(kg s²)].
    pub d: f64,
    pub theta_gamma: f64,
}

impl Equilibrium {
    /// Squared natural frequency 2p*/(ρ_l R*²).
    pub fn omega0_sq(&self) -> f64 {
        2.0 * self.p_star / (self.params.rho_l * self.r_star * self.r_star)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0_sq().sqrt()
    }

    /// The constant 3γ/(4π(γ−1)) linking Σ Γ_j c_j to the mean of u.
    pub fn a_coef(&self) -> f64 {
        let g = self.params.gamma;
        3.0 * g / (4.0 * PI * (g - 1.0))
    }

    /// Relative residuals of the two equilibrium identities:
    /// (mass identity, pressure balance).
    pub fn identity_residuals(&self) -> (f64, f64) {
        let p = &self.params;
        let mass = 4.0 / 3.0 * PI * self.rho_star * self.r_star.powi(3);
        let lhs = p.r_g * p.t_inf * self.rho_star;
        let rhs = p.p_inf_star + 2.0 * p.sigma / self.r_star;
        (((mass - self.m) / self.m).abs(), ((lhs - rhs) / rhs).abs())
    }
}

/// Solves p∞* R³ + 2σ R² = 3 M R_g T∞ / (4π) for the equilibrium radius and
/// derives the remaining constants.
pub fn solve_equilibrium(params: &PhysicalParams, m: f64) -> Result<Equilibrium> {
    params.validate()?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Validation(format!("M must be positive, got {m}")));
    }
    let p = params;
    let rhs = 3.0 * m * p.r_g * p.t_inf / (4.0 * PI);
    let f = |r: f64| (p.p_inf_star * r + 2.0 * p.sigma) * r * r - rhs;
    let fp = |r: f64| 3.0 * p.p_inf_star * r * r + 4.0 * p.sigma * r;

    let r0 = (rhs / p.p_inf_star).cbrt();
    let (mut lo, mut hi) = (0.0_f64, 2.0 * r0);
    if f(hi) < 0.0 {
        return Err(Error::Numerical(
            "equilibrium bracket does not contain a root".into(),
        ));
    }
    // Start at the σ = 0 radius, which bounds the root from above.
    let mut r = r0;
    let mut converged = false;
    for _ in 0..200 {
        let fr = f(r);
        if fr == 0.0 {
            converged = true;
            break;
        }
        if fr < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let mut next = r - fr / fp(r);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - r).abs() <= 1e-15 * r {
            r = next;
            converged = true;
            break;
        }
        r = next;
    }
    if !converged || !(r > 0.0) {
        return Err(Error::Numerical(
            "equilibrium radius solve did not converge".into(),
        ));
    }
    Ok(equilibrium_from_radius(p, m, r))
}

fn equilibrium_from_radius(p: &PhysicalParams, m: f64, r_star: f64) -> Equilibrium {
    let rho_star = (p.p_inf_star + 2.0 * p.sigma / r_star) / (p.r_g * p.t_inf);
    let p_star = p.r_g * p.t_inf * rho_star;
    let chi = p.kappa / (p.gamma * p.c_v * rho_star);
    let kappa_bar = chi / (r_star * r_star);
    let b = 3.0 * p.p_inf_star / (p.rho_l * r_star * r_star)
        + 4.0 * p.sigma / (p.rho_l * r_star.powi(3));
    let d = 3.0 * p.gamma * p.r_g * p.t_inf / (4.0 * PI * (p.gamma - 1.0) * p.rho_l * r_star);
    Equilibrium {
        params: *p,
        m,
        rho_star,
        r_star,
        p_star,
        kappa_bar,
        chi,
        b,
        d,
        theta_gamma: p.theta(),
    }
}

/// Mass of a bubble of equilibrium radius `r_star`. Convenient for building
/// test cases from a target radius.
pub fn mass_for_radius(p: &PhysicalParams, r_star: f64) -> f64 {
    let rho = (p.p_inf_star + 2.0 * p.sigma / r_star) / (p.r_g * p.t_inf);
    4.0 / 3.0 * PI * rho * r_star.powi(3)
}

/// Eigenvalue λ_j = (jπ)² of the Dirichlet Laplacian on the unit ball.
pub fn lambda(j: usize) -> f64 {
    let x = j as f64 * PI;
    x * x
}

/// Coupling Γ_j = (2√2(γ−1)/(√π γ)) (−1)^{j−1}/j.
pub fn gamma_coeff(gamma: f64, j: usize) -> f64 {
    let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
    2.0 * std::f64::consts::SQRT_2 * (gamma - 1.0) / (PI.sqrt() * gamma) * sign / j as f64
}

/// Limit of Σ_j Γ_j² as N → ∞: 4(γ−1)²π/(3γ²).
pub fn gamma_sq_sum_limit(gamma: f64) -> f64 {
    4.0 * (gamma - 1.0).powi(2) * PI / (3.0 * gamma * gamma)
}

/// Mode constants (λ_j, Γ_j, e_j) with e_j = κ̄λ_j·3γ²/(4π(γ−1)) + (3ρ*/R*)γd.
pub fn mode_constants(eq: &Equilibrium, j: usize) -> Result<(f64, f64, f64)> {
    if j < 1 {
        return Err(Error::Validation("mode index must be at least 1".into()));
    }
    let g = eq.params.gamma;
    let lam = lambda(j);
    let e = eq.kappa_bar * lam * 3.0 * g * g / (4.0 * PI * (g - 1.0))
        + 3.0 * eq.rho_star / eq.r_star * g * eq.d;
    Ok((lam, gamma_coeff(g, j), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bisect_radius(p: &PhysicalParams, m: f64) -> f64 {
        let rhs = 3.0 * m * p.r_g * p.t_inf / (4.0 * PI);
        let f = |r: f64| p.p_inf_star * r.powi(3) + 2.0 * p.sigma * r * r - rhs;
        let (mut lo, mut hi) = (0.0, 1.0);
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn zero_surface_tension_closed_form() {
        let p = PhysicalParams {
            sigma: 0.0,
            ..PhysicalParams::air_water()
        };
        let m = 1e-12;
        let eq = solve_equilibrium(&p, m).unwrap();
        let r = (3.0 * m * p.r_g * p.t_inf / (4.0 * PI * p.p_inf_star)).cbrt();
        assert!((eq.r_star - r).abs() <= 1e-14 * r);
        let rho = p.p_inf_star / (p.r_g * p.t_inf);
        assert!((eq.rho_star - rho).abs() <= 1e-14 * rho);
    }

    #[test]
    fn doubling_pressure_shrinks_bubble() {
        let p = PhysicalParams::air_water();
        let m = mass_for_radius(&p, 1e-5);
        let a = solve_equilibrium(&p, m).unwrap();
        let p2 = PhysicalParams {
            p_inf_star: 2.0 * p.p_inf_star,
            ..p
        };
        let b = solve_equilibrium(&p2, m).unwrap();
        assert!(b.r_star < a.r_star);
    }

    #[test]
    fn matches_bisection_oracle() {
        let p = PhysicalParams::air_water();
        for r in [1e-7, 1e-6, 3e-5, 1e-3] {
            let m = mass_for_radius(&p, r);
            let eq = solve_equilibrium(&p, m).unwrap();
            let oracle = bisect_radius(&p, m);
            assert!((eq.r_star - oracle).abs() <= 1e-12 * oracle, "{r}");
        }
    }

    #[test]
    fn mode_constant_examples() {
        let eq = solve_equilibrium(&PhysicalParams::air_water(), 1e-12).unwrap();
        let (l1, g1, e1) = mode_constants(&eq, 1).unwrap();
        assert_eq!(l1, PI * PI);
        let (_, g2, _) = mode_constants(&eq, 2).unwrap();
        assert!((g2 + g1 / 2.0).abs() < 1e-16);
        assert!(e1 > 0.0);
        assert!(mode_constants(&eq, 0).is_err());
    }

    #[test]
    fn units_audit() {
        // Rescaling the unit of time by s multiplies rates by 1/s: κ, μ_l scale
        // with 1/s and pressures, σ with 1/s² (mass and length units fixed).
        let p = PhysicalParams::air_water();
        let m = mass_for_radius(&p, 1e-5);
        let s: f64 = 3.0;
        let q = PhysicalParams {
            kappa: p.kappa / s.powi(3),
            c_v: p.c_v / (s * s),
            r_g: p.r_g / (s * s),
            p_inf_star: p.p_inf_star / (s * s),
            sigma: p.sigma / (s * s),
            mu_l: p.mu_l / s,
            ..p
        };
        let a = solve_equilibrium(&p, m).unwrap();
        let b = solve_equilibrium(&q, m).unwrap();
        assert!(((b.kappa_bar * s) / a.kappa_bar - 1.0).abs() < 1e-12);
        assert!(((b.b * s * s) / a.b - 1.0).abs() < 1e-12);
        assert!(((b.d * s * s) / a.d - 1.0).abs() < 1e-12);
        assert!((b.r_star / a.r_star - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_round_trip_and_unknown_key() {
        let p = PhysicalParams::air_water();
        let text = p.to_toml_string(2e-12);
        let (q, m) = PhysicalParams::from_toml_str(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(m, 2e-12);
        let bad = format!("{text}extra = 1.0\n");
        assert!(PhysicalParams::from_toml_str(&bad).is_err());
    }

    #[test]
    fn rejects_inconsistent_gamma() {
        let mut p = PhysicalParams::air_water();
        p.gamma = 1.41;
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn gamma_sum_tail_bound(g in 1.01f64..3.0, n in 1usize..2000) {
            let s: f64 = (1..=n).map(|j| gamma_coeff(g, j).powi(2)).sum();
            let tail = gamma_sq_sum_limit(g) - s;
            let bound = 8.0 * (g - 1.0).powi(2) / (PI * g * g) / n as f64;
            prop_assert!(tail >= -1e-15 && tail <= bound);
        }

        #[test]
        fn equilibrium_identities(
            lr in -7.0f64..-2.0,
            lp in 3.0f64..7.0,
            sig in 0.0f64..0.1,
            g in 1.05f64..1.7,
        ) {
            let r_g = 287.0;
            let p = PhysicalParams {
                gamma: g,
                c_v: r_g / (g - 1.0),
                r_g,
                p_inf_star: 10f64.powf(lp),
                sigma: sig,
                ..PhysicalParams::air_water()
            };
            let m = mass_for_radius(&p, 10f64.powf(lr));
            let eq = solve_equilibrium(&p, m).unwrap();
            let (a, b) = eq.identity_residuals();
            prop_assert!(a < 1e-12 && b < 1e-12);
            prop_assert!(eq.b > 0.0 && eq.d > 0.0);
        }
    }
}
