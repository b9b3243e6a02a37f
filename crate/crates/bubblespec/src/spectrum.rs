//! Roots of the characteristic function Q(τ), the decay-rate lower bound β
//! and the sector check.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linear_operator::{q_closed, q_closed_deriv};
use crate::params::Equilibrium;
pub use crate::series::quartic_sum;

/// A root of Q(τ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRoot {
    pub tau: Complex64,
    /// |Q(τ)| at the returned root.
    pub residual: f64,
    pub newton_iters: usize,
    /// Number of coincident roots merged into this one.
    pub multiplicity: usize,
}

/// Search rectangle [re_min, re_max] × [−im_max, im_max]; roots off the real
/// axis are located in the upper half and mirrored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub re_min: f64,
    pub re_max: f64,
    pub im_max: f64,
}

impl Region {
    /// Re ∈ [−50κ̄π², −1e-9], |Im| ≤ 20 ω0.
    pub fn default_for(eq: &Equilibrium) -> Self {
        Self {
            re_min: -50.0 * eq.kappa_bar * PI * PI,
            re_max: -1e-9,
            im_max: 20.0 * eq.omega0(),
        }
    }
}

/// Locates the roots of Q in `region`.
///
/// Real roots are bracketed between consecutive poles −κ̄π²j² and refined by
/// bisection with secant steps. Roots in the open upper half are counted by
/// the argument principle on rectangle boundaries (continuous tracking of
/// arg Q with adaptive refinement), isolated by subdivision and polished by
/// Newton's method; their conjugates are added. The result is sorted by real
/// part, then imaginary part, ascending.
pub fn find_roots(
    eq: &Equilibrium,
    region: &Region,
    max_roots: usize,
) -> Result<Vec<SpectralRoot>> {
    if !(region.re_min < region.re_max && region.im_max > 0.0) {
        return Err(Error::Validation("empty search region".into()));
    }
    if region.re_max >= 0.0 {
        return Err(Error::Validation(
            "search region must lie in Re τ < 0".into(),
        ));
    }
    let scale = eq.kappa_bar * PI * PI;
    let mut roots = real_roots(eq, region.re_min, region.re_max)?;

    // Keep the lower edge clear of the poles on the real axis. The floor in
    // units of κ̄π² keeps it outside the pole guard of `q_closed` when
    // κ̄π² ≫ ω0; roots closer to the axis than that are treated as real.
    let im_min = (1e-6 * scale.min(eq.omega0()))
        .max(1e-9 * scale)
        .max(1e-10 * region.re_min.abs());
    let rect = Rect {
        x0: region.re_min,
        x1: region.re_max,
        y0: im_min,
        y1: region.im_max,
    };
    let q = |t: Complex64| q_closed(t, eq).expect("rectangle avoids the poles");
    let total = winding(&q, &rect);
    if total < 0 {
        return Err(Error::Numerical(
            "negative winding number: pole inside region".into(),
        ));
    }
    let total = total as usize;
    if 2 * total + roots.len() > max_roots {
        return Err(Error::Numerical(format!(
            "region holds {} roots, more than max_roots = {max_roots}",
            2 * total + roots.len()
        )));
    }
    let upper = isolate(eq, rect, total, 0)?;
    if upper.len() != total {
        return Err(Error::Numerical(format!(
            "argument principle counts {total} roots but {} were polished",
            upper.len()
        )));
    }
    for r in upper {
        roots.push(SpectralRoot {
            tau: r.tau.conj(),
            ..r
        });
        roots.push(r);
    }
    Ok(dedup_sorted(roots))
}

fn dedup_sorted(mut roots: Vec<SpectralRoot>) -> Vec<SpectralRoot> {
    roots.sort_by(|a, b| {
        a.tau
            .re
            .total_cmp(&b.tau.re)
            .then(a.tau.im.total_cmp(&b.tau.im))
    });
    let mut out: Vec<SpectralRoot> = Vec::with_capacity(roots.len());
    for r in roots {
        if let Some(last) = out
            .iter_mut()
            .rev()
            .take(4)
            .find(|o| (o.tau - r.tau).norm() <= 1e-9 * o.tau.norm().max(r.tau.norm()))
        {
            last.multiplicity += r.multiplicity;
            continue;
        }
        out.push(r);
    }
    out
}

/// Root with the largest real part.
pub fn rightmost(roots: &[SpectralRoot]) -> Option<SpectralRoot> {
    roots
        .iter()
        .copied()
        .max_by(|a, b| a.tau.re.total_cmp(&b.tau.re))
}

fn real_roots(eq: &Equilibrium, lo: f64, hi: f64) -> Result<Vec<SpectralRoot>> {
    let unit = eq.kappa_bar * PI * PI;
    let qr = |x: f64| q_closed(Complex64::new(x, 0.0), eq).map(|v| v.re);
    // Interval end points: region ends and the poles −unit·j² between them.
    let mut cuts = vec![hi];
    let mut j = 1usize;
    loop {
        let p = -unit * (j * j) as f64;
        if p <= lo {
            break;
        }
        if p < hi {
            cuts.push(p);
        }
        j += 1;
    }
    cuts.push(lo);
    let intervals: Vec<(f64, f64, bool, bool)> = cuts
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let right_is_pole = i > 0;
            let left_is_pole = i + 2 < cuts.len();
            (w[1], w[0], left_is_pole, right_is_pole)
        })
        .collect();
    let found: Vec<Result<Vec<SpectralRoot>>> = intervals
        .par_iter()
        .map(|&(a, b, a_pole, b_pole)| {
            const M: usize = 96;
            let width = b - a;
            let off = 1e-10 * width;
            let xs: Vec<f64> = (0..=M)
                .map(|k| {
                    let u = 0.5 * (1.0 - (PI * k as f64 / M as f64).cos());
                    let mut x = a + width * u;
                    if k == 0 && a_pole {
                        x += off;
                    }
                    if k == M && b_pole {
                        x -= off;
                    }
                    x
                })
                .collect();
            let vals = xs.iter().map(|&x| qr(x)).collect::<Result<Vec<_>>>()?;
            let mut out = Vec::new();
            for k in 0..M {
                if vals[k] == 0.0 {
                    out.push(polish_real(eq, xs[k]));
                } else if vals[k] * vals[k + 1] < 0.0 {
                    out.push(bracket_real(eq, xs[k], xs[k + 1], vals[k])?);
                }
            }
            Ok(out)
        })
        .collect();
    let mut roots = Vec::new();
    for f in found {
        roots.extend(f?);
    }
    Ok(roots)
}

fn polish_real(eq: &Equilibrium, x: f64) -> SpectralRoot {
    let t = Complex64::new(x, 0.0);
    SpectralRoot {
        tau: t,
        residual: q_closed(t, eq).map(|v| v.norm()).unwrap_or(f64::INFINITY),
        newton_iters: 0,
        multiplicity: 1,
    }
}

/// Bisection with secant acceleration (Illinois variant) on a sign change.
fn bracket_real(eq: &Equilibrium, mut a: f64, mut b: f64, mut fa: f64) -> Result<SpectralRoot> {
    let f = |x: f64| q_closed(Complex64::new(x, 0.0), eq).map(|v| v.re);
    let mut fb = f(b)?;
    let mut side = 0i32;
    let mut iters = 0;
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        iters += 1;
        x = (a * fb - b * fa) / (fb - fa);
        if !(x > a.min(b) && x < a.max(b)) {
            x = 0.5 * (a + b);
        }
        let fx = f(x)?;
        if fx == 0.0 {
            break;
        }
        if fx * fb > 0.0 {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= 4.0 * f64::EPSILON * x.abs() {
            break;
        }
    }
    let t = Complex64::new(x, 0.0);
    Ok(SpectralRoot {
        tau: t,
        residual: q_closed(t, eq)?.norm(),
        newton_iters: iters,
        multiplicity: 1,
    })
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Rect {
    fn contains(&self, t: Complex64, slack: f64) -> bool {
        let dx = slack * (self.x1 - self.x0);
        let dy = slack * (self.y1 - self.y0);
        t.re >= self.x0 - dx && t.re <= self.x1 + dx && t.im >= self.y0 - dy && t.im <= self.y1 + dy
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    /// Split along the longer side, slightly off-center.
    fn split(&self) -> [Rect; 2] {
        const F: f64 = 0.5 + 1.0 / 97.0;
        if self.x1 - self.x0 >= self.y1 - self.y0 {
            let xm = self.x0 + F * (self.x1 - self.x0);
            [Rect { x1: xm, ..*self }, Rect { x0: xm, ..*self }]
        } else {
            let ym = self.y0 + F * (self.y1 - self.y0);
            [Rect { y1: ym, ..*self }, Rect { y0: ym, ..*self }]
        }
    }
}

/// Winding number of Q around the rectangle boundary, tracking arg Q along
/// each edge with bisection until consecutive increments stay below π/8.
fn winding<F: Fn(Complex64) -> Complex64>(q: &F, r: &Rect) -> i64 {
    let corners = [
        Complex64::new(r.x0, r.y0),
        Complex64::new(r.x1, r.y0),
        Complex64::new(r.x1, r.y1),
        Complex64::new(r.x0, r.y1),
    ];
    let mut total = 0.0;
    for k in 0..4 {
        let a = corners[k];
        let b = corners[(k + 1) % 4];
        total += arg_increment(q, a, b, q(a), q(b), 0);
    }
    (total / (2.0 * PI)).round() as i64
}

fn arg_increment<F: Fn(Complex64) -> Complex64>(
    q: &F,
    a: Complex64,
    b: Complex64,
    qa: Complex64,
    qb: Complex64,
    depth: usize,
) -> f64 {
    let d = (qb / qa).arg();
    if depth >= 60 || (d.abs() < PI / 8.0 && depth >= 3) {
        return d;
    }
    let m = 0.5 * (a + b);
    let qm = q(m);
    arg_increment(q, a, m, qa, qm, depth + 1) + arg_increment(q, m, b, qm, qb, depth + 1)
}

fn newton(eq: &Equilibrium, start: Complex64) -> Option<(Complex64, usize)> {
    let mut t = start;
    for it in 1..=60 {
        let f = q_closed(t, eq).ok()?;
        let d = q_closed_deriv(t, eq).ok()?;
        if d.norm() == 0.0 {
            return None;
        }
        let step = f / d;
        t -= step;
        if !t.re.is_finite() || !t.im.is_finite() {
            return None;
        }
        if step.norm() <= 1e-15 * t.norm() {
            return Some((t, it));
        }
    }
    None
}

fn isolate(eq: &Equilibrium, rect: Rect, count: usize, depth: usize) -> Result<Vec<SpectralRoot>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if depth > 80 {
        return Err(Error::Numerical("root isolation did not terminate".into()));
    }
    if count == 1 {
        if let Some((t, iters)) = newton(eq, rect.center()) {
            if rect.contains(t, 1e-9) {
                return Ok(vec![SpectralRoot {
                    tau: t,
                    residual: q_closed(t, eq)?.norm(),
                    newton_iters: iters,
                    multiplicity: 1,
                }]);
            }
        }
    }
    let q = |t: Complex64| q_closed(t, eq).expect("rectangle avoids the poles");
    let halves = rect.split();
    let counts: Vec<i64> = halves.iter().map(|h| winding(&q, h)).collect();
    if counts.iter().any(|&c| c < 0) || counts.iter().sum::<i64>() as usize != count {
        // A root sits on the cut; recount with a different split by shrinking.
        let shifted = Rect {
            x0: rect.x0,
            x1: rect.x1,
            y0: rect.y0,
            y1: rect.y1 * (1.0 + 1e-7),
        };
        if depth.is_multiple_of(2) {
            return isolate(eq, shifted, count, depth + 1);
        }
        return Err(Error::Numerical("inconsistent winding numbers".into()));
    }
    let parts: Vec<Result<Vec<SpectralRoot>>> = halves
        .par_iter()
        .zip(counts.par_iter())
        .map(|(h, &c)| isolate(eq, *h, c as usize, depth + 1))
        .collect();
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// The decay-rate lower bound and its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBound {
    pub beta: f64,
    pub epsilon_used: f64,
    /// The three candidates under the minimum at `epsilon_used`.
    pub branch_terms: [f64; 3],
    /// Δ = (4μ_l/R*)² − 8ρ_l p*.
    pub delta_disc: f64,
    /// Index (1, 2 or 3) of the candidate attaining the minimum.
    pub binding_branch: usize,
}

/// Branch terms at a given ε ∈ (0, 1).
pub fn rate_branches(eq: &Equilibrium, eps: f64) -> ([f64; 3], f64) {
    let p = &eq.params;
    let theta = eq.theta_gamma;
    let ratio = p.p_inf_star * eq.r_star / (2.0 * p.p_inf_star * eq.r_star + 6.0 * p.sigma);
    let first = (1.0 - (theta / (ratio + theta)).sqrt()) * PI * PI * eq.kappa_bar;
    let w2 = eq.omega0_sq();
    let second = (eps * w2).sqrt();
    let delta = (4.0 * p.mu_l / eq.r_star).powi(2) - 8.0 * p.rho_l * eq.p_star;
    let visc = 2.0 * p.mu_l / (p.rho_l * eq.r_star * eq.r_star);
    let third = if delta <= 0.0 {
        let b = ((1.0 - eps) * w2).sqrt() / (PI * PI * eq.kappa_bar);
        visc + 4.0 * (1.0 - eps).powi(2) * theta * eq.p_star * quartic_sum(b, 1e-15)
            / (PI.powi(4) * eq.kappa_bar * p.rho_l * eq.r_star * eq.r_star)
    } else {
        visc - delta.sqrt() / (2.0 * p.rho_l * eq.r_star)
    };
    ([first, second, third], delta)
}

fn bound_at(eq: &Equilibrium, eps: f64) -> f64 {
    let (t, _) = rate_branches(eq, eps);
    t[0].min(t[1]).min(t[2])
}

/// Maximizes the bound over ε ∈ [0.01, 0.99] by golden-section search.
/// The second candidate increases and the third decreases in ε, so the
/// minimum of the three is unimodal.
pub fn rate_lower_bound(eq: &Equilibrium) -> RateBound {
    let (mut a, mut b) = (0.01_f64, 0.99_f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = bound_at(eq, c);
    let mut fd = bound_at(eq, d);
    for _ in 0..200 {
        if fc < fd {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = bound_at(eq, d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = bound_at(eq, c);
        }
        if b - a < 1e-15 {
            break;
        }
    }
    let mut best = 0.5 * (a + b);
    for e in [0.01, 0.99] {
        if bound_at(eq, e) > bound_at(eq, best) {
            best = e;
        }
    }
    let (terms, delta) = rate_branches(eq, best);
    let beta = terms[0].min(terms[1]).min(terms[2]);
    let binding = (0..3).find(|&i| terms[i] == beta).unwrap() + 1;
    RateBound {
        beta,
        epsilon_used: best,
        branch_terms: terms,
        delta_disc: delta,
        binding_branch: binding,
    }
}

/// Half-angle estimate min |arg τ| over the roots; must exceed π/2.
pub fn sector_check(roots: &[SpectralRoot]) -> Result<f64> {
    if roots.is_empty() {
        return Err(Error::Validation("empty root set".into()));
    }
    let mut phi = PI;
    for r in roots {
        if r.tau.re >= 0.0 {
            return Err(Error::Numerical(format!(
                "root {} is not in the left half plane",
                r.tau
            )));
        }
        phi = phi.min(r.tau.arg().abs());
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_operator::build_operator;
    use crate::params::{mass_for_radius, solve_equilibrium, PhysicalParams};

    fn eq_with(kappa_scale: f64, mu: f64) -> Equilibrium {
        let base = PhysicalParams::air_water();
        let p = PhysicalParams {
            kappa: base.kappa * kappa_scale,
            mu_l: mu,
            ..base
        };
        solve_equilibrium(&p, mass_for_radius(&p, 1e-5)).unwrap()
    }

    fn root(t: Complex64) -> SpectralRoot {
        SpectralRoot {
            tau: t,
            residual: 0.0,
            newton_iters: 0,
            multiplicity: 1,
        }
    }

    #[test]
    fn sector_geometry() {
        assert_eq!(
            sector_check(&[root(Complex64::new(-2.0, 0.0))]).unwrap(),
            PI
        );
        let (a, b) = (3.0, 4.0);
        let phi =
            sector_check(&[root(Complex64::new(-a, b)), root(Complex64::new(-a, -b))]).unwrap();
        assert!((phi - (PI - (b / a).atan())).abs() < 1e-15);
        assert!(sector_check(&[root(Complex64::new(1.0, 1.0))]).is_err());
    }

    #[test]
    fn lower_edge_clears_poles_when_isothermal() {
        // κ̄π² ≫ ω0 here, so the edge height must not be set by ω0 alone.
        let eq = eq_with(1e5, 1.002e-3);
        assert!(eq.kappa_bar * PI * PI > 1e4 * eq.omega0());
        let roots = find_roots(&eq, &Region::default_for(&eq), 64).unwrap();
        let top = rightmost(&roots).unwrap();
        let a = build_operator(&eq, 128).unwrap().spectral_abscissa();
        assert!((top.tau.re - a).abs() < 1e-6 * eq.kappa_bar);
    }

    #[test]
    fn roots_match_dense_eigenvalues() {
        let eq = eq_with(1.0, 1.002e-3);
        let region = Region {
            re_min: -40.5 * eq.kappa_bar * PI * PI,
            re_max: -1e-9,
            im_max: 5.0 * eq.omega0(),
        };
        let roots = find_roots(&eq, &region, 100).unwrap();
        assert!(roots.len() >= 6, "{}", roots.len());
        let ev = build_operator(&eq, 256).unwrap().eigenvalues();
        for r in &roots {
            let nearest = ev
                .iter()
                .map(|e| (e - r.tau).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-6 * eq.kappa_bar, "{} off by {nearest}", r.tau);
            let d = q_closed_deriv(r.tau, &eq).unwrap();
            assert!(r.residual < 1e-10 * d.norm() * r.tau.norm());
        }
        // Every eigenvalue inside the region is found.
        let inside = ev
            .iter()
            .filter(|e| e.re > region.re_min && e.re < region.re_max && e.im.abs() < region.im_max)
            .count();
        assert_eq!(inside, roots.len());
        // Conjugate pairing.
        for r in &roots {
            assert!(roots
                .iter()
                .any(|o| (o.tau - r.tau.conj()).norm() <= 1e-9 * r.tau.norm()));
        }
    }

    #[test]
    fn roots_respect_bound() {
        for (ks, mu) in [(1.0, 1e-3), (1e-2, 1e-3), (1e2, 0.0), (1e3, 1e-3)] {
            let eq = eq_with(ks, mu);
            let rb = rate_lower_bound(&eq);
            let roots = find_roots(&eq, &Region::default_for(&eq), 400).unwrap();
            let r = rightmost(&roots).unwrap();
            assert!(r.tau.re <= -rb.beta, "ks={ks}: {} vs {}", r.tau.re, rb.beta);
            assert!(sector_check(&roots).unwrap() > PI / 2.0);
        }
    }

    #[test]
    fn bound_branch_regimes() {
        let small = rate_lower_bound(&eq_with(1e-4, 1e-3));
        assert_eq!(small.binding_branch, 1);
        let big = rate_lower_bound(&eq_with(1e4, 1e-3));
        assert_eq!(big.binding_branch, 3);
        let b1 = rate_lower_bound(&eq_with(1e4, 0.0));
        let b2 = rate_lower_bound(&eq_with(2e4, 0.0));
        // Third branch scales like 1/χ for large χ.
        assert!((b1.beta / b2.beta - 2.0).abs() < 0.05);
        assert!(small.beta > 0.0 && big.beta > 0.0);
    }

    #[test]
    fn inviscid_bound_matches_thermal_estimate() {
        let eq = eq_with(1.0, 0.0);
        let rb = rate_lower_bound(&eq);
        let p = &eq.params;
        let chi = eq.kappa_bar * eq.r_star * eq.r_star;
        assert!((chi - eq.chi).abs() < 1e-12 * chi);
        let (terms, _) = rate_branches(&eq, rb.epsilon_used);
        let visc = 2.0 * p.mu_l / (p.rho_l * eq.r_star * eq.r_star);
        assert_eq!(visc, 0.0);
        assert_eq!(rb.beta, terms[0].min(terms[1]).min(terms[2]));
    }

    #[test]
    fn epsilon_search_is_converged() {
        let eq = eq_with(1.0, 1e-3);
        let rb = rate_lower_bound(&eq);
        let grid_best = (1..=9800)
            .map(|i| 0.01 + i as f64 * 1e-4)
            .map(|e| bound_at(&eq, e))
            .fold(0.0, f64::max);
        assert!(rb.beta >= grid_best * (1.0 - 1e-12));
    }
}
