//! Dirichlet eigenfunctions of the Laplacian on the unit ball and radial
//! Gauss–Legendre quadrature.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Radial Dirichlet eigenfunction φ_j(y) = sin(jπy)/(√(2π) y).
pub fn eval_phi(j: usize, y: f64) -> f64 {
    debug_assert!(j >= 1 && (0.0..=1.0).contains(&y));
    let k = j as f64 * PI;
    if y.abs() < 1e-8 {
        return k / (2.0 * PI).sqrt();
    }
    if y == 1.0 {
        return 0.0;
    }
    (k * y).sin() / ((2.0 * PI).sqrt() * y)
}

/// Radial derivative dφ_j/dy.
pub fn eval_dphi(j: usize, y: f64) -> f64 {
    let k = j as f64 * PI;
    let x = k * y;
    let norm = (2.0 * PI).sqrt();
    if x.abs() < 0.5 {
        // x cos x − sin x = Σ_{n≥1} (−1)^n 2n x^{2n+1}/(2n+1)!
        let mut sum = 0.0;
        let mut term = x / 6.0; // x^{2n-1}/(2n+1)! at n = 1
        for n in 1..12 {
            let sign = if n % 2 == 1 { -1.0 } else { 1.0 };
            sum += sign * 2.0 * n as f64 * term;
            term *= x * x / ((2 * n + 2) as f64 * (2 * n + 3) as f64);
        }
        return k * k * sum / norm;
    }
    (x * x.cos() - x.sin()) / (norm * y * y)
}

/// Radial quadrature on the unit ball: Σ_q w_q f(y_q) ≈ ∫_{B_1} f(|x|) dx.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Gauss–Legendre rule with `n` nodes on [0, 1], weights multiplied by 4πy².
    pub fn gauss_legendre(n: usize) -> Self {
        let (x, w) = gauss_legendre_unit(n);
        let weights = x
            .iter()
            .zip(&w)
            .map(|(&y, &wi)| 4.0 * PI * y * y * wi)
            .collect();
        Self { nodes: x, weights }
    }

    /// Default rule for truncation `n_modes`: 4N + 16 nodes.
    pub fn for_modes(n_modes: usize) -> Self {
        Self::gauss_legendre(4 * n_modes + 16)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Legendre nodes and weights on [0, 1], ascending.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        // Map [-1, 1] to [0, 1].
        x[i] = 0.5 * (1.0 - t);
        x[n - 1 - i] = 0.5 * (1.0 + t);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Σ_q w_q f(y_q). Fails on non-finite integrand values.
pub fn radial_integral<F: Fn(f64) -> f64>(f: F, rule: &QuadratureRule) -> Result<f64> {
    let mut acc = 0.0;
    for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
        let v = f(y);
        if !v.is_finite() {
            return Err(Error::Numerical(format!("non-finite integrand at y = {y}")));
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Tabulated modes φ_j and φ_j' on a quadrature rule, j = 1..=N.
#[derive(Debug, Clone)]
pub struct ModeTable {
    pub n_modes: usize,
    pub rule: QuadratureRule,
    /// `phi[(q, j-1)]`.
    pub phi: DMatrix<f64>,
    /// `dphi[(q, j-1)]`.
    pub dphi: DMatrix<f64>,
}

impl ModeTable {
    pub fn new(n_modes: usize, rule: QuadratureRule) -> Self {
        let nq = rule.len();
        let phi = DMatrix::from_fn(nq, n_modes, |q, j| eval_phi(j + 1, rule.nodes[q]));
        let dphi = DMatrix::from_fn(nq, n_modes, |q, j| eval_dphi(j + 1, rule.nodes[q]));
        Self {
            n_modes,
            rule,
            phi,
            dphi,
        }
    }

    /// Gram matrix ∫ φ_j φ_k.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.n_modes;
        DMatrix::from_fn(n, n, |j, k| {
            (0..self.rule.len())
                .map(|q| self.rule.weights[q] * self.phi[(q, j)] * self.phi[(q, k)])
                .sum()
        })
    }

    /// Matrix Y with Y[(k, j)] = ∫ y φ_j'(y) φ_k(y).
    pub fn y_dy_matrix(&self) -> DMatrix<f64> {
        let n = self.n_modes;
        DMatrix::from_fn(n, n, |k, j| {
            (0..self.rule.len())
                .map(|q| {
                    self.rule.weights[q] * self.rule.nodes[q] * self.dphi[(q, j)] * self.phi[(q, k)]
                })
                .sum()
        })
    }
}
