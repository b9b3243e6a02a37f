//! Exponential Runge–Kutta integrator for w' = L w + F(t, w).
//!
//! Uses the five-stage, fourth-order scheme of Hochbruck and Ostermann, which
//! keeps its order for stiff L, with φ-functions obtained from the exponential
//! of an augmented block matrix. Errors are estimated by step doubling. Step
//! sizes are restricted to h = Δ/2^k inside each output interval of length Δ,
//! so the φ-functions can be cached and output times are hit exactly.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Counters reported after an integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub exponentials: usize,
}

/// e^{cA}, φ1(cA), φ2(cA), φ3(cA) for one scaling c of A = hL.
#[derive(Debug, Clone)]
struct PhiSet {
    e: DMatrix<f64>,
    phi: [DMatrix<f64>; 3],
}

impl PhiSet {
    /// Reads the first block row of exp([[A, I, 0, 0], [0, 0, I, 0], [0, 0, 0, I], 0]).
    fn new(a: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        let mut big = DMatrix::zeros(4 * n, 4 * n);
        big.view_mut((0, 0), (n, n)).copy_from(a);
        for b in 0..3 {
            for i in 0..n {
                big[(b * n + i, (b + 1) * n + i)] = 1.0;
            }
        }
        let ex = big.exp();
        let block = |b: usize| ex.view((0, b * n), (n, n)).into_owned();
        Self {
            e: block(0),
            phi: [block(1), block(2), block(3)],
        }
    }
}

#[derive(Debug, Clone)]
struct StepMatrices {
    full: PhiSet,
    half: PhiSet,
}

/// Integrator state: the scaled generator, tolerances and φ-function cache.
///
/// Internally the unknown is v = D⁻¹ w with D = diag(`scale`); `atol` is an
/// absolute tolerance on v.
pub struct ExpRk4 {
    l_scaled: DMatrix<f64>,
    scale: DVector<f64>,
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed halving depth k in h = Δ/2^k.
    pub max_depth: u32,
    cache: HashMap<u64, StepMatrices>,
    pub stats: StepStats,
}

impl ExpRk4 {
    pub fn new(l: &DMatrix<f64>, scale: DVector<f64>, rtol: f64, atol: f64) -> Result<Self> {
        let n = l.nrows();
        if l.ncols() != n || scale.len() != n {
            return Err(Error::Validation(
                "generator and scale dimensions differ".into(),
            ));
        }
        if !(rtol > 0.0 && atol > 0.0) {
            return Err(Error::Validation("tolerances must be positive".into()));
        }
        let l_scaled = DMatrix::from_fn(n, n, |i, j| l[(i, j)] * scale[j] / scale[i]);
        Ok(Self {
            l_scaled,
            scale,
            rtol,
            atol,
            max_depth: 40,
            cache: HashMap::new(),
            stats: StepStats::default(),
        })
    }

    fn matrices(&mut self, h: f64) -> &StepMatrices {
        let key = h.to_bits();
        if !self.cache.contains_key(&key) {
            let a = &self.l_scaled * h;
            let m = StepMatrices {
                full: PhiSet::new(&a),
                half: PhiSet::new(&(a * 0.5)),
            };
            self.stats.exponentials += 2;
            if self.cache.len() > 64 {
                self.cache.clear();
            }
            self.cache.insert(key, m);
        }
        &self.cache[&key]
    }

    fn to_scaled(&self, w: &DVector<f64>) -> DVector<f64> {
        w.component_div(&self.scale)
    }

    fn unscale(&self, v: &DVector<f64>) -> DVector<f64> {
        v.component_mul(&self.scale)
    }

    /// Integrates from (t0, w0) through the increasing `out_times`, calling
    /// `output(t, w)` at each. `f` is the nonlinear part in unscaled
    /// coordinates. Returns the state at the last output time.
    pub fn integrate<F, O>(
        &mut self,
        mut f: F,
        t0: f64,
        w0: &DVector<f64>,
        out_times: &[f64],
        mut output: O,
    ) -> Result<DVector<f64>>
    where
        F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
        O: FnMut(f64, &DVector<f64>) -> Result<()>,
    {
        if w0.len() != self.scale.len() {
            return Err(Error::Validation(
                "initial state has the wrong dimension".into(),
            ));
        }
        let mut v = self.to_scaled(w0);
        let mut t = t0;
        let mut depth = 0u32;
        for &t_out in out_times {
            if t_out < t {
                return Err(Error::Validation("output times must be increasing".into()));
            }
            let span = t_out - t;
            if span == 0.0 {
                output(t, &self.unscale(&v))?;
                continue;
            }
            // Position inside the interval in units of the current step.
            let mut pos: u64 = 0;
            let mut level = depth;
            let start = t;
            while pos < (1u64 << level) {
                let total = 1u64 << level;
                let h = span / total as f64;
                let tn = start + span * pos as f64 / total as f64;
                let f0 = self.eval(&mut f, tn, &v)?;
                let coarse = self.step(&mut f, tn, h, &v, &f0)?;
                let mid = self.step(&mut f, tn, 0.5 * h, &v, &f0)?;
                let fm = self.eval(&mut f, tn + 0.5 * h, &mid)?;
                let fine = self.step(&mut f, tn + 0.5 * h, 0.5 * h, &mid, &fm)?;
                let err = self.error_norm(&(&fine - &coarse), &v, &fine) / 15.0;
                if err <= 1.0 && fine.iter().all(|x| x.is_finite()) {
                    self.stats.accepted += 1;
                    v = fine;
                    pos += 1;
                    // Grow when a doubled step is predicted to pass and the
                    // position is aligned to the coarser grid.
                    if err < 0.02 && level > 0 && pos.is_multiple_of(2) {
                        level -= 1;
                        pos /= 2;
                    }
                } else {
                    self.stats.rejected += 1;
                    level += 1;
                    pos *= 2;
                    if level > self.max_depth {
                        return Err(Error::Numerical(format!(
                            "step size underflow at t = {tn:e}"
                        )));
                    }
                }
            }
            t = t_out;
            depth = level;
            output(t, &self.unscale(&v))?;
        }
        Ok(self.unscale(&v))
    }

    fn eval<F>(&mut self, f: &mut F, t: f64, v: &DVector<f64>) -> Result<DVector<f64>>
    where
        F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
    {
        self.stats.rhs_evals += 1;
        let w = self.unscale(v);
        let out = f(t, &w)?;
        Ok(self.to_scaled(&out))
    }

    /// One step of size h from (t, v) with F(t, v) = `f1`.
    fn step<F>(
        &mut self,
        f: &mut F,
        t: f64,
        h: f64,
        v: &DVector<f64>,
        f1: &DVector<f64>,
    ) -> Result<DVector<f64>>
    where
        F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
    {
        let m = self.matrices(h).clone();
        let (e1, p1, p2, p3) = (&m.full.e, &m.full.phi[0], &m.full.phi[1], &m.full.phi[2]);
        let (eh, q1, q2, q3) = (&m.half.e, &m.half.phi[0], &m.half.phi[1], &m.half.phi[2]);
        let ev = eh * v;

        let y2 = &ev + q1 * f1 * (0.5 * h);
        let f2 = self.eval(f, t + 0.5 * h, &y2)?;

        let a31 = q1 * 0.5 - q2;
        let y3 = &ev + (&a31 * f1 + q2 * &f2) * h;
        let f3 = self.eval(f, t + 0.5 * h, &y3)?;

        let a41 = p1 - p2 * 2.0;
        let y4 = e1 * v + (&a41 * f1 + p2 * (&f2 + &f3)) * h;
        let f4 = self.eval(f, t + h, &y4)?;

        let a52 = q2 * 0.5 - p3 + p2 * 0.25 - q3 * 0.5;
        let a54 = q2 * 0.25 - &a52;
        let a51 = q1 * 0.5 - &a52 * 2.0 - &a54;
        let y5 = &ev + (&a51 * f1 + &a52 * (&f2 + &f3) + &a54 * &f4) * h;
        let f5 = self.eval(f, t + 0.5 * h, &y5)?;

        let b1 = p1 - p2 * 3.0 + p3 * 4.0;
        let b4 = p3 * 4.0 - p2;
        let b5 = p2 * 4.0 - p3 * 8.0;
        Ok(e1 * v + (&b1 * f1 + &b4 * &f4 + &b5 * &f5) * h)
    }

    fn error_norm(&self, err: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let n = err.len() as f64;
        let s: f64 = (0..err.len())
            .map(|i| {
                let sc = self.atol + self.rtol * a[i].abs().max(b[i].abs());
                (err[i] / sc).powi(2)
            })
            .sum();
        (s / n).sqrt()
    }
}
