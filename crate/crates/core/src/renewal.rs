//! Discrete convolution algebra on sequences indexed from 1.
//!
//! All slices here hold `x_1, x_2, …` at indices `0, 1, …`. The convolution
//! is `(q * m)(n) = Σ_{s=1}^{n-1} q_s m_{n-s}`, so `(q * m)(1) = 0` and a
//! point mass at lag 1 acts as a unit shift.
//!
//! The resolvent `A = Σ_{k≥1} η^{*k}` of a sub-critical kernel is computed
//! from the renewal recursion `A_n = η_n + Σ_{s=1}^{n-1} η_s A_{n-s}`. Given
//! `A`, any renewal equation `x = y + η * x` is solved by `x = y + A * y`.

use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::Kernel;

/// First `n` terms of `q * m`.
pub fn convolve(q: &[f64], m: &[f64], n: usize) -> Result<Vec<f64>> {
    let need = n.saturating_sub(1);
    if q.len() < need || m.len() < need {
        return Err(Error::Range(format!(
            "convolution to length {n} needs {need} terms, got {} and {}",
            q.len(),
            m.len()
        )));
    }
    let mut out = vec![0.0; n];
    for (i, slot) in out.iter_mut().enumerate().skip(1) {
        *slot = dot_reversed(&q[..i], &m[..i]);
    }
    Ok(out)
}

/// `Σ_j a[j] b[len-1-j]`.
#[inline]
fn dot_reversed(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter().rev()).map(|(x, y)| x * y).sum()
}

/// The resolvent sequence `A_1, …, A_N` of a sub-critical kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalSequence {
    values: Vec<f64>,
    a_t: f64,
    partial_l1: Vec<f64>,
}

impl RenewalSequence {
    fn from_values(values: Vec<f64>, a_t: f64) -> Self {
        let partial_l1 = values
            .iter()
            .scan(0.0, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        Self {
            values,
            a_t,
            partial_l1,
        }
    }

    /// `A_1, …, A_N`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `A_n` for `n ≥ 1`; `A_0 = 0` by convention.
    pub fn get(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.values[n - 1]
        }
    }

    /// The offspring mass `a = ‖η^T‖₁` the sequence is normalized against.
    pub fn a_t(&self) -> f64 {
        self.a_t
    }

    /// `Σ_{s≤n} A_s` at index `n-1`.
    pub fn partial_l1(&self) -> &[f64] {
        &self.partial_l1
    }

    /// `Σ_{s≤n} A_s`, zero for `n = 0`.
    pub fn partial_sum(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.partial_l1[n - 1]
        }
    }

    /// Closed-form `‖A‖₁ = a/(1-a)`.
    pub fn l1_norm(&self) -> f64 {
        self.a_t / (1.0 - self.a_t)
    }

    /// Replaces the offspring mass used for normalization, e.g. by the
    /// untruncated `a_T` of a scaling family when `η^T` was truncated.
    pub fn with_offspring_mass(mut self, a_t: f64) -> Result<Self> {
        if !(a_t > 0.0 && a_t < 1.0) {
            return Err(Error::Stability(format!("offspring mass {a_t} outside (0, 1)")));
        }
        self.a_t = a_t;
        Ok(self)
    }

    /// Mass the truncated sequence is missing relative to `a/(1-a)`.
    pub fn truncation_error(&self) -> f64 {
        self.l1_norm() - self.partial_l1.last().copied().unwrap_or(0.0)
    }
}

fn offspring_mass(eta: &[f64]) -> Result<f64> {
    if let Some((i, x)) = eta.iter().enumerate().find(|(_, x)| !(**x >= 0.0 && x.is_finite())) {
        return Err(Error::Parameter(format!("eta[{}] = {x} is not a non-negative number", i + 1)));
    }
    let mass: f64 = eta.iter().sum();
    if mass >= 1.0 {
        return Err(Error::Stability(format!("kernel mass {mass} must be < 1")));
    }
    Ok(mass)
}

fn padded(eta: &[f64], n: usize) -> Vec<f64> {
    let mut e = eta[..eta.len().min(n)].to_vec();
    e.resize(n, 0.0);
    e
}

/// Resolvent by the direct `O(N²)` recursion. Kernels shorter than `n` are
/// zero-extended.
pub fn renewal_sequence(eta_t: &[f64], n: usize) -> Result<RenewalSequence> {
    let mass = offspring_mass(eta_t)?;
    let eta = padded(eta_t, n);
    let mut a = vec![0.0; n];
    for i in 0..n {
        // A_{i+1} = η_{i+1} + Σ_{s=1}^{i} η_s A_{i+1-s}
        a[i] = eta[i] + dot_reversed(&eta[..i], &a[..i]);
    }
    Ok(RenewalSequence::from_values(a, mass))
}

/// Blocks at or below this size are solved by the direct recursion.
const DC_LEAF: usize = 64;

/// Resolvent by divide and conquer: the left half of each block is solved
/// first and its contribution to the right half is added with one FFT
/// convolution, giving `O(N log² N)`.
pub fn renewal_sequence_fast(eta_t: &[f64], n: usize) -> Result<RenewalSequence> {
    let mass = offspring_mass(eta_t)?;
    let eta = padded(eta_t, n);
    let mut a = vec![0.0; n];
    // acc[i] collects Σ η_{i+1-m} A_m over already-solved blocks left of i.
    let mut acc = vec![0.0; n];
    let mut planner = FftPlanner::new();
    solve_block(&eta, &mut a, &mut acc, 0, n, &mut planner);
    Ok(RenewalSequence::from_values(a, mass))
}

fn solve_block(eta: &[f64], a: &mut [f64], acc: &mut [f64], lo: usize, hi: usize, planner: &mut FftPlanner<f64>) {
    if hi - lo <= DC_LEAF {
        for i in lo..hi {
            let within: f64 = (lo..i).map(|j| eta[i - j - 1] * a[j]).sum();
            a[i] = eta[i] + acc[i] + within;
        }
        return;
    }
    let mid = lo + (hi - lo) / 2;
    solve_block(eta, a, acc, lo, mid, planner);
    // For i in [mid, hi): add Σ_{j in [lo, mid)} η_{i-j} A_j, lag i-j in [1, hi-lo).
    let left = &a[lo..mid];
    let lags = &eta[..hi - lo - 1];
    let conv = fft_convolve(left, lags, planner);
    // conv[k] = Σ left[p] lags[k-p]; entry for i uses k = i - lo - 1.
    for i in mid..hi {
        acc[i] += conv[i - lo - 1];
    }
    solve_block(eta, a, acc, mid, hi, planner);
}

fn fft_convolve(x: &[f64], y: &[f64], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let len = (x.len() + y.len() - 1).next_power_of_two();
    let fwd: Arc<dyn Fft<f64>> = planner.plan_fft_forward(len);
    let inv: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(len);
    let mut fx: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fx.resize(len, Complex::new(0.0, 0.0));
    let mut fy: Vec<Complex<f64>> = y.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fy.resize(len, Complex::new(0.0, 0.0));
    fwd.process(&mut fx);
    fwd.process(&mut fy);
    for (u, v) in fx.iter_mut().zip(&fy) {
        *u *= v;
    }
    inv.process(&mut fx);
    let scale = 1.0 / len as f64;
    fx.iter().map(|c| c.re * scale).collect()
}

/// Solves `x_n = y_n + Σ_{s=1}^{n-1} η_s x_{n-s}` through the resolvent,
/// `x_n = y_n + Σ_{i=1}^{n-1} A_i y_{n-i}`.
pub fn solve_renewal(eta: &[f64], y: &[f64], n: usize) -> Result<Vec<f64>> {
    if y.len() < n {
        return Err(Error::Range(format!("forcing has {} terms, need {n}", y.len())));
    }
    let a = renewal_sequence(eta, n)?;
    Ok(solve_with(&a, &y[..n]))
}

/// `y + A * y` for an already computed resolvent.
pub fn solve_with(a: &RenewalSequence, y: &[f64]) -> Vec<f64> {
    let av = a.values();
    (0..y.len())
        .map(|i| y[i] + dot_reversed(&av[..i], &y[..i]))
        .collect()
}

/// Solves the same equation by forward substitution, without the resolvent.
pub fn solve_renewal_direct(eta: &[f64], y: &[f64], n: usize) -> Result<Vec<f64>> {
    offspring_mass(eta)?;
    if y.len() < n {
        return Err(Error::Range(format!("forcing has {} terms, need {n}", y.len())));
    }
    let eta = padded(eta, n);
    let mut x = vec![0.0; n];
    for i in 0..n {
        x[i] = y[i] + dot_reversed(&eta[..i], &x[..i]);
    }
    Ok(x)
}

/// The rescaled resolvent density `ρ^T` and the law of `J^T` on the grid
/// `x_i = i/T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteDensity {
    pub horizon_t: f64,
    pub grid: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl DiscreteDensity {
    /// `F^T(t)`: the step CDF, right-continuous at grid points.
    pub fn cdf_at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let i = ((t * self.horizon_t).floor() as usize).min(self.cdf.len() - 1);
        self.cdf[i]
    }

    /// `sup_{t∈[0, t_max]} |F^T(t) - g(t)|` for a continuous non-decreasing
    /// `g`. Each step is compared against `g` at both ends of its interval.
    pub fn sup_distance<G: Fn(f64) -> f64>(&self, g: G, t_max: f64) -> f64 {
        let last = ((t_max * self.horizon_t).floor() as usize).min(self.cdf.len() - 1);
        let mut worst: f64 = 0.0;
        for i in 0..=last {
            let left = self.grid[i];
            let right = if i < last {
                self.grid[i + 1]
            } else {
                t_max.max(left)
            };
            worst = worst
                .max((self.cdf[i] - g(left)).abs())
                .max((self.cdf[i] - g(right)).abs());
        }
        worst
    }

    /// Three whitespace-separated columns `x pdf cdf`.
    pub fn write_table<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x pdf cdf")?;
        for ((x, p), c) in self.grid.iter().zip(&self.pdf).zip(&self.cdf) {
            writeln!(w, "{x:e} {p:e} {c:e}")?;
        }
        Ok(())
    }
}

/// Builds `ρ^T(x_i) = T A_{⌊x_i T⌋} / ‖A‖₁` with `‖A‖₁ = a/(1-a)`, and the
/// exact law of `J^T`: `P(J^T ≤ x) = ((1-a)/a) Σ_{s≤⌊xT⌋} A_s`.
pub fn rho_density(a: &RenewalSequence, horizon_t: f64, t_max: f64) -> Result<DiscreteDensity> {
    if !(horizon_t > 0.0 && t_max >= 0.0) {
        return Err(Error::Parameter(format!("need T > 0 and horizon >= 0, got {horizon_t}, {t_max}")));
    }
    let last = (horizon_t * t_max).floor() as usize;
    if a.len() < last {
        return Err(Error::Range(format!(
            "density to x = {t_max} needs {last} resolvent terms, have {}",
            a.len()
        )));
    }
    let norm = a.l1_norm();
    let odds = (1.0 - a.a_t()) / a.a_t();
    let grid = (0..=last).map(|i| i as f64 / horizon_t).collect();
    let pdf = (0..=last).map(|i| horizon_t * a.get(i) / norm).collect();
    let cdf = (0..=last).map(|i| odds * a.partial_sum(i)).collect();
    Ok(DiscreteDensity {
        horizon_t,
        grid,
        pdf,
        cdf,
    })
}

/// One row of a Laplace-transform check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceRow {
    pub s: f64,
    pub gamma_hat: f64,
    /// `(1 - γ̂(s)) / s^α`
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceReport {
    pub alpha: f64,
    /// `δ = KΓ(1-α)/α` of the kernel.
    pub delta: f64,
    pub rows: Vec<LaplaceRow>,
    /// Relative change of the ratio between the two smallest `s`.
    pub drift: f64,
    /// Relative distance of the ratio at the smallest `s` from `δ`.
    pub rel_error_at_smallest: f64,
    pub stabilized: bool,
}

/// Evaluates `γ̂(s) = Σ η_n e^{-sn}` and `(1 - γ̂(s))/s^α`.
///
/// `1 - γ̂` is accumulated as `Σ η_n (1 - e^{-sn})` to avoid cancellation.
/// The unstored tail mass is counted as if it sat at lag `N+1`.
pub fn laplace_check(kernel: &Kernel, s_values: &[f64]) -> Result<LaplaceReport> {
    if s_values.is_empty() {
        return Err(Error::Parameter("need at least one s value".into()));
    }
    if let Some(s) = s_values.iter().find(|s| !(**s > 0.0 && **s <= 0.5)) {
        return Err(Error::Domain(format!("s = {s} outside (0, 0.5]")));
    }
    let alpha = kernel.alpha();
    let eta = kernel.eta();
    let n_trunc = eta.len() as f64;
    let rows: Vec<LaplaceRow> = s_values
        .iter()
        .map(|&s| {
            let one_minus: f64 = eta
                .iter()
                .enumerate()
                .rev()
                .map(|(i, &e)| -e * (-(s * (i + 1) as f64)).exp_m1())
                .sum::<f64>()
                + kernel.tail_mass() * -(-(s * (n_trunc + 1.0))).exp_m1();
            LaplaceRow {
                s,
                gamma_hat: 1.0 - one_minus,
                ratio: one_minus / s.powf(alpha),
            }
        })
        .collect();

    let mut by_s: Vec<&LaplaceRow> = rows.iter().collect();
    by_s.sort_by(|x, y| x.s.total_cmp(&y.s));
    let delta = kernel.delta();
    let smallest = by_s[0].ratio;
    let drift = if by_s.len() >= 2 {
        (smallest - by_s[1].ratio).abs() / smallest.abs()
    } else {
        f64::NAN
    };
    Ok(LaplaceReport {
        alpha,
        delta,
        rel_error_at_smallest: (smallest - delta).abs() / delta,
        stabilized: drift < 0.05,
        drift,
        rows,
    })
}
