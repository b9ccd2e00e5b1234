//! Volterra Euler scheme for the rough fractional CIR limit.
//!
//! On the grid `t_k = k/n`, `k = 0..=n`,
//!
//! ```text
//! Ẏ(t_k) = F(t_k) + (ν*λ)^{-1/2} Σ_{j<k} (w_{k-j}/dt) √max(Ẏ(t_j), 0) ΔB_j
//! ```
//!
//! with `w_m = F(m/n) - F((m-1)/n)`, the exact mass of `f^{α,λ}` over one cell.
//! `w_m/dt` is the cell average of `f`, which keeps the `x^{α-1}` singularity
//! integrable at lag one.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inar_sim::{dot, worker_pool};
use crate::mlf::{ml, F_alpha_lambda};
use crate::rng::{StreamKey, BROWNIAN_STREAM};

pub const MIN_GRID: usize = 100;

fn check_params(alpha: f64, lam: f64, nu_star: f64, n_grid: usize) -> Result<()> {
    let mut problems = Vec::new();
    if !(alpha > 0.5 && alpha <= 1.0) {
        problems.push(format!("alpha must lie in (0.5, 1], got {alpha}"));
    }
    if !(lam > 0.0 && lam.is_finite()) {
        problems.push(format!("lambda must be positive, got {lam}"));
    }
    if !(nu_star > 0.0) {
        problems.push(format!("nu_star must be positive, got {nu_star}"));
    }
    if n_grid < MIN_GRID {
        problems.push(format!("n_grid must be at least {MIN_GRID}, got {n_grid}"));
    }
    match problems.len() {
        0 => Ok(()),
        _ => Err(Error::Parameter(problems.join("; "))),
    }
}

/// `w_m = F(m dt) - F((m-1) dt)` for `m = 1..=n_grid`, `dt = 1/n_grid`.
pub fn kernel_weights(alpha: f64, lam: f64, n_grid: usize) -> Result<Vec<f64>> {
    check_params(alpha, lam, 1.0, n_grid)?;
    let f = cdf_grid(alpha, lam, n_grid)?;
    Ok(f.windows(2).map(|w| w[1] - w[0]).collect())
}

fn cdf_grid(alpha: f64, lam: f64, n_grid: usize) -> Result<Vec<f64>> {
    let dt = 1.0 / n_grid as f64;
    let mut out = Vec::with_capacity(n_grid + 1);
    out.push(0.0);
    for m in 1..=n_grid {
        out.push(F_alpha_lambda(alpha, lam, m as f64 * dt)?);
    }
    Ok(out)
}

/// `∫_0^t F^{α,λ}(u) du = λ t^{α+1} E_{α,α+2}(-λ t^α)`.
pub fn integrated_cdf(alpha: f64, lam: f64, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain(format!("t must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let y = lam * t.powf(alpha);
    Ok(y * t * ml(alpha, alpha + 2.0, -y)?)
}

/// Precomputed grid quantities shared by every path of an ensemble.
#[derive(Debug, Clone)]
pub struct LimitScheme {
    pub alpha: f64,
    pub lam: f64,
    pub nu_star: f64,
    pub n_grid: usize,
    /// `F(t_k)`, `k = 0..=n_grid`
    cdf: Vec<f64>,
    /// `[w_n, w_{n-1}, …, w_1]`
    weights_rev: Vec<f64>,
    /// `(ν*λ)^{-1/2} / dt`
    noise_scale: f64,
}

impl LimitScheme {
    /// `nu_star = ∞` switches the noise off.
    pub fn new(alpha: f64, lam: f64, nu_star: f64, n_grid: usize) -> Result<Self> {
        check_params(alpha, lam, nu_star, n_grid)?;
        let cdf = cdf_grid(alpha, lam, n_grid)?;
        let weights_rev = cdf.windows(2).rev().map(|w| w[1] - w[0]).collect();
        Ok(Self {
            alpha,
            lam,
            nu_star,
            n_grid,
            cdf,
            weights_rev,
            noise_scale: n_grid as f64 / (nu_star * lam).sqrt(),
        })
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n_grid as f64
    }

    /// `F^{α,λ}` on the grid.
    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// `w_m` at `weights()[m - 1]`.
    pub fn weights(&self) -> Vec<f64> {
        self.weights_rev.iter().rev().copied().collect()
    }

    /// The `n_grid` Brownian increments used by `simulate(seed)`.
    pub fn brownian_increments(&self, seed: u64) -> Vec<f64> {
        let mut rng = StreamKey::new(seed, BROWNIAN_STREAM).rng();
        let sd = self.dt().sqrt();
        (0..self.n_grid).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
    }

    pub fn simulate(&self, seed: u64) -> LimitPath {
        let db = self.brownian_increments(seed);
        let mut path = self.simulate_with_increments(&db);
        path.noise_seed = seed;
        path
    }

    /// Runs the scheme on given increments (`db.len() == n_grid`).
    pub fn simulate_with_increments(&self, db: &[f64]) -> LimitPath {
        assert_eq!(db.len(), self.n_grid, "one increment per grid cell");
        let n = self.n_grid;
        let dt = self.dt();
        let mut proposal = Vec::with_capacity(n + 1);
        let mut ydot = Vec::with_capacity(n + 1);
        let mut y = Vec::with_capacity(n + 1);
        // g_j = √Ẏ(t_j) ΔB_j
        let mut g = Vec::with_capacity(n);
        let mut truncated = 0usize;
        let mut cum = 0.0;
        for k in 0..=n {
            let noise = if self.noise_scale == 0.0 {
                0.0
            } else {
                self.noise_scale * dot(&self.weights_rev[n - k..], &g)
            };
            let p = self.cdf[k] + noise;
            if p < 0.0 {
                truncated += 1;
            }
            let v = p.max(0.0);
            proposal.push(p);
            ydot.push(v);
            y.push(cum);
            if k < n {
                cum += v * dt;
                g.push(v.sqrt() * db[k]);
            }
        }
        LimitPath {
            dt,
            ydot,
            y,
            proposal,
            noise_seed: 0,
            truncation_fraction: truncated as f64 / (n + 1) as f64,
        }
    }

    /// Compares the integrated Euler path with the integral form
    /// `Y_t = ∫_0^t F(u)du + (ν*λ)^{-1/2} ∫_0^t f(t-s) Z_s ds`, where
    /// `Z_s = Σ_{t_j<s} √Ẏ(t_j) ΔB_j` stands in for the time-changed Brownian
    /// motion `B_{Y_s}`.
    ///
    /// Both sides are discretized on the same grid, so the deviation is a
    /// consistency diagnostic of order `dt^α`, not an exact identity.
    pub fn consistency_check(&self, path: &LimitPath, db: &[f64]) -> Result<ConsistencyReport> {
        if path.ydot.len() != self.n_grid + 1 || db.len() != self.n_grid {
            return Err(Error::Range("path and increments must match the scheme grid".into()));
        }
        let n = self.n_grid;
        let dt = self.dt();
        let mut z = Vec::with_capacity(n);
        let mut acc = 0.0;
        for j in 0..n {
            z.push(acc);
            acc += path.ydot[j].sqrt() * db[j];
        }
        let mut max_dev = 0.0f64;
        let mut terminal = 0.0;
        for k in 0..=n {
            let t = k as f64 * dt;
            let det = integrated_cdf(self.alpha, self.lam, t)?;
            let sto = if self.noise_scale == 0.0 {
                0.0
            } else {
                self.noise_scale * dt * dot(&self.weights_rev[n - k..], &z[..k])
            };
            let dev = (path.y[k] - det - sto).abs();
            max_dev = max_dev.max(dev);
            terminal = dev;
        }
        Ok(ConsistencyReport {
            dt,
            max_abs_deviation: max_dev,
            terminal_deviation: terminal,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub dt: f64,
    pub max_abs_deviation: f64,
    pub terminal_deviation: f64,
}

/// One path of the limit scheme on `t_k = k dt`, `k = 0..=n_grid`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitPath {
    pub dt: f64,
    /// `max(proposal, 0)`
    pub ydot: Vec<f64>,
    /// Left-rectangle integral of `ydot`.
    pub y: Vec<f64>,
    /// Untruncated scheme values; their mean is exactly `F` on the grid.
    pub proposal: Vec<f64>,
    pub noise_seed: u64,
    /// Share of grid points whose proposal was negative.
    pub truncation_fraction: f64,
}

impl LimitPath {
    pub fn index_at(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.ydot.len() - 1)
    }

    /// Columns `t ydot y`.
    pub fn write_table<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,ydot,y")?;
        for k in 0..self.ydot.len() {
            writeln!(w, "{:e},{:e},{:e}", k as f64 * self.dt, self.ydot[k], self.y[k])?;
        }
        Ok(())
    }
}

/// Simulates one limit path with Brownian noise from `seed`.
pub fn simulate_limit(alpha: f64, lam: f64, nu_star: f64, n_grid: usize, seed: u64) -> Result<LimitPath> {
    Ok(LimitScheme::new(alpha, lam, nu_star, n_grid)?.simulate(seed))
}

/// Runs [`LimitScheme::consistency_check`] with the increments regenerated
/// from the path's seed.
pub fn theorem1_consistency_check(
    alpha: f64,
    lam: f64,
    nu_star: f64,
    path: &LimitPath,
) -> Result<ConsistencyReport> {
    let n_grid = path.ydot.len() - 1;
    let scheme = LimitScheme::new(alpha, lam, nu_star, n_grid)?;
    let db = scheme.brownian_increments(path.noise_seed);
    scheme.consistency_check(path, &db)
}

/// Marginals of an ensemble of limit paths at fixed times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitEnsemble {
    pub times: Vec<f64>,
    pub seeds: Vec<u64>,
    /// `ydot[k][i]`: time `k`, path `i`.
    pub ydot: Vec<Vec<f64>>,
    pub proposal: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub mean_truncation_fraction: f64,
}

/// Simulates `n_paths` limit paths with seeds `seed_base + i`.
pub fn limit_ensemble(
    scheme: &LimitScheme,
    n_paths: usize,
    seed_base: u64,
    times: &[f64],
    workers: usize,
) -> Result<LimitEnsemble> {
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && **t <= 1.0)) {
        return Err(Error::Parameter(format!("marginal time {t} outside [0, 1]")));
    }
    let pool = worker_pool(workers)?;
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, f64)> = pool.install(|| {
        (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let p = scheme.simulate(seed_base.wrapping_add(i as u64));
                let idx: Vec<usize> = times.iter().map(|&t| p.index_at(t)).collect();
                (
                    idx.iter().map(|&k| p.ydot[k]).collect(),
                    idx.iter().map(|&k| p.proposal[k]).collect(),
                    idx.iter().map(|&k| p.y[k]).collect(),
                    p.truncation_fraction,
                )
            })
            .collect()
    });
    let transpose = |pick: fn(&(Vec<f64>, Vec<f64>, Vec<f64>, f64)) -> &Vec<f64>| -> Vec<Vec<f64>> {
        (0..times.len()).map(|k| rows.iter().map(|r| pick(r)[k]).collect()).collect()
    };
    let mean_truncation_fraction = rows.iter().map(|r| r.3).sum::<f64>() / n_paths.max(1) as f64;
    Ok(LimitEnsemble {
        times: times.to_vec(),
        seeds: (0..n_paths).map(|i| seed_base.wrapping_add(i as u64)).collect(),
        ydot: transpose(|r| &r.0),
        proposal: transpose(|r| &r.1),
        y: transpose(|r| &r.2),
        mean_truncation_fraction,
    })
}
