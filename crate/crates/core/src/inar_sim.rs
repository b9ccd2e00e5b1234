//! INAR(∞) path simulation, rescaling and exact path identities.
//!
//! A path is driven by `λ_n = μ + Σ_{s=1}^{n-1} η_{n-s} X_s` with
//! `X_n | F_{n-1} ~ Poisson(λ_n)`. The draw at step `n` of the path with seed
//! `seed` comes from the stream `(seed, n)`, so paths are reproducible
//! regardless of how an ensemble is scheduled.

use std::io::Write;

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{scale_kernel, Kernel, ScalingFamily};
use crate::renewal::RenewalSequence;
use crate::rng::StreamKey;

/// Intensities above this are treated as a blow-up.
pub const MAX_INTENSITY: f64 = 1e12;

/// The discrete process: immigration rate and scaled offspring kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct InarModel {
    mu: f64,
    eta: Vec<f64>,
    cutoff: Option<usize>,
}

impl InarModel {
    /// `eta[j]` is the offspring mass at lag `j + 1`.
    pub fn new(mu: f64, eta: Vec<f64>) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::Parameter(format!("immigration rate must be positive, got {mu}")));
        }
        if let Some((i, x)) = eta.iter().enumerate().find(|(_, x)| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::Parameter(format!("eta[{}] = {x} is not a non-negative number", i + 1)));
        }
        let mass: f64 = eta.iter().sum();
        if mass >= 1.0 {
            return Err(Error::Stability(format!("offspring mass {mass} must be < 1")));
        }
        Ok(Self {
            mu,
            eta,
            cutoff: None,
        })
    }

    /// `μ = μ^T`, `η = a_T η_base`.
    pub fn from_family(family: &ScalingFamily, kernel: &Kernel) -> Result<Self> {
        Self::new(family.mu_t, scale_kernel(kernel, family.a_t)?)
    }

    /// Restricts the intensity sum to the most recent `lags` steps.
    ///
    /// Paths simulated this way no longer satisfy the exact identities; the
    /// neglected offspring mass is [`InarModel::truncation_bias`].
    pub fn with_history_cutoff(mut self, lags: usize) -> Self {
        self.cutoff = Some(lags);
        self
    }

    /// `Σ_{k>cutoff} η_k`, zero without a cutoff.
    pub fn truncation_bias(&self) -> f64 {
        match self.cutoff {
            Some(c) if c < self.eta.len() => self.eta[c..].iter().rev().sum(),
            _ => 0.0,
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Simulates `t_steps` steps. Lags beyond `eta.len()` carry no mass.
    pub fn simulate(&self, t_steps: usize, seed: u64) -> Result<PathRecord> {
        let mut x = Vec::with_capacity(t_steps);
        let mut lambda = Vec::with_capacity(t_steps);
        // history[t_steps - s] = X_s, so X_{n-1}, X_{n-2}, … is contiguous.
        let mut history = vec![0.0f64; t_steps];
        for n in 1..=t_steps {
            let lags = match self.cutoff {
                Some(c) => (n - 1).min(c),
                None => n - 1,
            }
            .min(self.eta.len());
            let recent = &history[t_steps + 1 - n..t_steps + 1 - n + lags];
            let lam = self.mu + dot(&self.eta[..lags], recent);
            if !(lam <= MAX_INTENSITY) {
                return Err(Error::Stability(format!("intensity {lam:e} at step {n} exceeds {MAX_INTENSITY:e}")));
            }
            let count = draw_poisson(lam, StreamKey::new(seed, n as u64))?;
            x.push(count);
            lambda.push(lam);
            history[t_steps - n] = count as f64;
        }
        Ok(PathRecord::assemble(x, lambda, self.mu, seed))
    }
}

fn draw_poisson(lam: f64, key: StreamKey) -> Result<u64> {
    let dist = Poisson::new(lam).map_err(|e| Error::Stability(format!("Poisson({lam}): {e}")))?;
    Ok(dist.sample(&mut key.rng()) as u64)
}

/// Dot product with four independent accumulators; fixed summation order.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// One simulated trajectory (all series indexed from step 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub x: Vec<u64>,
    pub lambda: Vec<f64>,
    /// `N_n = Σ_{s≤n} X_s`
    pub counts: Vec<u64>,
    /// `M_n = N_n - Σ_{s≤n} λ_s`
    pub martingale: Vec<f64>,
    pub mu: f64,
    pub seed: u64,
}

impl PathRecord {
    /// Builds the cumulative series from counts and intensities.
    pub fn assemble(x: Vec<u64>, lambda: Vec<f64>, mu: f64, seed: u64) -> Self {
        let mut counts = Vec::with_capacity(x.len());
        let mut martingale = Vec::with_capacity(x.len());
        let mut n = 0u64;
        let mut comp = 0.0;
        for (&xi, &li) in x.iter().zip(&lambda) {
            n += xi;
            comp += li;
            counts.push(n);
            martingale.push(n as f64 - comp);
        }
        Self {
            x,
            lambda,
            counts,
            martingale,
            mu,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `M_n - M_{n-1} = X_n - λ_n`, indexed from step 1.
    pub fn martingale_increments(&self) -> Vec<f64> {
        self.x.iter().zip(&self.lambda).map(|(&x, &l)| x as f64 - l).collect()
    }

    /// Columns `n X lambda N M`.
    pub fn write_table<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,X,lambda,N,M")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{:e},{},{:e}",
                i + 1,
                self.x[i],
                self.lambda[i],
                self.counts[i],
                self.martingale[i]
            )?;
        }
        Ok(())
    }
}

/// Simulates one path of the near-critical family built on `kernel`.
///
/// `t_steps` may not exceed the kernel's truncation: lags past it would
/// silently drop the unstored tail mass.
pub fn simulate_inar(family: &ScalingFamily, kernel: &Kernel, t_steps: usize, seed: u64) -> Result<PathRecord> {
    if t_steps > kernel.n_trunc() {
        return Err(Error::Range(format!(
            "{t_steps} steps exceed the kernel truncation {}",
            kernel.n_trunc()
        )));
    }
    InarModel::from_family(family, kernel)?.simulate(t_steps, seed)
}

/// Rescaled processes on the grid `t_i = i/T`, `i = 0..=t_steps`.
///
/// Paths are right-continuous steps: the value at `t` uses `⌊tT⌋`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledPath {
    pub horizon: f64,
    pub grid: Vec<f64>,
    /// `Y_t = s_T N_{⌊tT⌋}` with `s_T = (1-a_T)/(T^α ν* δ^{-1})`
    pub y: Vec<f64>,
    /// `Λ_t = s_T Σ_{s≤⌊tT⌋} λ_s`
    pub lambda_cum: Vec<f64>,
    /// `Z_t = s_T^{-1/2} (Y_t - Λ_t)`
    pub z: Vec<f64>,
    /// `C_t = ((1-a_T)/μ^T) λ_{⌊tT⌋}`, with `λ_0 := μ^T`.
    pub c: Vec<f64>,
}

impl RescaledPath {
    /// Index of the grid point holding the value at time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        ((t * self.horizon).floor().max(0.0) as usize).min(self.grid.len() - 1)
    }

    /// `[Z]_t = Σ_{s≤⌊tT⌋} (Z_{s/T} - Z_{(s-1)/T})²` at every grid point.
    pub fn sharp_bracket(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.z.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.z.windows(2) {
            let d = w[1] - w[0];
            acc += d * d;
            out.push(acc);
        }
        out
    }

    /// `[Z]_t - Y_t` at time `t`.
    pub fn bracket_gap(&self, t: f64) -> f64 {
        let i = self.index_at(t);
        let sq: f64 = self.z[..=i].windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
        sq - self.y[i]
    }
}

/// Applies the space normalizations of `family` to a simulated path.
pub fn rescale(path: &PathRecord, family: &ScalingFamily) -> RescaledPath {
    let scale = family.space_scale();
    let z_scale = 1.0 / scale.sqrt();
    let c_scale = family.one_minus_a() / family.mu_t;
    let len = path.len() + 1;
    let mut grid = Vec::with_capacity(len);
    let mut y = Vec::with_capacity(len);
    let mut lambda_cum = Vec::with_capacity(len);
    let mut z = Vec::with_capacity(len);
    let mut c = Vec::with_capacity(len);
    grid.push(0.0);
    y.push(0.0);
    lambda_cum.push(0.0);
    z.push(0.0);
    c.push(c_scale * family.mu_t);
    let mut comp = 0.0;
    for i in 0..path.len() {
        comp += path.lambda[i];
        let yi = scale * path.counts[i] as f64;
        let li = scale * comp;
        grid.push((i + 1) as f64 / family.horizon);
        y.push(yi);
        lambda_cum.push(li);
        z.push(z_scale * (yi - li));
        c.push(c_scale * path.lambda[i]);
    }
    RescaledPath {
        horizon: family.horizon,
        grid,
        y,
        lambda_cum,
        z,
        c,
    }
}

/// `E[N_n] = μ n + μ Σ_{s=1}^{n-1} s A_{n-s}` for `n = 1..=len`.
pub fn expected_counts(mu: f64, a: &RenewalSequence, len: usize) -> Result<Vec<f64>> {
    if a.len() + 1 < len {
        return Err(Error::Range(format!("need {} resolvent terms, have {}", len - 1, a.len())));
    }
    // G_n = Σ_{j<n} (n-j) A_j satisfies G_{n+1} = G_n + Σ_{j≤n} A_j.
    let mut out = Vec::with_capacity(len);
    let mut g = 0.0;
    for n in 1..=len {
        out.push(mu * n as f64 + mu * g);
        g += a.partial_sum(n.min(a.len()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCheck {
    pub n: usize,
    pub closed_form: f64,
    pub mc_mean: f64,
    pub stderr: f64,
    pub z_score: f64,
}

/// Monte Carlo mean of `N_n` over `ensemble` paths (seeds
/// `seed_base + i`) against the closed form.
pub fn mean_formula_check(model: &InarModel, n: usize, ensemble: usize, seed_base: u64) -> Result<MeanCheck> {
    if ensemble < 2 || n == 0 {
        return Err(Error::Parameter("need n >= 1 and at least two paths".into()));
    }
    let a = crate::renewal::renewal_sequence(&model.eta[..model.eta.len().min(n)], n)?;
    let closed_form = expected_counts(model.mu, &a, n)?[n - 1];
    let finals: Vec<f64> = (0..ensemble)
        .into_par_iter()
        .map(|i| {
            model
                .simulate(n, seed_base.wrapping_add(i as u64))
                .map(|p| p.counts[n - 1] as f64)
        })
        .collect::<Result<_>>()?;
    let (mc_mean, stderr) = mean_and_stderr(&finals);
    Ok(MeanCheck {
        n,
        closed_form,
        mc_mean,
        stderr,
        z_score: (mc_mean - closed_form) / stderr,
    })
}

pub(crate) fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Worst discrepancy of an exact identity along a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    pub max_abs_error: f64,
    /// Error divided by `max(1, |reference|)` at each step.
    pub max_rel_error: f64,
    pub steps: usize,
}

impl IdentityReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

fn check_lengths(path: &PathRecord, a: &RenewalSequence) -> Result<()> {
    if a.len() + 1 < path.len() {
        return Err(Error::Range(format!(
            "path of {} steps needs {} resolvent terms, have {}",
            path.len(),
            path.len() - 1,
            a.len()
        )));
    }
    Ok(())
}

/// Compares `λ_n` with `μ + μ Σ_{s<n} A_{n-s} + Σ_{s<n} A_{n-s}(M_s - M_{s-1})`.
pub fn lemma3_identity_check(path: &PathRecord, a: &RenewalSequence) -> Result<IdentityReport> {
    check_lengths(path, a)?;
    let dm = path.martingale_increments();
    let av = a.values();
    let mut report = IdentityReport {
        max_abs_error: 0.0,
        max_rel_error: 0.0,
        steps: path.len(),
    };
    for n in 1..=path.len() {
        let k = n - 1;
        let conv: f64 = av[..k].iter().zip(dm[..k].iter().rev()).map(|(x, y)| x * y).sum();
        let rhs = path.mu + path.mu * a.partial_sum(k) + conv;
        let lam = path.lambda[n - 1];
        let err = (rhs - lam).abs();
        report.max_abs_error = report.max_abs_error.max(err);
        report.max_rel_error = report.max_rel_error.max(err / lam.abs().max(1.0));
    }
    Ok(report)
}

/// Compares `N_n - E[N_n]` with `M_n + Σ_{s<n} A_{n-s} M_s`.
pub fn lemma2_decomposition_check(path: &PathRecord, a: &RenewalSequence) -> Result<IdentityReport> {
    check_lengths(path, a)?;
    let mean = expected_counts(path.mu, a, path.len())?;
    let av = a.values();
    let m = &path.martingale;
    let mut report = IdentityReport {
        max_abs_error: 0.0,
        max_rel_error: 0.0,
        steps: path.len(),
    };
    for n in 1..=path.len() {
        let k = n - 1;
        let conv: f64 = av[..k].iter().zip(m[..k].iter().rev()).map(|(x, y)| x * y).sum();
        let lhs = path.counts[n - 1] as f64 - mean[n - 1];
        let rhs = m[n - 1] + conv;
        let err = (lhs - rhs).abs();
        let magnitude = (path.counts[n - 1] as f64).max(mean[n - 1]).max(1.0);
        report.max_abs_error = report.max_abs_error.max(err);
        report.max_rel_error = report.max_rel_error.max(err / magnitude);
    }
    Ok(report)
}

/// What an ensemble run simulates.
#[derive(Debug, Clone)]
pub struct EnsembleSpec<'a> {
    pub family: ScalingFamily,
    pub kernel: &'a Kernel,
    pub n_paths: usize,
    pub seed_base: u64,
    /// Times in `[0, 1]` at which marginals are recorded.
    pub times: Vec<f64>,
    pub workers: usize,
}

/// Upper bound on `n_paths · t_steps` for a single ensemble.
pub const MAX_ENSEMBLE_STEPS: u64 = 50_000_000_000;

/// Marginals of one path at the requested times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary {
    pub seed: u64,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub c: Vec<f64>,
    /// `[Z]_t - Y_t`
    pub bracket_gap: Vec<f64>,
}

impl PathSummary {
    pub fn from_rescaled(path: &RescaledPath, times: &[f64], seed: u64) -> Self {
        let idx: Vec<usize> = times.iter().map(|&t| path.index_at(t)).collect();
        let bracket = path.sharp_bracket();
        Self {
            seed,
            y: idx.iter().map(|&i| path.y[i]).collect(),
            z: idx.iter().map(|&i| path.z[i]).collect(),
            c: idx.iter().map(|&i| path.c[i]).collect(),
            bracket_gap: idx.iter().map(|&i| bracket[i] - path.y[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub family: ScalingFamily,
    pub t_steps: usize,
    pub seed_base: u64,
    pub times: Vec<f64>,
    pub paths: Vec<PathSummary>,
}

impl EnsembleSummary {
    /// Sample of `Y` at `times[k]` across paths, in path order.
    pub fn y_sample(&self, k: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p.y[k]).collect()
    }

    pub fn z_sample(&self, k: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p.z[k]).collect()
    }

    pub fn c_sample(&self, k: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p.c[k]).collect()
    }

    pub fn bracket_gap_sample(&self, k: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p.bracket_gap[k]).collect()
    }
}

/// Builds a thread pool with exactly `workers` threads.
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Capacity(format!("cannot start {workers} workers: {e}")))
}

/// Simulates and rescales `n_paths` paths with seeds `seed_base + i`.
///
/// Output order follows path index, so results do not depend on `workers`.
pub fn run_ensemble(spec: &EnsembleSpec<'_>) -> Result<EnsembleSummary> {
    let t_steps = spec.family.steps();
    let total = spec.n_paths as u64 * t_steps as u64;
    if total > MAX_ENSEMBLE_STEPS {
        return Err(Error::Capacity(format!(
            "{} paths x {t_steps} steps exceeds the limit of {MAX_ENSEMBLE_STEPS} steps",
            spec.n_paths
        )));
    }
    if let Some(t) = spec.times.iter().find(|t| !(**t >= 0.0 && **t <= 1.0)) {
        return Err(Error::Parameter(format!("marginal time {t} outside [0, 1]")));
    }
    if t_steps > spec.kernel.n_trunc() {
        return Err(Error::Range(format!(
            "{t_steps} steps exceed the kernel truncation {}",
            spec.kernel.n_trunc()
        )));
    }
    let model = InarModel::from_family(&spec.family, spec.kernel)?;
    let pool = worker_pool(spec.workers)?;
    let paths = pool.install(|| {
        (0..spec.n_paths)
            .into_par_iter()
            .map(|i| {
                let seed = spec.seed_base.wrapping_add(i as u64);
                let path = model.simulate(t_steps, seed)?;
                let r = rescale(&path, &spec.family);
                Ok(PathSummary::from_rescaled(&r, &spec.times, seed))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(EnsembleSummary {
        family: spec.family,
        t_steps,
        seed_base: spec.seed_base,
        times: spec.times.clone(),
        paths,
    })
}
