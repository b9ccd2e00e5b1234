//! Heavy-tailed offspring kernels and the horizon-indexed scaling family.
//!
//! A [`Kernel`] stores the base offspring sequence `η_1, …, η_N` together with
//! an analytic estimate of the mass beyond the truncation point, so that the
//! stored sequence plus `tail_mass` sums to one. The near-critical kernels
//! actually simulated are `η^T = a_T η` with `a_T ↑ 1` as the horizon grows;
//! [`ScalingFamily`] carries `a_T` and the matching immigration rate `μ^T`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Smallest truncation accepted by [`Kernel::power_law`].
pub const MIN_TRUNCATION: usize = 16;

const NORMALIZATION_TOL: f64 = 1e-12;

/// Base offspring kernel, indexed from lag 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    alpha: f64,
    tail_constant: f64,
    eta: Vec<f64>,
    tail_mass: f64,
}

impl Kernel {
    /// The canonical family `η_n = c n^{-(1+α)}`, normalized to unit mass.
    ///
    /// The mass beyond `n_trunc` is not stored; it is estimated by the
    /// Euler–Maclaurin tail
    /// `∫_N^∞ x^{-1-α} dx - N^{-1-α}/2 + (1+α) N^{-2-α}/12`,
    /// whose error is of order `N^{-4-α}`. The tail constant `K` of the family
    /// equals `c`.
    pub fn power_law(alpha: f64, n_trunc: usize) -> Result<Self> {
        check_tail_index(alpha)?;
        if n_trunc < MIN_TRUNCATION {
            return Err(Error::Parameter(format!(
                "n_trunc must be at least {MIN_TRUNCATION}, got {n_trunc}"
            )));
        }
        let raw: Vec<f64> = (1..=n_trunc).map(|n| (n as f64).powf(-1.0 - alpha)).collect();
        // Smallest terms first.
        let head: f64 = raw.iter().rev().sum();
        let tail = power_law_tail(alpha, n_trunc);
        let c = 1.0 / (head + tail);
        Ok(Self {
            alpha,
            tail_constant: c,
            eta: raw.into_iter().map(|x| c * x).collect(),
            tail_mass: c * tail,
        })
    }

    /// Validates a caller-supplied sequence.
    ///
    /// `alpha` and `tail_constant` are recorded as given; only the basic
    /// invariants (non-negative entries, unit total mass) are checked.
    pub fn from_raw(alpha: f64, tail_constant: f64, eta: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Parameter(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if !(tail_constant >= 0.0 && tail_constant.is_finite()) {
            return Err(Error::Parameter(format!(
                "tail constant must be finite and non-negative, got {tail_constant}"
            )));
        }
        if eta.is_empty() {
            return Err(Error::Parameter("kernel must have at least one lag".into()));
        }
        if let Some((i, x)) = eta.iter().enumerate().find(|(_, x)| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::Parameter(format!("eta[{}] = {x} is not a non-negative number", i + 1)));
        }
        if !(tail_mass >= 0.0 && tail_mass.is_finite()) {
            return Err(Error::Parameter(format!("tail mass must be non-negative, got {tail_mass}")));
        }
        let total = eta.iter().rev().sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Parameter(format!(
                "kernel mass must be 1 within {NORMALIZATION_TOL:e}, got {total}"
            )));
        }
        Ok(Self {
            alpha,
            tail_constant,
            eta,
            tail_mass,
        })
    }

    /// Point mass at `lag`, zero-padded to `n_trunc` lags.
    pub fn single_lag(lag: usize, n_trunc: usize) -> Result<Self> {
        if lag == 0 || lag > n_trunc {
            return Err(Error::Parameter(format!("lag {lag} outside 1..={n_trunc}")));
        }
        let mut eta = vec![0.0; n_trunc];
        eta[lag - 1] = 1.0;
        Self::from_raw(1.0, 0.0, eta, 0.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The constant `K` in `α n^α Σ_{k>n} η_k → K`.
    pub fn tail_constant(&self) -> f64 {
        self.tail_constant
    }

    /// `η_1, …, η_N` (index 0 holds lag 1).
    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Number of stored lags.
    pub fn n_trunc(&self) -> usize {
        self.eta.len()
    }

    /// `δ = K Γ(1-α) / α`.
    pub fn delta(&self) -> f64 {
        tail_delta(self.alpha, self.tail_constant)
    }

    /// `α n^α (Σ_{k>n} η_k + tail_mass)`.
    pub fn tail_constant_estimate(&self, n: usize) -> Result<f64> {
        if n == 0 || n >= self.n_trunc() {
            return Err(Error::Range(format!(
                "tail estimate needs 1 <= n < n_trunc = {}, got {n}",
                self.n_trunc()
            )));
        }
        let beyond: f64 = self.eta[n..].iter().rev().sum::<f64>() + self.tail_mass;
        Ok(self.alpha * (n as f64).powf(self.alpha) * beyond)
    }

    /// Writes the kernel as a `# alpha K tail_mass` header followed by
    /// `lag mass` rows.
    pub fn write_table<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# alpha={:e} K={:e} tail_mass={:e}",
            self.alpha, self.tail_constant, self.tail_mass
        )?;
        for (i, x) in self.eta.iter().enumerate() {
            writeln!(w, "{} {:e}", i + 1, x)?;
        }
        Ok(())
    }

    /// Parses the format produced by [`Kernel::write_table`]. Lags must be
    /// consecutive starting from 1.
    pub fn read_table<R: BufRead>(r: R) -> Result<Self> {
        let mut header: Option<(f64, f64, f64)> = None;
        let mut eta = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                header = Some(parse_header(rest, lineno)?);
                continue;
            }
            let mut cols = line.split_whitespace();
            let (Some(lag), Some(mass), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Parse { line: lineno, msg: "expected two columns".into() });
            };
            let lag: usize = lag
                .parse()
                .map_err(|_| Error::Parse { line: lineno, msg: format!("bad lag {lag:?}") })?;
            if lag != eta.len() + 1 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected lag {}, found {lag}", eta.len() + 1),
                });
            }
            let mass: f64 = mass
                .parse()
                .map_err(|_| Error::Parse { line: lineno, msg: format!("bad mass {mass:?}") })?;
            eta.push(mass);
        }
        let (alpha, k, tail) =
            header.ok_or_else(|| Error::Parse { line: 0, msg: "missing header line".into() })?;
        Self::from_raw(alpha, k, eta, tail)
    }
}

fn parse_header(text: &str, line: usize) -> Result<(f64, f64, f64)> {
    let mut alpha = None;
    let mut k = None;
    let mut tail = None;
    for field in text.split_whitespace() {
        let Some((key, value)) = field.split_once('=') else {
            return Err(Error::Parse { line, msg: format!("bad header field {field:?}") });
        };
        let value: f64 = value
            .parse()
            .map_err(|_| Error::Parse { line, msg: format!("bad number in {field:?}") })?;
        match key {
            "alpha" => alpha = Some(value),
            "K" => k = Some(value),
            "tail_mass" => tail = Some(value),
            other => return Err(Error::Parse { line, msg: format!("unknown header key {other:?}") }),
        }
    }
    match (alpha, k, tail) {
        (Some(a), Some(k), Some(t)) => Ok((a, k, t)),
        _ => Err(Error::Parse { line, msg: "header needs alpha, K and tail_mass".into() }),
    }
}

fn check_tail_index(alpha: f64) -> Result<()> {
    if alpha > 0.5 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("alpha must lie in (0.5, 1), got {alpha}")))
    }
}

/// `Σ_{n>N} n^{-1-α}` by Euler–Maclaurin.
fn power_law_tail(alpha: f64, n: usize) -> f64 {
    let n = n as f64;
    n.powf(-alpha) / alpha - 0.5 * n.powf(-1.0 - alpha) + (1.0 + alpha) / 12.0 * n.powf(-2.0 - alpha)
}

fn tail_delta(alpha: f64, k: f64) -> f64 {
    k * gamma(1.0 - alpha) / alpha
}

/// Multiplies the base kernel by the criticality parameter: `η^T_n = a_T η_n`.
pub fn scale_kernel(kernel: &Kernel, a_t: f64) -> Result<Vec<f64>> {
    if !(a_t > 0.0 && a_t < 1.0) {
        return Err(Error::Parameter(format!("a_T must lie in (0, 1), got {a_t}")));
    }
    Ok(kernel.eta.iter().map(|x| a_t * x).collect())
}

/// The near-unstable parametrization at horizon `T`.
///
/// With `δ = KΓ(1-α)/α` the family is
/// `a_T = 1 - λ δ T^{-α}` and `μ^T = ν* δ^{-1} T^{α-1}`,
/// which makes both normalizing limits exact at every `T` rather than only
/// asymptotically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFamily {
    pub horizon: f64,
    pub lambda_rate: f64,
    pub nu_star: f64,
    pub alpha: f64,
    pub delta: f64,
    pub a_t: f64,
    pub mu_t: f64,
    pub v_t: f64,
}

impl ScalingFamily {
    pub fn new(alpha: f64, delta: f64, horizon: f64, lambda_rate: f64, nu_star: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Parameter(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        for (name, v) in [("delta", delta), ("lambda_rate", lambda_rate), ("nu_star", nu_star)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(horizon >= 1.0 && horizon.is_finite()) {
            return Err(Error::Parameter(format!("horizon T must be >= 1, got {horizon}")));
        }
        let gap = lambda_rate * delta * horizon.powf(-alpha);
        let a_t = 1.0 - gap;
        if !(a_t > 0.0 && a_t < 1.0) {
            let t_min = (lambda_rate * delta).powf(1.0 / alpha).max(1.0);
            return Err(Error::Parameter(format!(
                "a_T = {a_t} is outside (0, 1); T must exceed {t_min}"
            )));
        }
        let mu_t = nu_star / delta * horizon.powf(alpha - 1.0);
        let v_t = horizon.powf(alpha) * gap / delta;
        Ok(Self {
            horizon,
            lambda_rate,
            nu_star,
            alpha,
            delta,
            a_t,
            mu_t,
            v_t,
        })
    }

    /// `1 - a_T`, computed without cancellation.
    pub fn one_minus_a(&self) -> f64 {
        self.lambda_rate * self.delta * self.horizon.powf(-self.alpha)
    }

    /// Space normalization `(1-a_T) / (T^α ν* δ^{-1})` applied to counts.
    pub fn space_scale(&self) -> f64 {
        self.one_minus_a() / (self.horizon.powf(self.alpha) * self.nu_star / self.delta)
    }

    /// Number of discrete steps covering `[0, 1]`, i.e. `⌊T⌋`.
    pub fn steps(&self) -> usize {
        self.horizon.floor() as usize
    }
}

/// Builds the family from a kernel's `α` and `δ`.
pub fn make_scaling_family(kernel: &Kernel, horizon: f64, lambda_rate: f64, nu_star: f64) -> Result<ScalingFamily> {
    check_tail_index(kernel.alpha)?;
    ScalingFamily::new(kernel.alpha, kernel.delta(), horizon, lambda_rate, nu_star)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_shape() {
        let k = Kernel::power_law(0.75, 16).unwrap();
        let eta = k.eta();
        for n in 1..=4 {
            let expect = (n as f64).powf(-1.75);
            assert!((eta[n - 1] / eta[0] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn normalization() {
        for &alpha in &[0.55, 0.6, 0.75, 0.9, 0.99] {
            let k = Kernel::power_law(alpha, 100_000).unwrap();
            let total: f64 = k.eta().iter().rev().sum::<f64>() + k.tail_mass();
            assert!((total - 1.0).abs() < 1e-12, "alpha {alpha}: {total}");
            assert_eq!(k.tail_constant(), k.eta()[0]);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(Kernel::power_law(0.4, 100), Err(Error::Parameter(_))));
        assert!(matches!(Kernel::power_law(1.0, 100), Err(Error::Parameter(_))));
        assert!(matches!(Kernel::power_law(0.75, 8), Err(Error::Parameter(_))));
        assert!(Kernel::from_raw(0.75, 1.0, vec![0.5, 0.4], 0.0).is_err());
        assert!(Kernel::from_raw(0.75, 1.0, vec![1.2, -0.2], 0.0).is_err());
    }

    #[test]
    fn tail_estimate_of_point_mass_is_zero() {
        let k = Kernel::single_lag(1, 4).unwrap();
        assert_eq!(k.tail_constant_estimate(2).unwrap(), 0.0);
        assert!(matches!(k.tail_constant_estimate(4), Err(Error::Range(_))));
    }

    #[test]
    fn family_formulas() {
        let f = ScalingFamily::new(0.75, 2.0, 1024.0, 1.0, 1.0).unwrap();
        assert!((f.a_t - (1.0 - 2.0 * 1024f64.powf(-0.75))).abs() < 1e-15);
        assert!((f.mu_t - 0.5 * 1024f64.powf(-0.25)).abs() < 1e-15);
        assert!((f.v_t - 1.0).abs() < 1e-12);
        assert!((f.horizon.powf(1.0 - f.alpha) * f.mu_t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn family_reports_minimal_horizon() {
        let err = ScalingFamily::new(0.75, 2.0, 2.0, 1.0, 1.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("T must exceed"), "{msg}");
    }

    #[test]
    fn scaling_is_linear() {
        let k = Kernel::from_raw(1.0, 0.0, vec![1.0], 0.0).unwrap();
        assert_eq!(scale_kernel(&k, 0.5).unwrap(), vec![0.5]);
        let k = Kernel::power_law(0.7, 64).unwrap();
        let s = scale_kernel(&k, 0.99).unwrap();
        for (a, b) in s.iter().zip(k.eta()) {
            assert_eq!(*a, 0.99 * b);
        }
        assert!(scale_kernel(&k, 1.0).is_err());
    }

    #[test]
    fn table_round_trip() {
        let k = Kernel::power_law(0.8, 32).unwrap();
        let mut buf = Vec::new();
        k.write_table(&mut buf).unwrap();
        let back = Kernel::read_table(&buf[..]).unwrap();
        assert_eq!(k, back);
    }

    #[test]
    fn table_rejects_gaps() {
        let text = "# alpha=0.75 K=0 tail_mass=0\n1 0.5\n3 0.5\n";
        assert!(matches!(Kernel::read_table(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
    }
}
