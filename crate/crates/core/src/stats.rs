//! Estimators and diagnostics: KS distance, z-scores, Hölder exponents,
//! bracket errors and the martingale CLT check.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inar_sim::{PathRecord, RescaledPath};

/// `c(0.01) = sqrt(-ln(0.005)/2)`, the asymptotic two-sample KS constant.
pub const KS_C_1PCT: f64 = 1.6276;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KSReport {
    pub statistic: f64,
    pub n_a: usize,
    pub n_b: usize,
    /// `statistic > c(0.01) sqrt((n_a + n_b)/(n_a n_b))`
    pub reject_at_1pct: bool,
}

/// Exact two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KSReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Parameter("KS test needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::Parameter("KS samples contain NaN".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (na, nb) = (sa.len(), sb.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < na && j < nb {
        let x = sa[i].min(sb[j]);
        while i < na && sa[i] == x {
            i += 1;
        }
        while j < nb && sb[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let threshold = KS_C_1PCT * ((na + nb) as f64 / (na * nb) as f64).sqrt();
    Ok(KSReport {
        statistic: d,
        n_a: na,
        n_b: nb,
        reject_at_1pct: d > threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Parameter("regression needs two equally long series of length >= 2".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("regressor is constant".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).min(1.0) };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderReport {
    /// NaN when the series has no increments at some lag.
    pub exponent: f64,
    pub r_squared: f64,
    pub scales_used: Vec<usize>,
    pub degenerate: bool,
}

/// Hölder exponent from the slope of the mean squared increment against the
/// lag, over dyadic lags `1, 2, …, 2^max_level/8`; exponent = slope/2.
pub fn holder_exponent(series: &[f64], max_level: u32) -> Result<HolderReport> {
    if max_level < 5 {
        return Err(Error::Parameter(format!("max_level must be at least 5 for three lags, got {max_level}")));
    }
    if max_level >= usize::BITS || series.len() < 1usize << max_level {
        return Err(Error::Range(format!(
            "series of length {} is shorter than 2^{max_level}",
            series.len()
        )));
    }
    let top = (1usize << max_level) / 8;
    let scales: Vec<usize> = std::iter::successors(Some(1usize), |h| Some(h * 2)).take_while(|&h| h <= top).collect();
    let mut sf = Vec::with_capacity(scales.len());
    for &h in &scales {
        let m = series.len() - h;
        let s: f64 = (0..m).map(|i| (series[i + h] - series[i]).powi(2)).sum::<f64>() / m as f64;
        sf.push(s);
    }
    if sf.iter().any(|&s| !(s > 0.0)) {
        return Ok(HolderReport {
            exponent: f64::NAN,
            r_squared: 0.0,
            scales_used: scales,
            degenerate: true,
        });
    }
    let h: Vec<f64> = scales.iter().map(|&h| h as f64).collect();
    let fit = loglog_slope(&h, &sf)?;
    Ok(HolderReport {
        exponent: fit.slope / 2.0,
        r_squared: fit.r_squared,
        scales_used: scales,
        degenerate: false,
    })
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_sample(xs: &[f64]) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::Parameter("an estimate needs at least two samples".into()));
        }
        let (value, stderr) = crate::inar_sim::mean_and_stderr(xs);
        Ok(Self {
            value,
            stderr,
            n: xs.len(),
        })
    }

    /// `(value - target)/stderr`; zero when both sides coincide exactly.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.value - target;
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

/// `E[([Z]_t - Y_t)^2]` estimated from per-path gaps `[Z]_t - Y_t`.
pub fn bracket_error_from_gaps(gaps: &[f64]) -> Result<Estimate> {
    let sq: Vec<f64> = gaps.iter().map(|g| g * g).collect();
    Estimate::from_sample(&sq)
}

/// `E[([Z]_t - Y_t)^2]` over an ensemble of rescaled paths.
pub fn bracket_error(paths: &[RescaledPath], t: f64) -> Result<Estimate> {
    if paths.is_empty() {
        return Err(Error::Parameter("empty ensemble".into()));
    }
    let gaps: Vec<f64> = paths.iter().map(|p| p.bracket_gap(t)).collect();
    if gaps.len() == 1 {
        return Ok(Estimate {
            value: gaps[0] * gaps[0],
            stderr: f64::NAN,
            n: 1,
        });
    }
    bracket_error_from_gaps(&gaps)
}

/// Sample moments with z-scores against the standard normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalityScores {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub mean_z: f64,
    pub skewness: f64,
    pub skewness_z: f64,
    pub excess_kurtosis: f64,
    pub kurtosis_z: f64,
}

pub fn normality_scores(xs: &[f64]) -> Result<NormalityScores> {
    if xs.len() < 4 {
        return Err(Error::Parameter("normality scores need at least four values".into()));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    Ok(NormalityScores {
        n: xs.len(),
        mean,
        variance: m2 * n / (n - 1.0),
        mean_z: mean * n.sqrt(),
        skewness,
        skewness_z: skewness / (6.0 / n).sqrt(),
        excess_kurtosis,
        kurtosis_z: excess_kurtosis / (24.0 / n).sqrt(),
    })
}

/// Normalized martingale `B_t = T^{-1/2} Σ_{s≤⌊tT⌋} (M_s - M_{s-1})/√λ_s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleClt {
    /// `B` on the grid `i/T`, `B[0] = 0`.
    pub b: Vec<f64>,
    /// `T^{-1} Σ_{s≤⌊T⌋} (M_s - M_{s-1})^2/λ_s`
    pub quadratic_variation: f64,
    /// Its conditional expectation `⌊T⌋/T`.
    pub expected_quadratic_variation: f64,
    /// `(M_s - M_{s-1})/√λ_s`
    pub normalized_increments: Vec<f64>,
}

pub fn mclt_diagnostic(path: &PathRecord, horizon: f64) -> Result<MartingaleClt> {
    if !(horizon > 0.0) || path.is_empty() {
        return Err(Error::Parameter("need a non-empty path and a positive horizon".into()));
    }
    let scale = 1.0 / horizon.sqrt();
    let eps: Vec<f64> = path
        .martingale_increments()
        .iter()
        .zip(&path.lambda)
        .map(|(dm, l)| dm / l.sqrt())
        .collect();
    let mut b = Vec::with_capacity(eps.len() + 1);
    b.push(0.0);
    let mut acc = 0.0;
    let mut qv = 0.0;
    for e in &eps {
        acc += e;
        qv += e * e;
        b.push(scale * acc);
    }
    Ok(MartingaleClt {
        b,
        quadratic_variation: qv / horizon,
        expected_quadratic_variation: path.len() as f64 / horizon,
        normalized_increments: eps,
    })
}

/// One row of a T-sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub horizon: f64,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
}

/// Writes the header `T,metric,value,stderr` and one line per row.
pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(w, "T,metric,value,stderr")?;
    for r in rows {
        writeln!(w, "{},{},{:e},{:e}", r.horizon, r.metric, r.value, r.stderr)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap().statistic, 0.0);
        assert_eq!(ks_two_sample(&a, &[10.0, 11.0]).unwrap().statistic, 1.0);
        assert_eq!(ks_two_sample(&a, &[3.0, 4.0, 5.0, 6.0]).unwrap().statistic, 0.5);
        assert!(ks_two_sample(&[], &a).is_err());
    }

    #[test]
    fn ks_ties_across_samples() {
        // F_a jumps to 1 at 0, F_b to 1/2 at 0 and 1 at 1.
        let r = ks_two_sample(&[0.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(r.statistic, 0.5);
    }

    #[test]
    fn holder_of_ramp() {
        let s: Vec<f64> = (0..1024).map(|i| i as f64 * 0.1).collect();
        let h = holder_exponent(&s, 10).unwrap();
        assert!((h.exponent - 1.0).abs() < 0.01);
        assert_eq!(h.scales_used, vec![1, 2, 4, 8, 16, 32, 64, 128]);
    }

    #[test]
    fn holder_of_constant_is_flagged() {
        let h = holder_exponent(&[2.0; 64], 6).unwrap();
        assert!(h.degenerate && h.exponent.is_nan());
    }

    #[test]
    fn holder_rejects_short_series() {
        assert!(matches!(holder_exponent(&[0.0; 63], 6), Err(Error::Range(_))));
    }

    #[test]
    fn linear_fit_exact_line() {
        let f = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-15 && (f.intercept - 1.0).abs() < 1e-15);
        assert!((f.r_squared - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sweep_csv_format() {
        let mut out = Vec::new();
        let rows = [SweepRow {
            horizon: 500.0,
            metric: "bracket_error".into(),
            value: 0.25,
            stderr: 0.5,
        }];
        write_sweep_csv(&mut out, &rows).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "T,metric,value,stderr\n500,bracket_error,2.5e-1,5e-1\n");
    }
}
