//! Configuration, experiment orchestration and digest-stamped outputs.
//!
//! A run writes one directory holding per-experiment CSV files and a
//! `manifest.json` that echoes the configuration and lists every data file
//! with its SHA-256 digest. Data files carry no timestamps, so reruns with the
//! same configuration reproduce the digests.
//!
//! | file | columns |
//! |------|---------|
//! | `simulate_T{T}.csv` | `path,seed,t,Y,Z,C` |
//! | `path_T{T}.csv` | `n,X,lambda,N,M` |
//! | `summary.csv`, `convergence_T{T}.csv`, `renewal_T{T}.csv` | `T,metric,value,stderr` |
//! | `limit_path.csv` | `t,ydot,y` |
//! | `limit_marginals.csv` | `path,seed,t,ydot,y` |
//! | `limit_mean.csv` | `t,mean_ydot,stderr,mean_proposal,proposal_stderr,F` |
//! | `kernel.txt` | `# alpha= K= tail_mass=` header, then `lag mass` |
//! | `density_T{T}.txt` | `x pdf cdf` (space-separated) |
//! | `laplace.csv` | `s,gamma_hat,ratio` |
//! | `identity_T{T}.csv` | `path,seed,intensity_rel_error,decomposition_rel_error,pass` |
//! | `kernel_functions.csv` | `t,f,F` |

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{
    parse_config, parse_config_for, parse_ml_triples, ExperimentConfig, ExperimentKind, MAX_GRID, MAX_HORIZON,
    MAX_PATHS, MAX_WORKERS,
};

use crate::error::{Error, Result};
use crate::inar_sim::{
    lemma2_decomposition_check, lemma3_identity_check, run_ensemble, worker_pool, EnsembleSpec, InarModel,
};
use crate::kernels::{make_scaling_family, Kernel, ScalingFamily, MIN_TRUNCATION};
use crate::limit_sim::{limit_ensemble, LimitScheme};
use crate::mlf::{f_alpha_lambda, F_alpha_lambda};
use crate::renewal::{laplace_check, renewal_sequence_fast, rho_density};
use crate::stats::{bracket_error_from_gaps, ks_two_sample, write_sweep_csv, Estimate, SweepRow};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Times at which ensemble marginals are recorded.
pub const MARGINAL_TIMES: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Relative tolerance of the exact path identities.
pub const IDENTITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedInfo {
    pub seed_base: u64,
    /// Paths use seeds `seed_base .. seed_base + n_paths`.
    pub first_path_seed: u64,
    pub last_path_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub seeds: SeedInfo,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub files: Vec<FileDigest>,
}

impl RunManifest {
    /// Digests alone, for comparing runs.
    pub fn digests(&self) -> Vec<(&str, &str)> {
        self.files.iter().map(|f| (f.name.as_str(), f.sha256.as_str())).collect()
    }
}

/// SHA-256 of a file, lowercase hex.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

struct Outputs {
    dir: PathBuf,
    files: Vec<FileDigest>,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write<F>(&mut self, name: &str, fill: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        let mut buf = Vec::new();
        fill(&mut buf).map_err(|e| Error::io(&path, e))?;
        fs::write(&path, &buf).map_err(|e| Error::io(&path, e))?;
        self.files.push(FileDigest {
            name: name.to_string(),
            sha256: hex::encode(Sha256::digest(&buf)),
            bytes: buf.len() as u64,
        });
        Ok(())
    }

    fn remove_all(&self) {
        for f in &self.files {
            let _ = fs::remove_file(self.dir.join(&f.name));
        }
        let _ = fs::remove_file(self.dir.join(MANIFEST_NAME));
    }
}

/// Validates `config`, runs its experiment and writes the outputs and the
/// manifest. On failure every file written by this run is removed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest> {
    config.validate()?;
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut out = Outputs::create(&config.output_dir)?;
    let result = match config.experiment {
        ExperimentKind::Simulate => run_simulate(config, &mut out),
        ExperimentKind::Limit => run_limit(config, &mut out),
        ExperimentKind::Convergence => run_convergence(config, &mut out),
        ExperimentKind::RenewalCheck => run_renewal_check(config, &mut out),
        ExperimentKind::IdentityCheck => run_identity_check(config, &mut out),
        ExperimentKind::MlEval => run_ml_eval(config, &mut out),
    };
    let manifest = result.and_then(|()| {
        let manifest = RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: config.experiment,
            config: config.clone(),
            seeds: SeedInfo {
                seed_base: config.seed_base,
                first_path_seed: config.seed_base,
                last_path_seed: config.seed_base.wrapping_add(config.n_paths as u64 - 1),
            },
            started_unix,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            files: out.files.clone(),
        };
        let path = out.dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    });
    if manifest.is_err() {
        out.remove_all();
    }
    manifest
}

fn kernel_for(config: &ExperimentConfig) -> Result<Kernel> {
    Kernel::power_law(config.alpha, config.max_steps().max(MIN_TRUNCATION))
}

fn family_for(config: &ExperimentConfig, kernel: &Kernel, t: f64) -> Result<ScalingFamily> {
    make_scaling_family(kernel, t, config.lambda_rate, config.nu_star)
}

fn run_simulate(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let kernel = kernel_for(config)?;
    let mut summary = Vec::new();
    for &t in &config.t_list {
        let family = family_for(config, &kernel, t)?;
        let ens = run_ensemble(&EnsembleSpec {
            family,
            kernel: &kernel,
            n_paths: config.n_paths,
            seed_base: config.seed_base,
            times: MARGINAL_TIMES.to_vec(),
            workers: config.worker_count,
        })?;
        out.write(&format!("simulate_T{t}.csv"), |w| {
            writeln!(w, "path,seed,t,Y,Z,C")?;
            for (i, p) in ens.paths.iter().enumerate() {
                for (k, time) in MARGINAL_TIMES.iter().enumerate() {
                    writeln!(w, "{i},{},{time},{:e},{:e},{:e}", p.seed, p.y[k], p.z[k], p.c[k])?;
                }
            }
            Ok(())
        })?;
        let first = InarModel::from_family(&family, &kernel)?.simulate(family.steps(), config.seed_base)?;
        out.write(&format!("path_T{t}.csv"), |w| first.write_table(w))?;
        let last = MARGINAL_TIMES.len() - 1;
        for (metric, sample) in [
            ("mean_Y1", ens.y_sample(last)),
            ("mean_Z1", ens.z_sample(last)),
            ("mean_C1", ens.c_sample(last)),
        ] {
            summary.push(sweep_row(t, metric, &sample));
        }
    }
    out.write("summary.csv", |w| write_sweep_csv(w, &summary))
}

fn sweep_row(t: f64, metric: &str, sample: &[f64]) -> SweepRow {
    let (value, stderr) = match Estimate::from_sample(sample) {
        Ok(e) => (e.value, e.stderr),
        Err(_) => (sample.first().copied().unwrap_or(f64::NAN), f64::NAN),
    };
    SweepRow {
        horizon: t,
        metric: metric.into(),
        value,
        stderr,
    }
}

fn run_limit(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let scheme = LimitScheme::new(config.alpha, config.lambda_rate, config.nu_star, config.n_grid)?;
    let first = scheme.simulate(config.seed_base);
    out.write("limit_path.csv", |w| first.write_table(w))?;
    let ens = limit_ensemble(&scheme, config.n_paths, config.seed_base, &MARGINAL_TIMES, config.worker_count)?;
    out.write("limit_marginals.csv", |w| {
        writeln!(w, "path,seed,t,ydot,y")?;
        for (i, seed) in ens.seeds.iter().enumerate() {
            for (k, time) in MARGINAL_TIMES.iter().enumerate() {
                writeln!(w, "{i},{seed},{time},{:e},{:e}", ens.ydot[k][i], ens.y[k][i])?;
            }
        }
        Ok(())
    })?;
    let mut rows = Vec::new();
    for (k, &time) in MARGINAL_TIMES.iter().enumerate() {
        let row = sweep_row(time, "", &ens.ydot[k]);
        let raw = sweep_row(time, "", &ens.proposal[k]);
        let f = F_alpha_lambda(config.alpha, config.lambda_rate, time)?;
        rows.push((time, row.value, row.stderr, raw.value, raw.stderr, f));
    }
    out.write("limit_mean.csv", |w| {
        writeln!(w, "t,mean_ydot,stderr,mean_proposal,proposal_stderr,F")?;
        for (t, m, s, mp, sp, f) in &rows {
            writeln!(w, "{t},{m:e},{s:e},{mp:e},{sp:e},{f:e}")?;
        }
        Ok(())
    })
}

fn run_convergence(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let kernel = kernel_for(config)?;
    let scheme = LimitScheme::new(config.alpha, config.lambda_rate, config.nu_star, config.n_grid)?;
    let limit = limit_ensemble(&scheme, config.n_paths, config.seed_base, &[1.0], config.worker_count)?;
    let limit_y1 = &limit.y[0];
    for &t in &config.t_list {
        let family = family_for(config, &kernel, t)?;
        let ens = run_ensemble(&EnsembleSpec {
            family,
            kernel: &kernel,
            n_paths: config.n_paths,
            seed_base: config.seed_base,
            times: vec![1.0],
            workers: config.worker_count,
        })?;
        let y1 = ens.y_sample(0);
        let mut rows = Vec::new();
        let gaps = ens.bracket_gap_sample(0);
        match bracket_error_from_gaps(&gaps) {
            Ok(e) => rows.push(SweepRow {
                horizon: t,
                metric: "bracket_error".into(),
                value: e.value,
                stderr: e.stderr,
            }),
            Err(_) => rows.push(SweepRow {
                horizon: t,
                metric: "bracket_error".into(),
                value: gaps[0] * gaps[0],
                stderr: f64::NAN,
            }),
        }
        let ks = ks_two_sample(&y1, limit_y1)?;
        rows.push(SweepRow {
            horizon: t,
            metric: "ks_Y1".into(),
            value: ks.statistic,
            stderr: f64::NAN,
        });
        rows.push(sweep_row(t, "mean_Y1", &y1));
        rows.push(sweep_row(t, "mean_limit_Y1", limit_y1));
        out.write(&format!("convergence_T{t}.csv"), |w| write_sweep_csv(w, &rows))?;
    }
    Ok(())
}

fn run_renewal_check(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let kernel = kernel_for(config)?;
    out.write("kernel.txt", |w| kernel.write_table(w))?;
    let report = laplace_check(&kernel, &[1e-1, 3e-2, 1e-2, 3e-3, 1e-3])?;
    out.write("laplace.csv", |w| {
        writeln!(w, "s,gamma_hat,ratio")?;
        for r in &report.rows {
            writeln!(w, "{:e},{:e},{:e}", r.s, r.gamma_hat, r.ratio)?;
        }
        Ok(())
    })?;
    for &t in &config.t_list {
        let family = family_for(config, &kernel, t)?;
        let eta = crate::kernels::scale_kernel(&kernel, family.a_t)?;
        let steps = family.steps();
        let a = renewal_sequence_fast(&eta[..steps], steps)?.with_offspring_mass(family.a_t)?;
        let density = rho_density(&a, t, 1.0)?;
        out.write(&format!("density_T{t}.txt"), |w| density.write_table(w))?;
        let (alpha, lam) = (config.alpha, config.lambda_rate);
        let sup = density.sup_distance(|x| F_alpha_lambda(alpha, lam, x).unwrap_or(f64::NAN), 1.0);
        let rows = [
            SweepRow {
                horizon: t,
                metric: "sup_cdf_distance".into(),
                value: sup,
                stderr: 0.0,
            },
            SweepRow {
                horizon: t,
                metric: "resolvent_l1".into(),
                value: a.partial_sum(a.len()),
                stderr: a.truncation_error(),
            },
        ];
        out.write(&format!("renewal_T{t}.csv"), |w| write_sweep_csv(w, &rows))?;
    }
    Ok(())
}

fn run_identity_check(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let kernel = kernel_for(config)?;
    let pool = worker_pool(config.worker_count)?;
    let mut failures = 0usize;
    for &t in &config.t_list {
        let family = family_for(config, &kernel, t)?;
        let model = InarModel::from_family(&family, &kernel)?;
        let steps = family.steps();
        let a = renewal_sequence_fast(&model.eta()[..steps], steps)?;
        let rows: Vec<(u64, f64, f64)> = pool.install(|| {
            (0..config.n_paths)
                .into_par_iter()
                .map(|i| {
                    let seed = config.seed_base.wrapping_add(i as u64);
                    let p = model.simulate(steps, seed)?;
                    let l3 = lemma3_identity_check(&p, &a)?;
                    let l2 = lemma2_decomposition_check(&p, &a)?;
                    Ok((seed, l3.max_rel_error, l2.max_rel_error))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        failures += rows.iter().filter(|r| !(r.1 <= IDENTITY_TOL && r.2 <= IDENTITY_TOL)).count();
        out.write(&format!("identity_T{t}.csv"), |w| {
            writeln!(w, "path,seed,intensity_rel_error,decomposition_rel_error,pass")?;
            for (i, (seed, e3, e2)) in rows.iter().enumerate() {
                let pass = *e3 <= IDENTITY_TOL && *e2 <= IDENTITY_TOL;
                writeln!(w, "{i},{seed},{e3:e},{e2:e},{pass}")?;
            }
            Ok(())
        })?;
    }
    if failures > 0 {
        // The table stays informative, but a failed identity is a run failure.
        return Err(Error::Stability(format!("{failures} path(s) violate the exact identities")));
    }
    Ok(())
}

fn run_ml_eval(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let (alpha, lam) = (config.alpha, config.lambda_rate);
    let mut rows = Vec::with_capacity(config.n_grid);
    for k in 1..=config.n_grid {
        let t = k as f64 / config.n_grid as f64;
        rows.push((t, f_alpha_lambda(alpha, lam, t)?, F_alpha_lambda(alpha, lam, t)?));
    }
    out.write("kernel_functions.csv", |w| {
        writeln!(w, "t,f,F")?;
        for (t, f, cdf) in &rows {
            writeln!(w, "{t:e},{f:e},{cdf:e}")?;
        }
        Ok(())
    })
}
