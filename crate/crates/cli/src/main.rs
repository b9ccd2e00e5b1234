use std::io::{self, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rough_inar::harness::{
    parse_config_for, parse_ml_triples, run_experiment, ExperimentConfig, ExperimentKind, MANIFEST_NAME,
};

#[derive(Parser)]
#[command(name = "rough-inar", version, about = "Nearly unstable INAR(∞) processes and their rough CIR limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate INAR paths and record rescaled marginals.
    Simulate(RunArgs),
    /// Simulate the limiting rough fractional CIR scheme.
    Limit(RunArgs),
    /// Bracket-error and KS sweep over the horizons in T_list.
    Convergence(RunArgs),
    /// Resolvent density against the limit CDF, and the Laplace check.
    RenewalCheck(RunArgs),
    /// Exact path identities on simulated paths.
    IdentityCheck(RunArgs),
    /// Evaluate E_{α,β}(z) for `alpha beta z` lines on stdin, or with
    /// --config write the kernel table of f and F.
    MlEval(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat JSON configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides seed_base.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides worker_count.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            parse_config_for(&text, kind).map_err(|e| e.to_string())?
        }
        None => ExperimentConfig::new(kind),
    };
    if let Some(s) = args.seed {
        cfg.seed_base = s;
    }
    if let Some(w) = args.workers {
        cfg.worker_count = w;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<(), String> {
    let cfg = load(kind, args)?;
    let manifest = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let _ = writeln!(
        out,
        "{} finished in {:.2} s; manifest at {}",
        kind,
        manifest.wall_clock_seconds,
        cfg.output_dir.join(MANIFEST_NAME).display()
    );
    for f in &manifest.files {
        let _ = writeln!(out, "{}  {}", f.sha256, f.name);
    }
    Ok(())
}

fn ml_stdin() -> Result<(), String> {
    let mut text = String::new();
    io::stdin().read_to_string(&mut text).map_err(|e| format!("cannot read stdin: {e}"))?;
    let queries = parse_ml_triples(&text).map_err(|e| e.to_string())?;
    let mut out = BufWriter::new(io::stdout().lock());
    let _ = writeln!(out, "alpha,beta,z,value,method,error_estimate");
    for q in queries {
        let e = q.evaluate().map_err(|e| format!("alpha={} beta={} z={}: {e}", q.alpha, q.beta, q.z))?;
        let method = serde_json::to_value(e.method).map_err(|e| e.to_string())?;
        let _ = writeln!(
            out,
            "{},{},{},{:.17e},{},{:e}",
            q.alpha,
            q.beta,
            q.z,
            e.value,
            method.as_str().unwrap_or("?"),
            e.error_estimate
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => run(ExperimentKind::Simulate, a),
        Command::Limit(a) => run(ExperimentKind::Limit, a),
        Command::Convergence(a) => run(ExperimentKind::Convergence, a),
        Command::RenewalCheck(a) => run(ExperimentKind::RenewalCheck, a),
        Command::IdentityCheck(a) => run(ExperimentKind::IdentityCheck, a),
        Command::MlEval(a) if a.config.is_none() && a.out.is_none() => ml_stdin(),
        Command::MlEval(a) => run(ExperimentKind::MlEval, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
