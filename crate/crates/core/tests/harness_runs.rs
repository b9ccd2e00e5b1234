use std::fs;
use std::path::Path;

use rough_inar::harness::{
    file_digest, parse_config, parse_config_for, parse_ml_triples, run_experiment, ExperimentConfig, ExperimentKind,
    RunManifest, MANIFEST_NAME,
};
use rough_inar::Error;

fn small(kind: ExperimentKind, dir: &Path, workers: usize) -> ExperimentConfig {
    ExperimentConfig {
        t_list: vec![100.0, 200.0],
        n_paths: 12,
        n_grid: 200,
        seed_base: 5,
        output_dir: dir.to_path_buf(),
        worker_count: workers,
        ..ExperimentConfig::new(kind)
    }
}

fn digests(m: &RunManifest) -> Vec<(String, String)> {
    m.files.iter().map(|f| (f.name.clone(), f.sha256.clone())).collect()
}

#[test]
fn defaults_round_trip() {
    let c = parse_config(r#"{"experiment": "limit"}"#).unwrap();
    assert_eq!(c, ExperimentConfig::new(ExperimentKind::Limit));
    assert_eq!((c.alpha, c.lambda_rate, c.nu_star), (0.75, 1.0, 1.0));
    assert_eq!(c.t_list, vec![1000.0]);
    assert_eq!((c.n_paths, c.n_grid, c.seed_base, c.worker_count), (1000, 2000, 0, 1));
    let c = parse_config_for(r#"{"alpha": 0.6, "T_list": [500, 1000]}"#, ExperimentKind::Convergence).unwrap();
    assert_eq!(c.experiment, ExperimentKind::Convergence);
    assert_eq!(c.t_list, vec![500.0, 1000.0]);
}

#[test]
fn every_violation_is_reported() {
    let text = r#"{"experiment": "simulate", "alpha": 1.2, "n_paths": 0, "n_grid": 5,
                   "worker_count": 0, "T_list": [2], "colour": "red"}"#;
    let Err(Error::Config(errs)) = parse_config(text) else {
        panic!("expected a configuration error");
    };
    for needle in ["alpha", "n_paths", "n_grid", "worker_count", "T_list", "colour"] {
        assert!(errs.iter().any(|e| e.contains(needle)), "{needle} missing from {errs:?}");
    }
}

#[test]
fn malformed_and_conflicting_configs() {
    assert!(parse_config("{not json").is_err());
    assert!(parse_config("[1, 2]").is_err());
    assert!(parse_config(r#"{"experiment": "fly"}"#).is_err());
    assert!(parse_config_for(r#"{"experiment": "limit"}"#, ExperimentKind::Simulate).is_err());
    assert!(parse_config(r#"{"experiment": "limit", "alpha": "big"}"#).is_err());
}

#[test]
fn experiment_names() {
    for k in ExperimentKind::ALL {
        assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
    }
    assert_eq!(ExperimentKind::RenewalCheck.name(), "renewal-check");
}

#[test]
fn ml_triples() {
    let q = parse_ml_triples("# header\n0.75 1 -2\n\n0.6,0.6,-3.5\n").unwrap();
    assert_eq!(q.len(), 2);
    assert_eq!((q[1].alpha, q[1].beta, q[1].z), (0.6, 0.6, -3.5));
    let e = parse_ml_triples("0.75 1 -2\n0.5 x 1\n").unwrap_err();
    assert!(e.to_string().contains("line 2"), "{e}");
}

#[test]
fn digests_are_independent_of_worker_count() {
    for kind in [
        ExperimentKind::Simulate,
        ExperimentKind::Limit,
        ExperimentKind::Convergence,
        ExperimentKind::IdentityCheck,
    ] {
        let one = tempfile::tempdir().unwrap();
        let eight = tempfile::tempdir().unwrap();
        let a = run_experiment(&small(kind, one.path(), 1)).unwrap();
        let b = run_experiment(&small(kind, eight.path(), 8)).unwrap();
        assert_eq!(digests(&a), digests(&b), "{kind}");
    }
}

#[test]
fn manifest_lists_every_file_with_its_digest() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&small(ExperimentKind::RenewalCheck, dir.path(), 1)).unwrap();
    let names: Vec<_> = m.files.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(
        names,
        ["kernel.txt", "laplace.csv", "density_T100.txt", "renewal_T100.csv", "density_T200.txt", "renewal_T200.csv"]
    );
    for f in &m.files {
        let path = dir.path().join(&f.name);
        assert_eq!(file_digest(&path).unwrap(), f.sha256);
        assert_eq!(fs::metadata(&path).unwrap().len(), f.bytes);
    }
    let on_disk: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap()).unwrap();
    assert_eq!(on_disk["config"]["T_list"], serde_json::json!([100.0, 200.0]));
    assert_eq!(on_disk["files"].as_array().unwrap().len(), 6);
}

#[test]
fn one_convergence_table_per_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&small(ExperimentKind::Convergence, dir.path(), 1)).unwrap();
    assert_eq!(m.files.len(), 2);
    let text = fs::read_to_string(dir.path().join("convergence_T200.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("T,metric,value,stderr"));
    let metrics: Vec<_> = lines.map(|l| l.split(',').nth(1).unwrap().to_string()).collect();
    assert_eq!(metrics, ["bracket_error", "ks_Y1", "mean_Y1", "mean_limit_Y1"]);
}

#[test]
fn table_headers() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&small(ExperimentKind::Simulate, dir.path(), 1)).unwrap();
    let first = |name: &str| fs::read_to_string(dir.path().join(name)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(first("simulate_T100.csv"), "path,seed,t,Y,Z,C");
    assert_eq!(first("path_T100.csv"), "n,X,lambda,N,M");
    assert_eq!(first("summary.csv"), "T,metric,value,stderr");
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&small(ExperimentKind::Limit, dir.path(), 1)).unwrap();
    let first = |name: &str| fs::read_to_string(dir.path().join(name)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(first("limit_path.csv"), "t,ydot,y");
    assert_eq!(first("limit_marginals.csv"), "path,seed,t,ydot,y");
    assert_eq!(first("limit_mean.csv"), "t,mean_ydot,stderr,mean_proposal,proposal_stderr,F");
}

#[test]
fn identity_run_passes_every_path() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&small(ExperimentKind::IdentityCheck, dir.path(), 1)).unwrap();
    let text = fs::read_to_string(dir.path().join("identity_T200.csv")).unwrap();
    assert_eq!(text.lines().count(), 13);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn failed_run_leaves_no_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    // The second horizon passes validation but the ensemble exceeds the step
    // budget only at run time, after the first table was written.
    let mut c = small(ExperimentKind::Simulate, dir.path(), 1);
    c.t_list = vec![100.0, 1e6];
    c.n_paths = 60_000;
    assert!(run_experiment(&c).is_err());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn reruns_reproduce_digests() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run_experiment(&small(ExperimentKind::MlEval, a.path(), 1)).unwrap();
    let mb = run_experiment(&small(ExperimentKind::MlEval, b.path(), 1)).unwrap();
    assert_eq!(digests(&ma), digests(&mb));
}
