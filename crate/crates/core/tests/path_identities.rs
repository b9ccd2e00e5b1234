use rough_inar::inar_sim::{
    expected_counts, lemma2_decomposition_check, lemma3_identity_check, mean_formula_check, rescale, run_ensemble,
    simulate_inar, EnsembleSpec, InarModel, PathRecord, PathSummary,
};
use rough_inar::renewal::renewal_sequence;
use rough_inar::{make_scaling_family, scale_kernel, Kernel};

fn families() -> Vec<(&'static str, InarModel)> {
    let n = 500;
    let mut out = vec![
        ("zero", InarModel::new(1.0, vec![0.0; n]).unwrap()),
        ("lag-1", InarModel::new(1.0, vec![0.5]).unwrap()),
        ("lag-2", InarModel::new(0.7, vec![0.3, 0.2]).unwrap()),
    ];
    for alpha in [0.6, 0.75, 0.9] {
        let k = Kernel::power_law(alpha, n).unwrap();
        let f = make_scaling_family(&k, n as f64, 1.0, 1.0).unwrap();
        out.push(("power law", InarModel::from_family(&f, &k).unwrap()));
    }
    out
}

#[test]
fn intensity_identity_by_hand() {
    // λ_n = 1 + 0.3 X_{n-1} + 0.2 X_{n-2} for X = 2, 0, 3, 1, 0, 4
    let lambda = vec![1.0, 1.6, 1.4, 1.9, 1.9, 1.2];
    let p = PathRecord::assemble(vec![2, 0, 3, 1, 0, 4], lambda, 1.0, 0);
    let a = renewal_sequence(&[0.3, 0.2], 6).unwrap();
    // n = 3: 1 + (A_1 + A_2) + A_2 ΔM_1 + A_1 ΔM_2 = 1 + 0.59 + 0.29 - 0.48
    let rhs3 = 1.0 + 0.59 + 0.29 * 1.0 + 0.3 * -1.6;
    assert!((rhs3 - 1.4_f64).abs() < 1e-15);
    let r = lemma3_identity_check(&p, &a).unwrap();
    assert!(r.max_abs_error < 1e-14, "{r:?}");
}

#[test]
fn intensity_identity_detects_a_wrong_intensity() {
    let lambda = vec![1.0, 1.6, 1.4, 1.9, 1.95, 1.2];
    let p = PathRecord::assemble(vec![2, 0, 3, 1, 0, 4], lambda, 1.0, 0);
    let a = renewal_sequence(&[0.3, 0.2], 6).unwrap();
    assert!(lemma3_identity_check(&p, &a).unwrap().max_abs_error > 1e-3);
}

#[test]
fn count_decomposition_by_hand() {
    // lag-1 kernel 0.5, μ = 1, X = 1, 3, 0, 2: λ = 1, 1.5, 2.5, 1; M = 0, 1.5, -1, 0
    let p = PathRecord::assemble(vec![1, 3, 0, 2], vec![1.0, 1.5, 2.5, 1.0], 1.0, 0);
    for (m, want) in p.martingale.iter().zip([0.0, 1.5, -1.0, 0.0]) {
        assert!((m - want).abs() < 1e-15);
    }
    let a = renewal_sequence(&[0.5], 4).unwrap();
    let e = expected_counts(1.0, &a, 4).unwrap();
    for (x, want) in e.iter().zip([1.0, 2.5, 4.25, 6.125]) {
        assert!((x - want).abs() < 1e-15);
    }
    // N - E N = 0, 1.5, -0.25, -0.125 = M_n + Σ A_{n-s} M_s
    let r = lemma2_decomposition_check(&p, &a).unwrap();
    assert!(r.max_abs_error < 1e-15, "{r:?}");
}

#[test]
fn identities_hold_on_simulated_paths() {
    for (name, model) in families() {
        let a = renewal_sequence(&model.eta()[..model.eta().len().min(500)], 500).unwrap();
        for seed in 0..20 {
            let p = model.simulate(500, seed).unwrap();
            let r3 = lemma3_identity_check(&p, &a).unwrap();
            let r2 = lemma2_decomposition_check(&p, &a).unwrap();
            assert!(r3.passes(1e-8), "{name} seed {seed}: {r3:?}");
            assert!(r2.passes(1e-8), "{name} seed {seed}: {r2:?}");
        }
    }
}

#[test]
fn zero_kernel_mean_is_linear() {
    let model = InarModel::new(0.8, vec![0.0; 50]).unwrap();
    let r = mean_formula_check(&model, 50, 10_000, 1).unwrap();
    assert_eq!(r.closed_form, 40.0);
    assert!(r.z_score.abs() <= 3.0, "{r:?}");
}

#[test]
fn lag_one_mean() {
    let model = InarModel::new(1.0, vec![0.5, 0.0]).unwrap();
    let r = mean_formula_check(&model, 2, 10_000, 7).unwrap();
    assert!((r.closed_form - 2.5).abs() < 1e-15);
    assert!(r.z_score.abs() <= 4.0, "{r:?}");
}

#[test]
fn power_law_mean() {
    let k = Kernel::power_law(0.75, 400).unwrap();
    let f = make_scaling_family(&k, 400.0, 1.0, 1.0).unwrap();
    let model = InarModel::from_family(&f, &k).unwrap();
    let r = mean_formula_check(&model, 200, 4000, 100).unwrap();
    assert!(r.z_score.abs() <= 4.0, "{r:?}");
}

#[test]
fn single_path_ensemble_equals_direct_simulation() {
    let k = Kernel::power_law(0.75, 300).unwrap();
    let f = make_scaling_family(&k, 300.0, 1.0, 1.0).unwrap();
    let times = vec![0.1, 0.5, 1.0];
    let ens = run_ensemble(&EnsembleSpec {
        family: f,
        kernel: &k,
        n_paths: 1,
        seed_base: 42,
        times: times.clone(),
        workers: 1,
    })
    .unwrap();
    let r = rescale(&simulate_inar(&f, &k, 300, 42).unwrap(), &f);
    assert_eq!(ens.paths, vec![PathSummary::from_rescaled(&r, &times, 42)]);
}

#[test]
fn ensemble_independent_of_workers() {
    let k = Kernel::power_law(0.6, 256).unwrap();
    let f = make_scaling_family(&k, 256.0, 1.0, 1.0).unwrap();
    let spec = |workers| EnsembleSpec {
        family: f,
        kernel: &k,
        n_paths: 64,
        seed_base: 9,
        times: vec![0.25, 1.0],
        workers,
    };
    let one = run_ensemble(&spec(1)).unwrap();
    let eight = run_ensemble(&spec(8)).unwrap();
    assert_eq!(one, eight);
}

#[test]
fn ensemble_capacity_limit() {
    let k = Kernel::power_law(0.75, 100_000).unwrap();
    let f = make_scaling_family(&k, 100_000.0, 1.0, 1.0).unwrap();
    let r = run_ensemble(&EnsembleSpec {
        family: f,
        kernel: &k,
        n_paths: 10_000_000,
        seed_base: 0,
        times: vec![1.0],
        workers: 1,
    });
    assert!(matches!(r, Err(rough_inar::Error::Capacity(_))));
}

#[test]
fn rescaled_invariants() {
    let k = Kernel::power_law(0.75, 1000).unwrap();
    let f = make_scaling_family(&k, 1000.0, 1.0, 1.0).unwrap();
    let p = simulate_inar(&f, &k, 1000, 3).unwrap();
    let r = rescale(&p, &f);
    assert_eq!(r.y[0], 0.0);
    assert_eq!(r.z[0], 0.0);
    assert!(r.y.windows(2).all(|w| w[1] >= w[0]));
    let root = (f.horizon.powf(f.alpha) * f.nu_star / f.delta / f.one_minus_a()).sqrt();
    for i in (0..=1000).step_by(97) {
        assert!((r.z[i] - root * (r.y[i] - r.lambda_cum[i])).abs() <= 1e-9 * root);
        if i > 0 {
            assert!((r.c[i] - f.one_minus_a() / f.mu_t * p.lambda[i - 1]).abs() < 1e-12);
        }
    }
    assert_eq!(r.index_at(1.0), 1000);
    assert_eq!(r.index_at(0.0999), 99);
}

#[test]
fn martingale_increments_have_zero_conditional_mean() {
    let k = Kernel::power_law(0.75, 400).unwrap();
    let f = make_scaling_family(&k, 400.0, 1.0, 1.0).unwrap();
    let model = InarModel::from_family(&f, &k).unwrap();
    let mut pairs = Vec::new();
    for seed in 0..400 {
        let p = model.simulate(400, seed).unwrap();
        pairs.extend(p.lambda.iter().copied().zip(p.martingale_increments()));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for bin in pairs.chunks(pairs.len() / 5) {
        let dm: Vec<f64> = bin.iter().map(|p| p.1).collect();
        let e = rough_inar::stats::Estimate::from_sample(&dm).unwrap();
        assert!(e.z_score(0.0).abs() <= 4.0, "{e:?}");
    }
}

#[test]
fn mean_intensity_below_stationary_level() {
    let k = Kernel::power_law(0.75, 500).unwrap();
    let f = make_scaling_family(&k, 500.0, 1.0, 1.0).unwrap();
    let model = InarModel::from_family(&f, &k).unwrap();
    let mut sum = vec![0.0; 500];
    let n_paths = 1000;
    for seed in 0..n_paths {
        let p = model.simulate(500, seed).unwrap();
        for (s, l) in sum.iter_mut().zip(&p.lambda) {
            *s += l;
        }
    }
    let bound = f.mu_t / f.one_minus_a() * 1.05;
    for (n, s) in sum.iter().enumerate() {
        assert!(s / n_paths as f64 <= bound, "n = {}", n + 1);
    }
}

#[test]
fn rescaled_mean_is_order_one() {
    let k = Kernel::power_law(0.75, 2000).unwrap();
    let f = make_scaling_family(&k, 2000.0, 1.0, 1.0).unwrap();
    let ens = run_ensemble(&EnsembleSpec {
        family: f,
        kernel: &k,
        n_paths: 2000,
        seed_base: 0,
        times: vec![1.0],
        workers: 1,
    })
    .unwrap();
    let y = ens.y_sample(0);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    assert!((0.1..=10.0).contains(&mean), "{mean}");
}

#[test]
fn path_table_columns() {
    let eta = scale_kernel(&Kernel::power_law(0.75, 16).unwrap(), 0.5).unwrap();
    let p = InarModel::new(1.0, eta).unwrap().simulate(3, 0).unwrap();
    let mut buf = Vec::new();
    p.write_table(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "n,X,lambda,N,M");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1,"));
}
