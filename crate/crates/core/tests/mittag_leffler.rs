use rough_inar::mlf::{ml, ml_detailed, MlMethod, MlQuery};
use rough_inar::quad::integrate;
use rough_inar::{f_alpha_lambda, F_alpha_lambda};

// Reference values from an 80-digit series evaluation in mpmath.
const REFERENCE: [(f64, f64, f64, f64); 10] = [
    (0.75, 0.75, -3.7, 0.024005735729531760045),
    (0.75, 1.0, -3.7, 0.097625026629728330145),
    (0.6, 1.0, -20.0, 0.022946564273258376396),
    (0.9, 0.9, -7.0, 0.0037514423124251291115),
    (0.55, 1.2, -2.0, 0.30980712697248621965),
    (0.8, 0.8, -1.5, 0.14981952192974851778),
    (0.95, 1.95, -2.5, 0.36044542751073377504),
    (0.7, 1.7, -6.0, 0.15612311085655186579),
    (0.5, 1.0, -4.0, 0.13699945762506138989),
    (0.65, 1.65, -12.0, 0.080476413581550284598),
];

#[test]
fn matches_high_precision_reference() {
    for (a, b, z, want) in REFERENCE {
        let got = ml(a, b, z).unwrap();
        assert!((got - want).abs() <= 1e-13 * want.abs().max(1e-3), "E_{{{a},{b}}}({z}) = {got}, want {want}");
    }
}

#[test]
fn half_order_is_scaled_erfc() {
    // E_{1/2,1}(-x) = exp(x²) erfc(x), values from mpmath.
    for (x, want) in [
        (0.5, 0.61569034419292587487),
        (1.0, 0.42758357615580700441),
        (2.0, 0.25539567631050574387),
        (3.0, 0.17900115118138995042),
    ] {
        let got = ml(0.5, 1.0, -x).unwrap();
        assert!((got - want).abs() < 1e-13 * want, "x = {x}: {got} vs {want}");
    }
}

#[test]
fn alpha_one_closed_forms() {
    // E_{1,2}(z) = (e^z - 1)/z
    for x in [0.3, 2.0, 9.0, 30.0, 80.0] {
        let want = -(-x as f64).exp_m1() / x;
        let got = ml(1.0, 2.0, -x).unwrap();
        assert!((got - want).abs() <= 1e-13 * want, "x = {x}");
    }
}

#[test]
fn exponential_on_interval() {
    for i in 0..=2000 {
        let x = -10.0 + 0.01 * f64::from(i);
        assert!((ml(1.0, 1.0, x).unwrap() - x.exp()).abs() <= 1e-10);
    }
}

#[test]
fn positive_axis_recurrence() {
    // E_{α,β}(z) = 1/Γ(β) + z E_{α,α+β}(z)
    for (a, b, z) in [(0.75, 1.0, 2.0), (0.6, 0.6, 5.0), (0.9, 1.3, 0.7)] {
        let lhs = ml(a, b, z).unwrap();
        let rhs = 1.0 / statrs::function::gamma::gamma(b) + z * ml(a, a + b, z).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs());
    }
}

#[test]
fn negative_axis_recurrence_across_methods() {
    for x in [0.5, 2.5, 6.0, 15.0, 60.0, 400.0] {
        let lhs = ml(0.75, 0.75, -x).unwrap();
        let rhs = 1.0 / statrs::function::gamma::gamma(0.75) - x * ml(0.75, 1.5, -x).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12, "x = {x}: {lhs} vs {rhs}");
    }
}

#[test]
fn method_selection() {
    assert_eq!(ml_detailed(0.75, 1.0, 0.0).unwrap().method, MlMethod::Exact);
    assert_eq!(ml_detailed(0.75, 1.0, 1.0).unwrap().method, MlMethod::Series);
    assert_eq!(ml_detailed(0.75, 1.0, -1.0).unwrap().method, MlMethod::Series);
    assert_eq!(ml_detailed(0.6, 1.0, -1000.0).unwrap().method, MlMethod::Asymptotic);
    let e = ml_detailed(0.75, 0.75, -3.7).unwrap();
    assert_eq!(e.method, MlMethod::Integral);
    assert!(!e.accuracy_warning && e.error_estimate < 1e-14);
}

#[test]
fn query_validation() {
    assert!(MlQuery { alpha: 1.5, beta: 1.0, z: 0.0 }.evaluate().is_err());
    assert!(MlQuery { alpha: 0.5, beta: -1.0, z: 0.0 }.evaluate().is_err());
    assert!(MlQuery { alpha: 0.5, beta: 1.0, z: -1e5 }.evaluate().is_err());
}

#[test]
fn cdf_is_integral_of_density() {
    let alphas = [0.55, 0.6, 0.7, 0.75, 0.9];
    let lams = [0.5, 1.0, 2.0, 4.0];
    let mut checked = 0;
    for (i, &a) in alphas.iter().enumerate() {
        for (j, &lam) in lams.iter().enumerate() {
            let t = 0.15 + 0.1 * ((i * 4 + j) % 9) as f64;
            // u = x^α removes the x^{α-1} singularity at 0.
            let g = |u: f64| {
                if u == 0.0 {
                    return lam * rough_inar::mlf::ml(a, a, 0.0).unwrap() / a;
                }
                let x = u.powf(1.0 / a);
                f_alpha_lambda(a, lam, x).unwrap() * x.powf(1.0 - a) / a
            };
            let q = integrate(g, 0.0, t.powf(a), 1e-13, 1e-12);
            let closed = F_alpha_lambda(a, lam, t).unwrap();
            assert!((q.value - closed).abs() <= 1e-6, "α={a} λ={lam} t={t}: {} vs {closed}", q.value);
            checked += 1;
        }
    }
    assert_eq!(checked, 20);
}

#[test]
fn kernel_functions_at_alpha_one() {
    for t in [0.1, 0.5, 1.0, 3.0] {
        assert!((F_alpha_lambda(1.0, 1.5, t).unwrap() - (1.0 - (-1.5 * t).exp())).abs() < 1e-15);
        assert!((f_alpha_lambda(1.0, 1.5, t).unwrap() - 1.5 * (-1.5 * t).exp()).abs() < 1e-15);
    }
}

#[test]
fn cdf_is_monotone_and_bounded() {
    let mut prev = 0.0;
    for k in 1..=400 {
        let t = f64::from(k) * 0.05;
        let v = F_alpha_lambda(0.7, 1.0, t).unwrap();
        assert!(v >= prev && v < 1.0, "t = {t}");
        prev = v;
    }
}

#[test]
fn reference_table() {
    let text = include_str!("data/ml_reference.txt");
    let mut worst = 0.0f64;
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        let v: Vec<f64> = line.split_whitespace().map(|s| s.parse().unwrap()).collect();
        let e = ml_detailed(v[0], v[1], v[2]).unwrap();
        let err = (e.value - v[3]).abs();
        worst = worst.max(err / v[3].abs().max(1e-2));
        assert!(
            err <= 1e-13 + 1e-12 * v[3].abs(),
            "E_{{{},{}}}({}) = {} via {:?}, want {}",
            v[0],
            v[1],
            v[2],
            e.value,
            e.method,
            v[3]
        );
    }
    assert!(worst < 1e-11);
}
