use subconv_core::forms::{delta_eigenvalues, GL3Coeffs};
use subconv_core::pipeline::*;
use subconv_core::{Complex64, Error};

#[test]
fn config_round_trip() {
    let cfg = ExperimentConfig::parse(
        "# tiny run\nmodel = eisenstein:3, -1\nn = 80\nk = 12  # window\nl = 5\nseed = 7\ntol.decomposition = 1e-4\nunsafe_scale = true\n",
    )
    .unwrap();
    assert_eq!(cfg.model, ModelChoice::Eisenstein { t1: 3.0, t2: -1.0 });
    assert_eq!((cfg.n, cfg.k, cfg.seed), (80.0, 12.0, 7));
    assert_eq!(cfg.tol("decomposition", 1e-3), 1e-4);
    assert!(cfg.unsafe_scale);
    assert!(matches!(ExperimentConfig::parse("colour = red"), Err(Error::Config(_))));
    assert!(matches!(ExperimentConfig::parse("n"), Err(Error::Config(_))));
    assert!(matches!(ExperimentConfig::parse("weight = 16"), Err(Error::Config(_))));
}

#[test]
fn caps_need_acknowledgement() {
    let cfg = ExperimentConfig { n: 500.0, ..Default::default() };
    assert!(matches!(
        delta_decomposed_s(&cfg, PipelineVariant::Plain),
        Err(Error::Resource { .. })
    ));
    let cfg = ExperimentConfig { n: 2e5, ..Default::default() };
    assert!(matches!(compute_s_direct(&cfg), Err(Error::Resource { .. })));
}

#[test]
fn direct_sum_basics() {
    let tiny = ExperimentConfig { n: 0.4, ..Default::default() };
    assert_eq!(compute_s_direct(&tiny).unwrap(), Complex64::new(0.0, 0.0));

    let f = delta_eigenvalues(2000).unwrap();
    let c = GL3Coeffs::sym2(f.clone());
    let t = direct_terms(&c, &f, 1, 1000.0).unwrap();
    let fwd: Complex64 = t.iter().sum();
    let back: Complex64 = t.iter().rev().sum();
    assert!((fwd - back).norm() <= 1e-12 * fwd.norm());

    let short = delta_eigenvalues(100).unwrap();
    assert!(matches!(direct_sum(&c, &short, 1, 1000.0), Err(Error::Resource { .. })));
}

#[test]
fn dyadic_pieces_recompose() {
    for x in [1.0, 1.3, 2.0, 77.7, 9999.0] {
        let s: f64 = dyadic_centres(2e4).iter().map(|r| dyadic_piece(x / r)).sum();
        assert!((s - 1.0).abs() <= 1e-12, "{x}: {s}");
    }
    assert_eq!(dyadic_piece(0.99), 0.0);
    assert_eq!(dyadic_piece(2.01), 0.0);

    let rep = dyadic_decompose_check(&ExperimentConfig { n: 1e4, ..Default::default() }).unwrap();
    assert!(rep.pass, "{}", rep.table());
    let ones = vec![Complex64::new(1.0, 0.0); 300];
    let d = dyadic_recompose(&ones, 150.0);
    assert!(d.relative <= 1e-12);
}

#[test]
fn decomposition_reproduces_direct_sum() {
    let cfg = ExperimentConfig { n: 50.0, k: 10.0, ..Default::default() };
    let d = delta_decomposed_s(&cfg, PipelineVariant::Plain).unwrap();
    assert!(d.residual <= 1e-3, "{d:?}");
    let direct = compute_s_direct(&cfg).unwrap();
    assert!((d.direct - direct).norm() <= 1e-12 * direct.norm());

    let d = delta_decomposed_s(&cfg, PipelineVariant::PrimeAveraged).unwrap();
    assert!(d.residual <= 1e-3, "{d:?}");
}

#[test]
fn indicator_isolates_one_term() {
    let f = delta_eigenvalues(400).unwrap();
    let c = GL3Coeffs::sym2(f);
    let n0 = 73;
    let d = decomposed_sum(&c, DualSequence::Indicator(n0), PipelineVariant::Plain, 1, 50.0, 10.0, 1.0).unwrap();
    let expect = c.coeff(1, n0).unwrap() * sum_weight().value(n0 as f64 / 50.0);
    assert!((d.direct - expect).norm() <= 1e-14);
    assert!((d.decomposed - expect).norm() <= 1e-8 * expect.norm(), "{d:?}");
}

#[test]
fn second_variant_weights() {
    let f = delta_eigenvalues(100).unwrap();
    let c = GL3Coeffs::sym2(f);
    let s = prime_shifts(&c, 5.0).unwrap();
    assert_eq!(s.iter().map(|x| x.0).collect::<Vec<_>>(), vec![5, 7]);
    let total: f64 = s.iter().map(|(p, w)| (w * c.coeff(1, *p).unwrap()).re).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(matches!(prime_shifts(&c, 60.0), Err(Error::Resource { .. })));
}

#[test]
fn reports_are_deterministic() {
    let cfg = ExperimentConfig::default();
    let mut a = run_suite("exponents", &cfg).unwrap();
    let mut b = run_suite("exponents", &cfg).unwrap();
    assert!(a.pass && a.verify_flags());
    assert!(a.checks.iter().any(|c| c.detail.as_deref() == Some("23/16")));
    a.wall_time_s = 0.0;
    b.wall_time_s = 0.0;
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert!(a.to_json().unwrap().contains("\"seed\": 1"));
    assert!(matches!(run_suite("nope", &cfg), Err(Error::Config(_))));
}

#[test]
fn failed_flags_survive_a_round_trip() {
    let mut rep = Report::new("x", &ExperimentConfig::default());
    rep.push(Check::at_most("small", 2.0, 1.0));
    rep.push(Check::info("seen", 3.0));
    assert!(!rep.pass && rep.verify_flags());
    let back: Report = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
    assert_eq!(back, rep);
    assert!(rep.table().contains("FAIL"));
}

#[test]
fn csv_rows() {
    let mut buf = Vec::new();
    write_csv(&["n", "residual"], &[vec![50.0, 1e-9], vec![100.0, 2e-9]], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("n,residual"));
    assert_eq!(text.lines().count(), 3);
}
