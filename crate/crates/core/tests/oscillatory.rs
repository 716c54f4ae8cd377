use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use subconv_core::oscillatory::*;
use subconv_core::Complex64;

fn fresnel(lambda: f64) -> (AmplitudeSpec, PhaseSpec) {
    (
        AmplitudeSpec::from_bump(Bump::new(0.3, 1.0)),
        PhaseSpec::quadratic(lambda, 0.3),
    )
}

#[test]
fn fresnel_magnitude() {
    let w = AmplitudeSpec::from_bump(Bump::new(0.0, 1.0));
    let lambda = 400.0;
    let v = integrate_oscillatory(&w, &PhaseSpec::quadratic(lambda, 0.0), 1e-12).unwrap();
    let expect = (PI / lambda).sqrt() * w.eval(0.0);
    assert!((v.norm() / expect - 1.0).abs() < 0.05);
}

#[test]
fn leading_term_and_slope() {
    let mut errs = Vec::new();
    for lambda in [1e2, 1e3, 1e4] {
        let (w, h) = fresnel(lambda);
        let exact = integrate_oscillatory(&w, &h, 1e-12).unwrap();
        let p0 = stationary_phase_expand(&w, &h, 1).unwrap();
        let closed = (2.0 * PI).sqrt() * Complex64::from_polar(1.0, PI / 4.0) * w.eval(0.3)
            / (2.0 * lambda).sqrt();
        assert!((p0 - closed).norm() < 1e-12 * closed.norm());
        errs.push((lambda, (p0 - exact).norm(), exact));
    }
    let (_, e1, i1) = errs[1];
    assert!(e1 / i1.norm() <= 0.05);
    let xs: Vec<f64> = errs.iter().map(|e| e.0.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    // |I| itself decays like Y^{-1/2}, so the absolute error slope is -3/2;
    // relative to |I| it is -1.
    let rel: Vec<f64> = errs.iter().map(|e| (e.1 / e.2.norm()).ln()).collect();
    let mr = rel.iter().sum::<f64>() / 3.0;
    let rel_slope = xs.iter().zip(&rel).map(|(x, y)| (x - mx) * (y - mr)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((rel_slope + 1.0).abs() <= 0.3, "relative slope {rel_slope}, absolute {slope}");
}

#[test]
fn correction_term_helps() {
    let (w, h) = fresnel(1e3);
    let exact = integrate_oscillatory(&w, &h, 1e-12).unwrap();
    let e1 = (stationary_phase_expand(&w, &h, 1).unwrap() - exact).norm();
    let e2 = (stationary_phase_expand(&w, &h, 2).unwrap() - exact).norm();
    assert!(e1 >= 3.0 * e2, "{e1} vs {e2}");
}

#[test]
fn negative_curvature_conjugates() {
    let w = AmplitudeSpec::from_bump(Bump::new(0.0, 1.0));
    let a = stationary_phase_expand(&w, &PhaseSpec::quadratic(500.0, 0.0), 2).unwrap();
    let b = stationary_phase_expand(&w, &PhaseSpec::quadratic(-500.0, 0.0), 2).unwrap();
    assert!((a - b.conj()).norm() < 1e-14);
}

#[test]
fn certificate_dominates_linear_family() {
    let w = AmplitudeSpec::from_bump(Bump::on(1.0, 2.0));
    let mut prev: Option<f64> = None;
    for lambda in [1e2, 1e3, 1e4] {
        let h = PhaseSpec::linear(lambda);
        let measured = integrate_oscillatory(&w, &h, 1e-12).unwrap().norm();
        let bound = nonstationary_certificate(&w, &h).unwrap();
        assert!(measured <= 10.0 * bound, "lambda {lambda}: {measured} vs {bound}");
        let b3 = nonstationary_certificate_with(&w, &h, 3).unwrap();
        assert!(measured <= 10.0 * b3);
        if let Some(p) = prev {
            assert!(p / bound >= 10f64.powi(5) * 0.999);
        }
        prev = Some(bound);
    }
    let b1 = nonstationary_certificate(&w, &PhaseSpec::linear(300.0)).unwrap();
    let b2 = nonstationary_certificate(&w, &PhaseSpec::linear(600.0)).unwrap();
    assert!(b1 / b2 >= 32.0 * 0.999);
}

#[test]
fn second_derivative_bounds() {
    for l2 in [10.0, 1e2, 1e3] {
        let w = AmplitudeSpec::from_bump(Bump::new(0.0, 1.0));
        let h = PhaseSpec::quadratic(l2 / 2.0, 0.0);
        let measured = integrate_oscillatory(&w, &h, 1e-12).unwrap().norm();
        let bound = second_derivative_bound_1d(&w, &h).unwrap();
        assert!(measured <= bound);
    }
    let w = AmplitudeSpec::from_bump(Bump::new(0.0, 1.0));
    let b1 = second_derivative_bound_1d(&w, &PhaseSpec::quadratic(10.0, 0.0)).unwrap();
    let b4 = second_derivative_bound_1d(&w, &PhaseSpec::quadratic(40.0, 0.0)).unwrap();
    assert!((b1 / b4 - 2.0).abs() < 1e-12);
    let cubic = PhaseSpec::new(
        Arc::new(|t| t * t * t),
        Arc::new(|t| 3.0 * t * t),
        Arc::new(|t| 6.0 * t),
        Arc::new(|_| 6.0),
        1.0,
        1.0,
        0.0,
    );
    assert!(second_derivative_bound_1d(&w, &cubic).is_err());
    let flat = AmplitudeSpec::from_fn(
        Arc::new(|x| plateau(x, 0.1, 0.9, 0.0, 1.0)),
        (0.0, 1.0),
        1.0,
        0.1,
    );
    let b = second_derivative_bound_1d(&flat, &PhaseSpec::quadratic(5.0, -1.0)).unwrap();
    assert!(b.is_finite());
}

#[test]
fn two_dimensional_bound() {
    let g = Amplitude2D::tensor_bump(Bump::new(0.0, 1.0), Bump::new(0.0, 1.0));
    let mut prev = None;
    for lambda in [1e2, 1e3] {
        let f = Phase2D::radial(lambda);
        let l = (2.0 * lambda).sqrt();
        let measured = integrate_2d(&g, &f, 200).norm();
        let bound = second_derivative_bound_2d(&g, &f, l, l, 0.0).unwrap();
        assert!(measured <= 10.0 * bound, "{measured} vs {bound}");
        prev = Some(prev.map_or(bound, |p: f64| p / bound));
    }
    let ratio = prev.unwrap();
    let predicted = (1.0 + 4f64.ln() + 2e3f64.ln()) / (1.0 + 4f64.ln() + 2e2f64.ln()) / 10.0;
    assert!((1.0 / ratio / predicted - 1.0).abs() < 1e-9);

    // Fubini: radial phase separates.
    let bump = Bump::new(0.0, 1.0);
    let one = integrate_oscillatory(
        &AmplitudeSpec::from_bump(bump),
        &PhaseSpec::quadratic(100.0, 0.0),
        1e-12,
    )
    .unwrap();
    let two = integrate_2d(&g, &Phase2D::radial(100.0), 200);
    assert!((two - one * one).norm() < 1e-8);

    let degenerate = Phase2D {
        f: Arc::new(|x, y| (x + y).powi(2)),
        f_xx: Arc::new(|_, _| 2.0),
        f_yy: Arc::new(|_, _| 2.0),
        f_xy: Arc::new(|_, _| 2.0),
    };
    assert!(second_derivative_bound_2d(&g, &degenerate, 1.4, 1.4, 0.0).is_err());
}

#[test]
fn derivative_oracles_consistent() {
    let h = PhaseSpec::quadratic(7.0, 0.2);
    assert!(h.derivative_mismatch(-1.0, 1.0, 100) < 1e-6);
    let w = AmplitudeSpec::from_bump(Bump::on(1.0, 2.0).with_power(4.0));
    for i in 1..200 {
        let x = 1.0 + i as f64 / 200.0;
        let b = Bump::on(1.0, 2.0).with_power(4.0);
        for j in 1..=4 {
            assert!(b.derivative(x, j).abs() <= 10.0 * w.x_scale / w.u_scale.powi(j as i32));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn halving_tolerance_is_stable(
        lambda in 1.0f64..300.0,
        c in -0.5f64..0.5,
        power in 0.5f64..4.0,
        quad in any::<bool>(),
    ) {
        let w = AmplitudeSpec::from_bump(Bump::new(0.0, 1.0).with_power(power));
        let h = if quad { PhaseSpec::quadratic(lambda, c) } else { PhaseSpec::linear(lambda) };
        let tol = 1e-8;
        let a = integrate_oscillatory(&w, &h, tol).unwrap();
        let b = integrate_oscillatory(&w, &h, tol / 2.0).unwrap();
        prop_assert!((a - b).norm() <= tol);
    }
}
