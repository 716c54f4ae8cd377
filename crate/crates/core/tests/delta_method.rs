use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subconv_core::arith::ramanujan_sum;
use subconv_core::delta_method::*;
use subconv_core::forms::{delta_eigenvalues, GL3Coeffs};
use subconv_core::oscillatory::Bump;
use subconv_core::SpectralParams;

fn expansion(l: u64) -> DeltaExpansion {
    build_g(l, Bump::new(0.0, 1.0).with_power(4.0)).unwrap()
}

#[test]
fn detects_zero() {
    let e = expansion(1000);
    assert!((delta_eval(&e, 0).unwrap() - 1.0).abs() <= 1e-4);
    for n in [1, 17, -1000, 1000, 2000, -2000] {
        assert!(delta_eval(&e, n).unwrap().abs() <= 1e-4, "n = {n}");
    }
}

#[test]
fn random_nonzero_shifts() {
    let e = expansion(1000);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let n = loop {
            let n = rng.gen_range(-2000i64..=2000);
            if n != 0 {
                break n;
            }
        };
        assert!(delta_eval(&e, n).unwrap().abs() <= 1e-4);
    }
}

#[test]
fn inner_sums_are_ramanujan_sums() {
    let e = expansion(1000);
    for n in [0i64, 1, 12, 360, -999, 2000] {
        assert!(inner_sum_defect(&e, n) < 1e-9);
    }
    assert_eq!(ramanujan_sum(12, 0), 4);
}

#[test]
fn g_properties() {
    let e = expansion(1000);
    let rep = g_properties_check(&e);
    assert!(rep.h_bound <= 1.0);
    assert!(rep.deriv[0] <= 10.0);
    assert!(rep.tail <= 1.0);
    assert!(rep.branch_gap < 1e-9);
}

#[test]
fn effective_support() {
    let e = expansion(1000);
    for n in [0i64, 1, 999] {
        assert!(tail_fraction(&e, n, 40.0) <= 1e-6);
    }
}

#[test]
fn csv_export() {
    let e = expansion(100);
    let mut buf = Vec::new();
    export_g_csv(&e, &[1, 5], &[0.0, 0.5, 1.5], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + 6 + 1 + 2);
    assert!(text.starts_with("q,x,re,im"));
}

#[test]
fn conductor_lowering() {
    let f = delta_eigenvalues(4000).unwrap();
    let c = GL3Coeffs::sym2(f.clone());
    let (lhs, rhs) = conductor_lowering_check(&f, &c, 1000.0, 50.0, 1).unwrap();
    assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs());
    let (lhs, rhs) = conductor_lowering_check(&f, &c, 1.5, 50.0, 1).unwrap();
    assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs());
    let eis = GL3Coeffs::eisenstein(SpectralParams::new(3.0, -1.0));
    let (lhs, rhs) = conductor_lowering_check(&f, &eis, 300.0, 20.0, 2).unwrap();
    assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1e-12));
}

#[test]
fn damping_decreases_with_gap() {
    let near = v_damping(1000, 1005, 50.0);
    let far = v_damping(1000, 2400, 50.0);
    assert!(near > 0.5 && far < 1e-2);
}
