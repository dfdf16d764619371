use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use walksum::{expm2, ExpPoly, OpCount};

const TOL: f64 = 1e-9;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Adaptive Simpson on [a, b] for complex integrands.
fn simpson<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, eps: f64) -> C64 {
    fn step<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, fa: C64, fm: C64, fb: C64, whole: C64, eps: f64, depth: u32) -> C64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.norm() <= 15.0 * eps {
            return left + right + diff / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, eps, 40)
}

fn random_poly(rng: &mut ChaCha8Rng) -> ExpPoly {
    let mut coeffs = Vec::new();
    for _ in 0..3 {
        let pole = c(rng.random_range(-3.0..3.0), 0.0);
        let deg = rng.random_range(0..3);
        let cs: Vec<C64> = (0..=deg)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        coeffs.push((pole, cs));
    }
    ExpPoly::from_terms(coeffs.iter().map(|(p, cs)| (*p, cs.as_slice())), TOL)
}

#[test]
fn convolution_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..6 {
        let a = random_poly(&mut rng);
        let b = random_poly(&mut rng);
        let h = a.conv(&b, TOL, &mut OpCount::default());
        for i in 1..=50 {
            let t = 5.0 * i as f64 / 50.0;
            let want = simpson(&|s| a.eval(s) * b.eval(t - s), 0.0, t, 1e-13);
            let err = (h.eval(t) - want).norm();
            assert!(err < 1e-9, "t {t}: {err:e}");
        }
    }
}

#[test]
fn hand_integrals() {
    let lam = 0.9;
    let e = ExpPoly::exponential(c(lam, 0.0), c(1.0, 0.0));
    let sq = e.conv(&e, TOL, &mut OpCount::default());
    let (l1, l2) = (1.4, -0.6);
    let f = ExpPoly::exponential(c(l1, 0.0), c(1.0, 0.0));
    let g = ExpPoly::exponential(c(l2, 0.0), c(1.0, 0.0));
    let fg = f.conv(&g, TOL, &mut OpCount::default());
    for &t in &[0.0, 0.5, 2.0, 7.5] {
        assert!((sq.eval(t) - t * c(0.0, -lam * t).exp()).norm() < 1e-13);
        let want = (c(0.0, -l2 * t).exp() - c(0.0, -l1 * t).exp()) / c(0.0, l1 - l2);
        assert!((fg.eval(t) - want).norm() < 1e-13);
    }
}

/// Poles on a half-integer grid: either equal or at least 0.5 apart.
fn arb_poly() -> impl Strategy<Value = ExpPoly> {
    prop::collection::vec(
        (-6i32..=6, prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..=3)),
        1..=3,
    )
    .prop_map(|terms| {
        let terms: Vec<(C64, Vec<C64>)> = terms
            .into_iter()
            .map(|(p, cs)| (c(0.5 * p as f64, 0.0), cs.into_iter().map(|(r, i)| c(r, i)).collect()))
            .collect();
        ExpPoly::from_terms(terms.iter().map(|(p, cs)| (*p, cs.as_slice())), TOL)
    })
}

const SAMPLE_T: [f64; 5] = [0.0, 0.4, 1.1, 2.5, 4.0];

fn close(a: &ExpPoly, b: &ExpPoly, scale: f64) -> bool {
    SAMPLE_T.iter().all(|&t| (a.eval(t) - b.eval(t)).norm() <= 1e-10 * scale.max(1.0))
}

fn size(p: &ExpPoly) -> f64 {
    SAMPLE_T.iter().map(|&t| p.eval(t).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convolution_commutes(a in arb_poly(), b in arb_poly()) {
        let mut ops = OpCount::default();
        let ab = a.conv(&b, TOL, &mut ops);
        let ba = b.conv(&a, TOL, &mut ops);
        prop_assert!(close(&ab, &ba, size(&ab)));
    }

    #[test]
    fn convolution_associates(a in arb_poly(), b in arb_poly(), d in arb_poly()) {
        let mut ops = OpCount::default();
        let left = a.conv(&b, TOL, &mut ops).conv(&d, TOL, &mut ops);
        let right = a.conv(&b.conv(&d, TOL, &mut ops), TOL, &mut ops);
        prop_assert!(close(&left, &right, size(&left)));
    }

    #[test]
    fn zero_annihilates(a in arb_poly()) {
        let mut ops = OpCount::default();
        prop_assert!(a.conv(&ExpPoly::zero(), TOL, &mut ops).is_zero());
        prop_assert!(ExpPoly::zero().conv(&a, TOL, &mut ops).is_zero());
    }

    #[test]
    fn expm2_is_unitary_with_real_poles(
        h00 in -5.0f64..5.0, h11 in -5.0f64..5.0, re in -3.0f64..3.0, im in -3.0f64..3.0, off in -20.0f64..20.0
    ) {
        let h = Matrix2::new(c(h00, 0.0), c(re, im), c(re, -im), c(h11, 0.0));
        let u = expm2(&h, off, TOL).unwrap();
        for p in u.entries() {
            prop_assert!(p.poles().iter().all(|z| z.im.abs() < 1e-10));
        }
        for i in 0..20 {
            let m = u.eval(0.35 * i as f64);
            let dev = (&m * m.adjoint() - nalgebra::DMatrix::<C64>::identity(2, 2)).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(dev < 1e-12, "{dev:e}");
        }
    }
}

#[test]
fn expm2_trivial_cases() {
    let zero = expm2(&Matrix2::zeros(), 0.0, TOL).unwrap();
    assert_eq!(zero.get(0, 0).poles(), &[c(0.0, 0.0)]);
    assert!(zero.get(0, 1).is_zero() && zero.get(1, 0).is_zero());
    let de = 1.7;
    let diag = expm2(&Matrix2::new(c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(de, 0.0)), 0.0, TOL).unwrap();
    for &t in &[0.0, 1.0, 3.3] {
        let m = diag.eval(t);
        assert!((m[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((m[(1, 1)] - c(0.0, -de * t).exp()).norm() < 1e-14);
        assert!(m[(0, 1)].norm() < 1e-14 && m[(1, 0)].norm() < 1e-14);
    }
}

#[test]
fn expm2_rabi_matches_dense_exponential() {
    let (om, de) = (2.3, -0.8);
    let h = Matrix2::new(c(0.0, 0.0), c(-om / 2.0, 0.0), c(-om / 2.0, 0.0), c(de, 0.0));
    let u = expm2(&h, 0.0, TOL).unwrap();
    let chi = (om * om + de * de).sqrt();
    let mut poles: Vec<f64> = u.get(0, 0).poles().iter().map(|z| z.re).collect();
    poles.sort_by(f64::total_cmp);
    assert!((poles[0] - (de - chi) / 2.0).abs() < 1e-13 && (poles[1] - (de + chi) / 2.0).abs() < 1e-13);
    for i in 0..100 {
        let t = 0.07 * i as f64;
        let want = (h * c(0.0, -t)).exp();
        let got = u.eval(t);
        for r in 0..2 {
            for s in 0..2 {
                assert!((got[(r, s)] - want[(r, s)]).norm() < 1e-12, "t {t}");
            }
        }
        let p = (om / chi).powi(2) * (chi * t / 2.0).sin().powi(2);
        assert!((got[(1, 0)].norm_sqr() - p).abs() < 1e-12);
    }
}
