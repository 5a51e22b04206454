use proptest::prelude::*;
use qduhamel::{
    jackson_derivative, jackson_integral, q_bracket, q_exponential, q_leibniz_parametric, rubin_derivative,
    ExpMode, QParam64, TimeLattice64,
};

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn rel(got: f64, expected: f64) -> f64 {
    (got - expected).abs() / expected.abs().max(1.0)
}

proptest! {
    #[test]
    fn monomial_rule(n in 0i32..=8, x in 0.05f64..3.0, qv in 0.05f64..0.95) {
        let q = QParam64::new(qv).unwrap();
        let d = jackson_derivative(&|y: f64| y.powi(n), x, q).unwrap();
        let expected = if n == 0 { 0.0 } else { q_bracket(n as f64, q) * x.powi(n - 1) };
        prop_assert!(rel(d, expected) <= 1e-11, "{d} vs {expected}");
    }

    #[test]
    fn product_rule(
        f in prop::collection::vec(-1.0f64..1.0, 1..7),
        g in prop::collection::vec(-1.0f64..1.0, 1..7),
        x in 0.05f64..1.0,
        qv in 0.1f64..0.95,
    ) {
        let q = QParam64::new(qv).unwrap();
        let fe = |y: f64| poly(&f, y);
        let ge = |y: f64| poly(&g, y);
        let lhs = jackson_derivative(&|y: f64| fe(y) * ge(y), x, q).unwrap();
        let rhs = fe(qv * x) * jackson_derivative(&ge, x, q).unwrap()
            + jackson_derivative(&fe, x, q).unwrap() * ge(x);
        prop_assert!(rel(lhs, rhs) <= 1e-12);
    }

    #[test]
    fn fundamental_theorem(
        f in prop::collection::vec(-1.0f64..1.0, 1..7),
        a in 0.0f64..1.0,
        x in 0.0f64..1.0,
        qv in prop::sample::select(vec![0.3, 0.5, 0.9]),
    ) {
        let q = QParam64::new(qv).unwrap();
        let fe = |y: f64| poly(&f, y);
        // D_q of a polynomial, coefficient-wise
        let df: Vec<f64> = f.iter().enumerate().skip(1).map(|(p, c)| c * q_bracket(p as f64, q)).collect();
        let sum = jackson_integral(&|y: f64| poly(&df, y), a, x, q, 200, 1e-12).unwrap();
        prop_assert!((sum.extrapolated() - (fe(x) - fe(a))).abs() <= 1e-12);
    }

    #[test]
    fn leibniz_forms_agree(
        c in prop::collection::vec(-1.0f64..1.0, 9),
        x in 0.05f64..1.0,
        qv in prop::sample::select(vec![0.3, 0.5, 0.9]),
    ) {
        let q = QParam64::new(qv).unwrap();
        // f(x, t) = sum c_ij x^i t^j over i, j < 3
        let f = |a: f64, b: f64| {
            (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| c[3 * i + j] * a.powi(i as i32) * b.powi(j as i32)).sum::<f64>()
        };
        let forms = q_leibniz_parametric(&f, x, q, 200, 1e-12).unwrap();
        prop_assert!((forms.form1.extrapolated() - forms.form2.extrapolated()).abs() <= 1e-11);
    }

    #[test]
    fn series_and_product_agree_inside_radius(
        frac in -0.9f64..0.9,
        qv in prop::sample::select(vec![0.3, 0.5, 0.7]),
    ) {
        let q = QParam64::new(qv).unwrap();
        let z = frac / (1.0 - qv);
        let s = q_exponential(z, q, ExpMode::Series, 500).unwrap();
        let p = q_exponential(z, q, ExpMode::Product, 60).unwrap();
        prop_assert!(rel(s, p) <= 1e-10, "{s} vs {p}");
    }
}

#[test]
fn jackson_derivative_classical_limit() {
    let mut prev = f64::INFINITY;
    for qv in [0.9, 0.99, 0.999] {
        let q = QParam64::new(qv).unwrap();
        let err = (jackson_derivative(&f64::sin, 1.0, q).unwrap() - 1f64.cos()).abs();
        assert!(err < prev, "q={qv}: {err} !< {prev}");
        prev = err;
    }
}

#[test]
fn rubin_derivative_classical_limit() {
    for f in [f64::sin as fn(f64) -> f64, f64::cos, |x: f64| x * x * x] {
        let h = 1e-6;
        let exact = (f(1.0 + h) - f(1.0 - h)) / (2.0 * h);
        let mut prev = f64::INFINITY;
        for qv in [0.9, 0.99, 0.999] {
            let q = QParam64::new(qv).unwrap();
            let err = (rubin_derivative(&f, 1.0, q).unwrap() - exact).abs();
            assert!(err < prev, "q={qv}: {err} !< {prev}");
            prev = err;
        }
    }
}

#[test]
fn q_exponential_is_a_jackson_eigenfunction() {
    for (qv, lambda) in [(0.5, -1.0), (0.5, 0.7), (0.9, -0.5), (0.9, 1.0)] {
        let q = QParam64::new(qv).unwrap();
        let e = |t: f64| q_exponential(lambda * t, q, ExpMode::Product, 60).unwrap();
        let lattice = TimeLattice64::new(1.0, q, 15).unwrap();
        for &t in lattice.points() {
            let d = jackson_derivative(&e, t, q).unwrap();
            assert!((d - lambda * e(t)).abs() <= 1e-9, "q={qv} lambda={lambda} t={t}");
        }
    }
}
