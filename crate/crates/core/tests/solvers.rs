use std::sync::Arc;

use proptest::prelude::*;
use qduhamel::duhamel::classical_first_order_closed_form;
use qduhamel::verify::initial_condition_check;
use qduhamel::{
    q_residual, solve_q_first, CauchyProblem64, DuhamelOptions, Evaluation, LinearOperator, Matrix64,
    PolynomialForcing, QParam64, QuadratureAnchor, SignConvention, TimeLattice64,
};

fn scalar(lambda: f64, f: Vec<f64>, u0: f64, qv: f64, m: usize) -> CauchyProblem64 {
    CauchyProblem64::equation(
        1,
        LinearOperator::scalar(lambda),
        SignConvention::MinusL,
        Arc::new(PolynomialForcing::new(vec![f])),
        vec![vec![u0]],
        TimeLattice64::new(1.0, QParam64::new(qv).unwrap(), m).unwrap(),
    )
    .unwrap()
}

fn residual(p: &CauchyProblem64, opts: &DuhamelOptions) -> f64 {
    let r = solve_q_first(p, opts).unwrap();
    let sys = p.first_order().unwrap();
    q_residual(&r.solution, &sys.a, sys.forcing.as_ref(), p.lattice().q(), 1e-8)
        .unwrap()
        .max_residual
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn residual_within_default_bound(
        lambda in -1.0f64..1.0,
        f in prop::collection::vec(-1.0f64..1.0, 1..4),
        u0 in -1.0f64..1.0,
        (qv, m) in prop::sample::select(vec![(0.9, 60usize), (0.5, 20)]),
    ) {
        let p = scalar(lambda, f, u0, qv, m);
        let r = residual(&p, &DuhamelOptions::default());
        prop_assert!(r <= 1e-8, "{r}");
    }

    #[test]
    fn superposition(
        lambda in -1.0f64..1.0,
        f1 in prop::collection::vec(-1.0f64..1.0, 1..4),
        f2 in prop::collection::vec(-1.0f64..1.0, 1..4),
        a in -1.0f64..1.0,
        b in -1.0f64..1.0,
    ) {
        let n = f1.len().max(f2.len());
        let pad = |v: &[f64]| { let mut v = v.to_vec(); v.resize(n, 0.0); v };
        let (g1, g2) = (pad(&f1), pad(&f2));
        let sum: Vec<f64> = g1.iter().zip(&g2).map(|(x, y)| x + y).collect();
        let opts = DuhamelOptions::default();
        let s1 = solve_q_first(&scalar(lambda, g1, a, 0.7, 40), &opts).unwrap().u_scalar();
        let s2 = solve_q_first(&scalar(lambda, g2, b, 0.7, 40), &opts).unwrap().u_scalar();
        let s = solve_q_first(&scalar(lambda, sum, a + b, 0.7, 40), &opts).unwrap().u_scalar();
        for i in 0..s.len() {
            prop_assert!((s[i] - s1[i] - s2[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn residual_is_deterministic(lambda in -1.0f64..1.0, u0 in -1.0f64..1.0) {
        let p = scalar(lambda, vec![1.0, -0.5], u0, 0.8, 40);
        let r = solve_q_first(&p, &DuhamelOptions::default()).unwrap();
        let sys = p.first_order().unwrap();
        let a = q_residual(&r.solution, &sys.a, sys.forcing.as_ref(), p.lattice().q(), 1e-8).unwrap();
        let b = q_residual(&r.solution, &sys.a, sys.forcing.as_ref(), p.lattice().q(), 1e-8).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn construction_identity() {
    for evaluation in [Evaluation::Nested, Evaluation::Explicit] {
        for (lambda, u0) in [(-1.0, 1.0), (1.0, 0.3), (0.5, -2.0)] {
            let p = scalar(lambda, vec![1.0, 2.0], u0, 0.5, 60);
            let r = solve_q_first(&p, &DuhamelOptions { evaluation, ..Default::default() }).unwrap();
            for ((u, w), j) in r.solution.values().iter().zip(r.homogeneous.values()).zip(&r.quadrature) {
                assert!((u[0] - (w[0] + j[0])).abs() <= 1e-14, "{evaluation:?}: {} vs {}", u[0], w[0] + j[0]);
            }
        }
    }
}

#[test]
fn initial_error_scales_with_t_min() {
    for qv in [0.5, 0.9] {
        let p = scalar(-1.0, vec![1.0], 0.0, qv, 60);
        let r = solve_q_first(&p, &DuhamelOptions::default()).unwrap();
        let e = initial_condition_check(&r.solution, &p).unwrap()[0];
        assert!(e <= 2.0 * p.lattice().t_min(), "q={qv}: {e}");
    }
}

fn sup_error_against(reference: &[f64], got: &[f64]) -> f64 {
    reference.iter().zip(got).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn quadrature_truncation_ordering() {
    let p = scalar(-1.0, vec![1.0], 1.0, 0.9, 60);
    for anchor in [QuadratureAnchor::Shared, QuadratureAnchor::PerPoint] {
        let run = |d: usize| {
            let opts = DuhamelOptions { integral_depth: d, anchor, evaluation: Evaluation::Explicit, reuse_chains: true, ..Default::default() };
            solve_q_first(&p, &opts).unwrap().u_scalar()
        };
        let reference = run(600);
        let errors: Vec<f64> = [5, 10, 20, 50, 100].into_iter().map(|d| sup_error_against(&reference, &run(d))).collect();
        for w in errors.windows(2) {
            assert!(w[0] >= w[1] - 1e-12, "{anchor:?}: {errors:?}");
        }
    }
}

#[test]
fn depth_doubling_is_consistent() {
    let p = scalar(-1.0, vec![0.0, 1.0], 0.5, 0.9, 60);
    for d in [25usize, 50, 100] {
        let a = solve_q_first(&p, &DuhamelOptions::with_depth(d)).unwrap().u_scalar();
        let b = solve_q_first(&p, &DuhamelOptions::with_depth(2 * d)).unwrap().u_scalar();
        // everything below the floor is at most t_min q^d in weight
        let bound = p.lattice().t_min() * 0.9f64.powi(d as i32);
        assert!(sup_error_against(&a, &b) <= bound, "d={d}");
    }
}

#[test]
fn closed_form_distance_shrinks_with_q() {
    let mut prev = f64::INFINITY;
    for (qv, m) in [(0.9, 80usize), (0.99, 900)] {
        let p = scalar(-1.0, vec![1.0], 0.0, qv, m);
        let r = solve_q_first(&p, &DuhamelOptions::default()).unwrap();
        let err = r
            .solution
            .times()
            .iter()
            .zip(r.u_scalar())
            .map(|(&t, u)| (u - classical_first_order_closed_form(-1.0, 1.0, 0.0, t)).abs())
            .fold(0.0, f64::max);
        assert!(err < prev);
        prev = err;
    }
}

#[test]
fn matrix_case_residual() {
    let a = Matrix64::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let p = CauchyProblem64::equation(
        1,
        LinearOperator::new(a, "swap").unwrap(),
        SignConvention::MinusL,
        Arc::new(PolynomialForcing::constant(vec![1.0, 0.0])),
        vec![vec![0.0, 0.0]],
        TimeLattice64::new(1.0, QParam64::new(0.9).unwrap(), 60).unwrap(),
    )
    .unwrap();
    let r = solve_q_first(&p, &DuhamelOptions::default()).unwrap();
    let sys = p.first_order().unwrap();
    let rep = q_residual(&r.solution, &sys.a, sys.forcing.as_ref(), p.lattice().q(), 1e-8).unwrap();
    assert!(rep.component_max.iter().all(|&c| c <= 1e-8), "{:?}", rep.component_max);
}

#[test]
fn single_precision_solver_runs() {
    use qduhamel::{CauchyProblem, QParam, TimeLattice};
    let p = CauchyProblem::<f32>::equation(
        1,
        LinearOperator::scalar(-1.0f32),
        SignConvention::MinusL,
        Arc::new(PolynomialForcing::constant(vec![1.0f32])),
        vec![vec![1.0f32]],
        TimeLattice::new(1.0f32, QParam::new(0.5f32).unwrap(), 20).unwrap(),
    )
    .unwrap();
    let r = solve_q_first(&p, &DuhamelOptions::with_depth(20)).unwrap();
    assert!(r.u_scalar().iter().all(|u| (u - 1.0).abs() <= 1e-6));
}
