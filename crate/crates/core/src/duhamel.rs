//! Duhamel composition: homogeneous part plus the integral of auxiliary
//! homogeneous propagations launched from the forcing.
//!
//! The q-solvers build
//!
//! ```text
//! u(t) = w(t) + (1-q) sum_s s v(t; s)
//! ```
//!
//! over lattice points `s <= t`, where `w` is the origin propagation and each
//! `v(.; s)` is an exact lattice propagation of the datum `F(s)` placed at
//! `qs`. The classical solvers use RK4 for `w` and `v` and the trapezoidal
//! rule in `s`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{f64_of, Error, Result};
use crate::linalg::Matrix;
use crate::operators::{
    block_first_order, block_mixed, block_second_order, BlockOperator, Layout, LinearOperator,
};
use crate::propagator::{
    propagate_from_lattice_point, propagate_from_origin, AuxiliaryProblem, CauchyProblem,
    FirstOrderSystem, Forcing, ImplicitStepper, LatticeSolution, SolutionMeta,
};
use crate::qcore::TimeLattice;
use crate::scalar::Real;

/// Lower end of the q-Duhamel quadrature.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum QuadratureAnchor {
    /// Every reported point sums down to the same floor, `integral_depth`
    /// points below the deepest lattice point. The lattice residual of the
    /// result then vanishes up to roundoff.
    #[default]
    Shared,
    /// Every reported point `t` sums `integral_depth + 1` terms
    /// `s = t q^m, m = 0..=integral_depth`. The lattice residual at `t` is
    /// then the dropped term `q^{depth+1} v(qt; t q^{depth+1})`.
    PerPoint,
}

impl QuadratureAnchor {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Shared => "shared",
            Self::PerPoint => "per_point",
        }
    }
}

/// How a shared-anchor quadrature is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Evaluation {
    /// All auxiliary chains pass through the same propagator
    /// `P(t) = (I - t(1-q)A)^{-1}` at each `t`, so the sum over `s` nests into
    /// `J(t) = P(t) (J(qt) + t(1-q) F(t))`. The solution is carried through the
    /// same recursion from `u(t_min) = u0 + J(t_min)`, which keeps roundoff in
    /// the stored values from being amplified by the lattice quotient near
    /// the origin.
    #[default]
    Nested,
    /// Term-by-term sum of auxiliary values, added to `w`.
    Explicit,
}

impl Evaluation {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Nested => "nested",
            Self::Explicit => "explicit",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DuhamelOptions {
    pub integral_depth: usize,
    pub anchor: QuadratureAnchor,
    /// Ignored (explicit sums are used) for the per-point anchor or when
    /// auxiliary values are retained.
    pub evaluation: Evaluation,
    /// Share one auxiliary chain per `s` across all reported `t`.
    pub reuse_chains: bool,
    /// Keep every `(s, v(t; s))` pair in the result.
    pub retain_auxiliary: bool,
    pub parallel: bool,
}

impl Default for DuhamelOptions {
    fn default() -> Self {
        Self {
            integral_depth: 50,
            anchor: QuadratureAnchor::Shared,
            evaluation: Evaluation::Nested,
            reuse_chains: false,
            retain_auxiliary: false,
            parallel: true,
        }
    }
}

impl DuhamelOptions {
    pub fn with_depth(integral_depth: usize) -> Self {
        Self {
            integral_depth,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuxiliarySample<T> {
    pub s: T,
    pub value: Vec<T>,
}

/// Solution together with the pieces it was assembled from.
#[derive(Clone, Debug)]
pub struct DuhamelResult<T> {
    /// Full first-order state at every reported point.
    pub solution: LatticeSolution<T>,
    /// Homogeneous part `w`.
    pub homogeneous: LatticeSolution<T>,
    /// Quadrature term per reported point (same order as `solution`).
    pub quadrature: Vec<Vec<T>>,
    /// Per reported point, the auxiliary values entering its quadrature.
    pub auxiliary: Option<Vec<Vec<AuxiliarySample<T>>>>,
    pub layout: Layout,
    pub integral_depth: usize,
    /// Filled in by the verifier.
    pub max_residual: Option<T>,
}

impl<T: Real> DuhamelResult<T> {
    /// The `u` component (first block of the layout).
    pub fn u(&self) -> LatticeSolution<T> {
        self.named("u").expect("every layout starts with u")
    }

    pub fn named(&self, name: &str) -> Option<LatticeSolution<T>> {
        self.layout
            .span_of(name)
            .map(|r| self.solution.component(r))
    }

    /// `u(t)` values in solution order, first scalar of the `u` block.
    pub fn u_scalar(&self) -> Vec<T> {
        self.solution.values().iter().map(|v| v[0]).collect()
    }
}

/// First-order q-Duhamel solve.
pub fn solve_q_first<T: Real>(
    problem: &CauchyProblem<T>,
    opts: &DuhamelOptions,
) -> Result<DuhamelResult<T>> {
    if problem.order() != 1 {
        return Err(Error::Configuration(format!(
            "solve_q_first needs order 1, got {}",
            problem.order()
        )));
    }
    let sys = problem.first_order()?;
    solve_q_system(&sys, problem.lattice(), opts)
}

/// Second-order q-Duhamel solve via the companion reduction; the auxiliary
/// state at `qs` is `(0, f(s))`.
pub fn solve_q_second<T: Real>(
    problem: &CauchyProblem<T>,
    opts: &DuhamelOptions,
) -> Result<DuhamelResult<T>> {
    if problem.order() != 2 {
        return Err(Error::Configuration(format!(
            "solve_q_second needs order 2, got {}",
            problem.order()
        )));
    }
    let sys = problem.first_order()?;
    solve_q_system(&sys, problem.lattice(), opts)
}

/// Order-`k` q-Duhamel solve; auxiliary state at `qs` is `(0, ..., 0, f(s))`.
pub fn solve_q_korder<T: Real>(
    problem: &CauchyProblem<T>,
    opts: &DuhamelOptions,
) -> Result<DuhamelResult<T>> {
    match problem.order() {
        1 => solve_q_first(problem, opts),
        2 => solve_q_second(problem, opts),
        _ => {
            let sys = problem.first_order()?;
            solve_q_system(&sys, problem.lattice(), opts)
        }
    }
}

/// q-Duhamel on an already reduced first-order system.
pub fn solve_q_system<T: Real>(
    sys: &FirstOrderSystem<T>,
    lattice: &TimeLattice<T>,
    opts: &DuhamelOptions,
) -> Result<DuhamelResult<T>> {
    let q = lattice.q();
    let m = lattice.depth();
    let dim = sys.a.rows();
    let homogeneous = propagate_from_origin(&sys.initial_state, &sys.a, lattice)?;
    let ext = lattice.extended(opts.integral_depth);
    let floor = ext.depth();

    let upper = |j: usize| match opts.anchor {
        QuadratureAnchor::Shared => floor,
        QuadratureAnchor::PerPoint => j + opts.integral_depth,
    };

    let forcing_zero = sys.forcing.is_zero();
    let sources: Vec<Vec<T>> = if forcing_zero {
        Vec::new()
    } else {
        ext.points().iter().map(|&s| sys.forcing.eval(s)).collect()
    };

    let nested = opts.evaluation == Evaluation::Nested
        && opts.anchor == QuadratureAnchor::Shared
        && !opts.retain_auxiliary;
    if nested && !forcing_zero {
        return solve_nested(sys, lattice, &ext, homogeneous, &sources, opts);
    }

    let (quadrature, auxiliary, steps) = if forcing_zero {
        (vec![vec![T::zero(); dim]; m + 1], None, 0)
    } else if opts.reuse_chains {
        quadrature_shared_chains(sys, &ext, m, &sources, &upper, opts)?
    } else {
        quadrature_per_point(sys, &ext, m, &sources, &upper, opts)?
    };

    let values: Vec<Vec<T>> = homogeneous
        .values()
        .iter()
        .zip(&quadrature)
        .map(|(w, i)| w.iter().zip(i).map(|(a, b)| *a + *b).collect())
        .collect();
    let mut meta = SolutionMeta {
        lattice_depth: m,
        integral_depth: opts.integral_depth,
        step_count: homogeneous.meta.step_count + steps,
        warnings: homogeneous.meta.warnings.clone(),
    };
    if !forcing_zero && opts.anchor == QuadratureAnchor::PerPoint {
        let tail = q.value().powi(opts.integral_depth as i32 + 1);
        if tail > T::lit(1e-8) {
            meta.warnings.push(format!(
                "per-point quadrature drops a tail of relative size {tail}"
            ));
        }
    }
    let solution = LatticeSolution::new(lattice.points().to_vec(), values, meta)?;
    Ok(DuhamelResult {
        solution,
        homogeneous,
        quadrature,
        auxiliary,
        layout: sys.layout.clone(),
        integral_depth: opts.integral_depth,
        max_residual: None,
    })
}

/// `y = P(t) (prev + t(1-q) f)`.
fn forced_step<T: Real>(stepper: &mut ImplicitStepper<'_, T>, prev: &[T], f: &[T], t: T, gap: T) -> Result<Vec<T>> {
    let c = t * gap;
    let rhs: Vec<T> = prev.iter().zip(f).map(|(p, x)| *p + c * *x).collect();
    stepper.step(&rhs, t)
}

fn solve_nested<T: Real>(
    sys: &FirstOrderSystem<T>,
    lattice: &TimeLattice<T>,
    ext: &TimeLattice<T>,
    homogeneous: LatticeSolution<T>,
    sources: &[Vec<T>],
    opts: &DuhamelOptions,
) -> Result<DuhamelResult<T>> {
    let m = lattice.depth();
    let floor = ext.depth();
    let gap = lattice.q().gap();
    let mut stepper = ImplicitStepper::new(&sys.a, lattice.q());
    let dim = sys.a.rows();

    let mut quadrature = vec![Vec::new(); m + 1];
    let mut acc = vec![T::zero(); dim];
    for i in (0..=floor).rev() {
        acc = forced_step(&mut stepper, &acc, &sources[i], ext.point(i), gap)?;
        if i <= m {
            quadrature[i] = acc.clone();
        }
    }

    let mut values = vec![Vec::new(); m + 1];
    values[m] = sys
        .initial_state
        .iter()
        .zip(&quadrature[m])
        .map(|(a, b)| *a + *b)
        .collect();
    for j in (0..m).rev() {
        values[j] = forced_step(&mut stepper, &values[j + 1], &sources[j], ext.point(j), gap)?;
    }

    let meta = SolutionMeta {
        lattice_depth: m,
        integral_depth: opts.integral_depth,
        step_count: homogeneous.meta.step_count + floor + 1 + m,
        warnings: homogeneous.meta.warnings.clone(),
    };
    let solution = LatticeSolution::new(lattice.points().to_vec(), values, meta)?;
    Ok(DuhamelResult {
        solution,
        homogeneous,
        quadrature,
        auxiliary: None,
        layout: sys.layout.clone(),
        integral_depth: opts.integral_depth,
        max_residual: None,
    })
}

type Quadrature<T> = (Vec<Vec<T>>, Option<Vec<Vec<AuxiliarySample<T>>>>, usize);

/// One independent auxiliary problem per `(t, s)` pair.
fn quadrature_per_point<T: Real>(
    sys: &FirstOrderSystem<T>,
    ext: &TimeLattice<T>,
    m: usize,
    sources: &[Vec<T>],
    upper: &(impl Fn(usize) -> usize + Sync),
    opts: &DuhamelOptions,
) -> Result<Quadrature<T>> {
    let q = ext.q();
    let dim = sys.a.rows();
    let per_t = |j: usize| -> Result<(Vec<T>, Vec<AuxiliarySample<T>>, usize)> {
        let t = ext.point(j);
        let mut acc = vec![T::zero(); dim];
        let mut kept = Vec::new();
        let mut steps = 0;
        for i in j..=upper(j) {
            let s = ext.point(i);
            let aux = AuxiliaryProblem::new(s, sources[i].clone(), &sys.a, q)?;
            let v = propagate_from_lattice_point(&aux, t)?;
            steps += i - j + 1;
            let w = q.gap() * s;
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += w * *x;
            }
            if opts.retain_auxiliary {
                kept.push(AuxiliarySample { s, value: v });
            }
        }
        Ok((acc, kept, steps))
    };
    let rows: Vec<_> = if opts.parallel {
        (0..=m).into_par_iter().map(per_t).collect::<Result<_>>()?
    } else {
        (0..=m).map(per_t).collect::<Result<_>>()?
    };
    let steps = rows.iter().map(|r| r.2).sum();
    let (quad, kept): (Vec<_>, Vec<_>) = rows.into_iter().map(|(a, k, _)| (a, k)).unzip();
    Ok((quad, opts.retain_auxiliary.then_some(kept), steps))
}

/// One chain per `s`, visiting every reported `t >= s`. Chains are computed in
/// parallel batches and accumulated in ascending `s` order, so the sums match
/// [`quadrature_per_point`] bit for bit.
fn quadrature_shared_chains<T: Real>(
    sys: &FirstOrderSystem<T>,
    ext: &TimeLattice<T>,
    m: usize,
    sources: &[Vec<T>],
    upper: &(impl Fn(usize) -> usize + Sync),
    opts: &DuhamelOptions,
) -> Result<Quadrature<T>> {
    const BATCH: usize = 256;
    let q = ext.q();
    let dim = sys.a.rows();
    let floor = ext.depth();
    // v(t_j; s_i) for every reported j in i's reach, j descending from min(i, m)
    let chain = |i: usize| -> Result<Vec<(usize, Vec<T>)>> {
        let mut stepper = ImplicitStepper::new(&sys.a, q);
        let mut out = Vec::new();
        let mut v = sources[i].clone();
        let stop = match opts.anchor {
            QuadratureAnchor::Shared => 0,
            QuadratureAnchor::PerPoint => i.saturating_sub(opts.integral_depth),
        };
        for j in (stop..=i).rev() {
            v = stepper.step(&v, ext.point(j))?;
            if j <= m && upper(j) >= i {
                out.push((j, v.clone()));
            }
        }
        Ok(out)
    };
    let mut quad = vec![vec![T::zero(); dim]; m + 1];
    let mut kept: Vec<Vec<AuxiliarySample<T>>> = vec![Vec::new(); m + 1];
    let mut steps = 0;
    let mut start = 0;
    while start <= floor {
        let end = (start + BATCH).min(floor + 1);
        let batch: Vec<_> = if opts.parallel {
            (start..end).into_par_iter().map(chain).collect::<Result<_>>()?
        } else {
            (start..end).map(chain).collect::<Result<_>>()?
        };
        for (offset, hits) in batch.into_iter().enumerate() {
            let i = start + offset;
            let s = ext.point(i);
            let w = q.gap() * s;
            steps += hits.first().map_or(0, |(j, _)| i - j + 1);
            for (j, v) in hits {
                for (a, x) in quad[j].iter_mut().zip(&v) {
                    *a += w * *x;
                }
                if opts.retain_auxiliary {
                    kept[j].push(AuxiliarySample { s, value: v });
                }
            }
        }
        start = end;
    }
    Ok((quad, opts.retain_auxiliary.then_some(kept), steps))
}

/// Fixed-step RK4 stepper for `U' = A U`.
struct Rk4<'a, T> {
    a: &'a Matrix<T>,
    h: T,
    k: [Vec<T>; 4],
    tmp: Vec<T>,
}

impl<'a, T: Real> Rk4<'a, T> {
    fn new(a: &'a Matrix<T>, h: T) -> Self {
        let n = a.rows();
        Self {
            a,
            h,
            k: std::array::from_fn(|_| vec![T::zero(); n]),
            tmp: vec![T::zero(); n],
        }
    }

    fn step(&mut self, u: &mut [T]) {
        let h = self.h;
        let half = h / T::two();
        let sixth = h / T::lit(6.0);
        let [k1, k2, k3, k4] = &mut self.k;
        self.a.mul_vec_into(u, k1);
        for (t, (x, k)) in self.tmp.iter_mut().zip(u.iter().zip(k1.iter())) {
            *t = *x + half * *k;
        }
        self.a.mul_vec_into(&self.tmp, k2);
        for (t, (x, k)) in self.tmp.iter_mut().zip(u.iter().zip(k2.iter())) {
            *t = *x + half * *k;
        }
        self.a.mul_vec_into(&self.tmp, k3);
        for (t, (x, k)) in self.tmp.iter_mut().zip(u.iter().zip(k3.iter())) {
            *t = *x + h * *k;
        }
        self.a.mul_vec_into(&self.tmp, k4);
        for (i, x) in u.iter_mut().enumerate() {
            *x += sixth * (k1[i] + T::two() * (k2[i] + k3[i]) + k4[i]);
        }
    }
}

fn check_stable<T: Real>(v: &[T], t: T) -> Result<()> {
    if v.iter().all(|x| x.is_finite() && x.abs() < T::lit(1e300).min(T::max_value())) {
        Ok(())
    } else {
        Err(Error::StepSize(format!(
            "integration overflowed near t = {}; reduce the step size",
            f64_of(t)
        )))
    }
}

/// Classical Duhamel solve of `d^k u/dt^k - L u = f` (normalised form) on a
/// uniform grid of step close to `h` covering `[0, t_max]`.
pub fn solve_classical_korder<T: Real>(problem: &CauchyProblem<T>, h: T) -> Result<DuhamelResult<T>> {
    let sys = problem.first_order()?;
    solve_classical_system(&sys, problem.lattice().t_max(), h)
}

pub fn solve_classical_system<T: Real>(
    sys: &FirstOrderSystem<T>,
    t_max: T,
    h: T,
) -> Result<DuhamelResult<T>> {
    if !(h.is_finite() && h > T::zero()) {
        return Err(Error::StepSize(format!("step h must be positive, got {h}")));
    }
    let n = (t_max / h - T::lit(1e-9)).ceil().to_usize().unwrap_or(0).max(1);
    let h_eff = t_max / T::from_count(n);
    let times: Vec<T> = (0..=n).map(|i| T::from_count(i) * h_eff).collect();
    let dim = sys.a.rows();

    let mut rk = Rk4::new(&sys.a, h_eff);
    let mut w = Vec::with_capacity(n + 1);
    let mut cur = sys.initial_state.clone();
    w.push(cur.clone());
    for &t in &times[1..] {
        rk.step(&mut cur);
        check_stable(&cur, t)?;
        w.push(cur.clone());
    }

    let mut quad = vec![vec![T::zero(); dim]; n + 1];
    if !sys.forcing.is_zero() {
        let half = h_eff / T::two();
        for (i, &s) in times.iter().enumerate() {
            let mut v = sys.forcing.eval(s);
            for (j, &t) in times.iter().enumerate().skip(i) {
                if j > i {
                    rk.step(&mut v);
                    check_stable(&v, t)?;
                }
                if j == 0 {
                    continue;
                }
                let weight = if i == 0 || i == j { half } else { h_eff };
                for (a, x) in quad[j].iter_mut().zip(&v) {
                    *a += weight * *x;
                }
            }
        }
    }

    let values: Vec<Vec<T>> = w
        .iter()
        .zip(&quad)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| *x + *y).collect())
        .collect();
    let meta = SolutionMeta {
        lattice_depth: n,
        integral_depth: n,
        step_count: n + n * (n + 1) / 2,
        warnings: Vec::new(),
    };
    let homogeneous = LatticeSolution::new(times.clone(), w, meta.clone())?;
    Ok(DuhamelResult {
        solution: LatticeSolution::new(times, values, meta)?,
        homogeneous,
        quadrature: quad,
        auxiliary: None,
        layout: sys.layout.clone(),
        integral_depth: n,
        max_residual: None,
    })
}

/// Exact solution of `u' = lambda u + f`, `u(0) = u0` with constant `f`.
pub fn classical_first_order_closed_form<T: Real>(lambda: T, f: T, u0: T, t: T) -> T {
    if lambda == T::zero() {
        u0 + f * t
    } else {
        let e = (lambda * t).exp();
        u0 * e + f * (e - T::one()) / lambda
    }
}

/// Exact solution of `u'' = lambda u + f`, `u(0) = u0`, `u'(0) = u1` with
/// constant `f`.
pub fn classical_second_order_closed_form<T: Real>(lambda: T, f: T, u0: T, u1: T, t: T) -> T {
    if lambda == T::zero() {
        u0 + u1 * t + f * t * t / T::two()
    } else if lambda > T::zero() {
        let r = lambda.sqrt();
        let shift = f / lambda;
        (u0 + shift) * (r * t).cosh() + u1 / r * (r * t).sinh() - shift
    } else {
        let r = (-lambda).sqrt();
        let shift = f / lambda;
        (u0 + shift) * (r * t).cos() + u1 / r * (r * t).sin() - shift
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoupledOrder {
    /// `u_t + L1 u + L2 theta = f`, `theta_t + L4 u + L3 theta = g`.
    First,
    /// `u_tt + L1 u + L2 theta = f`, `theta_tt + L4 u + L3 theta = g`.
    Second,
    /// `u_tt + L1 u + L2 theta = f`, `theta_t + L4 u + L3 theta = g`.
    Mixed,
}

#[derive(Clone, Debug)]
pub enum SolveMode<T> {
    Q(DuhamelOptions),
    Classical { step: T },
}

/// Coupled pair of equations in `u` and `theta`.
#[derive(Clone)]
pub struct CoupledSystem<T> {
    pub order: CoupledOrder,
    pub l1: LinearOperator<T>,
    pub l2: LinearOperator<T>,
    pub l3: LinearOperator<T>,
    pub l4: LinearOperator<T>,
    pub f: Arc<dyn Forcing<T>>,
    pub g: Arc<dyn Forcing<T>>,
    /// Data in the block layout order: `(u0, theta0)`, `(u0, u1, theta0, theta1)`
    /// or `(u0, u1, theta0)`.
    pub initial: Vec<Vec<T>>,
    pub lattice: TimeLattice<T>,
}

impl<T: Real> CoupledSystem<T> {
    pub fn block(&self) -> Result<BlockOperator<T>> {
        let (l1, l2, l3, l4) = (&self.l1, &self.l2, &self.l3, &self.l4);
        match self.order {
            CoupledOrder::First => block_first_order(l1, l2, l3, l4),
            CoupledOrder::Second => block_second_order(l1, l2, l3, l4),
            CoupledOrder::Mixed => block_mixed(l1, l2, l3, l4),
        }
    }

    pub fn problem(&self) -> Result<CauchyProblem<T>> {
        CauchyProblem::coupled(
            self.block()?,
            vec![self.f.clone(), self.g.clone()],
            self.initial.clone(),
            self.lattice.clone(),
        )
    }
}

#[derive(Clone, Debug)]
pub struct CoupledResult<T> {
    pub result: DuhamelResult<T>,
    pub u: LatticeSolution<T>,
    pub theta: LatticeSolution<T>,
}

/// Assembles the block system, solves it in the requested mode and splits
/// out the `u` and `theta` components.
pub fn solve_coupled<T: Real>(system: &CoupledSystem<T>, mode: &SolveMode<T>) -> Result<CoupledResult<T>> {
    let problem = system.problem()?;
    let result = match mode {
        SolveMode::Q(opts) => solve_q_first(&problem, opts)?,
        SolveMode::Classical { step } => solve_classical_korder(&problem, *step)?,
    };
    let u = result.named("u").expect("block layout has u");
    let theta = result.named("theta").expect("block layout has theta");
    Ok(CoupledResult { result, u, theta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::QParam;
    use crate::operators::SignConvention;
    use crate::propagator::{PolynomialForcing, ZeroForcing};

    fn q(v: f64) -> QParam<f64> {
        QParam::new(v).unwrap()
    }

    fn scalar_problem(order: usize, lambda: f64, f: f64, init: Vec<f64>, qv: f64, m: usize) -> CauchyProblem<f64> {
        let lat = TimeLattice::new(1.0, q(qv), m).unwrap();
        CauchyProblem::equation(
            order,
            LinearOperator::scalar(lambda),
            SignConvention::MinusL,
            Arc::new(PolynomialForcing::constant(vec![f])),
            init.into_iter().map(|x| vec![x]).collect(),
            lat,
        )
        .unwrap()
    }

    #[test]
    fn zero_operator_unit_forcing_gives_identity() {
        let p = scalar_problem(1, 0.0, 1.0, vec![0.0], 0.5, 60);
        let r = solve_q_first(&p, &DuhamelOptions::default()).unwrap();
        for (t, v) in r.solution.times().iter().zip(r.solution.values()) {
            assert!((v[0] - t).abs() < 1e-10, "{t}: {}", v[0]);
        }
    }

    #[test]
    fn homogeneous_reduction() {
        let lat = TimeLattice::new(1.0, q(0.5), 30).unwrap();
        let p = CauchyProblem::equation(
            1,
            LinearOperator::scalar(-1.0),
            SignConvention::MinusL,
            Arc::new(ZeroForcing { dim: 1 }),
            vec![vec![2.0]],
            lat,
        )
        .unwrap();
        let r = solve_q_first(&p, &DuhamelOptions::default()).unwrap();
        assert_eq!(r.solution.values(), r.homogeneous.values());
    }

    #[test]
    fn construction_identity() {
        let p = scalar_problem(1, -1.0, 1.0, vec![1.0], 0.9, 60);
        let r = solve_q_first(&p, &DuhamelOptions::default()).unwrap();
        for ((u, w), i) in r.solution.values().iter().zip(r.homogeneous.values()).zip(&r.quadrature) {
            assert!((u[0] - (w[0] + i[0])).abs() <= 1e-14);
        }
    }

    #[test]
    fn second_order_closed_form() {
        let qp = q(0.5);
        let p = scalar_problem(2, 0.0, 1.0, vec![0.0, 0.0], 0.5, 60);
        let r = solve_q_second(&p, &DuhamelOptions::default()).unwrap();
        for (t, v) in r.solution.times().iter().zip(r.solution.values()) {
            let exact = t * t / qp.bracket_int(2);
            assert!((v[0] - exact).abs() < 1e-9);
        }
        assert!((r.u_scalar()[0] - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn constant_is_second_order_harmonic() {
        let p = scalar_problem(2, 0.0, 0.0, vec![1.0, 0.0], 0.5, 40);
        let r = solve_q_second(&p, &DuhamelOptions::default()).unwrap();
        assert!(r.u_scalar().iter().all(|&u| u == 1.0));
    }

    #[test]
    fn third_order_closed_form() {
        let qp = q(0.5);
        let p = scalar_problem(3, 0.0, 1.0, vec![0.0; 3], 0.5, 60);
        let r = solve_q_korder(&p, &DuhamelOptions::default()).unwrap();
        let expected = 1.0 / qp.factorial(3);
        assert!((r.u_scalar()[0] - expected).abs() < 1e-9);
        assert!((expected - 0.380952).abs() < 1e-6);
    }

    #[test]
    fn korder_delegation() {
        let opts = DuhamelOptions::default();
        let p1 = scalar_problem(1, -0.7, 1.0, vec![0.3], 0.7, 40);
        let a = solve_q_korder(&p1, &opts).unwrap();
        let b = solve_q_first(&p1, &opts).unwrap();
        assert_eq!(a.solution, b.solution);
        let p2 = scalar_problem(2, -0.7, 1.0, vec![0.3, 0.1], 0.7, 40);
        let a = solve_q_korder(&p2, &opts).unwrap();
        let b = solve_q_second(&p2, &opts).unwrap();
        assert_eq!(a.solution, b.solution);
        assert!(solve_q_first(&p2, &opts).is_err());
        assert!(solve_q_second(&p1, &opts).is_err());
    }

    #[test]
    fn nested_matches_explicit_sum() {
        let lat = TimeLattice::new(1.0, q(0.8), 25).unwrap();
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, -0.5]]).unwrap();
        let p = CauchyProblem::equation(
            1,
            LinearOperator::new(a, "m").unwrap(),
            SignConvention::MinusL,
            Arc::new(PolynomialForcing::new(vec![vec![1.0, 0.5], vec![0.0, 0.0, 2.0]])),
            vec![vec![0.2, -0.1]],
            lat,
        )
        .unwrap();
        let nested = solve_q_first(&p, &DuhamelOptions::default()).unwrap();
        let explicit = solve_q_first(
            &p,
            &DuhamelOptions {
                evaluation: Evaluation::Explicit,
                ..Default::default()
            },
        )
        .unwrap();
        for (x, y) in nested.solution.values().iter().zip(explicit.solution.values()) {
            for (a, b) in x.iter().zip(y) {
                assert!((a - b).abs() <= 1e-13, "{a} vs {b}");
            }
        }
        for (x, y) in nested.quadrature.iter().zip(&explicit.quadrature) {
            for (a, b) in x.iter().zip(y) {
                assert!((a - b).abs() <= 1e-13);
            }
        }
        assert!(nested.solution.meta.step_count < explicit.solution.meta.step_count);
    }

    #[test]
    fn chain_reuse_matches_per_point_bitwise() {
        let lat = TimeLattice::new(1.0, q(0.8), 25).unwrap();
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, -0.5]]).unwrap();
        let p = CauchyProblem::equation(
            1,
            LinearOperator::new(a, "m").unwrap(),
            SignConvention::MinusL,
            Arc::new(PolynomialForcing::new(vec![vec![1.0, 0.5], vec![0.0, 0.0, 2.0]])),
            vec![vec![0.2, -0.1]],
            lat,
        )
        .unwrap();
        for anchor in [QuadratureAnchor::Shared, QuadratureAnchor::PerPoint] {
            let base = DuhamelOptions {
                integral_depth: 30,
                anchor,
                evaluation: Evaluation::Explicit,
                retain_auxiliary: true,
                ..Default::default()
            };
            let slow = solve_q_first(&p, &base).unwrap();
            let fast = solve_q_first(&p, &DuhamelOptions { reuse_chains: true, ..base.clone() }).unwrap();
            let serial = solve_q_first(&p, &DuhamelOptions { parallel: false, ..base }).unwrap();
            assert_eq!(slow.solution.values(), fast.solution.values());
            assert_eq!(slow.solution.times(), fast.solution.times());
            assert_eq!(slow.solution, serial.solution);
            assert_eq!(slow.auxiliary, fast.auxiliary);
        }
    }

    #[test]
    fn classical_first_order() {
        let p = scalar_problem(1, -1.0, 1.0, vec![0.0], 0.5, 10);
        let r = solve_classical_korder(&p, 1e-3).unwrap();
        let u1 = *r.u_scalar().last().unwrap();
        assert!((u1 - 0.632121).abs() < 1e-5);
        assert!((u1 - classical_first_order_closed_form(-1.0, 1.0, 0.0, 1.0)).abs() < 1e-6);
    }

    #[test]
    fn classical_second_order_double_integral() {
        let p = scalar_problem(2, 0.0, 1.0, vec![0.0, 0.0], 0.5, 10);
        let r = solve_classical_korder(&p, 1e-3).unwrap();
        for (t, u) in r.solution.times().iter().zip(r.u_scalar()) {
            assert!((u - t * t / 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn classical_homogeneous_and_errors() {
        let lat = TimeLattice::new(1.0, q(0.5), 10).unwrap();
        let p = CauchyProblem::equation(
            1,
            LinearOperator::scalar(-2.0),
            SignConvention::MinusL,
            Arc::new(ZeroForcing { dim: 1 }),
            vec![vec![1.0]],
            lat,
        )
        .unwrap();
        let r = solve_classical_korder(&p, 1e-2).unwrap();
        assert_eq!(r.solution.values(), r.homogeneous.values());
        assert!(matches!(solve_classical_korder(&p, 0.0), Err(Error::StepSize(_))));
        assert!(matches!(solve_classical_korder(&p, -1.0), Err(Error::StepSize(_))));
        let stiff = CauchyProblem::equation(
            1,
            LinearOperator::scalar(-1e6),
            SignConvention::MinusL,
            Arc::new(ZeroForcing { dim: 1 }),
            vec![vec![1.0]],
            TimeLattice::new(1.0, q(0.5), 10).unwrap(),
        )
        .unwrap();
        assert!(matches!(solve_classical_korder(&stiff, 1e-2), Err(Error::StepSize(_))));
    }

    #[test]
    fn second_order_closed_forms_agree_with_rk4() {
        for lambda in [-2.0, 0.0, 1.5] {
            let p = scalar_problem(2, lambda, 0.5, vec![1.0, -0.25], 0.5, 10);
            let r = solve_classical_korder(&p, 1e-3).unwrap();
            for (t, u) in r.solution.times().iter().zip(r.u_scalar()).step_by(100) {
                let e = classical_second_order_closed_form(lambda, 0.5, 1.0, -0.25, *t);
                assert!((u - e).abs() < 1e-6, "lambda {lambda} t {t}: {u} vs {e}");
            }
        }
    }

    fn coupled(order: CoupledOrder, l: [f64; 4], f: f64, g: f64, init: Vec<f64>, qv: f64) -> CoupledSystem<f64> {
        CoupledSystem {
            order,
            l1: LinearOperator::scalar(l[0]),
            l2: LinearOperator::scalar(l[1]),
            l3: LinearOperator::scalar(l[2]),
            l4: LinearOperator::scalar(l[3]),
            f: Arc::new(PolynomialForcing::constant(vec![f])),
            g: Arc::new(PolynomialForcing::constant(vec![g])),
            initial: init.into_iter().map(|x| vec![x]).collect(),
            lattice: TimeLattice::new(1.0, q(qv), 60).unwrap(),
        }
    }

    #[test]
    fn coupled_trivial_classical() {
        let sys = coupled(CoupledOrder::First, [0.0; 4], 0.0, 0.0, vec![1.0, 1.0], 0.5);
        let r = solve_coupled(&sys, &SolveMode::Classical { step: 1e-2 }).unwrap();
        assert!(r.u.values().iter().all(|v| v[0] == 1.0));
        assert!(r.theta.values().iter().all(|v| v[0] == 1.0));
    }

    #[test]
    fn coupled_hyperbolic_classical() {
        let sys = coupled(CoupledOrder::First, [0.0, 1.0, 0.0, 1.0], 0.0, 0.0, vec![1.0, 0.0], 0.5);
        let r = solve_coupled(&sys, &SolveMode::Classical { step: 1e-3 }).unwrap();
        let u1 = r.u.values().last().unwrap()[0];
        let th1 = r.theta.values().last().unwrap()[0];
        assert!((u1 - 1f64.cosh()).abs() < 1e-4);
        assert!((th1 + 1f64.sinh()).abs() < 1e-4);
    }

    #[test]
    fn coupled_q_decoupled_integral() {
        let sys = coupled(CoupledOrder::First, [0.0; 4], 1.0, 0.0, vec![0.0, 0.0], 0.5);
        let r = solve_coupled(&sys, &SolveMode::Q(DuhamelOptions::default())).unwrap();
        for ((t, u), th) in r.u.times().iter().zip(r.u.values()).zip(r.theta.values()) {
            assert!((u[0] - t).abs() < 1e-9);
            assert!(th[0].abs() < 1e-9);
        }
    }

    #[test]
    fn coupled_second_and_mixed_classical_match_closed_forms() {
        // decoupled: u'' + 1 u = 0, theta'' + 4 theta = 0
        let sys = coupled(CoupledOrder::Second, [1.0, 0.0, 4.0, 0.0], 0.0, 0.0, vec![1.0, 0.0, 0.5, 1.0], 0.5);
        let r = solve_coupled(&sys, &SolveMode::Classical { step: 1e-3 }).unwrap();
        let t = 1.0;
        let u = r.u.values().last().unwrap()[0];
        let th = r.theta.values().last().unwrap()[0];
        assert!((u - classical_second_order_closed_form(-1.0, 0.0, 1.0, 0.0, t)).abs() < 1e-8);
        assert!((th - classical_second_order_closed_form(-4.0, 0.0, 0.5, 1.0, t)).abs() < 1e-8);

        // mixed, decoupled: u'' = 1, theta' + theta = 0
        let sys = coupled(CoupledOrder::Mixed, [0.0, 0.0, 1.0, 0.0], 1.0, 0.0, vec![0.0, 0.0, 2.0], 0.5);
        let r = solve_coupled(&sys, &SolveMode::Classical { step: 1e-3 }).unwrap();
        let u = r.u.values().last().unwrap()[0];
        let th = r.theta.values().last().unwrap()[0];
        assert!((u - 0.5).abs() < 1e-6);
        assert!((th - 2.0 * (-1f64).exp()).abs() < 1e-8);
    }
}
