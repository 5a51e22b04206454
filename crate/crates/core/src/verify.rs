//! Independent certification of computed solutions and of the q-calculus
//! identities.
//!
//! Nothing in here re-runs a solver on a stored solution: residuals are
//! formed from the stored lattice values alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use crate::duhamel::{classical_first_order_closed_form, solve_q_first, DuhamelOptions};
use crate::error::{f64_of, Error, Result};
use crate::linalg::{max_abs_vec, Matrix};
use crate::operators::{LinearOperator, SignConvention};
use crate::propagator::{CauchyProblem, Forcing, LatticeSolution, PolynomialForcing};
use crate::qcore::{
    inverse_jackson_derivative, jackson_derivative, jackson_integral, q_leibniz_parametric,
    rubin_derivative, QParam, ScalarField, TimeLattice,
};
use crate::scalar::Real;

/// Default certification tolerance, matched to the default depths.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Default seed for the randomized identity suite.
pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualPoint<T> {
    pub t: T,
    /// Max-norm of `D_q u - A u - f` at `t`.
    pub residual: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport<T> {
    pub points: Vec<ResidualPoint<T>>,
    pub max_residual: T,
    /// Largest `eps (|u(t)| + |u(qt)|) / (t(1-q))`: the residual that one
    /// rounding of the stored values alone can produce.
    pub roundoff_floor: T,
    /// Largest residual seen in each state component.
    pub component_max: Vec<T>,
    pub initial_errors: Vec<T>,
    pub tolerance: T,
    pub pass: bool,
    pub lattice_depth: usize,
    pub integral_depth: usize,
    pub provenance: String,
}

impl<T: Real> ResidualReport<T> {
    pub fn with_initial_errors(mut self, errors: Vec<T>) -> Self {
        self.initial_errors = errors;
        self.pass = self.evaluate_pass();
        self
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn max_initial_error(&self) -> T {
        max_abs_vec(&self.initial_errors)
    }

    fn evaluate_pass(&self) -> bool {
        self.max_residual <= self.tolerance && self.max_initial_error() <= self.tolerance
    }
}

/// Times sorted ascending, as indices into the solution.
fn ascending<T: Real>(solution: &LatticeSolution<T>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..solution.len()).collect();
    idx.sort_by(|&a, &b| {
        solution.times()[a]
            .partial_cmp(&solution.times()[b])
            .expect("finite times")
    });
    idx
}

fn find_time<T: Real>(times: &[T], order: &[usize], t: T) -> Option<usize> {
    let tol = T::lit(1e-12) * t.abs();
    let pos = order.partition_point(|&i| times[i] < t - tol);
    order
        .get(pos)
        .copied()
        .filter(|&i| (times[i] - t).abs() <= tol)
}

/// Lattice residual `(u(t) - u(qt)) / (t(1-q)) - A u(t) - f(t)` at every
/// stored point except the deepest one.
pub fn q_residual<T: Real>(
    solution: &LatticeSolution<T>,
    a: &Matrix<T>,
    forcing: &dyn Forcing<T>,
    q: QParam<T>,
    tolerance: T,
) -> Result<ResidualReport<T>> {
    let dim = solution.dim();
    if a.rows() != dim || forcing.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: a.rows(),
            context: "residual operator vs stored state",
        });
    }
    if solution.len() < 2 {
        return Err(Error::InsufficientDepth(
            "residual needs at least two lattice points".into(),
        ));
    }
    let times = solution.times();
    let order = ascending(solution);
    let deepest = order[0];
    let mut points = Vec::with_capacity(solution.len() - 1);
    let mut component_max = vec![T::zero(); dim];
    let mut roundoff_floor = T::zero();
    let mut au = vec![T::zero(); dim];
    let mut f = vec![T::zero(); dim];
    for (i, &t) in times.iter().enumerate() {
        if i == deepest {
            continue;
        }
        let below = find_time(times, &order, q.value() * t).ok_or(Error::Coverage(f64_of(t)))?;
        let u = &solution.values()[i];
        let uq = &solution.values()[below];
        a.mul_vec_into(u, &mut au);
        forcing.eval_into(t, &mut f);
        let scale = t * q.gap();
        let size = max_abs_vec(u) + max_abs_vec(uq);
        roundoff_floor = roundoff_floor.max(T::epsilon() * size / scale);
        let mut norm = T::zero();
        for c in 0..dim {
            let r = ((u[c] - uq[c]) / scale - au[c] - f[c]).abs();
            component_max[c] = component_max[c].max(r);
            norm = norm.max(r);
        }
        points.push(ResidualPoint { t, residual: norm });
    }
    let max_residual = points.iter().fold(T::zero(), |m, p| m.max(p.residual));
    let mut report = ResidualReport {
        points,
        max_residual,
        roundoff_floor,
        component_max,
        initial_errors: Vec::new(),
        tolerance,
        pass: false,
        lattice_depth: solution.meta.lattice_depth,
        integral_depth: solution.meta.integral_depth,
        provenance: String::new(),
    };
    report.pass = report.evaluate_pass();
    Ok(report)
}

/// Compares the deepest stored values (and discrete `D_q^j` estimates built
/// from them) with the initial data. One entry per datum.
///
/// For a single order-`k` equation, `D_q^j u` is estimated at the `j`-th
/// lattice point above the deepest one from the `u` block alone. For block
/// systems each layout component at the deepest point is compared directly.
pub fn initial_condition_check<T: Real>(
    solution: &LatticeSolution<T>,
    problem: &CauchyProblem<T>,
) -> Result<Vec<T>> {
    let order = ascending(solution);
    let times = solution.times();
    let n = problem.component_dim();
    if problem.block().is_some() {
        let sys = problem.first_order()?;
        let deepest = &solution.values()[order[0]];
        return Ok(sys
            .layout
            .spans()
            .iter()
            .map(|span| {
                let diff: Vec<T> = span
                    .clone()
                    .map(|c| deepest[c] - sys.initial_state[c])
                    .collect();
                max_abs_vec(&diff)
            })
            .collect());
    }
    let k = problem.order();
    if order.len() < k {
        return Err(Error::InsufficientDepth(format!(
            "order-{k} initial check needs {k} lattice points, solution has {}",
            order.len()
        )));
    }
    let q = problem.lattice().q();
    // level[i] holds D^j u at times[order[i + j]]
    let mut level: Vec<Vec<T>> = order[..k]
        .iter()
        .map(|&i| solution.values()[i][..n].to_vec())
        .collect();
    let mut errors = Vec::with_capacity(k);
    for j in 0..k {
        let diff: Vec<T> = level[0]
            .iter()
            .zip(&problem.initial()[j])
            .map(|(a, b)| *a - *b)
            .collect();
        errors.push(max_abs_vec(&diff));
        if j + 1 == k {
            break;
        }
        let mut next = Vec::with_capacity(level.len() - 1);
        for w in 0..level.len() - 1 {
            let t_hi = times[order[w + j + 1]];
            let t_lo = times[order[w + j]];
            if ((q.value() * t_hi - t_lo) / t_lo).abs() > T::lit(1e-12) {
                return Err(Error::Coverage(f64_of(t_hi)));
            }
            let scale = t_hi * q.gap();
            next.push(
                level[w + 1]
                    .iter()
                    .zip(&level[w])
                    .map(|(a, b)| (*a - *b) / scale)
                    .collect(),
            );
        }
        level = next;
    }
    Ok(errors)
}

/// Brute-force Jackson integral `(1-q) t sum_{m=0}^{depth} q^m f(t q^m)` with
/// powers taken directly rather than by recurrence.
pub fn oracle_q_integral<T: Real>(f: &impl ScalarField<T>, t: T, q: QParam<T>, depth: usize) -> Result<T> {
    let mut acc = T::zero();
    for m in 0..=depth {
        let w = q.value().powi(m as i32);
        let v = f.eval(t * w);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                what: "oracle integrand",
                at: f64_of(t * w),
            });
        }
        acc += w * v;
    }
    Ok(q.gap() * t * acc)
}

pub const ORACLE_DEPTH: usize = 2000;

/// Scalar affine family `D u = lambda u + f`, `u(0) = u0`, constant `f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarFamily<T> {
    pub lambda: T,
    pub forcing: T,
    pub u0: T,
    pub t_max: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitStudyOptions<T> {
    pub integral_depth: usize,
    /// Lattice depth is chosen so that `t_min <= floor_factor (1-q) t_max`.
    pub floor_factor: T,
    pub min_depth: usize,
}

impl<T: Real> Default for LimitStudyOptions<T> {
    fn default() -> Self {
        Self {
            integral_depth: 50,
            floor_factor: T::lit(0.05),
            min_depth: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitRow<T> {
    pub q: T,
    pub lattice_depth: usize,
    pub sup_error: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitStudy<T> {
    pub rows: Vec<LimitRow<T>>,
    /// Whether `sup_error` strictly decreases down the rows; `None` for a
    /// single row.
    pub monotone: Option<bool>,
}

/// Sup-distance, over each q-lattice, between the q-Duhamel solution of the
/// family and the classical closed form.
pub fn limit_study<T: Real>(
    family: &ScalarFamily<T>,
    q_list: &[T],
    opts: &LimitStudyOptions<T>,
) -> Result<LimitStudy<T>> {
    if q_list.is_empty() {
        return Err(Error::Configuration("limit study needs at least one q".into()));
    }
    let mut rows = Vec::with_capacity(q_list.len());
    for &qv in q_list {
        let q = QParam::new(qv)?;
        let target = (opts.floor_factor * q.gap()).ln() / qv.ln();
        let depth = target.ceil().to_usize().unwrap_or(0).max(opts.min_depth);
        let lattice = TimeLattice::new(family.t_max, q, depth)?;
        let problem = CauchyProblem::equation(
            1,
            LinearOperator::scalar(family.lambda),
            SignConvention::MinusL,
            Arc::new(PolynomialForcing::constant(vec![family.forcing])),
            vec![vec![family.u0]],
            lattice,
        )?;
        let result = solve_q_first(
            &problem,
            &DuhamelOptions {
                integral_depth: opts.integral_depth,
                reuse_chains: true,
                ..Default::default()
            },
        )?;
        let sup_error = result
            .solution
            .times()
            .iter()
            .zip(result.solution.values())
            .map(|(&t, v)| {
                (v[0] - classical_first_order_closed_form(family.lambda, family.forcing, family.u0, t)).abs()
            })
            .fold(T::zero(), T::max);
        rows.push(LimitRow {
            q: qv,
            lattice_depth: depth,
            sup_error,
        });
    }
    let monotone = (rows.len() > 1).then(|| rows.windows(2).all(|w| w[1].sup_error < w[0].sup_error));
    Ok(LimitStudy { rows, monotone })
}

/// Discrepancy between the five-point Rubin operator and `D_q + D_{1/q}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RubinProbe<T> {
    pub q: T,
    pub x: T,
    pub rubin: T,
    pub jackson_sum: T,
    pub discrepancy: T,
}

pub fn rubin_relation_probe<T: Real>(f: &impl ScalarField<T>, x: T, q: QParam<T>) -> Result<RubinProbe<T>> {
    let rubin = rubin_derivative(f, x, q)?;
    let jackson_sum = jackson_derivative(f, x, q)? + inverse_jackson_derivative(f, x, q)?;
    Ok(RubinProbe {
        q: q.value(),
        x,
        rubin,
        jackson_sum,
        discrepancy: (rubin - jackson_sum).abs(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentitySuiteConfig<T> {
    pub q_list: Vec<T>,
    pub degree_bound: usize,
    pub count: usize,
    pub integral_depth: usize,
    pub tolerance: T,
    pub seed: u64,
}

impl<T: Real> Default for IdentitySuiteConfig<T> {
    fn default() -> Self {
        Self {
            q_list: vec![T::lit(0.3), T::lit(0.5), T::lit(0.9)],
            degree_bound: 6,
            count: 100,
            integral_depth: 200,
            tolerance: T::lit(1e-9),
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck<T> {
    pub name: &'static str,
    pub q: T,
    pub cases: usize,
    pub max_error: T,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport<T> {
    pub checks: Vec<IdentityCheck<T>>,
    pub probes: Vec<RubinProbe<T>>,
    pub tolerance: T,
    pub seed: u64,
    /// All identity checks passed; the Rubin probes are reported, not judged.
    pub pass: bool,
}

/// Dense univariate polynomial, `coeffs[p]` multiplying `x^p`.
#[derive(Clone, Debug)]
struct Poly<T>(Vec<T>);

impl<T: Real> Poly<T> {
    fn random(rng: &mut ChaCha8Rng, degree_bound: usize) -> Self {
        let degree = rng.gen_range(0..=degree_bound);
        Self((0..=degree).map(|_| T::lit(rng.gen_range(-1.0..=1.0))).collect())
    }

    fn eval(&self, x: T) -> T {
        self.0.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
    }

    /// `D_q` of the polynomial via the monomial rule, as coefficients.
    fn q_derivative(&self, q: QParam<T>) -> Self {
        Self(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(p, &c)| c * q.bracket_int(p as u32))
                .collect(),
        )
    }
}

/// Bivariate polynomial `sum c_ij x^i t^j` with `i + j <= degree`.
#[derive(Clone, Debug)]
struct Poly2<T>(Vec<(usize, usize, T)>);

impl<T: Real> Poly2<T> {
    fn random(rng: &mut ChaCha8Rng, degree_bound: usize) -> Self {
        let degree = rng.gen_range(0..=degree_bound);
        let mut terms = Vec::new();
        for i in 0..=degree {
            for j in 0..=degree - i {
                terms.push((i, j, T::lit(rng.gen_range(-1.0..=1.0))));
            }
        }
        Self(terms)
    }

    fn eval(&self, x: T, t: T) -> T {
        self.0
            .iter()
            .map(|&(i, j, c)| c * x.powi(i as i32) * t.powi(j as i32))
            .sum()
    }

    /// Closed form of `D_q F(x)` for `F(x) = int_0^x f(x, t) d_q t`, using
    /// `int_0^x t^j d_q t = x^{j+1} / [j+1]_q` and the monomial rule.
    fn leibniz_exact(&self, x: T, q: QParam<T>) -> T {
        self.0
            .iter()
            .map(|&(i, j, c)| {
                let n = (i + j + 1) as u32;
                c * q.bracket_int(n) / q.bracket_int(j as u32 + 1) * x.powi((i + j) as i32)
            })
            .sum()
    }
}

fn rel_err<T: Real>(got: T, expected: T) -> T {
    (got - expected).abs() / T::one().max(expected.abs())
}

/// Randomized polynomial checks of the monomial rule, the q-product rule,
/// the fundamental theorem and both forms of the parametric q-Leibniz rule,
/// plus the Rubin-relation probe on `f(x) = x` at `x = 1`.
///
/// Jackson integrals enter the checks with their geometric tail
/// extrapolation added.
pub fn identity_suite<T: Real>(config: &IdentitySuiteConfig<T>) -> Result<IdentityReport<T>> {
    if config.degree_bound < 1 {
        return Err(Error::Configuration("degree bound must be at least 1".into()));
    }
    let tol = config.tolerance;
    let depth = config.integral_depth;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut checks = Vec::new();
    let mut probes = Vec::new();
    for &qv in &config.q_list {
        let q = QParam::new(qv)?;
        let mut record = |name, cases, max_error: T| {
            checks.push(IdentityCheck {
                name,
                q: qv,
                cases,
                max_error,
                pass: max_error <= tol,
            });
        };

        let mut err = T::zero();
        let mut cases = 0;
        for n in 1..=config.degree_bound.max(8) {
            for x in [T::lit(0.25), T::one(), T::two()] {
                let d = jackson_derivative(&|y: T| y.powi(n as i32), x, q)?;
                let expected = q.bracket_int(n as u32) * x.powi(n as i32 - 1);
                err = err.max(rel_err(d, expected));
                cases += 1;
            }
        }
        record("monomial_rule", cases, err);

        let mut err = T::zero();
        for _ in 0..config.count {
            let f = Poly::random(&mut rng, config.degree_bound);
            let g = Poly::random(&mut rng, config.degree_bound);
            let x = T::lit(rng.gen_range(0.05..=1.0));
            let fg = |y: T| f.eval(y) * g.eval(y);
            let lhs = jackson_derivative(&fg, x, q)?;
            let fe = |y: T| f.eval(y);
            let ge = |y: T| g.eval(y);
            let rhs = f.eval(qv * x) * jackson_derivative(&ge, x, q)?
                + jackson_derivative(&fe, x, q)? * g.eval(x);
            err = err.max(rel_err(lhs, rhs));
        }
        record("product_rule", config.count, err);

        let mut err = T::zero();
        for _ in 0..config.count {
            let f = Poly::random(&mut rng, config.degree_bound);
            let df = f.q_derivative(q);
            let mut a = T::lit(rng.gen_range(0.0..=1.0));
            let mut x = T::lit(rng.gen_range(0.0..=1.0));
            if a > x {
                std::mem::swap(&mut a, &mut x);
            }
            let integrand = |y: T| df.eval(y);
            let sum = jackson_integral(&integrand, a, x, q, depth, tol)?;
            err = err.max(rel_err(sum.extrapolated(), f.eval(x) - f.eval(a)));
        }
        record("fundamental_theorem", config.count, err);

        let (mut e1, mut e2, mut e12) = (T::zero(), T::zero(), T::zero());
        for _ in 0..config.count {
            let f = Poly2::random(&mut rng, config.degree_bound);
            let x = T::lit(rng.gen_range(0.05..=1.0));
            let rule = |a: T, b: T| f.eval(a, b);
            let forms = q_leibniz_parametric(&rule, x, q, depth, tol)?;
            let exact = f.leibniz_exact(x, q);
            let (f1, f2) = (forms.form1.extrapolated(), forms.form2.extrapolated());
            e1 = e1.max(rel_err(f1, exact));
            e2 = e2.max(rel_err(f2, exact));
            e12 = e12.max(rel_err(f1, f2));
        }
        record("leibniz_form1", config.count, e1);
        record("leibniz_form2", config.count, e2);
        record("leibniz_equivalence", config.count, e12);

        probes.push(rubin_relation_probe(&|y: T| y, T::one(), q)?);
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(IdentityReport {
        checks,
        probes,
        tolerance: tol,
        seed: config.seed,
        pass,
    })
}
