//! Homogeneous propagation of `D_{q,t} U = A U` on the q-time-lattice.
//!
//! One implicit step solves `(I - t(1-q) A) U(t) = U(qt)`, which is the
//! Jackson quotient rearranged, so every step is exact up to the roundoff of
//! the linear solve.

use std::sync::Arc;

use crate::error::{f64_of, Error, Result};
use crate::linalg::Matrix;
use crate::operators::{companion_kth, BlockOperator, ForcingSlot, Layout, LinearOperator, SignConvention};
use crate::qcore::{QParam, TimeLattice};
use crate::scalar::Real;

/// Time-dependent source term `t -> f(t)` with a fixed vector dimension.
pub trait Forcing<T>: Send + Sync {
    fn dim(&self) -> usize;
    fn eval_into(&self, t: T, out: &mut [T]);

    fn eval(&self, t: T) -> Vec<T>
    where
        T: Real,
    {
        let mut out = vec![T::zero(); self.dim()];
        self.eval_into(t, &mut out);
        out
    }

    /// True when the source vanishes identically.
    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug)]
pub struct ZeroForcing {
    pub dim: usize,
}

impl<T: Real> Forcing<T> for ZeroForcing {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval_into(&self, _t: T, out: &mut [T]) {
        out.fill(T::zero());
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// Per-component polynomial in `t`; `coefficients[i][p]` multiplies `t^p`.
#[derive(Clone, Debug)]
pub struct PolynomialForcing<T> {
    coefficients: Vec<Vec<T>>,
}

impl<T: Real> PolynomialForcing<T> {
    pub fn new(coefficients: Vec<Vec<T>>) -> Self {
        Self { coefficients }
    }

    pub fn constant(values: Vec<T>) -> Self {
        Self::new(values.into_iter().map(|v| vec![v]).collect())
    }

    pub fn coefficients(&self) -> &[Vec<T>] {
        &self.coefficients
    }
}

impl<T: Real> Forcing<T> for PolynomialForcing<T> {
    fn dim(&self) -> usize {
        self.coefficients.len()
    }
    fn eval_into(&self, t: T, out: &mut [T]) {
        for (o, c) in out.iter_mut().zip(&self.coefficients) {
            *o = c.iter().rev().fold(T::zero(), |acc, &a| acc * t + a);
        }
    }
    fn is_zero(&self) -> bool {
        self.coefficients.iter().flatten().all(|c| *c == T::zero())
    }
}

/// Forcing given by a closure.
pub struct FnForcing<F> {
    dim: usize,
    rule: F,
}

impl<F> FnForcing<F> {
    pub fn new(dim: usize, rule: F) -> Self {
        Self { dim, rule }
    }
}

impl<T, F> Forcing<T> for FnForcing<F>
where
    F: Fn(T, &mut [T]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval_into(&self, t: T, out: &mut [T]) {
        (self.rule)(t, out)
    }
}

/// Places physical sources into the slots of a first-order block state.
pub struct LiftedForcing<T> {
    sources: Vec<Arc<dyn Forcing<T>>>,
    slots: Vec<ForcingSlot>,
    width: usize,
}

impl<T: Real> LiftedForcing<T> {
    pub fn new(sources: Vec<Arc<dyn Forcing<T>>>, slots: Vec<ForcingSlot>, width: usize) -> Result<Self> {
        for src in &sources {
            if src.dim() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    found: src.dim(),
                    context: "forcing dimension",
                });
            }
        }
        for slot in &slots {
            if let ForcingSlot::Source(i) = slot {
                if *i >= sources.len() {
                    return Err(Error::Configuration(format!("missing forcing source #{i}")));
                }
            }
        }
        Ok(Self {
            sources,
            slots,
            width,
        })
    }
}

impl<T: Real> Forcing<T> for LiftedForcing<T> {
    fn dim(&self) -> usize {
        self.slots.len() * self.width
    }
    fn eval_into(&self, t: T, out: &mut [T]) {
        for (b, slot) in self.slots.iter().enumerate() {
            let chunk = &mut out[b * self.width..(b + 1) * self.width];
            match slot {
                ForcingSlot::Zero => chunk.fill(T::zero()),
                ForcingSlot::Source(i) => self.sources[*i].eval_into(t, chunk),
            }
        }
    }
    fn is_zero(&self) -> bool {
        self.slots.iter().all(|s| match s {
            ForcingSlot::Zero => true,
            ForcingSlot::Source(i) => self.sources[*i].is_zero(),
        })
    }
}

#[derive(Clone, Debug)]
enum Structure<T> {
    /// `D^k u -/+ L u = f` on the physical dimension of `L`.
    Equation {
        operator: LinearOperator<T>,
        sign: SignConvention,
    },
    /// First-order block system assembled from coupled equations.
    Block(BlockOperator<T>),
}

/// Linear Cauchy problem: operator, sources, initial data and time lattice.
#[derive(Clone)]
pub struct CauchyProblem<T> {
    order: usize,
    structure: Structure<T>,
    sources: Vec<Arc<dyn Forcing<T>>>,
    initial: Vec<Vec<T>>,
    lattice: TimeLattice<T>,
}

/// `D_t U = A U + F` with its initial state; what the solvers actually consume.
pub struct FirstOrderSystem<T> {
    pub a: Matrix<T>,
    pub forcing: Arc<dyn Forcing<T>>,
    pub initial_state: Vec<T>,
    pub layout: Layout,
    pub sign: SignConvention,
}

impl<T: Real> CauchyProblem<T> {
    /// `D^k u - L u = f` (or `+ L u` under [`SignConvention::PlusL`]) with data
    /// `u_0, ..., u_{k-1}`.
    pub fn equation(
        order: usize,
        operator: LinearOperator<T>,
        sign: SignConvention,
        forcing: Arc<dyn Forcing<T>>,
        initial: Vec<Vec<T>>,
        lattice: TimeLattice<T>,
    ) -> Result<Self> {
        if order < 1 {
            return Err(Error::Configuration("order k must be >= 1".into()));
        }
        if initial.len() != order {
            return Err(Error::DimensionMismatch {
                expected: order,
                found: initial.len(),
                context: "number of initial data vectors",
            });
        }
        let n = operator.dim();
        check_width(&initial, n)?;
        if forcing.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: forcing.dim(),
                context: "forcing dimension",
            });
        }
        Ok(Self {
            order,
            structure: Structure::Equation { operator, sign },
            sources: vec![forcing],
            initial,
            lattice,
        })
    }

    /// Coupled system reduced to first order by a block assembly; `initial`
    /// follows the block's initial-data layout.
    pub fn coupled(
        block: BlockOperator<T>,
        sources: Vec<Arc<dyn Forcing<T>>>,
        initial: Vec<Vec<T>>,
        lattice: TimeLattice<T>,
    ) -> Result<Self> {
        let names = block.initial_names();
        if initial.len() != names.len() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                found: initial.len(),
                context: "number of initial data vectors",
            });
        }
        check_width(&initial, block.component_dim())?;
        LiftedForcing::new(sources.clone(), block.forcing_slots().to_vec(), block.component_dim())?;
        Ok(Self {
            order: 1,
            structure: Structure::Block(block),
            sources,
            initial,
            lattice,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lattice(&self) -> &TimeLattice<T> {
        &self.lattice
    }

    pub fn initial(&self) -> &[Vec<T>] {
        &self.initial
    }

    pub fn sources(&self) -> &[Arc<dyn Forcing<T>>] {
        &self.sources
    }

    pub fn with_order_data(&self, order: usize, initial: Vec<Vec<T>>) -> Result<Self> {
        match &self.structure {
            Structure::Equation { operator, sign } => Self::equation(
                order,
                operator.clone(),
                *sign,
                self.sources[0].clone(),
                initial,
                self.lattice.clone(),
            ),
            Structure::Block(_) => Err(Error::Configuration(
                "order of a block system is fixed by its assembly".into(),
            )),
        }
    }

    pub fn with_lattice(&self, lattice: TimeLattice<T>) -> Self {
        Self {
            lattice,
            ..self.clone()
        }
    }

    /// Width of one physical component (`u`, `theta`, ...).
    pub fn component_dim(&self) -> usize {
        match &self.structure {
            Structure::Equation { operator, .. } => operator.dim(),
            Structure::Block(b) => b.component_dim(),
        }
    }

    /// The physical operator `L` when this is a single equation.
    pub fn equation_operator(&self) -> Option<(&LinearOperator<T>, SignConvention)> {
        match &self.structure {
            Structure::Equation { operator, sign } => Some((operator, *sign)),
            Structure::Block(_) => None,
        }
    }

    pub fn block(&self) -> Option<&BlockOperator<T>> {
        match &self.structure {
            Structure::Block(b) => Some(b),
            Structure::Equation { .. } => None,
        }
    }

    /// First-order reduction `D_t U = A U + F`.
    pub fn first_order(&self) -> Result<FirstOrderSystem<T>> {
        let block = match &self.structure {
            Structure::Equation { operator, sign } => companion_kth(operator, self.order, *sign)?,
            Structure::Block(b) => b.clone(),
        };
        let forcing = LiftedForcing::new(
            self.sources.clone(),
            block.forcing_slots().to_vec(),
            block.component_dim(),
        )?;
        let parts: Vec<&[T]> = self.initial.iter().map(Vec::as_slice).collect();
        let initial_state = block.layout().assemble(&parts)?;
        let sign = match &self.structure {
            Structure::Equation { sign, .. } => *sign,
            Structure::Block(b) => b.sign(),
        };
        Ok(FirstOrderSystem {
            a: block.system_matrix(),
            forcing: Arc::new(forcing),
            initial_state,
            layout: block.layout().clone(),
            sign,
        })
    }
}

fn check_width<T>(initial: &[Vec<T>], n: usize) -> Result<()> {
    for v in initial {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
                context: "initial data width",
            });
        }
    }
    Ok(())
}

/// Metadata attached to a computed solution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolutionMeta {
    pub lattice_depth: usize,
    pub integral_depth: usize,
    pub step_count: usize,
    pub warnings: Vec<String>,
}

/// Solution values on a set of time points.
///
/// For q-solvers the points are lattice points in lattice order (`t_max`
/// first); classical solvers store a uniform grid ascending from 0.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSolution<T> {
    times: Vec<T>,
    values: Vec<Vec<T>>,
    pub meta: SolutionMeta,
}

impl<T: Real> LatticeSolution<T> {
    pub fn new(times: Vec<T>, values: Vec<Vec<T>>, meta: SolutionMeta) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                found: values.len(),
                context: "solution times vs values",
            });
        }
        if let Some(first) = values.first() {
            check_width(&values, first.len())?;
        }
        for (t, v) in times.iter().zip(&values) {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Evaluation {
                    what: "solution value",
                    at: f64_of(*t),
                });
            }
        }
        Ok(Self {
            times,
            values,
            meta,
        })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Value at the stored time matching `t` to a relative `1e-12`.
    pub fn value_at(&self, t: T) -> Option<&[T]> {
        self.index_of(t).map(|i| self.values[i].as_slice())
    }

    pub fn index_of(&self, t: T) -> Option<usize> {
        let tol = T::lit(1e-12) * t.abs();
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// Restriction to a contiguous range of state components.
    pub fn component(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(|v| v[range.clone()].to_vec()).collect(),
            meta: self.meta.clone(),
        }
    }
}

/// Reusable implicit stepper for one system matrix.
pub struct ImplicitStepper<'a, T> {
    a: &'a Matrix<T>,
    q: QParam<T>,
    work: Matrix<T>,
}

impl<'a, T: Real> ImplicitStepper<'a, T> {
    pub fn new(a: &'a Matrix<T>, q: QParam<T>) -> Self {
        let n = a.rows();
        Self {
            a,
            q,
            work: Matrix::zeros(n, n),
        }
    }

    /// `U(t)` from `U(qt)`.
    pub fn step(&mut self, prev: &[T], t: T) -> Result<Vec<T>> {
        let c = t * self.q.gap();
        let n = self.a.rows();
        let pole = || Error::Pole {
            t: f64_of(t),
            eigenvalue: f64_of(c.recip()),
        };
        if n == 1 {
            let ca = c * self.a[(0, 0)];
            let denom = T::one() - ca;
            if denom.abs() <= T::lit(4.0) * T::epsilon() * T::one().max(ca.abs()) {
                return Err(pole());
            }
            return Ok(vec![prev[0] / denom]);
        }
        for i in 0..n {
            for j in 0..n {
                let id = if i == j { T::one() } else { T::zero() };
                self.work[(i, j)] = id - c * self.a[(i, j)];
            }
        }
        let lu = self.work.lu().ok_or_else(pole)?;
        Ok(lu.solve(prev))
    }
}

/// Single implicit step `(I - t(1-q) A)^{-1} U(qt)`.
pub fn step_implicit<T: Real>(value_at_qt: &[T], t: T, a: &Matrix<T>, q: QParam<T>) -> Result<Vec<T>> {
    if value_at_qt.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: value_at_qt.len(),
            context: "state dimension",
        });
    }
    ImplicitStepper::new(a, q).step(value_at_qt, t)
}

/// Homogeneous solution from the origin: seeds `u0` at the deepest lattice
/// point and steps up to `t_max`.
pub fn propagate_from_origin<T: Real>(
    u0: &[T],
    a: &Matrix<T>,
    lattice: &TimeLattice<T>,
) -> Result<LatticeSolution<T>> {
    if u0.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: u0.len(),
            context: "initial state dimension",
        });
    }
    let m = lattice.depth();
    let mut stepper = ImplicitStepper::new(a, lattice.q());
    let mut values = vec![Vec::new(); m + 1];
    values[m] = u0.to_vec();
    for j in (0..m).rev() {
        values[j] = stepper.step(&values[j + 1], lattice.point(j))?;
    }
    let mut meta = SolutionMeta {
        lattice_depth: m,
        step_count: m,
        ..Default::default()
    };
    if m < 10 {
        meta.warnings.push(format!(
            "lattice depth {m} < 10: seeding at t_min = {} is coarse",
            lattice.t_min()
        ));
    }
    LatticeSolution::new(lattice.points().to_vec(), values, meta)
}

/// Homogeneous problem launched at lattice parameter `s` with data prescribed
/// at `qs`.
#[derive(Clone, Debug)]
pub struct AuxiliaryProblem<'a, T> {
    pub s: T,
    pub data_at_qs: Vec<T>,
    pub a: &'a Matrix<T>,
    pub q: QParam<T>,
}

impl<'a, T: Real> AuxiliaryProblem<'a, T> {
    pub fn new(s: T, data_at_qs: Vec<T>, a: &'a Matrix<T>, q: QParam<T>) -> Result<Self> {
        if !(s > T::zero()) {
            return Err(Error::LatticeAlignment(format!("start parameter s = {s} must be positive")));
        }
        if data_at_qs.len() != a.rows() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                found: data_at_qs.len(),
                context: "auxiliary data dimension",
            });
        }
        Ok(Self { s, data_at_qs, a, q })
    }

    /// Number `n >= 0` with `s = t q^n`.
    fn steps_to(&self, t: T) -> Result<usize> {
        let misaligned = || {
            Error::LatticeAlignment(format!(
                "t = {t} is not reachable from s = {} on the q-lattice",
                self.s
            ))
        };
        if !(t > T::zero()) || t < self.s * (T::one() - T::lit(1e-12)) {
            return Err(misaligned());
        }
        let n = ((self.s / t).ln() / self.q.value().ln()).round();
        let n = n.to_usize().ok_or_else(misaligned)?;
        let back = t * self.q.value().powi(n as i32);
        if (back - self.s).abs() > T::lit(1e-12) * self.s {
            return Err(misaligned());
        }
        Ok(n)
    }

    /// All visited `(point, value)` pairs from `qs` up to `t`, `qs` first.
    pub fn chain(&self, t: T) -> Result<Vec<(T, Vec<T>)>> {
        let n = self.steps_to(t)?;
        let mut points = Vec::with_capacity(n + 2);
        let mut p = t;
        for _ in 0..=n + 1 {
            points.push(p);
            p = self.q.value() * p;
        }
        points.reverse();
        let mut stepper = ImplicitStepper::new(self.a, self.q);
        let mut out = Vec::with_capacity(n + 2);
        out.push((points[0], self.data_at_qs.clone()));
        for &pt in &points[1..] {
            let next = stepper.step(&out.last().expect("nonempty").1, pt)?;
            out.push((pt, next));
        }
        Ok(out)
    }
}

/// Value at `t` of the auxiliary solution started at `qs`; exact, since the
/// start is itself a lattice point.
pub fn propagate_from_lattice_point<T: Real>(aux: &AuxiliaryProblem<'_, T>, t: T) -> Result<Vec<T>> {
    let n = aux.steps_to(t)?;
    let mut stepper = ImplicitStepper::new(aux.a, aux.q);
    let mut points = Vec::with_capacity(n + 1);
    let mut p = t;
    for _ in 0..=n {
        points.push(p);
        p = aux.q.value() * p;
    }
    let mut value = aux.data_at_qs.clone();
    for &pt in points.iter().rev() {
        value = stepper.step(&value, pt)?;
    }
    Ok(value)
}
