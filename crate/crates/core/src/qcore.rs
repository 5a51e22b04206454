//! q-arithmetic and the q-calculus primitives.
//!
//! Everything here is a pure function of its arguments. The Jackson sums are
//! truncated at a caller-supplied depth and report a signed geometric
//! extrapolation of the dropped remainder alongside the truncated value.

use crate::error::{f64_of, Error, Result};
use crate::scalar::Real;

/// Deformation parameter `q`, strictly inside `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QParam<T> {
    q: T,
}

impl<T: Real> QParam<T> {
    pub fn new(q: T) -> Result<Self> {
        if q.is_finite() && q > T::zero() && q < T::one() {
            Ok(Self { q })
        } else {
            Err(Error::InvalidQ(f64_of(q)))
        }
    }

    #[inline]
    pub fn value(self) -> T {
        self.q
    }

    /// `1 - q`.
    #[inline]
    pub fn gap(self) -> T {
        T::one() - self.q
    }

    /// `[alpha]_q = (1 - q^alpha) / (1 - q)`.
    pub fn bracket(self, alpha: T) -> T {
        (T::one() - self.q.powf(alpha)) / self.gap()
    }

    /// Integer bracket `[n]_q = 1 + q + ... + q^(n-1)`, summed directly so
    /// that small `n` are exact in binary arithmetic.
    pub fn bracket_int(self, n: u32) -> T {
        let mut acc = T::zero();
        let mut p = T::one();
        for _ in 0..n {
            acc += p;
            p *= self.q;
        }
        acc
    }

    /// `[n]_q! = [1]_q [2]_q ... [n]_q`; the empty product is 1.
    pub fn factorial(self, n: u32) -> T {
        (1..=n).fold(T::one(), |acc, j| acc * self.bracket_int(j))
    }
}

/// `[alpha]_q`.
pub fn q_bracket<T: Real>(alpha: T, q: QParam<T>) -> T {
    q.bracket(alpha)
}

/// `[n]_q!`.
pub fn q_factorial<T: Real>(n: u32, q: QParam<T>) -> T {
    q.factorial(n)
}

/// Finite truncation `{t_max * q^m : m = 0..=depth}` of the positive q-lattice.
///
/// Points are generated by repeated multiplication, so `point(m + 1)` is
/// bit-for-bit `q * point(m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeLattice<T> {
    t_max: T,
    q: QParam<T>,
    points: Vec<T>,
}

impl<T: Real> TimeLattice<T> {
    pub fn new(t_max: T, q: QParam<T>, depth: usize) -> Result<Self> {
        if !(t_max.is_finite() && t_max > T::zero()) {
            return Err(Error::Configuration(format!(
                "lattice t_max must be positive and finite, got {t_max}"
            )));
        }
        if depth == 0 {
            return Err(Error::Configuration("lattice depth must be at least 1".into()));
        }
        let mut points = Vec::with_capacity(depth + 1);
        let mut t = t_max;
        for _ in 0..=depth {
            points.push(t);
            t = q.value() * t;
        }
        Ok(Self { t_max, q, points })
    }

    #[inline]
    pub fn t_max(&self) -> T {
        self.t_max
    }

    #[inline]
    pub fn q(&self) -> QParam<T> {
        self.q
    }

    /// Truncation depth `M`; the lattice holds `M + 1` points.
    #[inline]
    pub fn depth(&self) -> usize {
        self.points.len() - 1
    }

    #[inline]
    pub fn point(&self, m: usize) -> T {
        self.points[m]
    }

    /// Points in lattice order: `t_max` first, strictly decreasing.
    #[inline]
    pub fn points(&self) -> &[T] {
        &self.points
    }

    #[inline]
    pub fn t_min(&self) -> T {
        self.points[self.points.len() - 1]
    }

    /// Same lattice continued `extra` points further towards the origin.
    pub fn extended(&self, extra: usize) -> Self {
        Self::new(self.t_max, self.q, self.depth() + extra).expect("extension of a valid lattice")
    }

    /// Index of the lattice point equal to `t` up to a relative `1e-12`.
    pub fn index_of(&self, t: T) -> Option<usize> {
        if !(t > T::zero()) {
            return None;
        }
        let tol = T::lit(1e-12);
        // log_q(t / t_max), rounded, then confirmed against the stored point.
        let guess = ((t / self.t_max).ln() / self.q.value().ln()).round();
        let guess = guess.to_isize()?;
        (guess - 1..=guess + 1)
            .filter(|&m| m >= 0 && (m as usize) < self.points.len())
            .map(|m| m as usize)
            .find(|&m| ((self.points[m] - t) / t).abs() <= tol)
    }
}

/// A real function of one real variable.
pub trait ScalarField<T> {
    fn eval(&self, x: T) -> T;
}

impl<T, F: Fn(T) -> T> ScalarField<T> for F {
    #[inline]
    fn eval(&self, x: T) -> T {
        self(x)
    }
}

/// Values tabulated on a [`TimeLattice`]. Evaluation away from a lattice
/// point yields NaN, which the summation routines reject.
#[derive(Clone, Debug)]
pub struct TabulatedField<T> {
    lattice: TimeLattice<T>,
    values: Vec<T>,
}

impl<T: Real> TabulatedField<T> {
    pub fn new(lattice: TimeLattice<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != lattice.points().len() {
            return Err(Error::DimensionMismatch {
                expected: lattice.points().len(),
                found: values.len(),
                context: "tabulated field values",
            });
        }
        Ok(Self { lattice, values })
    }

    pub fn from_rule(lattice: TimeLattice<T>, rule: impl ScalarField<T>) -> Self {
        let values = lattice.points().iter().map(|&t| rule.eval(t)).collect();
        Self { lattice, values }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

impl<T: Real> ScalarField<T> for TabulatedField<T> {
    fn eval(&self, x: T) -> T {
        self.lattice
            .index_of(x)
            .map_or_else(T::nan, |m| self.values[m])
    }
}

fn require_nonzero<T: Real>(x: T, op: &str) -> Result<()> {
    if x == T::zero() {
        Err(Error::Domain(format!("{op} is undefined at x = 0")))
    } else {
        Ok(())
    }
}

fn finite<T: Real>(v: T, what: &'static str, at: T) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation {
            what,
            at: f64_of(at),
        })
    }
}

/// Jackson derivative `(f(x) - f(qx)) / (x (1 - q))`.
pub fn jackson_derivative<T: Real>(f: &impl ScalarField<T>, x: T, q: QParam<T>) -> Result<T> {
    require_nonzero(x, "the Jackson derivative")?;
    let d = (f.eval(x) - f.eval(q.value() * x)) / (x * q.gap());
    finite(d, "Jackson derivative", x)
}

/// Jackson derivative with parameter `1/q`: `(f(x) - f(x/q)) / (x (1 - 1/q))`.
pub fn inverse_jackson_derivative<T: Real>(
    f: &impl ScalarField<T>,
    x: T,
    q: QParam<T>,
) -> Result<T> {
    require_nonzero(x, "the inverse-parameter Jackson derivative")?;
    let qi = q.value().recip();
    let d = (f.eval(x) - f.eval(x * qi)) / (x * (T::one() - qi));
    finite(d, "inverse-parameter Jackson derivative", x)
}

/// Five-point Rubin derivative
/// `[f(x/q) + f(-x/q) - f(qx) + f(-qx) - 2 f(-x)] / (2x(1 - q))`.
pub fn rubin_derivative<T: Real>(f: &impl ScalarField<T>, x: T, q: QParam<T>) -> Result<T> {
    require_nonzero(x, "the Rubin derivative")?;
    let qv = q.value();
    let up = x / qv;
    let down = qv * x;
    let num = f.eval(up) + f.eval(-up) - f.eval(down) + f.eval(-down) - T::two() * f.eval(-x);
    finite(num / (T::two() * x * q.gap()), "Rubin derivative", x)
}

/// Truncated Jackson sum with its remainder estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacksonSum<T> {
    /// The truncated sum itself.
    pub value: T,
    /// Signed geometric extrapolation of the dropped remainder.
    pub tail_estimate: T,
    /// Set when `|tail_estimate|` exceeds the caller's tolerance.
    pub tail_warning: bool,
}

impl<T: Real> JacksonSum<T> {
    /// Truncated value plus the extrapolated remainder.
    pub fn extrapolated(&self) -> T {
        self.value + self.tail_estimate
    }
}

/// `(1-q) x sum_{m=0}^{depth} q^m f(x q^m)` and the extrapolated remainder
/// `last_term * q / (1-q)`.
fn jackson_from_zero<T: Real>(
    f: &impl ScalarField<T>,
    x: T,
    q: QParam<T>,
    depth: usize,
) -> Result<(T, T)> {
    if x == T::zero() {
        return Ok((T::zero(), T::zero()));
    }
    let qv = q.value();
    let mut weight = T::one();
    let mut point = x;
    let mut acc = T::zero();
    let mut last = T::zero();
    for _ in 0..=depth {
        let v = f.eval(point);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                what: "Jackson integrand",
                at: f64_of(point),
            });
        }
        last = weight * v;
        acc += last;
        weight *= qv;
        point = qv * point;
    }
    let scale = q.gap() * x;
    Ok((scale * acc, scale * last * qv / q.gap()))
}

/// Jackson integral `int_a^b f d_q x = int_0^b - int_0^a`, each side truncated
/// after `depth + 1` terms.
pub fn jackson_integral<T: Real>(
    f: &impl ScalarField<T>,
    a: T,
    b: T,
    q: QParam<T>,
    depth: usize,
    tail_tol: T,
) -> Result<JacksonSum<T>> {
    if !(a >= T::zero() && b >= T::zero()) {
        return Err(Error::Domain(format!(
            "Jackson integral limits must be non-negative, got [{a}, {b}]"
        )));
    }
    let (vb, tb) = jackson_from_zero(f, b, q, depth)?;
    let (va, ta) = jackson_from_zero(f, a, q, depth)?;
    let tail = tb - ta;
    Ok(JacksonSum {
        value: vb - va,
        tail_estimate: tail,
        tail_warning: tail.abs() > tail_tol,
    })
}

/// Both sides of the q-Leibniz rule for `F(x) = int_0^x f(x, t) d_q t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeibnizForms<T> {
    /// `f(qx, x) + int_0^x D_{q,x} f(x, t) d_q t`.
    pub form1: JacksonSum<T>,
    /// `f(x, x) + int_0^{qx} D_{q,x} f(x, t) d_q t`.
    pub form2: JacksonSum<T>,
}

/// Evaluates the two equivalent expressions for `D_q F(x)` where
/// `F(x) = int_0^x f(x, t) d_q t`. The derivative in the first slot is the
/// Jackson quotient.
pub fn q_leibniz_parametric<T: Real>(
    f: &impl Fn(T, T) -> T,
    x: T,
    q: QParam<T>,
    depth: usize,
    tail_tol: T,
) -> Result<LeibnizForms<T>> {
    if !(x > T::zero()) {
        return Err(Error::Domain(format!(
            "parametric q-Leibniz rule needs x > 0, got {x}"
        )));
    }
    let qx = q.value() * x;
    let dx = |t: T| (f(x, t) - f(qx, t)) / (x * q.gap());
    let i1 = jackson_integral(&dx, T::zero(), x, q, depth, tail_tol)?;
    let i2 = jackson_integral(&dx, T::zero(), qx, q, depth, tail_tol)?;
    let shift = |s: JacksonSum<T>, base: T| JacksonSum {
        value: base + s.value,
        ..s
    };
    Ok(LeibnizForms {
        form1: shift(i1, f(qx, x)),
        form2: shift(i2, f(x, x)),
    })
}

/// Representation used to evaluate the q-exponential.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExpMode {
    /// `sum_{n=0}^{terms} z^n / [n]_q!`, valid for `|z| < 1/(1-q)`.
    Series,
    /// `prod_{k>=0} (1 - (1-q) q^k z)^{-1}`: the factors `k = 0..=terms` are
    /// multiplied out and the remaining infinite tail is closed with its
    /// logarithmic series.
    #[default]
    Product,
    /// The finite product over `k = 0..=terms` only.
    PartialProduct,
}

/// q-exponential `e_q(z)`, the eigenfunction of the Jackson derivative:
/// `D_q e_q(lambda t) = lambda e_q(lambda t)`.
pub fn q_exponential<T: Real>(z: T, q: QParam<T>, mode: ExpMode, terms: usize) -> Result<T> {
    if !z.is_finite() {
        return Err(Error::Evaluation {
            what: "q-exponential argument",
            at: f64_of(z),
        });
    }
    match mode {
        ExpMode::Series => exp_series(z, q, terms),
        ExpMode::PartialProduct => partial_product(z, q, terms),
        ExpMode::Product => {
            let head = partial_product(z, q, terms)?;
            Ok(head * product_tail(z, q, terms + 1)?)
        }
    }
}

fn exp_series<T: Real>(z: T, q: QParam<T>, terms: usize) -> Result<T> {
    let radius = q.gap().recip();
    if z.abs() >= radius {
        return Err(Error::Radius {
            z: f64_of(z.abs()),
            radius: f64_of(radius),
        });
    }
    let mut term = T::one();
    let mut acc = T::one();
    for n in 1..=terms {
        term = term * z / q.bracket_int(n as u32);
        acc += term;
    }
    Ok(acc)
}

fn partial_product<T: Real>(z: T, q: QParam<T>, terms: usize) -> Result<T> {
    let mut c = q.gap() * z;
    let mut acc = T::one();
    let mut qk = T::one();
    for _ in 0..=terms {
        let factor = T::one() - c;
        if factor.abs() <= T::lit(4.0) * T::epsilon() {
            return Err(Error::Pole {
                t: f64_of(qk),
                eigenvalue: f64_of(z),
            });
        }
        acc /= factor;
        c *= q.value();
        qk *= q.value();
    }
    Ok(acc)
}

/// `prod_{k>=start} (1 - (1-q) q^k z)^{-1}
///   = exp( sum_{n>=1} c^n / (n (1 - q^n)) )` with `c = (1-q) q^start z`.
fn product_tail<T: Real>(z: T, q: QParam<T>, start: usize) -> Result<T> {
    let c = q.gap() * q.value().powi(start as i32) * z;
    if c.abs() >= T::lit(0.5) {
        return Err(Error::Configuration(format!(
            "q-exponential product needs more terms to close its tail (|c| = {})",
            f64_of(c.abs())
        )));
    }
    let mut log = T::zero();
    let mut cn = T::one();
    let mut qn = T::one();
    for n in 1..=200usize {
        cn *= c;
        qn *= q.value();
        let term = cn / (T::from_count(n) * (T::one() - qn));
        log += term;
        if term.abs() <= T::epsilon() * log.abs().max(T::min_positive_value()) {
            break;
        }
    }
    Ok(log.exp())
}
