//! Matrix representations of spatial q-operators and the block/companion
//! assemblies that reduce coupled and higher-order problems to first order.
//!
//! Every solver consumes the normalised form `D_t U = A U + F`. Assemblies
//! record the [`SignConvention`] of the equation they came from so that `A`
//! can be recovered unambiguously.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::qcore::QParam;
use crate::scalar::Real;

/// Ordered set of distinct nonzero spatial points.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGrid<T> {
    points: Vec<T>,
    symmetric: bool,
    q: QParam<T>,
}

impl<T: Real> SpatialGrid<T> {
    /// Sorts the points ascending. Rejects zero, non-finite and repeated points.
    pub fn new(mut points: Vec<T>, q: QParam<T>) -> Result<Self> {
        if points.iter().any(|x| !x.is_finite() || *x == T::zero()) {
            return Err(Error::Configuration(
                "grid points must be finite and nonzero".into(),
            ));
        }
        points.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Configuration("grid points must be distinct".into()));
        }
        let mut grid = Self {
            points,
            symmetric: false,
            q,
        };
        grid.symmetric = grid.points.iter().all(|&x| grid.index_of(-x).is_some());
        Ok(grid)
    }

    /// Geometric grid `{x_max q^m : m = 0..n}` on the positive half-line.
    pub fn geometric(x_max: T, n: usize, q: QParam<T>) -> Result<Self> {
        let mut pts = Vec::with_capacity(n);
        let mut x = x_max;
        for _ in 0..n {
            pts.push(x);
            x = q.value() * x;
        }
        Self::new(pts, q)
    }

    /// Geometric grid mirrored onto the negative half-line.
    pub fn symmetric_geometric(x_max: T, n: usize, q: QParam<T>) -> Result<Self> {
        let half = Self::geometric(x_max, n, q)?;
        let mut pts = half.points.clone();
        pts.extend(half.points.iter().map(|&x| -x));
        Self::new(pts, q)
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn q(&self) -> QParam<T> {
        self.q
    }

    /// Index of the grid point matching `x` to a relative `1e-12`.
    pub fn index_of(&self, x: T) -> Option<usize> {
        let tol = T::lit(1e-12) * x.abs();
        let pos = self
            .points
            .partition_point(|&p| p < x - tol);
        (pos < self.points.len() && (self.points[pos] - x).abs() <= tol).then_some(pos)
    }

    /// q-closure map: index of `q x_i`, or `None` when it falls outside.
    pub fn q_image(&self, i: usize) -> Option<usize> {
        self.index_of(self.q.value() * self.points[i])
    }
}

/// Dense square operator with per-row boundary labels.
///
/// A row is labelled boundary when its stencil reached a point outside the
/// truncated grid and that contribution was dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearOperator<T> {
    matrix: Matrix<T>,
    label: String,
    boundary_rows: Vec<bool>,
}

impl<T: Real> LinearOperator<T> {
    pub fn new(matrix: Matrix<T>, label: impl Into<String>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                found: matrix.cols(),
                context: "operator must be square",
            });
        }
        if !matrix.is_finite() {
            return Err(Error::Configuration("operator entries must be finite".into()));
        }
        let n = matrix.rows();
        Ok(Self {
            matrix,
            label: label.into(),
            boundary_rows: vec![false; n],
        })
    }

    pub fn scalar(value: T) -> Self {
        Self::new(Matrix::scalar(value), "scalar").expect("1x1 is square")
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(Matrix::zeros(n, n), "zero").expect("square")
    }

    pub fn identity(n: usize) -> Self {
        Self::new(Matrix::identity(n), "identity").expect("square")
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn boundary_rows(&self) -> &[bool] {
        &self.boundary_rows
    }

    pub fn interior_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.boundary_rows
            .iter()
            .enumerate()
            .filter(|(_, b)| !**b)
            .map(|(i, _)| i)
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.matrix.mul_vec(x)
    }

    pub fn negated(&self) -> Self {
        Self {
            matrix: self.matrix.scaled(-T::one()),
            label: format!("-({})", self.label),
            boundary_rows: self.boundary_rows.clone(),
        }
    }
}

/// Jackson derivative on a grid with zero extension outside it.
pub fn assemble_jackson_dx<T: Real>(grid: &SpatialGrid<T>) -> LinearOperator<T> {
    let n = grid.len();
    let gap = grid.q().gap();
    let mut m = Matrix::zeros(n, n);
    let mut boundary = vec![false; n];
    for (i, &x) in grid.points().iter().enumerate() {
        let c = (x * gap).recip();
        m[(i, i)] += c;
        match grid.q_image(i) {
            Some(j) => m[(i, j)] -= c,
            None => boundary[i] = true,
        }
    }
    LinearOperator {
        matrix: m,
        label: "jackson_dx".into(),
        boundary_rows: boundary,
    }
}

/// Rubin derivative on a symmetric grid with zero extension outside it.
pub fn assemble_rubin_dx<T: Real>(grid: &SpatialGrid<T>) -> Result<LinearOperator<T>> {
    if !grid.is_symmetric() {
        return Err(Error::Configuration(
            "Rubin operator needs a grid closed under negation".into(),
        ));
    }
    let n = grid.len();
    let q = grid.q().value();
    let mut m = Matrix::zeros(n, n);
    let mut boundary = vec![false; n];
    for (i, &x) in grid.points().iter().enumerate() {
        let c = (T::two() * x * grid.q().gap()).recip();
        let stencil = [
            (x / q, T::one()),
            (-x / q, T::one()),
            (q * x, -T::one()),
            (-q * x, T::one()),
            (-x, -T::two()),
        ];
        for (point, weight) in stencil {
            match grid.index_of(point) {
                Some(j) => m[(i, j)] += weight * c,
                None => boundary[i] = true,
            }
        }
    }
    Ok(LinearOperator {
        matrix: m,
        label: "rubin_dx".into(),
        boundary_rows: boundary,
    })
}

/// How the system matrix `A` of `D_t U = A U + F` relates to the assembled
/// operator `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignConvention {
    /// Equation `D U - L U = F`, so `A = +L`.
    MinusL,
    /// Equation `D U + L U = F`, so `A = -L`.
    PlusL,
}

impl SignConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::MinusL => "minus_L",
            Self::PlusL => "plus_L",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "minus_L" => Some(Self::MinusL),
            "plus_L" => Some(Self::PlusL),
            _ => None,
        }
    }

    /// Sign multiplying `L` in `A`.
    fn factor<T: Real>(self) -> T {
        match self {
            Self::MinusL => T::one(),
            Self::PlusL => -T::one(),
        }
    }
}

/// Where a component of the first-order forcing comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForcingSlot {
    Zero,
    /// Index into the list of physical sources (`f`, `g`, ...).
    Source(usize),
}

/// Named contiguous components of a block state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    names: Vec<String>,
    spans: Vec<Range<usize>>,
}

impl Layout {
    /// `names.len()` components of equal width `width`.
    pub fn uniform<S: AsRef<str>>(names: &[S], width: usize) -> Self {
        Self {
            names: names.iter().map(|s| s.as_ref().to_string()).collect(),
            spans: (0..names.len()).map(|i| i * width..(i + 1) * width).collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn spans(&self) -> &[Range<usize>] {
        &self.spans
    }

    pub fn dim(&self) -> usize {
        self.spans.last().map_or(0, |r| r.end)
    }

    pub fn span_of(&self, name: &str) -> Option<Range<usize>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.spans[i].clone())
    }

    pub fn extract<'a, T>(&self, name: &str, state: &'a [T]) -> Option<&'a [T]> {
        self.span_of(name).map(|r| &state[r])
    }

    /// Concatenates per-component vectors in layout order.
    pub fn assemble<T: Copy>(&self, parts: &[&[T]]) -> Result<Vec<T>> {
        if parts.len() != self.spans.len() {
            return Err(Error::DimensionMismatch {
                expected: self.spans.len(),
                found: parts.len(),
                context: "number of layout components",
            });
        }
        let mut out = Vec::with_capacity(self.dim());
        for (part, span) in parts.iter().zip(&self.spans) {
            if part.len() != span.len() {
                return Err(Error::DimensionMismatch {
                    expected: span.len(),
                    found: part.len(),
                    context: "layout component width",
                });
            }
            out.extend_from_slice(part);
        }
        Ok(out)
    }
}

/// Block-structured operator with its state, forcing and initial-data layout.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockOperator<T> {
    operator: LinearOperator<T>,
    layout: Layout,
    forcing: Vec<ForcingSlot>,
    initial_names: Vec<String>,
    sign: SignConvention,
}

impl<T: Real> BlockOperator<T> {
    /// The assembled matrix `L` exactly as laid out (before the sign is applied).
    pub fn operator(&self) -> &LinearOperator<T> {
        &self.operator
    }

    pub fn matrix(&self) -> &Matrix<T> {
        self.operator.matrix()
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn forcing_slots(&self) -> &[ForcingSlot] {
        &self.forcing
    }

    pub fn initial_names(&self) -> &[String] {
        &self.initial_names
    }

    pub fn sign(&self) -> SignConvention {
        self.sign
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    /// Width of a single layout component.
    pub fn component_dim(&self) -> usize {
        self.layout.spans().first().map_or(0, ExactSizeIterator::len)
    }

    /// `A` of the normalised system `D_t U = A U + F`.
    pub fn system_matrix(&self) -> Matrix<T> {
        self.operator.matrix().scaled(self.sign.factor())
    }
}

fn same_dims<T: Real>(blocks: &[&LinearOperator<T>]) -> Result<usize> {
    let n = blocks[0].dim();
    for b in blocks {
        if b.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.dim(),
                context: "block operators must share a dimension",
            });
        }
    }
    Ok(n)
}

fn build_blocks<T: Real>(
    n: usize,
    grid: &[&[Block<'_, T>]],
) -> Matrix<T> {
    let size = grid.len();
    let mut m = Matrix::zeros(size * n, size * n);
    let ident = Matrix::identity(n);
    for (bi, row) in grid.iter().enumerate() {
        for (bj, block) in row.iter().enumerate() {
            match block {
                Block::Zero => {}
                Block::Op(op) => m.set_block(bi * n, bj * n, op.matrix()),
                Block::Ident(s) => m.set_block(bi * n, bj * n, &ident.scaled(*s)),
            }
        }
    }
    m
}

enum Block<'a, T> {
    Zero,
    Op(&'a LinearOperator<T>),
    Ident(T),
}

/// `[[L1, L2], [L4, L3]]` for the first-order coupled system
/// `u_t + L1 u + L2 theta = f`, `theta_t + L4 u + L3 theta = g`.
pub fn block_first_order<T: Real>(
    l1: &LinearOperator<T>,
    l2: &LinearOperator<T>,
    l3: &LinearOperator<T>,
    l4: &LinearOperator<T>,
) -> Result<BlockOperator<T>> {
    let n = same_dims(&[l1, l2, l3, l4])?;
    use Block::Op;
    let m = build_blocks(n, &[&[Op(l1), Op(l2)], &[Op(l4), Op(l3)]]);
    Ok(BlockOperator {
        operator: LinearOperator::new(m, "block_first_order")?,
        layout: Layout::uniform(&["u", "theta"], n),
        forcing: vec![ForcingSlot::Source(0), ForcingSlot::Source(1)],
        initial_names: vec!["u0".into(), "theta0".into()],
        sign: SignConvention::PlusL,
    })
}

/// 4x4 block companion
/// `[[0, -1, 0, 0], [L1, 0, L2, 0], [0, 0, 0, -1], [L4, 0, L3, 0]]`
/// on the state `(u, u_t, theta, theta_t)`.
pub fn block_second_order<T: Real>(
    l1: &LinearOperator<T>,
    l2: &LinearOperator<T>,
    l3: &LinearOperator<T>,
    l4: &LinearOperator<T>,
) -> Result<BlockOperator<T>> {
    let n = same_dims(&[l1, l2, l3, l4])?;
    use Block::{Ident, Op, Zero};
    let neg = -T::one();
    let m = build_blocks(
        n,
        &[
            &[Zero, Ident(neg), Zero, Zero],
            &[Op(l1), Zero, Op(l2), Zero],
            &[Zero, Zero, Zero, Ident(neg)],
            &[Op(l4), Zero, Op(l3), Zero],
        ],
    );
    Ok(BlockOperator {
        operator: LinearOperator::new(m, "block_second_order")?,
        layout: Layout::uniform(&["u", "u_t", "theta", "theta_t"], n),
        forcing: vec![
            ForcingSlot::Zero,
            ForcingSlot::Source(0),
            ForcingSlot::Zero,
            ForcingSlot::Source(1),
        ],
        initial_names: vec!["u0".into(), "u1".into(), "theta0".into(), "theta1".into()],
        sign: SignConvention::PlusL,
    })
}

/// 3x3 block matrix `[[0, -1, 0], [L1, 0, L2], [L4, 0, L3]]` for a
/// second-order equation in `u` coupled to a first-order one in `theta`.
pub fn block_mixed<T: Real>(
    l1: &LinearOperator<T>,
    l2: &LinearOperator<T>,
    l3: &LinearOperator<T>,
    l4: &LinearOperator<T>,
) -> Result<BlockOperator<T>> {
    let n = same_dims(&[l1, l2, l3, l4])?;
    use Block::{Ident, Op, Zero};
    let m = build_blocks(
        n,
        &[
            &[Zero, Ident(-T::one()), Zero],
            &[Op(l1), Zero, Op(l2)],
            &[Op(l4), Zero, Op(l3)],
        ],
    );
    Ok(BlockOperator {
        operator: LinearOperator::new(m, "block_mixed")?,
        layout: Layout::uniform(&["u", "u_t", "theta"], n),
        forcing: vec![
            ForcingSlot::Zero,
            ForcingSlot::Source(0),
            ForcingSlot::Source(1),
        ],
        initial_names: vec!["u0".into(), "u1".into(), "theta0".into()],
        sign: SignConvention::PlusL,
    })
}

/// Companion reduction of `D^k u -/+ L u = f` to first order on
/// `(u, Du, ..., D^{k-1} u)`.
///
/// The returned block operator already holds `A` (identity superdiagonal and
/// the signed `L` in the bottom-left block), so its convention is
/// [`SignConvention::MinusL`].
pub fn companion_kth<T: Real>(
    l: &LinearOperator<T>,
    k: usize,
    sign: SignConvention,
) -> Result<BlockOperator<T>> {
    if k < 1 {
        return Err(Error::Configuration("companion order k must be >= 1".into()));
    }
    let n = l.dim();
    let signed = LinearOperator {
        matrix: l.matrix().scaled(sign.factor()),
        label: l.label().to_string(),
        boundary_rows: l.boundary_rows().to_vec(),
    };
    let mut m = Matrix::zeros(k * n, k * n);
    let ident = Matrix::identity(n);
    for b in 0..k - 1 {
        m.set_block(b * n, (b + 1) * n, &ident);
    }
    m.set_block((k - 1) * n, 0, signed.matrix());
    let names: Vec<String> = (0..k)
        .map(|j| match j {
            0 => "u".to_string(),
            1 => "Du".to_string(),
            _ => format!("D{j}u"),
        })
        .collect();
    let mut forcing = vec![ForcingSlot::Zero; k];
    forcing[k - 1] = ForcingSlot::Source(0);
    let operator = if k == 1 {
        LinearOperator { matrix: m, ..signed }
    } else {
        LinearOperator::new(m, format!("companion_{k}({})", l.label()))?
    };
    Ok(BlockOperator {
        operator,
        layout: Layout::uniform(&names, n),
        forcing,
        initial_names: (0..k).map(|j| format!("u{j}")).collect(),
        sign: SignConvention::MinusL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: f64) -> QParam<f64> {
        QParam::new(v).unwrap()
    }

    fn s(v: f64) -> LinearOperator<f64> {
        LinearOperator::scalar(v)
    }

    #[test]
    fn jackson_rows() {
        let grid = SpatialGrid::new(vec![1.0, 0.25, 0.5], q(0.5)).unwrap();
        let op = assemble_jackson_dx(&grid);
        assert_eq!(op.matrix().row(2), &[0.0, -2.0, 2.0]);
        assert_eq!(op.matrix().row(0), &[8.0, 0.0, 0.0]);
        assert_eq!(op.boundary_rows(), &[true, false, false]);
        assert_eq!(op.apply(&[0.0; 3]), vec![0.0; 3]);
    }

    #[test]
    fn jackson_monomials_at_interior_rows() {
        let qp = q(0.7);
        let grid = SpatialGrid::geometric(2.0, 25, qp).unwrap();
        let op = assemble_jackson_dx(&grid);
        for n in 1..=6 {
            let samples: Vec<f64> = grid.points().iter().map(|x| x.powi(n)).collect();
            let d = op.apply(&samples);
            for i in op.interior_rows() {
                let x = grid.points()[i];
                let expected = qp.bracket_int(n as u32) * x.powi(n - 1);
                assert!((d[i] - expected).abs() <= 1e-12 * expected.abs().max(1.0));
            }
        }
    }

    #[test]
    fn rubin_requires_symmetry() {
        let grid = SpatialGrid::new(vec![0.5, 1.0], q(0.5)).unwrap();
        assert!(matches!(assemble_rubin_dx(&grid), Err(Error::Configuration(_))));
    }

    #[test]
    fn rubin_on_small_symmetric_grid() {
        let grid = SpatialGrid::new(vec![-1.0, -0.5, 0.5, 1.0], q(0.5)).unwrap();
        let op = assemble_rubin_dx(&grid).unwrap();
        // x = 1: x/q = 2 and -x/q = -2 are dropped; qx, -qx and -x remain
        let row = op.matrix().row(3);
        assert_eq!(row, &[-2.0, 1.0, -1.0, 0.0]);
        assert!(op.boundary_rows()[3]);
        assert_eq!(op.apply(&[0.0; 4]), vec![0.0; 4]);
        // x = 0.5 needs +-0.25, which this grid lacks: boundary row
        assert!(op.boundary_rows()[2]);
    }

    #[test]
    fn rubin_reproduces_identity_on_odd_function_when_stencil_is_interior() {
        let grid =
            SpatialGrid::new(vec![-1.0, -0.5, -0.25, 0.25, 0.5, 1.0], q(0.5)).unwrap();
        let op = assemble_rubin_dx(&grid).unwrap();
        let samples: Vec<f64> = grid.points().to_vec();
        let d = op.apply(&samples);
        let i = grid.index_of(0.5).unwrap();
        assert!(!op.boundary_rows()[i]);
        assert!((d[i] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn first_order_block_scalars() {
        let b = block_first_order(&s(1.0), &s(2.0), &s(3.0), &s(4.0)).unwrap();
        assert_eq!(b.matrix().to_rows(), vec![vec![1.0, 2.0], vec![4.0, 3.0]]);
        assert_eq!(b.sign(), SignConvention::PlusL);
        assert_eq!(b.system_matrix().to_rows(), vec![vec![-1.0, -2.0], vec![-4.0, -3.0]]);
        let z = block_first_order(&s(0.0), &s(0.0), &s(0.0), &s(0.0)).unwrap();
        assert_eq!(z.matrix().max_abs(), 0.0);
    }

    #[test]
    fn first_order_antidiagonal() {
        let z = LinearOperator::<f64>::zeros(2);
        let i = LinearOperator::identity(2);
        let b = block_first_order(&z, &i, &z, &i).unwrap();
        let m = b.matrix();
        for r in 0..4 {
            for c in 0..4 {
                let expected = if (r < 2) != (c < 2) && r % 2 == c % 2 { 1.0 } else { 0.0 };
                assert_eq!(m[(r, c)], expected);
            }
        }
    }

    #[test]
    fn second_order_block_scalars() {
        let (a, b, c, d) = (1.5, -2.0, 3.25, 4.0);
        let blk = block_second_order(&s(a), &s(b), &s(c), &s(d)).unwrap();
        assert_eq!(
            blk.matrix().to_rows(),
            vec![
                vec![0.0, -1.0, 0.0, 0.0],
                vec![a, 0.0, b, 0.0],
                vec![0.0, 0.0, 0.0, -1.0],
                vec![d, 0.0, c, 0.0],
            ]
        );
        let z = block_second_order(&s(0.0), &s(0.0), &s(0.0), &s(0.0)).unwrap();
        let nonzero: Vec<f64> = z
            .matrix()
            .to_rows()
            .concat()
            .into_iter()
            .filter(|x| *x != 0.0)
            .collect();
        assert_eq!(nonzero, vec![-1.0, -1.0]);
    }

    #[test]
    fn layout_roundtrip() {
        let blk = block_second_order(
            &LinearOperator::<f64>::zeros(2),
            &LinearOperator::<f64>::zeros(2),
            &LinearOperator::<f64>::zeros(2),
            &LinearOperator::zeros(2),
        )
        .unwrap();
        let layout = blk.layout();
        let parts: [&[f64]; 4] = [&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0], &[7.0, 8.0]];
        let state = layout.assemble(&parts).unwrap();
        assert_eq!(layout.extract("u", &state).unwrap(), &[1.0, 2.0]);
        assert_eq!(layout.extract("theta_t", &state).unwrap(), &[7.0, 8.0]);
        assert!(layout.assemble(&parts[..3]).is_err());
    }

    #[test]
    fn mixed_block_scalars() {
        let (a, b, c, d) = (1.0, 2.0, 3.0, 4.0);
        let blk = block_mixed(&s(a), &s(b), &s(c), &s(d)).unwrap();
        assert_eq!(
            blk.matrix().to_rows(),
            vec![vec![0.0, -1.0, 0.0], vec![a, 0.0, b], vec![d, 0.0, c]]
        );
        let z = block_mixed(&s(0.0), &s(0.0), &s(0.0), &s(0.0)).unwrap();
        assert_eq!(z.matrix()[(0, 1)], -1.0);
        assert_eq!(z.matrix().max_abs(), 1.0);
    }

    #[test]
    fn mixed_block_identity() {
        let i = LinearOperator::identity(2);
        let blk = block_mixed(&i, &i, &i, &i).unwrap();
        assert_eq!(blk.dim(), 6);
        assert_eq!(blk.matrix().block(0, 2, 2, 2), Matrix::identity(2).scaled(-1.0));
        assert_eq!(blk.matrix().block(2, 0, 2, 2), Matrix::identity(2));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let r = block_first_order(
            &LinearOperator::<f64>::zeros(2),
            &LinearOperator::zeros(3),
            &LinearOperator::zeros(2),
            &LinearOperator::zeros(2),
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn companion_examples() {
        let c2 = companion_kth(&s(-3.0), 2, SignConvention::MinusL).unwrap();
        assert_eq!(c2.matrix().to_rows(), vec![vec![0.0, 1.0], vec![-3.0, 0.0]]);
        let c1 = companion_kth(&s(2.0), 1, SignConvention::PlusL).unwrap();
        assert_eq!(c1.matrix().to_rows(), vec![vec![-2.0]]);
        let c3 = companion_kth(&s(5.0), 3, SignConvention::MinusL).unwrap();
        assert_eq!(
            c3.matrix().to_rows(),
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![5.0, 0.0, 0.0]]
        );
        assert!(companion_kth(&s(1.0), 0, SignConvention::MinusL).is_err());
        assert_eq!(c3.system_matrix(), *c3.matrix());
    }
}
