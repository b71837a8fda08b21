//! Small dense linear algebra: row-major matrices, packed symmetric storage,
//! Cholesky factorization and symmetric solves.
//!
//! Everything here is sized for desk-scale simulation (a few hundred rows at
//! most), so there is no blocking or sparse storage.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative diagonal jitter added before the single Cholesky retry.
pub const CHOLESKY_JITTER: f64 = 1e-12;

/// Condition estimate above which [`solve_symmetric`] refuses to answer.
pub const MAX_CONDITION: f64 = 1e12;

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries, checking length and finiteness.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "from_vec",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Convenience constructor for literals; panics on ragged rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * self^T`, exploiting symmetry of the result.
    pub fn gram_rows(&self) -> SymmetricMatrix {
        SymmetricMatrix::from_fn(self.rows, |i, j| dot(self.row(i), self.row(j)))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch {
                op: "mul_vec",
                left: self.shape(),
                right: (v.len(), 1),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op: "add",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, c: f64) -> DenseMatrix {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest entrywise absolute difference; `None` on shape mismatch.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> Option<f64> {
        (self.shape() == other.shape()).then(|| {
            self.data
                .iter()
                .zip(&other.data)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
        })
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Symmetric matrix stored as its packed upper triangle, so `get(i, j)` and
/// `get(j, i)` read the same cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    upper: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            upper: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// `f` is only called with `i <= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut upper = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                upper.push(f(i, j));
            }
        }
        Self { dim, upper }
    }

    /// Takes the upper triangle of a square matrix, ignoring the lower one.
    pub fn from_upper(m: &DenseMatrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::ShapeMismatch {
                op: "from_upper",
                left: m.shape(),
                right: (m.cols(), m.rows()),
            });
        }
        Ok(Self::from_fn(m.rows(), |i, j| m[(i, j)]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.packed(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.packed(i, j);
        self.upper[k] = v;
    }

    #[inline]
    fn packed(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        debug_assert!(j < self.dim);
        i * (2 * self.dim - i + 1) / 2 + (j - i)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::ShapeMismatch {
                op: "mul_vec",
                left: (self.dim, self.dim),
                right: (v.len(), 1),
            });
        }
        Ok((0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Lower-triangular Cholesky factor `L` with `L * L^T = S`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangularFactor {
    dim: usize,
    // row-major, row i holds columns 0..=i
    lower: Vec<f64>,
    jittered: bool,
}

impl LowerTriangularFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether the diagonal jitter retry was needed.
    pub fn jittered(&self) -> bool {
        self.jittered
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.lower[start..start + i + 1]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.row(i)[j]
        }
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim).map(|i| self.row(i)[i])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    /// `L * z`.
    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        debug_assert_eq!(z.len(), self.dim);
        (0..self.dim).map(|i| dot(self.row(i), &z[..=i])).collect()
    }

    /// Solves `L L^T x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.dim);
        let n = self.dim;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let r = self.row(i);
            y[i] = (b[i] - dot(&r[..i], &y[..i])) / r[i];
        }
        let mut x = y;
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.row(k)[i] * x[k];
            }
            x[i] = s / self.row(i)[i];
        }
        x
    }
}

fn try_cholesky(s: &SymmetricMatrix, shift: f64) -> std::result::Result<Vec<f64>, (usize, f64)> {
    let n = s.dim();
    let mut lower = vec![0.0; n * (n + 1) / 2];
    for i in 0..n {
        let ri = i * (i + 1) / 2;
        for j in 0..=i {
            let rj = j * (j + 1) / 2;
            let mut sum = s.get(i, j);
            if i == j {
                sum += shift;
            }
            for k in 0..j {
                sum -= lower[ri + k] * lower[rj + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return Err((i, sum));
                }
                lower[ri + i] = sum.sqrt();
            } else {
                lower[ri + j] = sum / lower[rj + j];
            }
        }
    }
    Ok(lower)
}

/// Cholesky factorization with one jittered retry.
///
/// If the plain factorization hits a non-positive pivot, `1e-12 * trace / dim`
/// is added to the diagonal and the factorization is attempted once more.
pub fn cholesky(s: &SymmetricMatrix) -> Result<LowerTriangularFactor> {
    let n = s.dim();
    if n == 0 {
        return Err(Error::invalid("matrix", "dimension must be at least 1"));
    }
    match try_cholesky(s, 0.0) {
        Ok(lower) => Ok(LowerTriangularFactor {
            dim: n,
            lower,
            jittered: false,
        }),
        Err(_) => {
            let jitter = CHOLESKY_JITTER * s.trace() / n as f64;
            if !(jitter > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    index: 0,
                    pivot: s.trace(),
                });
            }
            try_cholesky(s, jitter)
                .map(|lower| LowerTriangularFactor {
                    dim: n,
                    lower,
                    jittered: true,
                })
                .map_err(|(index, pivot)| Error::NotPositiveDefinite { index, pivot })
        }
    }
}

/// `tr(P Q^T)`, i.e. the sum of elementwise products.
pub fn trace_product(p: &DenseMatrix, q: &DenseMatrix) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(Error::ShapeMismatch {
            op: "trace_product",
            left: p.shape(),
            right: q.shape(),
        });
    }
    Ok(dot(p.as_slice(), q.as_slice()))
}

fn one_norm(h: &SymmetricMatrix) -> f64 {
    let n = h.dim();
    (0..n)
        .map(|j| (0..n).map(|i| h.get(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Condition estimate of a factored system: the larger of the squared ratio of
/// extreme factor diagonals and the explicit 1-norm condition number.
fn condition_estimate(h: &SymmetricMatrix, factor: &LowerTriangularFactor) -> f64 {
    let (lo, hi) = factor
        .diagonal()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    let diag_ratio = (hi / lo).powi(2);

    let n = h.dim();
    let mut inv_norm = 0.0_f64;
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = factor.solve(&e);
        e[j] = 0.0;
        inv_norm = inv_norm.max(col.iter().map(|v| v.abs()).sum());
    }
    diag_ratio.max(one_norm(h) * inv_norm)
}

/// Cholesky factor of `H` that is safe to solve with: applies the jitter
/// policy of [`cholesky`] and fails with [`Error::SingularSystem`] when the
/// condition estimate exceeds [`MAX_CONDITION`].
pub fn factor_well_conditioned(h: &SymmetricMatrix) -> Result<LowerTriangularFactor> {
    let factor = cholesky(h).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::SingularSystem {
            condition: f64::INFINITY,
        },
        other => other,
    })?;
    let condition = condition_estimate(h, &factor);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    Ok(factor)
}

/// Solves `H d = f` for symmetric positive definite `H`; see
/// [`factor_well_conditioned`] for when it refuses.
pub fn solve_symmetric(h: &SymmetricMatrix, f: &[f64]) -> Result<Vec<f64>> {
    if h.dim() != f.len() {
        return Err(Error::ShapeMismatch {
            op: "solve_symmetric",
            left: (h.dim(), h.dim()),
            right: (f.len(), 1),
        });
    }
    Ok(factor_well_conditioned(h)?.solve(f))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym(rows: &[&[f64]]) -> SymmetricMatrix {
        SymmetricMatrix::from_upper(&DenseMatrix::from_rows(rows)).unwrap()
    }

    #[test]
    fn packed_indexing_is_symmetric() {
        let s = SymmetricMatrix::from_fn(4, |i, j| (10 * i + j) as f64);
        for i in 0..4 {
            for j in 0..4 {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                assert_eq!(s.get(i, j), (10 * a + b) as f64);
                assert_eq!(s.get(i, j), s.get(j, i));
            }
        }
    }

    #[test]
    fn cholesky_identity() {
        let f = cholesky(&SymmetricMatrix::identity(3)).unwrap();
        assert_eq!(f.to_dense(), DenseMatrix::identity(3));
        assert!(!f.jittered());
    }

    #[test]
    fn cholesky_two_by_two() {
        let f = cholesky(&sym(&[&[4.0, 2.0], &[2.0, 3.0]])).unwrap();
        let expected = DenseMatrix::from_rows(&[[2.0, 0.0], [1.0, 2f64.sqrt()]]);
        assert!(f.to_dense().max_abs_diff(&expected).unwrap() < 1e-15);
    }

    #[test]
    fn cholesky_geometric_toeplitz() {
        // eigenvalues of [[1,.8,.64],[.8,1,.8],[.64,.8,1]] are all positive
        let s = SymmetricMatrix::from_fn(3, |i, j| 0.8f64.powi((j - i) as i32));
        assert!(cholesky(&s).is_ok());
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let err = cholesky(&sym(&[&[1.0, 2.0], &[2.0, 1.0]])).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { index: 1, .. }));
    }

    #[test]
    fn cholesky_jitter_rescues_semidefinite() {
        // rank one, exactly singular: pivot 0 then jitter
        let f = cholesky(&sym(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap();
        assert!(f.jittered());
    }

    #[test]
    fn trace_product_examples() {
        let i2 = DenseMatrix::identity(2);
        assert_eq!(trace_product(&i2, &i2).unwrap(), 2.0);
        let p = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let q = DenseMatrix::from_rows(&[[5.0, 6.0], [7.0, 8.0]]);
        assert_eq!(trace_product(&p, &q).unwrap(), 70.0);
        assert_eq!(trace_product(&p, &DenseMatrix::zeros(2, 2)).unwrap(), 0.0);
        assert!(matches!(
            trace_product(&p, &DenseMatrix::zeros(2, 3)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn trace_product_matches_trace_of_product() {
        let p = DenseMatrix::from_rows(&[[1.0, -2.0, 0.5], [3.0, 4.0, -1.0]]);
        let q = DenseMatrix::from_rows(&[[0.2, 6.0, 1.0], [7.0, -8.0, 2.0]]);
        let pq = p.matmul(&q.transpose()).unwrap();
        let tr = pq[(0, 0)] + pq[(1, 1)];
        assert!((trace_product(&p, &q).unwrap() - tr).abs() < 1e-12);
    }

    #[test]
    fn solve_examples() {
        assert_eq!(
            solve_symmetric(&SymmetricMatrix::identity(2), &[3.0, -1.0]).unwrap(),
            vec![3.0, -1.0]
        );
        let d = solve_symmetric(&sym(&[&[2.0, 0.0], &[0.0, 4.0]]), &[2.0, 8.0]).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-15 && (d[1] - 2.0).abs() < 1e-15);
        assert!(matches!(
            solve_symmetric(&sym(&[&[1.0, 1.0], &[1.0, 1.0]]), &[1.0, 1.0]),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn solve_rejects_zero_block() {
        let h = sym(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 2.0]]);
        assert!(matches!(
            solve_symmetric(&h, &[1.0, 0.0, 1.0]),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn dense_constructor_validates() {
        assert!(matches!(
            DenseMatrix::from_vec(2, 2, vec![1.0; 3]),
            Err(Error::ShapeMismatch { .. })
        ));
        assert_eq!(DenseMatrix::from_vec(1, 2, vec![1.0, f64::NAN]), Err(Error::NonFinite));
    }

    fn spd_strategy() -> impl Strategy<Value = SymmetricMatrix> {
        (1usize..8).prop_flat_map(|n| {
            proptest::collection::vec(-1.0f64..1.0, n * n).prop_map(move |g| {
                let g = DenseMatrix::from_vec(n, n, g).unwrap();
                let mut s = g.gram_rows();
                for i in 0..n {
                    s.set(i, i, s.get(i, i) + 0.1);
                }
                s
            })
        })
    }

    proptest! {
        #[test]
        fn cholesky_reconstructs(s in spd_strategy()) {
            let l = cholesky(&s).unwrap().to_dense();
            let back = l.matmul(&l.transpose()).unwrap();
            let err = back.max_abs_diff(&s.to_dense()).unwrap();
            prop_assert!(err <= 1e-10 * s.max_abs());
        }

        #[test]
        fn trace_product_commutes(
            a in proptest::collection::vec(-10.0f64..10.0, 12),
            b in proptest::collection::vec(-10.0f64..10.0, 12),
        ) {
            let p = DenseMatrix::from_vec(3, 4, a).unwrap();
            let q = DenseMatrix::from_vec(3, 4, b).unwrap();
            let pq = trace_product(&p, &q).unwrap();
            let qp = trace_product(&q, &p).unwrap();
            prop_assert!((pq - qp).abs() <= 1e-12 * (1.0 + pq.abs()));
        }

        #[test]
        fn solve_residual_small(s in spd_strategy(), f in proptest::collection::vec(-5.0f64..5.0, 8)) {
            let f = &f[..s.dim()];
            let d = solve_symmetric(&s, f).unwrap();
            let back = s.mul_vec(&d).unwrap();
            let fmax = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let res = back.iter().zip(f).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            prop_assert!(res <= 1e-8 * (1.0 + fmax));
        }
    }
}
