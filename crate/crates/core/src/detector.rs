//! Decision statistics computed at the fusion center.
//!
//! The covariance-ratio statistic compares the total absolute mass of the
//! uncompressed covariance to its diagonal mass. It equals one for white
//! noise and grows with spatial correlation. Only the compressed snapshots are
//! available, so the first `K` first-row coefficients of the banded Toeplitz
//! covariance are recovered by least squares in the basis
//!
//! ```text
//! B_0 = sum_i a_i a_i^T,    B_k = sum_i (a_i a_{i+k}^T + a_{i+k} a_i^T)
//! ```
//!
//! where `a_i` is column `i` of the projection, so that
//! `A Sigma A^T = sum_k d_{k+1} B_k` for a `K`-banded symmetric Toeplitz `Sigma`.

use crate::compression::{ProjectionMatrix, SampleBatch};
use crate::error::{Error, Result};
use crate::linalg::{
    factor_well_conditioned, solve_symmetric, trace_product, DenseMatrix, LowerTriangularFactor, SymmetricMatrix,
};

pub use crate::stats::q_inverse;

/// Default number of first-row coefficients to estimate.
pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    CovarianceRatio,
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorOutput {
    pub statistic: f64,
    pub kind: DetectorKind,
}

/// `(1/T) Y Y^T`, without mean removal.
pub fn sample_covariance(batch: &SampleBatch) -> SymmetricMatrix {
    let t = batch.num_snapshots() as f64;
    let mut s = batch.y().gram_rows();
    for i in 0..s.dim() {
        for j in i..s.dim() {
            s.set(i, j, s.get(i, j) / t);
        }
    }
    s
}

/// The `B_k` matrices for one projection, together with the Gram matrix
/// `H[i, j] = tr(B_i B_j)` of the least-squares problem.
#[derive(Debug, Clone)]
pub struct BkBasis {
    matrices: Vec<DenseMatrix>,
    num_sensors: usize,
    gram: SymmetricMatrix,
}

impl BkBasis {
    pub fn k(&self) -> usize {
        self.matrices.len()
    }

    pub fn num_sensors(&self) -> usize {
        self.num_sensors
    }

    pub fn matrices(&self) -> &[DenseMatrix] {
        &self.matrices
    }

    /// `H_K`.
    pub fn gram(&self) -> &SymmetricMatrix {
        &self.gram
    }
}

pub fn build_bk_basis(a: &ProjectionMatrix, k: usize, l: usize) -> Result<BkBasis> {
    let a = a.matrix();
    if a.cols() != l {
        return Err(Error::ShapeMismatch {
            op: "build_bk_basis",
            left: a.shape(),
            right: (a.rows(), l),
        });
    }
    if k == 0 || k > l {
        return Err(Error::invalid("K", format!("need 1 <= K <= L, got K={k}, L={l}")));
    }
    let m = a.rows();
    let matrices: Vec<DenseMatrix> = (0..k)
        .map(|lag| {
            // C[p, q] = sum_i A[p, i] A[q, i + lag]
            let c = DenseMatrix::from_fn(m, m, |p, q| {
                let rp = &a.row(p)[..l - lag];
                let rq = &a.row(q)[lag..];
                rp.iter().zip(rq).map(|(x, y)| x * y).sum()
            });
            if lag == 0 {
                c
            } else {
                DenseMatrix::from_fn(m, m, |p, q| c[(p, q)] + c[(q, p)])
            }
        })
        .collect();
    let gram = SymmetricMatrix::from_fn(k, |i, j| {
        trace_product(&matrices[i], &matrices[j]).expect("basis matrices share a shape")
    });
    Ok(BkBasis {
        matrices,
        num_sensors: l,
        gram,
    })
}

/// Least-squares estimate of the leading first-row coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DhatK {
    values: Vec<f64>,
    num_sensors: usize,
}

impl DhatK {
    pub fn new(values: Vec<f64>, num_sensors: usize) -> Result<Self> {
        if values.is_empty() || values.len() > num_sensors {
            return Err(Error::invalid(
                "K",
                format!("need 1 <= K <= L, got K={}, L={num_sensors}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { values, num_sensors })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn num_sensors(&self) -> usize {
        self.num_sensors
    }
}

/// Minimizes `|| S - sum_k d_{k+1} B_k ||_F` over the first `K` coefficients.
pub fn ls_estimate(sample_cov: &SymmetricMatrix, basis: &BkBasis) -> Result<DhatK> {
    let f = projection_rhs(sample_cov, basis)?;
    let d = solve_symmetric(&basis.gram, &f)?;
    DhatK::new(d, basis.num_sensors)
}

/// Covariance ratio of a `K`-banded Toeplitz matrix from its first row:
/// `(L |d1| + 2 sum_l (L - l) |d_{l+1}|) / (L |d1|)`.
pub fn lambda_c_from_dhat(dhat: &DhatK) -> Result<DetectorOutput> {
    let l = dhat.num_sensors as f64;
    let d1 = dhat.values[0].abs();
    if d1 < 1e-300 {
        return Err(Error::DegenerateStatistic { diagonal: d1 });
    }
    let off: f64 = dhat.values[1..]
        .iter()
        .enumerate()
        .map(|(i, d)| (l - (i + 1) as f64) * d.abs())
        .sum();
    Ok(DetectorOutput {
        statistic: (l * d1 + 2.0 * off) / (l * d1),
        kind: DetectorKind::CovarianceRatio,
    })
}

/// `sum_ij |S_ij| / sum_i |S_ii|` on a full matrix.
pub fn lambda_c_exact(s: &SymmetricMatrix) -> Result<DetectorOutput> {
    let n = s.dim();
    let mut diag = 0.0;
    let mut off = 0.0;
    for i in 0..n {
        diag += s.get(i, i).abs();
        for j in i + 1..n {
            off += s.get(i, j).abs();
        }
    }
    if !(diag > 0.0) {
        return Err(Error::DegenerateStatistic { diagonal: diag });
    }
    Ok(DetectorOutput {
        statistic: (diag + 2.0 * off) / diag,
        kind: DetectorKind::CovarianceRatio,
    })
}

/// Total received energy `sum_n ||y[n]||^2`.
pub fn lambda_e(batch: &SampleBatch) -> DetectorOutput {
    DetectorOutput {
        statistic: batch.y().frobenius_sq(),
        kind: DetectorKind::Energy,
    }
}

/// Gaussian-approximation threshold of the energy detector for false-alarm
/// probability `alpha0`: `sigma^2 (sqrt(2 M T) Q^{-1}(alpha0) + M T)`.
pub fn energy_threshold(noise_variance: f64, m: usize, t: usize, alpha0: f64) -> Result<f64> {
    let mt = (m * t) as f64;
    Ok(noise_variance * ((2.0 * mt).sqrt() * q_inverse(alpha0)? + mt))
}

fn projection_rhs(sample_cov: &SymmetricMatrix, basis: &BkBasis) -> Result<Vec<f64>> {
    let m = basis.matrices[0].rows();
    if sample_cov.dim() != m {
        return Err(Error::ShapeMismatch {
            op: "ls_estimate",
            left: (sample_cov.dim(), sample_cov.dim()),
            right: (m, m),
        });
    }
    let s = sample_cov.to_dense();
    basis.matrices.iter().map(|b| trace_product(&s, b)).collect()
}

/// Covariance-ratio detector bound to one projection. `H_K` is factored once
/// at construction, so an ill-posed projection is rejected before any data
/// is seen.
#[derive(Debug, Clone)]
pub struct CovarianceDetector {
    basis: BkBasis,
    factor: LowerTriangularFactor,
}

impl CovarianceDetector {
    pub fn new(a: &ProjectionMatrix, k: usize) -> Result<Self> {
        let basis = build_bk_basis(a, k, a.num_sensors())?;
        let factor = factor_well_conditioned(&basis.gram)?;
        Ok(Self { basis, factor })
    }

    pub fn basis(&self) -> &BkBasis {
        &self.basis
    }

    pub fn estimate(&self, batch: &SampleBatch) -> Result<DhatK> {
        let f = projection_rhs(&sample_covariance(batch), &self.basis)?;
        DhatK::new(self.factor.solve(&f), self.basis.num_sensors)
    }

    pub fn statistic(&self, batch: &SampleBatch) -> Result<DetectorOutput> {
        lambda_c_from_dhat(&self.estimate(batch)?)
    }
}
