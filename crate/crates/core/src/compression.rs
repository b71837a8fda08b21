//! Random projection matrices and the multiple access channel.
//!
//! Sensor `j` scales its reading by `A[i, j]` for transmission `i`; the
//! coherent sum arrives at the fusion center with additive white noise, so
//! each snapshot is received as `y = A x + w`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};

const MAX_DRAWS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectionKind {
    /// `A A^T = I`.
    OrthonormalRows,
    /// iid entries in `{+sqrt(s0/L), 0, -sqrt(s0/L)}` with probabilities
    /// `1/(2 s0)`, `1 - 1/s0`, `1/(2 s0)`.
    SparseTernary { s0: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    matrix: DenseMatrix,
    kind: ProjectionKind,
}

impl ProjectionMatrix {
    /// Wraps an arbitrary `M x L` matrix, e.g. an identity for testing.
    pub fn from_matrix(matrix: DenseMatrix, kind: ProjectionKind) -> Result<Self> {
        check_dims(matrix.rows(), matrix.cols())?;
        Ok(Self { matrix, kind })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    /// Number of MAC transmissions per snapshot.
    pub fn num_measurements(&self) -> usize {
        self.matrix.rows()
    }

    pub fn num_sensors(&self) -> usize {
        self.matrix.cols()
    }

    pub fn compression_ratio(&self) -> f64 {
        self.matrix.rows() as f64 / self.matrix.cols() as f64
    }
}

fn check_dims(m: usize, l: usize) -> Result<()> {
    if m == 0 || m > l {
        return Err(Error::invalid("M", format!("need 1 <= M <= L, got M={m}, L={l}")));
    }
    Ok(())
}

/// Orthonormalizes iid Gaussian rows with two passes of modified Gram-Schmidt.
pub fn gen_orthonormal<R: Rng + ?Sized>(m: usize, l: usize, rng: &mut R) -> Result<ProjectionMatrix> {
    check_dims(m, l)?;
    'draw: for _ in 0..MAX_DRAWS {
        let mut rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..l).map(|_| StandardNormal.sample(rng)).collect())
            .collect();
        for i in 0..m {
            let original = dot(&rows[i], &rows[i]).sqrt();
            for _pass in 0..2 {
                for k in 0..i {
                    let (done, rest) = rows.split_at_mut(i);
                    let c = dot(&done[k], &rest[0]);
                    for (r, q) in rest[0].iter_mut().zip(&done[k]) {
                        *r -= c * q;
                    }
                }
            }
            let norm = dot(&rows[i], &rows[i]).sqrt();
            if !(norm > 1e-10 * original) {
                continue 'draw;
            }
            rows[i].iter_mut().for_each(|v| *v /= norm);
        }
        let matrix = DenseMatrix::from_vec(m, l, rows.concat())?;
        return Ok(ProjectionMatrix {
            matrix,
            kind: ProjectionKind::OrthonormalRows,
        });
    }
    Err(Error::RankDeficient { attempts: MAX_DRAWS })
}

/// Sparse ternary projection; on average `L / s0` sensors transmit per row.
/// `s0` need not be an integer.
pub fn gen_sparse<R: Rng + ?Sized>(m: usize, l: usize, s0: f64, rng: &mut R) -> Result<ProjectionMatrix> {
    check_dims(m, l)?;
    if !(s0 >= 1.0) || !s0.is_finite() {
        return Err(Error::invalid("s0", format!("must be >= 1, got {s0}")));
    }
    let magnitude = (s0 / l as f64).sqrt();
    let p_half = 0.5 / s0;
    let data = (0..m * l)
        .map(|_| {
            let u: f64 = rng.random();
            if u < p_half {
                magnitude
            } else if u < 2.0 * p_half {
                -magnitude
            } else {
                0.0
            }
        })
        .collect();
    Ok(ProjectionMatrix {
        matrix: DenseMatrix::from_vec(m, l, data)?,
        kind: ProjectionKind::SparseTernary { s0 },
    })
}

/// Compressed snapshots received at the fusion center, with the projection
/// that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    y: DenseMatrix,
    projection: ProjectionMatrix,
    fusion_noise_variance: f64,
}

impl SampleBatch {
    pub fn new(y: DenseMatrix, projection: ProjectionMatrix, fusion_noise_variance: f64) -> Result<Self> {
        if y.rows() != projection.num_measurements() {
            return Err(Error::ShapeMismatch {
                op: "SampleBatch",
                left: y.shape(),
                right: projection.matrix().shape(),
            });
        }
        if y.cols() == 0 {
            return Err(Error::invalid("T", "must be at least 1"));
        }
        Ok(Self {
            y,
            projection,
            fusion_noise_variance,
        })
    }

    /// `M x T`, one snapshot per column.
    pub fn y(&self) -> &DenseMatrix {
        &self.y
    }

    pub fn projection(&self) -> &ProjectionMatrix {
        &self.projection
    }

    pub fn fusion_noise_variance(&self) -> f64 {
        self.fusion_noise_variance
    }

    pub fn num_measurements(&self) -> usize {
        self.y.rows()
    }

    pub fn num_snapshots(&self) -> usize {
        self.y.cols()
    }
}

/// `Y[:, n] = A X[:, n] + w[n]` with `w[n] ~ N(0, sigma_w^2 I)`.
pub fn mac_transmit<R: Rng + ?Sized>(
    a: &ProjectionMatrix,
    x: &DenseMatrix,
    fusion_noise_variance: f64,
    rng: &mut R,
) -> Result<SampleBatch> {
    if !(fusion_noise_variance >= 0.0) {
        return Err(Error::invalid("fusion_noise_variance", "must be non-negative"));
    }
    let mut y = a.matrix().matmul(x)?;
    if fusion_noise_variance > 0.0 {
        let sigma = fusion_noise_variance.sqrt();
        for n in 0..y.cols() {
            for i in 0..y.rows() {
                let w: f64 = StandardNormal.sample(rng);
                y[(i, n)] += sigma * w;
            }
        }
    }
    SampleBatch::new(y, a.clone(), fusion_noise_variance)
}
