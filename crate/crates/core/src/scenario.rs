//! Equally spaced 1-D sensor array observing a spatially correlated source.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, DenseMatrix, LowerTriangularFactor, SymmetricMatrix};

/// Spatial correlation between sensors `k` positions apart is `rho^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationModel {
    /// `rho = exp(-r / theta1)` for inter-sensor distance `r`.
    PowerExponential {
        theta1: f64,
    },
    DirectRho {
        rho: f64,
    },
}

/// Marginal law of the source before spatial mixing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourceKind {
    #[default]
    Gaussian,
    /// Unit-variance uniform innovations mixed by the same Cholesky factor;
    /// second-order statistics match the Gaussian source.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// Noise only.
    H0,
    /// Signal present.
    H1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub num_sensors: usize,
    pub inter_sensor_distance: f64,
    pub correlation: CorrelationModel,
    pub signal_variance: f64,
    pub sensor_noise_variance: f64,
    pub fusion_noise_variance: f64,
    pub source: SourceKind,
}

impl ScenarioConfig {
    pub fn with_rho(
        num_sensors: usize,
        rho: f64,
        signal_variance: f64,
        sensor_noise_variance: f64,
        fusion_noise_variance: f64,
    ) -> Self {
        Self {
            num_sensors,
            inter_sensor_distance: 1.0,
            correlation: CorrelationModel::DirectRho { rho },
            signal_variance,
            sensor_noise_variance,
            fusion_noise_variance,
            source: SourceKind::Gaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sensors < 2 {
            return Err(Error::invalid("num_sensors", "requires at least 2 sensors"));
        }
        positive("inter_sensor_distance", self.inter_sensor_distance)?;
        positive("signal_variance", self.signal_variance)?;
        positive("sensor_noise_variance", self.sensor_noise_variance)?;
        positive("fusion_noise_variance", self.fusion_noise_variance)?;
        match self.correlation {
            CorrelationModel::PowerExponential { theta1 } => positive("theta1", theta1),
            CorrelationModel::DirectRho { rho } if !(rho.abs() < 1.0) => {
                Err(Error::invalid("rho", format!("|rho| must be < 1, got {rho}")))
            }
            CorrelationModel::DirectRho { .. } => Ok(()),
        }
    }

    /// Adjacent-sensor correlation coefficient.
    pub fn rho(&self) -> f64 {
        match self.correlation {
            CorrelationModel::PowerExponential { theta1 } => (-self.inter_sensor_distance / theta1).exp(),
            CorrelationModel::DirectRho { rho } => rho,
        }
    }

    /// Effective white noise power `sigma_v^2 + sigma_w^2` seen through an
    /// orthonormal-row projection.
    pub fn effective_noise_variance(&self) -> f64 {
        self.sensor_noise_variance + self.fusion_noise_variance
    }

    /// Average SNR in dB.
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.signal_variance / self.effective_noise_variance()).log10()
    }

    /// First row of the signal covariance: `sigma_s^2 * rho^k`.
    pub fn signal_covariance(&self) -> ToeplitzCovariance {
        let rho = self.rho();
        let first_row = (0..self.num_sensors)
            .map(|k| self.signal_variance * rho.powi(k as i32))
            .collect();
        ToeplitzCovariance { first_row }
    }

    /// Signal covariance plus effective noise on the diagonal.
    pub fn noisy_signal_covariance(&self) -> ToeplitzCovariance {
        let mut d = self.signal_covariance();
        d.first_row[0] += self.effective_noise_variance();
        d
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

/// Symmetric Toeplitz matrix held by its first row.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzCovariance {
    first_row: Vec<f64>,
}

impl ToeplitzCovariance {
    pub fn new(first_row: Vec<f64>) -> Result<Self> {
        let Some(&d0) = first_row.first() else {
            return Err(Error::invalid("first_row", "must be non-empty"));
        };
        if !(d0 > 0.0) || first_row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "first_row",
                "leading entry must be positive and all entries finite",
            ));
        }
        if first_row.iter().any(|v| v.abs() > d0) {
            return Err(Error::invalid(
                "first_row",
                "off-diagonal magnitude exceeds the diagonal",
            ));
        }
        Ok(Self { first_row })
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    pub fn dim(&self) -> usize {
        self.first_row.len()
    }

    pub fn to_symmetric(&self) -> SymmetricMatrix {
        SymmetricMatrix::from_fn(self.dim(), |i, j| self.first_row[j - i])
    }
}

/// A validated scenario with the signal covariance factor cached.
#[derive(Debug, Clone)]
pub struct Scenario {
    cfg: ScenarioConfig,
    signal_factor: LowerTriangularFactor,
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let signal_factor = cholesky(&cfg.signal_covariance().to_symmetric())?;
        Ok(Self { cfg, signal_factor })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn num_sensors(&self) -> usize {
        self.cfg.num_sensors
    }

    /// Draws `t` raw snapshots as the columns of an `L x t` matrix.
    ///
    /// Under `H1` each column is `s + v` with `s ~ (0, Sigma_s)`; under `H0`
    /// it is `v ~ N(0, sigma_v^2 I)`. Columns are independent.
    pub fn sample_raw<R: Rng + ?Sized>(&self, hyp: Hypothesis, t: usize, rng: &mut R) -> Result<DenseMatrix> {
        if t == 0 {
            return Err(Error::invalid("T", "must be at least 1"));
        }
        let l = self.cfg.num_sensors;
        let sigma_v = self.cfg.sensor_noise_variance.sqrt();
        let mut x = DenseMatrix::zeros(l, t);
        let mut z = vec![0.0; l];
        for n in 0..t {
            if hyp == Hypothesis::H1 {
                match self.cfg.source {
                    SourceKind::Gaussian => z.iter_mut().for_each(|v| *v = StandardNormal.sample(rng)),
                    SourceKind::Uniform => {
                        let half_width = 3f64.sqrt();
                        z.iter_mut()
                            .for_each(|v| *v = rng.random_range(-half_width..half_width));
                    }
                }
                let s = self.signal_factor.mul_vec(&z);
                for (j, sj) in s.into_iter().enumerate() {
                    x[(j, n)] = sj;
                }
            }
            for j in 0..l {
                let v: f64 = StandardNormal.sample(rng);
                x[(j, n)] += sigma_v * v;
            }
        }
        Ok(x)
    }
}
