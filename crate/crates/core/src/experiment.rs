//! Monte Carlo engine: threshold calibration, false-alarm and detection rates,
//! ROC curves, and SNR / sparsity sweeps.
//!
//! Every trial draws from its own ChaCha8 stream, keyed by the master seed,
//! a phase tag (calibration, rates, ROC, grid point) and the trial index.
//! Trials therefore produce the same numbers in any order and on any number
//! of worker threads, and aggregation is a plain count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::compression::{gen_orthonormal, gen_sparse, mac_transmit, ProjectionKind, ProjectionMatrix};
use crate::detector::{energy_threshold, lambda_e, CovarianceDetector, DEFAULT_K};
use crate::error::{Error, Result};
use crate::scenario::{Hypothesis, Scenario, ScenarioConfig};
use crate::stats::{auc, wilson_halfwidth};

/// Master seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5EED_C0DE_2017;

/// Redraws allowed when a projection leaves the least-squares system singular.
pub const MAX_PROJECTION_REDRAWS: usize = 100;

const PHASE_CALIBRATE: u64 = 1;
const PHASE_RATES: u64 = 2;
const PHASE_ROC: u64 = 3;
const PHASE_FIXED_PROJECTION: u64 = 4;
const PHASE_BOOTSTRAP: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionSpec {
    pub kind: ProjectionKind,
    /// Number of MAC transmissions `M`.
    pub num_measurements: usize,
}

impl ProjectionSpec {
    /// `M = round(c_r L)`, clamped to `[1, L]`.
    pub fn from_ratio(kind: ProjectionKind, compression_ratio: f64, num_sensors: usize) -> Self {
        let m = (compression_ratio * num_sensors as f64)
            .round()
            .clamp(1.0, num_sensors as f64) as usize;
        Self {
            kind,
            num_measurements: m,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, num_sensors: usize, rng: &mut R) -> Result<ProjectionMatrix> {
        match self.kind {
            ProjectionKind::OrthonormalRows => gen_orthonormal(self.num_measurements, num_sensors, rng),
            ProjectionKind::SparseTernary { s0 } => gen_sparse(self.num_measurements, num_sensors, s0, rng),
        }
    }
}

/// Whether a fresh projection is drawn for every trial or one is shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionMode {
    #[default]
    FreshPerTrial,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorSpec {
    CovarianceRatio,
    /// Energy detector with its threshold set from the true noise power.
    Energy,
    /// Energy detector whose assumed noise power is off by a factor drawn
    /// uniformly in dB over `[-beta_db, beta_db]`, once per trial.
    EnergyWithUncertainty {
        beta_db: f64,
    },
}

impl DetectorSpec {
    pub fn label(&self) -> String {
        match self {
            DetectorSpec::CovarianceRatio => "covariance".into(),
            DetectorSpec::Energy => "energy".into(),
            DetectorSpec::EnergyWithUncertainty { beta_db } => format!("energy_beta{beta_db}"),
        }
    }

    fn beta_db(&self) -> Option<f64> {
        match self {
            DetectorSpec::CovarianceRatio => None,
            DetectorSpec::Energy => Some(0.0),
            DetectorSpec::EnergyWithUncertainty { beta_db } => Some(*beta_db),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub scenario: ScenarioConfig,
    pub projection: ProjectionSpec,
    pub projection_mode: ProjectionMode,
    pub k: usize,
    pub t: usize,
    pub detectors: Vec<DetectorSpec>,
    pub alpha0: f64,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; 0 picks the rayon default. Never affects results.
    pub workers: usize,
}

impl ExperimentPlan {
    /// A plan with `K = 3`, the covariance and energy detectors, and the default seed.
    pub fn new(scenario: ScenarioConfig, projection: ProjectionSpec, t: usize, alpha0: f64, trials: usize) -> Self {
        Self {
            scenario,
            projection,
            projection_mode: ProjectionMode::FreshPerTrial,
            k: DEFAULT_K,
            t,
            detectors: vec![DetectorSpec::CovarianceRatio, DetectorSpec::Energy],
            alpha0,
            trials,
            seed: DEFAULT_SEED,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let l = self.scenario.num_sensors;
        let m = self.projection.num_measurements;
        if m == 0 || m > l {
            return Err(Error::invalid("M", format!("need 1 <= M <= L, got M={m}, L={l}")));
        }
        if let ProjectionKind::SparseTernary { s0 } = self.projection.kind {
            if !(s0 >= 1.0) {
                return Err(Error::invalid("s0", format!("must be >= 1, got {s0}")));
            }
        }
        if self.k == 0 || self.k > l {
            return Err(Error::invalid("K", format!("need 1 <= K <= L, got K={}", self.k)));
        }
        if self.t == 0 {
            return Err(Error::invalid("T", "must be at least 1"));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return Err(Error::invalid(
                "alpha0",
                format!("must lie in (0, 1), got {}", self.alpha0),
            ));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        for d in &self.detectors {
            if let DetectorSpec::EnergyWithUncertainty { beta_db } = d {
                if !(*beta_db >= 0.0) {
                    return Err(Error::invalid("beta_db", format!("must be >= 0, got {beta_db}")));
                }
            }
        }
        Ok(())
    }

    pub fn with_scenario(&self, scenario: ScenarioConfig) -> Self {
        Self {
            scenario,
            ..self.clone()
        }
    }
}

/// Empirical false-alarm and detection rates at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloResult {
    pub pf: f64,
    pub pd: f64,
    pub pf_halfwidth: f64,
    pub pd_halfwidth: f64,
    pub threshold_used: f64,
    pub trials: usize,
}

impl MonteCarloResult {
    fn from_counts(false_alarms: usize, detections: usize, trials: usize, threshold_used: f64) -> Self {
        Self {
            pf: false_alarms as f64 / trials as f64,
            pd: detections as f64 / trials as f64,
            pf_halfwidth: wilson_halfwidth(false_alarms, trials),
            pd_halfwidth: wilson_halfwidth(detections, trials),
            threshold_used,
            trials,
        }
    }
}

/// Rates for every detector in a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub results: Vec<(DetectorSpec, MonteCarloResult)>,
}

impl RateReport {
    pub fn get(&self, spec: &DetectorSpec) -> Option<&MonteCarloResult> {
        self.results.iter().find(|(d, _)| d == spec).map(|(_, r)| r)
    }

    pub fn covariance(&self) -> Option<&MonteCarloResult> {
        self.get(&DetectorSpec::CovarianceRatio)
    }
}

/// Statistic values of the covariance detector under each hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Populations {
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(pf, pd)` ordered by increasing threshold, from `(1, 1)` to `(0, 0)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    pub plan: ExperimentPlan,
}

impl RocCurve {
    pub fn from_populations(pop: &Populations, plan: ExperimentPlan) -> Self {
        let mut h0 = pop.h0.clone();
        let mut h1 = pop.h1.clone();
        h0.sort_by(f64::total_cmp);
        h1.sort_by(f64::total_cmp);
        let mut thresholds: Vec<f64> = h0.iter().chain(&h1).copied().collect();
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();

        let rate = |sorted: &[f64], tau: f64| {
            let below = sorted.partition_point(|v| *v < tau);
            (sorted.len() - below) as f64 / sorted.len() as f64
        };
        let mut points = Vec::with_capacity(thresholds.len() + 2);
        points.push((1.0, 1.0));
        for &tau in &thresholds {
            points.push((rate(&h0, tau), rate(&h1, tau)));
        }
        points.push((0.0, 0.0));
        points.dedup();
        Self {
            points,
            auc: auc(&pop.h0, &pop.h1),
            plan,
        }
    }
}

/// One point of an SNR sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrPoint {
    pub sensor_noise_variance: f64,
    pub gamma0_db: f64,
    pub report: RateReport,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of one family of streams; trials index the ChaCha stream within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64, phase: u64) -> Self {
        Self(splitmix64(seed ^ splitmix64(phase)))
    }

    /// A sub-family, e.g. one grid point of a sweep.
    pub fn child(self, index: u64) -> Self {
        Self(splitmix64(self.0 ^ splitmix64(index.wrapping_add(0xA5A5_A5A5))))
    }

    pub fn trial_rng(self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(trial);
        rng
    }
}

fn run_trials<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

/// Draws the assumed noise power used for an energy threshold: the true power
/// scaled by `10^(u/10)`, `u ~ Uniform[-beta_db, beta_db]`. Data generation
/// always uses the true power.
pub fn apply_noise_uncertainty<R: Rng + ?Sized>(noise_variance: f64, beta_db: f64, rng: &mut R) -> f64 {
    if beta_db == 0.0 {
        return noise_variance;
    }
    let u = rng.random_range(-beta_db..=beta_db);
    10f64.powf(u / 10.0) * noise_variance
}

/// Per-trial setup shared across hypotheses.
struct Pipeline {
    scenario: Scenario,
    plan: ExperimentPlan,
    fixed: Option<(ProjectionMatrix, CovarianceDetector)>,
}

struct TrialStats {
    lambda_c: f64,
    lambda_e: f64,
}

impl Pipeline {
    fn new(plan: &ExperimentPlan) -> Result<Self> {
        plan.validate()?;
        let scenario = Scenario::new(plan.scenario.clone())?;
        let mut pipeline = Self {
            scenario,
            plan: plan.clone(),
            fixed: None,
        };
        if plan.projection_mode == ProjectionMode::Fixed {
            let mut rng = StreamKey::new(plan.seed, PHASE_FIXED_PROJECTION).trial_rng(0);
            pipeline.fixed = Some(pipeline.draw_projection(&mut rng)?);
        }
        Ok(pipeline)
    }

    fn draw_projection(&self, rng: &mut ChaCha8Rng) -> Result<(ProjectionMatrix, CovarianceDetector)> {
        let l = self.plan.scenario.num_sensors;
        let mut last = None;
        for _ in 0..MAX_PROJECTION_REDRAWS {
            let a = self.plan.projection.draw(l, rng)?;
            match CovarianceDetector::new(&a, self.plan.k) {
                Ok(det) => return Ok((a, det)),
                Err(e @ Error::SingularSystem { .. }) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one draw"))
    }

    fn projection(&self, rng: &mut ChaCha8Rng) -> Result<(ProjectionMatrix, CovarianceDetector)> {
        match &self.fixed {
            Some(pair) => Ok(pair.clone()),
            None => self.draw_projection(rng),
        }
    }

    fn observe(
        &self,
        a: &ProjectionMatrix,
        det: &CovarianceDetector,
        hyp: Hypothesis,
        rng: &mut ChaCha8Rng,
    ) -> Result<TrialStats> {
        let x = self.scenario.sample_raw(hyp, self.plan.t, rng)?;
        let batch = mac_transmit(a, &x, self.plan.scenario.fusion_noise_variance, rng)?;
        Ok(TrialStats {
            lambda_c: det.statistic(&batch)?.statistic,
            lambda_e: lambda_e(&batch).statistic,
        })
    }
}

/// Covariance-ratio values under `H0` only, one per trial.
fn h0_population(plan: &ExperimentPlan, key: StreamKey) -> Result<Vec<f64>> {
    let pipeline = Pipeline::new(plan)?;
    run_trials(plan.workers, plan.trials, |t| {
        let mut rng = key.trial_rng(t as u64);
        let (a, det) = pipeline.projection(&mut rng)?;
        Ok(pipeline.observe(&a, &det, Hypothesis::H0, &mut rng)?.lambda_c)
    })
}

fn order_statistic_threshold(mut values: Vec<f64>, alpha0: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let k = ((1.0 - alpha0) * n as f64 - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    values[k - 1]
}

fn calibrate_with_key(plan: &ExperimentPlan, key: StreamKey) -> Result<f64> {
    plan.validate()?;
    if plan.trials < 100 || (plan.trials as f64) * plan.alpha0 < 10.0 {
        return Err(Error::InsufficientTrials {
            trials: plan.trials,
            alpha0: plan.alpha0,
        });
    }
    Ok(order_statistic_threshold(h0_population(plan, key)?, plan.alpha0))
}

/// Empirical covariance-ratio threshold for false-alarm level `alpha0`: the
/// `ceil((1 - alpha0) n)`-th order statistic of `n = trials` simulated `H0`
/// statistics.
pub fn calibrate_threshold(plan: &ExperimentPlan) -> Result<f64> {
    calibrate_with_key(plan, StreamKey::new(plan.seed, PHASE_CALIBRATE))
}

/// Calibrates at each effective noise power `10^(db/10)`, splitting it
/// between sensor and fusion noise in the plan's proportion. Each grid point
/// gets an independent stream family.
pub fn calibrate_over_noise(plan: &ExperimentPlan, noise_db: &[f64]) -> Result<Vec<(f64, f64)>> {
    let total = plan.scenario.effective_noise_variance();
    let sensor_share = plan.scenario.sensor_noise_variance / total;
    let base = StreamKey::new(plan.seed, PHASE_CALIBRATE);
    noise_db
        .iter()
        .enumerate()
        .map(|(i, &db)| {
            let power = 10f64.powf(db / 10.0);
            let mut sc = plan.scenario.clone();
            sc.sensor_noise_variance = power * sensor_share;
            sc.fusion_noise_variance = power * (1.0 - sensor_share);
            let tau = calibrate_with_key(&plan.with_scenario(sc), base.child(i as u64))?;
            Ok((db, tau))
        })
        .collect()
}

fn rates_with_key(plan: &ExperimentPlan, tau_c: f64, key: StreamKey) -> Result<RateReport> {
    let pipeline = Pipeline::new(plan)?;
    let noise = plan.scenario.effective_noise_variance();
    let m = plan.projection.num_measurements;
    let energy_specs: Vec<(usize, f64)> = plan
        .detectors
        .iter()
        .enumerate()
        .filter_map(|(i, d)| d.beta_db().map(|b| (i, b)))
        .collect();
    // per trial and detector: (false alarm, detection)
    let outcomes = run_trials(plan.workers, plan.trials, |t| {
        let mut rng = key.trial_rng(t as u64);
        let (a, det) = pipeline.projection(&mut rng)?;
        let h0 = pipeline.observe(&a, &det, Hypothesis::H0, &mut rng)?;
        let h1 = pipeline.observe(&a, &det, Hypothesis::H1, &mut rng)?;
        let mut energy_taus = vec![0.0; plan.detectors.len()];
        for &(i, beta) in &energy_specs {
            let assumed = apply_noise_uncertainty(noise, beta, &mut rng);
            energy_taus[i] = energy_threshold(assumed, m, plan.t, plan.alpha0)?;
        }
        Ok(plan
            .detectors
            .iter()
            .zip(energy_taus)
            .map(|(d, tau_e)| match d {
                DetectorSpec::CovarianceRatio => (h0.lambda_c >= tau_c, h1.lambda_c >= tau_c),
                _ => (h0.lambda_e >= tau_e, h1.lambda_e >= tau_e),
            })
            .collect::<Vec<_>>())
    })?;

    let nominal_tau_e = energy_threshold(noise, m, plan.t, plan.alpha0)?;
    let results = plan
        .detectors
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let fa = outcomes.iter().filter(|o| o[i].0).count();
            let det = outcomes.iter().filter(|o| o[i].1).count();
            let tau = match d {
                DetectorSpec::CovarianceRatio => tau_c,
                _ => nominal_tau_e,
            };
            (*d, MonteCarloResult::from_counts(fa, det, plan.trials, tau))
        })
        .collect();
    Ok(RateReport { results })
}

/// Runs `trials` paired `H0`/`H1` pipelines (same projection within a trial)
/// and counts exceedances. The covariance detector uses `tau_c`; energy
/// detectors compute their threshold per trial from the (possibly perturbed)
/// assumed noise power. `threshold_used` for energy detectors is the
/// threshold at the true noise power.
pub fn estimate_rates(plan: &ExperimentPlan, tau_c: f64) -> Result<RateReport> {
    rates_with_key(plan, tau_c, StreamKey::new(plan.seed, PHASE_RATES))
}

/// Covariance-ratio statistics under both hypotheses from the same trials.
pub fn simulate_populations(plan: &ExperimentPlan) -> Result<Populations> {
    let pipeline = Pipeline::new(plan)?;
    let key = StreamKey::new(plan.seed, PHASE_ROC);
    let pairs = run_trials(plan.workers, plan.trials, |t| {
        let mut rng = key.trial_rng(t as u64);
        let (a, det) = pipeline.projection(&mut rng)?;
        let h0 = pipeline.observe(&a, &det, Hypothesis::H0, &mut rng)?;
        let h1 = pipeline.observe(&a, &det, Hypothesis::H1, &mut rng)?;
        Ok((h0.lambda_c, h1.lambda_c))
    })?;
    let (h0, h1) = pairs.into_iter().unzip();
    Ok(Populations { h0, h1 })
}

/// ROC curve of the covariance detector, requiring at least 500 trials.
pub fn roc_curve(plan: &ExperimentPlan) -> Result<RocCurve> {
    if plan.trials < 500 {
        return Err(Error::InsufficientTrials {
            trials: plan.trials,
            alpha0: plan.alpha0,
        });
    }
    let pop = simulate_populations(plan)?;
    Ok(RocCurve::from_populations(&pop, plan.clone()))
}

/// Bootstrap standard error of the AUC for a population pair, seeded from the plan.
pub fn auc_standard_error(pop: &Populations, plan: &ExperimentPlan, reps: usize) -> f64 {
    let mut rng = StreamKey::new(plan.seed, PHASE_BOOTSTRAP).trial_rng(0);
    crate::stats::auc_bootstrap_se(&pop.h0, &pop.h1, reps, &mut rng)
}

/// Sweeps sensor noise power with signal and fusion noise fixed.
///
/// The covariance threshold is calibrated once with the sensor noise at
/// `reference_sensor_noise` and reused across the grid; energy thresholds
/// track the true (optionally perturbed) noise at each point.
pub fn sweep_snr(
    plan: &ExperimentPlan,
    sensor_noise_grid: &[f64],
    reference_sensor_noise: f64,
) -> Result<Vec<SnrPoint>> {
    if sensor_noise_grid.is_empty() {
        return Err(Error::invalid("sigma_v2 grid", "must be non-empty"));
    }
    let mut reference = plan.scenario.clone();
    reference.sensor_noise_variance = reference_sensor_noise;
    let tau_c = calibrate_threshold(&plan.with_scenario(reference))?;
    let base = StreamKey::new(plan.seed, PHASE_RATES);
    sensor_noise_grid
        .iter()
        .enumerate()
        .map(|(i, &sigma_v2)| {
            let mut sc = plan.scenario.clone();
            sc.sensor_noise_variance = sigma_v2;
            let point_plan = plan.with_scenario(sc);
            Ok(SnrPoint {
                sensor_noise_variance: sigma_v2,
                gamma0_db: point_plan.scenario.snr_db(),
                report: rates_with_key(&point_plan, tau_c, base.child(i as u64))?,
            })
        })
        .collect()
}

/// Runs [`sweep_snr`] for sparse ternary projections at each `s0` and for an
/// orthonormal-row reference (listed last), all with the plan's `M`.
pub fn sweep_sparsity(
    plan: &ExperimentPlan,
    s0_grid: &[f64],
    sensor_noise_grid: &[f64],
    reference_sensor_noise: f64,
) -> Result<Vec<(ProjectionKind, Vec<SnrPoint>)>> {
    if let Some(bad) = s0_grid.iter().find(|s| !(**s >= 1.0)) {
        return Err(Error::invalid("s0", format!("must be >= 1, got {bad}")));
    }
    s0_grid
        .iter()
        .map(|&s0| ProjectionKind::SparseTernary { s0 })
        .chain(std::iter::once(ProjectionKind::OrthonormalRows))
        .map(|kind| {
            let mut p = plan.clone();
            p.projection.kind = kind;
            Ok((kind, sweep_snr(&p, sensor_noise_grid, reference_sensor_noise)?))
        })
        .collect()
}

/// Sensor noise power giving SNR `gamma0_db` with the other powers fixed, if
/// such a positive value exists.
pub fn sensor_noise_for_snr(scenario: &ScenarioConfig, gamma0_db: f64) -> Option<f64> {
    let v = scenario.signal_variance / 10f64.powf(gamma0_db / 10.0) - scenario.fusion_noise_variance;
    (v > 0.0).then_some(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan(trials: usize) -> ExperimentPlan {
        let sc = ScenarioConfig::with_rho(12, 0.8, 1.0, 0.5, 1.0);
        let proj = ProjectionSpec::from_ratio(ProjectionKind::OrthonormalRows, 0.5, 12);
        ExperimentPlan::new(sc, proj, 10, 0.1, trials)
    }

    #[test]
    fn ratio_to_measurements() {
        assert_eq!(
            ProjectionSpec::from_ratio(ProjectionKind::OrthonormalRows, 0.4, 50).num_measurements,
            20
        );
        assert_eq!(
            ProjectionSpec::from_ratio(ProjectionKind::OrthonormalRows, 0.001, 50).num_measurements,
            1
        );
        assert_eq!(
            ProjectionSpec::from_ratio(ProjectionKind::OrthonormalRows, 2.0, 50).num_measurements,
            50
        );
    }

    #[test]
    fn stream_keys_separate_phases() {
        let a = StreamKey::new(1, PHASE_CALIBRATE).trial_rng(0).random::<u64>();
        let b = StreamKey::new(1, PHASE_RATES).trial_rng(0).random::<u64>();
        let c = StreamKey::new(1, PHASE_CALIBRATE).trial_rng(1).random::<u64>();
        let d = StreamKey::new(1, PHASE_CALIBRATE).child(0).trial_rng(0).random::<u64>();
        assert!(a != b && a != c && a != d);
        assert_eq!(a, StreamKey::new(1, PHASE_CALIBRATE).trial_rng(0).random::<u64>());
    }

    #[test]
    fn order_statistic_boundaries() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(order_statistic_threshold(values.clone(), 0.99), 1.0);
        assert_eq!(order_statistic_threshold(values.clone(), 0.1), 90.0);
        assert_eq!(order_statistic_threshold(values.clone(), 0.5), 50.0);
        assert_eq!(order_statistic_threshold(values, 0.001), 100.0);
    }

    #[test]
    fn calibration_needs_enough_trials() {
        assert!(matches!(
            calibrate_threshold(&small_plan(99)),
            Err(Error::InsufficientTrials { .. })
        ));
        let mut plan = small_plan(200);
        plan.alpha0 = 0.01;
        assert!(matches!(
            calibrate_threshold(&plan),
            Err(Error::InsufficientTrials { .. })
        ));
    }

    #[test]
    fn calibration_is_deterministic() {
        let plan = small_plan(200);
        assert_eq!(calibrate_threshold(&plan).unwrap(), calibrate_threshold(&plan).unwrap());
    }

    #[test]
    fn calibration_lowest_quantile_is_minimum() {
        let mut plan = small_plan(100);
        plan.alpha0 = 0.99;
        let tau = calibrate_threshold(&plan).unwrap();
        let pop = h0_population(&plan, StreamKey::new(plan.seed, PHASE_CALIBRATE)).unwrap();
        assert_eq!(tau, pop.iter().copied().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn infinite_thresholds() {
        let plan = small_plan(50);
        let all = estimate_rates(&plan, f64::NEG_INFINITY).unwrap();
        let c = all.covariance().unwrap();
        assert_eq!((c.pf, c.pd), (1.0, 1.0));
        let none = estimate_rates(&plan, f64::INFINITY).unwrap();
        let c = none.covariance().unwrap();
        assert_eq!((c.pf, c.pd), (0.0, 0.0));
        assert!(c.pf_halfwidth > 0.0 && c.pd_halfwidth > 0.0);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut plan = small_plan(300);
        plan.detectors
            .push(DetectorSpec::EnergyWithUncertainty { beta_db: 2.0 });
        plan.workers = 1;
        let seq = estimate_rates(&plan, 1.1).unwrap();
        plan.workers = 4;
        assert_eq!(seq, estimate_rates(&plan, 1.1).unwrap());
    }

    #[test]
    fn fixed_projection_mode_runs() {
        let mut plan = small_plan(100);
        plan.projection_mode = ProjectionMode::Fixed;
        let tau = calibrate_threshold(&plan).unwrap();
        assert!(tau >= 1.0);
    }

    #[test]
    fn noise_uncertainty_range_and_identity() {
        let mut rng = StreamKey::new(3, 99).trial_rng(0);
        assert_eq!(apply_noise_uncertainty(1.7, 0.0, &mut rng), 1.7);
        let (lo, hi) = (10f64.powf(-0.2) * 1.7, 10f64.powf(0.2) * 1.7);
        for _ in 0..10_000 {
            let v = apply_noise_uncertainty(1.7, 2.0, &mut rng);
            assert!(v >= lo * (1.0 - 1e-15) && v <= hi * (1.0 + 1e-15));
        }
    }

    #[test]
    fn noise_uncertainty_is_uniform_in_db() {
        let mut rng = StreamKey::new(4, 99).trial_rng(0);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| 10.0 * (apply_noise_uncertainty(2.0, 2.0, &mut rng) / 2.0).log10())
            .sum::<f64>()
            / n as f64;
        // uniform on [-2, 2] has sd 2/sqrt(3)
        let se = 2.0 / 3f64.sqrt() / (n as f64).sqrt();
        assert!(mean.abs() < 5.0 * se);
    }

    #[test]
    fn roc_is_monotone_and_anchored() {
        let roc = roc_curve(&small_plan(500)).unwrap();
        assert_eq!(roc.points.first(), Some(&(1.0, 1.0)));
        assert_eq!(roc.points.last(), Some(&(0.0, 0.0)));
        for w in roc.points.windows(2) {
            assert!(w[1].0 <= w[0].0 && w[1].1 <= w[0].1);
        }
        assert!(roc.auc > 0.5);
        assert!(matches!(
            roc_curve(&small_plan(499)),
            Err(Error::InsufficientTrials { .. })
        ));
    }

    #[test]
    fn sparse_projection_redraws_singular_systems() {
        // with s0 = L most rows are empty and some lags are unobservable
        let sc = ScenarioConfig::with_rho(20, 0.8, 1.0, 0.5, 0.1);
        let proj = ProjectionSpec {
            kind: ProjectionKind::SparseTernary { s0: 20.0 },
            num_measurements: 8,
        };
        let plan = ExperimentPlan::new(sc, proj, 10, 0.1, 100);
        let report = estimate_rates(&plan, 1.2).unwrap();
        assert_eq!(report.covariance().unwrap().trials, 100);
    }

    #[test]
    fn snr_helper_inverts_snr() {
        let sc = ScenarioConfig::with_rho(5, 0.8, 1.0, 0.5, 0.1);
        let v = sensor_noise_for_snr(&sc, -3.0).unwrap();
        let mut sc2 = sc.clone();
        sc2.sensor_noise_variance = v;
        assert!((sc2.snr_db() + 3.0).abs() < 1e-12);
        assert!(sensor_noise_for_snr(&sc, 15.0).is_none());
    }
}
