//! Experiment configuration files.
//!
//! A config is a TOML document of flat `key = value` pairs. Keys may sit at
//! the top level or be grouped under single-level `[section]` headers; the
//! section names carry no meaning. Unknown keys are rejected.
//!
//! ```toml
//! [scenario]
//! num_sensors = 50
//! rho = 0.8
//! sigma_s2 = 1.0
//! sigma_v2 = 0.5
//! sigma_w2 = 1.0
//!
//! [projection]
//! compression_ratio = 0.4
//!
//! [detector]
//! K = 3
//! T = 10
//! alpha0 = 0.1
//!
//! [run]
//! trials = 3000
//! seed = 42
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use covdet_core::experiment::{DetectorSpec, ExperimentPlan, ProjectionMode, ProjectionSpec, DEFAULT_SEED};
use covdet_core::scenario::{CorrelationModel, ScenarioConfig, SourceKind};
use covdet_core::{detector::DEFAULT_K, ProjectionKind};
use toml::Value;

use crate::error::CliError;

const KNOWN_KEYS: &[&str] = &[
    "num_sensors",
    "inter_sensor_distance",
    "rho",
    "theta1",
    "sigma_s2",
    "sigma_v2",
    "sigma_w2",
    "compression_ratio",
    "M",
    "projection_kind",
    "s0",
    "K",
    "T",
    "alpha0",
    "beta_db",
    "trials",
    "seed",
];

/// Flattened key/value pairs, remembering where each key was found.
struct Entries(BTreeMap<String, (String, Value)>);

impl Entries {
    fn collect(doc: toml::Table) -> Result<Self, CliError> {
        let mut out = BTreeMap::new();
        let mut insert = |key: String, path: String, value: Value| -> Result<(), CliError> {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::config(&path, "unknown key"));
            }
            if let Some((first, _)) = out.get(&key) {
                return Err(CliError::config(
                    &path,
                    format!("duplicate key, already set at `{first}`"),
                ));
            }
            out.insert(key, (path, value));
            Ok(())
        };
        for (key, value) in doc {
            match value {
                Value::Table(section) => {
                    for (inner, v) in section {
                        let path = format!("{key}.{inner}");
                        if v.is_table() {
                            return Err(CliError::config(&path, "nested sections are not supported"));
                        }
                        insert(inner, path, v)?;
                    }
                }
                v => insert(key.clone(), key, v)?,
            }
        }
        Ok(Self(out))
    }

    fn path(&self, key: &str) -> String {
        self.0.get(key).map_or_else(|| key.to_string(), |(p, _)| p.clone())
    }

    fn real(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.0.get(key) {
            None => Ok(None),
            Some((_, Value::Float(f))) => Ok(Some(*f)),
            Some((_, Value::Integer(i))) => Ok(Some(*i as f64)),
            Some((path, _)) => Err(CliError::config(path, "expected a number")),
        }
    }

    fn count(&self, key: &str) -> Result<Option<u64>, CliError> {
        match self.0.get(key) {
            None => Ok(None),
            Some((path, Value::Integer(i))) => u64::try_from(*i)
                .map(Some)
                .map_err(|_| CliError::config(path, "must be non-negative")),
            Some((path, _)) => Err(CliError::config(path, "expected an integer")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&str>, CliError> {
        match self.0.get(key) {
            None => Ok(None),
            Some((_, Value::String(s))) => Ok(Some(s)),
            Some((path, _)) => Err(CliError::config(path, "expected a string")),
        }
    }

    fn required_real(&self, key: &str) -> Result<f64, CliError> {
        self.real(key)?
            .ok_or_else(|| CliError::config(key, "missing required key"))
    }

    fn required_count(&self, key: &str) -> Result<u64, CliError> {
        self.count(key)?
            .ok_or_else(|| CliError::config(key, "missing required key"))
    }
}

fn to_usize(entries: &Entries, key: &str, v: u64) -> Result<usize, CliError> {
    usize::try_from(v).map_err(|_| CliError::config(&entries.path(key), "value too large"))
}

/// Parses config text into a validated plan.
pub fn parse_config_str(text: &str) -> Result<ExperimentPlan, CliError> {
    let doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::config("<document>", e.message().to_string()))?;
    let e = Entries::collect(doc)?;

    let num_sensors = to_usize(&e, "num_sensors", e.required_count("num_sensors")?)?;
    if num_sensors < 2 {
        return Err(CliError::config(&e.path("num_sensors"), "requires L >= 2"));
    }
    let inter_sensor_distance = e.real("inter_sensor_distance")?.unwrap_or(1.0);

    let correlation = match (e.real("rho")?, e.real("theta1")?) {
        (Some(_), Some(_)) => {
            return Err(CliError::config(
                &e.path("theta1"),
                "`rho` and `theta1` are mutually exclusive",
            ));
        }
        (None, None) => return Err(CliError::config("rho", "one of `rho` or `theta1` is required")),
        (Some(rho), None) => {
            if !(rho.abs() < 1.0) {
                return Err(CliError::config(
                    &e.path("rho"),
                    format!("requires |rho| < 1, got {rho}"),
                ));
            }
            CorrelationModel::DirectRho { rho }
        }
        (None, Some(theta1)) => {
            if !(theta1 > 0.0) {
                return Err(CliError::config(&e.path("theta1"), "must be positive"));
            }
            CorrelationModel::PowerExponential { theta1 }
        }
    };

    let scenario = ScenarioConfig {
        num_sensors,
        inter_sensor_distance,
        correlation,
        signal_variance: e.required_real("sigma_s2")?,
        sensor_noise_variance: e.required_real("sigma_v2")?,
        fusion_noise_variance: e.required_real("sigma_w2")?,
        source: SourceKind::Gaussian,
    };
    for (key, v) in [
        ("inter_sensor_distance", scenario.inter_sensor_distance),
        ("sigma_s2", scenario.signal_variance),
        ("sigma_v2", scenario.sensor_noise_variance),
        ("sigma_w2", scenario.fusion_noise_variance),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::config(&e.path(key), format!("must be positive, got {v}")));
        }
    }

    let kind = match e.string("projection_kind")?.unwrap_or("orthonormal") {
        "orthonormal" => ProjectionKind::OrthonormalRows,
        "sparse" => {
            let s0 = e.real("s0")?.unwrap_or(1.0);
            if !(s0 >= 1.0) {
                return Err(CliError::config(&e.path("s0"), format!("requires s0 >= 1, got {s0}")));
            }
            ProjectionKind::SparseTernary { s0 }
        }
        other => {
            return Err(CliError::config(
                &e.path("projection_kind"),
                format!("expected `orthonormal` or `sparse`, got `{other}`"),
            ));
        }
    };
    let projection = match (e.real("compression_ratio")?, e.count("M")?) {
        (Some(_), Some(_)) => {
            return Err(CliError::config(
                &e.path("M"),
                "`compression_ratio` and `M` are mutually exclusive",
            ));
        }
        (None, None) => {
            return Err(CliError::config(
                "compression_ratio",
                "one of `compression_ratio` or `M` is required",
            ));
        }
        (Some(cr), None) => {
            if !(cr > 0.0 && cr <= 1.0) {
                return Err(CliError::config(&e.path("compression_ratio"), "must lie in (0, 1]"));
            }
            ProjectionSpec::from_ratio(kind, cr, num_sensors)
        }
        (None, Some(m)) => {
            let m = to_usize(&e, "M", m)?;
            if m == 0 || m > num_sensors {
                return Err(CliError::config(&e.path("M"), format!("requires 1 <= M <= L, got {m}")));
            }
            ProjectionSpec {
                kind,
                num_measurements: m,
            }
        }
    };

    let k = match e.count("K")? {
        Some(k) => to_usize(&e, "K", k)?,
        None => DEFAULT_K,
    };
    if k == 0 || k > num_sensors {
        return Err(CliError::config(&e.path("K"), format!("requires 1 <= K <= L, got {k}")));
    }
    let t = to_usize(&e, "T", e.required_count("T")?)?;
    if t == 0 {
        return Err(CliError::config(&e.path("T"), "must be at least 1"));
    }
    let alpha0 = e.required_real("alpha0")?;
    if !(alpha0 > 0.0 && alpha0 < 1.0) {
        return Err(CliError::config(&e.path("alpha0"), "must lie in (0, 1)"));
    }
    let beta_db = e.real("beta_db")?.unwrap_or(0.0);
    if !(beta_db >= 0.0) {
        return Err(CliError::config(&e.path("beta_db"), "must be >= 0"));
    }
    let trials = to_usize(&e, "trials", e.required_count("trials")?)?;
    if trials == 0 {
        return Err(CliError::config(&e.path("trials"), "must be at least 1"));
    }
    let seed = e.count("seed")?.unwrap_or(DEFAULT_SEED);

    let mut detectors = vec![DetectorSpec::CovarianceRatio, DetectorSpec::Energy];
    if beta_db > 0.0 {
        detectors.push(DetectorSpec::EnergyWithUncertainty { beta_db });
    }
    let plan = ExperimentPlan {
        scenario,
        projection,
        projection_mode: ProjectionMode::FreshPerTrial,
        k,
        t,
        detectors,
        alpha0,
        trials,
        seed,
        workers: 0,
    };
    plan.validate()
        .map_err(|err| CliError::config("<plan>", err.to_string()))?;
    Ok(plan)
}

pub fn parse_config(path: &Path) -> Result<ExperimentPlan, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

/// Renders a plan back into config syntax. Parsing the output yields the
/// same plan.
pub fn echo_config(plan: &ExperimentPlan) -> String {
    let sc = &plan.scenario;
    let mut out = String::new();
    let _ = writeln!(out, "num_sensors = {}", sc.num_sensors);
    let _ = writeln!(out, "inter_sensor_distance = {:?}", sc.inter_sensor_distance);
    match sc.correlation {
        CorrelationModel::DirectRho { rho } => {
            let _ = writeln!(out, "rho = {rho:?}");
        }
        CorrelationModel::PowerExponential { theta1 } => {
            let _ = writeln!(out, "theta1 = {theta1:?}");
        }
    }
    let _ = writeln!(out, "sigma_s2 = {:?}", sc.signal_variance);
    let _ = writeln!(out, "sigma_v2 = {:?}", sc.sensor_noise_variance);
    let _ = writeln!(out, "sigma_w2 = {:?}", sc.fusion_noise_variance);
    let _ = writeln!(out, "M = {}", plan.projection.num_measurements);
    match plan.projection.kind {
        ProjectionKind::OrthonormalRows => {
            let _ = writeln!(out, "projection_kind = \"orthonormal\"");
        }
        ProjectionKind::SparseTernary { s0 } => {
            let _ = writeln!(out, "projection_kind = \"sparse\"");
            let _ = writeln!(out, "s0 = {s0:?}");
        }
    }
    let beta_db = plan
        .detectors
        .iter()
        .find_map(|d| match d {
            DetectorSpec::EnergyWithUncertainty { beta_db } => Some(*beta_db),
            _ => None,
        })
        .unwrap_or(0.0);
    let _ = writeln!(out, "K = {}", plan.k);
    let _ = writeln!(out, "T = {}", plan.t);
    let _ = writeln!(out, "alpha0 = {:?}", plan.alpha0);
    let _ = writeln!(out, "beta_db = {beta_db:?}");
    let _ = writeln!(out, "trials = {}", plan.trials);
    let _ = writeln!(out, "seed = {}", plan.seed);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
num_sensors = 50
rho = 0.8
sigma_s2 = 1
sigma_v2 = 0.5
sigma_w2 = 1.0
compression_ratio = 0.4
T = 10
alpha0 = 0.1
trials = 1000
";

    fn err_key(text: &str) -> String {
        match parse_config_str(text) {
            Err(CliError::ConfigInvalid { key, .. }) => key,
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let plan = parse_config_str(MINIMAL).unwrap();
        assert_eq!(plan.k, 3);
        assert_eq!(plan.projection.kind, ProjectionKind::OrthonormalRows);
        assert_eq!(plan.projection.num_measurements, 20);
        assert_eq!(
            plan.detectors,
            vec![DetectorSpec::CovarianceRatio, DetectorSpec::Energy]
        );
        assert_eq!(plan.seed, DEFAULT_SEED);
        assert_eq!(plan.scenario.inter_sensor_distance, 1.0);
    }

    #[test]
    fn sections_are_flattened() {
        let text = "
[scenario]
num_sensors = 10
theta1 = 2.0
sigma_s2 = 1.0
sigma_v2 = 0.5
sigma_w2 = 0.1
[projection]
M = 4
projection_kind = 'sparse'
s0 = 3.5
[run]
T = 5
alpha0 = 0.05
beta_db = 2
trials = 200
seed = 7
";
        let plan = parse_config_str(text).unwrap();
        assert_eq!(plan.projection.kind, ProjectionKind::SparseTernary { s0: 3.5 });
        assert_eq!(plan.projection.num_measurements, 4);
        assert_eq!(
            plan.scenario.correlation,
            CorrelationModel::PowerExponential { theta1: 2.0 }
        );
        assert_eq!(plan.detectors.len(), 3);
        assert_eq!(plan.seed, 7);
    }

    #[test]
    fn single_sensor_names_num_sensors() {
        assert_eq!(
            err_key(&MINIMAL.replace("num_sensors = 50", "num_sensors = 1")),
            "num_sensors"
        );
    }

    #[test]
    fn rho_out_of_range() {
        assert_eq!(err_key(&MINIMAL.replace("rho = 0.8", "rho = 1.2")), "rho");
    }

    #[test]
    fn rho_and_theta_exclusive() {
        let key = err_key(&format!("{MINIMAL}theta1 = 1.0\n"));
        assert_eq!(key, "theta1");
    }

    #[test]
    fn unknown_and_mistyped_keys() {
        assert_eq!(err_key(&format!("{MINIMAL}[extra]\nfoo = 1\n")), "extra.foo");
        assert_eq!(err_key(&MINIMAL.replace("T = 10", "T = 'ten'")), "T");
        assert_eq!(err_key(&MINIMAL.replace("trials = 1000", "")), "trials");
        assert_eq!(err_key(&format!("{MINIMAL}[s]\nrho = 0.5\n")), "s.rho");
    }

    #[test]
    fn echo_round_trips() {
        let mut text = MINIMAL.replace(
            "compression_ratio = 0.4",
            "M = 7\nprojection_kind = \"sparse\"\ns0 = 7.0710678118654755",
        );
        text.push_str("beta_db = 2.0\nseed = 99\n");
        let plan = parse_config_str(&text).unwrap();
        assert_eq!(parse_config_str(&echo_config(&plan)).unwrap(), plan);
    }
}
