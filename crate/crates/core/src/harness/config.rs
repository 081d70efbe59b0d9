use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maximizer::MaximizerConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Registered suites with their default trial counts, in run order.
pub const SUITES: [(&str, usize); 15] = [
    ("lift", 1000),
    ("horizontaldistances", 1000),
    ("lipschitzhorizontal", 500),
    ("welldefined", 200),
    ("lipismaximal", 10_000),
    ("goodcurve", 10_000),
    ("differentiabilityofdistance", 1000),
    ("maximality", 1000),
    ("uds", 10_000),
    ("newcurveg", 1000),
    ("closedirection", 1000),
    ("scalarlip", 1000),
    ("meanvalue", 100),
    ("almostmax", 200),
    ("algorithm", 10),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Algebraic identities of the group.
    pub group: f64,
    /// Horizontality residual of constructed paths.
    pub lift: f64,
    /// Agreement of distance brackets with exact values.
    pub distance: f64,
    /// Slack allowed on inequalities that must hold exactly.
    pub margin: f64,
    /// Residual accepted at the smallest radius of a Pansu check.
    pub pansu: f64,
    /// Residual accepted for the distance differentiability check.
    pub distance_residual: f64,
    /// Relative spread allowed between constants fitted on two seeds.
    pub stability: f64,
    /// Relative slack on declared Lipschitz bounds.
    pub lipschitz: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            group: 1e-10,
            lift: 1e-6,
            distance: 1e-9,
            margin: 1e-9,
            pansu: 1e-3,
            distance_residual: 1e-2,
            stability: 0.1,
            lipschitz: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UdsParams {
    /// Enumeration height; `None` picks 8 in `H^1` and 5 otherwise.
    pub height: Option<u64>,
    pub depth: usize,
    pub clip: f64,
    pub mc_samples: usize,
    /// Half width of the Monte Carlo cube centred at the origin.
    pub mc_half_width: f64,
    pub mc_levels: Vec<usize>,
}

impl Default for UdsParams {
    fn default() -> Self {
        UdsParams {
            height: None,
            depth: crate::uds::DEFAULT_DEPTH,
            clip: crate::uds::DEFAULT_CLIP,
            mc_samples: 100_000,
            mc_half_width: 0.1,
            mc_levels: vec![1, 6, 12],
        }
    }
}

impl UdsParams {
    pub fn height_for(&self, n: usize) -> u64 {
        self.height.unwrap_or(if n == 1 { crate::uds::DEFAULT_HEIGHT } else { 5 })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    pub report: Option<PathBuf>,
    /// Directory for CSV sidecars; defaults to the report's directory.
    pub csv_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub n: usize,
    pub seed: u64,
    /// Second seed used by the constant stability checks.
    pub alt_seed: u64,
    pub jobs: usize,
    pub trials: BTreeMap<String, usize>,
    pub tolerances: Tolerances,
    pub uds: UdsParams,
    pub maximizer: MaximizerConfig,
    pub output: OutputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            n: 1,
            seed: 0,
            alt_seed: 1,
            jobs: 4,
            trials: SUITES.iter().map(|(s, t)| (s.to_string(), *t)).collect(),
            tolerances: Tolerances::default(),
            uds: UdsParams::default(),
            maximizer: MaximizerConfig::default(),
            output: OutputPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n == 0 {
            return Err(Error::ZeroDimension);
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        let t = &self.tolerances;
        let all = [
            t.group,
            t.lift,
            t.distance,
            t.margin,
            t.pansu,
            t.distance_residual,
            t.stability,
            t.lipschitz,
        ];
        if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config("all tolerances must be positive and finite".into()));
        }
        if let Some(name) = self.trials.keys().find(|k| !SUITES.iter().any(|(s, _)| s == k)) {
            return Err(Error::UnknownSuite(name.clone()));
        }
        if self.uds.mc_levels.iter().any(|&k| k == 0 || k > self.uds.depth) {
            return Err(Error::Config("Monte Carlo levels must lie in 1..=depth".into()));
        }
        self.maximizer.validate()
    }

    /// Trial count of a suite; unknown names fall back to zero.
    pub fn trials_for(&self, suite: &str) -> usize {
        self.trials
            .get(suite)
            .copied()
            .or_else(|| SUITES.iter().find(|(s, _)| *s == suite).map(|(_, t)| *t))
            .unwrap_or(0)
    }

    pub fn set_all_trials(&mut self, trials: usize) {
        for (s, _) in SUITES {
            self.trials.insert(s.to_string(), trials);
        }
    }

    /// Applies `HCALC_*` overrides from the given variables.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("cannot parse {key}={v}")))
        }
        for (key, v) in vars {
            match key.as_str() {
                "HCALC_N" => self.n = parse(&key, &v)?,
                "HCALC_SEED" => self.seed = parse(&key, &v)?,
                "HCALC_ALT_SEED" => self.alt_seed = parse(&key, &v)?,
                "HCALC_JOBS" => self.jobs = parse(&key, &v)?,
                "HCALC_TRIALS" => self.set_all_trials(parse(&key, &v)?),
                "HCALC_UDS_HEIGHT" => self.uds.height = Some(parse(&key, &v)?),
                "HCALC_UDS_DEPTH" => self.uds.depth = parse(&key, &v)?,
                "HCALC_MC_SAMPLES" => self.uds.mc_samples = parse(&key, &v)?,
                "HCALC_MAX_STEPS" => self.maximizer.max_steps = parse(&key, &v)?,
                "HCALC_REPORT" => self.output.report = Some(PathBuf::from(v)),
                "HCALC_CSV_DIR" => self.output.csv_dir = Some(PathBuf::from(v)),
                k if k.starts_with("HCALC_") => return Err(Error::Config(format!("unknown override {k}"))),
                _ => {}
            }
        }
        self.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut cfg = RunConfig {
            seed: 42,
            ..RunConfig::default()
        };
        cfg.output.report = Some(PathBuf::from("out/report.json"));
        let back = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn missing_fields_take_defaults() {
        let cfg = RunConfig::from_json(r#"{"schema_version": 1, "seed": 7}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.trials_for("goodcurve"), 10_000);
    }

    #[test]
    fn wrong_schema_rejected() {
        assert!(matches!(RunConfig::from_json(r#"{"schema_version": 9}"#), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_json("{not json"), Err(Error::Config(_))));
    }

    #[test]
    fn env_overrides() {
        let mut cfg = RunConfig::default();
        let vars = [("HCALC_SEED", "5"), ("HCALC_TRIALS", "10"), ("PATH", "/bin")];
        cfg.apply_env(vars.iter().map(|(k, v)| (k.to_string(), v.to_string()))).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.trials_for("lift"), 10);
        let bad = [("HCALC_SEED", "x")];
        assert!(cfg.apply_env(bad.iter().map(|(k, v)| (k.to_string(), v.to_string()))).is_err());
    }

    #[test]
    fn nonpositive_tolerance_rejected() {
        let mut cfg = RunConfig::default();
        cfg.tolerances.lift = 0.0;
        assert!(cfg.validate().is_err());
    }
}
