//! Run configuration: flat JSON keys, command-line overrides, defaults and
//! validation.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::engine::{ForwardVariance, ModelParams};
use crate::estimators::EstimatorKind;
use crate::lab::benchmark::reference_targets;
use crate::lab::calibration::Bounds;
use crate::lab::smile::{default_deltas, DEFAULT_MATURITIES};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    VolterraCheck,
    Smile,
    Benchmark,
    Calibrate,
    ExtractXi,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::VolterraCheck,
        Command::Smile,
        Command::Benchmark,
        Command::Calibrate,
        Command::ExtractXi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::VolterraCheck => "volterra-check",
            Command::Smile => "smile",
            Command::Benchmark => "benchmark",
            Command::Calibrate => "calibrate",
            Command::ExtractXi => "extract-xi",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::config("command", format!("unknown command `{s}`")))
    }
}

/// Every accepted key; all optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    xi0: Option<f64>,
    xi0_times: Option<Vec<f64>>,
    xi0_values: Option<Vec<f64>>,
    eta: Option<f64>,
    rho: Option<f64>,
    alpha: Option<f64>,
    n_steps: Option<usize>,
    n_paths: Option<usize>,
    n_reps: Option<usize>,
    n_batches: Option<usize>,
    estimator: Option<EstimatorKind>,
    estimators: Option<Vec<EstimatorKind>>,
    maturity: Option<f64>,
    maturities: Option<Vec<f64>>,
    deltas: Option<Vec<f64>>,
    log_strikes: Option<Vec<f64>>,
    target_vols: Option<Vec<f64>>,
    labels: Option<Vec<String>>,
    seed: Option<u64>,
    budget_ms: Option<u64>,
    max_evals: Option<usize>,
    n_calibrations: Option<usize>,
    target_paths: Option<usize>,
    tau_ms: Option<f64>,
    input: Option<String>,
}

/// A fully resolved and validated configuration. Serialised into the
/// output header.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(skip)]
    pub command: Command,
    pub xi0: f64,
    pub xi0_times: Option<Vec<f64>>,
    pub xi0_values: Option<Vec<f64>>,
    pub eta: f64,
    pub rho: f64,
    pub alpha: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub n_reps: usize,
    pub n_batches: usize,
    pub estimator: EstimatorKind,
    pub estimators: Vec<EstimatorKind>,
    pub maturity: f64,
    pub maturities: Vec<f64>,
    pub deltas: Vec<f64>,
    pub log_strikes: Option<Vec<f64>>,
    pub target_vols: Option<Vec<f64>>,
    pub labels: Option<Vec<String>>,
    pub seed: u64,
    /// 0 disables the wall-clock cap.
    pub budget_ms: u64,
    pub max_evals: usize,
    pub n_calibrations: usize,
    pub target_paths: usize,
    /// Replaces the measured `τ` in benchmark output.
    pub tau_ms: Option<f64>,
    pub input: Option<String>,
}

pub const DEFAULT_SEED: u64 = 20_170_831;

impl RunConfig {
    /// Defaults for `command` with nothing overridden.
    pub fn defaults(command: Command) -> Self {
        let n_paths = match command {
            Command::VolterraCheck => 100_000,
            Command::Smile => 400_000,
            Command::Benchmark | Command::Calibrate | Command::ExtractXi => 1_000,
        };
        Self {
            command,
            xi0: 0.235 * 0.235,
            xi0_times: None,
            xi0_values: None,
            eta: 1.9,
            rho: -0.9,
            alpha: -0.43,
            n_steps: 312,
            n_paths,
            n_reps: 1_000,
            n_batches: 20,
            estimator: EstimatorKind::Mixed,
            estimators: EstimatorKind::ALL.to_vec(),
            maturity: 0.25,
            maturities: DEFAULT_MATURITIES.to_vec(),
            deltas: default_deltas(),
            log_strikes: None,
            target_vols: None,
            labels: None,
            seed: DEFAULT_SEED,
            budget_ms: 700,
            max_evals: 200,
            n_calibrations: 20,
            target_paths: 400_000,
            tau_ms: None,
            input: None,
        }
    }

    /// Resolves `values` (a flat JSON object) on top of the defaults.
    pub fn from_json(command: Command, values: &Map<String, Value>) -> Result<Self> {
        // one key at a time, so that type errors name the offending key
        for (key, value) in values {
            let mut single = Map::new();
            single.insert(key.clone(), value.clone());
            if let Err(e) = serde_json::from_value::<RawConfig>(Value::Object(single)) {
                return Err(Error::config(key.clone(), e.to_string()));
            }
        }
        let raw: RawConfig = serde_json::from_value(Value::Object(values.clone()))
            .map_err(|e| Error::config("config", e.to_string()))?;
        let mut c = Self::defaults(command);
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = raw.$f { c.$f = v; } )* };
        }
        take!(
            xi0,
            eta,
            rho,
            alpha,
            n_steps,
            n_paths,
            n_reps,
            n_batches,
            estimator,
            estimators,
            maturity,
            maturities,
            deltas,
            seed,
            budget_ms,
            max_evals,
            n_calibrations,
            target_paths
        );
        c.xi0_times = raw.xi0_times;
        c.xi0_values = raw.xi0_values;
        c.log_strikes = raw.log_strikes;
        c.target_vols = raw.target_vols;
        c.labels = raw.labels;
        c.tau_ms = raw.tau_ms;
        c.input = raw.input;
        c.resolve_targets()?;
        c.validate()?;
        Ok(c)
    }

    fn resolve_targets(&mut self) -> Result<()> {
        if self.command != Command::Benchmark || self.log_strikes.is_some() || self.target_vols.is_some() {
            return Ok(());
        }
        let t = reference_targets(self.rho).ok_or_else(|| {
            Error::config(
                "log_strikes",
                "benchmark targets have defaults only for rho = -0.9 and rho = 0; pass log_strikes and target_vols",
            )
        })?;
        self.log_strikes = Some(t.iter().map(|s| s.k).collect());
        self.target_vols = Some(t.iter().map(|s| s.target_vol).collect());
        if self.labels.is_none() {
            self.labels = Some(t.iter().map(|s| s.label.clone()).collect());
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Err(Error::config(field, reason));
        if !(self.xi0 > 0.0 && self.xi0.is_finite()) {
            return bad("xi0", format!("must be positive, got {}", self.xi0));
        }
        match (&self.xi0_times, &self.xi0_values) {
            (None, None) => {}
            (Some(t), Some(v)) => {
                if let Err(e) = ForwardVariance::piecewise(t.clone(), v.clone()) {
                    return bad("xi0_times", e.to_string());
                }
            }
            (Some(_), None) => return bad("xi0_values", "required with xi0_times".into()),
            (None, Some(_)) => return bad("xi0_times", "required with xi0_values".into()),
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta", format!("must be positive, got {}", self.eta));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return bad("rho", format!("must lie in [-1, 1], got {}", self.rho));
        }
        if !(self.alpha > -0.5 && self.alpha <= 0.0) {
            return bad("alpha", format!("must lie in (-0.5, 0], got {}", self.alpha));
        }
        if self.n_steps == 0 {
            return bad("n_steps", "must be at least 1".into());
        }
        if self.n_paths < 2 {
            return bad("n_paths", "must be at least 2".into());
        }
        let kinds: &[EstimatorKind] = match self.command {
            Command::Benchmark => &self.estimators,
            Command::Smile | Command::Calibrate => std::slice::from_ref(&self.estimator),
            _ => &[],
        };
        if self.command == Command::Benchmark && kinds.is_empty() {
            return bad("estimators", "need at least one estimator".into());
        }
        if self.n_paths % 2 == 1 && kinds.iter().any(|k| k.path_requirements().antithetic) {
            return bad("n_paths", "must be even for antithetic estimators".into());
        }
        if self.n_reps < 2 {
            return bad("n_reps", "must be at least 2".into());
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return bad("maturity", format!("must be positive, got {}", self.maturity));
        }
        if self.maturities.is_empty()
            || self.maturities.iter().any(|t| !(*t > 0.0 && t.is_finite()))
            || self.maturities.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("maturities", "must be positive and strictly increasing".into());
        }
        if self.deltas.is_empty()
            || self.deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0))
            || self.deltas.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("deltas", "must be strictly increasing inside (0, 1)".into());
        }
        if let Some(v) = &self.target_vols {
            if v.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return bad("target_vols", "must be positive".into());
            }
            match &self.log_strikes {
                Some(k) if k.len() == v.len() => {}
                _ => return bad("log_strikes", "need one log-strike per target vol".into()),
            }
        } else if self.command == Command::Benchmark {
            return bad("target_vols", "required with log_strikes".into());
        }
        if let Some(k) = &self.log_strikes {
            if k.is_empty() || k.iter().any(|x| !x.is_finite()) {
                return bad("log_strikes", "must be finite and non-empty".into());
            }
            if self.target_vols.is_none() {
                return bad("target_vols", "required with log_strikes".into());
            }
            if let Some(l) = &self.labels {
                if l.len() != k.len() {
                    return bad("labels", "need one label per log-strike".into());
                }
            }
        }
        if self.command == Command::Calibrate {
            let b = Bounds::default();
            if !(b.rho.0..=b.rho.1).contains(&self.rho) {
                return bad(
                    "rho",
                    format!("calibration starts inside [{}, {}], got {}", b.rho.0, b.rho.1, self.rho),
                );
            }
            if !(b.eta.0..=b.eta.1).contains(&self.eta) {
                return bad(
                    "eta",
                    format!("calibration starts inside [{}, {}], got {}", b.eta.0, b.eta.1, self.eta),
                );
            }
        }
        if self.n_calibrations == 0 {
            return bad("n_calibrations", "must be at least 1".into());
        }
        if self.max_evals < 4 {
            return bad("max_evals", "must be at least 4".into());
        }
        if self.target_paths < 2 || self.target_paths % 2 == 1 {
            return bad("target_paths", "must be even and at least 2".into());
        }
        if let Some(t) = self.tau_ms {
            if !(t > 0.0 && t.is_finite()) {
                return bad("tau_ms", "must be positive".into());
            }
        }
        if self.command == Command::ExtractXi && self.input.is_none() {
            return bad("input", "extract-xi reads a smile CSV given by `input`".into());
        }
        Ok(())
    }

    pub fn forward_variance(&self) -> Result<ForwardVariance> {
        match (&self.xi0_times, &self.xi0_values) {
            (Some(t), Some(v)) => ForwardVariance::piecewise(t.clone(), v.clone()),
            _ => Ok(ForwardVariance::flat(self.xi0)),
        }
    }

    pub fn model(&self) -> Result<ModelParams> {
        ModelParams::new(self.forward_variance()?, self.eta, self.rho, self.alpha)
    }

    /// `# key=value` lines: command, then every resolved key in sorted order.
    pub fn provenance(&self) -> Vec<String> {
        let mut lines = vec![
            format!("# rbergomi {}", env!("CARGO_PKG_VERSION")),
            format!("# command={}", self.command),
        ];
        if let Ok(Value::Object(map)) = serde_json::to_value(self) {
            let sorted: std::collections::BTreeMap<_, _> = map.into_iter().collect();
            for (k, v) in sorted {
                lines.push(format!("# {k}={v}"));
            }
        }
        lines
    }
}

/// A parsed command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub command: Command,
    pub config_file: Option<PathBuf>,
    /// `--key=value` pairs in order; later ones win.
    pub overrides: Vec<(String, Value)>,
    pub out: PathBuf,
}

/// JSON if it parses, a list if it has commas, otherwise a plain string.
pub fn parse_flag_value(raw: &str) -> Value {
    if let Ok(v) = serde_json::from_str::<Value>(raw) {
        return v;
    }
    if raw.contains(',') {
        return Value::Array(
            raw.split(',')
                .map(|s| serde_json::from_str(s.trim()).unwrap_or_else(|_| Value::String(s.trim().to_string())))
                .collect(),
        );
    }
    Value::String(raw.to_string())
}

/// Parses `<command> [--config FILE] [--key=value ...] --out PATH`.
pub fn parse_args<I: IntoIterator<Item = String>>(args: I) -> Result<Invocation> {
    let mut args = args.into_iter();
    let command: Command = args
        .next()
        .ok_or_else(|| Error::config("command", "missing command"))?
        .parse()?;
    let mut config_file = None;
    let mut out = None;
    let mut overrides = Vec::new();
    while let Some(arg) = args.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            return Err(Error::config(arg.clone(), "unexpected positional argument"));
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = args.next().ok_or_else(|| Error::config(flag, "missing value"))?;
                (flag.to_string(), v)
            }
        };
        let key = key.replace('-', "_");
        match key.as_str() {
            "config" => config_file = Some(PathBuf::from(value)),
            "out" => out = Some(PathBuf::from(value)),
            _ => overrides.push((key, parse_flag_value(&value))),
        }
    }
    Ok(Invocation {
        command,
        config_file,
        overrides,
        out: out.ok_or_else(|| Error::config("out", "--out PATH is required"))?,
    })
}

/// Merges the config file (if any) with the overrides and resolves it.
const LIST_KEYS: [&str; 8] = [
    "xi0_times",
    "xi0_values",
    "estimators",
    "maturities",
    "deltas",
    "log_strikes",
    "target_vols",
    "labels",
];

pub fn parse_config(inv: &Invocation) -> Result<RunConfig> {
    let mut values = match &inv.config_file {
        None => Map::new(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(Error::config("config", "top level must be a JSON object")),
                Err(e) => return Err(Error::config("config", format!("malformed JSON: {e}"))),
            }
        }
    };
    for (k, v) in &inv.overrides {
        let v = match v {
            Value::Array(_) => v.clone(),
            // `--deltas=0.5` is a one-element list
            _ if LIST_KEYS.contains(&k.as_str()) => Value::Array(vec![v.clone()]),
            _ => v.clone(),
        };
        values.insert(k.clone(), v);
    }
    RunConfig::from_json(inv.command, &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn obj(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn empty_config_uses_defaults() {
        let c = RunConfig::from_json(Command::Smile, &Map::new()).unwrap();
        assert_eq!(c.xi0, 0.235 * 0.235);
        assert_eq!((c.eta, c.rho, c.alpha, c.n_steps), (1.9, -0.9, -0.43, 312));
        assert_eq!(c.deltas.len(), 19);
    }

    #[test]
    fn errors_name_the_field() {
        let e = RunConfig::from_json(Command::Smile, &obj(json!({"rho": 1.5}))).unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "rho"), "{e}");
        assert_eq!(e.exit_code(), 2);
        let e = RunConfig::from_json(Command::Smile, &obj(json!({"eta": "high"}))).unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "eta"), "{e}");
        let e = RunConfig::from_json(Command::Smile, &obj(json!({"colour": 3}))).unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "colour"), "{e}");
        let e = RunConfig::from_json(Command::Smile, &obj(json!({"estimator": "turbo"}))).unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "estimator"), "{e}");
    }

    #[test]
    fn flags_override_file_values() {
        let dir = std::env::temp_dir().join(format!("rbergomi-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let file = dir.join("c.json");
        std::fs::write(&file, r#"{"eta": 1.9, "n_paths": 2000}"#).unwrap();
        let args = [
            "smile",
            "--config",
            file.to_str().unwrap(),
            "--eta=2.0",
            "--out",
            "x.csv",
        ];
        let inv = parse_args(args.iter().map(|s| s.to_string())).unwrap();
        let c = parse_config(&inv).unwrap();
        assert_eq!((c.eta, c.n_paths), (2.0, 2000));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn single_flag_value_fills_a_list() {
        let args = [
            "benchmark",
            "--estimators=controlled",
            "--maturities=0.5",
            "--out=x.csv",
        ];
        let c = parse_config(&parse_args(args.iter().map(|s| s.to_string())).unwrap()).unwrap();
        assert_eq!(c.estimators, vec![EstimatorKind::Controlled]);
        assert_eq!(c.maturities, vec![0.5]);
        let e = RunConfig::from_json(Command::Benchmark, &obj(json!({"estimators": "base"}))).unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "estimators"));
    }

    #[test]
    fn flag_values() {
        assert_eq!(parse_flag_value("2.5"), json!(2.5));
        assert_eq!(parse_flag_value("mixed"), json!("mixed"));
        assert_eq!(parse_flag_value("base,mixed"), json!(["base", "mixed"]));
        assert_eq!(parse_flag_value("0.1,0.5"), json!([0.1, 0.5]));
        assert_eq!(parse_flag_value("[1,2]"), json!([1, 2]));
    }

    #[test]
    fn arg_errors() {
        let v = |a: &[&str]| parse_args(a.iter().map(|s| s.to_string()));
        assert!(v(&[]).is_err());
        assert!(v(&["fly", "--out", "x"]).is_err());
        assert!(v(&["smile"]).is_err());
        assert!(v(&["smile", "stray", "--out", "x"]).is_err());
        let inv = v(&["benchmark", "--n-paths=10", "--out=x.csv"]).unwrap();
        assert_eq!(inv.overrides, vec![("n_paths".to_string(), json!(10))]);
    }

    #[test]
    fn benchmark_targets_default_by_regime() {
        let c = RunConfig::from_json(Command::Benchmark, &obj(json!({"rho": 0.0}))).unwrap();
        assert_eq!(c.log_strikes.unwrap(), vec![-0.1475, 0.0, 0.1656]);
        let e = RunConfig::from_json(Command::Benchmark, &obj(json!({"rho": 0.3}))).unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "log_strikes"));
        let e = RunConfig::from_json(Command::Benchmark, &obj(json!({"log_strikes": [0.0]}))).unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "target_vols"));
    }

    #[test]
    fn odd_paths_rejected_for_antithetic_estimators() {
        let e = RunConfig::from_json(Command::Smile, &obj(json!({"n_paths": 1001}))).unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "n_paths"));
        assert!(RunConfig::from_json(
            Command::Benchmark,
            &obj(json!({"n_paths": 1001, "estimators": ["base"]}))
        )
        .is_ok());
    }

    #[test]
    fn calibration_start_must_be_in_bounds() {
        let e = RunConfig::from_json(Command::Calibrate, &obj(json!({"eta": 0.5}))).unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "eta"));
    }

    #[test]
    fn provenance_is_sorted_and_complete() {
        let c = RunConfig::defaults(Command::Smile);
        let lines = c.provenance();
        assert_eq!(lines[1], "# command=smile");
        assert!(lines.contains(&format!("# seed={DEFAULT_SEED}")));
        let keys: Vec<&str> = lines[2..].iter().map(|l| l[2..].split('=').next().unwrap()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(keys.contains(&"xi0") && keys.contains(&"n_steps"));
    }
}
