//! Run configuration in a flat `key = value` text format.
//!
//! Blank lines and lines starting with `#` are ignored, as is anything after
//! a `#` on a value line. Recognised keys:
//!
//! ```text
//! model = models/cnn.dtnn
//! dataset = data
//! out = out
//! seed = 0
//! threshold = 0.2
//! lambda = 5
//! epsilon = 0.03
//! max_failed_tries = 25
//! max_seeds = 100
//! sweep_lambdas = 1,2,3,4,5,6,7,8,9,10
//! sweep_epsilons = 0.01,0.02,0.03,0.04,0.05
//! search_kinds = translation,scale,shear,rotation,contrast,brightness,blur
//! grid.rotation = rotation:3; rotation:6; rotation:9
//! ```
//!
//! `grid.<kind>` overrides the parameter list of one transformation kind
//! with `;`-separated transformation strings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use steercov_core::coverage::ActivationThreshold;
use steercov_core::imgproc::{default_grid, TransformKind, TransformSpec};
use steercov_core::oracle::OracleConfig;
use steercov_core::search::{SearchConfig, TransformGrid};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub out: PathBuf,
    pub rng_seed: u64,
    pub threshold: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub max_failed_tries: usize,
    pub max_seeds: usize,
    pub sweep_lambdas: Vec<f64>,
    pub sweep_epsilons: Vec<f64>,
    pub search_kinds: Vec<TransformKind>,
    pub grids: BTreeMap<TransformKind, Vec<TransformSpec>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: None,
            dataset: None,
            out: PathBuf::from("out"),
            rng_seed: 0,
            threshold: ActivationThreshold::DEFAULT,
            lambda: OracleConfig::DEFAULT_LAMBDA,
            epsilon: OracleConfig::DEFAULT_EPSILON,
            max_failed_tries: SearchConfig::DEFAULT_MAX_FAILED_TRIES,
            max_seeds: 100,
            sweep_lambdas: (1..=10).map(f64::from).collect(),
            sweep_epsilons: vec![0.01, 0.02, 0.03, 0.04, 0.05],
            search_kinds: TransformKind::SIMPLE.to_vec(),
            grids: TransformKind::ALL
                .iter()
                .map(|&k| (k, default_grid(k)))
                .collect(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| HarnessError::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| parse_num(key, v.trim()))
        .collect()
}

fn join<T: ToString>(items: &[T], sep: &str) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected `key = value`", n + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model" => self.model = Some(PathBuf::from(value)),
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "seed" => self.rng_seed = parse_num(key, value)?,
            "threshold" => self.threshold = parse_num(key, value)?,
            "lambda" => self.lambda = parse_num(key, value)?,
            "epsilon" => self.epsilon = parse_num(key, value)?,
            "max_failed_tries" => self.max_failed_tries = parse_num(key, value)?,
            "max_seeds" => self.max_seeds = parse_num(key, value)?,
            "sweep_lambdas" => self.sweep_lambdas = parse_list(key, value)?,
            "sweep_epsilons" => self.sweep_epsilons = parse_list(key, value)?,
            "search_kinds" => {
                self.search_kinds = value
                    .split(',')
                    .map(|k| k.trim().parse::<TransformKind>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| HarnessError::Config(format!("{key}: {e}")))?
            }
            _ => {
                let Some(kind) = key.strip_prefix("grid.") else {
                    return Err(HarnessError::Config(format!("unknown key {key:?}")));
                };
                let kind: TransformKind = kind
                    .parse()
                    .map_err(|e| HarnessError::Config(format!("{key}: {e}")))?;
                let specs = value
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.parse::<TransformSpec>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| HarnessError::Config(format!("{key}: {e}")))?;
                if let Some(bad) = specs.iter().find(|s| s.kind() != kind) {
                    return Err(HarnessError::Config(format!("{key}: {bad} is not {kind}")));
                }
                self.grids.insert(kind, specs);
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        ActivationThreshold::new(self.threshold)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        OracleConfig::new(self.lambda, self.epsilon)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.max_seeds == 0 {
            return Err(HarnessError::Config("max_seeds must be ≥ 1".into()));
        }
        for (name, list) in [("sweep_lambdas", &self.sweep_lambdas), ("sweep_epsilons", &self.sweep_epsilons)] {
            if list.is_empty() || list.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(HarnessError::Config(format!("{name} needs finite values ≥ 0")));
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(HarnessError::Config(format!("{name} must be strictly increasing")));
            }
        }
        for (kind, grid) in &self.grids {
            if grid.is_empty() {
                return Err(HarnessError::Config(format!("grid.{kind} is empty")));
            }
        }
        self.search_config()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn threshold(&self) -> ActivationThreshold {
        ActivationThreshold::new(self.threshold).expect("validated")
    }

    pub fn oracle(&self) -> OracleConfig {
        OracleConfig::new(self.lambda, self.epsilon).expect("validated")
    }

    pub fn grid(&self, kind: TransformKind) -> &[TransformSpec] {
        self.grids.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            transformations: self
                .search_kinds
                .iter()
                .map(|&kind| TransformGrid {
                    kind,
                    params: self.grid(kind).to_vec(),
                })
                .collect(),
            max_failed_tries: self.max_failed_tries,
            rng_seed: self.rng_seed,
            threshold: ActivationThreshold::new(self.threshold)
                .unwrap_or_default(),
        }
    }

    pub fn model_path(&self) -> Result<&Path> {
        self.model
            .as_deref()
            .ok_or_else(|| HarnessError::Config("no model given (--model or `model =`)".into()))
    }

    pub fn dataset_path(&self) -> Result<&Path> {
        self.dataset
            .as_deref()
            .ok_or_else(|| HarnessError::Config("no dataset given (--dataset or `dataset =`)".into()))
    }

    /// Every input-affecting setting in a fixed order. The output directory
    /// is left out since it does not change any result.
    pub fn canonical(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("model", path(&self.model));
        put("dataset", path(&self.dataset));
        put("seed", self.rng_seed.to_string());
        put("threshold", self.threshold.to_string());
        put("lambda", self.lambda.to_string());
        put("epsilon", self.epsilon.to_string());
        put("max_failed_tries", self.max_failed_tries.to_string());
        put("max_seeds", self.max_seeds.to_string());
        put("sweep_lambdas", join(&self.sweep_lambdas, ","));
        put("sweep_epsilons", join(&self.sweep_epsilons, ","));
        put("search_kinds", join(&self.search_kinds, ","));
        for (kind, grid) in &self.grids {
            put(&format!("grid.{kind}"), join(grid, "; "));
        }
        s
    }

    /// SHA-256 of [`RunConfig::canonical`], lowercase hex.
    pub fn hash(&self) -> String {
        config_hash(&self.canonical())
    }
}

pub fn config_hash(canonical: &str) -> String {
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
