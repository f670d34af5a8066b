//! Flat `key = value` experiment configuration.
//!
//! Values are JSON literals (`7`, `0.99`, `[2, 3, 4]`, `"out"`); a bare word
//! is accepted for `output_dir`. Lines starting with `#` are comments.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use surrosel::problem::PARAMETER_DIM;
use surrosel::CoefficientRule;

use crate::CliError;

pub const KEYS: &[&str] = &[
    "d",
    "c_rule",
    "fine_level",
    "coarse_levels",
    "m",
    "meas_width",
    "n_train",
    "n_test",
    "seed",
    "n_splits",
    "rb_max_dim",
    "rb_target_eps",
    "solver_tol",
    "output_dir",
];

/// Keys that determine the contents of an artifact store.
pub const STORE_KEYS: &[&str] = &[
    "d",
    "c_rule",
    "fine_level",
    "m",
    "meas_width",
    "n_train",
    "n_test",
    "seed",
    "n_splits",
    "rb_max_dim",
    "rb_target_eps",
    "solver_tol",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub c_rule: f64,
    pub fine_level: u32,
    pub coarse_levels: Vec<u32>,
    pub m: usize,
    pub meas_width: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub n_splits: usize,
    pub rb_max_dim: usize,
    pub rb_target_eps: f64,
    pub solver_tol: f64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: PARAMETER_DIM,
            c_rule: 0.9,
            fine_level: 7,
            coarse_levels: vec![2, 3, 4, 5, 6],
            m: 8,
            meas_width: 1.0 / 64.0,
            n_train: 1000,
            n_test: 100,
            seed: 2024,
            n_splits: 7,
            rb_max_dim: 7,
            rb_target_eps: 0.0,
            solver_tol: 1e-10,
            output_dir: PathBuf::from("results"),
        }
    }
}

fn bad(key: &str, raw: &str, want: &str) -> CliError {
    CliError::Config(format!("{key}: expected {want}, got `{raw}`"))
}

/// `key = value` pairs in file order; rejects unknown and repeated keys.
pub fn parse_assignments(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", no + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(CliError::Config(format!("line {}: unknown key `{k}`", no + 1)));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(CliError::Config(format!("line {}: repeated key `{k}`", no + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Defaults, then the file (if any), then the overrides, then validation.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut pairs = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                parse_assignments(&text)?
            }
            None => Vec::new(),
        };
        for (k, v) in overrides {
            if !KEYS.contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown key `{k}`")));
            }
            pairs.retain(|(seen, _)| seen != k);
            pairs.push((k.clone(), v.clone()));
        }
        Self::from_pairs(&pairs)
    }

    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut rb_given = false;
        for (k, v) in pairs {
            cfg.set(k, v)?;
            rb_given |= k == "rb_max_dim";
        }
        if !rb_given {
            cfg.rb_max_dim = cfg.m.saturating_sub(1);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, raw: &str) -> Result<(), CliError> {
        let value: Option<Value> = serde_json::from_str(raw).ok();
        let uint = || value.as_ref().and_then(Value::as_u64).ok_or_else(|| bad(key, raw, "a non-negative integer"));
        let float = || value.as_ref().and_then(Value::as_f64).ok_or_else(|| bad(key, raw, "a number"));
        match key {
            "d" => self.d = uint()? as usize,
            "c_rule" => self.c_rule = float()?,
            "fine_level" => self.fine_level = u32::try_from(uint()?).map_err(|_| bad(key, raw, "a level"))?,
            "coarse_levels" => {
                let arr = value.as_ref().and_then(Value::as_array).ok_or_else(|| bad(key, raw, "an array of levels"))?;
                self.coarse_levels = arr
                    .iter()
                    .map(|x| x.as_u64().and_then(|l| u32::try_from(l).ok()).ok_or_else(|| bad(key, raw, "an array of levels")))
                    .collect::<Result<_, _>>()?;
            }
            "m" => self.m = uint()? as usize,
            "meas_width" => self.meas_width = float()?,
            "n_train" => self.n_train = uint()? as usize,
            "n_test" => self.n_test = uint()? as usize,
            "seed" => self.seed = uint()?,
            "n_splits" => self.n_splits = uint()? as usize,
            "rb_max_dim" => self.rb_max_dim = uint()? as usize,
            "rb_target_eps" => self.rb_target_eps = float()?,
            "solver_tol" => self.solver_tol = float()?,
            "output_dir" => {
                self.output_dir = match &value {
                    Some(Value::String(s)) => PathBuf::from(s),
                    Some(_) => return Err(bad(key, raw, "a path")),
                    None => PathBuf::from(raw),
                }
            }
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.d != PARAMETER_DIM {
            return fail(format!("d must be {PARAMETER_DIM}, got {}", self.d));
        }
        if CoefficientRule::from_leading(self.c_rule).is_err() {
            return fail(format!("c_rule must be 0.9 or 0.99, got {}", self.c_rule));
        }
        if !(2..=surrosel::fem::MAX_LEVEL).contains(&self.fine_level) {
            return fail(format!("fine_level must lie in 2..={}", surrosel::fem::MAX_LEVEL));
        }
        if let Some(&s) = self.coarse_levels.iter().find(|&&s| s < 2 || s >= self.fine_level) {
            return fail(format!("coarse level {s} must satisfy 2 <= s < fine_level"));
        }
        if self.coarse_levels.windows(2).any(|w| w[0] >= w[1]) {
            return fail("coarse_levels must be strictly increasing".into());
        }
        if self.m == 0 {
            return fail("m must be positive".into());
        }
        if self.rb_max_dim >= self.m {
            return fail(format!("rb_max_dim {} must be smaller than m = {}", self.rb_max_dim, self.m));
        }
        if !(self.meas_width > 0.0 && self.meas_width < 1.0) {
            return fail("meas_width must lie in (0, 1)".into());
        }
        if self.n_train == 0 || self.n_test == 0 {
            return fail("n_train and n_test must be positive".into());
        }
        if !(self.rb_target_eps >= 0.0) || !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            return fail("rb_target_eps must be >= 0 and solver_tol in (0, 1)".into());
        }
        Ok(())
    }

    pub fn rule(&self) -> CoefficientRule {
        CoefficientRule::from_leading(self.c_rule).expect("validated")
    }

    /// Coarse levels followed by the fine level.
    pub fn levels(&self) -> Vec<u32> {
        let mut l = self.coarse_levels.clone();
        l.push(self.fine_level);
        l
    }

    /// Values of [`STORE_KEYS`] as JSON, for comparing a config against a store.
    pub fn store_identity(&self) -> Value {
        let full = serde_json::to_value(self).expect("config serializes");
        let obj = full.as_object().expect("object");
        Value::Object(STORE_KEYS.iter().map(|k| (k.to_string(), obj[*k].clone())).collect())
    }
}
