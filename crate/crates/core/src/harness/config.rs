//! Flat `key = value` experiment configuration.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::learning::BeliefRule;
use crate::mac::Mode;
use crate::params::{PhaseAssignment, SystemParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Per-episode parameters; `lambda` and `memory_bits` are overridden by
    /// the grids.
    pub base: SystemParams,
    pub k_grid: Vec<usize>,
    pub lambda_grid: Vec<f64>,
    pub modes: Vec<Mode>,
    pub replications: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses the global rayon pool. Never affects output.
    pub workers: Option<usize>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            base: SystemParams::default(),
            k_grid: (2..=15).collect(),
            lambda_grid: vec![0.5, 0.8],
            modes: vec![Mode::NoLearning, Mode::FiniteMemory],
            replications: 500,
            master_seed: 20170521,
            output_dir: PathBuf::from("out"),
            workers: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::InvalidParameter("replications must be at least 1".into()));
        }
        if self.k_grid.is_empty() || self.lambda_grid.is_empty() || self.modes.is_empty() {
            return Err(Error::InvalidParameter("grids must be nonempty".into()));
        }
        if let Some(&k) = self.k_grid.iter().find(|&&k| k < 2) {
            return Err(Error::InvalidParameter(format!("memory K = {k} is below 2")));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidParameter("worker count must be positive".into()));
        }
        for &lambda in &self.lambda_grid {
            self.base.clone().with_lambda(lambda).validate()?;
        }
        Ok(())
    }
}

pub fn parse_list<T: std::str::FromStr>(value: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}

/// Parses a config file body on top of `spec`. Unknown keys are errors.
pub fn apply_config(spec: &mut ExperimentSpec, text: &str, path: &str) -> Result<()> {
    let mut abnormality = spec.base.abnormality;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Config {
            path: path.to_string(),
            line: idx + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected `key = value`".into()))?;
        let (key, value) = (key.trim(), value.trim());
        fn one<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| format!("{v:?}: {e}"))
        }
        let b = &mut spec.base;
        let res: std::result::Result<(), String> = match key {
            "R" => one(value).map(|v| b.field_side = v),
            "lambda" => parse_list(value).map(|v| spec.lambda_grid = v),
            "l" => one(value).map(|v| b.code_len = v),
            "tau" => one(value).map(|v| b.tau = v),
            "T" => one(value).map(|v| b.period = v),
            "r_c" => one(value).map(|v| b.comm_range = v),
            "r_d" => one(value).map(|v| b.obs_range = v),
            "p11" => one(value).map(|v| b.p11 = v),
            "p10" => one(value).map(|v| b.p10 = v),
            "K" => parse_list(value).map(|v| spec.k_grid = v),
            "reps" => one(value).map(|v| spec.replications = v),
            "master_seed" => one(value).map(|v| spec.master_seed = v),
            "mode" => parse_list(value).map(|v| spec.modes = v),
            "abnormality_x" => one(value).map(|v| {
                abnormality = Some((v, abnormality.map_or(b.field_side / 2.0, |a| a.1)))
            }),
            "abnormality_y" => one(value).map(|v| {
                abnormality = Some((abnormality.map_or(b.field_side / 2.0, |a| a.0), v))
            }),
            "onset_slot" => one(value).map(|v| b.onset_slot = Some(v)),
            "episode_cap" => one(value).map(|v| b.episode_cap = v),
            "belief_rule" => one::<BeliefRule>(value).map(|v| b.belief_rule = v),
            "phases" => match value {
                "balanced" => Ok(PhaseAssignment::Balanced),
                "independent" => Ok(PhaseAssignment::Independent),
                other => Err(format!("unknown phase assignment {other:?}")),
            }
            .map(|v| b.phase_assignment = v),
            other => Err(format!("unknown key {other:?}")),
        };
        res.map_err(err)?;
    }
    spec.base.abnormality = abnormality;
    Ok(())
}

pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::default();
    apply_config(&mut spec, text, "<config>")?;
    Ok(spec)
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)?;
    let mut spec = ExperimentSpec::default();
    apply_config(&mut spec, &text, &path.display().to_string())?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_key() {
        let text = "\
# reference setup
R = 40
lambda = 0.5, 0.8
l = 3
tau = 0.5
T = 10
r_c = 1.5
r_d = 8
p11 = 0.9
p10 = 0.01
K = 2,7,15
reps = 12
master_seed = 99
mode = no_learning,infinite_memory
abnormality_x = 5
abnormality_y = 6
onset_slot = 3
episode_cap = 500
belief_rule = known
phases = independent
";
        let s = parse_config(text).unwrap();
        assert_eq!(s.base.field_side, 40.0);
        assert_eq!(s.lambda_grid, vec![0.5, 0.8]);
        assert_eq!(s.base.codes(), 7);
        assert_eq!(s.base.period, 10);
        assert_eq!(s.k_grid, vec![2, 7, 15]);
        assert_eq!(s.replications, 12);
        assert_eq!(s.master_seed, 99);
        assert_eq!(s.modes, vec![Mode::NoLearning, Mode::InfiniteMemory]);
        assert_eq!(s.base.abnormality, Some((5.0, 6.0)));
        assert_eq!(s.base.onset(), 3);
        assert_eq!(s.base.episode_cap, 500);
        assert_eq!(s.base.belief_rule, BeliefRule::Known);
        assert_eq!(s.base.phase_assignment, PhaseAssignment::Independent);
        s.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_key_with_line() {
        let err = parse_config("R = 50\nfoo = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }), "{err}");
        assert!(parse_config("K = two").is_err());
        assert!(parse_config("just text").is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = ExperimentSpec::default();
        s.validate().unwrap();
        s.k_grid = vec![1];
        assert!(s.validate().is_err());
        let s = ExperimentSpec {
            replications: 0,
            ..ExperimentSpec::default()
        };
        assert!(s.validate().is_err());
    }
}
