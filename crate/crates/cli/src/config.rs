//! Run configuration: defaults, then a flat JSON file, then flags.

use std::path::{Path, PathBuf};

use gluing::linearized::ParameterBudget;
use gluing::Dimension;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub n: usize,
    pub eps: Vec<f64>,
    pub s: Option<f64>,
    pub delta1: Option<f64>,
    pub step: Option<f64>,
    pub out: PathBuf,
    pub tol: Option<f64>,
    pub seed: u64,
}

/// Values given on the command line; `None` defers to the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<usize>,
    pub eps: Option<Vec<f64>>,
    pub s: Option<f64>,
    pub delta1: Option<f64>,
    pub step: Option<f64>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

fn read_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Param(format!("config {}: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::Param("config must be a flat JSON object".into())),
        Err(e) => Err(CliError::Param(format!("config {}: {e}", path.display()))),
    }
}

fn num(m: &Map<String, Value>, key: &str) -> Result<Option<f64>, CliError> {
    match m.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(x)) => Ok(x.as_f64()),
        Some(v) => Err(CliError::Param(format!(
            "config key {key}: expected a number, got {v}"
        ))),
    }
}

fn eps_list(m: &Map<String, Value>) -> Result<Option<Vec<f64>>, CliError> {
    match m.get("eps") {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(x)) => Ok(x.as_f64().map(|x| vec![x])),
        Some(Value::Array(a)) => a
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| CliError::Param(format!("config eps entry {v} is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
        Some(v) => Err(CliError::Param(format!("config key eps: unexpected {v}"))),
    }
}

fn whole(x: Option<f64>, key: &str) -> Result<Option<u64>, CliError> {
    match x {
        None => Ok(None),
        Some(v) if v >= 0.0 && v.fract() == 0.0 => Ok(Some(v as u64)),
        Some(v) => Err(CliError::Param(format!(
            "config key {key}: {v} is not a nonnegative integer"
        ))),
    }
}

impl RunConfig {
    pub fn load(
        command: &str,
        file: Option<&Path>,
        flags: Overrides,
        default_out: PathBuf,
    ) -> Result<Self, CliError> {
        let m = match file {
            Some(p) => read_file(p)?,
            None => Map::new(),
        };
        let out_file = match m.get("out") {
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            None | Some(Value::Null) => None,
            Some(v) => return Err(CliError::Param(format!("config key out: unexpected {v}"))),
        };
        let cfg = RunConfig {
            command: command.to_string(),
            n: flags
                .n
                .or(whole(num(&m, "n")?, "n")?.map(|v| v as usize))
                .unwrap_or(4),
            eps: flags.eps.or(eps_list(&m)?).unwrap_or_else(|| vec![0.1]),
            s: flags.s.or(num(&m, "s")?),
            delta1: flags.delta1.or(num(&m, "delta1")?),
            step: flags.step.or(num(&m, "step")?),
            out: flags.out.or(out_file).unwrap_or(default_out),
            tol: flags.tol.or(num(&m, "tol")?),
            seed: flags
                .seed
                .or(whole(num(&m, "seed")?, "seed")?)
                .unwrap_or(0x5eed),
        };
        if cfg.eps.is_empty() {
            return Err(CliError::Param("empty epsilon list".into()));
        }
        cfg.budget()?;
        Ok(cfg)
    }

    pub fn dimension(&self) -> Result<Dimension, CliError> {
        Ok(Dimension::new(self.n)?)
    }

    /// Defaults with the overrides applied, validated.
    pub fn budget(&self) -> Result<ParameterBudget, CliError> {
        let mut b = ParameterBudget::defaults(self.dimension()?);
        if let Some(d) = self.delta1 {
            b.delta1 = d;
            b.delta4 = d;
            let (lo, hi) = gluing::linearized::budget::s_interval(b.n, d);
            b.s = 0.5 * (lo + hi);
        }
        if let Some(s) = self.s {
            b.s = s;
        }
        b.validate()?;
        Ok(b)
    }
}
