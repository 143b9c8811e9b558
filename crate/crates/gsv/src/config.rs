//! Experiment configuration: a flat key = value text format with a JSON
//! mirror. Unknown keys are rejected and physics-bearing parameters have no
//! defaults.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::model::{ModelSpec, ScalingParams};
use crate::vol::VolSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Simulate,
    Rate,
    ExitRate,
    CallPrice,
    ImpliedVol,
    Explode,
    Verify,
}

impl Task {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "simulate" => Task::Simulate,
            "rate" => Task::Rate,
            "exit-rate" => Task::ExitRate,
            "callprice" => Task::CallPrice,
            "impliedvol" => Task::ImpliedVol,
            "explode" => Task::Explode,
            "verify" => Task::Verify,
            other => {
                return Err(Error::ConfigInvalid {
                    field: "task".into(),
                    reason: format!(
                        "unknown task `{other}`; expected simulate|rate|exit-rate|callprice|impliedvol|explode|verify"
                    ),
                })
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Rate => "rate",
            Task::ExitRate => "exit-rate",
            Task::CallPrice => "callprice",
            Task::ImpliedVol => "impliedvol",
            Task::Explode => "explode",
            Task::Verify => "verify",
        }
    }

    fn needs_scaling(&self) -> bool {
        matches!(
            self,
            Task::Simulate | Task::CallPrice | Task::ImpliedVol | Task::Verify
        )
    }

    fn needs_mc(&self) -> bool {
        matches!(
            self,
            Task::Simulate | Task::CallPrice | Task::ImpliedVol | Task::Explode | Task::Verify
        )
    }

    fn needs_x(&self) -> bool {
        matches!(
            self,
            Task::Simulate | Task::Rate | Task::CallPrice | Task::ImpliedVol
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "json" => OutputFormat::Json,
            "csv" => OutputFormat::Csv,
            "both" => OutputFormat::Both,
            other => {
                return Err(Error::ConfigInvalid {
                    field: "format".into(),
                    reason: format!("unknown format `{other}`; expected json|csv|both"),
                })
            }
        })
    }

    pub fn wants_json(&self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }

    pub fn wants_csv(&self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
}

/// Parsed and validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub task: Task,
    pub kernel: KernelSpec,
    pub sigma: VolSpec,
    pub rho: f64,
    pub horizon: f64,
    pub spot: f64,
    /// (H, beta, alpha); present when the task runs scaled experiments.
    pub scaling: Option<(f64, f64, f64)>,
    /// Strictly decreasing noise levels in (0, 1].
    pub eps: Vec<f64>,
    pub grid_n: usize,
    pub mc_count: usize,
    pub mc_seed: u64,
    pub x: Option<f64>,
    pub interval: Option<(f64, f64)>,
    pub t: Option<f64>,
    pub gamma: Option<f64>,
    pub cert_levels: Vec<f64>,
    pub trunc_levels: Vec<f64>,
    pub moment_gamma: Option<f64>,
    pub use_tilt: bool,
    pub rate_grid_n: usize,
    pub out_dir: Option<String>,
    pub format: OutputFormat,
    /// Normalized key/value echo for the report.
    pub echo: BTreeMap<String, Value>,
}

const ALLOWED_KEYS: &[&str] = &[
    "task",
    "kernel_family",
    "kernel_hurst",
    "kernel_ou_rate",
    "sigma_family",
    "sigma_sigma0",
    "sigma_c0",
    "sigma_c1",
    "sigma_c",
    "sigma_lambda",
    "sigma_k",
    "rho",
    "horizon",
    "spot",
    "scaling_h",
    "scaling_beta",
    "scaling_alpha",
    "eps",
    "grid_n",
    "mc_count",
    "mc_seed",
    "x",
    "interval_a",
    "interval_b",
    "t",
    "gamma",
    "cert_levels",
    "trunc_levels",
    "moment_gamma",
    "tilt",
    "rate_grid_n",
    "out_dir",
    "format",
];

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::ConfigInvalid {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Raw key -> JSON value map shared by both input syntaxes.
struct RawConfig(BTreeMap<String, Value>);

impl RawConfig {
    fn from_text(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            let v: Value = serde_json::from_str(text)?;
            let obj = v
                .as_object()
                .ok_or_else(|| invalid("<document>", "JSON config must be an object"))?;
            return Ok(Self(obj.clone().into_iter().collect()));
        }
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                invalid(
                    "<document>",
                    format!("line {}: expected `key = value`", lineno + 1),
                )
            })?;
            let key = key.trim().to_string();
            let value = value.trim();
            if map.insert(key.clone(), text_value_to_json(value)).is_some() {
                return Err(invalid(&key, "duplicate key"));
            }
        }
        Ok(Self(map))
    }

    fn check_keys(&self) -> Result<()> {
        for key in self.0.keys() {
            if !ALLOWED_KEYS.contains(&key.as_str()) {
                return Err(invalid(key, "unknown key"));
            }
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.0.get(key)
    }

    fn require(&self, key: &str) -> Result<&Value> {
        self.get(key)
            .ok_or_else(|| invalid(key, "required but absent"))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        value_f64(self.require(key)?).ok_or_else(|| invalid(key, "expected a number"))
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => value_f64(v)
                .map(Some)
                .ok_or_else(|| invalid(key, "expected a number")),
        }
    }

    fn usize(&self, key: &str) -> Result<usize> {
        let v = self.f64(key)?;
        if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
            return Err(invalid(key, "expected a nonnegative integer"));
        }
        Ok(v as usize)
    }

    fn u64(&self, key: &str) -> Result<u64> {
        let v = self.f64(key)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(invalid(key, "expected a nonnegative integer"));
        }
        Ok(v as u64)
    }

    fn str(&self, key: &str) -> Result<String> {
        self.require(key)?
            .as_str()
            .map(|s| s.to_string())
            .ok_or_else(|| invalid(key, "expected a string"))
    }

    fn list_f64(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.require(key)?;
        if let Some(single) = value_f64(v) {
            return Ok(vec![single]);
        }
        let arr = v
            .as_array()
            .ok_or_else(|| invalid(key, "expected a list of numbers"))?;
        arr.iter()
            .map(|x| value_f64(x).ok_or_else(|| invalid(key, "expected a list of numbers")))
            .collect()
    }

    fn list_f64_opt(&self, key: &str) -> Result<Vec<f64>> {
        if self.get(key).is_none() {
            return Ok(Vec::new());
        }
        self.list_f64(key)
    }
}

fn value_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn text_value_to_json(value: &str) -> Value {
    // lists: comma- or whitespace-separated numbers
    let parts: Vec<&str> = value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|p| !p.is_empty())
        .collect();
    if parts.len() > 1 {
        if let Ok(nums) = parts
            .iter()
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
        {
            return Value::Array(nums.into_iter().map(|n| serde_json::json!(n)).collect());
        }
    }
    if let Ok(n) = value.parse::<f64>() {
        return serde_json::json!(n);
    }
    Value::String(value.to_string())
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self> {
        let raw = RawConfig::from_text(text)?;
        raw.check_keys()?;

        let task = Task::parse(&raw.str("task")?)?;

        // kernel
        let family = raw.str("kernel_family")?;
        let kernel_family =
            match family.as_str() {
                "FBM" => KernelFamily::Fbm {
                    hurst: raw.f64("kernel_hurst")?,
                },
                "RIEMANN_LIOUVILLE" | "RL" => KernelFamily::RiemannLiouville {
                    hurst: raw.f64("kernel_hurst")?,
                },
                "FRACTIONAL_OU" => KernelFamily::FractionalOu {
                    hurst: raw.f64("kernel_hurst")?,
                    rate: raw.f64("kernel_ou_rate")?,
                },
                other => return Err(invalid(
                    "kernel_family",
                    format!(
                        "unknown family `{other}`; expected FBM|RIEMANN_LIOUVILLE|FRACTIONAL_OU"
                    ),
                )),
            };
        let horizon = raw.f64("horizon")?;
        let kernel = KernelSpec::new(kernel_family, horizon)
            .map_err(|e| invalid("kernel_hurst", e.to_string()))?;

        // volatility function
        let sfam = raw.str("sigma_family")?;
        let sigma = match sfam.as_str() {
            "CONSTANT" => VolSpec::Constant { sigma0: raw.f64("sigma_sigma0")? },
            "AFFINE" => VolSpec::Affine { c0: raw.f64("sigma_c0")?, c1: raw.f64("sigma_c1")? },
            "EXP" => VolSpec::Exp { c: raw.f64("sigma_c")?, lambda: raw.f64("sigma_lambda")? },
            "POLY_PLUS" => VolSpec::PolyPlus {
                c: raw.f64("sigma_c")?,
                k: raw.usize("sigma_k")? as u32,
            },
            "BOUNDED_SMOOTH" => {
                VolSpec::BoundedSmooth { c0: raw.f64("sigma_c0")?, c1: raw.f64("sigma_c1")? }
            }
            other => {
                return Err(invalid(
                    "sigma_family",
                    format!(
                        "unknown family `{other}`; expected CONSTANT|AFFINE|EXP|POLY_PLUS|BOUNDED_SMOOTH"
                    ),
                ))
            }
        };
        let vol = sigma
            .build()
            .map_err(|e| invalid("sigma_family", e.to_string()))?;

        let rho = raw.f64("rho")?;
        // spot defaults to 1; all estimators work at unit spot and the
        // log-price shift is the caller's convention
        let spot = raw.f64_opt("spot")?.unwrap_or(1.0);
        if !(spot.is_finite() && spot > 0.0) {
            return Err(invalid("spot", "must be finite and > 0"));
        }
        ModelSpec::new(kernel.clone(), vol, rho, horizon)
            .map_err(|e| invalid("rho", e.to_string()))?;

        // scaling (physics-bearing: required for scaled tasks, no defaults)
        let scaling = if task.needs_scaling() {
            let h = raw.f64("scaling_h")?;
            let beta = raw.f64("scaling_beta")?;
            let alpha = raw.f64("scaling_alpha")?;
            ScalingParams::new(1.0, h, beta, alpha).map_err(|e| {
                let field = if beta < 0.0 || beta > h {
                    "scaling_beta"
                } else if alpha < 0.0 || alpha + beta > h {
                    "scaling_alpha"
                } else {
                    "scaling_h"
                };
                invalid(field, e.to_string())
            })?;
            Some((h, beta, alpha))
        } else {
            None
        };

        let eps = if task.needs_scaling() {
            let eps = raw.list_f64("eps")?;
            if eps.is_empty() {
                return Err(invalid("eps", "list must not be empty"));
            }
            for &e in &eps {
                if !(e > 0.0 && e <= 1.0) {
                    return Err(invalid("eps", "levels must lie in (0, 1]"));
                }
            }
            for w in eps.windows(2) {
                if w[1] >= w[0] {
                    return Err(invalid("eps", "list must be strictly decreasing"));
                }
            }
            eps
        } else {
            Vec::new()
        };

        let grid_n = raw.usize("grid_n")?;
        if grid_n == 0 {
            return Err(invalid("grid_n", "must be >= 1"));
        }

        let (mc_count, mc_seed) = if task.needs_mc() {
            let count = raw.usize("mc_count")?;
            if count == 0 {
                return Err(invalid("mc_count", "must be >= 1"));
            }
            (count, raw.u64("mc_seed")?)
        } else {
            (0, 0)
        };

        let x = if task.needs_x() {
            let x = raw.f64("x")?;
            if x <= 0.0 && task != Task::Rate {
                return Err(invalid("x", "must be > 0"));
            }
            Some(x)
        } else {
            raw.f64_opt("x")?
        };

        let interval = if task == Task::ExitRate {
            let a = raw.f64("interval_a")?;
            let b = raw.f64("interval_b")?;
            if !(a < 0.0 && 0.0 < b) {
                return Err(invalid("interval_a", "interval must satisfy a < 0 < b"));
            }
            Some((a, b))
        } else {
            None
        };

        let t = match task {
            Task::ExitRate | Task::Explode => Some(raw.f64("t")?),
            _ => raw.f64_opt("t")?,
        };

        let gamma = if task == Task::Explode {
            Some(raw.f64("gamma")?)
        } else {
            raw.f64_opt("gamma")?
        };

        let cert_levels = raw.list_f64_opt("cert_levels")?;
        let trunc_levels = raw.list_f64_opt("trunc_levels")?;
        let moment_gamma = raw.f64_opt("moment_gamma")?;

        let use_tilt = match raw.get("tilt") {
            None => false,
            Some(v) => match v.as_str() {
                Some("auto") => true,
                Some("none") => false,
                _ => return Err(invalid("tilt", "expected `auto` or `none`")),
            },
        };

        let rate_grid_n = match raw.get("rate_grid_n") {
            None => 64,
            Some(_) => raw.usize("rate_grid_n")?,
        };

        let out_dir = raw
            .get("out_dir")
            .and_then(|v| v.as_str().map(String::from));
        let format = match raw.get("format") {
            None => OutputFormat::Both,
            Some(_) => OutputFormat::parse(&raw.str("format")?)?,
        };

        Ok(Self {
            task,
            kernel,
            sigma,
            rho,
            horizon,
            spot,
            scaling,
            eps,
            grid_n,
            mc_count,
            mc_seed,
            x,
            interval,
            t,
            gamma,
            cert_levels,
            trunc_levels,
            moment_gamma,
            use_tilt,
            rate_grid_n,
            out_dir,
            format,
            echo: raw.0,
        })
    }

    pub fn model(&self) -> Result<ModelSpec> {
        let mut m = ModelSpec::new(
            self.kernel.clone(),
            self.sigma.build()?,
            self.rho,
            self.horizon,
        )?;
        m.spot = self.spot;
        m.validate()?;
        Ok(m)
    }

    pub fn scaling_at(&self, eps: f64) -> Result<ScalingParams> {
        let (h, beta, alpha) = self
            .scaling
            .ok_or_else(|| invalid("scaling_h", "task requires scaling parameters"))?;
        ScalingParams::new(eps, h, beta, alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "
        task = simulate
        kernel_family = RIEMANN_LIOUVILLE
        kernel_hurst = 0.5
        sigma_family = BOUNDED_SMOOTH
        sigma_c0 = 0.3
        sigma_c1 = 0.2
        rho = 0.0
        horizon = 1.0
        scaling_h = 0.5
        scaling_beta = 0.5
        scaling_alpha = 0.0
        eps = 0.2, 0.05
        grid_n = 64
        mc_count = 1000
        mc_seed = 7
        x = 0.1
    ";

    #[test]
    fn parses_flat_format() {
        let cfg = ExperimentConfig::from_str(BASE).unwrap();
        assert_eq!(cfg.task, Task::Simulate);
        assert_eq!(cfg.eps, vec![0.2, 0.05]);
        assert_eq!(cfg.grid_n, 64);
        assert!(cfg.model().is_ok());
    }

    #[test]
    fn parses_json_mirror() {
        let json = r#"{
            "task": "rate",
            "kernel_family": "RIEMANN_LIOUVILLE",
            "kernel_hurst": 0.75,
            "sigma_family": "CONSTANT",
            "sigma_sigma0": 0.2,
            "rho": 0.5,
            "horizon": 1.0,
            "grid_n": 32,
            "x": 0.1
        }"#;
        let cfg = ExperimentConfig::from_str(json).unwrap();
        assert_eq!(cfg.task, Task::Rate);
        assert_eq!(cfg.x, Some(0.1));
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = format!("{BASE}\nshoesize = 43\n");
        let e = ExperimentConfig::from_str(&bad).unwrap_err();
        match e {
            Error::ConfigInvalid { field, .. } => assert_eq!(field, "shoesize"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn beta_above_h_names_beta() {
        let bad = BASE.replace("scaling_beta = 0.5", "scaling_beta = 0.9");
        let e = ExperimentConfig::from_str(&bad).unwrap_err();
        match e {
            Error::ConfigInvalid { field, .. } => assert!(field.contains("beta"), "{field}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_physics_keys_are_errors() {
        for key in ["rho", "sigma_family", "scaling_h", "scaling_alpha", "eps"] {
            let bad: String = BASE
                .lines()
                .filter(|l| !l.trim_start().starts_with(key))
                .collect::<Vec<_>>()
                .join("\n");
            let e = ExperimentConfig::from_str(&bad).unwrap_err();
            match e {
                Error::ConfigInvalid { field, .. } => {
                    assert!(field.starts_with(key), "{field} for removed {key}")
                }
                other => panic!("unexpected {other:?} for removed {key}"),
            }
        }
    }

    #[test]
    fn eps_must_strictly_decrease() {
        let bad = BASE.replace("eps = 0.2, 0.05", "eps = 0.05, 0.2");
        assert!(ExperimentConfig::from_str(&bad).is_err());
    }
}
