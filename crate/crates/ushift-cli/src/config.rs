//! TOML configuration: sections `[process]`, `[kernel]`, `[experiment]`.
//! Unknown keys are rejected so typos never pass silently.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ushift_core::kernels::PairKernel;
use ushift_core::limits::ExperimentConfig;
use ushift_core::processes::{InnovationSpec, ShiftFunctional, ShiftProcess};

use crate::AppError;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub process: ProcessSection,
    pub kernel: KernelSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSection {
    /// "rademacher" | "gaussian" | "uniform"
    pub distribution: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    /// only "linear" is config-loadable; custom functionals are a
    /// compile-time extension point
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    /// "variance" | "sum" | "product"
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holder_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holder_alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moment_reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_path_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_reps: Option<usize>,
}

impl ExperimentSection {
    pub fn experiment_config(&self) -> ExperimentConfig {
        let d = ExperimentConfig::default();
        ExperimentConfig {
            tail_samples: self.tail_samples.unwrap_or(d.tail_samples),
            moment_reps: self.moment_reps.unwrap_or(d.moment_reps),
            ensemble_size: self.ensemble_size.unwrap_or(d.ensemble_size),
            sigma_path_len: self.sigma_path_len.unwrap_or(d.sigma_path_len),
            sigma_reps: self.sigma_reps.unwrap_or(d.sigma_reps),
        }
    }

    pub fn require(&self, key: &str, command: &str) -> Result<usize, AppError> {
        let v = match key {
            "n" => self.n,
            "replications" => self.replications,
            "n_max" => self.n_max,
            _ => None,
        };
        v.ok_or_else(|| {
            AppError::Config(format!(
                "missing required key `experiment.{key}` for the {command} subcommand"
            ))
        })
    }

    pub fn require_p(&self, command: &str) -> Result<f64, AppError> {
        self.p.ok_or_else(|| {
            AppError::Config(format!(
                "missing required key `experiment.p` for the {command} subcommand"
            ))
        })
    }
}

/// Fully validated configuration plus provenance (hash, canonical echo).
#[derive(Debug, Clone)]
pub struct BuiltConfig {
    pub process: ShiftProcess,
    pub kernel: PairKernel,
    pub experiment: ExperimentSection,
    pub echo_toml: String,
    pub hash: String,
}

pub fn load_config(path: &Path) -> Result<BuiltConfig, AppError> {
    let bytes = std::fs::read(path)
        .map_err(|e| AppError::Config(format!("cannot read config `{}`: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| AppError::Config(format!("config `{}` is not UTF-8", path.display())))?;
    let parsed: ConfigFile =
        toml::from_str(&text).map_err(|e| AppError::Config(format!("invalid config: {e}")))?;
    build(parsed, &bytes)
}

pub fn build(parsed: ConfigFile, raw: &[u8]) -> Result<BuiltConfig, AppError> {
    let innovations = build_innovations(&parsed.process)?;
    let functional = build_functional(&parsed.process)?;
    let process = ShiftProcess::new(innovations, functional)
        .map_err(|e| AppError::Config(e.to_string()))?;
    let kernel = build_kernel(&parsed.kernel, &process)?;
    let echo_toml =
        toml::to_string(&parsed).map_err(|e| AppError::Config(format!("cannot echo config: {e}")))?;
    let hash = Sha256::digest(raw)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>();
    Ok(BuiltConfig {
        process,
        kernel,
        experiment: parsed.experiment,
        echo_toml,
        hash,
    })
}

fn build_innovations(p: &ProcessSection) -> Result<InnovationSpec, AppError> {
    let none_of = |keys: &[(&str, bool)]| -> Result<(), AppError> {
        for (name, present) in keys {
            if *present {
                return Err(AppError::Config(format!(
                    "key `process.{name}` does not apply to distribution `{}`",
                    p.distribution
                )));
            }
        }
        Ok(())
    };
    match p.distribution.as_str() {
        "rademacher" => {
            none_of(&[
                ("mean", p.mean.is_some()),
                ("std", p.std.is_some()),
                ("lo", p.lo.is_some()),
                ("hi", p.hi.is_some()),
            ])?;
            Ok(InnovationSpec::Rademacher)
        }
        "gaussian" => {
            none_of(&[("lo", p.lo.is_some()), ("hi", p.hi.is_some())])?;
            let mean = p
                .mean
                .ok_or_else(|| AppError::Config("gaussian innovations need `process.mean`".into()))?;
            let std = p
                .std
                .ok_or_else(|| AppError::Config("gaussian innovations need `process.std`".into()))?;
            let spec = InnovationSpec::Gaussian { mean, std };
            spec.validate().map_err(|e| AppError::Config(e.to_string()))?;
            Ok(spec)
        }
        "uniform" => {
            none_of(&[("mean", p.mean.is_some()), ("std", p.std.is_some())])?;
            let lo = p
                .lo
                .ok_or_else(|| AppError::Config("uniform innovations need `process.lo`".into()))?;
            let hi = p
                .hi
                .ok_or_else(|| AppError::Config("uniform innovations need `process.hi`".into()))?;
            let spec = InnovationSpec::Uniform { lo, hi };
            spec.validate().map_err(|e| AppError::Config(e.to_string()))?;
            Ok(spec)
        }
        other => Err(AppError::Config(format!(
            "unknown distribution `{other}` (expected rademacher, gaussian or uniform)"
        ))),
    }
}

fn build_functional(p: &ProcessSection) -> Result<ShiftFunctional, AppError> {
    if p.kind != "linear" {
        return Err(AppError::Config(format!(
            "unknown functional kind `{}`; only `linear` is config-loadable (custom functionals are a compile-time extension point)",
            p.kind
        )));
    }
    let Some(raw) = &p.coeffs else {
        return Err(AppError::Config("linear functionals need `process.coeffs`".into()));
    };
    if raw.is_empty() {
        return Err(AppError::Config("`process.coeffs` must not be empty".into()));
    }
    let mut coeffs = BTreeMap::new();
    for (key, &value) in raw {
        let offset: i64 = key.parse().map_err(|_| {
            AppError::Config(format!("coeffs key `{key}` is not an integer offset"))
        })?;
        if !value.is_finite() {
            return Err(AppError::Config(format!("coefficient at offset {offset} is not finite")));
        }
        coeffs.insert(offset, value);
    }
    let functional = ShiftFunctional::linear(coeffs);
    if let Some(w) = p.w {
        let derived = functional.halfwidth();
        if w != derived {
            return Err(AppError::Config(format!(
                "`process.w` = {w} does not match the largest coefficient offset {derived}"
            )));
        }
    }
    Ok(functional)
}

fn build_kernel(k: &KernelSection, process: &ShiftProcess) -> Result<PairKernel, AppError> {
    let w = process.window_halfwidth();
    // linear processes have analytic marginal moments; attach exact metadata
    let moments = process
        .level_mean(w)
        .zip(process.level_cov(w, 0));
    let kernel = match k.name.as_str() {
        "variance" => match moments {
            Some((mean, var)) => PairKernel::variance_with_meta(mean, var),
            None => PairKernel::variance(),
        },
        "sum" => match moments {
            Some((mean, _)) => PairKernel::sum_with_meta(mean),
            None => PairKernel::sum(),
        },
        "product" => match moments {
            Some((mean, _)) => PairKernel::product_with_meta(mean),
            None => PairKernel::product(),
        },
        other => {
            return Err(AppError::Config(format!(
                "unknown kernel `{other}` (expected variance, sum or product)"
            )))
        }
    };
    match (k.holder_c, k.holder_alpha) {
        (None, None) => Ok(kernel),
        (Some(c), Some(alpha)) => kernel
            .with_holder(c, alpha)
            .map_err(|e| AppError::Config(e.to_string())),
        _ => Err(AppError::Config(
            "`kernel.holder_c` and `kernel.holder_alpha` must be given together".into(),
        )),
    }
}
