//! One-dimensional parameter sweeps over a base configuration. Every value
//! runs the same seed list, so results are paired across values.

use std::fmt;
use std::str::FromStr;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::metrics::MetricsRow;
use crate::run::{run, run_in_memory, RunOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Epsilon,
    Replays,
    Eta,
    Recurrence,
    Algo,
}

impl FromStr for Axis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "epsilon" => Axis::Epsilon,
            "replays" => Axis::Replays,
            "eta" => Axis::Eta,
            "recurrence" => Axis::Recurrence,
            "algo" => Axis::Algo,
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown sweep axis {other:?}"
                )))
            }
        })
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Epsilon => "epsilon",
            Axis::Replays => "replays",
            Axis::Eta => "eta",
            Axis::Recurrence => "recurrence",
            Axis::Algo => "algo",
        })
    }
}

/// Default values reproducing the paper's sweeps.
pub fn default_values(axis: Axis) -> Vec<String> {
    let v: &[&str] = match axis {
        Axis::Epsilon => &["0.01", "0.05", "0.2", "1.0"],
        Axis::Replays => &["1", "2", "3", "4", "5"],
        Axis::Eta => &["0.00075", "0.0015", "0.003", "0.006"],
        Axis::Recurrence => &["on", "off"],
        Axis::Algo => &["lfcs", "eprop"],
    };
    v.iter().map(|s| s.to_string()).collect()
}

/// `base` with the axis set to `value` and the experiment renamed
/// `<base>-<axis>-<value>`.
pub fn variant(base: &ExperimentConfig, axis: Axis, value: &str) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    match axis {
        Axis::Epsilon => cfg.set("epsilon", value)?,
        Axis::Replays => cfg.set("replays", value)?,
        Axis::Eta => cfg.set("eta", value)?,
        Axis::Algo => cfg.set("algo", value)?,
        Axis::Recurrence => {
            let on = match value {
                "on" | "true" => true,
                "off" | "false" => false,
                other => {
                    return Err(HarnessError::Config(format!(
                        "recurrence value {other:?} is not on/off"
                    )))
                }
            };
            cfg.recurrent = on;
        }
    }
    cfg.name = format!("{}-{axis}-{value}", base.name);
    cfg.validate()?;
    Ok(cfg)
}

/// Runs every value, writing files as [`run`] does.
pub fn sweep(
    base: &ExperimentConfig,
    axis: Axis,
    values: &[String],
) -> Result<Vec<(String, RunOutput)>> {
    let cfgs = variants(base, axis, values)?;
    cfgs.iter()
        .zip(values)
        .map(|(cfg, v)| Ok((v.clone(), run(cfg)?)))
        .collect()
}

/// Same as [`sweep`] without touching the file system.
pub fn sweep_in_memory(
    base: &ExperimentConfig,
    axis: Axis,
    values: &[String],
) -> Result<Vec<(String, Vec<MetricsRow>)>> {
    let cfgs = variants(base, axis, values)?;
    cfgs.iter()
        .zip(values)
        .map(|(cfg, v)| Ok((v.clone(), run_in_memory(cfg)?)))
        .collect()
}

fn variants(
    base: &ExperimentConfig,
    axis: Axis,
    values: &[String],
) -> Result<Vec<ExperimentConfig>> {
    if values.is_empty() {
        return Err(HarnessError::Config(
            "sweep needs at least one value".into(),
        ));
    }
    values.iter().map(|v| variant(base, axis, v)).collect()
}
