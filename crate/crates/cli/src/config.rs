//! Parameter resolution: built-in defaults, then a preset, then the JSON
//! config file, then command-line flags.

use std::path::Path;

use cavity_ness::{ObservablesRecord, QfiOptions, SystemParams};
use serde::Deserialize;

use crate::args::{CommonArgs, SweepArgs};
use crate::error::{CliError, CliResult};

pub const DEFAULT_OMEGA: f64 = 1.0;
pub const DEFAULT_LAMBDA: f64 = 0.1;
pub const DEFAULT_GAMMA: f64 = 0.1;
pub const DEFAULT_TA: f64 = 0.2;
pub const DEFAULT_TB: f64 = 0.6;

pub const FIGURE_LAMBDAS: [f64; 3] = [0.1, 0.2, 0.4];
pub const DELTA_T_MAX: f64 = 0.8;
pub const LAMBDA_MIN: f64 = 0.05;
pub const LAMBDA_MAX: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    DeltaT,
    Lambda,
}

impl AxisName {
    fn parse(s: &str) -> CliResult<Self> {
        match s {
            "delta_t" => Ok(AxisName::DeltaT),
            "lambda" => Ok(AxisName::Lambda),
            _ => Err(CliError::BadInput(format!("unknown sweep axis `{s}` (expected delta_t or lambda)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    Range {
        name: AxisName,
        min: f64,
        max: f64,
        count: usize,
    },
    List {
        name: AxisName,
        values: Vec<f64>,
    },
}

impl AxisSpec {
    pub fn name(&self) -> AxisName {
        match self {
            AxisSpec::Range { name, .. } | AxisSpec::List { name, .. } => *name,
        }
    }

    /// `name=min:max:count` or `name=v1,v2,...`.
    pub fn parse(s: &str) -> CliResult<Self> {
        let bad = || CliError::BadInput(format!("malformed axis `{s}`; use name=min:max:count or name=v1,v2,..."));
        let (name, rest) = s.split_once('=').ok_or_else(bad)?;
        let name = AxisName::parse(name.trim())?;
        if rest.contains(':') {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            Ok(AxisSpec::Range {
                name,
                min: parts[0].trim().parse().map_err(|_| bad())?,
                max: parts[1].trim().parse().map_err(|_| bad())?,
                count: parts[2].trim().parse().map_err(|_| bad())?,
            })
        } else {
            let values = rest
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad())?;
            Ok(AxisSpec::List { name, values })
        }
    }

    pub fn values(&self) -> CliResult<Vec<f64>> {
        match self {
            AxisSpec::Range { min, max, count, .. } => {
                if *count < 2 {
                    return Err(CliError::BadInput(format!("axis count must be >= 2, got {count}")));
                }
                if !(min.is_finite() && max.is_finite() && min < max) {
                    return Err(CliError::BadInput(format!("axis range requires finite min < max, got {min}..{max}")));
                }
                let n = *count - 1;
                Ok((0..=n)
                    .map(|i| if i == n { *max } else { min + (max - min) * i as f64 / n as f64 })
                    .collect())
            }
            AxisSpec::List { values, .. } => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::BadInput("axis value list must be non-empty and finite".into()));
                }
                Ok(values.clone())
            }
        }
    }
}

/// Grid for a sweep. With two axes the grid is traversed row-major: the first
/// axis is the outer loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub axis_1: AxisSpec,
    pub axis_2: Option<AxisSpec>,
    /// Indices into [`ObservablesRecord::FIELDS`], in header order.
    pub outputs: Vec<usize>,
}

pub fn parse_outputs<S: AsRef<str>>(names: &[S]) -> CliResult<Vec<usize>> {
    let mut selected = vec![false; ObservablesRecord::FIELDS.len()];
    for name in names {
        let name = name.as_ref().trim();
        let canonical = if name == "coherence" { "coherence_abs" } else { name };
        let idx = ObservablesRecord::FIELDS
            .iter()
            .position(|f| *f == canonical)
            .ok_or_else(|| CliError::BadInput(format!("unknown output `{name}`")))?;
        selected[idx] = true;
    }
    if !selected.iter().any(|&s| s) {
        return Err(CliError::BadInput("at least one output column is required".into()));
    }
    Ok((0..selected.len()).filter(|&i| selected[i]).collect())
}

fn all_outputs() -> Vec<usize> {
    (0..ObservablesRecord::FIELDS.len()).collect()
}

impl SweepConfig {
    pub fn grid(&self, base: &SystemParams) -> CliResult<Vec<GridPoint>> {
        let first = self.axis_1.values()?;
        let second = match &self.axis_2 {
            Some(axis) => {
                if axis.name() == self.axis_1.name() {
                    return Err(CliError::BadInput("the two sweep axes must differ".into()));
                }
                axis.values()?
            }
            None => vec![f64::NAN],
        };
        let apply = |p: SystemParams, name: AxisName, v: f64| match name {
            AxisName::Lambda => SystemParams { lambda: v, ..p },
            AxisName::DeltaT => SystemParams { t_b: p.t_a + v, ..p },
        };
        let mut points = Vec::with_capacity(first.len() * second.len());
        for &a in &first {
            for &b in &second {
                let mut p = apply(*base, self.axis_1.name(), a);
                let mut delta_t = if self.axis_1.name() == AxisName::DeltaT { a } else { base.delta_t() };
                if let Some(axis) = &self.axis_2 {
                    p = apply(p, axis.name(), b);
                    if axis.name() == AxisName::DeltaT {
                        delta_t = b;
                    }
                }
                p.validate().map_err(|e| {
                    CliError::BadInput(format!("grid point lambda={}, delta_t={delta_t}: {e}", p.lambda))
                })?;
                points.push(GridPoint { params: p, delta_t });
            }
        }
        Ok(points)
    }
}

/// One sweep point; `delta_t` is the axis value as given, which can differ
/// from t_b − t_a in the last bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub params: SystemParams,
    pub delta_t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub params: SystemParams,
    pub sweep: SweepConfig,
}

pub const PRESET_NAMES: [&str; 4] = ["fig2a", "fig2b", "fig3", "fig4"];

pub fn preset(name: &str) -> CliResult<Preset> {
    let lines = AxisSpec::List {
        name: AxisName::Lambda,
        values: FIGURE_LAMBDAS.to_vec(),
    };
    let delta_t = |count| AxisSpec::Range {
        name: AxisName::DeltaT,
        min: 0.0,
        max: DELTA_T_MAX,
        count,
    };
    let (name, axis_1, axis_2, outputs): (&'static str, _, _, &[&str]) = match name {
        "fig2a" => ("fig2a", lines, delta_t(81), &["coherence_abs"]),
        "fig2b" => ("fig2b", lines, delta_t(81), &["qfi"]),
        "fig3" => ("fig3", lines, delta_t(81), &["j_curl", "j_a", "j_b", "epr"]),
        "fig4" => (
            "fig4",
            AxisSpec::Range {
                name: AxisName::Lambda,
                min: LAMBDA_MIN,
                max: LAMBDA_MAX,
                count: 50,
            },
            delta_t(50),
            &["coherence_abs", "qfi", "j_a_p", "j_b_p", "j_a_c", "j_b_c"],
        ),
        other => {
            return Err(CliError::BadInput(format!(
                "unknown preset `{other}` (available: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(Preset {
        name,
        params: SystemParams {
            omega: DEFAULT_OMEGA,
            lambda: DEFAULT_LAMBDA,
            gamma: DEFAULT_GAMMA,
            t_a: DEFAULT_TA,
            t_b: DEFAULT_TB,
        },
        sweep: SweepConfig {
            axis_1,
            axis_2: Some(axis_2),
            outputs: parse_outputs(outputs)?,
        },
    })
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub omega: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub ta: Option<f64>,
    pub tb: Option<f64>,
    pub qfi_step: Option<f64>,
    pub richardson: Option<bool>,
    pub preset: Option<String>,
    pub threads: Option<usize>,
    pub sweep: Option<FileSweep>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSweep {
    pub axis_1: AxisSpec,
    pub axis_2: Option<AxisSpec>,
    pub outputs: Option<Vec<String>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::BadInput(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::BadInput(format!("invalid config {}: {e}", path.display())))
    }
}

/// Fully merged settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub params: SystemParams,
    pub qfi: QfiOptions,
    pub threads: Option<usize>,
    pub sweep: Option<SweepConfig>,
}

pub fn resolve(common: &CommonArgs, sweep_args: Option<&SweepArgs>) -> CliResult<Resolved> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let preset = match common.preset.as_deref().or(file.preset.as_deref()) {
        Some(name) => Some(preset(name)?),
        None => None,
    };
    let mut p = preset.as_ref().map(|p| p.params).unwrap_or(SystemParams {
        omega: DEFAULT_OMEGA,
        lambda: DEFAULT_LAMBDA,
        gamma: DEFAULT_GAMMA,
        t_a: DEFAULT_TA,
        t_b: DEFAULT_TB,
    });
    let mut sweep = preset.map(|p| p.sweep);

    let layers = [
        (file.omega, file.lambda, file.gamma, file.ta, file.tb),
        (common.omega, common.lambda, common.gamma, common.ta, common.tb),
    ];
    for (omega, lambda, gamma, ta, tb) in layers {
        p.omega = omega.unwrap_or(p.omega);
        p.lambda = lambda.unwrap_or(p.lambda);
        p.gamma = gamma.unwrap_or(p.gamma);
        p.t_a = ta.unwrap_or(p.t_a);
        p.t_b = tb.unwrap_or(p.t_b);
    }
    let params = SystemParams::new(p.omega, p.lambda, p.gamma, p.t_a, p.t_b)?;

    let qfi = QfiOptions {
        step: common.qfi_step.or(file.qfi_step).unwrap_or(cavity_ness::observables::DEFAULT_QFI_STEP),
        richardson: common.richardson || file.richardson.unwrap_or(false),
    };
    if !(qfi.step.is_finite() && qfi.step > 0.0) {
        return Err(CliError::BadInput(format!("--qfi-step must be finite and > 0, got {}", qfi.step)));
    }
    let threads = common.threads.or(file.threads);
    if threads == Some(0) {
        return Err(CliError::BadInput("--threads must be >= 1".into()));
    }

    if let Some(fs) = file.sweep {
        let outputs = match fs.outputs {
            Some(names) => parse_outputs(&names)?,
            None => sweep.as_ref().map(|s| s.outputs.clone()).unwrap_or_else(all_outputs),
        };
        sweep = Some(SweepConfig {
            axis_1: fs.axis_1,
            axis_2: fs.axis_2,
            outputs,
        });
    }
    if let Some(args) = sweep_args {
        if let Some(axis) = &args.axis1 {
            let axis_1 = AxisSpec::parse(axis)?;
            let outputs = sweep.as_ref().map(|s| s.outputs.clone()).unwrap_or_else(all_outputs);
            sweep = Some(SweepConfig {
                axis_1,
                axis_2: None,
                outputs,
            });
        }
        if let Some(axis) = &args.axis2 {
            let s = sweep
                .as_mut()
                .ok_or_else(|| CliError::BadInput("--axis2 requires a first axis (--axis1, --preset or config)".into()))?;
            s.axis_2 = Some(AxisSpec::parse(axis)?);
        }
        if let Some(outputs) = &args.outputs {
            let names: Vec<&str> = outputs.split(',').collect();
            let s = sweep
                .as_mut()
                .ok_or_else(|| CliError::BadInput("--outputs requires a sweep grid".into()))?;
            s.outputs = parse_outputs(&names)?;
        }
    }

    Ok(Resolved {
        params,
        qfi,
        threads,
        sweep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_axis_hits_endpoints() {
        let v = AxisSpec::parse("delta_t=0:0.8:81").unwrap().values().unwrap();
        assert_eq!(v.len(), 81);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[80], 0.8);
        assert!((v[40] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn axis_validation() {
        assert!(AxisSpec::parse("delta_t=0:0.8:1").unwrap().values().is_err());
        assert!(AxisSpec::parse("delta_t=0.5:0.1:4").unwrap().values().is_err());
        assert!(AxisSpec::parse("temperature=0:1:3").is_err());
        assert!(AxisSpec::parse("lambda").is_err());
        assert_eq!(
            AxisSpec::parse("delta_t=0,0").unwrap().values().unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn outputs_keep_header_order() {
        assert_eq!(parse_outputs(&["epr", "coherence"]).unwrap(), vec![0, 9]);
        assert!(parse_outputs(&["entropy"]).is_err());
        assert!(parse_outputs::<&str>(&[]).is_err());
    }

    #[test]
    fn presets_encode_figure_grids() {
        let base = preset("fig2a").unwrap();
        let grid = base.sweep.grid(&base.params).unwrap();
        assert_eq!(grid.len(), 3 * 81);
        assert_eq!(grid[0].params.lambda, 0.1);
        assert_eq!(grid[81].params.lambda, 0.2);
        assert_eq!(grid[81 + 40].delta_t, 0.4);
        assert!(grid.iter().all(|g| g.params.gamma == 0.1 && g.params.t_a == 0.2));
        let fig4 = preset("fig4").unwrap();
        assert_eq!(fig4.sweep.grid(&fig4.params).unwrap().len(), 2500);
        assert!(preset("fig5").is_err());
    }

    #[test]
    fn grid_rejects_invalid_points() {
        let sweep = SweepConfig {
            axis_1: AxisSpec::parse("lambda=0.5:1.5:3").unwrap(),
            axis_2: None,
            outputs: all_outputs(),
        };
        let err = sweep.grid(&SystemParams::new(1.0, 0.1, 0.1, 0.2, 0.6).unwrap()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
