//! JSON experiment configuration and its resolution into library objects.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{bspline, fejer, window, Kernel};
use crate::orlicz::OrliczFunction;
use crate::sampling::{OperatorSpec, SampleFunctional};
use crate::signals::{builtin_signal, BuiltinSignal, Continuity, Interval, Signal, UniformGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Bspline { order: u32 },
    Fejer,
    Window { lo: f64, hi: f64, weight: f64 },
}

impl KernelConfig {
    pub fn build(&self) -> Result<Kernel> {
        match *self {
            KernelConfig::Bspline { order } => bspline(order),
            KernelConfig::Fejer => Ok(fejer()),
            KernelConfig::Window { lo, hi, weight } => window(lo, hi, weight),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalConfig {
    Pointmass,
    Window { lo: f64, hi: f64, weight: f64 },
    General { kernel: KernelConfig },
}

/// A constant piece of a literal signal, on `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SignalConfig {
    /// `runge`, `step_f1`, `piecewise_f2` or `identity`.
    Named(String),
    Constant { constant: f64 },
    /// Piecewise-constant literal, zero outside the pieces.
    Piecewise { piecewise: Vec<Piece> },
}

impl SignalConfig {
    pub fn build(&self) -> Result<Signal> {
        match self {
            SignalConfig::Named(name) => {
                let which = match name.as_str() {
                    "runge" => BuiltinSignal::Runge,
                    "step_f1" => BuiltinSignal::StepF1,
                    "piecewise_f2" => BuiltinSignal::PiecewiseF2,
                    "identity" => BuiltinSignal::Identity,
                    other => return Err(Error::InvalidParameter(format!("unknown signal '{other}'"))),
                };
                Ok(builtin_signal(which))
            }
            SignalConfig::Constant { constant } => {
                if !constant.is_finite() {
                    return Err(Error::InvalidParameter("constant signal must be finite".into()));
                }
                Ok(builtin_signal(BuiltinSignal::Constant(*constant)))
            }
            SignalConfig::Piecewise { piecewise } => {
                if piecewise.is_empty() {
                    return Err(Error::InvalidParameter("piecewise signal needs at least one piece".into()));
                }
                for p in piecewise {
                    Interval::new(p.lo, p.hi)?;
                    if !p.value.is_finite() {
                        return Err(Error::InvalidParameter("piece values must be finite".into()));
                    }
                }
                let pieces = piecewise.clone();
                let sup = pieces.iter().fold(0.0_f64, |m, p| m.max(p.value.abs()));
                let breakpoints = pieces.iter().flat_map(|p| [p.lo, p.hi]).collect();
                let func = Arc::new(move |x: f64| {
                    pieces.iter().find(|p| p.lo <= x && x < p.hi).map_or(0.0, |p| p.value)
                });
                Signal::new("piecewise", func, breakpoints, Some(sup), None, Continuity::LInfinityOnly)
            }
        }
    }
}

// unknown-field checks are not available together with `flatten`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrliczEntry {
    #[serde(flatten)]
    pub eta: OrliczFunction,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub series_tol: f64,
    pub quad_tol: f64,
    pub modular_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { series_tol: 1e-10, quad_tol: 1e-12, modular_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default = "default_format")]
    pub format: OutputFormat,
}

fn default_format() -> OutputFormat {
    OutputFormat::Both
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), format: OutputFormat::Both }
    }
}

fn default_window() -> [f64; 2] {
    [-3.0, 3.0]
}

fn default_modular_window() -> [f64; 2] {
    [-8.0, 8.0]
}

fn default_grid_step() -> f64 {
    0.01
}

fn default_truncation() -> u64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub phi: KernelConfig,
    pub psi: FunctionalConfig,
    pub signal: SignalConfig,
    pub w_list: Vec<f64>,
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    /// Integration window for modulars.
    #[serde(default = "default_modular_window")]
    pub modular_window: [f64; 2],
    #[serde(default)]
    pub orlicz: Vec<OrliczEntry>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Lattice radius for the partition-of-unity check of decaying kernels.
    #[serde(default = "default_truncation")]
    pub truncation_radius: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Everything a command needs, built and validated.
#[derive(Debug)]
pub struct Resolved {
    pub phi: Kernel,
    pub psi: SampleFunctional,
    pub signal: Signal,
    pub spec: OperatorSpec,
    pub window: Interval,
    pub grid: UniformGrid,
    pub modular_window: Interval,
    pub orlicz: Vec<OrliczEntry>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))
    }

    pub fn functional(&self) -> Result<SampleFunctional> {
        match &self.psi {
            FunctionalConfig::Pointmass => Ok(SampleFunctional::PointMass),
            FunctionalConfig::Window { lo, hi, weight } => SampleFunctional::window(*lo, *hi, *weight),
            FunctionalConfig::General { kernel } => SampleFunctional::general(kernel.build()?, self.tolerances.quad_tol),
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        if self.w_list.is_empty() {
            return Err(Error::InvalidParameter("w_list must not be empty".into()));
        }
        if self.w_list.iter().any(|w| !(*w > 0.0) || !w.is_finite()) || self.w_list.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(Error::InvalidParameter("w_list must hold positive values in strictly ascending order".into()));
        }
        if !(self.grid_step > 0.0) {
            return Err(Error::InvalidParameter(format!("grid_step must be positive, got {}", self.grid_step)));
        }
        let t = self.tolerances;
        if !(t.series_tol > 0.0 && t.quad_tol > 0.0 && t.modular_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        let orlicz = self
            .orlicz
            .iter()
            .map(|e| {
                if !(e.lambda > 0.0) || !e.lambda.is_finite() {
                    return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", e.lambda)));
                }
                Ok(OrliczEntry { eta: e.eta.validated()?, lambda: e.lambda })
            })
            .collect::<Result<Vec<_>>>()?;
        let phi = self.phi.build()?;
        let psi = self.functional()?;
        let signal = self.signal.build()?;
        let spec = OperatorSpec::new(phi.clone(), psi.clone(), self.w_list[0], t.series_tol, t.quad_tol)?;
        let window = Interval::new(self.window[0], self.window[1])?;
        let grid = UniformGrid::over(window, self.grid_step)?;
        let modular_window = Interval::new(self.modular_window[0], self.modular_window[1])?;
        Ok(Resolved { phi, psi, signal, spec, window, grid, modular_window, orlicz })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "phi": {"family": "bspline", "order": 3},
        "psi": {"kind": "window", "lo": 0, "hi": 1, "weight": 1},
        "signal": "runge",
        "w_list": [5, 10],
        "orlicz": [{"variant": "power", "p": 2, "lambda": 1}, {"variant": "zygmund", "alpha": 1, "beta": 1, "lambda": 0.5}]
    }"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = ExperimentConfig::from_json(SAMPLE).unwrap();
        assert_eq!(cfg.window, [-3.0, 3.0]);
        assert_eq!(cfg.orlicz[1].eta, OrliczFunction::Zygmund { alpha: 1.0, beta: 1.0 });
        let r = cfg.resolve().unwrap();
        assert_eq!(r.grid.count, 601);
        assert_eq!(r.signal.name(), "runge");
    }

    #[test]
    fn round_trips() {
        let cfg = ExperimentConfig::from_json(SAMPLE).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn signal_forms() {
        let c: SignalConfig = serde_json::from_str(r#"{"constant": 2.5}"#).unwrap();
        assert_eq!(c.build().unwrap().evaluate(100.0), 2.5);
        let p: SignalConfig = serde_json::from_str(r#"{"piecewise": [{"lo": 0, "hi": 1, "value": 3}]}"#).unwrap();
        let s = p.build().unwrap();
        assert_eq!((s.evaluate(0.0), s.evaluate(1.0)), (3.0, 0.0));
        assert!(SignalConfig::Named("nope".into()).build().is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = ExperimentConfig::from_json(SAMPLE).unwrap();
        cfg.w_list = vec![10.0, 5.0];
        assert!(cfg.resolve().unwrap_err().is_config());
        let mut cfg = ExperimentConfig::from_json(SAMPLE).unwrap();
        cfg.orlicz[0].lambda = 0.0;
        assert!(cfg.resolve().is_err());
        assert!(ExperimentConfig::from_json(r#"{"phi": {"family": "bspline", "order": 3}}"#).is_err());
    }
}
