//! Test signals with regularity metadata, plus modulus-of-continuity and
//! sup-error measurements.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real function of one variable with known jump/kink locations.
///
/// Everything integrated in this crate (signals, reconstructions, differences)
/// goes through this trait so quadrature can split at the breakpoints.
pub trait RealFn: Sync {
    fn value(&self, x: f64) -> f64;

    /// Breakpoints inside `[lo, hi]`, sorted.
    fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continuity {
    /// Uniformly continuous and bounded.
    CUniform,
    /// Only essentially bounded; may jump.
    LInfinityOnly,
}

pub type SignalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Signal {
    name: String,
    func: SignalFn,
    breakpoints: Vec<f64>,
    sup_norm: Option<f64>,
    lipschitz_constant: Option<f64>,
    continuity: Continuity,
}

impl fmt::Debug for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Signal")
            .field("name", &self.name)
            .field("breakpoints", &self.breakpoints)
            .field("sup_norm", &self.sup_norm)
            .field("lipschitz_constant", &self.lipschitz_constant)
            .field("continuity", &self.continuity)
            .finish()
    }
}

/// The built-in catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinSignal {
    /// `1 / (x^2 + 1)`.
    Runge,
    /// Indicator of `[-1, 1]`.
    StepF1,
    /// `9/x^2` left of -1, then 2, 1, and `-50/x^4` from 1 on.
    PiecewiseF2,
    Constant(f64),
    Identity,
}

/// Lipschitz constant of `1/(1+x^2)`: `|f'|` peaks at `x = 1/sqrt(3)`.
pub fn runge_lipschitz() -> f64 {
    3.0 * 3f64.sqrt() / 8.0
}

pub fn builtin_signal(which: BuiltinSignal) -> Signal {
    match which {
        BuiltinSignal::Runge => Signal {
            name: "runge".into(),
            func: Arc::new(|x: f64| 1.0 / (x * x + 1.0)),
            breakpoints: Vec::new(),
            sup_norm: Some(1.0),
            lipschitz_constant: Some(runge_lipschitz()),
            continuity: Continuity::CUniform,
        },
        BuiltinSignal::StepF1 => Signal {
            name: "step_f1".into(),
            func: Arc::new(|x: f64| if x.abs() <= 1.0 { 1.0 } else { 0.0 }),
            breakpoints: vec![-1.0, 1.0],
            sup_norm: Some(1.0),
            lipschitz_constant: None,
            continuity: Continuity::LInfinityOnly,
        },
        BuiltinSignal::PiecewiseF2 => Signal {
            name: "piecewise_f2".into(),
            func: Arc::new(|x: f64| {
                if x < -1.0 {
                    9.0 / (x * x)
                } else if x < 0.0 {
                    2.0
                } else if x < 1.0 {
                    1.0
                } else {
                    -50.0 / x.powi(4)
                }
            }),
            breakpoints: vec![-1.0, 0.0, 1.0],
            sup_norm: Some(50.0),
            lipschitz_constant: None,
            continuity: Continuity::LInfinityOnly,
        },
        BuiltinSignal::Constant(c) => Signal {
            name: format!("constant({c})"),
            func: Arc::new(move |_| c),
            breakpoints: Vec::new(),
            sup_norm: Some(c.abs()),
            lipschitz_constant: Some(0.0),
            continuity: Continuity::CUniform,
        },
        BuiltinSignal::Identity => Signal {
            name: "identity".into(),
            func: Arc::new(|x| x),
            breakpoints: Vec::new(),
            sup_norm: None,
            lipschitz_constant: Some(1.0),
            continuity: Continuity::CUniform,
        },
    }
}

impl Signal {
    pub fn new(
        name: impl Into<String>,
        func: SignalFn,
        breakpoints: Vec<f64>,
        sup_norm: Option<f64>,
        lipschitz_constant: Option<f64>,
        continuity: Continuity,
    ) -> Result<Self> {
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter("breakpoints must be finite".into()));
        }
        if sup_norm.is_some_and(|s| !(s >= 0.0)) || lipschitz_constant.is_some_and(|l| !(l >= 0.0)) {
            return Err(Error::InvalidParameter("sup norm and Lipschitz constant must be nonnegative".into()));
        }
        let mut breakpoints = breakpoints;
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Ok(Signal { name: name.into(), func, breakpoints, sup_norm, lipschitz_constant, continuity })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        (self.func)(x)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn sup_norm(&self) -> Option<f64> {
        self.sup_norm
    }

    pub fn lipschitz_constant(&self) -> Option<f64> {
        self.lipschitz_constant
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    /// `c * f`, with metadata scaled accordingly.
    pub fn scaled(&self, c: f64) -> Signal {
        let func = Arc::clone(&self.func);
        Signal {
            name: format!("{c}*{}", self.name),
            func: Arc::new(move |x| c * func(x)),
            breakpoints: self.breakpoints.clone(),
            sup_norm: self.sup_norm.map(|s| c.abs() * s),
            lipschitz_constant: self.lipschitz_constant.map(|l| c.abs() * l),
            continuity: self.continuity,
        }
    }

    /// `a * f + b * g`.
    pub fn linear_combination(a: f64, f: &Signal, b: f64, g: &Signal) -> Signal {
        let (ff, gf) = (Arc::clone(&f.func), Arc::clone(&g.func));
        let mut breakpoints: Vec<f64> = f.breakpoints.iter().chain(&g.breakpoints).copied().collect();
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        let both = |x: Option<f64>, y: Option<f64>| Some(a.abs() * x? + b.abs() * y?);
        let continuity = if f.continuity == Continuity::CUniform && g.continuity == Continuity::CUniform {
            Continuity::CUniform
        } else {
            Continuity::LInfinityOnly
        };
        Signal {
            name: format!("{a}*{}+{b}*{}", f.name, g.name),
            func: Arc::new(move |x| a * ff(x) + b * gf(x)),
            breakpoints,
            sup_norm: both(f.sup_norm, g.sup_norm),
            lipschitz_constant: both(f.lipschitz_constant, g.lipschitz_constant),
            continuity,
        }
    }

    /// Upper bound on `sup |f(x) - f(y)|`; zero for declared constants.
    pub(crate) fn oscillation_bound(&self) -> Option<f64> {
        if self.lipschitz_constant == Some(0.0) {
            return Some(0.0);
        }
        self.sup_norm.map(|s| 2.0 * s)
    }
}

impl RealFn for Signal {
    fn value(&self, x: f64) -> f64 {
        self.evaluate(x)
    }

    fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.breakpoints.iter().copied().filter(|&b| b >= lo && b <= hi).collect()
    }
}

/// Pointwise `f - g`.
pub struct Difference<'a> {
    pub minuend: &'a dyn RealFn,
    pub subtrahend: &'a dyn RealFn,
}

impl RealFn for Difference<'_> {
    fn value(&self, x: f64) -> f64 {
        self.minuend.value(x) - self.subtrahend.value(x)
    }

    fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut b = self.minuend.breakpoints_in(lo, hi);
        b.extend(self.subtrahend.breakpoints_in(lo, hi));
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!("interval needs finite lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn expanded(&self, by: f64) -> Interval {
        Interval { lo: self.lo - by, hi: self.hi + by }
    }
}

/// `count` nodes `start + i * step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl UniformGrid {
    pub fn new(start: f64, step: f64, count: usize) -> Result<Self> {
        if !(step > 0.0) || !start.is_finite() || count == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid needs step > 0 and at least one node, got step={step}, count={count}"
            )));
        }
        Ok(UniformGrid { start, step, count })
    }

    /// Nodes covering `[lo, hi]` with the given step; the last node lands on `hi`
    /// when the width is a multiple of the step.
    pub fn over(window: Interval, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidParameter(format!("grid step must be positive, got {step}")));
        }
        let intervals = (window.width() / step * (1.0 + 1e-12)).floor() as usize;
        UniformGrid::new(window.lo, step, intervals + 1)
    }

    pub fn node(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }

    pub fn last(&self) -> f64 {
        self.node(self.count - 1)
    }
}

/// Lower estimate of the modulus of continuity on a window, with the certified
/// Lipschitz upper bound when one is declared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusEstimate {
    pub lower: f64,
    pub upper: Option<f64>,
    /// False when the signal may jump, so the modulus need not vanish as `delta -> 0`.
    pub vanishes: bool,
}

/// Grid supremum of `|f(x) - f(y)|` over pairs with `|x - y| < delta` in the window.
///
/// The pair grid has stride `delta / resolution`; every node is paired with the
/// `resolution - 1` nodes that follow it.
pub fn modulus_of_continuity(f: &Signal, delta: f64, window: Interval, resolution: usize) -> Result<ModulusEstimate> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if resolution < 2 {
        return Err(Error::InvalidParameter("resolution must be at least 2".into()));
    }
    let stride = delta / resolution as f64;
    let count = (window.width() / stride).floor() as usize + 1;
    if count > 50_000_000 {
        return Err(Error::InvalidParameter(format!("modulus grid of {count} nodes is too large")));
    }
    let values: Vec<f64> = (0..count).map(|i| f.evaluate(window.lo + i as f64 * stride)).collect();
    let mut lower = 0.0_f64;
    for (i, &a) in values.iter().enumerate() {
        for &b in values.iter().skip(i + 1).take(resolution - 1) {
            lower = lower.max((a - b).abs());
        }
    }
    Ok(ModulusEstimate {
        lower,
        upper: f.lipschitz_constant.map(|l| l * delta),
        vanishes: f.continuity == Continuity::CUniform,
    })
}

/// `max_i |f(x_i) - g_i|` over the grid nodes.
pub fn sup_error(f: &Signal, values: &[f64], grid: &UniformGrid) -> Result<f64> {
    if values.len() != grid.count {
        return Err(Error::GridMismatch { expected: grid.count, found: values.len() });
    }
    Ok(values
        .iter()
        .enumerate()
        .map(|(i, &g)| (f.evaluate(grid.node(i)) - g).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_values() {
        assert_eq!(builtin_signal(BuiltinSignal::Runge).evaluate(0.0), 1.0);
        let f1 = builtin_signal(BuiltinSignal::StepF1);
        assert_eq!(f1.evaluate(0.5), 1.0);
        assert_eq!(f1.evaluate(1.0), 1.0);
        assert_eq!(f1.evaluate(-1.0), 1.0);
        assert_eq!(f1.evaluate(2.0), 0.0);
        let f2 = builtin_signal(BuiltinSignal::PiecewiseF2);
        assert_eq!(f2.evaluate(1.0), -50.0);
        assert_eq!(f2.evaluate(-1.0), 2.0);
        assert_eq!(f2.evaluate(0.0), 1.0);
        assert_eq!(f2.evaluate(-3.0), 1.0);
        assert_eq!(f2.evaluate(2.0), -50.0 / 16.0);
        assert_eq!(f2.breakpoints(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn runge_lipschitz_constant_matches_dense_derivative_search() {
        // independent: maximise |f'(x)| = 2|x|/(1+x^2)^2 on a fine grid
        let best = (0..2_000_001)
            .map(|i| {
                let x = -5.0 + i as f64 * 5e-6;
                2.0 * x.abs() / (1.0 + x * x).powi(2)
            })
            .fold(0.0, f64::max);
        assert!((best - runge_lipschitz()).abs() < 1e-10);
        assert!((runge_lipschitz() - 0.649_519_052_838_329).abs() < 1e-14);
    }

    #[test]
    fn modulus_of_constant_is_zero() {
        let c = builtin_signal(BuiltinSignal::Constant(3.0));
        let m = modulus_of_continuity(&c, 0.3, Interval::new(-2.0, 2.0).unwrap(), 32).unwrap();
        assert_eq!(m.lower, 0.0);
        assert_eq!(m.upper, Some(0.0));
    }

    #[test]
    fn modulus_of_identity() {
        let id = builtin_signal(BuiltinSignal::Identity);
        let m = modulus_of_continuity(&id, 0.1, Interval::new(-1.0, 1.0).unwrap(), 32).unwrap();
        assert!((m.lower - 0.1).abs() <= 0.1 / 32.0 + 1e-12, "{}", m.lower);
        assert!(m.lower < 0.1);
        assert!((m.upper.unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn modulus_of_runge_is_below_lipschitz_bound() {
        let r = builtin_signal(BuiltinSignal::Runge);
        let m = modulus_of_continuity(&r, 0.1, Interval::new(-3.0, 3.0).unwrap(), 32).unwrap();
        let upper = m.upper.unwrap();
        assert!((upper - 0.064_951_905_283_832_9).abs() < 1e-12);
        assert!(m.lower <= upper);
        assert!(m.lower > 0.9 * upper);
    }

    #[test]
    fn modulus_flags_discontinuous_signals() {
        let f1 = builtin_signal(BuiltinSignal::StepF1);
        let m = modulus_of_continuity(&f1, 0.01, Interval::new(-2.0, 2.0).unwrap(), 32).unwrap();
        assert!(!m.vanishes);
        assert_eq!(m.lower, 1.0);
        assert_eq!(m.upper, None);
    }

    #[test]
    fn modulus_subadditivity_spot_checks() {
        let r = builtin_signal(BuiltinSignal::Runge);
        let w = Interval::new(-3.0, 3.0).unwrap();
        let delta = 0.05;
        let base = modulus_of_continuity(&r, delta, w, 32).unwrap();
        for lambda in [0.5, 2.0, 10.0] {
            let scaled = modulus_of_continuity(&r, lambda * delta, w, 32).unwrap();
            assert!(scaled.lower <= (lambda + 1.0) * base.lower + 1e-12, "lambda={lambda}");
            let (l_up, b_up) = (scaled.upper.unwrap(), base.upper.unwrap());
            assert!(l_up <= (lambda + 1.0) * b_up);
        }
    }

    #[test]
    fn sup_error_cases() {
        let grid = UniformGrid::over(Interval::new(-3.0, 3.0).unwrap(), 0.01).unwrap();
        assert_eq!(grid.count, 601);
        let r = builtin_signal(BuiltinSignal::Runge);
        let exact: Vec<f64> = grid.nodes().iter().map(|&x| r.evaluate(x)).collect();
        assert_eq!(sup_error(&r, &exact, &grid).unwrap(), 0.0);
        let one = builtin_signal(BuiltinSignal::Constant(1.0));
        assert_eq!(sup_error(&one, &vec![0.0; 601], &grid).unwrap(), 1.0);
        assert!(matches!(sup_error(&one, &[0.0; 3], &grid), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn grid_construction() {
        let g = UniformGrid::over(Interval::new(0.0, 1.0).unwrap(), 0.1).unwrap();
        assert_eq!(g.count, 11);
        assert!((g.last() - 1.0).abs() < 1e-15);
        assert!(UniformGrid::new(0.0, 0.0, 3).is_err());
        assert!(Interval::new(1.0, 1.0).is_err());
    }

    #[test]
    fn linear_combination_metadata() {
        let r = builtin_signal(BuiltinSignal::Runge);
        let id = builtin_signal(BuiltinSignal::Identity);
        let h = Signal::linear_combination(2.0, &r, -1.0, &id);
        assert_eq!(h.evaluate(1.0), 2.0 * 0.5 - 1.0);
        assert_eq!(h.sup_norm(), None);
        assert!((h.lipschitz_constant().unwrap() - (2.0 * runge_lipschitz() + 1.0)).abs() < 1e-15);
    }
}
