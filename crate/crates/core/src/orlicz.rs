//! Convex φ-functions, modulars `I[f] = ∫ η(|f|)`, Luxemburg norms and modular
//! distances.
//!
//! Integrals over the real line are truncated to a caller-supplied window; the
//! window is carried in every [`ModularResult`] so the truncation stays visible.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::signals::{Difference, Interval, RealFn};

/// Largest argument passed to `exp` before the value is declared infinite.
pub const EXP_ARGUMENT_CAP: f64 = 700.0;

/// Scale at which the Luxemburg bracket search gives up.
pub const LUXEMBURG_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum OrliczFunction {
    /// `u^p`.
    Power { p: f64 },
    /// `u^alpha * ln(e + u)^beta`.
    Zygmund { alpha: f64, beta: f64 },
    /// `exp(u^alpha) - 1`.
    Exponential { alpha: f64 },
}

impl OrliczFunction {
    pub fn power(p: f64) -> Result<Self> {
        Self::Power { p }.validated()
    }

    pub fn zygmund(alpha: f64, beta: f64) -> Result<Self> {
        Self::Zygmund { alpha, beta }.validated()
    }

    pub fn exponential(alpha: f64) -> Result<Self> {
        Self::Exponential { alpha }.validated()
    }

    /// Checks the parameter ranges (useful after deserialization).
    pub fn validated(self) -> Result<Self> {
        let ok = match self {
            Self::Power { p } => p >= 1.0 && p.is_finite(),
            Self::Zygmund { alpha, beta } => alpha >= 1.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite(),
            Self::Exponential { alpha } => alpha > 0.0 && alpha.is_finite(),
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::InvalidParameter(format!("invalid Orlicz function parameters: {self:?}")))
        }
    }

    /// Whether `eta(2u) <= M eta(u)` holds globally.
    pub fn delta2(&self) -> bool {
        !matches!(self, Self::Exponential { .. })
    }

    pub fn label(&self) -> String {
        match self {
            Self::Power { p } => format!("power({p})"),
            Self::Zygmund { alpha, beta } => format!("zygmund({alpha},{beta})"),
            Self::Exponential { alpha } => format!("exponential({alpha})"),
        }
    }
}

/// `eta(u)` for `u >= 0`.
pub fn phi_eval(eta: &OrliczFunction, u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::InvalidParameter(format!("Orlicz functions are defined for u >= 0, got {u}")));
    }
    Ok(match *eta {
        OrliczFunction::Power { p } => u.powf(p),
        OrliczFunction::Zygmund { alpha, beta } => {
            if u == 0.0 {
                0.0
            } else {
                u.powf(alpha) * (std::f64::consts::E + u).ln().powf(beta)
            }
        }
        OrliczFunction::Exponential { alpha } => {
            let arg = u.powf(alpha);
            if arg > EXP_ARGUMENT_CAP {
                return Err(Error::ModularOverflow { argument: arg });
            }
            arg.exp_m1()
        }
    })
}

/// `eta(2u) / eta(u)`; infinite once `eta(2u)` overflows.
pub fn delta2_ratio(eta: &OrliczFunction, u: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::InvalidParameter(format!("ratio needs u > 0, got {u}")));
    }
    match phi_eval(eta, 2.0 * u) {
        Ok(v) => Ok(v / phi_eval(eta, u)?),
        Err(Error::ModularOverflow { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Largest `eta(2u) / eta(u)` over `samples` log-spaced points of `[u_lo, u_hi]`.
pub fn fitted_delta2_constant(eta: &OrliczFunction, u_lo: f64, u_hi: f64, samples: usize) -> Result<f64> {
    if !(u_lo > 0.0 && u_lo < u_hi) || samples < 2 {
        return Err(Error::InvalidParameter("need 0 < u_lo < u_hi and at least two samples".into()));
    }
    let step = (u_hi / u_lo).ln() / (samples - 1) as f64;
    let mut worst = 0.0_f64;
    for i in 0..samples {
        worst = worst.max(delta2_ratio(eta, u_lo * (i as f64 * step).exp())?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModularResult {
    pub value: f64,
    pub error_estimate: f64,
    /// Integration window; the contribution outside it is not included.
    pub window: Interval,
}

/// `int_window eta(lambda |f(x)|) dx` to absolute accuracy `tol`.
pub fn modular(eta: &OrliczFunction, f: &dyn RealFn, lambda: f64, window: Interval, tol: f64) -> Result<ModularResult> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    // the integrand cannot return an error, so overflow is smuggled out through a cell
    let overflow: Cell<Option<f64>> = Cell::new(None);
    let integrand = |x: f64| match phi_eval(eta, lambda * f.value(x).abs()) {
        Ok(v) => v,
        Err(Error::ModularOverflow { argument }) => {
            overflow.set(Some(argument));
            0.0
        }
        Err(_) => f64::NAN,
    };
    let cuts = f.breakpoints_in(window.lo, window.hi);
    let r = integrate(integrand, window.lo, window.hi, &cuts, QuadOptions::new(tol));
    if let Some(argument) = overflow.get() {
        return Err(Error::ModularOverflow { argument });
    }
    let r = r?;
    if !r.value.is_finite() {
        return Err(Error::InvalidParameter("signal produced non-finite values in the modular window".into()));
    }
    Ok(ModularResult { value: r.value, error_estimate: r.error_estimate, window })
}

/// `I[lambda (f - g)]` on the window.
pub fn modular_distance(
    eta: &OrliczFunction,
    f: &dyn RealFn,
    g: &dyn RealFn,
    lambda: f64,
    window: Interval,
    tol: f64,
) -> Result<ModularResult> {
    modular(eta, &Difference { minuend: f, subtrahend: g }, lambda, window, tol)
}

/// `inf { lambda > 0 : I[f / lambda] <= 1 }` on the window, to relative accuracy `tol`.
pub fn luxemburg_norm(eta: &OrliczFunction, f: &dyn RealFn, window: Interval, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let l1 = modular(&OrliczFunction::Power { p: 1.0 }, f, 1.0, window, 1e-14)?;
    if l1.value == 0.0 {
        return Ok(0.0);
    }
    let quad_tol = 0.01 * tol;
    // overflow means the modular is effectively infinite, i.e. lambda is too small
    let exceeds_one = |lambda: f64| -> Result<bool> {
        match modular(eta, f, 1.0 / lambda, window, quad_tol) {
            Ok(m) => Ok(m.value > 1.0),
            Err(Error::ModularOverflow { .. }) => Ok(true),
            Err(e) => Err(e),
        }
    };
    let (mut lo, mut hi) = (1.0, 1.0);
    if exceeds_one(1.0)? {
        while exceeds_one(hi)? {
            lo = hi;
            hi *= 2.0;
            if hi > LUXEMBURG_CAP {
                return Err(Error::NonBracketable { cap: LUXEMBURG_CAP });
            }
        }
    } else {
        while !exceeds_one(lo)? {
            hi = lo;
            lo *= 0.5;
            if lo < f64::MIN_POSITIVE {
                return Ok(0.0);
            }
        }
    }
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        if exceeds_one(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Sample-and-hold function: `values[i]` on `[start + i h, start + (i+1) h)`, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || !start.is_finite() {
            return Err(Error::InvalidParameter(format!("grid needs finite start and step > 0, got {start}, {step}")));
        }
        Ok(GridFunction { start, step, values })
    }
}

impl RealFn for GridFunction {
    fn value(&self, x: f64) -> f64 {
        let i = ((x - self.start) / self.step).floor();
        if i >= 0.0 && (i as usize) < self.values.len() {
            self.values[i as usize]
        } else {
            0.0
        }
    }

    fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        (0..=self.values.len())
            .map(|i| self.start + i as f64 * self.step)
            .filter(|&x| x >= lo && x <= hi)
            .collect()
    }
}
