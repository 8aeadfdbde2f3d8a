//! Kernels for sampling series: central B-splines, the Fejér kernel, indicator
//! windows and user-supplied functions, with the metadata (support, decay,
//! norms) the moment and truncation machinery relies on.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};

/// Largest B-spline order accepted; the truncated-power sum loses accuracy beyond it.
pub const MAX_BSPLINE_ORDER: u32 = 20;

/// Largest truncation radius used when integrating a decaying kernel over the line.
pub const MAX_TAIL_RADIUS: f64 = 40_000.0;

/// Where a kernel lives: a bounded interval, or all of the real line with a
/// power-law envelope `|k(t)| <= coefficient * |t|^(-exponent)` for `|t| > radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupportDescriptor {
    Compact { lo: f64, hi: f64 },
    Decaying { exponent: f64, coefficient: f64, radius: f64 },
}

impl SupportDescriptor {
    pub fn compact(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!("compact support needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(SupportDescriptor::Compact { lo, hi })
    }

    pub fn decaying(exponent: f64, coefficient: f64, radius: f64) -> Result<Self> {
        if !(exponent > 1.0) {
            return Err(Error::InvalidParameter(format!("decay exponent must exceed 1, got {exponent}")));
        }
        if !(coefficient > 0.0) || !(radius >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "decay envelope needs coefficient > 0 and radius >= 0, got C={coefficient}, R={radius}"
            )));
        }
        Ok(SupportDescriptor::Decaying { exponent, coefficient, radius })
    }

    /// Bound on `sum_{|j| > k} C |u - j|^(-beta)` for `u` in `[0, 1)`, valid once `k >= max(R, 2)`.
    ///
    /// `beta` is the effective decay exponent of the summand (the kernel's exponent
    /// minus any moment order) and must exceed 1.
    pub fn lattice_tail_bound(coefficient: f64, beta: f64, k: u64) -> f64 {
        let k = k as f64;
        coefficient * ((k - 1.0).powf(1.0 - beta) + k.powf(1.0 - beta)) / (beta - 1.0)
    }

    /// Bound on `int_{|t| > T} C |t|^(-beta) dt`.
    pub fn continuous_tail_bound(coefficient: f64, beta: f64, radius: f64) -> f64 {
        2.0 * coefficient * radius.powf(1.0 - beta) / (beta - 1.0)
    }
}

/// `sin(pi x)` with exact zeros at the integers.
pub fn sin_pi(x: f64) -> f64 {
    if !x.is_finite() {
        return f64::NAN;
    }
    // reduce to [-1, 1]; the subtraction is exact for |x| < 2^52
    let r = x - 2.0 * (0.5 * x).round();
    if r == 0.0 || r.abs() == 1.0 {
        return 0.0;
    }
    // sin(pi r) = sin(pi (1 - r)) keeps the argument within [-1/2, 1/2]
    let arg = if r > 0.5 {
        1.0 - r
    } else if r < -0.5 {
        -1.0 - r
    } else {
        r
    };
    (PI * arg).sin()
}

/// Normalised sinc, `sin(pi v) / (pi v)` with `sinc(0) = 1`.
pub fn sinc(v: f64) -> f64 {
    if v == 0.0 {
        return 1.0;
    }
    if v.abs() < 1e-6 {
        let z = PI * v;
        return 1.0 - z * z / 6.0;
    }
    sin_pi(v) / (PI * v)
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Central B-spline of order `n` via the truncated-power sum.
fn bspline_value(n: u32, t: f64) -> f64 {
    let half = f64::from(n) / 2.0;
    if n == 1 {
        // half-open [-1/2, 1/2), matching the window convention
        return if (-0.5..0.5).contains(&t) { 1.0 } else { 0.0 };
    }
    let a = t.abs();
    if a >= half {
        return 0.0;
    }
    // evaluate on the left half so only the leading terms of the sum are active
    let s = -a;
    let degree = (n - 1) as i32;
    let mut factorial = 1.0;
    for i in 2..n {
        factorial *= f64::from(i);
    }
    let mut sum = 0.0;
    for j in 0..=n {
        let x = half + s - f64::from(j);
        if x <= 0.0 {
            break;
        }
        let term = binomial(n, j) * x.powi(degree);
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    (sum / factorial).max(0.0)
}

fn fejer_value(t: f64) -> f64 {
    let s = sinc(0.5 * t);
    0.5 * s * s
}

/// Exact two-sided tail mass of the Fejér kernel beyond an even integer radius,
/// `2/(pi^2 T)`, with its remainder bound `8/(pi^4 T^3)`.
fn fejer_tail_mass(radius: f64) -> (f64, f64) {
    let estimate = 2.0 / (PI * PI * radius);
    let bound = 8.0 / (PI.powi(4) * radius.powi(3));
    (estimate, bound)
}

pub type KernelFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Concrete shape behind a [`Kernel`].
#[derive(Clone)]
pub enum KernelFamily {
    BSpline { order: u32 },
    Fejer,
    Window { lo: f64, hi: f64, weight: f64 },
    Custom { func: KernelFn, breakpoints: Vec<f64> },
}

impl fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::BSpline { order } => write!(f, "BSpline {{ order: {order} }}"),
            KernelFamily::Fejer => write!(f, "Fejer"),
            KernelFamily::Window { lo, hi, weight } => {
                write!(f, "Window {{ lo: {lo}, hi: {hi}, weight: {weight} }}")
            }
            KernelFamily::Custom { breakpoints, .. } => write!(f, "Custom {{ breakpoints: {breakpoints:?} }}"),
        }
    }
}

/// An integrable real function together with its support, norm and shape flags.
///
/// Kernels are immutable once built and cheap to clone.
#[derive(Debug, Clone)]
pub struct Kernel {
    name: String,
    family: KernelFamily,
    support: SupportDescriptor,
    l1_norm: f64,
    mass: f64,
    nonnegative: bool,
    symmetric: bool,
}

/// Central B-spline `sigma_n` of order `n`, supported on `[-n/2, n/2]`.
pub fn bspline(n: u32) -> Result<Kernel> {
    if n == 0 {
        return Err(Error::InvalidParameter("B-spline order must be at least 1".into()));
    }
    if n > MAX_BSPLINE_ORDER {
        return Err(Error::InvalidParameter(format!(
            "B-spline order {n} exceeds the supported maximum {MAX_BSPLINE_ORDER}"
        )));
    }
    let half = f64::from(n) / 2.0;
    Ok(Kernel {
        name: format!("bspline{n}"),
        family: KernelFamily::BSpline { order: n },
        support: SupportDescriptor::Compact { lo: -half, hi: half },
        l1_norm: 1.0,
        mass: 1.0,
        nonnegative: true,
        // sigma_1 is the half-open box, symmetric only almost everywhere
        symmetric: n >= 2,
    })
}

/// Fejér kernel `F(t) = sinc^2(t/2) / 2`.
pub fn fejer() -> Kernel {
    Kernel {
        name: "fejer".into(),
        family: KernelFamily::Fejer,
        support: SupportDescriptor::Decaying { exponent: 2.0, coefficient: 2.0 / (PI * PI), radius: 1.0 },
        l1_norm: 1.0,
        mass: 1.0,
        nonnegative: true,
        symmetric: true,
    }
}

/// `weight * chi_[lo, hi)`.
pub fn window(lo: f64, hi: f64, weight: f64) -> Result<Kernel> {
    let support = SupportDescriptor::compact(lo, hi)?;
    if !(weight > 0.0) || !weight.is_finite() {
        return Err(Error::InvalidParameter(format!("window weight must be positive, got {weight}")));
    }
    Ok(Kernel {
        name: format!("window[{lo},{hi})x{weight}"),
        family: KernelFamily::Window { lo, hi, weight },
        support,
        l1_norm: weight * (hi - lo),
        mass: weight * (hi - lo),
        nonnegative: true,
        symmetric: false,
    })
}

impl Kernel {
    /// Wraps an arbitrary function. Its L1 norm and mass are computed once here by
    /// quadrature (plus the decay tail bound for non-compact supports).
    pub fn custom(
        name: impl Into<String>,
        func: KernelFn,
        support: SupportDescriptor,
        breakpoints: Vec<f64>,
        nonnegative: bool,
        symmetric: bool,
    ) -> Result<Self> {
        let mut breakpoints = breakpoints;
        breakpoints.sort_by(f64::total_cmp);
        let mut kernel = Kernel {
            name: name.into(),
            family: KernelFamily::Custom { func, breakpoints },
            support,
            l1_norm: f64::NAN,
            mass: f64::NAN,
            nonnegative,
            symmetric,
        };
        let tol = 1e-10;
        let l1 = kernel.integrate_weighted(|_, v| v.abs(), 0.0, tol)?;
        let mass = kernel.integrate_weighted(|_, v| v, 0.0, tol)?;
        if !(l1.0 > 0.0) {
            return Err(Error::InvalidParameter("kernel has zero L1 norm".into()));
        }
        kernel.l1_norm = l1.0;
        kernel.mass = mass.0;
        Ok(kernel)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn support(&self) -> SupportDescriptor {
        self.support
    }

    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    /// Signed integral of the kernel.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_compact(&self) -> bool {
        matches!(self.support, SupportDescriptor::Compact { .. })
    }

    /// Whether `sum_k k(u - k) = 1` holds identically (known analytically).
    pub fn exact_partition_of_unity(&self) -> bool {
        match self.family {
            KernelFamily::BSpline { .. } | KernelFamily::Fejer => true,
            KernelFamily::Window { lo, hi, weight } => {
                let width = hi - lo;
                width.fract() == 0.0 && weight * width == 1.0
            }
            KernelFamily::Custom { .. } => false,
        }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        match &self.family {
            KernelFamily::BSpline { order } => bspline_value(*order, t),
            KernelFamily::Fejer => fejer_value(t),
            KernelFamily::Window { lo, hi, weight } => {
                if t >= *lo && t < *hi {
                    *weight
                } else {
                    0.0
                }
            }
            KernelFamily::Custom { func, .. } => match self.support {
                SupportDescriptor::Compact { lo, hi } if t < lo || t > hi => 0.0,
                _ => func(t),
            },
        }
    }

    /// Points where the kernel or one of its low derivatives jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.family {
            KernelFamily::BSpline { order } => {
                let half = f64::from(*order) / 2.0;
                (0..=*order).map(|j| -half + f64::from(j)).collect()
            }
            KernelFamily::Fejer => Vec::new(),
            KernelFamily::Window { lo, hi, .. } => vec![*lo, *hi],
            KernelFamily::Custom { breakpoints, .. } => {
                let mut b = breakpoints.clone();
                if let SupportDescriptor::Compact { lo, hi } = self.support {
                    b.push(lo);
                    b.push(hi);
                    b.sort_by(f64::total_cmp);
                    b.dedup();
                }
                b
            }
        }
    }

    /// Closed-form Fourier transform `int k(t) e^{-ivt} dt`.
    pub fn fourier_hat(&self, v: f64) -> Result<f64> {
        match self.family {
            KernelFamily::BSpline { order } => Ok(sinc(v / (2.0 * PI)).powi(order as i32)),
            KernelFamily::Fejer => {
                let r = v.abs() / PI;
                Ok(if r <= 1.0 { 1.0 - r } else { 0.0 })
            }
            _ => Err(Error::Unsupported(format!("no closed-form Fourier transform for kernel '{}'", self.name))),
        }
    }

    /// Radius beyond which the continuous tail of `|t|^order |k(t)|` is below `tol`.
    ///
    /// Returns `(radius, tail_estimate, tail_bound)`; for compact kernels the
    /// radius covers the support and both tail numbers are zero. The radius of a
    /// decaying kernel is always an even integer.
    pub(crate) fn continuous_truncation(&self, order: f64, tol: f64, max_radius: f64) -> Result<(f64, f64, f64)> {
        match self.support {
            SupportDescriptor::Compact { lo, hi } => Ok((lo.abs().max(hi.abs()), 0.0, 0.0)),
            SupportDescriptor::Decaying { exponent, radius, .. } => {
                let beta = exponent - order;
                if !(beta > 1.0) {
                    return Err(Error::DivergentMoment { order, exponent });
                }
                let even_ceil = |x: f64| 2.0 * (0.5 * x).ceil();
                let floor_radius = even_ceil(radius.max(2.0));
                if order == 0.0 && matches!(self.family, KernelFamily::Fejer) {
                    // remainder bound 8/(pi^4 T^3) <= tol
                    let t = even_ceil((8.0 / (PI.powi(4) * tol)).cbrt()).max(floor_radius);
                    if t > max_radius {
                        return Err(Error::TruncationBudget { needed: t as u64, budget: max_radius as u64 });
                    }
                    let (estimate, bound) = fejer_tail_mass(t);
                    return Ok((t, estimate, bound));
                }
                let (t, bound) = self.decay_radius(order, tol, max_radius)?;
                // tail of a nonnegative-weighted integrand lies in [0, bound]
                Ok((t, 0.5 * bound, 0.5 * bound))
            }
        }
    }

    /// Smallest even-integer radius `T` (at least the envelope radius) with
    /// `int_{|t| > T} |t|^order |k(t)| dt <= tol` by the decay envelope alone.
    /// Returns `(T, envelope_bound)`; compact kernels return their support radius and 0.
    pub(crate) fn decay_radius(&self, order: f64, tol: f64, max_radius: f64) -> Result<(f64, f64)> {
        match self.support {
            SupportDescriptor::Compact { lo, hi } => Ok((lo.abs().max(hi.abs()), 0.0)),
            SupportDescriptor::Decaying { exponent, coefficient, radius } => {
                let beta = exponent - order;
                if !(beta > 1.0) {
                    return Err(Error::DivergentMoment { order, exponent });
                }
                let even_ceil = |x: f64| 2.0 * (0.5 * x).ceil();
                let floor_radius = even_ceil(radius.max(2.0));
                if tol.is_infinite() {
                    return Ok((floor_radius, 0.0));
                }
                let raw = (2.0 * coefficient / (tol * (beta - 1.0))).powf(1.0 / (beta - 1.0));
                let t = even_ceil(raw).max(floor_radius);
                if t > max_radius {
                    return Err(Error::TruncationBudget { needed: t as u64, budget: max_radius as u64 });
                }
                Ok((t, SupportDescriptor::continuous_tail_bound(coefficient, beta, t)))
            }
        }
    }

    /// Integrates `g(t, k(t))` over the real line to absolute accuracy `tol`,
    /// where `g` is dominated by `|t|^order |k(t)|`. Returns `(value, certified_error)`.
    ///
    /// The tail correction is only meaningful for integrands that are nonnegative
    /// and of the same sign as `|k|` in the tails; signed integrands get the tail
    /// bound as error with zero correction.
    pub(crate) fn integrate_weighted<G: Fn(f64, f64) -> f64>(&self, g: G, order: f64, tol: f64) -> Result<(f64, f64)> {
        self.integrate_weighted_signed(g, order, tol, true)
    }

    pub(crate) fn integrate_weighted_signed<G: Fn(f64, f64) -> f64>(
        &self,
        g: G,
        order: f64,
        tol: f64,
        nonnegative_integrand: bool,
    ) -> Result<(f64, f64)> {

        let integrand = |t: f64| g(t, self.evaluate(t));
        match self.support {
            SupportDescriptor::Compact { lo, hi } => {
                let r = integrate(integrand, lo, hi, &self.breakpoints(), QuadOptions::new(tol))?;
                Ok((r.value, r.error_estimate))
            }
            SupportDescriptor::Decaying { .. } => {
                let (radius, estimate, bound) = self.continuous_truncation(order, 0.5 * tol, MAX_TAIL_RADIUS)?;
                let mut panels: Vec<f64> = self.breakpoints();
                // unit panels keep oscillating tails from aliasing the 15-point rule
                let n = radius as i64;
                panels.extend((-n..=n).map(|i| i as f64));
                let r = integrate(integrand, -radius, radius, &panels, QuadOptions::new(0.5 * tol))?;
                let (correction, tail_err) = if nonnegative_integrand { (estimate, bound) } else { (0.0, estimate + bound) };
                Ok((r.value + correction, r.error_estimate + tail_err))
            }
        }
    }
}

/// `max_u |sum_{|j| <= K} k(u - j) - 1|` over the probe points, plus the certified
/// lattice tail bound for decaying kernels.
pub fn partition_of_unity_residual(kernel: &Kernel, probe_points: &[f64], truncation_radius: u64) -> Result<f64> {
    if truncation_radius == 0 {
        return Err(Error::InvalidParameter("truncation radius must be positive".into()));
    }
    if let Some(&bad) = probe_points.iter().find(|&&u| !(0.0..1.0).contains(&u)) {
        return Err(Error::InvalidParameter(format!("probe point {bad} outside [0, 1)")));
    }
    let tail = match kernel.support {
        SupportDescriptor::Compact { .. } => 0.0,
        SupportDescriptor::Decaying { exponent, coefficient, radius } => {
            if exponent <= 1.0 {
                return Err(Error::NonIntegrable(kernel.name.clone()));
            }
            let needed = radius.ceil().max(2.0) as u64;
            if truncation_radius < needed {
                return Err(Error::InvalidParameter(format!(
                    "truncation radius {truncation_radius} below the decay radius {needed}"
                )));
            }
            SupportDescriptor::lattice_tail_bound(coefficient, exponent, truncation_radius)
        }
    };
    let k = truncation_radius as i64;
    // max is order-independent, so the parallel reduction is deterministic
    let worst = probe_points
        .par_iter()
        .map(|&u| {
            let s = match kernel.family {
                KernelFamily::Fejer => fejer_lattice_sum(u, k),
                _ => (-k..=k).map(|j| kernel.evaluate(u - j as f64)).sum(),
            };
            (s - 1.0).abs()
        })
        .reduce(|| 0.0_f64, f64::max);
    Ok(worst + tail)
}

/// `sum_{|j| <= k} F(u - j)` for the Fejér kernel. Along the lattice
/// `sin^2(pi (u - j) / 2)` alternates between `sin^2(pi u / 2)` and `cos^2(pi u / 2)`,
/// so only one division per term remains.
fn fejer_lattice_sum(u: f64, k: i64) -> f64 {
    let s2 = sin_pi(0.5 * u).powi(2);
    // cos(pi u / 2) = sin(pi (1 - u) / 2) avoids cancellation in 1 - s2 near u = 1
    let c2 = sin_pi(0.5 * (1.0 - u)).powi(2);
    let scale = 2.0 / (PI * PI);
    (-k..=k)
        .map(|j| {
            let t = u - j as f64;
            if t.abs() < 1e-6 {
                fejer_value(t)
            } else {
                let num = if j % 2 == 0 { s2 } else { c2 };
                scale * num / (t * t)
            }
        })
        .sum()
}

/// `count` equispaced points `i / count` in `[0, 1)`.
pub fn unit_probes(count: usize) -> Vec<f64> {
    (0..count).map(|i| i as f64 / count as f64).collect()
}
