//! Discrete and continuous moments of kernels.
//!
//! Discrete moments `M_nu(k) = sup_u sum_j |k(u - j)| |u - j|^nu` are 1-periodic in
//! `u`, so the supremum is taken over equispaced probes in `[0, 1)`, doubling the
//! probe count until the estimate settles. Continuous moments are integrals over
//! the real line, truncated with a certified tail for decaying kernels.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelFamily, SupportDescriptor};

/// Upper limit on lattice terms per probe for decaying kernels.
pub const MAX_LATTICE_RADIUS: u64 = 2_000_000;
const DEFAULT_PROBES: usize = 2048;
const MAX_PROBES: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMethod {
    ClosedForm,
    GridSupremum,
    Quadrature,
}

impl MomentMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            MomentMethod::ClosedForm => "closed_form",
            MomentMethod::GridSupremum => "grid_supremum",
            MomentMethod::Quadrature => "quadrature",
        }
    }
}

/// A moment value with the error budget attached to it. For absolute moments the
/// value is nonnegative; algebraic moments may be negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentResult {
    pub value: f64,
    pub certified_error: f64,
    pub method: MomentMethod,
}

impl MomentResult {
    pub fn closed_form(value: f64) -> Self {
        MomentResult { value, certified_error: 0.0, method: MomentMethod::ClosedForm }
    }
}

/// Smallest lattice radius whose tail of `C |u - j|^(order - alpha)` is within `tol`.
pub(crate) fn lattice_radius(kernel: &Kernel, order: f64, tol: f64) -> Result<(u64, f64)> {
    match kernel.support() {
        SupportDescriptor::Compact { lo, hi } => Ok(((lo.abs().max(hi.abs()).ceil() as u64) + 1, 0.0)),
        SupportDescriptor::Decaying { exponent, coefficient, radius } => {
            let beta = exponent - order;
            if !(beta > 1.0) {
                return Err(Error::DivergentMoment { order, exponent });
            }
            if tol.is_infinite() {
                return Ok(((radius.ceil() as u64).max(2), 0.0));
            }
            // tail <= 2C (K-1)^(1-beta) / (beta-1)
            let raw = 1.0 + (2.0 * coefficient / (tol * (beta - 1.0))).powf(1.0 / (beta - 1.0));
            let mut k = (raw.ceil() as u64).max(radius.ceil() as u64).max(2);
            while k > 2 && SupportDescriptor::lattice_tail_bound(coefficient, beta, k - 1) <= tol {
                k -= 1;
            }
            while SupportDescriptor::lattice_tail_bound(coefficient, beta, k) > tol {
                k += 1;
            }
            if k > MAX_LATTICE_RADIUS {
                return Err(Error::TruncationBudget { needed: k, budget: MAX_LATTICE_RADIUS });
            }
            Ok((k, SupportDescriptor::lattice_tail_bound(coefficient, beta, k)))
        }
    }
}

fn check_order(order: f64) -> Result<()> {
    if !(order >= 0.0) || !order.is_finite() {
        return Err(Error::InvalidParameter(format!("moment order must be a nonnegative number, got {order}")));
    }
    Ok(())
}

fn lattice_abs_sum(kernel: &Kernel, order: f64, u: f64, radius: u64) -> f64 {
    let k = radius as i64;
    (-k..=k)
        .map(|j| {
            let t = u - j as f64;
            let v = kernel.evaluate(t).abs();
            if v == 0.0 {
                0.0
            } else if order == 0.0 {
                v
            } else {
                v * t.abs().powf(order)
            }
        })
        .sum()
}

/// `M_nu(k)`, the discrete absolute moment of order `order`.
pub fn discrete_absolute_moment(kernel: &Kernel, order: f64, probes: usize, tol: f64) -> Result<MomentResult> {
    check_order(order)?;
    if probes == 0 {
        return Err(Error::InvalidParameter("need at least one probe".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    // nonnegative exact partitions of unity have M_0 = 1
    if order == 0.0 && kernel.is_nonnegative() && kernel.exact_partition_of_unity() {
        return Ok(MomentResult::closed_form(1.0));
    }
    let (radius, tail) = lattice_radius(kernel, order, 0.5 * tol)?;
    let sup_over = |count: usize| -> f64 {
        (0..count)
            .map(|i| lattice_abs_sum(kernel, order, i as f64 / count as f64, radius))
            .fold(0.0, f64::max)
    };
    let mut count = probes;
    let mut estimate = sup_over(count);
    let mut change;
    loop {
        let next_count = count * 2;
        let next = sup_over(next_count);
        change = (next - estimate).abs();
        count = next_count;
        estimate = estimate.max(next);
        if change < 0.5 * tol || count >= MAX_PROBES.max(probes) {
            break;
        }
    }
    Ok(MomentResult { value: estimate, certified_error: change + tail, method: MomentMethod::GridSupremum })
}

/// `M_nu(k)` with the default probe density.
pub fn discrete_absolute_moment_default(kernel: &Kernel, order: f64, tol: f64) -> Result<MomentResult> {
    discrete_absolute_moment(kernel, order, DEFAULT_PROBES, tol)
}

/// `m_nu(k, u) = sum_j k(u - j) (j - u)^nu`, the signed discrete moment at `u`.
pub fn discrete_algebraic_moment(kernel: &Kernel, order: u32, u: f64, tol: f64) -> Result<MomentResult> {
    if !u.is_finite() {
        return Err(Error::InvalidParameter(format!("u must be finite, got {u}")));
    }
    let (radius, tail) = lattice_radius(kernel, f64::from(order), tol)?;
    let center = u.floor();
    let frac = u - center;
    let k = radius as i64;
    let value = (-k..=k)
        .map(|j| {
            // (j + center) - u == j - frac
            let d = j as f64 - frac;
            kernel.evaluate(-d) * d.powi(order as i32)
        })
        .sum();
    let method = if tail == 0.0 { MomentMethod::ClosedForm } else { MomentMethod::GridSupremum };
    Ok(MomentResult { value, certified_error: tail, method })
}

fn window_abs_moment_exact(lo: f64, hi: f64, weight: f64, order: f64) -> f64 {
    let piece = |a: f64, b: f64| (b.powf(order + 1.0) - a.powf(order + 1.0)) / (order + 1.0);
    let integral = if lo >= 0.0 {
        piece(lo, hi)
    } else if hi <= 0.0 {
        piece(-hi, -lo)
    } else {
        piece(0.0, -lo) + piece(0.0, hi)
    };
    weight * integral
}

/// `M~_nu(psi) = int |t|^nu |psi(t)| dt`.
pub fn continuous_absolute_moment(psi: &Kernel, order: f64, tol: f64) -> Result<MomentResult> {
    check_order(order)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    if let KernelFamily::Window { lo, hi, weight } = *psi.family() {
        return Ok(MomentResult::closed_form(window_abs_moment_exact(lo, hi, weight, order)));
    }
    if order == 0.0 && matches!(psi.family(), KernelFamily::BSpline { .. }) {
        return Ok(MomentResult::closed_form(1.0));
    }
    let (value, err) = psi.integrate_weighted(
        |t, v| if order == 0.0 { v.abs() } else { v.abs() * t.abs().powf(order) },
        order,
        tol,
    )?;
    if err > tol {
        return Err(Error::QuadratureNonConvergence { requested: tol, achieved: err });
    }
    Ok(MomentResult { value, certified_error: err, method: MomentMethod::Quadrature })
}

/// `m~_nu(psi) = int t^nu psi(t) dt`.
pub fn continuous_algebraic_moment(psi: &Kernel, order: u32, tol: f64) -> Result<MomentResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    if let KernelFamily::Window { lo, hi, weight } = *psi.family() {
        let p = f64::from(order) + 1.0;
        let value = weight * (hi.powf(p) - lo.powf(p)) / p;
        return Ok(MomentResult::closed_form(value));
    }
    let nonnegative = psi.is_nonnegative() && order.is_multiple_of(2);
    let (value, err) = psi.integrate_weighted_signed(
        |t, v| v * t.powi(order as i32),
        f64::from(order),
        tol,
        nonnegative,
    )?;
    if err > tol {
        return Err(Error::QuadratureNonConvergence { requested: tol, achieved: err });
    }
    Ok(MomentResult { value, certified_error: err, method: MomentMethod::Quadrature })
}
