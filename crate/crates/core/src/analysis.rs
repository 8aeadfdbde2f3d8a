//! Convergence studies: sup and modular error curves, empirical orders, and
//! checks of the quantitative and modular error bounds.
//!
//! Every verification adds the numerical budgets (series truncation, quadrature)
//! to the measured side, so a reported `holds = true` is conservative.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::moments::{continuous_absolute_moment, discrete_absolute_moment_default, MomentResult};
use crate::orlicz::{modular, modular_distance, OrliczFunction};
use crate::sampling::{OperatorSpec, SampleFunctional};
use crate::signals::{modulus_of_continuity, sup_error, Interval, Signal, UniformGrid};

/// Relative tolerance used for the moments entering the error constants.
pub const MOMENT_TOL: f64 = 1e-10;

/// The constant `C = M0(phi) (M~0(psi) + M~1(psi)) + M1(phi) M~0(psi)`
/// together with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantitativeConstant {
    pub value: f64,
    pub certified_error: f64,
    pub m0_phi: MomentResult,
    pub m1_phi: MomentResult,
    pub m0_psi: MomentResult,
    pub m1_psi: MomentResult,
    /// True when the psi moments are the point-mass convention (1 and 0).
    pub point_mass_convention: bool,
}

/// Continuous moments `M~0`, `M~1` of a sample functional; the point mass gets `(1, 0)`.
pub fn sample_functional_moments(psi: &SampleFunctional, tol: f64) -> Result<(MomentResult, MomentResult)> {
    match psi.as_kernel() {
        None => Ok((MomentResult::closed_form(1.0), MomentResult::closed_form(0.0))),
        Some(k) => Ok((continuous_absolute_moment(&k, 0.0, tol)?, continuous_absolute_moment(&k, 1.0, tol)?)),
    }
}

pub fn quantitative_constant(phi: &Kernel, psi: &SampleFunctional) -> Result<QuantitativeConstant> {
    let m0_phi = discrete_absolute_moment_default(phi, 0.0, MOMENT_TOL)?;
    let m1_phi = discrete_absolute_moment_default(phi, 1.0, MOMENT_TOL)?;
    if m1_phi.value <= m1_phi.certified_error {
        return Err(Error::DegenerateFit(format!(
            "first moment of '{}' is zero; no partition of unity with nontrivial support has that",
            phi.name()
        )));
    }
    let (m0_psi, m1_psi) = sample_functional_moments(psi, MOMENT_TOL)?;
    let (a, ea) = (m0_phi.value, m0_phi.certified_error);
    let (b, eb) = (m1_phi.value, m1_phi.certified_error);
    let (c, ec) = (m0_psi.value, m0_psi.certified_error);
    let (d, ed) = (m1_psi.value, m1_psi.certified_error);
    let value = a * (c + d) + b * c;
    // |xy - x'y'| <= |x| e_y + |y| e_x + e_x e_y for each product
    let certified_error = a * (ec + ed) + (c + d) * ea + ea * (ec + ed) + b * ec + c * eb + eb * ec;
    Ok(QuantitativeConstant {
        value,
        certified_error,
        m0_phi,
        m1_phi,
        m0_psi,
        m1_psi,
        point_mass_convention: matches!(psi, SampleFunctional::PointMass),
    })
}

/// Measured sup error at one scale against `C * L / w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub w: f64,
    pub sup_error: f64,
    /// Truncation plus quadrature budget attached to `sup_error`.
    pub numerical_budget: f64,
    pub bound: f64,
    /// `bound + slack - (sup_error + numerical_budget)`; nonnegative when the bound holds.
    pub margin: f64,
    pub holds: bool,
}

fn lipschitz_of(f: &Signal) -> Result<f64> {
    f.lipschitz_constant()
        .ok_or_else(|| Error::MissingMetadata(format!("signal '{}' declares no Lipschitz constant", f.name())))
}

/// Grid sup error of `S_w f` and its numerical budget.
fn measured_sup_error(spec: &OperatorSpec, f: &Signal, grid: &UniformGrid) -> Result<(f64, f64)> {
    let (lo, hi) = (grid.start, grid.last());
    let window = if hi > lo { Interval::new(lo, hi)? } else { Interval { lo, hi } };
    let rec = spec.reconstruct(f, window)?;
    let values: Vec<f64> = (0..grid.count).into_par_iter().map(|i| rec.try_value(grid.node(i))).collect::<Result<_>>()?;
    let err = sup_error(f, &values, grid)?;
    // each sample carries at most quad_tol, and the phi-weights sum to at most M0
    let budget = rec.truncation_bound() + spec.quad_tol() * spec.phi().l1_norm().max(1.0);
    Ok((err, budget))
}

/// Checks `||S_w f - f||_inf <= C * L / w + slack` for each `w`.
pub fn verify_quantitative_bound(
    spec: &OperatorSpec,
    f: &Signal,
    w_list: &[f64],
    grid: &UniformGrid,
    slack: f64,
) -> Result<Vec<BoundCheck>> {
    let lipschitz = lipschitz_of(f)?;
    let constant = quantitative_constant(spec.phi(), spec.psi())?;
    let c = constant.value + constant.certified_error;
    w_list
        .par_iter()
        .map(|&w| {
            let scaled = spec.with_scale(w)?;
            let (err, budget) = measured_sup_error(&scaled, f, grid)?;
            let bound = c * lipschitz / w;
            let margin = bound + slack - (err + budget);
            Ok(BoundCheck { w, sup_error: err, numerical_budget: budget, bound, margin, holds: margin >= 0.0 })
        })
        .collect()
}

/// One Orlicz function and scaling factor to measure the modular error with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModularProbe {
    pub eta: OrliczFunction,
    pub lambda: f64,
}

/// A modular error cell; failures are recorded as text rather than `NaN`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModularCell {
    pub eta: String,
    pub lambda: f64,
    pub value: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub w: f64,
    pub sup_error: f64,
    pub numerical_budget: f64,
    pub modular_errors: Vec<ModularCell>,
    pub quantitative_bound: Option<f64>,
}

/// Echo of everything that determined a study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyEcho {
    pub phi: String,
    pub psi: String,
    pub signal: String,
    pub w_list: Vec<f64>,
    pub grid: UniformGrid,
    pub modular_window: Interval,
    pub modular_tol: f64,
    pub series_tol: f64,
    pub quad_tol: f64,
    pub probes: Vec<ModularProbe>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// Sorted by `w`, ascending.
    pub rows: Vec<ConvergenceRow>,
    /// Empirical orders between consecutive rows; `None` where the errors are
    /// already at the numerical floor and the ratio is meaningless.
    pub eoc: Vec<Option<f64>>,
    pub config_echo: StudyEcho,
}

/// Empirical order `log(e_i / e_{i+1}) / log(w_{i+1} / w_i)` (a `log2` ratio for dyadic scales).
pub fn empirical_orders(ws: &[f64], errors: &[f64], floor: f64) -> Vec<Option<f64>> {
    ws.windows(2)
        .zip(errors.windows(2))
        .map(|(w, e)| {
            if e[0] <= floor || e[1] <= floor {
                None
            } else {
                Some((e[0] / e[1]).ln() / (w[1] / w[0]).ln())
            }
        })
        .collect()
}

/// Settings for [`convergence_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct StudySettings {
    pub w_list: Vec<f64>,
    pub grid: UniformGrid,
    pub modular_window: Interval,
    pub modular_tol: f64,
    pub probes: Vec<ModularProbe>,
}

/// Sup and modular errors of `S_w f` for each `w`, plus empirical orders.
///
/// Scales run concurrently; the report is assembled in `w` order, so it does
/// not depend on the thread count.
pub fn convergence_study(spec: &OperatorSpec, f: &Signal, settings: &StudySettings) -> Result<ConvergenceReport> {
    let ws = &settings.w_list;
    if ws.is_empty() || ws.windows(2).any(|p| !(p[0] < p[1])) {
        return Err(Error::InvalidParameter("w list must be nonempty and strictly ascending".into()));
    }
    let bound_constant = match (f.lipschitz_constant(), quantitative_constant(spec.phi(), spec.psi())) {
        (Some(l), Ok(c)) => Some((c.value + c.certified_error) * l),
        (Some(_), Err(e)) if e.is_math_precondition() => None,
        (Some(_), Err(e)) => return Err(e),
        (None, _) => None,
    };
    let rows = ws
        .par_iter()
        .map(|&w| -> Result<ConvergenceRow> {
            let scaled = spec.with_scale(w)?;
            let (sup, budget) = measured_sup_error(&scaled, f, &settings.grid)?;
            let rec = scaled.reconstruct(f, settings.modular_window)?;
            let modular_errors = settings
                .probes
                .iter()
                .map(|p| {
                    let r = modular_distance(&p.eta, &rec, f, p.lambda, settings.modular_window, settings.modular_tol);
                    match r {
                        Ok(m) => ModularCell { eta: p.eta.label(), lambda: p.lambda, value: Some(m.value), status: "ok".into() },
                        Err(e) => ModularCell { eta: p.eta.label(), lambda: p.lambda, value: None, status: e.to_string() },
                    }
                })
                .collect();
            Ok(ConvergenceRow {
                w,
                sup_error: sup,
                numerical_budget: budget,
                modular_errors,
                quantitative_bound: bound_constant.map(|c| c / w),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<f64> = rows.iter().map(|r| r.sup_error).collect();
    let floor = rows.iter().map(|r| r.numerical_budget).fold(0.0, f64::max).max(1e-13);
    let eoc = empirical_orders(ws, &errors, floor);
    Ok(ConvergenceReport {
        rows,
        eoc,
        config_echo: StudyEcho {
            phi: spec.phi().name().to_string(),
            psi: spec.psi().label(),
            signal: f.name().to_string(),
            w_list: ws.clone(),
            grid: settings.grid,
            modular_window: settings.modular_window,
            modular_tol: settings.modular_tol,
            series_tol: spec.series_tol(),
            quad_tol: spec.quad_tol(),
            probes: settings.probes.clone(),
        },
    })
}

/// Both sides of `I[lambda S_w f] <= (M0(psi) ||phi||_1 / (M0(phi) M~0(psi))) I[lambda M0(phi) M~0(psi) f]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModularInequality {
    pub w: f64,
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Quadrature budget added to `lhs` before comparing.
    pub tolerance: f64,
    pub holds: bool,
    /// Discrete `M0(psi)` used in the prefactor.
    pub m0_psi_discrete: f64,
    /// Window the right-hand side was integrated over.
    pub rhs_window: Interval,
}

/// Evaluates both sides of the modular inequality for `S_w` on `window`.
///
/// The left side only sees `S_w f` on the window, which depends on `f` within
/// the operator's reach of the window, so the right side is integrated over the
/// window widened by that reach.
#[allow(clippy::too_many_arguments)]
pub fn verify_modular_inequality(
    phi: &Kernel,
    psi: &Kernel,
    f: &Signal,
    eta: &OrliczFunction,
    lambda: f64,
    w: f64,
    window: Interval,
    tol: f64,
) -> Result<ModularInequality> {
    let m0_phi = discrete_absolute_moment_default(phi, 0.0, MOMENT_TOL)?;
    let m0_psi_discrete = discrete_absolute_moment_default(psi, 0.0, MOMENT_TOL)?;
    let m0_psi = continuous_absolute_moment(psi, 0.0, MOMENT_TOL)?;
    let functional = match *psi.family() {
        crate::kernel::KernelFamily::Window { lo, hi, weight } => SampleFunctional::window(lo, hi, weight)?,
        _ => SampleFunctional::general(psi.clone(), 0.01 * tol)?,
    };
    let spec = OperatorSpec::new(phi.clone(), functional, w, 0.01 * tol, 0.01 * tol)?;
    let reach = (phi.decay_radius(0.0, 0.01 * tol, crate::kernel::MAX_TAIL_RADIUS)?.0
        + psi.decay_radius(0.0, 0.01 * tol, crate::kernel::MAX_TAIL_RADIUS)?.0)
        / w;
    let rhs_window = window.expanded(reach);

    let rec = spec.reconstruct(f, window)?;
    let lhs = modular(eta, &rec, lambda, window, 0.25 * tol)?;
    let scale = m0_phi.value * m0_psi.value;
    let prefactor = m0_psi_discrete.value * phi.l1_norm() / scale;
    let inner = modular(eta, f, lambda * scale, rhs_window, 0.25 * tol)?;
    let rhs = prefactor * inner.value;
    let tolerance = lhs.error_estimate + prefactor * inner.error_estimate + 0.01 * tol;
    Ok(ModularInequality {
        w,
        lambda,
        lhs: lhs.value,
        rhs,
        tolerance,
        holds: lhs.value <= rhs + tolerance,
        m0_psi_discrete: m0_psi_discrete.value,
        rhs_window,
    })
}

/// Least-squares fit of `log omega(f, delta) ~ alpha log delta + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzFit {
    pub alpha: f64,
    pub intercept: f64,
}

pub fn empirical_lipschitz_order(f: &Signal, deltas: &[f64], window: Interval, resolution: usize) -> Result<LipschitzFit> {
    if deltas.len() < 2 {
        return Err(Error::InvalidParameter("need at least two delta values".into()));
    }
    let mut xs = Vec::with_capacity(deltas.len());
    let mut ys = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let omega = modulus_of_continuity(f, d, window, resolution)?.lower;
        if !(omega > 0.0) {
            return Err(Error::DegenerateFit(format!("modulus of '{}' vanishes at delta = {d}", f.name())));
        }
        xs.push(d.ln());
        ys.push(omega.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all delta values are equal".into()));
    }
    let alpha = sxy / sxx;
    Ok(LipschitzFit { alpha, intercept: my - alpha * mx })
}
