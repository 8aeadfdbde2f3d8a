//! Durrmeyer sampling series
//!
//! ```text
//! (S_w f)(x) = sum_k phi(wx - k) * w * int psi(wu - k) f(u) du
//! ```
//!
//! with the point-evaluation (generalized sampling) and unit-window
//! (Kantorovich) special cases. The inner factor is the *generalized sample*
//! `c_k`; after the substitution `t = wu - k` it reads `int psi(t) f((t + k)/w) dt`.
//!
//! Compactly supported `phi` only ever touches finitely many `k`. For decaying
//! `phi` the series is truncated symmetrically around `floor(wx)` at the smallest
//! radius whose certified tail is within `series_tol`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{self, partition_of_unity_residual, unit_probes, Kernel, SupportDescriptor, MAX_TAIL_RADIUS};
use crate::moments::lattice_radius;
use crate::quadrature::{integrate, QuadOptions};
use crate::signals::{Interval, RealFn, Signal, UniformGrid};

/// Partition-of-unity residual a kernel must meet to be used as `phi`.
pub const POU_THRESHOLD: f64 = 1e-3;

/// The `psi` side of the operator.
#[derive(Debug, Clone)]
pub enum SampleFunctional {
    /// Dirac mass at the origin: `c_k = f(k / w)`.
    PointMass,
    /// `weight * chi_[lo, hi)`.
    Window { lo: f64, hi: f64, weight: f64 },
    General { kernel: Kernel, quad_tol: f64 },
}

impl SampleFunctional {
    pub fn window(lo: f64, hi: f64, weight: f64) -> Result<Self> {
        // reuse the kernel constructor's validation
        kernel::window(lo, hi, weight)?;
        Ok(SampleFunctional::Window { lo, hi, weight })
    }

    pub fn general(kernel: Kernel, quad_tol: f64) -> Result<Self> {
        if !(quad_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("quadrature tolerance must be positive, got {quad_tol}")));
        }
        if !kernel.l1_norm().is_finite() {
            return Err(Error::InvalidParameter(format!("kernel '{}' has no finite L1 norm", kernel.name())));
        }
        Ok(SampleFunctional::General { kernel, quad_tol })
    }

    /// Signed total mass (`1` for the point mass).
    pub fn mass(&self) -> f64 {
        match self {
            SampleFunctional::PointMass => 1.0,
            SampleFunctional::Window { lo, hi, weight } => weight * (hi - lo),
            SampleFunctional::General { kernel, .. } => kernel.mass(),
        }
    }

    pub fn l1_norm(&self) -> f64 {
        match self {
            SampleFunctional::PointMass => 1.0,
            SampleFunctional::Window { lo, hi, weight } => weight * (hi - lo),
            SampleFunctional::General { kernel, .. } => kernel.l1_norm(),
        }
    }

    /// The functional as a kernel, when it is a function.
    pub fn as_kernel(&self) -> Option<Kernel> {
        match self {
            SampleFunctional::PointMass => None,
            SampleFunctional::Window { lo, hi, weight } => kernel::window(*lo, *hi, *weight).ok(),
            SampleFunctional::General { kernel, .. } => Some(kernel.clone()),
        }
    }

    /// Range of `t` the functional reads, if bounded.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            SampleFunctional::PointMass => Some((0.0, 0.0)),
            SampleFunctional::Window { lo, hi, .. } => Some((*lo, *hi)),
            SampleFunctional::General { kernel, .. } => match kernel.support() {
                SupportDescriptor::Compact { lo, hi } => Some((lo, hi)),
                SupportDescriptor::Decaying { .. } => None,
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            SampleFunctional::PointMass => "pointmass".into(),
            SampleFunctional::Window { lo, hi, weight } => format!("window[{lo},{hi})x{weight}"),
            SampleFunctional::General { kernel, .. } => format!("general({})", kernel.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialCase {
    /// `G_w f = sum_k f(k/w) phi(wx - k)`.
    Generalized,
    /// `K_w f = sum_k phi(wx - k) w int_{k/w}^{(k+1)/w} f`.
    Kantorovich,
    GeneralDurrmeyer,
}

/// A fully configured operator `S_w^{phi, psi}`.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    phi: Kernel,
    psi: SampleFunctional,
    w: f64,
    series_tol: f64,
    quad_tol: f64,
}

/// How the series over `k` is cut for one signal.
#[derive(Debug, Clone, Copy, PartialEq)]
enum SeriesPlan {
    Compact { lo: f64, hi: f64 },
    Decaying { radius: u64, tail_bound: f64, centered: bool, certified: bool },
}

/// A point value with its truncation budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// Certified bound on the neglected series tail (0 for compact `phi`).
    pub truncation_bound: f64,
    /// False when the bound rests on an estimated, not declared, sup norm.
    pub certified: bool,
}

impl OperatorSpec {
    pub fn new(phi: Kernel, psi: SampleFunctional, w: f64, series_tol: f64, quad_tol: f64) -> Result<Self> {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::InvalidParameter(format!("scale w must be positive, got {w}")));
        }
        if !(series_tol > 0.0) || !(quad_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerances must be positive, got series_tol={series_tol}, quad_tol={quad_tol}"
            )));
        }
        let (radius, _) = lattice_radius(&phi, 0.0, 0.25 * POU_THRESHOLD)?;
        let residual = partition_of_unity_residual(&phi, &unit_probes(64), radius.max(2))?;
        if residual > POU_THRESHOLD {
            return Err(Error::InvalidParameter(format!(
                "kernel '{}' is not a partition of unity (residual {residual:e})",
                phi.name()
            )));
        }
        Ok(OperatorSpec { phi, psi, w, series_tol, quad_tol })
    }

    pub fn with_scale(&self, w: f64) -> Result<Self> {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::InvalidParameter(format!("scale w must be positive, got {w}")));
        }
        Ok(OperatorSpec { w, ..self.clone() })
    }

    pub fn phi(&self) -> &Kernel {
        &self.phi
    }

    pub fn psi(&self) -> &SampleFunctional {
        &self.psi
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn series_tol(&self) -> f64 {
        self.series_tol
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    /// Non-fatal problems with the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if (self.psi.mass() - 1.0).abs() > 1e-9 {
            out.push(format!("psi mass is {} rather than 1; convergence is not expected", self.psi.mass()));
        }
        out
    }

    pub fn special_case(&self) -> SpecialCase {
        reduce_special_case(self)
    }

    /// `c_k = w int psi(wu - k) f(u) du`.
    pub fn generalized_sample(&self, f: &Signal, k: i64) -> Result<f64> {
        let w = self.w;
        let kf = k as f64;
        match &self.psi {
            SampleFunctional::PointMass => Ok(f.evaluate(kf / w)),
            SampleFunctional::Window { lo, hi, weight } => {
                let cuts = mapped_breakpoints(f, w, kf, *lo, *hi);
                let r = integrate(|t| f.evaluate((t + kf) / w), *lo, *hi, &cuts, QuadOptions::new(self.quad_tol / weight))?;
                Ok(weight * r.value)
            }
            SampleFunctional::General { kernel, quad_tol } => {
                let tol = quad_tol.min(self.quad_tol);
                match kernel.support() {
                    SupportDescriptor::Compact { lo, hi } => {
                        let mut cuts = mapped_breakpoints(f, w, kf, lo, hi);
                        cuts.extend(kernel.breakpoints());
                        let r = integrate(|t| kernel.evaluate(t) * f.evaluate((t + kf) / w), lo, hi, &cuts, QuadOptions::new(tol))?;
                        Ok(r.value)
                    }
                    SupportDescriptor::Decaying { .. } => {
                        // center on f(k/w) so constants are reproduced exactly by the known mass
                        let center = f.evaluate(kf / w);
                        let osc = sample_oscillation(f);
                        let tail_tol = if osc == 0.0 { f64::INFINITY } else { 0.5 * tol / osc };
                        let (radius, _) = kernel.decay_radius(0.0, tail_tol, MAX_TAIL_RADIUS)?;
                        let mut cuts = mapped_breakpoints(f, w, kf, -radius, radius);
                        let n = radius as i64;
                        cuts.extend((-n..=n).map(|i| i as f64));
                        let r = integrate(
                            |t| kernel.evaluate(t) * (f.evaluate((t + kf) / w) - center),
                            -radius,
                            radius,
                            &cuts,
                            QuadOptions::new(0.5 * tol),
                        )?;
                        Ok(center * kernel.mass() + r.value)
                    }
                }
            }
        }
    }

    fn plan(&self, f: &Signal) -> Result<SeriesPlan> {
        match self.phi.support() {
            SupportDescriptor::Compact { lo, hi } => Ok(SeriesPlan::Compact { lo, hi }),
            SupportDescriptor::Decaying { exponent, coefficient, radius: envelope_radius } => {
                let centered = self.phi.exact_partition_of_unity();
                let (sup, certified) = match f.sup_norm() {
                    Some(s) => (s, true),
                    None => (estimated_sup(f), false),
                };
                let sample_sup = self.psi.l1_norm() * sup;
                let scale = if centered {
                    if f.lipschitz_constant() == Some(0.0) {
                        0.0
                    } else {
                        2.0 * sample_sup
                    }
                } else {
                    sample_sup
                };
                let min_radius = (envelope_radius.ceil() as u64).max(2);
                if scale == 0.0 {
                    return Ok(SeriesPlan::Decaying { radius: min_radius, tail_bound: 0.0, centered, certified });
                }
                let tol = self.series_tol / scale;
                let (radius, _) = lattice_radius(&self.phi, 0.0, tol)?;
                let radius = radius.max(min_radius);
                let tail_bound = scale * SupportDescriptor::lattice_tail_bound(coefficient, exponent, radius);
                Ok(SeriesPlan::Decaying { radius, tail_bound, centered, certified })
            }
        }
    }

    /// Range of `k` whose terms can be nonzero for `x` in `[lo, hi]`.
    fn index_range(&self, plan: &SeriesPlan, lo: f64, hi: f64) -> (i64, i64) {
        match *plan {
            SeriesPlan::Compact { lo: plo, hi: phi_hi } => {
                (((self.w * lo) - phi_hi).ceil() as i64, ((self.w * hi) - plo).floor() as i64)
            }
            SeriesPlan::Decaying { radius, .. } => {
                let r = radius as i64;
                ((self.w * lo).floor() as i64 - r, (self.w * hi).floor() as i64 + r)
            }
        }
    }

    fn series_at(&self, plan: &SeriesPlan, x: f64, sample: &mut dyn FnMut(i64) -> Result<f64>) -> Result<f64> {
        let wx = self.w * x;
        let (first, last) = self.index_range(plan, x, x);
        match *plan {
            SeriesPlan::Compact { .. } => {
                let mut acc = 0.0;
                for k in first..=last {
                    let weight = self.phi.evaluate(wx - k as f64);
                    if weight != 0.0 {
                        acc += weight * sample(k)?;
                    }
                }
                Ok(acc)
            }
            SeriesPlan::Decaying { centered: true, .. } => {
                let anchor = sample(wx.floor() as i64)?;
                let mut acc = 0.0;
                for k in first..=last {
                    let c = sample(k)?;
                    if c != anchor {
                        acc += self.phi.evaluate(wx - k as f64) * (c - anchor);
                    }
                }
                Ok(anchor + acc)
            }
            SeriesPlan::Decaying { centered: false, .. } => {
                let mut acc = 0.0;
                for k in first..=last {
                    acc += self.phi.evaluate(wx - k as f64) * sample(k)?;
                }
                Ok(acc)
            }
        }
    }

    pub fn evaluate_detailed(&self, f: &Signal, x: f64) -> Result<Evaluation> {
        if !x.is_finite() {
            return Err(Error::InvalidParameter(format!("evaluation point must be finite, got {x}")));
        }
        let plan = self.plan(f)?;
        let value = self.series_at(&plan, x, &mut |k| self.generalized_sample(f, k))?;
        let (truncation_bound, certified) = match plan {
            SeriesPlan::Compact { .. } => (0.0, true),
            SeriesPlan::Decaying { tail_bound, certified, .. } => (tail_bound, certified),
        };
        Ok(Evaluation { value, truncation_bound, certified })
    }

    /// `(S_w f)(x)`.
    pub fn evaluate(&self, f: &Signal, x: f64) -> Result<f64> {
        Ok(self.evaluate_detailed(f, x)?.value)
    }

    /// Precomputes every sample needed on `window`, in parallel.
    pub fn reconstruct<'a>(&'a self, f: &'a Signal, window: Interval) -> Result<Reconstruction<'a>> {
        let plan = self.plan(f)?;
        let (first, last) = self.index_range(&plan, window.lo, window.hi);
        let count = (last - first + 1).max(0) as u64;
        if count > 50_000_000 {
            return Err(Error::TruncationBudget { needed: count, budget: 50_000_000 });
        }
        let samples = (first..=last)
            .into_par_iter()
            .map(|k| self.generalized_sample(f, k))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Reconstruction { spec: self, signal: f, plan, window, first, samples })
    }

    /// `S_w f` at every grid node, each sample computed once.
    pub fn evaluate_grid(&self, f: &Signal, grid: &UniformGrid) -> Result<Vec<f64>> {
        let (lo, hi) = (grid.start, grid.last());
        let window = if hi > lo { Interval::new(lo, hi)? } else { Interval { lo, hi } };
        let rec = self.reconstruct(f, window)?;
        (0..grid.count).into_par_iter().map(|i| rec.try_value(grid.node(i))).collect()
    }
}

/// Which classical operator `spec` reduces to.
pub fn reduce_special_case(spec: &OperatorSpec) -> SpecialCase {
    match spec.psi {
        SampleFunctional::PointMass => SpecialCase::Generalized,
        SampleFunctional::Window { lo, hi, weight } if lo == 0.0 && hi == 1.0 && weight == 1.0 => {
            SpecialCase::Kantorovich
        }
        _ => SpecialCase::GeneralDurrmeyer,
    }
}

/// Breakpoints of `f` mapped to the `t` variable of sample `k`, inside `[lo, hi]`.
fn mapped_breakpoints(f: &Signal, w: f64, k: f64, lo: f64, hi: f64) -> Vec<f64> {
    f.breakpoints().iter().map(|&b| w * b - k).filter(|&t| t > lo && t < hi).collect()
}

fn sample_oscillation(f: &Signal) -> f64 {
    f.oscillation_bound().unwrap_or_else(|| 2.0 * estimated_sup(f))
}

/// Grid estimate of `sup |f|` for signals without a declared sup norm.
fn estimated_sup(f: &Signal) -> f64 {
    (0..=4096)
        .map(|i| f.evaluate(-64.0 + i as f64 * (128.0 / 4096.0)).abs())
        .fold(0.0, f64::max)
}

/// `S_w f` with all samples for a window precomputed.
pub struct Reconstruction<'a> {
    spec: &'a OperatorSpec,
    signal: &'a Signal,
    plan: SeriesPlan,
    window: Interval,
    first: i64,
    samples: Vec<f64>,
}

impl Reconstruction<'_> {
    pub fn window(&self) -> Interval {
        self.window
    }

    pub fn sample_range(&self) -> (i64, i64) {
        (self.first, self.first + self.samples.len() as i64 - 1)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Tail budget of the truncated series (0 for compact `phi`).
    pub fn truncation_bound(&self) -> f64 {
        match self.plan {
            SeriesPlan::Compact { .. } => 0.0,
            SeriesPlan::Decaying { tail_bound, .. } => tail_bound,
        }
    }

    pub fn try_value(&self, x: f64) -> Result<f64> {
        let last = self.first + self.samples.len() as i64 - 1;
        self.spec.series_at(&self.plan, x, &mut |k| {
            if k >= self.first && k <= last {
                Ok(self.samples[(k - self.first) as usize])
            } else {
                self.spec.generalized_sample(self.signal, k)
            }
        })
    }
}

impl RealFn for Reconstruction<'_> {
    fn value(&self, x: f64) -> f64 {
        self.try_value(x).unwrap_or(f64::NAN)
    }

    fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        if !self.spec.phi.is_compact() {
            return Vec::new();
        }
        let w = self.spec.w;
        let knots = self.spec.phi.breakpoints();
        let k_lo = (w * lo).floor() as i64 - 1 - knots.iter().fold(0.0_f64, |m, b| m.max(b.abs())).ceil() as i64;
        let k_hi = (w * hi).ceil() as i64 + 1 + knots.iter().fold(0.0_f64, |m, b| m.max(b.abs())).ceil() as i64;
        let mut out: Vec<f64> = (k_lo..=k_hi)
            .flat_map(|k| knots.iter().map(move |&b| (k as f64 + b) / w))
            .filter(|&x| x >= lo && x <= hi)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}
