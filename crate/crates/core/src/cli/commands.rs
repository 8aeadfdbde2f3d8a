use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, OutputFormat, Resolved};
use crate::analysis::{
    convergence_study, quantitative_constant, sample_functional_moments, verify_modular_inequality,
    verify_quantitative_bound, BoundCheck, ConvergenceReport, ModularProbe, QuantitativeConstant, StudySettings,
    MOMENT_TOL,
};
use crate::error::{Error, Result};
use crate::kernel::{partition_of_unity_residual, unit_probes, SupportDescriptor};
use crate::moments::{continuous_algebraic_moment, discrete_absolute_moment_default, MomentResult};
use crate::orlicz::luxemburg_norm;
use crate::signals::UniformGrid;

/// Slack added to the quantitative bound before a scale counts as a violation.
pub const BOUND_SLACK: f64 = 1e-8;

const POU_PROBES: usize = 1000;

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

struct Sink<'a> {
    dir: &'a Path,
    format: OutputFormat,
    written: Vec<PathBuf>,
}

impl<'a> Sink<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        let dir = cfg.output.dir.as_path();
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Sink { dir, format: cfg.output.format, written: Vec::new() })
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        if self.format == OutputFormat::Json {
            return Ok(());
        }
        let path = self.dir.join(name);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
        let mut write = || -> std::result::Result<(), csv::Error> {
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
            Ok(())
        };
        write().map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    /// JSON reports are always written when JSON is requested; with CSV-only
    /// output the config echo is still written so every run is reproducible.
    fn json<T: Serialize>(&mut self, name: &str, value: &T, cfg: &ExperimentConfig) -> Result<()> {
        let (path, text) = if self.format == OutputFormat::Csv {
            let echo_name = name.replace(".json", "_config.json");
            (self.dir.join(echo_name), serde_json::to_string_pretty(cfg))
        } else {
            (self.dir.join(name), serde_json::to_string_pretty(value))
        };
        let text = text.map_err(|e| Error::Io(format!("serialization failed: {e}")))?;
        fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("cannot write {}: {e}", path.display()))
}

/// Output-file name fragment for a scale.
pub fn w_tag(w: f64) -> String {
    format!("{w}")
}

#[derive(Debug, Serialize)]
struct MomentRow {
    quantity: &'static str,
    value: Option<f64>,
    certified_error: Option<f64>,
    method: String,
    status: String,
}

impl MomentRow {
    fn from(quantity: &'static str, r: Result<MomentResult>, first_failure: &mut Option<Error>) -> Self {
        match r {
            Ok(m) => MomentRow {
                quantity,
                value: Some(m.value),
                certified_error: Some(m.certified_error),
                method: m.method.as_str().into(),
                status: "ok".into(),
            },
            Err(e) => {
                let status = e.to_string();
                if e.is_math_precondition() && first_failure.is_none() {
                    *first_failure = Some(e);
                }
                MomentRow { quantity, value: None, certified_error: None, method: String::new(), status }
            }
        }
    }

    fn convention(quantity: &'static str, value: f64) -> Self {
        MomentRow {
            quantity,
            value: Some(value),
            certified_error: Some(0.0),
            method: "point_mass_convention".into(),
            status: "ok".into(),
        }
    }
}

#[derive(Debug, Serialize)]
struct PouRow {
    probes: usize,
    truncation_radius: u64,
    residual: Option<f64>,
    status: String,
}

#[derive(Debug, Serialize)]
struct FourierRow {
    k: i32,
    value: Option<f64>,
    residual: Option<f64>,
    status: String,
}

#[derive(Debug, Serialize)]
struct KernelCheckReport<'a> {
    config: &'a ExperimentConfig,
    phi: String,
    phi_l1_norm: f64,
    psi: String,
    partition_of_unity: PouRow,
    fourier: Vec<FourierRow>,
    moments: Vec<MomentRow>,
    warnings: Vec<String>,
}

/// Partition-of-unity residual, Fourier residuals at `2 k pi` and the moment
/// table. The report is written in full before a divergent moment is reported.
pub fn kernel_check(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let r = cfg.resolve()?;
    let radius = match r.phi.support() {
        SupportDescriptor::Compact { lo, hi } => lo.abs().max(hi.abs()).ceil() as u64 + 1,
        SupportDescriptor::Decaying { .. } => cfg.truncation_radius,
    };
    let pou = match partition_of_unity_residual(&r.phi, &unit_probes(POU_PROBES), radius) {
        Ok(v) => PouRow { probes: POU_PROBES, truncation_radius: radius, residual: Some(v), status: "ok".into() },
        Err(e) => PouRow { probes: POU_PROBES, truncation_radius: radius, residual: None, status: e.to_string() },
    };
    let fourier = (-3..=3)
        .map(|k| {
            let target = if k == 0 { 1.0 } else { 0.0 };
            match r.phi.fourier_hat(2.0 * std::f64::consts::PI * f64::from(k)) {
                Ok(v) => FourierRow { k, value: Some(v), residual: Some((v - target).abs()), status: "ok".into() },
                Err(e) => FourierRow { k, value: None, residual: None, status: e.to_string() },
            }
        })
        .collect();

    let mut failure = None;
    let mut moments = vec![
        MomentRow::from("M0(phi)", discrete_absolute_moment_default(&r.phi, 0.0, MOMENT_TOL), &mut failure),
        MomentRow::from("M1(phi)", discrete_absolute_moment_default(&r.phi, 1.0, MOMENT_TOL), &mut failure),
    ];
    match r.psi.as_kernel() {
        None => {
            moments.push(MomentRow::convention("M~0(psi)", 1.0));
            moments.push(MomentRow::convention("M~1(psi)", 0.0));
            moments.push(MomentRow::convention("m~1(psi)", 0.0));
        }
        Some(k) => {
            let abs = |order| crate::moments::continuous_absolute_moment(&k, order, MOMENT_TOL);
            moments.push(MomentRow::from("M~0(psi)", abs(0.0), &mut failure));
            moments.push(MomentRow::from("M~1(psi)", abs(1.0), &mut failure));
            moments.push(MomentRow::from("m~1(psi)", continuous_algebraic_moment(&k, 1, MOMENT_TOL), &mut failure));
        }
    }

    let report = KernelCheckReport {
        config: cfg,
        phi: r.phi.name().to_string(),
        phi_l1_norm: r.phi.l1_norm(),
        psi: r.psi.label(),
        partition_of_unity: pou,
        fourier,
        moments,
        warnings: r.spec.warnings(),
    };

    let mut sink = Sink::new(cfg)?;
    let mut rows = vec![vec![
        "partition_of_unity".to_string(),
        format!("residual(K={})", report.partition_of_unity.truncation_radius),
        fmt_opt(report.partition_of_unity.residual),
        String::new(),
        report.partition_of_unity.status.clone(),
    ]];
    for f in &report.fourier {
        rows.push(vec![
            "fourier".into(),
            format!("residual(k={})", f.k),
            fmt_opt(f.residual),
            String::new(),
            f.status.clone(),
        ]);
    }
    for m in &report.moments {
        rows.push(vec![
            "moment".into(),
            m.quantity.to_string(),
            fmt_opt(m.value),
            fmt_opt(m.certified_error),
            m.status.clone(),
        ]);
    }
    sink.csv("kernel_check.csv", &["section", "quantity", "value", "certified_error", "status"], &rows)?;
    sink.json("kernel_check.json", &report, cfg)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(sink.written),
    }
}

#[derive(Debug, Serialize)]
struct ReconstructFile {
    w: f64,
    file: String,
    rows: usize,
    truncation_bound: f64,
}

#[derive(Debug, Serialize)]
struct ReconstructReport<'a> {
    config: &'a ExperimentConfig,
    special_case: crate::sampling::SpecialCase,
    files: Vec<ReconstructFile>,
    warnings: Vec<String>,
}

/// One CSV of `(x, f(x), S_w f(x))` per scale, on the configured grid or at a single point.
pub fn reconstruct(cfg: &ExperimentConfig, at: Option<f64>) -> Result<Vec<PathBuf>> {
    let r = cfg.resolve()?;
    let grid = match at {
        Some(x) if x.is_finite() => UniformGrid::new(x, 1.0, 1)?,
        Some(x) => return Err(Error::InvalidParameter(format!("evaluation point must be finite, got {x}"))),
        None => r.grid,
    };
    let mut sink = Sink::new(cfg)?;
    let mut files = Vec::new();
    for &w in &cfg.w_list {
        let spec = r.spec.with_scale(w)?;
        let values = spec.evaluate_grid(&r.signal, &grid)?;
        let truncation_bound = spec.evaluate_detailed(&r.signal, grid.start)?.truncation_bound;
        let rows: Vec<Vec<String>> = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let x = grid.node(i);
                vec![fmt_f64(x), fmt_f64(r.signal.evaluate(x)), fmt_f64(*v)]
            })
            .collect();
        let name = format!("reconstruct_w{}.csv", w_tag(w));
        sink.csv(&name, &["x", "f", "s_w_f"], &rows)?;
        files.push(ReconstructFile { w, file: name, rows: rows.len(), truncation_bound });
    }
    let report = ReconstructReport { config: cfg, special_case: r.spec.special_case(), files, warnings: r.spec.warnings() };
    sink.json("reconstruct.json", &report, cfg)?;
    Ok(sink.written)
}

#[derive(Debug, Serialize)]
struct ConvergeReport<'a> {
    config: &'a ExperimentConfig,
    study: ConvergenceReport,
    quantitative_constant: Option<QuantitativeConstant>,
    bound_checks: Option<Vec<BoundCheck>>,
    status: String,
}

fn probes(r: &Resolved) -> Vec<ModularProbe> {
    r.orlicz.iter().map(|e| ModularProbe { eta: e.eta, lambda: e.lambda }).collect()
}

/// Convergence table with empirical orders and, for Lipschitz signals, the
/// quantitative bound per scale.
pub fn converge(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let r = cfg.resolve()?;
    let settings = StudySettings {
        w_list: cfg.w_list.clone(),
        grid: r.grid,
        modular_window: r.modular_window,
        modular_tol: cfg.tolerances.modular_tol,
        probes: probes(&r),
    };
    let study = convergence_study(&r.spec, &r.signal, &settings)?;
    let mut failure = None;
    let (constant, checks) = if r.signal.lipschitz_constant().is_some() {
        match quantitative_constant(&r.phi, &r.psi) {
            Ok(c) => (Some(c), Some(verify_quantitative_bound(&r.spec, &r.signal, &cfg.w_list, &r.grid, BOUND_SLACK)?)),
            Err(e) if e.is_math_precondition() => {
                failure = Some(e);
                (None, None)
            }
            Err(e) => return Err(e),
        }
    } else {
        (None, None)
    };

    let mut header: Vec<String> =
        ["w", "sup_error", "numerical_budget", "eoc", "quantitative_bound", "bound_margin"].map(String::from).into();
    for p in &settings.probes {
        header.push(format!("modular[{};lambda={}]", p.eta.label(), p.lambda));
    }
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let eoc = if i == 0 { String::new() } else { study.eoc[i - 1].map(fmt_f64).unwrap_or_else(|| "undefined".into()) };
            let margin = checks.as_ref().map(|c| c[i].margin);
            let mut cells = vec![
                fmt_f64(row.w),
                fmt_f64(row.sup_error),
                fmt_f64(row.numerical_budget),
                eoc,
                fmt_opt(row.quantitative_bound),
                fmt_opt(margin),
            ];
            for cell in &row.modular_errors {
                cells.push(match cell.value {
                    Some(v) => fmt_f64(v),
                    None if cell.status.starts_with("modular overflow") => "overflow".into(),
                    None => "failed".into(),
                });
            }
            cells
        })
        .collect();
    let status = failure.as_ref().map_or_else(|| "ok".to_string(), |e| e.to_string());
    let report = ConvergeReport { config: cfg, study, quantitative_constant: constant, bound_checks: checks, status };
    let mut sink = Sink::new(cfg)?;
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    sink.csv("converge.csv", &header_refs, &rows)?;
    sink.json("converge.json", &report, cfg)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(sink.written),
    }
}

#[derive(Debug, Serialize)]
struct OrliczRow {
    eta: String,
    lambda: f64,
    w: f64,
    lhs: Option<f64>,
    rhs: Option<f64>,
    holds: Option<bool>,
    luxemburg_f: Option<f64>,
    luxemburg_s_w_f: Option<f64>,
    status: String,
}

#[derive(Debug, Serialize)]
struct OrliczReport<'a> {
    config: &'a ExperimentConfig,
    m0_psi_continuous: Option<f64>,
    rows: Vec<OrliczRow>,
}

/// Both sides of the modular inequality and Luxemburg norms for every
/// configured Orlicz function, lambda and scale.
pub fn orlicz(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let r = cfg.resolve()?;
    let psi = r
        .psi
        .as_kernel()
        .ok_or_else(|| Error::Unsupported("the modular inequality needs psi to be a function, not a point mass".into()))?;
    if r.orlicz.is_empty() {
        return Err(Error::InvalidParameter("the orlicz command needs at least one entry in 'orlicz'".into()));
    }
    let tol = cfg.tolerances.modular_tol;
    let mut failure = None;
    let mut rows = Vec::new();
    for entry in &r.orlicz {
        let norm_f = luxemburg_norm(&entry.eta, &r.signal, r.modular_window, tol);
        for &w in &cfg.w_list {
            let ineq = verify_modular_inequality(&r.phi, &psi, &r.signal, &entry.eta, entry.lambda, w, r.modular_window, tol);
            let spec = r.spec.with_scale(w)?;
            let norm_s = spec
                .reconstruct(&r.signal, r.modular_window)
                .and_then(|rec| luxemburg_norm(&entry.eta, &rec, r.modular_window, tol));
            let mut notes = Vec::new();
            for e in [ineq.as_ref().err(), norm_f.as_ref().err(), norm_s.as_ref().err()].into_iter().flatten() {
                if matches!(e, Error::DivergentMoment { .. }) && failure.is_none() {
                    failure = Some(e.clone());
                }
                notes.push(e.to_string());
            }
            let ineq = ineq.ok();
            rows.push(OrliczRow {
                eta: entry.eta.label(),
                lambda: entry.lambda,
                w,
                lhs: ineq.map(|m| m.lhs),
                rhs: ineq.map(|m| m.rhs),
                holds: ineq.map(|m| m.holds),
                luxemburg_f: norm_f.as_ref().ok().copied(),
                luxemburg_s_w_f: norm_s.ok(),
                status: if notes.is_empty() { "ok".into() } else { notes.join("; ") },
            });
        }
    }
    let m0_psi_continuous = sample_functional_moments(&r.psi, MOMENT_TOL).ok().map(|(m0, _)| m0.value);
    let report = OrliczReport { config: cfg, m0_psi_continuous, rows };
    let csv_rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|row| {
            vec![
                row.eta.clone(),
                fmt_f64(row.lambda),
                fmt_f64(row.w),
                fmt_opt(row.lhs),
                fmt_opt(row.rhs),
                row.holds.map_or_else(String::new, |h| h.to_string()),
                fmt_opt(row.luxemburg_f),
                fmt_opt(row.luxemburg_s_w_f),
                if row.status == "ok" { "ok".into() } else if row.status.contains("modular overflow") { "overflow".into() } else { "failed".into() },
            ]
        })
        .collect();
    let mut sink = Sink::new(cfg)?;
    sink.csv(
        "orlicz.csv",
        &["eta", "lambda", "w", "lhs", "rhs", "holds", "luxemburg_f", "luxemburg_s_w_f", "status"],
        &csv_rows,
    )?;
    sink.json("orlicz.json", &report, cfg)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(sink.written),
    }
}
