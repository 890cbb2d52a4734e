//! Summary tables in the package's printed layout, plus JSON and CSV with
//! full precision.

use serde::{Deserialize, Serialize};

use cdens::CdeFit;

fn opt(v: f64) -> Option<f64> {
    if v.is_finite() {
        Some(v)
    } else {
        None
    }
}

/// One table row; optional fields are null for failed grid points.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OutputRow {
    pub index: usize,
    pub grid: f64,
    pub bw: f64,
    pub eff_n: usize,
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub rbc_estimate: Option<f64>,
    pub rbc_se: Option<f64>,
    pub rbc_ci_lower: Option<f64>,
    pub rbc_ci_upper: Option<f64>,
    pub band_lower: Option<f64>,
    pub band_upper: Option<f64>,
    pub rbc_band_lower: Option<f64>,
    pub rbc_band_upper: Option<f64>,
}

/// Echo of the configuration behind a fit.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConfigEcho {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub mu: usize,
    pub nu: Vec<usize>,
    pub kernel: String,
    pub bandwidth_method: String,
    pub alpha: f64,
    pub band_sims: usize,
    pub seed: u64,
    pub x_point: Vec<f64>,
}

/// Everything a fit prints or serializes.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OutputBundle {
    pub config: ConfigEcho,
    pub rows: Vec<OutputRow>,
    pub band_critical: f64,
    pub rbc_band_critical: f64,
    pub covariance: Vec<Vec<f64>>,
    pub rbc_covariance: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl OutputBundle {
    pub fn from_fit(fit: &CdeFit, n: usize, bandwidth_method: &str, seed: u64) -> Self {
        let m = fit.len();
        let rows = (0..m)
            .map(|g| OutputRow {
                index: g + 1,
                grid: fit.spec.y_grid[g],
                bw: fit.spec.bandwidths[g],
                eff_n: fit.eff_n[g],
                estimate: opt(fit.estimates[g]),
                se: opt(fit.se[g]),
                ci_lower: opt(fit.ci_lower[g]),
                ci_upper: opt(fit.ci_upper[g]),
                rbc_estimate: opt(fit.rbc_estimates[g]),
                rbc_se: opt(fit.rbc_se[g]),
                rbc_ci_lower: opt(fit.rbc_ci_lower[g]),
                rbc_ci_upper: opt(fit.rbc_ci_upper[g]),
                band_lower: opt(fit.band_lower[g]),
                band_upper: opt(fit.band_upper[g]),
                rbc_band_lower: opt(fit.rbc_band_lower[g]),
                rbc_band_upper: opt(fit.rbc_band_upper[g]),
            })
            .collect();
        OutputBundle {
            config: ConfigEcho {
                n,
                p: fit.config.p,
                q: fit.config.q,
                mu: fit.config.mu,
                nu: fit.config.nu.clone(),
                kernel: fit.config.kernel.name().to_string(),
                bandwidth_method: bandwidth_method.to_string(),
                alpha: fit.config.alpha,
                band_sims: fit.config.band_sims,
                seed,
                x_point: fit.spec.x_point.clone(),
            },
            rows,
            band_critical: fit.band_critical,
            rbc_band_critical: fit.rbc_band_critical,
            covariance: fit.covariance_rows(),
            rbc_covariance: fit.rbc_covariance_rows(),
            warnings: fit.warnings.clone(),
        }
    }
}

fn fmt_cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "NA".to_string(),
    }
}

fn metadata_block(call: &str, cfg: &ConfigEcho) -> String {
    let nu = cfg
        .nu
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let mut s = String::new();
    s.push_str(&format!("Call: {call}\n\n"));
    s.push_str(&format!("{:<53} {}\n", "Sample size", cfg.n));
    s.push_str(&format!(
        "{:<53} {}\n",
        "Polynomial order for Y point estimation      (p=)", cfg.p
    ));
    s.push_str(&format!(
        "{:<53} {}\n",
        "Polynomial order for X point estimation      (q=)", cfg.q
    ));
    s.push_str(&format!(
        "{:<53} {}\n",
        "Density function estimated                   (mu=)", cfg.mu
    ));
    s.push_str(&format!(
        "{:<53} {}\n",
        "Order of derivative estimated for covariates (nu=)", nu
    ));
    s.push_str(&format!("{:<53} {}\n", "Kernel function", cfg.kernel));
    s.push_str(&format!(
        "{:<53} {}\n",
        "Bandwidth method", cfg.bandwidth_method
    ));
    s
}

/// Human summary: metadata block, then the estimate table with a rule after
/// the first half of the rows.
pub fn estimate_table(bundle: &OutputBundle) -> String {
    let cfg = &bundle.config;
    let mut s = metadata_block("cdens estimate", cfg);
    s.push('\n');
    let level = ((1.0 - cfg.alpha) * 100.0).round() as u32;
    let rule = "=".repeat(77);
    let dash = "-".repeat(77);
    s.push_str(&rule);
    s.push('\n');
    s.push_str(&format!(
        "{:<6}{:>9}{:>10}{:>8}{:>10}{:>10}   {:^22}\n",
        "", "", "", "", "Point", "Std.", "Robust B.C."
    ));
    s.push_str(&format!(
        "{:<6}{:>9}{:>10}{:>8}{:>10}{:>10}   {:^22}\n",
        "Index",
        "Grid",
        "B.W.",
        "Eff.n",
        "Est.",
        "Error",
        format!("[ {level}% C.I. ]")
    ));
    s.push_str(&rule);
    s.push('\n');
    let m = bundle.rows.len();
    let half = m.div_ceil(2);
    for (i, row) in bundle.rows.iter().enumerate() {
        s.push_str(&format!(
            "{:<6}{:>9}{:>10}{:>8}{:>10}{:>10}   {:>9} , {:>9}\n",
            row.index,
            format!("{:.4}", row.grid),
            format!("{:.4}", row.bw),
            row.eff_n,
            fmt_cell(row.estimate),
            fmt_cell(row.se),
            fmt_cell(row.rbc_ci_lower),
            fmt_cell(row.rbc_ci_upper),
        ));
        if i + 1 == half && i + 1 < m {
            s.push_str(&dash);
            s.push('\n');
        }
    }
    s.push_str(&rule);
    s.push('\n');
    if !bundle.warnings.is_empty() {
        s.push_str("Warnings:\n");
        for w in &bundle.warnings {
            s.push_str(&format!("  - {w}\n"));
        }
    }
    s
}

/// Bandwidth-selection summary table.
pub fn bandwidth_table(
    cfg: &ConfigEcho,
    grid: &[f64],
    bandwidths: &[f64],
    eff_n: &[usize],
    warnings: &[String],
) -> String {
    let mut s = metadata_block("cdens bandwidth", cfg);
    s.push('\n');
    let rule = "=".repeat(34);
    let dash = "-".repeat(34);
    s.push_str(&rule);
    s.push('\n');
    s.push_str(&format!(
        "{:<6}{:>10}{:>10}{:>8}\n",
        "Index", "y_grid", "B.W.", "Eff.n"
    ));
    s.push_str(&rule);
    s.push('\n');
    let m = grid.len();
    let half = m.div_ceil(2);
    for g in 0..m {
        s.push_str(&format!(
            "{:<6}{:>10}{:>10}{:>8}\n",
            g + 1,
            format!("{:.4}", grid[g]),
            format!("{:.4}", bandwidths[g]),
            eff_n[g]
        ));
        if g + 1 == half && g + 1 < m {
            s.push_str(&dash);
            s.push('\n');
        }
    }
    s.push_str(&rule);
    s.push('\n');
    if !warnings.is_empty() {
        s.push_str("Warnings:\n");
        for w in warnings {
            s.push_str(&format!("  - {w}\n"));
        }
    }
    s
}

/// Full-precision CSV of the fit rows.
pub fn estimate_csv(bundle: &OutputBundle) -> String {
    let mut s = String::from(
        "index,grid,bw,eff_n,estimate,se,ci_lower,ci_upper,rbc_estimate,rbc_se,\
         rbc_ci_lower,rbc_ci_upper,band_lower,band_upper,rbc_band_lower,rbc_band_upper\n",
    );
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &bundle.rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.index,
            r.grid,
            r.bw,
            r.eff_n,
            cell(r.estimate),
            cell(r.se),
            cell(r.ci_lower),
            cell(r.ci_upper),
            cell(r.rbc_estimate),
            cell(r.rbc_se),
            cell(r.rbc_ci_lower),
            cell(r.rbc_ci_upper),
            cell(r.band_lower),
            cell(r.band_upper),
            cell(r.rbc_band_lower),
            cell(r.rbc_band_upper),
        ));
    }
    s
}

/// Full-precision CSV of a bandwidth selection.
pub fn bandwidth_csv(grid: &[f64], bandwidths: &[f64], eff_n: &[usize]) -> String {
    let mut s = String::from("index,y_grid,bw,eff_n\n");
    for g in 0..grid.len() {
        s.push_str(&format!(
            "{},{},{},{}\n",
            g + 1,
            grid[g],
            bandwidths[g],
            eff_n[g]
        ));
    }
    s
}

/// CSV of a coverage report, two rows (standard and bias-corrected) per cell.
pub fn coverage_csv(report: &cdens::CoverageReport) -> String {
    let mut s = String::from(
        "mu,x,bw_multiplier,estimator,mean_rot_bw,mean_abs_bias,mean_se,\
         pointwise_coverage,uniform_coverage,mean_pointwise_width,mean_uniform_width,\
         reps_used,reps_failed\n",
    );
    for cell in &report.cells {
        for (label, est) in [("WBC", &cell.wbc), ("RBC", &cell.rbc)] {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                cell.mu,
                cell.x_point,
                cell.bw_multiplier,
                label,
                est.mean_rot_bw,
                est.mean_abs_bias,
                est.mean_se,
                est.pointwise_coverage,
                est.uniform_coverage,
                est.mean_pointwise_width,
                est.mean_uniform_width,
                cell.reps_used,
                cell.reps_failed,
            ));
        }
    }
    s
}
