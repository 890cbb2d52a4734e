//! Rule-of-thumb MSE- and IMSE-optimal bandwidth selection.
//!
//! The selector estimates the leading bias and variance constants of the
//! estimator and minimizes the resulting approximate MSE
//!
//! `M(h) = V / (n h^{d+2μ+1}) + (h^{q+1} B_{q+1} + h^{p+1-μ} B_{p+1})^2`
//!
//! numerically. The derivative functionals inside the bias constants are
//! evaluated on a Gaussian reference model fitted to the data (intercept,
//! slopes, residual scale), the classic rule-of-thumb device: direct
//! nonparametric estimates of third and higher derivatives are noise at
//! rule-of-thumb sample sizes and collapse the selector. The kernel moment
//! factors multiplying those functionals are integrals over the effective
//! kernel window, truncated at the empirical support, which is what keeps
//! the rule usable at and near boundaries. The variance constant inverts
//! the variance rate at the normal-reference pilot bandwidth using the
//! covariance module's estimate there.

use serde::{Deserialize, Serialize};

use crate::basis::MultiIndexSet;
use crate::covariance;
use crate::error::{Error, Result};
use crate::estimator;
use crate::exec;
use crate::kernels::{self, KernelFamily};
use crate::model::{DataSet, EstimationConfig};

/// Plug-in estimates of the bias and variance constants at one evaluation
/// point.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MomentEstimates {
    /// First-stage (covariate) bias constant, multiplying `h^{q+1}`.
    pub bias_q1: f64,
    /// Second-stage (response) bias constant, multiplying `h^{p+1-mu}`.
    pub bias_p1: f64,
    /// Variance constant `V` in `V / (n h^{d+2mu+1})`.
    pub variance_const: f64,
    /// Pilot bandwidth the constants were estimated at (after any growth).
    pub pilot_h: f64,
    /// Curvature floor paired with `bias_q1` (see the objective).
    pub bias_q1_floor: f64,
    /// Curvature floor paired with `bias_p1`.
    pub bias_p1_floor: f64,
}

/// How bandwidths were chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BandwidthRule {
    MseRot,
    ImseRot,
    Fixed(f64),
}

impl BandwidthRule {
    pub fn label(&self) -> String {
        match self {
            BandwidthRule::MseRot => "mse-rot".into(),
            BandwidthRule::ImseRot => "imse-rot".into(),
            BandwidthRule::Fixed(h) => format!("fixed ({h:.4})"),
        }
    }
}

/// Selected bandwidths over a grid, with the moment estimates behind them.
#[derive(Clone, Debug)]
pub struct BandwidthSelection {
    pub grid: Vec<f64>,
    pub bandwidths: Vec<f64>,
    pub eff_n: Vec<usize>,
    pub rule: BandwidthRule,
    pub moments: Vec<MomentEstimates>,
    pub warnings: Vec<String>,
}

/// Normal-reference pilot: `1.06 σ̂ n^{-1/(d+4)}` with `σ̂` the geometric
/// mean of the column standard deviations.
pub fn pilot_bandwidth(data: &DataSet) -> Result<f64> {
    let n = data.n();
    if n < 10 {
        return Err(Error::InvalidData(format!(
            "need at least 10 observations for pilot bandwidth, got {n}"
        )));
    }
    let d = data.d();
    let sd = |values: &mut dyn Iterator<Item = f64>| -> f64 {
        let vals: Vec<f64> = values.collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let ss: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (vals.len() - 1) as f64).sqrt()
    };
    let mut log_sum = 0.0;
    let sy = sd(&mut data.y().iter().cloned());
    if sy <= 0.0 {
        return Err(Error::InvalidData("response has zero variance".into()));
    }
    log_sum += sy.ln();
    for k in 0..d {
        let sx = sd(&mut (0..n).map(|i| data.x_row(i)[k]));
        if sx <= 0.0 {
            return Err(Error::InvalidData(format!(
                "covariate {k} has zero variance"
            )));
        }
        log_sum += sx.ln();
    }
    let pooled = (log_sum / (d + 1) as f64).exp();
    Ok(1.06 * pooled * (n as f64).powf(-1.0 / (d as f64 + 4.0)))
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

fn multi_factorial(idx: &[usize]) -> f64 {
    idx.iter().map(|&k| factorial(k)).product()
}

/// Solve the small SPD system `S z = c` for the moment constants.
fn solve_small(s: nalgebra::DMatrix<f64>, c: &[f64]) -> Result<Vec<f64>> {
    let dim = s.nrows();
    let eig = s.symmetric_eigen();
    let mut max_ev = f64::NEG_INFINITY;
    let mut min_ev = f64::INFINITY;
    for &ev in eig.eigenvalues.iter() {
        max_ev = max_ev.max(ev);
        min_ev = min_ev.min(ev);
    }
    if !(min_ev > 0.0) || max_ev / min_ev > 1e12 {
        return Err(Error::Numerical(
            "kernel moment matrix is singular on the truncated window".into(),
        ));
    }
    let mut z = vec![0.0; dim];
    for k in 0..dim {
        let q = eig.eigenvectors.column(k);
        let proj: f64 = (0..dim).map(|i| q[i] * c[i]).sum();
        let coef = proj / eig.eigenvalues[k];
        for i in 0..dim {
            z[i] += coef * q[i];
        }
    }
    Ok(z)
}

/// `e_mu' S^{-1} c` for the response stage of order `p` on a truncated
/// window: the multiplier of `f^{(p+1)}` in the leading bias.
fn response_bias_constant(
    p: usize,
    mu: usize,
    window: (f64, f64),
    kernel: KernelFamily,
) -> Result<f64> {
    let dim = p + 1;
    let moment = |j: usize| kernels::kernel_moment(kernel, j, window.0, window.1);
    let mut s = nalgebra::DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in 0..dim {
            s[(a, b)] = moment(a + b) / (factorial(a) * factorial(b));
        }
    }
    let c: Vec<f64> = (0..dim)
        .map(|a| moment(a + p + 1) / (factorial(a) * factorial(p + 1)))
        .collect();
    Ok(solve_small(s, &c)?[mu])
}

/// `e_nu' S^{-1} c_kappa` for the covariate stage of order `q` on truncated
/// per-dimension windows: the multiplier of the `kappa` covariate derivative
/// in the leading first-stage bias.
fn covariate_bias_constant(
    ms: &MultiIndexSet,
    nu: &[usize],
    kappa: &[usize],
    windows: &[(f64, f64)],
    kernel: KernelFamily,
) -> Result<f64> {
    let dim = ms.len();
    let d = ms.d();
    let max_pow = 2 * ms.order() + ms.order() + 2;
    // per-dimension moment tables
    let mut tables: Vec<Vec<f64>> = Vec::with_capacity(d);
    for win in windows.iter().take(d) {
        tables.push(
            (0..=max_pow)
                .map(|j| kernels::kernel_moment(kernel, j, win.0, win.1))
                .collect(),
        );
    }
    let idx = ms.unit_vector_index(nu)?;
    let indices = ms.indices();
    let mut s = nalgebra::DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in 0..dim {
            let mut val = 1.0;
            for k in 0..d {
                val *= tables[k][indices[a][k] + indices[b][k]];
            }
            s[(a, b)] = val / (multi_factorial(&indices[a]) * multi_factorial(&indices[b]));
        }
    }
    let mut c = vec![0.0; dim];
    for a in 0..dim {
        let mut val = 1.0;
        for k in 0..d {
            val *= tables[k][indices[a][k] + kappa[k]];
        }
        c[a] = val / (multi_factorial(&indices[a]) * multi_factorial(kappa));
    }
    Ok(solve_small(s, &c)?[idx])
}

fn y_window(data: &DataSet, y: f64, h: f64) -> (f64, f64) {
    let (lo, hi) = data.y_bounds();
    (((lo - y) / h).max(-1.0), ((hi - y) / h).min(1.0))
}

fn x_windows(data: &DataSet, x_point: &[f64], h: f64) -> Vec<(f64, f64)> {
    data.x_bounds()
        .iter()
        .zip(x_point.iter())
        .map(|(&(lo, hi), &x)| (((lo - x) / h).max(-1.0), ((hi - x) / h).min(1.0)))
        .collect()
}

/// Gaussian reference model `Y | X = x ~ N(alpha + beta' x, sigma^2)` fitted
/// by least squares; the source of the derivative functionals in the
/// rule-of-thumb bias constants.
#[derive(Clone, Debug)]
pub struct ReferenceModel {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub sigma: f64,
}

/// Fit the reference model. Errors when a covariate or the residuals are
/// degenerate.
pub fn reference_model(data: &DataSet) -> Result<ReferenceModel> {
    let n = data.n();
    let d = data.d();
    let dim = d + 1;
    let mut gram = nalgebra::DMatrix::zeros(dim, dim);
    let mut rhs = vec![0.0; dim];
    for i in 0..n {
        let row = data.x_row(i);
        let mut z = vec![1.0; dim];
        z[1..].copy_from_slice(row);
        for a in 0..dim {
            rhs[a] += z[a] * data.y()[i];
            for b in a..dim {
                gram[(a, b)] += z[a] * z[b];
            }
        }
    }
    for a in 0..dim {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let coef = solve_small(gram, &rhs)
        .map_err(|_| Error::InvalidData("degenerate covariates in reference fit".into()))?;
    let mut rss = 0.0;
    for i in 0..n {
        let row = data.x_row(i);
        let mut fit = coef[0];
        for k in 0..d {
            fit += coef[k + 1] * row[k];
        }
        let r = data.y()[i] - fit;
        rss += r * r;
    }
    let dof = n.saturating_sub(dim).max(1);
    let sigma = (rss / dof as f64).sqrt();
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidData(
            "reference residual scale is degenerate".into(),
        ));
    }
    Ok(ReferenceModel {
        alpha: coef[0],
        beta: coef[1..].to_vec(),
        sigma,
    })
}

/// `d^j/dt^j` of the standard normal density via the Hermite recursion
/// `phi^(j)(t) = (-1)^j He_j(t) phi(t)`.
fn normal_pdf_derivative(j: usize, t: f64) -> f64 {
    let mut he_prev = 1.0;
    let mut he = t;
    if j == 0 {
        return crate::dist::normal_pdf(t);
    }
    for k in 1..j {
        let next = t * he - k as f64 * he_prev;
        he_prev = he;
        he = next;
    }
    let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * he * crate::dist::normal_pdf(t)
}

// Curvature functionals are floored at this fraction of their distributional
// root mean square. Near zeros of the reference derivative the pointwise
// plug-in sends the selected bandwidth to the ceiling, which destabilizes
// per-point selection; the floor bounds that without touching evaluation
// points where the curvature is informative.
const CURVATURE_FLOOR_FRACTION: f64 = 0.25;

/// `sqrt(E[phi^(j)(T)^2])` under `T ~ N(0,1)`, by panel Gauss-Legendre
/// quadrature on [-6, 6].
fn normal_pdf_derivative_rms(j: usize) -> f64 {
    let panels = 12;
    let mut acc = 0.0;
    for p in 0..panels {
        let a = -6.0 + 12.0 * p as f64 / panels as f64;
        let b = a + 12.0 / panels as f64;
        acc += kernels::gl16(a, b, &|t: f64| {
            let d = normal_pdf_derivative(j, t);
            d * d * crate::dist::normal_pdf(t)
        });
    }
    acc.sqrt()
}

impl ReferenceModel {
    /// Mixed derivative `d^mu_y d^kappa_x F(y|x)` of the reference
    /// conditional CDF `Phi((y - alpha - beta'x) / sigma)`; the total order
    /// `mu + |kappa|` must be at least one.
    pub fn mixed_derivative(&self, mu: usize, kappa: &[usize], y: f64, x_point: &[f64]) -> f64 {
        let total: usize = mu + kappa.iter().sum::<usize>();
        debug_assert!(total >= 1);
        let mut mean = self.alpha;
        for (b, xv) in self.beta.iter().zip(x_point.iter()) {
            mean += b * xv;
        }
        let t = (y - mean) / self.sigma;
        let mut coef = 1.0;
        for (k, &kk) in kappa.iter().enumerate() {
            coef *= (-self.beta[k]).powi(kk as i32);
        }
        coef * normal_pdf_derivative(total - 1, t) / self.sigma.powi(total as i32)
    }

    /// Scale of the `(mu, kappa)` derivative functional: the coefficient
    /// magnitude times the distributional RMS of the density-derivative
    /// factor. Zero exactly when the functional is structurally zero.
    fn derivative_scale(&self, mu: usize, kappa: &[usize]) -> f64 {
        let total: usize = mu + kappa.iter().sum::<usize>();
        debug_assert!(total >= 1);
        let mut coef = 1.0;
        for (k, &kk) in kappa.iter().enumerate() {
            coef *= self.beta[k].abs().powi(kk as i32);
        }
        coef * normal_pdf_derivative_rms(total - 1) / self.sigma.powi(total as i32)
    }
}

fn try_moments(
    data: &DataSet,
    y: f64,
    x_point: &[f64],
    config: &EstimationConfig,
    reference: &ReferenceModel,
    pilot_h: f64,
) -> Result<MomentEstimates> {
    let d = data.d();
    let n = data.n();
    let kernel = config.kernel;

    // response-stage curvature: kernel constant on the truncated window
    // times the reference (p+1)-th response derivative
    let m_y = response_bias_constant(config.p, config.mu, y_window(data, y, pilot_h), kernel)?;
    let zero_kappa = vec![0usize; d];
    let bias_p1 = m_y * reference.mixed_derivative(config.p + 1, &zero_kappa, y, x_point);
    let bias_p1_floor = CURVATURE_FLOOR_FRACTION
        * m_y.abs()
        * reference.derivative_scale(config.p + 1, &zero_kappa);

    // covariate-stage curvature: one term per degree-(q+1) multi-index
    let ms = MultiIndexSet::new(d, config.q);
    let ms_high = MultiIndexSet::new(d, config.q + 1);
    let windows = x_windows(data, x_point, pilot_h);
    let mut bias_q1 = 0.0;
    let mut bias_q1_floor_sq = 0.0;
    for kappa in ms_high.indices() {
        if kappa.iter().sum::<usize>() != config.q + 1 {
            continue;
        }
        let m_k = covariate_bias_constant(&ms, &config.nu, kappa, &windows, kernel)?;
        bias_q1 += m_k * reference.mixed_derivative(config.mu, kappa, y, x_point);
        let fl = m_k * reference.derivative_scale(config.mu, kappa);
        bias_q1_floor_sq += fl * fl;
    }
    let bias_q1_floor = CURVATURE_FLOOR_FRACTION * bias_q1_floor_sq.sqrt();

    // variance constant: invert the variance rate at the pilot bandwidth,
    // with the variance estimated by the covariance module
    let base = estimator::fit_point(data, y, x_point, pilot_h, config)?;
    let weights = estimator::WeightSet {
        points: vec![Some(base)],
    };
    let cov = covariance::grid_covariance(data, &weights)?;
    let var_pilot = cov.matrix[(0, 0)];
    if !(var_pilot > 0.0) {
        // disjoint pilot windows leave the projection identically zero;
        // treat like any other too-small window so the caller can grow it
        return Err(Error::insufficient(format!(
            "y={y}, x={x_point:?}, h={pilot_h}: degenerate variance at pilot bandwidth"
        )));
    }
    let exponent = (d + 2 * config.mu + 1) as i32;
    let variance_const = n as f64 * pilot_h.powi(exponent) * var_pilot;
    Ok(MomentEstimates {
        bias_q1,
        bias_p1,
        variance_const,
        pilot_h,
        bias_q1_floor,
        bias_p1_floor,
    })
}

/// Estimate the bias and variance constants at `(y, x_point)`, growing the
/// pilot bandwidth by 1.5 up to five times when the pilot window is too
/// small.
pub fn estimate_moments(
    data: &DataSet,
    y: f64,
    x_point: &[f64],
    config: &EstimationConfig,
    pilot_h: f64,
) -> Result<MomentEstimates> {
    let reference = reference_model(data)?;
    estimate_moments_with_reference(data, y, x_point, config, &reference, pilot_h)
}

fn estimate_moments_with_reference(
    data: &DataSet,
    y: f64,
    x_point: &[f64],
    config: &EstimationConfig,
    reference: &ReferenceModel,
    pilot_h: f64,
) -> Result<MomentEstimates> {
    let mut h = pilot_h;
    for attempt in 0..6 {
        match try_moments(data, y, x_point, config, reference, h) {
            Ok(m) => return Ok(m),
            Err(Error::InsufficientLocalData { context }) => {
                if attempt == 5 {
                    return Err(Error::insufficient(format!(
                        "{context} (after growing the pilot bandwidth 5 times)"
                    )));
                }
                h *= 1.5;
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

/// Admissible bandwidth range at one evaluation point: the floor is the
/// smallest bandwidth putting `min_count` observations in both windows, the
/// ceiling is the largest column range of the data.
pub fn feasible_range(
    data: &DataSet,
    y: f64,
    x_point: &[f64],
    min_count: usize,
) -> Result<(f64, f64)> {
    let n = data.n();
    if n < min_count {
        return Err(Error::insufficient(format!(
            "y={y}, x={x_point:?}: sample size {n} below required {min_count}"
        )));
    }
    let d = data.d();
    let mut radii: Vec<f64> = (0..n)
        .map(|i| {
            let mut r = (data.y()[i] - y).abs();
            let row = data.x_row(i);
            for k in 0..d {
                r = r.max((row[k] - x_point[k]).abs());
            }
            r
        })
        .collect();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let floor = radii[min_count - 1] * (1.0 + 1e-9) + 1e-12;
    let ceil = data.max_range().max(floor * 2.0);
    Ok((floor, ceil))
}

fn mse_objective(
    m: &MomentEstimates,
    n: usize,
    d: usize,
    mu: usize,
    p: usize,
    q: usize,
) -> impl Fn(f64) -> f64 + '_ {
    let var_exp = (d + 2 * mu + 1) as i32;
    let bias_exp_q = (q + 1) as i32;
    let bias_exp_p = (p + 1 - mu) as i32;
    let nf = n as f64;
    move |h: f64| {
        let bias = h.powi(bias_exp_q) * m.bias_q1 + h.powi(bias_exp_p) * m.bias_p1;
        // the floor terms keep the squared-bias penalty bounded away from
        // zero where the reference curvature crosses zero, so the selected
        // bandwidth varies smoothly with the data there
        let floor_q = h.powi(bias_exp_q) * m.bias_q1_floor;
        let floor_p = h.powi(bias_exp_p) * m.bias_p1_floor;
        m.variance_const / (nf * h.powi(var_exp))
            + bias * bias
            + floor_q * floor_q
            + floor_p * floor_p
    }
}

const BRACKET_POINTS: usize = 50;

/// Minimize a smooth objective over `[lo, hi]`: bracket on a 50-point log
/// grid, refine by golden-section search in log space, and compare the
/// refined point against both endpoints.
fn minimize_over_range<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    if !(lo > 0.0) || !(hi > lo) {
        return Err(Error::Numerical(format!(
            "invalid bandwidth range [{lo}, {hi}]"
        )));
    }
    let ratio = hi / lo;
    let grid: Vec<f64> = (0..BRACKET_POINTS)
        .map(|i| lo * ratio.powf(i as f64 / (BRACKET_POINTS - 1) as f64))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, &h) in grid.iter().enumerate() {
        let val = f(h);
        if val.is_finite() && best.is_none_or(|(_, bv)| val < bv) {
            best = Some((i, val));
        }
    }
    let (bi, _) = best.ok_or_else(|| {
        Error::Numerical("bandwidth objective non-finite over the whole range".into())
    })?;
    let a = grid[bi.saturating_sub(1)].ln();
    let b = grid[(bi + 1).min(BRACKET_POINTS - 1)].ln();
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a, b);
    let mut c = b - phi * (b - a);
    let mut dpt = a + phi * (b - a);
    let mut fc = f(c.exp());
    let mut fd = f(dpt.exp());
    for _ in 0..100 {
        if fc <= fd {
            b = dpt;
            dpt = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c.exp());
        } else {
            a = c;
            c = dpt;
            fc = fd;
            dpt = a + phi * (b - a);
            fd = f(dpt.exp());
        }
    }
    let refined = ((a + b) * 0.5).exp();
    let mut best_h = refined;
    let mut best_v = f(refined);
    for cand in [lo, hi] {
        let v = f(cand);
        if v.is_finite() && v < best_v {
            best_v = v;
            best_h = cand;
        }
    }
    Ok(best_h)
}

/// Pointwise MSE-optimal bandwidth from plug-in moment estimates over an
/// admissible range.
pub fn select_mse_bandwidth(
    moments: &MomentEstimates,
    n: usize,
    d: usize,
    mu: usize,
    p: usize,
    q: usize,
    range: (f64, f64),
) -> Result<f64> {
    minimize_over_range(mse_objective(moments, n, d, mu, p, q), range.0, range.1)
}

/// IMSE-optimal single bandwidth: minimizes the equal-weight average of the
/// per-point MSE objectives over the grid.
pub fn select_imse_bandwidth(
    data: &DataSet,
    grid: &[f64],
    x_point: &[f64],
    config: &EstimationConfig,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty bandwidth grid".into()));
    }
    config.validate(data.d())?;
    let pilot = pilot_bandwidth(data)?;
    let reference = reference_model(data)?;
    let min_count = config.min_eff_n(data.d());
    let moments: Vec<MomentEstimates> = grid
        .iter()
        .map(|&y| estimate_moments_with_reference(data, y, x_point, config, &reference, pilot))
        .collect::<Result<Vec<_>>>()?;
    let mut floor: f64 = 0.0;
    let mut ceil = f64::INFINITY;
    for &y in grid {
        let (lo, hi) = feasible_range(data, y, x_point, min_count)?;
        floor = floor.max(lo);
        ceil = ceil.min(hi);
    }
    let objectives: Vec<_> = moments
        .iter()
        .map(|m| mse_objective(m, data.n(), data.d(), config.mu, config.p, config.q))
        .collect();
    let avg = |h: f64| objectives.iter().map(|f| f(h)).sum::<f64>() / objectives.len() as f64;
    minimize_over_range(avg, floor, ceil)
}

fn even_case_warnings(config: &EstimationConfig) -> Vec<String> {
    let mut warnings = Vec::new();
    if (config.p - config.mu).is_multiple_of(2) {
        warnings.push(format!(
            "p - mu = {} is even; the MSE expansion holds for odd gaps, rate optimality not guaranteed",
            config.p - config.mu
        ));
    }
    if (config.q - config.nu_total()).is_multiple_of(2) {
        warnings.push(format!(
            "q - |nu| = {} is even; the MSE expansion holds for odd gaps, rate optimality not guaranteed",
            config.q - config.nu_total()
        ));
    }
    warnings
}

/// Select bandwidths over an evaluation grid under the given rule.
pub fn select(
    data: &DataSet,
    grid: &[f64],
    x_point: &[f64],
    config: &EstimationConfig,
    rule: BandwidthRule,
) -> Result<BandwidthSelection> {
    config.validate(data.d())?;
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty evaluation grid".into()));
    }
    let m = grid.len();
    let (bandwidths, moments, warnings) = match rule {
        BandwidthRule::Fixed(h) => {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "fixed bandwidth must be positive, got {h}"
                )));
            }
            (vec![h; m], Vec::new(), Vec::new())
        }
        BandwidthRule::MseRot => {
            let pilot = pilot_bandwidth(data)?;
            let reference = reference_model(data)?;
            let min_count = config.min_eff_n(data.d());
            let per_point: Vec<Result<(f64, MomentEstimates)>> = exec::map_indexed(m, |g| {
                let y = grid[g];
                let moments =
                    estimate_moments_with_reference(data, y, x_point, config, &reference, pilot)?;
                let range = feasible_range(data, y, x_point, min_count)?;
                let h = select_mse_bandwidth(
                    &moments,
                    data.n(),
                    data.d(),
                    config.mu,
                    config.p,
                    config.q,
                    range,
                )?;
                Ok((h, moments))
            });
            let mut hs = Vec::with_capacity(m);
            let mut ms = Vec::with_capacity(m);
            for r in per_point {
                let (h, mm) = r?;
                hs.push(h);
                ms.push(mm);
            }
            (hs, ms, even_case_warnings(config))
        }
        BandwidthRule::ImseRot => {
            let h = select_imse_bandwidth(data, grid, x_point, config)?;
            let pilot = pilot_bandwidth(data)?;
            let reference = reference_model(data)?;
            let moments: Vec<MomentEstimates> = grid
                .iter()
                .map(|&y| {
                    estimate_moments_with_reference(data, y, x_point, config, &reference, pilot)
                })
                .collect::<Result<Vec<_>>>()?;
            (vec![h; m], moments, even_case_warnings(config))
        }
    };
    let eff_n: Vec<usize> = (0..m)
        .map(|g| estimator::effective_n(data, grid[g], x_point, bandwidths[g], config.kernel))
        .collect();
    Ok(BandwidthSelection {
        grid: grid.to_vec(),
        bandwidths,
        eff_n,
        rule,
        moments,
        warnings,
    })
}
