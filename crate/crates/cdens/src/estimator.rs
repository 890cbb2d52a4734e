//! Two-step closed-form estimator of conditional CDFs, PDFs, and
//! derivatives.
//!
//! Stage one regresses CDF indicators on a polynomial in the covariates
//! around the conditioning point, producing a weight vector `A` such that
//! `F̂_q(y|x) = Σ_j A_j 1(Y_j <= y)` for every `y` simultaneously. Stage two
//! smooths those fitted values in the response direction with another local
//! polynomial, producing a weight vector `b(y)` whose `μ`-th coefficient row
//! extracts the derivative of interest. The estimate is the bilinear form
//! `b(y)' v` with `v_i = F̂_q(Y_i|x)`. Weight vectors and the per-stage
//! projection operators are materialized so the covariance module can reuse
//! them.

use nalgebra::DMatrix;

use crate::basis::{self, MultiIndexSet};
use crate::error::{Error, Result};
use crate::exec;
use crate::kernels::{self, KernelFamily};
use crate::model::{DataSet, EstimationConfig, EvaluationSpec};

const MAX_GRAM_CONDITION: f64 = 1e12;

/// Solve `G z = e_idx` for a symmetric positive definite Gram matrix,
/// failing loudly when the matrix is singular or has condition number above
/// 1e12. Returns the solution and the inverse Gram.
fn gram_inverse(g: DMatrix<f64>, context: &dyn Fn() -> String) -> Result<DMatrix<f64>> {
    let dim = g.nrows();
    let eig = g.symmetric_eigen();
    let mut max_ev = f64::NEG_INFINITY;
    let mut min_ev = f64::INFINITY;
    for &ev in eig.eigenvalues.iter() {
        max_ev = max_ev.max(ev);
        min_ev = min_ev.min(ev);
    }
    if !(min_ev > 0.0) || max_ev / min_ev > MAX_GRAM_CONDITION {
        return Err(Error::insufficient(format!(
            "{} (gram condition {:.3e})",
            context(),
            if min_ev > 0.0 {
                max_ev / min_ev
            } else {
                f64::INFINITY
            }
        )));
    }
    let mut inv = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let q = eig.eigenvectors.column(k);
        let li = 1.0 / eig.eigenvalues[k];
        for i in 0..dim {
            for j in 0..dim {
                inv[(i, j)] += li * q[i] * q[j];
            }
        }
    }
    Ok(inv)
}

/// One stage's local least-squares operator, kept in a form that lets the
/// covariance module evaluate the stage's fitted values on arbitrary
/// response-indexed targets: fitted = basis * (solver' targets), where row
/// `j` of `solver` is `G^{-1} w_j q(u_j)` and rows outside the kernel window
/// are zero.
#[derive(Clone, Debug)]
pub struct StageProjector {
    dim: usize,
    basis_rows: Vec<f64>,  // n x dim, row-major
    solver_rows: Vec<f64>, // n x dim, row-major
}

impl StageProjector {
    /// Fitted values of the stage's weighted regression applied to
    /// `targets` (one value per observation).
    pub fn fitted(&self, targets: &[f64]) -> Vec<f64> {
        let n = targets.len();
        debug_assert_eq!(n * self.dim, self.basis_rows.len());
        let mut coef = vec![0.0; self.dim];
        for (j, &t) in targets.iter().enumerate() {
            if t != 0.0 {
                let row = &self.solver_rows[j * self.dim..(j + 1) * self.dim];
                for (c, &s) in coef.iter_mut().zip(row.iter()) {
                    *c += s * t;
                }
            }
        }
        let mut out = vec![0.0; n];
        for (k, slot) in out.iter_mut().enumerate() {
            let row = &self.basis_rows[k * self.dim..(k + 1) * self.dim];
            *slot = row.iter().zip(coef.iter()).map(|(b, c)| b * c).sum();
        }
        out
    }

    /// Diagonal of the stage's weighted hat matrix, `H_kk = w_k q_k' G^{-1} q_k`,
    /// the leverage of observation `k` on its own fitted value.
    pub fn hat_diagonal(&self) -> Vec<f64> {
        let n = self.basis_rows.len() / self.dim;
        (0..n)
            .map(|k| {
                let b = &self.basis_rows[k * self.dim..(k + 1) * self.dim];
                let s = &self.solver_rows[k * self.dim..(k + 1) * self.dim];
                b.iter().zip(s.iter()).map(|(bi, si)| bi * si).sum()
            })
            .collect()
    }
}

fn first_stage(
    data: &DataSet,
    x_point: &[f64],
    h: f64,
    q: usize,
    nu: &[usize],
    kernel: KernelFamily,
) -> Result<(Vec<f64>, StageProjector)> {
    let n = data.n();
    let d = data.d();
    if x_point.len() != d {
        return Err(Error::InvalidConfig(format!(
            "conditioning point has {} coordinates, data has {}",
            x_point.len(),
            d
        )));
    }
    let ms = MultiIndexSet::new(d, q);
    let dim = ms.len();
    let nu_idx = ms.unit_vector_index(nu)?;
    let nu_total: usize = nu.iter().sum();

    let mut weights = vec![0.0; n];
    let mut active: Vec<usize> = Vec::new();
    let mut u = vec![0.0; d];
    for j in 0..n {
        let row = data.x_row(j);
        for k in 0..d {
            u[k] = row[k] - x_point[k];
        }
        let w = kernels::product_kernel(kernel, &u, h)?;
        if w > 0.0 {
            weights[j] = w;
            active.push(j);
        }
    }
    if active.len() < dim + 1 {
        return Err(Error::insufficient(format!(
            "x={x_point:?}, h={h}: {} observations in window, need {}",
            active.len(),
            dim + 1
        )));
    }

    // Gram in scaled coordinates u = (X - x) / h for conditioning.
    let mut gram = DMatrix::zeros(dim, dim);
    let mut basis_rows = vec![0.0; n * dim];
    for &j in &active {
        let row = data.x_row(j);
        for k in 0..d {
            u[k] = (row[k] - x_point[k]) / h;
        }
        let qbuf = &mut basis_rows[j * dim..(j + 1) * dim];
        ms.poly_vector_into(&u, qbuf);
        let w = weights[j];
        for a in 0..dim {
            let wa = w * qbuf[a];
            for b in a..dim {
                gram[(a, b)] += wa * qbuf[b];
            }
        }
    }
    for a in 0..dim {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }

    let inv = gram_inverse(gram, &|| format!("x={x_point:?}, h={h}"))?;

    let mut solver_rows = vec![0.0; n * dim];
    let mut a_vec = vec![0.0; n];
    let scale = h.powi(-(nu_total as i32));
    for &j in &active {
        let qrow = &basis_rows[j * dim..(j + 1) * dim];
        let w = weights[j];
        let mut dot_nu = 0.0;
        for a in 0..dim {
            let mut ga = 0.0;
            for b in 0..dim {
                ga += inv[(a, b)] * qrow[b];
            }
            solver_rows[j * dim + a] = w * ga;
            if a == nu_idx {
                dot_nu = ga;
            }
        }
        a_vec[j] = scale * dot_nu * w;
    }
    Ok((
        a_vec,
        StageProjector {
            dim,
            basis_rows,
            solver_rows,
        },
    ))
}

fn second_stage(
    data: &DataSet,
    y: f64,
    h: f64,
    p: usize,
    mu: usize,
    kernel: KernelFamily,
) -> Result<(Vec<f64>, StageProjector)> {
    if h <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "bandwidth must be > 0, got {h}"
        )));
    }
    if mu > p {
        return Err(Error::InvalidConfig(format!("mu={mu} exceeds p={p}")));
    }
    let n = data.n();
    let dim = p + 1;
    let ys = data.y();

    let mut kw = vec![0.0; n];
    let mut active: Vec<usize> = Vec::new();
    for i in 0..n {
        let k = kernels::kernel_value(kernel, (ys[i] - y) / h) / h;
        if k > 0.0 {
            kw[i] = k;
            active.push(i);
        }
    }
    if active.len() < p + 2 {
        return Err(Error::insufficient(format!(
            "y={y}, h={h}: {} observations in window, need {}",
            active.len(),
            p + 2
        )));
    }

    let mut gram = DMatrix::zeros(dim, dim);
    let mut basis_rows = vec![0.0; n * dim];
    for &i in &active {
        let pbuf = &mut basis_rows[i * dim..(i + 1) * dim];
        basis::poly_vector_y_into((ys[i] - y) / h, pbuf);
        let w = kw[i];
        for a in 0..dim {
            let wa = w * pbuf[a];
            for b in a..dim {
                gram[(a, b)] += wa * pbuf[b];
            }
        }
    }
    for a in 0..dim {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }

    let inv = gram_inverse(gram, &|| format!("y={y}, h={h}"))?;

    let mut solver_rows = vec![0.0; n * dim];
    let mut b_vec = vec![0.0; n];
    let scale = h.powi(-(mu as i32));
    for &i in &active {
        let prow = &basis_rows[i * dim..(i + 1) * dim];
        let w = kw[i];
        let mut dot_mu = 0.0;
        for a in 0..dim {
            let mut ga = 0.0;
            for b in 0..dim {
                ga += inv[(a, b)] * prow[b];
            }
            solver_rows[i * dim + a] = w * ga;
            if a == mu {
                dot_mu = ga;
            }
        }
        b_vec[i] = scale * dot_mu * w;
    }
    Ok((
        b_vec,
        StageProjector {
            dim,
            basis_rows,
            solver_rows,
        },
    ))
}

/// First-stage weight vector `A` for the covariate regression at `x_point`
/// with bandwidth `h`, polynomial order `q`, extracting the `nu` covariate
/// derivative. `A_j = 0` whenever the product kernel vanishes at `X_j`.
pub fn first_stage_weights(
    data: &DataSet,
    x_point: &[f64],
    h: f64,
    q: usize,
    nu: &[usize],
    kernel: KernelFamily,
) -> Result<Vec<f64>> {
    first_stage(data, x_point, h, q, nu, kernel).map(|(a, _)| a)
}

/// Second-stage weight vector `b` for the response smoothing at `y` with
/// bandwidth `h`, polynomial order `p`, extracting the `mu`-th derivative.
pub fn second_stage_weights(
    data: &DataSet,
    y: f64,
    h: f64,
    p: usize,
    mu: usize,
    kernel: KernelFamily,
) -> Result<Vec<f64>> {
    second_stage(data, y, h, p, mu, kernel).map(|(b, _)| b)
}

/// First-stage CDF fitted at every sample response: `v_i = Σ_j A_j 1(Y_j <= Y_i)`,
/// computed by prefix sums in response order. Tied responses share one
/// cumulative value, so every tied pair includes the other.
pub fn first_stage_cdf_at_sample_points(data: &DataSet, a: &[f64]) -> Vec<f64> {
    let n = data.n();
    debug_assert_eq!(a.len(), n);
    let y = data.y();
    let order = data.y_order();
    let mut v = vec![0.0; n];
    let mut cum = 0.0;
    let mut start = 0;
    while start < n {
        let yv = y[order[start] as usize];
        let mut stop = start;
        let mut group_sum = 0.0;
        while stop < n && y[order[stop] as usize] == yv {
            group_sum += a[order[stop] as usize];
            stop += 1;
        }
        cum += group_sum;
        for &idx in &order[start..stop] {
            v[idx as usize] = cum;
        }
        start = stop;
    }
    v
}

/// Count of observations with nonzero kernel weight in both windows.
pub fn effective_n(data: &DataSet, y: f64, x_point: &[f64], h: f64, kernel: KernelFamily) -> usize {
    let d = data.d();
    let ys = data.y();
    let mut count = 0;
    'rows: for i in 0..data.n() {
        if kernels::kernel_value(kernel, (ys[i] - y) / h) <= 0.0 {
            continue;
        }
        let row = data.x_row(i);
        for k in 0..d {
            if kernels::kernel_value(kernel, (row[k] - x_point[k]) / h) <= 0.0 {
                continue 'rows;
            }
        }
        count += 1;
    }
    count
}

/// Everything the pipeline needs about one fitted grid point: the two weight
/// vectors, the first-stage CDF values, the point estimate, and the stage
/// projection operators for covariance work.
#[derive(Clone, Debug)]
pub struct PointWeights {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub v: Vec<f64>,
    pub estimate: f64,
    pub eff_n: usize,
    pub first_stage: StageProjector,
    pub second_stage: StageProjector,
}

/// Fit a single evaluation point, returning the full weight bundle.
pub fn fit_point(
    data: &DataSet,
    y: f64,
    x_point: &[f64],
    h: f64,
    config: &EstimationConfig,
) -> Result<PointWeights> {
    let (a, proj1) = first_stage(data, x_point, h, config.q, &config.nu, config.kernel)?;
    let v = first_stage_cdf_at_sample_points(data, &a);
    let (b, proj2) = second_stage(data, y, h, config.p, config.mu, config.kernel)?;
    let mut estimate: f64 = b.iter().zip(v.iter()).map(|(bi, vi)| bi * vi).sum();
    if config.nonneg && config.mu == 1 && estimate < 0.0 {
        estimate = 0.0;
    }
    Ok(PointWeights {
        a,
        b,
        v,
        estimate,
        eff_n: effective_n(data, y, x_point, h, config.kernel),
        first_stage: proj1,
        second_stage: proj2,
    })
}

/// Point estimate of the `(mu, nu)` derivative of the conditional CDF at
/// `(y, x_point)` with bandwidth `h`.
pub fn estimate_point(
    data: &DataSet,
    y: f64,
    x_point: &[f64],
    h: f64,
    config: &EstimationConfig,
) -> Result<f64> {
    let a = first_stage_weights(data, x_point, h, config.q, &config.nu, config.kernel)?;
    let v = first_stage_cdf_at_sample_points(data, &a);
    let b = second_stage_weights(data, y, h, config.p, config.mu, config.kernel)?;
    Ok(b.iter().zip(v.iter()).map(|(bi, vi)| bi * vi).sum())
}

/// Materialized weights for a fitted grid; `None` marks failed points.
#[derive(Clone, Debug)]
pub struct WeightSet {
    pub points: Vec<Option<PointWeights>>,
}

impl WeightSet {
    pub fn ok(&self) -> Vec<bool> {
        self.points.iter().map(|p| p.is_some()).collect()
    }
}

/// Point estimates plus the reusable weight tables behind them.
#[derive(Clone, Debug)]
pub struct GridFit {
    /// Estimates per grid point; NaN where a point failed.
    pub estimates: Vec<f64>,
    pub eff_n: Vec<usize>,
    pub weights: WeightSet,
    /// Failure messages for points that could not be estimated.
    pub point_errors: Vec<Option<String>>,
}

impl GridFit {
    pub fn all_failed(&self) -> bool {
        self.weights.points.iter().all(|p| p.is_none())
    }

    pub fn ok(&self) -> Vec<bool> {
        self.weights.ok()
    }
}

/// Fit the estimator over the whole grid. Individual grid points that lack
/// local data are reported as failed (NaN estimate plus a message) rather
/// than aborting the fit. Grid points are evaluated in parallel.
pub fn estimate_grid(
    data: &DataSet,
    spec: &EvaluationSpec,
    config: &EstimationConfig,
) -> Result<GridFit> {
    config.validate(data.d())?;
    if config.normalize {
        return Err(Error::NotImplemented(
            "normalize: rescaling density estimates is reserved".into(),
        ));
    }
    if spec.x_point.len() != data.d() {
        return Err(Error::InvalidConfig(format!(
            "conditioning point has {} coordinates, data has {}",
            spec.x_point.len(),
            data.d()
        )));
    }
    let m = spec.len();

    let results: Vec<(Result<PointWeights>, usize)> = exec::map_indexed(m, |g| {
        let y = spec.y_grid[g];
        let h = spec.bandwidths[g];
        let eff = effective_n(data, y, &spec.x_point, h, config.kernel);
        (fit_point(data, y, &spec.x_point, h, config), eff)
    });

    let mut fit = GridFit {
        estimates: vec![f64::NAN; m],
        eff_n: vec![0; m],
        weights: WeightSet {
            points: Vec::with_capacity(m),
        },
        point_errors: vec![None; m],
    };
    for (g, (point, eff)) in results.into_iter().enumerate() {
        fit.eff_n[g] = eff;
        match point {
            Ok(pw) => {
                fit.estimates[g] = pw.estimate;
                fit.weights.points.push(Some(pw));
            }
            Err(e) => {
                fit.point_errors[g] = Some(e.to_string());
                fit.weights.points.push(None);
            }
        }
    }
    Ok(fit)
}

/// Full per-grid-point results: point estimates, standard and robust
/// bias-corrected uncertainty, and uniform bands. Failed points carry NaN in
/// every numeric field and `false` in the corresponding `ok` mask.
#[derive(Clone, Debug)]
pub struct CdeFit {
    pub spec: EvaluationSpec,
    pub config: EstimationConfig,
    pub estimates: Vec<f64>,
    pub se: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub rbc_estimates: Vec<f64>,
    pub rbc_se: Vec<f64>,
    pub rbc_ci_lower: Vec<f64>,
    pub rbc_ci_upper: Vec<f64>,
    pub band_lower: Vec<f64>,
    pub band_upper: Vec<f64>,
    pub rbc_band_lower: Vec<f64>,
    pub rbc_band_upper: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub rbc_covariance: DMatrix<f64>,
    pub band_critical: f64,
    pub rbc_band_critical: f64,
    pub eff_n: Vec<usize>,
    pub ok: Vec<bool>,
    pub rbc_ok: Vec<bool>,
    pub warnings: Vec<String>,
}

impl CdeFit {
    pub fn len(&self) -> usize {
        self.spec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.is_empty()
    }

    pub fn all_failed(&self) -> bool {
        self.ok.iter().all(|&ok| !ok)
    }

    pub fn covariance_rows(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.covariance)
    }

    pub fn rbc_covariance_rows(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.rbc_covariance)
    }
}

fn matrix_rows(mat: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..mat.nrows())
        .map(|i| (0..mat.ncols()).map(|j| mat[(i, j)]).collect())
        .collect()
}
