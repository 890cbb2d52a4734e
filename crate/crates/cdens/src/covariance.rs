//! Variance-covariance estimation across grid points.
//!
//! At grid point `g` the estimator is the double sum
//! `θ̂_g = Σ_i Σ_j b_{g,i} A_j 1(Y_j <= Y_i)`, a V-statistic in the data.
//! Its first-order (Hoeffding) projection assigns each observation a
//! contribution through both of its roles, with each role residualized
//! against the corresponding stage's local fit because the stage weights are
//! re-estimated from the same data:
//!
//! `ψ_k(g) = b_{g,k} (v_k - v̂_k) + A_k (S_k(g) - Ŝ_k(g))`,
//!
//! where `S_k(g) = Σ_i b_{g,i} 1(Y_k <= Y_i)` is the second-stage weight
//! mass at or above `Y_k`, `v̂` is the second stage's fitted value of the
//! `v` regression, and `Ŝ` is the first stage's fitted value of the `S`
//! regression. Without the residualization the projection counts variation
//! that the fitted weights cancel (both stages reproduce constants), which
//! overstates the variance severely; the residualized form tracks a
//! nonparametric bootstrap closely, which is the anchor for this module.
//! The covariance is the centered outer-product sum
//! `Ĉ[g,g'] = Σ_k (ψ_k(g) - ψ̄(g)) (ψ_k(g') - ψ̄(g'))`, computed with
//! prefix/suffix sums in response order (O(n log n) per grid point), then
//! symmetrized and eigenvalue-clipped to be PSD.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimator::{PointWeights, WeightSet};
use crate::exec;
use crate::model::DataSet;

/// PSD-repaired covariance matrix plus repair bookkeeping.
#[derive(Clone, Debug)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<f64>,
    /// True when eigenvalue clipping changed the matrix.
    pub repaired: bool,
    /// Smallest eigenvalue before clipping.
    pub min_eigen_before: f64,
}

impl CovarianceEstimate {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Standard errors from the diagonal.
    pub fn se(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|g| self.matrix[(g, g)].max(0.0).sqrt())
            .collect()
    }
}

/// Suffix sums of `b` in response order: `S_k = Σ_i b_i 1(Y_i >= Y_k)`, with
/// tie groups sharing one value (ties count on both sides).
fn survival_sums(data: &DataSet, b: &[f64]) -> Vec<f64> {
    let n = data.n();
    let y = data.y();
    let order = data.y_order();
    let mut s = vec![0.0; n];
    let mut cum = 0.0;
    let mut stop = n;
    while stop > 0 {
        let yv = y[order[stop - 1] as usize];
        let mut start = stop;
        let mut group_sum = 0.0;
        while start > 0 && y[order[start - 1] as usize] == yv {
            group_sum += b[order[start - 1] as usize];
            start -= 1;
        }
        cum += group_sum;
        for &idx in &order[start..stop] {
            s[idx as usize] = cum;
        }
        stop = start;
    }
    s
}

/// Centered per-observation projection values for one grid point. Stage
/// residuals are rescaled by `1 / (1 - H_kk)` (leverage correction): local
/// fits at sparse or one-sided windows absorb a visible share of the
/// residual variance, and without the correction the standard errors there
/// run 10-20% low. The leverage vanishes with the window population, so
/// well-populated fits are unaffected.
fn projection_row(data: &DataSet, pw: &PointWeights) -> Vec<f64> {
    let n = data.n();
    let s = survival_sums(data, &pw.b);
    let v_fit = pw.second_stage.fitted(&pw.v);
    let s_fit = pw.first_stage.fitted(&s);
    let hat2 = pw.second_stage.hat_diagonal();
    let hat1 = pw.first_stage.hat_diagonal();
    let mut psi = vec![0.0; n];
    for k in 0..n {
        let r2 = (pw.v[k] - v_fit[k]) / (1.0 - hat2[k]).max(0.05);
        let r1 = (s[k] - s_fit[k]) / (1.0 - hat1[k]).max(0.05);
        psi[k] = pw.b[k] * r2 + pw.a[k] * r1;
    }
    // psi nearly sums to zero; remove the residual mean
    let mean: f64 = psi.iter().sum::<f64>() / n as f64;
    for p in psi.iter_mut() {
        *p -= mean;
    }
    psi
}

/// Covariance across grid points from materialized weights. Rows and columns
/// for failed grid points are zero.
pub fn grid_covariance(data: &DataSet, weights: &WeightSet) -> Result<CovarianceEstimate> {
    let n = data.n();
    let m = weights.points.len();
    for pw in weights.points.iter().flatten() {
        if pw.a.len() != n || pw.b.len() != n || pw.v.len() != n {
            return Err(Error::InvalidConfig(
                "weight vectors do not match the sample size".into(),
            ));
        }
    }

    let psi_rows: Vec<Vec<f64>> = exec::map_indexed(m, |g| match &weights.points[g] {
        Some(pw) => projection_row(data, pw),
        None => vec![0.0; n],
    });

    let mut psi = DMatrix::zeros(m, n);
    for (g, row) in psi_rows.iter().enumerate() {
        for (k, &val) in row.iter().enumerate() {
            psi[(g, k)] = val;
        }
    }
    let raw = &psi * psi.transpose();
    psd_repair(raw)
}

/// Symmetrize, then clip negative eigenvalues to zero. Matrices that are
/// already PSD pass through unchanged.
pub fn psd_repair(matrix: DMatrix<f64>) -> Result<CovarianceEstimate> {
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "covariance matrix has non-finite entries".into(),
        ));
    }
    let sym = (&matrix + matrix.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let min_eigen_before = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eigen_before >= 0.0 {
        return Ok(CovarianceEstimate {
            matrix: sym,
            repaired: false,
            min_eigen_before,
        });
    }
    let dim = sym.nrows();
    let mut out = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let lambda = eig.eigenvalues[k].max(0.0);
        if lambda > 0.0 {
            let q = eig.eigenvectors.column(k);
            for i in 0..dim {
                for j in 0..dim {
                    out[(i, j)] += lambda * q[i] * q[j];
                }
            }
        }
    }
    // exact symmetry after reassembly
    let out = (&out + out.transpose()) * 0.5;
    Ok(CovarianceEstimate {
        matrix: out,
        repaired: true,
        min_eigen_before,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator;
    use crate::model::{DataSet, EstimationConfig, EvaluationSpec};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn toy_data(n: usize, seed: u64) -> DataSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        DataSet::from_columns(y, x).unwrap()
    }

    fn fit_cov(
        data: &DataSet,
        spec: &EvaluationSpec,
        cfg: &EstimationConfig,
    ) -> (Vec<f64>, CovarianceEstimate) {
        let fit = estimator::estimate_grid(data, spec, cfg).unwrap();
        let cov = grid_covariance(data, &fit.weights).unwrap();
        (fit.estimates, cov)
    }

    #[test]
    fn single_point_variance_is_nonnegative_and_matches_se() {
        let data = toy_data(150, 21);
        let spec = EvaluationSpec::with_scalar_bandwidth(vec![0.0], vec![0.0], 1.0).unwrap();
        let cfg = EstimationConfig::default();
        let (_, cov) = fit_cov(&data, &spec, &cfg);
        assert!(cov.matrix[(0, 0)] >= 0.0);
        let se = cov.se();
        assert!((se[0] * se[0] - cov.matrix[(0, 0)]).abs() < 1e-10);
    }

    #[test]
    fn duplicate_grid_points_share_covariance() {
        // same y, same h at two grid slots: identical weight rows, so the
        // cross entry equals the diagonal exactly
        let data = toy_data(120, 22);
        let cfg = EstimationConfig::default();
        let fit_one = estimator::estimate_grid(
            &data,
            &EvaluationSpec::with_scalar_bandwidth(vec![0.1], vec![0.0], 0.9).unwrap(),
            &cfg,
        )
        .unwrap();
        let pw = fit_one.weights.points[0].clone().unwrap();
        let weights = WeightSet {
            points: vec![Some(pw.clone()), Some(pw)],
        };
        let cov = grid_covariance(&data, &weights).unwrap();
        assert_eq!(cov.matrix[(0, 1)], cov.matrix[(0, 0)]);
        assert_eq!(cov.matrix[(1, 1)], cov.matrix[(0, 0)]);
    }

    #[test]
    fn covariance_is_permutation_invariant() {
        let data = toy_data(90, 23);
        let perm: Vec<usize> = {
            let mut idx: Vec<usize> = (0..90).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(7));
            idx
        };
        let y2: Vec<f64> = perm.iter().map(|&i| data.y()[i]).collect();
        let x2: Vec<f64> = perm.iter().map(|&i| data.x_row(i)[0]).collect();
        let data2 = DataSet::from_columns(y2, x2).unwrap();
        let spec = EvaluationSpec::with_scalar_bandwidth(vec![-0.3, 0.3], vec![0.0], 1.1).unwrap();
        let cfg = EstimationConfig::default();
        let (_, c1) = fit_cov(&data, &spec, &cfg);
        let (_, c2) = fit_cov(&data2, &spec, &cfg);
        for i in 0..2 {
            for j in 0..2 {
                assert!((c1.matrix[(i, j)] - c2.matrix[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scale_property() {
        // scaling the whole problem by c multiplies the mu-order covariance
        // by c^(-2 mu)
        let data = toy_data(200, 24);
        let cfg = EstimationConfig::default(); // mu = 1
        let spec = EvaluationSpec::with_scalar_bandwidth(vec![-0.2, 0.2], vec![0.0], 0.8).unwrap();
        let (_, c1) = fit_cov(&data, &spec, &cfg);

        let c = 3.0;
        let y2: Vec<f64> = data.y().iter().map(|v| v * c).collect();
        let x2: Vec<f64> = (0..data.n()).map(|i| data.x_row(i)[0] * c).collect();
        let data2 = DataSet::from_columns(y2, x2).unwrap();
        let spec2 =
            EvaluationSpec::with_scalar_bandwidth(vec![-0.2 * c, 0.2 * c], vec![0.0], 0.8 * c)
                .unwrap();
        let (_, c2) = fit_cov(&data2, &spec2, &cfg);
        let factor = c.powi(-2);
        for i in 0..2 {
            for j in 0..2 {
                let want = c1.matrix[(i, j)] * factor;
                let got = c2.matrix[(i, j)];
                assert!(
                    (got - want).abs() <= 1e-6 * want.abs().max(1e-12),
                    "({i},{j}): {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn variance_tracks_the_rate_for_nearby_bandwidths() {
        // Var̂(h1)/Var̂(h2) against (h2/h1)^{d+2mu+1} for close bandwidths
        let data = toy_data(2000, 27);
        let cfg = EstimationConfig::default(); // d=1, mu=1 -> exponent 4
        let h1 = 0.45;
        let h2 = h1 * 1.1;
        let spec1 = EvaluationSpec::with_scalar_bandwidth(vec![0.0], vec![0.0], h1).unwrap();
        let spec2 = EvaluationSpec::with_scalar_bandwidth(vec![0.0], vec![0.0], h2).unwrap();
        let (_, c1) = fit_cov(&data, &spec1, &cfg);
        let (_, c2) = fit_cov(&data, &spec2, &cfg);
        let observed = c1.matrix[(0, 0)] / c2.matrix[(0, 0)];
        let predicted = (h2 / h1).powi(4);
        assert!(
            (observed / predicted - 1.0).abs() < 0.25,
            "observed {observed:.3} vs predicted {predicted:.3}"
        );
    }

    #[test]
    fn psd_repair_examples() {
        // PSD input unchanged, flag false
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let rep = psd_repair(m.clone()).unwrap();
        assert!(!rep.repaired);
        assert_eq!(rep.matrix, m);

        // tiny negative eigenvalue clipped
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-15]);
        let rep = psd_repair(m).unwrap();
        assert!(rep.repaired);
        assert!(rep.min_eigen_before < 0.0);
        assert!(rep.matrix[(1, 1)].abs() < 1e-20);
        assert!((rep.matrix[(0, 0)] - 1.0).abs() < 1e-12);

        // indefinite matrix: eigenvalues (3, -1) -> clip to the rank-one part
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let rep = psd_repair(m).unwrap();
        assert!(rep.repaired);
        assert!((rep.min_eigen_before + 1.0).abs() < 1e-12);
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((rep.matrix[(i, j)] - 1.5).abs() < 1e-12);
        }

        // non-finite input rejected
        let m = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(psd_repair(m).is_err());
    }

    #[test]
    fn repair_output_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for _ in 0..25 {
            let dim = 4;
            let m = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let sym = (&m + m.transpose()) * 0.5;
            let rep = psd_repair(sym).unwrap();
            let eig = rep.matrix.symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-12));
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let data = toy_data(30, 26);
        let other = toy_data(40, 27);
        let cfg = EstimationConfig::default();
        let fit = estimator::estimate_grid(
            &other,
            &EvaluationSpec::with_scalar_bandwidth(vec![0.0], vec![0.0], 1.5).unwrap(),
            &cfg,
        )
        .unwrap();
        assert!(grid_covariance(&data, &fit.weights).is_err());
    }
}
