//! Domain types: datasets, estimation configuration, evaluation grids.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis;
use crate::error::{Error, Result};
use crate::kernels::KernelFamily;

/// Immutable sample of a scalar response and `d` covariates, with empirical
/// support bounds and a cached response sort order.
#[derive(Clone, Debug)]
pub struct DataSet {
    y: Vec<f64>,
    x: Vec<f64>, // row-major n x d
    n: usize,
    d: usize,
    y_bounds: (f64, f64),
    x_bounds: Vec<(f64, f64)>,
    y_order: Vec<u32>, // indices sorted by y ascending
}

impl DataSet {
    pub fn new(y: Vec<f64>, x: Vec<f64>, d: usize) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if d < 1 {
            return Err(Error::InvalidData("need at least 1 covariate".into()));
        }
        if x.len() != n * d {
            return Err(Error::InvalidData(format!(
                "covariate matrix has {} entries, expected {}",
                x.len(),
                n * d
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite response in row {i}"
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite covariate in row {}",
                i / d
            )));
        }

        let mut y_bounds = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &y {
            y_bounds.0 = y_bounds.0.min(v);
            y_bounds.1 = y_bounds.1.max(v);
        }
        let mut x_bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
        for row in 0..n {
            for k in 0..d {
                let v = x[row * d + k];
                x_bounds[k].0 = x_bounds[k].0.min(v);
                x_bounds[k].1 = x_bounds[k].1.max(v);
            }
        }

        let mut y_order: Vec<u32> = (0..n as u32).collect();
        y_order.sort_by(|&a, &b| y[a as usize].partial_cmp(&y[b as usize]).unwrap());

        Ok(DataSet {
            y,
            x,
            n,
            d,
            y_bounds,
            x_bounds,
            y_order,
        })
    }

    /// Build a one-covariate dataset from parallel vectors.
    pub fn from_columns(y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        if y.len() != x.len() {
            return Err(Error::InvalidData(format!(
                "response has {} rows, covariate has {}",
                y.len(),
                x.len()
            )));
        }
        Self::new(y, x, 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn y_bounds(&self) -> (f64, f64) {
        self.y_bounds
    }

    pub fn x_bounds(&self) -> &[(f64, f64)] {
        &self.x_bounds
    }

    /// Row indices sorted by response value, ascending.
    pub fn y_order(&self) -> &[u32] {
        &self.y_order
    }

    /// Largest column range across the response and all covariates.
    pub fn max_range(&self) -> f64 {
        let mut r = self.y_bounds.1 - self.y_bounds.0;
        for &(lo, hi) in &self.x_bounds {
            r = r.max(hi - lo);
        }
        r
    }
}

/// Load a dataset from an RFC-4180 CSV file with a header row. Any non-finite
/// or non-numeric value in a selected column is a hard error naming the row
/// (1-based, excluding the header) and column.
pub fn load_dataset(path: &Path, y_column: &str, x_columns: &[String]) -> Result<DataSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e.to_string()),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.display().to_string(),
            message: e.to_string(),
        })?
        .clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })
    };
    let y_idx = find(y_column)?;
    let x_idx: Vec<usize> = x_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    let d = x_idx.len().max(1);
    if x_idx.is_empty() {
        return Err(Error::InvalidConfig("no covariate columns given".into()));
    }

    let mut y = Vec::new();
    let mut x = Vec::new();
    for (row_num, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let parse = |idx: usize, column: &str| -> Result<f64> {
            let cell = record.get(idx).ok_or_else(|| Error::BadCell {
                row: row_num + 1,
                column: column.to_string(),
            })?;
            let v: f64 = cell.trim().parse().map_err(|_| Error::BadCell {
                row: row_num + 1,
                column: column.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::BadCell {
                    row: row_num + 1,
                    column: column.to_string(),
                });
            }
            Ok(v)
        };
        y.push(parse(y_idx, y_column)?);
        for (j, &idx) in x_idx.iter().enumerate() {
            x.push(parse(idx, &x_columns[j])?);
        }
    }
    if y.len() < 2 {
        return Err(Error::InvalidData(format!(
            "need at least 2 usable rows, got {}",
            y.len()
        )));
    }
    DataSet::new(y, x, d)
}

/// Type-7 quantile (linear interpolation of order statistics) of a sorted
/// slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n >= 1);
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Quantile-spaced evaluation grid: empirical type-7 quantiles of the
/// response at levels `k / (count + 1)`, deduplicated and strictly
/// increasing.
pub fn default_grid(data: &DataSet, count: usize) -> Result<Vec<f64>> {
    if count < 1 {
        return Err(Error::InvalidConfig("grid count must be >= 1".into()));
    }
    let levels: Vec<f64> = (1..=count).map(|k| k as f64 / (count + 1) as f64).collect();
    grid_at_levels(data, &levels)
}

/// Evaluation grid at explicit quantile levels.
pub fn grid_at_levels(data: &DataSet, levels: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = data.y_bounds();
    if lo == hi {
        return Err(Error::InvalidData(
            "degenerate data: all responses identical".into(),
        ));
    }
    for &p in levels {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidConfig(format!(
                "quantile level {p} outside [0, 1]"
            )));
        }
    }
    let sorted: Vec<f64> = data
        .y_order()
        .iter()
        .map(|&i| data.y()[i as usize])
        .collect();
    let mut grid: Vec<f64> = levels
        .iter()
        .map(|&p| quantile_sorted(&sorted, p))
        .collect();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    Ok(grid)
}

/// Derivative orders, polynomial orders, kernel, and inference options.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimationConfig {
    /// Derivative order in the response (0 = CDF, 1 = PDF, ...).
    pub mu: usize,
    /// Derivative multi-index in the covariates, one entry per dimension.
    pub nu: Vec<usize>,
    /// Smoothing-stage polynomial order.
    pub p: usize,
    /// Covariate-stage polynomial order.
    pub q: usize,
    pub kernel: KernelFamily,
    /// One minus the confidence level.
    pub alpha: f64,
    /// Gaussian draws for the uniform-band critical value.
    pub band_sims: usize,
    /// Clamp density estimates at zero.
    pub nonneg: bool,
    /// Reserved; accepted but rejected at run time.
    pub normalize: bool,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            mu: 1,
            nu: vec![0],
            p: 2,
            q: 1,
            kernel: KernelFamily::Epanechnikov,
            alpha: 0.05,
            band_sims: 2000,
            nonneg: false,
            normalize: false,
        }
    }
}

impl EstimationConfig {
    /// Defaults with the covariate derivative sized for dimension `d`.
    pub fn for_dimension(d: usize) -> Self {
        EstimationConfig {
            nu: vec![0; d],
            ..Default::default()
        }
    }

    pub fn nu_total(&self) -> usize {
        self.nu.iter().sum()
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.nu.len() != d {
            return Err(Error::InvalidConfig(format!(
                "nu has {} entries but data has {} covariates",
                self.nu.len(),
                d
            )));
        }
        if self.mu > self.p {
            return Err(Error::InvalidConfig(format!(
                "mu must be <= p (mu={}, p={})",
                self.mu, self.p
            )));
        }
        if self.nu_total() > self.q {
            return Err(Error::InvalidConfig(format!(
                "|nu| must be <= q (|nu|={}, q={})",
                self.nu_total(),
                self.q
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in (0,1), got {}",
                self.alpha
            )));
        }
        if self.band_sims == 0 {
            return Err(Error::InvalidConfig("band_sims must be positive".into()));
        }
        Ok(())
    }

    /// Orders raised by one for robust bias correction.
    pub fn rbc(&self) -> Self {
        EstimationConfig {
            p: self.p + 1,
            q: self.q + 1,
            ..self.clone()
        }
    }

    /// Smallest two-window observation count accepted by bandwidth selection.
    pub fn min_eff_n(&self, d: usize) -> usize {
        basis::basis_dimension(d, self.q) + 2
    }
}

/// Where and with which bandwidths to evaluate: a strictly increasing grid in
/// the response, one conditioning point, one bandwidth per grid point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvaluationSpec {
    pub y_grid: Vec<f64>,
    pub x_point: Vec<f64>,
    pub bandwidths: Vec<f64>,
}

impl EvaluationSpec {
    pub fn new(y_grid: Vec<f64>, x_point: Vec<f64>, bandwidths: Vec<f64>) -> Result<Self> {
        if y_grid.is_empty() {
            return Err(Error::InvalidConfig("empty evaluation grid".into()));
        }
        if !y_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "evaluation grid must be strictly increasing".into(),
            ));
        }
        if bandwidths.len() != y_grid.len() {
            return Err(Error::InvalidConfig(format!(
                "{} bandwidths for {} grid points",
                bandwidths.len(),
                y_grid.len()
            )));
        }
        if bandwidths.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidConfig("bandwidths must be positive".into()));
        }
        if x_point.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "conditioning point must be finite".into(),
            ));
        }
        Ok(EvaluationSpec {
            y_grid,
            x_point,
            bandwidths,
        })
    }

    /// Broadcast a scalar bandwidth over the grid.
    pub fn with_scalar_bandwidth(y_grid: Vec<f64>, x_point: Vec<f64>, h: f64) -> Result<Self> {
        let m = y_grid.len();
        Self::new(y_grid, x_point, vec![h; m])
    }

    pub fn len(&self) -> usize {
        self.y_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_grid.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn loads_columns_by_name() {
        let mut body = String::from("y,x1,x2\n");
        for i in 0..12 {
            body.push_str(&format!("{}.5,{},{}\n", i, i, 2 * i));
        }
        let f = write_csv(&body);
        let data = load_dataset(f.path(), "y", &["x1".into()]).unwrap();
        assert_eq!(data.n(), 12);
        assert_eq!(data.d(), 1);

        let data = load_dataset(f.path(), "y", &["x1".into(), "x2".into()]).unwrap();
        assert_eq!(data.d(), 2);
        assert_eq!(data.x_row(3), &[3.0, 6.0]);
    }

    #[test]
    fn rejects_nan_with_location() {
        let f = write_csv("y,x1\n1,2\n3,4\n5,6\n7,8\n9,10\n11,12\nNaN,14\n15,16\n");
        let err = load_dataset(f.path(), "y", &["x1".into()]).unwrap_err();
        match err {
            Error::BadCell { row, column } => {
                assert_eq!(row, 7);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_column_and_file() {
        let f = write_csv("y,x1\n1,2\n3,4\n");
        assert!(matches!(
            load_dataset(f.path(), "y", &["nope".into()]),
            Err(Error::MissingColumn { .. })
        ));
        assert!(matches!(
            load_dataset(Path::new("/definitely/not/here.csv"), "y", &["x".into()]),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn rejects_short_files() {
        let f = write_csv("y,x1\n1,2\n");
        assert!(matches!(
            load_dataset(f.path(), "y", &["x1".into()]),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn grid_is_type7_quantiles() {
        let y: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let x = vec![0.0; 100];
        let data = DataSet::from_columns(y, x).unwrap();
        let grid = default_grid(&data, 9).unwrap();
        // type-7 quantiles of 1..=100 at levels 0.1..0.9
        let expected = [10.9, 20.8, 30.7, 40.6, 50.5, 60.4, 70.3, 80.2, 90.1];
        assert_eq!(grid.len(), 9);
        for (g, e) in grid.iter().zip(expected.iter()) {
            assert!((g - e).abs() < 1e-12, "{g} vs {e}");
        }
    }

    #[test]
    fn single_point_grid_is_median() {
        let y = vec![3.0, 1.0, 2.0, 5.0, 4.0];
        let data = DataSet::from_columns(y, vec![0.0; 5]).unwrap();
        let grid = default_grid(&data, 1).unwrap();
        assert_eq!(grid, vec![3.0]);
    }

    #[test]
    fn grid_count_19_levels() {
        let y: Vec<f64> = (0..200).map(|v| v as f64 / 10.0).collect();
        let data = DataSet::from_columns(y.clone(), vec![0.0; 200]).unwrap();
        let grid = default_grid(&data, 19).unwrap();
        assert_eq!(grid.len(), 19);
        let mut sorted = y;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((grid[0] - quantile_sorted(&sorted, 0.05)).abs() < 1e-12);
        assert!((grid[18] - quantile_sorted(&sorted, 0.95)).abs() < 1e-12);
    }

    #[test]
    fn grid_invariant_to_permutation_and_in_bounds() {
        let mut y: Vec<f64> = (0..57).map(|v| ((v * 37) % 57) as f64 * 0.31).collect();
        let data = DataSet::from_columns(y.clone(), vec![0.0; 57]).unwrap();
        let g1 = default_grid(&data, 7).unwrap();
        y.reverse();
        let data2 = DataSet::from_columns(y, vec![0.0; 57]).unwrap();
        let g2 = default_grid(&data2, 7).unwrap();
        assert_eq!(g1, g2);
        let (lo, hi) = data.y_bounds();
        assert!(g1.iter().all(|&g| g >= lo && g <= hi));
    }

    #[test]
    fn degenerate_grid_errors_and_ties_dedup() {
        let data = DataSet::from_columns(vec![2.0; 10], vec![0.0; 10]).unwrap();
        assert!(default_grid(&data, 3).is_err());

        let y = vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0];
        let data = DataSet::from_columns(y, vec![0.0; 8]).unwrap();
        let grid = default_grid(&data, 9).unwrap();
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn config_validation() {
        let mut cfg = EstimationConfig::default();
        assert!(cfg.validate(1).is_ok());
        cfg.mu = 3;
        assert!(cfg.validate(1).is_err());
        cfg.mu = 1;
        cfg.nu = vec![2];
        assert!(cfg.validate(1).is_err());
        cfg.nu = vec![0];
        cfg.alpha = 0.0;
        assert!(cfg.validate(1).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(EvaluationSpec::new(vec![0.0, 1.0], vec![0.0], vec![0.5, 0.5]).is_ok());
        assert!(EvaluationSpec::new(vec![1.0, 0.0], vec![0.0], vec![0.5, 0.5]).is_err());
        assert!(EvaluationSpec::new(vec![0.0, 1.0], vec![0.0], vec![0.5]).is_err());
        assert!(EvaluationSpec::new(vec![0.0, 1.0], vec![0.0], vec![0.5, -0.1]).is_err());
    }
}
