//! Subcommand implementations.

use std::path::Path;

use cdens::bandwidth::BandwidthRule;
use cdens::montecarlo::{CellSpec, StudyConfig};
use cdens::{DataSet, DgpKind, DgpSpec, EstimationConfig, EvaluationSpec, KernelFamily};

use crate::args::{BandwidthArgs, DataArgs, EstimateArgs, McArgs, ModelArgs};
use crate::output::{self, ConfigEcho, OutputBundle};
use crate::{svg, CliError, CliResult};

fn load(data: &DataArgs) -> CliResult<DataSet> {
    Ok(cdens::load_dataset(
        Path::new(&data.data),
        &data.y_col,
        &data.x_cols,
    )?)
}

fn build_config(
    model: &ModelArgs,
    d: usize,
    nonneg: bool,
    normalize: bool,
) -> CliResult<EstimationConfig> {
    let nu = match &model.nu {
        Some(v) => v.clone(),
        None => vec![0; d],
    };
    let config = EstimationConfig {
        mu: model.mu,
        nu,
        p: model.p,
        q: model.q,
        kernel: KernelFamily::parse(&model.kernel)?,
        alpha: model.alpha,
        band_sims: model.band_sims,
        nonneg,
        normalize,
    };
    config
        .validate(d)
        .map_err(|e| CliError::flags(e.to_string()))?;
    Ok(config)
}

fn resolve_grid(model: &ModelArgs, data: &DataSet) -> CliResult<Vec<f64>> {
    if let Some(grid) = &model.y_grid {
        let mut grid = grid.clone();
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        if grid.is_empty() {
            return Err(CliError::flags("empty --y-grid"));
        }
        return Ok(grid);
    }
    if let Some(levels) = &model.grid_levels {
        return Ok(cdens::model::grid_at_levels(data, levels)?);
    }
    Ok(cdens::default_grid(data, model.grid_count)?)
}

fn resolve_x(model: &ModelArgs, d: usize) -> CliResult<Vec<f64>> {
    if model.x.is_empty() {
        return Err(CliError::flags("--x is required (conditioning point)"));
    }
    if model.x.len() != d {
        return Err(CliError::flags(format!(
            "--x has {} coordinates but {} covariates were selected",
            model.x.len(),
            d
        )));
    }
    Ok(model.x.clone())
}

enum BwSpec {
    Fixed(f64),
    MseRot,
    ImseRot,
}

fn parse_bw(raw: &str) -> CliResult<BwSpec> {
    match raw {
        "mse-rot" => Ok(BwSpec::MseRot),
        "imse-rot" => Ok(BwSpec::ImseRot),
        other => {
            let h: f64 = other.parse().map_err(|_| {
                CliError::flags(format!(
                    "--bw must be a positive number, \"mse-rot\", or \"imse-rot\" (got '{other}')"
                ))
            })?;
            if !h.is_finite() || h <= 0.0 {
                return Err(CliError::flags(format!("--bw must be positive, got {h}")));
            }
            Ok(BwSpec::Fixed(h))
        }
    }
}

/// `estimate`: fit, then print the requested format and optionally an SVG.
pub fn cmd_estimate(args: &EstimateArgs) -> CliResult<(String, Vec<String>, i32)> {
    let data = load(&args.data)?;
    let config = build_config(&args.model, data.d(), args.nonneg, args.normalize)?;
    if config.normalize {
        return Err(CliError::flags(
            "--normalize is not implemented: density rescaling is reserved",
        ));
    }
    let grid = resolve_grid(&args.model, &data)?;
    let x_point = resolve_x(&args.model, data.d())?;

    let (selection, method_label) = match parse_bw(&args.bw)? {
        BwSpec::Fixed(h) => (
            cdens::bandwidth::select(&data, &grid, &x_point, &config, BandwidthRule::Fixed(h))?,
            format!("fixed ({h})"),
        ),
        BwSpec::MseRot => (
            cdens::bandwidth::select(&data, &grid, &x_point, &config, BandwidthRule::MseRot)?,
            "mse-rot".to_string(),
        ),
        BwSpec::ImseRot => (
            cdens::bandwidth::select(&data, &grid, &x_point, &config, BandwidthRule::ImseRot)?,
            "imse-rot".to_string(),
        ),
    };

    let spec = EvaluationSpec::new(grid, x_point, selection.bandwidths.clone())?;
    let mut fit = cdens::fit(&data, &spec, &config, args.model.seed)?;
    fit.warnings.extend(selection.warnings.iter().cloned());
    if fit.all_failed() {
        return Err(CliError::numerical(
            "estimation failed at every grid point; try a larger bandwidth",
        ));
    }

    let bundle = OutputBundle::from_fit(&fit, data.n(), &method_label, args.model.seed);
    if let Some(path) = &args.svg {
        let rendered = svg::render(&bundle)?;
        std::fs::write(path, rendered)
            .map_err(|e| CliError::data(format!("cannot write {path}: {e}")))?;
    }
    let text = match args.format.as_str() {
        "json" => serde_json::to_string_pretty(&bundle).expect("serializable") + "\n",
        "csv" => output::estimate_csv(&bundle),
        _ => output::estimate_table(&bundle),
    };
    Ok((text, fit.warnings.clone(), 0))
}

/// `bandwidth`: run selection and print the three-column table.
pub fn cmd_bandwidth(args: &BandwidthArgs) -> CliResult<(String, Vec<String>, i32)> {
    let data = load(&args.data)?;
    let config = build_config(&args.model, data.d(), false, false)?;
    let grid = resolve_grid(&args.model, &data)?;
    let x_point = resolve_x(&args.model, data.d())?;
    let rule = match args.bw_type.as_str() {
        "imse-rot" => BandwidthRule::ImseRot,
        _ => BandwidthRule::MseRot,
    };
    let sel = cdens::bandwidth::select(&data, &grid, &x_point, &config, rule)?;
    let cfg = ConfigEcho {
        n: data.n(),
        p: config.p,
        q: config.q,
        mu: config.mu,
        nu: config.nu.clone(),
        kernel: config.kernel.name().to_string(),
        bandwidth_method: args.bw_type.clone(),
        alpha: config.alpha,
        band_sims: config.band_sims,
        seed: args.model.seed,
        x_point: x_point.clone(),
    };
    let text = match args.format.as_str() {
        "json" => {
            #[derive(serde::Serialize)]
            struct BwOut<'a> {
                config: &'a ConfigEcho,
                grid: &'a [f64],
                bandwidths: &'a [f64],
                eff_n: &'a [usize],
                warnings: &'a [String],
            }
            serde_json::to_string_pretty(&BwOut {
                config: &cfg,
                grid: &sel.grid,
                bandwidths: &sel.bandwidths,
                eff_n: &sel.eff_n,
                warnings: &sel.warnings,
            })
            .expect("serializable")
                + "\n"
        }
        "csv" => output::bandwidth_csv(&sel.grid, &sel.bandwidths, &sel.eff_n),
        _ => output::bandwidth_table(&cfg, &sel.grid, &sel.bandwidths, &sel.eff_n, &sel.warnings),
    };
    Ok((text, sel.warnings.clone(), 0))
}

fn parse_cells(raw: &str) -> CliResult<Vec<CellSpec>> {
    let mut cells = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (mu, x) = part
            .split_once(':')
            .ok_or_else(|| CliError::flags(format!("cell '{part}' is not mu:x")))?;
        let mu: usize = mu
            .trim()
            .parse()
            .map_err(|_| CliError::flags(format!("bad mu in cell '{part}'")))?;
        let x: f64 = x
            .trim()
            .parse()
            .map_err(|_| CliError::flags(format!("bad x in cell '{part}'")))?;
        cells.push(CellSpec { mu, x_point: x });
    }
    if cells.is_empty() {
        return Err(CliError::flags("--cells is empty"));
    }
    Ok(cells)
}

/// `mc`: run the coverage study and emit CSV or JSON.
pub fn cmd_mc(args: &McArgs) -> CliResult<(String, Vec<String>, i32)> {
    let kind = match args.dgp.as_str() {
        "bivariate_normal" => DgpKind::BivariateNormal,
        _ => DgpKind::TruncatedBivariateNormal,
    };
    let dgp = DgpSpec {
        kind,
        variance: args.variance,
        covariance: args.covariance,
        truncation: match kind {
            DgpKind::BivariateNormal => None,
            DgpKind::TruncatedBivariateNormal => Some([(-1.0, 1.0), (-1.0, 1.0)]),
        },
        seed: args.seed,
    };
    let study = StudyConfig {
        reps: args.reps,
        n: args.n,
        cells: parse_cells(&args.cells)?,
        bw_multipliers: args.bw_mult.clone(),
        grid_size: args.grid_size,
        grid_range: (args.grid_from, args.grid_to),
        alpha: args.alpha,
        band_sims: args.band_sims,
        seed: args.seed,
    };
    let report = cdens::montecarlo::run_coverage_study(&dgp, &study)?;
    let text = match args.out.as_str() {
        "json" => serde_json::to_string_pretty(&report).expect("serializable") + "\n",
        _ => output::coverage_csv(&report),
    };
    if let Some(path) = &args.out_file {
        std::fs::write(path, &text)
            .map_err(|e| CliError::data(format!("cannot write {path}: {e}")))?;
        return Ok((String::new(), Vec::new(), 0));
    }
    Ok((text, Vec::new(), 0))
}
