//! One runner per subcommand. Runners only wire library calls together:
//! read input, resolve the weighting scheme, fit, lay the result out as a
//! table. Informational text (chosen bandwidths, diagnostics, warnings)
//! goes to stderr; the data goes to --out or stdout.

use std::fs::File;
use std::io::{BufWriter, Write};

use gw_core::collin::{collin_diagnostics, lcr_bandwidth};
use gw_core::distance::dist_matrix;
use gw_core::gwpca::{gwpca_bandwidth, gwpca_fit, winning_variable, RobustPca};
use gw_core::gwr::{
    gwr_bandwidth, gwr_basic, gwr_diagnostics_report, gwr_robust_filtered, gwr_robust_iterative,
    stepwise_select, GwrFit, SelectionCriterion,
};
use gw_core::distance::{DistanceMatrix, DistanceMetric};
use gw_core::gwss::gwss_all;
use gw_core::spatial::{SpatialDataset, VariableSelection};
use gw_core::weighting::{Bandwidth, BandwidthDomain, KernelSpec, WeightingScheme};
use nalgebra::DMatrix;

use crate::config::{BwSpec, OutputFormat, Resolved, Robust};
use crate::input;
use crate::table::{write_csv, write_geojson, Cell, Table};
use crate::{CliError, CliResult};

fn require_vars(r: &Resolved) -> CliResult<Vec<&str>> {
    if r.vars.is_empty() {
        return Err(CliError::validation("missing --vars"));
    }
    Ok(r.vars.iter().map(String::as_str).collect())
}

fn require_dependent(r: &Resolved) -> CliResult<&str> {
    r.dependent
        .as_deref()
        .ok_or_else(|| CliError::validation("missing --dependent"))
}

fn scheme_with(r: &Resolved, bw: Bandwidth) -> WeightingScheme {
    WeightingScheme {
        kernel: KernelSpec::new(r.family, bw),
        distance: r.metric,
    }
}

/// Commands without a bandwidth objective refuse "auto".
fn explicit_bw(r: &Resolved, cmd: &str) -> CliResult<Bandwidth> {
    match r.bw {
        None => Err(CliError::validation(format!("{cmd} requires --bw"))),
        Some(BwSpec::Auto) => Err(CliError::validation(format!(
            "{cmd} requires an explicit --bw; automatic selection is available for gwr, gwr-lcr, and gwpca"
        ))),
        Some(BwSpec::Value(b)) => Ok(b),
    }
}

fn describe_bw(bw: Bandwidth) -> String {
    match bw {
        Bandwidth::Fixed(v) => format!("fixed {v}"),
        Bandwidth::Adaptive(n) => format!("adaptive {n} nearest neighbours"),
    }
}

/// Search domain for --bw auto: with --adaptive the library's neighbour-count
/// default, otherwise fixed bounds from the pairwise distances (computing the
/// matrix here if no cache already supplied it).
fn auto_domain(
    r: &Resolved,
    dmat: &mut Option<DistanceMatrix>,
    coords: &[[f64; 2]],
    metric: &DistanceMetric,
) -> CliResult<Option<BandwidthDomain>> {
    if r.adaptive {
        return Ok(None);
    }
    if dmat.is_none() {
        *dmat = Some(dist_matrix(coords, None, metric)?);
    }
    Ok(Some(BandwidthDomain::fixed_default(
        dmat.as_ref().unwrap(),
    )?))
}

fn emit(r: &Resolved, table: &Table, coords: Option<&[[f64; 2]]>) -> CliResult<()> {
    let out: Box<dyn Write> = match &r.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    match r.format {
        OutputFormat::Csv => write_csv(table, out),
        OutputFormat::Geojson => {
            let coords = coords.ok_or_else(|| {
                CliError::validation("this command's output is not per-location; use --format csv")
            })?;
            write_geojson(table, coords, out)
        }
    }
}

pub fn dist(r: &Resolved) -> CliResult<()> {
    let coords = input::read_coords(&r.input, &r.x, &r.y, r.geographic)?;
    let dm = match input::resolve_dmat(r.dist_cache.as_deref(), &coords, &r.metric)? {
        Some(dm) => dm,
        None => dist_matrix(&coords, None, &r.metric)?,
    };
    let n = coords.len();
    let table = Table {
        columns: (1..=n).map(|j| format!("d_{j}")).collect(),
        rows: (0..n)
            .map(|i| dm.row(i).iter().map(|&d| Cell::F(d)).collect())
            .collect(),
    };
    emit(r, &table, Some(&coords))
}

pub fn gwss(r: &Resolved) -> CliResult<()> {
    let ds = input::read_dataset(&r.input, &r.x, &r.y, r.geographic)?;
    let vars = require_vars(r)?;
    let bw = explicit_bw(r, "gwss")?;
    let sch = scheme_with(r, bw);
    let dmat = input::resolve_dmat(r.dist_cache.as_deref(), ds.coords(), &r.metric)?;
    let sel = VariableSelection::analysis(&vars);
    let res = gwss_all(&ds, &sel, &sch, r.quantiles, dmat.as_ref())?;

    let mut columns = Vec::new();
    for v in &res.names {
        columns.push(format!("{v}_LM"));
        columns.push(format!("{v}_LSD"));
        columns.push(format!("{v}_LVar"));
        columns.push(format!("{v}_LSKe"));
        columns.push(format!("{v}_LCV"));
        if r.quantiles {
            columns.push(format!("{v}_Median"));
            columns.push(format!("{v}_IQR"));
            columns.push(format!("{v}_QI"));
        }
    }
    for (a, b) in &res.pairs {
        columns.push(format!("Corr_{a}.{b}"));
    }
    for (a, b) in &res.pairs {
        columns.push(format!("Spearman_rho_{a}.{b}"));
    }
    let mut rows = Vec::with_capacity(ds.n());
    for i in 0..ds.n() {
        let mut row = Vec::with_capacity(columns.len());
        for j in 0..res.names.len() {
            row.push(Cell::F(res.local_mean[(i, j)]));
            row.push(Cell::F(res.local_sd[(i, j)]));
            row.push(Cell::F(res.local_var[(i, j)]));
            row.push(Cell::F(res.local_skew[(i, j)]));
            row.push(Cell::F(res.local_cv[(i, j)]));
            if r.quantiles {
                row.push(Cell::F(res.local_median.as_ref().unwrap()[(i, j)]));
                row.push(Cell::F(res.local_iqr.as_ref().unwrap()[(i, j)]));
                row.push(Cell::F(res.local_qi.as_ref().unwrap()[(i, j)]));
            }
        }
        for p in 0..res.pairs.len() {
            row.push(Cell::F(res.local_corr[(i, p)]));
        }
        for p in 0..res.pairs.len() {
            row.push(Cell::F(res.local_spearman[(i, p)]));
        }
        rows.push(row);
    }
    emit(r, &Table { columns, rows }, Some(ds.coords()))
}

pub fn gwpca(r: &Resolved) -> CliResult<()> {
    let ds = input::read_dataset(&r.input, &r.x, &r.y, r.geographic)?;
    let vars = require_vars(r)?;
    let k = r.k.ok_or_else(|| CliError::validation("gwpca requires --k"))?;
    let robust = match r.robust {
        Robust::None => None,
        Robust::Mcd => Some(RobustPca {
            seed: r.seed,
            ..RobustPca::default()
        }),
        _ => {
            return Err(CliError::validation(
                "--robust for gwpca must be none or mcd",
            ))
        }
    };
    let mut dmat = input::resolve_dmat(r.dist_cache.as_deref(), ds.coords(), &r.metric)?;
    let sel = VariableSelection::analysis(&vars);
    let bw = match r.bw {
        None => return Err(CliError::validation("gwpca requires --bw")),
        Some(BwSpec::Value(b)) => b,
        Some(BwSpec::Auto) => {
            let domain = auto_domain(r, &mut dmat, ds.coords(), &r.metric)?;
            let br = gwpca_bandwidth(
                &ds,
                &sel,
                r.family,
                &r.metric,
                k,
                robust,
                domain,
                dmat.as_ref(),
            )?;
            eprintln!(
                "selected bandwidth: {} (cv score {:.6e}, {} evaluations)",
                describe_bw(br.bandwidth),
                br.score,
                br.trace.len()
            );
            br.bandwidth
        }
    };
    let sch = scheme_with(r, bw);
    let res = gwpca_fit(&ds, &sel, &sch, k, robust, dmat.as_ref())?;
    let m = res.names.len();
    let wins: Vec<Vec<String>> = (1..=k)
        .map(|c| winning_variable(&res, c))
        .collect::<Result<_, _>>()?;

    let mut columns = Vec::new();
    for j in 1..=m {
        columns.push(format!("Comp.{j}_EV"));
    }
    for j in 1..=m {
        columns.push(format!("PTV_{j}"));
    }
    for j in 1..=k {
        columns.push(format!("win_var_PC{j}"));
    }
    let mut rows = Vec::with_capacity(ds.n());
    for i in 0..ds.n() {
        let mut row = Vec::with_capacity(columns.len());
        for j in 0..m {
            row.push(Cell::F(res.eigenvalues[(i, j)]));
        }
        for j in 0..m {
            row.push(Cell::F(res.ptv[(i, j)]));
        }
        for w in &wins {
            row.push(Cell::S(w[i].clone()));
        }
        rows.push(row);
    }

    // Loadings are a location x component panel, so they always go to a
    // sibling CSV of --out rather than into the per-location table.
    if let Some(out) = &r.out {
        let mut name = out
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "gwpca".to_string());
        name.push_str("_loadings.csv");
        let lpath = out.with_file_name(name);
        let mut lcolumns = vec!["location".to_string(), "component".to_string()];
        lcolumns.extend(res.names.iter().cloned());
        let mut lrows = Vec::with_capacity(ds.n() * m);
        for i in 0..ds.n() {
            for c in 0..m {
                let mut row = vec![Cell::U(i + 1), Cell::U(c + 1)];
                for v in 0..m {
                    row.push(Cell::F(res.loadings[i][(v, c)]));
                }
                lrows.push(row);
            }
        }
        write_csv(
            &Table {
                columns: lcolumns,
                rows: lrows,
            },
            BufWriter::new(File::create(&lpath)?),
        )?;
        eprintln!("wrote loadings to {}", lpath.display());
    }
    emit(r, &Table { columns, rows }, Some(ds.coords()))
}

fn coefficient_table(fit: &GwrFit, extra: &[(&str, &[f64])]) -> Table {
    let n = fit.fitted.len();
    let mut columns = fit.names.clone();
    for (name, _) in extra {
        columns.push(name.to_string());
    }
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: Vec<Cell> = (0..fit.names.len())
            .map(|j| Cell::F(fit.coefficients[(i, j)]))
            .collect();
        for (_, values) in extra {
            row.push(Cell::F(values[i]));
        }
        rows.push(row);
    }
    Table { columns, rows }
}

pub fn gwr(r: &Resolved) -> CliResult<()> {
    let ds = input::read_dataset(&r.input, &r.x, &r.y, r.geographic)?;
    let dep = require_dependent(r)?;
    let vars = require_vars(r)?;
    let sel = VariableSelection::regression(dep, &vars);
    let mut dmat = input::resolve_dmat(r.dist_cache.as_deref(), ds.coords(), &r.metric)?;
    let bw = match r.bw {
        None => return Err(CliError::validation("gwr requires --bw")),
        Some(BwSpec::Value(b)) => b,
        Some(BwSpec::Auto) => {
            let domain = auto_domain(r, &mut dmat, ds.coords(), &r.metric)?;
            let br = gwr_bandwidth(
                &ds,
                &sel,
                r.family,
                &r.metric,
                r.criterion,
                domain,
                dmat.as_ref(),
            )?;
            let crit = match r.criterion {
                SelectionCriterion::Cv => "cv",
                SelectionCriterion::Aicc => "aicc",
            };
            eprintln!(
                "selected bandwidth: {} ({crit} score {:.6e}, {} evaluations)",
                describe_bw(br.bandwidth),
                br.score,
                br.trace.len()
            );
            br.bandwidth
        }
    };
    let sch = scheme_with(r, bw);
    let fit = match r.robust {
        Robust::None => gwr_basic(&ds, &sel, &sch, dmat.as_ref())?,
        Robust::Filtered => {
            let rf = gwr_robust_filtered(&ds, &sel, &sch, dmat.as_ref())?;
            if !rf.filtered.is_empty() {
                eprintln!(
                    "filtered {} outlying observation(s): {:?}",
                    rf.filtered.len(),
                    rf.filtered
                );
            }
            rf.fit
        }
        Robust::Iterative => {
            let rf = gwr_robust_iterative(&ds, &sel, &sch, dmat.as_ref())?;
            if !rf.converged {
                eprintln!(
                    "warning: iterative reweighting stopped without converging after {} iterations",
                    rf.iterations
                );
            }
            rf.fit
        }
        Robust::Mcd => {
            return Err(CliError::validation(
                "--robust for gwr must be none, filtered, or iterative",
            ))
        }
    };
    eprint!("{}", gwr_diagnostics_report(&fit));
    emit(r, &coefficient_table(&fit, &[]), Some(ds.coords()))
}

pub fn gwr_select(r: &Resolved) -> CliResult<()> {
    let ds = input::read_dataset(&r.input, &r.x, &r.y, r.geographic)?;
    let dep = require_dependent(r)?;
    if r.vars.is_empty() {
        return Err(CliError::validation("missing --vars"));
    }
    let bw = explicit_bw(r, "gwr-select")?;
    let sch = scheme_with(r, bw);
    let dmat = input::resolve_dmat(r.dist_cache.as_deref(), ds.coords(), &r.metric)?;
    let report = stepwise_select(&ds, dep, &r.vars, &sch, dmat.as_ref())?;
    eprintln!("inclusion order: {}", report.inclusion_order.join(" -> "));
    let view = report.sorted_view();
    let rows = view
        .models
        .iter()
        .map(|m| {
            vec![
                Cell::U(m.round),
                Cell::S(m.variables.join("+")),
                Cell::F(m.aicc),
            ]
        })
        .collect();
    let table = Table {
        columns: vec!["round".to_string(), "variables".to_string(), "AICc".to_string()],
        rows,
    };
    // one row per tried model, not per location, so GeoJSON does not apply
    emit(r, &table, None)
}

pub fn gwr_lcr(r: &Resolved) -> CliResult<()> {
    let ds = input::read_dataset(&r.input, &r.x, &r.y, r.geographic)?;
    let dep = require_dependent(r)?;
    let vars = require_vars(r)?;
    let sel = VariableSelection::regression(dep, &vars);
    let mut dmat = input::resolve_dmat(r.dist_cache.as_deref(), ds.coords(), &r.metric)?;
    let bw = match r.bw {
        None => return Err(CliError::validation("gwr-lcr requires --bw")),
        Some(BwSpec::Value(b)) => b,
        Some(BwSpec::Auto) => {
            let domain = auto_domain(r, &mut dmat, ds.coords(), &r.metric)?;
            let br = lcr_bandwidth(
                &ds,
                &sel,
                r.family,
                &r.metric,
                r.adjust,
                r.cn_thresh,
                domain,
                dmat.as_ref(),
            )?;
            eprintln!(
                "selected bandwidth: {} (cv score {:.6e}, {} evaluations)",
                describe_bw(br.bandwidth),
                br.score,
                br.trace.len()
            );
            br.bandwidth
        }
    };
    let sch = scheme_with(r, bw);
    let fit = gw_core::collin::gwr_lcr(&ds, &sel, &sch, r.adjust, r.cn_thresh, dmat.as_ref())?;
    let n = ds.n();
    let mut columns = fit.names.clone();
    columns.push("Local_CN".to_string());
    columns.push("Local_Lambda".to_string());
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: Vec<Cell> = (0..fit.names.len())
            .map(|j| Cell::F(fit.coefficients[(i, j)]))
            .collect();
        row.push(Cell::F(fit.local_cn[i]));
        row.push(Cell::F(fit.local_lambda[i]));
        rows.push(row);
    }
    emit(r, &Table { columns, rows }, Some(ds.coords()))
}

pub fn gwr_collin(r: &Resolved) -> CliResult<()> {
    let ds = input::read_dataset(&r.input, &r.x, &r.y, r.geographic)?;
    let dep = require_dependent(r)?;
    let vars = require_vars(r)?;
    let sel = VariableSelection::regression(dep, &vars);
    let bw = explicit_bw(r, "gwr-collin")?;
    let sch = scheme_with(r, bw);
    let dmat = input::resolve_dmat(r.dist_cache.as_deref(), ds.coords(), &r.metric)?;
    let diag = collin_diagnostics(&ds, &sel, &sch, dmat.as_ref())?;
    let count = |v: &[bool]| v.iter().filter(|&&b| b).count();
    eprintln!(
        "flagged locations: correlation {} / vif {} / vdp {} / condition number {} (of {})",
        count(&diag.flags.correlation),
        count(&diag.flags.vif),
        count(&diag.flags.vdp),
        count(&diag.flags.cn),
        ds.n()
    );
    let p = diag.coef_names.len();
    let mut columns = Vec::new();
    for (a, b) in &diag.pairs {
        columns.push(format!("Corr_{a}.{b}"));
    }
    for v in &diag.names {
        columns.push(format!("VIF_{v}"));
    }
    columns.push("Local_CN".to_string());
    for c in &diag.coef_names {
        columns.push(format!("VDP_{c}"));
    }
    let mut rows = Vec::with_capacity(ds.n());
    for i in 0..ds.n() {
        let mut row = Vec::with_capacity(columns.len());
        for pi in 0..diag.pairs.len() {
            row.push(Cell::F(diag.local_correlations[(i, pi)]));
        }
        for j in 0..diag.names.len() {
            row.push(Cell::F(diag.local_vifs[(i, j)]));
        }
        row.push(Cell::F(diag.local_cn[i]));
        // the row of the variance decomposition on the smallest singular
        // value, where proportions above 0.5 flag a damaging dependency
        for c in 0..p {
            row.push(Cell::F(diag.local_vdps[i][(p - 1, c)]));
        }
        rows.push(row);
    }
    emit(r, &Table { columns, rows }, Some(ds.coords()))
}

pub fn gwr_predict(r: &Resolved) -> CliResult<()> {
    let calib = input::read_dataset(&r.input, &r.x, &r.y, r.geographic)?;
    let dep = require_dependent(r)?;
    let vars = require_vars(r)?;
    let sel = VariableSelection::regression(dep, &vars);
    let bw = explicit_bw(r, "gwr-predict")?;
    let sch = scheme_with(r, bw);
    let predict_path = r
        .predict_input
        .as_ref()
        .ok_or_else(|| CliError::validation("gwr-predict requires --predict-input"))?;
    let targets = input::read_dataset(predict_path, &r.x, &r.y, r.geographic)?;
    let tx = target_regressors(&targets, &r.vars)?;
    let dmat = input::resolve_dmat(r.dist_cache.as_deref(), calib.coords(), &r.metric)?;
    let pred = gwr_predict_run(&calib, &sel, &sch, &targets, &tx, dmat.as_ref())?;
    for (t, e) in &pred.failures {
        eprintln!("warning: prediction at target {t} failed: {e}");
    }
    let rows = pred
        .predictions
        .iter()
        .zip(&pred.variances)
        .map(|(&p, &v)| vec![Cell::F(p), Cell::F(v)])
        .collect();
    let table = Table {
        columns: vec!["prediction".to_string(), "prediction_var".to_string()],
        rows,
    };
    emit(r, &table, Some(targets.coords()))
}

fn target_regressors(targets: &SpatialDataset, vars: &[String]) -> CliResult<DMatrix<f64>> {
    let cols: Vec<Vec<f64>> = vars
        .iter()
        .map(|v| targets.column_by_name(v).map_err(CliError::from))
        .collect::<CliResult<_>>()?;
    Ok(DMatrix::from_fn(targets.n(), vars.len(), |i, j| cols[j][i]))
}

fn gwr_predict_run(
    calib: &SpatialDataset,
    sel: &VariableSelection,
    sch: &WeightingScheme,
    targets: &SpatialDataset,
    tx: &DMatrix<f64>,
    dmat: Option<&gw_core::distance::DistanceMatrix>,
) -> CliResult<gw_core::gwr::GwrPrediction> {
    Ok(gw_core::gwr::gwr_predict(
        calib,
        sel,
        sch,
        targets.coords(),
        tx,
        None,
        dmat,
    )?)
}
