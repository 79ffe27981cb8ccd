//! Geographically weighted regression.
//!
//! The local estimator at location i is β̂(i) = (XᵀWᵢX)⁻¹ XᵀWᵢy with Wᵢ the
//! diagonal kernel weights. The hat row at a data location,
//! S(i) = xᵢᵀ(XᵀWᵢX)⁻¹XᵀWᵢ, supplies the fitted value S(i)·y and the model
//! complexity terms trace(S) and trace(SᵀS); the effective number of
//! parameters is 2 trace(S) - trace(SᵀS) and σ̂² = RSS / (n - ENP).
//!
//! Bandwidths are scored either by leave-one-out cross-validation (self
//! weight forced to zero) or by the corrected AIC
//!
//!   AICc = 2 n ln(σ̂_ml) + n ln(2π) + n (n + tr S) / (n - 2 - tr S)
//!
//! with the maximum-likelihood scale σ̂_ml = sqrt(RSS / n).
//!
//! Local cross-product matrices are solved through a symmetric
//! eigendecomposition; a reciprocal condition number below 1e-12 is reported
//! as a singular local fit rather than silently producing noise.
//!
//! Robust variants: the filtered kind drops observations whose externally
//! studentised residuals exceed 3 and refits once at every original
//! location; the iterative kind downweights by the trisquare-like taper
//! w(e) = [1 - (|e|/σ̂ - 2)²]² between 2σ̂ and 3σ̂ (1 inside, 0 outside) and
//! alternates fitting and reweighting until the weights settle.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::distance::{dist_matrix, DistanceMatrix, DistanceMetric};
use crate::error::{GwError, Result};
use crate::spatial::{SpatialDataset, VariableSelection};
use crate::util::five_number_summary;
use crate::weighting::{
    optimize_bandwidth, weights_for, Bandwidth, BandwidthDomain, BandwidthResult, KernelFamily,
    KernelSpec, WeightingScheme,
};

const RCOND_MIN: f64 = 1e-12;

/// One local weighted least-squares solve. `hat_row`, when requested, is the
/// row of the hat matrix over the data points (only meaningful when the
/// target is one of them).
struct LocalSolve {
    beta: DVector<f64>,
    hat_row: Option<Vec<f64>>,
}

fn solve_local(
    x: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
    xi: &[f64],
    location: Option<usize>,
    want_hat: bool,
) -> Result<LocalSolve> {
    let (n, p) = x.shape();
    let mut a = DMatrix::zeros(p, p);
    let mut b = DVector::zeros(p);
    let mut any = false;
    for j in 0..n {
        let wj = w[j];
        if wj == 0.0 {
            continue;
        }
        any = true;
        for r in 0..p {
            let xr = x[(j, r)];
            b[r] += wj * y[j] * xr;
            for c in r..p {
                a[(r, c)] += wj * xr * x[(j, c)];
            }
        }
    }
    if !any {
        return Err(GwError::ZeroWeightSum);
    }
    for r in 0..p {
        for c in r + 1..p {
            a[(c, r)] = a[(r, c)];
        }
    }
    let eig = a.symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    let rcond = if lmax > 0.0 { lmin / lmax } else { 0.0 };
    if !(rcond > RCOND_MIN) {
        return Err(GwError::SingularLocalFit { location, rcond });
    }
    let inv_apply = |v: &DVector<f64>| -> DVector<f64> {
        let mut t = eig.eigenvectors.tr_mul(v);
        for r in 0..p {
            t[r] /= eig.eigenvalues[r];
        }
        &eig.eigenvectors * t
    };
    let beta = inv_apply(&b);
    let hat_row = if want_hat {
        let u = inv_apply(&DVector::from_column_slice(xi));
        let mut row = vec![0.0; n];
        for j in 0..n {
            if w[j] == 0.0 {
                continue;
            }
            let mut dot = 0.0;
            for r in 0..p {
                dot += u[r] * x[(j, r)];
            }
            row[j] = w[j] * dot;
        }
        Some(row)
    } else {
        None
    };
    Ok(LocalSolve { beta, hat_row })
}

/// Local coefficients and hat row at one target. `weights.target_index`
/// flags which data point the target coincides with (if any); the hat row is
/// computed relative to the data design.
pub fn gwr_fit_at(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: &crate::weighting::WeightVector,
    xi: &[f64],
) -> Result<(DVector<f64>, Vec<f64>)> {
    let solved = solve_local(x, y, &weights.weights, xi, weights.target_index, true)?;
    Ok((solved.beta, solved.hat_row.expect("hat row requested")))
}

/// A fitted geographically weighted regression at the data locations.
#[derive(Debug, Clone)]
pub struct GwrFit {
    /// "Intercept" followed by the independent variable names.
    pub names: Vec<String>,
    pub scheme: WeightingScheme,
    /// n × (m+1) local coefficients.
    pub coefficients: DMatrix<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Hat-matrix diagonal; zero at locations excluded from the model
    /// support (robust filtering).
    pub hat_diag: Vec<f64>,
    /// Squared norms of the hat rows, the per-location share of trace(SᵀS).
    pub hat_row_sq_norms: Vec<f64>,
    pub trace_s: f64,
    pub trace_sts: f64,
    pub enp: f64,
    pub rss: f64,
    pub sigma2: f64,
    pub aicc: f64,
    /// Filled when the fit came out of a cross-validated bandwidth search.
    pub cv_score: Option<f64>,
}

pub(crate) struct Design {
    pub(crate) x: DMatrix<f64>,
    pub(crate) y: Vec<f64>,
    pub(crate) names: Vec<String>,
}

pub(crate) fn build_design(ds: &SpatialDataset, selection: &VariableSelection) -> Result<Design> {
    let resolved = selection.resolve(ds)?;
    let dep = resolved.dependent.ok_or(GwError::MissingDependent)?;
    let n = ds.n();
    let m = resolved.independents.len();
    let mut x = DMatrix::zeros(n, m + 1);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for (c, &j) in resolved.independents.iter().enumerate() {
            x[(i, c + 1)] = ds.attrs()[(i, j)];
        }
    }
    let y = ds.column(dep);
    let mut names = Vec::with_capacity(m + 1);
    names.push("Intercept".to_string());
    names.extend(selection.independents.iter().cloned());
    Ok(Design { x, y, names })
}

pub(crate) fn resolve_dmat<'a>(
    ds: &SpatialDataset,
    metric: &DistanceMetric,
    dmat: Option<&'a DistanceMatrix>,
    owned: &'a mut Option<DistanceMatrix>,
) -> Result<&'a DistanceMatrix> {
    match dmat {
        Some(d) => {
            if d.nrows() != ds.n() || d.ncols() != ds.n() {
                return Err(GwError::DimensionMismatch {
                    expected: ds.n(),
                    got: d.nrows().max(d.ncols()),
                    context: "distance matrix vs dataset",
                });
            }
            Ok(d)
        }
        None => {
            *owned = Some(dist_matrix(ds.coords(), None, metric)?);
            Ok(owned.as_ref().unwrap())
        }
    }
}

struct CoreFit {
    coefficients: DMatrix<f64>,
    fitted: Vec<f64>,
    hat_diag: Vec<f64>,
    hat_sq: Vec<f64>,
}

/// Hat-based fit at every data location with optional per-observation weight
/// multipliers (robust weights).
fn fit_all_locations(
    x: &DMatrix<f64>,
    y: &[f64],
    dmat: &DistanceMatrix,
    kernel: &KernelSpec,
    multiplier: Option<&[f64]>,
) -> Result<CoreFit> {
    let (n, p) = x.shape();
    let per: Vec<Result<(Vec<f64>, f64, f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, f64, f64, f64)> {
            let mut wv =
                weights_for(dmat.row(i), kernel, Some(i)).map_err(|e| e.at("gwr", i))?;
            if let Some(mul) = multiplier {
                for (w, m) in wv.weights.iter_mut().zip(mul) {
                    *w *= m;
                }
            }
            let xi: Vec<f64> = x.row(i).iter().copied().collect();
            let solved = solve_local(x, y, &wv.weights, &xi, Some(i), true)
                .map_err(|e| e.at("gwr", i))?;
            let hat = solved.hat_row.expect("hat row requested");
            let fitted: f64 = hat.iter().zip(y).map(|(h, y)| h * y).sum();
            let hd = hat[i];
            let hsq: f64 = hat.iter().map(|h| h * h).sum();
            Ok((solved.beta.iter().copied().collect(), fitted, hd, hsq))
        })
        .collect();
    // first failing location wins so diagnostics do not depend on thread
    // scheduling
    let per: Vec<(Vec<f64>, f64, f64, f64)> = per.into_iter().collect::<Result<Vec<_>>>()?;
    let mut coefficients = DMatrix::zeros(n, p);
    let mut fitted = Vec::with_capacity(n);
    let mut hat_diag = Vec::with_capacity(n);
    let mut hat_sq = Vec::with_capacity(n);
    for (i, (beta, f, hd, hsq)) in per.into_iter().enumerate() {
        for (c, b) in beta.into_iter().enumerate() {
            coefficients[(i, c)] = b;
        }
        fitted.push(f);
        hat_diag.push(hd);
        hat_sq.push(hsq);
    }
    Ok(CoreFit {
        coefficients,
        fitted,
        hat_diag,
        hat_sq,
    })
}

fn aicc_from(rss: f64, n: usize, trace_s: f64) -> Result<f64> {
    let nf = n as f64;
    let dof = nf - 2.0 - trace_s;
    if dof <= 0.0 {
        return Err(GwError::AiccUndefined { trace_s, n });
    }
    let sigma_ml = (rss / nf).sqrt();
    Ok(2.0 * nf * sigma_ml.ln() + nf * (2.0 * std::f64::consts::PI).ln()
        + nf * (nf + trace_s) / dof)
}

fn assemble_fit(
    core: CoreFit,
    y: &[f64],
    names: Vec<String>,
    scheme: WeightingScheme,
) -> Result<GwrFit> {
    let n = y.len();
    let residuals: Vec<f64> = y.iter().zip(&core.fitted).map(|(y, f)| y - f).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let trace_s: f64 = core.hat_diag.iter().sum();
    let trace_sts: f64 = core.hat_sq.iter().sum();
    let enp = 2.0 * trace_s - trace_sts;
    let sigma2 = rss / (n as f64 - enp);
    let aicc = aicc_from(rss, n, trace_s)?;
    Ok(GwrFit {
        names,
        scheme,
        coefficients: core.coefficients,
        fitted: core.fitted,
        residuals,
        hat_diag: core.hat_diag,
        hat_row_sq_norms: core.hat_sq,
        trace_s,
        trace_sts,
        enp,
        rss,
        sigma2,
        aicc,
        cv_score: None,
    })
}

pub(crate) fn check_size(n: usize, m: usize) -> Result<()> {
    if n <= m + 2 {
        return Err(GwError::InsufficientLocalData {
            needed: m + 3,
            got: n,
        });
    }
    Ok(())
}

/// Basic geographically weighted regression at every data location.
pub fn gwr_basic(
    ds: &SpatialDataset,
    selection: &VariableSelection,
    scheme: &WeightingScheme,
    dmat: Option<&DistanceMatrix>,
) -> Result<GwrFit> {
    let design = build_design(ds, selection)?;
    check_size(ds.n(), selection.independents.len())?;
    let mut owned = None;
    let dmat = resolve_dmat(ds, &scheme.distance, dmat, &mut owned)?;
    let core = fit_all_locations(&design.x, &design.y, dmat, &scheme.kernel, None)?;
    assemble_fit(core, &design.y, design.names, *scheme)
}

/// Leave-one-out cross-validation score Σ (yᵢ - ŷ₍₋ᵢ₎)². Local failures
/// (singular fits, empty windows) make the score +inf so bandwidth searches
/// can move past them.
pub fn gwr_cv_score(
    ds: &SpatialDataset,
    selection: &VariableSelection,
    scheme: &WeightingScheme,
    dmat: Option<&DistanceMatrix>,
) -> Result<f64> {
    let design = build_design(ds, selection)?;
    let mut owned = None;
    let dmat = resolve_dmat(ds, &scheme.distance, dmat, &mut owned)?;
    let n = ds.n();
    let parts: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let Ok(mut wv) = weights_for(dmat.row(i), &scheme.kernel, Some(i)) else {
                return f64::INFINITY;
            };
            wv.weights[i] = 0.0;
            let xi: Vec<f64> = design.x.row(i).iter().copied().collect();
            match solve_local(&design.x, &design.y, &wv.weights, &xi, Some(i), false) {
                Ok(s) => {
                    let pred: f64 = design
                        .x
                        .row(i)
                        .iter()
                        .zip(s.beta.iter())
                        .map(|(x, b)| x * b)
                        .sum();
                    let e = design.y[i] - pred;
                    e * e
                }
                Err(_) => f64::INFINITY,
            }
        })
        .collect();
    Ok(parts.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionCriterion {
    Cv,
    Aicc,
}

/// Bandwidth selection for the regression under the chosen criterion.
pub fn gwr_bandwidth(
    ds: &SpatialDataset,
    selection: &VariableSelection,
    family: KernelFamily,
    metric: &DistanceMetric,
    criterion: SelectionCriterion,
    domain: Option<BandwidthDomain>,
    dmat: Option<&DistanceMatrix>,
) -> Result<BandwidthResult> {
    build_design(ds, selection)?;
    check_size(ds.n(), selection.independents.len())?;
    let mut owned = None;
    let dmat = resolve_dmat(ds, metric, dmat, &mut owned)?;
    let domain = match domain {
        Some(d) => d,
        None => BandwidthDomain::adaptive_default(ds.n(), selection.independents.len()),
    };
    optimize_bandwidth(
        |b| {
            let scheme = WeightingScheme {
                kernel: KernelSpec::new(family, *b),
                distance: *metric,
            };
            match criterion {
                SelectionCriterion::Cv => {
                    gwr_cv_score(ds, selection, &scheme, Some(dmat)).unwrap_or(f64::INFINITY)
                }
                SelectionCriterion::Aicc => gwr_basic(ds, selection, &scheme, Some(dmat))
                    .map(|f| f.aicc)
                    .unwrap_or(f64::INFINITY),
            }
        },
        &domain,
    )
}

/// Externally studentised residuals rᵢ = eᵢ / (σ̂₍₋ᵢ₎ √qᵢᵢ), with
/// qᵢᵢ = diag[(I-S)(I-S)ᵀ] = 1 - 2 Sᵢᵢ + ‖Sᵢ·‖² and the leave-one-out scale
/// from the identity σ̂₍₋ᵢ₎² = (RSS - eᵢ²/qᵢᵢ) / (n - ENP - 1).
pub fn studentised_residuals(fit: &GwrFit) -> Result<Vec<f64>> {
    let n = fit.residuals.len();
    let dof = n as f64 - fit.enp - 1.0;
    if dof <= 0.0 {
        return Err(GwError::InsufficientLocalData {
            needed: (fit.enp + 2.0).ceil() as usize,
            got: n,
        });
    }
    Ok((0..n)
        .map(|i| {
            let e = fit.residuals[i];
            let q = 1.0 - 2.0 * fit.hat_diag[i] + fit.hat_row_sq_norms[i];
            if q <= 0.0 {
                // the fit interpolates this observation; nothing to flag
                return 0.0;
            }
            let s2 = (fit.rss - e * e / q) / dof;
            if s2 <= 0.0 {
                return f64::INFINITY * e.signum();
            }
            e / (s2.sqrt() * q.sqrt())
        })
        .collect())
}

/// A robust fit: the final fit plus the per-observation robust weights that
/// produced it. For the filtered variant the weights are 0/1 and `filtered`
/// lists the dropped observations; for the iterative variant they are the
/// converged taper weights.
#[derive(Debug, Clone)]
pub struct RobustGwrFit {
    pub fit: GwrFit,
    pub robust_weights: Vec<f64>,
    pub filtered: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
}

const STUDENTISED_CUTOFF: f64 = 3.0;

/// Filtered robust regression: fit, flag |studentised residual| > 3, drop
/// those observations, and refit once at every original location. The
/// model-level diagnostics (trace, ENP, σ², AICc) describe the refit on the
/// kept observations; coefficients, fitted values, and residuals cover all
/// original locations.
pub fn gwr_robust_filtered(
    ds: &SpatialDataset,
    selection: &VariableSelection,
    scheme: &WeightingScheme,
    dmat: Option<&DistanceMatrix>,
) -> Result<RobustGwrFit> {
    let design = build_design(ds, selection)?;
    let m = selection.independents.len();
    check_size(ds.n(), m)?;
    let mut owned = None;
    let dmat = resolve_dmat(ds, &scheme.distance, dmat, &mut owned)?;
    let initial = {
        let core = fit_all_locations(&design.x, &design.y, dmat, &scheme.kernel, None)?;
        assemble_fit(core, &design.y, design.names.clone(), *scheme)?
    };
    let r = studentised_residuals(&initial)?;
    let n = ds.n();
    let keep: Vec<usize> = (0..n)
        .filter(|&i| !(r[i].abs() > STUDENTISED_CUTOFF))
        .collect();
    let dropped: Vec<usize> = (0..n)
        .filter(|&i| r[i].abs() > STUDENTISED_CUTOFF)
        .collect();
    if keep.len() < m + 3 {
        return Err(GwError::TooFewAfterFilter {
            kept: keep.len(),
            needed: m + 3,
        });
    }
    if dropped.is_empty() {
        return Ok(RobustGwrFit {
            fit: initial,
            robust_weights: vec![1.0; n],
            filtered: dropped,
            converged: true,
            iterations: 1,
        });
    }
    let nk = keep.len();
    let p = m + 1;
    let xk = DMatrix::from_fn(nk, p, |r, c| design.x[(keep[r], c)]);
    let yk: Vec<f64> = keep.iter().map(|&i| design.y[i]).collect();
    // adaptive neighbour counts cannot exceed the kept row count
    let kernel = match scheme.kernel.bandwidth {
        Bandwidth::Adaptive(nn) if nn > nk => scheme.kernel.with_bandwidth(Bandwidth::Adaptive(nk)),
        _ => scheme.kernel,
    };
    let kept_pos: Vec<Option<usize>> = {
        let mut map = vec![None; n];
        for (k, &i) in keep.iter().enumerate() {
            map[i] = Some(k);
        }
        map
    };
    let per: Vec<Result<(Vec<f64>, f64, f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, f64, f64, f64)> {
            let row: Vec<f64> = keep.iter().map(|&j| dmat.get(i, j)).collect();
            let wv = weights_for(&row, &kernel, kept_pos[i]).map_err(|e| e.at("gwr-robust", i))?;
            let xi: Vec<f64> = design.x.row(i).iter().copied().collect();
            let solved = solve_local(&xk, &yk, &wv.weights, &xi, Some(i), true)
                .map_err(|e| e.at("gwr-robust", i))?;
            let hat = solved.hat_row.expect("hat row requested");
            let fitted: f64 = hat.iter().zip(&yk).map(|(h, y)| h * y).sum();
            let (hd, hsq) = match kept_pos[i] {
                Some(k) => (hat[k], hat.iter().map(|h| h * h).sum()),
                None => (0.0, 0.0),
            };
            Ok((solved.beta.iter().copied().collect(), fitted, hd, hsq))
        })
        .collect();
    let per: Vec<(Vec<f64>, f64, f64, f64)> = per.into_iter().collect::<Result<Vec<_>>>()?;
    let mut coefficients = DMatrix::zeros(n, p);
    let mut fitted = vec![0.0; n];
    let mut hat_diag = vec![0.0; n];
    let mut hat_sq = vec![0.0; n];
    for (i, (beta, f, hd, hsq)) in per.into_iter().enumerate() {
        for (c, b) in beta.into_iter().enumerate() {
            coefficients[(i, c)] = b;
        }
        fitted[i] = f;
        hat_diag[i] = hd;
        hat_sq[i] = hsq;
    }
    let residuals: Vec<f64> = design
        .y
        .iter()
        .zip(&fitted)
        .map(|(y, f)| y - f)
        .collect();
    // model diagnostics come from the kept-observation hat matrix
    let rss: f64 = keep.iter().map(|&i| residuals[i] * residuals[i]).sum();
    let trace_s: f64 = hat_diag.iter().sum();
    let trace_sts: f64 = hat_sq.iter().sum();
    let enp = 2.0 * trace_s - trace_sts;
    let sigma2 = rss / (nk as f64 - enp);
    let aicc = aicc_from(rss, nk, trace_s)?;
    let mut robust_weights = vec![1.0; n];
    for &i in &dropped {
        robust_weights[i] = 0.0;
    }
    Ok(RobustGwrFit {
        fit: GwrFit {
            names: design.names,
            scheme: *scheme,
            coefficients,
            fitted,
            residuals,
            hat_diag,
            hat_row_sq_norms: hat_sq,
            trace_s,
            trace_sts,
            enp,
            rss,
            sigma2,
            aicc,
            cv_score: None,
        },
        robust_weights,
        filtered: dropped,
        converged: true,
        iterations: 1,
    })
}

const ITERATIVE_MAX_ITER: usize = 20;
const ITERATIVE_TOL: f64 = 1e-5;

fn taper_weight(u: f64) -> f64 {
    let u = u.abs();
    if u <= 2.0 {
        1.0
    } else if u < 3.0 {
        let t = 1.0 - (u - 2.0) * (u - 2.0);
        t * t
    } else {
        0.0
    }
}

/// Iterative robust regression: alternate fitting (kernel weights times
/// robust weights) and reweighting from the scaled residuals |e|/σ̂ until the
/// largest weight change falls below 1e-5 or 20 iterations pass. Failure to
/// converge is reported in the flags, not as an error.
pub fn gwr_robust_iterative(
    ds: &SpatialDataset,
    selection: &VariableSelection,
    scheme: &WeightingScheme,
    dmat: Option<&DistanceMatrix>,
) -> Result<RobustGwrFit> {
    let design = build_design(ds, selection)?;
    check_size(ds.n(), selection.independents.len())?;
    let mut owned = None;
    let dmat = resolve_dmat(ds, &scheme.distance, dmat, &mut owned)?;
    let n = ds.n();
    let mut rw = vec![1.0; n];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let core = fit_all_locations(&design.x, &design.y, dmat, &scheme.kernel, Some(&rw))?;
        let fit = assemble_fit(core, &design.y, design.names.clone(), *scheme)?;
        let sigma = fit.sigma2.sqrt();
        let next: Vec<f64> = fit
            .residuals
            .iter()
            .map(|e| taper_weight(e / sigma))
            .collect();
        let delta = rw
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if delta < ITERATIVE_TOL {
            return Ok(RobustGwrFit {
                fit,
                robust_weights: next,
                filtered: Vec::new(),
                converged: true,
                iterations,
            });
        }
        if iterations >= ITERATIVE_MAX_ITER {
            return Ok(RobustGwrFit {
                fit,
                robust_weights: next,
                filtered: Vec::new(),
                converged: false,
                iterations,
            });
        }
        rw = next;
    }
}

/// One evaluated model in a stepwise search.
#[derive(Debug, Clone, PartialEq)]
pub struct StepwiseModel {
    /// 1-based round in which the model was evaluated.
    pub round: usize,
    pub variables: Vec<String>,
    /// +inf when the fit failed (recorded, never selected).
    pub aicc: f64,
}

/// Full record of a forward stepwise specification search.
#[derive(Debug, Clone, PartialEq)]
pub struct StepwiseReport {
    /// Evaluation order, or within-round descending AICc when `sorted`.
    pub models: Vec<StepwiseModel>,
    pub inclusion_order: Vec<String>,
    pub sorted: bool,
}

impl StepwiseReport {
    /// Copy with each round's models ordered by descending AICc, so every
    /// round ends on the model that was carried forward.
    pub fn sorted_view(&self) -> StepwiseReport {
        let mut models = self.models.clone();
        models.sort_by(|a, b| {
            a.round
                .cmp(&b.round)
                .then(b.aicc.partial_cmp(&a.aicc).unwrap_or(std::cmp::Ordering::Equal))
        });
        StepwiseReport {
            models,
            inclusion_order: self.inclusion_order.clone(),
            sorted: true,
        }
    }
}

/// Forward stepwise selection under a fixed weighting scheme: each round
/// tries every remaining candidate appended to the running model, keeps the
/// lowest finite AICc (ties to the earlier candidate), and repeats until all
/// candidates are included. With m candidates, m(m+1)/2 models are fitted.
pub fn stepwise_select(
    ds: &SpatialDataset,
    dependent: &str,
    candidates: &[String],
    scheme: &WeightingScheme,
    dmat: Option<&DistanceMatrix>,
) -> Result<StepwiseReport> {
    if candidates.is_empty() {
        return Err(GwError::EmptyDataset("no candidate variables"));
    }
    let mut owned = None;
    let dmat = resolve_dmat(ds, &scheme.distance, dmat, &mut owned)?;
    let mut remaining: Vec<String> = candidates.to_vec();
    let mut included: Vec<String> = Vec::new();
    let mut models = Vec::new();
    let mut round = 0;
    while !remaining.is_empty() {
        round += 1;
        let mut best: Option<(usize, f64)> = None;
        for (ci, cand) in remaining.iter().enumerate() {
            let mut vars = included.clone();
            vars.push(cand.clone());
            let selection = VariableSelection {
                dependent: Some(dependent.to_string()),
                independents: vars.clone(),
            };
            let aicc = gwr_basic(ds, &selection, scheme, Some(dmat))
                .map(|f| f.aicc)
                .unwrap_or(f64::INFINITY);
            models.push(StepwiseModel {
                round,
                variables: vars,
                aicc,
            });
            // +inf marks a failed fit and is never selected; -inf is a
            // legitimate minimum (an exact interpolating fit).
            if !aicc.is_nan() && aicc < f64::INFINITY && best.map_or(true, |(_, s)| aicc < s) {
                best = Some((ci, aicc));
            }
        }
        match best {
            Some((ci, _)) => {
                let chosen = remaining.remove(ci);
                included.push(chosen);
            }
            // every candidate failed this round; stop with what we have
            None => break,
        }
    }
    Ok(StepwiseReport {
        models,
        inclusion_order: included,
        sorted: false,
    })
}

/// Out-of-sample predictions with prediction variances.
#[derive(Debug, Clone)]
pub struct GwrPrediction {
    pub predictions: Vec<f64>,
    pub variances: Vec<f64>,
    /// r × (m+1) local coefficients at the prediction points.
    pub coefficients: DMatrix<f64>,
    /// Calibration error variance RSS / (n - ENP).
    pub sigma2: f64,
    /// Targets whose local fit was singular; their entries are NaN.
    pub failures: Vec<(usize, GwError)>,
}

/// Predicts at arbitrary points: ŷ(s) = x(s)ᵀβ̂(s) with variance
/// σ̂² [1 + S(s)], S(s) = x(s)ᵀ(XᵀWX)⁻¹XᵀW²X(XᵀWX)⁻¹x(s). `target_x` holds
/// the independent variables (no intercept column) in selection order.
pub fn gwr_predict(
    ds: &SpatialDataset,
    selection: &VariableSelection,
    scheme: &WeightingScheme,
    target_coords: &[[f64; 2]],
    target_x: &DMatrix<f64>,
    dmat_targets: Option<&DistanceMatrix>,
    dmat_calib: Option<&DistanceMatrix>,
) -> Result<GwrPrediction> {
    let design = build_design(ds, selection)?;
    let m = selection.independents.len();
    check_size(ds.n(), m)?;
    let r = target_coords.len();
    if target_x.nrows() != r || target_x.ncols() != m {
        return Err(GwError::DimensionMismatch {
            expected: r * m,
            got: target_x.nrows() * target_x.ncols(),
            context: "target regressors vs target points",
        });
    }
    let mut owned_c = None;
    let dmat_c = resolve_dmat(ds, &scheme.distance, dmat_calib, &mut owned_c)?;
    let owned_t;
    let dmat_t = match dmat_targets {
        Some(d) => {
            if d.nrows() != r || d.ncols() != ds.n() {
                return Err(GwError::DimensionMismatch {
                    expected: r,
                    got: d.nrows(),
                    context: "target distance matrix vs target points",
                });
            }
            d
        }
        None => {
            owned_t = dist_matrix(ds.coords(), Some(target_coords), &scheme.distance)?;
            &owned_t
        }
    };
    let calib = {
        let core = fit_all_locations(&design.x, &design.y, dmat_c, &scheme.kernel, None)?;
        assemble_fit(core, &design.y, design.names.clone(), *scheme)?
    };
    let sigma2 = calib.sigma2;
    let p = m + 1;
    let per: Vec<std::result::Result<(Vec<f64>, f64, f64), GwError>> = (0..r)
        .into_par_iter()
        .map(|t| {
            let mut xi = vec![1.0; p];
            for c in 0..m {
                xi[c + 1] = target_x[(t, c)];
            }
            let wv = weights_for(dmat_t.row(t), &scheme.kernel, None)?;
            let solved = solve_local(&design.x, &design.y, &wv.weights, &xi, None, true)?;
            let hat = solved.hat_row.expect("hat row requested");
            let s_term: f64 = hat.iter().map(|h| h * h).sum();
            let pred: f64 = xi.iter().zip(solved.beta.iter()).map(|(x, b)| x * b).sum();
            Ok((
                solved.beta.iter().copied().collect(),
                pred,
                sigma2 * (1.0 + s_term),
            ))
        })
        .collect();
    let mut predictions = vec![f64::NAN; r];
    let mut variances = vec![f64::NAN; r];
    let mut coefficients = DMatrix::from_element(r, p, f64::NAN);
    let mut failures = Vec::new();
    for (t, item) in per.into_iter().enumerate() {
        match item {
            Ok((beta, pred, var)) => {
                for (c, b) in beta.into_iter().enumerate() {
                    coefficients[(t, c)] = b;
                }
                predictions[t] = pred;
                variances[t] = var;
            }
            Err(e) => failures.push((t, e)),
        }
    }
    Ok(GwrPrediction {
        predictions,
        variances,
        coefficients,
        sigma2,
        failures,
    })
}

/// Hold-out accuracy summary: root mean square prediction error, mean
/// absolute prediction error, and the mean and sample standard deviation of
/// the standardised prediction errors (y - ŷ) / √variance.
pub fn prediction_metrics(y_true: &[f64], predictions: &[f64], variances: &[f64]) -> [f64; 4] {
    let n = y_true.len() as f64;
    let mut sq = 0.0;
    let mut ab = 0.0;
    let mut zs = Vec::with_capacity(y_true.len());
    for i in 0..y_true.len() {
        let e = y_true[i] - predictions[i];
        sq += e * e;
        ab += e.abs();
        zs.push(e / variances[i].sqrt());
    }
    let zbar = zs.iter().sum::<f64>() / n;
    let zvar = zs.iter().map(|z| (z - zbar).powi(2)).sum::<f64>() / (n - 1.0);
    [(sq / n).sqrt(), ab / n, zbar, zvar.sqrt()]
}

/// Whole-fit report: five-number summaries of the local coefficients plus
/// the global diagnostics.
#[derive(Debug, Clone)]
pub struct DiagnosticsReport {
    pub coefficient_summary: Vec<(String, [f64; 5])>,
    pub n: usize,
    pub trace_s: f64,
    pub enp: f64,
    pub rss: f64,
    pub sigma2: f64,
    pub aicc: f64,
    pub r_squared: f64,
}

pub fn gwr_diagnostics_report(fit: &GwrFit) -> DiagnosticsReport {
    let n = fit.residuals.len();
    let p = fit.names.len();
    let coefficient_summary = (0..p)
        .map(|c| {
            let col: Vec<f64> = (0..n).map(|i| fit.coefficients[(i, c)]).collect();
            (fit.names[c].clone(), five_number_summary(&col))
        })
        .collect();
    let y: Vec<f64> = fit
        .fitted
        .iter()
        .zip(&fit.residuals)
        .map(|(f, e)| f + e)
        .collect();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    DiagnosticsReport {
        coefficient_summary,
        n,
        trace_s: fit.trace_s,
        enp: fit.enp,
        rss: fit.rss,
        sigma2: fit.sigma2,
        aicc: fit.aicc,
        r_squared: 1.0 - fit.rss / tss,
    }
}

impl std::fmt::Display for DiagnosticsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Coefficient summaries (min, Q1, median, Q3, max):")?;
        for (name, s) in &self.coefficient_summary {
            writeln!(
                f,
                "  {name:<16} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
                s[0], s[1], s[2], s[3], s[4]
            )?;
        }
        writeln!(f, "Observations:            {}", self.n)?;
        writeln!(f, "Trace of hat matrix:     {:.6}", self.trace_s)?;
        writeln!(f, "Effective parameters:    {:.6}", self.enp)?;
        writeln!(f, "Residual sum of squares: {:.6}", self.rss)?;
        writeln!(f, "Sigma^2:                 {:.6}", self.sigma2)?;
        writeln!(f, "AICc:                    {:.6}", self.aicc)?;
        writeln!(f, "R-squared:               {:.6}", self.r_squared)
    }
}
