//! Local collinearity diagnostics and the locally compensated ridge model.
//!
//! Collinearity is judged at the same spatial scale as the local
//! regressions: at each location the kernel weights define local predictor
//! correlations, variance inflation factors (diagonal of the inverse local
//! correlation matrix), and a local condition number. Condition numbers
//! follow the scaled-design convention: the columns of √Wᵢ·X are scaled to
//! unit length and the condition number is the ratio of the largest to the
//! smallest singular value. Variance-decomposition proportions come from
//! the same decomposition: the share of coefficient j's variance carried by
//! singular value k is (v_jk/σ_k)² renormalised over k.
//!
//! The compensated model adds a local ridge λᵢ to the scaled cross-product
//! matrix wherever the local condition number exceeds a threshold κ, with λ
//! sized from the spectrum so the adjusted condition number lands exactly on
//! κ. The solve runs in the scaled coordinates where the spectrum was
//! measured and the coefficients are divided by the column norms afterwards,
//! so an unadjusted fit (λ = 0 everywhere) reproduces the basic estimator.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::distance::{DistanceMatrix, DistanceMetric};
use crate::error::{GwError, Result};
use crate::gwr::{build_design, check_size, resolve_dmat};
use crate::gwss::gw_pearson;
use crate::spatial::{SpatialDataset, VariableSelection};
use crate::util::five_number_summary;
use crate::weighting::{
    optimize_bandwidth, weights_for, Bandwidth, BandwidthDomain, BandwidthResult, KernelFamily,
    KernelSpec, WeightingScheme,
};

/// Rule-of-thumb flag thresholds.
pub const CORRELATION_FLAG_THRESHOLD: f64 = 0.8;
pub const VIF_FLAG_THRESHOLD: f64 = 10.0;
pub const VDP_FLAG_THRESHOLD: f64 = 0.5;
pub const CN_FLAG_THRESHOLD: f64 = 30.0;

const RCOND_MIN: f64 = 1e-12;

/// Scales each column of `design` to unit Euclidean norm in place, returning
/// the original norms.
fn unit_norm_columns(
    design: &mut DMatrix<f64>,
    location: Option<usize>,
) -> Result<Vec<f64>> {
    let (n, p) = design.shape();
    let mut norms = Vec::with_capacity(p);
    for c in 0..p {
        let norm = design.column(c).norm();
        if norm == 0.0 {
            return Err(GwError::ZeroNormColumn { col: c, location });
        }
        for r in 0..n {
            design[(r, c)] /= norm;
        }
        norms.push(norm);
    }
    Ok(norms)
}

/// Condition number of a design matrix after scaling its columns to unit
/// length: the ratio of the largest to the smallest singular value.
pub fn bkw_condition_number(design: &DMatrix<f64>) -> Result<f64> {
    let mut scaled = design.clone();
    unit_norm_columns(&mut scaled, None)?;
    let sv = scaled.svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(smax / smin)
}

/// Per-location rule-of-thumb indicators.
#[derive(Debug, Clone)]
pub struct CollinFlags {
    /// Some |pairwise correlation| exceeds 0.8.
    pub correlation: Vec<bool>,
    /// Some variance inflation factor exceeds 10.
    pub vif: Vec<bool>,
    /// Some variance-decomposition proportion on the smallest singular
    /// value exceeds 0.5.
    pub vdp: Vec<bool>,
    /// The local condition number exceeds 30.
    pub cn: Vec<bool>,
}

/// Local collinearity diagnostics at every data location.
#[derive(Debug, Clone)]
pub struct CollinDiagnostics {
    /// Independent variable names (length m).
    pub names: Vec<String>,
    /// Coefficient names: "Intercept" then the independents (length m+1).
    pub coef_names: Vec<String>,
    /// Predictor pairs in selection order, first index before second.
    pub pairs: Vec<(String, String)>,
    pub scheme: WeightingScheme,
    /// n × pairs local correlations between predictor pairs.
    pub local_correlations: DMatrix<f64>,
    /// n × m local variance inflation factors.
    pub local_vifs: DMatrix<f64>,
    /// Per location an (m+1) × (m+1) matrix of variance-decomposition
    /// proportions: rows follow the singular values in descending order,
    /// columns the coefficients; each column sums to 1.
    pub local_vdps: Vec<DMatrix<f64>>,
    /// Local condition numbers of the column-scaled weighted design.
    pub local_cn: Vec<f64>,
    pub flags: CollinFlags,
}

/// Variance-decomposition proportions from the singular values and the V
/// factor (rows of `vt` follow the singular values).
fn vdp_matrix(s: &[f64], vt: &DMatrix<f64>) -> DMatrix<f64> {
    let p = s.len();
    let mut vdp = DMatrix::zeros(p, p);
    for j in 0..p {
        let mut denom = 0.0;
        for k in 0..p {
            denom += (vt[(k, j)] / s[k]).powi(2);
        }
        for k in 0..p {
            vdp[(k, j)] = (vt[(k, j)] / s[k]).powi(2) / denom;
        }
    }
    vdp
}

/// Local collinearity diagnostics under the given weighting scheme.
pub fn collin_diagnostics(
    ds: &SpatialDataset,
    selection: &VariableSelection,
    scheme: &WeightingScheme,
    dmat: Option<&DistanceMatrix>,
) -> Result<CollinDiagnostics> {
    let design = build_design(ds, selection)?;
    let m = selection.independents.len();
    check_size(ds.n(), m)?;
    let mut owned = None;
    let dmat = resolve_dmat(ds, &scheme.distance, dmat, &mut owned)?;
    let n = ds.n();
    let p = m + 1;
    let mut pair_idx = Vec::new();
    let mut pairs = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            pair_idx.push((a, b));
            pairs.push((
                selection.independents[a].clone(),
                selection.independents[b].clone(),
            ));
        }
    }
    let cols: Vec<Vec<f64>> = (0..m)
        .map(|c| (0..n).map(|r| design.x[(r, c + 1)]).collect())
        .collect();
    let per: Vec<Result<(Vec<f64>, Vec<f64>, DMatrix<f64>, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, Vec<f64>, DMatrix<f64>, f64)> {
            let wv = weights_for(dmat.row(i), &scheme.kernel, Some(i))
                .map_err(|e| e.at("collin", i))?;
            let w = &wv.weights;
            let mut corr = Vec::with_capacity(pair_idx.len());
            for &(a, b) in &pair_idx {
                corr.push(gw_pearson(&cols[a], &cols[b], w).map_err(|e| e.at("collin", i))?);
            }
            // local weighted correlation matrix of the predictors
            let vifs = if m > 0 {
                let mut rmat = DMatrix::identity(m, m);
                for (pi, &(a, b)) in pair_idx.iter().enumerate() {
                    rmat[(a, b)] = corr[pi];
                    rmat[(b, a)] = corr[pi];
                }
                let eig = rmat.symmetric_eigen();
                let lmax = eig.eigenvalues.max();
                let lmin = eig.eigenvalues.min();
                let rcond = if lmax > 0.0 { lmin / lmax } else { 0.0 };
                if !(rcond > RCOND_MIN) {
                    return Err(GwError::SingularCorrelationMatrix { location: Some(i) }
                        .at("collin", i));
                }
                (0..m)
                    .map(|j| {
                        (0..m)
                            .map(|k| eig.eigenvectors[(j, k)].powi(2) / eig.eigenvalues[k])
                            .sum()
                    })
                    .collect()
            } else {
                Vec::new()
            };
            // scaled weighted design
            let mut b = DMatrix::zeros(n, p);
            for r in 0..n {
                if w[r] == 0.0 {
                    continue;
                }
                let sw = w[r].sqrt();
                for c in 0..p {
                    b[(r, c)] = sw * design.x[(r, c)];
                }
            }
            unit_norm_columns(&mut b, Some(i)).map_err(|e| e.at("collin", i))?;
            let svd = b.svd(false, true);
            let s: Vec<f64> = svd.singular_values.iter().copied().collect();
            let vt = svd.v_t.expect("v_t requested");
            let cn = s[0] / s[p - 1];
            let vdp = vdp_matrix(&s, &vt);
            Ok((corr, vifs, vdp, cn))
        })
        .collect();
    let per: Vec<(Vec<f64>, Vec<f64>, DMatrix<f64>, f64)> =
        per.into_iter().collect::<Result<Vec<_>>>()?;

    let mut local_correlations = DMatrix::zeros(n, pair_idx.len());
    let mut local_vifs = DMatrix::zeros(n, m);
    let mut local_vdps = Vec::with_capacity(n);
    let mut local_cn = Vec::with_capacity(n);
    let mut flags = CollinFlags {
        correlation: Vec::with_capacity(n),
        vif: Vec::with_capacity(n),
        vdp: Vec::with_capacity(n),
        cn: Vec::with_capacity(n),
    };
    for (i, (corr, vifs, vdp, cn)) in per.into_iter().enumerate() {
        flags
            .correlation
            .push(corr.iter().any(|c| c.abs() > CORRELATION_FLAG_THRESHOLD));
        flags.vif.push(vifs.iter().any(|v| *v > VIF_FLAG_THRESHOLD));
        flags
            .vdp
            .push((0..p).any(|j| vdp[(p - 1, j)] > VDP_FLAG_THRESHOLD));
        flags.cn.push(cn > CN_FLAG_THRESHOLD);
        for (c, v) in corr.into_iter().enumerate() {
            local_correlations[(i, c)] = v;
        }
        for (c, v) in vifs.into_iter().enumerate() {
            local_vifs[(i, c)] = v;
        }
        local_vdps.push(vdp);
        local_cn.push(cn);
    }
    Ok(CollinDiagnostics {
        names: selection.independents.clone(),
        coef_names: design.names,
        pairs,
        scheme: *scheme,
        local_correlations,
        local_vifs,
        local_vdps,
        local_cn,
        flags,
    })
}

/// Ridge term that moves the eigenvalue ratio of a cross-product matrix to
/// exactly `kappa`: λ = max(0, (ε₁ - ε_p)/(κ - 1) - ε_p) for eigenvalues
/// given in descending order. Returns 0 when the ratio already satisfies
/// the target.
pub fn ridge_for_target_cn(eigenvalues: &[f64], kappa: f64) -> f64 {
    let e1 = eigenvalues[0];
    let ep = eigenvalues[eigenvalues.len() - 1];
    ((e1 - ep) / (kappa - 1.0) - ep).max(0.0)
}

/// A locally compensated ridge fit.
#[derive(Debug, Clone)]
pub struct LcrFit {
    /// "Intercept" followed by the independent variable names.
    pub names: Vec<String>,
    pub scheme: WeightingScheme,
    pub adjusted: bool,
    /// Condition-number threshold κ the adjustment targets.
    pub cn_thresh: f64,
    /// n × (m+1) local coefficients in original variable units.
    pub coefficients: DMatrix<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Condition numbers before any adjustment.
    pub local_cn: Vec<f64>,
    /// Ridge terms actually applied (zero wherever CN ≤ κ or unadjusted).
    pub local_lambda: Vec<f64>,
}

struct LcrLocal {
    beta: DVector<f64>,
    cn: f64,
    lambda: f64,
}

/// One compensated solve: scale the weighted design to unit columns, read
/// the condition number off its singular values, size λ from the squared
/// spectrum so the adjusted condition number equals `cn_thresh`, solve the
/// augmented system in scaled coordinates, and undo the column scaling.
fn lcr_solve(
    x: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
    adjust: bool,
    cn_thresh: f64,
    location: Option<usize>,
) -> Result<LcrLocal> {
    let (n, p) = x.shape();
    let mut b = DMatrix::zeros(n, p);
    let mut ty = DVector::zeros(n);
    let mut any = false;
    for r in 0..n {
        if w[r] == 0.0 {
            continue;
        }
        any = true;
        let sw = w[r].sqrt();
        for c in 0..p {
            b[(r, c)] = sw * x[(r, c)];
        }
        ty[r] = sw * y[r];
    }
    if !any {
        return Err(GwError::ZeroWeightSum);
    }
    let norms = unit_norm_columns(&mut b, location)?;
    let svd = b.svd(true, true);
    let s = &svd.singular_values;
    let smax = s[0];
    let smin = s[p - 1];
    let cn = smax / smin;
    let lambda = if adjust && cn > cn_thresh {
        let eigs: Vec<f64> = s.iter().map(|v| v * v).collect();
        // the squared singular values are the cross-product eigenvalues, so
        // the target ratio there is κ²
        ridge_for_target_cn(&eigs, cn_thresh * cn_thresh)
    } else {
        0.0
    };
    let rcond = (smin * smin + lambda) / (smax * smax + lambda);
    if !(rcond > RCOND_MIN) {
        return Err(GwError::SingularLocalFit { location, rcond });
    }
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let uty = u.tr_mul(&ty);
    let mut z = DVector::zeros(p);
    for k in 0..p {
        z[k] = s[k] / (s[k] * s[k] + lambda) * uty[k];
    }
    let beta_scaled = vt.tr_mul(&z);
    let beta = DVector::from_fn(p, |j, _| beta_scaled[j] / norms[j]);
    Ok(LcrLocal { beta, cn, lambda })
}

fn check_thresh(adjust: bool, cn_thresh: f64) -> Result<()> {
    if adjust && !(cn_thresh > 1.0) {
        return Err(GwError::InvalidThreshold(cn_thresh));
    }
    Ok(())
}

/// Locally compensated ridge regression at every data location. With
/// `adjust` false every λ is zero and the coefficients match the basic
/// estimator; with `adjust` true a local ridge is applied wherever the
/// pre-adjustment condition number exceeds `cn_thresh`.
pub fn gwr_lcr(
    ds: &SpatialDataset,
    selection: &VariableSelection,
    scheme: &WeightingScheme,
    adjust: bool,
    cn_thresh: f64,
    dmat: Option<&DistanceMatrix>,
) -> Result<LcrFit> {
    check_thresh(adjust, cn_thresh)?;
    let design = build_design(ds, selection)?;
    let m = selection.independents.len();
    check_size(ds.n(), m)?;
    let mut owned = None;
    let dmat = resolve_dmat(ds, &scheme.distance, dmat, &mut owned)?;
    let n = ds.n();
    let p = m + 1;
    let per: Vec<Result<(Vec<f64>, f64, f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, f64, f64, f64)> {
            let wv = weights_for(dmat.row(i), &scheme.kernel, Some(i))
                .map_err(|e| e.at("gwr-lcr", i))?;
            let local = lcr_solve(&design.x, &design.y, &wv.weights, adjust, cn_thresh, Some(i))
                .map_err(|e| e.at("gwr-lcr", i))?;
            let fitted: f64 = (0..p).map(|c| design.x[(i, c)] * local.beta[c]).sum();
            Ok((
                local.beta.iter().copied().collect(),
                fitted,
                local.cn,
                local.lambda,
            ))
        })
        .collect();
    let per: Vec<(Vec<f64>, f64, f64, f64)> = per.into_iter().collect::<Result<Vec<_>>>()?;
    let mut coefficients = DMatrix::zeros(n, p);
    let mut fitted = Vec::with_capacity(n);
    let mut local_cn = Vec::with_capacity(n);
    let mut local_lambda = Vec::with_capacity(n);
    for (i, (beta, f, cn, lambda)) in per.into_iter().enumerate() {
        for (c, b) in beta.into_iter().enumerate() {
            coefficients[(i, c)] = b;
        }
        fitted.push(f);
        local_cn.push(cn);
        local_lambda.push(lambda);
    }
    let residuals: Vec<f64> = design
        .y
        .iter()
        .zip(&fitted)
        .map(|(y, f)| y - f)
        .collect();
    Ok(LcrFit {
        names: design.names,
        scheme: *scheme,
        adjusted: adjust,
        cn_thresh,
        coefficients,
        fitted,
        residuals,
        local_cn,
        local_lambda,
    })
}

/// Leave-one-out prediction score for the compensated model; the ridge is
/// recomputed at every location from the knocked-out window. Local failures
/// contribute +inf.
pub fn lcr_cv_score(
    ds: &SpatialDataset,
    selection: &VariableSelection,
    scheme: &WeightingScheme,
    adjust: bool,
    cn_thresh: f64,
    dmat: Option<&DistanceMatrix>,
) -> Result<f64> {
    check_thresh(adjust, cn_thresh)?;
    let design = build_design(ds, selection)?;
    let mut owned = None;
    let dmat = resolve_dmat(ds, &scheme.distance, dmat, &mut owned)?;
    let n = ds.n();
    let p = selection.independents.len() + 1;
    let parts: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let Ok(mut wv) = weights_for(dmat.row(i), &scheme.kernel, Some(i)) else {
                return f64::INFINITY;
            };
            wv.weights[i] = 0.0;
            match lcr_solve(&design.x, &design.y, &wv.weights, adjust, cn_thresh, Some(i)) {
                Ok(local) => {
                    let pred: f64 = (0..p).map(|c| design.x[(i, c)] * local.beta[c]).sum();
                    let e = design.y[i] - pred;
                    e * e
                }
                Err(_) => f64::INFINITY,
            }
        })
        .collect();
    Ok(parts.iter().sum())
}

/// Bandwidth selection for the compensated model by leave-one-out
/// prediction error.
pub fn lcr_bandwidth(
    ds: &SpatialDataset,
    selection: &VariableSelection,
    family: KernelFamily,
    metric: &DistanceMetric,
    adjust: bool,
    cn_thresh: f64,
    domain: Option<BandwidthDomain>,
    dmat: Option<&DistanceMatrix>,
) -> Result<BandwidthResult> {
    check_thresh(adjust, cn_thresh)?;
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
            lcr_cv_score(ds, selection, &scheme, adjust, cn_thresh, Some(dmat))
                .unwrap_or(f64::INFINITY)
        },
        &domain,
    )
}

/// Condition-number profile of one candidate model.
#[derive(Debug, Clone)]
pub struct CnModelReport {
    pub variables: Vec<String>,
    /// Bandwidth chosen by unadjusted leave-one-out prediction error.
    pub bandwidth: Bandwidth,
    pub local_cn: Vec<f64>,
    /// Min, lower quartile, median, upper quartile, max of the local
    /// condition numbers.
    pub summary: [f64; 5],
}

/// Condition-number exploration across candidate model structures: each
/// model gets its own unadjusted bandwidth, is fitted without compensation,
/// and reports its local condition numbers. A failing model is recorded
/// alongside its variables without stopping the others.
pub fn cn_explore(
    ds: &SpatialDataset,
    dependent: &str,
    models: &[Vec<String>],
    family: KernelFamily,
    metric: &DistanceMetric,
    domain: Option<BandwidthDomain>,
    dmat: Option<&DistanceMatrix>,
) -> Result<Vec<(Vec<String>, Result<CnModelReport>)>> {
    let mut owned = None;
    let dmat = resolve_dmat(ds, metric, dmat, &mut owned)?;
    Ok(models
        .iter()
        .map(|model| {
            let outcome = (|| -> Result<CnModelReport> {
                if model.is_empty() {
                    return Err(GwError::EmptyDataset("candidate model has no variables"));
                }
                let selection = VariableSelection {
                    dependent: Some(dependent.to_string()),
                    independents: model.clone(),
                };
                let bw = lcr_bandwidth(
                    ds,
                    &selection,
                    family,
                    metric,
                    false,
                    CN_FLAG_THRESHOLD,
                    domain,
                    Some(dmat),
                )?;
                let scheme = WeightingScheme {
                    kernel: KernelSpec::new(family, bw.bandwidth),
                    distance: *metric,
                };
                let fit = gwr_lcr(
                    ds,
                    &selection,
                    &scheme,
                    false,
                    CN_FLAG_THRESHOLD,
                    Some(dmat),
                )?;
                let summary = five_number_summary(&fit.local_cn);
                Ok(CnModelReport {
                    variables: model.clone(),
                    bandwidth: bw.bandwidth,
                    local_cn: fit.local_cn,
                    summary,
                })
            })();
            (model.clone(), outcome)
        })
        .collect())
}
