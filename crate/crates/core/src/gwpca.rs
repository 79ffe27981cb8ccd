//! Geographically weighted principal components.
//!
//! At each location the selected variables get a weighted covariance matrix
//! Σ(u, v) = X̃ᵀ W X̃ / Σw, centred on the geographically weighted means, and
//! its eigendecomposition supplies local components: eigenvalues in
//! descending order, loadings with a fixed sign convention (the largest
//! absolute entry of each component is made positive), scores as the
//! projection of the locally centred data row, and the percentage of total
//! variation explained by the first k components.
//!
//! The robust variant replaces the weighted covariance with a minimum
//! covariance determinant (MCD) estimate over the local window: the rows
//! with positive weight (for truncated kernels), or the N nearest / the
//! rows above 1e-6 of the peak weight (for continuous kernels with
//! adaptive / fixed bandwidths). Windows of 12 rows or fewer are solved by
//! exhaustive h-subset enumeration; larger windows use the FAST-MCD
//! concentration algorithm with 500 seeded random starts, so results are
//! deterministic in (seed, location).
//!
//! Bandwidths are chosen by leave-one-out reconstruction: with the
//! self-weight forced to zero, score each location by the squared norm of
//! the residual after projecting its centred row onto the first k local
//! components (k < m strictly, otherwise the residual is trivially zero).

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distance::{dist_matrix, DistanceMatrix, DistanceMetric};
use crate::error::{GwError, Result};
use crate::gwss::gw_mean;
use crate::spatial::{SpatialDataset, VariableSelection};
use crate::weighting::{
    nearest_indices, optimize_bandwidth, weights_for, Bandwidth, BandwidthDomain, BandwidthResult,
    KernelFamily, KernelSpec, WeightingScheme,
};

/// Weighted local covariance of the columns of `x` (n×m), centred on the
/// geographically weighted column means, normalized by the weight sum.
pub fn local_covariance(x: &DMatrix<f64>, w: &[f64]) -> Result<DMatrix<f64>> {
    Ok(local_cov_with_center(x, w)?.1)
}

fn local_cov_with_center(x: &DMatrix<f64>, w: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (n, m) = x.shape();
    if w.len() != n {
        return Err(GwError::DimensionMismatch {
            expected: n,
            got: w.len(),
            context: "weights vs data rows",
        });
    }
    let sw: f64 = w.iter().sum();
    if sw <= 0.0 {
        return Err(GwError::ZeroWeightSum);
    }
    let mut center = vec![0.0; m];
    for j in 0..m {
        let col = x.column(j);
        center[j] = col.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() / sw;
    }
    let mut sigma = DMatrix::zeros(m, m);
    let mut d = vec![0.0; m];
    for i in 0..n {
        if w[i] == 0.0 {
            continue;
        }
        for j in 0..m {
            d[j] = x[(i, j)] - center[j];
        }
        for a in 0..m {
            for b in a..m {
                sigma[(a, b)] += w[i] * d[a] * d[b];
            }
        }
    }
    for a in 0..m {
        for b in a..m {
            let v = sigma[(a, b)] / sw;
            sigma[(a, b)] = v;
            sigma[(b, a)] = v;
        }
    }
    Ok((center, sigma))
}

/// Eigendecomposition of a symmetric PSD matrix: eigenvalues descending
/// (ties by original order), eigenvector columns signed so each component's
/// largest-magnitude entry is positive.
fn sorted_eigen(sigma: &DMatrix<f64>, location: Option<usize>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(GwError::SingularLocalCovariance { location });
    }
    let m = sigma.nrows();
    let eig = sigma.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("non-finite eigenvalue")
            .then(a.cmp(&b))
    });
    let mut values = Vec::with_capacity(m);
    let mut vectors = DMatrix::zeros(m, m);
    for (out_col, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let v = eig.eigenvectors.column(src);
        // sign convention: first index attaining the max |entry| made positive
        let mut piv = 0;
        for j in 1..m {
            if v[j].abs() > v[piv].abs() {
                piv = j;
            }
        }
        let flip = if v[piv] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..m {
            vectors[(j, out_col)] = flip * v[j];
        }
    }
    Ok((values, vectors))
}

/// Minimum covariance determinant estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct McdEstimate {
    pub center: Vec<f64>,
    pub cov: DMatrix<f64>,
    /// Row indices of the optimal h-subset, ascending.
    pub support: Vec<usize>,
    pub determinant: f64,
}

/// Settings for the robust (MCD) covariance path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustPca {
    /// Subset fraction: h = ceil(alpha * rows).
    pub alpha: f64,
    pub seed: u64,
}

impl Default for RobustPca {
    fn default() -> Self {
        RobustPca {
            alpha: 0.75,
            seed: 42,
        }
    }
}

const MCD_EXHAUSTIVE_MAX_ROWS: usize = 12;
const MCD_STARTS: usize = 500;

fn mcd_check(rows: usize, m: usize, alpha: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&alpha) || alpha <= 0.0 {
        return Err(GwError::InvalidProbability(alpha));
    }
    if rows < m + 1 {
        return Err(GwError::InsufficientLocalData {
            needed: m + 1,
            got: rows,
        });
    }
    let h = (alpha * rows as f64).ceil() as usize;
    if h <= m {
        return Err(GwError::InsufficientLocalData {
            needed: m + 1,
            got: h,
        });
    }
    Ok(h)
}

/// Mean and population covariance (divide by the subset size) of the listed
/// rows, plus the covariance determinant.
fn subset_moments(x: &DMatrix<f64>, idx: &[usize]) -> (Vec<f64>, DMatrix<f64>, f64) {
    let m = x.ncols();
    let h = idx.len();
    let mut center = vec![0.0; m];
    for &i in idx {
        for j in 0..m {
            center[j] += x[(i, j)];
        }
    }
    for c in center.iter_mut() {
        *c /= h as f64;
    }
    let mut cov = DMatrix::zeros(m, m);
    let mut d = vec![0.0; m];
    for &i in idx {
        for j in 0..m {
            d[j] = x[(i, j)] - center[j];
        }
        for a in 0..m {
            for b in a..m {
                cov[(a, b)] += d[a] * d[b];
            }
        }
    }
    for a in 0..m {
        for b in a..m {
            let v = cov[(a, b)] / h as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let det = cov.determinant();
    (center, cov, det)
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let h = idx.len();
    let mut i = h;
    while i > 0 {
        i -= 1;
        if idx[i] != n - h + i {
            idx[i] += 1;
            for j in i + 1..h {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exact MCD by enumerating every h-subset. Cost is C(rows, h); intended for
/// the small windows the dispatcher sends here and for oracle checks.
pub fn mcd_exhaustive(x: &DMatrix<f64>, alpha: f64) -> Result<McdEstimate> {
    let (rows, m) = x.shape();
    let h = mcd_check(rows, m, alpha)?;
    let mut idx: Vec<usize> = (0..h).collect();
    let mut best: Option<McdEstimate> = None;
    loop {
        let (center, cov, det) = subset_moments(x, &idx);
        if det.is_finite() && det > 0.0 && best.as_ref().map_or(true, |b| det < b.determinant) {
            best = Some(McdEstimate {
                center,
                cov,
                support: idx.clone(),
                determinant: det,
            });
        }
        if !next_combination(&mut idx, rows) {
            break;
        }
    }
    best.ok_or(GwError::DegenerateSubset)
}

/// Squared Mahalanobis distances of all rows from (center, cov); None when
/// the covariance is not positive definite.
fn mahalanobis_sq(x: &DMatrix<f64>, center: &[f64], cov: &DMatrix<f64>) -> Option<Vec<f64>> {
    let chol = cov.clone().cholesky()?;
    let m = x.ncols();
    Some(
        (0..x.nrows())
            .map(|i| {
                let d = DVector::from_fn(m, |j, _| x[(i, j)] - center[j]);
                let z = chol.l_dirty().solve_lower_triangular(&d).expect(
                    "cholesky factor is full-rank by construction",
                );
                z.norm_squared()
            })
            .collect(),
    )
}

/// FAST-MCD: 500 random (m+1)-point starts, each expanded until its
/// covariance is nonsingular and concentrated with C-steps until the
/// h-subset stops changing. Deterministic for a given seed.
pub fn mcd_fast(x: &DMatrix<f64>, alpha: f64, seed: u64) -> Result<McdEstimate> {
    let (rows, m) = x.shape();
    let h = mcd_check(rows, m, alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<McdEstimate> = None;
    for _ in 0..MCD_STARTS {
        let mut subset: Vec<usize> = rand::seq::index::sample(&mut rng, rows, (m + 1).min(rows))
            .into_vec();
        // grow the start until its covariance supports Mahalanobis distances
        let mut moments = subset_moments(x, &subset);
        while (moments.2 <= 0.0 || !moments.2.is_finite() || mahalanobis_sq(x, &moments.0, &moments.1).is_none())
            && subset.len() < rows
        {
            loop {
                let cand = rng.gen_range(0..rows);
                if !subset.contains(&cand) {
                    subset.push(cand);
                    break;
                }
            }
            moments = subset_moments(x, &subset);
        }
        let Some(mut dist) = mahalanobis_sq(x, &moments.0, &moments.1) else {
            continue;
        };
        // concentration steps
        let mut current: Vec<usize> = Vec::new();
        for _ in 0..100 {
            let mut order: Vec<usize> = (0..rows).collect();
            order.sort_by(|&a, &b| {
                dist[a]
                    .partial_cmp(&dist[b])
                    .expect("non-finite Mahalanobis distance")
                    .then(a.cmp(&b))
            });
            let mut next: Vec<usize> = order[..h].to_vec();
            next.sort_unstable();
            if next == current {
                break;
            }
            current = next;
            moments = subset_moments(x, &current);
            if moments.2 <= 0.0 || !moments.2.is_finite() {
                break;
            }
            match mahalanobis_sq(x, &moments.0, &moments.1) {
                Some(d) => dist = d,
                None => break,
            }
        }
        if current.is_empty() || moments.2 <= 0.0 || !moments.2.is_finite() {
            continue;
        }
        if best.as_ref().map_or(true, |b| moments.2 < b.determinant) {
            best = Some(McdEstimate {
                center: moments.0,
                cov: moments.1,
                support: current,
                determinant: moments.2,
            });
        }
    }
    best.ok_or(GwError::DegenerateSubset)
}

/// MCD with automatic algorithm choice: exhaustive enumeration up to 12 rows,
/// FAST-MCD beyond.
pub fn mcd(x: &DMatrix<f64>, alpha: f64, seed: u64) -> Result<McdEstimate> {
    if x.nrows() <= MCD_EXHAUSTIVE_MAX_ROWS {
        mcd_exhaustive(x, alpha)
    } else {
        mcd_fast(x, alpha, seed)
    }
}

/// Local window for the robust path: the positively weighted rows for
/// truncated kernels; for continuous kernels, the N nearest positively
/// weighted rows (adaptive) or those above 1e-6 of the peak weight (fixed).
fn robust_window(distances: &[f64], weights: &[f64], kernel: &KernelSpec) -> Vec<usize> {
    let truncated = matches!(
        kernel.family,
        KernelFamily::Boxcar | KernelFamily::Bisquare | KernelFamily::Tricube
    );
    let positive: Vec<usize> = (0..weights.len()).filter(|&j| weights[j] > 0.0).collect();
    if truncated {
        return positive;
    }
    match kernel.bandwidth {
        Bandwidth::Adaptive(nn) => {
            let cand_dist: Vec<f64> = positive.iter().map(|&j| distances[j]).collect();
            let keep = nearest_indices(&cand_dist, nn.min(positive.len()));
            let mut out: Vec<usize> = keep.iter().map(|&k| positive[k]).collect();
            out.sort_unstable();
            out
        }
        Bandwidth::Fixed(_) => {
            let wmax = weights.iter().copied().fold(0.0, f64::max);
            positive
                .into_iter()
                .filter(|&j| weights[j] > 1e-6 * wmax)
                .collect()
        }
    }
}

fn seed_for_location(seed: u64, location: usize) -> u64 {
    seed.wrapping_add((location as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Local principal components at every data location.
#[derive(Debug, Clone)]
pub struct GwpcaResult {
    pub names: Vec<String>,
    pub scheme: WeightingScheme,
    /// Retained component count used for reporting; 1 <= k <= m.
    pub k: usize,
    /// n×m, descending within each row.
    pub eigenvalues: DMatrix<f64>,
    /// Per location: m×m loading matrix, columns are components.
    pub loadings: Vec<DMatrix<f64>>,
    /// n×m projections of the locally centred data rows.
    pub scores: DMatrix<f64>,
    /// n×m cumulative percentage of total variation: column k-1 holds PTV(k).
    pub ptv: DMatrix<f64>,
    pub robust: bool,
}

struct LocalPca {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    score: Vec<f64>,
    ptv: Vec<f64>,
}

fn local_pca_at(
    x: &DMatrix<f64>,
    distances: &[f64],
    i: usize,
    kernel: &KernelSpec,
    robust: Option<&RobustPca>,
    knockout_self: bool,
) -> Result<LocalPca> {
    let m = x.ncols();
    let mut wv = weights_for(distances, kernel, Some(i))?;
    if knockout_self {
        wv.weights[i] = 0.0;
    }
    let (center, sigma) = match robust {
        None => local_cov_with_center(x, &wv.weights)?,
        Some(opts) => {
            let window = robust_window(distances, &wv.weights, kernel);
            if window.is_empty() {
                return Err(GwError::ZeroWeightSum);
            }
            let sub = DMatrix::from_fn(window.len(), m, |r, c| x[(window[r], c)]);
            let est = mcd(&sub, opts.alpha, seed_for_location(opts.seed, i))?;
            (est.center, est.cov)
        }
    };
    let (values, vectors) = sorted_eigen(&sigma, Some(i))?;
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(GwError::SingularLocalCovariance { location: Some(i) });
    }
    let mut ptv = Vec::with_capacity(m);
    let mut cum = 0.0;
    for &v in &values {
        cum += v;
        ptv.push(100.0 * cum / total);
    }
    let centered = DVector::from_fn(m, |j, _| x[(i, j)] - center[j]);
    let score: Vec<f64> = (0..m)
        .map(|c| vectors.column(c).dot(&centered))
        .collect();
    Ok(LocalPca {
        values,
        vectors,
        score,
        ptv,
    })
}

/// Fits local principal components at every location. `k` is the component
/// count carried in the result for reporting (all m components are stored).
pub fn gwpca_fit(
    ds: &SpatialDataset,
    vars: &VariableSelection,
    scheme: &WeightingScheme,
    k: usize,
    robust: Option<RobustPca>,
    dmat: Option<&DistanceMatrix>,
) -> Result<GwpcaResult> {
    let resolved = vars.resolve(ds)?;
    let m = resolved.independents.len();
    if m == 0 {
        return Err(GwError::EmptyDataset("no variables selected"));
    }
    let n = ds.n();
    if n <= m {
        return Err(GwError::InsufficientLocalData {
            needed: m + 1,
            got: n,
        });
    }
    if k == 0 || k > m {
        return Err(GwError::InvalidComponentCount { k, m });
    }
    let owned;
    let dmat = match dmat {
        Some(d) => {
            if d.nrows() != n || d.ncols() != n {
                return Err(GwError::DimensionMismatch {
                    expected: n,
                    got: d.nrows().max(d.ncols()),
                    context: "distance matrix vs dataset",
                });
            }
            d
        }
        None => {
            owned = dist_matrix(ds.coords(), None, &scheme.distance)?;
            &owned
        }
    };
    let x = DMatrix::from_fn(n, m, |r, c| ds.attrs()[(r, resolved.independents[c])]);
    let locals: Vec<LocalPca> = (0..n)
        .into_par_iter()
        .map(|i| {
            local_pca_at(&x, dmat.row(i), i, &scheme.kernel, robust.as_ref(), false)
                .map_err(|e| e.at("gwpca", i))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GwpcaResult {
        names: vars.independents.clone(),
        scheme: *scheme,
        k,
        eigenvalues: DMatrix::from_fn(n, m, |i, j| locals[i].values[j]),
        loadings: locals.iter().map(|l| l.vectors.clone()).collect(),
        scores: DMatrix::from_fn(n, m, |i, j| locals[i].score[j]),
        ptv: DMatrix::from_fn(n, m, |i, j| locals[i].ptv[j]),
        robust: robust.is_some(),
    })
}

/// Leave-one-out reconstruction score: with the self-weight zeroed, project
/// each centred data row onto its first k local components and accumulate
/// the squared residual norms. Requires 1 <= k < m, otherwise the score is
/// degenerate.
pub fn gwpca_cv_score(
    ds: &SpatialDataset,
    vars: &VariableSelection,
    scheme: &WeightingScheme,
    k: usize,
    robust: Option<RobustPca>,
    dmat: Option<&DistanceMatrix>,
) -> Result<f64> {
    let resolved = vars.resolve(ds)?;
    let m = resolved.independents.len();
    if k == 0 || k >= m {
        return Err(GwError::InvalidComponentCount { k, m });
    }
    let n = ds.n();
    let owned;
    let dmat = match dmat {
        Some(d) => d,
        None => {
            owned = dist_matrix(ds.coords(), None, &scheme.distance)?;
            &owned
        }
    };
    let x = DMatrix::from_fn(n, m, |r, c| ds.attrs()[(r, resolved.independents[c])]);
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let local = local_pca_at(&x, dmat.row(i), i, &scheme.kernel, robust.as_ref(), true)
                .map_err(|e| e.at("gwpca-cv", i))?;
            // residual after k-component reconstruction; scores hold the
            // projections onto each component already
            let mut resid_sq = 0.0;
            for j in 0..m {
                let centered_j: f64 = {
                    // centred row entry = sum over components of score * loading
                    (0..m).map(|c| local.score[c] * local.vectors[(j, c)]).sum()
                };
                let recon_j: f64 =
                    (0..k).map(|c| local.score[c] * local.vectors[(j, c)]).sum();
                let r = centered_j - recon_j;
                resid_sq += r * r;
            }
            Ok(resid_sq)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(scores.iter().sum())
}

/// Bandwidth selection for the PCA by golden-section search over the
/// leave-one-out reconstruction score. Candidates that fail locally score
/// +inf rather than aborting the search.
pub fn gwpca_bandwidth(
    ds: &SpatialDataset,
    vars: &VariableSelection,
    family: KernelFamily,
    metric: &DistanceMetric,
    k: usize,
    robust: Option<RobustPca>,
    domain: Option<BandwidthDomain>,
    dmat: Option<&DistanceMatrix>,
) -> Result<BandwidthResult> {
    let resolved = vars.resolve(ds)?;
    let m = resolved.independents.len();
    if k == 0 || k >= m {
        return Err(GwError::InvalidComponentCount { k, m });
    }
    let owned;
    let dmat_ref = match dmat {
        Some(d) => d,
        None => {
            owned = dist_matrix(ds.coords(), None, metric)?;
            &owned
        }
    };
    let domain = match domain {
        Some(d) => d,
        None => BandwidthDomain::adaptive_default(ds.n(), m),
    };
    optimize_bandwidth(
        |b| {
            let scheme = WeightingScheme {
                kernel: KernelSpec::new(family, *b),
                distance: *metric,
            };
            gwpca_cv_score(ds, vars, &scheme, k, robust, Some(dmat_ref))
                .unwrap_or(f64::INFINITY)
        },
        &domain,
    )
}

/// Name of the variable with the largest absolute loading on the given
/// component (1-based) at each location; ties resolve to the earlier
/// variable, and the answer is invariant to component sign flips.
pub fn winning_variable(result: &GwpcaResult, component: usize) -> Result<Vec<String>> {
    let m = result.names.len();
    if component == 0 || component > m {
        return Err(GwError::InvalidComponentCount { k: component, m });
    }
    let c = component - 1;
    Ok(result
        .loadings
        .iter()
        .map(|l| {
            let mut win = 0;
            for j in 1..m {
                if l[(j, c)].abs() > l[(win, c)].abs() {
                    win = j;
                }
            }
            result.names[win].clone()
        })
        .collect())
}

/// Convenience: geographically weighted mean vector used by the basic fit,
/// exposed for callers that need the centring separately.
pub fn gw_center(x: &DMatrix<f64>, w: &[f64]) -> Result<Vec<f64>> {
    (0..x.ncols())
        .map(|j| {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            gw_mean(&col, w)
        })
        .collect()
}
