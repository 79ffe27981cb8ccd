//! Geographically weighted summary statistics.
//!
//! Every statistic is the classical one with observation weights folded in
//! and normalized by the weight sum (population convention):
//!
//! - mean      m = Σ w z / Σ w
//! - variance  v = Σ w (z - m)^2 / Σ w, sd s = sqrt(v)
//! - skewness  cbrt(Σ w (z - m)^3 / Σ w) / s
//! - CV        s / m
//! - covariance c = Σ w (z - m_z)(y - m_y) / Σ w
//! - Pearson   ρ = c / (s_z s_y)
//!
//! Quantiles interpolate the weighted empirical distribution at midpoint
//! cumulative weights p_j = (c_j - w_j/2) / Σ w, clamping outside [p_1, p_K];
//! the median, interquartile range, and quantile imbalance
//! (2 Q2 - Q1 - Q3) / (Q3 - Q1) derive from them. Spearman correlation is the
//! Pearson correlation of weighted midranks under the same weights.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::distance::{dist_matrix, DistanceMatrix};
use crate::error::{GwError, Result};
use crate::spatial::{SpatialDataset, VariableSelection};
use crate::weighting::{weights_for, WeightingScheme};

fn check_lengths(z: &[f64], w: &[f64]) -> Result<()> {
    if z.len() != w.len() {
        return Err(GwError::DimensionMismatch {
            expected: z.len(),
            got: w.len(),
            context: "weights vs values",
        });
    }
    if z.is_empty() {
        return Err(GwError::EmptyDataset("no values to summarize"));
    }
    Ok(())
}

fn weight_sum(w: &[f64]) -> Result<f64> {
    let sum: f64 = w.iter().sum();
    if sum <= 0.0 {
        return Err(GwError::ZeroWeightSum);
    }
    Ok(sum)
}

pub fn gw_mean(z: &[f64], w: &[f64]) -> Result<f64> {
    check_lengths(z, w)?;
    let sum = weight_sum(w)?;
    Ok(z.iter().zip(w).map(|(z, w)| z * w).sum::<f64>() / sum)
}

pub fn gw_covariance(z: &[f64], y: &[f64], w: &[f64]) -> Result<f64> {
    check_lengths(z, w)?;
    check_lengths(y, w)?;
    let sum = weight_sum(w)?;
    let mz = gw_mean(z, w)?;
    let my = gw_mean(y, w)?;
    Ok(z.iter()
        .zip(y)
        .zip(w)
        .map(|((z, y), w)| w * (z - mz) * (y - my))
        .sum::<f64>()
        / sum)
}

pub fn gw_variance(z: &[f64], w: &[f64]) -> Result<f64> {
    gw_covariance(z, z, w)
}

pub fn gw_sd(z: &[f64], w: &[f64]) -> Result<f64> {
    Ok(gw_variance(z, w)?.sqrt())
}

/// Cube-root convention: skew = cbrt(third weighted central moment) / sd,
/// which keeps the sign of the third moment.
pub fn gw_skew(z: &[f64], w: &[f64]) -> Result<f64> {
    check_lengths(z, w)?;
    let sum = weight_sum(w)?;
    let m = gw_mean(z, w)?;
    let s = gw_sd(z, w)?;
    if s == 0.0 {
        return Err(GwError::DegenerateLocalDistribution(
            "zero local spread for skewness",
        ));
    }
    let m3 = z
        .iter()
        .zip(w)
        .map(|(z, w)| w * (z - m).powi(3))
        .sum::<f64>()
        / sum;
    Ok(m3.cbrt() / s)
}

pub fn gw_cv(z: &[f64], w: &[f64]) -> Result<f64> {
    let m = gw_mean(z, w)?;
    if m == 0.0 {
        return Err(GwError::ZeroMean);
    }
    Ok(gw_sd(z, w)? / m)
}

pub fn gw_pearson(z: &[f64], y: &[f64], w: &[f64]) -> Result<f64> {
    let sz = gw_sd(z, w)?;
    let sy = gw_sd(y, w)?;
    if sz == 0.0 || sy == 0.0 {
        return Err(GwError::DegenerateLocalDistribution(
            "zero local spread for correlation",
        ));
    }
    Ok(gw_covariance(z, y, w)? / (sz * sy))
}

/// Weighted quantiles of the positively weighted values. Sorted values get
/// plotting positions p_j = (c_j - w_j/2) / W (c_j the inclusive cumulative
/// weight); each requested q interpolates linearly between bracketing
/// positions and clamps to the extreme values outside [p_1, p_K].
pub fn gw_quantiles(z: &[f64], w: &[f64], probs: &[f64]) -> Result<Vec<f64>> {
    check_lengths(z, w)?;
    for &q in probs {
        if !(0.0..=1.0).contains(&q) {
            return Err(GwError::InvalidProbability(q));
        }
    }
    let mut items: Vec<(f64, f64)> = z
        .iter()
        .zip(w)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&z, &w)| (z, w))
        .collect();
    if items.is_empty() {
        return Err(GwError::InsufficientLocalData { needed: 1, got: 0 });
    }
    items.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("non-finite value"));
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut cum = 0.0;
    let positions: Vec<f64> = items
        .iter()
        .map(|(_, w)| {
            cum += w;
            (cum - w / 2.0) / total
        })
        .collect();
    let k = items.len();
    Ok(probs
        .iter()
        .map(|&q| {
            if q <= positions[0] {
                items[0].0
            } else if q >= positions[k - 1] {
                items[k - 1].0
            } else {
                // positions are strictly increasing over positive weights
                let j = positions.partition_point(|&p| p < q) - 1;
                let (p0, p1) = (positions[j], positions[j + 1]);
                let (z0, z1) = (items[j].0, items[j + 1].0);
                z0 + (q - p0) / (p1 - p0) * (z1 - z0)
            }
        })
        .collect())
}

pub fn gw_median(z: &[f64], w: &[f64]) -> Result<f64> {
    Ok(gw_quantiles(z, w, &[0.5])?[0])
}

pub fn gw_iqr(z: &[f64], w: &[f64]) -> Result<f64> {
    let q = gw_quantiles(z, w, &[0.25, 0.75])?;
    Ok(q[1] - q[0])
}

/// Quantile imbalance (2 Q2 - Q1 - Q3) / (Q3 - Q1): 0 when the median sits
/// midway between the quartiles, ±1 when it touches one of them.
pub fn gw_qi(z: &[f64], w: &[f64]) -> Result<f64> {
    let q = gw_quantiles(z, w, &[0.25, 0.5, 0.75])?;
    let iqr = q[2] - q[0];
    if iqr == 0.0 {
        return Err(GwError::DegenerateLocalDistribution(
            "zero interquartile range",
        ));
    }
    Ok((2.0 * q[1] - q[0] - q[2]) / iqr)
}

/// Weighted midranks: rank_j = [Σ_{z_k < z_j} w_k + (1/2) Σ_{z_k = z_j} w_k] / W,
/// where the tie sum includes the point's own weight.
fn weighted_midranks(z: &[f64], w: &[f64], total: f64) -> Vec<f64> {
    let n = z.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[a].partial_cmp(&z[b]).expect("non-finite value"));
    let mut ranks = vec![0.0; n];
    let mut below = 0.0;
    let mut g = 0;
    while g < n {
        let mut h = g;
        while h < n && z[order[h]] == z[order[g]] {
            h += 1;
        }
        let tie_weight: f64 = order[g..h].iter().map(|&i| w[i]).sum();
        let rank = (below + 0.5 * tie_weight) / total;
        for &i in &order[g..h] {
            ranks[i] = rank;
        }
        below += tie_weight;
        g = h;
    }
    ranks
}

/// Pearson correlation of the weighted midranks under the same weights;
/// exactly invariant under strictly increasing transforms of either variable.
pub fn gw_spearman(z: &[f64], y: &[f64], w: &[f64]) -> Result<f64> {
    check_lengths(z, w)?;
    check_lengths(y, w)?;
    let total = weight_sum(w)?;
    let rz = weighted_midranks(z, w, total);
    let ry = weighted_midranks(y, w, total);
    gw_pearson(&rz, &ry, w)
}

/// Per-location summary statistics for the selected variables. Matrices are
/// n locations × v variables; pair matrices are n × v(v-1)/2 with pairs in
/// selection order (a before b).
#[derive(Debug, Clone)]
pub struct GwssResult {
    pub names: Vec<String>,
    pub pairs: Vec<(String, String)>,
    pub scheme: WeightingScheme,
    pub local_mean: DMatrix<f64>,
    pub local_sd: DMatrix<f64>,
    pub local_var: DMatrix<f64>,
    pub local_skew: DMatrix<f64>,
    pub local_cv: DMatrix<f64>,
    /// Median / IQR / quantile imbalance, present when quantiles were requested.
    pub local_median: Option<DMatrix<f64>>,
    pub local_iqr: Option<DMatrix<f64>>,
    pub local_qi: Option<DMatrix<f64>>,
    pub local_corr: DMatrix<f64>,
    pub local_spearman: DMatrix<f64>,
}

struct RowStats {
    basic: Vec<[f64; 5]>,            // per var: mean, sd, var, skew, cv
    quant: Option<Vec<[f64; 3]>>,    // per var: median, iqr, qi
    pairs: Vec<[f64; 2]>,            // per pair: pearson, spearman
}

/// Runs the full summary battery at every data location. Weights at location
/// i come from row i of the distance matrix (computed from the scheme when
/// `dmat` is not supplied). Per-location degeneracies are reported as errors
/// tagged with the location.
pub fn gwss_all(
    ds: &SpatialDataset,
    vars: &VariableSelection,
    scheme: &WeightingScheme,
    include_quantiles: bool,
    dmat: Option<&DistanceMatrix>,
) -> Result<GwssResult> {
    let resolved = vars.resolve(ds)?;
    if resolved.independents.is_empty() {
        return Err(GwError::EmptyDataset("no variables selected"));
    }
    let n = ds.n();
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
    let cols: Vec<Vec<f64>> = resolved.independents.iter().map(|&j| ds.column(j)).collect();
    let v = cols.len();
    let pair_idx: Vec<(usize, usize)> = (0..v)
        .flat_map(|a| ((a + 1)..v).map(move |b| (a, b)))
        .collect();

    let rows: Vec<RowStats> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<RowStats> {
            let wv = weights_for(dmat.row(i), &scheme.kernel, Some(i))
                .map_err(|e| e.at("gwss", i))?;
            let w = &wv.weights;
            let mut basic = Vec::with_capacity(v);
            let mut quant = if include_quantiles {
                Some(Vec::with_capacity(v))
            } else {
                None
            };
            for z in &cols {
                let mean = gw_mean(z, w).map_err(|e| e.at("gwss", i))?;
                let var = gw_variance(z, w).map_err(|e| e.at("gwss", i))?;
                let sd = var.sqrt();
                let skew = gw_skew(z, w).map_err(|e| e.at("gwss", i))?;
                let cv = gw_cv(z, w).map_err(|e| e.at("gwss", i))?;
                basic.push([mean, sd, var, skew, cv]);
                if let Some(q) = quant.as_mut() {
                    let qs = gw_quantiles(z, w, &[0.25, 0.5, 0.75])
                        .map_err(|e| e.at("gwss", i))?;
                    let iqr = qs[2] - qs[0];
                    if iqr == 0.0 {
                        return Err(GwError::DegenerateLocalDistribution(
                            "zero interquartile range",
                        )
                        .at("gwss", i));
                    }
                    q.push([qs[1], iqr, (2.0 * qs[1] - qs[0] - qs[2]) / iqr]);
                }
            }
            let mut pairs = Vec::with_capacity(pair_idx.len());
            for &(a, b) in &pair_idx {
                let pearson =
                    gw_pearson(&cols[a], &cols[b], w).map_err(|e| e.at("gwss", i))?;
                let spearman =
                    gw_spearman(&cols[a], &cols[b], w).map_err(|e| e.at("gwss", i))?;
                pairs.push([pearson, spearman]);
            }
            Ok(RowStats { basic, quant, pairs })
        })
        .collect::<Result<Vec<_>>>()?;

    let pick = |f: &dyn Fn(&RowStats, usize) -> f64, cols: usize| {
        DMatrix::from_fn(n, cols, |i, j| f(&rows[i], j))
    };
    let names: Vec<String> = vars.independents.clone();
    let pairs: Vec<(String, String)> = pair_idx
        .iter()
        .map(|&(a, b)| (names[a].clone(), names[b].clone()))
        .collect();
    Ok(GwssResult {
        names,
        pairs,
        scheme: *scheme,
        local_mean: pick(&|r, j| r.basic[j][0], v),
        local_sd: pick(&|r, j| r.basic[j][1], v),
        local_var: pick(&|r, j| r.basic[j][2], v),
        local_skew: pick(&|r, j| r.basic[j][3], v),
        local_cv: pick(&|r, j| r.basic[j][4], v),
        local_median: include_quantiles.then(|| pick(&|r, j| r.quant.as_ref().unwrap()[j][0], v)),
        local_iqr: include_quantiles.then(|| pick(&|r, j| r.quant.as_ref().unwrap()[j][1], v)),
        local_qi: include_quantiles.then(|| pick(&|r, j| r.quant.as_ref().unwrap()[j][2], v)),
        local_corr: pick(&|r, j| r.pairs[j][0], pair_idx.len()),
        local_spearman: pick(&|r, j| r.pairs[j][1], pair_idx.len()),
    })
}
