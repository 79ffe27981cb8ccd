//! End-to-end acceptance gate. Every test prints exactly one status line of
//! the form `ACCEPTANCE <n> <name>: PASS` (or `SKIP (<reason>)` when its
//! input data is unavailable) and panics on any violated check. Run with
//! `cargo test -p gw-core --test acceptance -- --nocapture` to see the lines.
//!
//! Tests 1 to 10 are self-contained: they check the library against closed
//! forms, textbook oracles, and brute-force reimplementations. Tests 11 to
//! 15 replay published example outputs of the GWmodel R package and need its
//! example data exported to CSV. Set `GW_FIXTURES_DIR` to a directory with:
//!
//! - `DubVoter.csv`: Greater Dublin 2004 voter turnout data (coordinates
//!   plus GenEl2004, DiffAdd, LARent, SC1, Unempl, LowEduc, Age18_24,
//!   Age25_44, Age45_64), used by tests 11 to 14;
//! - `ewhp_calib.csv` and `ewhp_valid.csv`: the published 50/50 split of the
//!   England and Wales house price data, used by test 15. The split was made
//!   with an external RNG, so it cannot be regenerated here; without the
//!   exact files the test skips.
//!
//! Coordinate columns are found by name (x/y, easting/northing, and similar
//! pairs, case-insensitive) and fall back to the first two numeric columns.

use std::env;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use gw_core::collin::{
    bkw_condition_number, collin_diagnostics, gwr_lcr, lcr_bandwidth, ridge_for_target_cn,
};
use gw_core::distance::{dist_matrix, DistanceMetric};
use gw_core::gwpca::{
    gwpca_bandwidth, gwpca_cv_score, gwpca_fit, mcd, mcd_exhaustive, mcd_fast, winning_variable,
    RobustPca,
};
use gw_core::gwr::{
    gwr_bandwidth, gwr_basic, gwr_cv_score, gwr_fit_at, gwr_predict, prediction_metrics,
    stepwise_select, studentised_residuals, SelectionCriterion,
};
use gw_core::gwss::{
    gw_cv, gw_iqr, gw_mean, gw_median, gw_pearson, gw_qi, gw_quantiles, gw_sd, gw_skew,
    gw_spearman, gw_variance, gwss_all,
};
use gw_core::spatial::{SpatialDataset, VariableSelection};
use gw_core::weighting::{
    weights_for, Bandwidth, BandwidthResult, KernelFamily, KernelSpec, WeightVector,
    WeightingScheme,
};
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn pass(n: u32, name: &str) {
    println!("ACCEPTANCE {n} {name}: PASS");
}

fn pass_with(n: u32, name: &str, detail: &str) {
    println!("ACCEPTANCE {n} {name}: PASS ({detail})");
}

fn skip(n: u32, name: &str, why: &str) {
    println!("ACCEPTANCE {n} {name}: SKIP ({why})");
}

#[track_caller]
fn close_abs(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: {actual} vs {expected} (tolerance {tol})"
    );
}

/// Relative comparison with an absolute floor of one, so near-zero expected
/// values do not demand impossible precision.
#[track_caller]
fn close_rel(actual: f64, expected: f64, rel: f64, what: &str) {
    let tol = rel * expected.abs().max(1.0);
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: {actual} vs {expected} (relative {rel})"
    );
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn scheme(family: KernelFamily, bandwidth: Bandwidth) -> WeightingScheme {
    WeightingScheme {
        kernel: KernelSpec::new(family, bandwidth),
        distance: DistanceMetric::euclidean(),
    }
}

fn global_scheme() -> WeightingScheme {
    scheme(KernelFamily::Global, Bandwidth::Fixed(1.0))
}

fn coords_uniform(r: &mut ChaCha8Rng, n: usize, side: f64) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| [r.gen_range(0.0..side), r.gen_range(0.0..side)])
        .collect()
}

fn dataset(seed: u64, n: usize, names: &[&str], lo: f64, hi: f64) -> SpatialDataset {
    let mut r = rng(seed);
    let coords = coords_uniform(&mut r, n, 10.0);
    let attrs = DMatrix::from_fn(n, names.len(), |_, _| r.gen_range(lo..hi));
    SpatialDataset::new(
        coords,
        attrs,
        names.iter().map(|s| s.to_string()).collect(),
        false,
    )
    .unwrap()
}

/// Design matrix (intercept first) for an oracle computation.
fn design(ds: &SpatialDataset, sel: &VariableSelection) -> DMatrix<f64> {
    let cols: Vec<Vec<f64>> = sel
        .independents
        .iter()
        .map(|v| ds.column_by_name(v).unwrap())
        .collect();
    DMatrix::from_fn(ds.n(), cols.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            cols[j - 1][i]
        }
    })
}

/// Kernel weights recomputed from first principles: literal Euclidean
/// distances and the published closed forms, with the adaptive bandwidth
/// taken as the N-th smallest distance (self included) inflated so the N-th
/// point survives strict truncation.
fn oracle_weights(coords: &[[f64; 2]], i: usize, spec: &KernelSpec) -> Vec<f64> {
    let d: Vec<f64> = coords
        .iter()
        .map(|c| ((coords[i][0] - c[0]).powi(2) + (coords[i][1] - c[1]).powi(2)).sqrt())
        .collect();
    let b = match spec.bandwidth {
        Bandwidth::Fixed(b) => b,
        Bandwidth::Adaptive(nn) => {
            let mut s = d.clone();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            s[nn - 1] * (1.0 + 1e-12)
        }
    };
    d.iter()
        .map(|&dd| match spec.family {
            KernelFamily::Global => 1.0,
            KernelFamily::Gaussian => (-0.5 * (dd / b).powi(2)).exp(),
            KernelFamily::Exponential => (-dd / b).exp(),
            KernelFamily::Boxcar => {
                if dd < b {
                    1.0
                } else {
                    0.0
                }
            }
            KernelFamily::Bisquare => {
                if dd < b {
                    (1.0 - (dd / b).powi(2)).powi(2)
                } else {
                    0.0
                }
            }
            KernelFamily::Tricube => {
                if dd < b {
                    (1.0 - (dd / b).powi(3)).powi(3)
                } else {
                    0.0
                }
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// 1. Six England and Wales house price locations against the published
//    Euclidean distance submatrix.
// ---------------------------------------------------------------------------

const EWHP6: [[f64; 2]; 6] = [
    [599500.0, 142200.0],
    [575400.0, 167200.0],
    [530300.0, 177300.0],
    [524100.0, 170300.0],
    [426900.0, 514600.0],
    [508000.0, 190400.0],
];

// Published to varying precision; each pair uses its most precise printing.
const EWHP6_DISTANCES: [[f64; 6]; 6] = [
    [0.0, 34724.78, 77592.848, 80465.956, 410454.04, 103419.00],
    [34724.78, 0.0, 46217.096, 51393.579, 377808.17, 71281.13],
    [77592.848, 46217.096, 0.0, 9350.936, 352792.928, 25863.101],
    [80465.956, 51393.579, 9350.936, 0.0, 357757.362, 25753.058],
    [410454.04, 377808.17, 352792.928, 357757.362, 0.0, 334189.84],
    [103419.00, 71281.13, 25863.101, 25753.058, 334189.84, 0.0],
];

#[test]
fn acceptance_01_distance_submatrix() {
    let dm = dist_matrix(&EWHP6, None, &DistanceMetric::euclidean()).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            close_abs(
                dm.get(i, j),
                EWHP6_DISTANCES[i][j],
                0.01,
                &format!("distance ({i},{j})"),
            );
        }
    }
    pass(1, "ewhp-distance-submatrix");
}

// ---------------------------------------------------------------------------
// 2. All six kernels at d in {0, b/2, b, 2b} against their closed forms.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_02_kernel_closed_forms() {
    let b = 2.0;
    let dists = [0.0, b / 2.0, b, 2.0 * b];
    for family in KernelFamily::ALL {
        let spec = KernelSpec::new(family, Bandwidth::Fixed(b));
        let wv = weights_for(&dists, &spec, None).unwrap();
        let expect: [f64; 4] = match family {
            KernelFamily::Global => [1.0, 1.0, 1.0, 1.0],
            KernelFamily::Gaussian => [1.0, (-0.125f64).exp(), (-0.5f64).exp(), (-2.0f64).exp()],
            KernelFamily::Exponential => {
                [1.0, (-0.5f64).exp(), (-1.0f64).exp(), (-2.0f64).exp()]
            }
            // strict truncation: exactly zero at d = b
            KernelFamily::Boxcar => [1.0, 1.0, 0.0, 0.0],
            KernelFamily::Bisquare => [1.0, 0.5625, 0.0, 0.0],
            KernelFamily::Tricube => [1.0, 0.669921875, 0.0, 0.0],
        };
        for (k, &e) in expect.iter().enumerate() {
            assert_eq!(wv.weights[k], e, "{family:?} at d = {}", dists[k]);
        }
    }
    pass(2, "kernel-closed-forms");
}

// ---------------------------------------------------------------------------
// 3. Under the global kernel every local statistic must collapse to its
//    classical global counterpart.
// ---------------------------------------------------------------------------

fn quantile_plot_pos(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = |j: usize| (j as f64 + 0.5) / n as f64;
    if q <= pos(0) {
        return sorted[0];
    }
    if q >= pos(n - 1) {
        return sorted[n - 1];
    }
    let mut j = 0;
    while pos(j + 1) < q {
        j += 1;
    }
    sorted[j] + (q - pos(j)) / (pos(j + 1) - pos(j)) * (sorted[j + 1] - sorted[j])
}

fn pearson_pop(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n).sqrt();
    cov / (sx * sy)
}

fn midranks(z: &[f64]) -> Vec<f64> {
    let n = z.len() as f64;
    z.iter()
        .map(|&v| {
            let below = z.iter().filter(|&&u| u < v).count() as f64;
            let ties = z.iter().filter(|&&u| u == v).count() as f64;
            (below + 0.5 * ties) / n
        })
        .collect()
}

fn gwss_reduction(seed: u64) {
    let names = ["v1", "v2", "v3", "v4", "v5"];
    let ds = dataset(seed, 50, &names, 0.0, 100.0);
    let sel = VariableSelection::analysis(&names);
    let res = gwss_all(&ds, &sel, &global_scheme(), true, None).unwrap();
    let n = ds.n();
    for (j, name) in names.iter().enumerate() {
        let z = ds.column_by_name(name).unwrap();
        let mean = z.iter().sum::<f64>() / n as f64;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        let m3 = z.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n as f64;
        let skew = m3.cbrt() / sd;
        let cv = sd / mean;
        let mut sorted = z.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q1 = quantile_plot_pos(&sorted, 0.25);
        let q2 = quantile_plot_pos(&sorted, 0.5);
        let q3 = quantile_plot_pos(&sorted, 0.75);
        let median = res.local_median.as_ref().unwrap();
        let iqr = res.local_iqr.as_ref().unwrap();
        let qi = res.local_qi.as_ref().unwrap();
        for i in 0..n {
            close_rel(res.local_mean[(i, j)], mean, 1e-10, "global mean");
            close_rel(res.local_sd[(i, j)], sd, 1e-10, "global sd");
            close_rel(res.local_var[(i, j)], var, 1e-10, "global variance");
            close_rel(res.local_skew[(i, j)], skew, 1e-10, "global skew");
            close_rel(res.local_cv[(i, j)], cv, 1e-10, "global cv");
            close_rel(median[(i, j)], q2, 1e-10, "global median");
            close_rel(iqr[(i, j)], q3 - q1, 1e-10, "global iqr");
            close_rel(
                qi[(i, j)],
                (2.0 * q2 - q1 - q3) / (q3 - q1),
                1e-10,
                "global quantile imbalance",
            );
        }
    }
    for (k, (a, b)) in res.pairs.iter().enumerate() {
        let za = ds.column_by_name(a).unwrap();
        let zb = ds.column_by_name(b).unwrap();
        let r = pearson_pop(&za, &zb);
        let rho = pearson_pop(&midranks(&za), &midranks(&zb));
        for i in 0..n {
            close_rel(res.local_corr[(i, k)], r, 1e-10, "global pearson");
            close_rel(res.local_spearman[(i, k)], rho, 1e-10, "global spearman");
        }
    }
}

fn gwpca_reduction(seed: u64) {
    let names = ["v1", "v2", "v3", "v4", "v5"];
    let ds = dataset(seed, 50, &names, -2.0, 2.0);
    let sel = VariableSelection::analysis(&names);
    let res = gwpca_fit(&ds, &sel, &global_scheme(), 2, None, None).unwrap();
    let (n, m) = (ds.n(), names.len());
    let x = ds.attrs().clone();
    let means: Vec<f64> = (0..m).map(|j| x.column(j).sum() / n as f64).collect();
    let xc = DMatrix::from_fn(n, m, |i, j| x[(i, j)] - means[j]);
    let cov = xc.transpose() * &xc / n as f64;
    let mut evals: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
    evals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total: f64 = evals.iter().sum();
    for i in 0..n {
        let row_total: f64 = (0..m).map(|j| res.eigenvalues[(i, j)]).sum();
        for j in 0..m {
            close_abs(
                res.eigenvalues[(i, j)] / row_total,
                evals[j] / total,
                1e-8,
                "global eigen share",
            );
        }
        close_abs(
            res.ptv[(i, 1)],
            100.0 * (evals[0] + evals[1]) / total,
            1e-6,
            "global two-component ptv",
        );
    }
}

fn gwr_reduction(seed: u64) {
    let mut r = rng(seed);
    let n = 50;
    let coords = coords_uniform(&mut r, n, 10.0);
    let mut attrs = DMatrix::from_fn(n, 5, |_, _| r.gen_range(-3.0..3.0));
    for i in 0..n {
        attrs[(i, 4)] = 2.0 + 1.5 * attrs[(i, 0)] - 0.8 * attrs[(i, 1)] + 0.3 * attrs[(i, 2)]
            - 1.1 * attrs[(i, 3)]
            + 0.5 * r.gen_range(-1.0..1.0);
    }
    let names = vec![
        "v1".to_string(),
        "v2".to_string(),
        "v3".to_string(),
        "v4".to_string(),
        "y".to_string(),
    ];
    let ds = SpatialDataset::new(coords, attrs, names, false).unwrap();
    let sel = VariableSelection::regression("y", &["v1", "v2", "v3", "v4"]);
    let fit = gwr_basic(&ds, &sel, &global_scheme(), None).unwrap();

    let x = design(&ds, &sel);
    let y = DVector::from_vec(ds.column_by_name("y").unwrap());
    let a_inv = (x.transpose() * &x).try_inverse().unwrap();
    let beta = &a_inv * x.transpose() * &y;
    let s = &x * &a_inv * x.transpose();
    let fitted = &x * &beta;
    let rss: f64 = (0..n).map(|i| (y[i] - fitted[i]).powi(2)).sum();
    let tr_s: f64 = (0..n).map(|i| s[(i, i)]).sum();
    let tr_sts: f64 = s.iter().map(|v| v * v).sum();
    let enp = 2.0 * tr_s - tr_sts;
    let nf = n as f64;
    let aicc = 2.0 * nf * (rss / nf).sqrt().ln()
        + nf * (2.0 * PI).ln()
        + nf * (nf + tr_s) / (nf - 2.0 - tr_s);
    for i in 0..n {
        for j in 0..x.ncols() {
            close_rel(fit.coefficients[(i, j)], beta[j], 1e-8, "ols coefficient");
        }
        close_rel(fit.hat_diag[i], s[(i, i)], 1e-8, "ols hat diagonal");
        close_rel(fit.fitted[i], fitted[i], 1e-8, "ols fitted value");
    }
    close_rel(fit.trace_s, tr_s, 1e-8, "trace of hat matrix");
    close_rel(fit.enp, enp, 1e-8, "effective parameter count");
    close_rel(fit.aicc, aicc, 1e-8, "corrected aic");
    close_rel(fit.sigma2, rss / (nf - enp), 1e-8, "error variance");
}

#[test]
fn acceptance_03_global_kernel_reductions() {
    for seed in [31u64, 32, 33] {
        gwss_reduction(seed);
        gwpca_reduction(seed + 100);
        gwr_reduction(seed + 200);
    }
    pass(3, "global-kernel-reductions");
}

// ---------------------------------------------------------------------------
// 4. The compensating ridge restores the eigenvalue spread to exactly the
//    target, and stays zero when the spread is already within it.
// ---------------------------------------------------------------------------

fn spectrum(r: &mut ChaCha8Rng, p: usize, smallest: f64, largest: f64) -> Vec<f64> {
    let mut evals = vec![largest];
    for _ in 0..p.saturating_sub(2) {
        evals.push(r.gen_range(smallest..=largest));
    }
    evals.push(smallest);
    evals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    evals
}

#[test]
fn acceptance_04_ridge_identity() {
    let mut r = rng(40);
    for trial in 0..1000 {
        let p = r.gen_range(2..=8);
        let ep = 10f64.powf(r.gen_range(-4.0..0.0));
        let kappa = 10f64.powf(r.gen_range(0.05..2.0));

        // spread beyond kappa: the ridge must land the ratio on kappa
        let e1 = ep * kappa * 10f64.powf(r.gen_range(0.2..2.0));
        let evals = spectrum(&mut r, p, ep, e1);
        let lambda = ridge_for_target_cn(&evals, kappa);
        assert!(lambda > 0.0, "trial {trial}: expected a positive ridge");
        let ratio = (e1 + lambda) / (ep + lambda);
        assert!(
            (ratio / kappa - 1.0).abs() <= 1e-12,
            "trial {trial}: adjusted ratio {ratio} vs target {kappa}"
        );

        // spread within kappa: no compensation at all
        let e1 = ep * (1.0 + (kappa - 1.0) * r.gen_range(0.0..0.999));
        let evals = spectrum(&mut r, p, ep, e1);
        assert_eq!(
            ridge_for_target_cn(&evals, kappa),
            0.0,
            "trial {trial}: spurious ridge"
        );
    }
    pass(4, "ridge-identity");
}

// ---------------------------------------------------------------------------
// 5. With adjustment off, the compensated-ridge fit is plain local
//    regression, across kernels and bandwidths.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_05_lcr_reduction() {
    let families = [
        KernelFamily::Gaussian,
        KernelFamily::Exponential,
        KernelFamily::Boxcar,
        KernelFamily::Bisquare,
        KernelFamily::Tricube,
    ];
    for t in 0..20u64 {
        let mut r = rng(500 + t);
        let n = 40;
        let m = 1 + (t as usize % 3);
        let coords = coords_uniform(&mut r, n, 10.0);
        let mut attrs = DMatrix::from_fn(n, m + 1, |_, _| r.gen_range(-2.0..2.0));
        for i in 0..n {
            let mut y = 1.0 + 0.4 * r.gen_range(-1.0..1.0);
            for j in 0..m {
                y += (j as f64 + 1.0) * 0.7 * attrs[(i, j)];
            }
            attrs[(i, m)] = y;
        }
        let mut names: Vec<String> = (1..=m).map(|j| format!("x{j}")).collect();
        names.push("y".to_string());
        let ds = SpatialDataset::new(coords, attrs, names.clone(), false).unwrap();
        let indep: Vec<&str> = names[..m].iter().map(|s| s.as_str()).collect();
        let sel = VariableSelection::regression("y", &indep);
        let family = families[t as usize % families.len()];
        let nn = r.gen_range(m + 12..=n);
        let sch = scheme(family, Bandwidth::Adaptive(nn));
        let basic = gwr_basic(&ds, &sel, &sch, None).unwrap();
        let lcr = gwr_lcr(&ds, &sel, &sch, false, 30.0, None).unwrap();
        assert!(lcr.local_lambda.iter().all(|&l| l == 0.0));
        for i in 0..n {
            for j in 0..=m {
                close_rel(
                    lcr.coefficients[(i, j)],
                    basic.coefficients[(i, j)],
                    1e-10,
                    "unadjusted ridge vs basic coefficient",
                );
            }
            close_rel(
                lcr.fitted[i],
                basic.fitted[i],
                1e-10,
                "unadjusted ridge vs basic fitted value",
            );
        }
    }
    pass(5, "lcr-reduction");
}

// ---------------------------------------------------------------------------
// 6. Leave-one-out machinery against brute-force loops on tiny instances.
// ---------------------------------------------------------------------------

fn small_regression_instance(seed: u64) -> (SpatialDataset, VariableSelection) {
    let mut r = rng(seed);
    let n = 10;
    let coords = coords_uniform(&mut r, n, 5.0);
    let mut attrs = DMatrix::from_fn(n, 3, |_, _| r.gen_range(0.0..3.0));
    for i in 0..n {
        attrs[(i, 2)] =
            1.0 + 0.8 * attrs[(i, 0)] - 0.5 * attrs[(i, 1)] + 0.3 * r.gen_range(-1.0..1.0);
    }
    let ds = SpatialDataset::new(
        coords,
        attrs,
        vec!["v1".to_string(), "v2".to_string(), "y".to_string()],
        false,
    )
    .unwrap();
    (ds, VariableSelection::regression("y", &["v1", "v2"]))
}

fn loo_gwr_cv(seed: u64, sch: WeightingScheme) {
    let (ds, sel) = small_regression_instance(seed);
    let cv = gwr_cv_score(&ds, &sel, &sch, None).unwrap();
    let n = ds.n();
    let x = design(&ds, &sel);
    let y = DVector::from_vec(ds.column_by_name("y").unwrap());
    let mut total = 0.0;
    for i in 0..n {
        let mut w = oracle_weights(ds.coords(), i, &sch.kernel);
        w[i] = 0.0;
        let b = DMatrix::from_fn(n, x.ncols(), |r, c| w[r].sqrt() * x[(r, c)]);
        let rhs = DVector::from_fn(n, |r, _| w[r].sqrt() * y[r]);
        let beta = b.svd(true, true).solve(&rhs, 1e-14).unwrap();
        let pred: f64 = (0..x.ncols()).map(|c| x[(i, c)] * beta[c]).sum();
        total += (y[i] - pred).powi(2);
    }
    close_rel(cv, total, 1e-8, "cv score vs literal leave-one-out loop");
}

fn loo_studentised(seed: u64) {
    let (ds, sel) = small_regression_instance(seed);
    let sch = scheme(KernelFamily::Gaussian, Bandwidth::Fixed(2.5));
    let fit = gwr_basic(&ds, &sel, &sch, None).unwrap();
    let got = studentised_residuals(&fit).unwrap();
    let n = ds.n();
    let x = design(&ds, &sel);
    let y = DVector::from_vec(ds.column_by_name("y").unwrap());
    let p = x.ncols();
    // dense hat matrix, then q from the explicitly formed (I-S)(I-S)^T
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        let w = oracle_weights(ds.coords(), i, &sch.kernel);
        let mut a = DMatrix::zeros(p, p);
        for j in 0..n {
            let xj = x.row(j).transpose();
            a += (&xj * xj.transpose()) * w[j];
        }
        let a_inv = a.try_inverse().unwrap();
        let u = &a_inv * x.row(i).transpose();
        for j in 0..n {
            s[(i, j)] = w[j] * u.dot(&x.row(j).transpose());
        }
    }
    let e = &y - &s * &y;
    let rss: f64 = e.iter().map(|v| v * v).sum();
    let tr_s: f64 = (0..n).map(|i| s[(i, i)]).sum();
    let tr_sts: f64 = s.iter().map(|v| v * v).sum();
    let enp = 2.0 * tr_s - tr_sts;
    let eye = DMatrix::<f64>::identity(n, n);
    let q = (&eye - &s) * (&eye - &s).transpose();
    for i in 0..n {
        let sig_mi = (rss - e[i] * e[i] / q[(i, i)]) / (n as f64 - enp - 1.0);
        let want = e[i] / (sig_mi * q[(i, i)]).sqrt();
        close_rel(got[i], want, 1e-8, "studentised residual vs dense oracle");
    }
}

fn loo_gwpca_cv(seed: u64, sch: WeightingScheme) {
    let mut r = rng(seed);
    let n = 10;
    let m = 3;
    let k = 1;
    let coords = coords_uniform(&mut r, n, 5.0);
    let attrs = DMatrix::from_fn(n, m, |_, _| r.gen_range(-2.0..2.0));
    let ds = SpatialDataset::new(
        coords.clone(),
        attrs.clone(),
        vec!["a".to_string(), "b".to_string(), "c".to_string()],
        false,
    )
    .unwrap();
    let sel = VariableSelection::analysis(&["a", "b", "c"]);
    let score = gwpca_cv_score(&ds, &sel, &sch, k, None, None).unwrap();
    let mut total = 0.0;
    for i in 0..n {
        let mut w = oracle_weights(&coords, i, &sch.kernel);
        w[i] = 0.0;
        let sw: f64 = w.iter().sum();
        let center: Vec<f64> = (0..m)
            .map(|j| (0..n).map(|t| w[t] * attrs[(t, j)]).sum::<f64>() / sw)
            .collect();
        let mut cov = DMatrix::zeros(m, m);
        for t in 0..n {
            if w[t] == 0.0 {
                continue;
            }
            let d = DVector::from_fn(m, |j, _| attrs[(t, j)] - center[j]);
            cov += (&d * d.transpose()) * w[t];
        }
        cov /= sw;
        let eig = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let centered = DVector::from_fn(m, |j, _| attrs[(i, j)] - center[j]);
        let mut recon = DVector::zeros(m);
        for &c in order.iter().take(k) {
            let v = eig.eigenvectors.column(c);
            let load = v.dot(&centered);
            recon += v * load;
        }
        total += (&centered - &recon).norm_squared();
    }
    close_rel(score, total, 1e-8, "pca cv score vs literal loop");
}

#[test]
fn acceptance_06_leave_one_out_oracles() {
    for seed in [61u64, 62] {
        loo_gwr_cv(seed, scheme(KernelFamily::Gaussian, Bandwidth::Fixed(2.5)));
        loo_gwr_cv(seed, scheme(KernelFamily::Bisquare, Bandwidth::Adaptive(7)));
        loo_studentised(seed);
        loo_gwpca_cv(seed, scheme(KernelFamily::Gaussian, Bandwidth::Fixed(2.0)));
        loo_gwpca_cv(seed, scheme(KernelFamily::Bisquare, Bandwidth::Adaptive(8)));
    }
    pass(6, "leave-one-out-oracles");
}

// ---------------------------------------------------------------------------
// 7. On windows small enough to enumerate, the fast covariance search must
//    find exactly the subset the exhaustive search finds.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_07_mcd_exactness() {
    for t in 0..50u64 {
        let mut r = rng(700 + t);
        let n = 8 + (t as usize % 5);
        let m = 2 + (t as usize % 2);
        let outliers = 1 + (t as usize % 3);
        let mut x = DMatrix::from_fn(n, m, |_, _| r.gen_range(-1.0..1.0));
        for o in 0..outliers {
            for j in 0..m {
                x[(n - 1 - o, j)] += 8.0 + r.gen_range(0.0..2.0);
            }
        }
        let exhaustive = mcd_exhaustive(&x, 0.75).unwrap();
        let fast = mcd_fast(&x, 0.75, 7000 + t).unwrap();
        assert_eq!(fast.support, exhaustive.support, "instance {t}: subset");
        assert_eq!(
            fast.determinant, exhaustive.determinant,
            "instance {t}: determinant"
        );
    }
    pass(7, "mcd-exactness");
}

// ---------------------------------------------------------------------------
// 8. Prediction variance under the global kernel is the textbook
//    out-of-sample variance, and always exceeds the error variance.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_08_prediction_variance() {
    for seed in [81u64, 82, 83] {
        let mut r = rng(seed);
        let n = 30;
        let coords = coords_uniform(&mut r, n, 10.0);
        let mut attrs = DMatrix::from_fn(n, 3, |_, _| r.gen_range(-2.0..2.0));
        for i in 0..n {
            attrs[(i, 2)] =
                0.5 + 1.2 * attrs[(i, 0)] - 0.7 * attrs[(i, 1)] + 0.4 * r.gen_range(-1.0..1.0);
        }
        let ds = SpatialDataset::new(
            coords,
            attrs,
            vec!["v1".to_string(), "v2".to_string(), "y".to_string()],
            false,
        )
        .unwrap();
        let sel = VariableSelection::regression("y", &["v1", "v2"]);
        let targets = coords_uniform(&mut r, 5, 10.0);
        let tx = DMatrix::from_fn(5, 2, |_, _| r.gen_range(-2.0..2.0));
        let pred = gwr_predict(&ds, &sel, &global_scheme(), &targets, &tx, None, None).unwrap();
        assert!(pred.failures.is_empty());

        let x = design(&ds, &sel);
        let y = DVector::from_vec(ds.column_by_name("y").unwrap());
        let a_inv = (x.transpose() * &x).try_inverse().unwrap();
        let beta = &a_inv * x.transpose() * &y;
        let resid = &y - &x * &beta;
        let rss: f64 = resid.iter().map(|v| v * v).sum();
        let sigma2 = rss / (n as f64 - x.ncols() as f64);
        close_rel(pred.sigma2, sigma2, 1e-8, "calibration error variance");
        for t in 0..5 {
            let xs = DVector::from_vec(vec![1.0, tx[(t, 0)], tx[(t, 1)]]);
            let leverage = (xs.transpose() * &a_inv * &xs)[(0, 0)];
            close_rel(pred.predictions[t], xs.dot(&beta), 1e-8, "ols prediction");
            close_rel(
                pred.variances[t],
                sigma2 * (1.0 + leverage),
                1e-8,
                "ols prediction variance",
            );
            assert!(pred.variances[t] > pred.sigma2);
        }
    }
    pass(8, "prediction-variance");
}

// ---------------------------------------------------------------------------
// 9. Invariances: weight scaling, monotone transforms, eigenvector signs,
//    and thread count.
// ---------------------------------------------------------------------------

fn gwss_weight_scale_invariance() {
    let mut r = rng(91);
    let n = 25;
    let z: Vec<f64> = (0..n).map(|_| r.gen_range(1.0..50.0)).collect();
    let y: Vec<f64> = (0..n).map(|_| r.gen_range(1.0..50.0)).collect();
    let w: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..2.0)).collect();
    let ws: Vec<f64> = w.iter().map(|&v| v * 7.3).collect();
    close_rel(gw_mean(&z, &ws).unwrap(), gw_mean(&z, &w).unwrap(), 1e-12, "mean");
    close_rel(gw_sd(&z, &ws).unwrap(), gw_sd(&z, &w).unwrap(), 1e-12, "sd");
    close_rel(
        gw_variance(&z, &ws).unwrap(),
        gw_variance(&z, &w).unwrap(),
        1e-12,
        "variance",
    );
    close_rel(gw_skew(&z, &ws).unwrap(), gw_skew(&z, &w).unwrap(), 1e-12, "skew");
    close_rel(gw_cv(&z, &ws).unwrap(), gw_cv(&z, &w).unwrap(), 1e-12, "cv");
    close_rel(
        gw_pearson(&z, &y, &ws).unwrap(),
        gw_pearson(&z, &y, &w).unwrap(),
        1e-12,
        "pearson",
    );
    close_rel(
        gw_spearman(&z, &y, &ws).unwrap(),
        gw_spearman(&z, &y, &w).unwrap(),
        1e-12,
        "spearman",
    );
    close_rel(gw_median(&z, &ws).unwrap(), gw_median(&z, &w).unwrap(), 1e-12, "median");
    close_rel(gw_iqr(&z, &ws).unwrap(), gw_iqr(&z, &w).unwrap(), 1e-12, "iqr");
    close_rel(gw_qi(&z, &ws).unwrap(), gw_qi(&z, &w).unwrap(), 1e-12, "quantile imbalance");
    let probs = [0.1, 0.25, 0.5, 0.75, 0.9];
    let q1 = gw_quantiles(&z, &w, &probs).unwrap();
    let q2 = gw_quantiles(&z, &ws, &probs).unwrap();
    for (a, b) in q2.iter().zip(&q1) {
        close_rel(*a, *b, 1e-12, "quantile");
    }
}

fn gwr_weight_scale_invariance() {
    let mut r = rng(92);
    let n = 12;
    let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { r.gen_range(-2.0..2.0) });
    let y: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
    let w: Vec<f64> = (0..n).map(|_| r.gen_range(0.2..1.5)).collect();
    let xi: Vec<f64> = x.row(4).iter().copied().collect();
    let wv1 = WeightVector {
        weights: w.clone(),
        target_index: Some(4),
    };
    let wv2 = WeightVector {
        weights: w.iter().map(|v| v * 3.7).collect(),
        target_index: Some(4),
    };
    let (b1, h1) = gwr_fit_at(&x, &y, &wv1, &xi).unwrap();
    let (b2, h2) = gwr_fit_at(&x, &y, &wv2, &xi).unwrap();
    for j in 0..3 {
        close_rel(b2[j], b1[j], 1e-12, "coefficient under weight scaling");
    }
    for j in 0..n {
        close_rel(h2[j], h1[j], 1e-12, "hat row under weight scaling");
    }
}

fn spearman_transform_invariance() {
    let z = [3.0, -1.0, 7.0, 0.5, 2.0, -4.0, 9.0, 1.0];
    let y = [1.0, 4.0, -2.0, 8.0, 3.5, 0.0, -1.0, 6.0];
    let w = [1.0, 0.5, 2.0, 1.5, 0.7, 1.2, 0.9, 1.1];
    // strictly increasing, so the ranks (and the statistic bits) are identical
    let zt: Vec<f64> = z.iter().map(|&v| 0.5 * v * v * v + 2.0 * v).collect();
    assert_eq!(
        gw_spearman(&z, &y, &w).unwrap(),
        gw_spearman(&zt, &y, &w).unwrap()
    );
}

fn winning_variable_sign_invariance() {
    let names = ["a", "b", "c", "d"];
    let ds = dataset(93, 20, &names, -2.0, 2.0);
    let sel = VariableSelection::analysis(&names);
    let sch = scheme(KernelFamily::Bisquare, Bandwidth::Adaptive(12));
    let res = gwpca_fit(&ds, &sel, &sch, 2, None, None).unwrap();
    let w1 = winning_variable(&res, 1).unwrap();
    let w2 = winning_variable(&res, 2).unwrap();
    let mut flipped = res.clone();
    for (i, l) in flipped.loadings.iter_mut().enumerate() {
        let c = i % 2;
        for j in 0..names.len() {
            l[(j, c)] = -l[(j, c)];
        }
    }
    assert_eq!(winning_variable(&flipped, 1).unwrap(), w1);
    assert_eq!(winning_variable(&flipped, 2).unwrap(), w2);
}

fn thread_count_determinism() {
    let run = || {
        let mut r = rng(94);
        let n = 40;
        let coords = coords_uniform(&mut r, n, 10.0);
        let mut attrs = DMatrix::from_fn(n, 4, |_, _| r.gen_range(-2.0..2.0));
        for i in 0..n {
            attrs[(i, 3)] = 1.0 + 0.9 * attrs[(i, 0)] - 0.6 * attrs[(i, 1)]
                + 0.3 * attrs[(i, 2)]
                + 0.2 * ((i % 7) as f64 - 3.0);
        }
        let ds = SpatialDataset::new(
            coords,
            attrs,
            vec![
                "a".to_string(),
                "b".to_string(),
                "c".to_string(),
                "y".to_string(),
            ],
            false,
        )
        .unwrap();
        let sel_r = VariableSelection::regression("y", &["a", "b", "c"]);
        let sel_a = VariableSelection::analysis(&["a", "b", "c"]);
        let sch = scheme(KernelFamily::Bisquare, Bandwidth::Adaptive(20));
        let fit = gwr_basic(&ds, &sel_r, &sch, None).unwrap();
        let pca = gwpca_fit(&ds, &sel_a, &sch, 2, None, None).unwrap();
        let sum = gwss_all(&ds, &sel_a, &sch, true, None).unwrap();
        let lcr = gwr_lcr(&ds, &sel_r, &sch, true, 30.0, None).unwrap();
        (fit, pca, sum, lcr)
    };
    let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let (f1, p1, s1, l1) = pool1.install(run);
    let (f4, p4, s4, l4) = pool4.install(run);
    assert_eq!(f1.coefficients, f4.coefficients);
    assert_eq!(f1.hat_diag, f4.hat_diag);
    assert_eq!(f1.fitted, f4.fitted);
    assert_eq!(f1.aicc.to_bits(), f4.aicc.to_bits());
    assert_eq!(p1.eigenvalues, p4.eigenvalues);
    assert_eq!(p1.loadings, p4.loadings);
    assert_eq!(p1.scores, p4.scores);
    assert_eq!(s1.local_mean, s4.local_mean);
    assert_eq!(s1.local_skew, s4.local_skew);
    assert_eq!(s1.local_median, s4.local_median);
    assert_eq!(s1.local_spearman, s4.local_spearman);
    assert_eq!(l1.coefficients, l4.coefficients);
    assert_eq!(l1.local_cn, l4.local_cn);
    assert_eq!(l1.local_lambda, l4.local_lambda);
}

#[test]
fn acceptance_09_invariance_suite() {
    gwss_weight_scale_invariance();
    gwr_weight_scale_invariance();
    spearman_transform_invariance();
    winning_variable_sign_invariance();
    thread_count_determinism();
    pass(9, "invariance-suite");
}

// ---------------------------------------------------------------------------
// 10. Forward search bookkeeping: 8 candidates means 36 fitted models, and a
//     variable that alone generates the response is picked first.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_10_stepwise_search() {
    let mut r = rng(100);
    let n = 40;
    let coords = coords_uniform(&mut r, n, 10.0);
    let mut attrs = DMatrix::from_fn(n, 9, |_, _| r.gen_range(-2.0..2.0));
    for i in 0..n {
        attrs[(i, 8)] = 3.0 + 2.0 * attrs[(i, 4)];
    }
    let mut names: Vec<String> = (1..=8).map(|j| format!("v{j}")).collect();
    names.push("y".to_string());
    let ds = SpatialDataset::new(coords, attrs, names, false).unwrap();
    let candidates: Vec<String> = (1..=8).map(|j| format!("v{j}")).collect();
    let sch = scheme(KernelFamily::Bisquare, Bandwidth::Adaptive(25));
    let report = stepwise_select(&ds, "y", &candidates, &sch, None).unwrap();
    assert_eq!(report.models.len(), 36);
    assert_eq!(report.inclusion_order.len(), 8);
    assert_eq!(report.inclusion_order[0], "v5", "signal variable not picked first");
    for round in 1..=8 {
        let tried = report.models.iter().filter(|m| m.round == round).count();
        assert_eq!(tried, 9 - round, "models tried in round {round}");
    }
    let sorted = report.sorted_view();
    for pair in sorted.models.windows(2) {
        if pair[0].round == pair[1].round {
            assert!(
                pair[0].aicc >= pair[1].aicc,
                "sorted view not descending within a round"
            );
        }
    }
    pass(10, "stepwise-search");
}

// ---------------------------------------------------------------------------
// Fixture loading for tests 11 to 15.
// ---------------------------------------------------------------------------

const DUB_VARS: [&str; 8] = [
    "DiffAdd", "LARent", "SC1", "Unempl", "LowEduc", "Age18_24", "Age25_44", "Age45_64",
];

const FIXTURE_HINT: &str = "set GW_FIXTURES_DIR to a directory containing DubVoter.csv";

fn fixtures_dir() -> Option<PathBuf> {
    let dir = PathBuf::from(env::var_os("GW_FIXTURES_DIR")?);
    dir.is_dir().then_some(dir)
}

/// Reads a CSV, keeping only the columns where every row parses as a number.
fn numeric_csv(path: &Path) -> Option<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .ok()?;
    let headers: Vec<String> = rdr
        .headers()
        .ok()?
        .iter()
        .map(|h| h.trim_matches('"').to_string())
        .collect();
    let mut parsed: Vec<Vec<Option<f64>>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.ok()?;
        parsed.push(rec.iter().map(|f| f.parse::<f64>().ok()).collect());
    }
    if parsed.is_empty() {
        return None;
    }
    let keep: Vec<usize> = (0..headers.len())
        .filter(|&j| parsed.iter().all(|row| matches!(row.get(j), Some(Some(_)))))
        .collect();
    if keep.is_empty() {
        return None;
    }
    let names = keep.iter().map(|&j| headers[j].clone()).collect();
    let rows = parsed
        .iter()
        .map(|row| keep.iter().map(|&j| row[j].unwrap()).collect())
        .collect();
    Some((names, rows))
}

fn dataset_from_csv(path: &Path) -> Option<SpatialDataset> {
    let (names, rows) = numeric_csv(path)?;
    if names.len() < 3 {
        return None;
    }
    let lower: Vec<String> = names.iter().map(|s| s.to_lowercase()).collect();
    let pairs = [
        ("x", "y"),
        ("easting", "northing"),
        ("xcoord", "ycoord"),
        ("x_coord", "y_coord"),
        ("long", "lat"),
        ("longitude", "latitude"),
    ];
    let (ix, iy) = pairs
        .iter()
        .find_map(|(a, b)| {
            let ia = lower.iter().position(|s| s == a)?;
            let ib = lower.iter().position(|s| s == b)?;
            Some((ia, ib))
        })
        .unwrap_or((0, 1));
    let coords: Vec<[f64; 2]> = rows.iter().map(|r| [r[ix], r[iy]]).collect();
    let keep: Vec<usize> = (0..names.len()).filter(|&j| j != ix && j != iy).collect();
    let attr_names: Vec<String> = keep.iter().map(|&j| names[j].clone()).collect();
    let attrs = DMatrix::from_fn(rows.len(), keep.len(), |i, j| rows[i][keep[j]]);
    SpatialDataset::new(coords, attrs, attr_names, false).ok()
}

fn dublin() -> Option<SpatialDataset> {
    let ds = dataset_from_csv(&fixtures_dir()?.join("DubVoter.csv"))?;
    let mut need = vec!["GenEl2004"];
    need.extend(DUB_VARS);
    need.iter().all(|v| ds.column_index(v).is_ok()).then_some(ds)
}

// ---------------------------------------------------------------------------
// 11. Global regression on the Dublin data against its published
//     coefficients and variance inflation factors.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_11_dublin_global_regression() {
    let name = "dublin-global-regression";
    let Some(ds) = dublin() else {
        return skip(11, name, FIXTURE_HINT);
    };
    let sel = VariableSelection::regression("GenEl2004", &DUB_VARS);
    let fit = gwr_basic(&ds, &sel, &global_scheme(), None).unwrap();
    let coefs = [
        77.70467, -0.08583, -0.09402, 0.08637, -0.72162, -0.13073, -0.13992, -0.35365, -0.09202,
    ];
    for (j, &e) in coefs.iter().enumerate() {
        close_abs(
            fit.coefficients[(0, j)],
            e,
            1e-3,
            &format!("coefficient {}", fit.names[j]),
        );
    }
    let diag = collin_diagnostics(&ds, &sel, &global_scheme(), None).unwrap();
    let vifs = [
        3.170044, 2.167172, 2.161348, 2.804576, 1.113033, 1.259760, 2.879022, 2.434470,
    ];
    for (j, &e) in vifs.iter().enumerate() {
        close_abs(
            diag.local_vifs[(0, j)],
            e,
            1e-3,
            &format!("vif {}", DUB_VARS[j]),
        );
    }
    pass(11, name);
}

// ---------------------------------------------------------------------------
// 12. Design-matrix condition numbers, full and reduced, plus the constant
//     local condition number under a window spanning every observation.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_12_condition_numbers() {
    let name = "condition-numbers";
    let Some(ds) = dublin() else {
        return skip(12, name, FIXTURE_HINT);
    };
    let n = ds.n();
    let cols: Vec<usize> = DUB_VARS.iter().map(|v| ds.column_index(v).unwrap()).collect();
    let full = DMatrix::from_fn(n, 9, |i, j| {
        if j == 0 {
            1.0
        } else {
            ds.attrs()[(i, cols[j - 1])]
        }
    });
    close_abs(
        bkw_condition_number(&full).unwrap(),
        41.06816,
        1e-3,
        "full design condition number",
    );
    // drop DiffAdd and Age25_44 (design columns 2 and 8)
    let keep: Vec<usize> = (0..9).filter(|&j| j != 1 && j != 7).collect();
    let reduced = DMatrix::from_fn(n, keep.len(), |i, j| full[(i, keep[j])]);
    close_abs(
        bkw_condition_number(&reduced).unwrap(),
        18.69237,
        1e-3,
        "reduced design condition number",
    );
    let sel = VariableSelection::regression("GenEl2004", &DUB_VARS);
    let sch = scheme(KernelFamily::Boxcar, Bandwidth::Adaptive(n));
    let lcr = gwr_lcr(&ds, &sel, &sch, false, 30.0, None).unwrap();
    let lo = lcr.local_cn.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lcr.local_cn.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(hi - lo <= 1e-9, "full-window condition numbers vary: {lo}..{hi}");
    for &cn in &lcr.local_cn {
        close_abs(cn, 41.07, 0.01, "full-window local condition number");
    }
    pass(12, name);
}

// ---------------------------------------------------------------------------
// 13. Bandwidth searches against their published optima (a deviation of up
//     to 2 neighbours is tolerated and reported).
// ---------------------------------------------------------------------------

fn bw_neighbours(r: &BandwidthResult) -> i64 {
    match r.bandwidth {
        Bandwidth::Adaptive(nn) => nn as i64,
        Bandwidth::Fixed(b) => b.round() as i64,
    }
}

#[test]
fn acceptance_13_reference_bandwidths() {
    let name = "reference-bandwidths";
    let Some(ds) = dublin() else {
        return skip(13, name, FIXTURE_HINT);
    };
    let metric = DistanceMetric::euclidean();
    let dm = dist_matrix(ds.coords(), None, &metric).unwrap();
    let sel = VariableSelection::regression("GenEl2004", &DUB_VARS);
    let aicc = gwr_bandwidth(
        &ds,
        &sel,
        KernelFamily::Bisquare,
        &metric,
        SelectionCriterion::Aicc,
        None,
        Some(&dm),
    )
    .unwrap();
    let cv = gwr_bandwidth(
        &ds,
        &sel,
        KernelFamily::Bisquare,
        &metric,
        SelectionCriterion::Cv,
        None,
        Some(&dm),
    )
    .unwrap();
    let lcr = lcr_bandwidth(
        &ds,
        &sel,
        KernelFamily::Bisquare,
        &metric,
        true,
        30.0,
        None,
        Some(&dm),
    )
    .unwrap();
    let std = ds.standardize(&DUB_VARS).unwrap();
    let sel_a = VariableSelection::analysis(&DUB_VARS);
    let pca = gwpca_bandwidth(
        &std,
        &sel_a,
        KernelFamily::Bisquare,
        &metric,
        3,
        None,
        None,
        Some(&dm),
    )
    .unwrap();
    let pca_robust = gwpca_bandwidth(
        &std,
        &sel_a,
        KernelFamily::Bisquare,
        &metric,
        3,
        Some(RobustPca::default()),
        None,
        Some(&dm),
    )
    .unwrap();
    let got = [
        bw_neighbours(&aicc),
        bw_neighbours(&cv),
        bw_neighbours(&lcr),
        bw_neighbours(&pca),
        bw_neighbours(&pca_robust),
    ];
    let published = [109i64, 109, 157, 131, 130];
    let labels = ["gwr-aicc", "gwr-cv", "lcr-adjusted", "pca", "pca-robust"];
    for ((g, w), label) in got.iter().zip(&published).zip(&labels) {
        assert!(
            (g - w).abs() <= 2,
            "{label} bandwidth {g} vs published {w}"
        );
    }
    pass_with(
        13,
        name,
        &format!(
            "gwr-aicc={} gwr-cv={} lcr-adjusted={} pca={} pca-robust={}; published 109 109 157 131 130",
            got[0], got[1], got[2], got[3], got[4]
        ),
    );
}

// ---------------------------------------------------------------------------
// 14. Principal component variance shares of the standardized Dublin data,
//     plain and with the robust covariance.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_14_pca_eigen_shares() {
    let name = "pca-eigen-shares";
    let Some(ds) = dublin() else {
        return skip(14, name, FIXTURE_HINT);
    };
    let std = ds.standardize(&DUB_VARS).unwrap();
    let sel = VariableSelection::analysis(&DUB_VARS);
    let res = gwpca_fit(&std, &sel, &global_scheme(), 3, None, None).unwrap();
    let total: f64 = (0..8).map(|j| res.eigenvalues[(0, j)]).sum();
    let published = [
        36.084435, 25.586984, 11.919681, 10.530373, 6.890565, 3.679812, 3.111449, 2.196701,
    ];
    for (j, &e) in published.iter().enumerate() {
        close_abs(
            100.0 * res.eigenvalues[(0, j)] / total,
            e,
            0.05,
            &format!("basic component {} share", j + 1),
        );
    }
    let basic_first = 100.0 * res.eigenvalues[(0, 0)] / total;

    let cols: Vec<usize> = DUB_VARS.iter().map(|v| std.column_index(v).unwrap()).collect();
    let x = DMatrix::from_fn(std.n(), 8, |i, j| std.attrs()[(i, cols[j])]);
    let est = mcd(&x, 0.75, 42).unwrap();
    let mut evals: Vec<f64> = est.cov.symmetric_eigen().eigenvalues.iter().copied().collect();
    evals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let robust_first = 100.0 * evals[0] / evals.iter().sum::<f64>();
    close_abs(robust_first, 41.9129445, 0.5, "robust first component share");
    pass_with(
        14,
        name,
        &format!(
            "basic first {basic_first:.4}% (published 36.0844), robust first {robust_first:.4}% (published 41.9129)"
        ),
    );
}

// ---------------------------------------------------------------------------
// 15. Out-of-sample accuracy on the published house price split.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_15_prediction_metrics() {
    let name = "prediction-metrics";
    let Some(dir) = fixtures_dir() else {
        return skip(15, name, "set GW_FIXTURES_DIR to a directory containing ewhp_calib.csv and ewhp_valid.csv");
    };
    let (Some(calib), Some(valid)) = (
        dataset_from_csv(&dir.join("ewhp_calib.csv")),
        dataset_from_csv(&dir.join("ewhp_valid.csv")),
    ) else {
        return skip(
            15,
            name,
            "needs the exact ewhp_calib.csv / ewhp_valid.csv pair; the original split came from an external RNG and cannot be regenerated",
        );
    };
    if calib.column_index("PurPrice").is_err()
        || calib.column_index("FlrArea").is_err()
        || valid.column_index("PurPrice").is_err()
        || valid.column_index("FlrArea").is_err()
    {
        return skip(15, name, "split files lack PurPrice / FlrArea columns");
    }
    let sel = VariableSelection::regression("PurPrice", &["FlrArea"]);
    let metric = DistanceMetric::euclidean();
    let bw = gwr_bandwidth(
        &calib,
        &sel,
        KernelFamily::Bisquare,
        &metric,
        SelectionCriterion::Cv,
        None,
        None,
    )
    .unwrap();
    let sch = WeightingScheme {
        kernel: KernelSpec::new(KernelFamily::Bisquare, bw.bandwidth),
        distance: metric,
    };
    let flr = valid.column_by_name("FlrArea").unwrap();
    let tx = DMatrix::from_fn(valid.n(), 1, |i, _| flr[i]);
    let pred = gwr_predict(&calib, &sel, &sch, valid.coords(), &tx, None, None).unwrap();
    assert!(pred.failures.is_empty());
    let y = valid.column_by_name("PurPrice").unwrap();
    let [rmspe, mape, mean_zs, sd_zs] = prediction_metrics(&y, &pred.predictions, &pred.variances);
    close_abs(rmspe / 1000.0, 27.03, 0.5, "rmspe in thousands");
    close_abs(mape / 1000.0, 17.55, 0.5, "mape in thousands");
    close_abs(mean_zs, -0.04, 0.05, "mean prediction z-score");
    close_abs(sd_zs, 1.10, 0.05, "sd of prediction z-scores");
    pass_with(
        15,
        name,
        &format!(
            "bw={:?} rmspe={:.2}k mape={:.2}k mean.zs={mean_zs:.3} sd.zs={sd_zs:.3}",
            bw.bandwidth,
            rmspe / 1000.0,
            mape / 1000.0
        ),
    );
}
