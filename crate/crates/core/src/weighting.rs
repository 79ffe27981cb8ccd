//! Kernel weighting and bandwidth machinery.
//!
//! A kernel maps distance d and bandwidth b to a weight in [0, 1]:
//!
//! | family      | weight                                   |
//! |-------------|------------------------------------------|
//! | global      | 1                                        |
//! | gaussian    | exp(-(1/2)(d/b)^2)                       |
//! | exponential | exp(-|d|/b)                              |
//! | boxcar      | 1 if |d| < b, else 0                     |
//! | bisquare    | (1-(d/b)^2)^2 if |d| < b, else 0         |
//! | tricube     | (1-(|d|/b)^3)^3 if |d| < b, else 0       |
//!
//! Truncation is strict (`d < b`). An adaptive bandwidth names a neighbour
//! count N instead of a distance: the effective b is the N-th nearest
//! distance inflated by a factor (1 + 1e-12) so that the N-th point itself
//! survives the strict inequality, along with any points tied with it.
//!
//! Bandwidth selection minimizes a caller-supplied score with a
//! golden-section search: over integers (memoized, endpoints included) for
//! adaptive bandwidths, over reals to a relative tolerance of 1e-3 for fixed
//! ones. Non-finite scores are treated as worse than any finite score; if no
//! candidate scores finite the search fails rather than guessing.

use std::collections::HashMap;

use crate::distance::{DistanceMatrix, DistanceMetric};
use crate::error::{GwError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Global,
    Gaussian,
    Exponential,
    Boxcar,
    Bisquare,
    Tricube,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 6] = [
        KernelFamily::Global,
        KernelFamily::Gaussian,
        KernelFamily::Exponential,
        KernelFamily::Boxcar,
        KernelFamily::Bisquare,
        KernelFamily::Tricube,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Kernel scale in distance units; must be positive.
    Fixed(f64),
    /// Number of nearest neighbours defining the local window.
    Adaptive(usize),
}

impl Bandwidth {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Bandwidth::Fixed(b) => b,
            Bandwidth::Adaptive(nn) => nn as f64,
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, Bandwidth::Adaptive(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: Bandwidth,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: Bandwidth) -> Self {
        KernelSpec { family, bandwidth }
    }

    pub fn with_bandwidth(&self, bandwidth: Bandwidth) -> Self {
        KernelSpec {
            family: self.family,
            bandwidth,
        }
    }
}

/// Kernel spec plus the metric its distances are measured under; the bundle
/// every geographically weighted operation needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightingScheme {
    pub kernel: KernelSpec,
    pub distance: DistanceMetric,
}

/// Weight of a point at distance `d` under bandwidth `b`. Pure; requires
/// b > 0 for the non-global families.
pub fn kernel_weight(d: f64, b: f64, family: KernelFamily) -> f64 {
    let d = d.abs();
    match family {
        KernelFamily::Global => 1.0,
        KernelFamily::Gaussian => (-0.5 * (d / b) * (d / b)).exp(),
        KernelFamily::Exponential => (-d / b).exp(),
        KernelFamily::Boxcar => {
            if d < b {
                1.0
            } else {
                0.0
            }
        }
        KernelFamily::Bisquare => {
            if d < b {
                let u = 1.0 - (d / b) * (d / b);
                u * u
            } else {
                0.0
            }
        }
        KernelFamily::Tricube => {
            if d < b {
                let u = 1.0 - (d / b).powi(3);
                u * u * u
            } else {
                0.0
            }
        }
    }
}

/// Weights for one target location.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    /// Set when the target is itself one of the data points; cross-validation
    /// uses it to knock out the self-weight.
    pub target_index: Option<usize>,
}

impl WeightVector {
    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// N-th smallest distance (1-based N), ties broken by data index, inflated by
/// (1 + 1e-12) so the N-th point passes the strict `d < b` test.
pub(crate) fn adaptive_effective_bandwidth(distances: &[f64], nn: usize) -> Result<f64> {
    if nn == 0 {
        return Err(GwError::ZeroNeighbourCount);
    }
    if nn > distances.len() {
        return Err(GwError::AdaptiveCountExceedsN {
            requested: nn,
            available: distances.len(),
        });
    }
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| {
        distances[a]
            .partial_cmp(&distances[b])
            .expect("non-finite distance")
            .then(a.cmp(&b))
    });
    Ok(distances[order[nn - 1]] * (1.0 + 1e-12))
}

/// Indices of the `count` nearest points (ascending distance, ties by index).
pub(crate) fn nearest_indices(distances: &[f64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| {
        distances[a]
            .partial_cmp(&distances[b])
            .expect("non-finite distance")
            .then(a.cmp(&b))
    });
    order.truncate(count);
    order
}

/// Kernel weights for one target given its distances to all data points.
///
/// With an adaptive bandwidth whose effective distance is zero (at least N
/// points coincide with the target), the kernel's b -> 0 limit is used:
/// weight 1 at distance zero, 0 elsewhere.
pub fn weights_for(
    distances: &[f64],
    spec: &KernelSpec,
    target_index: Option<usize>,
) -> Result<WeightVector> {
    if distances.is_empty() {
        return Err(GwError::EmptyDataset("no distances to weight"));
    }
    let b = match spec.bandwidth {
        Bandwidth::Fixed(b) => {
            if !b.is_finite() || b <= 0.0 {
                return Err(GwError::InvalidBandwidth(b));
            }
            b
        }
        Bandwidth::Adaptive(nn) => adaptive_effective_bandwidth(distances, nn)?,
    };
    let weights = if b == 0.0 {
        distances
            .iter()
            .map(|&d| if d == 0.0 { 1.0 } else { 0.0 })
            .collect()
    } else {
        distances
            .iter()
            .map(|&d| kernel_weight(d, b, spec.family))
            .collect()
    };
    Ok(WeightVector {
        weights,
        target_index,
    })
}

/// Search domain for bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthDomain {
    Fixed { lo: f64, hi: f64 },
    Adaptive { lo: usize, hi: usize },
}

impl BandwidthDomain {
    /// Default adaptive bounds: enough neighbours for an invertible local fit
    /// at the bottom (at least max(10, nvars + 2)), everything at the top.
    pub fn adaptive_default(n: usize, nvars: usize) -> Self {
        let lo = 10.max(nvars + 2).min(n);
        BandwidthDomain::Adaptive { lo, hi: n }
    }

    /// Default fixed bounds: smallest positive pairwise distance up to the
    /// largest pairwise distance.
    pub fn fixed_default(dmat: &DistanceMatrix) -> Result<Self> {
        let lo = dmat.min_positive().ok_or(GwError::InvalidSearchBounds {
            lo: 0.0,
            hi: 0.0,
        })?;
        let hi = dmat.max();
        Ok(BandwidthDomain::Fixed { lo, hi })
    }
}

/// Outcome of a bandwidth search: the best candidate, its score, and every
/// (bandwidth, score) evaluation in the order they were made.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthResult {
    pub bandwidth: Bandwidth,
    pub score: f64,
    pub trace: Vec<(f64, f64)>,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9; // (sqrt 5 - 1) / 2

/// Golden-section minimization of `objective` over the domain. The returned
/// bandwidth always carries the smallest score seen anywhere in the trace
/// (ties go to the smaller bandwidth).
pub fn optimize_bandwidth<F>(mut objective: F, domain: &BandwidthDomain) -> Result<BandwidthResult>
where
    F: FnMut(&Bandwidth) -> f64,
{
    let mut trace: Vec<(f64, f64)> = Vec::new();
    match *domain {
        BandwidthDomain::Adaptive { lo, hi } => {
            if lo == 0 {
                return Err(GwError::ZeroNeighbourCount);
            }
            if lo > hi {
                return Err(GwError::InvalidSearchBounds {
                    lo: lo as f64,
                    hi: hi as f64,
                });
            }
            let mut memo: HashMap<usize, f64> = HashMap::new();
            let mut eval = |nn: usize, trace: &mut Vec<(f64, f64)>| -> f64 {
                if let Some(&s) = memo.get(&nn) {
                    return s;
                }
                let s = objective(&Bandwidth::Adaptive(nn));
                memo.insert(nn, s);
                trace.push((nn as f64, s));
                s
            };
            // boundary minima are legitimate; make sure both ends are seen
            eval(lo, &mut trace);
            eval(hi, &mut trace);
            let round_clamp = |x: f64| -> usize { (x.round() as usize).clamp(lo, hi) };
            let (mut a, mut b) = (lo as f64, hi as f64);
            let mut x1 = b - GOLDEN * (b - a);
            let mut x2 = a + GOLDEN * (b - a);
            let mut f1 = eval(round_clamp(x1), &mut trace);
            let mut f2 = eval(round_clamp(x2), &mut trace);
            while b - a >= 1.0 {
                if shrink_upper(f1, f2) {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - GOLDEN * (b - a);
                    f1 = eval(round_clamp(x1), &mut trace);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + GOLDEN * (b - a);
                    f2 = eval(round_clamp(x2), &mut trace);
                }
            }
            eval(round_clamp(a), &mut trace);
            eval(round_clamp(b), &mut trace);
            let (best, score) = best_of(&trace)?;
            Ok(BandwidthResult {
                bandwidth: Bandwidth::Adaptive(best as usize),
                score,
                trace,
            })
        }
        BandwidthDomain::Fixed { lo, hi } => {
            if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || lo > hi {
                return Err(GwError::InvalidSearchBounds { lo, hi });
            }
            let mut eval = |b: f64, trace: &mut Vec<(f64, f64)>| -> f64 {
                let s = objective(&Bandwidth::Fixed(b));
                trace.push((b, s));
                s
            };
            let (mut a, mut b) = (lo, hi);
            let mut x1 = b - GOLDEN * (b - a);
            let mut x2 = a + GOLDEN * (b - a);
            let mut f1 = eval(x1, &mut trace);
            let mut f2 = eval(x2, &mut trace);
            while b - a > 1e-3 * b.abs().max(f64::MIN_POSITIVE) {
                if shrink_upper(f1, f2) {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - GOLDEN * (b - a);
                    f1 = eval(x1, &mut trace);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + GOLDEN * (b - a);
                    f2 = eval(x2, &mut trace);
                }
            }
            let (best, score) = best_of(&trace)?;
            Ok(BandwidthResult {
                bandwidth: Bandwidth::Fixed(best),
                score,
                trace,
            })
        }
    }
}

/// Exhaustive integer-bandwidth search; the oracle counterpart to the
/// golden-section path.
pub fn grid_search_adaptive<F>(mut objective: F, lo: usize, hi: usize) -> Result<BandwidthResult>
where
    F: FnMut(&Bandwidth) -> f64,
{
    if lo == 0 {
        return Err(GwError::ZeroNeighbourCount);
    }
    if lo > hi {
        return Err(GwError::InvalidSearchBounds {
            lo: lo as f64,
            hi: hi as f64,
        });
    }
    let mut trace = Vec::with_capacity(hi - lo + 1);
    for nn in lo..=hi {
        trace.push((nn as f64, objective(&Bandwidth::Adaptive(nn))));
    }
    let (best, score) = best_of(&trace)?;
    Ok(BandwidthResult {
        bandwidth: Bandwidth::Adaptive(best as usize),
        score,
        trace,
    })
}

/// Bracket-shrink decision treating non-finite scores as worse than anything
/// finite; when both candidates are non-finite the lower half is discarded,
/// since degeneracy lives at small bandwidths.
fn shrink_upper(f1: f64, f2: f64) -> bool {
    match (f1.is_finite(), f2.is_finite()) {
        (true, true) => f1 < f2,
        (true, false) => true,
        (false, true) => false,
        (false, false) => false,
    }
}

fn best_of(trace: &[(f64, f64)]) -> Result<(f64, f64)> {
    trace
        .iter()
        .filter(|(_, s)| s.is_finite())
        .fold(None, |acc: Option<(f64, f64)>, &(b, s)| match acc {
            None => Some((b, s)),
            Some((bb, bs)) => {
                if s < bs || (s == bs && b < bb) {
                    Some((b, s))
                } else {
                    Some((bb, bs))
                }
            }
        })
        .ok_or(GwError::AllScoresNonFinite)
}
