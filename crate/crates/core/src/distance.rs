//! Distance metrics and distance matrices.
//!
//! Projected coordinates use the Minkowski family (p = 2 Euclidean,
//! p = 1 Manhattan); geographic coordinates use great-circle distance on a
//! sphere via the haversine formula. A [`DistanceMatrix`] holds distances
//! from r target points (rows) to n data points (columns) and can be cached
//! to disk in a small binary format.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{GwError, Result};

/// Sphere radius used for great-circle distances, in metres: the WGS84
/// equatorial radius. Overridable wherever a [`DistanceMetric`] is built.
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceMetric {
    /// (|dx|^p + |dy|^p)^(1/p) on projected coordinates; requires p >= 1.
    Minkowski { p: f64 },
    /// Haversine great-circle distance; coordinates are (lon, lat) degrees.
    GreatCircle { radius: f64 },
}

impl DistanceMetric {
    pub fn euclidean() -> Self {
        DistanceMetric::Minkowski { p: 2.0 }
    }

    pub fn manhattan() -> Self {
        DistanceMetric::Minkowski { p: 1.0 }
    }

    pub fn great_circle() -> Self {
        DistanceMetric::GreatCircle {
            radius: EARTH_RADIUS_M,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DistanceMetric::Minkowski { p } => {
                if !p.is_finite() || p < 1.0 {
                    return Err(GwError::InvalidPower(p));
                }
            }
            DistanceMetric::GreatCircle { radius } => {
                if !radius.is_finite() || radius <= 0.0 {
                    return Err(GwError::InvalidBandwidth(radius));
                }
            }
        }
        Ok(())
    }
}

/// Distance between two points under the metric. Total for finite inputs
/// once the metric itself is valid.
pub fn distance(a: [f64; 2], b: [f64; 2], metric: &DistanceMetric) -> Result<f64> {
    metric.validate()?;
    Ok(distance_unchecked(a, b, metric))
}

fn distance_unchecked(a: [f64; 2], b: [f64; 2], metric: &DistanceMetric) -> f64 {
    match *metric {
        DistanceMetric::Minkowski { p } => {
            let dx = (a[0] - b[0]).abs();
            let dy = (a[1] - b[1]).abs();
            if p == 2.0 {
                (dx * dx + dy * dy).sqrt()
            } else if p == 1.0 {
                dx + dy
            } else {
                (dx.powf(p) + dy.powf(p)).powf(1.0 / p)
            }
        }
        DistanceMetric::GreatCircle { radius } => {
            let lon1 = a[0].to_radians();
            let lat1 = a[1].to_radians();
            let lon2 = b[0].to_radians();
            let lat2 = b[1].to_radians();
            let s_lat = ((lat2 - lat1) / 2.0).sin();
            let s_lon = ((lon2 - lon1) / 2.0).sin();
            let h = s_lat * s_lat + lat1.cos() * lat2.cos() * s_lon * s_lon;
            2.0 * radius * h.sqrt().min(1.0).asin()
        }
    }
}

/// Dense matrix of distances from targets (rows) to data points (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    nrows: usize,
    ncols: usize,
    values: Vec<f64>, // row-major
    symmetric: bool,
}

const CACHE_MAGIC: &[u8; 4] = b"GWDM";

impl DistanceMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// True when the matrix was built data-to-data (targets omitted).
    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ncols + j]
    }

    /// Distances from target i to every data point.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.ncols..(i + 1) * self.ncols]
    }

    /// Smallest strictly positive entry; None when all entries are zero.
    pub fn min_positive(&self) -> Option<f64> {
        self.values
            .iter()
            .copied()
            .filter(|d| *d > 0.0)
            .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.min(d))))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Serializes as: magic "GWDM", u32 rows, u32 cols, u8 symmetric flag,
    /// then rows*cols little-endian f64 values in row-major order.
    pub fn write_cache<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&(self.nrows as u32).to_le_bytes())?;
        w.write_all(&(self.ncols as u32).to_le_bytes())?;
        w.write_all(&[u8::from(self.symmetric)])?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| GwError::InvalidCacheFormat("file too short for header".into()))?;
        if &magic != CACHE_MAGIC {
            return Err(GwError::InvalidCacheFormat(format!(
                "bad magic {:?}",
                magic
            )));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)
            .map_err(|_| GwError::InvalidCacheFormat("missing row count".into()))?;
        let nrows = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)
            .map_err(|_| GwError::InvalidCacheFormat("missing column count".into()))?;
        let ncols = u32::from_le_bytes(b4) as usize;
        let mut b1 = [0u8; 1];
        r.read_exact(&mut b1)
            .map_err(|_| GwError::InvalidCacheFormat("missing symmetry flag".into()))?;
        if b1[0] > 1 {
            return Err(GwError::InvalidCacheFormat(format!(
                "symmetry flag must be 0 or 1, got {}",
                b1[0]
            )));
        }
        let mut values = vec![0.0f64; nrows * ncols];
        let mut b8 = [0u8; 8];
        for v in values.iter_mut() {
            r.read_exact(&mut b8)
                .map_err(|_| GwError::InvalidCacheFormat("truncated value block".into()))?;
            *v = f64::from_le_bytes(b8);
        }
        // trailing bytes mean the header lied about the shape
        if r.read(&mut b8)? != 0 {
            return Err(GwError::InvalidCacheFormat(
                "trailing bytes after value block".into(),
            ));
        }
        Ok(DistanceMatrix {
            nrows,
            ncols,
            values,
            symmetric: b1[0] == 1,
        })
    }
}

/// Distances from every target to every data point. With `targets` omitted
/// the matrix is data-to-data: exactly symmetric (each pair is computed once
/// and mirrored) with a zero diagonal.
pub fn dist_matrix(
    data: &[[f64; 2]],
    targets: Option<&[[f64; 2]]>,
    metric: &DistanceMetric,
) -> Result<DistanceMatrix> {
    metric.validate()?;
    if data.is_empty() {
        return Err(GwError::EmptyDataset("no data points for distances"));
    }
    let n = data.len();
    match targets {
        Some(tp) => {
            if tp.is_empty() {
                return Err(GwError::EmptyDataset("no target points for distances"));
            }
            let values: Vec<f64> = tp
                .par_iter()
                .flat_map_iter(|t| data.iter().map(move |d| distance_unchecked(*t, *d, metric)))
                .collect();
            Ok(DistanceMatrix {
                nrows: tp.len(),
                ncols: n,
                values,
                symmetric: false,
            })
        }
        None => {
            let mut values = vec![0.0f64; n * n];
            let upper: Vec<(usize, usize, f64)> = (0..n)
                .into_par_iter()
                .flat_map_iter(|i| {
                    let metric = *metric;
                    (i + 1..n).map(move |j| (i, j, distance_unchecked(data[i], data[j], &metric)))
                })
                .collect();
            for (i, j, d) in upper {
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
            Ok(DistanceMatrix {
                nrows: n,
                ncols: n,
                values,
                symmetric: true,
            })
        }
    }
}
