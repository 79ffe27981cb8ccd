//! Spatial datasets: point coordinates with attribute columns.
//!
//! A [`SpatialDataset`] is the input to every model in the crate. Coordinates
//! are either projected (x/y in map units) or geographic (longitude/latitude
//! in degrees, flagged so distances switch to the great-circle metric).
//!
//! Invariants enforced at construction and re-checkable via [`SpatialDataset::validate`]:
//! at least one row and one attribute column, every value finite, attribute
//! names unique and non-empty, and geographic coordinates within
//! lon ∈ [-180, 180], lat ∈ [-90, 90].

use nalgebra::DMatrix;

use crate::error::{GwError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDataset {
    coords: Vec<[f64; 2]>,
    attrs: DMatrix<f64>,
    names: Vec<String>,
    geographic: bool,
}

impl SpatialDataset {
    pub fn new(
        coords: Vec<[f64; 2]>,
        attrs: DMatrix<f64>,
        names: Vec<String>,
        geographic: bool,
    ) -> Result<Self> {
        let ds = SpatialDataset {
            coords,
            attrs,
            names,
            geographic,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    /// Number of attribute columns.
    pub fn m(&self) -> usize {
        self.attrs.ncols()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn attrs(&self) -> &DMatrix<f64> {
        &self.attrs
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn geographic(&self) -> bool {
        self.geographic
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| GwError::UnknownVariable(name.to_string()))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.attrs.column(j).iter().copied().collect()
    }

    pub fn column_by_name(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.column(self.column_index(name)?))
    }

    /// Re-checks every construction invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.coords.is_empty() {
            return Err(GwError::EmptyDataset("no observations"));
        }
        if self.attrs.ncols() == 0 {
            return Err(GwError::EmptyDataset("no attribute columns"));
        }
        if self.attrs.nrows() != self.coords.len() {
            return Err(GwError::DimensionMismatch {
                expected: self.coords.len(),
                got: self.attrs.nrows(),
                context: "attribute rows vs coordinate rows",
            });
        }
        if self.names.len() != self.attrs.ncols() {
            return Err(GwError::DimensionMismatch {
                expected: self.attrs.ncols(),
                got: self.names.len(),
                context: "names vs attribute columns",
            });
        }
        for (row, c) in self.coords.iter().enumerate() {
            for (col, v) in c.iter().enumerate() {
                if !v.is_finite() {
                    return Err(GwError::NonFiniteValue {
                        field: "coords",
                        row,
                        col,
                    });
                }
            }
            if self.geographic {
                let (lon, lat) = (c[0], c[1]);
                if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
                    return Err(GwError::GeographicRangeViolation { row, lon, lat });
                }
            }
        }
        for col in 0..self.attrs.ncols() {
            for row in 0..self.attrs.nrows() {
                if !self.attrs[(row, col)].is_finite() {
                    return Err(GwError::NonFiniteValue {
                        field: "attrs",
                        row,
                        col,
                    });
                }
            }
        }
        for (j, name) in self.names.iter().enumerate() {
            if name.is_empty() {
                return Err(GwError::EmptyName(j));
            }
            if self.names[..j].contains(name) {
                return Err(GwError::DuplicateName(name.clone()));
            }
        }
        Ok(())
    }

    /// Returns a copy with the listed columns centred to mean zero and scaled
    /// to unit sample standard deviation (n-1 denominator). Columns not
    /// listed are left untouched. Applying it twice is a no-op up to
    /// floating-point rounding.
    pub fn standardize(&self, cols: &[&str]) -> Result<SpatialDataset> {
        let mut attrs = self.attrs.clone();
        let n = self.n();
        for name in cols {
            let j = self.column_index(name)?;
            let mean = attrs.column(j).sum() / n as f64;
            let ss: f64 = attrs.column(j).iter().map(|v| (v - mean).powi(2)).sum();
            if n < 2 {
                return Err(GwError::ZeroVariance((*name).to_string()));
            }
            let sd = (ss / (n - 1) as f64).sqrt();
            if sd == 0.0 || !sd.is_finite() {
                return Err(GwError::ZeroVariance((*name).to_string()));
            }
            for row in 0..n {
                attrs[(row, j)] = (attrs[(row, j)] - mean) / sd;
            }
        }
        Ok(SpatialDataset {
            coords: self.coords.clone(),
            attrs,
            names: self.names.clone(),
            geographic: self.geographic,
        })
    }
}

/// Names a dependent variable (for regression) and an ordered list of
/// independent/analysis variables. Resolution against a dataset checks the
/// names exist, are not repeated, and that the dependent is not also listed
/// as an independent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VariableSelection {
    pub dependent: Option<String>,
    pub independents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedSelection {
    pub dependent: Option<usize>,
    pub independents: Vec<usize>,
}

impl VariableSelection {
    pub fn analysis(vars: &[&str]) -> Self {
        VariableSelection {
            dependent: None,
            independents: vars.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn regression(dependent: &str, independents: &[&str]) -> Self {
        VariableSelection {
            dependent: Some(dependent.to_string()),
            independents: independents.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn resolve(&self, ds: &SpatialDataset) -> Result<ResolvedSelection> {
        if let Some(dep) = &self.dependent {
            if self.independents.contains(dep) {
                return Err(GwError::DependentInIndependents(dep.clone()));
            }
        }
        for (i, name) in self.independents.iter().enumerate() {
            if self.independents[..i].contains(name) {
                return Err(GwError::DuplicateSelection(name.clone()));
            }
        }
        let dependent = self
            .dependent
            .as_ref()
            .map(|d| ds.column_index(d))
            .transpose()?;
        let independents = self
            .independents
            .iter()
            .map(|v| ds.column_index(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(ResolvedSelection {
            dependent,
            independents,
        })
    }
}
