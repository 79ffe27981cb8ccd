//! CSV input and the on-disk distance cache.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use gw_core::distance::{dist_matrix, DistanceMatrix, DistanceMetric};
use gw_core::spatial::SpatialDataset;
use nalgebra::DMatrix;

use crate::{CliError, CliResult};

fn read_raw(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::validation(format!("cannot open {}: {e}", path.display())))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        rows.push(record.iter().map(|f| f.to_string()).collect());
    }
    if rows.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok((headers, rows))
}

/// Coordinate column indices: named columns when given, the first two
/// columns otherwise.
fn coord_indices(
    headers: &[String],
    x: &Option<String>,
    y: &Option<String>,
) -> CliResult<(usize, usize)> {
    let find = |name: &String| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::validation(format!("coordinate column {name:?} not found")))
    };
    let ix = match x {
        Some(name) => find(name)?,
        None => 0,
    };
    let iy = match y {
        Some(name) => find(name)?,
        None => 1,
    };
    if headers.len() < 2 {
        return Err(CliError::validation("input needs at least two columns"));
    }
    if ix == iy {
        return Err(CliError::validation(
            "x and y name the same coordinate column",
        ));
    }
    Ok((ix, iy))
}

fn parse_cell(field: &str, col: &str, row: usize) -> CliResult<f64> {
    field.parse().map_err(|_| {
        CliError::validation(format!(
            "column {col:?}, data row {}: cannot parse {field:?} as a number",
            row + 1
        ))
    })
}

fn check_geographic(coords: &[[f64; 2]], geographic: bool) -> CliResult<()> {
    if !geographic {
        return Ok(());
    }
    for (i, c) in coords.iter().enumerate() {
        if !(c[0].abs() <= 180.0 && c[1].abs() <= 90.0) {
            return Err(CliError::validation(format!(
                "geographic coordinate out of range at data row {}: lon {}, lat {}",
                i + 1,
                c[0],
                c[1]
            )));
        }
    }
    Ok(())
}

/// Reads only the coordinate columns (for the `dist` subcommand, which has
/// no use for attributes).
pub fn read_coords(
    path: &Path,
    x: &Option<String>,
    y: &Option<String>,
    geographic: bool,
) -> CliResult<Vec<[f64; 2]>> {
    let (headers, rows) = read_raw(path)?;
    let (ix, iy) = coord_indices(&headers, x, y)?;
    let mut coords = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let cx = parse_cell(&row[ix], &headers[ix], i)?;
        let cy = parse_cell(&row[iy], &headers[iy], i)?;
        if !cx.is_finite() || !cy.is_finite() {
            return Err(CliError::validation(format!(
                "non-finite coordinate at data row {}",
                i + 1
            )));
        }
        coords.push([cx, cy]);
    }
    check_geographic(&coords, geographic)?;
    Ok(coords)
}

/// Reads a full dataset: the named coordinate columns plus every remaining
/// column as a numeric attribute. A column that fails to parse is reported
/// by name.
pub fn read_dataset(
    path: &Path,
    x: &Option<String>,
    y: &Option<String>,
    geographic: bool,
) -> CliResult<SpatialDataset> {
    let (headers, rows) = read_raw(path)?;
    let (ix, iy) = coord_indices(&headers, x, y)?;
    let mut coords = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        coords.push([
            parse_cell(&row[ix], &headers[ix], i)?,
            parse_cell(&row[iy], &headers[iy], i)?,
        ]);
    }
    let keep: Vec<usize> = (0..headers.len()).filter(|&j| j != ix && j != iy).collect();
    if keep.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no attribute columns besides the coordinates",
            path.display()
        )));
    }
    let mut attrs = DMatrix::zeros(rows.len(), keep.len());
    for (i, row) in rows.iter().enumerate() {
        for (c, &j) in keep.iter().enumerate() {
            attrs[(i, c)] = parse_cell(&row[j], &headers[j], i)?;
        }
    }
    let names: Vec<String> = keep.iter().map(|&j| headers[j].clone()).collect();
    Ok(SpatialDataset::new(coords, attrs, names, geographic)?)
}

/// Loads the distance cache when the file exists, otherwise computes the
/// full matrix and writes it there. `None` when no cache was requested, so
/// models compute distances internally.
pub fn resolve_dmat(
    cache: Option<&Path>,
    coords: &[[f64; 2]],
    metric: &DistanceMetric,
) -> CliResult<Option<DistanceMatrix>> {
    let Some(path) = cache else {
        return Ok(None);
    };
    if path.exists() {
        let dm = DistanceMatrix::read_cache(BufReader::new(File::open(path)?))?;
        if dm.nrows() != coords.len() || dm.ncols() != coords.len() {
            return Err(CliError::validation(format!(
                "distance cache {} holds a {}x{} matrix but the input has {} locations",
                path.display(),
                dm.nrows(),
                dm.ncols(),
                coords.len()
            )));
        }
        eprintln!("loaded distance cache {}", path.display());
        Ok(Some(dm))
    } else {
        let dm = dist_matrix(coords, None, metric)?;
        dm.write_cache(BufWriter::new(File::create(path)?))?;
        eprintln!("wrote distance cache {}", path.display());
        Ok(Some(dm))
    }
}
