//! Result assembly and serialization.
//!
//! All numeric output goes through one float formatter producing 17
//! significant digits, so a value survives a CSV (or GeoJSON) round trip
//! bit-for-bit. Non-finite values print as NaN/inf/-inf in CSV and as null
//! in GeoJSON (JSON has no representation for them).

use std::io::Write;

use crate::CliResult;

pub enum Cell {
    F(f64),
    S(String),
    U(usize),
}

pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn cell_text(cell: &Cell) -> String {
    match cell {
        Cell::F(v) => fmt_float(*v),
        Cell::S(s) => s.clone(),
        Cell::U(u) => u.to_string(),
    }
}

pub fn write_csv<W: Write>(table: &Table, w: W) -> CliResult<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(&table.columns)?;
    for row in &table.rows {
        wtr.write_record(row.iter().map(|c| cell_text(c)))?;
    }
    wtr.flush()?;
    Ok(())
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

fn json_value(cell: &Cell) -> String {
    match cell {
        Cell::F(v) if v.is_finite() => fmt_float(*v),
        Cell::F(_) => "null".to_string(),
        Cell::S(s) => format!("\"{}\"", json_escape(s)),
        Cell::U(u) => u.to_string(),
    }
}

/// Writes the table as an RFC 7946 FeatureCollection of Point features, one
/// per row, with the table columns as properties and the coordinates echoed
/// from the input (in its coordinate reference system).
pub fn write_geojson<W: Write>(table: &Table, coords: &[[f64; 2]], mut w: W) -> CliResult<()> {
    writeln!(w, "{{\"type\":\"FeatureCollection\",\"features\":[")?;
    for (i, row) in table.rows.iter().enumerate() {
        let props: Vec<String> = table
            .columns
            .iter()
            .zip(row)
            .map(|(name, cell)| format!("\"{}\":{}", json_escape(name), json_value(cell)))
            .collect();
        let sep = if i + 1 == table.rows.len() { "" } else { "," };
        writeln!(
            w,
            "{{\"type\":\"Feature\",\"geometry\":{{\"type\":\"Point\",\"coordinates\":[{},{}]}},\"properties\":{{{}}}}}{}",
            fmt_float(coords[i][0]),
            fmt_float(coords[i][1]),
            props.join(","),
            sep
        )?;
    }
    writeln!(w, "]}}")?;
    Ok(())
}
