//! Plain-text serialization of grid functions and result tables.
//!
//! A volume grid function is written as CSV:
//!
//! ```text
//! # slabscalar grid-function v1
//! # shape: <n1>,<n2>,<nz>
//! # box: <l1>,<l2>,<depth>
//! i1,i2,k,x1,x2,x3,value
//! 0,0,0,0,0,-1,0.25
//! ...
//! ```
//!
//! Rows run with `k` fastest, then `i2`, then `i1`; `k = 0` is the bottom
//! wall. Numbers use the shortest representation that parses back to the
//! same `f64`. Tables start with a single `# config: <json>` line holding
//! the resolved scenario.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::Array3;

use crate::geometry::SlabGrid;
use crate::{Field3, Result, SlabError};

const MAGIC: &str = "# slabscalar grid-function v1";

fn csv_err(e: csv::Error) -> SlabError {
    SlabError::Config(format!("csv: {e}"))
}

pub fn write_grid_function<W: Write>(out: W, grid: &SlabGrid, f: &Field3) -> Result<()> {
    grid.check_field(f, "grid function")?;
    let mut out = out;
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "# shape: {},{},{}", grid.n1, grid.n2, grid.nz)?;
    writeln!(out, "# box: {},{},{}", grid.domain.l1, grid.domain.l2, grid.domain.depth)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i1", "i2", "k", "x1", "x2", "x3", "value"]).map_err(csv_err)?;
    for ((i, j, k), v) in f.indexed_iter() {
        w.write_record([
            i.to_string(),
            j.to_string(),
            k.to_string(),
            grid.x1(i).to_string(),
            grid.x2(j).to_string(),
            grid.x3(k).to_string(),
            v.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn header_values(line: Option<String>, key: &str) -> Result<Vec<String>> {
    let line = line.ok_or_else(|| SlabError::Config(format!("missing '{key}' header")))?;
    let rest = line
        .strip_prefix(&format!("# {key}: "))
        .ok_or_else(|| SlabError::Config(format!("expected '# {key}: ...', got '{line}'")))?;
    Ok(rest.split(',').map(|s| s.trim().to_string()).collect())
}

/// Reads a grid function written by [`write_grid_function`]; returns the
/// shape and box from the header together with the values.
pub fn read_grid_function<R: Read>(input: R) -> Result<((usize, usize, usize), (f64, f64, f64), Field3)> {
    let mut reader = BufReader::new(input);
    let mut lines = Vec::with_capacity(3);
    for _ in 0..3 {
        let mut s = String::new();
        reader.read_line(&mut s)?;
        lines.push(s.trim_end().to_string());
    }
    if lines[0] != MAGIC {
        return Err(SlabError::Config(format!("not a grid-function file: '{}'", lines[0])));
    }
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| SlabError::Config(format!("bad shape entry '{s}': {e}")));
    let parse_f64 = |s: &str| s.parse::<f64>().map_err(|e| SlabError::Config(format!("bad number '{s}': {e}")));
    let shape = header_values(Some(lines[1].clone()), "shape")?;
    let bx = header_values(Some(lines[2].clone()), "box")?;
    if shape.len() != 3 || bx.len() != 3 {
        return Err(SlabError::Config("shape and box headers need three entries".into()));
    }
    let dims = (parse_usize(&shape[0])?, parse_usize(&shape[1])?, parse_usize(&shape[2])?);
    let lens = (parse_f64(&bx[0])?, parse_f64(&bx[1])?, parse_f64(&bx[2])?);
    let mut f = Array3::from_elem(dims, f64::NAN);
    let mut rdr = csv::Reader::from_reader(reader);
    let mut count = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 7 {
            return Err(SlabError::Config(format!("row {count} has {} fields", rec.len())));
        }
        let (i, j, k) = (parse_usize(&rec[0])?, parse_usize(&rec[1])?, parse_usize(&rec[2])?);
        if i >= dims.0 || j >= dims.1 || k >= dims.2 {
            return Err(SlabError::Config(format!("index ({i}, {j}, {k}) outside shape {dims:?}")));
        }
        f[[i, j, k]] = parse_f64(&rec[6])?;
        count += 1;
    }
    if count != dims.0 * dims.1 * dims.2 || f.iter().any(|v| v.is_nan()) {
        return Err(SlabError::Config("grid function is incomplete".into()));
    }
    Ok((dims, lens, f))
}

/// Writes a table with a `# config:` provenance line.
pub fn write_table(path: &Path, config_json: &str, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut file = File::create(path)?;
    writeln!(file, "# config: {config_json}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(headers).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Table whose first columns are labels rather than numbers.
pub fn write_labelled_table(path: &Path, config_json: &str, headers: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut file = File::create(path)?;
    writeln!(file, "# config: {config_json}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(headers).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SlabDomain;

    #[test]
    fn grid_function_round_trips_exactly() {
        let g = SlabGrid::new(SlabDomain::periodic(1.3, 0.7, 2.0).unwrap(), 4, 2, 5).unwrap();
        let f = g.field_from_fn(|x1, x2, x3| (x1 * 3.1).sin() / 7.0 + x2 * x3 + 1e-300);
        let mut buf = Vec::new();
        write_grid_function(&mut buf, &g, &f).unwrap();
        let (dims, lens, back) = read_grid_function(buf.as_slice()).unwrap();
        assert_eq!(dims, (4, 2, 5));
        assert_eq!(lens, (1.3, 0.7, 2.0));
        assert_eq!(back, f);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let g = SlabGrid::new(SlabDomain::periodic(1.0, 1.0, 1.0).unwrap(), 2, 2, 3).unwrap();
        let mut buf = Vec::new();
        write_grid_function(&mut buf, &g, &g.zeros()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(8).collect::<Vec<_>>().join("\n");
        assert!(read_grid_function(cut.as_bytes()).is_err());
    }
}
