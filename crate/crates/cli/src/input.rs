//! CSV dataset reader: header `a1,…,an,b1,…,bd`, one observation per row.

use std::io::Read;

use eivgof::{DMatrix, EivDataset};

use crate::Failure;

fn parse_header(header: &csv::StringRecord) -> Result<(usize, usize), Failure> {
    let mut n = 0;
    let mut d = 0;
    for (col, name) in header.iter().enumerate() {
        let name = name.trim();
        let expected_a = format!("a{}", n + 1);
        let expected_b = format!("b{}", d + 1);
        if d == 0 && name == expected_a {
            n += 1;
        } else if name == expected_b {
            d += 1;
        } else {
            let want = if d == 0 {
                format!("'{expected_a}' or '{expected_b}'")
            } else {
                format!("'{expected_b}'")
            };
            return Err(Failure::usage(format!(
                "header column {}: expected {want}, found '{name}'",
                col + 1
            )));
        }
    }
    if n == 0 || d == 0 {
        return Err(Failure::usage("header must name at least one a-column and one b-column"));
    }
    Ok((n, d))
}

/// Reads a dataset; `n`/`d`, when given, must agree with the header.
pub fn read_dataset(
    reader: impl Read,
    n: Option<usize>,
    d: Option<usize>,
) -> Result<EivDataset, Failure> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Failure::usage(format!("cannot read CSV header: {e}")))?
        .clone();
    let (hn, hd) = parse_header(&header)?;
    if let Some(n) = n.filter(|&n| n != hn) {
        return Err(Failure::usage(format!("--n {n} but the header has {hn} a-columns")));
    }
    if let Some(d) = d.filter(|&d| d != hd) {
        return Err(Failure::usage(format!("--d {d} but the header has {hd} b-columns")));
    }

    let width = hn + hd;
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, record) in rdr.records().enumerate() {
        // data rows are numbered from 2 (the header is row 1)
        let line = i + 2;
        let record = record.map_err(|e| Failure::usage(format!("row {line}: {e}")))?;
        if record.len() != width {
            return Err(Failure::usage(format!(
                "row {line}: expected {width} fields, found {}",
                record.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Failure::usage(format!(
                    "row {line}, column {} ({}): '{field}' is not a number",
                    col + 1,
                    &header[col]
                ))
            })?;
            if !v.is_finite() {
                return Err(Failure::usage(format!(
                    "row {line}, column {} ({}): value must be finite",
                    col + 1,
                    &header[col]
                )));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Failure::usage("CSV has no data rows"));
    }
    let c = DMatrix::from_row_slice(rows, width, &values);
    EivDataset::new(c.columns(0, hn).into_owned(), c.columns(hn, hd).into_owned())
        .map_err(|e| Failure::usage(e.to_string()))
}
