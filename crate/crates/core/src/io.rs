//! Text formats: headerless matrix CSV with `NA` for unknown entries, and
//! observation CSV with a header row.

use crate::error::{Error, Result};
use crate::estimators::DataMatrix;
use crate::linalg::Matrix;

/// Token for an unknown matrix entry.
pub const MISSING: &str = "NA";

/// Square or rectangular matrix, one row per line, no header. `NA` (and empty
/// fields) parse to NaN.
pub fn read_matrix_csv(text: &str) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: line + 1,
            message: e.to_string(),
        })?;
        let row = rec
            .iter()
            .map(|f| parse_entry(f, line + 1))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "empty matrix".into(),
        });
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn parse_entry(field: &str, line: usize) -> Result<f64> {
    if field.is_empty() || field.eq_ignore_ascii_case(MISSING) {
        return Ok(f64::NAN);
    }
    field.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("not a number: {field:?}"),
    })
}

/// Writes with full round-trip precision; NaN becomes `NA`.
pub fn write_matrix_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m
            .row(i)
            .iter()
            .map(|v| if v.is_nan() { MISSING.to_string() } else { format!("{v:?}") })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parsed observation table.
#[derive(Debug, Clone)]
pub struct DataTable {
    pub data: DataMatrix,
    /// Values of the key column, aligned with the kept rows.
    pub keys: Option<Vec<String>>,
    pub dropped_rows: usize,
}

/// Reads observations with a header row. Rows with a missing or empty field
/// are dropped. `key_column`, if given, is kept as text (for date splits)
/// and excluded from the numeric data.
pub fn read_data_csv(text: &str, key_column: Option<&str>) -> Result<DataTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let key_idx = match key_column {
        Some(name) => Some(header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("no column named {name:?}"),
        })?),
        None => None,
    };
    let value_cols: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != key_idx).collect();
    let mut rows = Vec::new();
    let mut keys = Vec::new();
    let mut dropped = 0;
    for (n, rec) in reader.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let missing = rec.len() < header.len()
            || rec.iter().any(|f| f.is_empty() || f.eq_ignore_ascii_case(MISSING));
        if missing {
            dropped += 1;
            continue;
        }
        let row = value_cols
            .iter()
            .map(|&c| {
                rec[c].parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("column {:?}: not a number: {:?}", header[c], &rec[c]),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
        if let Some(k) = key_idx {
            keys.push(rec[k].to_string());
        }
    }
    if dropped > 0 {
        log::info!("dropped {dropped} rows with missing fields");
    }
    let names = value_cols.iter().map(|&c| header[c].clone()).collect();
    let data = DataMatrix::from_rows(&rows)?.with_names(names)?;
    Ok(DataTable {
        data,
        keys: key_idx.map(|_| keys),
        dropped_rows: dropped,
    })
}

/// Header row of `names` (or `X1..Xd`) followed by the rows of `m`.
pub fn write_data_csv(m: &Matrix, names: Option<&[String]>) -> String {
    let header: Vec<String> = match names {
        Some(n) => n.to_vec(),
        None => (1..=m.ncols()).map(|j| format!("X{j}")).collect(),
    };
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
