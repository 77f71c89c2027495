//! CSV interchange for data sets and matrices: comma separated, `.` decimal,
//! optional single header row, `#` comment lines, dimensions inferred from
//! the content.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Parse a numeric CSV table. A first row that does not parse as numbers is
/// taken as a header. Line numbers in errors are 1-based.
pub fn read_matrix_from<R: Read>(reader: R) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse { line: k + 1, msg: e.to_string() })?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if rows.is_empty() && width.is_none() => {
                width = Some(record.len());
                continue;
            }
            Err(e) => {
                let bad = record.iter().find(|f| f.parse::<f64>().is_err()).unwrap_or("");
                return Err(Error::Parse { line, msg: format!("invalid number '{bad}': {e}") });
            }
        };
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse { line, msg: format!("non-finite value {bad}") });
        }
        match width {
            Some(w) if w != values.len() => {
                return Err(Error::Parse { line, msg: format!("expected {w} fields, found {}", values.len()) });
            }
            _ => width = Some(values.len()),
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 0, msg: "no numeric rows".into() });
    }
    let cols = rows[0].len();
    Ok(Matrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    read_matrix_from(File::open(path)?)
}

/// Write rows with full round-trip precision and an optional header.
pub fn write_matrix_to<W: Write>(writer: W, m: &Matrix, header: Option<&[String]>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    if let Some(h) = header {
        wtr.write_record(h).map_err(to_io)?;
    }
    for row in m.row_iter() {
        wtr.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(to_io)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_matrix(path: impl AsRef<Path>, m: &Matrix, header: Option<&[String]>) -> Result<()> {
    write_matrix_to(File::create(path)?, m, header)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_round_trip() {
        let m = read_matrix_from("x1,x2\n1.5,-2\n0.1,3e-3\n".as_bytes()).unwrap();
        assert_eq!(m, Matrix::from_row_slice(2, 2, &[1.5, -2.0, 0.1, 3e-3]));
        let mut buf = Vec::new();
        let m = Matrix::from_row_slice(2, 2, &[0.1 + 0.2, 1.0 / 3.0, -7.0, 1e-300]);
        write_matrix_to(&mut buf, &m, None).unwrap();
        assert_eq!(read_matrix_from(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match read_matrix_from("1,2\n3,x\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        match read_matrix_from("1,2\n3,4,5\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
