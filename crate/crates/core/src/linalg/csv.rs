//! Matrix CSV codec: optional header row, optional leading label column,
//! comma-separated decimals written with 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{AlsiError, Result};
use crate::linalg::Matrix;

/// A matrix with optional column header and row labels.
///
/// When both are present the header's first cell names the label column.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub header: Option<Vec<String>>,
    pub row_labels: Option<Vec<String>>,
    pub matrix: Matrix<f64>,
}

impl LabeledMatrix {
    pub fn plain(matrix: Matrix<f64>) -> Self {
        LabeledMatrix {
            header: None,
            row_labels: None,
            matrix,
        }
    }

    /// Column names excluding the label column's name.
    pub fn column_names(&self) -> Option<&[String]> {
        let h = self.header.as_deref()?;
        Some(if self.row_labels.is_some() && !h.is_empty() {
            &h[1..]
        } else {
            h
        })
    }
}

/// Format like C's `%.17g`: shortest of fixed/scientific, trailing zeros trimmed.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-5..17).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        format!("{mantissa}e{exp}")
    } else {
        let decimals = (16 - exp).max(0) as usize;
        trim_fraction(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_matrix(path: &Path, lm: &LabeledMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| AlsiError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_matrix_to(&mut w, lm).map_err(|e| AlsiError::io(path, e))?;
    w.flush().map_err(|e| AlsiError::io(path, e))
}

pub fn write_matrix_to(w: &mut impl Write, lm: &LabeledMatrix) -> std::io::Result<()> {
    if let Some(h) = &lm.header {
        writeln!(w, "{}", h.iter().map(|c| quote(c)).collect::<Vec<_>>().join(","))?;
    }
    let m = &lm.matrix;
    for i in 0..m.rows() {
        let mut cells: Vec<String> = Vec::with_capacity(m.cols() + 1);
        if let Some(labels) = &lm.row_labels {
            cells.push(quote(&labels[i]).into_owned());
        }
        cells.extend(m.row(i).iter().map(|&v| format_g17(v)));
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

fn quote(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"")).into()
    } else {
        s.into()
    }
}

/// Read a matrix CSV. A first row containing any non-numeric value cell is a header.
pub fn read_matrix(path: &Path, has_row_labels: bool) -> Result<LabeledMatrix> {
    let file = File::open(path).map_err(|e| AlsiError::io(path, e))?;
    read_matrix_from(file, has_row_labels, &path.display().to_string())
}

pub fn read_matrix_from(
    reader: impl std::io::Read,
    has_row_labels: bool,
    source: &str,
) -> Result<LabeledMatrix> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_reader(reader);
    let skip = usize::from(has_row_labels);
    let mut header = None;
    let mut labels = Vec::new();
    let mut data = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 1;
        let rec = rec.map_err(|e| parse_err(source, line, 0, e.to_string()))?;
        if idx == 0 && rec.iter().skip(skip).any(|c| c.parse::<f64>().is_err()) {
            header = Some(rec.iter().map(str::to_string).collect::<Vec<_>>());
            continue;
        }
        let n = rec.len().saturating_sub(skip);
        match width {
            None => width = Some(n),
            Some(w) if w != n => {
                return Err(parse_err(
                    source,
                    line,
                    rec.len(),
                    format!("ragged row: {n} values, expected {w}"),
                ))
            }
            _ => {}
        }
        if has_row_labels {
            labels.push(rec.get(0).unwrap_or_default().to_string());
        }
        for (j, cell) in rec.iter().enumerate().skip(skip) {
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(source, line, j + 1, format!("non-numeric cell {cell:?}"))
            })?;
            if !v.is_finite() {
                return Err(parse_err(source, line, j + 1, format!("non-finite value {cell:?}")));
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = width.unwrap_or_else(|| {
        header
            .as_ref()
            .map_or(0, |h: &Vec<String>| h.len().saturating_sub(skip))
    });
    if let (Some(h), true) = (&header, rows > 0) {
        if h.len() != cols + skip {
            return Err(parse_err(
                source,
                1,
                h.len(),
                format!("header has {} cells, rows have {}", h.len(), cols + skip),
            ));
        }
    }
    Ok(LabeledMatrix {
        header,
        row_labels: has_row_labels.then_some(labels),
        matrix: Matrix::new(rows, cols, data)?,
    })
}

fn parse_err(source: &str, line: usize, column: usize, message: String) -> AlsiError {
    AlsiError::Parse {
        path: source.to_string(),
        line,
        column,
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g17_matches_printf() {
        assert_eq!(format_g17(0.0), "0");
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(-2.5), "-2.5");
        assert_eq!(format_g17(1e20), "1e20");
        assert_eq!(format_g17(1.5e-7), "1.4999999999999999e-7");
        assert_eq!(format_g17(123456.0), "123456");
    }

    #[test]
    fn labeled_roundtrip_and_header_detection() {
        let lm = LabeledMatrix {
            header: Some(vec!["gene".into(), "a".into(), "b".into()]),
            row_labels: Some(vec!["g1".into(), "g,2".into()]),
            matrix: Matrix::from_rows(&[vec![1.0, 0.25], vec![-3.0, 1e-300]]).unwrap(),
        };
        let mut buf = Vec::new();
        write_matrix_to(&mut buf, &lm).unwrap();
        let back = read_matrix_from(buf.as_slice(), true, "mem").unwrap();
        assert_eq!(back, lm);
        assert_eq!(back.column_names().unwrap(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn reports_bad_cells() {
        let err = read_matrix_from("1,2\n3,abc\n".as_bytes(), false, "mem").unwrap_err();
        match err {
            AlsiError::Parse { line, column, .. } => assert_eq!((line, column), (2, 2)),
            e => panic!("{e}"),
        }
        let err = read_matrix_from("1,2\n3\n".as_bytes(), false, "mem").unwrap_err();
        assert!(matches!(err, AlsiError::Parse { line: 2, .. }));
    }

    proptest! {
        #[test]
        fn g17_roundtrips_bit_exactly(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let back: f64 = format_g17(v).parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
