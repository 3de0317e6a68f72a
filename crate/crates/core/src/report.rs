//! Bit-stable number formatting, CSV tables and density-matrix text files.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::linalg::CMatrix;

/// `printf("%.17g")`: 17 significant digits, shortest of fixed or
/// scientific notation, trailing zeros removed.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let fixed = format!("{:.*}", (16 - exp) as usize, x);
        strip_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", strip_zeros(mantissa), sign, exp.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Column-labelled table of formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// A single table cell.
pub enum Cell {
    Int(usize),
    Real(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => fmt_g17(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row.iter().map(Cell::render).collect());
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("cells are UTF-8")
    }
}

/// Rows of `re im` pairs.
pub fn write_density_matrix<W: Write>(m: &CMatrix, mut out: W) -> std::io::Result<()> {
    for r in 0..m.nrows() {
        let line: Vec<String> = (0..m.ncols())
            .map(|c| format!("{} {}", fmt_g17(m[(r, c)].re), fmt_g17(m[(r, c)].im)))
            .collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum StateFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("token {0:?} is not a number")]
    BadNumber(String),
    #[error("{0} numbers do not form a square matrix of re/im pairs")]
    NotSquare(usize),
}

pub fn read_density_matrix<R: Read>(mut input: R) -> Result<CMatrix, StateFileError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| StateFileError::BadNumber(t.to_string())))
        .collect::<Result<_, _>>()?;
    let pairs = values.len() / 2;
    let n = (pairs as f64).sqrt().round() as usize;
    if !values.len().is_multiple_of(2) || n * n != pairs || n == 0 {
        return Err(StateFileError::NotSquare(values.len()));
    }
    Ok(CMatrix::from_fn(n, n, |r, c| {
        let i = 2 * (r * n + c);
        Complex64::new(values[i], values[i + 1])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g17() {
        let cases = [
            (1.0, "1"),
            (0.1, "0.10000000000000001"),
            (-2.5, "-2.5"),
            (1e-5, "1.0000000000000001e-05"),
            (1e17, "1e+17"),
            (123456789.0, "123456789"),
            (0.0001, "0.0001"),
            (1.0 / 3.0, "0.33333333333333331"),
            (6.02214076e23, "6.0221407599999999e+23"),
            (1e16, "10000000000000000"),
        ];
        for (x, s) in cases {
            assert_eq!(fmt_g17(x), s, "{x:e}");
        }
    }

    #[test]
    fn round_trips() {
        for x in [std::f64::consts::PI, -1.0e-300, 5e-324, f64::MAX, 0.1 + 0.2] {
            assert_eq!(fmt_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn state_file_round_trip() {
        let m = CMatrix::from_fn(2, 2, |r, c| Complex64::new(0.1 * (r + 1) as f64, c as f64 / 3.0));
        let mut buf = Vec::new();
        write_density_matrix(&m, &mut buf).unwrap();
        assert_eq!(read_density_matrix(buf.as_slice()).unwrap(), m);
        assert!(matches!(
            read_density_matrix("1 0 0".as_bytes()),
            Err(StateFileError::NotSquare(3))
        ));
    }

    #[test]
    fn csv_table() {
        let mut t = Table::new(&["m", "omega"]);
        t.push(vec![2usize.into(), 0.5.into()]);
        assert_eq!(t.to_csv_string(), "m,omega\n2,0.5\n");
    }
}
