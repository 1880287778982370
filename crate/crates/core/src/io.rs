//! Plain-text matrix and vector files.
//!
//! A matrix file starts with a line `m n` followed by `m` lines of `n`
//! whitespace-separated reals. A vector file holds one value per line. Blank
//! lines and lines starting with `#` are ignored in both.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linops::{DenseMatrix, Vector};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_real(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| Error::Parse { line, msg: format!("`{tok}` is not a number") })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, msg: format!("`{tok}` is not finite") });
    }
    Ok(v)
}

pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty matrix file".into() })?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(Error::Parse { line: hline, msg: "header must be `m n`".into() });
    }
    let parse_dim = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse { line: hline, msg: format!("bad dimension `{s}`") });
    let (m, n) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    let mut entries = Vec::with_capacity(m * n);
    let mut last = hline;
    for _ in 0..m {
        let (ln, row) = lines.next().ok_or(Error::Parse { line: last + 1, msg: format!("expected {m} rows") })?;
        last = ln;
        let vals: Vec<&str> = row.split_whitespace().collect();
        if vals.len() != n {
            return Err(Error::Parse { line: ln, msg: format!("expected {n} entries, found {}", vals.len()) });
        }
        for tok in vals {
            entries.push(parse_real(tok, ln)?);
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::Parse { line: ln, msg: "trailing data after last row".into() });
    }
    Ok(DenseMatrix::from_row_slice(m, n, &entries))
}

pub fn parse_vector(text: &str) -> Result<Vector> {
    let mut vals = Vec::new();
    for (ln, line) in content_lines(text) {
        let mut toks = line.split_whitespace();
        let tok = toks.next().unwrap_or_default();
        if toks.next().is_some() {
            return Err(Error::Parse { line: ln, msg: "one value per line expected".into() });
        }
        vals.push(parse_real(tok, ln)?);
    }
    Ok(Vector::from_vec(vals))
}

pub fn format_matrix(a: &DenseMatrix) -> String {
    let mut out = format!("{} {}\n", a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        let row: Vec<String> = a.row(i).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn format_vector(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}\n")).collect()
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    parse_matrix(&fs::read_to_string(path)?)
}

pub fn read_vector(path: &Path) -> Result<Vector> {
    parse_vector(&fs::read_to_string(path)?)
}

pub fn write_matrix(path: &Path, a: &DenseMatrix) -> Result<()> {
    Ok(fs::write(path, format_matrix(a))?)
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    Ok(fs::write(path, format_vector(v))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_exact() {
        let a = DenseMatrix::from_row_slice(2, 3, &[0.1, -2.5, 1e-17, 3.0, 1.0 / 3.0, -0.0]);
        let b = parse_matrix(&format_matrix(&a)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = parse_matrix("2 2\n1 2\n3\n").unwrap_err();
        assert_eq!(err, Error::Parse { line: 3, msg: "expected 2 entries, found 1".into() });
        assert!(matches!(parse_matrix("1 1\nnan\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_vector("1\nx\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn comments_and_blank_lines() {
        let a = parse_matrix("# design\n1 2\n\n1 1\n").unwrap();
        assert_eq!(a, DenseMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
        assert_eq!(parse_vector("2\n# c\n-4\n").unwrap().as_slice(), &[2.0, -4.0]);
    }
}
