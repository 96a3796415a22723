//! Text formats for tensors and factor matrices.
//!
//! Sparse tensors: a `dims: I1 I2 … IN` header, then one `i1 i2 … iN value`
//! line per entry with 1-based indices. Dense tensors: the same header, then
//! all `∏ I_n` values, whitespace separated, first index fastest. In both,
//! `#` starts a comment and blank lines are ignored. Matrices are plain CSV
//! with one row per line; vectors are one value per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, SparseTensor, TensorData};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorFormat {
    Sparse,
    Dense,
}

impl TensorFormat {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "sparse" => Ok(TensorFormat::Sparse),
            "dense" => Ok(TensorFormat::Dense),
            other => Err(Error::Config(format!(
                "unknown tensor format {other:?} (expected \"sparse\" or \"dense\")"
            ))),
        }
    }

    /// `.tns` is sparse, anything else dense.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tns") => TensorFormat::Sparse,
            _ => TensorFormat::Dense,
        }
    }
}

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Lines with comments stripped, blank ones dropped, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("").trim();
        (!body.is_empty()).then_some((i + 1, body))
    })
}

fn parse_header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    path: &str,
) -> Result<Vec<usize>> {
    let (lineno, line) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing \"dims:\" header"))?;
    let rest = line
        .strip_prefix("dims:")
        .ok_or_else(|| parse_err(path, lineno, format!("expected \"dims: I1 … IN\" header, found {line:?}")))?;
    let dims: Vec<usize> = rest
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| parse_err(path, lineno, format!("bad mode size {t:?}")))
        })
        .collect::<Result<_>>()?;
    if dims.is_empty() {
        return Err(parse_err(path, lineno, "header lists no modes"));
    }
    if dims.contains(&0) {
        return Err(parse_err(path, lineno, "mode sizes must be positive"));
    }
    if dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).is_none() {
        return Err(parse_err(path, lineno, "tensor size overflows"));
    }
    Ok(dims)
}

fn parse_value(tok: &str, path: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad value {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value {tok:?}")));
    }
    Ok(v)
}

/// Parses the sparse format. Duplicate indices are summed; the number merged
/// is returned alongside the tensor.
pub fn parse_sparse_tensor(text: &str, path: &str) -> Result<(SparseTensor, usize)> {
    let mut lines = content_lines(text);
    let dims = parse_header(&mut lines, path)?;
    let n = dims.len();
    let mut entries = Vec::new();
    let mut lines_of = Vec::new();
    for (lineno, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != n + 1 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {} indices and a value, found {} fields", n, toks.len()),
            ));
        }
        let mut idx = Vec::with_capacity(n);
        for (mode, tok) in toks[..n].iter().enumerate() {
            let i: usize = tok
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad index {tok:?}")))?;
            if i == 0 || i > dims[mode] {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("index {i} out of range 1..={} in mode {}", dims[mode], mode + 1),
                ));
            }
            idx.push(i - 1);
        }
        lines_of.push((idx.clone(), lineno));
        entries.push((idx, parse_value(toks[n], path, lineno)?));
    }
    let (t, dups) = SparseTensor::from_entries_summing(dims, entries)?;
    if let Some((idx, _)) = t.entries().find(|(_, v)| !v.is_finite()) {
        let line = lines_of.iter().rev().find(|(i, _)| i == idx).map_or(1, |(_, l)| *l);
        let idx: Vec<usize> = idx.iter().map(|i| i + 1).collect();
        return Err(parse_err(path, line, format!("duplicate entries at {idx:?} sum to a non-finite value")));
    }
    if dups > 0 {
        log::warn!("{path}: summed {dups} duplicate entries");
    }
    Ok((t, dups))
}

pub fn parse_dense_tensor(text: &str, path: &str) -> Result<DenseTensor> {
    let mut lines = content_lines(text);
    let dims = parse_header(&mut lines, path)?;
    let total: usize = dims.iter().product();
    let mut values = Vec::new();
    let mut last_line = 1;
    for (lineno, line) in lines {
        last_line = lineno;
        for tok in line.split_whitespace() {
            if values.len() == total {
                return Err(parse_err(path, lineno, format!("more than {total} values")));
            }
            values.push(parse_value(tok, path, lineno)?);
        }
    }
    if values.len() != total {
        return Err(parse_err(
            path,
            last_line,
            format!("expected {total} values, found {}", values.len()),
        ));
    }
    DenseTensor::new(dims, values)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_sparse_tensor(path: &Path) -> Result<SparseTensor> {
    Ok(parse_sparse_tensor(&read_text(path)?, &path.display().to_string())?.0)
}

pub fn read_dense_tensor(path: &Path) -> Result<DenseTensor> {
    parse_dense_tensor(&read_text(path)?, &path.display().to_string())
}

pub fn read_tensor(path: &Path, format: TensorFormat) -> Result<TensorData> {
    Ok(match format {
        TensorFormat::Sparse => TensorData::Sparse(read_sparse_tensor(path)?),
        TensorFormat::Dense => TensorData::Dense(read_dense_tensor(path)?),
    })
}

fn write_dims<W: Write>(w: &mut W, dims: &[usize]) -> std::io::Result<()> {
    write!(w, "dims:")?;
    for d in dims {
        write!(w, " {d}")?;
    }
    writeln!(w)
}

/// Writes the sparse format. Values use the shortest representation that
/// parses back to the same number.
pub fn write_sparse_tensor<W: Write>(mut w: W, t: &SparseTensor) -> std::io::Result<()> {
    write_dims(&mut w, t.dims())?;
    for (idx, v) in t.entries() {
        for i in idx {
            write!(w, "{} ", i + 1)?;
        }
        writeln!(w, "{v}")?;
    }
    Ok(())
}

/// Writes the dense format, one mode-1 fiber per line.
pub fn write_dense_tensor<W: Write>(mut w: W, t: &DenseTensor) -> std::io::Result<()> {
    write_dims(&mut w, t.dims())?;
    for fiber in t.values().chunks(t.dims()[0]) {
        let line: Vec<String> = fiber.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Parses a CSV matrix: one row per line, every row the same length.
pub fn parse_matrix_csv(text: &str, path: &str) -> Result<Array2<f64>> {
    let mut cols = None;
    let mut values = Vec::new();
    let mut rows = 0;
    for (lineno, line) in content_lines(text) {
        let row: Vec<f64> = line
            .split(',')
            .map(|t| parse_value(t.trim(), path, lineno))
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(parse_err(path, lineno, format!("expected {c} columns, found {}", row.len())));
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| parse_err(path, 1, "empty matrix"))?;
    Ok(Array2::from_shape_vec((rows, cols), values).expect("row lengths checked"))
}

pub fn write_matrix_csv<W: Write>(mut w: W, a: &Array2<f64>) -> std::io::Result<()> {
    for row in a.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    parse_matrix_csv(&read_text(path)?, &path.display().to_string())
}

/// One value per line.
pub fn parse_vector(text: &str, path: &str) -> Result<Vec<f64>> {
    let m = parse_matrix_csv(text, path)?;
    if m.ncols() != 1 {
        return Err(parse_err(path, 1, format!("expected one value per line, found {} columns", m.ncols())));
    }
    Ok(m.into_raw_vec_and_offset().0)
}

pub fn write_vector<W: Write>(mut w: W, v: &[f64]) -> std::io::Result<()> {
    for x in v {
        writeln!(w, "{x}")?;
    }
    Ok(())
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    parse_vector(&read_text(path)?, &path.display().to_string())
}

/// Writes `contents` through `f` to a new file at `path`.
pub fn write_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<fs::File>) -> std::io::Result<()>,
{
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sparse_round_trip() {
        let text = "# counts\ndims: 3 2\n1 1 2.5\n3 2 -1 # trailing\n\n2 1 0.1\n";
        let (t, dups) = parse_sparse_tensor(text, "t.tns").unwrap();
        assert_eq!(dups, 0);
        assert_eq!(t.dims(), &[3, 2]);
        assert_eq!(t.get(&[2, 1]).unwrap(), -1.0);
        let mut buf = Vec::new();
        write_sparse_tensor(&mut buf, &t).unwrap();
        let (back, _) = parse_sparse_tensor(std::str::from_utf8(&buf).unwrap(), "mem").unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn sparse_duplicates_summed() {
        let (t, dups) = parse_sparse_tensor("dims: 2 2\n1 2 1\n1 2 2\n", "d").unwrap();
        assert_eq!(dups, 1);
        assert_eq!(t.get(&[0, 1]).unwrap(), 3.0);
    }

    #[test]
    fn sparse_errors_name_the_line() {
        let cases = [
            ("1 1 1\n", 1),
            ("dims: 2 2\n1 1\n", 2),
            ("dims: 2 2\n1 3 1\n", 2),
            ("dims: 2 2\n\n0 1 1\n", 3),
            ("dims: 2 x\n", 1),
            ("dims: 2 2\n1 1 nan\n", 2),
            ("dims: 2 2\n1 1 1e308\n2 2 1\n1 1 1e308\n", 4),
        ];
        for (text, line) in cases {
            match parse_sparse_tensor(text, "bad.tns") {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn dense_round_trip() {
        let t = DenseTensor::from_fn(vec![2, 3, 2], |i| (i[0] + 10 * i[1]) as f64 / 3.0).unwrap();
        let mut buf = Vec::new();
        write_dense_tensor(&mut buf, &t).unwrap();
        let back = parse_dense_tensor(std::str::from_utf8(&buf).unwrap(), "mem").unwrap();
        assert_eq!(back, t);
        assert!(parse_dense_tensor("dims: 2 2\n1 2 3\n", "x").is_err());
        assert!(parse_dense_tensor("dims: 1\n1 2\n", "x").is_err());
    }

    #[test]
    fn matrix_round_trip() {
        let a = array![[1.0, -2.5e-12], [0.1, 3.0]];
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &a).unwrap();
        assert_eq!(parse_matrix_csv(std::str::from_utf8(&buf).unwrap(), "m").unwrap(), a);
        assert!(parse_matrix_csv("1,2\n3\n", "m").is_err());
        assert!(parse_matrix_csv("", "m").is_err());
        let mut buf = Vec::new();
        write_vector(&mut buf, &[1.5, 2.0]).unwrap();
        assert_eq!(parse_vector(std::str::from_utf8(&buf).unwrap(), "v").unwrap(), vec![1.5, 2.0]);
    }
}
