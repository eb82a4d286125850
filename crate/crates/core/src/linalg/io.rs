//! Plain-text matrix format: a `rows cols` header line followed by
//! whitespace-separated row-major decimals. Point sets use the same layout
//! with an `n d` header.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use super::DenseMatrix;
use crate::error::{Error, Result};

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path)?;
    read_matrix_from(text.as_bytes())
}

pub fn read_matrix_from(reader: impl BufRead) -> Result<DenseMatrix> {
    let mut tokens = Vec::new();
    for line in reader.lines() {
        let line = line?;
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    let mut it = tokens.into_iter();
    let mut dim = |what: &str| -> Result<usize> {
        it.next()
            .ok_or_else(|| Error::Parse(format!("missing {what} in header")))?
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let values = it
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad entry `{t}`: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} entries for a {rows}x{cols} matrix, found {}",
            rows * cols,
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse("non-finite entry".into()));
    }
    Ok(DenseMatrix::from_row_slice(rows, cols, &values))
}

pub fn write_matrix(path: impl AsRef<Path>, a: &DenseMatrix) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    write_matrix_to(&mut file, a)?;
    file.flush()?;
    Ok(())
}

/// Writes `a` using the shortest decimal form that round-trips each `f64`.
pub fn write_matrix_to(mut w: impl Write, a: &DenseMatrix) -> Result<()> {
    writeln!(w, "{} {}", a.nrows(), a.ncols())?;
    for i in 0..a.nrows() {
        let row: Vec<String> = (0..a.ncols()).map(|j| format!("{}", a[(i, j)])).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_header_and_entries() {
        let m = read_matrix_from("2 3\n1 2 3\n4.5 -6 7e-3\n".as_bytes()).unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m[(1, 2)], 7e-3);
    }

    #[test]
    fn rejects_short_body() {
        assert!(matches!(
            read_matrix_from("2 2\n1 2 3\n".as_bytes()),
            Err(Error::Parse(_))
        ));
        assert!(read_matrix_from("".as_bytes()).is_err());
        assert!(read_matrix_from("1 1\nnan\n".as_bytes()).is_err());
    }

    #[test]
    fn written_text_reads_back_bit_exact() {
        let m = DenseMatrix::from_row_slice(2, 2, &[0.1, 1.0 / 3.0, -2.5e-300, 7.0]);
        let mut buf = Vec::new();
        write_matrix_to(&mut buf, &m).unwrap();
        let back = read_matrix_from(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }
}
