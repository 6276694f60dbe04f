//! MatrixMarket coordinate and array I/O.
//!
//! Matrices are exchanged in coordinate format (`real general` on write;
//! `general` and `symmetric` on read). Vectors are single-column arrays,
//! with plain newline-separated text accepted as a fallback on read.
//! Floating-point output carries 17 significant digits so values round-trip
//! exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_header(path: &Path, line: &str) -> Result<(Layout, Symmetry)> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 5 || fields[0] != "%%MatrixMarket" || fields[1] != "matrix" {
        return Err(parse_err(
            path,
            1,
            "expected header '%%MatrixMarket matrix <layout> real <symmetry>'",
        ));
    }
    let layout = match fields[2] {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(parse_err(path, 1, format!("unsupported layout '{other}'"))),
    };
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(parse_err(
            path,
            1,
            format!("unsupported field type '{}'", fields[3]),
        ));
    }
    let symmetry = match fields[4] {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => {
            return Err(parse_err(
                path,
                1,
                format!("unsupported symmetry '{other}'"),
            ))
        }
    };
    Ok((layout, symmetry))
}

/// Read a sparse matrix in MatrixMarket coordinate format.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let (lineno, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 0, "empty file"))?;
    let (layout, symmetry) = parse_header(path, &header?)?;
    if layout != Layout::Coordinate {
        return Err(parse_err(path, lineno + 1, "expected coordinate layout"));
    }

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut trips: Vec<(usize, usize, f64)> = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match dims {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(path, lineno + 1, "expected 'nrows ncols nnz'"));
                }
                let n: Vec<usize> = fields
                    .iter()
                    .map(|f| {
                        f.parse()
                            .map_err(|_| parse_err(path, lineno + 1, "bad dimension"))
                    })
                    .collect::<Result<_>>()?;
                dims = Some((n[0], n[1], n[2]));
                trips.reserve(n[2]);
            }
            Some((nrows, ncols, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(path, lineno + 1, "expected 'row col value'"));
                }
                let r: usize = fields[0]
                    .parse()
                    .map_err(|_| parse_err(path, lineno + 1, "bad row index"))?;
                let c: usize = fields[1]
                    .parse()
                    .map_err(|_| parse_err(path, lineno + 1, "bad column index"))?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(path, lineno + 1, "bad value"))?;
                if r == 0 || c == 0 || r > nrows || c > ncols {
                    return Err(parse_err(
                        path,
                        lineno + 1,
                        format!("entry ({r}, {c}) outside {nrows}x{ncols} (1-based)"),
                    ));
                }
                trips.push((r - 1, c - 1, v));
                if symmetry == Symmetry::Symmetric && r != c {
                    trips.push((c - 1, r - 1, v));
                }
            }
        }
    }
    let (nrows, ncols, nnz) = dims.ok_or_else(|| parse_err(path, 0, "missing dimension line"))?;
    let seen = if symmetry == Symmetry::Symmetric {
        // mirrored off-diagonal entries were pushed twice
        trips.iter().filter(|(r, c, _)| r <= c).count()
    } else {
        trips.len()
    };
    if seen != nnz {
        return Err(parse_err(
            path,
            0,
            format!("header promises {nnz} entries, file has {seen}"),
        ));
    }
    SparseMatrix::from_triplets(nrows, ncols, trips)
}

/// Write a sparse matrix in MatrixMarket coordinate format (`real general`).
pub fn write_matrix(path: impl AsRef<Path>, m: &SparseMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (r, c, v) in m.triplets() {
        writeln!(w, "{} {} {:.16e}", r + 1, c + 1, v)?;
    }
    Ok(())
}

/// Read a vector: a single-column MatrixMarket array, or plain
/// newline-separated numbers when the MatrixMarket header is absent.
pub fn read_vector(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut lines: Vec<(usize, String)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        lines.push((i + 1, line?));
    }
    let first = lines
        .iter()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| parse_err(path, 0, "empty file"))?;

    if first.1.trim_start().starts_with("%%MatrixMarket") {
        let (layout, _) = parse_header(path, &first.1)?;
        if layout != Layout::Array {
            return Err(parse_err(path, first.0, "expected array layout for a vector"));
        }
        let mut dims: Option<(usize, usize)> = None;
        let mut values = Vec::new();
        for (lineno, line) in lines.iter().skip_while(|(n, _)| *n <= first.0) {
            let line = line.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            match dims {
                None => {
                    let fields: Vec<&str> = line.split_whitespace().collect();
                    if fields.len() != 2 {
                        return Err(parse_err(path, *lineno, "expected 'nrows ncols'"));
                    }
                    let nr: usize = fields[0]
                        .parse()
                        .map_err(|_| parse_err(path, *lineno, "bad dimension"))?;
                    let nc: usize = fields[1]
                        .parse()
                        .map_err(|_| parse_err(path, *lineno, "bad dimension"))?;
                    if nc != 1 {
                        return Err(parse_err(path, *lineno, "vector must have one column"));
                    }
                    dims = Some((nr, nc));
                    values.reserve(nr);
                }
                Some(_) => {
                    let v: f64 = line
                        .parse()
                        .map_err(|_| parse_err(path, *lineno, "bad value"))?;
                    values.push(v);
                }
            }
        }
        let (nr, _) = dims.ok_or_else(|| parse_err(path, 0, "missing dimension line"))?;
        if values.len() != nr {
            return Err(parse_err(
                path,
                0,
                format!("header promises {nr} values, file has {}", values.len()),
            ));
        }
        Ok(DVector::from_vec(values))
    } else {
        let mut values = Vec::new();
        for (lineno, line) in &lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|_| parse_err(path, *lineno, "bad value"))?;
            values.push(v);
        }
        Ok(DVector::from_vec(values))
    }
}

/// Write a vector as a single-column MatrixMarket array.
pub fn write_vector(path: impl AsRef<Path>, v: &DVector<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", v.len())?;
    for x in v.iter() {
        writeln!(w, "{x:.16e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.mtx");
        let m = SparseMatrix::from_triplets(
            3,
            2,
            vec![
                (0, 0, 1.0 / 3.0),
                (1, 1, -2.718281828459045e-7),
                (2, 0, 1e30),
            ],
        )
        .unwrap();
        write_matrix(&p, &m).unwrap();
        let back = read_matrix(&p).unwrap();
        assert_eq!(m, back);

        // a second write of the re-read matrix is byte-identical
        let p2 = dir.path().join("m2.mtx");
        write_matrix(&p2, &back).unwrap();
        assert_eq!(
            std::fs::read(&p).unwrap(),
            std::fs::read(&p2).unwrap()
        );
    }

    #[test]
    fn reads_symmetric_storage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.mtx");
        let mut f = File::create(&p).unwrap();
        writeln!(f, "%%MatrixMarket matrix coordinate real symmetric").unwrap();
        writeln!(f, "% lower triangle only").unwrap();
        writeln!(f, "2 2 3").unwrap();
        writeln!(f, "1 1 2.0").unwrap();
        writeln!(f, "2 1 -1.0").unwrap();
        writeln!(f, "2 2 2.0").unwrap();
        drop(f);
        let m = read_matrix(&p).unwrap();
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.symmetry_gap(), 0.0);
    }

    #[test]
    fn vector_round_trip_and_plain_text() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.mtx");
        let v = DVector::from_vec(vec![1.5, -2.25, 1.0 / 7.0]);
        write_vector(&p, &v).unwrap();
        assert_eq!(read_vector(&p).unwrap(), v);

        let q = dir.path().join("v.txt");
        let mut f = File::create(&q).unwrap();
        writeln!(f, "# plain text vector").unwrap();
        writeln!(f, "1.5").unwrap();
        writeln!(f).unwrap();
        writeln!(f, "-2.25").unwrap();
        drop(f);
        assert_eq!(
            read_vector(&q).unwrap(),
            DVector::from_vec(vec![1.5, -2.25])
        );
    }

    #[test]
    fn malformed_inputs_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.mtx");
        let mut f = File::create(&p).unwrap();
        writeln!(f, "%%MatrixMarket matrix coordinate real general").unwrap();
        writeln!(f, "2 2 1").unwrap();
        writeln!(f, "3 1 1.0").unwrap();
        drop(f);
        assert!(matches!(read_matrix(&p), Err(Error::Parse { .. })));

        let q = dir.path().join("short.mtx");
        let mut f = File::create(&q).unwrap();
        writeln!(f, "%%MatrixMarket matrix coordinate real general").unwrap();
        writeln!(f, "2 2 2").unwrap();
        writeln!(f, "1 1 1.0").unwrap();
        drop(f);
        assert!(matches!(read_matrix(&q), Err(Error::Parse { .. })));
    }
}
