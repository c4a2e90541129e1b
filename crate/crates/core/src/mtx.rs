//! MatrixMarket coordinate files (`real general`, 1-based indices).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::quadtree::QuadTreeMatrix;

pub const HEADER: &str = "%%MatrixMarket matrix coordinate real general";

/// Square coordinate matrix as read from a MatrixMarket file, 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Coordinates {
    pub dimension: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Coordinates {
    pub fn to_quadtree(&self, leaf_size: usize) -> Result<QuadTreeMatrix> {
        QuadTreeMatrix::from_coordinates(&self.entries, self.dimension, leaf_size)
    }
}

pub fn parse<R: Read>(reader: R) -> Result<Coordinates> {
    let mut lines = BufReader::new(reader).lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(Error::parse(1, "empty file")),
    };
    let fields: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(Error::parse(
            1,
            format!("not a MatrixMarket header: {header:?}"),
        ));
    }
    if fields[2] != "coordinate" || fields[3] != "real" || fields[4] != "general" {
        return Err(Error::parse(
            1,
            format!(
                "unsupported format {} {} {}",
                fields[2], fields[3], fields[4]
            ),
        ));
    }

    let mut size: Option<(usize, usize)> = None;
    let mut entries = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let mut parts = line.split_whitespace();
        match size {
            None => {
                let nums: Vec<usize> = parts
                    .map(|p| p.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::parse(line_no, format!("bad size line: {e}")))?;
                let [rows, cols, nnz] = nums[..] else {
                    return Err(Error::parse(line_no, "size line needs rows, cols and nnz"));
                };
                if rows != cols {
                    return Err(Error::parse(
                        line_no,
                        format!("matrix must be square, got {rows}x{cols}"),
                    ));
                }
                if rows == 0 {
                    return Err(Error::parse(line_no, "matrix dimension must be positive"));
                }
                entries.reserve(nnz);
                size = Some((rows, nnz));
            }
            Some((n, _)) => {
                let (Some(r), Some(c), Some(v), None) =
                    (parts.next(), parts.next(), parts.next(), parts.next())
                else {
                    return Err(Error::parse(line_no, "entry needs row, col and value"));
                };
                let index = |s: &str| -> Result<usize> {
                    let i: usize = s
                        .parse()
                        .map_err(|e| Error::parse(line_no, format!("bad index {s:?}: {e}")))?;
                    if i == 0 || i > n {
                        return Err(Error::parse(line_no, format!("index {i} outside 1..={n}")));
                    }
                    Ok(i - 1)
                };
                let value: f64 = v
                    .parse()
                    .map_err(|e| Error::parse(line_no, format!("bad value {v:?}: {e}")))?;
                entries.push((index(r)?, index(c)?, value));
            }
        }
    }
    let Some((dimension, nnz)) = size else {
        return Err(Error::parse(1, "missing size line"));
    };
    if entries.len() != nnz {
        return Err(Error::parse(
            0,
            format!("size line declares {nnz} entries, found {}", entries.len()),
        ));
    }
    Ok(Coordinates { dimension, entries })
}

pub fn read_matrix(path: impl AsRef<Path>, leaf_size: usize) -> Result<QuadTreeMatrix> {
    parse(File::open(path)?)?.to_quadtree(leaf_size)
}

/// Writes the non-zero entries with 17 significant digits.
pub fn write<W: Write>(matrix: &QuadTreeMatrix, mut out: W) -> Result<()> {
    let mut entries = matrix.to_coordinates();
    entries.sort_by_key(|&(r, c, _)| (c, r));
    writeln!(out, "{HEADER}")?;
    let n = matrix.dimension();
    writeln!(out, "{n} {n} {}", entries.len())?;
    for (r, c, v) in entries {
        writeln!(out, "{} {} {:.16e}", r + 1, c + 1, v)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_matrix(matrix: &QuadTreeMatrix, path: impl AsRef<Path>) -> Result<()> {
    write(matrix, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_small_file() {
        let text =
            "%%MatrixMarket matrix coordinate real general\n% comment\n3 3 2\n1 1 2.5\n3 2 -1e-3\n";
        let c = parse(text.as_bytes()).unwrap();
        assert_eq!(c.dimension, 3);
        assert_eq!(c.entries, vec![(0, 0, 2.5), (2, 1, -1e-3)]);
    }

    #[test]
    fn rejects_bad_input() {
        let cases = [
            "",
            "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 1\n",
            "%%MatrixMarket matrix coordinate real general\n2 3 0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 1\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 x\n",
            "%%MatrixMarket matrix coordinate real general\n",
        ];
        for case in cases {
            assert!(parse(case.as_bytes()).is_err(), "accepted {case:?}");
        }
    }

    #[test]
    fn duplicates_fail_on_conversion() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n1 1 2\n";
        let c = parse(text.as_bytes()).unwrap();
        assert!(matches!(
            c.to_quadtree(4),
            Err(Error::DuplicateEntry { .. })
        ));
    }

    #[test]
    fn writes_header_and_one_based_indices() {
        let m = QuadTreeMatrix::from_coordinates(&[(0, 1, 0.1), (2, 2, -3.0)], 3, 2).unwrap();
        let mut buf = Vec::new();
        write(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], HEADER);
        assert_eq!(lines[1], "3 3 2");
        assert!(lines[2].starts_with("1 2 1.0000000000000001e-1"));
        assert!(lines[3].starts_with("3 3 -3.0000000000000000e0"));
    }
}
