//! Matrix Market coordinate files and plain one-value-per-line vector files.
//!
//! The reader accepts `matrix coordinate real` files with `symmetric` or
//! `general` symmetry. General files must actually be symmetric (every
//! off-diagonal entry needs a matching transpose entry); anything else is
//! rejected with a diagnostic carrying the 1-based line number. The writer
//! always emits the lower triangle with `symmetric` symmetry.

use crate::sparse::SparseSymMatrix;
use crate::{Error, Result};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Reads a sparse SPD candidate from a Matrix Market file.
pub fn read_matrix_market(path: &Path) -> Result<SparseSymMatrix> {
    let file = File::open(path)?;
    read_matrix_market_from(BufReader::new(file))
}

/// Reads from any source; see [`read_matrix_market`].
pub fn read_matrix_market_from<R: Read>(reader: R) -> Result<SparseSymMatrix> {
    let mut lines = BufReader::new(reader).lines();
    let mut lineno = 0usize;

    // header: %%MatrixMarket matrix coordinate real {symmetric|general}
    let header = loop {
        match lines.next() {
            Some(line) => {
                lineno += 1;
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "file is empty, expected a Matrix Market header".into(),
                })
            }
        }
    };
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("malformed Matrix Market header: {header:?}"),
        });
    }
    if tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(Error::Parse {
            line: lineno,
            msg: format!(
                "unsupported object/format '{} {}', only 'matrix coordinate' is supported",
                tokens[1], tokens[2]
            ),
        });
    }
    if tokens[3] != "real" {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("unsupported field '{}', only 'real' is supported", tokens[3]),
        });
    }
    let symmetric_storage = match tokens[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => {
            return Err(Error::Parse {
                line: lineno,
                msg: format!(
                    "unsupported symmetry '{other}', only 'symmetric' and 'general' are supported"
                ),
            })
        }
    };

    // size line (after any % comments)
    let (rows, cols, nnz, size_lineno) = loop {
        match lines.next() {
            Some(line) => {
                lineno += 1;
                let line = line?;
                let t = line.trim();
                if t.is_empty() || t.starts_with('%') {
                    continue;
                }
                let parts: Vec<&str> = t.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("expected 'rows cols nnz', got {t:?}"),
                    });
                }
                let parse = |s: &str| -> Result<usize> {
                    s.parse().map_err(|_| Error::Parse {
                        line: lineno,
                        msg: format!("cannot parse {s:?} as a dimension"),
                    })
                };
                break (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?, lineno);
            }
            None => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "unexpected end of file before the size line".into(),
                })
            }
        }
    };
    if rows != cols {
        return Err(Error::Parse {
            line: size_lineno,
            msg: format!("matrix must be square, got {rows} x {cols}"),
        });
    }
    let n = rows;

    let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(nnz);
    while entries.len() < nnz {
        let line = match lines.next() {
            Some(line) => {
                lineno += 1;
                line?
            }
            None => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {nnz} entries, file ended after {}", entries.len()),
                })
            }
        };
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 'i j value', got {t:?}"),
            });
        }
        let i: usize = parts[0].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("cannot parse row index {:?}", parts[0]),
        })?;
        let j: usize = parts[1].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("cannot parse column index {:?}", parts[1]),
        })?;
        let v: f64 = parts[2].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("cannot parse value {:?}", parts[2]),
        })?;
        if i < 1 || i > n || j < 1 || j > n {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("index ({i}, {j}) out of range for dimension {n} (indices are 1-based)"),
            });
        }
        if symmetric_storage && j > i {
            return Err(Error::Parse {
                line: lineno,
                msg: format!(
                    "entry ({i}, {j}) lies above the diagonal in a file declared symmetric"
                ),
            });
        }
        entries.push((i - 1, j - 1, v));
    }
    // anything left must be blank or comment
    for line in lines {
        lineno += 1;
        let line = line?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('%') {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("unexpected extra entry after {nnz} declared nonzeros: {t:?}"),
            });
        }
    }

    let lower = if symmetric_storage {
        entries
    } else {
        collapse_general_to_lower(n, entries, size_lineno)?
    };
    SparseSymMatrix::from_lower_triplets(n, &lower)
}

/// Verifies that a `general` file is numerically symmetric and collapses it
/// to lower-triangle triplets. Transposed pairs must agree to a relative
/// `1e-12`; the stored value is their average.
fn collapse_general_to_lower(
    n: usize,
    entries: Vec<(usize, usize, f64)>,
    size_lineno: usize,
) -> Result<Vec<(usize, usize, f64)>> {
    use std::collections::HashMap;
    let mut map: HashMap<(usize, usize), f64> = HashMap::with_capacity(entries.len());
    for (i, j, v) in entries {
        if map.insert((i, j), v).is_some() {
            return Err(Error::Parse {
                line: size_lineno,
                msg: format!("duplicate entry at ({}, {})", i + 1, j + 1),
            });
        }
    }
    let mut lower = Vec::with_capacity(map.len() / 2 + n);
    for (&(i, j), &v) in &map {
        if j > i {
            // value agreement is checked from the lower side; an upper entry
            // with no mirror below would otherwise be dropped silently
            if !map.contains_key(&(j, i)) {
                return Err(Error::Parse {
                    line: size_lineno,
                    msg: format!(
                        "general file is not symmetric: ({}, {}) present but ({}, {}) missing",
                        i + 1,
                        j + 1,
                        j + 1,
                        i + 1
                    ),
                });
            }
            continue;
        }
        if i == j {
            lower.push((i, j, v));
            continue;
        }
        match map.get(&(j, i)) {
            Some(&w) => {
                let scale = v.abs().max(w.abs()).max(1.0);
                if (v - w).abs() > 1e-12 * scale {
                    return Err(Error::Parse {
                        line: size_lineno,
                        msg: format!(
                            "general file is not symmetric: ({}, {}) = {v:e} but ({}, {}) = {w:e}",
                            i + 1,
                            j + 1,
                            j + 1,
                            i + 1
                        ),
                    });
                }
                lower.push((i, j, 0.5 * (v + w)));
            }
            None => {
                return Err(Error::Parse {
                    line: size_lineno,
                    msg: format!(
                        "general file is not symmetric: ({}, {}) present but ({}, {}) missing",
                        i + 1,
                        j + 1,
                        j + 1,
                        i + 1
                    ),
                })
            }
        }
    }
    // deterministic order regardless of hash iteration
    lower.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    Ok(lower)
}

/// Writes the lower triangle as `matrix coordinate real symmetric`,
/// 1-based. Values are printed in exponential form with round-trip
/// precision, so write-then-read reproduces the matrix exactly.
pub fn write_matrix_market(path: &Path, a: &SparseSymMatrix) -> Result<()> {
    let file = File::create(path)?;
    write_matrix_market_to(BufWriter::new(file), a)
}

/// Writes to any sink; see [`write_matrix_market`].
pub fn write_matrix_market_to<W: Write>(mut w: W, a: &SparseSymMatrix) -> Result<()> {
    let tri = a.lower_triplets();
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", a.n(), a.n(), tri.len())?;
    for (i, j, v) in tri {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Reads a plain vector file: one value per line, blank lines ignored.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| Error::Parse {
            line: idx + 1,
            msg: format!("cannot parse {t:?} as a number"),
        })?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "vector file contains no values".into(),
        });
    }
    Ok(out)
}

/// Writes a vector, one value per line, with round-trip precision.
pub fn write_vector(path: &Path, x: &[f64]) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    for v in x {
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}
