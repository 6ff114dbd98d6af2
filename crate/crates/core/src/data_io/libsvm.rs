//! LibSVM text format: `<label> <index>:<value> ...`, 1-based indices.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum LibSvmError {
    #[error("dataset is empty")]
    Empty,
    #[error("line {line}: malformed token `{token}`: {reason}")]
    Malformed {
        line: usize,
        token: String,
        reason: &'static str,
    },
    #[error("line {line}: label `{label}` is not one of +1, -1, 1, 0")]
    BadLabel { line: usize, label: String },
    #[error("line {line}: feature index 0 is invalid (indices are 1-based)")]
    ZeroIndex { line: usize },
    #[error("line {line}: duplicate feature index {index}")]
    DuplicateIndex { line: usize, index: usize },
    #[error("line {line}: feature index {index} follows {previous}; indices must increase")]
    NonMonotone {
        line: usize,
        index: usize,
        previous: usize,
    },
    #[error("line {line}: feature index {index} exceeds the declared dimension {d}")]
    IndexBeyondDimension { line: usize, index: usize, d: usize },
    #[error("row {row} is all zeros and cannot be normalized")]
    ZeroRow { row: usize },
    #[error("row {row} has norm {norm}, expected 1")]
    NotNormalized { row: usize, norm: f64 },
    #[error("cannot split {rows} rows across {workers} workers")]
    Sharding { rows: usize, workers: usize },
    #[error("read failed at line {line}: {source}")]
    Io {
        line: usize,
        #[source]
        source: std::io::Error,
    },
}

/// Row-sparse dataset with 0-based feature indices and labels in {-1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    pub n_features: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Declared dimension; must be at least the largest index seen.
    pub n_features: Option<usize>,
    /// Treat this label as +1 and every other label as -1 (for corpora such
    /// as mushrooms that use 1/2).
    pub positive_label: Option<f64>,
}

impl SparseDataset {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn row_norm(&self, r: usize) -> f64 {
        self.row(r).1.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Every row scaled to unit Euclidean norm.
    pub fn normalize_rows(&self) -> Result<Self, LibSvmError> {
        let mut out = self.clone();
        for r in 0..self.n_rows() {
            let nrm = self.row_norm(r);
            if nrm == 0.0 {
                return Err(LibSvmError::ZeroRow { row: r });
            }
            for v in &mut out.values[self.indptr[r]..self.indptr[r + 1]] {
                *v /= nrm;
            }
        }
        Ok(out)
    }

    pub fn check_normalized(&self, tol: f64) -> Result<(), LibSvmError> {
        for r in 0..self.n_rows() {
            let nrm = self.row_norm(r);
            if (nrm - 1.0).abs() > tol {
                return Err(LibSvmError::NotNormalized { row: r, norm: nrm });
            }
        }
        Ok(())
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        let mut out = Self {
            n_features: self.n_features,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
            labels: Vec::with_capacity(rows.len()),
        };
        for &r in rows {
            let (idx, val) = self.row(r);
            out.indices.extend_from_slice(idx);
            out.values.extend_from_slice(val);
            out.indptr.push(out.indices.len());
            out.labels.push(self.labels[r]);
        }
        out
    }

    pub fn write_libsvm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in 0..self.n_rows() {
            let label = if self.labels[r] > 0.0 { "+1" } else { "-1" };
            write!(w, "{label}")?;
            let (idx, val) = self.row(r);
            for (i, v) in idx.iter().zip(val) {
                write!(w, " {}:{}", i + 1, v)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<SparseDataset, LibSvmError> {
    parse_libsvm_with(reader, ParseOptions::default())
}

pub fn parse_libsvm_with<R: BufRead>(
    reader: R,
    opts: ParseOptions,
) -> Result<SparseDataset, LibSvmError> {
    let mut ds = SparseDataset {
        n_features: 0,
        indptr: vec![0],
        indices: Vec::new(),
        values: Vec::new(),
        labels: Vec::new(),
    };
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.map_err(|source| LibSvmError::Io {
            line: line_no,
            source,
        })?;
        let content = match line.find('#') {
            Some(p) => &line[..p],
            None => &line[..],
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        ds.labels.push(parse_label(label_tok, line_no, opts.positive_label)?);
        let mut previous = 0usize;
        for tok in tokens {
            let (i_str, v_str) = tok.split_once(':').ok_or_else(|| LibSvmError::Malformed {
                line: line_no,
                token: tok.to_string(),
                reason: "expected index:value",
            })?;
            let index: usize = i_str.parse().map_err(|_| LibSvmError::Malformed {
                line: line_no,
                token: tok.to_string(),
                reason: "index is not a non-negative integer",
            })?;
            let value: f64 = v_str.parse().map_err(|_| LibSvmError::Malformed {
                line: line_no,
                token: tok.to_string(),
                reason: "value is not a number",
            })?;
            if !value.is_finite() {
                return Err(LibSvmError::Malformed {
                    line: line_no,
                    token: tok.to_string(),
                    reason: "value is not finite",
                });
            }
            if index == 0 {
                return Err(LibSvmError::ZeroIndex { line: line_no });
            }
            if index == previous {
                return Err(LibSvmError::DuplicateIndex {
                    line: line_no,
                    index,
                });
            }
            if index < previous {
                return Err(LibSvmError::NonMonotone {
                    line: line_no,
                    index,
                    previous,
                });
            }
            if let Some(d) = opts.n_features {
                if index > d {
                    return Err(LibSvmError::IndexBeyondDimension {
                        line: line_no,
                        index,
                        d,
                    });
                }
            }
            previous = index;
            max_index = max_index.max(index);
            ds.indices.push((index - 1) as u32);
            ds.values.push(value);
        }
        ds.indptr.push(ds.indices.len());
    }
    if ds.labels.is_empty() {
        return Err(LibSvmError::Empty);
    }
    ds.n_features = opts.n_features.unwrap_or(max_index);
    Ok(ds)
}

fn parse_label(tok: &str, line: usize, positive: Option<f64>) -> Result<f64, LibSvmError> {
    let bad = || LibSvmError::BadLabel {
        line,
        label: tok.to_string(),
    };
    let v: f64 = tok.parse().map_err(|_| bad())?;
    if let Some(p) = positive {
        return Ok(if v == p { 1.0 } else { -1.0 });
    }
    if v == 1.0 {
        Ok(1.0)
    } else if v == -1.0 || v == 0.0 {
        Ok(-1.0)
    } else {
        Err(bad())
    }
}

/// Random split of `0..n_rows` into `n_workers` shards whose sizes differ by
/// at most one; shard `i` is sorted ascending.
pub fn partition_data(
    n_rows: usize,
    n_workers: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, LibSvmError> {
    if n_workers == 0 || n_workers > n_rows {
        return Err(LibSvmError::Sharding {
            rows: n_rows,
            workers: n_workers,
        });
    }
    let mut perm: Vec<usize> = (0..n_rows).collect();
    if n_workers > 1 {
        perm.shuffle(&mut rng::stream(seed, rng::SETUP, 0));
    }
    let base = n_rows / n_workers;
    let extra = n_rows % n_workers;
    let mut shards = Vec::with_capacity(n_workers);
    let mut at = 0;
    for i in 0..n_workers {
        let len = base + usize::from(i < extra);
        let mut s = perm[at..at + len].to_vec();
        s.sort_unstable();
        shards.push(s);
        at += len;
    }
    Ok(shards)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<SparseDataset, LibSvmError> {
        parse_libsvm(s.as_bytes())
    }

    #[test]
    fn parses_basic_line() {
        let ds = parse("+1 1:0.5 3:-2\n").unwrap();
        assert_eq!(ds.labels, vec![1.0]);
        assert_eq!(ds.row(0), (&[0u32, 2][..], &[0.5, -2.0][..]));
        assert_eq!(ds.n_features, 3);
    }

    #[test]
    fn zero_label_maps_to_minus_one_and_comments_are_stripped() {
        let ds = parse("# header\n0 2:1 # trailing\n\n-1 1:1\n").unwrap();
        assert_eq!(ds.labels, vec![-1.0, -1.0]);
        assert_eq!(ds.n_rows(), 2);
    }

    #[test]
    fn errors_are_distinct_and_carry_lines() {
        assert!(matches!(parse(""), Err(LibSvmError::Empty)));
        assert!(matches!(parse("# only\n"), Err(LibSvmError::Empty)));
        assert!(matches!(
            parse("1 1:1\n1 2\n"),
            Err(LibSvmError::Malformed { line: 2, .. })
        ));
        assert!(matches!(
            parse("1 a:1\n"),
            Err(LibSvmError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            parse("1 1:x\n"),
            Err(LibSvmError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            parse("1 1:1\n1 3:1 2:1\n"),
            Err(LibSvmError::NonMonotone { line: 2, .. })
        ));
        assert!(matches!(
            parse("1 2:1 2:3\n"),
            Err(LibSvmError::DuplicateIndex { line: 1, index: 2 })
        ));
        assert!(matches!(parse("3 1:1\n"), Err(LibSvmError::BadLabel { line: 1, .. })));
        assert!(matches!(parse("1 0:1\n"), Err(LibSvmError::ZeroIndex { line: 1 })));
    }

    #[test]
    fn explicit_dimension_override() {
        let ds = parse_libsvm_with(
            "1 1:1\n".as_bytes(),
            ParseOptions {
                n_features: Some(10),
                positive_label: None,
            },
        )
        .unwrap();
        assert_eq!(ds.n_features, 10);
        let err = parse_libsvm_with(
            "1 11:1\n".as_bytes(),
            ParseOptions {
                n_features: Some(10),
                positive_label: None,
            },
        );
        assert!(matches!(err, Err(LibSvmError::IndexBeyondDimension { .. })));
    }

    #[test]
    fn positive_label_mapping() {
        let ds = parse_libsvm_with(
            "1 1:1\n2 1:1\n".as_bytes(),
            ParseOptions {
                n_features: None,
                positive_label: Some(2.0),
            },
        )
        .unwrap();
        assert_eq!(ds.labels, vec![-1.0, 1.0]);
    }

    #[test]
    fn normalization() {
        let ds = parse("1 1:3 2:4\n-1 3:1\n1\n").unwrap();
        assert!(matches!(ds.normalize_rows(), Err(LibSvmError::ZeroRow { row: 2 })));
        let ds = parse("1 1:3 2:4\n-1 3:1\n").unwrap().normalize_rows().unwrap();
        assert_eq!(ds.row(0).1, &[0.6, 0.8]);
        assert_eq!(ds.row(1).1, &[1.0]);
        ds.check_normalized(1e-12).unwrap();
    }

    #[test]
    fn serialize_round_trip_is_a_fixpoint() {
        let text = "+1 1:0.1 5:-3.25 7:1e-7\n-1 2:0.3333333333333333\n";
        let ds = parse(text).unwrap();
        let mut buf = Vec::new();
        ds.write_libsvm(&mut buf).unwrap();
        let again = parse_libsvm(&buf[..]).unwrap();
        assert_eq!(ds, again);
        let mut buf2 = Vec::new();
        again.write_libsvm(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn shards_partition_rows() {
        let s = partition_data(10, 3, 1).unwrap();
        let mut sizes: Vec<usize> = s.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
        assert_eq!(partition_data(5, 1, 9).unwrap(), vec![vec![0, 1, 2, 3, 4]]);
        assert!(partition_data(5, 0, 9).is_err());
        assert!(partition_data(5, 6, 9).is_err());

        let s = partition_data(8124, 20, 3).unwrap();
        let mut all: Vec<usize> = s.concat();
        all.sort_unstable();
        assert_eq!(all, (0..8124).collect::<Vec<_>>());
        let lens: Vec<usize> = s.iter().map(Vec::len).collect();
        assert!(lens.iter().max().unwrap() - lens.iter().min().unwrap() <= 1);
    }
}
