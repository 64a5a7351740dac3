use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::DenseDataset;
use crate::error::{Error, Result};

pub fn load_libsvm(path: impl AsRef<Path>) -> Result<DenseDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_libsvm(BufReader::new(file)).map_err(|e| match e {
        Error::Io { cause, .. } => Error::io(path, cause),
        other => other,
    })
}

/// Parses `label idx:val ...` lines with 1-based ascending indices.
///
/// Labels `-1`/`+1` map to 0/1; other non-negative integer labels are kept.
/// The feature count is the largest index seen in the file.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<DenseDataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut n_dims = 0;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<libsvm>", e))?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: lineno, message };

        let mut tokens = content.split_whitespace();
        let label_token = tokens.next().unwrap_or_default();
        labels.push(parse_label(label_token).ok_or_else(|| parse_err(format!("bad label `{label_token}`")))?);

        let mut entries = Vec::new();
        let mut last = 0;
        for token in tokens {
            let (idx, val) = token
                .split_once(':')
                .ok_or_else(|| parse_err(format!("expected `index:value`, got `{token}`")))?;
            let idx: usize = idx.parse().map_err(|_| parse_err(format!("bad index `{idx}`")))?;
            if idx == 0 {
                return Err(parse_err("indices are 1-based".into()));
            }
            if idx <= last {
                return Err(parse_err(format!("index {idx} is not ascending")));
            }
            let val: f64 = val.parse().map_err(|_| parse_err(format!("bad value `{val}`")))?;
            last = idx;
            entries.push((idx - 1, val));
        }
        n_dims = n_dims.max(last);
        rows.push(entries);
    }

    if rows.is_empty() {
        return Err(Error::Empty("libsvm input has no samples".into()));
    }

    let mut features = vec![0.0; rows.len() * n_dims];
    for (i, entries) in rows.iter().enumerate() {
        for &(j, v) in entries {
            features[i * n_dims + j] = v;
        }
    }
    DenseDataset::new(features, labels, n_dims)
}

fn parse_label(token: &str) -> Option<u32> {
    let value: f64 = token.parse().ok()?;
    if value == -1.0 {
        Some(0)
    } else if value >= 0.0 && value.fract() == 0.0 && value <= f64::from(u32::MAX) {
        Some(value as u32)
    } else {
        None
    }
}

/// Writes the dataset in LIBSVM format. Zero entries are omitted except the
/// last column, which is always written so that readers infer the same width.
pub fn write_libsvm<W: Write>(data: &DenseDataset, mut out: W) -> Result<()> {
    let io = |e| Error::io("<libsvm>", e);
    let binary = data.labels().iter().all(|&l| l <= 1);
    for i in 0..data.n_rows() {
        let label = data.label(i);
        if binary {
            write!(out, "{}", if label == 1 { "+1" } else { "-1" }).map_err(io)?;
        } else {
            write!(out, "{label}").map_err(io)?;
        }
        let row = data.row(i);
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 || j + 1 == row.len() {
                write!(out, " {}:{}", j + 1, v).map_err(io)?;
            }
        }
        writeln!(out).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<DenseDataset> {
        parse_libsvm(text.as_bytes())
    }

    #[test]
    fn sparse_line_densifies() {
        let d = parse("+1 1:0.5 3:-1\n").unwrap();
        assert_eq!(d.n_dims(), 3);
        assert_eq!(d.row(0), &[0.5, 0.0, -1.0]);
        assert_eq!(d.label(0), 1);
    }

    #[test]
    fn featureless_line_is_zero_row() {
        let d = parse("-1\n+1 2:3\n").unwrap();
        assert_eq!(d.row(0), &[0.0, 0.0]);
        assert_eq!(d.label(0), 0);
    }

    #[test]
    fn width_is_max_index() {
        let text = "+1 2:1\n-1 5:1\n+1 1:2 3:4\n";
        let oracle = text
            .split_whitespace()
            .filter_map(|t| t.split_once(':'))
            .map(|(i, _)| i.parse::<usize>().unwrap())
            .max()
            .unwrap();
        assert_eq!(parse(text).unwrap().n_dims(), oracle);
        assert_eq!(oracle, 5);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match parse("+1 1:0.5\n+1 2-3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("+1 3:1 2:1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("x 1:1\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(parse(""), Err(Error::Empty(_))));
        assert!(matches!(parse("\n  \n"), Err(Error::Empty(_))));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_libsvm("/nonexistent/gisette.svm").unwrap_err();
        assert!(err.to_string().contains("gisette.svm"));
    }

    proptest! {
        #[test]
        fn write_then_read_round_trips(
            rows in prop::collection::vec(
                prop::collection::vec(prop_oneof![Just(0.0), -1e6f64..1e6], 4), 1..12),
            seed_labels in prop::collection::vec(0u32..2, 12),
        ) {
            let labels = seed_labels[..rows.len()].to_vec();
            let data = DenseDataset::from_rows(rows, labels).unwrap();
            let mut buf = Vec::new();
            write_libsvm(&data, &mut buf).unwrap();
            let back = parse_libsvm(buf.as_slice()).unwrap();
            prop_assert_eq!(back.labels(), data.labels());
            prop_assert_eq!(back.n_dims(), data.n_dims());
            for (a, b) in back.features().iter().zip(data.features()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
