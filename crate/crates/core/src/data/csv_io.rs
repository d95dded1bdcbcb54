use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Reads a numeric CSV file.
///
/// `label_column` is a 0-based column index; that column is removed from
/// the features and its values become labels, remapped to `0..k` in
/// increasing order of the original ids.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, has_header: bool, label_column: Option<usize>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut ds = read_csv(file, path, has_header, label_column)?;
    ds.name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(ds)
}

/// [`load_csv`] over any reader; `path` is only used in error messages.
pub fn read_csv<T: Scalar, R: Read>(reader: R, path: &Path, has_header: bool, label_column: Option<usize>) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let fmt = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };

    let mut width = None;
    let mut data: Vec<T> = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| fmt(e.to_string()))?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row: line,
                found: record.len(),
                expected,
            });
        }
        if let Some(lc) = label_column {
            if lc >= expected {
                return Err(fmt(format!("label column {lc} out of range for {expected} columns")));
            }
        }
        for (col, cell) in record.iter().enumerate() {
            let bad = || Error::NonNumeric {
                path: path.to_path_buf(),
                row: line,
                col,
                cell: cell.to_string(),
            };
            let v: f64 = cell.parse().map_err(|_| bad())?;
            if Some(col) == label_column {
                if v.fract() != 0.0 || !v.is_finite() {
                    return Err(bad());
                }
                raw_labels.push(v as i64);
            } else {
                if !v.is_finite() {
                    return Err(bad());
                }
                data.push(T::of(v));
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyInput);
    }
    let cols = width.unwrap_or(0) - usize::from(label_column.is_some());
    let features = Matrix::from_vec(rows, cols, data)?;
    let labels = label_column.map(|_| {
        let mut ids = BTreeMap::new();
        for &l in &raw_labels {
            ids.entry(l).or_insert(0usize);
        }
        for (i, v) in ids.values_mut().enumerate() {
            *v = i;
        }
        raw_labels.iter().map(|l| ids[l]).collect()
    });
    Dataset::new(String::new(), features, labels)
}

/// Writes features (and optionally a trailing label column) as CSV.
///
/// Values use the shortest representation that parses back to the same
/// float, so `load_csv` after `save_csv` is exact.
pub fn save_csv<T: Scalar>(
    path: impl AsRef<Path>,
    features: &Matrix<T>,
    labels: Option<&[usize]>,
    header: Option<&[String]>,
) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(l) = labels {
        if l.len() != features.rows() {
            return Err(Error::LengthMismatch(features.rows(), l.len()));
        }
    }
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for (i, row) in features.row_iter().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(l) = labels {
            cells.push(l[i].to_string());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let mut f = File::create(path).map_err(io)?;
    f.write_all(out.as_bytes()).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, header: bool, label: Option<usize>) -> Result<Dataset> {
        read_csv(text.as_bytes(), Path::new("mem.csv"), header, label)
    }

    #[test]
    fn with_and_without_labels() {
        let text = "1,2,0\n3,4,1\n5,6,0\n";
        let a = parse(text, false, None).unwrap();
        assert_eq!(a.features.shape(), (3, 3));
        assert!(a.labels.is_none());
        let b = parse(text, false, Some(2)).unwrap();
        assert_eq!(b.features.shape(), (3, 2));
        assert_eq!(b.labels.unwrap(), vec![0, 1, 0]);
    }

    #[test]
    fn labels_are_remapped_densely() {
        let d = parse("x,y\n0.5,7\n1.5,3\n2.5,7\n", true, Some(1)).unwrap();
        assert_eq!(d.labels.unwrap(), vec![1, 0, 1]);
        assert_eq!(d.k_true, Some(2));
    }

    #[test]
    fn located_errors() {
        match parse("1,2\n3\n", false, None) {
            Err(Error::RaggedRow { row: 2, found: 1, expected: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse("a,b\n1,2\n3,x\n", true, None) {
            Err(Error::NonNumeric { row: 3, col: 1, cell, .. }) => assert_eq!(cell, "x"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            load_csv::<f64>("/definitely/missing.csv", false, None),
            Err(Error::Io { .. })
        ));
    }
}
