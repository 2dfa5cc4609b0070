use std::path::Path;

use ndarray::Array2;

use super::FeatureTable;
use crate::{Error, Result};

/// Reads a numeric CSV with a header row. Every column except `label_column`
/// becomes a feature. Labels must be non-negative integers; when `n_classes`
/// is `None` it is inferred as `max label + 1`.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    forced_feature_names: &[String],
    n_classes: Option<usize>,
) -> Result<FeatureTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label_column, forced_feature_names, n_classes).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub(crate) fn read_csv<R: std::io::Read>(
    reader: R,
    label_column: &str,
    forced_feature_names: &[String],
    n_classes: Option<usize>,
) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Data(format!("label column {label_column:?} not found")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let d = feature_names.len();
    if d == 0 {
        return Err(Error::Data("no feature columns".into()));
    }

    let forced = forced_feature_names
        .iter()
        .map(|name| {
            feature_names
                .iter()
                .position(|f| f == name)
                .ok_or_else(|| Error::Data(format!("unknown forced feature {name:?}")))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        // Data rows are numbered from 1, header excluded.
        let line = row + 1;
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::Data(format!(
                    "row {line}, column {:?}: non-numeric cell {cell:?}",
                    headers[col]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "row {line}, column {:?}: non-finite value {cell:?}",
                    headers[col]
                )));
            }
            if col == label_idx {
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(Error::Data(format!(
                        "row {line}: label {cell:?} is not a non-negative integer"
                    )));
                }
                labels.push(v as usize);
            } else {
                values.push(v);
            }
        }
    }
    let n = labels.len();
    if n == 0 {
        return Err(Error::Data("no data rows".into()));
    }
    let n_classes = n_classes.unwrap_or_else(|| labels.iter().max().map_or(2, |m| (m + 1).max(2)));
    let x = Array2::from_shape_vec((n, d), values).map_err(|e| Error::Shape(e.to_string()))?;
    FeatureTable::new(x, labels, feature_names, forced, n_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, forced: &[&str], classes: Option<usize>) -> Result<FeatureTable> {
        let forced: Vec<String> = forced.iter().map(|s| s.to_string()).collect();
        read_csv(text.as_bytes(), "label", &forced, classes)
    }

    #[test]
    fn resolves_forced_names() {
        let t = read("a,b,label\n1,2,0\n3,4,1\n5,6,0\n7,8,1\n", &["a"], None).unwrap();
        assert_eq!(t.n_features(), 2);
        assert_eq!(t.n_rows(), 4);
        assert_eq!(t.forced_indices(), &[0]);
        assert_eq!(t.feature_names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn label_column_may_be_anywhere() {
        let t = read("label,a\n1,0.5\n0,0.25\n", &[], None).unwrap();
        assert_eq!(t.labels(), &[1, 0]);
        assert_eq!(t.x()[[1, 0]], 0.25);
    }

    #[test]
    fn label_out_of_range() {
        let err = read("a,label\n1,0\n2,2\n", &[], Some(2)).unwrap_err();
        assert!(matches!(err, Error::LabelOutOfRange { label: 2, .. }));
        assert!(err.to_string().contains("label out of range"));
    }

    #[test]
    fn missing_label_column() {
        let err = read("a,b\n1,2\n", &[], None).unwrap_err();
        assert!(err.to_string().contains("label column"));
    }

    #[test]
    fn unknown_forced_name() {
        let err = read("a,label\n1,0\n", &["age"], None).unwrap_err();
        assert!(err.to_string().contains("age"));
    }

    #[test]
    fn non_numeric_cell() {
        let err = read("a,label\nyes,0\n", &[], None).unwrap_err();
        assert!(err.to_string().contains("non-numeric"));
        let err = read("a,label\nNaN,0\n", &[], None).unwrap_err();
        assert!(err.to_string().contains("non-finite"));
    }

    #[test]
    fn empty_file() {
        let err = read("a,label\n", &[], None).unwrap_err();
        assert!(err.to_string().contains("no data rows"));
    }
}
