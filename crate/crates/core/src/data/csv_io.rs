//! CSV interchange for datasets: header `label,f0,f1,...`, one example per
//! row, features written with nine significant digits.

use std::path::Path;

use super::{DataError, Dataset};
use crate::numerics::Matrix;

fn csv_err(e: csv::Error) -> DataError {
    DataError::Csv(e.to_string())
}

/// Formats `x` with nine significant digits, dropping trailing zeros.
pub(crate) fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.8e}")
    }
}

pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let header =
        std::iter::once("label".to_string()).chain((0..dataset.dim()).map(|j| format!("f{j}")));
    w.write_record(header).map_err(csv_err)?;
    for (row, &y) in dataset.features().row_iter().zip(dataset.labels()) {
        let record = std::iter::once(y.to_string()).chain(row.iter().map(|&v| format_sig9(v)));
        w.write_record(record).map_err(csv_err)?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a dataset written by [`write_csv`]. The class count is one more
/// than the largest label.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.get(0) != Some("label") || headers.len() < 2 {
        return Err(DataError::Csv(format!(
            "{}: header must start with `label` and list at least one feature",
            path.display()
        )));
    }
    let dim = headers.len() - 1;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let parse_err = |what: &str| {
            DataError::Csv(format!(
                "{}: record {}: bad {what}",
                path.display(),
                line + 1
            ))
        };
        labels.push(
            record[0]
                .trim()
                .parse::<usize>()
                .map_err(|_| parse_err("label"))?,
        );
        for field in record.iter().skip(1) {
            values.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err("feature"))?,
            );
        }
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let features = Matrix::from_vec(labels.len(), dim, values)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    Dataset::new(features, labels, num_classes, name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig9(0.123456789123), "0.123456789");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(0.5), "0.5");
        assert_eq!(format_sig9(123.456), "123.456");
        assert_eq!(format_sig9(1e-7), "1.00000000e-7");
        assert_eq!(format_sig9(0.99999999996), "1");
    }

    #[test]
    fn round_trip() {
        let f = Matrix::from_rows(&[[0.25, 1.0 / 3.0], [0.0, 0.999]]).unwrap();
        let d = Dataset::new(f, vec![1, 0], 2, "x").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_csv(&d, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("label,f0,f1\n1,0.25,0.333333333\n"));
        let back = read_csv(&path).unwrap();
        assert_eq!(back.labels(), d.labels());
        for (a, b) in back
            .features()
            .as_slice()
            .iter()
            .zip(d.features().as_slice())
        {
            assert!((a - b).abs() < 5e-10);
        }
    }
}
