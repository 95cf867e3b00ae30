//! Data files: training CSVs (`x1..xd,y`), query CSVs (`x1..xd`), fitted
//! parameter JSON, and prediction CSVs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use smp_core::numerics::Matrix;

use crate::estimator::ModelKind;
use crate::{HarnessError, Result};

/// Fitted parameters as serialized by `smp fit`.
///
/// The parameter vector alone supports plug-in prediction; SMP prediction
/// additionally needs the training sample itself (it refits per query), so
/// `smp predict` takes the training CSV alongside this file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitParams {
    pub schema: u32,
    pub model: ModelKind,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<FitDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub grad_norm: f64,
    pub separated: bool,
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

pub fn read_params(path: &Path) -> Result<FitParams> {
    let text = read_to_string(path)?;
    let params: FitParams =
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{e}")))?;
    if params.schema != 1 {
        return Err(HarnessError::Config(format!(
            "unsupported params schema {} (expected 1)",
            params.schema
        )));
    }
    Ok(params)
}

pub fn write_params(path: &Path, params: &FitParams) -> Result<()> {
    let text = serde_json::to_string_pretty(params)?;
    std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

fn parse_header(headers: &csv::StringRecord, expect_y: bool) -> Result<usize> {
    let len = headers.len();
    let d = if expect_y { len.saturating_sub(1) } else { len };
    if d == 0 {
        return Err(HarnessError::DataParse {
            row: 1,
            msg: "no feature columns".into(),
        });
    }
    for (j, name) in headers.iter().take(d).enumerate() {
        let expect = format!("x{}", j + 1);
        if name != expect {
            return Err(HarnessError::DataParse {
                row: 1,
                msg: format!("expected column {expect:?}, found {name:?}"),
            });
        }
    }
    if expect_y && headers.get(d) != Some("y") {
        return Err(HarnessError::DataParse {
            row: 1,
            msg: "last column must be \"y\"".into(),
        });
    }
    Ok(d)
}

fn parse_f64(field: &str, row: usize) -> Result<f64> {
    field.trim().parse().map_err(|_| HarnessError::DataParse {
        row,
        msg: format!("not a number: {field:?}"),
    })
}

/// Reads a training CSV with header `x1,..,xd,y`. Errors carry 1-based data
/// row numbers.
pub fn read_xy_csv(path: &Path) -> Result<(Matrix, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| HarnessError::DataParse {
            row: 0,
            msg: e.to_string(),
        })?;
    let d = parse_header(reader.headers().map_err(|e| HarnessError::DataParse {
        row: 1,
        msg: e.to_string(),
    })?, true)?;
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| HarnessError::DataParse {
            row,
            msg: e.to_string(),
        })?;
        if record.len() != d + 1 {
            return Err(HarnessError::DataParse {
                row,
                msg: format!("expected {} fields, got {}", d + 1, record.len()),
            });
        }
        let mut x = Vec::with_capacity(d);
        for field in record.iter().take(d) {
            x.push(parse_f64(field, row)?);
        }
        y.push(parse_f64(record.get(d).unwrap(), row)?);
        rows.push(x);
    }
    Ok((Matrix::from_rows(&rows, d)?, y))
}

/// Reads a query CSV with header `x1,..,xd`.
pub fn read_queries_csv(path: &Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| HarnessError::DataParse {
            row: 0,
            msg: e.to_string(),
        })?;
    let d = parse_header(reader.headers().map_err(|e| HarnessError::DataParse {
        row: 1,
        msg: e.to_string(),
    })?, false)?;
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| HarnessError::DataParse {
            row,
            msg: e.to_string(),
        })?;
        if record.len() != d {
            return Err(HarnessError::DataParse {
                row,
                msg: format!("expected {d} fields, got {}", record.len()),
            });
        }
        let mut x = Vec::with_capacity(d);
        for field in record.iter() {
            x.push(parse_f64(field, row)?);
        }
        rows.push(x);
    }
    Ok(Matrix::from_rows(&rows, d)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xy_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, "x1,x2,y\n1.0,2.0,3.5\n-0.5,0.25,1.0\n").unwrap();
        let (x, y) = read_xy_csv(&path).unwrap();
        assert_eq!(x.rows(), 2);
        assert_eq!(x.cols(), 2);
        assert_eq!(x.row(1), &[-0.5, 0.25]);
        assert_eq!(y, vec![3.5, 1.0]);
    }

    #[test]
    fn bad_value_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, "x1,y\n1.0,2.0\noops,3.0\n").unwrap();
        match read_xy_csv(&path) {
            Err(HarnessError::DataParse { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, "a,b\n1.0,2.0\n").unwrap();
        assert!(read_xy_csv(&path).is_err());
    }

    #[test]
    fn params_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        let params = FitParams {
            schema: 1,
            model: ModelKind::RidgeLinear,
            lambda: 0.5,
            theta: Some(vec![1.0, -2.0]),
            probs: None,
            mean: None,
            diagnostics: Some(FitDiagnostics {
                iterations: 4,
                grad_norm: 1e-12,
                separated: false,
            }),
        };
        write_params(&path, &params).unwrap();
        assert_eq!(read_params(&path).unwrap(), params);
    }
}
