//! Dataset serialization: a single JSON document
//! `{ "kind": "planar-point"|"correspondence", "data": [[…]…],
//!    "labels": [ints]?, "meta": {}? }`, plus `x,y[,label]` CSV for planar
//! points. Coordinates round-trip exactly.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, ObservationKind, PointSet};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("parse error at {locus}: {message}")]
    Parse { locus: String, message: String },
    #[error("schema mismatch: {message}")]
    Schema { message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<GeometryError> for DatasetError {
    fn from(e: GeometryError) -> Self {
        DatasetError::Schema {
            message: e.to_string(),
        }
    }
}

/// A point set plus free-form metadata carried alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: PointSet,
    pub meta: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct RawDataset {
    kind: ObservationKind,
    data: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

/// Read a dataset, dispatching on the `.csv` extension (planar points) or
/// JSON otherwise.
pub fn read_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let text = fs::read_to_string(path)?;
    if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        parse_csv(&text)
    } else {
        parse_json(&text)
    }
}

/// Write a dataset, as CSV when the path ends in `.csv` (planar only), JSON
/// otherwise.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<(), DatasetError> {
    let mut file = fs::File::create(path)?;
    if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        if dataset.points.kind() != ObservationKind::PlanarPoint {
            return Err(DatasetError::Schema {
                message: "CSV output supports planar points only".into(),
            });
        }
        file.write_all(to_csv_string(&dataset.points).as_bytes())?;
    } else {
        file.write_all(to_json_string(dataset).as_bytes())?;
    }
    Ok(())
}

pub fn parse_json(text: &str) -> Result<Dataset, DatasetError> {
    let raw: RawDataset = serde_json::from_str(text).map_err(|e| DatasetError::Parse {
        locus: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    if raw.data.is_empty() {
        return Err(DatasetError::Schema {
            message: "data must contain at least one observation".into(),
        });
    }
    let dim = raw.kind.dim();
    for (i, row) in raw.data.iter().enumerate() {
        if row.len() != dim {
            return Err(DatasetError::Parse {
                locus: format!("data row {i}"),
                message: format!("expected {dim} values, found {}", row.len()),
            });
        }
    }
    if let Some(ref labels) = raw.labels {
        if labels.len() != raw.data.len() {
            return Err(DatasetError::Schema {
                message: format!(
                    "labels length {} does not match {} observations",
                    labels.len(),
                    raw.data.len()
                ),
            });
        }
    }
    let points = PointSet::new(raw.kind, raw.data, raw.labels)?;
    Ok(Dataset {
        points,
        meta: raw.meta,
    })
}

pub fn to_json_string(dataset: &Dataset) -> String {
    let raw = RawDataset {
        kind: dataset.points.kind(),
        data: dataset.points.iter().map(|o| o.to_vec()).collect(),
        labels: dataset.points.labels().map(|l| l.to_vec()),
        meta: dataset.meta.clone(),
    };
    serde_json::to_string_pretty(&raw).expect("dataset serialization cannot fail")
}

pub fn parse_csv(text: &str) -> Result<Dataset, DatasetError> {
    let mut rows = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut saw_label = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(DatasetError::Parse {
                locus: format!("line {}", lineno + 1),
                message: format!("expected 2 or 3 fields, found {}", fields.len()),
            });
        }
        let parse_coord = |idx: usize| -> Result<f64, DatasetError> {
            fields[idx].parse::<f64>().map_err(|e| DatasetError::Parse {
                locus: format!("line {}, field {}", lineno + 1, idx + 1),
                message: e.to_string(),
            })
        };
        rows.push(vec![parse_coord(0)?, parse_coord(1)?]);
        if fields.len() == 3 {
            saw_label = true;
            labels.push(
                fields[2]
                    .parse::<usize>()
                    .map_err(|e| DatasetError::Parse {
                        locus: format!("line {}, field 3", lineno + 1),
                        message: e.to_string(),
                    })?,
            );
        } else if saw_label {
            return Err(DatasetError::Parse {
                locus: format!("line {}", lineno + 1),
                message: "label column present on earlier lines but missing here".into(),
            });
        }
    }
    if rows.is_empty() {
        return Err(DatasetError::Schema {
            message: "data must contain at least one observation".into(),
        });
    }
    if saw_label && labels.len() != rows.len() {
        return Err(DatasetError::Schema {
            message: "label column must cover every row".into(),
        });
    }
    let points = PointSet::new(
        ObservationKind::PlanarPoint,
        rows,
        saw_label.then_some(labels),
    )?;
    Ok(Dataset { points, meta: None })
}

pub fn to_csv_string(points: &PointSet) -> String {
    let mut out = String::new();
    for (i, obs) in points.iter().enumerate() {
        out.push_str(&format!("{},{}", obs[0], obs[1]));
        if let Some(labels) = points.labels() {
            out.push_str(&format!(",{}", labels[i]));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                (0..4)
                    .map(|_| rng.random_range(-1e3..1e3) * rng.random_range(1e-9..1e9))
                    .collect()
            })
            .collect();
        let labels: Vec<usize> = (0..40).map(|_| rng.random_range(0..4)).collect();
        let points = PointSet::new(ObservationKind::Correspondence, rows, Some(labels)).unwrap();
        let dataset = Dataset {
            points,
            meta: Some(serde_json::json!({"note": "round trip"})),
        };
        let text = to_json_string(&dataset);
        let back = parse_json(&text).unwrap();
        assert_eq!(back, dataset);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..25)
            .map(|_| vec![rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)])
            .collect();
        let labels: Vec<usize> = (0..25).map(|_| rng.random_range(0..3)).collect();
        let points = PointSet::new(ObservationKind::PlanarPoint, rows, Some(labels)).unwrap();
        let text = to_csv_string(&points);
        let back = parse_csv(&text).unwrap();
        assert_eq!(back.points, points);
    }

    #[test]
    fn short_correspondence_row_is_a_parse_error_naming_the_row() {
        let text = r#"{"kind": "correspondence", "data": [[1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0]]}"#;
        match parse_json(text) {
            Err(DatasetError::Parse { locus, .. }) => assert_eq!(locus, "data row 1"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_data_is_a_schema_mismatch() {
        let text = r#"{"kind": "planar-point", "data": []}"#;
        assert!(matches!(parse_json(text), Err(DatasetError::Schema { .. })));
    }

    #[test]
    fn label_length_mismatch_is_a_schema_mismatch() {
        let text = r#"{"kind": "planar-point", "data": [[1.0, 2.0]], "labels": [1, 2]}"#;
        assert!(matches!(parse_json(text), Err(DatasetError::Schema { .. })));
    }

    #[test]
    fn malformed_csv_field_names_line_and_field() {
        let text = "1.0,2.0\n3.0,oops\n";
        match parse_csv(text) {
            Err(DatasetError::Parse { locus, .. }) => assert_eq!(locus, "line 2, field 2"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("points.json");
        let points = PointSet::new(
            ObservationKind::PlanarPoint,
            vec![vec![1.5, -2.25], vec![3.0, 4.125]],
            Some(vec![1, 0]),
        )
        .unwrap();
        let dataset = Dataset { points, meta: None };
        write_dataset(&path, &dataset).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back, dataset);
    }
}
