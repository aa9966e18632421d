use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_error, BenchError};
use crate::series::{split_series, SplitError, SplitSpec, TimeSeries};

/// Path that resolves to the embedded monthly airline passenger counts,
/// 1949-1960, with the last 29 months marked as holdout.
pub const BUILTIN_AIR_PASSENGERS: &str = "builtin:air_passengers";

const AIR_PASSENGERS_CSV: &str = include_str!("../../data/air_passengers.csv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetFormat {
    pub value_column: String,
    /// Used when present; 1/0 or true/false, holdout rows trailing.
    pub holdout_column: String,
}

impl Default for DatasetFormat {
    fn default() -> Self {
        Self { value_column: "value".into(), holdout_column: "is_holdout".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub series: TimeSeries,
    /// Trailing rows flagged in the holdout column, if the file had one.
    pub holdout: Option<usize>,
}

impl Dataset {
    /// An explicit spec wins; otherwise a nonzero holdout column; otherwise
    /// the default split.
    pub fn split(&self, spec: Option<SplitSpec>) -> Result<(TimeSeries, TimeSeries), SplitError> {
        let spec = match (spec, self.holdout) {
            (Some(s), _) => s,
            (None, Some(h)) if h > 0 => SplitSpec::Horizon(h),
            _ => SplitSpec::default(),
        };
        split_series(&self.series, spec)
    }
}

/// Read a CSV file, or the builtin dataset for [`BUILTIN_AIR_PASSENGERS`].
pub fn load_dataset(path: &Path, format: &DatasetFormat) -> Result<Dataset, BenchError> {
    if path.to_str() == Some(BUILTIN_AIR_PASSENGERS) {
        let mut d = parse_dataset(AIR_PASSENGERS_CSV, "air_passengers", format)?;
        d.series = d.series.with_frequency("monthly");
        return Ok(d);
    }
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
    parse_dataset(&text, name, format)
}

/// Parse CSV text. Row numbers in errors count the header as row 1.
pub fn parse_dataset(text: &str, name: &str, format: &DatasetFormat) -> Result<Dataset, BenchError> {
    let schema = |row: u64, reason: String| BenchError::Schema { source_name: name.to_owned(), row, reason };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| schema(1, format!("unreadable header: {e}")))?.clone();
    let value_idx = headers
        .iter()
        .position(|h| h == format.value_column)
        .ok_or_else(|| schema(1, format!("no `{}` column", format.value_column)))?;
    let holdout_idx = headers.iter().position(|h| h == format.holdout_column);

    let mut values = Vec::new();
    let mut holdout = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line());
            schema(row, e.to_string())
        })?;
        let row = record.position().map_or(values.len() as u64 + 2, |p| p.line());
        let raw = record.get(value_idx).unwrap_or("");
        if raw.is_empty() {
            return Err(schema(row, format!("blank `{}`", format.value_column)));
        }
        let value: f64 = raw.parse().map_err(|_| schema(row, format!("unparseable value `{raw}`")))?;
        if !value.is_finite() {
            return Err(schema(row, format!("non-finite value `{raw}`")));
        }
        if let Some(idx) = holdout_idx {
            let flag = match record.get(idx).unwrap_or("") {
                "1" | "true" | "True" | "TRUE" => true,
                "0" | "false" | "False" | "FALSE" | "" => false,
                other => return Err(schema(row, format!("bad holdout flag `{other}`"))),
            };
            if flag {
                holdout += 1;
            } else if holdout > 0 {
                return Err(schema(row, "holdout rows must be trailing".into()));
            }
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(schema(2, "no data rows".into()));
    }
    let series = TimeSeries::new(name, values).map_err(|e| schema(0, e.to_string()))?;
    Ok(Dataset { series, holdout: holdout_idx.map(|_| holdout) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset, BenchError> {
        parse_dataset(text, "t", &DatasetFormat::default())
    }

    #[test]
    fn reads_value_column() {
        let d = parse("t,value\n1,22\n2,25").unwrap();
        assert_eq!(d.series.values(), &[22.0, 25.0]);
        assert_eq!(d.holdout, None);
    }

    #[test]
    fn blank_value_names_its_row() {
        match parse("t,value\n1,\n2,25\n") {
            Err(BenchError::Schema { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
        match parse("t,value\n1,3\n2,abc\n") {
            Err(BenchError::Schema { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_missing_column_and_non_finite() {
        assert!(matches!(parse("t,x\n1,2\n"), Err(BenchError::Schema { row: 1, .. })));
        assert!(matches!(parse("t,value\n1,inf\n"), Err(BenchError::Schema { row: 2, .. })));
        assert!(matches!(parse("t,value\n"), Err(BenchError::Schema { .. })));
    }

    #[test]
    fn holdout_column_drives_the_split() {
        let d = parse("t,value,value_raw,is_holdout\n1,0,5,0\n2,1,6,0\n3,0.5,7,1\n").unwrap();
        assert_eq!(d.holdout, Some(1));
        let (h, t) = d.split(None).unwrap();
        assert_eq!((h.len(), t.values()), (2, &[0.5][..]));
        let (h, _) = d.split(Some(SplitSpec::Horizon(2))).unwrap();
        assert_eq!(h.len(), 1);
    }

    #[test]
    fn holdout_rows_must_be_trailing() {
        assert!(parse("value,is_holdout\n1,1\n2,0\n").is_err());
        assert!(parse("value,is_holdout\n1,0\n2,maybe\n").is_err());
    }

    #[test]
    fn builtin_air_passengers() {
        let d = load_dataset(Path::new(BUILTIN_AIR_PASSENGERS), &DatasetFormat::default()).unwrap();
        assert_eq!(d.series.len(), 144);
        assert_eq!(d.holdout, Some(29));
        assert_eq!(d.series.values()[0], 112.0);
        assert_eq!(d.series.max(), 622.0);
        assert_eq!(d.series.frequency(), Some("monthly"));
    }

    #[test]
    fn missing_file_is_io() {
        assert!(matches!(
            load_dataset(Path::new("/nonexistent/x.csv"), &DatasetFormat::default()),
            Err(BenchError::Io { .. })
        ));
    }
}
