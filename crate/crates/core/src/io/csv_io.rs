use std::path::Path;

use nalgebra::DMatrix;

use super::{Label, Recording};
use crate::{Error, Result};

fn reader_for(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::parse(
            format!("{} line {}", path.display(), line.unwrap_or(0)),
            format!("{other:?}"),
        ),
    }
}

/// Reads a recording stored as one column per channel and one row per
/// sample instant, with a header row of channel labels.
///
/// Lines starting with `#` are ignored. Row numbers in errors count data
/// rows from 1.
pub fn read_csv(path: impl AsRef<Path>, rate: f64) -> Result<Recording> {
    let path = path.as_ref();
    let mut reader = reader_for(path)?;
    let channels: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if channels.is_empty() || channels.iter().all(String::is_empty) {
        return Err(Error::parse(
            format!("{} row 0", path.display()),
            "missing header row",
        ));
    }

    let mut columns: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != channels.len() {
            return Err(Error::parse(
                format!("{} row {row}", path.display()),
                format!("expected {} fields, found {}", channels.len(), record.len()),
            ));
        }
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                Error::parse(
                    format!("{} row {row}, column {}", path.display(), col + 1),
                    format!("{cell:?} is not a number"),
                )
            })?;
            columns.push(value);
        }
        rows += 1;
    }
    // row-major samples × channels → channels × samples
    let samples = DMatrix::from_row_slice(rows, channels.len(), &columns).transpose();
    Recording::new(channels, samples, rate)
}

pub fn write_csv(path: impl AsRef<Path>, rec: &Recording) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    writer
        .write_record(rec.channels())
        .map_err(|e| csv_error(path, e))?;
    let samples = rec.samples();
    for t in 0..samples.ncols() {
        writer
            .write_record(samples.column(t).iter().map(|v| v.to_string()))
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// One row of a label file: `source_id,start_sample,label`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LabelEntry {
    pub source_id: String,
    pub start_sample: usize,
    pub label: Label,
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<LabelEntry>> {
    let path = path.as_ref();
    let mut reader = reader_for(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = ["source_id", "start_sample", "label"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::parse(
            format!("{} row 0", path.display()),
            format!("label file header must be {}", expected.join(",")),
        ));
    }
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != 3 {
            return Err(Error::parse(
                format!("{} row {row}", path.display()),
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        let start_sample = record[1].parse().map_err(|_| {
            Error::parse(
                format!("{} row {row}, column 2", path.display()),
                format!("{:?} is not a sample index", &record[1]),
            )
        })?;
        let label = match &record[2] {
            "IED" => Label::Ied,
            "BACKGROUND" => Label::Background,
            other => {
                return Err(Error::parse(
                    format!("{} row {row}, column 3", path.display()),
                    format!("label must be IED or BACKGROUND, got {other:?}"),
                ))
            }
        };
        entries.push(LabelEntry {
            source_id: record[0].to_string(),
            start_sample,
            label,
        });
    }
    Ok(entries)
}

pub fn write_labels(path: impl AsRef<Path>, entries: &[LabelEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    writer
        .write_record(["source_id", "start_sample", "label"])
        .map_err(|e| csv_error(path, e))?;
    for e in entries {
        writer
            .write_record([
                e.source_id.as_str(),
                &e.start_sample.to_string(),
                e.label.as_str(),
            ])
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file_with(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn transcribes_columns() {
        let f = file_with("A,B\n1,2\n3,4\n");
        let rec = read_csv(f.path(), 128.0).unwrap();
        assert_eq!(rec.channels(), ["A", "B"]);
        assert_eq!(
            rec.samples(),
            &DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0])
        );
        assert_eq!(rec.rate(), 128.0);
    }

    #[test]
    fn empty_data_section_rejected() {
        let f = file_with("A,B\n");
        assert!(matches!(
            read_csv(f.path(), 128.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn ragged_row_reports_row() {
        let f = file_with("A,B\n1,2\n3\n");
        match read_csv(f.path(), 1.0) {
            Err(Error::Parse { location, .. }) => {
                assert!(location.ends_with("row 2"), "{location}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_reports_cell() {
        let f = file_with("A,B\n1,2\n3,x\n");
        match read_csv(f.path(), 1.0) {
            Err(Error::Parse { location, .. }) => {
                assert!(location.ends_with("row 2, column 2"), "{location}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let samples =
            DMatrix::from_fn(3, 50, |r, c| ((r * 50 + c) as f64 * 0.37).sin() * 1e3 / 7.0);
        let rec = Recording::new(vec!["x".into(), "y".into(), "z".into()], samples, 128.0).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(f.path(), &rec).unwrap();
        assert_eq!(read_csv(f.path(), 128.0).unwrap(), rec);
    }

    #[test]
    fn labels_round_trip_and_validate() {
        let entries = vec![
            LabelEntry {
                source_id: "rec1".into(),
                start_sample: 0,
                label: Label::Ied,
            },
            LabelEntry {
                source_id: "rec1".into(),
                start_sample: 128,
                label: Label::Background,
            },
        ];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_labels(f.path(), &entries).unwrap();
        assert_eq!(read_labels(f.path()).unwrap(), entries);

        let bad = file_with("source_id,start_sample,label\nr,0,SPIKE\n");
        assert!(read_labels(bad.path()).is_err());
    }
}
