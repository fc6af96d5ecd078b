//! Sample files: a header row, feature columns `f1..fp` and an optional
//! `label` column holding `1`, `2` or nothing.

use std::io::{Read, Write};
use std::path::Path;

use semisup_core::{Class, PartialSample};

use crate::error::{CliError, CliResult};

pub fn read_sample_csv(path: &Path) -> CliResult<PartialSample> {
    let file = std::fs::File::open(path).map_err(CliError::io(path))?;
    parse_sample_csv(file, &path.display().to_string())
}

pub fn parse_sample_csv<R: Read>(reader: R, source: &str) -> CliResult<PartialSample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |line: u64, column: &str, message: String| CliError::Parse {
        path: source.to_string(),
        line,
        column: column.to_string(),
        message,
    };
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, "-", e.to_string()))?
        .clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(parse_err(1, "-", "missing header row".into()));
    }
    let mut feature_cols: Vec<(usize, usize)> = Vec::new();
    let mut label_col = None;
    for (i, name) in headers.iter().enumerate() {
        if name == "label" {
            if label_col.replace(i).is_some() {
                return Err(parse_err(1, name, "duplicate label column".into()));
            }
        } else if let Some(k) = name.strip_prefix('f').and_then(|k| k.parse::<usize>().ok()) {
            feature_cols.push((k, i));
        } else {
            return Err(parse_err(1, name, "unexpected column".into()));
        }
    }
    feature_cols.sort_unstable();
    if feature_cols.is_empty()
        || feature_cols
            .iter()
            .enumerate()
            .any(|(i, &(k, _))| k != i + 1)
    {
        return Err(parse_err(
            1,
            "-",
            "feature columns must be named f1, f2, ..., fp".into(),
        ));
    }
    let p = feature_cols.len();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |pos| pos.line());
            parse_err(line, "-", e.to_string())
        })?;
        let line = record.position().map_or(0, |pos| pos.line());
        for &(k, i) in &feature_cols {
            let cell = record.get(i).unwrap_or("");
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| {
                    parse_err(
                        line,
                        &format!("f{k}"),
                        format!("not a finite number: {cell:?}"),
                    )
                })?;
            features.push(v);
        }
        let label = match label_col.map(|i| record.get(i).unwrap_or("")) {
            None | Some("") => None,
            Some("1") => Some(Class::Class1),
            Some("2") => Some(Class::Class2),
            Some(other) => {
                return Err(parse_err(
                    line,
                    "label",
                    format!("label must be 1, 2 or empty, found {other:?}"),
                ))
            }
        };
        labels.push(label);
    }
    Ok(PartialSample::new(p, features, labels)?)
}

pub fn write_sample_csv(path: &Path, sample: &PartialSample) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(CliError::io(path))?;
    write_sample(file, sample).map_err(CliError::io(path))
}

pub fn write_sample<W: Write>(writer: W, sample: &PartialSample) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=sample.dim()).map(|k| format!("f{k}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (y, l) in sample.rows().zip(sample.labels()) {
        let mut row: Vec<String> = y.iter().map(|v| v.to_string()).collect();
        row.push(match l {
            Some(Class::Class1) => "1".into(),
            Some(Class::Class2) => "2".into(),
            None => String::new(),
        });
        w.write_record(&row)?;
    }
    w.flush()
}
