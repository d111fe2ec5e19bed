//! Record files: `<name>.csv` with the time series, plus `<name>.header.json`
//! and `<name>.metrics.json` beside it.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use upsc_core::record::{column_names, RecordHeader};
use upsc_core::{Metrics, RunRecord};

/// Shortest text that parses back to the same `f64`.
fn fmt_value(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x}")
    }
}

pub fn write_csv<W: Write>(record: &RunRecord, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(w);
    out.write_record(&record.columns)?;
    let mut row = Vec::with_capacity(record.columns.len());
    for i in 0..record.len() {
        row.clear();
        row.extend(record.data.iter().map(|c| fmt_value(c[i])));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the CSV body of a record; the header supplies the run metadata.
pub fn read_csv<R: Read>(header: RecordHeader, r: R) -> Result<RunRecord> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let columns: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    let expected = column_names(header.string_bases.len());
    if columns != expected {
        bail!(
            "column layout does not match the header ({} strings expected)",
            header.string_bases.len()
        );
    }
    let mut record = RunRecord::new(header, columns);
    let mut row = Vec::with_capacity(record.columns.len());
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        row.clear();
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                anyhow!(
                    "row {}, column `{}`: not a number: {field:?}",
                    line + 1,
                    record.columns[col]
                )
            })?;
            row.push(v);
        }
        record.push_row(&row);
    }
    Ok(record)
}

pub struct RecordPaths {
    pub csv: PathBuf,
    pub header: PathBuf,
    pub metrics: PathBuf,
}

impl RecordPaths {
    pub fn in_dir(dir: &Path, name: &str) -> Self {
        Self::from_csv(&dir.join(format!("{name}.csv")))
    }

    pub fn from_csv(csv: &Path) -> Self {
        let stem = csv.with_extension("");
        let sibling = |suffix: &str| {
            let mut s = stem.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        };
        Self {
            csv: csv.to_path_buf(),
            header: sibling(".header.json"),
            metrics: sibling(".metrics.json"),
        }
    }
}

pub fn write_record(record: &RunRecord, metrics: &Metrics, paths: &RecordPaths) -> Result<()> {
    let f = fs::File::create(&paths.csv).with_context(|| format!("creating {}", paths.csv.display()))?;
    write_csv(record, std::io::BufWriter::new(f))?;
    fs::write(&paths.header, serde_json::to_string_pretty(&record.header)?)
        .with_context(|| format!("writing {}", paths.header.display()))?;
    write_metrics(metrics, &paths.metrics)
}

pub fn write_metrics(metrics: &Metrics, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(metrics)?).with_context(|| format!("writing {}", path.display()))
}

pub fn read_record(csv_path: &Path) -> Result<RunRecord> {
    let paths = RecordPaths::from_csv(csv_path);
    let text = fs::read_to_string(&paths.header)
        .with_context(|| format!("reading header sidecar {}", paths.header.display()))?;
    let header: RecordHeader =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", paths.header.display()))?;
    let f = fs::File::open(csv_path).with_context(|| format!("opening {}", csv_path.display()))?;
    read_csv(header, std::io::BufReader::new(f))
}
