//! CSV export and import of run logs.
//!
//! Files use the external y-right convention: lateral columns are negated on
//! the way out and back in. Numbers carry 9 significant digits.

use std::io;
use std::path::Path;

use super::log::RunLog;

/// Formats `v` with `digits` significant digits, switching to exponent
/// notation outside `[1e-5, 1e9)` like C's `%g`.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let digits = digits.max(1);
    // round first so the exponent reflects e.g. 9.9999999999 -> 1e1
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, v))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_csv<W: io::Write>(log: &RunLog, writer: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(&log.columns)?;
    for row in log.mirrored_rows() {
        w.write_record(row.iter().map(|&v| format_sig(v, 9)))?;
    }
    w.flush()
}

pub fn to_csv_string(log: &RunLog) -> String {
    let mut buf = Vec::new();
    write_csv(log, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn export_csv(log: &RunLog, path: impl AsRef<Path>) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(log, io::BufWriter::new(file))
}

#[derive(serde::Serialize)]
struct Sidecar<'a> {
    #[serde(flatten)]
    metadata: &'a super::log::RunMetadata,
    rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    fault: Option<&'a str>,
}

/// Run metadata (model, vehicle, spec hash, dt, row count, fault) as TOML,
/// kept beside the CSV rather than in it.
pub fn metadata_toml(log: &RunLog) -> String {
    let s = Sidecar { metadata: &log.metadata, rows: log.rows.len(), fault: log.fault.as_deref() };
    toml::to_string(&s).expect("metadata serializes")
}

/// Header and numeric rows of an exported log, in the external convention.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    /// Rows converted back to the internal convention.
    pub fn internal_rows(&self, lateral: &[bool]) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.iter().zip(lateral).map(|(&v, &lat)| if lat { -v } else { v }).collect()).collect()
    }
}

pub fn read_csv<R: io::Read>(reader: R) -> io::Result<CsvTable> {
    let mut r = csv::Reader::from_reader(reader);
    let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: `{f}`: {e}", i + 2)))
            })
            .collect::<io::Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(CsvTable { columns, rows })
}

pub fn import_csv(path: impl AsRef<Path>) -> io::Result<CsvTable> {
    read_csv(io::BufReader::new(std::fs::File::open(path)?))
}
