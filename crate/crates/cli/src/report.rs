//! Report rows and their CSV / JSON-lines encodings.

use std::io::Write;
use std::path::Path;

use crate::error::CliError;
use crate::scenario::Format;

pub const COLUMNS: [&str; 10] =
    ["scenario", "check", "kind", "digest", "x", "value", "quad_error", "truncation_error", "pass", "details"];

#[derive(Clone, Debug, PartialEq)]
pub enum Detail {
    Num(f64),
    Text(String),
}

impl From<f64> for Detail {
    fn from(v: f64) -> Self {
        Detail::Num(v)
    }
}

impl From<usize> for Detail {
    fn from(v: usize) -> Self {
        Detail::Num(v as f64)
    }
}

impl From<bool> for Detail {
    fn from(v: bool) -> Self {
        Detail::Num(if v { 1.0 } else { 0.0 })
    }
}

impl From<String> for Detail {
    fn from(v: String) -> Self {
        Detail::Text(v)
    }
}

impl From<&str> for Detail {
    fn from(v: &str) -> Self {
        Detail::Text(v.to_string())
    }
}

/// One check result. `x` is the plotting coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub scenario: String,
    pub check: usize,
    pub kind: String,
    pub digest: String,
    pub x: f64,
    pub value: f64,
    pub quad_error: f64,
    pub truncation_error: f64,
    pub pass: bool,
    pub details: Vec<(String, Detail)>,
}

impl Row {
    pub fn total_error(&self) -> f64 {
        self.quad_error + self.truncation_error
    }

    pub fn detail(&self, key: &str) -> Option<f64> {
        self.details.iter().find(|(k, _)| k == key).and_then(|(_, v)| match v {
            Detail::Num(x) => Some(*x),
            Detail::Text(t) => t.parse().ok(),
        })
    }

    pub fn detail_text(&self, key: &str) -> Option<&str> {
        self.details.iter().find(|(k, _)| k == key).and_then(|(_, v)| match v {
            Detail::Text(t) => Some(t.as_str()),
            Detail::Num(_) => None,
        })
    }
}

/// Fixed 17-significant-digit formatting; identical inputs give identical bytes.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn details_text(details: &[(String, Detail)]) -> String {
    details
        .iter()
        .map(|(k, v)| match v {
            Detail::Num(x) => format!("{k}={}", fmt_float(*x)),
            Detail::Text(t) => format!("{k}={}", t.replace([';', '='], "_")),
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn json_float(v: f64) -> String {
    if v.is_finite() {
        fmt_float(v)
    } else {
        "null".into()
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn json_line(r: &Row) -> String {
    let details = r
        .details
        .iter()
        .map(|(k, v)| {
            let v = match v {
                Detail::Num(x) => json_float(*x),
                Detail::Text(t) => json_string(t),
            };
            format!("{}:{v}", json_string(k))
        })
        .collect::<Vec<_>>()
        .join(",");
    format!(
        "{{\"scenario\":{},\"check\":{},\"kind\":{},\"digest\":{},\"x\":{},\"value\":{},\"quad_error\":{},\"truncation_error\":{},\"pass\":{},\"details\":{{{details}}}}}",
        json_string(&r.scenario),
        r.check,
        json_string(&r.kind),
        json_string(&r.digest),
        json_float(r.x),
        json_float(r.value),
        json_float(r.quad_error),
        json_float(r.truncation_error),
        r.pass,
    )
}

/// Writes `rows` to `out` in the given format, header included for CSV.
pub fn write_rows<W: Write>(out: W, rows: &[Row], format: Format) -> std::io::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(COLUMNS)?;
            for r in rows {
                w.write_record([
                    r.scenario.clone(),
                    r.check.to_string(),
                    r.kind.clone(),
                    r.digest.clone(),
                    fmt_float(r.x),
                    fmt_float(r.value),
                    fmt_float(r.quad_error),
                    fmt_float(r.truncation_error),
                    r.pass.to_string(),
                    details_text(&r.details),
                ])?;
            }
            w.flush()
        }
        Format::Json => {
            let mut out = std::io::BufWriter::new(out);
            for r in rows {
                writeln!(out, "{}", json_line(r))?;
            }
            out.flush()
        }
    }
}

pub fn write_report(path: &Path, rows: &[Row], format: Format) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    let file = std::fs::File::create(path).map_err(CliError::io(path))?;
    write_rows(file, rows, format).map_err(CliError::io(path))
}

fn parse_float(s: &str) -> Option<f64> {
    match s {
        "NaN" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

/// Reads a report written by [`write_report`]; JSON-lines is recognized by a leading `{`.
pub fn read_report(path: &Path) -> Result<Vec<Row>, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let bad = |message: String| CliError::Report { path: path.to_path_buf(), message };
    if text.trim_start().starts_with('{') {
        text.lines().filter(|l| !l.trim().is_empty()).enumerate().map(|(i, l)| parse_json_row(l).map_err(|m| bad(format!("line {}: {m}", i + 1)))).collect()
    } else if text.trim().is_empty() {
        Ok(Vec::new())
    } else {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.iter().ne(COLUMNS) {
            return Err(bad("unexpected CSV header".into()));
        }
        rd.records()
            .enumerate()
            .map(|(i, rec)| {
                let rec = rec.map_err(|e| bad(e.to_string()))?;
                parse_csv_row(&rec).map_err(|m| bad(format!("row {}: {m}", i + 1)))
            })
            .collect()
    }
}

fn parse_csv_row(rec: &csv::StringRecord) -> Result<Row, String> {
    let f = |i: usize| parse_float(&rec[i]).ok_or_else(|| format!("column {} is not a number", COLUMNS[i]));
    let details = if rec[9].is_empty() {
        Vec::new()
    } else {
        rec[9]
            .split(';')
            .map(|kv| {
                let (k, v) = kv.split_once('=').ok_or("detail without `=`")?;
                let d = parse_float(v).map(Detail::Num).unwrap_or_else(|| Detail::Text(v.to_string()));
                Ok((k.to_string(), d))
            })
            .collect::<Result<_, String>>()?
    };
    Ok(Row {
        scenario: rec[0].to_string(),
        check: rec[1].parse().map_err(|_| "check is not an index")?,
        kind: rec[2].to_string(),
        digest: rec[3].to_string(),
        x: f(4)?,
        value: f(5)?,
        quad_error: f(6)?,
        truncation_error: f(7)?,
        pass: rec[8].parse().map_err(|_| "pass is not a boolean")?,
        details,
    })
}

fn parse_json_row(line: &str) -> Result<Row, String> {
    let v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let num = |k: &str| match &v[k] {
        serde_json::Value::Null => Ok(f64::NAN),
        x => x.as_f64().ok_or_else(|| format!("`{k}` is not a number")),
    };
    let text = |k: &str| v[k].as_str().map(str::to_string).ok_or_else(|| format!("`{k}` is not a string"));
    let details = v["details"]
        .as_object()
        .ok_or("`details` is not an object")?
        .iter()
        .map(|(k, d)| {
            let d = match d {
                serde_json::Value::String(s) => Detail::Text(s.clone()),
                serde_json::Value::Null => Detail::Num(f64::NAN),
                other => Detail::Num(other.as_f64().ok_or_else(|| format!("detail `{k}` is not a number"))?),
            };
            Ok((k.clone(), d))
        })
        .collect::<Result<_, String>>()?;
    Ok(Row {
        scenario: text("scenario")?,
        check: v["check"].as_u64().ok_or("`check` is not an index")? as usize,
        kind: text("kind")?,
        digest: text("digest")?,
        x: num("x")?,
        value: num("value")?,
        quad_error: num("quad_error")?,
        truncation_error: num("truncation_error")?,
        pass: v["pass"].as_bool().ok_or("`pass` is not a boolean")?,
        details,
    })
}
