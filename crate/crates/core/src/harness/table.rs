use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Significant digits of every emitted number.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rows of finite numbers under a fixed header, plus `key=value` metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        match self.metadata.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value,
            None => self.metadata.push((key, value)),
        }
    }

    /// Put `entries` before the existing metadata.
    pub fn prepend_meta(&mut self, entries: Vec<(String, String)>) {
        let rest = std::mem::replace(&mut self.metadata, entries);
        self.metadata.extend(rest);
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Numerical(format!(
                "row of {} cells for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        if let Some(i) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite value {} in column {}",
                row[i], self.columns[i]
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Column by name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// CSV text: `#key=value` lines, a header, then one record per row.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = Vec::new();
        for (k, v) in &self.metadata {
            write!(out, "# {k}={v}\r\n").expect("write to memory");
        }
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::CRLF)
                .from_writer(&mut out);
            w.write_record(&self.columns)
                .map_err(|e| Error::Numerical(e.to_string()))?;
            for row in &self.rows {
                w.write_record(row.iter().map(|v| format_number(*v)))
                    .map_err(|e| Error::Numerical(e.to_string()))?;
            }
            w.flush().map_err(|e| Error::Numerical(e.to_string()))?;
        }
        Ok(String::from_utf8(out).expect("csv output is utf-8"))
    }

    /// Parse CSV produced by [`ResultTable::to_csv_string`].
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut metadata = Vec::new();
        let mut body = String::new();
        for line in text.split_inclusive('\n') {
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim_end_matches(['\r', '\n']).trim_start();
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("metadata line without '=': {rest}")))?;
                metadata.push((k.to_string(), v.to_string()));
            } else {
                body.push_str(line);
            }
        }
        let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
        let columns: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Config(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut table = Self {
            columns,
            rows: Vec::new(),
            metadata,
        };
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Config(e.to_string()))?;
            let row = rec
                .iter()
                .map(|c| c.parse::<f64>().map_err(|e| Error::Config(format!("cell {c}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            table.push_row(row)?;
        }
        Ok(table)
    }
}

/// Shortest rendering of `v` rounded to 12 significant digits; fixed point
/// for moderate magnitudes, otherwise scientific.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, v))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Write `table` to `path` as CSV.
pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    let text = table.to_csv_string()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference_round(v: f64) -> f64 {
        format!("{:.11e}", v).parse().unwrap()
    }

    #[test]
    fn number_formats() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(135.5), "135.5");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(2.0e-7), "2e-7");
        assert_eq!(format_number(-1.23456789012345e15), "-1.23456789012e15");
        assert_eq!(format_number(123456789012.4), "123456789012");
        assert_eq!(format_number(9.99999999999e-6), "9.99999999999e-6");
        assert_eq!(format_number(9.999999999999e-6), "0.00001");
        assert_eq!(format_number(1e-5), "0.00001");
    }

    #[test]
    fn empty_table_has_header_and_metadata_only() {
        let mut t = ResultTable::new(["a", "b"]);
        t.set_meta("seed", 7);
        assert_eq!(t.to_csv_string().unwrap(), "# seed=7\r\na,b\r\n");
        let back = ResultTable::from_csv_str(&t.to_csv_string().unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_nan_and_bad_width() {
        let mut t = ResultTable::new(["a"]);
        assert!(t.push_row(vec![f64::NAN]).is_err());
        assert!(t.push_row(vec![1.0, 2.0]).is_err());
        assert!(t.push_row(vec![1.0]).is_ok());
    }

    #[test]
    fn quoting_of_awkward_headers() {
        let t = ResultTable::new(["x, y", "say \"hi\""]);
        let s = t.to_csv_string().unwrap();
        assert_eq!(s, "\"x, y\",\"say \"\"hi\"\"\"\r\n");
        assert_eq!(ResultTable::from_csv_str(&s).unwrap().columns(), t.columns());
    }

    #[test]
    fn emit_writes_file_and_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("t.csv");
        let mut t = ResultTable::new(["v"]);
        t.push_row(vec![0.5]).unwrap();
        emit_csv(&t, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "v\r\n0.5\r\n");
        let blocked = dir.path().join("sub").join("t.csv").join("x.csv");
        match emit_csv(&t, &blocked) {
            Err(Error::Io { path, .. }) => assert!(path.starts_with(dir.path())),
            other => panic!("expected an i/o error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn parse_back_is_exact_at_twelve_digits(v in prop::num::f64::NORMAL) {
            let s = format_number(v);
            let parsed: f64 = s.parse().unwrap();
            prop_assert_eq!(parsed, reference_round(v));
        }

        #[test]
        fn table_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 0..20)) {
            let mut t = ResultTable::new(["a", "b", "c"]);
            t.set_meta("scenario", "fig2");
            for r in &rows {
                t.push_row(r.clone()).unwrap();
            }
            let back = ResultTable::from_csv_str(&t.to_csv_string().unwrap()).unwrap();
            prop_assert_eq!(back.columns(), t.columns());
            for (a, b) in back.rows().iter().zip(t.rows()) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert_eq!(*x, reference_round(*y));
                }
            }
        }
    }
}
