//! Plain comma-separated tables with a header row. Floats print with 17
//! significant digits so parse(write(x)) recovers x bit-exactly.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::io_err;
use crate::{CliError, Result};

/// 17 significant digits: enough for exact f64 round-trips.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| CliError::Csv(format!("bad float `{s}`: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Csv(format!("missing column `{name}`")))?;
        self.rows.iter().map(|r| parse_f64(&r[k])).collect()
    }

    pub fn to_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CliError::Csv("empty csv".into()))?
            .split(',')
            .map(|s| s.to_string())
            .collect::<Vec<_>>();
        let mut rows = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let row: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
            if row.len() != header.len() {
                return Err(CliError::Csv(format!(
                    "row has {} fields, header has {}",
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }
}

/// Atomic write (temp file + rename).
pub fn write_csv(path: &Path, table: &CsvTable) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let tmp = path.with_extension("csv.tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(table.to_string().as_bytes()).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    CsvTable::parse(&text)
}
