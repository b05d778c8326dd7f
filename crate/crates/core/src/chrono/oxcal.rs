use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use super::DateDistribution;
use crate::error::{Error, Result};

/// Parse two-column `(year, probability)` text as exported by OxCal's raw
/// output view.
///
/// Fields may be separated by commas, semicolons, tabs or spaces. Blank
/// lines and lines starting with `#` or `!` are skipped, and a single
/// non-numeric header line is allowed before the data. Years must increase
/// with a uniform step.
pub fn parse_oxcal_raw(text: &str) -> Result<DateDistribution> {
    let mut years: Vec<f64> = Vec::new();
    let mut mass = Vec::new();
    let mut header_seen = false;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('!') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let numbers: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        let Some(numbers) = numbers else {
            if years.is_empty() && !header_seen {
                header_seen = true;
                continue;
            }
            return Err(Error::Parse {
                line: line_no,
                msg: format!("non-numeric row {line:?}"),
            });
        };
        if numbers.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!(
                    "expected 2 columns (year, probability), found {}",
                    numbers.len()
                ),
            });
        }
        let (year, p) = (numbers[0], numbers[1]);
        if !year.is_finite() || !p.is_finite() || p < 0.0 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("invalid values {year}, {p}"),
            });
        }
        if let Some(&prev) = years.last() {
            if year <= prev {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("year {year} does not increase after {prev}"),
                });
            }
            let step = years.get(1).map_or(year - prev, |y1| y1 - years[0]);
            if ((year - prev) - step).abs() > 1e-6 * step.abs().max(1.0) {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-uniform spacing: step {} after {}", year - prev, step),
                });
            }
        }
        years.push(year);
        mass.push(p);
    }
    if years.is_empty() {
        return Err(Error::Parse {
            line: text.lines().count().max(1),
            msg: "no data rows".into(),
        });
    }
    let step = if years.len() > 1 {
        years[1] - years[0]
    } else {
        5.0
    };
    if years.len() > 1
        && ((years[years.len() - 1] - years[0]) / step - (years.len() - 1) as f64).abs() > 1e-6
    {
        return Err(Error::Parse {
            line: 1,
            msg: "year grid drifts from a uniform step".into(),
        });
    }
    DateDistribution::new(years[0], step, mass)
}

pub fn read_oxcal_raw(path: &Path) -> Result<DateDistribution> {
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::from(e).in_file(path))?;
    parse_oxcal_raw(&text).map_err(|e| e.in_file(path))
}

/// Inverse of [`parse_oxcal_raw`]; mass values round-trip bit-exactly.
pub fn write_oxcal_raw(d: &DateDistribution) -> String {
    let mut out = String::from("year,probability\n");
    for (y, m) in d.years().zip(d.raw_mass()) {
        let _ = writeln!(out, "{y},{m}");
    }
    out
}
