use std::io::Write;

use circwords::report::{to_decimal, Q};
use clap::ValueEnum;
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rationals {
    /// `num/den`
    Fraction,
    /// Decimal strings with `--precision` places.
    Decimal,
}

pub struct Render {
    pub format: Format,
    pub rationals: Rationals,
    pub precision: usize,
}

fn as_fraction(s: &str) -> Option<Q> {
    let (n, d) = s.split_once('/')?;
    let digits = |t: &str| !t.is_empty() && t.chars().all(|c| c.is_ascii_digit());
    let n = n.strip_prefix('-').unwrap_or(n);
    (digits(n) && digits(d)).then(|| s.parse().ok()).flatten()
}

fn decimalize(v: &mut Value, places: usize) {
    match v {
        Value::String(s) => {
            if let Some(q) = as_fraction(s) {
                *s = to_decimal(&q, places);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| decimalize(x, places)),
        Value::Object(map) => map.values_mut().for_each(|x| decimalize(x, places)),
        _ => {}
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        other => out.push((prefix.to_string(), cell(other))),
    }
}

impl Render {
    /// Attach the rendering fields and write the report.
    pub fn emit(&self, mut report: Map<String, Value>, out: &mut impl Write) -> Result<(), CliError> {
        match self.rationals {
            Rationals::Fraction => {
                report.insert("rationals".into(), "fraction".into());
            }
            Rationals::Decimal => {
                let mut v = Value::Object(report);
                decimalize(&mut v, self.precision);
                let Value::Object(m) = v else { unreachable!() };
                report = m;
                report.insert("rationals".into(), "decimal".into());
                report.insert("precision".into(), self.precision.into());
                if self.format == Format::Csv {
                    if let Some(Value::Array(rows)) = report.get_mut("rows") {
                        for row in rows.iter_mut().filter_map(Value::as_object_mut) {
                            row.insert("precision".into(), self.precision.into());
                        }
                    }
                }
            }
        }
        match self.format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, &Value::Object(report))?;
                writeln!(out)?;
            }
            Format::Csv => self.csv(&report, out)?,
        }
        Ok(())
    }

    fn csv(&self, report: &Map<String, Value>, out: &mut impl Write) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        match report.get("rows") {
            Some(Value::Array(rows)) if rows.iter().all(Value::is_object) && !rows.is_empty() => {
                let header: Vec<String> = rows[0].as_object().unwrap().keys().cloned().collect();
                w.write_record(&header)?;
                for row in rows {
                    let row = row.as_object().unwrap();
                    w.write_record(header.iter().map(|h| row.get(h).map(cell).unwrap_or_default()))?;
                }
            }
            _ => {
                let mut pairs = Vec::new();
                flatten("", &Value::Object(report.clone()), &mut pairs);
                w.write_record(["key", "value"])?;
                for (k, v) in pairs {
                    w.write_record([k, v])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}
