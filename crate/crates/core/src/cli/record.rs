use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// One CSV row: scenario id, seed, round and named values.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scenario: String,
    pub seed: u64,
    pub t: usize,
    pub columns: Vec<(String, f64)>,
}

impl RunRecord {
    pub fn new(scenario: &str, seed: u64, t: usize) -> Self {
        Self { scenario: scenario.to_string(), seed, t, columns: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.columns.push((name.into(), value));
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Formats `v` with 12 significant digits, plain decimal for moderate
/// exponents and scientific otherwise. Trailing zeros are dropped.
pub fn format_sig(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mant.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

/// Writes the records as CSV. All records must share the column layout
/// of the first; an empty list yields a header-only file.
pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(out);
    let mut header = vec!["scenario".to_string(), "seed".into(), "t".into()];
    if let Some(first) = records.first() {
        header.extend(first.columns.iter().map(|(n, _)| n.clone()));
    }
    w.write_record(&header)?;
    for (i, r) in records.iter().enumerate() {
        let same = r.columns.len() + 3 == header.len()
            && r.columns.iter().zip(&header[3..]).all(|((n, _), h)| n == h);
        if !same {
            return Err(Error::input(format!("record {i} does not match the CSV header")));
        }
        let mut row = vec![r.scenario.clone(), r.seed.to_string(), r.t.to_string()];
        row.extend(r.columns.iter().map(|(_, v)| format_sig(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    write_csv(records, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(2.7), "2.7");
        assert_eq!(format_sig(50.0), "50");
        assert_eq!(format_sig(-0.0), "0");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(123456.789012345), "123456.789012");
        assert_eq!(format_sig(1e-7), "1e-7");
        assert_eq!(format_sig(-2.5e20), "-2.5e20");
        assert_eq!(format_sig(f64::NAN), "NaN");
    }

    #[test]
    fn header_only_and_one_row() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "scenario,seed,t\n");

        let mut r = RunRecord::new("x", 3, 10);
        r.push("a", 1.5).push("b", -2.0);
        let mut buf = Vec::new();
        write_csv(&[r], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "scenario,seed,t,a,b\nx,3,10,1.5,-2\n");
    }

    #[test]
    fn mismatched_columns_are_rejected() {
        let mut a = RunRecord::new("x", 0, 1);
        a.push("a", 1.0);
        let mut b = RunRecord::new("x", 0, 2);
        b.push("b", 1.0);
        assert!(write_csv(&[a, b], Vec::new()).is_err());
    }
}
