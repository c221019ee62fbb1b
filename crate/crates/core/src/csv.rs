//! Plot-ready CSV output: comma separated, header row, LF line endings,
//! floats printed with 17 significant digits so files round-trip bit-exactly.

use std::io::{self, Write};

use crate::scalar::Real;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn fmt_real<R: Real>(x: R) -> String {
    fmt_f64(x.to_f64_lossy())
}

pub struct CsvWriter<W: Write> {
    inner: W,
    columns: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new<S: AsRef<str>>(mut inner: W, header: &[S]) -> io::Result<Self> {
        let line: Vec<&str> = header.iter().map(|s| s.as_ref()).collect();
        inner.write_all(line.join(",").as_bytes())?;
        inner.write_all(b"\n")?;
        Ok(Self {
            inner,
            columns: header.len(),
        })
    }

    /// Writes one row of pre-formatted fields.
    pub fn row(&mut self, fields: &[String]) -> io::Result<()> {
        debug_assert_eq!(fields.len(), self.columns, "csv row width");
        self.inner.write_all(fields.join(",").as_bytes())?;
        self.inner.write_all(b"\n")
    }

    pub fn row_f64(&mut self, fields: &[f64]) -> io::Result<()> {
        let f: Vec<String> = fields.iter().map(|&v| fmt_f64(v)).collect();
        self.row(&f)
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}
