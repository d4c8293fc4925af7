//! JSON and CSV output. Floats are written with 17 significant digits and
//! struct fields keep their declaration order, so equal inputs give
//! byte-identical files.

use std::collections::BTreeMap;
use std::io::Write;

use latred_core::Complex64;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::simulate::Envelope;

/// A float written as `d.dddddddddddddddde±x`; non-finite values become `null`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct F17(pub f64);

impl F17 {
    pub fn text(&self) -> String {
        if self.0.is_finite() { format!("{:.16e}", self.0) } else { String::new() }
    }
}

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(self.text()).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct C17 {
    pub re: F17,
    pub im: F17,
}

impl From<Complex64> for C17 {
    fn from(z: Complex64) -> Self {
        C17 { re: F17(z.re), im: F17(z.im) }
    }
}

pub fn params17(p: &latred_core::Params) -> BTreeMap<String, F17> {
    p.iter().map(|(k, v)| (k.clone(), F17(*v))).collect()
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types always serialize");
    s.push('\n');
    s
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&std::path::Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

/// `index,re,im` rows.
pub fn envelope_csv(values: &[Complex64]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "re", "im"])?;
    for (i, z) in values.iter().enumerate() {
        w.write_record([i.to_string(), F17(z.re).text(), F17(z.im).text()])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

pub fn write_envelope(path: &std::path::Path, e: &Envelope) -> anyhow::Result<()> {
    std::fs::write(path, envelope_csv(&e.values)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        #[derive(Serialize)]
        struct Row {
            b: F17,
            a: F17,
            c: F17,
        }
        let s = serde_json::to_string(&Row { b: F17(0.1), a: F17(-2.5e-300), c: F17(f64::NAN) }).unwrap();
        assert_eq!(s, r#"{"b":1.0000000000000001e-1,"a":-2.5000000000000000e-300,"c":null}"#);
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
    }

    #[test]
    fn envelope_rows() {
        let csv = envelope_csv(&[Complex64::new(1.0, -0.5)]).unwrap();
        assert_eq!(csv, "index,re,im\n0,1.0000000000000000e0,-5.0000000000000000e-1\n");
    }
}
