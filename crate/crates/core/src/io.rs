//! CSV interchange for weights, traces and patterns. Floats are written in Rust's
//! shortest round-trip form, so a write followed by a read is exact.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::analog::AnalogTraceRow;
use crate::digital::DigitalTraceRow;
use crate::error::{Error, Result};
use crate::linalg::CVec;

const UNIT_TOL: f64 = 1e-9;

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    Ok(out)
}

fn reader<R: Read>(r: R, header: &[&str]) -> Result<csv::Reader<R>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let got = rdr.headers()?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::Parse(format!(
            "expected header {}, got {}",
            header.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(rdr)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str) -> Result<T> {
    let s = rec
        .get(i)
        .ok_or_else(|| Error::Parse(format!("missing field {what}")))?;
    s.parse()
        .map_err(|_| Error::Parse(format!("bad {what} value {s:?}")))
}

fn finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Parse(format!("non-finite {what}")))
    }
}

fn check_record_len(rec: &csv::StringRecord, n: usize) -> Result<()> {
    if rec.len() != n {
        return Err(Error::Parse(format!("expected {n} fields, got {}", rec.len())));
    }
    Ok(())
}

/// Header `ap,antenna,re,im`.
pub fn write_analog_weights<W: Write>(w: W, weights: &[CVec]) -> Result<()> {
    let mut out = writer(w, &["ap", "antenna", "re", "im"])?;
    for (l, v) in weights.iter().enumerate() {
        for (i, z) in v.iter().enumerate() {
            out.write_record([l.to_string(), i.to_string(), z.re.to_string(), z.im.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Rows must be ordered by AP then antenna, every AP must have the same length, and
/// every weight must have unit modulus.
pub fn read_analog_weights<R: Read>(r: R) -> Result<Vec<CVec>> {
    let mut rdr = reader(r, &["ap", "antenna", "re", "im"])?;
    let mut out: Vec<CVec> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        check_record_len(&rec, 4)?;
        let l: usize = field(&rec, 0, "ap")?;
        let i: usize = field(&rec, 1, "antenna")?;
        let z = Complex64::new(finite(field(&rec, 2, "re")?, "re")?, finite(field(&rec, 3, "im")?, "im")?);
        if l == out.len() && i == 0 {
            out.push(Vec::new());
        }
        let count = out.len();
        match out.last_mut() {
            Some(v) if l + 1 == count && i == v.len() => v.push(z),
            _ => return Err(Error::Parse(format!("row ap={l} antenna={i} is out of order"))),
        }
        if ((z.norm()) - 1.0).abs() > UNIT_TOL {
            return Err(Error::Parse(format!("weight ap={l} antenna={i} is not unit modulus")));
        }
    }
    if out.is_empty() {
        return Err(Error::Parse("no analog weights".into()));
    }
    if out.iter().any(|v| v.len() != out[0].len()) {
        return Err(Error::Parse("APs have different antenna counts".into()));
    }
    Ok(out)
}

/// Header `ap,re,im`.
pub fn write_digital_weights<W: Write>(w: W, w_bb: &[Complex64]) -> Result<()> {
    let mut out = writer(w, &["ap", "re", "im"])?;
    for (l, z) in w_bb.iter().enumerate() {
        out.write_record([l.to_string(), z.re.to_string(), z.im.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_digital_weights<R: Read>(r: R) -> Result<CVec> {
    let mut rdr = reader(r, &["ap", "re", "im"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        check_record_len(&rec, 3)?;
        let l: usize = field(&rec, 0, "ap")?;
        if l != out.len() {
            return Err(Error::Parse(format!("row ap={l} is out of order")));
        }
        out.push(Complex64::new(finite(field(&rec, 1, "re")?, "re")?, finite(field(&rec, 2, "im")?, "im")?));
    }
    if out.is_empty() {
        return Err(Error::Parse("no digital weights".into()));
    }
    Ok(out)
}

/// Header `ap,iter,epsilon_l,residual_h,residual_g,residual_q,violation_db`.
pub fn write_analog_traces<W: Write>(w: W, traces: &[&[AnalogTraceRow]]) -> Result<()> {
    let mut out = writer(
        w,
        &["ap", "iter", "epsilon_l", "residual_h", "residual_g", "residual_q", "violation_db"],
    )?;
    for (l, rows) in traces.iter().enumerate() {
        for r in rows.iter() {
            out.write_record([
                l.to_string(),
                r.iter.to_string(),
                r.epsilon_l.to_string(),
                r.residual_h.to_string(),
                r.residual_g.to_string(),
                r.residual_q.to_string(),
                r.violation_db.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Header `iter,epsilon,residual_h,residual_g,residual_q`.
pub fn write_digital_trace<W: Write>(w: W, rows: &[DigitalTraceRow]) -> Result<()> {
    let mut out = writer(w, &["iter", "epsilon", "residual_h", "residual_g", "residual_q"])?;
    for r in rows {
        out.write_record([
            r.iter.to_string(),
            r.epsilon.to_string(),
            r.residual_h.to_string(),
            r.residual_g.to_string(),
            r.residual_q.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Header `angle_deg,gain_db`.
pub fn write_pattern<W: Write>(w: W, angles: &[f64], gains_db: &[f64]) -> Result<()> {
    crate::error::check_len("pattern gains vs angles", angles.len(), gains_db.len())?;
    let mut out = writer(w, &["angle_deg", "gain_db"])?;
    for (a, g) in angles.iter().zip(gains_db) {
        out.write_record([a.to_string(), g.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_pattern<R: Read>(r: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = reader(r, &["angle_deg", "gain_db"])?;
    let (mut a, mut g) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        check_record_len(&rec, 2)?;
        a.push(finite(field(&rec, 0, "angle_deg")?, "angle")?);
        g.push(field(&rec, 1, "gain_db")?);
    }
    Ok((a, g))
}

/// Header `az_deg,el_deg,gain_db`.
pub fn write_upa_pattern<W: Write>(w: W, points: &[(f64, f64)], gains_db: &[f64]) -> Result<()> {
    crate::error::check_len("pattern gains vs points", points.len(), gains_db.len())?;
    let mut out = writer(w, &["az_deg", "el_deg", "gain_db"])?;
    for ((az, el), g) in points.iter().zip(gains_db) {
        out.write_record([az.to_string(), el.to_string(), g.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
