//! Flat-file formats: CSV with a header row, and JSON documents whose
//! schemas live in `schemas/`.
//!
//! Numbers are written with 12 significant digits so that files are
//! byte-stable across runs and rational probabilities compare cleanly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{QwalkError, Result};
use crate::readout::ReadoutCurve;
use crate::walk::{parse_ring_label, Distribution, Support};
use crate::wigner::WignerGrid;

/// `printf("%.12g")`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exp.abs())
    } else {
        let decimals = (11 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_error(e: csv::Error) -> QwalkError {
    if e.is_io_error() {
        QwalkError::Io(e.to_string())
    } else {
        QwalkError::Format(e.to_string())
    }
}

/// `position,probability`; ring positions use the labels `0, pi/2, pi, -pi/2`.
pub fn write_distribution_csv(dist: &Distribution, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["position", "probability"])
        .map_err(csv_error)?;
    for (i, p) in dist.probabilities.iter().enumerate() {
        w.write_record([dist.label(i), format_number(*p)])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_distribution_csv(support: Support, input: impl Read) -> Result<Distribution> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &["position", "probability"])?;
    let (mut positions, mut probabilities) = (Vec::new(), Vec::new());
    for record in r.records() {
        let record = record.map_err(csv_error)?;
        let label = &record[0];
        let position = match support {
            Support::Line => label.parse().ok(),
            Support::Ring => parse_ring_label(label),
        }
        .ok_or_else(|| QwalkError::Format(format!("bad position `{label}`")))?;
        positions.push(position);
        probabilities.push(parse_f64(&record[1])?);
    }
    Ok(Distribution::new(support, positions, probabilities))
}

/// `step,p_down`
pub fn write_curve_csv(curve: &ReadoutCurve, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "p_down"]).map_err(csv_error)?;
    for (n, p) in curve.steps.iter().zip(&curve.p_down) {
        w.write_record([n.to_string(), format_number(*p)])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv(input: impl Read) -> Result<ReadoutCurve> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &["step", "p_down"])?;
    let (mut steps, mut p_down) = (Vec::new(), Vec::new());
    for record in r.records() {
        let record = record.map_err(csv_error)?;
        steps.push(
            record[0]
                .trim()
                .parse()
                .map_err(|_| QwalkError::Format(format!("bad step `{}`", &record[0])))?,
        );
        p_down.push(parse_f64(&record[1])?);
    }
    ReadoutCurve::new(steps, p_down).map_err(|e| QwalkError::Format(e.to_string()))
}

pub fn read_curve_json(input: impl Read) -> Result<ReadoutCurve> {
    let curve: ReadoutCurve =
        serde_json::from_reader(input).map_err(|e| QwalkError::Format(e.to_string()))?;
    curve
        .validate()
        .map_err(|e| QwalkError::Format(e.to_string()))?;
    Ok(curve)
}

/// Grid CSV: the header row is `p\x` followed by the `x` values; each later
/// row starts with its `p` value.
pub fn write_wigner_csv(grid: &WignerGrid, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header =
        std::iter::once("p\\x".to_string()).chain(grid.xs.iter().map(|x| format_number(*x)));
    w.write_record(header).map_err(csv_error)?;
    for (p, row) in grid.ps.iter().zip(&grid.values) {
        let record =
            std::iter::once(format_number(*p)).chain(row.iter().map(|v| format_number(*v)));
        w.write_record(record).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON form of a [`Distribution`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionDocument {
    pub support: Support,
    pub positions: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl From<&Distribution> for DistributionDocument {
    fn from(d: &Distribution) -> Self {
        Self {
            support: d.support,
            positions: (0..d.positions.len()).map(|i| d.label(i)).collect(),
            probabilities: d.probabilities.clone(),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, mut out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| QwalkError::Io(e.to_string()))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| QwalkError::Format(format!("bad number `{s}`")))
}

fn check_header<R: Read>(r: &mut csv::Reader<R>, want: &[&str]) -> Result<()> {
    let header = r.headers().map_err(csv_error)?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != want {
        return Err(QwalkError::Format(format!(
            "expected header `{}`, found `{}`",
            want.join(","),
            got.join(",")
        )));
    }
    Ok(())
}
