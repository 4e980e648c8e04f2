use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    RealImag,
    MagAngle,
    DbAngle,
}

/// One-port reflection data.
#[derive(Debug, Clone, PartialEq)]
pub struct S11Trace {
    /// Hz, strictly increasing.
    pub frequencies: Vec<f64>,
    pub s11: Vec<Complex64>,
    /// Reference impedance, Ω.
    pub z0: f64,
}

struct OptionLine {
    scale: f64,
    format: DataFormat,
    z0: f64,
}

impl Default for OptionLine {
    fn default() -> Self {
        OptionLine {
            scale: 1e9,
            format: DataFormat::MagAngle,
            z0: 50.0,
        }
    }
}

fn parse_option_line(rest: &str, origin: &str, line: usize) -> Result<OptionLine> {
    let mut opt = OptionLine::default();
    let mut tokens = rest.split_whitespace();
    while let Some(tok) = tokens.next() {
        match tok.to_ascii_uppercase().as_str() {
            "HZ" => opt.scale = 1.0,
            "KHZ" => opt.scale = 1e3,
            "MHZ" => opt.scale = 1e6,
            "GHZ" => opt.scale = 1e9,
            "S" => {}
            "Y" | "Z" | "H" | "G" => {
                return Err(Error::parse(
                    origin,
                    line,
                    format!("only S parameters are supported, got '{tok}'"),
                ))
            }
            "RI" => opt.format = DataFormat::RealImag,
            "MA" => opt.format = DataFormat::MagAngle,
            "DB" => opt.format = DataFormat::DbAngle,
            "R" => {
                let z = tokens
                    .next()
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|z| z.is_finite() && *z > 0.0)
                    .ok_or_else(|| {
                        Error::parse(origin, line, "option 'R' needs a positive impedance")
                    })?;
                opt.z0 = z;
            }
            _ => {
                return Err(Error::parse(
                    origin,
                    line,
                    format!("malformed option line: unknown keyword '{tok}'"),
                ))
            }
        }
    }
    Ok(opt)
}

fn to_complex(a: f64, b: f64, format: DataFormat) -> Complex64 {
    match format {
        DataFormat::RealImag => Complex64::new(a, b),
        DataFormat::MagAngle => Complex64::from_polar(a, b.to_radians()),
        DataFormat::DbAngle => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
    }
}

/// Parses version-1 one-port Touchstone text.
pub fn parse_touchstone(text: &str, origin: &str) -> Result<S11Trace> {
    let mut opt: Option<OptionLine> = None;
    let mut frequencies = Vec::new();
    let mut s11 = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            return Err(Error::parse(
                origin,
                line_no,
                "keyword sections are Touchstone version 2; only version 1 is supported",
            ));
        }
        if let Some(rest) = line.strip_prefix('#') {
            // Later option lines are ignored, as in the format definition.
            if opt.is_none() {
                opt = Some(parse_option_line(rest, origin, line_no)?);
            }
            continue;
        }
        let o = opt.get_or_insert_with(OptionLine::default);
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(origin, line_no, format!("bad number: {e}")))?;
        match values.len() {
            3 => {}
            n if n > 3 => {
                return Err(Error::parse(
                    origin,
                    line_no,
                    format!("{n} values on a data line; multi-port files are not supported"),
                ))
            }
            n => {
                return Err(Error::parse(
                    origin,
                    line_no,
                    format!("expected 3 values on a data line, found {n}"),
                ))
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(origin, line_no, "non-finite value"));
        }
        let f = values[0] * o.scale;
        if let Some(&prev) = frequencies.last() {
            if f <= prev {
                return Err(Error::parse(origin, line_no, "frequencies are not strictly increasing"));
            }
        }
        frequencies.push(f);
        s11.push(to_complex(values[1], values[2], o.format));
    }
    if frequencies.is_empty() {
        return Err(Error::parse(origin, 0, "no data lines"));
    }
    Ok(S11Trace {
        frequencies,
        s11,
        z0: opt.map_or(50.0, |o| o.z0),
    })
}

/// Reads a `.s1p` file. Other `.sNp` extensions are rejected as multi-port.
pub fn load_touchstone(path: impl AsRef<Path>) -> Result<S11Trace> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    if let Some(ext) = path.extension().and_then(|e| e.to_str()) {
        let ext = ext.to_ascii_lowercase();
        if ext.len() > 2 && ext.starts_with('s') && ext.ends_with('p') && ext != "s1p" {
            return Err(Error::parse(&origin, 0, format!("multi-port file (.{ext}) not supported")));
        }
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_touchstone(&text, &origin)
}

/// Writes a trace as RI Touchstone with frequencies in Hz.
pub fn touchstone_to_string(trace: &S11Trace) -> String {
    let mut out = format!("# Hz S RI R {}\n", trace.z0);
    for (f, s) in trace.frequencies.iter().zip(&trace.s11) {
        out.push_str(&format!("{f} {} {}\n", s.re, s.im));
    }
    out
}
