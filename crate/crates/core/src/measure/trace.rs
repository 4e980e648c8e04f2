use std::path::Path;

use num_complex::Complex64;

use super::touchstone::S11Trace;
use crate::error::{Error, Result};

pub const MIN_TRACE_POINTS: usize = 16;

/// |1 + S11| below this is treated as a short.
pub const SHORT_TOLERANCE: f64 = 1e-9;

pub const TRACE_CSV_HEADER: &str = "f_Hz,Y_re,Y_im";

#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceTrace {
    /// Hz
    pub frequencies: Vec<f64>,
    /// S
    pub y: Vec<Complex64>,
}

impl AdmittanceTrace {
    pub fn new(frequencies: Vec<f64>, y: Vec<Complex64>) -> Result<Self> {
        let t = AdmittanceTrace { frequencies, y };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies.len() != self.y.len() {
            return Err(Error::Invalid("frequency and admittance lengths differ".into()));
        }
        if self.frequencies.len() < MIN_TRACE_POINTS {
            return Err(Error::Invalid(format!(
                "trace has {} points, need at least {MIN_TRACE_POINTS}",
                self.frequencies.len()
            )));
        }
        if self.frequencies.iter().any(|f| !f.is_finite() || *f <= 0.0)
            || self.y.iter().any(|y| !y.re.is_finite() || !y.im.is_finite())
        {
            return Err(Error::Invalid("trace contains non-finite values".into()));
        }
        if self.frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("trace frequencies are not strictly increasing".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    fn power(&self) -> Vec<f64> {
        self.y.iter().map(|y| y.norm_sqr()).collect()
    }
}

pub fn s11_point_to_y(s: Complex64, z0: f64) -> Option<Complex64> {
    let den = Complex64::new(1.0, 0.0) + s;
    (den.norm() >= SHORT_TOLERANCE).then(|| (Complex64::new(1.0, 0.0) - s) / den / z0)
}

pub fn y_point_to_s11(y: Complex64, z0: f64) -> Complex64 {
    let yn = y * z0;
    (Complex64::new(1.0, 0.0) - yn) / (Complex64::new(1.0, 0.0) + yn)
}

#[derive(Debug, Clone)]
pub struct Conversion {
    pub trace: AdmittanceTrace,
    /// Indices into the source trace dropped because S11 ≈ −1.
    pub shorted: Vec<usize>,
}

/// Converts reflection to admittance pointwise, dropping shorted points.
pub fn s11_to_y(trace: &S11Trace) -> Result<Conversion> {
    let mut frequencies = Vec::with_capacity(trace.frequencies.len());
    let mut y = Vec::with_capacity(trace.frequencies.len());
    let mut shorted = Vec::new();
    for (i, (&f, &s)) in trace.frequencies.iter().zip(&trace.s11).enumerate() {
        match s11_point_to_y(s, trace.z0) {
            Some(v) => {
                frequencies.push(f);
                y.push(v);
            }
            None => shorted.push(i),
        }
    }
    Ok(Conversion {
        trace: AdmittanceTrace::new(frequencies, y)?,
        shorted,
    })
}

pub fn y_to_s11(trace: &AdmittanceTrace, z0: f64) -> S11Trace {
    S11Trace {
        frequencies: trace.frequencies.clone(),
        s11: trace.y.iter().map(|&y| y_point_to_s11(y, z0)).collect(),
        z0,
    }
}

/// Vertex of the parabola through three points.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if !(a < 0.0) {
        return None;
    }
    let b = d1 - a * (x[0] + x[1]);
    let xv = -b / (2.0 * a);
    if !(x[0]..=x[2]).contains(&xv) {
        return None;
    }
    let yv = y[1] + d1 * (xv - x[1]) + a * (xv - x[0]) * (xv - x[1]);
    Some((xv, yv))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    /// Hz
    pub frequency: f64,
    /// Interpolated peak |Y|², S².
    pub peak_power: f64,
    pub index: usize,
}

/// Series resonance at the maximum of |Y|, refined by a parabola on |Y|².
pub fn find_resonance(trace: &AdmittanceTrace) -> Result<Resonance> {
    trace.validate()?;
    let p = trace.power();
    let (i, &pmax) = p
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("validated trace is not empty");
    if i == 0 || i + 1 == p.len() {
        return Err(Error::Resonance(format!(
            "maximum |Y| at the {} edge of the span",
            if i == 0 { "lower" } else { "upper" }
        )));
    }
    let f = &trace.frequencies;
    let (frequency, peak_power) = parabola_vertex([f[i - 1], f[i], f[i + 1]], [p[i - 1], p[i], p[i + 1]])
        .map_or((f[i], pmax), |(x, y)| (x, y.max(pmax)));
    Ok(Resonance {
        frequency,
        peak_power,
        index: i,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPower {
    pub f_s: f64,
    pub f1: f64,
    pub f2: f64,
    pub q: f64,
}

/// Half-power bandwidth quality factor around the series peak.
pub fn q_3db(trace: &AdmittanceTrace) -> Result<HalfPower> {
    let res = find_resonance(trace)?;
    let p = trace.power();
    let f = &trace.frequencies;
    let half = 0.5 * res.peak_power;
    let cross = |j: usize, k: usize| f[j] + (half - p[j]) * (f[k] - f[j]) / (p[k] - p[j]);
    let f1 = (1..=res.index)
        .rev()
        .find(|&k| p[k - 1] < half)
        .map(|k| cross(k - 1, k))
        .ok_or_else(|| Error::Resonance("lower half-power point outside the span".into()))?;
    let f2 = (res.index..p.len() - 1)
        .find(|&k| p[k + 1] < half)
        .map(|k| cross(k, k + 1))
        .ok_or_else(|| Error::Resonance("upper half-power point outside the span".into()))?;
    Ok(HalfPower {
        f_s: res.frequency,
        f1,
        f2,
        q: res.frequency / (f2 - f1),
    })
}

pub fn trace_to_csv(trace: &AdmittanceTrace) -> String {
    let mut out = format!("{TRACE_CSV_HEADER}\n");
    for (f, y) in trace.frequencies.iter().zip(&trace.y) {
        out.push_str(&format!("{f},{},{}\n", y.re, y.im));
    }
    out
}

pub fn parse_trace_csv(text: &str, origin: &str) -> Result<AdmittanceTrace> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(origin, 1, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != TRACE_CSV_HEADER.split(',').collect::<Vec<_>>() {
        return Err(Error::parse(origin, 1, format!("expected header '{TRACE_CSV_HEADER}'")));
    }
    let mut frequencies = Vec::new();
    let mut y = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::parse(origin, 0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let num = |k: usize| {
            rec[k]
                .parse::<f64>()
                .map_err(|e| Error::parse(origin, line, format!("column {}: {e}", k + 1)))
        };
        frequencies.push(num(0)?);
        y.push(Complex64::new(num(1)?, num(2)?));
    }
    AdmittanceTrace::new(frequencies, y).map_err(|e| Error::parse(origin, 0, e.to_string()))
}

/// Loads a trace from `.s1p` Touchstone or from admittance CSV.
pub fn load_trace(path: impl AsRef<Path>) -> Result<(AdmittanceTrace, Vec<usize>)> {
    let path = path.as_ref();
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok((parse_trace_csv(&text, &path.display().to_string())?, Vec::new()))
    } else {
        let c = s11_to_y(&super::touchstone::load_touchstone(path)?)?;
        Ok((c.trace, c.shorted))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_rlc(r: f64, l: f64, c: f64, freqs: &[f64]) -> AdmittanceTrace {
        let y = freqs
            .iter()
            .map(|&f| {
                let w = 2.0 * std::f64::consts::PI * f;
                Complex64::new(1.0, 0.0) / Complex64::new(r, w * l - 1.0 / (w * c))
            })
            .collect();
        AdmittanceTrace::new(freqs.to_vec(), y).unwrap()
    }

    fn lin(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn matched_and_open() {
        assert!((s11_point_to_y(Complex64::new(0.0, 0.0), 50.0).unwrap() - 0.02).norm() < 1e-15);
        assert_eq!(s11_point_to_y(Complex64::new(1.0, 0.0), 50.0).unwrap().norm(), 0.0);
        assert!(s11_point_to_y(Complex64::new(-1.0, 0.0), 50.0).is_none());
    }

    #[test]
    fn shorted_points_are_flagged() {
        let mut s11 = vec![Complex64::new(0.3, 0.1); 20];
        s11[4] = Complex64::new(-1.0, 0.0);
        let t = S11Trace {
            frequencies: lin(1.0, 20.0, 20),
            s11,
            z0: 50.0,
        };
        let c = s11_to_y(&t).unwrap();
        assert_eq!(c.shorted, vec![4]);
        assert_eq!(c.trace.len(), 19);
    }

    #[test]
    fn lorentzian_q() {
        let (l, c): (f64, f64) = (1e-6, 1e-12);
        let w0 = 1.0 / (l * c).sqrt();
        let r = w0 * l / 1000.0;
        let f0 = w0 / (2.0 * std::f64::consts::PI);
        let fine = series_rlc(r, l, c, &lin(0.99 * f0, 1.01 * f0, 2001));
        let q = q_3db(&fine).unwrap();
        assert!((q.q / 1000.0 - 1.0).abs() < 0.01, "{}", q.q);
        assert!((q.f_s / f0 - 1.0).abs() < 1e-4);
        let coarse = series_rlc(r, l, c, &lin(0.99 * f0, 1.01 * f0, 501));
        let qc = q_3db(&coarse).unwrap();
        assert!((qc.q / q.q - 1.0).abs() < 0.03, "{}", qc.q);
    }

    #[test]
    fn edge_and_truncation() {
        let t = AdmittanceTrace::new(lin(1.0, 2.0, 20), (0..20).map(|i| Complex64::new(i as f64, 0.0)).collect()).unwrap();
        assert!(matches!(find_resonance(&t), Err(Error::Resonance(_))));

        let (l, c): (f64, f64) = (1e-6, 1e-12);
        let w0 = 1.0 / (l * c).sqrt();
        let f0 = w0 / (2.0 * std::f64::consts::PI);
        let t = series_rlc(w0 * l / 1000.0, l, c, &lin(0.99 * f0, 1.0003 * f0, 400));
        let err = q_3db(&t).unwrap_err().to_string();
        assert!(err.contains("upper"), "{err}");
    }

    #[test]
    fn taller_second_peak_wins() {
        let f = lin(1.0, 100.0, 100);
        let y = f
            .iter()
            .map(|&x| {
                let a = 1.0 / (1.0 + (x - 30.0f64).powi(2));
                let b = 2.0 / (1.0 + (x - 70.0f64).powi(2));
                Complex64::new(a + b, 0.0)
            })
            .collect();
        let t = AdmittanceTrace::new(f, y).unwrap();
        assert!((find_resonance(&t).unwrap().frequency - 70.0).abs() < 0.05);
    }

    #[test]
    fn csv_round_trip() {
        let t = series_rlc(1.0, 1e-6, 1e-12, &lin(1e8, 2e8, 32));
        assert_eq!(parse_trace_csv(&trace_to_csv(&t), "t").unwrap(), t);
        assert!(parse_trace_csv("f,Y_re,Y_im\n1,0,0\n", "t").is_err());
    }
}
