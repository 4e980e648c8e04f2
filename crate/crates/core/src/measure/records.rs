use std::path::Path;

use crate::dispersion::{device_to_coords, DeviceGeometry};
use crate::error::{Error, Result};

pub const MEASURED_SET_COLUMNS: [&str; 7] =
    ["device_id", "f_s_Hz", "Q_3dB", "Rs_ohm", "lambda_m", "h_m", "tm_m"];

pub const RECORD_CSV_HEADER: &str = "device_id,f_s_Hz,Q_3dB,Rs_ohm,lambda_m,h_m,tm_m,Rm_ohm,Q_m,deembedded,h_over_lambda,tm_over_h,tm_over_lambda";

/// How `q_m` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deembedding {
    /// Taken from a `Q_m` column or a circuit fit.
    Supplied,
    /// `Q_3dB·(Rm + Rs)/Rm` from the `Rs_ohm` and `Rm_ohm` columns.
    FromResistances,
    /// No series resistance data; `q_m = q_3db`.
    Skipped,
    /// `Rs_ohm` given without `Rm_ohm`; `q_m = q_3db`.
    MissingRm,
}

impl Deembedding {
    pub fn label(self) -> &'static str {
        match self {
            Deembedding::Supplied => "supplied",
            Deembedding::FromResistances => "rs_rm",
            Deembedding::Skipped => "skipped",
            Deembedding::MissingRm => "skipped_no_rm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceRecord {
    pub device_id: String,
    /// Hz
    pub f_s: f64,
    pub q_3db: f64,
    pub q_m: f64,
    /// Ω
    pub rs: Option<f64>,
    /// Ω
    pub rm: Option<f64>,
    pub geometry: DeviceGeometry,
    pub deembedding: Deembedding,
}

impl ResonanceRecord {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.f_s) || !pos(self.q_3db) || !pos(self.q_m) {
            return Err(Error::Validation(format!(
                "record '{}': f_s, Q_3dB and Q_m must be positive",
                self.device_id
            )));
        }
        if self.rs.is_some_and(|r| !(r.is_finite() && r >= 0.0)) || self.rm.is_some_and(|r| !pos(r)) {
            return Err(Error::Validation(format!(
                "record '{}': resistances must be nonnegative",
                self.device_id
            )));
        }
        self.geometry.validate()
    }
}

/// Parses a measured-set CSV. `Rs_ohm` may be absent or empty; optional
/// `Rm_ohm` and `Q_m` columns enable de-embedding.
pub fn parse_measured_set(text: &str, origin: &str) -> Result<Vec<ResonanceRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(origin, 1, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    for name in MEASURED_SET_COLUMNS {
        if name != "Rs_ohm" && col(name).is_none() {
            return Err(Error::parse(origin, 1, format!("missing column '{name}'")));
        }
    }
    let known = ["Rm_ohm", "Q_m"];
    if let Some(h) = headers
        .iter()
        .find(|h| !MEASURED_SET_COLUMNS.contains(h) && !known.contains(h))
    {
        return Err(Error::parse(origin, 1, format!("unknown column '{h}'")));
    }
    let (c_rs, c_rm, c_qm) = (col("Rs_ohm"), col("Rm_ohm"), col("Q_m"));

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::parse(origin, 0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |name: &str| rec.get(col(name).expect("checked above")).unwrap_or("");
        let num = |name: &str| -> Result<f64> {
            field(name)
                .parse::<f64>()
                .map_err(|e| Error::parse(origin, line, format!("column '{name}': {e}")))
        };
        let opt = |c: Option<usize>, name: &str| -> Result<Option<f64>> {
            match c.and_then(|c| rec.get(c)).filter(|s| !s.is_empty()) {
                None => Ok(None),
                Some(s) => s
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|e| Error::parse(origin, line, format!("column '{name}': {e}"))),
            }
        };
        let device_id = field("device_id").to_string();
        let f_s = num("f_s_Hz")?;
        let q_3db = num("Q_3dB")?;
        let rs = opt(c_rs, "Rs_ohm")?;
        let rm = opt(c_rm, "Rm_ohm")?;
        let q_given = opt(c_qm, "Q_m")?;
        let (q_m, deembedding) = match (q_given, rs, rm) {
            (Some(q), _, _) => (q, Deembedding::Supplied),
            (None, Some(rs), Some(rm)) => (q_3db * (rm + rs) / rm, Deembedding::FromResistances),
            (None, Some(_), None) => (q_3db, Deembedding::MissingRm),
            (None, None, _) => (q_3db, Deembedding::Skipped),
        };
        let record = ResonanceRecord {
            device_id,
            f_s,
            q_3db,
            q_m,
            rs,
            rm,
            geometry: DeviceGeometry {
                wavelength: num("lambda_m")?,
                film_thickness: num("h_m")?,
                metal_thickness: num("tm_m")?,
                resonance_frequency: Some(f_s),
            },
            deembedding,
        };
        record
            .validate()
            .map_err(|e| Error::parse(origin, line, e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

pub fn load_measured_set(path: impl AsRef<Path>) -> Result<Vec<ResonanceRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_measured_set(&text, &path.display().to_string())
}

fn opt_field(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

pub fn records_to_csv(records: &[ResonanceRecord]) -> String {
    let mut out = format!("{RECORD_CSV_HEADER}\n");
    for r in records {
        let g = &r.geometry;
        let c = device_to_coords(g);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.device_id,
            r.f_s,
            r.q_3db,
            opt_field(r.rs),
            g.wavelength,
            g.film_thickness,
            g.metal_thickness,
            opt_field(r.rm),
            r.q_m,
            r.deembedding.label(),
            c.h_over_lambda,
            c.tm_over_h,
            c.tm_over_lambda
        ));
    }
    out
}
