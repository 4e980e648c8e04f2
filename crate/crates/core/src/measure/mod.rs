//! One-port measurement ingestion: Touchstone parsing, admittance traces,
//! resonance and half-power Q extraction, mBVD fitting and ohmic
//! de-embedding.

mod mbvd;
mod records;
mod touchstone;
mod trace;

pub use mbvd::{deembed_q, fit_mbvd, initial_guess, DeembeddedQ, MbvdFit, MbvdFitOptions, MbvdParams};
pub use records::{
    load_measured_set, parse_measured_set, records_to_csv, Deembedding, ResonanceRecord,
    MEASURED_SET_COLUMNS, RECORD_CSV_HEADER,
};
pub use touchstone::{load_touchstone, parse_touchstone, touchstone_to_string, DataFormat, S11Trace};
pub use trace::{
    find_resonance, load_trace, parse_trace_csv, q_3db, s11_point_to_y, s11_to_y, trace_to_csv,
    y_point_to_s11, y_to_s11, AdmittanceTrace, Conversion, HalfPower, Resonance, MIN_TRACE_POINTS,
    TRACE_CSV_HEADER,
};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;

/// `n` evenly spaced frequencies over `[start, stop]`.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    (0..n)
        .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Circuit response with complex Gaussian noise at the given SNR (dB,
/// relative to the RMS admittance). `None` gives a noiseless trace.
pub fn synthetic_trace<R: Rng>(
    params: &MbvdParams,
    frequencies: &[f64],
    snr_db: Option<f64>,
    rng: &mut R,
) -> Result<AdmittanceTrace> {
    let mut t = params.trace(frequencies)?;
    if let Some(snr) = snr_db {
        let rms = (t.y.iter().map(|y| y.norm_sqr()).sum::<f64>() / t.len() as f64).sqrt();
        let sigma = rms * 10f64.powf(-snr / 20.0) / std::f64::consts::SQRT_2;
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        for y in &mut t.y {
            *y += Complex64::new(normal.sample(rng), normal.sample(rng));
        }
    }
    Ok(t)
}
