use std::f64::consts::PI;

use num_complex::Complex64;

use super::trace::{find_resonance, AdmittanceTrace};
use crate::error::{Error, Result};
use crate::lm::{minimize, LmOptions};

/// Modified Butterworth–Van Dyke equivalent circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MbvdParams {
    /// Ω
    pub rm: f64,
    /// H
    pub lm: f64,
    /// F
    pub cm: f64,
    /// F
    pub c0: f64,
    /// Ω
    pub rs: f64,
    /// Ω
    pub r0: f64,
}

impl MbvdParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(pos(self.rm) && pos(self.lm) && pos(self.cm) && pos(self.c0)) {
            return Err(Error::Validation("Rm, Lm, Cm and C0 must be positive".into()));
        }
        if !(nonneg(self.rs) && nonneg(self.r0)) {
            return Err(Error::Validation("Rs and R0 must be >= 0".into()));
        }
        Ok(())
    }

    /// Series (motional) resonance, Hz.
    pub fn f_s(&self) -> f64 {
        1.0 / (2.0 * PI * (self.lm * self.cm).sqrt())
    }

    /// Lossless antiresonance, Hz.
    pub fn f_p(&self) -> f64 {
        self.f_s() * (1.0 + self.cm / self.c0).sqrt()
    }

    pub fn admittance(&self, f: f64) -> Complex64 {
        let w = 2.0 * PI * f;
        let j = Complex64::i();
        let zm = Complex64::new(self.rm, 0.0) + j * w * self.lm + 1.0 / (j * w * self.cm);
        let z0 = Complex64::new(self.r0, 0.0) + 1.0 / (j * w * self.c0);
        let core = zm * z0 / (zm + z0);
        1.0 / (Complex64::new(self.rs, 0.0) + core)
    }

    pub fn trace(&self, frequencies: &[f64]) -> Result<AdmittanceTrace> {
        AdmittanceTrace::new(
            frequencies.to_vec(),
            frequencies.iter().map(|&f| self.admittance(f)).collect(),
        )
    }

    /// Informational coupling ratio `(π²/8)·(f_p² − f_s²)/f_p²`.
    pub fn kt2(&self) -> f64 {
        let (fs, fp) = (self.f_s(), self.f_p());
        PI * PI / 8.0 * (fp * fp - fs * fs) / (fp * fp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeembeddedQ {
    /// `ω_s·Lm/(Rm + Rs)`
    pub loaded: f64,
    /// `ω_s·Lm/Rm`
    pub mechanical: f64,
}

pub fn deembed_q(p: &MbvdParams) -> Result<DeembeddedQ> {
    p.validate()?;
    let x = 2.0 * PI * p.f_s() * p.lm;
    Ok(DeembeddedQ {
        loaded: x / (p.rm + p.rs),
        mechanical: x / p.rm,
    })
}

#[derive(Debug, Clone)]
pub struct MbvdFitOptions {
    /// Fit R0 as well; otherwise it stays at the initial value.
    pub fit_r0: bool,
    /// Rs below `rs_floor·Rm` is reported as 0.
    pub rs_floor: f64,
    /// Relative RMS misfit above which a quality warning is attached.
    pub warn_misfit: f64,
    pub lm: LmOptions,
}

impl Default for MbvdFitOptions {
    fn default() -> Self {
        MbvdFitOptions {
            fit_r0: false,
            rs_floor: 1e-6,
            warn_misfit: 0.05,
            lm: LmOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MbvdFit {
    pub params: MbvdParams,
    pub initial: MbvdParams,
    /// RMS |Y_model − Y_data| divided by RMS |Y_data|.
    pub relative_misfit: f64,
    pub iterations: usize,
    pub cost_history: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Default starting point from peak |Y|, peak |1/Y| and the low-frequency
/// capacitance.
pub fn initial_guess(trace: &AdmittanceTrace) -> Result<MbvdParams> {
    let res = find_resonance(trace)?;
    let f = &trace.frequencies;
    let n = trace.len();
    let (ip, _) = trace
        .y
        .iter()
        .enumerate()
        .skip(res.index + 1)
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .ok_or_else(|| Error::Resonance("no antiresonance above the series peak".into()))?;
    if ip + 1 == n {
        return Err(Error::Resonance(
            "antiresonance not inside the span; C0 is not identifiable".into(),
        ));
    }
    let (fs, fp) = (res.frequency, f[ip]);
    // Lossless BVD: Im Y / ω = C0 (1 + r / (1 - (f/fs)²)) with r = (fp/fs)² - 1.
    let r = (fp / fs).powi(2) - 1.0;
    let n_low = (n / 10).max(1);
    let c0 = (0..n_low)
        .map(|i| {
            let x2 = (f[i] / fs).powi(2);
            trace.y[i].im / (2.0 * PI * f[i]) / (1.0 + r / (1.0 - x2))
        })
        .sum::<f64>()
        / n_low as f64;
    if !(c0 > 0.0) {
        return Err(Error::Resonance("low-frequency admittance is not capacitive".into()));
    }
    let cm = c0 * r;
    let ws = 2.0 * PI * fs;
    let lm = 1.0 / (ws * ws * cm);
    let rm = 1.0 / trace.y[res.index].norm();
    Ok(MbvdParams {
        rm,
        lm,
        cm,
        c0,
        rs: 0.0,
        r0: 0.0,
    })
}

/// Fits the circuit to a trace by damped least squares on log parameters.
pub fn fit_mbvd(trace: &AdmittanceTrace, init: Option<MbvdParams>, opts: &MbvdFitOptions) -> Result<MbvdFit> {
    trace.validate()?;
    let initial = match init {
        Some(p) => {
            p.validate()?;
            p
        }
        None => initial_guess(trace)?,
    };
    let rs_floor = opts.rs_floor * initial.rm;
    let r0_floor = opts.rs_floor * initial.rm;
    // Log space cannot hold zero; start Rs a little above its floor.
    let rs_start = initial.rs.max(1e-2 * initial.rm);
    let mut x0 = vec![
        initial.rm.ln(),
        initial.lm.ln(),
        initial.cm.ln(),
        initial.c0.ln(),
        rs_start.ln(),
    ];
    if opts.fit_r0 {
        x0.push(initial.r0.max(1e-2 * initial.rm).ln());
    }
    let span = 1e6f64.ln();
    let mut lower: Vec<f64> = x0.iter().map(|v| v - span).collect();
    let upper: Vec<f64> = x0.iter().map(|v| v + span).collect();
    lower[4] = rs_floor.ln();
    if opts.fit_r0 {
        lower[5] = r0_floor.ln();
    }

    let scale = (trace.y.iter().map(|y| y.norm_sqr()).sum::<f64>() / trace.len() as f64).sqrt();
    let unpack = |x: &[f64]| MbvdParams {
        rm: x[0].exp(),
        lm: x[1].exp(),
        cm: x[2].exp(),
        c0: x[3].exp(),
        rs: x[4].exp(),
        r0: if opts.fit_r0 { x[5].exp() } else { initial.r0 },
    };
    let residuals = |x: &[f64]| {
        let p = unpack(x);
        let mut r = Vec::with_capacity(2 * trace.len());
        for (&f, &y) in trace.frequencies.iter().zip(&trace.y) {
            let d = (p.admittance(f) - y) / scale;
            r.push(d.re);
            r.push(d.im);
        }
        Some(r)
    };
    // RMS relative misfit of 1e-9 is already below any measurement.
    let floor = 2.0 * trace.len() as f64 * 1e-18;
    let lm_opts = LmOptions {
        cost_floor: opts.lm.cost_floor.max(floor),
        fd_step: opts.lm.fd_step.min(1e-8),
        ftol: opts.lm.ftol.max(1e-10),
        lower: Some(lower.clone()),
        upper: Some(upper),
        ..opts.lm.clone()
    };
    let rep = minimize(residuals, &x0, &lm_opts)?;
    if !rep.converged() {
        return Err(Error::Convergence(format!(
            "mBVD fit stopped after {} iterations",
            rep.iterations
        )));
    }
    let names = ["Rm", "Lm", "Cm", "C0", "Rs", "R0"];
    let pinned: Vec<&str> = rep
        .at_bounds(&lm_opts)
        .into_iter()
        .filter(|&i| !(i >= 4 && rep.params[i] <= lower[i]))
        .map(|i| names[i])
        .collect();
    if !pinned.is_empty() {
        return Err(Error::AtBound(format!("mBVD parameters {pinned:?}")));
    }
    let mut params = unpack(&rep.params);
    if rep.params[4] <= lower[4] {
        params.rs = 0.0;
    }
    if opts.fit_r0 && rep.params[5] <= lower[5] {
        params.r0 = 0.0;
    }
    let relative_misfit = (rep.cost / trace.len() as f64).sqrt();
    let mut warnings = Vec::new();
    if relative_misfit > opts.warn_misfit {
        warnings.push(format!(
            "poor fit quality: relative misfit {relative_misfit:.3e}"
        ));
    }
    Ok(MbvdFit {
        params,
        initial,
        relative_misfit,
        iterations: rep.iterations,
        cost_history: rep.history,
        warnings,
    })
}
