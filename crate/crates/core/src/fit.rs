//! Loss-model parameter estimation from a set of measured resonances
//! coupled through the η map.

use std::cmp::Ordering;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{device_to_coords, interp_eta, EtaMap, Extrapolation};
use crate::error::{Error, Result};
use crate::lm::{minimize, LmOptions, LmReport};
use crate::lossmodel::{q_m, LossModel, NiModel, QmetalModel, QpiezoModel};
use crate::measure::ResonanceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    /// Constant `Q_piezo`, metal `f·Q` product.
    #[default]
    ConstantQpiezo,
    /// Constant `Q_piezo` in series with a power-law `Q_ni`, metal `f·Q`.
    ConstantPlusQni,
}

impl ModelFamily {
    pub fn label(self) -> &'static str {
        match self {
            ModelFamily::ConstantQpiezo => "constant-qpiezo",
            ModelFamily::ConstantPlusQni => "constant-plus-qni",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    #[default]
    LeastSquares,
    /// Envelope reduction, then least squares on the survivors.
    Envelope,
}

impl Objective {
    pub fn label(self) -> &'static str {
        match self {
            Objective::LeastSquares => "least-squares",
            Objective::Envelope => "envelope",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualScale {
    Linear,
    #[default]
    Log,
}

/// One fit parameter. `initial = None` uses the data-driven default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    #[serde(default)]
    pub initial: Option<f64>,
    #[serde(default = "yes")]
    pub free: bool,
    pub lower: f64,
    pub upper: f64,
}

fn yes() -> bool {
    true
}

impl ParamSpec {
    pub fn free(lower: f64, upper: f64) -> Self {
        ParamSpec {
            initial: None,
            free: true,
            lower,
            upper,
        }
    }

    pub fn fixed(value: f64) -> Self {
        ParamSpec {
            initial: Some(value),
            free: false,
            lower: value,
            upper: value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    #[serde(default)]
    pub family: ModelFamily,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default = "default_bins")]
    pub envelope_bins: usize,
    #[serde(default)]
    pub residual_scale: ResidualScale,
    #[serde(default = "default_q_piezo")]
    pub q_piezo: ParamSpec,
    /// Metal `f·Q` product, Hz.
    #[serde(default = "default_fq")]
    pub fq: ParamSpec,
    #[serde(default = "default_q_ni")]
    pub q_ni: ParamSpec,
    #[serde(default = "default_exponent")]
    pub ni_exponent: ParamSpec,
    /// Reference frequency of the `Q_ni` power law, Hz; defaults to the
    /// median record frequency.
    #[serde(default)]
    pub ni_f_ref_hz: Option<f64>,
    /// Total starts including the data-driven guess, at most 8.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub clamp: bool,
}

fn default_bins() -> usize {
    8
}
fn default_q_piezo() -> ParamSpec {
    ParamSpec::free(1.0, 1e7)
}
fn default_fq() -> ParamSpec {
    ParamSpec::free(1e9, 1e16)
}
fn default_q_ni() -> ParamSpec {
    ParamSpec::free(1.0, 1e8)
}
fn default_exponent() -> ParamSpec {
    ParamSpec::free(-4.0, 4.0)
}
fn default_restarts() -> usize {
    8
}

pub const MAX_RESTARTS: usize = 8;

impl Default for FitSpec {
    fn default() -> Self {
        FitSpec {
            family: ModelFamily::default(),
            objective: Objective::default(),
            envelope_bins: default_bins(),
            residual_scale: ResidualScale::default(),
            q_piezo: default_q_piezo(),
            fq: default_fq(),
            q_ni: default_q_ni(),
            ni_exponent: default_exponent(),
            ni_f_ref_hz: None,
            restarts: default_restarts(),
            seed: 0,
            clamp: false,
        }
    }
}

const NAMES: [&str; 4] = ["q_piezo", "fq_hz", "q_ni_ref", "ni_exponent"];
/// Parameters optimized in log space; the exponent stays linear.
const LOG_PARAM: [bool; 4] = [true, true, true, false];

impl FitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in NAMES.iter().zip(self.params()) {
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower <= p.upper) {
                return Err(Error::Validation(format!("{name}: bounds must be finite and ordered")));
            }
            if p.free && p.lower == p.upper {
                return Err(Error::Validation(format!("{name}: free parameter with empty range")));
            }
            if let Some(v) = p.initial {
                if !(v.is_finite() && p.lower <= v && v <= p.upper) {
                    return Err(Error::Validation(format!("{name}: initial value outside bounds")));
                }
            }
        }
        for (name, p) in NAMES.iter().zip(self.params()).take(3) {
            if p.lower <= 0.0 {
                return Err(Error::Validation(format!("{name}: lower bound must be positive")));
            }
        }
        if self.objective == Objective::Envelope && self.envelope_bins < 2 {
            return Err(Error::Validation("envelope needs at least 2 bins".into()));
        }
        if self.restarts == 0 || self.restarts > MAX_RESTARTS {
            return Err(Error::Validation(format!("restarts must be in 1..={MAX_RESTARTS}")));
        }
        if let Some(f) = self.ni_f_ref_hz {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::Validation("ni_f_ref_hz must be positive".into()));
            }
        }
        Ok(())
    }

    fn params(&self) -> [ParamSpec; 4] {
        [self.q_piezo, self.fq, self.q_ni, self.ni_exponent]
    }

    fn n_used(&self) -> usize {
        match self.family {
            ModelFamily::ConstantQpiezo => 2,
            ModelFamily::ConstantPlusQni => 4,
        }
    }

    fn policy(&self) -> Extrapolation {
        if self.clamp {
            Extrapolation::Clamp
        } else {
            Extrapolation::Error
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedParams {
    pub q_piezo: f64,
    /// Hz
    pub fq: f64,
    /// `(Q_ref, f_ref Hz, exponent)` for the `Q_ni` family.
    pub ni: Option<(f64, f64, f64)>,
}

impl FittedParams {
    pub fn model(&self) -> LossModel {
        let qpiezo = match self.ni {
            None => QpiezoModel::Constant { q0: self.q_piezo },
            Some((q_ref, f_ref_hz, exponent)) => QpiezoModel::ConstantWithNi {
                q0: self.q_piezo,
                ni: NiModel::PowerLaw {
                    q_ref,
                    f_ref_hz,
                    exponent,
                },
            },
        };
        LossModel::new(qpiezo, QmetalModel::ConstantFq { fq_hz: self.fq })
    }

    fn values(&self) -> Vec<f64> {
        let mut v = vec![self.q_piezo, self.fq];
        if let Some((q, _, e)) = self.ni {
            v.extend([q, e]);
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub family: ModelFamily,
    pub objective: Objective,
    pub residual_scale: ResidualScale,
    pub params: FittedParams,
    /// One-sigma uncertainties in the order `q_piezo, fq, q_ni_ref,
    /// ni_exponent`; `None` for fixed parameters.
    pub uncertainties: Vec<Option<f64>>,
    /// `√Σr²`
    pub residual_norm: f64,
    pub initial_residual_norm: f64,
    /// Device ids of the fitted records, in input order.
    pub fitted_ids: Vec<String>,
    /// Residuals of the fitted records, in input order.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub restarts: usize,
    pub best_restart: usize,
    pub at_bounds: Vec<String>,
}

impl FitResult {
    pub fn model(&self) -> LossModel {
        self.params.model()
    }
}

fn canonical_cmp(a: &ResonanceRecord, b: &ResonanceRecord) -> Ordering {
    a.f_s
        .total_cmp(&b.f_s)
        .then_with(|| a.device_id.cmp(&b.device_id))
        .then_with(|| a.q_m.total_cmp(&b.q_m))
        .then_with(|| a.geometry.wavelength.total_cmp(&b.geometry.wavelength))
        .then_with(|| a.geometry.film_thickness.total_cmp(&b.geometry.film_thickness))
        .then_with(|| a.geometry.metal_thickness.total_cmp(&b.geometry.metal_thickness))
}

/// Keeps the highest-`Q_m` record in each of `nbins` bins uniform in
/// log-frequency. Output is in bin order.
pub fn envelope(records: &[ResonanceRecord], nbins: usize) -> Result<Vec<ResonanceRecord>> {
    if records.is_empty() {
        return Err(Error::Invalid("envelope of an empty record list".into()));
    }
    if nbins < 2 {
        return Err(Error::Invalid("envelope needs at least 2 bins".into()));
    }
    let mut sorted: Vec<&ResonanceRecord> = records.iter().collect();
    sorted.sort_by(|a, b| canonical_cmp(a, b));
    let lo = sorted.iter().map(|r| r.f_s.ln()).fold(f64::INFINITY, f64::min);
    let hi = sorted.iter().map(|r| r.f_s.ln()).fold(f64::NEG_INFINITY, f64::max);
    let mut best: Vec<Option<&ResonanceRecord>> = vec![None; nbins];
    for r in sorted {
        let bin = if hi > lo {
            (((r.f_s.ln() - lo) / (hi - lo) * nbins as f64) as usize).min(nbins - 1)
        } else {
            0
        };
        if best[bin].is_none_or(|b| r.q_m > b.q_m) {
            best[bin] = Some(r);
        }
    }
    Ok(best.into_iter().flatten().cloned().collect())
}

struct Problem {
    f: Vec<f64>,
    eta: Vec<f64>,
    q_meas: Vec<f64>,
    family: ModelFamily,
    scale: ResidualScale,
    f_ref: f64,
    /// Full parameter vector with fixed entries filled in.
    base: [f64; 4],
    free: Vec<usize>,
}

impl Problem {
    fn full(&self, x: &[f64]) -> [f64; 4] {
        let mut p = self.base;
        for (&i, &v) in self.free.iter().zip(x) {
            p[i] = if LOG_PARAM[i] { v.exp() } else { v };
        }
        p
    }

    fn fitted(&self, p: [f64; 4]) -> FittedParams {
        FittedParams {
            q_piezo: p[0],
            fq: p[1],
            ni: (self.family == ModelFamily::ConstantPlusQni).then_some((p[2], self.f_ref, p[3])),
        }
    }

    fn predict(&self, p: [f64; 4], k: usize) -> Option<f64> {
        let f = self.f[k];
        let mut qp = p[0];
        if self.family == ModelFamily::ConstantPlusQni {
            let qni = p[2] * (self.f_ref / f).powf(p[3]);
            qp = 1.0 / (1.0 / qp + 1.0 / qni);
        }
        q_m(self.eta[k], qp, p[1] / f).ok()
    }

    fn residuals(&self, x: &[f64]) -> Option<Vec<f64>> {
        let p = self.full(x);
        (0..self.f.len())
            .map(|k| {
                let pred = self.predict(p, k)?;
                Some(match self.scale {
                    ResidualScale::Log => (self.q_meas[k] / pred).ln(),
                    ResidualScale::Linear => self.q_meas[k] - pred,
                })
            })
            .collect()
    }

    fn to_x(&self, p: [f64; 4]) -> Vec<f64> {
        self.free
            .iter()
            .map(|&i| if LOG_PARAM[i] { p[i].ln() } else { p[i] })
            .collect()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fits the loss model to measured `Q_m`.
pub fn fit_losses(records: &[ResonanceRecord], map: &EtaMap, spec: &FitSpec) -> Result<FitResult> {
    spec.validate()?;
    map.validate()?;
    if records.is_empty() {
        return Err(Error::Invalid("no records to fit".into()));
    }
    let mut used: Vec<ResonanceRecord> = match spec.objective {
        Objective::LeastSquares => records.to_vec(),
        Objective::Envelope => envelope(records, spec.envelope_bins)?,
    };
    for r in &used {
        r.validate()?;
    }
    used.sort_by(canonical_cmp);

    let specs = spec.params();
    let free: Vec<usize> = (0..spec.n_used()).filter(|&i| specs[i].free).collect();
    if free.is_empty() {
        return Err(Error::Invalid("no free parameters".into()));
    }
    if used.len() < free.len() {
        return Err(Error::Underdetermined(format!(
            "{} records for {} free parameters",
            used.len(),
            free.len()
        )));
    }

    let policy = spec.policy();
    let eta = used
        .iter()
        .map(|r| {
            let c = device_to_coords(&r.geometry);
            interp_eta(map, c.h_over_lambda, c.tm_over_h, policy)
                .map_err(|e| Error::OutOfDomain(format!("record '{}': {e}", r.device_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let f: Vec<f64> = used.iter().map(|r| r.f_s).collect();
    let q_meas: Vec<f64> = used.iter().map(|r| r.q_m).collect();

    let q_max = q_meas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let defaults = [
        q_max,
        median(used.iter().map(|r| r.q_m * r.f_s).collect()),
        q_max,
        1.0,
    ];
    let mut base = [0.0; 4];
    for i in 0..4 {
        let s = specs[i];
        base[i] = s.initial.unwrap_or(defaults[i]).clamp(s.lower, s.upper);
    }
    let prob = Problem {
        f: f.clone(),
        eta,
        q_meas,
        family: spec.family,
        scale: spec.residual_scale,
        f_ref: spec.ni_f_ref_hz.unwrap_or_else(|| median(f)),
        base,
        free,
    };

    let to_t = |i: usize, v: f64| if LOG_PARAM[i] { v.ln() } else { v };
    let lower: Vec<f64> = prob.free.iter().map(|&i| to_t(i, specs[i].lower)).collect();
    let upper: Vec<f64> = prob.free.iter().map(|&i| to_t(i, specs[i].upper)).collect();
    let x_init = prob.to_x(base);

    let r0 = prob
        .residuals(&x_init)
        .ok_or_else(|| Error::Invalid("model undefined at the initial guess".into()))?;
    check_identifiable(&prob, &x_init, r0.len())?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut starts = vec![x_init.clone()];
    for _ in 1..spec.restarts {
        let x: Vec<f64> = prob
            .free
            .iter()
            .zip(&x_init)
            .enumerate()
            .map(|(k, (&i, &v))| {
                let spread = if LOG_PARAM[i] { std::f64::consts::LN_10 } else { 1.0 };
                (v + spread * rng.random_range(-1.0..=1.0)).clamp(lower[k], upper[k])
            })
            .collect();
        starts.push(x);
    }
    let opts = LmOptions {
        lower: Some(lower),
        upper: Some(upper),
        ..LmOptions::default()
    };
    let runs: Vec<Result<LmReport>> = starts
        .par_iter()
        .map(|x0| minimize(|x| prob.residuals(x), x0, &opts))
        .collect();

    let mut best: Option<(usize, LmReport)> = None;
    let mut first_err = None;
    for (k, run) in runs.into_iter().enumerate() {
        match run {
            Ok(rep) if rep.converged() => {
                if best.as_ref().is_none_or(|(_, b)| rep.cost < b.cost) {
                    best = Some((k, rep));
                }
            }
            Ok(rep) => {
                first_err.get_or_insert(Error::Convergence(format!(
                    "start {k} stopped after {} iterations",
                    rep.iterations
                )));
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let Some((best_restart, rep)) = best else {
        return Err(first_err.unwrap_or_else(|| Error::Convergence("no start converged".into())));
    };

    let p = prob.full(&rep.params);
    let se = rep
        .standard_errors()
        .ok_or_else(|| Error::Singular("normal matrix at the solution".into()))?;
    let mut uncertainties = vec![None; 4];
    for (k, &i) in prob.free.iter().enumerate() {
        uncertainties[i] = Some(if LOG_PARAM[i] { p[i] * se[k] } else { se[k] });
    }
    uncertainties.truncate(spec.n_used());
    let at_bounds = rep
        .at_bounds(&opts)
        .into_iter()
        .map(|k| NAMES[prob.free[k]].to_string())
        .collect();

    // Back to input order.
    let mut order: Vec<usize> = (0..used.len()).collect();
    let input: Vec<&ResonanceRecord> = match spec.objective {
        Objective::LeastSquares => records.iter().collect(),
        Objective::Envelope => records.iter().filter(|r| used.contains(r)).collect(),
    };
    let mut taken = vec![false; used.len()];
    for (slot, r) in order.iter_mut().zip(&input) {
        let k = (0..used.len())
            .find(|&k| !taken[k] && &used[k] == *r)
            .expect("fitted record comes from the input");
        taken[k] = true;
        *slot = k;
    }
    Ok(FitResult {
        family: spec.family,
        objective: spec.objective,
        residual_scale: spec.residual_scale,
        params: prob.fitted(p),
        uncertainties,
        residual_norm: rep.cost.sqrt(),
        initial_residual_norm: r0.iter().map(|v| v * v).sum::<f64>().sqrt(),
        fitted_ids: order.iter().map(|&k| used[k].device_id.clone()).collect(),
        residuals: order.iter().map(|&k| rep.residuals[k]).collect(),
        iterations: rep.iterations,
        restarts: starts.len(),
        best_restart,
        at_bounds,
    })
}

fn check_identifiable(prob: &Problem, x: &[f64], m: usize) -> Result<()> {
    let mut f = |x: &[f64]| prob.residuals(x);
    let jac: DMatrix<f64> = crate::lm::jacobian(&mut f, x, m, 1e-6)
        .ok_or_else(|| Error::Invalid("model undefined near the initial guess".into()))?;
    let sv = jac.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min <= 1e-8 * max {
        return Err(Error::Underdetermined(
            "free parameters are not identifiable from these records (e.g. one frequency and one geometry)"
                .into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    pub device_id: String,
    pub f_s: f64,
    pub measured: f64,
    pub predicted: Option<f64>,
    pub residual: Option<f64>,
    pub eta: Option<f64>,
    /// `outside` when the record lies outside the map.
    pub flag: &'static str,
}

/// Per-record comparison of measurement and fitted model.
pub fn residual_report(
    result: &FitResult,
    records: &[ResonanceRecord],
    map: &EtaMap,
    policy: Extrapolation,
) -> Vec<ResidualRow> {
    let model = result.model();
    let h_rng = (map.h_over_lambda[0], *map.h_over_lambda.last().unwrap_or(&f64::NAN));
    let t_rng = (map.tm_over_h[0], *map.tm_over_h.last().unwrap_or(&f64::NAN));
    records
        .iter()
        .map(|r| {
            let c = device_to_coords(&r.geometry);
            let inside = (h_rng.0..=h_rng.1).contains(&c.h_over_lambda)
                && (t_rng.0..=t_rng.1).contains(&c.tm_over_h);
            let eta = interp_eta(map, c.h_over_lambda, c.tm_over_h, policy).ok();
            let predicted = eta.and_then(|e| {
                let qp = model.q_piezo(r.f_s, Some(c.tm_over_lambda)).ok()?;
                let qm = model.q_metal(r.f_s).ok()?;
                q_m(e, qp, qm).ok()
            });
            let residual = predicted.map(|p| match result.residual_scale {
                ResidualScale::Log => (r.q_m / p).ln(),
                ResidualScale::Linear => r.q_m - p,
            });
            ResidualRow {
                device_id: r.device_id.clone(),
                f_s: r.f_s,
                measured: r.q_m,
                predicted,
                residual,
                eta,
                flag: if inside { "" } else { "outside" },
            }
        })
        .collect()
}

pub const RESIDUAL_CSV_HEADER: &str = "device_id,f_s_Hz,Q_m_measured,Q_m_predicted,residual,eta,flag";

pub fn residual_report_to_csv(rows: &[ResidualRow]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let mut out = format!("{RESIDUAL_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.device_id,
            r.f_s,
            r.measured,
            opt(r.predicted),
            opt(r.residual),
            opt(r.eta),
            r.flag
        );
    }
    out
}

/// Human-readable summary of a fit.
pub fn fit_summary(result: &FitResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "model family: {}", result.family.label());
    let _ = writeln!(s, "objective: {}", result.objective.label());
    let _ = writeln!(
        s,
        "residual scale: {}",
        match result.residual_scale {
            ResidualScale::Log => "log",
            ResidualScale::Linear => "linear",
        }
    );
    let _ = writeln!(s, "records fitted: {}", result.residuals.len());
    let unc = |i: usize| {
        result
            .uncertainties
            .get(i)
            .copied()
            .flatten()
            .map_or("fixed".to_string(), |u| format!("+/- {u:.6e}"))
    };
    let p = &result.params;
    let _ = writeln!(s, "q_piezo = {:.6e} ({})", p.q_piezo, unc(0));
    let _ = writeln!(s, "fq_hz = {:.6e} ({})", p.fq, unc(1));
    if let Some((q, f_ref, e)) = p.ni {
        let _ = writeln!(s, "q_ni_ref = {q:.6e} ({}) at f_ref_hz = {f_ref:.6e}", unc(2));
        let _ = writeln!(s, "ni_exponent = {e:.6} ({})", unc(3));
    }
    let _ = writeln!(
        s,
        "residual norm: {:.6e} (initial {:.6e})",
        result.residual_norm, result.initial_residual_norm
    );
    let _ = writeln!(
        s,
        "iterations: {} (best of {} starts: #{})",
        result.iterations, result.restarts, result.best_restart
    );
    if !result.at_bounds.is_empty() {
        let _ = writeln!(s, "at bounds: {}", result.at_bounds.join(", "));
    }
    s
}

/// Settings for [`synthetic_records`].
#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub n: usize,
    /// Hz; records are log-spaced over `[f_min, f_max]`.
    pub f_min: f64,
    pub f_max: f64,
    /// Phase velocity used to turn frequency into wavelength, m/s.
    pub velocity: f64,
    /// Standard deviation of the multiplicative log-normal noise on Q.
    pub noise: f64,
    pub seed: u64,
}

/// Records drawn from `model` through `map` at random normalized
/// geometries inside the map.
pub fn synthetic_records(map: &EtaMap, model: &LossModel, set: &SyntheticSet) -> Result<Vec<ResonanceRecord>> {
    use crate::dispersion::DeviceGeometry;
    use crate::measure::Deembedding;
    use rand_distr::{Distribution, Normal};

    map.validate()?;
    if set.n == 0 || !(set.f_min > 0.0 && set.f_max >= set.f_min && set.velocity > 0.0) {
        return Err(Error::Invalid("bad synthetic record settings".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(set.seed);
    let noise = Normal::new(0.0, set.noise).map_err(|e| Error::Invalid(e.to_string()))?;
    let (h0, h1) = (map.h_over_lambda[0], map.h_over_lambda[map.h_over_lambda.len() - 1]);
    let (t0, t1) = (map.tm_over_h[0], map.tm_over_h[map.tm_over_h.len() - 1]);
    let mut out = Vec::with_capacity(set.n);
    for k in 0..set.n {
        let s = if set.n == 1 { 0.0 } else { k as f64 / (set.n - 1) as f64 };
        let f = set.f_min * (set.f_max / set.f_min).powf(s);
        let hl = rng.random_range(h0..=h1);
        let tmh = rng.random_range(t0..=t1);
        let wavelength = set.velocity / f;
        let geometry = DeviceGeometry {
            wavelength,
            film_thickness: hl * wavelength,
            metal_thickness: tmh * hl * wavelength,
            resonance_frequency: Some(f),
        };
        let c = device_to_coords(&geometry);
        let eta = interp_eta(map, c.h_over_lambda, c.tm_over_h, Extrapolation::Clamp)?;
        let q = q_m(eta, model.q_piezo(f, Some(c.tm_over_lambda))?, model.q_metal(f)?)?;
        let q = q * noise.sample(&mut rng).exp();
        out.push(ResonanceRecord {
            device_id: format!("syn{k:03}"),
            f_s: f,
            q_3db: q,
            q_m: q,
            rs: None,
            rm: None,
            geometry,
            deembedding: Deembedding::Skipped,
        });
    }
    Ok(out)
}

impl FitResult {
    /// Parameter values in the order used for uncertainties.
    pub fn values(&self) -> Vec<f64> {
        self.params.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::DeviceGeometry;
    use crate::measure::Deembedding;

    fn rec(id: &str, f: f64, q: f64) -> ResonanceRecord {
        ResonanceRecord {
            device_id: id.into(),
            f_s: f,
            q_3db: q,
            q_m: q,
            rs: None,
            rm: None,
            geometry: DeviceGeometry {
                wavelength: 10e-6,
                film_thickness: 1e-6,
                metal_thickness: 1e-7,
                resonance_frequency: Some(f),
            },
            deembedding: Deembedding::Skipped,
        }
    }

    #[test]
    fn envelope_examples() {
        let one = envelope(&[rec("a", 1e9, 500.0), rec("b", 1e9, 800.0)], 4).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].q_m, 800.0);
        let rising: Vec<_> = (0..5).map(|i| rec("r", 1e9 * 2f64.powi(i), 100.0 * (i + 1) as f64)).collect();
        assert_eq!(envelope(&rising, 5).unwrap().len(), 5);
        assert!(envelope(&[], 4).is_err());
        assert!(envelope(&rising, 1).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = FitSpec::default();
        assert!(s.validate().is_ok());
        s.q_piezo.lower = 10.0;
        s.q_piezo.upper = 5.0;
        assert!(s.validate().is_err());
        let s = FitSpec {
            restarts: 9,
            ..Default::default()
        };
        assert!(s.validate().is_err());
        let s = FitSpec {
            objective: Objective::Envelope,
            envelope_bins: 1,
            ..Default::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn eta_one_gives_mean() {
        let map = EtaMap::uniform(vec![0.05, 0.2], vec![0.0, 0.5], 1.0).unwrap();
        let qs = [800.0, 1000.0, 1250.0, 900.0];
        let recs: Vec<_> = qs
            .iter()
            .enumerate()
            .map(|(i, &q)| rec(&format!("d{i}"), 1e9 * (1.0 + i as f64), q))
            .collect();
        let mut spec = FitSpec {
            fq: ParamSpec::fixed(1e12),
            ..Default::default()
        };
        let r = fit_losses(&recs, &map, &spec).unwrap();
        let geo = qs.iter().map(|q| q.ln()).sum::<f64>() / qs.len() as f64;
        assert!((r.params.q_piezo / geo.exp() - 1.0).abs() < 1e-6);
        spec.residual_scale = ResidualScale::Linear;
        let r = fit_losses(&recs, &map, &spec).unwrap();
        let mean = qs.iter().sum::<f64>() / qs.len() as f64;
        assert!((r.params.q_piezo / mean - 1.0).abs() < 1e-6);
    }

    #[test]
    fn one_frequency_is_underdetermined() {
        let map = EtaMap::uniform(vec![0.05, 0.2], vec![0.0, 0.5], 0.8).unwrap();
        let recs: Vec<_> = (0..5).map(|i| rec(&format!("d{i}"), 1e9, 900.0 + i as f64)).collect();
        let err = fit_losses(&recs, &map, &FitSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Underdetermined(_)), "{err}");
        let err = fit_losses(&recs[..1], &map, &FitSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Underdetermined(_)), "{err}");
    }

    #[test]
    fn report_flags_outside_records() {
        let map = EtaMap::uniform(vec![0.05, 0.08], vec![0.0, 0.5], 0.9).unwrap();
        let recs = vec![rec("a", 1e9, 900.0)];
        let result = FitResult {
            family: ModelFamily::ConstantQpiezo,
            objective: Objective::LeastSquares,
            residual_scale: ResidualScale::Log,
            params: FittedParams {
                q_piezo: 2000.0,
                fq: 1e12,
                ni: None,
            },
            uncertainties: vec![],
            residual_norm: 0.0,
            initial_residual_norm: 0.0,
            fitted_ids: vec![],
            residuals: vec![],
            iterations: 0,
            restarts: 1,
            best_restart: 0,
            at_bounds: vec![],
        };
        let rows = residual_report(&result, &recs, &map, Extrapolation::Clamp);
        assert_eq!(rows[0].flag, "outside");
        assert!(rows[0].predicted.is_some());
        let rows = residual_report(&result, &recs, &map, Extrapolation::Error);
        assert!(rows[0].predicted.is_none());
        assert!(residual_report(&result, &[], &map, Extrapolation::Error).is_empty());
    }
}
