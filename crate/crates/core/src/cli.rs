//! Batch commands behind the `piezoq` binary.
//!
//! A run is driven by one TOML file with a section per command; command-line
//! flags override individual keys. Relative paths inside the file resolve
//! against the file's directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dispersion::{
    default_h_over_lambda_grid, default_tm_over_h_grid, eta_map_to_csv, import_eta_map, sweep_eta,
    EtaMap, Extrapolation, SweepSettings,
};
use crate::error::{Error, Result};
use crate::fem::{Component, LateralBc, UnitCellSpec};
use crate::fit::{
    fit_losses, fit_summary, residual_report, residual_report_to_csv, FitResult, FitSpec, ModelFamily,
};
use crate::lossmodel::{load_loss_model, q_m, LossModel};
use crate::materials::{cut_to_euler, load_material, rotate_material, EulerAngles};
use crate::measure::{deembed_q, fit_mbvd, load_measured_set, load_trace, q_3db, MbvdFitOptions};
use crate::plot::{Chart, Style};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub general: GeneralConfig,
    pub eta_map: Option<EtaMapConfig>,
    pub predict_q: Option<PredictConfig>,
    pub extract_q: Option<ExtractConfig>,
    pub fit: Option<FitConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralConfig {
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub clamp: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaMapConfig {
    pub piezo: PathBuf,
    pub metal: PathBuf,
    /// Cut label such as `X-cut YZ30`.
    pub piezo_cut: Option<String>,
    /// Intrinsic Z–X–Z Euler angles in degrees.
    pub piezo_euler_deg: Option<[f64; 3]>,
    /// h, m; λ and t_m follow from the grid coordinates.
    pub film_thickness_m: f64,
    #[serde(default = "half")]
    pub coverage: f64,
    #[serde(default = "nx")]
    pub mesh_nx: usize,
    #[serde(default = "nz_film")]
    pub mesh_nz_film: usize,
    #[serde(default = "nz_metal")]
    pub mesh_nz_metal: usize,
    pub h_over_lambda: Option<Vec<f64>>,
    pub tm_over_h: Option<Vec<f64>>,
    #[serde(default = "n_modes")]
    pub n_modes: usize,
    /// `x`, `y` (or `sh`), `z`.
    pub polarization: Option<String>,
    pub velocity_window_m_s: Option<[f64; 2]>,
    #[serde(default = "eta_out")]
    pub output: String,
}

fn half() -> f64 {
    0.5
}
fn nx() -> usize {
    16
}
fn nz_film() -> usize {
    4
}
fn nz_metal() -> usize {
    2
}
fn n_modes() -> usize {
    12
}
fn eta_out() -> String {
    "eta_map".into()
}
fn predict_out() -> String {
    "predict_q".into()
}
fn extract_out() -> String {
    "extracted".into()
}
fn fit_out() -> String {
    "fit".into()
}
fn one_ghz() -> f64 {
    1e9
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlotAxis {
    #[default]
    HOverLambda,
    TmOverLambda,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    pub eta_map: PathBuf,
    /// Loss-model TOML file; alternative to an inline `model` table.
    pub loss_model: Option<PathBuf>,
    pub model: Option<LossModel>,
    /// Frequency at which frequency-dependent Q terms are evaluated, Hz.
    #[serde(default = "one_ghz")]
    pub frequency_hz: f64,
    #[serde(default)]
    pub axis: PlotAxis,
    #[serde(default = "predict_out")]
    pub output: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractConfig {
    /// `.s1p` / `.csv` traces or directories holding them.
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    #[serde(default = "yes")]
    pub fit_mbvd: bool,
    #[serde(default = "extract_out")]
    pub output: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub records: PathBuf,
    pub eta_map: PathBuf,
    #[serde(default)]
    pub spec: FitSpec,
    #[serde(default = "fit_out")]
    pub output: String,
}

/// Command-line overrides shared by all commands.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub clamp: bool,
}

/// Fully resolved run settings.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: Config,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    pub seed: u64,
    pub clamp: bool,
}

impl Run {
    pub fn new(config: Config, ov: &Overrides) -> Self {
        let g = &config.general;
        Run {
            output_dir: ov
                .output_dir
                .clone()
                .or_else(|| g.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from(".")),
            threads: ov.threads.or(g.threads),
            seed: ov.seed.or(g.seed).unwrap_or(0),
            clamp: ov.clamp || g.clamp.unwrap_or(false),
            config,
        }
    }

    pub fn policy(&self) -> Extrapolation {
        if self.clamp {
            Extrapolation::Clamp
        } else {
            Extrapolation::Error
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    fn prepare_output(&self) -> Result<()> {
        std::fs::create_dir_all(&self.output_dir).map_err(|e| Error::io(&self.output_dir, e))
    }

    /// Runs `f` on a pool with the configured thread count.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        match self.threads {
            None => f(),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?
                .install(f),
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn require_file(p: &Path, what: &str) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{what} not found: {}", p.display())))
    }
}

/// Parses config text. Relative paths are made absolute against `base`.
pub fn parse_config(text: &str, origin: &str, base: &Path) -> Result<Config> {
    let mut c: Config = toml::from_str(text).map_err(|e| Error::parse(origin, 0, e.to_string()))?;
    if let Some(d) = &mut c.general.output_dir {
        *d = resolve(base, d);
    }
    if let Some(e) = &mut c.eta_map {
        e.piezo = resolve(base, &e.piezo);
        e.metal = resolve(base, &e.metal);
    }
    if let Some(p) = &mut c.predict_q {
        p.eta_map = resolve(base, &p.eta_map);
        if let Some(l) = &mut p.loss_model {
            *l = resolve(base, l);
        }
    }
    if let Some(x) = &mut c.extract_q {
        for i in &mut x.inputs {
            *i = resolve(base, i);
        }
    }
    if let Some(f) = &mut c.fit {
        f.records = resolve(base, &f.records);
        f.eta_map = resolve(base, &f.eta_map);
    }
    Ok(c)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Config> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, &path.display().to_string(), base)
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
    s.as_ref()
        .ok_or_else(|| Error::Validation(format!("config has no [{name}] section")))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub messages: Vec<String>,
}

impl Report {
    fn file(&mut self, p: PathBuf) {
        self.files.push(p);
    }
}

/// Builds the unit-cell base specification of an `[eta_map]` section.
pub fn unit_cell_from_config(c: &EtaMapConfig) -> Result<UnitCellSpec> {
    require_file(&c.piezo, "piezoelectric material file")?;
    require_file(&c.metal, "metal material file")?;
    let mut piezo = load_material(&c.piezo)?;
    let metal = load_material(&c.metal)?;
    let angles = match (&c.piezo_cut, c.piezo_euler_deg) {
        (Some(_), Some(_)) => {
            return Err(Error::Validation("give piezo_cut or piezo_euler_deg, not both".into()))
        }
        (Some(label), None) => Some(cut_to_euler(label)?),
        (None, Some([a, b, g])) => Some(EulerAngles::from_degrees(a, b, g)),
        (None, None) => None,
    };
    if let Some(a) = angles {
        piezo = rotate_material(&piezo, &a)?;
    }
    let spec = UnitCellSpec {
        wavelength: c.film_thickness_m / 0.1,
        film_thickness: c.film_thickness_m,
        metal_thickness: 0.0,
        coverage: c.coverage,
        piezo,
        metal,
        mesh_nx: c.mesh_nx,
        mesh_nz_film: c.mesh_nz_film,
        mesh_nz_metal: c.mesh_nz_metal,
        lateral_bc: LateralBc::Antiperiodic,
    };
    spec.validate()?;
    Ok(spec)
}

fn sweep_settings(c: &EtaMapConfig) -> Result<SweepSettings> {
    let component = c
        .polarization
        .as_deref()
        .map(str::parse::<Component>)
        .transpose()?;
    Ok(SweepSettings {
        n_modes: c.n_modes,
        component,
        velocity_window: c.velocity_window_m_s.map(|[a, b]| (a, b)),
    })
}

/// Map CSV text and the plot for an `[eta_map]` section.
pub fn eta_map_outputs(c: &EtaMapConfig) -> Result<(EtaMap, String, Chart, Vec<String>)> {
    let base = unit_cell_from_config(c)?;
    let hl = c.h_over_lambda.clone().unwrap_or_else(default_h_over_lambda_grid);
    let tmh = c.tm_over_h.clone().unwrap_or_else(default_tm_over_h_grid);
    let out = sweep_eta(&base, &hl, &tmh, &sweep_settings(c)?)?;
    let messages = out
        .failures
        .iter()
        .map(|f| format!("gap at h/λ = {}, t_m/h = {}: {}", f.h_over_lambda, f.tm_over_h, f.message))
        .collect();
    let csv = eta_map_to_csv(&out.map);
    let mut chart = Chart::new("Piezoelectric energy confinement", "h/λ (1)", "η (1)");
    for (j, t) in out.map.tm_over_h.iter().enumerate() {
        let pts = (0..out.map.h_over_lambda.len())
            .filter_map(|i| out.map.get(i, j).map(|v| (out.map.h_over_lambda[i], v)))
            .collect();
        chart.add(&format!("t_m/h = {t}"), pts, Style::Line);
    }
    Ok((out.map, csv, chart, messages))
}

pub fn cmd_eta_map(run: &Run) -> Result<Report> {
    let c = section(&run.config.eta_map, "eta_map")?;
    let (_, csv, chart, messages) = run.install(|| eta_map_outputs(c))?;
    run.prepare_output()?;
    let mut rep = Report {
        messages,
        ..Default::default()
    };
    let csv_path = run.out(&format!("{}.csv", c.output));
    write(&csv_path, &csv)?;
    rep.file(csv_path);
    let svg = run.out(&format!("{}.svg", c.output));
    chart.write(&svg)?;
    rep.file(svg);
    Ok(rep)
}

pub const PREDICT_CSV_HEADER: &str = "h_over_lambda,tm_over_h,tm_over_lambda,eta,Q_piezo,Q_metal,Q_m";

/// Predicted `Q_m` over every map node.
pub fn predict_table(map: &EtaMap, model: &LossModel, f: f64) -> Result<(String, Vec<Vec<(f64, f64, f64)>>)> {
    map.validate()?;
    if map.is_empty() || map.values.iter().all(Option::is_none) {
        return Err(Error::Validation("η map has no values".into()));
    }
    model.validate()?;
    let mut csv = format!("{PREDICT_CSV_HEADER}\n");
    let mut curves = vec![Vec::new(); map.tm_over_h.len()];
    for (i, &hl) in map.h_over_lambda.iter().enumerate() {
        for (j, &tmh) in map.tm_over_h.iter().enumerate() {
            let tml = tmh * hl;
            match map.get(i, j) {
                Some(eta) => {
                    let qp = model.q_piezo(f, Some(tml))?;
                    let qm = model.q_metal(f)?;
                    let q = q_m(eta, qp, qm)?;
                    let _ = writeln!(csv, "{hl},{tmh},{tml},{eta},{qp},{qm},{q}");
                    curves[j].push((hl, tml, q));
                }
                None => {
                    let _ = writeln!(csv, "{hl},{tmh},{tml},,,,");
                }
            }
        }
    }
    Ok((csv, curves))
}

pub fn cmd_predict_q(run: &Run) -> Result<Report> {
    let c = section(&run.config.predict_q, "predict_q")?;
    require_file(&c.eta_map, "η map")?;
    let model = match (&c.loss_model, &c.model) {
        (Some(p), None) => load_loss_model(p)?,
        (None, Some(m)) => m.clone(),
        _ => {
            return Err(Error::Validation(
                "[predict_q] needs exactly one of loss_model or model".into(),
            ))
        }
    };
    if !(c.frequency_hz.is_finite() && c.frequency_hz > 0.0) {
        return Err(Error::Validation("frequency_hz must be positive".into()));
    }
    let map = import_eta_map(&c.eta_map)?;
    let (csv, curves) = predict_table(&map, &model, c.frequency_hz)?;
    let (x_label, pick): (&str, fn(&(f64, f64, f64)) -> f64) = match c.axis {
        PlotAxis::HOverLambda => ("h/λ (1)", |p| p.0),
        PlotAxis::TmOverLambda => ("t_m/λ (1)", |p| p.1),
    };
    let mut chart = Chart::new("Mechanical quality factor at resonance", x_label, "Q_m (1)");
    chart.y_log = true;
    for (t, pts) in map.tm_over_h.iter().zip(&curves) {
        chart.add(
            &format!("t_m/h = {t}"),
            pts.iter().map(|p| (pick(p), p.2)).collect(),
            Style::Line,
        );
    }
    run.prepare_output()?;
    let mut rep = Report::default();
    let p = run.out(&format!("{}.csv", c.output));
    write(&p, &csv)?;
    rep.file(p);
    let p = run.out(&format!("{}.svg", c.output));
    chart.write(&p)?;
    rep.file(p);
    Ok(rep)
}

pub const EXTRACT_CSV_HEADER: &str =
    "file,status,f_s_Hz,Q_3dB,Rm_ohm,Lm_H,Cm_F,C0_F,Rs_ohm,Q_loaded,Q_m,kt2,message";

fn collect_inputs(inputs: &[PathBuf]) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map(|rd| {
                    rd.filter_map(|e| e.ok().map(|e| e.path()))
                        .filter(|f| {
                            f.extension()
                                .and_then(|e| e.to_str())
                                .is_some_and(|e| e.eq_ignore_ascii_case("s1p") || e.eq_ignore_ascii_case("csv"))
                        })
                        .collect()
                })
                .unwrap_or_default();
            if found.is_empty() {
                files.push(p.clone());
            }
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    files
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn extract_row(path: &Path, fit: bool) -> (bool, String) {
    let name = csv_field(&path.display().to_string());
    let fail = |stage: &str, e: Error| (false, format!("{name},error,,,,,,,,,,,{}", csv_field(&format!("{stage}: {e}"))));
    let trace = match load_trace(path) {
        Ok((t, _)) => t,
        Err(e) => return fail("read", e),
    };
    let hp = match q_3db(&trace) {
        Ok(h) => h,
        Err(e) => return fail("q_3db", e),
    };
    if !fit {
        return (true, format!("{name},ok,{},{},,,,,,,{},,", hp.f_s, hp.q, hp.q));
    }
    match fit_mbvd(&trace, None, &MbvdFitOptions::default()).and_then(|f| Ok((deembed_q(&f.params)?, f))) {
        Ok((d, f)) => {
            let p = f.params;
            let msg = csv_field(&f.warnings.join("; "));
            (
                true,
                format!(
                    "{name},ok,{},{},{},{},{},{},{},{},{},{},{msg}",
                    hp.f_s,
                    hp.q,
                    p.rm,
                    p.lm,
                    p.cm,
                    p.c0,
                    p.rs,
                    d.loaded,
                    d.mechanical,
                    p.kt2()
                ),
            )
        }
        Err(e) => (
            true,
            format!(
                "{name},partial,{},{},,,,,,,,,{}",
                hp.f_s,
                hp.q,
                csv_field(&format!("mbvd: {e}"))
            ),
        ),
    }
}

/// Extraction table for a set of trace files; `Err` only if every file fails.
pub fn extract_table(inputs: &[PathBuf], fit: bool) -> Result<(String, Vec<String>)> {
    use rayon::prelude::*;
    let files = collect_inputs(inputs);
    if files.is_empty() {
        return Err(Error::Validation("no input traces given".into()));
    }
    let rows: Vec<(bool, String)> = files.par_iter().map(|p| extract_row(p, fit)).collect();
    let mut csv = format!("{EXTRACT_CSV_HEADER}\n");
    let mut errors = Vec::new();
    for ((ok, row), f) in rows.iter().zip(&files) {
        csv.push_str(row);
        csv.push('\n');
        if !ok {
            errors.push(format!("{}: {}", f.display(), row.rsplit(',').next().unwrap_or("")));
        }
    }
    if errors.len() == files.len() {
        return Err(Error::Resonance(format!(
            "all {} inputs failed:\n  {}",
            files.len(),
            errors.join("\n  ")
        )));
    }
    Ok((csv, errors))
}

pub fn cmd_extract_q(run: &Run) -> Result<Report> {
    let c = section(&run.config.extract_q, "extract_q")?;
    let (csv, errors) = run.install(|| extract_table(&c.inputs, c.fit_mbvd))?;
    run.prepare_output()?;
    let p = run.out(&format!("{}.csv", c.output));
    write(&p, &csv)?;
    Ok(Report {
        files: vec![p],
        messages: errors,
    })
}

/// Everything `cmd_fit` writes, as text.
pub struct FitOutputs {
    pub result: FitResult,
    pub alternate: std::result::Result<FitResult, String>,
    pub summary: String,
    pub residual_csv: String,
    pub chart: Chart,
}

fn other_family(f: ModelFamily) -> ModelFamily {
    match f {
        ModelFamily::ConstantQpiezo => ModelFamily::ConstantPlusQni,
        ModelFamily::ConstantPlusQni => ModelFamily::ConstantQpiezo,
    }
}

pub fn fit_outputs(c: &FitConfig, seed: u64, clamp: bool) -> Result<FitOutputs> {
    require_file(&c.records, "measured-set CSV")?;
    require_file(&c.eta_map, "η map")?;
    let records = load_measured_set(&c.records)?;
    let map = import_eta_map(&c.eta_map)?;
    let spec = FitSpec {
        seed,
        clamp: clamp || c.spec.clamp,
        ..c.spec.clone()
    };
    let result = fit_losses(&records, &map, &spec)?;
    let alt_spec = FitSpec {
        family: other_family(spec.family),
        ..spec.clone()
    };
    let alternate = fit_losses(&records, &map, &alt_spec).map_err(|e| e.to_string());

    let policy = if spec.clamp {
        Extrapolation::Clamp
    } else {
        Extrapolation::Error
    };
    let rows = residual_report(&result, &records, &map, policy);
    let mut summary = fit_summary(&result);
    summary.push_str("\nalternate family:\n");
    match &alternate {
        Ok(r) => summary.push_str(&fit_summary(r)),
        Err(e) => {
            let _ = writeln!(summary, "model family: {}\nnot fitted: {e}", alt_spec.family.label());
        }
    }

    let mut chart = Chart::new("Modeled Q_m versus measured data", "f (Hz)", "Q_m (1)");
    chart.x_log = true;
    chart.y_log = true;
    chart.add(
        "measured",
        records.iter().map(|r| (r.f_s, r.q_m)).collect(),
        Style::Markers,
    );
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let hl = median(records.iter().map(|r| r.geometry.film_thickness / r.geometry.wavelength).collect());
    let tmh = median(records.iter().map(|r| r.geometry.metal_thickness / r.geometry.film_thickness).collect());
    let f_lo = records.iter().map(|r| r.f_s).fold(f64::INFINITY, f64::min);
    let f_hi = records.iter().map(|r| r.f_s).fold(f64::NEG_INFINITY, f64::max);
    let eta = crate::dispersion::interp_eta(&map, hl, tmh, Extrapolation::Clamp)?;
    let mut fitted: Vec<&FitResult> = vec![&result];
    if let Ok(a) = &alternate {
        fitted.push(a);
    }
    for r in fitted {
        let model = r.model();
        let pts = (0..=60)
            .filter_map(|k| {
                let f = f_lo * (f_hi / f_lo).powf(k as f64 / 60.0);
                let qp = model.q_piezo(f, Some(tmh * hl)).ok()?;
                let qm = model.q_metal(f).ok()?;
                q_m(eta, qp, qm).ok().map(|q| (f, q))
            })
            .collect();
        chart.add(
            &format!("{} (median geometry)", r.family.label()),
            pts,
            Style::Line,
        );
    }
    Ok(FitOutputs {
        result,
        alternate,
        summary,
        residual_csv: residual_report_to_csv(&rows),
        chart,
    })
}

pub fn cmd_fit(run: &Run) -> Result<Report> {
    let c = section(&run.config.fit, "fit")?;
    let out = run.install(|| fit_outputs(c, run.seed, run.clamp))?;
    run.prepare_output()?;
    let mut rep = Report::default();
    for (name, text) in [
        (format!("{}_summary.txt", c.output), out.summary.clone()),
        (format!("{}_residuals.csv", c.output), out.residual_csv.clone()),
        (format!("{}.svg", c.output), out.chart.to_svg()?),
    ] {
        let p = run.out(&name);
        write(&p, &text)?;
        rep.file(p);
    }
    rep.messages.push(out.summary);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_paths_resolve_against_file() {
        let text = r#"
[general]
output_dir = "out"
seed = 3

[fit]
records = "m.csv"
eta_map = "/abs/eta.csv"

[fit.spec]
family = "constant-plus-qni"
objective = "envelope"
"#;
        let c = parse_config(text, "t", Path::new("/cfg")).unwrap();
        assert_eq!(c.general.output_dir.as_deref(), Some(Path::new("/cfg/out")));
        let f = c.fit.as_ref().unwrap();
        assert_eq!(f.records, PathBuf::from("/cfg/m.csv"));
        assert_eq!(f.eta_map, PathBuf::from("/abs/eta.csv"));
        assert_eq!(f.spec.family, ModelFamily::ConstantPlusQni);
        let run = Run::new(c, &Overrides { seed: Some(9), ..Default::default() });
        assert_eq!(run.seed, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config("[general]\nbogus = 1\n", "t", Path::new(".")).is_err());
        assert!(parse_config("[nonsense]\n", "t", Path::new(".")).is_err());
    }

    #[test]
    fn missing_section() {
        let run = Run::new(Config::default(), &Overrides::default());
        let e = cmd_fit(&run).unwrap_err();
        assert!(e.is_input_error());
    }

    #[test]
    fn predict_uniform_map_is_flat() {
        let map = EtaMap::uniform(vec![0.1, 0.2], vec![0.0, 0.5], 1.0).unwrap();
        let model = LossModel::new(
            crate::lossmodel::QpiezoModel::Constant { q0: 2000.0 },
            crate::lossmodel::QmetalModel::Constant { q: 200.0 },
        );
        let (csv, curves) = predict_table(&map, &model, 1e9).unwrap();
        assert!(curves.iter().flatten().all(|p| p.2 == 2000.0));
        assert_eq!(csv.lines().count(), 5);
        let empty = EtaMap::new(vec![0.1, 0.2], vec![0.0, 0.5], vec![None; 4], Default::default());
        if let Ok(m) = empty {
            assert!(predict_table(&m, &model, 1e9).is_err());
        }
    }
}
