//! C interface to piezoq.
//!
//! Every fallible call returns a [`PqStatus`]; on failure the message is
//! kept per thread and read back with [`pq_last_error_message`]. Objects are
//! opaque handles created by `*_new`/`*_load` functions and released with the
//! matching `*_free`. Output pointers are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use num_complex::Complex64;
use piezoq::dispersion::{
    import_eta_map, interp_eta, solve_point, DeviceGeometry, EtaMap, Extrapolation, SweepSettings,
};
use piezoq::fem::{Component, LateralBc, UnitCellSpec};
use piezoq::lossmodel::{
    load_loss_model, predict_qm, q_m, q_metal_at, series_q_of, LossModel, QmetalModel, QpiezoModel,
};
use piezoq::materials::{load_material, rotate_material, EulerAngles, Material, MaterialClass};
use piezoq::measure::{deembed_q, fit_mbvd, AdmittanceTrace, MbvdFitOptions, MbvdParams};
use piezoq::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    OutOfDomain = 6,
    Resonance = 7,
    Convergence = 8,
    AtBound = 9,
    Underdetermined = 10,
    Numerical = 11,
    Panic = 12,
}

impl From<&Error> for PqStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => PqStatus::Io,
            Error::Parse { .. } => PqStatus::Parse,
            Error::Validation(_) => PqStatus::Validation,
            Error::Invalid(_) => PqStatus::InvalidArgument,
            Error::OutOfDomain(_) => PqStatus::OutOfDomain,
            Error::Resonance(_) => PqStatus::Resonance,
            Error::Convergence(_) => PqStatus::Convergence,
            Error::AtBound(_) => PqStatus::AtBound,
            Error::Underdetermined(_) => PqStatus::Underdetermined,
            Error::Refinement(_) | Error::Singular(_) | Error::Eigen(_) => PqStatus::Numerical,
        }
    }
}

/// Loaded or constructed material.
pub struct PqMaterial(Material);

/// η(h/λ, t_m/h) lookup table.
pub struct PqEtaMap(EtaMap);

/// Loss model for both channels.
pub struct PqLossModel(LossModel);

/// Modified Butterworth–Van Dyke parameters in SI units.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PqMbvdParams {
    pub rm: f64,
    pub lm: f64,
    pub cm: f64,
    pub c0: f64,
    pub rs: f64,
    pub r0: f64,
}

impl From<PqMbvdParams> for MbvdParams {
    fn from(p: PqMbvdParams) -> Self {
        MbvdParams {
            rm: p.rm,
            lm: p.lm,
            cm: p.cm,
            c0: p.c0,
            rs: p.rs,
            r0: p.r0,
        }
    }
}

impl From<MbvdParams> for PqMbvdParams {
    fn from(p: MbvdParams) -> Self {
        PqMbvdParams {
            rm: p.rm,
            lm: p.lm,
            cm: p.cm,
            c0: p.c0,
            rs: p.rs,
            r0: p.r0,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(PqStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(PqStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PqStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(PqStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PqStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            PqStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| invalid("path is not valid UTF-8"))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn policy(clamp: bool) -> Extrapolation {
    if clamp {
        Extrapolation::Clamp
    } else {
        Extrapolation::Error
    }
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null after a success.
/// Valid until the next piezoq call on the same thread.
#[no_mangle]
pub extern "C" fn pq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// `Q_m = 1 / (η/Q_piezo + (1 − η)/Q_metal)`.
///
/// # Safety
/// `out` must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn pq_q_m(eta: f64, q_piezo: f64, q_metal: f64, out: *mut f64) -> PqStatus {
    guard(|| {
        let o = out_ptr(out)?;
        *o = q_m(eta, q_piezo, q_metal)?;
        Ok(())
    })
}

unsafe fn out_ptr<'a>(p: *mut f64) -> Result<&'a mut f64, Failure> {
    out(p, "output pointer")
}

/// Reciprocal sum of `n` quality factors.
///
/// # Safety
/// `qs` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_series_q(qs: *const f64, n: usize, out: *mut f64) -> PqStatus {
    guard(|| {
        let qs = slice(qs, n, "qs")?;
        let o = out_ptr(out)?;
        *o = series_q_of(qs.iter().copied())?;
        Ok(())
    })
}

/// `Q_metal = fq / f`.
///
/// # Safety
/// `out` must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn pq_q_metal_fq(fq_hz: f64, f_hz: f64, out: *mut f64) -> PqStatus {
    guard(|| {
        let o = out_ptr(out)?;
        *o = q_metal_at(&QmetalModel::ConstantFq { fq_hz }, f_hz)?;
        Ok(())
    })
}

/// Reads a material file.
///
/// # Safety
/// `file` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_material_load(file: *const c_char, out: *mut *mut PqMaterial) -> PqStatus {
    guard(|| {
        let o = self::out(out, "output handle")?;
        let m = load_material(path(file)?)?;
        *o = Box::into_raw(Box::new(PqMaterial(m)));
        Ok(())
    })
}

/// Isotropic solid from Lamé constants (Pa) and density (kg/m³).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_material_isotropic(
    lame_lambda: f64,
    shear_modulus: f64,
    density: f64,
    is_metal: bool,
    out: *mut *mut PqMaterial,
) -> PqStatus {
    guard(|| {
        let o = self::out(out, "output handle")?;
        let class = if is_metal {
            MaterialClass::Metal
        } else {
            MaterialClass::Piezoelectric
        };
        let m = Material::isotropic("isotropic", class, lame_lambda, shear_modulus, density)?;
        *o = Box::into_raw(Box::new(PqMaterial(m)));
        Ok(())
    })
}

/// New material rotated by intrinsic Z–X–Z Euler angles in degrees.
///
/// # Safety
/// `material` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_material_rotate(
    material: *const PqMaterial,
    phi_deg: f64,
    theta_deg: f64,
    psi_deg: f64,
    out: *mut *mut PqMaterial,
) -> PqStatus {
    guard(|| {
        let m = handle(material, "material")?;
        let o = self::out(out, "output handle")?;
        let r = rotate_material(&m.0, &EulerAngles::from_degrees(phi_deg, theta_deg, psi_deg))?;
        *o = Box::into_raw(Box::new(PqMaterial(r)));
        Ok(())
    })
}

/// Voigt stiffness entry `c_ij` (Pa), indices 0..6.
///
/// # Safety
/// `material` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_material_stiffness(
    material: *const PqMaterial,
    i: usize,
    j: usize,
    out: *mut f64,
) -> PqStatus {
    guard(|| {
        let m = handle(material, "material")?;
        let o = out_ptr(out)?;
        if i >= 6 || j >= 6 {
            return Err(invalid(format!("stiffness index ({i}, {j}) outside 0..6")));
        }
        *o = m.0.stiffness[(i, j)];
        Ok(())
    })
}

/// # Safety
/// `material` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pq_material_free(material: *mut PqMaterial) {
    if !material.is_null() {
        drop(Box::from_raw(material));
    }
}

/// Reads an η-map CSV.
///
/// # Safety
/// `file` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_eta_map_import(file: *const c_char, out: *mut *mut PqEtaMap) -> PqStatus {
    guard(|| {
        let o = self::out(out, "output handle")?;
        let m = import_eta_map(path(file)?)?;
        *o = Box::into_raw(Box::new(PqEtaMap(m)));
        Ok(())
    })
}

/// Builds a map from axes and row-major values (`values[i*n_tm + j]`); NaN
/// marks a gap.
///
/// # Safety
/// Arrays must hold the stated number of doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_eta_map_new(
    h_over_lambda: *const f64,
    n_h: usize,
    tm_over_h: *const f64,
    n_tm: usize,
    values: *const f64,
    out: *mut *mut PqEtaMap,
) -> PqStatus {
    guard(|| {
        let o = self::out(out, "output handle")?;
        let hl = slice(h_over_lambda, n_h, "h_over_lambda")?;
        let tmh = slice(tm_over_h, n_tm, "tm_over_h")?;
        let n = n_h.checked_mul(n_tm).ok_or_else(|| invalid("grid size overflows"))?;
        let v = slice(values, n, "values")?;
        let values = v.iter().map(|x| (!x.is_nan()).then_some(*x)).collect();
        let m = EtaMap::new(hl.to_vec(), tmh.to_vec(), values, Default::default())?;
        *o = Box::into_raw(Box::new(PqEtaMap(m)));
        Ok(())
    })
}

/// Bilinear η at a point; with `clamp` false, points off the grid fail with
/// `OutOfDomain`.
///
/// # Safety
/// `map` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_eta_map_interp(
    map: *const PqEtaMap,
    h_over_lambda: f64,
    tm_over_h: f64,
    clamp: bool,
    out: *mut f64,
) -> PqStatus {
    guard(|| {
        let m = handle(map, "map")?;
        let o = out_ptr(out)?;
        *o = interp_eta(&m.0, h_over_lambda, tm_over_h, policy(clamp))?;
        Ok(())
    })
}

/// # Safety
/// `map` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pq_eta_map_free(map: *mut PqEtaMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Reads a loss-model TOML file.
///
/// # Safety
/// `file` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_loss_model_load(file: *const c_char, out: *mut *mut PqLossModel) -> PqStatus {
    guard(|| {
        let o = self::out(out, "output handle")?;
        let m = load_loss_model(path(file)?)?;
        *o = Box::into_raw(Box::new(PqLossModel(m)));
        Ok(())
    })
}

/// Constant `Q_piezo` with an `f·Q` metal term.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_loss_model_new(q_piezo: f64, fq_hz: f64, out: *mut *mut PqLossModel) -> PqStatus {
    guard(|| {
        let o = self::out(out, "output handle")?;
        let m = LossModel::new(QpiezoModel::Constant { q0: q_piezo }, QmetalModel::ConstantFq { fq_hz });
        m.validate()?;
        *o = Box::into_raw(Box::new(PqLossModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pq_loss_model_free(model: *mut PqLossModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicted `Q_m` of a device (lengths in m) at `f_hz`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_predict_qm(
    map: *const PqEtaMap,
    model: *const PqLossModel,
    wavelength_m: f64,
    film_thickness_m: f64,
    metal_thickness_m: f64,
    f_hz: f64,
    clamp: bool,
    out: *mut f64,
) -> PqStatus {
    guard(|| {
        let map = handle(map, "map")?;
        let model = handle(model, "model")?;
        let o = out_ptr(out)?;
        let dev = DeviceGeometry::new(wavelength_m, film_thickness_m, metal_thickness_m)?;
        *o = predict_qm(&dev, &map.0, &model.0, f_hz, policy(clamp))?;
        Ok(())
    })
}

/// Unit-cell settings for [`pq_unit_cell_eta`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PqUnitCell {
    /// λ, m
    pub wavelength: f64,
    /// h, m
    pub film_thickness: f64,
    /// t_m, m
    pub metal_thickness: f64,
    /// Fraction of the period covered by metal, 0..=1.
    pub coverage: f64,
    pub mesh_nx: usize,
    pub mesh_nz_film: usize,
    pub mesh_nz_metal: usize,
    pub n_modes: usize,
    /// Dominant displacement component of the wanted mode: 0 = x, 1 = y
    /// (shear horizontal), 2 = z, negative = lowest mode.
    pub polarization: c_int,
}

/// Solves the unit cell and reports η and frequency (Hz) of the selected
/// mode.
///
/// # Safety
/// Pointers must be valid; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_unit_cell_eta(
    piezo: *const PqMaterial,
    metal: *const PqMaterial,
    cell: *const PqUnitCell,
    eta_out: *mut f64,
    frequency_out: *mut f64,
) -> PqStatus {
    guard(|| {
        let piezo = handle(piezo, "piezo")?;
        let metal = handle(metal, "metal")?;
        let c = handle(cell, "cell")?;
        let eta_o = out(eta_out, "eta output")?;
        let f_o = out(frequency_out, "frequency output")?;
        let component = match c.polarization {
            p if p < 0 => None,
            0 => Some(Component::X),
            1 => Some(Component::Y),
            2 => Some(Component::Z),
            p => return Err(invalid(format!("polarization {p} is not -1, 0, 1 or 2"))),
        };
        if !(c.wavelength > 0.0 && c.film_thickness > 0.0 && c.metal_thickness >= 0.0) {
            return Err(invalid("wavelength and film thickness must be positive, metal thickness >= 0"));
        }
        let base = UnitCellSpec {
            wavelength: c.wavelength,
            film_thickness: c.film_thickness,
            metal_thickness: 0.0,
            coverage: c.coverage,
            piezo: piezo.0.clone(),
            metal: metal.0.clone(),
            mesh_nx: c.mesh_nx,
            mesh_nz_film: c.mesh_nz_film,
            mesh_nz_metal: c.mesh_nz_metal,
            lateral_bc: LateralBc::Antiperiodic,
        };
        let settings = SweepSettings {
            n_modes: c.n_modes,
            component,
            velocity_window: None,
        };
        let mode = solve_point(
            &base,
            c.film_thickness / c.wavelength,
            c.metal_thickness / c.film_thickness,
            &settings,
        )?;
        *eta_o = mode.eta;
        *f_o = mode.frequency;
        Ok(())
    })
}

/// Circuit admittance at `f_hz`.
///
/// # Safety
/// `params` must be readable; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_mbvd_admittance(
    params: *const PqMbvdParams,
    f_hz: f64,
    re_out: *mut f64,
    im_out: *mut f64,
) -> PqStatus {
    guard(|| {
        let p: MbvdParams = (*handle(params, "params")?).into();
        p.validate()?;
        let re = out(re_out, "real output")?;
        let im = out(im_out, "imaginary output")?;
        let y = p.admittance(f_hz);
        *re = y.re;
        *im = y.im;
        Ok(())
    })
}

/// Fits the circuit to an admittance trace (`n` points, ascending frequency)
/// starting from the built-in initial guess.
///
/// # Safety
/// Arrays must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_mbvd_fit(
    f_hz: *const f64,
    y_re: *const f64,
    y_im: *const f64,
    n: usize,
    out: *mut PqMbvdParams,
) -> PqStatus {
    guard(|| {
        let f = slice(f_hz, n, "f_hz")?;
        let re = slice(y_re, n, "y_re")?;
        let im = slice(y_im, n, "y_im")?;
        let o = self::out(out, "output params")?;
        let y = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let trace = AdmittanceTrace::new(f.to_vec(), y)?;
        let fit = fit_mbvd(&trace, None, &MbvdFitOptions::default())?;
        *o = fit.params.into();
        Ok(())
    })
}

/// Loaded `ω_s·Lm/(Rm+Rs)` and mechanical `ω_s·Lm/Rm` quality factors.
///
/// # Safety
/// `params` must be readable; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pq_mbvd_deembed(
    params: *const PqMbvdParams,
    loaded_out: *mut f64,
    mechanical_out: *mut f64,
) -> PqStatus {
    guard(|| {
        let p: MbvdParams = (*handle(params, "params")?).into();
        let l = out(loaded_out, "loaded output")?;
        let m = out(mechanical_out, "mechanical output")?;
        let d = deembed_q(&p)?;
        *l = d.loaded;
        *m = d.mechanical;
        Ok(())
    })
}
