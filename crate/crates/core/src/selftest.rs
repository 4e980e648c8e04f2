//! Analytic-oracle checks run by `piezoq selftest`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dispersion::{sweep_eta, SweepSettings};
use crate::fem::{solve_unit_cell, Component, LateralBc, UnitCellSpec};
use crate::lossmodel::q_m;
use crate::materials::{Material, MaterialClass};
use crate::measure::{deembed_q, fit_mbvd, linspace, synthetic_trace, MbvdFitOptions, MbvdParams};

/// Environment variable scaling every selftest tolerance.
pub const TOLERANCE_ENV: &str = "PIEZOQ_SELFTEST_TOL_SCALE";

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Observed error and the tolerance it was held to.
    pub error: f64,
    pub tolerance: f64,
    pub detail: String,
}

fn check(name: &'static str, error: f64, tolerance: f64, detail: String) -> Check {
    Check {
        name,
        passed: error.is_finite() && error <= tolerance,
        error,
        tolerance,
        detail,
    }
}

fn failed(name: &'static str, tolerance: f64, e: impl std::fmt::Display) -> Check {
    Check {
        name,
        passed: false,
        error: f64::NAN,
        tolerance,
        detail: e.to_string(),
    }
}

fn iso(class: MaterialClass) -> Material {
    Material::isotropic("selftest-iso", class, 50e9, 25e9, 5000.0).expect("valid isotropic solid")
}

fn plate(h_over_lambda: f64, nx: usize, nz: usize) -> UnitCellSpec {
    let wavelength = 20e-6;
    UnitCellSpec {
        wavelength,
        film_thickness: h_over_lambda * wavelength,
        metal_thickness: 0.0,
        coverage: 0.0,
        piezo: iso(MaterialClass::Piezoelectric),
        metal: iso(MaterialClass::Metal),
        mesh_nx: nx,
        mesh_nz_film: nz,
        mesh_nz_metal: 2,
        lateral_bc: LateralBc::Antiperiodic,
    }
}

fn sh0_velocity(scale: f64) -> Check {
    let tol = 0.01 * scale;
    let name = "SH0 phase velocity";
    let spec = plate(0.1, 32, 8);
    let exact = (25e9f64 / 5000.0).sqrt();
    match solve_unit_cell(&spec, 8) {
        Ok((_, modes)) => match modes.iter().find(|m| m.polarization.y > 0.99) {
            Some(m) => {
                let v = m.phase_velocity(spec.wavelength);
                check(name, (v / exact - 1.0).abs(), tol, format!("{v:.3} m/s vs {exact:.3} m/s"))
            }
            None => failed(name, tol, "no shear-horizontal mode found"),
        },
        Err(e) => failed(name, tol, e),
    }
}

fn bare_plate_eta(scale: f64) -> Check {
    let tol = 1e-9 * scale;
    let name = "bare plate eta = 1";
    let mut base = plate(0.1, 16, 4);
    base.coverage = 0.5;
    let settings = SweepSettings {
        component: Some(Component::Y),
        ..Default::default()
    };
    match sweep_eta(&base, &[0.05, 0.2, 0.4], &[0.0], &settings) {
        Ok(out) => {
            let err = out
                .map
                .values
                .iter()
                .map(|v| v.map_or(f64::INFINITY, |v| (v - 1.0).abs()))
                .fold(0.0, f64::max);
            check(name, err, tol, format!("{} points", out.map.values.len()))
        }
        Err(e) => failed(name, tol, e),
    }
}

fn qm_endpoints(scale: f64) -> Check {
    let tol = 1e-12 * scale;
    let name = "Q_m endpoints";
    let (qp, qm) = (2000.0, 200.0);
    match (q_m(1.0, qp, qm), q_m(0.0, qp, qm)) {
        (Ok(a), Ok(b)) => {
            let err = ((a - qp) / qp).abs().max(((b - qm) / qm).abs());
            check(name, err, tol, format!("Q_m(1) = {a}, Q_m(0) = {b}"))
        }
        (Err(e), _) | (_, Err(e)) => failed(name, tol, e),
    }
}

fn mbvd_round_trip(scale: f64) -> Check {
    let tol = 1e-3 * scale;
    let name = "mBVD round trip";
    let truth = MbvdParams {
        rm: 160.0,
        lm: 25.33e-6,
        cm: 1e-15,
        c0: 20e-15,
        rs: 5.0,
        r0: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut run = || -> crate::Result<(MbvdParams, f64)> {
        let t = synthetic_trace(&truth, &linspace(0.95e9, 1.06e9, 2201), None, &mut rng)?;
        let p = fit_mbvd(&t, None, &MbvdFitOptions::default())?.params;
        Ok((p, deembed_q(&p)?.mechanical))
    };
    match run() {
        Ok((p, q)) => {
            let pairs = [
                (p.rm, truth.rm),
                (p.lm, truth.lm),
                (p.cm, truth.cm),
                (p.c0, truth.c0),
                (p.rs, truth.rs),
            ];
            let err = pairs.iter().map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
            check(name, err, tol, format!("Q_m = {q:.2}"))
        }
        Err(e) => failed(name, tol, e),
    }
}

/// Runs all checks with tolerances multiplied by `scale`.
pub fn run_selftest(scale: f64) -> Vec<Check> {
    vec![
        qm_endpoints(scale),
        bare_plate_eta(scale),
        sh0_velocity(scale),
        mbvd_round_trip(scale),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_pass_at_nominal_tolerance() {
        for c in run_selftest(1.0) {
            assert!(c.passed, "{}: {} > {} ({})", c.name, c.error, c.tolerance, c.detail);
        }
    }

    #[test]
    fn zero_tolerance_fails_inexact_checks() {
        let checks = run_selftest(0.0);
        assert!(checks.iter().any(|c| !c.passed));
    }
}
