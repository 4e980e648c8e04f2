//! η maps over normalized geometry.
//!
//! A map is a rectangular grid over `h/λ` (outer axis) and `t_m/h` (inner
//! axis). Grid points whose solve failed are kept as gaps; interpolation
//! never crosses a gap.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{self, Component, ModeSelector, UnitCellSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct EtaMap {
    pub h_over_lambda: Vec<f64>,
    pub tm_over_h: Vec<f64>,
    /// Row-major: index `i * tm_over_h.len() + j`.
    pub values: Vec<Option<f64>>,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extrapolation {
    #[default]
    Error,
    Clamp,
}

impl EtaMap {
    pub fn new(
        h_over_lambda: Vec<f64>,
        tm_over_h: Vec<f64>,
        values: Vec<Option<f64>>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        let map = EtaMap {
            h_over_lambda,
            tm_over_h,
            values,
            metadata,
        };
        map.validate()?;
        Ok(map)
    }

    /// Map with the same η everywhere; handy for endpoint checks.
    pub fn uniform(h_over_lambda: Vec<f64>, tm_over_h: Vec<f64>, eta: f64) -> Result<Self> {
        let n = h_over_lambda.len() * tm_over_h.len();
        EtaMap::new(h_over_lambda, tm_over_h, vec![Some(eta); n], BTreeMap::new())
    }

    pub fn validate(&self) -> Result<()> {
        check_axis("h_over_lambda", &self.h_over_lambda)?;
        check_axis("tm_over_h", &self.tm_over_h)?;
        let expected = self.h_over_lambda.len() * self.tm_over_h.len();
        if self.values.len() != expected {
            return Err(Error::Validation(format!(
                "eta map has {} values, grid needs {expected}",
                self.values.len()
            )));
        }
        for (k, v) in self.values.iter().enumerate() {
            if let Some(eta) = v {
                if !(eta.is_finite() && (0.0..=1.0).contains(eta)) {
                    let (i, j) = (k / self.tm_over_h.len(), k % self.tm_over_h.len());
                    return Err(Error::Validation(format!(
                        "eta {eta} outside [0, 1] at h/lambda={}, tm/h={}",
                        self.h_over_lambda[i], self.tm_over_h[j]
                    )));
                }
            }
        }
        for (k, v) in &self.metadata {
            if k.contains(['\n', ':']) || v.contains('\n') {
                return Err(Error::Validation(format!("metadata entry '{k}' is not single-line")));
            }
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.tm_over_h.len() + j]
    }

    pub fn n_gaps(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::Validation(format!("{name} grid is empty")));
    }
    if axis.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Validation(format!("{name} grid has a negative or non-finite value")));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation(format!("{name} grid is not strictly increasing")));
    }
    Ok(())
}

/// Locates `x` on `axis`, returning the lower index and the weight of the
/// upper neighbour.
fn locate(axis: &[f64], x: f64, policy: Extrapolation, name: &str) -> Result<(usize, f64)> {
    if !x.is_finite() {
        return Err(Error::OutOfDomain(format!("{name} = {x}")));
    }
    let (lo, hi) = (axis[0], axis[axis.len() - 1]);
    let x = if x < lo || x > hi {
        match policy {
            Extrapolation::Error => {
                return Err(Error::OutOfDomain(format!(
                    "{name} = {x} outside grid [{lo}, {hi}]"
                )))
            }
            Extrapolation::Clamp => x.clamp(lo, hi),
        }
    } else {
        x
    };
    if axis.len() == 1 {
        return Ok((0, 0.0));
    }
    let upper = axis.partition_point(|&g| g <= x).clamp(1, axis.len() - 1);
    let i = upper - 1;
    let t = (x - axis[i]) / (axis[i + 1] - axis[i]);
    Ok((i, t.clamp(0.0, 1.0)))
}

/// Bilinear interpolation of η at `(h/λ, t_m/h)`.
pub fn interp_eta(map: &EtaMap, h_over_lambda: f64, tm_over_h: f64, policy: Extrapolation) -> Result<f64> {
    let (i, s) = locate(&map.h_over_lambda, h_over_lambda, policy, "h/lambda")?;
    let (j, t) = locate(&map.tm_over_h, tm_over_h, policy, "tm/h")?;
    let i1 = (i + 1).min(map.h_over_lambda.len() - 1);
    let j1 = (j + 1).min(map.tm_over_h.len() - 1);
    let corner = |a: usize, b: usize| {
        map.get(a, b).ok_or_else(|| {
            Error::OutOfDomain(format!(
                "interpolation touches missing grid point h/lambda={}, tm/h={}",
                map.h_over_lambda[a], map.tm_over_h[b]
            ))
        })
    };
    let v00 = corner(i, j)?;
    let v01 = corner(i, j1)?;
    let v10 = corner(i1, j)?;
    let v11 = corner(i1, j1)?;
    let lower = (1.0 - t) * v00 + t * v01;
    let upper = (1.0 - t) * v10 + t * v11;
    Ok((1.0 - s) * lower + s * upper)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceGeometry {
    /// λ, m
    pub wavelength: f64,
    /// h, m
    pub film_thickness: f64,
    /// t_m, m
    pub metal_thickness: f64,
    /// Measured series resonance, Hz.
    pub resonance_frequency: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedCoords {
    pub h_over_lambda: f64,
    pub tm_over_h: f64,
    pub tm_over_lambda: f64,
}

impl DeviceGeometry {
    pub fn new(wavelength: f64, film_thickness: f64, metal_thickness: f64) -> Result<Self> {
        let g = DeviceGeometry {
            wavelength,
            film_thickness,
            metal_thickness,
            resonance_frequency: None,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.wavelength) || !positive(self.film_thickness) {
            return Err(Error::Validation("device wavelength and thickness must be positive".into()));
        }
        if !(self.metal_thickness.is_finite() && self.metal_thickness >= 0.0) {
            return Err(Error::Validation("device metal thickness must be >= 0".into()));
        }
        if let Some(f) = self.resonance_frequency {
            if !positive(f) {
                return Err(Error::Validation("device resonance frequency must be positive".into()));
            }
        }
        Ok(())
    }
}

pub fn device_to_coords(dev: &DeviceGeometry) -> NormalizedCoords {
    NormalizedCoords {
        h_over_lambda: dev.film_thickness / dev.wavelength,
        tm_over_h: dev.metal_thickness / dev.film_thickness,
        tm_over_lambda: dev.metal_thickness / dev.wavelength,
    }
}

/// How each sweep point picks its mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub n_modes: usize,
    pub component: Option<Component>,
    /// Phase-velocity window `f·λ` in m/s; scaled to a frequency window at
    /// each grid point.
    pub velocity_window: Option<(f64, f64)>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            n_modes: 12,
            component: None,
            velocity_window: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepFailure {
    pub h_over_lambda: f64,
    pub tm_over_h: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub map: EtaMap,
    /// Phase velocity `f·λ` of the selected mode, same layout as the map.
    pub phase_velocity: Vec<Option<f64>>,
    pub failures: Vec<SweepFailure>,
}

/// Default `h/λ` grid spanning 0.01 to 0.5.
pub fn default_h_over_lambda_grid() -> Vec<f64> {
    vec![0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5]
}

/// Default `t_m/h` grid spanning 0 to 0.5.
pub fn default_tm_over_h_grid() -> Vec<f64> {
    vec![0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5]
}

/// Solves one grid point: the base film thickness is kept and λ, t_m are
/// derived from the normalized coordinates.
pub fn solve_point(
    base: &UnitCellSpec,
    h_over_lambda: f64,
    tm_over_h: f64,
    settings: &SweepSettings,
) -> Result<fem::ModeSolution> {
    if !(h_over_lambda > 0.0) || !(tm_over_h >= 0.0) {
        return Err(Error::Validation(format!(
            "grid point h/lambda={h_over_lambda}, tm/h={tm_over_h} is not valid"
        )));
    }
    let mut spec = base.clone();
    spec.wavelength = base.film_thickness / h_over_lambda;
    spec.metal_thickness = tm_over_h * base.film_thickness;
    let (_, modes) = fem::solve_unit_cell(&spec, settings.n_modes)?;
    let selector = ModeSelector {
        window: settings
            .velocity_window
            .map(|(lo, hi)| (lo / spec.wavelength, hi / spec.wavelength)),
        component: settings.component,
    };
    Ok(fem::select_mode_with(&modes, &selector)?.clone())
}

/// Solves every grid point (in parallel on the current rayon pool) and
/// assembles the η map in grid order.
pub fn sweep_eta(
    base: &UnitCellSpec,
    h_over_lambda: &[f64],
    tm_over_h: &[f64],
    settings: &SweepSettings,
) -> Result<SweepOutcome> {
    base.validate()?;
    check_axis("h_over_lambda", h_over_lambda)?;
    check_axis("tm_over_h", tm_over_h)?;
    if h_over_lambda[0] <= 0.0 {
        return Err(Error::Validation("h/lambda grid must be positive".into()));
    }

    let points: Vec<(f64, f64)> = h_over_lambda
        .iter()
        .flat_map(|&a| tm_over_h.iter().map(move |&b| (a, b)))
        .collect();
    let results: Vec<Result<fem::ModeSolution>> = points
        .par_iter()
        .map(|&(a, b)| solve_point(base, a, b, settings))
        .collect();

    let mut values = Vec::with_capacity(points.len());
    let mut phase_velocity = Vec::with_capacity(points.len());
    let mut failures = Vec::new();
    for (&(a, b), r) in points.iter().zip(results) {
        match r {
            Ok(mode) => {
                values.push(Some(mode.eta));
                phase_velocity.push(Some(mode.frequency * base.film_thickness / a));
            }
            Err(e) => {
                values.push(None);
                phase_velocity.push(None);
                failures.push(SweepFailure {
                    h_over_lambda: a,
                    tm_over_h: b,
                    message: e.to_string(),
                });
            }
        }
    }
    if failures.len() == points.len() {
        return Err(Error::Eigen(format!(
            "every sweep point failed; first: {}",
            failures[0].message
        )));
    }

    let mut metadata = BTreeMap::new();
    metadata.insert("piezo".into(), base.piezo.name.clone());
    metadata.insert("metal".into(), base.metal.name.clone());
    metadata.insert("coverage".into(), format!("{}", base.coverage));
    metadata.insert(
        "mesh".into(),
        format!("{}x{}+{}", base.mesh_nx, base.mesh_nz_film, base.mesh_nz_metal),
    );
    metadata.insert("n_modes".into(), settings.n_modes.to_string());
    metadata.insert(
        "polarization".into(),
        settings.component.map_or("any".into(), |c| c.to_string()),
    );
    metadata.insert(
        "velocity_window_m_s".into(),
        settings
            .velocity_window
            .map_or("none".into(), |(lo, hi)| format!("{lo}..{hi}")),
    );

    Ok(SweepOutcome {
        map: EtaMap::new(h_over_lambda.to_vec(), tm_over_h.to_vec(), values, metadata)?,
        phase_velocity,
        failures,
    })
}

pub const ETA_CSV_HEADER: &str = "h_over_lambda,tm_over_h,eta";

pub fn eta_map_to_csv(map: &EtaMap) -> String {
    let mut out = String::new();
    for (k, v) in &map.metadata {
        let _ = writeln!(out, "# {k}: {v}");
    }
    out.push_str(ETA_CSV_HEADER);
    out.push('\n');
    for (i, a) in map.h_over_lambda.iter().enumerate() {
        for (j, b) in map.tm_over_h.iter().enumerate() {
            match map.get(i, j) {
                Some(v) => {
                    let _ = writeln!(out, "{a},{b},{v}");
                }
                None => {
                    let _ = writeln!(out, "{a},{b},");
                }
            }
        }
    }
    out
}

pub fn export_eta_map(map: &EtaMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, eta_map_to_csv(map)).map_err(|e| Error::io(path, e))
}

pub fn import_eta_map(path: impl AsRef<Path>) -> Result<EtaMap> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_eta_csv(&text, &path.display().to_string())
}

pub fn parse_eta_csv(text: &str, origin: &str) -> Result<EtaMap> {
    let mut metadata = BTreeMap::new();
    let mut rows: Vec<(f64, f64, Option<f64>, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once(':') {
                metadata.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if line == ETA_CSV_HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(origin, line_no, "expected 3 comma-separated fields"));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::parse(origin, line_no, format!("{what} '{s}' is not a number")))
        };
        let a = num(fields[0], "h_over_lambda")?;
        let b = num(fields[1], "tm_over_h")?;
        let v = if fields[2].is_empty() {
            None
        } else {
            Some(num(fields[2], "eta")?)
        };
        rows.push((a, b, v, line_no));
    }
    if rows.is_empty() {
        return Err(Error::parse(origin, 0, "no data rows"));
    }

    let mut axis1: Vec<f64> = Vec::new();
    for r in &rows {
        if axis1.last() != Some(&r.0) {
            axis1.push(r.0);
        }
    }
    let n2 = rows.iter().take_while(|r| r.0 == rows[0].0).count();
    let axis2: Vec<f64> = rows[..n2].iter().map(|r| r.1).collect();
    if rows.len() != axis1.len() * n2 {
        return Err(Error::Validation(format!(
            "{origin}: {} rows do not form a {}x{n2} grid",
            rows.len(),
            axis1.len()
        )));
    }
    for (k, r) in rows.iter().enumerate() {
        if r.0 != axis1[k / n2] || r.1 != axis2[k % n2] {
            return Err(Error::Validation(format!(
                "{origin} line {}: grid point out of row-major order",
                r.3
            )));
        }
    }
    let values = rows.iter().map(|r| r.2).collect();
    EtaMap::new(axis1, axis2, values, metadata)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> EtaMap {
        EtaMap::new(
            vec![0.1, 0.2],
            vec![0.0, 0.5],
            vec![Some(0.9), Some(0.7), Some(0.9), Some(0.7)],
            BTreeMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn node_and_midpoint() {
        let m = two_by_two();
        assert_eq!(interp_eta(&m, 0.1, 0.5, Extrapolation::Error).unwrap(), 0.7);
        assert_eq!(interp_eta(&m, 0.2, 0.0, Extrapolation::Error).unwrap(), 0.9);
        let mid = interp_eta(&m, 0.15, 0.25, Extrapolation::Error).unwrap();
        assert!((mid - 0.8).abs() < 1e-15);
    }

    #[test]
    fn outside_hull() {
        let m = two_by_two();
        assert!(matches!(
            interp_eta(&m, 0.3, 0.1, Extrapolation::Error),
            Err(Error::OutOfDomain(_))
        ));
        assert_eq!(interp_eta(&m, 0.3, 0.6, Extrapolation::Clamp).unwrap(), 0.7);
    }

    #[test]
    fn gap_blocks_interpolation() {
        let mut m = two_by_two();
        m.values[3] = None;
        assert!(interp_eta(&m, 0.15, 0.25, Extrapolation::Error).is_err());
        assert!(interp_eta(&m, 0.1, 0.25, Extrapolation::Error).is_err());
    }

    #[test]
    fn coords() {
        let c = device_to_coords(&DeviceGeometry::new(10e-6, 1e-6, 300e-9).unwrap());
        assert!((c.h_over_lambda - 0.1).abs() < 1e-15);
        assert!((c.tm_over_h - 0.3).abs() < 1e-15);
        assert!((c.tm_over_lambda - 0.03).abs() < 1e-15);
        let c = device_to_coords(&DeviceGeometry::new(400e-9, 100e-9, 50e-9).unwrap());
        assert!((c.h_over_lambda - 0.25).abs() < 1e-15);
        assert!((c.tm_over_h - 0.5).abs() < 1e-15);
        assert!((c.tm_over_lambda - 0.125).abs() < 1e-15);
        let c = device_to_coords(&DeviceGeometry::new(10e-6, 1e-6, 0.0).unwrap());
        assert_eq!((c.tm_over_h, c.tm_over_lambda), (0.0, 0.0));
        assert!(DeviceGeometry::new(-1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn csv_roundtrip_and_schema_errors() {
        let mut m = two_by_two();
        m.values[1] = None;
        m.metadata.insert("piezo".into(), "iso".into());
        let text = eta_map_to_csv(&m);
        assert_eq!(parse_eta_csv(&text, "t").unwrap(), m);

        let bad_order = "0.2,0,1\n0.2,0.5,1\n0.1,0,1\n0.1,0.5,1\n";
        assert!(parse_eta_csv(bad_order, "t").is_err());
        let bad_value = "0.1,0,1.2\n";
        assert!(parse_eta_csv(bad_value, "t").is_err());
        let ragged = "0.1,0,1\n0.1,0.5,1\n0.2,0,1\n";
        assert!(parse_eta_csv(ragged, "t").is_err());
    }
}
