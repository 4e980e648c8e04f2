//! Material constants and crystal-cut rotations.
//!
//! Tensors are stored in Voigt form with engineering shear strains:
//! index order `xx, yy, zz, yz, xz, xy`. Stiffness is the constant-field
//! `cE` (Pa), piezoelectric stress constants `e` (C/m²) are `3×6`, and the
//! clamped permittivity `εS` is `3×3` in F/m.
//!
//! # Rotation convention
//!
//! [`EulerAngles`] are intrinsic Z–X–Z angles `(phi, theta, psi)`. The
//! associated matrix is `R = Rz(phi) · Rx(theta) · Rz(psi)` and rotating a
//! material by `R` gives lab-frame components
//! `c'_ijkl = R_ip R_jq R_kr R_ls c_pqrs` (and likewise for `e`, `εS`).
//! Row `i` of `R` is lab axis `i` written in crystal coordinates.
//!
//! The lab frame of the unit cell has `x` along propagation, `z` along the
//! plate normal and `y` along the aperture.
//!
//! # Cut labels
//!
//! `"<N>-cut <P><Q><deg>"` means plate normal along crystal axis `N` and
//! propagation direction rotated by `deg` from crystal axis `P` towards `Q`.
//! Examples:
//!
//! | label           | lab x (crystal coords)   | Euler (deg)        |
//! |-----------------|--------------------------|--------------------|
//! | `X-cut YZ0°`    | `(0, 1, 0)`              | `(180, 90, 90)`    |
//! | `X-cut YZ30°`   | `(0, cos30, sin30)`      | `(150, 90, 90)`    |
//! | `X-cut YZ170°`  | `(0, cos170, sin170)`    | `(10, 90, 90)`     |
//!
//! For X-cut plates the in-plane angle enters only `phi`, as `180° − deg`.

use std::fmt;
use std::path::Path;

use nalgebra::{SMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix6 = SMatrix<f64, 6, 6>;
pub type Matrix3x6 = SMatrix<f64, 3, 6>;
pub type Matrix3 = nalgebra::Matrix3<f64>;

/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.8541878128e-12;

const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaterialClass {
    Piezoelectric,
    Metal,
}

impl fmt::Display for MaterialClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaterialClass::Piezoelectric => write!(f, "piezoelectric"),
            MaterialClass::Metal => write!(f, "metal"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    pub class: MaterialClass,
    /// kg/m³
    pub density: f64,
    /// Pa
    pub stiffness: Matrix6,
    /// C/m²
    pub piezo_e: Matrix3x6,
    /// F/m
    pub permittivity: Matrix3,
}

impl Material {
    /// Isotropic solid from Lamé constants (Pa). Piezoelectric constants are
    /// zero and the permittivity is vacuum.
    pub fn isotropic(
        name: impl Into<String>,
        class: MaterialClass,
        lame_lambda: f64,
        shear_modulus: f64,
        density: f64,
    ) -> Result<Self> {
        let mut c = Matrix6::zeros();
        let c11 = lame_lambda + 2.0 * shear_modulus;
        for i in 0..3 {
            for j in 0..3 {
                c[(i, j)] = if i == j { c11 } else { lame_lambda };
            }
            c[(i + 3, i + 3)] = shear_modulus;
        }
        let m = Material {
            name: name.into(),
            class,
            density,
            stiffness: c,
            piezo_e: Matrix3x6::zeros(),
            permittivity: Matrix3::identity() * EPSILON_0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let name = &self.name;
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(Error::Validation(format!(
                "material '{name}': density must be positive, got {}",
                self.density
            )));
        }
        if self.stiffness.iter().any(|v| !v.is_finite())
            || self.piezo_e.iter().any(|v| !v.is_finite())
            || self.permittivity.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Validation(format!(
                "material '{name}': non-finite constant"
            )));
        }
        check_spd(&self.stiffness, &format!("material '{name}': stiffness cE"))?;
        check_spd(
            &self.permittivity,
            &format!("material '{name}': permittivity epsS"),
        )?;
        if self.class == MaterialClass::Metal && self.piezo_e.iter().any(|&v| v != 0.0) {
            return Err(Error::Validation(format!(
                "material '{name}': metal must have a zero piezoelectric matrix"
            )));
        }
        Ok(())
    }

    /// Stiffness in Mandel (orthonormal) notation.
    pub fn stiffness_mandel(&self) -> Matrix6 {
        let w = mandel_weights();
        let mut out = self.stiffness;
        for i in 0..6 {
            for j in 0..6 {
                out[(i, j)] *= w[i] * w[j];
            }
        }
        out
    }

    /// Strain energy density `½·sᵀ·cE·s` for a Voigt strain vector.
    pub fn strain_energy_density(&self, strain: &SMatrix<f64, 6, 1>) -> f64 {
        0.5 * (strain.transpose() * self.stiffness * strain)[(0, 0)]
    }
}

fn mandel_weights() -> [f64; 6] {
    let r = std::f64::consts::SQRT_2;
    [1.0, 1.0, 1.0, r, r, r]
}

fn check_spd<const N: usize>(m: &SMatrix<f64, N, N>, what: &str) -> Result<()> {
    let scale = m.amax();
    if scale == 0.0 {
        return Err(Error::Validation(format!("{what} is zero")));
    }
    for i in 0..N {
        for j in (i + 1)..N {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::Validation(format!(
                    "{what} is not symmetric at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    if m.cholesky().is_none() {
        return Err(Error::Validation(format!("{what} is not positive definite")));
    }
    Ok(())
}

/// Intrinsic Z–X–Z Euler angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl EulerAngles {
    pub fn new(phi: f64, theta: f64, psi: f64) -> Self {
        EulerAngles { phi, theta, psi }
    }

    pub fn from_degrees(phi: f64, theta: f64, psi: f64) -> Self {
        EulerAngles::new(phi.to_radians(), theta.to_radians(), psi.to_radians())
    }

    pub fn identity() -> Self {
        EulerAngles::new(0.0, 0.0, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.theta.is_finite() && self.psi.is_finite()
    }

    /// `Rz(phi) · Rx(theta) · Rz(psi)`.
    pub fn matrix(&self) -> Matrix3 {
        rot_z(self.phi) * rot_x(self.theta) * rot_z(self.psi)
    }

    pub fn inverse(&self) -> Self {
        EulerAngles::new(-self.psi, -self.theta, -self.phi)
    }

    /// Recovers angles from a proper rotation matrix. At the gimbal-lock
    /// poles (`theta` = 0 or π) `psi` is set to zero.
    pub fn from_matrix(r: &Matrix3) -> Self {
        let theta = r[(2, 2)].clamp(-1.0, 1.0).acos();
        if theta.sin().abs() > 1e-12 {
            let phi = r[(0, 2)].atan2(-r[(1, 2)]);
            let psi = r[(2, 0)].atan2(r[(2, 1)]);
            EulerAngles::new(phi, theta, psi)
        } else if r[(2, 2)] > 0.0 {
            EulerAngles::new(r[(1, 0)].atan2(r[(0, 0)]), 0.0, 0.0)
        } else {
            EulerAngles::new(r[(1, 0)].atan2(r[(0, 0)]), std::f64::consts::PI, 0.0)
        }
    }

    /// Angles whose matrix equals `self.matrix()` applied after `first`.
    pub fn compose_after(&self, first: &EulerAngles) -> Self {
        EulerAngles::from_matrix(&(self.matrix() * first.matrix()))
    }
}

fn rot_z(a: f64) -> Matrix3 {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rot_x(a: f64) -> Matrix3 {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Voigt index pairs in `xx, yy, zz, yz, xz, xy` order.
pub(crate) const VOIGT_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

/// Stress Bond matrix: `T' = M·T` for Voigt stresses under the rotation `a`.
pub fn bond_matrix(a: &Matrix3) -> Matrix6 {
    let mut m = Matrix6::zeros();
    for (row, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
        for (col, &(k, l)) in VOIGT_PAIRS.iter().enumerate() {
            m[(row, col)] = if k == l {
                a[(i, k)] * a[(j, l)]
            } else {
                a[(i, k)] * a[(j, l)] + a[(i, l)] * a[(j, k)]
            };
        }
    }
    m
}

/// Rotates a material by the matrix of `angles`.
pub fn rotate_material(m: &Material, angles: &EulerAngles) -> Result<Material> {
    if !angles.is_finite() {
        return Err(Error::Invalid("non-finite Euler angle".into()));
    }
    Ok(rotate_material_by_matrix(m, &angles.matrix()))
}

pub fn rotate_material_by_matrix(m: &Material, a: &Matrix3) -> Material {
    let bond = bond_matrix(a);
    let mut c = bond * m.stiffness * bond.transpose();
    let mut eps = a * m.permittivity * a.transpose();
    symmetrize(&mut c);
    symmetrize(&mut eps);
    let piezo_e = if m.class == MaterialClass::Metal {
        Matrix3x6::zeros()
    } else {
        a * m.piezo_e * bond.transpose()
    };
    Material {
        name: m.name.clone(),
        class: m.class,
        density: m.density,
        stiffness: c,
        piezo_e,
        permittivity: eps,
    }
}

fn symmetrize<const N: usize>(m: &mut SMatrix<f64, N, N>) {
    for i in 0..N {
        for j in (i + 1)..N {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Eigenvalues of the Mandel-form stiffness, ascending.
pub fn stiffness_spectrum(m: &Material) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.stiffness_mandel())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

fn axis_index(c: char) -> Option<usize> {
    match c.to_ascii_uppercase() {
        'X' => Some(0),
        'Y' => Some(1),
        'Z' => Some(2),
        _ => None,
    }
}

/// Parses a cut label such as `"X-cut YZ170°"` into Euler angles.
pub fn cut_to_euler(label: &str) -> Result<EulerAngles> {
    let bad = |why: &str| Error::Invalid(format!("cut label '{label}': {why}"));
    let trimmed = label.trim();
    let mut parts = trimmed.split_whitespace();
    let cut = parts.next().ok_or_else(|| bad("empty"))?;
    let rot = parts.next().ok_or_else(|| bad("missing propagation term"))?;
    if parts.next().is_some() {
        return Err(bad("trailing text"));
    }

    let cut_lower = cut.to_ascii_lowercase();
    let normal_letter = cut_lower
        .strip_suffix("-cut")
        .filter(|s| s.chars().count() == 1)
        .and_then(|s| s.chars().next())
        .ok_or_else(|| bad("expected '<axis>-cut'"))?;
    let normal = axis_index(normal_letter).ok_or_else(|| bad("unknown cut axis"))?;

    let mut chars = rot.chars();
    let from = chars.next().and_then(axis_index).ok_or_else(|| bad("bad axis pair"))?;
    let toward = chars.next().and_then(axis_index).ok_or_else(|| bad("bad axis pair"))?;
    if from == toward || from == normal || toward == normal {
        return Err(bad("axis pair must span the plate plane"));
    }
    let deg_text: String = chars.collect();
    let deg_text = deg_text.trim_end_matches('°').trim_end_matches("deg");
    let deg: f64 = deg_text
        .parse()
        .map_err(|_| bad("angle is not a number"))?;
    if !deg.is_finite() {
        return Err(bad("angle is not finite"));
    }

    let (s, c) = deg.to_radians().sin_cos();
    let mut lab_x = nalgebra::Vector3::zeros();
    lab_x[from] = c;
    lab_x[toward] = s;
    let mut lab_z = nalgebra::Vector3::zeros();
    lab_z[normal] = 1.0;
    let lab_y = lab_z.cross(&lab_x);
    let a = Matrix3::from_rows(&[lab_x.transpose(), lab_y.transpose(), lab_z.transpose()]);
    Ok(EulerAngles::from_matrix(&a))
}

/// Reads a material file (see the crate README for the schema).
pub fn load_material(path: impl AsRef<Path>) -> Result<Material> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_material(&text, &path.display().to_string())
}

pub fn parse_material(text: &str, origin: &str) -> Result<Material> {
    let mut entries: Vec<(String, String, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::parse(origin, line_no, "empty key"));
            }
            if entries.iter().any(|(existing, _, _)| *existing == key) {
                return Err(Error::parse(origin, line_no, format!("duplicate key '{key}'")));
            }
            entries.push((key, v.trim().to_string(), line_no));
        } else if let Some(last) = entries.last_mut() {
            // continuation of a numeric list
            last.1.push(' ');
            last.1.push_str(line);
        } else {
            return Err(Error::parse(origin, line_no, "expected 'key = value'"));
        }
    }

    let get = |key: &str| entries.iter().find(|(k, _, _)| k == key);
    for (k, _, line) in &entries {
        if !matches!(
            k.as_str(),
            "name" | "class" | "density_kg_m3" | "cE_GPa" | "e_C_m2" | "epsS_relative"
        ) {
            return Err(Error::parse(origin, *line, format!("unknown key '{k}'")));
        }
    }
    let required = |key: &str| {
        get(key).ok_or_else(|| Error::parse(origin, 0, format!("missing key '{key}'")))
    };

    let name = required("name")?.1.clone();
    let (_, class_text, class_line) = required("class")?;
    let class = match class_text.to_ascii_lowercase().as_str() {
        "piezoelectric" | "piezo" => MaterialClass::Piezoelectric,
        "metal" => MaterialClass::Metal,
        other => {
            return Err(Error::parse(origin, *class_line, format!("unknown class '{other}'")))
        }
    };
    let (_, density_text, density_line) = required("density_kg_m3")?;
    let density: f64 = density_text
        .parse()
        .map_err(|_| Error::parse(origin, *density_line, "density is not a number"))?;

    let numbers = |key: &str, n: usize| -> Result<Option<Vec<f64>>> {
        let Some((_, text, line)) = get(key) else {
            return Ok(None);
        };
        let values: std::result::Result<Vec<f64>, _> = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(str::parse::<f64>)
            .collect();
        let values =
            values.map_err(|_| Error::parse(origin, *line, format!("'{key}' has a non-numeric entry")))?;
        if values.len() != n {
            return Err(Error::parse(
                origin,
                *line,
                format!("'{key}' needs {n} numbers, found {}", values.len()),
            ));
        }
        Ok(Some(values))
    };

    let c = numbers("cE_GPa", 36)?
        .ok_or_else(|| Error::parse(origin, 0, "missing key 'cE_GPa'"))?;
    let stiffness = Matrix6::from_row_iterator(c.into_iter().map(|v| v * 1e9));
    let piezo_e = match numbers("e_C_m2", 18)? {
        Some(v) => Matrix3x6::from_row_iterator(v),
        None if class == MaterialClass::Metal => Matrix3x6::zeros(),
        None => return Err(Error::parse(origin, 0, "missing key 'e_C_m2'")),
    };
    let permittivity = match numbers("epsS_relative", 9)? {
        Some(v) => Matrix3::from_row_iterator(v.into_iter().map(|x| x * EPSILON_0)),
        None if class == MaterialClass::Metal => Matrix3::identity() * EPSILON_0,
        None => return Err(Error::parse(origin, 0, "missing key 'epsS_relative'")),
    };

    let m = Material {
        name,
        class,
        density,
        stiffness,
        piezo_e,
        permittivity,
    };
    m.validate()?;
    Ok(m)
}
