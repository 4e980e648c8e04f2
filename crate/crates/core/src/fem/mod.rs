//! Piezoelectric unit-cell eigenanalysis.
//!
//! The cell is a `λ/2`-wide slice of an infinite interdigitated plate: film
//! of thickness `h` with two half-electrode strips of thickness `t_m` on its
//! top surface, one at each lateral edge. Fields do not vary along the
//! aperture (`∂/∂y = 0`), but all three displacement components are kept.
//! Adjacent cells carry opposite electrode polarity, so the lateral faces are
//! tied antiperiodically.
//!
//! The pipeline is [`build_mesh`] → [`assemble`] → [`apply_bcs`] →
//! [`solve_modes`]; [`solve_unit_cell`] runs all four.

mod assembly;
mod constraints;
mod element;
mod mesh;
mod modes;

use std::io::Write;
use std::path::Path;

pub use assembly::{assemble, AssembledSystem, Triplets};
pub use constraints::{apply_bcs, ConstrainedSystem, DofTarget};
pub use element::{element_strains, GAUSS_2X2};
pub use mesh::{build_mesh, Mesh, Region};
pub use modes::{
    compute_eta, select_mode, select_mode_with, solve_modes, Component, ModeSelector, ModeSolution,
    Polarization, StrainEnergy,
};

use crate::error::{Error, Result};
use crate::materials::{Material, MaterialClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LateralBc {
    #[default]
    Antiperiodic,
}

#[derive(Debug, Clone)]
pub struct UnitCellSpec {
    /// λ, m
    pub wavelength: f64,
    /// h, m
    pub film_thickness: f64,
    /// t_m, m
    pub metal_thickness: f64,
    /// Fraction of the top surface covered by the two strips.
    pub coverage: f64,
    pub piezo: Material,
    pub metal: Material,
    pub mesh_nx: usize,
    pub mesh_nz_film: usize,
    pub mesh_nz_metal: usize,
    pub lateral_bc: LateralBc,
}

impl UnitCellSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.wavelength) || !positive(self.film_thickness) {
            return Err(Error::Validation(
                "wavelength and film thickness must be positive".into(),
            ));
        }
        if !(self.metal_thickness.is_finite() && self.metal_thickness >= 0.0) {
            return Err(Error::Validation("metal thickness must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.coverage) {
            return Err(Error::Validation(format!(
                "electrode coverage {} outside [0, 1]",
                self.coverage
            )));
        }
        if self.mesh_nx < 2 || self.mesh_nz_film < 2 || self.mesh_nz_metal < 2 {
            return Err(Error::Validation("mesh counts must be at least 2".into()));
        }
        if self.metal.class != MaterialClass::Metal {
            return Err(Error::Validation(format!(
                "electrode material '{}' is not a metal",
                self.metal.name
            )));
        }
        self.piezo.validate()?;
        self.metal.validate()
    }

    pub fn h_over_lambda(&self) -> f64 {
        self.film_thickness / self.wavelength
    }

    pub fn tm_over_h(&self) -> f64 {
        self.metal_thickness / self.film_thickness
    }

    pub fn material(&self, region: Region) -> &Material {
        match region {
            Region::Piezo => &self.piezo,
            Region::Metal => &self.metal,
        }
    }
}

/// Meshes, assembles, constrains and solves for the `n_modes` lowest modes.
pub fn solve_unit_cell(spec: &UnitCellSpec, n_modes: usize) -> Result<(Mesh, Vec<ModeSolution>)> {
    let mesh = build_mesh(spec)?;
    let system = assemble(&mesh, spec)?;
    let constrained = apply_bcs(&system, &mesh, spec)?;
    let modes = solve_modes(&constrained, &mesh, spec, n_modes)?;
    Ok((mesh, modes))
}

/// Writes a node table (`node,x,z,region,u_x,u_y,u_z,phi`) for plotting.
/// Nodes touching any piezoelectric element are tagged `piezo`.
pub fn write_mode_csv(path: impl AsRef<Path>, mesh: &Mesh, mode: &ModeSolution) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("node,x,z,region,u_x,u_y,u_z,phi\n");
    for (n, xz) in mesh.nodes.iter().enumerate() {
        let region = if mesh.is_piezo_node(n) { "piezo" } else { "metal" };
        let u = mode.displacement[n];
        out.push_str(&format!(
            "{n},{},{},{region},{},{},{},{}\n",
            xz[0], xz[1], u[0], u[1], u[2], mode.potential[n]
        ));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn iso(class: MaterialClass) -> Material {
        Material::isotropic("iso-test", class, 50e9, 25e9, 5000.0).unwrap()
    }

    /// Isotropic test solid in both layers, λ = 10 µm.
    pub(crate) fn iso_spec(h_over_lambda: f64, tm_over_h: f64) -> UnitCellSpec {
        let wavelength = 10e-6;
        let h = h_over_lambda * wavelength;
        UnitCellSpec {
            wavelength,
            film_thickness: h,
            metal_thickness: tm_over_h * h,
            coverage: 0.5,
            piezo: iso(MaterialClass::Piezoelectric),
            metal: iso(MaterialClass::Metal),
            mesh_nx: 16,
            mesh_nz_film: 4,
            mesh_nz_metal: 2,
            lateral_bc: LateralBc::Antiperiodic,
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = iso_spec(0.1, 0.1);
        assert!(s.validate().is_ok());
        s.coverage = 1.5;
        assert!(s.validate().is_err());
        let mut s = iso_spec(0.1, 0.1);
        s.mesh_nz_metal = 1;
        assert!(s.validate().is_err());
        let mut s = iso_spec(0.1, 0.1);
        s.metal = iso(MaterialClass::Piezoelectric);
        assert!(s.validate().is_err());
    }
}
