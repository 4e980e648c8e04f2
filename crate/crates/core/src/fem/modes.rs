use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::constraints::{ConstrainedSystem, DofTarget};
use super::element::element_strains;
use super::mesh::{Mesh, Region};
use super::UnitCellSpec;
use crate::error::{Error, Result};

/// Share of the modal kinetic energy carried by each displacement component.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Polarization {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    X,
    Y,
    Z,
}

impl Polarization {
    pub fn fraction(&self, c: Component) -> f64 {
        match c {
            Component::X => self.x,
            Component::Y => self.y,
            Component::Z => self.z,
        }
    }

    pub fn dominant(&self) -> Component {
        if self.y >= self.x && self.y >= self.z {
            Component::Y
        } else if self.x >= self.z {
            Component::X
        } else {
            Component::Z
        }
    }
}

impl std::str::FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" | "ux" | "u_x" => Ok(Component::X),
            "y" | "uy" | "u_y" | "sh" => Ok(Component::Y),
            "z" | "uz" | "u_z" => Ok(Component::Z),
            other => Err(Error::Invalid(format!("unknown polarization '{other}'"))),
        }
    }
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Component::X => "x",
            Component::Y => "y",
            Component::Z => "z",
        })
    }
}

/// Strain energy split by region, per unit aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainEnergy {
    pub piezo: f64,
    pub metal: f64,
    pub eta: f64,
}

#[derive(Debug, Clone)]
pub struct ModeSolution {
    /// rad/s
    pub omega: f64,
    /// Hz
    pub frequency: f64,
    /// Nodal `(u_x, u_y, u_z)`, mass-normalised.
    pub displacement: Vec<[f64; 3]>,
    /// Nodal potential; zero on nodes without a potential dof.
    pub potential: Vec<f64>,
    pub energy_piezo: f64,
    pub energy_metal: f64,
    pub eta: f64,
    /// `(pᵀu)² / (uᵀK*u)` divided by the clamped electrode capacitance;
    /// proportional to the motional-to-static capacitance ratio.
    pub modal_coupling: f64,
    pub polarization: Polarization,
}

impl ModeSolution {
    pub fn phase_velocity(&self, wavelength: f64) -> f64 {
        self.frequency * wavelength
    }
}

/// Region-wise strain energy `½∫sᵀ·cE·s` of a nodal displacement field,
/// integrated with the assembly quadrature.
pub fn compute_eta(
    displacement: &[[f64; 3]],
    mesh: &Mesh,
    spec: &UnitCellSpec,
) -> Result<StrainEnergy> {
    if displacement.len() != mesh.n_nodes() {
        return Err(Error::Invalid(format!(
            "displacement has {} nodes, mesh has {}",
            displacement.len(),
            mesh.n_nodes()
        )));
    }
    let mut piezo = 0.0;
    let mut metal = 0.0;
    for (conn, &region) in mesh.elements.iter().zip(&mesh.regions) {
        let material = spec.material(region);
        let coords = conn.map(|n| mesh.nodes[n]);
        let disp = conn.map(|n| displacement[n]);
        let w: f64 = element_strains(&coords, &disp)?
            .iter()
            .map(|(s, dvol)| material.strain_energy_density(s) * dvol)
            .sum();
        match region {
            Region::Piezo => piezo += w,
            Region::Metal => metal += w,
        }
    }
    let total = piezo + metal;
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Invalid(format!(
            "degenerate mode: total strain energy {total:e}"
        )));
    }
    Ok(StrainEnergy {
        piezo,
        metal,
        eta: (piezo / total).clamp(0.0, 1.0),
    })
}

fn polarization(displacement: &[[f64; 3]], mesh: &Mesh, spec: &UnitCellSpec) -> Result<Polarization> {
    let mut k = [0.0; 3];
    for (conn, &region) in mesh.elements.iter().zip(&mesh.regions) {
        let rho = spec.material(region).density;
        let coords = conn.map(|n| mesh.nodes[n]);
        for gp in super::element::gauss_points(&coords)? {
            for (c, kc) in k.iter_mut().enumerate() {
                let u: f64 = (0..4).map(|a| gp.shape[a] * displacement[conn[a]][c]).sum();
                *kc += rho * u * u * gp.dvol;
            }
        }
    }
    let total: f64 = k.iter().sum();
    if total <= 0.0 {
        return Ok(Polarization::default());
    }
    Ok(Polarization {
        x: k[0] / total,
        y: k[1] / total,
        z: k[2] / total,
    })
}

/// Solves the shorted eigenproblem `K*·u = ω²·M·u` for the lowest
/// `n_modes` modes, ascending in frequency.
///
/// Potentials are condensed out, `K* = K_uu + K_uφ·K_φφ⁻¹·K_uφᵀ`, then
/// `M = L·Lᵀ` reduces the pencil to the standard symmetric problem
/// `L⁻¹·K*·L⁻ᵀ`, which is tridiagonalised and diagonalised densely.
pub fn solve_modes(
    system: &ConstrainedSystem,
    mesh: &Mesh,
    spec: &UnitCellSpec,
    n_modes: usize,
) -> Result<Vec<ModeSolution>> {
    let n_u = system.n_u();
    if n_modes == 0 {
        return Ok(Vec::new());
    }

    // Static condensation of the potential dofs.
    let mut k_star = system.k_uu.clone();
    let mut phi_of_u: Option<DMatrix<f64>> = None;
    let mut drive = -system.drive_u.clone();
    let mut c0 = system.drive_ee;
    if system.n_phi() > 0 {
        let chol = system
            .k_phiphi
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("dielectric block K_phiphi".into()))?;
        let coupling_t = system.k_uphi.transpose();
        let x = chol
            .l()
            .solve_lower_triangular(&coupling_t)
            .ok_or_else(|| Error::Singular("dielectric factor".into()))?;
        k_star += x.transpose() * &x;
        let phi = chol.solve(&coupling_t);
        let kinv_drive = chol.solve(&system.drive_phi);
        drive += &system.k_uphi * &kinv_drive;
        c0 -= system.drive_phi.dot(&kinv_drive);
        phi_of_u = Some(phi);
    }
    symmetrize(&mut k_star);

    let mass_chol = system
        .mass
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("mass matrix is not positive definite".into()))?;
    let l = mass_chol.l();
    let b = l
        .solve_lower_triangular(&k_star)
        .ok_or_else(|| Error::Singular("mass factor".into()))?;
    let mut a = l
        .solve_lower_triangular(&b.transpose())
        .ok_or_else(|| Error::Singular("mass factor".into()))?;
    symmetrize(&mut a);

    let eig = SymmetricEigen::try_new(a, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("symmetric QR iteration did not converge".into()))?;
    let scale = eig.eigenvalues.amax();
    let mut order: Vec<usize> = (0..n_u).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    if let Some(&lowest) = order.first() {
        let lam = eig.eigenvalues[lowest];
        if lam < -1e-6 * scale {
            return Err(Error::Eigen(format!(
                "negative eigenvalue {lam:e} (scale {scale:e}) indicates an assembly error"
            )));
        }
    }

    let lt = l.transpose();
    let mut modes = Vec::with_capacity(n_modes);
    for &idx in order.iter() {
        if modes.len() == n_modes {
            break;
        }
        let lam = eig.eigenvalues[idx];
        if lam <= 0.0 {
            continue;
        }
        let y = eig.eigenvectors.column(idx).into_owned();
        let mut u = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::Singular("mass factor".into()))?;
        normalize_sign(&mut u);

        let phi_free = phi_of_u.as_ref().map(|p| p * &u);
        let displacement = expand_displacement(system, mesh, &u);
        let potential = expand_potential(system, mesh, phi_free.as_ref());
        let energy = compute_eta(&displacement, mesh, spec)?;
        let stored = u.dot(&(&k_star * &u));
        let modal_coupling = if c0 > 0.0 && stored > 0.0 {
            drive.dot(&u).powi(2) / stored / c0
        } else {
            0.0
        };
        let omega = lam.sqrt();
        modes.push(ModeSolution {
            omega,
            frequency: omega / (2.0 * std::f64::consts::PI),
            polarization: polarization(&displacement, mesh, spec)?,
            displacement,
            potential,
            energy_piezo: energy.piezo,
            energy_metal: energy.metal,
            eta: energy.eta,
            modal_coupling,
        });
    }
    Ok(modes)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest-magnitude entry made positive so runs are reproducible.
fn normalize_sign(u: &mut DVector<f64>) {
    if let Some((_, &v)) = u
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
    {
        if v < 0.0 {
            u.neg_mut();
        }
    }
}

fn expand_displacement(system: &ConstrainedSystem, mesh: &Mesh, u: &DVector<f64>) -> Vec<[f64; 3]> {
    (0..mesh.n_nodes())
        .map(|n| {
            let mut d = [0.0; 3];
            for (c, slot) in d.iter_mut().enumerate() {
                if let DofTarget::Free { index, sign } = system.mech_map[3 * n + c] {
                    *slot = sign * u[index];
                }
            }
            d
        })
        .collect()
}

fn expand_potential(
    system: &ConstrainedSystem,
    mesh: &Mesh,
    phi_free: Option<&DVector<f64>>,
) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_nodes()];
    let Some(phi) = phi_free else { return out };
    let mut p = 0;
    for (n, slot) in out.iter_mut().enumerate() {
        if !mesh.is_piezo_node(n) {
            continue;
        }
        if let Some(DofTarget::Free { index, sign }) = system.potential_map[p] {
            *slot = sign * phi[index];
        }
        p += 1;
    }
    out
}

/// Picks the most strongly driven mode, optionally restricted to a
/// frequency window (Hz, inclusive). Ties go to the lower frequency.
pub fn select_mode(modes: &[ModeSolution], window: Option<(f64, f64)>) -> Result<&ModeSolution> {
    select_mode_with(
        modes,
        &ModeSelector {
            window,
            component: None,
        },
    )
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModeSelector {
    /// Hz, inclusive.
    pub window: Option<(f64, f64)>,
    /// Keep only modes whose dominant displacement is this component.
    pub component: Option<Component>,
}

pub fn select_mode_with<'a>(
    modes: &'a [ModeSolution],
    selector: &ModeSelector,
) -> Result<&'a ModeSolution> {
    if modes.is_empty() {
        return Err(Error::Invalid("no candidate modes".into()));
    }
    modes
        .iter()
        .filter(|m| {
            selector
                .window
                .is_none_or(|(lo, hi)| m.frequency >= lo && m.frequency <= hi)
        })
        .filter(|m| {
            selector
                .component
                .is_none_or(|c| m.polarization.dominant() == c)
        })
        .min_by(|a, b| {
            b.modal_coupling
                .total_cmp(&a.modal_coupling)
                .then(a.frequency.total_cmp(&b.frequency))
        })
        .ok_or_else(|| {
            Error::Invalid(format!(
                "no mode inside selection window {:?} with polarization {:?}",
                selector.window, selector.component
            ))
        })
}
