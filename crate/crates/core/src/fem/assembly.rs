use nalgebra::{DMatrix, SMatrix};

use super::element::{gauss_points, grad_matrix, strain_matrix};
use super::mesh::{Mesh, Region};
use super::UnitCellSpec;
use crate::error::Result;

/// Coordinate-format sparse matrix; duplicate entries are summed.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    fn new(rows: usize, cols: usize) -> Self {
        Triplets {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }
}

/// Unconstrained element contributions.
///
/// Mechanical dof of node `n`, component `c` is `3n + c`. Potential dofs
/// exist only on piezoelectric nodes and are numbered by
/// [`AssembledSystem::potential_index`]. `k_phiphi` is the positive
/// dielectric matrix `∫ ∇Nᵀ εS ∇N`, so the coupled equations read
/// `K_uu u + K_uφ φ = ω² M u` and `K_uφᵀ u − K_φφ φ = 0`.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub n_mech: usize,
    pub n_potential: usize,
    pub potential_index: Vec<Option<usize>>,
    pub k_uu: Triplets,
    pub k_uphi: Triplets,
    pub k_phiphi: Triplets,
    pub mass: Triplets,
}

pub fn assemble(mesh: &Mesh, spec: &UnitCellSpec) -> Result<AssembledSystem> {
    let n_mech = 3 * mesh.n_nodes();
    let mut potential_index = vec![None; mesh.n_nodes()];
    let mut n_potential = 0;
    for (n, slot) in potential_index.iter_mut().enumerate() {
        if mesh.is_piezo_node(n) {
            *slot = Some(n_potential);
            n_potential += 1;
        }
    }

    let mut k_uu = Triplets::new(n_mech, n_mech);
    let mut k_uphi = Triplets::new(n_mech, n_potential);
    let mut k_phiphi = Triplets::new(n_potential, n_potential);
    let mut mass = Triplets::new(n_mech, n_mech);

    for (conn, &region) in mesh.elements.iter().zip(&mesh.regions) {
        let material = spec.material(region);
        let coords = conn.map(|n| mesh.nodes[n]);
        let gps = gauss_points(&coords)?;

        let mut ke = SMatrix::<f64, 12, 12>::zeros();
        let mut me = SMatrix::<f64, 4, 4>::zeros();
        let mut kc = SMatrix::<f64, 12, 4>::zeros();
        let mut kd = SMatrix::<f64, 4, 4>::zeros();
        let piezo = region == Region::Piezo;
        for gp in &gps {
            let b = strain_matrix(gp);
            ke += b.transpose() * material.stiffness * b * gp.dvol;
            for a in 0..4 {
                for c in 0..4 {
                    me[(a, c)] += material.density * gp.shape[a] * gp.shape[c] * gp.dvol;
                }
            }
            if piezo {
                let g = grad_matrix(gp);
                kc += b.transpose() * material.piezo_e.transpose() * g * gp.dvol;
                kd += g.transpose() * material.permittivity * g * gp.dvol;
            }
        }

        let dofs: Vec<usize> = conn
            .iter()
            .flat_map(|&n| (0..3).map(move |c| 3 * n + c))
            .collect();
        for (r, &gr) in dofs.iter().enumerate() {
            for (c, &gc) in dofs.iter().enumerate() {
                k_uu.entries.push((gr, gc, ke[(r, c)]));
            }
        }
        for a in 0..4 {
            for c in 0..4 {
                for comp in 0..3 {
                    mass.entries
                        .push((3 * conn[a] + comp, 3 * conn[c] + comp, me[(a, c)]));
                }
            }
        }
        if piezo {
            let pdofs = conn.map(|n| potential_index[n].expect("piezo node has potential"));
            for (r, &gr) in dofs.iter().enumerate() {
                for (c, &gc) in pdofs.iter().enumerate() {
                    k_uphi.entries.push((gr, gc, kc[(r, c)]));
                }
            }
            for (r, &gr) in pdofs.iter().enumerate() {
                for (c, &gc) in pdofs.iter().enumerate() {
                    k_phiphi.entries.push((gr, gc, kd[(r, c)]));
                }
            }
        }
    }

    Ok(AssembledSystem {
        n_mech,
        n_potential,
        potential_index,
        k_uu,
        k_uphi,
        k_phiphi,
        mass,
    })
}
