//! Bilinear quadrilateral in the `(x, z)` plane with `∂/∂y = 0`.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};

pub type StrainMatrix = SMatrix<f64, 6, 12>;
pub type GradMatrix = SMatrix<f64, 3, 4>;

const G: f64 = 0.577_350_269_189_625_8;

/// `(ξ, η, weight)` of the 2×2 Gauss rule.
pub const GAUSS_2X2: [(f64, f64, f64); 4] = [(-G, -G, 1.0), (G, -G, 1.0), (G, G, 1.0), (-G, G, 1.0)];

const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

#[derive(Debug, Clone, Copy)]
pub(crate) struct GaussPoint {
    pub shape: [f64; 4],
    pub dndx: [f64; 4],
    pub dndz: [f64; 4],
    /// Quadrature weight times Jacobian determinant.
    pub dvol: f64,
}

pub(crate) fn gauss_points(coords: &[[f64; 2]; 4]) -> Result<[GaussPoint; 4]> {
    let mut out = [GaussPoint {
        shape: [0.0; 4],
        dndx: [0.0; 4],
        dndz: [0.0; 4],
        dvol: 0.0,
    }; 4];
    for (gp, &(xi, eta, w)) in out.iter_mut().zip(GAUSS_2X2.iter()) {
        let mut dxi = [0.0; 4];
        let mut deta = [0.0; 4];
        for (a, &(xa, ea)) in CORNERS.iter().enumerate() {
            gp.shape[a] = 0.25 * (1.0 + xi * xa) * (1.0 + eta * ea);
            dxi[a] = 0.25 * xa * (1.0 + eta * ea);
            deta[a] = 0.25 * ea * (1.0 + xi * xa);
        }
        let (mut j11, mut j12, mut j21, mut j22) = (0.0, 0.0, 0.0, 0.0);
        for a in 0..4 {
            j11 += dxi[a] * coords[a][0];
            j12 += dxi[a] * coords[a][1];
            j21 += deta[a] * coords[a][0];
            j22 += deta[a] * coords[a][1];
        }
        let det = j11 * j22 - j12 * j21;
        if !(det.is_finite() && det > 0.0) {
            return Err(Error::Singular(format!(
                "element Jacobian determinant {det:e} at Gauss point ({xi:.3}, {eta:.3})"
            )));
        }
        for a in 0..4 {
            gp.dndx[a] = (j22 * dxi[a] - j12 * deta[a]) / det;
            gp.dndz[a] = (-j21 * dxi[a] + j11 * deta[a]) / det;
        }
        gp.dvol = w * det;
    }
    Ok(out)
}

/// Voigt strain (engineering shear) from nodal displacements, 12 rows in
/// node-major `(u_x, u_y, u_z)` order.
pub(crate) fn strain_matrix(gp: &GaussPoint) -> StrainMatrix {
    let mut b = StrainMatrix::zeros();
    for a in 0..4 {
        let (nx, nz) = (gp.dndx[a], gp.dndz[a]);
        let c = 3 * a;
        b[(0, c)] = nx; // S_xx
        b[(2, c + 2)] = nz; // S_zz
        b[(3, c + 1)] = nz; // 2 S_yz
        b[(4, c)] = nz; // 2 S_xz
        b[(4, c + 2)] = nx;
        b[(5, c + 1)] = nx; // 2 S_xy
    }
    b
}

/// Potential gradient `(∂x, ∂y, ∂z)·φ`.
pub(crate) fn grad_matrix(gp: &GaussPoint) -> GradMatrix {
    let mut b = GradMatrix::zeros();
    for a in 0..4 {
        b[(0, a)] = gp.dndx[a];
        b[(2, a)] = gp.dndz[a];
    }
    b
}

/// Voigt strains at the four Gauss points and their `weight·det J`.
pub fn element_strains(
    coords: &[[f64; 2]; 4],
    displacement: &[[f64; 3]; 4],
) -> Result<[(SVector<f64, 6>, f64); 4]> {
    let gps = gauss_points(coords)?;
    let mut ue = SVector::<f64, 12>::zeros();
    for (a, u) in displacement.iter().enumerate() {
        for c in 0..3 {
            ue[3 * a + c] = u[c];
        }
    }
    let mut out = [(SVector::<f64, 6>::zeros(), 0.0); 4];
    for (slot, gp) in out.iter_mut().zip(gps.iter()) {
        *slot = (strain_matrix(gp) * ue, gp.dvol);
    }
    Ok(out)
}
