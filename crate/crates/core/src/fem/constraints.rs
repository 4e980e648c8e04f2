use nalgebra::{DMatrix, DVector};

use super::assembly::AssembledSystem;
use super::mesh::Mesh;
use super::{LateralBc, UnitCellSpec};
use crate::error::{Error, Result};

/// Where an unconstrained dof ends up after constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DofTarget {
    /// `u_full = sign · u_reduced[index]`
    Free { index: usize, sign: f64 },
    /// Prescribed potential per volt of electrode drive. Zero for grounded
    /// or gauge-pinned nodes that do not belong to an electrode.
    Fixed { drive: f64 },
}

/// Antiperiodic, short-circuited system in reduced coordinates.
///
/// The `drive_*` terms hold the coupling to the electrode pattern
/// `+½ V` (left strip) / `−½ V` (right strip); they are unused by the
/// shorted eigenproblem and only feed the modal excitability.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem {
    pub mech_map: Vec<DofTarget>,
    pub potential_map: Vec<Option<DofTarget>>,
    pub k_uu: DMatrix<f64>,
    pub k_uphi: DMatrix<f64>,
    pub k_phiphi: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub drive_u: DVector<f64>,
    pub drive_phi: DVector<f64>,
    pub drive_ee: f64,
    pub tied_mech: usize,
    pub tied_potential: usize,
    pub grounded: usize,
    pub gauge_pinned: bool,
}

impl ConstrainedSystem {
    pub fn n_u(&self) -> usize {
        self.k_uu.nrows()
    }

    pub fn n_phi(&self) -> usize {
        self.k_phiphi.nrows()
    }

    pub fn has_electrodes(&self) -> bool {
        self.grounded > 0
    }
}

pub fn apply_bcs(
    system: &AssembledSystem,
    mesh: &Mesh,
    spec: &UnitCellSpec,
) -> Result<ConstrainedSystem> {
    if system.n_mech != 3 * mesh.n_nodes() || system.potential_index.len() != mesh.n_nodes() {
        return Err(Error::Invalid("assembled system does not match mesh".into()));
    }
    match spec.lateral_bc {
        LateralBc::Antiperiodic => {}
    }
    let is_right = {
        let mut v = vec![false; mesh.n_nodes()];
        for &n in &mesh.right {
            v[n] = true;
        }
        v
    };

    let mut mech_map = vec![DofTarget::Fixed { drive: 0.0 }; system.n_mech];
    let mut n_u = 0;
    for n in (0..mesh.n_nodes()).filter(|&n| !is_right[n]) {
        for c in 0..3 {
            mech_map[3 * n + c] = DofTarget::Free { index: n_u, sign: 1.0 };
            n_u += 1;
        }
    }
    for &n in &mesh.right {
        let partner = mesh
            .left_partner(n)
            .ok_or_else(|| Error::Invalid(format!("right node {n} has no left partner")))?;
        for c in 0..3 {
            mech_map[3 * n + c] = flip(mech_map[3 * partner + c]);
        }
    }

    let mut electrode_drive = vec![None; mesh.n_nodes()];
    for &n in &mesh.electrode {
        let column = mesh.lattice[n].0;
        electrode_drive[n] = Some(if mesh.is_left_strip_column(column) { 0.5 } else { -0.5 });
    }

    let build_potential_map = |pin_first: bool| -> Result<Vec<Option<DofTarget>>> {
        let mut map = vec![None; system.n_potential];
        let mut next = 0;
        let mut pinned = !pin_first;
        for n in (0..mesh.n_nodes()).filter(|&n| !is_right[n]) {
            let Some(p) = system.potential_index[n] else { continue };
            map[p] = Some(if let Some(d) = electrode_drive[n] {
                DofTarget::Fixed { drive: d }
            } else if !pinned {
                pinned = true;
                DofTarget::Fixed { drive: 0.0 }
            } else {
                next += 1;
                DofTarget::Free { index: next - 1, sign: 1.0 }
            });
        }
        for &n in &mesh.right {
            let Some(p) = system.potential_index[n] else { continue };
            map[p] = Some(if let Some(d) = electrode_drive[n] {
                DofTarget::Fixed { drive: d }
            } else {
                let partner = mesh.left_partner(n).expect("checked above");
                let pp = system.potential_index[partner].expect("partner is piezo");
                flip(map[pp].expect("left side mapped first"))
            });
        }
        Ok(map)
    };

    let tied_mech = 3 * mesh.right.len();
    let tied_potential = mesh
        .right
        .iter()
        .filter(|&&n| system.potential_index[n].is_some() && electrode_drive[n].is_none())
        .count();
    let grounded = mesh.electrode.len();

    let mut potential_map = build_potential_map(false)?;
    let mut reduced = reduce(system, &mech_map, &potential_map, n_u);
    let mut gauge_pinned = false;
    if grounded == 0 && reduced.k_phiphi.nrows() > 0 && reduced.k_phiphi.clone().cholesky().is_none() {
        potential_map = build_potential_map(true)?;
        reduced = reduce(system, &mech_map, &potential_map, n_u);
        gauge_pinned = true;
    }

    Ok(ConstrainedSystem {
        mech_map,
        potential_map,
        k_uu: reduced.k_uu,
        k_uphi: reduced.k_uphi,
        k_phiphi: reduced.k_phiphi,
        mass: reduced.mass,
        drive_u: reduced.drive_u,
        drive_phi: reduced.drive_phi,
        drive_ee: reduced.drive_ee,
        tied_mech,
        tied_potential,
        grounded,
        gauge_pinned,
    })
}

fn flip(t: DofTarget) -> DofTarget {
    match t {
        DofTarget::Free { index, sign } => DofTarget::Free { index, sign: -sign },
        DofTarget::Fixed { drive } => DofTarget::Fixed { drive: -drive },
    }
}

struct Reduced {
    k_uu: DMatrix<f64>,
    k_uphi: DMatrix<f64>,
    k_phiphi: DMatrix<f64>,
    mass: DMatrix<f64>,
    drive_u: DVector<f64>,
    drive_phi: DVector<f64>,
    drive_ee: f64,
}

fn reduce(
    system: &AssembledSystem,
    mech_map: &[DofTarget],
    potential_map: &[Option<DofTarget>],
    n_u: usize,
) -> Reduced {
    let n_phi = potential_map
        .iter()
        .flatten()
        .filter_map(|t| match t {
            DofTarget::Free { index, .. } => Some(index + 1),
            DofTarget::Fixed { .. } => None,
        })
        .max()
        .unwrap_or(0);
    let pot = |p: usize| potential_map[p].expect("potential dof mapped");

    let mut k_uu = DMatrix::zeros(n_u, n_u);
    let mut mass = DMatrix::zeros(n_u, n_u);
    for (src, dst) in [(&system.k_uu, &mut k_uu), (&system.mass, &mut mass)] {
        for &(i, j, v) in &src.entries {
            if let (DofTarget::Free { index: a, sign: sa }, DofTarget::Free { index: b, sign: sb }) =
                (mech_map[i], mech_map[j])
            {
                dst[(a, b)] += sa * sb * v;
            }
        }
    }

    let mut k_uphi = DMatrix::zeros(n_u, n_phi);
    let mut drive_u = DVector::zeros(n_u);
    for &(i, p, v) in &system.k_uphi.entries {
        let DofTarget::Free { index: a, sign: sa } = mech_map[i] else { continue };
        match pot(p) {
            DofTarget::Free { index: b, sign: sb } => k_uphi[(a, b)] += sa * sb * v,
            DofTarget::Fixed { drive } => drive_u[a] += sa * drive * v,
        }
    }

    let mut k_phiphi = DMatrix::zeros(n_phi, n_phi);
    let mut drive_phi = DVector::zeros(n_phi);
    let mut drive_ee = 0.0;
    for &(p, q, v) in &system.k_phiphi.entries {
        match (pot(p), pot(q)) {
            (DofTarget::Free { index: a, sign: sa }, DofTarget::Free { index: b, sign: sb }) => {
                k_phiphi[(a, b)] += sa * sb * v
            }
            (DofTarget::Free { index: a, sign: sa }, DofTarget::Fixed { drive }) => {
                drive_phi[a] += sa * drive * v
            }
            (DofTarget::Fixed { .. }, DofTarget::Free { .. }) => {}
            (DofTarget::Fixed { drive: da }, DofTarget::Fixed { drive: db }) => {
                drive_ee += da * db * v
            }
        }
    }

    Reduced {
        k_uu,
        k_uphi,
        k_phiphi,
        mass,
        drive_u,
        drive_phi,
        drive_ee,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::tests::iso_spec;
    use crate::fem::{assemble, build_mesh};

    fn constrained(h: f64, tm: f64, coverage: f64) -> (Mesh, AssembledSystem, ConstrainedSystem) {
        let mut spec = iso_spec(h, tm);
        spec.coverage = coverage;
        let mesh = build_mesh(&spec).unwrap();
        let sys = assemble(&mesh, &spec).unwrap();
        let c = apply_bcs(&sys, &mesh, &spec).unwrap();
        (mesh, sys, c)
    }

    #[test]
    fn dimension_counting() {
        for (tm, cov) in [(0.1, 0.5), (0.0, 0.5), (0.0, 0.0), (0.3, 1.0)] {
            let (mesh, sys, c) = constrained(0.1, tm, cov);
            let full = sys.n_mech + sys.n_potential;
            assert_eq!(
                c.n_u() + c.n_phi(),
                full - c.tied_mech - c.tied_potential - c.grounded,
                "tm {tm} cov {cov}"
            );
            assert_eq!(c.tied_mech, 3 * mesh.right.len());
            assert_eq!(c.grounded, mesh.electrode.len());
            assert!(!c.gauge_pinned);
        }
    }

    #[test]
    fn reduced_matrices_symmetric() {
        let (_, _, c) = constrained(0.2, 0.2, 0.5);
        assert!((&c.k_uu - c.k_uu.transpose()).amax() <= 1e-9 * c.k_uu.amax());
        assert!((&c.mass - c.mass.transpose()).amax() <= 1e-9 * c.mass.amax());
        assert!((&c.k_phiphi - c.k_phiphi.transpose()).amax() <= 1e-9 * c.k_phiphi.amax());
    }

    #[test]
    fn antiperiodic_potential_needs_no_gauge() {
        let (_, _, c) = constrained(0.1, 0.0, 0.0);
        assert_eq!(c.grounded, 0);
        assert!(!c.gauge_pinned);
        assert!(c.k_phiphi.clone().cholesky().is_some());
    }

    #[test]
    fn right_boundary_maps_with_sign_flip() {
        let (mesh, _, c) = constrained(0.1, 0.1, 0.5);
        for &r in &mesh.right {
            let l = mesh.left_partner(r).unwrap();
            for k in 0..3 {
                match (c.mech_map[3 * l + k], c.mech_map[3 * r + k]) {
                    (DofTarget::Free { index: a, sign: sa }, DofTarget::Free { index: b, sign: sb }) => {
                        assert_eq!(a, b);
                        assert_eq!(sa, -sb);
                    }
                    other => panic!("unexpected {other:?}"),
                }
            }
        }
    }
}
