use crate::error::{Error, Result};
use crate::fem::UnitCellSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Piezo,
    Metal,
}

/// Structured quadrilateral mesh of the half-wavelength cell.
///
/// Nodes live on an `(nx+1) × (nz_film+nz_metal+1)` lattice; lattice points
/// above the film are only instantiated under the two electrode strips.
#[derive(Debug, Clone)]
pub struct Mesh {
    /// `(x, z)` in metres; `z = 0` is the bottom of the film.
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise node ids.
    pub elements: Vec<[usize; 4]>,
    pub regions: Vec<Region>,
    /// Lattice position `(column, row)` per node.
    pub lattice: Vec<(usize, usize)>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub top: Vec<usize>,
    pub bottom: Vec<usize>,
    /// Film-surface nodes in contact with an electrode.
    pub electrode: Vec<usize>,
    /// Element columns covered by each electrode strip.
    pub metal_columns: usize,
    /// Coverage actually realised on this grid, `4·metal_columns/(2·nx)`.
    pub effective_coverage: f64,
    pub nx: usize,
    pub nz_film: usize,
    pub nz_metal: usize,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_metal_elements(&self) -> usize {
        self.regions.iter().filter(|r| **r == Region::Metal).count()
    }

    /// Node belongs to at least one piezoelectric element.
    pub fn is_piezo_node(&self, node: usize) -> bool {
        self.lattice[node].1 <= self.nz_film
    }

    /// Left-boundary partner of a right-boundary node.
    pub fn left_partner(&self, node: usize) -> Option<usize> {
        let (i, j) = self.lattice[node];
        if i != self.nx {
            return None;
        }
        self.left.iter().copied().find(|&n| self.lattice[n].1 == j)
    }

    pub fn is_left_strip_column(&self, column: usize) -> bool {
        column <= self.metal_columns
    }
}

/// Builds the unit-cell mesh for `spec`.
pub fn build_mesh(spec: &UnitCellSpec) -> Result<Mesh> {
    spec.validate()?;
    let nx = spec.mesh_nx;
    let nz_film = spec.mesh_nz_film;
    let width = 0.5 * spec.wavelength;
    let dx = width / nx as f64;

    let has_electrodes = spec.coverage > 0.0;
    let strip_width = spec.coverage * spec.wavelength / 4.0;
    let metal_columns = if has_electrodes {
        if strip_width < dx * (1.0 - 1e-9) {
            return Err(Error::Refinement(format!(
                "electrode strip width {strip_width:.3e} m is below one element width {dx:.3e} m; \
                 increase mesh_nx to at least {}",
                (width / strip_width).ceil() as usize
            )));
        }
        ((spec.coverage * nx as f64 / 2.0).round() as usize).clamp(1, nx / 2)
    } else {
        0
    };
    let has_metal = has_electrodes && spec.metal_thickness > 0.0;
    let nz_metal = if has_metal { spec.mesh_nz_metal } else { 0 };
    let rows = nz_film + nz_metal;

    let in_strip = |i: usize| i <= metal_columns || i >= nx - metal_columns;
    let node_exists = |i: usize, j: usize| j <= nz_film || (has_metal && in_strip(i));

    let z_of = |j: usize| {
        if j <= nz_film {
            spec.film_thickness * j as f64 / nz_film as f64
        } else {
            spec.film_thickness
                + spec.metal_thickness * (j - nz_film) as f64 / nz_metal as f64
        }
    };

    let mut ids = vec![vec![usize::MAX; rows + 1]; nx + 1];
    let mut nodes = Vec::new();
    let mut lattice = Vec::new();
    for j in 0..=rows {
        for (i, column) in ids.iter_mut().enumerate() {
            if node_exists(i, j) {
                column[j] = nodes.len();
                nodes.push([dx * i as f64, z_of(j)]);
                lattice.push((i, j));
            }
        }
    }

    let mut elements = Vec::new();
    let mut regions = Vec::new();
    for j in 0..rows {
        for i in 0..nx {
            let is_film = j < nz_film;
            let is_metal = !is_film && (i < metal_columns || i >= nx - metal_columns);
            if !(is_film || is_metal) {
                continue;
            }
            elements.push([ids[i][j], ids[i + 1][j], ids[i + 1][j + 1], ids[i][j + 1]]);
            regions.push(if is_film { Region::Piezo } else { Region::Metal });
        }
    }

    let collect = |pred: &dyn Fn(usize, usize) -> bool| -> Vec<usize> {
        lattice
            .iter()
            .enumerate()
            .filter(|(_, &(i, j))| pred(i, j))
            .map(|(n, _)| n)
            .collect()
    };
    let left = collect(&|i, _| i == 0);
    let right = collect(&|i, _| i == nx);
    let bottom = collect(&|_, j| j == 0);
    let top = collect(&|i, j| {
        if has_metal && in_strip(i) {
            j == rows
        } else {
            j == nz_film
        }
    });
    let electrode = if has_electrodes {
        collect(&|i, j| j == nz_film && in_strip(i))
    } else {
        Vec::new()
    };

    Ok(Mesh {
        nodes,
        elements,
        regions,
        lattice,
        left,
        right,
        top,
        bottom,
        electrode,
        metal_columns,
        effective_coverage: 4.0 * metal_columns as f64 * dx / spec.wavelength,
        nx,
        nz_film,
        nz_metal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::tests::iso_spec;

    #[test]
    fn bare_plate_has_no_metal() {
        let mut spec = iso_spec(0.1, 0.0);
        spec.coverage = 0.0;
        let mesh = build_mesh(&spec).unwrap();
        assert_eq!(mesh.n_metal_elements(), 0);
        assert!(mesh.electrode.is_empty());
        assert_eq!(mesh.n_elements(), spec.mesh_nx * spec.mesh_nz_film);
    }

    #[test]
    fn half_coverage_column_count() {
        let mut spec = iso_spec(0.1, 0.1);
        spec.mesh_nx = 16;
        spec.coverage = 0.5;
        let mesh = build_mesh(&spec).unwrap();
        assert_eq!(mesh.metal_columns, 4);
        let metal_cols: std::collections::BTreeSet<usize> = mesh
            .elements
            .iter()
            .zip(&mesh.regions)
            .filter(|(_, r)| **r == Region::Metal)
            .map(|(e, _)| mesh.lattice[e[0]].0)
            .collect();
        assert_eq!(metal_cols.into_iter().collect::<Vec<_>>(), vec![0, 1, 2, 3, 12, 13, 14, 15]);
        assert_eq!(
            mesh.n_elements(),
            spec.mesh_nx * spec.mesh_nz_film + 2 * mesh.metal_columns * spec.mesh_nz_metal
        );
        assert!((mesh.effective_coverage - 0.5).abs() < 1e-12);
    }

    #[test]
    fn strip_narrower_than_element_is_refinement_error() {
        let mut spec = iso_spec(0.1, 0.1);
        spec.mesh_nx = 4;
        spec.coverage = 0.2;
        assert!(matches!(build_mesh(&spec), Err(Error::Refinement(_))));
    }

    #[test]
    fn boundary_sets_pair_up() {
        let spec = iso_spec(0.2, 0.25);
        let mesh = build_mesh(&spec).unwrap();
        assert_eq!(mesh.left.len(), mesh.right.len());
        for &r in &mesh.right {
            let l = mesh.left_partner(r).unwrap();
            assert_eq!(mesh.nodes[l][1], mesh.nodes[r][1]);
            assert!((mesh.nodes[r][0] - 0.5 * spec.wavelength).abs() < 1e-18);
        }
        assert_eq!(mesh.bottom.len(), spec.mesh_nx + 1);
        assert_eq!(mesh.electrode.len(), 2 * (mesh.metal_columns + 1));
    }
}
