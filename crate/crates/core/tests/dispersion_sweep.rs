use piezoq::dispersion::{
    eta_map_to_csv, export_eta_map, import_eta_map, interp_eta, solve_point, sweep_eta,
    Extrapolation, SweepSettings,
};
use piezoq::fem::{Component, LateralBc, UnitCellSpec};
use piezoq::materials::{Material, MaterialClass};

fn base() -> UnitCellSpec {
    UnitCellSpec {
        wavelength: 10e-6,
        film_thickness: 1e-6,
        metal_thickness: 0.0,
        coverage: 0.5,
        piezo: Material::isotropic("iso", MaterialClass::Piezoelectric, 50e9, 25e9, 5000.0).unwrap(),
        metal: Material::isotropic("iso-m", MaterialClass::Metal, 50e9, 25e9, 5000.0).unwrap(),
        mesh_nx: 16,
        mesh_nz_film: 4,
        mesh_nz_metal: 2,
        lateral_bc: LateralBc::Antiperiodic,
    }
}

fn sh() -> SweepSettings {
    SweepSettings {
        n_modes: 12,
        component: Some(Component::Y),
        velocity_window: None,
    }
}

#[test]
fn bare_row_is_one() {
    let out = sweep_eta(&base(), &[0.05, 0.2, 0.4], &[0.0], &sh()).unwrap();
    assert!(out.failures.is_empty());
    for v in &out.map.values {
        assert!((v.unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn single_point_matches_direct_solve() {
    let out = sweep_eta(&base(), &[0.1], &[0.2], &sh()).unwrap();
    let direct = solve_point(&base(), 0.1, 0.2, &sh()).unwrap();
    assert_eq!(out.map.values, vec![Some(direct.eta)]);
}

#[test]
fn eta_falls_with_electrode_thickness() {
    let tm = [0.05, 0.1, 0.2];
    let etas: Vec<f64> = tm
        .iter()
        .map(|&t| solve_point(&base(), 0.1, t, &sh()).unwrap().eta)
        .collect();
    println!("eta(tm/h) at h/lambda = 0.1: {etas:?}");
    assert!(etas[0] > etas[1] && etas[1] > etas[2]);
    assert!(etas.iter().all(|e| *e < 1.0 && *e > 0.0));
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let grid1 = [0.05, 0.15, 0.3];
    let grid2 = [0.0, 0.25];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| eta_map_to_csv(&sweep_eta(&base(), &grid1, &grid2, &sh()).unwrap().map))
    };
    let a = run(1);
    assert_eq!(a, run(3));
    assert_eq!(a, run(1));
}

#[test]
fn export_import_roundtrip() {
    let out = sweep_eta(&base(), &[0.1, 0.2], &[0.0, 0.2], &sh()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eta.csv");
    export_eta_map(&out.map, &path).unwrap();
    let back = import_eta_map(&path).unwrap();
    assert_eq!(back, out.map);
    let q = interp_eta(&back, 0.15, 0.1, Extrapolation::Error).unwrap();
    assert!(q > 0.0 && q < 1.0);
}
