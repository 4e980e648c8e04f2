use std::ffi::{CStr, CString};
use std::ptr;

use piezoq_ffi::*;

fn last_error() -> String {
    let p = pq_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn scalar_functions() {
    let mut q = 0.0;
    unsafe {
        assert_eq!(pq_q_m(1.0, 2000.0, 200.0, &mut q), PqStatus::Ok);
        assert_eq!(q, 2000.0);
        assert!(pq_last_error_message().is_null());
        assert_eq!(pq_q_m(0.5, 2000.0, 200.0, &mut q), PqStatus::Ok);
        assert!((q - 1.0 / (0.5 / 2000.0 + 0.5 / 200.0)).abs() < 1e-9);

        assert_eq!(pq_q_m(1.5, 2000.0, 200.0, &mut q), PqStatus::InvalidArgument);
        assert!(last_error().contains("eta"));
        assert_eq!(pq_q_m(0.5, 2000.0, 200.0, ptr::null_mut()), PqStatus::NullPointer);

        let qs = [1000.0, 1000.0];
        assert_eq!(pq_series_q(qs.as_ptr(), 2, &mut q), PqStatus::Ok);
        assert_eq!(q, 500.0);
        assert_eq!(pq_series_q(qs.as_ptr(), 0, &mut q), PqStatus::InvalidArgument);

        assert_eq!(pq_q_metal_fq(1.3e12, 13e9, &mut q), PqStatus::Ok);
        assert_eq!(q, 100.0);
    }
    let v = unsafe { CStr::from_ptr(pq_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn eta_map_and_prediction() {
    let hl = [0.1, 0.2, 0.3];
    let tmh = [0.0, 0.5];
    let values = [1.0, 0.5, 1.0, 0.7, 1.0, f64::NAN];
    let mut map = ptr::null_mut();
    let mut model = ptr::null_mut();
    let mut v = 0.0;
    unsafe {
        assert_eq!(pq_eta_map_new(hl.as_ptr(), 3, tmh.as_ptr(), 2, values.as_ptr(), &mut map), PqStatus::Ok);
        assert_eq!(pq_eta_map_interp(map, 0.15, 0.25, false, &mut v), PqStatus::Ok);
        assert!((v - 0.8).abs() < 1e-12);
        // The stencil touches the gap.
        assert_eq!(pq_eta_map_interp(map, 0.25, 0.25, false, &mut v), PqStatus::OutOfDomain);
        assert_eq!(pq_eta_map_interp(map, 0.05, 0.0, false, &mut v), PqStatus::OutOfDomain);
        assert_eq!(pq_eta_map_interp(map, 0.05, 0.0, true, &mut v), PqStatus::Ok);
        assert_eq!(v, 1.0);

        assert_eq!(pq_loss_model_new(2000.0, 1.3e12, &mut model), PqStatus::Ok);
        // h/λ = 0.1 (one ulp below, hence clamp), t_m/h = 0.5 → η = 0.5; Q_metal = 1300 at 1 GHz.
        assert_eq!(pq_predict_qm(map, model, 10e-6, 1e-6, 0.5e-6, 1e9, true, &mut v), PqStatus::Ok);
        assert!((v - 1.0 / (0.5 / 2000.0 + 0.5 / 1300.0)).abs() < 1e-9);
        assert_eq!(pq_predict_qm(map, ptr::null(), 10e-6, 1e-6, 0.5e-6, 1e9, false, &mut v), PqStatus::NullPointer);
        assert_eq!(pq_loss_model_new(-1.0, 1.3e12, &mut model), PqStatus::Validation);
        pq_loss_model_free(model);
        pq_eta_map_free(map);
        pq_eta_map_free(ptr::null_mut());

        let bad = [1.2, 0.5, 1.0, 1.0];
        let mut other = ptr::null_mut();
        assert_eq!(pq_eta_map_new(hl.as_ptr(), 2, tmh.as_ptr(), 2, bad.as_ptr(), &mut other), PqStatus::Validation);
        assert!(other.is_null());
    }
}

#[test]
fn files_and_materials() {
    let dir = tempfile::tempdir().unwrap();
    let eta = dir.path().join("eta.csv");
    std::fs::write(&eta, "h_over_lambda,tm_over_h,eta\n0.1,0,1\n0.1,0.5,0.6\n0.2,0,1\n0.2,0.5,0.7\n").unwrap();
    let c = CString::new(eta.to_str().unwrap()).unwrap();
    let missing = CString::new(dir.path().join("none.mat").to_str().unwrap()).unwrap();
    let mut map = ptr::null_mut();
    let mut mat = ptr::null_mut();
    let mut v = 0.0;
    unsafe {
        assert_eq!(pq_eta_map_import(c.as_ptr(), &mut map), PqStatus::Ok);
        assert_eq!(pq_eta_map_interp(map, 0.15, 0.5, false, &mut v), PqStatus::Ok);
        assert!((v - 0.65).abs() < 1e-12);
        pq_eta_map_free(map);

        assert_eq!(pq_material_load(missing.as_ptr(), &mut mat), PqStatus::Io);
        assert!(last_error().contains("none.mat"));
        assert_eq!(pq_material_load(ptr::null(), &mut mat), PqStatus::NullPointer);

        let iso = CString::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../materials/isotropic_test.mat")).unwrap();
        assert_eq!(pq_material_load(iso.as_ptr(), &mut mat), PqStatus::Ok);
        let mut rotated = ptr::null_mut();
        assert_eq!(pq_material_rotate(mat, 10.0, 20.0, 30.0, &mut rotated), PqStatus::Ok);
        // Isotropic stiffness is rotation invariant.
        for (i, j) in [(0, 0), (0, 1), (3, 3), (0, 3)] {
            let (mut a, mut b) = (0.0, 0.0);
            assert_eq!(pq_material_stiffness(mat, i, j, &mut a), PqStatus::Ok);
            assert_eq!(pq_material_stiffness(rotated, i, j, &mut b), PqStatus::Ok);
            assert!((a - b).abs() < 1e-6 * 100e9, "({i},{j}) {a} {b}");
        }
        assert_eq!(pq_material_stiffness(mat, 6, 0, &mut v), PqStatus::InvalidArgument);
        pq_material_free(rotated);
        pq_material_free(mat);
    }
}

#[test]
fn unit_cell_bare_plate() {
    let mut piezo = ptr::null_mut();
    let mut metal = ptr::null_mut();
    let cell = PqUnitCell {
        wavelength: 20e-6,
        film_thickness: 2e-6,
        metal_thickness: 0.0,
        coverage: 0.5,
        mesh_nx: 16,
        mesh_nz_film: 4,
        mesh_nz_metal: 2,
        n_modes: 8,
        polarization: 1,
    };
    let (mut eta, mut f) = (0.0, 0.0);
    unsafe {
        assert_eq!(pq_material_isotropic(50e9, 25e9, 5000.0, false, &mut piezo), PqStatus::Ok);
        assert_eq!(pq_material_isotropic(50e9, 25e9, 5000.0, true, &mut metal), PqStatus::Ok);
        assert_eq!(pq_unit_cell_eta(piezo, metal, &cell, &mut eta, &mut f), PqStatus::Ok);
        assert!((eta - 1.0).abs() < 1e-9);
        let v = f * cell.wavelength;
        assert!((v / (25e9f64 / 5000.0).sqrt() - 1.0).abs() < 0.02, "{v}");

        let thick = PqUnitCell { metal_thickness: 0.5e-6, ..cell };
        assert_eq!(pq_unit_cell_eta(piezo, metal, &thick, &mut eta, &mut f), PqStatus::Ok);
        assert!(eta > 0.0 && eta < 1.0);

        let bad = PqUnitCell { polarization: 7, ..cell };
        assert_eq!(pq_unit_cell_eta(piezo, metal, &bad, &mut eta, &mut f), PqStatus::InvalidArgument);
        pq_material_free(piezo);
        pq_material_free(metal);
    }
}

#[test]
fn mbvd_round_trip() {
    let truth = PqMbvdParams {
        rm: 160.0,
        lm: 25.33e-6,
        cm: 1e-15,
        c0: 20e-15,
        rs: 5.0,
        r0: 0.0,
    };
    let n = 1501;
    let f: Vec<f64> = (0..n).map(|i| 0.95e9 + 0.11e9 * i as f64 / (n - 1) as f64).collect();
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    let mut fit = PqMbvdParams::default();
    unsafe {
        for k in 0..n {
            assert_eq!(pq_mbvd_admittance(&truth, f[k], &mut re[k], &mut im[k]), PqStatus::Ok);
        }
        assert_eq!(pq_mbvd_fit(f.as_ptr(), re.as_ptr(), im.as_ptr(), n, &mut fit), PqStatus::Ok);
        for (a, b) in [(fit.rm, truth.rm), (fit.lm, truth.lm), (fit.cm, truth.cm), (fit.c0, truth.c0), (fit.rs, truth.rs)] {
            assert!((a / b - 1.0).abs() < 1e-6, "{a} vs {b}");
        }
        let (mut loaded, mut mech) = (0.0, 0.0);
        assert_eq!(pq_mbvd_deembed(&fit, &mut loaded, &mut mech), PqStatus::Ok);
        assert!(loaded < mech);

        // Too few points to resolve anything.
        assert_eq!(pq_mbvd_fit(f.as_ptr(), re.as_ptr(), im.as_ptr(), 4, &mut fit), PqStatus::InvalidArgument);
        assert!(!last_error().is_empty());
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/piezoq.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct PqEtaMap PqEtaMap;"));
    assert!(header.contains("PQ_STATUS_OK = 0"));
}
