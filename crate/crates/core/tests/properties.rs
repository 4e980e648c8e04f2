//! Invariants of material rotation, loss combination and damped least squares.

use nalgebra::{Matrix3, SMatrix};
use piezoq::lm::{minimize, LmOptions};
use piezoq::lossmodel::{q_m, series_q_of};
use piezoq::materials::{
    rotate_material, rotate_material_by_matrix, stiffness_spectrum, EulerAngles, Material, MaterialClass,
    Matrix3x6, Matrix6,
};
use proptest::prelude::*;

const VOIGT: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

fn voigt(i: usize, j: usize) -> usize {
    VOIGT.iter().position(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i)).unwrap()
}

/// Rotates the full fourth-rank stiffness tensor index by index.
fn tensor_rotate_stiffness(c: &Matrix6, a: &Matrix3<f64>) -> Matrix6 {
    let t = |i, j, k, l| c[(voigt(i, j), voigt(k, l))];
    let mut out = Matrix6::zeros();
    for (row, &(i, j)) in VOIGT.iter().enumerate() {
        for (col, &(k, l)) in VOIGT.iter().enumerate() {
            let mut s = 0.0;
            for p in 0..3 {
                for q in 0..3 {
                    for r in 0..3 {
                        for u in 0..3 {
                            s += a[(i, p)] * a[(j, q)] * a[(k, r)] * a[(l, u)] * t(p, q, r, u);
                        }
                    }
                }
            }
            out[(row, col)] = s;
        }
    }
    out
}

fn tensor_rotate_piezo(e: &Matrix3x6, a: &Matrix3<f64>) -> Matrix3x6 {
    let t = |i, j, k| e[(i, voigt(j, k))];
    let mut out = Matrix3x6::zeros();
    for i in 0..3 {
        for (col, &(j, k)) in VOIGT.iter().enumerate() {
            let mut s = 0.0;
            for l in 0..3 {
                for m in 0..3 {
                    for n in 0..3 {
                        s += a[(i, l)] * a[(j, m)] * a[(k, n)] * t(l, m, n);
                    }
                }
            }
            out[(i, col)] = s;
        }
    }
    out
}

fn angles() -> impl Strategy<Value = EulerAngles> {
    let a = -std::f64::consts::PI..std::f64::consts::PI;
    (a.clone(), 0.0..std::f64::consts::PI, a).prop_map(|(p, t, s)| EulerAngles::new(p, t, s))
}

/// Random SPD stiffness (GPa scale), piezo matrix and permittivity.
fn material() -> impl Strategy<Value = Material> {
    (
        prop::collection::vec(-1.0f64..1.0, 36),
        prop::collection::vec(-5.0f64..5.0, 18),
        prop::collection::vec(-1.0f64..1.0, 9),
    )
        .prop_map(|(b, e, p)| {
            let b = Matrix6::from_row_slice(&b);
            // SPD in Mandel form, then back to Voigt.
            let mandel = b.transpose() * b + Matrix6::identity() * 0.5;
            let w = [1.0, 1.0, 1.0, 2f64.sqrt(), 2f64.sqrt(), 2f64.sqrt()];
            let mut c = Matrix6::zeros();
            for i in 0..6 {
                for j in 0..6 {
                    c[(i, j)] = 1e11 * mandel[(i, j)] / (w[i] * w[j]);
                }
            }
            let p = Matrix3::from_row_slice(&p);
            let eps = (p.transpose() * p + Matrix3::identity()) * 1e-10;
            let m = Material {
                name: "random".into(),
                class: MaterialClass::Piezoelectric,
                density: 4000.0,
                stiffness: c,
                piezo_e: Matrix3x6::from_row_slice(&e),
                permittivity: eps,
            };
            m.validate().expect("generated material is valid");
            m
        })
}

fn max_abs_diff<const R: usize, const C: usize>(a: &SMatrix<f64, R, C>, b: &SMatrix<f64, R, C>) -> f64 {
    (a - b).amax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bond_rotation_matches_tensor_rotation(m in material(), g in angles()) {
        let a = g.matrix();
        let r = rotate_material(&m, &g).unwrap();
        let scale = m.stiffness.amax();
        prop_assert!(max_abs_diff(&r.stiffness, &tensor_rotate_stiffness(&m.stiffness, &a)) < 1e-10 * scale);
        let oracle_e = tensor_rotate_piezo(&m.piezo_e, &a);
        prop_assert!(max_abs_diff(&r.piezo_e, &oracle_e) < 1e-10 * m.piezo_e.amax().max(1.0));
        let oracle_eps = a * m.permittivity * a.transpose();
        prop_assert!(max_abs_diff(&r.permittivity, &oracle_eps) < 1e-10 * m.permittivity.amax());
    }

    #[test]
    fn rotation_preserves_spectrum_and_definiteness(m in material(), g in angles()) {
        let r = rotate_material(&m, &g).unwrap();
        prop_assert!(r.validate().is_ok());
        let before = stiffness_spectrum(&m);
        let after = stiffness_spectrum(&r);
        let top = before[5];
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() < 1e-10 * top, "{before:?} vs {after:?}");
        }
    }

    #[test]
    fn rotate_then_inverse_is_identity(m in material(), g in angles()) {
        let back = rotate_material(&rotate_material(&m, &g).unwrap(), &g.inverse()).unwrap();
        prop_assert!(max_abs_diff(&back.stiffness, &m.stiffness) < 1e-10 * m.stiffness.amax());
        prop_assert!(max_abs_diff(&back.piezo_e, &m.piezo_e) < 1e-10 * m.piezo_e.amax().max(1.0));
        prop_assert!(max_abs_diff(&back.permittivity, &m.permittivity) < 1e-10 * m.permittivity.amax());
    }

    #[test]
    fn successive_rotations_compose(m in material(), g1 in angles(), g2 in angles()) {
        let twice = rotate_material(&rotate_material(&m, &g1).unwrap(), &g2).unwrap();
        let once = rotate_material_by_matrix(&m, &(g2.matrix() * g1.matrix()));
        let composed = rotate_material(&m, &g2.compose_after(&g1)).unwrap();
        let scale = m.stiffness.amax();
        prop_assert!(max_abs_diff(&twice.stiffness, &once.stiffness) < 1e-10 * scale);
        prop_assert!(max_abs_diff(&twice.stiffness, &composed.stiffness) < 1e-9 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rotated_strain_energy_is_positive(
        m in material(),
        g in angles(),
        s in prop::collection::vec(-1e-3f64..1e-3, 6),
    ) {
        let strain = SMatrix::<f64, 6, 1>::from_column_slice(&s);
        prop_assume!(strain.norm() > 1e-9);
        let r = rotate_material(&m, &g).unwrap();
        prop_assert!(r.strain_energy_density(&strain) > 0.0);
    }

    #[test]
    fn qm_lies_between_channels_and_moves_toward_piezo(
        qp in 1.0f64..1e7,
        qmet in 1.0f64..1e7,
        e1 in 0.0f64..=1.0,
        e2 in 0.0f64..=1.0,
    ) {
        let (lo, hi) = (qp.min(qmet), qp.max(qmet));
        let a = q_m(e1, qp, qmet).unwrap();
        prop_assert!(a >= lo * (1.0 - 1e-12) && a <= hi * (1.0 + 1e-12));
        let b = q_m(e2, qp, qmet).unwrap();
        // Raising η moves Q_m toward Q_piezo.
        let (el, eh) = if e1 <= e2 { (a, b) } else { (b, a) };
        if qp >= qmet {
            prop_assert!(eh >= el * (1.0 - 1e-12));
        } else {
            prop_assert!(eh <= el * (1.0 + 1e-12));
        }
    }

    #[test]
    fn series_q_is_below_every_component(qs in prop::collection::vec(1.0f64..1e8, 1..6), extra in 1.0f64..1e8) {
        let q = series_q_of(qs.iter().copied()).unwrap();
        let min = qs.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(q <= min * (1.0 + 1e-12));
        let more = series_q_of(qs.iter().copied().chain([extra])).unwrap();
        prop_assert!(more < q);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn accepted_costs_never_increase(
        amp in 0.1f64..10.0,
        rate in 0.05f64..2.0,
        x0 in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let ts: Vec<f64> = (0..25).map(|i| i as f64 * 0.2).collect();
        let ys: Vec<f64> = ts.iter().map(|t| amp * (-rate * t).exp() + 0.01 * (3.0 * t).sin()).collect();
        let f = |p: &[f64]| Some(ts.iter().zip(&ys).map(|(t, y)| p[0] * (-p[1] * t).exp() - y).collect());
        let rep = minimize(f, &x0, &LmOptions::default()).unwrap();
        prop_assert!(rep.cost <= rep.initial_cost);
        for w in rep.history.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }
}
