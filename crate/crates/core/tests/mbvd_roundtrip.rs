use piezoq::measure::{
    deembed_q, fit_mbvd, linspace, q_3db, s11_to_y, synthetic_trace, y_to_s11, MbvdFitOptions,
    MbvdParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn truth() -> MbvdParams {
    MbvdParams {
        rm: 160.0,
        lm: 25.33e-6,
        cm: 1e-15,
        c0: 20e-15,
        rs: 5.0,
        r0: 0.0,
    }
}

fn span() -> Vec<f64> {
    linspace(0.95e9, 1.06e9, 2201)
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn noiseless_recovery() {
    let p = truth();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = synthetic_trace(&p, &span(), None, &mut rng).unwrap();
    let fit = fit_mbvd(&t, None, &MbvdFitOptions::default()).unwrap();
    let q = fit.params;
    println!("initial {:?}\nfitted {:?}\niterations {}", fit.initial, q, fit.iterations);
    for (name, a, b) in [
        ("Rm", q.rm, p.rm),
        ("Lm", q.lm, p.lm),
        ("Cm", q.cm, p.cm),
        ("C0", q.c0, p.c0),
        ("Rs", q.rs, p.rs),
    ] {
        assert!(rel(a, b) < 1e-3, "{name}: {a} vs {b}");
    }
    for w in fit.cost_history.windows(2) {
        assert!(w[1] <= w[0]);
    }
    let d = deembed_q(&q).unwrap();
    let expected = 2.0 * std::f64::consts::PI * p.f_s() * p.lm / p.rm;
    assert!(rel(d.mechanical, expected) < 1e-3);
    assert!(d.mechanical > d.loaded);
}

#[test]
fn noisy_recovery_at_40_db() {
    let p = truth();
    for seed in [7, 8, 9] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = synthetic_trace(&p, &span(), Some(40.0), &mut rng).unwrap();
        let q = fit_mbvd(&t, None, &MbvdFitOptions::default()).unwrap().params;
        println!("seed {seed}: {q:?}");
        assert!(rel(q.rm, p.rm) < 0.02, "Rm {}", q.rm);
        assert!(rel(q.lm, p.lm) < 0.02, "Lm {}", q.lm);
        assert!(rel(q.cm, p.cm) < 0.02, "Cm {}", q.cm);
    }
}

#[test]
fn q_3db_matches_loaded_q() {
    let p = truth();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = synthetic_trace(&p, &span(), None, &mut rng).unwrap();
    let q = q_3db(&t).unwrap();
    let loaded = deembed_q(&p).unwrap().loaded;
    assert!(rel(q.q, loaded) < 0.02, "{} vs {loaded}", q.q);
    assert!(rel(q.f_s, 1e9) < 1e-4);
}

#[test]
fn missing_antiresonance_is_reported() {
    let p = truth();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = synthetic_trace(&p, &linspace(0.98e9, 1.015e9, 701), None, &mut rng).unwrap();
    assert!(fit_mbvd(&t, None, &MbvdFitOptions::default()).is_err());
}

#[test]
fn admittance_reflection_round_trip() {
    let p = truth();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = synthetic_trace(&p, &span(), None, &mut rng).unwrap();
    let back = s11_to_y(&y_to_s11(&t, 50.0)).unwrap().trace;
    for (a, b) in t.y.iter().zip(&back.y) {
        assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-3));
    }
}

#[test]
fn noiseless_fits_converge_across_motional_resistance() {
    let freqs = linspace(0.95e9, 1.06e9, 1101);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for rm in [20.0, 60.0, 100.0, 400.0, 1000.0] {
        for rs in [0.0, 3.0] {
            let truth = MbvdParams { rm, rs, ..truth() };
            let t = synthetic_trace(&truth, &freqs, None, &mut rng).unwrap();
            let fit = fit_mbvd(&t, None, &MbvdFitOptions::default())
                .unwrap_or_else(|e| panic!("Rm {rm} Rs {rs}: {e}"));
            assert!(rel(fit.params.rm, rm) < 1e-4, "Rm {rm}: {}", fit.params.rm);
            assert!((fit.params.rs - rs).abs() < 1e-3 * rm, "Rs {rs}: {}", fit.params.rs);
        }
    }
}
