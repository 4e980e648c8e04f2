use std::collections::BTreeMap;

use piezoq::dispersion::{EtaMap, Extrapolation};
use piezoq::fit::{
    fit_losses, residual_report, synthetic_records, FitSpec, ModelFamily, Objective, ParamSpec,
    SyntheticSet,
};
use piezoq::lossmodel::{LossModel, NiModel, QmetalModel, QpiezoModel};

/// Smooth map with η falling with electrode thickness and rising with film
/// thickness.
fn map() -> EtaMap {
    let hl: Vec<f64> = (0..8).map(|i| 0.05 + 0.05 * i as f64).collect();
    let tmh = vec![0.0, 0.1, 0.25, 0.5];
    let mut values = Vec::new();
    for &h in &hl {
        for &t in &tmh {
            values.push(Some(1.0 - 0.9 * t / (t + 0.3) * (0.5 - h).max(0.1)));
        }
    }
    EtaMap::new(hl, tmh, values, BTreeMap::new()).unwrap()
}

fn truth() -> LossModel {
    LossModel::new(
        QpiezoModel::Constant { q0: 2000.0 },
        QmetalModel::ConstantFq { fq_hz: 1.3e12 },
    )
}

fn set(noise: f64) -> SyntheticSet {
    SyntheticSet {
        n: 30,
        f_min: 1e9,
        f_max: 10e9,
        velocity: 4000.0,
        noise,
        seed: 11,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn zero_noise_recovery() {
    let recs = synthetic_records(&map(), &truth(), &set(0.0)).unwrap();
    let r = fit_losses(&recs, &map(), &FitSpec::default()).unwrap();
    assert!(rel(r.params.q_piezo, 2000.0) < 1e-4, "{:?}", r.params);
    assert!(rel(r.params.fq, 1.3e12) < 1e-4, "{:?}", r.params);
    assert!(r.residual_norm <= r.initial_residual_norm);
    let rows = residual_report(&r, &recs, &map(), Extrapolation::Error);
    for row in rows {
        assert!(row.residual.unwrap().abs() < 1e-6);
    }
}

#[test]
fn noisy_recovery() {
    let recs = synthetic_records(&map(), &truth(), &set(0.05)).unwrap();
    let r = fit_losses(&recs, &map(), &FitSpec::default()).unwrap();
    println!("{:?} +/- {:?}", r.params, r.uncertainties);
    assert!(rel(r.params.q_piezo, 2000.0) < 0.1);
    assert!(rel(r.params.fq, 1.3e12) < 0.1);
}

#[test]
fn record_order_does_not_matter() {
    let recs = synthetic_records(&map(), &truth(), &set(0.05)).unwrap();
    let mut rev = recs.clone();
    rev.reverse();
    let a = fit_losses(&recs, &map(), &FitSpec::default()).unwrap();
    let b = fit_losses(&rev, &map(), &FitSpec::default()).unwrap();
    assert_eq!(a.params, b.params);
    let mut ra = a.residuals.clone();
    ra.reverse();
    assert_eq!(ra, b.residuals);
}

#[test]
fn ni_family_round_trip() {
    let model = LossModel::new(
        QpiezoModel::ConstantWithNi {
            q0: 3000.0,
            ni: NiModel::PowerLaw {
                q_ref: 4000.0,
                f_ref_hz: 3e9,
                exponent: 1.0,
            },
        },
        QmetalModel::ConstantFq { fq_hz: 1.3e12 },
    );
    let s = SyntheticSet { n: 40, ..set(0.0) };
    let recs = synthetic_records(&map(), &model, &s).unwrap();
    let spec = FitSpec {
        family: ModelFamily::ConstantPlusQni,
        ni_f_ref_hz: Some(3e9),
        ni_exponent: ParamSpec {
            initial: None,
            free: false,
            lower: 1.0,
            upper: 1.0,
        },
        ..Default::default()
    };
    let r = fit_losses(&recs, &map(), &spec).unwrap();
    let (q_ni, _, e) = r.params.ni.unwrap();
    assert!(rel(r.params.q_piezo, 3000.0) < 1e-3, "{:?}", r.params);
    assert!(rel(q_ni, 4000.0) < 1e-3, "{:?}", r.params);
    assert!(rel(r.params.fq, 1.3e12) < 1e-3);
    assert_eq!(e, 1.0);
}

#[test]
fn envelope_objective_runs() {
    let recs = synthetic_records(&map(), &truth(), &set(0.05)).unwrap();
    let spec = FitSpec {
        objective: Objective::Envelope,
        envelope_bins: 6,
        ..Default::default()
    };
    let r = fit_losses(&recs, &map(), &spec).unwrap();
    assert!(r.residuals.len() <= 6);
    assert_eq!(r.objective, Objective::Envelope);
}
