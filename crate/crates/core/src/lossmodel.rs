//! Piezoelectric and metal loss channels and their η-weighted combination.
//!
//! `1/Q_m = η/Q_piezo + (1 − η)/Q_metal`, where `Q_piezo` lumps every loss
//! in the piezoelectric layer in series and `Q_metal` follows a constant
//! `f·Q` product or a constant value.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dispersion::{device_to_coords, interp_eta, DeviceGeometry, EtaMap, Extrapolation};
use crate::error::{Error, Result};

/// Series loss components; `None` means the channel does not contribute.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossBudget {
    /// phonon–phonon
    pub q_pp: Option<f64>,
    pub q_anchor: Option<f64>,
    pub q_air: Option<f64>,
    /// non-idealities, fabrication included
    pub q_ni: Option<f64>,
    /// thermoelastic damping (metal)
    pub q_ted: Option<f64>,
    /// electron–phonon (metal)
    pub q_ep: Option<f64>,
}

impl LossBudget {
    pub fn components(&self) -> impl Iterator<Item = f64> + '_ {
        [self.q_pp, self.q_anchor, self.q_air, self.q_ni, self.q_ted, self.q_ep]
            .into_iter()
            .flatten()
    }

    pub fn is_empty(&self) -> bool {
        self.components().next().is_none()
    }

    pub fn validate(&self) -> Result<()> {
        for q in self.components() {
            check_q(q, "loss budget component")?;
        }
        Ok(())
    }
}

fn check_q(q: f64, what: &str) -> Result<()> {
    if q.is_finite() && q > 0.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("{what} must be positive and finite, got {q}")))
    }
}

/// Reciprocal sum over the present components.
pub fn series_q(budget: &LossBudget) -> Result<f64> {
    budget.validate()?;
    series_q_of(budget.components())
}

pub fn series_q_of(qs: impl IntoIterator<Item = f64>) -> Result<f64> {
    let mut inv = 0.0;
    let mut n = 0;
    for q in qs {
        check_q(q, "quality factor")?;
        inv += 1.0 / q;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Invalid("empty loss budget".into()));
    }
    Ok(1.0 / inv)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NiModel {
    Constant { q: f64 },
    /// `Q_ni(f) = q_ref · (f_ref / f)^exponent`
    PowerLaw { q_ref: f64, f_ref_hz: f64, exponent: f64 },
}

impl NiModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NiModel::Constant { q } => check_q(q, "Q_ni"),
            NiModel::PowerLaw { q_ref, f_ref_hz, exponent } => {
                check_q(q_ref, "Q_ni reference")?;
                check_q(f_ref_hz, "Q_ni reference frequency")?;
                if exponent.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Validation("Q_ni exponent must be finite".into()))
                }
            }
        }
    }

    pub fn at(&self, f: f64) -> f64 {
        match *self {
            NiModel::Constant { q } => q,
            NiModel::PowerLaw { q_ref, f_ref_hz, exponent } => q_ref * (f_ref_hz / f).powf(exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QpiezoModel {
    Constant {
        q0: f64,
    },
    ConstantWithNi {
        q0: f64,
        ni: NiModel,
    },
    /// `Q_piezo` tabulated against `t_m/λ`, linearly interpolated.
    Table {
        tm_over_lambda: Vec<f64>,
        q: Vec<f64>,
    },
}

impl QpiezoModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            QpiezoModel::Constant { q0 } => check_q(*q0, "Q_piezo"),
            QpiezoModel::ConstantWithNi { q0, ni } => {
                check_q(*q0, "Q_piezo")?;
                ni.validate()
            }
            QpiezoModel::Table { tm_over_lambda, q } => {
                if tm_over_lambda.is_empty() || tm_over_lambda.len() != q.len() {
                    return Err(Error::Validation(
                        "Q_piezo table needs equally long, nonempty columns".into(),
                    ));
                }
                if tm_over_lambda.iter().any(|x| !x.is_finite())
                    || tm_over_lambda.windows(2).any(|w| w[1] <= w[0])
                {
                    return Err(Error::Validation(
                        "Q_piezo table grid is not strictly increasing".into(),
                    ));
                }
                q.iter().try_for_each(|&v| check_q(v, "Q_piezo table entry"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QmetalModel {
    /// Constant `f·Q` product, Hz.
    ConstantFq { fq_hz: f64 },
    Constant { q: f64 },
}

impl QmetalModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            QmetalModel::ConstantFq { fq_hz } => check_q(fq_hz, "f*Q product"),
            QmetalModel::Constant { q } => check_q(q, "Q_metal"),
        }
    }
}

fn check_frequency(f: f64) -> Result<()> {
    if f.is_finite() && f > 0.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("frequency must be positive, got {f}")))
    }
}

pub fn q_metal_at(model: &QmetalModel, f: f64) -> Result<f64> {
    check_frequency(f)?;
    model.validate()?;
    Ok(match *model {
        QmetalModel::ConstantFq { fq_hz } => fq_hz / f,
        QmetalModel::Constant { q } => q,
    })
}

pub fn q_piezo_at(model: &QpiezoModel, f: f64, tm_over_lambda: Option<f64>) -> Result<f64> {
    check_frequency(f)?;
    model.validate()?;
    match model {
        QpiezoModel::Constant { q0 } => Ok(*q0),
        QpiezoModel::ConstantWithNi { q0, ni } => series_q_of([*q0, ni.at(f)]),
        QpiezoModel::Table { tm_over_lambda: grid, q } => {
            let x = tm_over_lambda.ok_or_else(|| {
                Error::Invalid("tabulated Q_piezo needs t_m/lambda".into())
            })?;
            let (lo, hi) = (grid[0], grid[grid.len() - 1]);
            if !(x >= lo && x <= hi) {
                return Err(Error::OutOfDomain(format!(
                    "t_m/lambda = {x} outside Q_piezo table [{lo}, {hi}]"
                )));
            }
            if grid.len() == 1 {
                return Ok(q[0]);
            }
            let upper = grid.partition_point(|&g| g <= x).clamp(1, grid.len() - 1);
            let i = upper - 1;
            let t = (x - grid[i]) / (grid[i + 1] - grid[i]);
            Ok((1.0 - t) * q[i] + t * q[i + 1])
        }
    }
}

/// `1 / (η/Q_piezo + (1 − η)/Q_metal)`.
pub fn q_m(eta: f64, q_piezo: f64, q_metal: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Invalid(format!("eta = {eta} outside [0, 1]")));
    }
    check_q(q_piezo, "Q_piezo")?;
    check_q(q_metal, "Q_metal")?;
    Ok(1.0 / (eta / q_piezo + (1.0 - eta) / q_metal))
}

/// Complete description of both loss channels.
///
/// `piezo_extra` / `metal_extra` are optional lumped series terms (anchor,
/// air, thermoelastic, ...) combined with the respective channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossModel {
    pub qpiezo: QpiezoModel,
    pub qmetal: QmetalModel,
    #[serde(default)]
    pub piezo_extra: LossBudget,
    #[serde(default)]
    pub metal_extra: LossBudget,
}

impl LossModel {
    pub fn new(qpiezo: QpiezoModel, qmetal: QmetalModel) -> Self {
        LossModel {
            qpiezo,
            qmetal,
            piezo_extra: LossBudget::default(),
            metal_extra: LossBudget::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.qpiezo.validate()?;
        self.qmetal.validate()?;
        self.piezo_extra.validate()?;
        self.metal_extra.validate()
    }

    pub fn q_piezo(&self, f: f64, tm_over_lambda: Option<f64>) -> Result<f64> {
        let base = q_piezo_at(&self.qpiezo, f, tm_over_lambda)?;
        series_q_of(std::iter::once(base).chain(self.piezo_extra.components()))
    }

    pub fn q_metal(&self, f: f64) -> Result<f64> {
        let base = q_metal_at(&self.qmetal, f)?;
        series_q_of(std::iter::once(base).chain(self.metal_extra.components()))
    }
}

pub fn parse_loss_model(text: &str, origin: &str) -> Result<LossModel> {
    let model: LossModel = toml::from_str(text)
        .map_err(|e| Error::parse(origin, 0, e.to_string()))?;
    model.validate()?;
    Ok(model)
}

pub fn load_loss_model(path: impl AsRef<Path>) -> Result<LossModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_loss_model(&text, &path.display().to_string())
}

/// Predicted `Q_m` of a device at frequency `f`.
pub fn predict_qm(
    dev: &DeviceGeometry,
    map: &EtaMap,
    model: &LossModel,
    f: f64,
    policy: Extrapolation,
) -> Result<f64> {
    dev.validate()?;
    let c = device_to_coords(dev);
    let eta = interp_eta(map, c.h_over_lambda, c.tm_over_h, policy)?;
    q_m(eta, model.q_piezo(f, Some(c.tm_over_lambda))?, model.q_metal(f)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    #[test]
    fn series_examples() {
        let b = |qs: &[f64]| LossBudget {
            q_pp: qs.first().copied(),
            q_anchor: qs.get(1).copied(),
            ..Default::default()
        };
        assert_eq!(series_q(&b(&[2000.0])).unwrap(), 2000.0);
        assert!(rel(series_q(&b(&[1000.0, 1000.0])).unwrap(), 500.0) < 1e-15);
        assert!(rel(series_q(&b(&[2000.0, 3000.0])).unwrap(), 1200.0) < 1e-15);
        assert!(series_q(&LossBudget::default()).is_err());
        assert!(series_q(&b(&[-1.0])).is_err());
    }

    #[test]
    fn metal_fq() {
        let al = QmetalModel::ConstantFq { fq_hz: 1.3e12 };
        assert_eq!(q_metal_at(&al, 13e9).unwrap(), 100.0);
        let au = QmetalModel::ConstantFq { fq_hz: 0.5e12 };
        assert_eq!(q_metal_at(&au, 500e6).unwrap(), 1000.0);
        assert_eq!(q_metal_at(&QmetalModel::Constant { q: 200.0 }, 3e9).unwrap(), 200.0);
        assert!(q_metal_at(&al, 0.0).is_err());
    }

    #[test]
    fn piezo_variants() {
        let c = QpiezoModel::Constant { q0: 2000.0 };
        assert_eq!(q_piezo_at(&c, 7e9, None).unwrap(), 2000.0);
        let ni = QpiezoModel::ConstantWithNi {
            q0: 2000.0,
            ni: NiModel::Constant { q: 2000.0 },
        };
        assert!(rel(q_piezo_at(&ni, 1e9, None).unwrap(), 1000.0) < 1e-15);
        let pl = QpiezoModel::ConstantWithNi {
            q0: 2000.0,
            ni: NiModel::PowerLaw { q_ref: 2000.0, f_ref_hz: 1e9, exponent: 1.0 },
        };
        // 1/(1/2000 + 1/1000)
        assert!(rel(q_piezo_at(&pl, 2e9, None).unwrap(), 2000.0 / 3.0) < 1e-14);

        let table = QpiezoModel::Table {
            tm_over_lambda: vec![0.0, 0.1, 0.2],
            q: vec![500.0, 1500.0, 2500.0],
        };
        assert_eq!(q_piezo_at(&table, 1e9, Some(0.1)).unwrap(), 1500.0);
        assert!(rel(q_piezo_at(&table, 1e9, Some(0.05)).unwrap(), 1000.0) < 1e-14);
        assert!(q_piezo_at(&table, 1e9, None).is_err());
        assert!(q_piezo_at(&table, 1e9, Some(0.3)).is_err());
    }

    #[test]
    fn combination() {
        assert_eq!(q_m(1.0, 2000.0, 200.0).unwrap(), 2000.0);
        assert_eq!(q_m(0.0, 2000.0, 200.0).unwrap(), 200.0);
        // 1/(0.9/2000 + 0.1/200) = 1052.63...
        assert!(rel(q_m(0.9, 2000.0, 200.0).unwrap(), 1.0 / (0.9 / 2000.0 + 0.1 / 200.0)) < 1e-15);
        assert!((q_m(0.9, 2000.0, 200.0).unwrap() - 1052.6).abs() < 0.05);
        assert!(q_m(1.1, 2000.0, 200.0).is_err());
    }

    #[test]
    fn predict_composition() {
        let dev = DeviceGeometry::new(10e-6, 1e-6, 100e-9).unwrap();
        let model = LossModel::new(
            QpiezoModel::Constant { q0: 2000.0 },
            QmetalModel::ConstantFq { fq_hz: 0.5e12 },
        );
        let ones = EtaMap::uniform(vec![0.05, 0.2], vec![0.0, 0.5], 1.0).unwrap();
        let p = predict_qm(&dev, &ones, &model, 500e6, Extrapolation::Error).unwrap();
        assert!(rel(p, 2000.0) < 1e-15);
        let zeros = EtaMap::uniform(vec![0.05, 0.2], vec![0.0, 0.5], 0.0).unwrap();
        let p = predict_qm(&dev, &zeros, &model, 500e6, Extrapolation::Error).unwrap();
        assert!(rel(p, 1000.0) < 1e-15);
        let eight = EtaMap::uniform(vec![0.05, 0.2], vec![0.0, 0.5], 0.8).unwrap();
        let p = predict_qm(&dev, &eight, &model, 500e6, Extrapolation::Error).unwrap();
        assert!(rel(p, 1.0 / (0.8 / 2000.0 + 0.2 / 1000.0)) < 1e-14);
        assert!((p - 1666.67).abs() < 0.01);
    }

    #[test]
    fn extra_terms_in_series() {
        let mut model = LossModel::new(
            QpiezoModel::Constant { q0: 2000.0 },
            QmetalModel::Constant { q: 200.0 },
        );
        model.piezo_extra.q_anchor = Some(2000.0);
        model.metal_extra.q_ted = Some(200.0);
        assert!(rel(model.q_piezo(1e9, None).unwrap(), 1000.0) < 1e-15);
        assert!(rel(model.q_metal(1e9).unwrap(), 100.0) < 1e-15);
    }

    #[test]
    fn toml_description() {
        let text = r#"
[qpiezo]
kind = "constant_with_ni"
q0 = 2000.0
ni = { kind = "power_law", q_ref = 800.0, f_ref_hz = 1e9, exponent = 1.0 }

[qmetal]
kind = "constant_fq"
fq_hz = 1.3e12

[piezo_extra]
q_anchor = 5e4
"#;
        let m = parse_loss_model(text, "inline").unwrap();
        assert_eq!(m.qmetal, QmetalModel::ConstantFq { fq_hz: 1.3e12 });
        assert_eq!(m.piezo_extra.q_anchor, Some(5e4));
        let back = parse_loss_model(&toml::to_string(&m).unwrap(), "rt").unwrap();
        assert_eq!(back, m);
        assert!(parse_loss_model("[qpiezo]\nkind = \"constant\"\nq0 = -3\n[qmetal]\nkind = \"constant\"\nq = 1\n", "x").is_err());
    }
}
