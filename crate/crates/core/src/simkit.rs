//! Fixed-step RK4 simulation of the three population models, producing
//! trial datasets in the relstore layout.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relstore::{SeriesPoint, TrialDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Malthus,
    Logistic,
    LotkaVolterra,
}

impl ModelKind {
    pub fn parameters(self) -> &'static [&'static str] {
        match self {
            ModelKind::Malthus => &["x0", "b"],
            ModelKind::Logistic => &["x0", "K", "b"],
            ModelKind::LotkaVolterra => &["x0", "b", "p", "y0", "d", "r"],
        }
    }

    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            ModelKind::LotkaVolterra => &["x", "y"],
            _ => &["x"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub step: f64,
    /// Internal step; defaults to a thousandth of `step`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

/// A model manifest. `phi`/`upsilon` say where the trial is loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeModel {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upsilon: Option<u32>,
    pub parameters: BTreeMap<String, f64>,
    pub grid: TimeGrid,
}

fn whole(ratio: f64) -> Option<usize> {
    let n = ratio.round();
    ((ratio - n).abs() <= 1e-9 * n.max(1.0) && n >= 1.0).then_some(n as usize)
}

impl OdeModel {
    pub fn from_json(text: &str) -> Result<OdeModel> {
        serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))
    }

    fn param(&self, name: &str) -> f64 {
        self.parameters[name]
    }

    /// Output sample count and internal sub-steps per output step.
    pub fn validate(&self) -> Result<(usize, usize)> {
        for p in self.kind.parameters() {
            match self.parameters.get(*p) {
                Some(v) if v.is_finite() => {}
                Some(v) => return Err(Error::InvalidModel(format!("parameter {p}={v} is not finite"))),
                None => return Err(Error::InvalidModel(format!("missing parameter {p}"))),
            }
        }
        if let Some(extra) = self.parameters.keys().find(|k| !self.kind.parameters().contains(&k.as_str())) {
            return Err(Error::InvalidModel(format!("unknown parameter {extra}")));
        }
        let g = self.grid;
        if ![g.start, g.end, g.step].iter().all(|v| v.is_finite()) || g.end <= g.start || g.step <= 0.0 {
            return Err(Error::InvalidModel("grid needs start < end and step > 0".into()));
        }
        let steps = whole((g.end - g.start) / g.step)
            .ok_or_else(|| Error::InvalidModel("step does not divide end - start".into()))?;
        let h = g.h.unwrap_or(g.step / 1000.0);
        if h.is_nan() || h <= 0.0 {
            return Err(Error::InvalidModel(format!("h={h}")));
        }
        let sub = whole(g.step / h).ok_or_else(|| Error::InvalidModel("h does not divide the output step".into()))?;
        Ok((steps, sub))
    }

    fn rhs(&self, s: &[f64]) -> Vec<f64> {
        match self.kind {
            ModelKind::Malthus => vec![self.param("b") * s[0]],
            ModelKind::Logistic => {
                let (b, k) = (self.param("b"), self.param("K"));
                vec![b * (1.0 - s[0] / k) * s[0]]
            }
            ModelKind::LotkaVolterra => {
                let (b, p, d, r) = (self.param("b"), self.param("p"), self.param("d"), self.param("r"));
                vec![s[0] * (b - p * s[1]), s[1] * (r * s[0] - d)]
            }
        }
    }

    fn initial(&self) -> Vec<f64> {
        match self.kind {
            ModelKind::LotkaVolterra => vec![self.param("x0"), self.param("y0")],
            _ => vec![self.param("x0")],
        }
    }

    /// (t, state) at every output grid point, starting with the initial condition.
    pub fn simulate(&self) -> Result<Vec<(f64, Vec<f64>)>> {
        let (steps, sub) = self.validate()?;
        let g = self.grid;
        let h = g.step / sub as f64;
        let mut s = self.initial();
        let mut out = Vec::with_capacity(steps + 1);
        out.push((g.start, s.clone()));
        for k in 1..=steps {
            for _ in 0..sub {
                s = rk4_step(&s, h, |x| self.rhs(x));
            }
            if let Some(bad) = s.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState(format!("state became {bad} before t={}", g.start + k as f64 * g.step)));
            }
            out.push((g.start + k as f64 * g.step, s.clone()));
        }
        Ok(out)
    }

    pub fn to_trial(&self, phi: u32, upsilon: u32) -> Result<TrialDataset> {
        let series = self
            .simulate()?
            .into_iter()
            .map(|(t, s)| SeriesPoint {
                index: t,
                outputs: self.kind.outputs().iter().zip(s).map(|(o, v)| (o.to_string(), v)).collect(),
            })
            .collect();
        Ok(TrialDataset { phi, upsilon, parameters: self.parameters.clone(), index_symbol: "t".into(), series })
    }
}

pub fn rk4_step(s: &[f64], h: f64, f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { s.iter().zip(k).map(|(x, d)| x + a * d).collect() };
    let k1 = f(s);
    let k2 = f(&axpy(h / 2.0, &k1));
    let k3 = f(&axpy(h / 2.0, &k2));
    let k4 = f(&axpy(h, &k3));
    (0..s.len()).map(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}
