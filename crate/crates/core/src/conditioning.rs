//! Bayesian conditioning of world priors on observed samples, with
//! write-back of the posterior into the world table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ObservationTable;
use crate::relstore::{Catalog, Store, Value};
use crate::symbols::{display, PHI, TID};
use crate::uncertain::{world_prob, ArchivedWorldTable, RandomVar, Scope, UDatabase, UTuple, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub phi: u32,
    pub index_symbol: String,
    pub index_label: String,
    pub output_symbol: String,
    pub output_label: String,
    pub samples: Vec<(f64, f64)>,
    pub sigma: f64,
}

impl ObservationSet {
    pub fn new(phi: u32, table: ObservationTable, sigma: f64) -> Result<ObservationSet> {
        if table.samples.is_empty() {
            return Err(Error::EmptyObservationSet(format!("no samples for φ={phi}")));
        }
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::NonPositiveSigma(format!("σ={sigma}")));
        }
        let mut seen = BTreeSet::new();
        for (t, _) in &table.samples {
            if !seen.insert(t.to_bits()) {
                return Err(Error::InvalidValue(format!("index value {t} observed twice")));
            }
        }
        Ok(ObservationSet {
            phi,
            index_symbol: table.index_symbol,
            index_label: table.index_label,
            output_symbol: table.output_symbol,
            output_label: table.output_label,
            samples: table.samples,
            sigma,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|(_, y)| *y).collect()
    }
}

/// Sample standard deviation; a heuristic default for σ.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let s = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (s > 0.0 && s.is_finite()).then_some(s)
}

pub fn log_likelihood(y: f64, mu: f64, sigma: f64) -> Result<f64> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::NonPositiveSigma(format!("σ={sigma}")));
    }
    let z = (y - mu) / sigma;
    Ok(-0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln())
}

pub fn likelihood(y: f64, mu: f64, sigma: f64) -> Result<f64> {
    log_likelihood(y, mu, sigma).map(f64::exp)
}

/// Normalized posteriors for `(prior, predictions)` pairs against `obs`.
pub fn posterior(trials: &[(f64, Vec<f64>)], obs: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if obs.is_empty() {
        return Err(Error::EmptyObservationSet("no observed values".into()));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::NonPositiveSigma(format!("σ={sigma}")));
    }
    let mut logs = Vec::with_capacity(trials.len());
    for (k, (prior, mus)) in trials.iter().enumerate() {
        if prior.is_nan() || *prior <= 0.0 {
            return Err(Error::NonPositivePrior(format!("trial {k} has prior {prior}")));
        }
        if mus.len() != obs.len() {
            return Err(Error::MissingPrediction(format!("trial {k} has {} of {} predictions", mus.len(), obs.len())));
        }
        let mut l = prior.ln();
        for (y, mu) in obs.iter().zip(mus) {
            l += log_likelihood(*y, *mu, sigma)?;
        }
        logs.push(l);
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::InvalidValue("no trial has a finite likelihood".into()));
    }
    let z = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    Ok(logs.iter().map(|l| (l - z).exp()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldPosterior {
    pub upsilon: u32,
    pub tid: u32,
    pub prior: f64,
    pub posterior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub phi: u32,
    pub upsilon: u32,
    pub tid: u32,
    pub index: f64,
    pub predicted: f64,
    pub prior: f64,
    pub posterior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    pub phi: u32,
    pub index_label: String,
    pub output_label: String,
    pub sigma: f64,
    pub rows: Vec<ReportRow>,
    pub worlds: Vec<WorldPosterior>,
    pub hypothesis_aggregates: BTreeMap<u32, f64>,
}

impl PosteriorReport {
    pub fn total(&self) -> f64 {
        self.worlds.iter().map(|w| w.posterior).sum()
    }

    pub fn to_table(&self) -> String {
        let iw = self.index_label.chars().count().max(6);
        let ow = self.output_label.chars().count().max(10);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>3} {:>3} {:>4} {:>iw$} {:>ow$} {:>7} {:>9}",
            display(PHI),
            "υ",
            TID,
            self.index_label,
            self.output_label,
            "Prior",
            "Posterior"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>3} {:>3} {:>4} {:>iw$} {:>ow$.4} {:>7.4} {:>9.4}",
                r.phi,
                r.upsilon,
                r.tid,
                Value::Float(r.index).to_string(),
                r.predicted,
                r.prior,
                r.posterior
            );
        }
        for (u, p) in &self.hypothesis_aggregates {
            let _ = writeln!(s, "υ={u} aggregate {p:.4}");
        }
        s
    }
}

struct Evaluated {
    worlds: Vec<World>,
    posteriors: Vec<WorldPosterior>,
    series: Vec<BTreeMap<u64, f64>>,
}

/// Output series of every world of φ keyed by index bits.
fn prediction_series(cat: &Catalog, store: &Store, world: &World, obs: &ObservationSet) -> Result<BTreeMap<u64, f64>> {
    let hyp = cat.hypothesis(world.upsilon)?;
    let missing = || {
        Error::MissingPrediction(format!(
            "υ={} has no {} series over {}",
            world.upsilon, obs.output_symbol, obs.index_symbol
        ))
    };
    let rel = hyp
        .output_relations()
        .into_iter()
        .find(|r| r.has(&obs.output_symbol) && r.has(&obs.index_symbol))
        .ok_or_else(missing)?;
    let t = store.table(&rel.name)?;
    let pos = |a: &str| t.position(a).ok_or_else(missing);
    let (pi, ti, ii, oi) = (pos(PHI)?, pos(TID)?, pos(&obs.index_symbol)?, pos(&obs.output_symbol)?);
    Ok(t.rows
        .iter()
        .filter(|r| r[pi] == Value::Int(obs.phi as i64) && r[ti] == Value::Int(world.tid as i64))
        .map(|r| (r[ii].as_f64().to_bits(), r[oi].as_f64()))
        .collect())
}

fn evaluate(cat: &Catalog, store: &Store, udb: &UDatabase, obs: &ObservationSet) -> Result<Evaluated> {
    let all = udb.worlds.get(&obs.phi).ok_or_else(|| Error::NotUIntroduced(format!("φ={} is not u-introduced", obs.phi)))?;
    let mut worlds = Vec::new();
    let mut trials = Vec::new();
    let mut series = Vec::new();
    for w in all {
        let prior = world_prob(&w.theta, &udb.world)?;
        if prior <= 0.0 {
            continue;
        }
        let s = prediction_series(cat, store, w, obs)?;
        let mus = obs
            .samples
            .iter()
            .map(|(t, _)| {
                s.get(&t.to_bits()).copied().ok_or_else(|| {
                    Error::MissingPrediction(format!("υ={} tid={} has no value at {}={t}", w.upsilon, w.tid, obs.index_symbol))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        trials.push((prior, mus));
        worlds.push(w.clone());
        series.push(s);
    }
    let post = posterior(&trials, &obs.values(), obs.sigma)?;
    let posteriors = worlds
        .iter()
        .zip(&trials)
        .zip(post)
        .map(|((w, (prior, _)), p)| WorldPosterior { upsilon: w.upsilon, tid: w.tid, prior: *prior, posterior: p })
        .collect();
    Ok(Evaluated { worlds, posteriors, series })
}

fn report(ev: &Evaluated, obs: &ObservationSet, at: Option<f64>) -> PosteriorReport {
    let mut rows = Vec::new();
    let indices: Vec<f64> = match at {
        Some(t) => vec![t],
        None => obs.samples.iter().map(|(t, _)| *t).collect(),
    };
    for (wp, s) in ev.posteriors.iter().zip(&ev.series) {
        for t in &indices {
            if let Some(mu) = s.get(&t.to_bits()) {
                rows.push(ReportRow {
                    phi: obs.phi,
                    upsilon: wp.upsilon,
                    tid: wp.tid,
                    index: *t,
                    predicted: *mu,
                    prior: wp.prior,
                    posterior: wp.posterior,
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        b.posterior
            .total_cmp(&a.posterior)
            .then(a.upsilon.cmp(&b.upsilon))
            .then(a.tid.cmp(&b.tid))
            .then(a.index.total_cmp(&b.index))
    });
    let mut hypothesis_aggregates = BTreeMap::new();
    for w in &ev.posteriors {
        *hypothesis_aggregates.entry(w.upsilon).or_insert(0.0) += w.posterior;
    }
    PosteriorReport {
        phi: obs.phi,
        index_label: obs.index_label.clone(),
        output_label: obs.output_label.clone(),
        sigma: obs.sigma,
        rows,
        worlds: ev.posteriors.clone(),
        hypothesis_aggregates,
    }
}

/// Read-only: posteriors over all samples, rows restricted to `at` if given.
pub fn ranked_predictions(
    cat: &Catalog,
    store: &Store,
    udb: &UDatabase,
    obs: &ObservationSet,
    at: Option<f64>,
) -> Result<PosteriorReport> {
    Ok(report(&evaluate(cat, store, udb, obs)?, obs, at))
}

pub fn posterior_var_id(phi: u32) -> String {
    format!("w{phi}")
}

/// Conditions φ on `obs` and replaces its variables by one joint variable
/// whose alternatives are the surviving worlds. All or nothing.
pub fn condition_and_writeback(
    cat: &Catalog,
    store: &Store,
    udb: &mut UDatabase,
    obs: &ObservationSet,
    at: Option<f64>,
) -> Result<PosteriorReport> {
    let ev = evaluate(cat, store, udb, obs)?;
    let mut next = udb.clone();
    let retired: BTreeSet<String> = udb.variables_of(obs.phi).into_iter().collect();
    let w = posterior_var_id(obs.phi);
    next.archive.push(ArchivedWorldTable {
        label: format!("phi{}-{}", obs.phi, udb.archive.len() + 1),
        table: udb.world.clone(),
        variables: retired.iter().map(|v| udb.variables[v].clone()).collect(),
    });
    for r in next.urelations.values_mut() {
        let mut out = Vec::with_capacity(r.tuples.len());
        for t in &r.tuples {
            if !t.condition.iter().any(|(v, _)| retired.contains(v)) {
                out.push(t.clone());
                continue;
            }
            let (mine, other): (Vec<_>, Vec<_>) = t.condition.iter().cloned().partition(|(v, _)| retired.contains(v));
            for (j, world) in ev.worlds.iter().enumerate() {
                if mine.iter().all(|a| world.theta.contains(a)) {
                    let mut condition = other.clone();
                    condition.push((w.clone(), j as u32 + 1));
                    out.push(UTuple { condition, values: t.values.clone() });
                }
            }
        }
        r.tuples = out;
    }
    for v in &retired {
        next.world.entries.shift_remove(v);
        next.variables.shift_remove(v);
    }
    next.world.insert(&w, ev.posteriors.iter().map(|p| p.posterior).collect())?;
    next.variables.insert(
        w.clone(),
        RandomVar {
            id: w.clone(),
            scope: Scope::Posterior { phi: obs.phi },
            payload_attributes: vec!["upsilon".into(), TID.into()],
            alternatives: ev
                .worlds
                .iter()
                .map(|x| vec![Value::Int(x.upsilon as i64), Value::Int(x.tid as i64)])
                .collect(),
        },
    );
    next.worlds.insert(
        obs.phi,
        ev.worlds
            .iter()
            .enumerate()
            .map(|(j, x)| World { upsilon: x.upsilon, tid: x.tid, theta: vec![(w.clone(), j as u32 + 1)] })
            .collect(),
    );
    *udb = next;
    Ok(report(&ev, obs, at))
}

/// Current probability of every world of φ, most probable first.
pub fn world_probabilities(udb: &UDatabase, phi: u32) -> Result<Vec<WorldPosterior>> {
    let worlds = udb.worlds.get(&phi).ok_or_else(|| Error::NotUIntroduced(format!("φ={phi} is not u-introduced")))?;
    let mut out = worlds
        .iter()
        .map(|w| {
            let p = world_prob(&w.theta, &udb.world)?;
            Ok(WorldPosterior { upsilon: w.upsilon, tid: w.tid, prior: p, posterior: p })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| b.prior.total_cmp(&a.prior).then(a.upsilon.cmp(&b.upsilon)).then(a.tid.cmp(&b.tid)));
    Ok(out)
}
