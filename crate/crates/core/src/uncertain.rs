//! U-relations: repair-key, empirical u-factorization, u-propagation, the
//! world table and exact tuple confidence.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Role;
use crate::relstore::{self, Catalog, Row, Store, Value, H0};
use crate::symbols::{PHI, TID};

pub type Assignment = (String, u32);
pub type Condition = Vec<Assignment>;

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scope {
    /// Competing hypotheses for one phenomenon.
    Theoretical { phi: u32 },
    /// A cluster of co-varying parameters of one hypothesis.
    Empirical { phi: u32, upsilon: u32, attributes: Vec<String> },
    /// Joint posterior over the worlds of one phenomenon.
    Posterior { phi: u32 },
    /// Produced by a bare repair-key over some relation.
    Repair { relation: String },
}

impl Scope {
    pub fn phi(&self) -> Option<u32> {
        match self {
            Scope::Theoretical { phi } | Scope::Empirical { phi, .. } | Scope::Posterior { phi } => Some(*phi),
            Scope::Repair { .. } => None,
        }
    }
}

/// Discrete random variable; alternative `i` (1-based) carries `alternatives[i-1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomVar {
    pub id: String,
    pub scope: Scope,
    pub payload_attributes: Vec<String>,
    pub alternatives: Vec<Vec<Value>>,
}

/// Marginal probabilities per variable, in creation order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldTable {
    pub entries: IndexMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldEntry {
    pub var: String,
    pub val: u32,
    pub prob: f64,
}

impl WorldTable {
    pub fn insert(&mut self, var: &str, probs: Vec<f64>) -> Result<()> {
        if probs.is_empty() || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidValue(format!("{var}: marginals must lie in [0, 1]")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidValue(format!("{var}: marginals sum to {total}")));
        }
        self.entries.insert(var.to_string(), probs);
        Ok(())
    }

    pub fn prob(&self, var: &str, val: u32) -> Result<f64> {
        self.entries
            .get(var)
            .and_then(|ps| ps.get((val as usize).wrapping_sub(1)))
            .copied()
            .ok_or_else(|| Error::UnknownAssignment(format!("{var}↦{val}")))
    }

    pub fn arity(&self, var: &str) -> Option<usize> {
        self.entries.get(var).map(Vec::len)
    }

    pub fn rows(&self) -> Vec<WorldEntry> {
        self.entries
            .iter()
            .flat_map(|(v, ps)| {
                ps.iter().enumerate().map(move |(i, p)| WorldEntry { var: v.clone(), val: i as u32 + 1, prob: *p })
            })
            .collect()
    }

    pub fn is_normalized(&self) -> bool {
        self.entries.values().all(|ps| (ps.iter().sum::<f64>() - 1.0).abs() <= NORMALIZATION_TOLERANCE)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["var", "val", "prob"]).expect("in-memory write");
        for e in self.rows() {
            w.write_record([e.var, e.val.to_string(), e.prob.to_string()]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
    }

    pub fn from_csv(text: &str) -> Result<WorldTable> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut entries: IndexMap<String, Vec<f64>> = IndexMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::InvalidCsv(e.to_string()))?;
            let bad = || Error::CorruptProject(format!("world table row {:?}", rec));
            let val: usize = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let prob: f64 = rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let ps = entries.entry(rec[0].to_string()).or_default();
            if val != ps.len() + 1 {
                return Err(bad());
            }
            ps.push(prob);
        }
        Ok(WorldTable { entries })
    }
}

pub fn world_prob(theta: &[Assignment], w: &WorldTable) -> Result<f64> {
    theta.iter().try_fold(1.0, |acc, (v, i)| Ok(acc * w.prob(v, *i)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UTuple {
    pub condition: Condition,
    pub values: Row,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum UOrigin {
    Theoretical,
    Parameter { upsilon: u32, attribute: String },
    Output { upsilon: u32, relation: String },
    Repair { relation: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct URelation {
    pub name: String,
    pub origin: UOrigin,
    pub data_attributes: Vec<String>,
    #[serde(default)]
    pub tuples: Vec<UTuple>,
}

impl URelation {
    pub fn condition_width(&self) -> usize {
        self.tuples.iter().map(|t| t.condition.len()).max().unwrap_or(0)
    }

    pub fn position(&self, attr: &str) -> Option<usize> {
        self.data_attributes.iter().position(|a| a == attr)
    }

    pub fn to_csv(&self) -> String {
        let m = self.condition_width();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = (1..=m).flat_map(|i| [format!("V{i}"), format!("D{i}")]).collect();
        header.extend(self.data_attributes.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for t in &self.tuples {
            let mut rec: Vec<String> = Vec::with_capacity(header.len());
            for i in 0..m {
                match t.condition.get(i) {
                    Some((v, d)) => rec.extend([v.clone(), d.to_string()]),
                    None => rec.extend([String::new(), String::new()]),
                }
            }
            rec.extend(t.values.iter().map(Value::to_string));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
    }

    pub fn load_tuples(&mut self, text: &str) -> Result<()> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::InvalidCsv(e.to_string()))?.clone();
        let m = headers.iter().take_while(|h| h.starts_with('V') || h.starts_with('D')).count() / 2;
        if headers.len() != 2 * m + self.data_attributes.len() {
            return Err(Error::CorruptProject(format!("{}: header does not match", self.name)));
        }
        self.tuples.clear();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::InvalidCsv(e.to_string()))?;
            let mut condition = Vec::new();
            for i in 0..m {
                let (v, d) = (&rec[2 * i], &rec[2 * i + 1]);
                if v.is_empty() {
                    continue;
                }
                let d: u32 = d.parse().map_err(|_| Error::CorruptProject(format!("{}: bad value index {d:?}", self.name)))?;
                condition.push((v.to_string(), d));
            }
            let values = self
                .data_attributes
                .iter()
                .enumerate()
                .map(|(k, a)| relstore::parse_value(a, &rec[2 * m + k]))
                .collect::<Result<Row>>()?;
            self.tuples.push(UTuple { condition, values });
        }
        Ok(())
    }
}

pub struct Repair {
    pub urelation: URelation,
    pub variables: Vec<RandomVar>,
    pub marginals: Vec<Vec<f64>>,
}

/// One fresh variable per distinct key value; each row sharing that key
/// becomes one alternative, weighted by `weight` or uniformly.
pub fn repair_key(
    name: &str,
    attributes: &[String],
    rows: &[Row],
    key: &[String],
    weight: Option<&str>,
    fresh: &mut dyn FnMut() -> String,
) -> Result<Repair> {
    let pos = |a: &str| {
        attributes
            .iter()
            .position(|x| x == a)
            .ok_or_else(|| Error::UnknownAttribute(format!("{a} is not an attribute of {name}")))
    };
    let key_pos: Vec<usize> = key.iter().map(|k| pos(k)).collect::<Result<_>>()?;
    let weight_pos = weight.map(pos).transpose()?;
    let mut groups: IndexMap<Vec<Value>, Vec<usize>> = IndexMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups.entry(key_pos.iter().map(|&k| r[k]).collect()).or_default().push(i);
    }
    let data_attributes: Vec<String> =
        attributes.iter().enumerate().filter(|(i, _)| Some(*i) != weight_pos).map(|(_, a)| a.clone()).collect();
    let mut urel = URelation {
        name: name.to_string(),
        origin: UOrigin::Repair { relation: name.to_string() },
        data_attributes: data_attributes.clone(),
        tuples: Vec::new(),
    };
    let mut variables = Vec::new();
    let mut marginals = Vec::new();
    for (_, members) in groups {
        let weights: Vec<f64> = match weight_pos {
            None => vec![1.0; members.len()],
            Some(w) => members.iter().map(|&i| rows[i][w].as_f64()).collect(),
        };
        if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w <= 0.0) {
            return Err(Error::NonPositiveWeight(format!("weight {bad} in {name}")));
        }
        let total: f64 = weights.iter().sum();
        let id = fresh();
        let mut alternatives = Vec::new();
        for (alt, &i) in members.iter().enumerate() {
            let values: Row =
                rows[i].iter().enumerate().filter(|(k, _)| Some(*k) != weight_pos).map(|(_, v)| *v).collect();
            urel.tuples.push(UTuple { condition: vec![(id.clone(), alt as u32 + 1)], values: values.clone() });
            alternatives.push(values);
        }
        marginals.push(weights.iter().map(|w| w / total).collect());
        variables.push(RandomVar {
            id,
            scope: Scope::Repair { relation: name.to_string() },
            payload_attributes: data_attributes.clone(),
            alternatives,
        });
    }
    Ok(Repair { urelation: urel, variables, marginals })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub attributes: Vec<String>,
    /// Distinct value tuples in order of first appearance.
    pub alternatives: Vec<Vec<f64>>,
}

fn bits(v: f64) -> u64 {
    v.to_bits()
}

/// True iff the value columns determine each other in both directions.
pub fn bijective(a: &[f64], b: &[f64]) -> bool {
    let mut fwd: BTreeMap<u64, u64> = BTreeMap::new();
    let mut bwd: BTreeMap<u64, u64> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        if *fwd.entry(bits(*x)).or_insert(bits(*y)) != bits(*y) || *bwd.entry(bits(*y)).or_insert(bits(*x)) != bits(*x) {
            return false;
        }
    }
    true
}

/// Partitions parameter columns into u-factors: constants together, other
/// columns grouped by pairwise bijection. `rows` must be in tid order.
pub fn u_factorize(attributes: &[String], rows: &[Vec<f64>]) -> Result<Vec<Cluster>> {
    if rows.is_empty() {
        return Err(Error::NoTrials("parameter relation is empty".into()));
    }
    let n = attributes.len();
    let column = |j: usize| -> Vec<f64> { rows.iter().map(|r| r[j]).collect() };
    let cols: Vec<Vec<f64>> = (0..n).map(column).collect();
    let constant: Vec<bool> = cols.iter().map(|c| c.iter().all(|v| bits(*v) == bits(c[0]))).collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut const_group: Option<usize> = None;
    for j in 0..n {
        if constant[j] {
            match const_group {
                Some(g) => groups[g].push(j),
                None => {
                    const_group = Some(groups.len());
                    groups.push(vec![j]);
                }
            }
            continue;
        }
        match groups.iter_mut().find(|g| !constant[g[0]] && bijective(&cols[g[0]], &cols[j])) {
            Some(g) => g.push(j),
            None => groups.push(vec![j]),
        }
    }
    Ok(groups
        .into_iter()
        .map(|g| {
            let mut alternatives: Vec<Vec<f64>> = Vec::new();
            for r in rows {
                let t: Vec<f64> = g.iter().map(|&j| r[j]).collect();
                if !alternatives.iter().any(|a| a.iter().map(|v| bits(*v)).eq(t.iter().map(|v| bits(*v)))) {
                    alternatives.push(t);
                }
            }
            Cluster { attributes: g.iter().map(|&j| attributes[j].clone()).collect(), alternatives }
        })
        .collect())
}

/// Alternative index (1-based) of each cluster for one parameter row.
pub fn u_propagate(attributes: &[String], row: &[f64], clusters: &[Cluster], vars: &[String]) -> Result<Condition> {
    clusters
        .iter()
        .zip(vars)
        .map(|(c, var)| {
            let t: Vec<u64> = c
                .attributes
                .iter()
                .map(|a| attributes.iter().position(|x| x == a).map(|j| bits(row[j])))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::UnfactorizedTrial(format!("cluster {:?} not in parameter row", c.attributes)))?;
            c.alternatives
                .iter()
                .position(|alt| alt.iter().map(|v| bits(*v)).eq(t.iter().copied()))
                .map(|i| (var.clone(), i as u32 + 1))
                .ok_or_else(|| Error::UnfactorizedTrial(format!("no alternative of {var} matches the trial")))
        })
        .collect()
}

/// Exact probability that at least one conjunction holds.
pub fn dnf_probability(clauses: &[Condition], w: &WorldTable) -> Result<f64> {
    for c in clauses {
        for (v, i) in c {
            w.prob(v, *i)?;
        }
    }
    let clauses: Vec<Condition> = clauses.to_vec();
    let comps = independent_components(&clauses);
    let mut miss = 1.0;
    for comp in comps {
        miss *= 1.0 - shannon(&comp, w);
    }
    Ok(1.0 - miss)
}

fn independent_components(clauses: &[Condition]) -> Vec<Vec<Condition>> {
    let mut parent: Vec<usize> = (0..clauses.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let n = p[y];
            p[y] = r;
            y = n;
        }
        r
    }
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, c) in clauses.iter().enumerate() {
        for (v, _) in c {
            match owner.get(v.as_str()) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
                None => {
                    owner.insert(v, i);
                }
            }
        }
    }
    let mut comps: BTreeMap<usize, Vec<Condition>> = BTreeMap::new();
    for (i, c) in clauses.iter().enumerate() {
        let r = find(&mut parent, i);
        comps.entry(r).or_default().push(c.clone());
    }
    comps.into_values().collect()
}

/// Shannon expansion on the most frequent variable.
fn shannon(clauses: &[Condition], w: &WorldTable) -> f64 {
    if clauses.is_empty() {
        return 0.0;
    }
    if clauses.iter().any(|c| c.is_empty()) {
        return 1.0;
    }
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for c in clauses {
        for (v, _) in c {
            *freq.entry(v.as_str()).or_default() += 1;
        }
    }
    let var = freq.iter().max_by_key(|(v, n)| (**n, std::cmp::Reverse(**v))).map(|(v, _)| v.to_string()).unwrap();
    let probs = &w.entries[&var];
    let mentioned: BTreeSet<u32> = clauses.iter().flat_map(|c| c.iter().filter(|(v, _)| *v == var).map(|(_, i)| *i)).collect();
    let mut total = 0.0;
    let restrict = |val: Option<u32>| -> Vec<Condition> {
        clauses
            .iter()
            .filter(|c| c.iter().all(|(v, i)| *v != var || Some(*i) == val))
            .map(|c| c.iter().filter(|(v, _)| *v != var).cloned().collect())
            .collect()
    };
    for &val in &mentioned {
        let p = probs[val as usize - 1];
        if p > 0.0 {
            total += p * shannon(&restrict(Some(val)), w);
        }
    }
    let rest: f64 = probs.iter().enumerate().filter(|(i, _)| !mentioned.contains(&(*i as u32 + 1))).map(|(_, p)| p).sum();
    if rest > 0.0 {
        total += rest * shannon(&restrict(None), w);
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confidence {
    pub values: Row,
    pub conf: f64,
}

/// Confidence of every distinct data tuple, in order of first appearance.
pub fn conf(tuples: &[UTuple], w: &WorldTable) -> Result<Vec<Confidence>> {
    let mut groups: IndexMap<&Row, Vec<Condition>> = IndexMap::new();
    for t in tuples {
        groups.entry(&t.values).or_default().push(t.condition.clone());
    }
    groups
        .into_iter()
        .map(|(values, clauses)| Ok(Confidence { values: values.clone(), conf: dnf_probability(&clauses, w)? }))
        .collect()
}

/// One possible world of a phenomenon: a trial of a hypothesis and its condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub upsilon: u32,
    pub tid: u32,
    pub theta: Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchivedWorldTable {
    pub label: String,
    pub table: WorldTable,
    pub variables: Vec<RandomVar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "warning")]
pub enum UWarning {
    NonCartesianTrials { phi: u32, upsilon: u32, worlds: usize, combinations: usize },
    NoTrials { phi: u32, upsilon: u32 },
    DroppedTuple { relation: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UIntroReport {
    pub phi: u32,
    pub variables: Vec<String>,
    pub urelations: Vec<String>,
    pub worlds: usize,
    pub warnings: Vec<UWarning>,
}

/// The uncertain half of a project.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UDatabase {
    #[serde(skip)]
    pub world: WorldTable,
    pub variables: IndexMap<String, RandomVar>,
    #[serde(skip)]
    pub urelations: IndexMap<String, URelation>,
    pub next_var: u32,
    pub worlds: BTreeMap<u32, Vec<World>>,
    #[serde(skip)]
    pub archive: Vec<ArchivedWorldTable>,
}

pub const Y0: &str = "Y_0";

impl UDatabase {
    pub fn fresh_var(&mut self) -> String {
        let id = format!("x{}", self.next_var);
        self.next_var += 1;
        id
    }

    pub fn is_introduced(&self, phi: u32) -> bool {
        self.worlds.contains_key(&phi)
    }

    pub fn theoretical_var(&self, phi: u32) -> Option<&RandomVar> {
        self.variables.values().find(|v| v.scope == Scope::Theoretical { phi })
    }

    pub fn urelation(&self, name: &str) -> Result<&URelation> {
        self.urelations.get(name).ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    fn urelation_for(&mut self, upsilon: u32, origin: UOrigin, data_attributes: Vec<String>) -> String {
        if let Some(r) = self.urelations.values().find(|r| r.origin == origin) {
            return r.name.clone();
        }
        let prefix = format!("Y_{upsilon}^");
        let k = self.urelations.keys().filter(|n| n.starts_with(&prefix)).count() + 1;
        let name = format!("{prefix}{k}");
        self.urelations.insert(name.clone(), URelation { name: name.clone(), origin, data_attributes, tuples: Vec::new() });
        name
    }

    /// Creates or refreshes theoretical variables for every phenomenon in H_0
    /// that has not been u-introduced yet, ascending by φ.
    fn refresh_theoretical(&mut self, store: &Store) -> Result<Vec<String>> {
        let h0 = store.table(H0)?;
        let rows = h0.sorted_rows();
        let mut by_phi: BTreeMap<u32, Vec<Row>> = BTreeMap::new();
        for r in rows {
            by_phi.entry(r[0].as_int().unwrap_or_default() as u32).or_default().push(r);
        }
        let mut created = Vec::new();
        let y0 = self.urelations.entry(Y0.to_string()).or_insert_with(|| URelation {
            name: Y0.to_string(),
            origin: UOrigin::Theoretical,
            data_attributes: h0.def.attributes.clone(),
            tuples: Vec::new(),
        });
        let mut keep: Vec<UTuple> = y0.tuples.iter().filter(|t| self.worlds.contains_key(&(t.values[0].as_int().unwrap_or_default() as u32))).cloned().collect();
        for (phi, group) in by_phi {
            if self.worlds.contains_key(&phi) {
                continue;
            }
            let existing = self.theoretical_var(phi).map(|v| v.id.clone());
            let mut next = self.next_var;
            let mut fresh = || match &existing {
                Some(id) => id.clone(),
                None => {
                    let id = format!("x{next}");
                    next += 1;
                    id
                }
            };
            let rep = repair_key(H0, &h0.def.attributes, &group, &[PHI.to_string()], None, &mut fresh)?;
            self.next_var = next;
            for (mut var, probs) in rep.variables.into_iter().zip(rep.marginals) {
                var.scope = Scope::Theoretical { phi };
                if existing.is_none() {
                    created.push(var.id.clone());
                }
                self.world.insert(&var.id, probs)?;
                self.variables.insert(var.id.clone(), var);
            }
            keep.extend(rep.urelation.tuples);
        }
        keep.sort_by(|a, b| a.values.cmp(&b.values));
        self.urelations.get_mut(Y0).expect("inserted above").tuples = keep;
        Ok(created)
    }

    /// Repair-key on H_0, then u-factorize and u-propagate every hypothesis of φ.
    pub fn u_intro(&mut self, cat: &Catalog, store: &Store, phi: u32) -> Result<UIntroReport> {
        if self.is_introduced(phi) {
            return Err(Error::StageViolation(format!("φ={phi} is already u-introduced")));
        }
        let mut report = UIntroReport { phi, ..Default::default() };
        report.variables = self.refresh_theoretical(store)?;
        let theo = self
            .theoretical_var(phi)
            .cloned()
            .ok_or_else(|| Error::UnknownPhenomenon(format!("φ={phi} has no hypotheses in H_0")))?;
        let mut worlds = Vec::new();
        for upsilon in cat.targets_of(phi) {
            let hyp = cat.hypothesis(upsilon)?;
            let tids = store.tids(hyp, phi);
            if tids.is_empty() {
                report.warnings.push(UWarning::NoTrials { phi, upsilon });
                continue;
            }
            let alt = theo
                .alternatives
                .iter()
                .position(|a| a[1] == Value::Int(upsilon as i64))
                .expect("theoretical alternatives mirror H_0") as u32
                + 1;

            let (param_attrs, param_rows) = match hyp.parameter_relation() {
                Some(def) => {
                    let t = store.table(&def.name)?;
                    let attrs: Vec<String> = def.attributes.iter().filter(|a| *a != PHI).cloned().collect();
                    let pos: Vec<usize> = attrs.iter().map(|a| t.position(a).expect("deployed")).collect();
                    let (ti, pi) = (t.position(TID).expect("deployed"), t.position(PHI).expect("deployed"));
                    let mut rows: Vec<(u32, Vec<f64>)> = t
                        .rows
                        .iter()
                        .filter(|r| r[pi] == Value::Int(phi as i64))
                        .map(|r| (r[ti].as_int().unwrap_or_default() as u32, pos.iter().map(|&j| r[j].as_f64()).collect()))
                        .collect();
                    rows.sort_by_key(|(tid, _)| *tid);
                    (attrs, rows)
                }
                None => (Vec::new(), tids.iter().map(|&t| (t as u32, Vec::new())).collect()),
            };
            let clusters = if param_attrs.is_empty() {
                Vec::new()
            } else {
                u_factorize(&param_attrs, &param_rows.iter().map(|(_, r)| r.clone()).collect::<Vec<_>>())?
            };

            let mut cluster_vars = Vec::new();
            for c in &clusters {
                let id = self.fresh_var();
                let d = c.alternatives.len();
                self.world.insert(&id, vec![1.0 / d as f64; d])?;
                self.variables.insert(
                    id.clone(),
                    RandomVar {
                        id: id.clone(),
                        scope: Scope::Empirical { phi, upsilon, attributes: c.attributes.clone() },
                        payload_attributes: c.attributes.clone(),
                        alternatives: c.alternatives.iter().map(|a| a.iter().map(|v| Value::Float(*v)).collect()).collect(),
                    },
                );
                report.variables.push(id.clone());
                cluster_vars.push(id);
            }

            let mut thetas: BTreeMap<u32, Condition> = BTreeMap::new();
            let mut seen: BTreeMap<Condition, u32> = BTreeMap::new();
            for (tid, row) in &param_rows {
                let mut theta = vec![(theo.id.clone(), alt)];
                theta.extend(u_propagate(&param_attrs, row, &clusters, &cluster_vars)?);
                if let Some(other) = seen.insert(theta.clone(), *tid) {
                    return Err(Error::UnfactorizedTrial(format!(
                        "trials {other} and {tid} of υ={upsilon} share parameter values"
                    )));
                }
                thetas.insert(*tid, theta);
            }
            let combinations: usize = clusters.iter().map(|c| c.alternatives.len()).product();
            if thetas.len() < combinations {
                report.warnings.push(UWarning::NonCartesianTrials { phi, upsilon, worlds: thetas.len(), combinations });
            }

            // Parameter U-relations: cluster representatives first, then outputs, then the rest.
            let mut param_names: BTreeMap<String, String> = BTreeMap::new();
            let reps: Vec<&String> = clusters.iter().map(|c| &c.attributes[0]).collect();
            let mut order: Vec<&String> = reps.clone();
            for c in &clusters {
                order.extend(c.attributes.iter().skip(1));
            }
            let mut create = |udb: &mut UDatabase, attr: &String| {
                let name = udb.urelation_for(
                    upsilon,
                    UOrigin::Parameter { upsilon, attribute: attr.clone() },
                    vec![PHI.to_string(), attr.clone()],
                );
                param_names.insert(attr.clone(), name);
            };
            for a in &reps {
                create(self, a);
            }
            let mut output_names = Vec::new();
            for def in hyp.output_relations() {
                let data: Vec<String> = def.attributes.clone();
                output_names.push((
                    def.name.clone(),
                    self.urelation_for(upsilon, UOrigin::Output { upsilon, relation: def.name.clone() }, data),
                ));
            }
            for a in order.iter().skip(reps.len()) {
                create(self, a);
            }
            for (c, var) in clusters.iter().zip(&cluster_vars) {
                for (j, attr) in c.attributes.iter().enumerate() {
                    let name = &param_names[attr];
                    let ur = self.urelations.get_mut(name).expect("created above");
                    for (i, alt) in c.alternatives.iter().enumerate() {
                        ur.tuples.push(UTuple {
                            condition: vec![(var.clone(), i as u32 + 1)],
                            values: vec![Value::Int(phi as i64), Value::Float(alt[j])],
                        });
                    }
                    if !report.urelations.contains(name) {
                        report.urelations.push(name.clone());
                    }
                }
            }
            for (certain, uname) in output_names {
                let t = store.table(&certain)?;
                let (ti, pi) = (t.position(TID).expect("deployed"), t.position(PHI).expect("deployed"));
                let mut rows: Vec<&Row> = t.rows.iter().filter(|r| r[pi] == Value::Int(phi as i64)).collect();
                rows.sort();
                let ur = self.urelations.get_mut(&uname).expect("created above");
                for r in rows {
                    let tid = r[ti].as_int().unwrap_or_default() as u32;
                    let theta = thetas
                        .get(&tid)
                        .ok_or_else(|| Error::UnfactorizedTrial(format!("output row of tid {tid} has no parameter row")))?;
                    let values: Row = r.iter().enumerate().filter(|(k, _)| *k != ti).map(|(_, v)| *v).collect();
                    ur.tuples.push(UTuple { condition: theta.clone(), values });
                }
                if !report.urelations.contains(&uname) {
                    report.urelations.push(uname);
                }
            }
            for (tid, theta) in thetas {
                worlds.push(World { upsilon, tid, theta });
            }
        }
        if worlds.is_empty() {
            return Err(Error::StageViolation(format!("φ={phi} has no loaded trials")));
        }
        report.worlds = worlds.len();
        self.worlds.insert(phi, worlds);
        Ok(report)
    }

    /// Variables currently conditioning the worlds of φ.
    pub fn variables_of(&self, phi: u32) -> Vec<String> {
        self.variables.values().filter(|v| v.scope.phi() == Some(phi)).map(|v| v.id.clone()).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&PersistedU {
            state: self.clone(),
            urelations: self
                .urelations
                .values()
                .map(|r| URelation { tuples: Vec::new(), ..r.clone() })
                .collect(),
            archive: self.archive.iter().map(|a| (a.label.clone(), a.variables.clone())).collect(),
        })
        .map_err(|e| Error::Io(e.to_string()))?;
        relstore::write_atomic(&dir.join("uncertain.json"), json.as_bytes())?;
        relstore::write_atomic(&dir.join("world.csv"), self.world.to_csv().as_bytes())?;
        let udir = dir.join("urelations");
        std::fs::create_dir_all(&udir)?;
        for (name, r) in &self.urelations {
            relstore::write_atomic(&udir.join(format!("{name}.csv")), r.to_csv().as_bytes())?;
        }
        let adir = dir.join("archive");
        std::fs::create_dir_all(&adir)?;
        for (k, a) in self.archive.iter().enumerate() {
            relstore::write_atomic(&adir.join(format!("world-{}.csv", k + 1)), a.table.to_csv().as_bytes())?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<UDatabase> {
        let path = dir.join("uncertain.json");
        if !path.exists() {
            return Ok(UDatabase::default());
        }
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::CorruptProject(format!("{}: {e}", p.display())));
        let persisted: PersistedU =
            serde_json::from_str(&read(&path)?).map_err(|e| Error::CorruptProject(format!("uncertain.json: {e}")))?;
        let mut u = persisted.state;
        u.world = WorldTable::from_csv(&read(&dir.join("world.csv"))?)?;
        for mut r in persisted.urelations {
            r.load_tuples(&read(&dir.join("urelations").join(format!("{}.csv", r.name)))?)?;
            u.urelations.insert(r.name.clone(), r);
        }
        for (k, (label, variables)) in persisted.archive.into_iter().enumerate() {
            let table = WorldTable::from_csv(&read(&dir.join("archive").join(format!("world-{}.csv", k + 1)))?)?;
            u.archive.push(ArchivedWorldTable { label, table, variables });
        }
        Ok(u)
    }
}

#[derive(Serialize, Deserialize)]
struct PersistedU {
    state: UDatabase,
    urelations: Vec<URelation>,
    archive: Vec<(String, Vec<RandomVar>)>,
}

/// Role lookup helper for callers that only hold the catalog.
pub fn output_symbols(cat: &Catalog, upsilon: u32) -> Result<Vec<String>> {
    Ok(cat.hypothesis(upsilon)?.structure.symbols_with(Role::Output))
}
