//! Certain relational storage: deployed schemas, trial loading with tid
//! repair, selections and CSV persistence.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{self, PhenomenonDecl, Role, Structure};
use crate::causal::CausalMapping;
use crate::symbols::{self, PHI, TID, UPSILON};
use crate::synthesis::{GlobalTag, Origin, RelationDef, SchemaCatalog};

pub const H0: &str = "H_0";

/// A stored scalar: integer ids or double-precision measurements.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Int(i) => i as f64,
            Value::Float(f) => f,
        }
    }

    pub fn as_int(self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(i),
            Value::Float(_) => None,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::Int(a), Value::Float(b)) => (*a as f64).total_cmp(b).then(Ordering::Less),
            (Value::Float(a), Value::Int(b)) => a.total_cmp(&(*b as f64)).then(Ordering::Greater),
        }
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Int(i) => (0u8, *i).hash(state),
            Value::Float(f) => (1u8, f.to_bits()).hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
        }
    }
}

pub fn is_id_column(attr: &str) -> bool {
    matches!(attr, PHI | UPSILON | TID)
}

/// Parses a textual cell according to the column's type.
pub fn parse_value(attr: &str, raw: &str) -> Result<Value> {
    let s = raw.trim();
    if is_id_column(attr) {
        s.parse::<i64>()
            .map(Value::Int)
            .map_err(|_| Error::InvalidValue(format!("{attr} expects an integer, got {raw:?}")))
    } else {
        ingest::parse_number(s).map(Value::Float)
    }
}

pub type Row = Vec<Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub def: RelationDef,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(def: RelationDef) -> Table {
        Table { def, rows: Vec::new() }
    }

    pub fn position(&self, attr: &str) -> Option<usize> {
        self.def.attributes.iter().position(|a| a == attr)
    }

    fn key_positions(&self) -> Vec<Vec<usize>> {
        self.def
            .keys
            .iter()
            .map(|k| k.iter().map(|a| self.position(a).expect("keys are subsets of attributes")).collect())
            .collect()
    }

    /// Inserts `batch` only if neither it nor the existing rows collide on any key.
    pub fn insert_checked(&mut self, batch: Vec<Row>) -> Result<()> {
        for key in self.key_positions() {
            let mut seen: BTreeSet<Vec<Value>> = self.rows.iter().map(|r| key.iter().map(|&i| r[i]).collect()).collect();
            for r in &batch {
                let k: Vec<Value> = key.iter().map(|&i| r[i]).collect();
                if !seen.insert(k.clone()) {
                    let shown: Vec<String> =
                        key.iter().zip(&k).map(|(&i, v)| format!("{}={v}", self.def.attributes[i])).collect();
                    return Err(Error::KeyViolation(format!("{}: duplicate key ({})", self.def.name, shown.join(", "))));
                }
            }
        }
        self.rows.extend(batch);
        Ok(())
    }

    pub fn sorted_rows(&self) -> Vec<Row> {
        let mut rows = self.rows.clone();
        rows.sort();
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.def.attributes).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Value::to_string)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
    }

    pub fn from_csv(def: RelationDef, text: &str) -> Result<Table> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::InvalidCsv(e.to_string()))?;
        if headers.iter().ne(def.attributes.iter().map(String::as_str)) {
            return Err(Error::CorruptProject(format!("{}: header does not match schema", def.name)));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::InvalidCsv(e.to_string()))?;
            let row = def.attributes.iter().zip(rec.iter()).map(|(a, s)| parse_value(a, s)).collect::<Result<Row>>()?;
            rows.push(row);
        }
        Ok(Table { def, rows })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub index: f64,
    pub outputs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDataset {
    pub phi: u32,
    pub upsilon: u32,
    pub parameters: BTreeMap<String, f64>,
    pub index_symbol: String,
    pub series: Vec<SeriesPoint>,
}

/// Parses the trial CSV layout: a `param:` header row and its values, then a
/// series header led by the index symbol and one row per index value.
pub fn parse_trial_csv(text: &str, phi: u32, upsilon: u32) -> Result<TrialDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let records: Vec<csv::StringRecord> = rdr
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidCsv(e.to_string()))?;
    let mut rows = records.iter().filter(|r| !(r.len() == 1 && r[0].is_empty()));
    let mut parameters = BTreeMap::new();
    let mut header = rows.next().ok_or_else(|| Error::InvalidCsv("empty trial file".into()))?;
    if header.iter().next().is_some_and(|c| c.starts_with("param:")) {
        let values = rows.next().ok_or_else(|| Error::InvalidCsv("parameter header without values".into()))?;
        if values.len() != header.len() {
            return Err(Error::InvalidCsv("parameter row width differs from its header".into()));
        }
        for (h, v) in header.iter().zip(values.iter()) {
            let sym = h
                .strip_prefix("param:")
                .ok_or_else(|| Error::InvalidCsv(format!("expected `param:<symbol>`, got {h:?}")))?;
            if parameters.insert(sym.to_string(), ingest::parse_number(v)?).is_some() {
                return Err(Error::InvalidCsv(format!("parameter {sym} repeated")));
            }
        }
        header = rows.next().ok_or_else(|| Error::InvalidCsv("missing series header".into()))?;
    }
    let cols: Vec<String> = header.iter().map(str::to_string).collect();
    if cols.is_empty() || cols[0].is_empty() {
        return Err(Error::InvalidCsv("series header needs an index column".into()));
    }
    let mut series = Vec::new();
    for r in rows {
        if r.len() != cols.len() {
            return Err(Error::InvalidCsv(format!("series row has {} cells, header has {}", r.len(), cols.len())));
        }
        let index = ingest::parse_number(&r[0])?;
        let outputs = cols[1..]
            .iter()
            .zip(r.iter().skip(1))
            .map(|(c, v)| Ok((c.clone(), ingest::parse_number(v)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        series.push(SeriesPoint { index, outputs });
    }
    Ok(TrialDataset { phi, upsilon, parameters, index_symbol: cols[0].clone(), series })
}

pub fn write_trial_csv(d: &TrialDataset) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    if !d.parameters.is_empty() {
        w.write_record(d.parameters.keys().map(|k| format!("param:{k}"))).expect("in-memory write");
        w.write_record(d.parameters.values().map(f64::to_string)).expect("in-memory write");
    }
    let outs: Vec<&String> = d.series.first().map(|p| p.outputs.keys().collect()).unwrap_or_default();
    let mut header = vec![d.index_symbol.clone()];
    header.extend(outs.iter().map(|s| s.to_string()));
    w.write_record(&header).expect("in-memory write");
    for p in &d.series {
        let mut rec = vec![p.index.to_string()];
        rec.extend(outs.iter().map(|o| p.outputs.get(*o).map(f64::to_string).unwrap_or_default()));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisEntry {
    pub upsilon: u32,
    pub name: String,
    pub structure: Structure,
    pub mapping: CausalMapping,
    pub schema: SchemaCatalog,
}

impl HypothesisEntry {
    /// The relation holding φ-determined parameters (key {φ}), if any.
    pub fn parameter_relation(&self) -> Option<&RelationDef> {
        let params: BTreeSet<String> = self.structure.symbols_with(Role::Parameter).into_iter().collect();
        self.schema
            .relations
            .iter()
            .find(|r| r.attributes.iter().any(|a| params.contains(a)) && r.attributes.iter().all(|a| a == PHI || params.contains(a)))
    }

    /// Relations carrying simulated outputs.
    pub fn output_relations(&self) -> Vec<&RelationDef> {
        let outs: BTreeSet<String> = self.structure.symbols_with(Role::Output).into_iter().collect();
        self.schema.relations.iter().filter(|r| r.attributes.iter().any(|a| outs.contains(a))).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub phenomena: Vec<PhenomenonDecl>,
    pub hypotheses: Vec<HypothesisEntry>,
    pub h0: Vec<(u32, u32)>,
}

impl Catalog {
    pub fn phenomenon(&self, phi: u32) -> Result<&PhenomenonDecl> {
        self.phenomena
            .iter()
            .find(|p| p.id == phi)
            .ok_or_else(|| Error::UnknownPhenomenon(format!("φ={phi}")))
    }

    pub fn hypothesis(&self, upsilon: u32) -> Result<&HypothesisEntry> {
        self.hypotheses
            .iter()
            .find(|h| h.upsilon == upsilon)
            .ok_or_else(|| Error::UnknownHypothesis(format!("υ={upsilon}")))
    }

    pub fn targets_of(&self, phi: u32) -> Vec<u32> {
        let mut v: Vec<u32> = self.h0.iter().filter(|(p, _)| *p == phi).map(|(_, u)| *u).collect();
        v.sort_unstable();
        v
    }
}

/// All deployed certain relations, in deployment order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Store {
    pub tables: IndexMap<String, Table>,
}

pub fn h0_def() -> RelationDef {
    RelationDef {
        name: H0.to_string(),
        attributes: vec![PHI.to_string(), UPSILON.to_string()],
        keys: vec![[PHI, UPSILON].iter().map(|s| s.to_string()).collect()],
        origin: Origin::Global(GlobalTag::Global),
    }
}

impl Store {
    pub fn new() -> Store {
        let mut s = Store::default();
        s.tables.insert(H0.to_string(), Table::new(h0_def()));
        s
    }

    pub fn table(&self, name: &str) -> Result<&Table> {
        self.tables.get(name).ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    /// Materializes every relation with `tid` prepended to its attributes and keys.
    pub fn deploy_schema(&mut self, cat: &SchemaCatalog) -> Result<Vec<String>> {
        if cat.relations.is_empty() {
            return Err(Error::EmptyFdSet("schema has no relations".into()));
        }
        if let Some(r) = cat.relations.iter().find(|r| self.tables.contains_key(&r.name)) {
            return Err(Error::DuplicateRelation(r.name.clone()));
        }
        let mut names = Vec::new();
        for r in &cat.relations {
            let mut def = r.clone();
            def.attributes.insert(0, TID.to_string());
            for k in &mut def.keys {
                k.insert(TID.to_string());
            }
            names.push(def.name.clone());
            self.tables.insert(def.name.clone(), Table::new(def));
        }
        Ok(names)
    }

    pub fn register_target(&mut self, phi: u32, upsilon: u32) -> Result<()> {
        let t = self.tables.get_mut(H0).expect("H_0 always exists");
        t.insert_checked(vec![vec![Value::Int(phi as i64), Value::Int(upsilon as i64)]])?;
        t.rows.sort();
        Ok(())
    }

    /// Trial ids already used for (φ, υ).
    pub fn tids(&self, hyp: &HypothesisEntry, phi: u32) -> BTreeSet<i64> {
        let mut out = BTreeSet::new();
        for r in &hyp.schema.relations {
            if let Some(t) = self.tables.get(&r.name) {
                let (ti, pi) = (t.position(TID), t.position(PHI));
                for row in &t.rows {
                    if let (Some(ti), Some(pi)) = (ti, pi) {
                        if row[pi] == Value::Int(phi as i64) {
                            out.insert(row[ti].as_int().unwrap_or_default());
                        }
                    }
                }
            }
        }
        out
    }

    /// Validates the trial against the hypothesis roles, assigns the next tid
    /// for (φ, υ) and inserts all rows or none.
    pub fn load_trial(&mut self, hyp: &HypothesisEntry, d: &TrialDataset) -> Result<u32> {
        let s = &hyp.structure;
        let roles = ingest::roles(s);
        for p in d.parameters.keys() {
            if roles.get(p) != Some(&Role::Parameter) {
                return Err(Error::UnknownSymbol(format!("{p} is not a parameter of υ={}", hyp.upsilon)));
            }
        }
        for p in s.symbols_with(Role::Parameter) {
            if !d.parameters.contains_key(&p) {
                return Err(Error::MissingValue(format!("parameter {p}")));
            }
        }
        let index_symbol = symbols::canonical(&d.index_symbol);
        if roles.get(index_symbol) != Some(&Role::Index) {
            return Err(Error::UnknownSymbol(format!("{index_symbol} is not an index variable of υ={}", hyp.upsilon)));
        }
        if let Some(other) = s.symbols_with(Role::Index).into_iter().find(|i| i != index_symbol) {
            return Err(Error::MissingValue(format!("index {other}")));
        }
        let outputs = s.symbols_with(Role::Output);
        if !outputs.is_empty() && d.series.is_empty() {
            return Err(Error::MissingValue("series is empty".into()));
        }
        let mut seen_index = BTreeSet::new();
        for p in &d.series {
            for o in p.outputs.keys() {
                if roles.get(o) != Some(&Role::Output) {
                    return Err(Error::UnknownSymbol(format!("{o} is not an output of υ={}", hyp.upsilon)));
                }
            }
            if let Some(o) = outputs.iter().find(|o| !p.outputs.contains_key(*o)) {
                return Err(Error::MissingValue(format!("output {o} at {index_symbol}={}", p.index)));
            }
            if !seen_index.insert(p.index.to_bits()) {
                return Err(Error::KeyViolation(format!("{index_symbol}={} appears twice in the series", p.index)));
            }
        }

        let tid = self.tids(hyp, d.phi).last().copied().unwrap_or(0) + 1;
        let scalar = |attr: &str, point: Option<&SeriesPoint>| -> Option<Value> {
            match attr {
                TID => Some(Value::Int(tid)),
                PHI => Some(Value::Int(d.phi as i64)),
                UPSILON => Some(Value::Int(d.upsilon as i64)),
                a if a == index_symbol => point.map(|p| Value::Float(p.index)),
                a => d
                    .parameters
                    .get(a)
                    .or_else(|| point.and_then(|p| p.outputs.get(a)))
                    .map(|v| Value::Float(*v)),
            }
        };

        let mut staged: Vec<(String, Vec<Row>)> = Vec::new();
        for r in &hyp.schema.relations {
            let t = self.table(&r.name)?;
            let per_point = t.def.attributes.iter().any(|a| a == index_symbol || outputs.contains(a));
            let points: Vec<Option<&SeriesPoint>> =
                if per_point { d.series.iter().map(Some).collect() } else { vec![None] };
            let mut batch: Vec<Row> = Vec::new();
            for p in points {
                let row = t
                    .def
                    .attributes
                    .iter()
                    .map(|a| scalar(a, p).ok_or_else(|| Error::UnknownSymbol(format!("no value for {a} in {}", r.name))))
                    .collect::<Result<Row>>()?;
                if !batch.contains(&row) {
                    batch.push(row);
                }
            }
            staged.push((r.name.clone(), batch));
        }
        let mut trial = self.clone_tables(staged.iter().map(|(n, _)| n.as_str()));
        for (name, batch) in staged {
            trial.get_mut(&name).expect("staged from deployed tables").insert_checked(batch)?;
        }
        for (name, t) in trial {
            self.tables.insert(name, t);
        }
        Ok(tid as u32)
    }

    fn clone_tables<'a>(&self, names: impl Iterator<Item = &'a str>) -> IndexMap<String, Table> {
        names.map(|n| (n.to_string(), self.tables[n].clone())).collect()
    }

    /// Rows matching every `attr = value` pair, ordered by their full tuple.
    pub fn select_certain(&self, relation: &str, predicate: &[(String, String)]) -> Result<Vec<Row>> {
        let t = self.table(relation)?;
        let mut conds = Vec::new();
        for (a, v) in predicate {
            let a = symbols::canonical(a.trim());
            let i = t
                .position(a)
                .ok_or_else(|| Error::UnknownAttribute(format!("{a} is not an attribute of {relation}")))?;
            conds.push((i, parse_value(a, v)?));
        }
        let mut rows: Vec<Row> = t.rows.iter().filter(|r| conds.iter().all(|(i, v)| r[*i] == *v)).cloned().collect();
        rows.sort();
        Ok(rows)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let rel_dir = dir.join("relations");
        std::fs::create_dir_all(&rel_dir)?;
        for (name, t) in &self.tables {
            write_atomic(&rel_dir.join(format!("{name}.csv")), t.to_csv().as_bytes())?;
        }
        Ok(())
    }

    /// Rebuilds the store from `relations/*.csv` for the given definitions.
    pub fn load(dir: &Path, defs: &[RelationDef]) -> Result<Store> {
        let mut s = Store::default();
        for def in defs {
            let path = dir.join("relations").join(format!("{}.csv", def.name));
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::CorruptProject(format!("{}: {e}", path.display())))?;
            s.tables.insert(def.name.clone(), Table::from_csv(def.clone(), &text)?);
        }
        Ok(s)
    }

    pub fn definitions(&self) -> Vec<RelationDef> {
        self.tables.values().map(|t| t.def.clone()).collect()
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Result of a selection, as served to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub relation: String,
    pub attributes: Vec<String>,
    pub rows: Vec<Row>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::{encode_fds, total_causal_mapping};
    use crate::synthesis::{fold_fds, synthesize_4c};
    use crate::testkit::{lotka_structure, LV_PARAMS as PARAMS, LV_TID6 as TID6};

    fn entry() -> HypothesisEntry {
        let s = lotka_structure();
        let m = total_causal_mapping(&s).unwrap();
        let prim = encode_fds(&s, &m).unwrap();
        let mut schema = synthesize_4c(&fold_fds(&prim), 3, &BTreeSet::from(["t".to_string()])).unwrap();
        schema.primitive = prim;
        HypothesisEntry { upsilon: 3, name: s.name.clone(), structure: s, mapping: m, schema }
    }

    fn trial(k: usize, series: &[(f64, f64, f64)]) -> TrialDataset {
        crate::testkit::lv_trial(k, series)
    }

    fn loaded() -> (Store, HypothesisEntry) {
        let h = entry();
        let mut s = Store::new();
        s.deploy_schema(&h.schema).unwrap();
        for k in 0..6 {
            let series: &[(f64, f64, f64)] = if k == 5 { &TID6 } else { &TID6[..1] };
            assert_eq!(s.load_trial(&h, &trial(k, series)).unwrap(), k as u32 + 1);
        }
        (s, h)
    }

    fn ints(xs: &[i64]) -> Vec<Value> {
        xs.iter().map(|&i| Value::Int(i)).collect()
    }

    #[test]
    fn deploy_prepends_tid() {
        let h = entry();
        let mut s = Store::new();
        s.deploy_schema(&h.schema).unwrap();
        let h1 = &s.table("H_3^1").unwrap().def;
        assert_eq!(h1.attributes, ["tid", "phi", "x0", "b", "p", "y0", "d", "r"]);
        assert_eq!(h1.keys, vec![BTreeSet::from(["tid".to_string(), "phi".to_string()])]);
        let h2 = &s.table("H_3^2").unwrap().def;
        assert_eq!(h2.keys.len(), 2);
        assert!(h2.keys.iter().all(|k| k.contains("tid") && k.contains("t") && k.contains("upsilon")));
        assert_eq!(s.deploy_schema(&h.schema).unwrap_err().code(), "DuplicateRelation");
        let empty = SchemaCatalog { relations: vec![], folded: Default::default(), primitive: Default::default(), warnings: vec![] };
        assert_eq!(s.deploy_schema(&empty).unwrap_err().code(), "EmptyFdSet");
    }

    #[test]
    fn first_and_sixth_trial_rows() {
        let (s, _) = loaded();
        let rows = s.select_certain("H_3^1", &[("phi".into(), "2".into())]).unwrap();
        assert_eq!(rows.len(), 6);
        let mut first = ints(&[1, 2]);
        first.extend(PARAMS[0].iter().map(|&v| Value::Float(v)));
        assert_eq!(rows[0], first);
        let h2 = s.select_certain("H_3^2", &[("tid".into(), "6".into())]).unwrap();
        let f = Value::Float;
        assert_eq!(h2[0], vec![Value::Int(6), Value::Int(2), Value::Int(3), f(1900.0), f(4.0), f(30.0)]);
        assert_eq!(h2[1], vec![Value::Int(6), Value::Int(2), Value::Int(3), f(1901.0), f(4.12), f(41.5)]);
        let one = s
            .select_certain("H_3^2", &[("tid".into(), "6".into()), ("t".into(), "1904".into())])
            .unwrap();
        assert_eq!(one, vec![vec![Value::Int(6), Value::Int(2), Value::Int(3), f(1904.0), f(31.1), f(75.9)]]);
    }

    #[test]
    fn duplicate_index_is_key_violation_and_atomic() {
        let (mut s, h) = loaded();
        let before = s.clone();
        let mut d = trial(0, &TID6[..2]);
        d.series[1].index = 1900.0;
        assert_eq!(s.load_trial(&h, &d).unwrap_err().code(), "KeyViolation");
        assert_eq!(s, before);
    }

    #[test]
    fn symbol_errors() {
        let (mut s, h) = loaded();
        let mut d = trial(0, &TID6[..1]);
        d.parameters.insert("K".into(), 1.0);
        assert_eq!(s.load_trial(&h, &d).unwrap_err().code(), "UnknownSymbol");
        let mut d = trial(0, &TID6[..1]);
        d.parameters.remove("b");
        assert_eq!(s.load_trial(&h, &d).unwrap_err().code(), "MissingValue");
        let mut d = trial(0, &TID6[..1]);
        d.index_symbol = "year".into();
        assert_eq!(s.load_trial(&h, &d).unwrap_err().code(), "UnknownSymbol");
    }

    #[test]
    fn selection_errors_and_empty() {
        let (s, _) = loaded();
        assert_eq!(s.select_certain("H_9^1", &[]).unwrap_err().code(), "UnknownRelation");
        assert_eq!(s.select_certain("H_3^1", &[("q".into(), "1".into())]).unwrap_err().code(), "UnknownAttribute");
        assert!(Store::new().select_certain(H0, &[]).unwrap().is_empty());
        assert_eq!(s.select_certain("H_3^1", &[("φ".into(), "2".into())]).unwrap().len(), 6);
    }

    #[test]
    fn tids_contiguous_and_keys_unique() {
        let (s, h) = loaded();
        assert_eq!(s.tids(&h, 2).into_iter().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5, 6]);
        for t in s.tables.values() {
            for key in t.key_positions() {
                let ks: BTreeSet<Vec<Value>> = t.rows.iter().map(|r| key.iter().map(|&i| r[i]).collect()).collect();
                assert_eq!(ks.len(), t.rows.len());
            }
        }
    }

    #[test]
    fn persistence_round_trip() {
        let (mut s, _) = loaded();
        s.register_target(2, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        s.save(dir.path()).unwrap();
        let back = Store::load(dir.path(), &s.definitions()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn trial_csv_round_trip() {
        let d = trial(5, &TID6);
        let text = write_trial_csv(&d);
        assert!(text.starts_with("param:b,param:d"));
        assert_eq!(parse_trial_csv(&text, 2, 3).unwrap(), d);
        assert_eq!(parse_trial_csv("", 1, 1).unwrap_err().code(), "InvalidCsv");
    }

    #[test]
    fn value_ordering() {
        assert!(Value::Int(2) < Value::Int(10));
        assert_eq!(Value::Float(0.1 + 0.2), Value::Float(0.1 + 0.2));
        assert_ne!(Value::Float(0.3), Value::Float(0.1 + 0.2));
        assert_eq!(Value::Float(1900.0).to_string(), "1900");
        assert_eq!(parse_value("tid", "x").unwrap_err().code(), "InvalidValue");
    }
}
