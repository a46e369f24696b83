//! Folding of primitive FD sets and synthesis of the certain schema.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::causal::{self, Fd, FdSet};
use crate::error::{Error, Result};
use crate::symbols::{PHI, UPSILON};

/// Index-based closure engine over a fixed FD set.
pub struct Closer {
    names: Vec<String>,
    ids: BTreeMap<String, usize>,
    fds: Vec<(Vec<usize>, usize)>,
    by_attr: Vec<Vec<usize>>,
}

impl Closer {
    pub fn new(sigma: &FdSet) -> Closer {
        let mut names: BTreeSet<String> = sigma.attributes.clone();
        for fd in sigma.iter() {
            names.extend(fd.determinant.iter().cloned());
            names.insert(fd.dependent.clone());
        }
        let names: Vec<String> = names.into_iter().collect();
        let ids: BTreeMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let fds: Vec<(Vec<usize>, usize)> = sigma
            .iter()
            .map(|fd| (fd.determinant.iter().map(|a| ids[a]).collect(), ids[&fd.dependent]))
            .collect();
        let mut by_attr = vec![Vec::new(); names.len()];
        for (i, (det, _)) in fds.iter().enumerate() {
            for &a in det {
                by_attr[a].push(i);
            }
        }
        Closer { names, ids, fds, by_attr }
    }

    fn close_ids(&self, start: &[usize]) -> Vec<bool> {
        let mut inside = vec![false; self.names.len()];
        let mut missing: Vec<usize> = self.fds.iter().map(|(d, _)| d.len()).collect();
        let mut queue: Vec<usize> = Vec::new();
        for &a in start {
            if !inside[a] {
                inside[a] = true;
                queue.push(a);
            }
        }
        for (i, (_, dep)) in self.fds.iter().enumerate() {
            if missing[i] == 0 && !inside[*dep] {
                inside[*dep] = true;
                queue.push(*dep);
            }
        }
        while let Some(a) = queue.pop() {
            for &f in &self.by_attr[a] {
                missing[f] -= 1;
                if missing[f] == 0 {
                    let dep = self.fds[f].1;
                    if !inside[dep] {
                        inside[dep] = true;
                        queue.push(dep);
                    }
                }
            }
        }
        inside
    }

    pub fn closure<'a, I: IntoIterator<Item = &'a String>>(&self, x: I) -> BTreeSet<String> {
        let mut extra = BTreeSet::new();
        let start: Vec<usize> = x
            .into_iter()
            .filter_map(|a| match self.ids.get(a) {
                Some(&i) => Some(i),
                None => {
                    extra.insert(a.clone());
                    None
                }
            })
            .collect();
        let inside = self.close_ids(&start);
        let mut out: BTreeSet<String> =
            inside.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| self.names[i].clone()).collect();
        out.extend(extra);
        out
    }

    pub fn covers<'a, I, J>(&self, x: I, target: J) -> bool
    where
        I: IntoIterator<Item = &'a String>,
        J: IntoIterator<Item = &'a String>,
    {
        let c = self.closure(x);
        target.into_iter().all(|a| c.contains(a))
    }
}

/// Smallest superset of `x` closed under `sigma`.
pub fn attribute_closure(x: &BTreeSet<String>, sigma: &FdSet) -> BTreeSet<String> {
    Closer::new(sigma).closure(x)
}

/// Replaces φ-determined attributes in every determinant by φ itself.
pub fn fold_fds(sigma: &FdSet) -> FdSet {
    let phi_set: BTreeSet<String> = BTreeSet::from([PHI.to_string()]);
    let determined: BTreeSet<&String> =
        sigma.iter().filter(|fd| fd.determinant == phi_set).map(|fd| &fd.dependent).collect();
    let mut out = FdSet::new();
    out.attributes = sigma.attributes.clone();
    for fd in sigma.iter() {
        if fd.determinant == phi_set {
            out.insert(fd.clone());
            continue;
        }
        let mut det: BTreeSet<String> = fd.determinant.iter().filter(|a| !determined.contains(a)).cloned().collect();
        det.insert(PHI.to_string());
        let folded = Fd { determinant: det, dependent: fd.dependent.clone() };
        if !folded.is_trivial() {
            out.insert(folded);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlobalTag {
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Origin {
    Hypothesis(u32),
    Global(GlobalTag),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationDef {
    pub name: String,
    pub attributes: Vec<String>,
    pub keys: Vec<BTreeSet<String>>,
    pub origin: Origin,
}

impl RelationDef {
    pub fn attribute_set(&self) -> BTreeSet<String> {
        self.attributes.iter().cloned().collect()
    }

    pub fn has(&self, attr: &str) -> bool {
        self.attributes.iter().any(|a| a == attr)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "warning")]
pub enum SynthesisWarning {
    /// Mutually dependent outputs forming a cycle of more than two attributes.
    LongCycle { attributes: Vec<String> },
    /// A determinant class was split to restore BCNF.
    BcnfSplit { relation: Vec<String>, determinant: Vec<String> },
    /// No class relation held a key of the whole schema, so one was added.
    KeyRelationAdded { attributes: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaCatalog {
    pub relations: Vec<RelationDef>,
    pub folded: FdSet,
    pub primitive: FdSet,
    #[serde(default)]
    pub warnings: Vec<SynthesisWarning>,
}

impl SchemaCatalog {
    pub fn relation(&self, name: &str) -> Option<&RelationDef> {
        self.relations.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BcnfViolation {
    pub determinant: BTreeSet<String>,
    pub implied: BTreeSet<String>,
}

/// Subsets are enumerated exhaustively up to this many attributes; wider
/// relations are checked against their embedded FDs only.
const EXHAUSTIVE_BCNF_LIMIT: usize = 14;

/// Finds a projected FD `Z → A` inside `attrs` whose determinant is not a superkey.
fn find_bcnf_violation(attrs: &[String], closer: &Closer, sigma: &FdSet) -> Option<BcnfViolation> {
    let rel: BTreeSet<&String> = attrs.iter().collect();
    let check = |z: BTreeSet<String>| -> Option<BcnfViolation> {
        let implied: BTreeSet<String> = closer.closure(&z).into_iter().filter(|a| rel.contains(a)).collect();
        if implied.len() > z.len() && implied.len() < rel.len() {
            Some(BcnfViolation { determinant: z, implied })
        } else {
            None
        }
    };
    if attrs.len() <= EXHAUSTIVE_BCNF_LIMIT {
        let n = attrs.len();
        let mut masks: Vec<u32> = (1..(1u32 << n)).collect();
        masks.sort_by_key(|m| (m.count_ones(), *m));
        for m in masks {
            let z: BTreeSet<String> = (0..n).filter(|i| m & (1 << i) != 0).map(|i| attrs[i].clone()).collect();
            if let Some(v) = check(z) {
                return Some(v);
            }
        }
        None
    } else {
        sigma
            .iter()
            .filter(|fd| rel.contains(&fd.dependent) && fd.determinant.iter().all(|a| rel.contains(a)))
            .find_map(|fd| check(fd.determinant.clone()))
    }
}

pub fn bcnf_check(relation: &RelationDef, sigma: &FdSet) -> Vec<BcnfViolation> {
    let closer = Closer::new(sigma);
    find_bcnf_violation(&relation.attributes, &closer, sigma).into_iter().collect()
}

/// Chase test: does joining the decomposition recover the universal relation?
pub fn lossless_join(relations: &[Vec<String>], sigma: &FdSet) -> bool {
    let universe: Vec<String> =
        relations.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let col: BTreeMap<&str, usize> = universe.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
    let nc = universe.len();
    let mut tab: Vec<Vec<usize>> = relations
        .iter()
        .enumerate()
        .map(|(r, attrs)| {
            let mut row: Vec<usize> = (0..nc).map(|c| 1 + r * nc + c).collect();
            for a in attrs {
                row[col[a.as_str()]] = 0;
            }
            row
        })
        .collect();
    let fds: Vec<(Vec<usize>, usize)> = sigma
        .iter()
        .filter(|fd| col.contains_key(fd.dependent.as_str()) && fd.determinant.iter().all(|a| col.contains_key(a.as_str())))
        .map(|fd| (fd.determinant.iter().map(|a| col[a.as_str()]).collect(), col[fd.dependent.as_str()]))
        .collect();
    loop {
        let mut changed = false;
        for (det, dep) in &fds {
            let mut groups: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            for row in &tab {
                let key: Vec<usize> = det.iter().map(|&c| row[c]).collect();
                let e = groups.entry(key).or_insert(row[*dep]);
                *e = (*e).min(row[*dep]);
            }
            for r in 0..tab.len() {
                let key: Vec<usize> = det.iter().map(|&c| tab[r][c]).collect();
                let target = groups[&key];
                let old = tab[r][*dep];
                if old != target {
                    for row in tab.iter_mut() {
                        if row[*dep] == old {
                            row[*dep] = target;
                        }
                    }
                    changed = true;
                }
            }
        }
        if tab.iter().any(|row| row.iter().all(|&v| v == 0)) {
            return true;
        }
        if !changed {
            return false;
        }
    }
}

fn order_attributes(first_seen: &[String], index_attrs: &BTreeSet<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let push = |a: &String, out: &mut Vec<String>| {
        if !out.contains(a) {
            out.push(a.clone());
        }
    };
    for special in [PHI, UPSILON] {
        if let Some(a) = first_seen.iter().find(|a| *a == special) {
            push(a, &mut out);
        }
    }
    for a in first_seen.iter().filter(|a| index_attrs.contains(*a)) {
        push(a, &mut out);
    }
    for a in first_seen {
        push(a, &mut out);
    }
    out
}

/// Greedily drops attributes (last first) while the rest still determines `attrs`.
fn minimal_key(attrs: &[String], closer: &Closer) -> BTreeSet<String> {
    let mut key: Vec<String> = attrs.to_vec();
    for i in (0..attrs.len()).rev() {
        let trial: Vec<String> = key.iter().filter(|a| **a != attrs[i]).cloned().collect();
        if closer.covers(&trial, attrs) {
            key = trial;
        }
    }
    key.into_iter().collect()
}

fn keys_within(attrs: &[String], candidates: &[BTreeSet<String>], closer: &Closer) -> Vec<BTreeSet<String>> {
    let set: BTreeSet<&String> = attrs.iter().collect();
    let mut keys: Vec<BTreeSet<String>> = Vec::new();
    for k in candidates {
        if k.iter().all(|a| set.contains(a)) && closer.covers(k, attrs) && !keys.contains(k) {
            keys.push(k.clone());
        }
    }
    if keys.is_empty() {
        keys.push(minimal_key(attrs, closer));
    }
    keys
}

struct Draft {
    attributes: Vec<String>,
    keys: Vec<BTreeSet<String>>,
    seq: usize,
}

/// Groups the folded FDs into determinant-equivalence classes, one relation
/// per class, splitting any class that would violate BCNF.
pub fn synthesize_4c(folded: &FdSet, hypothesis_id: u32, index_attrs: &BTreeSet<String>) -> Result<SchemaCatalog> {
    if folded.is_empty() {
        return Err(Error::EmptyFdSet(format!("hypothesis {hypothesis_id} has no functional dependencies")));
    }
    let closer = Closer::new(folded);
    let mut dets: Vec<&BTreeSet<String>> = Vec::new();
    for fd in folded.iter() {
        if !dets.contains(&&fd.determinant) {
            dets.push(&fd.determinant);
        }
    }
    let closures: Vec<BTreeSet<String>> = dets.iter().map(|d| closer.closure(*d)).collect();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..dets.len() {
        let found = classes.iter_mut().find(|c| {
            let j = c[0];
            dets[i].is_subset(&closures[j]) && dets[j].is_subset(&closures[i])
        });
        match found {
            Some(c) => c.push(i),
            None => classes.push(vec![i]),
        }
    }

    let mut warnings = Vec::new();
    let mut drafts: Vec<Draft> = Vec::new();
    let mut seq = 0;
    for class in &classes {
        let members: Vec<&BTreeSet<String>> = class.iter().map(|&i| dets[i]).collect();
        let mut seen: Vec<String> = Vec::new();
        for fd in folded.iter().filter(|fd| members.contains(&&fd.determinant)) {
            for a in fd.determinant.iter().chain(std::iter::once(&fd.dependent)) {
                if !seen.contains(a) {
                    seen.push(a.clone());
                }
            }
        }
        let attributes = order_attributes(&seen, index_attrs);
        let candidates: Vec<BTreeSet<String>> = members.iter().map(|d| (*d).clone()).collect();
        let mut pending = vec![attributes];
        while let Some(attrs) = pending.pop() {
            match find_bcnf_violation(&attrs, &closer, folded) {
                None => {
                    let keys = keys_within(&attrs, &candidates, &closer);
                    drafts.push(Draft { attributes: attrs, keys, seq });
                    seq += 1;
                }
                Some(v) => {
                    warnings.push(SynthesisWarning::BcnfSplit {
                        relation: attrs.clone(),
                        determinant: v.determinant.iter().cloned().collect(),
                    });
                    let left: Vec<String> = attrs.iter().filter(|a| v.implied.contains(*a)).cloned().collect();
                    let right: Vec<String> = attrs
                        .iter()
                        .filter(|a| !v.implied.contains(*a) || v.determinant.contains(*a))
                        .cloned()
                        .collect();
                    pending.push(right);
                    pending.push(left);
                }
            }
        }
    }

    let universe: Vec<String> = folded.attributes.iter().cloned().collect();
    if !drafts.iter().any(|d| closer.covers(&d.attributes, &universe)) {
        let key = minimal_key(&order_attributes(&universe, index_attrs), &closer);
        let attributes = order_attributes(&key.iter().cloned().collect::<Vec<_>>(), index_attrs);
        warnings.push(SynthesisWarning::KeyRelationAdded { attributes: attributes.clone() });
        drafts.push(Draft { attributes, keys: vec![key], seq });
    }

    for cycle in long_cycles(folded, index_attrs) {
        warnings.push(SynthesisWarning::LongCycle { attributes: cycle });
    }

    drafts.sort_by_key(|d| (d.keys.iter().map(BTreeSet::len).min().unwrap_or(0), d.seq));
    let relations = drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| RelationDef {
            name: format!("H_{hypothesis_id}^{}", i + 1),
            attributes: d.attributes,
            keys: d.keys,
            origin: Origin::Hypothesis(hypothesis_id),
        })
        .collect();
    Ok(SchemaCatalog { relations, folded: folded.clone(), primitive: FdSet::new(), warnings })
}

/// Strongly connected groups of more than two endogenous attributes.
fn long_cycles(folded: &FdSet, index_attrs: &BTreeSet<String>) -> Vec<Vec<String>> {
    let phi_set: BTreeSet<String> = BTreeSet::from([PHI.to_string()]);
    let exogenous: BTreeSet<&String> = folded
        .iter()
        .filter(|fd| fd.determinant == phi_set)
        .map(|fd| &fd.dependent)
        .chain(index_attrs.iter())
        .collect();
    let nodes: Vec<&String> = folded
        .attributes
        .iter()
        .filter(|a| *a != PHI && *a != UPSILON && !exogenous.contains(a))
        .collect();
    let pos: BTreeMap<&String, usize> = nodes.iter().enumerate().map(|(i, a)| (*a, i)).collect();
    let mut graph = vec![Vec::new(); nodes.len()];
    for fd in folded.iter() {
        if let Some(&to) = pos.get(&fd.dependent) {
            for b in &fd.determinant {
                if let Some(&from) = pos.get(b) {
                    graph[from].push(to);
                }
            }
        }
    }
    let mut out: Vec<Vec<String>> = causal::cyclic_components(&graph)
        .into_iter()
        .filter(|c| c.len() > 2)
        .map(|c| {
            let mut names: Vec<String> = c.into_iter().map(|i| nodes[i].clone()).collect();
            names.sort();
            names
        })
        .collect();
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| crate::symbols::canonical(s).to_string()).collect()
    }

    fn fds(xs: &[&str]) -> FdSet {
        FdSet::from_fds(xs.iter().map(|f| Fd::parse(f).unwrap()))
    }

    fn sigma3() -> FdSet {
        let mut s = fds(&[
            "φ -> x0", "φ -> b", "φ -> p", "φ -> y0", "φ -> d", "φ -> r",
            "x0 b p t υ y -> x", "y0 d r t υ x -> y",
        ]);
        s.attributes.insert("t".into());
        s
    }

    fn sigma3_folded() -> FdSet {
        fds(&[
            "φ -> x0", "φ -> b", "φ -> p", "φ -> y0", "φ -> d", "φ -> r",
            "φ t υ y -> x", "φ t υ x -> y",
        ])
    }

    #[test]
    fn closure_examples() {
        assert_eq!(attribute_closure(&set(&["φ"]), &sigma3()), set(&["φ", "x0", "b", "p", "y0", "d", "r"]));
        assert!(attribute_closure(&BTreeSet::new(), &sigma3()).is_empty());
        let c = attribute_closure(&set(&["φ", "t", "υ", "y"]), &sigma3_folded());
        assert_eq!(c, set(&["φ", "t", "υ", "y", "x0", "b", "p", "y0", "d", "r", "x"]));
    }

    /// Naive fixed-point iteration used as the reference for closures.
    fn closure_oracle(x: &BTreeSet<String>, sigma: &FdSet) -> BTreeSet<String> {
        let mut out = x.clone();
        loop {
            let before = out.len();
            for fd in sigma.iter() {
                if fd.determinant.is_subset(&out) {
                    out.insert(fd.dependent.clone());
                }
            }
            if out.len() == before {
                return out;
            }
        }
    }

    #[test]
    fn closure_matches_fixed_point() {
        let s = sigma3();
        for x in [set(&["t", "υ", "x0", "b", "p", "y"]), set(&["y"]), set(&["φ", "t"]), set(&["zz"])] {
            assert_eq!(attribute_closure(&x, &s), closure_oracle(&x, &s));
        }
    }

    #[test]
    fn folding_sigma3() {
        let f = fold_fds(&sigma3());
        assert_eq!(f.as_set(), sigma3_folded().as_set());
        assert_eq!(fold_fds(&f), f);
    }

    #[test]
    fn folding_sigma1() {
        let s1 = fds(&["φ -> x0", "φ -> b", "x0 b t υ -> x"]);
        let f = fold_fds(&s1);
        assert_eq!(f.as_set(), fds(&["φ -> x0", "φ -> b", "φ t υ -> x"]).as_set());
        let key = set(&["φ", "t", "υ"]);
        assert!(attribute_closure(&key, &s1).contains("x"));
        assert!(attribute_closure(&key, &f).contains("x"));
    }

    #[test]
    fn folding_nothing() {
        let s = fds(&["φ -> a"]);
        assert_eq!(fold_fds(&s), s);
    }

    #[test]
    fn synthesize_sigma3() {
        let cat = synthesize_4c(&sigma3_folded(), 3, &set(&["t"])).unwrap();
        assert_eq!(cat.relations.len(), 2);
        let h1 = &cat.relations[0];
        assert_eq!(h1.name, "H_3^1");
        assert_eq!(h1.attributes, ["phi", "x0", "b", "p", "y0", "d", "r"]);
        assert_eq!(h1.keys, vec![set(&["φ"])]);
        let h2 = &cat.relations[1];
        assert_eq!(h2.name, "H_3^2");
        assert_eq!(h2.attributes, ["phi", "upsilon", "t", "y", "x"]);
        assert_eq!(h2.keys, vec![set(&["φ", "t", "υ", "y"]), set(&["φ", "t", "υ", "x"])]);
        assert!(cat.warnings.is_empty());
        for r in &cat.relations {
            assert!(bcnf_check(r, &cat.folded).is_empty());
        }
        let decomposition: Vec<Vec<String>> = cat.relations.iter().map(|r| r.attributes.clone()).collect();
        assert!(lossless_join(&decomposition, &cat.folded));
    }

    #[test]
    fn synthesize_sigma1() {
        let cat = synthesize_4c(&fds(&["φ -> x0", "φ -> b", "φ t υ -> x"]), 1, &set(&["t"])).unwrap();
        let shapes: Vec<(&str, Vec<&str>)> =
            cat.relations.iter().map(|r| (r.name.as_str(), r.attributes.iter().map(String::as_str).collect())).collect();
        assert_eq!(shapes, [("H_1^1", vec!["phi", "x0", "b"]), ("H_1^2", vec!["phi", "upsilon", "t", "x"])]);
        assert_eq!(cat.relations[1].keys, vec![set(&["φ", "t", "υ"])]);
    }

    #[test]
    fn synthesize_trivial_and_empty() {
        let cat = synthesize_4c(&fds(&["φ -> a"]), 5, &BTreeSet::new()).unwrap();
        assert_eq!(cat.relations.len(), 1);
        assert_eq!(cat.relations[0].attributes, ["phi", "a"]);
        assert_eq!(synthesize_4c(&FdSet::new(), 5, &BTreeSet::new()).unwrap_err().code(), "EmptyFdSet");
    }

    #[test]
    fn bcnf_split_on_transitive_class() {
        let f = fds(&["φ υ t -> a", "φ υ a -> c", "φ υ t c -> d"]);
        let cat = synthesize_4c(&f, 7, &set(&["t"])).unwrap();
        assert!(cat.warnings.iter().any(|w| matches!(w, SynthesisWarning::BcnfSplit { .. })));
        for r in &cat.relations {
            assert!(bcnf_check(r, &f).is_empty(), "{r:?}");
            for k in &r.keys {
                assert!(attribute_closure(k, &f).is_superset(&r.attribute_set()));
            }
        }
        let decomposition: Vec<Vec<String>> = cat.relations.iter().map(|r| r.attributes.clone()).collect();
        assert!(lossless_join(&decomposition, &f));
    }

    #[test]
    fn key_relation_for_uncovered_attributes() {
        let mut f = fds(&["φ -> a"]);
        f.attributes.extend(set(&["υ", "t"]));
        let cat = synthesize_4c(&f, 2, &set(&["t"])).unwrap();
        let all: BTreeSet<String> = cat.relations.iter().flat_map(|r| r.attributes.clone()).collect();
        assert_eq!(all, f.attributes);
        assert!(matches!(cat.warnings[0], SynthesisWarning::KeyRelationAdded { .. }));
    }

    #[test]
    fn long_cycle_warning() {
        let f = fds(&["φ υ c -> a", "φ υ a -> b", "φ υ b -> c"]);
        let cat = synthesize_4c(&f, 2, &BTreeSet::new()).unwrap();
        assert!(cat.warnings.contains(&SynthesisWarning::LongCycle { attributes: vec!["a".into(), "b".into(), "c".into()] }));
    }

    #[test]
    fn lossy_decomposition_detected() {
        let f = fds(&["a -> b"]);
        assert!(!lossless_join(&[vec!["a".into(), "c".into()], vec!["b".into(), "c".into()]], &f));
        assert!(lossless_join(&[vec!["a".into(), "b".into()], vec!["a".into(), "c".into()]], &f));
    }
}
