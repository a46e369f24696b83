//! Total causal mappings (perfect equation/variable matchings) and their
//! encoding as primitive functional dependencies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Role, Structure};
use crate::symbols::{self, PHI, UPSILON};

/// Maximum matching between the equations and variables of a structure.
#[derive(Debug, Clone)]
pub struct Matching {
    pub equations: Vec<String>,
    pub variables: Vec<String>,
    adj: Vec<Vec<usize>>,
    eq_to_var: Vec<Option<usize>>,
    var_to_eq: Vec<Option<usize>>,
}

impl Matching {
    pub fn size(&self) -> usize {
        self.eq_to_var.iter().flatten().count()
    }

    pub fn is_perfect(&self) -> bool {
        self.equations.len() == self.variables.len() && self.size() == self.equations.len()
    }

    pub fn unmatched_equations(&self) -> Vec<String> {
        self.eq_to_var
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_none())
            .map(|(i, _)| self.equations[i].clone())
            .collect()
    }

    pub fn pairs(&self) -> BTreeMap<String, String> {
        self.eq_to_var
            .iter()
            .enumerate()
            .filter_map(|(e, v)| v.map(|v| (self.equations[e].clone(), self.variables[v].clone())))
            .collect()
    }

    /// Equations lying on an alternating cycle: exactly the ones whose
    /// assignment differs between perfect matchings.
    pub fn ambiguous_equations(&self) -> Vec<String> {
        let n = self.equations.len();
        let graph: Vec<Vec<usize>> = (0..n)
            .map(|e| {
                self.adj[e]
                    .iter()
                    .filter(|&&v| self.eq_to_var[e] != Some(v))
                    .filter_map(|&v| self.var_to_eq[v])
                    .collect()
            })
            .collect();
        let mut out: Vec<usize> = strongly_connected(&graph)
            .into_iter()
            .filter(|c| c.len() > 1)
            .flatten()
            .collect();
        out.sort_unstable();
        out.into_iter().map(|e| self.equations[e].clone()).collect()
    }

    fn try_assign(&mut self, e: usize, seen: &mut [bool]) -> bool {
        for i in 0..self.adj[e].len() {
            let v = self.adj[e][i];
            if !seen[v] && self.var_to_eq[v].is_none() {
                seen[v] = true;
                self.link(e, v);
                return true;
            }
        }
        for i in 0..self.adj[e].len() {
            let v = self.adj[e][i];
            if seen[v] {
                continue;
            }
            seen[v] = true;
            let owner = self.var_to_eq[v].expect("free variables handled above");
            if self.try_assign(owner, seen) {
                self.link(e, v);
                return true;
            }
        }
        false
    }

    fn link(&mut self, e: usize, v: usize) {
        self.eq_to_var[e] = Some(v);
        self.var_to_eq[v] = Some(e);
    }
}

/// Tarjan's algorithm; components come out in reverse topological order.
fn strongly_connected(graph: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        g: &'a [Vec<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn visit(s: &mut State, v: usize) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        for &w in &s.g[v] {
            match s.index[w] {
                None => {
                    visit(s, w);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on_stack[w] => s.low[v] = s.low[v].min(iw),
                _ => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            let mut comp = Vec::new();
            while let Some(w) = s.stack.pop() {
                s.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            s.out.push(comp);
        }
    }
    let n = graph.len();
    let mut s = State {
        g: graph,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if s.index[v].is_none() {
            visit(&mut s, v);
        }
    }
    s.out
}

pub(crate) fn cyclic_components(graph: &[Vec<usize>]) -> Vec<Vec<usize>> {
    strongly_connected(graph)
}

/// Greedy-then-augment matching with equations in natural id order and
/// variables in lexicographic order, so ties always resolve the same way.
pub fn maximum_matching(s: &Structure) -> Matching {
    let mut equations: Vec<String> = s.equations.iter().map(|e| e.id.clone()).collect();
    equations.sort_by(|a, b| symbols::natural_cmp(a, b));
    let variables: Vec<String> = s
        .declarations
        .iter()
        .map(|d| d.symbol.clone())
        .chain(s.equations.iter().flat_map(|e| e.variables.iter().cloned()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let vindex: BTreeMap<&str, usize> = variables.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    let adj = equations
        .iter()
        .map(|id| {
            let eq = s.equation(id).expect("id taken from structure");
            eq.variables.iter().map(|v| vindex[v.as_str()]).collect()
        })
        .collect();
    let mut m = Matching {
        eq_to_var: vec![None; equations.len()],
        var_to_eq: vec![None; variables.len()],
        equations,
        variables,
        adj,
    };
    for e in 0..m.equations.len() {
        let mut seen = vec![false; m.variables.len()];
        m.try_assign(e, &mut seen);
    }
    m
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "warning")]
pub enum CausalWarning {
    AmbiguousOrdering { equations: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalMapping {
    pub pairs: BTreeMap<String, String>,
    #[serde(default)]
    pub warnings: Vec<CausalWarning>,
}

impl CausalMapping {
    pub fn is_ambiguous(&self) -> bool {
        !self.warnings.is_empty()
    }
}

pub fn total_causal_mapping(s: &Structure) -> Result<CausalMapping> {
    let m = maximum_matching(s);
    if !m.is_perfect() {
        return Err(Error::NoPerfectMatching(format!(
            "{} equations, {} variables, matching of size {}; unmatched equations: [{}]",
            m.equations.len(),
            m.variables.len(),
            m.size(),
            m.unmatched_equations().join(", ")
        )));
    }
    let ambiguous = m.ambiguous_equations();
    let warnings = if ambiguous.is_empty() {
        Vec::new()
    } else {
        vec![CausalWarning::AmbiguousOrdering { equations: ambiguous }]
    };
    Ok(CausalMapping { pairs: m.pairs(), warnings })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fd {
    pub determinant: BTreeSet<String>,
    pub dependent: String,
}

impl Fd {
    pub fn new<I, S>(determinant: I, dependent: &str) -> Fd
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Fd { determinant: determinant.into_iter().map(Into::into).collect(), dependent: dependent.to_string() }
    }

    /// Parses `"phi t upsilon y -> x"`; `φ`/`υ` and `→` are accepted too.
    pub fn parse(s: &str) -> Option<Fd> {
        let (lhs, rhs) = s.split_once("->").or_else(|| s.split_once('→'))?;
        let dependent = symbols::canonical(rhs.trim()).to_string();
        if dependent.is_empty() {
            return None;
        }
        let determinant = lhs
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| symbols::canonical(t).to_string())
            .collect();
        Some(Fd { determinant, dependent })
    }

    pub fn is_trivial(&self) -> bool {
        self.determinant.contains(&self.dependent)
    }
}

impl fmt::Display for Fd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for a in ordered_for_display(&self.determinant) {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            f.write_str(symbols::display(a))?;
        }
        write!(f, " → {}", symbols::display(&self.dependent))
    }
}

fn ordered_for_display(set: &BTreeSet<String>) -> Vec<&str> {
    let mut v: Vec<&str> = set.iter().map(String::as_str).collect();
    v.sort_by_key(|a| (*a != PHI, *a));
    v
}

/// An FD list that keeps insertion order and ignores duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FdSet {
    pub fds: Vec<Fd>,
    pub attributes: BTreeSet<String>,
}

impl FdSet {
    pub fn new() -> FdSet {
        FdSet::default()
    }

    pub fn from_fds<I: IntoIterator<Item = Fd>>(fds: I) -> FdSet {
        let mut s = FdSet::new();
        for fd in fds {
            s.insert(fd);
        }
        s
    }

    pub fn insert(&mut self, fd: Fd) -> bool {
        if self.fds.contains(&fd) {
            return false;
        }
        self.attributes.extend(fd.determinant.iter().cloned());
        self.attributes.insert(fd.dependent.clone());
        self.fds.push(fd);
        true
    }

    pub fn len(&self) -> usize {
        self.fds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fds.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Fd> {
        self.fds.iter()
    }

    pub fn contains(&self, fd: &Fd) -> bool {
        self.fds.contains(fd)
    }

    pub fn as_set(&self) -> BTreeSet<&Fd> {
        self.fds.iter().collect()
    }

    /// Sorted by dependent, then determinant; the form used for golden files.
    pub fn canonical(&self) -> Vec<Fd> {
        let mut v = self.fds.clone();
        v.sort_by(|a, b| a.dependent.cmp(&b.dependent).then_with(|| a.determinant.cmp(&b.determinant)));
        v
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(&self.canonical()).expect("fd lists always serialize")
    }
}

impl fmt::Display for FdSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{ ")?;
        for (i, fd) in self.fds.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{fd}")?;
        }
        f.write_str(" }")
    }
}

/// Emits one FD per non-index variable, in equation order.
pub fn encode_fds(s: &Structure, m: &CausalMapping) -> Result<FdSet> {
    let mut out = FdSet::new();
    out.attributes.insert(PHI.to_string());
    out.attributes.insert(UPSILON.to_string());
    for d in &s.declarations {
        out.attributes.insert(d.symbol.clone());
    }
    for eq in &s.equations {
        let v = m
            .pairs
            .get(&eq.id)
            .ok_or_else(|| Error::NoPerfectMatching(format!("equation {} is unmapped", eq.id)))?;
        if !eq.variables.contains(v) {
            return Err(Error::NoPerfectMatching(format!("equation {} does not mention {v}", eq.id)));
        }
        let role = s.role(v).ok_or_else(|| Error::UndeclaredVariable(v.clone()))?;
        match (role, eq.arity()) {
            (Role::Index, _) => {}
            (Role::Parameter, 1) => {
                out.insert(Fd::new([PHI], v));
            }
            (Role::Output, 1) => {
                return Err(Error::RoleConflict(format!(
                    "equation {} fixes output {v} on its own; declare {v} as a parameter",
                    eq.id
                )));
            }
            (Role::Parameter, _) => {
                return Err(Error::RoleConflict(format!(
                    "equation {} determines parameter {v} from other variables",
                    eq.id
                )));
            }
            (Role::Output, _) => {
                let mut det: BTreeSet<String> = eq.variables.iter().filter(|x| *x != v).cloned().collect();
                det.insert(UPSILON.to_string());
                out.insert(Fd { determinant: det, dependent: v.clone() });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Equation, VariableDecl};
    use proptest::prelude::*;

    fn structure(eqs: &[(&str, &[&str])], roles: &[(&str, Role)]) -> Structure {
        Structure {
            hypothesis_id: 1,
            name: "t".into(),
            description: String::new(),
            equations: eqs.iter().map(|(id, vs)| Equation::opaque(id, vs)).collect(),
            declarations: roles
                .iter()
                .map(|(s, r)| VariableDecl { symbol: s.to_string(), role: *r, description: String::new() })
                .collect(),
        }
    }

    fn s1() -> Structure {
        structure(
            &[("f1", &["t"]), ("f2", &["x0"]), ("f3", &["b"]), ("f4", &["x", "t", "x0", "b"])],
            &[("t", Role::Index), ("x0", Role::Parameter), ("b", Role::Parameter), ("x", Role::Output)],
        )
    }

    /// Enumerates every perfect matching by brute force.
    fn all_perfect_matchings(s: &Structure) -> Vec<BTreeMap<String, String>> {
        fn go(
            eqs: &[(String, Vec<String>)],
            i: usize,
            used: &mut BTreeSet<String>,
            cur: &mut BTreeMap<String, String>,
            out: &mut Vec<BTreeMap<String, String>>,
        ) {
            if i == eqs.len() {
                out.push(cur.clone());
                return;
            }
            for v in &eqs[i].1 {
                if used.insert(v.clone()) {
                    cur.insert(eqs[i].0.clone(), v.clone());
                    go(eqs, i + 1, used, cur, out);
                    cur.remove(&eqs[i].0);
                    used.remove(v);
                }
            }
        }
        let nvars: BTreeSet<&String> = s
            .declarations
            .iter()
            .map(|d| &d.symbol)
            .chain(s.equations.iter().flat_map(|e| e.variables.iter()))
            .collect();
        if nvars.len() != s.equations.len() {
            return Vec::new();
        }
        let eqs: Vec<(String, Vec<String>)> =
            s.equations.iter().map(|e| (e.id.clone(), e.variables.iter().cloned().collect())).collect();
        let mut out = Vec::new();
        go(&eqs, 0, &mut BTreeSet::new(), &mut BTreeMap::new(), &mut out);
        out
    }

    #[test]
    fn s1_mapping_is_unique() {
        let s = s1();
        let m = total_causal_mapping(&s).unwrap();
        let expected: BTreeMap<String, String> =
            [("f1", "t"), ("f2", "x0"), ("f3", "b"), ("f4", "x")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        assert_eq!(m.pairs, expected);
        assert!(m.warnings.is_empty());
        assert_eq!(all_perfect_matchings(&s), vec![expected]);
    }

    #[test]
    fn symmetric_pair_is_ambiguous() {
        let s = structure(&[("g1", &["a", "b"]), ("g2", &["a", "b"])], &[("a", Role::Output), ("b", Role::Output)]);
        let m = total_causal_mapping(&s).unwrap();
        assert_eq!(m.pairs["g1"], "a");
        assert_eq!(m.pairs["g2"], "b");
        assert_eq!(m.warnings, vec![CausalWarning::AmbiguousOrdering { equations: vec!["g1".into(), "g2".into()] }]);
        assert_eq!(all_perfect_matchings(&s).len(), 2);
    }

    #[test]
    fn unmatchable() {
        let s = structure(&[("g1", &["x"]), ("g2", &["x"])], &[("x", Role::Output), ("y", Role::Output)]);
        assert_eq!(total_causal_mapping(&s).unwrap_err().code(), "NoPerfectMatching");
    }

    #[test]
    fn s1_encoding() {
        let s = s1();
        let fds = encode_fds(&s, &total_causal_mapping(&s).unwrap()).unwrap();
        let expected = FdSet::from_fds(["φ -> x0", "φ -> b", "x0 b t υ -> x"].map(|f| Fd::parse(f).unwrap()));
        assert_eq!(fds.as_set(), expected.as_set());
        assert_eq!(fds.fds.len(), 3);
        assert!(fds.attributes.contains(PHI) && fds.attributes.contains(UPSILON));
    }

    #[test]
    fn index_only_structure() {
        let s = structure(&[("f", &["t"])], &[("t", Role::Index)]);
        let fds = encode_fds(&s, &total_causal_mapping(&s).unwrap()).unwrap();
        assert!(fds.is_empty());
        assert_eq!(fds.attributes, ["phi", "t", "upsilon"].iter().map(|s| s.to_string()).collect());
    }

    #[test]
    fn role_conflicts() {
        let s = structure(&[("f", &["x"])], &[("x", Role::Output)]);
        let m = total_causal_mapping(&s).unwrap();
        assert_eq!(encode_fds(&s, &m).unwrap_err().code(), "RoleConflict");
        let s = structure(&[("f", &["a"]), ("g", &["a", "b"])], &[("a", Role::Output), ("b", Role::Parameter)]);
        let m = total_causal_mapping(&s).unwrap();
        assert_eq!(encode_fds(&s, &m).unwrap_err().code(), "RoleConflict");
    }

    #[test]
    fn fd_display_and_parse() {
        let fd = Fd::parse("x0 b t υ -> x").unwrap();
        assert_eq!(fd.determinant.len(), 4);
        assert_eq!(fd.to_string(), "b t υ x0 → x");
        assert_eq!(Fd::parse("φ → b").unwrap().to_string(), "φ → b");
        assert!(Fd::parse("abc").is_none());
    }

    #[test]
    fn canonical_ordering() {
        let s = FdSet::from_fds([Fd::new(["phi"], "z"), Fd::new(["phi", "t"], "a"), Fd::new(["phi"], "a")]);
        let c: Vec<String> = s.canonical().iter().map(|f| f.to_string()).collect();
        assert_eq!(c, ["φ → a", "φ t → a", "φ → z"]);
    }

    fn random_structure() -> impl Strategy<Value = Structure> {
        (1usize..=8, 0usize..=8).prop_flat_map(|(ne, extra)| {
            let nv = (ne + extra % 3).saturating_sub(extra % 2).max(1);
            proptest::collection::vec(proptest::collection::btree_set(0..nv, 1..=nv.min(3)), ne).prop_map(move |rows| {
                let eqs: Vec<Equation> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, vs)| Equation {
                        id: format!("e{i}"),
                        variables: vs.iter().map(|v| format!("v{v}")).collect(),
                        expression: None,
                        value: None,
                    })
                    .collect();
                Structure {
                    hypothesis_id: 1,
                    name: String::new(),
                    description: String::new(),
                    equations: eqs,
                    declarations: (0..nv)
                        .map(|v| VariableDecl { symbol: format!("v{v}"), role: Role::Output, description: String::new() })
                        .collect(),
                }
            })
        })
    }

    proptest! {
        #[test]
        fn matching_agrees_with_enumeration(s in random_structure()) {
            let all = all_perfect_matchings(&s);
            match total_causal_mapping(&s) {
                Ok(m) => {
                    prop_assert!(all.contains(&m.pairs));
                    prop_assert_eq!(m.is_ambiguous(), all.len() > 1);
                    prop_assert_eq!(total_causal_mapping(&s).unwrap(), m);
                }
                Err(e) => {
                    prop_assert_eq!(e.code(), "NoPerfectMatching");
                    prop_assert!(all.is_empty());
                }
            }
        }
    }
}
