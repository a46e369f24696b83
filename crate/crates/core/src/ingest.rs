//! Hypothesis descriptors (XML + content MathML), phenomenon files and
//! observation tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use roxmltree::{Document, Node};
use serde::{Deserialize, Serialize};

use crate::causal;
use crate::error::{Error, Result};
use crate::symbols;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Parameter,
    Index,
    Output,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Parameter => "parameter",
            Role::Index => "index",
            Role::Output => "output",
        }
    }

    fn parse(s: &str) -> Option<Role> {
        match s {
            "parameter" => Some(Role::Parameter),
            "index" => Some(Role::Index),
            "output" => Some(Role::Output),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDecl {
    pub symbol: String,
    pub role: Role,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Eq,
    Plus,
    Minus,
    Times,
    Divide,
    Power,
}

impl Op {
    fn name(self) -> &'static str {
        match self {
            Op::Eq => "eq",
            Op::Plus => "plus",
            Op::Minus => "minus",
            Op::Times => "times",
            Op::Divide => "divide",
            Op::Power => "power",
        }
    }

    fn parse(s: &str) -> Option<Op> {
        Some(match s {
            "eq" => Op::Eq,
            "plus" => Op::Plus,
            "minus" => Op::Minus,
            "times" => Op::Times,
            "divide" => Op::Divide,
            "power" => Op::Power,
            _ => return None,
        })
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            Op::Eq | Op::Divide | Op::Power => n == 2,
            Op::Minus => n == 1 || n == 2,
            Op::Plus | Op::Times => n >= 1,
        }
    }
}

/// Content MathML expression tree restricted to the supported subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expr {
    Ci(String),
    Cn(f64),
    Apply { op: Op, args: Vec<Expr> },
    /// Ordinary derivative `d arg / d bvar`; `condition` names the initial value.
    Diff {
        bvar: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        condition: Option<Box<Expr>>,
        arg: Box<Expr>,
    },
}

impl Expr {
    pub fn leaves(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Ci(s) => {
                out.insert(s.clone());
            }
            Expr::Cn(_) => {}
            Expr::Apply { args, .. } => args.iter().for_each(|a| a.leaves(out)),
            Expr::Diff { bvar, condition, arg } => {
                out.insert(bvar.clone());
                if let Some(c) = condition {
                    c.leaves(out);
                }
                arg.leaves(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equation {
    pub id: String,
    pub variables: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<Expr>,
    /// Literal right-hand side of a subsidiary equation such as `x0 = 30`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl Equation {
    pub fn opaque(id: &str, vars: &[&str]) -> Equation {
        Equation {
            id: id.to_string(),
            variables: vars.iter().map(|v| v.to_string()).collect(),
            expression: None,
            value: None,
        }
    }

    pub fn arity(&self) -> usize {
        self.variables.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Structure {
    pub hypothesis_id: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub equations: Vec<Equation>,
    pub declarations: Vec<VariableDecl>,
}

impl Structure {
    pub fn role(&self, symbol: &str) -> Option<Role> {
        self.declarations.iter().find(|d| d.symbol == symbol).map(|d| d.role)
    }

    pub fn symbols_with(&self, role: Role) -> Vec<String> {
        self.declarations
            .iter()
            .filter(|d| d.role == role)
            .map(|d| d.symbol.clone())
            .collect()
    }

    pub fn equation(&self, id: &str) -> Option<&Equation> {
        self.equations.iter().find(|e| e.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhenomenonDecl {
    pub id: u32,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason")]
pub enum Violation {
    Empty,
    CountMismatch { equations: usize, variables: usize },
    NoPerfectMatching { unmatched_equations: Vec<String> },
    OrphanVariable { symbol: String },
    UndeclaredVariable { symbol: String },
}

impl Violation {
    pub fn name(&self) -> &'static str {
        match self {
            Violation::Empty => "Empty",
            Violation::CountMismatch { .. } => "CountMismatch",
            Violation::NoPerfectMatching { .. } => "NoPerfectMatching",
            Violation::OrphanVariable { .. } => "OrphanVariable",
            Violation::UndeclaredVariable { .. } => "UndeclaredVariable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn has(&self, name: &str) -> bool {
        self.violations.iter().any(|v| v.name() == name)
    }
}

pub fn parse_descriptor(bytes: &[u8]) -> Result<Structure> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::MalformedXml(format!("not UTF-8: {e}")))?;
    let doc = Document::parse(text).map_err(|e| Error::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "hypothesis" {
        return Err(Error::UnknownElement(format!(
            "root element <{}>, expected <hypothesis>",
            root.tag_name().name()
        )));
    }
    let hypothesis_id = positive_id(root, "id")?;
    let name = root.attribute("name").unwrap_or_default().to_string();

    let mut description = String::new();
    let mut declarations: Vec<VariableDecl> = Vec::new();
    let mut raw_equations = Vec::new();
    for child in root.children().filter(Node::is_element) {
        match child.tag_name().name() {
            "description" => description = child.text().unwrap_or_default().trim().to_string(),
            "variable" => declarations.push(parse_variable(child)?),
            "equation" => raw_equations.push(child),
            other => return Err(Error::UnknownElement(format!("<{other}> inside <hypothesis>"))),
        }
    }

    let mut seen = BTreeSet::new();
    for d in &declarations {
        if !seen.insert(d.symbol.as_str()) {
            return Err(Error::DuplicateVariable(d.symbol.clone()));
        }
    }

    let mut equations: Vec<Equation> = Vec::new();
    for node in raw_equations {
        let eq = parse_equation(node)?;
        if equations.iter().any(|e| e.id == eq.id) {
            return Err(Error::DuplicateEquationId(eq.id));
        }
        if let Some(v) = eq.variables.iter().find(|v| !seen.contains(v.as_str())) {
            return Err(Error::UndeclaredVariable(format!("{v} in equation {}", eq.id)));
        }
        equations.push(eq);
    }

    Ok(Structure { hypothesis_id, name, description, equations, declarations })
}

fn positive_id(node: Node, attr: &str) -> Result<u32> {
    let raw = node
        .attribute(attr)
        .ok_or_else(|| Error::InvalidDescriptor(format!("<{}> lacks `{attr}`", node.tag_name().name())))?;
    match raw.trim().parse::<u32>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(Error::InvalidDescriptor(format!("`{attr}` must be a positive integer, got {raw:?}"))),
    }
}

fn parse_variable(node: Node) -> Result<VariableDecl> {
    let symbol = node
        .attribute("symbol")
        .ok_or_else(|| Error::InvalidDescriptor("<variable> lacks `symbol`".into()))?
        .trim()
        .to_string();
    if !symbols::is_identifier(&symbol) {
        return Err(Error::InvalidDescriptor(format!("bad symbol {symbol:?}")));
    }
    if symbols::is_reserved(&symbol) {
        return Err(Error::InvalidDescriptor(format!("symbol {symbol:?} is reserved")));
    }
    let role_raw = node.attribute("role").unwrap_or_default();
    let role = Role::parse(role_raw)
        .ok_or_else(|| Error::InvalidDescriptor(format!("variable {symbol}: unknown role {role_raw:?}")))?;
    let description = node.attribute("description").unwrap_or_default().to_string();
    Ok(VariableDecl { symbol, role, description })
}

fn parse_equation(node: Node) -> Result<Equation> {
    let id = node
        .attribute("id")
        .ok_or_else(|| Error::InvalidDescriptor("<equation> lacks `id`".into()))?
        .to_string();
    let elements: Vec<Node> = node.children().filter(Node::is_element).collect();

    if let Some(vars) = node.attribute("vars") {
        if !elements.is_empty() {
            return Err(Error::InvalidDescriptor(format!("equation {id} has both `vars` and content")));
        }
        let variables: BTreeSet<String> = vars
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        if variables.is_empty() {
            return Err(Error::InvalidDescriptor(format!("equation {id} has no variables")));
        }
        return Ok(Equation { id, variables, expression: None, value: None });
    }

    let [math] = elements.as_slice() else {
        return Err(Error::InvalidDescriptor(format!("equation {id} needs exactly one <math> child")));
    };
    if math.tag_name().name() != "math" {
        return Err(Error::UnknownElement(format!("<{}> in equation {id}", math.tag_name().name())));
    }
    let inner: Vec<Node> = math.children().filter(Node::is_element).collect();
    let [top] = inner.as_slice() else {
        return Err(Error::InvalidDescriptor(format!("<math> of {id} must hold one expression")));
    };
    let expr = parse_expr(*top)?;
    let Expr::Apply { op: Op::Eq, args } = &expr else {
        return Err(Error::InvalidDescriptor(format!("equation {id} is not an <eq/> application")));
    };
    let value = literal_value(&args[0], &args[1]);
    let mut variables = BTreeSet::new();
    expr.leaves(&mut variables);
    if variables.is_empty() {
        return Err(Error::InvalidDescriptor(format!("equation {id} mentions no variable")));
    }
    Ok(Equation { id, variables, expression: Some(expr), value })
}

fn literal_value(lhs: &Expr, rhs: &Expr) -> Option<f64> {
    match (lhs, rhs) {
        (Expr::Ci(_), Expr::Cn(c)) | (Expr::Cn(c), Expr::Ci(_)) => Some(*c),
        _ => None,
    }
}

fn parse_expr(node: Node) -> Result<Expr> {
    match node.tag_name().name() {
        "ci" => {
            let s = node.text().unwrap_or_default().trim();
            if !symbols::is_identifier(s) {
                return Err(Error::InvalidDescriptor(format!("bad identifier {s:?} in <ci>")));
            }
            Ok(Expr::Ci(s.to_string()))
        }
        "cn" => {
            let s = node.text().unwrap_or_default().trim();
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Expr::Cn(v)),
                _ => Err(Error::InvalidDescriptor(format!("bad number {s:?} in <cn>"))),
            }
        }
        "apply" => parse_apply(node),
        other => Err(Error::UnknownElement(format!("<{other}>"))),
    }
}

fn parse_apply(node: Node) -> Result<Expr> {
    let mut kids = node.children().filter(Node::is_element);
    let head = kids.next().ok_or_else(|| Error::InvalidDescriptor("empty <apply>".into()))?;
    let head_name = head.tag_name().name();
    if head_name == "diff" {
        let mut bvar = None;
        let mut condition = None;
        let mut operands = Vec::new();
        for k in kids {
            match k.tag_name().name() {
                "bvar" => {
                    let inner: Vec<Node> = k.children().filter(Node::is_element).collect();
                    match inner.as_slice() {
                        [ci] if ci.tag_name().name() == "ci" => {
                            if let Expr::Ci(s) = parse_expr(*ci)? {
                                bvar = Some(s);
                            }
                        }
                        _ => return Err(Error::InvalidDescriptor("<bvar> must hold one <ci>".into())),
                    }
                }
                "condition" => {
                    let inner: Vec<Node> = k.children().filter(Node::is_element).collect();
                    let [c] = inner.as_slice() else {
                        return Err(Error::InvalidDescriptor("<condition> must hold one expression".into()));
                    };
                    condition = Some(Box::new(parse_expr(*c)?));
                }
                _ => operands.push(parse_expr(k)?),
            }
        }
        let bvar = bvar.ok_or_else(|| Error::InvalidDescriptor("<diff/> without <bvar>".into()))?;
        if operands.len() != 1 {
            return Err(Error::InvalidDescriptor("<diff/> takes exactly one operand".into()));
        }
        return Ok(Expr::Diff { bvar, condition, arg: Box::new(operands.remove(0)) });
    }
    let op = Op::parse(head_name).ok_or_else(|| Error::UnknownElement(format!("<{head_name}/>")))?;
    let args = kids.map(parse_expr).collect::<Result<Vec<_>>>()?;
    if !op.arity_ok(args.len()) {
        return Err(Error::InvalidDescriptor(format!("<{head_name}/> applied to {} operands", args.len())));
    }
    Ok(Expr::Apply { op, args })
}

/// Writes a structure back out in descriptor form.
pub fn to_xml(s: &Structure) -> String {
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(out, r#"<hypothesis id="{}" name="{}">"#, s.hypothesis_id, escape(&s.name));
    if !s.description.is_empty() {
        let _ = writeln!(out, "  <description>{}</description>", escape(&s.description));
    }
    for d in &s.declarations {
        let _ = write!(out, r#"  <variable symbol="{}" role="{}""#, d.symbol, d.role.as_str());
        if !d.description.is_empty() {
            let _ = write!(out, r#" description="{}""#, escape(&d.description));
        }
        out.push_str("/>\n");
    }
    for e in &s.equations {
        match &e.expression {
            None => {
                let vars: Vec<&str> = e.variables.iter().map(String::as_str).collect();
                let _ = writeln!(out, r#"  <equation id="{}" vars="{}"/>"#, escape(&e.id), vars.join(" "));
            }
            Some(expr) => {
                let _ = writeln!(out, r#"  <equation id="{}">"#, escape(&e.id));
                out.push_str(r#"    <math xmlns="http://www.w3.org/1998/Math/MathML">"#);
                write_expr(&mut out, expr);
                out.push_str("</math>\n  </equation>\n");
            }
        }
    }
    out.push_str("</hypothesis>\n");
    out
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Ci(s) => {
            let _ = write!(out, "<ci>{s}</ci>");
        }
        Expr::Cn(v) => {
            let _ = write!(out, "<cn>{v}</cn>");
        }
        Expr::Apply { op, args } => {
            let _ = write!(out, "<apply><{}/>", op.name());
            args.iter().for_each(|a| write_expr(out, a));
            out.push_str("</apply>");
        }
        Expr::Diff { bvar, condition, arg } => {
            let _ = write!(out, "<apply><diff/><bvar><ci>{bvar}</ci></bvar>");
            if let Some(c) = condition {
                out.push_str("<condition>");
                write_expr(out, c);
                out.push_str("</condition>");
            }
            write_expr(out, arg);
            out.push_str("</apply>");
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn validate_structure(s: &Structure) -> ValidityReport {
    let mut violations = Vec::new();
    if s.equations.is_empty() {
        violations.push(Violation::Empty);
    }
    if s.equations.len() != s.declarations.len() {
        violations.push(Violation::CountMismatch {
            equations: s.equations.len(),
            variables: s.declarations.len(),
        });
    }
    let declared: BTreeSet<&str> = s.declarations.iter().map(|d| d.symbol.as_str()).collect();
    let used: BTreeSet<&str> = s.equations.iter().flat_map(|e| e.variables.iter().map(String::as_str)).collect();
    for u in used.difference(&declared) {
        violations.push(Violation::UndeclaredVariable { symbol: u.to_string() });
    }
    if !s.equations.is_empty() {
        let m = causal::maximum_matching(s);
        if !m.is_perfect() {
            violations.push(Violation::NoPerfectMatching { unmatched_equations: m.unmatched_equations() });
        }
    }
    for d in &s.declarations {
        if !used.contains(d.symbol.as_str()) {
            violations.push(Violation::OrphanVariable { symbol: d.symbol.clone() });
        }
    }
    ValidityReport { valid: violations.is_empty(), violations }
}

pub fn parse_phenomenon(bytes: &[u8]) -> Result<PhenomenonDecl> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::InvalidDescriptor(format!("not UTF-8: {e}")))?;
    let trimmed = text.trim_start();
    let decl = if trimmed.starts_with('{') {
        serde_json::from_str::<PhenomenonDecl>(trimmed)
            .map_err(|e| Error::InvalidDescriptor(format!("phenomenon JSON: {e}")))?
    } else {
        let doc = Document::parse(text).map_err(|e| Error::MalformedXml(e.to_string()))?;
        let root = doc.root_element();
        if root.tag_name().name() != "phenomenon" {
            return Err(Error::UnknownElement(format!("<{}>, expected <phenomenon>", root.tag_name().name())));
        }
        let id = positive_id(root, "id")?;
        let mut description = root.attribute("description").unwrap_or_default().to_string();
        for child in root.children().filter(Node::is_element) {
            match child.tag_name().name() {
                "description" => description = child.text().unwrap_or_default().trim().to_string(),
                other => return Err(Error::UnknownElement(format!("<{other}> inside <phenomenon>"))),
            }
        }
        PhenomenonDecl { id, description }
    };
    if decl.id == 0 {
        return Err(Error::InvalidDescriptor("phenomenon id must be positive".into()));
    }
    Ok(decl)
}

/// Two-column observation table: an index column and one observed output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationTable {
    pub index_symbol: String,
    pub index_label: String,
    pub output_symbol: String,
    pub output_label: String,
    pub samples: Vec<(f64, f64)>,
}

/// Parses `t=Year,x=Lynx` style CSV. A bare `t,x` header uses the symbols as labels.
pub fn parse_observations(text: &str) -> Result<ObservationTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::InvalidCsv(e.to_string()))?.clone();
    if headers.len() != 2 {
        return Err(Error::InvalidCsv(format!("observation header needs 2 columns, got {}", headers.len())));
    }
    let split = |h: &str| -> Result<(String, String)> {
        let (sym, label) = h.split_once('=').unwrap_or((h, h));
        let sym = symbols::canonical(sym.trim()).to_string();
        if !symbols::is_identifier(&sym) {
            return Err(Error::InvalidCsv(format!("bad column symbol {sym:?}")));
        }
        Ok((sym, label.trim().to_string()))
    };
    let (index_symbol, index_label) = split(&headers[0])?;
    let (output_symbol, output_label) = split(&headers[1])?;
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::InvalidCsv(e.to_string()))?;
        let t = parse_number(&rec[0])?;
        let y = parse_number(&rec[1])?;
        samples.push((t, y));
    }
    Ok(ObservationTable { index_symbol, index_label, output_symbol, output_label, samples })
}

pub(crate) fn parse_number(s: &str) -> Result<f64> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::InvalidValue(format!("not a finite number: {s:?}"))),
    }
}

/// Index of declarations by symbol.
pub fn roles(s: &Structure) -> BTreeMap<String, Role> {
    s.declarations.iter().map(|d| (d.symbol.clone(), d.role)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MALTHUS: &str = r#"<hypothesis id="1" name="Malthus">
      <variable symbol="t" role="index"/>
      <variable symbol="x0" role="parameter"/>
      <variable symbol="b" role="parameter"/>
      <variable symbol="x" role="output"/>
      <equation id="f1" vars="t"/>
      <equation id="f2"><math><apply><eq/><ci>x0</ci><cn>30</cn></apply></math></equation>
      <equation id="f3" vars="b"/>
      <equation id="f4"><math xmlns="http://www.w3.org/1998/Math/MathML">
        <apply><eq/>
          <apply><diff/><bvar><ci>t</ci></bvar><condition><ci>x0</ci></condition><ci>x</ci></apply>
          <apply><times/><ci>b</ci><ci>x</ci></apply>
        </apply></math></equation>
    </hypothesis>"#;

    fn vars(e: &Equation) -> Vec<&str> {
        e.variables.iter().map(String::as_str).collect()
    }

    #[test]
    fn parses_malthus() {
        let s = parse_descriptor(MALTHUS.as_bytes()).unwrap();
        assert_eq!(s.hypothesis_id, 1);
        assert_eq!(s.equations.len(), 4);
        assert_eq!(vars(&s.equations[0]), ["t"]);
        assert_eq!(vars(&s.equations[1]), ["x0"]);
        assert_eq!(s.equations[1].value, Some(30.0));
        assert_eq!(vars(&s.equations[3]), ["b", "t", "x", "x0"]);
        assert!(validate_structure(&s).valid);
    }

    #[test]
    fn empty_descriptor_parses_but_is_invalid() {
        let s = parse_descriptor(br#"<hypothesis id="4" name="none"/>"#).unwrap();
        assert!(s.equations.is_empty());
        let r = validate_structure(&s);
        assert!(!r.valid && r.has("Empty"));
    }

    #[test]
    fn parse_errors() {
        let bad = |x: &str| parse_descriptor(x.as_bytes()).unwrap_err().code();
        assert_eq!(bad("<hypothesis"), "MalformedXml");
        assert_eq!(
            bad(r#"<hypothesis id="1"><variable symbol="x" role="output"/><equation id="e"><math><apply><eq/><ci>x</ci><apply><sin/><ci>x</ci></apply></apply></math></equation></hypothesis>"#),
            "UnknownElement"
        );
        assert_eq!(
            bad(r#"<hypothesis id="1"><variable symbol="x" role="output"/><equation id="e"><math><apply><eq/><ci>x</ci><ci>z</ci></apply></math></equation></hypothesis>"#),
            "UndeclaredVariable"
        );
        assert_eq!(
            bad(r#"<hypothesis id="1"><variable symbol="x" role="output"/><equation id="e" vars="x"/><equation id="e" vars="x"/></hypothesis>"#),
            "DuplicateEquationId"
        );
        assert_eq!(bad(r#"<hypothesis id="1"><variable symbol="phi" role="parameter"/></hypothesis>"#), "InvalidDescriptor");
        assert_eq!(bad(r#"<hypothesis id="0"/>"#), "InvalidDescriptor");
        assert_eq!(bad(r#"<theory id="1"/>"#), "UnknownElement");
    }

    #[test]
    fn count_mismatch_when_equation_removed() {
        let mut s = parse_descriptor(MALTHUS.as_bytes()).unwrap();
        s.equations.retain(|e| e.id != "f3");
        let r = validate_structure(&s);
        assert!(!r.valid);
        assert!(r.has("CountMismatch"));
    }

    #[test]
    fn no_matching_and_orphan() {
        let s = Structure {
            hypothesis_id: 9,
            name: String::new(),
            description: String::new(),
            equations: vec![Equation::opaque("g1", &["x"]), Equation::opaque("g2", &["x"])],
            declarations: vec![
                VariableDecl { symbol: "x".into(), role: Role::Output, description: String::new() },
                VariableDecl { symbol: "y".into(), role: Role::Output, description: String::new() },
            ],
        };
        let r = validate_structure(&s);
        assert!(!r.valid);
        assert!(r.has("NoPerfectMatching"));
        assert!(r.has("OrphanVariable"));
        assert!(!r.has("CountMismatch"));
    }

    #[test]
    fn phenomenon_formats() {
        let j = parse_phenomenon(br#"{"id": 1, "description": "US population"}"#).unwrap();
        assert_eq!(j, PhenomenonDecl { id: 1, description: "US population".into() });
        let x = parse_phenomenon(b"<phenomenon id=\"2\"><description>Lynx</description></phenomenon>").unwrap();
        assert_eq!(x.id, 2);
        assert_eq!(x.description, "Lynx");
        assert!(parse_phenomenon(br#"{"id": 0}"#).is_err());
    }

    #[test]
    fn observation_csv() {
        let o = parse_observations("t=Year,x=Lynx\n1900,4\n1901,6.1\n").unwrap();
        assert_eq!(o.index_symbol, "t");
        assert_eq!(o.output_label, "Lynx");
        assert_eq!(o.samples, vec![(1900.0, 4.0), (1901.0, 6.1)]);
        let bare = parse_observations("t,x\n1,2\n").unwrap();
        assert_eq!(bare.index_label, "t");
        assert_eq!(parse_observations("t,x\n1,abc\n").unwrap_err().code(), "InvalidValue");
    }

    #[test]
    fn round_trip_fixture() {
        let s = parse_descriptor(MALTHUS.as_bytes()).unwrap();
        let again = parse_descriptor(to_xml(&s).as_bytes()).unwrap();
        assert_eq!(s, again);
    }

    fn arb_expr(names: Vec<String>) -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            proptest::sample::select(names.clone()).prop_map(Expr::Ci),
            (-1.0e6f64..1.0e6).prop_map(Expr::Cn),
        ];
        leaf.prop_recursive(3, 16, 3, move |inner| {
            let names = names.clone();
            prop_oneof![
                proptest::collection::vec(inner.clone(), 1..4).prop_map(|args| Expr::Apply { op: Op::Plus, args }),
                proptest::collection::vec(inner.clone(), 2..=2).prop_map(|args| Expr::Apply { op: Op::Divide, args }),
                (proptest::sample::select(names), inner).prop_map(|(b, a)| Expr::Diff {
                    bvar: b,
                    condition: None,
                    arg: Box::new(a)
                }),
            ]
        })
    }

    proptest! {
        #[test]
        fn round_trip_random(exprs in proptest::collection::vec(
            (arb_expr(vec!["a".into(), "b".into(), "c".into()]), arb_expr(vec!["a".into(), "c".into()])), 1..5)
        ) {
            let decls = ["a", "b", "c"].iter().map(|s| VariableDecl {
                symbol: s.to_string(), role: Role::Output, description: "d & <e>".into()
            }).collect();
            let equations = exprs.into_iter().enumerate().filter_map(|(i, (l, r))| {
                let value = literal_value(&l, &r);
                let expr = Expr::Apply { op: Op::Eq, args: vec![l, r] };
                let mut variables = BTreeSet::new();
                expr.leaves(&mut variables);
                if variables.is_empty() { return None; }
                Some(Equation { id: format!("e{i}"), variables, expression: Some(expr), value })
            }).collect();
            let s = Structure { hypothesis_id: 7, name: "r\"t".into(), description: String::new(), equations, declarations: decls };
            let xml = to_xml(&s);
            let once = parse_descriptor(xml.as_bytes()).unwrap();
            prop_assert_eq!(&once, &s);
            prop_assert_eq!(parse_descriptor(xml.as_bytes()).unwrap(), once);
        }
    }
}
