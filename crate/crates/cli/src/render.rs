//! Plain-text renderings of the JSON artifacts.

use std::fmt::Write as _;

use upsilon_core::conditioning::WorldPosterior;
use upsilon_core::project::{CatalogView, ConfReport, HypothesisReport, TrialReceipt};
use upsilon_core::relstore::Selection;
use upsilon_core::symbols::display;
use upsilon_core::uncertain::{UIntroReport, WorldEntry};
use upsilon_core::{PhenomenonDecl, RelationDef};

fn attrs(xs: &[String]) -> String {
    xs.iter().map(|a| display(a)).collect::<Vec<_>>().join(" ")
}

fn relation(r: &RelationDef) -> String {
    let keys: Vec<String> = r
        .keys
        .iter()
        .map(|k| format!("{{{}}}", k.iter().map(|a| display(a)).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("{}({})  keys {}", r.name, r.attributes.iter().map(|a| display(a)).collect::<Vec<_>>().join(", "), keys.join(" "))
}

pub fn hypothesis(r: &HypothesisReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "υ={} {}", r.upsilon, r.name);
    let block = |s: &mut String, title: String, fds: &[String]| {
        let _ = writeln!(s, "{title} = {{");
        for f in fds {
            let _ = writeln!(s, "  {f}");
        }
        let _ = writeln!(s, "}}");
    };
    block(&mut s, format!("Σ{}", r.upsilon), &r.sigma);
    block(&mut s, format!("Σ{}^↬", r.upsilon), &r.folded);
    for rel in &r.relations {
        let _ = writeln!(s, "{}", relation(rel));
    }
    for w in &r.causal_warnings {
        let _ = writeln!(s, "warning: {}", serde_json::to_string(w).unwrap_or_default());
    }
    for w in &r.synthesis_warnings {
        let _ = writeln!(s, "warning: {}", serde_json::to_string(w).unwrap_or_default());
    }
    if !r.targets.is_empty() {
        let _ = writeln!(s, "targets φ {}", r.targets.iter().map(u32::to_string).collect::<Vec<_>>().join(" "));
    }
    s
}

pub fn phenomenon(p: &PhenomenonDecl) -> String {
    format!("φ={} {}\n", p.id, p.description)
}

pub fn receipt(r: &TrialReceipt) -> String {
    format!("loaded φ={} υ={} tid={}\n", r.phi, r.upsilon, r.tid)
}

pub fn selection(sel: &Selection) -> String {
    let mut s = format!("{}\n", attrs(&sel.attributes));
    for r in &sel.rows {
        let _ = writeln!(s, "{}", r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "));
    }
    s
}

pub fn conf(c: &ConfReport) -> String {
    let mut s = format!("{} conf\n", attrs(&c.attributes));
    for r in &c.rows {
        let _ = writeln!(s, "{} {:.6}", r.values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "), r.conf);
    }
    s
}

pub fn u_intro(r: &UIntroReport) -> String {
    let mut s = format!("φ={}: {} worlds\n", r.phi, r.worlds);
    let _ = writeln!(s, "variables {}", r.variables.join(" "));
    let _ = writeln!(s, "u-relations {}", r.urelations.join(" "));
    for w in &r.warnings {
        let _ = writeln!(s, "warning: {}", serde_json::to_string(w).unwrap_or_default());
    }
    s
}

pub fn predictions(ws: &[WorldPosterior]) -> String {
    let mut s = format!("{:>3} {:>4} {:>10}\n", "υ", "tid", "Pr");
    for w in ws {
        let _ = writeln!(s, "{:>3} {:>4} {:>10.4}", w.upsilon, w.tid, w.prior);
    }
    s
}

pub fn world_table(rows: &[WorldEntry]) -> String {
    let mut s = format!("{:<6} {:>4} {:>12}\n", "var", "val", "prob");
    for e in rows {
        let _ = writeln!(s, "{:<6} {:>4} {:>12.6}", e.var, e.val, e.prob);
    }
    s
}

pub fn catalog(c: &CatalogView) -> String {
    let mut s = String::new();
    for p in &c.phenomena {
        let _ = writeln!(s, "φ={} {}", p.id, p.description);
    }
    for h in &c.hypotheses {
        let _ = writeln!(s, "υ={} {} [{}]", h.upsilon, h.name, h.relations.join(", "));
    }
    for t in &c.stages {
        let stage = serde_json::to_value(t.stage).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        let _ = writeln!(s, "φ={} υ={} trials={} {stage}", t.phi, t.upsilon, t.trials);
    }
    s
}
