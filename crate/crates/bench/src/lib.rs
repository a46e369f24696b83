//! Seeded workload generators shared by the benches and the acceptance suite.

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::{Rng, RngExt};
use upsilon_core::ingest::{Equation, Role, Structure, VariableDecl};
use upsilon_core::uncertain::{Condition, UTuple, WorldTable};
use upsilon_core::Value;

/// Repository fixture directory.
pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn decl(symbol: String, role: Role) -> VariableDecl {
    VariableDecl { symbol, role, description: String::new() }
}

/// A valid structure: one index `t`, `1..=max_params` parameters with unary
/// equations, and `1..=max_outputs` outputs whose equations mention random
/// subsets of the other variables.
pub fn random_structure<R: Rng>(rng: &mut R, id: u32, max_params: usize, max_outputs: usize) -> Structure {
    let np = rng.random_range(1..=max_params);
    let no = rng.random_range(1..=max_outputs);
    let params: Vec<String> = (0..np).map(|i| format!("a{i}")).collect();
    let outputs: Vec<String> = (0..no).map(|i| format!("z{i}")).collect();
    let mut declarations = vec![decl("t".into(), Role::Index)];
    declarations.extend(params.iter().map(|p| decl(p.clone(), Role::Parameter)));
    declarations.extend(outputs.iter().map(|o| decl(o.clone(), Role::Output)));
    let mut equations = vec![Equation::opaque("f1", &["t"])];
    for p in &params {
        let id = format!("f{}", equations.len() + 1);
        equations.push(Equation::opaque(&id, &[p.as_str()]));
    }
    for o in &outputs {
        let mut vars: Vec<&str> = vec![o.as_str()];
        if rng.random_bool(0.8) {
            vars.push("t");
        }
        for p in &params {
            if rng.random_bool(0.5) {
                vars.push(p);
            }
        }
        for other in &outputs {
            if other != o && rng.random_bool(0.3) {
                vars.push(other);
            }
        }
        if vars.len() == 1 {
            vars.push("t");
        }
        let id = format!("f{}", equations.len() + 1);
        equations.push(Equation::opaque(&id, &vars));
    }
    Structure { hypothesis_id: id, name: format!("random {id}"), description: String::new(), equations, declarations }
}

/// Parameter rows over `cols` columns drawn from a tiny value domain, so that
/// constant and bijective columns occur often.
pub fn random_parameter_table<R: Rng>(rng: &mut R, max_cols: usize, max_rows: usize) -> (Vec<String>, Vec<Vec<f64>>) {
    let cols = rng.random_range(1..=max_cols);
    let rows = rng.random_range(1..=max_rows);
    let attrs: Vec<String> = (0..cols).map(|j| format!("c{j}")).collect();
    let mut table: Vec<Vec<f64>> = (0..rows).map(|_| Vec::with_capacity(cols)).collect();
    for j in 0..cols {
        let copy = j > 0 && rng.random_bool(0.4);
        let source = if copy { rng.random_range(0..j) } else { 0 };
        let scale = rng.random_range(2..=9) as f64;
        let domain = rng.random_range(1..=3);
        for row in table.iter_mut() {
            let v = if copy { row[source] * scale } else { rng.random_range(0..domain) as f64 };
            row.push(v);
        }
    }
    (attrs, table)
}

/// A normalized world table over `1..=max_vars` variables of `1..=max_alts`
/// alternatives and tuples over a small value domain with random conditions.
pub fn random_urelation<R: Rng>(rng: &mut R, max_vars: usize, max_alts: usize, max_tuples: usize) -> (WorldTable, Vec<UTuple>) {
    let mut w = WorldTable::default();
    for v in 0..rng.random_range(1..=max_vars) {
        let d = rng.random_range(1..=max_alts);
        let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        w.insert(&format!("v{v}"), raw.iter().map(|p| p / total).collect()).expect("normalized");
    }
    let vars: Vec<(String, usize)> = w.entries.iter().map(|(k, p)| (k.clone(), p.len())).collect();
    let tuples = (0..rng.random_range(1..=max_tuples))
        .map(|_| {
            let mut condition = Condition::new();
            for (name, d) in &vars {
                if rng.random_bool(0.5) {
                    condition.push((name.clone(), rng.random_range(1..=*d as u32)));
                }
            }
            UTuple { condition, values: vec![Value::Int(rng.random_range(0..3))] }
        })
        .collect();
    (w, tuples)
}

/// Probability that some clause holds, by summing over every total assignment.
pub fn enumerate_conf(clauses: &[Condition], w: &WorldTable) -> f64 {
    let vars: Vec<(&String, &Vec<f64>)> = w.entries.iter().collect();
    let mut idx = vec![0usize; vars.len()];
    let mut total = 0.0;
    loop {
        let holds = clauses.iter().any(|c| {
            c.iter().all(|(v, i)| vars.iter().position(|(n, _)| *n == v).is_some_and(|k| idx[k] + 1 == *i as usize))
        });
        if holds {
            total += vars.iter().zip(&idx).map(|((_, ps), i)| ps[*i]).product::<f64>();
        }
        let mut k = 0;
        loop {
            if k == vars.len() {
                return total;
            }
            idx[k] += 1;
            if idx[k] < vars[k].1.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Column partition from pairwise checks: constants together, otherwise
/// `i ~ j` iff every pair of rows agrees on `i` exactly when it agrees on `j`.
pub fn pairwise_partition(rows: &[Vec<f64>], cols: usize) -> BTreeSet<BTreeSet<usize>> {
    let constant = |j: usize| rows.iter().all(|r| r[j] == rows[0][j]);
    let same = |i: usize, j: usize| {
        rows.iter().all(|r| rows.iter().all(|s| (r[i] == s[i]) == (r[j] == s[j])))
    };
    let mut out: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
    let mut seen = BTreeSet::new();
    for i in 0..cols {
        if seen.contains(&i) {
            continue;
        }
        let class: BTreeSet<usize> = (0..cols)
            .filter(|&j| if constant(i) { constant(j) } else { !constant(j) && same(i, j) })
            .collect();
        seen.extend(class.iter().copied());
        out.insert(class);
    }
    out
}
