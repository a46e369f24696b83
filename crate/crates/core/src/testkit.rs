//! Example structures and trial data shared by unit tests.

use std::collections::BTreeMap;

use crate::ingest::{Equation, Role, Structure, VariableDecl};
use crate::relstore::{SeriesPoint, TrialDataset};

fn decl(s: &str, role: Role) -> VariableDecl {
    VariableDecl { symbol: s.into(), role, description: String::new() }
}

pub fn structure(upsilon: u32, name: &str, eqs: &[(&str, &[&str])], decls: &[(&str, Role)]) -> Structure {
    Structure {
        hypothesis_id: upsilon,
        name: name.into(),
        description: String::new(),
        equations: eqs.iter().map(|(id, vs)| Equation::opaque(id, vs)).collect(),
        declarations: decls.iter().map(|(s, r)| decl(s, *r)).collect(),
    }
}

pub fn malthus_structure() -> Structure {
    structure(
        1,
        "Malthus",
        &[("f1", &["t"]), ("f2", &["x0"]), ("f3", &["b"]), ("f4", &["x", "t", "x0", "b"])],
        &[("t", Role::Index), ("x0", Role::Parameter), ("b", Role::Parameter), ("x", Role::Output)],
    )
}

pub fn logistic_structure() -> Structure {
    structure(
        2,
        "Logistic",
        &[("f1", &["t"]), ("f2", &["x0"]), ("f3", &["K"]), ("f4", &["b"]), ("f5", &["x", "t", "x0", "K", "b"])],
        &[
            ("t", Role::Index),
            ("x0", Role::Parameter),
            ("K", Role::Parameter),
            ("b", Role::Parameter),
            ("x", Role::Output),
        ],
    )
}

pub fn lotka_structure() -> Structure {
    structure(
        3,
        "Lotka-Volterra",
        &[
            ("f1", &["t"]),
            ("f2", &["x0"]),
            ("f3", &["b"]),
            ("f4", &["p"]),
            ("f5", &["y0"]),
            ("f6", &["d"]),
            ("f7", &["r"]),
            ("f8", &["x", "t", "x0", "b", "p", "y"]),
            ("f9", &["y", "t", "y0", "d", "r", "x"]),
        ],
        &[
            ("t", Role::Index),
            ("x0", Role::Parameter),
            ("b", Role::Parameter),
            ("p", Role::Parameter),
            ("y0", Role::Parameter),
            ("d", Role::Parameter),
            ("r", Role::Parameter),
            ("x", Role::Output),
            ("y", Role::Output),
        ],
    )
}

/// Parameter rows (x0, b, p, y0, d, r) of the six predator-prey trials.
pub const LV_PARAMS: [[f64; 6]; 6] = [
    [30.0, 0.5, 0.020, 4.0, 0.75, 0.020],
    [30.0, 0.5, 0.018, 4.0, 0.75, 0.023],
    [30.0, 0.4, 0.020, 4.0, 0.8, 0.020],
    [30.0, 0.4, 0.018, 4.0, 0.8, 0.023],
    [30.0, 0.397, 0.020, 4.0, 0.786, 0.020],
    [30.0, 0.397, 0.018, 4.0, 0.786, 0.023],
];

/// (t, y, x) for the sixth trial.
pub const LV_TID6: [(f64, f64, f64); 5] =
    [(1900.0, 4.0, 30.0), (1901.0, 4.12, 41.5), (1902.0, 5.78, 56.7), (1903.0, 11.7, 72.8), (1904.0, 31.1, 75.9)];

pub fn lv_trial(k: usize, series: &[(f64, f64, f64)]) -> TrialDataset {
    let names = ["x0", "b", "p", "y0", "d", "r"];
    TrialDataset {
        phi: 2,
        upsilon: 3,
        parameters: names.iter().zip(LV_PARAMS[k]).map(|(n, v)| (n.to_string(), v)).collect(),
        index_symbol: "t".into(),
        series: series
            .iter()
            .map(|(t, y, x)| SeriesPoint {
                index: *t,
                outputs: BTreeMap::from([("x".to_string(), *x), ("y".to_string(), *y)]),
            })
            .collect(),
    }
}

pub fn single_output_trial(phi: u32, upsilon: u32, params: &[(&str, f64)], xs: &[(f64, f64)]) -> TrialDataset {
    TrialDataset {
        phi,
        upsilon,
        parameters: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        index_symbol: "t".into(),
        series: xs
            .iter()
            .map(|(t, x)| SeriesPoint { index: *t, outputs: BTreeMap::from([("x".to_string(), *x)]) })
            .collect(),
    }
}
