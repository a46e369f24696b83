use std::collections::BTreeSet;
use std::path::PathBuf;

use upsilon_core::{
    encode_fds, fold_fds, parse_descriptor, parse_observations, parse_phenomenon, parse_trial_csv, synthesize_4c,
    total_causal_mapping, validate_structure, ConditionRequest, ErrorKind, Fd, OdeModel, Project, Role, Stage,
};

fn fixture(rel: &str) -> Vec<u8> {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel);
    std::fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn fixture_text(rel: &str) -> String {
    String::from_utf8(fixture(rel)).unwrap()
}

fn fds(lines: &[&str]) -> BTreeSet<Fd> {
    lines.iter().map(|l| Fd::parse(l).unwrap()).collect()
}

#[test]
fn descriptors_validate_and_fold() {
    let cases = [
        ("hypotheses/malthus.xml", fds(&["φ -> x0", "φ -> b", "φ t υ -> x"])),
        ("hypotheses/logistic.xml", fds(&["φ -> x0", "φ -> K", "φ -> b", "φ t υ -> x"])),
        (
            "hypotheses/lotka_volterra.xml",
            fds(&["φ -> x0", "φ -> b", "φ -> p", "φ -> y0", "φ -> d", "φ -> r", "φ t υ y -> x", "φ t υ x -> y"]),
        ),
    ];
    for (path, want) in cases {
        let s = parse_descriptor(&fixture(path)).unwrap();
        assert!(validate_structure(&s).violations.is_empty(), "{path}");
        let folded = fold_fds(&encode_fds(&s, &total_causal_mapping(&s).unwrap()).unwrap());
        assert_eq!(folded.fds.iter().cloned().collect::<BTreeSet<_>>(), want, "{path}");
    }
}

#[test]
fn malthus_schema_has_parameter_and_output_relations() {
    let s = parse_descriptor(&fixture("hypotheses/malthus.xml")).unwrap();
    let folded = fold_fds(&encode_fds(&s, &total_causal_mapping(&s).unwrap()).unwrap());
    let index: BTreeSet<String> = s.symbols_with(Role::Index).into_iter().collect();
    let cat = synthesize_4c(&folded, s.hypothesis_id, &index).unwrap();
    let names: Vec<&str> = cat.relations.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["H_1^1", "H_1^2"]);
    assert_eq!(cat.relations[1].attribute_set(), ["phi", "t", "upsilon", "x"].map(String::from).into());
}

#[test]
fn census_project_runs_end_to_end_and_reopens() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = Project::init(dir.path()).unwrap();
    p.add_phenomenon(parse_phenomenon(&fixture("phenomena/us_population.json")).unwrap()).unwrap();
    p.add_hypothesis(&fixture("hypotheses/malthus.xml"), &[1]).unwrap();
    p.add_hypothesis(&fixture("hypotheses/logistic.xml"), &[1]).unwrap();
    assert_eq!(p.stage(1, 1).unwrap().stage, Stage::Deployed);

    let models_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/models/us");
    let mut models: Vec<_> = std::fs::read_dir(models_dir).unwrap().map(|e| e.unwrap().path()).collect();
    models.sort();
    for m in &models {
        let m = OdeModel::from_json(&std::fs::read_to_string(m).unwrap()).unwrap();
        p.load_trial(&m.to_trial(1, m.upsilon.unwrap()).unwrap()).unwrap();
    }
    assert_eq!(p.stage(1, 1).unwrap().stage, Stage::Loaded);
    let report = p.u_intro(1).unwrap();
    assert_eq!(report.worlds, models.len());

    let observations = parse_observations(&fixture_text("observations/us_population.csv")).unwrap();
    let req = ConditionRequest { phi: 1, observations, sigma: None, at: None, writeback: true };
    let rep = p.condition(&req).unwrap();
    assert!((rep.total() - 1.0).abs() < 1e-9);
    assert_eq!(p.stage(1, 2).unwrap().stage, Stage::Conditioned);

    let again = Project::open(dir.path()).unwrap();
    assert_eq!(
        serde_json::to_value(again.catalog_view()).unwrap(),
        serde_json::to_value(p.catalog_view()).unwrap()
    );
    assert_eq!(serde_json::to_value(again.world_table()).unwrap(), serde_json::to_value(p.world_table()).unwrap());
}

#[test]
fn trials_outside_h0_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = Project::init(dir.path()).unwrap();
    p.add_phenomenon(parse_phenomenon(&fixture("phenomena/lynx.xml")).unwrap()).unwrap();
    p.add_hypothesis(&fixture("hypotheses/lotka_volterra.xml"), &[]).unwrap();
    let d = parse_trial_csv(&fixture_text("trials/lotka_volterra_1.csv"), 2, 3).unwrap();
    let err = p.load_trial(&d).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Conflict, "{err}");
    p.add_target(2, 3).unwrap();
    p.load_trial(&d).unwrap();
}
