use std::path::Path;

use serde::Serialize;
use upsilon_core::project::{ConditionRequest, Project};
use upsilon_core::{parse_observations, parse_phenomenon, parse_trial_csv, write_trial_csv, Error, OdeModel, Result};

use crate::args::{Cli, Command};
use crate::render;

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read(path)?).map_err(|e| Error::InvalidCsv(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce(&T) -> String) -> Result<String> {
    if json {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    } else {
        Ok(text(value))
    }
}

/// Simulates a manifest, taking φ/υ from the flags or the manifest itself.
pub fn simulate(model: &OdeModel, phi: Option<u32>, upsilon: Option<u32>) -> Result<upsilon_core::TrialDataset> {
    let phi = phi.or(model.phi).ok_or_else(|| Error::MissingValue("no φ in flags or manifest".into()))?;
    let upsilon = upsilon.or(model.upsilon).ok_or_else(|| Error::MissingValue("no υ in flags or manifest".into()))?;
    model.to_trial(phi, upsilon)
}

/// Executes one subcommand and returns what goes to stdout.
pub fn run(cli: Cli) -> Result<String> {
    let json = cli.json;
    let root = cli.project.as_path();
    match cli.command {
        Command::Init => {
            let p = Project::init(root)?;
            emit(json, &p.catalog_view(), |_| format!("initialized {}\n", root.display()))
        }
        Command::AddPhenomenon { file } => {
            let decl = parse_phenomenon(&read(&file)?)?;
            let out = Project::open(root)?.add_phenomenon(decl)?;
            emit(json, &out, render::phenomenon)
        }
        Command::AddHypothesis { descriptor, targets } => {
            let rep = Project::open(root)?.add_hypothesis(&read(&descriptor)?, &targets)?;
            emit(json, &rep, render::hypothesis)
        }
        Command::AddTarget { phi, upsilon } => {
            let pair = Project::open(root)?.add_target(phi, upsilon)?;
            emit(json, &pair, |(p, u)| format!("υ={u} targets φ={p}\n"))
        }
        Command::LoadTrial { csv, phi, upsilon } => {
            let d = parse_trial_csv(&read_text(&csv)?, phi, upsilon)?;
            let r = Project::open(root)?.load_trial(&d)?;
            emit(json, &r, render::receipt)
        }
        Command::Sim { model, phi, upsilon, out, load } => {
            let m = OdeModel::from_json(&read_text(&model)?)?;
            let d = simulate(&m, phi, upsilon)?;
            if let Some(path) = &out {
                std::fs::write(path, write_trial_csv(&d)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            }
            if load {
                let r = Project::open(root)?.load_trial(&d)?;
                return emit(json, &r, render::receipt);
            }
            match out {
                Some(path) => emit(json, &d, |_| format!("wrote {}\n", path.display())),
                None => emit(json, &d, write_trial_csv),
            }
        }
        Command::UIntro { phi } => {
            let r = Project::open(root)?.u_intro(phi)?;
            emit(json, &r, render::u_intro)
        }
        Command::Query { relation, predicate } => {
            let sel = Project::open(root)?.query(&relation, &predicate)?;
            emit(json, &sel, render::selection)
        }
        Command::Conf { relation } => {
            let c = Project::open(root)?.conf(&relation)?;
            emit(json, &c, render::conf)
        }
        Command::Condition { phi, obs, sigma, at, no_writeback } => {
            let observations = parse_observations(&read_text(&obs)?)?;
            let req = ConditionRequest { phi, observations, sigma, at, writeback: !no_writeback };
            let rep = Project::open(root)?.condition(&req)?;
            emit(json, &rep, |r| r.to_table())
        }
        Command::Predictions { phi } => {
            let ws = Project::open(root)?.predictions(phi)?;
            emit(json, &ws, |w| render::predictions(w))
        }
        Command::WorldTable => {
            let rows = Project::open(root)?.world_table();
            emit(json, &rows, |r| render::world_table(r))
        }
        Command::Catalog => {
            let v = Project::open(root)?.catalog_view();
            emit(json, &v, render::catalog)
        }
        Command::Serve { port, host } => {
            let project = Project::open(root)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::http::serve(project, &host, port))?;
            Ok(String::new())
        }
    }
}
