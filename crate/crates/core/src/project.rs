//! A persistent project directory tying the pipeline stages together.
//!
//! Layout under the root: `catalog.json`, `relations/*.csv` for the certain
//! store, and `uncertain.json`, `world.csv`, `urelations/*.csv`, `archive/`
//! for the uncertain half.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::causal::{encode_fds, total_causal_mapping, CausalWarning, FdSet};
use crate::conditioning::{
    condition_and_writeback, ranked_predictions, sample_std, world_probabilities, ObservationSet, PosteriorReport,
    WorldPosterior,
};
use crate::error::{Error, Result};
use crate::ingest::{parse_descriptor, validate_structure, ObservationTable, PhenomenonDecl, Role};
use crate::relstore::{write_atomic, Catalog, HypothesisEntry, Selection, Store, TrialDataset};
use crate::synthesis::{fold_fds, synthesize_4c, RelationDef, SynthesisWarning};
use crate::uncertain::{conf, Scope, UDatabase, UIntroReport, WorldEntry};

pub const CATALOG_FILE: &str = "catalog.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Deployed,
    Loaded,
    UIntroduced,
    Conditioned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetStage {
    pub phi: u32,
    pub upsilon: u32,
    pub trials: usize,
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSummary {
    pub upsilon: u32,
    pub name: String,
    pub relations: Vec<String>,
}

/// What `GET /catalog` and `catalog` return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogView {
    pub phenomena: Vec<PhenomenonDecl>,
    pub hypotheses: Vec<HypothesisSummary>,
    pub h0: Vec<(u32, u32)>,
    pub stages: Vec<TargetStage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub upsilon: u32,
    pub name: String,
    pub sigma: Vec<String>,
    pub folded: Vec<String>,
    pub relations: Vec<RelationDef>,
    pub targets: Vec<u32>,
    pub causal_warnings: Vec<CausalWarning>,
    pub synthesis_warnings: Vec<SynthesisWarning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialReceipt {
    pub phi: u32,
    pub upsilon: u32,
    pub tid: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfRow {
    pub values: Vec<crate::relstore::Value>,
    pub conf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfReport {
    pub relation: String,
    pub attributes: Vec<String>,
    pub rows: Vec<ConfRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRequest {
    pub phi: u32,
    pub observations: ObservationTable,
    /// Defaults to the sample standard deviation of the observed values.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub at: Option<f64>,
    #[serde(default = "yes")]
    pub writeback: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct PersistedCatalog {
    catalog: Catalog,
    relations: Vec<RelationDef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    root: PathBuf,
    pub catalog: Catalog,
    pub store: Store,
    pub udb: UDatabase,
}

fn fd_lines(s: &FdSet) -> Vec<String> {
    s.fds.iter().map(|f| f.to_string()).collect()
}

impl Project {
    pub fn init(root: &Path) -> Result<Project> {
        if root.join(CATALOG_FILE).exists() {
            return Err(Error::ProjectExists(root.display().to_string()));
        }
        std::fs::create_dir_all(root)?;
        let p = Project { root: root.to_path_buf(), catalog: Catalog::default(), store: Store::new(), udb: UDatabase::default() };
        p.save()?;
        Ok(p)
    }

    pub fn open(root: &Path) -> Result<Project> {
        let path = root.join(CATALOG_FILE);
        if !path.exists() {
            return Err(Error::NoProject(format!("{} has no {CATALOG_FILE}; run init first", root.display())));
        }
        let text = std::fs::read_to_string(&path)?;
        let pc: PersistedCatalog =
            serde_json::from_str(&text).map_err(|e| Error::CorruptProject(format!("{CATALOG_FILE}: {e}")))?;
        Ok(Project {
            root: root.to_path_buf(),
            store: Store::load(root, &pc.relations)?,
            udb: UDatabase::load(root)?,
            catalog: pc.catalog,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn save(&self) -> Result<()> {
        let pc = PersistedCatalog { catalog: self.catalog.clone(), relations: self.store.definitions() };
        let json = serde_json::to_string_pretty(&pc).map_err(|e| Error::Io(e.to_string()))?;
        self.store.save(&self.root)?;
        self.udb.save(&self.root)?;
        write_atomic(&self.root.join(CATALOG_FILE), json.as_bytes())
    }

    /// Runs `f` on a copy and keeps the result only if `f` and the save succeed.
    fn commit<T>(&mut self, f: impl FnOnce(&mut Project) -> Result<T>) -> Result<T> {
        let mut next = self.clone();
        let out = f(&mut next)?;
        next.save()?;
        *self = next;
        Ok(out)
    }

    pub fn add_phenomenon(&mut self, decl: PhenomenonDecl) -> Result<PhenomenonDecl> {
        if self.catalog.phenomenon(decl.id).is_ok() {
            return Err(Error::DuplicatePhenomenon(format!("φ={}", decl.id)));
        }
        self.commit(|p| {
            p.catalog.phenomena.push(decl.clone());
            p.catalog.phenomena.sort_by_key(|d| d.id);
            Ok(decl)
        })
    }

    /// parse → validate → causal mapping → encode → fold → synthesize → deploy.
    pub fn add_hypothesis(&mut self, descriptor: &[u8], targets: &[u32]) -> Result<HypothesisReport> {
        let s = parse_descriptor(descriptor)?;
        let upsilon = s.hypothesis_id;
        if self.catalog.hypothesis(upsilon).is_ok() {
            return Err(Error::DuplicateHypothesis(format!("υ={upsilon}")));
        }
        let validity = validate_structure(&s);
        if !validity.valid {
            let detail = serde_json::to_string(&validity.violations).unwrap_or_default();
            return Err(Error::InvalidStructure(format!("υ={upsilon}: {detail}")));
        }
        let mapping = total_causal_mapping(&s)?;
        let primitive = encode_fds(&s, &mapping)?;
        let folded = fold_fds(&primitive);
        let index: BTreeSet<String> = s.symbols_with(Role::Index).into_iter().collect();
        let mut schema = synthesize_4c(&folded, upsilon, &index)?;
        schema.primitive = primitive.clone();
        for phi in targets {
            self.check_target(*phi, None)?;
        }
        let report = HypothesisReport {
            upsilon,
            name: s.name.clone(),
            sigma: fd_lines(&primitive),
            folded: fd_lines(&folded),
            relations: schema.relations.clone(),
            targets: targets.to_vec(),
            causal_warnings: mapping.warnings.clone(),
            synthesis_warnings: schema.warnings.clone(),
        };
        self.commit(|p| {
            p.store.deploy_schema(&schema)?;
            p.catalog.hypotheses.push(HypothesisEntry { upsilon, name: s.name.clone(), structure: s, mapping, schema });
            p.catalog.hypotheses.sort_by_key(|h| h.upsilon);
            for phi in targets {
                p.link(*phi, upsilon)?;
            }
            Ok(report)
        })
    }

    fn check_target(&self, phi: u32, upsilon: Option<u32>) -> Result<()> {
        self.catalog.phenomenon(phi)?;
        if let Some(u) = upsilon {
            self.catalog.hypothesis(u)?;
        }
        if self.udb.is_introduced(phi) {
            return Err(Error::StageViolation(format!("φ={phi} is already u-introduced; its targets are fixed")));
        }
        Ok(())
    }

    fn link(&mut self, phi: u32, upsilon: u32) -> Result<()> {
        self.store.register_target(phi, upsilon)?;
        self.catalog.h0.push((phi, upsilon));
        self.catalog.h0.sort_unstable();
        Ok(())
    }

    pub fn add_target(&mut self, phi: u32, upsilon: u32) -> Result<(u32, u32)> {
        self.check_target(phi, Some(upsilon))?;
        self.commit(|p| {
            p.link(phi, upsilon)?;
            Ok((phi, upsilon))
        })
    }

    pub fn load_trial(&mut self, d: &TrialDataset) -> Result<TrialReceipt> {
        self.catalog.phenomenon(d.phi)?;
        self.catalog.hypothesis(d.upsilon)?;
        if !self.catalog.h0.contains(&(d.phi, d.upsilon)) {
            return Err(Error::StageViolation(format!("υ={} does not target φ={}", d.upsilon, d.phi)));
        }
        if self.udb.is_introduced(d.phi) {
            return Err(Error::StageViolation(format!("φ={} is already u-introduced; no more trials", d.phi)));
        }
        self.commit(|p| {
            let hyp = p.catalog.hypothesis(d.upsilon)?.clone();
            let tid = p.store.load_trial(&hyp, d)?;
            Ok(TrialReceipt { phi: d.phi, upsilon: d.upsilon, tid })
        })
    }

    pub fn u_intro(&mut self, phi: u32) -> Result<UIntroReport> {
        self.catalog.phenomenon(phi)?;
        if self.catalog.targets_of(phi).is_empty() {
            return Err(Error::StageViolation(format!("φ={phi} has no target hypotheses")));
        }
        self.commit(|p| p.udb.u_intro(&p.catalog, &p.store, phi))
    }

    pub fn query(&self, relation: &str, predicate: &[(String, String)]) -> Result<Selection> {
        let rows = self.store.select_certain(relation, predicate)?;
        let attributes = self.store.table(relation)?.def.attributes.clone();
        Ok(Selection { relation: relation.to_string(), attributes, rows })
    }

    /// Distinct tuples of a U-relation with their exact confidence.
    pub fn conf(&self, relation: &str) -> Result<ConfReport> {
        let r = self.udb.urelation(relation)?;
        let rows = conf(&r.tuples, &self.udb.world)?
            .into_iter()
            .map(|c| ConfRow { values: c.values, conf: c.conf })
            .collect();
        Ok(ConfReport { relation: relation.to_string(), attributes: r.data_attributes.clone(), rows })
    }

    fn observation_set(&self, req: &ConditionRequest) -> Result<ObservationSet> {
        self.catalog.phenomenon(req.phi)?;
        let sigma = match req.sigma {
            Some(s) => s,
            None => {
                let ys: Vec<f64> = req.observations.samples.iter().map(|(_, y)| *y).collect();
                if ys.is_empty() {
                    return Err(Error::EmptyObservationSet(format!("no samples for φ={}", req.phi)));
                }
                sample_std(&ys).ok_or_else(|| Error::NonPositiveSigma("cannot default σ from these samples".into()))?
            }
        };
        ObservationSet::new(req.phi, req.observations.clone(), sigma)
    }

    pub fn condition(&mut self, req: &ConditionRequest) -> Result<PosteriorReport> {
        let obs = self.observation_set(req)?;
        if !req.writeback {
            return ranked_predictions(&self.catalog, &self.store, &self.udb, &obs, req.at);
        }
        self.commit(|p| condition_and_writeback(&p.catalog, &p.store, &mut p.udb, &obs, req.at))
    }

    pub fn predictions(&self, phi: u32) -> Result<Vec<WorldPosterior>> {
        self.catalog.phenomenon(phi)?;
        world_probabilities(&self.udb, phi)
    }

    pub fn world_table(&self) -> Vec<WorldEntry> {
        self.udb.world.rows()
    }

    pub fn stage(&self, phi: u32, upsilon: u32) -> Option<TargetStage> {
        if !self.catalog.h0.contains(&(phi, upsilon)) {
            return None;
        }
        let trials = self.catalog.hypothesis(upsilon).map(|h| self.store.tids(h, phi).len()).unwrap_or(0);
        let conditioned = self.udb.variables.values().any(|v| v.scope == Scope::Posterior { phi });
        let stage = if conditioned {
            Stage::Conditioned
        } else if self.udb.is_introduced(phi) {
            Stage::UIntroduced
        } else if trials > 0 {
            Stage::Loaded
        } else {
            Stage::Deployed
        };
        Some(TargetStage { phi, upsilon, trials, stage })
    }

    pub fn catalog_view(&self) -> CatalogView {
        CatalogView {
            phenomena: self.catalog.phenomena.clone(),
            hypotheses: self
                .catalog
                .hypotheses
                .iter()
                .map(|h| HypothesisSummary {
                    upsilon: h.upsilon,
                    name: h.name.clone(),
                    relations: h.schema.relations.iter().map(|r| r.name.clone()).collect(),
                })
                .collect(),
            h0: self.catalog.h0.clone(),
            stages: self.catalog.h0.iter().filter_map(|(p, u)| self.stage(*p, *u)).collect(),
        }
    }
}
