//! Core engine: turns equation-based hypotheses into certain and uncertain
//! relational data and ranks them against observations.

pub mod causal;
pub mod conditioning;
pub mod error;
pub mod ingest;
pub mod symbols;
pub mod synthesis;
pub mod project;
pub mod relstore;
pub mod simkit;
pub mod uncertain;
#[cfg(test)]
mod testkit;

pub use causal::{encode_fds, total_causal_mapping, CausalMapping, Fd, FdSet};
pub use error::{Error, ErrorKind, Result};
pub use ingest::{
    parse_descriptor, parse_observations, parse_phenomenon, validate_structure, Equation, Expr, ObservationTable, PhenomenonDecl, Role,
    Structure, ValidityReport, VariableDecl,
};
pub use synthesis::{attribute_closure, fold_fds, synthesize_4c, RelationDef, SchemaCatalog};
pub use relstore::{parse_trial_csv, write_trial_csv, Catalog, HypothesisEntry, Row, SeriesPoint, Store, Table, TrialDataset, Value, H0};
pub use uncertain::{conf, dnf_probability, repair_key, u_factorize, u_propagate, world_prob, Cluster, Condition, RandomVar, Scope, UDatabase, URelation, UTuple, World, WorldTable};
pub use conditioning::{condition_and_writeback, likelihood, log_likelihood, posterior, ranked_predictions, sample_std, ObservationSet, PosteriorReport, ReportRow, WorldPosterior};
pub use simkit::{rk4_step, ModelKind, OdeModel, TimeGrid};
pub use project::{CatalogView, ConditionRequest, ConfReport, HypothesisReport, Project, Stage, TrialReceipt};
