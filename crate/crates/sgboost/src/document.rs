//! The JSON model document.
//!
//! Floats are written in shortest round-trip form, so reading a document
//! back gives bit-identical coefficients, increments and losses.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sgboost_core::boost::{BoostConfig, BoostModel, TraceRecord};
use sgboost_core::family::Family;
use sgboost_core::model::{Dataset, LearnerInfo, LearnerKind, Standardization};

use crate::error::CliError;

pub const FORMAT: &str = "sgboost-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleDoc {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigDoc {
    pub mstop: usize,
    pub nu: f64,
    pub family: String,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDoc {
    pub name: String,
    pub standardization: Option<ScaleDoc>,
    /// Binomial levels coded −1 and +1, in that order.
    pub levels: Option<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDoc {
    pub name: String,
    pub source: String,
    pub standardization: Option<ScaleDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerDoc {
    pub id: usize,
    pub kind: String,
    pub label: String,
    pub predictor: String,
    pub columns: Vec<usize>,
    pub target_df: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDoc {
    pub iteration: usize,
    pub learner: usize,
    pub increment: Vec<f64>,
    pub loss_before: f64,
    pub loss_after: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_rss: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub format: String,
    pub version: u32,
    pub config: ConfigDoc,
    pub outcome: OutcomeDoc,
    pub columns: Vec<ColumnDoc>,
    pub learners: Vec<LearnerDoc>,
    pub offset: f64,
    pub initial_loss: f64,
    pub trace: Vec<TraceDoc>,
    pub coefficients: Vec<f64>,
    pub fitted: Option<Vec<f64>>,
}

fn scale(s: Option<Standardization>) -> Option<ScaleDoc> {
    s.map(|s| ScaleDoc {
        mean: s.mean,
        sd: s.sd,
    })
}

impl ModelDoc {
    pub fn new(model: &BoostModel, ds: &Dataset, alpha: Option<f64>) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            config: ConfigDoc {
                mstop: model.config.mstop,
                nu: model.config.nu,
                family: model.config.family.name().into(),
                alpha,
            },
            outcome: OutcomeDoc {
                name: ds.outcome_name().into(),
                standardization: scale(ds.outcome_standardization()),
                levels: ds.outcome_levels().cloned(),
            },
            columns: (0..ds.ncols())
                .map(|j| ColumnDoc {
                    name: ds.column_names()[j].clone(),
                    source: ds.sources()[j].clone(),
                    standardization: scale(ds.standardization()[j]),
                })
                .collect(),
            learners: model
                .learners
                .iter()
                .map(|l| LearnerDoc {
                    id: l.id,
                    kind: l.kind.name().into(),
                    label: l.label.clone(),
                    predictor: l.predictor.clone(),
                    columns: l.columns.clone(),
                    target_df: l.target_df,
                    lambda: l.lambda,
                })
                .collect(),
            offset: model.offset,
            initial_loss: model.initial_loss,
            trace: model
                .trace
                .iter()
                .map(|r| TraceDoc {
                    iteration: r.iteration,
                    learner: r.learner,
                    increment: r.increment.clone(),
                    loss_before: r.loss_before,
                    loss_after: r.loss_after,
                    candidate_rss: r.candidate_rss.clone(),
                })
                .collect(),
            coefficients: model.coefficients.clone(),
            fitted: model.fitted.clone(),
        }
    }

    /// Rebuilds the model, checking the document's internal consistency.
    pub fn to_model(&self) -> Result<BoostModel, CliError> {
        let bad = |msg: String| Err(CliError::validation("corrupt_model", msg));
        if self.format != FORMAT || self.version != VERSION {
            return bad(format!(
                "unsupported document {} version {}",
                self.format, self.version
            ));
        }
        let family = match Family::from_name(&self.config.family) {
            Some(f) => f,
            None => return bad(format!("unknown family {}", self.config.family)),
        };
        let p = self.columns.len();
        if self.coefficients.len() != p {
            return bad(format!(
                "{} coefficients for {p} columns",
                self.coefficients.len()
            ));
        }
        let mut learners = Vec::with_capacity(self.learners.len());
        for (i, l) in self.learners.iter().enumerate() {
            let kind = match LearnerKind::from_name(&l.kind) {
                Some(k) => k,
                None => return bad(format!("unknown learner kind {}", l.kind)),
            };
            if l.id != i + 1 {
                return bad(format!(
                    "learner ids must run 1..L, found {} at {}",
                    l.id,
                    i + 1
                ));
            }
            if l.columns.is_empty() || l.columns.iter().any(|&c| c >= p) {
                return bad(format!("learner {} has invalid columns", l.id));
            }
            learners.push(LearnerInfo {
                id: l.id,
                kind,
                columns: l.columns.clone(),
                target_df: l.target_df,
                lambda: l.lambda,
                label: l.label.clone(),
                predictor: l.predictor.clone(),
            });
        }
        let mut trace = Vec::with_capacity(self.trace.len());
        for (i, r) in self.trace.iter().enumerate() {
            let Some(info) = learners.get(r.learner.wrapping_sub(1)) else {
                return bad(format!(
                    "trace record {} names unknown learner {}",
                    i + 1,
                    r.learner
                ));
            };
            if r.iteration != i + 1 || r.increment.len() != info.columns.len() {
                return bad(format!("trace record {} is malformed", i + 1));
            }
            trace.push(TraceRecord {
                iteration: r.iteration,
                learner: r.learner,
                increment: r.increment.clone(),
                loss_before: r.loss_before,
                loss_after: r.loss_after,
                candidate_rss: r.candidate_rss.clone(),
            });
        }
        if self.config.mstop != trace.len() {
            return bad(format!(
                "mstop {} but {} trace records",
                self.config.mstop,
                trace.len()
            ));
        }
        let mut config = BoostConfig::new(self.config.mstop, self.config.nu, family);
        config.record_candidate_rss = trace.iter().any(|r| r.candidate_rss.is_some());
        let model = BoostModel {
            config,
            learners,
            column_names: self.columns.iter().map(|c| c.name.clone()).collect(),
            offset: self.offset,
            initial_loss: self.initial_loss,
            coefficients: self.coefficients.clone(),
            trace,
            fitted: self.fitted.clone(),
        };
        if model.coefficients_at(model.mstop())? != model.coefficients {
            return bad("coefficients do not match the trace".into());
        }
        Ok(model)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::runtime("serialize", e.to_string()))?;
        text.push('\n');
        crate::io::write_text(path, &text)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::validation("corrupt_model", format!("{}: {e}", path.display())))
    }
}
