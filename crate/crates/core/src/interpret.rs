//! Post-fit summaries: loss-reduction importance, raw and aggregated
//! coefficients, and the aggregated coefficient path.
//!
//! All three are computed from the trace alone. Coefficients are kept per
//! (learner, column) pair and summed over learners in id order, so the
//! aggregate table, the path and truncated models agree bit for bit.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::boost::BoostModel;
use crate::error::{Error, Result};
use crate::model::{LearnerInfo, LearnerKind};

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceRow {
    pub learner_id: usize,
    pub reduction: f64,
    pub learner: String,
    pub predictor: String,
    pub selfreq: f64,
    pub kind: LearnerKind,
    pub relative_importance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceTable {
    /// Selected learners, by decreasing reduction.
    pub rows: Vec<ImportanceRow>,
    pub group_total: f64,
    pub individual_total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawCoefficient {
    pub variable: String,
    pub column: usize,
    pub effect: f64,
    pub learner_id: usize,
    pub learner: String,
    pub predictor: String,
    pub kind: LearnerKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCoefficient {
    pub variable: String,
    pub column: usize,
    pub effect: f64,
    /// Labels of the learners that moved this variable, by id.
    pub learners: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub raw: Vec<RawCoefficient>,
    pub aggregate: Vec<AggregateCoefficient>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRow {
    pub iteration: usize,
    pub variable: String,
    pub column: usize,
    pub value: f64,
    /// Kind of the learner that last changed this variable.
    pub updated_by: LearnerKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathTable {
    /// One row per (iteration, variable touched so far), iteration-major,
    /// columns ascending within an iteration.
    pub rows: Vec<PathRow>,
}

impl PathTable {
    /// Rows of iteration `m`.
    pub fn slice(&self, m: usize) -> &[PathRow] {
        let start = self.rows.partition_point(|r| r.iteration < m);
        let end = self.rows.partition_point(|r| r.iteration <= m);
        &self.rows[start..end]
    }
}

fn require_trace(model: &BoostModel) -> Result<()> {
    if model.trace.is_empty() {
        Err(Error::EmptyModel)
    } else {
        Ok(())
    }
}

fn learner_of(model: &BoostModel, id: usize) -> Result<&LearnerInfo> {
    model.learner(id).ok_or(Error::InvalidColumn(id))
}

fn by_abs_effect(a: f64, b: f64) -> core::cmp::Ordering {
    b.abs().total_cmp(&a.abs())
}

/// Realized in-sample loss reduction per selected learner.
pub fn variable_importance(model: &BoostModel) -> Result<ImportanceTable> {
    require_trace(model)?;
    let mut per: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for rec in &model.trace {
        learner_of(model, rec.learner)?;
        let e = per.entry(rec.learner).or_insert((0.0, 0));
        e.0 += rec.loss_before - rec.loss_after;
        e.1 += 1;
    }
    let mstop = model.trace.len() as f64;
    let total: f64 = per.values().map(|v| v.0).sum();
    let mut rows: Vec<ImportanceRow> = per
        .into_iter()
        .map(|(id, (reduction, count))| {
            let info = &model.learners[id - 1];
            let selfreq = count as f64 / mstop;
            ImportanceRow {
                learner_id: id,
                reduction,
                learner: info.label.clone(),
                predictor: info.predictor.clone(),
                selfreq,
                kind: info.kind,
                // A fit that never moved the loss is ranked by selection share.
                relative_importance: if total != 0.0 {
                    reduction / total
                } else {
                    selfreq
                },
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.reduction
            .total_cmp(&a.reduction)
            .then(a.learner_id.cmp(&b.learner_id))
    });
    let share = |kind| {
        rows.iter()
            .filter(|r| r.kind == kind)
            .fold(0.0, |acc, r| acc + r.relative_importance)
    };
    let group_total = share(LearnerKind::Group);
    let individual_total = share(LearnerKind::Individual);
    Ok(ImportanceTable {
        rows,
        group_total,
        individual_total,
    })
}

/// Per-(learner, column) running sums plus the aggregation rule shared by
/// the coefficient table and the path.
struct Ledger<'a> {
    model: &'a BoostModel,
    /// learner id → per-column effects in the learner's column order.
    effects: BTreeMap<usize, Vec<f64>>,
    /// column → ids of selected learners containing it.
    owners: BTreeMap<usize, Vec<usize>>,
}

impl<'a> Ledger<'a> {
    fn new(model: &'a BoostModel) -> Self {
        Self {
            model,
            effects: BTreeMap::new(),
            owners: BTreeMap::new(),
        }
    }

    fn apply(&mut self, learner: usize, increment: &[f64]) -> Result<&'a LearnerInfo> {
        let info = learner_of(self.model, learner)?;
        let acc = self.effects.entry(learner).or_insert_with(|| {
            for &c in &info.columns {
                let owners = self.owners.entry(c).or_default();
                let pos = owners.partition_point(|&o| o < learner);
                owners.insert(pos, learner);
            }
            vec![0.0; info.columns.len()]
        });
        for (a, &inc) in acc.iter_mut().zip(increment) {
            *a += inc;
        }
        Ok(info)
    }

    fn effect(&self, learner: usize, column: usize) -> f64 {
        let info = &self.model.learners[learner - 1];
        let k = info.columns.iter().position(|&c| c == column).unwrap_or(0);
        self.effects[&learner][k]
    }

    fn aggregate(&self, column: usize) -> f64 {
        let mut total = 0.0;
        for &id in &self.owners[&column] {
            total += self.effect(id, column);
        }
        total
    }
}

/// Raw per-learner effects and their per-variable sums.
pub fn coefficients(model: &BoostModel) -> Result<CoefficientTable> {
    require_trace(model)?;
    let mut ledger = Ledger::new(model);
    for rec in &model.trace {
        ledger.apply(rec.learner, &rec.increment)?;
    }
    let mut raw = Vec::new();
    for (&id, effects) in &ledger.effects {
        let info = &model.learners[id - 1];
        for (&c, &effect) in info.columns.iter().zip(effects) {
            raw.push(RawCoefficient {
                variable: model.column_names[c].clone(),
                column: c,
                effect,
                learner_id: id,
                learner: info.label.clone(),
                predictor: info.predictor.clone(),
                kind: info.kind,
            });
        }
    }
    raw.sort_by(|a, b| {
        by_abs_effect(a.effect, b.effect)
            .then(a.column.cmp(&b.column))
            .then(a.learner_id.cmp(&b.learner_id))
    });
    let mut aggregate: Vec<AggregateCoefficient> = ledger
        .owners
        .iter()
        .map(|(&c, owners)| AggregateCoefficient {
            variable: model.column_names[c].clone(),
            column: c,
            effect: ledger.aggregate(c),
            learners: owners
                .iter()
                .map(|&id| model.learners[id - 1].label.clone())
                .collect(),
        })
        .collect();
    aggregate.sort_by(|a, b| by_abs_effect(a.effect, b.effect).then(a.column.cmp(&b.column)));
    Ok(CoefficientTable { raw, aggregate })
}

/// Aggregated coefficients after every iteration.
pub fn coefficient_path(model: &BoostModel) -> Result<PathTable> {
    require_trace(model)?;
    let mut ledger = Ledger::new(model);
    // column → (current aggregate, kind of last update)
    let mut current: BTreeMap<usize, (f64, LearnerKind)> = BTreeMap::new();
    let mut rows = Vec::new();
    for rec in &model.trace {
        let info = ledger.apply(rec.learner, &rec.increment)?;
        for &c in &info.columns {
            current.insert(c, (ledger.aggregate(c), info.kind));
        }
        for (&c, &(value, kind)) in &current {
            rows.push(PathRow {
                iteration: rec.iteration,
                variable: model.column_names[c].clone(),
                column: c,
                value,
                updated_by: kind,
            });
        }
    }
    Ok(PathTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::{fit, truncate, BoostConfig};
    use crate::family::Family;
    use crate::model::{build_base_learners, Dataset, GroupStructure};
    use alloc::format;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn toy() -> (Dataset, GroupStructure) {
        let x = DMatrix::from_fn(30, 4, |i, j| libm::sin((i * 7 + j * 3) as f64 * 0.37));
        let y: Vec<f64> = (0..30)
            .map(|i| 2.0 * x[(i, 0)] - x[(i, 1)] + 0.5 * x[(i, 3)] + 0.1 * libm::cos(i as f64))
            .collect();
        let names: Vec<String> = (1..=4).map(|j| format!("X{j}")).collect();
        let mut ds = Dataset::new(x, y, names).unwrap();
        ds.standardize_columns().unwrap();
        let gs = GroupStructure::from_assignments(
            &ds,
            &[("X1", "a"), ("X2", "a"), ("X3", "b"), ("X4", "b")],
        )
        .unwrap();
        (ds, gs)
    }

    fn toy_model(mstop: usize) -> BoostModel {
        let (ds, gs) = toy();
        let learners = build_base_learners(&ds, &gs, 0.4).unwrap();
        fit(
            &ds,
            &learners,
            BoostConfig::new(mstop, 0.3, Family::Gaussian),
        )
        .unwrap()
    }

    #[test]
    fn empty_model_rejected() {
        let m = truncate(&toy_model(3), 0).unwrap();
        assert_eq!(variable_importance(&m), Err(Error::EmptyModel));
        assert_eq!(coefficients(&m), Err(Error::EmptyModel));
        assert_eq!(coefficient_path(&m), Err(Error::EmptyModel));
    }

    #[test]
    fn importance_sums() {
        let model = toy_model(40);
        let t = variable_importance(&model).unwrap();
        let rel: f64 = t.rows.iter().map(|r| r.relative_importance).sum();
        assert_relative_eq!(rel, 1.0, epsilon = 1e-10);
        assert_relative_eq!(t.group_total + t.individual_total, 1.0, epsilon = 1e-10);
        let sf: f64 = t.rows.iter().map(|r| r.selfreq).sum();
        assert_relative_eq!(sf, 1.0, epsilon = 1e-12);
        let red: f64 = t.rows.iter().map(|r| r.reduction).sum();
        assert_relative_eq!(red, model.initial_loss - model.final_loss(), epsilon = 1e-8);
        assert!(t.rows.windows(2).all(|w| w[0].reduction >= w[1].reduction));
        assert!(t.rows.iter().all(|r| r.reduction >= 0.0));
    }

    #[test]
    fn aggregate_is_sum_of_raw_and_matches_path() {
        let model = toy_model(40);
        let table = coefficients(&model).unwrap();
        for agg in &table.aggregate {
            let mut owners: Vec<&RawCoefficient> = table
                .raw
                .iter()
                .filter(|r| r.column == agg.column)
                .collect();
            owners.sort_by_key(|r| r.learner_id);
            let mut s = 0.0;
            for r in owners {
                s += r.effect;
            }
            assert_eq!(s, agg.effect);
            assert_relative_eq!(agg.effect, model.coefficients[agg.column], epsilon = 1e-12);
        }
        let path = coefficient_path(&model).unwrap();
        let last = path.slice(40);
        assert_eq!(last.len(), table.aggregate.len());
        for row in last {
            let agg = table
                .aggregate
                .iter()
                .find(|a| a.column == row.column)
                .unwrap();
            assert_eq!(agg.effect, row.value);
        }
    }

    #[test]
    fn first_iteration_path_has_first_learner_only() {
        let model = toy_model(1);
        let path = coefficient_path(&model).unwrap();
        let info = model.learner(model.trace[0].learner).unwrap();
        let cols: Vec<usize> = path.rows.iter().map(|r| r.column).collect();
        assert_eq!(cols, info.columns);
        let imp = variable_importance(&model).unwrap();
        assert_eq!(imp.rows.len(), 1);
        assert_eq!(imp.rows[0].relative_importance, 1.0);
        assert_eq!(imp.rows[0].selfreq, 1.0);
    }

    #[test]
    fn truncated_tables_match_path_slices() {
        let model = toy_model(25);
        let path = coefficient_path(&model).unwrap();
        for m in [1, 4, 9, 17, 25] {
            let agg = coefficients(&truncate(&model, m).unwrap())
                .unwrap()
                .aggregate;
            let slice = path.slice(m);
            assert_eq!(agg.len(), slice.len());
            for row in slice {
                let a = agg.iter().find(|a| a.column == row.column).unwrap();
                assert_eq!(a.effect, row.value);
            }
        }
    }
}
