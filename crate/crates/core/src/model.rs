//! Datasets, group structures and base-learner construction.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::family::Family;
use crate::ridge::{effective_df, solve_lambda, DesignBlock};

/// Column-wise affine transform applied during loading: `(x − mean) / sd`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
}

/// One column of an input table before encoding.
#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl RawColumn {
    /// Classifies text cells: all numeric gives a numeric column, none
    /// numeric gives a categorical one, a mix is an error.
    pub fn from_cells<S: AsRef<str>>(name: &str, cells: &[S]) -> Result<Self> {
        let parsed: Vec<Option<f64>> = cells
            .iter()
            .map(|c| {
                c.as_ref()
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
            })
            .collect();
        let missing = |c: &str| {
            let c = c.trim();
            c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan")
        };
        if let Some(row) = cells.iter().position(|c| missing(c.as_ref())) {
            return Err(Error::NonNumericColumn {
                column: name.to_string(),
                row,
            });
        }
        let numeric = parsed.iter().filter(|p| p.is_some()).count();
        if numeric == cells.len() {
            Ok(RawColumn::Numeric(parsed.into_iter().flatten().collect()))
        } else if numeric == 0 {
            Ok(RawColumn::Categorical(
                cells
                    .iter()
                    .map(|c| c.as_ref().trim().to_string())
                    .collect(),
            ))
        } else {
            let row = parsed.iter().position(|p| p.is_none()).unwrap_or(0);
            Err(Error::NonNumericColumn {
                column: name.to_string(),
                row,
            })
        }
    }

    pub fn len(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.len(),
            RawColumn::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A named collection of equally long raw columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataTable {
    pub names: Vec<String>,
    pub columns: Vec<RawColumn>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    pub family: Family,
    pub standardize: bool,
    /// Only honored for Gaussian outcomes.
    pub standardize_outcome: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            family: Family::Gaussian,
            standardize: true,
            standardize_outcome: false,
        }
    }
}

/// Design matrix, outcome and naming/standardization metadata.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<f64>,
    column_names: Vec<String>,
    sources: Vec<String>,
    standardization: Vec<Option<Standardization>>,
    outcome_name: String,
    outcome_standardization: Option<Standardization>,
    outcome_levels: Option<[String; 2]>,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, libm::sqrt(ss / (n - 1) as f64))
}

fn constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

impl Dataset {
    /// Wraps an already encoded design; columns are left as given.
    pub fn new(x: DMatrix<f64>, y: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if column_names.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                found: column_names.len(),
            });
        }
        let p = x.ncols();
        Ok(Self {
            x,
            y,
            sources: column_names.clone(),
            column_names,
            standardization: alloc::vec![None; p],
            outcome_name: String::from("y"),
            outcome_standardization: None,
            outcome_levels: None,
        })
    }

    /// Encodes a raw table: the outcome is pulled out, categorical
    /// predictors become one indicator per level (levels sorted, none
    /// dropped), and predictors are standardized on request.
    pub fn from_table(table: &DataTable, outcome_name: &str, opts: LoadOptions) -> Result<Self> {
        let outcome_pos = table
            .names
            .iter()
            .position(|n| n == outcome_name)
            .ok_or_else(|| Error::MissingOutcome(outcome_name.to_string()))?;
        let n = table.columns[outcome_pos].len();
        for c in &table.columns {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: c.len(),
                });
            }
        }

        let mut outcome_levels = None;
        let y: Vec<f64> = match (&table.columns[outcome_pos], opts.family) {
            (RawColumn::Numeric(v), Family::Gaussian) => v.clone(),
            (RawColumn::Categorical(_), Family::Gaussian) => {
                return Err(Error::NonNumericColumn {
                    column: outcome_name.to_string(),
                    row: 0,
                })
            }
            (RawColumn::Numeric(v), Family::Binomial) => {
                let mut levels: Vec<f64> = v.clone();
                levels.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
                levels.dedup();
                if levels.len() != 2 {
                    return Err(Error::NotBinary(levels.len()));
                }
                outcome_levels = Some([format!("{}", levels[0]), format!("{}", levels[1])]);
                v.iter()
                    .map(|&val| if val == levels[1] { 1.0 } else { -1.0 })
                    .collect()
            }
            (RawColumn::Categorical(v), Family::Binomial) => {
                let levels: BTreeSet<&String> = v.iter().collect();
                if levels.len() != 2 {
                    return Err(Error::NotBinary(levels.len()));
                }
                let levels: Vec<&String> = levels.into_iter().collect();
                outcome_levels = Some([levels[0].clone(), levels[1].clone()]);
                v.iter()
                    .map(|val| if val == levels[1] { 1.0 } else { -1.0 })
                    .collect()
            }
        };

        let mut names = Vec::new();
        let mut sources = Vec::new();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for (idx, (name, col)) in table.names.iter().zip(&table.columns).enumerate() {
            if idx == outcome_pos {
                continue;
            }
            match col {
                RawColumn::Numeric(v) => {
                    names.push(name.clone());
                    sources.push(name.clone());
                    cols.push(v.clone());
                }
                RawColumn::Categorical(v) => {
                    let levels: BTreeSet<&String> = v.iter().collect();
                    for level in levels {
                        names.push(format!("{name}_{level}"));
                        sources.push(name.clone());
                        cols.push(
                            v.iter()
                                .map(|c| if c == level { 1.0 } else { 0.0 })
                                .collect(),
                        );
                    }
                }
            }
        }
        for (name, col) in names.iter().zip(&cols) {
            if constant(col) {
                return Err(Error::ConstantColumn(name.clone()));
            }
        }
        let p = cols.len();
        let x = DMatrix::from_fn(n, p, |i, j| cols[j][i]);
        let mut ds = Self {
            x,
            y,
            column_names: names,
            sources,
            standardization: alloc::vec![None; p],
            outcome_name: outcome_name.to_string(),
            outcome_standardization: None,
            outcome_levels,
        };
        if opts.standardize {
            ds.standardize_columns()?;
        }
        if opts.standardize_outcome && opts.family == Family::Gaussian {
            ds.standardize_outcome()?;
        }
        Ok(ds)
    }

    /// Centers and scales every predictor column to mean 0 and sd 1.
    /// Already standardized columns compose with their previous transform.
    pub fn standardize_columns(&mut self) -> Result<()> {
        for j in 0..self.x.ncols() {
            let (mean, sd) = mean_sd(self.x.column(j).iter().copied());
            if sd.is_nan() || sd <= 0.0 {
                return Err(Error::ConstantColumn(self.column_names[j].clone()));
            }
            for v in self.x.column_mut(j).iter_mut() {
                *v = (*v - mean) / sd;
            }
            self.standardization[j] = Some(match self.standardization[j] {
                None => Standardization { mean, sd },
                Some(prev) => Standardization {
                    mean: prev.mean + prev.sd * mean,
                    sd: prev.sd * sd,
                },
            });
        }
        Ok(())
    }

    pub fn standardize_outcome(&mut self) -> Result<()> {
        let (mean, sd) = mean_sd(self.y.iter().copied());
        if sd.is_nan() || sd <= 0.0 {
            return Err(Error::ConstantColumn(self.outcome_name.clone()));
        }
        for v in &mut self.y {
            *v = (*v - mean) / sd;
        }
        self.outcome_standardization = Some(Standardization { mean, sd });
        Ok(())
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Original variable name of every design column.
    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn standardization(&self) -> &[Option<Standardization>] {
        &self.standardization
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    pub fn outcome_standardization(&self) -> Option<Standardization> {
        self.outcome_standardization
    }

    pub fn outcome_levels(&self) -> Option<&[String; 2]> {
        self.outcome_levels.as_ref()
    }

    pub fn set_outcome_name(&mut self, name: &str) {
        self.outcome_name = name.to_string();
    }

    /// Replaces the outcome, keeping the design.
    pub fn with_outcome(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.nrows(),
                found: y.len(),
            });
        }
        let mut out = self.clone();
        out.y = y;
        Ok(out)
    }

    /// Rows `indices` (repeats allowed) with the metadata unchanged.
    pub fn subset_rows(&self, indices: &[usize]) -> Self {
        let x = DMatrix::from_fn(indices.len(), self.ncols(), |i, j| self.x[(indices[i], j)]);
        let y = indices.iter().map(|&i| self.y[i]).collect();
        Self {
            x,
            y,
            column_names: self.column_names.clone(),
            sources: self.sources.clone(),
            standardization: self.standardization.clone(),
            outcome_name: self.outcome_name.clone(),
            outcome_standardization: self.outcome_standardization,
            outcome_levels: self.outcome_levels.clone(),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }
}

/// A named, non-overlapping set of design columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub name: String,
    pub columns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupStructure {
    assignments: Vec<(String, String)>,
    groups: Vec<Group>,
}

impl GroupStructure {
    /// Resolves `(variable, group)` pairs against the dataset. A variable
    /// may name a design column or a categorical source variable, which
    /// pulls in all of its indicator columns. Groups keep the order of
    /// their first appearance.
    pub fn from_assignments<S: AsRef<str>>(ds: &Dataset, pairs: &[(S, S)]) -> Result<Self> {
        let mut groups: Vec<Group> = Vec::new();
        let mut owner: Vec<Option<usize>> = alloc::vec![None; ds.ncols()];
        let mut assignments = Vec::with_capacity(pairs.len());
        for (var, group) in pairs {
            let (var, group) = (var.as_ref(), group.as_ref());
            let cols: Vec<usize> = match ds.column_index(var) {
                Some(j) => alloc::vec![j],
                None => ds
                    .sources()
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.as_str() == var)
                    .map(|(j, _)| j)
                    .collect(),
            };
            if cols.is_empty() {
                return Err(Error::UnknownVariable(var.to_string()));
            }
            let g = match groups.iter().position(|g| g.name == group) {
                Some(g) => g,
                None => {
                    groups.push(Group {
                        name: group.to_string(),
                        columns: Vec::new(),
                    });
                    groups.len() - 1
                }
            };
            for j in cols {
                if owner[j].is_some() {
                    return Err(Error::OverlappingGroups(var.to_string()));
                }
                owner[j] = Some(g);
                groups[g].columns.push(j);
            }
            assignments.push((var.to_string(), group.to_string()));
        }
        for g in &mut groups {
            g.columns.sort_unstable();
        }
        Ok(Self {
            assignments,
            groups,
        })
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn assignments(&self) -> &[(String, String)] {
        &self.assignments
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LearnerKind {
    Individual,
    Group,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Individual => "individual",
            LearnerKind::Group => "group",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "individual" => Some(LearnerKind::Individual),
            "group" => Some(LearnerKind::Group),
            _ => None,
        }
    }
}

/// Registry entry of a base-learner, without the design data.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerInfo {
    /// 1-based; individual learners come first.
    pub id: usize,
    pub kind: LearnerKind,
    pub columns: Vec<usize>,
    pub target_df: f64,
    pub lambda: f64,
    pub label: String,
    pub predictor: String,
}

/// A ridge base-learner on a fixed column set with a fixed penalty.
#[derive(Debug, Clone)]
pub struct BaseLearner {
    info: LearnerInfo,
    block: DesignBlock,
}

impl BaseLearner {
    /// Learner whose penalty is solved from a target effective df.
    pub fn with_df(
        id: usize,
        kind: LearnerKind,
        label: String,
        predictor: String,
        block: DesignBlock,
        target_df: f64,
    ) -> Result<Self> {
        let lambda = solve_lambda(&block, target_df).map_err(|e| relabel(e, &label))?;
        Ok(Self {
            info: LearnerInfo {
                id,
                kind,
                columns: block.columns().to_vec(),
                target_df,
                lambda,
                label,
                predictor,
            },
            block,
        })
    }

    /// Learner with a fixed penalty; its df is whatever `λ` implies.
    pub fn with_lambda(
        id: usize,
        kind: LearnerKind,
        label: String,
        predictor: String,
        block: DesignBlock,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "invalid ridge penalty {lambda}"
            )));
        }
        if lambda == 0.0 && !block.has_full_column_rank() {
            return Err(Error::SingularBlock);
        }
        let target_df = effective_df(&block, lambda);
        Ok(Self {
            info: LearnerInfo {
                id,
                kind,
                columns: block.columns().to_vec(),
                target_df,
                lambda,
                label,
                predictor,
            },
            block,
        })
    }

    pub fn set_df(&mut self, target_df: f64) -> Result<()> {
        self.info.lambda =
            solve_lambda(&self.block, target_df).map_err(|e| relabel(e, &self.info.label))?;
        self.info.target_df = target_df;
        Ok(())
    }

    pub fn set_lambda(&mut self, lambda: f64) {
        self.info.lambda = lambda;
        self.info.target_df = effective_df(&self.block, lambda);
    }

    pub fn info(&self) -> &LearnerInfo {
        &self.info
    }

    pub fn id(&self) -> usize {
        self.info.id
    }

    pub fn kind(&self) -> LearnerKind {
        self.info.kind
    }

    pub fn columns(&self) -> &[usize] {
        &self.info.columns
    }

    pub fn target_df(&self) -> f64 {
        self.info.target_df
    }

    pub fn lambda(&self) -> f64 {
        self.info.lambda
    }

    pub fn label(&self) -> &str {
        &self.info.label
    }

    pub fn block(&self) -> &DesignBlock {
        &self.block
    }

    pub fn rank(&self) -> usize {
        self.block.rank()
    }
}

fn relabel(e: Error, label: &str) -> Error {
    match e {
        Error::InfeasibleDf { target, rank, .. } => Error::InfeasibleDf {
            learner: label.to_string(),
            target,
            rank,
        },
        other => other,
    }
}

fn join_names(ds: &Dataset, columns: &[usize]) -> String {
    let names: Vec<&str> = columns
        .iter()
        .map(|&j| ds.column_names()[j].as_str())
        .collect();
    names.join(", ")
}

/// Penalty rule for a family of learners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Df(f64),
    Lambda(f64),
}

fn make_learner(
    id: usize,
    kind: LearnerKind,
    label: String,
    predictor: String,
    block: DesignBlock,
    penalty: Penalty,
) -> Result<BaseLearner> {
    match penalty {
        Penalty::Df(df) => BaseLearner::with_df(id, kind, label, predictor, block, df),
        Penalty::Lambda(l) => BaseLearner::with_lambda(id, kind, label, predictor, block, l),
    }
}

/// Individual learners on every column (df `alpha`) followed by one
/// learner per group (df `1 − alpha`). A side whose df would be zero is
/// left out.
pub fn build_base_learners(
    ds: &Dataset,
    gs: &GroupStructure,
    alpha: f64,
) -> Result<Vec<BaseLearner>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let mut learners = Vec::new();
    if alpha > 0.0 {
        learners.extend(individual_learners(ds, Penalty::Df(alpha), 1)?);
    }
    if alpha < 1.0 {
        let first = learners.len() + 1;
        learners.extend(group_learners(ds, gs, Penalty::Df(1.0 - alpha), first)?);
    }
    Ok(learners)
}

/// One learner per design column, ids starting at `first_id`.
pub fn individual_learners(
    ds: &Dataset,
    penalty: Penalty,
    first_id: usize,
) -> Result<Vec<BaseLearner>> {
    (0..ds.ncols())
        .map(|j| {
            let block = DesignBlock::new(ds.x(), alloc::vec![j])?;
            let name = ds.column_names()[j].clone();
            make_learner(
                first_id + j,
                LearnerKind::Individual,
                name.clone(),
                name,
                block,
                penalty,
            )
        })
        .collect()
}

/// One learner per group, ids starting at `first_id`.
pub fn group_learners(
    ds: &Dataset,
    gs: &GroupStructure,
    penalty: Penalty,
    first_id: usize,
) -> Result<Vec<BaseLearner>> {
    gs.groups()
        .iter()
        .enumerate()
        .map(|(g, group)| {
            let block = DesignBlock::new(ds.x(), group.columns.clone())?;
            make_learner(
                first_id + g,
                LearnerKind::Group,
                format!("group {}", group.name),
                join_names(ds, &group.columns),
                block,
                penalty,
            )
        })
        .collect()
}
