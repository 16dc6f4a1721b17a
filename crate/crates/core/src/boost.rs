//! Sparse-group component-wise boosting with ridge base-learners.
//!
//! Each iteration fits every base-learner to the current negative gradient,
//! picks the learner with the smallest residual sum of squares and adds a
//! `ν`-damped copy of its coefficients to the model.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::family::Family;
use crate::model::{BaseLearner, Dataset, LearnerInfo};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostConfig {
    pub mstop: usize,
    pub nu: f64,
    pub family: Family,
    /// Keep the rss of every candidate in each trace record.
    pub record_candidate_rss: bool,
}

impl BoostConfig {
    pub fn new(mstop: usize, nu: f64, family: Family) -> Self {
        Self {
            mstop,
            nu,
            family,
            record_candidate_rss: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mstop == 0 {
            return Err(Error::InvalidConfig("mstop must be at least 1".into()));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "nu must lie in (0, 1], got {}",
                self.nu
            )));
        }
        Ok(())
    }
}

/// One boosting iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    /// 1-based id of the selected learner.
    pub learner: usize,
    /// `ν β̄` on the selected learner's columns, in column order.
    pub increment: Vec<f64>,
    pub loss_before: f64,
    pub loss_after: f64,
    pub candidate_rss: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostModel {
    pub config: BoostConfig,
    pub learners: Vec<LearnerInfo>,
    pub column_names: Vec<String>,
    pub offset: f64,
    pub initial_loss: f64,
    /// Full-length coefficient vector after the last trace record.
    pub coefficients: Vec<f64>,
    pub trace: Vec<TraceRecord>,
    /// In-sample linear predictor at the last iteration, when known.
    pub fitted: Option<Vec<f64>>,
}

/// Mutable boosting state: linear predictor and coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostState {
    pub iteration: usize,
    pub f: Vec<f64>,
    pub beta: Vec<f64>,
    pub loss: f64,
}

/// Concatenated left singular vectors of all learners, so that one pass
/// over the gradient gives every candidate's rss.
#[derive(Debug, Clone)]
pub(crate) struct CandidateBank {
    n: usize,
    basis: Vec<f64>,
    spans: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

const PARALLEL_WORK: usize = 1 << 18;
const COLUMN_CHUNK: usize = 64;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl CandidateBank {
    pub(crate) fn new(learners: &[BaseLearner]) -> Result<Self> {
        let first = learners.first().ok_or(Error::NoLearners)?;
        let n = first.block().nrows();
        let total: usize = learners.iter().map(|l| l.rank()).sum();
        let mut basis = Vec::with_capacity(total * n);
        let mut spans = Vec::with_capacity(learners.len());
        for l in learners {
            if l.block().nrows() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: l.block().nrows(),
                });
            }
            let u = l.block().u();
            spans.push((basis.len() / n, u.ncols()));
            basis.extend_from_slice(u.as_slice());
        }
        let mut bank = Self {
            n,
            basis,
            spans,
            weights: vec![0.0; total],
        };
        bank.update_penalties(learners);
        Ok(bank)
    }

    /// Refreshes the per-component rss weights `2a − a²` after penalties change.
    pub(crate) fn update_penalties(&mut self, learners: &[BaseLearner]) {
        for (l, &(start, len)) in learners.iter().zip(&self.spans) {
            let lambda = l.lambda();
            for (k, &d) in l.block().singular_values().iter().enumerate().take(len) {
                let rest = lambda / (d * d + lambda);
                self.weights[start + k] = 1.0 - rest * rest;
            }
        }
    }

    fn project_into(&self, target: &[f64], z: &mut [f64]) {
        let n = self.n;
        let columns = z.len();
        #[cfg(feature = "std")]
        {
            if columns * n >= PARALLEL_WORK {
                use rayon::prelude::*;
                z.par_chunks_mut(COLUMN_CHUNK)
                    .enumerate()
                    .for_each(|(c, out)| {
                        let base = c * COLUMN_CHUNK;
                        for (k, zk) in out.iter_mut().enumerate() {
                            let j = base + k;
                            *zk = dot(&self.basis[j * n..(j + 1) * n], target);
                        }
                    });
                return;
            }
        }
        let _ = (PARALLEL_WORK, COLUMN_CHUNK);
        for (j, zj) in z.iter_mut().enumerate().take(columns) {
            *zj = dot(&self.basis[j * n..(j + 1) * n], target);
        }
    }

    /// Rss of every candidate fitted to `target`, in learner order.
    pub(crate) fn candidate_rss(&self, target: &[f64], z: &mut Vec<f64>) -> Vec<f64> {
        z.resize(self.weights.len(), 0.0);
        self.project_into(target, z);
        let tt = dot(target, target);
        self.spans
            .iter()
            .map(|&(start, len)| {
                let explained: f64 = (start..start + len)
                    .map(|i| self.weights[i] * z[i] * z[i])
                    .sum();
                tt - explained
            })
            .collect()
    }

    /// Index of the learner with minimal rss; ties go to the lowest index.
    pub(crate) fn select(&self, target: &[f64], z: &mut Vec<f64>) -> (usize, Vec<f64>) {
        let rss = self.candidate_rss(target, z);
        let mut best = 0;
        for (i, &r) in rss.iter().enumerate().skip(1) {
            if r < rss[best] {
                best = i;
            }
        }
        (best, rss)
    }
}

/// Boosting driver over a fixed dataset and learner registry.
pub struct Booster<'a> {
    ds: &'a Dataset,
    learners: &'a [BaseLearner],
    config: BoostConfig,
    bank: CandidateBank,
    gradient: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Booster<'a> {
    pub fn new(ds: &'a Dataset, learners: &'a [BaseLearner], config: BoostConfig) -> Result<Self> {
        config.validate()?;
        let bank = CandidateBank::new(learners)?;
        if bank.n != ds.nrows() {
            return Err(Error::DimensionMismatch {
                expected: ds.nrows(),
                found: bank.n,
            });
        }
        for l in learners {
            if let Some(&c) = l.columns().iter().find(|&&c| c >= ds.ncols()) {
                return Err(Error::InvalidColumn(c));
            }
        }
        Ok(Self {
            ds,
            learners,
            config,
            bank,
            gradient: vec![0.0; ds.nrows()],
            scratch: Vec::new(),
        })
    }

    /// State at iteration 0: the family offset and zero coefficients.
    pub fn initial_state(&self) -> BoostState {
        let offset = self.config.family.offset(self.ds.y());
        let f = vec![offset; self.ds.nrows()];
        let loss = self.config.family.loss(self.ds.y(), &f).unwrap_or(f64::NAN);
        BoostState {
            iteration: 0,
            f,
            beta: vec![0.0; self.ds.ncols()],
            loss,
        }
    }

    /// One iteration: gradient, all candidate fits, argmin rss, update.
    pub fn step(&mut self, state: &mut BoostState) -> Result<TraceRecord> {
        if self.learners.is_empty() {
            return Err(Error::NoLearners);
        }
        let family = self.config.family;
        let y = self.ds.y();
        family.negative_gradient_into(y, &state.f, &mut self.gradient);
        let (best, rss) = self.bank.select(&self.gradient, &mut self.scratch);
        let learner = &self.learners[best];
        let fit = crate::ridge::fit_on_factors(learner.block(), learner.lambda(), &self.gradient);
        let nu = self.config.nu;
        let increment: Vec<f64> = fit.coefficients.iter().map(|b| nu * b).collect();
        for (&c, &inc) in learner.columns().iter().zip(&increment) {
            state.beta[c] += inc;
        }
        for (fi, &fit_i) in state.f.iter_mut().zip(&fit.fitted) {
            *fi += nu * fit_i;
        }
        let loss_before = state.loss;
        state.loss = family.loss(y, &state.f)?;
        state.iteration += 1;
        Ok(TraceRecord {
            iteration: state.iteration,
            learner: learner.id(),
            increment,
            loss_before,
            loss_after: state.loss,
            candidate_rss: self.config.record_candidate_rss.then_some(rss),
        })
    }
}

/// Index of the learner chosen in the very first iteration for outcome
/// `y`, sharing the selection path of [`fit`].
pub(crate) fn first_selection(
    bank: &CandidateBank,
    family: Family,
    y: &[f64],
    gradient: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
) -> usize {
    let offset = family.offset(y);
    gradient.resize(y.len(), 0.0);
    let f = vec![offset; y.len()];
    family.negative_gradient_into(y, &f, gradient);
    bank.select(gradient, scratch).0
}

/// Runs `config.mstop` iterations from the family offset.
pub fn fit(ds: &Dataset, learners: &[BaseLearner], config: BoostConfig) -> Result<BoostModel> {
    if learners.is_empty() {
        return Err(Error::NoLearners);
    }
    let mut booster = Booster::new(ds, learners, config)?;
    let mut state = booster.initial_state();
    let offset = state.f.first().copied().unwrap_or(0.0);
    let initial_loss = state.loss;
    let mut trace = Vec::with_capacity(config.mstop);
    for _ in 0..config.mstop {
        trace.push(booster.step(&mut state)?);
    }
    Ok(BoostModel {
        config,
        learners: learners.iter().map(|l| l.info().clone()).collect(),
        column_names: ds.column_names().to_vec(),
        offset,
        initial_loss,
        coefficients: state.beta,
        trace,
        fitted: Some(state.f),
    })
}

impl BoostModel {
    pub fn mstop(&self) -> usize {
        self.trace.len()
    }

    pub fn ncols(&self) -> usize {
        self.column_names.len()
    }

    pub fn learner(&self, id: usize) -> Option<&LearnerInfo> {
        self.learners.get(id.wrapping_sub(1)).filter(|l| l.id == id)
    }

    /// Coefficients after the first `m` trace records, accumulated in trace order.
    pub fn coefficients_at(&self, m: usize) -> Result<Vec<f64>> {
        if m > self.trace.len() {
            return Err(Error::OutOfRange {
                requested: m,
                available: self.trace.len(),
            });
        }
        let mut beta = vec![0.0; self.ncols()];
        for rec in &self.trace[..m] {
            let info = self
                .learner(rec.learner)
                .ok_or(Error::InvalidColumn(rec.learner))?;
            for (&c, &inc) in info.columns.iter().zip(&rec.increment) {
                beta[c] += inc;
            }
        }
        Ok(beta)
    }

    /// Final in-sample loss.
    pub fn final_loss(&self) -> f64 {
        self.trace
            .last()
            .map(|r| r.loss_after)
            .unwrap_or(self.initial_loss)
    }

    /// Recomputes the in-sample linear predictor from `ds`.
    pub fn with_fitted(mut self, ds: &Dataset) -> Result<Self> {
        self.fitted = Some(predict(&self, ds.x())?);
        Ok(self)
    }
}

/// Linear predictor `offset + x β` for already standardized rows.
pub fn predict(model: &BoostModel, x_new: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x_new.ncols() != model.ncols() {
        return Err(Error::DimensionMismatch {
            expected: model.ncols(),
            found: x_new.ncols(),
        });
    }
    let beta = DVector::from_column_slice(&model.coefficients);
    let mut f = x_new * beta;
    f.add_scalar_mut(model.offset);
    Ok(f.as_slice().to_vec())
}

/// Predictions on the response scale (probabilities for binomial models).
pub fn predict_response(model: &BoostModel, x_new: &DMatrix<f64>) -> Result<Vec<f64>> {
    let family = model.config.family;
    Ok(predict(model, x_new)?
        .into_iter()
        .map(|f| family.response(f))
        .collect())
}

/// The model as it stood after `m` iterations.
pub fn truncate(model: &BoostModel, m: usize) -> Result<BoostModel> {
    let coefficients = model.coefficients_at(m)?;
    let mut config = model.config;
    config.mstop = m;
    Ok(BoostModel {
        config,
        learners: model.learners.clone(),
        column_names: model.column_names.clone(),
        offset: model.offset,
        initial_loss: model.initial_loss,
        coefficients,
        trace: model.trace[..m].to_vec(),
        fitted: if m == model.trace.len() {
            model.fitted.clone()
        } else {
            None
        },
    })
}
