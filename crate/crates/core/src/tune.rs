//! Out-of-sample risk over boosting iterations and choice of `mstop`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::boost::{BoostConfig, Booster};
use crate::error::{Error, Result};
use crate::model::{BaseLearner, Dataset, LearnerInfo};
use crate::ridge::DesignBlock;
use crate::rng::{domain, stream};

/// Default number of bootstrap replicates.
pub const DEFAULT_BOOTSTRAP: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resampling {
    KFold(usize),
    Bootstrap(usize),
}

impl Default for Resampling {
    fn default() -> Self {
        Resampling::Bootstrap(DEFAULT_BOOTSTRAP)
    }
}

/// Training rows (repeats allowed) and held-out rows of one replicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResamplingPlan {
    pub kind: Resampling,
    pub seed: u64,
    pub splits: Vec<Split>,
}

impl ResamplingPlan {
    pub fn new(kind: Resampling, n: usize, seed: u64) -> Result<Self> {
        let splits = match kind {
            Resampling::KFold(k) => {
                if k < 2 || k > n {
                    return Err(Error::FoldTooSmall(k));
                }
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut stream(seed, domain::RESAMPLING, 0, 0));
                let mut fold = vec![0; n];
                for (pos, &i) in order.iter().enumerate() {
                    fold[i] = pos % k;
                }
                (0..k)
                    .map(|f| Split {
                        train: (0..n).filter(|&i| fold[i] != f).collect(),
                        test: (0..n).filter(|&i| fold[i] == f).collect(),
                    })
                    .collect()
            }
            Resampling::Bootstrap(b) => {
                if b == 0 {
                    return Err(Error::InvalidConfig(
                        "bootstrap needs at least one replicate".into(),
                    ));
                }
                if n < 2 {
                    return Err(Error::FoldTooSmall(n));
                }
                (0..b)
                    .map(|r| {
                        let mut rng = stream(seed, domain::RESAMPLING, 1, r as u64);
                        let mut drawn = vec![false; n];
                        let mut train: Vec<usize> =
                            (0..n).map(|_| rng.random_range(0..n)).collect();
                        train.sort_unstable();
                        for &i in &train {
                            drawn[i] = true;
                        }
                        let test = (0..n).filter(|&i| !drawn[i]).collect();
                        Split { train, test }
                    })
                    .collect()
            }
        };
        Ok(Self { kind, seed, splits })
    }

    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TuneOptions {
    /// Standardize each training sample on its own, applying the same
    /// transform to its held-out rows.
    pub restandardize: bool,
}

/// Learner dropped from one replicate because its training block could
/// not carry the requested df.
#[derive(Debug, Clone, PartialEq)]
pub struct Screened {
    pub replicate: usize,
    pub learner: usize,
    pub reason: crate::Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskCurve {
    /// Held-out mean loss, replicates × (mstop + 1).
    pub losses: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub screened: Vec<Screened>,
}

impl RiskCurve {
    pub fn from_losses(losses: Vec<Vec<f64>>, screened: Vec<Screened>) -> Self {
        let width = losses.first().map_or(0, |r| r.len());
        let reps = losses.len() as f64;
        let mean = (0..width)
            .map(|m| losses.iter().map(|r| r[m]).sum::<f64>() / reps)
            .collect();
        Self {
            losses,
            mean,
            screened,
        }
    }

    pub fn mstop(&self) -> usize {
        self.mean.len().saturating_sub(1)
    }
}

/// Index of the smallest mean risk; ties go to the fewest iterations.
pub fn optimal_mstop(curve: &RiskCurve) -> usize {
    let mut best = 0;
    for (m, &v) in curve.mean.iter().enumerate() {
        if v < curve.mean[best] {
            best = m;
        }
    }
    best
}

fn learner_on(x: &DMatrix<f64>, info: &LearnerInfo) -> core::result::Result<BaseLearner, Error> {
    let block = DesignBlock::new(x, info.columns.clone())?;
    BaseLearner::with_df(
        info.id,
        info.kind,
        info.label.clone(),
        info.predictor.clone(),
        block,
        info.target_df,
    )
}

fn restandardize(train: &mut DMatrix<f64>, test: &mut DMatrix<f64>) {
    let n = train.nrows();
    for j in 0..train.ncols() {
        let mean = train.column(j).iter().sum::<f64>() / n as f64;
        let ss: f64 = train
            .column(j)
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum();
        let sd = if n > 1 {
            libm::sqrt(ss / (n - 1) as f64)
        } else {
            0.0
        };
        let scale = if sd > 0.0 { sd } else { 1.0 };
        for v in train.column_mut(j).iter_mut() {
            *v = (*v - mean) / scale;
        }
        for v in test.column_mut(j).iter_mut() {
            *v = (*v - mean) / scale;
        }
    }
}

fn replicate_risk(
    ds: &Dataset,
    learners: &[LearnerInfo],
    config: BoostConfig,
    opts: TuneOptions,
    split: &Split,
    index: usize,
) -> Result<(Vec<f64>, Vec<Screened>)> {
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::FoldTooSmall(index));
    }
    let train_ds = ds.subset_rows(&split.train);
    let test_ds = ds.subset_rows(&split.test);
    let mut train_x = train_ds.x().clone();
    let mut test_x = test_ds.x().clone();
    if opts.restandardize {
        restandardize(&mut train_x, &mut test_x);
    }
    let train_ds = Dataset::new(
        train_x.clone(),
        train_ds.y().to_vec(),
        ds.column_names().to_vec(),
    )?;
    let mut kept = Vec::with_capacity(learners.len());
    let mut screened = Vec::new();
    for info in learners {
        let usable = learner_on(&train_x, info).and_then(|l| {
            if (l.rank() as f64) < info.target_df {
                Err(Error::InfeasibleDf {
                    learner: info.label.clone(),
                    target: info.target_df,
                    rank: l.rank(),
                })
            } else {
                Ok(l)
            }
        });
        match usable {
            Ok(l) => kept.push(l),
            Err(reason) => screened.push(Screened {
                replicate: index,
                learner: info.id,
                reason,
            }),
        }
    }
    if kept.is_empty() {
        return Err(Error::NoLearners);
    }
    let family = config.family;
    let y_test = test_ds.y();
    let m_test = y_test.len() as f64;
    let mut booster = Booster::new(&train_ds, &kept, config)?;
    let mut state = booster.initial_state();
    let offset = state.f.first().copied().unwrap_or(0.0);
    let mut f_test = vec![offset; y_test.len()];
    let mut risk = Vec::with_capacity(config.mstop + 1);
    risk.push(family.loss(y_test, &f_test)? / m_test);
    for _ in 0..config.mstop {
        let rec = booster.step(&mut state)?;
        let learner = kept
            .iter()
            .find(|l| l.id() == rec.learner)
            .ok_or(Error::InvalidColumn(rec.learner))?;
        for (&c, &inc) in learner.columns().iter().zip(&rec.increment) {
            for (fi, &xv) in f_test.iter_mut().zip(test_x.column(c).iter()) {
                *fi += xv * inc;
            }
        }
        risk.push(family.loss(y_test, &f_test)? / m_test);
    }
    Ok((risk, screened))
}

/// Held-out risk at every iteration `0..=mstop` for every replicate of
/// `plan`. Each replicate refits the learners on its training rows with
/// their registry df.
pub fn cv_risk(
    ds: &Dataset,
    learners: &[BaseLearner],
    config: BoostConfig,
    plan: &ResamplingPlan,
    opts: TuneOptions,
) -> Result<RiskCurve> {
    config.validate()?;
    if learners.is_empty() {
        return Err(Error::NoLearners);
    }
    if plan.is_empty() {
        return Err(Error::InvalidConfig("empty resampling plan".into()));
    }
    if let Some(bad) = plan
        .splits
        .iter()
        .flat_map(|s| s.train.iter().chain(&s.test))
        .find(|&&i| i >= ds.nrows())
    {
        return Err(Error::InvalidConfig(format!(
            "resampling plan refers to row {bad} of {}",
            ds.nrows()
        )));
    }
    let infos: Vec<LearnerInfo> = learners.iter().map(|l| l.info().clone()).collect();
    let run = |(i, split): (usize, &Split)| replicate_risk(ds, &infos, config, opts, split, i);
    #[cfg(feature = "std")]
    let results: Vec<Result<(Vec<f64>, Vec<Screened>)>> = {
        use rayon::prelude::*;
        plan.splits.par_iter().enumerate().map(run).collect()
    };
    #[cfg(not(feature = "std"))]
    let results: Vec<Result<(Vec<f64>, Vec<Screened>)>> =
        plan.splits.iter().enumerate().map(run).collect();
    let mut losses = Vec::with_capacity(results.len());
    let mut screened = Vec::new();
    for r in results {
        let (risk, s) = r?;
        losses.push(risk);
        screened.extend(s);
    }
    Ok(RiskCurve::from_losses(losses, screened))
}
