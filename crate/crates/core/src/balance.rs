//! Simulation-based balancing of base-learner selection frequencies.
//!
//! Under an outcome unrelated to the design, every base-learner should win
//! the first boosting iteration equally often (or with prescribed
//! α-weighted odds). The balancer draws `reps` null outcomes, runs one
//! selection step for each, and moves each learner's degrees of freedom
//! along the error `target − frequency`. A round that fails to improve the
//! best imbalance so far decays the learning rate and mixes the step with
//! the best iterate instead.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::boost::{first_selection, CandidateBank};
use crate::error::{Error, Result};
use crate::family::Family;
use crate::model::{BaseLearner, Dataset, LearnerKind};
use crate::ridge::lambda_for_df;
use crate::rng::{domain, stream};

/// Distribution of the simulated null outcomes (i.i.d. per observation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NullDistribution {
    StandardNormal,
    Gamma { shape: f64, rate: f64 },
}

impl NullDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NullDistribution::StandardNormal => Ok(()),
            NullDistribution::Gamma { shape, rate } => {
                if shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!(
                        "invalid gamma({shape}, {rate}) outcome"
                    )))
                }
            }
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Result<()> {
        match *self {
            NullDistribution::StandardNormal => {
                for v in out.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
            }
            NullDistribution::Gamma { shape, rate } => {
                let dist = Gamma::new(shape, 1.0 / rate).map_err(|_| {
                    Error::InvalidConfig(format!("invalid gamma({shape}, {rate}) outcome"))
                })?;
                for v in out.iter_mut() {
                    *v = dist.sample(rng);
                }
            }
        }
        Ok(())
    }
}

/// Frequencies the balancer aims for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BalanceTarget {
    Uniform,
    /// Individual learners get mass ∝ α, group learners ∝ 1 − α.
    AlphaWeighted(f64),
}

/// Parameter the balancer moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateSpace {
    Df,
    LogLambda,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceConfig {
    pub reps: usize,
    pub iters: usize,
    pub lr: f64,
    pub gamma: f64,
    pub eta: f64,
    pub init_df: f64,
    pub min_df: f64,
    /// `None` means `rank − 0.01` for every learner.
    pub max_df: Option<f64>,
    pub null_distribution: NullDistribution,
    pub target: BalanceTarget,
    pub update: UpdateSpace,
    /// 1-based id of a learner whose df stays at `init_df`.
    pub fixed_learner: Option<usize>,
    /// Stop once the imbalance falls below this value.
    pub stop_below: Option<f64>,
    pub seed: u64,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            reps: 3000,
            iters: 20,
            lr: 0.5,
            gamma: 0.9,
            eta: 0.5,
            init_df: 0.5,
            min_df: 0.01,
            max_df: None,
            null_distribution: NullDistribution::StandardNormal,
            target: BalanceTarget::Uniform,
            update: UpdateSpace::Df,
            fixed_learner: None,
            stop_below: None,
            seed: 1,
        }
    }
}

impl BalanceConfig {
    pub fn df_bounds(&self, learner: &BaseLearner) -> (f64, f64) {
        let max = self.max_df.unwrap_or(learner.rank() as f64 - 0.01);
        (self.min_df, max.min(learner.rank() as f64))
    }

    pub fn validate(&self, learners: &[BaseLearner]) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if self.reps == 0 || self.iters == 0 {
            return bad("reps and iters must be positive".into());
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if let BalanceTarget::AlphaWeighted(a) = self.target {
            if !(0.0..=1.0).contains(&a) {
                return bad(format!("target alpha must lie in [0, 1], got {a}"));
            }
            let has_ind = learners.iter().any(|l| l.kind() == LearnerKind::Individual);
            let has_grp = learners.iter().any(|l| l.kind() == LearnerKind::Group);
            if (a > 0.0 && !has_ind) || (a < 1.0 && !has_grp) {
                return bad("alpha-weighted target needs individual and group learners".into());
            }
        }
        if let Some(id) = self.fixed_learner {
            if !learners.iter().any(|l| l.id() == id) {
                return bad(format!("fixed learner {id} does not exist"));
            }
        }
        for l in learners {
            let (lo, hi) = self.df_bounds(l);
            if !(lo > 0.0 && lo < hi) {
                return bad(format!("empty df range [{lo}, {hi}] for {}", l.label()));
            }
            if !(self.init_df >= lo && self.init_df <= hi) {
                return bad(format!(
                    "init_df {} outside [{lo}, {hi}] for {}",
                    self.init_df,
                    l.label()
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceResult {
    /// Best df per learner, in registry order.
    pub df_star: Vec<f64>,
    pub lambda_star: Vec<f64>,
    /// Frequencies observed in each round.
    pub freq_history: Vec<Vec<f64>>,
    /// df vector evaluated in each round.
    pub df_history: Vec<Vec<f64>>,
    pub imbalance_history: Vec<f64>,
    pub accepted: Vec<bool>,
    pub lr_history: Vec<f64>,
    pub target: Vec<f64>,
    /// 0-based round whose iterate is `df_star`.
    pub best_round: usize,
}

impl BalanceResult {
    pub fn best_imbalance(&self) -> f64 {
        self.imbalance_history[self.best_round]
    }
}

/// Target frequency vector for the learner registry.
pub fn target_vector(target: BalanceTarget, learners: &[BaseLearner]) -> Vec<f64> {
    let l = learners.len();
    if l == 0 {
        return Vec::new();
    }
    match target {
        BalanceTarget::Uniform => vec![1.0 / l as f64; l],
        BalanceTarget::AlphaWeighted(alpha) => {
            let w: Vec<f64> = learners
                .iter()
                .map(|lr| match lr.kind() {
                    LearnerKind::Individual => alpha,
                    LearnerKind::Group => 1.0 - alpha,
                })
                .collect();
            let total: f64 = w.iter().sum();
            if total > 0.0 {
                w.into_iter().map(|v| v / total).collect()
            } else {
                vec![1.0 / l as f64; l]
            }
        }
    }
}

/// Draws the null outcome of `replicate` in `round`.
pub fn null_outcome(
    dist: NullDistribution,
    seed: u64,
    round: u64,
    replicate: usize,
    n: usize,
) -> Result<Vec<f64>> {
    let mut rng = stream(seed, domain::NULL_OUTCOME, round, replicate as u64);
    let mut y = vec![0.0; n];
    dist.sample_into(&mut rng, &mut y)?;
    Ok(y)
}

/// Winning learner index (0-based) of the first boosting iteration for
/// each of `reps` null outcomes drawn in `round`.
pub fn selection_winners(
    learners: &[BaseLearner],
    reps: usize,
    dist: NullDistribution,
    seed: u64,
    round: u64,
) -> Result<Vec<usize>> {
    let bank = CandidateBank::new(learners)?;
    winners_with_bank(&bank, learners[0].block().nrows(), reps, dist, seed, round)
}

fn winners_with_bank(
    bank: &CandidateBank,
    n: usize,
    reps: usize,
    dist: NullDistribution,
    seed: u64,
    round: u64,
) -> Result<Vec<usize>> {
    dist.validate()?;
    let one = |k: usize, y: &mut Vec<f64>, g: &mut Vec<f64>, z: &mut Vec<f64>| -> usize {
        let mut rng = stream(seed, domain::NULL_OUTCOME, round, k as u64);
        y.resize(n, 0.0);
        dist.sample_into(&mut rng, y)
            .expect("distribution validated");
        first_selection(bank, Family::Gaussian, y, g, z)
    };
    #[cfg(feature = "std")]
    {
        use rayon::prelude::*;
        Ok((0..reps)
            .into_par_iter()
            .map_init(
                || (Vec::new(), Vec::new(), Vec::new()),
                |(y, g, z), k| one(k, y, g, z),
            )
            .collect())
    }
    #[cfg(not(feature = "std"))]
    {
        let (mut y, mut g, mut z) = (Vec::new(), Vec::new(), Vec::new());
        Ok((0..reps).map(|k| one(k, &mut y, &mut g, &mut z)).collect())
    }
}

fn frequencies(winners: &[usize], l: usize) -> Vec<f64> {
    let mut counts = vec![0usize; l];
    for &w in winners {
        counts[w] += 1;
    }
    let k = winners.len() as f64;
    counts.into_iter().map(|c| c as f64 / k).collect()
}

/// Fraction of null replicates in which each learner wins the first
/// iteration, with the learners' current penalties.
pub fn selection_frequencies(
    ds: &Dataset,
    learners: &[BaseLearner],
    reps: usize,
    dist: NullDistribution,
    seed: u64,
    round: u64,
) -> Result<Vec<f64>> {
    if learners.is_empty() {
        return Err(Error::NoLearners);
    }
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be positive".into()));
    }
    if learners[0].block().nrows() != ds.nrows() {
        return Err(Error::DimensionMismatch {
            expected: ds.nrows(),
            found: learners[0].block().nrows(),
        });
    }
    let winners = selection_winners(learners, reps, dist, seed, round)?;
    Ok(frequencies(&winners, learners.len()))
}

fn imbalance(target: &[f64], freq: &[f64]) -> (Vec<f64>, f64) {
    let err: Vec<f64> = target.iter().zip(freq).map(|(t, s)| t - s).collect();
    let sq = err.iter().map(|e| e * e).sum();
    (err, sq)
}

/// Parameter vector in the chosen update space, with its per-learner box.
struct Params {
    space: UpdateSpace,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Params {
    fn new(cfg: &BalanceConfig, learners: &[BaseLearner]) -> Result<Self> {
        let mut lower = Vec::with_capacity(learners.len());
        let mut upper = Vec::with_capacity(learners.len());
        for l in learners {
            let (lo, hi) = cfg.df_bounds(l);
            match cfg.update {
                UpdateSpace::Df => {
                    lower.push(lo);
                    upper.push(hi);
                }
                UpdateSpace::LogLambda => {
                    let sv = l.block().singular_values();
                    let lam_hi = lambda_for_df(sv, lo)?;
                    let lam_lo = lambda_for_df(sv, hi)?;
                    lower.push(libm::log(lam_lo.max(f64::MIN_POSITIVE)));
                    upper.push(libm::log(lam_hi));
                }
            }
        }
        Ok(Self {
            space: cfg.update,
            lower,
            upper,
        })
    }

    fn initial(&self, cfg: &BalanceConfig, learners: &[BaseLearner]) -> Result<Vec<f64>> {
        learners
            .iter()
            .map(|l| match self.space {
                UpdateSpace::Df => Ok(cfg.init_df),
                UpdateSpace::LogLambda => {
                    let lam = lambda_for_df(l.block().singular_values(), cfg.init_df)?;
                    Ok(libm::log(lam.max(f64::MIN_POSITIVE)))
                }
            })
            .collect()
    }

    /// Direction along which a positive error (under-selection) moves.
    fn sign(&self) -> f64 {
        match self.space {
            UpdateSpace::Df => 1.0,
            UpdateSpace::LogLambda => -1.0,
        }
    }

    fn clamp(&self, v: &mut [f64]) {
        for ((x, &lo), &hi) in v.iter_mut().zip(&self.lower).zip(&self.upper) {
            *x = x.clamp(lo, hi);
        }
    }

    fn apply(&self, v: &[f64], learners: &mut [BaseLearner]) -> Result<()> {
        for (l, &x) in learners.iter_mut().zip(v) {
            match self.space {
                UpdateSpace::Df => l.set_df(x)?,
                UpdateSpace::LogLambda => l.set_lambda(libm::exp(x)),
            }
        }
        Ok(())
    }
}

/// Calibrates per-learner degrees of freedom so that null selection
/// frequencies match the configured target. `learners` is left at the
/// best iterate found.
pub fn balance(
    ds: &Dataset,
    learners: &mut [BaseLearner],
    cfg: &BalanceConfig,
) -> Result<BalanceResult> {
    if learners.len() < 2 {
        return Err(Error::InvalidConfig(
            "balancing needs at least two base-learners".into(),
        ));
    }
    if learners[0].block().nrows() != ds.nrows() {
        return Err(Error::DimensionMismatch {
            expected: ds.nrows(),
            found: learners[0].block().nrows(),
        });
    }
    cfg.validate(learners)?;
    cfg.null_distribution.validate()?;
    let n = ds.nrows();
    let l = learners.len();
    let target = target_vector(cfg.target, learners);
    let params = Params::new(cfg, learners)?;
    let fixed = cfg
        .fixed_learner
        .and_then(|id| learners.iter().position(|lr| lr.id() == id));

    let mut current = params.initial(cfg, learners)?;
    params.clamp(&mut current);
    params.apply(&current, learners)?;
    let mut bank = CandidateBank::new(learners)?;

    let mut best = current.clone();
    let mut best_imbalance = f64::INFINITY;
    let mut best_round = 0;
    let mut lr = cfg.lr;
    let mut result = BalanceResult {
        df_star: Vec::new(),
        lambda_star: Vec::new(),
        freq_history: Vec::with_capacity(cfg.iters),
        df_history: Vec::with_capacity(cfg.iters),
        imbalance_history: Vec::with_capacity(cfg.iters),
        accepted: Vec::with_capacity(cfg.iters),
        lr_history: Vec::with_capacity(cfg.iters),
        target: target.clone(),
        best_round: 0,
    };

    for round in 0..cfg.iters {
        let winners = winners_with_bank(
            &bank,
            n,
            cfg.reps,
            cfg.null_distribution,
            cfg.seed,
            round as u64,
        )?;
        let freq = frequencies(&winners, l);
        let (err, imb) = imbalance(&target, &freq);
        result
            .df_history
            .push(learners.iter().map(|lr| lr.target_df()).collect());
        result.freq_history.push(freq);
        result.imbalance_history.push(imb);

        let improved = imb < best_imbalance;
        result.accepted.push(improved);
        let sign = params.sign();
        let mut next: Vec<f64> = if improved {
            best.clone_from(&current);
            best_imbalance = imb;
            best_round = round;
            best.iter()
                .zip(&err)
                .map(|(b, e)| b + sign * lr * e)
                .collect()
        } else {
            lr *= cfg.gamma;
            best.iter()
                .zip(&current)
                .zip(&err)
                .map(|((b, c), e)| (1.0 - cfg.eta) * b + cfg.eta * (c + sign * lr * e))
                .collect()
        };
        result.lr_history.push(lr);
        if let Some(f) = fixed {
            next[f] = current[f];
        }
        params.clamp(&mut next);

        if cfg.stop_below.is_some_and(|t| imb < t) || round + 1 == cfg.iters {
            break;
        }
        current = next;
        params.apply(&current, learners)?;
        bank.update_penalties(learners);
    }

    params.apply(&best, learners)?;
    result.best_round = best_round;
    result.df_star = learners.iter().map(|lr| lr.target_df()).collect();
    result.lambda_star = learners.iter().map(|lr| lr.lambda()).collect();
    Ok(result)
}
