//! Simulated designs: the 200-predictor linear example and the four
//! group-size bias scenarios, plus the driver comparing equal-λ, equal-df
//! and balanced penalties on them.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::balance::{balance, selection_frequencies, BalanceConfig, NullDistribution};
use crate::error::{Error, Result};
use crate::model::{
    group_learners, DataTable, Dataset, GroupStructure, LoadOptions, Penalty, RawColumn,
};
use crate::rng::{domain, stream};

/// Coefficients of the linear example: 20 active columns, 180 zeros.
pub fn linear_sim_beta() -> Vec<f64> {
    let mut beta = vec![5.0; 5];
    beta.extend_from_slice(&[5.0, -5.0, 2.0, 0.0, 0.0]);
    beta.extend_from_slice(&[-5.0; 5]);
    beta.extend_from_slice(&[2.0, -3.0, 8.0, 0.0, 0.0]);
    beta.resize(200, 0.0);
    beta
}

/// 100 × 200 standard normal design, `y = Xβ + ε` with unit noise, every
/// column and the outcome standardized; 40 groups of 5 consecutive
/// columns named `1` to `40`.
pub fn gen_linear_sim(seed: u64) -> Result<(Dataset, GroupStructure)> {
    let (n, p) = (100, 200);
    let mut rng = stream(seed, domain::SIMULATION, 0, 0);
    let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let beta = linear_sim_beta();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let signal: f64 = (0..p).map(|j| x[(i, j)] * beta[j]).sum();
            let noise: f64 = StandardNormal.sample(&mut rng);
            signal + noise
        })
        .collect();
    let names: Vec<String> = (1..=p).map(|j| format!("X{j}")).collect();
    let mut ds = Dataset::new(x, y, names.clone())?;
    ds.standardize_columns()?;
    ds.standardize_outcome()?;
    let pairs: Vec<(String, String)> = names
        .into_iter()
        .enumerate()
        .map(|(j, v)| (v, (j / 5 + 1).to_string()))
        .collect();
    let gs = GroupStructure::from_assignments(&ds, &pairs)?;
    Ok((ds, gs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupSpec {
    /// One categorical predictor with this many equally likely levels.
    Categorical(usize),
    /// This many standard normal columns.
    Numeric(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: usize,
    pub n: usize,
    pub groups: Vec<GroupSpec>,
    pub outcome: NullDistribution,
    /// Scenarios sharing this key share their design for a given seed.
    pub design_key: u64,
}

impl Scenario {
    /// The four bias scenarios. Scenario 3 reuses the design of scenario 2
    /// with a Gamma(1, 1) outcome.
    pub fn builtin(id: usize) -> Result<Self> {
        let three = vec![
            GroupSpec::Categorical(3),
            GroupSpec::Categorical(2),
            GroupSpec::Numeric(1),
        ];
        let normal = NullDistribution::StandardNormal;
        let s = match id {
            1 => Self {
                id,
                n: 50,
                groups: three,
                outcome: normal,
                design_key: 1,
            },
            2 => Self {
                id,
                n: 500,
                groups: three,
                outcome: normal,
                design_key: 2,
            },
            3 => Self {
                id,
                n: 500,
                groups: three,
                outcome: NullDistribution::Gamma {
                    shape: 1.0,
                    rate: 1.0,
                },
                design_key: 2,
            },
            4 => Self {
                id,
                n: 30,
                groups: vec![GroupSpec::Numeric(46), GroupSpec::Numeric(4)],
                outcome: normal,
                design_key: 4,
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown scenario {other}; expected 1 to 4"
                )))
            }
        };
        Ok(s)
    }

    pub fn all_builtin() -> Vec<Self> {
        (1..=4)
            .map(|i| Self::builtin(i).expect("known scenario"))
            .collect()
    }

    /// One outcome draw of length `n`.
    pub fn sample_outcome(&self, seed: u64) -> Result<Vec<f64>> {
        let mut rng = stream(
            seed,
            domain::SIMULATION,
            self.design_key,
            1 + self.id as u64,
        );
        let mut y = vec![0.0; self.n];
        self.outcome.sample_into(&mut rng, &mut y)?;
        Ok(y)
    }
}

fn variable_name(group: usize, size: usize, member: usize) -> String {
    if size == 1 {
        format!("G{group}")
    } else {
        format!("G{group}_{member}")
    }
}

/// Level labels `a`, `b`, ..., `z`, `aa`, ... so that they never parse
/// as numbers when written to and read back from text.
fn level_name(mut v: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (v % 26) as u8);
        if v < 26 {
            break;
        }
        v = v / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

/// Raw table of a scenario: categorical groups as level strings `a, b, ...`
/// (redrawn until every level occurs), numeric groups standard normal,
/// and one outcome draw in column `y`.
pub fn scenario_table(s: &Scenario, seed: u64) -> Result<(DataTable, Vec<(String, String)>)> {
    if s.n < 2 || s.groups.is_empty() {
        return Err(Error::InvalidConfig(
            "scenario needs n ≥ 2 and a group".into(),
        ));
    }
    let mut rng = stream(seed, domain::SIMULATION, s.design_key, 0);
    let mut names = Vec::new();
    let mut columns = Vec::new();
    let mut pairs = Vec::new();
    for (g, spec) in s.groups.iter().enumerate() {
        let group = (g + 1).to_string();
        match *spec {
            GroupSpec::Categorical(k) => {
                if k < 2 || k > s.n {
                    return Err(Error::InvalidConfig(format!(
                        "categorical group with {k} levels and n = {}",
                        s.n
                    )));
                }
                let levels = loop {
                    let draw: Vec<usize> = (0..s.n).map(|_| rng.random_range(0..k)).collect();
                    let mut seen = vec![false; k];
                    for &v in &draw {
                        seen[v] = true;
                    }
                    if seen.iter().all(|&b| b) {
                        break draw;
                    }
                };
                let name = variable_name(g + 1, 1, 1);
                pairs.push((name.clone(), group.clone()));
                names.push(name);
                columns.push(RawColumn::Categorical(
                    levels.into_iter().map(level_name).collect(),
                ));
            }
            GroupSpec::Numeric(size) => {
                if size == 0 {
                    return Err(Error::InvalidConfig("empty numeric group".into()));
                }
                for m in 1..=size {
                    let name = variable_name(g + 1, size, m);
                    pairs.push((name.clone(), group.clone()));
                    names.push(name);
                    columns.push(RawColumn::Numeric(
                        (0..s.n).map(|_| StandardNormal.sample(&mut rng)).collect(),
                    ));
                }
            }
        }
    }
    names.push("y".into());
    columns.push(RawColumn::Numeric(s.sample_outcome(seed)?));
    Ok((DataTable { names, columns }, pairs))
}

/// Encoded, standardized scenario design and its groups.
pub fn gen_scenario(s: &Scenario, seed: u64) -> Result<(Dataset, GroupStructure)> {
    let (table, pairs) = scenario_table(s, seed)?;
    let ds = Dataset::from_table(&table, "y", LoadOptions::default())?;
    let gs = GroupStructure::from_assignments(&ds, &pairs)?;
    Ok((ds, gs))
}

/// Stream round used for evaluation draws, disjoint from balancing rounds.
pub const EVALUATION_ROUND: u64 = 0xFFFF_FFFF;

pub const EQUAL_LAMBDA: f64 = 0.1;
pub const EQUAL_DF: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct BiasRow {
    pub scenario: usize,
    pub group: usize,
    pub equal_lambda: f64,
    pub equal_df: f64,
    pub group_adjustment: f64,
    pub df_used: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub rows: Vec<BiasRow>,
    /// Final imbalance of the balancing run, per scenario.
    pub imbalance: Vec<(usize, f64)>,
}

/// Group selection frequencies of one scenario under the three penalty
/// schemes. Balancing runs under `cfg.null_distribution`; all three
/// schemes are then evaluated on fresh draws of the scenario's outcome.
pub fn bias_rows(s: &Scenario, cfg: &BalanceConfig) -> Result<(Vec<BiasRow>, f64)> {
    let (ds, gs) = gen_scenario(s, cfg.seed)?;
    let eval = |learners: &[crate::model::BaseLearner]| {
        selection_frequencies(
            &ds,
            learners,
            cfg.reps,
            s.outcome,
            cfg.seed,
            EVALUATION_ROUND,
        )
    };
    let lam = eval(&group_learners(&ds, &gs, Penalty::Lambda(EQUAL_LAMBDA), 1)?)?;
    let df = eval(&group_learners(&ds, &gs, Penalty::Df(EQUAL_DF), 1)?)?;
    let mut learners = group_learners(&ds, &gs, Penalty::Df(cfg.init_df), 1)?;
    let res = balance(&ds, &mut learners, cfg)?;
    let adj = eval(&learners)?;
    let rows = (0..gs.len())
        .map(|g| BiasRow {
            scenario: s.id,
            group: g + 1,
            equal_lambda: lam[g],
            equal_df: df[g],
            group_adjustment: adj[g],
            df_used: res.df_star[g],
        })
        .collect();
    Ok((rows, res.best_imbalance()))
}

pub fn run_bias_experiment(scenarios: &[Scenario], cfg: &BalanceConfig) -> Result<BiasReport> {
    let mut rows = Vec::new();
    let mut imbalance = Vec::new();
    for s in scenarios {
        let (r, imb) = bias_rows(s, cfg)?;
        rows.extend(r);
        imbalance.push((s.id, imb));
    }
    Ok(BiasReport { rows, imbalance })
}
