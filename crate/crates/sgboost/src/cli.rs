//! Argument parsing and the five subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sgboost_core::balance::{
    balance, BalanceConfig, BalanceResult, BalanceTarget, NullDistribution, UpdateSpace,
};
use sgboost_core::boost::{fit, truncate, BoostConfig, BoostModel};
use sgboost_core::family::Family;
use sgboost_core::interpret::{coefficient_path, coefficients, variable_importance};
use sgboost_core::model::{
    build_base_learners, BaseLearner, Dataset, GroupStructure, LearnerKind, LoadOptions, RawColumn,
};
use sgboost_core::sim::{gen_linear_sim, run_bias_experiment, scenario_table, Scenario};
use sgboost_core::tune::{cv_risk, optimal_mstop, Resampling, ResamplingPlan, TuneOptions};

use crate::document::ModelDoc;
use crate::error::CliError;
use crate::io::{self, num, Table};

#[derive(Debug, Parser)]
#[command(
    name = "sgboost",
    version,
    about = "Sparse-group boosting with balanced ridge base-learners"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a boosting model and write the model document.
    Fit(FitArgs),
    /// Estimate out-of-sample risk per iteration and pick mstop.
    Tune(TuneArgs),
    /// Calibrate per-learner df so null selection frequencies match a target.
    Balance(BalanceArgs),
    /// Importance, coefficient and path tables of a fitted model.
    Report(ReportArgs),
    /// Generate simulated data or run the group-size bias experiment.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Data file (CSV with header).
    #[arg(long)]
    pub data: PathBuf,
    /// Group file (CSV with header) mapping variables to groups.
    #[arg(long)]
    pub groups: PathBuf,
    /// Name of the outcome column.
    #[arg(long)]
    pub outcome: String,
    /// Variable column of the group file.
    #[arg(long, default_value = "variable_name")]
    pub var_name: String,
    /// Group column of the group file.
    #[arg(long, default_value = "group_name")]
    pub group_name: String,
    /// gaussian or binomial.
    #[arg(long, default_value = "gaussian")]
    pub family: String,
    /// df of individual learners; groups get 1 − alpha.
    #[arg(long, default_value_t = 0.4)]
    pub alpha: f64,
    /// Leave predictor columns unscaled.
    #[arg(long)]
    pub no_standardize: bool,
    /// Standardize a gaussian outcome.
    #[arg(long)]
    pub standardize_outcome: bool,
    /// Per-learner df overrides (CSV with learner_id and df columns).
    #[arg(long)]
    pub learner_df: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoostArgs {
    /// Boosting iterations.
    #[arg(long, default_value_t = 100)]
    pub mstop: usize,
    /// Step length applied to each selected fit.
    #[arg(long, default_value_t = 0.1)]
    pub nu: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub boost: BoostArgs,
    /// Output model document.
    #[arg(long)]
    pub model: PathBuf,
    /// Store every candidate's rss in the trace.
    #[arg(long)]
    pub record_rss: bool,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub boost: BoostArgs,
    /// k-fold cross-validation instead of the bootstrap.
    #[arg(long, conflicts_with = "bootstrap")]
    pub kfold: Option<usize>,
    /// Number of bootstrap replicates.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Standardize each training sample separately.
    #[arg(long)]
    pub restandardize: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write the full-data model truncated at the chosen mstop.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BalanceOptions {
    #[arg(long, default_value_t = 3000)]
    pub reps: usize,
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub init_df: f64,
    #[arg(long, default_value_t = 0.01)]
    pub min_df: f64,
    /// Upper df bound (default: rank − 0.01 per learner).
    #[arg(long)]
    pub max_df: Option<f64>,
    /// uniform or alpha:<a>.
    #[arg(long, default_value = "uniform")]
    pub target: String,
    /// normal or gamma:<shape>,<rate>.
    #[arg(long, default_value = "normal")]
    pub null: String,
    /// df or lambda.
    #[arg(long, default_value = "df")]
    pub update: String,
    /// Learner id whose df stays at init-df.
    #[arg(long)]
    pub fix_learner: Option<usize>,
    /// Stop once the imbalance drops below this value.
    #[arg(long)]
    pub stop_below: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub options: BalanceOptions,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Show at most this many importance rows.
    #[arg(long)]
    pub n_predictors: Option<usize>,
    /// Show only rows with at least this relative importance.
    #[arg(long)]
    pub prop: Option<f64>,
    /// Truncate displayed labels to this many characters.
    #[arg(long)]
    pub max_char_length: Option<usize>,
}

#[derive(Debug, Args)]
#[group(id = "mode", required = true, multiple = false, args = ["paper_sim", "scenario", "table1"])]
pub struct SimulateArgs {
    /// 100 × 200 linear example with 40 groups of 5.
    #[arg(long)]
    pub paper_sim: bool,
    /// One of the bias scenarios 1 to 4.
    #[arg(long)]
    pub scenario: Option<usize>,
    /// Run all four bias scenarios under the three penalty schemes.
    #[arg(long)]
    pub table1: bool,
    #[command(flatten)]
    pub options: BalanceOptions,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn parse_family(name: &str) -> Result<Family, CliError> {
    Family::from_name(name)
        .ok_or_else(|| CliError::validation("invalid_flag", format!("unknown family {name}")))
}

fn parse_number(flag: &str, text: &str) -> Result<f64, CliError> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| {
            CliError::validation("invalid_flag", format!("--{flag}: cannot parse {text}"))
        })
}

fn parse_target(text: &str) -> Result<BalanceTarget, CliError> {
    match text.split_once(':') {
        None if text == "uniform" => Ok(BalanceTarget::Uniform),
        Some(("alpha", a)) => Ok(BalanceTarget::AlphaWeighted(parse_number("target", a)?)),
        _ => Err(CliError::validation(
            "invalid_flag",
            format!("--target must be uniform or alpha:<a>, got {text}"),
        )),
    }
}

fn parse_null(text: &str) -> Result<NullDistribution, CliError> {
    let bad = || {
        CliError::validation(
            "invalid_flag",
            format!("--null must be normal or gamma:<shape>,<rate>, got {text}"),
        )
    };
    match text.split_once(':') {
        None if text == "normal" => Ok(NullDistribution::StandardNormal),
        Some(("gamma", params)) => {
            let (s, r) = params.split_once(',').ok_or_else(bad)?;
            let dist = NullDistribution::Gamma {
                shape: parse_number("null", s)?,
                rate: parse_number("null", r)?,
            };
            dist.validate()?;
            Ok(dist)
        }
        _ => Err(bad()),
    }
}

fn parse_update(text: &str) -> Result<UpdateSpace, CliError> {
    match text {
        "df" => Ok(UpdateSpace::Df),
        "lambda" => Ok(UpdateSpace::LogLambda),
        _ => Err(CliError::validation(
            "invalid_flag",
            format!("--update must be df or lambda, got {text}"),
        )),
    }
}

impl BalanceOptions {
    pub fn config(&self) -> Result<BalanceConfig, CliError> {
        Ok(BalanceConfig {
            reps: self.reps,
            iters: self.iters,
            lr: self.lr,
            gamma: self.gamma,
            eta: self.eta,
            init_df: self.init_df,
            min_df: self.min_df,
            max_df: self.max_df,
            null_distribution: parse_null(&self.null)?,
            target: parse_target(&self.target)?,
            update: parse_update(&self.update)?,
            fixed_learner: self.fix_learner,
            stop_below: self.stop_below,
            seed: self.seed,
        })
    }
}

/// Encoded data, groups and the learner registry.
pub struct Loaded {
    pub ds: Dataset,
    pub groups: GroupStructure,
    pub learners: Vec<BaseLearner>,
    pub family: Family,
}

fn read_learner_df(path: &Path) -> Result<Vec<(usize, f64)>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(path, e))?;
    let headers = rdr.headers().map_err(|e| CliError::input(path, e))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::validation(
                "missing_column",
                format!("{} has no column {name}", path.display()),
            )
        })
    };
    let (id_col, df_col) = (col("learner_id")?, col("df")?);
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::input(path, e))?;
        let id = record[id_col]
            .parse::<usize>()
            .map_err(|e| CliError::input(path, e))?;
        out.push((id, parse_number("learner-df", &record[df_col])?));
    }
    Ok(out)
}

pub fn load(args: &DataArgs) -> Result<Loaded, CliError> {
    let family = parse_family(&args.family)?;
    let pairs = io::read_groups(&args.groups, &args.var_name, &args.group_name)?;
    // Only the outcome and the variables of the group file enter the model.
    // A group file may also name an indicator column `{variable}_{level}`.
    let listed = |name: &str| {
        name == args.outcome
            || pairs.iter().any(|(v, _)| {
                v == name
                    || v.strip_prefix(name)
                        .is_some_and(|rest| rest.starts_with('_'))
            })
    };
    let table = io::read_table(&args.data, listed)?;
    let opts = LoadOptions {
        family,
        standardize: !args.no_standardize,
        standardize_outcome: args.standardize_outcome,
    };
    let ds = Dataset::from_table(&table, &args.outcome, opts)?;
    let groups = io::group_structure(&ds, &pairs)?;
    let mut learners = build_base_learners(&ds, &groups, args.alpha)?;
    if let Some(path) = &args.learner_df {
        for (id, df) in read_learner_df(path)? {
            let learner = learners.iter_mut().find(|l| l.id() == id).ok_or_else(|| {
                CliError::validation(
                    "invalid_flag",
                    format!("--learner-df names unknown learner {id}"),
                )
            })?;
            learner.set_df(df)?;
        }
    }
    Ok(Loaded {
        ds,
        groups,
        learners,
        family,
    })
}

fn boost_config(
    args: &BoostArgs,
    family: Family,
    record_rss: bool,
) -> Result<BoostConfig, CliError> {
    let mut cfg = BoostConfig::new(args.mstop, args.nu, family);
    cfg.record_candidate_rss = record_rss;
    cfg.validate()?;
    Ok(cfg)
}

fn count_kind(learners: &[BaseLearner], kind: LearnerKind) -> usize {
    learners.iter().filter(|l| l.kind() == kind).count()
}

fn fit_summary(model: &BoostModel, learners: &[BaseLearner]) -> String {
    let selected = |kind| {
        model
            .trace
            .iter()
            .filter(|r| model.learner(r.learner).map(|l| l.kind) == Some(kind))
            .count()
    };
    let mut distinct: Vec<usize> = model.trace.iter().map(|r| r.learner).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let mut s = String::new();
    let _ = writeln!(s, "iterations: {}", model.mstop());
    let _ = writeln!(s, "final loss: {}", num(model.final_loss()));
    let _ = writeln!(
        s,
        "learners: {} individual, {} group",
        count_kind(learners, LearnerKind::Individual),
        count_kind(learners, LearnerKind::Group)
    );
    let _ = writeln!(
        s,
        "selections: {} individual, {} group",
        selected(LearnerKind::Individual),
        selected(LearnerKind::Group)
    );
    let _ = writeln!(s, "distinct learners selected: {}", distinct.len());
    s
}

pub fn cmd_fit(args: &FitArgs) -> Result<String, CliError> {
    let cfg = boost_config(
        &args.boost,
        parse_family(&args.data.family)?,
        args.record_rss,
    )?;
    let loaded = load(&args.data)?;
    let model = fit(&loaded.ds, &loaded.learners, cfg)?;
    ModelDoc::new(&model, &loaded.ds, Some(args.data.alpha)).write(&args.model)?;
    Ok(fit_summary(&model, &loaded.learners))
}

pub fn cmd_tune(args: &TuneArgs) -> Result<String, CliError> {
    let cfg = boost_config(&args.boost, parse_family(&args.data.family)?, false)?;
    let kind = match (args.kfold, args.bootstrap) {
        (Some(k), _) => Resampling::KFold(k),
        (None, Some(b)) => Resampling::Bootstrap(b),
        (None, None) => Resampling::default(),
    };
    let loaded = load(&args.data)?;
    let plan = ResamplingPlan::new(kind, loaded.ds.nrows(), args.seed)?;
    let opts = TuneOptions {
        restandardize: args.restandardize,
    };
    let curve = cv_risk(&loaded.ds, &loaded.learners, cfg, &plan, opts)?;
    let best = optimal_mstop(&curve);

    io::create_dir(&args.out_dir)?;
    let mut t = Table::create(
        &args.out_dir.join("risk.csv"),
        &["replicate", "iteration", "loss"],
    )?;
    for (r, losses) in curve.losses.iter().enumerate() {
        for (m, &v) in losses.iter().enumerate() {
            t.row([(r + 1).to_string(), m.to_string(), num(v)])?;
        }
    }
    t.finish()?;
    let mut t = Table::create(
        &args.out_dir.join("risk_summary.csv"),
        &["iteration", "mean_loss"],
    )?;
    for (m, &v) in curve.mean.iter().enumerate() {
        t.row([m.to_string(), num(v)])?;
    }
    t.finish()?;
    let mut t = Table::create(
        &args.out_dir.join("screened.csv"),
        &["replicate", "learner_id", "reason"],
    )?;
    for s in &curve.screened {
        t.row([
            (s.replicate + 1).to_string(),
            s.learner.to_string(),
            s.reason.to_string(),
        ])?;
    }
    t.finish()?;

    if let Some(path) = &args.model {
        let full = fit(&loaded.ds, &loaded.learners, cfg)?;
        let cut = truncate(&full, best)?.with_fitted(&loaded.ds)?;
        ModelDoc::new(&cut, &loaded.ds, Some(args.data.alpha)).write(path)?;
    }
    let mut s = String::new();
    let _ = writeln!(s, "replicates: {}", curve.losses.len());
    let _ = writeln!(s, "screened learner fits: {}", curve.screened.len());
    let _ = writeln!(s, "mstop: {best}");
    Ok(s)
}

fn balance_report(cfg: &BalanceConfig, learners: &[BaseLearner], res: &BalanceResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# balance report");
    let _ = writeln!(s, "reps: {}", cfg.reps);
    let _ = writeln!(s, "iters: {}", cfg.iters);
    let _ = writeln!(s, "lr: {}", cfg.lr);
    let _ = writeln!(s, "gamma: {}", cfg.gamma);
    let _ = writeln!(s, "eta: {}", cfg.eta);
    let _ = writeln!(s, "init_df: {}", cfg.init_df);
    let _ = writeln!(s, "min_df: {}", cfg.min_df);
    match cfg.max_df {
        Some(m) => {
            let _ = writeln!(s, "max_df: {m}");
        }
        None => {
            let _ = writeln!(s, "max_df: rank - 0.01");
        }
    }
    let target = match cfg.target {
        BalanceTarget::Uniform => "uniform".to_string(),
        BalanceTarget::AlphaWeighted(a) => format!("alpha:{a}"),
    };
    let _ = writeln!(s, "target: {target}");
    let null = match cfg.null_distribution {
        NullDistribution::StandardNormal => "normal".to_string(),
        NullDistribution::Gamma { shape, rate } => format!("gamma:{shape},{rate}"),
    };
    let _ = writeln!(s, "null: {null}");
    let update = match cfg.update {
        UpdateSpace::Df => "df",
        UpdateSpace::LogLambda => "lambda",
    };
    let _ = writeln!(s, "update: {update}");
    if let Some(id) = cfg.fixed_learner {
        let _ = writeln!(s, "fixed_learner: {id}");
    }
    let _ = writeln!(s, "seed: {}", cfg.seed);
    let _ = writeln!(s, "rounds: {}", res.imbalance_history.len());
    let _ = writeln!(s, "best_round: {}", res.best_round + 1);
    let _ = writeln!(s, "best_imbalance: {}", num(res.best_imbalance()));
    let _ = writeln!(
        s,
        "\n## learners (id, label, df, lambda, target, frequency at best round)"
    );
    for (k, l) in learners.iter().enumerate() {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            l.id(),
            l.label(),
            num(res.df_star[k]),
            num(res.lambda_star[k]),
            num(res.target[k]),
            num(res.freq_history[res.best_round][k])
        );
    }
    let _ = writeln!(
        s,
        "\n## rounds (round, imbalance, accepted, learning rate after update)"
    );
    for (r, imb) in res.imbalance_history.iter().enumerate() {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            r + 1,
            num(*imb),
            res.accepted[r],
            num(res.lr_history[r])
        );
    }
    s
}

pub fn cmd_balance(args: &BalanceArgs) -> Result<String, CliError> {
    let cfg = args.options.config()?;
    let mut loaded = load(&args.data)?;
    let res = balance(&loaded.ds, &mut loaded.learners, &cfg)?;
    let learners = &loaded.learners;
    io::create_dir(&args.out_dir)?;
    io::write_text(
        &args.out_dir.join("balance_report.txt"),
        &balance_report(&cfg, learners, &res),
    )?;
    let mut t = Table::create(
        &args.out_dir.join("balance_frequencies.csv"),
        &["round", "learner_id", "blearner", "df", "frequency"],
    )?;
    for (r, (freq, dfs)) in res.freq_history.iter().zip(&res.df_history).enumerate() {
        for (k, l) in learners.iter().enumerate() {
            t.row([
                (r + 1).to_string(),
                l.id().to_string(),
                l.label().to_string(),
                num(dfs[k]),
                num(freq[k]),
            ])?;
        }
    }
    t.finish()?;
    let mut t = Table::create(
        &args.out_dir.join("balance_df.csv"),
        &["learner_id", "blearner", "type", "df", "lambda"],
    )?;
    for (k, l) in learners.iter().enumerate() {
        t.row([
            l.id().to_string(),
            l.label().to_string(),
            l.kind().name().to_string(),
            num(res.df_star[k]),
            num(res.lambda_star[k]),
        ])?;
    }
    t.finish()?;
    let mut s = String::new();
    let _ = writeln!(s, "rounds: {}", res.imbalance_history.len());
    let _ = writeln!(s, "best imbalance: {}", num(res.best_imbalance()));
    let _ = writeln!(s, "learners: {}", learners.len());
    let _ = writeln!(s, "groups: {}", loaded.groups.len());
    Ok(s)
}

fn clip(label: &str, max: Option<usize>) -> String {
    match max {
        Some(m) if label.chars().count() > m => label.chars().take(m).collect(),
        _ => label.to_string(),
    }
}

pub fn cmd_report(args: &ReportArgs) -> Result<String, CliError> {
    let model = ModelDoc::read(&args.model)?.to_model()?;
    let importance = variable_importance(&model)?;
    let coefs = coefficients(&model)?;
    let path = coefficient_path(&model)?;
    io::create_dir(&args.out_dir)?;

    let mut t = Table::create(
        &args.out_dir.join("importance.csv"),
        &[
            "reduction",
            "blearner",
            "predictor",
            "selfreq",
            "type",
            "relative_importance",
        ],
    )?;
    for r in &importance.rows {
        t.row([
            num(r.reduction),
            r.learner.clone(),
            r.predictor.clone(),
            num(r.selfreq),
            r.kind.name().to_string(),
            num(r.relative_importance),
        ])?;
    }
    t.finish()?;
    let mut t = Table::create(
        &args.out_dir.join("importance_summary.csv"),
        &["type", "importance"],
    )?;
    t.row(["group".to_string(), num(importance.group_total)])?;
    t.row(["individual".to_string(), num(importance.individual_total)])?;
    t.finish()?;

    let mut t = Table::create(
        &args.out_dir.join("coefficients_raw.csv"),
        &["variable", "effect", "blearner", "predictor", "type"],
    )?;
    for r in &coefs.raw {
        t.row([
            r.variable.clone(),
            num(r.effect),
            r.learner.clone(),
            r.predictor.clone(),
            r.kind.name().to_string(),
        ])?;
    }
    t.finish()?;
    let mut t = Table::create(
        &args.out_dir.join("coefficients_aggregate.csv"),
        &["variable", "effect", "blearners"],
    )?;
    for a in &coefs.aggregate {
        t.row([a.variable.clone(), num(a.effect), a.learners.join("; ")])?;
    }
    t.finish()?;
    let mut t = Table::create(
        &args.out_dir.join("path.csv"),
        &["iteration", "variable", "effect", "type"],
    )?;
    for r in &path.rows {
        t.row([
            r.iteration.to_string(),
            r.variable.clone(),
            num(r.value),
            r.updated_by.name().to_string(),
        ])?;
    }
    t.finish()?;

    // Display copy: filters never touch the files above, and shares are
    // not renormalized over the shown rows.
    let shown = importance
        .rows
        .iter()
        .filter(|r| args.prop.is_none_or(|p| r.relative_importance >= p))
        .take(args.n_predictors.unwrap_or(usize::MAX));
    let rows: Vec<_> = shown
        .map(|r| {
            (
                clip(&r.learner, args.max_char_length),
                clip(&r.predictor, args.max_char_length),
                r,
            )
        })
        .collect();
    let width = rows
        .iter()
        .map(|r| r.0.chars().count())
        .max()
        .unwrap_or(0)
        .max(8);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:<10}  {:>8}  {:>8}  predictor",
        "blearner", "type", "selfreq", "share"
    );
    for (label, predictor, r) in &rows {
        let _ = writeln!(
            s,
            "{:<width$}  {:<10}  {:>8.4}  {:>8.4}  {}",
            label,
            r.kind.name(),
            r.selfreq,
            r.relative_importance,
            predictor
        );
    }
    let _ = writeln!(s, "group importance: {:.4}", importance.group_total);
    let _ = writeln!(
        s,
        "individual importance: {:.4}",
        importance.individual_total
    );
    Ok(s)
}

fn write_raw_table(path: &Path, names: &[String], columns: &[RawColumn]) -> Result<(), CliError> {
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut t = Table::create(path, &header)?;
    let n = columns.first().map_or(0, RawColumn::len);
    for i in 0..n {
        t.row(columns.iter().map(|c| match c {
            RawColumn::Numeric(v) => num(v[i]),
            RawColumn::Categorical(v) => v[i].clone(),
        }))?;
    }
    t.finish()
}

fn write_groups(path: &Path, pairs: &[(String, String)]) -> Result<(), CliError> {
    let mut t = Table::create(path, &["variable_name", "group_name"])?;
    for (v, g) in pairs {
        t.row([v, g])?;
    }
    t.finish()
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<String, CliError> {
    io::create_dir(&args.out_dir)?;
    let seed = args.options.seed;
    if args.paper_sim {
        let (ds, gs) = gen_linear_sim(seed)?;
        let mut names = ds.column_names().to_vec();
        names.push("y".into());
        let mut columns: Vec<RawColumn> = (0..ds.ncols())
            .map(|j| RawColumn::Numeric(ds.x().column(j).iter().copied().collect()))
            .collect();
        columns.push(RawColumn::Numeric(ds.y().to_vec()));
        write_raw_table(&args.out_dir.join("data.csv"), &names, &columns)?;
        write_groups(&args.out_dir.join("groups.csv"), gs.assignments())?;
        return Ok(format!(
            "wrote {} rows, {} predictors, {} groups\n",
            ds.nrows(),
            ds.ncols(),
            gs.len()
        ));
    }
    if let Some(id) = args.scenario {
        let s = Scenario::builtin(id).map_err(|_| {
            CliError::validation("unknown_scenario", format!("no scenario {id}; use 1 to 4"))
        })?;
        let (table, pairs) = scenario_table(&s, seed)?;
        write_raw_table(&args.out_dir.join("data.csv"), &table.names, &table.columns)?;
        write_groups(&args.out_dir.join("groups.csv"), &pairs)?;
        return Ok(format!("wrote scenario {id}: {} rows\n", s.n));
    }
    let cfg = args.options.config()?;
    let report = run_bias_experiment(&Scenario::all_builtin(), &cfg)?;
    let mut t = Table::create(
        &args.out_dir.join("table1.csv"),
        &[
            "scenario",
            "group",
            "equal_lambda",
            "equal_df",
            "group_adjustment",
            "df_used",
        ],
    )?;
    let mut s = String::from("scenario group equal_lambda equal_df group_adjustment (df)\n");
    for r in &report.rows {
        t.row([
            r.scenario.to_string(),
            r.group.to_string(),
            num(r.equal_lambda),
            num(r.equal_df),
            num(r.group_adjustment),
            num(r.df_used),
        ])?;
        let _ = writeln!(
            s,
            "{} {} {:.3} {:.3} {:.3} (df={:.3})",
            r.scenario, r.group, r.equal_lambda, r.equal_df, r.group_adjustment, r.df_used
        );
    }
    t.finish()?;
    Ok(s)
}

/// Runs a parsed command line, returning what goes to standard output.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::validation(
                "invalid_flag",
                "--threads must be at least 1",
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::runtime("threads", e.to_string()))?;
    }
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Balance(a) => cmd_balance(a),
        Command::Report(a) => cmd_report(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}
