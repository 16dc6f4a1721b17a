use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sgboost_core::balance::{
    balance, null_outcome, selection_frequencies, selection_winners, target_vector, BalanceConfig,
    BalanceTarget, NullDistribution, UpdateSpace,
};
use sgboost_core::boost::{fit, BoostConfig};
use sgboost_core::family::Family;
use sgboost_core::model::{
    build_base_learners, group_learners, individual_learners, Dataset, GroupStructure, Penalty,
};

const NORMAL: NullDistribution = NullDistribution::StandardNormal;

fn grouped(n: usize, sizes: &[usize], seed: u64) -> (Dataset, GroupStructure) {
    let p: usize = sizes.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let names: Vec<String> = (1..=p).map(|j| format!("X{j}")).collect();
    let mut ds = Dataset::new(x, vec![0.0; n], names.clone()).unwrap();
    ds.standardize_columns().unwrap();
    let mut pairs = Vec::new();
    let mut j = 0;
    for (g, &s) in sizes.iter().enumerate() {
        for _ in 0..s {
            pairs.push((names[j].clone(), format!("g{}", g + 1)));
            j += 1;
        }
    }
    let gs = GroupStructure::from_assignments(&ds, &pairs).unwrap();
    (ds, gs)
}

fn max_deviation(freq: &[f64], target: &[f64]) -> f64 {
    freq.iter()
        .zip(target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[test]
fn one_step_path_matches_full_fit() {
    let (ds, gs) = grouped(35, &[3, 1, 2], 1);
    let learners = build_base_learners(&ds, &gs, 0.3).unwrap();
    let winners = selection_winners(&learners, 60, NORMAL, 5, 2).unwrap();
    for (k, &w) in winners.iter().enumerate() {
        let y = null_outcome(NORMAL, 5, 2, k, ds.nrows()).unwrap();
        let dk = ds.with_outcome(y).unwrap();
        let model = fit(&dk, &learners, BoostConfig::new(1, 1.0, Family::Gaussian)).unwrap();
        assert_eq!(model.trace[0].learner, learners[w].id());
    }
}

#[test]
fn exchangeable_columns_split_evenly() {
    let (ds, _) = grouped(60, &[1, 1], 2);
    let learners = individual_learners(&ds, Penalty::Df(0.5), 1).unwrap();
    let f = selection_frequencies(&ds, &learners, 3000, NORMAL, 9, 0).unwrap();
    assert!((f[0] - 0.5).abs() <= 0.03, "{f:?}");
    assert!((f[0] + f[1] - 1.0).abs() < 1e-12);
}

#[test]
fn raising_df_does_not_lower_frequency() {
    let (ds, gs) = grouped(40, &[3, 2, 1], 3);
    let mut learners = group_learners(&ds, &gs, Penalty::Df(0.5), 1).unwrap();
    let before = selection_frequencies(&ds, &learners, 3000, NORMAL, 4, 0).unwrap();
    learners[1].set_df(0.8).unwrap();
    let after = selection_frequencies(&ds, &learners, 3000, NORMAL, 4, 0).unwrap();
    assert!(after[1] >= before[1] - 0.02, "{before:?} -> {after:?}");
}

#[test]
fn identically_distributed_groups_stay_uniform() {
    let (ds, gs) = grouped(80, &[2, 2, 2], 4);
    let mut learners = group_learners(&ds, &gs, Penalty::Df(0.5), 1).unwrap();
    let cfg = BalanceConfig {
        seed: 11,
        ..BalanceConfig::default()
    };
    let res = balance(&ds, &mut learners, &cfg).unwrap();
    let fresh = selection_frequencies(&ds, &learners, 3000, NORMAL, 12, 0).unwrap();
    assert!(max_deviation(&fresh, &[1.0 / 3.0; 3]) <= 0.03, "{fresh:?}");
    assert!(
        res.df_star.iter().all(|&d| (d - 0.5).abs() < 0.25),
        "{:?}",
        res.df_star
    );
}

#[test]
fn unequal_groups_get_balanced() {
    let (ds, gs) = grouped(50, &[6, 2, 1], 5);
    let mut learners = group_learners(&ds, &gs, Penalty::Df(0.5), 1).unwrap();
    let start = selection_frequencies(&ds, &learners, 3000, NORMAL, 21, 0).unwrap();
    let cfg = BalanceConfig {
        seed: 21,
        ..BalanceConfig::default()
    };
    let res = balance(&ds, &mut learners, &cfg).unwrap();
    let uniform = [1.0 / 3.0; 3];
    assert!(max_deviation(&start, &uniform) > 0.05, "{start:?}");
    assert!(max_deviation(&res.freq_history[res.best_round], &uniform) <= 0.03);
    let accepted_best = res
        .imbalance_history
        .iter()
        .zip(&res.accepted)
        .filter(|(_, &a)| a)
        .map(|(v, _)| *v)
        .fold(f64::INFINITY, f64::min);
    assert!(res.best_imbalance() <= accepted_best);
    for (l, &d) in learners.iter().zip(&res.df_star) {
        assert!(d >= cfg.min_df && d <= l.rank() as f64 - 0.01);
    }
    assert!(res.df_star[0] < res.df_star[2]);
}

#[test]
fn same_seed_same_result() {
    let (ds, gs) = grouped(30, &[4, 1], 6);
    let run = || {
        let mut learners = group_learners(&ds, &gs, Penalty::Df(0.5), 1).unwrap();
        let cfg = BalanceConfig {
            reps: 500,
            iters: 8,
            seed: 3,
            ..BalanceConfig::default()
        };
        balance(&ds, &mut learners, &cfg).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn fixed_learner_keeps_its_df() {
    let (ds, gs) = grouped(40, &[5, 2, 1], 7);
    let mut learners = group_learners(&ds, &gs, Penalty::Df(0.5), 1).unwrap();
    let cfg = BalanceConfig {
        reps: 800,
        iters: 10,
        fixed_learner: Some(2),
        ..BalanceConfig::default()
    };
    let res = balance(&ds, &mut learners, &cfg).unwrap();
    assert!(res.df_history.iter().all(|d| d[1] == 0.5));
    assert_eq!(res.df_star[1], 0.5);
}

#[test]
fn lambda_space_variant_balances_too() {
    let (ds, gs) = grouped(50, &[6, 2, 1], 5);
    let mut learners = group_learners(&ds, &gs, Penalty::Df(0.5), 1).unwrap();
    let cfg = BalanceConfig {
        update: UpdateSpace::LogLambda,
        seed: 8,
        ..BalanceConfig::default()
    };
    let res = balance(&ds, &mut learners, &cfg).unwrap();
    let uniform = [1.0 / 3.0; 3];
    assert!(max_deviation(&res.freq_history[res.best_round], &uniform) <= 0.04);
    for (l, (&d, &lam)) in learners
        .iter()
        .zip(res.df_star.iter().zip(&res.lambda_star))
    {
        assert_eq!(l.lambda(), lam);
        assert!(d >= cfg.min_df - 1e-9 && d <= l.rank() as f64);
    }
}

#[test]
fn alpha_weighted_target_is_tracked() {
    let (ds, gs) = grouped(60, &[3, 2], 9);
    let mut learners = build_base_learners(&ds, &gs, 0.5).unwrap();
    let cfg = BalanceConfig {
        target: BalanceTarget::AlphaWeighted(0.3),
        seed: 2,
        ..BalanceConfig::default()
    };
    let res = balance(&ds, &mut learners, &cfg).unwrap();
    let target = target_vector(cfg.target, &learners);
    assert_eq!(res.target, target);
    let best = &res.freq_history[res.best_round];
    assert!(
        max_deviation(best, &target) <= 0.04,
        "{best:?} vs {target:?}"
    );
}

#[test]
fn gamma_nulls_are_supported() {
    let (ds, gs) = grouped(40, &[2, 1], 10);
    let learners = group_learners(&ds, &gs, Penalty::Df(0.5), 1).unwrap();
    let g = NullDistribution::Gamma {
        shape: 1.0,
        rate: 1.0,
    };
    let f = selection_frequencies(&ds, &learners, 200, g, 1, 0).unwrap();
    assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let bad = NullDistribution::Gamma {
        shape: 0.0,
        rate: 1.0,
    };
    assert!(selection_frequencies(&ds, &learners, 10, bad, 1, 0).is_err());
}
