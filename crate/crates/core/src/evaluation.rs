//! Classification metrics, participant-wise cross validation and the
//! percentile bootstrap.
//!
//! All splits are by participant: a subject's trials are either entirely in
//! training or entirely in evaluation. Subject assignment uses a seeded
//! shuffle so every plan is reproducible from `(subjects, folds, seed)`.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pairwise::{encode_trials, fit, DesignLayout, DesignRow, FitConfig, GlobalSalienceModel, Trial};
use crate::stats::{mean, percentile_sorted, sample_sd};

fn class_counts(labels: &[f64]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l > 0.0).count();
    (pos, labels.len() - pos)
}

fn check_binary(values: &[f64], labels: &[f64], what: &str) -> Result<()> {
    if values.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{what}: {} values but {} labels",
            values.len(),
            labels.len()
        )));
    }
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "{what} needs both classes ({pos} positive, {neg} negative)"
        )));
    }
    Ok(())
}

/// Area under the ROC curve as `P(s⁺ > s⁻) + ½·P(s⁺ = s⁻)` over all
/// positive/negative pairs. Labels are ±1.
///
/// Scores are sorted once and swept group by group, with the pair count
/// kept as an integer (ties count one half-pair each) so the result is the
/// exact pair-counting ratio.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_binary(scores, labels, "auc")?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("auc: NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut twice_wins: u128 = 0;
    let mut negatives_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let value = scores[order[i]];
        let (mut pos, mut neg) = (0u128, 0u128);
        while i < order.len() && scores[order[i]] == value {
            if labels[order[i]] > 0.0 {
                pos += 1;
            } else {
                neg += 1;
            }
            i += 1;
        }
        twice_wins += pos * (2 * negatives_below + neg);
        negatives_below += neg;
    }
    let (n_pos, n_neg) = class_counts(labels);
    Ok(twice_wins as f64 / (2 * n_pos as u128 * n_neg as u128) as f64)
}

/// Tjur's coefficient of discrimination: mean predicted probability among
/// positives minus that among negatives.
pub fn tjur_r2(probs: &[f64], labels: &[f64]) -> Result<f64> {
    check_binary(probs, labels, "tjur_r2")?;
    let (mut sum_pos, mut sum_neg) = (0.0, 0.0);
    let (n_pos, n_neg) = class_counts(labels);
    for (&p, &l) in probs.iter().zip(labels) {
        if l > 0.0 {
            sum_pos += p;
        } else {
            sum_neg += p;
        }
    }
    Ok(sum_pos / n_pos as f64 - sum_neg / n_neg as f64)
}

/// Fraction of rows whose predicted side agrees with the label. A
/// probability of exactly 0.5 predicts "right first".
pub fn accuracy(model: &GlobalSalienceModel, rows: &[DesignRow]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::Empty("accuracy needs at least one row".into()));
    }
    let correct = rows
        .iter()
        .filter(|r| {
            let predicted = if model.predict_prob(r) >= 0.5 { 1.0 } else { -1.0 };
            predicted == r.label
        })
        .count();
    Ok(correct as f64 / rows.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Participant-wise folds. Test sets are disjoint and cover every subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

/// Shuffles the subjects with `seed` and cuts them into `fold_count`
/// contiguous groups whose sizes differ by at most one.
fn partition_subjects(subjects: &[usize], fold_count: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if fold_count < 1 {
        return Err(Error::InvalidArgument("fold count must be at least 1".into()));
    }
    let unique: BTreeSet<usize> = subjects.iter().copied().collect();
    if unique.len() != subjects.len() {
        return Err(Error::InvalidArgument("subject ids must be distinct".into()));
    }
    if fold_count > unique.len() {
        return Err(Error::InvalidArgument(format!(
            "{fold_count} folds requested for {} subjects",
            unique.len()
        )));
    }
    let mut shuffled: Vec<usize> = unique.into_iter().collect();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let base = shuffled.len() / fold_count;
    let extra = shuffled.len() % fold_count;
    let mut groups = Vec::with_capacity(fold_count);
    let mut start = 0;
    for g in 0..fold_count {
        let size = base + usize::from(g < extra);
        let mut group = shuffled[start..start + size].to_vec();
        group.sort_unstable();
        groups.push(group);
        start += size;
    }
    Ok(groups)
}

fn plan_from_groups(groups: Vec<Vec<usize>>) -> FoldPlan {
    let folds = (0..groups.len())
        .map(|g| {
            let mut train: Vec<usize> = groups
                .iter()
                .enumerate()
                .filter(|(h, _)| *h != g)
                .flat_map(|(_, grp)| grp.iter().copied())
                .collect();
            train.sort_unstable();
            Fold {
                train,
                test: groups[g].clone(),
            }
        })
        .collect();
    FoldPlan { folds }
}

/// Partition of subjects into `fold_count` test groups. With `n` subjects
/// and `⌈n/2⌉` folds every test group is a pair, plus one singleton when `n`
/// is odd.
pub fn make_leave2out_plan(subjects: &[usize], fold_count: usize, seed: u64) -> Result<FoldPlan> {
    Ok(plan_from_groups(partition_subjects(subjects, fold_count, seed)?))
}

/// Distinct subject ids present in `trials`, ascending.
pub fn subjects_of(trials: &[Trial]) -> Vec<usize> {
    trials
        .iter()
        .map(|t| t.subject_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn select_trials(trials: &[Trial], subjects: &[usize]) -> Vec<Trial> {
    let keep: BTreeSet<usize> = subjects.iter().copied().collect();
    trials
        .iter()
        .filter(|t| keep.contains(&t.subject_id))
        .copied()
        .collect()
}

/// `C = 10^p`, `p = −3 + (2/3)(n − 1)`, `n = 1..=10`.
pub fn default_c_grid() -> Vec<f64> {
    (1..=10)
        .map(|n| 10f64.powf(-3.0 + 2.0 * (n - 1) as f64 / 3.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvSelection {
    pub best_c: f64,
    /// `(C, mean validation accuracy)` in grid order.
    pub per_c: Vec<(f64, f64)>,
}

/// Chooses `C` by participant-wise `folds`-fold cross validation on
/// accuracy. Ties go to the smaller `C`.
pub fn cv_select_c(
    trials: &[Trial],
    layout: DesignLayout,
    grid: &[f64],
    folds: usize,
    seed: u64,
    base: &FitConfig,
) -> Result<CvSelection> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("C grid is empty".into()));
    }
    let subjects = subjects_of(trials);
    if subjects.len() < folds {
        return Err(Error::Protocol(format!(
            "{folds}-fold selection needs at least {folds} subjects, got {}",
            subjects.len()
        )));
    }
    let plan = plan_from_groups(partition_subjects(&subjects, folds, seed)?);
    let splits: Vec<(Vec<DesignRow>, Vec<DesignRow>)> = plan
        .folds
        .iter()
        .map(|f| {
            Ok((
                encode_trials(&select_trials(trials, &f.train), layout)?,
                encode_trials(&select_trials(trials, &f.test), layout)?,
            ))
        })
        .collect::<Result<_>>()?;

    let per_c: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&c| {
            let config = FitConfig { c, ..base.clone() };
            let accs: Vec<f64> = splits
                .iter()
                .map(|(train, test)| {
                    let model = fit(train, layout, &config)?.into_converged()?;
                    accuracy(&model, test)
                })
                .collect::<Result<_>>()?;
            Ok((c, mean(&accs).unwrap_or(f64::NAN)))
        })
        .collect::<Result<_>>()?;

    let mut best = per_c[0];
    for &(c, acc) in &per_c[1..] {
        if acc > best.1 || (acc == best.1 && c < best.0) {
            best = (c, acc);
        }
    }
    Ok(CvSelection {
        best_c: best.0,
        per_c,
    })
}

/// Metrics on one evaluation set. AUC and Tjur R² are `None` when the set
/// holds a single outcome class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldMetrics {
    pub auc: Option<f64>,
    pub tjur_r2: Option<f64>,
    pub accuracy: f64,
}

pub fn fold_metrics(model: &GlobalSalienceModel, rows: &[DesignRow]) -> Result<FoldMetrics> {
    let probs: Vec<f64> = rows.iter().map(|r| model.predict_prob(r)).collect();
    let labels: Vec<f64> = rows.iter().map(|r| r.label).collect();
    let defined = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(FoldMetrics {
        auc: defined(auc(&probs, &labels))?,
        tjur_r2: defined(tjur_r2(&probs, &labels))?,
        accuracy: accuracy(model, rows)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation across folds; 0 with a single fold.
    pub sd: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Option<Summary> {
        Some(Summary {
            mean: mean(values)?,
            sd: sample_sd(values).unwrap_or(0.0),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub per_fold: Vec<FoldMetrics>,
    pub auc: Option<Summary>,
    pub tjur_r2: Option<Summary>,
    pub accuracy: Summary,
}

impl MetricReport {
    pub fn from_folds(per_fold: Vec<FoldMetrics>) -> Result<Self> {
        let aucs: Vec<f64> = per_fold.iter().filter_map(|m| m.auc).collect();
        let tjurs: Vec<f64> = per_fold.iter().filter_map(|m| m.tjur_r2).collect();
        let accs: Vec<f64> = per_fold.iter().map(|m| m.accuracy).collect();
        let accuracy =
            Summary::of(&accs).ok_or_else(|| Error::Empty("metric report without folds".into()))?;
        Ok(Self {
            auc: Summary::of(&aucs),
            tjur_r2: Summary::of(&tjurs),
            accuracy,
            per_fold,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CrossEvalConfig {
    /// Outer folds; `None` means `⌈subjects / 2⌉` (leave two participants out).
    pub outer_folds: Option<usize>,
    pub inner_folds: usize,
    pub grid: Vec<f64>,
    pub seed: u64,
    pub fit: FitConfig,
}

impl Default for CrossEvalConfig {
    fn default() -> Self {
        Self {
            outer_folds: None,
            inner_folds: 5,
            grid: default_c_grid(),
            seed: 0,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CrossEvaluation {
    pub plan: FoldPlan,
    pub selected_c: Vec<f64>,
    pub test: MetricReport,
    pub train: MetricReport,
    /// Accuracy on each test fold of always predicting the training
    /// majority side.
    pub baseline_accuracy: Vec<f64>,
}

impl CrossEvaluation {
    pub fn baseline_summary(&self) -> Summary {
        Summary::of(&self.baseline_accuracy).expect("at least one fold")
    }
}

/// Outer participant-wise cross evaluation with `C` chosen inside each
/// training split by [`cv_select_c`].
pub fn cross_evaluate(
    trials: &[Trial],
    layout: DesignLayout,
    config: &CrossEvalConfig,
) -> Result<CrossEvaluation> {
    let subjects = subjects_of(trials);
    let outer = config.outer_folds.unwrap_or(subjects.len().div_ceil(2));
    let plan = make_leave2out_plan(&subjects, outer, config.seed)?;

    let results: Vec<(f64, FoldMetrics, FoldMetrics, f64)> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| {
            let train_trials = select_trials(trials, &fold.train);
            let test_trials = select_trials(trials, &fold.test);
            let selection = cv_select_c(
                &train_trials,
                layout,
                &config.grid,
                config.inner_folds,
                config.seed.wrapping_add(1 + i as u64),
                &config.fit,
            )?;
            let fit_config = FitConfig {
                c: selection.best_c,
                ..config.fit.clone()
            };
            let train_rows = encode_trials(&train_trials, layout)?;
            let test_rows = encode_trials(&test_trials, layout)?;
            let model = fit(&train_rows, layout, &fit_config)?.into_converged()?;

            let right_share = train_rows.iter().filter(|r| r.label > 0.0).count() as f64
                / train_rows.len() as f64;
            let majority = if right_share >= 0.5 { 1.0 } else { -1.0 };
            let baseline = test_rows.iter().filter(|r| r.label == majority).count() as f64
                / test_rows.len().max(1) as f64;

            Ok((
                selection.best_c,
                fold_metrics(&model, &test_rows)?,
                fold_metrics(&model, &train_rows)?,
                baseline,
            ))
        })
        .collect::<Result<_>>()?;

    Ok(CrossEvaluation {
        plan,
        selected_c: results.iter().map(|r| r.0).collect(),
        test: MetricReport::from_folds(results.iter().map(|r| r.1).collect())?,
        train: MetricReport::from_folds(results.iter().map(|r| r.2).collect())?,
        baseline_accuracy: results.iter().map(|r| r.3).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub resampled_means: Vec<f64>,
    /// Mean of the original sample.
    pub mean: f64,
    /// Median of the resampled means.
    pub median: f64,
    /// Standard deviation of the resampled means.
    pub standard_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Two-sided p-value against a population mean of zero.
    pub p_value: f64,
}

/// Percentile bootstrap of the mean with a 95 % interval.
pub fn percentile_bootstrap(values: &[f64], n_resamples: usize, seed: u64) -> Result<BootstrapResult> {
    if values.is_empty() {
        return Err(Error::Empty("bootstrap needs at least one value".into()));
    }
    if n_resamples == 0 {
        return Err(Error::InvalidArgument("n_resamples must be positive".into()));
    }
    if n_resamples < 1000 {
        log::warn!("bootstrap with only {n_resamples} resamples");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let resampled_means: Vec<f64> = (0..n_resamples)
        .map(|_| {
            let total: f64 = (0..n).map(|_| values[rng.random_range(0..n)]).sum();
            total / n as f64
        })
        .collect();

    let mut sorted = resampled_means.clone();
    sorted.sort_by(f64::total_cmp);
    let at_most_zero = sorted.iter().filter(|&&m| m <= 0.0).count() as f64 / n_resamples as f64;
    let at_least_zero = sorted.iter().filter(|&&m| m >= 0.0).count() as f64 / n_resamples as f64;

    Ok(BootstrapResult {
        mean: mean(values).expect("non-empty"),
        median: percentile_sorted(&sorted, 0.5),
        standard_error: sample_sd(&resampled_means).unwrap_or(0.0),
        ci_low: percentile_sorted(&sorted, 0.025),
        ci_high: percentile_sorted(&sorted, 0.975),
        p_value: (2.0 * at_most_zero.min(at_least_zero)).min(1.0),
        resampled_means,
    })
}
