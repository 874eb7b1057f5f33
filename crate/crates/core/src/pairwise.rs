//! Pairwise first-fixation model.
//!
//! Each trial shows two images side by side and records which one received
//! the first saccade. Trials become sparse rows of a design matrix whose
//! columns are laid out as
//!
//! ```text
//! [0, M)            image columns: +1 for the right image, -1 for the left
//! M                 task column: +1 task target right, -1 left, 0 none
//! M + 1             familiarity column: +1 familiar image right, -1 left, 0 none
//! [M + 2, M + 2 + K) subject columns: +1 for the subject who ran the trial
//! ```
//!
//! and the label is +1 when the right image was fixated first. The image
//! coefficients of the fitted logistic model are the global salience scores;
//! `P(right first) = σ(w_right − w_left + τ·t + φ·f + s_k)`.
//!
//! The coefficients minimise `½‖θ‖² + C·Σ log(1 + exp(−y θᵀx))`. The fit is
//! full-batch gradient descent from θ = 0 with an Armijo backtracking line
//! search; the trial step of every iteration is the Barzilai-Borwein step
//! length, so the method stays monotone while converging far faster than a
//! fixed-step scheme.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::{pairwise_sum, sigmoid, softplus};

/// Rows per parallel work unit. Partial sums are always reduced over these
/// chunks in index order, so thread count never changes a result.
const CHUNK_ROWS: usize = 1024;

const ARMIJO_SLOPE: f64 = 1e-4;
const BACKTRACK_SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    None,
    Left,
    Right,
}

impl Side {
    /// Design-matrix value: right is +1, left −1, none 0.
    pub fn signed(self) -> f64 {
        match self {
            Side::None => 0.0,
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    pub fn mirrored(self) -> Side {
        match self {
            Side::None => Side::None,
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::None => "none",
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(Side::None),
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            _ => Err("expected none|left|right".to_string()),
        }
    }
}

/// Which image received the first fixation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    LeftFirst,
    RightFirst,
}

impl Outcome {
    /// Label convention: right first is +1.
    pub fn label(self) -> f64 {
        match self {
            Outcome::LeftFirst => -1.0,
            Outcome::RightFirst => 1.0,
        }
    }

    pub fn flipped(self) -> Outcome {
        match self {
            Outcome::LeftFirst => Outcome::RightFirst,
            Outcome::RightFirst => Outcome::LeftFirst,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::LeftFirst => "left_first",
            Outcome::RightFirst => "right_first",
        }
    }
}

impl std::str::FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "left_first" => Ok(Outcome::LeftFirst),
            "right_first" => Ok(Outcome::RightFirst),
            _ => Err("expected left_first|right_first".to_string()),
        }
    }
}

/// One pairwise presentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Trial {
    pub subject_id: usize,
    pub left_image: usize,
    pub right_image: usize,
    pub task_target_side: Side,
    /// Side holding the previously seen image when exactly one side is familiar.
    pub familiar_side: Side,
    pub outcome: Outcome,
}

impl Trial {
    /// The same presentation seen in a mirror: images and context sides
    /// swapped and the outcome flipped.
    pub fn mirrored(&self) -> Trial {
        Trial {
            subject_id: self.subject_id,
            left_image: self.right_image,
            right_image: self.left_image,
            task_target_side: self.task_target_side.mirrored(),
            familiar_side: self.familiar_side.mirrored(),
            outcome: self.outcome.flipped(),
        }
    }

    pub fn validate(&self, layout: DesignLayout) -> Result<()> {
        if self.left_image >= layout.images || self.right_image >= layout.images {
            return Err(Error::Dimension(format!(
                "image ids ({}, {}) must be < M = {}",
                self.left_image, self.right_image, layout.images
            )));
        }
        if self.subject_id >= layout.subjects {
            return Err(Error::Dimension(format!(
                "subject id {} must be < K = {}",
                self.subject_id, layout.subjects
            )));
        }
        if self.left_image == self.right_image {
            return Err(Error::InvalidArgument(format!(
                "left and right image are both {}",
                self.left_image
            )));
        }
        Ok(())
    }
}

/// Number of images `M` and subjects `K`; fixes the column layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignLayout {
    pub images: usize,
    pub subjects: usize,
}

impl DesignLayout {
    pub fn new(images: usize, subjects: usize) -> Self {
        Self { images, subjects }
    }

    /// Smallest layout that holds every id in `trials`.
    pub fn covering(trials: &[Trial]) -> Self {
        let images = trials
            .iter()
            .map(|t| t.left_image.max(t.right_image) + 1)
            .max()
            .unwrap_or(0);
        let subjects = trials.iter().map(|t| t.subject_id + 1).max().unwrap_or(0);
        Self { images, subjects }
    }

    pub fn dim(&self) -> usize {
        self.images + 2 + self.subjects
    }

    pub fn task_column(&self) -> usize {
        self.images
    }

    pub fn familiarity_column(&self) -> usize {
        self.images + 1
    }

    pub fn subject_column(&self, subject: usize) -> usize {
        self.images + 2 + subject
    }
}

/// Sparse row of the design matrix plus its ±1 label.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    pub entries: Vec<(usize, f64)>,
    pub label: f64,
}

impl DesignRow {
    pub fn dot(&self, theta: &[f64]) -> f64 {
        self.entries.iter().map(|&(j, v)| v * theta[j]).sum()
    }

    fn max_column(&self) -> Option<usize> {
        self.entries.iter().map(|&(j, _)| j).max()
    }
}

/// Encodes a trial. Entries come out in the order right image, left image,
/// task, familiarity, subject; zero-valued context columns are omitted.
pub fn encode_trial(trial: &Trial, layout: DesignLayout) -> Result<DesignRow> {
    trial.validate(layout)?;
    let mut entries = Vec::with_capacity(5);
    entries.push((trial.right_image, 1.0));
    entries.push((trial.left_image, -1.0));
    let t = trial.task_target_side.signed();
    if t != 0.0 {
        entries.push((layout.task_column(), t));
    }
    let f = trial.familiar_side.signed();
    if f != 0.0 {
        entries.push((layout.familiarity_column(), f));
    }
    entries.push((layout.subject_column(trial.subject_id), 1.0));
    Ok(DesignRow {
        entries,
        label: trial.outcome.label(),
    })
}

pub fn encode_trials(trials: &[Trial], layout: DesignLayout) -> Result<Vec<DesignRow>> {
    trials.iter().map(|t| encode_trial(t, layout)).collect()
}

/// Fitted coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSalienceModel {
    /// Global salience score per image.
    pub w: Vec<f64>,
    /// Task coefficient.
    pub tau: f64,
    /// Familiarity coefficient.
    pub phi: f64,
    /// Lateral bias per subject.
    pub s: Vec<f64>,
    /// Inverse regularisation strength the model was fitted with.
    pub c: f64,
}

impl GlobalSalienceModel {
    pub fn zeros(layout: DesignLayout, c: f64) -> Self {
        Self {
            w: vec![0.0; layout.images],
            tau: 0.0,
            phi: 0.0,
            s: vec![0.0; layout.subjects],
            c,
        }
    }

    pub fn layout(&self) -> DesignLayout {
        DesignLayout::new(self.w.len(), self.s.len())
    }

    /// Splits a flat coefficient vector laid out as the design columns.
    pub fn from_theta(layout: DesignLayout, c: f64, theta: &[f64]) -> Result<Self> {
        if theta.len() != layout.dim() {
            return Err(Error::Dimension(format!(
                "theta has length {}, layout needs {}",
                theta.len(),
                layout.dim()
            )));
        }
        let m = layout.images;
        Ok(Self {
            w: theta[..m].to_vec(),
            tau: theta[m],
            phi: theta[m + 1],
            s: theta[m + 2..].to_vec(),
            c,
        })
    }

    pub fn theta(&self) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.w.len() + 2 + self.s.len());
        theta.extend_from_slice(&self.w);
        theta.push(self.tau);
        theta.push(self.phi);
        theta.extend_from_slice(&self.s);
        theta
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.w.iter().chain(&self.s).all(|v| v.is_finite())
            && self.tau.is_finite()
            && self.phi.is_finite()
            && self.c.is_finite();
        if !finite {
            return Err(Error::Numeric("model has non-finite coefficients".into()));
        }
        if self.c <= 0.0 {
            return Err(Error::InvalidArgument("C must be positive".into()));
        }
        Ok(())
    }

    fn coefficient(&self, column: usize) -> f64 {
        let m = self.w.len();
        if column < m {
            self.w[column]
        } else if column == m {
            self.tau
        } else if column == m + 1 {
            self.phi
        } else {
            self.s[column - m - 2]
        }
    }

    /// Linear predictor θᵀx.
    pub fn logit(&self, row: &DesignRow) -> f64 {
        row.entries
            .iter()
            .map(|&(j, v)| v * self.coefficient(j))
            .sum()
    }

    /// Probability that the right image is fixated first.
    pub fn predict_prob(&self, row: &DesignRow) -> f64 {
        sigmoid(self.logit(row))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Inverse regularisation strength.
    pub c: f64,
    /// Stop once ‖∇‖∞ falls to this value.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep the objective value of every iterate in [`FitOutcome::history`].
    pub record_history: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-8,
            max_iter: 10_000,
            record_history: false,
        }
    }
}

impl FitConfig {
    pub fn with_c(c: f64) -> Self {
        Self {
            c,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// The L2-regularised logistic objective over a fixed set of rows.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    rows: &'a [DesignRow],
    dim: usize,
    c: f64,
}

impl<'a> Problem<'a> {
    pub fn new(rows: &'a [DesignRow], layout: DesignLayout, c: f64) -> Result<Self> {
        let dim = layout.dim();
        for (i, row) in rows.iter().enumerate() {
            if let Some(j) = row.max_column() {
                if j >= dim {
                    return Err(Error::Dimension(format!(
                        "row {i} references column {j}, layout has {dim}"
                    )));
                }
            }
        }
        Ok(Self { rows, dim, c })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::Dimension(format!(
                "theta has length {}, expected {}",
                theta.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `½‖θ‖² + C·Σ log(1 + e^{−y θᵀx})`.
    pub fn objective(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        let partials: Vec<f64> = self
            .rows
            .par_chunks(CHUNK_ROWS)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|r| softplus(-r.label * r.dot(theta)))
                    .sum::<f64>()
            })
            .collect();
        let penalty: Vec<f64> = theta.iter().map(|t| 0.5 * t * t).collect();
        let value = pairwise_sum(&penalty) + self.c * pairwise_sum(&partials);
        if !value.is_finite() {
            return Err(Error::Numeric("objective is not finite".into()));
        }
        Ok(value)
    }

    /// `θ − C·Σ y x σ(−y θᵀx)`.
    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        let dim = self.dim;
        let partials: Vec<Vec<f64>> = self
            .rows
            .par_chunks(CHUNK_ROWS)
            .map(|chunk| {
                let mut g = vec![0.0; dim];
                for r in chunk {
                    let weight = r.label * sigmoid(-r.label * r.dot(theta));
                    for &(j, v) in &r.entries {
                        g[j] += weight * v;
                    }
                }
                g
            })
            .collect();
        let loss_grad = reduce_vectors(partials, dim);
        let grad: Vec<f64> = theta
            .iter()
            .zip(&loss_grad)
            .map(|(t, g)| t - self.c * g)
            .collect();
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("gradient is not finite".into()));
        }
        Ok(grad)
    }

    /// `f(θ + t·d) − f(θ)` evaluated through per-row margin changes, so the
    /// value keeps full relative precision even when it is many orders of
    /// magnitude below `f(θ)`.
    fn change_along(&self, theta: &[f64], dir: &[f64], t: f64) -> f64 {
        let partials: Vec<f64> = self
            .rows
            .par_chunks(CHUNK_ROWS)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|r| {
                        let margin = -r.label * r.dot(theta);
                        let shift = -r.label * t * r.dot(dir);
                        // softplus(m + δ) − softplus(m) = ln(1 + σ(m)·(e^δ − 1))
                        (sigmoid(margin) * shift.exp_m1()).ln_1p()
                    })
                    .sum::<f64>()
            })
            .collect();
        let cross: Vec<f64> = theta.iter().zip(dir).map(|(a, b)| a * b).collect();
        let dir_sq: Vec<f64> = dir.iter().map(|d| d * d).collect();
        t * pairwise_sum(&cross) + 0.5 * t * t * pairwise_sum(&dir_sq) + self.c * pairwise_sum(&partials)
    }
}

fn reduce_vectors(mut parts: Vec<Vec<f64>>, dim: usize) -> Vec<f64> {
    if parts.is_empty() {
        return vec![0.0; dim];
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

pub fn objective(
    model: &GlobalSalienceModel,
    rows: &[DesignRow],
    config: &FitConfig,
) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::Empty("objective needs at least one row".into()));
    }
    Problem::new(rows, model.layout(), config.c)?.objective(&model.theta())
}

pub fn gradient(
    model: &GlobalSalienceModel,
    rows: &[DesignRow],
    config: &FitConfig,
) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::Empty("gradient needs at least one row".into()));
    }
    Problem::new(rows, model.layout(), config.c)?.gradient(&model.theta())
}

/// Result of [`fit`]. A run that stops on `max_iter` is returned with
/// `converged == false`; use [`FitOutcome::into_converged`] to turn that into
/// an error.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: GlobalSalienceModel,
    pub converged: bool,
    pub iterations: usize,
    pub grad_inf_norm: f64,
    pub objective: f64,
    /// Objective per iterate, starting at θ = 0. Empty unless requested.
    pub history: Vec<f64>,
}

impl FitOutcome {
    pub fn into_converged(self) -> Result<GlobalSalienceModel> {
        if self.converged {
            Ok(self.model)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                grad_inf_norm: self.grad_inf_norm,
            })
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    pairwise_sum(&prods)
}

/// Fits the model by gradient descent with Armijo backtracking from θ = 0.
/// The result is a pure function of `(rows, layout, config)`.
pub fn fit(rows: &[DesignRow], layout: DesignLayout, config: &FitConfig) -> Result<FitOutcome> {
    config.validate()?;
    if rows.is_empty() {
        return Err(Error::Empty("fit needs at least one row".into()));
    }
    let problem = Problem::new(rows, layout, config.c)?;

    let mut theta = vec![0.0; problem.dim()];
    let mut value = problem.objective(&theta)?;
    let mut grad = problem.gradient(&theta)?;
    let mut history = Vec::new();
    if config.record_history {
        history.push(value);
    }
    // First trial step: inverse of a crude curvature bound (each row has at
    // most five unit entries and σ' ≤ 1/4).
    let mut step = 1.0 / (1.0 + config.c * 1.25 * rows.len() as f64);
    let mut iterations = 0;
    let mut gnorm = inf_norm(&grad);

    while gnorm > config.tol && iterations < config.max_iter {
        let dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        let slope = -dot(&grad, &grad);
        let mut t = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let change = problem.change_along(&theta, &dir, t);
            if change.is_finite() && change <= ARMIJO_SLOPE * t * slope {
                accepted = Some(t);
                break;
            }
            t *= BACKTRACK_SHRINK;
        }
        let Some(t) = accepted else {
            log::warn!("line search failed at iteration {iterations}, |grad|_inf = {gnorm:e}");
            break;
        };

        let next: Vec<f64> = theta.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
        let next_grad = problem.gradient(&next)?;
        let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 { dot(&s, &s) / sy } else { 2.0 * t };

        theta = next;
        grad = next_grad;
        gnorm = inf_norm(&grad);
        iterations += 1;
        if config.record_history {
            value = problem.objective(&theta)?;
            history.push(value);
        }
        log::debug!("iter {iterations}: step {t:e}, |grad|_inf {gnorm:e}");
    }

    if !config.record_history {
        value = problem.objective(&theta)?;
    }
    let converged = gnorm <= config.tol;
    if !converged {
        log::warn!("fit stopped after {iterations} iterations with |grad|_inf = {gnorm:e}");
    }
    Ok(FitOutcome {
        model: GlobalSalienceModel::from_theta(layout, config.c, &theta)?,
        converged,
        iterations,
        grad_inf_norm: gnorm,
        objective: value,
        history,
    })
}

/// Images by descending score; equal scores keep ascending id order.
pub fn rank_images(model: &GlobalSalienceModel) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = model.w.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}
