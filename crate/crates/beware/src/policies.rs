//! Item-selection strategies.
//!
//! * [`greedy_select`] - exploit the current factor model, no exploration.
//! * [`ucb1_select`] - UCB1 over pooled per-item reward means, ignoring who
//!   is asking.
//! * [`beware_user_select`] - optimism over the confidence ellipsoid of the
//!   requesting user's factor vector (BeWARE.User): score
//!   `U_i . V_j + alpha * sqrt(V_j A^{-1} V_j^T)`.
//! * [`beware_item_select`] - optimism over each candidate item's ellipsoid
//!   (BeWARE.Item): score `U_i . V_j + alpha * sqrt(U_i B(j)^{-1} U_i^T)`.
//!
//! All selectors are pure, break ties toward the smallest item index, and
//! with `alpha = 0` both BeWARE variants pick exactly the greedy item.

use thiserror::Error;

use crate::factorization::{
    item_design, user_design, FactorModel, FactorizationError, Regularization,
};
use crate::ratings::RatingMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("allowed item set is empty")]
    EmptyAllowedSet,
    #[error(transparent)]
    Factorization(#[from] FactorizationError),
}

/// The chosen item with its score split into exploit and exploration parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub item: usize,
    pub score: f64,
    pub exploit: f64,
    pub bonus: f64,
}

/// Running argmax with smallest-index tie-breaking.
struct Best {
    selection: Option<Selection>,
}

impl Best {
    fn new() -> Self {
        Self { selection: None }
    }

    fn offer(&mut self, item: usize, exploit: f64, bonus: f64) {
        let candidate = Selection {
            item,
            score: exploit + bonus,
            exploit,
            bonus,
        };
        let better = match &self.selection {
            None => true,
            Some(best) => {
                candidate.score > best.score
                    || (candidate.score == best.score && candidate.item < best.item)
            }
        };
        if better {
            self.selection = Some(candidate);
        }
    }

    fn take(self) -> Result<Selection, PolicyError> {
        self.selection.ok_or(PolicyError::EmptyAllowedSet)
    }
}

/// Pick the allowed item with the largest predicted rating.
pub fn greedy_select(
    model: &FactorModel,
    user: usize,
    allowed: &[usize],
) -> Result<Selection, PolicyError> {
    let mut best = Best::new();
    for &item in allowed {
        best.offer(item, model.predict(user, item), 0.0);
    }
    best.take()
}

/// Per-item pull counts and running mean rewards, pooled over all users.
#[derive(Debug, Clone)]
pub struct UcbArmStats {
    pulls: Vec<u64>,
    means: Vec<f64>,
    total: u64,
}

impl UcbArmStats {
    pub fn new(n_items: usize) -> Self {
        Self {
            pulls: vec![0; n_items],
            means: vec![0.0; n_items],
            total: 0,
        }
    }

    pub fn n_items(&self) -> usize {
        self.pulls.len()
    }

    pub fn pulls(&self, item: usize) -> u64 {
        self.pulls[item]
    }

    pub fn mean(&self, item: usize) -> f64 {
        self.means[item]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Fold one reward into the running mean for `item`.
    pub fn update(&mut self, item: usize, reward: f64) {
        self.pulls[item] += 1;
        self.total += 1;
        let n = self.pulls[item] as f64;
        self.means[item] += (reward - self.means[item]) / n;
    }
}

/// UCB1: any untried allowed item first (lowest index), otherwise the argmax
/// of `mean_j + sqrt(2 ln t / t_j)` where `t` is the total pull count.
pub fn ucb1_select(stats: &UcbArmStats, allowed: &[usize]) -> Result<Selection, PolicyError> {
    if allowed.is_empty() {
        return Err(PolicyError::EmptyAllowedSet);
    }
    if let Some(&item) = allowed.iter().filter(|&&j| stats.pulls[j] == 0).min() {
        // untried arms carry an infinite exploration bonus
        return Ok(Selection {
            item,
            score: f64::INFINITY,
            exploit: stats.means[item],
            bonus: f64::INFINITY,
        });
    }
    let log_total = (stats.total as f64).ln();
    let mut best = Best::new();
    for &item in allowed {
        let bonus = (2.0 * log_total / stats.pulls[item] as f64).sqrt();
        best.offer(item, stats.means[item], bonus);
    }
    best.take()
}

/// BeWARE.User: optimism over the requesting user's confidence ellipsoid.
///
/// Assumes the model's most recent half-step solved the user side, so that
/// `U_i` is exactly the ridge solution the design matrix `A` describes.
pub fn beware_user_select(
    matrix: &RatingMatrix,
    model: &FactorModel,
    user: usize,
    lambda: f64,
    regularization: Regularization,
    alpha: f64,
    allowed: &[usize],
) -> Result<Selection, PolicyError> {
    if allowed.is_empty() {
        return Err(PolicyError::EmptyAllowedSet);
    }
    debug_assert!(allowed.iter().all(|&j| matrix.rating(user, j).is_none()));
    if alpha == 0.0 {
        return greedy_select(model, user, allowed);
    }
    let design = user_design(matrix, &model.items, user, lambda, regularization);
    let factor = design
        .factor()
        .ok_or(FactorizationError::SingularSystem {
            side: "user",
            index: user,
        })?;
    let mut best = Best::new();
    for &item in allowed {
        let exploit = model.predict(user, item);
        let bonus = alpha * factor.inverse_quadratic(model.items.row(item)).sqrt();
        best.offer(item, exploit, bonus);
    }
    best.take()
}

/// BeWARE.Item: optimism over each candidate item's confidence ellipsoid.
///
/// Builds one design matrix `B(j)` per allowed item; mirrors the user-side
/// assumption, i.e. the model's most recent half-step solved the item side.
///
/// Under the weighted penalty an item with no feedback has `B(j) = 0`: its
/// confidence set is unbounded along every direction, so (like UCB1's
/// untried arms) it carries an infinite bonus and is recommended before any
/// tried item. The standard penalty keeps `B(j) = lambda * I` there and the
/// bonus stays finite.
pub fn beware_item_select(
    matrix: &RatingMatrix,
    model: &FactorModel,
    user: usize,
    lambda: f64,
    regularization: Regularization,
    alpha: f64,
    allowed: &[usize],
) -> Result<Selection, PolicyError> {
    if allowed.is_empty() {
        return Err(PolicyError::EmptyAllowedSet);
    }
    debug_assert!(allowed.iter().all(|&j| matrix.rating(user, j).is_none()));
    let probe = model.users.row(user);
    let mut best = Best::new();
    for &item in allowed {
        let exploit = model.predict(user, item);
        let bonus = if alpha == 0.0 {
            0.0
        } else if regularization == Regularization::Weighted && matrix.item_degree(item) == 0 {
            alpha * f64::INFINITY
        } else {
            let design = item_design(matrix, &model.users, item, lambda, regularization);
            let factor = design
                .factor()
                .ok_or(FactorizationError::SingularSystem {
                    side: "item",
                    index: item,
                })?;
            alpha * factor.inverse_quadratic(probe).sqrt()
        };
        best.offer(item, exploit, bonus);
    }
    best.take()
}
