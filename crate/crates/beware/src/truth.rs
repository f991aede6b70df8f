//! Dense ground-truth ratings used only by the evaluation harness.
//!
//! The simulator scores choices against these noiseless values; the policies
//! under test never see them. For synthetic data every cell is available;
//! for densified real logs the mask marks the cells with a known rating.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TruthError {
    #[error("ground truth rating for user {user}, item {item} is not available")]
    Unavailable { user: usize, item: usize },
    #[error("user {user}, item {item} is outside the {n_users}x{n_items} ground truth")]
    IndexOutOfRange {
        user: usize,
        item: usize,
        n_users: usize,
        n_items: usize,
    },
    #[error("expected {expected} values for a {n_users}x{n_items} matrix, got {actual}")]
    ShapeMismatch {
        n_users: usize,
        n_items: usize,
        expected: usize,
        actual: usize,
    },
}

/// Dense oracle matrix with an availability mask.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    n_users: usize,
    n_items: usize,
    values: Vec<f64>,
    available: Vec<bool>,
}

impl GroundTruth {
    /// Fully available matrix from row-major values.
    pub fn dense(n_users: usize, n_items: usize, values: Vec<f64>) -> Result<Self, TruthError> {
        let mask = vec![true; n_users * n_items];
        Self::masked(n_users, n_items, values, mask)
    }

    /// Matrix where only mask-true cells may be read.
    pub fn masked(
        n_users: usize,
        n_items: usize,
        values: Vec<f64>,
        available: Vec<bool>,
    ) -> Result<Self, TruthError> {
        let expected = n_users * n_items;
        if values.len() != expected || available.len() != expected {
            return Err(TruthError::ShapeMismatch {
                n_users,
                n_items,
                expected,
                actual: if values.len() != expected {
                    values.len()
                } else {
                    available.len()
                },
            });
        }
        Ok(Self {
            n_users,
            n_items,
            values,
            available,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn is_available(&self, user: usize, item: usize) -> bool {
        user < self.n_users && item < self.n_items && self.available[user * self.n_items + item]
    }

    /// The true rating, readable only where the mask is true.
    pub fn value(&self, user: usize, item: usize) -> Result<f64, TruthError> {
        if user >= self.n_users || item >= self.n_items {
            return Err(TruthError::IndexOutOfRange {
                user,
                item,
                n_users: self.n_users,
                n_items: self.n_items,
            });
        }
        if !self.available[user * self.n_items + item] {
            return Err(TruthError::Unavailable { user, item });
        }
        Ok(self.values[user * self.n_items + item])
    }

    /// Ascending indices of the items with an available rating for `user`.
    pub fn available_items(&self, user: usize) -> Vec<usize> {
        (0..self.n_items)
            .filter(|&j| self.available[user * self.n_items + j])
            .collect()
    }

    /// Number of available cells.
    pub fn available_count(&self) -> usize {
        self.available.iter().filter(|&&a| a).count()
    }

    /// Fraction of cells with a known rating.
    pub fn fill_rate(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.available_count() as f64 / self.values.len() as f64
        }
    }
}
