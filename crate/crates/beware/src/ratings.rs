//! Sparse observed ratings.
//!
//! A [`RatingMatrix`] holds the stream of observations seen so far: for every
//! user the ascending list of items they rated (with the rating), and the
//! mirrored per-item list of raters. Missing values are simply absent; there
//! is no sentinel. Dimensions grow by appending users or items, never by
//! reindexing.

use thiserror::Error;

/// One (user, item, rating) triplet from the observation stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
}

impl Observation {
    pub fn new(user: usize, item: usize, rating: f64) -> Self {
        Self { user, item, rating }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RatingsError {
    #[error("user {user}, item {item} is outside the {n_users}x{n_items} matrix")]
    IndexOutOfRange {
        user: usize,
        item: usize,
        n_users: usize,
        n_items: usize,
    },
    #[error("observation for user {user}, item {item} is already present")]
    DuplicateObservation { user: usize, item: usize },
}

/// Sparse matrix of observed ratings with per-user and per-item index lists.
///
/// Both adjacency lists stay sorted ascending, so iteration order (and hence
/// floating-point summation order downstream) is reproducible.
#[derive(Debug, Clone, Default)]
pub struct RatingMatrix {
    by_user: Vec<Vec<(usize, f64)>>,
    by_item: Vec<Vec<(usize, f64)>>,
    observed: usize,
}

impl RatingMatrix {
    pub fn new(n_users: usize, n_items: usize) -> Self {
        Self {
            by_user: vec![Vec::new(); n_users],
            by_item: vec![Vec::new(); n_items],
            observed: 0,
        }
    }

    pub fn n_users(&self) -> usize {
        self.by_user.len()
    }

    pub fn n_items(&self) -> usize {
        self.by_item.len()
    }

    /// Number of observed entries.
    pub fn observed(&self) -> usize {
        self.observed
    }

    pub fn is_empty(&self) -> bool {
        self.observed == 0
    }

    /// Append a new (unrated) user row; returns its index.
    pub fn add_user(&mut self) -> usize {
        self.by_user.push(Vec::new());
        self.by_user.len() - 1
    }

    /// Append a new (unrated) item column; returns its index.
    pub fn add_item(&mut self) -> usize {
        self.by_item.push(Vec::new());
        self.by_item.len() - 1
    }

    /// Record one observation. Rejects indices outside the current
    /// dimensions and pairs that were already observed.
    pub fn insert(&mut self, obs: Observation) -> Result<(), RatingsError> {
        if obs.user >= self.n_users() || obs.item >= self.n_items() {
            return Err(RatingsError::IndexOutOfRange {
                user: obs.user,
                item: obs.item,
                n_users: self.n_users(),
                n_items: self.n_items(),
            });
        }
        let row = &mut self.by_user[obs.user];
        let pos = match row.binary_search_by_key(&obs.item, |&(j, _)| j) {
            Ok(_) => {
                return Err(RatingsError::DuplicateObservation {
                    user: obs.user,
                    item: obs.item,
                })
            }
            Err(pos) => pos,
        };
        row.insert(pos, (obs.item, obs.rating));
        let col = &mut self.by_item[obs.item];
        let pos = col
            .binary_search_by_key(&obs.user, |&(i, _)| i)
            .expect_err("row and column lists must stay consistent");
        col.insert(pos, (obs.user, obs.rating));
        self.observed += 1;
        Ok(())
    }

    /// The rating user `i` gave item `j`, if observed.
    pub fn rating(&self, user: usize, item: usize) -> Option<f64> {
        let row = self.by_user.get(user)?;
        row.binary_search_by_key(&item, |&(j, _)| j)
            .ok()
            .map(|pos| row[pos].1)
    }

    /// `(item, rating)` pairs for one user, ascending by item.
    ///
    /// Panics if `user` is out of range.
    pub fn row(&self, user: usize) -> &[(usize, f64)] {
        &self.by_user[user]
    }

    /// `(user, rating)` pairs for one item, ascending by user.
    ///
    /// Panics if `item` is out of range.
    pub fn col(&self, item: usize) -> &[(usize, f64)] {
        &self.by_item[item]
    }

    /// Number of items rated by `user`.
    pub fn user_degree(&self, user: usize) -> usize {
        self.by_user[user].len()
    }

    /// Number of users who rated `item`.
    pub fn item_degree(&self, item: usize) -> usize {
        self.by_item[item].len()
    }

    /// The rated item indices and the aligned rating vector for one user.
    pub fn row_ratings(&self, user: usize) -> Result<(Vec<usize>, Vec<f64>), RatingsError> {
        let row = self.by_user.get(user).ok_or(RatingsError::IndexOutOfRange {
            user,
            item: 0,
            n_users: self.n_users(),
            n_items: self.n_items(),
        })?;
        Ok((
            row.iter().map(|&(j, _)| j).collect(),
            row.iter().map(|&(_, r)| r).collect(),
        ))
    }

    /// The rater indices and the aligned rating vector for one item.
    pub fn col_ratings(&self, item: usize) -> Result<(Vec<usize>, Vec<f64>), RatingsError> {
        let col = self.by_item.get(item).ok_or(RatingsError::IndexOutOfRange {
            user: 0,
            item,
            n_users: self.n_users(),
            n_items: self.n_items(),
        })?;
        Ok((
            col.iter().map(|&(i, _)| i).collect(),
            col.iter().map(|&(_, r)| r).collect(),
        ))
    }

    /// Iterate all observations, grouped by user, items ascending.
    pub fn entries(&self) -> impl Iterator<Item = Observation> + '_ {
        self.by_user.iter().enumerate().flat_map(|(user, row)| {
            row.iter()
                .map(move |&(item, rating)| Observation { user, item, rating })
        })
    }
}
