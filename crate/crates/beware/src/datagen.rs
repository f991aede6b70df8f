//! Synthetic block-model ground truth and the noisy observation channel.
//!
//! Every item gets a genre and every user a type, both uniform; the true
//! rating of item `j` by user `i` is `p[genre(j)][type(i)]`, where each table
//! cell is drawn uniformly from the rating levels. Observed feedback is the
//! true rating plus Gaussian noise, never clipped.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::truth::{GroundTruth, TruthError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DatagenError {
    #[error("invalid block model: {0}")]
    InvalidSpec(&'static str),
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockModelSpec {
    pub n_users: usize,
    pub n_items: usize,
    /// Number of item genres.
    pub genres: usize,
    /// Number of user types.
    pub types: usize,
    /// Levels the block table draws from.
    pub rating_levels: Vec<u32>,
    /// Standard deviation of the observation noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl BlockModelSpec {
    /// Levels 1..=5 and noise sigma 0.5.
    pub fn new(n_users: usize, n_items: usize, genres: usize, types: usize, seed: u64) -> Self {
        Self {
            n_users,
            n_items,
            genres,
            types,
            rating_levels: (1..=5).collect(),
            noise_sigma: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.n_users == 0 || self.n_items == 0 {
            return Err(DatagenError::InvalidSpec("matrix dimensions must be positive"));
        }
        if self.genres == 0 {
            return Err(DatagenError::InvalidSpec("genres must be at least 1"));
        }
        if self.types == 0 {
            return Err(DatagenError::InvalidSpec("types must be at least 1"));
        }
        if self.rating_levels.is_empty() {
            return Err(DatagenError::InvalidSpec("rating_levels must be nonempty"));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma.is_infinite() || self.noise_sigma < 0.0 {
            return Err(DatagenError::InvalidSpec(
                "noise_sigma must be finite and nonnegative",
            ));
        }
        Ok(())
    }
}

/// Generate the dense oracle matrix. Deterministic given the seed: item
/// genres are drawn first, then user types, then the block table.
pub fn generate_ground_truth(spec: &BlockModelSpec) -> Result<GroundTruth, DatagenError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let item_genre: Vec<usize> = (0..spec.n_items)
        .map(|_| rng.random_range(0..spec.genres))
        .collect();
    let user_type: Vec<usize> = (0..spec.n_users)
        .map(|_| rng.random_range(0..spec.types))
        .collect();
    let table: Vec<f64> = (0..spec.genres * spec.types)
        .map(|_| spec.rating_levels[rng.random_range(0..spec.rating_levels.len())] as f64)
        .collect();
    let mut values = Vec::with_capacity(spec.n_users * spec.n_items);
    for &t in &user_type {
        for &g in &item_genre {
            values.push(table[g * spec.types + t]);
        }
    }
    Ok(GroundTruth::dense(spec.n_users, spec.n_items, values)
        .expect("generated values match the declared shape"))
}

/// One noisy observation of the true rating: `r* + N(0, sigma)`, unclipped.
pub fn observe_noisy(
    truth: &GroundTruth,
    user: usize,
    item: usize,
    noise_sigma: f64,
    rng: &mut impl Rng,
) -> Result<f64, TruthError> {
    assert!(
        noise_sigma >= 0.0 && noise_sigma.is_finite(),
        "noise_sigma must be finite and nonnegative"
    );
    let value = truth.value(user, item)?;
    if noise_sigma == 0.0 {
        return Ok(value);
    }
    let normal = Normal::new(0.0, noise_sigma).expect("validated sigma");
    Ok(value + normal.sample(rng))
}
