//! Bandit-driven matrix factorization for cold-start recommendation.
//!
//! `beware` implements the BeWARE family of selection strategies ("Bandit
//! WARms-up REcommenders"): alternating-least-squares factor models whose
//! per-row ridge systems double as confidence ellipsoids, so a recommender
//! can trade exploitation against exploration on brand-new users
//! (BeWARE.User) or brand-new items (BeWARE.Item). Greedy factorization and
//! UCB1 over pooled users are included as baselines.
//!
//! The crate also ships the offline evaluation protocol that turns any
//! rating matrix - synthetic block models or densified real logs - into an
//! online benchmark: policies are replayed against the hidden ground truth
//! and judged by cumulative regret. The `beware` binary exposes the whole
//! pipeline (`simulate`, `compare`) and writes plottable CSV curves.
//!
//! Quick tour:
//!
//! ```
//! use beware::datagen::{generate_ground_truth, BlockModelSpec};
//! use beware::factorization::FitConfig;
//! use beware::sim::{aggregate, episode_seeds, run_episodes, EpisodeConfig, Policy};
//!
//! let truth = generate_ground_truth(&BlockModelSpec::new(20, 10, 3, 3, 7)).unwrap();
//! let config = EpisodeConfig::new(Policy::BewareItem, FitConfig::new(3, 0.05), 0.12, 1);
//! let traces = run_episodes(&truth, &config, &episode_seeds(1, 4)).unwrap();
//! let curve = aggregate(&traces).unwrap();
//! assert_eq!(curve.len(), 20 * 10);
//! ```

pub mod datagen;
pub mod factorization;
pub mod ingest;
mod linalg;
pub mod policies;
pub mod ratings;
pub mod sim;
pub mod truth;

pub use factorization::{FactorModel, Factors, FitConfig, Regularization};
pub use policies::{Selection, UcbArmStats};
pub use ratings::{Observation, RatingMatrix};
pub use sim::{EpisodeConfig, Policy, RegretTrace};
pub use truth::GroundTruth;
