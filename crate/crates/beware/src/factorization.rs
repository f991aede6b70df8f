//! Regularized alternating least squares over the observed entries.
//!
//! The loss being minimized is
//!
//! ```text
//!   zeta(U, V) = sum over observed (i, j) of (r_ij - U_i . V_j)^2
//!              + lambda * Omega(U, V)
//! ```
//!
//! with either the standard penalty `Omega = |U|^2 + |V|^2` or the ALS-WR
//! penalty that weights each row by its number of observed ratings. Each
//! half-sweep solves every row exactly through a small ridge system: for
//! user `i` with rated items `J(i)`,
//!
//! ```text
//!   A = V_J^T V_J + lambda * w_i * I,     U_i = A^{-1} V_J^T r_i
//! ```
//!
//! where `w_i` is `#J(i)` (weighted) or 1 (standard). The same `A` is the
//! design matrix whose inverse defines the confidence ellipsoid used by the
//! selection policies, so the row solvers return it alongside the solution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg;
use crate::ratings::RatingMatrix;

/// Which row-penalty weighting the objective uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularization {
    /// `lambda * (|U|^2 + |V|^2)`.
    Standard,
    /// ALS-WR: `lambda * (sum_i #J(i) |U_i|^2 + sum_j #I(j) |V_j|^2)`.
    Weighted,
}

/// Hyperparameters for one alternating-least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub rank: usize,
    pub lambda: f64,
    pub regularization: Regularization,
    pub max_sweeps: usize,
    pub objective_tolerance: f64,
    pub seed: u64,
}

impl FitConfig {
    /// Weighted regularization, 20 sweeps, relative tolerance 1e-6.
    pub fn new(rank: usize, lambda: f64) -> Self {
        Self {
            rank,
            lambda,
            regularization: Regularization::Weighted,
            max_sweeps: 20,
            objective_tolerance: 1e-6,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), FactorizationError> {
        if self.rank == 0 {
            return Err(FactorizationError::InvalidConfig("rank must be at least 1"));
        }
        if self.lambda.is_nan() || self.lambda.is_infinite() || self.lambda < 0.0 {
            return Err(FactorizationError::InvalidConfig(
                "lambda must be finite and nonnegative",
            ));
        }
        if self.max_sweeps == 0 {
            return Err(FactorizationError::InvalidConfig(
                "max_sweeps must be at least 1",
            ));
        }
        if self.objective_tolerance.is_nan() || self.objective_tolerance < 0.0 {
            return Err(FactorizationError::InvalidConfig(
                "objective_tolerance must be nonnegative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorizationError {
    #[error("factors are {rows}x{rank}, expected {want_rows}x{want_rank}")]
    DimensionMismatch {
        rows: usize,
        rank: usize,
        want_rows: usize,
        want_rank: usize,
    },
    #[error("design matrix for {side} {index} is numerically singular")]
    SingularSystem { side: &'static str, index: usize },
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(&'static str),
}

/// A dense factor matrix, one k-vector per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Factors {
    rank: usize,
    rows: Vec<Vec<f64>>,
}

impl Factors {
    pub fn zeros(n_rows: usize, rank: usize) -> Self {
        Self {
            rank,
            rows: vec![vec![0.0; rank]; n_rows],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, rank: usize) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == rank));
        Self { rank, rows }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.rows[index]
    }

    pub fn row_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.rows[index]
    }

    /// Sum of squared row norms, each row weighted by `weight(row_index)`.
    fn weighted_norm(&self, mut weight: impl FnMut(usize) -> f64) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| weight(i) * linalg::dot(r, r))
            .sum()
    }
}

/// Which side a half-sweep most recently re-solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfStep {
    Users,
    Items,
}

/// Factor pair produced by [`als_fit`], with fit metadata.
#[derive(Debug, Clone)]
pub struct FactorModel {
    pub users: Factors,
    pub items: Factors,
    pub config: FitConfig,
    pub last_objective: f64,
    pub sweeps_run: usize,
    pub last_half_step: HalfStep,
}

impl FactorModel {
    /// Predicted rating `U_i . V_j`.
    pub fn predict(&self, user: usize, item: usize) -> f64 {
        linalg::dot(self.users.row(user), self.items.row(item))
    }
}

/// Symmetric k x k design matrix (`A` for a user, `B(j)` for an item).
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    rank: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Cholesky factor; fails when the matrix is numerically singular,
    /// which can only happen at `lambda = 0`.
    pub fn factor(&self) -> Option<DesignFactor> {
        linalg::cholesky(&self.data, self.rank).map(|lower| DesignFactor {
            rank: self.rank,
            lower,
        })
    }
}

/// Cholesky factor of a design matrix.
#[derive(Debug, Clone)]
pub struct DesignFactor {
    rank: usize,
    lower: Vec<f64>,
}

impl DesignFactor {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        linalg::cholesky_solve(&self.lower, self.rank, rhs)
    }

    /// The quadratic form `w A^{-1} w^T`; its square root is the width of
    /// the confidence ellipsoid along `w`.
    pub fn inverse_quadratic(&self, w: &[f64]) -> f64 {
        let y = linalg::forward_substitute(&self.lower, self.rank, w);
        linalg::dot(&y, &y)
    }
}

fn check_shape(
    factors: &Factors,
    want_rows: usize,
    want_rank: usize,
) -> Result<(), FactorizationError> {
    if factors.n_rows() != want_rows || factors.rank() != want_rank {
        return Err(FactorizationError::DimensionMismatch {
            rows: factors.n_rows(),
            rank: factors.rank(),
            want_rows,
            want_rank,
        });
    }
    Ok(())
}

/// The regularized squared-error objective `zeta(U, V)`.
pub fn objective(
    users: &Factors,
    items: &Factors,
    matrix: &RatingMatrix,
    config: &FitConfig,
) -> Result<f64, FactorizationError> {
    check_shape(users, matrix.n_users(), config.rank)?;
    check_shape(items, matrix.n_items(), config.rank)?;
    let mut residual = 0.0;
    for obs in matrix.entries() {
        let err = obs.rating - linalg::dot(users.row(obs.user), items.row(obs.item));
        residual += err * err;
    }
    let penalty = match config.regularization {
        Regularization::Standard => users.weighted_norm(|_| 1.0) + items.weighted_norm(|_| 1.0),
        Regularization::Weighted => {
            users.weighted_norm(|i| matrix.user_degree(i) as f64)
                + items.weighted_norm(|j| matrix.item_degree(j) as f64)
        }
    };
    Ok(residual + config.lambda * penalty)
}

fn penalty_weight(regularization: Regularization, degree: usize) -> f64 {
    match regularization {
        Regularization::Standard => 1.0,
        // max(1, degree) keeps the degenerate cold-row matrix invertible;
        // the solution there is 0 and the ellipsoid is maximally wide.
        Regularization::Weighted => degree.max(1) as f64,
    }
}

fn design_from_rows(
    fixed: &Factors,
    observed: &[(usize, f64)],
    lambda: f64,
    regularization: Regularization,
) -> DesignMatrix {
    let k = fixed.rank();
    let mut data = vec![0.0; k * k];
    for &(row, _) in observed {
        linalg::accumulate_outer(&mut data, k, fixed.row(row));
    }
    linalg::mirror_upper(&mut data, k);
    linalg::add_diagonal(
        &mut data,
        k,
        lambda * penalty_weight(regularization, observed.len()),
    );
    DesignMatrix { rank: k, data }
}

/// The user-side design matrix `A = V_J^T V_J + lambda * w * I`.
pub fn user_design(
    matrix: &RatingMatrix,
    items: &Factors,
    user: usize,
    lambda: f64,
    regularization: Regularization,
) -> DesignMatrix {
    design_from_rows(items, matrix.row(user), lambda, regularization)
}

/// The item-side design matrix `B(j) = U_I^T U_I + lambda * w * I`.
pub fn item_design(
    matrix: &RatingMatrix,
    users: &Factors,
    item: usize,
    lambda: f64,
    regularization: Regularization,
) -> DesignMatrix {
    design_from_rows(users, matrix.col(item), lambda, regularization)
}

fn solve_row(
    fixed: &Factors,
    observed: &[(usize, f64)],
    config: &FitConfig,
    side: &'static str,
    index: usize,
) -> Result<(Vec<f64>, DesignMatrix), FactorizationError> {
    let k = fixed.rank();
    let design = design_from_rows(fixed, observed, config.lambda, config.regularization);
    if observed.is_empty() {
        if config.lambda > 0.0 {
            return Ok((vec![0.0; k], design));
        }
        return Err(FactorizationError::SingularSystem { side, index });
    }
    let mut rhs = vec![0.0; k];
    for &(row, rating) in observed {
        for (acc, &f) in rhs.iter_mut().zip(fixed.row(row)) {
            *acc += f * rating;
        }
    }
    let solution = match design.factor() {
        Some(factor) => factor.solve(&rhs),
        // lambda = 0 can leave the normal matrix semidefinite; fall back to
        // the minimum-norm least-squares solution.
        None => linalg::pseudo_solve(design.as_slice(), k, &rhs),
    };
    if solution.iter().any(|x| !x.is_finite()) {
        return Err(FactorizationError::SingularSystem { side, index });
    }
    Ok((solution, design))
}

/// Reusable buffers for the per-row solves inside a half-sweep; one refit
/// touches every row, so allocation per row would dominate small ranks.
struct RowScratch {
    design: Vec<f64>,
    rhs: Vec<f64>,
    pristine: Vec<f64>,
}

impl RowScratch {
    fn new(k: usize) -> Self {
        Self {
            design: vec![0.0; k * k],
            rhs: vec![0.0; k],
            pristine: Vec::new(),
        }
    }
}

/// Same computation as [`solve_row`] (bit-identical results), writing the
/// solution into `out` without allocating.
fn solve_row_into(
    fixed: &Factors,
    observed: &[(usize, f64)],
    config: &FitConfig,
    side: &'static str,
    index: usize,
    scratch: &mut RowScratch,
    out: &mut [f64],
) -> Result<(), FactorizationError> {
    let k = fixed.rank();
    if observed.is_empty() {
        if config.lambda > 0.0 {
            out.fill(0.0);
            return Ok(());
        }
        return Err(FactorizationError::SingularSystem { side, index });
    }
    scratch.design.fill(0.0);
    for &(row, _) in observed {
        linalg::accumulate_outer(&mut scratch.design, k, fixed.row(row));
    }
    linalg::mirror_upper(&mut scratch.design, k);
    linalg::add_diagonal(
        &mut scratch.design,
        k,
        config.lambda * penalty_weight(config.regularization, observed.len()),
    );
    scratch.rhs.fill(0.0);
    for &(row, rating) in observed {
        for (acc, &f) in scratch.rhs.iter_mut().zip(fixed.row(row)) {
            *acc += f * rating;
        }
    }
    if config.lambda == 0.0 {
        // keep the normal matrix around for the least-squares fallback
        scratch.pristine.clear();
        scratch.pristine.extend_from_slice(&scratch.design);
    }
    if linalg::cholesky_in_place(&mut scratch.design, k) {
        linalg::cholesky_solve_in_place(&scratch.design, k, &mut scratch.rhs);
        out.copy_from_slice(&scratch.rhs);
    } else if config.lambda == 0.0 {
        out.copy_from_slice(&linalg::pseudo_solve(&scratch.pristine, k, &scratch.rhs));
    } else {
        return Err(FactorizationError::SingularSystem { side, index });
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err(FactorizationError::SingularSystem { side, index });
    }
    Ok(())
}

/// Closed-form ridge solve for one user row against fixed item factors.
///
/// Returns the minimizer together with the design matrix `A`. A user with no
/// ratings gets the zero vector and `A = lambda * I` (requires `lambda > 0`).
pub fn solve_user_row(
    user: usize,
    items: &Factors,
    matrix: &RatingMatrix,
    config: &FitConfig,
) -> Result<(Vec<f64>, DesignMatrix), FactorizationError> {
    check_shape(items, matrix.n_items(), config.rank)?;
    solve_row(items, matrix.row(user), config, "user", user)
}

/// Closed-form ridge solve for one item row against fixed user factors.
pub fn solve_item_row(
    item: usize,
    users: &Factors,
    matrix: &RatingMatrix,
    config: &FitConfig,
) -> Result<(Vec<f64>, DesignMatrix), FactorizationError> {
    check_shape(users, matrix.n_users(), config.rank)?;
    solve_row(users, matrix.col(item), config, "item", item)
}

/// Re-solve every user row with the item factors fixed. Exact per-row
/// minimization, so the objective never increases. The refreshed objective
/// is accumulated in the same pass (same summation order as [`objective`]).
pub fn user_half_sweep(
    model: &mut FactorModel,
    matrix: &RatingMatrix,
) -> Result<(), FactorizationError> {
    check_shape(&model.users, matrix.n_users(), model.config.rank)?;
    check_shape(&model.items, matrix.n_items(), model.config.rank)?;
    let mut scratch = RowScratch::new(model.config.rank);
    let mut residual = 0.0;
    let mut user_penalty = 0.0;
    for user in 0..matrix.n_users() {
        let row = matrix.row(user);
        solve_row_into(
            &model.items,
            row,
            &model.config,
            "user",
            user,
            &mut scratch,
            model.users.row_mut(user),
        )?;
        let solved = model.users.row(user);
        for &(item, rating) in row {
            let err = rating - linalg::dot(solved, model.items.row(item));
            residual += err * err;
        }
        let weight = match model.config.regularization {
            Regularization::Standard => 1.0,
            Regularization::Weighted => row.len() as f64,
        };
        user_penalty += weight * linalg::dot(solved, solved);
    }
    let item_penalty = match model.config.regularization {
        Regularization::Standard => model.items.weighted_norm(|_| 1.0),
        Regularization::Weighted => model.items.weighted_norm(|j| matrix.item_degree(j) as f64),
    };
    model.last_half_step = HalfStep::Users;
    model.last_objective = residual + model.config.lambda * (user_penalty + item_penalty);
    Ok(())
}

/// Re-solve every item row with the user factors fixed.
pub fn item_half_sweep(
    model: &mut FactorModel,
    matrix: &RatingMatrix,
) -> Result<(), FactorizationError> {
    check_shape(&model.users, matrix.n_users(), model.config.rank)?;
    check_shape(&model.items, matrix.n_items(), model.config.rank)?;
    let mut scratch = RowScratch::new(model.config.rank);
    let mut item_penalty = 0.0;
    for item in 0..matrix.n_items() {
        let col = matrix.col(item);
        solve_row_into(
            &model.users,
            col,
            &model.config,
            "item",
            item,
            &mut scratch,
            model.items.row_mut(item),
        )?;
        let solved = model.items.row(item);
        let weight = match model.config.regularization {
            Regularization::Standard => 1.0,
            Regularization::Weighted => col.len() as f64,
        };
        item_penalty += weight * linalg::dot(solved, solved);
    }
    // residuals change with the item side, so re-scan user-major to keep the
    // summation order of `objective`
    let mut residual = 0.0;
    for user in 0..matrix.n_users() {
        let u = model.users.row(user);
        for &(item, rating) in matrix.row(user) {
            let err = rating - linalg::dot(u, model.items.row(item));
            residual += err * err;
        }
    }
    let user_penalty = match model.config.regularization {
        Regularization::Standard => model.users.weighted_norm(|_| 1.0),
        Regularization::Weighted => model.users.weighted_norm(|i| matrix.user_degree(i) as f64),
    };
    model.last_half_step = HalfStep::Items;
    model.last_objective = residual + model.config.lambda * (user_penalty + item_penalty);
    Ok(())
}

/// Item factors for a cold start: small seeded uniform values, except the
/// first latent coordinate of each item, which is set to the item's observed
/// column mean (0 when unrated).
fn initial_items(matrix: &RatingMatrix, config: &FitConfig) -> Factors {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut items = Factors::zeros(matrix.n_items(), config.rank);
    for j in 0..matrix.n_items() {
        let row = items.row_mut(j);
        for coord in row.iter_mut() {
            *coord = rng.random_range(-0.01..0.01);
        }
        let col = matrix.col(j);
        row[0] = if col.is_empty() {
            0.0
        } else {
            col.iter().map(|&(_, r)| r).sum::<f64>() / col.len() as f64
        };
    }
    items
}

/// Alternating least squares.
///
/// Sweeps (full user solve, then full item solve) run until `max_sweeps` or
/// until the relative objective change drops below `objective_tolerance`;
/// one final user half-sweep follows, so the returned factors always have
/// the user side optimal against the item side. With `warm_start` the fit
/// begins from the given factors instead of the random initialization.
pub fn als_fit(
    matrix: &RatingMatrix,
    config: &FitConfig,
    warm_start: Option<&FactorModel>,
) -> Result<FactorModel, FactorizationError> {
    config.validate()?;
    let (users, items) = match warm_start {
        Some(previous) => {
            check_shape(&previous.users, matrix.n_users(), config.rank)?;
            check_shape(&previous.items, matrix.n_items(), config.rank)?;
            (previous.users.clone(), previous.items.clone())
        }
        None => (
            Factors::zeros(matrix.n_users(), config.rank),
            initial_items(matrix, config),
        ),
    };
    let mut model = FactorModel {
        last_objective: objective(&users, &items, matrix, config)?,
        users,
        items,
        config: config.clone(),
        sweeps_run: 0,
        last_half_step: HalfStep::Items,
    };
    for _ in 0..config.max_sweeps {
        let previous = model.last_objective;
        user_half_sweep(&mut model, matrix)?;
        item_half_sweep(&mut model, matrix)?;
        model.sweeps_run += 1;
        if (previous - model.last_objective).abs()
            <= config.objective_tolerance * (1.0 + previous)
        {
            break;
        }
    }
    user_half_sweep(&mut model, matrix)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratings::Observation;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example_matrix() -> RatingMatrix {
        let mut m = RatingMatrix::new(4, 8);
        for (u, j, r) in [
            (0, 2, 3.0),
            (0, 5, 2.0),
            (1, 0, 1.0),
            (1, 3, 3.0),
            (1, 5, 5.0),
            (2, 1, 1.0),
            (3, 3, 5.0),
            (3, 5, 3.0),
            (3, 6, 1.0),
        ] {
            m.insert(Observation::new(u, j, r)).unwrap();
        }
        m
    }

    fn random_matrix(
        rng: &mut ChaCha8Rng,
        n_users: usize,
        n_items: usize,
        density: f64,
    ) -> RatingMatrix {
        let mut m = RatingMatrix::new(n_users, n_items);
        for i in 0..n_users {
            for j in 0..n_items {
                if rng.random::<f64>() < density {
                    m.insert(Observation::new(i, j, rng.random_range(1.0..5.0)))
                        .unwrap();
                }
            }
        }
        m
    }

    fn random_factors(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Factors {
        Factors::from_rows(
            (0..n)
                .map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
            k,
        )
    }

    /// Independent dense normal-equations oracle: materialize the design
    /// rows, form `(F^T F + lambda w I) x = F^T r` with nalgebra, LU-solve
    /// (SVD least-squares when singular).
    fn ridge_oracle(
        fixed: &Factors,
        observed: &[(usize, f64)],
        lambda: f64,
        weight: f64,
    ) -> Vec<f64> {
        let k = fixed.rank();
        let n = observed.len();
        let design = DMatrix::from_fn(n, k, |r, c| fixed.row(observed[r].0)[c]);
        let targets = DVector::from_fn(n, |r, _| observed[r].1);
        let normal = design.transpose() * &design + DMatrix::identity(k, k) * (lambda * weight);
        let rhs = design.transpose() * targets;
        match normal.clone().lu().solve(&rhs) {
            Some(x) if x.iter().all(|v| v.is_finite()) && lambda > 0.0 => x.as_slice().to_vec(),
            _ => normal
                .svd(true, true)
                .solve(&rhs, 1e-12)
                .expect("svd solve")
                .as_slice()
                .to_vec(),
        }
    }

    #[test]
    fn objective_of_zero_factors_is_sum_of_squares() {
        let m = example_matrix();
        let cfg = FitConfig::new(2, 0.7);
        let users = Factors::zeros(4, 2);
        let items = Factors::zeros(8, 2);
        let z = objective(&users, &items, &m, &cfg).unwrap();
        assert_relative_eq!(z, 84.0);
    }

    #[test]
    fn objective_of_empty_matrix_without_penalty_is_zero() {
        let m = RatingMatrix::new(3, 3);
        let cfg = FitConfig::new(2, 0.0);
        let users = Factors::zeros(3, 2);
        let items = Factors::zeros(3, 2);
        assert_eq!(objective(&users, &items, &m, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn objective_of_exact_rank_one_fit_is_zero() {
        let mut m = RatingMatrix::new(3, 2);
        let u = [1.0, 2.0, -1.0];
        let v = [3.0, 0.5];
        for (i, &ui) in u.iter().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                m.insert(Observation::new(i, j, ui * vj)).unwrap();
            }
        }
        let cfg = FitConfig::new(1, 0.0);
        let users = Factors::from_rows(u.iter().map(|&x| vec![x]).collect(), 1);
        let items = Factors::from_rows(v.iter().map(|&x| vec![x]).collect(), 1);
        assert_relative_eq!(objective(&users, &items, &m, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn objective_rejects_wrong_shapes() {
        let m = example_matrix();
        let cfg = FitConfig::new(2, 0.1);
        let users = Factors::zeros(3, 2);
        let items = Factors::zeros(8, 2);
        assert!(matches!(
            objective(&users, &items, &m, &cfg),
            Err(FactorizationError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_rating_unregularized_solve() {
        let mut m = RatingMatrix::new(1, 1);
        m.insert(Observation::new(0, 0, 2.0)).unwrap();
        let items = Factors::from_rows(vec![vec![1.0]], 1);
        let cfg = FitConfig {
            lambda: 0.0,
            ..FitConfig::new(1, 0.0)
        };
        let (u, a) = solve_user_row(0, &items, &m, &cfg).unwrap();
        assert_relative_eq!(u[0], 2.0);
        assert_relative_eq!(a.as_slice()[0], 1.0);
    }

    #[test]
    fn single_rating_scalar_ridge() {
        let mut m = RatingMatrix::new(1, 1);
        m.insert(Observation::new(0, 0, 2.0)).unwrap();
        let items = Factors::from_rows(vec![vec![1.0]], 1);
        let cfg = FitConfig::new(1, 0.5);
        let (u, a) = solve_user_row(0, &items, &m, &cfg).unwrap();
        assert_relative_eq!(u[0], 4.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(a.as_slice()[0], 1.5);
    }

    #[test]
    fn user_solve_matches_dense_ridge_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = random_matrix(&mut rng, 10, 12, 0.5);
        let items = random_factors(&mut rng, 12, 3);
        let cfg = FitConfig::new(3, 0.05);
        for user in 0..10 {
            if m.user_degree(user) == 0 {
                continue;
            }
            let (u, _) = solve_user_row(user, &items, &m, &cfg).unwrap();
            let oracle = ridge_oracle(&items, m.row(user), 0.05, m.user_degree(user) as f64);
            for c in 0..3 {
                assert_relative_eq!(u[c], oracle[c], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn item_solve_matches_dense_ridge_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let m = random_matrix(&mut rng, 12, 10, 0.5);
        let users = random_factors(&mut rng, 12, 3);
        let cfg = FitConfig::new(3, 0.05);
        for item in 0..10 {
            if m.item_degree(item) == 0 {
                continue;
            }
            let (v, _) = solve_item_row(item, &users, &m, &cfg).unwrap();
            let oracle = ridge_oracle(&users, m.col(item), 0.05, m.item_degree(item) as f64);
            for c in 0..3 {
                assert_relative_eq!(v[c], oracle[c], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn single_rater_item_solve() {
        let mut m = RatingMatrix::new(1, 1);
        m.insert(Observation::new(0, 0, 5.0)).unwrap();
        let users = Factors::from_rows(vec![vec![1.0]], 1);
        let cfg = FitConfig {
            lambda: 0.0,
            ..FitConfig::new(1, 0.0)
        };
        let (v, _) = solve_item_row(0, &users, &m, &cfg).unwrap();
        assert_relative_eq!(v[0], 5.0);
    }

    #[test]
    fn cold_row_degenerate_rule() {
        let m = RatingMatrix::new(2, 2);
        let items = Factors::from_rows(vec![vec![1.0], vec![2.0]], 1);
        let cfg = FitConfig::new(1, 0.5);
        let (u, a) = solve_user_row(0, &items, &m, &cfg).unwrap();
        assert_eq!(u, vec![0.0]);
        assert_relative_eq!(a.as_slice()[0], 0.5);
        // with lambda = 0 the same row is a singular system
        let cfg0 = FitConfig {
            lambda: 0.0,
            ..cfg
        };
        assert!(matches!(
            solve_user_row(0, &items, &m, &cfg0),
            Err(FactorizationError::SingularSystem { .. })
        ));
    }

    #[test]
    fn design_matrix_is_symmetric_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 8, 8, 0.6);
        let items = random_factors(&mut rng, 8, 4);
        for reg in [Regularization::Standard, Regularization::Weighted] {
            for user in 0..8 {
                let a = user_design(&m, &items, user, 0.2, reg);
                let s = a.as_slice();
                for r in 0..4 {
                    for c in 0..4 {
                        assert!((s[r * 4 + c] - s[c * 4 + r]).abs() <= 1e-12);
                    }
                }
                assert!(a.factor().is_some(), "lambda > 0 must stay PD");
            }
        }
    }

    #[test]
    fn standard_and_weighted_agree_on_degree_one_pattern() {
        // permutation pattern: every user rated exactly one item and vice versa
        let mut m = RatingMatrix::new(4, 4);
        for i in 0..4 {
            m.insert(Observation::new(i, (i + 1) % 4, 1.0 + i as f64))
                .unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let items = random_factors(&mut rng, 4, 2);
        let std_cfg = FitConfig {
            regularization: Regularization::Standard,
            ..FitConfig::new(2, 0.3)
        };
        let wr_cfg = FitConfig {
            regularization: Regularization::Weighted,
            ..FitConfig::new(2, 0.3)
        };
        for user in 0..4 {
            let (a, _) = solve_user_row(user, &items, &m, &std_cfg).unwrap();
            let (b, _) = solve_user_row(user, &items, &m, &wr_cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn exact_recovery_of_noise_free_rank_two_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let true_users = random_factors(&mut rng, 20, 2);
        let true_items = random_factors(&mut rng, 15, 2);
        let mut m = RatingMatrix::new(20, 15);
        for i in 0..20 {
            for j in 0..15 {
                let r = linalg::dot(true_users.row(i), true_items.row(j));
                m.insert(Observation::new(i, j, r)).unwrap();
            }
        }
        let cfg = FitConfig {
            seed: 3,
            ..FitConfig::new(2, 1e-6)
        };
        let model = als_fit(&m, &cfg, None).unwrap();
        let mut sq = 0.0;
        for i in 0..20 {
            for j in 0..15 {
                let err = model.predict(i, j) - linalg::dot(true_users.row(i), true_items.row(j));
                sq += err * err;
            }
        }
        let rmse = (sq / 300.0).sqrt();
        assert!(rmse < 1e-3, "reconstruction rmse {rmse} too large");
    }

    #[test]
    fn warm_start_at_optimum_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = random_matrix(&mut rng, 12, 9, 0.4);
        // converge for real before testing the fixed point
        let cfg = FitConfig {
            max_sweeps: 500,
            objective_tolerance: 1e-13,
            ..FitConfig::new(3, 0.1)
        };
        let fitted = als_fit(&m, &cfg, None).unwrap();
        assert!(fitted.sweeps_run < 500, "fit should converge, not time out");
        let refit_cfg = FitConfig {
            max_sweeps: 1,
            ..cfg
        };
        let refit = als_fit(&m, &refit_cfg, Some(&fitted)).unwrap();
        let rel = (refit.last_objective - fitted.last_objective).abs()
            / (1.0 + fitted.last_objective);
        assert!(rel <= 1e-9, "objective moved by {rel} from the fixed point");
    }

    #[test]
    fn objective_is_monotone_across_half_sweeps() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for reg in [Regularization::Standard, Regularization::Weighted] {
            let m = random_matrix(&mut rng, 15, 10, 0.3);
            let cfg = FitConfig {
                regularization: reg,
                ..FitConfig::new(3, 0.2)
            };
            let mut model = FactorModel {
                users: Factors::zeros(15, 3),
                items: initial_items(&m, &cfg),
                last_objective: 0.0,
                config: cfg.clone(),
                sweeps_run: 0,
                last_half_step: HalfStep::Items,
            };
            model.last_objective = objective(&model.users, &model.items, &m, &cfg).unwrap();
            let mut previous = model.last_objective;
            for _ in 0..6 {
                user_half_sweep(&mut model, &m).unwrap();
                assert!(model.last_objective <= previous + 1e-9 * (1.0 + previous));
                previous = model.last_objective;
                item_half_sweep(&mut model, &m).unwrap();
                assert!(model.last_objective <= previous + 1e-9 * (1.0 + previous));
                previous = model.last_objective;
            }
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let m = random_matrix(&mut rng, 10, 8, 0.5);
        let cfg = FitConfig {
            seed: 11,
            ..FitConfig::new(3, 0.05)
        };
        let a = als_fit(&m, &cfg, None).unwrap();
        let b = als_fit(&m, &cfg, None).unwrap();
        assert_eq!(a.users, b.users);
        assert_eq!(a.items, b.items);
        assert_eq!(a.last_objective, b.last_objective);
    }

    #[test]
    fn fit_ends_with_user_half_step_and_fresh_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let m = random_matrix(&mut rng, 8, 6, 0.5);
        let cfg = FitConfig::new(2, 0.1);
        let model = als_fit(&m, &cfg, None).unwrap();
        assert_eq!(model.last_half_step, HalfStep::Users);
        let recomputed = objective(&model.users, &model.items, &m, &cfg).unwrap();
        assert_relative_eq!(model.last_objective, recomputed, max_relative = 1e-12);
        // the returned user side is stationary: re-solving changes nothing
        let mut clone = model.clone();
        user_half_sweep(&mut clone, &m).unwrap();
        for i in 0..8 {
            for c in 0..2 {
                assert_relative_eq!(clone.users.row(i)[c], model.users.row(i)[c], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn stationarity_by_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let m = random_matrix(&mut rng, 8, 6, 0.6);
        let cfg = FitConfig::new(2, 0.1);
        let model = als_fit(&m, &cfg, None).unwrap();
        let step = 1e-5;
        let scale = 1.0 + model.last_objective.abs();
        for user in 0..8 {
            for coord in 0..2 {
                let mut plus = model.users.clone();
                plus.row_mut(user)[coord] += step;
                let mut minus = model.users.clone();
                minus.row_mut(user)[coord] -= step;
                let grad = (objective(&plus, &model.items, &m, &cfg).unwrap()
                    - objective(&minus, &model.items, &m, &cfg).unwrap())
                    / (2.0 * step);
                assert!(
                    grad.abs() / scale < 1e-4,
                    "user {user} coord {coord}: gradient {grad}"
                );
            }
        }
    }
}
