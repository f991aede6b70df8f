//! Online evaluation protocol: sequential user draws, policy selection,
//! noisy feedback, and regret bookkeeping.
//!
//! An episode starts from an empty rating matrix over the ground truth's
//! dimensions and loops until every user has consumed every item available
//! to them: draw a user uniformly among those with something left, let the
//! policy pick among that user's unconsumed items, record the immediate
//! regret against the noiseless truth, feed the noisy rating back into the
//! matrix, and refresh the policy state. Regret is never visible to the
//! policy; it is harness-side bookkeeping only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::datagen::observe_noisy;
use crate::factorization::{
    als_fit, item_half_sweep, FactorModel, FactorizationError, FitConfig, Regularization,
};
use crate::policies::{
    beware_item_select, beware_user_select, greedy_select, ucb1_select, PolicyError, UcbArmStats,
};
use crate::ratings::{Observation, RatingMatrix, RatingsError};
use crate::truth::{GroundTruth, TruthError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Ratings(#[from] RatingsError),
    #[error(transparent)]
    Truth(#[from] TruthError),
    #[error(transparent)]
    Factorization(#[from] FactorizationError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("regret traces have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid episode configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("unknown policy name {0:?}")]
    UnknownPolicy(String),
}

/// The selection strategies the harness can run. `Oracle` and `Random` are
/// harness baselines: the oracle reads the ground truth (zero regret by
/// construction) and `Random` picks uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    GreedyAls,
    GreedyAlsWr,
    UcbAllUsers,
    BewareUser,
    BewareAlsUser,
    BewareItem,
    BewareAlsItem,
    Oracle,
    Random,
}

impl Policy {
    pub const ALL: [Policy; 9] = [
        Policy::GreedyAls,
        Policy::GreedyAlsWr,
        Policy::UcbAllUsers,
        Policy::BewareUser,
        Policy::BewareAlsUser,
        Policy::BewareItem,
        Policy::BewareAlsItem,
        Policy::Oracle,
        Policy::Random,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Policy::GreedyAls => "greedy-als",
            Policy::GreedyAlsWr => "greedy-als-wr",
            Policy::UcbAllUsers => "ucb-all-users",
            Policy::BewareUser => "beware-user",
            Policy::BewareAlsUser => "beware-als-user",
            Policy::BewareItem => "beware-item",
            Policy::BewareAlsItem => "beware-als-item",
            Policy::Oracle => "oracle",
            Policy::Random => "random",
        }
    }

    /// Does this policy maintain a factor model?
    pub fn uses_factors(&self) -> bool {
        matches!(
            self,
            Policy::GreedyAls
                | Policy::GreedyAlsWr
                | Policy::BewareUser
                | Policy::BewareAlsUser
                | Policy::BewareItem
                | Policy::BewareAlsItem
        )
    }

    /// Which row penalty this policy's factorization uses.
    pub fn regularization(&self) -> Regularization {
        match self {
            Policy::GreedyAls | Policy::BewareAlsUser | Policy::BewareAlsItem => {
                Regularization::Standard
            }
            _ => Regularization::Weighted,
        }
    }

    /// Item-side policies look at the ellipsoids of the candidate items and
    /// expect the factorization to have solved the item side last.
    pub fn item_side(&self) -> bool {
        matches!(self, Policy::BewareItem | Policy::BewareAlsItem)
    }
}

impl std::str::FromStr for Policy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let canon = s.trim().to_ascii_lowercase();
        let policy = match canon.as_str() {
            "greedy-als" | "greedy.als" => Policy::GreedyAls,
            "greedy-als-wr" | "greedy.als-wr" | "greedy-alswr" => Policy::GreedyAlsWr,
            "ucb-all-users" | "ucb.on.all.users" | "ucb" => Policy::UcbAllUsers,
            "beware-user" | "beware.user" | "beware.users" => Policy::BewareUser,
            "beware-als-user" | "beware.als.user" => Policy::BewareAlsUser,
            "beware-item" | "beware.item" | "beware.items" => Policy::BewareItem,
            "beware-als-item" | "beware.als.item" => Policy::BewareAlsItem,
            "oracle" => Policy::Oracle,
            "random" => Policy::Random,
            _ => return Err(SimError::UnknownPolicy(s.to_owned())),
        };
        Ok(policy)
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything one episode needs besides the ground truth.
#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    pub policy: Policy,
    pub fit: FitConfig,
    /// Exploration scale of the ellipsoid bonus.
    pub alpha: f64,
    /// Sweeps for each warm-started refit.
    pub refit_sweeps: usize,
    pub seed: u64,
    /// Standard deviation of the feedback noise (0 replays exact ratings).
    pub noise_sigma: f64,
    /// Refit the factor model every this many observations.
    pub refit_every: usize,
    /// If nonzero, throw the warm start away every this many observations.
    pub cold_refit_every: usize,
    /// Fraction of cells revealed (and consumed) before the episode starts.
    pub warmup_frac: f64,
}

impl EpisodeConfig {
    pub fn new(policy: Policy, fit: FitConfig, alpha: f64, seed: u64) -> Self {
        Self {
            policy,
            fit,
            alpha,
            refit_sweeps: 2,
            seed,
            noise_sigma: 0.5,
            refit_every: 1,
            cold_refit_every: 0,
            warmup_frac: 0.0,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if !self.alpha.is_finite() {
            return Err(SimError::InvalidConfig("alpha must be finite"));
        }
        if self.refit_sweeps == 0 {
            return Err(SimError::InvalidConfig("refit_sweeps must be at least 1"));
        }
        if self.refit_every == 0 {
            return Err(SimError::InvalidConfig("refit_every must be at least 1"));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma.is_infinite() || self.noise_sigma < 0.0 {
            return Err(SimError::InvalidConfig(
                "noise_sigma must be finite and nonnegative",
            ));
        }
        if !(0.0..=1.0).contains(&self.warmup_frac) {
            return Err(SimError::InvalidConfig("warmup_frac must be in [0, 1]"));
        }
        self.fit.validate()?;
        Ok(())
    }
}

/// One recommendation step as seen by the harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// 1-based step index.
    pub t: usize,
    pub user: usize,
    pub item: usize,
    /// The noisy rating fed back to the policy.
    pub reward: f64,
    /// Best available true rating minus the chosen item's true rating.
    pub regret: f64,
}

/// Per-step log of one episode with the running regret sum.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretTrace {
    pub steps: Vec<StepRecord>,
    pub cumulative: Vec<f64>,
}

impl RegretTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_cumulative(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    fn push(&mut self, record: StepRecord) {
        let total = self.final_cumulative() + record.regret;
        self.steps.push(record);
        self.cumulative.push(total);
    }
}

/// Regret of choosing `chosen` when everything in `allowed` was on offer:
/// `max over allowed of r*(user, .) - r*(user, chosen)`, from the noiseless
/// ground truth.
pub fn immediate_regret(
    truth: &GroundTruth,
    user: usize,
    allowed: &[usize],
    chosen: usize,
) -> Result<f64, SimError> {
    debug_assert!(allowed.contains(&chosen));
    let mut best = f64::NEG_INFINITY;
    for &item in allowed {
        best = best.max(truth.value(user, item)?);
    }
    Ok(best - truth.value(user, chosen)?)
}

/// Mutable policy state carried through one episode.
enum PolicyState {
    Factors {
        model: Option<FactorModel>,
        /// Observation count when `model` was fitted; a model fitted on an
        /// empty matrix is all zeros and useless as a warm start.
        fitted_on: usize,
    },
    Ucb(UcbArmStats),
    Stateless,
}

struct Episode<'a> {
    truth: &'a GroundTruth,
    config: &'a EpisodeConfig,
    rng: ChaCha8Rng,
    matrix: RatingMatrix,
    /// Per user, ascending list of available, not-yet-consumed items.
    unconsumed: Vec<Vec<usize>>,
    state: PolicyState,
    /// Rating range of the ground truth, used to map UCB1 rewards to [0, 1]
    /// (the range its exploration bonus is calibrated for).
    reward_span: (f64, f64),
}

impl<'a> Episode<'a> {
    fn new(truth: &'a GroundTruth, config: &'a EpisodeConfig) -> Self {
        let unconsumed: Vec<Vec<usize>> = (0..truth.n_users())
            .map(|i| truth.available_items(i))
            .collect();
        let state = if config.policy.uses_factors() {
            PolicyState::Factors {
                model: None,
                fitted_on: 0,
            }
        } else if config.policy == Policy::UcbAllUsers {
            PolicyState::Ucb(UcbArmStats::new(truth.n_items()))
        } else {
            PolicyState::Stateless
        };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (user, row) in unconsumed.iter().enumerate() {
            for &item in row {
                let value = truth.value(user, item).expect("mask-true cell");
                lo = lo.min(value);
                hi = hi.max(value);
            }
        }
        Self {
            truth,
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            matrix: RatingMatrix::new(truth.n_users(), truth.n_items()),
            unconsumed,
            state,
            reward_span: (lo, hi),
        }
    }

    /// UCB1's bonus is calibrated for rewards in [0, 1]; feed it the rating
    /// mapped onto the ground truth's range.
    fn normalized_reward(&self, reward: f64) -> f64 {
        let (lo, hi) = self.reward_span;
        if hi > lo {
            (reward - lo) / (hi - lo)
        } else {
            0.0
        }
    }

    /// Refit the factor model on the current matrix, warm-starting from the
    /// previous factors whenever they carry any information.
    fn refresh_model(&mut self, force_cold: bool) -> Result<(), SimError> {
        let PolicyState::Factors { model, fitted_on } = &mut self.state else {
            return Ok(());
        };
        let warm_start = match model {
            Some(previous) if !force_cold && *fitted_on > 0 => Some(&*previous),
            _ => None,
        };
        let cfg = {
            let warm = warm_start.is_some();
            let mut cfg = self.config.fit.clone();
            cfg.regularization = self.config.policy.regularization();
            if warm {
                cfg.max_sweeps = self.config.refit_sweeps;
            }
            cfg
        };
        let mut fitted = als_fit(&self.matrix, &cfg, warm_start)?;
        if self.config.policy.item_side() {
            // item ellipsoids assume the item side was solved last
            item_half_sweep(&mut fitted, &self.matrix)?;
        }
        *model = Some(fitted);
        *fitted_on = self.matrix.observed();
        Ok(())
    }

    fn select(&mut self, user: usize) -> Result<usize, SimError> {
        let allowed = &self.unconsumed[user];
        let lambda = self.config.fit.lambda;
        let reg = self.config.policy.regularization();
        let alpha = self.config.alpha;
        let item = match (&self.config.policy, &mut self.state) {
            (Policy::GreedyAls | Policy::GreedyAlsWr, PolicyState::Factors { model, .. }) => {
                greedy_select(model.as_ref().expect("model initialized"), user, allowed)?.item
            }
            (Policy::BewareUser | Policy::BewareAlsUser, PolicyState::Factors { model, .. }) => {
                beware_user_select(
                    &self.matrix,
                    model.as_ref().expect("model initialized"),
                    user,
                    lambda,
                    reg,
                    alpha,
                    allowed,
                )?
                .item
            }
            (Policy::BewareItem | Policy::BewareAlsItem, PolicyState::Factors { model, .. }) => {
                beware_item_select(
                    &self.matrix,
                    model.as_ref().expect("model initialized"),
                    user,
                    lambda,
                    reg,
                    alpha,
                    allowed,
                )?
                .item
            }
            (Policy::UcbAllUsers, PolicyState::Ucb(stats)) => ucb1_select(stats, allowed)?.item,
            (Policy::Oracle, _) => {
                let mut best_item = allowed[0];
                let mut best_value = f64::NEG_INFINITY;
                for &item in allowed {
                    let value = self.truth.value(user, item)?;
                    if value > best_value {
                        best_value = value;
                        best_item = item;
                    }
                }
                best_item
            }
            (Policy::Random, _) => allowed[self.rng.random_range(0..allowed.len())],
            _ => unreachable!("policy state matches policy kind"),
        };
        Ok(item)
    }

    fn consume(&mut self, user: usize, item: usize) {
        let row = &mut self.unconsumed[user];
        let pos = row.binary_search(&item).expect("item was on offer");
        row.remove(pos);
    }

    /// Reveal a random fraction of the cells before the episode proper. The
    /// seeded observations reach each policy through its usual state: the
    /// rating matrix for factor policies, the pooled means for UCB.
    fn warm_up(&mut self) -> Result<(), SimError> {
        let mut cells: Vec<(usize, usize)> = self
            .unconsumed
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&j| (i, j)))
            .collect();
        let n_seed = (self.config.warmup_frac * cells.len() as f64).floor() as usize;
        for index in 0..n_seed {
            let swap = self.rng.random_range(index..cells.len());
            cells.swap(index, swap);
            let (user, item) = cells[index];
            let reward = observe_noisy(
                self.truth,
                user,
                item,
                self.config.noise_sigma,
                &mut self.rng,
            )?;
            self.matrix.insert(Observation::new(user, item, reward))?;
            self.consume(user, item);
            let normalized = self.normalized_reward(reward);
            if let PolicyState::Ucb(stats) = &mut self.state {
                stats.update(item, normalized);
            }
        }
        Ok(())
    }

    fn run(mut self) -> Result<RegretTrace, SimError> {
        if self.config.warmup_frac > 0.0 {
            self.warm_up()?;
        }
        self.refresh_model(false)?;
        let mut trace = RegretTrace::default();
        let mut since_refit = 0usize;
        let mut since_cold = 0usize;
        loop {
            let active: Vec<usize> = (0..self.truth.n_users())
                .filter(|&i| !self.unconsumed[i].is_empty())
                .collect();
            if active.is_empty() {
                break;
            }
            let user = active[self.rng.random_range(0..active.len())];
            let chosen = self.select(user)?;
            let regret = immediate_regret(self.truth, user, &self.unconsumed[user], chosen)?;
            let reward = observe_noisy(
                self.truth,
                user,
                chosen,
                self.config.noise_sigma,
                &mut self.rng,
            )?;
            self.matrix.insert(Observation::new(user, chosen, reward))?;
            self.consume(user, chosen);
            trace.push(StepRecord {
                t: trace.len() + 1,
                user,
                item: chosen,
                reward,
                regret,
            });
            let normalized = self.normalized_reward(reward);
            match &mut self.state {
                PolicyState::Ucb(stats) => stats.update(chosen, normalized),
                PolicyState::Factors { .. } => {
                    since_refit += 1;
                    since_cold += 1;
                    if since_refit >= self.config.refit_every {
                        let force_cold = self.config.cold_refit_every > 0
                            && since_cold >= self.config.cold_refit_every;
                        if force_cold {
                            since_cold = 0;
                        }
                        self.refresh_model(force_cold)?;
                        since_refit = 0;
                    }
                }
                PolicyState::Stateless => {}
            }
        }
        Ok(trace)
    }
}

/// Play one full episode of the protocol. Deterministic given the seed.
pub fn run_episode(truth: &GroundTruth, config: &EpisodeConfig) -> Result<RegretTrace, SimError> {
    config.validate()?;
    Episode::new(truth, config).run()
}

/// Mean cumulative-regret curve with per-step standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl RegretCurve {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn final_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }
}

/// Pointwise mean and standard error of the cumulative regret curves.
pub fn aggregate(traces: &[RegretTrace]) -> Result<RegretCurve, SimError> {
    let Some(first) = traces.first() else {
        return Ok(RegretCurve {
            mean: Vec::new(),
            stderr: Vec::new(),
        });
    };
    let len = first.len();
    for trace in traces {
        if trace.len() != len {
            return Err(SimError::LengthMismatch(len, trace.len()));
        }
    }
    let runs = traces.len() as f64;
    let mut mean = vec![0.0; len];
    let mut stderr = vec![0.0; len];
    for t in 0..len {
        let m = traces.iter().map(|tr| tr.cumulative[t]).sum::<f64>() / runs;
        mean[t] = m;
        if traces.len() > 1 {
            let var = traces
                .iter()
                .map(|tr| (tr.cumulative[t] - m) * (tr.cumulative[t] - m))
                .sum::<f64>()
                / (runs - 1.0);
            stderr[t] = (var / runs).sqrt();
        }
    }
    Ok(RegretCurve { mean, stderr })
}

/// Per-run seeds derived from one base seed, shared across policies so that
/// different strategies face the same user draws and noise.
pub fn episode_seeds(base: u64, runs: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    (0..runs).map(|_| rng.random()).collect()
}

/// Run one episode per seed (in parallel) with the given configuration.
pub fn run_episodes(
    truth: &GroundTruth,
    config: &EpisodeConfig,
    seeds: &[u64],
) -> Result<Vec<RegretTrace>, SimError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = config.clone();
            cfg.seed = seed;
            run_episode(truth, &cfg)
        })
        .collect()
}
