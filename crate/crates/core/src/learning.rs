//! Per-BS range-expansion bias learners.
//!
//! Every BS is a player whose actions are its REB values and whose utility
//! is its cell load (sum of served RB rates). Two learners are provided:
//!
//! * [`MabState`]: UCB decision `u_j + sqrt(2 ln Σn / n_j)` after one pass
//!   over all actions in random order.
//! * [`SatisfactionState`]: linear reward-inaction over a mixed strategy,
//!   frozen while the cell is satisfied.
//!
//! Rewards are normalised by the cell's single-user rate bound `u_max`
//! before reaching the UCB rule so that the mean term and the (unitless)
//! exploration bonus are commensurate.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::Tier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    /// Classical baseline: fixed REBs.
    #[serde(alias = "classical")]
    None,
    Mab,
    Satisfaction,
}

impl Learner {
    pub fn as_str(&self) -> &'static str {
        match self {
            Learner::None => "none",
            Learner::Mab => "mab",
            Learner::Satisfaction => "satisfaction",
        }
    }
}

impl std::fmt::Display for Learner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Learner {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" | "classical" => Ok(Learner::None),
            "mab" => Ok(Learner::Mab),
            "satisfaction" => Ok(Learner::Satisfaction),
            other => Err(format!("unknown learner `{other}` (expected none, mab or satisfaction)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    pub learner: Learner,
    pub macro_reb_set_db: Vec<f64>,
    pub pico_reb_set_db: Vec<f64>,
    /// REBs used by the `none` learner.
    pub fixed_macro_reb_db: f64,
    pub fixed_pico_reb_db: f64,
    pub cell_rate_min_bps: f64,
    pub ue_rate_min_bps: f64,
    pub satisfied_fraction: f64,
    pub learning_epoch_ttis: u64,
    /// Learning rate `1 / (lr_slope·n + lr_offset)`, capped at 1, where `n`
    /// counts learning iterations.
    pub lr_slope: f64,
    pub lr_offset: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            learner: Learner::None,
            macro_reb_set_db: vec![0.0, 3.0, 6.0],
            pico_reb_set_db: vec![0.0, 3.0, 6.0, 9.0, 12.0, 15.0, 18.0],
            fixed_macro_reb_db: 0.0,
            fixed_pico_reb_db: 0.0,
            cell_rate_min_bps: 10e6,
            ue_rate_min_bps: 256e3,
            satisfied_fraction: 0.9,
            learning_epoch_ttis: 1,
            lr_slope: 0.1,
            lr_offset: 0.001,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        ActionSet::new(self.macro_reb_set_db.clone())
            .map_err(|e| ConfigError::invalid("learning.macro_reb_set_db", e))?;
        ActionSet::new(self.pico_reb_set_db.clone())
            .map_err(|e| ConfigError::invalid("learning.pico_reb_set_db", e))?;
        if self.learning_epoch_ttis == 0 {
            return Err(ConfigError::invalid("learning.learning_epoch_ttis", "must be >= 1"));
        }
        if !(self.satisfied_fraction > 0.0 && self.satisfied_fraction <= 1.0) {
            return Err(ConfigError::invalid("learning.satisfied_fraction", "must be in (0, 1]"));
        }
        if !(self.cell_rate_min_bps >= 0.0) || !(self.ue_rate_min_bps >= 0.0) {
            return Err(ConfigError::invalid("learning.cell_rate_min_bps", "thresholds must be >= 0"));
        }
        if !(self.lr_slope >= 0.0) || !(self.lr_offset >= 0.0) || self.lr_slope + self.lr_offset <= 0.0 {
            return Err(ConfigError::invalid("learning.lr_slope", "learning-rate coefficients must be >= 0 and not both 0"));
        }
        Ok(())
    }

    pub fn action_set(&self, tier: Tier) -> ActionSet {
        let v = match tier {
            Tier::Macro => &self.macro_reb_set_db,
            Tier::Pico => &self.pico_reb_set_db,
        };
        ActionSet::new(v.clone()).expect("validated")
    }

    pub fn learning_rate(&self) -> LearningRate {
        LearningRate {
            slope: self.lr_slope,
            offset: self.lr_offset,
        }
    }
}

/// REB values a BS can choose from, dB. Non-empty, strictly increasing and
/// containing 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSet(Vec<f64>);

impl ActionSet {
    pub fn new(values_db: Vec<f64>) -> Result<Self, String> {
        if values_db.is_empty() {
            return Err("action set must not be empty".into());
        }
        if values_db.windows(2).any(|w| !(w[0] < w[1])) {
            return Err("action set must be strictly increasing".into());
        }
        if !values_db.contains(&0.0) {
            return Err("action set must contain the neutral bias 0 dB".into());
        }
        Ok(Self(values_db))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.0[idx]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// UCB bookkeeping for one player.
#[derive(Debug, Clone, PartialEq)]
pub struct MabState {
    sums: Vec<f64>,
    counts: Vec<u64>,
    means: Vec<f64>,
    init_order: Vec<usize>,
}

impl MabState {
    /// Fresh state; the initialisation pass visits actions in a random order.
    pub fn new<R: Rng + ?Sized>(actions: usize, rng: &mut R) -> Self {
        assert!(actions > 0, "need at least one action");
        let mut init_order: Vec<usize> = (0..actions).collect();
        init_order.shuffle(rng);
        Self {
            sums: vec![0.0; actions],
            counts: vec![0; actions],
            means: vec![0.0; actions],
            init_order,
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn total_decisions(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Still visiting unplayed actions.
    pub fn initializing(&self) -> bool {
        self.counts.iter().any(|&n| n == 0)
    }

    /// Decision values `u_j + sqrt(2 ln Σn / n_j)`; +∞ for unplayed actions.
    pub fn decision_values(&self) -> Vec<f64> {
        let total = self.total_decisions() as f64;
        self.means
            .iter()
            .zip(&self.counts)
            .map(|(&u, &n)| {
                if n == 0 {
                    f64::INFINITY
                } else {
                    u + (2.0 * total.ln() / n as f64).sqrt()
                }
            })
            .collect()
    }

    /// Next action: the next unplayed one from the random initial order, else
    /// the UCB argmax (lowest index on exact ties).
    pub fn select(&self) -> usize {
        if let Some(&j) = self.init_order.iter().find(|&&j| self.counts[j] == 0) {
            return j;
        }
        let d = self.decision_values();
        let mut best = 0;
        for j in 1..d.len() {
            if d[j] > d[best] {
                best = j;
            }
        }
        best
    }

    /// Credits `reward` to `action` only.
    pub fn update(&mut self, action: usize, reward: f64) {
        assert!(reward >= 0.0, "rewards are rates and must be non-negative, got {reward}");
        self.sums[action] += reward;
        self.counts[action] += 1;
        self.means[action] = self.sums[action] / self.counts[action] as f64;
    }
}

/// `λ(n) = min(1, 1 / (slope·n + offset))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRate {
    pub slope: f64,
    pub offset: f64,
}

impl LearningRate {
    pub fn at(&self, iteration: u64) -> f64 {
        (1.0 / (self.slope * iteration as f64 + self.offset)).min(1.0)
    }
}

/// Reward scaling `b = (u_max + reward - u_min) / (2·u_max)`, clamped to [0, 1].
///
/// Returns 0 while no rate bound is known.
pub fn reward_scale(reward: f64, u_max: f64, u_min: f64) -> f64 {
    if !(u_max > 0.0) {
        return 0.0;
    }
    let b = (u_max + reward - u_min) / (2.0 * u_max);
    if !(0.0..=1.0).contains(&b) {
        log::debug!("reward scale {b} outside [0, 1]; u_max estimate is lagging");
    }
    b.clamp(0.0, 1.0)
}

/// Linear reward-inaction step towards `action` with gain `lambda·b`,
/// followed by renormalisation.
pub fn reward_inaction_update(probs: &mut [f64], action: usize, lambda: f64, b: f64) {
    let g = lambda * b;
    for (i, p) in probs.iter_mut().enumerate() {
        let target = if i == action { 1.0 } else { 0.0 };
        *p += g * (target - *p);
        *p = p.clamp(0.0, 1.0);
    }
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= s);
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Mixed strategy of one satisfaction-driven player.
#[derive(Debug, Clone, PartialEq)]
pub struct SatisfactionState {
    probs: Vec<f64>,
    current: usize,
    pub satisfied: bool,
    pub u_max: f64,
    pub u_min: f64,
    iteration: u64,
    rate: LearningRate,
}

impl SatisfactionState {
    /// Uniform strategy with a uniformly drawn first action.
    pub fn new<R: Rng + ?Sized>(actions: usize, rate: LearningRate, rng: &mut R) -> Self {
        assert!(actions > 0, "need at least one action");
        Self {
            probs: vec![1.0 / actions as f64; actions],
            current: rng.random_range(0..actions),
            satisfied: false,
            u_max: 0.0,
            u_min: 0.0,
            iteration: 0,
            rate,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn set_u_max(&mut self, u_max: f64) {
        self.u_max = u_max;
        self.u_min = 0.5 * u_max;
    }

    /// One learning iteration given the reward earned by the current action.
    ///
    /// Satisfied: keep playing the current action, strategy untouched.
    /// Otherwise: reinforce the current action by `λ·b`, then draw the next
    /// action from the updated strategy.
    pub fn step<R: Rng + ?Sized>(&mut self, satisfied: bool, reward: f64, rng: &mut R) -> usize {
        self.satisfied = satisfied;
        if satisfied {
            self.iteration += 1;
            return self.current;
        }
        let b = reward_scale(reward, self.u_max, self.u_min);
        self.step_with_scale(b, rng)
    }

    /// As [`step`](Self::step) for an unsatisfied player with an explicit `b`.
    pub fn step_with_scale<R: Rng + ?Sized>(&mut self, b: f64, rng: &mut R) -> usize {
        self.iteration += 1;
        let lambda = self.rate.at(self.iteration);
        reward_inaction_update(&mut self.probs, self.current, lambda, b);
        self.current = sample_index(&self.probs, rng);
        self.current
    }
}

/// Satisfied iff the cell rate reaches `cell_rate_min` and at least
/// `fraction` of the cell's UEs have an average rate of `ue_rate_min` or
/// more. An empty cell is satisfied.
pub fn check_satisfaction(cell_rate_bps: f64, ue_avg_rates_bps: &[f64], cell_rate_min_bps: f64, ue_rate_min_bps: f64, fraction: f64) -> bool {
    if ue_avg_rates_bps.is_empty() {
        return true;
    }
    let ok = ue_avg_rates_bps.iter().filter(|&&r| r >= ue_rate_min_bps).count();
    cell_rate_bps >= cell_rate_min_bps && ok as f64 >= fraction * ue_avg_rates_bps.len() as f64 - 1e-9
}

/// Single-user rate bound: every RB given to its best UE.
///
/// `per_ue_rb_rates` holds one slice of per-RB rates per UE in the cell.
pub fn single_user_bound(per_ue_rb_rates: &[&[f64]]) -> Option<f64> {
    let first = per_ue_rb_rates.first()?;
    Some(
        (0..first.len())
            .map(|rb| per_ue_rb_rates.iter().map(|r| r[rb]).fold(0.0, f64::max))
            .sum(),
    )
}

/// Running-maximum `u_max` tracker.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UMaxEstimator {
    pub u_max: f64,
}

impl UMaxEstimator {
    /// Folds in the current single-user bound; empty cells keep the previous
    /// estimate.
    pub fn observe(&mut self, per_ue_rb_rates: &[&[f64]]) -> f64 {
        if let Some(b) = single_user_bound(per_ue_rb_rates) {
            self.u_max = self.u_max.max(b);
        }
        self.u_max
    }

    pub fn u_min(&self) -> f64 {
        0.5 * self.u_max
    }
}

#[derive(Debug, Clone)]
enum Policy {
    Fixed,
    Mab(MabState),
    Satisfaction(SatisfactionState),
}

/// Per-epoch agent record for the diagnostics stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentSnapshot {
    pub time_ms: u64,
    pub cell: usize,
    pub action: usize,
    pub reb_db: f64,
    pub reward: f64,
    pub satisfied: Option<bool>,
    /// UCB decision values or the mixed strategy.
    pub values: Vec<f64>,
}

/// What a cell observed over the closing epoch.
#[derive(Debug, Clone, Copy)]
pub struct EpochFeedback<'a> {
    pub mean_load_bps: f64,
    pub ue_avg_rates_bps: &'a [f64],
}

/// Learning agent of one BS.
#[derive(Debug, Clone)]
pub struct CellAgent {
    pub actions: ActionSet,
    action: usize,
    reb_db: f64,
    policy: Policy,
    pub u_max: UMaxEstimator,
    epoch_load_sum: f64,
    epoch_ttis: u64,
}

impl CellAgent {
    pub fn new<R: Rng + ?Sized>(tier: Tier, cfg: &LearningConfig, rng: &mut R) -> Self {
        let actions = cfg.action_set(tier);
        let (policy, action, reb_db) = match cfg.learner {
            Learner::None => {
                let reb = match tier {
                    Tier::Macro => cfg.fixed_macro_reb_db,
                    Tier::Pico => cfg.fixed_pico_reb_db,
                };
                (Policy::Fixed, 0, reb)
            }
            Learner::Mab => {
                let s = MabState::new(actions.len(), rng);
                let a = s.select();
                let reb = actions.value(a);
                (Policy::Mab(s), a, reb)
            }
            Learner::Satisfaction => {
                let s = SatisfactionState::new(actions.len(), cfg.learning_rate(), rng);
                let a = s.current();
                let reb = actions.value(a);
                (Policy::Satisfaction(s), a, reb)
            }
        };
        Self {
            actions,
            action,
            reb_db,
            policy,
            u_max: UMaxEstimator::default(),
            epoch_load_sum: 0.0,
            epoch_ttis: 0,
        }
    }

    pub fn reb_db(&self) -> f64 {
        self.reb_db
    }

    pub fn action(&self) -> usize {
        self.action
    }

    pub fn is_learning(&self) -> bool {
        !matches!(self.policy, Policy::Fixed)
    }

    /// Accumulates one TTI of cell load.
    pub fn observe_tti(&mut self, load_bps: f64) {
        self.epoch_load_sum += load_bps;
        self.epoch_ttis += 1;
    }

    pub fn epoch_mean_load(&self) -> f64 {
        if self.epoch_ttis == 0 {
            0.0
        } else {
            self.epoch_load_sum / self.epoch_ttis as f64
        }
    }

    /// Closes the epoch: credits the reward to the action just played and
    /// picks the REB for the next epoch.
    pub fn end_epoch<R: Rng + ?Sized>(&mut self, fb: EpochFeedback<'_>, cfg: &LearningConfig, time_ms: u64, cell: usize, rng: &mut R) -> Option<AgentSnapshot> {
        if self.epoch_ttis == 0 {
            return None;
        }
        self.epoch_load_sum = 0.0;
        self.epoch_ttis = 0;
        let u_max = self.u_max.u_max;
        let normalized = if u_max > 0.0 { (fb.mean_load_bps / u_max).clamp(0.0, 1.0) } else { 0.0 };
        let played = self.action;
        let (values, satisfied) = match &mut self.policy {
            Policy::Fixed => return None,
            Policy::Mab(s) => {
                s.update(played, normalized);
                self.action = s.select();
                (s.decision_values(), None)
            }
            Policy::Satisfaction(s) => {
                s.set_u_max(u_max);
                let sat = check_satisfaction(
                    fb.mean_load_bps,
                    fb.ue_avg_rates_bps,
                    cfg.cell_rate_min_bps,
                    cfg.ue_rate_min_bps,
                    cfg.satisfied_fraction,
                );
                self.action = s.step(sat, fb.mean_load_bps, rng);
                (s.probs().to_vec(), Some(sat))
            }
        };
        self.reb_db = self.actions.value(self.action);
        Some(AgentSnapshot {
            time_ms,
            cell,
            action: played,
            reb_db: self.actions.value(played),
            reward: normalized,
            satisfied,
            values,
        })
    }
}
