//! Regret matching: each player keeps average payoff differences for
//! switching between its actions and moves away from its last action with
//! probability proportional to positive regret.

use crate::correlated::{ce_violation, JointDistribution};
use crate::error::{invalid, Error, Result};
use crate::game::PayoffTensor;
use crate::nash::PureProfile;
use crate::rng::{seeded, Rng};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

/// Which past periods feed the regret of action `a` toward `a'`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegretRule {
    /// Only periods in which `a` was actually played (conditional regret).
    #[default]
    #[serde(rename = "std")]
    Standard,
    /// Every period, whatever was played: the same difference is added to
    /// every row.
    #[serde(rename = "paper-literal")]
    Unconditional,
}

impl std::str::FromStr for RegretRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "std" => Ok(RegretRule::Standard),
            "paper-literal" => Ok(RegretRule::Unconditional),
            other => Err(invalid(format!("unknown regret rule {other:?} (expected std or paper-literal)"))),
        }
    }
}

impl std::fmt::Display for RegretRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegretRule::Standard => "std",
            RegretRule::Unconditional => "paper-literal",
        })
    }
}

/// Smallest admissible `μ`: with `Mᵢ - 1` switch targets each carrying at
/// most one payoff spread of regret, switch masses then sum to at most 1.
pub fn min_mu(tensor: &PayoffTensor) -> f64 {
    let m = tensor.dims().iter().copied().max().unwrap_or(1);
    (m.saturating_sub(1)) as f64 * tensor.spread()
}

/// `2 · maxᵢ Mᵢ · spread`, or 1 for constant games.
pub fn default_mu(tensor: &PayoffTensor) -> f64 {
    let m = tensor.dims().iter().copied().max().unwrap_or(1);
    let mu = 2.0 * m as f64 * tensor.spread();
    if mu > 0.0 {
        mu
    } else {
        1.0
    }
}

fn check_mu(tensor: &PayoffTensor, mu: f64) -> Result<()> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(invalid(format!("mu must be positive and finite, got {mu}")));
    }
    let need = min_mu(tensor);
    if mu < need {
        return Err(invalid(format!(
            "mu = {mu} is below (M - 1) * spread = {need}; switch probabilities could exceed 1"
        )));
    }
    Ok(())
}

/// Learning state after `t` periods.
#[derive(Clone, Debug)]
pub struct RegretState {
    t: u64,
    rule: RegretRule,
    /// Per player, row-major `Mᵢ × Mᵢ`: entry `(a, a')` accumulates
    /// `uᵢ(a', a₋ᵢ^τ) - uᵢ(a^τ)` over the periods selected by the rule.
    diffs: Vec<Vec<f64>>,
    counts: Vec<u64>,
    last: Vec<usize>,
    rng: Rng,
}

impl RegretState {
    /// Period 1: every player picks uniformly at random from the seeded
    /// source.
    pub fn new(tensor: &PayoffTensor, seed: u64, rule: RegretRule) -> Self {
        let mut rng = seeded(seed);
        let first: Vec<usize> = tensor.dims().iter().map(|&m| rng.random_range(0..m)).collect();
        Self::start(tensor, first, rng, rule)
    }

    /// Period 1 is the given profile; later draws use `seed`.
    pub fn with_initial(tensor: &PayoffTensor, profile: &[usize], seed: u64, rule: RegretRule) -> Result<Self> {
        tensor.encode(profile)?;
        Ok(Self::start(tensor, profile.to_vec(), seeded(seed), rule))
    }

    fn start(tensor: &PayoffTensor, first: Vec<usize>, rng: Rng, rule: RegretRule) -> Self {
        let mut state = RegretState {
            t: 0,
            rule,
            diffs: tensor.dims().iter().map(|&m| vec![0.0; m * m]).collect(),
            counts: vec![0; tensor.profile_count()],
            last: first.clone(),
            rng,
        };
        state.record(tensor, &first);
        state
    }

    fn record(&mut self, tensor: &PayoffTensor, profile: &[usize]) {
        let idx = tensor.encode(profile).expect("profile in range");
        for (i, d) in self.diffs.iter_mut().enumerate() {
            let m = tensor.dims()[i];
            let here = tensor.payoff(i, idx);
            let played = profile[i];
            for dev in 0..m {
                let diff = tensor.payoff(i, tensor.with_action(idx, i, dev)) - here;
                match self.rule {
                    RegretRule::Standard => d[played * m + dev] += diff,
                    RegretRule::Unconditional => {
                        for a in 0..m {
                            d[a * m + dev] += diff;
                        }
                    }
                }
            }
        }
        self.counts[idx] += 1;
        self.last = profile.to_vec();
        self.t += 1;
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn rule(&self) -> RegretRule {
        self.rule
    }

    pub fn last_actions(&self) -> &[usize] {
        &self.last
    }

    pub fn history_counts(&self) -> &[u64] {
        &self.counts
    }

    /// Raw accumulated differences of `player` (row-major `Mᵢ × Mᵢ`).
    pub fn diffs(&self, player: usize) -> &[f64] {
        &self.diffs[player]
    }

    /// Average regret `max(D(a, a') / t, 0)`.
    pub fn regret(&self, player: usize, a: usize, dev: usize) -> f64 {
        let m = (self.diffs[player].len() as f64).sqrt() as usize;
        (self.diffs[player][a * m + dev] / self.t as f64).max(0.0)
    }

    /// Largest average regret over all players and action pairs.
    pub fn max_regret(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, d) in self.diffs.iter().enumerate() {
            let m = (d.len() as f64).sqrt() as usize;
            for a in 0..m {
                for dev in (0..m).filter(|&x| x != a) {
                    worst = worst.max(self.regret(i, a, dev));
                }
            }
        }
        worst
    }

    /// Next-period distribution of `player`'s action.
    pub fn next_action_probabilities(&self, player: usize, mu: f64) -> Result<Vec<f64>> {
        let m = (self.diffs[player].len() as f64).sqrt() as usize;
        let a = self.last[player];
        let mut p: Vec<f64> = (0..m).map(|dev| if dev == a { 0.0 } else { self.regret(player, a, dev) / mu }).collect();
        let switch: f64 = p.iter().sum();
        if switch > 1.0 + 1e-12 || p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Internal(format!("switch probabilities sum to {switch}")));
        }
        p[a] = (1.0 - switch).max(0.0);
        Ok(p)
    }
}

/// Plays one period: each player draws its next action, then the regrets
/// and history absorb the new profile.
pub fn rm_step(state: &mut RegretState, tensor: &PayoffTensor, mu: f64) -> Result<PureProfile> {
    check_mu(tensor, mu)?;
    if state.counts.len() != tensor.profile_count() || state.diffs.len() != tensor.players() {
        return Err(crate::error::dims("state was built for a different game"));
    }
    let next = next_profile(state, mu)?;
    state.record(tensor, &next);
    Ok(PureProfile(next))
}

fn next_profile(state: &mut RegretState, mu: f64) -> Result<Vec<usize>> {
    let k = state.last.len();
    let mut next = Vec::with_capacity(k);
    for i in 0..k {
        let p = state.next_action_probabilities(i, mu)?;
        let a = state.last[i];
        let u: f64 = state.rng.random();
        let mut acc = 0.0;
        let mut choice = a;
        for (dev, pd) in p.iter().enumerate() {
            if dev == a || *pd == 0.0 {
                continue;
            }
            acc += pd;
            if u < acc {
                choice = dev;
                break;
            }
        }
        next.push(choice);
    }
    Ok(next)
}

/// `count(a) / t` for every profile.
pub fn empirical_distribution(state: &RegretState, tensor: &PayoffTensor) -> Result<JointDistribution> {
    if state.t == 0 {
        return Err(invalid("no periods played"));
    }
    let t = state.t as f64;
    JointDistribution::new(tensor.dims().to_vec(), state.counts.iter().map(|&c| c as f64 / t).collect())
}

/// One sampled point of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub step: u64,
    pub max_regret: f64,
    /// CE residual of the empirical distribution so far.
    pub ce_gap: f64,
    /// Welfare of the empirical distribution so far.
    pub welfare: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegretRun {
    pub empirical: JointDistribution,
    pub trace: Vec<TracePoint>,
    pub mu: f64,
    pub rule: RegretRule,
    pub final_profile: PureProfile,
}

/// Steps 1..=10 and then about ten points per decade, always ending at `steps`.
pub fn log_schedule(steps: u64) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    let mut j = 0;
    loop {
        let s = 10f64.powf(j as f64 / 10.0).round() as u64;
        if s > steps {
            break;
        }
        if out.last() != Some(&s) {
            out.push(s);
        }
        j += 1;
    }
    for s in 1..=steps.min(10) {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out.sort_unstable();
    if out.last() != Some(&steps) {
        out.push(steps);
    }
    out
}

/// Runs `steps` periods (the random initial profile counts as the first).
pub fn rm_run(tensor: &PayoffTensor, steps: u64, seed: u64, mu: Option<f64>, rule: RegretRule) -> Result<RegretRun> {
    if steps == 0 {
        return Err(invalid("steps must be at least 1"));
    }
    let mu = mu.unwrap_or_else(|| default_mu(tensor));
    check_mu(tensor, mu)?;
    let schedule = log_schedule(steps);
    let mut next_sample = 0;
    let mut state = RegretState::new(tensor, seed, rule);
    let mut trace = Vec::with_capacity(schedule.len());
    loop {
        if next_sample < schedule.len() && schedule[next_sample] == state.t {
            let emp = empirical_distribution(&state, tensor)?;
            trace.push(TracePoint {
                step: state.t,
                max_regret: state.max_regret(),
                ce_gap: ce_violation(tensor, &emp)?,
                welfare: emp.expected_payoffs(tensor).iter().sum(),
            });
            next_sample += 1;
        }
        if state.t >= steps {
            break;
        }
        let next = next_profile(&mut state, mu)?;
        state.record(tensor, &next);
    }
    Ok(RegretRun {
        empirical: empirical_distribution(&state, tensor)?,
        trace,
        mu,
        rule,
        final_profile: PureProfile(state.last.clone()),
    })
}
