//! Correlated equilibria: obedience constraints, welfare-optimal and
//! directional solves by LP, the membership oracle, the 2-player payoff
//! region and mediator sampling.

use crate::error::{dims, invalid, Error, Result};
use crate::game::PayoffTensor;
use crate::geometry::{self, Point};
use crate::lp::{LpProblem, LpStatus, Simplex, SolverOptions};
use crate::nash::PureProfile;
use crate::par::{self, Exec};
use crate::rng::{seeded, Rng};
use rand::Rng as _;
use serde::Serialize;

/// Reports whose CE residual exceeds this are rejected.
pub const ACCEPT_VIOLATION: f64 = 1e-8;
/// Payoff-space vertex merge distance for regions.
pub const REGION_DEDUP_TOL: f64 = 1e-7;
/// Default number of support directions for [`ce_payoff_region`].
pub const DEFAULT_DIRECTIONS: usize = 64;

const SUM_TOL: f64 = 1e-9;
const NEGATIVE_DUST: f64 = -1e-12;

/// Probability vector over joint profiles, laid out like [`PayoffTensor`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointDistribution {
    dims: Vec<usize>,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(dims: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if probs.len() != n {
            return Err(crate::error::dims(format!("{} probabilities for {n} profiles", probs.len())));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < NEGATIVE_DUST) {
            return Err(invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(invalid(format!("probabilities sum to {total}")));
        }
        Ok(JointDistribution { dims, probs })
    }

    /// Clamps solver dust in `[-1e-12, 0)` to zero and renormalizes. Larger
    /// negative entries are an error.
    pub fn from_solver(dims: Vec<usize>, mut probs: Vec<f64>) -> Result<Self> {
        if let Some(p) = probs.iter().find(|p| **p < NEGATIVE_DUST) {
            return Err(Error::Internal(format!("solver returned probability {p}")));
        }
        probs.iter_mut().for_each(|p| *p = p.max(0.0));
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::Internal("solver returned an all-zero distribution".into()));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Self::new(dims, probs)
    }

    pub fn point_mass(dims: Vec<usize>, idx: usize) -> Self {
        let n: usize = dims.iter().product();
        let mut probs = vec![0.0; n];
        probs[idx] = 1.0;
        JointDistribution { dims, probs }
    }

    pub fn uniform(dims: Vec<usize>) -> Self {
        let n: usize = dims.iter().product();
        JointDistribution { dims, probs: vec![1.0 / n as f64; n] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Expected payoff of every player under this distribution.
    pub fn expected_payoffs(&self, tensor: &PayoffTensor) -> Vec<f64> {
        (0..tensor.players())
            .map(|i| tensor.player_payoffs(i).iter().zip(&self.probs).map(|(u, p)| u * p).sum())
            .collect()
    }
}

/// A verified correlated equilibrium.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub distribution: JointDistribution,
    pub per_player_value: Vec<f64>,
    pub welfare: f64,
    /// Recomputed by [`ce_violation`], independent of the LP residuals.
    pub max_violation: f64,
    pub solver_iterations: usize,
}

/// The CE polytope as an LP with a zero objective.
///
/// Rows come per player `i`, then per recommended action `a`, then per
/// deviation `a' ≠ a` in increasing order:
/// `Σ_{a₋ᵢ} p(a, a₋ᵢ)·[uᵢ(a, a₋ᵢ) - uᵢ(a', a₋ᵢ)] ≥ 0`. The simplex equality is
/// the single equality row; bounds are the default nonnegativity.
pub fn build_ce_constraints(tensor: &PayoffTensor) -> LpProblem {
    let n = tensor.profile_count();
    let mut lp = LpProblem::new(vec![0.0; n]);
    for i in 0..tensor.players() {
        let m = tensor.dims()[i];
        let u = tensor.player_payoffs(i);
        for a in 0..m {
            for dev in (0..m).filter(|&d| d != a) {
                let mut row = vec![0.0; n];
                for (idx, coeff) in row.iter_mut().enumerate() {
                    if tensor.action_of(idx, i) == a {
                        *coeff = u[idx] - u[tensor.with_action(idx, i, dev)];
                    }
                }
                lp.add_ge(row, 0.0);
            }
        }
    }
    lp.add_eq(vec![1.0; n], 1.0);
    lp
}

/// Largest expected gain any player gets by replacing a recommended action
/// with another one, floored at zero. Zero exactly on correlated equilibria.
pub fn ce_violation(tensor: &PayoffTensor, dist: &JointDistribution) -> Result<f64> {
    if dist.dims() != tensor.dims() {
        return Err(dims(format!("distribution dims {:?} vs game dims {:?}", dist.dims(), tensor.dims())));
    }
    let p = dist.probs();
    let mut worst: f64 = 0.0;
    for i in 0..tensor.players() {
        let m = tensor.dims()[i];
        // gain[a][a'] accumulated over all profiles recommending a.
        let mut gain = vec![0.0; m * m];
        for (idx, &pr) in p.iter().enumerate() {
            if pr == 0.0 {
                continue;
            }
            let a = tensor.action_of(idx, i);
            let here = tensor.payoff(i, idx);
            for dev in 0..m {
                gain[a * m + dev] += pr * (tensor.payoff(i, tensor.with_action(idx, i, dev)) - here);
            }
        }
        worst = gain.iter().copied().fold(worst, f64::max);
    }
    Ok(worst)
}

/// Welfare-maximizing correlated equilibrium.
pub fn solve_welfare_ce(tensor: &PayoffTensor) -> Result<EquilibriumReport> {
    solve_directional_ce_with(tensor, &vec![1.0; tensor.players()], &SolverOptions::default())
}

/// Correlated equilibrium maximizing `Σᵢ wᵢ·E[uᵢ]`.
pub fn solve_directional_ce(tensor: &PayoffTensor, weights: &[f64]) -> Result<EquilibriumReport> {
    solve_directional_ce_with(tensor, weights, &SolverOptions::default())
}

pub fn solve_directional_ce_with(
    tensor: &PayoffTensor,
    weights: &[f64],
    options: &SolverOptions,
) -> Result<EquilibriumReport> {
    if weights.len() != tensor.players() {
        return Err(dims(format!("{} weights for {} players", weights.len(), tensor.players())));
    }
    if weights.iter().any(|w| !w.is_finite()) || weights.iter().all(|w| *w == 0.0) {
        return Err(invalid("direction weights must be finite and not all zero"));
    }
    let mut lp = build_ce_constraints(tensor);
    lp.objective = (0..tensor.profile_count())
        .map(|idx| weights.iter().enumerate().map(|(i, w)| w * tensor.payoff(i, idx)).sum())
        .collect();
    solve_ce_lp(tensor, &lp, options)
}

fn solve_ce_lp(tensor: &PayoffTensor, lp: &LpProblem, options: &SolverOptions) -> Result<EquilibriumReport> {
    let sol = Simplex::new(*options).solve(lp)?;
    let x = match sol.status {
        LpStatus::Optimal => sol.x.expect("optimal solutions carry x"),
        other => {
            return Err(Error::Internal(format!("CE LP reported {other:?}; the CE polytope is nonempty and bounded")));
        }
    };
    let distribution = JointDistribution::from_solver(tensor.dims().to_vec(), x)?;
    report(tensor, distribution, sol.iterations)
}

fn report(tensor: &PayoffTensor, distribution: JointDistribution, iterations: usize) -> Result<EquilibriumReport> {
    let max_violation = ce_violation(tensor, &distribution)?;
    if max_violation > ACCEPT_VIOLATION {
        return Err(Error::Internal(format!("CE solution violates obedience by {max_violation:e}")));
    }
    let per_player_value = distribution.expected_payoffs(tensor);
    let welfare = per_player_value.iter().sum();
    Ok(EquilibriumReport { distribution, per_player_value, welfare, max_violation, solver_iterations: iterations })
}

/// Largest total probability any correlated equilibrium can put on player
/// `i` recommending `action`. Zero for strictly dominated actions.
pub fn max_action_mass(tensor: &PayoffTensor, player: usize, action: usize) -> Result<f64> {
    if player >= tensor.players() || action >= tensor.dims()[player] {
        return Err(invalid(format!("no action {action} for player {player}")));
    }
    let mut lp = build_ce_constraints(tensor);
    lp.objective = (0..tensor.profile_count())
        .map(|idx| if tensor.action_of(idx, player) == action { 1.0 } else { 0.0 })
        .collect();
    let sol = Simplex::new(SolverOptions::default()).solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective_value.expect("optimal")),
        other => Err(Error::Internal(format!("CE LP reported {other:?}"))),
    }
}

/// Outer boundary of the 2-player CE payoff set: support points in `directions`
/// evenly spaced directions, merged within [`REGION_DEDUP_TOL`] and returned as
/// a counter-clockwise convex polygon.
pub fn ce_payoff_region(tensor: &PayoffTensor, directions: usize) -> Result<Vec<Point>> {
    ce_payoff_region_with(tensor, directions, Exec::default(), &SolverOptions::default())
}

pub fn ce_payoff_region_with(
    tensor: &PayoffTensor,
    directions: usize,
    exec: Exec,
    options: &SolverOptions,
) -> Result<Vec<Point>> {
    if tensor.players() != 2 {
        return Err(invalid(format!("payoff regions need 2 players, got {}", tensor.players())));
    }
    if directions < 4 {
        return Err(invalid("at least 4 directions are required"));
    }
    let points = par::try_map_range(exec, directions, |k| {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / directions as f64;
        let w = [theta.cos(), theta.sin()];
        let rep = solve_directional_ce_with(tensor, &w, options)?;
        Ok::<Point, Error>([rep.per_player_value[0], rep.per_player_value[1]])
    })?;
    Ok(geometry::convex_hull(&points, REGION_DEDUP_TOL))
}

/// Draws a profile from `dist` by inverse CDF in profile-index order.
pub fn mediator_sample(dist: &JointDistribution, seed: u64) -> Result<PureProfile> {
    let mut rng = seeded(seed);
    sample_profile(dist, &mut rng)
}

/// As [`mediator_sample`] but continuing an existing random stream.
pub fn sample_profile(dist: &JointDistribution, rng: &mut Rng) -> Result<PureProfile> {
    let idx = sample_index(dist.probs(), rng)?;
    Ok(PureProfile(decode(dist.dims(), idx)))
}

pub(crate) fn sample_index(probs: &[f64], rng: &mut Rng) -> Result<usize> {
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(invalid("cannot sample from an all-zero distribution"));
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (idx, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = idx;
            if target < acc {
                return Ok(idx);
            }
        }
    }
    Ok(last_positive)
}

pub(crate) fn decode(dims: &[usize], mut idx: usize) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for i in (0..dims.len()).rev() {
        out[i] = idx % dims[i];
        idx /= dims[i];
    }
    out
}
