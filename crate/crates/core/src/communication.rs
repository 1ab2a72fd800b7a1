//! Communication equilibria over channel-gain type spaces.
//!
//! Each player privately knows its incoming gains (its type), reports a type
//! to a mediator, and receives an action recommendation drawn from
//! `p(·|reported joint type)`. The welfare-optimal device is found by LP under
//! one of two incentive formulations:
//!
//! * [`Formulation::Literal`]: one row per `(i, tᵢ, t'ᵢ, a'ᵢ)` in which the
//!   deviator reports `t'ᵢ` and then plays the constant action `a'ᵢ`
//!   whatever it is told.
//! * [`Formulation::Canonical`]: the deviator reports `t'ᵢ` and then applies
//!   any map from recommended to played actions, linearized with one
//!   auxiliary variable per `(i, tᵢ, t'ᵢ, aᵢ)`.
//!
//! Constant-action maps are a subset of all maps, so the canonical feasible
//! set is contained in the literal one.

use crate::correlated::{sample_index, JointDistribution, ACCEPT_VIOLATION};
use crate::error::{dims, invalid, Error, Result};
use crate::game::{build_payoff_tensor_with, ChannelMatrix, GameInstance, PayoffTensor, DEFAULT_TENSOR_BUDGET};
use crate::lp::{LpProblem, LpStatus, Simplex, SolverOptions};
use crate::nash::PureProfile;
use crate::par::{self, Exec};
use crate::rng::seeded;
use serde::{Deserialize, Serialize};

/// LPs with more variables than this are refused.
pub const MAX_LP_VARIABLES: usize = 1_000_000;

const PRIOR_SUM_TOL: f64 = 1e-12;

/// How per-link gain grids become per-player type lists.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeMode {
    /// Type `n` of player `i` takes the `n`-th entry of every incoming link
    /// grid, so all of them must have the same length `N`.
    #[default]
    Diagonal,
    /// Every combination of incoming link values is a type.
    Product,
}

/// Prior over joint types.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorSpec {
    /// Independent and uniform over each player's type list.
    #[default]
    Uniform,
    /// Probability per joint type in mixed-radix order (player 0 most
    /// significant).
    Explicit(Vec<f64>),
}

/// Incentive constraint family for the communication-equilibrium LP.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    #[default]
    Literal,
    Canonical,
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Formulation::Literal => "literal",
            Formulation::Canonical => "canonical",
        })
    }
}

/// Per-player type lists and a prior over joint types.
///
/// A type of player `i` is the vector of gains into receiver `i`, indexed by
/// transmitter: `types[i][k][j]` is the gain from `j` to `i` under type `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypeSpace {
    types: Vec<Vec<Vec<f64>>>,
    prior: Vec<f64>,
    mode: TypeMode,
}

/// Builds a type space from link grids, `grids[j][i]` listing the candidate
/// gains from transmitter `j` to receiver `i`.
pub fn build_type_space(grids: &[Vec<Vec<f64>>], prior: &PriorSpec, mode: TypeMode) -> Result<TypeSpace> {
    let k = grids.len();
    if k == 0 {
        return Err(invalid("type space needs at least one player"));
    }
    for (j, row) in grids.iter().enumerate() {
        if row.len() != k {
            return Err(dims(format!("link grid row {j} has {} entries, expected {k}", row.len())));
        }
        for (i, g) in row.iter().enumerate() {
            if g.is_empty() {
                return Err(invalid(format!("empty gain grid for link {j}->{i}")));
            }
            if g.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(invalid(format!("gains for link {j}->{i} must be finite and nonnegative")));
            }
        }
    }
    let mut types = Vec::with_capacity(k);
    for i in 0..k {
        let incoming: Vec<&Vec<f64>> = (0..k).map(|j| &grids[j][i]).collect();
        let list = match mode {
            TypeMode::Diagonal => {
                let n = incoming[0].len();
                if incoming.iter().any(|g| g.len() != n) {
                    return Err(invalid(format!("diagonal types need equal-length grids into receiver {i}")));
                }
                (0..n).map(|t| incoming.iter().map(|g| g[t]).collect()).collect()
            }
            TypeMode::Product => {
                let radix: Vec<usize> = incoming.iter().map(|g| g.len()).collect();
                let count: usize = radix.iter().product();
                (0..count)
                    .map(|t| {
                        let digits = crate::correlated::decode(&radix, t);
                        digits.iter().enumerate().map(|(j, &d)| incoming[j][d]).collect()
                    })
                    .collect()
            }
        };
        types.push(list);
    }
    TypeSpace::new(types, prior, mode)
}

impl TypeSpace {
    /// Type space from explicit type lists (`types[i][k][j]`: gain from `j`
    /// into `i` under type `k` of player `i`).
    pub fn new(types: Vec<Vec<Vec<f64>>>, prior: &PriorSpec, mode: TypeMode) -> Result<Self> {
        let k = types.len();
        if k == 0 || types.iter().any(|t| t.is_empty()) {
            return Err(invalid("every player needs at least one type"));
        }
        if types.iter().flatten().any(|t| t.len() != k || t.iter().any(|g| !g.is_finite() || *g < 0.0)) {
            return Err(invalid(format!("each type must hold {k} finite nonnegative gains")));
        }
        let joint: usize = types.iter().map(Vec::len).product();
        let prior = match prior {
            PriorSpec::Uniform => vec![1.0 / joint as f64; joint],
            PriorSpec::Explicit(q) => {
                if q.len() != joint {
                    return Err(invalid(format!("prior has {} entries for {joint} joint types", q.len())));
                }
                if q.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(invalid("prior entries must be finite and nonnegative"));
                }
                let total: f64 = q.iter().sum();
                if (total - 1.0).abs() > PRIOR_SUM_TOL {
                    return Err(invalid(format!("prior sums to {total}, not 1")));
                }
                q.clone()
            }
        };
        Ok(TypeSpace { types, prior, mode })
    }

    pub fn players(&self) -> usize {
        self.types.len()
    }

    pub fn mode(&self) -> TypeMode {
        self.mode
    }

    /// Number of types per player.
    pub fn type_counts(&self) -> Vec<usize> {
        self.types.iter().map(Vec::len).collect()
    }

    pub fn joint_count(&self) -> usize {
        self.prior.len()
    }

    pub fn types(&self, player: usize) -> &[Vec<f64>] {
        &self.types[player]
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn decode(&self, joint: usize) -> Vec<usize> {
        crate::correlated::decode(&self.type_counts(), joint)
    }

    pub fn encode(&self, types: &[usize]) -> Result<usize> {
        let counts = self.type_counts();
        if types.len() != counts.len() {
            return Err(dims(format!("{} types for {} players", types.len(), counts.len())));
        }
        let mut idx = 0;
        for (t, n) in types.iter().zip(&counts) {
            if t >= n {
                return Err(invalid(format!("type index {t} out of range {n}")));
            }
            idx = idx * n + t;
        }
        Ok(idx)
    }

    /// Channel realized by a joint type.
    pub fn channel(&self, joint: usize) -> ChannelMatrix {
        let t = self.decode(joint);
        let k = self.players();
        let rows = (0..k).map(|j| (0..k).map(|i| self.types[i][t[i]][j]).collect()).collect();
        ChannelMatrix::new(rows).expect("type gains were validated")
    }

    /// Marginal probability of each type of `player`.
    pub fn marginal(&self, player: usize) -> Vec<f64> {
        let counts = self.type_counts();
        let stride: usize = counts[player + 1..].iter().product();
        let mut m = vec![0.0; counts[player]];
        for (t, q) in self.prior.iter().enumerate() {
            m[(t / stride) % counts[player]] += q;
        }
        m
    }

    /// Joint type obtained by replacing `player`'s type in `joint`.
    fn with_type(&self, joint: usize, player: usize, t: usize) -> usize {
        let counts = self.type_counts();
        let stride: usize = counts[player + 1..].iter().product();
        let cur = (joint / stride) % counts[player];
        joint - cur * stride + t * stride
    }

    /// Key of a joint type: each player's gain tuple with six decimals,
    /// gains separated by `,` and players by `|`.
    pub fn joint_key(&self, joint: usize) -> String {
        self.decode(joint)
            .iter()
            .enumerate()
            .map(|(i, &t)| self.types[i][t].iter().map(|g| format!("{g:.6}")).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// Belief of `player` with type `t_i` over the other players' types, listed
/// in mixed-radix order of the remaining players.
pub fn conditional_prior(space: &TypeSpace, player: usize, t_i: usize) -> Result<Vec<f64>> {
    let counts = space.type_counts();
    if player >= counts.len() || t_i >= counts[player] {
        return Err(invalid(format!("no type {t_i} for player {player}")));
    }
    let stride: usize = counts[player + 1..].iter().product();
    let mut out = Vec::with_capacity(space.joint_count() / counts[player]);
    for (t, q) in space.prior.iter().enumerate() {
        if (t / stride) % counts[player] == t_i {
            out.push(*q);
        }
    }
    let total: f64 = out.iter().sum();
    if !(total > 0.0) {
        return Err(invalid(format!("type {t_i} of player {player} has zero probability")));
    }
    out.iter_mut().for_each(|v| *v /= total);
    Ok(out)
}

/// A type space with one payoff tensor per joint type (`uᵢ(t, ·)`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameFamily {
    space: TypeSpace,
    tensors: Vec<PayoffTensor>,
}

impl GameFamily {
    pub fn new(space: TypeSpace, tensors: Vec<PayoffTensor>) -> Result<Self> {
        if tensors.len() != space.joint_count() {
            return Err(dims(format!("{} tensors for {} joint types", tensors.len(), space.joint_count())));
        }
        let d = tensors[0].dims();
        if d.len() != space.players() || tensors.iter().any(|t| t.dims() != d) {
            return Err(dims("tensors must share dims and match the type space's player count"));
        }
        Ok(GameFamily { space, tensors })
    }

    /// Power-control games sharing `template`'s grids and parameters, one per
    /// joint type's channel.
    pub fn from_power_game(space: TypeSpace, template: &GameInstance, exec: Exec) -> Result<Self> {
        if template.players() != space.players() {
            return Err(dims(format!("{} players in game, {} in type space", template.players(), space.players())));
        }
        let tensors = par::try_map_range(exec, space.joint_count(), |t| {
            let game = template.with_channel(space.channel(t))?;
            build_payoff_tensor_with(&game, Exec::Sequential, DEFAULT_TENSOR_BUDGET)
        })?;
        Self::new(space, tensors)
    }

    pub fn space(&self) -> &TypeSpace {
        &self.space
    }

    pub fn tensors(&self) -> &[PayoffTensor] {
        &self.tensors
    }

    pub fn dims(&self) -> &[usize] {
        self.tensors[0].dims()
    }

    /// The prior-weighted average game `Σ_t q(t)·u(t, ·)`.
    pub fn expected_tensor(&self) -> PayoffTensor {
        let mut values = vec![0.0; self.tensors[0].values().len()];
        for (t, q) in self.tensors.iter().zip(&self.space.prior) {
            for (v, u) in values.iter_mut().zip(t.values()) {
                *v += q * u;
            }
        }
        PayoffTensor::from_values(self.dims().to_vec(), values).expect("same layout")
    }
}

/// A mediator: one recommendation distribution per reported joint type.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommDevice {
    space: TypeSpace,
    conditionals: Vec<JointDistribution>,
}

impl CommDevice {
    pub fn new(space: TypeSpace, conditionals: Vec<JointDistribution>) -> Result<Self> {
        if conditionals.len() != space.joint_count() {
            return Err(dims(format!("{} conditionals for {} joint types", conditionals.len(), space.joint_count())));
        }
        let d = conditionals[0].dims();
        if d.len() != space.players() || conditionals.iter().any(|c| c.dims() != d) {
            return Err(dims("conditionals must share dims and match the type space"));
        }
        Ok(CommDevice { space, conditionals })
    }

    pub fn space(&self) -> &TypeSpace {
        &self.space
    }

    pub fn conditional(&self, joint: usize) -> &JointDistribution {
        &self.conditionals[joint]
    }

    pub fn conditionals(&self) -> &[JointDistribution] {
        &self.conditionals
    }

    /// Expected payoff per player under truthful reports and obedience.
    pub fn expected_payoffs(&self, family: &GameFamily) -> Vec<f64> {
        let mut out = vec![0.0; self.space.players()];
        for (t, q) in self.space.prior.iter().enumerate() {
            if *q == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.conditionals[t].expected_payoffs(&family.tensors[t])) {
                *o += q * v;
            }
        }
        out
    }

    /// `(joint key, probabilities)` per joint type in index order.
    pub fn export_entries(&self) -> Vec<(String, Vec<f64>)> {
        (0..self.space.joint_count())
            .map(|t| (self.space.joint_key(t), self.conditionals[t].probs().to_vec()))
            .collect()
    }
}

/// Optimal device and its diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommReport {
    pub device: CommDevice,
    pub formulation: Formulation,
    pub per_player_value: Vec<f64>,
    pub welfare: f64,
    /// Recomputed by [`commeq_violation`].
    pub max_violation: f64,
    pub solver_iterations: usize,
}

/// Variable and row counts of the LP [`build_commeq_lp`] would produce.
pub fn commeq_lp_size(family: &GameFamily, formulation: Formulation) -> (usize, usize) {
    let d = family.dims();
    let profiles: usize = d.iter().product();
    let counts = family.space.type_counts();
    let joint = family.space.joint_count();
    let mut vars = joint * profiles;
    let mut rows = joint;
    for (i, &n) in counts.iter().enumerate() {
        let pairs = n * n;
        match formulation {
            Formulation::Literal => rows += pairs * d[i],
            Formulation::Canonical => {
                vars += pairs * d[i];
                rows += pairs * (1 + d[i] * d[i]);
            }
        }
    }
    (vars, rows)
}

fn check_budget(family: &GameFamily, formulation: Formulation, options: &SolverOptions) -> Result<()> {
    let (vars, rows) = commeq_lp_size(family, formulation);
    if vars > MAX_LP_VARIABLES {
        return Err(Error::Budget {
            what: "communication-equilibrium LP variables",
            needed: vars as u128,
            limit: MAX_LP_VARIABLES as u128,
        });
    }
    let tableau = rows as u128 * (vars + rows + 1) as u128;
    if tableau > options.max_tableau_entries as u128 {
        return Err(Error::Budget {
            what: "communication-equilibrium LP tableau",
            needed: tableau,
            limit: options.max_tableau_entries as u128,
        });
    }
    Ok(())
}

/// The welfare-maximizing communication-equilibrium LP.
///
/// Variable `t·P + a` is `p(a|t)` (`P` profiles per joint type); canonical
/// auxiliaries follow, ordered by player, true type, reported type and
/// recommended action. Incentive rows are weighted by `q(t₋ᵢ|tᵢ)` and only
/// written for true types of positive marginal probability.
pub fn build_commeq_lp(family: &GameFamily, formulation: Formulation) -> Result<LpProblem> {
    check_budget(family, formulation, &SolverOptions::default())?;
    Ok(build_lp_unchecked(family, formulation))
}

fn build_lp_unchecked(family: &GameFamily, formulation: Formulation) -> LpProblem {
    let space = &family.space;
    let d = family.dims().to_vec();
    let profiles: usize = d.iter().product();
    let joint = space.joint_count();
    let counts = space.type_counts();
    let (n, _) = commeq_lp_size(family, formulation);
    let var = |t: usize, a: usize| t * profiles + a;

    let mut objective = vec![0.0; n];
    for t in 0..joint {
        let q = space.prior[t];
        for a in 0..profiles {
            objective[var(t, a)] = q * family.tensors[t].welfare(a);
        }
    }
    let mut lp = LpProblem::new(objective);

    let mut next_aux = joint * profiles;
    for (i, &ni) in counts.iter().enumerate() {
        let marginal = space.marginal(i);
        let stride: usize = counts[i + 1..].iter().product();
        for ti in 0..ni {
            if marginal[ti] <= 0.0 {
                if formulation == Formulation::Canonical {
                    next_aux += ni * d[i];
                }
                continue;
            }
            // Joint types consistent with tᵢ and their conditional weights.
            let support: Vec<(usize, f64)> =
                (0..joint).filter(|t| (t / stride) % ni == ti).map(|t| (t, space.prior[t] / marginal[ti])).collect();
            let mut obey = vec![0.0; n];
            for &(t, w) in &support {
                let u = family.tensors[t].player_payoffs(i);
                for a in 0..profiles {
                    obey[var(t, a)] += w * u[a];
                }
            }
            for tr in 0..ni {
                match formulation {
                    Formulation::Literal => {
                        for dev in 0..d[i] {
                            let mut row = obey.clone();
                            for &(t, w) in &support {
                                let tensor = &family.tensors[t];
                                let reported = space.with_type(t, i, tr);
                                for a in 0..profiles {
                                    row[var(reported, a)] -= w * tensor.payoff(i, tensor.with_action(a, i, dev));
                                }
                            }
                            lp.add_ge(row, 0.0);
                        }
                    }
                    Formulation::Canonical => {
                        let z0 = next_aux;
                        next_aux += d[i];
                        let mut row = obey.clone();
                        for rec in 0..d[i] {
                            row[z0 + rec] = -1.0;
                        }
                        lp.add_ge(row, 0.0);
                        for rec in 0..d[i] {
                            for dev in 0..d[i] {
                                let mut row = vec![0.0; n];
                                row[z0 + rec] = 1.0;
                                for &(t, w) in &support {
                                    let tensor = &family.tensors[t];
                                    let reported = space.with_type(t, i, tr);
                                    for a in (0..profiles).filter(|&a| tensor.action_of(a, i) == rec) {
                                        row[var(reported, a)] -= w * tensor.payoff(i, tensor.with_action(a, i, dev));
                                    }
                                }
                                lp.add_ge(row, 0.0);
                            }
                        }
                    }
                }
            }
        }
    }
    for t in 0..joint {
        let mut row = vec![0.0; n];
        row[var(t, 0)..var(t, 0) + profiles].iter_mut().for_each(|v| *v = 1.0);
        lp.add_eq(row, 1.0);
    }
    // Each auxiliary dominates a payoff averaged over at most unit mass, so
    // min(0, smallest payoff) is a valid lower bound.
    let floor = family.tensors.iter().map(|t| t.payoff_range().0).fold(0.0f64, f64::min);
    for j in joint * profiles..n {
        lp.set_bounds(j, floor, f64::INFINITY);
    }
    lp
}

/// Welfare-optimal device under `formulation`, verified by
/// [`commeq_violation`].
pub fn solve_commeq(family: &GameFamily, formulation: Formulation) -> Result<CommReport> {
    solve_commeq_with(family, formulation, &SolverOptions::default())
}

pub fn solve_commeq_with(family: &GameFamily, formulation: Formulation, options: &SolverOptions) -> Result<CommReport> {
    check_budget(family, formulation, options)?;
    let lp = build_lp_unchecked(family, formulation);
    let sol = Simplex::new(*options).solve(&lp)?;
    let x = match sol.status {
        LpStatus::Optimal => sol.x.expect("optimal solutions carry x"),
        other => {
            return Err(Error::Internal(format!(
                "communication-equilibrium LP reported {other:?}; a Bayesian Nash equilibrium always gives a feasible device"
            )))
        }
    };
    let profiles: usize = family.dims().iter().product();
    let conditionals = (0..family.space.joint_count())
        .map(|t| JointDistribution::from_solver(family.dims().to_vec(), x[t * profiles..(t + 1) * profiles].to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let device = CommDevice::new(family.space.clone(), conditionals)?;
    let max_violation = commeq_violation(&device, family, formulation)?;
    if max_violation > ACCEPT_VIOLATION {
        return Err(Error::Internal(format!("device violates incentive constraints by {max_violation:e}")));
    }
    let per_player_value = device.expected_payoffs(family);
    let welfare = per_player_value.iter().sum();
    Ok(CommReport { device, formulation, per_player_value, welfare, max_violation, solver_iterations: sol.iterations })
}

/// Largest expected gain from misreporting and/or disobeying, floored at 0.
///
/// For each player `i`, true type `tᵢ` and report `t'ᵢ`, `D[aᵢ][a'ᵢ]` is the
/// expected payoff (under `q(·|tᵢ)`) of playing `a'ᵢ` on the events where
/// `aᵢ` is recommended after reporting `t'ᵢ`. Literal deviations score
/// `max_{a'} Σ_a D[a][a']`; canonical ones `Σ_a max_{a'} D[a][a']`; both are
/// compared against truthful obedience.
pub fn commeq_violation(device: &CommDevice, family: &GameFamily, formulation: Formulation) -> Result<f64> {
    if device.space != family.space || device.conditionals[0].dims() != family.dims() {
        return Err(dims("device and game family disagree on types or actions"));
    }
    let space = &family.space;
    let counts = space.type_counts();
    let d = family.dims();
    let mut worst: f64 = 0.0;
    for (i, &ni) in counts.iter().enumerate() {
        let m = d[i];
        for ti in 0..ni {
            let Ok(belief) = conditional_prior(space, i, ti) else {
                continue;
            };
            let others: Vec<usize> = (0..space.joint_count()).filter(|&t| space.decode(t)[i] == ti).collect();
            let mut truthful = 0.0;
            for (&t, w) in others.iter().zip(&belief) {
                let p = device.conditionals[t].probs();
                let tensor = &family.tensors[t];
                truthful += w * p.iter().enumerate().map(|(a, pa)| pa * tensor.payoff(i, a)).sum::<f64>();
            }
            for tr in 0..ni {
                let mut table = vec![0.0; m * m];
                for (&t, w) in others.iter().zip(&belief) {
                    let mut lie = space.decode(t);
                    lie[i] = tr;
                    let p = device.conditionals[space.encode(&lie)?].probs();
                    let tensor = &family.tensors[t];
                    for (a, &pa) in p.iter().enumerate() {
                        if pa == 0.0 {
                            continue;
                        }
                        let rec = tensor.action_of(a, i);
                        for dev in 0..m {
                            table[rec * m + dev] += w * pa * tensor.payoff(i, tensor.with_action(a, i, dev));
                        }
                    }
                }
                let best = match formulation {
                    Formulation::Literal => (0..m)
                        .map(|dev| (0..m).map(|rec| table[rec * m + dev]).sum::<f64>())
                        .fold(f64::NEG_INFINITY, f64::max),
                    Formulation::Canonical => (0..m)
                        .map(|rec| table[rec * m..(rec + 1) * m].iter().copied().fold(f64::NEG_INFINITY, f64::max))
                        .sum(),
                };
                worst = worst.max(best - truthful);
            }
        }
    }
    Ok(worst)
}

/// Outcome of one mediated round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MediatorSession {
    /// Types drawn by Nature from the prior.
    pub true_types: Vec<usize>,
    pub reported_types: Vec<usize>,
    pub recommendation: PureProfile,
}

/// Recommendation for the given reports, drawn from `p(·|reports)` with a
/// seeded source.
pub fn run_mediator_session(device: &CommDevice, reported_types: &[usize], seed: u64) -> Result<PureProfile> {
    let joint = device.space.encode(reported_types)?;
    if device.space.prior[joint] == 0.0 {
        return Err(invalid(format!("reported joint type {reported_types:?} has zero prior probability")));
    }
    let mut rng = seeded(seed);
    let dist = &device.conditionals[joint];
    let idx = sample_index(dist.probs(), &mut rng)?;
    Ok(PureProfile(crate::correlated::decode(dist.dims(), idx)))
}

/// Full round: Nature draws the joint type from the prior, players report
/// truthfully, the mediator recommends. One seeded stream drives both draws.
pub fn run_mediated_round(device: &CommDevice, seed: u64) -> Result<MediatorSession> {
    let mut rng = seeded(seed);
    let joint = sample_index(&device.space.prior, &mut rng)?;
    let types = device.space.decode(joint);
    let dist = &device.conditionals[joint];
    let idx = sample_index(dist.probs(), &mut rng)?;
    Ok(MediatorSession {
        true_types: types.clone(),
        reported_types: types,
        recommendation: PureProfile(crate::correlated::decode(dist.dims(), idx)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlated::{ce_violation, solve_welfare_ce};
    use crate::game::PowerGrid;
    use crate::rng::seeded;
    use rand::Rng as _;

    fn two_point_grids(k: usize, lo: f64, hi: f64) -> Vec<Vec<Vec<f64>>> {
        vec![vec![vec![lo, hi]; k]; k]
    }

    fn single_type(tensor: PayoffTensor) -> GameFamily {
        let k = tensor.players();
        let space = TypeSpace::new(vec![vec![vec![1.0; k]]; k], &PriorSpec::Uniform, TypeMode::Diagonal).unwrap();
        GameFamily::new(space, vec![tensor]).unwrap()
    }

    fn random_tensor(rng: &mut crate::rng::Rng, dims: Vec<usize>) -> PayoffTensor {
        let n: usize = dims.iter().product();
        let values = (0..n * dims.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        PayoffTensor::from_values(dims, values).unwrap()
    }

    fn power_template(m: usize) -> GameInstance {
        let g = PowerGrid::uniform_db(-20.0, 20.0, m).unwrap();
        let ch = ChannelMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        GameInstance::new(ch, vec![g.clone(), g], 0.01, 1.0, 100).unwrap()
    }

    #[test]
    fn type_space_sizes() {
        let s = build_type_space(&two_point_grids(2, 0.5, 2.0), &PriorSpec::Uniform, TypeMode::Diagonal).unwrap();
        assert_eq!(s.type_counts(), vec![2, 2]);
        assert_eq!(s.joint_count(), 4);
        assert!(s.prior().iter().all(|q| *q == 0.25));
        assert_eq!(s.types(1)[1], vec![2.0, 2.0]);

        let p = build_type_space(&two_point_grids(2, 0.5, 2.0), &PriorSpec::Uniform, TypeMode::Product).unwrap();
        assert_eq!(p.type_counts(), vec![4, 4]);
        assert_eq!(p.joint_count(), 16);

        let grid: Vec<f64> = (0..10).map(|k| 0.01 + k as f64 * (3.0 - 0.01) / 9.0).collect();
        let ten = build_type_space(&vec![vec![grid; 2]; 2], &PriorSpec::Uniform, TypeMode::Diagonal).unwrap();
        assert_eq!(ten.type_counts(), vec![10, 10]);
    }

    #[test]
    fn type_space_errors() {
        let mut g = two_point_grids(2, 0.5, 2.0);
        g[0][1] = vec![];
        assert!(build_type_space(&g, &PriorSpec::Uniform, TypeMode::Diagonal).is_err());
        let mut g = two_point_grids(2, 0.5, 2.0);
        g[1][1] = vec![1.0];
        assert!(build_type_space(&g, &PriorSpec::Uniform, TypeMode::Diagonal).is_err());
        assert!(build_type_space(&g, &PriorSpec::Uniform, TypeMode::Product).is_ok());
        let g = two_point_grids(2, 0.5, 2.0);
        for bad in [vec![0.5, 0.5], vec![0.5, 0.5, 0.5, -0.5], vec![0.3, 0.3, 0.3, 0.3]] {
            assert!(build_type_space(&g, &PriorSpec::Explicit(bad), TypeMode::Diagonal).is_err());
        }
    }

    #[test]
    fn channel_and_keys_follow_types() {
        let grids = vec![vec![vec![1.0, 2.0], vec![0.1, 0.2]], vec![vec![0.3, 0.4], vec![3.0, 4.0]]];
        let s = build_type_space(&grids, &PriorSpec::Uniform, TypeMode::Diagonal).unwrap();
        // Player 0 type 1 = (g00, g10) = (2.0, 0.4); player 1 type 0 = (g01, g11) = (0.1, 3.0).
        let joint = s.encode(&[1, 0]).unwrap();
        let ch = s.channel(joint);
        assert_eq!(ch.gain(0, 0), 2.0);
        assert_eq!(ch.gain(1, 0), 0.4);
        assert_eq!(ch.gain(0, 1), 0.1);
        assert_eq!(ch.gain(1, 1), 3.0);
        assert_eq!(s.joint_key(joint), "2.000000,0.400000|0.100000,3.000000");
    }

    #[test]
    fn conditional_prior_bayes() {
        // Joint table q(t0, t1): rows t0, columns t1.
        let q = vec![0.1, 0.3, 0.2, 0.4];
        let s = build_type_space(&two_point_grids(2, 0.5, 2.0), &PriorSpec::Explicit(q), TypeMode::Diagonal).unwrap();
        let c = conditional_prior(&s, 0, 0).unwrap();
        assert!((c[0] - 0.25).abs() < 1e-15 && (c[1] - 0.75).abs() < 1e-15);
        let c = conditional_prior(&s, 0, 1).unwrap();
        assert!((c[0] - 0.2 / 0.6).abs() < 1e-15 && (c[1] - 0.4 / 0.6).abs() < 1e-15);
        let c = conditional_prior(&s, 1, 0).unwrap();
        assert!((c[0] - 0.1 / 0.3).abs() < 1e-15 && (c[1] - 0.2 / 0.3).abs() < 1e-15);
        let c = conditional_prior(&s, 1, 1).unwrap();
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let u = build_type_space(&two_point_grids(2, 0.5, 2.0), &PriorSpec::Uniform, TypeMode::Product).unwrap();
        for t in 0..4 {
            assert!(conditional_prior(&u, 1, t).unwrap().iter().all(|v| (v - 0.25).abs() < 1e-15));
        }

        let z = build_type_space(
            &two_point_grids(2, 0.5, 2.0),
            &PriorSpec::Explicit(vec![0.5, 0.5, 0.0, 0.0]),
            TypeMode::Diagonal,
        )
        .unwrap();
        assert!(conditional_prior(&z, 0, 1).is_err());
    }

    #[test]
    fn literal_row_count() {
        let s = build_type_space(&two_point_grids(2, 0.5, 2.0), &PriorSpec::Uniform, TypeMode::Diagonal).unwrap();
        let fam = GameFamily::from_power_game(s, &power_template(2), Exec::Sequential).unwrap();
        let lp = build_commeq_lp(&fam, Formulation::Literal).unwrap();
        assert_eq!(lp.ineq_rows.len(), 16);
        assert_eq!(lp.eq_rows.len(), 4);
        assert_eq!(lp.n, 16);
        let c = build_commeq_lp(&fam, Formulation::Canonical).unwrap();
        assert_eq!(c.n, 16 + 2 * 4 * 2);
        assert_eq!(c.ineq_rows.len(), 2 * 4 * (1 + 4));
    }

    #[test]
    fn single_type_literal_rows_match_ce_for_two_actions() {
        // With two actions, "always play a'" gains only where a ≠ a' is
        // recommended, which is exactly the CE row for (a, a').
        let mut rng = seeded(3);
        for _ in 0..10 {
            let t = random_tensor(&mut rng, vec![2, 2]);
            let ce = solve_welfare_ce(&t).unwrap();
            let fam = single_type(t);
            let lit = solve_commeq(&fam, Formulation::Literal).unwrap();
            let can = solve_commeq(&fam, Formulation::Canonical).unwrap();
            assert!((lit.welfare - ce.welfare).abs() < 1e-8, "{} vs {}", lit.welfare, ce.welfare);
            assert!((can.welfare - ce.welfare).abs() < 1e-8);
        }
    }

    #[test]
    fn single_type_canonical_is_ce() {
        let mut rng = seeded(4);
        for m in [3, 4] {
            for _ in 0..5 {
                let t = random_tensor(&mut rng, vec![m, m]);
                let ce = solve_welfare_ce(&t).unwrap();
                let fam = single_type(t.clone());
                let can = solve_commeq(&fam, Formulation::Canonical).unwrap();
                let lit = solve_commeq(&fam, Formulation::Literal).unwrap();
                assert!((can.welfare - ce.welfare).abs() < 1e-8, "{} vs {}", can.welfare, ce.welfare);
                assert!(can.welfare <= lit.welfare + 1e-8);
                assert!(ce_violation(&t, can.device.conditional(0)).unwrap() <= 1e-8);
            }
        }
    }

    #[test]
    fn single_type_violation_matches_ce_on_point_masses() {
        let pd = PayoffTensor::bimatrix(&[vec![3.0, 0.0], vec![5.0, 1.0]], &[vec![3.0, 5.0], vec![0.0, 1.0]]).unwrap();
        let fam = single_type(pd.clone());
        for idx in 0..4 {
            let dist = JointDistribution::point_mass(vec![2, 2], idx);
            let device = CommDevice::new(fam.space().clone(), vec![dist.clone()]).unwrap();
            let ce = ce_violation(&pd, &dist).unwrap();
            for f in [Formulation::Literal, Formulation::Canonical] {
                assert!((commeq_violation(&device, &fam, f).unwrap() - ce).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dominant_strategy_at_every_type() {
        // Defect dominates at every type; payoffs scale with the type.
        let space = build_type_space(&two_point_grids(2, 1.0, 2.0), &PriorSpec::Uniform, TypeMode::Diagonal).unwrap();
        let tensors = (0..space.joint_count())
            .map(|t| {
                let s = 1.0 + t as f64;
                PayoffTensor::bimatrix(
                    &[vec![3.0 * s, 0.0], vec![5.0 * s, 1.0 * s]],
                    &[vec![3.0 * s, 5.0 * s], vec![0.0, 1.0 * s]],
                )
                .unwrap()
            })
            .collect();
        let fam = GameFamily::new(space, tensors).unwrap();
        for f in [Formulation::Literal, Formulation::Canonical] {
            let rep = solve_commeq(&fam, f).unwrap();
            for t in 0..4 {
                assert!((rep.device.conditional(t).probs()[3] - 1.0).abs() < 1e-9);
            }
            assert!(rep.max_violation <= 1e-8);
        }
    }

    #[test]
    fn point_mass_violation_is_best_deviation_gain() {
        // Cooperate-cooperate at every type in a scaled prisoner's dilemma:
        // the best deviation is defecting for a gain of 2·s averaged over the
        // other player's type.
        let space = build_type_space(&two_point_grids(2, 1.0, 2.0), &PriorSpec::Uniform, TypeMode::Diagonal).unwrap();
        let scale = |t: usize| 1.0 + t as f64;
        let tensors: Vec<PayoffTensor> = (0..4)
            .map(|t| {
                let s = scale(t);
                PayoffTensor::bimatrix(&[vec![3.0 * s, 0.0], vec![5.0 * s, s]], &[vec![3.0 * s, 5.0 * s], vec![0.0, s]])
                    .unwrap()
            })
            .collect();
        let fam = GameFamily::new(space.clone(), tensors).unwrap();
        let device = CommDevice::new(space, vec![JointDistribution::point_mass(vec![2, 2], 0); 4]).unwrap();
        // Player 0 with type 1 sees joint types 2, 3 (scales 3, 4): gain 2·3.5.
        let expected = 2.0 * 3.5;
        for f in [Formulation::Literal, Formulation::Canonical] {
            assert!((commeq_violation(&device, &fam, f).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn canonical_never_beats_literal() {
        let mut rng = seeded(11);
        for _ in 0..6 {
            let space =
                build_type_space(&two_point_grids(2, 0.5, 2.0), &PriorSpec::Uniform, TypeMode::Diagonal).unwrap();
            let m = rng.random_range(2..4);
            let tensors = (0..4).map(|_| random_tensor(&mut rng, vec![m, m])).collect();
            let fam = GameFamily::new(space, tensors).unwrap();
            let lit = solve_commeq(&fam, Formulation::Literal).unwrap();
            let can = solve_commeq(&fam, Formulation::Canonical).unwrap();
            assert!(can.welfare <= lit.welfare + 1e-8);
            // A canonical device satisfies the literal constraints too.
            assert!(commeq_violation(&can.device, &fam, Formulation::Literal).unwrap() <= 1e-8);
            for t in 0..4 {
                assert!((can.device.conditional(t).probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn power_game_family_solves() {
        let s = build_type_space(&two_point_grids(2, 0.5, 2.0), &PriorSpec::Uniform, TypeMode::Diagonal).unwrap();
        let fam = GameFamily::from_power_game(s, &power_template(3), Exec::Parallel).unwrap();
        let seq = GameFamily::from_power_game(fam.space().clone(), &power_template(3), Exec::Sequential).unwrap();
        assert_eq!(fam, seq);
        let rep = solve_commeq(&fam, Formulation::Literal).unwrap();
        assert!(rep.max_violation <= 1e-8);
        // Ignoring reports and always recommending a pure equilibrium of the
        // average game is not generally incentive compatible, but replaying a
        // profile that is a pure equilibrium at every type is.
        let common: Vec<usize> = (0..fam.tensors()[0].profile_count())
            .filter(|&a| {
                fam.tensors()
                    .iter()
                    .all(|t| crate::nash::enumerate_pure_nash(t).iter().any(|p| t.encode(&p.0).unwrap() == a))
            })
            .collect();
        for a in common {
            let w: f64 = fam.tensors().iter().zip(fam.space().prior()).map(|(t, q)| q * t.welfare(a)).sum();
            assert!(rep.welfare >= w - 1e-8);
        }
    }

    #[test]
    fn budget_guard() {
        let grid: Vec<f64> = (0..10).map(|k| 0.01 + k as f64 * 0.3).collect();
        let s = build_type_space(&vec![vec![grid; 2]; 2], &PriorSpec::Uniform, TypeMode::Product).unwrap();
        // 10⁴ joint types, cheap 1-action game: variables fit, tableau does not.
        let t = PayoffTensor::from_fn(vec![1, 1], |_, _| 0.0).unwrap();
        let space_big = s.clone();
        let fam = GameFamily::new(space_big, vec![t; s.joint_count()]).unwrap();
        assert!(matches!(build_commeq_lp(&fam, Formulation::Literal), Err(Error::Budget { .. })));
        let (vars, _) = commeq_lp_size(&fam, Formulation::Literal);
        assert_eq!(vars, 10_000);
    }

    #[test]
    fn mediator_sessions() {
        let space = build_type_space(&two_point_grids(2, 1.0, 2.0), &PriorSpec::Uniform, TypeMode::Diagonal).unwrap();
        let dists = vec![
            JointDistribution::point_mass(vec![2, 2], 3),
            JointDistribution::new(vec![2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
            JointDistribution::point_mass(vec![2, 2], 0),
            JointDistribution::point_mass(vec![2, 2], 1),
        ];
        let device = CommDevice::new(space, dists).unwrap();
        assert_eq!(run_mediator_session(&device, &[0, 0], 9).unwrap(), PureProfile(vec![1, 1]));
        assert_eq!(
            run_mediator_session(&device, &[0, 1], 5).unwrap(),
            run_mediator_session(&device, &[0, 1], 5).unwrap()
        );
        assert!(run_mediator_session(&device, &[2, 0], 5).is_err());
        assert_eq!(run_mediated_round(&device, 8).unwrap(), run_mediated_round(&device, 8).unwrap());

        let mut counts = [0usize; 4];
        let draws = 100_000;
        for seed in 0..draws {
            let p = run_mediator_session(&device, &[0, 1], seed).unwrap();
            counts[2 * p.0[0] + p.0[1]] += 1;
        }
        for (c, p) in counts.iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert!((*c as f64 / draws as f64 - p).abs() < 0.01);
        }

        let mut types = [0usize; 4];
        for seed in 0..20_000 {
            let s = run_mediated_round(&device, seed).unwrap();
            types[device.space().encode(&s.true_types).unwrap()] += 1;
        }
        assert!(types.iter().all(|&c| (c as f64 / 20_000.0 - 0.25).abs() < 0.02));
    }

    #[test]
    fn zero_prior_report_rejected() {
        let space = build_type_space(
            &two_point_grids(2, 1.0, 2.0),
            &PriorSpec::Explicit(vec![0.5, 0.5, 0.0, 0.0]),
            TypeMode::Diagonal,
        )
        .unwrap();
        let device = CommDevice::new(space, vec![JointDistribution::uniform(vec![2, 2]); 4]).unwrap();
        assert!(run_mediator_session(&device, &[1, 0], 0).is_err());
    }
}
