//! Pure Nash equilibria of a payoff tensor and the closed-form mixed
//! equilibria of 2×2 games.
//!
//! Best responses compare stored payoffs exactly. Callers who want
//! ε-equilibria should round the tensor first.

use crate::error::{dims, invalid, Result};
use crate::game::PayoffTensor;
use crate::par::{self, Exec};
use serde::Serialize;

/// One action index per player.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct PureProfile(pub Vec<usize>);

impl PureProfile {
    pub fn actions(&self) -> &[usize] {
        &self.0
    }
}

/// Actions of player `i` maximizing its payoff against `others` (the other
/// players' actions in player order, `K - 1` entries).
pub fn best_response_set(tensor: &PayoffTensor, i: usize, others: &[usize]) -> Result<Vec<usize>> {
    let k = tensor.players();
    if i >= k {
        return Err(invalid(format!("player {i} out of range")));
    }
    if others.len() + 1 != k {
        return Err(dims(format!("partial profile has {} entries, expected {}", others.len(), k - 1)));
    }
    let mut profile = Vec::with_capacity(k);
    profile.extend_from_slice(&others[..i]);
    profile.push(0);
    profile.extend_from_slice(&others[i..]);
    let base = tensor.encode(&profile)?;
    Ok(best_responses_at(tensor, i, base))
}

fn best_responses_at(tensor: &PayoffTensor, i: usize, idx: usize) -> Vec<usize> {
    let m = tensor.dims()[i];
    let payoffs: Vec<f64> = (0..m).map(|a| tensor.payoff(i, tensor.with_action(idx, i, a))).collect();
    let best = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..m).filter(|&a| payoffs[a] == best).collect()
}

fn is_pure_nash(tensor: &PayoffTensor, idx: usize) -> bool {
    (0..tensor.players()).all(|i| {
        let own = tensor.payoff(i, idx);
        (0..tensor.dims()[i]).all(|a| tensor.payoff(i, tensor.with_action(idx, i, a)) <= own)
    })
}

/// All pure Nash equilibria, ordered by mixed-radix profile index.
pub fn enumerate_pure_nash(tensor: &PayoffTensor) -> Vec<PureProfile> {
    enumerate_pure_nash_with(tensor, Exec::default())
}

pub fn enumerate_pure_nash_with(tensor: &PayoffTensor, exec: Exec) -> Vec<PureProfile> {
    par::map_range(exec, tensor.profile_count(), |idx| is_pure_nash(tensor, idx))
        .into_iter()
        .enumerate()
        .filter(|&(_, ne)| ne)
        .map(|(idx, _)| PureProfile(tensor.decode(idx)))
        .collect()
}

/// A Nash equilibrium of a 2×2 game in mixed strategies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixedEquilibrium {
    /// `strategies[i][a]` is the probability that player `i` plays `a`.
    pub strategies: [[f64; 2]; 2],
    pub payoffs: [f64; 2],
    pub pure: bool,
}

/// Pure equilibria followed by the fully mixed indifference point when it
/// exists. Games with exact payoff ties can also have continua of partially
/// mixed equilibria; those are not listed.
pub fn mixed_nash_2x2(tensor: &PayoffTensor) -> Result<Vec<MixedEquilibrium>> {
    if tensor.dims() != [2, 2] {
        return Err(dims(format!("expected a 2x2 game, got dims {:?}", tensor.dims())));
    }
    let a = |r: usize, c: usize| tensor.payoff(0, 2 * r + c);
    let b = |r: usize, c: usize| tensor.payoff(1, 2 * r + c);
    let expected = |p: f64, q: f64| {
        let w = [[p * q, p * (1.0 - q)], [(1.0 - p) * q, (1.0 - p) * (1.0 - q)]];
        let mut u = [0.0; 2];
        for r in 0..2 {
            for c in 0..2 {
                u[0] += w[r][c] * a(r, c);
                u[1] += w[r][c] * b(r, c);
            }
        }
        u
    };

    let mut out: Vec<MixedEquilibrium> = enumerate_pure_nash(tensor)
        .into_iter()
        .map(|pp| {
            let (r, c) = (pp.0[0], pp.0[1]);
            let p = if r == 0 { 1.0 } else { 0.0 };
            let q = if c == 0 { 1.0 } else { 0.0 };
            MixedEquilibrium { strategies: [[p, 1.0 - p], [q, 1.0 - q]], payoffs: [a(r, c), b(r, c)], pure: true }
        })
        .collect();

    // q = P(column 0) making the row player indifferent, p = P(row 0) making
    // the column player indifferent.
    let den_q = a(0, 0) - a(0, 1) - a(1, 0) + a(1, 1);
    let den_p = b(0, 0) - b(1, 0) - b(0, 1) + b(1, 1);
    if den_q != 0.0 && den_p != 0.0 {
        let q = (a(1, 1) - a(0, 1)) / den_q;
        let p = (b(1, 1) - b(1, 0)) / den_p;
        if p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0 {
            out.push(MixedEquilibrium {
                strategies: [[p, 1.0 - p], [q, 1.0 - q]],
                payoffs: expected(p, q),
                pure: false,
            });
        }
    }
    Ok(out)
}
