//! Power grids, channel gains, SINR, the packet-success efficiency function
//! and the dense payoff tensor.

use crate::error::{dims, invalid, Error, Result};
use crate::par::{self, Exec};
use serde::Serialize;

/// Default cap on `K · ∏ dims` tensor entries.
pub const DEFAULT_TENSOR_BUDGET: usize = 100_000_000;

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Discrete transmit power levels of one player, strictly increasing.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerGrid {
    pub min_db: f64,
    pub max_db: f64,
    pub levels: usize,
    pub values_linear: Vec<f64>,
}

impl PowerGrid {
    /// `levels` points uniformly spaced in dB over `[min_db, max_db]`.
    pub fn uniform_db(min_db: f64, max_db: f64, levels: usize) -> Result<Self> {
        if !min_db.is_finite() || !max_db.is_finite() {
            return Err(invalid("power grid bounds must be finite"));
        }
        if levels == 0 {
            return Err(invalid("power grid needs at least one level"));
        }
        if min_db > max_db {
            return Err(invalid(format!("min_db {min_db} exceeds max_db {max_db}")));
        }
        if levels == 1 && min_db != max_db {
            return Err(invalid("a single-level grid needs min_db == max_db"));
        }
        if levels > 1 && min_db == max_db {
            return Err(invalid("levels must be distinct"));
        }
        let span = max_db - min_db;
        let values_linear = (0..levels)
            .map(|k| {
                let db = if k + 1 == levels { max_db } else { min_db + span * k as f64 / (levels - 1) as f64 };
                db_to_linear(db)
            })
            .collect();
        Ok(PowerGrid { min_db, max_db, levels, values_linear })
    }

    /// Explicit dB levels, strictly increasing.
    pub fn from_db(levels_db: &[f64]) -> Result<Self> {
        if levels_db.iter().any(|v| !v.is_finite()) {
            return Err(invalid("dB levels must be finite"));
        }
        Self::from_linear(&levels_db.iter().map(|&d| db_to_linear(d)).collect::<Vec<_>>())
    }

    /// Explicit linear levels, nonnegative and strictly increasing.
    pub fn from_linear(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("power grid needs at least one level"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("power levels must be finite and nonnegative"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("power levels must be strictly increasing"));
        }
        let to_db = |v: f64| 10.0 * v.log10();
        Ok(PowerGrid {
            min_db: to_db(values[0]),
            max_db: to_db(values[values.len() - 1]),
            levels: values.len(),
            values_linear: values.to_vec(),
        })
    }

    pub fn max_power(&self) -> f64 {
        self.values_linear[self.levels - 1]
    }
}

/// `K × K` nonnegative gains; `gain(j, i)` is transmitter `j` to receiver `i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelMatrix {
    k: usize,
    g: Vec<f64>,
}

impl ChannelMatrix {
    /// `rows[j][i]` is the gain from transmitter `j` to receiver `i`.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(invalid("channel matrix needs at least one player"));
        }
        if rows.iter().any(|r| r.len() != k) {
            return Err(dims("channel matrix must be square"));
        }
        let g: Vec<f64> = rows.into_iter().flatten().collect();
        if g.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("channel gains must be finite and nonnegative"));
        }
        Ok(ChannelMatrix { k, g })
    }

    pub fn players(&self) -> usize {
        self.k
    }

    pub fn gain(&self, from: usize, to: usize) -> f64 {
        self.g[from * self.k + to]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.g.chunks(self.k).map(<[f64]>::to_vec).collect()
    }
}

/// SINR at receiver `i` for linear transmit powers `powers`.
///
/// The caller guarantees `noise > 0`, which [`GameInstance`] enforces.
/// `points` channel gains evenly spaced on `[min, max]`, both endpoints
/// included (step `(max - min) / (points - 1)`).
pub fn gain_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !min.is_finite() || !max.is_finite() || min < 0.0 || min > max {
        return Err(invalid(format!("gain grid needs 0 <= min <= max, got [{min}, {max}]")));
    }
    match points {
        0 => Err(invalid("gain grid needs at least one point")),
        1 if min != max => Err(invalid("a single-point gain grid needs min == max")),
        1 => Ok(vec![min]),
        _ => {
            let step = (max - min) / (points - 1) as f64;
            Ok((0..points).map(|k| if k + 1 == points { max } else { min + step * k as f64 }).collect())
        }
    }
}

pub fn sinr(i: usize, powers: &[f64], channel: &ChannelMatrix, noise: f64) -> f64 {
    let interference: f64 =
        powers.iter().enumerate().filter(|&(j, _)| j != i).map(|(j, &p)| p * channel.gain(j, i)).sum();
    powers[i] * channel.gain(i, i) / (noise + interference)
}

/// Packet success probability `(1 - e^{-x})^L`.
pub fn efficiency(x: f64, packet_len: u32) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(invalid(format!("efficiency needs x >= 0, got {x}")));
    }
    Ok(efficiency_unchecked(x, packet_len))
}

fn efficiency_unchecked(x: f64, packet_len: u32) -> f64 {
    let success = -(-x).exp_m1();
    success.powf(f64::from(packet_len))
}

/// Everything needed to evaluate utilities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameInstance {
    pub channel: ChannelMatrix,
    pub grids: Vec<PowerGrid>,
    /// Energy price per linear power unit.
    pub alpha: f64,
    /// Noise power σ² in linear units.
    pub noise: f64,
    pub packet_len: u32,
}

impl GameInstance {
    pub fn new(channel: ChannelMatrix, grids: Vec<PowerGrid>, alpha: f64, noise: f64, packet_len: u32) -> Result<Self> {
        if grids.len() != channel.players() {
            return Err(dims(format!("{} power grids for {} players", grids.len(), channel.players())));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(invalid(format!("alpha must be positive, got {alpha}")));
        }
        if !(noise.is_finite() && noise > 0.0) {
            return Err(invalid(format!("noise must be positive, got {noise}")));
        }
        if packet_len == 0 {
            return Err(invalid("packet length must be at least 1"));
        }
        Ok(GameInstance { channel, grids, alpha, noise, packet_len })
    }

    pub fn players(&self) -> usize {
        self.grids.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.grids.iter().map(|g| g.levels).collect()
    }

    /// Same powers, cost and noise on a different channel.
    pub fn with_channel(&self, channel: ChannelMatrix) -> Result<Self> {
        GameInstance::new(channel, self.grids.clone(), self.alpha, self.noise, self.packet_len)
    }

    /// `φ(SINR_i) - α·a_i` for linear powers `profile`.
    pub fn utility(&self, i: usize, profile: &[f64]) -> Result<f64> {
        if profile.len() != self.players() {
            return Err(dims(format!("profile has {} powers for {} players", profile.len(), self.players())));
        }
        if i >= self.players() {
            return Err(invalid(format!("player {i} out of range")));
        }
        if profile.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("powers must be finite and nonnegative"));
        }
        Ok(self.utility_unchecked(i, profile))
    }

    fn utility_unchecked(&self, i: usize, profile: &[f64]) -> f64 {
        let x = sinr(i, profile, &self.channel, self.noise);
        efficiency_unchecked(x, self.packet_len) - self.alpha * profile[i]
    }
}

/// Dense per-player payoffs over all joint action profiles.
///
/// Profiles are mixed-radix indexed with player 0 as the most significant
/// digit; payoffs are stored player-major, so player `i`'s payoff for profile
/// `p` lives at `values[i * profile_count + p]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PayoffTensor {
    dims: Vec<usize>,
    #[serde(skip)]
    strides: Vec<usize>,
    profiles: usize,
    values: Vec<f64>,
}

fn strides_for(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    strides
}

fn checked_profiles(dims: &[usize], budget: usize) -> Result<usize> {
    let mut total: u128 = 1;
    for &d in dims {
        total = total.saturating_mul(d as u128);
    }
    let needed = total.saturating_mul(dims.len() as u128);
    if needed > budget as u128 {
        return Err(Error::Budget { what: "payoff tensor", needed, limit: budget as u128 });
    }
    Ok(total as usize)
}

impl PayoffTensor {
    /// Wraps precomputed player-major payoffs.
    pub fn from_values(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(invalid("every player needs at least one action"));
        }
        let profiles = checked_profiles(&dims, usize::MAX)?;
        if values.len() != profiles * dims.len() {
            return Err(dims_err(values.len(), profiles * dims.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("payoffs must be finite"));
        }
        let strides = strides_for(&dims);
        Ok(PayoffTensor { dims, strides, profiles, values })
    }

    /// Builds payoffs from `f(player, profile)`.
    pub fn from_fn(dims: Vec<usize>, f: impl Fn(usize, &[usize]) -> f64) -> Result<Self> {
        let profiles = checked_profiles(&dims, usize::MAX)?;
        let strides = strides_for(&dims);
        let k = dims.len();
        let mut values = vec![0.0; k * profiles];
        let mut profile = vec![0; k];
        for idx in 0..profiles {
            decode_into(idx, &dims, &strides, &mut profile);
            for i in 0..k {
                values[i * profiles + idx] = f(i, &profile);
            }
        }
        Self::from_values(dims, values)
    }

    /// Two-player game from row-major payoff matrices.
    pub fn bimatrix(row_player: &[Vec<f64>], col_player: &[Vec<f64>]) -> Result<Self> {
        let m = row_player.len();
        let n = row_player.first().map_or(0, Vec::len);
        if col_player.len() != m || row_player.iter().chain(col_player).any(|r| r.len() != n) {
            return Err(dims("bimatrix payoffs must share one shape"));
        }
        Self::from_fn(vec![m, n], |i, a| if i == 0 { row_player[a[0]][a[1]] } else { col_player[a[0]][a[1]] })
    }

    pub fn players(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn profile_count(&self) -> usize {
        self.profiles
    }

    /// Index distance between profiles differing by one action of player `i`.
    pub fn stride(&self, i: usize) -> usize {
        self.strides[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn payoff(&self, player: usize, profile_index: usize) -> f64 {
        self.values[player * self.profiles + profile_index]
    }

    /// Player `i`'s payoffs over all profiles.
    pub fn player_payoffs(&self, player: usize) -> &[f64] {
        &self.values[player * self.profiles..(player + 1) * self.profiles]
    }

    /// Action of player `i` in profile `idx`.
    pub fn action_of(&self, idx: usize, player: usize) -> usize {
        (idx / self.strides[player]) % self.dims[player]
    }

    /// Profile index with player `i`'s action replaced by `action`.
    pub fn with_action(&self, idx: usize, player: usize, action: usize) -> usize {
        let s = self.strides[player];
        idx - self.action_of(idx, player) * s + action * s
    }

    pub fn encode(&self, profile: &[usize]) -> Result<usize> {
        if profile.len() != self.players() {
            return Err(dims(format!("profile of length {} for {} players", profile.len(), self.players())));
        }
        let mut idx = 0;
        for (i, (&a, &d)) in profile.iter().zip(&self.dims).enumerate() {
            if a >= d {
                return Err(invalid(format!("action {a} of player {i} out of range (< {d})")));
            }
            idx += a * self.strides[i];
        }
        Ok(idx)
    }

    pub fn decode(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.players()];
        decode_into(idx, &self.dims, &self.strides, &mut out);
        out
    }

    /// Payoff vector of profile `idx`.
    pub fn payoff_vector(&self, idx: usize) -> Vec<f64> {
        (0..self.players()).map(|i| self.payoff(i, idx)).collect()
    }

    pub fn welfare(&self, idx: usize) -> f64 {
        (0..self.players()).map(|i| self.payoff(i, idx)).sum()
    }

    /// `(min, max)` over all stored payoffs.
    pub fn payoff_range(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn spread(&self) -> f64 {
        let (lo, hi) = self.payoff_range();
        hi - lo
    }
}

fn dims_err(got: usize, want: usize) -> Error {
    dims(format!("{got} payoff values, expected {want}"))
}

fn decode_into(mut idx: usize, dims: &[usize], strides: &[usize], out: &mut [usize]) {
    for i in 0..dims.len() {
        out[i] = idx / strides[i];
        idx %= strides[i];
    }
}

/// Materializes all utilities of `game`.
pub fn build_payoff_tensor(game: &GameInstance) -> Result<PayoffTensor> {
    build_payoff_tensor_with(game, Exec::default(), DEFAULT_TENSOR_BUDGET)
}

pub fn build_payoff_tensor_with(game: &GameInstance, exec: Exec, budget: usize) -> Result<PayoffTensor> {
    let dims = game.dims();
    let profiles = checked_profiles(&dims, budget)?;
    let strides = strides_for(&dims);
    let k = dims.len();
    // One row of K payoffs per profile, transposed to player-major below.
    let rows = par::map_range(exec, profiles, |idx| {
        let mut actions = vec![0; k];
        decode_into(idx, &dims, &strides, &mut actions);
        let powers: Vec<f64> = actions.iter().zip(&game.grids).map(|(&a, g)| g.values_linear[a]).collect();
        (0..k).map(|i| game.utility_unchecked(i, &powers)).collect::<Vec<_>>()
    });
    let mut values = vec![0.0; k * profiles];
    for (idx, row) in rows.into_iter().enumerate() {
        for (i, v) in row.into_iter().enumerate() {
            values[i * profiles + idx] = v;
        }
    }
    PayoffTensor::from_values(dims, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_grid_endpoints() {
        let g = gain_grid(0.01, 3.0, 10).unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[9], 3.0);
        assert!((g[1] - (0.01 + 2.99 / 9.0)).abs() < 1e-15);
        assert_eq!(gain_grid(0.5, 0.5, 1).unwrap(), vec![0.5]);
        assert!(gain_grid(0.5, 1.0, 1).is_err());
        assert!(gain_grid(-1.0, 1.0, 3).is_err());
        assert!(gain_grid(0.0, 1.0, 0).is_err());
    }
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn power_grid_examples() {
        let g = PowerGrid::uniform_db(-20.0, 20.0, 25).unwrap();
        assert_eq!(g.levels, 25);
        assert!(rel(g.values_linear[0], 0.01) < 1e-14);
        assert!(rel(g.values_linear[24], 100.0) < 1e-14);
        // 40/24 dB apart.
        let step = 10.0 * (g.values_linear[1] / g.values_linear[0]).log10();
        assert!((step - 40.0 / 24.0).abs() < 1e-12);

        let one = PowerGrid::uniform_db(0.0, 0.0, 1).unwrap();
        assert_eq!(one.values_linear, vec![1.0]);

        let three = PowerGrid::uniform_db(-10.0, 10.0, 3).unwrap();
        for (v, want) in three.values_linear.iter().zip([0.1, 1.0, 10.0]) {
            assert!(rel(*v, want) < 1e-14);
        }
    }

    #[test]
    fn power_grid_errors() {
        assert!(PowerGrid::uniform_db(f64::NAN, 1.0, 2).is_err());
        assert!(PowerGrid::uniform_db(0.0, 1.0, 0).is_err());
        assert!(PowerGrid::uniform_db(2.0, 1.0, 2).is_err());
        assert!(PowerGrid::uniform_db(0.0, 1.0, 1).is_err());
        assert!(PowerGrid::from_linear(&[1.0, 1.0]).is_err());
        assert!(PowerGrid::from_linear(&[-1.0]).is_err());
    }

    #[test]
    fn sinr_examples() {
        let ch = ChannelMatrix::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(sinr(0, &[1.0, 0.0], &ch, 1.0), 1.0);
        let ch = ChannelMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(sinr(0, &[1.0, 1.0], &ch, 1.0), 0.5);
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(efficiency(0.0, 100).unwrap(), 0.0);
        assert!((efficiency(std::f64::consts::LN_2, 1).unwrap() - 0.5).abs() < 1e-15);
        // (1 - e^-1)^100 evaluated with 50-digit arithmetic (mpmath).
        let want = 1.202_241_007_200_134e-20;
        assert!(rel(efficiency(1.0, 100).unwrap(), want) < 1e-13);
        assert!(efficiency(-1e-9, 1).is_err());
    }

    #[test]
    fn utility_examples() {
        let ch = ChannelMatrix::new(vec![vec![1.0]]).unwrap();
        let game = GameInstance::new(ch, vec![PowerGrid::from_linear(&[0.0, 1.0]).unwrap()], 0.01, 1.0, 1).unwrap();
        assert_eq!(game.utility(0, &[0.0]).unwrap(), 0.0);
        let want = (1.0 - (-1.0f64).exp()) - 0.01;
        assert!((game.utility(0, &[1.0]).unwrap() - want).abs() < 1e-15);
        assert!(game.utility(0, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn game_instance_validation() {
        let ch = ChannelMatrix::new(vec![vec![1.0]]).unwrap();
        let g = vec![PowerGrid::uniform_db(0.0, 0.0, 1).unwrap()];
        assert!(GameInstance::new(ch.clone(), g.clone(), 0.0, 1.0, 1).is_err());
        assert!(GameInstance::new(ch.clone(), g.clone(), 0.1, 0.0, 1).is_err());
        assert!(GameInstance::new(ch.clone(), g.clone(), 0.1, 1.0, 0).is_err());
        assert!(GameInstance::new(ch, vec![], 0.1, 1.0, 1).is_err());
        assert!(ChannelMatrix::new(vec![vec![1.0, -0.1], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn tensor_budget() {
        let ch = ChannelMatrix::new(vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let g = PowerGrid::uniform_db(-20.0, 20.0, 25).unwrap();
        let game = GameInstance::new(ch, vec![g.clone(), g], 0.01, 1.0, 100).unwrap();
        let t = build_payoff_tensor(&game).unwrap();
        assert_eq!(t.values().len(), 2 * 625);
        assert!(matches!(build_payoff_tensor_with(&game, Exec::Sequential, 1000), Err(Error::Budget { .. })));
    }

    #[test]
    fn index_round_trip_exhaustive() {
        let t = PayoffTensor::from_fn(vec![2, 3, 4], |_, _| 0.0).unwrap();
        for idx in 0..t.profile_count() {
            assert_eq!(t.encode(&t.decode(idx)).unwrap(), idx);
        }
        // Player 0 is the most significant digit.
        assert_eq!(t.encode(&[1, 0, 0]).unwrap(), 12);
        assert_eq!(t.with_action(t.encode(&[1, 2, 3]).unwrap(), 1, 0), t.encode(&[1, 0, 3]).unwrap());
        assert!(t.encode(&[0, 3, 0]).is_err());
    }

    fn arb_game() -> impl Strategy<Value = GameInstance> {
        (1usize..=3, 1usize..=4, 0.001f64..0.1, 0.1f64..2.0, 1u32..120)
            .prop_flat_map(|(k, m, alpha, noise, l)| {
                (proptest::collection::vec(0.0f64..3.0, k * k), Just((k, m, alpha, noise, l)))
            })
            .prop_map(|(g, (k, m, alpha, noise, l))| {
                let rows = g.chunks(k).map(<[f64]>::to_vec).collect();
                let grid = if m == 1 {
                    PowerGrid::uniform_db(0.0, 0.0, 1).unwrap()
                } else {
                    PowerGrid::uniform_db(-20.0, 20.0, m).unwrap()
                };
                GameInstance::new(ChannelMatrix::new(rows).unwrap(), vec![grid; k], alpha, noise, l).unwrap()
            })
    }

    proptest! {
        #[test]
        fn efficiency_bounded_and_monotone(x in 0.0f64..50.0, dx in 0.0f64..5.0, l in 1u32..200) {
            let a = efficiency(x, l).unwrap();
            let b = efficiency(x + dx, l).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b >= a);
        }

        #[test]
        fn sinr_monotone(p in proptest::collection::vec(0.0f64..10.0, 3), bump in 0.01f64..5.0,
                         g in proptest::collection::vec(0.01f64..3.0, 9)) {
            let ch = ChannelMatrix::new(g.chunks(3).map(<[f64]>::to_vec).collect()).unwrap();
            let base = sinr(0, &p, &ch, 1.0);
            let mut own = p.clone();
            own[0] += bump;
            prop_assert!(sinr(0, &own, &ch, 1.0) > base);
            let mut other = p.clone();
            other[2] += bump;
            prop_assert!(sinr(0, &other, &ch, 1.0) <= base);
        }

        #[test]
        fn tensor_matches_utility_and_bounds(game in arb_game()) {
            let t = build_payoff_tensor(&game).unwrap();
            let k = game.players();
            for idx in 0..t.profile_count() {
                let a = t.decode(idx);
                let powers: Vec<f64> = a.iter().zip(&game.grids).map(|(&x, g)| g.values_linear[x]).collect();
                for i in 0..k {
                    let u = t.payoff(i, idx);
                    prop_assert_eq!(u, game.utility(i, &powers).unwrap());
                    prop_assert!(u <= 1.0 && u >= -game.alpha * game.grids[i].max_power());
                }
            }
            let seq = build_payoff_tensor_with(&game, Exec::Sequential, DEFAULT_TENSOR_BUDGET).unwrap();
            prop_assert_eq!(seq, t);
        }
    }
}
