//! Experiment configuration: JSON schema, defaults and validation.

use crate::error::{CliError, CliResult};
use powergame::communication::{build_type_space, Formulation, PriorSpec, TypeMode, TypeSpace};
use powergame::game::gain_grid;
use powergame::lp::SolverOptions;
use powergame::regret::RegretRule;
use powergame::{ChannelMatrix, Exec, GameInstance, PowerGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Power levels of one player: either a uniform dB grid or explicit dB
/// levels.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels_db: Option<Vec<f64>>,
}

impl GridSpec {
    fn resolve(&mut self, field: &str) -> CliResult<()> {
        if self.levels_db.is_some() {
            if self.min_db.is_some() || self.max_db.is_some() || self.levels.is_some() {
                return Err(invalid(field, "give either levels_db or min_db/max_db/levels, not both"));
            }
        } else {
            self.min_db.get_or_insert(-20.0);
            self.max_db.get_or_insert(20.0);
            self.levels.get_or_insert(25);
        }
        self.build().map_err(|e| invalid(field, e))?;
        Ok(())
    }

    pub fn build(&self) -> powergame::Result<PowerGrid> {
        match &self.levels_db {
            Some(db) => PowerGrid::from_db(db),
            None => PowerGrid::uniform_db(
                self.min_db.unwrap_or(-20.0),
                self.max_db.unwrap_or(20.0),
                self.levels.unwrap_or(25),
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PowerSpec {
    Shared(GridSpec),
    PerPlayer(Vec<GridSpec>),
}

impl Default for PowerSpec {
    fn default() -> Self {
        PowerSpec::Shared(GridSpec::default())
    }
}

/// Evenly spaced channel gains shared by every link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainGridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for GainGridSpec {
    fn default() -> Self {
        GainGridSpec { min: 0.01, max: 3.0, points: 10 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    #[default]
    Sample,
    Enumerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub mode: SweepMode,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { mode: SweepMode::Sample, samples: 200, seed: 0 }
    }
}

/// Channel gains: a fixed matrix (`matrix[j][i]` from transmitter `j` to
/// receiver `i`) or a grid applied to every link (the default grid when
/// neither is given).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GainGridSpec>,
    pub sweep: SweepSpec,
    /// Grid state used by single-game commands; defaults to the middle point
    /// of every link grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TypesSpec {
    pub mode: TypeMode,
    pub prior: PriorSpec,
    /// Gains per link grid used for types (endpoints of the channel grid
    /// range included).
    pub points: usize,
    /// Action counts for the sweep's communication-equilibrium table.
    pub actions: Vec<usize>,
    /// Explicit dB levels per table row; overrides `actions`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grids_db: Option<Vec<Vec<f64>>>,
}

impl Default for TypesSpec {
    fn default() -> Self {
        TypesSpec {
            mode: TypeMode::Diagonal,
            prior: PriorSpec::Uniform,
            points: 2,
            actions: vec![2, 3, 4],
            grids_db: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub formulation: Formulation,
    pub directions: usize,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub max_iterations: Option<usize>,
    pub stall_threshold: usize,
    pub perturbation: f64,
    pub max_tableau_entries: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverSpec {
            formulation: Formulation::Literal,
            directions: powergame::correlated::DEFAULT_DIRECTIONS,
            feasibility_tol: o.feasibility_tol,
            optimality_tol: o.optimality_tol,
            pivot_tol: o.pivot_tol,
            max_iterations: o.max_iterations,
            stall_threshold: o.stall_threshold,
            perturbation: o.perturbation,
            max_tableau_entries: o.max_tableau_entries,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningSpec {
    pub steps: u64,
    pub seed: u64,
    pub mu: Option<f64>,
    pub rule: RegretRule,
    /// Also run regret matching at every sweep state.
    pub in_sweep: bool,
}

impl Default for LearningSpec {
    fn default() -> Self {
        LearningSpec { steps: 100_000, seed: 0, mu: None, rule: RegretRule::Standard, in_sweep: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: "out".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub players: usize,
    pub power: PowerSpec,
    pub channel: ChannelSpec,
    pub alpha: f64,
    pub noise: f64,
    pub packet_len: u32,
    pub types: TypesSpec,
    pub solver: SolverSpec,
    pub learning: LearningSpec,
    pub output: OutputSpec,
    /// Sweep worker threads; 0 uses the available parallelism.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            players: 2,
            power: PowerSpec::default(),
            channel: ChannelSpec::default(),
            alpha: 0.01,
            noise: 1.0,
            packet_len: 100,
            types: TypesSpec::default(),
            solver: SolverSpec::default(),
            learning: LearningSpec::default(),
            output: OutputSpec::default(),
            workers: 0,
        }
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

/// Reads, parses, defaults and validates a config file.
pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    if text.trim().is_empty() {
        return Err(CliError::Config("empty config file".into()));
    }
    let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.resolve()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Fills optional fields with their defaults and checks every constraint.
    pub fn resolve(&mut self) -> CliResult<()> {
        let k = self.players;
        if k == 0 {
            return Err(invalid("players", "must be at least 1"));
        }
        match &mut self.power {
            PowerSpec::Shared(g) => g.resolve("power")?,
            PowerSpec::PerPlayer(list) => {
                if list.len() != k {
                    return Err(invalid("power", format!("{} grids for {k} players", list.len())));
                }
                for (i, g) in list.iter_mut().enumerate() {
                    g.resolve(&format!("power[{i}]"))?;
                }
            }
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(invalid("alpha", format!("must be a positive number, got {}", self.alpha)));
        }
        if !(self.noise.is_finite() && self.noise > 0.0) {
            return Err(invalid("noise", format!("must be a positive number, got {}", self.noise)));
        }
        if self.packet_len == 0 {
            return Err(invalid("packet_len", "must be at least 1"));
        }

        if self.channel.matrix.is_none() && self.channel.grid.is_none() {
            self.channel.grid = Some(GainGridSpec::default());
        }
        let ch = &self.channel;
        match (&ch.matrix, &ch.grid) {
            (Some(_), Some(_)) => return Err(invalid("channel", "give either matrix or grid, not both")),
            (None, None) => unreachable!("defaulted above"),
            (Some(m), None) => {
                if m.len() != k || m.iter().any(|r| r.len() != k) {
                    return Err(invalid("channel.matrix", format!("must be {k}x{k}")));
                }
                ChannelMatrix::new(m.clone()).map_err(|e| invalid("channel.matrix", e))?;
                if ch.state.is_some_and(|s| s != 0) {
                    return Err(invalid("channel.state", "a fixed matrix has only state 0"));
                }
            }
            (None, Some(g)) => {
                gain_grid(g.min, g.max, g.points).map_err(|e| invalid("channel.grid", e))?;
                if let Some(s) = ch.state {
                    if s >= self.state_count() {
                        return Err(invalid(
                            "channel.state",
                            format!("{s} is out of range (< {})", self.state_count()),
                        ));
                    }
                }
            }
        }
        if ch.sweep.samples == 0 {
            return Err(invalid("channel.sweep.samples", "must be at least 1"));
        }

        let t = &mut self.types;
        if t.points == 0 {
            return Err(invalid("types.points", "must be at least 1"));
        }
        if let Some(grids) = &t.grids_db {
            if grids.is_empty() {
                return Err(invalid("types.grids_db", "needs at least one grid"));
            }
            for (r, db) in grids.iter().enumerate() {
                PowerGrid::from_db(db).map_err(|e| invalid(&format!("types.grids_db[{r}]"), e))?;
            }
            t.actions = grids.iter().map(Vec::len).collect();
        } else if t.actions.is_empty() || t.actions.contains(&0) {
            return Err(invalid("types.actions", "must list positive action counts"));
        }
        let field = if matches!(t.prior, PriorSpec::Explicit(_)) { "types.prior" } else { "types" };
        self.type_space().map_err(|e| invalid(field, e))?;

        let s = &self.solver;
        for (name, v) in [
            ("solver.feasibility_tol", s.feasibility_tol),
            ("solver.optimality_tol", s.optimality_tol),
            ("solver.pivot_tol", s.pivot_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be a positive number, got {v}")));
            }
        }
        if !(s.perturbation.is_finite() && s.perturbation >= 0.0) {
            return Err(invalid("solver.perturbation", "must be a nonnegative number"));
        }
        if s.directions < 4 {
            return Err(invalid("solver.directions", "must be at least 4"));
        }
        if s.stall_threshold == 0 {
            return Err(invalid("solver.stall_threshold", "must be at least 1"));
        }
        if s.max_iterations == Some(0) {
            return Err(invalid("solver.max_iterations", "must be at least 1"));
        }

        let l = &self.learning;
        if l.steps == 0 {
            return Err(invalid("learning.steps", "must be at least 1"));
        }
        if l.mu.is_some_and(|m| !(m.is_finite() && m > 0.0)) {
            return Err(invalid("learning.mu", "must be a positive number"));
        }
        if self.output.dir.is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the compact JSON of the resolved config.
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }

    pub fn grid_specs(&self) -> Vec<GridSpec> {
        match &self.power {
            PowerSpec::Shared(g) => vec![g.clone(); self.players],
            PowerSpec::PerPlayer(list) => list.clone(),
        }
    }

    pub fn grids(&self) -> CliResult<Vec<PowerGrid>> {
        self.grid_specs().iter().map(|g| g.build().map_err(CliError::from)).collect()
    }

    pub fn game(&self, channel: ChannelMatrix) -> CliResult<GameInstance> {
        Ok(GameInstance::new(channel, self.grids()?, self.alpha, self.noise, self.packet_len)?)
    }

    /// Link gain grid, when the channel is a grid.
    pub fn link_gains(&self) -> Option<Vec<f64>> {
        self.channel.grid.as_ref().map(|g| gain_grid(g.min, g.max, g.points).expect("validated"))
    }

    /// Number of channel states: `points^(K²)` for a grid, 1 for a matrix.
    pub fn state_count(&self) -> usize {
        match &self.channel.grid {
            None => 1,
            Some(g) => g.points.checked_pow((self.players * self.players) as u32).unwrap_or(usize::MAX),
        }
    }

    /// Channel of state `index`: links `(j, i)` in row-major order form the
    /// digits of `index`, link `(0, 0)` most significant.
    pub fn channel_at(&self, index: usize) -> CliResult<ChannelMatrix> {
        let k = self.players;
        let Some(gains) = self.link_gains() else {
            return Ok(ChannelMatrix::new(self.channel.matrix.clone().expect("validated"))?);
        };
        if index >= self.state_count() {
            return Err(invalid("channel.state", format!("{index} is out of range (< {})", self.state_count())));
        }
        let n = gains.len();
        let mut rows = vec![vec![0.0; k]; k];
        let mut rest = index;
        for link in (0..k * k).rev() {
            rows[link / k][link % k] = gains[rest % n];
            rest /= n;
        }
        Ok(ChannelMatrix::new(rows)?)
    }

    /// State used by single-game commands: the override, then the config's
    /// `channel.state`, then the middle point of every link grid.
    pub fn single_state(&self, overridden: Option<usize>) -> usize {
        if let Some(s) = overridden.or(self.channel.state) {
            return s;
        }
        match &self.channel.grid {
            None => 0,
            Some(g) => {
                let mid = (g.points - 1) / 2;
                (0..self.players * self.players).fold(0, |acc, _| acc * g.points + mid)
            }
        }
    }

    pub fn solver_options(&self, exec: Exec) -> SolverOptions {
        let s = &self.solver;
        SolverOptions {
            feasibility_tol: s.feasibility_tol,
            optimality_tol: s.optimality_tol,
            pivot_tol: s.pivot_tol,
            max_iterations: s.max_iterations,
            stall_threshold: s.stall_threshold,
            perturbation: s.perturbation,
            max_tableau_entries: s.max_tableau_entries,
            exec,
        }
    }

    /// Type space over channel gains: `types.points` gains per link spanning
    /// the channel grid, or the single fixed matrix.
    pub fn type_space(&self) -> powergame::Result<TypeSpace> {
        let k = self.players;
        let link: Vec<Vec<Vec<f64>>> = match (&self.channel.grid, &self.channel.matrix) {
            (Some(g), _) => {
                let gains = gain_grid(g.min, g.max, self.types.points)?;
                vec![vec![gains; k]; k]
            }
            (None, Some(m)) => m.iter().map(|row| row.iter().map(|&v| vec![v]).collect()).collect(),
            (None, None) => unreachable!("validated"),
        };
        build_type_space(&link, &self.types.prior, self.types.mode)
    }

    /// dB levels for each row of the communication-equilibrium table.
    pub fn table_grids(&self) -> Vec<Vec<f64>> {
        if let Some(g) = &self.types.grids_db {
            return g.clone();
        }
        let spec = &self.grid_specs()[0];
        let (lo, hi) = match &spec.levels_db {
            Some(db) => (db[0], db[db.len() - 1]),
            None => (spec.min_db.unwrap_or(-20.0), spec.max_db.unwrap_or(20.0)),
        };
        self.types.actions.iter().map(|&m| nested_levels_db(lo, hi, m)).collect()
    }
}

/// `m` dB levels on `[lo, hi]` built by repeatedly splitting the widest gap
/// at its midpoint (ties go to the highest gap), so the grid for `m` contains
/// the grid for every smaller count.
pub fn nested_levels_db(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m <= 1 || lo == hi {
        return vec![hi];
    }
    let mut levels = vec![lo, hi];
    while levels.len() < m {
        let mut best = 0;
        for k in 1..levels.len() - 1 {
            if levels[k + 1] - levels[k] >= levels[best + 1] - levels[best] {
                best = k;
            }
        }
        let mid = 0.5 * (levels[best] + levels[best + 1]);
        levels.insert(best + 1, mid);
    }
    levels
}
