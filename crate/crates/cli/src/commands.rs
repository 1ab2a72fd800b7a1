//! One function per subcommand. Each writes its files under
//! `<out>/<command>/` and returns a short summary plus the written paths.

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{csv, fmt_f64, point_csv, Metadata, OutputSet};
use powergame::communication::{
    commeq_lp_size, run_mediated_round, solve_commeq_with, CommReport, Formulation, GameFamily, MediatorSession,
};
use powergame::correlated::{
    ce_payoff_region_with, mediator_sample, solve_directional_ce_with, EquilibriumReport, REGION_DEDUP_TOL,
};
use powergame::game::{build_payoff_tensor_with, DEFAULT_TENSOR_BUDGET};
use powergame::geometry::{self, Point};
use powergame::lp::SolverOptions;
use powergame::nash::{enumerate_pure_nash_with, mixed_nash_2x2, MixedEquilibrium, PureProfile};
use powergame::regret::{rm_run, RegretRule, TracePoint};
use powergame::{par, ChannelMatrix, Exec, GameInstance, PayoffTensor, PowerGrid};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

fn tensor_for(game: &GameInstance, exec: Exec) -> CliResult<PayoffTensor> {
    Ok(build_payoff_tensor_with(game, exec, DEFAULT_TENSOR_BUDGET)?)
}

fn single_game(cfg: &ExperimentConfig, state: Option<usize>) -> CliResult<(usize, GameInstance, PayoffTensor)> {
    let s = cfg.single_state(state);
    let game = cfg.game(cfg.channel_at(s)?)?;
    let tensor = tensor_for(&game, Exec::Parallel)?;
    Ok((s, game, tensor))
}

fn welfare_ce(tensor: &PayoffTensor, opts: &SolverOptions) -> CliResult<EquilibriumReport> {
    Ok(solve_directional_ce_with(tensor, &vec![1.0; tensor.players()], opts)?)
}

#[derive(Serialize)]
struct GridOut {
    levels: usize,
    values_linear: Vec<f64>,
    values_db: Vec<f64>,
}

fn grid_out(g: &PowerGrid) -> GridOut {
    GridOut {
        levels: g.levels,
        values_linear: g.values_linear.clone(),
        values_db: g.values_linear.iter().map(|v| 10.0 * v.log10()).collect(),
    }
}

// game dump

#[derive(Serialize)]
struct GameDump {
    state: usize,
    channel: Vec<Vec<f64>>,
    grids: Vec<GridOut>,
    alpha: f64,
    noise: f64,
    packet_len: u32,
    dims: Vec<usize>,
    /// `payoffs[i][idx]`, profile index mixed-radix with player 0 most
    /// significant.
    payoffs: Vec<Vec<f64>>,
    payoff_min: f64,
    payoff_max: f64,
}

pub fn game_dump(cfg: &ExperimentConfig, out: &Path, state: Option<usize>) -> CliResult<Outcome> {
    let (s, game, tensor) = single_game(cfg, state)?;
    let (lo, hi) = tensor.payoff_range();
    let dump = GameDump {
        state: s,
        channel: game.channel.rows(),
        grids: game.grids.iter().map(grid_out).collect(),
        alpha: game.alpha,
        noise: game.noise,
        packet_len: game.packet_len,
        dims: tensor.dims().to_vec(),
        payoffs: (0..tensor.players()).map(|i| tensor.player_payoffs(i).to_vec()).collect(),
        payoff_min: lo,
        payoff_max: hi,
    };
    let meta = Metadata::new("game dump", cfg);
    let mut set = OutputSet::new(&out.join("game"))?;
    set.write_json("game.json", &meta, &dump)?;
    let files = set.finish(&meta, &serde_json::json!({ "state": s }))?;
    Ok(Outcome { summary: format!("state {s}: {} profiles, payoffs in [{lo}, {hi}]", tensor.profile_count()), files })
}

// nash

#[derive(Clone, Serialize)]
pub struct NashPoint {
    pub actions: Vec<usize>,
    pub powers: Vec<f64>,
    pub payoffs: Vec<f64>,
    pub welfare: f64,
}

pub fn nash_points(game: &GameInstance, tensor: &PayoffTensor, exec: Exec) -> Vec<NashPoint> {
    enumerate_pure_nash_with(tensor, exec)
        .into_iter()
        .map(|p| {
            let idx = tensor.encode(p.actions()).expect("enumerated profiles are valid");
            NashPoint {
                actions: p.0.clone(),
                powers: p.0.iter().enumerate().map(|(i, &a)| game.grids[i].values_linear[a]).collect(),
                payoffs: tensor.payoff_vector(idx),
                welfare: tensor.welfare(idx),
            }
        })
        .collect()
}

/// Fully mixed equilibria of a 2×2 game; empty for other shapes.
pub fn mixed_points(tensor: &PayoffTensor) -> CliResult<Vec<MixedEquilibrium>> {
    if tensor.dims() != [2, 2] {
        return Ok(Vec::new());
    }
    Ok(mixed_nash_2x2(tensor)?.into_iter().filter(|m| !m.pure).collect())
}

#[derive(Serialize)]
struct NashOut {
    state: usize,
    channel: Vec<Vec<f64>>,
    pure: Vec<NashPoint>,
    mixed_2x2: Vec<MixedEquilibrium>,
}

pub fn nash(cfg: &ExperimentConfig, out: &Path, state: Option<usize>) -> CliResult<Outcome> {
    let (s, game, tensor) = single_game(cfg, state)?;
    let body = NashOut {
        state: s,
        channel: game.channel.rows(),
        pure: nash_points(&game, &tensor, Exec::Parallel),
        mixed_2x2: mixed_points(&tensor)?,
    };
    let meta = Metadata::new("nash", cfg);
    let mut set = OutputSet::new(&out.join("nash"))?;
    set.write_json("nash.json", &meta, &body)?;
    let files = set.finish(&meta, &serde_json::json!({ "state": s }))?;
    let best = match body.pure.iter().map(|p| p.welfare).reduce(f64::max) {
        Some(w) => fmt_f64(w),
        None => "n/a".into(),
    };
    Ok(Outcome {
        summary: format!("state {s}: {} pure NE, best welfare {best}; {} mixed", body.pure.len(), body.mixed_2x2.len()),
        files,
    })
}

// ce

#[derive(Serialize)]
struct SupportEntry {
    actions: Vec<usize>,
    probability: f64,
}

#[derive(Serialize)]
struct CeOut {
    state: usize,
    channel: Vec<Vec<f64>>,
    objective: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    weights: Vec<f64>,
    per_player_value: Vec<f64>,
    welfare: f64,
    max_violation: f64,
    solver_iterations: usize,
    support: Vec<SupportEntry>,
    /// Mixed-radix order, player 0 most significant.
    distribution: Vec<f64>,
    recommendation: PureProfile,
}

pub fn ce(
    cfg: &ExperimentConfig,
    out: &Path,
    state: Option<usize>,
    theta: Option<f64>,
    dump_lp: bool,
) -> CliResult<Outcome> {
    let (s, game, tensor) = single_game(cfg, state)?;
    let weights = match theta {
        None => vec![1.0; tensor.players()],
        Some(t) => {
            if tensor.players() != 2 {
                return Err(CliError::Config("--direction needs a 2-player game".into()));
            }
            if !t.is_finite() {
                return Err(CliError::Config("--direction must be a finite angle in radians".into()));
            }
            vec![t.cos(), t.sin()]
        }
    };
    let opts = cfg.solver_options(Exec::Parallel);
    let rep = solve_directional_ce_with(&tensor, &weights, &opts)?;
    let seed = cfg.learning.seed;
    let recommendation = mediator_sample(&rep.distribution, seed)?;
    let probs = rep.distribution.probs();
    let body = CeOut {
        state: s,
        channel: game.channel.rows(),
        objective: if theta.is_some() { "direction" } else { "welfare" },
        theta,
        weights: weights.clone(),
        per_player_value: rep.per_player_value.clone(),
        welfare: rep.welfare,
        max_violation: rep.max_violation,
        solver_iterations: rep.solver_iterations,
        support: (0..probs.len())
            .filter(|&i| probs[i] > 0.0)
            .map(|i| SupportEntry { actions: tensor.decode(i), probability: probs[i] })
            .collect(),
        distribution: probs.to_vec(),
        recommendation,
    };
    let meta = Metadata::new("ce", cfg).seed("mediator", seed);
    let mut set = OutputSet::new(&out.join("ce"))?;
    set.write_json("ce.json", &meta, &body)?;
    if dump_lp {
        let mut lp = powergame::correlated::build_ce_constraints(&tensor);
        lp.objective = (0..tensor.profile_count())
            .map(|idx| weights.iter().enumerate().map(|(i, w)| w * tensor.payoff(i, idx)).sum())
            .collect();
        let mut buf = Vec::new();
        lp.write_mps_like("CE", &mut buf)?;
        set.write_text("ce.lp", &String::from_utf8(buf).expect("dump is ASCII"))?;
    }
    let files = set.finish(&meta, &serde_json::json!({ "state": s, "theta": theta }))?;
    Ok(Outcome {
        summary: format!(
            "state {s}: CE values {:?}, welfare {}, violation {:e}, {} pivots",
            rep.per_player_value, rep.welfare, rep.max_violation, rep.solver_iterations
        ),
        files,
    })
}

// commeq

/// Games at every joint type for the configured power grids.
pub fn family_for(cfg: &ExperimentConfig, grids: Vec<PowerGrid>, exec: Exec) -> CliResult<GameFamily> {
    let space = cfg.type_space()?;
    let k = cfg.players;
    let placeholder = ChannelMatrix::new(vec![vec![1.0; k]; k])?;
    let template = GameInstance::new(placeholder, grids, cfg.alpha, cfg.noise, cfg.packet_len)?;
    Ok(GameFamily::from_power_game(space, &template, exec)?)
}

#[derive(Serialize)]
struct CommOut {
    formulation: Formulation,
    type_counts: Vec<usize>,
    joint_types: usize,
    lp_variables: usize,
    lp_rows: usize,
    per_player_value: Vec<f64>,
    welfare: f64,
    max_violation: f64,
    solver_iterations: usize,
    session: MediatorSession,
}

#[derive(Serialize)]
struct DeviceOut {
    formulation: Formulation,
    dims: Vec<usize>,
    /// Joint-type key to prior probability.
    prior: BTreeMap<String, f64>,
    /// Joint-type key to `p(a|t)` in mixed-radix order.
    device: BTreeMap<String, Vec<f64>>,
}

pub fn solve_family(cfg: &ExperimentConfig, family: &GameFamily, f: Formulation, exec: Exec) -> CliResult<CommReport> {
    Ok(solve_commeq_with(family, f, &cfg.solver_options(exec))?)
}

pub fn commeq(cfg: &ExperimentConfig, out: &Path, formulation: Option<Formulation>) -> CliResult<Outcome> {
    let f = formulation.unwrap_or(cfg.solver.formulation);
    let family = family_for(cfg, cfg.grids()?, Exec::Parallel)?;
    let (vars, rows) = commeq_lp_size(&family, f);
    log::info!("communication-equilibrium LP ({f}): {vars} variables, {rows} rows");
    let rep = solve_family(cfg, &family, f, Exec::Parallel)?;
    let seed = cfg.learning.seed;
    let session = run_mediated_round(&rep.device, seed)?;
    let space = family.space();
    let body = CommOut {
        formulation: f,
        type_counts: space.type_counts(),
        joint_types: space.joint_count(),
        lp_variables: vars,
        lp_rows: rows,
        per_player_value: rep.per_player_value.clone(),
        welfare: rep.welfare,
        max_violation: rep.max_violation,
        solver_iterations: rep.solver_iterations,
        session,
    };
    let device = DeviceOut {
        formulation: f,
        dims: family.dims().to_vec(),
        prior: (0..space.joint_count()).map(|t| (space.joint_key(t), space.prior()[t])).collect(),
        device: rep.device.export_entries().into_iter().collect(),
    };
    let meta = Metadata::new("commeq", cfg).seed("mediator", seed);
    let mut set = OutputSet::new(&out.join("commeq"))?;
    set.write_json("commeq.json", &meta, &body)?;
    set.write_json("device.json", &meta, &device)?;
    let files = set.finish(&meta, &serde_json::json!({ "formulation": f }))?;
    Ok(Outcome {
        summary: format!(
            "{f} communication equilibrium over {} joint types: welfare {}, violation {:e}",
            space.joint_count(),
            rep.welfare,
            rep.max_violation
        ),
        files,
    })
}

// regret

#[derive(Serialize)]
struct RegretOut {
    state: usize,
    channel: Vec<Vec<f64>>,
    steps: u64,
    seed: u64,
    rule: RegretRule,
    mu: f64,
    payoff_spread: f64,
    empirical_welfare: f64,
    empirical_values: Vec<f64>,
    ce_gap: f64,
    ce_gap_over_spread: f64,
    welfare_ce: f64,
    final_profile: PureProfile,
}

pub struct RegretArgs {
    pub state: Option<usize>,
    pub steps: Option<u64>,
    pub seed: Option<u64>,
    pub mu: Option<f64>,
    pub rule: Option<RegretRule>,
}

pub fn trace_csv(trace: &[TracePoint]) -> String {
    csv(
        &["step", "max_regret", "ce_gap", "welfare"],
        trace.iter().map(|p| vec![p.step.to_string(), fmt_f64(p.max_regret), fmt_f64(p.ce_gap), fmt_f64(p.welfare)]),
    )
}

pub fn regret(cfg: &ExperimentConfig, out: &Path, args: RegretArgs) -> CliResult<Outcome> {
    let (s, game, tensor) = single_game(cfg, args.state)?;
    let steps = args.steps.unwrap_or(cfg.learning.steps);
    let seed = args.seed.unwrap_or(cfg.learning.seed);
    let rule = args.rule.unwrap_or(cfg.learning.rule);
    let mu = args.mu.or(cfg.learning.mu);
    if steps == 0 {
        return Err(CliError::Config("--steps must be at least 1".into()));
    }
    let run = rm_run(&tensor, steps, seed, mu, rule)?;
    let last = *run.trace.last().expect("trace ends at the last step");
    let ce = welfare_ce(&tensor, &cfg.solver_options(Exec::Parallel))?;
    let spread = tensor.spread();
    let body = RegretOut {
        state: s,
        channel: game.channel.rows(),
        steps,
        seed,
        rule,
        mu: run.mu,
        payoff_spread: spread,
        empirical_welfare: last.welfare,
        empirical_values: run.empirical.expected_payoffs(&tensor),
        ce_gap: last.ce_gap,
        ce_gap_over_spread: if spread > 0.0 { last.ce_gap / spread } else { 0.0 },
        welfare_ce: ce.welfare,
        final_profile: run.final_profile.clone(),
    };
    let meta = Metadata::new("regret", cfg).seed("learning", seed);
    let mut set = OutputSet::new(&out.join("regret"))?;
    set.write_json("regret.json", &meta, &body)?;
    set.write_text("trace.csv", &trace_csv(&run.trace))?;
    let files = set.finish(&meta, &serde_json::json!({ "state": s, "steps": steps, "rule": rule, "mu": run.mu }))?;
    Ok(Outcome {
        summary: format!(
            "state {s}: {steps} steps ({rule}), empirical welfare {} vs CE {}, ce_gap {:e}",
            last.welfare, ce.welfare, last.ce_gap
        ),
        files,
    })
}

// region

/// Geometry of one 2-player game: feasible hull, CE polygon and NE points.
#[derive(Clone, Debug, Serialize)]
pub struct Region {
    pub feasible: Vec<Point>,
    pub ce: Vec<Point>,
    pub pure_ne: Vec<Point>,
    pub mixed_ne: Vec<Point>,
}

impl Region {
    /// NE point with the largest payoff sum, pure or mixed.
    pub fn best_ne(&self) -> Option<Point> {
        self.pure_ne.iter().chain(&self.mixed_ne).copied().max_by(|a, b| (a[0] + a[1]).total_cmp(&(b[0] + b[1])))
    }

    /// CE vertices strictly better than `p` for both players.
    pub fn dominating(&self, p: Point) -> Vec<Point> {
        self.ce.iter().copied().filter(|v| v[0] > p[0] && v[1] > p[1]).collect()
    }
}

pub fn compute_region(tensor: &PayoffTensor, directions: usize, opts: &SolverOptions) -> CliResult<Region> {
    if tensor.players() != 2 {
        return Err(CliError::Config(format!("region export needs 2 players, got {}", tensor.players())));
    }
    let all: Vec<Point> = (0..tensor.profile_count()).map(|i| [tensor.payoff(0, i), tensor.payoff(1, i)]).collect();
    let feasible = geometry::convex_hull(&all, REGION_DEDUP_TOL);
    let ce = ce_payoff_region_with(tensor, directions, opts.exec, opts)?;
    let pure_ne: Vec<Point> = enumerate_pure_nash_with(tensor, opts.exec)
        .iter()
        .map(|p| {
            let i = tensor.encode(p.actions()).expect("valid profile");
            [tensor.payoff(0, i), tensor.payoff(1, i)]
        })
        .collect();
    let mixed_ne = mixed_points(tensor)?.iter().map(|m| m.payoffs).collect();
    Ok(Region { feasible, ce, pure_ne, mixed_ne })
}

#[derive(Serialize)]
struct RegionParams {
    state: usize,
    channel: Vec<Vec<f64>>,
    directions: usize,
    feasible_vertices: usize,
    ce_vertices: usize,
    pure_ne: usize,
    mixed_ne: usize,
    best_ne: Option<Point>,
    ce_vertices_dominating_best_ne: Vec<Point>,
}

pub fn region(
    cfg: &ExperimentConfig,
    out: &Path,
    state: Option<usize>,
    directions: Option<usize>,
) -> CliResult<Outcome> {
    let d = directions.unwrap_or(cfg.solver.directions);
    if d < 4 {
        return Err(CliError::Config("--directions must be at least 4".into()));
    }
    let (s, game, tensor) = single_game(cfg, state)?;
    let r = compute_region(&tensor, d, &cfg.solver_options(Exec::Parallel))?;
    let best = r.best_ne();
    let params = RegionParams {
        state: s,
        channel: game.channel.rows(),
        directions: d,
        feasible_vertices: r.feasible.len(),
        ce_vertices: r.ce.len(),
        pure_ne: r.pure_ne.len(),
        mixed_ne: r.mixed_ne.len(),
        best_ne: best,
        ce_vertices_dominating_best_ne: best.map(|b| r.dominating(b)).unwrap_or_default(),
    };
    let meta = Metadata::new("region", cfg);
    let mut set = OutputSet::new(&out.join("region"))?;
    set.write_text("feasible.csv", &point_csv(&r.feasible))?;
    set.write_text("ce_region.csv", &point_csv(&r.ce))?;
    let ne_rows = r
        .pure_ne
        .iter()
        .map(|p| (p, "pure"))
        .chain(r.mixed_ne.iter().map(|p| (p, "mixed")))
        .map(|(p, kind)| vec![fmt_f64(p[0]), fmt_f64(p[1]), kind.to_string()]);
    set.write_text("ne.csv", &csv(&["u1", "u2", "kind"], ne_rows))?;
    let summary = format!(
        "state {s}: feasible hull {} vertices, CE polygon {} vertices, {} NE points, {} CE vertices dominate the best NE",
        r.feasible.len(),
        r.ce.len(),
        r.pure_ne.len() + r.mixed_ne.len(),
        params.ce_vertices_dominating_best_ne.len()
    );
    let files = set.finish(&meta, &params)?;
    Ok(Outcome { summary, files })
}

// sweep

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SweepPart {
    #[default]
    All,
    States,
    Table,
}

pub struct SweepArgs {
    pub enumerate: bool,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub regret: bool,
    pub part: SweepPart,
}

#[derive(Clone, Debug, Serialize)]
pub struct StateResult {
    pub state: usize,
    pub channel: Vec<Vec<f64>>,
    pub ne_count: usize,
    pub best_ne_welfare: Option<f64>,
    pub ce_welfare: f64,
    pub ce_violation: f64,
    pub regret_welfare: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Stat {
    pub count: usize,
    pub mean: f64,
    pub std_error: f64,
}

pub fn stat(values: &[f64]) -> Option<Stat> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std_error = if n < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    Some(Stat { count: n, mean, std_error })
}

#[derive(Clone, Debug, Serialize)]
pub struct TableRow {
    pub actions: usize,
    pub levels_db: Vec<f64>,
    /// Prior-weighted average of the welfare-optimal CE at each joint type.
    pub ce_per_state: f64,
    /// Welfare-optimal CE of the prior-averaged game.
    pub ce_average_game: f64,
    pub commeq_literal: f64,
    pub commeq_canonical: f64,
    pub literal_violation: f64,
    pub canonical_violation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub state_count: usize,
    pub mode: &'static str,
    pub states: Vec<StateResult>,
    pub ce_welfare: Option<Stat>,
    pub best_ne_welfare: Option<Stat>,
    pub regret_welfare: Option<Stat>,
    pub table: Vec<TableRow>,
}

/// Indices of the states visited: all of them, or `samples` distinct ones
/// drawn uniformly with `seed` and sorted.
pub fn sweep_states(total: usize, enumerate: bool, samples: usize, seed: u64) -> Vec<usize> {
    if enumerate || samples >= total {
        return (0..total).collect();
    }
    let mut rng = powergame::rng::seeded(seed);
    let mut idx = rand::seq::index::sample(&mut rng, total, samples).into_vec();
    idx.sort_unstable();
    idx
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::Solver(format!("worker pool: {e}")))?;
        Ok(pool.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        Ok(f())
    }
}

pub fn solve_state(cfg: &ExperimentConfig, state: usize, regret: bool) -> CliResult<StateResult> {
    let channel = cfg.channel_at(state)?;
    let game = cfg.game(channel)?;
    let tensor = tensor_for(&game, Exec::Sequential)?;
    let ne = nash_points(&game, &tensor, Exec::Sequential);
    let rep = welfare_ce(&tensor, &cfg.solver_options(Exec::Sequential))?;
    let regret_welfare = if regret {
        let l = &cfg.learning;
        let run = rm_run(&tensor, l.steps, l.seed.wrapping_add(state as u64), l.mu, l.rule)?;
        Some(run.trace.last().expect("nonempty trace").welfare)
    } else {
        None
    };
    Ok(StateResult {
        state,
        channel: game.channel.rows(),
        ne_count: ne.len(),
        best_ne_welfare: ne.iter().map(|p| p.welfare).max_by(f64::total_cmp),
        ce_welfare: rep.welfare,
        ce_violation: rep.max_violation,
        regret_welfare,
    })
}

/// Table of CE baselines and communication-equilibrium welfare per action
/// count.
pub fn commeq_table(cfg: &ExperimentConfig) -> CliResult<Vec<TableRow>> {
    let grids = cfg.table_grids();
    let mut rows = Vec::with_capacity(grids.len());
    for db in grids {
        let grid = PowerGrid::from_db(&db)?;
        let family = family_for(cfg, vec![grid; cfg.players], Exec::Parallel)?;
        let opts = cfg.solver_options(Exec::Parallel);
        let space = family.space();
        let per_state = par::try_map_range(Exec::Parallel, space.joint_count(), |t| {
            welfare_ce(&family.tensors()[t], &cfg.solver_options(Exec::Sequential)).map(|r| r.welfare)
        })?;
        let ce_per_state = per_state.iter().zip(space.prior()).map(|(w, q)| w * q).sum();
        let ce_average_game = welfare_ce(&family.expected_tensor(), &opts)?.welfare;
        let lit = solve_family(cfg, &family, Formulation::Literal, Exec::Parallel)?;
        let can = solve_family(cfg, &family, Formulation::Canonical, Exec::Parallel)?;
        log::info!("table row M={}: literal {} canonical {}", db.len(), lit.welfare, can.welfare);
        rows.push(TableRow {
            actions: db.len(),
            levels_db: db,
            ce_per_state,
            ce_average_game,
            commeq_literal: lit.welfare,
            commeq_canonical: can.welfare,
            literal_violation: lit.max_violation,
            canonical_violation: can.max_violation,
        });
    }
    Ok(rows)
}

pub fn run_sweep(cfg: &ExperimentConfig, args: &SweepArgs) -> CliResult<SweepReport> {
    let sw = &cfg.channel.sweep;
    let enumerate = args.enumerate || sw.mode == crate::config::SweepMode::Enumerate;
    let samples = args.samples.unwrap_or(sw.samples);
    let seed = args.seed.unwrap_or(sw.seed);
    let regret = args.regret || cfg.learning.in_sweep;
    let total = cfg.state_count();
    let mut states = Vec::new();
    if args.part != SweepPart::Table {
        let idx = sweep_states(total, enumerate, samples, seed);
        log::info!("sweeping {} of {total} channel states", idx.len());
        states = with_pool(cfg.workers, || {
            par::try_map_range(Exec::Parallel, idx.len(), |k| solve_state(cfg, idx[k], regret))
        })??;
    }
    let table = if args.part != SweepPart::States { commeq_table(cfg)? } else { Vec::new() };
    let ce: Vec<f64> = states.iter().map(|s| s.ce_welfare).collect();
    let ne: Vec<f64> = states.iter().filter_map(|s| s.best_ne_welfare).collect();
    let rm: Vec<f64> = states.iter().filter_map(|s| s.regret_welfare).collect();
    Ok(SweepReport {
        state_count: total,
        mode: if enumerate || samples >= total { "enumerate" } else { "sample" },
        ce_welfare: stat(&ce),
        best_ne_welfare: stat(&ne),
        regret_welfare: stat(&rm),
        states,
        table,
    })
}

pub fn states_csv(cfg: &ExperimentConfig, states: &[StateResult]) -> String {
    let k = cfg.players;
    let mut header: Vec<String> = vec!["state".into()];
    for j in 0..k {
        for i in 0..k {
            header.push(format!("g_{j}_{i}"));
        }
    }
    header.extend(["ne_count", "best_ne_welfare", "ce_welfare", "regret_welfare"].map(String::from));
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    csv(
        &h,
        states.iter().map(|s| {
            let mut row = vec![s.state.to_string()];
            row.extend(s.channel.iter().flatten().map(|&g| fmt_f64(g)));
            row.push(s.ne_count.to_string());
            row.push(opt(s.best_ne_welfare));
            row.push(fmt_f64(s.ce_welfare));
            row.push(opt(s.regret_welfare));
            row
        }),
    )
}

pub fn table_csv(rows: &[TableRow]) -> String {
    csv(
        &["actions", "ce_per_state", "ce_average_game", "commeq_literal", "commeq_canonical"],
        rows.iter().map(|r| {
            vec![
                r.actions.to_string(),
                fmt_f64(r.ce_per_state),
                fmt_f64(r.ce_average_game),
                fmt_f64(r.commeq_literal),
                fmt_f64(r.commeq_canonical),
            ]
        }),
    )
}

pub fn sweep(cfg: &ExperimentConfig, out: &Path, args: SweepArgs) -> CliResult<Outcome> {
    let report = run_sweep(cfg, &args)?;
    let seed = args.seed.unwrap_or(cfg.channel.sweep.seed);
    let mut meta = Metadata::new("sweep", cfg).seed("sweep", seed);
    if report.regret_welfare.is_some() {
        meta = meta.seed("learning", cfg.learning.seed);
    }
    let mut set = OutputSet::new(&out.join("sweep"))?;
    set.write_json("sweep.json", &meta, &report)?;
    if !report.states.is_empty() {
        set.write_text("states.csv", &states_csv(cfg, &report.states))?;
    }
    if !report.table.is_empty() {
        set.write_text("commeq_table.csv", &table_csv(&report.table))?;
    }
    let params = serde_json::json!({
        "mode": report.mode,
        "states": report.states.len(),
        "state_count": report.state_count,
        "table_rows": report.table.len(),
    });
    let mut summary = format!("{} states ({})", report.states.len(), report.mode);
    if let Some(s) = &report.ce_welfare {
        summary += &format!(", mean CE welfare {} ± {}", s.mean, s.std_error);
    }
    for r in &report.table {
        summary += &format!(
            "\n  M={}: CE per-state {}, CE average-game {}, comm-eq literal {}, canonical {}",
            r.actions, r.ce_per_state, r.ce_average_game, r.commeq_literal, r.commeq_canonical
        );
    }
    let files = set.finish(&meta, &params)?;
    Ok(Outcome { summary, files })
}
