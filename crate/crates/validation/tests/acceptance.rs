//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

#[path = "../../core/tests/common/vertex_oracle.rs"]
#[allow(dead_code)]
mod vertex_oracle;

use powergame::communication::{build_type_space, solve_commeq, Formulation, GameFamily, PriorSpec, TypeMode};
use powergame::correlated::{ce_payoff_region, max_action_mass, solve_directional_ce, solve_welfare_ce};
use powergame::geometry::{self, Point};
use powergame::lp::{solve_lp, LpStatus};
use powergame::nash::enumerate_pure_nash;
use powergame::regret::{rm_run, RegretRule};
use powergame::rng::seeded;
use powergame::{build_payoff_tensor, ChannelMatrix, GameInstance, PayoffTensor, PowerGrid};
use powergame_cli::commands::{self, commeq_table, RegretArgs, SweepArgs, SweepPart};
use powergame_cli::{load_config, ExperimentConfig};
use rand::Rng;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);
type Column = fn(&powergame_cli::commands::TableRow) -> f64;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> ExperimentConfig {
    load_config(&configs().join(name)).expect("shipped config loads")
}

fn within(start: Instant, limit: Duration, detail: String) -> Check {
    let took = start.elapsed();
    if took <= limit {
        Ok(format!("{detail}; {:.2} s", took.as_secs_f64()))
    } else {
        Err(format!("{detail}; took {:.2} s, limit {} s", took.as_secs_f64(), limit.as_secs()))
    }
}

fn random_game(rng: &mut powergame::rng::Rng, m: usize) -> PayoffTensor {
    let values = (0..2 * m * m).map(|_| rng.random_range(-1.0..1.0)).collect();
    PayoffTensor::from_values(vec![m, m], values).unwrap()
}

fn best_pure_ne_welfare(t: &PayoffTensor) -> Option<f64> {
    enumerate_pure_nash(t).iter().map(|p| t.welfare(t.encode(p.actions()).unwrap())).reduce(f64::max)
}

fn lp_oracle() -> Check {
    let start = Instant::now();
    let mut rng = seeded(1);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let lp = vertex_oracle::random_bounded_lp(&mut rng, 6, 10, false);
        let want = vertex_oracle::vertex_enumeration(&lp).ok_or(format!("case {case}: oracle found no vertex"))?;
        let got = solve_lp(&lp).map_err(|e| format!("case {case}: {e}"))?;
        if got.status != LpStatus::Optimal {
            return Err(format!("case {case}: status {:?}", got.status));
        }
        let err = (got.objective_value.unwrap() - want).abs();
        if err > 1e-8 {
            return Err(format!("case {case}: objective off by {err:e}"));
        }
        worst = worst.max(err);
    }
    within(start, Duration::from_secs(5), format!("100 LPs, max |error| {worst:e}"))
}

fn ce_soundness() -> Check {
    let start = Instant::now();
    let mut rng = seeded(2);
    let mut tensors = Vec::new();
    for k in 0..50 {
        tensors.push((format!("random game {k}"), random_game(&mut rng, 2 + k % 3)));
    }
    let cfg = config("reference_setup.json");
    let states = powergame_cli::commands::sweep_states(cfg.state_count(), false, 20, 3);
    for s in states {
        let game = cfg.game(cfg.channel_at(s).unwrap()).unwrap();
        tensors.push((format!("M=25 state {s}"), build_payoff_tensor(&game).unwrap()));
    }
    let (mut worst_violation, mut worst_margin) = (0.0f64, f64::INFINITY);
    for (name, t) in &tensors {
        let rep = solve_welfare_ce(t).map_err(|e| format!("{name}: {e}"))?;
        if rep.max_violation > 1e-8 {
            return Err(format!("{name}: violation {:e}", rep.max_violation));
        }
        worst_violation = worst_violation.max(rep.max_violation);
        if let Some(ne) = best_pure_ne_welfare(t) {
            if rep.welfare < ne - 1e-8 {
                return Err(format!("{name}: CE welfare {} below NE welfare {ne}", rep.welfare));
            }
            worst_margin = worst_margin.min(rep.welfare - ne);
        }
    }
    within(
        start,
        Duration::from_secs(60),
        format!(
            "{} games, max violation {worst_violation:e}, min CE-NE welfare margin {worst_margin:e}",
            tensors.len()
        ),
    )
}

fn known_games() -> Check {
    let pennies =
        PayoffTensor::bimatrix(&[vec![1.0, -1.0], vec![-1.0, 1.0]], &[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
    let region = ce_payoff_region(&pennies, 64).map_err(|e| e.to_string())?;
    if region.len() != 1 {
        return Err(format!("matching pennies region has {} points", region.len()));
    }
    let mut worst = 0.0f64;
    for k in 0..16 {
        let th = k as f64 * std::f64::consts::TAU / 16.0;
        let rep = solve_directional_ce(&pennies, &[th.cos(), th.sin()]).map_err(|e| e.to_string())?;
        for &p in rep.distribution.probs() {
            worst = worst.max((p - 0.25).abs());
        }
    }
    if worst > 1e-6 {
        return Err(format!("matching pennies probability off uniform by {worst:e}"));
    }

    let dilemma = PayoffTensor::bimatrix(&[vec![3.0, 0.0], vec![5.0, 1.0]], &[vec![3.0, 5.0], vec![0.0, 1.0]]).unwrap();
    let mut rng = seeded(4);
    let mut games = vec![dilemma];
    for _ in 0..10 {
        // Payoff depends on own action through a strictly increasing bonus.
        let m = rng.random_range(2..=4usize);
        let noise: Vec<f64> = (0..2 * m).map(|_| rng.random_range(-1.0..1.0)).collect();
        games.push(PayoffTensor::from_fn(vec![m, m], |i, a| 3.0 * a[i] as f64 + noise[i * m + a[1 - i]]).unwrap());
    }
    let mut worst_mass = 0.0f64;
    for (g, t) in games.iter().enumerate() {
        let dominant: Vec<usize> = if g == 0 { vec![1, 1] } else { vec![t.dims()[0] - 1, t.dims()[1] - 1] };
        let rep = solve_welfare_ce(t).map_err(|e| e.to_string())?;
        let at = t.encode(&dominant).unwrap();
        if (rep.distribution.probs()[at] - 1.0).abs() > 1e-9 {
            return Err(format!("game {g}: mass {} on the dominant profile", rep.distribution.probs()[at]));
        }
        for i in 0..2 {
            for a in (0..t.dims()[i]).filter(|&a| a != dominant[i]) {
                worst_mass = worst_mass.max(max_action_mass(t, i, a).map_err(|e| e.to_string())?);
            }
        }
    }
    if worst_mass > 1e-9 {
        return Err(format!("dominated-mass LP optimum {worst_mass:e}"));
    }
    Ok(format!("pennies max |p-0.25| {worst:e}; {} dominance games, max dominated mass {worst_mass:e}", games.len()))
}

fn reduction_identity() -> Check {
    let mut rng = seeded(5);
    let grid = powergame::game::gain_grid(0.01, 3.0, 10).unwrap();
    let mut literal_gaps = Vec::new();
    let mut worst_order = f64::NEG_INFINITY;
    for k in 0..20 {
        let m = 2 + k % 3;
        let rows = (0..2).map(|_| (0..2).map(|_| grid[rng.random_range(0..grid.len())]).collect()).collect();
        let channel = ChannelMatrix::new(rows).unwrap();
        let levels = PowerGrid::uniform_db(-20.0, 20.0, m).unwrap();
        let game = GameInstance::new(channel.clone(), vec![levels.clone(), levels], 0.01, 1.0, 100).unwrap();
        let t = build_payoff_tensor(&game).unwrap();
        let single: Vec<Vec<Vec<f64>>> = channel.rows().iter().map(|r| r.iter().map(|&g| vec![g]).collect()).collect();
        let space = build_type_space(&single, &PriorSpec::Uniform, TypeMode::Diagonal).unwrap();
        let family = GameFamily::new(space, vec![t.clone()]).unwrap();
        let ce = solve_welfare_ce(&t).map_err(|e| e.to_string())?.welfare;
        let lit = solve_commeq(&family, Formulation::Literal).map_err(|e| e.to_string())?.welfare;
        let can = solve_commeq(&family, Formulation::Canonical).map_err(|e| e.to_string())?.welfare;
        literal_gaps.push((k, m, (lit - ce).abs()));
        worst_order = worst_order.max(can - lit);
    }
    let off: Vec<_> = literal_gaps.iter().filter(|g| g.2 > 1e-8).collect();
    let max_gap = literal_gaps.iter().map(|g| g.2).fold(0.0, f64::max);
    let detail = format!(
        "20 instances: |literal-CE| > 1e-8 on {} (max {max_gap:e}); max canonical-literal {worst_order:e}",
        off.len()
    );
    if off.is_empty() && worst_order <= 1e-8 {
        Ok(detail)
    } else {
        let cases: Vec<String> = off.iter().map(|(k, m, g)| format!("#{k} M={m} gap {g:e}")).collect();
        Err(format!("{detail}; {}", cases.join(", ")))
    }
}

fn commeq_table_check() -> Check {
    let start = Instant::now();
    let cfg = config("reference_setup.json");
    let rows = commeq_table(&cfg).map_err(|e| e.to_string())?;
    let actions: Vec<usize> = rows.iter().map(|r| r.actions).collect();
    if actions != [2, 3, 4] {
        return Err(format!("table rows for M = {actions:?}"));
    }
    let columns: [(&str, Column); 4] = [
        ("ce_per_state", |r| r.ce_per_state),
        ("ce_average_game", |r| r.ce_average_game),
        ("commeq_literal", |r| r.commeq_literal),
        ("commeq_canonical", |r| r.commeq_canonical),
    ];
    for (name, f) in columns {
        for w in rows.windows(2) {
            if f(&w[1]) < f(&w[0]) - 1e-8 {
                return Err(format!(
                    "{name} drops from {} at M={} to {} at M={}",
                    f(&w[0]),
                    w[0].actions,
                    f(&w[1]),
                    w[1].actions
                ));
            }
        }
    }
    let canon: Vec<String> = rows.iter().map(|r| format!("M={}: {:.6}", r.actions, r.commeq_canonical)).collect();
    within(start, Duration::from_secs(600), format!("canonical comm-eq {}", canon.join(", ")))
}

fn regret_check() -> Check {
    let start = Instant::now();
    let cfg = config("reference_setup.json");
    let game = cfg.game(cfg.channel_at(cfg.single_state(None)).unwrap()).unwrap();
    let t = build_payoff_tensor(&game).unwrap();
    let run = rm_run(&t, 100_000, 0, None, RegretRule::Standard).map_err(|e| e.to_string())?;
    let last = run.trace.last().unwrap();
    let ce = solve_welfare_ce(&t).map_err(|e| e.to_string())?.welfare;
    let gap = last.ce_gap / t.spread();
    let detail = format!("ce_gap/spread {gap:.4}, welfare {:.6} vs CE {ce:.6}", last.welfare);
    if gap > 0.05 || last.welfare > ce + 1e-6 {
        return Err(detail);
    }
    within(start, Duration::from_secs(60), detail)
}

fn read_points(path: &Path) -> Vec<Point> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            [f.next().unwrap().parse().unwrap(), f.next().unwrap().parse().unwrap()]
        })
        .collect()
}

fn region_check() -> Check {
    let dir = tempfile::tempdir().unwrap();
    commands::region(&config("demo_ce_beyond_ne.json"), dir.path(), None, None).map_err(|e| e.to_string())?;
    let base = dir.path().join("region");
    let feasible = geometry::convex_hull(&read_points(&base.join("feasible.csv")), 1e-12);
    let ce = read_points(&base.join("ce_region.csv"));
    let ne = read_points(&base.join("ne.csv"));
    let ce_poly = geometry::convex_hull(&ce, 1e-12);
    if ne.is_empty() {
        return Err("no NE points exported".into());
    }
    if let Some(p) = ne.iter().find(|&&p| !geometry::contains(&ce_poly, p, 1e-7)) {
        return Err(format!("NE point {p:?} outside the CE polygon"));
    }
    if let Some(p) = ce.iter().find(|&&p| !geometry::contains(&feasible, p, 1e-7)) {
        return Err(format!("CE vertex {p:?} outside the feasible hull"));
    }
    let best = ne.iter().copied().max_by(|a, b| (a[0] + a[1]).total_cmp(&(b[0] + b[1]))).unwrap();
    let dominating: Vec<&Point> = ce.iter().filter(|v| v[0] > best[0] && v[1] > best[1]).collect();
    let detail = format!("{} NE points, best NE {best:?}, {} CE vertices", ne.len(), ce.len());
    match dominating.first() {
        Some(v) => Ok(format!("{detail}; vertex {v:?} dominates by {:e}", (v[0] - best[0]).min(v[1] - best[1]))),
        None => Err(format!("{detail}; no CE vertex dominates the best NE")),
    }
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn run_all(out: &Path) -> Result<usize, powergame_cli::CliError> {
    let demo = config("demo_ce_beyond_ne.json");
    let reference = config("reference_setup.json");
    commands::game_dump(&demo, out, None)?;
    commands::nash(&demo, out, None)?;
    commands::ce(&demo, out, None, None, true)?;
    commands::commeq(&demo, out, None)?;
    commands::region(&demo, out, None, None)?;
    let rargs = RegretArgs { state: None, steps: Some(20_000), seed: Some(9), mu: None, rule: None };
    commands::regret(&reference, out, rargs)?;
    let sargs = SweepArgs { enumerate: false, samples: Some(3), seed: Some(4), regret: true, part: SweepPart::States };
    commands::sweep(&reference, out, sargs)?;
    Ok(7)
}

fn determinism() -> Check {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let runs = run_all(a.path()).map_err(|e| e.to_string())?;
    run_all(b.path()).map_err(|e| e.to_string())?;
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    if sa.len() != sb.len() {
        return Err(format!("{} vs {} files", sa.len(), sb.len()));
    }
    for ((pa, da), (_, db)) in sa.iter().zip(&sb) {
        if da != db {
            return Err(format!("{} differs between runs", pa.display()));
        }
    }
    Ok(format!("{runs} commands, {} files byte-identical", sa.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 LP oracle", lp_oracle),
        ("2 CE soundness", ce_soundness),
        ("3 known-game oracles", known_games),
        ("4 reduction identity", reduction_identity),
        ("5 comm-eq table", commeq_table_check),
        ("6 regret matching", regret_check),
        ("7 region geometry", region_check),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
