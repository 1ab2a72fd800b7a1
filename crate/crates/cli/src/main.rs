use clap::{Args, Parser, Subcommand, ValueEnum};
use powergame::communication::Formulation;
use powergame::regret::RegretRule;
use powergame_cli::commands::{self, RegretArgs, SweepArgs, SweepPart};
use powergame_cli::{load_config, CliResult};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "powergame", version, about = "Nash, correlated and communication equilibria of power-control games")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(short, long, global = true, default_value = "config.json")]
    config: PathBuf,
    /// Output directory; overrides output.dir from the config.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StateArg {
    /// Channel-grid state index (defaults to channel.state or the grid middle).
    #[arg(long)]
    state: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Game inspection.
    Game {
        #[command(subcommand)]
        action: GameAction,
    },
    /// Pure Nash equilibria (plus the mixed point of 2x2 games).
    Nash(StateArg),
    /// Welfare-optimal or directional correlated equilibrium.
    Ce {
        #[command(flatten)]
        state: StateArg,
        /// Maximize cos(θ)·u1 + sin(θ)·u2 (radians, 2 players).
        #[arg(long, conflicts_with = "welfare")]
        direction: Option<f64>,
        /// Maximize the sum of utilities (default).
        #[arg(long)]
        welfare: bool,
        /// Also write the LP in the fixed-column text layout.
        #[arg(long)]
        dump_lp: bool,
    },
    /// Optimal communication equilibrium over the configured type space.
    Commeq {
        #[arg(long, value_enum)]
        formulation: Option<FormulationArg>,
    },
    /// Regret-matching run with a convergence trace.
    Regret {
        #[command(flatten)]
        state: StateArg,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, value_enum)]
        regret_rule: Option<RuleArg>,
    },
    /// Feasible, CE and NE payoff sets of a 2-player game.
    Region {
        #[command(flatten)]
        state: StateArg,
        #[arg(long)]
        directions: Option<usize>,
    },
    /// Channel-state sweep and communication-equilibrium table.
    Sweep {
        /// Visit every channel state instead of sampling.
        #[arg(long)]
        enumerate: bool,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also run regret matching at every state.
        #[arg(long)]
        regret: bool,
        #[arg(long, value_enum, default_value_t = PartArg::All)]
        part: PartArg,
    },
}

#[derive(Subcommand)]
enum GameAction {
    /// Write the payoff tensor and game parameters.
    Dump(StateArg),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormulationArg {
    Literal,
    Canonical,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Std,
    #[value(name = "paper-literal")]
    Unconditional,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PartArg {
    All,
    States,
    Table,
}

fn run(cli: Cli) -> CliResult<commands::Outcome> {
    let cfg = load_config(&cli.config)?;
    let out = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    match cli.command {
        Command::Game { action: GameAction::Dump(s) } => commands::game_dump(&cfg, &out, s.state),
        Command::Nash(s) => commands::nash(&cfg, &out, s.state),
        Command::Ce { state, direction, welfare: _, dump_lp } => {
            commands::ce(&cfg, &out, state.state, direction, dump_lp)
        }
        Command::Commeq { formulation } => commands::commeq(
            &cfg,
            &out,
            formulation.map(|f| match f {
                FormulationArg::Literal => Formulation::Literal,
                FormulationArg::Canonical => Formulation::Canonical,
            }),
        ),
        Command::Regret { state, steps, seed, mu, regret_rule } => commands::regret(
            &cfg,
            &out,
            RegretArgs {
                state: state.state,
                steps,
                seed,
                mu,
                rule: regret_rule.map(|r| match r {
                    RuleArg::Std => RegretRule::Standard,
                    RuleArg::Unconditional => RegretRule::Unconditional,
                }),
            },
        ),
        Command::Region { state, directions } => commands::region(&cfg, &out, state.state, directions),
        Command::Sweep { enumerate, samples, seed, regret, part } => commands::sweep(
            &cfg,
            &out,
            SweepArgs {
                enumerate,
                samples,
                seed,
                regret,
                part: match part {
                    PartArg::All => SweepPart::All,
                    PartArg::States => SweepPart::States,
                    PartArg::Table => SweepPart::Table,
                },
            },
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("POWERGAME_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
