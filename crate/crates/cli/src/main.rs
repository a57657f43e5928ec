//! Command-line laboratory: solve games, run matches and tournaments, emit
//! reports, and search block sets.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use gabe_core::games::{self, search_block_sets, spne_payoffs, SearchLimits};
use gabe_core::harness::{
    fmt_sig6, format_table, run_match, run_tournament, timeseries_csv, timeseries_from_raw,
};
use gabe_core::opponents::{ContextOptions, GameContext};
use gabe_core::planning::describe_plan;
use gabe_core::rsg::{Player, Rsg};
use gabe_core::{GabeError, Payoff};

#[derive(Parser)]
#[command(name = "gabe-lab", version, about = "Repeated stochastic game laboratory")]
struct Cli {
    /// Worker threads for trial-level parallelism (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute target solutions and security levels for a game.
    Solve {
        /// Game name: microgrid, gridpd or blocks.
        #[arg(long)]
        game: String,
        /// Game config file (defaults to the bundled config).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated planning weights, e.g. 0.1,0.3,0.5.
        #[arg(long, value_delimiter = ',')]
        omega_grid: Option<Vec<f64>>,
        /// Also print the expert roster used by the bandit agents.
        #[arg(long)]
        experts: bool,
        /// Write the target table as CSV to this path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run a single match between two agents.
    Match {
        #[arg(long)]
        game: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Agent spec for seat one, e.g. gabe-exp3?gamma=0.1.
        #[arg(long)]
        a: String,
        /// Agent spec for seat two.
        #[arg(long)]
        b: String,
        #[arg(long, default_value_t = 365)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write per-round payoffs as CSV to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a round-robin tournament and persist raw results.
    Tournament {
        #[arg(long)]
        game: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated agent specs.
        #[arg(long, value_delimiter = ',')]
        roster: Vec<String>,
        #[arg(long, default_value_t = 25)]
        trials: usize,
        #[arg(long, default_value_t = 365)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for raw files, manifest and CSVs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild per-agent time series from persisted tournament output.
    Report {
        /// Tournament output directory (with manifest.json).
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 500)]
        horizon: usize,
        /// Time-series CSV path (default: <in>/timeseries.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search six-block sets satisfying the published constraints.
    VerifyBlocks {
        /// `default` searches single-circle compositions; `wide` adds
        /// two-circle compositions.
        #[arg(long, default_value = "default")]
        constraints: String,
        /// Stop after this many solutions.
        #[arg(long, default_value_t = 8)]
        limit: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                GabeError::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn load_game(name: &str, config: Option<&Path>) -> Result<Arc<dyn Rsg<Payoff>>, GabeError> {
    let json = match config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| GabeError::Config(format!("cannot read config {path:?}: {e}")))?,
        None => match std::env::var("GABE_LAB_CONFIG_DIR") {
            Ok(dir) => {
                let path = Path::new(&dir).join(format!("{name}.json"));
                fs::read_to_string(&path).map_err(|e| {
                    GabeError::Config(format!(
                        "GABE_LAB_CONFIG_DIR is set but {path:?} is unreadable: {e}"
                    ))
                })?
            }
            Err(_) => bundled_config(name)?.to_string(),
        },
    };
    games::game_from_config(name, &json)
}

fn bundled_config(name: &str) -> Result<&'static str, GabeError> {
    match name {
        "microgrid" => Ok(games::default_microgrid_json()),
        "gridpd" => Ok(games::default_gridpd_json()),
        "blocks" => Ok(games::default_blocks_json()),
        other => Err(GabeError::Config(format!(
            "unknown game `{other}`; known games: {}",
            games::GAME_NAMES.join(", ")
        ))),
    }
}

fn build_context(
    name: &str,
    config: Option<&Path>,
    omega_grid: Option<Vec<f64>>,
) -> Result<GameContext<Payoff>, GabeError> {
    let game = load_game(name, config)?;
    let mut options = ContextOptions::default();
    if let Some(grid) = omega_grid {
        if grid.is_empty() || grid.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(GabeError::Config(
                "omega grid must be non-empty with weights in [0,1]".into(),
            ));
        }
        options.omega_grid = grid;
    }
    GameContext::new(game, options)
}

fn run(command: Command) -> Result<ExitCode, GabeError> {
    match command {
        Command::Solve {
            game,
            config,
            omega_grid,
            experts,
            csv,
        } => {
            let ctx = build_context(&game, config.as_deref(), omega_grid)?;
            print_solve(&ctx, experts, csv.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Match {
            game,
            config,
            a,
            b,
            rounds,
            seed,
            out,
        } => {
            let ctx = build_context(&game, config.as_deref(), None)?;
            let result = run_match(&ctx, &a, &b, rounds, seed)?;
            let mean_a = result.mean_of(Player::P1);
            let mean_b = result.mean_of(Player::P2);
            println!("match: {a} vs {b} on {game} ({rounds} rounds, seed {seed})");
            println!(
                "  mean payoff/round: {} vs {}",
                fmt_sig6(mean_a),
                fmt_sig6(mean_b)
            );
            if let Some(path) = out {
                let mut text = String::from("round,payoff_a,payoff_b\n");
                for (i, (pa, pb)) in result.payoffs.iter().enumerate() {
                    text.push_str(&format!("{},{},{}\n", i + 1, pa, pb));
                }
                fs::write(&path, text)
                    .map_err(|e| GabeError::Precondition(format!("write {path:?}: {e}")))?;
                println!("  wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Tournament {
            game,
            config,
            roster,
            trials,
            rounds,
            seed,
            out,
        } => {
            if roster.is_empty() {
                return Err(GabeError::Config("roster must be non-empty".into()));
            }
            let ctx = build_context(&game, config.as_deref(), None)?;
            // Validate the roster before burning time on matches.
            for spec in &roster {
                ctx.make_agent(spec, Player::P1, 0)?;
            }
            let table = run_tournament(&ctx, &roster, trials, rounds, seed, Some(&out))?;
            print!("{}", format_table(&table));
            println!("wrote {}", out.join("tournament.csv").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report {
            input,
            horizon,
            out,
        } => {
            let series = timeseries_from_raw(&input, horizon)?;
            let path = out.unwrap_or_else(|| input.join("timeseries.csv"));
            fs::write(&path, timeseries_csv(&series))
                .map_err(|e| GabeError::Precondition(format!("write {path:?}: {e}")))?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyBlocks { constraints, limit } => {
            let wide = match constraints.as_str() {
                "default" => false,
                "wide" => true,
                other => {
                    return Err(GabeError::Config(format!(
                        "unknown constraint set `{other}` (default, wide)"
                    )))
                }
            };
            let limits = SearchLimits {
                max_solutions: limit.max(1),
                wide,
            };
            let found = search_block_sets(&limits);
            if found.is_empty() {
                eprintln!("no block set satisfies the constraints in the searched space");
                return Ok(ExitCode::from(1));
            }
            println!(
                "{} block set(s) with square sum 40, triangle sum 10, subgame-perfect payoffs (18, 18):",
                found.len()
            );
            for (i, candidate) in found.iter().enumerate() {
                let config = candidate.to_config::<Payoff>(Player::P1);
                let spne = spne_payoffs(&config);
                println!("  [{i}] {}  spne={spne:?}", candidate.describe());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_solve(
    ctx: &GameContext<Payoff>,
    experts: bool,
    csv: Option<&Path>,
) -> Result<(), GabeError> {
    let game = ctx.game.as_ref();
    println!("game: {}", ctx.compiled.name);
    println!(
        "states: {}   security: p1 {}  p2 {}",
        ctx.compiled.num_states(),
        fmt_sig6(ctx.security[0].security_value),
        fmt_sig6(ctx.security[1].security_value),
    );
    println!("targets ({} candidates):", ctx.candidates.len());
    println!("  {:<22} {:<20} description", "omegas", "payoff");
    let mut rows = Vec::new();
    for target in &ctx.candidates {
        let omegas = target
            .omegas
            .iter()
            .map(|w| format!("{w}"))
            .collect::<Vec<_>>()
            .join(",");
        let kind = if target.is_alternating() { "alt" } else { "pure" };
        let description = target
            .plans()
            .iter()
            .map(|p| describe_plan(game, &ctx.compiled, p))
            .collect::<Vec<_>>()
            .join(" / ");
        println!(
            "  {:<22} ({}, {})  {}",
            format!("{kind} {omegas}"),
            fmt_sig6(target.payoff.0),
            fmt_sig6(target.payoff.1),
            description,
        );
        rows.push((omegas, kind, target.payoff, description));
    }
    for seat in [Player::P1, Player::P2] {
        println!("selected for {seat}:");
        for t in &ctx.selected[seat.index()] {
            println!(
                "  {} -> ({}, {})",
                t.label(),
                fmt_sig6(t.payoff.0),
                fmt_sig6(t.payoff.1)
            );
        }
    }
    if experts {
        for seat in [Player::P1, Player::P2] {
            println!("experts for {seat}:");
            for name in ctx.expert_roster(seat)? {
                println!("  {name}");
            }
        }
    }
    if let Some(path) = csv {
        let mut text = String::from("omegas,kind,payoff_p1,payoff_p2,description\n");
        for (omegas, kind, payoff, description) in rows {
            text.push_str(&format!(
                "\"{omegas}\",{kind},{},{},\"{description}\"\n",
                fmt_sig6(payoff.0),
                fmt_sig6(payoff.1),
            ));
        }
        fs::write(path, text)
            .map_err(|e| GabeError::Precondition(format!("write {path:?}: {e}")))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
