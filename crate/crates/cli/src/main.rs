//! `rulegrid` command-line tool.

use std::fs;
use std::io::{self, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rulegrid::dataset::{export, ExportOptions};
use rulegrid::evolve::{run_evolution_with, Archive, EvoConfig, GenerationStats, SearchFitness};
use rulegrid::generate::{seeded_maze_genome, DEFAULT_SIDE};
use rulegrid::render::{board_ppm, episode_states, frame_ascii, parse_action_list, play_session};
use rulegrid::search::best_first_search;
use rulegrid::sim::{rollout, rollout_batch, DEFAULT_OBS_WINDOW};
use rulegrid::{Action, Error, Genome, Reward};

#[derive(Parser)]
#[command(name = "rulegrid", version, about = "Rewrite-rule grid worlds: simulate, search, evolve, export")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a genome file and print a summary.
    Parse {
        env: PathBuf,
        /// Print the canonical text instead of the summary.
        #[arg(long)]
        canonical: bool,
    },
    /// Write a random base-rules maze genome.
    Maze {
        #[arg(long, default_value_t = DEFAULT_SIDE)]
        side: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay an action trace, or many with --batch.
    Simulate {
        env: Option<PathBuf>,
        /// Action file (codes 0/1/2 or letters L/R/F).
        #[arg(long)]
        actions: Option<PathBuf>,
        /// TSV of `env_path<TAB>actions_path` lines, run as one batch.
        #[arg(long, conflicts_with_all = ["env", "actions"])]
        batch: Option<PathBuf>,
    },
    /// Best-first search for the highest-reward action sequence.
    Search {
        env: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        budget: u64,
    },
    /// Evolve environments that are hard to search.
    Evolve {
        /// Seed genome; defaults to a random base maze drawn from --seed.
        #[arg(long)]
        seed_env: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        mu: usize,
        #[arg(long, default_value_t = 40)]
        lambda: usize,
        #[arg(long, default_value_t = 50)]
        gens: usize,
        #[arg(long)]
        out: PathBuf,
        /// Mutate only the map.
        #[arg(long)]
        freeze_rules: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial search budget.
        #[arg(long, default_value_t = 512)]
        budget: u64,
        #[arg(long, default_value_t = 1 << 16)]
        max_budget: u64,
        #[arg(long, default_value_t = 0.002)]
        p_map: f64,
        #[arg(long, default_value_t = 0.02)]
        p_rule: f64,
        #[arg(long, default_value_t = 0.1)]
        p_reward: f64,
        #[arg(long)]
        quiet: bool,
    },
    /// Turn an evolved archive into observation/action tensors.
    Export {
        archive: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_OBS_WINDOW)]
        obs_window: usize,
        #[arg(long)]
        hide_rules: bool,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print ASCII frames of an episode, optionally writing PPM images.
    Render {
        env: PathBuf,
        #[arg(long)]
        actions: Option<PathBuf>,
        /// Directory for `frame_NNN.ppm` files.
        #[arg(long)]
        ppm: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        scale: usize,
    },
    /// Play an episode from the terminal.
    Play { env: PathBuf },
}

fn load_genome(path: &Path) -> Result<Genome, Error> {
    fs::read_to_string(path)?.parse()
}

fn load_actions(path: &Path) -> Result<Vec<Action>, Error> {
    parse_action_list(&fs::read_to_string(path)?)
}

fn action_string(actions: &[Action]) -> String {
    actions.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ")
}

fn run(cli: Cli) -> Result<(), Error> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Parse { env, canonical } => {
            let g = load_genome(&env)?;
            if canonical {
                write!(out, "{}", g.to_text())?;
            } else {
                let map = g.init_map();
                writeln!(out, "id\t{}", g.id())?;
                writeln!(out, "tiles\t{}", g.tiles().names().join(" "))?;
                writeln!(out, "map\t{}x{}", map.height(), map.width())?;
                writeln!(out, "rules\t{}", g.rules().rules().len())?;
                writeln!(out, "mutable_rules\t{}", g.rules().mutable_rules().count())?;
                writeln!(out, "compiled_rules\t{}", g.rules().compiled().len())?;
                writeln!(out, "episode_limit\t{}", g.episode_limit())?;
            }
        }
        Command::Maze { side, seed, out: path } => {
            let g: Genome = seeded_maze_genome(side, seed)?;
            match path {
                Some(p) => fs::write(p, g.to_text())?,
                None => write!(out, "{}", g.to_text())?,
            }
        }
        Command::Simulate { env, actions, batch } => {
            if let Some(list) = batch {
                let text = fs::read_to_string(&list)?;
                let mut names = Vec::new();
                let mut genomes = Vec::new();
                let mut traces = Vec::new();
                for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                    let (e, a) = line
                        .split_once('\t')
                        .ok_or_else(|| Error::Parse { line: i + 1, msg: "expected `env_path<TAB>actions_path`".into() })?;
                    genomes.push(load_genome(Path::new(e))?);
                    traces.push(load_actions(Path::new(a))?);
                    names.push(e.to_string());
                }
                let results = rollout_batch(&genomes, &traces)?;
                writeln!(out, "env\treward\tticks\tdone")?;
                for (name, r) in names.iter().zip(&results) {
                    let s = &r.final_state;
                    writeln!(out, "{name}\t{}\t{}\t{}", s.total_reward.to_decimal(), s.tick, s.done)?;
                }
            } else {
                let env = env.ok_or_else(|| Error::Contract("simulate needs an env file or --batch".into()))?;
                let g = load_genome(&env)?;
                let acts = match actions {
                    Some(p) => load_actions(&p)?,
                    None => Vec::new(),
                };
                let r = rollout(&g, &acts);
                writeln!(out, "tick\taction\treward")?;
                for (t, (a, rew)) in acts.iter().zip(&r.rewards).enumerate() {
                    writeln!(out, "{}\t{a}\t{}", t + 1, rew.to_decimal())?;
                }
                let s = &r.final_state;
                writeln!(out, "total_reward\t{}", s.total_reward.to_decimal())?;
                writeln!(out, "done\t{}", s.done)?;
            }
        }
        Command::Search { env, budget } => {
            let g = load_genome(&env)?;
            let r = best_first_search(&g, budget)?;
            writeln!(out, "fitness\t{}", r.fitness)?;
            writeln!(out, "best_reward\t{}", r.best_reward.to_decimal())?;
            writeln!(out, "expanded\t{}", r.expanded)?;
            writeln!(out, "frontier_exhausted\t{}", r.frontier_exhausted)?;
            writeln!(out, "actions\t{}", action_string(&r.best_actions))?;
        }
        Command::Evolve {
            seed_env,
            mu,
            lambda,
            gens,
            out: dir,
            freeze_rules,
            seed,
            budget,
            max_budget,
            p_map,
            p_rule,
            p_reward,
            quiet,
        } => {
            let start: Genome = match seed_env {
                Some(p) => load_genome(&p)?,
                None => seeded_maze_genome(DEFAULT_SIDE, seed)?,
            };
            let cfg = EvoConfig {
                mu,
                lambda,
                generations: gens,
                initial_budget: budget,
                max_budget,
                p_map,
                p_rule,
                p_reward,
                mutate_rules: !freeze_rules,
                seed,
                ..EvoConfig::default()
            };
            cfg.validate()?;
            if !quiet {
                eprint!("{}", GenerationStats::TSV_HEADER);
            }
            let outcome = run_evolution_with(&start, &cfg, &SearchFitness, |s| {
                if !quiet {
                    eprint!("{}", s.tsv_row());
                }
            })?;
            fs::create_dir_all(&dir)?;
            outcome.write(&dir)?;
            let last = outcome.stats.last().expect("generation 0 is always recorded");
            writeln!(out, "archive\t{}", outcome.archive.len())?;
            writeln!(out, "max_fitness\t{}", last.max_fitness)?;
            writeln!(out, "budget\t{}", last.budget)?;
        }
        Command::Export { archive, out: dir, obs_window, hide_rules, test_fraction, seed } => {
            let archive: Archive<f64> = Archive::load(&archive)?;
            let records: Vec<_> = archive.records().cloned().collect();
            let opts = ExportOptions { window: obs_window, show_rules: !hide_rules, test_fraction, seed };
            let s = export(&records, &dir, &opts)?;
            writeln!(out, "records\t{}\npairs\t{}\ntrain\t{}\ntest\t{}", s.records, s.pairs, s.train, s.test)?;
        }
        Command::Render { env, actions, ppm, scale } => {
            let g = load_genome(&env)?;
            let acts = match actions {
                Some(p) => load_actions(&p)?,
                None => Vec::new(),
            };
            let states = episode_states(&g, &acts)?;
            if let Some(d) = &ppm {
                fs::create_dir_all(d)?;
            }
            for (i, s) in states.iter().enumerate() {
                writeln!(out, "{}", frame_ascii(s))?;
                if let Some(d) = &ppm {
                    fs::write(d.join(format!("frame_{i:03}.ppm")), board_ppm(&s.board, scale))?;
                }
            }
        }
        Command::Play { env } => {
            let g = load_genome(&env)?;
            let stdin = io::stdin();
            if !stdin.is_terminal() {
                return Err(Error::Contract(
                    "play needs an interactive terminal; use `rulegrid simulate --actions <file>` for scripted input".into(),
                ));
            }
            play_session(&g, &mut stdin.lock(), &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
