//! (μ+λ) evolution of genomes toward environments that are hard for search.
//!
//! Each generation draws λ parents uniformly from the μ elites, mutates
//! them, evaluates the offspring in parallel and keeps the best μ of
//! parents and offspring together (ties favour parents). The search budget
//! grows geometrically whenever some individual's fitness reaches
//! `θ · budget`; the elites are then re-evaluated at the larger budget.
//! Every evaluation is offered to an [`Archive`] that keeps one
//! highest-reward trajectory per genome.

use std::cmp::Reverse;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::board::Board;
use crate::dataset::TrajectoryRecord;
use crate::dsl::{EnvGenome, GenomeId};
use crate::error::{Error, Result};
use crate::geometry::Action;
use crate::rules::Ruleset;
use crate::scalar::{unit_rewards, Reward};
use crate::search::{best_first_search, extract_trajectory};
use crate::tiles::{FLOOR, PLAYER};

#[derive(Clone, Debug, PartialEq)]
pub struct EvoConfig {
    pub mu: usize,
    pub lambda: usize,
    pub generations: usize,
    pub initial_budget: u64,
    /// Budget never grows past this.
    pub max_budget: u64,
    /// Budget multiplier applied when the population nears the cap.
    pub budget_growth: f64,
    /// Fraction θ of the budget that triggers growth.
    pub budget_threshold: f64,
    /// Per-bit flip probability on the initial map.
    pub p_map: f64,
    /// Per-tile toggle probability on each mutable rule pattern cell.
    pub p_rule: f64,
    /// Per-rule probability of redrawing the reward from {-1, 0, 1}.
    pub p_reward: f64,
    /// When false only the map evolves.
    pub mutate_rules: bool,
    pub seed: u64,
}

impl Default for EvoConfig {
    fn default() -> Self {
        EvoConfig {
            mu: 10,
            lambda: 40,
            generations: 50,
            initial_budget: 512,
            max_budget: 1 << 16,
            budget_growth: 2.0,
            budget_threshold: 0.9,
            p_map: 0.002,
            p_rule: 0.02,
            p_reward: 0.1,
            mutate_rules: true,
            seed: 0,
        }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let problem = if self.mu == 0 || self.lambda == 0 {
            Some("mu and lambda must be at least 1")
        } else if self.initial_budget == 0 {
            Some("initial budget must be positive")
        } else if self.max_budget < self.initial_budget {
            Some("max budget is below the initial budget")
        } else if self.budget_growth.is_nan() || self.budget_growth <= 1.0 {
            Some("budget growth factor must exceed 1")
        } else if !(self.budget_threshold > 0.0 && self.budget_threshold < 1.0) {
            Some("budget threshold must lie strictly between 0 and 1")
        } else if !(prob(self.p_map) && prob(self.p_rule) && prob(self.p_reward)) {
            Some("mutation rates must lie in [0, 1]")
        } else {
            None
        };
        match problem {
            Some(msg) => Err(Error::Contract(msg.into())),
            None => Ok(()),
        }
    }

    /// Same config with all mutation rates at zero.
    pub fn frozen(&self) -> Self {
        EvoConfig { p_map: 0.0, p_rule: 0.0, p_reward: 0.0, ..self.clone() }
    }
}

/// Keep exactly one player: drop extras at random, or put one on a random
/// floor cell (any cell if there is no floor).
fn repair_player<G: Rng + ?Sized>(map: &mut Board, rng: &mut G) {
    let players = map.active_cells(PLAYER);
    match players.len() {
        1 => {}
        0 => {
            let floors = map.active_cells(FLOOR);
            let (r, c) = match floors.choose(rng) {
                Some(&cell) => cell,
                None => (rng.random_range(0..map.height()), rng.random_range(0..map.width())),
            };
            map.set(r, c, PLAYER, true);
            map.set(r, c, FLOOR, false);
        }
        _ => {
            let keep = *players.choose(rng).expect("non-empty");
            for cell in players.into_iter().filter(|&p| p != keep) {
                map.set(cell.0, cell.1, PLAYER, false);
            }
        }
    }
}

pub fn mutate<R: Reward, G: Rng + ?Sized>(g: &EnvGenome<R>, cfg: &EvoConfig, rng: &mut G) -> Result<EnvGenome<R>> {
    let mut map = g.init_map().clone();
    if cfg.p_map > 0.0 {
        for ch in 0..map.channels() {
            for r in 0..map.height() {
                for c in 0..map.width() {
                    if rng.random_bool(cfg.p_map) {
                        map.toggle(r, c, ch);
                    }
                }
            }
        }
    }
    repair_player(&mut map, rng);

    let tiles = g.tiles().clone();
    let mut rules = g.rules().rules().to_vec();
    if cfg.mutate_rules {
        for rule in rules.iter_mut().filter(|r| r.mutable) {
            if cfg.p_rule > 0.0 {
                for pattern in [&mut rule.input, &mut rule.output] {
                    for r in 0..pattern.rows() {
                        for c in 0..pattern.cols() {
                            let mut mask = pattern.get(r, c);
                            for t in 0..tiles.len() {
                                if rng.random_bool(cfg.p_rule) {
                                    mask ^= 1 << t;
                                }
                            }
                            pattern.set(r, c, mask);
                        }
                    }
                }
            }
            if cfg.p_reward > 0.0 && rng.random_bool(cfg.p_reward) {
                rule.reward = *unit_rewards::<R>().choose(rng).expect("non-empty");
            }
        }
    }
    EnvGenome::new(map, Ruleset::new(tiles, rules)?, g.episode_limit())
}

/// Fitness and best trajectory of one genome.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation<R> {
    pub fitness: u64,
    pub record: TrajectoryRecord<R>,
}

/// Pluggable fitness. Only [`SearchFitness`] ships.
pub trait Fitness<R: Reward>: Sync {
    fn evaluate(&self, g: &EnvGenome<R>, budget: u64) -> Result<Evaluation<R>>;
}

/// Search effort before the best solution was found.
#[derive(Clone, Copy, Debug, Default)]
pub struct SearchFitness;

impl<R: Reward> Fitness<R> for SearchFitness {
    fn evaluate(&self, g: &EnvGenome<R>, budget: u64) -> Result<Evaluation<R>> {
        evaluate(g, budget)
    }
}

pub fn evaluate<R: Reward>(g: &EnvGenome<R>, budget: u64) -> Result<Evaluation<R>> {
    let result = best_first_search(g, budget)?;
    Ok(Evaluation { fitness: result.fitness, record: extract_trajectory(&result, g) })
}

/// Deduplicated trajectory store, in first-insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Archive<R> {
    records: IndexMap<GenomeId, TrajectoryRecord<R>>,
}

impl<R: Reward> Archive<R> {
    pub fn new() -> Self {
        Archive { records: IndexMap::new() }
    }

    /// Insert `record` unless a record with at least its reward is already
    /// stored for the same genome. Returns whether the archive changed.
    pub fn offer(&mut self, record: TrajectoryRecord<R>) -> bool {
        match self.records.get_mut(&record.genome_id) {
            Some(existing) => {
                if record.reward.total_cmp(&existing.reward).is_gt() {
                    *existing = record;
                    true
                } else {
                    false
                }
            }
            None => {
                self.records.insert(record.genome_id, record);
                true
            }
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &GenomeId) -> Option<&TrajectoryRecord<R>> {
        self.records.get(id)
    }

    pub fn records(&self) -> impl Iterator<Item = &TrajectoryRecord<R>> {
        self.records.values()
    }

    pub fn ids(&self) -> Vec<GenomeId> {
        self.records.keys().copied().collect()
    }

    /// `manifest.tsv` contents.
    pub fn manifest(&self) -> String {
        let mut out = String::from("genome_id\treward\tfitness\tgeneration\n");
        for rec in self.records() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                rec.genome_id,
                rec.reward.to_decimal(),
                rec.fitness,
                rec.generation
            );
        }
        out
    }

    /// Write `manifest.tsv` and `archive/<genome_id>/{env.av,actions.txt,meta.tsv}`
    /// under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let root = dir.join("archive");
        fs::create_dir_all(&root)?;
        for rec in self.records() {
            let d = root.join(rec.genome_id.to_string());
            fs::create_dir_all(&d)?;
            fs::write(d.join("env.av"), &rec.genome_text)?;
            fs::write(d.join("actions.txt"), format_actions(&rec.actions))?;
            fs::write(
                d.join("meta.tsv"),
                format!(
                    "reward\tfitness\tbudget\tgeneration\n{}\t{}\t{}\t{}\n",
                    rec.reward.to_decimal(),
                    rec.fitness,
                    rec.budget,
                    rec.generation
                ),
            )?;
        }
        fs::write(dir.join("manifest.tsv"), self.manifest())?;
        Ok(())
    }

    /// Read an archive written by [`Archive::write`].
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = fs::read_to_string(dir.join("manifest.tsv"))?;
        let mut archive = Archive::new();
        for (i, line) in manifest.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let id_text = line.split('\t').next().unwrap_or("");
            let id: GenomeId = id_text
                .parse()
                .map_err(|_| Error::Archive(format!("manifest line {}: bad genome id", i + 1)))?;
            let d = dir.join("archive").join(id_text);
            let genome_text = fs::read_to_string(d.join("env.av"))?;
            let actions = parse_actions(&fs::read_to_string(d.join("actions.txt"))?)?;
            let meta = fs::read_to_string(d.join("meta.tsv"))?;
            let row: Vec<&str> = meta.lines().nth(1).unwrap_or("").split('\t').collect();
            let bad = || Error::Archive(format!("{id}: malformed meta.tsv"));
            if row.len() != 4 {
                return Err(bad());
            }
            let record = TrajectoryRecord {
                genome_id: id,
                genome_text,
                actions,
                reward: R::parse_decimal(row[0]).ok_or_else(bad)?,
                fitness: row[1].parse().map_err(|_| bad())?,
                budget: row[2].parse().map_err(|_| bad())?,
                generation: row[3].parse().map_err(|_| bad())?,
            };
            record.genome()?;
            archive.records.insert(id, record);
        }
        Ok(archive)
    }
}

/// One action code per line.
pub fn format_actions(actions: &[Action]) -> String {
    actions.iter().map(|a| format!("{}\n", a.code())).collect()
}

pub fn parse_actions(text: &str) -> Result<Vec<Action>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<u8>()
                .ok()
                .and_then(Action::from_code)
                .ok_or_else(|| Error::parse(i + 1, format!("invalid action `{}`", l.trim())))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual<R> {
    pub genome: EnvGenome<R>,
    pub eval: Evaluation<R>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub max_fitness: u64,
    pub mean_fitness: f64,
    /// Budget the population was last evaluated at.
    pub budget: u64,
    pub archive_size: usize,
    pub elite_solution_length: usize,
    pub elite_reward: f64,
}

impl GenerationStats {
    pub const TSV_HEADER: &'static str =
        "generation\tmax_fitness\tmean_fitness\tbudget\tarchive_size\telite_solution_length\telite_reward\n";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{:.3}\t{}\t{}\t{}\t{}\n",
            self.generation,
            self.max_fitness,
            self.mean_fitness,
            self.budget,
            self.archive_size,
            self.elite_solution_length,
            self.elite_reward
        )
    }
}

pub fn stats_tsv(stats: &[GenerationStats]) -> String {
    let mut out = String::from(GenerationStats::TSV_HEADER);
    for s in stats {
        out.push_str(&s.tsv_row());
    }
    out
}

#[derive(Clone, Debug)]
pub struct EvolutionOutcome<R> {
    pub archive: Archive<R>,
    pub stats: Vec<GenerationStats>,
    /// Final elites, best first.
    pub population: Vec<Individual<R>>,
}

impl<R: Reward> EvolutionOutcome<R> {
    /// Archive layout plus `stats.tsv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.archive.write(dir)?;
        fs::write(dir.join("stats.tsv"), stats_tsv(&self.stats))?;
        Ok(())
    }
}

fn evaluate_all<R: Reward, F: Fitness<R>>(
    genomes: Vec<EnvGenome<R>>,
    budget: u64,
    fitness: &F,
    generation: usize,
) -> Result<Vec<Individual<R>>> {
    genomes
        .into_par_iter()
        .map(|genome| {
            let mut eval = fitness.evaluate(&genome, budget)?;
            eval.record.generation = generation as u32;
            Ok(Individual { genome, eval })
        })
        .collect()
}

fn stats_for<R: Reward>(generation: usize, pop: &[Individual<R>], budget: u64, archive: &Archive<R>) -> GenerationStats {
    let elite = &pop[0];
    GenerationStats {
        generation,
        max_fitness: elite.eval.fitness,
        mean_fitness: pop.iter().map(|i| i.eval.fitness as f64).sum::<f64>() / pop.len() as f64,
        budget,
        archive_size: archive.len(),
        elite_solution_length: elite.eval.record.actions.len(),
        elite_reward: elite.eval.record.reward.as_f64(),
    }
}

/// Run (μ+λ) evolution from `seed` with the built-in search fitness.
pub fn run_evolution<R: Reward>(seed: &EnvGenome<R>, cfg: &EvoConfig) -> Result<EvolutionOutcome<R>> {
    run_evolution_with(seed, cfg, &SearchFitness, |_| {})
}

/// Full form of [`run_evolution`] with a custom fitness and a per-generation
/// callback.
pub fn run_evolution_with<R: Reward, F: Fitness<R>>(
    seed: &EnvGenome<R>,
    cfg: &EvoConfig,
    fitness: &F,
    mut on_generation: impl FnMut(&GenerationStats),
) -> Result<EvolutionOutcome<R>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut budget = cfg.initial_budget;
    let mut archive = Archive::new();

    let mut initial = vec![seed.clone()];
    for _ in 1..cfg.mu {
        initial.push(mutate(seed, cfg, &mut rng)?);
    }
    let mut population = evaluate_all(initial, budget, fitness, 0)?;
    for ind in &population {
        archive.offer(ind.eval.record.clone());
    }
    population.sort_by_key(|ind| Reverse(ind.eval.fitness));

    let mut stats = Vec::with_capacity(cfg.generations + 1);
    let first = stats_for(0, &population, budget, &archive);
    on_generation(&first);
    stats.push(first);

    for generation in 1..=cfg.generations {
        let mut children = Vec::with_capacity(cfg.lambda);
        for _ in 0..cfg.lambda {
            let parent = population.choose(&mut rng).expect("population is never empty");
            children.push(mutate(&parent.genome, cfg, &mut rng)?);
        }
        let offspring = evaluate_all(children, budget, fitness, generation)?;
        for ind in &offspring {
            archive.offer(ind.eval.record.clone());
        }
        population.extend(offspring);
        // stable: parents stay ahead of equally fit offspring
        population.sort_by_key(|ind| Reverse(ind.eval.fitness));
        population.truncate(cfg.mu);

        let near_cap = population
            .iter()
            .any(|ind| ind.eval.fitness as f64 >= cfg.budget_threshold * budget as f64);
        if near_cap && budget < cfg.max_budget {
            budget = ((budget as f64 * cfg.budget_growth).ceil() as u64).min(cfg.max_budget);
            let elites = population.drain(..).map(|ind| ind.genome).collect();
            population = evaluate_all(elites, budget, fitness, generation)?;
            for ind in &population {
                archive.offer(ind.eval.record.clone());
            }
            population.sort_by_key(|ind| Reverse(ind.eval.fitness));
        }

        let s = stats_for(generation, &population, budget, &archive);
        on_generation(&s);
        stats.push(s);
    }

    Ok(EvolutionOutcome { archive, stats, population })
}
