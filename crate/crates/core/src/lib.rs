//! Grid worlds whose dynamics are local rewrite rules, evolved to be hard
//! for a best-first search agent.
//!
//! Rules match small tile patterns and rewrite them in parallel every tick
//! ([`rules`]). A genome ([`dsl`]) bundles a starting map, a ruleset and an
//! episode limit; [`sim`] plays it, [`search`] scores it, [`evolve`] breeds
//! genomes whose best solution takes the most search effort to find, and
//! [`dataset`] turns the resulting archive into imitation-learning data.
//!
//! Everything is generic over the reward scalar. The aliases at the crate
//! root pick `f64`; the `Exact*` aliases use 64-bit rationals.

pub mod board;
pub mod dataset;
pub mod dsl;
pub mod error;
pub mod evolve;
pub mod generate;
pub mod geometry;
pub mod pattern;
pub mod render;
pub mod rules;
pub mod scalar;
pub mod search;
pub mod sim;
pub mod state;
pub mod tiles;

pub use board::Board;
pub use dsl::{parse, serialize, EnvGenome, GenomeId};
pub use error::{Error, Result};
pub use geometry::{Action, Orientation};
pub use pattern::Pattern;
pub use scalar::Reward;
pub use state::{GameState, StateKey};
pub use tiles::{TileMask, TileSet};

pub use num_rational::Rational64;

pub type Genome = EnvGenome<f64>;
pub type State = GameState<f64>;
pub type Rule = rules::RewriteRule<f64>;
pub type Rules = rules::Ruleset<f64>;
pub type Record = dataset::TrajectoryRecord<f64>;
pub type Search = search::SearchResult<f64>;

pub type ExactGenome = EnvGenome<Rational64>;
pub type ExactState = GameState<Rational64>;
pub type ExactRules = rules::Ruleset<Rational64>;
pub type ExactRecord = dataset::TrajectoryRecord<Rational64>;

pub type Genome32 = EnvGenome<f32>;
