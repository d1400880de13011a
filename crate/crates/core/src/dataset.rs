//! Imitation-learning data built by replaying archived trajectories.
//!
//! Observations are never stored in the archive; [`build_pairs`] replays a
//! record deterministically, so window size and rule visibility can be
//! chosen at export time.
//!
//! # Export layout
//!
//! `export` writes, per record, `<genome_id>.obs` and `<genome_id>.act`,
//! plus `index.tsv` listing every record with its split.
//!
//! `.obs` is little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4 | magic `RGOB` |
//! | 2 | format version (1) |
//! | 2 | window `w` |
//! | 2 | channels `c` |
//! | 2 | mutable rule count `k` |
//! | 1 | rules shown (0/1) |
//! | 1 | reserved, 0 |
//! | 4 | observation count `n` |
//! | 4 | bits per observation `b = w·w·c + k·(18c + 3) + 4` |
//!
//! followed by `n` records of `ceil(b / 8)` bytes: the observation bits
//! (patch, rule encoding, orientation one-hot) packed least-significant
//! bit first. `.act` holds `n` bytes, one action code each.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dsl::{parse, EnvGenome, GenomeId};
use crate::error::{Error, Result};
use crate::geometry::Action;
use crate::scalar::Reward;
use crate::sim::{observe, reset, rollout, rule_block_len, step, Observation};

/// A genome together with its best known action sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord<R> {
    pub genome_id: GenomeId,
    /// Canonical genome text.
    pub genome_text: String,
    pub actions: Vec<Action>,
    pub reward: R,
    pub fitness: u64,
    pub budget: u64,
    pub generation: u32,
}

impl<R: Reward> TrajectoryRecord<R> {
    pub fn genome(&self) -> Result<EnvGenome<R>> {
        let g: EnvGenome<R> = parse(&self.genome_text)?;
        if g.id() != self.genome_id {
            return Err(Error::Archive(format!(
                "record {} holds text hashing to {}",
                self.genome_id,
                g.id()
            )));
        }
        Ok(g)
    }

    /// Total reward obtained by replaying the actions.
    pub fn replay_reward(&self) -> Result<R> {
        Ok(rollout(&self.genome()?, &self.actions).total_reward())
    }
}

/// `(observation, action)` for every step of a trajectory.
pub fn build_pairs<R: Reward>(
    record: &TrajectoryRecord<R>,
    window: usize,
    show_rules: bool,
) -> Result<Vec<(Observation, Action)>> {
    let g = record.genome()?;
    let mut state = reset(&g);
    let mut pairs = Vec::with_capacity(record.actions.len());
    for &action in &record.actions {
        if state.done {
            return Err(Error::Archive(format!(
                "record {} has actions past the end of its episode",
                record.genome_id
            )));
        }
        pairs.push((observe(&state, &g, window, show_rules)?, action));
        state = step(&state, action, &g)?.0;
    }
    Ok(pairs)
}

/// Seeded split of `ids` into `(train, test)`, each kept in input order.
/// The test set has `round(test_fraction · len)` ids.
pub fn split(ids: &[GenomeId], test_fraction: f64, seed: u64) -> Result<(Vec<GenomeId>, Vec<GenomeId>)> {
    if ids.is_empty() {
        return Err(Error::Contract("cannot split an empty archive".into()));
    }
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::Contract(format!("test fraction {test_fraction} outside [0, 1]")));
    }
    let n_test = (test_fraction * ids.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = vec![false; ids.len()];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let (test, train): (Vec<_>, Vec<_>) = ids.iter().zip(is_test).partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(id, _)| *id).collect(),
        test.into_iter().map(|(id, _)| *id).collect(),
    ))
}

pub const OBS_MAGIC: &[u8; 4] = b"RGOB";
pub const OBS_VERSION: u16 = 1;
const OBS_HEADER_LEN: usize = 22;

/// Decoded `.obs` file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObsFile {
    pub window: usize,
    pub channels: usize,
    pub rules: usize,
    pub show_rules: bool,
    pub bits_per_obs: usize,
    /// Packed observations, `ceil(bits_per_obs / 8)` bytes each.
    pub observations: Vec<Vec<u8>>,
}

impl ObsFile {
    pub fn expected_bits(window: usize, channels: usize, rules: usize) -> usize {
        window * window * channels + rules * rule_block_len(channels) + 4
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(OBS_HEADER_LEN + self.observations.iter().map(Vec::len).sum::<usize>());
        out.extend_from_slice(OBS_MAGIC);
        out.extend_from_slice(&OBS_VERSION.to_le_bytes());
        for v in [self.window, self.channels, self.rules] {
            out.extend_from_slice(&(v as u16).to_le_bytes());
        }
        out.push(u8::from(self.show_rules));
        out.push(0);
        out.extend_from_slice(&(self.observations.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.bits_per_obs as u32).to_le_bytes());
        for obs in &self.observations {
            out.extend_from_slice(obs);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Archive(format!("bad observation file: {msg}"));
        if bytes.len() < OBS_HEADER_LEN || &bytes[..4] != OBS_MAGIC {
            return Err(bad("missing header"));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]) as usize;
        let u32_at = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]) as usize;
        if u16_at(4) != OBS_VERSION as usize {
            return Err(bad("unsupported version"));
        }
        let (window, channels, rules) = (u16_at(6), u16_at(8), u16_at(10));
        let show_rules = match bytes[12] {
            0 => false,
            1 => true,
            _ => return Err(bad("rules flag")),
        };
        let count = u32_at(14);
        let bits_per_obs = u32_at(18);
        if bits_per_obs != Self::expected_bits(window, channels, rules) {
            return Err(bad("bit count does not match dimensions"));
        }
        let stride = bits_per_obs.div_ceil(8);
        let body = &bytes[OBS_HEADER_LEN..];
        if body.len() != count * stride {
            return Err(bad("truncated body"));
        }
        Ok(ObsFile {
            window,
            channels,
            rules,
            show_rules,
            bits_per_obs,
            observations: body.chunks(stride).map(<[u8]>::to_vec).collect(),
        })
    }

    /// Unpacked bits of observation `i`.
    pub fn bits(&self, i: usize) -> Vec<u8> {
        let obs = &self.observations[i];
        (0..self.bits_per_obs).map(|b| (obs[b / 8] >> (b % 8)) & 1).collect()
    }
}

/// Options for [`export`].
#[derive(Clone, Debug)]
pub struct ExportOptions {
    pub window: usize,
    pub show_rules: bool,
    pub test_fraction: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExportSummary {
    pub records: usize,
    pub pairs: usize,
    pub train: usize,
    pub test: usize,
}

/// Replay every record and write the tensor files plus `index.tsv`.
pub fn export<R: Reward>(records: &[TrajectoryRecord<R>], out_dir: &Path, opts: &ExportOptions) -> Result<ExportSummary> {
    let ids: Vec<GenomeId> = records.iter().map(|r| r.genome_id).collect();
    let (_, test) = split(&ids, opts.test_fraction, opts.seed)?;
    let files: Vec<(ObsFile, Vec<u8>)> = records
        .par_iter()
        .map(|rec| {
            let g = rec.genome()?;
            let pairs = build_pairs(rec, opts.window, opts.show_rules)?;
            let k = g.rules().mutable_rules().count();
            let obs = ObsFile {
                window: opts.window,
                channels: g.tiles().len(),
                rules: k,
                show_rules: opts.show_rules,
                bits_per_obs: ObsFile::expected_bits(opts.window, g.tiles().len(), k),
                observations: pairs.iter().map(|(o, _)| o.to_packed()).collect(),
            };
            let acts = pairs.iter().map(|(_, a)| a.code()).collect();
            Ok((obs, acts))
        })
        .collect::<Result<_>>()?;

    fs::create_dir_all(out_dir)?;
    let mut index = String::from("genome_id\tsplit\tpairs\treward\tfitness\tobs\tact\n");
    let mut pairs = 0;
    for (rec, (obs, acts)) in records.iter().zip(&files) {
        let id = rec.genome_id.to_string();
        let obs_name = format!("{id}.obs");
        let act_name = format!("{id}.act");
        fs::write(out_dir.join(&obs_name), obs.encode())?;
        fs::write(out_dir.join(&act_name), acts)?;
        let which = if test.contains(&rec.genome_id) { "test" } else { "train" };
        index.push_str(&format!(
            "{id}\t{which}\t{}\t{}\t{}\t{obs_name}\t{act_name}\n",
            acts.len(),
            rec.reward.to_decimal(),
            rec.fitness
        ));
        pairs += acts.len();
    }
    let mut f = fs::File::create(out_dir.join("index.tsv"))?;
    f.write_all(index.as_bytes())?;
    Ok(ExportSummary { records: records.len(), pairs, train: records.len() - test.len(), test: test.len() })
}
