//! Episode semantics on top of the rule engine.
//!
//! One [`step`] is: apply the action (turn, or drop a force tile on the cell
//! ahead), run one parallel rule tick, wipe any leftover force, then
//! re-derive the player position. Turning still advances the world.

use rayon::prelude::*;

use crate::dsl::EnvGenome;
use crate::error::{Error, Result};
use crate::geometry::{Action, Orientation};
use crate::pattern::MAX_PATTERN_SIDE;
use crate::rules::{step_rules_with, StepScratch};
use crate::scalar::Reward;
use crate::state::{GameState, StateKey};
use crate::tiles::{FORCE, PLAYER};

/// Observation window that fully covers a 16×16 board from any cell.
pub const DEFAULT_OBS_WINDOW: usize = 31;

pub fn reset<R: Reward>(g: &EnvGenome<R>) -> GameState<R> {
    GameState::initial(g.init_map().clone(), g.episode_limit())
}

pub fn step<R: Reward>(state: &GameState<R>, action: Action, g: &EnvGenome<R>) -> Result<(GameState<R>, R)> {
    step_with(state, action, g, &mut StepScratch::default())
}

/// [`step`] reusing a caller-owned scratch buffer.
pub fn step_with<R: Reward>(
    state: &GameState<R>,
    action: Action,
    g: &EnvGenome<R>,
    scratch: &mut StepScratch,
) -> Result<(GameState<R>, R)> {
    if state.done {
        return Err(Error::Contract(format!("step called on a finished episode (tick {})", state.tick)));
    }
    let mut board = state.board.clone();
    let mut orientation = state.orientation;
    match action {
        Action::RotateLeft => orientation = orientation.rotate_left(),
        Action::RotateRight => orientation = orientation.rotate_right(),
        Action::Forward => {
            if let Some(pos) = state.player_pos {
                if let Some((r, c)) = orientation.step_from(pos, board.height(), board.width()) {
                    board.set(r, c, FORCE, true);
                }
            }
        }
    }
    let outcome = step_rules_with(&board, g.rules(), scratch);
    let mut next = outcome.next;
    next.clear_channel(FORCE);
    let player_pos = next.first_active(PLAYER);
    let tick = state.tick + 1;
    let next_state = GameState {
        board: next,
        player_pos,
        orientation,
        total_reward: state.total_reward + outcome.reward,
        tick,
        done: player_pos.is_none() || tick >= g.episode_limit(),
    };
    Ok((next_state, outcome.reward))
}

/// Final state and per-step rewards of a replayed action list.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout<R> {
    pub final_state: GameState<R>,
    pub rewards: Vec<R>,
}

impl<R: Reward> Rollout<R> {
    pub fn total_reward(&self) -> R {
        self.final_state.total_reward
    }
}

/// Fold `actions` through [`step`], stopping early once the episode ends.
pub fn rollout<R: Reward>(g: &EnvGenome<R>, actions: &[Action]) -> Rollout<R> {
    let mut scratch = StepScratch::default();
    let mut state = reset(g);
    let mut rewards = Vec::with_capacity(actions.len());
    for &a in actions {
        if state.done {
            break;
        }
        let (next, r) = step_with(&state, a, g, &mut scratch).expect("state is live");
        rewards.push(r);
        state = next;
    }
    Rollout { final_state: state, rewards }
}

/// State keys of every state visited by a rollout, starting with the reset state.
pub fn key_trace<R: Reward>(g: &EnvGenome<R>, actions: &[Action]) -> Vec<StateKey> {
    let mut state = reset(g);
    let mut keys = vec![state.key()];
    for &a in actions {
        if state.done {
            break;
        }
        state = step(&state, a, g).expect("state is live").0;
        keys.push(state.key());
    }
    keys
}

struct Lane<'a, R> {
    genome: &'a EnvGenome<R>,
    actions: &'a [Action],
    state: GameState<R>,
    rewards: Vec<R>,
    scratch: StepScratch,
}

/// Run many rollouts, advancing every live environment one tick at a time.
/// Each tick is distributed over the rayon pool; result `i` is identical to
/// `rollout(&genomes[i], &actions[i])`.
pub fn rollout_batch<R: Reward, A: AsRef<[Action]> + Sync>(
    genomes: &[EnvGenome<R>],
    actions: &[A],
) -> Result<Vec<Rollout<R>>> {
    if genomes.len() != actions.len() {
        return Err(Error::Contract(format!(
            "{} genomes but {} action lists",
            genomes.len(),
            actions.len()
        )));
    }
    let mut lanes: Vec<Lane<'_, R>> = genomes
        .iter()
        .zip(actions)
        .map(|(genome, acts)| Lane {
            genome,
            actions: acts.as_ref(),
            state: reset(genome),
            rewards: Vec::with_capacity(acts.as_ref().len()),
            scratch: StepScratch::default(),
        })
        .collect();
    let horizon = lanes.iter().map(|l| l.actions.len()).max().unwrap_or(0);
    for t in 0..horizon {
        lanes.par_iter_mut().for_each(|lane| {
            if lane.state.done || t >= lane.actions.len() {
                return;
            }
            let (next, r) = step_with(&lane.state, lane.actions[t], lane.genome, &mut lane.scratch)
                .expect("state is live");
            lane.rewards.push(r);
            lane.state = next;
        });
    }
    Ok(lanes
        .into_iter()
        .map(|l| Rollout { final_state: l.state, rewards: l.rewards })
        .collect())
}

/// What a policy sees at one state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub window: usize,
    pub channels: usize,
    /// `window × window × channels` bits in `[row][col][channel]` order,
    /// centred on the player, zero outside the board.
    pub patch: Vec<u8>,
    /// Per mutable rule: input then output pattern padded to 3×3
    /// (`[row][col][channel]`), then reward sign one-hot `[neg, zero, pos]`.
    /// All zeros when rules are hidden.
    pub rule_encoding: Vec<u8>,
    /// One-hot over north, east, south, west.
    pub orientation: [u8; 4],
}

/// Length of one rule's block in [`Observation::rule_encoding`].
pub fn rule_block_len(channels: usize) -> usize {
    2 * MAX_PATTERN_SIDE * MAX_PATTERN_SIDE * channels + 3
}

impl Observation {
    /// Concatenation of patch, rule encoding and orientation.
    pub fn bits(&self) -> impl Iterator<Item = u8> + '_ {
        self.patch
            .iter()
            .chain(&self.rule_encoding)
            .chain(&self.orientation)
            .copied()
    }

    pub fn bit_len(&self) -> usize {
        self.patch.len() + self.rule_encoding.len() + 4
    }

    /// Bits packed least-significant first.
    pub fn to_packed(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bit_len().div_ceil(8)];
        for (i, bit) in self.bits().enumerate() {
            if bit != 0 {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }
}

fn encode_rules<R: Reward>(g: &EnvGenome<R>, out: &mut Vec<u8>) {
    let c = g.tiles().len();
    let side = MAX_PATTERN_SIDE;
    for rule in g.rules().mutable_rules() {
        for pattern in [&rule.input, &rule.output] {
            for r in 0..side {
                for col in 0..side {
                    let mask = if r < pattern.rows() && col < pattern.cols() { pattern.get(r, col) } else { 0 };
                    out.extend((0..c).map(|ch| u8::from(mask & (1 << ch) != 0)));
                }
            }
        }
        let sign = rule.reward.total_cmp(&R::zero()) as i8;
        out.extend([u8::from(sign < 0), u8::from(sign == 0), u8::from(sign > 0)]);
    }
}

/// Build the observation for `state`. `window` must be odd and at most
/// `2·max(H, W) − 1`.
pub fn observe<R: Reward>(state: &GameState<R>, g: &EnvGenome<R>, window: usize, show_rules: bool) -> Result<Observation> {
    let board = &state.board;
    let (h, w, c) = (board.height(), board.width(), board.channels());
    let max_window = 2 * h.max(w) - 1;
    if window.is_multiple_of(2) || window == 0 || window > max_window {
        return Err(Error::Contract(format!(
            "observation window {window} must be odd and in 1..={max_window}"
        )));
    }
    let mut patch = vec![0u8; window * window * c];
    if let Some((pr, pc)) = state.player_pos {
        let half = (window / 2) as isize;
        for dr in 0..window {
            let r = pr as isize + dr as isize - half;
            if r < 0 || r >= h as isize {
                continue;
            }
            for dc in 0..window {
                let col = pc as isize + dc as isize - half;
                if col < 0 || col >= w as isize {
                    continue;
                }
                let base = (dr * window + dc) * c;
                for ch in 0..c {
                    patch[base + ch] = u8::from(board.get(r as usize, col as usize, ch));
                }
            }
        }
    }
    let k = g.rules().mutable_rules().count();
    let mut rule_encoding = Vec::with_capacity(k * rule_block_len(c));
    if show_rules {
        encode_rules(g, &mut rule_encoding);
    } else {
        rule_encoding.resize(k * rule_block_len(c), 0);
    }
    let mut orientation = [0u8; 4];
    orientation[state.orientation.index()] = 1;
    Ok(Observation { window, channels: c, patch, rule_encoding, orientation })
}

/// Orientation for a one-hot, mostly for tests and decoders.
pub fn orientation_from_one_hot(one_hot: &[u8; 4]) -> Option<Orientation> {
    let mut hit = one_hot.iter().enumerate().filter(|(_, &v)| v != 0);
    match (hit.next(), hit.next()) {
        (Some((i, _)), None) => Orientation::from_index(i),
        _ => None,
    }
}
