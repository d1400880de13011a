use std::fmt;

use sha2::{Digest, Sha256};

use crate::board::Board;
use crate::geometry::Orientation;
use crate::scalar::Reward;
use crate::tiles::PLAYER;

/// Episode state: the board plus everything the player carries.
#[derive(Clone, Debug, PartialEq)]
pub struct GameState<R> {
    pub board: Board,
    /// Row-major first cell of the player channel, `None` once the player is gone.
    pub player_pos: Option<(usize, usize)>,
    pub orientation: Orientation,
    pub total_reward: R,
    pub tick: u32,
    pub done: bool,
}

impl<R: Reward> GameState<R> {
    /// Fresh state at tick 0 facing north.
    pub fn initial(board: Board, episode_limit: u32) -> Self {
        let player_pos = board.first_active(PLAYER);
        GameState {
            done: player_pos.is_none() || episode_limit == 0,
            board,
            player_pos,
            orientation: Orientation::North,
            total_reward: R::zero(),
            tick: 0,
        }
    }

    /// Digest of board, player position and orientation. Reward and tick
    /// are deliberately left out so that states equal up to reward collide.
    pub fn key(&self) -> StateKey {
        state_key(self)
    }
}

/// 128-bit digest identifying equivalent game states.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey(pub [u8; 16]);

impl fmt::Debug for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateKey({self})")
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

pub fn state_key<R>(state: &GameState<R>) -> StateKey {
    let board = &state.board;
    let mut hasher = Sha256::new();
    for dim in [board.height(), board.width(), board.channels()] {
        hasher.update((dim as u32).to_le_bytes());
    }
    hasher.update(board.to_packed());
    match state.player_pos {
        Some((r, c)) => {
            hasher.update([1]);
            hasher.update((r as u32).to_le_bytes());
            hasher.update((c as u32).to_le_bytes());
        }
        None => hasher.update([0]),
    }
    hasher.update([state.orientation.index() as u8]);
    let digest = hasher.finalize();
    let mut key = [0u8; 16];
    key.copy_from_slice(&digest[..16]);
    StateKey(key)
}
