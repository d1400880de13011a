//! Text and image rendering of episodes, plus a line-driven play loop.

use std::io::{BufRead, Write};

use crate::board::Board;
use crate::dsl::EnvGenome;
use crate::error::{Error, Result};
use crate::geometry::Action;
use crate::scalar::Reward;
use crate::sim::{reset, step};
use crate::state::GameState;
use crate::tiles::{TileMask, FLOOR, FOOD, FORCE, PLAYER, RESERVED, WALL};

const N_RESERVED: usize = RESERVED.len();

/// Reserved tiles from most to least visible.
const PRIORITY: [usize; N_RESERVED] = [PLAYER, FORCE, FOOD, WALL, FLOOR];

/// Highest-priority tile in `mask`; extras rank below the reserved tiles,
/// lower index first.
pub fn dominant_tile(mask: TileMask) -> Option<usize> {
    PRIORITY
        .iter()
        .copied()
        .find(|&t| mask & (1 << t) != 0)
        .or_else(|| (mask != 0).then(|| mask.trailing_zeros() as usize))
}

fn tile_glyph(tile: usize) -> char {
    match tile {
        PLAYER => '@',
        FORCE => '+',
        WALL => '#',
        FLOOR => '.',
        FOOD => 'o',
        t => {
            let i = (t - N_RESERVED) as u8;
            if i < 26 {
                (b'a' + i) as char
            } else if i < 52 {
                (b'A' + i - 26) as char
            } else {
                '?'
            }
        }
    }
}

/// `@` whenever the player is present, `*` for any other cell holding
/// several tiles, space for an empty cell.
pub fn cell_glyph(mask: TileMask) -> char {
    if mask & (1 << PLAYER) != 0 {
        '@'
    } else if mask.count_ones() > 1 {
        '*'
    } else {
        dominant_tile(mask).map_or(' ', tile_glyph)
    }
}

pub fn board_ascii(board: &Board) -> String {
    let mut out = String::with_capacity(board.height() * (board.width() + 1));
    for r in 0..board.height() {
        out.extend((0..board.width()).map(|c| cell_glyph(board.cell(r, c))));
        out.push('\n');
    }
    out
}

/// Header line followed by the board.
pub fn frame_ascii<R: Reward>(state: &GameState<R>) -> String {
    format!(
        "t={} reward={}\n{}",
        state.tick,
        state.total_reward.to_decimal(),
        board_ascii(&state.board)
    )
}

/// States at t=0 and after every action. Replay stops early if the
/// episode ends before the actions run out.
pub fn episode_states<R: Reward>(g: &EnvGenome<R>, actions: &[Action]) -> Result<Vec<GameState<R>>> {
    let mut states = vec![reset(g)];
    for &a in actions {
        let last = states.last().expect("non-empty");
        if last.done {
            break;
        }
        let next = step(last, a, g)?.0;
        states.push(next);
    }
    Ok(states)
}

pub fn render_ascii<R: Reward>(g: &EnvGenome<R>, actions: &[Action]) -> Result<Vec<String>> {
    Ok(episode_states(g, actions)?.iter().map(frame_ascii).collect())
}

const EMPTY_COLOR: [u8; 3] = [0, 0, 0];
const RESERVED_COLORS: [[u8; 3]; N_RESERVED] = [
    [230, 60, 60],   // player
    [250, 220, 80],  // force
    [90, 90, 100],   // wall
    [210, 200, 180], // floor
    [80, 190, 80],   // food
];
const EXTRA_COLORS: [[u8; 3]; 8] = [
    [70, 130, 220],
    [200, 90, 200],
    [60, 200, 200],
    [240, 150, 50],
    [150, 100, 60],
    [160, 160, 255],
    [255, 160, 200],
    [120, 220, 150],
];

pub fn tile_color(tile: usize) -> [u8; 3] {
    if tile < N_RESERVED {
        RESERVED_COLORS[tile]
    } else {
        EXTRA_COLORS[(tile - N_RESERVED) % EXTRA_COLORS.len()]
    }
}

/// Binary PPM (P6) of `board`, each cell a `scale`×`scale` block coloured by
/// its dominant tile.
pub fn board_ppm(board: &Board, scale: usize) -> Vec<u8> {
    let scale = scale.max(1);
    let (h, w) = (board.height() * scale, board.width() * scale);
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            let mask = board.cell(y / scale, x / scale);
            out.extend_from_slice(&dominant_tile(mask).map_or(EMPTY_COLOR, tile_color));
        }
    }
    out
}

fn key_action(key: &str) -> Option<Option<Action>> {
    match key {
        "a" | "l" | "left" => Some(Some(Action::RotateLeft)),
        "d" | "r" | "right" => Some(Some(Action::RotateRight)),
        "w" | "f" | "forward" => Some(Some(Action::Forward)),
        "q" | "quit" => Some(None),
        _ => None,
    }
}

/// Interactive episode: one key per input line (`a`/`l` turn left, `d`/`r`
/// turn right, `w`/`f` forward, `q` quit). Returns the final total reward.
pub fn play_session<R: Reward>(g: &EnvGenome<R>, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<R> {
    let mut state = reset(g);
    write!(out, "{}", frame_ascii(&state))?;
    let mut line = String::new();
    while !state.done {
        write!(out, "{:?} > ", state.orientation)?;
        out.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            writeln!(out)?;
            break;
        }
        match key_action(line.trim()) {
            Some(Some(action)) => {
                state = step(&state, action, g)?.0;
                write!(out, "{}", frame_ascii(&state))?;
            }
            Some(None) => break,
            None => writeln!(out, "keys: a=left d=right w=forward q=quit")?,
        }
    }
    if state.done {
        writeln!(out, "episode over at t={}", state.tick)?;
    }
    writeln!(out, "total reward: {}", state.total_reward.to_decimal())?;
    Ok(state.total_reward)
}

/// Parse an action list: codes 0/1/2 or letters L/R/F, separated by
/// whitespace or commas, or packed as a single word like `RFFL`.
pub fn parse_action_list(text: &str) -> Result<Vec<Action>> {
    let mut actions = Vec::new();
    for token in text.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
        for ch in token.chars() {
            let a = match ch.to_ascii_uppercase() {
                '0' | 'L' => Action::RotateLeft,
                '1' | 'R' => Action::RotateRight,
                '2' | 'F' => Action::Forward,
                _ => return Err(Error::Contract(format!("unknown action `{ch}`"))),
            };
            actions.push(a);
        }
    }
    Ok(actions)
}
