//! Random maps, rules and genomes.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::board::Board;
use crate::dsl::{EnvGenome, DEFAULT_EPISODE_LIMIT};
use crate::error::Result;
use crate::pattern::{Pattern, MAX_PATTERN_SIDE};
use crate::rules::{base_maze_ruleset, RewriteRule, Ruleset, DEFAULT_NOOP_RULES};
use crate::scalar::{unit_rewards, Reward};
use crate::tiles::{TileMask, TileSet, FLOOR, FOOD, PLAYER, WALL};

/// Default board side.
pub const DEFAULT_SIDE: usize = 16;

/// Perfect maze carved by randomized depth-first search.
///
/// Rooms sit on odd coordinates inside a wall border; everything else
/// starts as wall. The player is placed in a random room and one food tile
/// in another. Player and food cells carry no floor.
pub fn random_maze<R: Rng + ?Sized>(tiles: &TileSet, height: usize, width: usize, rng: &mut R) -> Result<Board> {
    let mut board = Board::new(height.max(5), width.max(5), tiles.len())?;
    let (h, w) = (board.height(), board.width());
    for r in 0..h {
        for c in 0..w {
            board.set(r, c, WALL, true);
        }
    }
    let room_rows = (h - 1) / 2;
    let room_cols = (w - 1) / 2;
    let cell = |i: usize| (2 * (i / room_cols) + 1, 2 * (i % room_cols) + 1);
    let n = room_rows * room_cols;
    let mut visited = vec![false; n];
    let carve = |b: &mut Board, (r, c): (usize, usize)| {
        b.set(r, c, WALL, false);
        b.set(r, c, FLOOR, true);
    };
    let start = rng.random_range(0..n);
    visited[start] = true;
    carve(&mut board, cell(start));
    let mut stack = vec![start];
    while let Some(&cur) = stack.last() {
        let (rr, rc) = (cur / room_cols, cur % room_cols);
        let mut next = Vec::with_capacity(4);
        if rr > 0 {
            next.push(cur - room_cols);
        }
        if rr + 1 < room_rows {
            next.push(cur + room_cols);
        }
        if rc > 0 {
            next.push(cur - 1);
        }
        if rc + 1 < room_cols {
            next.push(cur + 1);
        }
        next.retain(|&i| !visited[i]);
        match next.choose(rng) {
            Some(&nb) => {
                visited[nb] = true;
                let (a, b) = (cell(cur), cell(nb));
                carve(&mut board, ((a.0 + b.0) / 2, (a.1 + b.1) / 2));
                carve(&mut board, b);
                stack.push(nb);
            }
            None => {
                stack.pop();
            }
        }
    }
    let player = rng.random_range(0..n);
    let mut food = rng.random_range(0..n - 1);
    if food >= player {
        food += 1;
    }
    let (pr, pc) = cell(player);
    board.set_cell(pr, pc, 1 << PLAYER);
    let (fr, fc) = cell(food);
    board.set_cell(fr, fc, 1 << FOOD);
    Ok(board)
}

/// Base maze ruleset on a random maze, the default seed for evolution.
pub fn base_maze_genome<R: Reward, G: Rng + ?Sized>(side: usize, rng: &mut G) -> Result<EnvGenome<R>> {
    let tiles = TileSet::default();
    let map = random_maze(&tiles, side, side, rng)?;
    EnvGenome::new(map, base_maze_ruleset(&tiles, DEFAULT_NOOP_RULES)?, DEFAULT_EPISODE_LIMIT)
}

/// [`base_maze_genome`] drawn from a ChaCha8 stream seeded with `seed`.
pub fn seeded_maze_genome<R: Reward>(side: usize, seed: u64) -> Result<EnvGenome<R>> {
    base_maze_genome(side, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Random multihot board with independent bits of density `density` and a
/// player forced into one random cell.
pub fn random_board<R: Rng + ?Sized>(tiles: &TileSet, height: usize, width: usize, density: f64, rng: &mut R) -> Result<Board> {
    let mut board = Board::new(height, width, tiles.len())?;
    for r in 0..height {
        for c in 0..width {
            for ch in 0..tiles.len() {
                if ch != PLAYER && rng.random_bool(density) {
                    board.set(r, c, ch, true);
                }
            }
        }
    }
    let (r, c) = (rng.random_range(0..height), rng.random_range(0..width));
    board.set(r, c, PLAYER, true);
    Ok(board)
}

fn random_mask<R: Rng + ?Sized>(tiles: usize, density: f64, rng: &mut R) -> TileMask {
    (0..tiles).filter(|_| rng.random_bool(density)).fold(0, |m, t| m | (1 << t))
}

/// Random rule up to 3×3 with sparse patterns and a unit reward.
pub fn random_rule<R: Reward, G: Rng + ?Sized>(name: &str, tiles: &TileSet, rng: &mut G) -> RewriteRule<R> {
    let rows = rng.random_range(1..=MAX_PATTERN_SIDE);
    let cols = rng.random_range(1..=MAX_PATTERN_SIDE);
    let density = 1.5 / tiles.len() as f64;
    let mut input = Pattern::empty(rows, cols).expect("shape in range");
    let mut output = input.clone();
    for r in 0..rows {
        for c in 0..cols {
            input.set(r, c, random_mask(tiles.len(), density, rng));
            output.set(r, c, random_mask(tiles.len(), density, rng));
        }
    }
    let reward = *unit_rewards::<R>().choose(rng).expect("non-empty");
    RewriteRule::new(name, input, output, reward).rotating(rng.random_bool(0.3))
}

/// A genome with `rules` random rules (no base rules) over a random board.
pub fn random_genome<R: Reward, G: Rng + ?Sized>(
    tiles: &TileSet,
    side: usize,
    rules: usize,
    density: f64,
    episode_limit: u32,
    rng: &mut G,
) -> Result<EnvGenome<R>> {
    let map = random_board(tiles, side, side, density, rng)?;
    let rules = (0..rules).map(|i| random_rule(&format!("r{i}"), tiles, rng)).collect();
    EnvGenome::new(map, Ruleset::new(tiles.clone(), rules)?, episode_limit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maze_is_connected_and_bordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tiles = TileSet::default();
        let b = random_maze(&tiles, 16, 16, &mut rng).unwrap();
        assert_eq!(b.count(PLAYER), 1);
        assert_eq!(b.count(FOOD), 1);
        for i in 0..16 {
            assert!(b.get(0, i, WALL) && b.get(i, 0, WALL) && b.get(15, i, WALL));
        }
        // flood fill over non-wall cells reaches everything non-wall
        let open: Vec<(usize, usize)> = (0..16)
            .flat_map(|r| (0..16).map(move |c| (r, c)))
            .filter(|&(r, c)| !b.get(r, c, WALL))
            .collect();
        let mut seen = vec![open[0]];
        let mut stack = vec![open[0]];
        while let Some((r, c)) = stack.pop() {
            for (dr, dc) in [(0isize, 1isize), (1, 0), (0, -1), (-1, 0)] {
                let (nr, nc) = ((r as isize + dr) as usize, (c as isize + dc) as usize);
                if open.contains(&(nr, nc)) && !seen.contains(&(nr, nc)) {
                    seen.push((nr, nc));
                    stack.push((nr, nc));
                }
            }
        }
        assert_eq!(seen.len(), open.len());
    }

    #[test]
    fn random_genomes_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tiles = TileSet::default();
        for _ in 0..20 {
            let g: EnvGenome<f64> = random_genome(&tiles, 8, 6, 0.2, 20, &mut rng).unwrap();
            assert_eq!(g.init_map().count(PLAYER), 1);
        }
    }
}
