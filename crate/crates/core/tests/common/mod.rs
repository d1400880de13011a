//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::VecDeque;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rulegrid::rules::{RewriteRule, Ruleset};
use rulegrid::sim::{reset, step};
use rulegrid::tiles::{FLOOR, FOOD, PLAYER, WALL};
use rulegrid::{Action, Board, EnvGenome, Pattern, Reward, StateKey};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_actions<G: Rng>(n: usize, rng: &mut G) -> Vec<Action> {
    (0..n).map(|_| *Action::ALL.choose(rng).unwrap()).collect()
}

/// Quarter turn clockwise, written out cell by cell.
fn turn(p: &Pattern) -> Pattern {
    let mut out = Pattern::empty(p.cols(), p.rows()).unwrap();
    for r in 0..p.rows() {
        for c in 0..p.cols() {
            // (r, c) moves to (c, rows - 1 - r)
            out.set(c, p.rows() - 1 - r, p.get(r, c));
        }
    }
    out
}

/// Distinct (input, output) orientations of a rule.
pub fn oracle_variants<R: Reward>(rule: &RewriteRule<R>) -> Vec<(Pattern, Pattern)> {
    let mut variants = vec![(rule.input.clone(), rule.output.clone())];
    if rule.rotate {
        for _ in 0..3 {
            let (i, o) = variants.last().unwrap();
            let next = (turn(i), turn(o));
            if !variants.contains(&next) {
                variants.push(next);
            }
        }
    }
    variants
}

fn patch_matches(board: &Board, input: &Pattern, r0: usize, c0: usize) -> bool {
    let mut required = 0;
    for r in 0..input.rows() {
        for c in 0..input.cols() {
            let want = input.get(r, c);
            required += want.count_ones();
            if board.cell(r0 + r, c0 + c) & want != want {
                return false;
            }
        }
    }
    required > 0
}

/// Sliding-window match positions of one rule variant, as an `H × W`
/// indicator grid keyed by the patch's top-left cell.
pub fn oracle_match_grid(board: &Board, input: &Pattern) -> Vec<u8> {
    let (h, w) = (board.height(), board.width());
    let mut grid = vec![0u8; h * w];
    if input.rows() > h || input.cols() > w {
        return grid;
    }
    for r in 0..=h - input.rows() {
        for c in 0..=w - input.cols() {
            grid[r * w + c] = u8::from(patch_matches(board, input, r, c));
        }
    }
    grid
}

/// Naive tick: find every match on the old board, add up per-bit changes
/// `out - in`, clamp to {0, 1}.
pub fn oracle_step<R: Reward>(board: &Board, rules: &Ruleset<R>) -> (Board, R, u32) {
    let (h, w, ch) = (board.height(), board.width(), board.channels());
    let mut delta = vec![0i32; h * w * ch];
    let mut reward = R::zero();
    let mut fires = 0;
    for rule in rules.rules() {
        for (input, output) in oracle_variants(rule) {
            let grid = oracle_match_grid(board, &input);
            for (i, &hit) in grid.iter().enumerate() {
                if hit == 0 {
                    continue;
                }
                fires += 1;
                reward = reward + rule.reward;
                let (r0, c0) = (i / w, i % w);
                for r in 0..input.rows() {
                    for c in 0..input.cols() {
                        for t in 0..ch {
                            let had = (input.get(r, c) >> t) & 1;
                            let gets = (output.get(r, c) >> t) & 1;
                            delta[((r0 + r) * w + c0 + c) * ch + t] += gets as i32 - had as i32;
                        }
                    }
                }
            }
        }
    }
    let mut next = board.clone();
    for r in 0..h {
        for c in 0..w {
            for t in 0..ch {
                let v = board.get(r, c, t) as i32 + delta[(r * w + c) * ch + t];
                next.set(r, c, t, v > 0);
            }
        }
    }
    (next, reward, fires)
}

/// Shortest action count from the start of a base-rules maze to the food,
/// by breadth-first search over (cell, heading). Walls block, floor and the
/// start cell are walkable. `None` when the food is unreachable.
pub fn maze_shortest_actions(map: &Board) -> Option<usize> {
    let (h, w) = (map.height() as isize, map.width() as isize);
    let start = map.first_active(PLAYER)?;
    let goal = map.first_active(FOOD)?;
    let walkable = |r: isize, c: isize| {
        r >= 0 && c >= 0 && r < h && c < w && {
            let (r, c) = (r as usize, c as usize);
            (map.get(r, c, FLOOR) || (r, c) == start || (r, c) == goal) && !map.get(r, c, WALL)
        }
    };
    // heading 0 = north, clockwise
    let dirs = [(-1isize, 0isize), (0, 1), (1, 0), (0, -1)];
    let idx = |r: usize, c: usize, d: usize| (r * w as usize + c) * 4 + d;
    let mut dist = vec![usize::MAX; (h * w * 4) as usize];
    let mut queue = VecDeque::new();
    dist[idx(start.0, start.1, 0)] = 0;
    queue.push_back((start.0, start.1, 0usize));
    while let Some((r, c, d)) = queue.pop_front() {
        let here = dist[idx(r, c, d)];
        if (r, c) == goal {
            return Some(here);
        }
        let (nr, nc) = (r as isize + dirs[d].0, c as isize + dirs[d].1);
        let forward = if walkable(nr, nc) { (nr as usize, nc as usize, d) } else { (r, c, d) };
        for (nr, nc, nd) in [(r, c, (d + 3) % 4), (r, c, (d + 1) % 4), forward] {
            if dist[idx(nr, nc, nd)] == usize::MAX {
                dist[idx(nr, nc, nd)] = here + 1;
                queue.push_back((nr, nc, nd));
            }
        }
    }
    None
}

/// Best total reward over every action sequence of the genome's full
/// episode, enumerated exhaustively. Only feasible for tiny limits.
pub fn exhaustive_best_reward<R: Reward>(g: &EnvGenome<R>) -> R {
    fn go<R: Reward>(g: &EnvGenome<R>, state: &rulegrid::GameState<R>, best: &mut R) {
        if state.total_reward.total_cmp(best).is_gt() {
            *best = state.total_reward;
        }
        if state.done {
            return;
        }
        for a in Action::ALL {
            go(g, &step(state, a, g).unwrap().0, best);
        }
    }
    let mut best = R::zero();
    go(g, &reset(g), &mut best);
    best
}

/// Reference best-first search built from plain vectors and linear scans,
/// following the same ordering and pruning policy as the library.
/// Returns (best reward, best path length, fitness, expansions).
pub fn naive_search<R: Reward>(g: &EnvGenome<R>, budget: u64) -> (R, usize, u64, u64) {
    struct N<R> {
        state: rulegrid::GameState<R>,
        depth: usize,
        seq: u64,
        alive: bool,
    }
    let root = reset(g);
    let mut nodes: Vec<N<R>> = Vec::new();
    let mut front: Vec<(StateKey, usize, R, usize)> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    if !root.done {
        front.push((root.key(), 0, R::zero(), 0));
        open.push(0);
    }
    nodes.push(N { state: root, depth: 0, seq: 0, alive: true });
    let mut seq = 1;
    let (mut best_r, mut best_d, mut fitness, mut expanded) = (R::zero(), 0usize, 0u64, 0u64);
    while expanded < budget && !open.is_empty() {
        // highest reward, then shallowest, then oldest
        let mut pick = 0;
        for i in 1..open.len() {
            let (a, b) = (&nodes[open[i]], &nodes[open[pick]]);
            let ord = a
                .state
                .total_reward
                .total_cmp(&b.state.total_reward)
                .then(b.depth.cmp(&a.depth))
                .then(b.seq.cmp(&a.seq));
            if ord.is_gt() {
                pick = i;
            }
        }
        let id = open.remove(pick);
        if !nodes[id].alive {
            continue;
        }
        expanded += 1;
        let parent = nodes[id].state.clone();
        let depth = nodes[id].depth + 1;
        for a in Action::ALL {
            let child = step(&parent, a, g).unwrap().0;
            let r = child.total_reward;
            let better = r.total_cmp(&best_r).is_gt() || (r.total_cmp(&best_r).is_eq() && depth < best_d);
            if child.done {
                if better {
                    (best_r, best_d, fitness) = (r, depth, expanded);
                }
                continue;
            }
            let key = child.key();
            if front.iter().any(|(k, d, fr, _)| *k == key && *d <= depth && !fr.total_cmp(&r).is_lt()) {
                continue;
            }
            for entry in front.iter().filter(|(k, d, fr, _)| *k == key && depth <= *d && !r.total_cmp(fr).is_lt()) {
                nodes[entry.3].alive = false;
            }
            front.retain(|(k, d, fr, _)| !(*k == key && depth <= *d && !r.total_cmp(fr).is_lt()));
            let nid = nodes.len();
            nodes.push(N { state: child, depth, seq, alive: true });
            seq += 1;
            front.push((key, depth, r, nid));
            open.push(nid);
            if better {
                (best_r, best_d, fitness) = (r, depth, expanded);
            }
        }
    }
    (best_r, best_d, fitness, expanded)
}
