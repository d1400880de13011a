//! Budget-capped greedy best-first search over action sequences.
//!
//! The frontier pops the node with the highest accumulated reward, then the
//! shallowest, then the earliest inserted. Every expansion applies all three
//! actions. Children are deduplicated by [`StateKey`]: a child is pruned when
//! a recorded node with the same key is at most as deep and has at least
//! its reward. Otherwise it is kept, and any recorded nodes it dominates
//! are retired (their queue entries are skipped when popped). Terminal
//! children are scored but never queued.
//!
//! Fitness is the number of expansions performed when the eventually-best
//! node was generated.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::dataset::TrajectoryRecord;
use crate::dsl::EnvGenome;
use crate::error::{Error, Result};
use crate::geometry::Action;
use crate::rules::StepScratch;
use crate::scalar::Reward;
use crate::sim::{reset, step_with};
use crate::state::{GameState, StateKey};

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult<R> {
    pub best_actions: Vec<Action>,
    pub best_reward: R,
    /// Expansions done when the best node was generated.
    pub fitness: u64,
    pub expanded: u64,
    pub frontier_exhausted: bool,
    pub budget: u64,
}

struct Node<R> {
    state: Option<GameState<R>>,
    key: StateKey,
    parent: Option<usize>,
    action: Option<Action>,
    depth: u32,
}

#[derive(Clone, Copy)]
struct Record<R> {
    depth: u32,
    reward: R,
    node: usize,
}

struct Entry<R> {
    reward: R,
    depth: u32,
    seq: u64,
    node: usize,
}

impl<R: Reward> Ord for Entry<R> {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap: higher reward, then shallower, then older
        self.reward
            .total_cmp(&other.reward)
            .then_with(|| other.depth.cmp(&self.depth))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl<R: Reward> PartialOrd for Entry<R> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<R: Reward> PartialEq for Entry<R> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<R: Reward> Eq for Entry<R> {}

fn path<R>(nodes: &[Node<R>], mut id: usize) -> Vec<Action> {
    let mut actions = Vec::with_capacity(nodes[id].depth as usize);
    while let Some(a) = nodes[id].action {
        actions.push(a);
        id = nodes[id].parent.expect("non-root node has a parent");
    }
    actions.reverse();
    actions
}

pub fn best_first_search<R: Reward>(g: &EnvGenome<R>, budget: u64) -> Result<SearchResult<R>> {
    if budget == 0 {
        return Err(Error::Contract("search budget must be at least 1".into()));
    }
    let mut scratch = StepScratch::default();
    let root = reset(g);
    let root_key = root.key();
    let root_done = root.done;
    let mut nodes = vec![Node { state: Some(root), key: root_key, parent: None, action: None, depth: 0 }];
    let mut seen: HashMap<StateKey, Vec<Record<R>>> = HashMap::new();
    let mut frontier = BinaryHeap::new();
    let mut seq = 0u64;
    if !root_done {
        seen.insert(root_key, vec![Record { depth: 0, reward: R::zero(), node: 0 }]);
        frontier.push(Entry { reward: R::zero(), depth: 0, seq, node: 0 });
        seq += 1;
    }

    let (mut best_node, mut best_reward, mut best_depth) = (0usize, R::zero(), 0u32);
    let mut fitness = 0u64;
    let mut expanded = 0u64;
    let mut exhausted = false;

    while expanded < budget {
        let Some(entry) = frontier.pop() else {
            exhausted = true;
            break;
        };
        let id = entry.node;
        let live = seen
            .get(&nodes[id].key)
            .is_some_and(|front| front.iter().any(|r| r.node == id));
        if !live {
            continue;
        }
        expanded += 1;
        let state = nodes[id].state.take().expect("queued node keeps its state");
        let depth = nodes[id].depth + 1;
        for action in Action::ALL {
            let (child, _) = step_with(&state, action, g, &mut scratch)?;
            let reward = child.total_reward;
            let improves = match reward.total_cmp(&best_reward) {
                Ordering::Greater => true,
                Ordering::Equal => depth < best_depth,
                Ordering::Less => false,
            };
            if child.done {
                if improves {
                    nodes.push(Node { state: None, key: child.key(), parent: Some(id), action: Some(action), depth });
                    (best_node, best_reward, best_depth, fitness) = (nodes.len() - 1, reward, depth, expanded);
                }
                continue;
            }
            let key = child.key();
            let front = seen.entry(key).or_default();
            let dominated = front
                .iter()
                .any(|r| r.depth <= depth && r.reward.total_cmp(&reward) != Ordering::Less);
            if dominated {
                continue;
            }
            front.retain(|r| !(depth <= r.depth && reward.total_cmp(&r.reward) != Ordering::Less));
            let node = nodes.len();
            front.push(Record { depth, reward, node });
            nodes.push(Node { state: Some(child), key, parent: Some(id), action: Some(action), depth });
            frontier.push(Entry { reward, depth, seq, node });
            seq += 1;
            if improves {
                (best_node, best_reward, best_depth, fitness) = (node, reward, depth, expanded);
            }
        }
    }
    if frontier.is_empty() {
        exhausted = true;
    }

    Ok(SearchResult {
        best_actions: path(&nodes, best_node),
        best_reward,
        fitness,
        expanded,
        frontier_exhausted: exhausted,
        budget,
    })
}

/// Package a search result as an archive record (generation 0).
pub fn extract_trajectory<R: Reward>(result: &SearchResult<R>, g: &EnvGenome<R>) -> TrajectoryRecord<R> {
    TrajectoryRecord {
        genome_id: g.id(),
        genome_text: g.to_text(),
        actions: result.best_actions.clone(),
        reward: result.best_reward,
        fitness: result.fitness,
        budget: result.budget,
        generation: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::board::Board;
    use crate::rules::{base_maze_ruleset, DEFAULT_NOOP_RULES};
    use crate::sim::rollout;
    use crate::tiles::{TileSet, FLOOR, FOOD, PLAYER, WALL};

    fn corridor(len: usize) -> EnvGenome<f64> {
        let tiles = TileSet::default();
        let mut map = Board::new(3, len + 3, tiles.len()).unwrap();
        for c in 0..len + 3 {
            map.set(0, c, WALL, true);
            map.set(2, c, WALL, true);
        }
        map.set(1, 0, WALL, true);
        map.set(1, len + 2, WALL, true);
        for c in 2..len + 1 {
            map.set(1, c, FLOOR, true);
        }
        map.set(1, 1, PLAYER, true);
        map.set(1, len + 1, FOOD, true);
        EnvGenome::new(map, base_maze_ruleset(&tiles, DEFAULT_NOOP_RULES).unwrap(), 102).unwrap()
    }

    #[test]
    fn corridor_solution_is_shortest() {
        // facing north: one right turn, then `len` steps east onto the food
        let g = corridor(4);
        let res = best_first_search(&g, 1000).unwrap();
        assert_eq!(res.best_reward, 1.0);
        assert_eq!(res.best_actions.len(), 5);
        assert_eq!(res.best_actions[0], Action::RotateRight);
        assert_eq!(rollout(&g, &res.best_actions).total_reward(), 1.0);
        assert!(res.fitness > 0 && res.fitness <= res.expanded && res.expanded <= res.budget);
    }

    #[test]
    fn rewardless_genome_has_zero_fitness() {
        let g = corridor(4);
        let mut map = g.init_map().clone();
        map.clear_channel(FOOD);
        let g = EnvGenome::new(map, g.rules().clone(), 102).unwrap();
        let res = best_first_search(&g, 500).unwrap();
        assert_eq!(res.best_reward, 0.0);
        assert_eq!(res.fitness, 0);
        assert!(res.best_actions.is_empty());
        // a closed corridor has finitely many states
        assert!(res.frontier_exhausted);
    }

    #[test]
    fn zero_budget_rejected() {
        assert!(best_first_search(&corridor(2), 0).is_err());
    }

    #[test]
    fn budget_caps_expansions() {
        let g = corridor(6);
        let res = best_first_search(&g, 3).unwrap();
        assert_eq!(res.expanded, 3);
        assert!(!res.frontier_exhausted);
        assert_eq!(res.best_reward, 0.0);
    }

    #[test]
    fn records_replay() {
        let g = corridor(3);
        let rec = extract_trajectory(&best_first_search(&g, 300).unwrap(), &g);
        assert_eq!(rec.genome_id, g.id());
        assert_eq!(rec.replay_reward().unwrap(), rec.reward);
        assert_eq!(rec.budget, 300);

        let mut map = g.init_map().clone();
        map.clear_channel(FOOD);
        let flat = EnvGenome::new(map, g.rules().clone(), 102).unwrap();
        let rec = extract_trajectory(&best_first_search(&flat, 50).unwrap(), &flat);
        assert!(rec.actions.is_empty());
        assert_eq!(rec.reward, 0.0);
        assert_eq!(rec.replay_reward().unwrap(), 0.0);
    }

    #[test]
    fn deterministic() {
        let g = corridor(5);
        assert_eq!(best_first_search(&g, 200).unwrap(), best_first_search(&g, 200).unwrap());
    }
}
