mod common;

use common::{oracle_match_grid, oracle_step, oracle_variants, rng};
use rulegrid::generate::{random_board, random_genome};
use rulegrid::rules::{base_maze_ruleset, match_map, step_rules, Ruleset, DEFAULT_NOOP_RULES};
use rulegrid::tiles::{FLOOR, FORCE, PLAYER, WALL};
use rulegrid::{Board, Genome, TileSet};

#[test]
fn step_matches_naive_oracle_on_random_pairs() {
    let tiles = TileSet::default();
    let mut rng = rng(11);
    for i in 0..500 {
        let g: Genome = random_genome(&tiles, 16, 1 + i % 8, 0.25, 10, &mut rng).unwrap();
        let board = random_board(&tiles, 16, 16, 0.3, &mut rng).unwrap();
        let out = step_rules(&board, g.rules());
        let (want, reward, fires) = oracle_step(&board, g.rules());
        assert_eq!(out.next, want, "pair {i}");
        assert_eq!(out.reward, reward, "pair {i}");
        assert_eq!(out.fire_counts.iter().sum::<u32>(), fires, "pair {i}");
    }
}

#[test]
fn activation_maps_match_sliding_window() {
    let tiles = TileSet::default();
    let mut rng = rng(12);
    for _ in 0..200 {
        let g: Genome = random_genome(&tiles, 16, 4, 0.3, 10, &mut rng).unwrap();
        let board = random_board(&tiles, 16, 16, 0.35, &mut rng).unwrap();
        let mut compiled = g.rules().compiled().iter();
        for rule in g.rules().rules() {
            for (input, _) in oracle_variants(rule) {
                let cr = compiled.next().expect("same variant count as the oracle");
                assert_eq!(match_map(&board, cr), oracle_match_grid(&board, &input));
            }
        }
        assert!(compiled.next().is_none());
    }
}

#[test]
fn fire_counts_equal_activation_ones() {
    let tiles = TileSet::default();
    let mut rng = rng(13);
    for _ in 0..50 {
        let g: Genome = random_genome(&tiles, 12, 6, 0.3, 10, &mut rng).unwrap();
        let board = random_board(&tiles, 12, 12, 0.4, &mut rng).unwrap();
        let out = step_rules(&board, g.rules());
        for (cr, &n) in g.rules().compiled().iter().zip(&out.fire_counts) {
            assert_eq!(match_map(&board, cr).iter().map(|&b| b as u32).sum::<u32>(), n);
        }
    }
}

#[test]
fn outputs_stay_binary_and_pure() {
    let tiles = TileSet::default();
    let mut rng = rng(14);
    for _ in 0..50 {
        let g: Genome = random_genome(&tiles, 10, 8, 0.4, 10, &mut rng).unwrap();
        let board = random_board(&tiles, 10, 10, 0.5, &mut rng).unwrap();
        let a = step_rules(&board, g.rules());
        assert!(a.next.raw().iter().all(|&b| b <= 1));
        assert_eq!(a, step_rules(&board, g.rules()));
    }
}

#[test]
fn bump_against_wall_matches_oracle() {
    let tiles = TileSet::default();
    let rules: Ruleset<f64> = base_maze_ruleset(&tiles, DEFAULT_NOOP_RULES).unwrap();
    let mut board = Board::new(3, 3, tiles.len()).unwrap();
    board.set(1, 1, PLAYER, true);
    board.set(0, 1, WALL, true);
    board.set(0, 1, FORCE, true);
    board.set(2, 1, FLOOR, true);
    let out = step_rules(&board, &rules);
    assert_eq!(out.next, oracle_step(&board, &rules).0);
    assert_eq!(out.next.first_active(PLAYER), Some((1, 1)));
    assert_eq!(out.next.count(FORCE), 0);
    assert!(out.next.get(0, 1, WALL));
}
