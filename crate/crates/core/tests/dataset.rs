mod common;

use common::rng;
use rulegrid::dataset::{build_pairs, export, ExportOptions, ObsFile};
use rulegrid::evolve::evaluate;
use rulegrid::generate::{base_maze_genome, random_genome};
use rulegrid::sim::{observe, reset, step};
use rulegrid::{Genome, Record, TileSet};

fn records(n: usize) -> Vec<Record> {
    let mut rng = rng(61);
    (0..n)
        .map(|i| {
            let g: Genome = if i % 2 == 0 {
                base_maze_genome(9, &mut rng).unwrap()
            } else {
                random_genome(&TileSet::default(), 8, 5, 0.2, 30, &mut rng).unwrap()
            };
            evaluate(&g, 300).unwrap().record
        })
        .collect()
}

#[test]
fn pairs_follow_replay() {
    for rec in records(6) {
        let g = rec.genome().unwrap();
        let pairs = build_pairs(&rec, 7, true).unwrap();
        assert_eq!(pairs.len(), rec.actions.len());
        let mut s = reset(&g);
        for ((obs, a), &want) in pairs.iter().zip(&rec.actions) {
            assert_eq!(*a, want);
            assert_eq!(*obs, observe(&s, &g, 7, true).unwrap());
            s = step(&s, want, &g).unwrap().0;
        }
        assert_eq!(s.total_reward, rec.reward);
    }
}

#[test]
fn export_files_decode_to_observations() {
    let recs = records(8);
    let dir = tempfile::tempdir().unwrap();
    let opts = ExportOptions { window: 5, show_rules: false, test_fraction: 0.25, seed: 1 };
    let summary = export(&recs, dir.path(), &opts).unwrap();
    assert_eq!((summary.train, summary.test), (6, 2));
    let index = std::fs::read_to_string(dir.path().join("index.tsv")).unwrap();
    assert_eq!(index.lines().count(), 9);
    for rec in &recs {
        let id = rec.genome_id.to_string();
        let file = ObsFile::decode(&std::fs::read(dir.path().join(format!("{id}.obs"))).unwrap()).unwrap();
        let acts = std::fs::read(dir.path().join(format!("{id}.act"))).unwrap();
        let pairs = build_pairs(rec, 5, false).unwrap();
        assert_eq!(file.observations.len(), pairs.len());
        assert_eq!(acts.len(), pairs.len());
        for (i, (obs, a)) in pairs.iter().enumerate() {
            assert_eq!(file.bits(i), obs.bits().collect::<Vec<_>>());
            assert_eq!(acts[i], a.code());
        }
        assert!(!file.show_rules);
    }
}

#[test]
fn hidden_rules_are_zero() {
    let rec = &records(2)[1];
    for (obs, _) in build_pairs(rec, 3, false).unwrap() {
        assert!(obs.rule_encoding.iter().all(|&b| b == 0));
    }
}

#[test]
fn pairs_are_reproducible() {
    let rec = &records(1)[0];
    let a = build_pairs(rec, 9, true).unwrap();
    let b = build_pairs(rec, 9, true).unwrap();
    let bytes = |p: &[(rulegrid::sim::Observation, rulegrid::Action)]| p.iter().map(|(o, _)| o.to_packed()).collect::<Vec<_>>();
    assert_eq!(bytes(&a), bytes(&b));
    let mut empty = rec.clone();
    empty.actions.clear();
    assert!(build_pairs(&empty, 9, true).unwrap().is_empty());
}
