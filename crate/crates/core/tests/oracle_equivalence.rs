//! Cross-oracle checks: A* against BFS, and the validity metric against an
//! independent flood-fill oracle.

use genplanner_core::{
    astar_shortest_path, bfs_shortest_path, generate_instance, generate_walls, validity, Cell,
    DatasetConfig, MazeInstance, PathMask, WallMask,
};

/// Recursive flood fill over mask ∩ free cells. Written independently of the
/// metric implementation (different traversal, different bookkeeping).
fn flood_reaches(mask: &PathMask, walls: &WallMask, from: Cell, to: Cell) -> bool {
    fn go(
        mask: &PathMask,
        walls: &WallMask,
        seen: &mut Vec<bool>,
        cur: Cell,
        to: Cell,
    ) -> bool {
        if cur == to {
            return true;
        }
        let w = walls.width();
        seen[cur.row * w + cur.col] = true;
        let (r, c) = (cur.row as isize, cur.col as isize);
        for (nr, nc) in [(r + 1, c), (r, c + 1), (r - 1, c), (r, c - 1)] {
            if nr < 0 || nc < 0 || nr as usize >= walls.height() || nc as usize >= walls.width() {
                continue;
            }
            let next = Cell::new(nr as usize, nc as usize);
            if !seen[next.row * w + next.col]
                && mask.contains(next)
                && !walls.is_wall(next)
                && go(mask, walls, seen, next, to)
            {
                return true;
            }
        }
        false
    }
    if !mask.contains(from) || !mask.contains(to) || walls.is_wall(from) || walls.is_wall(to) {
        return false;
    }
    let mut seen = vec![false; walls.len()];
    go(mask, walls, &mut seen, from, to)
}

fn fixed_3x3_instance() -> MazeInstance {
    // One wall at (1,1); start (0,0), goal (2,2).
    let mut walls = WallMask::empty(3, 3);
    walls.set_wall(Cell::new(1, 1), true);
    let path = astar_shortest_path(&walls, Cell::new(0, 0), Cell::new(2, 2))
        .unwrap()
        .unwrap();
    MazeInstance {
        walls,
        start: Cell::new(0, 0),
        goal: Cell::new(2, 2),
        path,
    }
}

#[test]
fn validity_matches_flood_fill_on_all_3x3_masks() {
    let inst = fixed_3x3_instance();
    for code in 0u16..512 {
        let bits: Vec<bool> = (0..9).map(|i| code >> i & 1 == 1).collect();
        let mask = PathMask::new(3, 3, bits);
        let expect = flood_reaches(&mask, &inst.walls, inst.start, inst.goal);
        assert_eq!(validity(&mask, &inst), expect, "mask code {code}");
    }
}

#[test]
fn validity_matches_flood_fill_on_random_8x8_masks() {
    use rand::{Rng, SeedableRng};
    let cfg = DatasetConfig {
        grid_size: 8,
        train_count: 1,
        eval_count: 0,
        min_path_len: 3,
        wall_prob: 0.2,
        seed: 0,
    };
    let instances: Vec<MazeInstance> = (0..100u64)
        .filter_map(|s| generate_instance(&cfg, s).unwrap())
        .take(10)
        .collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for trial in 0..10_000 {
        let inst = &instances[trial % instances.len()];
        // A mix of sparse and dense random masks.
        let p = [0.1, 0.3, 0.5, 0.8][trial % 4];
        let bits: Vec<bool> = (0..64).map(|_| rng.gen::<f64>() < p).collect();
        let mask = PathMask::new(8, 8, bits);
        let expect = flood_reaches(&mask, &inst.walls, inst.start, inst.goal);
        assert_eq!(validity(&mask, inst), expect, "trial {trial}");
    }
}

/// All 4x4 wall layouts with at most 6 walls, every free ordered pair as
/// endpoints: A* edge length must equal BFS edge length, and both must agree
/// on solvability.
#[test]
fn astar_equals_bfs_exhaustive_4x4() {
    let mut checked = 0u64;
    for code in 0u32..(1 << 16) {
        if code.count_ones() > 6 {
            continue;
        }
        let bits: Vec<bool> = (0..16).map(|i| code >> i & 1 == 1).collect();
        let walls = WallMask::new(4, 4, bits).unwrap();
        let free = walls.free_cells();
        for (i, &s) in free.iter().enumerate() {
            for &g in free.iter().skip(i + 1) {
                let a = astar_shortest_path(&walls, s, g).unwrap();
                let b = bfs_shortest_path(&walls, s, g).unwrap();
                match (a, b) {
                    (Some(pa), Some(pb)) => {
                        assert_eq!(pa.edge_len(), pb.edge_len());
                        assert!(pa.is_valid_on(&walls));
                    }
                    (None, None) => {}
                    _ => panic!("solvability disagreement, code {code}"),
                }
                checked += 1;
            }
        }
    }
    assert!(checked > 500_000, "checked {checked} pairs");
}

#[test]
fn astar_equals_bfs_random_8x8() {
    for seed in 0..500u64 {
        let walls = generate_walls(8, 8, 0.25, seed).unwrap();
        let free = walls.free_cells();
        if free.len() < 2 {
            continue;
        }
        let (s, g) = genplanner_core::sample_endpoints(&walls, seed.wrapping_mul(31)).unwrap();
        let a = astar_shortest_path(&walls, s, g).unwrap();
        let b = bfs_shortest_path(&walls, s, g).unwrap();
        assert_eq!(a.map(|p| p.edge_len()), b.map(|p| p.edge_len()));
    }
}
