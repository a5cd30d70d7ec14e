use alloc::collections::{BinaryHeap, VecDeque};
use alloc::format;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::error::CoreError;
use crate::grid::{Cell, CellPath, WallMask};

fn check_endpoints(walls: &WallMask, start: Cell, goal: Cell) -> Result<(), CoreError> {
    for (name, cell) in [("start", start), ("goal", goal)] {
        if !walls.contains(cell) {
            return Err(CoreError::InvalidArgument(format!(
                "{name} ({}, {}) out of bounds",
                cell.row, cell.col
            )));
        }
        if walls.is_wall(cell) {
            return Err(CoreError::InvalidArgument(format!(
                "{name} ({}, {}) lies on a wall",
                cell.row, cell.col
            )));
        }
    }
    Ok(())
}

fn reconstruct(parent: &[Option<usize>], width: usize, goal_idx: usize) -> CellPath {
    let mut cells = Vec::new();
    let mut cur = goal_idx;
    loop {
        cells.push(Cell::new(cur / width, cur % width));
        match parent[cur] {
            Some(p) if p != cur => cur = p,
            _ => break,
        }
    }
    cells.reverse();
    CellPath::new(cells)
}

/// A* over the 4-connected grid with unit move cost and Manhattan heuristic.
///
/// Ties break on lower f, then lower g, then row-major cell order, so the
/// returned path is deterministic.
pub fn astar_shortest_path(
    walls: &WallMask,
    start: Cell,
    goal: Cell,
) -> Result<Option<CellPath>, CoreError> {
    check_endpoints(walls, start, goal)?;
    let w = walls.width();
    let n = walls.len();
    let idx = |c: Cell| c.row * w + c.col;

    let mut g_score = alloc::vec![usize::MAX; n];
    let mut parent: Vec<Option<usize>> = alloc::vec![None; n];
    let mut closed = alloc::vec![false; n];
    // Heap entries: Reverse((f, g, row_major_index)).
    let mut open = BinaryHeap::new();

    g_score[idx(start)] = 0;
    parent[idx(start)] = Some(idx(start));
    open.push(Reverse((start.manhattan(&goal), 0usize, idx(start))));

    while let Some(Reverse((_, g, cur_idx))) = open.pop() {
        if closed[cur_idx] || g > g_score[cur_idx] {
            continue;
        }
        closed[cur_idx] = true;
        let cur = Cell::new(cur_idx / w, cur_idx % w);
        if cur == goal {
            return Ok(Some(reconstruct(&parent, w, cur_idx)));
        }
        for next in walls.neighbors4(cur) {
            if walls.is_wall(next) || closed[idx(next)] {
                continue;
            }
            let tentative = g + 1;
            if tentative < g_score[idx(next)] {
                g_score[idx(next)] = tentative;
                parent[idx(next)] = Some(cur_idx);
                open.push(Reverse((tentative + next.manhattan(&goal), tentative, idx(next))));
            }
        }
    }
    Ok(None)
}

/// Breadth-first shortest path. Independent oracle for the A* implementation.
pub fn bfs_shortest_path(
    walls: &WallMask,
    start: Cell,
    goal: Cell,
) -> Result<Option<CellPath>, CoreError> {
    check_endpoints(walls, start, goal)?;
    let w = walls.width();
    let idx = |c: Cell| c.row * w + c.col;

    let mut parent: Vec<Option<usize>> = alloc::vec![None; walls.len()];
    let mut queue = VecDeque::new();
    parent[idx(start)] = Some(idx(start));
    queue.push_back(start);

    while let Some(cur) = queue.pop_front() {
        if cur == goal {
            return Ok(Some(reconstruct(&parent, w, idx(cur))));
        }
        for next in walls.neighbors4(cur) {
            if !walls.is_wall(next) && parent[idx(next)].is_none() {
                parent[idx(next)] = Some(idx(cur));
                queue.push_back(next);
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::generate_walls;

    #[test]
    fn empty_grid_manhattan_length() {
        let walls = WallMask::empty(5, 5);
        let path = astar_shortest_path(&walls, Cell::new(0, 0), Cell::new(0, 4))
            .unwrap()
            .unwrap();
        assert_eq!(path.edge_len(), 4);
        assert_eq!(path.cell_count(), 5);
    }

    #[test]
    fn start_equals_goal() {
        let walls = WallMask::empty(3, 3);
        let path = astar_shortest_path(&walls, Cell::new(1, 1), Cell::new(1, 1))
            .unwrap()
            .unwrap();
        assert_eq!(path.edge_len(), 0);
        assert_eq!(path.cell_count(), 1);
    }

    #[test]
    fn bfs_empty_grid_diagonal() {
        let walls = WallMask::empty(3, 3);
        let path = bfs_shortest_path(&walls, Cell::new(0, 0), Cell::new(2, 2))
            .unwrap()
            .unwrap();
        assert_eq!(path.edge_len(), 4);
    }

    #[test]
    fn walled_off_goal_is_unreachable() {
        let mut walls = WallMask::empty(4, 4);
        walls.set_wall(Cell::new(0, 1), true);
        walls.set_wall(Cell::new(1, 0), true);
        walls.set_wall(Cell::new(1, 1), true);
        assert!(bfs_shortest_path(&walls, Cell::new(3, 3), Cell::new(0, 0))
            .unwrap()
            .is_none());
        assert!(astar_shortest_path(&walls, Cell::new(3, 3), Cell::new(0, 0))
            .unwrap()
            .is_none());
    }

    #[test]
    fn wall_endpoint_is_an_error() {
        let mut walls = WallMask::empty(3, 3);
        walls.set_wall(Cell::new(0, 0), true);
        assert!(astar_shortest_path(&walls, Cell::new(0, 0), Cell::new(2, 2)).is_err());
        assert!(bfs_shortest_path(&walls, Cell::new(2, 2), Cell::new(0, 0)).is_err());
    }

    #[test]
    fn wall_gap_maze_matches_bfs_oracle() {
        // Horizontal wall across row 2 with a single gap at column 3.
        let mut walls = WallMask::empty(5, 5);
        for col in 0..5 {
            if col != 3 {
                walls.set_wall(Cell::new(2, col), true);
            }
        }
        let start = Cell::new(0, 0);
        let goal = Cell::new(4, 0);
        let a = astar_shortest_path(&walls, start, goal).unwrap().unwrap();
        let b = bfs_shortest_path(&walls, start, goal).unwrap().unwrap();
        assert_eq!(a.edge_len(), b.edge_len());
        assert_eq!(a.edge_len(), 10);
        assert!(a.is_valid_on(&walls));
    }

    #[test]
    fn random_mazes_cross_oracle() {
        let mut solved = 0;
        for seed in 0..500u64 {
            let walls = generate_walls(8, 8, 0.3, seed).unwrap();
            if walls.free_cells().len() < 2 {
                continue;
            }
            let (s, g) = crate::grid::sample_endpoints(&walls, seed ^ 0x9e37).unwrap();
            let a = astar_shortest_path(&walls, s, g).unwrap();
            let b = bfs_shortest_path(&walls, s, g).unwrap();
            match (a, b) {
                (Some(pa), Some(pb)) => {
                    assert_eq!(pa.edge_len(), pb.edge_len());
                    assert!(pa.is_valid_on(&walls));
                    assert!(pb.is_valid_on(&walls));
                    solved += 1;
                }
                (None, None) => {}
                _ => panic!("oracle disagreement on solvability, seed {seed}"),
            }
        }
        assert!(solved > 100);
    }
}
