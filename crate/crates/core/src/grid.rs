use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CoreError;

/// A grid coordinate, row-major, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }

    /// Manhattan distance to another cell.
    pub fn manhattan(&self, other: &Cell) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

/// Binary obstacle map; `true` means wall.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WallMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl WallMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self, CoreError> {
        if height == 0 || width == 0 {
            return Err(CoreError::InvalidArgument(format!(
                "grid dimensions must be positive, got {height}x{width}"
            )));
        }
        if bits.len() != height * width {
            return Err(CoreError::InvalidArgument(format!(
                "wall storage length {} != {height}*{width}",
                bits.len()
            )));
        }
        Ok(WallMask { height, width, bits })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        WallMask {
            height,
            width,
            bits: alloc::vec![false; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&b| !b)
    }

    pub fn is_wall(&self, cell: Cell) -> bool {
        debug_assert!(cell.row < self.height && cell.col < self.width);
        self.bits[cell.row * self.width + cell.col]
    }

    pub fn set_wall(&mut self, cell: Cell, wall: bool) {
        self.bits[cell.row * self.width + cell.col] = wall;
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn wall_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Row-major indices of all free cells.
    pub fn free_cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for row in 0..self.height {
            for col in 0..self.width {
                let c = Cell::new(row, col);
                if !self.is_wall(c) {
                    out.push(c);
                }
            }
        }
        out
    }

    /// In-bounds 4-neighbors of a cell, in N, S, W, E order.
    pub fn neighbors4(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        let (r, c) = (cell.row as isize, cell.col as isize);
        [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
            .into_iter()
            .filter_map(move |(nr, nc)| {
                if nr >= 0 && nc >= 0 && (nr as usize) < self.height && (nc as usize) < self.width {
                    Some(Cell::new(nr as usize, nc as usize))
                } else {
                    None
                }
            })
    }
}

/// An ordered sequence of 4-adjacent, wall-free, non-repeating cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellPath {
    cells: Vec<Cell>,
}

impl CellPath {
    pub fn new(cells: Vec<Cell>) -> Self {
        CellPath { cells }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Path length in edges (cell count minus one).
    pub fn edge_len(&self) -> usize {
        self.cells.len().saturating_sub(1)
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Checks 4-adjacency of consecutive cells, wall-freedom, and no repeats.
    pub fn is_valid_on(&self, walls: &WallMask) -> bool {
        if self.cells.is_empty() {
            return false;
        }
        for (i, cell) in self.cells.iter().enumerate() {
            if !walls.contains(*cell) || walls.is_wall(*cell) {
                return false;
            }
            if i > 0 && self.cells[i - 1].manhattan(cell) != 1 {
                return false;
            }
            if self.cells[..i].contains(cell) {
                return false;
            }
        }
        true
    }
}

/// Draws an i.i.d. wall layout: each cell is a wall with probability `wall_prob`.
pub fn generate_walls(
    height: usize,
    width: usize,
    wall_prob: f64,
    seed: u64,
) -> Result<WallMask, CoreError> {
    if !(0.0..=1.0).contains(&wall_prob) || !wall_prob.is_finite() {
        return Err(CoreError::InvalidArgument(format!(
            "wall probability must lie in [0,1], got {wall_prob}"
        )));
    }
    if height < 2 || width < 2 {
        return Err(CoreError::InvalidArgument(format!(
            "grid must be at least 2x2, got {height}x{width}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits = (0..height * width)
        .map(|_| rng.gen::<f64>() < wall_prob)
        .collect();
    WallMask::new(height, width, bits)
}

/// Picks distinct start and goal cells uniformly over free-cell pairs.
pub fn sample_endpoints(walls: &WallMask, seed: u64) -> Result<(Cell, Cell), CoreError> {
    let free = walls.free_cells();
    if free.len() < 2 {
        return Err(CoreError::Infeasible(format!(
            "need at least 2 free cells, found {}",
            free.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let i = rng.gen_range(0..free.len());
    let mut j = rng.gen_range(0..free.len() - 1);
    if j >= i {
        j += 1;
    }
    Ok((free[i], free[j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_probability_forces_no_walls() {
        let walls = generate_walls(4, 4, 0.0, 7).unwrap();
        assert_eq!(walls.wall_count(), 0);
    }

    #[test]
    fn unit_probability_forces_all_walls() {
        let walls = generate_walls(4, 4, 1.0, 7).unwrap();
        assert_eq!(walls.wall_count(), 16);
    }

    #[test]
    fn wall_frequency_tracks_probability() {
        // Monte Carlo over seeds: mean wall count within [0.18, 0.22] * 64.
        let mut total = 0usize;
        for seed in 0..1000 {
            total += generate_walls(8, 8, 0.2, seed).unwrap().wall_count();
        }
        let mean = total as f64 / 1000.0;
        assert!((0.18 * 64.0..=0.22 * 64.0).contains(&mean), "mean {mean}");
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(generate_walls(4, 4, 1.5, 0).is_err());
        assert!(generate_walls(1, 4, 0.2, 0).is_err());
    }

    #[test]
    fn endpoints_are_distinct_and_free() {
        let walls = generate_walls(6, 6, 0.0, 3).unwrap();
        for seed in 0..100 {
            let (s, g) = sample_endpoints(&walls, seed).unwrap();
            assert_ne!(s, g);
            assert!(!walls.is_wall(s) && !walls.is_wall(g));
        }
    }

    #[test]
    fn endpoints_forced_with_two_free_cells() {
        let mut bits = alloc::vec![true; 16];
        bits[3] = false;
        bits[9] = false;
        let walls = WallMask::new(4, 4, bits).unwrap();
        let (s, g) = sample_endpoints(&walls, 11).unwrap();
        let expect = [Cell::new(0, 3), Cell::new(2, 1)];
        assert!(expect.contains(&s) && expect.contains(&g) && s != g);
    }

    #[test]
    fn endpoints_deterministic_per_seed() {
        let walls = generate_walls(8, 8, 0.3, 42).unwrap();
        assert_eq!(
            sample_endpoints(&walls, 5).unwrap(),
            sample_endpoints(&walls, 5).unwrap()
        );
    }

    #[test]
    fn too_few_free_cells_is_infeasible() {
        let walls = generate_walls(4, 4, 1.0, 0).unwrap();
        assert!(matches!(
            sample_endpoints(&walls, 0),
            Err(CoreError::Infeasible(_))
        ));
    }
}
