use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CoreError;
use crate::grid::{generate_walls, sample_endpoints, Cell, CellPath, WallMask};
use crate::search::astar_shortest_path;

/// One accepted dataset sample: maze layout, endpoints, and the stored
/// ground-truth shortest path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MazeInstance {
    pub walls: WallMask,
    pub start: Cell,
    pub goal: Cell,
    pub path: CellPath,
}

impl MazeInstance {
    pub fn height(&self) -> usize {
        self.walls.height()
    }

    pub fn width(&self) -> usize {
        self.walls.width()
    }

    /// Row-major boolean mask of ground-truth path cells.
    pub fn path_mask_bits(&self) -> Vec<bool> {
        let mut bits = alloc::vec![false; self.walls.len()];
        for cell in self.path.cells() {
            bits[cell.row * self.walls.width() + cell.col] = true;
        }
        bits
    }

    /// Checks the stored-instance invariants: endpoints on the path, path
    /// wall-free, 4-connected, and cycle-free.
    pub fn validate(&self) -> Result<(), CoreError> {
        let cells = self.path.cells();
        if cells.first() != Some(&self.start) || cells.last() != Some(&self.goal) {
            return Err(CoreError::InvalidArgument(
                "stored path does not join start and goal".into(),
            ));
        }
        if !self.path.is_valid_on(&self.walls) {
            return Err(CoreError::InvalidArgument(
                "stored path is not a simple wall-free 4-connected path".into(),
            ));
        }
        Ok(())
    }
}

/// Parameters of one dataset build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetConfig {
    pub grid_size: usize,
    pub train_count: usize,
    pub eval_count: usize,
    pub min_path_len: usize,
    pub wall_prob: f64,
    pub seed: u64,
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.grid_size < 2 {
            return Err(CoreError::InvalidArgument(format!(
                "grid size must be >= 2, got {}",
                self.grid_size
            )));
        }
        if self.train_count == 0 && self.eval_count == 0 {
            return Err(CoreError::InvalidArgument(
                "dataset must hold at least one sample".into(),
            ));
        }
        if self.min_path_len == 0 {
            return Err(CoreError::InvalidArgument(
                "min_path_len must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.wall_prob) {
            return Err(CoreError::InvalidArgument(format!(
                "wall probability must lie in [0,1], got {}",
                self.wall_prob
            )));
        }
        Ok(())
    }
}

/// Attempts one instance draw. Returns `None` when the draw is rejected:
/// too few free cells, disconnected endpoints, or a path shorter than
/// `min_path_len` edges.
pub fn generate_instance(
    config: &DatasetConfig,
    instance_seed: u64,
) -> Result<Option<MazeInstance>, CoreError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
    let walls_seed: u64 = rng.gen();
    let endpoint_seed: u64 = rng.gen();

    let walls = generate_walls(config.grid_size, config.grid_size, config.wall_prob, walls_seed)?;
    let (start, goal) = match sample_endpoints(&walls, endpoint_seed) {
        Ok(pair) => pair,
        Err(CoreError::Infeasible(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let path = match astar_shortest_path(&walls, start, goal)? {
        Some(p) => p,
        None => return Ok(None),
    };
    if path.edge_len() < config.min_path_len {
        return Ok(None);
    }
    Ok(Some(MazeInstance { walls, start, goal, path }))
}
