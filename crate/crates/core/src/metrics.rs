use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::grid::Cell;
use crate::instance::MazeInstance;

/// Binarized generated output: the set of cells the model claims as path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl PathMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), height * width);
        PathMask { height, width, bits }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.height
            && cell.col < self.width
            && self.bits[cell.row * self.width + cell.col]
    }

    pub fn cell_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Number of in-mask 4-neighbors of `cell`.
    fn mask_neighbors(&self, cell: Cell) -> usize {
        let (r, c) = (cell.row as isize, cell.col as isize);
        [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
            .into_iter()
            .filter(|&(nr, nc)| {
                nr >= 0
                    && nc >= 0
                    && (nr as usize) < self.height
                    && (nc as usize) < self.width
                    && self.bits[nr as usize * self.width + nc as usize]
            })
            .count()
    }

    fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|&(_, &on)| on)
            .map(move |(i, _)| Cell::new(i / self.width, i % self.width))
    }
}

/// Aggregate of the four path-quality metrics. Fractions, not percentages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub validity: f64,
    pub single_path: f64,
    /// Mean over valid samples only; `None` when no sample was valid.
    pub length_ratio: Option<f64>,
    pub branch_rate: f64,
}

/// True iff start and goal lie in the mask and a 4-connected route exists
/// between them through cells that are both in the mask and wall-free.
pub fn validity(mask: &PathMask, instance: &MazeInstance) -> bool {
    let (start, goal) = (instance.start, instance.goal);
    if !mask.contains(start) || !mask.contains(goal) {
        return false;
    }
    // Wall-overlapping mask cells are unusable for the route.
    let usable = |c: Cell| mask.contains(c) && !instance.walls.is_wall(c);
    if !usable(start) || !usable(goal) {
        return false;
    }
    let w = mask.width();
    let mut seen = alloc::vec![false; mask.height() * w];
    let mut queue = VecDeque::new();
    seen[start.row * w + start.col] = true;
    queue.push_back(start);
    while let Some(cur) = queue.pop_front() {
        if cur == goal {
            return true;
        }
        for next in instance.walls.neighbors4(cur) {
            if usable(next) && !seen[next.row * w + next.col] {
                seen[next.row * w + next.col] = true;
                queue.push_back(next);
            }
        }
    }
    false
}

/// Fraction of mask cells with at least three in-mask 4-neighbors.
/// Zero for the empty mask.
pub fn branch_rate(mask: &PathMask) -> f64 {
    let total = mask.cell_count();
    if total == 0 {
        return 0.0;
    }
    let branching = mask.cells().filter(|&c| mask.mask_neighbors(c) >= 3).count();
    branching as f64 / total as f64
}

/// Number of mask cells with exactly one in-mask 4-neighbor. An isolated
/// cell (zero neighbors) is not an endpoint.
pub fn count_endpoints(mask: &PathMask) -> usize {
    mask.cells().filter(|&c| mask.mask_neighbors(c) == 1).count()
}

/// Number of 4-connected components among mask cells.
pub fn component_count(mask: &PathMask) -> usize {
    let w = mask.width();
    let mut seen = alloc::vec![false; mask.height() * w];
    let mut components = 0;
    for root in mask.cells() {
        if seen[root.row * w + root.col] {
            continue;
        }
        components += 1;
        let mut queue = VecDeque::from([root]);
        seen[root.row * w + root.col] = true;
        while let Some(cur) = queue.pop_front() {
            let (r, c) = (cur.row as isize, cur.col as isize);
            for (nr, nc) in [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)] {
                if nr < 0 || nc < 0 {
                    continue;
                }
                let next = Cell::new(nr as usize, nc as usize);
                if mask.contains(next) && !seen[next.row * w + next.col] {
                    seen[next.row * w + next.col] = true;
                    queue.push_back(next);
                }
            }
        }
    }
    components
}

/// True iff the mask forms one single, unbranched start-to-goal path:
/// valid, branch-free, exactly two endpoints, and a single connected
/// component (so detached stray cells disqualify).
pub fn single_path(mask: &PathMask, instance: &MazeInstance) -> bool {
    validity(mask, instance)
        && branch_rate(mask) == 0.0
        && count_endpoints(mask) == 2
        && component_count(mask) == 1
}

/// Generated-over-optimal cell-count ratio; `None` when the mask is invalid.
pub fn length_ratio(mask: &PathMask, instance: &MazeInstance) -> Option<f64> {
    if !validity(mask, instance) {
        return None;
    }
    Some(mask.cell_count() as f64 / instance.path.cell_count() as f64)
}
