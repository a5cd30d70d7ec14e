//! The GPLN v1 dataset container.
//!
//! Layout (little endian): magic `GPLN`, version u16, grid height u16, grid
//! width u16, sample count u32, split boundary u32 (index of the first eval
//! sample), then per sample four row-major bit-packed H×W masks — walls,
//! start, goal, path — each padded to a byte boundary, LSB first.

use std::io::{Read, Write};
use std::path::Path;

use genplanner_core::{generate_instance, Cell, CellPath, DatasetConfig, MazeInstance, WallMask};

use crate::error::PlannerError;

const MAGIC: &[u8; 4] = b"GPLN";
const VERSION: u16 = 1;

/// An in-memory dataset with a fixed train/eval split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub height: usize,
    pub width: usize,
    /// First `split` samples are the train split.
    pub split: usize,
    pub instances: Vec<MazeInstance>,
}

impl Dataset {
    pub fn train(&self) -> &[MazeInstance] {
        &self.instances[..self.split]
    }

    pub fn eval(&self) -> &[MazeInstance] {
        &self.instances[self.split..]
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Per-instance seed for draw `k` of a build with root seed `seed`.
pub fn instance_seed(seed: u64, k: u64) -> u64 {
    splitmix64(seed ^ splitmix64(k))
}

/// Builds the dataset in memory: a rejection loop over derived seeds until
/// `train_count + eval_count` instances are accepted.
pub fn build_dataset(config: &DatasetConfig) -> Result<Dataset, PlannerError> {
    config.validate()?;
    let want = config.train_count + config.eval_count;
    let mut instances = Vec::with_capacity(want);
    let mut attempts: u64 = 0;
    while instances.len() < want {
        let seed = instance_seed(config.seed, attempts);
        attempts += 1;
        if let Some(inst) = generate_instance(config, seed)? {
            debug_assert!(inst.validate().is_ok());
            instances.push(inst);
        }
        if attempts >= 1000 && (instances.len() as f64) < 0.001 * attempts as f64 {
            return Err(PlannerError::Infeasible(format!(
                "rejection rate above 99.9%: {} accepted in {attempts} draws \
                 (grid {g}x{g}, wall_prob {p}, min_path_len {m})",
                instances.len(),
                g = config.grid_size,
                p = config.wall_prob,
                m = config.min_path_len
            )));
        }
    }
    Ok(Dataset {
        height: config.grid_size,
        width: config.grid_size,
        split: config.train_count,
        instances,
    })
}

fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

fn unpack_bits(bytes: &[u8], n: usize) -> Vec<bool> {
    (0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect()
}

fn one_hot(cell: Cell, h: usize, w: usize) -> Vec<bool> {
    let mut bits = vec![false; h * w];
    bits[cell.row * w + cell.col] = true;
    bits
}

pub fn dataset_to_bytes(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.height as u16).to_le_bytes());
    out.extend_from_slice(&(ds.width as u16).to_le_bytes());
    out.extend_from_slice(&(ds.instances.len() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.split as u32).to_le_bytes());
    for inst in &ds.instances {
        out.extend_from_slice(&pack_bits(inst.walls.bits()));
        out.extend_from_slice(&pack_bits(&one_hot(inst.start, ds.height, ds.width)));
        out.extend_from_slice(&pack_bits(&one_hot(inst.goal, ds.height, ds.width)));
        out.extend_from_slice(&pack_bits(&inst.path_mask_bits()));
    }
    out
}

/// Reorders an unordered simple-path mask into a start-to-goal cell sequence.
fn trace_path(walls: &WallMask, mask_bits: &[bool], start: Cell, goal: Cell) -> Result<CellPath, PlannerError> {
    let w = walls.width();
    let mut visited = vec![false; mask_bits.len()];
    let mut cells = vec![start];
    visited[start.row * w + start.col] = true;
    let mut cur = start;
    while cur != goal {
        let mut next = None;
        for n in walls.neighbors4(cur) {
            let i = n.row * w + n.col;
            if mask_bits[i] && !visited[i] {
                if next.is_some() {
                    return Err(PlannerError::Format(
                        "stored path mask is not a simple path".into(),
                    ));
                }
                next = Some(n);
            }
        }
        match next {
            Some(n) => {
                visited[n.row * w + n.col] = true;
                cells.push(n);
                cur = n;
            }
            None => {
                return Err(PlannerError::Format(
                    "stored path mask does not reach the goal".into(),
                ))
            }
        }
    }
    Ok(CellPath::new(cells))
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<Dataset, PlannerError> {
    if bytes.len() < 18 || &bytes[0..4] != MAGIC {
        return Err(PlannerError::Format("not a GPLN file".into()));
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != VERSION {
        return Err(PlannerError::Format(format!(
            "unsupported GPLN version {version}"
        )));
    }
    let h = u16::from_le_bytes(bytes[6..8].try_into().unwrap()) as usize;
    let w = u16::from_le_bytes(bytes[8..10].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let split = u32::from_le_bytes(bytes[14..18].try_into().unwrap()) as usize;
    if split > count {
        return Err(PlannerError::Format(format!(
            "split boundary {split} exceeds sample count {count}"
        )));
    }
    let mask_bytes = (h * w).div_ceil(8);
    let expect = 18 + count * 4 * mask_bytes;
    if bytes.len() != expect {
        return Err(PlannerError::Format(format!(
            "file length {} != expected {expect}",
            bytes.len()
        )));
    }

    let find_hot = |bits: &[bool]| -> Result<Cell, PlannerError> {
        let hot: Vec<usize> = bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect();
        if hot.len() != 1 {
            return Err(PlannerError::Format(format!(
                "endpoint mask has {} set cells, expected 1",
                hot.len()
            )));
        }
        Ok(Cell::new(hot[0] / w, hot[0] % w))
    };

    let mut instances = Vec::with_capacity(count);
    let mut offset = 18;
    for _ in 0..count {
        let mut masks = Vec::with_capacity(4);
        for _ in 0..4 {
            masks.push(unpack_bits(&bytes[offset..offset + mask_bytes], h * w));
            offset += mask_bytes;
        }
        let walls = WallMask::new(h, w, masks[0].clone()).map_err(PlannerError::Core)?;
        let start = find_hot(&masks[1])?;
        let goal = find_hot(&masks[2])?;
        let path = trace_path(&walls, &masks[3], start, goal)?;
        let inst = MazeInstance { walls, start, goal, path };
        inst.validate().map_err(PlannerError::Core)?;
        instances.push(inst);
    }
    Ok(Dataset {
        height: h,
        width: w,
        split,
        instances,
    })
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<(), PlannerError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&dataset_to_bytes(ds))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset, PlannerError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    dataset_from_bytes(&bytes)
}
