//! Lossless raster rendering of mazes and paths.
//!
//! Palette: walls black, free cells white, path cells green, start blue,
//! goal red. Cells are drawn as solid `scale`x`scale` pixel squares so the
//! grid is exactly recoverable from the image.

use image::{Rgb, RgbImage};

use genplanner_core::{Cell, MazeInstance, PathMask};

pub const DEFAULT_SCALE: u32 = 12;

pub const WALL: Rgb<u8> = Rgb([0, 0, 0]);
pub const FREE: Rgb<u8> = Rgb([255, 255, 255]);
pub const PATH: Rgb<u8> = Rgb([0, 200, 0]);
pub const START: Rgb<u8> = Rgb([0, 0, 255]);
pub const GOAL: Rgb<u8> = Rgb([255, 0, 0]);

/// Renders an instance with an arbitrary path mask (ground truth or
/// generated). Start and goal are drawn over path cells.
pub fn render(instance: &MazeInstance, mask: &PathMask, scale: u32) -> RgbImage {
    let (h, w) = (instance.height(), instance.width());
    let mut img = RgbImage::new(w as u32 * scale, h as u32 * scale);
    for row in 0..h {
        for col in 0..w {
            let cell = Cell::new(row, col);
            let color = if cell == instance.start {
                START
            } else if cell == instance.goal {
                GOAL
            } else if mask.contains(cell) {
                PATH
            } else if instance.walls.is_wall(cell) {
                WALL
            } else {
                FREE
            };
            for py in 0..scale {
                for px in 0..scale {
                    img.put_pixel(col as u32 * scale + px, row as u32 * scale + py, color);
                }
            }
        }
    }
    img
}

/// Renders the stored ground-truth path.
pub fn render_ground_truth(instance: &MazeInstance, scale: u32) -> RgbImage {
    let mask = PathMask::new(
        instance.height(),
        instance.width(),
        instance.path_mask_bits(),
    );
    render(instance, &mask, scale)
}

/// Recovers the cell class grid from a rendered image; inverse of `render`.
pub fn decode(img: &RgbImage, scale: u32) -> Vec<Vec<Rgb<u8>>> {
    let h = img.height() / scale;
    let w = img.width() / scale;
    (0..h)
        .map(|row| {
            (0..w)
                .map(|col| *img.get_pixel(col * scale, row * scale))
                .collect()
        })
        .collect()
}
