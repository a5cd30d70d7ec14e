pub mod layers;
pub mod unet;

pub use unet::{Block, TimeMlp, UNet, UNetCache};
