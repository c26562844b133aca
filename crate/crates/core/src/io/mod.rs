//! Readers and writers for calibration, poses, images, distance maps, label
//! maps, tensors and height grids. Every format carries a magic string or
//! format tag plus a version.

pub mod binary;
pub mod calibration;
pub mod raster;
pub mod weights;

pub use binary::{
    attention_blocks, attention_from_blocks, load_blocks, load_distance_raw, load_geometry_tensor, load_grid, pac_blocks,
    pac_from_blocks, save_blocks, save_distance_raw, save_geometry_tensor, save_grid, TensorBlock,
};
pub use calibration::{
    format_calibration, format_poses, load_calibration, load_poses, parse_calibration, parse_poses, save_calibration,
    save_poses, NamedPose, Rig, RigCamera,
};
pub use raster::{
    load_distance_png, load_image, load_labels, save_distance_png, save_image, save_labels, ClassTable,
};
pub use weights::{load_weights, parse_weights, LossSettings};
