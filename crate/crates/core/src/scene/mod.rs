//! Scene point clouds, exact nearest-neighbour search and the frustum grid.

mod cloud;
mod frustum;
mod kdtree;
mod pointio;

pub use cloud::{SceneIndex, ScenePointCloud};
pub use frustum::{
    bin_of, frustum_normalize, read_grid_dump, voxelize, FrustumGrid, GridDump, Voxelized, DEFAULT_DEPTH_RANGE,
    GRID_DIMS,
};
pub use kdtree::KdTree;
pub use pointio::{format_csv, format_ply, parse_csv, parse_ply, read_point_cloud, write_point_cloud};
