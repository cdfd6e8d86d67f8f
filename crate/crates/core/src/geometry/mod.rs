//! Shapes, exact signed distances, point clouds, grids and level sets.

mod cloud;
mod grid;
mod level_set;
mod shape;

pub use cloud::{load_cloud, normalize_cloud, parse_cloud, save_cloud, write_cloud, PointCloud, Transform};
pub use grid::{load_grid, parse_grid, save_grid, write_grid, GridSpec, ScalarGrid};
pub use level_set::{extract_level_set, LevelSet};
pub use shape::{sample_boundary, signed_distance_oracle, Shape};

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
