//! Density-based topology optimization on structured hexahedral grids.

pub mod fem;
pub mod grid_io;
pub mod manufacture;
pub mod mesh;
pub mod problem;
pub mod render;
pub mod simp;
