//! Triangle meshes and raster images: validation, text formats and
//! synthetic generators.

mod formats;
mod generate;
mod image;
mod mesh;

pub use formats::{load_mesh, save_mesh, MeshFormat};
pub use generate::{generate_grid_mesh, generate_sphere_mesh};
pub use image::{load_image, save_image, RasterImage};
pub use mesh::TriangleMesh;
