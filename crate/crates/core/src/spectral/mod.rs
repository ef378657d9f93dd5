//! Eigenpairs of the generator, the spectral heat kernel, heat-kernel bound
//! fitting and Besov norms.

mod besov;
mod eigen;
mod hk;

pub use besov::{besov_norm, besov_radii, BesovReport};
pub use eigen::{eigendecompose, eigendecompose_dense, eigendecompose_lanczos, SpectralData, LANCZOS_DEFAULT_MODES};
pub use hk::{
    fit_hk_bounds, log_grid, on_diagonal_slope, HkFit, HkPoint, TimeScaling, TimeWindow, WindowWarning,
};
