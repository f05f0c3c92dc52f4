//! Applications built on delta queries: OLAP cubes, feature augmentation,
//! and linear regression over the covariance semi-ring.

mod augment;
mod cube;
mod linreg;

pub use augment::AugmentOutcome;
pub use cube::{build_cube, CubeIndex, OlapAnswer};
pub use linreg::{fit_from_aggregate, LinRegModel};
