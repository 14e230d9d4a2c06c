pub mod canard;
pub mod error;
pub mod export;
pub mod geometry;
pub mod hybrid;
pub mod mmo;
pub mod model;
pub mod planar;
pub mod singular;
pub mod smooth;
pub mod zoneflow;

pub use error::{Error, Result};
pub use model::{Params, ReturnParams, State, SystemSpec};
