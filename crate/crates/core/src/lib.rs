//! Condition-data toolkit and synthetic-data pipeline driver for labeled
//! driving scenes.
//!
//! * [`scene`]: clip model (map entities, object tracks, ego poses, rigs).
//! * [`camera`]: pinhole and f-theta projection, rectification tables.
//! * [`render`]: HDMap / LiDAR-depth condition videos and chunk naming.
//! * [`lidar`]: spinning-LiDAR range-map codec.
//! * [`trajectory`]: keyframe trajectory authoring.
//! * [`dataset`]: archive layout, third-party conversion, manifests.
//! * [`pipeline`]: end-to-end generation orchestration and mix sampling.
//! * [`api`]: HTTP service used by the trajectory studio.

pub mod api;
pub mod camera;
pub mod dataset;
pub mod error;
pub mod lidar;
pub mod pipeline;
pub mod render;
pub mod scene;
pub mod trajectory;

pub use error::{Error, Result};
