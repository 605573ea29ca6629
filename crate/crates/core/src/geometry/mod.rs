//! Pose and size algebra, depth back-projection and center heatmaps.

mod camera;
mod heatmap;
mod rotation;
mod transform;

pub use camera::{
    backproject_depth, read_depth_pgm, read_intrinsics, read_mask_pgm, read_pgm, write_depth_pgm,
    write_pgm, CameraIntrinsics, DepthMap, Mask, Pgm,
};
pub use heatmap::{
    default_sigma, detect_instances, extract_peaks, query_map, render_heatmap, DenseEmbeddingMap,
    DetectedInstance, Heatmap, Peak,
};
pub use rotation::{
    axis_angle, is_rotation, random_rotation, so3_residual, svd_orthogonalize, SINGULAR_EPS,
};
pub use transform::{
    apply_transform, decode_pose_vector, encode_pose_vector, SimilarityTransform, POSE_CHANNELS,
};
