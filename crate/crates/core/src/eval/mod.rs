//! Frame AP, video IoU/AP/AR, temporal consistency and a greedy tracker.

mod ap;
mod tc;
mod track;
mod video;

pub use ap::ap_frame;
pub use tc::{pair_consistency, temporal_consistency};
pub use track::{greedy_track, video_iou, Track, TrackerConfig};
pub use video::{default_video_thresholds, video_ap, VideoEval, VideoMetrics};
