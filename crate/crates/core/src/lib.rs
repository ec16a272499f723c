//! Mask-based multi-object tracking and segmentation.
//!
//! A detector proposes boxes, a promptable video segmenter turns them into
//! per-track masks and carries them forward, and the tracker in between
//! decides which tracks to keep, which to re-prompt and which detections
//! start new tracks:
//!
//! * each track's mask confidence is classified High, Uncertain or Low;
//!   tracks that stay Low for `n_tries` frames are removed;
//! * detections that overlap existing masks are matched to tracks by
//!   center distance, and matches with Uncertain tracks re-prompt the
//!   segmenter; detections over free space start new tracks;
//! * the segmenter keeps only the last `t_w` states per track.
//!
//! Around that sit KITTI MOTS / MOT readers and writers, HOTA and CLEAR-MOT
//! evaluation, a deterministic synthetic world that stands in for real
//! models, and a JSON-lines client for external model processes.
//!
//! The `examples/` directory has one runnable program per capability:
//!
//! | example | shows |
//! |---|---|
//! | `rle_codec` | mask run-length encoding and the compressed string form |
//! | `track_synthetic_scene` | tracking a generated scene end to end |
//! | `evaluate_hota` | HOTA and CLEAR-MOT on hand-built sequences |
//! | `detection_file_pipeline` | detections from a text file, results as MOTS and MOT lines |
//! | `custom_segmenter` | plugging a user segmenter into the tracker |
//! | `ablation_study` | the four component combinations over the standard corpus |
//! | `window_sweep` | retained memory and accuracy per memory window |
//!
//! ```
//! use motskit::config::TrackerConfig;
//! use motskit::experiments::evaluate_scene;
//! use motskit::synth::single_object_scene;
//!
//! let (report, run) = evaluate_scene(&single_object_scene(20), &TrackerConfig::default()).unwrap();
//! assert_eq!(report.classes[0].hota, 1.0);
//! assert_eq!(run.trajectories.len(), 1);
//! ```

pub mod adapter;
pub mod association;
pub mod config;
pub mod error;
pub mod experiments;
pub mod hungarian;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod pipeline;
pub mod rle;
pub mod segmenter;
pub mod synth;
pub mod track;

pub use association::Detection;
pub use config::TrackerConfig;
pub use error::{Error, Result};
pub use mask::{BBox, BinaryMask};
pub use pipeline::{run_sequence, RunOutput, Tracker, Trajectory};
pub use rle::Rle;
pub use segmenter::{Detector, Segmenter};
pub use track::{MaskObservation, QualityState, TrackId};
