//! The two model-facing contracts the pipeline drives: a box detector and a
//! promptable video segmenter with per-track memory.

use std::collections::BTreeMap;

use crate::association::Detection;
use crate::error::Result;
use crate::mask::BBox;
use crate::track::{MaskObservation, TrackId};

/// A promptable video segmenter that keeps its own per-track memory.
pub trait Segmenter {
    /// Creates or re-prompts `track_id` from a box on `frame`. The returned
    /// observation carries `track_id` and replaces whatever `propagate` would
    /// have produced for it on this frame.
    fn add_prompt(&mut self, frame: usize, bbox: &BBox, track_id: TrackId) -> Result<MaskObservation>;

    /// One observation per active track for `frame`, at most one per id.
    fn propagate(&mut self, frame: usize) -> Result<Vec<MaskObservation>>;

    fn drop_track(&mut self, track_id: TrackId) -> Result<()>;

    /// Number of past states each track may keep; 0 means unbounded.
    fn set_memory_window(&mut self, t_w: usize) -> Result<()>;
}

pub trait Detector {
    /// Raw, unfiltered detections for `frame`.
    fn detect(&mut self, frame: usize) -> Result<Vec<Detection>>;
}

/// Precomputed detections keyed by frame; missing frames have none.
impl Detector for BTreeMap<usize, Vec<Detection>> {
    fn detect(&mut self, frame: usize) -> Result<Vec<Detection>> {
        Ok(self.get(&frame).cloned().unwrap_or_default())
    }
}

impl<S: Segmenter + ?Sized> Segmenter for &mut S {
    fn add_prompt(&mut self, frame: usize, bbox: &BBox, track_id: TrackId) -> Result<MaskObservation> {
        (**self).add_prompt(frame, bbox, track_id)
    }
    fn propagate(&mut self, frame: usize) -> Result<Vec<MaskObservation>> {
        (**self).propagate(frame)
    }
    fn drop_track(&mut self, track_id: TrackId) -> Result<()> {
        (**self).drop_track(track_id)
    }
    fn set_memory_window(&mut self, t_w: usize) -> Result<()> {
        (**self).set_memory_window(t_w)
    }
}

impl<D: Detector + ?Sized> Detector for &mut D {
    fn detect(&mut self, frame: usize) -> Result<Vec<Detection>> {
        (**self).detect(frame)
    }
}
