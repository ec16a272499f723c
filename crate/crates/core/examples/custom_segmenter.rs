//! A hand-written segmenter plugged into the tracker.
//!
//! `BoxSegmenter` returns the prompt box as the mask and slides it to the
//! right by one pixel per frame. Its confidence fades with every frame
//! since the last prompt, so the tracker re-prompts the track from a fresh
//! detection once it turns Uncertain, and removes it after the detections
//! stop.

use std::collections::BTreeMap;

use motskit::association::Detection;
use motskit::config::{TrackerConfig, CLASS_CAR};
use motskit::mask::{BBox, BinaryMask};
use motskit::pipeline::Tracker;
use motskit::segmenter::Segmenter;
use motskit::track::{MaskObservation, TrackId};
use motskit::Result;

const W: usize = 80;
const H: usize = 30;

struct BoxSegmenter {
    /// Current box and frames since the last prompt.
    tracks: BTreeMap<TrackId, (BBox, u32)>,
    window: usize,
}

impl BoxSegmenter {
    fn observe(&self, id: TrackId, b: &BBox, age: u32) -> Result<MaskObservation> {
        let score = (1.0 - 0.05 * age as f64).max(0.0);
        Ok(MaskObservation {
            track_id: id,
            mask: BinaryMask::from_box(W, H, b)?,
            score,
            embedding: vec![0; 16],
        })
    }
}

impl Segmenter for BoxSegmenter {
    fn add_prompt(&mut self, _frame: usize, bbox: &BBox, track_id: TrackId) -> Result<MaskObservation> {
        self.tracks.insert(track_id, (*bbox, 0));
        self.observe(track_id, bbox, 0)
    }

    fn propagate(&mut self, _frame: usize) -> Result<Vec<MaskObservation>> {
        for (b, age) in self.tracks.values_mut() {
            if let Ok(moved) = BBox::new(b.x1 + 1.0, b.y1, (b.x2 + 1.0).min(W as f64), b.y2) {
                *b = moved;
            }
            *age += 1;
        }
        self.tracks.iter().map(|(id, (b, age))| self.observe(*id, b, *age)).collect()
    }

    fn drop_track(&mut self, track_id: TrackId) -> Result<()> {
        self.tracks.remove(&track_id);
        Ok(())
    }

    fn set_memory_window(&mut self, t_w: usize) -> Result<()> {
        self.window = t_w;
        Ok(())
    }
}

fn main() -> Result<()> {
    let cfg = TrackerConfig::default();
    let mut tracker = Tracker::new(W, H, cfg.clone())?;
    let mut seg = BoxSegmenter {
        tracks: BTreeMap::new(),
        window: 0,
    };
    seg.set_memory_window(cfg.t_w)?;

    for frame in 0..45 {
        // a detector that sees the object only now and then
        let dets = if [0, 3, 10, 12].contains(&frame) {
            let x = 10.0 + frame as f64;
            vec![Detection {
                bbox: BBox::new(x, 10.0, x + 12.0, 20.0)?,
                score: 0.9,
                class_id: CLASS_CAR,
            }]
        } else {
            Vec::new()
        };
        let r = tracker.process_frame(frame, &dets, &mut seg)?;
        let states: Vec<String> = tracker
            .store()
            .live()
            .map(|t| format!("{}:{:?}", t.id, t.state))
            .collect();
        if !r.initialized_ids.is_empty() || !r.reinforced_ids.is_empty() || !r.removed_ids.is_empty() {
            println!(
                "frame {frame:>2}: emitted {:?} new {:?} re-prompted {:?} removed {:?} states {states:?}",
                r.emitted.iter().map(|e| e.track_id).collect::<Vec<_>>(),
                r.initialized_ids,
                r.reinforced_ids,
                r.removed_ids
            );
        }
    }
    Ok(())
}
