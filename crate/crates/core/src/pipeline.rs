//! Per-frame orchestration: detections in, segmenter prompts and quality
//! gating in the middle, emitted masks and trajectories out.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::association::{associate, filter_detections, Detection};
use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::mask::{union_masks, BinaryMask};
use crate::rle::Rle;
use crate::segmenter::{Detector, Segmenter};
use crate::track::{MaskObservation, QualityState, Track, TrackId, TrackStore};

#[derive(Debug, Clone, PartialEq)]
pub struct EmittedObject {
    pub track_id: TrackId,
    pub class_id: u32,
    pub mask: BinaryMask,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameResult {
    pub frame: usize,
    /// Sorted by track id; masks are pairwise disjoint.
    pub emitted: Vec<EmittedObject>,
    pub removed_ids: Vec<TrackId>,
    pub initialized_ids: Vec<TrackId>,
    pub reinforced_ids: Vec<TrackId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryEntry {
    pub frame: usize,
    pub rle: Rle,
    pub score_bits: u64,
}

impl TrajectoryEntry {
    pub fn new(frame: usize, rle: Rle, score: f64) -> Self {
        Self {
            frame,
            rle,
            score_bits: score.to_bits(),
        }
    }

    pub fn score(&self) -> f64 {
        f64::from_bits(self.score_bits)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub id: TrackId,
    pub class_id: u32,
    /// Frames strictly increasing.
    pub entries: Vec<TrajectoryEntry>,
}

/// Track state for one sequence plus the frame geometry.
#[derive(Debug, Clone)]
pub struct Tracker {
    width: usize,
    height: usize,
    cfg: TrackerConfig,
    store: TrackStore,
}

impl Tracker {
    pub fn new(width: usize, height: usize, cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        BinaryMask::new(width, height)?;
        Ok(Self {
            width,
            height,
            cfg,
            store: TrackStore::new(),
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn store(&self) -> &TrackStore {
        &self.store
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn check_obs(&self, obs: &MaskObservation, expected: Option<TrackId>) -> Result<()> {
        if let Some(id) = expected {
            if obs.track_id != id {
                return Err(Error::IdentityMismatch {
                    expected: id,
                    got: obs.track_id,
                });
            }
        }
        if obs.mask.dims() != (self.width, self.height) {
            return Err(Error::DimensionMismatch(
                obs.mask.width(),
                obs.mask.height(),
                self.width,
                self.height,
            ));
        }
        Ok(())
    }

    /// Runs one frame. `detections` are the raw detector output for `frame`;
    /// the store must reflect `frame - 1`.
    pub fn process_frame(
        &mut self,
        frame: usize,
        detections: &[Detection],
        segmenter: &mut dyn Segmenter,
    ) -> Result<FrameResult> {
        let (w, h) = (self.width, self.height);
        let cfg = &self.cfg;
        let filtered = filter_detections(detections, cfg.det_conf);

        let mut next_id = self.store.next_id();
        let prompts = {
            let live: Vec<&Track> = self.store.live().collect();
            let union = union_masks(w, h, live.iter().map(|t| &t.last_mask))?;
            associate(&live, &filtered, &union, cfg, &mut next_id)
        };

        let mut result = FrameResult {
            frame,
            ..FrameResult::default()
        };
        let mut prompted: BTreeMap<TrackId, MaskObservation> = BTreeMap::new();
        for r in &prompts.reinforcements {
            let obs = segmenter.add_prompt(frame, &r.bbox, r.track_id)?;
            self.check_obs(&obs, Some(r.track_id))?;
            prompted.insert(r.track_id, obs);
            result.reinforced_ids.push(r.track_id);
        }
        for init in &prompts.initializations {
            let id = self.store.allocate_id();
            debug_assert_eq!(id, init.track_id);
            self.store
                .insert(Track::new(id, init.class_id, frame, w, h)?);
            let obs = segmenter.add_prompt(frame, &init.bbox, id)?;
            self.check_obs(&obs, Some(id))?;
            prompted.insert(id, obs);
            result.initialized_ids.push(id);
        }

        let mut observations: BTreeMap<TrackId, MaskObservation> = BTreeMap::new();
        for obs in segmenter.propagate(frame)? {
            self.check_obs(&obs, None)?;
            if self.store.get(obs.track_id).is_none() {
                return Err(Error::UnknownTrackId(obs.track_id));
            }
            if observations.insert(obs.track_id, obs).is_some() {
                return Err(Error::Segmenter {
                    frame,
                    message: "propagate returned two observations for one track".into(),
                });
            }
        }
        observations.extend(prompted);

        let mut current: Vec<(TrackId, MaskObservation)> = Vec::new();
        for id in self.store.ids() {
            let obs = match observations.remove(&id) {
                Some(obs) => obs,
                None => MaskObservation::missing(id, w, h)?,
            };
            let track = self.store.get_mut(id).expect("live id");
            let update = track.apply_observation(&obs, frame, &self.cfg)?;
            if update.removed {
                self.store.retire(id);
                segmenter.drop_track(id)?;
                result.removed_ids.push(id);
            } else if update.new_state != QualityState::Low || !self.cfg.enable_tqa {
                current.push((id, obs));
            }
        }

        result.emitted = self.resolve_overlaps(current)?;
        Ok(result)
    }

    /// Higher scores keep contested pixels; ties go to the lower id.
    fn resolve_overlaps(&self, mut current: Vec<(TrackId, MaskObservation)>) -> Result<Vec<EmittedObject>> {
        current.retain(|(_, o)| !o.mask.is_empty());
        current.sort_by(|a, b| b.1.score.total_cmp(&a.1.score).then(a.0.cmp(&b.0)));
        let mut claimed = BinaryMask::new(self.width, self.height)?;
        let mut emitted = Vec::with_capacity(current.len());
        for (id, obs) in current {
            let mut mask = obs.mask;
            mask.subtract_assign(&claimed)?;
            if mask.is_empty() {
                continue;
            }
            claimed.or_assign(&mask)?;
            let class_id = self.store.get(id).expect("live id").class_id;
            emitted.push(EmittedObject {
                track_id: id,
                class_id,
                mask,
                score: obs.score,
            });
        }
        emitted.sort_by_key(|e| e.track_id);
        Ok(emitted)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub frames: usize,
    /// Max over frames of the retained memory entries summed over tracks.
    pub peak_memory_entries: usize,
    pub peak_memory_bytes: usize,
    pub tracks_created: usize,
    pub frame_times_ms: Vec<f64>,
    pub total_time_ms: f64,
}

#[derive(Debug)]
pub struct RunOutput {
    /// Sorted by id.
    pub trajectories: Vec<Trajectory>,
    pub stats: RunStats,
    pub frames: Vec<FrameResult>,
    /// Set when a frame failed; everything above covers the frames before it.
    pub aborted: Option<Error>,
}

impl RunOutput {
    pub fn into_result(self) -> Result<RunOutput> {
        match self.aborted {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// Collects per-frame results into per-identity trajectories.
pub fn assemble_trajectories(frames: &[FrameResult]) -> Vec<Trajectory> {
    let mut by_id: BTreeMap<TrackId, Trajectory> = BTreeMap::new();
    for fr in frames {
        for e in &fr.emitted {
            by_id
                .entry(e.track_id)
                .or_insert_with(|| Trajectory {
                    id: e.track_id,
                    class_id: e.class_id,
                    entries: Vec::new(),
                })
                .entries
                .push(TrajectoryEntry::new(fr.frame, Rle::encode(&e.mask), e.score));
        }
    }
    by_id.into_values().collect()
}

/// Runs frames `0..n_frames`. Configuration problems fail up front; a
/// failure inside the frame loop stops the run and is reported in
/// `RunOutput::aborted` alongside the partial results.
pub fn run_sequence(
    width: usize,
    height: usize,
    n_frames: usize,
    detector: &mut dyn Detector,
    segmenter: &mut dyn Segmenter,
    cfg: &TrackerConfig,
) -> Result<RunOutput> {
    let mut tracker = Tracker::new(width, height, cfg.clone())?;
    segmenter.set_memory_window(cfg.t_w)?;
    let start = Instant::now();
    let mut stats = RunStats::default();
    let mut frames = Vec::with_capacity(n_frames);
    let mut aborted = None;
    for frame in 0..n_frames {
        let t0 = Instant::now();
        let step = detector
            .detect(frame)
            .and_then(|dets| tracker.process_frame(frame, &dets, segmenter));
        match step {
            Ok(fr) => frames.push(fr),
            Err(e) => {
                log::error!("frame {frame}: {e}");
                aborted = Some(e);
                break;
            }
        }
        stats.frames += 1;
        stats.peak_memory_entries = stats.peak_memory_entries.max(tracker.store.memory_entries());
        stats.peak_memory_bytes = stats.peak_memory_bytes.max(tracker.store.memory_bytes());
        stats.frame_times_ms.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    stats.tracks_created = tracker.store.next_id() as usize - 1;
    stats.total_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(RunOutput {
        trajectories: assemble_trajectories(&frames),
        stats,
        frames,
        aborted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::BBox;

    /// Returns the box mask for every prompt and replays a scripted score
    /// per track and frame.
    #[derive(Default)]
    struct Scripted {
        masks: BTreeMap<TrackId, BinaryMask>,
        scores: BTreeMap<(TrackId, usize), f64>,
        prompts: Vec<(usize, TrackId)>,
        dropped: Vec<TrackId>,
    }

    impl Segmenter for Scripted {
        fn add_prompt(&mut self, frame: usize, bbox: &BBox, track_id: TrackId) -> Result<MaskObservation> {
            self.prompts.push((frame, track_id));
            let mask = BinaryMask::from_box(20, 20, bbox)?;
            self.masks.insert(track_id, mask.clone());
            Ok(MaskObservation {
                track_id,
                mask,
                score: 0.9,
                embedding: vec![0; 4],
            })
        }
        fn propagate(&mut self, frame: usize) -> Result<Vec<MaskObservation>> {
            Ok(self
                .masks
                .iter()
                .map(|(&id, m)| MaskObservation {
                    track_id: id,
                    mask: m.clone(),
                    score: *self.scores.get(&(id, frame)).unwrap_or(&0.9),
                    embedding: vec![0; 4],
                })
                .collect())
        }
        fn drop_track(&mut self, track_id: TrackId) -> Result<()> {
            self.masks.remove(&track_id);
            self.dropped.push(track_id);
            Ok(())
        }
        fn set_memory_window(&mut self, _t_w: usize) -> Result<()> {
            Ok(())
        }
    }

    fn det(x1: f64, y1: f64, x2: f64, y2: f64) -> Detection {
        Detection {
            bbox: BBox::new(x1, y1, x2, y2).unwrap(),
            score: 0.9,
            class_id: 1,
        }
    }

    #[test]
    fn cold_start_initializes_everything() {
        let mut tr = Tracker::new(20, 20, TrackerConfig::default()).unwrap();
        let mut seg = Scripted::default();
        let fr = tr
            .process_frame(0, &[det(0., 0., 5., 5.), det(10., 10., 15., 15.)], &mut seg)
            .unwrap();
        assert_eq!(fr.initialized_ids, vec![1, 2]);
        assert!(fr.reinforced_ids.is_empty());
        assert_eq!(fr.emitted.len(), 2);
    }

    #[test]
    fn uncertain_track_gets_reinforced() {
        let mut tr = Tracker::new(20, 20, TrackerConfig::default()).unwrap();
        let mut seg = Scripted::default();
        seg.scores.insert((1, 1), 0.5);
        tr.process_frame(0, &[det(0., 0., 5., 5.)], &mut seg).unwrap();
        let fr = tr.process_frame(1, &[], &mut seg).unwrap();
        assert_eq!(tr.store().get(1).unwrap().state, QualityState::Uncertain);
        assert!(fr.reinforced_ids.is_empty());
        let fr = tr.process_frame(2, &[det(0., 0., 5., 5.)], &mut seg).unwrap();
        assert_eq!(fr.reinforced_ids, vec![1]);
        assert!(fr.initialized_ids.is_empty());
        assert_eq!(seg.prompts, vec![(0, 1), (2, 1)]);
    }

    #[test]
    fn high_track_absorbs_duplicate_detection() {
        let mut tr = Tracker::new(20, 20, TrackerConfig::default()).unwrap();
        let mut seg = Scripted::default();
        tr.process_frame(0, &[det(0., 0., 5., 5.)], &mut seg).unwrap();
        let fr = tr.process_frame(1, &[det(0., 0., 5., 5.)], &mut seg).unwrap();
        assert!(fr.reinforced_ids.is_empty() && fr.initialized_ids.is_empty());
    }

    #[test]
    fn removal_after_five_lows() {
        let mut tr = Tracker::new(20, 20, TrackerConfig::default()).unwrap();
        let mut seg = Scripted::default();
        for f in 1..=5 {
            seg.scores.insert((1, f), 0.05);
        }
        tr.process_frame(0, &[det(0., 0., 5., 5.)], &mut seg).unwrap();
        for f in 1..5 {
            let fr = tr.process_frame(f, &[], &mut seg).unwrap();
            assert!(fr.removed_ids.is_empty());
            assert!(fr.emitted.is_empty());
        }
        let fr = tr.process_frame(5, &[], &mut seg).unwrap();
        assert_eq!(fr.removed_ids, vec![1]);
        assert_eq!(seg.dropped, vec![1]);
        assert!(tr.store().is_empty());
        // a new detection at the same place gets a new id
        let fr = tr.process_frame(6, &[det(0., 0., 5., 5.)], &mut seg).unwrap();
        assert_eq!(fr.initialized_ids, vec![2]);
    }

    #[test]
    fn overlapping_outputs_are_resolved_by_score() {
        let mut tr = Tracker::new(20, 20, TrackerConfig::default()).unwrap();
        let mut seg = Scripted::default();
        seg.scores.insert((1, 1), 0.8);
        seg.scores.insert((2, 1), 0.95);
        tr.process_frame(0, &[det(0., 0., 6., 6.), det(4., 0., 10., 6.)], &mut seg)
            .unwrap();
        let fr = tr.process_frame(1, &[], &mut seg).unwrap();
        let a = &fr.emitted[0].mask;
        let b = &fr.emitted[1].mask;
        assert!(!a.overlaps(b).unwrap());
        assert_eq!(b.area(), 36);
        assert_eq!(a.area(), 24);
        assert_eq!(fr.emitted[0].score, 0.8);
    }

    #[test]
    fn empty_sequence() {
        let mut dets: BTreeMap<usize, Vec<Detection>> = BTreeMap::new();
        let out = run_sequence(20, 20, 0, &mut dets, &mut Scripted::default(), &TrackerConfig::default())
            .unwrap();
        assert!(out.trajectories.is_empty());
        assert_eq!(out.stats.frames, 0);
    }

    #[test]
    fn rejects_bad_config_before_running() {
        let cfg = TrackerConfig {
            tau_l: 0.9,
            ..TrackerConfig::default()
        };
        let mut dets: BTreeMap<usize, Vec<Detection>> = BTreeMap::new();
        assert!(matches!(
            run_sequence(20, 20, 3, &mut dets, &mut Scripted::default(), &cfg),
            Err(Error::Config(_))
        ));
    }
}
