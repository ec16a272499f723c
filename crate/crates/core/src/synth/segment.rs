use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::scene::GtSequence;
use crate::error::{Error, Result};
use crate::mask::{bbox_mask_iou, BBox, BinaryMask};
use crate::segmenter::Segmenter;
use crate::track::{MaskObservation, TrackId};

/// Constants of the synthetic segmenter's failure model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterParams {
    /// A prompt binds to an object only if the box reaches this IoU with
    /// its visible mask.
    pub binding_floor: f64,
    /// Per-frame confidence loss of a track following nothing.
    pub phantom_decay: f64,
    /// Confidence of a prompt that bound to nothing.
    pub phantom_score: f64,
    /// Below this visible fraction an unprompted track starts to slip.
    pub strain_visibility: f64,
    /// Consecutive slipping frames after which the track loses its object.
    pub strain_limit: u32,
    /// Bytes per stored memory entry.
    pub embedding_bytes: usize,
}

impl Default for SegmenterParams {
    fn default() -> Self {
        Self {
            binding_floor: 0.1,
            phantom_decay: 0.3,
            phantom_score: 0.9,
            strain_visibility: 0.7,
            strain_limit: 3,
            embedding_bytes: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Binding {
    Object(u32),
    /// Follows nothing; repeats a fixed mask with decaying confidence.
    Phantom { mask: BinaryMask, score: f64 },
}

#[derive(Debug, Clone)]
struct SegTrack {
    binding: Binding,
    strain: u32,
    hidden: bool,
    /// Visible fraction per processed frame, capped at the memory window.
    history: VecDeque<f64>,
}

/// Segmenter over a generated scene. A bound track returns its object's
/// visible mask with the visible fraction as confidence. Without prompts
/// a partly hidden object is followed for a few frames and then lost,
/// and an object that was fully hidden is picked up again only
/// if a well-visible state is still inside the memory window.
pub struct SynthSegmenter<'a> {
    gt: &'a GtSequence,
    params: SegmenterParams,
    t_w: usize,
    tracks: BTreeMap<TrackId, SegTrack>,
    prompted: BTreeMap<TrackId, (usize, MaskObservation)>,
    peak_history: usize,
}

impl<'a> SynthSegmenter<'a> {
    pub fn new(gt: &'a GtSequence) -> Self {
        Self::with_params(gt, SegmenterParams::default())
    }

    pub fn with_params(gt: &'a GtSequence, params: SegmenterParams) -> Self {
        Self {
            gt,
            params,
            t_w: 0,
            tracks: BTreeMap::new(),
            prompted: BTreeMap::new(),
            peak_history: 0,
        }
    }

    /// Longest per-track state list seen so far.
    pub fn peak_history_len(&self) -> usize {
        self.peak_history
    }

    pub fn active_ids(&self) -> Vec<TrackId> {
        self.tracks.keys().copied().collect()
    }

    fn empty_mask(&self) -> BinaryMask {
        BinaryMask::new(self.gt.width, self.gt.height).expect("scene has a valid size")
    }

    fn visible(&self, frame: usize, gt_id: u32) -> Option<(BinaryMask, f64)> {
        let obj = self.gt.frames.get(frame)?.get(gt_id)?;
        Some((obj.mask.clone(), obj.visible_fraction()))
    }

    fn embedding(&self, track_id: TrackId, frame: usize) -> Vec<u8> {
        let seed = (track_id as u64) << 32 | frame as u64;
        seed.to_le_bytes()
            .iter()
            .copied()
            .cycle()
            .take(self.params.embedding_bytes)
            .collect()
    }

    fn record(&mut self, track_id: TrackId, vf: f64) {
        let t_w = self.t_w;
        let t = self.tracks.get_mut(&track_id).expect("known track");
        t.history.push_back(vf);
        if t_w > 0 {
            while t.history.len() > t_w {
                t.history.pop_front();
            }
        }
        self.peak_history = self.peak_history.max(t.history.len());
    }

    fn step(&mut self, track_id: TrackId, frame: usize) -> MaskObservation {
        let p = self.params.clone();
        let empty = self.empty_mask();
        let t = self.tracks.get(&track_id).expect("known track").clone();
        let (mask, score, next, vf) = match t.binding {
            Binding::Phantom { mask, score } => {
                let score = (score - p.phantom_decay).max(0.0);
                let next = SegTrack {
                    binding: Binding::Phantom {
                        mask: mask.clone(),
                        score,
                    },
                    ..t
                };
                (mask, score, next, 0.0)
            }
            Binding::Object(gt_id) => {
                let mut next = t.clone();
                match self.visible(frame, gt_id) {
                    None => {
                        next.hidden = true;
                        (empty, 0.0, next, 0.0)
                    }
                    Some(_)
                        if t.hidden && !t.history.iter().any(|&v| v >= p.strain_visibility) =>
                    {
                        next.binding = Binding::Phantom {
                            mask: empty.clone(),
                            score: 0.0,
                        };
                        (empty, 0.0, next, 0.0)
                    }
                    Some((vis, vf)) => {
                        next.hidden = false;
                        if vf >= p.strain_visibility {
                            next.strain = 0;
                            (vis, vf, next, vf)
                        } else {
                            next.strain += 1;
                            if next.strain > p.strain_limit {
                                next.binding = Binding::Phantom {
                                    mask: vis.clone(),
                                    score: vf,
                                };
                            }
                            (vis, vf, next, vf)
                        }
                    }
                }
            }
        };
        self.tracks.insert(track_id, next);
        self.record(track_id, vf);
        MaskObservation {
            track_id,
            mask,
            score,
            embedding: self.embedding(track_id, frame),
        }
    }
}

impl Segmenter for SynthSegmenter<'_> {
    fn add_prompt(&mut self, frame: usize, bbox: &BBox, track_id: TrackId) -> Result<MaskObservation> {
        let objects = self.gt.frames.get(frame).map(|f| f.objects.as_slice()).unwrap_or(&[]);
        let best = objects
            .iter()
            .map(|o| (bbox_mask_iou(bbox, &o.mask), o))
            .fold(None::<(f64, &super::scene::GtObject)>, |acc, (v, o)| match acc {
                Some((bv, _)) if bv >= v => acc,
                _ => Some((v, o)),
            });
        let (binding, mask, score, vf) = match best {
            Some((v, o)) if v >= self.params.binding_floor => {
                let vf = o.visible_fraction();
                (Binding::Object(o.gt_id), o.mask.clone(), vf, vf)
            }
            _ => {
                let mask = BinaryMask::from_box(self.gt.width, self.gt.height, bbox)?;
                let score = self.params.phantom_score;
                (
                    Binding::Phantom {
                        mask: mask.clone(),
                        score,
                    },
                    mask,
                    score,
                    0.0,
                )
            }
        };
        let history = self
            .tracks
            .remove(&track_id)
            .map(|t| t.history)
            .unwrap_or_default();
        self.tracks.insert(
            track_id,
            SegTrack {
                binding,
                strain: 0,
                hidden: false,
                history,
            },
        );
        self.record(track_id, vf);
        let obs = MaskObservation {
            track_id,
            mask,
            score,
            embedding: self.embedding(track_id, frame),
        };
        self.prompted.insert(track_id, (frame, obs.clone()));
        Ok(obs)
    }

    fn propagate(&mut self, frame: usize) -> Result<Vec<MaskObservation>> {
        let ids: Vec<TrackId> = self.tracks.keys().copied().collect();
        let mut out = Vec::with_capacity(ids.len());
        for id in ids {
            match self.prompted.get(&id) {
                Some((f, obs)) if *f == frame => out.push(obs.clone()),
                _ => out.push(self.step(id, frame)),
            }
        }
        self.prompted.retain(|_, (f, _)| *f == frame);
        Ok(out)
    }

    fn drop_track(&mut self, track_id: TrackId) -> Result<()> {
        self.prompted.remove(&track_id);
        self.tracks
            .remove(&track_id)
            .map(|_| ())
            .ok_or(Error::UnknownTrackId(track_id))
    }

    fn set_memory_window(&mut self, t_w: usize) -> Result<()> {
        self.t_w = t_w;
        Ok(())
    }
}
