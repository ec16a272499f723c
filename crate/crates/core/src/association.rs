//! Detection gating, overlap filtering against the previous frame's masks,
//! center-distance matching and prompt construction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{AssociationRows, OverlapMode, TrackerConfig};
use crate::hungarian::{hungarian_assign, Assignment};
use crate::mask::{bbox_mask_iou, mask_centroid, BBox, BinaryMask};
use crate::track::{QualityState, Track, TrackId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
    pub class_id: u32,
}

/// Keeps detections scoring strictly above `min_conf`, in input order.
pub fn filter_detections(dets: &[Detection], min_conf: f64) -> Vec<Detection> {
    dets.iter().filter(|d| d.score > min_conf).cloned().collect()
}

/// Overlap between a box and the previous frame's masks.
pub fn overlap_value(
    bbox: &BBox,
    union_mask: &BinaryMask,
    track_masks: &[&BinaryMask],
    mode: OverlapMode,
) -> f64 {
    match mode {
        OverlapMode::Union => bbox_mask_iou(bbox, union_mask),
        OverlapMode::Local => track_masks
            .iter()
            .map(|m| bbox_mask_iou(bbox, m))
            .fold(0.0, f64::max),
    }
}

/// Splits detections into candidates (`v >= tau_v(class)`) and fresh
/// proposals (`v < tau_v(class)`); both keep input order.
pub fn overlap_split(
    dets: &[Detection],
    union_mask: &BinaryMask,
    track_masks: &[&BinaryMask],
    cfg: &TrackerConfig,
) -> (Vec<Detection>, Vec<Detection>) {
    dets.iter().cloned().partition(|d| {
        overlap_value(&d.bbox, union_mask, track_masks, cfg.overlap_mode) >= cfg.tau_v(d.class_id)
    })
}

/// Euclidean distance from each track's mask centroid to each box center.
/// Tracks with an empty mask get a row of `+inf`.
pub fn center_cost(tracks: &[&Track], dets: &[Detection]) -> Vec<Vec<f64>> {
    tracks
        .iter()
        .map(|t| match mask_centroid(&t.last_mask) {
            Some((mx, my)) => dets
                .iter()
                .map(|d| {
                    let (bx, by) = d.bbox.center();
                    (mx - bx).hypot(my - by)
                })
                .collect(),
            None => vec![f64::INFINITY; dets.len()],
        })
        .collect()
}

/// Marks every pair farther apart than `max_distance` as unmatchable.
pub fn gate_costs(cost: &mut [Vec<f64>], max_distance: f64) {
    for v in cost.iter_mut().flatten() {
        if *v > max_distance {
            *v = f64::INFINITY;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reinforcement {
    pub track_id: TrackId,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Initialization {
    pub track_id: TrackId,
    pub bbox: BBox,
    pub class_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscardReason {
    /// Matched to a track that is not Uncertain.
    MatchedSettledTrack,
    /// Overlaps existing masks but matched no track.
    UnmatchedCandidate,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PromptSet {
    pub reinforcements: Vec<Reinforcement>,
    pub initializations: Vec<Initialization>,
    pub discarded: Vec<(Detection, DiscardReason)>,
}

/// Turns a track/candidate assignment and the fresh proposals into
/// prompts. Only matches whose track is Uncertain reinforce; each fresh
/// proposal initializes a track with the next id from `next_id`.
pub fn build_prompt_set(
    assignment: &Assignment,
    row_ids: &[TrackId],
    track_states: &BTreeMap<TrackId, QualityState>,
    candidates: &[Detection],
    fresh: &[Detection],
    next_id: &mut TrackId,
) -> PromptSet {
    let mut set = PromptSet::default();
    let mut matched = vec![false; candidates.len()];
    for &(row, col) in &assignment.pairs {
        matched[col] = true;
        let id = row_ids[row];
        let det = &candidates[col];
        if track_states.get(&id) == Some(&QualityState::Uncertain) {
            set.reinforcements.push(Reinforcement {
                track_id: id,
                bbox: det.bbox,
            });
        } else {
            set.discarded
                .push((det.clone(), DiscardReason::MatchedSettledTrack));
        }
    }
    set.reinforcements.sort_by_key(|r| r.track_id);
    for (det, _) in candidates.iter().zip(&matched).filter(|(_, m)| !**m) {
        set.discarded
            .push((det.clone(), DiscardReason::UnmatchedCandidate));
    }
    for det in fresh {
        set.initializations.push(Initialization {
            track_id: *next_id,
            bbox: det.bbox,
            class_id: det.class_id,
        });
        *next_id += 1;
    }
    set
}

/// The whole association stage for one frame: overlap split, gated
/// center-distance matching and prompt construction. `tracks` are the
/// live tracks after the previous frame, in id order. With `enable_oaf`
/// off only the overlap gate runs and nothing is reinforced.
pub fn associate(
    tracks: &[&Track],
    dets: &[Detection],
    union_mask: &BinaryMask,
    cfg: &TrackerConfig,
    next_id: &mut TrackId,
) -> PromptSet {
    let track_masks: Vec<&BinaryMask> = tracks.iter().map(|t| &t.last_mask).collect();
    let (candidates, fresh) = overlap_split(dets, union_mask, &track_masks, cfg);

    if !cfg.enable_oaf {
        let assignment = Assignment::empty();
        return build_prompt_set(&assignment, &[], &BTreeMap::new(), &candidates, &fresh, next_id);
    }

    let rows: Vec<&Track> = match cfg.association_rows {
        AssociationRows::AllLive => tracks.to_vec(),
        AssociationRows::UncertainOnly => tracks
            .iter()
            .copied()
            .filter(|t| t.state == QualityState::Uncertain)
            .collect(),
    };
    let row_ids: Vec<TrackId> = rows.iter().map(|t| t.id).collect();
    let states: BTreeMap<TrackId, QualityState> = rows.iter().map(|t| (t.id, t.state)).collect();

    let mut cost = center_cost(&rows, &candidates);
    let (w, h) = union_mask.dims();
    let gate = cfg
        .max_center_distance
        .unwrap_or_else(|| (w as f64).hypot(h as f64));
    gate_costs(&mut cost, gate);
    let assignment = hungarian_assign(&cost);
    build_prompt_set(&assignment, &row_ids, &states, &candidates, &fresh, next_id)
}
