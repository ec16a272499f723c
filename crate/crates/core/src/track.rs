//! Track lifecycle: quality states, the consecutive-Low removal rule and the
//! bounded memory bank.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::mask::BinaryMask;

pub type TrackId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QualityState {
    Low,
    Uncertain,
    High,
}

/// High iff `score > tau_h`, Low iff `score <= tau_l`, Uncertain otherwise.
pub fn classify_state(score: f64, cfg: &TrackerConfig) -> QualityState {
    if score > cfg.tau_h {
        QualityState::High
    } else if score > cfg.tau_l {
        QualityState::Uncertain
    } else {
        QualityState::Low
    }
}

/// One segmenter output: mask, confidence, opaque memory payload, identity.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskObservation {
    pub track_id: TrackId,
    pub mask: BinaryMask,
    pub score: f64,
    pub embedding: Vec<u8>,
}

impl MaskObservation {
    /// Placeholder for a live track the segmenter returned nothing for.
    pub fn missing(track_id: TrackId, width: usize, height: usize) -> Result<Self> {
        Ok(Self {
            track_id,
            mask: BinaryMask::new(width, height)?,
            score: 0.0,
            embedding: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryEntry {
    pub frame: usize,
    pub embedding: Vec<u8>,
}

/// Keeps the most recent `t_w` items; `t_w == 0` keeps everything.
pub fn memory_retain<T: Clone>(memory: &[T], t_w: usize) -> Vec<T> {
    if t_w == 0 || memory.len() <= t_w {
        return memory.to_vec();
    }
    memory[memory.len() - t_w..].to_vec()
}

fn evict_to_window<T>(memory: &mut VecDeque<T>, t_w: usize) {
    if t_w > 0 {
        while memory.len() > t_w {
            memory.pop_front();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackUpdate {
    pub new_state: QualityState,
    pub memory_pushed: bool,
    pub removed: bool,
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: TrackId,
    pub class_id: u32,
    pub low_count: u32,
    pub state: QualityState,
    pub last_mask: BinaryMask,
    pub last_score: f64,
    pub memory: VecDeque<MemoryEntry>,
    pub born_frame: usize,
    pub alive: bool,
}

impl Track {
    /// A fresh track; its first observation still has to be applied.
    pub fn new(id: TrackId, class_id: u32, born_frame: usize, width: usize, height: usize) -> Result<Self> {
        Ok(Self {
            id,
            class_id,
            low_count: 0,
            state: QualityState::Uncertain,
            last_mask: BinaryMask::new(width, height)?,
            last_score: 0.0,
            memory: VecDeque::new(),
            born_frame,
            alive: true,
        })
    }

    /// Quality-gated update. High pushes the embedding into memory, any
    /// non-Low state resets the Low streak, and the `n_tries`-th consecutive
    /// Low removes the track. With quality assessment disabled every
    /// observation is memorized and nothing is removed.
    pub fn apply_observation(
        &mut self,
        obs: &MaskObservation,
        frame: usize,
        cfg: &TrackerConfig,
    ) -> Result<TrackUpdate> {
        if obs.track_id != self.id {
            return Err(Error::IdentityMismatch {
                expected: self.id,
                got: obs.track_id,
            });
        }
        if !self.alive {
            return Err(Error::UnknownTrackId(self.id));
        }
        let state = classify_state(obs.score, cfg);
        self.state = state;
        self.last_score = obs.score;

        let (push, removed) = if cfg.enable_tqa {
            match state {
                QualityState::High => {
                    self.low_count = 0;
                    (true, false)
                }
                QualityState::Uncertain => {
                    self.low_count = 0;
                    (false, false)
                }
                QualityState::Low => {
                    self.low_count += 1;
                    (false, self.low_count >= cfg.n_tries)
                }
            }
        } else {
            if state == QualityState::Low {
                self.low_count = (self.low_count + 1).min(cfg.n_tries);
            } else {
                self.low_count = 0;
            }
            (true, false)
        };

        if state != QualityState::Low || !cfg.enable_tqa {
            self.last_mask = obs.mask.clone();
        }
        let memory_pushed = push && self.memory.back().is_none_or(|m| m.frame < frame);
        if memory_pushed {
            self.memory.push_back(MemoryEntry {
                frame,
                embedding: obs.embedding.clone(),
            });
            evict_to_window(&mut self.memory, cfg.t_w);
        }
        if removed {
            self.alive = false;
        }
        Ok(TrackUpdate {
            new_state: state,
            memory_pushed,
            removed,
        })
    }

    pub fn memory_bytes(&self) -> usize {
        self.memory.iter().map(|m| m.embedding.len()).sum()
    }
}

/// Live tracks plus the id counter. Ids are handed out in increasing order
/// and never reused, including after removal.
#[derive(Debug, Clone)]
pub struct TrackStore {
    tracks: BTreeMap<TrackId, Track>,
    retired: BTreeSet<TrackId>,
    next_id: TrackId,
}

impl Default for TrackStore {
    fn default() -> Self {
        Self::new()
    }
}

impl TrackStore {
    pub fn new() -> Self {
        Self {
            tracks: BTreeMap::new(),
            retired: BTreeSet::new(),
            next_id: 1,
        }
    }

    pub fn next_id(&self) -> TrackId {
        self.next_id
    }

    pub fn allocate_id(&mut self) -> TrackId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub fn insert(&mut self, track: Track) {
        assert!(!self.retired.contains(&track.id), "track id {} was retired", track.id);
        self.next_id = self.next_id.max(track.id + 1);
        self.tracks.insert(track.id, track);
    }

    pub fn get(&self, id: TrackId) -> Option<&Track> {
        self.tracks.get(&id)
    }

    pub fn get_mut(&mut self, id: TrackId) -> Option<&mut Track> {
        self.tracks.get_mut(&id)
    }

    /// Live tracks in id order.
    pub fn live(&self) -> impl Iterator<Item = &Track> {
        self.tracks.values()
    }

    pub fn ids(&self) -> Vec<TrackId> {
        self.tracks.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn retire(&mut self, id: TrackId) -> Option<Track> {
        let t = self.tracks.remove(&id)?;
        self.retired.insert(id);
        Some(t)
    }

    pub fn is_retired(&self, id: TrackId) -> bool {
        self.retired.contains(&id)
    }

    /// Total retained memory entries across live tracks.
    pub fn memory_entries(&self) -> usize {
        self.tracks.values().map(|t| t.memory.len()).sum()
    }

    pub fn memory_bytes(&self) -> usize {
        self.tracks.values().map(Track::memory_bytes).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(id: TrackId, score: f64) -> MaskObservation {
        let mut mask = BinaryMask::new(4, 4).unwrap();
        mask.set(1, 1, true);
        MaskObservation {
            track_id: id,
            mask,
            score,
            embedding: vec![1, 2],
        }
    }

    fn track() -> Track {
        Track::new(1, 1, 0, 4, 4).unwrap()
    }

    #[test]
    fn state_boundaries() {
        let c = TrackerConfig::default();
        assert_eq!(classify_state(0.95, &c), QualityState::High);
        assert_eq!(classify_state(0.70, &c), QualityState::Uncertain);
        assert_eq!(classify_state(0.10, &c), QualityState::Low);
        assert_eq!(classify_state(0.100001, &c), QualityState::Uncertain);
        assert_eq!(classify_state(0.0, &c), QualityState::Low);
        assert_eq!(classify_state(1.0, &c), QualityState::High);
    }

    #[test]
    fn removal_on_fifth_low() {
        let c = TrackerConfig::default();
        let mut t = track();
        for f in 0..4 {
            let u = t.apply_observation(&obs(1, 0.05), f, &c).unwrap();
            assert!(!u.removed);
        }
        assert_eq!(t.low_count, 4);
        assert!(t.alive);
        let u = t.apply_observation(&obs(1, 0.05), 4, &c).unwrap();
        assert!(u.removed);
        assert!(!t.alive);
    }

    #[test]
    fn non_low_resets_streak() {
        let c = TrackerConfig::default();
        let mut t = track();
        for (f, s) in [0.05, 0.05, 0.9, 0.05].into_iter().enumerate() {
            t.apply_observation(&obs(1, s), f, &c).unwrap();
        }
        assert_eq!(t.low_count, 1);
        assert!(t.alive);
        t.apply_observation(&obs(1, 0.5), 4, &c).unwrap();
        assert_eq!(t.low_count, 0);
    }

    #[test]
    fn memory_only_on_high() {
        let c = TrackerConfig::default();
        let mut t = track();
        assert!(t.apply_observation(&obs(1, 0.9), 0, &c).unwrap().memory_pushed);
        assert!(!t.apply_observation(&obs(1, 0.5), 1, &c).unwrap().memory_pushed);
        assert!(!t.apply_observation(&obs(1, 0.05), 2, &c).unwrap().memory_pushed);
        assert_eq!(t.memory.len(), 1);
    }

    #[test]
    fn last_mask_frozen_through_low() {
        let c = TrackerConfig::default();
        let mut t = track();
        t.apply_observation(&obs(1, 0.9), 0, &c).unwrap();
        let kept = t.last_mask.clone();
        let mut low = obs(1, 0.05);
        low.mask = BinaryMask::new(4, 4).unwrap();
        t.apply_observation(&low, 1, &c).unwrap();
        assert_eq!(t.last_mask, kept);
    }

    #[test]
    fn identity_mismatch() {
        let mut t = track();
        let err = t
            .apply_observation(&obs(2, 0.9), 0, &TrackerConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::IdentityMismatch { expected: 1, got: 2 }));
    }

    #[test]
    fn window_caps_memory() {
        let c = TrackerConfig::default().with_window(16);
        let mut t = track();
        for f in 0..20 {
            t.apply_observation(&obs(1, 0.9), f, &c).unwrap();
            assert!(t.memory.len() <= 16);
        }
        let frames: Vec<usize> = t.memory.iter().map(|m| m.frame).collect();
        assert_eq!(frames, (4..20).collect::<Vec<_>>());
    }

    #[test]
    fn retain_suffix() {
        let states: Vec<u32> = (1..=20).collect();
        assert_eq!(memory_retain(&states, 16), (5..=20).collect::<Vec<_>>());
        let few: Vec<u32> = (1..=10).collect();
        assert_eq!(memory_retain(&few, 16), few);
        assert_eq!(memory_retain(&states, 0), states);
    }

    #[test]
    fn disabled_quality_gate_never_removes() {
        let c = TrackerConfig::baseline();
        let mut t = track();
        for f in 0..12 {
            let u = t.apply_observation(&obs(1, 0.0), f, &c).unwrap();
            assert!(u.memory_pushed && !u.removed);
        }
        assert!(t.alive);
        assert!(t.low_count <= c.n_tries);
    }

    #[test]
    fn store_never_reuses_ids() {
        let mut s = TrackStore::new();
        let a = s.allocate_id();
        s.insert(Track::new(a, 1, 0, 2, 2).unwrap());
        s.retire(a);
        let b = s.allocate_id();
        assert!(b > a);
        assert!(s.is_retired(a));
    }
}
