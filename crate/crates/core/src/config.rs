use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CLASS_CAR: u32 = 1;
pub const CLASS_PEDESTRIAN: u32 = 2;
pub const CLASS_IGNORE: u32 = 10;

/// How the overlap between a detection box and the previous frame's masks
/// is measured before association.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMode {
    /// IoU of the box against the union of all live masks.
    Union,
    /// IoU of the box against the single live mask that overlaps it best.
    #[default]
    Local,
}

/// Which live tracks take part in center-distance matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AssociationRows {
    /// Every live track competes for candidates; only matches with
    /// uncertain tracks become prompts.
    #[default]
    AllLive,
    /// Only uncertain tracks are matched.
    UncertainOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Scores strictly above this are High.
    pub tau_h: f64,
    /// Scores at or below this are Low.
    pub tau_l: f64,
    /// Consecutive Low frames before a track is removed.
    pub n_tries: u32,
    /// Memory window in states; 0 keeps the full history.
    pub t_w: usize,
    /// Detections must score strictly above this.
    pub det_conf: f64,
    pub tau_v_by_class: BTreeMap<u32, f64>,
    /// Overlap threshold for classes missing from `tau_v_by_class`.
    pub default_tau_v: f64,
    pub enable_tqa: bool,
    pub enable_oaf: bool,
    pub overlap_mode: OverlapMode,
    pub association_rows: AssociationRows,
    /// Center-distance gate in pixels; `None` uses the frame diagonal.
    pub max_center_distance: Option<f64>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            tau_h: 0.70,
            tau_l: 0.10,
            n_tries: 5,
            t_w: 16,
            det_conf: 0.50,
            tau_v_by_class: BTreeMap::from([(CLASS_CAR, 0.6), (CLASS_PEDESTRIAN, 0.85)]),
            default_tau_v: 0.6,
            enable_tqa: true,
            enable_oaf: true,
            overlap_mode: OverlapMode::default(),
            association_rows: AssociationRows::default(),
            max_center_distance: None,
        }
    }
}

impl TrackerConfig {
    /// Init-only baseline: no quality gating, no reinforcement.
    pub fn baseline() -> Self {
        Self {
            enable_tqa: false,
            enable_oaf: false,
            ..Self::default()
        }
    }

    pub fn with_ablation(mut self, tqa: bool, oaf: bool) -> Self {
        self.enable_tqa = tqa;
        self.enable_oaf = oaf;
        self
    }

    pub fn with_window(mut self, t_w: usize) -> Self {
        self.t_w = t_w;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.tau_l) && unit(self.tau_h) && self.tau_l < self.tau_h) {
            return Err(Error::Config(format!(
                "thresholds must satisfy 0 <= tau_l < tau_h <= 1 (tau_l={}, tau_h={})",
                self.tau_l, self.tau_h
            )));
        }
        if self.n_tries < 1 {
            return Err(Error::Config("n_tries must be at least 1".into()));
        }
        if !unit(self.det_conf) {
            return Err(Error::Config(format!("det_conf {} outside [0, 1]", self.det_conf)));
        }
        if !unit(self.default_tau_v) {
            return Err(Error::Config("default_tau_v outside [0, 1]".into()));
        }
        if let Some((class, v)) = self.tau_v_by_class.iter().find(|(_, v)| !unit(**v)) {
            return Err(Error::Config(format!("tau_v for class {class} is {v}, outside [0, 1]")));
        }
        if let Some(d) = self.max_center_distance {
            if d.is_nan() || d <= 0.0 {
                return Err(Error::Config("max_center_distance must be positive".into()));
            }
        }
        Ok(())
    }

    /// Overlap threshold for a class. Unknown classes fall back to
    /// `default_tau_v` with a warning.
    pub fn tau_v(&self, class_id: u32) -> f64 {
        match self.tau_v_by_class.get(&class_id) {
            Some(&v) => v,
            None => {
                log::warn!(
                    "no tau_v for class {class_id}, using default {}",
                    self.default_tau_v
                );
                self.default_tau_v
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrackerConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrackerConfig::default();
        assert_eq!((c.tau_h, c.tau_l, c.n_tries, c.t_w, c.det_conf), (0.70, 0.10, 5, 16, 0.50));
        assert_eq!(c.tau_v(CLASS_CAR), 0.6);
        assert_eq!(c.tau_v(CLASS_PEDESTRIAN), 0.85);
        assert_eq!(c.tau_v(7), 0.6);
        c.validate().unwrap();
    }

    #[test]
    fn json_partial_and_unknown_keys() {
        let c = TrackerConfig::from_json(r#"{"t_w": 8, "tau_v_by_class": {"1": 0.5}}"#).unwrap();
        assert_eq!(c.t_w, 8);
        assert_eq!(c.tau_v(CLASS_CAR), 0.5);
        assert_eq!(c.tau_h, 0.70);
        assert!(matches!(
            TrackerConfig::from_json(r#"{"tau_hh": 0.5}"#),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn rejects_inverted_thresholds() {
        let err = TrackerConfig::from_json(r#"{"tau_l": 0.8, "tau_h": 0.7}"#).unwrap_err();
        assert!(err.to_string().contains("tau_l < tau_h"));
        assert!(TrackerConfig::from_json(r#"{"tau_l": 0.7, "tau_h": 0.7}"#).is_err());
        assert!(TrackerConfig::from_json(r#"{"n_tries": 0}"#).is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let c = TrackerConfig::baseline().with_window(0);
        assert_eq!(TrackerConfig::from_json(&c.to_json()).unwrap(), c);
    }
}
