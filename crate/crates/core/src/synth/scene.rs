use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BBox, BinaryMask};
use crate::metrics::EvalObject;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    #[default]
    Rect,
    Ellipse,
}

/// Center trajectory of an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathSpec {
    /// `start + velocity * (frame - enter_frame)`.
    Linear { start: [f64; 2], velocity: [f64; 2] },
    /// `[frame, x, y]` knots, linearly interpolated and held constant
    /// outside the first and last knot.
    Waypoints { points: Vec<[f64; 3]> },
}

impl PathSpec {
    pub fn position(&self, frame: usize, enter_frame: usize) -> (f64, f64) {
        match self {
            PathSpec::Linear { start, velocity } => {
                let dt = frame as f64 - enter_frame as f64;
                (start[0] + velocity[0] * dt, start[1] + velocity[1] * dt)
            }
            PathSpec::Waypoints { points } => {
                let f = frame as f64;
                let first = points[0];
                if f <= first[0] {
                    return (first[1], first[2]);
                }
                for pair in points.windows(2) {
                    let (a, b) = (pair[0], pair[1]);
                    if f <= b[0] {
                        let u = if b[0] > a[0] { (f - a[0]) / (b[0] - a[0]) } else { 1.0 };
                        return (a[1] + u * (b[1] - a[1]), a[2] + u * (b[2] - a[2]));
                    }
                }
                let last = points[points.len() - 1];
                (last[1], last[2])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    #[serde(default)]
    pub shape: Shape,
    /// Width and height in pixels at `enter_frame`.
    pub size: [f64; 2],
    pub class_id: u32,
    pub path: PathSpec,
    #[serde(default)]
    pub enter_frame: usize,
    /// Last frame the object exists (inclusive); defaults to the last frame.
    #[serde(default)]
    pub exit_frame: Option<usize>,
    /// Larger values are closer to the camera.
    #[serde(default)]
    pub depth: i32,
    /// Relative size change per frame.
    #[serde(default)]
    pub scale_per_frame: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub det_dropout_prob: f64,
    /// Each box coordinate moves by a uniform offset in `[-j, j]`.
    pub det_jitter_px: f64,
    /// Mean number of spurious boxes per frame.
    pub false_positive_rate: f64,
    pub score_noise_sigma: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            det_dropout_prob: 0.0,
            det_jitter_px: 0.0,
            false_positive_rate: 0.0,
            score_noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub n_frames: usize,
    pub objects: Vec<ObjectSpec>,
    /// Static boxes drawn in front of every object.
    #[serde(default)]
    pub occluders: Vec<BBox>,
    #[serde(default)]
    pub noise: NoiseParams,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(format!("{}: {msg}", self.name)));
        if self.width == 0 || self.height == 0 {
            return bad(format!("frame size {}x{} is empty", self.width, self.height));
        }
        let n = &self.noise;
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(n.det_dropout_prob) {
            return bad("det_dropout_prob outside [0, 1]".into());
        }
        if !(n.det_jitter_px >= 0.0 && n.false_positive_rate >= 0.0 && n.score_noise_sigma >= 0.0) {
            return bad("noise magnitudes must be non-negative".into());
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !(o.size[0] > 0.0 && o.size[1] > 0.0) {
                return bad(format!("object {i} has non-positive size"));
            }
            if o.class_id == 0 {
                return bad(format!("object {i} has class 0"));
            }
            let exit = self.exit_frame(o);
            if o.enter_frame > exit || exit >= self.n_frames.max(1) {
                return bad(format!("object {i} lives on frames {}..={exit}", o.enter_frame));
            }
            if let PathSpec::Waypoints { points } = &o.path {
                if points.is_empty() {
                    return bad(format!("object {i} has no waypoints"));
                }
                if points.windows(2).any(|p| p[1][0] < p[0][0]) {
                    return bad(format!("object {i} waypoints are not sorted by frame"));
                }
            }
            let final_scale = 1.0 + o.scale_per_frame * (exit - o.enter_frame) as f64;
            if final_scale.is_nan() || final_scale <= 0.0 {
                return bad(format!("object {i} shrinks to nothing"));
            }
        }
        Ok(())
    }

    fn exit_frame(&self, o: &ObjectSpec) -> usize {
        o.exit_frame.unwrap_or(self.n_frames.saturating_sub(1))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SceneSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    /// The object's full footprint on `frame`, clipped to the frame, or
    /// `None` if it does not exist then.
    pub fn footprint(&self, index: usize, frame: usize) -> Result<Option<BinaryMask>> {
        let o = &self.objects[index];
        if frame < o.enter_frame || frame > self.exit_frame(o) {
            return Ok(None);
        }
        let (cx, cy) = o.path.position(frame, o.enter_frame);
        let s = 1.0 + o.scale_per_frame * (frame - o.enter_frame) as f64;
        let (hw, hh) = (o.size[0] * s / 2.0, o.size[1] * s / 2.0);
        let mask = match o.shape {
            Shape::Rect => match BBox::new(cx - hw, cy - hh, cx + hw, cy + hh) {
                Ok(b) => BinaryMask::from_box(self.width, self.height, &b)?,
                Err(_) => return Ok(None),
            },
            Shape::Ellipse => BinaryMask::from_fn(self.width, self.height, |r, c| {
                let dx = (c as f64 + 0.5 - cx) / hw;
                let dy = (r as f64 + 0.5 - cy) / hh;
                dx * dx + dy * dy <= 1.0
            })?,
        };
        Ok((!mask.is_empty()).then_some(mask))
    }
}

/// One visible ground-truth object on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GtObject {
    /// 1-based object index within the scene.
    pub gt_id: u32,
    pub class_id: u32,
    /// Visible pixels only.
    pub mask: BinaryMask,
    /// Pixels of the unoccluded footprint inside the frame.
    pub full_area: u64,
}

impl GtObject {
    pub fn visible_fraction(&self) -> f64 {
        if self.full_area == 0 {
            0.0
        } else {
            self.mask.area() as f64 / self.full_area as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GtFrame {
    /// Sorted by `gt_id`; masks are pairwise disjoint and non-empty.
    pub objects: Vec<GtObject>,
}

impl GtFrame {
    pub fn get(&self, gt_id: u32) -> Option<&GtObject> {
        self.objects.iter().find(|o| o.gt_id == gt_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtSequence {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<GtFrame>,
}

impl GtSequence {
    /// Ground truth as evaluation objects, keyed by `gt_id`.
    pub fn eval_objects(&self) -> Vec<Vec<EvalObject>> {
        self.frames
            .iter()
            .map(|f| {
                f.objects
                    .iter()
                    .map(|o| EvalObject::mask(o.gt_id, o.class_id, o.mask.clone()))
                    .collect()
            })
            .collect()
    }
}

/// Rasterizes every object per frame. Nearer objects and occluders hide
/// farther ones; objects with nothing visible are left out of that frame.
pub fn generate_scene(spec: &SceneSpec) -> Result<GtSequence> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut occluder_mask = BinaryMask::new(w, h)?;
    for b in &spec.occluders {
        occluder_mask.or_assign(&BinaryMask::from_box(w, h, b)?)?;
    }
    // nearest first; ties go to the later object
    let mut order: Vec<usize> = (0..spec.objects.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse((spec.objects[i].depth, i)));

    let mut frames = Vec::with_capacity(spec.n_frames);
    for f in 0..spec.n_frames {
        let mut covered = occluder_mask.clone();
        let mut objects = Vec::new();
        for &i in &order {
            let Some(full) = spec.footprint(i, f)? else {
                continue;
            };
            let mut visible = full.clone();
            visible.subtract_assign(&covered)?;
            covered.or_assign(&full)?;
            if !visible.is_empty() {
                objects.push(GtObject {
                    gt_id: i as u32 + 1,
                    class_id: spec.objects[i].class_id,
                    mask: visible,
                    full_area: full.area(),
                });
            }
        }
        objects.sort_by_key(|o| o.gt_id);
        frames.push(GtFrame { objects });
    }
    Ok(GtSequence {
        width: w,
        height: h,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x: f64, y: f64, size: f64) -> ObjectSpec {
        ObjectSpec {
            shape: Shape::Rect,
            size: [size, size],
            class_id: 1,
            path: PathSpec::Linear {
                start: [x, y],
                velocity: [0.0, 0.0],
            },
            enter_frame: 0,
            exit_frame: None,
            depth: 0,
            scale_per_frame: 0.0,
        }
    }

    fn spec(objects: Vec<ObjectSpec>, occluders: Vec<BBox>) -> SceneSpec {
        SceneSpec {
            name: "t".into(),
            width: 40,
            height: 30,
            n_frames: 5,
            objects,
            occluders,
            noise: NoiseParams::default(),
            seed: 0,
        }
    }

    #[test]
    fn static_rect() {
        let gt = generate_scene(&spec(vec![rect(10.0, 10.0, 10.0)], vec![])).unwrap();
        assert_eq!(gt.frames.len(), 5);
        for f in &gt.frames {
            assert_eq!(f.objects.len(), 1);
            assert_eq!(f.objects[0].mask.area(), 100);
            assert_eq!(f.objects[0].mask, gt.frames[0].objects[0].mask);
        }
    }

    #[test]
    fn occluded_rect() {
        let mut obj = rect(10.0, 10.0, 10.0);
        obj.path = PathSpec::Waypoints {
            points: vec![[0.0, 10.0, 10.0], [3.0, 30.0, 10.0]],
        };
        // fully hidden at frame 3 (x 25..35), half hidden at frame 0
        let occ = vec![BBox::new(10.0, 0.0, 40.0, 30.0).unwrap()];
        let gt = generate_scene(&spec(vec![obj], occ)).unwrap();
        let o = &gt.frames[0].objects[0];
        assert_eq!(o.mask.area(), 100 - 50);
        assert_eq!(o.visible_fraction(), 0.5);
        assert!(gt.frames[3].objects.is_empty());
    }

    #[test]
    fn nearer_object_hides_farther() {
        let back = rect(10.0, 10.0, 10.0);
        let mut front = rect(14.0, 10.0, 10.0);
        front.depth = 1;
        let gt = generate_scene(&spec(vec![back, front], vec![])).unwrap();
        let f = &gt.frames[0];
        assert_eq!(f.objects[0].mask.area(), 40);
        assert_eq!(f.objects[1].mask.area(), 100);
        assert!(!f.objects[0].mask.overlaps(&f.objects[1].mask).unwrap());
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = spec(vec![rect(1.0, 1.0, 2.0)], vec![]);
        s.objects[0].exit_frame = Some(9);
        assert!(matches!(s.validate(), Err(Error::InvalidSpec(_))));
        let mut s = spec(vec![rect(1.0, 1.0, 2.0)], vec![]);
        s.noise.det_dropout_prob = 1.5;
        assert!(s.validate().is_err());
        assert!(SceneSpec::from_json("{}").is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = spec(vec![rect(5.0, 5.0, 4.0)], vec![BBox::new(0.0, 0.0, 3.0, 3.0).unwrap()]);
        assert_eq!(SceneSpec::from_json(&s.to_json()).unwrap(), s);
    }
}
