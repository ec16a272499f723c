use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::scene::{GtFrame, GtSequence, NoiseParams};
use super::frame_rng;
use crate::association::Detection;
use crate::config::{CLASS_CAR, CLASS_PEDESTRIAN};
use crate::error::Result;
use crate::mask::{mask_to_bbox, BBox};
use crate::segmenter::Detector;

const FP_PLACEMENT_TRIES: usize = 20;

/// Noisy detector output for one ground-truth frame. The same
/// `(seed, frame)` always gives the same detections.
pub fn synth_detect(
    gt_frame: &GtFrame,
    width: usize,
    height: usize,
    noise: &NoiseParams,
    seed: u64,
    frame: usize,
) -> Vec<Detection> {
    let mut rng = frame_rng(seed, frame, 0xde7);
    let score_noise = (noise.score_noise_sigma > 0.0)
        .then(|| Normal::new(0.0, noise.score_noise_sigma).expect("finite sigma"));
    let mut out = Vec::new();

    for obj in &gt_frame.objects {
        let dropped = rng.gen::<f64>() < noise.det_dropout_prob;
        let Some(tight) = mask_to_bbox(&obj.mask) else {
            continue;
        };
        let bbox = jitter(&tight, noise.det_jitter_px, width, height, &mut rng);
        let eps = score_noise.as_ref().map_or(0.0, |n| n.sample(&mut rng));
        if dropped {
            continue;
        }
        let Some(bbox) = bbox else { continue };
        out.push(Detection {
            bbox,
            score: (obj.visible_fraction() + eps).clamp(0.0, 1.0),
            class_id: obj.class_id,
        });
    }

    if noise.false_positive_rate > 0.0 {
        let n = Poisson::new(noise.false_positive_rate)
            .expect("positive rate")
            .sample(&mut rng) as usize;
        for _ in 0..n {
            if let Some(d) = spurious_box(gt_frame, width, height, &mut rng) {
                out.push(d);
            }
        }
    }
    out
}

fn jitter(b: &BBox, j: f64, width: usize, height: usize, rng: &mut ChaCha8Rng) -> Option<BBox> {
    let mut d = || if j > 0.0 { rng.gen_range(-j..=j) } else { 0.0 };
    let moved = BBox {
        x1: b.x1 + d(),
        y1: b.y1 + d(),
        x2: b.x2 + d(),
        y2: b.y2 + d(),
    };
    if moved.x1 >= moved.x2 || moved.y1 >= moved.y2 {
        return Some(*b);
    }
    moved.clamp(width, height)
}

/// A box clear of every visible object, or `None` if no free spot was
/// found.
fn spurious_box(gt_frame: &GtFrame, width: usize, height: usize, rng: &mut ChaCha8Rng) -> Option<Detection> {
    let class_id = if rng.gen_bool(0.5) { CLASS_CAR } else { CLASS_PEDESTRIAN };
    let score = rng.gen_range(0.5..=0.8);
    for _ in 0..FP_PLACEMENT_TRIES {
        let bw = rng.gen_range(8.0..=20.0f64).min(width as f64);
        let bh = rng.gen_range(8.0..=20.0f64).min(height as f64);
        let x1 = rng.gen_range(0.0..=(width as f64 - bw));
        let y1 = rng.gen_range(0.0..=(height as f64 - bh));
        let Ok(bbox) = BBox::new(x1, y1, x1 + bw, y1 + bh) else {
            continue;
        };
        let Some(rect) = bbox.to_pixel_rect(width, height) else {
            continue;
        };
        if gt_frame.objects.iter().all(|o| o.mask.area_in_rect(&rect) == 0) {
            return Some(Detection {
                bbox,
                score,
                class_id,
            });
        }
    }
    None
}

/// Detector emulator over a generated scene.
pub struct SynthDetector<'a> {
    gt: &'a GtSequence,
    noise: NoiseParams,
    seed: u64,
}

impl<'a> SynthDetector<'a> {
    pub fn new(gt: &'a GtSequence, noise: NoiseParams, seed: u64) -> Self {
        Self { gt, noise, seed }
    }
}

impl Detector for SynthDetector<'_> {
    fn detect(&mut self, frame: usize) -> Result<Vec<Detection>> {
        Ok(match self.gt.frames.get(frame) {
            Some(f) => synth_detect(f, self.gt.width, self.gt.height, &self.noise, self.seed, frame),
            None => Vec::new(),
        })
    }
}
