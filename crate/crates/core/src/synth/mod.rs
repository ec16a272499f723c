//! Deterministic synthetic world: scripted scenes, a noisy detector and a
//! segmenter whose confidence follows object visibility.

pub mod corpus;
pub mod detect;
pub mod scene;
pub mod segment;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use corpus::{perfect_world_corpus, single_object_scene, standard_corpus};
pub use detect::{synth_detect, SynthDetector};
pub use scene::{generate_scene, GtFrame, GtObject, GtSequence, NoiseParams, ObjectSpec, PathSpec, SceneSpec, Shape};
pub use segment::{SegmenterParams, SynthSegmenter};

use crate::config::TrackerConfig;
use crate::error::Result;
use crate::pipeline::{run_sequence, RunOutput};

/// Independent stream per `(seed, frame, purpose)`.
pub(crate) fn frame_rng(seed: u64, frame: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((frame as u64) << 16) ^ purpose);
    rng
}

/// Tracks a generated scene with the synthetic detector and segmenter.
pub fn run_scene(spec: &SceneSpec, gt: &GtSequence, cfg: &TrackerConfig) -> Result<RunOutput> {
    let mut det = SynthDetector::new(gt, spec.noise.clone(), spec.seed);
    let mut seg = SynthSegmenter::new(gt);
    run_sequence(gt.width, gt.height, gt.frames.len(), &mut det, &mut seg, cfg)
}
