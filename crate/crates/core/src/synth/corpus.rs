//! Built-in scenes with fixed seeds, plus helpers to store a corpus as a
//! directory of JSON specs.

use std::path::Path;

use super::scene::{NoiseParams, ObjectSpec, PathSpec, SceneSpec, Shape};
use crate::config::{CLASS_CAR, CLASS_PEDESTRIAN};
use crate::error::{Error, Result};
use crate::mask::BBox;

const CAR: [f64; 2] = [40.0, 22.0];
const PED: [f64; 2] = [20.0, 44.0];

fn linear(class_id: u32, size: [f64; 2], start: [f64; 2], velocity: [f64; 2]) -> ObjectSpec {
    ObjectSpec {
        shape: Shape::Rect,
        size,
        class_id,
        path: PathSpec::Linear { start, velocity },
        enter_frame: 0,
        exit_frame: None,
        depth: 0,
        scale_per_frame: 0.0,
    }
}

fn lives(mut o: ObjectSpec, enter: usize, exit: usize) -> ObjectSpec {
    o.enter_frame = enter;
    o.exit_frame = Some(exit);
    o
}

fn depth(mut o: ObjectSpec, d: i32) -> ObjectSpec {
    o.depth = d;
    o
}

fn bar(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
    BBox::new(x1, y1, x2, y2).expect("valid occluder")
}

fn noise(dropout: f64, jitter: f64, fp_rate: f64, sigma: f64) -> NoiseParams {
    NoiseParams {
        det_dropout_prob: dropout,
        det_jitter_px: jitter,
        false_positive_rate: fp_rate,
        score_noise_sigma: sigma,
    }
}

/// A wide car in front sweeps across the upper band of a smaller car
/// moving the other way.
pub fn crossing_pair() -> SceneSpec {
    SceneSpec {
        name: "crossing_pair".into(),
        width: 200,
        height: 100,
        n_frames: 100,
        objects: vec![
            depth(linear(CLASS_CAR, [70.0, 22.0], [25.0, 50.0], [1.5, 0.0]), 1),
            linear(CLASS_CAR, [30.0, 26.0], [178.0, 65.0], [-1.5, 0.0]),
        ],
        occluders: vec![],
        noise: noise(0.0, 0.0, 0.0, 0.02),
        seed: 7,
    }
}

/// Pedestrians and a car pass behind a long low fence, then one of them
/// behind a pillar.
pub fn long_occlusion() -> SceneSpec {
    SceneSpec {
        name: "long_occlusion".into(),
        width: 240,
        height: 120,
        n_frames: 120,
        objects: vec![
            linear(CLASS_PEDESTRIAN, PED, [20.0, 50.0], [0.9, 0.0]),
            linear(CLASS_PEDESTRIAN, PED, [230.0, 52.0], [-0.6, 0.0]),
            linear(CLASS_CAR, CAR, [30.0, 95.0], [1.2, 0.0]),
        ],
        occluders: vec![bar(60.0, 57.0, 180.0, 74.0), bar(80.0, 80.0, 170.0, 91.0)],
        noise: noise(0.05, 0.0, 0.0, 0.02),
        seed: 11,
    }
}

/// Four lanes of cars at different speeds, overtaking with partial
/// overlap between neighbouring lanes, and two pedestrians on a sidewalk.
pub fn dense_parallel() -> SceneSpec {
    let mut objects = Vec::new();
    let lanes = [(30.0, 1.6), (46.0, 0.8), (62.0, 1.3), (78.0, 0.6)];
    for (i, &(y, v)) in lanes.iter().enumerate() {
        objects.push(depth(linear(CLASS_CAR, CAR, [25.0 + 20.0 * i as f64, y], [v, 0.0]), i as i32));
        objects.push(depth(linear(CLASS_CAR, CAR, [150.0 + 10.0 * i as f64, y], [v * 0.5, 0.0]), i as i32));
    }
    objects.push(linear(CLASS_PEDESTRIAN, PED, [30.0, 128.0], [0.7, 0.0]));
    objects.push(linear(CLASS_PEDESTRIAN, PED, [260.0, 128.0], [-0.6, 0.0]));
    SceneSpec {
        name: "dense_parallel".into(),
        width: 300,
        height: 160,
        n_frames: 90,
        objects,
        occluders: vec![],
        noise: noise(0.05, 0.3, 0.0, 0.02),
        seed: 21,
    }
}

/// Heavy detector dropout over objects that pass a partial occluder.
pub fn dropout_stress() -> SceneSpec {
    SceneSpec {
        name: "dropout_stress".into(),
        width: 220,
        height: 120,
        n_frames: 90,
        objects: vec![
            linear(CLASS_CAR, CAR, [25.0, 30.0], [1.5, 0.0]),
            linear(CLASS_PEDESTRIAN, PED, [190.0, 70.0], [-1.0, 0.0]),
            linear(CLASS_CAR, CAR, [190.0, 100.0], [-1.0, 0.0]),
        ],
        occluders: vec![bar(80.0, 34.0, 150.0, 44.0), bar(70.0, 78.0, 140.0, 95.0)],
        noise: noise(0.4, 0.3, 0.0, 0.03),
        seed: 31,
    }
}

/// Many spurious detections around a few objects, one of them passing a
/// partial occluder.
pub fn fp_storm() -> SceneSpec {
    SceneSpec {
        name: "fp_storm".into(),
        width: 240,
        height: 140,
        n_frames: 80,
        objects: vec![
            linear(CLASS_CAR, CAR, [30.0, 40.0], [1.5, 0.0]),
            linear(CLASS_PEDESTRIAN, PED, [200.0, 90.0], [-1.0, 0.0]),
            linear(CLASS_CAR, CAR, [120.0, 120.0], [0.5, 0.0]),
        ],
        occluders: vec![bar(70.0, 44.0, 170.0, 54.0), bar(60.0, 97.0, 160.0, 115.0)],
        noise: noise(0.05, 0.3, 3.0, 0.02),
        seed: 41,
    }
}

/// Objects entering and leaving through the frame borders at staggered
/// times.
pub fn enter_exit() -> SceneSpec {
    SceneSpec {
        name: "enter_exit".into(),
        width: 200,
        height: 120,
        n_frames: 120,
        objects: vec![
            lives(linear(CLASS_CAR, CAR, [-15.0, 30.0], [2.0, 0.0]), 0, 119),
            lives(linear(CLASS_CAR, CAR, [215.0, 60.0], [-1.5, 0.0]), 20, 119),
            lives(linear(CLASS_PEDESTRIAN, PED, [-8.0, 90.0], [1.0, 0.0]), 10, 119),
            lives(linear(CLASS_PEDESTRIAN, PED, [120.0, 90.0], [0.0, 0.0]), 40, 90),
        ],
        occluders: vec![],
        noise: noise(0.05, 0.3, 0.2, 0.02),
        seed: 51,
    }
}

/// Approaching objects that grow over time, one passing behind a low bar.
pub fn scale_change() -> SceneSpec {
    let mut car = linear(CLASS_CAR, [24.0, 14.0], [40.0, 40.0], [1.0, 0.3]);
    car.scale_per_frame = 0.01;
    let mut ped = linear(CLASS_PEDESTRIAN, [12.0, 28.0], [160.0, 60.0], [-0.8, 0.2]);
    ped.scale_per_frame = 0.008;
    SceneSpec {
        name: "scale_change".into(),
        width: 220,
        height: 140,
        n_frames: 90,
        objects: vec![car, ped],
        occluders: vec![],
        noise: noise(0.05, 0.3, 0.1, 0.02),
        seed: 61,
    }
}

/// Thirty small objects on separate lanes.
pub fn load_30() -> SceneSpec {
    let mut objects = Vec::new();
    for i in 0..30 {
        let lane = (i % 10) as f64;
        let col = (i / 10) as f64;
        let (class_id, size) = if i % 3 == 2 {
            (CLASS_PEDESTRIAN, [10.0, 20.0])
        } else {
            (CLASS_CAR, [18.0, 10.0])
        };
        let y = 14.0 + 23.0 * lane;
        let x = 40.0 + 100.0 * col;
        let v = if i % 2 == 0 { 0.5 } else { -0.5 };
        objects.push(linear(class_id, size, [x, y], [v, 0.0]));
    }
    SceneSpec {
        name: "load_30".into(),
        width: 320,
        height: 240,
        n_frames: 60,
        objects,
        occluders: vec![],
        noise: noise(0.05, 0.3, 0.3, 0.02),
        seed: 71,
    }
}

/// The eight fixed-seed scenes used for ablations and window sweeps.
pub fn standard_corpus() -> Vec<SceneSpec> {
    vec![
        crossing_pair(),
        long_occlusion(),
        dense_parallel(),
        dropout_stress(),
        fp_storm(),
        enter_exit(),
        scale_change(),
        load_30(),
    ]
}

/// Noise-free scenes in which no object ever hides another.
pub fn perfect_world_corpus() -> Vec<SceneSpec> {
    let clean = NoiseParams::default();
    vec![
        SceneSpec {
            name: "perfect_static".into(),
            width: 120,
            height: 80,
            n_frames: 20,
            objects: vec![
                linear(CLASS_CAR, CAR, [30.0, 20.0], [0.0, 0.0]),
                linear(CLASS_PEDESTRIAN, PED, [90.0, 50.0], [0.0, 0.0]),
            ],
            occluders: vec![],
            noise: clean.clone(),
            seed: 1,
        },
        SceneSpec {
            name: "perfect_moving".into(),
            width: 200,
            height: 120,
            n_frames: 60,
            objects: vec![
                linear(CLASS_CAR, CAR, [30.0, 20.0], [1.0, 0.0]),
                linear(CLASS_CAR, CAR, [170.0, 50.0], [-1.0, 0.0]),
                linear(CLASS_PEDESTRIAN, PED, [100.0, 90.0], [0.5, 0.0]),
            ],
            occluders: vec![],
            noise: clean.clone(),
            seed: 2,
        },
        SceneSpec {
            name: "perfect_enter_exit".into(),
            width: 160,
            height: 100,
            n_frames: 50,
            objects: vec![
                lives(linear(CLASS_CAR, CAR, [40.0, 25.0], [0.5, 0.0]), 5, 30),
                lives(linear(CLASS_PEDESTRIAN, PED, [120.0, 65.0], [-0.5, 0.0]), 15, 49),
            ],
            occluders: vec![],
            noise: clean,
            seed: 3,
        },
    ]
}

/// One car drifting slowly across an otherwise empty frame.
pub fn single_object_scene(n_frames: usize) -> SceneSpec {
    SceneSpec {
        name: "single_object".into(),
        width: 160,
        height: 80,
        n_frames,
        objects: vec![linear(CLASS_CAR, CAR, [40.0, 40.0], [80.0 / n_frames.max(1) as f64, 0.0])],
        occluders: vec![],
        noise: NoiseParams::default(),
        seed: 5,
    }
}

/// Writes each scene as `<name>.json`.
pub fn write_corpus(dir: impl AsRef<Path>, scenes: &[SceneSpec]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in scenes {
        let path = dir.join(format!("{}.json", s.name));
        std::fs::write(&path, s.to_json()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Loads every `*.json` scene in `dir`, ordered by file name.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Vec<SceneSpec>> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyInput(format!("no scene files in {}", dir.display())));
    }
    paths.iter().map(SceneSpec::load).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::generate_scene;

    #[test]
    fn corpus_scenes_are_valid() {
        let scenes = standard_corpus();
        assert_eq!(scenes.len(), 8);
        for s in scenes.iter().chain(&perfect_world_corpus()) {
            s.validate().unwrap();
        }
    }

    #[test]
    fn perfect_world_has_full_visibility() {
        for s in perfect_world_corpus() {
            let gt = generate_scene(&s).unwrap();
            for f in &gt.frames {
                for o in &f.objects {
                    assert_eq!(o.visible_fraction(), 1.0, "{}", s.name);
                }
            }
        }
    }

    #[test]
    fn corpus_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), &standard_corpus()).unwrap();
        let mut expected = standard_corpus();
        expected.sort_by(|a, b| a.name.cmp(&b.name));
        assert_eq!(load_corpus(dir.path()).unwrap(), expected);
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(load_corpus(empty.path()), Err(Error::EmptyInput(_))));
    }
}
