//! Text formats: detection files, KITTI MOTS and KITTI MOT result lines.
//!
//! Detection files hold one `frame class_id score x1 y1 x2 y2` per line.
//! MOTS lines are `frame obj_id class_id height width rle`. MOT lines follow
//! the KITTI tracking layout: frame, id, type, truncated, occluded, alpha,
//! the 2D box, seven 3D fields and a score. Numbers are written with six
//! significant digits so output is byte-stable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::association::Detection;
use crate::config::{CLASS_CAR, CLASS_IGNORE, CLASS_PEDESTRIAN};
use crate::error::{Error, Result};
use crate::mask::{mask_to_bbox, BBox};
use crate::metrics::EvalObject;
use crate::pipeline::Trajectory;
use crate::rle::Rle;
use crate::synth::GtSequence;
use crate::track::TrackId;

/// Largest instance number that fits the `class * 1000 + instance` id.
pub const MAX_INSTANCES_PER_CLASS: u32 = 999;

/// Formats like C's `%g`: six significant digits, trailing zeros removed,
/// exponent form outside `1e-4 ..= 1e6`.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.5e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mant}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn field<T: std::str::FromStr>(tok: &str, what: &str, src: &str, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(src, line, format!("bad {what} {tok:?}")))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

// ---------------------------------------------------------------- detections

/// Parses detection lines. `src` names the input in error messages.
pub fn parse_detections(text: &str, src: &str) -> Result<BTreeMap<usize, Vec<Detection>>> {
    let mut out: BTreeMap<usize, Vec<Detection>> = BTreeMap::new();
    for (n, line) in content_lines(text) {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 7 {
            return Err(Error::parse(src, n, format!("expected 7 fields, found {}", t.len())));
        }
        let frame: usize = field(t[0], "frame", src, n)?;
        let class_id: u32 = field(t[1], "class id", src, n)?;
        let score: f64 = field(t[2], "score", src, n)?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::parse(src, n, format!("score {score} outside [0, 1]")));
        }
        let mut c = [0.0; 4];
        for (k, v) in c.iter_mut().enumerate() {
            *v = field(t[3 + k], "coordinate", src, n)?;
        }
        let bbox = BBox::new(c[0], c[1], c[2], c[3]).map_err(|e| Error::parse(src, n, e.to_string()))?;
        out.entry(frame).or_default().push(Detection {
            bbox,
            score,
            class_id,
        });
    }
    Ok(out)
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<BTreeMap<usize, Vec<Detection>>> {
    let path = path.as_ref();
    parse_detections(&read_text(path)?, &path.display().to_string())
}

pub fn write_detections(dets: &BTreeMap<usize, Vec<Detection>>) -> String {
    let mut s = String::new();
    for (frame, list) in dets {
        for d in list {
            let b = &d.bbox;
            writeln!(
                s,
                "{frame} {} {} {} {} {} {}",
                d.class_id,
                fmt_g(d.score),
                fmt_g(b.x1),
                fmt_g(b.y1),
                fmt_g(b.x2),
                fmt_g(b.y2)
            )
            .unwrap();
        }
    }
    s
}

// ---------------------------------------------------------------- output ids

/// Maps internal track ids to `class * 1000 + instance`, numbering the
/// instances of each class from 1 in order of first appearance.
pub fn output_ids(trajectories: &[Trajectory]) -> Result<BTreeMap<TrackId, u32>> {
    let mut order: Vec<(usize, TrackId, u32)> = trajectories
        .iter()
        .filter_map(|t| t.entries.first().map(|e| (e.frame, t.id, t.class_id)))
        .collect();
    order.sort();
    let mut next: BTreeMap<u32, u32> = BTreeMap::new();
    let mut ids = BTreeMap::new();
    for (_, id, class_id) in order {
        let k = next.entry(class_id).or_insert(0);
        *k += 1;
        if *k > MAX_INSTANCES_PER_CLASS {
            return Err(Error::InvalidSpec(format!(
                "more than {MAX_INSTANCES_PER_CLASS} tracks of class {class_id}"
            )));
        }
        let out = class_id
            .checked_mul(1000)
            .and_then(|v| v.checked_add(*k))
            .ok_or_else(|| Error::InvalidSpec(format!("class id {class_id} too large for output ids")))?;
        ids.insert(id, out);
    }
    Ok(ids)
}

// ---------------------------------------------------------------- MOTS

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotsRecord {
    pub frame: usize,
    pub obj_id: u32,
    pub class_id: u32,
    pub rle: Rle,
}

impl MotsRecord {
    pub fn to_eval_object(&self) -> Result<EvalObject> {
        Ok(EvalObject::mask(self.obj_id, self.class_id, self.rle.decode()?))
    }
}

/// Sorts by frame then id and rejects masks that overlap within a frame.
fn finish_records(mut recs: Vec<MotsRecord>) -> Result<Vec<MotsRecord>> {
    recs.sort_by_key(|r| (r.frame, r.obj_id));
    let mut start = 0;
    while start < recs.len() {
        let frame = recs[start].frame;
        let end = start + recs[start..].iter().take_while(|r| r.frame == frame).count();
        let masks = recs[start..end]
            .iter()
            .map(|r| r.rle.decode())
            .collect::<Result<Vec<_>>>()?;
        for i in 0..masks.len() {
            for j in i + 1..masks.len() {
                if masks[i].overlaps(&masks[j])? {
                    return Err(Error::InvalidMask(format!(
                        "objects {} and {} overlap in frame {frame}",
                        recs[start + i].obj_id,
                        recs[start + j].obj_id
                    )));
                }
            }
        }
        start = end;
    }
    Ok(recs)
}

/// MOTS records for tracker output. Empty masks are skipped.
pub fn mots_records(trajectories: &[Trajectory]) -> Result<Vec<MotsRecord>> {
    let ids = output_ids(trajectories)?;
    let mut recs = Vec::new();
    for t in trajectories {
        for e in &t.entries {
            if e.rle.area() == 0 {
                continue;
            }
            recs.push(MotsRecord {
                frame: e.frame,
                obj_id: ids[&t.id],
                class_id: t.class_id,
                rle: e.rle.clone(),
            });
        }
    }
    finish_records(recs)
}

/// MOTS records for generated ground truth. Objects are numbered per class
/// in `gt_id` order, giving `class * 1000 + instance`.
pub fn gt_mots_records(gt: &GtSequence) -> Result<Vec<MotsRecord>> {
    let mut objects: Vec<(u32, u32)> = gt
        .frames
        .iter()
        .flat_map(|f| f.objects.iter().map(|o| (o.gt_id, o.class_id)))
        .collect();
    objects.sort();
    objects.dedup();
    let mut next: BTreeMap<u32, u32> = BTreeMap::new();
    let mut ids: BTreeMap<u32, u32> = BTreeMap::new();
    for (gt_id, class_id) in objects {
        let k = next.entry(class_id).or_insert(0);
        *k += 1;
        if *k > MAX_INSTANCES_PER_CLASS {
            return Err(Error::InvalidSpec(format!(
                "more than {MAX_INSTANCES_PER_CLASS} objects of class {class_id}"
            )));
        }
        ids.insert(gt_id, class_id * 1000 + *k);
    }
    let mut recs = Vec::new();
    for (frame, f) in gt.frames.iter().enumerate() {
        for o in &f.objects {
            recs.push(MotsRecord {
                frame,
                obj_id: ids[&o.gt_id],
                class_id: o.class_id,
                rle: Rle::encode(&o.mask),
            });
        }
    }
    finish_records(recs)
}

pub fn format_mots(records: &[MotsRecord]) -> String {
    let mut s = String::new();
    for r in records {
        writeln!(
            s,
            "{} {} {} {} {} {}",
            r.frame,
            r.obj_id,
            r.class_id,
            r.rle.height,
            r.rle.width,
            r.rle.to_compressed()
        )
        .unwrap();
    }
    s
}

pub fn write_mots_results(trajectories: &[Trajectory]) -> Result<String> {
    Ok(format_mots(&mots_records(trajectories)?))
}

pub fn write_gt_mots(gt: &GtSequence) -> Result<String> {
    Ok(format_mots(&gt_mots_records(gt)?))
}

/// Parses MOTS lines. RLE strings whose runs do not fill the stated frame
/// fail with [`Error::RleDimensionMismatch`].
pub fn parse_mots(text: &str, src: &str) -> Result<Vec<MotsRecord>> {
    let mut out = Vec::new();
    for (n, line) in content_lines(text) {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 6 {
            return Err(Error::parse(src, n, format!("expected 6 fields, found {}", t.len())));
        }
        let frame = field(t[0], "frame", src, n)?;
        let obj_id = field(t[1], "object id", src, n)?;
        let class_id = field(t[2], "class id", src, n)?;
        let height = field(t[3], "height", src, n)?;
        let width = field(t[4], "width", src, n)?;
        let rle = Rle::from_compressed(t[5], width, height).map_err(|e| match e {
            Error::RleDimensionMismatch { .. } => e,
            other => Error::parse(src, n, other.to_string()),
        })?;
        out.push(MotsRecord {
            frame,
            obj_id,
            class_id,
            rle,
        });
    }
    Ok(out)
}

pub fn read_mots(path: impl AsRef<Path>) -> Result<Vec<MotsRecord>> {
    let path = path.as_ref();
    parse_mots(&read_text(path)?, &path.display().to_string())
}

/// Groups records into per-frame evaluation objects, padded to at least
/// `n_frames` frames.
pub fn mots_eval_objects(records: &[MotsRecord], n_frames: usize) -> Result<Vec<Vec<EvalObject>>> {
    let len = records.iter().map(|r| r.frame + 1).max().unwrap_or(0).max(n_frames);
    let mut frames = vec![Vec::new(); len];
    for r in records {
        frames[r.frame].push(r.to_eval_object()?);
    }
    Ok(frames)
}

// ---------------------------------------------------------------- MOT

pub fn kitti_type(class_id: u32) -> &'static str {
    match class_id {
        CLASS_CAR => "Car",
        CLASS_PEDESTRIAN => "Pedestrian",
        _ => "DontCare",
    }
}

/// Class id for a KITTI type string; `DontCare` maps to the ignore class,
/// other types to `None`.
pub fn kitti_class(kind: &str) -> Option<u32> {
    match kind {
        "Car" => Some(CLASS_CAR),
        "Pedestrian" => Some(CLASS_PEDESTRIAN),
        "DontCare" => Some(CLASS_IGNORE),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotRecord {
    pub frame: usize,
    pub track_id: i64,
    pub kind: String,
    pub truncated: f64,
    pub occluded: i32,
    pub alpha: f64,
    pub bbox: BBox,
    /// h, w, l, x, y, z, rotation_y.
    pub dims3d: [f64; 7],
    /// Absent on ground-truth label lines.
    pub score: Option<f64>,
}

impl MotRecord {
    pub fn class_id(&self) -> Option<u32> {
        kitti_class(&self.kind)
    }
}

/// One box per visible trajectory entry, fitted tightly around the mask.
/// Entries with an empty mask produce no record.
pub fn mot_records(trajectories: &[Trajectory]) -> Result<Vec<MotRecord>> {
    let ids = output_ids(trajectories)?;
    let mut recs = Vec::new();
    for t in trajectories {
        for e in &t.entries {
            let Some(bbox) = mask_to_bbox(&e.rle.decode()?) else {
                continue;
            };
            recs.push(MotRecord {
                frame: e.frame,
                track_id: ids[&t.id] as i64,
                kind: kitti_type(t.class_id).into(),
                truncated: -1.0,
                occluded: -1,
                alpha: -10.0,
                bbox,
                dims3d: [-1.0; 7],
                // as written, so records survive a write and read unchanged
                score: Some(fmt_g(e.score()).parse().expect("formatted float")),
            });
        }
    }
    recs.sort_by_key(|r| (r.frame, r.track_id));
    Ok(recs)
}

pub fn format_mot(records: &[MotRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let b = &r.bbox;
        write!(
            s,
            "{} {} {} {} {} {} {} {} {} {}",
            r.frame,
            r.track_id,
            r.kind,
            fmt_g(r.truncated),
            r.occluded,
            fmt_g(r.alpha),
            fmt_g(b.x1),
            fmt_g(b.y1),
            fmt_g(b.x2),
            fmt_g(b.y2)
        )
        .unwrap();
        for v in r.dims3d {
            write!(s, " {}", fmt_g(v)).unwrap();
        }
        if let Some(score) = r.score {
            write!(s, " {}", fmt_g(score)).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn write_mot_results(trajectories: &[Trajectory]) -> Result<String> {
    Ok(format_mot(&mot_records(trajectories)?))
}

/// Parses KITTI tracking lines: 17 fields for labels, 18 with a score.
pub fn parse_mot(text: &str, src: &str) -> Result<Vec<MotRecord>> {
    let mut out = Vec::new();
    for (n, line) in content_lines(text) {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 17 && t.len() != 18 {
            return Err(Error::parse(src, n, format!("expected 17 or 18 fields, found {}", t.len())));
        }
        let mut c = [0.0; 4];
        for (k, v) in c.iter_mut().enumerate() {
            *v = field(t[6 + k], "coordinate", src, n)?;
        }
        let bbox = BBox::new(c[0], c[1], c[2], c[3]).map_err(|e| Error::parse(src, n, e.to_string()))?;
        let mut dims3d = [0.0; 7];
        for (k, v) in dims3d.iter_mut().enumerate() {
            *v = field(t[10 + k], "3D field", src, n)?;
        }
        let score = match t.get(17) {
            Some(tok) => Some(field(tok, "score", src, n)?),
            None => None,
        };
        out.push(MotRecord {
            frame: field(t[0], "frame", src, n)?,
            track_id: field(t[1], "track id", src, n)?,
            kind: t[2].to_string(),
            truncated: field(t[3], "truncation", src, n)?,
            occluded: field(t[4], "occlusion", src, n)?,
            alpha: field(t[5], "alpha", src, n)?,
            bbox,
            dims3d,
            score,
        });
    }
    Ok(out)
}

pub fn read_mot(path: impl AsRef<Path>) -> Result<Vec<MotRecord>> {
    let path = path.as_ref();
    parse_mot(&read_text(path)?, &path.display().to_string())
}

/// Box evaluation objects per frame. Types other than car, pedestrian and
/// `DontCare` are dropped; `DontCare` boxes become ignore regions.
pub fn mot_eval_objects(records: &[MotRecord], n_frames: usize) -> Vec<Vec<EvalObject>> {
    let len = records.iter().map(|r| r.frame + 1).max().unwrap_or(0).max(n_frames);
    let mut frames = vec![Vec::new(); len];
    for r in records {
        if let Some(class_id) = r.class_id() {
            frames[r.frame].push(EvalObject::bbox(r.track_id.max(0) as u32, class_id, r.bbox));
        }
    }
    frames
}
