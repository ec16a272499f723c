//! Tracking evaluation: HOTA with its detection, association and
//! localization parts, and CLEAR-MOT accuracy with identity switches.
//!
//! HOTA follows the standard definition. A soft global alignment score is
//! first accumulated per (gt, pred) id pair over the whole sequence. Then,
//! for each threshold α in 0.05..=0.95, every frame is matched by
//! maximizing the number of pairs with similarity ≥ α, then the summed
//! alignment score, then the summed similarity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{CLASS_CAR, CLASS_IGNORE, CLASS_PEDESTRIAN};
use crate::error::Result;
use crate::hungarian::hungarian_assign;
use crate::mask::{mask_iou, mask_to_bbox, BBox, BinaryMask};
use crate::pipeline::Trajectory;

/// Weight of the similarity term relative to the alignment score when
/// matching.
const SIM_WEIGHT: f64 = 1e-4;
const EPS: f64 = 1e-12;

pub fn alphas() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    #[default]
    Mask,
    Bbox,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Mask(BinaryMask),
    Box(BBox),
}

impl Region {
    fn bbox(&self) -> Option<BBox> {
        match self {
            Region::Mask(m) => mask_to_bbox(m),
            Region::Box(b) => Some(*b),
        }
    }

    fn area(&self) -> f64 {
        match self {
            Region::Mask(m) => m.area() as f64,
            Region::Box(b) => b.area(),
        }
    }

    /// Fraction of `self` covered by `other`.
    fn covered_by(&self, other: &Region) -> f64 {
        let area = self.area();
        if area <= 0.0 {
            return 0.0;
        }
        let inter = match (self, other) {
            (Region::Mask(a), Region::Mask(b)) => a.intersection_area(b).unwrap_or(0) as f64,
            _ => match (self.bbox(), other.bbox()) {
                (Some(a), Some(b)) => {
                    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
                    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
                    iw * ih
                }
                _ => 0.0,
            },
        };
        inter / area
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalObject {
    pub id: u32,
    pub class_id: u32,
    pub region: Region,
}

impl EvalObject {
    pub fn mask(id: u32, class_id: u32, mask: BinaryMask) -> Self {
        Self {
            id,
            class_id,
            region: Region::Mask(mask),
        }
    }

    pub fn bbox(id: u32, class_id: u32, bbox: BBox) -> Self {
        Self {
            id,
            class_id,
            region: Region::Box(bbox),
        }
    }
}

/// Ground truth and predictions per frame. Ground-truth objects of the
/// ignore class mark regions where predictions are not scored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalInput {
    pub mode: EvalMode,
    pub gt: Vec<Vec<EvalObject>>,
    pub pred: Vec<Vec<EvalObject>>,
}

impl EvalInput {
    pub fn n_frames(&self) -> usize {
        self.gt.len().max(self.pred.len())
    }

    fn frame(side: &[Vec<EvalObject>], f: usize) -> &[EvalObject] {
        side.get(f).map_or(&[], Vec::as_slice)
    }

    /// Classes with at least one scored object on either side.
    pub fn classes(&self) -> BTreeSet<u32> {
        self.gt
            .iter()
            .chain(&self.pred)
            .flatten()
            .map(|o| o.class_id)
            .filter(|&c| c != CLASS_IGNORE)
            .collect()
    }

    /// Predictions from tracker trajectories; `n_frames` sets the sequence
    /// length.
    pub fn pred_from_trajectories(trajectories: &[Trajectory], n_frames: usize) -> Result<Vec<Vec<EvalObject>>> {
        let mut frames: Vec<Vec<EvalObject>> = vec![Vec::new(); n_frames];
        for t in trajectories {
            for e in &t.entries {
                if e.frame >= frames.len() {
                    frames.resize(e.frame + 1, Vec::new());
                }
                frames[e.frame].push(EvalObject::mask(t.id, t.class_id, e.rle.decode()?));
            }
        }
        Ok(frames)
    }
}

fn similarity(a: &Region, b: &Region, mode: EvalMode) -> f64 {
    match (mode, a, b) {
        (EvalMode::Mask, Region::Mask(x), Region::Mask(y)) => mask_iou(x, y).unwrap_or(0.0),
        _ => match (a.bbox(), b.bbox()) {
            (Some(x), Some(y)) => x.iou(&y),
            _ => 0.0,
        },
    }
}

/// One class of one sequence, reduced to dense ids and per-frame
/// similarity matrices.
struct Prepared {
    gt_ids: Vec<Vec<usize>>,
    pr_ids: Vec<Vec<usize>>,
    sims: Vec<Vec<Vec<f64>>>,
    n_gt: usize,
    n_pr: usize,
}

impl Prepared {
    fn new(input: &EvalInput, class_id: u32) -> Self {
        let mut gt_index: BTreeMap<u32, usize> = BTreeMap::new();
        let mut pr_index: BTreeMap<u32, usize> = BTreeMap::new();
        let mut p = Prepared {
            gt_ids: Vec::new(),
            pr_ids: Vec::new(),
            sims: Vec::new(),
            n_gt: 0,
            n_pr: 0,
        };
        for f in 0..input.n_frames() {
            let gts = EvalInput::frame(&input.gt, f);
            let ignore: Vec<&Region> = gts
                .iter()
                .filter(|o| o.class_id == CLASS_IGNORE)
                .map(|o| &o.region)
                .collect();
            let gts: Vec<&EvalObject> = gts.iter().filter(|o| o.class_id == class_id).collect();
            let prs: Vec<&EvalObject> = EvalInput::frame(&input.pred, f)
                .iter()
                .filter(|o| o.class_id == class_id)
                .filter(|o| ignore.iter().all(|ig| o.region.covered_by(ig) <= 0.5))
                .collect();
            let dense = |index: &mut BTreeMap<u32, usize>, id: u32| {
                let n = index.len();
                *index.entry(id).or_insert(n)
            };
            p.gt_ids.push(gts.iter().map(|o| dense(&mut gt_index, o.id)).collect());
            p.pr_ids.push(prs.iter().map(|o| dense(&mut pr_index, o.id)).collect());
            p.sims.push(
                gts.iter()
                    .map(|g| prs.iter().map(|q| similarity(&g.region, &q.region, input.mode)).collect())
                    .collect(),
            );
        }
        p.n_gt = gt_index.len();
        p.n_pr = pr_index.len();
        p
    }

    fn gt_total(&self) -> usize {
        self.gt_ids.iter().map(Vec::len).sum()
    }

    fn pr_total(&self) -> usize {
        self.pr_ids.iter().map(Vec::len).sum()
    }

    fn id_counts(ids: &[Vec<usize>], n: usize) -> Vec<f64> {
        let mut c = vec![0.0; n];
        for i in ids.iter().flatten() {
            c[*i] += 1.0;
        }
        c
    }

    /// Soft alignment score between every gt and pred id.
    fn global_alignment(&self) -> Vec<Vec<f64>> {
        let mut potential = vec![vec![0.0; self.n_pr]; self.n_gt];
        for ((g_ids, p_ids), sim) in self.gt_ids.iter().zip(&self.pr_ids).zip(&self.sims) {
            let row_sum: Vec<f64> = sim.iter().map(|r| r.iter().sum()).collect();
            let col_sum: Vec<f64> = (0..p_ids.len()).map(|j| sim.iter().map(|r| r[j]).sum()).collect();
            for (i, &g) in g_ids.iter().enumerate() {
                for (j, &q) in p_ids.iter().enumerate() {
                    let denom = row_sum[i] + col_sum[j] - sim[i][j];
                    if denom > EPS {
                        potential[g][q] += sim[i][j] / denom;
                    }
                }
            }
        }
        let gt_count = Self::id_counts(&self.gt_ids, self.n_gt);
        let pr_count = Self::id_counts(&self.pr_ids, self.n_pr);
        potential
            .iter()
            .enumerate()
            .map(|(g, row)| {
                row.iter()
                    .enumerate()
                    .map(|(q, &m)| m / (gt_count[g] + pr_count[q] - m))
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatch {
    /// `(gt index, pred index, similarity)` within the frame.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
}

/// Matches one frame at threshold `alpha`: as many pairs with similarity
/// `>= alpha` as possible, preferring higher `assoc` and then higher
/// similarity. `sim` and `assoc` are gt-by-pred.
pub fn match_at_alpha(sim: &[Vec<f64>], assoc: &[Vec<f64>], alpha: f64) -> FrameMatch {
    let n_gt = sim.len();
    let n_pr = sim.first().map_or(0, Vec::len);
    let cost: Vec<Vec<f64>> = (0..n_gt)
        .map(|i| {
            (0..n_pr)
                .map(|j| {
                    if sim[i][j] >= alpha - EPS && sim[i][j] > 0.0 {
                        -(assoc[i][j] + SIM_WEIGHT * sim[i][j])
                    } else {
                        f64::INFINITY
                    }
                })
                .collect()
        })
        .collect();
    let assignment = if n_gt > 0 && n_pr > 0 {
        hungarian_assign(&cost)
    } else {
        crate::hungarian::Assignment::empty()
    };
    let pairs: Vec<(usize, usize, f64)> = assignment.pairs.iter().map(|&(i, j)| (i, j, sim[i][j])).collect();
    let gt_hit: BTreeSet<usize> = pairs.iter().map(|p| p.0).collect();
    let pr_hit: BTreeSet<usize> = pairs.iter().map(|p| p.1).collect();
    FrameMatch {
        unmatched_gt: (0..n_gt).filter(|i| !gt_hit.contains(i)).collect(),
        unmatched_pred: (0..n_pr).filter(|j| !pr_hit.contains(j)).collect(),
        pairs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub loca: f64,
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotaResult {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub loca: f64,
    pub per_alpha: Vec<AlphaRow>,
}

impl HotaResult {
    fn constant(v: f64) -> Self {
        let per_alpha = alphas()
            .into_iter()
            .map(|alpha| AlphaRow {
                alpha,
                hota: v,
                deta: v,
                assa: v,
                loca: v,
                tp: 0,
                fn_: 0,
                fp: 0,
            })
            .collect();
        Self {
            hota: v,
            deta: v,
            assa: v,
            loca: v,
            per_alpha,
        }
    }
}

/// HOTA family for one class.
pub fn hota(input: &EvalInput, class_id: u32) -> HotaResult {
    let p = Prepared::new(input, class_id);
    let (gt_total, pr_total) = (p.gt_total(), p.pr_total());
    if gt_total == 0 && pr_total == 0 {
        return HotaResult::constant(1.0);
    }
    if gt_total == 0 || pr_total == 0 {
        let mut r = HotaResult::constant(0.0);
        for row in &mut r.per_alpha {
            row.fn_ = gt_total;
            row.fp = pr_total;
        }
        return r;
    }

    let align = p.global_alignment();
    let gt_count = Prepared::id_counts(&p.gt_ids, p.n_gt);
    let pr_count = Prepared::id_counts(&p.pr_ids, p.n_pr);
    let mut per_alpha = Vec::with_capacity(19);
    for alpha in alphas() {
        let mut matches = vec![vec![0.0f64; p.n_pr]; p.n_gt];
        let (mut tp, mut loc_sum) = (0usize, 0.0);
        for ((g_ids, p_ids), sim) in p.gt_ids.iter().zip(&p.pr_ids).zip(&p.sims) {
            let assoc: Vec<Vec<f64>> = g_ids
                .iter()
                .map(|&g| p_ids.iter().map(|&q| align[g][q]).collect())
                .collect();
            let m = match_at_alpha(sim, &assoc, alpha);
            for &(i, j, s) in &m.pairs {
                matches[g_ids[i]][p_ids[j]] += 1.0;
                loc_sum += s;
            }
            tp += m.pairs.len();
        }
        let fn_ = gt_total - tp;
        let fp = pr_total - tp;
        let deta = tp as f64 / (tp + fn_ + fp) as f64;
        let (assa, loca) = if tp > 0 {
            let mut a = 0.0;
            for (g, row) in matches.iter().enumerate() {
                for (q, &m) in row.iter().enumerate() {
                    if m > 0.0 {
                        a += m * m / (gt_count[g] + pr_count[q] - m);
                    }
                }
            }
            (a / tp as f64, loc_sum / tp as f64)
        } else {
            (0.0, 0.0)
        };
        per_alpha.push(AlphaRow {
            alpha,
            hota: (deta * assa).sqrt(),
            deta,
            assa,
            loca,
            tp,
            fn_,
            fp,
        });
    }
    let mean = |f: fn(&AlphaRow) -> f64| per_alpha.iter().map(f).sum::<f64>() / per_alpha.len() as f64;
    HotaResult {
        hota: mean(|r| r.hota),
        deta: mean(|r| r.deta),
        assa: mean(|r| r.assa),
        loca: mean(|r| r.loca),
        per_alpha,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearResult {
    pub mota: f64,
    pub motp: f64,
    pub idsw: usize,
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub gt_count: usize,
}

/// CLEAR-MOT for one class. Pairs from the previous frame keep priority
/// while they stay above `iou_threshold`; an identity switch is counted
/// when a ground-truth object is matched to a different prediction than
/// the last time it was matched.
pub fn clear_mot(input: &EvalInput, class_id: u32, iou_threshold: f64) -> ClearResult {
    let p = Prepared::new(input, class_id);
    let (gt_total, pr_total) = (p.gt_total(), p.pr_total());
    let mut r = ClearResult {
        mota: 0.0,
        motp: 0.0,
        idsw: 0,
        tp: 0,
        fn_: gt_total,
        fp: pr_total,
        gt_count: gt_total,
    };
    if gt_total == 0 {
        r.mota = if pr_total == 0 { 1.0 } else { 0.0 };
        r.motp = r.mota;
        return r;
    }
    let mut prev_step: Vec<Option<usize>> = vec![None; p.n_gt];
    let mut last_match: Vec<Option<usize>> = vec![None; p.n_gt];
    let (mut tp, mut idsw, mut sim_sum) = (0usize, 0usize, 0.0);
    for ((g_ids, p_ids), sim) in p.gt_ids.iter().zip(&p.pr_ids).zip(&p.sims) {
        let mut now: Vec<Option<usize>> = vec![None; p.n_gt];
        if !g_ids.is_empty() && !p_ids.is_empty() {
            let cost: Vec<Vec<f64>> = g_ids
                .iter()
                .enumerate()
                .map(|(i, &g)| {
                    p_ids
                        .iter()
                        .enumerate()
                        .map(|(j, &q)| {
                            if sim[i][j] < iou_threshold - EPS {
                                0.0
                            } else if prev_step[g] == Some(q) {
                                -(1000.0 + sim[i][j])
                            } else {
                                -sim[i][j]
                            }
                        })
                        .collect()
                })
                .collect();
            for (i, j) in hungarian_assign(&cost).pairs {
                if cost[i][j] >= 0.0 {
                    continue;
                }
                let (g, q) = (g_ids[i], p_ids[j]);
                if last_match[g].is_some_and(|prev| prev != q) {
                    idsw += 1;
                }
                last_match[g] = Some(q);
                now[g] = Some(q);
                tp += 1;
                sim_sum += sim[i][j];
            }
        }
        prev_step = now;
    }
    r.tp = tp;
    r.fn_ = gt_total - tp;
    r.fp = pr_total - tp;
    r.idsw = idsw;
    r.mota = 1.0 - (r.fn_ + r.fp + idsw) as f64 / gt_total as f64;
    r.motp = if tp > 0 { sim_sum / tp as f64 } else { 0.0 };
    r
}

pub fn class_name(class_id: u32) -> String {
    match class_id {
        CLASS_CAR => "car".into(),
        CLASS_PEDESTRIAN => "pedestrian".into(),
        c => format!("class_{c}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_id: u32,
    pub class_name: String,
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub loca: f64,
    pub mota: f64,
    pub idsw: usize,
    pub gt_dets: usize,
    pub pred_dets: usize,
    pub per_alpha: Vec<AlphaRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: EvalMode,
    pub classes: Vec<ClassReport>,
}

impl MetricsReport {
    pub fn class(&self, class_id: u32) -> Option<&ClassReport> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// HOTA and CLEAR-MOT for every class that appears in the input, or for
/// `classes` when given.
pub fn evaluate(input: &EvalInput, classes: Option<&[u32]>) -> MetricsReport {
    let classes: Vec<u32> = match classes {
        Some(c) => c.to_vec(),
        None => input.classes().into_iter().collect(),
    };
    let reports = classes
        .into_iter()
        .map(|class_id| {
            let h = hota(input, class_id);
            let c = clear_mot(input, class_id, 0.5);
            ClassReport {
                class_id,
                class_name: class_name(class_id),
                hota: h.hota,
                deta: h.deta,
                assa: h.assa,
                loca: h.loca,
                mota: c.mota,
                idsw: c.idsw,
                gt_dets: c.gt_count,
                pred_dets: c.tp + c.fp,
                per_alpha: h.per_alpha,
            }
        })
        .collect();
    MetricsReport {
        mode: input.mode,
        classes: reports,
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:>7} {:>7} {:>7} {:>7} {:>8} {:>5} {:>7} {:>7}",
            "class", "HOTA", "DetA", "AssA", "LocA", "MOTA", "IDs", "GT", "Pred"
        )?;
        for c in &self.classes {
            writeln!(
                f,
                "{:<12} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>8.3} {:>5} {:>7} {:>7}",
                c.class_name,
                c.hota * 100.0,
                c.deta * 100.0,
                c.assa * 100.0,
                c.loca * 100.0,
                c.mota * 100.0,
                c.idsw,
                c.gt_dets,
                c.pred_dets
            )?;
        }
        Ok(())
    }
}

/// Per-α table for one class.
pub fn alpha_table(report: &ClassReport) -> String {
    let mut s = format!("{:>5} {:>7} {:>7} {:>7} {:>7}\n", "alpha", "HOTA", "DetA", "AssA", "LocA");
    for r in &report.per_alpha {
        s.push_str(&format!(
            "{:>5.2} {:>7.3} {:>7.3} {:>7.3} {:>7.3}\n",
            r.alpha,
            r.hota * 100.0,
            r.deta * 100.0,
            r.assa * 100.0,
            r.loca * 100.0
        ));
    }
    s
}
