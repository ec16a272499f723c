//! Corpus-level experiments: component ablations and memory-window sweeps.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::metrics::{class_name, evaluate, EvalInput, EvalMode, MetricsReport};
use crate::pipeline::{RunOutput, RunStats};
use crate::synth::{generate_scene, run_scene, SceneSpec};

/// Tracks one scene and scores it against its ground truth.
pub fn evaluate_scene(spec: &SceneSpec, cfg: &TrackerConfig) -> Result<(MetricsReport, RunOutput)> {
    let gt = generate_scene(spec)?;
    let out = run_scene(spec, &gt, cfg)?.into_result()?;
    let input = EvalInput {
        mode: EvalMode::Mask,
        gt: gt.eval_objects(),
        pred: EvalInput::pred_from_trajectories(&out.trajectories, gt.frames.len())?,
    };
    let gt_classes: Vec<u32> = input
        .gt
        .iter()
        .flatten()
        .map(|o| o.class_id)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    Ok((evaluate(&input, Some(&gt_classes)), out))
}

/// Runs `f` on every scene, one worker thread per scene, keeping the
/// scene order in the result.
fn per_scene<T: Send>(
    scenes: &[SceneSpec],
    f: impl Fn(&SceneSpec) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = scenes.iter().map(|spec| s.spawn(|| f(spec))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scene worker panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScore {
    pub scene: String,
    pub class_id: u32,
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub loca: f64,
    pub mota: f64,
    pub idsw: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class_id: u32,
    pub class_name: String,
    /// Means over the scenes that contain the class.
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub loca: f64,
    pub mota: f64,
    pub idsw: usize,
    pub scenes: usize,
}

fn summarize(scores: &[SceneScore]) -> Vec<ClassSummary> {
    let mut by_class: BTreeMap<u32, Vec<&SceneScore>> = BTreeMap::new();
    for s in scores {
        by_class.entry(s.class_id).or_default().push(s);
    }
    by_class
        .into_iter()
        .map(|(class_id, v)| {
            let n = v.len() as f64;
            let mean = |f: fn(&SceneScore) -> f64| v.iter().map(|s| f(s)).sum::<f64>() / n;
            ClassSummary {
                class_id,
                class_name: class_name(class_id),
                hota: mean(|s| s.hota),
                deta: mean(|s| s.deta),
                assa: mean(|s| s.assa),
                loca: mean(|s| s.loca),
                mota: mean(|s| s.mota),
                idsw: v.iter().map(|s| s.idsw).sum(),
                scenes: v.len(),
            }
        })
        .collect()
}

fn scene_scores(scene: &str, report: &MetricsReport) -> Vec<SceneScore> {
    report
        .classes
        .iter()
        .map(|c| SceneScore {
            scene: scene.to_string(),
            class_id: c.class_id,
            hota: c.hota,
            deta: c.deta,
            assa: c.assa,
            loca: c.loca,
            mota: c.mota,
            idsw: c.idsw,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub enable_tqa: bool,
    pub enable_oaf: bool,
    pub classes: Vec<ClassSummary>,
    pub scenes: Vec<SceneScore>,
}

impl AblationRow {
    pub fn class(&self, class_id: u32) -> Option<&ClassSummary> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }

    pub fn scene(&self, scene: &str, class_id: u32) -> Option<&SceneScore> {
        self.scenes.iter().find(|s| s.scene == scene && s.class_id == class_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

/// Variant name and component switches, in report order.
pub const ABLATION_VARIANTS: [(&str, bool, bool); 4] = [
    ("none", false, false),
    ("TQA", true, false),
    ("TQA+OAF", true, true),
    ("OAF", false, true),
];

/// Every scene under every component combination of `base`.
pub fn ablate(scenes: &[SceneSpec], base: &TrackerConfig) -> Result<AblationReport> {
    if scenes.is_empty() {
        return Err(Error::EmptyInput("scene corpus is empty".into()));
    }
    let mut rows = Vec::new();
    for (name, tqa, oaf) in ABLATION_VARIANTS {
        let cfg = base.clone().with_ablation(tqa, oaf);
        let reports = per_scene(scenes, |s| evaluate_scene(s, &cfg).map(|r| r.0))?;
        let scores: Vec<SceneScore> = scenes
            .iter()
            .zip(&reports)
            .flat_map(|(s, r)| scene_scores(&s.name, r))
            .collect();
        rows.push(AblationRow {
            variant: name.to_string(),
            enable_tqa: tqa,
            enable_oaf: oaf,
            classes: summarize(&scores),
            scenes: scores,
        });
    }
    Ok(AblationReport { rows })
}

impl AblationReport {
    pub fn row(&self, variant: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("variant,class,hota,deta,assa,loca,mota,idsw\n");
        for r in &self.rows {
            for c in &r.classes {
                s.push_str(&format!(
                    "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
                    r.variant, c.class_name, c.hota, c.deta, c.assa, c.loca, c.mota, c.idsw
                ));
            }
        }
        s
    }

    /// HOTA per class, one line per variant.
    pub fn table(&self) -> String {
        let classes: Vec<(u32, String)> = self
            .rows
            .iter()
            .flat_map(|r| r.classes.iter().map(|c| (c.class_id, c.class_name.clone())))
            .collect::<BTreeMap<_, _>>()
            .into_iter()
            .collect();
        let mut s = format!("{:<10}", "variant");
        for (_, name) in &classes {
            s.push_str(&format!(" {:>12} {:>8}", format!("{name} HOTA"), "AssA"));
        }
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!("{:<10}", r.variant));
            for (id, _) in &classes {
                match r.class(*id) {
                    Some(c) => s.push_str(&format!(" {:>12.2} {:>8.2}", c.hota * 100.0, c.assa * 100.0)),
                    None => s.push_str(&format!(" {:>12} {:>8}", "-", "-")),
                }
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t_w: usize,
    /// Mean over scenes of the per-scene class-mean HOTA.
    pub hota: f64,
    /// Sum over scenes of each run's peak retained memory entries.
    pub peak_memory_entries: usize,
    pub peak_memory_bytes: usize,
    pub wall_time_ms: f64,
    /// Relative to the unbounded-memory run, in percent.
    pub hota_delta_pct: f64,
    pub memory_delta_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

struct WindowRun {
    hota: f64,
    stats: Vec<RunStats>,
    wall_time_ms: f64,
}

fn run_window(scenes: &[SceneSpec], base: &TrackerConfig, t_w: usize) -> Result<WindowRun> {
    let cfg = base.clone().with_window(t_w);
    let start = Instant::now();
    let results = per_scene(scenes, |s| {
        let (report, out) = evaluate_scene(s, &cfg)?;
        let n = report.classes.len().max(1) as f64;
        Ok((report.classes.iter().map(|c| c.hota).sum::<f64>() / n, out.stats))
    })?;
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let hota = results.iter().map(|r| r.0).sum::<f64>() / results.len() as f64;
    Ok(WindowRun {
        hota,
        stats: results.into_iter().map(|r| r.1).collect(),
        wall_time_ms,
    })
}

fn pct(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        0.0
    } else {
        (value - reference) / reference * 100.0
    }
}

/// Tracks the corpus once per memory window. Deltas are taken against the
/// unbounded run (`t_w = 0`), which is computed even when not requested.
pub fn sweep_window(scenes: &[SceneSpec], base: &TrackerConfig, windows: &[usize]) -> Result<SweepReport> {
    if scenes.is_empty() {
        return Err(Error::EmptyInput("scene corpus is empty".into()));
    }
    if windows.is_empty() {
        return Err(Error::Config("no window sizes given".into()));
    }
    let mut runs: BTreeMap<usize, WindowRun> = BTreeMap::new();
    for &w in windows.iter().chain(std::iter::once(&0)) {
        if let Entry::Vacant(slot) = runs.entry(w) {
            slot.insert(run_window(scenes, base, w)?);
        }
    }
    let entries = |r: &WindowRun| r.stats.iter().map(|s| s.peak_memory_entries).sum::<usize>();
    let bytes = |r: &WindowRun| r.stats.iter().map(|s| s.peak_memory_bytes).sum::<usize>();
    let reference = &runs[&0];
    let (ref_hota, ref_mem) = (reference.hota, entries(reference) as f64);
    let rows = windows
        .iter()
        .map(|w| {
            let r = &runs[w];
            SweepRow {
                t_w: *w,
                hota: r.hota,
                peak_memory_entries: entries(r),
                peak_memory_bytes: bytes(r),
                wall_time_ms: r.wall_time_ms,
                hota_delta_pct: pct(r.hota, ref_hota),
                memory_delta_pct: pct(entries(r) as f64, ref_mem),
            }
        })
        .collect();
    Ok(SweepReport { rows })
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:>6} {:>8} {:>10} {:>12} {:>9} {:>9}\n",
            "T_w", "HOTA", "mem", "time ms", "dHOTA %", "dmem %"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:>6} {:>8.2} {:>10} {:>12.1} {:>9.2} {:>9.2}\n",
                r.t_w,
                r.hota * 100.0,
                r.peak_memory_entries,
                r.wall_time_ms,
                r.hota_delta_pct,
                r.memory_delta_pct
            ));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "t_w,hota,peak_memory_entries,peak_memory_bytes,wall_time_ms,hota_delta_pct,memory_delta_pct\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.6},{},{},{:.3},{:.3},{:.3}\n",
                r.t_w,
                r.hota,
                r.peak_memory_entries,
                r.peak_memory_bytes,
                r.wall_time_ms,
                r.hota_delta_pct,
                r.memory_delta_pct
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{perfect_world_corpus, single_object_scene};

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(ablate(&[], &TrackerConfig::default()), Err(Error::EmptyInput(_))));
        assert!(sweep_window(&[], &TrackerConfig::default(), &[3]).is_err());
    }

    #[test]
    fn perfect_world_scores_one() {
        for s in perfect_world_corpus() {
            let (report, _) = evaluate_scene(&s, &TrackerConfig::default()).unwrap();
            for c in &report.classes {
                assert_eq!(c.hota, 1.0, "{} {}", s.name, c.class_name);
            }
        }
    }

    #[test]
    fn sweep_reports_deltas_against_unbounded() {
        let scenes = vec![single_object_scene(40)];
        let r = sweep_window(&scenes, &TrackerConfig::default(), &[4, 40]).unwrap();
        assert_eq!(r.rows[0].peak_memory_entries, 4);
        assert_eq!(r.rows[1].peak_memory_entries, 40);
        assert!((r.rows[0].memory_delta_pct + 90.0).abs() < 1e-9);
        assert_eq!(r.rows[1].memory_delta_pct, 0.0);
        assert!(r.to_csv().starts_with("t_w,"));
    }
}
