//! HOTA, DetA and AssA, plus the frame-gap re-identification analysis.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::assign::max_weight_matching;
use crate::error::{Error, Result};
use crate::features::cosine;
use crate::hierarchy::match_detections_to_gt;
use crate::ingest::SequenceBundle;
use crate::model::{validate_trackset, BBox, TrackSet, Violation};

/// The 19 localization thresholds 0.05, 0.10, ..., 0.95.
pub fn alphas() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// Percentages in [0, 100], means over the alpha grid.
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub alphas: Vec<f64>,
    /// Per-alpha values as fractions in [0, 1].
    pub hota_curve: Vec<f64>,
    pub deta_curve: Vec<f64>,
    pub assa_curve: Vec<f64>,
    pub tp: Vec<u64>,
    pub fn_: Vec<u64>,
    pub fp: Vec<u64>,
    pub gt_tracks: usize,
    pub pred_tracks: usize,
    pub gt_dets: usize,
    pub pred_dets: usize,
}

impl MetricReport {
    /// Aligned text table: summary then one row per alpha.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<8}{:>10}{:>10}{:>10}", "", "HOTA", "DetA", "AssA");
        let _ = writeln!(s, "{:<8}{:>10.3}{:>10.3}{:>10.3}", "mean", self.hota, self.deta, self.assa);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<8}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}",
            "alpha", "HOTA", "DetA", "AssA", "TP", "FN", "FP"
        );
        for i in 0..self.alphas.len() {
            let _ = writeln!(
                s,
                "{:<8.2}{:>10.3}{:>10.3}{:>10.3}{:>10}{:>10}{:>10}",
                self.alphas[i],
                100.0 * self.hota_curve[i],
                100.0 * self.deta_curve[i],
                100.0 * self.assa_curve[i],
                self.tp[i],
                self.fn_[i],
                self.fp[i]
            );
        }
        s
    }

    /// `key=value` lines for scripts.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "hota={:.6}", self.hota);
        let _ = writeln!(s, "deta={:.6}", self.deta);
        let _ = writeln!(s, "assa={:.6}", self.assa);
        let _ = writeln!(s, "gt_tracks={}", self.gt_tracks);
        let _ = writeln!(s, "pred_tracks={}", self.pred_tracks);
        let _ = writeln!(s, "gt_dets={}", self.gt_dets);
        let _ = writeln!(s, "pred_dets={}", self.pred_dets);
        for (i, a) in self.alphas.iter().enumerate() {
            let k = (a * 100.0).round() as u32;
            let _ = writeln!(s, "hota@{k:02}={:.6}", 100.0 * self.hota_curve[i]);
            let _ = writeln!(s, "deta@{k:02}={:.6}", 100.0 * self.deta_curve[i]);
            let _ = writeln!(s, "assa@{k:02}={:.6}", 100.0 * self.assa_curve[i]);
        }
        s
    }
}

/// Boxes of one frame: `(dense track index, box)`.
type FrameBoxes = Vec<(usize, BBox)>;

fn by_frame(t: &TrackSet) -> (BTreeMap<u32, FrameBoxes>, Vec<u64>) {
    let mut frames: BTreeMap<u32, FrameBoxes> = BTreeMap::new();
    let mut counts = vec![0u64; t.tracks.len()];
    for (idx, pts) in t.tracks.values().enumerate() {
        for p in pts {
            frames.entry(p.frame).or_default().push((idx, p.bbox));
            counts[idx] += 1;
        }
    }
    (frames, counts)
}

fn check_input(t: &TrackSet, what: &str) -> Result<()> {
    for v in validate_trackset(t) {
        if let Violation::NonIncreasingFrame { .. } | Violation::DegenerateBox { .. } = v {
            return Err(Error::Validation(format!("{what}: {v}")));
        }
    }
    Ok(())
}

/// Scores `pred` against `gt`.
///
/// Global alignment follows the usual HOTA recipe: per-frame soft IoU counts give
/// potential matches per (gt, pred) pair. For each alpha, every frame is matched
/// independently over pairs with IoU >= alpha, maximizing the number of matches first
/// and the sum of alignment-weighted IoU second. An empty side scores 0.
pub fn evaluate(pred: &TrackSet, gt: &TrackSet) -> Result<MetricReport> {
    check_input(pred, "predictions")?;
    check_input(gt, "ground truth")?;
    let al = alphas();
    let (gt_frames, gt_cnt) = by_frame(gt);
    let (pr_frames, pr_cnt) = by_frame(pred);
    let (ng, np) = (gt_cnt.len(), pr_cnt.len());
    let gt_dets: u64 = gt_cnt.iter().sum();
    let pr_dets: u64 = pr_cnt.iter().sum();

    let empty = Vec::new();
    // per frame: gt boxes, pred boxes, IoU matrix
    let frames: Vec<(&FrameBoxes, &FrameBoxes, Vec<Vec<f64>>)> = gt_frames
        .keys()
        .chain(pr_frames.keys())
        .copied()
        .collect::<std::collections::BTreeSet<u32>>()
        .into_iter()
        .map(|f| {
            let g = gt_frames.get(&f).unwrap_or(&empty);
            let p = pr_frames.get(&f).unwrap_or(&empty);
            let iou = g
                .iter()
                .map(|(_, gb)| p.iter().map(|(_, pb)| gb.iou(pb)).collect())
                .collect();
            (g, p, iou)
        })
        .collect();

    let mut potential = vec![0f64; ng * np];
    for (g, p, iou) in &frames {
        if g.is_empty() || p.is_empty() {
            continue;
        }
        let row: Vec<f64> = iou.iter().map(|r| r.iter().sum()).collect();
        let col: Vec<f64> = (0..p.len()).map(|j| iou.iter().map(|r| r[j]).sum()).collect();
        for (i, (gi, _)) in g.iter().enumerate() {
            for (j, (pj, _)) in p.iter().enumerate() {
                let denom = row[i] + col[j] - iou[i][j];
                if denom > f64::EPSILON {
                    potential[gi * np + pj] += iou[i][j] / denom;
                }
            }
        }
    }
    let align: Vec<f64> = (0..ng * np)
        .map(|k| {
            let (gi, pj) = (k / np, k % np);
            potential[k] / (gt_cnt[gi] as f64 + pr_cnt[pj] as f64 - potential[k])
        })
        .collect();

    let per_alpha: Vec<(f64, f64, u64, u64, u64)> = al
        .par_iter()
        .map(|&alpha| {
            let mut matches = vec![0u64; ng * np];
            let mut tp = 0u64;
            for (g, p, iou) in &frames {
                if g.is_empty() || p.is_empty() {
                    continue;
                }
                let big = g.len().min(p.len()) as f64 + 1.0;
                let w: Vec<Vec<Option<f64>>> = g
                    .iter()
                    .enumerate()
                    .map(|(i, (gi, _))| {
                        p.iter()
                            .enumerate()
                            .map(|(j, (pj, _))| {
                                (iou[i][j] >= alpha - 1e-12)
                                    .then(|| big + align[gi * np + pj] * iou[i][j])
                            })
                            .collect()
                    })
                    .collect();
                for (i, j) in max_weight_matching(&w) {
                    matches[g[i].0 * np + p[j].0] += 1;
                    tp += 1;
                }
            }
            let fn_ = gt_dets - tp;
            let fp = pr_dets - tp;
            if gt_dets == 0 || pr_dets == 0 {
                return (0.0, 0.0, tp, fn_, fp);
            }
            let deta = tp as f64 / (tp + fn_ + fp).max(1) as f64;
            let mut ass_sum = 0f64;
            for k in 0..ng * np {
                if matches[k] > 0 {
                    let (gi, pj) = (k / np, k % np);
                    let m = matches[k] as f64;
                    ass_sum += m * m / (gt_cnt[gi] as f64 + pr_cnt[pj] as f64 - m);
                }
            }
            let assa = ass_sum / tp.max(1) as f64;
            (deta, assa, tp, fn_, fp)
        })
        .collect();

    let n = al.len() as f64;
    let deta_curve: Vec<f64> = per_alpha.iter().map(|r| r.0).collect();
    let assa_curve: Vec<f64> = per_alpha.iter().map(|r| r.1).collect();
    let hota_curve: Vec<f64> = deta_curve
        .iter()
        .zip(&assa_curve)
        .map(|(d, a)| (d * a).sqrt())
        .collect();
    Ok(MetricReport {
        hota: 100.0 * hota_curve.iter().sum::<f64>() / n,
        deta: 100.0 * deta_curve.iter().sum::<f64>() / n,
        assa: 100.0 * assa_curve.iter().sum::<f64>() / n,
        alphas: al,
        hota_curve,
        deta_curve,
        assa_curve,
        tp: per_alpha.iter().map(|r| r.2).collect(),
        fn_: per_alpha.iter().map(|r| r.3).collect(),
        fp: per_alpha.iter().map(|r| r.4).collect(),
        gt_tracks: ng,
        pred_tracks: np,
        gt_dets: gt_dets as usize,
        pred_dets: pr_dets as usize,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapResult {
    pub gap: u32,
    /// Percentage of correct nearest-neighbour matches.
    pub accuracy: f64,
    pub queries: usize,
    pub correct: usize,
    /// Frames `i` where no identity was visible in both `i` and `i + gap`.
    pub skipped_frames: usize,
}

/// For every gap `N`, matches each identity visible in frames `i` and `i + N` to the
/// cosine-nearest appearance among all detections of frame `i + N`.
///
/// Detections carry identities through IoU >= 0.5 matching against the ground truth.
pub fn reid_gap_analysis(seq: &SequenceBundle, gaps: &[u32]) -> Result<Vec<GapResult>> {
    let gt = seq
        .gt
        .as_ref()
        .ok_or_else(|| Error::Validation("gap analysis needs ground-truth tracks".into()))?;
    let ids = match_detections_to_gt(&seq.detections, gt, 0.5);
    // frame -> [(identity, appearance)]
    let mut frames: BTreeMap<u32, Vec<(Option<u32>, Vec<f64>)>> = BTreeMap::new();
    for d in &seq.detections {
        let app = seq.features.records[&d.det_id]
            .appearance
            .iter()
            .map(|&v| v as f64)
            .collect();
        frames
            .entry(d.frame)
            .or_default()
            .push((ids.get(&d.det_id).copied(), app));
    }
    let last = frames.keys().next_back().copied().unwrap_or(0);
    Ok(gaps
        .par_iter()
        .map(|&gap| {
            let (mut queries, mut correct, mut skipped) = (0usize, 0usize, 0usize);
            for (&f, here) in &frames {
                if f + gap > last {
                    break;
                }
                let Some(there) = frames.get(&(f + gap)) else {
                    skipped += 1;
                    continue;
                };
                let present: HashMap<u32, usize> = there
                    .iter()
                    .enumerate()
                    .filter_map(|(k, (id, _))| id.map(|id| (id, k)))
                    .collect();
                let mut any = false;
                for (id, app) in here {
                    let Some(id) = id else { continue };
                    if !present.contains_key(id) {
                        continue;
                    }
                    any = true;
                    queries += 1;
                    let mut best = (f64::NEG_INFINITY, usize::MAX);
                    for (k, (_, cand)) in there.iter().enumerate() {
                        let c = cosine(app, cand).unwrap_or(-1.0);
                        if c > best.0 {
                            best = (c, k);
                        }
                    }
                    if there[best.1].0 == Some(*id) {
                        correct += 1;
                    }
                }
                if !any {
                    skipped += 1;
                }
            }
            GapResult {
                gap,
                accuracy: if queries == 0 {
                    0.0
                } else {
                    100.0 * correct as f64 / queries as f64
                },
                queries,
                correct,
                skipped_frames: skipped,
            }
        })
        .collect())
}

pub fn format_gap_table(results: &[GapResult]) -> String {
    let mut s = format!("{:>6}{:>10}{:>10}{:>10}\n", "gap", "accuracy", "queries", "skipped");
    for r in results {
        let _ = writeln!(
            s,
            "{:>6}{:>10.2}{:>10}{:>10}",
            r.gap, r.accuracy, r.queries, r.skipped_frames
        );
    }
    s
}
