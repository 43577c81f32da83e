//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use hiertrack::features::EdgeLayout;
use hiertrack::hierarchy::training_graphs;
use hiertrack::ingest::SequenceBundle;
use hiertrack::model::{
    AssocGraph, BBox, Detection, Edge, FeatureBundle, Position, SequenceMeta, TrackPoint, TrackSet,
    Tracklet, CHAR_LEN, JERSEY_LEN,
};
use hiertrack::scorer::{train_scorer, ScorerWeights, TrainParams};
use rand::Rng;

// ---------------------------------------------------------------------------
// graphs

pub fn node(i: u32, frame: u32) -> Tracklet {
    let d = Detection {
        det_id: i,
        frame,
        bbox: BBox::new(0.0, 0.0, 10.0, 20.0),
        confidence: 1.0,
    };
    let b = FeatureBundle {
        appearance: vec![1.0],
        jersey: vec![0.0; JERSEY_LEN],
        legible: false,
        team: [1.0, 0.0, 0.0],
        position: Position::Field { x: 0.0, y: 0.0 },
    };
    Tracklet::from_detection(i, &d, &b)
}

pub fn graph(frames: &[u32], edges: &[(usize, usize, f32)]) -> AssocGraph {
    AssocGraph {
        level: 1,
        window: (0, 1 + frames.iter().copied().max().unwrap_or(0)),
        nodes: frames.iter().enumerate().map(|(i, &f)| node(i as u32, f)).collect(),
        edges: edges
            .iter()
            .map(|&(src, dst, score)| Edge {
                src,
                dst,
                features: vec![],
                score,
            })
            .collect(),
    }
}

/// Random forward graph with at most `max_edges` edges and no score equal to the threshold.
pub fn random_graph(rng: &mut impl Rng, max_nodes: usize, max_edges: usize) -> AssocGraph {
    let n = rng.random_range(2..=max_nodes);
    let frames: Vec<u32> = (0..n).map(|_| rng.random_range(0..5)).collect();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| frames[i] < frames[j])
        .collect();
    let m = if pairs.is_empty() {
        0
    } else {
        rng.random_range(0..=max_edges)
    };
    let edges: Vec<(usize, usize, f32)> = (0..m)
        .map(|_| {
            let (s, d) = pairs[rng.random_range(0..pairs.len())];
            let mut score: f32 = rng.random_range(0.0..1.0);
            if score == 0.5 {
                score = 0.75;
            }
            (s, d, score)
        })
        .collect();
    graph(&frames, &edges)
}

/// True when no node has two accepted outgoing or two accepted incoming edges.
pub fn feasible(g: &AssocGraph, accepted: &[usize]) -> bool {
    let mut outs = BTreeSet::new();
    let mut ins = BTreeSet::new();
    accepted
        .iter()
        .all(|&i| outs.insert(g.edges[i].src) && ins.insert(g.edges[i].dst))
}

/// Best total surplus by enumerating every edge subset.
pub fn brute_force_surplus(g: &AssocGraph, threshold: f64) -> f64 {
    let m = g.edges.len();
    assert!(m <= 16);
    let mut best = 0.0f64;
    for mask in 0u32..(1 << m) {
        let chosen: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        if !feasible(g, &chosen) {
            continue;
        }
        let s: f64 = chosen.iter().map(|&i| g.edges[i].score as f64 - threshold).sum();
        best = best.max(s);
    }
    best
}

// ---------------------------------------------------------------------------
// tracks

pub fn point(frame: u32, det_id: u32, b: [f32; 4]) -> TrackPoint {
    TrackPoint {
        frame,
        det_id,
        bbox: BBox::new(b[0], b[1], b[2], b[3]),
        confidence: 1.0,
    }
}

pub fn trackset(tracks: Vec<(u32, Vec<TrackPoint>)>) -> TrackSet {
    TrackSet {
        tracks: tracks.into_iter().filter(|(_, p)| !p.is_empty()).collect(),
        meta: SequenceMeta::default(),
    }
}

/// Small random gt/pred pair: up to `max_frames` frames and `max_ids` identities per side.
pub fn random_instance(rng: &mut impl Rng, max_frames: u32, max_ids: u32) -> (TrackSet, TrackSet) {
    let frames = rng.random_range(1..=max_frames);
    let ng = rng.random_range(0..=max_ids);
    let np = rng.random_range(0..=max_ids);
    let mut gt_boxes: BTreeMap<u32, Vec<[f32; 4]>> = BTreeMap::new();
    let mut det = 0u32;
    let mut gt = Vec::new();
    for id in 0..ng {
        let mut pts = Vec::new();
        for f in 0..frames {
            if rng.random_bool(0.8) {
                let b = [
                    rng.random_range(0.0..60.0),
                    rng.random_range(0.0..60.0),
                    rng.random_range(10.0..40.0),
                    rng.random_range(10.0..40.0),
                ];
                gt_boxes.entry(f).or_default().push(b);
                pts.push(point(f, det, b));
                det += 1;
            }
        }
        gt.push((id, pts));
    }
    let mut pred = Vec::new();
    for id in 0..np {
        let mut pts = Vec::new();
        for f in 0..frames {
            if !rng.random_bool(0.8) {
                continue;
            }
            let near = gt_boxes.get(&f).filter(|v| !v.is_empty() && rng.random_bool(0.85));
            let b = match near {
                Some(v) => {
                    let g = v[rng.random_range(0..v.len())];
                    [
                        g[0] + rng.random_range(-6.0..6.0),
                        g[1] + rng.random_range(-6.0..6.0),
                        (g[2] + rng.random_range(-5.0..5.0)).max(2.0),
                        (g[3] + rng.random_range(-5.0..5.0)).max(2.0),
                    ]
                }
                None => [
                    rng.random_range(0.0..60.0),
                    rng.random_range(0.0..60.0),
                    rng.random_range(10.0..40.0),
                    rng.random_range(10.0..40.0),
                ],
            };
            pts.push(point(f, det, b));
            det += 1;
        }
        pred.push((id, pts));
    }
    (trackset(pred), trackset(gt))
}

fn iou(a: &BBox, b: &BBox) -> f64 {
    let (ax, ay, aw, ah) = (a.x as f64, a.y as f64, a.w as f64, a.h as f64);
    let (bx, by, bw, bh) = (b.x as f64, b.y as f64, b.w as f64, b.h as f64);
    let ix = ((ax + aw).min(bx + bw) - ax.max(bx)).max(0.0);
    let iy = ((ay + ah).min(by + bh) - ay.max(by)).max(0.0);
    let inter = ix * iy;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (aw * ah + bw * bh - inter)
}

#[derive(Debug, Clone, Copy)]
pub struct Scores {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
}

/// Best partial matching of one frame by (count, alignment-weighted IoU), by enumeration.
fn best_matching(iou: &[Vec<f64>], weight: &dyn Fn(usize, usize) -> f64, alpha: f64) -> Vec<(usize, usize)> {
    fn rec(
        i: usize,
        iou: &[Vec<f64>],
        weight: &dyn Fn(usize, usize) -> f64,
        alpha: f64,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        best: &mut (usize, f64, Vec<(usize, usize)>),
    ) {
        if i == iou.len() {
            let s: f64 = cur.iter().map(|&(a, b)| weight(a, b) * iou[a][b]).sum();
            if cur.len() > best.0 || (cur.len() == best.0 && s > best.1 + 1e-12) {
                *best = (cur.len(), s, cur.clone());
            }
            return;
        }
        rec(i + 1, iou, weight, alpha, used, cur, best);
        for j in 0..used.len() {
            if !used[j] && iou[i][j] >= alpha {
                used[j] = true;
                cur.push((i, j));
                rec(i + 1, iou, weight, alpha, used, cur, best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let np = iou.first().map_or(0, Vec::len);
    let mut best = (0, f64::NEG_INFINITY, Vec::new());
    rec(0, iou, weight, alpha, &mut vec![false; np], &mut Vec::new(), &mut best);
    best.2
}

/// HOTA, DetA and AssA in percent, computed from the definitions by enumeration.
pub fn oracle_hota(pred: &TrackSet, gt: &TrackSet) -> Scores {
    let zero = Scores {
        hota: 0.0,
        deta: 0.0,
        assa: 0.0,
    };
    let gt_n = gt.num_points();
    let pr_n = pred.num_points();
    if gt_n == 0 || pr_n == 0 {
        return zero;
    }
    let gt_ids: Vec<u32> = gt.tracks.keys().copied().collect();
    let pr_ids: Vec<u32> = pred.tracks.keys().copied().collect();
    let gt_len: Vec<f64> = gt_ids.iter().map(|i| gt.tracks[i].len() as f64).collect();
    let pr_len: Vec<f64> = pr_ids.iter().map(|i| pred.tracks[i].len() as f64).collect();

    type Frame = (Vec<(usize, BBox)>, Vec<(usize, BBox)>);
    let mut frames: BTreeMap<u32, Frame> = BTreeMap::new();
    for (k, id) in gt_ids.iter().enumerate() {
        for p in &gt.tracks[id] {
            frames.entry(p.frame).or_default().0.push((k, p.bbox));
        }
    }
    for (k, id) in pr_ids.iter().enumerate() {
        for p in &pred.tracks[id] {
            frames.entry(p.frame).or_default().1.push((k, p.bbox));
        }
    }

    // soft co-occurrence of each identity pair
    let mut pot = vec![vec![0.0; pr_ids.len()]; gt_ids.len()];
    for (g, p) in frames.values() {
        let m: Vec<Vec<f64>> = g.iter().map(|a| p.iter().map(|b| iou(&a.1, &b.1)).collect()).collect();
        for i in 0..g.len() {
            for j in 0..p.len() {
                let row: f64 = m[i].iter().sum();
                let col: f64 = m.iter().map(|r| r[j]).sum();
                let d = row + col - m[i][j];
                if d > 0.0 {
                    pot[g[i].0][p[j].0] += m[i][j] / d;
                }
            }
        }
    }
    let align = |a: usize, b: usize| pot[a][b] / (gt_len[a] + pr_len[b] - pot[a][b]);

    let (mut h, mut d, mut s) = (0.0, 0.0, 0.0);
    for k in 1..20 {
        let alpha = k as f64 / 20.0;
        let mut counts = vec![vec![0.0f64; pr_ids.len()]; gt_ids.len()];
        let mut tp = 0.0;
        for (g, p) in frames.values() {
            let m: Vec<Vec<f64>> = g.iter().map(|a| p.iter().map(|b| iou(&a.1, &b.1)).collect()).collect();
            let w = |i: usize, j: usize| align(g[i].0, p[j].0);
            for (i, j) in best_matching(&m, &w, alpha - 1e-12) {
                counts[g[i].0][p[j].0] += 1.0;
                tp += 1.0;
            }
        }
        let fn_ = gt_n as f64 - tp;
        let fp = pr_n as f64 - tp;
        let deta = tp / (tp + fn_ + fp);
        let mut assa = 0.0;
        if tp > 0.0 {
            for a in 0..gt_ids.len() {
                for b in 0..pr_ids.len() {
                    let c = counts[a][b];
                    if c > 0.0 {
                        assa += c * (c / (gt_len[a] + pr_len[b] - c));
                    }
                }
            }
            assa /= tp;
        }
        h += (deta * assa).sqrt();
        d += deta;
        s += assa;
    }
    Scores {
        hota: 100.0 * h / 19.0,
        deta: 100.0 * d / 19.0,
        assa: 100.0 * s / 19.0,
    }
}

// ---------------------------------------------------------------------------
// jersey

/// Number probabilities as independent products of the two character positions.
pub fn jersey_oracle(c1: &[f32; CHAR_LEN], c2: &[f32; CHAR_LEN]) -> (Vec<f64>, bool) {
    let top = c1
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v > c1[b] { i } else { b });
    if top == 0 {
        return (vec![0.0; JERSEY_LEN], false);
    }
    let out = (0..JERSEY_LEN)
        .map(|n| {
            if n < 10 {
                c1[n + 1] as f64 * c2[0] as f64
            } else {
                c1[n / 10 + 1] as f64 * c2[n % 10 + 1] as f64
            }
        })
        .collect();
    (out, true)
}

pub fn random_confidences(rng: &mut impl Rng) -> [f32; CHAR_LEN] {
    let mut v = [0f32; CHAR_LEN];
    for x in &mut v {
        *x = rng.random_range(0.0f32..1.0).powi(3);
    }
    let s: f32 = v.iter().sum();
    v.map(|x| x / s)
}

// ---------------------------------------------------------------------------
// training

pub fn quick_params() -> TrainParams {
    TrainParams {
        learning_rate: 0.05,
        stage_iters: 60,
        epochs: 200,
        max_edges_per_level: 4000,
        ..TrainParams::default()
    }
}

/// Trains scorer weights matching the bundle's configuration on its own ground truth.
pub fn train_on(seq: &SequenceBundle, hp: &TrainParams, seed: u64) -> ScorerWeights {
    let cfg = &seq.config;
    let graphs = training_graphs(seq).expect("training graphs");
    let layout = EdgeLayout::new(cfg.spatial_mode, &cfg.features);
    let init = ScorerWeights::init(cfg.scorer, cfg.levels, &layout, 16, cfg.mp_rounds, seed);
    train_scorer(&graphs, init, hp, seed).expect("training").weights
}
