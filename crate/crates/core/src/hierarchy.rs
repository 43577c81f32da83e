//! Graph hierarchy over sliding windows.
//!
//! A window of `max_temporal_span(L)` frames is solved bottom-up: level `l` splits the
//! window into sub-windows of `level_window(L, l)` frames, builds one association graph
//! per sub-window, scores and rounds it, and promotes the resulting chains to tracklets
//! for level `l + 1`. Windows overlap by half and are stitched afterwards.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{debug, warn};
use rayon::prelude::*;

use crate::assign::max_weight_matching;
use crate::error::{Error, Result};
use crate::features::{build_bundles, cosine, node_similarities, position_distance, SimilarityContext};
use crate::ingest::{write_text, SequenceBundle};
use crate::model::{
    level_window, AssocGraph, DetId, Detection, Edge, EngineConfig, FeatureBundle, Position,
    RoundingKind, SequenceMeta, TrackPoint, TrackSet, Tracklet,
};
use crate::rounding::{edge_pairs, exact_round, extract_chains, greedy_round};
use crate::scorer::{score_edges, GraphInput, LabeledGraph, ScorerWeights};

/// Normalized distance between `a`'s last and `b`'s first position.
fn normalized_distance(a: &Tracklet, b: &Tracklet, ctx: &SimilarityContext, cfg: &EngineConfig) -> f64 {
    let d = position_distance(&a.last.position, &b.first.position);
    match a.last.position {
        Position::Field { .. } => d / cfg.field_norm_m,
        Position::Frame { .. } => d / ctx.image_diag,
    }
}

/// Indices of the `k` best candidates by descending score, ties to the smaller index.
fn top_k(cands: &mut [(f64, usize)], k: usize) -> Vec<usize> {
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    cands.iter().take(k).map(|c| c.1).collect()
}

/// Builds the pruned candidate graph over `nodes`.
///
/// Every forward pair inside `window` is a candidate. An edge survives when the
/// destination is among the source's `K` best successors and the source is among the
/// destination's `K` best predecessors by pruning score.
pub fn build_level_graph(
    mut nodes: Vec<Tracklet>,
    level: u32,
    window: (u32, u32),
    ctx: &SimilarityContext,
    cfg: &EngineConfig,
) -> Result<AssocGraph> {
    nodes.sort_by_key(|n| (n.first_frame(), n.detections[0]));
    let n = nodes.len();
    let k = cfg.prune_k;
    let mask = &ctx.mask;
    let apps: Vec<Vec<f64>> = if mask.appearance {
        nodes.iter().map(|t| t.agg_appearance()).collect()
    } else {
        Vec::new()
    };
    let prune_score = |i: usize, j: usize| {
        let app = if mask.appearance {
            cosine(&apps[i], &apps[j]).unwrap_or(0.0)
        } else {
            0.0
        };
        let dist = if mask.spatial {
            normalized_distance(&nodes[i], &nodes[j], ctx, cfg)
        } else {
            0.0
        };
        app - cfg.prune_spatial_weight * dist
    };

    let mut outgoing: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n];
    let mut incoming: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if nodes[i].last_frame() < nodes[j].first_frame() {
                let s = prune_score(i, j);
                outgoing[i].push((s, j));
                incoming[j].push((s, i));
            }
        }
    }
    let keep_out: Vec<Vec<usize>> = outgoing.iter_mut().map(|c| top_k(c, k)).collect();
    let keep_in: Vec<Vec<usize>> = incoming.iter_mut().map(|c| top_k(c, k)).collect();

    let mut edges = Vec::new();
    for (i, outs) in keep_out.iter().enumerate() {
        let mut outs = outs.clone();
        outs.sort_unstable();
        for j in outs {
            if keep_in[j].contains(&i) {
                edges.push(Edge {
                    src: i,
                    dst: j,
                    features: node_similarities(&nodes[i], &nodes[j], ctx)?,
                    score: 0.0,
                });
            }
        }
    }
    Ok(AssocGraph {
        level,
        window,
        nodes,
        edges,
    })
}

/// Turns the accepted chains of `g` into tracklets of the next level.
///
/// Node ids are left at zero; callers renumber once all graphs of a level are promoted.
pub fn promote_tracklets(g: &AssocGraph, accepted: &[usize]) -> Result<Vec<Tracklet>> {
    let chains = extract_chains(g.nodes.len(), &edge_pairs(g, accepted))?;
    chains
        .iter()
        .map(|c| {
            let parts: Vec<&Tracklet> = c.iter().map(|&i| &g.nodes[i]).collect();
            Tracklet::chain(0, g.level + 1, &parts)
        })
        .collect()
}

/// How a level graph gets its accepted edges.
#[derive(Clone, Copy)]
pub enum EdgeSolver<'a> {
    /// Score with trained weights and round with the configured solver.
    Learned(&'a ScorerWeights),
    /// Accept exactly the ground-truth edges; detections map to identities.
    Oracle(&'a HashMap<DetId, u32>),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for per-graph edge-list dumps.
    pub debug_dir: Option<PathBuf>,
    /// Keep every graph with oracle labels (requires [`EdgeSolver::Oracle`]).
    pub collect_training: bool,
}

#[derive(Debug, Clone)]
pub struct HierarchyOutput {
    pub tracks: TrackSet,
    pub training: Vec<LabeledGraph>,
    pub windows: Vec<(u32, u32)>,
}

/// Consecutive same-identity labels: `a -> b` is positive when both endpoints carry the
/// same identity and `b` is the first node of that identity after `a`.
pub fn oracle_labels(g: &AssocGraph, ids: &HashMap<DetId, u32>) -> Vec<f64> {
    let tail = |t: &Tracklet| ids.get(t.detections.last().unwrap()).copied();
    let head = |t: &Tracklet| ids.get(&t.detections[0]).copied();
    // next node of the same identity, by first frame
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut by_id: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, t) in g.nodes.iter().enumerate() {
        if let Some(id) = head(t) {
            by_id.entry(id).or_default().push(i);
        }
    }
    for (i, t) in g.nodes.iter().enumerate() {
        let Some(id) = tail(t) else { continue };
        let best = by_id.get(&id).and_then(|c| {
            c.iter()
                .copied()
                .filter(|&j| g.nodes[j].first_frame() > t.last_frame())
                .min_by_key(|&j| (g.nodes[j].first_frame(), j))
        });
        if let Some(j) = best {
            next.insert(i, j);
        }
    }
    g.edges
        .iter()
        .map(|e| (next.get(&e.src) == Some(&e.dst)) as u8 as f64)
        .collect()
}

fn solve_graph(
    g: &mut AssocGraph,
    solver: EdgeSolver<'_>,
    cfg: &EngineConfig,
) -> Result<(Vec<usize>, Option<Vec<f64>>)> {
    match solver {
        EdgeSolver::Learned(w) => {
            score_edges(g, w)?;
            let acc = match cfg.rounding {
                RoundingKind::Greedy => greedy_round(g, cfg.edge_threshold),
                RoundingKind::Exact => {
                    if g.nodes.len() > cfg.exact_cap {
                        warn!(
                            "level {} graph has {} nodes, above exact cap {}; using greedy",
                            g.level,
                            g.nodes.len(),
                            cfg.exact_cap
                        );
                        greedy_round(g, cfg.edge_threshold)
                    } else {
                        exact_round(g, cfg.edge_threshold, cfg.exact_cap)?
                    }
                }
            };
            Ok((acc, None))
        }
        EdgeSolver::Oracle(ids) => {
            let labels = oracle_labels(g, ids);
            for (e, &y) in g.edges.iter_mut().zip(&labels) {
                e.score = y as f32;
            }
            Ok((greedy_round(g, 0.5), Some(labels)))
        }
    }
}

fn dump_graph(dir: &Path, window_start: u32, g: &AssocGraph, accepted: &[usize]) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# level {} window {} {} nodes {} edges {}",
        g.level,
        g.window.0,
        g.window.1,
        g.nodes.len(),
        g.edges.len()
    );
    let _ = writeln!(s, "# src_det\tdst_det\tsrc_last_frame\tdst_first_frame\tscore\taccepted");
    let acc: std::collections::HashSet<usize> = accepted.iter().copied().collect();
    for (i, e) in g.edges.iter().enumerate() {
        let (a, b) = (&g.nodes[e.src], &g.nodes[e.dst]);
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{:.6}\t{}",
            a.detections[0],
            b.detections[0],
            a.last_frame(),
            b.first_frame(),
            e.score,
            acc.contains(&i) as u8
        );
    }
    let name = format!(
        "window{:06}_level{:02}_frames{:06}-{:06}.tsv",
        window_start, g.level, g.window.0, g.window.1
    );
    write_text(&dir.join(name), &s)
}

struct WindowResult {
    start: u32,
    end: u32,
    chains: Vec<Vec<DetId>>,
    training: Vec<LabeledGraph>,
}

fn renumber(mut ts: Vec<Tracklet>) -> Vec<Tracklet> {
    ts.sort_by_key(|t| (t.first_frame(), t.detections[0]));
    for (i, t) in ts.iter_mut().enumerate() {
        t.node_id = i as u32;
    }
    ts
}

fn run_window(
    start: u32,
    end: u32,
    level1: Vec<Tracklet>,
    solver: EdgeSolver<'_>,
    ctx: &SimilarityContext,
    cfg: &EngineConfig,
    opts: &RunOptions,
) -> Result<WindowResult> {
    let mut nodes = renumber(level1);
    let mut training = Vec::new();
    for level in 1..=cfg.levels {
        let len = level_window(cfg.levels, level);
        let mut groups: BTreeMap<u32, Vec<Tracklet>> = BTreeMap::new();
        for t in nodes {
            groups.entry((t.first_frame() - start) / len).or_default().push(t);
        }
        let solved: Vec<Result<(Vec<Tracklet>, Option<LabeledGraph>)>> = groups
            .into_par_iter()
            .map(|(slot, members)| {
                let ws = start + slot * len;
                let mut g = build_level_graph(members, level, (ws, ws + len), ctx, cfg)?;
                let (accepted, labels) = solve_graph(&mut g, solver, cfg)?;
                if let Some(dir) = &opts.debug_dir {
                    if !g.edges.is_empty() {
                        dump_graph(dir, start, &g, &accepted)?;
                    }
                }
                let labeled = match labels {
                    Some(labels) if opts.collect_training && !labels.is_empty() => Some(LabeledGraph {
                        graph: GraphInput::from_graph(&g),
                        labels,
                    }),
                    _ => None,
                };
                Ok((promote_tracklets(&g, &accepted)?, labeled))
            })
            .collect();
        let mut next = Vec::new();
        for r in solved {
            let (ts, lg) = r?;
            next.extend(ts);
            training.extend(lg);
        }
        nodes = renumber(next);
    }
    debug!("window [{start}, {end}) produced {} tracklets", nodes.len());
    Ok(WindowResult {
        start,
        end,
        chains: nodes.into_iter().map(|t| t.detections).collect(),
        training,
    })
}

/// Window start frames: stride apart from 0 until a window reaches `frame_end`.
pub fn window_starts(frame_end: u32, span: u32, stride: u32) -> Vec<u32> {
    let mut out = vec![0];
    let mut s = 0u32;
    while s + span < frame_end {
        s += stride;
        out.push(s);
    }
    out
}

/// Tracks of one window in local order.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTracks {
    pub start: u32,
    pub end: u32,
    pub tracks: Vec<Vec<TrackPoint>>,
}

/// Merges consecutive windows into one track set.
///
/// Tracks of adjacent windows are paired by the number of detections they share,
/// largest first (ties: earlier predecessor, then earlier successor). Inside each overlap
/// the predecessor window owns frames before the overlap midpoint and the successor
/// owns the rest, so every detection ends up in exactly one output track.
pub fn stitch_windows(windows: &[WindowTracks], meta: SequenceMeta) -> TrackSet {
    let mut global: Vec<Vec<TrackPoint>> = Vec::new();
    // global index of each track of the previous window
    let mut prev_map: Vec<Option<usize>> = Vec::new();
    let mut prev: Option<&WindowTracks> = None;
    for w in windows {
        match prev {
            None => {
                for t in &w.tracks {
                    prev_map.push(Some(global.len()));
                    global.push(t.clone());
                }
            }
            Some(p) => {
                let ov_start = w.start;
                let ov_end = p.end.min(w.end);
                let mid = if ov_end > ov_start {
                    ov_start + (ov_end - ov_start) / 2
                } else {
                    w.start
                };
                let mut owner: HashMap<DetId, usize> = HashMap::new();
                for (i, t) in p.tracks.iter().enumerate() {
                    for pt in t.iter().filter(|pt| pt.frame >= ov_start) {
                        owner.insert(pt.det_id, i);
                    }
                }
                let mut shared: BTreeMap<(usize, usize), usize> = BTreeMap::new();
                for (j, t) in w.tracks.iter().enumerate() {
                    for pt in t.iter().filter(|pt| pt.frame < ov_end) {
                        if let Some(&i) = owner.get(&pt.det_id) {
                            *shared.entry((i, j)).or_default() += 1;
                        }
                    }
                }
                let mut pairs: Vec<((usize, usize), usize)> = shared.into_iter().collect();
                pairs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
                let mut pred_used = vec![false; p.tracks.len()];
                let mut succ_of: Vec<Option<usize>> = vec![None; w.tracks.len()];
                for ((i, j), _) in pairs {
                    if !pred_used[i] && succ_of[j].is_none() {
                        pred_used[i] = true;
                        succ_of[j] = Some(i);
                    }
                }
                // predecessor tracks give up everything from the midpoint on
                for g in prev_map.iter().flatten() {
                    global[*g].retain(|pt| pt.frame < mid);
                }
                let mut map = Vec::with_capacity(w.tracks.len());
                for (j, t) in w.tracks.iter().enumerate() {
                    let tail = t.iter().filter(|pt| pt.frame >= mid).copied();
                    let target = succ_of[j].and_then(|i| prev_map[i]);
                    match target {
                        Some(g) => {
                            global[g].extend(tail);
                            map.push(Some(g));
                        }
                        None => {
                            let pts: Vec<TrackPoint> = tail.collect();
                            if pts.is_empty() {
                                map.push(None);
                            } else {
                                map.push(Some(global.len()));
                                global.push(pts);
                            }
                        }
                    }
                }
                prev_map = map;
            }
        }
        prev = Some(w);
    }
    let mut tracks: Vec<Vec<TrackPoint>> = global.into_iter().filter(|t| !t.is_empty()).collect();
    for t in &mut tracks {
        t.sort_by_key(|pt| (pt.frame, pt.det_id));
    }
    tracks.sort_by_key(|t| (t[0].frame, t[0].det_id));
    TrackSet {
        tracks: tracks
            .into_iter()
            .enumerate()
            .map(|(i, t)| (i as u32, t))
            .collect(),
        meta,
    }
}

fn check_weights(w: &ScorerWeights, cfg: &EngineConfig, ctx: &SimilarityContext) -> Result<()> {
    w.check_layout(&ctx.layout)?;
    if w.meta.levels != cfg.levels {
        return Err(Error::Weights(format!(
            "weights were trained for {} levels, configuration uses {}",
            w.meta.levels, cfg.levels
        )));
    }
    if w.meta.kind != cfg.scorer {
        warn!(
            "configuration asks for the {} scorer, weights are {}; using the weights",
            cfg.scorer, w.meta.kind
        );
    }
    Ok(())
}

/// Similarity context for a sequence under its configuration.
pub fn similarity_context(seq: &SequenceBundle) -> SimilarityContext {
    let cfg = &seq.config;
    SimilarityContext::new(
        cfg.spatial_mode,
        cfg.features,
        cfg.levels,
        seq.meta.width,
        seq.meta.height,
    )
}

/// Full pipeline over explicit detections and bundles.
pub fn run_hierarchy_on(
    detections: &[Detection],
    bundles: &[FeatureBundle],
    meta: SequenceMeta,
    cfg: &EngineConfig,
    ctx: &SimilarityContext,
    solver: EdgeSolver<'_>,
    opts: &RunOptions,
) -> Result<HierarchyOutput> {
    cfg.validate()?;
    if let EdgeSolver::Learned(w) = solver {
        check_weights(w, cfg, ctx)?;
    }
    if let Some(dir) = &opts.debug_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let span = cfg.span();
    let stride = cfg.stride();
    let frame_end = detections.iter().map(|d| d.frame + 1).max().unwrap_or(0);
    let starts = if detections.is_empty() {
        Vec::new()
    } else {
        window_starts(frame_end, span, stride)
    };

    let results: Vec<Result<WindowResult>> = starts
        .par_iter()
        .map(|&s| {
            let e = s + span;
            let level1: Vec<Tracklet> = detections
                .iter()
                .zip(bundles)
                .filter(|(d, _)| d.frame >= s && d.frame < e)
                .map(|(d, b)| Tracklet::from_detection(0, d, b))
                .collect();
            run_window(s, e, level1, solver, ctx, cfg, opts)
        })
        .collect();

    let by_id: HashMap<DetId, &Detection> = detections.iter().map(|d| (d.det_id, d)).collect();
    let mut windows = Vec::with_capacity(results.len());
    let mut training = Vec::new();
    for r in results {
        let r = r?;
        windows.push(WindowTracks {
            start: r.start,
            end: r.end,
            tracks: r
                .chains
                .iter()
                .map(|c| {
                    c.iter()
                        .map(|id| {
                            let d = by_id[id];
                            TrackPoint {
                                frame: d.frame,
                                det_id: d.det_id,
                                bbox: d.bbox,
                                confidence: d.confidence,
                            }
                        })
                        .collect()
                })
                .collect(),
        });
        training.extend(r.training);
    }
    let window_ranges = windows.iter().map(|w| (w.start, w.end)).collect();
    let mut meta = meta;
    meta.frame_count = meta.frame_count.max(frame_end);
    let tracks = stitch_windows(&windows, meta);
    Ok(HierarchyOutput {
        tracks,
        training,
        windows: window_ranges,
    })
}

/// Tracks a loaded sequence with trained weights.
pub fn run_hierarchy(seq: &SequenceBundle, weights: &ScorerWeights) -> Result<TrackSet> {
    run_hierarchy_with(seq, EdgeSolver::Learned(weights), &RunOptions::default())
        .map(|o| o.tracks)
}

pub fn run_hierarchy_with(
    seq: &SequenceBundle,
    solver: EdgeSolver<'_>,
    opts: &RunOptions,
) -> Result<HierarchyOutput> {
    let bundles = build_bundles(seq)?;
    let ctx = similarity_context(seq);
    run_hierarchy_on(&seq.detections, &bundles, seq.meta, &seq.config, &ctx, solver, opts)
}

/// Per-frame IoU matching of detections to ground-truth boxes (IoU >= `min_iou`,
/// maximizing total IoU). Returns the ground-truth identity of each matched detection.
pub fn match_detections_to_gt(
    detections: &[Detection],
    gt: &TrackSet,
    min_iou: f64,
) -> HashMap<DetId, u32> {
    let mut gt_by_frame: BTreeMap<u32, Vec<(u32, &TrackPoint)>> = BTreeMap::new();
    for (&id, pts) in &gt.tracks {
        for p in pts {
            gt_by_frame.entry(p.frame).or_default().push((id, p));
        }
    }
    let mut det_by_frame: BTreeMap<u32, Vec<&Detection>> = BTreeMap::new();
    for d in detections {
        det_by_frame.entry(d.frame).or_default().push(d);
    }
    let mut out = HashMap::new();
    for (frame, dets) in det_by_frame {
        let Some(gts) = gt_by_frame.get(&frame) else { continue };
        let w: Vec<Vec<Option<f64>>> = dets
            .iter()
            .map(|d| {
                gts.iter()
                    .map(|(_, g)| {
                        let iou = d.bbox.iou(&g.bbox);
                        (iou >= min_iou).then_some(iou)
                    })
                    .collect()
            })
            .collect();
        for (r, c) in max_weight_matching(&w) {
            out.insert(dets[r].det_id, gts[c].0);
        }
    }
    out
}

/// Labeled graphs of every level, built along ground-truth rounding.
pub fn training_graphs(seq: &SequenceBundle) -> Result<Vec<LabeledGraph>> {
    let gt = seq
        .gt
        .as_ref()
        .ok_or_else(|| Error::Training("training needs ground-truth tracks".into()))?;
    let ids = match_detections_to_gt(&seq.detections, gt, 0.5);
    let opts = RunOptions {
        debug_dir: None,
        collect_training: true,
    };
    Ok(run_hierarchy_with(seq, EdgeSolver::Oracle(&ids), &opts)?.training)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::EdgeLayout;
    use crate::model::{BBox, FeatureMask, SpatialMode, JERSEY_LEN};

    fn tracklet(det: u32, frame: u32, app: Vec<f32>, x: f32) -> Tracklet {
        let d = Detection {
            det_id: det,
            frame,
            bbox: BBox::new(x, 0.0, 1.0, 2.0),
            confidence: 1.0,
        };
        let b = FeatureBundle {
            appearance: app,
            jersey: vec![0.0; JERSEY_LEN],
            legible: false,
            team: [1.0, 0.0, 0.0],
            position: Position::Field { x, y: 0.0 },
        };
        Tracklet::from_detection(det, &d, &b)
    }

    fn ctx(levels: u32) -> SimilarityContext {
        SimilarityContext::new(SpatialMode::Field, FeatureMask::default(), levels, 1920, 1080)
    }

    #[test]
    fn complete_forward_dag_under_k() {
        let nodes = (0..3).map(|i| tracklet(i, i, vec![1.0, 0.0], 0.0)).collect();
        let g = build_level_graph(nodes, 1, (0, 4), &ctx(1), &EngineConfig::default()).unwrap();
        let pairs: Vec<(usize, usize)> = g.edges.iter().map(|e| (e.src, e.dst)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(g.edges[0].features.len(), EdgeLayout::new(SpatialMode::Field, &FeatureMask::default()).dim());
    }

    #[test]
    fn pruning_caps_out_degree() {
        let mut nodes = vec![tracklet(0, 0, vec![1.0, 0.0], 0.0)];
        for i in 1..=12 {
            nodes.push(tracklet(i, 1, vec![1.0, i as f32 * 0.05], i as f32));
        }
        let g = build_level_graph(nodes, 1, (0, 4), &ctx(1), &EngineConfig::default()).unwrap();
        assert_eq!(g.edges.iter().filter(|e| e.src == 0).count(), 10);
        assert!(g.violations(10).is_empty());
    }

    #[test]
    fn promote_chain_and_singletons() {
        let nodes = vec![
            tracklet(0, 0, vec![1.0, 0.0], 0.0),
            tracklet(1, 1, vec![0.0, 1.0], 0.0),
            tracklet(2, 2, vec![1.0, 1.0], 0.0),
        ];
        let g = build_level_graph(nodes, 1, (0, 4), &ctx(1), &EngineConfig::default()).unwrap();
        let acc: Vec<usize> = g
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| (e.src, e.dst) == (0, 1) || (e.src, e.dst) == (1, 2))
            .map(|(i, _)| i)
            .collect();
        let ts = promote_tracklets(&g, &acc).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].detections, vec![0, 1, 2]);
        let mean = ts[0].agg_appearance();
        assert!((mean[0] - 2.0 / 3.0).abs() < 1e-12 && (mean[1] - 2.0 / 3.0).abs() < 1e-12);
        let ts = promote_tracklets(&g, &[]).unwrap();
        assert_eq!(ts.len(), 3);
    }

    #[test]
    fn windows_cover_sequence() {
        assert_eq!(window_starts(10, 16, 8), vec![0]);
        assert_eq!(window_starts(16, 16, 8), vec![0]);
        assert_eq!(window_starts(17, 16, 8), vec![0, 8]);
        assert_eq!(window_starts(40, 16, 8), vec![0, 8, 16, 24]);
    }

    fn pts(frames: &[(u32, u32)]) -> Vec<TrackPoint> {
        frames
            .iter()
            .map(|&(frame, det_id)| TrackPoint {
                frame,
                det_id,
                bbox: BBox::new(0.0, 0.0, 1.0, 1.0),
                confidence: 1.0,
            })
            .collect()
    }

    #[test]
    fn stitch_identical_and_disjoint() {
        let a = WindowTracks {
            start: 0,
            end: 8,
            tracks: vec![pts(&[(2, 1), (5, 2), (6, 3)]), pts(&[(1, 10)])],
        };
        let b = WindowTracks {
            start: 4,
            end: 12,
            tracks: vec![pts(&[(5, 2), (6, 3), (9, 4)]), pts(&[(10, 20)])],
        };
        let ts = stitch_windows(&[a, b], SequenceMeta::default());
        assert_eq!(ts.tracks.len(), 3);
        let dets: Vec<Vec<u32>> = ts.tracks.values().map(|t| t.iter().map(|p| p.det_id).collect()).collect();
        assert_eq!(dets, vec![vec![10], vec![1, 2, 3, 4], vec![20]]);
    }

    #[test]
    fn stitch_prefers_larger_overlap() {
        let a = WindowTracks {
            start: 0,
            end: 8,
            tracks: vec![pts(&[(4, 1), (5, 2), (6, 3), (7, 4)])],
        };
        let b = WindowTracks {
            start: 4,
            end: 12,
            tracks: vec![pts(&[(4, 1), (9, 7)]), pts(&[(5, 2), (6, 3), (7, 4), (10, 8)])],
        };
        let ts = stitch_windows(&[a, b], SequenceMeta::default());
        let dets: Vec<Vec<u32>> = ts.tracks.values().map(|t| t.iter().map(|p| p.det_id).collect()).collect();
        assert_eq!(dets, vec![vec![1, 2, 3, 4, 8], vec![7]]);
    }

    #[test]
    fn oracle_labels_are_consecutive() {
        let nodes = (0..3).map(|i| tracklet(i, i, vec![1.0, 0.0], 0.0)).collect();
        let g = build_level_graph(nodes, 1, (0, 4), &ctx(1), &EngineConfig::default()).unwrap();
        let ids: HashMap<DetId, u32> = [(0, 5), (1, 5), (2, 5)].into_iter().collect();
        assert_eq!(oracle_labels(&g, &ids), vec![1.0, 0.0, 1.0]);
    }
}
