//! Per-detection feature construction and pairwise node similarities.

use std::collections::BTreeMap;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{Mat3, SequenceBundle, TeamColumn, TeamInput};
use crate::model::{
    max_temporal_span, BBox, CharConfidences, FeatureBundle, FeatureMask, Position, SpatialMode,
    Tracklet, CHAR_LEN, EOL, JERSEY_LEN, REFEREE, TEAM_A, TEAM_B, TEAM_LEN,
};

/// Builds the 100-entry jersey number vector from per-position character confidences.
///
/// An EOL prediction in the first position marks the image illegible. Otherwise number
/// `10a + b` (a >= 1) gets `c1(a) * c2(b)` and single-digit number `a` gets `c1(a) * c2(EOL)`.
pub fn jersey_vector(cc: &CharConfidences) -> (Vec<f32>, bool) {
    let mut out = vec![0f32; JERSEY_LEN];
    if argmax(&cc.c1) == EOL {
        return (out, false);
    }
    let digit = |c: &[f32; CHAR_LEN], d: usize| c[1 + d] as f64;
    let c2_eol = cc.c2[EOL] as f64;
    for a in 0..10 {
        out[a] = (digit(&cc.c1, a) * c2_eol) as f32;
        if a == 0 {
            continue;
        }
        for b in 0..10 {
            out[10 * a + b] = (digit(&cc.c1, a) * digit(&cc.c2, b)) as f32;
        }
    }
    (out, true)
}

/// Index of the first maximum.
fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// team clustering

#[derive(Debug, Clone, PartialEq)]
pub struct TeamModel {
    pub centroid_a: Vec<f64>,
    pub centroid_b: Vec<f64>,
    pub fitted: bool,
}

impl TeamModel {
    pub fn unfitted() -> Self {
        TeamModel {
            centroid_a: Vec::new(),
            centroid_b: Vec::new(),
            fitted: false,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub const KMEANS_MAX_ITERS: usize = 100;
pub const KMEANS_TOL: f64 = 1e-6;

/// Two-means clustering of player embeddings.
///
/// Seeding: a seeded random point, the point farthest from it, then the point farthest
/// from that one. Team A is the centroid that compares lexicographically smaller.
pub fn fit_team_model(embeddings: &[Vec<f32>], seed: u64) -> Result<TeamModel> {
    if embeddings.len() < 2 {
        return Err(Error::Validation(format!(
            "team clustering needs at least 2 player embeddings, got {}",
            embeddings.len()
        )));
    }
    let dim = embeddings[0].len();
    if embeddings.iter().any(|e| e.len() != dim) {
        return Err(Error::Validation("team embedding dimension mismatch".into()));
    }
    let pts: Vec<Vec<f64>> = embeddings
        .iter()
        .map(|e| e.iter().map(|&v| v as f64).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..pts.len());
    let farthest = |from: &[f64]| {
        let mut best = 0;
        let mut best_d = -1.0;
        for (i, p) in pts.iter().enumerate() {
            let d = sq_dist(from, p);
            if d > best_d {
                best = i;
                best_d = d;
            }
        }
        (best, best_d)
    };
    let (i1, _) = farthest(&pts[start]);
    let (i2, spread) = farthest(&pts[i1]);
    if spread <= 1e-18 {
        return Err(Error::Validation(
            "degenerate clustering: all team embeddings are identical".into(),
        ));
    }

    let mut c = [pts[i1].clone(), pts[i2].clone()];
    for iter in 0..KMEANS_MAX_ITERS {
        let mut sums = [vec![0f64; dim], vec![0f64; dim]];
        let mut counts = [0usize; 2];
        for p in &pts {
            let k = (sq_dist(p, &c[1]) < sq_dist(p, &c[0])) as usize;
            counts[k] += 1;
            for (s, v) in sums[k].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut moved = 0f64;
        for k in 0..2 {
            if counts[k] == 0 {
                continue;
            }
            let next: Vec<f64> = sums[k].iter().map(|s| s / counts[k] as f64).collect();
            moved = moved.max(sq_dist(&next, &c[k]).sqrt());
            c[k] = next;
        }
        if moved < KMEANS_TOL {
            debug!("team 2-means converged after {} iterations", iter + 1);
            break;
        }
    }
    if sq_dist(&c[0], &c[1]).sqrt() <= 1e-9 {
        return Err(Error::Validation(
            "degenerate clustering: centroids coincide".into(),
        ));
    }
    let [c0, c1] = c;
    let (a, b) = if c0.partial_cmp(&c1) == Some(std::cmp::Ordering::Greater) {
        (c1, c0)
    } else {
        (c0, c1)
    };
    Ok(TeamModel {
        centroid_a: a,
        centroid_b: b,
        fitted: true,
    })
}

#[derive(Debug, Clone, Copy)]
pub enum TeamQuery<'a> {
    Referee,
    Player(&'a [f32]),
}

/// One-hot over (team A, team B, referee); ties go to team A.
pub fn team_onehot(q: TeamQuery<'_>, model: &TeamModel) -> Result<[f32; TEAM_LEN]> {
    let mut out = [0f32; TEAM_LEN];
    match q {
        TeamQuery::Referee => out[REFEREE] = 1.0,
        TeamQuery::Player(e) => {
            if !model.fitted {
                return Err(Error::Validation(
                    "team model must be fitted before classifying players".into(),
                ));
            }
            if e.len() != model.centroid_a.len() {
                return Err(Error::Validation("team embedding dimension mismatch".into()));
            }
            let e: Vec<f64> = e.iter().map(|&v| v as f64).collect();
            let da = sq_dist(&e, &model.centroid_a);
            let db = sq_dist(&e, &model.centroid_b);
            out[if db < da { TEAM_B } else { TEAM_A }] = 1.0;
        }
    }
    Ok(out)
}

pub fn label_onehot(label: u8) -> [f32; TEAM_LEN] {
    let mut out = [0f32; TEAM_LEN];
    out[label as usize] = 1.0;
    out
}

// ---------------------------------------------------------------------------
// field registration

/// Applies a frame-to-field homography to a pixel point.
pub fn apply_homography(h: &Mat3, x: f64, y: f64) -> Result<(f64, f64)> {
    let u = h[0][0] * x + h[0][1] * y + h[0][2];
    let v = h[1][0] * x + h[1][1] * y + h[1][2];
    let w = h[2][0] * x + h[2][1] * y + h[2][2];
    if w.abs() < 1e-9 {
        return Err(Error::Validation(format!(
            "point ({x}, {y}) projects to infinity"
        )));
    }
    Ok((u / w, v / w))
}

/// Field position (meters) of the middle point of a box.
pub fn project_to_field(bbox: &BBox, h: &Mat3) -> Result<(f64, f64)> {
    let (cx, cy) = bbox.center();
    apply_homography(h, cx, cy)
}

pub fn invert3(m: &Mat3) -> Option<Mat3> {
    let det = crate::ingest::det3(m);
    if det.abs() <= 1e-12 {
        return None;
    }
    let c = |r0: usize, c0: usize, r1: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [c(1, 1, 2, 2), -c(0, 1, 2, 2), c(0, 1, 1, 2)],
        [-c(1, 0, 2, 2), c(0, 0, 2, 2), -c(0, 0, 1, 2)],
        [c(1, 0, 2, 1), -c(0, 0, 2, 1), c(0, 0, 1, 1)],
    ];
    Some(adj.map(|row| row.map(|v| v / det)))
}

/// Fills in homographies for `targets`: element-wise linear interpolation between the
/// bracketing known frames, nearest known matrix outside the known range.
pub fn interpolate_homographies(
    known: &BTreeMap<u32, Mat3>,
    targets: impl IntoIterator<Item = u32>,
) -> Result<BTreeMap<u32, Mat3>> {
    if known.is_empty() {
        return Err(Error::Validation(
            "cannot interpolate homographies without any known frame".into(),
        ));
    }
    let mut out = BTreeMap::new();
    for t in targets {
        if let Some(m) = known.get(&t) {
            out.insert(t, *m);
            continue;
        }
        let before = known.range(..t).next_back();
        let after = known.range(t..).next();
        let m = match (before, after) {
            (Some((&f0, m0)), Some((&f1, m1))) => {
                let a = (t - f0) as f64 / (f1 - f0) as f64;
                let mut m = [[0f64; 3]; 3];
                for r in 0..3 {
                    for c in 0..3 {
                        m[r][c] = m0[r][c] + a * (m1[r][c] - m0[r][c]);
                    }
                }
                m
            }
            (Some((_, m)), None) | (None, Some((_, m))) => *m,
            (None, None) => unreachable!("known map is non-empty"),
        };
        out.insert(t, m);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// bundles

/// Turns raw sidecar records into one [`FeatureBundle`] per detection, in detection order.
pub fn build_bundles(seq: &SequenceBundle) -> Result<Vec<FeatureBundle>> {
    let cfg = &seq.config;
    let header = seq.features.header;
    let rec = |det_id| &seq.features.records[&det_id];

    let team_model = match header.team {
        TeamColumn::Embedding { .. } => {
            let mut order: Vec<usize> = (0..seq.detections.len()).collect();
            order.sort_by_key(|&i| (seq.detections[i].frame, seq.detections[i].det_id));
            let players: Vec<Vec<f32>> = order
                .iter()
                .filter_map(|&i| match &rec(seq.detections[i].det_id).team {
                    Some(TeamInput::Embedding(e)) => Some(e.clone()),
                    _ => None,
                })
                .take(cfg.team_cluster_n)
                .collect();
            fit_team_model(&players, cfg.seed)?
        }
        _ => TeamModel::unfitted(),
    };
    if header.team == TeamColumn::None {
        debug!("no team column; team channel is constant");
    }

    let homographies = if cfg.spatial_mode == SpatialMode::Field && !seq.homographies.is_empty() {
        let frames: std::collections::BTreeSet<u32> =
            seq.detections.iter().map(|d| d.frame).collect();
        interpolate_homographies(&seq.homographies, frames)?
    } else {
        BTreeMap::new()
    };

    let mut out = Vec::with_capacity(seq.detections.len());
    for d in &seq.detections {
        let r = rec(d.det_id);
        let (jersey, legible) = match (&r.jersey, header.jersey) {
            (Some(cc), true) => jersey_vector(cc),
            _ => (vec![0f32; JERSEY_LEN], false),
        };
        let team = match &r.team {
            Some(TeamInput::Label(l)) => label_onehot(*l),
            Some(TeamInput::Referee) => team_onehot(TeamQuery::Referee, &team_model)?,
            Some(TeamInput::Embedding(e)) => team_onehot(TeamQuery::Player(e), &team_model)?,
            None if header.team == TeamColumn::None => label_onehot(TEAM_A as u8),
            None => {
                return Err(Error::Validation(format!(
                    "det_id {} has no team information",
                    d.det_id
                )))
            }
        };
        let position = match cfg.spatial_mode {
            SpatialMode::Frame => Position::from_bbox(&d.bbox),
            SpatialMode::Field => {
                if let Some((x, y)) = r.field {
                    Position::Field { x, y }
                } else if let Some(h) = homographies.get(&d.frame) {
                    let (x, y) = project_to_field(&d.bbox, h)?;
                    Position::Field {
                        x: x as f32,
                        y: y as f32,
                    }
                } else {
                    return Err(Error::Validation(format!(
                        "field mode needs a homography or field coordinates for det_id {}",
                        d.det_id
                    )));
                }
            }
        };
        out.push(FeatureBundle {
            appearance: r.appearance.clone(),
            jersey,
            legible,
            team,
            position,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// edge features

/// Which slots the edge feature vector has.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeLayout {
    pub spatial_mode: SpatialMode,
    pub iou: bool,
}

impl EdgeLayout {
    pub fn new(spatial_mode: SpatialMode, mask: &FeatureMask) -> Self {
        EdgeLayout {
            spatial_mode,
            iou: mask.iou,
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut n = vec!["appearance_cos", "jersey_cos", "jersey_valid", "team_cos"];
        match self.spatial_mode {
            SpatialMode::Field => n.push("field_dist_m"),
            SpatialMode::Frame => {
                n.push("frame_center_dist");
                n.push("frame_log_height_ratio");
            }
        }
        n.push("time_gap");
        if self.iou {
            n.push("box_iou");
        }
        n
    }

    pub fn dim(&self) -> usize {
        self.names().len()
    }

    /// Stable identifier stored alongside scorer weights.
    pub fn tag(&self) -> String {
        format!(
            "edge-v1:{}{}",
            self.spatial_mode,
            if self.iou { "+iou" } else { "" }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityContext {
    pub layout: EdgeLayout,
    pub mask: FeatureMask,
    /// Normalizer for the time-gap channel.
    pub time_norm: f64,
    /// Image diagonal in pixels, normalizer for frame-mode distances.
    pub image_diag: f64,
}

impl SimilarityContext {
    pub fn new(spatial_mode: SpatialMode, mask: FeatureMask, levels: u32, width: u32, height: u32) -> Self {
        SimilarityContext {
            layout: EdgeLayout::new(spatial_mode, &mask),
            mask,
            time_norm: max_temporal_span(levels) as f64,
            image_diag: ((width as f64).powi(2) + (height as f64).powi(2)).sqrt().max(1.0),
        }
    }
}

/// Cosine similarity; `None` when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (mut dot, mut na, mut nb) = (0f64, 0f64, 0f64);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
    }
}

/// Euclidean distance between positions of the same mode.
pub fn position_distance(a: &Position, b: &Position) -> f64 {
    match (a, b) {
        (Position::Field { x: ax, y: ay }, Position::Field { x: bx, y: by }) => {
            ((*ax as f64 - *bx as f64).powi(2) + (*ay as f64 - *by as f64).powi(2)).sqrt()
        }
        (
            Position::Frame { cx: ax, cy: ay, .. },
            Position::Frame { cx: bx, cy: by, .. },
        ) => ((*ax as f64 - *bx as f64).powi(2) + (*ay as f64 - *by as f64).powi(2)).sqrt(),
        _ => panic!("positions of different spatial modes"),
    }
}

/// Edge feature vector between tracklet `a` and a later tracklet `b`.
///
/// Appearance, jersey and team use cosine similarity of member means; position uses
/// `a`'s last and `b`'s first detection. Disabled channels are zero.
pub fn node_similarities(a: &Tracklet, b: &Tracklet, ctx: &SimilarityContext) -> Result<Vec<f32>> {
    if a.last_frame() >= b.first_frame() {
        return Err(Error::Invariant(format!(
            "edge from tracklet ending at {} to one starting at {} is not forward in time",
            a.last_frame(),
            b.first_frame()
        )));
    }
    let m = &ctx.mask;
    let mut v = Vec::with_capacity(ctx.layout.dim());

    let app = if m.appearance {
        cosine(a.appearance_sum(), b.appearance_sum()).unwrap_or_else(|| {
            warn!(
                "zero-norm appearance between nodes {} and {}",
                a.node_id, b.node_id
            );
            0.0
        })
    } else {
        0.0
    };
    v.push(app as f32);

    let both_legible = m.jersey && a.legible() && b.legible();
    let jersey = if both_legible {
        cosine(a.jersey_sum(), b.jersey_sum()).unwrap_or(0.0)
    } else {
        0.0
    };
    v.push(jersey as f32);
    v.push(if both_legible { 1.0 } else { 0.0 });

    let team = if m.team {
        cosine(a.team_sum(), b.team_sum()).unwrap_or(0.0)
    } else {
        0.0
    };
    v.push(team as f32);

    let (pa, pb) = (&a.last.position, &b.first.position);
    match ctx.layout.spatial_mode {
        SpatialMode::Field => {
            v.push(if m.spatial { position_distance(pa, pb) as f32 } else { 0.0 });
        }
        SpatialMode::Frame => {
            if m.spatial {
                let (ha, hb) = match (pa, pb) {
                    (Position::Frame { h: ha, .. }, Position::Frame { h: hb, .. }) => (*ha, *hb),
                    _ => return Err(Error::Invariant("frame mode needs frame positions".into())),
                };
                v.push((position_distance(pa, pb) / ctx.image_diag) as f32);
                v.push((hb as f64 / ha as f64).ln().abs() as f32);
            } else {
                v.push(0.0);
                v.push(0.0);
            }
        }
    }

    let dt = (b.first_frame() - a.last_frame()) as f64;
    v.push(if m.time { (dt / ctx.time_norm) as f32 } else { 0.0 });

    if ctx.layout.iou {
        v.push(a.last.bbox.iou(&b.first.bbox) as f32);
    }
    Ok(v)
}
