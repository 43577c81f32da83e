//! Domain types shared by every stage of the tracker.
//!
//! Values are stored as `f32`; means, sums and metric accumulators use `f64`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type DetId = u32;

/// Length of the jersey confidence vector (numbers 0..=99).
pub const JERSEY_LEN: usize = 100;
/// Length of a per-position character confidence vector: EOL followed by digits 0..=9.
pub const CHAR_LEN: usize = 11;
/// Index of the end-of-line symbol inside a character confidence vector.
pub const EOL: usize = 0;
/// Team one-hot layout: team A, team B, referee.
pub const TEAM_LEN: usize = 3;
pub const TEAM_A: usize = 0;
pub const TEAM_B: usize = 1;
pub const REFEREE: usize = 2;

/// Axis-aligned box in pixels, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f32,
    pub y: f32,
    pub w: f32,
    pub h: f32,
}

impl BBox {
    pub fn new(x: f32, y: f32, w: f32, h: f32) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.w as f64 * self.h as f64
    }

    /// Intersection over union; zero when the intersection has no area.
    pub fn iou(&self, other: &BBox) -> f64 {
        let (ax0, ay0) = (self.x as f64, self.y as f64);
        let (ax1, ay1) = (ax0 + self.w as f64, ay0 + self.h as f64);
        let (bx0, by0) = (other.x as f64, other.y as f64);
        let (bx1, by1) = (bx0 + other.w as f64, by0 + other.h as f64);
        let iw = ax1.min(bx1) - ax0.max(bx0);
        let ih = ay1.min(by1) - ay0.max(by0);
        if iw <= 0.0 || ih <= 0.0 {
            return 0.0;
        }
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub det_id: DetId,
    /// 0-based frame index.
    pub frame: u32,
    pub bbox: BBox,
    pub confidence: f32,
}

impl Detection {
    pub fn validate(&self) -> Result<()> {
        if !(self.bbox.w > 0.0 && self.bbox.h > 0.0) {
            return Err(Error::Validation(format!(
                "detection {} has non-positive extent",
                self.det_id
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::Validation(format!(
                "detection {} confidence {} outside [0, 1]",
                self.det_id, self.confidence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SpatialMode {
    /// Positions on the playing surface in meters, via frame-to-field homographies.
    #[default]
    Field,
    /// Box centers and sizes in image pixels.
    Frame,
}

impl fmt::Display for SpatialMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpatialMode::Field => f.write_str("field"),
            SpatialMode::Frame => f.write_str("frame"),
        }
    }
}

impl std::str::FromStr for SpatialMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "field" => Ok(SpatialMode::Field),
            "frame" => Ok(SpatialMode::Frame),
            other => Err(Error::Config(format!("unknown spatial mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Position {
    Field { x: f32, y: f32 },
    Frame { cx: f32, cy: f32, w: f32, h: f32 },
}

impl Position {
    pub fn mode(&self) -> SpatialMode {
        match self {
            Position::Field { .. } => SpatialMode::Field,
            Position::Frame { .. } => SpatialMode::Frame,
        }
    }

    pub fn from_bbox(b: &BBox) -> Self {
        let (cx, cy) = b.center();
        Position::Frame {
            cx: cx as f32,
            cy: cy as f32,
            w: b.w,
            h: b.h,
        }
    }
}

/// Per-position character confidences produced by a scene-text recognizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharConfidences {
    pub c1: [f32; CHAR_LEN],
    pub c2: [f32; CHAR_LEN],
}

impl CharConfidences {
    pub fn validate(&self) -> Result<()> {
        for (pos, v) in [&self.c1, &self.c2].into_iter().enumerate() {
            if let Some(bad) = v.iter().find(|c| !(0.0..=1.0).contains(*c)) {
                return Err(Error::Validation(format!(
                    "character confidence {bad} at position {} outside [0, 1]",
                    pos + 1
                )));
            }
        }
        Ok(())
    }
}

/// Everything the tracker knows about one detection besides its box.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub appearance: Vec<f32>,
    pub jersey: Vec<f32>,
    pub legible: bool,
    pub team: [f32; TEAM_LEN],
    pub position: Position,
}

impl FeatureBundle {
    pub fn validate(&self) -> Result<()> {
        if self.jersey.len() != JERSEY_LEN {
            return Err(Error::Validation(format!(
                "jersey vector has length {}, expected {JERSEY_LEN}",
                self.jersey.len()
            )));
        }
        if self.jersey.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Validation("jersey entry outside [0, 1]".into()));
        }
        let sum: f64 = self.jersey.iter().map(|&v| v as f64).sum();
        if sum > 1.0 + 1e-6 {
            return Err(Error::Validation(format!("jersey vector sums to {sum}")));
        }
        if !self.legible && self.jersey.iter().any(|&v| v != 0.0) {
            return Err(Error::Validation(
                "illegible jersey must be the zero vector".into(),
            ));
        }
        let ones = self.team.iter().filter(|&&v| v == 1.0).count();
        let zeros = self.team.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || zeros != TEAM_LEN - 1 {
            return Err(Error::Validation(format!(
                "team vector {:?} is not one-hot",
                self.team
            )));
        }
        Ok(())
    }
}

/// Reference to the first or last member of a tracklet, used by positional edge features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint {
    pub det_id: DetId,
    pub frame: u32,
    pub bbox: BBox,
    pub position: Position,
}

/// A temporally ordered chain of detections; the node type of every association graph.
///
/// Aggregates are kept as `f64` sums so that merging tracklets yields exactly the
/// mean over all member detections regardless of merge order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub node_id: u32,
    pub level: u32,
    pub detections: Vec<DetId>,
    pub frames: Vec<u32>,
    pub first: Endpoint,
    pub last: Endpoint,
    appearance_sum: Vec<f64>,
    jersey_sum: Vec<f64>,
    legible_count: u32,
    team_sum: [f64; TEAM_LEN],
}

impl Tracklet {
    /// Wraps a single detection; the node form used before level 1 is solved.
    pub fn from_detection(node_id: u32, det: &Detection, bundle: &FeatureBundle) -> Self {
        let ep = Endpoint {
            det_id: det.det_id,
            frame: det.frame,
            bbox: det.bbox,
            position: bundle.position,
        };
        let legible = bundle.legible;
        Tracklet {
            node_id,
            level: 1,
            detections: vec![det.det_id],
            frames: vec![det.frame],
            first: ep,
            last: ep,
            appearance_sum: bundle.appearance.iter().map(|&v| v as f64).collect(),
            jersey_sum: if legible {
                bundle.jersey.iter().map(|&v| v as f64).collect()
            } else {
                vec![0.0; JERSEY_LEN]
            },
            legible_count: legible as u32,
            team_sum: bundle.team.map(|v| v as f64),
        }
    }

    /// Concatenates temporally ordered parts into one tracklet.
    pub fn chain(node_id: u32, level: u32, parts: &[&Tracklet]) -> Result<Self> {
        let (head, rest) = parts
            .split_first()
            .ok_or_else(|| Error::Invariant("cannot chain zero tracklets".into()))?;
        let mut out = (*head).clone();
        out.node_id = node_id;
        out.level = level;
        for p in rest {
            if p.first.frame <= out.last.frame {
                return Err(Error::Invariant(format!(
                    "tracklet starting at frame {} cannot follow one ending at frame {}",
                    p.first.frame, out.last.frame
                )));
            }
            out.detections.extend_from_slice(&p.detections);
            out.frames.extend_from_slice(&p.frames);
            out.last = p.last;
            for (a, b) in out.appearance_sum.iter_mut().zip(&p.appearance_sum) {
                *a += b;
            }
            for (a, b) in out.jersey_sum.iter_mut().zip(&p.jersey_sum) {
                *a += b;
            }
            out.legible_count += p.legible_count;
            for (a, b) in out.team_sum.iter_mut().zip(&p.team_sum) {
                *a += b;
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn first_frame(&self) -> u32 {
        self.first.frame
    }

    pub fn last_frame(&self) -> u32 {
        self.last.frame
    }

    pub fn legible(&self) -> bool {
        self.legible_count > 0
    }

    /// Mean appearance over all members.
    pub fn agg_appearance(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.appearance_sum.iter().map(|v| v / n).collect()
    }

    /// Mean jersey vector over legible members; zero when none is legible.
    pub fn agg_jersey(&self) -> Vec<f64> {
        if self.legible_count == 0 {
            return vec![0.0; JERSEY_LEN];
        }
        let n = self.legible_count as f64;
        self.jersey_sum.iter().map(|v| v / n).collect()
    }

    pub fn agg_team(&self) -> [f64; TEAM_LEN] {
        let n = self.len() as f64;
        self.team_sum.map(|v| v / n)
    }

    /// Unnormalized sums; cosine similarities are scale-free so these avoid a division.
    pub(crate) fn appearance_sum(&self) -> &[f64] {
        &self.appearance_sum
    }

    pub(crate) fn jersey_sum(&self) -> &[f64] {
        &self.jersey_sum
    }

    pub(crate) fn team_sum(&self) -> &[f64; TEAM_LEN] {
        &self.team_sum
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Index into [`AssocGraph::nodes`].
    pub src: usize,
    pub dst: usize,
    pub features: Vec<f32>,
    pub score: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssocGraph {
    pub level: u32,
    /// Half-open frame range `[start, end)`.
    pub window: (u32, u32),
    pub nodes: Vec<Tracklet>,
    pub edges: Vec<Edge>,
}

impl AssocGraph {
    /// Lists structural problems: backward edges, nodes outside the window, degree overflow.
    pub fn violations(&self, k: usize) -> Vec<String> {
        let mut out = Vec::new();
        let (start, end) = self.window;
        for (i, n) in self.nodes.iter().enumerate() {
            if n.first_frame() < start || n.last_frame() >= end {
                out.push(format!("node {i} lies outside window [{start}, {end})"));
            }
        }
        let mut outdeg = vec![0usize; self.nodes.len()];
        let mut indeg = vec![0usize; self.nodes.len()];
        for e in &self.edges {
            if self.nodes[e.src].last_frame() >= self.nodes[e.dst].first_frame() {
                out.push(format!("edge {}->{} does not point forward in time", e.src, e.dst));
            }
            outdeg[e.src] += 1;
            indeg[e.dst] += 1;
        }
        for i in 0..self.nodes.len() {
            if outdeg[i] > k || indeg[i] > k {
                out.push(format!(
                    "node {i} has degree out={} in={} above K={k}",
                    outdeg[i], indeg[i]
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub frame: u32,
    pub det_id: DetId,
    pub bbox: BBox,
    pub confidence: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub frame_count: u32,
    pub fps: f32,
    pub width: u32,
    pub height: u32,
}

impl Default for SequenceMeta {
    fn default() -> Self {
        SequenceMeta {
            frame_count: 0,
            fps: 25.0,
            width: 1920,
            height: 1080,
        }
    }
}

/// Final trajectories keyed by track id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackSet {
    pub tracks: BTreeMap<u32, Vec<TrackPoint>>,
    pub meta: SequenceMeta,
}

impl TrackSet {
    pub fn num_points(&self) -> usize {
        self.tracks.values().map(Vec::len).sum()
    }

    pub fn mean_length(&self) -> f64 {
        if self.tracks.is_empty() {
            0.0
        } else {
            self.num_points() as f64 / self.tracks.len() as f64
        }
    }

    /// Inclusive frame range covered by any track.
    pub fn frame_range(&self) -> Option<(u32, u32)> {
        let mut it = self.tracks.values().flatten().map(|p| p.frame);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), f| (lo.min(f), hi.max(f))))
    }

    /// Track id owning each detection.
    pub fn owner_of(&self) -> HashMap<DetId, u32> {
        let mut m = HashMap::new();
        for (&id, pts) in &self.tracks {
            for p in pts {
                m.insert(p.det_id, id);
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NonIncreasingFrame { track: u32, frame: u32, previous: u32 },
    SharedDetection { frame: u32, det_id: DetId, tracks: (u32, u32) },
    DegenerateBox { track: u32, frame: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonIncreasingFrame {
                track,
                frame,
                previous,
            } => write!(
                f,
                "non-increasing frame in track {track}: {frame} after {previous}"
            ),
            Violation::SharedDetection {
                frame,
                det_id,
                tracks,
            } => write!(
                f,
                "shared detection {det_id} at frame {frame} in tracks {} and {}",
                tracks.0, tracks.1
            ),
            Violation::DegenerateBox { track, frame } => {
                write!(f, "degenerate box in track {track} at frame {frame}")
            }
        }
    }
}

/// Checks every [`TrackSet`] invariant; empty output means the set is valid.
pub fn validate_trackset(t: &TrackSet) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen: HashMap<(u32, DetId), u32> = HashMap::new();
    for (&id, pts) in &t.tracks {
        for (i, p) in pts.iter().enumerate() {
            if i > 0 && p.frame <= pts[i - 1].frame {
                out.push(Violation::NonIncreasingFrame {
                    track: id,
                    frame: p.frame,
                    previous: pts[i - 1].frame,
                });
            }
            if !(p.bbox.w > 0.0 && p.bbox.h > 0.0) {
                out.push(Violation::DegenerateBox {
                    track: id,
                    frame: p.frame,
                });
            }
            if let Some(&other) = seen.get(&(p.frame, p.det_id)) {
                if other != id {
                    out.push(Violation::SharedDetection {
                        frame: p.frame,
                        det_id: p.det_id,
                        tracks: (other, id),
                    });
                }
            } else {
                seen.insert((p.frame, p.det_id), id);
            }
        }
    }
    out
}

/// Largest frame gap that a hierarchy of `levels` levels can bridge inside one window.
///
/// Shallow hierarchies (up to 7 levels) start from 4-frame level-1 windows, deeper ones
/// from 2-frame windows; both double per level. This reproduces the published
/// 7 -> 256, 9 -> 512, 10 -> 1024 anchors. Non-decreasing in `levels`.
pub fn max_temporal_span(levels: u32) -> u32 {
    assert!(levels >= 1, "hierarchy needs at least one level");
    let exp = if levels <= 7 { levels + 1 } else { levels };
    1u32.checked_shl(exp).expect("level count too large")
}

/// Window length handled by a single graph at `level` in a hierarchy of `levels` levels.
pub fn level_window(levels: u32, level: u32) -> u32 {
    assert!((1..=levels).contains(&level));
    max_temporal_span(levels) >> (levels - level)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    #[default]
    Logistic,
    #[serde(alias = "mpn")]
    MessagePassing,
}

impl std::str::FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(ScorerKind::Logistic),
            "mpn" | "message_passing" => Ok(ScorerKind::MessagePassing),
            other => Err(Error::Config(format!("unknown scorer {other:?}"))),
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScorerKind::Logistic => f.write_str("logistic"),
            ScorerKind::MessagePassing => f.write_str("mpn"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RoundingKind {
    #[default]
    Greedy,
    Exact,
}

impl std::str::FromStr for RoundingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(RoundingKind::Greedy),
            "exact" => Ok(RoundingKind::Exact),
            other => Err(Error::Config(format!("unknown rounding {other:?}"))),
        }
    }
}

/// Edge-feature channels that may be switched off. A disabled channel keeps its slot
/// in the feature vector and is filled with zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureMask {
    pub appearance: bool,
    pub jersey: bool,
    pub team: bool,
    pub spatial: bool,
    pub time: bool,
    /// Adds a box-IoU channel between the bordering detections.
    pub iou: bool,
}

impl Default for FeatureMask {
    fn default() -> Self {
        FeatureMask {
            appearance: true,
            jersey: true,
            team: true,
            spatial: true,
            time: true,
            iou: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub levels: u32,
    pub prune_k: usize,
    pub spatial_mode: SpatialMode,
    pub team_cluster_n: usize,
    pub scorer: ScorerKind,
    pub rounding: RoundingKind,
    /// Sliding-window stride in frames; defaults to half the window.
    pub window_stride: Option<u32>,
    pub seed: u64,
    /// Minimum edge probability eligible for acceptance.
    pub edge_threshold: f64,
    /// Weight of the normalized spatial distance in the pruning score.
    pub prune_spatial_weight: f64,
    /// Field distance (meters) mapped to 1.0 in the pruning score.
    pub field_norm_m: f64,
    pub mp_rounds: usize,
    /// Node-count cap for the exact rounding solver.
    pub exact_cap: usize,
    pub features: FeatureMask,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            levels: 9,
            prune_k: 10,
            spatial_mode: SpatialMode::Field,
            team_cluster_n: 500,
            scorer: ScorerKind::Logistic,
            rounding: RoundingKind::Greedy,
            window_stride: None,
            seed: 0,
            edge_threshold: 0.5,
            prune_spatial_weight: 0.5,
            field_norm_m: 125.0,
            mp_rounds: 8,
            exact_cap: 200,
            features: FeatureMask::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 1 || self.levels > 20 {
            return Err(Error::Config(format!(
                "levels must be in [1, 20], got {}",
                self.levels
            )));
        }
        if self.prune_k < 1 {
            return Err(Error::Config("prune_k must be at least 1".into()));
        }
        if self.team_cluster_n < 2 {
            return Err(Error::Config("team_cluster_n must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_threshold) {
            return Err(Error::Config("edge_threshold must lie in [0, 1]".into()));
        }
        if !(self.field_norm_m > 0.0) {
            return Err(Error::Config("field_norm_m must be positive".into()));
        }
        if let Some(s) = self.window_stride {
            if s == 0 || s > self.span() {
                return Err(Error::Config(format!(
                    "window_stride {s} must be in [1, {}]",
                    self.span()
                )));
            }
        }
        Ok(())
    }

    pub fn span(&self) -> u32 {
        max_temporal_span(self.levels)
    }

    pub fn stride(&self) -> u32 {
        self.window_stride.unwrap_or((self.span() / 2).max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(frame: u32, det_id: DetId) -> TrackPoint {
        TrackPoint {
            frame,
            det_id,
            bbox: BBox::new(0.0, 0.0, 1.0, 1.0),
            confidence: 1.0,
        }
    }

    #[test]
    fn span_matches_published_anchors() {
        assert_eq!(max_temporal_span(7), 256);
        assert_eq!(max_temporal_span(9), 512);
        assert_eq!(max_temporal_span(10), 1024);
        assert_eq!(max_temporal_span(1), 4);
    }

    #[test]
    fn span_is_non_decreasing() {
        for l in 1..20 {
            assert!(max_temporal_span(l + 1) >= max_temporal_span(l));
        }
    }

    #[test]
    fn level_windows_double() {
        assert_eq!(level_window(7, 1), 4);
        assert_eq!(level_window(7, 7), 256);
        assert_eq!(level_window(9, 1), 2);
        assert_eq!(level_window(9, 9), 512);
        for l in 2..=10 {
            assert_eq!(level_window(10, l), 2 * level_window(10, l - 1));
        }
    }

    #[test]
    fn empty_trackset_is_valid() {
        assert!(validate_trackset(&TrackSet::default()).is_empty());
    }

    #[test]
    fn decreasing_frames_flagged_once() {
        let mut t = TrackSet::default();
        t.tracks.insert(1, vec![pt(3, 0), pt(2, 1)]);
        let v = validate_trackset(&t);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().starts_with("non-increasing frame"));
    }

    #[test]
    fn shared_detection_flagged_once() {
        let mut t = TrackSet::default();
        t.tracks.insert(1, vec![pt(5, 7)]);
        t.tracks.insert(2, vec![pt(5, 7)]);
        let v = validate_trackset(&t);
        assert_eq!(
            v,
            vec![Violation::SharedDetection {
                frame: 5,
                det_id: 7,
                tracks: (1, 2)
            }]
        );
    }

    #[test]
    fn iou_basics() {
        let a = BBox::new(0.0, 0.0, 2.0, 2.0);
        let b = BBox::new(1.0, 1.0, 2.0, 2.0);
        assert!((a.iou(&b) - 1.0 / 7.0).abs() < 1e-12);
        assert_eq!(a.iou(&BBox::new(2.0, 0.0, 1.0, 1.0)), 0.0);
        assert_eq!(a.iou(&a), 1.0);
    }

    #[test]
    fn chained_tracklet_mean_is_member_mean() {
        let mk = |id: u32, frame: u32, v: f32, legible: bool| {
            let det = Detection {
                det_id: id,
                frame,
                bbox: BBox::new(0.0, 0.0, 1.0, 2.0),
                confidence: 1.0,
            };
            let mut jersey = vec![0.0; JERSEY_LEN];
            if legible {
                jersey[7] = 0.5;
            }
            let b = FeatureBundle {
                appearance: vec![v, 1.0],
                jersey,
                legible,
                team: [1.0, 0.0, 0.0],
                position: Position::Field { x: 0.0, y: 0.0 },
            };
            Tracklet::from_detection(id, &det, &b)
        };
        let a = mk(0, 0, 1.0, true);
        let b = mk(1, 1, 2.0, false);
        let c = mk(2, 2, 6.0, false);
        let t = Tracklet::chain(9, 2, &[&a, &b, &c]).unwrap();
        assert_eq!(t.agg_appearance(), vec![3.0, 1.0]);
        assert_eq!(t.agg_jersey()[7], 0.5);
        assert!(t.legible());
        assert_eq!(t.frames, vec![0, 1, 2]);
        assert!(Tracklet::chain(9, 2, &[&b, &a]).is_err());
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut c = EngineConfig::default();
        assert!(c.validate().is_ok());
        c.levels = 0;
        assert!(c.validate().is_err());
        let c = EngineConfig {
            prune_k: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = EngineConfig {
            team_cluster_n: 1,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
