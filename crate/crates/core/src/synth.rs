//! Synthetic team-sport sequences with ground truth and feature sidecars.
//!
//! Players move piecewise-linearly around a play zone that drifts across the field. A
//! panning, zooming camera maps field positions to image boxes, so image coordinates
//! move even when players stand still. Appearance embeddings have team structure and
//! drift over time, which makes re-identification accuracy decay with the frame gap.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::invert3;
use crate::ingest::{
    format_detections, format_homographies, format_mot, format_seqinfo, write_text, FeatureHeader,
    FeatureRecord, FeatureTable, Mat3, SequenceBundle, SequencePaths, TeamColumn, TeamInput,
};
use crate::model::{
    BBox, CharConfidences, Detection, EngineConfig, FeatureMask, SequenceMeta, SpatialMode,
    TrackPoint, TrackSet, CHAR_LEN, EOL,
};
use crate::scorer::TrainParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sport {
    #[default]
    Soccer,
    Hockey,
}

impl Sport {
    /// Playing surface in meters.
    pub fn field_size(self) -> (f64, f64) {
        match self {
            Sport::Soccer => (105.0, 68.0),
            Sport::Hockey => (61.0, 26.0),
        }
    }
}

/// Appearance embedding model.
///
/// Identity means are `team_center + id_scale * N(0, I)`; each identity then drifts by
/// a fast and a slow Ornstein-Uhlenbeck process, and every detection adds white noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppearanceNoise {
    pub dim: usize,
    pub team_scale: f64,
    pub id_scale: f64,
    pub fast_sigma: f64,
    /// Correlation time of the fast drift, in frames.
    pub fast_tau: f64,
    pub slow_sigma: f64,
    pub slow_tau: f64,
    pub det_sigma: f64,
}

impl AppearanceNoise {
    /// Calibrated so nearest-identity accuracy falls from about 99% at a 1-frame gap to
    /// about 62% at 300 frames on an 11-a-side match with two referees.
    pub fn calibrated() -> Self {
        AppearanceNoise {
            dim: 32,
            team_scale: 1.0,
            id_scale: 0.4,
            fast_sigma: 0.6,
            fast_tau: 20.0,
            slow_sigma: 0.5,
            slow_tau: 1000.0,
            det_sigma: 0.45,
        }
    }

    /// Constant per-identity embeddings.
    pub fn noiseless() -> Self {
        AppearanceNoise {
            fast_sigma: 0.0,
            slow_sigma: 0.0,
            det_sigma: 0.0,
            id_scale: 1.0,
            ..Self::calibrated()
        }
    }
}

impl Default for AppearanceNoise {
    fn default() -> Self {
        Self::calibrated()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraMotion {
    /// Magnification relative to a view that fits the field width into the image.
    pub zoom: f64,
    pub pan_amplitude_m: f64,
    pub pan_period: f64,
    /// Relative zoom oscillation.
    pub zoom_amplitude: f64,
    pub zoom_period: f64,
    /// Frames between hard cuts that shift the view; 0 disables cuts.
    pub cut_interval: u32,
    pub cut_offset_m: f64,
    /// Whether the view follows the play zone.
    pub follow: bool,
}

impl CameraMotion {
    pub fn fixed() -> Self {
        CameraMotion {
            zoom: 1.0,
            pan_amplitude_m: 0.0,
            pan_period: 1.0,
            zoom_amplitude: 0.0,
            zoom_period: 1.0,
            cut_interval: 0,
            cut_offset_m: 0.0,
            follow: false,
        }
    }
}

impl Default for CameraMotion {
    fn default() -> Self {
        CameraMotion {
            zoom: 2.0,
            pan_amplitude_m: 12.0,
            pan_period: 180.0,
            zoom_amplitude: 0.25,
            zoom_period: 260.0,
            cut_interval: 0,
            cut_offset_m: 20.0,
            follow: true,
        }
    }
}

/// One identity missing from `start` for `duration` frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occlusion {
    pub identity: u32,
    pub start: u32,
    pub duration: u32,
}

/// Randomly placed occlusions, drawn after the explicit ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RandomOcclusions {
    pub count: u32,
    pub min_len: u32,
    pub max_len: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TeamMode {
    #[default]
    Embedding,
    Label,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub sport: Sport,
    pub players_per_team: u32,
    pub referees: u32,
    pub frames: u32,
    pub fps: f32,
    pub width: u32,
    pub height: u32,
    pub max_speed_mps: f64,
    /// Per-frame probability that a player picks a new direction and speed.
    pub turn_rate: f64,
    /// Half extent (x, y) of the play zone players roam in, meters.
    pub zone_half_size: (f64, f64),
    pub zone_speed_mps: f64,
    pub player_height_m: f64,
    pub occlusions: Vec<Occlusion>,
    pub random_occlusions: RandomOcclusions,
    /// Probability that a player's jersey number is readable in a detection.
    pub jersey_legibility: f64,
    /// Probability that a readable jersey is read as a wrong digit.
    pub jersey_misread: f64,
    pub appearance: AppearanceNoise,
    pub team_mode: TeamMode,
    pub team_dim: usize,
    pub team_noise: f64,
    pub camera: CameraMotion,
    /// Write a homography every this many frames; 0 writes none.
    pub homography_every: u32,
    /// Also write field coordinates into the feature sidecar.
    pub field_column: bool,
    pub box_jitter_px: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            name: "synthetic".into(),
            sport: Sport::Soccer,
            players_per_team: 11,
            referees: 2,
            frames: 750,
            fps: 25.0,
            width: 1920,
            height: 1080,
            max_speed_mps: 7.0,
            turn_rate: 0.03,
            zone_half_size: (18.0, 14.0),
            zone_speed_mps: 3.0,
            player_height_m: 1.8,
            occlusions: Vec::new(),
            random_occlusions: RandomOcclusions::default(),
            jersey_legibility: 0.3,
            jersey_misread: 0.05,
            appearance: AppearanceNoise::calibrated(),
            team_mode: TeamMode::Embedding,
            team_dim: 8,
            team_noise: 0.3,
            camera: CameraMotion::default(),
            homography_every: 1,
            field_column: false,
            box_jitter_px: 0.0,
        }
    }
}

impl ScenarioSpec {
    pub fn hockey() -> Self {
        ScenarioSpec {
            name: "hockey".into(),
            sport: Sport::Hockey,
            players_per_team: 6,
            referees: 4,
            max_speed_mps: 9.0,
            zone_half_size: (12.0, 8.0),
            zone_speed_mps: 4.0,
            ..Self::default()
        }
    }

    pub fn identities(&self) -> u32 {
        2 * self.players_per_team + self.referees
    }

    /// Team of identity `i`: 0, 1, or 2 for referees.
    pub fn team_of(&self, i: u32) -> u8 {
        if i < self.players_per_team {
            0
        } else if i < 2 * self.players_per_team {
            1
        } else {
            2
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("scenario {:?}: {m}", self.name)));
        if self.frames == 0 {
            return bad("frames must be positive".into());
        }
        if self.identities() == 0 {
            return bad("needs at least one identity".into());
        }
        if self.players_per_team > 99 {
            return bad("at most 99 players per team have distinct jersey numbers".into());
        }
        if self.appearance.dim == 0 {
            return bad("appearance dimension must be positive".into());
        }
        if self.team_mode == TeamMode::Embedding && self.team_dim == 0 {
            return bad("team embedding dimension must be positive".into());
        }
        for p in [self.jersey_legibility, self.jersey_misread, self.turn_rate] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("probability {p} outside [0, 1]"));
            }
        }
        if !(self.fps > 0.0) || self.width == 0 || self.height == 0 {
            return bad("fps and image size must be positive".into());
        }
        if !(self.camera.zoom > 0.0) || self.camera.zoom_amplitude.abs() >= 1.0 {
            return bad("camera zoom must stay positive".into());
        }
        for o in &self.occlusions {
            if o.identity >= self.identities() {
                return bad(format!("occlusion names unknown identity {}", o.identity));
            }
            if o.duration == 0 || o.start as u64 + o.duration as u64 > self.frames as u64 {
                return bad(format!(
                    "occlusion of identity {} over frames [{}, {}) exceeds the {}-frame sequence",
                    o.identity,
                    o.start,
                    o.start as u64 + o.duration as u64,
                    self.frames
                ));
            }
        }
        let r = &self.random_occlusions;
        if r.count > 0 && (r.min_len == 0 || r.min_len > r.max_len || r.max_len >= self.frames) {
            return bad("random occlusion lengths must satisfy 0 < min <= max < frames".into());
        }
        Ok(())
    }
}

/// Everything a generated sequence consists of.
#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub spec: ScenarioSpec,
    pub seed: u64,
    pub detections: Vec<Detection>,
    pub features: FeatureTable,
    pub homographies: BTreeMap<u32, Mat3>,
    pub gt: TrackSet,
    pub meta: SequenceMeta,
    /// Jersey number per identity; `None` for referees.
    pub jerseys: Vec<Option<u32>>,
    /// Occlusions actually applied, explicit and random.
    pub occlusions: Vec<Occlusion>,
}

impl SyntheticSequence {
    pub fn bundle(&self, config: EngineConfig) -> Result<SequenceBundle> {
        SequenceBundle::new(
            self.detections.clone(),
            self.features.clone(),
            self.homographies.clone(),
            Some(self.gt.clone()),
            config,
            self.meta,
        )
    }
}

/// Separate deterministic stream per aspect, so changing one aspect leaves the others.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Piecewise-linear walker inside an axis-aligned box, reflecting at the borders.
struct Walker {
    pos: (f64, f64),
    vel: (f64, f64),
    max_step: f64,
    turn_rate: f64,
}

impl Walker {
    fn new(rng: &mut ChaCha8Rng, pos: (f64, f64), max_step: f64, turn_rate: f64) -> Self {
        let mut w = Walker {
            pos,
            vel: (0.0, 0.0),
            max_step,
            turn_rate,
        };
        w.turn(rng);
        w
    }

    fn turn(&mut self, rng: &mut ChaCha8Rng) {
        let a = rng.random_range(0.0..2.0 * PI);
        let s = self.max_step * rng.random_range(0.2..1.0);
        self.vel = (s * a.cos(), s * a.sin());
    }

    fn step(&mut self, rng: &mut ChaCha8Rng, lo: (f64, f64), hi: (f64, f64)) {
        if rng.random_bool(self.turn_rate) {
            self.turn(rng);
        }
        let reflect = |p: f64, v: &mut f64, lo: f64, hi: f64| {
            let mut p = p + *v;
            if p < lo {
                p = 2.0 * lo - p;
                *v = -*v;
            }
            if p > hi {
                p = 2.0 * hi - p;
                *v = -*v;
            }
            p.clamp(lo, hi)
        };
        self.pos.0 = reflect(self.pos.0, &mut self.vel.0, lo.0, hi.0);
        self.pos.1 = reflect(self.pos.1, &mut self.vel.1, lo.1, hi.1);
    }
}

/// Field-to-image map of frame `t`: `(scale, vertical squash, view center)`.
struct View {
    scale: f64,
    squash: f64,
    center: (f64, f64),
}

impl View {
    fn field_to_image(&self, w: u32, h: u32) -> Mat3 {
        let (s, k) = (self.scale, self.squash);
        [
            [s, 0.0, w as f64 / 2.0 - s * self.center.0],
            [0.0, s * k, h as f64 / 2.0 - s * k * self.center.1],
            [0.0, 0.0, 1.0],
        ]
    }
}

fn jersey_confidences(
    rng: &mut ChaCha8Rng,
    number: u32,
    misread: f64,
) -> CharConfidences {
    let mut digits = if number >= 10 {
        vec![1 + (number / 10) as usize, 1 + (number % 10) as usize]
    } else {
        vec![1 + number as usize, EOL]
    };
    if rng.random_bool(misread) {
        let pos = rng.random_range(0..digits.len());
        if digits[pos] != EOL {
            let mut d = rng.random_range(1..CHAR_LEN);
            if d == digits[pos] {
                d = 1 + d % (CHAR_LEN - 1);
            }
            digits[pos] = d;
        }
    }
    let mut peaked = |target: usize| {
        let q = rng.random_range(0.55..0.95);
        let mut rest: [f64; CHAR_LEN] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        rest[target] = 0.0;
        let total: f64 = rest.iter().sum();
        let mut v = [0f32; CHAR_LEN];
        for i in 0..CHAR_LEN {
            v[i] = if i == target {
                q as f32
            } else {
                ((1.0 - q) * rest[i] / total) as f32
            };
        }
        v
    };
    CharConfidences {
        c1: peaked(digits[0]),
        c2: peaked(digits[1]),
    }
}

/// First-position EOL dominates: what a recognizer reports for an unreadable crop.
fn unreadable_confidences(rng: &mut ChaCha8Rng) -> CharConfidences {
    let mut make = |peak: bool| {
        let mut v: [f32; CHAR_LEN] = std::array::from_fn(|_| rng.random_range(0.0f32..0.05));
        if peak {
            v[EOL] = rng.random_range(0.6f32..0.95);
        }
        v
    };
    CharConfidences {
        c1: make(true),
        c2: make(false),
    }
}

/// Generates a sequence in memory. Same `(spec, seed)` gives identical output.
pub fn generate_sequence(spec: &ScenarioSpec, seed: u64) -> Result<SyntheticSequence> {
    spec.validate()?;
    let n = spec.identities() as usize;
    let frames = spec.frames;
    let (fw, fh) = spec.sport.field_size();
    let fps = spec.fps as f64;

    // occlusions
    let mut occlusions = spec.occlusions.clone();
    let mut orng = stream(seed, 1);
    for _ in 0..spec.random_occlusions.count {
        let r = &spec.random_occlusions;
        let duration = orng.random_range(r.min_len..=r.max_len);
        occlusions.push(Occlusion {
            identity: orng.random_range(0..n as u32),
            start: orng.random_range(0..=frames - duration),
            duration,
        });
    }
    let hidden = |i: usize, t: u32| {
        occlusions
            .iter()
            .any(|o| o.identity as usize == i && t >= o.start && t < o.start + o.duration)
    };

    // jersey numbers, unique within a team
    let mut jrng = stream(seed, 2);
    let mut jerseys = vec![None; n];
    for team in 0..2u32 {
        let mut pool: Vec<u32> = (1..=99).collect();
        pool.shuffle(&mut jrng);
        for k in 0..spec.players_per_team {
            jerseys[(team * spec.players_per_team + k) as usize] = Some(pool[k as usize]);
        }
    }

    // appearance identity means
    let app = spec.appearance;
    let mut arng = stream(seed, 3);
    let team_centers: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..app.dim).map(|_| gauss(&mut arng) * app.team_scale).collect())
        .collect();
    let means: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let c = &team_centers[spec.team_of(i as u32) as usize];
            c.iter().map(|v| v + app.id_scale * gauss(&mut arng)).collect()
        })
        .collect();
    let ou_init = |rng: &mut ChaCha8Rng, sigma: f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..app.dim).map(|_| sigma * gauss(rng)).collect())
            .collect()
    };
    let mut fast = ou_init(&mut arng, app.fast_sigma);
    let mut slow = ou_init(&mut arng, app.slow_sigma);
    let decay = |tau: f64| if tau > 0.0 { (-1.0 / tau).exp() } else { 0.0 };
    let (af, asl) = (decay(app.fast_tau), decay(app.slow_tau));

    // team embeddings
    let mut trng = stream(seed, 4);
    let team_colors: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..spec.team_dim).map(|_| gauss(&mut trng)).collect())
        .collect();

    // motion
    let mut mrng = stream(seed, 5);
    let (zx, zy) = spec.zone_half_size;
    let zone_lo = (zx.min(fw / 2.0), zy.min(fh / 2.0));
    let zone_hi = (fw - zone_lo.0, fh - zone_lo.1);
    let mut zone = Walker::new(
        &mut mrng,
        (fw / 2.0, fh / 2.0),
        spec.zone_speed_mps / fps,
        spec.turn_rate / 2.0,
    );
    let mut offsets: Vec<Walker> = (0..n)
        .map(|_| {
            let p = (mrng.random_range(-zx..=zx), mrng.random_range(-zy..=zy));
            Walker::new(&mut mrng, p, spec.max_speed_mps / fps, spec.turn_rate)
        })
        .collect();

    // camera
    let cam = spec.camera;
    let mut crng = stream(seed, 6);
    let pan_phase = crng.random_range(0.0..2.0 * PI);
    let zoom_phase = crng.random_range(0.0..2.0 * PI);
    let mut cut_offset = (0.0, 0.0);
    let base_scale = cam.zoom * spec.width as f64 / fw;

    let mut drng = stream(seed, 7);
    let jitter = Normal::new(0.0, spec.box_jitter_px.max(0.0)).unwrap();

    let mut detections = Vec::new();
    let mut records = BTreeMap::new();
    let mut homographies = BTreeMap::new();
    let mut gt_tracks: BTreeMap<u32, Vec<TrackPoint>> = BTreeMap::new();

    for t in 0..frames {
        if t > 0 {
            zone.step(&mut mrng, zone_lo, zone_hi);
            for o in &mut offsets {
                o.step(&mut mrng, (-zx, -zy), (zx, zy));
            }
            for i in 0..n {
                for d in 0..app.dim {
                    fast[i][d] = af * fast[i][d]
                        + (1.0 - af * af).sqrt() * app.fast_sigma * gauss(&mut arng);
                    slow[i][d] = asl * slow[i][d]
                        + (1.0 - asl * asl).sqrt() * app.slow_sigma * gauss(&mut arng);
                }
            }
        }
        if cam.cut_interval > 0 && t > 0 && t % cam.cut_interval == 0 {
            cut_offset = (
                crng.random_range(-cam.cut_offset_m..=cam.cut_offset_m),
                crng.random_range(-cam.cut_offset_m..=cam.cut_offset_m) / 2.0,
            );
        }
        let tf = t as f64;
        let follow = if cam.follow { zone.pos } else { (fw / 2.0, fh / 2.0) };
        let view = View {
            scale: base_scale
                * (1.0 + cam.zoom_amplitude * (2.0 * PI * tf / cam.zoom_period + zoom_phase).sin()),
            squash: 0.6,
            center: (
                follow.0
                    + cam.pan_amplitude_m * (2.0 * PI * tf / cam.pan_period + pan_phase).sin()
                    + cut_offset.0,
                follow.1 + cut_offset.1,
            ),
        };
        let g = view.field_to_image(spec.width, spec.height);
        if spec.homography_every > 0 && t % spec.homography_every == 0 {
            // adding zero turns -0.0 into 0.0 for tidier files
            let inv = invert3(&g).expect("camera map is invertible");
            homographies.insert(t, inv.map(|row| row.map(|v| v + 0.0)));
        }
        for i in 0..n {
            let p = (
                (zone.pos.0 + offsets[i].pos.0).clamp(0.0, fw),
                (zone.pos.1 + offsets[i].pos.1).clamp(0.0, fh),
            );
            // draw per-detection noise even when hidden so streams stay aligned
            let noise: Vec<f64> = (0..app.dim).map(|_| app.det_sigma * gauss(&mut drng)).collect();
            let legible_roll = drng.random_range(0.0..1.0);
            let team_noise: Vec<f64> =
                (0..spec.team_dim).map(|_| spec.team_noise * gauss(&mut drng)).collect();
            let box_noise: [f64; 4] = std::array::from_fn(|_| jitter.sample(&mut drng));
            let jersey_seed: u64 = drng.random();
            if hidden(i, t) {
                continue;
            }
            let h = spec.player_height_m * view.scale;
            let w = 0.4 * h;
            let cx = g[0][0] * p.0 + g[0][2];
            let cy = g[1][1] * p.1 + g[1][2];
            let truth = BBox::new((cx - w / 2.0) as f32, (cy - h / 2.0) as f32, w as f32, h as f32);
            let det_id = detections.len() as u32;
            let bbox = if spec.box_jitter_px > 0.0 {
                BBox::new(
                    (cx - w / 2.0 + box_noise[0]) as f32,
                    (cy - h / 2.0 + box_noise[1]) as f32,
                    (w + box_noise[2]).max(1.0) as f32,
                    (h + box_noise[3]).max(1.0) as f32,
                )
            } else {
                truth
            };
            detections.push(Detection {
                det_id,
                frame: t,
                bbox,
                confidence: 1.0,
            });
            gt_tracks.entry(i as u32).or_default().push(TrackPoint {
                frame: t,
                det_id,
                bbox: truth,
                confidence: 1.0,
            });

            let appearance: Vec<f32> = (0..app.dim)
                .map(|d| (means[i][d] + fast[i][d] + slow[i][d] + noise[d]) as f32)
                .collect();
            let mut jr = ChaCha8Rng::seed_from_u64(jersey_seed);
            let jersey = match jerseys[i] {
                Some(num) if legible_roll < spec.jersey_legibility => {
                    Some(jersey_confidences(&mut jr, num, spec.jersey_misread))
                }
                _ if jr.random_bool(0.5) => Some(unreadable_confidences(&mut jr)),
                _ => None,
            };
            let team_id = spec.team_of(i as u32);
            let team = match spec.team_mode {
                TeamMode::None => None,
                TeamMode::Label => Some(TeamInput::Label(team_id)),
                TeamMode::Embedding if team_id == 2 => Some(TeamInput::Referee),
                TeamMode::Embedding => Some(TeamInput::Embedding(
                    team_colors[team_id as usize]
                        .iter()
                        .zip(&team_noise)
                        .map(|(c, e)| (c + e) as f32)
                        .collect(),
                )),
            };
            records.insert(
                det_id,
                FeatureRecord {
                    det_id,
                    appearance,
                    jersey,
                    team,
                    field: spec.field_column.then_some((p.0 as f32, p.1 as f32)),
                },
            );
        }
    }

    let meta = SequenceMeta {
        frame_count: frames,
        fps: spec.fps,
        width: spec.width,
        height: spec.height,
    };
    let header = FeatureHeader {
        appearance_dim: app.dim,
        jersey: true,
        team: match spec.team_mode {
            TeamMode::None => TeamColumn::None,
            TeamMode::Label => TeamColumn::Label,
            TeamMode::Embedding => TeamColumn::Embedding { dim: spec.team_dim },
        },
        field: spec.field_column,
    };
    // GT det_ids are row indices of the written gt file, matching what a reader sees.
    let mut gt = TrackSet {
        tracks: gt_tracks,
        meta,
    };
    let mut rows: Vec<(u32, u32)> = gt
        .tracks
        .iter()
        .flat_map(|(&id, pts)| pts.iter().map(move |p| (p.frame, id)))
        .collect();
    rows.sort_unstable();
    let row_of: BTreeMap<(u32, u32), u32> =
        rows.into_iter().enumerate().map(|(k, r)| (r, k as u32)).collect();
    for (&id, pts) in gt.tracks.iter_mut() {
        for p in pts {
            p.det_id = row_of[&(p.frame, id)];
        }
    }

    Ok(SyntheticSequence {
        spec: spec.clone(),
        seed,
        detections,
        features: FeatureTable { header, records },
        homographies,
        gt,
        meta,
        jerseys,
        occlusions,
    })
}

/// File names written by [`write_sequence`].
pub fn sequence_paths(dir: &Path) -> SequencePaths {
    SequencePaths {
        detections: dir.join("det.txt"),
        features: dir.join("features.tsv"),
        homographies: Some(dir.join("homography.csv")),
        gt: Some(dir.join("gt.txt")),
        config: None,
        seqinfo: Some(dir.join("seqinfo.ini")),
    }
}

pub fn write_sequence(dir: &Path, seq: &SyntheticSequence) -> Result<SequencePaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = sequence_paths(dir);
    write_text(&paths.detections, &format_detections(&seq.detections))?;
    write_text(&paths.features, &seq.features.to_text())?;
    let hpath = paths.homographies.clone().unwrap();
    write_text(&hpath, &format_homographies(&seq.homographies))?;
    write_text(paths.gt.as_ref().unwrap(), &format_mot(&seq.gt))?;
    write_text(
        paths.seqinfo.as_ref().unwrap(),
        &format_seqinfo(&seq.spec.name, &seq.meta),
    )?;
    let scenario = toml::to_string(&seq.spec)
        .map_err(|e| Error::Config(format!("cannot serialize scenario: {e}")))?;
    write_text(
        &dir.join("scenario.toml"),
        &format!("# seed = {}\n{scenario}", seq.seed),
    )?;
    let mut paths = paths;
    if seq.homographies.is_empty() {
        paths.homographies = None;
    }
    Ok(paths)
}

/// Generates a sequence and writes it to `dir`.
pub fn generate(spec: &ScenarioSpec, seed: u64, dir: &Path) -> Result<SequencePaths> {
    write_sequence(dir, &generate_sequence(spec, seed)?)
}

pub fn parse_scenario(text: &str, path: &Path) -> Result<ScenarioSpec> {
    let spec: ScenarioSpec = toml::from_str(text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// ablation suite

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationGroup {
    Feature,
    Layer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationCase {
    pub id: String,
    pub group: AblationGroup,
    pub train: (ScenarioSpec, u64),
    pub test: (ScenarioSpec, u64),
    pub config: EngineConfig,
    pub train_params: TrainParams,
}

impl AblationCase {
    pub fn output_dir(&self, root: &Path) -> PathBuf {
        root.join(&self.id)
    }
}

/// Soccer clip with a strongly moving camera and scattered occlusions.
pub fn feature_ablation_scenario() -> ScenarioSpec {
    ScenarioSpec {
        name: "feature-ablation".into(),
        frames: 1000,
        camera: CameraMotion {
            cut_interval: 150,
            ..CameraMotion::default()
        },
        random_occlusions: RandomOcclusions {
            count: 24,
            min_len: 20,
            max_len: 200,
        },
        ..ScenarioSpec::default()
    }
}

/// Soccer clip where many players leave the view for 300 to 480 frames.
pub fn long_occlusion_scenario() -> ScenarioSpec {
    ScenarioSpec {
        name: "long-occlusion".into(),
        frames: 1500,
        random_occlusions: RandomOcclusions {
            count: 20,
            min_len: 300,
            max_len: 480,
        },
        ..ScenarioSpec::default()
    }
}

fn ablation_train_params() -> TrainParams {
    TrainParams {
        learning_rate: 0.05,
        stage_iters: 60,
        epochs: 300,
        max_edges_per_level: 6000,
        log_every: 50,
        ..TrainParams::default()
    }
}

/// Fixed scenario set for the feature and layer ablations.
///
/// Every case trains a logistic scorer on one seed of its scenario and tests on another.
pub fn ablation_suite(seed: u64) -> Vec<AblationCase> {
    let train_seed = seed.wrapping_mul(2).wrapping_add(1);
    let test_seed = seed.wrapping_mul(2).wrapping_add(2);
    let base = EngineConfig {
        scorer: crate::model::ScorerKind::Logistic,
        seed,
        ..EngineConfig::default()
    };
    let mut cases = Vec::new();
    let feat = feature_ablation_scenario();
    let no_jersey = FeatureMask {
        jersey: false,
        team: false,
        ..FeatureMask::default()
    };
    for (id, mode, mask) in [
        ("reid-only", SpatialMode::Frame, no_jersey),
        ("reid+field", SpatialMode::Field, no_jersey),
        (
            "reid+field+jersey",
            SpatialMode::Field,
            FeatureMask {
                team: false,
                ..FeatureMask::default()
            },
        ),
    ] {
        cases.push(AblationCase {
            id: id.into(),
            group: AblationGroup::Feature,
            train: (feat.clone(), train_seed),
            test: (feat.clone(), test_seed),
            config: EngineConfig {
                spatial_mode: mode,
                features: mask,
                ..base.clone()
            },
            train_params: ablation_train_params(),
        });
    }
    let long = long_occlusion_scenario();
    for levels in [7u32, 9, 10] {
        cases.push(AblationCase {
            id: format!("layers-{levels}"),
            group: AblationGroup::Layer,
            train: (long.clone(), train_seed),
            test: (long.clone(), test_seed),
            config: EngineConfig {
                levels,
                features: FeatureMask {
                    team: false,
                    ..FeatureMask::default()
                },
                ..base.clone()
            },
            train_params: ablation_train_params(),
        });
    }
    cases
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{jersey_vector, project_to_field};

    fn tiny() -> ScenarioSpec {
        ScenarioSpec {
            players_per_team: 2,
            referees: 1,
            frames: 40,
            ..ScenarioSpec::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_sequence(&tiny(), 9).unwrap();
        let b = generate_sequence(&tiny(), 9).unwrap();
        assert_eq!(a.detections, b.detections);
        assert_eq!(a.features, b.features);
        assert_eq!(a.gt, b.gt);
        let c = generate_sequence(&tiny(), 10).unwrap();
        assert_ne!(a.detections, c.detections);
    }

    #[test]
    fn occlusion_removes_exact_frames() {
        let spec = ScenarioSpec {
            frames: 400,
            occlusions: vec![Occlusion {
                identity: 1,
                start: 50,
                duration: 300,
            }],
            ..tiny()
        };
        let s = generate_sequence(&spec, 0).unwrap();
        assert_eq!(s.gt.tracks[&1].len(), 100);
        assert_eq!(s.detections.len(), 5 * 400 - 300);
        let bad = ScenarioSpec {
            occlusions: vec![Occlusion {
                identity: 0,
                start: 300,
                duration: 101,
            }],
            ..spec
        };
        assert!(generate_sequence(&bad, 0).is_err());
    }

    #[test]
    fn homography_recovers_field_position() {
        let spec = ScenarioSpec {
            field_column: true,
            ..tiny()
        };
        let s = generate_sequence(&spec, 3).unwrap();
        for d in &s.detections {
            let (x, y) = project_to_field(&d.bbox, &s.homographies[&d.frame]).unwrap();
            let (fx, fy) = s.features.records[&d.det_id].field.unwrap();
            assert!((x - fx as f64).abs() < 1e-2 && (y - fy as f64).abs() < 1e-2);
        }
    }

    #[test]
    fn legible_jerseys_peak_at_number() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [7u32, 10, 23, 99] {
            let cc = jersey_confidences(&mut rng, n, 0.0);
            let (v, legible) = jersey_vector(&cc);
            assert!(legible);
            let best = (0..100).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
            assert_eq!(best as u32, n);
        }
        let (_, legible) = jersey_vector(&unreadable_confidences(&mut rng));
        assert!(!legible);
    }

    #[test]
    fn suite_shape() {
        let s = ablation_suite(0);
        assert_eq!(s.iter().filter(|c| c.group == AblationGroup::Feature).count(), 3);
        let levels: Vec<u32> = s
            .iter()
            .filter(|c| c.group == AblationGroup::Layer)
            .map(|c| c.config.levels)
            .collect();
        assert_eq!(levels, vec![7, 9, 10]);
        assert_eq!(ablation_suite(0), s);
        for c in &s {
            c.train.0.validate().unwrap();
            c.config.validate().unwrap();
        }
    }
}
