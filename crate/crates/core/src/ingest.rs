//! Readers and writers for every on-disk input and output.
//!
//! * MOT CSV (`det.txt`, `gt.txt`, tracker output): `frame,id,x,y,w,h,conf[,...]`,
//!   frames and ids 1-based on disk and 0-based in memory.
//! * `seqinfo.ini`: MOTChallenge sequence metadata.
//! * `features.tsv`: headered per-detection feature sidecar.
//! * `homography.csv`: `frame,h00,...,h22` frame-to-field matrices, frames as stored.
//! * engine config: TOML with [`EngineConfig`] fields.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{
    BBox, CharConfidences, DetId, Detection, EngineConfig, SequenceMeta, TrackPoint, TrackSet,
    CHAR_LEN,
};

pub type Mat3 = [[f64; 3]; 3];

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_num<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    column: usize,
    field: &str,
) -> Result<T> {
    field.trim().parse::<T>().map_err(|_| {
        Error::parse(
            path,
            line,
            column,
            format!("cannot parse {:?} as a number", field.trim()),
        )
    })
}

// ---------------------------------------------------------------------------
// MOT

/// One parsed row of a MOT file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRow {
    /// 0-based frame.
    pub frame: u32,
    /// 0-based identity; `None` for `-1` on disk.
    pub id: Option<u32>,
    pub bbox: BBox,
    pub confidence: f32,
    /// 1-based source line.
    pub line: usize,
}

pub fn parse_mot_str(text: &str, path: &Path) -> Result<Vec<MotRow>> {
    let mut rows = Vec::new();
    for (line, l) in data_lines(text) {
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() < 7 {
            return Err(Error::parse(
                path,
                line,
                fields.len() + 1,
                format!("expected at least 7 columns, found {}", fields.len()),
            ));
        }
        let frame: i64 = parse_num(path, line, 1, fields[0])?;
        if frame < 1 {
            return Err(Error::parse(path, line, 1, "frame numbers start at 1"));
        }
        let id_raw: f64 = parse_num(path, line, 2, fields[1])?;
        let id = if id_raw == -1.0 {
            None
        } else if id_raw >= 1.0 && id_raw.fract() == 0.0 {
            Some(id_raw as u32 - 1)
        } else {
            return Err(Error::parse(
                path,
                line,
                2,
                format!("identity {id_raw} must be -1 or a positive integer"),
            ));
        };
        let mut b = [0f32; 4];
        for (k, v) in b.iter_mut().enumerate() {
            *v = parse_num(path, line, 3 + k, fields[2 + k])?;
        }
        let confidence: f32 = parse_num(path, line, 7, fields[6])?;
        if b[2] < 0.0 || b[3] < 0.0 {
            return Err(Error::parse(
                path,
                line,
                if b[2] < 0.0 { 5 } else { 6 },
                format!("negative extent at line {line}"),
            ));
        }
        if b[2] == 0.0 || b[3] == 0.0 || !b.iter().all(|v| v.is_finite()) {
            return Err(Error::parse(
                path,
                line,
                5,
                format!("degenerate box at line {line}"),
            ));
        }
        rows.push(MotRow {
            frame: (frame - 1) as u32,
            id,
            bbox: BBox::new(b[0], b[1], b[2], b[3]),
            confidence,
            line,
        });
    }
    Ok(rows)
}

pub fn read_mot(path: &Path) -> Result<Vec<MotRow>> {
    parse_mot_str(&read_text(path)?, path)
}

/// Detections in file order; `det_id` is the row index.
pub fn rows_to_detections(rows: &[MotRow]) -> Vec<Detection> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| Detection {
            det_id: i as DetId,
            frame: r.frame,
            bbox: r.bbox,
            confidence: r.confidence.clamp(0.0, 1.0),
        })
        .collect()
}

/// Groups identified rows into tracks; `det_id` is the row index.
pub fn rows_to_trackset(rows: &[MotRow], path: &Path) -> Result<TrackSet> {
    let mut t = TrackSet::default();
    for (i, r) in rows.iter().enumerate() {
        let id = r
            .id
            .ok_or_else(|| Error::parse(path, r.line, 2, "track rows need an identity"))?;
        t.tracks.entry(id).or_default().push(TrackPoint {
            frame: r.frame,
            det_id: i as DetId,
            bbox: r.bbox,
            confidence: r.confidence,
        });
    }
    for (&id, pts) in t.tracks.iter_mut() {
        pts.sort_by_key(|p| (p.frame, p.det_id));
        if let Some(w) = pts.windows(2).find(|w| w[0].frame == w[1].frame) {
            let line = rows[w[1].det_id as usize].line;
            return Err(Error::parse(
                path,
                line,
                1,
                format!("identity {} appears twice in frame {}", id + 1, w[1].frame + 1),
            ));
        }
    }
    t.meta.frame_count = t.frame_range().map_or(0, |(_, hi)| hi + 1);
    Ok(t)
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    Ok(rows_to_detections(&read_mot(path)?))
}

/// Reads a MOT track file, picking up `seqinfo.ini` from the same directory when present.
pub fn read_trackset(path: &Path) -> Result<TrackSet> {
    let mut t = rows_to_trackset(&read_mot(path)?, path)?;
    if let Some(dir) = path.parent() {
        let ini = dir.join("seqinfo.ini");
        if ini.exists() {
            t.meta = read_seqinfo(&ini)?;
        }
    }
    Ok(t)
}

/// MOT text for a track set: rows ordered by (frame, track id), 10 columns.
pub fn format_mot(t: &TrackSet) -> String {
    let mut rows: Vec<(u32, u32, &TrackPoint)> = t
        .tracks
        .iter()
        .flat_map(|(&id, pts)| pts.iter().map(move |p| (p.frame, id, p)))
        .collect();
    rows.sort_by_key(|&(f, id, _)| (f, id));
    let mut s = String::new();
    for (f, id, p) in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},-1,-1,-1",
            f + 1,
            id + 1,
            p.bbox.x,
            p.bbox.y,
            p.bbox.w,
            p.bbox.h,
            p.confidence
        );
    }
    s
}

pub fn write_trackset(path: &Path, t: &TrackSet) -> Result<()> {
    write_text(path, &format_mot(t))
}

/// MOT text for unlabeled detections (identity column `-1`), in the given order.
pub fn format_detections(dets: &[Detection]) -> String {
    let mut s = String::new();
    for d in dets {
        let _ = writeln!(
            s,
            "{},-1,{},{},{},{},{},-1,-1,-1",
            d.frame + 1,
            d.bbox.x,
            d.bbox.y,
            d.bbox.w,
            d.bbox.h,
            d.confidence
        );
    }
    s
}

// ---------------------------------------------------------------------------
// seqinfo.ini

pub fn format_seqinfo(name: &str, m: &SequenceMeta) -> String {
    format!(
        "[Sequence]\nname={name}\nframeRate={}\nseqLength={}\nimWidth={}\nimHeight={}\n",
        m.fps, m.frame_count, m.width, m.height
    )
}

pub fn read_seqinfo(path: &Path) -> Result<SequenceMeta> {
    let text = read_text(path)?;
    let mut m = SequenceMeta::default();
    for (line, l) in data_lines(&text) {
        let Some((k, v)) = l.split_once('=') else {
            continue;
        };
        match k.trim() {
            "frameRate" => m.fps = parse_num(path, line, 2, v)?,
            "seqLength" => m.frame_count = parse_num(path, line, 2, v)?,
            "imWidth" => m.width = parse_num(path, line, 2, v)?,
            "imHeight" => m.height = parse_num(path, line, 2, v)?,
            _ => {}
        }
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// feature sidecar

pub const FEATURES_MAGIC: &str = "# hiertrack-features 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TeamColumn {
    None,
    /// Precomputed label 0 (team A), 1 (team B), 2 (referee).
    Label,
    /// Embedding to be clustered, or `ref` for detections classified as referee.
    Embedding { dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureHeader {
    pub appearance_dim: usize,
    pub jersey: bool,
    pub team: TeamColumn,
    /// Precomputed field coordinates in meters.
    pub field: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TeamInput {
    Label(u8),
    Embedding(Vec<f32>),
    Referee,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub det_id: DetId,
    pub appearance: Vec<f32>,
    /// Absent means the jersey is illegible or was never read.
    pub jersey: Option<CharConfidences>,
    pub team: Option<TeamInput>,
    pub field: Option<(f32, f32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub header: FeatureHeader,
    pub records: BTreeMap<DetId, FeatureRecord>,
}

fn join_f32(v: &[f32]) -> String {
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{x}");
    }
    s
}

fn parse_vec(path: &Path, line: usize, column: usize, cell: &str, dim: usize) -> Result<Vec<f32>> {
    let v = cell
        .split(',')
        .map(|x| parse_num::<f32>(path, line, column, x))
        .collect::<Result<Vec<_>>>()?;
    if v.len() != dim {
        return Err(Error::parse(
            path,
            line,
            column,
            format!("expected {dim} values, found {}", v.len()),
        ));
    }
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::parse(path, line, column, format!("non-finite value {bad}")));
    }
    Ok(v)
}

impl FeatureTable {
    fn columns(&self) -> Vec<&'static str> {
        let mut c = vec!["det_id", "appearance"];
        if self.header.jersey {
            c.push("jersey");
        }
        if self.header.team != TeamColumn::None {
            c.push("team");
        }
        if self.header.field {
            c.push("field");
        }
        c
    }

    pub fn to_text(&self) -> String {
        let h = &self.header;
        let mut s = String::new();
        let _ = writeln!(s, "{FEATURES_MAGIC}");
        let _ = writeln!(s, "# appearance_dim={}", h.appearance_dim);
        let _ = writeln!(s, "# jersey={}", if h.jersey { "yes" } else { "no" });
        let team = match h.team {
            TeamColumn::None => "none".to_string(),
            TeamColumn::Label => "label".to_string(),
            TeamColumn::Embedding { dim } => format!("embedding:{dim}"),
        };
        let _ = writeln!(s, "# team={team}");
        let _ = writeln!(s, "# field={}", if h.field { "yes" } else { "no" });
        let _ = writeln!(s, "{}", self.columns().join("\t"));
        for r in self.records.values() {
            let _ = write!(s, "{}\t{}", r.det_id, join_f32(&r.appearance));
            if h.jersey {
                match &r.jersey {
                    Some(cc) => {
                        let mut all = cc.c1.to_vec();
                        all.extend_from_slice(&cc.c2);
                        let _ = write!(s, "\t{}", join_f32(&all));
                    }
                    None => s.push_str("\t-"),
                }
            }
            if h.team != TeamColumn::None {
                match &r.team {
                    Some(TeamInput::Label(l)) => {
                        let _ = write!(s, "\t{l}");
                    }
                    Some(TeamInput::Embedding(e)) => {
                        let _ = write!(s, "\t{}", join_f32(e));
                    }
                    Some(TeamInput::Referee) => s.push_str("\tref"),
                    None => s.push_str("\t-"),
                }
            }
            if h.field {
                match r.field {
                    Some((x, y)) => {
                        let _ = write!(s, "\t{x},{y}");
                    }
                    None => s.push_str("\t-"),
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim() == FEATURES_MAGIC => {}
            _ => {
                return Err(Error::parse(
                    path,
                    1,
                    1,
                    format!("missing {FEATURES_MAGIC:?} header"),
                ))
            }
        }
        let mut dim = None;
        let mut jersey = None;
        let mut team = None;
        let mut field = None;
        let mut column_line = None;
        for (line, l) in lines.by_ref() {
            let l = l.trim();
            if l.is_empty() {
                continue;
            }
            let Some(kv) = l.strip_prefix('#') else {
                column_line = Some((line, l.to_string()));
                break;
            };
            let (k, v) = kv
                .trim()
                .split_once('=')
                .ok_or_else(|| Error::parse(path, line, 1, "header lines must be `# key=value`"))?;
            let yes_no = |v: &str| match v {
                "yes" => Ok(true),
                "no" => Ok(false),
                _ => Err(Error::parse(path, line, 1, format!("expected yes/no, got {v:?}"))),
            };
            match k.trim() {
                "appearance_dim" => dim = Some(parse_num::<usize>(path, line, 1, v)?),
                "jersey" => jersey = Some(yes_no(v.trim())?),
                "field" => field = Some(yes_no(v.trim())?),
                "team" => {
                    let v = v.trim();
                    team = Some(match v {
                        "none" => TeamColumn::None,
                        "label" => TeamColumn::Label,
                        _ => match v.strip_prefix("embedding:") {
                            Some(d) => TeamColumn::Embedding {
                                dim: parse_num(path, line, 1, d)?,
                            },
                            None => {
                                return Err(Error::parse(
                                    path,
                                    line,
                                    1,
                                    format!("unknown team mode {v:?}"),
                                ))
                            }
                        },
                    });
                }
                other => {
                    return Err(Error::parse(
                        path,
                        line,
                        1,
                        format!("unknown header key {other:?}"),
                    ))
                }
            }
        }
        let missing = |k: &str| Error::format(path, format!("schema mismatch: header lacks {k}"));
        let header = FeatureHeader {
            appearance_dim: dim.ok_or_else(|| missing("appearance_dim"))?,
            jersey: jersey.ok_or_else(|| missing("jersey"))?,
            team: team.ok_or_else(|| missing("team"))?,
            field: field.ok_or_else(|| missing("field"))?,
        };
        if header.appearance_dim == 0 {
            return Err(Error::format(path, "appearance_dim must be positive"));
        }
        let mut table = FeatureTable {
            header,
            records: BTreeMap::new(),
        };
        let expected = table.columns().join("\t");
        match column_line {
            Some((line, l)) if l.split_whitespace().collect::<Vec<_>>().join("\t") != expected => {
                return Err(Error::parse(
                    path,
                    line,
                    1,
                    format!("schema mismatch: columns {l:?}, header declares {expected:?}"),
                ));
            }
            None => return Err(Error::format(path, "missing column line")),
            _ => {}
        }
        let ncols = table.columns().len();
        for (line, l) in lines {
            if l.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = l.trim_end_matches(['\r', '\n']).split('\t').collect();
            if cells.len() != ncols {
                return Err(Error::parse(
                    path,
                    line,
                    cells.len().min(ncols) + 1,
                    format!("schema mismatch: expected {ncols} columns, found {}", cells.len()),
                ));
            }
            let det_id: DetId = parse_num(path, line, 1, cells[0])?;
            let appearance: Vec<f32> = cells[1]
                .split(',')
                .map(|x| parse_num::<f32>(path, line, 2, x))
                .collect::<Result<_>>()?;
            if appearance.len() != header.appearance_dim {
                return Err(Error::parse(
                    path,
                    line,
                    2,
                    format!(
                        "appearance dimension mismatch: {} values, header declares {}",
                        appearance.len(),
                        header.appearance_dim
                    ),
                ));
            }
            let mut col = 2;
            let jersey = if header.jersey {
                let cell = cells[col].trim();
                col += 1;
                if cell == "-" {
                    None
                } else {
                    let v = parse_vec(path, line, col, cell, 2 * CHAR_LEN)?;
                    let mut cc = CharConfidences {
                        c1: [0.0; CHAR_LEN],
                        c2: [0.0; CHAR_LEN],
                    };
                    cc.c1.copy_from_slice(&v[..CHAR_LEN]);
                    cc.c2.copy_from_slice(&v[CHAR_LEN..]);
                    cc.validate().map_err(|e| Error::parse(path, line, col, e.to_string()))?;
                    Some(cc)
                }
            } else {
                None
            };
            let team = match header.team {
                TeamColumn::None => None,
                mode => {
                    let cell = cells[col].trim();
                    col += 1;
                    match (mode, cell) {
                        (_, "-") => None,
                        (TeamColumn::Embedding { .. }, "ref") => Some(TeamInput::Referee),
                        (TeamColumn::Label, _) => {
                            let l: u8 = parse_num(path, line, col, cell)?;
                            if l > 2 {
                                return Err(Error::parse(
                                    path,
                                    line,
                                    col,
                                    format!("team label {l} outside 0..=2"),
                                ));
                            }
                            Some(TeamInput::Label(l))
                        }
                        (TeamColumn::Embedding { dim }, _) => {
                            Some(TeamInput::Embedding(parse_vec(path, line, col, cell, dim)?))
                        }
                        (TeamColumn::None, _) => unreachable!(),
                    }
                }
            };
            let field = if header.field {
                let cell = cells[col].trim();
                col += 1;
                if cell == "-" {
                    None
                } else {
                    let v = parse_vec(path, line, col, cell, 2)?;
                    Some((v[0], v[1]))
                }
            } else {
                None
            };
            let rec = FeatureRecord {
                det_id,
                appearance,
                jersey,
                team,
                field,
            };
            if table.records.insert(det_id, rec).is_some() {
                return Err(Error::parse(
                    path,
                    line,
                    1,
                    format!("duplicate record for det_id {det_id}"),
                ));
            }
        }
        Ok(table)
    }

    /// Every detection needs a record and every record a detection.
    pub fn check_against(&self, dets: &[Detection], path: &Path) -> Result<()> {
        for d in dets {
            if !self.records.contains_key(&d.det_id) {
                return Err(Error::format(
                    path,
                    format!("no feature record for det_id {}", d.det_id),
                ));
            }
        }
        if self.records.len() != dets.len() {
            let known: std::collections::HashSet<DetId> = dets.iter().map(|d| d.det_id).collect();
            if let Some(extra) = self.records.keys().find(|k| !known.contains(k)) {
                return Err(Error::format(
                    path,
                    format!("feature record references unknown det_id {extra}"),
                ));
            }
        }
        Ok(())
    }
}

pub fn read_features(path: &Path) -> Result<FeatureTable> {
    FeatureTable::parse(&read_text(path)?, path)
}

pub fn write_features(path: &Path, t: &FeatureTable) -> Result<()> {
    write_text(path, &t.to_text())
}

// ---------------------------------------------------------------------------
// homographies

pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn parse_homographies(text: &str, path: &Path) -> Result<BTreeMap<u32, Mat3>> {
    let mut out = BTreeMap::new();
    for (line, l) in data_lines(text) {
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::parse(
                path,
                line,
                fields.len().min(10) + 1,
                format!("expected 10 columns, found {}", fields.len()),
            ));
        }
        let frame: u32 = parse_num(path, line, 1, fields[0])?;
        let mut m = [[0f64; 3]; 3];
        for k in 0..9 {
            m[k / 3][k % 3] = parse_num(path, line, k + 2, fields[k + 1])?;
        }
        if !m.iter().flatten().all(|v| v.is_finite()) || det3(&m).abs() <= 1e-12 {
            return Err(Error::parse(path, line, 2, "singular homography"));
        }
        if out.insert(frame, m).is_some() {
            return Err(Error::parse(
                path,
                line,
                1,
                format!("duplicate homography for frame {frame}"),
            ));
        }
    }
    Ok(out)
}

pub fn format_homographies(h: &BTreeMap<u32, Mat3>) -> String {
    let mut s = String::new();
    for (f, m) in h {
        let _ = write!(s, "{f}");
        for v in m.iter().flatten() {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn read_homographies(path: &Path) -> Result<BTreeMap<u32, Mat3>> {
    parse_homographies(&read_text(path)?, path)
}

// ---------------------------------------------------------------------------
// config

pub fn parse_config(text: &str, path: &Path) -> Result<EngineConfig> {
    let c: EngineConfig =
        toml::from_str(text).map_err(|e| Error::format(path, format!("config: {e}")))?;
    c.validate()?;
    Ok(c)
}

pub fn read_config(path: &Path) -> Result<EngineConfig> {
    parse_config(&read_text(path)?, path)
}

pub fn format_config(c: &EngineConfig) -> String {
    toml::to_string(c).expect("config serializes")
}

// ---------------------------------------------------------------------------
// sequence bundle

#[derive(Debug, Clone, Default)]
pub struct SequencePaths {
    pub detections: PathBuf,
    pub features: PathBuf,
    pub homographies: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub seqinfo: Option<PathBuf>,
}

/// All inputs for one sequence, validated against each other.
#[derive(Debug, Clone)]
pub struct SequenceBundle {
    pub detections: Vec<Detection>,
    pub features: FeatureTable,
    pub homographies: BTreeMap<u32, Mat3>,
    pub gt: Option<TrackSet>,
    pub config: EngineConfig,
    pub meta: SequenceMeta,
}

impl SequenceBundle {
    pub fn new(
        detections: Vec<Detection>,
        features: FeatureTable,
        homographies: BTreeMap<u32, Mat3>,
        gt: Option<TrackSet>,
        config: EngineConfig,
        meta: SequenceMeta,
    ) -> Result<Self> {
        let b = SequenceBundle {
            detections,
            features,
            homographies,
            gt,
            config,
            meta,
        };
        b.validate(Path::new("<memory>"))?;
        Ok(b)
    }

    fn validate(&self, features_path: &Path) -> Result<()> {
        self.config.validate()?;
        let mut ids = std::collections::HashSet::new();
        for d in &self.detections {
            d.validate()?;
            if !ids.insert(d.det_id) {
                return Err(Error::Validation(format!("duplicate det_id {}", d.det_id)));
            }
        }
        self.features.check_against(&self.detections, features_path)
    }

    pub fn load(paths: &SequencePaths) -> Result<Self> {
        let config = match &paths.config {
            Some(p) => read_config(p)?,
            None => EngineConfig::default(),
        };
        Self::load_with_config(paths, config)
    }

    pub fn load_with_config(paths: &SequencePaths, config: EngineConfig) -> Result<Self> {
        let detections = read_detections(&paths.detections)?;
        let features = read_features(&paths.features)?;
        let homographies = match &paths.homographies {
            Some(p) => read_homographies(p)?,
            None => BTreeMap::new(),
        };
        let gt = paths.gt.as_deref().map(read_trackset).transpose()?;
        let seqinfo = paths.seqinfo.clone().or_else(|| {
            let p = paths.detections.parent()?.join("seqinfo.ini");
            p.exists().then_some(p)
        });
        let mut meta = match seqinfo {
            Some(p) => read_seqinfo(&p)?,
            None => SequenceMeta::default(),
        };
        if meta.frame_count == 0 {
            meta.frame_count = detections.iter().map(|d| d.frame + 1).max().unwrap_or(0);
        }
        let b = SequenceBundle {
            detections,
            features,
            homographies,
            gt,
            config,
            meta,
        };
        b.validate(&paths.features)?;
        Ok(b)
    }
}
