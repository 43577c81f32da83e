mod common;

use std::collections::BTreeMap;
use std::path::Path;

use hiertrack::features::EdgeLayout;
use hiertrack::ingest::{
    format_config, format_detections, format_homographies, format_mot, parse_config,
    parse_homographies, parse_mot_str, rows_to_detections, rows_to_trackset, FeatureTable, Mat3,
};
use hiertrack::model::{
    BBox, Detection, EngineConfig, FeatureMask, RoundingKind, ScorerKind, SpatialMode, TrackSet,
};
use hiertrack::scorer::{weights_from_json, weights_to_json, ScorerWeights};
use hiertrack::synth::{generate_sequence, parse_scenario, ScenarioSpec, TeamMode};
use proptest::prelude::*;

fn p() -> &'static Path {
    Path::new("<test>")
}

fn bbox() -> impl Strategy<Value = BBox> {
    (-50.0f32..2000.0, -50.0f32..1100.0, 0.5f32..300.0, 0.5f32..500.0)
        .prop_map(|(x, y, w, h)| BBox::new(x, y, w, h))
}

fn detections() -> impl Strategy<Value = Vec<Detection>> {
    prop::collection::vec((0u32..5000, bbox(), 0.0f32..=1.0), 0..60).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (frame, bbox, confidence))| Detection {
                det_id: i as u32,
                frame,
                bbox,
                confidence,
            })
            .collect()
    })
}

fn tracksets() -> impl Strategy<Value = TrackSet> {
    prop::collection::btree_map(0u32..50, prop::collection::btree_map(0u32..400, bbox(), 1..20), 0..8)
        .prop_map(|m| {
            common::trackset(
                m.into_iter()
                    .map(|(id, pts)| {
                        let pts = pts
                            .into_iter()
                            .map(|(f, b)| common::point(f, 0, [b.x, b.y, b.w, b.h]))
                            .collect();
                        (id, pts)
                    })
                    .collect(),
            )
        })
}

fn mat3() -> impl Strategy<Value = Mat3> {
    prop::array::uniform9(-1e3f64..1e3).prop_map(|a| [[a[0], a[1], a[2]], [a[3], a[4], a[5]], [a[6], a[7], a[8]]])
}

proptest! {
    #[test]
    fn detections_round_trip_bitwise(dets in detections()) {
        let text = format_detections(&dets);
        let back = rows_to_detections(&parse_mot_str(&text, p()).unwrap());
        prop_assert_eq!(&back, &dets);
        prop_assert_eq!(format_detections(&back), text);
    }

    #[test]
    fn tracks_round_trip_bitwise(t in tracksets()) {
        let text = format_mot(&t);
        let back = rows_to_trackset(&parse_mot_str(&text, p()).unwrap(), p()).unwrap();
        prop_assert_eq!(back.tracks.len(), t.tracks.len());
        for (id, pts) in &t.tracks {
            let got = &back.tracks[id];
            prop_assert_eq!(got.len(), pts.len());
            for (a, b) in got.iter().zip(pts) {
                prop_assert_eq!(a.frame, b.frame);
                prop_assert_eq!(a.bbox, b.bbox);
            }
        }
        prop_assert_eq!(format_mot(&back), text);
    }

    #[test]
    fn homographies_round_trip_bitwise(ms in prop::collection::btree_map(0u32..10_000, mat3(), 0..20)) {
        let ms: BTreeMap<u32, Mat3> = ms
            .into_iter()
            .filter(|(_, m)| hiertrack::ingest::det3(m).abs() > 1e-6)
            .collect();
        let text = format_homographies(&ms);
        let back = parse_homographies(&text, p()).unwrap();
        prop_assert_eq!(&back, &ms);
    }

    #[test]
    fn weights_round_trip_bitwise(seed in any::<u64>(), mpn in any::<bool>(), levels in 1u32..11) {
        let layout = EdgeLayout { spatial_mode: SpatialMode::Frame, iou: true };
        let kind = if mpn { ScorerKind::MessagePassing } else { ScorerKind::Logistic };
        let mut w = ScorerWeights::init(kind, levels, &layout, 4, 2, seed);
        let mut x = seed;
        for p in &mut w.params {
            let positive = p.name == "input_scale";
            for v in &mut p.data {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let u = (x >> 11) as f64 / (1u64 << 53) as f64;
                *v = if positive { 0.1 + u } else { u * 2.0 - 1.0 };
            }
        }
        let back = weights_from_json(&weights_to_json(&w)).unwrap();
        for (a, b) in back.params.iter().zip(&w.params) {
            prop_assert_eq!(&a.name, &b.name);
            prop_assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        prop_assert_eq!(back.meta, w.meta);
    }

    #[test]
    fn config_round_trips(levels in 1u32..=12, k in 1usize..30, frame in any::<bool>(), exact in any::<bool>(), seed in any::<u64>(), iou in any::<bool>()) {
        let c = EngineConfig {
            levels,
            prune_k: k,
            spatial_mode: if frame { SpatialMode::Frame } else { SpatialMode::Field },
            rounding: if exact { RoundingKind::Exact } else { RoundingKind::Greedy },
            seed,
            features: FeatureMask { iou, ..FeatureMask::default() },
            ..EngineConfig::default()
        };
        prop_assert_eq!(parse_config(&format_config(&c), p()).unwrap(), c);
    }
}

#[test]
fn feature_tables_round_trip_bitwise() {
    for (seed, mode, field) in [
        (0, TeamMode::Embedding, false),
        (1, TeamMode::Label, true),
        (2, TeamMode::None, false),
    ] {
        let spec = ScenarioSpec {
            players_per_team: 2,
            referees: 1,
            frames: 30,
            team_mode: mode,
            field_column: field,
            ..ScenarioSpec::default()
        };
        let s = generate_sequence(&spec, seed).unwrap();
        let text = s.features.to_text();
        let back = FeatureTable::parse(&text, p()).unwrap();
        assert_eq!(back, s.features);
        assert_eq!(back.to_text(), text);
    }
}

#[test]
fn scenario_specs_round_trip() {
    let spec = ScenarioSpec {
        frames: 123,
        ..ScenarioSpec::hockey()
    };
    let text = toml::to_string(&spec).unwrap();
    assert_eq!(parse_scenario(&text, p()).unwrap(), spec);
}

#[test]
fn malformed_rows_report_line_and_column() {
    let err = parse_mot_str("1,-1,0,0,10,10,1,-1,-1,-1\n2,-1,0,zero,10,10,1,-1,-1,-1\n", p()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("line 2"), "{msg}");
    assert!(msg.contains("column 4"), "{msg}");
}
