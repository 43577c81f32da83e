//! Edge classifiers: per-level feature encoders feeding a head shared across levels.
//!
//! * `logistic`: one affine logit per level over standardized edge features.
//! * `message_passing`: per-level ReLU encoder, then `rounds` of time-aware edge and node
//!   updates with weights shared across levels, then a sigmoid edge head.
//!
//! Gradients are derived by hand; [`gradient_check`] compares them to finite differences.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::EdgeLayout;
use crate::ingest::{read_text, write_text};
use crate::model::{AssocGraph, ScorerKind};

pub const WEIGHTS_FORMAT: &str = "hiertrack-weights";
pub const WEIGHTS_VERSION: u32 = 1;
pub const DEFAULT_HIDDEN: usize = 16;
pub const DEFAULT_ROUNDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    /// Encoder of one hierarchy level.
    Level(u32),
    /// Shared across levels.
    Shared,
    /// Not trained (input standardization).
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub group: ParamGroup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerMeta {
    pub kind: ScorerKind,
    pub levels: u32,
    pub feature_dim: usize,
    pub hidden: usize,
    pub rounds: usize,
    pub layout: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerWeights {
    pub meta: ScorerMeta,
    pub params: Vec<Param>,
}

fn level_prefix(l: u32) -> String {
    format!("level{l}")
}

impl ScorerWeights {
    /// Logistic weights are zero; message-passing weights are He-initialized from `seed`.
    pub fn init(
        kind: ScorerKind,
        levels: u32,
        layout: &EdgeLayout,
        hidden: usize,
        rounds: usize,
        seed: u64,
    ) -> Self {
        let f = layout.dim();
        let meta = ScorerMeta {
            kind,
            levels,
            feature_dim: f,
            hidden,
            rounds,
            layout: layout.tag(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![
            Param {
                name: "input_mean".into(),
                rows: 1,
                cols: f,
                data: vec![0.0; f],
                group: ParamGroup::Fixed,
            },
            Param {
                name: "input_scale".into(),
                rows: 1,
                cols: f,
                data: vec![1.0; f],
                group: ParamGroup::Fixed,
            },
        ];
        let mut he = |name: String, rows: usize, cols: usize, group: ParamGroup| {
            let n = Normal::new(0.0, (2.0 / cols as f64).sqrt()).unwrap();
            Param {
                name,
                rows,
                cols,
                data: (0..rows * cols).map(|_| n.sample(&mut rng)).collect(),
                group,
            }
        };
        let bias = |name: String, rows: usize, v: f64, group: ParamGroup| Param {
            name,
            rows,
            cols: 1,
            data: vec![v; rows],
            group,
        };
        match kind {
            ScorerKind::Logistic => {
                for l in 1..=levels {
                    let p = level_prefix(l);
                    params.push(Param {
                        name: format!("{p}.weight"),
                        rows: 1,
                        cols: f,
                        data: vec![0.0; f],
                        group: ParamGroup::Level(l),
                    });
                    params.push(bias(format!("{p}.bias"), 1, 0.0, ParamGroup::Level(l)));
                }
            }
            ScorerKind::MessagePassing => {
                let h = hidden;
                for l in 1..=levels {
                    let p = level_prefix(l);
                    params.push(he(format!("{p}.enc_weight"), h, f, ParamGroup::Level(l)));
                    params.push(bias(format!("{p}.enc_bias"), h, 0.01, ParamGroup::Level(l)));
                }
                for n in ["w_src", "w_dst", "w_prev", "w_init"] {
                    params.push(he(format!("edge_update.{n}"), h, h, ParamGroup::Shared));
                }
                params.push(bias("edge_update.bias".into(), h, 0.01, ParamGroup::Shared));
                for n in ["w_in", "w_out"] {
                    params.push(he(format!("node_update.{n}"), h, h, ParamGroup::Shared));
                }
                params.push(bias("node_update.bias".into(), h, 0.01, ParamGroup::Shared));
                params.push(he("head.weight".into(), 1, h, ParamGroup::Shared));
                params.push(bias("head.bias".into(), 1, 0.0, ParamGroup::Shared));
            }
        }
        ScorerWeights { meta, params }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn get(&self, name: &str) -> &Param {
        &self.params[self.index(name).unwrap_or_else(|| panic!("missing parameter {name}"))]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Param {
        let i = self.index(name).unwrap_or_else(|| panic!("missing parameter {name}"));
        &mut self.params[i]
    }

    pub fn num_trainable(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.group != ParamGroup::Fixed)
            .map(|p| p.data.len())
            .sum()
    }

    /// Fails unless the weights were trained on `layout`.
    pub fn check_layout(&self, layout: &EdgeLayout) -> Result<()> {
        if self.meta.layout != layout.tag() || self.meta.feature_dim != layout.dim() {
            return Err(Error::Weights(format!(
                "weights expect edge layout {} ({} features), graph uses {} ({} features)",
                self.meta.layout,
                self.meta.feature_dim,
                layout.tag(),
                layout.dim()
            )));
        }
        Ok(())
    }

    /// Sets input standardization from the features of `graphs`.
    pub fn fit_standardization<'a>(&mut self, graphs: impl IntoIterator<Item = &'a GraphInput>) {
        let f = self.meta.feature_dim;
        let mut sum = vec![0f64; f];
        let mut sq = vec![0f64; f];
        let mut n = 0usize;
        for g in graphs {
            for row in g.features.chunks_exact(f) {
                for k in 0..f {
                    sum[k] += row[k];
                    sq[k] += row[k] * row[k];
                }
                n += 1;
            }
        }
        if n == 0 {
            return;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let scale: Vec<f64> = (0..f)
            .map(|k| {
                let var = (sq[k] / n as f64 - mean[k] * mean[k]).max(0.0);
                let sd = var.sqrt();
                if sd > 1e-6 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        self.get_mut("input_mean").data = mean;
        self.get_mut("input_scale").data = scale;
    }

    fn validate(&self) -> Result<()> {
        let reference = ScorerWeights::init(
            self.meta.kind,
            self.meta.levels,
            &EdgeLayout {
                spatial_mode: crate::model::SpatialMode::Field,
                iou: false,
            },
            self.meta.hidden,
            self.meta.rounds,
            0,
        );
        for r in &reference.params {
            let rows = r.rows;
            let cols = if r.cols == reference.meta.feature_dim && r.name.starts_with("input")
                || r.name.ends_with(".weight") && self.meta.kind == ScorerKind::Logistic
                || r.name.ends_with(".enc_weight")
            {
                self.meta.feature_dim
            } else {
                r.cols
            };
            let p = self
                .params
                .iter()
                .find(|p| p.name == r.name)
                .ok_or_else(|| Error::Weights(format!("missing array {:?}", r.name)))?;
            if p.rows != rows || p.cols != cols || p.data.len() != rows * cols {
                return Err(Error::Weights(format!(
                    "array {:?} has shape {}x{}, expected {rows}x{cols}",
                    p.name, p.rows, p.cols
                )));
            }
            if let Some(bad) = p.data.iter().find(|v| !v.is_finite()) {
                return Err(Error::Weights(format!("array {:?} holds non-finite {bad}", p.name)));
            }
        }
        if self.params.len() != reference.params.len() {
            return Err(Error::Weights("unexpected extra arrays".into()));
        }
        if self.get("input_scale").data.iter().any(|&s| s <= 0.0) {
            return Err(Error::Weights("input_scale must be positive".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// weight file

#[derive(Serialize, Deserialize)]
struct ArrayFile {
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    format: String,
    version: u32,
    kind: ScorerKind,
    levels: u32,
    feature_dim: usize,
    hidden: usize,
    rounds: usize,
    layout: String,
    arrays: BTreeMap<String, ArrayFile>,
}

pub fn weights_to_json(w: &ScorerWeights) -> String {
    let file = WeightsFile {
        format: WEIGHTS_FORMAT.into(),
        version: WEIGHTS_VERSION,
        kind: w.meta.kind,
        levels: w.meta.levels,
        feature_dim: w.meta.feature_dim,
        hidden: w.meta.hidden,
        rounds: w.meta.rounds,
        layout: w.meta.layout.clone(),
        arrays: w
            .params
            .iter()
            .map(|p| {
                (
                    p.name.clone(),
                    ArrayFile {
                        shape: [p.rows, p.cols],
                        data: p.data.clone(),
                    },
                )
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("weights serialize")
}

pub fn weights_from_json(text: &str) -> Result<ScorerWeights> {
    let mut file: WeightsFile =
        serde_json::from_str(text).map_err(|e| Error::Weights(format!("malformed file: {e}")))?;
    if file.format != WEIGHTS_FORMAT {
        return Err(Error::Weights(format!("unknown format {:?}", file.format)));
    }
    if file.version != WEIGHTS_VERSION {
        return Err(Error::Weights(format!(
            "unsupported version {} (expected {WEIGHTS_VERSION})",
            file.version
        )));
    }
    if !file.layout.starts_with("edge-v1:") {
        return Err(Error::Weights(format!(
            "unsupported feature layout version {:?}",
            file.layout
        )));
    }
    // Order and groups come from a freshly initialized template.
    let template = ScorerWeights::init(
        file.kind,
        file.levels,
        &EdgeLayout {
            spatial_mode: crate::model::SpatialMode::Field,
            iou: false,
        },
        file.hidden,
        file.rounds,
        0,
    );
    let mut params = Vec::with_capacity(template.params.len());
    for t in &template.params {
        let a = file
            .arrays
            .remove(&t.name)
            .ok_or_else(|| Error::Weights(format!("missing array {:?}", t.name)))?;
        params.push(Param {
            name: t.name.clone(),
            rows: a.shape[0],
            cols: a.shape[1],
            data: a.data,
            group: t.group,
        });
    }
    if let Some(extra) = file.arrays.keys().next() {
        return Err(Error::Weights(format!("unexpected array {extra:?}")));
    }
    let w = ScorerWeights {
        meta: ScorerMeta {
            kind: file.kind,
            levels: file.levels,
            feature_dim: file.feature_dim,
            hidden: file.hidden,
            rounds: file.rounds,
            layout: file.layout,
        },
        params,
    };
    w.validate()?;
    Ok(w)
}

pub fn save_weights(path: &Path, w: &ScorerWeights) -> Result<()> {
    w.validate()?;
    write_text(path, &weights_to_json(w))
}

pub fn load_weights(path: &Path) -> Result<ScorerWeights> {
    weights_from_json(&read_text(path)?).map_err(|e| match e {
        Error::Weights(m) => Error::Weights(format!("{}: {m}", path.display())),
        other => other,
    })
}

// ---------------------------------------------------------------------------
// forward / backward

/// Minimal view of an association graph for scoring and training.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub level: u32,
    pub num_nodes: usize,
    pub edges: Vec<(u32, u32)>,
    /// Row-major `edges.len() x feature_dim`.
    pub features: Vec<f64>,
}

impl GraphInput {
    pub fn from_graph(g: &AssocGraph) -> Self {
        GraphInput {
            level: g.level,
            num_nodes: g.nodes.len(),
            edges: g.edges.iter().map(|e| (e.src as u32, e.dst as u32)).collect(),
            features: g
                .edges
                .iter()
                .flat_map(|e| e.features.iter().map(|&v| v as f64))
                .collect(),
        }
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    pub graph: GraphInput,
    /// 1 for same identity, 0 otherwise; one per edge.
    pub labels: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// out += W x, W is rows x cols row-major.
fn matvec_acc(out: &mut [f64], w: &[f64], cols: usize, x: &[f64]) {
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        let mut s = 0.0;
        for (a, b) in row.iter().zip(x) {
            s += a * b;
        }
        *o += s;
    }
}

/// out += W^T g.
fn matvec_t_acc(out: &mut [f64], w: &[f64], cols: usize, g: &[f64]) {
    for (gi, row) in g.iter().zip(w.chunks_exact(cols)) {
        if *gi == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += gi * a;
        }
    }
}

/// dW += g x^T.
fn outer_acc(dw: &mut [f64], cols: usize, g: &[f64], x: &[f64]) {
    for (gi, row) in g.iter().zip(dw.chunks_exact_mut(cols)) {
        if *gi == 0.0 {
            continue;
        }
        for (d, xv) in row.iter_mut().zip(x) {
            *d += gi * xv;
        }
    }
}

fn relu_inplace(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

struct Standardized {
    x: Vec<f64>,
}

fn standardize(w: &ScorerWeights, g: &GraphInput) -> Result<Standardized> {
    let f = w.meta.feature_dim;
    if g.features.len() != g.edges.len() * f {
        return Err(Error::Weights(format!(
            "edge features have dimension {}, weights expect {f}",
            if g.edges.is_empty() { 0 } else { g.features.len() / g.edges.len() }
        )));
    }
    if g.level < 1 || g.level > w.meta.levels {
        return Err(Error::Weights(format!(
            "graph level {} outside the {} levels of the weights",
            g.level, w.meta.levels
        )));
    }
    let mean = &w.get("input_mean").data;
    let scale = &w.get("input_scale").data;
    let mut x = g.features.clone();
    for row in x.chunks_exact_mut(f) {
        for k in 0..f {
            row[k] = (row[k] - mean[k]) / scale[k];
        }
    }
    Ok(Standardized { x })
}

/// Parameter indices for the message-passing network.
struct MpnIdx {
    enc_w: usize,
    enc_b: usize,
    w_src: usize,
    w_dst: usize,
    w_prev: usize,
    w_init: usize,
    e_bias: usize,
    w_in: usize,
    w_out: usize,
    n_bias: usize,
    head_w: usize,
    head_b: usize,
}

impl MpnIdx {
    fn new(w: &ScorerWeights, level: u32) -> Self {
        let i = |n: &str| w.index(n).unwrap_or_else(|| panic!("missing parameter {n}"));
        let p = level_prefix(level);
        MpnIdx {
            enc_w: i(&format!("{p}.enc_weight")),
            enc_b: i(&format!("{p}.enc_bias")),
            w_src: i("edge_update.w_src"),
            w_dst: i("edge_update.w_dst"),
            w_prev: i("edge_update.w_prev"),
            w_init: i("edge_update.w_init"),
            e_bias: i("edge_update.bias"),
            w_in: i("node_update.w_in"),
            w_out: i("node_update.w_out"),
            n_bias: i("node_update.bias"),
            head_w: i("head.weight"),
            head_b: i("head.bias"),
        }
    }
}

struct MpnTrace {
    x: Vec<f64>,
    /// Edge states per round, `e[0]` is the encoder output.
    e: Vec<Vec<f64>>,
    /// Node states per round, `h[0]` is zero.
    h: Vec<Vec<f64>>,
    agg_in: Vec<Vec<f64>>,
    agg_out: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

fn mpn_forward(w: &ScorerWeights, g: &GraphInput, rounds: usize) -> Result<MpnTrace> {
    let Standardized { x } = standardize(w, g)?;
    let idx = MpnIdx::new(w, g.level);
    let hd = w.meta.hidden;
    let f = w.meta.feature_dim;
    let ne = g.edges.len();
    let nv = g.num_nodes;
    let d = |i: usize| w.params[i].data.as_slice();

    let mut e0 = vec![0f64; ne * hd];
    for k in 0..ne {
        let out = &mut e0[k * hd..(k + 1) * hd];
        out.copy_from_slice(d(idx.enc_b));
        matvec_acc(out, d(idx.enc_w), f, &x[k * f..(k + 1) * f]);
        relu_inplace(out);
    }
    let mut e = vec![e0];
    let mut h = vec![vec![0f64; nv * hd]];
    let mut agg_in = Vec::new();
    let mut agg_out = Vec::new();
    for m in 1..=rounds {
        let (hp, ep, e_init) = (&h[m - 1], &e[m - 1], &e[0]);
        let mut en = vec![0f64; ne * hd];
        for (k, &(s, t)) in g.edges.iter().enumerate() {
            let (s, t) = (s as usize, t as usize);
            let out = &mut en[k * hd..(k + 1) * hd];
            out.copy_from_slice(d(idx.e_bias));
            matvec_acc(out, d(idx.w_src), hd, &hp[s * hd..(s + 1) * hd]);
            matvec_acc(out, d(idx.w_dst), hd, &hp[t * hd..(t + 1) * hd]);
            matvec_acc(out, d(idx.w_prev), hd, &ep[k * hd..(k + 1) * hd]);
            matvec_acc(out, d(idx.w_init), hd, &e_init[k * hd..(k + 1) * hd]);
            relu_inplace(out);
        }
        if m < rounds {
            let mut ai = vec![0f64; nv * hd];
            let mut ao = vec![0f64; nv * hd];
            for (k, &(s, t)) in g.edges.iter().enumerate() {
                let (s, t) = (s as usize, t as usize);
                for j in 0..hd {
                    ai[t * hd + j] += en[k * hd + j];
                    ao[s * hd + j] += en[k * hd + j];
                }
            }
            let mut hn = vec![0f64; nv * hd];
            for v in 0..nv {
                let out = &mut hn[v * hd..(v + 1) * hd];
                out.copy_from_slice(d(idx.n_bias));
                matvec_acc(out, d(idx.w_in), hd, &ai[v * hd..(v + 1) * hd]);
                matvec_acc(out, d(idx.w_out), hd, &ao[v * hd..(v + 1) * hd]);
                relu_inplace(out);
            }
            agg_in.push(ai);
            agg_out.push(ao);
            h.push(hn);
        }
        e.push(en);
    }
    let last = e.last().unwrap();
    let hw = d(idx.head_w);
    let hb = d(idx.head_b)[0];
    let logits = (0..ne)
        .map(|k| hb + hw.iter().zip(&last[k * hd..(k + 1) * hd]).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    Ok(MpnTrace {
        x,
        e,
        h,
        agg_in,
        agg_out,
        logits,
    })
}

fn mpn_backward(
    w: &ScorerWeights,
    g: &GraphInput,
    tr: &MpnTrace,
    dlogits: &[f64],
    grads: &mut [Vec<f64>],
) {
    let idx = MpnIdx::new(w, g.level);
    let hd = w.meta.hidden;
    let f = w.meta.feature_dim;
    let ne = g.edges.len();
    let nv = g.num_nodes;
    let rounds = tr.e.len() - 1;
    let d = |i: usize| w.params[i].data.as_slice();

    let last = tr.e.last().unwrap();
    let mut de = vec![0f64; ne * hd];
    for k in 0..ne {
        let dz = dlogits[k];
        grads[idx.head_b][0] += dz;
        for j in 0..hd {
            grads[idx.head_w][j] += dz * last[k * hd + j];
            de[k * hd + j] = dz * d(idx.head_w)[j];
        }
    }
    let mut de0 = vec![0f64; ne * hd];
    // dh[m] accumulates gradient w.r.t. h[m] from round m + 1's edge update.
    let mut dh = vec![0f64; nv * hd];
    for m in (1..=rounds).rev() {
        if m < rounds {
            // Node update of round m produced h[m] from e[m].
            let hm = &tr.h[m];
            let mut dpre = vec![0f64; nv * hd];
            for i in 0..nv * hd {
                if hm[i] > 0.0 {
                    dpre[i] = dh[i];
                }
            }
            let (ai, ao) = (&tr.agg_in[m - 1], &tr.agg_out[m - 1]);
            let mut dai = vec![0f64; nv * hd];
            let mut dao = vec![0f64; nv * hd];
            for v in 0..nv {
                let gv = &dpre[v * hd..(v + 1) * hd];
                for j in 0..hd {
                    grads[idx.n_bias][j] += gv[j];
                }
                outer_acc(&mut grads[idx.w_in], hd, gv, &ai[v * hd..(v + 1) * hd]);
                outer_acc(&mut grads[idx.w_out], hd, gv, &ao[v * hd..(v + 1) * hd]);
                matvec_t_acc(&mut dai[v * hd..(v + 1) * hd], d(idx.w_in), hd, gv);
                matvec_t_acc(&mut dao[v * hd..(v + 1) * hd], d(idx.w_out), hd, gv);
            }
            for (k, &(s, t)) in g.edges.iter().enumerate() {
                let (s, t) = (s as usize, t as usize);
                for j in 0..hd {
                    de[k * hd + j] += dai[t * hd + j] + dao[s * hd + j];
                }
            }
        }
        // Edge update of round m produced e[m] from h[m-1], e[m-1], e[0].
        let em = &tr.e[m];
        let hp = &tr.h[m - 1];
        let ep = &tr.e[m - 1];
        let mut dh_prev = vec![0f64; nv * hd];
        let mut de_prev = vec![0f64; ne * hd];
        for (k, &(s, t)) in g.edges.iter().enumerate() {
            let (s, t) = (s as usize, t as usize);
            let mut gk = [0f64; 256];
            let gk = &mut gk[..hd];
            let mut any = false;
            for j in 0..hd {
                if em[k * hd + j] > 0.0 {
                    gk[j] = de[k * hd + j];
                    any |= gk[j] != 0.0;
                }
            }
            if !any {
                continue;
            }
            for j in 0..hd {
                grads[idx.e_bias][j] += gk[j];
            }
            outer_acc(&mut grads[idx.w_src], hd, gk, &hp[s * hd..(s + 1) * hd]);
            outer_acc(&mut grads[idx.w_dst], hd, gk, &hp[t * hd..(t + 1) * hd]);
            outer_acc(&mut grads[idx.w_prev], hd, gk, &ep[k * hd..(k + 1) * hd]);
            outer_acc(&mut grads[idx.w_init], hd, gk, &tr.e[0][k * hd..(k + 1) * hd]);
            matvec_t_acc(&mut dh_prev[s * hd..(s + 1) * hd], d(idx.w_src), hd, gk);
            matvec_t_acc(&mut dh_prev[t * hd..(t + 1) * hd], d(idx.w_dst), hd, gk);
            matvec_t_acc(&mut de_prev[k * hd..(k + 1) * hd], d(idx.w_prev), hd, gk);
            matvec_t_acc(&mut de0[k * hd..(k + 1) * hd], d(idx.w_init), hd, gk);
        }
        dh = dh_prev;
        de = de_prev;
    }
    // Whatever flowed into e[m-1] at m = 1 is gradient on e[0].
    for i in 0..ne * hd {
        de0[i] += de[i];
    }
    let e0 = &tr.e[0];
    for k in 0..ne {
        let mut gk = vec![0f64; hd];
        for j in 0..hd {
            if e0[k * hd + j] > 0.0 {
                gk[j] = de0[k * hd + j];
            }
        }
        for j in 0..hd {
            grads[idx.enc_b][j] += gk[j];
        }
        outer_acc(&mut grads[idx.enc_w], f, &gk, &tr.x[k * f..(k + 1) * f]);
    }
}

fn logistic_logits(w: &ScorerWeights, g: &GraphInput) -> Result<(Vec<f64>, Vec<f64>)> {
    let Standardized { x } = standardize(w, g)?;
    let f = w.meta.feature_dim;
    let p = level_prefix(g.level);
    let wt = &w.get(&format!("{p}.weight")).data;
    let b = w.get(&format!("{p}.bias")).data[0];
    let logits = x
        .chunks_exact(f)
        .map(|row| b + row.iter().zip(wt).map(|(a, c)| a * c).sum::<f64>())
        .collect();
    Ok((logits, x))
}

/// Raw edge logits.
pub fn logits(w: &ScorerWeights, g: &GraphInput) -> Result<Vec<f64>> {
    match w.meta.kind {
        ScorerKind::Logistic => Ok(logistic_logits(w, g)?.0),
        ScorerKind::MessagePassing => Ok(mpn_forward(w, g, w.meta.rounds)?.logits),
    }
}

/// Edge probabilities in [0, 1], one per edge.
pub fn score_graph(w: &ScorerWeights, g: &GraphInput) -> Result<Vec<f64>> {
    Ok(logits(w, g)?.into_iter().map(sigmoid).collect())
}

/// Scores every edge of `g` in place.
pub fn score_edges(g: &mut AssocGraph, w: &ScorerWeights) -> Result<()> {
    if g.edges.is_empty() {
        return Ok(());
    }
    let input = GraphInput::from_graph(g);
    if input.features.len() != input.edges.len() * w.meta.feature_dim {
        return Err(Error::Weights(format!(
            "edge layout mismatch: {} features per edge, weights expect {}",
            g.edges[0].features.len(),
            w.meta.feature_dim
        )));
    }
    let scores = score_graph(w, &input)?;
    for (e, s) in g.edges.iter_mut().zip(scores) {
        e.score = s as f32;
    }
    Ok(())
}

/// Mean binary cross-entropy over all edges of `batch` and its gradient.
///
/// `grads` is resized to match `w.params`; an empty batch has loss and gradient zero.
pub fn loss_and_grad(
    w: &ScorerWeights,
    batch: &[&LabeledGraph],
    grads: &mut Vec<Vec<f64>>,
) -> Result<f64> {
    grads.clear();
    grads.extend(w.params.iter().map(|p| vec![0f64; p.data.len()]));
    let total: usize = batch.iter().map(|g| g.labels.len()).sum();
    if total == 0 {
        return Ok(0.0);
    }
    let inv = 1.0 / total as f64;
    let mut loss = 0f64;
    for lg in batch {
        let g = &lg.graph;
        if lg.labels.len() != g.edges.len() {
            return Err(Error::Training("label count does not match edge count".into()));
        }
        match w.meta.kind {
            ScorerKind::Logistic => {
                let (z, x) = logistic_logits(w, g)?;
                let f = w.meta.feature_dim;
                let p = level_prefix(g.level);
                let wi = w.index(&format!("{p}.weight")).unwrap();
                let bi = w.index(&format!("{p}.bias")).unwrap();
                for (k, (&zk, &y)) in z.iter().zip(&lg.labels).enumerate() {
                    loss += softplus(zk) - y * zk;
                    let dz = (sigmoid(zk) - y) * inv;
                    grads[bi][0] += dz;
                    for (gw, xv) in grads[wi].iter_mut().zip(&x[k * f..(k + 1) * f]) {
                        *gw += dz * xv;
                    }
                }
            }
            ScorerKind::MessagePassing => {
                let tr = mpn_forward(w, g, w.meta.rounds)?;
                let mut dl = Vec::with_capacity(tr.logits.len());
                for (&zk, &y) in tr.logits.iter().zip(&lg.labels) {
                    loss += softplus(zk) - y * zk;
                    dl.push((sigmoid(zk) - y) * inv);
                }
                mpn_backward(w, g, &tr, &dl, grads);
            }
        }
    }
    Ok(loss * inv)
}

fn batch_loss(w: &ScorerWeights, batch: &[&LabeledGraph]) -> Result<f64> {
    let total: usize = batch.iter().map(|g| g.labels.len()).sum();
    if total == 0 {
        return Ok(0.0);
    }
    let mut loss = 0f64;
    for lg in batch {
        for (z, &y) in logits(w, &lg.graph)?.into_iter().zip(&lg.labels) {
            loss += softplus(z) - y * z;
        }
    }
    Ok(loss / total as f64)
}

/// Largest relative difference between the analytic gradient and central differences.
///
/// Checks every trainable coordinate when there are at most `max_coords`, otherwise a
/// seeded random subset of `max_coords`. Relative error is `|a - n| / max(|a|, |n|, 1e-5)`.
pub fn gradient_check(
    w: &ScorerWeights,
    batch: &[&LabeledGraph],
    epsilon: f64,
    max_coords: usize,
    seed: u64,
) -> Result<GradientCheck> {
    let mut grads = Vec::new();
    loss_and_grad(w, batch, &mut grads)?;
    let mut coords: Vec<(usize, usize)> = w
        .params
        .iter()
        .enumerate()
        .filter(|(_, p)| p.group != ParamGroup::Fixed)
        .flat_map(|(i, p)| (0..p.data.len()).map(move |j| (i, j)))
        .collect();
    if coords.len() > max_coords {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        coords.shuffle(&mut rng);
        coords.truncate(max_coords);
        coords.sort_unstable();
    }
    let mut probe = w.clone();
    let mut worst = 0f64;
    let mut worst_at = None;
    let mut max_abs_grad = 0f64;
    for &(i, j) in &coords {
        let orig = probe.params[i].data[j];
        probe.params[i].data[j] = orig + epsilon;
        let up = batch_loss(&probe, batch)?;
        probe.params[i].data[j] = orig - epsilon;
        let down = batch_loss(&probe, batch)?;
        probe.params[i].data[j] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let analytic = grads[i][j];
        max_abs_grad = max_abs_grad.max(analytic.abs());
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5);
        if rel > worst {
            worst = rel;
            worst_at = Some(format!("{}[{j}]", w.params[i].name));
        }
    }
    Ok(GradientCheck {
        max_relative_error: worst,
        worst_coordinate: worst_at,
        coordinates: coords.len(),
        max_abs_gradient: max_abs_grad,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub worst_coordinate: Option<String>,
    pub coordinates: usize,
    pub max_abs_gradient: f64,
}

// ---------------------------------------------------------------------------
// training

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub learning_rate: f64,
    /// Iterations per level while later levels are frozen.
    pub stage_iters: usize,
    /// Full-batch joint epochs after the staged phase.
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Per-level edge budget; whole graphs are sampled until it is reached.
    pub max_edges_per_level: usize,
    pub log_every: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            learning_rate: 1e-3,
            stage_iters: 500,
            epochs: 250,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            max_edges_per_level: 20_000,
            log_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogLine {
    pub iteration: usize,
    pub stage: String,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub weights: ScorerWeights,
    pub final_loss: f64,
    pub log: Vec<TrainLogLine>,
}

impl TrainReport {
    pub fn log_text(&self) -> String {
        let mut s = String::from("iteration\tstage\tloss\n");
        for l in &self.log {
            let _ = writeln!(s, "{}\t{}\t{:.6}", l.iteration, l.stage, l.loss);
        }
        s
    }
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: Vec<u64>,
}

impl Adam {
    fn new(w: &ScorerWeights) -> Self {
        Adam {
            m: w.params.iter().map(|p| vec![0.0; p.data.len()]).collect(),
            v: w.params.iter().map(|p| vec![0.0; p.data.len()]).collect(),
            t: vec![0; w.params.len()],
        }
    }

    fn step(&mut self, w: &mut ScorerWeights, grads: &[Vec<f64>], active: &[bool], hp: &TrainParams) {
        for (i, p) in w.params.iter_mut().enumerate() {
            if !active[i] {
                continue;
            }
            self.t[i] += 1;
            let t = self.t[i] as i32;
            let c1 = 1.0 - hp.beta1.powi(t);
            let c2 = 1.0 - hp.beta2.powi(t);
            for j in 0..p.data.len() {
                let g = grads[i][j];
                self.m[i][j] = hp.beta1 * self.m[i][j] + (1.0 - hp.beta1) * g;
                self.v[i][j] = hp.beta2 * self.v[i][j] + (1.0 - hp.beta2) * g * g;
                let mh = self.m[i][j] / c1;
                let vh = self.v[i][j] / c2;
                p.data[j] -= hp.learning_rate * mh / (vh.sqrt() + hp.adam_eps);
            }
        }
    }
}

/// Subsamples whole graphs per level until the edge budget is met.
pub fn sample_training_graphs(
    graphs: &[LabeledGraph],
    max_edges_per_level: usize,
    seed: u64,
) -> Vec<LabeledGraph> {
    let mut by_level: BTreeMap<u32, Vec<&LabeledGraph>> = BTreeMap::new();
    for g in graphs.iter().filter(|g| !g.labels.is_empty()) {
        by_level.entry(g.graph.level).or_default().push(g);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (_, mut gs) in by_level {
        let total: usize = gs.iter().map(|g| g.labels.len()).sum();
        if total > max_edges_per_level {
            gs.shuffle(&mut rng);
        }
        let mut used = 0;
        for g in gs {
            if used >= max_edges_per_level {
                break;
            }
            used += g.labels.len();
            out.push(g.clone());
        }
    }
    out
}

/// Staged Adam training: level `l` trains (with levels above frozen) for
/// `stage_iters` iterations on graphs of levels `<= l`, then all levels train jointly.
///
/// Input standardization is fitted on the training edges first.
pub fn train_scorer(
    graphs: &[LabeledGraph],
    init: ScorerWeights,
    hp: &TrainParams,
    seed: u64,
) -> Result<TrainReport> {
    let graphs = sample_training_graphs(graphs, hp.max_edges_per_level, seed);
    let total: usize = graphs.iter().map(|g| g.labels.len()).sum();
    if total == 0 {
        return Err(Error::Training("no labeled training edges".into()));
    }
    let mut w = init;
    w.fit_standardization(graphs.iter().map(|g| &g.graph));
    let levels = w.meta.levels;
    let mut adam = Adam::new(&w);
    let mut grads = Vec::new();
    let mut log = Vec::new();
    let mut iteration = 0usize;
    let mut final_loss = f64::NAN;

    let mut run = |w: &mut ScorerWeights,
                   max_level: u32,
                   iters: usize,
                   stage: String,
                   log: &mut Vec<TrainLogLine>|
     -> Result<()> {
        let batch: Vec<&LabeledGraph> =
            graphs.iter().filter(|g| g.graph.level <= max_level).collect();
        if batch.iter().all(|g| g.labels.is_empty()) {
            return Ok(());
        }
        let active: Vec<bool> = w
            .params
            .iter()
            .map(|p| match p.group {
                ParamGroup::Level(l) => l <= max_level,
                ParamGroup::Shared => true,
                ParamGroup::Fixed => false,
            })
            .collect();
        for it in 0..iters {
            let loss = loss_and_grad(w, &batch, &mut grads)?;
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "loss became {loss} at iteration {iteration} ({stage}, step {it})"
                )));
            }
            if it % hp.log_every.max(1) == 0 || it + 1 == iters {
                log.push(TrainLogLine {
                    iteration,
                    stage: stage.clone(),
                    loss,
                });
            }
            adam.step(w, &grads, &active, hp);
            iteration += 1;
        }
        Ok(())
    };

    for l in 1..=levels {
        run(&mut w, l, hp.stage_iters, format!("level{l}"), &mut log)?;
    }
    run(&mut w, levels, hp.epochs, "joint".into(), &mut log)?;

    let all: Vec<&LabeledGraph> = graphs.iter().collect();
    final_loss = final_loss.max(batch_loss(&w, &all)?);
    if !final_loss.is_finite() {
        return Err(Error::Training(format!("final loss is {final_loss}")));
    }
    info!("trained {} scorer on {total} edges, final loss {final_loss:.5}", w.meta.kind);
    Ok(TrainReport {
        weights: w,
        final_loss,
        log,
    })
}

/// Fraction of edges whose thresholded probability matches the label.
pub fn edge_accuracy(w: &ScorerWeights, graphs: &[LabeledGraph], threshold: f64) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for lg in graphs {
        for (p, &y) in score_graph(w, &lg.graph)?.into_iter().zip(&lg.labels) {
            correct += ((p >= threshold) == (y >= 0.5)) as usize;
            total += 1;
        }
    }
    Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
}

/// Random labeled graph for tests and gradient checks: forward edges between random nodes.
pub fn random_labeled_graph(
    rng: &mut impl Rng,
    level: u32,
    num_nodes: usize,
    num_edges: usize,
    feature_dim: usize,
) -> LabeledGraph {
    let mut edges = Vec::with_capacity(num_edges);
    for _ in 0..num_edges {
        let a = rng.random_range(0..num_nodes.saturating_sub(1).max(1));
        let b = rng.random_range(a + 1..num_nodes.max(a + 2));
        edges.push((a as u32, b.min(num_nodes - 1) as u32));
    }
    let n = Normal::new(0.0, 1.0).unwrap();
    let features = (0..num_edges * feature_dim).map(|_| n.sample(rng)).collect();
    let labels = (0..num_edges).map(|_| rng.random_bool(0.4) as u8 as f64).collect();
    LabeledGraph {
        graph: GraphInput {
            level,
            num_nodes,
            edges,
            features,
        },
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpatialMode;

    fn layout() -> EdgeLayout {
        EdgeLayout {
            spatial_mode: SpatialMode::Field,
            iou: false,
        }
    }

    fn graph(features: Vec<Vec<f64>>) -> GraphInput {
        let n = features.len();
        GraphInput {
            level: 1,
            num_nodes: n + 1,
            edges: (0..n as u32).map(|i| (i, i + 1)).collect(),
            features: features.into_iter().flatten().collect(),
        }
    }

    #[test]
    fn zero_logistic_weights_score_half() {
        let w = ScorerWeights::init(ScorerKind::Logistic, 3, &layout(), 16, 8, 0);
        let s = score_graph(&w, &graph(vec![vec![0.3, 1.0, 1.0, 0.2, 7.0, 0.1]; 4])).unwrap();
        assert!(s.iter().all(|&p| p == 0.5));
    }

    #[test]
    fn hand_set_logistic() {
        let mut w = ScorerWeights::init(ScorerKind::Logistic, 1, &layout(), 16, 8, 0);
        w.get_mut("level1.weight").data = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let s = score_graph(&w, &graph(vec![vec![1.0, 0.5, 1.0, 0.2, 3.0, 0.1]])).unwrap();
        assert!((s[0] - 0.7310585786300049).abs() < 1e-12);
    }

    #[test]
    fn zero_rounds_is_head_on_encoding() {
        let mut w = ScorerWeights::init(ScorerKind::MessagePassing, 1, &layout(), 4, 0, 5);
        w.meta.rounds = 0;
        let g = graph(vec![vec![0.1, -0.4, 1.0, 0.3, 2.0, 0.5], vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.2]]);
        let s = score_graph(&w, &g).unwrap();
        let (ew, eb) = (&w.get("level1.enc_weight").data, &w.get("level1.enc_bias").data);
        let (hw, hb) = (&w.get("head.weight").data, w.get("head.bias").data[0]);
        for (k, row) in g.features.chunks(6).enumerate() {
            let mut z = hb;
            for j in 0..4 {
                let pre: f64 = eb[j] + (0..6).map(|c| ew[j * 6 + c] * row[c]).sum::<f64>();
                z += hw[j] * pre.max(0.0);
            }
            assert!((s[k] - 1.0 / (1.0 + (-z).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn layout_and_level_mismatch_rejected() {
        let w = ScorerWeights::init(ScorerKind::Logistic, 2, &layout(), 16, 8, 0);
        let mut g = graph(vec![vec![0.0; 7]]);
        assert!(score_graph(&w, &g).is_err());
        g = graph(vec![vec![0.0; 6]]);
        g.level = 3;
        assert!(score_graph(&w, &g).is_err());
    }

    #[test]
    fn empty_batch_has_zero_gradient() {
        for kind in [ScorerKind::Logistic, ScorerKind::MessagePassing] {
            let w = ScorerWeights::init(kind, 2, &layout(), 4, 2, 1);
            let mut grads = Vec::new();
            assert_eq!(loss_and_grad(&w, &[], &mut grads).unwrap(), 0.0);
            assert!(grads.iter().flatten().all(|&g| g == 0.0));
            let gc = gradient_check(&w, &[], 1e-5, 1000, 0).unwrap();
            assert_eq!(gc.max_relative_error, 0.0);
        }
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut w = ScorerWeights::init(ScorerKind::Logistic, 2, &layout(), 16, 8, 0);
        for p in w.params.iter_mut().filter(|p| p.group != ParamGroup::Fixed) {
            for v in &mut p.data {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        let gs: Vec<LabeledGraph> = (0..4)
            .map(|i| random_labeled_graph(&mut rng, 1 + i % 2, 6, 9, 6))
            .collect();
        let batch: Vec<&LabeledGraph> = gs.iter().collect();
        let gc = gradient_check(&w, &batch, 1e-6, 1000, 0).unwrap();
        assert!(gc.max_relative_error < 1e-4, "{gc:?}");
    }

    #[test]
    fn mpn_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = ScorerWeights::init(ScorerKind::MessagePassing, 2, &layout(), 5, 2, 9);
        let gs: Vec<LabeledGraph> = (0..2)
            .map(|i| random_labeled_graph(&mut rng, 1 + i, 5, 7, 6))
            .collect();
        let batch: Vec<&LabeledGraph> = gs.iter().collect();
        let gc = gradient_check(&w, &batch, 1e-6, 400, 1).unwrap();
        assert!(gc.coordinates >= 200);
        assert!(gc.max_abs_gradient > 0.0);
        assert!(gc.max_relative_error < 1e-4, "{gc:?}");
    }

    #[test]
    fn single_edge_loss_decreases() {
        let w = ScorerWeights::init(ScorerKind::Logistic, 1, &layout(), 16, 8, 0);
        let lg = LabeledGraph {
            graph: graph(vec![vec![0.9, 1.0, 1.0, 1.0, 1.0, 0.1]]),
            labels: vec![1.0],
        };
        let hp = TrainParams {
            learning_rate: 0.05,
            stage_iters: 200,
            epochs: 200,
            log_every: 1,
            ..Default::default()
        };
        let r = train_scorer(std::slice::from_ref(&lg), w, &hp, 0).unwrap();
        let losses: Vec<f64> = r.log.iter().map(|l| l.loss).collect();
        assert!(losses.windows(2).skip(5).all(|p| p[1] <= p[0] + 1e-12));
        assert!(r.final_loss < 1e-2, "{}", r.final_loss);
    }

    #[test]
    fn training_without_edges_fails() {
        let w = ScorerWeights::init(ScorerKind::Logistic, 1, &layout(), 16, 8, 0);
        assert!(train_scorer(&[], w, &TrainParams::default(), 0).is_err());
    }

    #[test]
    fn weights_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        for kind in [ScorerKind::Logistic, ScorerKind::MessagePassing] {
            let w = ScorerWeights::init(kind, 3, &layout(), 4, 2, 17);
            save_weights(&path, &w).unwrap();
            let back = load_weights(&path).unwrap();
            assert_eq!(back, w);
            for (a, b) in back.params.iter().zip(&w.params) {
                assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
        let w = ScorerWeights::init(ScorerKind::Logistic, 1, &layout(), 4, 2, 0);
        let json = weights_to_json(&w).replace("edge-v1:field", "edge-v0:field");
        assert!(weights_from_json(&json).unwrap_err().to_string().contains("layout"));
        let json = weights_to_json(&w).replace("\"level1.bias\"", "\"renamed\"");
        let e = weights_from_json(&json).unwrap_err().to_string();
        assert!(e.contains("level1.bias"), "{e}");
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = ScorerWeights::init(ScorerKind::MessagePassing, 1, &layout(), 6, 3, 2);
        let lg = random_labeled_graph(&mut rng, 1, 6, 10, 6);
        let base = score_graph(&w, &lg.graph).unwrap();
        // relabel nodes with a permutation and reverse the edge order
        let perm = [3u32, 5, 0, 1, 4, 2];
        let mut g2 = lg.graph.clone();
        g2.edges = lg.graph.edges.iter().rev().map(|&(a, b)| (perm[a as usize], perm[b as usize])).collect();
        g2.features = lg.graph.features.chunks(6).rev().flatten().copied().collect();
        let s2 = score_graph(&w, &g2).unwrap();
        let rev: Vec<f64> = base.iter().rev().copied().collect();
        for (a, b) in s2.iter().zip(&rev) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
