//! Object memory and the object transformer.
//!
//! Each object keeps two running-mean summary vectors (foreground and
//! background). The transformer refines a pixel readout through `L` blocks,
//! each running, in order: masked cross-attention from the object queries
//! to the pixels, self-attention among the queries, the query FFN,
//! cross-attention from the pixels back to the queries and the object
//! summaries, and the pixel FFN. Every sublayer is residual.

use crate::backbone::FeatureMap;
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::tensor::{self, Tensor};
use crate::weights::WeightSet;

/// A pixel readout at some depth of the transformer stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub level: usize,
    pub data: FeatureMap,
}

impl Readout {
    pub fn initial(data: FeatureMap) -> Self {
        Readout { level: 0, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectState {
    pub foreground: Vec<f32>,
    pub background: Vec<f32>,
    /// Frames summarised.
    pub count: usize,
    foreground_frames: usize,
    background_frames: usize,
    /// Learned object queries, `N × C`.
    pub queries: Tensor,
}

/// What [`update_object_memory`] did with a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UpdateStatus {
    /// The mask had no foreground weight, so the foreground summary was
    /// left as it was.
    pub foreground_skipped: bool,
    pub background_skipped: bool,
}

impl ObjectState {
    pub fn new(queries: Tensor) -> Result<Self> {
        let (_, c) = queries.dims2()?;
        Ok(ObjectState {
            foreground: vec![0.0; c],
            background: vec![0.0; c],
            count: 0,
            foreground_frames: 0,
            background_frames: 0,
            queries,
        })
    }

    pub fn channels(&self) -> usize {
        self.foreground.len()
    }

    /// Fresh state seeded with the first annotated frame.
    pub fn initialize(queries: Tensor, features: &FeatureMap, mask_prob: &Tensor) -> Result<Self> {
        let mut s = ObjectState::new(queries)?;
        update_object_memory(&mut s, features, mask_prob)?;
        Ok(s)
    }
}

fn weighted_mean(features: &FeatureMap, weights: &[f32]) -> Option<Vec<f32>> {
    let total: f64 = weights.iter().map(|&w| f64::from(w)).sum();
    if total <= 0.0 {
        return None;
    }
    let t = features.tensor();
    Some(
        (0..features.channels())
            .map(|c| {
                let s: f64 = t
                    .plane(c)
                    .iter()
                    .zip(weights)
                    .map(|(&f, &w)| f64::from(f) * f64::from(w))
                    .sum();
                (s / total) as f32
            })
            .collect(),
    )
}

fn fold_into(summary: &mut [f32], frames: &mut usize, sample: &[f32]) {
    *frames += 1;
    let n = *frames as f32;
    for (s, x) in summary.iter_mut().zip(sample) {
        *s += (x - *s) / n;
    }
}

pub fn update_object_memory(
    state: &mut ObjectState,
    features: &FeatureMap,
    mask_prob: &Tensor,
) -> Result<UpdateStatus> {
    let (mc, mh, mw) = mask_prob.dims3()?;
    if mc != 1 || (mh, mw) != features.extents() {
        return Err(Error::Dimension(format!(
            "mask {:?} does not match features {:?}",
            mask_prob.shape(),
            features.tensor().shape()
        )));
    }
    if features.channels() != state.channels() {
        return Err(Error::Dimension(format!(
            "{} feature channels, object memory holds {}",
            features.channels(),
            state.channels()
        )));
    }
    if mask_prob.data().iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::Parameter("mask probabilities must lie in [0, 1]".into()));
    }
    let fg_w = mask_prob.data();
    let bg_w: Vec<f32> = fg_w.iter().map(|p| 1.0 - p).collect();
    let mut status = UpdateStatus::default();
    match weighted_mean(features, fg_w) {
        Some(m) => fold_into(&mut state.foreground, &mut state.foreground_frames, &m),
        None => status.foreground_skipped = true,
    }
    match weighted_mean(features, &bg_w) {
        Some(m) => fold_into(&mut state.background, &mut state.background_frames, &m),
        None => status.background_skipped = true,
    }
    state.count += 1;
    Ok(status)
}

/// Scaled dot-product attention with output projection. `allowed`, when
/// given, is a row-major `nq × nk` mask; disallowed pairs get `-inf`.
/// Returns the projected output and the per-head weight matrices.
pub(crate) fn attention(
    queries: &Tensor,
    items: &Tensor,
    proj: [&Tensor; 4],
    heads: usize,
    allowed: Option<&[bool]>,
) -> Result<(Tensor, Vec<Tensor>)> {
    let [wq, wk, wv, wo] = proj;
    let q = tensor::matmul(queries, wq)?;
    let k = tensor::matmul(items, wk)?;
    let v = tensor::matmul(items, wv)?;
    let (nq, c) = q.dims2()?;
    let (nk, _) = k.dims2()?;
    if heads == 0 || c % heads != 0 {
        return Err(Error::Parameter(format!("{c} channels cannot split into {heads} heads")));
    }
    if nk == 0 {
        return Err(Error::Parameter("attention over an empty item set".into()));
    }
    let d = c / heads;
    let scale = 1.0 / (d as f32).sqrt();
    let mut mixed = vec![0.0f32; nq * c];
    let mut all_weights = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = h * d..(h + 1) * d;
        let mut w = vec![0.0f32; nq * nk];
        for i in 0..nq {
            let qi = &q.row(i)[cols.clone()];
            let row = &mut w[i * nk..(i + 1) * nk];
            for (j, a) in row.iter_mut().enumerate() {
                let ok = allowed.map_or(true, |m| m[i * nk + j]);
                *a = if ok {
                    qi.iter().zip(&k.row(j)[cols.clone()]).map(|(x, y)| x * y).sum::<f32>() * scale
                } else {
                    f32::NEG_INFINITY
                };
            }
            tensor::softmax_in_place(row);
            let out = &mut mixed[i * c + h * d..i * c + (h + 1) * d];
            for (j, &a) in row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, vv) in out.iter_mut().zip(&v.row(j)[cols.clone()]) {
                    *o += a * vv;
                }
            }
        }
        all_weights.push(Tensor::new(vec![nq, nk], w)?);
    }
    let out = tensor::matmul(&Tensor::new(vec![nq, c], mixed)?, wo)?;
    Ok((out, all_weights))
}

/// Row-major `N × HW` permission mask for masked cross-attention.
///
/// The first `foreground_queries` rows may only see pixels with
/// probability ≥ 0.5, the rest only pixels below 0.5. A side whose region is
/// empty sees everything.
pub fn query_region_mask(mask_prob: &Tensor, queries: usize, foreground_queries: usize) -> Vec<bool> {
    let fg: Vec<bool> = mask_prob.data().iter().map(|&p| p >= 0.5).collect();
    let any_fg = fg.iter().any(|&b| b);
    let any_bg = fg.iter().any(|&b| !b);
    let hw = fg.len();
    let mut allowed = Vec::with_capacity(queries * hw);
    for i in 0..queries {
        let want_fg = i < foreground_queries;
        let unrestricted = if want_fg { !any_fg } else { !any_bg };
        allowed.extend(fg.iter().map(|&f| unrestricted || f == want_fg));
    }
    allowed
}

fn proj<'a>(weights: &'a WeightSet, block: usize, attn: &str) -> Result<[&'a Tensor; 4]> {
    Ok([
        weights.get(&format!("block{block}.{attn}.q"))?,
        weights.get(&format!("block{block}.{attn}.k"))?,
        weights.get(&format!("block{block}.{attn}.v"))?,
        weights.get(&format!("block{block}.{attn}.o"))?,
    ])
}

/// Attention weights recorded during a forward pass, per block:
/// masked cross-attention, query self-attention, pixel cross-attention.
#[derive(Debug, Clone, Default)]
pub struct AttentionTrace {
    pub blocks: Vec<[Vec<Tensor>; 3]>,
}

pub fn object_transformer_forward(
    r0: &Readout,
    state: &ObjectState,
    mask_prob: &Tensor,
    weights: &WeightSet,
    config: &EngineConfig,
) -> Result<Readout> {
    forward_impl(r0, state, mask_prob, weights, config, None)
}

/// Like [`object_transformer_forward`], also returning every attention
/// weight matrix.
pub fn object_transformer_traced(
    r0: &Readout,
    state: &ObjectState,
    mask_prob: &Tensor,
    weights: &WeightSet,
    config: &EngineConfig,
) -> Result<(Readout, AttentionTrace)> {
    let mut trace = AttentionTrace::default();
    let out = forward_impl(r0, state, mask_prob, weights, config, Some(&mut trace))?;
    Ok((out, trace))
}

fn forward_impl(
    r0: &Readout,
    state: &ObjectState,
    mask_prob: &Tensor,
    weights: &WeightSet,
    config: &EngineConfig,
    mut trace: Option<&mut AttentionTrace>,
) -> Result<Readout> {
    if r0.level != 0 {
        return Err(Error::Contract(format!(
            "object transformer expects a level-0 readout, got level {}",
            r0.level
        )));
    }
    let (c, h, w) = r0.data.tensor().dims3()?;
    if c != config.channels || state.channels() != c {
        return Err(Error::Dimension(format!(
            "readout has {c} channels, model width is {}",
            config.channels
        )));
    }
    if mask_prob.shape() != [1, h, w] {
        return Err(Error::Dimension(format!(
            "mask {:?} does not match readout {h}×{w}",
            mask_prob.shape()
        )));
    }
    if config.blocks == 0 {
        return Ok(r0.clone());
    }
    let allowed = query_region_mask(mask_prob, config.queries, config.foreground_queries);
    let summaries = Tensor::new(
        vec![2, c],
        state.foreground.iter().chain(&state.background).copied().collect(),
    )?;
    let mut x = state.queries.clone();
    let mut pixels = r0.data.tensor().pixels_as_rows()?;
    for b in 0..config.blocks {
        // (a) queries read their region of the pixel map
        let (upd, wa) = attention(&x, &pixels, proj(weights, b, "mask_attn")?, config.heads, Some(&allowed))?;
        x.add_assign(&upd)?;
        // (b) queries exchange information
        let (upd, wb) = attention(&x, &x, proj(weights, b, "self_attn")?, config.heads, None)?;
        x.add_assign(&upd)?;
        // (c) query FFN
        let fc1 = weights.get(&format!("block{b}.query_ffn.fc1.weight"))?;
        let b1 = weights.get(&format!("block{b}.query_ffn.fc1.bias"))?;
        let fc2 = weights.get(&format!("block{b}.query_ffn.fc2.weight"))?;
        let b2 = weights.get(&format!("block{b}.query_ffn.fc2.bias"))?;
        let mut hidden = tensor::matmul(&x, fc1)?;
        add_row_bias(&mut hidden, b1)?;
        tensor::relu_in_place(&mut hidden);
        let mut upd = tensor::matmul(&hidden, fc2)?;
        add_row_bias(&mut upd, b2)?;
        x.add_assign(&upd)?;
        // (d) pixels read the queries and the object summaries
        let mut items = x.data().to_vec();
        items.extend_from_slice(summaries.data());
        let items = Tensor::new(vec![config.queries + 2, c], items)?;
        let (upd, wd) = attention(&pixels, &items, proj(weights, b, "pixel_attn")?, config.heads, None)?;
        pixels.add_assign(&upd)?;
        // (e) pixel FFN
        let map = pixels.rows_as_pixels(h, w)?;
        let mut hid = tensor::conv3x3(
            &map,
            weights.get(&format!("block{b}.pixel_ffn.conv1.weight"))?,
            weights.get(&format!("block{b}.pixel_ffn.conv1.bias"))?,
        )?;
        tensor::relu_in_place(&mut hid);
        let upd = tensor::conv3x3(
            &hid,
            weights.get(&format!("block{b}.pixel_ffn.conv2.weight"))?,
            weights.get(&format!("block{b}.pixel_ffn.conv2.bias"))?,
        )?;
        let mut map = map;
        map.add_assign(&upd)?;
        pixels = map.pixels_as_rows()?;
        if let Some(t) = trace.as_deref_mut() {
            t.blocks.push([wa, wb, wd]);
        }
    }
    Ok(Readout {
        level: config.blocks,
        data: FeatureMap::new(pixels.rows_as_pixels(h, w)?)?,
    })
}

fn add_row_bias(x: &mut Tensor, bias: &Tensor) -> Result<()> {
    let (_, n) = x.dims2()?;
    if bias.len() != n {
        return Err(Error::Dimension(format!("bias of {} for {n} columns", bias.len())));
    }
    for row in x.data_mut().chunks_mut(n) {
        for (v, b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
    Ok(())
}
