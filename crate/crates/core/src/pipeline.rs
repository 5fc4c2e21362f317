//! End-to-end propagation of a first-frame annotation through a sequence.

use rayon::prelude::*;

use crate::backbone::{self, STRIDE};
use crate::config::{Augmentation, EngineConfig};
use crate::error::{Error, Result};
use crate::mask::{self, MaskSet};
use crate::memory::{init_bank, MemoryPolicy, PixelMemoryBank};
use crate::object::{self, ObjectState};
use crate::tensor::{self, Tensor};
use crate::weights::WeightSet;

/// A video with its first-frame annotation and, optionally, ground truth
/// for every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    pub name: String,
    /// `3 × h × w` frames with values in `[0, 1]`.
    pub frames: Vec<Tensor>,
    pub first_annotation: MaskSet,
    pub gt: Option<Vec<MaskSet>>,
}

impl SequenceRecord {
    pub fn validate(&self) -> Result<()> {
        if self.frames.len() < 2 {
            return Err(Error::Dataset(format!(
                "sequence {:?} has {} frames, need at least 2",
                self.name,
                self.frames.len()
            )));
        }
        let (_, h, w) = self.frames[0].dims3()?;
        for (i, f) in self.frames.iter().enumerate() {
            if f.shape() != [3, h, w] {
                return Err(Error::Dataset(format!(
                    "frame {i} of {:?} has shape {:?}, expected [3, {h}, {w}]",
                    self.name,
                    f.shape()
                )));
            }
        }
        if self.first_annotation.extents() != (h, w) {
            return Err(Error::Dataset(format!(
                "annotation {:?} does not match frame extents {h}×{w}",
                self.first_annotation.extents()
            )));
        }
        if let Some(gt) = &self.gt {
            if gt.len() != self.frames.len() || gt.iter().any(|m| m.extents() != (h, w)) {
                return Err(Error::Dataset(format!(
                    "ground truth of {:?} does not match its frames",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn extents(&self) -> (usize, usize) {
        self.first_annotation.extents()
    }
}

/// How a frame is mapped into the working resolution and back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub original: (usize, usize),
    pub scaled: (usize, usize),
    pub padded: (usize, usize),
}

fn round_up(v: usize, m: usize) -> usize {
    v.div_ceil(m) * m
}

impl Geometry {
    /// Short side to `short_side` (native when `None`) times `factor`,
    /// aspect preserved, then padded up to multiples of the feature stride.
    pub fn new(h: usize, w: usize, short_side: Option<usize>, factor: f64) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::Input(format!("degenerate {h}×{w} image")));
        }
        let short = h.min(w);
        let target = ((short_side.unwrap_or(short) as f64 * factor).round() as usize).max(1);
        let scale = target as f64 / short as f64;
        let other = |len: usize| ((len as f64 * scale).round() as usize).max(1);
        let scaled = if h <= w { (target, other(w)) } else { (other(h), target) };
        Ok(Geometry {
            original: (h, w),
            scaled,
            padded: (round_up(scaled.0, STRIDE), round_up(scaled.1, STRIDE)),
        })
    }

    pub fn forward_frame(&self, frame: &Tensor) -> Result<Tensor> {
        let scaled = tensor::resize_bilinear(frame, self.scaled.0, self.scaled.1)?;
        tensor::pad_edge(&scaled, self.padded.0, self.padded.1)
    }

    pub fn forward_mask(&self, m: &MaskSet) -> Result<MaskSet> {
        mask::resize_nearest(m, self.scaled.0, self.scaled.1)?.pad_edge(self.padded.0, self.padded.1)
    }

    /// Crop the padding and resample to the original extents (nearest).
    pub fn inverse_map(&self, t: &Tensor) -> Result<Tensor> {
        let cropped = tensor::crop(t, self.scaled.0, self.scaled.1)?;
        tensor::resize_nearest_tensor(&cropped, self.original.0, self.original.1)
    }

    pub fn inverse_mask(&self, m: &MaskSet) -> Result<MaskSet> {
        let (ph, pw) = self.padded;
        let (sh, sw) = self.scaled;
        if m.extents() != (ph, pw) {
            return Err(Error::Dimension(format!(
                "mask {:?} is not at working extents {ph}×{pw}",
                m.extents()
            )));
        }
        let mut labels = Vec::with_capacity(sh * sw);
        for y in 0..sh {
            labels.extend_from_slice(&m.labels()[y * pw..y * pw + sw]);
        }
        mask::resize_nearest(&MaskSet::new(sh, sw, labels)?, self.original.0, self.original.1)
    }
}

/// Scale to the configured short side and pad to multiples of 16.
pub fn preprocess(frame: &Tensor, config: &EngineConfig) -> Result<(Tensor, Geometry)> {
    let (_, h, w) = frame.dims3()?;
    let g = Geometry::new(h, w, config.target_short_side, 1.0)?;
    Ok((g.forward_frame(frame)?, g))
}

/// Per-frame object probabilities from one propagation pass, at the
/// original resolution.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub object_ids: Vec<u8>,
    /// `(K+1) × h × w` for frames `1..`; channel 0 is background.
    pub probs: Vec<Tensor>,
}

impl Propagation {
    /// Label maps for every frame; frame 0 is the annotation itself.
    pub fn labels(&self, annotation: &MaskSet) -> Result<Vec<MaskSet>> {
        let mut out = Vec::with_capacity(self.probs.len() + 1);
        out.push(annotation.clone());
        for p in &self.probs {
            out.push(relabel(&backbone::argmax_channels(p)?, &self.object_ids));
        }
        Ok(out)
    }
}

/// Maps object indices `1..=K` back to their IDs.
fn relabel(indices: &MaskSet, ids: &[u8]) -> MaskSet {
    let mut m = indices.clone();
    for l in m.labels_mut() {
        if *l != 0 {
            *l = ids[*l as usize - 1];
        }
    }
    m
}

fn pool_to_stride(m: &Tensor) -> Result<Tensor> {
    tensor::avg_pool(m, STRIDE)
}

fn object_channel(probs: &Tensor, o: usize) -> Result<Tensor> {
    let (_, h, w) = probs.dims3()?;
    Tensor::new(vec![1, h, w], probs.plane(o + 1).to_vec())
}

/// The propagation loop at working resolution: returns `(K+1) × H × W`
/// probabilities for frames `1..` through `emit`, plus the final bank.
fn propagate_working(
    frames: &[Tensor],
    annotation: &MaskSet,
    ids: &[u8],
    config: &EngineConfig,
    weights: &WeightSet,
    mut emit: impl FnMut(usize, Tensor) -> Result<()>,
) -> Result<PixelMemoryBank> {
    let queries = weights.get("object.queries")?.clone();
    let masks0: Vec<Tensor> = ids.iter().map(|&id| annotation.object_indicator(id)).collect();
    let enc0 = backbone::encode_query(&frames[0], weights)?;
    let values0 = masks0
        .iter()
        .map(|m| backbone::encode_value(&frames[0], m, weights))
        .collect::<Result<Vec<_>>>()?;
    let mut states = masks0
        .iter()
        .zip(&values0)
        .map(|(m, v)| ObjectState::initialize(queries.clone(), v, &pool_to_stride(m)?))
        .collect::<Result<Vec<_>>>()?;
    let mut bank = init_bank(enc0.key, values0, MemoryPolicy::from_config(config))?;
    let mut prev = masks0;

    for (t, frame) in frames.iter().enumerate().skip(1) {
        let mut step = || -> Result<Tensor> {
            let enc = backbone::encode_query(frame, weights)?;
            let readouts = bank.read_all(&enc.key)?;
            let mut logits = Vec::with_capacity(ids.len());
            for (o, r0) in readouts.iter().enumerate() {
                let region = pool_to_stride(&prev[o])?;
                let enriched = object::object_transformer_forward(r0, &states[o], &region, weights, config)?;
                logits.push(backbone::decode(&enriched.data, &enc.skips, weights)?);
            }
            let agg = backbone::aggregate_objects(&logits)?;
            prev = (0..ids.len())
                .map(|o| object_channel(&agg.probs, o))
                .collect::<Result<Vec<_>>>()?;
            if t % config.mem_interval == 0 {
                let values = prev
                    .iter()
                    .map(|m| backbone::encode_value(frame, m, weights))
                    .collect::<Result<Vec<_>>>()?;
                for ((state, v), m) in states.iter_mut().zip(&values).zip(&prev) {
                    object::update_object_memory(state, v, &pool_to_stride(m)?)?;
                }
                if bank.would_add(t) {
                    bank.maybe_add(t, enc.key, values)?;
                }
            }
            Ok(agg.probs)
        };
        let probs = step().map_err(|e| Error::Frame {
            frame: t,
            source: Box::new(e),
        })?;
        emit(t, probs)?;
    }
    Ok(bank)
}

/// Runs one augmentation branch and maps its probabilities back to the
/// original geometry.
pub fn propagate_branch(
    seq: &SequenceRecord,
    config: &EngineConfig,
    weights: &WeightSet,
    aug: Augmentation,
) -> Result<Propagation> {
    seq.validate()?;
    config.validate()?;
    let ids = seq.first_annotation.object_ids();
    if ids.is_empty() {
        return Err(Error::Input(format!(
            "first annotation of {:?} contains no objects",
            seq.name
        )));
    }
    let (h, w) = seq.extents();
    let g = Geometry::new(h, w, config.target_short_side, aug.scale())?;
    let flip = aug.flips();
    let frames = seq
        .frames
        .iter()
        .map(|f| {
            let f = if flip { tensor::flip_horizontal(f)? } else { f.clone() };
            g.forward_frame(&f)
        })
        .collect::<Result<Vec<_>>>()?;
    let ann = if flip {
        seq.first_annotation.flip_horizontal()
    } else {
        seq.first_annotation.clone()
    };
    let ann = g.forward_mask(&ann)?;
    let mut probs = Vec::with_capacity(frames.len() - 1);
    propagate_working(&frames, &ann, &ids, config, weights, |_, p| {
        let back = g.inverse_map(&p)?;
        probs.push(if flip { tensor::flip_horizontal(&back)? } else { back });
        Ok(())
    })?;
    Ok(Propagation { object_ids: ids, probs })
}

/// Propagates the first-frame annotation and returns a label map per frame.
pub fn propagate(seq: &SequenceRecord, config: &EngineConfig) -> Result<Vec<MaskSet>> {
    let weights = WeightSet::for_config(config)?;
    propagate_with(seq, config, &weights)
}

pub fn propagate_with(seq: &SequenceRecord, config: &EngineConfig, weights: &WeightSet) -> Result<Vec<MaskSet>> {
    propagate_branch(seq, config, weights, Augmentation::Identity)?.labels(&seq.first_annotation)
}

/// Final memory-bank state after propagating `seq`, for inspection.
pub fn propagate_bank(seq: &SequenceRecord, config: &EngineConfig, weights: &WeightSet) -> Result<PixelMemoryBank> {
    seq.validate()?;
    let ids = seq.first_annotation.object_ids();
    let (h, w) = seq.extents();
    let g = Geometry::new(h, w, config.target_short_side, 1.0)?;
    let frames = seq.frames.iter().map(|f| g.forward_frame(f)).collect::<Result<Vec<_>>>()?;
    let ann = g.forward_mask(&seq.first_annotation)?;
    propagate_working(&frames, &ann, &ids, config, weights, |_, _| Ok(()))
}

/// Test-time augmentation: one independent propagation per branch, mean
/// of the back-mapped probabilities, then argmax. Branches are reduced in
/// sorted-name order so the result does not depend on scheduling.
pub fn run_tta(seq: &SequenceRecord, config: &EngineConfig) -> Result<Vec<MaskSet>> {
    let weights = WeightSet::for_config(config)?;
    run_tta_with(seq, config, &weights)
}

pub fn run_tta_with(seq: &SequenceRecord, config: &EngineConfig, weights: &WeightSet) -> Result<Vec<MaskSet>> {
    if config.tta.is_empty() {
        return Err(Error::Config("test-time augmentation needs at least one branch".into()));
    }
    let mut branches = config.tta.clone();
    branches.sort_by_key(|a| a.name());
    let outputs = branches
        .par_iter()
        .map(|&a| propagate_branch(seq, config, weights, a))
        .collect::<Result<Vec<_>>>()?;
    let mut iter = outputs.into_iter();
    let mut acc = iter.next().expect("at least one branch");
    for other in iter {
        for (a, b) in acc.probs.iter_mut().zip(&other.probs) {
            a.add_assign(b)?;
        }
    }
    let n = branches.len() as f32;
    if branches.len() > 1 {
        for p in &mut acc.probs {
            p.scale(1.0 / n);
        }
    }
    acc.labels(&seq.first_annotation)
}

/// [`run_tta`] when augmentations are configured, [`propagate`] otherwise.
pub fn segment(seq: &SequenceRecord, config: &EngineConfig, weights: &WeightSet) -> Result<Vec<MaskSet>> {
    if config.tta.is_empty() {
        propagate_with(seq, config, weights)
    } else {
        run_tta_with(seq, config, weights)
    }
}
