//! Synthetic sequences with exact ground truth: solid-coloured rectangles
//! moving over a noisy gradient background.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mask::MaskSet;
use crate::pipeline::SequenceRecord;
use crate::tensor::Tensor;

const PALETTE: [[f32; 3]; 6] = [
    [0.90, 0.20, 0.20],
    [0.20, 0.30, 0.90],
    [0.92, 0.85, 0.20],
    [0.85, 0.20, 0.80],
    [0.20, 0.85, 0.85],
    [0.95, 0.55, 0.10],
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthObject {
    pub id: u8,
    /// `(height, width)` in pixels.
    pub size: (usize, usize),
    /// Top-left corner at frame 0, `(y, x)`.
    pub start: (i64, i64),
    /// Pixels moved per frame, `(dy, dx)`.
    pub velocity: (i64, i64),
    /// Frames in which the object is not drawn.
    pub hidden: Option<Range<usize>>,
}

impl SynthObject {
    pub fn top_left(&self, t: usize) -> (i64, i64) {
        (
            self.start.0 + self.velocity.0 * t as i64,
            self.start.1 + self.velocity.1 * t as i64,
        )
    }

    fn visible(&self, t: usize) -> bool {
        self.hidden.as_ref().is_none_or(|r| !r.contains(&t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// One rectangle translating horizontally.
    Translate,
    /// A large rectangle sweeping over a smaller one moving the other way.
    Crossing,
    /// One rectangle that vanishes for a stretch of frames, then returns.
    Disappear,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Translate => "translate",
            Scenario::Crossing => "crossing",
            Scenario::Disappear => "disappear",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "translate" => Ok(Scenario::Translate),
            "crossing" => Ok(Scenario::Crossing),
            "disappear" => Ok(Scenario::Disappear),
            other => Err(Error::Config(format!("unknown synthetic scenario {other:?}"))),
        }
    }
}

/// Shape, motion and appearance of a synthetic sequence. Objects later in
/// the list are drawn on top.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub name: String,
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub objects: Vec<SynthObject>,
    /// Amplitude of per-pixel uniform noise.
    pub noise: f32,
}

impl SynthSpec {
    /// Preset layouts scaled to a square `size × size` frame.
    pub fn scenario(kind: Scenario, size: usize, frames: usize, step: i64) -> SynthSpec {
        let s = size as i64;
        let objects = match kind {
            Scenario::Translate => {
                let side = (size * 5 / 16).max(1);
                vec![SynthObject {
                    id: 1,
                    size: (side, side),
                    start: ((s - side as i64) / 2, s / 8),
                    velocity: (0, step),
                    hidden: None,
                }]
            }
            Scenario::Crossing => {
                let big = (size * 5 / 16).max(2);
                let small = (size * 7 / 32).max(1);
                let y = s * 11 / 32;
                vec![
                    SynthObject {
                        id: 2,
                        size: (small, small),
                        start: (y + (big - small) as i64 / 2, s - s / 32 - small as i64),
                        velocity: (0, -step),
                        hidden: None,
                    },
                    SynthObject {
                        id: 1,
                        size: (big, big),
                        start: (y, s / 32),
                        velocity: (0, step),
                        hidden: None,
                    },
                ]
            }
            Scenario::Disappear => {
                let side = (size * 5 / 16).max(1);
                vec![SynthObject {
                    id: 1,
                    size: (side, side),
                    start: ((s - side as i64) / 2, s / 8),
                    velocity: (0, step),
                    hidden: Some(frames / 3..frames / 2),
                }]
            }
        };
        SynthSpec {
            name: kind.name().to_string(),
            height: size,
            width: size,
            frames,
            objects,
            noise: 0.06,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height < 32 || self.width < 32 {
            return Err(Error::Parameter(format!(
                "synthetic frames must be at least 32×32, got {}×{}",
                self.height, self.width
            )));
        }
        if self.frames < 2 {
            return Err(Error::Parameter("synthetic sequences need at least 2 frames".into()));
        }
        if self.objects.is_empty() || self.objects.iter().any(|o| o.id == 0) {
            return Err(Error::Parameter("synthetic objects need non-zero IDs".into()));
        }
        for (i, a) in self.objects.iter().enumerate() {
            for b in &self.objects[i + 1..] {
                if a.id == b.id {
                    return Err(Error::Parameter(format!("duplicate object ID {}", a.id)));
                }
                if a.visible(0) && b.visible(0) && overlap_at(a, b, 0) {
                    return Err(Error::Parameter(format!(
                        "objects {} and {} overlap in the annotated frame",
                        a.id, b.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Ground-truth label map of frame `t`.
    pub fn labels(&self, t: usize) -> MaskSet {
        let mut m = MaskSet::background(self.height, self.width);
        for o in self.objects.iter().filter(|o| o.visible(t)) {
            let (ty, tx) = o.top_left(t);
            let y0 = ty.max(0) as usize;
            let x0 = tx.max(0) as usize;
            let y1 = (ty + o.size.0 as i64).clamp(0, self.height as i64) as usize;
            let x1 = (tx + o.size.1 as i64).clamp(0, self.width as i64) as usize;
            for y in y0..y1 {
                for x in x0..x1 {
                    m.set(y, x, o.id);
                }
            }
        }
        m
    }

    /// Frames in which any two objects overlap.
    pub fn occlusion_frames(&self) -> Vec<usize> {
        (0..self.frames)
            .filter(|&t| {
                self.objects.iter().enumerate().any(|(i, a)| {
                    self.objects[i + 1..]
                        .iter()
                        .any(|b| a.visible(t) && b.visible(t) && overlap_at(a, b, t))
                })
            })
            .collect()
    }
}

fn overlap_at(a: &SynthObject, b: &SynthObject, t: usize) -> bool {
    let (ay, ax) = a.top_left(t);
    let (by, bx) = b.top_left(t);
    ay < by + b.size.0 as i64
        && by < ay + a.size.0 as i64
        && ax < bx + b.size.1 as i64
        && bx < ax + a.size.1 as i64
}

/// Renders `spec` deterministically for `seed`.
pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<SequenceRecord> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..PALETTE.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let colours: Vec<[f32; 3]> = spec
        .objects
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let base = PALETTE[order[i % PALETTE.len()]];
            base.map(|c| (c + rng.gen_range(-0.04..0.04)).clamp(0.0, 1.0))
        })
        .collect();
    let bg_a: [f32; 3] = [0.30, 0.42, 0.32].map(|c: f32| c + rng.gen_range(-0.05..0.05));
    let bg_b: [f32; 3] = [0.45, 0.38, 0.50].map(|c: f32| c + rng.gen_range(-0.05..0.05));
    let (h, w) = (spec.height, spec.width);

    let mut frames = Vec::with_capacity(spec.frames);
    let mut gt = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let labels = spec.labels(t);
        let mut frame_rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(t as u64 + 1)));
        let mut data = vec![0.0f32; 3 * h * w];
        for y in 0..h {
            for x in 0..w {
                let l = labels.get(y, x);
                let base = if l == 0 {
                    let a = (x + y) as f32 / (h + w) as f32;
                    [0, 1, 2].map(|c| bg_a[c] * (1.0 - a) + bg_b[c] * a)
                } else {
                    let idx = spec.objects.iter().position(|o| o.id == l).expect("label from spec");
                    colours[idx]
                };
                for c in 0..3 {
                    let n = frame_rng.gen_range(-spec.noise..=spec.noise);
                    data[(c * h + y) * w + x] = (base[c] + n).clamp(0.0, 1.0);
                }
            }
        }
        frames.push(Tensor::new(vec![3, h, w], data)?);
        gt.push(labels);
    }
    Ok(SequenceRecord {
        name: format!("{}-{seed}", spec.name),
        frames,
        first_annotation: gt[0].clone(),
        gt: Some(gt),
    })
}
