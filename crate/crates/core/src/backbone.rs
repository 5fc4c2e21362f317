//! Encoders and decoder.
//!
//! The query encoder is a four-stage convolutional stack (conv3x3, ReLU,
//! 2× average pool per stage) producing stride-2/4/8/16 maps; the stride-16
//! map becomes the key and the stride-4 and stride-8 maps are kept as skip
//! features. There is no fifth (stride-32) stage. The mask encoder runs a
//! parallel stack over the frame plus the object's probability map and emits
//! per-object value features. The decoder turns an enriched readout back
//! into a full-resolution logit map by feature-guided upsampling through the
//! two skip levels, then bilinear interpolation.

use crate::error::{Error, Result};
use crate::mask::MaskSet;
use crate::tensor::{self, Tensor};
use crate::weights::WeightSet;

/// Overall stride of the key/value feature maps.
pub const STRIDE: usize = 16;

/// A `C × h × w` feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap(Tensor);

impl FeatureMap {
    pub fn new(t: Tensor) -> Result<Self> {
        t.dims3()?;
        Ok(FeatureMap(t))
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap(Tensor::zeros(&[channels, height, width]))
    }

    pub fn channels(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.0.shape()[2]
    }

    pub fn extents(&self) -> (usize, usize) {
        (self.height(), self.width())
    }

    pub fn pixels(&self) -> usize {
        self.height() * self.width()
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn tensor_mut(&mut self) -> &mut Tensor {
        &mut self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    /// Feature vector of one pixel.
    pub fn pixel(&self, y: usize, x: usize) -> Vec<f32> {
        let hw = self.pixels();
        let i = y * self.width() + x;
        (0..self.channels()).map(|c| self.0.data()[c * hw + i]).collect()
    }
}

/// Channel widths of the four encoder stages for a model width `c`.
pub fn stage_widths(c: usize) -> [usize; 4] {
    [(c / 4).max(8), (c / 2).max(8), c.max(8), c]
}

pub const QUERY_PREFIX: &str = "query";
pub const VALUE_PREFIX: &str = "value";

/// Output of [`encode_query`].
#[derive(Debug, Clone)]
pub struct QueryEncoding {
    pub key: FeatureMap,
    /// Stride-4 and stride-8 features, in that order.
    pub skips: Vec<FeatureMap>,
}

fn check_divisible(h: usize, w: usize) -> Result<()> {
    if h == 0 || w == 0 || h % STRIDE != 0 || w % STRIDE != 0 {
        return Err(Error::Contract(format!(
            "frame extents {h}×{w} must be positive multiples of {STRIDE}; pad before encoding"
        )));
    }
    Ok(())
}

/// Runs a four-stage stack, returning every stage's pooled output.
fn run_stages(input: &Tensor, weights: &WeightSet, prefix: &str) -> Result<Vec<Tensor>> {
    let mut x = input.clone();
    let mut outs = Vec::with_capacity(4);
    for stage in 1..=4 {
        let k = weights.get(&format!("{prefix}.stage{stage}.weight"))?;
        let b = weights.get(&format!("{prefix}.stage{stage}.bias"))?;
        let mut y = tensor::conv3x3(&x, k, b)?;
        tensor::relu_in_place(&mut y);
        x = tensor::avg_pool2(&y)?;
        outs.push(x.clone());
    }
    Ok(outs)
}

/// Scales every pixel vector to length `scale`. All-zero pixels stay zero.
fn normalize_pixels(x: &mut Tensor, scale: f32) -> Result<()> {
    let (c, h, w) = x.dims3()?;
    let hw = h * w;
    let data = x.data_mut();
    for i in 0..hw {
        let norm: f32 = (0..c).map(|ch| data[ch * hw + i].powi(2)).sum::<f32>().sqrt();
        if norm > 0.0 {
            let f = scale / norm;
            for ch in 0..c {
                data[ch * hw + i] *= f;
            }
        }
    }
    Ok(())
}

pub fn encode_query(frame: &Tensor, weights: &WeightSet) -> Result<QueryEncoding> {
    let (c, h, w) = frame.dims3()?;
    if c != 3 {
        return Err(Error::Dimension(format!("frames must have 3 channels, got {c}")));
    }
    check_divisible(h, w)?;
    let mut stages = run_stages(frame, weights, QUERY_PREFIX)?;
    let mut key = stages.pop().expect("four stages");
    let scale = weights.get("query.key_scale")?.data()[0];
    normalize_pixels(&mut key, scale)?;
    let s8 = stages.pop().expect("four stages");
    let s4 = stages.pop().expect("four stages");
    Ok(QueryEncoding {
        key: FeatureMap(key),
        skips: vec![FeatureMap(s4), FeatureMap(s8)],
    })
}

/// Value features of one object: depends on both frame and mask.
pub fn encode_value(frame: &Tensor, object_mask: &Tensor, weights: &WeightSet) -> Result<FeatureMap> {
    let (_, h, w) = frame.dims3()?;
    let (mc, mh, mw) = object_mask.dims3()?;
    if mc != 1 || (mh, mw) != (h, w) {
        return Err(Error::Dimension(format!(
            "mask {:?} does not match frame {:?}",
            object_mask.shape(),
            frame.shape()
        )));
    }
    check_divisible(h, w)?;
    let input = tensor::concat_channels(&[frame, object_mask])?;
    let mut stages = run_stages(&input, weights, VALUE_PREFIX)?;
    Ok(FeatureMap(stages.pop().expect("four stages")))
}

/// Memory key and value for one object of a segmented frame. The key ignores
/// the mask, so it is identical for every object of the same frame.
pub fn encode_mask(
    frame: &Tensor,
    object_mask: &Tensor,
    weights: &WeightSet,
) -> Result<(FeatureMap, FeatureMap)> {
    let value = encode_value(frame, object_mask, weights)?;
    let key = encode_query(frame, weights)?.key;
    Ok((key, value))
}

/// Upsamples a coarse single-channel map ×2, letting each fine pixel pick
/// among the 3×3 coarse cells around its parent by feature similarity.
fn guided_upsample(coarse: &Tensor, skip: &FeatureMap, temperature: f32) -> Result<Tensor> {
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(Error::Parameter(format!(
            "guide temperature must be positive, got {temperature}"
        )));
    }
    let (_, ch, cw) = coarse.dims3()?;
    let (fh, fw) = skip.extents();
    if (fh, fw) != (2 * ch, 2 * cw) {
        return Err(Error::Dimension(format!(
            "skip {fh}×{fw} is not twice the coarse map {ch}×{cw}"
        )));
    }
    let mut fine = skip.tensor().clone();
    let mut guide = tensor::avg_pool2(&fine)?;
    normalize_pixels(&mut fine, 1.0)?;
    normalize_pixels(&mut guide, 1.0)?;
    let c = skip.channels();
    let (fhw, chw) = (fh * fw, ch * cw);
    let fd = fine.data();
    let gd = guide.data();
    let cd = coarse.data();
    let mut out = Vec::with_capacity(fhw);
    let mut logits = [0.0f32; 9];
    let mut vals = [0.0f32; 9];
    for y in 0..fh {
        let py = y / 2;
        for x in 0..fw {
            let px = x / 2;
            let mut n = 0;
            for cy in py.saturating_sub(1)..=(py + 1).min(ch - 1) {
                for cx in px.saturating_sub(1)..=(px + 1).min(cw - 1) {
                    let gi = cy * cw + cx;
                    let fi = y * fw + x;
                    let d: f32 = (0..c)
                        .map(|k| (fd[k * fhw + fi] - gd[k * chw + gi]).powi(2))
                        .sum();
                    logits[n] = -d / temperature;
                    vals[n] = cd[gi];
                    n += 1;
                }
            }
            tensor::softmax_in_place(&mut logits[..n]);
            out.push(logits[..n].iter().zip(&vals[..n]).map(|(a, b)| a * b).sum());
        }
    }
    Tensor::new(vec![1, fh, fw], out)
}

/// Full-resolution logit map for one object.
pub fn decode(enriched: &FeatureMap, skips: &[FeatureMap], weights: &WeightSet) -> Result<Tensor> {
    let [s4, s8] = skips else {
        return Err(Error::Dimension(format!(
            "decoder expects stride-4 and stride-8 skips, got {} maps",
            skips.len()
        )));
    };
    let (eh, ew) = enriched.extents();
    if s8.extents() != (2 * eh, 2 * ew) || s4.extents() != (4 * eh, 4 * ew) {
        return Err(Error::Dimension(format!(
            "skip extents {:?}/{:?} do not match readout {eh}×{ew}",
            s4.extents(),
            s8.extents()
        )));
    }
    let head_w = weights.get("decoder.head.weight")?;
    let head_b = weights.get("decoder.head.bias")?.data()[0];
    if head_w.len() != enriched.channels() {
        return Err(Error::Dimension(format!(
            "decoder head has {} inputs, readout has {} channels",
            head_w.len(),
            enriched.channels()
        )));
    }
    let hw = eh * ew;
    let ed = enriched.tensor().data();
    let coarse: Vec<f32> = (0..hw)
        .map(|i| {
            head_w
                .data()
                .iter()
                .enumerate()
                .map(|(c, w)| w * ed[c * hw + i])
                .sum::<f32>()
                + head_b
        })
        .collect();
    let coarse = Tensor::new(vec![1, eh, ew], coarse)?;
    let t8 = weights.get("decoder.guide8.temperature")?.data()[0];
    let t4 = weights.get("decoder.guide4.temperature")?.data()[0];
    let at8 = guided_upsample(&coarse, s8, t8)?;
    let at4 = guided_upsample(&at8, s4, t4)?;
    tensor::resize_bilinear(&at4, eh * STRIDE, ew * STRIDE)
}

/// Per-pixel object probabilities and labels from per-object logits.
#[derive(Debug, Clone)]
pub struct Aggregated {
    /// `(K+1) × h × w`; channel 0 is background.
    pub probs: Tensor,
    /// Labels `0..=K` (object index, not ID).
    pub labels: MaskSet,
}

/// Softmax over `[0, logit_1, …, logit_K]` at each pixel, then argmax with
/// ties going to the lowest index.
pub fn aggregate_objects(logits: &[Tensor]) -> Result<Aggregated> {
    let first = logits
        .first()
        .ok_or_else(|| Error::Parameter("no object logits to aggregate".into()))?;
    let (_, h, w) = first.dims3()?;
    for l in logits {
        if l.shape() != [1, h, w] {
            return Err(Error::Dimension(format!(
                "logit map {:?} differs from {:?}",
                l.shape(),
                first.shape()
            )));
        }
    }
    let k = logits.len();
    let hw = h * w;
    let mut probs = vec![0.0f32; (k + 1) * hw];
    let mut scratch = vec![0.0f32; k + 1];
    for i in 0..hw {
        scratch[0] = 0.0;
        for (o, l) in logits.iter().enumerate() {
            scratch[o + 1] = l.data()[i];
        }
        tensor::softmax_in_place(&mut scratch);
        for (o, p) in scratch.iter().enumerate() {
            probs[o * hw + i] = *p;
        }
    }
    let probs = Tensor::new(vec![k + 1, h, w], probs)?;
    let labels = argmax_channels(&probs)?;
    Ok(Aggregated { probs, labels })
}

/// Channel index of the maximum at every pixel; ties go to the lowest.
pub fn argmax_channels(probs: &Tensor) -> Result<MaskSet> {
    let (c, h, w) = probs.dims3()?;
    if c > 256 {
        return Err(Error::Parameter(format!("{} objects exceed the 8-bit label range", c - 1)));
    }
    let hw = h * w;
    let d = probs.data();
    let labels = (0..hw)
        .map(|i| {
            let mut best = 0;
            for ch in 1..c {
                if d[ch * hw + i] > d[best * hw + i] {
                    best = ch;
                }
            }
            best as u8
        })
        .collect();
    MaskSet::new(h, w, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EngineConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> EngineConfig {
        EngineConfig {
            channels: 16,
            ..Default::default()
        }
    }

    fn random_frame(h: usize, w: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(&[3, h, w], |_| rng.gen())
    }

    #[test]
    fn zero_frame_zero_bias_gives_zero_features() {
        let ws = WeightSet::reference(&cfg(), 1).unwrap();
        // reference carriers use a bias of 1 for inverted colour channels
        let ws = ws.map(|name, t| {
            if name.ends_with(".bias") {
                Tensor::zeros(t.shape())
            } else {
                t.clone()
            }
        });
        let enc = encode_query(&Tensor::zeros(&[3, 32, 32]), &ws).unwrap();
        assert!(enc.key.tensor().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stride_arithmetic() {
        let ws = WeightSet::reference(&cfg(), 1).unwrap();
        let frame = random_frame(64, 64, 2);
        let enc = encode_query(&frame, &ws).unwrap();
        assert_eq!(enc.key.extents(), (4, 4));
        assert_eq!(enc.key.channels(), 16);
        assert_eq!(enc.skips[0].extents(), (16, 16));
        assert_eq!(enc.skips[1].extents(), (8, 8));
        let (k, v) = encode_mask(&frame, &Tensor::zeros(&[1, 64, 64]), &ws).unwrap();
        assert_eq!((k.extents(), v.extents()), ((4, 4), (4, 4)));
        assert_eq!((k.channels(), v.channels()), (16, 16));
    }

    #[test]
    fn non_divisible_frame_is_contract_violation() {
        let ws = WeightSet::reference(&cfg(), 1).unwrap();
        assert!(matches!(
            encode_query(&Tensor::zeros(&[3, 40, 32]), &ws),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn mask_changes_value_not_key() {
        let ws = WeightSet::reference(&cfg(), 4).unwrap();
        let frame = random_frame(32, 32, 5);
        let (k0, v0) = encode_mask(&frame, &Tensor::zeros(&[1, 32, 32]), &ws).unwrap();
        let (k1, v1) = encode_mask(&frame, &Tensor::full(&[1, 32, 32], 1.0), &ws).unwrap();
        assert_eq!(k0, k1);
        assert_ne!(v0, v1);
        assert!(matches!(
            encode_mask(&frame, &Tensor::zeros(&[1, 16, 32]), &ws),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn translation_covariance() {
        let ws = WeightSet::reference(&cfg(), 9).unwrap();
        let base = random_frame(96, 96, 3);
        // shift content right by 16 px, filling with a constant
        let mut shifted = Tensor::full(&[3, 96, 96], 0.5);
        let mut padded = Tensor::full(&[3, 96, 96], 0.5);
        for c in 0..3 {
            for y in 0..96 {
                for x in 16..80 {
                    padded.plane_mut(c)[y * 96 + x] = base.plane(c)[y * 96 + x];
                    shifted.plane_mut(c)[y * 96 + x + 16] = base.plane(c)[y * 96 + x];
                }
            }
        }
        let a = encode_query(&padded, &ws).unwrap().key;
        let b = encode_query(&shifted, &ws).unwrap().key;
        // receptive field is small; compare cells at least one cell from borders
        for y in 1..5 {
            for x in 1..4 {
                let pa = a.pixel(y, x);
                let pb = b.pixel(y, x + 1);
                for (u, v) in pa.iter().zip(&pb) {
                    assert!((u - v).abs() < 1e-5, "cell ({y},{x})");
                }
            }
        }
    }

    #[test]
    fn golden_query_checksum() {
        let ws = WeightSet::reference(&cfg(), 42).unwrap();
        let frame = random_frame(32, 32, 42);
        let enc = encode_query(&frame, &ws).unwrap();
        let sum: f64 = enc.key.tensor().data().iter().map(|&v| f64::from(v)).sum();
        let sum4: f64 = enc.skips[0].tensor().data().iter().map(|&v| f64::from(v)).sum();
        assert!((sum - GOLDEN_KEY_SUM).abs() < 1e-3, "key checksum {sum}");
        assert!((sum4 - GOLDEN_SKIP4_SUM).abs() < 1e-2, "skip checksum {sum4}");
    }

    const GOLDEN_KEY_SUM: f64 = 196.265_244_7;
    const GOLDEN_SKIP4_SUM: f64 = 192.224_970_4;

    #[test]
    fn decode_extents_and_zero_case() {
        let ws = WeightSet::reference(&cfg(), 1).unwrap();
        let frame = random_frame(48, 64, 1);
        let enc = encode_query(&frame, &ws).unwrap();
        let readout = FeatureMap::zeros(16, 3, 4);
        let out = decode(&readout, &enc.skips, &ws).unwrap();
        assert_eq!(out.shape(), &[1, 48, 64]);
        let again = decode(&readout, &enc.skips, &ws).unwrap();
        assert_eq!(out, again);

        let zero_ws = ws.map(|_, t| Tensor::zeros(t.shape())).map(|name, t| {
            if name.contains("temperature") {
                Tensor::full(t.shape(), 1.0)
            } else {
                t.clone()
            }
        });
        let zero_skips = vec![FeatureMap::zeros(8, 12, 16), FeatureMap::zeros(16, 6, 8)];
        let out = decode(&readout, &zero_skips, &zero_ws).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
        assert!(matches!(
            decode(&FeatureMap::zeros(16, 2, 4), &enc.skips, &ws),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn aggregate_examples() {
        let pos = Tensor::full(&[1, 2, 2], 10.0);
        let agg = aggregate_objects(&[pos]).unwrap();
        assert!(agg.labels.labels().iter().all(|&l| l == 1));
        let neg = Tensor::full(&[1, 2, 2], -10.0);
        assert!(aggregate_objects(&[neg]).unwrap().labels.labels().iter().all(|&l| l == 0));
        // softmax([0, 2, 5]) is maximal at index 2
        let a = Tensor::full(&[1, 1, 1], 2.0);
        let b = Tensor::full(&[1, 1, 1], 5.0);
        let agg = aggregate_objects(&[a, b]).unwrap();
        assert_eq!(agg.labels.labels(), &[2]);
        let e: Vec<f64> = [0.0f64, 2.0, 5.0].iter().map(|v| v.exp()).collect();
        let z: f64 = e.iter().sum();
        for (i, p) in agg.probs.data().iter().enumerate() {
            assert!((f64::from(*p) - e[i] / z).abs() < 1e-6);
        }
        assert!(matches!(aggregate_objects(&[]), Err(Error::Parameter(_))));
    }

    #[test]
    fn aggregate_ties_and_normalisation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let maps: Vec<Tensor> = (0..3)
            .map(|_| Tensor::from_fn(&[1, 5, 5], |_| rng.gen_range(-4.0..4.0)))
            .collect();
        let agg = aggregate_objects(&maps).unwrap();
        for i in 0..25 {
            let s: f32 = (0..4).map(|c| agg.probs.data()[c * 25 + i]).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
        let tie = aggregate_objects(&[Tensor::zeros(&[1, 1, 1])]).unwrap();
        assert_eq!(tie.labels.labels(), &[0]);
        let tie2 = aggregate_objects(&[Tensor::full(&[1, 1, 1], 1.0), Tensor::full(&[1, 1, 1], 1.0)]).unwrap();
        assert_eq!(tie2.labels.labels(), &[1]);
    }
}
