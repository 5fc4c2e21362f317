//! Named parameter tensors, their required shapes, seeded reference
//! initialisation, and the binary weight-file format.
//!
//! File layout (little-endian): the 6-byte magic `MVOSW1`, a `u32` entry
//! count, then per entry a `u32` name length, the UTF-8 name, a `u32` rank,
//! `rank` `u32` extents and the `f32` payload.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::backbone::stage_widths;
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 6] = b"MVOSW1";

/// Query FFN hidden width as a multiple of the model width.
pub const QUERY_FFN_EXPANSION: usize = 8;

/// Softmax sharpness of the reference key head: affinities between
/// identical keys come out at this value.
const KEY_SHARPNESS: f32 = 80.0;
/// Decoder head gain on the mask-carrier channel.
const HEAD_GAIN: f32 = 12.0;
/// Output scale of every residual branch in the reference transformer.
const RESIDUAL_GAIN: f32 = 0.1;
/// Decoder upsampling: lower values follow image edges more strictly.
const GUIDE_TEMPERATURE: f32 = 0.01;
/// Colour pass-through channels in the query encoder (RGB and 1−RGB).
/// Scale of the learned-texture channels relative to the colour carriers.
const TEXTURE_GAIN: f32 = 0.15;
const COLOUR_CARRIERS: usize = 6;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightSet {
    tensors: BTreeMap<String, Tensor>,
}

/// Every parameter the configured architecture needs, with its shape.
pub fn architecture(config: &EngineConfig) -> Vec<(String, Vec<usize>)> {
    let c = config.channels;
    let widths = stage_widths(c);
    let mut layers = Vec::new();
    for (prefix, c_in) in [("query", 3usize), ("value", 4usize)] {
        let mut prev = c_in;
        for (i, &w) in widths.iter().enumerate() {
            layers.push((format!("{prefix}.stage{}.weight", i + 1), vec![w, prev, 3, 3]));
            layers.push((format!("{prefix}.stage{}.bias", i + 1), vec![w]));
            prev = w;
        }
    }
    layers.push(("query.key_scale".into(), vec![1]));
    layers.push(("object.queries".into(), vec![config.queries, c]));
    for b in 0..config.blocks {
        for attn in ["mask_attn", "self_attn", "pixel_attn"] {
            for p in ["q", "k", "v", "o"] {
                layers.push((format!("block{b}.{attn}.{p}"), vec![c, c]));
            }
        }
        let hidden = QUERY_FFN_EXPANSION * c;
        layers.push((format!("block{b}.query_ffn.fc1.weight"), vec![c, hidden]));
        layers.push((format!("block{b}.query_ffn.fc1.bias"), vec![hidden]));
        layers.push((format!("block{b}.query_ffn.fc2.weight"), vec![hidden, c]));
        layers.push((format!("block{b}.query_ffn.fc2.bias"), vec![c]));
        for conv in ["conv1", "conv2"] {
            layers.push((format!("block{b}.pixel_ffn.{conv}.weight"), vec![c, c, 3, 3]));
            layers.push((format!("block{b}.pixel_ffn.{conv}.bias"), vec![c]));
        }
    }
    layers.push(("decoder.head.weight".into(), vec![c]));
    layers.push(("decoder.head.bias".into(), vec![1]));
    layers.push(("decoder.guide8.temperature".into(), vec![1]));
    layers.push(("decoder.guide4.temperature".into(), vec![1]));
    layers
}

struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    fn normal(&mut self, shape: &[usize], std: f32) -> Tensor {
        let rng = &mut self.rng;
        Tensor::from_fn(shape, |_| {
            let z: f32 = StandardNormal.sample(rng);
            z * std
        })
    }
}

impl WeightSet {
    pub fn from_map(tensors: BTreeMap<String, Tensor>) -> Self {
        WeightSet { tensors }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Contract(format!("missing weight {name:?}")))
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// New set with every tensor passed through `f`.
    pub fn map(&self, mut f: impl FnMut(&str, &Tensor) -> Tensor) -> WeightSet {
        WeightSet {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), f(k, v)))
                .collect(),
        }
    }

    /// Checks that the set holds exactly the layers `config` requires.
    pub fn validate(&self, config: &EngineConfig) -> Result<()> {
        let arch = architecture(config);
        for (name, shape) in &arch {
            let t = self
                .tensors
                .get(name)
                .ok_or_else(|| Error::Input(format!("weight set lacks {name:?}")))?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Input(format!(
                    "weight {name:?} has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
        }
        if self.tensors.len() != arch.len() {
            let known: std::collections::HashSet<&str> =
                arch.iter().map(|(n, _)| n.as_str()).collect();
            let extra: Vec<&str> = self
                .tensors
                .keys()
                .map(String::as_str)
                .filter(|k| !known.contains(k))
                .collect();
            return Err(Error::Input(format!("unexpected weights {extra:?}")));
        }
        Ok(())
    }

    /// Deterministic reference weights for `config`.
    ///
    /// Convolutions and projections are He-style Gaussians. On top of that
    /// a few channels are fixed pass-throughs so the untrained network is
    /// usable: the query encoder carries RGB and 1−RGB down to stride 16,
    /// the value encoder carries the object mask in channel 0, the decoder
    /// head reads that channel, and the transformer's residual branches
    /// never write to it.
    pub fn reference(config: &EngineConfig, seed: u64) -> Result<WeightSet> {
        config.validate()?;
        let c = config.channels;
        let mut init = Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let mut ws = WeightSet::default();
        for (name, shape) in architecture(config) {
            let t = if name.ends_with(".bias") {
                Tensor::zeros(&shape)
            } else if name.contains(".stage") || name.ends_with("conv1.weight") {
                let fan_in = shape[1] * 9;
                init.normal(&shape, (2.0 / fan_in as f32).sqrt())
            } else if name.ends_with("conv2.weight") {
                init.normal(&shape, RESIDUAL_GAIN / ((9 * c) as f32).sqrt())
            } else if name.ends_with("fc1.weight") {
                init.normal(&shape, (2.0 / c as f32).sqrt())
            } else if name.ends_with("fc2.weight") {
                init.normal(&shape, RESIDUAL_GAIN / (shape[0] as f32).sqrt())
            } else if name.ends_with(".o") {
                init.normal(&shape, RESIDUAL_GAIN / (c as f32).sqrt())
            } else if name.ends_with(".q") || name.ends_with(".k") || name.ends_with(".v") {
                init.normal(&shape, 1.0 / (c as f32).sqrt())
            } else if name == "object.queries" {
                init.normal(&shape, 1.0)
            } else {
                Tensor::zeros(&shape)
            };
            ws.insert(name, t);
        }
        ws.install_carriers(config);
        Ok(ws)
    }

    fn install_carriers(&mut self, config: &EngineConfig) {
        let c = config.channels;
        let widths = stage_widths(c);

        // query encoder: RGB then 1−RGB in the leading channels of every stage
        let mut prev = 3;
        for (i, &w) in widths.iter().enumerate() {
            let carriers = COLOUR_CARRIERS.min(w);
            let kname = format!("query.stage{}.weight", i + 1);
            let bname = format!("query.stage{}.bias", i + 1);
            let k = self.tensors.get_mut(&kname).expect("architecture");
            for v in &mut k.data_mut()[carriers * prev * 9..] {
                *v *= TEXTURE_GAIN;
            }
            for o in 0..carriers {
                k.data_mut()[o * prev * 9..(o + 1) * prev * 9].fill(0.0);
                let (src, sign) = if i == 0 { (o % 3, if o < 3 { 1.0 } else { -1.0 }) } else { (o, 1.0) };
                if src < prev {
                    k.data_mut()[(o * prev + src) * 9 + 4] = sign;
                }
            }
            if i == 0 {
                let b = self.tensors.get_mut(&bname).expect("architecture");
                for o in 3..carriers {
                    b.data_mut()[o] = 1.0;
                }
            }
            prev = w;
        }
        // value encoder: mask in channel 0
        let mut prev = 4;
        for (i, &w) in widths.iter().enumerate() {
            let k = self
                .tensors
                .get_mut(&format!("value.stage{}.weight", i + 1))
                .expect("architecture");
            k.data_mut()[..prev * 9].fill(0.0);
            let src = if i == 0 { 3 } else { 0 };
            k.data_mut()[src * 9 + 4] = 1.0;
            prev = w;
        }
        let key_scale = (KEY_SHARPNESS * (c as f32).sqrt()).sqrt();
        self.insert("query.key_scale", Tensor::full(&[1], key_scale));

        // residual branches leave the carrier channel alone
        for b in 0..config.blocks {
            for attn in ["mask_attn", "self_attn", "pixel_attn"] {
                let o = self.tensors.get_mut(&format!("block{b}.{attn}.o")).expect("architecture");
                for row in o.data_mut().chunks_mut(c) {
                    row[0] = 0.0;
                }
            }
            let fc2 = self
                .tensors
                .get_mut(&format!("block{b}.query_ffn.fc2.weight"))
                .expect("architecture");
            for row in fc2.data_mut().chunks_mut(c) {
                row[0] = 0.0;
            }
            let conv2 = self
                .tensors
                .get_mut(&format!("block{b}.pixel_ffn.conv2.weight"))
                .expect("architecture");
            conv2.data_mut()[..c * 9].fill(0.0);
        }

        let mut head = Tensor::zeros(&[c]);
        head.data_mut()[0] = HEAD_GAIN;
        self.insert("decoder.head.weight", head);
        self.insert("decoder.head.bias", Tensor::full(&[1], -HEAD_GAIN / 2.0));
        self.insert("decoder.guide8.temperature", Tensor::full(&[1], GUIDE_TEMPERATURE));
        self.insert("decoder.guide4.temperature", Tensor::full(&[1], GUIDE_TEMPERATURE));
    }

    /// Reference weights, or the file at `config.weights_path` when set.
    pub fn for_config(config: &EngineConfig) -> Result<WeightSet> {
        let ws = match &config.weights_path {
            Some(path) => WeightSet::load(path)?,
            None => WeightSet::reference(config, config.seed)?,
        };
        ws.validate(config)?;
        Ok(ws)
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &self.tensors {
            out.write_all(&(name.len() as u32).to_le_bytes())?;
            out.write_all(name.as_bytes())?;
            out.write_all(&(t.rank() as u32).to_le_bytes())?;
            for &e in t.shape() {
                out.write_all(&(e as u32).to_le_bytes())?;
            }
            let mut buf = Vec::with_capacity(t.len() * 4);
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            out.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from(mut input: impl Read) -> Result<WeightSet> {
        fn bad(m: impl Into<String>) -> Error {
            Error::Input(format!("weight file: {}", m.into()))
        }
        fn fill(input: &mut impl Read, buf: &mut [u8]) -> Result<()> {
            input
                .read_exact(buf)
                .map_err(|e| bad(format!("truncated ({e})")))
        }
        fn next_u32(input: &mut impl Read) -> Result<u32> {
            let mut word = [0u8; 4];
            fill(input, &mut word)?;
            Ok(u32::from_le_bytes(word))
        }
        let mut magic = [0u8; 6];
        fill(&mut input, &mut magic)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let count = next_u32(&mut input)?;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let name_len = next_u32(&mut input)? as usize;
            let mut name = vec![0u8; name_len];
            fill(&mut input, &mut name)?;
            let name = String::from_utf8(name).map_err(|_| bad("entry name is not UTF-8"))?;
            let rank = next_u32(&mut input)? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(next_u32(&mut input)? as usize);
            }
            let n: usize = shape.iter().product();
            let mut payload = vec![0u8; n * 4];
            fill(&mut input, &mut payload)?;
            let data = payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            if tensors.insert(name.clone(), Tensor::new(shape, data)?).is_some() {
                return Err(bad(format!("duplicate entry {name:?}")));
            }
        }
        Ok(WeightSet { tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<WeightSet> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        WeightSet::read_from(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> EngineConfig {
        EngineConfig {
            channels: 8,
            blocks: 2,
            ..Default::default()
        }
        .with_queries(4)
    }

    #[test]
    fn reference_is_deterministic_and_valid() {
        let a = WeightSet::reference(&small(), 7).unwrap();
        let b = WeightSet::reference(&small(), 7).unwrap();
        assert_eq!(a, b);
        a.validate(&small()).unwrap();
        assert_ne!(a, WeightSet::reference(&small(), 8).unwrap());
    }

    #[test]
    fn ffn_widths_follow_model_width() {
        let cfg = EngineConfig::paper_scale();
        let shapes: BTreeMap<String, Vec<usize>> = architecture(&cfg).into_iter().collect();
        assert_eq!(shapes["block0.query_ffn.fc1.weight"], vec![256, 2048]);
        assert_eq!(shapes["block2.pixel_ffn.conv1.weight"], vec![256, 256, 3, 3]);
        assert_eq!(shapes["object.queries"], vec![16, 256]);
    }

    #[test]
    fn validation_rejects_missing_extra_and_misshapen() {
        let cfg = small();
        let ws = WeightSet::reference(&cfg, 1).unwrap();
        let mut extra = ws.clone();
        extra.insert("decoder.bogus", Tensor::zeros(&[1]));
        assert!(matches!(extra.validate(&cfg), Err(Error::Input(_))));
        let mut missing = ws.clone();
        missing.tensors.remove("object.queries");
        assert!(matches!(missing.validate(&cfg), Err(Error::Input(_))));
        let mut wrong = ws;
        wrong.insert("object.queries", Tensor::zeros(&[3, 8]));
        assert!(matches!(wrong.validate(&cfg), Err(Error::Input(_))));
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let mut ws = WeightSet::reference(&small(), 3).unwrap();
        // odd bit patterns survive too
        ws.insert("decoder.head.bias", Tensor::full(&[1], f32::from_bits(0x8000_0001)));
        let mut buf = Vec::new();
        ws.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..6], MAGIC);
        let back = WeightSet::read_from(buf.as_slice()).unwrap();
        for ((na, ta), (nb, tb)) in ws.iter().zip(back.iter()) {
            assert_eq!(na, nb);
            assert_eq!(ta.shape(), tb.shape());
            let bits_a: Vec<u32> = ta.data().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u32> = tb.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn corrupt_files_rejected() {
        assert!(WeightSet::read_from(&b"MVOSW2\0\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        WeightSet::reference(&small(), 3).unwrap().write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(WeightSet::read_from(buf.as_slice()), Err(Error::Input(_))));
    }
}
