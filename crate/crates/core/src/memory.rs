//! Pixel memory: per-frame keys and per-object values, a permanent first
//! frame, interval-gated insertion, FIFO eviction and top-k filtered
//! attention readout.

use std::fmt::Write as _;

use crate::backbone::FeatureMap;
use crate::config::{EngineConfig, Similarity};
use crate::error::{Error, Result};
use crate::object::Readout;
use crate::tensor::{self, Tensor};

#[derive(Debug, Clone)]
pub struct MemoryEntry {
    pub frame_index: usize,
    pub key: FeatureMap,
    /// One value map per object, in object order.
    pub values: Vec<FeatureMap>,
    pub permanent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryPolicy {
    pub capacity: usize,
    pub interval: usize,
    pub topk: usize,
    pub similarity: Similarity,
}

impl MemoryPolicy {
    pub fn from_config(config: &EngineConfig) -> Self {
        MemoryPolicy {
            capacity: config.max_mem_frames,
            interval: config.mem_interval,
            topk: config.topk,
            similarity: config.similarity,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PixelMemoryBank {
    entries: Vec<MemoryEntry>,
    policy: MemoryPolicy,
    last_offered: usize,
    evicted: Vec<usize>,
}

fn check_entry(key: &FeatureMap, values: &[FeatureMap], objects: Option<usize>) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Parameter("memory entry needs at least one object value".into()));
    }
    if let Some(n) = objects {
        if values.len() != n {
            return Err(Error::Parameter(format!(
                "expected {n} object values, got {}",
                values.len()
            )));
        }
    }
    for v in values {
        if v.extents() != key.extents() {
            return Err(Error::Dimension(format!(
                "value extents {:?} differ from key extents {:?}",
                v.extents(),
                key.extents()
            )));
        }
        if v.channels() != values[0].channels() {
            return Err(Error::Parameter("object values disagree on channel count".into()));
        }
    }
    Ok(())
}

pub fn init_bank(
    first_key: FeatureMap,
    first_values: Vec<FeatureMap>,
    policy: MemoryPolicy,
) -> Result<PixelMemoryBank> {
    if policy.capacity == 0 || policy.interval == 0 || policy.topk == 0 {
        return Err(Error::Parameter(format!(
            "memory policy needs capacity, interval and top-k >= 1, got {policy:?}"
        )));
    }
    check_entry(&first_key, &first_values, None)?;
    Ok(PixelMemoryBank {
        entries: vec![MemoryEntry {
            frame_index: 0,
            key: first_key,
            values: first_values,
            permanent: true,
        }],
        policy,
        last_offered: 0,
        evicted: Vec::new(),
    })
}

impl PixelMemoryBank {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn policy(&self) -> MemoryPolicy {
        self.policy
    }

    pub fn objects(&self) -> usize {
        self.entries[0].values.len()
    }

    pub fn frame_indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.frame_index).collect()
    }

    /// Frame indices evicted so far, in eviction order.
    pub fn evicted(&self) -> &[usize] {
        &self.evicted
    }

    /// Total stored memory pixels across all entries.
    pub fn memory_pixels(&self) -> usize {
        self.entries.iter().map(|e| e.key.pixels()).sum()
    }

    /// Whether `frame_index` falls on the update cadence and can be stored.
    /// Callers use this to skip encoding frames that would be rejected.
    pub fn would_add(&self, frame_index: usize) -> bool {
        frame_index % self.policy.interval == 0 && self.policy.capacity > 1
    }

    pub fn maybe_add(
        &mut self,
        frame_index: usize,
        key: FeatureMap,
        values: Vec<FeatureMap>,
    ) -> Result<bool> {
        if frame_index <= self.last_offered {
            return Err(Error::Sequence(format!(
                "frame {frame_index} offered after frame {}",
                self.last_offered
            )));
        }
        self.last_offered = frame_index;
        if !self.would_add(frame_index) {
            return Ok(false);
        }
        check_entry(&key, &values, Some(self.objects()))?;
        let first = &self.entries[0];
        if key.extents() != first.key.extents() || key.channels() != first.key.channels() {
            return Err(Error::Dimension(format!(
                "key {}×{:?} does not match bank key {}×{:?}",
                key.channels(),
                key.extents(),
                first.key.channels(),
                first.key.extents()
            )));
        }
        if self.entries.len() >= self.policy.capacity {
            let oldest = self
                .entries
                .iter()
                .position(|e| !e.permanent)
                .expect("capacity > 1 leaves room for a non-permanent entry");
            let gone = self.entries.remove(oldest);
            self.evicted.push(gone.frame_index);
        }
        self.entries.push(MemoryEntry {
            frame_index,
            key,
            values,
            permanent: false,
        });
        Ok(true)
    }

    /// One `frame=<i> permanent=<0|1>` line per entry.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let _ = writeln!(s, "frame={} permanent={}", e.frame_index, u8::from(e.permanent));
        }
        s
    }

    fn check_query(&self, query_key: &FeatureMap) -> Result<()> {
        let k = &self.entries[0].key;
        if query_key.channels() != k.channels() {
            return Err(Error::Dimension(format!(
                "query key has {} channels, memory keys have {}",
                query_key.channels(),
                k.channels()
            )));
        }
        Ok(())
    }

    /// `M × C` matrix of every stored key pixel, entries in insertion order.
    fn key_rows(&self) -> Result<Tensor> {
        let c = self.entries[0].key.channels();
        let mut data = Vec::with_capacity(self.memory_pixels() * c);
        for e in &self.entries {
            data.extend_from_slice(e.key.tensor().pixels_as_rows()?.data());
        }
        Tensor::new(vec![self.memory_pixels(), c], data)
    }

    fn value_rows(&self, object: usize) -> Result<Tensor> {
        let c = self.entries[0].values[object].channels();
        let mut data = Vec::with_capacity(self.memory_pixels() * c);
        for e in &self.entries {
            data.extend_from_slice(e.values[object].tensor().pixels_as_rows()?.data());
        }
        Tensor::new(vec![self.memory_pixels(), c], data)
    }

    /// Top-k filtered, softmax-normalised attention weights, `Q × M`.
    pub fn attention_weights(&self, query_key: &FeatureMap) -> Result<Tensor> {
        self.check_query(query_key)?;
        let q = query_key.tensor().pixels_as_rows()?;
        let keys = self.key_rows()?;
        let c = q.dims2()?.1;
        let inv_sqrt_c = 1.0 / (c as f32).sqrt();
        let mut aff = tensor::matmul(&q, &keys.transpose2()?)?;
        let m = keys.dims2()?.0;
        if self.policy.similarity == Similarity::NegativeSquaredL2 {
            let key_sq: Vec<f32> = (0..m).map(|j| keys.row(j).iter().map(|v| v * v).sum()).collect();
            let q_rows = q.dims2()?.0;
            let q_sq: Vec<f32> = (0..q_rows).map(|i| q.row(i).iter().map(|v| v * v).sum()).collect();
            for (i, row) in aff.data_mut().chunks_mut(m).enumerate() {
                for (j, a) in row.iter_mut().enumerate() {
                    *a = 2.0 * *a - q_sq[i] - key_sq[j];
                }
            }
        }
        let mut order = Vec::new();
        for row in aff.data_mut().chunks_mut(m) {
            row.iter_mut().for_each(|a| *a *= inv_sqrt_c);
            tensor::topk_mask_row(row, self.policy.topk, &mut order);
            tensor::softmax_in_place(row);
        }
        Ok(aff)
    }

    /// Readout `R_0` for one object.
    pub fn read(&self, query_key: &FeatureMap, object: usize) -> Result<Readout> {
        if object >= self.objects() {
            return Err(Error::Parameter(format!(
                "object {object} out of range for {} objects",
                self.objects()
            )));
        }
        let weights = self.attention_weights(query_key)?;
        self.readout_with(&weights, query_key, object)
    }

    /// Readouts for every object, sharing one affinity computation.
    pub fn read_all(&self, query_key: &FeatureMap) -> Result<Vec<Readout>> {
        let weights = self.attention_weights(query_key)?;
        (0..self.objects())
            .map(|o| self.readout_with(&weights, query_key, o))
            .collect()
    }

    fn readout_with(&self, weights: &Tensor, query_key: &FeatureMap, object: usize) -> Result<Readout> {
        let values = self.value_rows(object)?;
        let (m, c) = values.dims2()?;
        let (q, _) = weights.dims2()?;
        let mut out = vec![0.0f32; q * c];
        for (i, w_row) in weights.data().chunks(m).enumerate() {
            let o = &mut out[i * c..(i + 1) * c];
            for (j, &w) in w_row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (ov, &vv) in o.iter_mut().zip(values.row(j)) {
                    *ov += w * vv;
                }
            }
        }
        let (h, w) = query_key.extents();
        let map = Tensor::new(vec![q, c], out)?.rows_as_pixels(h, w)?;
        Ok(Readout::initial(FeatureMap::new(map)?))
    }
}
