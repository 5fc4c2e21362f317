//! Multi-object label maps.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::tensor::{nearest_index, Tensor};

/// Per-frame segmentation: 0 is background, 1..=255 are object IDs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskSet {
    height: usize,
    width: usize,
    labels: Vec<u8>,
}

impl MaskSet {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::Dimension(format!(
                "{height}×{width} mask needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        Ok(MaskSet {
            height,
            width,
            labels,
        })
    }

    pub fn background(height: usize, width: usize) -> Self {
        MaskSet {
            height,
            width,
            labels: vec![0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn extents(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u8] {
        &mut self.labels
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, label: u8) {
        self.labels[y * self.width + x] = label;
    }

    /// Sorted non-background labels present in the map.
    pub fn object_ids(&self) -> Vec<u8> {
        let set: BTreeSet<u8> = self.labels.iter().copied().filter(|&l| l != 0).collect();
        set.into_iter().collect()
    }

    pub fn count(&self, id: u8) -> usize {
        self.labels.iter().filter(|&&l| l == id).count()
    }

    /// `1 × h × w` indicator of one object.
    pub fn object_indicator(&self, id: u8) -> Tensor {
        Tensor::new(
            vec![1, self.height, self.width],
            self.labels
                .iter()
                .map(|&l| if l == id { 1.0 } else { 0.0 })
                .collect(),
        )
        .expect("extent product matches label count")
    }

    pub fn flip_horizontal(&self) -> MaskSet {
        let mut labels = self.labels.clone();
        for row in labels.chunks_mut(self.width.max(1)) {
            row.reverse();
        }
        MaskSet { labels, ..*self }
    }

    /// Edge-replicating pad on the bottom/right, matching [`crate::tensor::pad_edge`].
    pub fn pad_edge(&self, out_h: usize, out_w: usize) -> Result<MaskSet> {
        if out_h < self.height || out_w < self.width || self.height == 0 || self.width == 0 {
            return Err(Error::Dimension(format!(
                "cannot pad {}×{} to {out_h}×{out_w}",
                self.height, self.width
            )));
        }
        let mut labels = Vec::with_capacity(out_h * out_w);
        for y in 0..out_h {
            let sy = y.min(self.height - 1);
            for x in 0..out_w {
                labels.push(self.get(sy, x.min(self.width - 1)));
            }
        }
        MaskSet::new(out_h, out_w, labels)
    }
}

/// Nearest-neighbour resize with pixel-center sampling. Never invents labels.
pub fn resize_nearest(mask: &MaskSet, out_h: usize, out_w: usize) -> Result<MaskSet> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::Parameter(format!(
            "resize target {out_h}×{out_w} has a zero extent"
        )));
    }
    let (h, w) = mask.extents();
    if h == 0 || w == 0 {
        return Err(Error::Parameter("cannot resize an empty mask".into()));
    }
    let xs: Vec<usize> = (0..out_w).map(|x| nearest_index(x, out_w, w)).collect();
    let mut labels = Vec::with_capacity(out_h * out_w);
    for y in 0..out_h {
        let sy = nearest_index(y, out_h, h);
        labels.extend(xs.iter().map(|&sx| mask.get(sy, sx)));
    }
    MaskSet::new(out_h, out_w, labels)
}
